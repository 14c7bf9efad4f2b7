use proptest::prelude::*;

use lod_stokes::mesh::SimplicialMesh;
use lod_stokes::polyspaces::{
    face_moments, monomials, num_element_qois, num_face_qois, project_pi_hm, seminorm_pm_vec, ElementPolyBasis,
    FacePolyBasis, Poly, VecPoly,
};
use lod_stokes::quadrature::{line_rule, triangle_rule};

fn triangle() -> impl Strategy<Value = [[f64; 2]; 3]> {
    // perturbations of an equilateral triangle keep the shape regular
    (prop::array::uniform6(-0.2f64..0.2), 0.05f64..2.0, -5.0f64..5.0).prop_map(|(d, s, shift)| {
        let base = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.75f64.sqrt()]];
        std::array::from_fn(|i| [s * (base[i][0] + d[2 * i]) + shift, s * (base[i][1] + d[2 * i + 1]) - shift])
    })
}

fn vec_poly(m: usize) -> impl Strategy<Value = VecPoly> {
    let n = (m + 1) * (m + 2) / 2;
    (prop::collection::vec(-1.0f64..1.0, n), prop::collection::vec(-1.0f64..1.0, n)).prop_map(move |(a, b)| {
        VecPoly([Poly { degree: m, coeffs: a }, Poly { degree: m, coeffs: b }])
    })
}

fn with_degree() -> impl Strategy<Value = (usize, VecPoly)> {
    (0usize..=3).prop_flat_map(|m| (Just(m), vec_poly(m)))
}

/// Integral over the triangle by a rule exact to `degree`.
fn integrate(v: [[f64; 2]; 3], degree: usize, f: impl Fn([f64; 2]) -> f64) -> f64 {
    let area = 0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[1][1] - v[0][1]) * (v[2][0] - v[0][0])).abs();
    let rule = triangle_rule(degree);
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(p, w)| {
            let x = [
                v[0][0] + p[0] * (v[1][0] - v[0][0]) + p[1] * (v[2][0] - v[0][0]),
                v[0][1] + p[0] * (v[1][1] - v[0][1]) + p[1] * (v[2][1] - v[0][1]),
            ];
            2.0 * area * w * f(x)
        })
        .sum()
}

#[test]
fn qoi_counts() {
    assert_eq!((0..4).map(num_face_qois).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
    assert_eq!((0..4).map(num_element_qois).collect::<Vec<_>>(), vec![0, 1, 3, 6]);
    for m in 0..4 {
        let b = ElementPolyBasis::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], 0, m);
        // G^m and Q^m together span the vector polynomials of degree m
        assert_eq!(b.dim_g() + b.dim_q(), 2 * monomials(m).len());
        assert_eq!(b.dim_q(), num_element_qois(m));
    }
}

#[test]
fn face_legendre_basis_is_orthogonal() {
    let mesh = SimplicialMesh::unit_square().red_refine().mesh;
    for face in 0..mesh.num_faces() {
        let b = FacePolyBasis::new(&mesh, face, 3);
        let rule = line_rule(8);
        for j in 0..4 {
            for k in 0..4 {
                let mut s = 0.0;
                for (&t, &w) in rule.points.iter().zip(&rule.weights) {
                    let x = [b.start[0] + t * (b.end[0] - b.start[0]), b.start[1] + t * (b.end[1] - b.start[1])];
                    s += w * b.length * b.value(j, x) * b.value(k, x);
                }
                let expected = if j == k { b.gram_diagonal(j) } else { 0.0 };
                assert!((s - expected).abs() < 1e-14, "face {face} ({j},{k}): {s}");
            }
        }
        // moments of a constant pick out j = 0 only
        let m = face_moments(&b, 0, |_| 2.0);
        assert!((m[0] - 2.0 * b.length).abs() < 1e-14 && m.iter().skip(1).all(|v| v.abs() < 1e-14));
    }
}

#[test]
fn projection_is_l2_orthogonal() {
    let mesh = SimplicialMesh::unit_square().red_refine().mesh;
    let f = |x: [f64; 2]| [(3.0 * x[0]).sin() * x[1].exp(), x[0] * x[1].powi(5)];
    for m in 0..=2 {
        let proj = project_pi_hm::<2>(&mesh, m, 14, f).unwrap();
        for t in 0..mesh.num_triangles() {
            let v = mesh.triangle_coords(t);
            for (a, b) in monomials(m) {
                for c in 0..2 {
                    let r = integrate(v, 14, |x| (f(x)[c] - proj.eval(t, x)[c]) * x[0].powi(a as i32) * x[1].powi(b as i32));
                    assert!(r.abs() < 1e-12, "m={m} t={t} ({a},{b}) c={c}: {r}");
                }
            }
        }
    }
}

#[test]
fn lift_of_affine_potential_gradient() {
    // m = 0, f = grad(phi) with phi affine: p_loc = phi - mean(phi)
    let v = [[0.2, 0.1], [0.9, 0.3], [0.4, 0.8]];
    let basis = ElementPolyBasis::new(v, 0, 0);
    let (b, c) = (1.5, -0.7);
    let f = VecPoly([Poly { degree: 0, coeffs: vec![b] }, Poly { degree: 0, coeffs: vec![c] }]);
    let lift = basis.pressure_lift(&f).unwrap();
    let centroid = [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0];
    for x in [[0.3, 0.3], [0.5, 0.4], v[2]] {
        let expected = b * (x[0] - centroid[0]) + c * (x[1] - centroid[1]);
        let got = lift.p_loc.eval(basis.frame.to_local(x));
        assert!((got - expected).abs() < 1e-13, "{got} vs {expected}");
    }
}

#[test]
fn lift_of_quadratic_potential_gradient() {
    // m = 1, f = grad(phi) with phi quadratic; the mean of a quadratic is
    // the average over the three edge midpoints
    let v = [[0.0, 0.0], [1.2, 0.2], [0.3, 0.9]];
    let phi = |x: [f64; 2]| 0.3 + x[0] - 2.0 * x[1] + 0.5 * x[0] * x[0] + 1.5 * x[0] * x[1] - x[1] * x[1];
    let grad = |x: [f64; 2]| [1.0 + x[0] + 1.5 * x[1], -2.0 + 1.5 * x[0] - 2.0 * x[1]];
    let mid = |i: usize, j: usize| [(v[i][0] + v[j][0]) / 2.0, (v[i][1] + v[j][1]) / 2.0];
    let mean = (phi(mid(0, 1)) + phi(mid(1, 2)) + phi(mid(2, 0))) / 3.0;
    let basis = ElementPolyBasis::new(v, 0, 1);
    let mesh = SimplicialMesh::new(v.to_vec(), vec![[0, 1, 2]]).unwrap();
    let f = project_pi_hm::<2>(&mesh, 1, 4, grad).unwrap();
    let lift = basis.pressure_lift(&f.vector(0)).unwrap();
    assert!(lift.q.max_abs_coeff() < 1e-12);
    for x in [[0.3, 0.3], [0.5, 0.2], v[1]] {
        let got = lift.p_loc.eval(basis.frame.to_local(x));
        assert!((got - (phi(x) - mean)).abs() < 1e-12);
    }
}

#[test]
fn complement_sources_have_no_lift() {
    for m in 1..=3 {
        let basis = ElementPolyBasis::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], 0, m);
        for q in &basis.q_basis {
            let lift = basis.pressure_lift(q).unwrap();
            assert!(lift.p_loc.coeffs.iter().all(|c| c.abs() < 1e-14));
            assert!(lift.q.sub(q).max_abs_coeff() < 1e-14);
        }
    }
}

proptest! {
    #[test]
    fn decomposition_is_direct_and_pythagorean(v in triangle(), (m, p) in with_degree()) {
        let basis = ElementPolyBasis::new(v, 0, m);
        let d = basis.decompose(&p).unwrap();
        prop_assert!(d.g.add(&d.q).sub(&p).max_abs_coeff() <= 1e-12);
        let (sp, sg, sq) = (seminorm_pm_vec(&p, m), seminorm_pm_vec(&d.g, m), seminorm_pm_vec(&d.q, m));
        prop_assert!((sp * sp - sg * sg - sq * sq).abs() <= 1e-10 * sp * sp.max(1e-300));
        // g is a gradient: its potential reproduces it and its curl vanishes
        let g = d.potential.grad();
        prop_assert!(g.0[0].with_degree(m).add(&d.g.0[0].clone().scaled(-1.0)).coeffs.iter().all(|c| c.abs() < 1e-13));
        let curl = g.0[1].grad().0[0].add(&g.0[0].grad().0[1].clone().scaled(-1.0));
        prop_assert!(curl.coeffs.iter().all(|c| c.abs() < 1e-12));
        // q is the combination of the complement basis given by q_coords
        let mut q = VecPoly::zeros(m);
        for (c, b) in d.q_coords.iter().zip(&basis.q_basis) {
            q = q.add(&b.clone().scaled(*c));
        }
        prop_assert!(q.sub(&d.q).max_abs_coeff() < 1e-13);
    }

    #[test]
    fn decomposition_is_linear(v in triangle(), p in vec_poly(2), r in vec_poly(2), a in -3.0f64..3.0) {
        let basis = ElementPolyBasis::new(v, 0, 2);
        let dp = basis.decompose(&p).unwrap();
        let dr = basis.decompose(&r).unwrap();
        let dsum = basis.decompose(&p.clone().scaled(a).add(&r)).unwrap();
        prop_assert!(dsum.q.sub(&dp.q.clone().scaled(a).add(&dr.q)).max_abs_coeff() < 1e-12);
    }

    #[test]
    fn projection_reproduces_polynomials(c in prop::collection::vec(-1.0f64..1.0, 6)) {
        let mesh = SimplicialMesh::unit_square().red_refine().mesh;
        let f = |x: [f64; 2]| {
            let s = c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[0] * x[0] + c[4] * x[0] * x[1] + c[5] * x[1] * x[1];
            [s, 2.0 * s]
        };
        let proj = project_pi_hm::<2>(&mesh, 2, 4, f).unwrap();
        for t in 0..mesh.num_triangles() {
            let x = mesh.barycenter(t);
            let e = proj.eval(t, [x[0] + 0.01, x[1] - 0.02]);
            let fx = f([x[0] + 0.01, x[1] - 0.02]);
            prop_assert!((e[0] - fx[0]).abs() < 1e-12 && (e[1] - fx[1]).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn complement_part_is_stable(v in triangle(), (m, p) in with_degree()) {
        let basis = ElementPolyBasis::new(v, 0, m);
        let d = basis.decompose(&p).unwrap();
        let np = basis.l2_inner(&p, &p).sqrt();
        let nq = basis.l2_inner(&d.q, &d.q).sqrt();
        prop_assert!(nq <= 50.0 * np);
    }

    #[test]
    fn lift_residual_vanishes(v in triangle(), f in vec_poly(2)) {
        let basis = ElementPolyBasis::new(v, 0, 2);
        let lift = basis.pressure_lift(&f).unwrap();
        let s = basis.frame.scale;
        // physical gradient by the chain rule through x -> (x - c) / s
        let g = lift.p_loc.grad();
        let area = 0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[1][1] - v[0][1]) * (v[2][0] - v[0][0])).abs();
        for x in [v[0], v[1], v[2], [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0]] {
            let l = basis.frame.to_local(x);
            let (gp, q, fx) = (g.eval(l), lift.q.eval(l), f.eval(l));
            for c in 0..2 {
                prop_assert!((gp[c] / s + q[c] - fx[c]).abs() <= 1e-11 * f.max_abs_coeff().max(1.0));
            }
        }
        let mean = integrate(v, 3, |x| lift.p_loc.eval(basis.frame.to_local(x)));
        prop_assert!(mean.abs() <= 1e-13 * area.max(1e-2) * (1.0 + s));
    }
}
