//! Element and face polynomial spaces.
//!
//! Polynomials on a coarse element `T` are stored in the scaled local
//! variables `xi = (x - x_T) / d_T`, `eta = (y - y_T) / d_T`, where `x_T` is
//! the barycenter and `d_T` the diameter. Monomials `xi^a eta^b` are ordered
//! by total degree, then by the power of `eta`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mesh::SimplicialMesh;
use crate::quadrature::{line_rule, triangle_rule};

/// Dimension of the scalar polynomials of total degree `<= n` in 2D.
pub const fn dim_p(n: usize) -> usize {
    (n + 1) * (n + 2) / 2
}

/// Position of `xi^a eta^b` in the graded monomial ordering.
pub const fn mono_index(a: usize, b: usize) -> usize {
    let n = a + b;
    n * (n + 1) / 2 + b
}

/// Exponent pairs in graded order up to degree `n`.
pub fn monomials(n: usize) -> Vec<(usize, usize)> {
    (0..=n).flat_map(|d| (0..=d).map(move |b| (d - b, b))).collect()
}

/// Number of element QOIs per coarse element for method order `m`.
pub const fn num_element_qois(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Number of face QOIs per interior face for method order `m`.
pub const fn num_face_qois(m: usize) -> usize {
    m + 1
}

/// Writes all monomial values of degree `<= n` at `(xi, eta)` into `out`.
pub fn monomial_values(n: usize, xi: f64, eta: f64, out: &mut [f64]) {
    debug_assert!(out.len() >= dim_p(n));
    out[0] = 1.0;
    let mut start = 0;
    for d in 1..=n {
        let next = start + d;
        // degree-d block from degree-(d-1) block: xi * first d, then eta * last
        for b in 0..d {
            out[next + b] = out[start + b] * xi;
        }
        out[next + d] = out[start + d - 1] * eta;
        start = next;
    }
}

/// Affine change of variables to scaled local coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalFrame {
    pub center: [f64; 2],
    pub scale: f64,
}

impl LocalFrame {
    pub fn for_element(mesh: &SimplicialMesh, t: usize) -> Self {
        LocalFrame {
            center: mesh.barycenter(t),
            scale: mesh.diameter(t),
        }
    }

    pub fn to_local(&self, x: [f64; 2]) -> [f64; 2] {
        [(x[0] - self.center[0]) / self.scale, (x[1] - self.center[1]) / self.scale]
    }
}

/// Scalar polynomial in local variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    pub degree: usize,
    pub coeffs: Vec<f64>,
}

impl Poly {
    pub fn zeros(degree: usize) -> Self {
        Poly {
            degree,
            coeffs: vec![0.0; dim_p(degree)],
        }
    }

    pub fn monomial(a: usize, b: usize, degree: usize) -> Self {
        let mut p = Poly::zeros(degree.max(a + b));
        p.coeffs[mono_index(a, b)] = 1.0;
        p
    }

    pub fn coeff(&self, a: usize, b: usize) -> f64 {
        if a + b > self.degree {
            0.0
        } else {
            self.coeffs[mono_index(a, b)]
        }
    }

    pub fn eval(&self, local: [f64; 2]) -> f64 {
        let mut vals = vec![0.0; dim_p(self.degree)];
        monomial_values(self.degree, local[0], local[1], &mut vals);
        vals.iter().zip(&self.coeffs).map(|(v, c)| v * c).sum()
    }

    /// Gradient with respect to the local variables.
    pub fn grad(&self) -> VecPoly {
        let d = self.degree.saturating_sub(1);
        let mut gx = Poly::zeros(d);
        let mut gy = Poly::zeros(d);
        for (a, b) in monomials(self.degree) {
            let c = self.coeffs[mono_index(a, b)];
            if a > 0 {
                gx.coeffs[mono_index(a - 1, b)] += a as f64 * c;
            }
            if b > 0 {
                gy.coeffs[mono_index(a, b - 1)] += b as f64 * c;
            }
        }
        VecPoly([gx, gy])
    }

    pub fn with_degree(&self, degree: usize) -> Self {
        let mut p = Poly::zeros(degree);
        for (a, b) in monomials(self.degree.min(degree)) {
            p.coeffs[mono_index(a, b)] = self.coeffs[mono_index(a, b)];
        }
        p
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.coeffs.iter_mut().for_each(|c| *c *= s);
        self
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.with_degree(self.degree.max(other.degree));
        for (a, b) in monomials(other.degree) {
            out.coeffs[mono_index(a, b)] += other.coeffs[mono_index(a, b)];
        }
        out
    }
}

/// Vector-valued polynomial in local variables.
#[derive(Clone, Debug, PartialEq)]
pub struct VecPoly(pub [Poly; 2]);

impl VecPoly {
    pub fn zeros(degree: usize) -> Self {
        VecPoly([Poly::zeros(degree), Poly::zeros(degree)])
    }

    pub fn degree(&self) -> usize {
        self.0[0].degree.max(self.0[1].degree)
    }

    pub fn eval(&self, local: [f64; 2]) -> [f64; 2] {
        [self.0[0].eval(local), self.0[1].eval(local)]
    }

    pub fn add(&self, other: &VecPoly) -> VecPoly {
        VecPoly([self.0[0].add(&other.0[0]), self.0[1].add(&other.0[1])])
    }

    pub fn sub(&self, other: &VecPoly) -> VecPoly {
        self.add(&other.clone().scaled(-1.0))
    }

    pub fn scaled(self, s: f64) -> VecPoly {
        let [a, b] = self.0;
        VecPoly([a.scaled(s), b.scaled(s)])
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.0.iter().flat_map(|p| p.coeffs.iter()).fold(0.0, |m, c| m.max(c.abs()))
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `|p|_{P^m}`: square root of the sum of squared order-`m` partial
/// derivatives, in the polynomial's own variables.
pub fn seminorm_pm(p: &Poly, m: usize) -> f64 {
    (0..=m)
        .map(|b| {
            let a = m - b;
            let d = p.coeff(a, b) * factorial(a) * factorial(b);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Vector version of [`seminorm_pm`], summing over components.
pub fn seminorm_pm_vec(p: &VecPoly, m: usize) -> f64 {
    (seminorm_pm(&p.0[0], m).powi(2) + seminorm_pm(&p.0[1], m).powi(2)).sqrt()
}

/// Result of splitting a vector polynomial into gradient and complement parts.
#[derive(Clone, Debug)]
pub struct Decomposition {
    /// `g = grad(potential)` in local variables.
    pub g: VecPoly,
    pub q: VecPoly,
    /// Scalar of degree `m + 1` without constant term.
    pub potential: Poly,
    /// Coordinates of `q` in the element's complement basis.
    pub q_coords: Vec<f64>,
}

/// Bases of `G^m(T)` and `Q^m(T)` on one coarse element.
#[derive(Clone, Debug)]
pub struct ElementPolyBasis {
    pub element: usize,
    pub degree: usize,
    pub frame: LocalFrame,
    pub vertices: [[f64; 2]; 3],
    pub area: f64,
    /// `(r, s)` with `1 <= r + s <= m + 1`; `g_basis[i] = grad(xi^r eta^s)`.
    pub g_pairs: Vec<(usize, usize)>,
    pub g_basis: Vec<VecPoly>,
    /// `(r, s)` with `r, s >= 1`, `r + s <= m + 1`;
    /// `q_basis[k] = (-r xi^(r-1) eta^s, s xi^r eta^(s-1))`.
    pub q_pairs: Vec<(usize, usize)>,
    pub q_basis: Vec<VecPoly>,
}

pub fn build_element_basis(mesh: &SimplicialMesh, t: usize, m: usize) -> ElementPolyBasis {
    ElementPolyBasis::new(mesh.triangle_coords(t), t, m)
}

impl ElementPolyBasis {
    pub fn new(vertices: [[f64; 2]; 3], element: usize, m: usize) -> Self {
        let [a, b, c] = vertices;
        let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs();
        let d = |p: [f64; 2], q: [f64; 2]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        let frame = LocalFrame {
            center: [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0],
            scale: d(a, b).max(d(b, c)).max(d(c, a)),
        };
        let mut g_pairs = Vec::new();
        let mut q_pairs = Vec::new();
        for n in 1..=m + 1 {
            for s in 0..=n {
                let r = n - s;
                g_pairs.push((r, s));
                if r >= 1 && s >= 1 {
                    q_pairs.push((r, s));
                }
            }
        }
        let g_basis = g_pairs
            .iter()
            .map(|&(r, s)| {
                let mut g = Poly::monomial(r, s, m + 1).grad();
                g.0[0] = g.0[0].with_degree(m);
                g.0[1] = g.0[1].with_degree(m);
                g
            })
            .collect();
        let q_basis = q_pairs.iter().map(|&(r, s)| q_function(r, s, m)).collect();
        ElementPolyBasis {
            element,
            degree: m,
            frame,
            vertices,
            area,
            g_pairs,
            g_basis,
            q_pairs,
            q_basis,
        }
    }

    pub fn dim_g(&self) -> usize {
        self.g_basis.len()
    }

    pub fn dim_q(&self) -> usize {
        self.q_basis.len()
    }

    /// Physical point of the reference-triangle point `(s, t)`.
    pub fn map_reference(&self, st: [f64; 2]) -> [f64; 2] {
        let [a, b, c] = self.vertices;
        [
            a[0] + st[0] * (b[0] - a[0]) + st[1] * (c[0] - a[0]),
            a[1] + st[0] * (b[1] - a[1]) + st[1] * (c[1] - a[1]),
        ]
    }

    /// Quadrature points (local coordinates) and physical weights on `T`.
    pub fn quadrature(&self, degree: usize) -> Vec<([f64; 2], f64)> {
        let rule = triangle_rule(degree);
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(&p, &w)| (self.frame.to_local(self.map_reference(p)), 2.0 * self.area * w))
            .collect()
    }

    /// `(p, q)_T` for vector polynomials in this element's local variables.
    pub fn l2_inner(&self, p: &VecPoly, q: &VecPoly) -> f64 {
        self.quadrature(p.degree() + q.degree())
            .into_iter()
            .map(|(x, w)| {
                let a = p.eval(x);
                let b = q.eval(x);
                w * (a[0] * b[0] + a[1] * b[1])
            })
            .sum()
    }

    /// `(1/|T|) int_T xi^a eta^b` for every monomial of degree `<= n`.
    pub fn monomial_means(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim_p(n)];
        let mut vals = vec![0.0; dim_p(n)];
        for (x, w) in self.quadrature(n) {
            monomial_values(n, x[0], x[1], &mut vals);
            for (o, v) in out.iter_mut().zip(&vals) {
                *o += w * v;
            }
        }
        out.iter_mut().for_each(|o| *o /= self.area);
        out
    }

    /// Splits `p` (degree `<= m`, local variables) as `g + q` with
    /// `g in G^m(T)`, `q in Q^m(T)`. Each exponent pair `(r, s)` is handled
    /// independently, so the split is exact and orthogonal in `|.|_{P^m}`.
    pub fn decompose(&self, p: &VecPoly) -> Result<Decomposition> {
        let m = self.degree;
        if p.degree() > m {
            return Err(Error::validation(format!("polynomial of degree {} exceeds m = {m}", p.degree())));
        }
        let mut potential = Poly::zeros(m + 1);
        let mut q = VecPoly::zeros(m);
        let mut q_coords = Vec::with_capacity(self.dim_q());
        for &(r, s) in &self.g_pairs {
            let a = if r >= 1 { p.0[0].coeff(r - 1, s) } else { 0.0 };
            let b = if s >= 1 { p.0[1].coeff(r, s - 1) } else { 0.0 };
            let (alpha, beta) = match (r, s) {
                (r, 0) => (a / r as f64, 0.0),
                (0, s) => (b / s as f64, 0.0),
                (r, s) => {
                    let ar = a / r as f64;
                    let bs = b / s as f64;
                    (0.5 * (ar + bs), 0.5 * (bs - ar))
                }
            };
            potential.coeffs[mono_index(r, s)] = alpha;
            if r >= 1 && s >= 1 {
                q_coords.push(beta);
                q.0[0].coeffs[mono_index(r - 1, s)] += -(r as f64) * beta;
                q.0[1].coeffs[mono_index(r, s - 1)] += s as f64 * beta;
            }
        }
        let mut g = potential.grad();
        g.0[0] = g.0[0].with_degree(m);
        g.0[1] = g.0[1].with_degree(m);
        Ok(Decomposition {
            g,
            q,
            potential,
            q_coords,
        })
    }

    /// Splits `f_T` (physical values, stored in local variables) as
    /// `grad p_loc + q_T` with `int_T p_loc = 0`. The returned `p_loc` is a
    /// polynomial in local variables whose values are physical pressures.
    pub fn pressure_lift(&self, f_t: &VecPoly) -> Result<PressureLift> {
        let dec = self.decompose(f_t)?;
        // grad_x = grad_xi / d, so p_loc = d * potential
        let mut p_loc = dec.potential.clone().scaled(self.frame.scale);
        let means = self.monomial_means(self.degree + 1);
        let mean: f64 = p_loc.coeffs.iter().zip(&means).map(|(c, m)| c * m).sum();
        p_loc.coeffs[0] -= mean;
        Ok(PressureLift {
            p_loc,
            q: dec.q,
            q_coords: dec.q_coords,
        })
    }
}

fn q_function(r: usize, s: usize, m: usize) -> VecPoly {
    let mut q = VecPoly::zeros(m);
    q.0[0].coeffs[mono_index(r - 1, s)] = -(r as f64);
    q.0[1].coeffs[mono_index(r, s - 1)] = s as f64;
    q
}

/// Output of [`ElementPolyBasis::pressure_lift`].
#[derive(Clone, Debug)]
pub struct PressureLift {
    pub p_loc: Poly,
    pub q: VecPoly,
    pub q_coords: Vec<f64>,
}

/// Largest cosine between `G^m(T)` and `Q^m(T)` in `L^2(T)`.
pub fn gq_cosine(basis: &ElementPolyBasis) -> f64 {
    if basis.dim_q() == 0 {
        return 0.0;
    }
    let gram = |u: &[VecPoly], v: &[VecPoly]| {
        DMatrix::from_fn(u.len(), v.len(), |i, j| basis.l2_inner(&u[i], &v[j]))
    };
    let gg = gram(&basis.g_basis, &basis.g_basis);
    let qq = gram(&basis.q_basis, &basis.q_basis);
    let gq = gram(&basis.g_basis, &basis.q_basis);
    let lg = gg.cholesky().expect("G basis is linearly independent").l();
    let lq = qq.cholesky().expect("Q basis is linearly independent").l();
    let lg_inv = lg.try_inverse().expect("triangular factor is invertible");
    let lq_inv = lq.try_inverse().expect("triangular factor is invertible");
    let cross = &lg_inv * gq * lq_inv.transpose();
    cross.singular_values().max()
}

/// `J = m + 1` shifted Legendre polynomials along one face, in the arclength
/// parameter `t in [0, 1]` running from `vertices[0]` to `vertices[1]`.
#[derive(Clone, Debug)]
pub struct FacePolyBasis {
    pub face: usize,
    pub degree: usize,
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub length: f64,
}

impl FacePolyBasis {
    pub fn new(mesh: &SimplicialMesh, face: usize, m: usize) -> Self {
        let f = &mesh.faces()[face];
        FacePolyBasis {
            face,
            degree: m,
            start: mesh.vertices()[f.vertices[0]],
            end: mesh.vertices()[f.vertices[1]],
            length: f.length,
        }
    }

    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Parameter of the orthogonal projection of `x` onto the face line.
    pub fn parameter(&self, x: [f64; 2]) -> f64 {
        let d = [self.end[0] - self.start[0], self.end[1] - self.start[1]];
        ((x[0] - self.start[0]) * d[0] + (x[1] - self.start[1]) * d[1]) / (self.length * self.length)
    }

    /// Values of all `J` basis functions at parameter `t`.
    pub fn values_at(&self, t: f64, out: &mut [f64]) {
        legendre_values(self.degree, 2.0 * t - 1.0, out);
    }

    pub fn value(&self, j: usize, x: [f64; 2]) -> f64 {
        let mut v = vec![0.0; self.len()];
        self.values_at(self.parameter(x), &mut v);
        v[j]
    }

    /// `int_F p_j p_k = |F| / (2j + 1) delta_jk`.
    pub fn gram_diagonal(&self, j: usize) -> f64 {
        self.length / (2 * j + 1) as f64
    }
}

/// Legendre polynomials `P_0..=P_n` on `[-1, 1]`.
pub fn legendre_values(n: usize, x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if n >= 1 {
        out[1] = x;
    }
    for k in 2..=n {
        let kf = k as f64;
        out[k] = ((2.0 * kf - 1.0) * x * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf;
    }
}

/// Discontinuous piecewise polynomials on the coarse mesh, `C` components.
#[derive(Clone, Debug)]
pub struct PiecewisePolyField {
    pub degree: usize,
    pub components: usize,
    pub frames: Vec<LocalFrame>,
    /// Per element: `components * dim_p(degree)` coefficients, component-major.
    pub coeffs: Vec<Vec<f64>>,
}

impl PiecewisePolyField {
    pub fn component(&self, t: usize, c: usize) -> Poly {
        let n = dim_p(self.degree);
        Poly {
            degree: self.degree,
            coeffs: self.coeffs[t][c * n..(c + 1) * n].to_vec(),
        }
    }

    pub fn vector(&self, t: usize) -> VecPoly {
        VecPoly([self.component(t, 0), self.component(t, 1)])
    }

    pub fn eval(&self, t: usize, x: [f64; 2]) -> Vec<f64> {
        let local = self.frames[t].to_local(x);
        (0..self.components).map(|c| self.component(t, c).eval(local)).collect()
    }
}

/// Elementwise `L^2` projection onto polynomials of degree `<= m`, with
/// integrals evaluated by a rule exact to degree `quad_degree`.
pub fn project_pi_hm<const C: usize>(
    mesh: &SimplicialMesh,
    m: usize,
    quad_degree: usize,
    f: impl Fn([f64; 2]) -> [f64; C],
) -> Result<PiecewisePolyField> {
    let n = dim_p(m);
    let mut frames = Vec::with_capacity(mesh.num_triangles());
    let mut coeffs = Vec::with_capacity(mesh.num_triangles());
    let mut vals = vec![0.0; n];
    for t in 0..mesh.num_triangles() {
        let basis = ElementPolyBasis::new(mesh.triangle_coords(t), t, 0);
        let mut mass = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DMatrix::<f64>::zeros(n, C);
        let rule = triangle_rule(quad_degree.max(2 * m));
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            let x = basis.map_reference(p);
            let local = basis.frame.to_local(x);
            let w = 2.0 * basis.area * w;
            monomial_values(m, local[0], local[1], &mut vals);
            let fx = f(x);
            for i in 0..n {
                for j in 0..n {
                    mass[(i, j)] += w * vals[i] * vals[j];
                }
                for c in 0..C {
                    rhs[(i, c)] += w * vals[i] * fx[c];
                }
            }
        }
        let chol = mass
            .cholesky()
            .ok_or_else(|| Error::structure(format!("singular element mass matrix on element {t}")))?;
        let sol = chol.solve(&rhs);
        let mut flat = Vec::with_capacity(C * n);
        for c in 0..C {
            flat.extend(sol.column(c).iter());
        }
        frames.push(basis.frame);
        coeffs.push(flat);
    }
    Ok(PiecewisePolyField {
        degree: m,
        components: C,
        frames,
        coeffs,
    })
}

/// `int_F g(x) p_j(x) dsigma` for all `j`, by Gauss-Legendre on the face.
pub fn face_moments(basis: &FacePolyBasis, extra_degree: usize, g: impl Fn([f64; 2]) -> f64) -> DVector<f64> {
    let rule = line_rule(basis.degree + extra_degree);
    let mut out = DVector::zeros(basis.len());
    let mut vals = vec![0.0; basis.len()];
    for (&t, &w) in rule.points.iter().zip(&rule.weights) {
        let x = [
            basis.start[0] + t * (basis.end[0] - basis.start[0]),
            basis.start[1] + t * (basis.end[1] - basis.start[1]),
        ];
        basis.values_at(t, &mut vals);
        let gx = g(x);
        for j in 0..basis.len() {
            out[j] += w * basis.length * gx * vals[j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_basis(m: usize) -> ElementPolyBasis {
        ElementPolyBasis::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], 0, m)
    }

    #[test]
    fn dimensions() {
        for m in 0..5 {
            let b = reference_basis(m);
            assert_eq!(b.dim_g() + b.dim_q(), (m + 1) * (m + 2));
            assert_eq!(b.dim_q(), num_element_qois(m));
        }
        assert_eq!(reference_basis(0).dim_g(), 2);
        assert_eq!(reference_basis(1).dim_g(), 5);
        let mut pairs = reference_basis(2).q_pairs;
        pairs.sort();
        assert_eq!(pairs, vec![(1, 1), (1, 2), (2, 1)]);
    }

    #[test]
    fn monomial_ordering() {
        let mut vals = vec![0.0; dim_p(3)];
        monomial_values(3, 2.0, 3.0, &mut vals);
        for (a, b) in monomials(3) {
            assert_eq!(vals[mono_index(a, b)], 2f64.powi(a as i32) * 3f64.powi(b as i32));
        }
    }

    #[test]
    fn simple_decompositions() {
        let b = reference_basis(1);
        let mut p = VecPoly::zeros(1);
        p.0[0].coeffs[0] = 1.0;
        let d = b.decompose(&p).unwrap();
        assert!(d.q.max_abs_coeff() < 1e-15);
        assert!(d.g.sub(&p).max_abs_coeff() < 1e-15);

        let rot = b.q_basis[0].clone();
        let d = b.decompose(&rot).unwrap();
        assert!(d.g.max_abs_coeff() < 1e-15);
        assert!(d.q.sub(&rot).max_abs_coeff() < 1e-15);
    }

    #[test]
    fn seminorm_examples() {
        assert_eq!(seminorm_pm(&Poly::monomial(1, 0, 1), 1), 1.0);
        let mut c = Poly::zeros(2);
        c.coeffs[0] = 3.0;
        assert_eq!(seminorm_pm(&c, 1), 0.0);
        assert_eq!(seminorm_pm(&c, 2), 0.0);
    }

    #[test]
    fn legendre_face_gram_is_diagonal() {
        let mesh = SimplicialMesh::unit_square();
        let f = mesh.interior_faces().next().unwrap();
        let basis = FacePolyBasis::new(&mesh, f, 4);
        let rule = line_rule(8);
        for j in 0..5 {
            for k in 0..5 {
                let g = face_moments(&basis, 4, |x| basis.value(k, x));
                let expected = if j == k { basis.gram_diagonal(j) } else { 0.0 };
                assert!((g[j] - expected).abs() < 1e-12, "{j} {k}");
            }
        }
        assert!(rule.points.len() > 1);
        let ones = face_moments(&basis, 0, |_| 1.0);
        assert!((ones[0] - basis.length).abs() < 1e-14);
    }

    #[test]
    fn projection_of_x_is_centroid() {
        let mesh = SimplicialMesh::unit_square().red_refine().mesh;
        let proj = project_pi_hm(&mesh, 0, 2, |x| [x[0]]).unwrap();
        for t in 0..mesh.num_triangles() {
            assert!((proj.eval(t, [0.0, 0.0])[0] - mesh.barycenter(t)[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn projection_reproduces_polynomials() {
        let mesh = SimplicialMesh::unit_square().red_refine().mesh;
        let f = |x: [f64; 2]| [1.0 + x[0] * x[1] - 2.0 * x[1] * x[1], x[0] * x[0] * x[0]];
        let proj = project_pi_hm(&mesh, 3, 6, f).unwrap();
        for t in 0..mesh.num_triangles() {
            let c = mesh.barycenter(t);
            let x = [c[0] + 0.01, c[1] - 0.02];
            let v = proj.eval(t, x);
            let e = f(x);
            assert!((v[0] - e[0]).abs() < 1e-12 && (v[1] - e[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn lift_of_gradient() {
        let b = ElementPolyBasis::new([[0.2, 0.1], [0.7, 0.3], [0.3, 0.6]], 0, 1);
        // phi = (x - x_T)^2 has grad (2 (x - x_T), 0) = (2 d xi, 0)
        let d = b.frame.scale;
        let mut f = VecPoly::zeros(1);
        f.0[0].coeffs[mono_index(1, 0)] = 2.0 * d;
        let lift = b.pressure_lift(&f).unwrap();
        assert!(lift.q.max_abs_coeff() < 1e-14);
        let means = b.monomial_means(2);
        let phi_mean = d * d * means[mono_index(2, 0)];
        let expected = Poly::monomial(2, 0, 2).scaled(d * d);
        let mut expected = expected;
        expected.coeffs[0] -= phi_mean;
        for (x, y) in lift.p_loc.coeffs.iter().zip(&expected.coeffs) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
