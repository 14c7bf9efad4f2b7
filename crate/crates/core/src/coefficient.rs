//! Rough random viscosity with a curved high-viscosity inclusion.
//!
//! Values come from `ChaCha8Rng::seed_from_u64(seed)`: each element of the
//! level-`eps_level` red mesh, in index order, draws one `u64` and maps it
//! to `[0, 1)` as `(x >> 11) * 2^-53`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::CoefficientField;
use crate::mesh::MeshHierarchy;

/// Inclusion curve `y = a (x - b)^2 + c`, `x in [0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Parabola {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for Parabola {
    fn default() -> Self {
        Parabola { a: 4.0, b: 0.5, c: 0.25 }
    }
}

impl Parabola {
    fn y(&self, x: f64) -> f64 {
        self.a * (x - self.b).powi(2) + self.c
    }

    /// Euclidean distance from `p` to the curve over `x in [0, 1]`.
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        let d2 = |x: f64| (x - p[0]).powi(2) + (self.y(x) - p[1]).powi(2);
        // derivative of d2 / 2; a cubic, so sign changes bracket all minima
        let g = |x: f64| (x - p[0]) + (self.y(x) - p[1]) * 2.0 * self.a * (x - self.b);
        let mut best = d2(0.0).min(d2(1.0));
        const N: usize = 64;
        for i in 0..N {
            let (mut lo, mut hi) = (i as f64 / N as f64, (i + 1) as f64 / N as f64);
            if g(lo).signum() == g(hi).signum() {
                continue;
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if g(lo).signum() == g(mid).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            best = best.min(d2(0.5 * (lo + hi)));
        }
        best.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSpec {
    /// `eps = 2^-eps_level`.
    pub eps_level: usize,
    pub nu_min: f64,
    pub nu_max: f64,
    pub inclusion_value: f64,
    /// Inclusion half-width in units of `eps`.
    pub inclusion_width: f64,
    pub parabola: Parabola,
    pub seed: u64,
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        CoefficientSpec {
            eps_level: 6,
            nu_min: 0.1,
            nu_max: 1.0,
            inclusion_value: 10.0,
            inclusion_width: 4.0,
            parabola: Parabola::default(),
            seed: 0,
        }
    }
}

/// Uniform float in `[0, 1)` from the top 53 bits.
pub fn unit_float(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Piecewise constant `nu` on the level-`eps_level` mesh, `sigma = 0`.
pub fn gen_coefficient(spec: &CoefficientSpec, h: &MeshHierarchy) -> Result<CoefficientField> {
    if spec.eps_level > h.fine_level() {
        return Err(Error::validation(format!(
            "eps = 2^-{} is not representable on fine level {}",
            spec.eps_level,
            h.fine_level()
        )));
    }
    if !(spec.nu_min > 0.0 && spec.nu_min <= spec.nu_max && spec.inclusion_value > 0.0) {
        return Err(Error::validation(format!(
            "viscosity range [{}, {}] with inclusion {} is not positive",
            spec.nu_min, spec.nu_max, spec.inclusion_value
        )));
    }
    let fine = h.fine();
    let n_eps = 2 * 4usize.pow(spec.eps_level as u32);
    // centroid of each eps element as the mean of its equal-area descendants
    let mut centroid = vec![[0.0f64; 2]; n_eps];
    let mut count = vec![0usize; n_eps];
    for t in 0..fine.num_triangles() {
        let e = h.ancestor(t, spec.eps_level);
        let c = fine.barycenter(t);
        centroid[e][0] += c[0];
        centroid[e][1] += c[1];
        count[e] += 1;
    }
    let eps = 0.5f64.powi(spec.eps_level as i32);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let values: Vec<f64> = (0..n_eps)
        .map(|e| {
            let u = unit_float(&mut rng);
            let c = [centroid[e][0] / count[e] as f64, centroid[e][1] / count[e] as f64];
            if spec.parabola.distance(c) <= spec.inclusion_width * eps {
                spec.inclusion_value
            } else {
                spec.nu_min + (spec.nu_max - spec.nu_min) * u
            }
        })
        .collect();
    let nu = (0..fine.num_triangles()).map(|t| values[h.ancestor(t, spec.eps_level)]).collect();
    Ok(CoefficientField {
        nu,
        sigma: vec![0.0; fine.num_triangles()],
        seed: Some(spec.seed),
        eps_level: Some(spec.eps_level),
        description: format!(
            "uniform [{}, {}] on eps = 2^-{}, {} within {} eps of y = {} (x - {})^2 + {}",
            spec.nu_min,
            spec.nu_max,
            spec.eps_level,
            spec.inclusion_value,
            spec.inclusion_width,
            spec.parabola.a,
            spec.parabola.b,
            spec.parabola.c
        ),
    })
}
