//! Gauss–Legendre rules on the unit interval and collapsed (Duffy) rules on
//! the reference triangle `{(s, t) : s, t >= 0, s + t <= 1}`.
//!
//! The triangle rules are tensor products of Gauss–Legendre rules pulled back
//! through the collapsing map `(u, v) -> (u, v (1 - u))`. A rule requested for
//! degree `d` integrates every bivariate polynomial of total degree `<= d`
//! exactly.

use std::sync::OnceLock;

const MAX_CACHED_POINTS: usize = 32;

/// Nodes and weights of a rule on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Nodes (reference coordinates) and weights of a rule on the reference
/// triangle. Weights sum to `1/2`.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn compute_gauss_legendre(n: usize) -> LineRule {
    assert!(n >= 1);
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, refined by Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map from [-1, 1] to [0, 1]
        points[i] = 0.5 * (1.0 - x);
        points[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    LineRule { points, weights }
}

/// Gauss–Legendre rule with `n` points on `[0, 1]` (exact to degree `2n - 1`).
pub fn gauss_legendre(n: usize) -> &'static LineRule {
    static CACHE: OnceLock<Vec<LineRule>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| (1..=MAX_CACHED_POINTS).map(compute_gauss_legendre).collect());
    assert!(
        (1..=MAX_CACHED_POINTS).contains(&n),
        "Gauss-Legendre rule with {n} points not available"
    );
    &cache[n - 1]
}

/// Line rule exact for polynomials of degree `<= degree`.
pub fn line_rule(degree: usize) -> &'static LineRule {
    gauss_legendre(degree / 2 + 1)
}

fn compute_triangle_rule(degree: usize) -> TriangleRule {
    // the collapse adds one power of (1 - u)
    let n = (degree + 3) / 2;
    let rule = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&u, &wu) in rule.points.iter().zip(&rule.weights) {
        for (&v, &wv) in rule.points.iter().zip(&rule.weights) {
            points.push([u, v * (1.0 - u)]);
            weights.push(wu * wv * (1.0 - u));
        }
    }
    TriangleRule { points, weights }
}

/// Triangle rule exact for polynomials of total degree `<= degree`.
pub fn triangle_rule(degree: usize) -> &'static TriangleRule {
    static CACHE: OnceLock<Vec<TriangleRule>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| (0..2 * MAX_CACHED_POINTS - 2).map(compute_triangle_rule).collect());
    assert!(degree < cache.len(), "triangle rule of degree {degree} not available");
    &cache[degree]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_rules_integrate_monomials() {
        for degree in 0..20 {
            let rule = line_rule(degree);
            for k in 0..=degree {
                let q: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| w * x.powi(k as i32))
                    .sum();
                assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "deg {degree} k {k}");
            }
        }
    }

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn triangle_rules_integrate_monomials() {
        // int_T s^a t^b = a! b! / (a + b + 2)!
        for degree in 0..16 {
            let rule = triangle_rule(degree);
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let q: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    assert!((q - exact).abs() < 1e-15, "deg {degree} ({a},{b})");
                }
            }
        }
    }
}
