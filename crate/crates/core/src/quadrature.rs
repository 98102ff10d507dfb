//! Gauss–Legendre rules on (-1, 1).

use crate::error::{Error, Result};

/// Points used for every polynomial integral in the assembly; exact up to
/// degree 9, the triple product of cubics.
pub const DEFAULT_POINTS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(mid + half * p))
            .sum::<f64>()
            * half
    }

    /// Points and weights mapped to `[0, 1]`.
    pub fn unit_interval(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.points.iter().map(|p| 0.5 * (p + 1.0)).collect(),
            self.weights.iter().map(|w| 0.5 * w).collect(),
        )
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss–Legendre rule with `n_points` nodes, `1 <= n_points <= 8`.
pub fn gauss_rule(n_points: usize) -> Result<QuadratureRule> {
    if !(1..=8).contains(&n_points) {
        return Err(Error::UnsupportedQuadrature(n_points));
    }
    let n = n_points;
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if n % 2 == 1 && i == n / 2 {
            x = 0.0;
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = -x;
        points[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Ok(QuadratureRule { points, weights })
}
