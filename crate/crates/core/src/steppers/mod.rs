//! Time integration: discrete-gradient steps on fixed and moving meshes and
//! the non-conservative reference schemes.
//!
//! All schemes are written in the `u` coefficients with `K = A + E`; the
//! semi-discretization is `K u_t = -B w` where `w = K^{-1} grad_u I`.

mod dg;
pub mod newton;
mod reference;

pub use dg::{dg1_step_fixed, dg2_step_fixed, dg_moving_step};
pub use newton::{newton_solve, newton_solve_fd, ClosureSystem, NewtonOutcome, NonlinearSystem};
pub use reference::{implicit_midpoint_step, rk4_step, trapezoidal_step};

use crate::error::{Error, Result};
use crate::linalg::PeriodicBandMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JacobianMode {
    Analytic,
    FiniteDifference,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Absolute threshold on the residual infinity norm.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub jacobian_mode: JacobianMode,
    pub fd_epsilon: f64,
    /// DG1 only: evaluate `B1` at the transferred state instead of the midpoint.
    pub frozen_operator: bool,
    /// Start Newton from an explicit Euler step instead of the old state.
    pub euler_predictor: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-12,
            max_newton_iters: 50,
            jacobian_mode: JacobianMode::Analytic,
            fd_epsilon: 1e-7,
            frozen_operator: false,
            euler_predictor: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) || !self.newton_tol.is_finite() {
            return Err(Error::Parameter(format!("newton_tol must be positive, got {}", self.newton_tol)));
        }
        if self.max_newton_iters < 1 {
            return Err(Error::Parameter("max_newton_iters must be at least 1".into()));
        }
        if !(self.fd_epsilon > 0.0) || !self.fd_epsilon.is_finite() {
            return Err(Error::Parameter(format!("fd_epsilon must be positive, got {}", self.fd_epsilon)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub u_next: Vec<f64>,
    pub newton_iters: usize,
    pub residual_norm: f64,
    /// The scheme's own Hamiltonian (H1 for DG1/TR, H2 otherwise) at `u_next`.
    pub hamiltonian_value: f64,
}

fn check_dt(dt: f64) -> Result<()> {
    if !dt.is_finite() {
        return Err(Error::Parameter(format!("time step must be finite, got {dt}")));
    }
    Ok(())
}

/// `[[uu, uv], [vu, vv]]` on interleaved unknowns `x[2i] = u_i`, `x[2i+1] = v_i`.
fn interleave_blocks(
    uu: &PeriodicBandMatrix,
    uv: &PeriodicBandMatrix,
    vu: &PeriodicBandMatrix,
    vv: &PeriodicBandMatrix,
) -> PeriodicBandMatrix {
    let n = uu.dim();
    let p = uu.half_bandwidth();
    let mut out = PeriodicBandMatrix::zeros(2 * n, 2 * p + 1);
    for i in 0..n {
        let mut cols: Vec<usize> = (0..=2 * p).map(|k| (i + n * (p / n + 1) + k - p) % n).collect();
        cols.sort_unstable();
        cols.dedup();
        for j in cols {
            out.set(2 * i, 2 * j, uu.get(i, j));
            out.set(2 * i, 2 * j + 1, uv.get(i, j));
            out.set(2 * i + 1, 2 * j, vu.get(i, j));
            out.set(2 * i + 1, 2 * j + 1, vv.get(i, j));
        }
    }
    out
}

fn split_interleaved(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (x.iter().step_by(2).copied().collect(), x.iter().skip(1).step_by(2).copied().collect())
}

fn join_interleaved(u: &[f64], v: &[f64]) -> Vec<f64> {
    u.iter().zip(v).flat_map(|(a, b)| [*a, *b]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig { newton_tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { max_newton_iters: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn interleaving_round_trip() {
        let u = [1.0, 2.0, 3.0];
        let v = [4.0, 5.0, 6.0];
        let x = join_interleaved(&u, &v);
        assert_eq!(x, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        let (a, b) = split_interleaved(&x);
        assert_eq!(a, u);
        assert_eq!(b, v);
    }

    #[test]
    fn interleaved_matrix_matches_blocks() {
        for n in [4, 5, 9, 12] {
            let mut blocks = Vec::new();
            for s in 0..4 {
                let mut m = PeriodicBandMatrix::zeros(n, 3);
                for i in 0..n {
                    for k in 0..7 {
                        let j = (i + n + k - 3) % n;
                        m.set(i, j, (s * 100 + i * 10 + j) as f64 + 0.5);
                    }
                }
                blocks.push(m);
            }
            let big = interleave_blocks(&blocks[0], &blocks[1], &blocks[2], &blocks[3]);
            let d = big.to_dense();
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(d[(2 * i, 2 * j)], blocks[0].get(i, j));
                    assert_eq!(d[(2 * i, 2 * j + 1)], blocks[1].get(i, j));
                    assert_eq!(d[(2 * i + 1, 2 * j)], blocks[2].get(i, j));
                    assert_eq!(d[(2 * i + 1, 2 * j + 1)], blocks[3].get(i, j));
                }
            }
        }
    }
}
