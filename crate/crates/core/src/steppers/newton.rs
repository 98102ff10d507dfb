//! Newton iteration with analytic or forward-difference Jacobians.

use nalgebra::DMatrix;

use super::{JacobianMode, SolverConfig};
use crate::error::{check_len, Error, Result};
use crate::linalg::{inf_norm, DenseLu, LinearSolver};

/// A square nonlinear system `R(x) = 0`.
pub trait NonlinearSystem {
    fn dim(&self) -> usize;
    fn residual(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// Factorized Jacobian at `x`.
    fn jacobian(&self, x: &[f64]) -> Result<Box<dyn LinearSolver>>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Dense forward-difference Jacobian, column `j` perturbed by
/// `fd_epsilon * max(1, |x_j|)`.
pub fn fd_jacobian(
    residual: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    x: &[f64],
    r0: &[f64],
    fd_epsilon: f64,
) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut jac = DMatrix::zeros(r0.len(), n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = fd_epsilon * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let rp = residual(&xp)?;
        xp[j] = x[j];
        let h = (x[j] + h) - x[j];
        for i in 0..r0.len() {
            jac[(i, j)] = (rp[i] - r0[i]) / h;
        }
    }
    Ok(jac)
}

/// Solves `system(x) = 0` from `x0`. Converged when `||R||_inf <= newton_tol`.
pub fn newton_solve(
    system: &dyn NonlinearSystem,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<NewtonOutcome> {
    cfg.validate()?;
    check_len(x0.len(), system.dim())?;
    let mut x = x0.to_vec();
    let mut r = system.residual(&x)?;
    check_len(r.len(), x.len())?;
    let mut norm = inf_norm(&r);
    for it in 0..=cfg.max_newton_iters {
        if !norm.is_finite() {
            break;
        }
        if norm <= cfg.newton_tol {
            return Ok(NewtonOutcome {
                x,
                iterations: it,
                residual_norm: norm,
            });
        }
        if it == cfg.max_newton_iters {
            break;
        }
        let solver: Box<dyn LinearSolver> = match cfg.jacobian_mode {
            JacobianMode::Analytic => system.jacobian(&x)?,
            JacobianMode::FiniteDifference => {
                let f = |y: &[f64]| system.residual(y);
                Box::new(DenseLu::new(fd_jacobian(&f, &x, &r, cfg.fd_epsilon)?)?)
            }
        };
        let mut delta = r;
        solver.solve_in_place(&mut delta);
        for (xi, di) in x.iter_mut().zip(&delta) {
            *xi -= di;
        }
        r = system.residual(&x)?;
        norm = inf_norm(&r);
        log::trace!("newton iteration {}: residual {:e}", it + 1, norm);
    }
    Err(Error::NewtonFailure {
        iterations: cfg.max_newton_iters,
        residual: norm,
        last_iterate: x,
    })
}

/// Adapts a residual closure and a Jacobian closure to [`NonlinearSystem`].
pub struct ClosureSystem<R, J> {
    pub dim: usize,
    pub residual: R,
    pub jacobian: J,
}

impl<R, J> NonlinearSystem for ClosureSystem<R, J>
where
    R: Fn(&[f64]) -> Result<Vec<f64>>,
    J: Fn(&[f64]) -> Result<Box<dyn LinearSolver>>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        (self.residual)(x)
    }

    fn jacobian(&self, x: &[f64]) -> Result<Box<dyn LinearSolver>> {
        (self.jacobian)(x)
    }
}

/// Newton on a residual closure with forward-difference Jacobians.
pub fn newton_solve_fd(
    residual: impl Fn(&[f64]) -> Result<Vec<f64>>,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<NewtonOutcome> {
    let cfg = SolverConfig {
        jacobian_mode: JacobianMode::FiniteDifference,
        ..cfg.clone()
    };
    let system = ClosureSystem {
        dim: x0.len(),
        residual,
        jacobian: |_: &[f64]| -> Result<Box<dyn LinearSolver>> {
            Err(Error::Parameter("analytic Jacobian not available".into()))
        },
    };
    newton_solve(&system, x0, &cfg)
}
