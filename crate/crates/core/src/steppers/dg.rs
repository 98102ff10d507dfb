//! AVF discrete-gradient steps with the moving-mesh correction term.
//!
//! With `v = K^{-1} grad_bar I(u_hat, u)` the step solves
//!
//! ```text
//! K (u - u_hat) + dI v / (v.v) + dt B v = 0,    dI = I(u_hat) - I_old,
//! ```
//!
//! so that `I(u) - I(u_hat) = v.K(u - u_hat) = -dI`. For H1, `v` is the
//! midpoint and `B = B1(v)`; for H2, `v` is an extra unknown and `B = B2`.

use super::newton::{newton_solve, NonlinearSystem};
use super::{
    check_dt, interleave_blocks, join_interleaved, split_interleaved, SolverConfig, StepResult,
};
use crate::assembly::AssemblyCache;
use crate::bbm::{scale_of, Hamiltonian};
use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, LinearSolver, PeriodicBandMatrix, RankOneUpdate};

/// Below this `<grad_bar I, z>` the correction direction is unusable.
const DEGENERATE_CORRECTION: f64 = 1e-300;

/// Fixed-mesh DG1 step conserving H1.
pub fn dg1_step_fixed(
    u_n: &[f64],
    cache: &AssemblyCache,
    dt: f64,
    cfg: &SolverConfig,
) -> Result<StepResult> {
    dg_moving_step(u_n, 0.0, cache, Hamiltonian::H1, dt, cfg, true)
}

/// Fixed-mesh DG2 step conserving H2. Needs the B-spline basis.
pub fn dg2_step_fixed(
    u_n: &[f64],
    cache: &AssemblyCache,
    dt: f64,
    cfg: &SolverConfig,
) -> Result<StepResult> {
    dg_moving_step(u_n, 0.0, cache, Hamiltonian::H2, dt, cfg, true)
}

/// Discrete-gradient step from a transferred state `u_hat` on the new mesh.
/// `i_old` is the Hamiltonian on the old mesh before the transfer; it is
/// ignored when the transfer was conservative.
pub fn dg_moving_step(
    u_hat: &[f64],
    i_old: f64,
    cache_new: &AssemblyCache,
    hamiltonian: Hamiltonian,
    dt: f64,
    cfg: &SolverConfig,
    transfer_was_conservative: bool,
) -> Result<StepResult> {
    cfg.validate()?;
    check_dt(dt)?;
    check_len(u_hat.len(), cache_new.dof_count())?;
    let delta_i = if transfer_was_conservative {
        0.0
    } else {
        if !i_old.is_finite() {
            return Err(Error::Parameter("non-finite reference Hamiltonian".into()));
        }
        hamiltonian.value(cache_new, u_hat)? - i_old
    };
    let guess = if cfg.euler_predictor {
        euler_predictor(cache_new, hamiltonian, u_hat, dt)?
    } else {
        u_hat.to_vec()
    };
    let (u_next, newton_iters, residual_norm) = match hamiltonian {
        Hamiltonian::H1 => {
            let sys = Dg1System {
                cache: cache_new,
                u_hat,
                dt,
                delta_i,
                frozen: cfg.frozen_operator.then(|| cache_new.b1(u_hat)).transpose()?,
            };
            let out = newton_solve(&sys, &guess, cfg)?;
            (out.x, out.iterations, out.residual_norm)
        }
        Hamiltonian::H2 => {
            let b2 = cache_new.b2()?;
            let sys = Dg2System {
                cache: cache_new,
                b2,
                u_hat,
                dt,
                delta_i,
            };
            let g = Hamiltonian::H2.discrete_gradient(cache_new, u_hat, &guess)?;
            let v0 = cache_new.k_solver().solve(&g);
            let out = newton_solve(&sys, &join_interleaved(&guess, &v0), cfg)?;
            let (u, _) = split_interleaved(&out.x);
            (u, out.iterations, out.residual_norm)
        }
    };
    let hamiltonian_value = hamiltonian.value(cache_new, &u_next)?;
    if !transfer_was_conservative {
        let drift = (hamiltonian_value - i_old).abs();
        log::debug!("corrected step: |I - I_old| = {drift:e} (scale {})", scale_of(i_old));
    }
    Ok(StepResult {
        u_next,
        newton_iters,
        residual_norm,
        hamiltonian_value,
    })
}

/// `u - dt K^{-1} B K^{-1} grad I(u)`
fn euler_predictor(cache: &AssemblyCache, h: Hamiltonian, u: &[f64], dt: f64) -> Result<Vec<f64>> {
    let w = cache.k_solver().solve(&h.gradient(cache, u)?);
    let bw = match h {
        Hamiltonian::H1 => cache.b1(&w)?.matvec(&w),
        Hamiltonian::H2 => cache.b2()?.matvec(&w),
    };
    let du = cache.k_solver().solve(&bw);
    Ok(u.iter().zip(&du).map(|(a, b)| a - dt * b).collect())
}

fn correction_factor(delta_i: f64, vv: f64) -> Result<f64> {
    if delta_i == 0.0 {
        return Ok(0.0);
    }
    if !(vv > DEGENERATE_CORRECTION) {
        return Err(Error::DegenerateCorrection(vv));
    }
    Ok(delta_i / vv)
}

struct Dg1System<'a> {
    cache: &'a AssemblyCache,
    u_hat: &'a [f64],
    dt: f64,
    delta_i: f64,
    frozen: Option<PeriodicBandMatrix>,
}

impl Dg1System<'_> {
    fn midpoint(&self, u: &[f64]) -> Vec<f64> {
        self.u_hat.iter().zip(u).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

impl NonlinearSystem for Dg1System<'_> {
    fn dim(&self) -> usize {
        self.u_hat.len()
    }

    fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        let v = self.midpoint(u);
        let diff: Vec<f64> = u.iter().zip(self.u_hat).map(|(a, b)| a - b).collect();
        let mut r = self.cache.k().matvec(&diff);
        let bv = match &self.frozen {
            Some(b) => b.matvec(&v),
            None => self.cache.b1(&v)?.matvec(&v),
        };
        let s = correction_factor(self.delta_i, dot(&v, &v))?;
        for i in 0..r.len() {
            r[i] += self.dt * bv[i] + s * v[i];
        }
        Ok(r)
    }

    fn jacobian(&self, u: &[f64]) -> Result<Box<dyn LinearSolver>> {
        let v = self.midpoint(u);
        let mut j = self.cache.k().clone();
        match &self.frozen {
            Some(b) => j.add_scaled(0.5 * self.dt, b),
            None => j.add_scaled(0.5 * self.dt, &self.cache.b1_with_tangent(&v).1),
        }
        let vv = dot(&v, &v);
        let s = correction_factor(self.delta_i, vv)?;
        if s == 0.0 {
            return Ok(Box::new(j.factor()?));
        }
        j.add_diagonal(0.5 * s);
        let a: Vec<f64> = v.iter().map(|x| -s / vv * x).collect();
        Ok(Box::new(RankOneUpdate::new(j.factor()?, a, v)?))
    }
}

struct Dg2System<'a> {
    cache: &'a AssemblyCache,
    b2: &'a PeriodicBandMatrix,
    u_hat: &'a [f64],
    dt: f64,
    delta_i: f64,
}

impl NonlinearSystem for Dg2System<'_> {
    fn dim(&self) -> usize {
        2 * self.u_hat.len()
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (u, v) = split_interleaved(x);
        let k = self.cache.k();
        let diff: Vec<f64> = u.iter().zip(self.u_hat).map(|(a, b)| a - b).collect();
        let mut ru = k.matvec(&diff);
        let bv = self.b2.matvec(&v);
        let s = correction_factor(self.delta_i, dot(&v, &v))?;
        for i in 0..ru.len() {
            ru[i] += self.dt * bv[i] + s * v[i];
        }
        let g = Hamiltonian::H2.discrete_gradient(self.cache, self.u_hat, &u)?;
        let mut rv = k.matvec(&v);
        for (r, gi) in rv.iter_mut().zip(&g) {
            *r -= gi;
        }
        Ok(join_interleaved(&ru, &rv))
    }

    fn jacobian(&self, x: &[f64]) -> Result<Box<dyn LinearSolver>> {
        let (u, v) = split_interleaved(x);
        let k = self.cache.k();
        let vv = dot(&v, &v);
        let s = correction_factor(self.delta_i, vv)?;
        let mut uv = self.b2.scaled(self.dt);
        uv.add_diagonal(s);
        // d/du of the AVF gradient: A/2 + D(u_hat + 2u)/6
        let w: Vec<f64> = self.u_hat.iter().zip(&u).map(|(a, b)| a + 2.0 * b).collect();
        let mut vu = self.cache.mass().scaled(-0.5);
        vu.add_scaled(-1.0 / 6.0, &self.cache.d().contract1(&w));
        let jac = interleave_blocks(k, &uv, &vu, k).factor()?;
        if s == 0.0 {
            return Ok(Box::new(jac));
        }
        let n = v.len();
        let mut a = vec![0.0; 2 * n];
        let mut b = vec![0.0; 2 * n];
        for i in 0..n {
            a[2 * i] = -2.0 * s / vv * v[i];
            b[2 * i + 1] = v[i];
        }
        Ok(Box::new(RankOneUpdate::new(jac, a, b)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisKind, BasisSet};
    use crate::bbm::{exact_soliton, represent, SolitonParams};
    use crate::mesh::Mesh1D;
    use crate::steppers::JacobianMode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cache(kind: BasisKind, m: usize, seed: u64) -> AssemblyCache {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = 3.0;
        let mut w: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..1.5)).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x *= 2.0 * l / total);
        let mut nodes = vec![-l];
        for x in &w[..m - 1] {
            nodes.push(nodes.last().unwrap() + x);
        }
        nodes.push(l);
        AssemblyCache::new(BasisSet::new(kind, Mesh1D::new(nodes, l).unwrap())).unwrap()
    }

    fn random_u(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_is_fixed_point() {
        let c = random_cache(BasisKind::PeriodicCubicBSpline, 8, 1);
        let zero = vec![0.0; c.dof_count()];
        let cfg = SolverConfig::default();
        let r = dg1_step_fixed(&zero, &c, 0.1, &cfg).unwrap();
        assert!(r.u_next.iter().all(|x| *x == 0.0));
        assert_eq!(r.newton_iters, 0);
        let r = dg2_step_fixed(&zero, &c, 0.1, &cfg).unwrap();
        assert!(r.u_next.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn fixed_steps_conserve() {
        let cfg = SolverConfig::default();
        let c = random_cache(BasisKind::CubicLagrange, 5, 2);
        let u = random_u(c.dof_count(), 3);
        let h0 = Hamiltonian::H1.value(&c, &u).unwrap();
        let r = dg1_step_fixed(&u, &c, 0.2, &cfg).unwrap();
        assert!(r.residual_norm <= cfg.newton_tol);
        assert!((r.hamiltonian_value - h0).abs() <= 10.0 * cfg.newton_tol * scale_of(h0));

        let c = random_cache(BasisKind::PeriodicCubicBSpline, 8, 4);
        let u = random_u(c.dof_count(), 5);
        let h0 = Hamiltonian::H2.value(&c, &u).unwrap();
        let r = dg2_step_fixed(&u, &c, 0.2, &cfg).unwrap();
        assert!((r.hamiltonian_value - h0).abs() <= 10.0 * cfg.newton_tol * scale_of(h0));
    }

    #[test]
    fn dg1_is_time_symmetric() {
        let cfg = SolverConfig::default();
        let c = random_cache(BasisKind::CubicLagrange, 6, 7);
        let u = random_u(c.dof_count(), 8);
        let fwd = dg1_step_fixed(&u, &c, 0.15, &cfg).unwrap();
        let back = dg1_step_fixed(&fwd.u_next, &c, -0.15, &cfg).unwrap();
        for (a, b) in back.u_next.iter().zip(&u) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn moving_step_reduces_to_fixed() {
        let cfg = SolverConfig::default();
        let c = random_cache(BasisKind::PeriodicCubicBSpline, 9, 9);
        let u = random_u(c.dof_count(), 10);
        let a = dg2_step_fixed(&u, &c, 0.1, &cfg).unwrap();
        let b = dg_moving_step(&u, 123.0, &c, Hamiltonian::H2, 0.1, &cfg, true).unwrap();
        assert_eq!(a, b);
        let a = dg1_step_fixed(&u, &c, 0.1, &cfg).unwrap();
        let b = dg_moving_step(&u, -5.0, &c, Hamiltonian::H1, 0.1, &cfg, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_step_without_correction_is_identity() {
        let cfg = SolverConfig::default();
        let c = random_cache(BasisKind::CubicLagrange, 5, 11);
        let u = random_u(c.dof_count(), 12);
        let i = Hamiltonian::H1.value(&c, &u).unwrap();
        let r = dg_moving_step(&u, i, &c, Hamiltonian::H1, 0.0, &cfg, false).unwrap();
        for (a, b) in r.u_next.iter().zip(&u) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn correction_restores_reference_value() {
        let cfg = SolverConfig::default();
        for (h, kind) in [
            (Hamiltonian::H1, BasisKind::CubicLagrange),
            (Hamiltonian::H1, BasisKind::PeriodicCubicBSpline),
            (Hamiltonian::H2, BasisKind::PeriodicCubicBSpline),
        ] {
            let c = random_cache(kind, 10, 13);
            let u = random_u(c.dof_count(), 14);
            let i_hat = h.value(&c, &u).unwrap();
            let i_old = i_hat * (1.0 + 1e-4);
            let r = dg_moving_step(&u, i_old, &c, h, 0.1, &cfg, false).unwrap();
            assert!(
                (r.hamiltonian_value - i_old).abs() <= 10.0 * cfg.newton_tol * scale_of(i_old),
                "{h:?} {kind:?}: {}",
                r.hamiltonian_value - i_old
            );
        }
    }

    #[test]
    fn degenerate_correction_detected() {
        let c = random_cache(BasisKind::CubicLagrange, 5, 15);
        let zero = vec![0.0; c.dof_count()];
        let err = dg_moving_step(&zero, 1.0, &c, Hamiltonian::H1, 0.1, &SolverConfig::default(), false)
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateCorrection(_)));
    }

    #[test]
    fn analytic_and_fd_jacobians_agree() {
        let c = random_cache(BasisKind::PeriodicCubicBSpline, 6, 16);
        let u = random_u(c.dof_count(), 17);
        let i_old = Hamiltonian::H2.value(&c, &u).unwrap() + 1e-3;
        let analytic = SolverConfig::default();
        let fd = SolverConfig {
            jacobian_mode: JacobianMode::FiniteDifference,
            ..SolverConfig::default()
        };
        for h in [Hamiltonian::H1, Hamiltonian::H2] {
            let i_old = if h == Hamiltonian::H1 { Hamiltonian::H1.value(&c, &u).unwrap() + 1e-3 } else { i_old };
            let a = dg_moving_step(&u, i_old, &c, h, 0.1, &analytic, false).unwrap();
            let b = dg_moving_step(&u, i_old, &c, h, 0.1, &fd, false).unwrap();
            for (x, y) in a.u_next.iter().zip(&b.u_next) {
                assert!((x - y).abs() < 1e-10);
            }
            // quadratic convergence with the exact Jacobian
            assert!(a.newton_iters <= 6, "{h:?}: {}", a.newton_iters);
        }
    }

    #[test]
    fn frozen_operator_conserves() {
        let cfg = SolverConfig {
            frozen_operator: true,
            ..SolverConfig::default()
        };
        let c = random_cache(BasisKind::CubicLagrange, 7, 18);
        let u = random_u(c.dof_count(), 19);
        let h0 = Hamiltonian::H1.value(&c, &u).unwrap();
        let r = dg1_step_fixed(&u, &c, 0.1, &cfg).unwrap();
        assert!((r.hamiltonian_value - h0).abs() <= 10.0 * cfg.newton_tol * scale_of(h0));
        let plain = dg1_step_fixed(&u, &c, 0.1, &SolverConfig::default()).unwrap();
        assert!(plain.u_next != r.u_next);
    }

    #[test]
    fn euler_predictor_same_solution() {
        let c = random_cache(BasisKind::PeriodicCubicBSpline, 8, 20);
        let u = random_u(c.dof_count(), 21);
        let cfg = SolverConfig {
            euler_predictor: true,
            ..SolverConfig::default()
        };
        for h in [Hamiltonian::H1, Hamiltonian::H2] {
            let a = dg_moving_step(&u, 0.0, &c, h, 0.05, &cfg, true).unwrap();
            let b = dg_moving_step(&u, 0.0, &c, h, 0.05, &SolverConfig::default(), true).unwrap();
            for (x, y) in a.u_next.iter().zip(&b.u_next) {
                assert!((x - y).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn soliton_moves_right() {
        // direction check on the sign convention: the peak must travel with +c
        let params = SolitonParams { c: 3.0, half_length: 20.0 };
        for (h, kind) in [
            (Hamiltonian::H1, BasisKind::CubicLagrange),
            (Hamiltonian::H2, BasisKind::PeriodicCubicBSpline),
        ] {
            let mesh = Mesh1D::uniform(20.0, 80).unwrap();
            let c = AssemblyCache::new(BasisSet::new(kind, mesh)).unwrap();
            let mut u = represent(&c, |x| exact_soliton(x, 0.0, &params).unwrap()).unwrap();
            let dt = 0.05;
            for _ in 0..20 {
                u = dg_moving_step(&u, 0.0, &c, h, dt, &SolverConfig::default(), true).unwrap().u_next;
            }
            let exact = represent(&c, |x| exact_soliton(x, 1.0, &params).unwrap()).unwrap();
            let err = u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 0.05, "{h:?}: {err}");
        }
    }
}
