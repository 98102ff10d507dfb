//! Non-conservative comparison schemes: trapezoidal rule on the H1
//! semi-discretization, implicit midpoint and classical RK4 on the H2 one.

use super::newton::{newton_solve, NonlinearSystem};
use super::{
    check_dt, interleave_blocks, join_interleaved, split_interleaved, SolverConfig, StepResult,
};
use crate::assembly::AssemblyCache;
use crate::bbm::Hamiltonian;
use crate::error::{check_len, Result};
use crate::linalg::{LinearSolver, PeriodicBandMatrix};

/// `K (u - u_n) + dt/2 (B1(u_n) u_n + B1(u) u) = 0`
pub fn trapezoidal_step(
    u_n: &[f64],
    cache: &AssemblyCache,
    dt: f64,
    cfg: &SolverConfig,
) -> Result<StepResult> {
    cfg.validate()?;
    check_dt(dt)?;
    check_len(u_n.len(), cache.dof_count())?;
    let b_old = cache.b1(u_n)?.matvec(u_n);
    let sys = TrSystem { cache, u_n, b_old, dt };
    let out = newton_solve(&sys, u_n, cfg)?;
    let hamiltonian_value = Hamiltonian::H1.value(cache, &out.x)?;
    Ok(StepResult {
        u_next: out.x,
        newton_iters: out.iterations,
        residual_norm: out.residual_norm,
        hamiltonian_value,
    })
}

struct TrSystem<'a> {
    cache: &'a AssemblyCache,
    u_n: &'a [f64],
    b_old: Vec<f64>,
    dt: f64,
}

impl NonlinearSystem for TrSystem<'_> {
    fn dim(&self) -> usize {
        self.u_n.len()
    }

    fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        let diff: Vec<f64> = u.iter().zip(self.u_n).map(|(a, b)| a - b).collect();
        let mut r = self.cache.k().matvec(&diff);
        let b_new = self.cache.b1(u)?.matvec(u);
        for i in 0..r.len() {
            r[i] += 0.5 * self.dt * (self.b_old[i] + b_new[i]);
        }
        Ok(r)
    }

    fn jacobian(&self, u: &[f64]) -> Result<Box<dyn LinearSolver>> {
        let mut j = self.cache.k().clone();
        j.add_scaled(0.5 * self.dt, &self.cache.b1_with_tangent(u).1);
        Ok(Box::new(j.factor()?))
    }
}

/// Implicit midpoint: `K (u - u_n) + dt B2 v = 0`, `K v = grad H2((u_n + u)/2)`.
pub fn implicit_midpoint_step(
    u_n: &[f64],
    cache: &AssemblyCache,
    dt: f64,
    cfg: &SolverConfig,
) -> Result<StepResult> {
    cfg.validate()?;
    check_dt(dt)?;
    check_len(u_n.len(), cache.dof_count())?;
    let b2 = cache.b2()?;
    let v0 = cache.k_solver().solve(&Hamiltonian::H2.gradient(cache, u_n)?);
    let sys = ImSystem { cache, b2, u_n, dt };
    let out = newton_solve(&sys, &join_interleaved(u_n, &v0), cfg)?;
    let (u, _) = split_interleaved(&out.x);
    let hamiltonian_value = Hamiltonian::H2.value(cache, &u)?;
    Ok(StepResult {
        u_next: u,
        newton_iters: out.iterations,
        residual_norm: out.residual_norm,
        hamiltonian_value,
    })
}

struct ImSystem<'a> {
    cache: &'a AssemblyCache,
    b2: &'a PeriodicBandMatrix,
    u_n: &'a [f64],
    dt: f64,
}

impl ImSystem<'_> {
    fn midpoint(&self, u: &[f64]) -> Vec<f64> {
        self.u_n.iter().zip(u).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

impl NonlinearSystem for ImSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.u_n.len()
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (u, v) = split_interleaved(x);
        let k = self.cache.k();
        let diff: Vec<f64> = u.iter().zip(self.u_n).map(|(a, b)| a - b).collect();
        let mut ru = k.matvec(&diff);
        let bv = self.b2.matvec(&v);
        for (r, b) in ru.iter_mut().zip(&bv) {
            *r += self.dt * b;
        }
        let g = Hamiltonian::H2.gradient(self.cache, &self.midpoint(&u))?;
        let mut rv = k.matvec(&v);
        for (r, gi) in rv.iter_mut().zip(&g) {
            *r -= gi;
        }
        Ok(join_interleaved(&ru, &rv))
    }

    fn jacobian(&self, x: &[f64]) -> Result<Box<dyn LinearSolver>> {
        let (u, _) = split_interleaved(x);
        let k = self.cache.k();
        let mut vu = self.cache.mass().scaled(-0.5);
        vu.add_scaled(-0.5, &self.cache.d().contract1(&self.midpoint(&u)));
        Ok(Box::new(interleave_blocks(k, &self.b2.scaled(self.dt), &vu, k).factor()?))
    }
}

/// `u_t = -K^{-1} B2 K^{-1} grad H2(u)`
fn h2_rhs(cache: &AssemblyCache, b2: &PeriodicBandMatrix, u: &[f64]) -> Result<Vec<f64>> {
    let w = cache.k_solver().solve(&Hamiltonian::H2.gradient(cache, u)?);
    let mut f = cache.k_solver().solve(&b2.matvec(&w));
    f.iter_mut().for_each(|x| *x = -*x);
    Ok(f)
}

/// Classical fourth-order Runge–Kutta on the H2 semi-discretization.
pub fn rk4_step(u_n: &[f64], cache: &AssemblyCache, dt: f64) -> Result<StepResult> {
    check_dt(dt)?;
    check_len(u_n.len(), cache.dof_count())?;
    let b2 = cache.b2()?;
    let stage = |base: &[f64], k: &[f64], h: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(a, b)| a + h * b).collect()
    };
    let k1 = h2_rhs(cache, b2, u_n)?;
    let k2 = h2_rhs(cache, b2, &stage(u_n, &k1, 0.5 * dt))?;
    let k3 = h2_rhs(cache, b2, &stage(u_n, &k2, 0.5 * dt))?;
    let k4 = h2_rhs(cache, b2, &stage(u_n, &k3, dt))?;
    let u_next: Vec<f64> = (0..u_n.len())
        .map(|i| u_n[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    let hamiltonian_value = Hamiltonian::H2.value(cache, &u_next)?;
    Ok(StepResult {
        u_next,
        newton_iters: 0,
        residual_norm: 0.0,
        hamiltonian_value,
    })
}
