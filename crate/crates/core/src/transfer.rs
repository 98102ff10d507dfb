//! Moving a discrete field from one mesh to another.
//!
//! The conservative variant minimizes the L2 distance to the old field over
//! the new space subject to `I_new(u_hat) = I_old`:
//!
//! ```text
//! A_new u_hat - C u_old - lambda grad I_new(u_hat) = 0,   I_new(u_hat) = I_old.
//! ```

use crate::assembly::{assemble_cross_mass, AssemblyCache, SparseMatrix};
use crate::basis::{BasisKind, BasisSet};
use crate::bbm::{scale_of, Hamiltonian};
use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, inf_norm, BorderedSolver, LinearSolver};
use crate::steppers::{newton_solve, NonlinearSystem, SolverConfig};

fn check_compatible(old: &BasisSet, new: &BasisSet) -> Result<()> {
    if old.kind() != new.kind() {
        return Err(Error::DomainMismatch(format!(
            "basis kinds differ: {:?} vs {:?}",
            old.kind(),
            new.kind()
        )));
    }
    let (a, b) = (old.mesh().half_length(), new.mesh().half_length());
    if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
        return Err(Error::DomainMismatch(format!("half lengths differ: {a} vs {b}")));
    }
    Ok(())
}

/// Non-conservative transfer: nodal interpolation for cubic Lagrange, L2
/// projection for B-splines.
pub fn interp_transfer(u_old: &[f64], basis_old: &BasisSet, basis_new: &BasisSet) -> Result<Vec<f64>> {
    check_compatible(basis_old, basis_new)?;
    check_len(u_old.len(), basis_old.dof_count())?;
    match basis_new.kind() {
        BasisKind::CubicLagrange => basis_new
            .dof_positions()?
            .into_iter()
            .map(|x| basis_old.eval_field(u_old, x))
            .collect(),
        BasisKind::PeriodicCubicBSpline => {
            let mass_new = crate::assembly::assemble_mass(basis_new)?;
            let c = assemble_cross_mass(basis_old, basis_new)?;
            Ok(mass_new.factor()?.solve(&c.matvec(u_old)))
        }
    }
}

/// As [`interp_transfer`], reusing the new mesh's factorized mass matrix.
pub fn interp_transfer_cached(
    u_old: &[f64],
    cache_old: &AssemblyCache,
    cache_new: &AssemblyCache,
) -> Result<Vec<f64>> {
    check_compatible(cache_old.basis(), cache_new.basis())?;
    check_len(u_old.len(), cache_old.dof_count())?;
    match cache_new.basis().kind() {
        BasisKind::CubicLagrange => interp_transfer(u_old, cache_old.basis(), cache_new.basis()),
        BasisKind::PeriodicCubicBSpline => {
            let c = assemble_cross_mass(cache_old.basis(), cache_new.basis())?;
            Ok(cache_new.mass_solver().solve(&c.matvec(u_old)))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConservativeTransfer {
    pub coeffs: Vec<f64>,
    pub multiplier: f64,
    /// `|I_new(u_hat) - I_old|`
    pub constraint_residual: f64,
    /// `||A_new u_hat - C u_old - lambda grad I||_inf`
    pub stationarity_residual: f64,
    pub iterations: usize,
}

/// Integral-preserving transfer. Converges when the constraint holds to
/// `newton_tol * max(1, |I_old|)`.
pub fn conservative_transfer(
    u_old: &[f64],
    cache_old: &AssemblyCache,
    cache_new: &AssemblyCache,
    hamiltonian: Hamiltonian,
    cfg: &SolverConfig,
) -> Result<ConservativeTransfer> {
    cfg.validate()?;
    check_compatible(cache_old.basis(), cache_new.basis())?;
    check_len(u_old.len(), cache_old.dof_count())?;
    let i_old = hamiltonian.value(cache_old, u_old)?;
    let cross = assemble_cross_mass(cache_old.basis(), cache_new.basis())?;
    let load = cross.matvec(u_old);
    let (coeffs, multiplier, iterations) = match hamiltonian {
        Hamiltonian::H1 => h1_multiplier_search(cache_new, &load, i_old, cfg)?,
        Hamiltonian::H2 => {
            let start = interp_transfer_cached(u_old, cache_old, cache_new)?;
            h2_kkt_newton(cache_new, &load, i_old, start, cfg)?
        }
    };
    let constraint_residual = (hamiltonian.value(cache_new, &coeffs)? - i_old).abs();
    let stationarity_residual = inf_norm(&stationarity(cache_new, hamiltonian, &cross, u_old, &coeffs, multiplier)?);
    Ok(ConservativeTransfer {
        coeffs,
        multiplier,
        constraint_residual,
        stationarity_residual,
        iterations,
    })
}

fn stationarity(
    cache: &AssemblyCache,
    h: Hamiltonian,
    cross: &SparseMatrix,
    u_old: &[f64],
    u_hat: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    let mut r = cache.mass().matvec(u_hat);
    let cu = cross.matvec(u_old);
    let g = h.gradient(cache, u_hat)?;
    for i in 0..r.len() {
        r[i] -= cu[i] + lambda * g[i];
    }
    Ok(r)
}

/// For H1 the stationarity condition is linear in `u_hat`:
/// `(A - lambda K) u_hat = C u_old`. The constraint
/// `phi(lambda) = H1(u_hat(lambda)) - I_old` is increasing while
/// `A - lambda K` is positive definite, so a safeguarded Newton iteration on
/// `phi` from `lambda = 0` finds the root nearest the unconstrained minimizer.
fn h1_multiplier_search(
    cache: &AssemblyCache,
    load: &[f64],
    i_old: f64,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, f64, usize)> {
    let tol = cfg.newton_tol * scale_of(i_old);
    let k = cache.k();
    let eval = |lambda: f64| -> Result<Option<(Vec<f64>, f64, f64)>> {
        let mut op = cache.mass().clone();
        op.add_scaled(-lambda, k);
        let lu = match op.factor() {
            Ok(lu) => lu,
            Err(Error::Singular(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let u = lu.solve(load);
        let ku = k.matvec(&u);
        let slope = dot(&ku, &lu.solve(&ku));
        // positive definiteness of A - lambda K along the solution
        if !(slope > 0.0) || !(dot(&u, load) > 0.0) || !slope.is_finite() {
            return Ok(None);
        }
        let phi = 0.5 * dot(&u, &ku) - i_old;
        Ok(Some((u, phi, slope)))
    };

    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut lambda = 0.0;
    let max_iters = 4 * cfg.max_newton_iters;
    let mut last_phi = f64::NAN;
    for it in 0..max_iters {
        match eval(lambda)? {
            None => {
                hi = hi.min(lambda);
                lambda = next_trial(lo, hi, lambda);
            }
            Some((u, phi, slope)) => {
                last_phi = phi;
                if phi.abs() <= tol {
                    return Ok(polish_h1(&eval, (u, lambda, phi, slope), it)?);
                }
                if phi < 0.0 {
                    lo = lo.max(lambda);
                } else {
                    hi = hi.min(lambda);
                }
                let newton = lambda - phi / slope;
                lambda = if newton > lo && newton < hi && newton != lambda {
                    newton
                } else {
                    next_trial(lo, hi, lambda)
                };
            }
        }
    }
    Err(Error::NewtonFailure {
        iterations: max_iters,
        residual: last_phi.abs(),
        last_iterate: vec![lambda],
    })
}

/// One more Newton update on `lambda` once the tolerance is met after at
/// least one step, kept only if it reduces the constraint residual. Stopping right at the tolerance would
/// leave a per-remesh error that accumulates over a run.
fn polish_h1(
    eval: &dyn Fn(f64) -> Result<Option<(Vec<f64>, f64, f64)>>,
    (u, lambda, phi, slope): (Vec<f64>, f64, f64, f64),
    iterations: usize,
) -> Result<(Vec<f64>, f64, usize)> {
    if phi == 0.0 || iterations == 0 {
        return Ok((u, lambda, iterations));
    }
    let next = lambda - phi / slope;
    match eval(next)? {
        Some((u2, phi2, _)) if phi2.abs() < phi.abs() => Ok((u2, next, iterations + 1)),
        _ => Ok((u, lambda, iterations)),
    }
}

fn next_trial(lo: f64, hi: f64, current: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo + 2.0 * (current - lo).abs().max(1e-3),
        (false, true) => hi - 2.0 * (hi - current).abs().max(1e-3),
        (false, false) => current,
    }
}

struct H2Kkt<'a> {
    cache: &'a AssemblyCache,
    load: &'a [f64],
    i_old: f64,
    scale: f64,
}

impl NonlinearSystem for H2Kkt<'_> {
    fn dim(&self) -> usize {
        self.load.len() + 1
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.load.len();
        let (u, lambda) = (&x[..n], x[n]);
        let g = Hamiltonian::H2.gradient(self.cache, u)?;
        let mut r = self.cache.mass().matvec(u);
        for i in 0..n {
            r[i] -= self.load[i] + lambda * g[i];
        }
        r.push((Hamiltonian::H2.value(self.cache, u)? - self.i_old) / self.scale);
        Ok(r)
    }

    fn jacobian(&self, x: &[f64]) -> Result<Box<dyn LinearSolver>> {
        let n = self.load.len();
        let (u, lambda) = (&x[..n], x[n]);
        let mut top = self.cache.mass().clone();
        top.add_scaled(-lambda, &Hamiltonian::H2.hessian(self.cache, u));
        let g = Hamiltonian::H2.gradient(self.cache, u)?;
        let col: Vec<f64> = g.iter().map(|v| -v).collect();
        let row: Vec<f64> = g.iter().map(|v| v / self.scale).collect();
        Ok(Box::new(BorderedSolver::new(top.factor()?, &col, row, 0.0)?))
    }
}

/// As [`polish_h1`] for the full KKT system.
fn polish(sys: &dyn NonlinearSystem, x: Vec<f64>, norm: f64, iterations: usize) -> Result<(Vec<f64>, usize)> {
    if norm == 0.0 || iterations == 0 {
        return Ok((x, iterations));
    }
    let mut delta = sys.residual(&x)?;
    sys.jacobian(&x)?.solve_in_place(&mut delta);
    let next: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a - d).collect();
    if inf_norm(&sys.residual(&next)?) < norm {
        Ok((next, iterations + 1))
    } else {
        Ok((x, iterations))
    }
}

fn h2_kkt_newton(
    cache: &AssemblyCache,
    load: &[f64],
    i_old: f64,
    start: Vec<f64>,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, f64, usize)> {
    let sys = H2Kkt {
        cache,
        load,
        i_old,
        scale: scale_of(i_old),
    };
    let mut x0 = start;
    x0.push(0.0);
    let out = newton_solve(&sys, &x0, cfg)?;
    let (mut x, iterations) = polish(&sys, out.x, out.residual_norm, out.iterations)?;
    let lambda = x.pop().expect("multiplier");
    Ok((x, lambda, iterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbm::represent;
    use crate::mesh::Mesh1D;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mesh(m: usize, l: f64, rng: &mut ChaCha8Rng) -> Mesh1D {
        let mut w: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..1.5)).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x *= 2.0 * l / total);
        let mut nodes = vec![-l];
        for x in &w[..m - 1] {
            nodes.push(nodes.last().unwrap() + x);
        }
        nodes.push(l);
        Mesh1D::new(nodes, l).unwrap()
    }

    fn caches(kind: BasisKind, m: usize, seed: u64) -> (AssemblyCache, AssemblyCache) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_mesh(m, 4.0, &mut rng);
        let b = random_mesh(m, 4.0, &mut rng);
        (
            AssemblyCache::new(BasisSet::new(kind, a)).unwrap(),
            AssemblyCache::new(BasisSet::new(kind, b)).unwrap(),
        )
    }

    fn smooth(x: f64) -> f64 {
        let s = (std::f64::consts::PI * x / 4.0).sin();
        1.0 + 0.5 * s + 0.3 * (2.0 * std::f64::consts::PI * x / 4.0).cos()
    }

    #[test]
    fn identical_meshes_reproduce_coefficients() {
        for kind in [BasisKind::CubicLagrange, BasisKind::PeriodicCubicBSpline] {
            let (a, _) = caches(kind, 7, 1);
            let u = represent(&a, smooth).unwrap();
            let t = interp_transfer(&u, a.basis(), a.basis()).unwrap();
            for (x, y) in t.iter().zip(&u) {
                assert!((x - y).abs() < 1e-12);
            }
            for h in [Hamiltonian::H1, Hamiltonian::H2] {
                if kind == BasisKind::CubicLagrange && h == Hamiltonian::H2 {
                    continue;
                }
                let r = conservative_transfer(&u, &a, &a, h, &SolverConfig::default()).unwrap();
                assert_eq!(r.multiplier, 0.0);
                for (x, y) in r.coeffs.iter().zip(&u) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn constants_transfer_exactly() {
        for kind in [BasisKind::CubicLagrange, BasisKind::PeriodicCubicBSpline] {
            let (a, b) = caches(kind, 6, 2);
            let u = vec![1.3; a.dof_count()];
            let t = interp_transfer(&u, a.basis(), b.basis()).unwrap();
            assert!(t.iter().all(|x| (x - 1.3).abs() < 1e-12));
            let r = conservative_transfer(&u, &a, &b, Hamiltonian::H1, &SolverConfig::default()).unwrap();
            assert_eq!(r.multiplier, 0.0);
            assert!(r.coeffs.iter().all(|x| (x - 1.3).abs() < 1e-12));
        }
    }

    #[test]
    fn global_cubic_transfers_exactly_with_lagrange() {
        // a single cubic is not periodic, so only interior evaluation points are
        // compared; the seam element is excluded by construction of the field
        let mesh_a = Mesh1D::new(vec![-4.0, -2.5, -0.5, 1.0, 2.0, 4.0], 4.0).unwrap();
        let mesh_b = Mesh1D::new(vec![-4.0, -3.0, -1.5, 0.5, 2.5, 4.0], 4.0).unwrap();
        let a = BasisSet::new(BasisKind::CubicLagrange, mesh_a);
        let b = BasisSet::new(BasisKind::CubicLagrange, mesh_b);
        let p = |x: f64| 0.3 + x - 0.2 * x * x + 0.05 * x * x * x;
        let u: Vec<f64> = a.dof_positions().unwrap().into_iter().map(p).collect();
        let t = interp_transfer(&u, &a, &b).unwrap();
        for (x, v) in b.dof_positions().unwrap().into_iter().zip(&t) {
            if x > -2.5 && x < 2.0 {
                assert!((v - p(x)).abs() < 1e-12, "{x}: {v} vs {}", p(x));
            }
        }
    }

    #[test]
    fn conservative_transfer_satisfies_kkt() {
        let cfg = SolverConfig::default();
        for (kind, h) in [
            (BasisKind::CubicLagrange, Hamiltonian::H1),
            (BasisKind::PeriodicCubicBSpline, Hamiltonian::H1),
            (BasisKind::PeriodicCubicBSpline, Hamiltonian::H2),
        ] {
            for seed in 0..5 {
                let (a, b) = caches(kind, 8, 10 + seed);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let u: Vec<f64> = (0..a.dof_count()).map(|_| rng.gen_range(-1.0..1.5)).collect();
                let r = conservative_transfer(&u, &a, &b, h, &cfg).unwrap();
                let i_old = h.value(&a, &u).unwrap();
                assert!(r.constraint_residual <= cfg.newton_tol * scale_of(i_old), "{kind:?} {h:?}");
                assert!(r.stationarity_residual <= cfg.newton_tol * scale_of(i_old), "{kind:?} {h:?}: {}", r.stationarity_residual);
            }
        }
    }

    #[test]
    fn rejects_mismatched_domains() {
        let a = BasisSet::new(BasisKind::CubicLagrange, Mesh1D::uniform(1.0, 4).unwrap());
        let b = BasisSet::new(BasisKind::CubicLagrange, Mesh1D::uniform(2.0, 4).unwrap());
        let c = BasisSet::new(BasisKind::PeriodicCubicBSpline, Mesh1D::uniform(1.0, 4).unwrap());
        let u = vec![0.0; 12];
        assert!(matches!(interp_transfer(&u, &a, &b), Err(Error::DomainMismatch(_))));
        assert!(matches!(interp_transfer(&u, &a, &c), Err(Error::DomainMismatch(_))));
    }
}
