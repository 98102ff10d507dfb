//! The periodic BBM equation `u_t - u_xxt + u_x + u u_x = 0`: discrete
//! Hamiltonians, their gradients and AVF discrete gradients, and the
//! analytic soliton data.
//!
//! `m = (A + E) u` is never stored; every scheme is written in `u`.

use crate::assembly::{AssemblyCache, TripleTensor};
use crate::basis::{BasisKind, BasisSet};
use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, LinearSolver, PeriodicBandMatrix};
use crate::quadrature::gauss_rule;

/// Which conserved quantity a scheme is built around.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hamiltonian {
    /// `1/2 int (u^2 + u_x^2)`
    H1,
    /// `1/2 int (u^2 + u^3 / 3)`
    H2,
}

fn check_dims(u: &[f64], a: &PeriodicBandMatrix) -> Result<()> {
    check_len(u.len(), a.dim())
}

/// `1/2 u^T (A + E) u`
pub fn h1(u: &[f64], mass: &PeriodicBandMatrix, stiffness: &PeriodicBandMatrix) -> Result<f64> {
    check_dims(u, mass)?;
    check_dims(u, stiffness)?;
    Ok(0.5 * (mass.quadratic_form(u) + stiffness.quadratic_form(u)))
}

/// `1/2 u^T A u + 1/6 D_ijk u_i u_j u_k`
pub fn h2(u: &[f64], mass: &PeriodicBandMatrix, d: &TripleTensor) -> Result<f64> {
    check_dims(u, mass)?;
    check_len(d.dim(), u.len())?;
    Ok(0.5 * mass.quadratic_form(u) + d.contract3(u) / 6.0)
}

pub fn grad_h1_u(u: &[f64], mass: &PeriodicBandMatrix, stiffness: &PeriodicBandMatrix) -> Result<Vec<f64>> {
    check_dims(u, mass)?;
    check_dims(u, stiffness)?;
    let mut g = mass.matvec(u);
    crate::linalg::axpy(1.0, &stiffness.matvec(u), &mut g);
    Ok(g)
}

pub fn grad_h2_u(u: &[f64], mass: &PeriodicBandMatrix, d: &TripleTensor) -> Result<Vec<f64>> {
    check_dims(u, mass)?;
    check_len(d.dim(), u.len())?;
    let mut g = mass.matvec(u);
    crate::linalg::axpy(0.5, &d.contract2(u, u), &mut g);
    Ok(g)
}

/// AVF discrete gradient of H1: `1/2 (A + E)(u_a + u_b)`.
pub fn avf_dg_h1(
    u_a: &[f64],
    u_b: &[f64],
    mass: &PeriodicBandMatrix,
    stiffness: &PeriodicBandMatrix,
) -> Result<Vec<f64>> {
    check_len(u_b.len(), u_a.len())?;
    let mid: Vec<f64> = u_a.iter().zip(u_b).map(|(a, b)| 0.5 * (a + b)).collect();
    grad_h1_u(&mid, mass, stiffness)
}

/// AVF discrete gradient of H2 in closed form:
/// `1/2 A (u_a + u_b) + 1/6 D (u_a (u_a + u_b/2) + u_b (u_a/2 + u_b))`.
pub fn avf_dg_h2(
    u_a: &[f64],
    u_b: &[f64],
    mass: &PeriodicBandMatrix,
    d: &TripleTensor,
) -> Result<Vec<f64>> {
    check_dims(u_a, mass)?;
    check_len(u_b.len(), u_a.len())?;
    check_len(d.dim(), u_a.len())?;
    let sum: Vec<f64> = u_a.iter().zip(u_b).map(|(a, b)| a + b).collect();
    let mut g = mass.scaled(0.5).matvec(&sum);
    let wa: Vec<f64> = u_a.iter().zip(u_b).map(|(a, b)| a + 0.5 * b).collect();
    let wb: Vec<f64> = u_a.iter().zip(u_b).map(|(a, b)| 0.5 * a + b).collect();
    let ta = d.contract2(u_a, &wa);
    let tb = d.contract2(u_b, &wb);
    for i in 0..g.len() {
        g[i] += (ta[i] + tb[i]) / 6.0;
    }
    Ok(g)
}

impl Hamiltonian {
    pub fn value(self, cache: &AssemblyCache, u: &[f64]) -> Result<f64> {
        match self {
            Hamiltonian::H1 => h1(u, cache.mass(), cache.stiffness()),
            Hamiltonian::H2 => h2(u, cache.mass(), cache.d()),
        }
    }

    pub fn gradient(self, cache: &AssemblyCache, u: &[f64]) -> Result<Vec<f64>> {
        match self {
            Hamiltonian::H1 => grad_h1_u(u, cache.mass(), cache.stiffness()),
            Hamiltonian::H2 => grad_h2_u(u, cache.mass(), cache.d()),
        }
    }

    pub fn discrete_gradient(self, cache: &AssemblyCache, u_a: &[f64], u_b: &[f64]) -> Result<Vec<f64>> {
        match self {
            Hamiltonian::H1 => avf_dg_h1(u_a, u_b, cache.mass(), cache.stiffness()),
            Hamiltonian::H2 => avf_dg_h2(u_a, u_b, cache.mass(), cache.d()),
        }
    }

    /// Hessian of the Hamiltonian at `u`.
    pub fn hessian(self, cache: &AssemblyCache, u: &[f64]) -> PeriodicBandMatrix {
        match self {
            Hamiltonian::H1 => cache.k().clone(),
            Hamiltonian::H2 => {
                let mut h = cache.mass().clone();
                h.add_scaled(1.0, &cache.d().contract1(u));
                h
            }
        }
    }
}

/// Coefficients on a basis at a time level.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub basis: BasisSet,
    pub u: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn new(basis: BasisSet, u: Vec<f64>, t: f64) -> Result<Self> {
        check_len(u.len(), basis.dof_count())?;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("non-finite coefficient".into()));
        }
        Ok(Self { basis, u, t })
    }

    /// `m = (A + E) u`, computed on demand.
    pub fn m(&self, cache: &AssemblyCache) -> Vec<f64> {
        cache.k().matvec(&self.u)
    }
}

/// Single soliton travelling with speed `c` on `[-L, L]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolitonParams {
    pub c: f64,
    pub half_length: f64,
}

/// Two sech^2 pulses centred at `x_r` and `x_s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoWaveParams {
    pub x_r: f64,
    pub x_s: f64,
    pub c_r: f64,
    pub c_s: f64,
    pub half_length: f64,
}

fn check_speed(c: f64) -> Result<()> {
    if !(c > 1.0) || !c.is_finite() {
        return Err(Error::Parameter(format!("wave speed must exceed 1, got {c}")));
    }
    Ok(())
}

/// `3(c-1) sech^2(1/2 sqrt(1 - 1/c) r)`
fn sech2_pulse(c: f64, r: f64) -> f64 {
    let arg = 0.5 * (1.0 - 1.0 / c).sqrt() * r;
    let ch = arg.cosh();
    3.0 * (c - 1.0) / (ch * ch)
}

/// Signed distance from `x` to `centre`, taken modulo `2L` into `[-L, L)`.
fn periodic_offset(x: f64, centre: f64, half_length: f64) -> f64 {
    (x - centre + half_length).rem_euclid(2.0 * half_length) - half_length
}

pub fn exact_soliton(x: f64, t: f64, params: &SolitonParams) -> Result<f64> {
    check_speed(params.c)?;
    let l = periodic_offset(x, params.c * t, params.half_length).abs();
    Ok(sech2_pulse(params.c, l))
}

pub fn initial_two_wave(x: f64, params: &TwoWaveParams) -> Result<f64> {
    check_speed(params.c_r)?;
    check_speed(params.c_s)?;
    let l = params.half_length;
    Ok(sech2_pulse(params.c_r, periodic_offset(x, params.x_r, l))
        + sech2_pulse(params.c_s, periodic_offset(x, params.x_s, l)))
}

/// Coefficients representing `f` in the cache's basis: nodal interpolation
/// for cubic Lagrange, L2 projection for B-splines.
pub fn represent(cache: &AssemblyCache, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let basis = cache.basis();
    match basis.kind() {
        BasisKind::CubicLagrange => Ok(basis.dof_positions()?.into_iter().map(f).collect()),
        BasisKind::PeriodicCubicBSpline => {
            let rule = gauss_rule(8)?;
            let (pts, wts) = rule.unit_interval();
            let mut load = vec![0.0; basis.dof_count()];
            for e in 0..basis.elements() {
                let (a, b) = basis.mesh().element_bounds(e);
                let dofs = basis.dofs_unchecked(e);
                for (xi, w) in pts.iter().zip(&wts) {
                    let phi = basis.eval_all(e, *xi)[0];
                    let fx = f(a + xi * (b - a)) * w * (b - a);
                    for k in 0..4 {
                        load[dofs[k]] += fx * phi[k];
                    }
                }
            }
            Ok(cache.mass_solver().solve(&load))
        }
    }
}

/// Relative size used in conservation checks: `max(1, |I|)`.
pub fn scale_of(value: f64) -> f64 {
    value.abs().max(1.0)
}

/// `L2` norm of the field with coefficients `u`.
pub fn l2_norm(cache: &AssemblyCache, u: &[f64]) -> f64 {
    dot(u, &cache.mass().matvec(u)).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh1D;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cache(kind: BasisKind) -> AssemblyCache {
        let mesh = Mesh1D::new(vec![-2.0, -1.1, -0.4, 0.2, 1.3, 2.0], 2.0).unwrap();
        AssemblyCache::new(BasisSet::new(kind, mesh)).unwrap()
    }

    #[test]
    fn constant_fields() {
        for kind in [BasisKind::CubicLagrange, BasisKind::PeriodicCubicBSpline] {
            let c = cache(kind);
            let n = c.dof_count();
            let zero = vec![0.0; n];
            assert_eq!(Hamiltonian::H1.value(&c, &zero).unwrap(), 0.0);
            assert_eq!(Hamiltonian::H2.value(&c, &zero).unwrap(), 0.0);
            let k = 1.7;
            let u = vec![k; n];
            let two_l = 4.0;
            let e1 = 0.5 * k * k * two_l;
            assert!((Hamiltonian::H1.value(&c, &u).unwrap() - e1).abs() < 1e-13);
            let e2 = 0.5 * k * k * two_l + k * k * k * two_l / 6.0;
            assert!((Hamiltonian::H2.value(&c, &u).unwrap() - e2).abs() < 1e-13);

            // grad H2 at a constant: (c + c^2/2) int phi_i
            let g = Hamiltonian::H2.gradient(&c, &u).unwrap();
            let a = c.mass().matvec(&vec![1.0; n]);
            for (gi, ai) in g.iter().zip(&a) {
                assert!((gi - (k + 0.5 * k * k) * ai).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in [BasisKind::CubicLagrange, BasisKind::PeriodicCubicBSpline] {
            let c = cache(kind);
            let n = c.dof_count();
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for h in [Hamiltonian::H1, Hamiltonian::H2] {
                let g = h.gradient(&c, &u).unwrap();
                let eps = 1e-6;
                let up: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a + eps * b).collect();
                let um: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a - eps * b).collect();
                let fd = (h.value(&c, &up).unwrap() - h.value(&c, &um).unwrap()) / (2.0 * eps);
                let an = dot(&g, &dir);
                assert!((fd - an).abs() <= 1e-7 * an.abs().max(1.0), "{h:?}: {fd} {an}");
            }
        }
    }

    #[test]
    fn avf_consistency_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for kind in [BasisKind::CubicLagrange, BasisKind::PeriodicCubicBSpline] {
            let c = cache(kind);
            let n = c.dof_count();
            let ua: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ub: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for h in [Hamiltonian::H1, Hamiltonian::H2] {
                let same = h.discrete_gradient(&c, &ua, &ua).unwrap();
                let grad = h.gradient(&c, &ua).unwrap();
                for (x, y) in same.iter().zip(&grad) {
                    assert!((x - y).abs() < 1e-14);
                }
                let dg = h.discrete_gradient(&c, &ua, &ub).unwrap();
                let diff: Vec<f64> = ub.iter().zip(&ua).map(|(b, a)| b - a).collect();
                let lhs = dot(&dg, &diff);
                let rhs = h.value(&c, &ub).unwrap() - h.value(&c, &ua).unwrap();
                assert!((lhs - rhs).abs() <= 1e-13 * rhs.abs().max(1.0));
            }
            let neg: Vec<f64> = ua.iter().map(|v| -v).collect();
            let z = avf_dg_h1(&ua, &neg, c.mass(), c.stiffness()).unwrap();
            assert!(z.iter().all(|v| *v == 0.0));
            let zero = vec![0.0; n];
            let z = avf_dg_h2(&zero, &zero, c.mass(), c.d()).unwrap();
            assert!(z.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn soliton_values() {
        let p = SolitonParams { c: 3.0, half_length: 200.0 };
        assert!((exact_soliton(0.0, 0.0, &p).unwrap() - 6.0).abs() < 1e-15);
        assert!((exact_soliton(3.0 * 7.0, 7.0, &p).unwrap() - 6.0).abs() < 1e-14);
        // peak wraps across the seam: c t = 450 is x = 50
        assert!((exact_soliton(50.0, 150.0, &p).unwrap() - 6.0).abs() < 1e-13);
        for x in [-150.0, -3.0, 0.5, 12.0] {
            let a = exact_soliton(x, 2.0, &p).unwrap();
            let b = exact_soliton(x + 400.0, 2.0, &p).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
        assert!(exact_soliton(0.0, 0.0, &SolitonParams { c: 1.0, half_length: 1.0 }).is_err());
    }

    #[test]
    fn two_wave_values() {
        let p = TwoWaveParams {
            x_r: 150.0,
            x_s: 105.0,
            c_r: 2.0,
            c_s: 1.5,
            half_length: 200.0,
        };
        let at_r = initial_two_wave(150.0, &p).unwrap();
        assert!((at_r - 3.0).abs() < 1e-5);
        assert!(at_r >= 3.0);
        assert!((initial_two_wave(105.0, &p).unwrap() - 1.5).abs() < 1e-5);
        assert!(initial_two_wave(-50.0, &p).unwrap() < 1e-15);
        let bad = TwoWaveParams { c_s: 0.9, ..p };
        assert!(initial_two_wave(0.0, &bad).is_err());
    }
}
