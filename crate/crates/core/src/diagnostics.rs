//! Soliton error metrics and Hamiltonian drift.

use crate::basis::BasisSet;
use crate::bbm::{exact_soliton, SolitonParams, State};
use crate::error::{check_len, Error, Result};
use crate::quadrature::{gauss_rule, DEFAULT_POINTS};

const SAMPLES_PER_ELEMENT: usize = 8;
const PEAK_TOL: f64 = 1e-10;

/// Position of the maximum of the continuous field `u^h`, in `[-L, L)`.
/// Ties between samples go to the smallest `x`.
pub fn locate_peak(basis: &BasisSet, u: &[f64]) -> Result<f64> {
    check_len(u.len(), basis.dof_count())?;
    let mesh = basis.mesh();
    let mut xs = Vec::with_capacity(basis.elements() * SAMPLES_PER_ELEMENT);
    let mut vals = Vec::with_capacity(xs.capacity());
    for e in 0..basis.elements() {
        let (a, b) = mesh.element_bounds(e);
        for k in 0..SAMPLES_PER_ELEMENT {
            let x = a + (b - a) * k as f64 / SAMPLES_PER_ELEMENT as f64;
            xs.push(x);
            vals.push(basis.eval_field(u, x)?);
        }
    }
    let (mut best, mut lowest) = (0, f64::INFINITY);
    for (i, v) in vals.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::DegeneratePeak("non-finite field value".into()));
        }
        if *v > vals[best] {
            best = i;
        }
        lowest = lowest.min(*v);
    }
    let top = vals[best];
    if top - lowest <= 1e-12 * top.abs().max(1.0) {
        return Err(Error::DegeneratePeak(format!("field is flat at {top}")));
    }
    let n = xs.len();
    let two_l = mesh.length();
    let left = if best == 0 { xs[n - 1] - two_l } else { xs[best - 1] };
    let right = if best + 1 == n { xs[0] + two_l } else { xs[best + 1] };
    let f = |x: f64| basis.eval_field(u, mesh.wrap(x)).map(|v| -v);
    Ok(mesh.wrap(golden_section_min(f, left, right, PEAK_TOL)?))
}

fn golden_section_min(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// `|c t - x*|` with the distance taken modulo `2L`.
pub fn phase_error(state: &State, params: &SolitonParams) -> Result<f64> {
    let peak = locate_peak(&state.basis, &state.u)?;
    let two_l = 2.0 * params.half_length;
    let d = (peak - params.c * state.t + params.half_length).rem_euclid(two_l) - params.half_length;
    Ok(d.abs())
}

/// L2 distance between `u^h` and the exact soliton centred at the numerical peak.
pub fn shape_error(state: &State, params: &SolitonParams) -> Result<f64> {
    let peak = locate_peak(&state.basis, &state.u)?;
    l2_distance_to(&state.basis, &state.u, |x| exact_soliton(x, peak / params.c, params))
}

/// `||u^h - f||_{L2}` by 5-point Gauss per element.
pub fn l2_distance_to(basis: &BasisSet, u: &[f64], f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    check_len(u.len(), basis.dof_count())?;
    let rule = gauss_rule(DEFAULT_POINTS)?;
    let (pts, wts) = rule.unit_interval();
    let mut sum = 0.0;
    for e in 0..basis.elements() {
        let (a, b) = basis.mesh().element_bounds(e);
        for (xi, w) in pts.iter().zip(&wts) {
            let x = a + xi * (b - a);
            let diff = basis.eval_field(u, x)? - f(x)?;
            sum += w * (b - a) * diff * diff;
        }
    }
    Ok(sum.sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Drift {
    pub values: Vec<f64>,
    /// Set when `I(0) = 0` and the values are absolute differences.
    pub absolute: bool,
}

/// `(I(t) - I(0)) / |I(0)|` per sample.
pub fn hamiltonian_drift(series: &[(f64, f64)]) -> Result<Drift> {
    let Some(&(_, i0)) = series.first() else {
        return Err(Error::Parameter("empty series".into()));
    };
    let absolute = i0 == 0.0;
    let scale = if absolute { 1.0 } else { i0.abs() };
    Ok(Drift {
        values: series.iter().map(|(_, v)| (v - i0) / scale).collect(),
        absolute,
    })
}

/// `max |drift|` over samples with `t` in `[t0, t1]`.
pub fn max_abs_drift(series: &[(f64, f64)], t0: f64, t1: f64) -> Result<f64> {
    let d = hamiltonian_drift(series)?;
    Ok(series
        .iter()
        .zip(&d.values)
        .filter(|((t, _), _)| *t >= t0 && *t <= t1)
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::AssemblyCache;
    use crate::basis::BasisKind;
    use crate::bbm::represent;
    use crate::mesh::Mesh1D;

    fn soliton_state(kind: BasisKind, shift: f64, t: f64) -> (State, SolitonParams) {
        let params = SolitonParams { c: 3.0, half_length: 40.0 };
        let mesh = Mesh1D::new(
            (0..=160)
                .map(|i| -40.0 + 80.0 * (i as f64 / 160.0) + 0.05 * (i as f64 * 0.7).sin() * (i % 160 != 0) as i32 as f64)
                .collect(),
            40.0,
        )
        .unwrap();
        let cache = AssemblyCache::new(BasisSet::new(kind, mesh)).unwrap();
        let u = represent(&cache, |x| exact_soliton(x - shift, t, &params).unwrap()).unwrap();
        (State::new(cache.basis().clone(), u, t).unwrap(), params)
    }

    #[test]
    fn exact_soliton_has_no_phase_error() {
        for kind in [BasisKind::CubicLagrange, BasisKind::PeriodicCubicBSpline] {
            let (s, p) = soliton_state(kind, 0.0, 0.0);
            assert!(phase_error(&s, &p).unwrap() < 1e-3);
            let e = shape_error(&s, &p).unwrap();
            assert!(e < 1e-2, "{e}");
        }
    }

    #[test]
    fn translated_discrete_soliton() {
        // rolling the coefficients on a uniform mesh is an exact translation by
        // whole elements
        let params = SolitonParams { c: 3.0, half_length: 40.0 };
        for (kind, per_element) in [(BasisKind::CubicLagrange, 3), (BasisKind::PeriodicCubicBSpline, 1)] {
            let mesh = Mesh1D::uniform(40.0, 160).unwrap();
            let cache = AssemblyCache::new(BasisSet::new(kind, mesh)).unwrap();
            let u0 = represent(&cache, |x| exact_soliton(x, 0.0, &params).unwrap()).unwrap();
            let shift = 3;
            let n = u0.len();
            let u1: Vec<f64> = (0..n).map(|i| u0[(i + n - shift * per_element) % n]).collect();
            let delta = 3.0 * 0.5;
            let s0 = State::new(cache.basis().clone(), u0, 0.0).unwrap();
            let s1 = State::new(cache.basis().clone(), u1, 0.0).unwrap();
            let x0 = locate_peak(&s0.basis, &s0.u).unwrap();
            let x1 = locate_peak(&s1.basis, &s1.u).unwrap();
            assert!((x1 - x0 - delta).abs() < 1e-9, "{kind:?}: {}", x1 - x0);
            let pe = phase_error(&s1, &params).unwrap();
            assert!((pe - (x0 + delta).abs()).abs() < 1e-9);
            let a = shape_error(&s0, &params).unwrap();
            let b = shape_error(&s1, &params).unwrap();
            assert!((a - b).abs() < 1e-8, "{a} {b}");
        }
    }

    #[test]
    fn shifted_soliton() {
        let delta = 1.37;
        let (s, p) = soliton_state(BasisKind::PeriodicCubicBSpline, delta, 2.0);
        let pe = phase_error(&s, &p).unwrap();
        assert!((pe - delta).abs() < 5e-3, "{pe}");
        assert!(shape_error(&s, &p).unwrap() < 1e-2);
    }

    #[test]
    fn phase_error_unwraps_across_period() {
        // c t = 80 = 2L, so the peak is back at 0
        let (s, p) = soliton_state(BasisKind::CubicLagrange, 0.0, 80.0 / 3.0);
        assert!(phase_error(&s, &p).unwrap() < 1e-3);
    }

    #[test]
    fn peak_across_seam() {
        let (s, _) = soliton_state(BasisKind::PeriodicCubicBSpline, 40.0, 0.0);
        let x = locate_peak(&s.basis, &s.u).unwrap();
        assert!((x + 40.0).abs() < 1e-3 || (x - 40.0).abs() < 1e-3, "{x}");
    }

    #[test]
    fn zero_field_shape_error_is_soliton_norm() {
        let (s, p) = soliton_state(BasisKind::CubicLagrange, 0.0, 0.0);
        let zero = vec![0.0; s.u.len()];
        // flat fields have no peak
        let flat = State::new(s.basis.clone(), zero.clone(), 0.0).unwrap();
        assert!(matches!(shape_error(&flat, &p), Err(Error::DegeneratePeak(_))));
        // int (3(c-1))^2 sech^4(k x) dx = 9(c-1)^2 * 4/(3k) on the whole line
        let k = 0.5 * (1.0 - 1.0 / p.c).sqrt();
        let exact = (9.0 * (p.c - 1.0f64).powi(2) * 4.0 / (3.0 * k)).sqrt();
        let got = l2_distance_to(&s.basis, &zero, |x| exact_soliton(x, 0.0, &p)).unwrap();
        assert!((got - exact).abs() < 1e-3 * exact, "{got} {exact}");
    }

    #[test]
    fn drift_series() {
        let d = hamiltonian_drift(&[(0.0, 2.0), (1.0, 2.0), (2.0, 2.0)]).unwrap();
        assert_eq!(d.values, vec![0.0; 3]);
        assert!(!d.absolute);
        let d = hamiltonian_drift(&[(0.0, -4.0), (1.0, -3.0)]).unwrap();
        assert_eq!(d.values, vec![0.0, 0.25]);
        let d = hamiltonian_drift(&[(0.0, 0.0), (1.0, 1e-3)]).unwrap();
        assert!(d.absolute);
        assert_eq!(d.values[1], 1e-3);
        assert!(hamiltonian_drift(&[]).is_err());
        let m = max_abs_drift(&[(0.0, 1.0), (1.0, 1.1), (2.0, 0.5)], 0.0, 1.5).unwrap();
        assert!((m - 0.1).abs() < 1e-15);
    }
}
