//! Periodic 1D meshes and r-adaptivity by equidistribution.

use crate::error::{check_len, Error, Result};

/// Smallest number of elements a periodic cubic basis can live on.
pub const MIN_ELEMENTS: usize = 4;

/// Relative floor on element width, as a fraction of the uniform width `2L/M`.
pub const MIN_WIDTH_FRACTION: f64 = 1e-3;

/// Ordered nodes `x_0 = -L < x_1 < ... < x_M = L`; `x_0` and `x_M` are the
/// same physical point.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh1D {
    nodes: Vec<f64>,
    half_length: f64,
}

impl Mesh1D {
    pub fn new(nodes: Vec<f64>, half_length: f64) -> Result<Self> {
        if !(half_length > 0.0) || !half_length.is_finite() {
            return Err(Error::InvalidMesh(format!("half length {half_length}")));
        }
        if nodes.len() < MIN_ELEMENTS + 1 {
            return Err(Error::InvalidMesh(format!(
                "{} elements, need at least {MIN_ELEMENTS}",
                nodes.len().saturating_sub(1)
            )));
        }
        let end_tol = 1e-12 * half_length;
        let (first, last) = (nodes[0], nodes[nodes.len() - 1]);
        if (first + half_length).abs() > end_tol || (last - half_length).abs() > end_tol {
            return Err(Error::InvalidMesh(format!(
                "endpoints {first}, {last} differ from -L, L with L = {half_length}"
            )));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMesh("non-finite node".into()));
        }
        if let Some(i) = nodes.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidMesh(format!(
                "nodes not strictly increasing at index {i}"
            )));
        }
        let mut nodes = nodes;
        let m = nodes.len() - 1;
        nodes[0] = -half_length;
        nodes[m] = half_length;
        Ok(Self { nodes, half_length })
    }

    pub fn uniform(half_length: f64, elements: usize) -> Result<Self> {
        let nodes = (0..=elements)
            .map(|i| -half_length + 2.0 * half_length * i as f64 / elements as f64)
            .collect();
        Self::new(nodes, half_length)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn length(&self) -> f64 {
        2.0 * self.half_length
    }

    pub fn element_bounds(&self, e: usize) -> (f64, f64) {
        (self.nodes[e], self.nodes[e + 1])
    }

    pub fn element_width(&self, e: usize) -> f64 {
        self.nodes[e + 1] - self.nodes[e]
    }

    pub fn min_width(&self) -> f64 {
        (0..self.elements())
            .map(|e| self.element_width(e))
            .fold(f64::INFINITY, f64::min)
    }

    /// Element containing `x` and the local coordinate in `[0, 1]`.
    /// `x = L` is reported as the right end of the last element.
    pub fn locate(&self, x: f64) -> Result<(usize, f64)> {
        let l = self.half_length;
        if !(x >= -l - 1e-12 * l && x <= l + 1e-12 * l) {
            return Err(Error::OutsideDomain { x, half_length: l });
        }
        let x = x.clamp(-l, l);
        let m = self.elements();
        // first node strictly greater than x
        let upper = self.nodes.partition_point(|&n| n <= x);
        let e = upper.saturating_sub(1).min(m - 1);
        let (a, b) = self.element_bounds(e);
        Ok((e, ((x - a) / (b - a)).clamp(0.0, 1.0)))
    }

    /// Maps any real `x` into `[-L, L)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let l = self.half_length;
        let y = (x + l).rem_euclid(2.0 * l) - l;
        if y >= l {
            -l
        } else {
            y
        }
    }
}

/// Monitor function values at the nodes of a mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct MonitorSamples {
    pub values: Vec<f64>,
    pub k: f64,
}

/// Generalised arc-length monitor `sqrt(1 + k^2 u_x^2)` with `u_x` from a
/// periodic central difference at each node.
pub fn monitor_arc_length(state_nodes: &[f64], mesh: &Mesh1D, k: f64) -> Result<MonitorSamples> {
    let m = mesh.elements();
    check_len(state_nodes.len(), m + 1)?;
    let x = mesh.nodes();
    let two_l = mesh.length();
    let mut values = Vec::with_capacity(m + 1);
    for i in 0..m {
        let (ul, xl) = if i == 0 {
            (state_nodes[m - 1], x[m - 1] - two_l)
        } else {
            (state_nodes[i - 1], x[i - 1])
        };
        let (ur, xr) = (state_nodes[i + 1], x[i + 1]);
        let d = (ur - ul) / (xr - xl);
        values.push((1.0 + k * k * d * d).sqrt());
    }
    values.push(values[0]);
    Ok(MonitorSamples { values, k })
}

/// Periodic (1/4, 1/2, 1/4) moving average of monitor samples.
pub fn smooth_monitor(monitor: &MonitorSamples) -> MonitorSamples {
    let m = monitor.values.len() - 1;
    let w = &monitor.values;
    let mut values: Vec<f64> = (0..m)
        .map(|i| 0.25 * w[(i + m - 1) % m] + 0.5 * w[i] + 0.25 * w[(i + 1) % m])
        .collect();
    values.push(values[0]);
    MonitorSamples { values, k: monitor.k }
}

fn element_integrals(mesh: &Mesh1D, monitor: &MonitorSamples) -> Vec<f64> {
    let w = &monitor.values;
    (0..mesh.elements())
        .map(|e| 0.5 * (w[e] + w[e + 1]) * mesh.element_width(e))
        .collect()
}

/// Largest relative deviation `|M * int_e w / int w - 1|` over the elements,
/// with the monitor taken piecewise linear.
pub fn check_equidistribution(mesh: &Mesh1D, monitor: &MonitorSamples) -> Result<f64> {
    let m = mesh.elements();
    check_len(monitor.values.len(), m + 1)?;
    let parts = element_integrals(mesh, monitor);
    let total: f64 = parts.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateMonitor(total));
    }
    Ok(parts
        .iter()
        .map(|p| (m as f64 * p / total - 1.0).abs())
        .fold(0.0, f64::max))
}

/// One inverse-CDF sweep: new node `i` sits where the cumulative integral of
/// the piecewise linear monitor reaches `i/M` of the total.
fn deboor_sweep(mesh: &Mesh1D, monitor: &MonitorSamples) -> Result<Vec<f64>> {
    let m = mesh.elements();
    let x = mesh.nodes();
    let w = &monitor.values;
    let parts = element_integrals(mesh, monitor);
    let total: f64 = parts.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateMonitor(total));
    }
    let mut new_nodes = Vec::with_capacity(m + 1);
    new_nodes.push(x[0]);
    let mut e = 0;
    let mut acc = 0.0;
    for i in 1..m {
        let target = total * i as f64 / m as f64;
        while e < m - 1 && acc + parts[e] < target {
            acc += parts[e];
            e += 1;
        }
        let h = x[e + 1] - x[e];
        let tau = (target - acc).clamp(0.0, parts[e]);
        // w0 s + (w1 - w0) s^2 / (2h) = tau
        let a = (w[e + 1] - w[e]) / (2.0 * h);
        let b = w[e];
        let disc = (b * b + 4.0 * a * tau).max(0.0);
        let denom = b + disc.sqrt();
        let s = if denom > 0.0 { 2.0 * tau / denom } else { 0.0 };
        new_nodes.push(x[e] + s.clamp(0.0, h));
    }
    new_nodes.push(x[m]);
    Ok(new_nodes)
}

/// Enforces the minimum element width, taking the deficit proportionally
/// from the elements above the floor.
fn apply_width_floor(nodes: &mut [f64], half_length: f64) {
    let m = nodes.len() - 1;
    let floor = MIN_WIDTH_FRACTION * 2.0 * half_length / m as f64;
    let mut widths: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
    for _ in 0..m {
        let short: f64 = widths.iter().filter(|&&h| h < floor).count() as f64;
        if short == 0.0 {
            break;
        }
        let deficit: f64 = widths.iter().filter(|&&h| h < floor).map(|h| floor - h).sum();
        let spare: f64 = widths.iter().filter(|&&h| h > floor).map(|h| h - floor).sum();
        let scale = 1.0 - deficit / spare;
        for h in widths.iter_mut() {
            if *h < floor {
                *h = floor;
            } else {
                *h = floor + (*h - floor) * scale;
            }
        }
    }
    let mut x = -half_length;
    for (i, h) in widths.iter().enumerate().take(m - 1) {
        x += h;
        nodes[i + 1] = x;
    }
    nodes[0] = -half_length;
    nodes[m] = half_length;
}

/// Piecewise linear interpolation of node samples onto new positions.
fn resample(mesh: &Mesh1D, values: &[f64], at: &[f64]) -> Vec<f64> {
    at.iter()
        .map(|&x| {
            let (e, xi) = mesh.locate(x).expect("resample inside domain");
            (1.0 - xi) * values[e] + xi * values[e + 1]
        })
        .collect()
}

/// De Boor's equidistribution iteration.
///
/// Sweeps are repeated, resampling the monitor onto each new mesh, until
/// [`check_equidistribution`] drops to `tol` or `max_sweeps` is reached.
/// A constant monitor returns the uniform mesh directly.
pub fn equidistribute_deboor(
    mesh: &Mesh1D,
    monitor: &MonitorSamples,
    max_sweeps: usize,
    tol: f64,
) -> Result<Mesh1D> {
    let m = mesh.elements();
    check_len(monitor.values.len(), m + 1)?;
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("equidistribution tol {tol}")));
    }
    let w0 = monitor.values[0];
    if monitor.values.iter().all(|&v| v == w0) {
        if !(w0 > 0.0) {
            return Err(Error::DegenerateMonitor(w0 * mesh.length()));
        }
        return Mesh1D::uniform(mesh.half_length(), m);
    }

    let mut current = mesh.clone();
    let mut samples = monitor.clone();
    for _ in 0..max_sweeps {
        if check_equidistribution(&current, &samples)? <= tol {
            break;
        }
        let mut nodes = deboor_sweep(&current, &samples)?;
        apply_width_floor(&mut nodes, mesh.half_length());
        // always from the input samples, so repeated sweeps do not smear the monitor
        let values = resample(mesh, &monitor.values, &nodes);
        current = Mesh1D::new(nodes, mesh.half_length())?;
        samples = MonitorSamples {
            values,
            k: samples.k,
        };
    }
    Ok(current)
}
