//! Time-stepping driver and CSV output.

use std::fs;
use std::path::Path;

use super::config::{Problem, RunConfig, Scheme, TransferKind};
use crate::assembly::AssemblyCache;
use crate::basis::BasisSet;
use crate::bbm::{exact_soliton, initial_two_wave, represent, Hamiltonian, SolitonParams, State, TwoWaveParams};
use crate::diagnostics::{phase_error, shape_error};
use crate::error::{Error, Result};
use crate::mesh::{equidistribute_deboor, monitor_arc_length, smooth_monitor, Mesh1D};
use crate::steppers::{
    dg_moving_step, implicit_midpoint_step, rk4_step, trapezoidal_step, StepResult,
};
use crate::transfer::{conservative_transfer, interp_transfer_cached};

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub h1: f64,
    pub h2: f64,
    /// `NaN` outside the soliton problem.
    pub phase_error: f64,
    pub shape_error: f64,
    pub newton_iters: usize,
}

#[derive(Debug)]
pub struct RunOutput {
    pub series: Vec<SeriesRow>,
    /// Node positions at each series time.
    pub meshes: Vec<(f64, Vec<f64>)>,
    /// `(t, [(x, u)])` at the requested snapshot times.
    pub snapshots: Vec<(f64, Vec<(f64, f64)>)>,
    /// Last successfully computed state.
    pub final_state: State,
    /// Steps where conservative transfer failed and interpolation was used.
    pub transfer_fallbacks: usize,
    pub failure: Option<Error>,
}

impl RunOutput {
    pub fn hamiltonian_series(&self, h: Hamiltonian) -> Vec<(f64, f64)> {
        self.series
            .iter()
            .map(|r| (r.t, if h == Hamiltonian::H1 { r.h1 } else { r.h2 }))
            .collect()
    }
}

fn initial_state(cfg: &RunConfig, cache: &AssemblyCache) -> Result<Vec<f64>> {
    match cfg.problem {
        Problem::Soliton => {
            let p = soliton_params(cfg);
            represent(cache, |x| exact_soliton(x, 0.0, &p).unwrap_or(f64::NAN))
        }
        Problem::TwoWave => {
            let p = TwoWaveParams {
                x_r: cfg.x_r,
                x_s: cfg.x_s,
                c_r: cfg.c_r,
                c_s: cfg.c_s,
                half_length: cfg.half_length,
            };
            represent(cache, |x| initial_two_wave(x, &p).unwrap_or(f64::NAN))
        }
    }
}

fn soliton_params(cfg: &RunConfig) -> SolitonParams {
    SolitonParams {
        c: cfg.c,
        half_length: cfg.half_length,
    }
}

fn series_row(cfg: &RunConfig, cache: &AssemblyCache, u: &[f64], t: f64, newton_iters: usize) -> Result<SeriesRow> {
    let (phase, shape) = match cfg.problem {
        Problem::Soliton => {
            let state = State::new(cache.basis().clone(), u.to_vec(), t)?;
            let p = soliton_params(cfg);
            (phase_error(&state, &p)?, shape_error(&state, &p)?)
        }
        Problem::TwoWave => (f64::NAN, f64::NAN),
    };
    Ok(SeriesRow {
        t,
        h1: Hamiltonian::H1.value(cache, u)?,
        h2: Hamiltonian::H2.value(cache, u)?,
        phase_error: phase,
        shape_error: shape,
        newton_iters,
    })
}

fn sample_field(cfg: &RunConfig, basis: &BasisSet, u: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mesh = basis.mesh();
    let k = cfg.samples_per_element;
    let mut out = Vec::with_capacity(basis.elements() * k + 1);
    for e in 0..basis.elements() {
        let (a, b) = mesh.element_bounds(e);
        for j in 0..k {
            let x = a + (b - a) * j as f64 / k as f64;
            out.push((x, basis.eval_field(u, x)?));
        }
    }
    let l = mesh.half_length();
    out.push((l, basis.eval_field(u, l)?));
    Ok(out)
}

fn next_mesh(cfg: &RunConfig, cache: &AssemblyCache, u: &[f64]) -> Result<Mesh1D> {
    let basis = cache.basis();
    let nodal = basis.nodal_values(u)?;
    let mut monitor = monitor_arc_length(&nodal, basis.mesh(), cfg.monitor_k)?;
    if cfg.smooth_monitor {
        monitor = smooth_monitor(&monitor);
    }
    equidistribute_deboor(basis.mesh(), &monitor, cfg.deboor_sweeps, cfg.deboor_tol)
}

fn fixed_step(cfg: &RunConfig, cache: &AssemblyCache, u: &[f64]) -> Result<StepResult> {
    let h = cfg.scheme.hamiltonian();
    match cfg.scheme {
        Scheme::Dg1 | Scheme::Dg2 => dg_moving_step(u, 0.0, cache, h, cfg.dt, &cfg.solver, true),
        Scheme::Tr => trapezoidal_step(u, cache, cfg.dt, &cfg.solver),
        Scheme::Im => implicit_midpoint_step(u, cache, cfg.dt, &cfg.solver),
        Scheme::Rk4 => rk4_step(u, cache, cfg.dt),
    }
}

struct Advance {
    /// Set when the mesh changed.
    cache: Option<AssemblyCache>,
    step: StepResult,
    fallback: bool,
}

/// Remesh, transfer and step.
fn moving_step(cfg: &RunConfig, cache: &AssemblyCache, u: &[f64]) -> Result<Advance> {
    let h = cfg.scheme.hamiltonian();
    let mesh = next_mesh(cfg, cache, u)?;
    let new_cache = AssemblyCache::new(BasisSet::new(cfg.basis(), mesh))?;
    let i_old = h.value(cache, u)?;
    let mut fallback = false;
    let (u_hat, conservative) = match cfg.transfer {
        TransferKind::Interpolate => (interp_transfer_cached(u, cache, &new_cache)?, false),
        TransferKind::Conservative => match conservative_transfer(u, cache, &new_cache, h, &cfg.solver) {
            Ok(r) => (r.coeffs, true),
            Err(e) => {
                log::warn!("conservative transfer failed ({e}); interpolating instead");
                fallback = true;
                (interp_transfer_cached(u, cache, &new_cache)?, false)
            }
        },
    };
    let step = if cfg.scheme.is_discrete_gradient() {
        dg_moving_step(&u_hat, i_old, &new_cache, h, cfg.dt, &cfg.solver, conservative)?
    } else {
        fixed_step(cfg, &new_cache, &u_hat)?
    };
    Ok(Advance {
        cache: Some(new_cache),
        step,
        fallback,
    })
}

/// Runs the configured experiment in memory.
pub fn simulate(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let steps = cfg.steps()?;
    let mesh = Mesh1D::uniform(cfg.half_length, cfg.elements)?;
    let mut cache = AssemblyCache::new(BasisSet::new(cfg.basis(), mesh))?;
    log::info!(
        "{:?} on {} elements ({} dofs), {} steps of {}",
        cfg.scheme,
        cfg.elements,
        cache.dof_count(),
        steps,
        cfg.dt
    );
    let mut u = initial_state(cfg, &cache)?;
    let mut out = RunOutput {
        series: Vec::new(),
        meshes: Vec::new(),
        snapshots: Vec::new(),
        final_state: State::new(cache.basis().clone(), u.clone(), 0.0)?,
        transfer_fallbacks: 0,
        failure: None,
    };
    let mut pending: Vec<f64> = cfg.snapshot_times.clone();
    pending.sort_by(f64::total_cmp);
    let mut record = |out: &mut RunOutput, cache: &AssemblyCache, u: &[f64], t: f64, iters: usize, force: bool, step: usize| -> Result<()> {
        if force || step % cfg.output_every == 0 {
            out.series.push(series_row(cfg, cache, u, t, iters)?);
            out.meshes.push((t, cache.basis().mesh().nodes().to_vec()));
        }
        while let Some(&ts) = pending.first() {
            if ts > t + 0.5 * cfg.dt {
                break;
            }
            pending.remove(0);
            out.snapshots.push((t, sample_field(cfg, cache.basis(), u)?));
        }
        Ok(())
    };
    record(&mut out, &cache, &u, 0.0, 0, true, 0)?;

    for n in 1..=steps {
        let t = n as f64 * cfg.dt;
        let remesh = cfg.moving_mesh && (n - 1) % cfg.remesh_every == 0;
        let advanced = if remesh {
            moving_step(cfg, &cache, &u)
        } else {
            fixed_step(cfg, &cache, &u).map(|step| Advance {
                cache: None,
                step,
                fallback: false,
            })
        };
        match advanced {
            Ok(adv) => {
                if let Some(c) = adv.cache {
                    cache = c;
                }
                if adv.fallback {
                    out.transfer_fallbacks += 1;
                }
                u = adv.step.u_next;
                out.final_state = State::new(cache.basis().clone(), u.clone(), t)?;
                record(&mut out, &cache, &u, t, adv.step.newton_iters, n == steps, n)?;
            }
            Err(e) => {
                log::error!("step {n} (t = {t}) failed: {e}");
                out.failure = Some(e);
                break;
            }
        }
    }
    Ok(out)
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Writes `series.csv`, `mesh.csv` and the snapshots into `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("series.csv")).map_err(csv_error)?;
    w.write_record(["t", "H1_p", "H2_p", "phase_error", "shape_error", "newton_iters"])
        .map_err(csv_error)?;
    for r in &out.series {
        w.write_record([
            fmt(r.t),
            fmt(r.h1),
            fmt(r.h2),
            fmt(r.phase_error),
            fmt(r.shape_error),
            r.newton_iters.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("mesh.csv")).map_err(csv_error)?;
    let width = out.meshes.first().map_or(0, |(_, nodes)| nodes.len());
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((0..width).map(|i| format!("x{i}")))
        .collect();
    w.write_record(&header).map_err(csv_error)?;
    for (t, nodes) in &out.meshes {
        w.write_record(std::iter::once(fmt(*t)).chain(nodes.iter().map(|x| fmt(*x))))
            .map_err(csv_error)?;
    }
    w.flush()?;

    for (t, samples) in &out.snapshots {
        write_samples(&dir.join(format!("snapshot_{}.csv", snapshot_label(*t))), samples)?;
    }
    Ok(())
}

fn write_samples(path: &Path, samples: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(["x", "u"]).map_err(csv_error)?;
    for (x, u) in samples {
        w.write_record([fmt(*x), fmt(*u)]).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// `50` for whole times, `12.5` otherwise.
pub fn snapshot_label(t: f64) -> String {
    let r = (t * 1e6).round() / 1e6;
    if r.fract() == 0.0 {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}

/// Runs and writes all outputs. On a step failure the last good state is
/// written to `failure_state.csv` and the error is returned.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let mut out = simulate(cfg)?;
    write_outputs(&out, &cfg.output_dir)?;
    if let Some(err) = out.failure.take() {
        let s = &out.final_state;
        let samples = sample_field(cfg, &s.basis, &s.u)?;
        write_samples(&cfg.output_dir.join("failure_state.csv"), &samples)?;
        return Err(err);
    }
    Ok(out)
}
