//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::basis::BasisKind;
use crate::bbm::Hamiltonian;
use crate::error::{Error, Result};
use crate::steppers::{JacobianMode, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Problem {
    Soliton,
    TwoWave,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Dg1,
    Dg2,
    Tr,
    Im,
    Rk4,
}

impl Scheme {
    pub fn basis(self) -> BasisKind {
        match self {
            Scheme::Dg1 | Scheme::Tr => BasisKind::CubicLagrange,
            Scheme::Dg2 | Scheme::Im | Scheme::Rk4 => BasisKind::PeriodicCubicBSpline,
        }
    }

    /// The Hamiltonian the scheme's semi-discretization is built on.
    pub fn hamiltonian(self) -> Hamiltonian {
        match self {
            Scheme::Dg1 | Scheme::Tr => Hamiltonian::H1,
            Scheme::Dg2 | Scheme::Im | Scheme::Rk4 => Hamiltonian::H2,
        }
    }

    pub fn is_discrete_gradient(self) -> bool {
        matches!(self, Scheme::Dg1 | Scheme::Dg2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransferKind {
    Interpolate,
    Conservative,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: Problem,
    pub scheme: Scheme,
    pub moving_mesh: bool,
    pub transfer: TransferKind,
    pub c: f64,
    pub c_r: f64,
    pub c_s: f64,
    pub x_r: f64,
    pub x_s: f64,
    pub half_length: f64,
    pub elements: usize,
    pub dt: f64,
    pub t_end: f64,
    pub monitor_k: f64,
    pub smooth_monitor: bool,
    pub remesh_every: usize,
    pub deboor_sweeps: usize,
    pub deboor_tol: f64,
    pub solver: SolverConfig,
    pub output_dir: PathBuf,
    pub snapshot_times: Vec<f64>,
    pub output_every: usize,
    pub samples_per_element: usize,
}

impl RunConfig {
    /// Defaults for a scheme, with the soliton parameters of the fixed-mesh
    /// comparison runs.
    pub fn new(problem: Problem, scheme: Scheme) -> Self {
        Self {
            problem,
            scheme,
            moving_mesh: false,
            transfer: default_transfer(scheme),
            c: 3.0,
            c_r: 2.0,
            c_s: 1.5,
            x_r: 150.0,
            x_s: 105.0,
            half_length: 200.0,
            elements: 200,
            dt: 0.1,
            t_end: 50.0,
            monitor_k: 1.0,
            smooth_monitor: false,
            remesh_every: 1,
            deboor_sweeps: 5,
            deboor_tol: 0.05,
            solver: SolverConfig::default(),
            output_dir: PathBuf::from("output"),
            snapshot_times: Vec::new(),
            output_every: 1,
            samples_per_element: 10,
        }
    }

    pub fn basis(&self) -> BasisKind {
        self.scheme.basis()
    }

    /// Number of time steps; `t_end` must be a whole number of steps.
    pub fn steps(&self) -> Result<usize> {
        let n = (self.t_end / self.dt).round();
        if (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(self.dt) {
            return Err(Error::Parameter(format!(
                "t_end = {} is not a multiple of dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("dt", self.dt)?;
        positive("L", self.half_length)?;
        positive("deboor_tol", self.deboor_tol)?;
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::Parameter(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if self.t_end > 0.0 && self.t_end < self.dt {
            return Err(Error::Parameter("t_end must be at least dt".into()));
        }
        if !(self.monitor_k >= 0.0) || !self.monitor_k.is_finite() {
            return Err(Error::Parameter(format!("monitor_k must be non-negative, got {}", self.monitor_k)));
        }
        if self.elements < crate::mesh::MIN_ELEMENTS {
            return Err(Error::Parameter(format!("M must be at least {}", crate::mesh::MIN_ELEMENTS)));
        }
        for (name, v) in [("remesh_every", self.remesh_every), ("output_every", self.output_every), ("samples_per_element", self.samples_per_element), ("deboor_sweeps", self.deboor_sweeps)] {
            if v == 0 {
                return Err(Error::Parameter(format!("{name} must be at least 1")));
            }
        }
        match self.problem {
            Problem::Soliton => {
                if !(self.c > 1.0) {
                    return Err(Error::Parameter(format!("c must exceed 1, got {}", self.c)));
                }
            }
            Problem::TwoWave => {
                if !(self.c_r > 1.0) || !(self.c_s > 1.0) {
                    return Err(Error::Parameter("c_r and c_s must exceed 1".into()));
                }
            }
        }
        self.solver.validate()?;
        self.steps()?;
        Ok(())
    }
}

fn default_transfer(scheme: Scheme) -> TransferKind {
    match scheme.basis() {
        BasisKind::CubicLagrange => TransferKind::Interpolate,
        BasisKind::PeriodicCubicBSpline => TransferKind::Conservative,
    }
}

/// Raw entries with the line they came from; overrides use line 0.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("expected `key = value`, got `{content}`"),
                });
            };
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config {
                    line: line_no,
                    message: "empty key".into(),
                });
            }
            if let Some((_, first)) = raw.entries.get(&key) {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("duplicate key `{key}` (first set on line {first})"),
                });
            }
            raw.entries.insert(key, (v.trim().to_string(), line_no));
        }
        Ok(raw)
    }

    /// Applies a `key=value` override, replacing any value from the file.
    pub fn set_override(&mut self, spec: &str) -> Result<()> {
        let Some((k, v)) = spec.split_once('=') else {
            return Err(Error::Config {
                line: 0,
                message: format!("override `{spec}` is not `key=value`"),
            });
        };
        self.entries.insert(k.trim().to_string(), (v.trim().to_string(), 0));
        Ok(())
    }

    pub fn build(&self) -> Result<RunConfig> {
        const KEYS: &[&str] = &[
            "problem", "scheme", "basis", "moving_mesh", "transfer", "c", "c_r", "c_s", "x_r", "x_s", "L",
            "M", "dt", "t_end", "monitor_k", "smooth_monitor", "remesh_every", "deboor_sweeps",
            "deboor_tol", "newton_tol", "max_newton_iters", "jacobian_mode", "fd_epsilon",
            "frozen_operator", "euler_predictor", "output_dir", "snapshot_times", "output_every",
            "samples_per_element",
        ];
        for (key, (_, line)) in &self.entries {
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::Config {
                    line: *line,
                    message: format!("unknown key `{key}`"),
                });
            }
        }
        let problem = self.required("problem", parse_problem)?;
        let scheme = self.required("scheme", parse_scheme)?;
        let mut cfg = RunConfig::new(problem, scheme);

        if let Some((basis, line)) = self.get("basis", parse_basis)? {
            if basis != scheme.basis() {
                return Err(Error::Config {
                    line,
                    message: format!(
                        "scheme {scheme:?} needs basis {:?}, config asks for {basis:?}",
                        scheme.basis()
                    ),
                });
            }
        }
        macro_rules! set {
            ($key:literal, $field:expr, $parse:expr) => {
                if let Some((v, _)) = self.get($key, $parse)? {
                    $field = v;
                }
            };
        }
        set!("moving_mesh", cfg.moving_mesh, parse_bool);
        set!("transfer", cfg.transfer, parse_transfer);
        set!("c", cfg.c, parse_num::<f64>);
        set!("c_r", cfg.c_r, parse_num::<f64>);
        set!("c_s", cfg.c_s, parse_num::<f64>);
        set!("x_r", cfg.x_r, parse_num::<f64>);
        set!("x_s", cfg.x_s, parse_num::<f64>);
        set!("L", cfg.half_length, parse_num::<f64>);
        set!("M", cfg.elements, parse_num::<usize>);
        set!("dt", cfg.dt, parse_num::<f64>);
        set!("t_end", cfg.t_end, parse_num::<f64>);
        set!("monitor_k", cfg.monitor_k, parse_num::<f64>);
        set!("smooth_monitor", cfg.smooth_monitor, parse_bool);
        set!("remesh_every", cfg.remesh_every, parse_num::<usize>);
        set!("deboor_sweeps", cfg.deboor_sweeps, parse_num::<usize>);
        set!("deboor_tol", cfg.deboor_tol, parse_num::<f64>);
        set!("newton_tol", cfg.solver.newton_tol, parse_num::<f64>);
        set!("max_newton_iters", cfg.solver.max_newton_iters, parse_num::<usize>);
        set!("jacobian_mode", cfg.solver.jacobian_mode, parse_jacobian);
        set!("fd_epsilon", cfg.solver.fd_epsilon, parse_num::<f64>);
        set!("frozen_operator", cfg.solver.frozen_operator, parse_bool);
        set!("euler_predictor", cfg.solver.euler_predictor, parse_bool);
        set!("output_dir", cfg.output_dir, |s: &str| Ok(PathBuf::from(s)));
        set!("snapshot_times", cfg.snapshot_times, parse_list);
        set!("output_every", cfg.output_every, parse_num::<usize>);
        set!("samples_per_element", cfg.samples_per_element, parse_num::<usize>);

        cfg.validate().map_err(|e| match e {
            Error::Parameter(message) => Error::Config {
                line: self.line_of_first_problem(&message),
                message,
            },
            other => other,
        })?;
        Ok(cfg)
    }

    fn line_of_first_problem(&self, message: &str) -> usize {
        self.entries
            .iter()
            .filter(|(k, _)| message.starts_with(&format!("{k} ")))
            .map(|(_, (_, line))| *line)
            .next()
            .unwrap_or(0)
    }

    fn get<T>(&self, key: &str, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Result<Option<(T, usize)>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => parse(v)
                .map(|x| Some((x, *line)))
                .map_err(|m| Error::Config {
                    line: *line,
                    message: format!("`{key}`: {m}"),
                }),
        }
    }

    fn required<T>(&self, key: &str, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Result<T> {
        self.get(key, parse)?.map(|(v, _)| v).ok_or_else(|| Error::Config {
            line: 0,
            message: format!("missing required key `{key}`"),
        })
    }
}

/// Parses a configuration document with the given overrides applied.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    RawConfig::parse(text)?.build()
}

pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut raw = RawConfig::parse(text)?;
    for o in overrides {
        raw.set_override(o)?;
    }
    raw.build()
}

fn parse_num<T: FromStr>(s: &str) -> std::result::Result<T, String> {
    s.parse::<T>().map_err(|_| format!("cannot parse `{s}` as {}", std::any::type_name::<T>()))
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, got `{s}`")),
    }
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    let body = s.trim().trim_start_matches('[').trim_end_matches(']');
    body.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(parse_num::<f64>)
        .collect()
}

fn parse_problem(s: &str) -> std::result::Result<Problem, String> {
    match s.to_ascii_lowercase().as_str() {
        "soliton" => Ok(Problem::Soliton),
        "two_wave" | "two-wave" | "twowave" => Ok(Problem::TwoWave),
        _ => Err(format!("unknown problem `{s}` (soliton, two_wave)")),
    }
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    match s.to_ascii_uppercase().as_str() {
        "DG1" => Ok(Scheme::Dg1),
        "DG2" => Ok(Scheme::Dg2),
        "TR" => Ok(Scheme::Tr),
        "IM" => Ok(Scheme::Im),
        "RK4" | "RK" => Ok(Scheme::Rk4),
        _ => Err(format!("unknown scheme `{s}` (DG1, DG2, TR, IM, RK4)")),
    }
}

fn parse_basis(s: &str) -> std::result::Result<BasisKind, String> {
    match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
        "cubiclagrange" | "lagrange" => Ok(BasisKind::CubicLagrange),
        "periodiccubicbspline" | "bspline" => Ok(BasisKind::PeriodicCubicBSpline),
        _ => Err(format!("unknown basis `{s}` (lagrange, bspline)")),
    }
}

fn parse_transfer(s: &str) -> std::result::Result<TransferKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "interpolate" | "interp" => Ok(TransferKind::Interpolate),
        "conservative" => Ok(TransferKind::Conservative),
        _ => Err(format!("unknown transfer `{s}` (interpolate, conservative)")),
    }
}

fn parse_jacobian(s: &str) -> std::result::Result<JacobianMode, String> {
    match s.to_ascii_lowercase().as_str() {
        "analytic" => Ok(JacobianMode::Analytic),
        "finite_difference" | "fd" => Ok(JacobianMode::FiniteDifference),
        _ => Err(format!("unknown jacobian_mode `{s}` (analytic, finite_difference)")),
    }
}
