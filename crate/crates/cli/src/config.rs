//! Experiment configuration: JSON schema, parsing and semantic validation.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use spreadlab::diagnostics::Functional;
use spreadlab::front_analysis::{Component, Direction, OrderingObserver};
use spreadlab::kinetics::{steady_states, Densities};
use spreadlab::linear_speeds::closed_form_speeds;
use spreadlab::pde_sim::{build_initial_state, Grid1D, InitialSpec, Profile, DEFAULT_SAFETY};
use spreadlab::ModelParams;

use crate::CliError;

/// Upper bounds that keep a single config from requesting absurd work.
pub const MAX_GRID_POINTS: usize = 2_000_000;
pub const MAX_SAMPLES: f64 = 1e6;
pub const MAX_EIGEN_POINTS: usize = 1_000_000;
pub const MAX_ODE_STEPS: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub params: ModelParams,
    #[serde(default)]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub eigen: Option<EigenConfig>,
    #[serde(default)]
    pub pulling: Option<PullingConfig>,
    #[serde(default)]
    pub lyapunov: Option<LyapunovConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub expect: Option<Expectations>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
}

impl GridConfig {
    pub fn points(&self) -> f64 {
        ((self.x_max - self.x_min) / self.dx).round() + 1.0
    }

    pub fn build(&self) -> spreadlab::Result<Grid1D> {
        Grid1D::with_spacing(self.x_min, self.x_max, self.dx)
    }
}

fn default_safety() -> f64 {
    DEFAULT_SAFETY
}

fn default_period() -> f64 {
    0.5
}

fn right() -> Direction {
    Direction::Right
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub grid: GridConfig,
    pub initial: InitialSpec,
    pub t_final: f64,
    #[serde(default = "default_safety")]
    pub dt_safety: f64,
    /// Sampling period of all observers.
    #[serde(default = "default_period")]
    pub sample_period: f64,
    #[serde(default)]
    pub observers: Vec<ObserverConfig>,
    /// Times at which the full state is written.
    #[serde(default)]
    pub snapshots: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObserverConfig {
    Front {
        component: Component,
        #[serde(default = "right")]
        direction: Direction,
        /// Defaults to one percent of the component scale.
        #[serde(default)]
        threshold: Option<f64>,
    },
    /// Evaluated on the final state.
    Plateau {
        target: PlateauTarget,
        region: [f64; 2],
        /// Region given in units of `x / T`.
        #[serde(default)]
        per_unit_time: bool,
        tol: f64,
    },
    Lyapunov {
        functional: Functional,
        radius: f64,
    },
    Ordering,
}

/// A member of the steady-state set by name, or an explicit triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlateauTarget {
    Named(String),
    Point(Densities),
}

impl PlateauTarget {
    pub fn label(&self) -> String {
        match self {
            PlateauTarget::Named(n) => n.clone(),
            PlateauTarget::Point(_) => "explicit".to_string(),
        }
    }

    pub fn resolve(&self, params: &ModelParams) -> Result<Densities, String> {
        match self {
            PlateauTarget::Point(p) => Ok(*p),
            PlateauTarget::Named(name) => {
                let set = steady_states(params).map_err(|e| e.to_string())?;
                set.by_name(name).ok_or_else(|| {
                    let names: Vec<_> = set.members().into_iter().map(|(n, _)| n).collect();
                    format!("unknown steady state {name:?}; available: {}", names.join(", "))
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemEigenConfig {
    pub c: f64,
    #[serde(default)]
    pub delta: f64,
    pub half_width: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarEigenConfig {
    pub d: f64,
    pub c: f64,
    pub a_coef: f64,
    pub half_width: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenConfig {
    #[serde(default)]
    pub system: Option<SystemEigenConfig>,
    #[serde(default)]
    pub scalar: Option<ScalarEigenConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub d1_min: f64,
    pub d1_max: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PullingConfig {
    #[serde(default)]
    pub eps: f64,
    /// Speed at which the subsolution rates are evaluated; defaults to `c_v**`.
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
}

fn default_functional() -> Functional {
    Functional::Phi
}

fn default_radius() -> f64 {
    10.0
}

fn default_stride() -> usize {
    100
}

/// Spatially homogeneous trajectory along which `E_R` is recorded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    #[serde(default = "default_functional")]
    pub functional: Functional,
    pub start: Densities,
    pub t_final: f64,
    pub dt: f64,
    #[serde(default = "default_stride")]
    pub sample_every: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Overridden by `--out`.
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default = "yes")]
    pub write_snapshots: bool,
    #[serde(default = "yes")]
    pub write_eigenfunctions: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            write_snapshots: true,
            write_eigenfunctions: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Approx {
    pub value: f64,
    pub tol: f64,
}

impl Approx {
    pub fn accepts(&self, x: f64) -> bool {
        (x - self.value).abs() <= self.tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

impl Bounds {
    pub fn accepts(&self, x: f64) -> bool {
        self.min.is_none_or(|m| x >= m) && self.max.is_none_or(|m| x <= m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedSpeed {
    pub component: Component,
    #[serde(default = "right")]
    pub direction: Direction,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

impl ExpectedSpeed {
    pub fn bounds(&self) -> Bounds {
        Bounds {
            min: self.min,
            max: self.max,
        }
    }
}

/// Expected-value blocks checked under `--assert`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    #[serde(default)]
    pub c_mu_star: Option<Approx>,
    #[serde(default)]
    pub pulling_holds: Option<bool>,
    #[serde(default)]
    pub pulling_lhs: Option<Approx>,
    #[serde(default)]
    pub pulling_rhs: Option<Approx>,
    #[serde(default)]
    pub fitted_speeds: Vec<ExpectedSpeed>,
    #[serde(default)]
    pub plateaus_pass: Option<bool>,
    #[serde(default)]
    pub ordering_max: Option<f64>,
    #[serde(default)]
    pub eigenvalue: Option<Bounds>,
    #[serde(default)]
    pub lyapunov_decreasing: Option<bool>,
}

/// Several configs run by `sweep`: either an explicit list, or a base config
/// with objects merged into it one at a time (nested objects merge key by key).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    #[serde(default)]
    pub configs: Vec<Value>,
    #[serde(default)]
    pub base: Option<Value>,
    #[serde(default)]
    pub overrides: Vec<Value>,
}

fn schema_error(e: serde_json::Error) -> CliError {
    let text = e.to_string();
    let suffix = format!(" at line {} column {}", e.line(), e.column());
    let message = text.strip_suffix(&suffix).unwrap_or(&text).to_string();
    CliError::Schema {
        line: e.line(),
        column: e.column(),
        message,
    }
}

fn invalid(field: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {message}"))
}

/// Parses one experiment config. Schema violations carry line and column.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    serde_json::from_str(text).map_err(schema_error)
}

/// Parses and expands a sweep file into its member configs.
pub fn parse_sweep(text: &str) -> Result<Vec<ExperimentConfig>, CliError> {
    let file: SweepFile = serde_json::from_str(text).map_err(schema_error)?;
    let mut raw = file.configs;
    match (&file.base, file.overrides.is_empty()) {
        (Some(base), _) => {
            if file.overrides.is_empty() {
                raw.push(base.clone());
            }
            for o in &file.overrides {
                let mut merged = base.clone();
                merge(&mut merged, o);
                raw.push(merged);
            }
        }
        (None, false) => return Err(invalid("overrides", "given without a base config")),
        (None, true) => {}
    }
    if raw.is_empty() {
        return Err(invalid("sweep", "no configs"));
    }
    raw.into_iter()
        .enumerate()
        .map(|(i, v)| {
            serde_json::from_value(v).map_err(|e| CliError::Config(format!("sweep config #{i}: {e}")))
        })
        .collect()
}

fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

fn finite(field: &str, x: f64) -> Result<(), CliError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("{x} is not finite")))
    }
}

fn positive(field: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("{x} must be positive and finite")))
    }
}

/// Furthest reach of the compactly supported initial predators: `(center, half_width)` pairs.
fn supports(spec: &InitialSpec) -> Vec<(f64, f64)> {
    [spec.u, spec.v]
        .iter()
        .filter_map(|p| match *p {
            Profile::Bump {
                center, half_width, ..
            } => Some((center, half_width)),
            _ => None,
        })
        .collect()
}

fn validate_simulation(sim: &SimulationConfig, params: &ModelParams) -> Result<(), CliError> {
    let g = &sim.grid;
    finite("simulation.grid.x_min", g.x_min)?;
    finite("simulation.grid.x_max", g.x_max)?;
    positive("simulation.grid.dx", g.dx)?;
    if g.x_max <= g.x_min {
        return Err(invalid("simulation.grid", "x_max must exceed x_min"));
    }
    let points = g.points();
    if !(points >= 3.0 && points <= MAX_GRID_POINTS as f64) {
        return Err(invalid(
            "simulation.grid",
            format!("{points} points; allowed range is 3..={MAX_GRID_POINTS}"),
        ));
    }
    positive("simulation.t_final", sim.t_final)?;
    if !(sim.dt_safety > 0.0 && sim.dt_safety <= 1.0) {
        return Err(invalid("simulation.dt_safety", format!("{} not in (0, 1]", sim.dt_safety)));
    }
    positive("simulation.sample_period", sim.sample_period)?;
    if sim.t_final / sim.sample_period > MAX_SAMPLES {
        return Err(invalid(
            "simulation.sample_period",
            format!("more than {MAX_SAMPLES} samples requested"),
        ));
    }

    let tiny = Grid1D::new(g.x_min, g.x_max, 3).map_err(|e| invalid("simulation.grid", e))?;
    build_initial_state(&sim.initial, &tiny, params).map_err(|e| invalid("simulation.initial", e))?;

    let speeds = closed_form_speeds(params).map_err(|e| invalid("params", e))?;
    let c_max = [speeds.c_u_star, speeds.c_v_star, speeds.c_mu_star.unwrap_or(0.0)]
        .into_iter()
        .fold(0.0, f64::max);
    for (center, half_width) in supports(&sim.initial) {
        let reach = c_max * sim.t_final + half_width;
        let room = (g.x_max - center).min(center - g.x_min);
        if !(reach < 0.9 * room) {
            return Err(invalid(
                "simulation.grid",
                format!(
                    "too narrow for T = {}: max speed {c_max:.6} x T + support {half_width} = {reach:.3} \
                     must be below 0.9 x {room:.3} (distance from the bump center {center} to the nearer end)",
                    sim.t_final
                ),
            ));
        }
    }

    for (i, o) in sim.observers.iter().enumerate() {
        let field = format!("simulation.observers[{i}]");
        match o {
            ObserverConfig::Front {
                component,
                threshold,
                ..
            } => {
                if let Some(th) = threshold {
                    let scale = component.scale(params);
                    if !(*th > 0.0 && *th < scale) {
                        return Err(invalid(
                            &field,
                            format!("threshold {th} must lie in (0, {scale})"),
                        ));
                    }
                }
            }
            ObserverConfig::Plateau {
                target,
                region,
                tol,
                ..
            } => {
                positive(&format!("{field}.tol"), *tol)?;
                finite(&format!("{field}.region"), region[0])?;
                finite(&format!("{field}.region"), region[1])?;
                if region[0] > region[1] {
                    return Err(invalid(&field, "region must be ordered"));
                }
                target.resolve(params).map_err(|e| invalid(&field, e))?;
            }
            ObserverConfig::Lyapunov { radius, .. } => {
                positive(&format!("{field}.radius"), *radius)?;
                if params.mu != 0.0 {
                    return Err(invalid(&field, "Lyapunov probes need mu = 0"));
                }
            }
            ObserverConfig::Ordering => {
                OrderingObserver::new(params, sim.sample_period).map_err(|e| invalid(&field, e))?;
            }
        }
    }
    for (i, &t) in sim.snapshots.iter().enumerate() {
        if !(t >= 0.0 && t <= sim.t_final) {
            return Err(invalid(
                &format!("simulation.snapshots[{i}]"),
                format!("{t} outside [0, {}]", sim.t_final),
            ));
        }
    }
    Ok(())
}

fn validate_eigen_grid(field: &str, half_width: f64, n: usize) -> Result<(), CliError> {
    positive(&format!("{field}.half_width"), half_width)?;
    if !(10..=MAX_EIGEN_POINTS).contains(&n) {
        return Err(invalid(
            &format!("{field}.n"),
            format!("{n} outside 10..={MAX_EIGEN_POINTS}"),
        ));
    }
    Ok(())
}

/// Semantic checks run before any computation.
pub fn validate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let p = &cfg.params;
    p.ensure_valid().map_err(|e| invalid("params", e))?;
    if let Some(sim) = &cfg.simulation {
        validate_simulation(sim, p)?;
    }
    if let Some(e) = &cfg.eigen {
        if let Some(s) = &e.system {
            finite("eigen.system.c", s.c)?;
            if !(s.delta >= 0.0 && s.delta.is_finite()) {
                return Err(invalid("eigen.system.delta", "must be finite and >= 0"));
            }
            validate_eigen_grid("eigen.system", s.half_width, s.n)?;
            if !(p.mu > 0.0) {
                return Err(invalid("eigen.system", "the system eigenproblem needs mu > 0"));
            }
        }
        if let Some(s) = &e.scalar {
            positive("eigen.scalar.d", s.d)?;
            finite("eigen.scalar.c", s.c)?;
            finite("eigen.scalar.a_coef", s.a_coef)?;
            validate_eigen_grid("eigen.scalar", s.half_width, s.n)?;
        }
    }
    if let Some(pc) = &cfg.pulling {
        if !(pc.eps >= 0.0 && pc.eps.is_finite()) {
            return Err(invalid("pulling.eps", "must be finite and >= 0"));
        }
        if let Some(c) = pc.c {
            finite("pulling.c", c)?;
        }
        if let Some(s) = &pc.scan {
            finite("pulling.scan.d1_min", s.d1_min)?;
            finite("pulling.scan.d1_max", s.d1_max)?;
            if s.steps == 0 || s.steps > 1_000_000 || s.d1_max <= s.d1_min {
                return Err(invalid("pulling.scan", "need d1_min < d1_max and 1..=1000000 steps"));
            }
        }
    }
    if let Some(l) = &cfg.lyapunov {
        positive("lyapunov.t_final", l.t_final)?;
        positive("lyapunov.dt", l.dt)?;
        positive("lyapunov.radius", l.radius)?;
        if l.t_final / l.dt > MAX_ODE_STEPS {
            return Err(invalid("lyapunov.dt", format!("more than {MAX_ODE_STEPS} steps")));
        }
        if l.sample_every == 0 {
            return Err(invalid("lyapunov.sample_every", "must be at least 1"));
        }
        if p.mu != 0.0 {
            return Err(invalid("lyapunov", "Lyapunov functionals need mu = 0"));
        }
        let [u, v, w] = l.start;
        let top = p.a - 1.0;
        let inside = u > 0.0 && u <= top && v >= 0.0 && v <= top && w >= p.beta() && w <= 1.0;
        if !inside {
            return Err(invalid(
                "lyapunov.start",
                format!("{:?} outside the invariant box with u > 0", l.start),
            ));
        }
        match l.functional {
            Functional::V if v != 0.0 => {
                return Err(invalid("lyapunov.start", "functional V needs v = 0"))
            }
            Functional::Phi if v == 0.0 => {
                return Err(invalid("lyapunov.start", "functional Phi needs v > 0"))
            }
            _ => {}
        }
    }
    if let Some(x) = &cfg.expect {
        for (name, a) in [
            ("c_mu_star", x.c_mu_star),
            ("pulling_lhs", x.pulling_lhs),
            ("pulling_rhs", x.pulling_rhs),
        ] {
            if let Some(a) = a {
                finite(&format!("expect.{name}.value"), a.value)?;
                if !(a.tol >= 0.0) {
                    return Err(invalid(&format!("expect.{name}.tol"), "must be >= 0"));
                }
            }
        }
    }
    Ok(())
}
