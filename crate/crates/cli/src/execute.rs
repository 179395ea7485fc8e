//! Subcommand implementations.

use serde::Serialize;

use spreadlab::diagnostics::{
    homogeneous_trajectory, lyapunov_energy, pulling_conditions, search_pulling_params,
    subsolution_rates, LyapunovObserver, PullingCheck, SubsolutionRates,
};
use spreadlab::eigensolver::{limit_eigenvalue, scalar_dirichlet_eig, system_dirichlet_eig};
use spreadlab::front_analysis::{
    default_window, fit_speed, plateau_match, Component, Direction, FrontObserver,
    OrderingObserver, SpeedReport,
};
use spreadlab::kinetics::{validate_params, Densities, ValidationReport};
use spreadlab::linear_speeds::{closed_form_speeds, SpeedTable};
use spreadlab::pde_sim::{build_initial_state, run, stable_dt, FieldState, Grid1D, Observer};
use spreadlab::ModelParams;

use crate::config::{ExperimentConfig, ObserverConfig, SimulationConfig};
use crate::output::{fmt_f64, fmt_opt, quote, to_json, Table};
use crate::{numerical, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Speeds,
    Simulate,
    Eigen,
    Pulling,
    Lyapunov,
    Check,
}

/// A named output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssertCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<Artifact>,
    pub facts: Facts,
}

/// Quantities an `expect` block can refer to.
#[derive(Debug, Clone, Default)]
pub struct Facts {
    pub speeds: Option<SpeedTable>,
    pub pulling: Option<PullingCheck>,
    pub fits: Vec<FitRow>,
    pub plateaus: Vec<PlateauRow>,
    pub ordering_max: Option<f64>,
    pub eigenvalue: Option<f64>,
    pub lyapunov_decreasing: Option<bool>,
    pub validation: Option<ValidationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRow {
    pub component: Component,
    pub direction: Direction,
    pub threshold: f64,
    pub report: Option<SpeedReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlateauRow {
    pub t: f64,
    pub target: String,
    pub point: Densities,
    pub region: (f64, f64),
    pub tol: f64,
    pub distance: f64,
    pub points: usize,
    pub pass: bool,
}

impl Outcome {
    fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push(Artifact {
            name: name.into(),
            contents,
        });
    }
}

#[derive(Serialize)]
struct SpeedsFile<'a> {
    name: Option<&'a str>,
    params: &'a ModelParams,
    speed_table: &'a SpeedTable,
    pulling: &'a PullingCheck,
    #[serde(skip_serializing_if = "Option::is_none")]
    fitted_speeds: Option<&'a [FitRow]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ordering_max: Option<f64>,
}

pub fn run_command(cfg: &ExperimentConfig, cmd: Command) -> Result<Outcome, CliError> {
    if cmd != Command::Check {
        crate::config::validate(cfg)?;
    }
    let mut out = Outcome::default();
    match cmd {
        Command::Check => check(cfg, &mut out)?,
        Command::Speeds => {
            speeds(cfg, &mut out)?;
            write_speeds(cfg, &mut out)?;
        }
        Command::Simulate => {
            let sim = cfg
                .simulation
                .as_ref()
                .ok_or_else(|| CliError::Config("simulate needs a \"simulation\" block".into()))?;
            speeds(cfg, &mut out)?;
            simulate(cfg, sim, &mut out)?;
            write_speeds(cfg, &mut out)?;
        }
        Command::Eigen => eigen(cfg, &mut out)?,
        Command::Pulling => {
            speeds(cfg, &mut out)?;
            pulling(cfg, &mut out)?;
            write_speeds(cfg, &mut out)?;
        }
        Command::Lyapunov => lyapunov(cfg, &mut out)?,
    }
    Ok(out)
}

fn check(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let report = validate_params(&cfg.params);
    out.add("check.json", to_json(&report)?);
    out.facts.validation = Some(report);
    Ok(())
}

fn speeds(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let table = closed_form_speeds(&cfg.params).map_err(|e| numerical("speeds", e))?;
    let check = pulling_conditions(&cfg.params).map_err(|e| numerical("pulling conditions", e))?;
    out.facts.speeds = Some(table);
    out.facts.pulling = Some(check);
    Ok(())
}

fn write_speeds(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let (Some(table), Some(pulling)) = (&out.facts.speeds, &out.facts.pulling) else {
        return Ok(());
    };
    let file = SpeedsFile {
        name: cfg.name.as_deref(),
        params: &cfg.params,
        speed_table: table,
        pulling,
        fitted_speeds: cfg.simulation.as_ref().map(|_| out.facts.fits.as_slice()),
        ordering_max: out.facts.ordering_max,
    };
    let text = to_json(&file)?;
    out.add("speeds.json", text);
    Ok(())
}

/// Stores full states at requested times; sampled every step.
struct SnapshotObserver {
    period: f64,
    targets: Vec<f64>,
    next: usize,
    taken: Vec<(f64, FieldState)>,
}

impl Observer for SnapshotObserver {
    fn period(&self) -> f64 {
        self.period
    }

    fn observe(&mut self, state: &FieldState, _params: &ModelParams) -> spreadlab::Result<()> {
        let half = 0.5 * self.period;
        while self.next < self.targets.len() && self.targets[self.next] <= state.t + half {
            self.taken.push((self.targets[self.next], state.clone()));
            self.next += 1;
        }
        Ok(())
    }
}

fn theoretical_speed(table: &SpeedTable, component: Component) -> f64 {
    match (table.c_mu_star, component) {
        (Some(c), _) => c,
        (None, Component::U) => table.c_u_star,
        (None, Component::V) => table.c_v_star,
        (None, Component::OneMinusW) => table.c_u_star.max(table.c_v_star),
    }
}

fn simulate(cfg: &ExperimentConfig, sim: &SimulationConfig, out: &mut Outcome) -> Result<(), CliError> {
    let p = &cfg.params;
    let grid = sim.grid.build().map_err(|e| numerical("grid", e))?;
    let s0 = build_initial_state(&sim.initial, &grid, p).map_err(|e| numerical("initial data", e))?;
    let dt = stable_dt(&grid, p, sim.dt_safety);
    let period = sim.sample_period;

    let mut fronts = Vec::new();
    let mut lyap = Vec::new();
    let mut ordering = None;
    let mut plateaus = Vec::new();
    for o in &sim.observers {
        match o {
            ObserverConfig::Front {
                component,
                direction,
                threshold,
            } => {
                let th = threshold.unwrap_or_else(|| component.default_threshold(p));
                fronts.push(FrontObserver::new(*component, th, *direction, period));
            }
            ObserverConfig::Lyapunov { functional, radius } => {
                lyap.push(LyapunovObserver::new(*functional, *radius, period));
            }
            ObserverConfig::Ordering => {
                ordering = Some(
                    OrderingObserver::new(p, period).map_err(|e| CliError::Config(e.to_string()))?,
                );
            }
            ObserverConfig::Plateau { .. } => plateaus.push(o.clone()),
        }
    }
    let mut targets = if cfg.output.write_snapshots {
        sim.snapshots.clone()
    } else {
        Vec::new()
    };
    targets.sort_by(f64::total_cmp);
    targets.dedup();
    let mut snaps = SnapshotObserver {
        period: dt,
        targets,
        next: 0,
        taken: Vec::new(),
    };

    let result = {
        let mut obs: Vec<&mut dyn Observer> = Vec::new();
        obs.extend(fronts.iter_mut().map(|o| o as &mut dyn Observer));
        obs.extend(lyap.iter_mut().map(|o| o as &mut dyn Observer));
        if let Some(o) = ordering.as_mut() {
            obs.push(o);
        }
        if !snaps.targets.is_empty() {
            obs.push(&mut snaps);
        }
        run(s0, p, sim.t_final, dt, &mut obs)
    };
    let state = result.map_err(|e| numerical("simulation", e))?;

    let table = out.facts.speeds.expect("speeds computed before simulating");
    let window = default_window(sim.t_final);
    let mut csv = Table::new(&["t", "component", "direction", "threshold", "x_front"]);
    for f in &fronts {
        let tr = &f.track;
        for s in &tr.samples {
            csv.row(&[
                fmt_f64(s.t),
                tr.component.name().into(),
                tr.direction.name().into(),
                fmt_f64(tr.threshold),
                fmt_opt(s.x),
            ]);
        }
        let theory = theoretical_speed(&table, tr.component);
        let (report, error) = match fit_speed(tr, window, Some(theory)) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        out.facts.fits.push(FitRow {
            component: tr.component,
            direction: tr.direction,
            threshold: tr.threshold,
            report,
            error,
        });
    }
    out.add("fronts.csv", csv.finish());

    let mut csv = Table::new(&[
        "t", "target", "region_lo", "region_hi", "tol", "target_u", "target_v", "target_w",
        "distance", "points", "pass",
    ]);
    for o in &plateaus {
        let ObserverConfig::Plateau {
            target,
            region,
            per_unit_time,
            tol,
        } = o
        else {
            continue;
        };
        let scale = if *per_unit_time { sim.t_final } else { 1.0 };
        let region = (region[0] * scale, region[1] * scale);
        let point = target.resolve(p).map_err(CliError::Config)?;
        let m = plateau_match(&state, point, region, *tol).map_err(|e| numerical("plateau", e))?;
        let row = PlateauRow {
            t: state.t,
            target: target.label(),
            point,
            region,
            tol: *tol,
            distance: m.distance,
            points: m.points,
            pass: m.pass,
        };
        csv.row(&[
            fmt_f64(row.t),
            quote(&row.target),
            fmt_f64(region.0),
            fmt_f64(region.1),
            fmt_f64(row.tol),
            fmt_f64(point[0]),
            fmt_f64(point[1]),
            fmt_f64(point[2]),
            fmt_f64(row.distance),
            row.points.to_string(),
            row.pass.to_string(),
        ]);
        out.facts.plateaus.push(row);
    }
    out.add("plateaus.csv", csv.finish());

    if !lyap.is_empty() {
        let mut csv = Table::new(&["t", "functional", "radius", "energy"]);
        for l in &lyap {
            for s in &l.samples {
                csv.row(&[
                    fmt_f64(s.t),
                    l.functional.name().into(),
                    fmt_f64(l.radius),
                    fmt_opt(s.energy),
                ]);
            }
        }
        out.add("lyapunov.csv", csv.finish());
    }

    if let Some(o) = &ordering {
        let mut csv = Table::new(&["t", "sup_u_minus_kappa_v"]);
        for (t, s) in &o.samples {
            csv.row(&[fmt_f64(*t), fmt_f64(*s)]);
        }
        out.add("ordering.csv", csv.finish());
        out.facts.ordering_max = Some(o.running_max);
    }

    for (t, s) in &snaps.taken {
        out.add(format!("state_t{t}.csv"), state_csv(s));
    }
    Ok(())
}

fn state_csv(s: &FieldState) -> String {
    let mut csv = Table::new(&["x", "u", "v", "w"]);
    for i in 0..s.grid.n {
        csv.row(&[
            fmt_f64(s.grid.x(i)),
            fmt_f64(s.u[i]),
            fmt_f64(s.v[i]),
            fmt_f64(s.w[i]),
        ]);
    }
    csv.finish()
}

#[derive(Serialize)]
struct SystemEigenRecord {
    c: f64,
    delta: f64,
    half_width: f64,
    n: usize,
    eigenvalue: f64,
    limit: f64,
    sweeps: usize,
}

#[derive(Serialize)]
struct ScalarEigenRecord {
    d: f64,
    c: f64,
    a_coef: f64,
    half_width: f64,
    n: usize,
    numeric: f64,
    closed_form: f64,
    sweeps: usize,
}

#[derive(Serialize)]
struct EigenFile {
    system: Option<SystemEigenRecord>,
    scalar: Option<ScalarEigenRecord>,
}

fn eigen(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let e = cfg
        .eigen
        .as_ref()
        .ok_or_else(|| CliError::Config("eigen needs an \"eigen\" block".into()))?;
    if e.system.is_none() && e.scalar.is_none() {
        return Err(CliError::Config("eigen block requests nothing".into()));
    }
    let mut file = EigenFile {
        system: None,
        scalar: None,
    };
    if let Some(s) = &e.system {
        let r = system_dirichlet_eig(&cfg.params, s.c, s.delta, s.half_width, s.n)
            .map_err(|e| numerical("system eigenvalue", e))?;
        let limit = limit_eigenvalue(&cfg.params, s.c, s.delta)
            .map_err(|e| numerical("limit eigenvalue", e))?;
        if cfg.output.write_eigenfunctions {
            let g = Grid1D::new(-s.half_width, s.half_width, s.n).map_err(|e| numerical("eigen grid", e))?;
            let mut csv = Table::new(&["x", "phi", "psi"]);
            for i in 0..s.n {
                csv.row(&[fmt_f64(g.x(i)), fmt_f64(r.phi[i]), fmt_f64(r.psi[i])]);
            }
            out.add("eigenfunction.csv", csv.finish());
        }
        out.facts.eigenvalue = Some(r.eigenvalue);
        file.system = Some(SystemEigenRecord {
            c: s.c,
            delta: s.delta,
            half_width: s.half_width,
            n: s.n,
            eigenvalue: r.eigenvalue,
            limit,
            sweeps: r.sweeps,
        });
    }
    if let Some(s) = &e.scalar {
        let r = scalar_dirichlet_eig(s.d, s.c, s.a_coef, s.half_width, s.n)
            .map_err(|e| numerical("scalar eigenvalue", e))?;
        if cfg.output.write_eigenfunctions {
            let g = Grid1D::new(-s.half_width, s.half_width, s.n).map_err(|e| numerical("eigen grid", e))?;
            let mut csv = Table::new(&["x", "phi"]);
            for i in 0..s.n {
                csv.row(&[fmt_f64(g.x(i)), fmt_f64(r.eigenfunction[i])]);
            }
            out.add("scalar_eigenfunction.csv", csv.finish());
        }
        if out.facts.eigenvalue.is_none() {
            out.facts.eigenvalue = Some(r.numeric);
        }
        file.scalar = Some(ScalarEigenRecord {
            d: s.d,
            c: s.c,
            a_coef: s.a_coef,
            half_width: s.half_width,
            n: s.n,
            numeric: r.numeric,
            closed_form: r.closed_form,
            sweeps: r.sweeps,
        });
    }
    out.add("eigen.json", to_json(&file)?);
    Ok(())
}

#[derive(Serialize)]
struct PullingFile<'a> {
    check: &'a PullingCheck,
    subsolution: Option<SubsolutionRates>,
    subsolution_error: Option<String>,
    scan_holds_d1: Option<Vec<f64>>,
}

fn pulling(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let pc = cfg.pulling.unwrap_or_default();
    let check = out.facts.pulling.expect("speeds computed first");
    // the subsolution algebra is only defined for mu = 0 and c >= the growth threshold
    let (subsolution, subsolution_error) = if cfg.params.mu == 0.0 {
        let c = pc.c.unwrap_or(check.speeds.c_v_2star);
        match subsolution_rates(&cfg.params, c, pc.eps) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, Some("mu > 0".to_string()))
    };
    let scan_holds_d1 = match &pc.scan {
        Some(s) => Some(
            search_pulling_params(&cfg.params, (s.d1_min, s.d1_max), s.steps)
                .map_err(|e| numerical("pulling scan", e))?
                .iter()
                .map(|q| q.d1)
                .collect(),
        ),
        None => None,
    };
    let file = PullingFile {
        check: &check,
        subsolution,
        subsolution_error,
        scan_holds_d1,
    };
    out.add("pulling.json", to_json(&file)?);
    Ok(())
}

fn lyapunov(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let l = cfg
        .lyapunov
        .as_ref()
        .ok_or_else(|| CliError::Config("lyapunov needs a \"lyapunov\" block".into()))?;
    let traj = homogeneous_trajectory(&cfg.params, l.start, l.t_final, l.dt, l.sample_every)
        .map_err(|e| numerical("trajectory", e))?;
    // a uniform state on [-2R, 2R] covers the cutoff support
    let grid = Grid1D::new(-2.0 * l.radius, 2.0 * l.radius, 401).map_err(|e| numerical("grid", e))?;
    let mut csv = Table::new(&["t", "functional", "radius", "energy", "u", "v", "w"]);
    let mut energies = Vec::with_capacity(traj.len());
    for (t, s) in &traj {
        let state = FieldState::uniform(grid, *t, *s);
        let e = match lyapunov_energy(&state, l.functional, l.radius, &cfg.params) {
            Ok(r) => Some(r.energy),
            Err(spreadlab::Error::NotApplicable(_)) => None,
            Err(e) => return Err(numerical("Lyapunov energy", e)),
        };
        energies.push(e);
        csv.row(&[
            fmt_f64(*t),
            l.functional.name().into(),
            fmt_f64(l.radius),
            fmt_opt(e),
            fmt_f64(s[0]),
            fmt_f64(s[1]),
            fmt_f64(s[2]),
        ]);
    }
    // energies pinned at zero (exact equilibrium) count as non-increasing
    let decreasing = energies.windows(2).all(|w| match (w[0], w[1]) {
        (Some(a), Some(b)) => b < a || (a == 0.0 && b == 0.0),
        _ => false,
    });
    out.facts.lyapunov_decreasing = Some(decreasing);
    out.add("lyapunov.csv", csv.finish());
    Ok(())
}

/// Evaluates the config's `expect` block against what the command computed.
pub fn assertions(cfg: &ExperimentConfig, facts: &Facts) -> Vec<AssertCheck> {
    let Some(x) = &cfg.expect else {
        return Vec::new();
    };
    let mut checks = Vec::new();
    let mut push = |name: String, value: Option<String>, pass: Option<bool>| {
        let (pass, detail) = match (pass, value) {
            (Some(p), Some(v)) => (p, v),
            _ => (false, "not computed by this subcommand".to_string()),
        };
        checks.push(AssertCheck { name, pass, detail });
    };

    if let Some(a) = x.c_mu_star {
        let v = facts.speeds.and_then(|s| s.c_mu_star);
        push(
            "c_mu_star".into(),
            v.map(|v| format!("{v} vs {} +- {}", a.value, a.tol)),
            v.map(|v| a.accepts(v)),
        );
    }
    if let Some(h) = x.pulling_holds {
        let v = facts.pulling.map(|p| p.holds);
        push("pulling_holds".into(), v.map(|v| format!("{v}, expected {h}")), v.map(|v| v == h));
    }
    for (name, exp, get) in [
        ("pulling_lhs", x.pulling_lhs, (|p: &PullingCheck| p.lhs) as fn(&PullingCheck) -> Option<f64>),
        ("pulling_rhs", x.pulling_rhs, |p: &PullingCheck| Some(p.rhs)),
    ] {
        if let Some(a) = exp {
            let v = facts.pulling.as_ref().and_then(get);
            push(
                name.into(),
                v.map(|v| format!("{v} vs {} +- {}", a.value, a.tol)),
                v.map(|v| a.accepts(v)),
            );
        }
    }
    for e in &x.fitted_speeds {
        let name = format!("fitted_speed[{}, {}]", e.component.name(), e.direction.name());
        let row = facts
            .fits
            .iter()
            .find(|f| f.component == e.component && f.direction == e.direction);
        let v = row.and_then(|r| r.report.map(|s| s.fitted_speed));
        let detail = match (row, v) {
            (_, Some(v)) => Some(format!("{v} in [{:?}, {:?}]", e.min, e.max)),
            (Some(r), None) => Some(r.error.clone().unwrap_or_default()),
            (None, None) => None,
        };
        let pass = match (row, v) {
            (_, Some(v)) => Some(e.bounds().accepts(v)),
            (Some(_), None) => Some(false),
            (None, None) => None,
        };
        push(name, detail, pass);
    }
    if let Some(want) = x.plateaus_pass {
        let have = (!facts.plateaus.is_empty()).then(|| facts.plateaus.iter().all(|p| p.pass));
        push(
            "plateaus_pass".into(),
            have.map(|h| format!("{h}, expected {want}")),
            have.map(|h| h == want),
        );
    }
    if let Some(limit) = x.ordering_max {
        let v = facts.ordering_max;
        push(
            "ordering_max".into(),
            v.map(|v| format!("{v} <= {limit}")),
            v.map(|v| v <= limit),
        );
    }
    if let Some(b) = x.eigenvalue {
        let v = facts.eigenvalue;
        push(
            "eigenvalue".into(),
            v.map(|v| format!("{v} in [{:?}, {:?}]", b.min, b.max)),
            v.map(|v| b.accepts(v)),
        );
    }
    if let Some(want) = x.lyapunov_decreasing {
        let v = facts.lyapunov_decreasing;
        push(
            "lyapunov_decreasing".into(),
            v.map(|v| format!("{v}, expected {want}")),
            v.map(|v| v == want),
        );
    }
    checks
}
