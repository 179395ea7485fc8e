//! Front tracking, speed regression, plateau matching and the `u - kappa v`
//! ordering probe.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{Densities, ModelParams};
use crate::pde_sim::{FieldState, Observer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    U,
    V,
    OneMinusW,
}

impl Component {
    pub fn name(&self) -> &'static str {
        match self {
            Component::U => "u",
            Component::V => "v",
            Component::OneMinusW => "one_minus_w",
        }
    }

    pub fn value(&self, state: &FieldState, i: usize) -> f64 {
        match self {
            Component::U => state.u[i],
            Component::V => state.v[i],
            Component::OneMinusW => 1.0 - state.w[i],
        }
    }

    /// Natural scale of the component: `a - 1` for predators, `1 - beta` for `1 - w`.
    pub fn scale(&self, params: &ModelParams) -> f64 {
        match self {
            Component::U | Component::V => params.a - 1.0,
            Component::OneMinusW => 1.0 - params.beta(),
        }
    }

    /// One percent of the component scale.
    pub fn default_threshold(&self, params: &ModelParams) -> f64 {
        0.01 * self.scale(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Right,
    Left,
}

impl Direction {
    pub fn name(&self) -> &'static str {
        match self {
            Direction::Right => "right",
            Direction::Left => "left",
        }
    }

    fn sign(&self) -> f64 {
        match self {
            Direction::Right => 1.0,
            Direction::Left => -1.0,
        }
    }
}

/// Outermost crossing of `threshold` by `component`, linearly interpolated
/// between the bracketing grid points. `None` when the component never
/// reaches the threshold.
pub fn front_position(
    state: &FieldState,
    component: Component,
    threshold: f64,
    direction: Direction,
) -> Option<f64> {
    let n = state.grid.n;
    let val = |i: usize| component.value(state, i);
    let dx = state.grid.dx();
    match direction {
        Direction::Right => {
            let i = (0..n).rev().find(|&i| val(i) >= threshold)?;
            if i == n - 1 {
                return Some(state.grid.x(i));
            }
            let (a, b) = (val(i), val(i + 1));
            Some(state.grid.x(i) + (a - threshold) / (a - b) * dx)
        }
        Direction::Left => {
            let i = (0..n).find(|&i| val(i) >= threshold)?;
            if i == 0 {
                return Some(state.grid.x(0));
            }
            let (a, b) = (val(i), val(i - 1));
            Some(state.grid.x(i) - (a - threshold) / (a - b) * dx)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontSample {
    pub t: f64,
    pub x: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontTrack {
    pub component: Component,
    pub threshold: f64,
    pub direction: Direction,
    pub samples: Vec<FrontSample>,
}

impl FrontTrack {
    pub fn new(component: Component, threshold: f64, direction: Direction) -> Self {
        Self {
            component,
            threshold,
            direction,
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, x: Option<f64>) {
        debug_assert!(self.samples.last().is_none_or(|s| s.t < t));
        self.samples.push(FrontSample { t, x });
    }
}

/// Records a [`FrontTrack`] during a run and aborts the run when the front
/// comes within `guard_cells` grid cells of the domain boundary.
#[derive(Debug, Clone)]
pub struct FrontObserver {
    pub track: FrontTrack,
    pub period: f64,
    pub guard_cells: f64,
}

impl FrontObserver {
    pub const DEFAULT_GUARD_CELLS: f64 = 10.0;

    pub fn new(component: Component, threshold: f64, direction: Direction, period: f64) -> Self {
        Self {
            track: FrontTrack::new(component, threshold, direction),
            period,
            guard_cells: Self::DEFAULT_GUARD_CELLS,
        }
    }
}

impl Observer for FrontObserver {
    fn period(&self) -> f64 {
        self.period
    }

    fn observe(&mut self, state: &FieldState, _params: &ModelParams) -> Result<()> {
        let tr = &self.track;
        let x = front_position(state, tr.component, tr.threshold, tr.direction);
        if let Some(x) = x {
            let guard = self.guard_cells * state.grid.dx();
            if x > state.grid.x_max - guard || x < state.grid.x_min + guard {
                return Err(Error::Truncation {
                    t: state.t,
                    x,
                    guard,
                });
            }
        }
        self.track.push(state.t, x);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedReport {
    /// Slope of the front position, signed so that outward motion is positive.
    pub fitted_speed: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub samples: usize,
    pub window: (f64, f64),
    pub theoretical: Option<f64>,
    pub relative_error: Option<f64>,
}

/// Late-time regression window `[0.6 T, T]`.
pub fn default_window(t_final: f64) -> (f64, f64) {
    (0.6 * t_final, t_final)
}

pub const MIN_FIT_SAMPLES: usize = 10;

/// Least-squares slope of front position against time over `window`.
pub fn fit_speed(
    track: &FrontTrack,
    window: (f64, f64),
    theoretical: Option<f64>,
) -> Result<SpeedReport> {
    let (t0, t1) = window;
    let eps = 1e-9 * t1.abs().max(1.0);
    let mut pts = Vec::new();
    for s in track
        .samples
        .iter()
        .filter(|s| s.t >= t0 - eps && s.t <= t1 + eps)
    {
        match s.x {
            Some(x) => pts.push((s.t, x)),
            None => {
                return Err(Error::InsufficientData(format!(
                    "front of {} absent at t = {} inside the fit window",
                    track.component.name(),
                    s.t
                )))
            }
        }
    }
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples in window [{t0}, {t1}], need at least {MIN_FIT_SAMPLES}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let t_mean = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let x_mean = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - t_mean).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - t_mean) * (p.1 - x_mean)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - x_mean).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData(
            "all samples share one time stamp".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = x_mean - slope * t_mean;
    let ssr: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ssr / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    let fitted_speed = track.direction.sign() * slope;
    Ok(SpeedReport {
        fitted_speed,
        stderr,
        r_squared,
        samples: pts.len(),
        window,
        theoretical,
        relative_error: theoretical.map(|c| (fitted_speed - c) / c),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlateauMatch {
    pub pass: bool,
    /// Sup over the region of the max-norm distance to the target.
    pub distance: f64,
    pub points: usize,
}

pub fn plateau_match(
    state: &FieldState,
    target: Densities,
    region: (f64, f64),
    tol: f64,
) -> Result<PlateauMatch> {
    let g = &state.grid;
    let (x0, x1) = region;
    let slack = 1e-9 * g.dx();
    if !(x0 <= x1) || x0 < g.x_min - slack || x1 > g.x_max + slack {
        return Err(Error::Domain(format!(
            "region [{x0}, {x1}] is not inside the grid [{}, {}]",
            g.x_min, g.x_max
        )));
    }
    let idx = g.indices_in(x0, x1);
    if idx.is_empty() {
        return Err(Error::Domain(format!(
            "region [{x0}, {x1}] contains no grid points"
        )));
    }
    let points = idx.len();
    let distance = idx
        .map(|i| {
            let s = state.at(i);
            (0..3).map(|k| (s[k] - target[k]).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    Ok(PlateauMatch {
        pass: distance <= tol,
        distance,
        points,
    })
}

/// Minimum of a component over the grid points in `region`.
pub fn region_min(state: &FieldState, component: Component, region: (f64, f64)) -> Option<f64> {
    state
        .grid
        .indices_in(region.0, region.1)
        .map(|i| component.value(state, i))
        .reduce(f64::min)
}

/// Tracks `max_t sup_x (u - kappa v)` for the equal-motility case, where
/// `u0 <= kappa v0` is preserved by the flow.
#[derive(Debug, Clone)]
pub struct OrderingObserver {
    pub kappa: f64,
    pub period: f64,
    pub running_max: f64,
    pub samples: Vec<(f64, f64)>,
}

impl OrderingObserver {
    pub fn new(params: &ModelParams, period: f64) -> Result<Self> {
        if params.d1 != params.d2 || params.r1 != params.r2 {
            return Err(Error::NotApplicable(format!(
                "ordering check needs d1 = d2 and r1 = r2 (d = {}, {}; r = {}, {})",
                params.d1, params.d2, params.r1, params.r2
            )));
        }
        if params.mu != 0.0 {
            return Err(Error::NotApplicable(
                "ordering check applies to the mu = 0 system".into(),
            ));
        }
        Ok(Self {
            kappa: params.kappa(),
            period,
            running_max: f64::NEG_INFINITY,
            samples: Vec::new(),
        })
    }

    pub fn sup_excess(&self, state: &FieldState) -> f64 {
        state
            .u
            .iter()
            .zip(&state.v)
            .map(|(u, v)| u - self.kappa * v)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Observer for OrderingObserver {
    fn period(&self) -> f64 {
        self.period
    }

    fn observe(&mut self, state: &FieldState, _params: &ModelParams) -> Result<()> {
        let s = self.sup_excess(state);
        if self.samples.is_empty() && s > 1e-12 {
            return Err(Error::InitialData(format!(
                "ordering check needs u0 <= kappa v0, but sup(u0 - kappa v0) = {s}"
            )));
        }
        self.running_max = self.running_max.max(s);
        self.samples.push((state.t, s));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde_sim::{build_initial_state, run, Grid1D, InitialSpec, Profile};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid1D {
        Grid1D::with_spacing(-10.0, 10.0, 0.1).unwrap()
    }

    fn state_with_u(u: impl Fn(f64) -> f64) -> FieldState {
        let g = grid();
        let mut s = FieldState::uniform(g, 0.0, [0.0, 0.0, 1.0]);
        for i in 0..g.n {
            s.u[i] = u(g.x(i));
        }
        s
    }

    #[test]
    fn step_front_interpolates_half_cell() {
        let s = state_with_u(|x| if x <= 1e-12 { 0.5 } else { 0.0 });
        let x = front_position(&s, Component::U, 0.25, Direction::Right).unwrap();
        assert!((x - 0.05).abs() < 1e-12);
        let l = front_position(&s, Component::U, 0.25, Direction::Left).unwrap();
        assert!((l + 10.0).abs() < 1e-12);
    }

    #[test]
    fn absent_fronts() {
        let s = state_with_u(|_| 0.0);
        assert!(front_position(&s, Component::U, 0.01, Direction::Right).is_none());
        assert!(front_position(&s, Component::OneMinusW, 0.004, Direction::Right).is_none());
    }

    fn linear_track(speed: f64, noise: impl Fn(usize) -> f64) -> FrontTrack {
        let mut tr = FrontTrack::new(Component::U, 0.01, Direction::Right);
        for i in 0..100 {
            let t = i as f64;
            tr.push(t, Some(speed * t + noise(i)));
        }
        tr
    }

    #[test]
    fn exact_linear_track() {
        let tr = linear_track(2.0, |_| 0.0);
        let r = fit_speed(&tr, (0.0, 99.0), Some(2.0)).unwrap();
        assert!((r.fitted_speed - 2.0).abs() < 1e-12);
        assert!((r.r_squared - 1.0).abs() < 1e-12);
        assert!(r.relative_error.unwrap().abs() < 1e-12);
    }

    #[test]
    fn noisy_linear_track() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise: Vec<f64> = (0..100).map(|_| rng.gen_range(-0.05..0.05)).collect();
        let tr = linear_track(2.0, |i| noise[i]);
        let r = fit_speed(&tr, (0.0, 99.0), None).unwrap();
        assert!((r.fitted_speed - 2.0).abs() < 0.01);
        assert!(r.r_squared > 0.99 && r.r_squared <= 1.0);
    }

    #[test]
    fn left_track_reports_outward_speed() {
        let mut tr = FrontTrack::new(Component::V, 0.01, Direction::Left);
        for i in 0..20 {
            tr.push(i as f64, Some(-1.5 * i as f64));
        }
        let r = fit_speed(&tr, (0.0, 19.0), None).unwrap();
        assert!((r.fitted_speed - 1.5).abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        let mut tr = linear_track(2.0, |_| 0.0);
        tr.samples[50].x = None;
        assert!(matches!(
            fit_speed(&tr, (0.0, 99.0), None),
            Err(Error::InsufficientData(_))
        ));
        let tr = linear_track(2.0, |_| 0.0);
        assert!(fit_speed(&tr, (90.5, 99.0), None).is_err());
    }

    #[test]
    fn plateau_examples() {
        let target = [0.4, 0.3, 0.8];
        let g = grid();
        let mut s = FieldState::uniform(g, 0.0, target);
        let m = plateau_match(&s, target, (-5.0, 5.0), 1e-12).unwrap();
        assert!(m.pass && m.distance == 0.0);
        assert_eq!(m.points, 101);

        for x in s.u.iter_mut() {
            *x += 0.03;
        }
        let m = plateau_match(&s, target, (-5.0, 5.0), 0.05).unwrap();
        assert!(m.pass);
        assert!((m.distance - 0.03).abs() < 1e-12);

        assert!(plateau_match(&s, target, (20.0, 30.0), 0.05).is_err());
        assert!(plateau_match(&s, target, (3.0, 2.0), 0.05).is_err());
        assert!(plateau_match(&s, target, (0.01, 0.02), 0.05).is_err());
    }

    #[test]
    fn ordering_preconditions() {
        let p = ModelParams {
            d2: 0.5,
            ..ModelParams::default()
        };
        assert!(OrderingObserver::new(&p, 1.0).is_err());
        let p = ModelParams {
            h: 0.5,
            k: 0.25,
            ..ModelParams::default()
        };
        assert!((OrderingObserver::new(&p, 1.0).unwrap().kappa - 1.5).abs() < 1e-15);
    }

    #[test]
    fn exact_proportional_data_stays_on_the_diagonal() {
        let p = ModelParams::default();
        let bump = |h| Profile::Bump {
            center: 0.0,
            half_width: 5.0,
            height: h,
        };
        let spec = InitialSpec {
            u: bump(0.4),
            v: bump(0.4),
            w: Profile::Constant { value: 1.0 },
        };
        let g = Grid1D::with_spacing(-60.0, 60.0, 0.1).unwrap();
        let s0 = build_initial_state(&spec, &g, &p).unwrap();
        let mut ord = OrderingObserver::new(&p, 1.0).unwrap();
        let s = run(s0, &p, 20.0, 0.002, &mut [&mut ord]).unwrap();
        let sup_abs = s
            .u
            .iter()
            .zip(&s.v)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max);
        assert!(sup_abs <= 1e-8);
        assert!(ord.running_max <= 1e-8);
    }

    #[test]
    fn ordering_rejects_violating_initial_data() {
        let p = ModelParams::default();
        let s = state_with_u(|x| if x.abs() < 1.0 { 0.2 } else { 0.0 });
        let mut ord = OrderingObserver::new(&p, 1.0).unwrap();
        assert!(matches!(
            ord.observe(&s, &p),
            Err(Error::InitialData(_))
        ));
    }

    #[test]
    fn truncation_guard_trips_near_boundary() {
        let s = state_with_u(|x| if x <= 9.5 { 0.5 } else { 0.0 });
        let mut obs = FrontObserver::new(Component::U, 0.25, Direction::Right, 1.0);
        assert!(matches!(
            obs.observe(&s, &ModelParams::default()),
            Err(Error::Truncation { .. })
        ));
    }
}
