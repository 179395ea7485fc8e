//! Method-of-lines simulation of the Cauchy problem on a truncated interval.
//!
//! Space: second-order central Laplacian with homogeneous Neumann ends via
//! ghost-point reflection. Time: forward Euler. After every step the state
//! is checked against the invariant box `[0, a-1]^2 x [beta, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{Densities, ModelParams};

/// Allowed excursion outside the invariant box before a run is declared unstable.
pub const BOX_TOL: f64 = 1e-8;

/// Uniform 1-D grid including both end points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::Domain(format!(
                "grid ends must satisfy x_min < x_max (got {x_min}, {x_max})"
            )));
        }
        if n < 3 {
            return Err(Error::Domain(format!("grid needs at least 3 points (n = {n})")));
        }
        Ok(Self { x_min, x_max, n })
    }

    /// Grid whose spacing is `dx` (the point count is rounded to the nearest integer).
    pub fn with_spacing(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::Domain(format!("grid spacing dx = {dx} must be positive")));
        }
        let cells = ((x_max - x_min) / dx).round();
        if !(cells.is_finite() && cells >= 2.0) {
            return Err(Error::Domain(format!(
                "grid [{x_min}, {x_max}] with dx = {dx} has fewer than 3 points"
            )));
        }
        Self::new(x_min, x_max, cells as usize + 1)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.x(i))
    }

    /// Indices of grid points inside `[x0, x1]`.
    pub fn indices_in(&self, x0: f64, x1: f64) -> std::ops::Range<usize> {
        let dx = self.dx();
        let eps = 1e-9 * dx;
        let lo = ((x0 - self.x_min - eps) / dx).ceil().max(0.0) as usize;
        let hi = ((x1 - self.x_min + eps) / dx).floor();
        if hi < 0.0 {
            return 0..0;
        }
        let hi = (hi as usize + 1).min(self.n);
        lo.min(hi)..hi
    }
}

/// Snapshot of the three densities on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub grid: Grid1D,
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl FieldState {
    pub fn uniform(grid: Grid1D, t: f64, point: Densities) -> Self {
        Self {
            grid,
            t,
            u: vec![point[0]; grid.n],
            v: vec![point[1]; grid.n],
            w: vec![point[2]; grid.n],
        }
    }

    pub fn at(&self, i: usize) -> Densities {
        [self.u[i], self.v[i], self.w[i]]
    }

    /// Trapezoid-rule integral of a field over the whole grid.
    pub fn integral(field: &[f64], dx: f64) -> f64 {
        let n = field.len();
        if n < 2 {
            return 0.0;
        }
        let inner: f64 = field[1..n - 1].iter().sum();
        dx * (inner + 0.5 * (field[0] + field[n - 1]))
    }

    /// Checks finiteness and the invariant box `[0, a-1]^2 x [beta, 1]` within `tol`.
    pub fn check_box(&self, params: &ModelParams, tol: f64) -> Result<()> {
        let top = params.a - 1.0;
        let beta = params.beta();
        for (name, field, lo, hi) in [
            ('u', &self.u, 0.0, top),
            ('v', &self.v, 0.0, top),
            ('w', &self.w, beta, 1.0),
        ] {
            for (i, &x) in field.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::BlowUp {
                        t: self.t,
                        field: name,
                        x: self.grid.x(i),
                    });
                }
                let excursion = (lo - x).max(x - hi);
                if excursion > tol {
                    return Err(Error::Stability {
                        t: self.t,
                        field: name,
                        x: self.grid.x(i),
                        excursion,
                    });
                }
            }
        }
        Ok(())
    }
}

/// One component of the initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `height cos^2(pi (x - center) / (2 half_width))` on `|x - center| < half_width`.
    Bump {
        center: f64,
        half_width: f64,
        height: f64,
    },
    Constant {
        value: f64,
    },
    Zero,
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Profile::Bump {
                center,
                half_width,
                height,
            } => {
                let s = (x - center) / half_width;
                if s.abs() < 1.0 {
                    let c = (std::f64::consts::FRAC_PI_2 * s).cos();
                    height * c * c
                } else {
                    0.0
                }
            }
            Profile::Constant { value } => value,
            Profile::Zero => 0.0,
        }
    }
}

/// Initial data for `(u, v, w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub u: Profile,
    pub v: Profile,
    pub w: Profile,
}

fn check_predator_profile(name: &str, profile: &Profile, params: &ModelParams) -> Result<()> {
    let top = params.a - 1.0;
    match *profile {
        Profile::Zero => Ok(()),
        Profile::Constant { .. } => Err(Error::InitialData(format!(
            "{name}0 must be compactly supported; use a bump or zero"
        ))),
        Profile::Bump {
            center,
            half_width,
            height,
        } => {
            if !(center.is_finite() && half_width > 0.0 && half_width.is_finite()) {
                return Err(Error::InitialData(format!(
                    "{name}0 bump needs finite center and positive half-width"
                )));
            }
            if !(height >= 0.0 && height <= top) {
                return Err(Error::InitialData(format!(
                    "{name}0 bump height {height} outside [0, a-1] = [0, {top}]"
                )));
            }
            Ok(())
        }
    }
}

/// Realizes `spec` on `grid`, enforcing the admissibility bounds
/// `0 <= u0, v0 <= a-1` (compactly supported) and `beta <= w0 <= 1`.
pub fn build_initial_state(
    spec: &InitialSpec,
    grid: &Grid1D,
    params: &ModelParams,
) -> Result<FieldState> {
    check_predator_profile("u", &spec.u, params)?;
    check_predator_profile("v", &spec.v, params)?;
    let beta = params.beta();
    match spec.w {
        Profile::Constant { value } if value >= beta && value <= 1.0 => {}
        Profile::Constant { value } => {
            return Err(Error::InitialData(format!(
                "w0 = {value} outside [beta, 1] = [{beta}, 1]"
            )))
        }
        _ => {
            return Err(Error::InitialData(format!(
                "w0 must be a constant in [beta, 1] = [{beta}, 1]"
            )))
        }
    }
    let xs: Vec<f64> = grid.points().collect();
    Ok(FieldState {
        grid: *grid,
        t: 0.0,
        u: xs.iter().map(|&x| spec.u.eval(x)).collect(),
        v: xs.iter().map(|&x| spec.v.eval(x)).collect(),
        w: xs.iter().map(|&x| spec.w.eval(x)).collect(),
    })
}

pub const DEFAULT_SAFETY: f64 = 0.4;

/// Explicit step bound: `safety * min(dx^2 / (2 max d), 1 / (4 max(r) (a+2)))`.
pub fn stable_dt(grid: &Grid1D, params: &ModelParams, safety: f64) -> f64 {
    let p = params;
    let dx = grid.dx();
    let d_max = p.d1.max(p.d2).max(p.d3);
    let diffusion = dx * dx / (2.0 * d_max);
    let slope = p.r1.max(p.r2).max(p.r3) * (p.a + 2.0);
    let reaction = if slope > 0.0 {
        1.0 / (4.0 * slope)
    } else {
        f64::INFINITY
    };
    safety * diffusion.min(reaction)
}

/// Read-only hook sampled during a run.
pub trait Observer {
    /// Sampling period in time units.
    fn period(&self) -> f64;
    fn observe(&mut self, state: &FieldState, params: &ModelParams) -> Result<()>;
}

/// Parameters the simulator accepts: the invariant box must be defined, but
/// zero growth rates are allowed so pure diffusion can be tested.
fn check_sim_params(p: &ModelParams) -> Result<()> {
    let all = [
        p.d1, p.d2, p.d3, p.r1, p.r2, p.r3, p.a, p.b, p.h, p.k, p.mu,
    ];
    if all.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParams("non-finite parameter".into()));
    }
    if !(p.d1 > 0.0 && p.d2 > 0.0 && p.d3 > 0.0) {
        return Err(Error::InvalidParams("diffusivities must be positive".into()));
    }
    if p.r1 < 0.0 || p.r2 < 0.0 || p.r3 < 0.0 || p.mu < 0.0 {
        return Err(Error::InvalidParams(
            "growth and mutation rates must be nonnegative".into(),
        ));
    }
    if !(p.a > 1.0 && p.b >= 0.0 && p.beta() > 0.0) {
        return Err(Error::InvalidParams(
            "need a > 1 and 0 <= b < 1/(2(a-1)) for the invariant box".into(),
        ));
    }
    Ok(())
}

struct Scratch {
    u: Vec<f64>,
    v: Vec<f64>,
    w: Vec<f64>,
}

/// Clamps rounding-level excursions and rejects anything larger.
#[inline]
fn confine(x: f64, lo: f64, hi: f64, field: char, t: f64, pos: impl Fn() -> f64) -> Result<f64> {
    if x >= lo && x <= hi {
        return Ok(x);
    }
    if !x.is_finite() {
        return Err(Error::BlowUp { t, field, x: pos() });
    }
    let excursion = (lo - x).max(x - hi);
    if excursion > BOX_TOL {
        return Err(Error::Stability {
            t,
            field,
            x: pos(),
            excursion,
        });
    }
    Ok(x.clamp(lo, hi))
}

fn step(state: &FieldState, next: &mut Scratch, p: &ModelParams, dt: f64, t_new: f64) -> Result<()> {
    let n = state.grid.n;
    let dx = state.grid.dx();
    let inv_dx2 = 1.0 / (dx * dx);
    let (cu, cv, cw) = (p.d1 * dt * inv_dx2, p.d2 * dt * inv_dx2, p.d3 * dt * inv_dx2);
    let top = p.a - 1.0;
    let beta = p.beta();
    let (u, v, w) = (&state.u, &state.v, &state.w);
    let grid = state.grid;

    for i in 0..n {
        let (l, r) = match i {
            0 => (1, 1),
            _ if i == n - 1 => (n - 2, n - 2),
            _ => (i - 1, i + 1),
        };
        let (ui, vi, wi) = (u[i], v[i], w[i]);
        let lap_u = u[l] - 2.0 * ui + u[r];
        let lap_v = v[l] - 2.0 * vi + v[r];
        let lap_w = w[l] - 2.0 * wi + w[r];
        let f = p.r1 * (-1.0 - ui - p.k * vi + p.a * wi);
        let g = p.r2 * (-1.0 - p.h * ui - vi + p.a * wi);
        let h = p.r3 * (1.0 - p.b * ui - p.b * vi - wi);
        let un = ui + cu * lap_u + dt * (ui * f + p.mu * (vi - ui));
        let vn = vi + cv * lap_v + dt * (vi * g + p.mu * (ui - vi));
        let wn = wi + cw * lap_w + dt * (wi * h);
        let pos = || grid.x(i);
        next.u[i] = confine(un, 0.0, top, 'u', t_new, pos)?;
        next.v[i] = confine(vn, 0.0, top, 'v', t_new, pos)?;
        next.w[i] = confine(wn, beta, 1.0, 'w', t_new, pos)?;
    }
    Ok(())
}

/// Advances `state0` to `t_final` with step `dt`, sampling every observer at
/// the start and then every `period` (rounded to a whole number of steps).
pub fn run(
    state0: FieldState,
    params: &ModelParams,
    t_final: f64,
    dt: f64,
    observers: &mut [&mut dyn Observer],
) -> Result<FieldState> {
    check_sim_params(params)?;
    if !(t_final > state0.t) || !t_final.is_finite() {
        return Err(Error::Domain(format!(
            "final time {t_final} must exceed the initial time {}",
            state0.t
        )));
    }
    let limit = stable_dt(&state0.grid, params, 1.0);
    if !(dt > 0.0 && dt <= limit) {
        return Err(Error::Domain(format!(
            "time step dt = {dt} must lie in (0, {limit}]"
        )));
    }
    let n = state0.grid.n;
    for (name, field) in [('u', &state0.u), ('v', &state0.v), ('w', &state0.w)] {
        if field.len() != n {
            return Err(Error::Domain(format!(
                "field {name} has {} samples for a grid of {n}",
                field.len()
            )));
        }
    }
    state0.check_box(params, BOX_TOL)?;

    let t0 = state0.t;
    let span = t_final - t0;
    let mut steps = (span / dt).round() as usize;
    if (steps as f64 * dt - span).abs() > 1e-9 * span {
        steps = (span / dt).ceil() as usize;
    }
    let strides: Vec<usize> = observers
        .iter()
        .map(|o| ((o.period() / dt).round() as usize).max(1))
        .collect();

    let mut state = state0;
    for o in observers.iter_mut() {
        o.observe(&state, params)?;
    }
    let mut next = Scratch {
        u: vec![0.0; n],
        v: vec![0.0; n],
        w: vec![0.0; n],
    };
    for k in 1..=steps {
        let t_new = if k == steps {
            t_final
        } else {
            t0 + k as f64 * dt
        };
        let h = t_new - state.t;
        step(&state, &mut next, params, h, t_new)?;
        std::mem::swap(&mut state.u, &mut next.u);
        std::mem::swap(&mut state.v, &mut next.v);
        std::mem::swap(&mut state.w, &mut next.w);
        state.t = t_new;
        for (o, &stride) in observers.iter_mut().zip(&strides) {
            if k % stride == 0 {
                o.observe(&state, params)?;
            }
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::coexistence_state;

    fn grid() -> Grid1D {
        Grid1D::with_spacing(-50.0, 50.0, 0.1).unwrap()
    }

    fn bumps(hu: f64, hv: f64) -> InitialSpec {
        InitialSpec {
            u: Profile::Bump {
                center: 0.0,
                half_width: 5.0,
                height: hu,
            },
            v: Profile::Bump {
                center: 0.0,
                half_width: 5.0,
                height: hv,
            },
            w: Profile::Constant { value: 1.0 },
        }
    }

    struct BoxProbe {
        samples: usize,
    }

    impl Observer for BoxProbe {
        fn period(&self) -> f64 {
            0.5
        }
        fn observe(&mut self, state: &FieldState, params: &ModelParams) -> Result<()> {
            self.samples += 1;
            state.check_box(params, BOX_TOL)
        }
    }

    #[test]
    fn grid_spacing() {
        let g = Grid1D::with_spacing(-400.0, 400.0, 0.1).unwrap();
        assert_eq!(g.n, 8001);
        assert!((g.dx() - 0.1).abs() < 1e-12);
        assert!(Grid1D::new(0.0, 1.0, 2).is_err());
        assert!(Grid1D::new(1.0, 0.0, 10).is_err());
        assert_eq!(g.indices_in(-0.05, 0.25), 4000..4003);
        assert_eq!(g.indices_in(500.0, 600.0).len(), 0);
    }

    #[test]
    fn bump_construction() {
        let g = Grid1D::with_spacing(-400.0, 400.0, 0.1).unwrap();
        let spec = InitialSpec {
            u: Profile::Bump {
                center: 0.0,
                half_width: 5.0,
                height: 0.5,
            },
            v: Profile::Zero,
            w: Profile::Constant { value: 1.0 },
        };
        let s = build_initial_state(&spec, &g, &ModelParams::default()).unwrap();
        let max = s.u.iter().cloned().fold(0.0, f64::max);
        assert!((max - 0.5).abs() < 1e-15);
        for (i, &x) in s.u.iter().enumerate() {
            if x > 0.0 {
                assert!(g.x(i).abs() < 5.0);
            }
        }
        assert!(s.w.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn admissibility_errors() {
        let g = grid();
        let p = ModelParams::default();
        let mut spec = bumps(0.5, 0.5);
        spec.w = Profile::Constant { value: 0.3 };
        assert!(matches!(
            build_initial_state(&spec, &g, &p),
            Err(Error::InitialData(_))
        ));
        let spec = bumps(1.5, 0.5);
        assert!(build_initial_state(&spec, &g, &p).is_err());
        let mut spec = bumps(0.5, 0.5);
        spec.u = Profile::Constant { value: 0.1 };
        assert!(build_initial_state(&spec, &g, &p).is_err());
    }

    #[test]
    fn stable_dt_examples() {
        let p = ModelParams::default();
        let g = Grid1D::with_spacing(0.0, 10.0, 0.1).unwrap();
        assert!((stable_dt(&g, &p, 0.4) - 0.002).abs() < 1e-15);
        let fine = Grid1D::with_spacing(0.0, 10.0, 0.05).unwrap();
        assert!((stable_dt(&fine, &p, 0.4) - 0.0005).abs() < 1e-15);
        assert!((stable_dt(&g, &p, 1.0) - 0.005).abs() < 1e-15);
    }

    #[test]
    fn predator_free_state_is_preserved() {
        let p = ModelParams::default().with_mu(0.2);
        let s0 = FieldState::uniform(grid(), 0.0, [0.0, 0.0, 1.0]);
        let s = run(s0.clone(), &p, 3.0, 0.002, &mut []).unwrap();
        assert_eq!(s.u, s0.u);
        assert_eq!(s.v, s0.v);
        assert_eq!(s.w, s0.w);
    }

    #[test]
    fn coexistence_is_a_discrete_fixed_point() {
        let p = ModelParams::default();
        let star = coexistence_state(&p);
        let g = Grid1D::with_spacing(-10.0, 10.0, 0.1).unwrap();
        let s = run(FieldState::uniform(g, 0.0, star), &p, 10.0, 0.002, &mut []).unwrap();
        let dist = (0..g.n)
            .flat_map(|i| {
                let at = s.at(i);
                (0..3).map(move |k| (at[k] - star[k]).abs())
            })
            .fold(0.0, f64::max);
        assert!(dist < 1e-8, "{dist}");
    }

    #[test]
    fn box_holds_along_bump_run() {
        let p = ModelParams::default();
        let s0 = build_initial_state(&bumps(0.5, 0.5), &grid(), &p).unwrap();
        let mut probe = BoxProbe { samples: 0 };
        let s = run(s0, &p, 10.0, 0.002, &mut [&mut probe]).unwrap();
        assert_eq!(probe.samples, 21);
        assert!(s.w.iter().all(|&w| w >= p.beta() && w <= 1.0));
    }

    #[test]
    fn neumann_mass_is_conserved_without_reaction() {
        let p = ModelParams {
            r1: 0.0,
            r2: 0.0,
            r3: 0.0,
            mu: 0.0,
            ..ModelParams::default()
        };
        let g = Grid1D::with_spacing(-10.0, 10.0, 0.1).unwrap();
        // support reaches the boundary so the Neumann ends are exercised
        let spec = InitialSpec {
            u: Profile::Bump {
                center: 8.0,
                half_width: 4.0,
                height: 0.7,
            },
            v: Profile::Bump {
                center: -9.0,
                half_width: 3.0,
                height: 0.4,
            },
            w: Profile::Constant { value: 0.9 },
        };
        let s0 = build_initial_state(&spec, &g, &p).unwrap();
        let t_final = 5.0;
        let s = run(s0.clone(), &p, t_final, 0.002, &mut []).unwrap();
        for (a, b) in [(&s0.u, &s.u), (&s0.v, &s.v), (&s0.w, &s.w)] {
            let drift = (FieldState::integral(a, g.dx()) - FieldState::integral(b, g.dx())).abs();
            assert!(drift / t_final < 1e-10, "{drift}");
        }
    }

    #[test]
    fn oversized_step_is_rejected() {
        let p = ModelParams::default();
        let s0 = FieldState::uniform(grid(), 0.0, [0.0, 0.0, 1.0]);
        assert!(matches!(
            run(s0.clone(), &p, 1.0, 0.01, &mut []),
            Err(Error::Domain(_))
        ));
        assert!(run(s0, &p, 0.0, 0.001, &mut []).is_err());
    }

    #[test]
    fn box_violation_in_initial_state_is_reported() {
        let p = ModelParams::default();
        let mut s0 = FieldState::uniform(grid(), 0.0, [0.0, 0.0, 1.0]);
        s0.u[10] = 1.5;
        assert!(matches!(
            run(s0.clone(), &p, 1.0, 0.001, &mut []),
            Err(Error::Stability { field: 'u', .. })
        ));
        s0.u[10] = f64::NAN;
        assert!(matches!(
            run(s0, &p, 1.0, 0.001, &mut []),
            Err(Error::BlowUp { field: 'u', .. })
        ));
    }

    #[test]
    fn confine_clamps_rounding_only() {
        assert_eq!(confine(-1e-12, 0.0, 1.0, 'u', 0.0, || 0.0).unwrap(), 0.0);
        assert_eq!(confine(1.0 + 1e-10, 0.0, 1.0, 'u', 0.0, || 0.0).unwrap(), 1.0);
        assert!(confine(-1e-6, 0.0, 1.0, 'u', 0.0, || 0.0).is_err());
    }
}
