//! Lyapunov energies and the nonlocal-pulling algebra.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{coexistence_state, kinetic_field, semi_trivial_levels, Densities, ModelParams};
use crate::linear_speeds::{closed_form_speeds, SpeedTable};
use crate::pde_sim::{FieldState, Observer};

/// `g(x) = x - ln x - 1`, evaluated without cancellation near `x = 1`.
pub fn g_fn(x: f64) -> f64 {
    let e = x - 1.0;
    e - e.ln_1p()
}

/// C^1 cutoff: 1 on `|s| <= 1`, 0 on `|s| >= 2`, cubic smoothstep between.
pub fn cutoff(s: f64) -> f64 {
    let s = s.abs();
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        let z = s - 1.0;
        1.0 - 3.0 * z * z + 2.0 * z * z * z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    /// `V(u, w)` around `(p~, 0, q~)`; requires `v = 0`.
    V,
    /// `Phi(u, v, w)` around the coexistence state.
    Phi,
}

impl Functional {
    pub fn name(&self) -> &'static str {
        match self {
            Functional::V => "V",
            Functional::Phi => "Phi",
        }
    }
}

/// `V(u, w) = b r3 p~ g(u/p~) + a r1 q~ g(w/q~)`.
///
/// The weights cancel the cross terms of the Lie derivative along the
/// `(u, w)` kinetics, which equals `-b r1 r3 (u-p~)^2 - a r1 r3 (w-q~)^2`.
pub fn v_density(params: &ModelParams, u: f64, w: f64) -> f64 {
    let p = params;
    let (pt, qt) = semi_trivial_levels(p);
    p.b * p.r3 * pt * g_fn(u / pt) + p.a * p.r1 * qt * g_fn(w / qt)
}

/// `Phi(u,v,w) = u* g(u/u*) + (r1/r2) v* g(v/v*) + (r1 a)/(r3 b) w* g(w/w*)`.
pub fn phi_density(params: &ModelParams, point: Densities) -> f64 {
    let p = params;
    let [us, vs, ws] = coexistence_state(p);
    let [u, v, w] = point;
    us * g_fn(u / us) + p.r1 / p.r2 * vs * g_fn(v / vs) + p.r1 * p.a / (p.r3 * p.b) * ws * g_fn(w / ws)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovRecord {
    pub t: f64,
    pub energy: f64,
    pub radius: f64,
    pub functional: Functional,
}

/// Lower bound on densities inside the cutoff window; `g` is singular at 0.
pub const MIN_DENSITY: f64 = 1e-6;

/// `E_R = integral of cutoff(x/R) * density(u, v, w) dx` by the trapezoid rule.
pub fn lyapunov_energy(
    state: &FieldState,
    functional: Functional,
    radius: f64,
    params: &ModelParams,
) -> Result<LyapunovRecord> {
    if params.mu != 0.0 {
        return Err(Error::NotApplicable(
            "Lyapunov functionals are defined for mu = 0".into(),
        ));
    }
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("cutoff radius R = {radius} must be positive")));
    }
    params.ensure_valid()?;
    let g = &state.grid;
    let dx = g.dx();
    let mut energy = 0.0;
    for i in 0..g.n {
        let x = g.x(i);
        let weight = cutoff(x / radius);
        if weight == 0.0 {
            continue;
        }
        let [u, v, w] = state.at(i);
        let density = match functional {
            Functional::V => {
                if v != 0.0 {
                    return Err(Error::NotApplicable(format!(
                        "V needs v = 0 on the window, found v = {v} at x = {x}"
                    )));
                }
                if u < MIN_DENSITY || w < MIN_DENSITY {
                    return Err(Error::NotApplicable(format!(
                        "density below {MIN_DENSITY} at x = {x}"
                    )));
                }
                v_density(params, u, w)
            }
            Functional::Phi => {
                if u < MIN_DENSITY || v < MIN_DENSITY || w < MIN_DENSITY {
                    return Err(Error::NotApplicable(format!(
                        "density below {MIN_DENSITY} at x = {x}"
                    )));
                }
                phi_density(params, [u, v, w])
            }
        };
        let end = i == 0 || i == g.n - 1;
        energy += if end { 0.5 } else { 1.0 } * weight * density;
    }
    Ok(LyapunovRecord {
        t: state.t,
        energy: energy * dx,
        radius,
        functional,
    })
}

/// `E_R` sample taken during a run; `energy` is `None` while the cutoff
/// window still contains densities below [`MIN_DENSITY`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovSample {
    pub t: f64,
    pub energy: Option<f64>,
}

/// Samples `E_R` along a simulation.
#[derive(Debug, Clone)]
pub struct LyapunovObserver {
    pub functional: Functional,
    pub radius: f64,
    pub period: f64,
    pub samples: Vec<LyapunovSample>,
}

impl LyapunovObserver {
    pub fn new(functional: Functional, radius: f64, period: f64) -> Self {
        Self {
            functional,
            radius,
            period,
            samples: Vec::new(),
        }
    }
}

impl Observer for LyapunovObserver {
    fn period(&self) -> f64 {
        self.period
    }

    fn observe(&mut self, state: &FieldState, params: &ModelParams) -> Result<()> {
        let energy = match lyapunov_energy(state, self.functional, self.radius, params) {
            Ok(r) => Some(r.energy),
            Err(Error::NotApplicable(_)) => None,
            Err(e) => return Err(e),
        };
        self.samples.push(LyapunovSample { t: state.t, energy });
        Ok(())
    }
}

/// Classical RK4 integration of the kinetic ODE; returns `(t, state)` every `sample_every` steps.
pub fn homogeneous_trajectory(
    params: &ModelParams,
    start: Densities,
    t_final: f64,
    dt: f64,
    sample_every: usize,
) -> Result<Vec<(f64, Densities)>> {
    if !(dt > 0.0 && t_final > 0.0) || sample_every == 0 {
        return Err(Error::Domain("need dt > 0, t_final > 0 and a positive stride".into()));
    }
    let f = |s: Densities| kinetic_field(params, s[0], s[1], s[2]);
    let add = |s: Densities, k: Densities, h: f64| [s[0] + h * k[0], s[1] + h * k[1], s[2] + h * k[2]];
    let steps = (t_final / dt).round() as usize;
    let mut s = start;
    let mut out = vec![(0.0, s)];
    for n in 1..=steps {
        let k1 = f(s);
        let k2 = f(add(s, k1, dt / 2.0));
        let k3 = f(add(s, k2, dt / 2.0));
        let k4 = f(add(s, k3, dt));
        for j in 0..3 {
            s[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if s.iter().any(|x| !x.is_finite()) {
            return Err(Error::BlowUp {
                t: n as f64 * dt,
                field: '?',
                x: 0.0,
            });
        }
        if n % sample_every == 0 {
            out.push((n as f64 * dt, s));
        }
    }
    Ok(out)
}

/// Growth rate of `v` behind the faster predator's front: `a beta - 1 - h(a-1)`,
/// which equals `(a-1)(1 - 2ab - h)`.
pub fn pulling_growth(params: &ModelParams) -> f64 {
    let p = params;
    p.a * p.beta() - 1.0 - p.h * (p.a - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PullingCheck {
    /// `1 - 2ab - h > 0`
    pub cond_sign: bool,
    /// `c_v** - sqrt(c_v**^2 - 4 d2 r2 (a beta - 1 - h(a-1)))`; `None` if the root is imaginary.
    pub lhs: Option<f64>,
    /// `(c_u*^2 - c_v*^2) / (2 (c_u* - c_v**))`
    pub rhs: f64,
    pub holds: bool,
    pub speeds: SpeedTable,
}

pub fn pulling_conditions(params: &ModelParams) -> Result<PullingCheck> {
    let speeds = closed_form_speeds(params)?;
    let p = params;
    let cond_sign = 1.0 - 2.0 * p.a * p.b - p.h > 0.0;
    let cvv = speeds.c_v_2star;
    let disc = cvv * cvv - 4.0 * p.d2 * p.r2 * pulling_growth(p);
    let lhs = (disc >= 0.0).then(|| cvv - disc.sqrt());
    let (cu, cv) = (speeds.c_u_star, speeds.c_v_star);
    let rhs = (cu * cu - cv * cv) / (2.0 * (cu - cvv));
    let holds = cond_sign && p.mu == 0.0 && cv < cu && lhs.is_some_and(|l| l > rhs);
    Ok(PullingCheck {
        cond_sign,
        lhs,
        rhs,
        holds,
        speeds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubsolutionRates {
    pub eps: f64,
    pub c: f64,
    /// `c_u* + eps`
    pub c_eps: f64,
    pub nu: f64,
    /// Exponential decay rate of the compactly supported ansatz in the frame moving at `c_eps`.
    pub r_decay: f64,
    /// Smaller root of `d2 l^2 - c l + r2 (a beta - 1 - h(a-1) - eps) = 0`.
    pub lambda: f64,
    /// Admissible increment keeping `lambda + eta` strictly between the two roots.
    pub eta: f64,
    pub omega: f64,
    /// `lambda (c_eps - c) - r_decay`; positive iff the two ansatzes can be glued.
    pub glue_margin: f64,
}

pub fn subsolution_rates(params: &ModelParams, c: f64, eps: f64) -> Result<SubsolutionRates> {
    if params.mu != 0.0 {
        return Err(Error::NotApplicable(
            "subsolution construction is for mu = 0".into(),
        ));
    }
    if !(eps >= 0.0) {
        return Err(Error::Domain(format!("eps = {eps} must be >= 0")));
    }
    let speeds = closed_form_speeds(params)?;
    let p = params;
    let growth = pulling_growth(p) - eps;
    let disc = c * c - 4.0 * p.d2 * p.r2 * growth;
    if disc < 0.0 {
        return Err(Error::Domain(format!(
            "c = {c} below 2 sqrt(d2 r2 (a beta - 1 - h(a-1) - eps)); lambda is complex"
        )));
    }
    let c_eps = speeds.c_u_star + eps;
    if c > c_eps {
        return Err(Error::Domain(format!("c = {c} exceeds c_u* + eps = {c_eps}")));
    }
    let root = disc.sqrt();
    let lambda = (c - root) / (2.0 * p.d2);
    let r_decay = c_eps * c_eps / (4.0 * p.d2) + p.d2 * eps * eps - p.r2 * (p.a - 1.0 - 3.0 * eps);
    Ok(SubsolutionRates {
        eps,
        c,
        c_eps,
        nu: c_eps / (2.0 * p.d2),
        r_decay,
        lambda,
        eta: root / (2.0 * p.d2),
        omega: eps,
        glue_margin: lambda * (c_eps - c) - r_decay,
    })
}

/// Scans `d1` over `steps` equally spaced points of `(d1_lo, d1_hi]` (restricted to
/// `d1 > d2 r2 / r1`) and keeps the members for which the pulling condition holds.
pub fn search_pulling_params(
    base: &ModelParams,
    d1_range: (f64, f64),
    steps: usize,
) -> Result<Vec<ModelParams>> {
    let (lo, hi) = d1_range;
    if steps == 0 || !(hi > lo) {
        return Err(Error::Domain(format!(
            "empty scan range ({lo}, {hi}] with {steps} steps"
        )));
    }
    if base.mu != 0.0 {
        return Err(Error::NotApplicable("pulling search needs mu = 0".into()));
    }
    let threshold = base.d2 * base.r2 / base.r1;
    if hi <= threshold {
        return Err(Error::Domain(format!(
            "scan range ({lo}, {hi}] lies below d2 r2 / r1 = {threshold}; u would not be faster"
        )));
    }
    let mut out = Vec::new();
    for i in 1..=steps {
        let d1 = lo + (hi - lo) * i as f64 / steps as f64;
        if d1 <= threshold {
            continue;
        }
        let p = ModelParams { d1, ..*base };
        if pulling_conditions(&p)?.holds {
            out.push(p);
        }
    }
    Ok(out)
}
