//! Model parameters, reaction terms and constant equilibria of the
//! two-predator/one-prey system
//!
//! ```text
//! u_t = d1 u_xx + u F(u,v,w) + mu (v - u)
//! v_t = d2 v_xx + v G(u,v,w) + mu (u - v)
//! w_t = d3 w_xx + w H(u,v,w)
//! ```
//!
//! with `F = r1(-1 - u - k v + a w)`, `G = r2(-1 - h u - v + a w)` and
//! `H = r3(1 - b u - b v - w)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Densities `(u, v, w)` at a point.
pub type Densities = [f64; 3];

/// Rate and interaction constants of the system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    /// Predation benefit.
    pub a: f64,
    /// Predation pressure.
    pub b: f64,
    /// Competition of `u` on `v`.
    pub h: f64,
    /// Competition of `v` on `u`.
    pub k: f64,
    /// Mutation rate between the predators.
    #[serde(default)]
    pub mu: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            d1: 1.0,
            d2: 1.0,
            d3: 1.0,
            r1: 1.0,
            r2: 1.0,
            r3: 1.0,
            a: 2.0,
            b: 0.2,
            h: 0.5,
            k: 0.5,
            mu: 0.0,
        }
    }
}

impl ModelParams {
    /// Lower bound of the prey density, `1 - 2b(a-1)`.
    pub fn beta(&self) -> f64 {
        1.0 - 2.0 * self.b * (self.a - 1.0)
    }

    /// `(1-k)/(1-h)`
    pub fn kappa(&self) -> f64 {
        (1.0 - self.k) / (1.0 - self.h)
    }

    /// Upper bound on the admissible mutation rate.
    pub fn mu_max(&self) -> f64 {
        0.5 * (self.a - 1.0) * self.r1.min(self.r2)
    }

    /// Exchanges the roles of the two predators: `(d1, r1, k) <-> (d2, r2, h)`.
    pub fn swap_predators(&self) -> Self {
        Self {
            d1: self.d2,
            d2: self.d1,
            r1: self.r2,
            r2: self.r1,
            h: self.k,
            k: self.h,
            ..*self
        }
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        Self { mu, ..*self }
    }

    fn all_finite(&self) -> bool {
        [
            self.d1, self.d2, self.d3, self.r1, self.r2, self.r3, self.a, self.b, self.h,
            self.k, self.mu,
        ]
        .iter()
        .all(|x| x.is_finite())
    }

    /// Fails unless every inequality of the standing parameter condition holds.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = validate_params(self);
        if report.pass {
            Ok(())
        } else {
            let failed: Vec<_> = report
                .checks
                .iter()
                .filter(|c| !c.holds)
                .map(|c| c.detail.clone())
                .collect();
            Err(Error::InvalidParams(failed.join("; ")))
        }
    }
}

/// `F(u,v,w)`
#[inline]
pub fn f_rate(p: &ModelParams, u: f64, v: f64, w: f64) -> f64 {
    p.r1 * (-1.0 - u - p.k * v + p.a * w)
}

/// `G(u,v,w)`
#[inline]
pub fn g_rate(p: &ModelParams, u: f64, v: f64, w: f64) -> f64 {
    p.r2 * (-1.0 - p.h * u - v + p.a * w)
}

/// `H(u,v,w)`
#[inline]
pub fn h_rate(p: &ModelParams, u: f64, v: f64, w: f64) -> f64 {
    p.r3 * (1.0 - p.b * u - p.b * v - w)
}

/// Kinetic vector field without input checks; used in inner loops.
#[inline]
pub fn kinetic_field(p: &ModelParams, u: f64, v: f64, w: f64) -> Densities {
    [
        u * f_rate(p, u, v, w) + p.mu * (v - u),
        v * g_rate(p, u, v, w) + p.mu * (u - v),
        w * h_rate(p, u, v, w),
    ]
}

/// Reaction part of the system at a single point.
pub fn reaction_rates(point: Densities, params: &ModelParams) -> Result<Densities> {
    if point.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!(
            "state point {point:?} is corrupted"
        )));
    }
    let [u, v, w] = point;
    Ok(kinetic_field(params, u, v, w))
}

/// One inequality of the parameter condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub checks: Vec<ConditionCheck>,
    pub beta: f64,
    pub kappa: f64,
    /// `d1 r1 >= d2 r2`, i.e. `u` is the (weakly) faster predator.
    pub ordering_convention: bool,
    pub warnings: Vec<String>,
}

pub fn validate_params(params: &ModelParams) -> ValidationReport {
    let p = params;
    let mut checks = Vec::new();
    let mut push = |name: &'static str, holds: bool, detail: String| {
        checks.push(ConditionCheck {
            name,
            holds,
            detail,
        })
    };

    push(
        "finite",
        p.all_finite(),
        "all parameters must be finite".to_string(),
    );
    let positive = [p.d1, p.d2, p.d3, p.r1, p.r2, p.r3].iter().all(|&x| x > 0.0);
    push(
        "positive_rates",
        positive,
        format!(
            "diffusivities and growth rates must be positive (d = {:?}, r = {:?})",
            [p.d1, p.d2, p.d3],
            [p.r1, p.r2, p.r3]
        ),
    );
    push("a_gt_1", p.a > 1.0, format!("a > 1 (a = {})", p.a));
    push(
        "h_range",
        p.h > 0.0 && p.h < 1.0,
        format!("0 < h < 1 (h = {})", p.h),
    );
    push(
        "k_range",
        p.k > 0.0 && p.k < 1.0,
        format!("0 < k < 1 (k = {})", p.k),
    );
    let b_max = 1.0 / (2.0 * (p.a - 1.0));
    push(
        "b_range",
        p.b > 0.0 && p.a > 1.0 && p.b < b_max,
        format!("0 < b < 1/(2(a-1)) = {b_max} (b = {})", p.b),
    );
    push(
        "mu_range",
        p.mu >= 0.0 && p.mu <= p.mu_max(),
        format!("0 <= mu <= (a-1) min(r1,r2)/2 = {} (mu = {})", p.mu_max(), p.mu),
    );

    let pass = checks.iter().all(|c| c.holds);
    let ordering_convention = p.d1 * p.r1 >= p.d2 * p.r2;
    let mut warnings = Vec::new();
    if !ordering_convention {
        warnings.push(format!(
            "d1 r1 = {} < d2 r2 = {}: v is the faster predator; use swap_predators() to restore the convention",
            p.d1 * p.r1,
            p.d2 * p.r2
        ));
    }
    ValidationReport {
        pass,
        checks,
        beta: p.beta(),
        kappa: p.kappa(),
        ordering_convention,
        warnings,
    }
}

/// `(p~, q~)` of the semi-trivial states.
pub fn semi_trivial_levels(p: &ModelParams) -> (f64, f64) {
    let denom = 1.0 + p.a * p.b;
    ((p.a - 1.0) / denom, (p.b + 1.0) / denom)
}

/// The positive coexistence state of the `mu = 0` system.
pub fn coexistence_state(p: &ModelParams) -> Densities {
    let hk = 1.0 - p.h * p.k;
    let s = 2.0 - (p.h + p.k);
    let w = (hk + p.b * s) / (hk + p.a * p.b * s);
    let aw1 = p.a * w - 1.0;
    [(1.0 - p.k) / hk * aw1, (1.0 - p.h) / hk * aw1, w]
}

/// The constant equilibria. Members that exist only for `mu = 0` are `None`
/// when `mu > 0`, with `note` explaining why.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyStateSet {
    pub trivial: Densities,
    pub predator_free: Densities,
    pub semi_trivial_u: Option<Densities>,
    pub semi_trivial_v: Option<Densities>,
    pub coexistence: Option<Densities>,
    pub note: Option<String>,
}

impl SteadyStateSet {
    pub fn members(&self) -> Vec<(&'static str, Densities)> {
        let mut out = vec![
            ("trivial", self.trivial),
            ("predator_free", self.predator_free),
        ];
        if let Some(s) = self.semi_trivial_u {
            out.push(("semi_trivial_u", s));
        }
        if let Some(s) = self.semi_trivial_v {
            out.push(("semi_trivial_v", s));
        }
        if let Some(s) = self.coexistence {
            out.push(("coexistence", s));
        }
        out
    }

    /// Looks up a member by the names used in configs.
    pub fn by_name(&self, name: &str) -> Option<Densities> {
        self.members()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, s)| s)
    }
}

pub fn steady_states(params: &ModelParams) -> Result<SteadyStateSet> {
    params.ensure_valid()?;
    let trivial = [0.0, 0.0, 0.0];
    let predator_free = [0.0, 0.0, 1.0];
    if params.mu > 0.0 {
        return Ok(SteadyStateSet {
            trivial,
            predator_free,
            semi_trivial_u: None,
            semi_trivial_v: None,
            coexistence: None,
            note: Some(format!(
                "mu = {} > 0: no semi-trivial states exist and the coexistence state is not computed \
                 (existence is only known for small mu, without a quantitative bound)",
                params.mu
            )),
        });
    }
    let (pt, qt) = semi_trivial_levels(params);
    Ok(SteadyStateSet {
        trivial,
        predator_free,
        semi_trivial_u: Some([pt, 0.0, qt]),
        semi_trivial_v: Some([0.0, pt, qt]),
        coexistence: Some(coexistence_state(params)),
        note: None,
    })
}

/// Kinetic growth indicators of the invading predator at each semi-trivial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstabilityReport {
    /// `F(0, p~, q~)`: growth rate of `u` invading `(0, p~, q~)`.
    pub f_at_semi_trivial_v: f64,
    /// `G(p~, 0, q~)`: growth rate of `v` invading `(p~, 0, q~)`.
    pub g_at_semi_trivial_u: f64,
}

pub fn linear_instability_report(params: &ModelParams) -> Result<InstabilityReport> {
    if params.mu > 0.0 {
        return Err(Error::NotApplicable(
            "semi-trivial states only exist for mu = 0".into(),
        ));
    }
    params.ensure_valid()?;
    let p = params;
    let denom = 1.0 + p.a * p.b;
    Ok(InstabilityReport {
        f_at_semi_trivial_v: p.r1 * (p.a - 1.0) * (1.0 - p.k) / denom,
        g_at_semi_trivial_u: p.r2 * (p.a - 1.0) * (1.0 - p.h) / denom,
    })
}

/// Max-norm of the kinetic vector field at `point`.
pub fn kinetic_residual(params: &ModelParams, point: Densities) -> f64 {
    let [u, v, w] = point;
    kinetic_field(params, u, v, w)
        .iter()
        .fold(0.0_f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn predator_free_and_extinction_are_rest_points() {
        let p = reference().with_mu(0.3);
        assert_eq!(reaction_rates([0.0, 0.0, 1.0], &p).unwrap(), [0.0, 0.0, 0.0]);
        assert_eq!(reaction_rates([0.0, 0.0, 0.0], &p).unwrap(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_corrupted_point() {
        let err = reaction_rates([f64::NAN, 0.0, 1.0], &reference()).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert!(reaction_rates([0.0, f64::INFINITY, 1.0], &reference()).is_err());
    }

    #[test]
    fn coexistence_values_for_reference_params() {
        let s = steady_states(&reference()).unwrap();
        let c = s.coexistence.unwrap();
        assert!((c[0] - 0.434783).abs() < 1e-6);
        assert!((c[1] - 0.434783).abs() < 1e-6);
        assert!((c[2] - 0.826087).abs() < 1e-6);
        // substitution into the reaction terms
        let r = reaction_rates([0.434783, 0.434783, 0.826087], &reference()).unwrap();
        assert!(r.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-6);
        assert!(kinetic_residual(&reference(), c) < 1e-12);
    }

    #[test]
    fn semi_trivial_levels_reference() {
        let s = steady_states(&reference()).unwrap();
        let [pt, z, qt] = s.semi_trivial_u.unwrap();
        assert_eq!(z, 0.0);
        assert!((pt - 0.714286).abs() < 1e-6);
        assert!((qt - 0.857143).abs() < 1e-6);
        // G and H vanish at (0, p~, q~)
        let p = reference();
        assert!(g_rate(&p, 0.0, pt, qt).abs() < 1e-15);
        assert!(h_rate(&p, 0.0, pt, qt).abs() < 1e-15);
    }

    #[test]
    fn validation_examples() {
        let r = validate_params(&reference());
        assert!(r.pass);
        assert!((r.beta - 0.6).abs() < 1e-15);

        let bad_b = ModelParams {
            b: 0.6,
            ..reference()
        };
        let r = validate_params(&bad_b);
        assert!(!r.pass);
        assert!(!r.checks.iter().find(|c| c.name == "b_range").unwrap().holds);

        let bad_mu = reference().with_mu(0.6);
        let r = validate_params(&bad_mu);
        assert!(!r.pass);
        assert!(!r.checks.iter().find(|c| c.name == "mu_range").unwrap().holds);
        assert!(r.checks.iter().filter(|c| !c.holds).count() == 1);
    }

    #[test]
    fn ordering_convention_is_a_warning() {
        let p = ModelParams {
            d1: 0.5,
            ..reference()
        };
        let r = validate_params(&p);
        assert!(r.pass);
        assert!(!r.ordering_convention);
        assert_eq!(r.warnings.len(), 1);
        assert!(validate_params(&p.swap_predators()).ordering_convention);
    }

    #[test]
    fn mu_positive_omits_mu_zero_states() {
        let s = steady_states(&reference().with_mu(0.1)).unwrap();
        assert!(s.coexistence.is_none());
        assert!(s.semi_trivial_u.is_none());
        assert!(s.note.is_some());
        assert_eq!(s.members().len(), 2);
    }

    #[test]
    fn instability_indicators() {
        let r = linear_instability_report(&reference()).unwrap();
        assert!((r.f_at_semi_trivial_v - 0.357143).abs() < 1e-6);
        assert!((r.g_at_semi_trivial_u - 0.357143).abs() < 1e-6);
        // direct evaluation of F at (0, p~, q~)
        let p = reference();
        let (pt, qt) = semi_trivial_levels(&p);
        assert!((f_rate(&p, 0.0, pt, qt) - r.f_at_semi_trivial_v).abs() < 1e-14);
        assert!((g_rate(&p, pt, 0.0, qt) - r.g_at_semi_trivial_u).abs() < 1e-14);

        let near_one = ModelParams {
            k: 1.0 - 1e-9,
            ..reference()
        };
        let f = linear_instability_report(&near_one).unwrap().f_at_semi_trivial_v;
        assert!(f > 0.0 && f < 1e-8);

        assert!(matches!(
            linear_instability_report(&reference().with_mu(0.1)),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn kappa_arithmetic() {
        let p = ModelParams {
            h: 0.5,
            k: 0.25,
            ..reference()
        };
        assert!((p.kappa() - 1.5).abs() < 1e-15);
    }

    pub(crate) fn valid_params() -> impl Strategy<Value = ModelParams> {
        (
            (0.1..3.0f64, 0.1..3.0f64, 0.1..3.0f64),
            (0.1..3.0f64, 0.1..3.0f64, 0.1..3.0f64),
            1.05..5.0f64,
            0.01..0.99f64,
            (0.01..0.99f64, 0.01..0.99f64),
        )
            .prop_map(|((d1, d2, d3), (r1, r2, r3), a, bf, (h, k))| ModelParams {
                d1,
                d2,
                d3,
                r1,
                r2,
                r3,
                a,
                b: bf / (2.0 * (a - 1.0)),
                h,
                k,
                mu: 0.0,
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn equilibria_are_roots_and_positive(p in valid_params()) {
            prop_assert!(validate_params(&p).pass);
            let s = steady_states(&p).unwrap();
            for (name, m) in s.members() {
                prop_assert!(kinetic_residual(&p, m) < 1e-12, "{name} residual");
            }
            let (pt, qt) = semi_trivial_levels(&p);
            let [us, vs, ws] = s.coexistence.unwrap();
            for x in [pt, qt, us, vs, ws, p.beta(), p.kappa()] {
                prop_assert!(x > 0.0);
            }
        }

        #[test]
        fn predator_swap_symmetry(p in valid_params()) {
            let s = steady_states(&p).unwrap();
            let q = steady_states(&p.swap_predators()).unwrap();
            let relabel = |m: Option<Densities>| m.map(|[u, v, w]| [v, u, w]);
            prop_assert_eq!(relabel(s.semi_trivial_u), q.semi_trivial_v);
            prop_assert_eq!(relabel(s.semi_trivial_v), q.semi_trivial_u);
            let c = s.coexistence.unwrap();
            let cs = q.coexistence.unwrap();
            prop_assert_eq!(c[0], cs[1]);
            prop_assert_eq!(c[1], cs[0]);
            prop_assert_eq!(c[2], cs[2]);
        }

        #[test]
        fn equal_competition_gives_equal_predators(p in valid_params()) {
            let p = ModelParams { k: p.h, ..p };
            let c = coexistence_state(&p);
            prop_assert_eq!(c[0], c[1]);
        }
    }
}
