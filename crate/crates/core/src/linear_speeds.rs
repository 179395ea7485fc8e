//! Linear invasion speeds into the predator-free state `(0, 0, 1)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kinetics::ModelParams;
use crate::optimize::golden_section_min;

const GAMMA_MIN: f64 = 1e-6;
const SPEED_REL_TOL: f64 = 1e-10;

/// Dominant eigenvalue of the linearization matrix `M[mu, gamma]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PfEigenvalue {
    pub value: f64,
    /// `mu = 0`: the matrix is diagonal, hence reducible.
    pub reducible: bool,
}

fn diagonal(params: &ModelParams, mu: f64, gamma: f64) -> (f64, f64) {
    let p = params;
    let g2 = gamma * gamma;
    (
        p.d1 * g2 + p.r1 * (p.a - 1.0) - mu,
        p.d2 * g2 + p.r2 * (p.a - 1.0) - mu,
    )
}

#[inline]
fn pf_value(params: &ModelParams, mu: f64, gamma: f64) -> f64 {
    let (m11, m22) = diagonal(params, mu, gamma);
    let half_gap = 0.5 * (m11 - m22);
    0.5 * (m11 + m22) + half_gap.hypot(mu)
}

/// Perron-Frobenius eigenvalue of
///
/// ```text
/// [ d1 g^2 + r1(a-1) - mu        mu             ]
/// [        mu             d2 g^2 + r2(a-1) - mu ]
/// ```
pub fn pf_eigenvalue(params: &ModelParams, mu: f64, gamma: f64) -> Result<PfEigenvalue> {
    if !(gamma.is_finite() && mu.is_finite()) {
        return Err(Error::NonFinite(format!("mu = {mu}, gamma = {gamma}")));
    }
    if gamma < 0.0 {
        return Err(Error::Domain(format!("decay rate gamma = {gamma} < 0")));
    }
    if mu < 0.0 {
        return Err(Error::Domain(format!("mutation rate mu = {mu} < 0")));
    }
    if mu == 0.0 {
        let (m11, m22) = diagonal(params, 0.0, gamma);
        return Ok(PfEigenvalue {
            value: m11.max(m22),
            reducible: true,
        });
    }
    Ok(PfEigenvalue {
        value: pf_value(params, mu, gamma),
        reducible: false,
    })
}

/// `min_{gamma > 0} Lambda[mu, gamma] / gamma` and its minimizer.
pub fn minimal_speed_mu(params: &ModelParams) -> Result<(f64, f64)> {
    let mu = params.mu;
    if mu == 0.0 {
        return Err(Error::NotApplicable(
            "mu = 0: the linearization is reducible, use closed_form_speeds".into(),
        ));
    }
    params.ensure_valid()?;
    let speed = |g: f64| pf_value(params, mu, g) / g;

    // Lambda is convex in gamma with Lambda(0) > 0, so Lambda/gamma is unimodal.
    let mut hi = 1.0_f64;
    let mut grown = 0;
    while speed(2.0 * hi) <= speed(hi) {
        hi *= 2.0;
        grown += 1;
        if grown > 200 {
            return Err(Error::Iteration(
                "could not bracket the minimizing decay rate".into(),
            ));
        }
    }
    let m = golden_section_min(speed, GAMMA_MIN, 2.0 * hi, SPEED_REL_TOL, 400)?;
    Ok((m.value, m.x))
}

/// Theoretical speeds. `c_mu_star` and `gamma_star` are present iff `mu > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedTable {
    pub c_u_star: f64,
    pub c_v_star: f64,
    pub c_u_2star: f64,
    pub c_v_2star: f64,
    pub c_mu_star: Option<f64>,
    pub gamma_star: Option<f64>,
}

pub fn closed_form_speeds(params: &ModelParams) -> Result<SpeedTable> {
    params.ensure_valid()?;
    let p = params;
    let c_u_star = 2.0 * (p.d1 * p.r1 * (p.a - 1.0)).sqrt();
    let c_v_star = 2.0 * (p.d2 * p.r2 * (p.a - 1.0)).sqrt();
    let denom = 1.0 + p.a * p.b;
    let (c_mu_star, gamma_star) = if p.mu > 0.0 {
        let (c, g) = minimal_speed_mu(p)?;
        (Some(c), Some(g))
    } else {
        (None, None)
    };
    Ok(SpeedTable {
        c_u_star,
        c_v_star,
        c_u_2star: c_u_star * ((1.0 - p.k) / denom).sqrt(),
        c_v_2star: c_v_star * ((1.0 - p.h) / denom).sqrt(),
        c_mu_star,
        gamma_star,
    })
}
