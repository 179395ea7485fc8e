//! One-dimensional bracketing minimization.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Golden-section search for the minimum of a unimodal function on `[lo, hi]`.
///
/// Stops once the bracket width drops below `rel_tol * max(|x|, 1e-300)`
/// or after `max_iter` contractions, whichever comes first; the best
/// probed point is returned either way.
pub fn golden_section_min<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    max_iter: usize,
) -> Result<Minimum>
where
    F: FnMut(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(Error::Domain(format!("invalid bracket [{lo}, {hi}]")));
    }
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iterations = 0;
    while iterations < max_iter {
        let mid = 0.5 * (a + b);
        if (b - a) <= rel_tol * mid.abs().max(1e-300) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        iterations += 1;
    }
    let (x, value) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if !value.is_finite() {
        return Err(Error::Iteration(format!(
            "objective not finite at x = {x}"
        )));
    }
    Ok(Minimum {
        x,
        value,
        iterations,
    })
}

/// Maximize a unimodal function by minimizing its negation.
pub fn golden_section_max<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    max_iter: usize,
) -> Result<Minimum>
where
    F: FnMut(f64) -> f64,
{
    let m = golden_section_min(|x| -f(x), lo, hi, rel_tol, max_iter)?;
    Ok(Minimum {
        value: -m.value,
        ..m
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_vertex() {
        let m = golden_section_min(|x| (x - 1.3).powi(2) + 0.5, 0.0, 5.0, 1e-12, 500).unwrap();
        assert!((m.x - 1.3).abs() < 1e-7);
        assert!((m.value - 0.5).abs() < 1e-14);
    }

    #[test]
    fn maximizes_concave_function() {
        let m = golden_section_max(|x| -(x * x + 1.0) + x, 0.0, 4.0, 1e-12, 500).unwrap();
        assert!((m.x - 0.5).abs() < 1e-7);
        assert!((m.value + 0.75).abs() < 1e-14);
    }

    #[test]
    fn minimum_at_bracket_end() {
        let m = golden_section_min(|x| x, 2.0, 3.0, 1e-12, 500).unwrap();
        assert!((m.x - 2.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_inverted_bracket() {
        assert!(golden_section_min(|x| x, 3.0, 2.0, 1e-9, 10).is_err());
    }
}
