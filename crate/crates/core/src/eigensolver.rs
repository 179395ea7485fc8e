//! Principal Dirichlet eigenvalues on `(-R, R)` for the scalar operator
//! `-d phi'' - c phi' + a phi` and for the cooperative two-component
//! operator linearizing the predator equations at `(0, 0, 1)`.
//!
//! Both are discretized with second-order central differences. The
//! resulting matrices have nonpositive off-diagonal entries (an M-matrix
//! pattern once the grid resolves the drift), so the principal eigenpair is
//! found by inverse iteration whose shift is the Collatz-Wielandt lower bound
//! of the current iterate. The shift stays below the principal eigenvalue,
//! every solve has a positive inverse, and iterates remain positive.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kinetics::ModelParams;
use crate::linear_speeds::pf_eigenvalue;
use crate::optimize::golden_section_max;

pub const MAX_SWEEPS: usize = 100_000;
const EIG_CHANGE_TOL: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-10;

type Block<const B: usize> = [[f64; B]; B];
type Vector<const B: usize> = [f64; B];

fn mat_vec<const B: usize>(m: &Block<B>, x: &Vector<B>) -> Vector<B> {
    let mut y = [0.0; B];
    for i in 0..B {
        for j in 0..B {
            y[i] += m[i][j] * x[j];
        }
    }
    y
}

fn mat_mat<const B: usize>(a: &Block<B>, b: &Block<B>) -> Block<B> {
    let mut c = [[0.0; B]; B];
    for i in 0..B {
        for k in 0..B {
            for j in 0..B {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

fn mat_sub<const B: usize>(a: &Block<B>, b: &Block<B>) -> Block<B> {
    let mut c = *a;
    for i in 0..B {
        for j in 0..B {
            c[i][j] -= b[i][j];
        }
    }
    c
}

/// Gauss-Jordan inverse with partial pivoting; blocks are at most 2x2 here.
fn mat_inv<const B: usize>(m: &Block<B>) -> Option<Block<B>> {
    let mut a = *m;
    let mut inv = [[0.0; B]; B];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..B {
        let pivot = (col..B).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col] == 0.0 || !a[pivot][col].is_finite() {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col];
        for j in 0..B {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..B {
            if i != col {
                let f = a[i][col];
                for j in 0..B {
                    a[i][j] -= f * a[col][j];
                    inv[i][j] -= f * inv[col][j];
                }
            }
        }
    }
    Some(inv)
}

/// Block-tridiagonal matrix with `B x B` blocks.
/// Row `i` reads `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1]`.
#[derive(Debug, Clone)]
struct BlockTridiagonal<const B: usize> {
    lower: Vec<Block<B>>,
    diag: Vec<Block<B>>,
    upper: Vec<Block<B>>,
}

impl<const B: usize> BlockTridiagonal<B> {
    fn len(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, x: &[Vector<B>]) -> Vec<Vector<B>> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = mat_vec(&self.diag[i], &x[i]);
                if i > 0 {
                    let l = mat_vec(&self.lower[i], &x[i - 1]);
                    for k in 0..B {
                        y[k] += l[k];
                    }
                }
                if i + 1 < n {
                    let u = mat_vec(&self.upper[i], &x[i + 1]);
                    for k in 0..B {
                        y[k] += u[k];
                    }
                }
                y
            })
            .collect()
    }

    fn inf_norm(&self) -> f64 {
        (0..self.len())
            .flat_map(|i| {
                (0..B).map(move |r| {
                    (0..B)
                        .map(|c| {
                            self.lower[i][r][c].abs()
                                + self.diag[i][r][c].abs()
                                + self.upper[i][r][c].abs()
                        })
                        .sum::<f64>()
                })
            })
            .fold(0.0, f64::max)
    }

    /// Lower bound on the real parts of all eigenvalues (Gershgorin rows).
    fn gershgorin_lower(&self) -> f64 {
        let mut lo = f64::INFINITY;
        for i in 0..self.len() {
            for r in 0..B {
                let mut off = 0.0;
                for c in 0..B {
                    off += self.lower[i][r][c].abs() + self.upper[i][r][c].abs();
                    if c != r {
                        off += self.diag[i][r][c].abs();
                    }
                }
                lo = lo.min(self.diag[i][r][r] - off);
            }
        }
        lo
    }

    fn has_nonpositive_off_diagonal(&self) -> bool {
        (0..self.len()).all(|i| {
            (0..B).all(|r| {
                (0..B).all(|c| {
                    self.lower[i][r][c] <= 0.0
                        && self.upper[i][r][c] <= 0.0
                        && (r == c || self.diag[i][r][c] <= 0.0)
                })
            })
        })
    }

    /// Solves `(A - shift I) x = rhs` by block Thomas elimination.
    fn solve_shifted(&self, shift: f64, rhs: &[Vector<B>]) -> Option<Vec<Vector<B>>> {
        let n = self.len();
        let shifted = |i: usize| {
            let mut d = self.diag[i];
            for (k, row) in d.iter_mut().enumerate() {
                row[k] -= shift;
            }
            d
        };
        let mut c_prime: Vec<Block<B>> = Vec::with_capacity(n);
        let mut f_prime: Vec<Vector<B>> = Vec::with_capacity(n);
        for i in 0..n {
            let (denom, mut f) = if i == 0 {
                (shifted(0), rhs[0])
            } else {
                let d = mat_sub(&shifted(i), &mat_mat(&self.lower[i], &c_prime[i - 1]));
                let lf = mat_vec(&self.lower[i], &f_prime[i - 1]);
                let mut f = rhs[i];
                for k in 0..B {
                    f[k] -= lf[k];
                }
                (d, f)
            };
            let inv = mat_inv(&denom)?;
            c_prime.push(mat_mat(&inv, &self.upper[i]));
            f = mat_vec(&inv, &f);
            f_prime.push(f);
        }
        let mut x = f_prime;
        for i in (0..n.saturating_sub(1)).rev() {
            let cx = mat_vec(&c_prime[i], &x[i + 1]);
            for k in 0..B {
                x[i][k] -= cx[k];
            }
        }
        Some(x)
    }
}

#[derive(Debug, Clone)]
struct Eigenpair<const B: usize> {
    value: f64,
    vector: Vec<Vector<B>>,
    sweeps: usize,
}

fn principal_eigenpair<const B: usize>(
    matrix: &BlockTridiagonal<B>,
    seed: Vec<Vector<B>>,
) -> Result<Eigenpair<B>> {
    if !matrix.has_nonpositive_off_diagonal() {
        return Err(Error::Structure(
            "discretized operator is not of M-matrix type; refine the grid so that |c| dx < 2 d"
                .into(),
        ));
    }
    let scale = matrix.inf_norm().max(1.0);
    let mut x = seed;
    normalize(&mut x);
    let mut shift = matrix.gershgorin_lower() - 1.0;
    let mut previous = f64::NAN;

    for sweep in 1..=MAX_SWEEPS {
        let mut y = match matrix.solve_shifted(shift, &x) {
            Some(y) => y,
            // exact hit of the eigenvalue: nudge the shift down
            None => {
                shift -= 1e-13 * scale;
                matrix.solve_shifted(shift, &x).ok_or_else(|| {
                    Error::Iteration(format!("singular shifted system at shift {shift}"))
                })?
            }
        };
        // Once the shift sits on the eigenvalue to rounding, the solve may
        // return the eigenvector with a uniform negative sign.
        let all_negative = y.iter().all(|v| v.iter().all(|&c| c < 0.0));
        if all_negative {
            for v in y.iter_mut() {
                for c in v.iter_mut() {
                    *c = -*c;
                }
            }
        }
        let mut min_ratio = f64::INFINITY;
        for (xi, yi) in x.iter().zip(&y) {
            for k in 0..B {
                if !(yi[k] > 0.0) || !yi[k].is_finite() {
                    return Err(Error::Iteration(format!(
                        "eigenvector changed sign after {sweep} sweeps"
                    )));
                }
                min_ratio = min_ratio.min(xi[k] / yi[k]);
            }
        }
        x = y;
        normalize(&mut x);

        let ax = matrix.apply(&x);
        let (num, den) = x
            .iter()
            .zip(&ax)
            .flat_map(|(xi, ai)| (0..B).map(move |k| (xi[k] * ai[k], xi[k] * xi[k])))
            .fold((0.0, 0.0), |(n, d), (a, b)| (n + a, d + b));
        let value = num / den;
        let residual = x
            .iter()
            .zip(&ax)
            .flat_map(|(xi, ai)| (0..B).map(move |k| (ai[k] - value * xi[k]).abs()))
            .fold(0.0, f64::max);

        let converged = (value - previous).abs() < EIG_CHANGE_TOL * value.abs().max(1.0)
            && residual < RESIDUAL_TOL;
        if converged {
            return Ok(Eigenpair {
                value,
                vector: x,
                sweeps: sweep,
            });
        }
        previous = value;
        // Collatz-Wielandt: shift + min(x/y) <= principal eigenvalue.
        let next = shift + min_ratio;
        if !all_negative && next > shift {
            shift = next;
        }
    }
    Err(Error::Iteration(format!(
        "no convergence after {MAX_SWEEPS} sweeps"
    )))
}

fn normalize<const B: usize>(x: &mut [Vector<B>]) {
    let m = x
        .iter()
        .flat_map(|v| v.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    if m > 0.0 {
        for v in x.iter_mut() {
            for c in v.iter_mut() {
                *c /= m;
            }
        }
    }
}

fn check_grid(half_width: f64, n: usize) -> Result<f64> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::Domain(format!("half-width R = {half_width} must be positive")));
    }
    if n < 16 {
        return Err(Error::Domain(format!("grid size n = {n} < 16")));
    }
    Ok(2.0 * half_width / (n - 1) as f64)
}

fn cosine_seed(half_width: f64, dx: f64, interior: usize) -> Vec<f64> {
    (1..=interior)
        .map(|j| {
            let x = -half_width + j as f64 * dx;
            (std::f64::consts::FRAC_PI_2 * x / half_width).cos().max(1e-3)
        })
        .collect()
}

/// `a + c^2/(4d) + d pi^2/(4 R^2)`
pub fn scalar_eigenvalue_closed_form(d: f64, c: f64, a_coef: f64, half_width: f64) -> f64 {
    a_coef + c * c / (4.0 * d) + d * std::f64::consts::PI.powi(2) / (4.0 * half_width.powi(2))
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalarEigen {
    pub numeric: f64,
    pub closed_form: f64,
    /// Eigenfunction on the full grid (zeros at both ends), sup-norm 1.
    pub eigenfunction: Vec<f64>,
    pub grid_size: usize,
    pub half_width: f64,
    pub sweeps: usize,
}

/// Principal eigenvalue of `-d phi'' - c phi' + a_coef phi` on `(-R, R)` with
/// Dirichlet ends, on `n` grid points including the two boundary nodes.
pub fn scalar_dirichlet_eig(
    d: f64,
    c: f64,
    a_coef: f64,
    half_width: f64,
    n: usize,
) -> Result<ScalarEigen> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("diffusivity d = {d} must be positive")));
    }
    if !(c.is_finite() && a_coef.is_finite()) {
        return Err(Error::NonFinite(format!("c = {c}, a = {a_coef}")));
    }
    let dx = check_grid(half_width, n)?;
    let m = n - 2;
    let diff = d / (dx * dx);
    let drift = c / (2.0 * dx);
    let matrix = BlockTridiagonal::<1> {
        lower: vec![[[-diff + drift]]; m],
        diag: vec![[[2.0 * diff + a_coef]]; m],
        upper: vec![[[-diff - drift]]; m],
    };
    let seed = cosine_seed(half_width, dx, m).into_iter().map(|s| [s]).collect();
    let pair = principal_eigenpair(&matrix, seed)?;
    let mut eigenfunction = Vec::with_capacity(n);
    eigenfunction.push(0.0);
    eigenfunction.extend(pair.vector.iter().map(|v| v[0]));
    eigenfunction.push(0.0);
    Ok(ScalarEigen {
        numeric: pair.value,
        closed_form: scalar_eigenvalue_closed_form(d, c, a_coef, half_width),
        eigenfunction,
        grid_size: n,
        half_width,
        sweeps: pair.sweeps,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenResult {
    pub eigenvalue: f64,
    /// `(phi, psi)` on the full grid including the zero boundary values;
    /// `phi` has sup-norm 1.
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub grid_size: usize,
    pub half_width: f64,
    pub sweeps: usize,
}

impl EigenResult {
    pub fn is_positive_inside(&self) -> bool {
        let n = self.grid_size;
        self.phi[1..n - 1].iter().all(|&x| x > 0.0) && self.psi[1..n - 1].iter().all(|&x| x > 0.0)
    }
}

fn require_mutation(params: &ModelParams) -> Result<()> {
    if !(params.mu > 0.0) {
        return Err(Error::Structure(
            "mu = 0: the two-component operator is not cooperative-irreducible".into(),
        ));
    }
    params.ensure_valid()
}

/// Principal eigenvalue `Lambda_R(c, delta)` of
///
/// ```text
/// -d1 phi'' - c phi' - r1 (a-1-2 delta) phi          - mu (psi - phi) = L phi
/// -d2 psi'' - c psi' - r2 (a-1-2 delta r1/r2) psi    - mu (phi - psi) = L psi
/// ```
///
/// on `(-R, R)` with `phi = psi = 0` at `+-R`.
pub fn system_dirichlet_eig(
    params: &ModelParams,
    c: f64,
    delta: f64,
    half_width: f64,
    n: usize,
) -> Result<EigenResult> {
    require_mutation(params)?;
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("depletion delta = {delta} must be >= 0")));
    }
    if !c.is_finite() {
        return Err(Error::NonFinite(format!("c = {c}")));
    }
    let p = params;
    let dx = check_grid(half_width, n)?;
    let m = n - 2;
    let (k1, k2) = (p.d1 / (dx * dx), p.d2 / (dx * dx));
    let drift = c / (2.0 * dx);
    let g1 = -p.r1 * (p.a - 1.0 - 2.0 * delta) + p.mu;
    let g2 = -p.r2 * (p.a - 1.0) + 2.0 * p.r1 * delta + p.mu;
    let matrix = BlockTridiagonal::<2> {
        lower: vec![[[-k1 + drift, 0.0], [0.0, -k2 + drift]]; m],
        diag: vec![[[2.0 * k1 + g1, -p.mu], [-p.mu, 2.0 * k2 + g2]]; m],
        upper: vec![[[-k1 - drift, 0.0], [0.0, -k2 - drift]]; m],
    };
    let seed = cosine_seed(half_width, dx, m)
        .into_iter()
        .map(|s| [s, s])
        .collect();
    let pair = principal_eigenpair(&matrix, seed)?;

    let first_max = pair.vector.iter().fold(0.0_f64, |a, v| a.max(v[0]));
    let mut phi = vec![0.0; n];
    let mut psi = vec![0.0; n];
    for (j, v) in pair.vector.iter().enumerate() {
        phi[j + 1] = v[0] / first_max;
        psi[j + 1] = v[1] / first_max;
    }
    let result = EigenResult {
        eigenvalue: pair.value,
        phi,
        psi,
        grid_size: n,
        half_width,
        sweeps: pair.sweeps,
    };
    if !result.is_positive_inside() {
        return Err(Error::Iteration("eigenfunction pair changes sign".into()));
    }
    Ok(result)
}

/// `max_{gamma >= 0} (-Lambda[mu, gamma] + |c| gamma) + 2 r1 delta`, the
/// `R -> infinity` limit of `Lambda_R(c, delta)`.
pub fn limit_eigenvalue(params: &ModelParams, c: f64, delta: f64) -> Result<f64> {
    require_mutation(params)?;
    let c = c.abs();
    let mu = params.mu;
    let objective = |g: f64| -pf_eigenvalue(params, mu, g).map_or(f64::NAN, |l| l.value) + c * g;
    // The objective is concave; grow the bracket until it decreases.
    let mut hi = 1.0_f64;
    let mut grown = 0;
    while objective(2.0 * hi) >= objective(hi) {
        hi *= 2.0;
        grown += 1;
        if grown > 200 {
            return Err(Error::Iteration("could not bracket the maximizer".into()));
        }
    }
    let best = golden_section_max(objective, 0.0, 2.0 * hi, 1e-12, 400)?;
    let at_zero = objective(0.0);
    Ok(best.value.max(at_zero) + 2.0 * params.r1 * delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn symmetric() -> ModelParams {
        ModelParams {
            mu: 0.25,
            ..ModelParams::default()
        }
    }

    #[test]
    fn closed_form_examples() {
        assert!((scalar_eigenvalue_closed_form(1.0, 0.0, 0.0, PI / 2.0) - 1.0).abs() < 1e-15);
        assert!((scalar_eigenvalue_closed_form(1.0, 2.0, -1.0, PI) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn scalar_numeric_close_to_closed_form() {
        let e = scalar_dirichlet_eig(1.0, 2.0, -1.0, PI, 2000).unwrap();
        assert!((e.numeric - 0.25).abs() < 1e-3, "{}", e.numeric);
        assert_eq!(e.eigenfunction.len(), 2000);
        assert_eq!(e.eigenfunction[0], 0.0);
        assert_eq!(*e.eigenfunction.last().unwrap(), 0.0);
        assert!(e.eigenfunction[1..1999].iter().all(|&x| x > 0.0));
        let sup = e.eigenfunction.iter().fold(0.0_f64, |m, &x| m.max(x));
        assert!((sup - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scalar_error_is_second_order() {
        let err = |n: usize| {
            (scalar_dirichlet_eig(1.0, 2.0, -1.0, PI, n).unwrap().numeric - 0.25).abs()
        };
        // n - 1 intervals: 500 -> 1000 halves dx
        let ratio = err(501) / err(1001);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn scalar_rejects_bad_input() {
        assert!(scalar_dirichlet_eig(0.0, 0.0, 0.0, 1.0, 100).is_err());
        assert!(scalar_dirichlet_eig(1.0, 0.0, 0.0, -1.0, 100).is_err());
        assert!(scalar_dirichlet_eig(1.0, 0.0, 0.0, 1.0, 8).is_err());
        // drift not resolved: |c| dx > 2 d
        assert!(matches!(
            scalar_dirichlet_eig(0.01, 5.0, 0.0, 10.0, 20),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn system_symmetric_reduces_to_scalar() {
        let e = system_dirichlet_eig(&symmetric(), 0.0, 0.0, 10.0, 4000).unwrap();
        let expected = -1.0 + PI * PI / 400.0;
        assert!((e.eigenvalue - expected).abs() < 1e-3);
        assert!(e.is_positive_inside());
        for (a, b) in e.phi.iter().zip(&e.psi) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn system_shift_and_reflection_identities() {
        let p = ModelParams {
            d2: 0.6,
            r2: 1.3,
            mu: 0.2,
            ..ModelParams::default()
        };
        let base = system_dirichlet_eig(&p, 0.7, 0.0, 8.0, 400).unwrap().eigenvalue;
        let shifted = system_dirichlet_eig(&p, 0.7, 0.05, 8.0, 400).unwrap().eigenvalue;
        let reflected = system_dirichlet_eig(&p, -0.7, 0.0, 8.0, 400).unwrap().eigenvalue;
        assert!((shifted - base - 2.0 * p.r1 * 0.05).abs() < 1e-10);
        assert!((reflected - base).abs() < 1e-10);
    }

    #[test]
    fn system_requires_mutation() {
        assert!(matches!(
            system_dirichlet_eig(&ModelParams::default(), 0.0, 0.0, 5.0, 100),
            Err(Error::Structure(_))
        ));
        assert!(matches!(
            limit_eigenvalue(&ModelParams::default(), 0.0, 0.0),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn limit_examples() {
        let p = symmetric();
        assert!((limit_eigenvalue(&p, 0.0, 0.0).unwrap() + 1.0).abs() < 1e-12);
        assert!(limit_eigenvalue(&p, 2.0, 0.0).unwrap().abs() < 1e-8);
        assert!((limit_eigenvalue(&p, 1.0, 0.0).unwrap() + 0.75).abs() < 1e-12);
        assert!((limit_eigenvalue(&p, 1.0, 0.1).unwrap() + 0.55).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_eigenvalue_approaches_limit() {
        let p = symmetric();
        let (c, delta) = (1.0, 0.01);
        let limit = limit_eigenvalue(&p, c, delta).unwrap();
        let vals: Vec<f64> = [20.0, 40.0, 80.0]
            .iter()
            .map(|&r| {
                let n = (2.0 * r / 0.04) as usize + 1;
                system_dirichlet_eig(&p, c, delta, r, n).unwrap().eigenvalue
            })
            .collect();
        assert!(vals[0] > vals[1] && vals[1] > vals[2], "{vals:?}");
        assert!(vals[2] > limit);
        assert!((vals[2] - limit).abs() < 1e-2);
    }
}
