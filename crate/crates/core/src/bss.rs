//! Blind source separation for `y_t = A x_t` with two independent sources,
//! from observable autocovariances, plus GCov-style covariance restriction
//! objectives.
//!
//! With `A = [[1, a12], [a21, 1]]` and independent sources,
//! `gamma_12(h) = (a21 gamma_11(h) + a12 gamma_22(h)) / (1 + a12 a21)` for every
//! lag, so regressing `gamma_12` on `(gamma_11, gamma_22)` gives
//! `alpha = a21 / (1 + a12 a21)` and `beta = a12 / (1 + a12 a21)`. With
//! `c = alpha / beta` (so `a21 = c a12`) and `d = alpha`, `a12` solves
//! `d c a^2 - c a + d = 0`.

use crate::error::{domain, Error, Result};
use crate::model::ModelSpec;
pub use crate::transforms::{Transform, IDENTITY, SQUARE};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

pub const DEFAULT_LAGS: [usize; 5] = [1, 2, 3, 4, 5];
/// `|beta| below this is treated as triangular mixing (a12 = 0).
pub const TRIANGULAR_TOL: f64 = 1e-10;
pub const UNIDENTIFIED_TOL: f64 = 1e-8;
/// Smallest singular value of the column-normalised regressor matrix below
/// which the autocorrelation functions are deemed proportional.
pub const UNDERIDENTIFIED_TOL: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutocovSet {
    pub lags: Vec<usize>,
    /// `Gamma(h)[i][j] = Cov(y_{i,t}, y_{j,t-h})`.
    pub gammas: Vec<[[f64; 2]; 2]>,
    pub n_obs: usize,
}

impl AutocovSet {
    pub fn at(&self, h: usize) -> Option<&[[f64; 2]; 2]> {
        self.lags.iter().position(|l| *l == h).map(|i| &self.gammas[i])
    }
}

fn check_two_columns(series: &DMatrix<f64>) -> Result<()> {
    if series.ncols() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: series.ncols(),
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return domain("series contains non-finite values");
    }
    Ok(())
}

/// Demeaned sample autocovariances with divisor `T`.
pub fn sample_autocov(series: &DMatrix<f64>, lags: &[usize]) -> Result<AutocovSet> {
    check_two_columns(series)?;
    let t_len = series.nrows();
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    if lags.is_empty() || t_len <= max_lag + 1 {
        return domain(format!("need T > max lag + 1 (T = {t_len}, max lag = {max_lag})"));
    }
    let means: Vec<f64> = (0..2).map(|j| series.column(j).mean()).collect();
    for j in 0..2 {
        if series.column(j).iter().all(|v| *v == series[(0, j)]) {
            return Err(Error::DegenerateVariance { column: j });
        }
    }
    let c = DMatrix::from_fn(t_len, 2, |t, j| series[(t, j)] - means[j]);
    let gammas = lags
        .iter()
        .map(|&h| {
            let mut g = [[0.0; 2]; 2];
            for (i, row) in g.iter_mut().enumerate() {
                for (j, cell) in row.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for t in h..t_len {
                        s += c[(t, i)] * c[(t - h, j)];
                    }
                    *cell = s / t_len as f64;
                }
            }
            g
        })
        .collect();
    Ok(AutocovSet {
        lags: lags.to_vec(),
        gammas,
        n_obs: t_len,
    })
}

/// `gamma(h) = sigma^2 rho^h / (1 - rho^2)` for an AR(1) source.
pub fn ar1_autocov(rho: f64, sigma: f64, h: usize) -> f64 {
    sigma * sigma * rho.powi(h as i32) / (1.0 - rho * rho)
}

/// Population autocovariances of `y = A x` for independent AR(1) sources.
pub fn population_autocov_ar1(
    rho: [f64; 2],
    sigma: [f64; 2],
    a: &DMatrix<f64>,
    lags: &[usize],
) -> Result<AutocovSet> {
    if a.shape() != (2, 2) {
        return domain("mixing matrix must be 2 x 2");
    }
    if rho.iter().any(|r| r.abs() >= 1.0) {
        return domain("AR(1) sources need |rho| < 1");
    }
    let gammas = lags
        .iter()
        .map(|&h| {
            let src = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                ar1_autocov(rho[0], sigma[0], h),
                ar1_autocov(rho[1], sigma[1], h),
            ]));
            let g = a * src * a.transpose();
            [[g[(0, 0)], g[(0, 1)]], [g[(1, 0)], g[(1, 1)]]]
        })
        .collect();
    Ok(AutocovSet {
        lags: lags.to_vec(),
        gammas,
        n_obs: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Regression {
    pub alpha: f64,
    pub beta: f64,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingEstimate {
    /// Candidate `a12` values, ascending. A single entry for triangular mixing.
    pub roots: Vec<f64>,
    pub a21: Vec<f64>,
    /// Unit-diagonal candidates, row-major.
    pub a_candidates: Vec<[[f64; 2]; 2]>,
    pub regression: Regression,
    pub c: f64,
    pub d: f64,
    /// Smallest singular value of the column-normalised `[gamma_11, gamma_22]`
    /// regressor matrix over the lags used.
    pub condition_diag: f64,
    pub underidentified: bool,
    pub lags: Vec<usize>,
}

impl MixingEstimate {
    pub fn candidate(&self, k: usize) -> DMatrix<f64> {
        let a = &self.a_candidates[k];
        DMatrix::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]])
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MixingOptions {
    /// Also regress on `Gamma(0)`. The covariance identity holds at lag 0
    /// too, and the contemporaneous moments are by far the most precise.
    pub use_lag_zero: bool,
}

/// Solves the mixing quadratic from autocovariances at lags `h >= 1`.
/// The cross term is symmetrised as `(gamma_12(h) + gamma_21(h)) / 2`, the two
/// being equal in population.
pub fn estimate_mixing(acs: &AutocovSet) -> Result<MixingEstimate> {
    estimate_mixing_with(acs, MixingOptions::default())
}

pub fn estimate_mixing_with(acs: &AutocovSet, options: MixingOptions) -> Result<MixingEstimate> {
    if acs.lags.iter().filter(|h| **h >= 1).count() < 2 {
        return domain("estimate_mixing needs at least two lags h >= 1");
    }
    let rows: Vec<(usize, &[[f64; 2]; 2])> = acs
        .lags
        .iter()
        .zip(&acs.gammas)
        .filter(|(h, _)| **h >= 1 || options.use_lag_zero)
        .map(|(h, g)| (*h, g))
        .collect();
    let x = DMatrix::from_fn(rows.len(), 2, |r, j| rows[r].1[j][j]);
    let y = nalgebra::DVector::from_iterator(rows.len(), rows.iter().map(|(_, g)| 0.5 * (g[0][1] + g[1][0])));

    let norms: Vec<f64> = (0..2).map(|j| x.column(j).norm()).collect();
    let condition_diag = if norms.iter().all(|n| *n > 0.0) {
        let xn = DMatrix::from_fn(x.nrows(), 2, |r, j| x[(r, j)] / norms[j]);
        xn.singular_values().min()
    } else {
        0.0
    };
    let underidentified = condition_diag < UNDERIDENTIFIED_TOL;

    let svd = x.clone().svd(true, true);
    let coef = svd
        .solve(&y, 1e-14 * svd.singular_values.max())
        .map_err(|e| Error::InputDomain(e.to_string()))?;
    let (alpha, beta) = (coef[0], coef[1]);
    let residual_norm = (&y - &x * &coef).norm();
    let regression = Regression {
        alpha,
        beta,
        residual_norm,
    };
    let lags = rows.iter().map(|(h, _)| *h).collect();

    let assemble = |pairs: Vec<(f64, f64)>, c: f64, d: f64| -> Result<MixingEstimate> {
        for (a12, a21) in &pairs {
            let v = 1.0 + a12 * a21;
            if v.abs() < UNIDENTIFIED_TOL {
                return Err(Error::Unidentified { value: v });
            }
        }
        Ok(MixingEstimate {
            roots: pairs.iter().map(|p| p.0).collect(),
            a21: pairs.iter().map(|p| p.1).collect(),
            a_candidates: pairs.iter().map(|(a12, a21)| [[1.0, *a12], [*a21, 1.0]]).collect(),
            regression: regression.clone(),
            c,
            d,
            condition_diag,
            underidentified,
            lags: Vec::clone(&lags),
        })
    };

    if beta.abs() < TRIANGULAR_TOL {
        // a12 = 0 makes alpha = a21 directly
        return assemble(vec![(0.0, alpha)], 0.0, alpha);
    }
    let c = alpha / beta;
    let d = alpha;
    if alpha.abs() < TRIANGULAR_TOL {
        // a21 = 0, so beta = a12
        return assemble(vec![(beta, 0.0)], c, d);
    }
    let qa = d * c;
    let qb = -c;
    let qc = d;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Err(Error::NoRealRoot {
            discriminant: disc,
            residual: residual_norm,
            underidentified,
        });
    }
    let q = -0.5 * (qb + qb.signum() * disc.sqrt());
    let mut roots = [q / qa, qc / q];
    roots.sort_by(|a, b| a.total_cmp(b));
    assemble(roots.iter().map(|r| (*r, c * r)).collect(), c, d)
}

/// `x_t = A^{-1} y_t`, row by row.
pub fn demix(series: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() || a.ncols() != series.ncols() {
        return domain("mixing matrix must be square and match the series width");
    }
    let sv = a.clone().singular_values();
    if sv.min() <= 1e-12 * sv.max().max(1e-300) {
        return Err(Error::Conditioning {
            condition: sv.max() / sv.min(),
        });
    }
    let lu = a.clone().lu();
    let rhs = series.transpose();
    let x = lu.solve(&rhs).ok_or(Error::Conditioning { condition: f64::INFINITY })?;
    Ok(x.transpose())
}

/// `y_t = A x_t`, row by row.
pub fn mix(sources: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    sources * a.transpose()
}

/// Simulates independent Gaussian AR(1) sources with unit innovation
/// variance and mixes them with `a`. A burn-in of 500 steps is discarded.
/// Returns `(sources, observables)`.
pub fn simulate_mixed_ar1(
    rho: [f64; 2],
    a: &DMatrix<f64>,
    t_len: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    const BURN: usize = 500;
    let model = ModelSpec::gaussian_var1(
        DMatrix::from_row_slice(2, 2, &[rho[0], 0.0, 0.0, rho[1]]),
        DMatrix::identity(2, 2),
    )?;
    let path = model.simulate_path(&[0.0, 0.0], t_len + BURN, seed)?;
    let x = path.states.rows(BURN, t_len).clone_owned();
    let y = mix(&x, a);
    Ok((x, y))
}

/// Pairs `(a, a~)` entering `Cov[a(e_{i,t}), a~(e_{j,t-k})]`.
pub type TransformPair = (Transform, Transform);

pub fn default_transform_pairs() -> Vec<TransformPair> {
    vec![(IDENTITY, IDENTITY), (SQUARE, SQUARE)]
}

/// Sample correlation between two equally long slices; 0 when either is
/// constant.
fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Sum of squared sample correlations `Corr[a(e_{i,t}), a~(e_{j,t-k})]` over
/// transform pairs, lags `k`, and component pairs `(i, j)`; at `k = 0` only
/// `i != j` enters. Correlations rather than covariances keep the objective
/// invariant to the scale of the residuals.
pub fn gcov_statistic(resid: &DMatrix<f64>, transforms: &[TransformPair], lags: &[usize]) -> Result<f64> {
    if transforms.is_empty() || lags.is_empty() {
        return domain("gcov needs at least one transform pair and one lag");
    }
    let (t_len, n) = resid.shape();
    let max_lag = *lags.iter().max().unwrap();
    if t_len <= max_lag + 2 {
        return domain("series too short for the requested lags");
    }
    if resid.iter().any(|v| !v.is_finite()) {
        return domain("residuals contain non-finite values");
    }
    let mut total = 0.0;
    for (ta, tb) in transforms {
        let fa: Vec<Vec<f64>> = (0..n).map(|i| resid.column(i).iter().map(|v| ta.apply(*v)).collect()).collect();
        let fb: Vec<Vec<f64>> = (0..n).map(|i| resid.column(i).iter().map(|v| tb.apply(*v)).collect()).collect();
        for &k in lags {
            for i in 0..n {
                for j in 0..n {
                    if k == 0 && i == j {
                        continue;
                    }
                    let r = correlation(&fa[i][k..], &fb[j][..t_len - k]);
                    total += r * r;
                }
            }
        }
    }
    Ok(total)
}

/// Residuals `e_t = x_t - diag(rho) x_{t-1}` of AR(1) sources recovered by
/// `x_t = A^{-1} y_t`, `A = [[1, a12], [a21, 1]]`;
/// `params = [a12, a21, rho_1, rho_2]`. One row shorter than `series`.
pub fn ar1_demixing_residuals(params: &[f64], series: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if params.len() != 4 {
        return Err(Error::Dimension {
            expected: 4,
            got: params.len(),
        });
    }
    let x = unit_diagonal_demixing(&params[..2], series)?;
    let t_len = x.nrows();
    if t_len < 2 {
        return domain("need at least two observations");
    }
    Ok(DMatrix::from_fn(t_len - 1, 2, |t, j| x[(t + 1, j)] - params[2 + j] * x[(t, j)]))
}

/// Residual map parameterised by a real vector.
pub trait ResidualFn: Sync {
    fn residuals(&self, params: &[f64], series: &DMatrix<f64>) -> Result<DMatrix<f64>>;
}

impl<F> ResidualFn for F
where
    F: Fn(&[f64], &DMatrix<f64>) -> Result<DMatrix<f64>> + Sync,
{
    fn residuals(&self, params: &[f64], series: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self(params, series)
    }
}

/// Demixing residuals for `A = [[1, a12], [a21, 1]]`, `params = [a12, a21]`.
pub fn unit_diagonal_demixing(params: &[f64], series: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if params.len() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: params.len(),
        });
    }
    let a = DMatrix::from_row_slice(2, 2, &[1.0, params[0], params[1], 1.0]);
    demix(series, &a)
}

pub fn gcov_objective(
    resid_fn: &dyn ResidualFn,
    params: &[f64],
    series: &DMatrix<f64>,
    transforms: &[TransformPair],
    lags: &[usize],
) -> Result<f64> {
    if transforms.is_empty() || lags.is_empty() {
        return domain("gcov needs at least one transform pair and one lag");
    }
    let resid = resid_fn.residuals(params, series)?;
    gcov_statistic(&resid, transforms, lags)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchBudget {
    pub max_evaluations: usize,
    pub initial_step: f64,
    /// Stop once the step falls below this.
    pub tolerance: f64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            max_evaluations: 2_000,
            initial_step: 0.1,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GcovFit {
    pub params: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub evaluations: usize,
    /// Accepted iterates `(params, objective)`, starting with the initial point.
    pub trace: Vec<(Vec<f64>, f64)>,
    /// Eigenvalues of the finite-difference Hessian at the optimum, ascending.
    pub curvature: Vec<f64>,
    /// `lambda_min / lambda_max` of that Hessian (0 when not positive).
    pub curvature_ratio: f64,
    /// Objective nearly flat along some direction.
    pub flat: bool,
}

/// Curvature ratio below which the objective is reported flat.
pub const FLAT_RATIO: f64 = 0.02;

/// Coordinate search with step halving. On budget exhaustion the best point
/// so far is returned with `converged = false`.
pub fn gcov_estimate(
    resid_fn: &dyn ResidualFn,
    init: &[f64],
    series: &DMatrix<f64>,
    transforms: &[TransformPair],
    lags: &[usize],
    budget: SearchBudget,
) -> Result<GcovFit> {
    if init.is_empty() || init.iter().any(|v| !v.is_finite()) {
        return domain("initial parameters must be non-empty and finite");
    }
    if !(budget.initial_step > 0.0 && budget.tolerance > 0.0) {
        return domain("search steps must be positive");
    }
    let evals = std::cell::Cell::new(0usize);
    // parameters that make the residual map fail are treated as infeasible
    let mut eval = |p: &[f64]| -> Result<f64> {
        evals.set(evals.get() + 1);
        match gcov_objective(resid_fn, p, series, transforms, lags) {
            Ok(v) => Ok(v),
            Err(Error::Conditioning { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };
    let mut x = init.to_vec();
    let mut fx = eval(&x)?;
    let mut trace = vec![(x.clone(), fx)];
    let mut step = budget.initial_step;
    let mut converged = false;
    'outer: while evals.get() < budget.max_evaluations {
        let mut improved = false;
        for i in 0..x.len() {
            for sign in [1.0, -1.0] {
                if evals.get() >= budget.max_evaluations {
                    break 'outer;
                }
                let mut cand = x.clone();
                cand[i] += sign * step;
                let fc = eval(&cand)?;
                if fc < fx {
                    x = cand;
                    fx = fc;
                    improved = true;
                    trace.push((x.clone(), fx));
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < budget.tolerance {
                converged = true;
                break;
            }
        }
    }
    let evaluations = evals.get();
    let h = (budget.initial_step * 0.5).max(1e-3);
    let hess = fd_hessian(&mut eval, &x, fx, h)?;
    let eig = SymmetricEigen::new(hess).eigenvalues;
    let mut curvature: Vec<f64> = eig.iter().copied().collect();
    curvature.sort_by(|a, b| a.total_cmp(b));
    let max = curvature.last().copied().unwrap_or(0.0);
    let min = curvature.first().copied().unwrap_or(0.0);
    let curvature_ratio = if max > 0.0 && min > 0.0 { min / max } else { 0.0 };
    Ok(GcovFit {
        params: x,
        objective: fx,
        converged,
        evaluations,
        trace,
        curvature,
        curvature_ratio,
        flat: curvature_ratio < FLAT_RATIO,
    })
}

fn fd_hessian(eval: &mut impl FnMut(&[f64]) -> Result<f64>, x: &[f64], fx: f64, h: f64) -> Result<DMatrix<f64>> {
    let k = x.len();
    let mut hess = DMatrix::zeros(k, k);
    let shifted = |x: &[f64], moves: &[(usize, f64)]| {
        let mut p = x.to_vec();
        for (i, d) in moves {
            p[*i] += d;
        }
        p
    };
    for i in 0..k {
        let fp = eval(&shifted(x, &[(i, h)]))?;
        let fm = eval(&shifted(x, &[(i, -h)]))?;
        hess[(i, i)] = (fp - 2.0 * fx + fm) / (h * h);
        for j in 0..i {
            let fpp = eval(&shifted(x, &[(i, h), (j, h)]))?;
            let fpm = eval(&shifted(x, &[(i, h), (j, -h)]))?;
            let fmp = eval(&shifted(x, &[(i, -h), (j, h)]))?;
            let fmm = eval(&shifted(x, &[(i, -h), (j, -h)]))?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    if hess.iter().any(|v| !v.is_finite()) {
        hess.fill(0.0);
    }
    Ok(hess)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCondition {
    /// `eta^2_{j,h} = sigma_j^2 (1 - rho_j^{2h}) / (1 - rho_j^2)`.
    pub eta2: [f64; 2],
    /// Slopes in `v` of the conditional log-density derivative,
    /// `rho_j^h / eta^2_{j,h}`.
    pub slopes: [f64; 2],
    pub independent: bool,
    /// Both slopes have decayed below `1e-8`; the condition carries no
    /// usable information at this horizon.
    pub degraded: bool,
}

/// Distinguishability of two Gaussian AR(1) sources through their `h`-step
/// transition laws.
pub fn bss_rate_condition(rho: [f64; 2], sigma: [f64; 2], h: usize) -> Result<RateCondition> {
    if rho.iter().any(|r| !(r.abs() < 1.0)) || sigma.iter().any(|s| !(*s > 0.0)) {
        return domain("need |rho_j| < 1 and sigma_j > 0");
    }
    if h == 0 {
        return domain("horizon must be >= 1");
    }
    let eta2 = [0, 1].map(|j| sigma[j] * sigma[j] * (1.0 - rho[j].powi(2 * h as i32)) / (1.0 - rho[j] * rho[j]));
    let slopes = [0, 1].map(|j| rho[j].powi(h as i32) / eta2[j]);
    let scale = slopes[0].abs().max(slopes[1].abs());
    let independent = (slopes[0] - slopes[1]).abs() > 1e-10 * scale;
    Ok(RateCondition {
        eta2,
        slopes,
        independent,
        degraded: scale < 1e-8,
    })
}
