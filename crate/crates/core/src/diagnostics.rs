//! Tests for the Markov property, strong white noise and distributional
//! invariance, calibrated by resampling.

use crate::error::{domain, Result};
use crate::normal;
use crate::rng::{self, Domain};
use crate::transforms::{Transform, IDENTITY, SQUARE};
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

pub const MIN_OBS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Resampling {
    pub replicates: usize,
    pub seed: u64,
}

impl Resampling {
    pub fn new(replicates: usize, seed: u64) -> Self {
        Self { replicates, seed }
    }

    fn check(&self) -> Result<()> {
        if self.replicates < 19 {
            return domain("need at least 19 resampling replicates");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detail {
    pub label: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub test: String,
    pub statistic: f64,
    pub p_value: f64,
    pub level: f64,
    pub reject: bool,
    pub n_obs: usize,
    pub dictionary: Vec<String>,
    pub resamples: usize,
    /// Dictionary entries dropped because a transform overflowed.
    pub skipped: Vec<String>,
    pub details: Vec<Detail>,
}

impl TestReport {
    pub fn summary_header() -> String {
        format!(
            "{:<24} {:>14} {:>9} {:>7} {:>8} {:>8}",
            "test", "statistic", "p-value", "level", "n_obs", "decision"
        )
    }

    pub fn summary_row(&self) -> String {
        format!(
            "{:<24} {:>14.6} {:>9.4} {:>7.3} {:>8} {:>8}",
            self.test,
            self.statistic,
            self.p_value,
            self.level,
            self.n_obs,
            if self.reject { "reject" } else { "accept" }
        )
    }
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return domain(format!("level must lie in (0, 1), got {level}"));
    }
    Ok(())
}

fn resampled_p_value(observed: f64, draws: &[f64]) -> f64 {
    let exceed = draws.iter().filter(|d| **d >= observed).count();
    (1 + exceed) as f64 / (draws.len() + 1) as f64
}

/// Mean of a dependent series with a non-overlapping batch-means standard
/// error. Unlike a Newey-West type estimator this needs no fourth moment of
/// the summands to be finite in order to be consistent for the long-run
/// variance of the mean, only of the batch averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BatchMeans {
    pub mean: f64,
    pub stderr: f64,
    pub batches: usize,
    pub batch_len: usize,
}

pub fn batch_means(x: &[f64], batches: usize) -> Result<BatchMeans> {
    if batches < 2 {
        return domain("batch means needs at least 2 batches");
    }
    let batch_len = x.len() / batches;
    if batch_len < 2 {
        return domain(format!("{} observations cannot fill {batches} batches", x.len()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return domain("series contains non-finite values");
    }
    let avgs: Vec<f64> = x
        .chunks_exact(batch_len)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / batch_len as f64)
        .collect();
    let mean = avgs.iter().sum::<f64>() / batches as f64;
    let var = avgs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok(BatchMeans {
        mean,
        stderr: (var / batches as f64).sqrt(),
        batches,
        batch_len,
    })
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // theta-function form converges fast for small lambda
        let pi2 = std::f64::consts::PI.powi(2);
        let mut cdf = 0.0;
        for k in 1..=20 {
            let m = (2 * k - 1) as f64;
            cdf += (-m * m * pi2 / (8.0 * lambda * lambda)).exp();
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / lambda;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sf = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sf += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sf).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn ks_p(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

fn sorted(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() || x.iter().any(|v| v.is_nan()) {
        return domain("KS needs a non-empty sample without NaN");
    }
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    Ok(v)
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample(x: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    let v = sorted(x)?;
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, xi) in v.iter().enumerate() {
        let f = cdf(*xi);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p(d, n),
    })
}

pub fn ks_normal(x: &[f64]) -> Result<KsResult> {
    ks_one_sample(x, normal::cdf)
}

pub fn ks_uniform(x: &[f64]) -> Result<KsResult> {
    ks_one_sample(x, |u| u.clamp(0.0, 1.0))
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let (va, vb) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (va.len(), vb.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < na && j < nb {
        let x = va[i].min(vb[j]);
        while i < na && va[i] <= x {
            i += 1;
        }
        while j < nb && vb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let n_eff = (na * nb) as f64 / (na + nb) as f64;
    Ok(KsResult {
        statistic: d,
        p_value: ks_p(d, n_eff),
    })
}

/// One moment `E[Cov(a(y_t), b(y_{t-2}) | y_{t-1}) c(y_{t-1})]`, with the
/// transforms applied to the indicated components.
#[derive(Debug, Clone, Copy)]
pub struct MarkovTriple {
    pub a: Transform,
    pub b: Transform,
    pub c: Transform,
    pub components: [usize; 3],
}

impl MarkovTriple {
    pub fn scalar(a: Transform, b: Transform, c: Transform) -> Self {
        Self {
            a,
            b,
            c,
            components: [0, 0, 0],
        }
    }

    pub fn label(&self) -> String {
        let [i, j, k] = self.components.map(|c| c + 1);
        format!(
            "a={}(y{i}_t) b={}(y{j}_t-2) c={}(y{k}_t-1)",
            self.a.label, self.b.label, self.c.label
        )
    }
}

/// `{x, x^2} x {x, x^2} x {x}`, each on a single component.
pub fn default_markov_dictionary(n: usize) -> Vec<MarkovTriple> {
    let mut out = Vec::new();
    for comp in 0..n {
        for a in [IDENTITY, SQUARE] {
            for b in [IDENTITY, SQUARE] {
                out.push(MarkovTriple {
                    a,
                    b,
                    c: IDENTITY,
                    components: [comp; 3],
                });
            }
        }
    }
    out
}

/// Polynomial sieve in `y_{t-1}`: `1, y_k, y_k y_l (k <= l), y_k^3`.
fn sieve_design(series: &DMatrix<f64>, rows: std::ops::Range<usize>) -> DMatrix<f64> {
    let n = series.ncols();
    let mut cols: Vec<Box<dyn Fn(usize) -> f64 + '_>> = vec![Box::new(|_| 1.0)];
    for k in 0..n {
        cols.push(Box::new(move |t| series[(t, k)]));
    }
    for k in 0..n {
        for l in k..n {
            cols.push(Box::new(move |t| series[(t, k)] * series[(t, l)]));
        }
    }
    for k in 0..n {
        cols.push(Box::new(move |t| series[(t, k)].powi(3)));
    }
    let len = rows.len();
    let start = rows.start;
    DMatrix::from_fn(len, cols.len(), |r, c| cols[c](start + r))
}

/// Orthonormal basis of the column space of `x`.
fn column_basis(x: &DMatrix<f64>) -> DMatrix<f64> {
    // scale columns first so the rank cut-off is meaningful
    let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    let scaled = DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| {
        if norms[c] > 0.0 {
            x[(r, c)] / norms[c]
        } else {
            0.0
        }
    });
    let svd = scaled.svd(true, false);
    let u = svd.u.expect("u requested");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-10 * smax)
        .collect();
    DMatrix::from_fn(u.nrows(), keep.len(), |r, c| u[(r, keep[c])])
}

fn residualize(basis: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let vv = nalgebra::DVector::from_column_slice(v);
    let proj = basis * (basis.transpose() * &vv);
    (vv - proj).iter().copied().collect()
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|x| *x == v[0])
}

/// Stationary-bootstrap index path with mean block length `block`.
fn stationary_indices<R: Rng>(rng: &mut R, len: usize, block: f64) -> Vec<usize> {
    let p_new = 1.0 / block;
    let mut idx = Vec::with_capacity(len);
    let mut cur = rng::index(rng, len);
    idx.push(cur);
    for _ in 1..len {
        if rng.random::<f64>() < p_new {
            cur = rng::index(rng, len);
        } else {
            cur = (cur + 1) % len;
        }
        idx.push(cur);
    }
    idx
}

/// Portmanteau test of the Markov property through the covariance
/// conditions `E[Cov(a(y_t), b(y_{t-2}) | y_{t-1}) c(y_{t-1})] = 0`.
///
/// Conditional means given `y_{t-1}` come from a polynomial sieve regression.
/// The moment contributions are resampled by a stationary bootstrap with
/// mean block length `ceil(T^{1/3})`; the bootstrap variance studentizes each
/// moment and the centred bootstrap statistics calibrate the sum of squares.
pub fn markov_test(
    series: &DMatrix<f64>,
    dictionary: &[MarkovTriple],
    level: f64,
    resampling: Resampling,
) -> Result<TestReport> {
    check_level(level)?;
    resampling.check()?;
    let (t_len, n) = series.shape();
    if t_len < MIN_OBS {
        return domain(format!("markov_test needs T >= {MIN_OBS}, got {t_len}"));
    }
    if dictionary.is_empty() {
        return domain("empty dictionary");
    }
    if series.iter().any(|v| !v.is_finite()) {
        return domain("series contains non-finite values");
    }
    for tr in dictionary {
        if tr.components.iter().any(|c| *c >= n) {
            return domain(format!("{} refers to a missing component", tr.label()));
        }
    }
    let m = t_len - 2;
    // the sieve spans the same space on standardized data, without overflow
    let mut scaled = series.clone();
    for j in 0..n {
        let col = series.column(j);
        let mean = col.mean();
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t_len as f64).sqrt();
        if sd > 0.0 {
            for t in 0..t_len {
                scaled[(t, j)] = (series[(t, j)] - mean) / sd;
            }
        }
    }
    let basis = column_basis(&sieve_design(&scaled, 1..t_len - 1));

    let mut moments: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut skipped = Vec::new();
    for tr in dictionary {
        let [ia, ib, ic] = tr.components;
        let a: Vec<f64> = (2..t_len).map(|t| tr.a.apply(series[(t, ia)])).collect();
        let b: Vec<f64> = (0..m).map(|t| tr.b.apply(series[(t, ib)])).collect();
        let c: Vec<f64> = (1..t_len - 1).map(|t| tr.c.apply(series[(t, ic)])).collect();
        if a.iter().chain(&b).chain(&c).any(|v| !v.is_finite()) {
            skipped.push(format!("{} (overflow)", tr.label()));
            continue;
        }
        if is_constant(&a) || is_constant(&b) {
            return domain(format!("{}: a and b must not be constant", tr.label()));
        }
        let ra = residualize(&basis, &a);
        let rb = residualize(&basis, &b);
        let z: Vec<f64> = (0..m).map(|t| ra[t] * rb[t] * c[t]).collect();
        if z.iter().any(|v| !v.is_finite()) {
            skipped.push(format!("{} (overflow)", tr.label()));
            continue;
        }
        moments.push(z);
        labels.push(tr.label());
    }
    if moments.is_empty() {
        return domain("every dictionary entry overflowed");
    }
    let k = moments.len();
    let observed: Vec<f64> = moments.iter().map(|z| z.iter().sum::<f64>() / m as f64).collect();

    let block = (t_len as f64).cbrt().ceil();
    let boot: Vec<Vec<f64>> = (0..resampling.replicates)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::rng_at(resampling.seed, rng::stream_id(Domain::Resample, b as u64), 0);
            let idx = stationary_indices(&mut r, m, block);
            moments
                .iter()
                .map(|z| idx.iter().map(|&i| z[i]).sum::<f64>() / m as f64)
                .collect()
        })
        .collect();

    let nb = boot.len() as f64;
    let mut variances = vec![0.0; k];
    for (j, var) in variances.iter_mut().enumerate() {
        let mean = boot.iter().map(|v| v[j]).sum::<f64>() / nb;
        *var = boot.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / (nb - 1.0);
    }
    let usable: Vec<usize> = (0..k).filter(|&j| variances[j] > 0.0).collect();
    if usable.is_empty() {
        return domain("all moments have zero resampled variance");
    }
    for j in (0..k).filter(|j| !usable.contains(j)) {
        skipped.push(format!("{} (zero variance)", labels[j]));
    }
    let stat = |v: &[f64], centre: &[f64]| -> f64 {
        usable.iter().map(|&j| (v[j] - centre[j]).powi(2) / variances[j]).sum()
    };
    let zeros = vec![0.0; k];
    let statistic = stat(&observed, &zeros);
    let null: Vec<f64> = boot.iter().map(|v| stat(v, &observed)).collect();
    let p_value = resampled_p_value(statistic, &null);
    let details = usable
        .iter()
        .map(|&j| Detail {
            label: labels[j].clone(),
            statistic: observed[j] / variances[j].sqrt(),
            p_value: None,
        })
        .collect();
    Ok(TestReport {
        test: "markov".into(),
        statistic,
        p_value,
        level,
        reject: p_value <= level,
        n_obs: t_len,
        dictionary: labels,
        resamples: resampling.replicates,
        skipped,
        details,
    })
}

/// `{x, x^2, x^3}`.
pub fn default_white_noise_transforms() -> Vec<Transform> {
    vec![IDENTITY, SQUARE, crate::transforms::CUBE]
}

struct Term {
    ta: usize,
    tb: usize,
    i: usize,
    j: usize,
    k: usize,
}

/// Portmanteau test of strong white noise with mutually independent
/// components: `T * sum r^2` over the correlations
/// `Corr[a(e_{i,t}), b(e_{j,t-k})]` for every ordered transform pair,
/// component pair and `k = 1..max_lag`, plus `k = 0` for `i < j`.
/// Calibrated by permuting each component's time index independently.
pub fn strong_white_noise_test(
    eps: &DMatrix<f64>,
    transforms: &[Transform],
    max_lag: usize,
    level: f64,
    resampling: Resampling,
) -> Result<TestReport> {
    check_level(level)?;
    resampling.check()?;
    let (t_len, n) = eps.shape();
    if t_len < MIN_OBS {
        return domain(format!("white-noise test needs T >= {MIN_OBS}, got {t_len}"));
    }
    if transforms.is_empty() {
        return domain("no transforms given");
    }
    if max_lag == 0 && n < 2 {
        return domain("max_lag = 0 leaves nothing to test for a scalar series");
    }
    if max_lag + 2 > t_len {
        return domain("max_lag too large for the sample");
    }
    if eps.iter().any(|v| !v.is_finite()) {
        return domain("series contains non-finite values");
    }

    // standardized transformed columns, [transform][component][t]
    let mut cols: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut used = Vec::new();
    let mut skipped = Vec::new();
    'tr: for tr in transforms {
        let mut per_comp = Vec::with_capacity(n);
        for i in 0..n {
            let v: Vec<f64> = eps.column(i).iter().map(|x| tr.apply(*x)).collect();
            if v.iter().any(|x| !x.is_finite()) {
                skipped.push(format!("{} (overflow)", tr.label));
                continue 'tr;
            }
            if is_constant(&v) {
                return domain(format!("transform {} is constant on component {}", tr.label, i + 1));
            }
            let mean = v.iter().sum::<f64>() / t_len as f64;
            let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / t_len as f64).sqrt();
            per_comp.push(v.iter().map(|x| (x - mean) / sd).collect::<Vec<f64>>());
        }
        cols.push(per_comp);
        used.push(*tr);
    }
    if cols.is_empty() {
        return domain("every transform overflowed");
    }
    let nt = cols.len();
    let mut terms = Vec::new();
    for ta in 0..nt {
        for tb in 0..nt {
            for k in 0..=max_lag {
                for i in 0..n {
                    for j in 0..n {
                        if k == 0 && i >= j {
                            continue;
                        }
                        terms.push(Term { ta, tb, i, j, k });
                    }
                }
            }
        }
    }
    let q = |c: &Vec<Vec<Vec<f64>>>| -> f64 {
        let mut s = 0.0;
        for term in &terms {
            let x = &c[term.ta][term.i];
            let y = &c[term.tb][term.j];
            let mut acc = 0.0;
            for t in term.k..t_len {
                acc += x[t] * y[t - term.k];
            }
            let r = acc / t_len as f64;
            s += r * r;
        }
        t_len as f64 * s
    };
    let statistic = q(&cols);
    let null: Vec<f64> = (0..resampling.replicates)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::rng_at(resampling.seed, rng::stream_id(Domain::Resample, b as u64), 0);
            let mut permuted = cols.clone();
            for i in 0..n {
                let mut perm: Vec<usize> = (0..t_len).collect();
                rng::shuffle(&mut r, &mut perm);
                for (ti, per_comp) in permuted.iter_mut().enumerate() {
                    let src = &cols[ti][i];
                    for (t, p) in perm.iter().enumerate() {
                        per_comp[i][t] = src[*p];
                    }
                }
            }
            q(&permuted)
        })
        .collect();
    let p_value = resampled_p_value(statistic, &null);
    Ok(TestReport {
        test: "strong_white_noise".into(),
        statistic,
        p_value,
        level,
        reject: p_value <= level,
        n_obs: t_len,
        dictionary: used.iter().map(|t| t.label.to_string()).collect(),
        resamples: resampling.replicates,
        skipped,
        details: vec![Detail {
            label: format!("lags 1..{max_lag}, {} correlations", terms.len()),
            statistic,
            p_value: Some(p_value),
        }],
    })
}

fn covariance(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    let n = x.ncols();
    let m = rows.len() as f64;
    let mut mean = vec![0.0; n];
    for &r in rows {
        for j in 0..n {
            mean[j] += x[(r, j)];
        }
    }
    for v in &mut mean {
        *v /= m;
    }
    let mut cov = DMatrix::zeros(n, n);
    for &r in rows {
        for i in 0..n {
            let di = x[(r, i)] - mean[i];
            for j in 0..n {
                cov[(i, j)] += di * (x[(r, j)] - mean[j]);
            }
        }
    }
    cov / (m - 1.0)
}

/// Two-sample check that `before` and `after` share a distribution:
/// per-marginal KS tests and a permutation test on the Frobenius distance
/// between sample covariances, combined by Bonferroni.
pub fn distribution_invariance_test(
    before: &DMatrix<f64>,
    after: &DMatrix<f64>,
    level: f64,
    resampling: Resampling,
) -> Result<TestReport> {
    check_level(level)?;
    resampling.check()?;
    let n = before.ncols();
    if after.ncols() != n || before.nrows() < 2 || after.nrows() < 2 {
        return domain("samples need the same width and at least two rows");
    }
    if before.iter().chain(after.iter()).any(|v| !v.is_finite()) {
        return domain("samples contain non-finite values");
    }
    let mut details = Vec::new();
    for j in 0..n {
        let a: Vec<f64> = before.column(j).iter().copied().collect();
        let b: Vec<f64> = after.column(j).iter().copied().collect();
        let ks = ks_two_sample(&a, &b)?;
        details.push(Detail {
            label: format!("KS marginal {}", j + 1),
            statistic: ks.statistic,
            p_value: Some(ks.p_value),
        });
    }
    let (m1, m2) = (before.nrows(), after.nrows());
    let pooled = DMatrix::from_fn(m1 + m2, n, |r, c| if r < m1 { before[(r, c)] } else { after[(r - m1, c)] });
    let all: Vec<usize> = (0..m1 + m2).collect();
    let dist = |rows: &[usize]| (covariance(&pooled, &rows[..m1]) - covariance(&pooled, &rows[m1..])).norm();
    let observed = dist(&all);
    let null: Vec<f64> = (0..resampling.replicates)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::rng_at(resampling.seed, rng::stream_id(Domain::Resample, b as u64), 0);
            let mut perm = all.clone();
            rng::shuffle(&mut r, &mut perm);
            dist(&perm)
        })
        .collect();
    let p_cov = resampled_p_value(observed, &null);
    details.push(Detail {
        label: "covariance distance".into(),
        statistic: observed,
        p_value: Some(p_cov),
    });
    let tests = details.len() as f64;
    let p_min = details.iter().filter_map(|d| d.p_value).fold(1.0, f64::min);
    let p_value = (tests * p_min).min(1.0);
    let statistic = details[..n].iter().map(|d| d.statistic).fold(0.0, f64::max);
    Ok(TestReport {
        test: "distribution_invariance".into(),
        statistic,
        p_value,
        level,
        reject: p_value <= level,
        n_obs: m1 + m2,
        dictionary: vec!["KS per marginal".into(), "covariance distance".into()],
        resamples: resampling.replicates,
        skipped: Vec::new(),
        details,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::NormalStream;

    #[test]
    fn kolmogorov_reference_values() {
        // classic critical values of the limiting distribution
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_sf(1.1380) - 0.15).abs() < 1e-3);
        // both branches agree where they meet
        assert!((kolmogorov_sf(1.1799999) - kolmogorov_sf(1.18)).abs() < 1e-6);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ks_examples() {
        let z = NormalStream::new(1, Domain::Auxiliary, 0).draw(0, 2000);
        assert!(ks_normal(&z).unwrap().p_value > 0.01);
        let shifted: Vec<f64> = z.iter().map(|v| v + 0.5).collect();
        assert!(ks_normal(&shifted).unwrap().p_value < 1e-6);
        let r = ks_two_sample(&z, &z).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!((ks_one_sample(&[0.5], |u| u).unwrap().statistic - 0.5).abs() < 1e-15);
    }

    #[test]
    fn markov_input_validation() {
        let y = NormalStream::new(2, Domain::Auxiliary, 0).matrix(0, 200, 1);
        let res = Resampling::new(49, 1);
        assert!(markov_test(&y, &[], 0.05, res).is_err());
        let constant = MarkovTriple::scalar(crate::transforms::CONSTANT, IDENTITY, IDENTITY);
        assert!(markov_test(&y, &[constant], 0.05, res).is_err());
        let short = y.rows(0, 20).clone_owned();
        assert!(markov_test(&short, &default_markov_dictionary(1), 0.05, res).is_err());
        let r = markov_test(&y, &default_markov_dictionary(1), 0.05, res).unwrap();
        assert!((0.0..=1.0).contains(&r.p_value));
        assert_eq!(r.reject, r.p_value <= 0.05);
    }

    #[test]
    fn markov_overflow_is_skipped() {
        let y = NormalStream::new(3, Domain::Auxiliary, 0).matrix(0, 200, 1) * 1e100;
        let mut dict = default_markov_dictionary(1);
        dict.push(MarkovTriple::scalar(crate::transforms::CUBE, crate::transforms::FOURTH, IDENTITY));
        let r = markov_test(&y, &dict, 0.05, Resampling::new(49, 1)).unwrap();
        // x^3 overflows outright; x^2 x^2 x overflows in the product
        assert!(r.skipped.iter().any(|s| s.starts_with("a=x^3")));
        assert!(r.skipped.iter().any(|s| s.starts_with("a=x^2(y1_t) b=x^2")));
        assert!(r.dictionary.iter().any(|s| s.starts_with("a=x(y1_t) b=x(")));
    }

    #[test]
    fn reports_are_seed_reproducible() {
        let y = NormalStream::new(4, Domain::Auxiliary, 0).matrix(0, 300, 2);
        let res = Resampling::new(49, 9);
        let a = strong_white_noise_test(&y, &[IDENTITY, SQUARE], 2, 0.05, res).unwrap();
        let b = strong_white_noise_test(&y, &[IDENTITY, SQUARE], 2, 0.05, res).unwrap();
        assert_eq!(a, b);
        let m1 = markov_test(&y, &default_markov_dictionary(2), 0.05, res).unwrap();
        let m2 = markov_test(&y, &default_markov_dictionary(2), 0.05, res).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn dictionary_relabeling_does_not_change_the_statistic() {
        let y = NormalStream::new(5, Domain::Auxiliary, 0).matrix(0, 300, 1);
        let res = Resampling::new(49, 2);
        let dict = default_markov_dictionary(1);
        let mut rev = dict.clone();
        rev.reverse();
        let a = markov_test(&y, &dict, 0.05, res).unwrap();
        let b = markov_test(&y, &rev, 0.05, res).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-9 * a.statistic.max(1.0));
        let w1 = strong_white_noise_test(&y, &[IDENTITY, SQUARE], 3, 0.05, res).unwrap();
        let w2 = strong_white_noise_test(&y, &[SQUARE, IDENTITY], 3, 0.05, res).unwrap();
        assert!((w1.statistic - w2.statistic).abs() < 1e-9 * w1.statistic.max(1.0));
    }

    #[test]
    fn invariance_examples() {
        let a = NormalStream::new(6, Domain::Auxiliary, 0).matrix(0, 10_000, 1);
        let res = Resampling::new(99, 3);
        assert!(!distribution_invariance_test(&a, &a, 0.05, res).unwrap().reject);
        let b = NormalStream::new(6, Domain::Auxiliary, 1).matrix(0, 10_000, 1).add_scalar(0.5);
        assert!(distribution_invariance_test(&a, &b, 0.05, res).unwrap().reject);
    }
}
