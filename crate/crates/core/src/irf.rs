//! Impulse responses by common random numbers.
//!
//! Index 0 of every term structure is the impact period: for innovation
//! shocks it is `g(y, eps + delta) - g(y, eps)`, for observable shocks it is
//! `Delta` itself.

use crate::error::{check_dim, domain, Error, Result};
use crate::model::{check_diverged, ModelSpec};
use crate::plot::{Panel, Series, PALETTE};
use crate::rng::{Domain, NormalStream};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

pub const DEFAULT_REPLICATES: usize = 10_000;
pub const DEGENERATE_DIRECTION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockKind {
    /// `delta`, added to the innovation at the impact date.
    InnovationDelta,
    /// `Delta`, added to the observed state.
    ObservableDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockSpec {
    pub kind: ShockKind,
    pub vector: Vec<f64>,
    pub horizon: usize,
}

impl ShockSpec {
    pub fn innovation(vector: Vec<f64>, horizon: usize) -> Result<Self> {
        Self::checked(ShockKind::InnovationDelta, vector, horizon)
    }

    pub fn observable(vector: Vec<f64>, horizon: usize) -> Result<Self> {
        Self::checked(ShockKind::ObservableDelta, vector, horizon)
    }

    fn checked(kind: ShockKind, vector: Vec<f64>, horizon: usize) -> Result<Self> {
        let s = Self { kind, vector, horizon };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vector.is_empty() || self.vector.iter().any(|v| !v.is_finite()) {
            return domain("shock vector must be non-empty and finite");
        }
        Ok(())
    }

    fn expect(&self, kind: ShockKind, n: usize) -> Result<()> {
        self.validate()?;
        if self.kind != kind {
            return domain(format!("expected a {kind:?} shock, got {:?}", self.kind));
        }
        check_dim(n, self.vector.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrfKind {
    SingleDraw,
    EirfMean,
    /// `per_horizon` holds the variances; full matrices in `covariances`.
    CirfCov,
    PirfSingle,
    PirfMean,
    FactorMean,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrfResult {
    /// `(H + 1) x n`.
    pub per_horizon: DMatrix<f64>,
    pub kind: IrfKind,
    pub mc_stderr: Option<DMatrix<f64>>,
    pub n_replicates: usize,
    pub conditioning_state: Vec<f64>,
    /// CIRF only: one `(H + 1) x (H + 1)` covariance per component.
    pub covariances: Option<Vec<DMatrix<f64>>>,
}

impl IrfResult {
    fn deterministic(per_horizon: DMatrix<f64>, kind: IrfKind, state: &[f64]) -> Self {
        Self {
            per_horizon,
            kind,
            mc_stderr: None,
            n_replicates: 1,
            conditioning_state: state.to_vec(),
            covariances: None,
        }
    }

    pub fn horizon(&self) -> usize {
        self.per_horizon.nrows().saturating_sub(1)
    }

    /// `h,component,value,stderr`, components counted from 1, stderr left
    /// empty when not applicable.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,component,value,stderr\n");
        for h in 0..self.per_horizon.nrows() {
            for j in 0..self.per_horizon.ncols() {
                let se = self
                    .mc_stderr
                    .as_ref()
                    .map(|s| s[(h, j)].to_string())
                    .unwrap_or_default();
                out.push_str(&format!("{},{},{},{}\n", h, j + 1, self.per_horizon[(h, j)], se));
            }
        }
        out
    }

    /// Term-structure plot, one line per component, with +-2 stderr bands
    /// when available.
    pub fn to_svg(&self, title: &str) -> String {
        let mut panel = Panel::new(title);
        panel.zero_line = true;
        for j in 0..self.per_horizon.ncols() {
            let color = PALETTE[j % PALETTE.len()];
            let pts = (0..self.per_horizon.nrows())
                .map(|h| [h as f64, self.per_horizon[(h, j)]])
                .collect();
            panel.series.push(Series::new(format!("y{}", j + 1), color, pts));
            if let Some(se) = &self.mc_stderr {
                for sign in [-2.0, 2.0] {
                    let band = (0..self.per_horizon.nrows())
                        .map(|h| [h as f64, self.per_horizon[(h, j)] + sign * se[(h, j)]])
                        .collect();
                    panel.series.push(Series::new("", color, band).thin(0.5));
                }
            }
        }
        panel.render()
    }
}

fn row_vec(m: &DMatrix<f64>, t: usize) -> Vec<f64> {
    m.row(t).iter().copied().collect()
}

/// Advances `y` along rows `from..` of `eps`, writing states into `out`
/// starting at row `out_start`.
fn advance(
    model: &ModelSpec,
    y: &[f64],
    eps: &DMatrix<f64>,
    from: usize,
    out: &mut DMatrix<f64>,
    out_start: usize,
) -> Result<()> {
    let n = model.n();
    let mut prev = y.to_vec();
    let mut next = vec![0.0; n];
    let mut e = vec![0.0; n];
    for (k, t) in (from..eps.nrows()).enumerate() {
        for j in 0..n {
            e[j] = eps[(t, j)];
        }
        model.step_into(&prev, &e, &mut next);
        check_diverged(&next, t)?;
        for j in 0..n {
            out[(out_start + k, j)] = next[j];
        }
        std::mem::swap(&mut prev, &mut next);
    }
    Ok(())
}

fn check_state(model: &ModelSpec, y: &[f64]) -> Result<()> {
    check_dim(model.n(), y.len())?;
    if y.iter().any(|v| !v.is_finite()) {
        return domain("conditioning state must be finite");
    }
    Ok(())
}

/// Baseline and perturbed paths from `y_prev` sharing every innovation
/// except the impact one, which is shifted by `delta`.
pub fn irf_paths(
    model: &ModelSpec,
    y_prev: &[f64],
    eps_stream: &DMatrix<f64>,
    shock: &ShockSpec,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = model.n();
    check_state(model, y_prev)?;
    shock.expect(ShockKind::InnovationDelta, n)?;
    check_dim(n, eps_stream.ncols())?;
    if eps_stream.nrows() != shock.horizon + 1 {
        return domain(format!(
            "eps_stream needs H + 1 = {} rows, got {}",
            shock.horizon + 1,
            eps_stream.nrows()
        ));
    }
    let baseline = model.run_path(y_prev, eps_stream)?;
    let mut shocked = eps_stream.clone();
    for j in 0..n {
        shocked[(0, j)] += shock.vector[j];
    }
    let perturbed = model.run_path(y_prev, &shocked)?;
    Ok((baseline, perturbed))
}

/// One stochastic IRF for a given innovation stream.
pub fn irf_single(
    model: &ModelSpec,
    y_prev: &[f64],
    eps_stream: &DMatrix<f64>,
    shock: &ShockSpec,
) -> Result<IrfResult> {
    let (baseline, perturbed) = irf_paths(model, y_prev, eps_stream, shock)?;
    Ok(IrfResult::deterministic(perturbed - baseline, IrfKind::SingleDraw, y_prev))
}

/// Innovation stream of replicate `r`: `(H + 1) x n` standard normals.
pub fn replicate_stream(seed: u64, r: usize, rows: usize, n: usize) -> DMatrix<f64> {
    NormalStream::new(seed, Domain::Replicate, r as u64).matrix(0, rows, n)
}

fn check_replicates(n_replicates: usize) -> Result<()> {
    if n_replicates < 2 {
        return domain("need at least 2 replicates");
    }
    Ok(())
}

/// Runs `f` on every replicate index in parallel and returns the results in
/// replicate order, so reductions are independent of scheduling.
fn replicates<T, F>(n_replicates: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n_replicates).into_par_iter().map(f).collect()
}

/// Replicate mean and standard error of the mean.
fn mean_and_stderr(draws: &[DMatrix<f64>]) -> (DMatrix<f64>, DMatrix<f64>) {
    let r = draws.len() as f64;
    let (rows, cols) = draws[0].shape();
    let mut mean = DMatrix::zeros(rows, cols);
    for d in draws {
        mean += d;
    }
    mean /= r;
    let mut ss = DMatrix::zeros(rows, cols);
    for d in draws {
        let c = d - &mean;
        ss += c.component_mul(&c);
    }
    let stderr = ss.map(|v| (v / (r - 1.0) / r).sqrt());
    (mean, stderr)
}

fn irf_draws(
    model: &ModelSpec,
    y_prev: &[f64],
    shock: &ShockSpec,
    n_replicates: usize,
    seed: u64,
) -> Result<Vec<DMatrix<f64>>> {
    check_replicates(n_replicates)?;
    check_state(model, y_prev)?;
    shock.expect(ShockKind::InnovationDelta, model.n())?;
    let rows = shock.horizon + 1;
    replicates(n_replicates, |r| {
        let eps = replicate_stream(seed, r, rows, model.n());
        irf_single(model, y_prev, &eps, shock).map(|res| res.per_horizon)
    })
}

/// Monte Carlo conditional mean of the IRF given `y_prev`.
pub fn eirf(
    model: &ModelSpec,
    y_prev: &[f64],
    shock: &ShockSpec,
    n_replicates: usize,
    seed: u64,
) -> Result<IrfResult> {
    let draws = irf_draws(model, y_prev, shock, n_replicates, seed)?;
    let (mean, stderr) = mean_and_stderr(&draws);
    Ok(IrfResult {
        per_horizon: mean,
        kind: IrfKind::EirfMean,
        mc_stderr: Some(stderr),
        n_replicates,
        conditioning_state: y_prev.to_vec(),
        covariances: None,
    })
}

/// Across-horizon conditional covariance of the IRF, per component, from
/// the same replicate draws as [`eirf`].
pub fn cirf(
    model: &ModelSpec,
    y_prev: &[f64],
    shock: &ShockSpec,
    n_replicates: usize,
    seed: u64,
) -> Result<IrfResult> {
    let draws = irf_draws(model, y_prev, shock, n_replicates, seed)?;
    let (mean, _) = mean_and_stderr(&draws);
    let (rows, n) = mean.shape();
    let r = draws.len() as f64;
    let mut covs = vec![DMatrix::zeros(rows, rows); n];
    let mut c = DVector::zeros(rows);
    for d in &draws {
        for (j, cov) in covs.iter_mut().enumerate() {
            for h in 0..rows {
                c[h] = d[(h, j)] - mean[(h, j)];
            }
            cov.ger(1.0, &c, &c, 1.0);
        }
    }
    for cov in covs.iter_mut() {
        *cov /= r - 1.0;
        // exact symmetry regardless of accumulation order
        let sym = (&*cov + cov.transpose()) * 0.5;
        *cov = sym;
    }
    let variances = DMatrix::from_fn(rows, n, |h, j| covs[j][(h, h)]);
    Ok(IrfResult {
        per_horizon: variances,
        kind: IrfKind::CirfCov,
        mc_stderr: None,
        n_replicates,
        conditioning_state: y_prev.to_vec(),
        covariances: Some(covs),
    })
}

/// Pseudo-IRF: baseline from `y_t`, perturbed from `y_t + Delta`, both
/// driven by the `H x n` future innovations `eps_future`.
pub fn pirf_single(
    model: &ModelSpec,
    y_t: &[f64],
    shock: &ShockSpec,
    eps_future: &DMatrix<f64>,
) -> Result<IrfResult> {
    let n = model.n();
    check_state(model, y_t)?;
    shock.expect(ShockKind::ObservableDelta, n)?;
    check_dim(n, eps_future.ncols())?;
    let big_h = shock.horizon;
    if eps_future.nrows() != big_h {
        return domain(format!("eps_future needs H = {big_h} rows, got {}", eps_future.nrows()));
    }
    let shifted: Vec<f64> = y_t.iter().zip(&shock.vector).map(|(a, b)| a + b).collect();
    let mut base = DMatrix::zeros(big_h + 1, n);
    let mut pert = DMatrix::zeros(big_h + 1, n);
    for j in 0..n {
        base[(0, j)] = y_t[j];
        pert[(0, j)] = shifted[j];
    }
    advance(model, y_t, eps_future, 0, &mut base, 1)?;
    advance(model, &shifted, eps_future, 0, &mut pert, 1)?;
    let mut diff = pert - base;
    // impact difference is Delta by definition, not by floating subtraction
    for j in 0..n {
        diff[(0, j)] = shock.vector[j];
    }
    Ok(IrfResult::deterministic(diff, IrfKind::PirfSingle, y_t))
}

/// Monte Carlo `E[y_{t+h} | y_t + Delta] - E[y_{t+h} | y_t]` with common
/// random numbers.
pub fn pirf_expectation(
    model: &ModelSpec,
    y_t: &[f64],
    shock: &ShockSpec,
    n_replicates: usize,
    seed: u64,
) -> Result<IrfResult> {
    check_replicates(n_replicates)?;
    check_state(model, y_t)?;
    shock.expect(ShockKind::ObservableDelta, model.n())?;
    let draws = replicates(n_replicates, |r| {
        let eps = replicate_stream(seed, r, shock.horizon, model.n());
        pirf_single(model, y_t, shock, &eps).map(|res| res.per_horizon)
    })?;
    let (mean, stderr) = mean_and_stderr(&draws);
    Ok(IrfResult {
        per_horizon: mean,
        kind: IrfKind::PirfMean,
        mc_stderr: Some(stderr),
        n_replicates,
        conditioning_state: y_t.to_vec(),
        covariances: None,
    })
}

fn check_var_inputs(phi: &DMatrix<f64>, d: &DMatrix<f64>, v: &[f64]) -> Result<usize> {
    let n = phi.nrows();
    if phi.ncols() != n || d.shape() != (n, n) {
        return domain("Phi and D must be n x n");
    }
    check_dim(n, v.len())?;
    if phi.iter().chain(d.iter()).chain(v.iter()).any(|x| !x.is_finite()) {
        return domain("non-finite VAR input");
    }
    Ok(n)
}

/// Rows `Phi^h D delta`, `h = 0..H`.
pub fn var1_irf_closed_form(
    phi: &DMatrix<f64>,
    d: &DMatrix<f64>,
    delta: &[f64],
    horizon: usize,
) -> Result<DMatrix<f64>> {
    let n = check_var_inputs(phi, d, delta)?;
    let mut out = DMatrix::zeros(horizon + 1, n);
    let mut v = d * DVector::from_column_slice(delta);
    for h in 0..=horizon {
        out.set_row(h, &v.transpose());
        v = phi * v;
    }
    Ok(out)
}

/// Rows `(Id + Phi + ... + Phi^h) D delta`: the response of the cumulated
/// series, not of the level.
pub fn cumulated_irf(
    phi: &DMatrix<f64>,
    d: &DMatrix<f64>,
    delta: &[f64],
    horizon: usize,
) -> Result<DMatrix<f64>> {
    let mut out = var1_irf_closed_form(phi, d, delta, horizon)?;
    for h in 1..=horizon {
        let prev = out.row(h - 1).clone_owned();
        let mut row = out.row_mut(h);
        row += prev;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxIrf {
    pub value: f64,
    pub delta_star: Vec<f64>,
}

/// `max_{|delta| = 1} a' Phi^h D delta = |D' Phi'^h a|`, attained at the
/// normalised `D' Phi'^h a`.
pub fn max_irf(phi: &DMatrix<f64>, d: &DMatrix<f64>, a: &[f64], h: usize) -> Result<MaxIrf> {
    let n = check_var_inputs(phi, d, a)?;
    if a.iter().all(|v| *v == 0.0) {
        return domain("a must be non-zero");
    }
    let mut v = DVector::from_column_slice(a);
    let phi_t = phi.transpose();
    for _ in 0..h {
        v = &phi_t * v;
    }
    let v = d.transpose() * v;
    let norm = v.norm();
    if norm < DEGENERATE_DIRECTION {
        return Err(Error::DegenerateDirection { norm });
    }
    debug_assert_eq!(v.len(), n);
    Ok(MaxIrf {
        value: norm,
        delta_star: v.iter().map(|x| x / norm).collect(),
    })
}

/// Map from independent sources to observables.
#[derive(Clone)]
pub enum Mixing {
    Linear(DMatrix<f64>),
    Nonlinear {
        label: String,
        n_in: usize,
        n_out: usize,
        f: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    },
}

impl fmt::Debug for Mixing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mixing::Linear(a) => f.debug_tuple("Linear").field(a).finish(),
            Mixing::Nonlinear { label, .. } => write!(f, "Nonlinear({label})"),
        }
    }
}

impl Mixing {
    /// `x -> x^3` componentwise.
    pub fn componentwise_cube(n: usize) -> Self {
        Mixing::Nonlinear {
            label: "componentwise cube".into(),
            n_in: n,
            n_out: n,
            f: Arc::new(|x| x.iter().map(|v| v * v * v).collect()),
        }
    }

    pub fn n_in(&self) -> usize {
        match self {
            Mixing::Linear(a) => a.ncols(),
            Mixing::Nonlinear { n_in, .. } => *n_in,
        }
    }

    pub fn n_out(&self) -> usize {
        match self {
            Mixing::Linear(a) => a.nrows(),
            Mixing::Nonlinear { n_out, .. } => *n_out,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Mixing::Linear(a) => (a * DVector::from_column_slice(x)).iter().copied().collect(),
            Mixing::Nonlinear { f, .. } => f(x),
        }
    }
}

/// Observable IRF of `y = A(x)` when each scalar source `x_j` follows its
/// own model and receives its own innovation shock `delta_j`.
pub fn factor_irf(
    mixing: &Mixing,
    sources: &[ModelSpec],
    x_prev: &[f64],
    shock: &ShockSpec,
    n_replicates: usize,
    seed: u64,
) -> Result<IrfResult> {
    let k = sources.len();
    if k == 0 || mixing.n_in() != k {
        return domain(format!("mixing expects {} sources, got {k}", mixing.n_in()));
    }
    if sources.iter().any(|m| m.n() != 1) {
        return domain("factor sources must be scalar models");
    }
    check_dim(k, x_prev.len())?;
    shock.expect(ShockKind::InnovationDelta, k)?;
    check_replicates(n_replicates)?;
    let rows = shock.horizon + 1;
    let m = mixing.n_out();
    let draws = replicates(n_replicates, |r| {
        let eps = replicate_stream(seed, r, rows, k);
        let mut base_x = DMatrix::zeros(rows, k);
        let mut pert_x = DMatrix::zeros(rows, k);
        for (j, model) in sources.iter().enumerate() {
            let col = DMatrix::from_column_slice(rows, 1, eps.column(j).as_slice());
            let delta = ShockSpec {
                kind: ShockKind::InnovationDelta,
                vector: vec![shock.vector[j]],
                horizon: shock.horizon,
            };
            let (b, p) = irf_paths(model, &x_prev[j..=j], &col, &delta)?;
            base_x.set_column(j, &b.column(0));
            pert_x.set_column(j, &p.column(0));
        }
        let mut diff = DMatrix::zeros(rows, m);
        for h in 0..rows {
            let yb = mixing.apply(&row_vec(&base_x, h));
            let yp = mixing.apply(&row_vec(&pert_x, h));
            for i in 0..m {
                diff[(h, i)] = yp[i] - yb[i];
            }
        }
        Ok(diff)
    })?;
    let (mean, stderr) = mean_and_stderr(&draws);
    Ok(IrfResult {
        per_horizon: mean,
        kind: IrfKind::FactorMean,
        mc_stderr: Some(stderr),
        n_replicates,
        conditioning_state: x_prev.to_vec(),
        covariances: None,
    })
}

/// Closed-form result wrapper, handy for exporting the VAR benchmark.
pub fn closed_form_result(per_horizon: DMatrix<f64>, state: &[f64]) -> IrfResult {
    IrfResult::deterministic(per_horizon, IrfKind::ClosedForm, state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{zoo, Family};

    fn var_parts(m: &ModelSpec) -> (DMatrix<f64>, DMatrix<f64>) {
        match m.family() {
            Family::GaussianVar1 { phi, d } => (phi.clone(), d.clone()),
            _ => unreachable!(),
        }
    }

    #[test]
    fn zero_shock_gives_zero() {
        for m in zoo::all() {
            let n = m.n();
            let shock = ShockSpec::innovation(vec![0.0; n], 4).unwrap();
            let eps = replicate_stream(3, 0, 5, n);
            let r = irf_single(&m, &vec![0.3; n], &eps, &shock).unwrap();
            assert!(r.per_horizon.iter().all(|v| *v == 0.0));
            let e = eirf(&m, &vec![0.3; n], &shock, 20, 1).unwrap();
            assert!(e.per_horizon.iter().all(|v| *v == 0.0));
            assert!(e.mc_stderr.unwrap().iter().all(|v| *v == 0.0));
            let c = cirf(&m, &vec![0.3; n], &shock, 20, 1).unwrap();
            assert!(c.covariances.unwrap().iter().all(|m| m.iter().all(|v| *v == 0.0)));
            let obs = ShockSpec::observable(vec![0.0; n], 4).unwrap();
            let p = pirf_single(&m, &vec![0.3; n], &obs, &eps.rows(0, 4).clone_owned()).unwrap();
            assert!(p.per_horizon.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn var_irf_is_stream_independent_closed_form() {
        let m = zoo::gaussian_var1();
        let (phi, d) = var_parts(&m);
        let shock = ShockSpec::innovation(vec![1.0, -0.5], 6).unwrap();
        let closed = var1_irf_closed_form(&phi, &d, &shock.vector, 6).unwrap();
        for r in 0..10 {
            let eps = replicate_stream(9, r, 7, 2);
            let got = irf_single(&m, &[1.0, 2.0], &eps, &shock).unwrap();
            assert!((&got.per_horizon - &closed).abs().max() < 1e-10);
        }
        let c = cirf(&m, &[1.0, 2.0], &shock, 50, 4).unwrap();
        assert!(c.covariances.unwrap().iter().all(|m| m.abs().max() < 1e-20));
    }

    #[test]
    fn closed_form_examples() {
        let phi = DMatrix::identity(2, 2) * 0.5;
        let id = DMatrix::identity(2, 2);
        let out = var1_irf_closed_form(&phi, &id, &[1.0, 0.0], 2).unwrap();
        assert_eq!(out.row(2).iter().copied().collect::<Vec<_>>(), vec![0.25, 0.0]);
        let zero = DMatrix::zeros(2, 2);
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let out = var1_irf_closed_form(&zero, &d, &[1.0, 1.0], 3).unwrap();
        assert_eq!(out.row(0).iter().copied().collect::<Vec<_>>(), vec![1.5, 1.0]);
        assert!(out.rows(1, 3).iter().all(|v| *v == 0.0));
        let cum = cumulated_irf(&phi, &id, &[1.0, 0.0], 2).unwrap();
        assert_eq!(cum[(2, 0)], 1.75);
    }

    #[test]
    fn max_irf_examples() {
        let id = DMatrix::identity(2, 2);
        for h in 0..4 {
            let r = max_irf(&id, &id, &[1.0, 0.0], h).unwrap();
            assert!((r.value - 1.0).abs() < 1e-15);
            assert_eq!(r.delta_star, vec![1.0, 0.0]);
        }
        let r = max_irf(&(id.clone() * 0.5), &id, &[1.0, 1.0], 2).unwrap();
        assert!((r.value - 0.25 * 2f64.sqrt()).abs() < 1e-15);
        let s = 1.0 / 2f64.sqrt();
        assert!((r.delta_star[0] - s).abs() < 1e-15 && (r.delta_star[1] - s).abs() < 1e-15);
        assert!(matches!(
            max_irf(&DMatrix::zeros(2, 2), &id, &[1.0, 0.0], 1),
            Err(Error::DegenerateDirection { .. })
        ));
        assert!(max_irf(&id, &id, &[0.0, 0.0], 1).is_err());
    }

    #[test]
    fn threshold_crossing_jump() {
        // y_prev = 1 > 0: impact mean alpha = 2. Baseline eps = 0 gives y_t = 2
        // (upper regime next), delta = -5 gives y_t = -3 (lower regime next).
        let m = zoo::threshold_ar1();
        let eps = DMatrix::zeros(3, 1);
        let shock = ShockSpec::innovation(vec![-5.0], 2).unwrap();
        let r = irf_single(&m, &[1.0], &eps, &shock).unwrap();
        assert_eq!(r.per_horizon[(0, 0)], -5.0);
        // horizon 1: 0 + 0 - (2 + 0) = -2, the regime jump
        assert_eq!(r.per_horizon[(1, 0)], -2.0);
        // the shocked path sits at 0, which belongs to the lower regime
        assert_eq!(r.per_horizon[(2, 0)], -2.0);
    }

    #[test]
    fn baseline_matches_simulate_path() {
        let m = zoo::cond_gaussian();
        let traj = m.simulate_path(&[0.2, -0.1], 8, 77).unwrap();
        let eps = traj.innovations.clone().unwrap();
        let shock = ShockSpec::innovation(vec![1.0, 0.0], 7).unwrap();
        let (base, _) = irf_paths(&m, &[0.2, -0.1], &eps, &shock).unwrap();
        assert_eq!(base, traj.states);
    }

    #[test]
    fn irf_equals_pirf_on_the_zoo() {
        for m in zoo::all() {
            let n = m.n();
            for r in 0..10 {
                let eps = replicate_stream(5, r, 6, n);
                let y_prev = replicate_stream(6, r, 1, n).row(0).iter().copied().collect::<Vec<_>>();
                let delta: Vec<f64> = replicate_stream(7, r, 1, n).iter().copied().collect();
                let shock = ShockSpec::innovation(delta.clone(), 5).unwrap();
                let irf = irf_single(&m, &y_prev, &eps, &shock).unwrap();
                let e0: Vec<f64> = eps.row(0).iter().copied().collect();
                let e0d: Vec<f64> = e0.iter().zip(&delta).map(|(a, b)| a + b).collect();
                let y_t = m.transition_step(&y_prev, &e0).unwrap();
                let y_td = m.transition_step(&y_prev, &e0d).unwrap();
                let big_delta: Vec<f64> = y_td.iter().zip(&y_t).map(|(a, b)| a - b).collect();
                let obs = ShockSpec::observable(big_delta, 5).unwrap();
                let pirf = pirf_single(&m, &y_t, &obs, &eps.rows(1, 5).clone_owned()).unwrap();
                assert!((&irf.per_horizon - &pirf.per_horizon).abs().max() < 1e-10, "{}", m.tag());
            }
        }
    }

    #[test]
    fn replicate_results_do_not_depend_on_thread_count() {
        let m = zoo::dar1();
        let shock = ShockSpec::innovation(vec![2.0], 5).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| eirf(&m, &[2.0], &shock, 500, 11).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn linear_factor_irf_is_mixed_source_irf() {
        let ar = |rho: f64| ModelSpec::gaussian_var1(DMatrix::from_element(1, 1, rho), DMatrix::identity(1, 1)).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.3, 1.0]);
        let shock = ShockSpec::innovation(vec![1.0, -2.0], 4).unwrap();
        let r = factor_irf(&Mixing::Linear(a.clone()), &[ar(0.9), ar(0.2)], &[0.0, 0.0], &shock, 10, 1).unwrap();
        for h in 0..=4 {
            let x = DVector::from_vec(vec![0.9f64.powi(h as i32), -2.0 * 0.2f64.powi(h as i32)]);
            let y = &a * x;
            assert!((r.per_horizon[(h, 0)] - y[0]).abs() < 1e-12);
            assert!((r.per_horizon[(h, 1)] - y[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_layout() {
        let r = closed_form_result(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]), &[0.0, 0.0]);
        assert_eq!(r.to_csv(), "h,component,value,stderr\n0,1,1,\n0,2,2,\n1,1,3,\n1,2,4,\n");
    }
}
