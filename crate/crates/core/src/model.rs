//! Nonlinear autoregressive models `y_t = g(y_{t-1}; eps_t)` with
//! `eps_t ~ N(0, Id)`, and the model zoo used throughout the crate.
//!
//! Every family except multi-substep Euler diffusions is conditionally
//! Gaussian given `y_{t-1}`: `y_t | y_{t-1} ~ N(m(y_{t-1}), S(y_{t-1}))`.
//! The conditional CDFs of the recursive (Rosenblatt) construction are then
//! closed form once `S` is factored as `L L'` with `L` lower triangular in
//! the chosen component order.
//!
//! Component indices are zero-based throughout.

use crate::error::{check_dim, domain, Error, Result};
use crate::normal;
use crate::rng::{self, Domain, NormalStream};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Paths whose absolute value exceeds this are reported as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Default number of Euler substeps per unit of time.
pub const DEFAULT_SUBSTEPS: usize = 16;

/// Bisection tolerance of [`bracketed_quantile`].
pub const QUANTILE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `y_t = Phi y_{t-1} + D eps_t`.
    GaussianVar1 { phi: DMatrix<f64>, d: DMatrix<f64> },
    /// `y_t = gamma y_{t-1} + sqrt(alpha + beta y_{t-1}^2) eps_t`.
    Dar1 { gamma: f64, alpha: f64, beta: f64 },
    /// `y_t = Phi y_{t-1} + diag(h_t)^{1/2} eps_t`, `h_t = a + B (y_{t-1}^2)`.
    VectorDar {
        phi: DMatrix<f64>,
        a: DVector<f64>,
        b: DMatrix<f64>,
    },
    /// `y_t = alpha 1{y_{t-1} > 0} + sigma eps_t`.
    ThresholdAr1 { alpha: f64, sigma: f64 },
    /// `y_t = Phi y + Psi tanh(y) + diag(sqrt(1 + s y^2)) L0 eps_t`, with `L0`
    /// lower triangular with a positive diagonal.
    CondGaussian {
        phi: DMatrix<f64>,
        psi: DMatrix<f64>,
        l0: DMatrix<f64>,
        s: DVector<f64>,
    },
    /// Euler scheme for `dy = kappa (mu - y) dtau + diag(sqrt(s0^2 + s1^2 y^2)) dW`
    /// over one unit of time. The unit Brownian increment `eps_t` is spread
    /// evenly over `substeps` substeps.
    EulerDiffusion {
        kappa: DVector<f64>,
        mu: DVector<f64>,
        sigma0: DVector<f64>,
        sigma1: DVector<f64>,
        substeps: usize,
    },
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::GaussianVar1 { .. } => "gaussian_var1",
            Family::Dar1 { .. } => "dar1",
            Family::VectorDar { .. } => "vector_dar",
            Family::ThresholdAr1 { .. } => "threshold_ar1",
            Family::CondGaussian { .. } => "cond_gaussian",
            Family::EulerDiffusion { .. } => "euler_diffusion",
        }
    }
}

/// A validated model: dimension plus family parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDocument", into = "ModelDocument")]
pub struct ModelSpec {
    n: usize,
    family: Family,
}

/// Conditional law `N(mean, chol chol')` of `y_t` given `y_{t-1}`, with the
/// components listed in `order`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalGaussian {
    pub order: Vec<usize>,
    /// Conditional mean, permuted to `order`.
    pub mean: DVector<f64>,
    /// Lower-triangular factor of the permuted conditional covariance.
    pub chol: DMatrix<f64>,
}

impl ConditionalGaussian {
    /// Gaussianized scores `z` with `y[order] = mean + chol z`.
    pub fn scores(&self, y: &[f64]) -> Vec<f64> {
        let n = self.order.len();
        let mut z = vec![0.0; n];
        for k in 0..n {
            let mut acc = y[self.order[k]] - self.mean[k];
            for j in 0..k {
                acc -= self.chol[(k, j)] * z[j];
            }
            z[k] = acc / self.chol[(k, k)];
        }
        z
    }

    /// Inverse of [`scores`](Self::scores), in the original component order.
    pub fn states(&self, z: &[f64]) -> Vec<f64> {
        let n = self.order.len();
        let mut y = vec![0.0; n];
        for k in 0..n {
            let mut acc = self.mean[k];
            for j in 0..=k {
                acc += self.chol[(k, j)] * z[j];
            }
            y[self.order[k]] = acc;
        }
        y
    }

    /// Mean and standard deviation of the `k`-th ordered component given the
    /// scores of the earlier ones.
    pub fn component(&self, k: usize, earlier_scores: &[f64]) -> (f64, f64) {
        let mut m = self.mean[k];
        for (j, z) in earlier_scores.iter().enumerate().take(k) {
            m += self.chol[(k, j)] * z;
        }
        (m, self.chol[(k, k)])
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        domain(format!("{name} must be finite and > 0, got {v}"))
    }
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        domain(format!("{name} must be finite and >= 0, got {v}"))
    }
}

fn square(name: &str, m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return domain(format!(
            "{name} must be {n}x{n}, got {}x{}",
            m.nrows(),
            m.ncols()
        ));
    }
    if !all_finite(m.as_slice()) {
        return domain(format!("{name} has non-finite entries"));
    }
    Ok(())
}

fn vector(name: &str, v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return domain(format!("{name} must have length {n}, got {}", v.len()));
    }
    if !all_finite(v.as_slice()) {
        return domain(format!("{name} has non-finite entries"));
    }
    Ok(())
}

impl ModelSpec {
    pub fn new(n: usize, family: Family) -> Result<Self> {
        if n == 0 {
            return domain("state dimension must be >= 1");
        }
        match &family {
            Family::GaussianVar1 { phi, d } => {
                square("phi", phi, n)?;
                square("d", d, n)?;
                let det = d.determinant();
                let scale = d.abs().max().powi(n as i32);
                if det.abs() <= 1e3 * f64::EPSILON * scale.max(f64::MIN_POSITIVE) {
                    return domain(format!("d must be invertible (det = {det:e})"));
                }
            }
            Family::Dar1 { gamma, alpha, beta } => {
                if n != 1 {
                    return domain("dar1 is scalar (n = 1)");
                }
                if !gamma.is_finite() {
                    return domain("gamma must be finite");
                }
                positive("alpha", *alpha)?;
                nonneg("beta", *beta)?;
            }
            Family::VectorDar { phi, a, b } => {
                square("phi", phi, n)?;
                square("b", b, n)?;
                vector("a", a, n)?;
                for v in a.iter() {
                    positive("a", *v)?;
                }
                for v in b.iter() {
                    nonneg("b", *v)?;
                }
            }
            Family::ThresholdAr1 { alpha, sigma } => {
                if n != 1 {
                    return domain("threshold_ar1 is scalar (n = 1)");
                }
                if !alpha.is_finite() {
                    return domain("alpha must be finite");
                }
                positive("sigma", *sigma)?;
            }
            Family::CondGaussian { phi, psi, l0, s } => {
                square("phi", phi, n)?;
                square("psi", psi, n)?;
                square("l0", l0, n)?;
                vector("s", s, n)?;
                for i in 0..n {
                    positive("l0 diagonal", l0[(i, i)])?;
                    for j in i + 1..n {
                        if l0[(i, j)] != 0.0 {
                            return domain("l0 must be lower triangular");
                        }
                    }
                }
                for v in s.iter() {
                    nonneg("s", *v)?;
                }
            }
            Family::EulerDiffusion {
                kappa,
                mu,
                sigma0,
                sigma1,
                substeps,
            } => {
                vector("kappa", kappa, n)?;
                vector("mu", mu, n)?;
                vector("sigma0", sigma0, n)?;
                vector("sigma1", sigma1, n)?;
                for v in sigma0.iter() {
                    positive("sigma0", *v)?;
                }
                for v in sigma1.iter() {
                    nonneg("sigma1", *v)?;
                }
                if *substeps == 0 {
                    return domain("substeps must be >= 1");
                }
            }
        }
        Ok(Self { n, family })
    }

    pub fn gaussian_var1(phi: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        Self::new(phi.nrows(), Family::GaussianVar1 { phi, d })
    }

    pub fn dar1(gamma: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(1, Family::Dar1 { gamma, alpha, beta })
    }

    pub fn threshold_ar1(alpha: f64, sigma: f64) -> Result<Self> {
        Self::new(1, Family::ThresholdAr1 { alpha, sigma })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn tag(&self) -> &'static str {
        self.family.tag()
    }

    fn check_inputs(&self, y_prev: &[f64], eps: &[f64]) -> Result<()> {
        check_dim(self.n, y_prev.len())?;
        check_dim(self.n, eps.len())?;
        if !all_finite(y_prev) {
            return domain("y_prev must be finite");
        }
        if !all_finite(eps) {
            return domain("eps must be finite");
        }
        Ok(())
    }

    /// `g(y_prev; eps)`.
    pub fn transition_step(&self, y_prev: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
        self.check_inputs(y_prev, eps)?;
        let mut out = vec![0.0; self.n];
        self.step_into(y_prev, eps, &mut out);
        Ok(out)
    }

    /// Unchecked transition used on hot paths; inputs have the right length.
    pub(crate) fn step_into(&self, y: &[f64], eps: &[f64], out: &mut [f64]) {
        let n = self.n;
        match &self.family {
            Family::GaussianVar1 { phi, d } => {
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += phi[(i, j)] * y[j] + d[(i, j)] * eps[j];
                    }
                    out[i] = acc;
                }
            }
            Family::Dar1 { gamma, alpha, beta } => {
                out[0] = gamma * y[0] + (alpha + beta * y[0] * y[0]).sqrt() * eps[0];
            }
            Family::VectorDar { phi, a, b } => {
                for i in 0..n {
                    let mut mean = 0.0;
                    let mut h = a[i];
                    for j in 0..n {
                        mean += phi[(i, j)] * y[j];
                        h += b[(i, j)] * y[j] * y[j];
                    }
                    out[i] = mean + h.sqrt() * eps[i];
                }
            }
            Family::ThresholdAr1 { alpha, sigma } => {
                out[0] = threshold_mean(*alpha, y[0]) + sigma * eps[0];
            }
            Family::CondGaussian { phi, psi, l0, s } => {
                for i in 0..n {
                    let mut mean = 0.0;
                    let mut shock = 0.0;
                    for j in 0..n {
                        mean += phi[(i, j)] * y[j] + psi[(i, j)] * y[j].tanh();
                    }
                    for j in 0..=i {
                        shock += l0[(i, j)] * eps[j];
                    }
                    out[i] = mean + (1.0 + s[i] * y[i] * y[i]).sqrt() * shock;
                }
            }
            Family::EulerDiffusion {
                kappa,
                mu,
                sigma0,
                sigma1,
                substeps,
            } => {
                let dt = 1.0 / *substeps as f64;
                out.copy_from_slice(y);
                for _ in 0..*substeps {
                    for i in 0..n {
                        let x = out[i];
                        let vol = (sigma0[i] * sigma0[i] + sigma1[i] * sigma1[i] * x * x).sqrt();
                        out[i] = x + kappa[i] * (mu[i] - x) * dt + vol * eps[i] * dt;
                    }
                }
            }
        }
    }

    /// Conditional law of `y_t` given `y_prev` with components in `order`.
    pub fn conditional_gaussian_ordered(
        &self,
        y_prev: &[f64],
        order: &[usize],
    ) -> Result<ConditionalGaussian> {
        check_dim(self.n, y_prev.len())?;
        check_order(self.n, order)?;
        if !all_finite(y_prev) {
            return domain("y_prev must be finite");
        }
        let n = self.n;
        let zeros = vec![0.0; n];
        let mut mean_nat = vec![0.0; n];
        // conditional mean is g(y, 0) for every location-scale family here
        let (cov_nat, lower_nat): (Option<DMatrix<f64>>, Option<DMatrix<f64>>) = match &self
            .family
        {
            Family::GaussianVar1 { d, .. } => (Some(d * d.transpose()), None),
            Family::Dar1 { alpha, beta, .. } => {
                let sd = (alpha + beta * y_prev[0] * y_prev[0]).sqrt();
                (None, Some(DMatrix::from_element(1, 1, sd)))
            }
            Family::VectorDar { a, b, .. } => {
                let mut l = DMatrix::zeros(n, n);
                for i in 0..n {
                    let mut h = a[i];
                    for j in 0..n {
                        h += b[(i, j)] * y_prev[j] * y_prev[j];
                    }
                    l[(i, i)] = h.sqrt();
                }
                (None, Some(l))
            }
            Family::ThresholdAr1 { sigma, .. } => (None, Some(DMatrix::from_element(1, 1, *sigma))),
            Family::CondGaussian { l0, s, .. } => {
                let mut l = l0.clone();
                for i in 0..n {
                    let scale = (1.0 + s[i] * y_prev[i] * y_prev[i]).sqrt();
                    for j in 0..=i {
                        l[(i, j)] *= scale;
                    }
                }
                (None, Some(l))
            }
            Family::EulerDiffusion {
                sigma0,
                sigma1,
                substeps,
                ..
            } => {
                if *substeps != 1 {
                    return Err(Error::UnsupportedFamily {
                        family: "euler_diffusion",
                        operation: "closed-form conditional law with more than one substep",
                    });
                }
                let mut l = DMatrix::zeros(n, n);
                for i in 0..n {
                    let x = y_prev[i];
                    l[(i, i)] = (sigma0[i] * sigma0[i] + sigma1[i] * sigma1[i] * x * x).sqrt();
                }
                (None, Some(l))
            }
        };
        self.step_into(y_prev, &zeros, &mut mean_nat);

        let identity_order = order.iter().enumerate().all(|(k, &i)| k == i);
        let chol = match (lower_nat, identity_order) {
            (Some(l), true) => l,
            (lower, _) => {
                let cov = match (cov_nat, lower) {
                    (Some(c), _) => c,
                    (None, Some(l)) => &l * l.transpose(),
                    (None, None) => unreachable!(),
                };
                let permuted = DMatrix::from_fn(n, n, |r, c| cov[(order[r], order[c])]);
                let chol = nalgebra::Cholesky::new(permuted).ok_or_else(|| {
                    Error::InputDomain("conditional covariance is not positive definite".into())
                })?;
                chol.l()
            }
        };
        for k in 0..n {
            if !(chol[(k, k)] > 0.0) {
                return domain("zero conditional variance");
            }
        }
        let mean = DVector::from_fn(n, |k, _| mean_nat[order[k]]);
        Ok(ConditionalGaussian {
            order: order.to_vec(),
            mean,
            chol,
        })
    }

    /// Conditional law in natural component order.
    pub fn conditional_gaussian(&self, y_prev: &[f64]) -> Result<ConditionalGaussian> {
        let order: Vec<usize> = (0..self.n).collect();
        self.conditional_gaussian_ordered(y_prev, &order)
    }

    fn component_law(&self, i: usize, prefix: &[f64], y_prev: &[f64]) -> Result<(f64, f64)> {
        if i >= self.n {
            return domain(format!("component index {i} out of range 0..{}", self.n));
        }
        check_dim(i, prefix.len())?;
        if !all_finite(prefix) {
            return domain("prefix must be finite");
        }
        let law = self.conditional_gaussian(y_prev)?;
        let mut padded = prefix.to_vec();
        padded.resize(self.n, 0.0);
        let z = law.scores(&padded);
        Ok(law.component(i, &z[..i]))
    }

    /// `F_i(y_i | y_{0..i}, y_prev)`: CDF of component `i` given the earlier
    /// components at the same date and the lagged state.
    pub fn conditional_cdf(&self, i: usize, y_i: f64, prefix: &[f64], y_prev: &[f64]) -> Result<f64> {
        if y_i.is_nan() {
            return domain("y_i is NaN");
        }
        let (m, s) = self.component_law(i, prefix, y_prev)?;
        Ok(normal::cdf((y_i - m) / s))
    }

    /// Inverse of [`conditional_cdf`](Self::conditional_cdf) in `y_i`.
    pub fn conditional_quantile(
        &self,
        i: usize,
        u: f64,
        prefix: &[f64],
        y_prev: &[f64],
    ) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return domain(format!("probability must lie in (0, 1), got {u}"));
        }
        let (m, s) = self.component_law(i, prefix, y_prev)?;
        Ok(m + s * normal::quantile(u))
    }

    /// Simulates `t_len` steps from `y0` with draws from the `(seed, t)`
    /// counter stream. Row `t` of the result holds `y_{t+1}`.
    pub fn simulate_path(&self, y0: &[f64], t_len: usize, seed: u64) -> Result<Trajectory> {
        check_dim(self.n, y0.len())?;
        if t_len == 0 {
            return domain("path length must be >= 1");
        }
        if !all_finite(y0) {
            return domain("y0 must be finite");
        }
        let stream = NormalStream::new(seed, Domain::Path, 0);
        let n = self.n;
        let mut states = DMatrix::zeros(t_len, n);
        let mut innovations = DMatrix::zeros(t_len, n);
        let mut prev = y0.to_vec();
        let mut eps = vec![0.0; n];
        let mut next = vec![0.0; n];
        for t in 0..t_len {
            stream.fill(t as u64, &mut eps);
            self.step_into(&prev, &eps, &mut next);
            check_diverged(&next, t)?;
            for j in 0..n {
                states[(t, j)] = next[j];
                innovations[(t, j)] = eps[j];
            }
            std::mem::swap(&mut prev, &mut next);
        }
        Ok(Trajectory {
            states,
            y0: y0.to_vec(),
            seed: Some(seed),
            innovations: Some(innovations),
        })
    }

    /// Iterates the transition along a given innovation matrix.
    pub fn run_path(&self, y0: &[f64], eps: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.n, y0.len())?;
        check_dim(self.n, eps.ncols())?;
        let n = self.n;
        let mut states = DMatrix::zeros(eps.nrows(), n);
        let mut prev = y0.to_vec();
        let mut e = vec![0.0; n];
        let mut next = vec![0.0; n];
        for t in 0..eps.nrows() {
            for j in 0..n {
                e[j] = eps[(t, j)];
            }
            self.step_into(&prev, &e, &mut next);
            check_diverged(&next, t)?;
            for j in 0..n {
                states[(t, j)] = next[j];
            }
            std::mem::swap(&mut prev, &mut next);
        }
        Ok(states)
    }
}

pub(crate) fn check_diverged(y: &[f64], t: usize) -> Result<()> {
    if y.iter().all(|v| v.abs() <= DIVERGENCE_THRESHOLD) {
        Ok(())
    } else {
        Err(Error::Diverged {
            t,
            threshold: DIVERGENCE_THRESHOLD,
        })
    }
}

pub(crate) fn check_order(n: usize, order: &[usize]) -> Result<()> {
    check_dim(n, order.len())?;
    let mut seen = vec![false; n];
    for &i in order {
        if i >= n || seen[i] {
            return domain(format!("{order:?} is not a permutation of 0..{n}"));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Regime mean of the threshold model; `y = 0` falls in the lower regime.
fn threshold_mean(alpha: f64, y: f64) -> f64 {
    if y > 0.0 {
        alpha
    } else {
        0.0
    }
}

/// A simulated or observed path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `T x n`; row `t` is the state following row `t - 1` (row 0 follows `y0`).
    pub states: DMatrix<f64>,
    pub y0: Vec<f64>,
    pub seed: Option<u64>,
    /// Gaussian innovations that generated `states`, when known.
    pub innovations: Option<DMatrix<f64>>,
}

impl Trajectory {
    pub fn from_states(y0: Vec<f64>, states: DMatrix<f64>) -> Self {
        Self {
            states,
            y0,
            seed: None,
            innovations: None,
        }
    }

    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.nrows() == 0
    }

    /// State preceding row `t`.
    pub fn previous(&self, t: usize) -> Vec<f64> {
        if t == 0 {
            self.y0.clone()
        } else {
            self.states.row(t - 1).iter().copied().collect()
        }
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        self.states.row(t).iter().copied().collect()
    }
}

/// Generic quantile by bisection after exponential bracket expansion around
/// `center`. `cdf` must be nondecreasing.
pub fn bracketed_quantile(cdf: impl Fn(f64) -> f64, u: f64, center: f64, scale: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return domain(format!("probability must lie in (0, 1), got {u}"));
    }
    let mut width = if scale > 0.0 { scale } else { 1.0 };
    let mut lo = center - width;
    let mut hi = center + width;
    let mut guard = 0;
    while cdf(lo) > u || cdf(hi) < u {
        width *= 2.0;
        if cdf(lo) > u {
            lo = center - width;
        }
        if cdf(hi) < u {
            hi = center + width;
        }
        guard += 1;
        if guard > 2000 {
            return domain("could not bracket quantile");
        }
    }
    while hi - lo > QUANTILE_TOL * (1.0 + lo.abs().max(hi.abs())) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Monte Carlo estimate of the DAR(1) Lyapunov coefficient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub estimate: f64,
    pub stderr: f64,
    pub n_draws: usize,
    pub stationary: bool,
    pub finite_variance: bool,
}

/// Estimates `E log|gamma + sqrt(beta) eps|` for `eps ~ N(0, 1)`.
pub fn lyapunov_check(gamma: f64, beta: f64, n_draws: usize, seed: u64) -> Result<LyapunovReport> {
    if n_draws < 1000 {
        return domain("lyapunov_check needs at least 1000 draws");
    }
    if !gamma.is_finite() {
        return domain("gamma must be finite");
    }
    nonneg("beta", beta)?;
    if gamma == 0.0 && beta == 0.0 {
        return domain("gamma = beta = 0 gives log 0");
    }
    let mut rng = rng::rng_at(seed, rng::stream_id(Domain::Lyapunov, 0), 0);
    let sb = beta.sqrt();
    let (mut mean, mut m2) = (0.0, 0.0);
    for k in 0..n_draws {
        let e = rng::std_normal(&mut rng);
        let v = (gamma + sb * e).abs().ln();
        // Welford
        let delta = v - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = m2 / (n_draws - 1) as f64;
    let stderr = (var / n_draws as f64).sqrt();
    Ok(LyapunovReport {
        estimate: mean,
        stderr,
        n_draws,
        stationary: mean + 3.0 * stderr < 0.0,
        finite_variance: gamma * gamma + beta < 1.0,
    })
}

/// `alpha / (1 - gamma^2 - beta)` when the DAR(1) second moment is finite.
pub fn dar1_stationary_variance(gamma: f64, alpha: f64, beta: f64) -> Option<f64> {
    let denom = 1.0 - gamma * gamma - beta;
    (denom > 0.0).then(|| alpha / denom)
}

// ---------------------------------------------------------------------------
// JSON document: {"family": "...", "n": 2, "params": {...}}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub family: String,
    pub n: usize,
    pub params: serde_json::Value,
}

type Rows = Vec<Vec<f64>>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Var1Params {
    phi: Rows,
    d: Rows,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Dar1Params {
    gamma: f64,
    alpha: f64,
    beta: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VectorDarParams {
    phi: Rows,
    a: Vec<f64>,
    b: Rows,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThresholdParams {
    alpha: f64,
    sigma: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CondGaussianParams {
    phi: Rows,
    psi: Rows,
    l0: Rows,
    s: Vec<f64>,
}

fn default_substeps() -> usize {
    DEFAULT_SUBSTEPS
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EulerParams {
    kappa: Vec<f64>,
    mu: Vec<f64>,
    sigma0: Vec<f64>,
    sigma1: Vec<f64>,
    #[serde(default = "default_substeps")]
    substeps: usize,
}

/// Row-major nested vectors to a matrix.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if rows.iter().any(|row| row.len() != c) {
        return domain("ragged matrix rows");
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Rows {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn params<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> std::result::Result<T, String> {
    serde_json::from_value(v).map_err(|e| format!("params: {e}"))
}

impl TryFrom<ModelDocument> for ModelSpec {
    type Error = String;

    fn try_from(doc: ModelDocument) -> std::result::Result<Self, String> {
        let m = |rows: &Rows| matrix_from_rows(rows).map_err(|e| e.to_string());
        let v = |x: Vec<f64>| DVector::from_vec(x);
        let family = match doc.family.as_str() {
            "gaussian_var1" => {
                let p: Var1Params = params(doc.params)?;
                Family::GaussianVar1 {
                    phi: m(&p.phi)?,
                    d: m(&p.d)?,
                }
            }
            "dar1" => {
                let p: Dar1Params = params(doc.params)?;
                Family::Dar1 {
                    gamma: p.gamma,
                    alpha: p.alpha,
                    beta: p.beta,
                }
            }
            "vector_dar" => {
                let p: VectorDarParams = params(doc.params)?;
                Family::VectorDar {
                    phi: m(&p.phi)?,
                    a: v(p.a),
                    b: m(&p.b)?,
                }
            }
            "threshold_ar1" => {
                let p: ThresholdParams = params(doc.params)?;
                Family::ThresholdAr1 {
                    alpha: p.alpha,
                    sigma: p.sigma,
                }
            }
            "cond_gaussian" => {
                let p: CondGaussianParams = params(doc.params)?;
                Family::CondGaussian {
                    phi: m(&p.phi)?,
                    psi: m(&p.psi)?,
                    l0: m(&p.l0)?,
                    s: v(p.s),
                }
            }
            "euler_diffusion" => {
                let p: EulerParams = params(doc.params)?;
                Family::EulerDiffusion {
                    kappa: v(p.kappa),
                    mu: v(p.mu),
                    sigma0: v(p.sigma0),
                    sigma1: v(p.sigma1),
                    substeps: p.substeps,
                }
            }
            other => return Err(format!("unknown model family `{other}`")),
        };
        ModelSpec::new(doc.n, family).map_err(|e| e.to_string())
    }
}

impl From<ModelSpec> for ModelDocument {
    fn from(spec: ModelSpec) -> Self {
        let tag = spec.tag().to_string();
        let vec = |x: &DVector<f64>| x.iter().copied().collect::<Vec<f64>>();
        let params = match &spec.family {
            Family::GaussianVar1 { phi, d } => serde_json::to_value(Var1Params {
                phi: matrix_to_rows(phi),
                d: matrix_to_rows(d),
            }),
            Family::Dar1 { gamma, alpha, beta } => serde_json::to_value(Dar1Params {
                gamma: *gamma,
                alpha: *alpha,
                beta: *beta,
            }),
            Family::VectorDar { phi, a, b } => serde_json::to_value(VectorDarParams {
                phi: matrix_to_rows(phi),
                a: vec(a),
                b: matrix_to_rows(b),
            }),
            Family::ThresholdAr1 { alpha, sigma } => serde_json::to_value(ThresholdParams {
                alpha: *alpha,
                sigma: *sigma,
            }),
            Family::CondGaussian { phi, psi, l0, s } => serde_json::to_value(CondGaussianParams {
                phi: matrix_to_rows(phi),
                psi: matrix_to_rows(psi),
                l0: matrix_to_rows(l0),
                s: vec(s),
            }),
            Family::EulerDiffusion {
                kappa,
                mu,
                sigma0,
                sigma1,
                substeps,
            } => serde_json::to_value(EulerParams {
                kappa: vec(kappa),
                mu: vec(mu),
                sigma0: vec(sigma0),
                sigma1: vec(sigma1),
                substeps: *substeps,
            }),
        }
        .expect("parameter blocks serialize");
        ModelDocument {
            family: tag,
            n: spec.n,
            params,
        }
    }
}

/// Ready-made instances of every family, used by tests and examples.
pub mod zoo {
    use super::*;

    pub fn gaussian_var1() -> ModelSpec {
        ModelSpec::gaussian_var1(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.1, -0.2, 0.4]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 0.8]),
        )
        .unwrap()
    }

    pub fn dar1() -> ModelSpec {
        ModelSpec::dar1(0.5, 1.0, 0.5).unwrap()
    }

    pub fn vector_dar() -> ModelSpec {
        ModelSpec::new(
            2,
            Family::VectorDar {
                phi: DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.0, 0.3]),
                a: DVector::from_vec(vec![1.0, 0.5]),
                b: DMatrix::from_row_slice(2, 2, &[0.2, 0.1, 0.05, 0.3]),
            },
        )
        .unwrap()
    }

    pub fn threshold_ar1() -> ModelSpec {
        ModelSpec::threshold_ar1(2.0, 1.0).unwrap()
    }

    pub fn cond_gaussian() -> ModelSpec {
        ModelSpec::new(
            2,
            Family::CondGaussian {
                phi: DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.1, 0.2]),
                psi: DMatrix::from_row_slice(2, 2, &[0.5, -0.2, 0.0, 0.4]),
                l0: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.3, 0.7]),
                s: DVector::from_vec(vec![0.1, 0.2]),
            },
        )
        .unwrap()
    }

    pub fn euler_diffusion(substeps: usize) -> ModelSpec {
        ModelSpec::new(
            2,
            Family::EulerDiffusion {
                kappa: DVector::from_vec(vec![0.5, 1.0]),
                mu: DVector::from_vec(vec![0.0, 1.0]),
                sigma0: DVector::from_vec(vec![0.5, 0.3]),
                sigma1: DVector::from_vec(vec![0.1, 0.2]),
                substeps,
            },
        )
        .unwrap()
    }

    /// One instance of each family whose conditional law is closed form.
    pub fn closed_form() -> Vec<ModelSpec> {
        vec![
            gaussian_var1(),
            dar1(),
            vector_dar(),
            threshold_ar1(),
            cond_gaussian(),
            euler_diffusion(1),
        ]
    }

    /// Every family, including the multi-substep Euler scheme.
    pub fn all() -> Vec<ModelSpec> {
        let mut v = closed_form();
        v.push(euler_diffusion(DEFAULT_SUBSTEPS));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_examples() {
        let m = ModelSpec::gaussian_var1(DMatrix::zeros(2, 2), DMatrix::identity(2, 2)).unwrap();
        assert_eq!(m.transition_step(&[3.0, -1.0], &[0.3, -1.2]).unwrap(), vec![0.3, -1.2]);

        let ar = ModelSpec::dar1(0.5, 1.0, 0.0).unwrap();
        assert_eq!(ar.transition_step(&[2.0], &[1.0]).unwrap(), vec![2.0]);

        let dar = ModelSpec::dar1(0.5, 1.0, 0.5).unwrap();
        let y = dar.transition_step(&[2.0], &[1.0]).unwrap()[0];
        assert!((y - (1.0 + 3f64.sqrt())).abs() < 1e-15);
        assert!((y - 2.732_050_8).abs() < 1e-7);
    }

    #[test]
    fn non_finite_inputs_rejected() {
        let dar = zoo::dar1();
        assert!(matches!(
            dar.transition_step(&[f64::NAN], &[0.0]),
            Err(Error::InputDomain(_))
        ));
        assert!(matches!(
            dar.transition_step(&[0.0], &[f64::INFINITY]),
            Err(Error::InputDomain(_))
        ));
        assert!(matches!(
            dar.transition_step(&[0.0, 1.0], &[0.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn parameter_validation() {
        assert!(ModelSpec::dar1(0.5, 0.0, 0.5).is_err());
        assert!(ModelSpec::dar1(0.5, 1.0, -0.1).is_err());
        assert!(ModelSpec::threshold_ar1(1.0, 0.0).is_err());
        assert!(ModelSpec::gaussian_var1(
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0])
        )
        .is_err());
        assert!(ModelSpec::new(0, Family::Dar1 { gamma: 0.0, alpha: 1.0, beta: 0.0 }).is_err());
    }

    #[test]
    fn cdf_examples() {
        let m = ModelSpec::gaussian_var1(
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        assert_eq!(m.conditional_cdf(0, 1.0, &[], &[2.0]).unwrap(), 0.5);
        assert_eq!(m.conditional_cdf(0, f64::INFINITY, &[], &[2.0]).unwrap(), 1.0);
        assert_eq!(m.conditional_quantile(0, 0.5, &[], &[2.0]).unwrap(), 1.0);
        let u = m
            .conditional_cdf(0, m.conditional_quantile(0, 0.975, &[], &[2.0]).unwrap(), &[], &[2.0])
            .unwrap();
        assert!((u - 0.975).abs() < 1e-10);

        let dar = zoo::dar1();
        assert_eq!(dar.conditional_cdf(0, 1.0, &[], &[2.0]).unwrap(), 0.5);
        let q = dar.conditional_quantile(0, normal::cdf(1.0), &[], &[2.0]).unwrap();
        assert!((q - (1.0 + 3f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn quantile_domain() {
        let dar = zoo::dar1();
        for u in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(
                dar.conditional_quantile(0, u, &[], &[0.0]),
                Err(Error::InputDomain(_))
            ));
        }
    }

    #[test]
    fn bracketed_solver_matches_closed_form() {
        let dar = zoo::dar1();
        for &u in &[1e-6, 0.1, 0.5, 0.9, 0.999] {
            let exact = dar.conditional_quantile(0, u, &[], &[2.0]).unwrap();
            let solved = bracketed_quantile(
                |y| dar.conditional_cdf(0, y, &[], &[2.0]).unwrap(),
                u,
                1.0,
                1.0,
            )
            .unwrap();
            assert!((exact - solved).abs() < 1e-9, "u={u}");
        }
    }

    #[test]
    fn conditional_cdf_uses_prefix() {
        // bivariate Gaussian: y2 | y1 has mean rho-adjusted by y1
        let m = ModelSpec::gaussian_var1(
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.6, 0.8]),
        )
        .unwrap();
        // y1 = 1 -> z1 = 1, y2 | y1 ~ N(0.6, 0.64)
        let u = m.conditional_cdf(1, 0.6, &[1.0], &[0.0, 0.0]).unwrap();
        assert!((u - 0.5).abs() < 1e-15);
        assert!(m.conditional_cdf(2, 0.0, &[1.0, 1.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn euler_multistep_has_no_closed_cdf() {
        let m = zoo::euler_diffusion(16);
        assert!(matches!(
            m.conditional_cdf(0, 0.0, &[], &[0.0, 0.0]),
            Err(Error::UnsupportedFamily { .. })
        ));
        assert!(zoo::euler_diffusion(1).conditional_cdf(0, 0.0, &[], &[0.0, 0.0]).is_ok());
    }

    #[test]
    fn threshold_boundary_is_lower_regime() {
        let m = zoo::threshold_ar1();
        assert_eq!(m.transition_step(&[0.0], &[0.0]).unwrap(), vec![0.0]);
        assert_eq!(m.transition_step(&[1e-300], &[0.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn simulate_is_defining_recursion_and_deterministic() {
        let m = ModelSpec::gaussian_var1(DMatrix::identity(2, 2) * 0.5, DMatrix::identity(2, 2))
            .unwrap();
        let a = m.simulate_path(&[1.0, -1.0], 3, 11).unwrap();
        let b = m.simulate_path(&[1.0, -1.0], 3, 11).unwrap();
        assert_eq!(a, b);
        let eps = a.innovations.as_ref().unwrap();
        for t in 0..3 {
            let prev = a.previous(t);
            for j in 0..2 {
                assert_eq!(a.states[(t, j)], 0.5 * prev[j] + eps[(t, j)]);
            }
        }
    }

    #[test]
    fn explosive_path_reports_index() {
        let m = ModelSpec::dar1(3.0, 1.0, 0.0).unwrap();
        match m.simulate_path(&[1.0], 200, 1) {
            Err(Error::Diverged { t, .. }) => assert!(t > 10 && t < 40),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn lyapunov_examples() {
        assert!(matches!(lyapunov_check(0.0, 0.0, 1000, 1), Err(Error::InputDomain(_))));
        assert!(lyapunov_check(0.5, 0.5, 999, 1).is_err());
        let r = lyapunov_check(0.5, 0.5, 100_000, 1).unwrap();
        assert!(r.estimate < 0.0 && r.stationary && r.finite_variance);
        let r = lyapunov_check(1.2, 0.9, 10_000, 1).unwrap();
        assert!(!r.finite_variance);
    }

    #[test]
    fn json_document_roundtrip() {
        for m in zoo::all() {
            let text = serde_json::to_string(&m).unwrap();
            let back: ModelSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(back, m);
        }
        let doc = r#"{"family":"dar1","n":1,"params":{"gamma":0.5,"alpha":1.0,"beta":0.5}}"#;
        let m: ModelSpec = serde_json::from_str(doc).unwrap();
        assert_eq!(m, zoo::dar1());
        let bad = r#"{"family":"dar1","n":1,"params":{"gamma":0.5,"alpha":-1.0,"beta":0.5}}"#;
        assert!(serde_json::from_str::<ModelSpec>(bad).is_err());
        let unknown = r#"{"family":"garch","n":1,"params":{}}"#;
        assert!(serde_json::from_str::<ModelSpec>(unknown).is_err());
    }
}
