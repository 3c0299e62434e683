//! Nonlinear innovations by recursive conditional-CDF inversion.
//!
//! For each date, component `k` of the chosen ordering gets
//! `eps_k = Phi^{-1}(F_k(y_k | earlier components, y_{t-1}))`. With the
//! conditionally Gaussian zoo, `Phi^{-1} o F_k` is the exact standardized
//! score of `y_k` under its conditional law, so it is evaluated directly
//! rather than through a CDF that would saturate in the upper tail.

use crate::error::{check_dim, domain, Error, Result};
use crate::model::{check_diverged, check_order, ModelSpec, Trajectory};
use crate::normal;
use nalgebra::DMatrix;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InnovationKind {
    Gaussian,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnovationMatrix {
    /// `T x n`; column `k` belongs to component `order[k]`.
    pub values: DMatrix<f64>,
    pub kind: InnovationKind,
    /// Family tag of the generating model.
    pub model_id: String,
    /// Component ordering of the recursive construction.
    pub order: Vec<usize>,
}

impl InnovationMatrix {
    pub fn gaussian(values: DMatrix<f64>, model_id: impl Into<String>) -> Self {
        let order = (0..values.ncols()).collect();
        Self {
            values,
            kind: InnovationKind::Gaussian,
            model_id: model_id.into(),
            order,
        }
    }

    /// CSV with header `t,eps_1,...,eps_n`; `t` counts from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for j in 0..self.values.ncols() {
            out.push_str(&format!(",eps_{}", j + 1));
        }
        out.push('\n');
        for t in 0..self.values.nrows() {
            out.push_str(&(t + 1).to_string());
            for j in 0..self.values.ncols() {
                out.push(',');
                out.push_str(&self.values[(t, j)].to_string());
            }
            out.push('\n');
        }
        out
    }
}

fn natural_order(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Gaussian innovations in natural component order.
pub fn extract_gaussian_innovations(model: &ModelSpec, traj: &Trajectory) -> Result<InnovationMatrix> {
    extract_gaussian_innovations_ordered(model, traj, &natural_order(model.n()))
}

/// Gaussian innovations with the recursion run over `order`.
pub fn extract_gaussian_innovations_ordered(
    model: &ModelSpec,
    traj: &Trajectory,
    order: &[usize],
) -> Result<InnovationMatrix> {
    let n = model.n();
    check_dim(n, traj.states.ncols())?;
    check_dim(n, traj.y0.len())?;
    check_order(n, order)?;
    let mut values = DMatrix::zeros(traj.len(), n);
    let mut prev = traj.y0.clone();
    for t in 0..traj.len() {
        let row = traj.row(t);
        let law = model.conditional_gaussian_ordered(&prev, order)?;
        let z = law.scores(&row);
        for (k, v) in z.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Saturation {
                    t,
                    component: order[k],
                    value: *v,
                });
            }
            values[(t, k)] = *v;
        }
        prev = row;
    }
    Ok(InnovationMatrix {
        values,
        kind: InnovationKind::Gaussian,
        model_id: model.tag().to_string(),
        order: order.to_vec(),
    })
}

/// Uniform innovations `u = F_k(y_k | ...)`.
pub fn extract_uniform_innovations(model: &ModelSpec, traj: &Trajectory) -> Result<InnovationMatrix> {
    extract_uniform_innovations_ordered(model, traj, &natural_order(model.n()))
}

pub fn extract_uniform_innovations_ordered(
    model: &ModelSpec,
    traj: &Trajectory,
    order: &[usize],
) -> Result<InnovationMatrix> {
    let g = extract_gaussian_innovations_ordered(model, traj, order)?;
    let mut values = g.values.clone();
    for t in 0..values.nrows() {
        for k in 0..values.ncols() {
            let u = normal::cdf(g.values[(t, k)]);
            if u <= 0.0 || u >= 1.0 {
                return Err(Error::Saturation {
                    t,
                    component: order[k],
                    value: u,
                });
            }
            values[(t, k)] = u;
        }
    }
    Ok(InnovationMatrix {
        values,
        kind: InnovationKind::Uniform,
        ..g
    })
}

/// Rebuilds the path generated by Gaussian innovations `eps` from `y0`:
/// `y_k = Q_k(Phi(eps_k) | earlier components, y_{t-1})`.
pub fn reconstruct_path(model: &ModelSpec, y0: &[f64], eps: &InnovationMatrix) -> Result<Trajectory> {
    if eps.kind != InnovationKind::Gaussian {
        return domain("reconstruct_path needs Gaussian innovations");
    }
    let n = model.n();
    check_dim(n, y0.len())?;
    check_dim(n, eps.values.ncols())?;
    check_order(n, &eps.order)?;
    let mut states = DMatrix::zeros(eps.values.nrows(), n);
    let mut prev = y0.to_vec();
    for t in 0..eps.values.nrows() {
        let law = model.conditional_gaussian_ordered(&prev, &eps.order)?;
        let z: Vec<f64> = eps.values.row(t).iter().copied().collect();
        if z.iter().any(|v| !v.is_finite()) {
            return domain(format!("non-finite innovation at t = {t}"));
        }
        let y = law.states(&z);
        check_diverged(&y, t)?;
        for j in 0..n {
            states[(t, j)] = y[j];
        }
        prev = y;
    }
    Ok(Trajectory {
        states,
        y0: y0.to_vec(),
        seed: None,
        innovations: Some(eps.values.clone()),
    })
}

/// Componentwise standard normal CDF. Entries that round to 0 or 1 are not
/// valid uniform innovations and raise a domain error.
pub fn gauss_to_uniform(eps: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = eps.clone();
    for v in out.iter_mut() {
        if v.is_nan() {
            return domain("NaN innovation");
        }
        let u = normal::cdf(*v);
        if u <= 0.0 || u >= 1.0 {
            return domain(format!("Phi({v}) saturates to {u}"));
        }
        *v = u;
    }
    Ok(out)
}

/// Componentwise standard normal quantile.
///
/// Boundary values are an error unless `clamp` is given, in which case
/// entries are first clamped to `[clamp, 1 - clamp]`.
pub fn uniform_to_gauss(u: &DMatrix<f64>, clamp: Option<f64>) -> Result<DMatrix<f64>> {
    if let Some(c) = clamp {
        if !(c > 0.0 && c < 0.5) {
            return domain(format!("clamp must lie in (0, 0.5), got {c}"));
        }
    }
    let mut out = u.clone();
    for v in out.iter_mut() {
        let mut p = *v;
        if let Some(c) = clamp {
            p = p.clamp(c, 1.0 - c);
        }
        if !(p > 0.0 && p < 1.0) {
            return domain(format!("uniform value {p} outside (0, 1)"));
        }
        *v = normal::quantile(p);
    }
    Ok(out)
}

/// Standardized residual `(y - E[y | y_{t-1}]) / sqrt(V[y | y_{t-1}])`,
/// componentwise with marginal conditional moments.
pub fn standardized_residual(model: &ModelSpec, traj: &Trajectory) -> Result<DMatrix<f64>> {
    let n = model.n();
    check_dim(n, traj.states.ncols())?;
    let mut out = DMatrix::zeros(traj.len(), n);
    for t in 0..traj.len() {
        let prev = traj.previous(t);
        let law = model.conditional_gaussian(&prev)?;
        let cov = &law.chol * law.chol.transpose();
        for i in 0..n {
            let var = cov[(i, i)];
            if !(var > 0.0) {
                return domain(format!("zero conditional variance at t = {t}"));
            }
            out[(t, i)] = (traj.states[(t, i)] - law.mean[i]) / var.sqrt();
        }
    }
    Ok(out)
}

/// Standardized residuals of a scalar model at time unit 2.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepResidual {
    /// `eps*_tau` for `y_{2 tau}` given `y_{2 tau - 2}`.
    pub residual: Vec<f64>,
    /// The conditioning state `y_{2 tau - 2}`.
    pub conditioning: Vec<f64>,
}

/// Two-step conditional mean and variance of `y_{t+1}` given `y_{t-1}`.
pub fn two_step_moments(model: &ModelSpec, y: f64) -> Result<(f64, f64)> {
    use crate::model::Family;
    match model.family() {
        Family::ThresholdAr1 { alpha, sigma } => {
            let m1 = if y > 0.0 { *alpha } else { 0.0 };
            let p = normal::cdf(m1 / sigma);
            Ok((alpha * p, alpha * alpha * p * (1.0 - p) + sigma * sigma))
        }
        Family::Dar1 { gamma, alpha, beta } => {
            let v1 = alpha + beta * y * y;
            let m1 = gamma * y;
            let e_sq = m1 * m1 + v1;
            Ok((gamma * m1, alpha + beta * e_sq + gamma * gamma * v1))
        }
        Family::GaussianVar1 { phi, d } if model.n() == 1 => {
            let (p, s) = (phi[(0, 0)], d[(0, 0)]);
            Ok((p * p * y, s * s * (1.0 + p * p)))
        }
        _ => Err(Error::UnsupportedFamily {
            family: model.tag(),
            operation: "two-step conditional moments",
        }),
    }
}

/// Time-unit-2 residuals on the subsampled path `y_0, y_2, y_4, ...` where
/// `y_0` is the trajectory's initial state.
pub fn standardized_residual_two_step(model: &ModelSpec, traj: &Trajectory) -> Result<TwoStepResidual> {
    check_dim(1, model.n())?;
    check_dim(1, traj.states.ncols())?;
    let mut residual = Vec::new();
    let mut conditioning = Vec::new();
    let mut prev = traj.y0[0];
    let mut t = 1;
    while t < traj.len() {
        let y = traj.states[(t, 0)];
        let (m, v) = two_step_moments(model, prev)?;
        if !(v > 0.0) {
            return domain("zero two-step variance");
        }
        residual.push((y - m) / v.sqrt());
        conditioning.push(prev);
        prev = y;
        t += 2;
    }
    Ok(TwoStepResidual {
        residual,
        conditioning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::zoo;

    #[test]
    fn recovers_recorded_innovations() {
        for m in zoo::closed_form() {
            // gaussian_var1 in the zoo has a lower-triangular D with positive
            // diagonal, so the Rosenblatt innovations coincide with eps
            let y0 = vec![0.1; m.n()];
            let traj = m.simulate_path(&y0, 200, 5).unwrap();
            let eps = extract_gaussian_innovations(&m, &traj).unwrap();
            let rec = traj.innovations.as_ref().unwrap();
            let err = (&eps.values - rec).abs().max();
            assert!(err < 1e-8, "{}: {err}", m.tag());
        }
    }

    #[test]
    fn var1_single_step_is_residual() {
        let phi = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.1, 0.3]);
        let m = ModelSpec::gaussian_var1(phi.clone(), DMatrix::identity(2, 2)).unwrap();
        let y_prev = vec![1.0, -2.0];
        let y = vec![0.7, 0.4];
        let traj = Trajectory::from_states(y_prev.clone(), DMatrix::from_row_slice(1, 2, &y));
        let eps = extract_gaussian_innovations(&m, &traj).unwrap();
        let expected = y[0] - (0.5 * 1.0 + 0.2 * -2.0);
        assert!((eps.values[(0, 0)] - expected).abs() < 1e-14);
    }

    #[test]
    fn dar_inverts_transition_example() {
        let m = zoo::dar1();
        let traj = Trajectory::from_states(vec![2.0], DMatrix::from_element(1, 1, 1.0 + 3f64.sqrt()));
        let eps = extract_gaussian_innovations(&m, &traj).unwrap();
        assert!((eps.values[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn median_path_gives_half() {
        let m = zoo::cond_gaussian();
        let mut prev = vec![0.3, -0.2];
        let mut states = DMatrix::zeros(5, 2);
        for t in 0..5 {
            let y = m.transition_step(&prev, &[0.0, 0.0]).unwrap();
            states.set_row(t, &nalgebra::RowDVector::from_vec(y.clone()));
            prev = y;
        }
        let traj = Trajectory::from_states(vec![0.3, -0.2], states);
        let u = extract_uniform_innovations(&m, &traj).unwrap();
        assert!(u.values.iter().all(|v| *v == 0.5));
    }

    #[test]
    fn uniform_is_cdf_of_gaussian() {
        let m = zoo::vector_dar();
        let traj = m.simulate_path(&[0.0, 0.0], 300, 2).unwrap();
        let g = extract_gaussian_innovations(&m, &traj).unwrap();
        let u = extract_uniform_innovations(&m, &traj).unwrap();
        let direct = gauss_to_uniform(&g.values).unwrap();
        assert!((&direct - &u.values).abs().max() < 1e-12);
        assert!(u.values.iter().all(|v| *v > 0.0 && *v < 1.0));
    }

    #[test]
    fn zero_innovations_give_powers_of_phi() {
        let phi = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, -0.1, 0.7]);
        let m = ModelSpec::gaussian_var1(phi.clone(), DMatrix::identity(2, 2)).unwrap();
        let y0 = nalgebra::DVector::from_vec(vec![1.0, 2.0]);
        let eps = InnovationMatrix::gaussian(DMatrix::zeros(4, 2), "gaussian_var1");
        let traj = reconstruct_path(&m, y0.as_slice(), &eps).unwrap();
        let mut y = y0.clone();
        for t in 0..4 {
            y = &phi * y;
            for j in 0..2 {
                assert!((traj.states[(t, j)] - y[j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn ordering_changes_innovations_not_states() {
        let m = zoo::gaussian_var1();
        let traj = m.simulate_path(&[0.0, 0.0], 100, 9).unwrap();
        let a = extract_gaussian_innovations_ordered(&m, &traj, &[0, 1]).unwrap();
        let b = extract_gaussian_innovations_ordered(&m, &traj, &[1, 0]).unwrap();
        assert!((&a.values - &b.values).abs().max() > 1e-3);
        let ra = reconstruct_path(&m, &traj.y0, &a).unwrap();
        let rb = reconstruct_path(&m, &traj.y0, &b).unwrap();
        assert!((&ra.states - &traj.states).abs().max() < 1e-10);
        assert!((&rb.states - &traj.states).abs().max() < 1e-10);
        assert!(extract_gaussian_innovations_ordered(&m, &traj, &[0, 0]).is_err());
    }

    #[test]
    fn gauss_uniform_maps() {
        let e = DMatrix::from_row_slice(1, 3, &[0.0, 1.959964, -1.0]);
        let u = gauss_to_uniform(&e).unwrap();
        assert_eq!(u[(0, 0)], 0.5);
        assert!((u[(0, 1)] - 0.975).abs() < 1e-6);
        let back = uniform_to_gauss(&u, None).unwrap();
        assert!((&back - &e).abs().max() < 1e-12);
        assert_eq!(uniform_to_gauss(&DMatrix::from_element(1, 1, 0.5), None).unwrap()[(0, 0)], 0.0);

        let edge = DMatrix::from_row_slice(1, 2, &[0.0, 0.5]);
        assert!(uniform_to_gauss(&edge, None).is_err());
        let clamped = uniform_to_gauss(&edge, Some(1e-15)).unwrap();
        assert!(clamped[(0, 0)] < -7.9);
        assert!(gauss_to_uniform(&DMatrix::from_element(1, 1, 40.0)).is_err());
    }

    #[test]
    fn standardized_residual_on_location_scale_models() {
        let m = zoo::dar1();
        let traj = m.simulate_path(&[0.0], 100, 3).unwrap();
        let r = standardized_residual(&m, &traj).unwrap();
        let eps = traj.innovations.unwrap();
        assert!((&r - &eps).abs().max() < 1e-12);
    }

    #[test]
    fn two_step_moments_match_simulation() {
        // threshold: mixture mean/variance oracle by brute-force simulation
        let m = zoo::threshold_ar1();
        for &y in &[1.0, -1.0] {
            let (mean, var) = two_step_moments(&m, y).unwrap();
            let n = 200_000;
            let s = crate::rng::NormalStream::new(4, crate::rng::Domain::Auxiliary, 0);
            let (mut a, mut b) = (0.0, 0.0);
            for k in 0..n {
                let e = s.draw(k, 2);
                let y1 = m.transition_step(&[y], &[e[0]]).unwrap();
                let y2 = m.transition_step(&y1, &[e[1]]).unwrap()[0];
                a += y2;
                b += y2 * y2;
            }
            let mu = a / n as f64;
            let v = b / n as f64 - mu * mu;
            assert!((mu - mean).abs() < 0.02, "{mu} vs {mean}");
            assert!((v - var).abs() < 0.03, "{v} vs {var}");
        }
        assert!(two_step_moments(&zoo::vector_dar(), 0.0).is_err());
    }

    #[test]
    fn csv_header() {
        let e = InnovationMatrix::gaussian(DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 2.0, 0.25]), "x");
        assert_eq!(e.to_csv(), "t,eps_1,eps_2\n1,0.5,-1\n2,2,0.25\n");
    }
}
