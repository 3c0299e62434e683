//! Transformations that leave `N(0, Id)` (and, by conjugation with the
//! componentwise normal CDF, `U[0,1]^n`) invariant.
//!
//! Two innovation vectors related by any of these maps generate the same
//! transition law, which is the whole identification problem in a nutshell.

use crate::error::{domain, Error, Result};
use crate::normal;
use crate::plot::{Panel, Series};
use crate::rng;
use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Skew-symmetry tolerance on `|B + B'|`.
pub const SKEW_TOL: f64 = 1e-12;
/// Scaling threshold of the scaled-and-squared Taylor exponential.
pub const EXP_SCALE_THRESHOLD: f64 = 0.5;
/// Relative truncation tolerance of the Taylor series.
pub const EXP_SERIES_TOL: f64 = 1e-14;
/// Condition number above which a polar decomposition is refused.
pub const MAX_CONDITION: f64 = 1e12;

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `Exp B` for a skew-symmetric `B`: a special orthogonal matrix.
pub fn skew_exp(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = b.nrows();
    if b.ncols() != n {
        return domain("skew_exp needs a square matrix");
    }
    if b.iter().any(|v| !v.is_finite()) {
        return domain("skew_exp: non-finite entries");
    }
    let asym = max_abs(&(b + b.transpose()));
    if asym >= SKEW_TOL * max_abs(b).max(1.0) {
        return domain(format!("matrix is not skew-symmetric (|B + B'| = {asym:e})"));
    }
    match n {
        0 => Ok(DMatrix::zeros(0, 0)),
        1 => Ok(DMatrix::identity(1, 1)),
        2 => Ok(rotation2(b[(1, 0)])),
        3 => Ok(rodrigues(b)),
        _ => Ok(scaled_taylor_exp(b)),
    }
}

/// Counter-clockwise planar rotation.
pub fn rotation2(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

fn rodrigues(b: &DMatrix<f64>) -> DMatrix<f64> {
    let (x, y, z) = (b[(2, 1)], b[(0, 2)], b[(1, 0)]);
    let theta = (x * x + y * y + z * z).sqrt();
    let id = DMatrix::identity(3, 3);
    if theta < 1e-8 {
        // series to third order is exact at double precision here
        return id + b + b * b * 0.5;
    }
    let k = b / theta;
    &id + &k * theta.sin() + &k * &k * (1.0 - theta.cos())
}

/// General-purpose `exp` by scaling and squaring a truncated Taylor series.
pub fn scaled_taylor_exp(b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.nrows();
    let norm = b.norm();
    let mut squarings = 0u32;
    if norm > EXP_SCALE_THRESHOLD {
        squarings = (norm / EXP_SCALE_THRESHOLD).log2().ceil() as u32;
    }
    let scaled = b / 2f64.powi(squarings as i32);
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..40 {
        term = &term * &scaled / k as f64;
        result += &term;
        if term.norm() <= EXP_SERIES_TOL * result.norm() {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// `A = lambda Q Omega` with `lambda > 0`, `Q` special orthogonal and `Omega`
/// symmetric positive definite with unit determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarDecomposition {
    pub lambda: f64,
    pub q: DMatrix<f64>,
    pub omega: DMatrix<f64>,
}

impl PolarDecomposition {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.q * &self.omega * self.lambda
    }
}

pub fn polar_decompose(a: &DMatrix<f64>) -> Result<PolarDecomposition> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return domain("polar_decompose needs a non-empty square matrix");
    }
    if a.iter().any(|v| !v.is_finite()) {
        return domain("polar_decompose: non-finite entries");
    }
    let sv = a.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if smin <= 0.0 || smax / smin > MAX_CONDITION {
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        return Err(Error::Conditioning { condition });
    }
    let det = a.determinant();
    if det <= 0.0 {
        return domain(format!("polar_decompose needs det A > 0, got {det:e}"));
    }
    let lambda = det.powf(1.0 / n as f64);
    let m = a / lambda;
    let gram = m.transpose() * &m;
    let eig = SymmetricEigen::new(gram);
    let v = &eig.eigenvectors;
    let sqrt_vals = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    let omega_raw = v * DMatrix::from_diagonal(&sqrt_vals) * v.transpose();
    let omega = (&omega_raw + omega_raw.transpose()) * 0.5;
    let inv_sqrt = DMatrix::from_diagonal(&sqrt_vals.map(|x| 1.0 / x));
    let q = &m * (v * inv_sqrt * v.transpose());
    Ok(PolarDecomposition { lambda, q, omega })
}

/// Angle function `rho -> a(rho)` of a planar radial rotation.
#[derive(Clone)]
pub enum AngleFn {
    Constant(f64),
    /// `a(rho) = slope * rho`.
    Linear(f64),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl AngleFn {
    pub fn eval(&self, rho: f64) -> f64 {
        match self {
            AngleFn::Constant(a) => *a,
            AngleFn::Linear(s) => s * rho,
            AngleFn::Custom(f) => f(rho),
        }
    }

    pub fn negated(&self) -> AngleFn {
        match self {
            AngleFn::Constant(a) => AngleFn::Constant(-a),
            AngleFn::Linear(s) => AngleFn::Linear(-s),
            AngleFn::Custom(f) => {
                let f = Arc::clone(f);
                AngleFn::Custom(Arc::new(move |r| -f(r)))
            }
        }
    }

    fn label(&self) -> String {
        match self {
            AngleFn::Constant(a) => format!("a(rho)={a}"),
            AngleFn::Linear(s) => format!("a(rho)={s}rho"),
            AngleFn::Custom(_) => "a(rho)=custom".into(),
        }
    }
}

type SkewGenerator = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

#[derive(Clone)]
enum RotationKind {
    Planar(AngleFn),
    /// `rho^2 -> B(rho^2)`, skew-symmetric.
    Skew(SkewGenerator),
}

/// A rotation whose angle (or skew generator) depends on the distance to
/// the origin: `eta = Exp B(|eps|^2) eps`.
#[derive(Clone)]
pub struct RadialRotationSpec {
    n: usize,
    kind: RotationKind,
    pub description: String,
}

impl fmt::Debug for RadialRotationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialRotationSpec")
            .field("n", &self.n)
            .field("description", &self.description)
            .finish()
    }
}

impl RadialRotationSpec {
    /// Planar rotation `(rho, theta) -> (rho, theta + a(rho))`.
    pub fn planar(angle: AngleFn) -> Self {
        let description = angle.label();
        Self {
            n: 2,
            kind: RotationKind::Planar(angle),
            description,
        }
    }

    /// General dimension with a user-supplied skew generator of `rho^2`.
    pub fn skew(
        n: usize,
        generator: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
        description: impl Into<String>,
    ) -> Result<Self> {
        if n < 2 {
            return domain("radial rotations need n >= 2");
        }
        Ok(Self {
            n,
            kind: RotationKind::Skew(Arc::new(generator)),
            description: description.into(),
        })
    }

    /// `B(rho^2) = c rho^2 B0` with `B0` a random skew matrix drawn from `seed`.
    pub fn default_skew(n: usize, c: f64, seed: u64) -> Result<Self> {
        let mut r = rng::rng_at(seed, rng::stream_id(rng::Domain::Auxiliary, 0), 0);
        let mut b0 = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v = rng::std_normal(&mut r);
                b0[(i, j)] = v;
                b0[(j, i)] = -v;
            }
        }
        Self::skew(n, move |rho2| &b0 * (c * rho2), format!("B(rho^2)={c}rho^2 B0 (seed {seed})"))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The inverse map: same radius, opposite rotation.
    pub fn inverse(&self) -> Self {
        let kind = match &self.kind {
            RotationKind::Planar(a) => RotationKind::Planar(a.negated()),
            RotationKind::Skew(g) => {
                let g = Arc::clone(g);
                RotationKind::Skew(Arc::new(move |r2| -g(r2)))
            }
        };
        Self {
            n: self.n,
            kind,
            description: format!("inverse of {}", self.description),
        }
    }

    /// Skew generator at squared radius `rho2`.
    pub fn generator(&self, rho2: f64) -> DMatrix<f64> {
        match &self.kind {
            RotationKind::Planar(a) => {
                let t = a.eval(rho2.sqrt());
                DMatrix::from_row_slice(2, 2, &[0.0, -t, t, 0.0])
            }
            RotationKind::Skew(g) => g(rho2),
        }
    }

    pub fn angle_fn(&self) -> Option<&AngleFn> {
        match &self.kind {
            RotationKind::Planar(a) => Some(a),
            RotationKind::Skew(_) => None,
        }
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// `eta = Exp B(|eps|^2) eps`; norm preserving. The origin is a fixed point.
pub fn radial_rotation_gauss(eps: &[f64], spec: &RadialRotationSpec) -> Result<Vec<f64>> {
    if eps.len() != spec.n {
        return Err(Error::Dimension {
            expected: spec.n,
            got: eps.len(),
        });
    }
    if eps.iter().any(|v| !v.is_finite()) {
        return domain("radial rotation: non-finite input");
    }
    let rho2: f64 = eps.iter().map(|v| v * v).sum();
    if rho2 == 0.0 {
        return Ok(eps.to_vec());
    }
    match &spec.kind {
        RotationKind::Planar(a) => {
            let rho = eps[0].hypot(eps[1]);
            let theta = wrap_angle(eps[1].atan2(eps[0]) + a.eval(rho));
            let (s, c) = theta.sin_cos();
            Ok(vec![rho * c, rho * s])
        }
        RotationKind::Skew(g) => {
            let q = skew_exp(&g(rho2))?;
            let v = nalgebra::DVector::from_column_slice(eps);
            Ok((q * v).iter().copied().collect())
        }
    }
}

fn check_open_cube(u: &[f64]) -> Result<()> {
    if u.iter().all(|v| *v > 0.0 && *v < 1.0) {
        Ok(())
    } else {
        domain(format!("{u:?} is not in the open unit cube"))
    }
}

/// Uniform-space version: `Phi o rotation o Phi^{-1}` componentwise.
pub fn radial_rotation_uniform(u: &[f64], spec: &RadialRotationSpec) -> Result<Vec<f64>> {
    check_open_cube(u)?;
    let eps: Vec<f64> = u.iter().map(|v| normal::quantile(*v)).collect();
    let eta = radial_rotation_gauss(&eps, spec)?;
    Ok(eta.iter().map(|v| normal::cdf(*v)).collect())
}

/// The explicit bivariate formula in `(u_1, u_2)`, angle taken with `atan2`.
pub fn radial_rotation_uniform_formula(u: &[f64], angle: &AngleFn) -> Result<Vec<f64>> {
    if u.len() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: u.len(),
        });
    }
    check_open_cube(u)?;
    let q1 = normal::quantile(u[0]);
    let q2 = normal::quantile(u[1]);
    let rho = (q1 * q1 + q2 * q2).sqrt();
    let theta = q2.atan2(q1) + angle.eval(rho);
    Ok(vec![
        normal::cdf(rho * theta.cos()),
        normal::cdf(rho * theta.sin()),
    ])
}

/// Flips `eps[component]` when its magnitude exceeds `c`. Preserves each
/// symmetric marginal but is discontinuous at `|eps| = c`.
pub fn reflection_transform(eps: &[f64], c: f64, component: usize) -> Result<Vec<f64>> {
    if !(c > 0.0) {
        return domain("reflection threshold must be > 0");
    }
    if component >= eps.len() {
        return domain(format!("component {component} out of range"));
    }
    let mut out = eps.to_vec();
    if out[component].abs() > c {
        out[component] = -out[component];
    }
    Ok(out)
}

/// Where the transform under test is defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Euclidean,
    OpenUnitCube,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct JacobianReport {
    pub n_points: usize,
    pub n_checked: usize,
    pub n_skipped: usize,
    pub max_abs_det_minus_one: f64,
    /// For `n = 2`: max of `|J11 - J22| + |J12 + J21|`, the distance of the
    /// Jacobian from the rotation pattern `[[c, -s], [s, c]]`.
    pub max_structure_residual: Option<f64>,
    pub tolerance: f64,
    /// `true` when some checked point has `|det J - 1| > tolerance`.
    pub flagged: bool,
    pub determinants: Vec<f64>,
}

/// Finite-difference step used by [`jacobian_det_check`].
pub fn fd_step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

/// Central-difference Jacobian of `f` at `x`, or `None` when a perturbed
/// point leaves the support or `f` fails.
pub fn fd_jacobian<F>(f: &F, x: &[f64], support: Support) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = fd_step(x[j]);
        let (lo, hi) = (x[j] - h, x[j] + h);
        if support == Support::OpenUnitCube && (lo <= 0.0 || hi >= 1.0) {
            return None;
        }
        xp[j] = hi;
        let fp = f(&xp).ok()?;
        xp[j] = lo;
        let fm = f(&xp).ok()?;
        xp[j] = x[j];
        if fp.len() != n || fm.len() != n {
            return None;
        }
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (hi - lo);
        }
    }
    if jac.iter().all(|v| v.is_finite()) {
        Some(jac)
    } else {
        None
    }
}

/// Checks `det dT/du' = 1` by central finite differences at `points`.
pub fn jacobian_det_check<F>(
    transform: F,
    points: &[Vec<f64>],
    support: Support,
    tolerance: f64,
) -> JacobianReport
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut report = JacobianReport {
        n_points: points.len(),
        n_checked: 0,
        n_skipped: 0,
        max_abs_det_minus_one: 0.0,
        max_structure_residual: None,
        tolerance,
        flagged: false,
        determinants: Vec::new(),
    };
    for p in points {
        let Some(jac) = fd_jacobian(&transform, p, support) else {
            report.n_skipped += 1;
            continue;
        };
        let det = jac.determinant();
        report.n_checked += 1;
        report.determinants.push(det);
        report.max_abs_det_minus_one = report.max_abs_det_minus_one.max((det - 1.0).abs());
        if jac.nrows() == 2 {
            let r = (jac[(0, 0)] - jac[(1, 1)]).abs() + (jac[(0, 1)] + jac[(1, 0)]).abs();
            report.max_structure_residual = Some(report.max_structure_residual.unwrap_or(0.0).max(r));
        }
    }
    report.flagged = report.max_abs_det_minus_one > tolerance;
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridLine {
    /// `u_1 = k / segments`.
    Vertical,
    /// `u_2 = k / segments`.
    Horizontal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridSpace {
    Uniform,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeformedCurve {
    pub id: usize,
    pub line: GridLine,
    pub index: usize,
    /// Image of the grid line in `[0, 1]^2`.
    pub uniform: Vec<[f64; 2]>,
    /// Image of the corresponding Gaussian-space line in `R^2`.
    pub gaussian: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridDeformation {
    pub segments: usize,
    pub samples: usize,
    pub description: String,
    pub curves: Vec<DeformedCurve>,
}

/// Grid lines at `u = 0` and `u = 1` sit at infinity in Gaussian space and
/// are drawn at this distance from the boundary.
pub const GRID_EDGE: f64 = 1e-4;

pub const DEFAULT_SEGMENTS: usize = 75;
pub const DEFAULT_SAMPLES: usize = 400;

/// Images of the `segments + 1` vertical and horizontal lines of the unit
/// square under the uniform-space radial rotation, and of the matching
/// Gaussian-space lines under the Gaussian-space rotation.
///
/// Points along each line are spaced evenly in Gaussian coordinates over
/// `[Phi^{-1}(GRID_EDGE), Phi^{-1}(1 - GRID_EDGE)]`.
pub fn grid_deformation(
    spec: &RadialRotationSpec,
    segments: usize,
    samples: usize,
) -> Result<GridDeformation> {
    if spec.n() != 2 {
        return domain("grid deformation is planar (n = 2)");
    }
    if segments == 0 || samples < 2 {
        return domain("need at least one segment and two samples per line");
    }
    let reach = normal::quantile(1.0 - GRID_EDGE);
    let mut curves = Vec::with_capacity(2 * (segments + 1));
    for line in [GridLine::Vertical, GridLine::Horizontal] {
        for k in 0..=segments {
            let level = (k as f64 / segments as f64).clamp(GRID_EDGE, 1.0 - GRID_EDGE);
            let fixed = normal::quantile(level);
            let mut uniform = Vec::with_capacity(samples);
            let mut gaussian = Vec::with_capacity(samples);
            for s in 0..samples {
                let moving = -reach + 2.0 * reach * s as f64 / (samples - 1) as f64;
                let eps = match line {
                    GridLine::Vertical => [fixed, moving],
                    GridLine::Horizontal => [moving, fixed],
                };
                let eta = radial_rotation_gauss(&eps, spec)?;
                gaussian.push([eta[0], eta[1]]);
                uniform.push([normal::cdf(eta[0]), normal::cdf(eta[1])]);
            }
            curves.push(DeformedCurve {
                id: curves.len(),
                line,
                index: k,
                uniform,
                gaussian,
            });
        }
    }
    Ok(GridDeformation {
        segments,
        samples,
        description: spec.description.clone(),
        curves,
    })
}

impl GridDeformation {
    /// CSV `curve_id,point_id,x,y,space`, uniform curves first.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("curve_id,point_id,x,y,space\n");
        for (space, pick) in [("uniform", 0), ("gaussian", 1)] {
            for c in &self.curves {
                let pts = if pick == 0 { &c.uniform } else { &c.gaussian };
                for (i, p) in pts.iter().enumerate() {
                    out.push_str(&format!("{},{},{},{},{}\n", c.id, i, p[0], p[1], space));
                }
            }
        }
        out
    }

    /// One panel per space; uniform-space curves in red, Gaussian in blue.
    pub fn to_svg(&self, space: GridSpace) -> String {
        let (title, color, range) = match space {
            GridSpace::Uniform => ("uniform space", "#c0392b", (0.0, 1.0)),
            GridSpace::Gaussian => {
                let r = normal::quantile(1.0 - GRID_EDGE) * 2f64.sqrt() + 0.2;
                ("gaussian space", "#1f4e9c", (-r, r))
            }
        };
        let mut panel = Panel::new(format!("{} ({})", self.description, title));
        panel.width = 560.0;
        panel.height = 560.0;
        panel.legend = false;
        panel.x_range = Some(range);
        panel.y_range = Some(range);
        for c in &self.curves {
            let pts = match space {
                GridSpace::Uniform => c.uniform.clone(),
                GridSpace::Gaussian => c.gaussian.clone(),
            };
            panel.series.push(Series::new("", color, pts).thin(0.6));
        }
        panel.render()
    }

    /// Largest distance between consecutive uniform-space samples.
    pub fn max_uniform_spacing(&self) -> f64 {
        self.curves
            .iter()
            .flat_map(|c| c.uniform.windows(2))
            .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
            .fold(0.0, f64::max)
    }
}

/// Dimension count of the decomposition `A = lambda Q Omega`:
/// scale + special orthogonal + unit-determinant SPD.
pub fn polar_dimension_count(n: usize) -> (usize, usize, usize) {
    (1, n * (n - 1) / 2, n * (n + 1) / 2 - 1)
}
