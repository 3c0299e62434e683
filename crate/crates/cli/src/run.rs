use crate::config::{AngleConfig, Command, ExperimentConfig};
use crate::error::CliError;
use crate::ingest::{ingest_csv, matrix_to_csv};
use nalgebra::DMatrix;
use nlirf::bss::{self, MixingOptions, SearchBudget};
use nlirf::diagnostics::{self, ks_normal, Resampling, TestReport};
use nlirf::identified_set::{self as idset, AngleFn, GridSpace, RadialRotationSpec, Support};
use nlirf::innovations::{self, InnovationMatrix};
use nlirf::irf::{self, ShockKind};
use nlirf::model::Family;
use nlirf::plot::{Panel, Series, PALETTE};
use nlirf::rng::{self, Domain, NormalStream};
use nlirf::{transforms, ModelSpec, Trajectory};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

const DEFAULT_LENGTH: usize = 1000;
const DEFAULT_BSS_LENGTH: usize = 20_000;
const DEFAULT_RESAMPLES: usize = 199;
const DEFAULT_LEVEL: f64 = 0.05;

/// What a run produced: artifact file names (relative to the output
/// directory) and rows for the printed summary table.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub artifacts: Vec<String>,
    pub rows: Vec<(String, String)>,
    pub tests: Vec<TestReport>,
}

struct Out {
    dir: PathBuf,
    summary: RunSummary,
}

impl Out {
    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io { path, source })?;
        self.summary.artifacts.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
        text.push('\n');
        self.write(name, text)
    }

    fn row(&mut self, key: impl Into<String>, value: impl ToString) {
        self.summary.rows.push((key.into(), value.to_string()));
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs one experiment and writes its artifacts plus `manifest.json` into
/// `out_dir`, which is created if needed.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary, CliError> {
    let seed = cfg.seed()?;
    std::fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut out = Out {
        dir: out_dir.to_path_buf(),
        summary: RunSummary::default(),
    };
    match cfg.command {
        Command::Simulate => simulate(cfg, seed, &mut out)?,
        Command::Innovations => extract(cfg, seed, &mut out)?,
        Command::Irf => irf_cmd(cfg, seed, &mut out)?,
        Command::Pirf => pirf_cmd(cfg, seed, &mut out)?,
        Command::Maxirf => maxirf_cmd(cfg, &mut out)?,
        Command::IdentifiedSet => identified_set_cmd(cfg, seed, &mut out)?,
        Command::Figure1 => figure1(cfg, &mut out)?,
        Command::Bss => bss_cmd(cfg, seed, &mut out)?,
        Command::Gcov => gcov_cmd(cfg, seed, &mut out)?,
        Command::MarkovTest => markov_cmd(cfg, seed, &mut out)?,
        Command::WnTest => wn_cmd(cfg, seed, &mut out)?,
    }

    let config_bytes = serde_json::to_vec(cfg).expect("config serializes");
    let mut artifacts = Vec::new();
    for name in &out.summary.artifacts {
        let bytes = std::fs::read(out_dir.join(name)).map_err(|source| CliError::Io {
            path: out_dir.join(name),
            source,
        })?;
        artifacts.push(json!({"file": name, "sha256": sha256_hex(&bytes), "bytes": bytes.len()}));
    }
    let manifest = json!({
        "tool": "nlirf",
        "cli_version": env!("CARGO_PKG_VERSION"),
        "core_version": nlirf::VERSION,
        "command": cfg.command.name(),
        "seed": seed,
        "config_sha256": sha256_hex(&config_bytes),
        "config": serde_json::to_value(cfg).expect("config serializes"),
        "artifacts": artifacts,
    });
    out.json("manifest.json", &manifest)?;
    Ok(out.summary)
}

fn state_or_zeros(cfg: &ExperimentConfig, n: usize) -> Result<Vec<f64>, CliError> {
    match &cfg.options.state {
        Some(s) if s.len() != n => Err(CliError::schema("options.state", format!("expected {n} entries, got {}", s.len()))),
        Some(s) => Ok(s.clone()),
        None => Ok(vec![0.0; n]),
    }
}

fn input_matrix(cfg: &ExperimentConfig) -> Result<Option<DMatrix<f64>>, CliError> {
    cfg.io.input.as_deref().map(ingest_csv).transpose()
}

/// The data a model-based command works on: the input file, whose first row
/// serves as the initial state, or a simulated path.
fn model_data(cfg: &ExperimentConfig, model: &ModelSpec, seed: u64) -> Result<(Trajectory, &'static str), CliError> {
    match input_matrix(cfg)? {
        Some(m) => {
            if m.ncols() != model.n() {
                return Err(CliError::schema("io.input", format!("file has {} series, model has n = {}", m.ncols(), model.n())));
            }
            if m.nrows() < 2 {
                return Err(CliError::schema("io.input", "need at least two rows"));
            }
            let y0 = m.row(0).iter().copied().collect();
            Ok((Trajectory::from_states(y0, m.rows(1, m.nrows() - 1).clone_owned()), "input"))
        }
        None => {
            let y0 = state_or_zeros(cfg, model.n())?;
            let len = cfg.options.length.unwrap_or(DEFAULT_LENGTH);
            Ok((model.simulate_path(&y0, len, seed)?, "simulated"))
        }
    }
}

fn path_svg(states: &DMatrix<f64>, title: &str) -> String {
    let mut panel = Panel::new(title);
    panel.zero_line = true;
    for j in 0..states.ncols() {
        let pts = (0..states.nrows()).map(|t| [(t + 1) as f64, states[(t, j)]]).collect();
        panel
            .series
            .push(Series::new(format!("y{}", j + 1), PALETTE[j % PALETTE.len()], pts).thin(1.0));
    }
    panel.render()
}

fn simulate(cfg: &ExperimentConfig, seed: u64, out: &mut Out) -> Result<(), CliError> {
    let model = cfg.model()?;
    let y0 = state_or_zeros(cfg, model.n())?;
    let len = cfg.options.length.unwrap_or(DEFAULT_LENGTH);
    let traj = model.simulate_path(&y0, len, seed)?;
    out.write("states.csv", matrix_to_csv(&traj.states, "y", 1))?;
    if let Some(eps) = &traj.innovations {
        out.write("innovations.csv", InnovationMatrix::gaussian(eps.clone(), model.tag()).to_csv())?;
    }
    out.write("states.svg", path_svg(&traj.states, &format!("{} path", model.tag())))?;
    out.row("model", model.tag());
    out.row("T", len);
    for j in 0..model.n() {
        let c = traj.states.column(j);
        let mean = c.mean();
        let sd = c.variance().sqrt();
        out.row(format!("y{} mean", j + 1), format!("{mean:.6}"));
        out.row(format!("y{} sd", j + 1), format!("{sd:.6}"));
    }
    Ok(())
}

fn extract(cfg: &ExperimentConfig, seed: u64, out: &mut Out) -> Result<(), CliError> {
    let model = cfg.model()?;
    let (traj, source) = model_data(cfg, model, seed)?;
    let eps = innovations::extract_gaussian_innovations(model, &traj)?;
    let u = innovations::extract_uniform_innovations(model, &traj)?;
    let back = innovations::reconstruct_path(model, &traj.y0, &eps)?;
    let deviation = (&back.states - &traj.states).abs().max();
    out.write("innovations.csv", eps.to_csv())?;
    out.write("uniform_innovations.csv", matrix_to_csv(&u.values, "u_", 1))?;
    let mut ks = Vec::new();
    for j in 0..model.n() {
        let col: Vec<f64> = eps.values.column(j).iter().copied().collect();
        let r = ks_normal(&col)?;
        out.row(format!("KS N(0,1) p, eps_{}", j + 1), format!("{:.4}", r.p_value));
        ks.push(r);
    }
    out.row("data", source);
    out.row("T", traj.len());
    out.row("max reconstruction error", format!("{deviation:.3e}"));
    out.json(
        "report.json",
        &json!({
            "model": model.tag(),
            "data": source,
            "n_obs": traj.len(),
            "max_reconstruction_error": deviation,
            "ks_normal": ks,
        }),
    )
}

fn irf_cmd(cfg: &ExperimentConfig, seed: u64, out: &mut Out) -> Result<(), CliError> {
    let model = cfg.model()?;
    let shock = cfg.shock()?;
    if shock.kind != ShockKind::InnovationDelta {
        return Err(CliError::schema("shock.kind", "irf needs an innovation_delta shock (use pirf for observable_delta)"));
    }
    let y_prev = state_or_zeros(cfg, model.n())?;
    let mean = irf::eirf(model, &y_prev, shock, cfg.mc.replicates, seed)?;
    let cov = irf::cirf(model, &y_prev, shock, cfg.mc.replicates, seed)?;
    out.write("irf.csv", mean.to_csv())?;
    out.write("irf.svg", mean.to_svg(&format!("EIRF, {}", model.tag())))?;
    out.write("cirf_variance.csv", cov.to_csv())?;
    let mut report = json!({
        "model": model.tag(),
        "state": y_prev,
        "replicates": cfg.mc.replicates,
        "horizon": shock.horizon,
    });
    if let Family::GaussianVar1 { phi, d } = model.family() {
        let exact = irf::var1_irf_closed_form(phi, d, &shock.vector, shock.horizon)?;
        let err = (&mean.per_horizon - &exact).abs().max();
        out.write("irf_closed_form.csv", irf::closed_form_result(exact, &y_prev).to_csv())?;
        out.row("max |EIRF - closed form|", format!("{err:.3e}"));
        report["max_abs_error_vs_closed_form"] = json!(err);
    }
    let peak = mean.per_horizon.abs().max();
    out.row("model", model.tag());
    out.row("replicates", cfg.mc.replicates);
    out.row("max |EIRF|", format!("{peak:.6}"));
    out.json("report.json", &report)
}

fn pirf_cmd(cfg: &ExperimentConfig, seed: u64, out: &mut Out) -> Result<(), CliError> {
    let model = cfg.model()?;
    let shock = cfg.shock()?;
    if shock.kind != ShockKind::ObservableDelta {
        return Err(CliError::schema("shock.kind", "pirf needs an observable_delta shock"));
    }
    let y_t = state_or_zeros(cfg, model.n())?;
    let r = irf::pirf_expectation(model, &y_t, shock, cfg.mc.replicates, seed)?;
    out.write("pirf.csv", r.to_csv())?;
    out.write("pirf.svg", r.to_svg(&format!("PIRF, {}", model.tag())))?;
    out.row("model", model.tag());
    out.row("replicates", cfg.mc.replicates);
    out.row("max |PIRF|", format!("{:.6}", r.per_horizon.abs().max()));
    out.json(
        "report.json",
        &json!({"model": model.tag(), "state": y_t, "replicates": cfg.mc.replicates, "horizon": shock.horizon}),
    )
}

fn maxirf_cmd(cfg: &ExperimentConfig, out: &mut Out) -> Result<(), CliError> {
    let model = cfg.model()?;
    let Family::GaussianVar1 { phi, d } = model.family() else {
        return Err(CliError::schema("model.family", "maxirf needs a gaussian_var1 model"));
    };
    let a = cfg
        .options
        .a
        .as_ref()
        .ok_or_else(|| CliError::schema("options.a", "maxirf needs response weights `a`"))?;
    let h = cfg.options.h.ok_or_else(|| CliError::schema("options.h", "maxirf needs a horizon `h`"))?;
    let m = irf::max_irf(phi, d, a, h)?;
    out.row("h", h);
    out.row("max IRF", format!("{:.10}", m.value));
    out.row(
        "delta*",
        m.delta_star.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(" "),
    );
    out.json("report.json", &json!({"a": a, "h": h, "value": m.value, "delta_star": m.delta_star}))
}

fn angle_fn(cfg: &ExperimentConfig) -> AngleFn {
    match cfg.options.angle.unwrap_or(AngleConfig::Linear(0.2)) {
        AngleConfig::Constant(c) => AngleFn::Constant(c),
        AngleConfig::Linear(s) => AngleFn::Linear(s),
    }
}

fn identified_set_cmd(cfg: &ExperimentConfig, seed: u64, out: &mut Out) -> Result<(), CliError> {
    let spec = RadialRotationSpec::planar(angle_fn(cfg));
    let draws = cfg.options.draws.unwrap_or(10_000);
    if draws < diagnostics::MIN_OBS {
        return Err(CliError::schema("options.draws", format!("need at least {}", diagnostics::MIN_OBS)));
    }
    let eps = NormalStream::new(seed, Domain::Auxiliary, 1).matrix(0, draws, 2);
    let fresh = NormalStream::new(seed, Domain::Auxiliary, 2).matrix(0, draws, 2);
    let mut rotated = DMatrix::zeros(draws, 2);
    let mut norm_err = 0.0f64;
    for t in 0..draws {
        let e = [eps[(t, 0)], eps[(t, 1)]];
        let z = idset::radial_rotation_gauss(&e, &spec)?;
        norm_err = norm_err.max((z[0].hypot(z[1]) - e[0].hypot(e[1])).abs());
        rotated[(t, 0)] = z[0];
        rotated[(t, 1)] = z[1];
    }
    let invariance = diagnostics::distribution_invariance_test(
        &fresh,
        &rotated,
        cfg.options.level.unwrap_or(DEFAULT_LEVEL),
        Resampling::new(cfg.options.resamples.unwrap_or(DEFAULT_RESAMPLES), seed),
    )?;
    let mut r = rng::rng_at(seed, rng::stream_id(Domain::Auxiliary, 3), 0);
    let points: Vec<Vec<f64>> = (0..100)
        .map(|_| vec![rng::open_uniform(&mut r), rng::open_uniform(&mut r)])
        .collect();
    let jac = idset::jacobian_det_check(|u| idset::radial_rotation_uniform(u, &spec), &points, Support::OpenUnitCube, 1e-5);
    let mut ks_p = Vec::new();
    for j in 0..2 {
        let col: Vec<f64> = rotated.column(j).iter().copied().collect();
        ks_p.push(ks_normal(&col)?.p_value);
    }
    out.write("rotated.csv", matrix_to_csv(&rotated, "eps_", 1))?;
    out.row("rotation", &spec.description);
    out.row("max norm change", format!("{norm_err:.3e}"));
    out.row("max |det J - 1|", format!("{:.3e}", jac.max_abs_det_minus_one));
    out.row("KS p (eps_1, eps_2)", format!("{:.4} {:.4}", ks_p[0], ks_p[1]));
    out.summary.tests.push(invariance.clone());
    out.json(
        "report.json",
        &json!({
            "rotation": spec.description,
            "draws": draws,
            "max_norm_change": norm_err,
            "ks_normal_p": ks_p,
            "jacobian": jac,
            "invariance": invariance,
        }),
    )
}

fn figure1(cfg: &ExperimentConfig, out: &mut Out) -> Result<(), CliError> {
    let segments = cfg.options.segments.unwrap_or(idset::DEFAULT_SEGMENTS);
    let samples = cfg.options.samples.unwrap_or(idset::DEFAULT_SAMPLES);
    for (tag, angle) in [("const", AngleFn::Constant(1.0)), ("linear", AngleFn::Linear(0.2))] {
        let spec = RadialRotationSpec::planar(angle);
        let g = idset::grid_deformation(&spec, segments, samples)?;
        out.write(&format!("figure1_{tag}_uniform.svg"), g.to_svg(GridSpace::Uniform))?;
        out.write(&format!("figure1_{tag}_gaussian.svg"), g.to_svg(GridSpace::Gaussian))?;
        out.write(&format!("figure1_{tag}_grid.csv"), g.to_csv())?;
        out.row(format!("{} curves", spec.description), g.curves.len());
        out.row(format!("{} max spacing", spec.description), format!("{:.5}", g.max_uniform_spacing()));
    }
    Ok(())
}

fn mixing_matrix(cfg: &ExperimentConfig) -> DMatrix<f64> {
    let m = cfg.options.mixing.unwrap_or([[1.0, 0.5], [0.3, 1.0]]);
    DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]])
}

fn bivariate_data(cfg: &ExperimentConfig, seed: u64) -> Result<(DMatrix<f64>, Value), CliError> {
    match input_matrix(cfg)? {
        Some(m) => {
            if m.ncols() != 2 {
                return Err(CliError::schema("io.input", format!("expected 2 series, found {}", m.ncols())));
            }
            Ok((m, json!("input")))
        }
        None => {
            let rho = cfg.options.rho.unwrap_or([0.9, 0.2]);
            let a = mixing_matrix(cfg);
            let len = cfg.options.length.unwrap_or(DEFAULT_BSS_LENGTH);
            let (_, y) = bss::simulate_mixed_ar1(rho, &a, len, seed)?;
            let desc = json!({"simulated": {"rho": rho, "mixing": nlirf::model::matrix_to_rows(&a), "length": len}});
            Ok((y, desc))
        }
    }
}

fn bss_cmd(cfg: &ExperimentConfig, seed: u64, out: &mut Out) -> Result<(), CliError> {
    let (y, source) = bivariate_data(cfg, seed)?;
    let lag_zero = cfg.options.lag_zero.unwrap_or(false);
    let lags = cfg.options.lags.clone().unwrap_or_else(|| {
        let mut l = bss::DEFAULT_LAGS.to_vec();
        if lag_zero {
            l.insert(0, 0);
        }
        l
    });
    let acs = bss::sample_autocov(&y, &lags)?;
    let est = bss::estimate_mixing_with(&acs, MixingOptions { use_lag_zero: lag_zero })?;
    out.row("T", y.nrows());
    out.row("roots a12", est.roots.iter().map(|r| format!("{r:.6}")).collect::<Vec<_>>().join(" "));
    out.row("a21", est.a21.iter().map(|r| format!("{r:.6}")).collect::<Vec<_>>().join(" "));
    out.row("underidentified", est.underidentified);
    out.json("report.json", &json!({"data": source, "n_obs": y.nrows(), "estimate": est}))
}

fn gcov_cmd(cfg: &ExperimentConfig, seed: u64, out: &mut Out) -> Result<(), CliError> {
    let (y, source) = bivariate_data(cfg, seed)?;
    let lags = cfg.options.lags.clone().unwrap_or_else(|| vec![0, 1, 2]);
    let init = match &cfg.options.init {
        Some(p) if p.len() != 4 => return Err(CliError::schema("options.init", "expected [a12, a21, rho1, rho2]")),
        Some(p) => p.clone(),
        None => default_gcov_start(&y)?,
    };
    let pairs = bss::default_transform_pairs();
    let fit = bss::gcov_estimate(&bss::ar1_demixing_residuals, &init, &y, &pairs, &lags, SearchBudget::default())?;
    let mut trace = String::from("evaluation,a12,a21,rho1,rho2,objective\n");
    for (k, (p, v)) in fit.trace.iter().enumerate() {
        trace.push_str(&format!("{k},{},{},{},{},{v}\n", p[0], p[1], p[2], p[3]));
    }
    out.write("trace.csv", trace)?;
    out.row("params", fit.params.iter().map(|v| format!("{v:.5}")).collect::<Vec<_>>().join(" "));
    out.row("objective", format!("{:.6e}", fit.objective));
    out.row("converged", fit.converged);
    out.row("flat", fit.flat);
    out.json(
        "report.json",
        &json!({
            "data": source,
            "n_obs": y.nrows(),
            "init": init,
            "lags": lags,
            "params": fit.params,
            "objective": fit.objective,
            "converged": fit.converged,
            "evaluations": fit.evaluations,
            "curvature": fit.curvature,
            "curvature_ratio": fit.curvature_ratio,
            "flat": fit.flat,
        }),
    )
}

/// First BSS candidate for the mixing, then the lag-1 autocorrelation of
/// each demixed series.
fn default_gcov_start(y: &DMatrix<f64>) -> Result<Vec<f64>, CliError> {
    let acs = bss::sample_autocov(y, &bss::DEFAULT_LAGS)?;
    let est = bss::estimate_mixing(&acs)?;
    let a = est.candidate(0);
    let x = bss::demix(y, &a)?;
    let ac = bss::sample_autocov(&x, &[0, 1])?;
    let rho = |j: usize| ac.gammas[1][j][j] / ac.gammas[0][j][j];
    Ok(vec![a[(0, 1)], a[(1, 0)], rho(0), rho(1)])
}

fn test_data(cfg: &ExperimentConfig, seed: u64) -> Result<(DMatrix<f64>, Option<Trajectory>), CliError> {
    if let Some(model) = &cfg.model {
        let (traj, _) = model_data(cfg, model, seed)?;
        return Ok((traj.states.clone(), Some(traj)));
    }
    match input_matrix(cfg)? {
        Some(m) => Ok((m, None)),
        None => Err(CliError::schema("io.input", "give an input file or a model to simulate from")),
    }
}

fn record_test(out: &mut Out, report: TestReport) -> Result<(), CliError> {
    out.row("statistic", format!("{:.6}", report.statistic));
    out.row("p-value", format!("{:.4}", report.p_value));
    out.row("reject", report.reject);
    let value = serde_json::to_value(&report).expect("reports serialize");
    out.summary.tests.push(report);
    out.json("report.json", &value)
}

fn markov_cmd(cfg: &ExperimentConfig, seed: u64, out: &mut Out) -> Result<(), CliError> {
    let (series, _) = test_data(cfg, seed)?;
    let dict = diagnostics::default_markov_dictionary(series.ncols());
    let report = diagnostics::markov_test(
        &series,
        &dict,
        cfg.options.level.unwrap_or(DEFAULT_LEVEL),
        Resampling::new(cfg.options.resamples.unwrap_or(DEFAULT_RESAMPLES), seed),
    )?;
    record_test(out, report)
}

fn wn_cmd(cfg: &ExperimentConfig, seed: u64, out: &mut Out) -> Result<(), CliError> {
    let (series, traj) = test_data(cfg, seed)?;
    let eps = match (&cfg.model, traj) {
        (Some(model), Some(traj)) => innovations::extract_gaussian_innovations(model, &traj)?.values,
        _ => series,
    };
    let tr = match &cfg.options.transforms {
        Some(labels) => labels
            .iter()
            .enumerate()
            .map(|(k, l)| {
                transforms::by_label(l)
                    .filter(|t| t.label != transforms::CONSTANT.label)
                    .ok_or_else(|| CliError::schema(&format!("options.transforms[{k}]"), format!("unknown transform `{l}`")))
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => diagnostics::default_white_noise_transforms(),
    };
    let report = diagnostics::strong_white_noise_test(
        &eps,
        &tr,
        cfg.options.max_lag.unwrap_or(3),
        cfg.options.level.unwrap_or(DEFAULT_LEVEL),
        Resampling::new(cfg.options.resamples.unwrap_or(DEFAULT_RESAMPLES), seed),
    )?;
    record_test(out, report)
}

/// Fixed-width two-column table, followed by any test reports.
pub fn summary_table(command: &str, summary: &RunSummary) -> String {
    let width = summary.rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0).max(24);
    let mut s = format!("{:<width$}  {}\n", "nlirf", command);
    s.push_str(&format!("{}\n", "-".repeat(width + 2 + 24)));
    for (k, v) in &summary.rows {
        s.push_str(&format!("{k:<width$}  {v}\n"));
    }
    if !summary.tests.is_empty() {
        s.push('\n');
        s.push_str(&TestReport::summary_header());
        s.push('\n');
        for t in &summary.tests {
            s.push_str(&t.summary_row());
            s.push('\n');
        }
    }
    s
}
