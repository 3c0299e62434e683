use crate::error::CliError;
use nlirf::irf::ShockSpec;
use nlirf::ModelSpec;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Innovations,
    Irf,
    Pirf,
    Maxirf,
    IdentifiedSet,
    Figure1,
    Bss,
    Gcov,
    MarkovTest,
    WnTest,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Innovations => "innovations",
            Command::Irf => "irf",
            Command::Pirf => "pirf",
            Command::Maxirf => "maxirf",
            Command::IdentifiedSet => "identified-set",
            Command::Figure1 => "figure1",
            Command::Bss => "bss",
            Command::Gcov => "gcov",
            Command::MarkovTest => "markov-test",
            Command::WnTest => "wn-test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shock: Option<ShockSpec>,
    pub mc: McConfig,
    #[serde(default)]
    pub io: IoConfig,
    #[serde(default)]
    pub options: Options,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Required, either here or through `--seed`.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_replicates() -> usize {
    1000
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AngleConfig {
    Constant(f64),
    Linear(f64),
}

/// Command-specific settings. Every field is optional; unused fields are
/// ignored by commands that do not read them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<AngleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixing: Option<[[f64; 2]; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lags: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lag_zero: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resamples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_lag: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transforms: Option<Vec<String>>,
}

pub const SCHEMA_HELP: &str = r#"CONFIG SCHEMA (JSON, unknown fields are rejected)

  {
    "command": "simulate" | "innovations" | "irf" | "pirf" | "maxirf" |
               "identified-set" | "figure1" | "bss" | "gcov" |
               "markov-test" | "wn-test",
    "model":   {"family": <name>, "n": <dim>, "params": {...}},
    "shock":   {"kind": "innovation_delta" | "observable_delta",
                "vector": [..], "horizon": H},
    "mc":      {"replicates": 1000, "seed": <u64, required>},
    "io":      {"input": "data.csv", "output": "out_dir"},
    "options": {...}
  }

MODEL FAMILIES AND PARAMS
  gaussian_var1    {"phi": [[..]], "d": [[..]]}
  dar1             {"gamma": g, "alpha": a, "beta": b}            (n = 1)
  vector_dar       {"phi": [[..]], "a": [..], "b": [[..]]}
  threshold_ar1    {"alpha": a, "sigma": s}                       (n = 1)
  cond_gaussian    {"phi": [[..]], "psi": [[..]], "l0": [[..]], "s": [..]}
  euler_diffusion  {"kappa": [..], "mu": [..], "sigma0": [..], "sigma1": [..],
                    "substeps": 16}

OPTIONS (all optional)
  state       conditioning state: y_{t-1} for irf, y_t for pirf, y0 for
              simulate (default zeros)
  length      path length for simulate and for generated test data (1000;
              20000 for bss and gcov)
  a, h        maxirf: response weights and horizon
  angle       {"constant": c} or {"linear": s}, a(rho) = c or s * rho
              (identified-set; default linear 0.2)
  draws       identified-set: number of N(0, Id) draws (10000)
  segments, samples   figure1 grid resolution (75, 400)
  rho, mixing bss/gcov generated data: AR(1) coefficients and 2 x 2 mixing
              matrix (defaults [0.9, 0.2] and [[1, 0.5], [0.3, 1]])
  lags        bss/gcov autocovariance lags (1..5 for bss, [0, 1, 2] for gcov)
  lag_zero    bss: also use the lag-0 autocovariance (false)
  init        gcov start [a12, a21, rho1, rho2] (default: bss estimate)
  level       test level (0.05)
  resamples   test calibration replicates (199)
  max_lag     wn-test lags (3)
  transforms  wn-test transforms, labels from x, x^2, x^3, x^4, |x|

DATA
  io.input is a CSV with header t,y1,...,yn and consecutive integer t.
  Without an input, innovations/markov-test/wn-test simulate `length` steps
  of the model and bss/gcov simulate mixed AR(1) sources. For wn-test with a
  model, the innovations of the data under that model are tested.

OUTPUT
  CSV, JSON and SVG artifacts plus manifest.json in the output directory
  (io.output, overridden by --out; default ./nlirf-out).

EXIT STATUS
  0 success, 1 I/O failure, 2 invalid configuration or input data,
  3 numerical failure in the computation."#;

/// Parses a configuration, reporting the JSON path of the first offending
/// field.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Schema {
            path: if path.is_empty() || path == "." { "<root>".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

impl ExperimentConfig {
    pub fn seed(&self) -> Result<u64, CliError> {
        self.mc.seed.ok_or_else(|| CliError::schema("mc.seed", "missing seed (set it in the config or pass --seed)"))
    }

    pub fn model(&self) -> Result<&ModelSpec, CliError> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::schema("model", format!("`{}` needs a model", self.command.name())))
    }

    pub fn shock(&self) -> Result<&ShockSpec, CliError> {
        self.shock
            .as_ref()
            .ok_or_else(|| CliError::schema("shock", format!("`{}` needs a shock", self.command.name())))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.io.output.clone().unwrap_or_else(|| PathBuf::from("nlirf-out"))
    }
}
