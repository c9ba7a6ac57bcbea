//! TOML config files. Keys mirror the long flag names; a flag given on the
//! command line wins over the file, and the file wins over built-in
//! defaults. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::{arg_failure, Failure};

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, Failure> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| arg_failure(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| arg_failure(format!("invalid config {}: {e}", path.display())))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SampleFile {
    pub dist: Option<String>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct EstimateFile {
    pub p: Option<PathBuf>,
    pub q: Option<PathBuf>,
    pub group: Option<String>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub method: Option<String>,
    pub lp_tol: Option<f64>,
    pub kernel: Option<String>,
    pub path: Option<String>,
    pub alpha: Option<f64>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentFile {
    pub name: Option<String>,
    pub replicas: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub orders: Option<Vec<usize>>,
    pub sizes: Option<Vec<usize>>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub alpha: Option<f64>,
    pub mog_std: Option<f64>,
    pub method: Option<String>,
    pub path: Option<String>,
    pub jobs: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct CheckFile {
    pub group: Option<String>,
    pub kernel: Option<String>,
    pub grid: Option<usize>,
    pub include_origin: Option<bool>,
    pub min_radius: Option<f64>,
    pub delta0: Option<f64>,
    pub samples: Option<PathBuf>,
}
