//! Per-command configuration files. Every struct rejects unknown fields and
//! fills missing ones with the documented defaults.

use jacobi_transport::limitperiodic::PsiBattery;
use jacobi_transport::xychain::{build_m, XYChainSpec};
use jacobi_transport::{BlockJacobiOperator, BlockSpec, PacketSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// Parses `text` as the configuration of `command`. A top-level
/// `"command"` key is accepted when it names the same command.
pub fn parse<T: DeserializeOwned>(command: &str, text: &str) -> Result<T, CliError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| CliError::Config("configuration must be a JSON object".into()))?;
    if let Some(named) = obj.remove("command") {
        if named.as_str() != Some(command) {
            return Err(CliError::Config(format!("config names command {named}, but {command} was run")));
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
}

/// Resolved configuration echoed into outputs, with the command name first.
pub fn resolved<T: Serialize>(command: &str, config: &T) -> Value {
    let mut out = serde_json::Map::new();
    out.insert("command".into(), Value::String(command.into()));
    if let Value::Object(fields) = serde_json::to_value(config).expect("configs serialize") {
        out.extend(fields);
    }
    Value::Object(out)
}

/// Either a block Jacobi spec or an XY chain spec (turned into `M`).
pub fn operator(op: &Option<BlockSpec>, xy: &Option<XYChainSpec>) -> Result<BlockJacobiOperator, CliError> {
    match (op, xy) {
        (Some(spec), None) => Ok(BlockJacobiOperator::new(spec.clone())?),
        (None, Some(xy)) => Ok(build_m(xy)?),
        (None, None) => Err(CliError::Config("one of \"operator\" or \"xy\" is required".into())),
        (Some(_), Some(_)) => Err(CliError::Config("give only one of \"operator\" and \"xy\"".into())),
    }
}

fn delta0() -> PacketSpec {
    PacketSpec::Delta { delta: 0 }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandsConfig {
    #[serde(alias = "spec", skip_serializing_if = "Option::is_none")]
    pub operator: Option<BlockSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xy: Option<XYChainSpec>,
    pub grid: usize,
}

impl Default for BandsConfig {
    fn default() -> Self {
        Self { operator: None, xy: None, grid: 256 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QNormConfig {
    #[serde(alias = "spec", skip_serializing_if = "Option::is_none")]
    pub operator: Option<BlockSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xy: Option<XYChainSpec>,
    pub grid: usize,
}

impl Default for QNormConfig {
    fn default() -> Self {
        Self { operator: None, xy: None, grid: jacobi_transport::floquet::QNORM_GRID }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    #[serde(alias = "spec", skip_serializing_if = "Option::is_none")]
    pub operator: Option<BlockSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xy: Option<XYChainSpec>,
    pub psi: PacketSpec,
    pub times: Vec<f64>,
    pub threshold: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self { operator: None, xy: None, psi: delta0(), times: vec![1.0], threshold: 1e-12 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExponentsConfig {
    #[serde(alias = "spec", skip_serializing_if = "Option::is_none")]
    pub operator: Option<BlockSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xy: Option<XYChainSpec>,
    pub psi: PacketSpec,
    pub p: f64,
    pub t0: f64,
    pub t1: f64,
    pub samples: usize,
}

impl Default for ExponentsConfig {
    fn default() -> Self {
        Self { operator: None, xy: None, psi: delta0(), p: 2.0, t0: 10.0, t1: 200.0, samples: 12 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BallisticConfig {
    #[serde(alias = "spec", skip_serializing_if = "Option::is_none")]
    pub operator: Option<BlockSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xy: Option<XYChainSpec>,
    pub psi: PacketSpec,
    pub times: Vec<f64>,
    pub q_grid: usize,
    pub half_width: Option<usize>,
}

impl Default for BallisticConfig {
    fn default() -> Self {
        Self {
            operator: None,
            xy: None,
            psi: delta0(),
            times: vec![25.0, 50.0, 100.0, 200.0],
            q_grid: 512,
            half_width: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DerivativeConfig {
    #[serde(alias = "spec", skip_serializing_if = "Option::is_none")]
    pub operator: Option<BlockSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xy: Option<XYChainSpec>,
    pub psi: PacketSpec,
    pub t_final: f64,
    pub steps: Vec<usize>,
}

impl Default for DerivativeConfig {
    fn default() -> Self {
        Self { operator: None, xy: None, psi: delta0(), t_final: 1.0, steps: vec![16, 32, 64, 128, 256] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorollaryConfig {
    #[serde(alias = "spec", skip_serializing_if = "Option::is_none")]
    pub operator: Option<BlockSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xy: Option<XYChainSpec>,
    pub epsilon: f64,
    pub times: Vec<f64>,
    pub k_max: i64,
}

impl Default for CorollaryConfig {
    fn default() -> Self {
        Self {
            operator: None,
            xy: None,
            epsilon: 0.2,
            times: (1..=10).map(|k| 20.0 * k as f64).collect(),
            k_max: 0,
        }
    }
}

/// Random on-site field `nu ~ U[-amplitude, amplitude]`, one value per site
/// of the window.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Disorder {
    pub samples: usize,
    pub amplitude: f64,
    pub seed: u64,
    pub mu: f64,
    pub gamma: f64,
}

impl Default for Disorder {
    fn default() -> Self {
        Self { samples: 20, amplitude: 5.0, seed: 1000, mu: 1.0, gamma: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalizationConfig {
    #[serde(alias = "spec", skip_serializing_if = "Option::is_none")]
    pub operator: Option<BlockSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xy: Option<XYChainSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disorder: Option<Disorder>,
    pub window: [i64; 2],
    /// Scalar index pairs; by default `(m c, m (c + d))` for the window
    /// centre `c` and `d = 1..=max_distance`.
    pub pairs: Option<Vec<[i64; 2]>>,
    pub max_distance: i64,
    pub t_max: f64,
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        Self {
            operator: None,
            xy: None,
            disorder: None,
            window: [-200, 200],
            pairs: None,
            max_distance: 25,
            t_max: 50.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct XyVerifyConfig {
    pub mu: Vec<f64>,
    pub gamma: Vec<f64>,
    pub nu: Vec<f64>,
    pub lo: i64,
    pub hi: i64,
    pub times: Vec<f64>,
    pub pairs: Vec<[i64; 2]>,
}

impl Default for XyVerifyConfig {
    fn default() -> Self {
        Self {
            mu: vec![1.0],
            gamma: vec![0.5],
            nu: vec![1.0],
            lo: 1,
            hi: 6,
            times: vec![0.5, 1.0, 2.0],
            pairs: vec![[2, 4], [1, 5]],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LyapunovConfig {
    pub w: Vec<f64>,
    pub energies: Vec<[f64; 2]>,
    pub steps: Vec<usize>,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self { w: vec![0.0], energies: vec![[0.0, 0.1]], steps: vec![100, 1000] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThoulessConfig {
    pub w: Vec<f64>,
    pub z: Vec<[f64; 2]>,
    pub grid: usize,
}

impl Default for ThoulessConfig {
    fn default() -> Self {
        Self { w: vec![0.0], z: vec![[0.0, 3.0]], grid: 2048 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DtConfig {
    pub w: Vec<f64>,
    pub lambda: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub alpha: f64,
}

impl Default for DtConfig {
    fn default() -> Self {
        Self { w: vec![0.0], lambda: 1.0, k: 2.0, t: 100.0, alpha: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub psi: PacketSpec,
    pub t: f64,
    pub p: f64,
    pub m_env: u32,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self { w: vec![0.0], v: vec![0.1, -0.1], psi: delta0(), t: 5.0, p: 2.0, m_env: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenericConfig {
    pub stages: usize,
    pub p: f64,
    pub m_env: u32,
    pub battery: PsiBattery,
}

impl Default for GenericConfig {
    fn default() -> Self {
        Self { stages: 3, p: 2.0, m_env: 1, battery: PsiBattery::Delta }
    }
}
