use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use kolmogorov::averages::AveragePolicy;
use kolmogorov::certificate::CertificatePolicy;
use kolmogorov::grid::{Grid, GridDescriptor};
use kolmogorov::lyapunov::VerifyOptions;
use kolmogorov::model::{LotkaVolterra, SamplingPolicy, SystemSpec};
use kolmogorov::solver::SolveControls;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_solver")]
    pub solver: SolveControls<f64>,
    #[serde(default)]
    pub averages: AveragePolicy<f64>,
    #[serde(default)]
    pub certificate: CertificateConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub verify: VerifyOptions<f64>,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn default_solver() -> SolveControls<f64> {
    SolveControls::new(1e-3, 10.0, 10)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub domain: Vec<f64>,
    pub lotka_volterra: LotkaVolterra<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Nodes per axis; a single entry applies to every axis.
    pub nodes: Vec<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { nodes: vec![101] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertificateConfig {
    pub delta_override: Option<(f64, f64)>,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    pub sampling: SamplingPolicy<f64>,
}

impl Default for CertificateConfig {
    fn default() -> Self {
        let p = CertificatePolicy::<f64>::default();
        CertificateConfig {
            delta_override: p.delta_override,
            epsilon_start: p.epsilon_start,
            epsilon_min: p.epsilon_min,
            sampling: p.sampling,
        }
    }
}

/// Initial field for the reference solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldInit {
    /// Independent uniform values per node in `[lower, upper]`; the
    /// permanence box when unset.
    RandomBox {
        lower: Option<f64>,
        upper: Option<f64>,
    },
    Constant {
        values: Vec<f64>,
    },
}

/// Initial field for the comparison solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairInit {
    Scale { factor: f64 },
    Same,
    RandomBox { lower: Option<f64>, upper: Option<f64> },
    Constant { values: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub u0: FieldInit,
    pub v0: PairInit,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            u0: FieldInit::RandomBox {
                lower: None,
                upper: None,
            },
            v0: PairInit::Scale { factor: 1.2 },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub t2: Vec<f64>,
    pub radius: f64,
    pub eps_target: f64,
    /// Defaults to `10 / gamma * ln(1e6 Z)` for a granted certificate, else 10.
    pub horizon: Option<f64>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            t2: vec![2.0, 4.0],
            radius: 1e-3,
            eps_target: 1e-2,
            horizon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// Dotted config paths set together to each value.
    pub paths: Vec<String>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: Vec<Axis>,
    /// Also run the verification pipeline at every granted point.
    pub verify: bool,
}

impl RunConfig {
    pub fn spec(&self) -> Result<SystemSpec<f64>> {
        SystemSpec::lotka_volterra(self.system.domain.clone(), self.system.lotka_volterra.clone())
            .context("invalid system block")
    }

    pub fn grid(&self) -> Result<Grid<f64>> {
        let dim = self.system.domain.len();
        let nodes = match self.grid.nodes.as_slice() {
            [n] => vec![*n; dim],
            other => other.to_vec(),
        };
        Grid::new(&GridDescriptor {
            extents: self.system.domain.clone(),
            nodes,
        })
        .context("invalid grid block")
    }

    pub fn certificate_policy(&self) -> CertificatePolicy<f64> {
        CertificatePolicy {
            delta_override: self.certificate.delta_override,
            epsilon_start: self.certificate.epsilon_start,
            epsilon_min: self.certificate.epsilon_min,
            sampling: self.certificate.sampling.clone(),
            averages: self.averages.clone(),
        }
    }
}

/// Deserializes a config value, reporting the field path of any error.
pub fn from_value(value: Value) -> Result<RunConfig> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        anyhow!("config field `{path}`: {}", e.into_inner())
    })
}

pub fn load(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let value: Value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let inner = e.into_inner();
        anyhow!(
            "config {}: line {}, column {}: {inner}",
            path.display(),
            inner.line(),
            inner.column()
        )
    })?;
    from_value(value.clone())?;
    Ok(value)
}

/// Sets the dotted `path` (object keys and array indices) in `value`.
pub fn set_path(value: &mut Value, path: &str, x: f64) -> Result<()> {
    let mut cur = value;
    for seg in path.split('.') {
        cur = match cur {
            Value::Array(items) => {
                let len = items.len();
                let k: usize = seg
                    .parse()
                    .map_err(|_| anyhow!("path `{path}`: `{seg}` is not an array index"))?;
                items
                    .get_mut(k)
                    .ok_or_else(|| anyhow!("path `{path}`: index {k} out of range (length {len})"))?
            }
            Value::Object(map) => map.entry(seg.to_string()).or_insert(Value::Object(Default::default())),
            _ => bail!("path `{path}`: `{seg}` does not name a field"),
        };
    }
    *cur = serde_json::Number::from_f64(x)
        .map(Value::Number)
        .ok_or_else(|| anyhow!("path `{path}`: value {x} is not finite"))?;
    Ok(())
}

/// Parses `PATH[,PATH...]=v1,v2,...`.
pub fn parse_axis(text: &str) -> Result<Axis> {
    let (paths, values) = text
        .split_once('=')
        .ok_or_else(|| anyhow!("axis `{text}` must look like PATH[,PATH]=v1,v2"))?;
    let paths: Vec<String> = paths.split(',').map(|p| p.trim().to_string()).collect();
    if paths.iter().any(|p| p.is_empty()) {
        bail!("axis `{text}` has an empty path");
    }
    let values = values
        .split(',')
        .filter(|v| !v.trim().is_empty())
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("axis `{text}`: bad value `{v}`"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Axis { paths, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn axis_parsing() {
        let a = parse_axis("system.lotka_volterra.b0.0.1,system.lotka_volterra.b0.1.0=0.1,0.5,1").unwrap();
        assert_eq!(a.paths.len(), 2);
        assert_eq!(a.values, vec![0.1, 0.5, 1.0]);
        assert!(parse_axis("nopath").is_err());
        assert!(parse_axis("a=x").is_err());
        let empty = parse_axis("a=").unwrap();
        assert!(empty.values.is_empty());
    }

    #[test]
    fn path_setting() {
        let mut v = json!({"system": {"lotka_volterra": {"b0": [[2.0, 0.1], [0.1, 2.0]]}}});
        set_path(&mut v, "system.lotka_volterra.b0.0.1", 0.7).unwrap();
        assert_eq!(v["system"]["lotka_volterra"]["b0"][0][1], json!(0.7));
        set_path(&mut v, "averages.min_window", 10.0).unwrap();
        assert_eq!(v["averages"]["min_window"], json!(10.0));
        assert!(set_path(&mut v, "system.lotka_volterra.b0.5.0", 1.0).is_err());
        assert!(set_path(&mut v, "system.lotka_volterra.b0.x", 1.0).is_err());
    }

    #[test]
    fn error_reports_field_path() {
        let v = json!({"system": {"domain": [1.0], "lotka_volterra": {"a0": "three", "b0": [[1.0]]}}});
        let err = from_value(v).unwrap_err().to_string();
        assert!(err.contains("system.lotka_volterra.a0"), "{err}");
    }
}
