use std::path::Path;
use std::sync::Arc;

use isoflow::euclid_iouf::{CovarianceModel, OUFlowModel};
use isoflow::montecarlo::{FloorMode, SimConfig};
use isoflow::scalar_diffusion::DiffusionSpec;
use isoflow::sphere_ibf::SphereModel;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::expr::Expr;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional; must match the subcommand when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    Sphere {
        d: usize,
        #[serde(default)]
        a: Vec<f64>,
        #[serde(default)]
        b: Vec<f64>,
    },
    Iouf {
        d: usize,
        c: f64,
        #[serde(default)]
        covariance: CovarianceConfig,
    },
    Diffusion {
        drift: String,
        diffusion: String,
        /// `null`, a number, or `"inf"`; absent means unbounded.
        #[serde(default)]
        upper: Option<Bound>,
        reference: f64,
        #[serde(default)]
        label: Option<String>,
    },
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CovarianceConfig {
    #[default]
    Gaussian,
    Custom {
        b_l: String,
        b_n: String,
        beta_l: f64,
        beta_n: f64,
    },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Bound {
    Number(f64),
    Word(String),
}

impl Bound {
    fn value(&self) -> CliResult<f64> {
        match self {
            Bound::Number(v) => Ok(*v),
            Bound::Word(w) if matches!(w.as_str(), "inf" | "+inf" | "infinity") => Ok(f64::INFINITY),
            Bound::Word(w) => Err(CliError::config(format!("upper bound '{w}' is neither a number nor \"inf\""))),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
    pub r0: f64,
    pub eta: Vec<f64>,
    pub times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ceiling_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor_mode: Option<FloorModeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovBlock>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FloorModeConfig {
    Freeze,
    Linearize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovBlock {
    pub r0: f64,
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    /// `c` for IOUF models, `a<l>` or `b<l>` for sphere coefficients.
    pub parameter: String,
    pub values: Vec<f64>,
}

pub enum Model {
    Sphere(SphereModel<f64>),
    Iouf(OUFlowModel<f64>),
    Diffusion(DiffusionSpec<f64>),
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn check_command(&self, command: &str) -> CliResult<()> {
        match &self.command {
            Some(c) if c != command => Err(CliError::config(format!(
                "config is for '{c}' but the '{command}' subcommand was run"
            ))),
            _ => Ok(()),
        }
    }

    pub fn sim(&self) -> CliResult<&SimBlock> {
        self.sim.as_ref().ok_or_else(|| CliError::config("config has no \"sim\" block"))
    }
}

fn parse_expr(name: &str, src: &str) -> CliResult<Arc<Expr>> {
    Expr::parse(src)
        .map(Arc::new)
        .map_err(|e| CliError::config(format!("cannot parse {name} expression '{src}' {e}")))
}

impl ModelConfig {
    pub fn build(&self) -> CliResult<Model> {
        match self {
            ModelConfig::Sphere { d, a, b } => Ok(Model::Sphere(SphereModel::new(*d, a.clone(), b.clone())?)),
            ModelConfig::Iouf { d, c, covariance } => {
                let cov = match covariance {
                    CovarianceConfig::Gaussian => CovarianceModel::gaussian(),
                    CovarianceConfig::Custom {
                        b_l,
                        b_n,
                        beta_l,
                        beta_n,
                    } => {
                        let (el, en) = (parse_expr("b_l", b_l)?, parse_expr("b_n", b_n)?);
                        let description = format!("B_L = {b_l}, B_N = {b_n}");
                        CovarianceModel::custom(move |r| el.eval(r), move |r| en.eval(r), *beta_l, *beta_n, description)
                    }
                };
                Ok(Model::Iouf(OUFlowModel::new(*d, *c, cov)?))
            }
            ModelConfig::Diffusion {
                drift,
                diffusion,
                upper,
                reference,
                label,
            } => {
                let upper = upper.as_ref().map(Bound::value).transpose()?.unwrap_or(f64::INFINITY);
                let (b, s) = (parse_expr("drift", drift)?, parse_expr("diffusion", diffusion)?);
                let label = label.clone().unwrap_or_else(|| format!("b = {drift}, sigma = {diffusion}"));
                let spec = DiffusionSpec::new(upper, move |x| b.eval(x), move |x| s.eval(x), *reference, label)?;
                Ok(Model::Diffusion(spec))
            }
        }
    }
}

impl SimBlock {
    pub fn sim_config(&self) -> SimConfig<f64> {
        let mut cfg = SimConfig::new(self.dt, self.horizon, self.paths, self.seed);
        cfg.floor = self.floor;
        cfg.switch = self.switch;
        cfg.ceiling_gap = self.ceiling_gap;
        cfg.floor_mode = match self.floor_mode {
            Some(FloorModeConfig::Linearize) => FloorMode::Linearize,
            _ => FloorMode::Freeze,
        };
        cfg
    }
}
