use std::path::Path;

use anyhow::{bail, Context, Result};
use gark::integrator_dae::DaeProblem;
use gark::integrator_ode::OdeProblem;
use gark::problems::{brusselator, dahlquist_split, logistic_split, zla_with, BrusselatorConfig, ZlaConfig};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Run configuration file. Keys mirror the long command-line flags; a flag
/// given on the command line wins over the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n0: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rungs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ref_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub brusselator: Option<BrusselatorConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zla: Option<ZlaConfig>,
    /// Per-partition eigenvalues as [re, im] pairs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logistic_y0: Option<f64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
            }
        }
    }
}

pub enum Problem {
    Ode(OdeProblem),
    Dae(DaeProblem),
}

impl Problem {
    pub fn t_span(&self) -> (f64, f64) {
        match self {
            Problem::Ode(p) => p.t_span,
            Problem::Dae(p) => p.t_span,
        }
    }
}

pub const PROBLEMS: [&str; 4] = ["brusselator", "zla", "logistic", "dahlquist"];

pub fn build_problem(name: &str, cfg: &RunConfig) -> Result<Problem> {
    Ok(match name {
        "brusselator" => {
            let b = cfg.brusselator.clone().unwrap_or_default();
            if b.interior_points < 3 {
                bail!("brusselator needs at least 3 interior points");
            }
            Problem::Ode(brusselator(&b))
        }
        "zla" => Problem::Dae(zla_with(&cfg.zla.clone().unwrap_or_default())),
        "logistic" => Problem::Ode(logistic_split(cfg.logistic_y0.unwrap_or(0.5))),
        "dahlquist" => {
            let l: Vec<Complex64> = cfg
                .lambdas
                .clone()
                .unwrap_or_else(|| vec![[-1.0, 0.0], [-10.0, 0.0]])
                .iter()
                .map(|[re, im]| Complex64::new(*re, *im))
                .collect();
            if l.is_empty() {
                bail!("dahlquist needs at least one eigenvalue");
            }
            Problem::Ode(dahlquist_split(&l))
        }
        other => bail!("unknown problem {other:?}; expected one of {}", PROBLEMS.join(", ")),
    })
}
