//! Run configuration: one declarative TOML file drives the whole pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::estimators::RowSelection;
use crate::kernels::KernelRoute;
use crate::model::{MappingKind, ModelSpec};
use crate::sampling::BathInit;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(default = "one")]
    pub delta: f64,
    #[serde(default)]
    pub eps: f64,
    #[serde(default = "one")]
    pub xi: f64,
    #[serde(default = "one")]
    pub omega_c: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub f_modes: usize,
    #[serde(default = "one")]
    pub mass: f64,
}

fn one() -> f64 {
    1.0
}
fn default_beta() -> f64 {
    0.3
}

impl ModelBlock {
    pub fn to_spec(&self) -> ModelSpec {
        ModelSpec {
            delta: self.delta,
            eps: self.eps,
            xi: self.xi,
            omega_c: self.omega_c,
            beta: self.beta,
            f_modes: self.f_modes,
            mass: self.mass,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleBlock {
    pub method: MappingKind,
    pub n_traj: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub t_max: f64,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bath_init")]
    pub bath_init: BathInit,
    #[serde(default = "default_rows")]
    pub rows: RowSelection,
    #[serde(default = "default_blocks")]
    pub n_blocks: usize,
}

fn default_dt() -> f64 {
    0.01
}
fn default_stride() -> usize {
    1
}
fn default_bath_init() -> BathInit {
    BathInit::Classical
}
fn default_rows() -> RowSelection {
    RowSelection::All
}
fn default_blocks() -> usize {
    100
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GqmeBlock {
    pub t_cut: f64,
    pub t_final: f64,
    #[serde(default = "default_route")]
    pub route: KernelRoute,
}

fn default_route() -> KernelRoute {
    KernelRoute::FromBathCorrelators
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub xi: Vec<f64>,
    #[serde(default)]
    pub t_cut: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoBlock {
    pub output_dir: PathBuf,
    #[serde(default = "default_true")]
    pub write_correlators: bool,
    #[serde(default = "default_true")]
    pub write_kernels: bool,
    #[serde(default)]
    pub write_bath: bool,
    /// Optional external reference curve (CSV: t,p_plus[,..]) to compare
    /// the master-equation population against.
    #[serde(default)]
    pub reference_curve: Option<PathBuf>,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    pub ensemble: EnsembleBlock,
    #[serde(default)]
    pub gqme: Option<GqmeBlock>,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    pub io: IoBlock,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<RunConfig, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.model.to_spec().validate()?;
        let e = &self.ensemble;
        if e.n_traj < 1 {
            return Err(Error::Config("ensemble.n_traj must be >= 1".into()));
        }
        if !(e.dt > 0.0) || !(e.t_max > 0.0) {
            return Err(Error::Config("ensemble.dt and ensemble.t_max must be > 0".into()));
        }
        if let Some(g) = &self.gqme {
            if g.t_cut > e.t_max + 1e-12 {
                return Err(Error::Config(format!(
                    "gqme.t_cut = {} exceeds ensemble.t_max = {}",
                    g.t_cut, e.t_max
                )));
            }
            if !(g.t_final > 0.0) {
                return Err(Error::Config("gqme.t_final must be > 0".into()));
            }
        }
        if let Some(s) = &self.sweep {
            if let Some(g) = &self.gqme {
                for &tc in &s.t_cut {
                    if tc > g.t_cut.max(e.t_max) + 1e-12 {
                        return Err(Error::Config(format!(
                            "sweep.t_cut entry {tc} exceeds ensemble.t_max"
                        )));
                    }
                }
            } else if !s.t_cut.is_empty() {
                return Err(Error::Config(
                    "sweep.t_cut requires a [gqme] block".into(),
                ));
            }
        }
        Ok(())
    }
}
