use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::datagen::benchmark_latents;
use crate::diffusion::OuPhase;
use crate::error::{Error, Result};
use crate::pls_core::EtaSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Gha,
    Msg,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Gaussian latent model with random orthogonal mixing.
    Synthetic {
        sigma_xx: Vec<Vec<f64>>,
        sigma_xy: Vec<Vec<f64>>,
        sigma_yy: Vec<Vec<f64>>,
        m: usize,
        d: usize,
        seed: u64,
    },
    /// Paired rows of two CSV files, resampled with replacement per seed.
    Csv {
        x_path: PathBuf,
        y_path: PathBuf,
        #[serde(default)]
        has_header: bool,
        #[serde(default = "yes")]
        center: bool,
    },
}

fn yes() -> bool {
    true
}

impl Default for ModelSpec {
    fn default() -> Self {
        let (xx, xy, yy) = benchmark_latents();
        ModelSpec::Synthetic {
            sigma_xx: rows(&xx),
            sigma_xy: rows(&xy),
            sigma_yy: rows(&yy),
            m: 3,
            d: 3,
            seed: 0,
        }
    }
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

pub(crate) fn matrix(field: &str, rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let n = rows.len();
    let w = rows.first().map_or(0, Vec::len);
    if n == 0 || w == 0 {
        return Err(Error::config(field, "matrix is empty"));
    }
    if rows.iter().any(|r| r.len() != w) {
        return Err(Error::config(field, "rows have unequal lengths"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::config(field, "entries must be finite"));
    }
    Ok(Array2::from_shape_fn((n, w), |(i, j)| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// The `index`-th (1-based) singular pair of `Σ_XY`.
    Saddle { index: usize },
    /// Independent uniform directions on the two unit spheres.
    RandomSphere,
    Given { u: Vec<f64>, v: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogConfig {
    pub stride: u64,
    /// 1-based h-coordinates to record.
    pub h: Vec<usize>,
    pub objective: bool,
    pub alignment: bool,
}

impl Default for LogConfig {
    fn default() -> Self {
        LogConfig {
            stride: 100,
            h: vec![1, 2],
            objective: true,
            alignment: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseConfig {
    pub nu: f64,
    /// Target accuracy for the convergence event and the Phase III time.
    pub epsilon: f64,
    /// `δ = η^mu_exponent`.
    pub mu_exponent: f64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            nu: 0.1,
            epsilon: 0.05,
            mu_exponent: 0.75,
        }
    }
}

/// A coordinate snapshot compared against its O-U law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuCheckpoint {
    pub iter: u64,
    /// 1-based h-coordinate.
    pub coord: usize,
    pub phase: OuPhase,
}

fn default_checkpoints() -> Vec<OuCheckpoint> {
    let early = [10, 100, 1000].map(|iter| OuCheckpoint {
        iter,
        coord: 1,
        phase: OuPhase::Escape,
    });
    let late = [100_000, 150_000, 200_000].map(|iter| OuCheckpoint {
        iter,
        coord: 2,
        phase: OuPhase::Converge,
    });
    early.into_iter().chain(late).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub algorithm: Algorithm,
    /// Hebbian step sizes.
    pub eta: EtaSchedule,
    /// Step sizes of the convex baseline.
    pub msg_eta: EtaSchedule,
    pub n_iters: u64,
    pub n_seeds: u64,
    /// Seeds run are `base_seed .. base_seed + n_seeds`.
    pub base_seed: u64,
    pub init: InitSpec,
    pub observe_prob: f64,
    pub renormalize: bool,
    pub log: LogConfig,
    pub phases: PhaseConfig,
    pub checkpoints: Vec<OuCheckpoint>,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelSpec::default(),
            algorithm: Algorithm::Gha,
            eta: EtaSchedule::Constant { eta: 5e-5 },
            msg_eta: EtaSchedule::InverseSqrt { c: 0.05 },
            n_iters: 200_000,
            n_seeds: 100,
            base_seed: 0,
            init: InitSpec::Saddle { index: 2 },
            observe_prob: 1.0,
            renormalize: false,
            log: LogConfig::default(),
            phases: PhaseConfig::default(),
            checkpoints: default_checkpoints(),
            output_dir: None,
        }
    }
}

fn schedule_scale(s: &EtaSchedule) -> f64 {
    match *s {
        EtaSchedule::Constant { eta } => eta,
        EtaSchedule::Inverse { c } | EtaSchedule::InverseSqrt { c } => c,
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|sp| format!("byte {}..{}", sp.start, sp.end))
                .unwrap_or_else(|| "<document>".into());
            Error::config(field, e.message())
        })?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::config("config", e.to_string()))
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Dimensions `(m, d)` implied by the model block, when known without I/O.
    pub fn declared_dims(&self) -> Option<(usize, usize)> {
        match &self.model {
            ModelSpec::Synthetic { m, d, .. } => Some((*m, *d)),
            ModelSpec::Csv { .. } => None,
        }
    }

    /// Checks every field that can be checked without touching the data.
    pub fn validate(&self) -> Result<()> {
        if self.n_iters == 0 {
            return Err(Error::config("n_iters", "must be >= 1"));
        }
        if self.n_seeds == 0 {
            return Err(Error::config("n_seeds", "must be >= 1"));
        }
        if self.base_seed.checked_add(self.n_seeds).is_none() {
            return Err(Error::config("base_seed", "base_seed + n_seeds overflows"));
        }
        for (field, s) in [("eta", &self.eta), ("msg_eta", &self.msg_eta)] {
            let v = schedule_scale(s);
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(self.observe_prob > 0.0 && self.observe_prob <= 1.0) {
            return Err(Error::config(
                "observe_prob",
                format!("must lie in (0, 1], got {}", self.observe_prob),
            ));
        }
        if self.observe_prob < 1.0 && self.algorithm != Algorithm::Gha {
            return Err(Error::config(
                "observe_prob",
                "missing values are only supported with algorithm = \"gha\"",
            ));
        }
        let p = &self.phases;
        if !(p.nu > 0.0 && p.nu < 1.0) {
            return Err(Error::config("phases.nu", "must lie in (0, 1)"));
        }
        if !(p.epsilon > 0.0 && p.epsilon < 1.0) {
            return Err(Error::config("phases.epsilon", "must lie in (0, 1)"));
        }
        if !(p.mu_exponent > 0.5 && p.mu_exponent < 1.0) {
            return Err(Error::config("phases.mu_exponent", "must lie in (1/2, 1)"));
        }
        if let ModelSpec::Synthetic {
            sigma_xx,
            sigma_xy,
            sigma_yy,
            m,
            d,
            ..
        } = &self.model
        {
            if *d == 0 || d > m {
                return Err(Error::config("model.d", format!("need 1 <= d <= m, got m={m}, d={d}")));
            }
            for (field, rows) in [
                ("model.sigma_xx", sigma_xx),
                ("model.sigma_xy", sigma_xy),
                ("model.sigma_yy", sigma_yy),
            ] {
                let a = matrix(field, rows)?;
                if a.nrows() != a.ncols() {
                    return Err(Error::config(field, "must be square"));
                }
                if a.nrows() != *d && !(field == "model.sigma_xx" && a.nrows() == *m) {
                    return Err(Error::config(field, format!("expected {d} x {d}")));
                }
            }
        }
        if let Some((m, d)) = self.declared_dims() {
            self.validate_dims(m, d)?;
        }
        Ok(())
    }

    /// Checks the fields that depend on the data dimensions.
    pub fn validate_dims(&self, m: usize, d: usize) -> Result<()> {
        let n = m + d;
        if let Some(&bad) = self.log.h.iter().find(|&&i| i == 0 || i > n) {
            return Err(Error::config("log.h", format!("index {bad} outside 1..={n}")));
        }
        match &self.init {
            InitSpec::Saddle { index } if *index == 0 || *index > m.min(d) => {
                return Err(Error::config(
                    "init.index",
                    format!("singular pair {index} outside 1..={}", m.min(d)),
                ));
            }
            InitSpec::Given { u, v } => {
                if u.len() != m || v.len() != d {
                    return Err(Error::config(
                        "init",
                        format!("given pair must have lengths {m} and {d}"),
                    ));
                }
                let nu: f64 = u.iter().map(|x| x * x).sum();
                let nv: f64 = v.iter().map(|x| x * x).sum();
                if !(nu > 0.0 && nv > 0.0 && nu.is_finite() && nv.is_finite()) {
                    return Err(Error::config("init", "given vectors must be finite and nonzero"));
                }
            }
            _ => {}
        }
        if let Some(c) = self.checkpoints.iter().find(|c| c.coord == 0 || c.coord > n) {
            return Err(Error::config(
                "checkpoints.coord",
                format!("index {} outside 1..={n}", c.coord),
            ));
        }
        Ok(())
    }

    pub(crate) fn given_pair(&self) -> Option<(Array1<f64>, Array1<f64>)> {
        match &self.init {
            InitSpec::Given { u, v } => Some((Array1::from(u.clone()), Array1::from(v.clone()))),
            _ => None,
        }
    }
}
