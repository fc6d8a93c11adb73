//! Experiment configuration, read from TOML.
//!
//! ```toml
//! [model]
//! name = "nls"            # nls | wave | nonlocal_nls
//! lambda = 1.0            # nls: coupling
//! sigma = 1               # nls: power, B = -iλ|u|^{2σ}u
//! # potential = "sine_gordon" | "polynomial", gamma = 1.0, coefficients = [..]   (wave)
//! # kappa = 1.0, rho_min = 1e-3                                                   (nonlocal_nls)
//! band = 16               # Fourier modes k = -band..band
//! # n_phys = 64           # physical grid; default is the dealiasing size
//!
//! [method]
//! tableau = "midpoint"    # midpoint | gauss1 | gauss2 | gauss3
//! stage_tol = 1e-12
//! scheme = "fixed_point"  # fixed_point | newton
//!
//! [run]
//! h = [0.1, 0.05]         # or h_range = { start = 0.1, ratio = 0.5, count = 5 }
//! t_final = 1.0
//! sample_every = 1
//! seed = 0                # auxiliary randomness (gradient directions)
//! [run.initial]
//! kind = "gevrey_decay"   # gevrey_decay | plane_wave | explicit
//! tau = 1.0
//! ell = 0.0
//! amplitude = 1.0
//! seed = 7
//!
//! [bea]
//! policy = "explicit"     # explicit | coupled
//! n = [4]
//! m = []                  # empty: full band
//! tau = 1.0
//! delta = 0.25
//! n_max = 6
//!
//! [output]
//! dir = "out"
//! formats = ["csv"]
//! ```

use std::path::{Path, PathBuf};

use gevrey_bea::bea::DEFAULT_N_MAX;
use gevrey_bea::models::{Nonlinearity, PdeModel, Potential};
use gevrey_bea::rk::{StageScheme, StageSolveConfig};
use gevrey_bea::spectral::FourierGrid;
use gevrey_bea::tableau::{tableau_by_id, ButcherTableau};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub method: MethodConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub bea: BeaConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Nls,
    Wave,
    NonlocalNls,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialName {
    SineGordon,
    Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: ModelName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_min: Option<f64>,
    pub band: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_phys: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    FixedPoint,
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub tableau: String,
    #[serde(default = "default_stage_tol")]
    pub stage_tol: f64,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeName,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_stage_tol() -> f64 {
    1e-12
}

fn default_scheme() -> SchemeName {
    SchemeName::FixedPoint
}

fn default_max_iter() -> usize {
    200
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HRange {
    pub start: f64,
    pub ratio: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_range: Option<HRange>,
    pub t_final: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    #[serde(default)]
    pub seed: u64,
    pub initial: InitialCondition,
}

fn default_sample_every() -> usize {
    1
}

/// One explicitly given Fourier coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficient {
    pub k: i64,
    #[serde(default)]
    pub component: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Random phases, `|û_k| = amplitude e^{-τ|k|} (1+|k|)^{-ℓ}`.
    GevreyDecay {
        tau: f64,
        #[serde(default)]
        ell: f64,
        amplitude: f64,
        #[serde(default)]
        seed: u64,
    },
    /// `u = amplitude e^{ikx}` (complex fields) or `amplitude cos(kx)` (real fields).
    PlaneWave { k: i64, amplitude: f64 },
    /// Listed coefficients; real models get the conjugate at `-k` filled in.
    Explicit { coefficients: Vec<Coefficient> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    Explicit,
    Coupled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeaConfig {
    #[serde(default = "default_policy")]
    pub policy: PolicyName,
    /// Truncation orders; the first one drives drift studies.
    #[serde(default)]
    pub n: Vec<usize>,
    /// Cutoffs scanned by `projscan`; the largest one is the explicit band.
    #[serde(default)]
    pub m: Vec<u64>,
    /// `τ` of the coupled policy.
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Gevrey exponent; must equal the model's when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Overrides `χ = δ / (2 e η c_F)` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// Order of the closeness table; default `p + 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closeness_n: Option<usize>,
    #[serde(default = "default_gradient_dirs")]
    pub gradient_dirs: usize,
    /// Step sizes of the exponential-fit table; default the run's list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expfit_h: Option<Vec<f64>>,
}

fn default_policy() -> PolicyName {
    PolicyName::Explicit
}

fn default_tau() -> f64 {
    1.0
}

fn default_delta() -> f64 {
    0.25
}

fn default_n_max() -> usize {
    DEFAULT_N_MAX
}

fn default_gradient_dirs() -> usize {
    8
}

impl Default for BeaConfig {
    fn default() -> Self {
        BeaConfig {
            policy: default_policy(),
            n: Vec::new(),
            m: Vec::new(),
            tau: default_tau(),
            q: None,
            delta: default_delta(),
            chi: None,
            n_max: default_n_max(),
            closeness_n: None,
            gradient_dirs: default_gradient_dirs(),
            expfit_h: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<String> {
    vec!["csv".to_string()]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            formats: default_formats(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn check_steps(hs: &[f64], what: &str) -> Result<()> {
    if hs.is_empty() {
        return Err(config_err(format!("{what} is empty")));
    }
    if hs.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
        return Err(config_err(format!("{what} must be positive and finite: {hs:?}")));
    }
    let up = hs.windows(2).all(|w| w[0] < w[1]);
    let down = hs.windows(2).all(|w| w[0] > w[1]);
    if !(up || down) {
        return Err(config_err(format!("{what} must be strictly sorted: {hs:?}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    /// SHA-256 of the serialized configuration without its output section,
    /// so the output location does not change the hash.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        let text = c.to_toml()?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }

    /// Step sizes in the configured order.
    pub fn steps(&self) -> Vec<f64> {
        if let Some(h) = &self.run.h {
            return h.clone();
        }
        match self.run.h_range {
            Some(r) => (0..r.count).map(|j| r.start * r.ratio.powi(j as i32)).collect(),
            None => Vec::new(),
        }
    }

    /// Replaces every seed with `seed`.
    pub fn set_seed(&mut self, seed: u64) {
        self.run.seed = seed;
        if let InitialCondition::GevreyDecay { seed: s, .. } = &mut self.run.initial {
            *s = seed;
        }
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        let m = &self.model;
        Ok(match m.name {
            ModelName::Nls => Nonlinearity::PowerNls {
                lambda: m.lambda.unwrap_or(1.0),
                sigma: m.sigma.unwrap_or(1),
            },
            ModelName::Wave => {
                let pot = match m.potential.unwrap_or(PotentialName::SineGordon) {
                    PotentialName::SineGordon => Potential::SineGordon {
                        gamma: m.gamma.unwrap_or(1.0),
                    },
                    PotentialName::Polynomial => Potential::Polynomial(
                        m.coefficients
                            .clone()
                            .ok_or_else(|| config_err("polynomial potential needs `coefficients`"))?,
                    ),
                };
                Nonlinearity::Wave(pot)
            }
            ModelName::NonlocalNls => Nonlinearity::Nonlocal {
                kappa: m.kappa.unwrap_or(1.0),
                rho_min: m.rho_min.unwrap_or(1e-3),
            },
        })
    }

    pub fn build_model(&self) -> Result<PdeModel> {
        let nl = self.nonlinearity()?;
        let model = match self.model.n_phys {
            Some(n_phys) => {
                let grid = FourierGrid::new(self.model.band, n_phys).map_err(|e| config_err(e.to_string()))?;
                PdeModel::with_grid(nl, grid)
            }
            None => PdeModel::new(nl, self.model.band),
        };
        model.map_err(|e| config_err(e.to_string()))
    }

    pub fn build_tableau(&self) -> Result<ButcherTableau> {
        tableau_by_id(&self.method.tableau).map_err(|e| config_err(e.to_string()))
    }

    pub fn stage_config(&self) -> StageSolveConfig {
        StageSolveConfig {
            tol: self.method.stage_tol,
            max_iter: self.method.max_iter,
            scheme: match self.method.scheme {
                SchemeName::FixedPoint => StageScheme::FixedPoint,
                SchemeName::Newton => StageScheme::Newton,
            },
            ..StageSolveConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.model.band == 0 {
            return Err(config_err("model.band must be at least 1"));
        }
        let model = self.build_model()?;
        self.build_tableau()?;
        self.stage_config().validate().map_err(|e| config_err(e.to_string()))?;
        if self.run.h.is_some() == self.run.h_range.is_some() {
            return Err(config_err("give exactly one of run.h and run.h_range"));
        }
        if let Some(r) = self.run.h_range {
            if r.count == 0 || !(r.ratio > 0.0) || r.ratio == 1.0 {
                return Err(config_err("run.h_range needs count >= 1 and a positive ratio != 1"));
            }
        }
        check_steps(&self.steps(), "run.h")?;
        if !(self.run.t_final.is_finite() && self.run.t_final > 0.0) {
            return Err(config_err(format!("run.t_final must be positive, got {}", self.run.t_final)));
        }
        if self.run.sample_every == 0 {
            return Err(config_err("run.sample_every must be at least 1"));
        }
        if let Some(hs) = &self.bea.expfit_h {
            check_steps(hs, "bea.expfit_h")?;
        }
        if let Some(q) = self.bea.q {
            if (q - model.q()).abs() > 1e-12 {
                return Err(config_err(format!("bea.q = {q} differs from the model's q = {}", model.q())));
            }
        }
        if self.bea.n.iter().any(|&n| n == 0 || n > self.bea.n_max.max(DEFAULT_N_MAX)) {
            return Err(config_err(format!("bea.n entries must lie in 1..={}", self.bea.n_max.max(DEFAULT_N_MAX))));
        }
        if self.bea.m.iter().any(|&m| m == 0 || m > model.band_max()) {
            return Err(config_err(format!("bea.m entries must lie in 1..={}", model.band_max())));
        }
        if !(self.bea.tau > 0.0 && self.bea.delta > 0.0) || self.bea.chi.is_some_and(|c| !(c > 0.0)) {
            return Err(config_err("bea.tau, bea.delta and bea.chi must be positive"));
        }
        if self.output.formats.iter().any(|f| f != "csv") {
            return Err(config_err(format!("unsupported output formats {:?}; only csv", self.output.formats)));
        }
        crate::initial::build(self, &model)?;
        Ok(())
    }
}
