//! Run configuration: built-in profiles overlaid with an optional TOML file.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{MIN_PDF_SAMPLES, MIN_SOBOL_SAMPLES};
use crate::error::{Error, Result};
use crate::flow::{FlowConfig, Mesh1D};
use crate::output_kle::Truncation;
use crate::pce::{CvGrid, CvOptions, SparseRegressionConfig};
use crate::random_input::{build_input_kle, calibrate_beta, ExponentialKernel, FieldGenerator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Laptop-sized runs.
    Desk,
    /// Full-size runs.
    Paper,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::Config(format!("unknown profile '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub correlation_length: f64,
    pub domain_length: f64,
    /// Trapezoid nodes of the Nyström discretization.
    pub n_nodes: usize,
    /// Retained input KLE terms `N_p`.
    pub n_params: usize,
    /// First shape parameter of the porosity marginal.
    pub alpha_beta: f64,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            correlation_length: 10.0,
            domain_length: 200.0,
            n_nodes: 401,
            n_params: 40,
            alpha_beta: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_samples: usize,
    pub n_train: usize,
    pub n_validate: usize,
    /// Largest tolerated fraction of failed forward solves.
    pub max_failure_fraction: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_samples: 128,
            n_train: 96,
            n_validate: 32,
            max_failure_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    /// Screening threshold; the label's default when absent.
    pub screening_tol: Option<f64>,
    /// Output KLE variance fraction.
    pub variance_tol: f64,
    /// Forces the number of KL modes when set.
    pub n_qoi: Option<usize>,
    pub k_folds: usize,
    pub orders: Vec<usize>,
    pub taus: Vec<f64>,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        let grid = CvGrid::default();
        SurrogateConfig {
            screening_tol: None,
            variance_tol: 0.99,
            n_qoi: None,
            k_folds: 10,
            orders: grid.orders,
            taus: grid.taus,
            max_iterations: 5000,
            tolerance: 1e-8,
        }
    }
}

impl SurrogateConfig {
    pub fn truncation(&self) -> Truncation {
        match self.n_qoi {
            Some(n) => Truncation::Fixed(n),
            None => Truncation::VarianceFraction(self.variance_tol),
        }
    }

    pub fn cv_options(&self, seed: u64) -> CvOptions {
        CvOptions {
            grid: CvGrid {
                orders: self.orders.clone(),
                taus: self.taus.clone(),
            },
            k_folds: self.k_folds,
            seed,
            truncation: self.truncation(),
            regression: SparseRegressionConfig {
                tau: 1.0,
                max_iterations: self.max_iterations,
                tolerance: self.tolerance,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub sobol_samples: usize,
    pub pdf_samples: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            sobol_samples: 10_000,
            pdf_samples: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub input: InputConfig,
    pub flow: FlowConfig,
    pub ensemble: EnsembleConfig,
    pub surrogate: SurrogateConfig,
    pub analysis: AnalysisConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::for_profile(Profile::Desk)
    }
}

impl PipelineConfig {
    pub fn for_profile(profile: Profile) -> Self {
        let mut cfg = PipelineConfig {
            seed: 0,
            input: InputConfig::default(),
            flow: FlowConfig::default(),
            ensemble: EnsembleConfig::default(),
            surrogate: SurrogateConfig::default(),
            analysis: AnalysisConfig::default(),
        };
        if profile == Profile::Paper {
            cfg.input.n_params = 100;
            cfg.flow.n_cells = 200;
            cfg.ensemble = EnsembleConfig {
                n_samples: 550,
                n_train: 350,
                n_validate: 200,
                max_failure_fraction: 0.05,
            };
            cfg.analysis.sobol_samples = 50_000;
        }
        cfg
    }

    /// Profile defaults with the keys present in `text` replacing them.
    pub fn from_toml(profile: Profile, text: &str) -> Result<Self> {
        let overlay: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let mut base = toml::Table::try_from(PipelineConfig::for_profile(profile))
            .map_err(|e| Error::Config(format!("{e}")))?;
        merge(&mut base, overlay);
        let cfg: PipelineConfig = toml::Value::Table(base)
            .try_into()
            .map_err(|e| Error::Config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.flow.validate()?;
        let i = &self.input;
        if !(i.correlation_length > 0.0 && i.domain_length > 0.0 && i.alpha_beta > 0.0) {
            return Err(Error::Config("input kernel parameters must be positive".into()));
        }
        if i.n_params == 0 || i.n_params > i.n_nodes {
            return Err(Error::Config("need 1 <= n_params <= n_nodes".into()));
        }
        let e = &self.ensemble;
        if e.n_train + e.n_validate > e.n_samples {
            return Err(Error::Config("n_train + n_validate exceeds n_samples".into()));
        }
        if !(0.0..=1.0).contains(&e.max_failure_fraction) {
            return Err(Error::Config("max_failure_fraction must lie in [0, 1]".into()));
        }
        let s = &self.surrogate;
        if s.orders.is_empty() || s.taus.is_empty() {
            return Err(Error::Config("empty cross-validation grid".into()));
        }
        if s.taus.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Config("tau values must be positive".into()));
        }
        if !(s.variance_tol > 0.0 && s.variance_tol < 1.0) {
            return Err(Error::Config("variance_tol must lie in (0, 1)".into()));
        }
        if let Some(t) = s.screening_tol {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config("screening_tol must lie in (0, 1)".into()));
            }
        }
        if self.analysis.sobol_samples < MIN_SOBOL_SAMPLES || self.analysis.pdf_samples < MIN_PDF_SAMPLES {
            return Err(Error::Config(format!(
                "need sobol_samples >= {MIN_SOBOL_SAMPLES} and pdf_samples >= {MIN_PDF_SAMPLES}"
            )));
        }
        Ok(())
    }

    /// Input KLE, porosity marginal and flow mesh assembled into a field map.
    pub fn field_generator(&self) -> Result<FieldGenerator> {
        let i = &self.input;
        let kernel = ExponentialKernel::new(i.correlation_length, i.domain_length)?;
        let (nodes, weights) = kernel.trapezoid_rule(i.n_nodes);
        let kle = build_input_kle(&kernel, &nodes, &weights, i.n_params)?;
        let transform = calibrate_beta(self.flow.phi_bar, i.alpha_beta)?;
        let mesh = Mesh1D::uniform(self.flow.boundary.length, self.flow.n_cells)?;
        Ok(FieldGenerator::new(kle, transform, self.flow.phi_bar, self.flow.k_bar, &mesh))
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
