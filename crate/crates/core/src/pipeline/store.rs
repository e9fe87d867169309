//! Single-file ensemble database.
//!
//! Layout (little-endian, lengths as `u64`):
//!
//! ```text
//! magic "BSPENSEM" | version u32 | rng name str | seed u64 | N_p u64 | N_s u64
//! n_grids u64 | per grid: label str, abscissae f64s
//! per record: ξ (N_p × f64) | status u8 | diagnostics | per grid: values f64s
//! split flag u8 [| seed u64 | train u64s | validate u64s]
//! sha256 of everything above (32 bytes)
//! ```

use std::path::Path;

use nalgebra::DMatrix;

use super::codec::{write_atomic, Decoder, Encoder};
use crate::error::{Error, Result};
use crate::flow::QoiLabel;

const MAGIC: &[u8; 8] = b"BSPENSEM";
pub const STORE_VERSION: u32 = 1;
pub const RNG_NAME: &str = "chacha8";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleStatus {
    Pending,
    Completed,
    Failed,
}

impl SampleStatus {
    fn code(self) -> u8 {
        match self {
            SampleStatus::Pending => 0,
            SampleStatus::Completed => 1,
            SampleStatus::Failed => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(SampleStatus::Pending),
            1 => Ok(SampleStatus::Completed),
            2 => Ok(SampleStatus::Failed),
            _ => Err(Error::Format(format!("unknown sample status {c}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleDiagnostics {
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    pub fixed_point_iterations: u64,
    pub min_dt_years: f64,
    pub mass_balance_error: f64,
    pub wall_seconds: f64,
    /// Error text of a failed solve.
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub xi: Vec<f64>,
    pub status: SampleStatus,
    pub diagnostics: SampleDiagnostics,
    /// One trajectory per store grid; empty unless completed.
    pub trajectories: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputGrid {
    pub label: QoiLabel,
    pub abscissae: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub seed: u64,
    pub train: Vec<usize>,
    pub validate: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStore {
    pub rng: String,
    pub seed: u64,
    pub n_params: usize,
    pub grids: Vec<OutputGrid>,
    pub records: Vec<SampleRecord>,
    pub split: Option<Split>,
}

/// Training inputs and outputs of one QoI.
#[derive(Debug, Clone, PartialEq)]
pub struct QoiData {
    pub abscissae: Vec<f64>,
    /// `N × N_p`.
    pub xi: DMatrix<f64>,
    /// `m × N`.
    pub values: DMatrix<f64>,
}

impl EnsembleStore {
    /// Fresh store with every sample pending. `xi` is `N_s × N_p`.
    pub fn new(seed: u64, xi: &DMatrix<f64>, grids: Vec<OutputGrid>) -> Self {
        let records = xi
            .row_iter()
            .map(|r| SampleRecord {
                xi: r.iter().copied().collect(),
                status: SampleStatus::Pending,
                diagnostics: SampleDiagnostics::default(),
                trajectories: Vec::new(),
            })
            .collect();
        EnsembleStore {
            rng: RNG_NAME.into(),
            seed,
            n_params: xi.ncols(),
            grids,
            records,
            split: None,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.records.len()
    }

    pub fn count(&self, status: SampleStatus) -> usize {
        self.records.iter().filter(|r| r.status == status).count()
    }

    pub fn indices_with(&self, status: SampleStatus) -> Vec<usize> {
        (0..self.records.len()).filter(|&j| self.records[j].status == status).collect()
    }

    pub fn grid_index(&self, label: QoiLabel) -> Result<usize> {
        self.grids
            .iter()
            .position(|g| g.label.name() == label.name())
            .ok_or_else(|| Error::invalid(format!("store has no output '{}'", label.name())))
    }

    /// `N × N_p` matrix of the selected samples.
    pub fn xi_matrix(&self, indices: &[usize]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(indices.len(), self.n_params);
        for (r, &j) in indices.iter().enumerate() {
            let rec = self
                .records
                .get(j)
                .ok_or_else(|| Error::invalid(format!("sample index {j} out of range")))?;
            for (c, v) in rec.xi.iter().enumerate() {
                out[(r, c)] = *v;
            }
        }
        Ok(out)
    }

    /// Inputs and trajectories of completed samples.
    pub fn qoi_data(&self, label: QoiLabel, indices: &[usize]) -> Result<QoiData> {
        let g = self.grid_index(label)?;
        let abscissae = self.grids[g].abscissae.clone();
        let mut values = DMatrix::zeros(abscissae.len(), indices.len());
        for (c, &j) in indices.iter().enumerate() {
            let rec = self
                .records
                .get(j)
                .ok_or_else(|| Error::invalid(format!("sample index {j} out of range")))?;
            if rec.status != SampleStatus::Completed {
                return Err(Error::invalid(format!("sample {j} has no completed solve")));
            }
            values.set_column(c, &nalgebra::DVector::from_column_slice(&rec.trajectories[g]));
        }
        Ok(QoiData {
            abscissae,
            xi: self.xi_matrix(indices)?,
            values,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (j, r) in self.records.iter().enumerate() {
            if r.xi.len() != self.n_params {
                return Err(Error::Format(format!("record {j} has {} parameters, expected {}", r.xi.len(), self.n_params)));
            }
            let want = if r.status == SampleStatus::Completed { self.grids.len() } else { 0 };
            if r.trajectories.len() != want {
                return Err(Error::Format(format!("record {j} has {} trajectories", r.trajectories.len())));
            }
            for (g, t) in r.trajectories.iter().enumerate() {
                if t.len() != self.grids[g].abscissae.len() {
                    return Err(Error::Format(format!("record {j} trajectory {g} does not match its grid")));
                }
            }
        }
        if let Some(s) = &self.split {
            let n = self.records.len();
            if s.train.iter().chain(&s.validate).any(|&j| j >= n) {
                return Err(Error::Format("split index out of range".into()));
            }
            if s.train.iter().any(|j| s.validate.contains(j)) {
                return Err(Error::Format("train and validation sets overlap".into()));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new(MAGIC, STORE_VERSION);
        e.str(&self.rng);
        e.u64(self.seed);
        e.len(self.n_params);
        e.len(self.records.len());
        e.len(self.grids.len());
        for g in &self.grids {
            e.str(&g.label.name());
            e.f64s(&g.abscissae);
        }
        for r in &self.records {
            for v in &r.xi {
                e.f64(*v);
            }
            e.u8(r.status.code());
            let d = &r.diagnostics;
            e.u64(d.accepted_steps);
            e.u64(d.rejected_steps);
            e.u64(d.fixed_point_iterations);
            e.f64(d.min_dt_years);
            e.f64(d.mass_balance_error);
            e.f64(d.wall_seconds);
            e.str(&d.message);
            e.len(r.trajectories.len());
            for t in &r.trajectories {
                e.f64s(t);
            }
        }
        match &self.split {
            None => e.u8(0),
            Some(s) => {
                e.u8(1);
                e.u64(s.seed);
                for set in [&s.train, &s.validate] {
                    e.len(set.len());
                    for &j in set {
                        e.len(j);
                    }
                }
            }
        }
        e.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (mut d, version) = Decoder::open(bytes, MAGIC, "ensemble store")?;
        if version != STORE_VERSION {
            return Err(Error::Format(format!("unsupported store version {version}")));
        }
        let rng = d.str()?;
        let seed = d.u64()?;
        let n_params = d.len()?;
        let n_samples = d.len()?;
        let n_grids = d.len()?;
        let grids = (0..n_grids)
            .map(|_| {
                Ok(OutputGrid {
                    label: QoiLabel::parse(&d.str()?)?,
                    abscissae: d.f64s()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut records = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let xi = (0..n_params).map(|_| d.f64()).collect::<Result<Vec<_>>>()?;
            let status = SampleStatus::from_code(d.u8()?)?;
            let diagnostics = SampleDiagnostics {
                accepted_steps: d.u64()?,
                rejected_steps: d.u64()?,
                fixed_point_iterations: d.u64()?,
                min_dt_years: d.f64()?,
                mass_balance_error: d.f64()?,
                wall_seconds: d.f64()?,
                message: d.str()?,
            };
            let n_traj = d.len()?;
            let trajectories = (0..n_traj).map(|_| d.f64s()).collect::<Result<Vec<_>>>()?;
            records.push(SampleRecord {
                xi,
                status,
                diagnostics,
                trajectories,
            });
        }
        let split = match d.u8()? {
            0 => None,
            1 => {
                let seed = d.u64()?;
                let mut sets = Vec::with_capacity(2);
                for _ in 0..2 {
                    let n = d.len()?;
                    sets.push((0..n).map(|_| d.index()).collect::<Result<Vec<_>>>()?);
                }
                let validate = sets.pop().expect("two sets");
                let train = sets.pop().expect("two sets");
                Some(Split { seed, train, validate })
            }
            f => return Err(Error::Format(format!("bad split flag {f}"))),
        };
        d.finish()?;
        let store = EnsembleStore {
            rng,
            seed,
            n_params,
            grids,
            records,
            split,
        };
        store.validate()?;
        Ok(store)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.validate()?;
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
