//! Self-contained surrogate files.
//!
//! Layout (little-endian, lengths as `u64`):
//!
//! ```text
//! magic "BSPSURRG" | version u32 | label str
//! n_p u64 | N_qoi u64 | N_ord u64 | m u64 | N_p (full) u64 | tau f64
//! K_r (n_p × u64) | abscissae, mean, weights (m × f64 each)
//! eigenvalues (N_qoi × f64) | eigenvectors (m × N_qoi, column-major)
//! coefficients (N_qoi × P, row-major)
//! sha256 of everything above (32 bytes)
//! ```

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::codec::{write_atomic, Decoder, Encoder};
use crate::error::{Error, Result};
use crate::flow::QoiLabel;
use crate::pce::{build_basis, BispectralSurrogate, ModePCE};
use crate::screening::ReducedSet;

const MAGIC: &[u8; 8] = b"BSPSURRG";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateSnapshot {
    pub label: QoiLabel,
    pub surrogate: BispectralSurrogate,
}

impl SurrogateSnapshot {
    pub fn to_bytes(&self) -> Vec<u8> {
        let s = &self.surrogate;
        let (m, nq) = (s.n_abscissae(), s.n_qoi());
        let mut e = Encoder::new(MAGIC, SNAPSHOT_VERSION);
        e.str(&self.label.name());
        e.len(s.n_reduced());
        e.len(nq);
        e.len(s.basis.max_degree);
        e.len(m);
        e.len(s.reduced_set.n_full);
        e.f64(s.tau);
        for &j in &s.reduced_set.indices {
            e.len(j);
        }
        for v in [&s.abscissae, &s.mean, &s.weights] {
            for x in v.iter() {
                e.f64(*x);
            }
        }
        for l in &s.eigenvalues {
            e.f64(*l);
        }
        for x in s.eigenfunctions.iter() {
            e.f64(*x);
        }
        for mode in &s.modes {
            for c in &mode.coefficients {
                e.f64(*c);
            }
        }
        e.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (mut d, version) = Decoder::open(bytes, MAGIC, "surrogate")?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::Format(format!("unsupported surrogate version {version}")));
        }
        let label = QoiLabel::parse(&d.str()?)?;
        let n_p = d.len()?;
        let nq = d.len()?;
        let n_ord = d.len()?;
        let m = d.len()?;
        let n_full = d.len()?;
        let tau = d.f64()?;
        let indices = (0..n_p).map(|_| d.index()).collect::<Result<Vec<_>>>()?;
        if indices.windows(2).any(|w| w[0] >= w[1]) || indices.last().is_some_and(|&j| j >= n_full) {
            return Err(Error::Format("reduced index set is not ascending within range".into()));
        }
        let mut read = |n: usize| (0..n).map(|_| d.f64()).collect::<Result<Vec<_>>>();
        let abscissae = read(m)?;
        let mean = read(m)?;
        let weights = read(m)?;
        let eigenvalues = read(nq)?;
        let eigenfunctions = DMatrix::from_column_slice(m, nq, &read(m * nq)?);
        let basis = build_basis(n_p, n_ord)?;
        let p = basis.len();
        let modes = (0..nq)
            .map(|_| read(p).map(|coefficients| ModePCE { coefficients }))
            .collect::<Result<Vec<_>>>()?;
        d.finish()?;
        Ok(SurrogateSnapshot {
            label,
            surrogate: BispectralSurrogate {
                abscissae,
                mean,
                weights,
                eigenvalues,
                eigenfunctions,
                basis,
                modes,
                reduced_set: ReducedSet { indices, n_full },
                tau,
            },
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())?;
        write_atomic(&Self::manifest_path(path), self.manifest_text().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// `<file>.txt`.
    pub fn manifest_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".txt");
        PathBuf::from(s)
    }

    pub fn manifest_text(&self) -> String {
        let s = &self.surrogate;
        let kr: Vec<String> = s.reduced_set.indices.iter().map(|j| (j + 1).to_string()).collect();
        let lam: Vec<String> = s.eigenvalues.iter().map(|l| format!("{l:.6e}")).collect();
        let nnz = s.modes.iter().map(|m| m.coefficients.iter().filter(|c| **c != 0.0).count()).sum::<usize>();
        format!(
            "qoi = {}\nversion = {}\nabscissae = {} on [{}, {}]\nn_full = {}\nreduced_set = [{}]\nn_qoi = {}\nn_ord = {}\nbasis_terms = {}\ntau = {}\nnonzero_coefficients = {}\neigenvalues = [{}]\n",
            self.label.name(),
            SNAPSHOT_VERSION,
            s.n_abscissae(),
            s.abscissae.first().copied().unwrap_or(f64::NAN),
            s.abscissae.last().copied().unwrap_or(f64::NAN),
            s.reduced_set.n_full,
            kr.join(", "),
            s.n_qoi(),
            s.basis.max_degree,
            s.basis.len(),
            s.tau,
            nnz,
            lam.join(", "),
        )
    }
}
