//! Sampling and diagonalising `H = λV + W`.
//!
//! `V = diag(v₁, …, v_N)` has i.i.d. entries drawn from `μ`; `W` is a Wigner
//! matrix with entry variance `1/N`. Each `(seed, trial)` pair owns two
//! independent generator streams, one per role, so trials can run in any
//! order or in parallel and still reproduce bit for bit.

mod dump;
mod resolvent;

pub use dump::{read_sidecar, write_spectrum};
pub use resolvent::{
    green_matrix, interlacing_check, resolvent_identity_check, schur_check, ward_check,
};

use crate::error::{Error, Result};
use crate::freeconv::SpectralPoint;
use crate::measure::Measure;
use crate::C64;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::{c64, Mat, Par};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Symmetry class of `W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MatrixKind {
    ComplexHermitian,
    RealSymmetric,
}

/// Distribution of the normalised Wigner entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntryLaw {
    Gaussian,
    Rademacher,
}

/// What a generator stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Potential = 0,
    Wigner = 1,
}

/// Generator for `(seed, trial, role)`.
///
/// The seed is expanded into a 256-bit key with SplitMix64; the trial and
/// role select the stream, so distinct triples never share output.
pub fn substream(seed: u64, trial: u64, role: Role) -> ChaCha20Rng {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        chunk.copy_from_slice(&(z ^ (z >> 31)).to_le_bytes());
    }
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(trial.wrapping_mul(2).wrapping_add(role as u64));
    rng
}

/// One ensemble member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_size: usize,
    pub lambda: f64,
    pub mu: Measure,
    pub kind: MatrixKind,
    pub entry_law: EntryLaw,
    pub seed: u64,
    pub trial_index: u64,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_size == 0 {
            return Err(Error::InvalidArgument("n_size must be at least 1".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::NegativeLambda(self.lambda));
        }
        Ok(())
    }

    /// The diagonal potential `v₁ … v_N`.
    pub fn sample_potential(&self) -> Vec<f64> {
        let mut rng = substream(self.seed, self.trial_index, Role::Potential);
        self.mu.sample(&mut rng, self.n_size)
    }

    pub fn sample_wigner(&self) -> HermitianMatrix {
        let mut rng = substream(self.seed, self.trial_index, Role::Wigner);
        sample_wigner(self.n_size, self.kind, self.entry_law, &mut rng)
    }

    /// Samples `(v, H)`.
    pub fn sample(&self) -> Result<(Vec<f64>, HermitianMatrix)> {
        self.validate()?;
        let v = self.sample_potential();
        let w = self.sample_wigner();
        let h = assemble(self.lambda, &v, w)?;
        Ok((v, h))
    }

    /// Samples and diagonalises.
    pub fn spectrum(&self, want_vectors: bool) -> Result<SpectralData> {
        let (v, h) = self.sample()?;
        let mut data = spectrum(&h, want_vectors)?;
        data.potential = v;
        data.config = Some(self.clone());
        Ok(data)
    }
}

/// Dense Hermitian matrix, real or complex.
#[derive(Debug, Clone)]
pub enum HermitianMatrix {
    Real(Mat<f64>),
    Complex(Mat<c64>),
}

impl HermitianMatrix {
    pub fn dim(&self) -> usize {
        match self {
            HermitianMatrix::Real(m) => m.nrows(),
            HermitianMatrix::Complex(m) => m.nrows(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        match self {
            HermitianMatrix::Real(m) => C64::new(m[(i, j)], 0.0),
            HermitianMatrix::Complex(m) => m[(i, j)],
        }
    }

    pub fn to_complex(&self) -> Mat<c64> {
        match self {
            HermitianMatrix::Real(m) => Mat::from_fn(m.nrows(), m.ncols(), |i, j| C64::new(m[(i, j)], 0.0)),
            HermitianMatrix::Complex(m) => m.clone(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i).re).sum()
    }

    pub fn max_abs(&self) -> f64 {
        let n = self.dim();
        let mut best = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                best = best.max(self.get(i, j).norm());
            }
        }
        best
    }

    /// The matrix with row and column `k` removed.
    pub fn minor(&self, k: usize) -> HermitianMatrix {
        let n = self.dim();
        let idx = |i: usize| if i < k { i } else { i + 1 };
        match self {
            HermitianMatrix::Real(m) => HermitianMatrix::Real(Mat::from_fn(n - 1, n - 1, |i, j| m[(idx(i), idx(j))])),
            HermitianMatrix::Complex(m) => {
                HermitianMatrix::Complex(Mat::from_fn(n - 1, n - 1, |i, j| m[(idx(i), idx(j))]))
            }
        }
    }

    /// Largest `|h_ij − conj(h_ji)|`, with its position.
    fn hermiticity_defect(&self) -> (usize, usize, f64) {
        let n = self.dim();
        let mut worst = (0, 0, 0.0);
        for j in 0..n {
            for i in 0..=j {
                let d = (self.get(i, j) - self.get(j, i).conj()).norm();
                if d > worst.2 {
                    worst = (i, j, d);
                }
            }
        }
        worst
    }
}

/// Samples a Wigner matrix with entry variance `1/N` off the diagonal.
///
/// Entries are drawn row by row over the upper triangle, diagonal included,
/// then mirrored.
pub fn sample_wigner<R: Rng + ?Sized>(n: usize, kind: MatrixKind, law: EntryLaw, rng: &mut R) -> HermitianMatrix {
    let nf = n as f64;
    let draw = |rng: &mut R| -> f64 {
        match law {
            EntryLaw::Gaussian => rng.sample(StandardNormal),
            EntryLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    };
    match kind {
        MatrixKind::ComplexHermitian => {
            let mut m = Mat::<c64>::zeros(n, n);
            let off = (2.0 * nf).sqrt().recip();
            let diag = nf.sqrt().recip();
            for i in 0..n {
                m[(i, i)] = C64::new(draw(rng) * diag, 0.0);
                for j in i + 1..n {
                    let x = draw(rng);
                    let y = draw(rng);
                    let w = C64::new(x * off, y * off);
                    m[(i, j)] = w;
                    m[(j, i)] = w.conj();
                }
            }
            HermitianMatrix::Complex(m)
        }
        MatrixKind::RealSymmetric => {
            let mut m = Mat::<f64>::zeros(n, n);
            let off = nf.sqrt().recip();
            let diag = (2.0 / nf).sqrt();
            for i in 0..n {
                m[(i, i)] = draw(rng) * diag;
                for j in i + 1..n {
                    let w = draw(rng) * off;
                    m[(i, j)] = w;
                    m[(j, i)] = w;
                }
            }
            HermitianMatrix::Real(m)
        }
    }
}

/// `H = λ·diag(v) + W`.
pub fn assemble(lambda: f64, v: &[f64], w: HermitianMatrix) -> Result<HermitianMatrix> {
    if v.len() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            found: v.len(),
        });
    }
    if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| !(x.abs() <= 1.0)) {
        return Err(Error::SupportViolation { index, value });
    }
    Ok(match w {
        HermitianMatrix::Real(mut m) => {
            for (i, &x) in v.iter().enumerate() {
                m[(i, i)] += lambda * x;
            }
            HermitianMatrix::Real(m)
        }
        HermitianMatrix::Complex(mut m) => {
            for (i, &x) in v.iter().enumerate() {
                m[(i, i)] += C64::new(lambda * x, 0.0);
            }
            HermitianMatrix::Complex(m)
        }
    })
}

/// Eigenvalues (ascending) and optionally eigenvectors of one sample.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    /// Column `α` is the normalised eigenvector for `eigenvalues[α]`.
    pub eigenvectors: Option<Mat<c64>>,
    pub potential: Vec<f64>,
    pub config: Option<EnsembleConfig>,
}

impl SpectralData {
    /// Spectrum-only data, for statistics that need nothing else.
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        Self {
            eigenvalues,
            eigenvectors: None,
            potential: Vec::new(),
            config: None,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    fn vectors(&self) -> Result<&Mat<c64>> {
        self.eigenvectors.as_ref().ok_or(Error::MissingVectors)
    }
}

fn evd_with<T: faer::traits::ComplexField + Copy>(a: &Mat<T>, want_vectors: bool) -> Result<(Vec<T>, Option<Mat<T>>)> {
    let n = a.nrows();
    let mut s = faer::diag::Diag::<T>::zeros(n);
    let mut u = want_vectors.then(|| Mat::<T>::zeros(n, n));
    let compute = if want_vectors {
        ComputeEigenvectors::Yes
    } else {
        ComputeEigenvectors::No
    };
    let mut buf = MemBuffer::new(evd::self_adjoint_evd_scratch::<T>(n, compute, Par::Seq, Default::default()));
    evd::self_adjoint_evd(
        a.as_ref(),
        s.as_mut(),
        u.as_mut().map(|m| m.as_mut()),
        Par::Seq,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|e| Error::EigenFailure(format!("{e:?}")))?;
    Ok((s.column_vector().iter().copied().collect(), u))
}

/// Dense Hermitian eigendecomposition, sequential within the call.
pub fn spectrum(h: &HermitianMatrix, want_vectors: bool) -> Result<SpectralData> {
    let (row, col, deviation) = h.hermiticity_defect();
    if deviation > 1e-12 {
        return Err(Error::NotHermitian { row, col, deviation });
    }
    let (eigenvalues, eigenvectors) = match h {
        HermitianMatrix::Real(m) => {
            let (vals, vecs) = evd_with(m, want_vectors)?;
            let vecs = vecs.map(|u| Mat::from_fn(u.nrows(), u.ncols(), |i, j| C64::new(u[(i, j)], 0.0)));
            (vals, vecs)
        }
        HermitianMatrix::Complex(m) => {
            let (vals, vecs) = evd_with(m, want_vectors)?;
            (vals.into_iter().map(|x| x.re).collect(), vecs)
        }
    };
    if eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenFailure("non-finite eigenvalue".into()));
    }
    Ok(SpectralData {
        eigenvalues,
        eigenvectors,
        potential: Vec::new(),
        config: None,
    })
}

/// `m_N(z) = N⁻¹ Σ_α (μ_α − z)⁻¹`.
pub fn empirical_stieltjes(data: &SpectralData, point: SpectralPoint) -> C64 {
    let z = point.z();
    let sum: C64 = data.eigenvalues.iter().map(|&x| (C64::new(x, 0.0) - z).inv()).sum();
    sum / data.len() as f64
}

/// `N⁻¹ · #{α : e1 < μ_α ≤ e2}`.
pub fn counting(data: &SpectralData, e1: f64, e2: f64) -> Result<f64> {
    if !(e1 < e2) {
        return Err(Error::InvalidArgument(format!("counting window ({e1}, {e2}] is empty")));
    }
    let lo = data.eigenvalues.partition_point(|&x| x <= e1);
    let hi = data.eigenvalues.partition_point(|&x| x <= e2);
    Ok((hi - lo) as f64 / data.len() as f64)
}

/// `max_α max_i |u_α(i)|`.
pub fn delocalization_stat(data: &SpectralData) -> Result<f64> {
    let u = data.vectors()?;
    let mut best = 0.0f64;
    for j in 0..u.ncols() {
        for i in 0..u.nrows() {
            best = best.max(u[(i, j)].norm());
        }
    }
    Ok(best)
}

/// `G_ij(z) = Σ_α u_α(i) conj(u_α(j)) / (μ_α − z)` for each requested pair.
pub fn green_entries(data: &SpectralData, point: SpectralPoint, pairs: &[(usize, usize)]) -> Result<Vec<C64>> {
    let u = data.vectors()?;
    let z = point.z();
    let weights: Vec<C64> = data.eigenvalues.iter().map(|&x| (C64::new(x, 0.0) - z).inv()).collect();
    let n = data.len();
    pairs
        .iter()
        .map(|&(i, j)| {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!("index ({i}, {j}) outside dimension {n}")));
            }
            Ok((0..n).map(|a| u[(i, a)] * u[(j, a)].conj() * weights[a]).sum())
        })
        .collect()
}

/// `max(|μ₁|, |μ_N|)`.
pub fn operator_norm(data: &SpectralData) -> f64 {
    match (data.eigenvalues.first(), data.eigenvalues.last()) {
        (Some(a), Some(b)) => a.abs().max(b.abs()),
        _ => 0.0,
    }
}
