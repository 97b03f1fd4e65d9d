//! Experiment configuration.

use crate::error::{Error, Result};
use crate::freeconv::{FreeConvolution, SpectralPoint};
use crate::measure::Measure;
use crate::rmt::{EntryLaw, MatrixKind};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;

/// What an experiment measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExperimentKind {
    LocalLaw,
    OffDiagonalLaw,
    Delocalization,
    Rigidity,
    DensityOfStates,
    Spacing,
    #[serde(rename = "IntegratedDOS")]
    IntegratedDos,
    OperatorNorm,
    ZetaDecomposition,
    EdgeExponent,
    FreeConvOnly,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 11] = [
        ExperimentKind::LocalLaw,
        ExperimentKind::OffDiagonalLaw,
        ExperimentKind::Delocalization,
        ExperimentKind::Rigidity,
        ExperimentKind::DensityOfStates,
        ExperimentKind::Spacing,
        ExperimentKind::IntegratedDos,
        ExperimentKind::OperatorNorm,
        ExperimentKind::ZetaDecomposition,
        ExperimentKind::EdgeExponent,
        ExperimentKind::FreeConvOnly,
    ];

    /// Name as written in spec files.
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::LocalLaw => "LocalLaw",
            ExperimentKind::OffDiagonalLaw => "OffDiagonalLaw",
            ExperimentKind::Delocalization => "Delocalization",
            ExperimentKind::Rigidity => "Rigidity",
            ExperimentKind::DensityOfStates => "DensityOfStates",
            ExperimentKind::Spacing => "Spacing",
            ExperimentKind::IntegratedDos => "IntegratedDOS",
            ExperimentKind::OperatorNorm => "OperatorNorm",
            ExperimentKind::ZetaDecomposition => "ZetaDecomposition",
            ExperimentKind::EdgeExponent => "EdgeExponent",
            ExperimentKind::FreeConvOnly => "FreeConvOnly",
        }
    }

    /// The result the kind checks and the envelope it compares against.
    pub fn anchor(self) -> (&'static str, &'static str) {
        match self {
            ExperimentKind::LocalLaw => (
                "strong local law, averaged part",
                "|m - m_fc| <= F (min{lambda^1/2 N^-1/4, lambda/(sqrt(kappa+eta) sqrt N)} + 1/(N eta))",
            ),
            ExperimentKind::OffDiagonalLaw => (
                "strong local law, off-diagonal entries",
                "max_{i!=j} |G_ij| <= F (sqrt(Im m_fc/(N eta)) + 1/(N eta))",
            ),
            ExperimentKind::Delocalization => (
                "complete eigenvector delocalization",
                "sqrt N max_{alpha,i} |u_alpha(i)| <= F",
            ),
            ExperimentKind::Rigidity => (
                "rigidity of eigenvalue locations",
                "|mu_a - gamma_a| <= F (N^-2/3 [a^-1/3 + 1(a small)] + lambda^2 N^-1/3 a^-2/3 + lambda N^-1/2), a = min{alpha, N-alpha}",
            ),
            ExperimentKind::DensityOfStates => (
                "local density of states",
                "|n(E1,E2) - n_fc(E1,E2)| <= F (1/N + lambda w/(sqrt(kappa+w) sqrt N)), w = E2-E1",
            ),
            ExperimentKind::Spacing => (
                "rigidity of eigenvalue spacing",
                "| |mu_i - mu_j| - |i-j|/(N rho_fc(mu_i)) | <= F/N",
            ),
            ExperimentKind::IntegratedDos => (
                "integrated density of states",
                "|n(E) - n_fc(E)| <= F (1/N + lambda^3/2 N^-3/4 + lambda N^-5/6 + lambda sqrt(kappa)/sqrt N)",
            ),
            ExperimentKind::OperatorNorm => (
                "operator norm of H",
                "mu_N - L2 <= F (lambda/sqrt N + N^-2/3)",
            ),
            ExperimentKind::ZetaDecomposition => (
                "leading potential fluctuation zeta0",
                "|m - m_fc - zeta0| <= F/(N eta); |zeta0 - zeta0~| <= 1/(N eta)",
            ),
            ExperimentKind::EdgeExponent => (
                "square-root versus power-law edges",
                "log-log slope of rho_fc at the edge equals 1/2, or the Jacobi exponent past the threshold",
            ),
            ExperimentKind::FreeConvOnly => (
                "self-consistent equation for m_fc",
                "residual of m_fc <= 1e-11",
            ),
        }
    }

    /// Whether trials need eigenvectors.
    pub fn needs_vectors(self) -> bool {
        matches!(self, ExperimentKind::Delocalization | ExperimentKind::OffDiagonalLaw)
    }

    /// Whether the kind samples matrices at all.
    pub fn samples(self) -> bool {
        !matches!(self, ExperimentKind::EdgeExponent | ExperimentKind::FreeConvOnly)
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Ensemble template swept over `n × lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleTemplate {
    pub n: Vec<usize>,
    pub lambda: Vec<f64>,
    pub mu: Measure,
    #[serde(default = "default_matrix_kind")]
    pub matrix_kind: MatrixKind,
    #[serde(default = "default_entry_law")]
    pub entry_law: EntryLaw,
    #[serde(default)]
    pub seed: u64,
}

fn default_matrix_kind() -> MatrixKind {
    MatrixKind::ComplexHermitian
}

fn default_entry_law() -> EntryLaw {
    EntryLaw::Gaussian
}

/// Imaginary parts of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EtaSpec {
    /// Absolute values.
    Fixed(Vec<f64>),
    /// `η = c/N` for each `c`.
    PerN(Vec<f64>),
    /// `count` values spaced geometrically on `[min, max]`.
    Geometric { min: f64, max: f64, count: usize },
    /// From `top` down to `floor_per_n/N`, dividing by `ratio` each step.
    Ladder { top: f64, floor_per_n: f64, ratio: f64 },
}

impl Default for EtaSpec {
    fn default() -> Self {
        EtaSpec::Ladder { top: 2.0, floor_per_n: 10.0, ratio: 1.2 }
    }
}

impl EtaSpec {
    pub fn resolve(&self, n: usize) -> Result<Vec<f64>> {
        let bad = |msg: String| Err(Error::Config(msg));
        let out = match self {
            EtaSpec::Fixed(v) => v.clone(),
            EtaSpec::PerN(c) => c.iter().map(|c| c / n as f64).collect(),
            EtaSpec::Geometric { min, max, count } => {
                if !(*min > 0.0 && min <= max) || *count == 0 {
                    return bad(format!("geometric eta range [{min}, {max}] x {count} is invalid"));
                }
                if *count == 1 {
                    vec![*min]
                } else {
                    let r = max / min;
                    (0..*count).map(|k| min * r.powf(k as f64 / (*count - 1) as f64)).collect()
                }
            }
            EtaSpec::Ladder { top, floor_per_n, ratio } => {
                let floor = floor_per_n / n as f64;
                if !(*ratio > 1.0 && floor > 0.0 && *top >= floor) {
                    return bad(format!("eta ladder top {top}, floor {floor}, ratio {ratio} is invalid"));
                }
                let mut v = vec![*top];
                let mut eta = *top;
                while eta / ratio > floor {
                    eta /= ratio;
                    v.push(eta);
                }
                if *v.last().unwrap() > floor {
                    v.push(floor);
                }
                v
            }
        };
        if out.is_empty() {
            return bad("empty eta list".into());
        }
        if let Some(x) = out.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
            return bad(format!("eta must be positive and finite, got {x}"));
        }
        Ok(out)
    }
}

/// Spectral points where statistics are evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ZGrid {
    Points(Vec<SpectralPoint>),
    Grid { e_min: f64, e_max: f64, e_count: usize, eta: EtaSpec },
    /// Energies `L₁ + f·(L₂ − L₁)` placed relative to the computed support.
    Bulk { fractions: Vec<f64>, #[serde(default)] eta: EtaSpec },
}

impl Default for ZGrid {
    fn default() -> Self {
        ZGrid::Bulk { fractions: vec![0.5], eta: EtaSpec::default() }
    }
}

impl ZGrid {
    /// Points for dimension `n`, ordered energy-major.
    pub fn resolve(&self, n: usize, sol: &FreeConvolution) -> Result<Vec<SpectralPoint>> {
        let (energies, etas) = match self {
            ZGrid::Points(p) => {
                if p.is_empty() {
                    return Err(Error::Config("empty point list".into()));
                }
                for q in p {
                    SpectralPoint::new(q.e, q.eta).map_err(|e| Error::Config(e.to_string()))?;
                }
                return Ok(p.clone());
            }
            ZGrid::Grid { e_min, e_max, e_count, eta } => {
                if !(e_min <= e_max) || *e_count == 0 {
                    return Err(Error::Config(format!("energy range [{e_min}, {e_max}] x {e_count} is invalid")));
                }
                let es = if *e_count == 1 {
                    vec![*e_min]
                } else {
                    (0..*e_count)
                        .map(|k| e_min + (e_max - e_min) * k as f64 / (*e_count - 1) as f64)
                        .collect()
                };
                (es, eta.resolve(n)?)
            }
            ZGrid::Bulk { fractions, eta } => {
                if fractions.is_empty() || fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
                    return Err(Error::Config("bulk fractions must lie in (0, 1)".into()));
                }
                let w = sol.l2() - sol.l1();
                (fractions.iter().map(|f| sol.l1() + f * w).collect(), eta.resolve(n)?)
            }
        };
        Ok(energies
            .iter()
            .flat_map(|&e| etas.iter().map(move |&eta| SpectralPoint { e, eta }))
            .collect())
    }
}

/// Which edge an edge-exponent experiment fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeSide {
    Lower,
    Upper,
    Both,
}

/// Kind-specific knobs; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KindParams {
    /// Fraction of indices (or of the support) counted as bulk, centred.
    pub bulk_fraction: f64,
    pub window_widths: Vec<f64>,
    /// Window centres as fractions of `[L₁, L₂]`.
    pub window_centers: Vec<f64>,
    pub spacing_min: usize,
    /// Defaults to `⌊√N⌋`.
    pub spacing_max: Option<usize>,
    pub spacing_pairs: usize,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub kappa_points: usize,
    pub edge: EdgeSide,
    /// Off-diagonal entries are taken among the first this many indices.
    pub offdiag_indices: usize,
}

impl Default for KindParams {
    fn default() -> Self {
        Self {
            bulk_fraction: 0.5,
            window_widths: vec![0.05, 0.1, 0.2],
            window_centers: vec![0.5],
            spacing_min: 32,
            spacing_max: None,
            spacing_pairs: 20,
            kappa_min: 1e-4,
            kappa_max: 1e-2,
            kappa_points: 12,
            edge: EdgeSide::Upper,
            offdiag_indices: 16,
        }
    }
}

/// Recognised keys of [`ExperimentSpec::tolerances`] with their defaults.
pub const TOLERANCE_KEYS: [(&str, f64); 6] = [
    ("c_cal", 1.0),
    ("log_power", 3.0),
    ("min_row_success", 0.99),
    ("max_ratio_q95", 1.0),
    ("residual", 1e-11),
    ("edge_band", 0.1),
];

/// A declarative experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub ensemble: EnsembleTemplate,
    #[serde(default)]
    pub z_grid: ZGrid,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub params: KindParams,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

fn default_trials() -> usize {
    1
}

fn default_quantiles() -> Vec<f64> {
    vec![0.05, 0.5, 0.95]
}

impl ExperimentSpec {
    /// Strict parse; unknown fields are errors.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.ensemble.n.is_empty() || self.ensemble.n.contains(&0) {
            return bad("n list must be nonempty with positive entries".into());
        }
        if self.ensemble.lambda.is_empty() {
            return bad("lambda list must be nonempty".into());
        }
        if let Some(l) = self.ensemble.lambda.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
            return bad(format!("lambda must be nonnegative, got {l}"));
        }
        if self.quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return bad("quantiles must lie in [0, 1]".into());
        }
        for key in self.tolerances.keys() {
            if !TOLERANCE_KEYS.iter().any(|(k, _)| k == key) {
                return bad(format!("unknown tolerance key {key:?}"));
            }
        }
        let p = &self.params;
        if !(p.bulk_fraction > 0.0 && p.bulk_fraction <= 1.0) {
            return bad("bulk_fraction must lie in (0, 1]".into());
        }
        if p.window_widths.iter().any(|w| !(*w > 0.0)) || p.window_centers.iter().any(|c| !(*c > 0.0 && *c < 1.0)) {
            return bad("windows need positive widths and centres in (0, 1)".into());
        }
        if self.kind == ExperimentKind::EdgeExponent && !(p.kappa_min > 0.0 && p.kappa_min < p.kappa_max) {
            return bad("kappa range must satisfy 0 < kappa_min < kappa_max".into());
        }
        if self.kind == ExperimentKind::OffDiagonalLaw && p.offdiag_indices < 2 {
            return bad("offdiag_indices must be at least 2".into());
        }
        Ok(())
    }

    /// Value of a tolerance key, falling back to its default.
    pub fn tolerance(&self, key: &str) -> f64 {
        self.tolerances.get(key).copied().unwrap_or_else(|| {
            TOLERANCE_KEYS
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .unwrap_or_else(|| panic!("unknown tolerance key {key}"))
        })
    }
}
