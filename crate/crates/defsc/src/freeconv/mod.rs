//! Free convolution of `μ` (scaled by `λ`) with the semicircle law.
//!
//! [`FreeConvolution`] fixes `(μ, λ)`, locates the support and its edge
//! behaviour, and caches Stieltjes-transform values. Density, integrated
//! density and classical eigenvalue locations are derived from it.

mod cdf;
mod edges;
mod solver;

pub use cdf::CdfTable;
pub use edges::{
    support_endpoints, Edge, EdgeBehaviour, EdgeClass, LambdaThresholds, Support,
};
pub use solver::{residual, RESIDUAL_TOL};

use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{OnceLock, RwLock};

/// Imaginary part used for real-axis limits.
pub const ETA_FLOOR: f64 = 1e-7;
/// Energies are rounded to this grid before solving and caching.
pub const ENERGY_QUANTUM: f64 = 1e-12;
/// Band `[1/C, C]` reported by [`FreeConvolution::im_mfc_profile_check`].
pub const PROFILE_BAND: f64 = 10.0;

/// `z = e + iη` in the upper half plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub e: f64,
    pub eta: f64,
}

impl SpectralPoint {
    pub fn new(e: f64, eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::NonPositiveEta(eta));
        }
        Ok(Self { e, eta })
    }

    pub fn z(&self) -> C64 {
        C64::new(self.e, self.eta)
    }

    /// Inside `|E| ≤ e0`, `η ≤ 3`.
    pub fn in_domain(&self, e0: f64) -> bool {
        self.e.abs() <= e0 && self.eta <= 3.0
    }
}

/// Solves `m = ∫ dμ(v)/(λv − z − m)` with `Im m > 0`.
///
/// ```
/// use defsc::{freeconv::solve_mfc, Measure, SpectralPoint};
/// let m = solve_mfc(&Measure::uniform(), 0.0, SpectralPoint::new(0.0, 1.0)?, None)?;
/// // Semicircle: m = i(√5 − 1)/2.
/// assert!((m.im - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
/// # Ok::<(), defsc::Error>(())
/// ```
pub fn solve_mfc(mu: &Measure, lambda: f64, point: SpectralPoint, warm_start: Option<C64>) -> Result<C64> {
    solver::solve(mu, lambda, point.e, point.eta, warm_start)
}

/// One row of [`FreeConvolution::im_mfc_profile_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub point: SpectralPoint,
    pub im_mfc: f64,
    pub kappa: f64,
    pub inside: bool,
    /// `Im m/√(κ+η)` inside the support, `Im m·√(κ+η)/η` outside.
    pub ratio: f64,
    pub band: (f64, f64),
}

/// Result of [`FreeConvolution::edge_exponent_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ExportPoint {
    e: f64,
    eta: f64,
    re: f64,
    im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Export {
    lambda: f64,
    l1: f64,
    l2: f64,
    tau1: f64,
    tau2: f64,
    edge_class: EdgeClass,
    grid: Vec<ExportPoint>,
}

/// Exported solution as read back by [`read_export`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExportedSolution {
    pub lambda: f64,
    pub l1: f64,
    pub l2: f64,
    pub edge_class: EdgeClass,
    pub grid: Vec<(SpectralPoint, C64)>,
}

/// Parses the structured-text export written by [`FreeConvolution::export_json`].
pub fn read_export(text: &str) -> Result<ExportedSolution> {
    let ex: Export = serde_json::from_str(text)?;
    Ok(ExportedSolution {
        lambda: ex.lambda,
        l1: ex.l1,
        l2: ex.l2,
        edge_class: ex.edge_class,
        grid: ex
            .grid
            .into_iter()
            .map(|p| (SpectralPoint { e: p.e, eta: p.eta }, C64::new(p.re, p.im)))
            .collect(),
    })
}

/// The free convolution for one `(μ, λ)`.
///
/// Stieltjes values are memoised by `(E, η)`; every value is produced by the
/// same deterministic continuation, so concurrent callers observe identical
/// results regardless of evaluation order.
#[derive(Debug)]
pub struct FreeConvolution {
    mu: Measure,
    lambda: f64,
    support: Support,
    eta_floor: f64,
    cache: RwLock<HashMap<(i64, u64), C64>>,
    cdf: OnceLock<std::result::Result<CdfTable, Error>>,
}

impl FreeConvolution {
    pub fn new(mu: Measure, lambda: f64) -> Result<Self> {
        let support = support_endpoints(&mu, lambda)?;
        Ok(Self {
            mu,
            lambda,
            support,
            eta_floor: ETA_FLOOR,
            cache: RwLock::new(HashMap::new()),
            cdf: OnceLock::new(),
        })
    }

    pub fn measure(&self) -> &Measure {
        &self.mu
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn support(&self) -> &Support {
        &self.support
    }
    pub fn l1(&self) -> f64 {
        self.support.l1()
    }
    pub fn l2(&self) -> f64 {
        self.support.l2()
    }
    pub fn tau1(&self) -> f64 {
        self.support.tau1()
    }
    pub fn tau2(&self) -> f64 {
        self.support.tau2()
    }
    pub fn edge_class(&self) -> EdgeClass {
        self.support.edge_class
    }
    pub fn lambda_thresholds(&self) -> Option<LambdaThresholds> {
        self.support.thresholds
    }
    pub fn near_threshold(&self) -> bool {
        self.support.near_threshold
    }
    pub fn eta_floor(&self) -> f64 {
        self.eta_floor
    }

    /// Distance from `e` to the nearer endpoint.
    pub fn kappa(&self, e: f64) -> f64 {
        (e - self.l1()).abs().min((e - self.l2()).abs())
    }

    /// Number of cached Stieltjes values.
    pub fn cache_len(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    /// `m_fc(z)`.
    pub fn m_fc(&self, point: SpectralPoint) -> Result<C64> {
        if !(point.eta > 0.0) {
            return Err(Error::NonPositiveEta(point.eta));
        }
        let qe = (point.e / ENERGY_QUANTUM).round();
        let key = (qe as i64, point.eta.to_bits());
        if let Some(&m) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(m);
        }
        let e = qe * ENERGY_QUANTUM;
        let m = solver::solve(&self.mu, self.lambda, e, point.eta, None)?;
        let res = residual(&self.mu, self.lambda, C64::new(e, point.eta), m)?;
        assert!(res <= 1e-11, "cached value with residual {res:e}");
        self.cache.write().expect("cache lock").insert(key, m);
        Ok(m)
    }

    /// `R_n(z) = ∫ dμ(v)/(λv − z − m_fc(z))ⁿ`.
    pub fn r_moment(&self, point: SpectralPoint, n: u32) -> Result<C64> {
        if !(1..=4).contains(&n) {
            return Err(Error::InvalidPower(n));
        }
        let m = self.m_fc(point)?;
        self.mu.integrate_kernel(self.lambda, point.z() + m, n)
    }

    /// `R₁ … R₄` in one pass.
    pub fn r_moments(&self, point: SpectralPoint) -> Result<[C64; 4]> {
        let m = self.m_fc(point)?;
        self.mu.integrate_kernel_powers(self.lambda, point.z() + m, 4)
    }

    /// `α(z) = |1 − R₂(z)|`.
    pub fn stability_alpha(&self, point: SpectralPoint) -> Result<f64> {
        Ok((C64::new(1.0, 0.0) - self.r_moment(point, 2)?).norm())
    }

    /// Density of the free convolution, `Im m_fc(E + i·η_floor)/π`.
    pub fn density_fc(&self, e: f64) -> Result<f64> {
        let delta = 10.0 * self.eta_floor;
        if e < self.l1() - delta || e > self.l2() + delta {
            return Ok(0.0);
        }
        let m = self.m_fc(SpectralPoint { e, eta: self.eta_floor })?;
        Ok((m.im / PI).max(0.0))
    }

    fn cdf_table(&self) -> Result<&CdfTable> {
        self.cdf
            .get_or_init(|| CdfTable::build(self.l1(), self.l2(), |e| self.density_fc(e)))
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Integral of the density before normalisation (ideally 1).
    pub fn total_mass(&self) -> Result<f64> {
        Ok(self.cdf_table()?.total_mass())
    }

    /// Integrated density `n_fc(E) = ∫_{−∞}^{E} ρ_fc`.
    pub fn n_fc(&self, e: f64) -> Result<f64> {
        Ok(self.cdf_table()?.eval(e))
    }

    /// Classical locations `γ_α`, `α = 1..=n`, with `γ_n = L₂`.
    pub fn classical_locations(&self, n: usize) -> Result<Vec<f64>> {
        let table = self.cdf_table()?;
        Ok((1..=n)
            .map(|a| if a == n { self.l2() } else { table.quantile(a as f64 / n as f64) })
            .collect())
    }

    /// Log-log slope of the density against the distance to an endpoint.
    pub fn edge_exponent_fit(&self, upper: bool, kappa_min: f64, kappa_max: f64, points: usize) -> Result<ExponentFit> {
        let width = self.l2() - self.l1();
        if !(10.0 * self.eta_floor <= kappa_min && kappa_min < kappa_max && kappa_max <= 0.1 * width) {
            return Err(Error::InvalidArgument(format!(
                "kappa range [{kappa_min}, {kappa_max}] outside [{}, {}]",
                10.0 * self.eta_floor,
                0.1 * width
            )));
        }
        if points < 8 {
            return Err(Error::InvalidArgument("edge fit needs at least 8 points".into()));
        }
        let ratio = kappa_max / kappa_min;
        let mut xs = Vec::with_capacity(points);
        let mut ys = Vec::with_capacity(points);
        for k in 0..points {
            let kappa = kappa_min * ratio.powf(k as f64 / (points - 1) as f64);
            let e = if upper { self.l2() - kappa } else { self.l1() + kappa };
            let rho = self.density_fc(e)?;
            if rho < 1e-12 {
                return Err(Error::DegenerateFit(format!("density {rho:e} at kappa {kappa:e}")));
            }
            xs.push(kappa.ln());
            ys.push(rho.ln());
        }
        let (slope, _, r2) = least_squares(&xs, &ys);
        Ok(ExponentFit { slope, r2 })
    }

    /// Compares `Im m_fc` against its square-root profile at each point.
    pub fn im_mfc_profile_check(&self, grid: &[SpectralPoint]) -> Result<Vec<ProfileRow>> {
        grid.iter()
            .map(|&point| {
                let im = self.m_fc(point)?.im;
                let kappa = self.kappa(point.e);
                let inside = point.e >= self.l1() && point.e <= self.l2();
                let s = (kappa + point.eta).sqrt();
                let ratio = if inside { im / s } else { im * s / point.eta };
                Ok(ProfileRow {
                    point,
                    im_mfc: im,
                    kappa,
                    inside,
                    ratio,
                    band: (1.0 / PROFILE_BAND, PROFILE_BAND),
                })
            })
            .collect()
    }

    /// Structured-text export of the support and of `m_fc` on `grid`.
    pub fn export_json(&self, grid: &[SpectralPoint]) -> Result<String> {
        let points = grid
            .iter()
            .map(|&p| {
                let m = self.m_fc(p)?;
                Ok(ExportPoint { e: p.e, eta: p.eta, re: m.re, im: m.im })
            })
            .collect::<Result<Vec<_>>>()?;
        let ex = Export {
            lambda: self.lambda,
            l1: self.l1(),
            l2: self.l2(),
            tau1: self.tau1(),
            tau2: self.tau2(),
            edge_class: self.edge_class(),
            grid: points,
        };
        Ok(serde_json::to_string_pretty(&ex)?)
    }
}

/// Ordinary least squares `y ≈ slope·x + intercept`; returns `(slope, intercept, r²)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}
