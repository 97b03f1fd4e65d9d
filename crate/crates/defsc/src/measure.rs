//! Potential laws `μ` on `[-1, 1]`.
//!
//! Two families are supported: Jacobi densities
//! `Z⁻¹ (1+v)^α (1−v)^β d(v)` with a polynomial `d` that is positive on the
//! closed interval, and finite atomic mixtures (used for closed-form checks).
//! Both integrate the resolvent-type kernels `1 / (λv − τ)ⁿ` that drive the
//! self-consistent equation.

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_gk, adaptive_gk_real, gauss_jacobi, GaussRule, Vals};
use crate::C64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::{Arc, OnceLock};

/// Node counts tried, in order, before falling back to adaptive integration.
pub const KERNEL_LEVELS: [usize; 5] = [64, 128, 256, 512, 1024];

const POSITIVITY_GRID: usize = 2001;
const SAMPLER_GRID: usize = 4097;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum MeasureRepr {
    Jacobi { alpha: f64, beta: f64, d: Vec<f64> },
    Atomic { atoms: Vec<(f64, f64)> },
}

/// A bounded-support probability law on `[-1, 1]`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub enum Measure {
    Jacobi(JacobiMeasure),
    Atomic(AtomicMeasure),
}

impl TryFrom<MeasureRepr> for Measure {
    type Error = Error;
    fn try_from(r: MeasureRepr) -> Result<Self> {
        match r {
            MeasureRepr::Jacobi { alpha, beta, d } => Measure::jacobi(alpha, beta, &d),
            MeasureRepr::Atomic { atoms } => Measure::atomic(&atoms),
        }
    }
}

impl From<Measure> for MeasureRepr {
    fn from(m: Measure) -> Self {
        match m {
            Measure::Jacobi(j) => MeasureRepr::Jacobi {
                alpha: j.alpha,
                beta: j.beta,
                d: j.d_coeffs.to_vec(),
            },
            Measure::Atomic(a) => MeasureRepr::Atomic { atoms: a.atoms },
        }
    }
}

impl fmt::Debug for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measure::Jacobi(j) => j.fmt(f),
            Measure::Atomic(a) => a.fmt(f),
        }
    }
}

/// `Z⁻¹ (1+v)^α (1−v)^β d(v)` on `[-1, 1]`.
#[derive(Clone)]
pub struct JacobiMeasure {
    alpha: f64,
    beta: f64,
    d_coeffs: Arc<[f64]>,
    z_norm: f64,
    mean: f64,
    rules: Arc<[OnceLock<GaussRule>; 5]>,
    sampler: Arc<OnceLock<InverseCdf>>,
}

impl PartialEq for JacobiMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.alpha == other.alpha && self.beta == other.beta && self.d_coeffs == other.d_coeffs
    }
}

impl fmt::Debug for JacobiMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JacobiMeasure")
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("d_coeffs", &self.d_coeffs)
            .field("z_norm", &self.z_norm)
            .field("mean", &self.mean)
            .finish()
    }
}

/// Finite mixture of point masses.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    atoms: Vec<(f64, f64)>,
}

fn horner(coeffs: &[f64], v: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * v + c)
}

impl JacobiMeasure {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn d_coeffs(&self) -> &[f64] {
        &self.d_coeffs
    }
    /// Normalisation constant `Z`.
    pub fn z_norm(&self) -> f64 {
        self.z_norm
    }
    /// Mean of the law; recorded, never subtracted from the support.
    pub fn shift(&self) -> f64 {
        self.mean
    }
    pub fn d(&self, v: f64) -> f64 {
        horner(&self.d_coeffs, v)
    }
    fn degree(&self) -> usize {
        self.d_coeffs.len().saturating_sub(1)
    }

    /// `∫ (1+v)^(α+da) (1−v)^(β+db) d(v) dv / Z`, exact for polynomial `d`.
    pub(crate) fn shifted_moment(&self, da: f64, db: f64, extra: impl Fn(f64) -> f64, extra_deg: usize) -> Result<f64> {
        let n = (self.degree() + extra_deg) / 2 + 1;
        let rule = gauss_jacobi(n, self.alpha + da, self.beta + db)?;
        Ok(rule.integrate(|v| self.d(v) * extra(v)) / self.z_norm)
    }

    fn rule(&self, level: usize) -> &GaussRule {
        self.rules[level].get_or_init(|| {
            let mut r = gauss_jacobi(KERNEL_LEVELS[level], self.alpha, self.beta)
                .expect("exponents validated at construction");
            for (w, &x) in r.weights.iter_mut().zip(&r.nodes) {
                *w *= horner(&self.d_coeffs, x) / self.z_norm;
            }
            r
        })
    }

    fn density(&self, v: f64) -> f64 {
        if !(-1.0..=1.0).contains(&v) {
            return 0.0;
        }
        (1.0 + v).powf(self.alpha) * (1.0 - v).powf(self.beta) * self.d(v) / self.z_norm
    }

    fn kernel_with_rule(rule: &GaussRule, lambda: f64, tau: C64, powers: usize) -> Vals {
        let mut out = [C64::new(0.0, 0.0); 4];
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let inv = (C64::new(lambda * x, 0.0) - tau).inv();
            let mut p = inv * w;
            for slot in out.iter_mut().take(powers) {
                *slot += p;
                p *= inv;
            }
        }
        out
    }

    /// Adaptive fallback: split `[-1, 1]` at ±½ and at the projected pole,
    /// map the end pieces through `u = (1 ∓ v)^(1+exponent)`.
    fn kernel_adaptive(&self, lambda: f64, tau: C64, powers: usize) -> Vals {
        let mut cuts = vec![-1.0, -0.5, 0.5, 1.0];
        let pole = tau.re / lambda;
        if pole > -1.0 && pole < 1.0 && !cuts.contains(&pole) {
            cuts.push(pole);
        }
        cuts.sort_by(f64::total_cmp);
        let kernel = move |v: f64, weight: f64| -> Vals {
            let inv = (C64::new(lambda * v, 0.0) - tau).inv();
            let mut out = [C64::new(0.0, 0.0); 4];
            let mut p = inv * weight;
            for slot in out.iter_mut().take(powers) {
                *slot += p;
                p *= inv;
            }
            out
        };
        let mut total = [C64::new(0.0, 0.0); 4];
        let last = cuts.len() - 2;
        for (i, win) in cuts.windows(2).enumerate() {
            let (lo, hi) = (win[0], win[1]);
            let part = if i == 0 {
                let e = 1.0 + self.alpha;
                adaptive_gk(
                    |u: f64| {
                        let v = -1.0 + u.powf(1.0 / e);
                        kernel(v, (1.0 - v).powf(self.beta) * self.d(v) / (self.z_norm * e))
                    },
                    0.0,
                    (1.0 + hi).powf(e),
                    1e-14,
                    1e-14,
                    4000,
                )
            } else if i == last {
                let e = 1.0 + self.beta;
                adaptive_gk(
                    |u: f64| {
                        let v = 1.0 - u.powf(1.0 / e);
                        kernel(v, (1.0 + v).powf(self.alpha) * self.d(v) / (self.z_norm * e))
                    },
                    0.0,
                    (1.0 - lo).powf(e),
                    1e-14,
                    1e-14,
                    4000,
                )
            } else {
                adaptive_gk(|v: f64| kernel(v, self.density(v)), lo, hi, 1e-14, 1e-14, 4000)
            };
            for c in 0..4 {
                total[c] += part.value[c];
            }
        }
        total
    }

    fn kernel(&self, lambda: f64, tau: C64, powers: usize) -> Vals {
        let mut prev = Self::kernel_with_rule(self.rule(0), lambda, tau, powers);
        for level in 1..KERNEL_LEVELS.len() {
            let cur = Self::kernel_with_rule(self.rule(level), lambda, tau, powers);
            let ok = (0..powers).all(|c| (cur[c] - prev[c]).norm() <= 1e-12 * cur[c].norm().max(1.0));
            if ok {
                return cur;
            }
            prev = cur;
        }
        self.kernel_adaptive(lambda, tau, powers)
    }

    fn sampler(&self) -> &InverseCdf {
        self.sampler.get_or_init(|| InverseCdf::build(self))
    }
}

impl AtomicMeasure {
    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }
}

impl Measure {
    /// Builds a Jacobi measure; `d_coeffs` lists polynomial coefficients of
    /// `d`, constant term first.
    pub fn jacobi(alpha: f64, beta: f64, d_coeffs: &[f64]) -> Result<Self> {
        if !(alpha > -1.0 && beta > -1.0) {
            return Err(Error::NonIntegrable { alpha, beta });
        }
        if d_coeffs.is_empty() || d_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("d needs finite coefficients".into()));
        }
        for k in 0..POSITIVITY_GRID {
            let v = -1.0 + 2.0 * k as f64 / (POSITIVITY_GRID - 1) as f64;
            if horner(d_coeffs, v) <= 0.0 {
                return Err(Error::NonPositiveDensity { at: v });
            }
        }
        let mut m = JacobiMeasure {
            alpha,
            beta,
            d_coeffs: d_coeffs.into(),
            z_norm: 1.0,
            mean: 0.0,
            rules: Arc::new(Default::default()),
            sampler: Arc::new(OnceLock::new()),
        };
        m.z_norm = m.shifted_moment(0.0, 0.0, |_| 1.0, 0)?;
        m.mean = m.shifted_moment(0.0, 0.0, |v| v, 1)?;
        if m.mean.abs() > 1e-10 {
            log::warn!("jacobi measure is not centered (mean = {:.6e})", m.mean);
        }
        Ok(Measure::Jacobi(m))
    }

    /// Builds an atomic measure from `(location, weight)` pairs.
    pub fn atomic(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidAtoms("need at least one atom".into()));
        }
        if atoms.iter().any(|&(x, w)| !(-1.0..=1.0).contains(&x) || !(w > 0.0)) {
            return Err(Error::InvalidAtoms(
                "locations must lie in [-1, 1] with positive weights".into(),
            ));
        }
        if atoms.windows(2).any(|p| p[0].0 >= p[1].0) {
            return Err(Error::InvalidAtoms("locations must be strictly increasing".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidAtoms(format!("weights sum to {total}")));
        }
        let m = AtomicMeasure {
            atoms: atoms.to_vec(),
        };
        let mean: f64 = atoms.iter().map(|&(x, w)| x * w).sum();
        if mean.abs() > 1e-10 {
            log::warn!("atomic measure is not centered (mean = {mean:.6e})");
        }
        Ok(Measure::Atomic(m))
    }

    /// Uniform law on `[-1, 1]`.
    pub fn uniform() -> Self {
        Self::jacobi(0.0, 0.0, &[1.0]).expect("uniform law is admissible")
    }

    /// Point mass at `x`.
    pub fn dirac(x: f64) -> Result<Self> {
        Self::atomic(&[(x, 1.0)])
    }

    /// Reads the structured-text form `{"kind": "jacobi", ...}`.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("measure serialises")
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Measure::Atomic(_))
    }

    /// Leftmost and rightmost points of the support.
    pub fn support_bounds(&self) -> (f64, f64) {
        match self {
            Measure::Jacobi(_) => (-1.0, 1.0),
            Measure::Atomic(a) => (a.atoms[0].0, a.atoms[a.atoms.len() - 1].0),
        }
    }

    /// Symmetric under `v ↦ −v`.
    pub fn is_symmetric(&self) -> bool {
        match self {
            Measure::Jacobi(j) => {
                j.alpha == j.beta && j.d_coeffs.iter().skip(1).step_by(2).all(|&c| c == 0.0)
            }
            Measure::Atomic(a) => {
                let n = a.atoms.len();
                (0..n).all(|i| {
                    let (x, w) = a.atoms[i];
                    let (y, u) = a.atoms[n - 1 - i];
                    x == -y && w == u
                })
            }
        }
    }

    pub fn density(&self, v: f64) -> Result<f64> {
        match self {
            Measure::Jacobi(j) => Ok(j.density(v)),
            Measure::Atomic(_) => Err(Error::NoDensity),
        }
    }

    /// `∫ v dμ(v)`.
    pub fn mean(&self) -> f64 {
        match self {
            Measure::Jacobi(j) => j.mean,
            Measure::Atomic(a) => a.atoms.iter().map(|&(x, w)| x * w).sum(),
        }
    }

    /// `n`-point Gauss–Jacobi rule with `d(v)/Z` folded into the weights.
    pub fn quadrature_nodes(&self, n: usize) -> Result<GaussRule> {
        let Measure::Jacobi(j) = self else {
            return Err(Error::NoDensity);
        };
        if let Some(level) = KERNEL_LEVELS.iter().position(|&k| k == n) {
            return Ok(j.rule(level).clone());
        }
        let mut r = gauss_jacobi(n, j.alpha, j.beta)?;
        for (w, &x) in r.weights.iter_mut().zip(&r.nodes) {
            *w *= j.d(x) / j.z_norm;
        }
        Ok(r)
    }

    fn check_pole(&self, lambda: f64, tau: C64) -> Result<()> {
        let (lo, hi) = self.support_bounds();
        if tau.im == 0.0 && tau.re >= lambda * lo && tau.re <= lambda * hi {
            return Err(Error::PoleOnSupport { tau });
        }
        if let Measure::Atomic(a) = self {
            if a
                .atoms
                .iter()
                .any(|&(x, _)| (C64::new(lambda * x, 0.0) - tau).norm() < 1e-14)
            {
                return Err(Error::PoleOnSupport { tau });
            }
        }
        Ok(())
    }

    /// `∫ dμ(v) / (λv − τ)ᵏ` for `k = 1..=powers`, returned in slots `0..powers`.
    pub fn integrate_kernel_powers(&self, lambda: f64, tau: C64, powers: usize) -> Result<Vals> {
        if !(1..=4).contains(&powers) {
            return Err(Error::InvalidPower(powers as u32));
        }
        self.check_pole(lambda, tau)?;
        if lambda == 0.0 {
            let inv = (-tau).inv();
            let mut out = [C64::new(0.0, 0.0); 4];
            let mut p = inv;
            for slot in out.iter_mut().take(powers) {
                *slot = p;
                p *= inv;
            }
            return Ok(out);
        }
        match self {
            Measure::Atomic(a) => {
                let mut out = [C64::new(0.0, 0.0); 4];
                for &(x, w) in &a.atoms {
                    let inv = (C64::new(lambda * x, 0.0) - tau).inv();
                    let mut p = inv;
                    for slot in out.iter_mut().take(powers) {
                        *slot += p * w;
                        p *= inv;
                    }
                }
                Ok(out)
            }
            Measure::Jacobi(j) => Ok(j.kernel(lambda, tau, powers)),
        }
    }

    /// `∫ dμ(v) / (λv − τ)ⁿ`, `n ∈ 1..=4`.
    pub fn integrate_kernel(&self, lambda: f64, tau: C64, n: u32) -> Result<C64> {
        if !(1..=4).contains(&n) {
            return Err(Error::InvalidPower(n));
        }
        Ok(self.integrate_kernel_powers(lambda, tau, n as usize)?[n as usize - 1])
    }

    /// `count` i.i.d. draws, consuming the caller's generator.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        match self {
            Measure::Atomic(a) => {
                let mut cumulative = Vec::with_capacity(a.atoms.len());
                let mut acc = 0.0;
                for &(_, w) in &a.atoms {
                    acc += w;
                    cumulative.push(acc);
                }
                (0..count)
                    .map(|_| {
                        let u: f64 = rng.random::<f64>() * acc;
                        let k = cumulative.partition_point(|&c| c <= u);
                        a.atoms[k.min(a.atoms.len() - 1)].0
                    })
                    .collect()
            }
            Measure::Jacobi(j) => {
                let s = j.sampler();
                (0..count).map(|_| s.quantile(rng.random::<f64>())).collect()
            }
        }
    }

    /// CDF of the law at `v`, from the sampler's precomputed table.
    pub fn cdf(&self, v: f64) -> f64 {
        match self {
            Measure::Atomic(a) => a.atoms.iter().filter(|x| x.0 <= v).map(|x| x.1).sum(),
            Measure::Jacobi(j) => j.sampler().cdf(v),
        }
    }
}

/// Monotone cubic Hermite model of the CDF on a Chebyshev–Lobatto grid.
#[derive(Debug, Clone)]
struct InverseCdf {
    x: Vec<f64>,
    cdf: Vec<f64>,
    slope: Vec<f64>,
}

impl InverseCdf {
    fn build(m: &JacobiMeasure) -> Self {
        let n = SAMPLER_GRID;
        let x: Vec<f64> = (0..n)
            .map(|k| -(std::f64::consts::PI * k as f64 / (n - 1) as f64).cos())
            .collect();
        // Cell masses in the endpoint-regularising variable of each half.
        let left = |a: f64, b: f64| {
            let e = 1.0 + m.alpha;
            adaptive_gk_real(
                |u| {
                    let v = -1.0 + u.powf(1.0 / e);
                    (1.0 - v).powf(m.beta) * m.d(v) / (m.z_norm * e)
                },
                (1.0 + a).powf(e),
                (1.0 + b).powf(e),
                1e-16,
            )
        };
        let right = |a: f64, b: f64| {
            let e = 1.0 + m.beta;
            adaptive_gk_real(
                |u| {
                    let v = 1.0 - u.powf(1.0 / e);
                    (1.0 + v).powf(m.alpha) * m.d(v) / (m.z_norm * e)
                },
                (1.0 - b).powf(e),
                (1.0 - a).powf(e),
                1e-16,
            )
        };
        let mut cdf = vec![0.0; n];
        for k in 1..n {
            let (a, b) = (x[k - 1], x[k]);
            let mass = if b <= 0.0 {
                left(a, b)
            } else if a >= 0.0 {
                right(a, b)
            } else {
                left(a, 0.0) + right(0.0, b)
            };
            cdf[k] = cdf[k - 1] + mass;
        }
        let total = cdf[n - 1];
        for c in cdf.iter_mut() {
            *c /= total;
        }
        cdf[n - 1] = 1.0;
        let mut slope: Vec<f64> = x.iter().map(|&v| m.density(v) / total).collect();
        // Fritsch–Carlson limiter keeps every cell monotone.
        for k in 0..n - 1 {
            let h = x[k + 1] - x[k];
            let secant = (cdf[k + 1] - cdf[k]) / h;
            if secant <= 0.0 {
                slope[k] = 0.0;
                slope[k + 1] = 0.0;
                continue;
            }
            if !slope[k].is_finite() {
                slope[k] = 3.0 * secant;
            }
            if !slope[k + 1].is_finite() {
                slope[k + 1] = 3.0 * secant;
            }
            let a = slope[k] / secant;
            let b = slope[k + 1] / secant;
            let r = a.hypot(b);
            if r > 3.0 {
                slope[k] *= 3.0 / r;
                slope[k + 1] *= 3.0 / r;
            }
        }
        Self { x, cdf, slope }
    }

    fn hermite(&self, k: usize, v: f64) -> f64 {
        let h = self.x[k + 1] - self.x[k];
        let t = (v - self.x[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.cdf[k]
            + (t3 - 2.0 * t2 + t) * h * self.slope[k]
            + (-2.0 * t3 + 3.0 * t2) * self.cdf[k + 1]
            + (t3 - t2) * h * self.slope[k + 1]
    }

    fn cdf(&self, v: f64) -> f64 {
        if v <= -1.0 {
            return 0.0;
        }
        if v >= 1.0 {
            return 1.0;
        }
        let k = (self.x.partition_point(|&x| x <= v) - 1).min(self.x.len() - 2);
        self.hermite(k, v).clamp(self.cdf[k], self.cdf[k + 1])
    }

    fn quantile(&self, u: f64) -> f64 {
        let k = (self.cdf.partition_point(|&c| c <= u).max(1) - 1).min(self.x.len() - 2);
        let (mut lo, mut hi) = (self.x[k], self.x[k + 1]);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.hermite(k, mid) <= u {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}
