//! Potential-driven corrections to `m − m_fc`.
//!
//! For a realised potential `v₁ … v_N` the empirical kernel moments deviate
//! from their population values by
//! `r_n = N⁻¹ Σᵢ (λvᵢ − z − m_fc)⁻ⁿ − R_n`. The correction `ζ₀` solves
//! `(1 − R₂ − r₂) ζ = r₁ + (R₃ + r₃) ζ²` on the branch that vanishes as
//! `η → ∞`; `ζ̃₀ = r₁/(1 − R₂)` is its linearisation.

use crate::error::{Error, Result};
use crate::freeconv::{FreeConvolution, SpectralPoint};
use crate::rmt::{empirical_stieltjes, SpectralData};
use crate::C64;
use serde::{Deserialize, Serialize};

/// `|R₃ + r₃|` below which the quadratic degenerates to its linear part.
pub const LINEAR_CUTOFF: f64 = 1e-10;
/// Relative modulus gap below which the two roots are indistinguishable.
pub const AMBIGUITY_GAP: f64 = 1e-10;
/// `|1 − R₂|` below which `ζ̃₀` is undefined.
pub const EDGE_CUTOFF: f64 = 1e-10;
/// Ratio between successive rungs of [`zeta0_continued`].
pub const LADDER_RATIO: f64 = 1.2;

/// Which expression produced `ζ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Linear,
    /// `(a − √(a² − 4br₁))/(2b)` with the principal square root.
    QuadraticMinus,
    /// `(a + √(a² − 4br₁))/(2b)`.
    QuadraticPlus,
}

/// Caller-owned continuation state for one `(E, trial)` ladder.
#[derive(Debug, Clone, Default)]
pub struct ZetaHistory {
    last: Option<C64>,
}

impl ZetaHistory {
    pub fn new() -> Self {
        Self::default()
    }
    pub fn last(&self) -> Option<C64> {
        self.last
    }
}

/// Everything computed at one spectral point for one potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationTerms {
    pub r1: C64,
    pub r2: C64,
    pub r3: C64,
    pub zeta_tilde: C64,
    pub zeta0: C64,
    pub point: SpectralPoint,
    pub branch: Branch,
    /// `|bζ₀² − aζ₀ + r₁|`.
    pub residual: f64,
}

/// `[r₁, r₂, r₃]`.
pub fn empirical_r_all(v: &[f64], sol: &FreeConvolution, point: SpectralPoint) -> Result<[C64; 3]> {
    if v.is_empty() {
        return Err(Error::InvalidArgument("empty potential".into()));
    }
    let lambda = sol.lambda();
    let big = sol.r_moments(point)?;
    if lambda == 0.0 {
        return Ok([C64::new(0.0, 0.0); 3]);
    }
    let tau = point.z() + sol.m_fc(point)?;
    let mut acc = [C64::new(0.0, 0.0); 3];
    for &x in v {
        let d = C64::new(lambda * x, 0.0) - tau;
        if d.norm() < 1e-300 {
            return Err(Error::PoleOnSupport { tau });
        }
        let inv = d.inv();
        let mut p = inv;
        for (n, slot) in acc.iter_mut().enumerate() {
            *slot += p - big[n];
            p *= inv;
        }
    }
    let inv_n = 1.0 / v.len() as f64;
    Ok(acc.map(|s| s * inv_n))
}

/// `r_n`, `n ∈ 1..=3`.
pub fn empirical_r(v: &[f64], sol: &FreeConvolution, point: SpectralPoint, n: u32) -> Result<C64> {
    if !(1..=3).contains(&n) {
        return Err(Error::InvalidPower(n));
    }
    Ok(empirical_r_all(v, sol, point)?[n as usize - 1])
}

/// `ζ̃₀ = r₁/(1 − R₂)`.
pub fn zeta_tilde(v: &[f64], sol: &FreeConvolution, point: SpectralPoint) -> Result<C64> {
    let r1 = empirical_r(v, sol, point, 1)?;
    let a = C64::new(1.0, 0.0) - sol.r_moment(point, 2)?;
    if a.norm() <= EDGE_CUTOFF {
        return Err(Error::EdgeDegeneracy { stability: a.norm() });
    }
    Ok(r1 / a)
}

/// Roots of `bζ² − aζ + r₁ = 0` as `(small, large, small_branch)` by modulus.
fn quadratic_roots(a: C64, b: C64, r1: C64) -> (C64, C64, Branch) {
    let s = (a * a - b * r1 * 4.0).sqrt();
    let (q, branch) = if (a + s).norm() >= (a - s).norm() {
        (a + s, Branch::QuadraticMinus)
    } else {
        (a - s, Branch::QuadraticPlus)
    };
    if q.norm() == 0.0 {
        return (C64::new(0.0, 0.0), C64::new(0.0, 0.0), branch);
    }
    let small = r1 * 2.0 / q;
    let large = q / (b * 2.0);
    (small, large, branch)
}

fn flip(b: Branch) -> Branch {
    match b {
        Branch::QuadraticMinus => Branch::QuadraticPlus,
        Branch::QuadraticPlus => Branch::QuadraticMinus,
        Branch::Linear => Branch::Linear,
    }
}

/// Selects `ζ₀` from the moments, updating `history` when supplied.
pub fn solve_zeta0(
    r: [C64; 3],
    big: [C64; 4],
    history: Option<&mut ZetaHistory>,
) -> Result<(C64, Branch)> {
    let one = C64::new(1.0, 0.0);
    let a = one - big[1] - r[1];
    let b = big[2] + r[2];
    if a.norm() < 1e-14 && b.norm() < 1e-14 {
        return Err(Error::EdgeDegeneracy { stability: a.norm() });
    }
    let (zeta, branch) = if b.norm() < LINEAR_CUTOFF {
        (r[0] / a, Branch::Linear)
    } else {
        let (small, large, branch) = quadratic_roots(a, b, r[0]);
        let gap = (large.norm() - small.norm()).abs();
        let ambiguous = gap < AMBIGUITY_GAP * large.norm().max(small.norm());
        match history.as_ref().and_then(|h| h.last) {
            Some(prev) if (large - prev).norm() < (small - prev).norm() => (large, flip(branch)),
            Some(_) => (small, branch),
            None if ambiguous => return Err(Error::BranchAmbiguity),
            None => (small, branch),
        }
    };
    if let Some(h) = history {
        h.last = Some(zeta);
    }
    Ok((zeta, branch))
}

/// `ζ₀` at `point`.
pub fn zeta0(
    v: &[f64],
    sol: &FreeConvolution,
    point: SpectralPoint,
    history: Option<&mut ZetaHistory>,
) -> Result<(C64, Branch)> {
    let r = empirical_r_all(v, sol, point)?;
    solve_zeta0(r, sol.r_moments(point)?, history)
}

/// `ζ₀` followed down a geometric η-ladder from `η = 2` to `point.eta`.
pub fn zeta0_continued(v: &[f64], sol: &FreeConvolution, point: SpectralPoint) -> Result<(C64, Branch)> {
    let mut history = ZetaHistory::new();
    let mut eta = point.eta.max(2.0);
    loop {
        let p = SpectralPoint { e: point.e, eta };
        let out = zeta0(v, sol, p, Some(&mut history))?;
        if eta <= point.eta {
            return Ok(out);
        }
        eta = (eta / LADDER_RATIO).max(point.eta);
    }
}

/// All correction terms at one point.
pub fn terms(
    v: &[f64],
    sol: &FreeConvolution,
    point: SpectralPoint,
    history: Option<&mut ZetaHistory>,
) -> Result<FluctuationTerms> {
    let r = empirical_r_all(v, sol, point)?;
    let big = sol.r_moments(point)?;
    let one = C64::new(1.0, 0.0);
    let stability = one - big[1];
    if stability.norm() <= EDGE_CUTOFF {
        return Err(Error::EdgeDegeneracy { stability: stability.norm() });
    }
    let (zeta0, branch) = solve_zeta0(r, big, history)?;
    let a = one - big[1] - r[1];
    let b = big[2] + r[2];
    Ok(FluctuationTerms {
        r1: r[0],
        r2: r[1],
        r3: r[2],
        zeta_tilde: r[0] / stability,
        zeta0,
        point,
        branch,
        residual: (b * zeta0 * zeta0 - a * zeta0 + r[0]).norm(),
    })
}

/// `(|m − m_fc|, |m − m_fc − ζ₀|)` for one sample.
pub fn decomposition_residual(data: &SpectralData, sol: &FreeConvolution, point: SpectralPoint) -> Result<(f64, f64)> {
    let diff = empirical_stieltjes(data, point) - sol.m_fc(point)?;
    let (z0, _) = zeta0(&data.potential, sol, point, None)?;
    Ok((diff.norm(), (diff - z0).norm()))
}
