//! Support endpoints and edge classification.
//!
//! An endpoint is `L = F(τ)` with `F(τ) = τ − ∫ dμ/(λv − τ)`, where `τ` is the
//! real critical point `H(τ) = ∫ dμ/(λv − τ)² = 1` outside `λ·supp μ`. When
//! no critical point exists (a Jacobi exponent above one and `λ` past the
//! matching threshold) the endpoint is `F(±λ)` and the density vanishes like a
//! power of the distance to it.

use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::C64;
use serde::{Deserialize, Serialize};

/// Offset of the classification probe from `λ·v_max`.
pub const CLASSIFY_PROBE: f64 = 1e-8;
/// Closest approach of the bisection bracket to `λ·v_max`.
pub const BRACKET_INNER: f64 = 1e-12;
/// Width of the bisection bracket.
pub const BRACKET_WIDTH: f64 = 50.0;
/// `|λ − λ_threshold|` below which the classification is flagged as fragile.
pub const NEAR_THRESHOLD: f64 = 1e-4;

const BISECTION_STEPS: usize = 200;

/// Local profile of the density at an endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EdgeBehaviour {
    SquareRoot,
    Power { exponent: f64 },
}

/// One support endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// `L₁` or `L₂`.
    pub endpoint: f64,
    /// Real preimage `τ` with `F(τ) = L`.
    pub preimage: f64,
    pub behaviour: EdgeBehaviour,
    /// `∫ dμ/(1 ∓ v)` for power edges.
    pub pole_moment: Option<f64>,
}

/// Combined classification of both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeClass {
    SquareRootBoth,
    SquareRootLowerOnly,
    SquareRootUpperOnly,
    PowerBoth,
}

impl EdgeClass {
    fn from_edges(lower: &Edge, upper: &Edge) -> Self {
        match (lower.behaviour, upper.behaviour) {
            (EdgeBehaviour::SquareRoot, EdgeBehaviour::SquareRoot) => EdgeClass::SquareRootBoth,
            (EdgeBehaviour::SquareRoot, EdgeBehaviour::Power { .. }) => EdgeClass::SquareRootLowerOnly,
            (EdgeBehaviour::Power { .. }, EdgeBehaviour::SquareRoot) => EdgeClass::SquareRootUpperOnly,
            _ => EdgeClass::PowerBoth,
        }
    }
}

/// Values of `λ` where an edge changes from square-root to power behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaThresholds {
    /// `λ₁ = (∫ dμ/(1+v)²)^{1/2}`, present when `α > 1`.
    pub lower: Option<f64>,
    /// `λ₂ = (∫ dμ/(1−v)²)^{1/2}`, present when `β > 1`.
    pub upper: Option<f64>,
}

/// Everything [`support_endpoints`] determines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub lower: Edge,
    pub upper: Edge,
    pub edge_class: EdgeClass,
    pub thresholds: Option<LambdaThresholds>,
    pub near_threshold: bool,
}

impl Support {
    pub fn l1(&self) -> f64 {
        self.lower.endpoint
    }
    pub fn l2(&self) -> f64 {
        self.upper.endpoint
    }
    pub fn tau1(&self) -> f64 {
        self.lower.preimage
    }
    pub fn tau2(&self) -> f64 {
        self.upper.preimage
    }
}

fn real_kernel(mu: &Measure, lambda: f64, tau: f64, n: u32) -> Result<f64> {
    Ok(mu.integrate_kernel(lambda, C64::new(tau, 0.0), n)?.re)
}

fn f_map(mu: &Measure, lambda: f64, tau: f64) -> Result<f64> {
    Ok(tau - real_kernel(mu, lambda, tau, 1)?)
}

/// Bisection for `H(τ) = 1` on `[inner, outer]` (either orientation), with
/// `H > 1` at `inner`.
fn bisect(mu: &Measure, lambda: f64, inner: f64, outer: f64) -> Result<f64> {
    if real_kernel(mu, lambda, outer, 2)? >= 1.0 {
        return Err(Error::NoConvergence {
            last: C64::new(outer, 0.0),
            residual: f64::INFINITY,
        });
    }
    let (mut a, mut b) = (inner, outer);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        if real_kernel(mu, lambda, mid, 2)? > 1.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

fn thresholds(mu: &Measure) -> Result<Option<LambdaThresholds>> {
    let Measure::Jacobi(j) = mu else {
        return Ok(None);
    };
    let lower = if j.alpha() > 1.0 {
        Some(j.shifted_moment(-2.0, 0.0, |_| 1.0, 0)?.sqrt())
    } else {
        None
    };
    let upper = if j.beta() > 1.0 {
        Some(j.shifted_moment(0.0, -2.0, |_| 1.0, 0)?.sqrt())
    } else {
        None
    };
    Ok((lower.is_some() || upper.is_some()).then_some(LambdaThresholds { lower, upper }))
}

fn edge(mu: &Measure, lambda: f64, upper: bool) -> Result<Edge> {
    let (lo, hi) = mu.support_bounds();
    let sign = if upper { 1.0 } else { -1.0 };
    let anchor = lambda * if upper { hi } else { lo };
    let probe = real_kernel(mu, lambda, anchor + sign * CLASSIFY_PROBE, 2)?;
    if probe > 1.0 || mu.is_atomic() {
        let tau = bisect(
            mu,
            lambda,
            anchor + sign * BRACKET_INNER,
            anchor + sign * BRACKET_WIDTH,
        )?;
        return Ok(Edge {
            endpoint: f_map(mu, lambda, tau)?,
            preimage: tau,
            behaviour: EdgeBehaviour::SquareRoot,
            pole_moment: None,
        });
    }
    let Measure::Jacobi(j) = mu else { unreachable!() };
    let (exponent, moment) = if upper {
        (j.beta(), j.shifted_moment(0.0, -1.0, |_| 1.0, 0)?)
    } else {
        (j.alpha(), j.shifted_moment(-1.0, 0.0, |_| 1.0, 0)?)
    };
    // F(±λ) = ±(λ + moment/λ).
    Ok(Edge {
        endpoint: sign * (lambda + moment / lambda),
        preimage: sign * lambda,
        behaviour: EdgeBehaviour::Power { exponent },
        pole_moment: Some(moment),
    })
}

/// Support `[L₁, L₂]` of the free convolution and its edge behaviour.
pub fn support_endpoints(mu: &Measure, lambda: f64) -> Result<Support> {
    if !(lambda >= 0.0) {
        return Err(Error::NegativeLambda(lambda));
    }
    if mu.is_atomic() && lambda > 1.0 {
        return Err(Error::MultiIntervalUnsupported { lambda });
    }
    let lower = edge(mu, lambda, false)?;
    let upper = edge(mu, lambda, true)?;
    let thresholds = thresholds(mu)?;
    let near_threshold = thresholds.is_some_and(|t| {
        [t.lower, t.upper]
            .into_iter()
            .flatten()
            .any(|th| (lambda - th).abs() <= NEAR_THRESHOLD)
    });
    if near_threshold {
        log::warn!("lambda = {lambda} is within {NEAR_THRESHOLD:e} of an edge threshold");
    }
    Ok(Support {
        edge_class: EdgeClass::from_edges(&lower, &upper),
        lower,
        upper,
        thresholds,
        near_threshold,
    })
}
