//! Continuation solver for `m = ∫ dμ(v) / (λv − z − m)`.

use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::C64;

/// Residual accepted by the solver.
pub const RESIDUAL_TOL: f64 = 1e-12;
/// First rung of the η-ladder; the map is a contraction there.
pub const LADDER_START: f64 = 2.0;

const NEWTON_STEPS: usize = 50;
const FIXED_POINT_STEPS: usize = 200;
const FIXED_POINT_DAMPING: f64 = 0.5;
const FIXED_POINT_TOL: f64 = 1e-6;
const MAX_HALVINGS: usize = 40;
const MAX_SUBDIVISIONS: usize = 30;

struct Pastur<'a> {
    mu: &'a Measure,
    lambda: f64,
    z: C64,
}

impl Pastur<'_> {
    /// `Φ(m) = m − R₁(m)` and `Φ′(m) = 1 − R₂(m)`.
    fn eval(&self, m: C64) -> Result<(C64, C64)> {
        let k = self.mu.integrate_kernel_powers(self.lambda, self.z + m, 2)?;
        Ok((m - k[0], C64::new(1.0, 0.0) - k[1]))
    }

    fn newton(&self, start: C64) -> Result<(C64, f64)> {
        let mut m = start;
        let (mut phi, mut dphi) = self.eval(m)?;
        let mut res = phi.norm();
        for _ in 0..NEWTON_STEPS {
            if res == 0.0 {
                break;
            }
            let step = -phi / dphi;
            if !step.is_finite() {
                break;
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..MAX_HALVINGS {
                let cand = m + step * t;
                if cand.im > 0.0 {
                    if let Ok((p, d)) = self.eval(cand) {
                        if p.norm() < res {
                            m = cand;
                            phi = p;
                            dphi = d;
                            res = p.norm();
                            accepted = true;
                            break;
                        }
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Ok((m, res))
    }

    fn damped_fixed_point(&self, start: C64) -> Result<C64> {
        let mut m = start;
        for _ in 0..FIXED_POINT_STEPS {
            let r1 = self.mu.integrate_kernel_powers(self.lambda, self.z + m, 1)?[0];
            if (m - r1).norm() < FIXED_POINT_TOL {
                break;
            }
            m = m * FIXED_POINT_DAMPING + r1 * (1.0 - FIXED_POINT_DAMPING);
        }
        Ok(m)
    }

    /// Newton from the warm start, falling back to damped iteration then Newton.
    fn rung(&self, warm: C64) -> Result<(C64, f64)> {
        let (m, res) = self.newton(warm)?;
        if res <= RESIDUAL_TOL {
            return Ok((m, res));
        }
        let fp = self.damped_fixed_point(warm)?;
        let (m2, res2) = self.newton(fp)?;
        Ok(if res2 < res { (m2, res2) } else { (m, res) })
    }
}

fn validate(lambda: f64, eta: f64) -> Result<()> {
    if !(lambda >= 0.0) {
        return Err(Error::NegativeLambda(lambda));
    }
    if !(eta > 0.0) {
        return Err(Error::NonPositiveEta(eta));
    }
    Ok(())
}

/// Solves the self-consistent equation at `z = e + iη`.
///
/// With a warm start the target point is attempted directly first; otherwise
/// (or if that fails) the solution is continued down a halving η-ladder from
/// `η = 2`, subdividing any rung that does not converge.
pub fn solve(mu: &Measure, lambda: f64, e: f64, eta: f64, warm: Option<C64>) -> Result<C64> {
    validate(lambda, eta)?;
    if let Some(w) = warm.filter(|w| w.im > 0.0 && w.is_finite()) {
        let p = Pastur { mu, lambda, z: C64::new(e, eta) };
        if let Ok((m, res)) = p.rung(w) {
            if res <= RESIDUAL_TOL {
                return Ok(m);
            }
        }
    }
    ladder(mu, lambda, e, eta)
}

fn ladder(mu: &Measure, lambda: f64, e: f64, eta: f64) -> Result<C64> {
    let top = eta.max(LADDER_START);
    let z_top = C64::new(e, top);
    let p = Pastur { mu, lambda, z: z_top };
    let (mut m, res) = p.rung(-z_top.inv())?;
    if res > RESIDUAL_TOL {
        return Err(Error::NoConvergence { last: m, residual: res });
    }
    let mut current = top;
    while current > eta {
        let mut next = (current * 0.5).max(eta);
        let mut attempts = 0;
        loop {
            let p = Pastur { mu, lambda, z: C64::new(e, next) };
            let (cand, res) = p.rung(m)?;
            if res <= RESIDUAL_TOL {
                m = cand;
                current = next;
                break;
            }
            attempts += 1;
            if attempts > MAX_SUBDIVISIONS {
                return Err(Error::NoConvergence { last: cand, residual: res });
            }
            next = (current * next).sqrt();
        }
    }
    Ok(m)
}

/// `|m − ∫ dμ/(λv − z − m)|`.
pub fn residual(mu: &Measure, lambda: f64, z: C64, m: C64) -> Result<f64> {
    let r1 = mu.integrate_kernel_powers(lambda, z + m, 1)?[0];
    Ok((m - r1).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_inputs() {
        let mu = Measure::uniform();
        assert!(matches!(solve(&mu, -0.1, 0.0, 1.0, None), Err(Error::NegativeLambda(_))));
        assert!(matches!(solve(&mu, 0.1, 0.0, 0.0, None), Err(Error::NonPositiveEta(_))));
    }

    #[test]
    fn warm_start_gives_same_root() {
        let mu = Measure::uniform();
        let cold = solve(&mu, 0.8, 0.3, 1e-3, None).unwrap();
        let warm = solve(&mu, 0.8, 0.3, 1e-3, Some(cold * 1.01)).unwrap();
        assert!((cold - warm).norm() < 1e-11);
    }

    #[test]
    fn large_eta_tail() {
        let mu = Measure::uniform();
        let m = solve(&mu, 0.5, 0.1, 1e6, None).unwrap();
        assert!((m * C64::new(0.1, 1e6) + 1.0).norm() < 1e-5);
    }
}
