//! Tabulated integrated density `n_fc`.
//!
//! Each half of the support is integrated in `t = √κ`, where `κ` is the
//! distance to the nearer endpoint, so the edge singularity of the
//! derivative disappears. Adaptive Simpson leaves are kept together with
//! their three samples; evaluation integrates the local quadratic
//! interpolant, which makes the table cheap to query and invert.

use crate::error::Result;

/// Forced panel break at this distance from each endpoint.
pub const EDGE_BREAK: f64 = 1e-3;
/// Total absolute tolerance of the adaptive Simpson pass.
pub const SIMPSON_TOL: f64 = 1e-10;

const MIN_DEPTH: u32 = 4;
const MAX_DEPTH: u32 = 40;

#[derive(Debug, Clone)]
struct Panel {
    a: f64,
    h: f64,
    f: [f64; 3],
    before: f64,
    mass: f64,
    quadratic: bool,
}

impl Panel {
    fn new(a: f64, h: f64, f: [f64; 3]) -> Self {
        let mass = h / 6.0 * (f[0] + 4.0 * f[1] + f[2]);
        let c1 = -3.0 * f[0] + 4.0 * f[1] - f[2];
        let c2 = 2.0 * f[0] - 4.0 * f[1] + 2.0 * f[2];
        let vertex = if c2 > 0.0 { -c1 / (2.0 * c2) } else { -1.0 };
        let dip = if (0.0..=1.0).contains(&vertex) {
            f[0] + c1 * vertex + c2 * vertex * vertex
        } else {
            0.0
        };
        Self {
            a,
            h,
            f,
            before: 0.0,
            mass,
            quadratic: dip >= 0.0,
        }
    }

    /// Mass on `[a, a + u·h]`, nondecreasing in `u`.
    fn partial(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if self.quadratic {
            let (u2, u3) = (u * u, u * u * u);
            let i0 = 2.0 * (u3 / 3.0 - 0.75 * u2 + 0.5 * u);
            let i1 = -4.0 * (u3 / 3.0 - 0.5 * u2);
            let i2 = 2.0 * (u3 / 3.0 - 0.25 * u2);
            return (self.h * (self.f[0] * i0 + self.f[1] * i1 + self.f[2] * i2)).clamp(0.0, self.mass);
        }
        // Piecewise-linear shape rescaled to the Simpson mass.
        let total = 0.25 * (self.f[0] + 2.0 * self.f[1] + self.f[2]);
        if total <= 0.0 {
            return self.mass * u;
        }
        let lin = if u <= 0.5 {
            let fu = self.f[0] + (self.f[1] - self.f[0]) * 2.0 * u;
            0.5 * u * (self.f[0] + fu)
        } else {
            let fu = self.f[1] + (self.f[2] - self.f[1]) * 2.0 * (u - 0.5);
            0.25 * (self.f[0] + self.f[1]) + 0.5 * (u - 0.5) * (self.f[1] + fu)
        };
        self.mass * (lin / total).clamp(0.0, 1.0)
    }
}

/// Cumulative mass of one half of the support, as a function of `t`.
#[derive(Debug, Clone)]
struct Half {
    panels: Vec<Panel>,
    mass: f64,
}

impl Half {
    fn build(g: &dyn Fn(f64) -> Result<f64>, t_max: f64, tol: f64) -> Result<Self> {
        let mut cuts = vec![0.0];
        let t_break = EDGE_BREAK.sqrt();
        if t_break < t_max {
            cuts.push(t_break);
        }
        cuts.push(t_max);
        let mut panels = Vec::new();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let m = 0.5 * (a + b);
            let (fa, fm, fb) = (g(a)?, g(m)?, g(b)?);
            let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            simpson(g, a, b, [fa, fm, fb], whole, tol * (b - a) / t_max, 0, &mut panels)?;
        }
        let mut acc = 0.0;
        for p in panels.iter_mut() {
            p.before = acc;
            acc += p.mass;
        }
        Ok(Self { panels, mass: acc })
    }

    fn cumulative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let k = self.panels.partition_point(|p| p.a <= t).saturating_sub(1);
        let p = &self.panels[k];
        p.before + p.partial((t - p.a) / p.h)
    }

    /// Smallest `t` with `cumulative(t) = target`.
    fn invert(&self, target: f64) -> f64 {
        let k = self
            .panels
            .partition_point(|p| p.before + p.mass < target)
            .min(self.panels.len() - 1);
        let p = &self.panels[k];
        let want = target - p.before;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if p.partial(mid) < want {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        p.a + 0.5 * (lo + hi) * p.h
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson(
    g: &dyn Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    f: [f64; 3],
    whole: f64,
    tol: f64,
    depth: u32,
    out: &mut Vec<Panel>,
) -> Result<()> {
    let m = 0.5 * (a + b);
    let (fl, fr) = (g(0.5 * (a + m))?, g(0.5 * (m + b))?);
    let left = Panel::new(a, m - a, [f[0], fl, f[1]]);
    let right = Panel::new(m, b - m, [f[1], fr, f[2]]);
    let split = left.mass + right.mass;
    if depth >= MAX_DEPTH || (depth >= MIN_DEPTH && (split - whole).abs() <= 15.0 * tol) {
        out.push(left);
        out.push(right);
        return Ok(());
    }
    let (lm, rm) = (left.mass, right.mass);
    simpson(g, a, m, [f[0], fl, f[1]], lm, 0.5 * tol, depth + 1, out)?;
    simpson(g, m, b, [f[1], fr, f[2]], rm, 0.5 * tol, depth + 1, out)
}

/// Integrated density over `[L₁, L₂]`.
#[derive(Debug, Clone)]
pub struct CdfTable {
    l1: f64,
    l2: f64,
    mid: f64,
    lower: Half,
    upper: Half,
}

impl CdfTable {
    /// Builds the table from a density evaluator on `[l1, l2]`.
    pub fn build(l1: f64, l2: f64, density: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        let mid = 0.5 * (l1 + l2);
        let t_max = (mid - l1).sqrt();
        let lower = Half::build(&|t: f64| Ok(2.0 * t * density(l1 + t * t)?), t_max, 0.5 * SIMPSON_TOL)?;
        let upper = Half::build(&|t: f64| Ok(2.0 * t * density(l2 - t * t)?), t_max, 0.5 * SIMPSON_TOL)?;
        Ok(Self { l1, l2, mid, lower, upper })
    }

    /// Integral of the density before normalisation.
    pub fn total_mass(&self) -> f64 {
        self.lower.mass + self.upper.mass
    }

    /// Normalised integrated density at `e`.
    pub fn eval(&self, e: f64) -> f64 {
        if e <= self.l1 {
            return 0.0;
        }
        if e >= self.l2 {
            return 1.0;
        }
        let total = self.total_mass();
        let v = if e <= self.mid {
            self.lower.cumulative((e - self.l1).sqrt()) / total
        } else {
            (total - self.upper.cumulative((self.l2 - e).sqrt())) / total
        };
        v.clamp(0.0, 1.0)
    }

    /// Energy where the normalised integrated density equals `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return self.l1;
        }
        if p >= 1.0 {
            return self.l2;
        }
        let total = self.total_mass();
        let c = p * total;
        if c <= self.lower.mass {
            let t = self.lower.invert(c);
            self.l1 + t * t
        } else {
            let t = self.upper.invert(total - c);
            self.l2 - t * t
        }
    }
}
