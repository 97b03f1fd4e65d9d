//! Gauss–Jacobi rules (Golub–Welsch) and adaptive Gauss–Kronrod integration.

use crate::error::{Error, Result};
use crate::C64;
use statrs::function::gamma::{gamma, ln_gamma};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Nodes and weights of an interpolatory rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Total mass of the bare Jacobi weight `(1+v)^left (1-v)^right` on `[-1, 1]`.
pub fn jacobi_weight_mass(left: f64, right: f64) -> f64 {
    if left + right < 150.0 {
        return 2f64.powf(left + right + 1.0) * gamma(left + 1.0) * gamma(right + 1.0)
            / gamma(left + right + 2.0);
    }
    ((left + right + 1.0) * std::f64::consts::LN_2 + ln_gamma(left + 1.0) + ln_gamma(right + 1.0)
        - ln_gamma(left + right + 2.0))
    .exp()
}

/// `n`-point Gauss rule for the weight `(1+v)^left (1-v)^right` on `[-1, 1]`.
///
/// Built from the three-term recurrence of the monic Jacobi polynomials; the
/// nodes are the eigenvalues of the Jacobi matrix and each weight is the total
/// mass times the squared first component of the matching eigenvector.
pub fn gauss_jacobi(n: usize, left: f64, right: f64) -> Result<GaussRule> {
    if n == 0 {
        return Err(Error::InvalidArgument("quadrature needs n >= 1".into()));
    }
    if left <= -1.0 || right <= -1.0 {
        return Err(Error::NonIntegrable {
            alpha: left,
            beta: right,
        });
    }
    // Classical parametrisation: weight (1-x)^a (1+x)^b.
    let (a, b) = (right, left);
    let ab = a + b;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    diag[0] = (b - a) / (ab + 2.0);
    for (k, d) in diag.iter_mut().enumerate().skip(1) {
        let kf = k as f64;
        *d = (b * b - a * a) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0));
    }
    for k in 1..n {
        let kf = k as f64;
        let sq = if k == 1 {
            4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
        } else {
            let s = 2.0 * kf + ab;
            4.0 * kf * (kf + a) * (kf + b) * (kf + ab) / (s * s * (s + 1.0) * (s - 1.0))
        };
        off[k - 1] = sq.sqrt();
    }
    let first = tridiagonal_eigen_first_row(&mut diag, &mut off)?;
    let mass = jacobi_weight_mass(left, right);
    let mut pairs: Vec<(f64, f64)> = diag
        .into_iter()
        .zip(first)
        .map(|(x, z)| (x, mass * z * z))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let (nodes, weights) = pairs.into_iter().unzip();
    Ok(GaussRule { nodes, weights })
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<GaussRule> {
    gauss_jacobi(n, 0.0, 0.0)
}

/// Implicit QL on a symmetric tridiagonal matrix.
///
/// On return `diag` holds the eigenvalues; the result holds the first
/// component of each normalised eigenvector. `off[i]` couples rows `i` and
/// `i + 1`; its last entry is scratch.
fn tridiagonal_eigen_first_row(diag: &mut [f64], off: &mut [f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    if n == 1 {
        return Ok(z);
    }
    off[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::EigenFailure(
                    "tridiagonal QL exceeded 60 sweeps".into(),
                ));
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(z)
}

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const GAUSS7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Fixed-size vector of complex values integrated component-wise.
pub type Vals = [C64; 4];

fn zero_vals() -> Vals {
    [C64::new(0.0, 0.0); 4]
}

fn gk15<F: Fn(f64) -> Vals>(f: &F, a: f64, b: f64) -> (Vals, f64) {
    let half = 0.5 * (b - a);
    let center = 0.5 * (a + b);
    let mut kron = zero_vals();
    let mut gauss = zero_vals();
    for (j, (&x, &wk)) in KRONROD_NODES.iter().zip(&KRONROD_WEIGHTS).enumerate() {
        let pts: &[f64] = if x == 0.0 { &[0.0] } else { &[-x, x] };
        for &t in pts {
            let v = f(center + half * t);
            for c in 0..4 {
                kron[c] += v[c] * wk;
                if j % 2 == 1 {
                    gauss[c] += v[c] * GAUSS7_WEIGHTS[j / 2];
                }
            }
        }
    }
    let mut err: f64 = 0.0;
    for c in 0..4 {
        kron[c] *= half;
        gauss[c] *= half;
        err = err.max((kron[c] - gauss[c]).norm());
    }
    (kron, err)
}

struct Panel {
    a: f64,
    b: f64,
    value: Vals,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Adaptive {
    pub value: Vals,
    pub error: f64,
    pub converged: bool,
}

/// Globally adaptive Gauss–Kronrod (7/15) integration of a vector integrand.
///
/// Bisects the panel with the largest error estimate until the total
/// estimate drops below `max(abs_tol, rel_tol * |I|)` or `max_panels` is hit.
pub fn adaptive_gk<F: Fn(f64) -> Vals>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Adaptive {
    let (value, err) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, err });
    let mut total = value;
    let mut total_err = err;
    loop {
        let scale = total.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if total_err <= abs_tol.max(rel_tol * scale) {
            return Adaptive {
                value: total,
                error: total_err,
                converged: true,
            };
        }
        if heap.len() >= max_panels {
            return Adaptive {
                value: total,
                error: total_err,
                converged: false,
            };
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel below floating-point resolution; keep it and stop refining.
            heap.push(worst);
            return Adaptive {
                value: total,
                error: total_err,
                converged: false,
            };
        }
        let (lv, le) = gk15(&f, worst.a, mid);
        let (rv, re) = gk15(&f, mid, worst.b);
        for c in 0..4 {
            total[c] += lv[c] + rv[c] - worst.value[c];
        }
        total_err += le + re - worst.err;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: lv,
            err: le,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: rv,
            err: re,
        });
        // Refresh the running sums occasionally to shed accumulated rounding.
        if heap.len() % 64 == 0 {
            total = zero_vals();
            total_err = 0.0;
            for p in heap.iter() {
                for c in 0..4 {
                    total[c] += p.value[c];
                }
                total_err += p.err;
            }
        }
    }
}

/// Scalar convenience wrapper around [`adaptive_gk`].
pub fn adaptive_gk_real<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> f64 {
    let out = adaptive_gk(
        |x| {
            let mut v = zero_vals();
            v[0] = C64::new(f(x), 0.0);
            v
        },
        a,
        b,
        abs_tol,
        0.0,
        4096,
    );
    out.value[0].re
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_two_points() {
        let r = gauss_legendre(2).unwrap();
        let x = 1.0 / 3f64.sqrt();
        assert!((r.nodes[0] + x).abs() < 1e-15);
        assert!((r.nodes[1] - x).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-14);
        assert!((r.integrate(|v| v * v) - 2.0 / 3.0).abs() < 4e-15);
    }

    #[test]
    fn single_node_sits_at_weight_mean() {
        let r = gauss_jacobi(1, 2.0, 1.0).unwrap();
        let mass = jacobi_weight_mass(2.0, 1.0);
        let mean = adaptive_gk_real(|v| v * (1.0 + v).powi(2) * (1.0 - v), -1.0, 1.0, 1e-15) / mass;
        assert!((r.nodes[0] - mean).abs() < 1e-14);
        assert!((r.weights[0] - mass).abs() < 1e-14);
    }

    /// Splits at 0 and removes each endpoint singularity with `u = (1 ∓ v)^(1+e)`.
    fn substituted_oracle(f: impl Fn(f64) -> f64, l: f64, r: f64) -> f64 {
        let (el, er) = (1.0 + l, 1.0 + r);
        let left = adaptive_gk_real(
            |u| {
                let v = -1.0 + u.powf(1.0 / el);
                f(v) * (1.0 - v).powf(r) / el
            },
            0.0,
            1.0,
            1e-15,
        );
        let right = adaptive_gk_real(
            |u| {
                let v = 1.0 - u.powf(1.0 / er);
                f(v) * (1.0 + v).powf(l) / er
            },
            0.0,
            1.0,
            1e-15,
        );
        left + right
    }

    #[test]
    fn jacobi_rule_is_exact_on_polynomials() {
        for &(l, r) in &[(0.5, -0.5), (-0.7, 2.3), (3.0, 3.0)] {
            let rule = gauss_jacobi(10, l, r).unwrap();
            for k in 0..20 {
                let q = rule.integrate(|v| v.powi(k));
                let oracle = substituted_oracle(|v| v.powi(k), l, r);
                assert!((q - oracle).abs() < 1e-12, "k={k} l={l} r={r}: {q} vs {oracle}");
            }
        }
    }

    #[test]
    fn kronrod_handles_vector_integrand() {
        let out = adaptive_gk(
            |x| {
                [
                    C64::new(x.exp(), 0.0),
                    C64::new(0.0, x.cos()),
                    C64::new(1.0 / (x - 0.3).hypot(1e-3), 0.0),
                    C64::new(0.0, 0.0),
                ]
            },
            0.0,
            1.0,
            1e-13,
            0.0,
            2000,
        );
        assert!(out.converged);
        assert!((out.value[0].re - (1f64.exp() - 1.0)).abs() < 1e-13);
        assert!((out.value[1].im - 1f64.sin()).abs() < 1e-13);
        let exact = (0.7f64).asinh_scaled(1e-3) + (0.3f64).asinh_scaled(1e-3);
        assert!((out.value[2].re - exact).abs() < 1e-10);
    }

    trait AsinhScaled {
        fn asinh_scaled(self, s: f64) -> f64;
    }
    impl AsinhScaled for f64 {
        fn asinh_scaled(self, s: f64) -> f64 {
            (self / s).asinh()
        }
    }
}
