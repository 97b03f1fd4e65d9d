//! Predicted envelopes.
//!
//! Every envelope carries one calibration factor `F = C_cal·(log N)^p`
//! standing in for the unspecified logarithmic factors of the limit theorems.

use super::spec::ExperimentKind;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// `F = c_cal·(ln N)^log_power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub c_cal: f64,
    pub log_power: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Self { c_cal: 1.0, log_power: 3.0 }
    }
}

impl Calibration {
    pub fn factor(&self, n: usize) -> f64 {
        self.c_cal * (n as f64).ln().powf(self.log_power)
    }
}

/// Inputs of [`predicted_bound`]; each kind reads the fields it needs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub n: usize,
    pub lambda: f64,
    pub kappa: f64,
    pub eta: f64,
    /// `α̂ = min(α, N − α)`.
    pub alpha_index: usize,
    pub e1: f64,
    pub e2: f64,
    /// `Im m_fc(z)`, used by the off-diagonal envelope.
    pub im_mfc: f64,
}

fn need(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("bound parameters: {what}")))
    }
}

/// Envelope for `kind` at `params`.
pub fn predicted_bound(kind: ExperimentKind, params: &BoundParams, cal: &Calibration) -> Result<f64> {
    let p = params;
    need(p.n >= 1, "n must be positive")?;
    need(p.lambda >= 0.0, "lambda must be nonnegative")?;
    let n = p.n as f64;
    let f = cal.factor(p.n);
    let core = match kind {
        ExperimentKind::LocalLaw => {
            need(p.eta > 0.0 && p.kappa >= 0.0, "LocalLaw needs eta > 0 and kappa >= 0")?;
            let a = p.lambda.sqrt() * n.powf(-0.25);
            let b = p.lambda / ((p.kappa + p.eta).sqrt() * n.sqrt());
            a.min(b) + 1.0 / (n * p.eta)
        }
        ExperimentKind::OffDiagonalLaw => {
            need(p.eta > 0.0 && p.im_mfc >= 0.0, "OffDiagonalLaw needs eta > 0 and Im m_fc >= 0")?;
            (p.im_mfc / (n * p.eta)).sqrt() + 1.0 / (n * p.eta)
        }
        ExperimentKind::Delocalization => 1.0,
        ExperimentKind::Rigidity => {
            need(p.alpha_index >= 1, "Rigidity needs alpha_index >= 1")?;
            let a = p.alpha_index as f64;
            let small = a <= f * (1.0 + p.lambda.powf(1.5) * n.powf(0.25));
            n.powf(-2.0 / 3.0) * (a.powf(-1.0 / 3.0) + if small { 1.0 } else { 0.0 })
                + p.lambda.powi(2) * n.powf(-1.0 / 3.0) * a.powf(-2.0 / 3.0)
                + p.lambda / n.sqrt()
        }
        ExperimentKind::DensityOfStates => {
            let w = p.e2 - p.e1;
            need(w > 0.0 && p.kappa >= 0.0, "DensityOfStates needs e2 > e1 and kappa >= 0")?;
            1.0 / n + p.lambda * w / ((p.kappa + w).sqrt() * n.sqrt())
        }
        ExperimentKind::Spacing => 1.0 / n,
        ExperimentKind::IntegratedDos => {
            need(p.kappa >= 0.0, "IntegratedDOS needs kappa >= 0")?;
            1.0 / n + p.lambda.powf(1.5) * n.powf(-0.75) + p.lambda * n.powf(-5.0 / 6.0) + p.lambda * p.kappa.sqrt() / n.sqrt()
        }
        ExperimentKind::OperatorNorm => p.lambda / n.sqrt() + n.powf(-2.0 / 3.0),
        ExperimentKind::ZetaDecomposition => {
            need(p.eta > 0.0, "ZetaDecomposition needs eta > 0")?;
            1.0 / (n * p.eta)
        }
        ExperimentKind::EdgeExponent | ExperimentKind::FreeConvOnly => {
            return Err(Error::UnknownKind(kind.name().to_string()))
        }
    };
    Ok(f * core)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wigner_local_law() {
        let cal = Calibration::default();
        for kappa in [0.0, 0.3, 1.7] {
            let p = BoundParams { n: 500, lambda: 0.0, kappa, eta: 0.02, ..Default::default() };
            let b = predicted_bound(ExperimentKind::LocalLaw, &p, &cal).unwrap();
            let expect = 1.0 / (500.0 * 0.02) * 500f64.ln().powi(3);
            assert!((b - expect).abs() <= 1e-12 * expect);
        }
    }

    #[test]
    fn rigidity_bulk_is_potential_dominated() {
        let cal = Calibration::default();
        let n = 10_000;
        let p = BoundParams { n, lambda: 0.5, alpha_index: n / 2, ..Default::default() };
        let b = predicted_bound(ExperimentKind::Rigidity, &p, &cal).unwrap() / cal.factor(n);
        assert!((b - 5e-3).abs() < 0.05 * 5e-3, "{b}");
        assert!(5e-3 / b > 0.95);
    }

    #[test]
    fn local_law_crossover() {
        let cal = Calibration { c_cal: 1.0, log_power: 0.0 };
        let n = 4096usize;
        let s = 1.0 / (n as f64).sqrt();
        let p = BoundParams { n, lambda: 1.0, kappa: 0.5 * s, eta: 0.5 * s, ..Default::default() };
        let b = predicted_bound(ExperimentKind::LocalLaw, &p, &cal).unwrap();
        let a = (n as f64).powf(-0.25);
        assert!((b - (a + 1.0 / (n as f64 * p.eta))).abs() < 1e-15);
        let direct = 1.0 / ((p.kappa + p.eta).sqrt() * (n as f64).sqrt());
        assert!((a - direct).abs() < 1e-15);
    }

    #[test]
    fn kinds_without_envelope() {
        let p = BoundParams { n: 10, ..Default::default() };
        assert!(matches!(
            predicted_bound(ExperimentKind::FreeConvOnly, &p, &Calibration::default()),
            Err(Error::UnknownKind(_))
        ));
    }
}
