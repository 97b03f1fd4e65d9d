use defsc::fluctuation::{decomposition_residual, terms, zeta_tilde};
use defsc::rmt::{EnsembleConfig, EntryLaw, MatrixKind};
use defsc::{FreeConvolution, Measure, SpectralPoint};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn zeta0_solves_its_quadratic(seed in any::<u64>(), lambda in 0.1f64..1.0, frac in 0.2f64..0.8, eta in 0.05f64..1.0) {
        let sol = FreeConvolution::new(Measure::uniform(), lambda).unwrap();
        let v = Measure::uniform().sample(&mut ChaCha20Rng::seed_from_u64(seed), 200);
        let p = SpectralPoint::new(sol.l1() + frac * (sol.l2() - sol.l1()), eta).unwrap();
        let t = terms(&v, &sol, p, None).unwrap();
        prop_assert!(t.residual <= 1e-12, "residual {}", t.residual);
    }

    #[test]
    fn zeta_tilde_is_linear_in_the_sample(seed in any::<u64>(), eta in 0.05f64..1.0) {
        // r₁ is an average over entries, so ζ̃ of a doubled sample equals ζ̃ of the sample.
        let sol = FreeConvolution::new(Measure::uniform(), 0.5).unwrap();
        let v = Measure::uniform().sample(&mut ChaCha20Rng::seed_from_u64(seed), 64);
        let doubled: Vec<f64> = v.iter().chain(&v).copied().collect();
        let p = SpectralPoint::new(0.3, eta).unwrap();
        let a = zeta_tilde(&v, &sol, p).unwrap();
        let b = zeta_tilde(&doubled, &sol, p).unwrap();
        prop_assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()));
    }
}

#[test]
fn correction_reduces_paired_error_at_large_eta() {
    let mu = Measure::uniform();
    let sol = FreeConvolution::new(mu.clone(), 0.8).unwrap();
    let p = SpectralPoint::new(0.0, 0.5).unwrap();
    let (mut raw, mut corrected) = (Vec::new(), Vec::new());
    for trial in 0..12 {
        let cfg = EnsembleConfig {
            n_size: 400,
            lambda: 0.8,
            mu: mu.clone(),
            kind: MatrixKind::ComplexHermitian,
            entry_law: EntryLaw::Gaussian,
            seed: 5,
            trial_index: trial,
        };
        let (r, c) = decomposition_residual(&cfg.spectrum(false).unwrap(), &sol, p).unwrap();
        raw.push(r * r);
        corrected.push(c * c);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&corrected) < 0.5 * mean(&raw), "{} vs {}", mean(&corrected), mean(&raw));
}
