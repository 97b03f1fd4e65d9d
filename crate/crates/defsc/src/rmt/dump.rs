//! Per-trial spectrum dumps: a CSV table plus a JSON sidecar with the config.

use super::{EnsembleConfig, SpectralData};
use crate::error::{Error, Result};
use std::path::{Path, PathBuf};

/// Header of the spectrum CSV.
pub const SPECTRUM_HEADER: [&str; 3] = ["alpha", "mu_alpha", "v_alpha_sorted_by_index"];

/// Writes `<stem>.csv` and `<stem>.json` into `dir`; returns both paths.
pub fn write_spectrum(data: &SpectralData, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    let config = data
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("spectrum dump needs the ensemble config".into()))?;
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(SPECTRUM_HEADER)?;
    for (a, &mu) in data.eigenvalues.iter().enumerate() {
        let v = data.potential.get(a).map(|x| format!("{x:?}")).unwrap_or_default();
        w.write_record([(a + 1).to_string(), format!("{mu:?}"), v])?;
    }
    w.flush()?;
    let json_path = dir.join(format!("{stem}.json"));
    std::fs::write(&json_path, serde_json::to_string_pretty(config)?)?;
    Ok((csv_path, json_path))
}

/// Reads a sidecar written by [`write_spectrum`].
pub fn read_sidecar(path: &Path) -> Result<EnsembleConfig> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Measure;
    use crate::rmt::{EntryLaw, MatrixKind};

    #[test]
    fn dump_round_trip() {
        let cfg = EnsembleConfig {
            n_size: 6,
            lambda: 0.3,
            mu: Measure::uniform(),
            kind: MatrixKind::RealSymmetric,
            entry_law: EntryLaw::Rademacher,
            seed: u64::MAX - 12_345,
            trial_index: 17,
        };
        let data = cfg.spectrum(false).unwrap();
        let dir = std::env::temp_dir().join(format!("defsc-dump-{}", std::process::id()));
        let (csv_path, json_path) = write_spectrum(&data, &dir, "trial_17").unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert!(text.starts_with("alpha,mu_alpha,v_alpha_sorted_by_index\n"));
        assert_eq!(text.lines().count(), 7);
        let first: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(first[1].parse::<f64>().unwrap(), data.eigenvalues[0]);
        assert_eq!(read_sidecar(&json_path).unwrap(), cfg);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
