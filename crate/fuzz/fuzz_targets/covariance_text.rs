#![no_main]

use libfuzzer_sys::fuzz_target;
use tcadetect::covariance::{parse_covariance_text, CovarianceSet};
use tcadetect::SamplingGrid;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(raw) = parse_covariance_text(text) else { return };
    assert_eq!(raw.matrices.len(), raw.freq_bins);
    if raw.freq_bins * raw.antennas * raw.antennas > 4096 {
        return;
    }
    // Full validation: Hermitian and positive-definite checks plus factoring.
    if let Ok(grid) = SamplingGrid::uniform(raw.freq_bins, 1, raw.antennas, 1e9, 2e9, 0.01) {
        let _ = CovarianceSet::parse(grid, text);
    }
});
