#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use tcadetect_cli::config::{parse_config_with_overrides, validate};

// Input layout: override lines, a line holding only `---`, then the TOML body.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let (head, body) = text.split_once("\n---\n").unwrap_or(("", text));
    let overrides: Vec<String> = head.lines().map(str::to_string).collect();
    let Ok(config) = parse_config_with_overrides(body, &overrides) else {
        return;
    };
    let g = &config.grid;
    let size = g
        .freq_bins
        .saturating_mul(g.time_samples)
        .saturating_mul(g.antennas.saturating_mul(g.antennas));
    if size > 4096 {
        return;
    }
    let _ = validate(config, Path::new("."));
});
