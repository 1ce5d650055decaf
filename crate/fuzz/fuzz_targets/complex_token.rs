#![no_main]

use libfuzzer_sys::fuzz_target;
use tcadetect::linalg::{format_complex, parse_complex};

fuzz_target!(|data: &[u8]| {
    let Ok(token) = std::str::from_utf8(data) else { return };
    let Some(z) = parse_complex(token) else { return };
    if z.re.is_nan() || z.im.is_nan() {
        return;
    }
    let back = parse_complex(&format_complex(z)).expect("formatted value must parse");
    assert_eq!(back.re.to_bits(), z.re.to_bits());
    assert_eq!(back.im.to_bits(), z.im.to_bits());
});
