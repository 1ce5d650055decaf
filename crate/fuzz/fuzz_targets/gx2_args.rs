#![no_main]

use libfuzzer_sys::fuzz_target;
use tcadetect_cli::args::Command;
use tcadetect_cli::commands::gx2_params;
use tcadetect_cli::parse_args;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let argv = std::iter::once("tcadetect")
        .chain(std::iter::once("gx2"))
        .chain(text.split_whitespace());
    let Ok(cli) = parse_args(argv) else { return };
    let Command::Gx2(args) = &cli.command else { return };
    let Ok(params) = gx2_params(args) else { return };
    if params.terms().len() > 8 || params.total_dof() > 1000 {
        return;
    }
    for &x in args.x.iter().take(4) {
        if let Ok(p) = params.cdf(x) {
            assert!((0.0..=1.0).contains(&p), "cdf({x}) = {p}");
        }
    }
});
