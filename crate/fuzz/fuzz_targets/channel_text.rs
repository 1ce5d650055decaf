#![no_main]

use libfuzzer_sys::fuzz_target;
use tcadetect::signalmodel::{make_channel, ChannelModel};
use tcadetect::SamplingGrid;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(model) = ChannelModel::parse(text) else { return };
    let ChannelModel::Tabulated(rows) = &model else {
        panic!("parse produced a steering model")
    };
    let (k, n) = (rows.len(), rows.first().map_or(0, Vec::len));
    if k == 0 || k * n > 4096 {
        return;
    }
    if let Ok(grid) = SamplingGrid::uniform(k, 1, n, 1e9, 2e9, 0.01) {
        let channel = make_channel(&grid, &model).expect("dimensions already match");
        assert_eq!(channel.len(), k);
    }
});
