//! Writes a synthetic labeled flow file in KDDTrain+ layout, for trying the
//! tool without the real dataset.
//!
//! cargo run -p flowcascade --example synth -- <out> <rows> [seed] [new-fraction]

use flowcascade::synth::{synthetic_dataset, DEFAULT_MIX};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 2 {
        eprintln!("usage: synth <out> <rows> [seed] [new-fraction]");
        std::process::exit(2);
    }
    let rows: usize = args[1].parse().expect("rows");
    let seed: u64 = args.get(2).map_or(1, |s| s.parse().expect("seed"));
    let new_fraction: f64 = args.get(3).map_or(0.0, |s| s.parse().expect("new fraction"));
    let mut text = String::new();
    for r in synthetic_dataset(rows, DEFAULT_MIX, new_fraction, seed) {
        text.push_str(&r.to_csv_line());
        text.push('\n');
    }
    std::fs::write(&args[0], text).expect("write output");
}
