//! The full two-dataset experiment at a very small scale. Writes every
//! artefact under the given directory and prints the accuracy matrix.
//!
//! Usage: `cargo run --example repro [out_dir]`

use std::path::PathBuf;

use cyclocap::config::RunConfig;
use cyclocap::dataset::GenerationConfig;
use cyclocap::pipeline::repro;

fn main() -> cyclocap::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("cyclocap_repro"));
    let first = GenerationConfig {
        name: "ml2018_mini".into(),
        frames_per_class: 12,
        t0_max: 16,
        frame_length: 1024,
        ..GenerationConfig::ml2018()
    };
    let second = GenerationConfig {
        name: "ml2022_mini".into(),
        frames_per_class: 12,
        t0_max: 16,
        frame_length: 1024,
        ..GenerationConfig::ml2022()
    };
    let mut cfg = RunConfig::new(first);
    cfg.model.filters = vec![6, 8, 12];
    cfg.model.kernel = 9;
    cfg.train.max_epochs = 2;
    cfg.eval.cross_dataset = Some(second);
    let summary = repro(&cfg, &out, &mut |m| eprintln!("{m}"))?;
    print!("{}", summary.table());
    Ok(())
}
