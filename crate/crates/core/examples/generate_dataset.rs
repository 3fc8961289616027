//! Generates a small dataset on disk, reloads it and checks that a frame
//! regenerates from its manifest record (samples are stored as `f32`).
//!
//! Usage: `cargo run --example generate_dataset [out_dir]`

use std::path::PathBuf;

use cyclocap::dataset::{generate_dataset, Dataset, GenerationConfig};
use cyclocap::signal::synthesize_frame;

fn main() -> cyclocap::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("cyclocap_demo"));
    let config = GenerationConfig {
        name: "demo".into(),
        frames_per_class: 4,
        frame_length: 2048,
        ..GenerationConfig::ml2018()
    };
    let manifest = generate_dataset(&config, &out)?;
    for note in &manifest.generation_notes {
        println!("note: {note}");
    }
    let ds = Dataset::load(&out)?;
    let rec = &ds.manifest.frames[5];
    let again = synthesize_frame(&rec.spec(ds.manifest.frame_length))?;
    let stored = &ds.frames[5];
    let same = again.i.iter().chain(&again.q).zip(stored.i.iter().chain(&stored.q)).all(|(a, b)| *a as f32 as f64 == *b);
    println!(
        "{} frames in {}; frame 5 is {} at {:.1} dB, regenerates identically: {}",
        ds.len(),
        out.display(),
        rec.scheme,
        rec.snr_db,
        same
    );
    Ok(())
}
