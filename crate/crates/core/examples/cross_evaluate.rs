//! Trains on one carrier-offset range and tests on a disjoint one.

use cyclocap::config::RunConfig;
use cyclocap::dataset::GenerationConfig;
use cyclocap::eval::{PSK_MSK, QAM};
use cyclocap::pipeline::{cross_report, prepare, train_and_report};

fn main() -> cyclocap::Result<()> {
    let near = GenerationConfig {
        name: "near".into(),
        frames_per_class: 20,
        t0_max: 16,
        frame_length: 1024,
        ..GenerationConfig::ml2018()
    };
    let far = GenerationConfig {
        name: "far".into(),
        cfo_low: 0.01,
        cfo_high: 0.02,
        master_seed: 5,
        ..near.clone()
    };
    let mut cfg = RunConfig::new(near.clone());
    cfg.model.filters = vec![8, 12, 16, 24];
    cfg.model.kernel = 11;
    cfg.train.max_epochs = 4;

    let a = prepare(&near, &cfg.preprocess)?;
    let b = prepare(&far, &cfg.preprocess)?;
    let dir = std::env::temp_dir().join("cyclocap_xeval");
    let (ckpt, within) = train_and_report(&cfg, &a, &dir, &mut |_| {})?;
    let report = cross_report(&cfg, &ckpt, within, &b)?;
    println!(
        "within {:.3}, across {:.3}; PSK/MSK drop {:.1}, QAM drop {:.1} points",
        report.within.p_cc,
        report.cross.p_cc,
        report.subset_drop(&PSK_MSK).unwrap_or(f64::NAN),
        report.subset_drop(&QAM).unwrap_or(f64::NAN)
    );
    print!("{}", report.delta_csv());
    Ok(())
}
