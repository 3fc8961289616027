//! Blind band-of-interest estimation and unit-power normalization.

use cyclocap::preprocess::{preprocess_frame, PreprocessConfig};
use cyclocap::signal::{synthesize_frame, FrameSpec, ModulationScheme};

fn main() -> cyclocap::Result<()> {
    let cfg = PreprocessConfig::default();
    for (t0, f0) in [(4u16, 0.012), (10, -0.007), (20, 0.019)] {
        let spec = FrameSpec {
            scheme: ModulationScheme::Qam16,
            t0,
            beta: 0.5,
            f0,
            snr_db: 10.0,
            length: 32_768,
            seed: t0 as u64,
        };
        let raw = synthesize_frame(&spec)?.scaled(37.0);
        let (out, rec) = preprocess_frame(&raw, &cfg)?;
        println!(
            "T0 {t0:>2}: true centre {f0:+.4}, estimated {:+.4}, bandwidth {:.4} (true {:.4}), power {:.2} -> {:.6}",
            rec.boi.center_freq,
            rec.boi.bandwidth,
            spec.occupied_bandwidth(),
            raw.mean_power(),
            out.mean_power()
        );
    }
    Ok(())
}
