//! Detected spectral lines of each scheme next to the cycle frequencies its
//! pattern predicts.

use cyclocap::cf::{expected_min_order, match_lines, CFPattern};
use cyclocap::features::extract_features;
use cyclocap::signal::{synthesize_frame, FrameSpec, ModulationScheme};

fn main() -> cyclocap::Result<()> {
    let (f0, t0) = (0.011, 8u16);
    for scheme in ModulationScheme::ALL {
        let frame = synthesize_frame(&FrameSpec {
            scheme,
            t0,
            beta: 0.35,
            f0,
            snr_db: f64::INFINITY,
            length: 16_384,
            seed: 1,
        })?;
        let pattern = CFPattern::of(scheme);
        let lines = match_lines(&extract_features(&frame)?, pattern, f0, t0 as f64, 10.0)?;
        println!(
            "{} ({pattern}, first line at order {:?}): {} lines",
            scheme.name(),
            expected_min_order(scheme),
            lines.len()
        );
        for m in lines.iter().take(4) {
            println!(
                "  order {} at {:+.5}, {:.1} dB, predicted {:+.5}",
                m.order,
                m.line.frequency,
                m.line.prominence_db,
                m.predicted.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
