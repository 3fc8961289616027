//! Synthesizes one noisy frame of every modulation scheme and prints its
//! measured power and occupied bandwidth.

use cyclocap::signal::{synthesize_frame, FrameSpec, ModulationScheme};

fn main() -> cyclocap::Result<()> {
    println!("{:<10} {:>10} {:>12}", "scheme", "power", "bandwidth");
    for (i, scheme) in ModulationScheme::ALL.into_iter().enumerate() {
        let spec = FrameSpec {
            scheme,
            t0: 8,
            beta: 0.35,
            f0: 0.005,
            snr_db: 10.0,
            length: 4096,
            seed: i as u64,
        };
        let frame = synthesize_frame(&spec)?;
        println!("{:<10} {:>10.4} {:>12.4}", scheme.name(), frame.mean_power(), spec.occupied_bandwidth());
    }
    Ok(())
}
