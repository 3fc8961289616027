//! The eight feature tensors of one frame and where their energy sits.

use cyclocap::features::{extract_features, FeatureKind};
use cyclocap::model::argmax;
use cyclocap::signal::{synthesize_frame, FrameSpec, ModulationScheme};

fn main() -> cyclocap::Result<()> {
    let frame = synthesize_frame(&FrameSpec {
        scheme: ModulationScheme::Bpsk,
        t0: 10,
        beta: 0.35,
        f0: 0.015,
        snr_db: 15.0,
        length: 8192,
        seed: 3,
    })?;
    let fs = extract_features(&frame)?;
    for kind in FeatureKind::ALL {
        let t = fs.get(kind);
        if kind.is_time() {
            let rms = (t.data.iter().map(|v| v * v).sum::<f64>() / t.length as f64).sqrt();
            println!("{kind}: {} x {} samples, rms {rms:.3}", t.length, t.channels());
        } else {
            let peak = argmax(&t.data);
            let f = cyclocap::fft::shifted_frequency(peak, t.length);
            println!("{kind}: {} bins, strongest at {f:+.5} cycles/sample", t.length);
        }
    }
    Ok(())
}
