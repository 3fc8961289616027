//! Saves an untrained network, reloads it and shows the stored tensor table.

use cyclocap::checkpoint::Checkpoint;
use cyclocap::features::{FeatureKind, FeatureScaling};
use cyclocap::model::{build_cap, CapConfig};
use cyclocap::signal::ModulationScheme;

fn main() -> cyclocap::Result<()> {
    let config = CapConfig {
        frame_length: 512,
        classes: 2,
        filters: vec![4, 8],
        kernel: 5,
        branches: vec![FeatureKind::Freq2, FeatureKind::Time4],
    };
    let ck = Checkpoint {
        network: build_cap(&config, 1)?,
        classes: vec![ModulationScheme::Bpsk, ModulationScheme::Msk],
        scaling: FeatureScaling::default(),
        provenance: None,
    };
    let path = std::env::temp_dir().join("cyclocap_demo.ckpt");
    ck.save(&path)?;
    let back = Checkpoint::load(&path)?;
    for t in back.header().tensors {
        println!("{:<28} {:?}", t.name, t.shape);
    }
    println!("reloaded identically: {}", back == ck);
    Ok(())
}
