//! Trains a reduced network on a small four-class problem and prints the
//! epoch log and the held-out confusion matrix.

use cyclocap::dataset::GenerationConfig;
use cyclocap::eval::evaluate;
use cyclocap::model::CapConfig;
use cyclocap::pipeline::prepare;
use cyclocap::preprocess::PreprocessConfig;
use cyclocap::signal::ModulationScheme;
use cyclocap::train::{log_csv, train, TrainConfig, TrainEvent};

fn main() -> cyclocap::Result<()> {
    let gen = GenerationConfig {
        name: "toy".into(),
        frames_per_class: 60,
        schemes: vec![ModulationScheme::Bpsk, ModulationScheme::Qpsk, ModulationScheme::Psk8, ModulationScheme::Msk],
        snr_min_db: 8.0,
        snr_max_db: 13.0,
        snr_center_db: 10.5,
        t0_max: 16,
        frame_length: 1024,
        ..GenerationConfig::ml2018()
    };
    let ds = prepare(&gen, &PreprocessConfig::default())?;
    let topology = CapConfig {
        filters: vec![8, 12, 16, 24],
        kernel: 11,
        ..CapConfig::reference(1024, 4)
    };
    let cfg = TrainConfig {
        max_epochs: 6,
        learning_rate: 2e-3,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let out = train(&ds, &topology, &cfg, &mut |e| {
        if let TrainEvent::Epoch(r) = e {
            eprintln!("epoch {} val acc {:.3}", r.epoch, r.val_accuracy)
        }
    })?;
    print!("{}", log_csv(&out.log));
    let report = evaluate(&out.checkpoint, &ds, &out.split.test)?;
    println!("test P_CC {:.3}", report.p_cc);
    print!("{}", report.confusion_csv());
    Ok(())
}
