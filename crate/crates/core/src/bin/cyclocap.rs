use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cyclocap::cf::{match_lines, CFPattern};
use cyclocap::checkpoint::Checkpoint;
use cyclocap::config::{Partition, RunConfig};
use cyclocap::dataset::{Dataset, GenerationConfig};
use cyclocap::eval::{cross_evaluate, evaluate, EvalReport};
use cyclocap::features::{extract_features, FeatureKind};
use cyclocap::model::{topology_table, CapConfig};
use cyclocap::pipeline::{self, train_and_report};
use cyclocap::preprocess::{preprocess_dataset, PreprocessConfig};
use cyclocap::signal::frame_file::FrameReader;
use cyclocap::train::{split_dataset, SplitSpec, TrainEvent};
use cyclocap::{selftest, Error, Result};

#[derive(Parser)]
#[command(name = "cyclocap", version, about = "Modulation recognition with cyclostationary feature layers")]
struct Cli {
    /// Worker threads (1 gives bit-reproducible runs; 0 uses every core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize a dataset.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Generate `[eval.cross_dataset]` instead of `[dataset]`.
        #[arg(long)]
        cross: bool,
    },
    /// Band-of-interest filtering and power normalization of a dataset.
    Preprocess {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run configuration supplying `[preprocess]`; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Dump the eight feature tensors of one frame as CSV.
    Features {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        frame: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detected spectral lines of one frame against predicted cycle frequencies.
    Lines {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        frame: usize,
        #[arg(long, default_value_t = 10.0)]
        prominence_db: f64,
    },
    /// Train on a preprocessed dataset.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on its own dataset.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = PartitionArg::Test)]
        partition: PartitionArg,
    },
    /// Evaluate a checkpoint on a second dataset and report the change.
    Xeval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Within-dataset report; defaults to `eval.json` beside the checkpoint.
        #[arg(long)]
        within: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = PartitionArg::Test)]
        partition: PartitionArg,
    },
    /// Print the layer table of a topology.
    Inspect {
        #[arg(long, conflicts_with = "ckpt")]
        config: Option<PathBuf>,
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long, default_value_t = 32_768)]
        frame_length: usize,
        #[arg(long, default_value_t = 8)]
        classes: usize,
    },
    /// Layer oracles, DFT oracle and gradient checks.
    Selftest,
    /// Generate, train and cross-evaluate both dataset configurations.
    Repro {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum PartitionArg {
    Train,
    Val,
    Test,
    All,
}

impl From<PartitionArg> for Partition {
    fn from(p: PartitionArg) -> Self {
        match p {
            PartitionArg::Train => Partition::Train,
            PartitionArg::Val => Partition::Val,
            PartitionArg::Test => Partition::Test,
            PartitionArg::All => Partition::All,
        }
    }
}

fn write(path: &Path, body: &str) -> Result<()> {
    if let Some(d) = path.parent() {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn partition_of(ckpt: &Checkpoint, ds: &Dataset, p: Partition) -> Result<Vec<usize>> {
    let spec = ckpt.provenance.as_ref().map_or_else(SplitSpec::default, |p| p.train.split);
    let split = split_dataset(&ds.manifest, &spec)?;
    let all: Vec<usize> = (0..ds.len()).collect();
    Ok(p.select(&split, &all).to_vec())
}

fn progress(e: TrainEvent) {
    match e {
        TrainEvent::Batch {
            epoch,
            batch,
            batches,
            loss,
        } if batch % 10 == 0 || batch == batches => {
            eprintln!("epoch {epoch} batch {batch}/{batches} loss {loss:.4}")
        }
        TrainEvent::Epoch(r) => eprintln!(
            "epoch {} done: train loss {:.4} acc {:.3}, val loss {:.4} acc {:.3}{}",
            r.epoch,
            r.train_loss,
            r.train_accuracy,
            r.val_loss,
            r.val_accuracy,
            if r.best { " (best)" } else { "" }
        ),
        _ => {}
    }
}

fn print_report(r: &EvalReport) {
    println!("{}: P_CC {:.2}% over {} frames", r.dataset, 100.0 * r.p_cc, r.total);
    for s in &r.per_scheme {
        println!("  {:<10} {:6.2}% ({} frames)", s.scheme.name(), 100.0 * s.accuracy, s.support);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Gen { config, out, cross } => {
            let cfg = RunConfig::load(&config)?;
            let g: GenerationConfig = if cross {
                cfg.eval.cross_dataset.clone().ok_or_else(|| Error::Config("no [eval.cross_dataset]".into()))?
            } else {
                cfg.dataset.clone()
            };
            let ds = Dataset::generate(&g)?;
            ds.save(&out)?;
            cfg.echo(&out)?;
            println!("wrote {} frames to {}", ds.len(), out.display());
        }
        Cmd::Preprocess { data, out, config } => {
            let pre = match config {
                Some(c) => RunConfig::load(&c)?.preprocess,
                None => PreprocessConfig::default(),
            };
            pre.validate()?;
            let ds = preprocess_dataset(&Dataset::load(&data)?, &pre)?;
            ds.save(&out)?;
            write(&out.join("preprocess.toml"), &toml::to_string(&pre).expect("serializes"))?;
            println!("preprocessed {} frames into {}", ds.len(), out.display());
        }
        Cmd::Features { data, frame, out } => {
            let f = FrameReader::open(&data.join(cyclocap::dataset::FRAMES_FILE))?.read_frame(frame)?;
            let fs = extract_features(&f)?;
            for kind in FeatureKind::ALL {
                let t = fs.get(kind);
                let mut s = String::new();
                if kind.is_time() {
                    s.push_str("sample,re,im\n");
                    for (i, v) in t.data.chunks_exact(2).enumerate() {
                        let _ = writeln!(s, "{i},{:e},{:e}", v[0], v[1]);
                    }
                } else {
                    s.push_str("index,frequency,magnitude\n");
                    for (i, v) in t.data.iter().enumerate() {
                        let _ = writeln!(s, "{i},{:.8},{v:e}", cyclocap::fft::shifted_frequency(i, t.length));
                    }
                }
                write(&out.join(format!("frame{frame}_{}.csv", kind.name())), &s)?;
            }
            println!("wrote 8 feature tables to {}", out.display());
        }
        Cmd::Lines { data, frame, prominence_db } => {
            let ds = Dataset::load(&data)?;
            let rec = ds
                .manifest
                .frames
                .get(frame)
                .ok_or_else(|| Error::invalid(format!("frame {frame} out of range")))?;
            let f = &ds.frames[frame];
            // centring moves every line by the estimated band centre
            let shift = rec.preprocessing.map_or(0.0, |p| p.boi.center_freq);
            let f0 = rec.f0 - shift;
            let pattern = CFPattern::of(rec.scheme);
            println!(
                "frame {frame}: {} ({pattern}), f0 = {f0:.6}, T0 = {}, SNR = {:.2} dB",
                rec.scheme.name(),
                rec.t0,
                rec.snr_db
            );
            println!("{:>5} {:>11} {:>9} {:>11} {:>9}", "order", "frequency", "prom dB", "predicted", "bins off");
            for m in match_lines(&extract_features(f)?, pattern, f0, rec.t0 as f64, prominence_db)? {
                let (p, e) = match (m.predicted, m.bin_error) {
                    (Some(p), Some(e)) => (format!("{p:.6}"), format!("{e:.2}")),
                    _ => ("-".into(), "-".into()),
                };
                println!(
                    "{:>5} {:>11.6} {:>9.2} {:>11} {:>9}",
                    m.order, m.line.frequency, m.line.prominence_db, p, e
                );
            }
        }
        Cmd::Train { config, data, out } => {
            let cfg = RunConfig::load(&config)?;
            let ds = Dataset::load(&data)?;
            let run = RunConfig {
                dataset: ds.manifest.config.clone(),
                ..cfg
            };
            run.validate()?;
            run.echo(&out)?;
            let (_, report) = train_and_report(&run, &ds, &out, &mut progress)?;
            print_report(&report);
        }
        Cmd::Eval { ckpt, data, out, partition } => {
            let ck = Checkpoint::load(&ckpt)?;
            let ds = Dataset::load(&data)?;
            let idx = partition_of(&ck, &ds, partition.into())?;
            let report = evaluate(&ck, &ds, &idx)?;
            report.write(&out, "eval")?;
            print_report(&report);
        }
        Cmd::Xeval {
            ckpt,
            data,
            within,
            out,
            partition,
        } => {
            let ck = Checkpoint::load(&ckpt)?;
            let within_path = within.unwrap_or_else(|| ckpt.with_file_name("eval.json"));
            let text = fs::read_to_string(&within_path).map_err(|e| Error::io(&within_path, e))?;
            let within: EvalReport =
                serde_json::from_str(&text).map_err(|e| Error::format(&within_path, e.to_string()))?;
            let ds = Dataset::load(&data)?;
            let idx = partition_of(&ck, &ds, partition.into())?;
            let report = cross_evaluate(&ck, within, &ds, &idx)?;
            let out = out.unwrap_or_else(|| ckpt.parent().map(Path::to_path_buf).unwrap_or_default());
            report.write(&out, &format!("xeval_{}", report.tested_on))?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            print_report(&report.cross);
            println!("P_CC change vs {}: {:+.2} points", report.trained_on, 100.0 * report.delta_p_cc);
            for d in &report.per_scheme {
                println!("  {:<10} {:+7.2}", d.scheme.name(), 100.0 * d.delta);
            }
        }
        Cmd::Inspect {
            config,
            ckpt,
            frame_length,
            classes,
        } => {
            let top = match (config, ckpt) {
                (Some(c), _) => RunConfig::load(&c)?.cap_config(),
                (None, Some(k)) => Checkpoint::load(&k)?.network.config,
                (None, None) => CapConfig::reference(frame_length, classes),
            };
            print!("{}", topology_table(&top)?);
        }
        Cmd::Selftest => {
            let checks = selftest::run_all();
            for c in &checks {
                println!("{c}");
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            println!("{} checks, {failed} failed", checks.len());
            if failed > 0 {
                return Err(Error::TestFailure(format!("{failed} of {} checks failed", checks.len())));
            }
        }
        Cmd::Repro { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let summary = pipeline::repro(&cfg, &out, &mut |m| eprintln!("{m}"))?;
            print!("{}", summary.table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
