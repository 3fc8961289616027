//! Prints the reference network's layer table and per-branch parameter counts.
//!
//! Usage: `cargo run --example topology [frame_length] [classes]`

use cyclocap::model::{build_cap, topology_table, CapConfig};
use cyclocap::nn::Parameterized;

fn main() -> cyclocap::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let cfg = CapConfig::reference(args.next().unwrap_or(32_768), args.next().unwrap_or(8));
    print!("{}", topology_table(&cfg)?);
    let net = build_cap::<f32>(&cfg, 0)?;
    for (kind, n) in net.branch_parameter_counts() {
        println!("{kind}: {n}");
    }
    println!("built network holds {} parameters", net.parameter_count());
    Ok(())
}
