//! Simulates polling cycles for both protocols and prints the per-slave table.
//!
//! cargo run --release --example simulate_cycle [CYCLES] [SEED]

use plc_routing::channel::generate_ring;
use plc_routing::report::SimulationDoc;
use plc_routing::sim::{Protocol, SimConfig};

fn main() -> plc_routing::Result<()> {
    let mut args = std::env::args().skip(1);
    let cycles = args.next().and_then(|a| a.parse().ok()).unwrap_or(10_000);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);
    let per = generate_ring(10, 0.1, 0.6)?;

    for protocol in [Protocol::Dlc1000, Protocol::Sfn] {
        let mut cfg = SimConfig::new(protocol, cycles, seed);
        // the analytic durations assume a poll is retried until it succeeds
        cfg.max_retries = 10_000;
        if protocol == Protocol::Dlc1000 {
            cfg.max_level = Some(2);
        }
        let doc = SimulationDoc::run(&per, &cfg)?;
        println!("{}", doc.to_text());
    }
    Ok(())
}
