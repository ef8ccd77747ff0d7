//! Level at which an escalating SFN downlink first reaches a slave: the
//! analytic chain against a Monte-Carlo histogram.

use plc_routing::channel::{generate_ring, MASTER};
use plc_routing::{sfn, sim};

fn main() -> plc_routing::Result<()> {
    let per = generate_ring(10, 0.1, 0.6)?;
    let horizon = sfn::default_horizon(&per);
    let downlink = sfn::flood(&per, MASTER, 1.0, horizon)?;

    for slave in [1, 3, 5] {
        let dist = sfn::level_distribution(&downlink, slave)?;
        let hist = sim::level_histogram(&per, slave, horizon, 20_000, 5, true)?;
        println!(
            "slave {slave}: mean level {:.3}, candidates {:?}",
            dist.mean_level,
            dist.candidate_levels()
        );
        for (r, (p, f)) in dist.pi.iter().zip(hist.frequencies()).enumerate().take(5) {
            println!("  r={r}  pi {p:.4}  simulated {f:.4}");
        }
    }
    Ok(())
}
