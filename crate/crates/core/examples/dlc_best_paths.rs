//! Best DLC1000 repeater sequence for every slave of a 10-node ring.

use plc_routing::channel::generate_ring;
use plc_routing::dlc;

fn main() -> plc_routing::Result<()> {
    let per = generate_ring(10, 0.1, 0.6)?;

    for slave in [1, 3, 5] {
        println!("slave {slave}");
        for level in 0..=3 {
            let best = dlc::best_path(&per, slave, level)?;
            println!(
                "  {level} repeaters {:<12} p = {:.4}  D = {}",
                format!("{:?}", best.repeaters),
                best.success_prob,
                dlc::expected_duration(best.success_prob, level, 1.0)
                    .map_or("inf".into(), |d| format!("{d:.2}"))
            );
        }
    }

    let cycle = dlc::cycle_analysis(&per, 2, 1.0)?;
    println!(
        "\nwith at most 2 repeaters the cycle takes {:.3} slots",
        cycle.total
    );
    Ok(())
}
