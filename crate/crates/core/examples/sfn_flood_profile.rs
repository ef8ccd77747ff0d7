//! First-reception probabilities of a flood from the master, level by level.

use plc_routing::channel::{generate_ring, MASTER};
use plc_routing::sfn;

fn main() -> plc_routing::Result<()> {
    let per = generate_ring(10, 0.1, 0.6)?;
    let f = sfn::flood(&per, MASTER, 1.0, 6)?;

    print!("node ");
    for r in 0..f.levels() {
        print!("{:>9}", format!("r={r}"));
    }
    println!("{:>9}", "Q");
    for node in per.slaves() {
        print!("{node:>4} ");
        for r in 0..f.levels() {
            print!("{:>9.5}", f.rcv_at(node, r));
        }
        println!("{:>9.5}", f.cumulative_at(node, f.levels() - 1));
    }
    Ok(())
}
