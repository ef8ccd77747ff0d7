//! Header overhead and routing signaling for a range of packet sizes.

use plc_routing::metrics::{
    routing_overhead, signaling_volume, DEFAULT_QUALITY_BITS, DLC_ADDRESS_BITS,
};
use plc_routing::sim::Protocol;

fn main() -> plc_routing::Result<()> {
    println!("{:>8} {:>10} {:>10}", "bytes", "dlc1000", "sfn");
    for bytes in [16, 32, 64, 128, 256] {
        let d = routing_overhead(Protocol::Dlc1000, bytes)?;
        let s = routing_overhead(Protocol::Sfn, bytes)?;
        println!(
            "{bytes:>8} {:>9.2}% {:>9.2}%",
            d.overhead_ratio * 100.0,
            s.overhead_ratio * 100.0
        );
    }

    println!();
    for nodes in [10, 100, 200] {
        println!(
            "{nodes:>4} nodes: DLC1000 reports {} bits of routing data per cycle, SFN {}",
            signaling_volume(
                Protocol::Dlc1000,
                nodes,
                DLC_ADDRESS_BITS,
                DEFAULT_QUALITY_BITS
            )?,
            signaling_volume(Protocol::Sfn, nodes, DLC_ADDRESS_BITS, DEFAULT_QUALITY_BITS)?
        );
    }
    Ok(())
}
