//! Builds the stock channel models and writes one of them to disk.
//!
//! cargo run --example generate_channels [OUT_DIR]

use plc_routing::channel::{ChannelSpec, MatrixFormat};

fn main() -> plc_routing::Result<()> {
    let out_dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| std::env::temp_dir().display().to_string());

    for (name, spec) in ChannelSpec::defaults() {
        let per = spec.build()?;
        let links = per.slaves().filter(|&s| per.per(0, s) < 0.5).count();
        println!(
            "{name:<14} {:>4} nodes, symmetric {}, master hears {links} slaves with PER < 0.5",
            per.node_count(),
            per.is_symmetric()
        );
    }

    let ring = ChannelSpec::ring(10).build()?;
    let path = std::path::Path::new(&out_dir).join("ring10.per");
    ring.save(&path, MatrixFormat::Text)?;
    println!("\nwrote {}:\n{}", path.display(), ring.to_text());
    Ok(())
}
