//! The four comparison tables over the five stock channel models.
//!
//! cargo run --release --example compare_protocols [CYCLES]

use plc_routing::channel::ChannelSpec;
use plc_routing::report::{CompareSettings, ComparisonDoc};

fn main() -> plc_routing::Result<()> {
    let cycles = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(1000);
    let models = ChannelSpec::defaults()
        .into_iter()
        .map(|(name, spec)| (name, spec.build()))
        .collect();
    let doc = ComparisonDoc::compute(
        models,
        CompareSettings {
            cycles,
            ..Default::default()
        },
    )?;
    print!("{}", doc.to_text());
    Ok(())
}
