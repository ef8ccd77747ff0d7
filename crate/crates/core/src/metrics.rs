//! Routing overhead per packet and routing-signaling volume per cycle.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sim::Protocol;

/// DLC1000 carries two repeater addresses in every header.
pub const DLC_HEADER_REPEATERS: u32 = 2;
pub const DLC_ADDRESS_BITS: u32 = 12;
/// SFN carries a downlink and an uplink level counter.
pub const SFN_LEVEL_BITS: u32 = 4;
/// Repeater candidates a DLC1000 slave reports with each response.
pub const DLC_REPORTED_REPEATERS: u64 = 5;
/// Width assumed for the channel-quality value attached to each candidate.
pub const DEFAULT_QUALITY_BITS: u32 = 8;
pub const DEFAULT_PACKET_BYTES: u32 = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverheadReport {
    pub protocol: Protocol,
    pub routing_bits_per_packet: u32,
    pub packet_bits: u32,
    pub overhead_ratio: f64,
    pub signaling_bits_per_poll_response: u64,
    pub quality_bits: u32,
}

pub fn routing_bits(protocol: Protocol) -> u32 {
    match protocol {
        Protocol::Dlc1000 => DLC_HEADER_REPEATERS * DLC_ADDRESS_BITS,
        Protocol::Sfn => 2 * SFN_LEVEL_BITS,
    }
}

pub fn routing_overhead(protocol: Protocol, packet_bytes: u32) -> Result<OverheadReport> {
    if packet_bytes == 0 {
        return Err(Error::InvalidParameter(
            "packet size must be positive".into(),
        ));
    }
    let bits = routing_bits(protocol);
    let packet_bits = 8 * packet_bytes;
    Ok(OverheadReport {
        protocol,
        routing_bits_per_packet: bits,
        packet_bits,
        overhead_ratio: f64::from(bits) / f64::from(packet_bits),
        signaling_bits_per_poll_response: response_signaling_bits(
            protocol,
            DLC_ADDRESS_BITS,
            DEFAULT_QUALITY_BITS,
        ),
        quality_bits: DEFAULT_QUALITY_BITS,
    })
}

/// Routing payload one slave adds to a poll response.
pub fn response_signaling_bits(protocol: Protocol, address_bits: u32, quality_bits: u32) -> u64 {
    match protocol {
        Protocol::Dlc1000 => DLC_REPORTED_REPEATERS * u64::from(address_bits + quality_bits),
        Protocol::Sfn => 0,
    }
}

/// Routing payload carried back to the master over one polling cycle,
/// assuming every response carries a report.
pub fn signaling_volume(
    protocol: Protocol,
    node_count: usize,
    address_bits: u32,
    quality_bits: u32,
) -> Result<u64> {
    if node_count < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 nodes, got {node_count}"
        )));
    }
    Ok((node_count as u64 - 1) * response_signaling_bits(protocol, address_bits, quality_bits))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixty_four_byte_packets() {
        let d = routing_overhead(Protocol::Dlc1000, 64).unwrap();
        assert_eq!((d.routing_bits_per_packet, d.packet_bits), (24, 512));
        assert_eq!(format!("{:.1}", d.overhead_ratio * 100.0), "4.7");
        let s = routing_overhead(Protocol::Sfn, 64).unwrap();
        assert_eq!((s.routing_bits_per_packet, s.packet_bits), (8, 512));
        assert_eq!(format!("{:.1}", s.overhead_ratio * 100.0), "1.6");
    }

    #[test]
    fn doubling_packet_halves_ratio() {
        let s = routing_overhead(Protocol::Sfn, 128).unwrap();
        assert_eq!(s.overhead_ratio, 0.0078125);
        assert!(routing_overhead(Protocol::Sfn, 0).is_err());
    }

    #[test]
    fn signaling_counts() {
        assert_eq!(signaling_volume(Protocol::Sfn, 50, 12, 8).unwrap(), 0);
        assert_eq!(signaling_volume(Protocol::Dlc1000, 10, 12, 8).unwrap(), 900);
        assert_eq!(signaling_volume(Protocol::Dlc1000, 2, 12, 8).unwrap(), 100);
        assert!(signaling_volume(Protocol::Dlc1000, 1, 12, 8).is_err());
    }
}
