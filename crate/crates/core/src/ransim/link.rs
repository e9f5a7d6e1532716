//! Abstract link model: CQI to spectral efficiency and transport block sizing.

use crate::error::{Error, Result};

/// 4-bit CQI table (QPSK up to 64QAM), bit/s/Hz, indexed by `cqi - 1`.
const SPECTRAL_EFFICIENCY: [f64; 15] = [
    0.1523, 0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766, 1.9141, 2.4063, 2.7305, 3.3223, 3.9023, 4.5234,
    5.1152, 5.5547,
];

pub const MIN_CQI: u8 = 1;
pub const MAX_CQI: u8 = 15;

pub fn spectral_efficiency(cqi: u8) -> Result<f64> {
    if !(MIN_CQI..=MAX_CQI).contains(&cqi) {
        return Err(Error::OutOfRange {
            what: "CQI",
            value: cqi.to_string(),
            range: format!("[{MIN_CQI}, {MAX_CQI}]"),
        });
    }
    Ok(SPECTRAL_EFFICIENCY[cqi as usize - 1])
}

/// Bytes one grant of `prbs` PRBs can carry in a slot whose downlink part is
/// `dl_fraction` of a full slot.
pub fn transport_block_bytes(cqi: u8, prbs: u32, prb_bandwidth_hz: f64, slot_s: f64, dl_fraction: f64) -> u64 {
    let eff = SPECTRAL_EFFICIENCY[cqi.clamp(MIN_CQI, MAX_CQI) as usize - 1];
    (eff * prbs as f64 * prb_bandwidth_hz * slot_s * dl_fraction / 8.0).floor() as u64
}

/// Smallest PRB count whose transport block holds `bytes`.
pub fn prbs_for_bytes(cqi: u8, bytes: u64, prb_bandwidth_hz: f64, slot_s: f64, dl_fraction: f64) -> u32 {
    let per_prb_bits = SPECTRAL_EFFICIENCY[cqi.clamp(MIN_CQI, MAX_CQI) as usize - 1] * prb_bandwidth_hz * slot_s * dl_fraction;
    if per_prb_bits <= 0.0 {
        return u32::MAX;
    }
    let mut n = ((bytes as f64 * 8.0) / per_prb_bits).ceil().max(1.0) as u32;
    // guard against floor() in transport_block_bytes rounding below `bytes`
    while transport_block_bytes(cqi, n, prb_bandwidth_hz, slot_s, dl_fraction) < bytes {
        n += 1;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_endpoints_and_monotonicity() {
        assert_eq!(spectral_efficiency(1).unwrap(), 0.1523);
        assert_eq!(spectral_efficiency(15).unwrap(), 5.5547);
        assert!(spectral_efficiency(8).unwrap() > spectral_efficiency(7).unwrap());
        for c in 2..=15 {
            assert!(spectral_efficiency(c).unwrap() >= spectral_efficiency(c - 1).unwrap());
        }
        assert!(spectral_efficiency(0).is_err());
        assert!(spectral_efficiency(16).is_err());
    }

    #[test]
    fn full_slot_block() {
        // floor(5.5547 * 50 * 180e3 * 1e-3 / 8) = floor(6249.04)
        assert_eq!(transport_block_bytes(15, 50, 180e3, 1e-3, 1.0), 6249);
    }

    #[test]
    fn prbs_cover_bytes() {
        for cqi in 1..=15 {
            for bytes in [1u64, 17, 100, 999, 6000] {
                let n = prbs_for_bytes(cqi, bytes, 180e3, 1e-3, 8.0 / 14.0);
                assert!(transport_block_bytes(cqi, n, 180e3, 1e-3, 8.0 / 14.0) >= bytes);
                if n > 1 {
                    assert!(transport_block_bytes(cqi, n - 1, 180e3, 1e-3, 8.0 / 14.0) < bytes);
                }
            }
        }
    }
}
