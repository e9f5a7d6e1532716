use serde::{Deserialize, Serialize};

use super::link::{MAX_CQI, MIN_CQI};
use super::traffic::TrafficSource;
use crate::error::{Error, Result};

/// Symbols per slot (normal cyclic prefix).
pub const SYMBOLS_PER_SLOT: u32 = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    Downlink,
    /// Mixed slot; carries `special_dl_symbols` of downlink.
    Special,
    Uplink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub num_prbs: u32,
    pub prb_bandwidth_hz: f64,
    pub slot_duration_us: u64,
    pub slots_per_frame: usize,
    /// One letter per slot of the TDD period: `D`, `S` or `U`.
    pub tdd_pattern: String,
    pub special_dl_symbols: u32,
    /// Informational only.
    pub carrier_hz: f64,
    pub rb_allocation_limit: u32,
    pub buffer_capacity: u64,
    pub initial_bler: f64,
    pub retx_bler: f64,
    pub max_retransmissions: u8,
    pub harq_processes_per_ue: usize,
    pub cqi_walk_step_prob: f64,
    pub pf_time_constant_ms: f64,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            num_prbs: 50,
            prb_bandwidth_hz: 180e3,
            slot_duration_us: 1000,
            slots_per_frame: 10,
            tdd_pattern: "DDSUU".to_string(),
            special_dl_symbols: 8,
            carrier_hz: 2.59e9,
            rb_allocation_limit: 50,
            buffer_capacity: 200_000,
            initial_bler: 0.1,
            retx_bler: 0.01,
            max_retransmissions: 1,
            harq_processes_per_ue: 16,
            cqi_walk_step_prob: 0.1,
            pf_time_constant_ms: 100.0,
            rng_seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::validation(format!("sim config: {m}")));
        if self.num_prbs == 0 {
            return bad("num_prbs must be positive");
        }
        if !(self.prb_bandwidth_hz > 0.0 && self.prb_bandwidth_hz.is_finite()) {
            return bad("prb_bandwidth_hz must be positive");
        }
        if self.slot_duration_us == 0 || self.slots_per_frame == 0 {
            return bad("slot duration and slots per frame must be positive");
        }
        if self.tdd_pattern.is_empty() || self.tdd_pattern.chars().any(|c| !matches!(c, 'D' | 'S' | 'U')) {
            return bad("tdd_pattern must be a non-empty string over D, S, U");
        }
        if self.special_dl_symbols > SYMBOLS_PER_SLOT {
            return bad("special_dl_symbols exceeds the slot");
        }
        if self.pattern_dl_fractions().iter().all(|&f| f == 0.0) {
            return bad("TDD pattern has no downlink capacity");
        }
        if self.rb_allocation_limit == 0 || self.harq_processes_per_ue == 0 {
            return bad("rb_allocation_limit and harq_processes_per_ue must be positive");
        }
        for (name, v) in [
            ("initial_bler", self.initial_bler),
            ("retx_bler", self.retx_bler),
            ("cqi_walk_step_prob", self.cqi_walk_step_prob),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.pf_time_constant_ms >= self.slot_ms()) {
            return bad("pf_time_constant_ms must be at least one slot");
        }
        Ok(())
    }

    pub fn slot_s(&self) -> f64 {
        self.slot_duration_us as f64 * 1e-6
    }

    pub fn slot_ms(&self) -> f64 {
        self.slot_duration_us as f64 * 1e-3
    }

    pub fn frame_s(&self) -> f64 {
        self.slot_s() * self.slots_per_frame as f64
    }

    pub fn slot_kind(&self, abs_slot: u64) -> SlotKind {
        let b = self.tdd_pattern.as_bytes();
        match b[(abs_slot % b.len() as u64) as usize] {
            b'D' => SlotKind::Downlink,
            b'S' => SlotKind::Special,
            _ => SlotKind::Uplink,
        }
    }

    pub fn dl_fraction(&self, abs_slot: u64) -> f64 {
        match self.slot_kind(abs_slot) {
            SlotKind::Downlink => 1.0,
            SlotKind::Special => self.special_dl_symbols as f64 / SYMBOLS_PER_SLOT as f64,
            SlotKind::Uplink => 0.0,
        }
    }

    fn pattern_dl_fractions(&self) -> Vec<f64> {
        (0..self.tdd_pattern.len() as u64).map(|s| self.dl_fraction(s)).collect()
    }

    /// Mean downlink capacity per frame, in units of full slots.
    pub fn effective_dl_slots_per_frame(&self) -> f64 {
        let f = self.pattern_dl_fractions();
        f.iter().sum::<f64>() / f.len() as f64 * self.slots_per_frame as f64
    }
}

/// One roster entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeConfig {
    pub slice: usize,
    pub cqi: u8,
    #[serde(default = "min_cqi")]
    pub cqi_min: u8,
    #[serde(default = "max_cqi")]
    pub cqi_max: u8,
    /// Falls back to [`SimConfig::buffer_capacity`].
    #[serde(default)]
    pub buffer_capacity: Option<u64>,
    pub traffic: TrafficSource,
}

fn min_cqi() -> u8 {
    MIN_CQI
}

fn max_cqi() -> u8 {
    MAX_CQI
}

impl UeConfig {
    pub fn new(slice: usize, cqi: u8, traffic: TrafficSource) -> Self {
        UeConfig {
            slice,
            cqi,
            cqi_min: MIN_CQI,
            cqi_max: MAX_CQI,
            buffer_capacity: None,
            traffic,
        }
    }

    /// CQI pinned to its initial value.
    pub fn fixed_cqi(mut self) -> Self {
        self.cqi_min = self.cqi;
        self.cqi_max = self.cqi;
        self
    }

    pub fn with_cqi_range(mut self, lo: u8, hi: u8) -> Self {
        self.cqi_min = lo;
        self.cqi_max = hi;
        self
    }

    pub fn with_buffer(mut self, bytes: u64) -> Self {
        self.buffer_capacity = Some(bytes);
        self
    }

    pub(crate) fn validate(&self, index: usize, num_slices: usize) -> Result<()> {
        let bad = |m: String| Err(Error::validation(format!("UE {index}: {m}")));
        if self.slice >= num_slices {
            return bad(format!("slice {} out of range for {num_slices} slices", self.slice));
        }
        if !(MIN_CQI <= self.cqi_min && self.cqi_min <= self.cqi && self.cqi <= self.cqi_max && self.cqi_max <= MAX_CQI) {
            return bad(format!(
                "CQI bounds must satisfy 1 <= min <= cqi <= max <= 15, got {} <= {} <= {}",
                self.cqi_min, self.cqi, self.cqi_max
            ));
        }
        if self.buffer_capacity == Some(0) {
            return bad("buffer capacity must be positive".into());
        }
        Ok(())
    }
}
