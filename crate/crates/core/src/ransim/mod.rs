//! Seeded system-level simulator of one TDD cell.
//!
//! Each slot: traffic arrivals, CQI walk, then (on downlink slots) a two-stage
//! MAC pass. Stage 1 serves pending HARQ retransmissions; stage 2 hands out
//! the remaining PRBs one at a time, drawing the slice from the frame's
//! allocation plan and the UE from the intra-slice scheduler.
//!
//! Buffers hold bytes until they are delivered or dropped, so bytes waiting
//! for a retransmission still count towards buffer occupancy.

mod config;
pub mod link;
mod scheduler;
mod traffic;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{SimConfig, SlotKind, UeConfig, SYMBOLS_PER_SLOT};
pub use link::{prbs_for_bytes, spectral_efficiency, transport_block_bytes};
pub use traffic::{ArrivalModel, TrafficSource};

use crate::action_space::{AllocationPlan, SchedulerKind};
use crate::error::{Error, Result};
use crate::UeId;
use scheduler::Candidate;
use traffic::ArrivalState;

const TRAFFIC_STREAM: u64 = 1;
const CHANNEL_STREAM: u64 = 2;
const MAC_STREAM: u64 = 3;
const LINK_STREAM: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct HarqBlock {
    bytes: u64,
    /// Transmissions so far, the first one included.
    attempts: u8,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct FrameCounters {
    arrivals: u64,
    btx: u64,
    tdp: u64,
    delivered: u64,
    prbs: u32,
    weighted_prbs: f64,
    buffer_start: u64,
}

#[derive(Debug, Clone)]
struct UeState {
    cfg: UeConfig,
    cqi: u8,
    buffer_bytes: u64,
    buffer_capacity: u64,
    /// Blocks waiting for a retransmission, oldest first.
    harq: Vec<HarqBlock>,
    arrival: ArrivalState,
    thr_ewma: f64,
    counters: FrameCounters,
}

impl UeState {
    fn held_in_harq(&self) -> u64 {
        self.harq.iter().map(|b| b.bytes).sum()
    }
}

/// One transmission in a slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grant {
    pub ue: UeId,
    pub prbs: u32,
    pub bytes: u64,
    pub retransmission: bool,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: u64,
    pub dl_fraction: f64,
    pub grants: Vec<Grant>,
}

impl SlotRecord {
    pub fn prbs_used(&self) -> u32 {
        self.grants.iter().map(|g| g.prbs).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeFrameStats {
    pub ue: UeId,
    pub slice: usize,
    pub arrivals: u64,
    pub btx: u64,
    pub tdp: u64,
    pub delivered: u64,
    pub buffer_start: u64,
    pub buffer_bytes: u64,
    pub buffer_capacity: u64,
    pub prbs: u32,
    /// PRBs scaled by the downlink fraction of their slot.
    pub weighted_prbs: f64,
    pub cqi: u8,
}

impl UeFrameStats {
    pub fn bfs(&self) -> f64 {
        self.buffer_bytes as f64 / self.buffer_capacity as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameStats {
    pub frame: u64,
    pub num_slices: usize,
    pub duration_s: f64,
    pub ues: Vec<UeFrameStats>,
    /// PRBs granted in each slot of the frame.
    pub slot_prbs: Vec<u32>,
    pub slice_prbs: Vec<u32>,
    pub available_weighted_prbs: f64,
}

impl FrameStats {
    pub fn slice_ues(&self, slice: usize) -> impl Iterator<Item = &UeFrameStats> {
        self.ues.iter().filter(move |u| u.slice == slice)
    }

    pub fn write_trace_header<W: Write>(wtr: &mut csv::Writer<W>) -> Result<()> {
        wtr.write_record(["frame", "ue", "slice", "btx", "tdp", "delivered", "bfs", "prbs"])?;
        Ok(())
    }

    pub fn write_trace<W: Write>(&self, wtr: &mut csv::Writer<W>) -> Result<()> {
        for u in &self.ues {
            wtr.write_record([
                self.frame.to_string(),
                u.ue.0.to_string(),
                u.slice.to_string(),
                u.btx.to_string(),
                u.tdp.to_string(),
                u.delivered.to_string(),
                format!("{:.6}", u.bfs()),
                u.prbs.to_string(),
            ])?;
        }
        Ok(())
    }
}

/// Restorable UE state (buffers, channel, HARQ, scheduler memory). RNG
/// streams are not part of it.
#[derive(Debug, Clone)]
pub struct SimSnapshot {
    ues: Vec<UeState>,
    rr_next: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimConfig,
    num_slices: usize,
    ues: Vec<UeState>,
    slice_members: Vec<Vec<usize>>,
    rr_next: Vec<usize>,
    slot: u64,
    frame: u64,
    traffic_rng: ChaCha8Rng,
    channel_rng: ChaCha8Rng,
    mac_rng: ChaCha8Rng,
    link_rng: ChaCha8Rng,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

impl Simulator {
    pub fn new(config: SimConfig, roster: Vec<UeConfig>, num_slices: usize) -> Result<Self> {
        config.validate()?;
        if num_slices == 0 {
            return Err(Error::validation("simulator needs at least one slice"));
        }
        if roster.is_empty() {
            return Err(Error::validation("UE roster is empty"));
        }
        let mut slice_members = vec![Vec::new(); num_slices];
        let mut ues = Vec::with_capacity(roster.len());
        for (i, cfg) in roster.into_iter().enumerate() {
            cfg.validate(i, num_slices)?;
            slice_members[cfg.slice].push(i);
            ues.push(UeState {
                cqi: cfg.cqi,
                buffer_bytes: 0,
                buffer_capacity: cfg.buffer_capacity.unwrap_or(config.buffer_capacity),
                harq: Vec::new(),
                arrival: ArrivalState::default(),
                thr_ewma: 0.0,
                counters: FrameCounters::default(),
                cfg,
            });
        }
        let seed = config.rng_seed;
        Ok(Simulator {
            num_slices,
            ues,
            slice_members,
            rr_next: vec![0; num_slices],
            slot: 0,
            frame: 0,
            traffic_rng: stream(seed, TRAFFIC_STREAM),
            channel_rng: stream(seed, CHANNEL_STREAM),
            mac_rng: stream(seed, MAC_STREAM),
            link_rng: stream(seed, LINK_STREAM),
            config,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn num_slices(&self) -> usize {
        self.num_slices
    }

    pub fn num_ues(&self) -> usize {
        self.ues.len()
    }

    pub fn frame(&self) -> u64 {
        self.frame
    }

    pub fn ue_config(&self, ue: UeId) -> &UeConfig {
        &self.ues[ue.0 as usize].cfg
    }

    pub fn cqi(&self, ue: UeId) -> u8 {
        self.ues[ue.0 as usize].cqi
    }

    pub fn buffer_bytes(&self, ue: UeId) -> u64 {
        self.ues[ue.0 as usize].buffer_bytes
    }

    pub fn slice_members(&self, slice: usize) -> impl Iterator<Item = UeId> + '_ {
        self.slice_members[slice].iter().map(|&i| UeId(i as u32))
    }

    /// Mean offered load of a slice, bit/s.
    pub fn offered_rate(&self, slice: usize) -> f64 {
        self.slice_members[slice]
            .iter()
            .map(|&i| self.ues[i].cfg.traffic.rate_bps as f64)
            .sum()
    }

    pub fn snapshot(&self) -> SimSnapshot {
        SimSnapshot {
            ues: self.ues.clone(),
            rr_next: self.rr_next.clone(),
        }
    }

    pub fn restore(&mut self, snap: &SimSnapshot) -> Result<()> {
        if snap.ues.len() != self.ues.len() || snap.rr_next.len() != self.num_slices {
            return Err(Error::validation("snapshot belongs to a different roster"));
        }
        self.ues = snap.ues.clone();
        for u in &mut self.ues {
            u.counters = FrameCounters::default();
        }
        self.rr_next = snap.rr_next.clone();
        Ok(())
    }

    /// Advances one frame under `plan` and `sch`.
    pub fn step_frame(&mut self, plan: &AllocationPlan, sch: SchedulerKind) -> Result<FrameStats> {
        self.check_plan(plan)?;
        for u in &mut self.ues {
            u.counters = FrameCounters {
                buffer_start: u.buffer_bytes,
                ..FrameCounters::default()
            };
        }
        let mut slot_prbs = Vec::with_capacity(self.config.slots_per_frame);
        let mut slice_prbs = vec![0u32; self.num_slices];
        let mut available = 0.0;
        for _ in 0..self.config.slots_per_frame {
            available += self.config.num_prbs as f64 * self.config.dl_fraction(self.slot);
            let rec = self.run_slot(plan.p_final(), sch);
            for g in &rec.grants {
                slice_prbs[self.ues[g.ue.0 as usize].cfg.slice] += g.prbs;
            }
            slot_prbs.push(rec.prbs_used());
        }
        let stats = FrameStats {
            frame: self.frame,
            num_slices: self.num_slices,
            duration_s: self.config.frame_s(),
            ues: self
                .ues
                .iter()
                .enumerate()
                .map(|(i, u)| UeFrameStats {
                    ue: UeId(i as u32),
                    slice: u.cfg.slice,
                    arrivals: u.counters.arrivals,
                    btx: u.counters.btx,
                    tdp: u.counters.tdp,
                    delivered: u.counters.delivered,
                    buffer_start: u.counters.buffer_start,
                    buffer_bytes: u.buffer_bytes,
                    buffer_capacity: u.buffer_capacity,
                    prbs: u.counters.prbs,
                    weighted_prbs: u.counters.weighted_prbs,
                    cqi: u.cqi,
                })
                .collect(),
            slot_prbs,
            slice_prbs,
            available_weighted_prbs: available,
        };
        self.frame += 1;
        Ok(stats)
    }

    /// Advances one slot. Per-frame counters keep accumulating until the
    /// next [`Simulator::step_frame`].
    pub fn step_slot(&mut self, plan: &AllocationPlan, sch: SchedulerKind) -> Result<SlotRecord> {
        self.check_plan(plan)?;
        Ok(self.run_slot(plan.p_final(), sch))
    }

    fn check_plan(&self, plan: &AllocationPlan) -> Result<()> {
        if plan.num_slices() != self.num_slices {
            return Err(Error::Dimension {
                expected: self.num_slices,
                actual: plan.num_slices(),
            });
        }
        let total: f64 = plan.p_final().iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!("plan proportions sum to {total}, expected 1")));
        }
        Ok(())
    }

    fn run_slot(&mut self, p_final: &[f64], sch: SchedulerKind) -> SlotRecord {
        let slot = self.slot;
        self.generate_traffic();
        self.update_channel();
        let dl_fraction = self.config.dl_fraction(slot);
        let grants = if dl_fraction > 0.0 {
            let plan = self.schedule(p_final, sch, dl_fraction);
            self.transmit(plan, dl_fraction)
        } else {
            Vec::new()
        };
        self.update_pf(&grants);
        self.slot += 1;
        SlotRecord {
            slot,
            dl_fraction,
            grants,
        }
    }

    fn generate_traffic(&mut self) {
        let slot_us = self.config.slot_duration_us;
        for u in &mut self.ues {
            let bytes = u.arrival.arrivals(&u.cfg.traffic, slot_us, &mut self.traffic_rng);
            let accepted = bytes.min(u.buffer_capacity - u.buffer_bytes);
            u.buffer_bytes += accepted;
            u.counters.arrivals += bytes;
            u.counters.tdp += bytes - accepted;
        }
    }

    fn update_channel(&mut self) {
        let p = self.config.cqi_walk_step_prob;
        for u in &mut self.ues {
            // one draw per UE per slot keeps the stream aligned across runs
            let x: f64 = self.channel_rng.random();
            let next = if x < p / 2.0 {
                u.cqi.saturating_sub(1)
            } else if x < p {
                u.cqi + 1
            } else {
                u.cqi
            };
            u.cqi = next.clamp(u.cfg.cqi_min, u.cfg.cqi_max);
        }
    }

    /// Returns `(ue index, prbs, Some(harq index) for a retransmission)`.
    fn schedule(&mut self, p_final: &[f64], sch: SchedulerKind, dl_fraction: f64) -> Vec<(usize, u32, Option<usize>)> {
        let cfg = &self.config;
        let slot_s = cfg.slot_s();
        let limit = cfg.rb_allocation_limit;
        let mut remaining = cfg.num_prbs;
        let n = self.ues.len();
        let mut retx: Vec<Option<(usize, u32)>> = vec![None; n];

        // stage 1: HARQ retransmissions by UE id, one per UE
        for (i, u) in self.ues.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            if let Some(b) = u.harq.first() {
                let need = prbs_for_bytes(u.cqi, b.bytes, cfg.prb_bandwidth_hz, slot_s, dl_fraction).min(limit);
                if need <= remaining {
                    retx[i] = Some((0, need));
                    remaining -= need;
                }
            }
        }

        // stage 2: PRB by PRB
        let mut prbs = vec![0u32; n];
        let pending: Vec<u64> = self
            .ues
            .iter()
            .map(|u| u.buffer_bytes - u.held_in_harq())
            .collect();
        let eligible = |i: usize, u: &UeState, prbs: &[u32], pending: &[u64], retx: &[Option<(usize, u32)>]| {
            retx[i].is_none()
                && u.harq.len() < cfg.harq_processes_per_ue
                && prbs[i] < limit
                && transport_block_bytes(u.cqi, prbs[i], cfg.prb_bandwidth_hz, slot_s, dl_fraction) < pending[i]
        };
        let mut weights = vec![0.0; self.num_slices];
        let mut candidates: Vec<Candidate> = Vec::with_capacity(n);
        while remaining > 0 {
            let mut total = 0.0;
            for (j, w) in weights.iter_mut().enumerate() {
                let any = self.slice_members[j]
                    .iter()
                    .any(|&i| eligible(i, &self.ues[i], &prbs, &pending, &retx));
                *w = if any { p_final[j] } else { 0.0 };
                total += *w;
            }
            if total <= 0.0 {
                break;
            }
            let mut x = self.mac_rng.random::<f64>() * total;
            let mut slice = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
            for (j, &w) in weights.iter().enumerate() {
                if w > 0.0 && x < w {
                    slice = j;
                    break;
                }
                x -= w;
            }
            candidates.clear();
            for &i in &self.slice_members[slice] {
                let u = &self.ues[i];
                if eligible(i, u, &prbs, &pending, &retx) {
                    candidates.push(Candidate {
                        index: i,
                        efficiency: link::spectral_efficiency(u.cqi).unwrap_or(0.0),
                        cqi: u.cqi,
                        thr_ewma: u.thr_ewma,
                    });
                }
            }
            let Some(i) = scheduler::pick(sch, &candidates, self.rr_next[slice]) else {
                break;
            };
            if sch == SchedulerKind::RoundRobin {
                self.rr_next[slice] = i + 1;
            }
            prbs[i] += 1;
            remaining -= 1;
        }
        let mut out = Vec::new();
        for i in 0..n {
            if let Some((h, p)) = retx[i] {
                out.push((i, p, Some(h)));
            } else if prbs[i] > 0 {
                out.push((i, prbs[i], None));
            }
        }
        out
    }

    fn transmit(&mut self, plan: Vec<(usize, u32, Option<usize>)>, dl_fraction: f64) -> Vec<Grant> {
        let cfg = &self.config;
        let slot_s = cfg.slot_s();
        let mut grants = Vec::with_capacity(plan.len());
        for (i, prbs, harq) in plan {
            let u = &mut self.ues[i];
            let x: f64 = self.link_rng.random();
            u.counters.prbs += prbs;
            u.counters.weighted_prbs += prbs as f64 * dl_fraction;
            let grant = match harq {
                Some(h) => {
                    let mut block = u.harq.remove(h);
                    let success = x >= cfg.retx_bler;
                    block.attempts += 1;
                    if success {
                        u.buffer_bytes -= block.bytes;
                        u.counters.delivered += block.bytes;
                    } else if block.attempts > cfg.max_retransmissions {
                        u.buffer_bytes -= block.bytes;
                        u.counters.tdp += block.bytes;
                    } else {
                        u.harq.insert(h, block);
                    }
                    u.counters.btx += block.bytes;
                    Grant {
                        ue: UeId(i as u32),
                        prbs,
                        bytes: block.bytes,
                        retransmission: true,
                        success,
                    }
                }
                None => {
                    let pending = u.buffer_bytes - u.held_in_harq();
                    let bytes = transport_block_bytes(u.cqi, prbs, cfg.prb_bandwidth_hz, slot_s, dl_fraction).min(pending);
                    let success = x >= cfg.initial_bler;
                    if bytes > 0 {
                        if success {
                            u.buffer_bytes -= bytes;
                            u.counters.delivered += bytes;
                        } else if cfg.max_retransmissions == 0 {
                            u.buffer_bytes -= bytes;
                            u.counters.tdp += bytes;
                        } else {
                            u.harq.push(HarqBlock { bytes, attempts: 1 });
                        }
                        u.counters.btx += bytes;
                    }
                    Grant {
                        ue: UeId(i as u32),
                        prbs,
                        bytes,
                        retransmission: false,
                        success,
                    }
                }
            };
            grants.push(grant);
        }
        grants
    }

    fn update_pf(&mut self, grants: &[Grant]) {
        let alpha = self.config.slot_ms() / self.config.pf_time_constant_ms;
        let slot_s = self.config.slot_s();
        let mut served = vec![0u64; self.ues.len()];
        for g in grants {
            served[g.ue.0 as usize] += g.bytes;
        }
        for (u, b) in self.ues.iter_mut().zip(served) {
            u.thr_ewma = (1.0 - alpha) * u.thr_ewma + alpha * (b as f64 * 8.0 / slot_s);
        }
    }
}
