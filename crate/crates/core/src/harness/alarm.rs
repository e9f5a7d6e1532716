//! Insufficient-resources alarm.
//!
//! An outage predicate that stays violated for `window` consecutive frames
//! is a candidate. If the slice already held its largest possible share in
//! every one of those frames the alarm fires. Otherwise a copy of the
//! simulator is driven with the slice at its largest share under every
//! scheduler; the alarm fires only if the predicate is still violated at the
//! end of each probe, and the streak is cleared otherwise.

use std::io::Write;

use serde::Serialize;

use crate::action_space::{compose_allocation, Composition, SchedulerKind, GRID_STEPS};
use crate::error::Result;
use crate::ransim::Simulator;
use crate::reward::{vrsla, RewardSpec};
use crate::telemetry::{collect, KpmWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlarmReason {
    /// The controller already gave the slice everything it could.
    FullAllocation,
    /// A full-allocation probe also violated.
    Probe,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlarmEvent {
    pub frame: u64,
    pub slice: usize,
    pub slice_name: String,
    pub predicate: String,
    /// Violation rate at full allocation.
    pub evidence: f64,
    pub reason: AlarmReason,
}

impl AlarmEvent {
    pub fn write_ndjson<W: Write>(events: &[AlarmEvent], mut out: W) -> Result<()> {
        for e in events {
            serde_json::to_writer(&mut out, e).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Per-frame input of the detector.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    /// `violated[j][k]`: outage predicate `k` of slice `j` tripped its slice's
    /// outage flag this frame.
    pub violated: Vec<Vec<bool>>,
    pub p_final: Vec<f64>,
    pub max_allocation: Vec<f64>,
}

const AT_MAX_TOLERANCE: f64 = 1e-9;

/// True when each of the last `window` frames violates predicate `k` of slice
/// `j` while the slice sits at its largest share.
pub fn detect_insufficient_resources(history: &[FrameRecord], j: usize, k: usize, window: usize) -> bool {
    window > 0
        && history.len() >= window
        && history[history.len() - window..].iter().all(|f| {
            f.violated[j][k] && f.p_final[j] >= f.max_allocation[j] - AT_MAX_TOLERANCE
        })
}

/// A candidate that still needs confirmation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate {
    pub slice: usize,
    pub predicate: usize,
    pub at_full_allocation: bool,
}

#[derive(Debug, Clone)]
pub struct AlarmDetector {
    window: usize,
    streak: Vec<Vec<usize>>,
    raised: Vec<Vec<bool>>,
    recent: Vec<FrameRecord>,
}

impl AlarmDetector {
    /// `shape[j]` is the number of outage predicates of slice `j`.
    pub fn new(shape: &[usize], window: usize) -> Self {
        AlarmDetector {
            window,
            streak: shape.iter().map(|&n| vec![0; n]).collect(),
            raised: shape.iter().map(|&n| vec![false; n]).collect(),
            recent: Vec::with_capacity(window),
        }
    }

    pub fn observe(&mut self, rec: FrameRecord) -> Vec<Candidate> {
        if self.recent.len() == self.window {
            self.recent.remove(0);
        }
        self.recent.push(rec);
        let rec = self.recent.last().expect("just pushed");
        let mut out = Vec::new();
        for (j, row) in self.streak.iter_mut().enumerate() {
            for (k, s) in row.iter_mut().enumerate() {
                *s = if rec.violated[j][k] { *s + 1 } else { 0 };
                if *s >= self.window && !self.raised[j][k] {
                    out.push(Candidate {
                        slice: j,
                        predicate: k,
                        at_full_allocation: detect_insufficient_resources(&self.recent, j, k, self.window),
                    });
                }
            }
        }
        out
    }

    pub fn confirm(&mut self, c: Candidate) {
        self.raised[c.slice][c.predicate] = true;
    }

    pub fn dismiss(&mut self, c: Candidate) {
        self.streak[c.slice][c.predicate] = 0;
    }
}

/// Drives copies of `sim` with slice `j` at its largest share. Returns
/// whether every scheduler still violates predicate `k` in each of the last
/// `tail` frames, and the smallest mean violation rate over that tail.
#[allow(clippy::too_many_arguments)]
pub fn probe_full_allocation(
    sim: &Simulator,
    spec: &RewardSpec,
    p_sta: &[f64],
    j: usize,
    k: usize,
    kpm_window: usize,
    frames: usize,
    tail: usize,
) -> Result<(bool, f64)> {
    let mut tenths = vec![0u8; p_sta.len()];
    tenths[j] = GRID_STEPS;
    let plan = compose_allocation(&Composition::from_tenths(tenths)?, p_sta)?;
    let pred = &spec.slices[j].outage[k];
    let limit = 1.0 - spec.slices[j].reliability.unwrap_or(1.0);
    let mut all_violate = true;
    let mut evidence = f64::INFINITY;
    for sch in SchedulerKind::ALL {
        let mut s = sim.clone();
        let mut w = KpmWindow::new(kpm_window);
        let mut tail_rates = Vec::with_capacity(tail);
        for f in 0..frames {
            let rec = w.push(collect(&s.step_frame(&plan, sch)?));
            if f + tail >= frames {
                tail_rates.push(vrsla(spec, j, pred, &rec)?);
            }
        }
        let violated = tail_rates.iter().all(|&v| v > limit);
        all_violate &= violated;
        evidence = evidence.min(tail_rates.iter().sum::<f64>() / tail_rates.len().max(1) as f64);
    }
    Ok((all_violate, evidence))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(violated: bool, p: f64) -> FrameRecord {
        FrameRecord {
            violated: vec![vec![violated]],
            p_final: vec![p],
            max_allocation: vec![0.7],
        }
    }

    #[test]
    fn needs_full_window_at_max() {
        let full: Vec<FrameRecord> = (0..50).map(|_| frame(true, 0.7)).collect();
        assert!(detect_insufficient_resources(&full, 0, 0, 50));
        assert!(!detect_insufficient_resources(&full[..49], 0, 0, 50));
        let below: Vec<FrameRecord> = (0..50).map(|_| frame(true, 0.5)).collect();
        assert!(!detect_insufficient_resources(&below, 0, 0, 50));
        let mut gap = full.clone();
        gap[20] = frame(false, 0.7);
        assert!(!detect_insufficient_resources(&gap, 0, 0, 50));
    }

    #[test]
    fn detector_streaks() {
        let mut d = AlarmDetector::new(&[1], 3);
        assert!(d.observe(frame(true, 0.7)).is_empty());
        assert!(d.observe(frame(true, 0.7)).is_empty());
        let c = d.observe(frame(true, 0.7));
        assert_eq!(
            c,
            vec![Candidate {
                slice: 0,
                predicate: 0,
                at_full_allocation: true
            }]
        );
        d.dismiss(c[0]);
        assert!(d.observe(frame(true, 0.2)).is_empty());
        assert!(d.observe(frame(true, 0.2)).is_empty());
        let c = d.observe(frame(true, 0.2));
        assert!(!c[0].at_full_allocation);
        d.confirm(c[0]);
        assert!(d.observe(frame(true, 0.7)).is_empty());
    }

    #[test]
    fn no_outage_no_candidate() {
        let mut d = AlarmDetector::new(&[1, 0], 2);
        for _ in 0..10 {
            let f = FrameRecord {
                violated: vec![vec![false], vec![]],
                p_final: vec![0.7, 0.3],
                max_allocation: vec![0.7, 0.6],
            };
            assert!(d.observe(f).is_empty());
        }
    }
}
