//! Intra-slice UE selection for one PRB.

use crate::action_space::SchedulerKind;

/// What a scheduler sees of one candidate UE.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Candidate {
    pub index: usize,
    pub efficiency: f64,
    pub cqi: u8,
    pub thr_ewma: f64,
}

/// Picks among eligible `candidates` (ascending UE index). `rr_next` is the
/// slice's round-robin cursor, a UE index.
pub(crate) fn pick(kind: SchedulerKind, candidates: &[Candidate], rr_next: usize) -> Option<usize> {
    match kind {
        SchedulerKind::RoundRobin => candidates
            .iter()
            .find(|c| c.index >= rr_next)
            .or_else(|| candidates.first())
            .map(|c| c.index),
        SchedulerKind::BestCqi => best_by(candidates, |c| c.cqi as f64),
        SchedulerKind::ProportionalFair => best_by(candidates, |c| c.efficiency / c.thr_ewma.max(1.0)),
    }
}

// Strictly-greater keeps the lowest index on ties.
fn best_by(candidates: &[Candidate], metric: impl Fn(&Candidate) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for c in candidates {
        let m = metric(c);
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((c.index, m));
        }
    }
    best.map(|(i, _)| i)
}
