//! Discrete action set of the agent.
//!
//! Half of the PRBs are split statically by operator weight; the other half
//! (the dynamic pool) is split on a grid of tenths chosen by the agent. An
//! action is one dynamic-pool composition plus the intra-slice scheduler used
//! by every slice during the next frame.
//!
//! Canonical order: compositions ascending lexicographically on their tenths
//! (so `[0, .., 0, 10]` comes first), and for each composition the schedulers
//! in `RR < PF < BCQI` order. `id = composition_index * |schedulers| +
//! scheduler_index`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::WEIGHT_SUM_TOLERANCE;

/// Share of the PRBs split by operator weight; the rest is the dynamic pool.
pub const STATIC_FRACTION: f64 = 0.5;
/// Grid resolution of the dynamic pool.
pub const GRID_STEPS: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchedulerKind {
    #[serde(rename = "RR")]
    RoundRobin,
    #[serde(rename = "PF")]
    ProportionalFair,
    #[serde(rename = "BCQI")]
    BestCqi,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 3] = [
        SchedulerKind::RoundRobin,
        SchedulerKind::ProportionalFair,
        SchedulerKind::BestCqi,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SchedulerKind::RoundRobin => "RR",
            SchedulerKind::ProportionalFair => "PF",
            SchedulerKind::BestCqi => "BCQI",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RR" => Some(SchedulerKind::RoundRobin),
            "PF" => Some(SchedulerKind::ProportionalFair),
            "BCQI" => Some(SchedulerKind::BestCqi),
            _ => None,
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Split of the dynamic pool, stored as integer tenths summing to exactly 10.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Composition(Vec<u8>);

impl Composition {
    pub fn from_tenths(tenths: Vec<u8>) -> Result<Self> {
        if tenths.is_empty() {
            return Err(Error::validation("composition needs at least one slice"));
        }
        let sum: u32 = tenths.iter().map(|&t| t as u32).sum();
        if sum != GRID_STEPS as u32 {
            return Err(Error::validation(format!(
                "composition tenths {tenths:?} sum to {sum}, expected {GRID_STEPS}"
            )));
        }
        Ok(Composition(tenths))
    }

    pub fn tenths(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn fractions(&self) -> Vec<f64> {
        self.0.iter().map(|&t| t as f64 / GRID_STEPS as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub id: usize,
    pub composition: Composition,
    pub scheduler: SchedulerKind,
}

/// Per-slice PRB proportions for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    p_sta: Vec<f64>,
    p_opt: Vec<f64>,
    p_final: Vec<f64>,
}

impl AllocationPlan {
    pub fn new(p_sta: Vec<f64>, p_opt: Vec<f64>) -> Result<Self> {
        if p_sta.len() != p_opt.len() {
            return Err(Error::Dimension {
                expected: p_sta.len(),
                actual: p_opt.len(),
            });
        }
        if p_sta.iter().chain(&p_opt).any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::validation("plan proportions must be finite and non-negative"));
        }
        if p_opt.iter().any(|&p| p > 1.0 - STATIC_FRACTION + 1e-12) {
            return Err(Error::validation("dynamic share of a slice cannot exceed the pool"));
        }
        let p_final: Vec<f64> = p_sta.iter().zip(&p_opt).map(|(a, b)| a + b).collect();
        let total: f64 = p_final.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!("plan proportions sum to {total}, expected 1")));
        }
        Ok(AllocationPlan { p_sta, p_opt, p_final })
    }

    /// Plan whose final proportions equal the weights (static split of the
    /// dynamic pool by weight as well).
    pub fn weighted(weights: &[f64]) -> Result<Self> {
        let p_sta = static_share(weights)?;
        let p_opt = p_sta.clone();
        AllocationPlan::new(p_sta, p_opt)
    }

    /// Dynamic pool split equally across slices.
    pub fn equal_dynamic(weights: &[f64]) -> Result<Self> {
        let p_sta = static_share(weights)?;
        let share = (1.0 - STATIC_FRACTION) / weights.len() as f64;
        AllocationPlan::new(p_sta, vec![share; weights.len()])
    }

    pub fn num_slices(&self) -> usize {
        self.p_final.len()
    }

    pub fn p_sta(&self) -> &[f64] {
        &self.p_sta
    }

    pub fn p_opt(&self) -> &[f64] {
        &self.p_opt
    }

    pub fn p_final(&self) -> &[f64] {
        &self.p_final
    }

    /// Largest proportion slice `j` can receive from any action.
    pub fn max_allocation(&self, j: usize) -> f64 {
        self.p_sta[j] + (1.0 - STATIC_FRACTION)
    }
}

/// `p_sta_j = weight_j * 0.5` (weights renormalised to sum exactly to 1).
pub fn static_share(weights: &[f64]) -> Result<Vec<f64>> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::validation(format!("weights sum to {sum}, expected 1")));
    }
    if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
        return Err(Error::validation("weights must lie in [0, 1]"));
    }
    Ok(weights.iter().map(|w| w / sum * STATIC_FRACTION).collect())
}

/// `p_final = p_sta + q * 0.5`.
pub fn compose_allocation(composition: &Composition, p_sta: &[f64]) -> Result<AllocationPlan> {
    if composition.len() != p_sta.len() {
        return Err(Error::Dimension {
            expected: p_sta.len(),
            actual: composition.len(),
        });
    }
    let p_opt = composition
        .fractions()
        .into_iter()
        .map(|q| q * (1.0 - STATIC_FRACTION))
        .collect();
    AllocationPlan::new(p_sta.to_vec(), p_opt)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSpace {
    num_slices: usize,
    schedulers: Vec<SchedulerKind>,
    compositions: Vec<Composition>,
}

/// Enumerates every composition of the dynamic pool times every scheduler.
pub fn enumerate_actions(num_slices: usize, schedulers: &[SchedulerKind]) -> Result<ActionSpace> {
    if num_slices == 0 {
        return Err(Error::validation("action space needs at least one slice"));
    }
    let mut schedulers = schedulers.to_vec();
    schedulers.sort();
    schedulers.dedup();
    if schedulers.is_empty() {
        return Err(Error::validation("action space needs at least one scheduler"));
    }
    let mut compositions = Vec::new();
    let mut current = Vec::with_capacity(num_slices);
    fill_compositions(num_slices, GRID_STEPS, &mut current, &mut compositions);
    Ok(ActionSpace {
        num_slices,
        schedulers,
        compositions,
    })
}

// Depth-first in ascending order yields lexicographic order.
fn fill_compositions(slots: usize, remaining: u8, current: &mut Vec<u8>, out: &mut Vec<Composition>) {
    if slots == 1 {
        current.push(remaining);
        out.push(Composition(current.clone()));
        current.pop();
        return;
    }
    for t in 0..=remaining {
        current.push(t);
        fill_compositions(slots - 1, remaining - t, current, out);
        current.pop();
    }
}

impl ActionSpace {
    pub fn len(&self) -> usize {
        self.compositions.len() * self.schedulers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_slices(&self) -> usize {
        self.num_slices
    }

    pub fn schedulers(&self) -> &[SchedulerKind] {
        &self.schedulers
    }

    pub fn compositions(&self) -> &[Composition] {
        &self.compositions
    }

    pub fn action(&self, id: usize) -> Result<Action> {
        if id >= self.len() {
            return Err(Error::OutOfRange {
                what: "action id",
                value: id.to_string(),
                range: format!("[0, {})", self.len()),
            });
        }
        let n = self.schedulers.len();
        Ok(Action {
            id,
            composition: self.compositions[id / n].clone(),
            scheduler: self.schedulers[id % n],
        })
    }

    pub fn id_of(&self, composition: &Composition, scheduler: SchedulerKind) -> Result<usize> {
        let c = self
            .compositions
            .binary_search(composition)
            .map_err(|_| Error::validation(format!("composition {:?} not in action space", composition.tenths())))?;
        let s = self
            .schedulers
            .iter()
            .position(|&k| k == scheduler)
            .ok_or_else(|| Error::validation(format!("scheduler {scheduler} not in action space")))?;
        Ok(c * self.schedulers.len() + s)
    }

    pub fn iter(&self) -> impl Iterator<Item = Action> + '_ {
        (0..self.len()).map(|id| self.action(id).expect("id in range"))
    }

    /// Canonical table as CSV: `id,tenths,scheduler` with tenths joined by `;`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["id", "tenths", "scheduler"])?;
        for a in self.iter() {
            let tenths: Vec<String> = a.composition.tenths().iter().map(u8::to_string).collect();
            w.write_record([a.id.to_string(), tenths.join(";"), a.scheduler.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // C(n, k) with small integers.
    fn binomial(n: u64, k: u64) -> u64 {
        (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
    }

    // Independent brute force: every vector in {0..10}^J summing to 10.
    fn brute_force_count(j: usize) -> usize {
        (0..11usize.pow(j as u32))
            .filter(|&code| {
                let mut c = code;
                let mut sum = 0;
                for _ in 0..j {
                    sum += c % 11;
                    c /= 11;
                }
                sum == 10
            })
            .count()
    }

    #[test]
    fn action_counts() {
        assert_eq!(enumerate_actions(3, &SchedulerKind::ALL).unwrap().len(), 198);
        assert_eq!(enumerate_actions(2, &SchedulerKind::ALL).unwrap().len(), 33);
        let one = enumerate_actions(1, &SchedulerKind::ALL).unwrap();
        assert_eq!(one.len(), 3);
        assert!(one.iter().all(|a| a.composition.tenths() == [10]));
        for j in 1..=5 {
            let space = enumerate_actions(j, &SchedulerKind::ALL).unwrap();
            let closed = binomial(j as u64 + 9, j as u64 - 1) as usize * 3;
            assert_eq!(space.len(), closed, "J={j}");
            assert_eq!(space.compositions().len(), brute_force_count(j), "J={j}");
        }
        assert!(enumerate_actions(0, &SchedulerKind::ALL).is_err());
        assert!(enumerate_actions(3, &[]).is_err());
    }

    #[test]
    fn canonical_order() {
        let space = enumerate_actions(3, &SchedulerKind::ALL).unwrap();
        let first = space.action(0).unwrap();
        assert_eq!(first.composition.tenths(), [0, 0, 10]);
        assert_eq!(first.scheduler, SchedulerKind::RoundRobin);
        assert_eq!(space.action(1).unwrap().scheduler, SchedulerKind::ProportionalFair);
        let last = space.action(197).unwrap();
        assert_eq!(last.composition.tenths(), [10, 0, 0]);
        assert_eq!(last.scheduler, SchedulerKind::BestCqi);
        assert!(space.action(198).is_err());
        for w in space.compositions().windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn id_round_trip() {
        let space = enumerate_actions(3, &SchedulerKind::ALL).unwrap();
        for id in 0..space.len() {
            let a = space.action(id).unwrap();
            assert_eq!(space.id_of(&a.composition, a.scheduler).unwrap(), id);
        }
    }

    #[test]
    fn static_shares() {
        let p = static_share(&[0.3333, 0.4000, 0.2667]).unwrap();
        for (a, b) in p.iter().zip([0.1667, 0.2000, 0.1333]) {
            assert!((a - b).abs() < 1e-4);
        }
        assert_eq!(static_share(&[1.0]).unwrap(), vec![0.5]);
        assert_eq!(static_share(&[0.0, 1.0]).unwrap(), vec![0.0, 0.5]);
        assert!(static_share(&[0.5, 0.6]).is_err());
    }

    #[test]
    fn allocation_examples() {
        let p_sta = [0.5 / 3.0, 0.2, 0.4 / 3.0];
        let plan = compose_allocation(&Composition::from_tenths(vec![10, 0, 0]).unwrap(), &p_sta).unwrap();
        assert!((plan.p_final()[0] - 0.6667).abs() < 1e-4);
        assert!((plan.max_allocation(0) - 0.6667).abs() < 1e-4);
        let plan = compose_allocation(&Composition::from_tenths(vec![0, 10, 0]).unwrap(), &p_sta).unwrap();
        assert!((plan.p_final()[1] - 0.7).abs() < 1e-12);
        let plan = compose_allocation(&Composition::from_tenths(vec![4, 3, 3]).unwrap(), &p_sta).unwrap();
        for (a, b) in plan.p_final().iter().zip([0.3667, 0.35, 0.2833]) {
            assert!((a - b).abs() < 1e-4);
        }
        assert!(compose_allocation(&Composition::from_tenths(vec![10]).unwrap(), &p_sta).is_err());
    }

    #[test]
    fn composition_rejects_bad_sums() {
        assert!(Composition::from_tenths(vec![5, 4]).is_err());
        assert!(Composition::from_tenths(vec![]).is_err());
    }

    #[test]
    fn csv_table() {
        let space = enumerate_actions(2, &SchedulerKind::ALL).unwrap();
        let mut buf = Vec::new();
        space.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 34);
        assert_eq!(lines[0], "id,tenths,scheduler");
        assert_eq!(lines[1], "0,0;10,RR");
    }

    proptest! {
        #[test]
        fn every_plan_is_bounded(j in 1usize..=4, raw in proptest::collection::vec(0.0f64..1.0, 4)) {
            let raw = &raw[..j];
            let total: f64 = raw.iter().sum::<f64>() + 1e-3 * j as f64;
            let weights: Vec<f64> = raw.iter().map(|w| (w + 1e-3) / total).collect();
            let p_sta = static_share(&weights).unwrap();
            let space = enumerate_actions(j, &SchedulerKind::ALL).unwrap();
            for c in space.compositions() {
                prop_assert_eq!(c.tenths().iter().map(|&t| t as u32).sum::<u32>(), 10);
                let plan = compose_allocation(c, &p_sta).unwrap();
                prop_assert!((plan.p_final().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                for k in 0..j {
                    prop_assert!(plan.p_final()[k] >= p_sta[k]);
                    prop_assert!(plan.p_final()[k] <= p_sta[k] + 0.5 + 1e-12);
                    prop_assert!(plan.p_opt()[k] >= 0.0 && plan.p_opt()[k] <= 0.5);
                }
            }
        }
    }
}
