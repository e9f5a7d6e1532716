//! SLA-aware reward: resource term, violation rates, outage and soft flags.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::action_space::SchedulerKind;
use crate::error::{Error, Result};
use crate::policy::{
    evaluate_predicate, A1Policy, KpiPredicate, Metric, MetricSnapshot, OptimizationKpi, Scope, UeSample, Violation,
    WEIGHT_SUM_TOLERANCE,
};
use crate::telemetry::KpmRecord;

/// Relative cost of each scheduler; the reward adds `1 / cost`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub rr: f64,
    pub pf: f64,
    pub bcqi: f64,
}

impl Default for CostTable {
    fn default() -> Self {
        CostTable {
            rr: 1.0,
            pf: 2.0,
            bcqi: 2.0,
        }
    }
}

impl CostTable {
    pub fn cost(&self, sch: SchedulerKind) -> f64 {
        match sch {
            SchedulerKind::RoundRobin => self.rr,
            SchedulerKind::ProportionalFair => self.pf,
            SchedulerKind::BestCqi => self.bcqi,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceRewardSpec {
    pub name: String,
    pub weight: f64,
    pub optimization_kpi: OptimizationKpi,
    pub outage: Vec<KpiPredicate>,
    pub soft: Vec<KpiPredicate>,
    pub reliability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardSpec {
    pub slices: Vec<SliceRewardSpec>,
    pub max_cell_rate_bps: f64,
    pub cost: CostTable,
    /// Lower throughput bounds are capped at `(1 - slack) * offered load`.
    pub demand_slack: f64,
}

pub const DEFAULT_DEMAND_SLACK: f64 = 0.1;

impl RewardSpec {
    pub fn new(slices: Vec<SliceRewardSpec>, max_cell_rate_bps: f64) -> Result<Self> {
        let spec = RewardSpec {
            slices,
            max_cell_rate_bps,
            cost: CostTable::default(),
            demand_slack: DEFAULT_DEMAND_SLACK,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_policy(policy: &A1Policy, max_cell_rate_bps: f64) -> Result<Self> {
        let slices = policy
            .slices()
            .iter()
            .map(|s| SliceRewardSpec {
                name: s.name.clone(),
                weight: s.weight,
                optimization_kpi: s.optimization_kpi,
                outage: s.outage_kpis().to_vec(),
                soft: s.soft_kpis().to_vec(),
                reliability: s.sla.as_ref().map(|sla| sla.reliability),
            })
            .collect();
        RewardSpec::new(slices, max_cell_rate_bps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slices.is_empty() {
            return Err(Error::validation("reward spec needs at least one slice"));
        }
        let sum: f64 = self.slices.iter().map(|s| s.weight).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::validation(format!("reward weights sum to {sum}, expected 1")));
        }
        for s in &self.slices {
            if let Some(r) = s.reliability {
                if !(r > 0.0 && r < 1.0) {
                    return Err(Error::validation(format!("slice {}: reliability {r} outside (0, 1)", s.name)));
                }
            } else if !s.outage.is_empty() || !s.soft.is_empty() {
                return Err(Error::validation(format!("slice {}: KPIs without a reliability", s.name)));
            }
        }
        if !(self.max_cell_rate_bps > 0.0) {
            return Err(Error::validation("max cell rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.demand_slack) {
            return Err(Error::validation("demand slack must lie in [0, 1)"));
        }
        for (name, c) in [("RR", self.cost.rr), ("PF", self.cost.pf), ("BCQI", self.cost.bcqi)] {
            if !(c >= 1.0) {
                return Err(Error::validation(format!("cost of {name} must be at least 1")));
            }
        }
        Ok(())
    }

    pub fn num_slices(&self) -> usize {
        self.slices.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.weight).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    Normal,
    SoftTerminal,
    OutageTerminal,
}

impl RewardKind {
    pub fn label(self) -> &'static str {
        match self {
            RewardKind::Normal => "normal",
            RewardKind::SoftTerminal => "soft_terminal",
            RewardKind::OutageTerminal => "outage_terminal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardOutcome {
    pub value: f64,
    pub terminal: bool,
    pub kind: RewardKind,
    pub phi: Vec<bool>,
    pub rho: Vec<bool>,
    /// Per slice, one rate per outage predicate.
    pub vrsla_outage: Vec<Vec<f64>>,
    pub vrsla_soft: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub inv_cost: f64,
    pub r_opt: f64,
}

fn snapshot(spec: &RewardSpec, j: usize, p: &KpiPredicate, record: &KpmRecord) -> MetricSnapshot {
    let scale = 1.0 - spec.demand_slack;
    match p.scope() {
        Scope::PerUe => MetricSnapshot::PerUe(
            record
                .slice_ues(j)
                .map(|u| match p.metric() {
                    Metric::Throughput => UeSample {
                        ue: u.ue,
                        value: u.thr_bps,
                        demand: Some(u.offered_bps * scale),
                    },
                    Metric::BufferOccupancy => UeSample {
                        ue: u.ue,
                        value: u.bfs,
                        demand: None,
                    },
                    Metric::DroppedBytes => UeSample {
                        ue: u.ue,
                        value: u.tdp as f64,
                        demand: None,
                    },
                })
                .collect(),
        ),
        Scope::PerSlice => {
            let a = &record.slices[j];
            match p.metric() {
                Metric::Throughput => MetricSnapshot::PerSlice {
                    value: a.thr_bps,
                    demand: Some(a.offered_bps * scale),
                },
                Metric::BufferOccupancy => MetricSnapshot::PerSlice {
                    value: a.bfs,
                    demand: None,
                },
                Metric::DroppedBytes => MetricSnapshot::PerSlice {
                    value: a.tdp as f64,
                    demand: None,
                },
            }
        }
    }
}

/// Fraction of slice `j`'s UEs violating `p` (0 or 1 for slice-level
/// predicates; 0 for an empty slice).
pub fn vrsla(spec: &RewardSpec, j: usize, p: &KpiPredicate, record: &KpmRecord) -> Result<f64> {
    check_dims(spec, record)?;
    Ok(match evaluate_predicate(p, &snapshot(spec, j, p, record))? {
        Violation::Ues(ues) => {
            let n = record.slices[j].num_ues;
            if n == 0 {
                0.0
            } else {
                ues.len() as f64 / n as f64
            }
        }
        Violation::Slice(v) => f64::from(u8::from(v)),
    })
}

fn check_dims(spec: &RewardSpec, record: &KpmRecord) -> Result<()> {
    if spec.num_slices() != record.num_slices() {
        return Err(Error::Dimension {
            expected: spec.num_slices(),
            actual: record.num_slices(),
        });
    }
    Ok(())
}

fn rates(spec: &RewardSpec, j: usize, preds: &[KpiPredicate], record: &KpmRecord) -> Result<Vec<f64>> {
    preds.iter().map(|p| vrsla(spec, j, p, record)).collect()
}

fn flag(reliability: Option<f64>, rates: &[f64]) -> bool {
    match reliability {
        Some(r) => rates.iter().any(|&v| v > 1.0 - r),
        None => false,
    }
}

/// φ_j: some outage predicate's violation rate exceeds `1 - reliability`.
pub fn outage_indicator(spec: &RewardSpec, j: usize, record: &KpmRecord) -> Result<bool> {
    let s = &spec.slices[j];
    Ok(flag(s.reliability, &rates(spec, j, &s.outage, record)?))
}

/// ρ_j: the same rule over the soft predicates.
pub fn soft_indicator(spec: &RewardSpec, j: usize, record: &KpmRecord) -> Result<bool> {
    let s = &spec.slices[j];
    Ok(flag(s.reliability, &rates(spec, j, &s.soft, record)?))
}

/// h_j in [0, 1].
pub fn optimization_component(spec: &RewardSpec, j: usize, record: &KpmRecord) -> f64 {
    let ues = record.slice_ues(j);
    match spec.slices[j].optimization_kpi {
        OptimizationKpi::MaximizeMeanThroughput => {
            let (mut sum, mut n) = (0.0, 0usize);
            for u in ues {
                sum += (u.thr_bps / spec.max_cell_rate_bps).clamp(0.0, 1.0);
                n += 1;
            }
            if n == 0 {
                0.0
            } else {
                sum / n as f64
            }
        }
        OptimizationKpi::MinimizeMaxBuffer => {
            let max = ues.map(|u| u.bfs).fold(0.0, f64::max);
            (-max).exp()
        }
    }
}

pub fn r_opt(record: &KpmRecord, spec: &RewardSpec, sch: SchedulerKind) -> f64 {
    let h: f64 = (0..spec.num_slices())
        .map(|j| spec.slices[j].weight * optimization_component(spec, j, record))
        .sum();
    h + 1.0 / spec.cost.cost(sch)
}

pub fn compute_reward(record: &KpmRecord, spec: &RewardSpec, sch: SchedulerKind) -> Result<RewardOutcome> {
    check_dims(spec, record)?;
    let j_count = spec.num_slices();
    let mut vrsla_outage = Vec::with_capacity(j_count);
    let mut vrsla_soft = Vec::with_capacity(j_count);
    let mut phi = Vec::with_capacity(j_count);
    let mut rho = Vec::with_capacity(j_count);
    let mut h = Vec::with_capacity(j_count);
    for (j, s) in spec.slices.iter().enumerate() {
        let out = rates(spec, j, &s.outage, record)?;
        let soft = rates(spec, j, &s.soft, record)?;
        phi.push(flag(s.reliability, &out));
        rho.push(flag(s.reliability, &soft));
        vrsla_outage.push(out);
        vrsla_soft.push(soft);
        h.push(optimization_component(spec, j, record));
    }
    let inv_cost = 1.0 / spec.cost.cost(sch);
    let r_opt = spec.slices.iter().zip(&h).map(|(s, h)| s.weight * h).sum::<f64>() + inv_cost;
    let (kind, value) = if phi.iter().any(|&f| f) {
        let v = -spec
            .slices
            .iter()
            .zip(&phi)
            .filter(|(_, &f)| f)
            .map(|(s, _)| s.weight)
            .sum::<f64>();
        (RewardKind::OutageTerminal, v)
    } else if rho.iter().any(|&f| f) {
        (RewardKind::SoftTerminal, 0.0)
    } else {
        (RewardKind::Normal, r_opt)
    };
    Ok(RewardOutcome {
        value,
        terminal: kind != RewardKind::Normal,
        kind,
        phi,
        rho,
        vrsla_outage,
        vrsla_soft,
        h,
        inv_cost,
        r_opt,
    })
}

fn join<T: ToString>(v: impl IntoIterator<Item = T>) -> String {
    v.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

impl RewardOutcome {
    pub fn write_csv_header<W: Write>(wtr: &mut csv::Writer<W>) -> Result<()> {
        wtr.write_record(["step", "value", "kind", "phi", "rho", "h", "cost"])?;
        Ok(())
    }

    /// Vectors are `;`-joined.
    pub fn write_csv<W: Write>(&self, step: u64, wtr: &mut csv::Writer<W>) -> Result<()> {
        wtr.write_record([
            step.to_string(),
            format!("{:.6}", self.value),
            self.kind.label().to_string(),
            join(self.phi.iter().map(|&f| u8::from(f))),
            join(self.rho.iter().map(|&f| u8::from(f))),
            join(self.h.iter().map(|x| format!("{x:.6}"))),
            format!("{}", 1.0 / self.inv_cost),
        ])?;
        Ok(())
    }
}
