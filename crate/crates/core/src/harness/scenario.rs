//! Experiment definitions: slices, their traffic and SLAs, and simulator
//! settings. Presets cover the five standard load/SLA conditions.

use serde::{Deserialize, Serialize};

use crate::agent::{Hyperparams, NetworkConfig};
use crate::error::{Error, Result};
use crate::policy::{
    parse_kpi, weights_from_priorities, A1Policy, OptimizationKpi, SlaSpec, SliceClass, SlicePolicy,
};
use crate::ransim::{ArrivalModel, SimConfig, TrafficSource, UeConfig};

pub const PRESETS: [&str; 5] = ["low_traffic", "normal", "congestion", "stressed", "insufficient_resources"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<SliceClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimization_kpi: Option<OptimizationKpi>,
    /// Aggregate offered load of the slice, split evenly over its UEs.
    pub rate_bps: u64,
    pub ues: usize,
    pub cqi: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cqi_min: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cqi_max: Option<u8>,
    /// Per-UE channel overrides; when present there is one entry per UE.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ue_channels: Vec<UeChannel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buffer_bytes: Option<u64>,
    #[serde(default)]
    pub arrival: ArrivalModel,
    #[serde(default)]
    pub outage_kpis: Vec<String>,
    #[serde(default)]
    pub soft_kpis: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reliability: Option<f64>,
}

/// Starting CQI of one UE and the bounds of its random walk (both default
/// to the starting value).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeChannel {
    pub cqi: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cqi_min: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cqi_max: Option<u8>,
}

impl UeChannel {
    pub fn new(cqi: u8, cqi_min: u8, cqi_max: u8) -> Self {
        UeChannel {
            cqi,
            cqi_min: Some(cqi_min),
            cqi_max: Some(cqi_max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    /// Frames run under the default control before the initial snapshot.
    pub warmup_frames: usize,
    /// Throughput smoothing window, frames.
    pub kpm_window: usize,
    /// Consecutive outage frames before an alarm is considered.
    pub alarm_window: usize,
    /// Frames of the full-allocation probe.
    pub probe_frames: usize,
    /// Probe frames at the end that must all violate.
    pub probe_tail: usize,
    pub eval_frames: usize,
    /// Added to the seed for evaluation runs.
    pub eval_seed_offset: u64,
    pub demand_slack: f64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            warmup_frames: 20,
            kpm_window: 10,
            alarm_window: 50,
            probe_frames: 200,
            probe_tail: 10,
            eval_frames: 500,
            eval_seed_offset: 10_000,
            demand_slack: crate::reward::DEFAULT_DEMAND_SLACK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub slices: Vec<SliceSpec>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub harness: HarnessConfig,
    #[serde(default)]
    pub hyperparams: Hyperparams,
    #[serde(default)]
    pub network: NetworkConfig,
}

fn default_seed() -> u64 {
    1
}

/// A validated scenario with its derived policy and UE roster.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    spec: ScenarioSpec,
    policy: A1Policy,
    roster: Vec<UeConfig>,
}

impl Scenario {
    pub fn new(spec: ScenarioSpec) -> Result<Self> {
        if spec.slices.is_empty() {
            return Err(Error::validation(format!("scenario `{}` has no slices", spec.name)));
        }
        spec.sim.validate()?;
        spec.hyperparams.validate()?;
        let h = &spec.harness;
        if h.kpm_window == 0 || h.alarm_window == 0 || h.probe_tail == 0 || h.probe_tail > h.probe_frames {
            return Err(Error::validation(
                "harness: windows must be positive and probe_tail <= probe_frames",
            ));
        }
        let policy = build_policy(&spec.slices)?;
        let mut roster = Vec::new();
        for (j, s) in spec.slices.iter().enumerate() {
            if s.ues == 0 {
                return Err(Error::validation(format!("slice `{}` has no UEs", s.name)));
            }
            if !s.ue_channels.is_empty() && s.ue_channels.len() != s.ues {
                return Err(Error::validation(format!(
                    "slice `{}`: {} channel entries for {} UEs",
                    s.name,
                    s.ue_channels.len(),
                    s.ues
                )));
            }
            let base = s.rate_bps / s.ues as u64;
            let extra = (s.rate_bps % s.ues as u64) as usize;
            for i in 0..s.ues {
                let rate = base + u64::from(i < extra);
                let ch = s.ue_channels.get(i).copied().unwrap_or(UeChannel {
                    cqi: s.cqi,
                    cqi_min: s.cqi_min,
                    cqi_max: s.cqi_max,
                });
                let mut ue = UeConfig::new(
                    j,
                    ch.cqi,
                    TrafficSource {
                        rate_bps: rate,
                        arrival: s.arrival,
                    },
                )
                .with_cqi_range(ch.cqi_min.unwrap_or(ch.cqi), ch.cqi_max.unwrap_or(ch.cqi));
                ue.buffer_capacity = s.buffer_bytes;
                roster.push(ue);
            }
        }
        Ok(Scenario { spec, policy, roster })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        Scenario::new(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.spec).expect("scenario is serializable")
    }

    pub fn preset(name: &str) -> Result<Self> {
        Scenario::new(preset_spec(name)?)
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn seed(&self) -> u64 {
        self.spec.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.spec.seed = seed;
        self
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    /// Mutable access for overrides; re-validated by [`Scenario::new`].
    pub fn into_spec(self) -> ScenarioSpec {
        self.spec
    }

    pub fn policy(&self) -> &A1Policy {
        &self.policy
    }

    pub fn roster(&self) -> &[UeConfig] {
        &self.roster
    }

    pub fn num_slices(&self) -> usize {
        self.spec.slices.len()
    }

    pub fn sim_config(&self) -> &SimConfig {
        &self.spec.sim
    }

    pub fn harness(&self) -> &HarnessConfig {
        &self.spec.harness
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.spec.hyperparams
    }

    pub fn network(&self) -> &NetworkConfig {
        &self.spec.network
    }
}

fn build_policy(slices: &[SliceSpec]) -> Result<A1Policy> {
    let given = slices.iter().filter(|s| s.weight.is_some()).count();
    let weights = if given == slices.len() {
        slices.iter().map(|s| s.weight.unwrap()).collect()
    } else if given == 0 {
        let pr: Option<Vec<u32>> = slices.iter().map(|s| s.priority).collect();
        let pr = pr.ok_or_else(|| Error::validation("every slice needs a weight, or every slice needs a priority"))?;
        weights_from_priorities(&pr)?
    } else {
        return Err(Error::validation("weights must be given for all slices or for none"));
    };
    let mut out = Vec::with_capacity(slices.len());
    for (s, w) in slices.iter().zip(weights) {
        let class = s.class.unwrap_or_else(|| SliceClass::from_name(&s.name));
        let parse = |texts: &[String]| -> Result<Vec<_>> {
            let mut v = Vec::new();
            for t in texts {
                match parse_kpi(&s.name, t)? {
                    Some(p) => v.push(p),
                    None => {
                        return Err(Error::UnsupportedKpi {
                            slice: s.name.clone(),
                            kpi: t.clone(),
                        })
                    }
                }
            }
            Ok(v)
        };
        let outage = parse(&s.outage_kpis)?;
        let soft = parse(&s.soft_kpis)?;
        let sla = match s.reliability {
            Some(r) => Some(SlaSpec::new(outage, soft, r)?),
            None if outage.is_empty() && soft.is_empty() => None,
            None => {
                return Err(Error::validation(format!(
                    "slice `{}`: KPIs need a reliability",
                    s.name
                )))
            }
        };
        out.push(SlicePolicy {
            name: s.name.clone(),
            class,
            weight: w,
            priority: s.priority,
            sla,
            optimization_kpi: s.optimization_kpi.unwrap_or(OptimizationKpi::default_for(class)),
            ignored_kpis: Vec::new(),
        });
    }
    A1Policy::new(out)
}

/// Offered loads and eMBB throughput bounds per preset:
/// (eMBB bit/s, URLLC bit/s, MTC bit/s, eMBB min Mbit/s, eMBB max Mbit/s).
pub fn preset_table(name: &str) -> Option<(u64, u64, u64, u32, u32)> {
    Some(match name {
        "low_traffic" => (50_000, 1_000_000, 2_000_000, 10, 15),
        "normal" => (70_000_000, 1_000_000, 2_000_000, 10, 15),
        "congestion" => (100_000_000, 1_000_000, 100_000_000, 10, 15),
        "stressed" => (100_000_000, 1_000_000, 100_000_000, 20, 25),
        "insufficient_resources" => (100_000_000, 2_000_000, 100_000_000, 20, 25),
        _ => return None,
    })
}

pub fn preset_spec(name: &str) -> Result<ScenarioSpec> {
    let (embb, urllc, mtc, lo, hi) = preset_table(name).ok_or_else(|| {
        Error::validation(format!("unknown scenario `{name}`; expected one of {}", PRESETS.join(", ")))
    })?;
    let slices = vec![
        SliceSpec {
            name: "eMBB".into(),
            class: Some(SliceClass::Embb),
            priority: Some(2),
            weight: None,
            optimization_kpi: None,
            rate_bps: embb,
            ues: 5,
            cqi: 15,
            cqi_min: None,
            cqi_max: None,
            ue_channels: vec![],
            buffer_bytes: None,
            arrival: ArrivalModel::Cbr,
            outage_kpis: vec![format!("throughput per slice < {lo}mbps")],
            soft_kpis: vec![format!("throughput per slice > {hi}mbps")],
            reliability: Some(0.9999),
        },
        SliceSpec {
            name: "URLLC".into(),
            class: Some(SliceClass::Urllc),
            priority: Some(1),
            weight: None,
            optimization_kpi: None,
            rate_bps: urllc,
            ues: 5,
            cqi: 4,
            cqi_min: None,
            cqi_max: None,
            // Three cell-edge UEs and two slightly better placed ones.
            ue_channels: vec![
                UeChannel::new(4, 4, 4),
                UeChannel::new(4, 4, 4),
                UeChannel::new(4, 4, 4),
                UeChannel::new(5, 5, 5),
                UeChannel::new(5, 5, 5),
            ],
            buffer_bytes: Some(20_000),
            arrival: ArrivalModel::Cbr,
            outage_kpis: vec!["buffer_occupancy per UE > 3%".into()],
            soft_kpis: vec![],
            reliability: Some(0.99999),
        },
        SliceSpec {
            name: "MTC".into(),
            class: Some(SliceClass::Mtc),
            priority: Some(3),
            weight: None,
            optimization_kpi: None,
            rate_bps: mtc,
            ues: 10,
            cqi: 12,
            cqi_min: Some(10),
            cqi_max: Some(13),
            ue_channels: vec![],
            buffer_bytes: None,
            arrival: ArrivalModel::Cbr,
            outage_kpis: vec![],
            soft_kpis: vec![],
            reliability: None,
        },
    ];
    Ok(ScenarioSpec {
        name: name.to_string(),
        seed: default_seed(),
        slices,
        sim: SimConfig::default(),
        harness: HarnessConfig::default(),
        hyperparams: Hyperparams::default(),
        network: NetworkConfig::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{Comparator, Metric, Scope};

    #[test]
    fn presets_build() {
        for name in PRESETS {
            let s = Scenario::preset(name).unwrap();
            assert_eq!(s.roster().len(), 20);
            assert_eq!(s.num_slices(), 3);
            let w = s.policy().weights();
            assert!((w[0] - 1.0 / 3.0).abs() < 1e-12 && (w[1] - 0.4).abs() < 1e-12);
        }
        assert!(Scenario::preset("nope").is_err());
    }

    #[test]
    fn rates_split_exactly() {
        let s = Scenario::preset("normal").unwrap();
        let urllc: u64 = s.roster().iter().filter(|u| u.slice == 1).map(|u| u.traffic.rate_bps).sum();
        assert_eq!(urllc, 1_000_000);
        let mtc: Vec<u64> = s.roster().iter().filter(|u| u.slice == 2).map(|u| u.traffic.rate_bps).collect();
        assert_eq!(mtc, vec![200_000; 10]);
    }

    #[test]
    fn json_round_trip() {
        let s = Scenario::preset("stressed").unwrap();
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        let p = &back.policy().slices()[0].outage_kpis()[0];
        assert_eq!(
            (p.metric(), p.scope(), p.comparator(), p.threshold()),
            (Metric::Throughput, Scope::PerSlice, Comparator::BelowIsViolation, 20e6)
        );
    }

    #[test]
    fn bad_configs() {
        assert!(Scenario::from_json("{").is_err());
        let mut spec = preset_spec("normal").unwrap();
        spec.slices[0].outage_kpis = vec!["latency per UE > 5ms".into()];
        assert!(matches!(Scenario::new(spec), Err(Error::UnsupportedKpi { .. })));
        let mut spec = preset_spec("normal").unwrap();
        spec.slices[1].weight = Some(0.5);
        assert!(Scenario::new(spec).is_err());
    }
}
