//! Controllers, training and evaluation runs.

use std::time::Instant;

use crate::action_space::{AllocationPlan, SchedulerKind};
use crate::agent::{argmax, train, Environment, QFunction, StepLog};
use crate::agent::QNetwork;
use crate::error::{Error, Result};

use super::alarm::AlarmEvent;
use super::env::{RewardMode, SlicingEnv, StepRecord};
use super::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControllerKind {
    Rslaq,
    Opt,
    Rr,
    Pf,
    Bcqi,
}

impl ControllerKind {
    /// Report order.
    pub const ALL: [ControllerKind; 5] = [
        ControllerKind::Rslaq,
        ControllerKind::Opt,
        ControllerKind::Rr,
        ControllerKind::Pf,
        ControllerKind::Bcqi,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ControllerKind::Rslaq => "rslaq",
            ControllerKind::Opt => "opt",
            ControllerKind::Rr => "rr",
            ControllerKind::Pf => "pf",
            ControllerKind::Bcqi => "bcqi",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        ControllerKind::ALL.into_iter().find(|k| k.label() == s)
    }

    pub fn is_learned(self) -> bool {
        matches!(self, ControllerKind::Rslaq | ControllerKind::Opt)
    }

    pub fn reward_mode(self) -> RewardMode {
        match self {
            ControllerKind::Opt => RewardMode::OptimizationOnly,
            _ => RewardMode::SlaAware,
        }
    }

    fn scheduler(self) -> Option<SchedulerKind> {
        match self {
            ControllerKind::Rr => Some(SchedulerKind::RoundRobin),
            ControllerKind::Pf => Some(SchedulerKind::ProportionalFair),
            ControllerKind::Bcqi => Some(SchedulerKind::BestCqi),
            _ => None,
        }
    }
}

/// Something that picks the next frame's plan.
#[derive(Debug, Clone)]
pub enum Controller {
    /// Greedy over a trained network.
    Agent { kind: ControllerKind, net: QNetwork },
    /// `p_final` equal to the slice weights with a fixed scheduler.
    Static { kind: ControllerKind },
}

impl Controller {
    pub fn agent(kind: ControllerKind, net: QNetwork) -> Result<Self> {
        if !kind.is_learned() {
            return Err(Error::validation(format!("{} is not a learned controller", kind.label())));
        }
        Ok(Controller::Agent { kind, net })
    }

    pub fn fixed(kind: ControllerKind) -> Result<Self> {
        if kind.is_learned() {
            return Err(Error::validation(format!("{} needs a checkpoint", kind.label())));
        }
        Ok(Controller::Static { kind })
    }

    pub fn kind(&self) -> ControllerKind {
        match self {
            Controller::Agent { kind, .. } | Controller::Static { kind } => *kind,
        }
    }

    fn decide(
        &self,
        env: &SlicingEnv,
        state: &crate::telemetry::NetworkState,
        weights: &[f64],
    ) -> Result<(AllocationPlan, SchedulerKind)> {
        match self {
            Controller::Agent { net, .. } => env.plan_for(argmax(&net.q_values(state)?)),
            Controller::Static { kind } => Ok((
                AllocationPlan::weighted(weights)?,
                kind.scheduler().expect("static controllers carry a scheduler"),
            )),
        }
    }
}

/// Seeds of the network initialisation and of the learning loop, derived
/// from the scenario seed.
pub fn agent_seeds(seed: u64) -> (u64, u64) {
    (seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xA5A5, seed.wrapping_add(1))
}

#[derive(Debug, Clone)]
pub struct TrainedAgent {
    pub scenario: String,
    pub kind: ControllerKind,
    pub net: QNetwork,
    pub log: Vec<StepLog>,
    pub alarms: Vec<AlarmEvent>,
    pub history: Vec<StepRecord>,
    pub wall_clock_s: f64,
}

impl TrainedAgent {
    pub fn rewards(&self) -> Vec<f64> {
        self.log.iter().map(|l| l.reward).collect()
    }

    /// Mean reward over the last `n` steps (all steps if fewer).
    pub fn tail_mean(&self, n: usize) -> Option<f64> {
        let r = self.rewards();
        let tail = &r[r.len().saturating_sub(n)..];
        (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
    }

    pub fn controller(&self) -> Controller {
        Controller::Agent {
            kind: self.kind,
            net: self.net.clone(),
        }
    }
}

/// Trains RSLAQ (`kind = Rslaq`) or the SLA-unaware optimiser (`kind = Opt`)
/// on the scenario's training seed.
pub fn run_training(scenario: &Scenario, kind: ControllerKind) -> Result<TrainedAgent> {
    if !kind.is_learned() {
        return Err(Error::validation(format!("{} is not trained", kind.label())));
    }
    let start = Instant::now();
    let mut env = SlicingEnv::new(scenario, scenario.seed(), kind.reward_mode())?;
    let (init_seed, loop_seed) = agent_seeds(scenario.seed());
    let net = QNetwork::for_slices(
        scenario.num_slices(),
        env.num_actions(),
        scenario.network().clone(),
        init_seed,
    )?;
    let out = train(&mut env, net, scenario.hyperparams(), loop_seed)?;
    Ok(TrainedAgent {
        scenario: scenario.name().to_string(),
        kind,
        net: out.online,
        log: out.log,
        alarms: env.alarms().to_vec(),
        history: env.history().to_vec(),
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceReport {
    pub name: String,
    pub has_sla: bool,
    pub mean_thr_bps: f64,
    pub mean_bfs: f64,
    pub mean_h: f64,
    pub outage_frames: usize,
    pub soft_frames: usize,
    /// `1 - outage_frames / frames`; `None` for an empty run.
    pub reliability: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub controller: ControllerKind,
    pub scenario: String,
    pub seed: u64,
    pub frames: usize,
    pub slices: Vec<SliceReport>,
    pub mean_reward: Option<f64>,
    pub trace: Vec<StepRecord>,
    pub alarms: Vec<AlarmEvent>,
    pub wall_clock_s: f64,
}

/// Runs `frames` frames of `controller` on the scenario's evaluation seed
/// without resets.
pub fn run_eval(scenario: &Scenario, controller: &Controller, frames: usize) -> Result<RunReport> {
    let start = Instant::now();
    let seed = scenario.seed().wrapping_add(scenario.harness().eval_seed_offset);
    let mut env = SlicingEnv::new(scenario, seed, RewardMode::SlaAware)?;
    let weights = scenario.policy().weights();
    let mut state = env.reset()?;
    for _ in 0..frames {
        let (plan, sch) = controller.decide(&env, &state, &weights)?;
        state = env.step_plan(&plan, sch)?.0;
    }
    Ok(summarize(
        controller.kind(),
        scenario,
        seed,
        env.history().to_vec(),
        env.alarms().to_vec(),
        start.elapsed().as_secs_f64(),
    ))
}

fn summarize(
    controller: ControllerKind,
    scenario: &Scenario,
    seed: u64,
    trace: Vec<StepRecord>,
    alarms: Vec<AlarmEvent>,
    wall_clock_s: f64,
) -> RunReport {
    let n = trace.len();
    let mean = |f: &dyn Fn(&StepRecord) -> f64| {
        if n == 0 {
            0.0
        } else {
            trace.iter().map(f).sum::<f64>() / n as f64
        }
    };
    let slices = scenario
        .policy()
        .slices()
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let outage_frames = trace.iter().filter(|r| r.outcome.phi[j]).count();
            SliceReport {
                name: s.name.clone(),
                has_sla: s.sla.is_some(),
                mean_thr_bps: mean(&|r| r.kpm.slices[j].thr_bps),
                mean_bfs: mean(&|r| r.kpm.slices[j].bfs),
                mean_h: mean(&|r| r.outcome.h[j]),
                outage_frames,
                soft_frames: trace.iter().filter(|r| r.outcome.rho[j]).count(),
                reliability: (n > 0).then(|| 1.0 - outage_frames as f64 / n as f64),
            }
        })
        .collect();
    RunReport {
        controller,
        scenario: scenario.name().to_string(),
        seed,
        frames: n,
        slices,
        mean_reward: (n > 0).then(|| mean(&|r| r.reward)),
        trace,
        alarms,
        wall_clock_s,
    }
}

/// Everything `compare` produces for one scenario.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub trained: Vec<TrainedAgent>,
    /// One report per controller in [`ControllerKind::ALL`] order.
    pub reports: Vec<RunReport>,
}

pub fn compare(scenario: &Scenario, frames: usize) -> Result<Comparison> {
    let mut trained = Vec::new();
    let mut reports = Vec::new();
    for kind in ControllerKind::ALL {
        let controller = if kind.is_learned() {
            let t = run_training(scenario, kind)?;
            let c = t.controller();
            trained.push(t);
            c
        } else {
            Controller::fixed(kind)?
        };
        reports.push(run_eval(scenario, &controller, frames)?);
    }
    Ok(Comparison { trained, reports })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        for k in ControllerKind::ALL {
            assert_eq!(ControllerKind::from_label(k.label()), Some(k));
        }
        assert!(ControllerKind::from_label("dqn").is_none());
        assert!(Controller::fixed(ControllerKind::Rslaq).is_err());
    }

    #[test]
    fn empty_eval_has_no_reliability() {
        let sc = Scenario::preset("low_traffic").unwrap();
        let r = run_eval(&sc, &Controller::fixed(ControllerKind::Rr).unwrap(), 0).unwrap();
        assert_eq!(r.frames, 0);
        assert!(r.slices.iter().all(|s| s.reliability.is_none()));
        assert!(r.mean_reward.is_none());
    }

    #[test]
    fn reliability_counts_outage_frames() {
        let sc = Scenario::preset("insufficient_resources").unwrap();
        let r = run_eval(&sc, &Controller::fixed(ControllerKind::Pf).unwrap(), 40).unwrap();
        for (j, s) in r.slices.iter().enumerate() {
            let k = r.trace.iter().filter(|t| t.outcome.phi[j]).count();
            assert_eq!(s.outage_frames, k);
            assert_eq!(s.reliability, Some(1.0 - k as f64 / 40.0));
        }
    }

    #[test]
    fn zero_steps_gives_untrained_agent() {
        let mut spec = Scenario::preset("normal").unwrap().into_spec();
        spec.hyperparams.total_steps = 0;
        let sc = Scenario::new(spec).unwrap();
        let t = run_training(&sc, ControllerKind::Rslaq).unwrap();
        assert!(t.log.is_empty() && t.tail_mean(50).is_none());
        let (init, _) = agent_seeds(sc.seed());
        let fresh = QNetwork::for_slices(3, 198, sc.network().clone(), init).unwrap();
        assert_eq!(t.net.parameters(), fresh.parameters());
    }
}
