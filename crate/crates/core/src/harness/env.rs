//! The slicing environment: simulator, KPM window, reward and alarms behind
//! the agent's [`Environment`] trait.

use crate::action_space::{
    compose_allocation, enumerate_actions, static_share, ActionSpace, AllocationPlan, SchedulerKind,
};
use crate::agent::{Environment, Transition};
use crate::error::{Error, Result};
use crate::ransim::{SimSnapshot, Simulator};
use crate::reward::{compute_reward, RewardKind, RewardOutcome, RewardSpec};
use crate::telemetry::{build_state, collect, max_cell_rate, max_frame_bytes, KpmRecord, KpmWindow, NetworkState, ROW_BFS};

use super::alarm::{probe_full_allocation, AlarmDetector, AlarmEvent, AlarmReason, FrameRecord};
use super::scenario::{HarnessConfig, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RewardMode {
    /// Full reward with outage and soft terminals.
    #[default]
    SlaAware,
    /// Optimisation component only; never terminal.
    OptimizationOnly,
}

/// What happened in one environment frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub action: Option<usize>,
    pub scheduler: SchedulerKind,
    pub p_final: Vec<f64>,
    /// Window-smoothed KPMs the reward was computed on.
    pub kpm: KpmRecord,
    pub outcome: RewardOutcome,
    pub reward: f64,
    pub terminal: bool,
}

#[derive(Debug, Clone)]
pub struct SlicingEnv {
    sim: Simulator,
    initial: SimSnapshot,
    initial_state: NetworkState,
    spec: RewardSpec,
    actions: ActionSpace,
    p_sta: Vec<f64>,
    window: KpmWindow,
    frame_bytes: f64,
    mode: RewardMode,
    harness: HarnessConfig,
    needs_reset: bool,
    steps: u64,
    detector: AlarmDetector,
    alarms: Vec<AlarmEvent>,
    history: Vec<StepRecord>,
    keep_history: bool,
}

impl SlicingEnv {
    /// Builds the cell for `scenario` with simulator seed `seed` and runs the
    /// warm-up; [`Environment::reset`] returns to the post-warm-up point.
    pub fn new(scenario: &Scenario, seed: u64, mode: RewardMode) -> Result<Self> {
        let mut config = scenario.sim_config().clone();
        config.rng_seed = seed;
        let j = scenario.num_slices();
        let mut sim = Simulator::new(config.clone(), scenario.roster().to_vec(), j)?;
        let weights = scenario.policy().weights();
        let p_sta = static_share(&weights)?;
        let mut spec = RewardSpec::from_policy(scenario.policy(), max_cell_rate(&config))?;
        spec.demand_slack = scenario.harness().demand_slack;
        spec.validate()?;
        let frame_bytes = max_frame_bytes(&config);

        let warm = AllocationPlan::equal_dynamic(&weights)?;
        let mut last = None;
        for _ in 0..scenario.harness().warmup_frames {
            last = Some(collect(&sim.step_frame(&warm, SchedulerKind::RoundRobin)?));
        }
        let initial_state = match last {
            Some(rec) => {
                let full = build_state(&rec, frame_bytes);
                let mut data = vec![0.0; full.as_slice().len()];
                for c in 0..full.cols() {
                    data[ROW_BFS * full.cols() + c] = full.get(ROW_BFS, c);
                }
                NetworkState::from_rows(j, data)?
            }
            None => NetworkState::zeros(j),
        };
        let initial = sim.snapshot();
        let shape: Vec<usize> = spec.slices.iter().map(|s| s.outage.len()).collect();
        Ok(SlicingEnv {
            sim,
            initial,
            initial_state,
            actions: enumerate_actions(j, &SchedulerKind::ALL)?,
            p_sta,
            window: KpmWindow::new(scenario.harness().kpm_window),
            frame_bytes,
            mode,
            harness: scenario.harness().clone(),
            needs_reset: false,
            steps: 0,
            detector: AlarmDetector::new(&shape, scenario.harness().alarm_window),
            alarms: Vec::new(),
            history: Vec::new(),
            keep_history: true,
            spec,
        })
    }

    pub fn with_history(mut self, keep: bool) -> Self {
        self.keep_history = keep;
        self
    }

    pub fn action_space(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn reward_spec(&self) -> &RewardSpec {
        &self.spec
    }

    pub fn p_sta(&self) -> &[f64] {
        &self.p_sta
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn mode(&self) -> RewardMode {
        self.mode
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn alarms(&self) -> &[AlarmEvent] {
        &self.alarms
    }

    pub fn history(&self) -> &[StepRecord] {
        &self.history
    }

    pub fn initial_state(&self) -> &NetworkState {
        &self.initial_state
    }

    /// Plan and scheduler of action `id`.
    pub fn plan_for(&self, id: usize) -> Result<(AllocationPlan, SchedulerKind)> {
        let a = self.actions.action(id)?;
        Ok((compose_allocation(&a.composition, &self.p_sta)?, a.scheduler))
    }

    /// Runs one frame under an arbitrary plan. Ignores the terminal/reset
    /// contract, so fixed controllers can run straight through outages.
    pub fn step_plan(&mut self, plan: &AllocationPlan, sch: SchedulerKind) -> Result<(NetworkState, StepRecord)> {
        self.frame(plan, sch, None)
    }

    fn frame(
        &mut self,
        plan: &AllocationPlan,
        sch: SchedulerKind,
        action: Option<usize>,
    ) -> Result<(NetworkState, StepRecord)> {
        let stats = self.sim.step_frame(plan, sch)?;
        let kpm = self.window.push(collect(&stats));
        let outcome = compute_reward(&kpm, &self.spec, sch)?;
        self.steps += 1;
        self.check_alarms(plan, &outcome)?;
        let (reward, terminal) = match self.mode {
            RewardMode::SlaAware => (outcome.value, outcome.terminal),
            RewardMode::OptimizationOnly => (outcome.r_opt, false),
        };
        let state = build_state(&kpm, self.frame_bytes);
        let rec = StepRecord {
            step: self.steps,
            action,
            scheduler: sch,
            p_final: plan.p_final().to_vec(),
            kpm,
            outcome,
            reward,
            terminal,
        };
        if self.keep_history {
            self.history.push(rec.clone());
        }
        Ok((state, rec))
    }

    fn check_alarms(&mut self, plan: &AllocationPlan, outcome: &RewardOutcome) -> Result<()> {
        let violated = self
            .spec
            .slices
            .iter()
            .zip(&outcome.vrsla_outage)
            .map(|(s, rates)| {
                let limit = 1.0 - s.reliability.unwrap_or(1.0);
                rates.iter().map(|&v| v > limit).collect()
            })
            .collect();
        let rec = FrameRecord {
            violated,
            p_final: plan.p_final().to_vec(),
            max_allocation: (0..plan.num_slices()).map(|j| plan.max_allocation(j)).collect(),
        };
        for c in self.detector.observe(rec) {
            let (j, k) = (c.slice, c.predicate);
            let (confirmed, evidence, reason) = if c.at_full_allocation {
                (true, outcome.vrsla_outage[j][k], AlarmReason::FullAllocation)
            } else {
                let (bad, ev) = probe_full_allocation(
                    &self.sim,
                    &self.spec,
                    &self.p_sta,
                    j,
                    k,
                    self.harness.kpm_window,
                    self.harness.probe_frames,
                    self.harness.probe_tail,
                )?;
                (bad, ev, AlarmReason::Probe)
            };
            if confirmed {
                self.detector.confirm(c);
                self.alarms.push(AlarmEvent {
                    frame: self.steps,
                    slice: j,
                    slice_name: self.spec.slices[j].name.clone(),
                    predicate: self.spec.slices[j].outage[k].to_string(),
                    evidence,
                    reason,
                });
            } else {
                self.detector.dismiss(c);
            }
        }
        Ok(())
    }
}

impl Environment for SlicingEnv {
    type State = NetworkState;

    fn num_actions(&self) -> usize {
        self.actions.len()
    }

    fn reset(&mut self) -> Result<NetworkState> {
        self.sim.restore(&self.initial)?;
        self.window.clear();
        self.needs_reset = false;
        Ok(self.initial_state.clone())
    }

    fn step(&mut self, action: usize) -> Result<Transition<NetworkState>> {
        if self.needs_reset {
            return Err(Error::ResetRequired);
        }
        let (plan, sch) = self.plan_for(action)?;
        let (state, rec) = self.frame(&plan, sch, Some(action))?;
        self.needs_reset = rec.terminal;
        Ok(Transition {
            state,
            reward: rec.reward,
            terminal: rec.terminal,
            kind: match (self.mode, rec.outcome.kind) {
                (RewardMode::OptimizationOnly, _) | (_, RewardKind::Normal) => "normal",
                (_, k) => k.label(),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_contract() {
        let sc = Scenario::preset("insufficient_resources").unwrap();
        let mut env = SlicingEnv::new(&sc, 3, RewardMode::SlaAware).unwrap();
        let s0 = env.reset().unwrap();
        assert_eq!((s0.rows(), s0.cols()), (4, 4));
        assert!(s0.get(0, 0) == 0.0 && s0.get(2, 3) == 0.0);
        // All of the dynamic pool to MTC starves URLLC.
        let mtc_only = env
            .action_space()
            .iter()
            .find(|a| a.composition.tenths() == [0, 0, 10])
            .unwrap()
            .id;
        let mut hit = false;
        for _ in 0..200 {
            let t = env.step(mtc_only).unwrap();
            if t.terminal {
                hit = true;
                assert!(t.reward <= 0.0);
                break;
            }
        }
        assert!(hit);
        assert!(matches!(env.step(0), Err(Error::ResetRequired)));
        assert_eq!(env.reset().unwrap(), s0);
        env.step(0).unwrap();
    }

    #[test]
    fn optimisation_mode_never_terminal() {
        let sc = Scenario::preset("insufficient_resources").unwrap();
        let mut env = SlicingEnv::new(&sc, 3, RewardMode::OptimizationOnly).unwrap();
        env.reset().unwrap();
        for _ in 0..100 {
            let t = env.step(0).unwrap();
            assert!(!t.terminal && t.reward >= 0.0);
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let sc = Scenario::preset("normal").unwrap();
        let run = || {
            let mut env = SlicingEnv::new(&sc, 9, RewardMode::SlaAware).unwrap();
            env.reset().unwrap();
            let mut out = Vec::new();
            for i in 0..30 {
                let t = env.step((i * 7) % 198).unwrap();
                out.push(t.reward);
                if t.terminal {
                    env.reset().unwrap();
                }
            }
            out
        };
        assert_eq!(run(), run());
    }
}
