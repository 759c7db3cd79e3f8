//! Event-driven simulation of a decentralized search team.
//!
//! Every agent runs its own sense-plan loop against its own measurement set;
//! the only coupling is an unreliable broadcast channel. A single
//! deterministic event queue orders action completions and message deliveries
//! by time, so a trial is a pure function of its seed. An omniscient logger
//! (never visible to agents) tracks the team-wide estimate to decide when all
//! targets are recovered and what the run cost up to that instant.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::belief::{
    discretize, posterior_update, GaussianBelief, MeasurementSet, SequentialEstimator,
};
use crate::env::{action_cost, observe, ActionId, GroundTruth, Measurement, Position, SearchEnv};
use crate::error::{CastError, Result};
use crate::seeding::{stream_rng, tag, unit_uniform};

/// What a planner wants to do next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanResult {
    Execute(ActionId),
    /// Nothing left to do; the agent goes idle.
    Done,
}

/// Immutable snapshot handed to a planner at decision time.
pub struct PlanningContext<'a> {
    pub agent_id: usize,
    pub position: Position,
    pub data: &'a MeasurementSet,
    pub belief: &'a GaussianBelief,
    pub env: &'a SearchEnv,
}

pub trait Planner {
    fn next_action(&mut self, ctx: &PlanningContext) -> Result<PlanResult>;
    fn name(&self) -> &'static str;
}

/// How message delay is drawn per delivered copy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CommsDelay {
    Fixed(f64),
    Uniform { lo: f64, hi: f64 },
}

impl CommsDelay {
    fn validate(&self) -> Result<()> {
        match *self {
            CommsDelay::Fixed(d) if d >= 0.0 && d.is_finite() => Ok(()),
            CommsDelay::Uniform { lo, hi } if lo >= 0.0 && hi >= lo && hi.is_finite() => Ok(()),
            _ => Err(CastError::Config("message delay must be finite and >= 0".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommsConfig {
    /// Probability each recipient copy of a broadcast is lost.
    pub drop_prob: f64,
    pub delay: CommsDelay,
}

impl CommsConfig {
    pub fn perfect() -> Self {
        CommsConfig { drop_prob: 0.0, delay: CommsDelay::Fixed(0.0) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return Err(CastError::Config("drop_prob must be in [0, 1]".into()));
        }
        self.delay.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop at the first instant the team estimate identifies every target.
    FullRecovery { threshold: f64 },
    /// Run until every planner reports done; recovery is recorded, not awaited.
    PlanExhausted,
}

/// Why the trial ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialEnd {
    Recovered,
    PlansExhausted,
    BudgetCeiling,
    DecisionCap,
}

#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub comms: CommsConfig,
    pub stop: StopRule,
    /// Team-cost ceiling; defaults to 50× the deterministic point-sweep cost.
    pub budget_ceiling: Option<f64>,
    /// Per-agent planning-call cap; defaults to max(1000, 50·n).
    pub max_decisions: Option<usize>,
    /// Starting positions; defaults to every agent at the grid origin corner.
    pub start_positions: Option<Vec<Position>>,
}

impl TrialConfig {
    pub fn new(comms: CommsConfig, stop: StopRule) -> Self {
        TrialConfig {
            comms,
            stop,
            budget_ceiling: None,
            max_decisions: None,
            start_positions: None,
        }
    }
}

/// One completed action, as the omniscient logger saw it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEvent {
    pub time: f64,
    pub agent: usize,
    pub action_id: ActionId,
    pub observation: f64,
    /// Team cost accumulated through this completion.
    pub cost_so_far: f64,
    /// Instantaneous team recovery from the union of completed measurements.
    pub recovery_rate: f64,
    pub false_positives: usize,
    /// The acting agent's measurement count after this event's drain.
    pub data_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialLog {
    pub events: Vec<TrialEvent>,
    pub completed: bool,
    pub end: TrialEnd,
    pub stop_time: f64,
    /// Team cost at the stop instant; the ceiling itself for capped trials.
    pub total_cost: f64,
    pub per_agent_cost: Vec<f64>,
    pub final_data_sizes: Vec<usize>,
    pub budget_ceiling: f64,
    pub k: usize,
}

/// Fraction of true targets the thresholded estimate identifies; vacuously
/// 1.0 when there are no targets.
pub fn recovery_rate(team_estimate: &DVector<f64>, truth: &GroundTruth, threshold: f64) -> f64 {
    if truth.k == 0 {
        return 1.0;
    }
    let bin = discretize(team_estimate, threshold);
    let hits = truth
        .target_indices
        .iter()
        .filter(|&&i| bin.beta_bin[i] == 1.0)
        .count();
    hits as f64 / truth.k as f64
}

/// Non-target cells the thresholded estimate flags anyway.
pub fn false_positive_count(
    team_estimate: &DVector<f64>,
    truth: &GroundTruth,
    threshold: f64,
) -> usize {
    let bin = discretize(team_estimate, threshold);
    bin.beta_bin
        .iter()
        .enumerate()
        .filter(|&(i, &v)| v == 1.0 && !truth.is_target(i))
        .count()
}

/// Team cost recorded through event `until` (inclusive); the ceiling for
/// trials that ended capped.
pub fn total_team_cost(log: &TrialLog, until: usize) -> f64 {
    if log.end == TrialEnd::BudgetCeiling && until + 1 >= log.events.len() {
        log.budget_ceiling
    } else if log.events.is_empty() {
        0.0
    } else {
        log.events[until.min(log.events.len() - 1)].cost_so_far
    }
}

/// Deterministic cost of a full point-sense sweep: every agent walks its
/// boustrophedon band from its start position, paying travel plus sensing per
/// cell, summed over the team. Matches the simulator's accounting exactly.
pub fn point_sweep_cost(env: &SearchEnv, n_agents: usize, starts: &[Position]) -> f64 {
    let plan = crate::baselines::CoveragePlan::build(&env.actions, n_agents);
    let mut total = 0.0;
    for agent in 0..n_agents {
        let mut pos = starts[agent];
        let mut incurred = 0.0;
        for &id in plan.sequence_for(agent) {
            let action = env.actions.get(id);
            incurred += action_cost(&pos, action, &env.cost);
            pos = action.anchor;
        }
        total += incurred;
    }
    total
}

const FULL_RECOMPUTE_PERIOD: usize = 32;

struct Agent {
    position: Position,
    data: MeasurementSet,
    belief: GaussianBelief,
    inbox: Vec<(Measurement, f64)>,
    incurred_cost: f64,
    updates_since_recompute: usize,
    decisions: usize,
}

impl Agent {
    fn incorporate(&mut self, m: &Measurement, env: &SearchEnv) -> Result<()> {
        let action = env.actions.get(m.action_id);
        self.data.push_action(action, m.observation);
        self.belief.rank_one_update(action, m.observation);
        self.updates_since_recompute += 1;
        if self.updates_since_recompute >= FULL_RECOMPUTE_PERIOD {
            self.belief = posterior_update(&self.belief, &self.data)?;
            self.updates_since_recompute = 0;
        }
        Ok(())
    }

    /// Fold in every delivered message with deliver_at ≤ now.
    fn drain_inbox(&mut self, now: f64, env: &SearchEnv) -> Result<()> {
        let mut due: Vec<Measurement> = Vec::new();
        self.inbox.retain(|&(m, deliver_at)| {
            if deliver_at <= now {
                due.push(m);
                false
            } else {
                true
            }
        });
        for m in due {
            self.incorporate(&m, env)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum EventPayload {
    ActionComplete { action_id: ActionId, scheduled_cost: f64 },
    MessageDelivery { measurement: Measurement },
}

struct QueuedEvent {
    time: f64,
    /// Deliveries (0) sort before completions (1) at equal times, so mail
    /// that arrives exactly when an action finishes is already drained.
    kind_rank: u8,
    agent: usize,
    seq: u64,
    payload: EventPayload,
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for QueuedEvent {}
impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap and the loop wants earliest-first.
        other
            .time
            .total_cmp(&self.time)
            .then(other.kind_rank.cmp(&self.kind_rank))
            .then(other.agent.cmp(&self.agent))
            .then(other.seq.cmp(&self.seq))
    }
}

/// The omniscient team view: union of all completed measurements and the
/// estimate over it, plus pre-derived comms randomness addressing.
struct TeamLedger {
    data: MeasurementSet,
    estimator: SequentialEstimator,
    prior: GaussianBelief,
    pushes: usize,
}

impl TeamLedger {
    fn push(&mut self, m: &Measurement, env: &SearchEnv) -> Result<()> {
        let action = env.actions.get(m.action_id);
        self.data.push_action(action, m.observation);
        self.pushes += 1;
        if self.pushes % FULL_RECOMPUTE_PERIOD == 0 {
            self.estimator = SequentialEstimator::from_data(&self.prior, &self.data)?;
        } else {
            self.estimator.commit(action, m.observation);
        }
        Ok(())
    }
}

/// Run one trial to completion. Deterministic in `(inputs, trial_seed)`.
pub fn run_trial(
    env: &SearchEnv,
    truth: &GroundTruth,
    prior: &GaussianBelief,
    planners: &mut [Box<dyn Planner>],
    cfg: &TrialConfig,
    trial_seed: u64,
) -> Result<TrialLog> {
    cfg.comms.validate()?;
    let n_agents = planners.len();
    if n_agents == 0 {
        return Err(CastError::Config("a trial needs at least one agent".into()));
    }
    let starts: Vec<Position> = match &cfg.start_positions {
        Some(s) if s.len() == n_agents => s.clone(),
        Some(_) => {
            return Err(CastError::Config(
                "start_positions length must match the team size".into(),
            ))
        }
        None => vec![Position::ORIGIN; n_agents],
    };
    let ceiling = cfg
        .budget_ceiling
        .unwrap_or_else(|| 50.0 * point_sweep_cost(env, n_agents, &starts));
    let max_decisions = cfg
        .max_decisions
        .unwrap_or_else(|| 1000usize.max(50 * env.grid.n()));
    let threshold = match cfg.stop {
        StopRule::FullRecovery { threshold } => threshold,
        StopRule::PlanExhausted => 0.5,
    };

    let mut agents: Vec<Agent> = starts
        .iter()
        .map(|&position| Agent {
            position,
            data: MeasurementSet::new(env.grid.n()),
            belief: prior.clone(),
            inbox: Vec::new(),
            incurred_cost: 0.0,
            updates_since_recompute: 0,
            decisions: 0,
        })
        .collect();
    let mut noise_rngs: Vec<_> = (0..n_agents)
        .map(|a| stream_rng(trial_seed, &[tag::NOISE, a as u64]))
        .collect();
    let mut broadcast_seq: Vec<u64> = vec![0; n_agents];

    let mut team = TeamLedger {
        data: MeasurementSet::new(env.grid.n()),
        estimator: SequentialEstimator::from_prior(prior),
        prior: prior.clone(),
        pushes: 0,
    };
    let mut log = TrialLog {
        events: Vec::new(),
        completed: false,
        end: TrialEnd::PlansExhausted,
        stop_time: 0.0,
        total_cost: 0.0,
        per_agent_cost: vec![0.0; n_agents],
        final_data_sizes: vec![0; n_agents],
        budget_ceiling: ceiling,
        k: truth.k,
    };
    let finish = |log: &mut TrialLog, agents: &[Agent], end: TrialEnd, time: f64| {
        log.end = end;
        log.stop_time = time;
        log.per_agent_cost = agents.iter().map(|a| a.incurred_cost).collect();
        log.final_data_sizes = agents.iter().map(|a| a.data.count()).collect();
        let spent: f64 = agents.iter().map(|a| a.incurred_cost).sum();
        log.total_cost = if end == TrialEnd::BudgetCeiling { log.budget_ceiling } else { spent };
        log.completed = matches!(end, TrialEnd::Recovered | TrialEnd::PlansExhausted);
    };

    // Vacuous recovery ends the trial before anything is scheduled.
    if matches!(cfg.stop, StopRule::FullRecovery { .. })
        && recovery_rate(team.estimator.mu(), truth, threshold) >= 1.0
    {
        finish(&mut log, &agents, TrialEnd::Recovered, 0.0);
        return Ok(log);
    }

    let mut queue: BinaryHeap<QueuedEvent> = BinaryHeap::new();
    let mut seq = 0u64;
    let plan_next = |agent_id: usize,
                         agents: &mut [Agent],
                         planners: &mut [Box<dyn Planner>],
                         queue: &mut BinaryHeap<QueuedEvent>,
                         seq: &mut u64,
                         now: f64|
     -> Result<bool> {
        let agent = &mut agents[agent_id];
        if agent.decisions >= max_decisions {
            return Ok(false);
        }
        agent.decisions += 1;
        let ctx = PlanningContext {
            agent_id,
            position: agent.position,
            data: &agent.data,
            belief: &agent.belief,
            env,
        };
        match planners[agent_id].next_action(&ctx)? {
            PlanResult::Done => {}
            PlanResult::Execute(action_id) => {
                let action = env.actions.get(action_id);
                let cost = action_cost(&agent.position, action, &env.cost);
                *seq += 1;
                queue.push(QueuedEvent {
                    time: now + cost,
                    kind_rank: 1,
                    agent: agent_id,
                    seq: *seq,
                    payload: EventPayload::ActionComplete { action_id, scheduled_cost: cost },
                });
            }
        }
        Ok(true)
    };

    for agent_id in 0..n_agents {
        if !plan_next(agent_id, &mut agents, planners, &mut queue, &mut seq, 0.0)? {
            finish(&mut log, &agents, TrialEnd::DecisionCap, 0.0);
            return Ok(log);
        }
    }

    while let Some(event) = queue.pop() {
        let now = event.time;
        match event.payload {
            EventPayload::MessageDelivery { measurement } => {
                let agent = &mut agents[event.agent];
                agent.inbox.push((measurement, now));
                agent.drain_inbox(now, env)?;
            }
            EventPayload::ActionComplete { action_id, scheduled_cost } => {
                let agent_id = event.agent;
                let action = env.actions.get(action_id);
                let observation = observe(action, truth, &env.noise, &mut noise_rngs[agent_id]);
                let measurement = Measurement {
                    action_id,
                    observation,
                    agent_id,
                    wall_time: now,
                };

                agents[agent_id].position = action.anchor;
                agents[agent_id].incurred_cost += scheduled_cost;

                team.push(&measurement, env)?;
                let team_rate = recovery_rate(team.estimator.mu(), truth, threshold);
                let cost_so_far: f64 = agents.iter().map(|a| a.incurred_cost).sum();
                log.events.push(TrialEvent {
                    time: now,
                    agent: agent_id,
                    action_id,
                    observation,
                    cost_so_far,
                    recovery_rate: team_rate,
                    false_positives: false_positive_count(team.estimator.mu(), truth, threshold),
                    data_size: 0, // patched below, after the drain
                });

                // Broadcast: each teammate copy is independently dropped or
                // scheduled for delivery after its own delay.
                let bseq = broadcast_seq[agent_id];
                broadcast_seq[agent_id] += 1;
                for recipient in 0..n_agents {
                    if recipient == agent_id {
                        continue;
                    }
                    let address = [tag::COMMS_DROP, agent_id as u64, bseq, recipient as u64];
                    if unit_uniform(trial_seed, &address) < cfg.comms.drop_prob {
                        continue;
                    }
                    let delay = match cfg.comms.delay {
                        CommsDelay::Fixed(d) => d,
                        CommsDelay::Uniform { lo, hi } => {
                            let address =
                                [tag::COMMS_DELAY, agent_id as u64, bseq, recipient as u64];
                            lo + unit_uniform(trial_seed, &address) * (hi - lo)
                        }
                    };
                    seq += 1;
                    queue.push(QueuedEvent {
                        time: now + delay,
                        kind_rank: 0,
                        agent: recipient,
                        seq,
                        payload: EventPayload::MessageDelivery { measurement },
                    });
                }

                if matches!(cfg.stop, StopRule::FullRecovery { .. }) && team_rate >= 1.0 {
                    agents[agent_id].incorporate(&measurement, env)?;
                    agents[agent_id].drain_inbox(now, env)?;
                    if let Some(e) = log.events.last_mut() {
                        e.data_size = agents[agent_id].data.count();
                    }
                    finish(&mut log, &agents, TrialEnd::Recovered, now);
                    return Ok(log);
                }
                if cost_so_far >= ceiling {
                    agents[agent_id].incorporate(&measurement, env)?;
                    if let Some(e) = log.events.last_mut() {
                        e.data_size = agents[agent_id].data.count();
                    }
                    finish(&mut log, &agents, TrialEnd::BudgetCeiling, now);
                    return Ok(log);
                }

                let agent = &mut agents[agent_id];
                agent.incorporate(&measurement, env)?;
                agent.drain_inbox(now, env)?;
                if let Some(e) = log.events.last_mut() {
                    e.data_size = agent.data.count();
                }

                if !plan_next(agent_id, &mut agents, planners, &mut queue, &mut seq, now)? {
                    finish(&mut log, &agents, TrialEnd::DecisionCap, now);
                    return Ok(log);
                }
            }
        }
    }

    // Queue ran dry: every planner reported done and no mail is in flight.
    let last_time = log.events.last().map_or(0.0, |e| e.time);
    let end = match cfg.stop {
        StopRule::PlanExhausted => TrialEnd::PlansExhausted,
        // Plans ran out without full recovery: spent what was spent, but the
        // trial did not succeed.
        StopRule::FullRecovery { .. } => {
            finish(&mut log, &agents, TrialEnd::PlansExhausted, last_time);
            log.completed = false;
            return Ok(log);
        }
    };
    finish(&mut log, &agents, end, last_time);
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::GridSpec;
    use approx::assert_abs_diff_eq;

    fn env_with(side: usize, sensing_cost: f64, sigma2: f64) -> SearchEnv {
        let grid = GridSpec::new(side, side, 10.0, 5.0).unwrap();
        SearchEnv::new(grid, sensing_cost, sigma2, Default::default()).unwrap()
    }

    /// Replays a fixed action list, then reports done.
    struct Scripted {
        actions: Vec<ActionId>,
        step: usize,
    }

    impl Scripted {
        fn new(actions: Vec<ActionId>) -> Box<dyn Planner> {
            Box::new(Scripted { actions, step: 0 })
        }
    }

    impl Planner for Scripted {
        fn next_action(&mut self, _ctx: &PlanningContext) -> Result<PlanResult> {
            let result = match self.actions.get(self.step) {
                Some(&id) => PlanResult::Execute(id),
                None => PlanResult::Done,
            };
            self.step += 1;
            Ok(result)
        }
        fn name(&self) -> &'static str {
            "scripted"
        }
    }

    fn full_recovery(threshold: f64) -> StopRule {
        StopRule::FullRecovery { threshold }
    }

    #[test]
    fn recovery_rate_examples() {
        let truth = GroundTruth::from_indices(16, vec![1, 5, 9, 11, 14]).unwrap();
        assert_eq!(recovery_rate(&truth.beta(), &truth, 0.5), 1.0);
        assert_eq!(recovery_rate(&DVector::zeros(16), &truth, 0.5), 0.0);

        let mut partial = DVector::zeros(16);
        partial[1] = 0.9;
        partial[5] = 0.8;
        partial[9] = 0.7;
        assert_abs_diff_eq!(recovery_rate(&partial, &truth, 0.5), 0.6, epsilon = 1e-12);

        // False positives raise the count but never the rate.
        partial[2] = 0.95;
        assert_abs_diff_eq!(recovery_rate(&partial, &truth, 0.5), 0.6, epsilon = 1e-12);
        assert_eq!(false_positive_count(&partial, &truth, 0.5), 1);

        let empty_truth = GroundTruth::from_indices(16, vec![]).unwrap();
        assert_eq!(recovery_rate(&DVector::zeros(16), &empty_truth, 0.5), 1.0);
    }

    #[test]
    fn single_agent_log_times_are_cumulative_costs() {
        // Agent starts on the anchor of point 0; the first sense costs
        // exactly c_s = 3, the second (one cell right, 10 m at 5 m/s) 2 + 3.
        let env = env_with(2, 3.0, 1e-12);
        let truth = GroundTruth::from_indices(4, vec![1]).unwrap();
        let prior = GaussianBelief::standard_prior(4, env.noise.sigma2).unwrap();
        let p0 = env.actions.point_sense_id(0, 0);
        let p1 = env.actions.point_sense_id(0, 1);
        let mut planners = vec![Scripted::new(vec![p0, p1])];
        let cfg = TrialConfig {
            start_positions: Some(vec![env.actions.get(p0).anchor]),
            ..TrialConfig::new(CommsConfig::perfect(), full_recovery(0.5))
        };
        let log = run_trial(&env, &truth, &prior, &mut planners, &cfg, 7).unwrap();

        assert!(log.completed);
        assert_eq!(log.end, TrialEnd::Recovered);
        assert_eq!(log.events.len(), 2);
        assert_abs_diff_eq!(log.events[0].time, 3.0, epsilon = 1e-12);
        // Second sense: 10 m of travel at 5 m/s plus 3 s of sensing.
        assert_abs_diff_eq!(log.events[1].time, 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(log.events[0].cost_so_far, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(log.total_cost, 8.0, epsilon = 1e-12);
        assert_eq!(log.events[1].recovery_rate, 1.0);
    }

    #[test]
    fn total_isolation_keeps_data_sets_private() {
        let env = env_with(4, 1.0, 1.0 / 16.0);
        let truth = GroundTruth::from_indices(16, vec![3]).unwrap();
        let prior = GaussianBelief::standard_prior(16, env.noise.sigma2).unwrap();
        let plan = crate::baselines::CoveragePlan::build(&env.actions, 2);
        let mut planners: Vec<Box<dyn Planner>> = (0..2)
            .map(|a| Scripted::new(plan.sequence_for(a).to_vec()))
            .collect();
        let cfg = TrialConfig::new(
            CommsConfig { drop_prob: 1.0, delay: CommsDelay::Fixed(0.0) },
            StopRule::PlanExhausted,
        );
        let log = run_trial(&env, &truth, &prior, &mut planners, &cfg, 11).unwrap();

        // Every agent's data holds exactly its own completions, nothing more.
        for agent in 0..2 {
            let own = log.events.iter().filter(|e| e.agent == agent).count();
            assert_eq!(log.final_data_sizes[agent], own);
        }
        for (idx, event) in log.events.iter().enumerate() {
            let own_so_far = log.events[..=idx]
                .iter()
                .filter(|e| e.agent == event.agent)
                .count();
            assert_eq!(event.data_size, own_so_far);
        }
    }

    #[test]
    fn instant_comms_shares_first_measurements() {
        let env = env_with(2, 1.0, 1.0 / 16.0);
        let truth = GroundTruth::from_indices(4, vec![0]).unwrap();
        let prior = GaussianBelief::standard_prior(4, env.noise.sigma2).unwrap();
        let p0 = env.actions.point_sense_id(0, 0);
        let p3 = env.actions.point_sense_id(1, 1);
        let mut planners = vec![Scripted::new(vec![p0]), Scripted::new(vec![p3])];
        let cfg = TrialConfig::new(CommsConfig::perfect(), StopRule::PlanExhausted);
        let log = run_trial(&env, &truth, &prior, &mut planners, &cfg, 13).unwrap();

        assert_eq!(log.events.len(), 2);
        // After both first actions, both data sets hold both measurements.
        assert_eq!(log.final_data_sizes, vec![2, 2]);
        // The later completion already saw the earlier broadcast.
        assert_eq!(log.events[1].data_size, 2);
    }

    #[test]
    fn point_sweep_cost_matches_simulated_accounting_exactly() {
        let env = env_with(4, 1.7, 1.0 / 16.0);
        let truth = GroundTruth::from_indices(16, vec![9]).unwrap();
        let prior = GaussianBelief::standard_prior(16, env.noise.sigma2).unwrap();
        let plan = crate::baselines::CoveragePlan::build(&env.actions, 2);
        let mut planners: Vec<Box<dyn Planner>> = (0..2)
            .map(|a| Scripted::new(plan.sequence_for(a).to_vec()))
            .collect();
        let cfg = TrialConfig::new(CommsConfig::perfect(), StopRule::PlanExhausted);
        let log = run_trial(&env, &truth, &prior, &mut planners, &cfg, 17).unwrap();

        let starts = vec![Position::ORIGIN; 2];
        let oracle = point_sweep_cost(&env, 2, &starts);
        assert_eq!(log.total_cost, oracle);
        assert!(log.completed);
        assert_eq!(log.end, TrialEnd::PlansExhausted);
    }

    #[test]
    fn heterogeneous_costs_interleave_agents_asynchronously() {
        // Agent 0 works near its corner; agent 1 crosses the grid first.
        let env = env_with(4, 1.0, 1.0 / 16.0);
        let truth = GroundTruth::from_indices(16, vec![0]).unwrap();
        let prior = GaussianBelief::standard_prior(16, env.noise.sigma2).unwrap();
        let near_a = env.actions.point_sense_id(0, 0);
        let near_b = env.actions.point_sense_id(0, 1);
        let far = env.actions.point_sense_id(3, 3);
        let mut planners = vec![
            Scripted::new(vec![near_a, near_b, near_a]),
            Scripted::new(vec![far]),
        ];
        let cfg = TrialConfig::new(CommsConfig::perfect(), StopRule::PlanExhausted);
        let log = run_trial(&env, &truth, &prior, &mut planners, &cfg, 19).unwrap();

        let first_of_agent1 = log.events.iter().position(|e| e.agent == 1).unwrap();
        let agent0_before = log.events[..first_of_agent1]
            .iter()
            .filter(|e| e.agent == 0)
            .count();
        assert!(
            agent0_before >= 2,
            "agent 0 should complete at least twice before agent 1 finishes once"
        );
    }

    #[test]
    fn delayed_mail_is_not_visible_before_delivery() {
        let env = env_with(2, 1.0, 1.0 / 16.0);
        let truth = GroundTruth::from_indices(4, vec![2]).unwrap();
        let prior = GaussianBelief::standard_prior(4, env.noise.sigma2).unwrap();
        let p0 = env.actions.point_sense_id(0, 0);
        let p3 = env.actions.point_sense_id(1, 1);
        let mut planners = vec![
            Scripted::new(vec![p0, p0]),
            Scripted::new(vec![p3, p3]),
        ];
        let cfg = TrialConfig::new(
            CommsConfig { drop_prob: 0.0, delay: CommsDelay::Fixed(1000.0) },
            StopRule::PlanExhausted,
        );
        let log = run_trial(&env, &truth, &prior, &mut planners, &cfg, 23).unwrap();

        // All events happen well before any delivery, so every data set holds
        // only the agent's own measurements at event time.
        for event in &log.events {
            assert!(event.time < 1000.0);
            let own = log.events
                .iter()
                .take_while(|e| e.time <= event.time)
                .filter(|e| e.agent == event.agent)
                .count();
            assert!(event.data_size <= own);
        }
    }

    #[test]
    fn identical_seeds_reproduce_identical_logs() {
        let env = env_with(4, 1.0, 1.0 / 16.0);
        let truth = GroundTruth::from_indices(16, vec![5, 12]).unwrap();
        let prior = GaussianBelief::standard_prior(16, env.noise.sigma2).unwrap();
        let comms = CommsConfig { drop_prob: 0.3, delay: CommsDelay::Uniform { lo: 0.5, hi: 2.0 } };
        let run = |seed: u64| {
            let plan = crate::baselines::CoveragePlan::build(&env.actions, 3);
            let mut planners: Vec<Box<dyn Planner>> = (0..3)
                .map(|a| Scripted::new(plan.sequence_for(a).to_vec()))
                .collect();
            let cfg = TrialConfig::new(comms, StopRule::PlanExhausted);
            run_trial(&env, &truth, &prior, &mut planners, &cfg, seed).unwrap()
        };
        let a = run(31);
        let b = run(31);
        assert_eq!(a, b);
        let c = run(32);
        assert!(a.events != c.events || a.total_cost != c.total_cost);
    }

    #[test]
    fn data_sizes_never_shrink() {
        let env = env_with(4, 1.0, 1.0 / 16.0);
        let truth = GroundTruth::from_indices(16, vec![7]).unwrap();
        let prior = GaussianBelief::standard_prior(16, env.noise.sigma2).unwrap();
        let plan = crate::baselines::CoveragePlan::build(&env.actions, 2);
        let mut planners: Vec<Box<dyn Planner>> = (0..2)
            .map(|a| Scripted::new(plan.sequence_for(a).to_vec()))
            .collect();
        let comms = CommsConfig { drop_prob: 0.4, delay: CommsDelay::Uniform { lo: 0.0, hi: 5.0 } };
        let cfg = TrialConfig::new(comms, StopRule::PlanExhausted);
        let log = run_trial(&env, &truth, &prior, &mut planners, &cfg, 37).unwrap();

        let mut last = vec![0usize; 2];
        for event in &log.events {
            assert!(event.data_size >= last[event.agent]);
            last[event.agent] = event.data_size;
        }
    }

    #[test]
    fn no_targets_means_instant_vacuous_recovery() {
        let env = env_with(4, 1.0, 1.0 / 16.0);
        let truth = GroundTruth::from_indices(16, vec![]).unwrap();
        let prior = GaussianBelief::standard_prior(16, env.noise.sigma2).unwrap();
        let mut planners = vec![Scripted::new(vec![0, 1, 2])];
        let cfg = TrialConfig::new(CommsConfig::perfect(), full_recovery(0.5));
        let log = run_trial(&env, &truth, &prior, &mut planners, &cfg, 41).unwrap();

        assert!(log.completed);
        assert_eq!(log.end, TrialEnd::Recovered);
        assert_eq!(log.total_cost, 0.0);
        assert!(log.events.is_empty());
    }

    #[test]
    fn budget_ceiling_marks_the_trial_incomplete() {
        let env = env_with(2, 1.0, 1.0 / 16.0);
        // The target sits on a cell the script never senses properly.
        let truth = GroundTruth::from_indices(4, vec![3]).unwrap();
        let prior = GaussianBelief::standard_prior(4, env.noise.sigma2).unwrap();
        let p0 = env.actions.point_sense_id(0, 0);
        let mut planners = vec![Scripted::new(vec![p0; 500])];
        let cfg = TrialConfig {
            budget_ceiling: Some(12.0),
            start_positions: Some(vec![env.actions.get(p0).anchor]),
            ..TrialConfig::new(CommsConfig::perfect(), full_recovery(0.5))
        };
        let log = run_trial(&env, &truth, &prior, &mut planners, &cfg, 43).unwrap();

        assert!(!log.completed);
        assert_eq!(log.end, TrialEnd::BudgetCeiling);
        assert_eq!(log.total_cost, 12.0);
    }

    #[test]
    fn decision_cap_halts_runaway_planning() {
        // Zero sensing cost and a stationary resense script: time never
        // advances, so only the decision cap can end the trial.
        let env = env_with(2, 0.0, 1.0 / 16.0);
        let truth = GroundTruth::from_indices(4, vec![3]).unwrap();
        let prior = GaussianBelief::standard_prior(4, env.noise.sigma2).unwrap();
        let p0 = env.actions.point_sense_id(0, 0);
        let mut planners = vec![Scripted::new(vec![p0; 100_000])];
        let cfg = TrialConfig {
            max_decisions: Some(50),
            start_positions: Some(vec![env.actions.get(p0).anchor]),
            ..TrialConfig::new(CommsConfig::perfect(), full_recovery(0.5))
        };
        let log = run_trial(&env, &truth, &prior, &mut planners, &cfg, 47).unwrap();

        assert!(!log.completed);
        assert_eq!(log.end, TrialEnd::DecisionCap);
        assert_eq!(log.events.len(), 50);
    }

    #[test]
    fn exhausted_plans_without_recovery_stay_incomplete() {
        let env = env_with(2, 1.0, 1.0 / 16.0);
        let truth = GroundTruth::from_indices(4, vec![3]).unwrap();
        let prior = GaussianBelief::standard_prior(4, env.noise.sigma2).unwrap();
        let p0 = env.actions.point_sense_id(0, 0);
        let mut planners = vec![Scripted::new(vec![p0])];
        let cfg = TrialConfig::new(CommsConfig::perfect(), full_recovery(0.5));
        let log = run_trial(&env, &truth, &prior, &mut planners, &cfg, 53).unwrap();

        assert!(!log.completed);
        assert!(log.total_cost > 0.0);
    }

    #[test]
    fn incurred_cost_matches_action_cost_sums() {
        let env = env_with(4, 2.5, 1.0 / 16.0);
        let truth = GroundTruth::from_indices(16, vec![2]).unwrap();
        let prior = GaussianBelief::standard_prior(16, env.noise.sigma2).unwrap();
        let plan = crate::baselines::CoveragePlan::build(&env.actions, 2);
        let mut planners: Vec<Box<dyn Planner>> = (0..2)
            .map(|a| Scripted::new(plan.sequence_for(a).to_vec()))
            .collect();
        let cfg = TrialConfig::new(CommsConfig::perfect(), StopRule::PlanExhausted);
        let log = run_trial(&env, &truth, &prior, &mut planners, &cfg, 59).unwrap();

        // Recompute each agent's path cost from the event sequence.
        for agent in 0..2 {
            let mut pos = Position::ORIGIN;
            let mut total = 0.0;
            for event in log.events.iter().filter(|e| e.agent == agent) {
                let action = env.actions.get(event.action_id);
                total += action_cost(&pos, action, &env.cost);
                pos = action.anchor;
            }
            assert_abs_diff_eq!(log.per_agent_cost[agent], total, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(
            log.total_cost,
            log.per_agent_cost.iter().sum::<f64>(),
            epsilon = 1e-12
        );
    }
}
