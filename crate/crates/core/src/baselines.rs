//! Reference planners the adaptive search is measured against.
//!
//! Three strategies spanning the classic trade-offs: an exhaustive
//! boustrophedon sweep (complete, never adaptive), a myopic Thompson-sampling
//! step chaser (adaptive, no lookahead, cost-blind), and a one-step
//! information-greedy rule over single-target hypotheses (adaptive, cost-blind,
//! expensive to evaluate).

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, Normal};

use crate::belief::{discretize, thompson_sample, MeasurementSet, SequentialEstimator};
use crate::env::{ActionId, ActionSpace, SearchEnv, SensingAction};
use crate::error::{CastError, Result};
use crate::planner::{CastPlanner, PlannerConfig};
use crate::seeding::{stream_rng, tag};
use crate::sim::{PlanResult, Planner, PlanningContext};

/// Row-band decomposition of the grid into per-agent boustrophedon routes.
///
/// Rows are split into contiguous bands, one per agent, with the remainder
/// spread over the lowest-numbered agents. Each band is swept serpentine
/// starting at its top-left cell, so an agent starting at the grid's origin
/// corner always opens with the nearest cell it owns.
#[derive(Debug, Clone)]
pub struct CoveragePlan {
    sequences: Vec<Vec<ActionId>>,
}

impl CoveragePlan {
    pub fn build(actions: &ActionSpace, n_agents: usize) -> CoveragePlan {
        let grid = actions.grid();
        let mut sequences = Vec::with_capacity(n_agents);
        if n_agents == 0 {
            return CoveragePlan { sequences };
        }
        let base = grid.rows / n_agents;
        let extra = grid.rows % n_agents;
        let mut next_row = 0;
        for agent in 0..n_agents {
            let band = base + usize::from(agent < extra);
            let mut seq = Vec::with_capacity(band * grid.cols);
            for (i, row) in (next_row..next_row + band).enumerate() {
                if i % 2 == 0 {
                    for col in 0..grid.cols {
                        seq.push(actions.point_sense_id(row, col));
                    }
                } else {
                    for col in (0..grid.cols).rev() {
                        seq.push(actions.point_sense_id(row, col));
                    }
                }
            }
            next_row += band;
            sequences.push(seq);
        }
        CoveragePlan { sequences }
    }

    pub fn sequence_for(&self, agent: usize) -> &[ActionId] {
        &self.sequences[agent]
    }

    pub fn n_agents(&self) -> usize {
        self.sequences.len()
    }
}

/// The `step`-th sense of an agent's sweep, or `Done` past the end.
pub fn ps_next(plan: &CoveragePlan, agent_id: usize, step: usize) -> PlanResult {
    match plan.sequence_for(agent_id).get(step) {
        Some(&id) => PlanResult::Execute(id),
        None => PlanResult::Done,
    }
}

pub struct PointSweepPlanner {
    sequence: Vec<ActionId>,
    step: usize,
}

impl PointSweepPlanner {
    pub fn new(plan: &CoveragePlan, agent_id: usize) -> Self {
        PointSweepPlanner {
            sequence: plan.sequence_for(agent_id).to_vec(),
            step: 0,
        }
    }
}

impl Planner for PointSweepPlanner {
    fn next_action(&mut self, _ctx: &PlanningContext) -> Result<PlanResult> {
        let result = match self.sequence.get(self.step) {
            Some(&id) => PlanResult::Execute(id),
            None => PlanResult::Done,
        };
        self.step = self.step.saturating_add(1);
        Ok(result)
    }

    fn name(&self) -> &'static str {
        "ps"
    }
}

/// One Thompson draw, then the single action that most shrinks the distance
/// between the running estimate and that draw, assuming a noiseless
/// observation. Travel cost never enters the choice.
pub struct MyopicTsPlanner {
    rng: ChaCha8Rng,
}

impl MyopicTsPlanner {
    pub fn new(rng: ChaCha8Rng) -> Self {
        MyopicTsPlanner { rng }
    }
}

impl Planner for MyopicTsPlanner {
    fn next_action(&mut self, ctx: &PlanningContext) -> Result<PlanResult> {
        let draw = thompson_sample(ctx.belief, &mut self.rng)?;
        let bin = discretize(&draw, 0.5);
        let est = SequentialEstimator::from_data(ctx.belief, ctx.data)?;
        let resid = &bin.beta_bin - est.mu();

        let mut best_id = 0;
        let mut best_gain = f64::NEG_INFINITY;
        for action in ctx.env.actions.iter() {
            let o = action.dot(&bin.beta_bin);
            let gain = est.lambda_peek(action, o, &resid);
            if gain > best_gain {
                best_gain = gain;
                best_id = action.action_id;
            }
        }
        Ok(PlanResult::Execute(best_id))
    }

    fn name(&self) -> &'static str {
        "ts-myopic"
    }
}

/// Posterior over "exactly one target, at cell i" hypotheses, uniform prior.
/// Log-likelihood of hypothesis i is ∑ −(yₘ − xₘ[i])²/2σ² over the data.
pub fn single_target_posterior(data: &MeasurementSet, sigma2: f64) -> Vec<f64> {
    let n = data.n();
    let mut loglik = vec![0.0; n];
    for (x, &y) in data.rows().iter().zip(data.observations()) {
        for i in 0..n {
            let r = y - x[i];
            loglik[i] -= r * r / (2.0 * sigma2);
        }
    }
    let peak = loglik.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut q: Vec<f64> = loglik.iter().map(|&l| (l - peak).exp()).collect();
    let mass: f64 = q.iter().sum();
    for v in &mut q {
        *v /= mass;
    }
    q
}

fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
    }
}

/// Mutual information between the target-location hypothesis and one noisy
/// observation of `action`, in nats.
///
/// Under a single-target hypothesis the observation mean is `weight` when the
/// target lies inside the sensed region and 0 otherwise, so the channel is a
/// two-component Gaussian mixture and only the in-region posterior mass
/// matters. The expected posterior entropy is integrated with composite
/// Simpson over the interval carrying essentially all predictive mass.
pub fn observation_information(action: &SensingAction, q: &[f64], sigma2: f64) -> f64 {
    let q_in: f64 = action.cells.iter().map(|&c| q[c]).sum();
    if q_in <= 0.0 || q_in >= 1.0 {
        return 0.0;
    }
    let sigma = sigma2.sqrt();
    let inside = Normal::new(action.weight, sigma).expect("valid normal");
    let outside = Normal::new(0.0, sigma).expect("valid normal");

    let lo = -6.0 * sigma;
    let hi = action.weight + 6.0 * sigma;
    const INTERVALS: usize = 200;
    let h = (hi - lo) / INTERVALS as f64;
    let integrand = |y: f64| {
        let m_in = q_in * inside.pdf(y);
        let p_y = m_in + (1.0 - q_in) * outside.pdf(y);
        if p_y <= 0.0 {
            return 0.0;
        }
        p_y * binary_entropy(m_in / p_y)
    };
    let mut acc = integrand(lo) + integrand(hi);
    for j in 1..INTERVALS {
        let y = lo + j as f64 * h;
        acc += integrand(y) * if j % 2 == 1 { 4.0 } else { 2.0 };
    }
    let expected_posterior_entropy = acc * h / 3.0;

    let info = binary_entropy(q_in) - expected_posterior_entropy;
    debug_assert!(info > -1e-9, "information estimate fell below zero: {info}");
    info.max(0.0)
}

/// Picks the action whose single observation is expected to say the most
/// about where the target is, regardless of what it costs to get there.
pub struct InfoGreedyPlanner;

impl Planner for InfoGreedyPlanner {
    fn next_action(&mut self, ctx: &PlanningContext) -> Result<PlanResult> {
        let q = single_target_posterior(ctx.data, ctx.env.noise.sigma2);
        let mut best_id = 0;
        let mut best_info = f64::NEG_INFINITY;
        for action in ctx.env.actions.iter() {
            let info = observation_information(action, &q, ctx.env.noise.sigma2);
            if info > best_info {
                best_info = info;
                best_id = action.action_id;
            }
        }
        Ok(PlanResult::Execute(best_id))
    }

    fn name(&self) -> &'static str {
        "info-greedy"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    Cast,
    Ps,
    TsMyopic,
    InfoGreedy,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 4] = [
        PlannerKind::Cast,
        PlannerKind::Ps,
        PlannerKind::TsMyopic,
        PlannerKind::InfoGreedy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Cast => "cast",
            PlannerKind::Ps => "ps",
            PlannerKind::TsMyopic => "ts-myopic",
            PlannerKind::InfoGreedy => "info-greedy",
        }
    }

    /// Instantiate this planner for one agent of a trial. Stochastic planners
    /// draw from a stream keyed by the trial seed and agent id, so teams are
    /// reproducible and agents decorrelated.
    pub fn build(
        self,
        agent_id: usize,
        n_agents: usize,
        trial_seed: u64,
        env: &SearchEnv,
        cast_cfg: &PlannerConfig,
    ) -> Box<dyn Planner> {
        let rng = stream_rng(trial_seed, &[tag::PLANNER, agent_id as u64]);
        match self {
            PlannerKind::Cast => Box::new(CastPlanner::new(cast_cfg.clone(), rng)),
            PlannerKind::Ps => {
                let plan = CoveragePlan::build(&env.actions, n_agents);
                Box::new(PointSweepPlanner::new(&plan, agent_id))
            }
            PlannerKind::TsMyopic => Box::new(MyopicTsPlanner::new(rng)),
            PlannerKind::InfoGreedy => Box::new(InfoGreedyPlanner),
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlannerKind {
    type Err = CastError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cast" => Ok(PlannerKind::Cast),
            "ps" => Ok(PlannerKind::Ps),
            "ts-myopic" => Ok(PlannerKind::TsMyopic),
            "info-greedy" => Ok(PlannerKind::InfoGreedy),
            other => Err(CastError::Config(format!(
                "unknown planner '{other}' (expected cast, ps, ts-myopic, or info-greedy)"
            ))),
        }
    }
}
