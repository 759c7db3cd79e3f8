//! Monte Carlo tree search over posterior samples, scored on Pareto fronts.
//!
//! Each planning call builds a fresh tree. An episode draws one posterior
//! sample, thresholds it into a binary target hypothesis, and descends the
//! tree: belief nodes pick an action by a cost-aware UCT rule (widening onto a
//! new action when the visit count crosses ⌊n^α⌋), the maximum-likelihood
//! observation of the hypothesis branches into a child belief node, and the
//! one-step reward is the clamped drop in squared estimation error λ⁻. On the
//! way back up, every visited node refreshes a Pareto front of
//! (lower-confidence-bound reward, negated accumulated cost); the root finally
//! picks the action whose front vector has the best reward-per-cost ratio.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::collections::HashMap;

use crate::belief::{
    discretize, CholeskySampler, DiscreteSample, GaussianBelief, MeasurementSet,
    SequentialEstimator,
};
use crate::env::{ActionId, Position, SearchEnv};
use crate::error::{CastError, Result};
use crate::pareto::{
    discount_shift, pareto_filter, pareto_filter_indices, weighted_combine, ParetoFront,
    RewardCostVector, RATIO_EPSILON,
};

/// How a widening step picks the next untried action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WideningOrder {
    /// Rank untried actions by one-step λ⁻ per unit cost under the episode's
    /// sample; break ties uniformly at random.
    #[default]
    SampleGuided,
    /// Uniform-random choice, kept as an ablation.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Episode budget m.
    pub episodes: usize,
    /// Lookahead horizon d_max, in actions.
    pub depth: usize,
    /// Reward discount γ; costs are never discounted.
    pub gamma: f64,
    /// Progressive-widening exponent α.
    pub alpha_s: f64,
    /// One-sided confidence level for reward lower bounds.
    pub lcb_confidence: f64,
    /// Maximum members kept on any Pareto front.
    pub pareto_cap: usize,
    /// Posterior samples become binary via `value > threshold`.
    pub discretize_threshold: f64,
    /// Floor on edge costs inside the tree, in seconds.
    ///
    /// With a zero sensing cost, re-sensing at the current position costs
    /// exactly nothing, and the guarded reward/cost ratios turn such edges
    /// into absorbing self-loops: search piles every episode onto them and the
    /// chosen plan never advances simulated time. A small positive floor
    /// (simulation accounting still uses true costs) removes the degenerate
    /// ratios. Zero restores the literal guarded behavior.
    pub min_edge_cost: f64,
    pub widening: WideningOrder,
    /// Use the variance of Q returns in the exploration bonus instead of the
    /// standard deviation.
    pub sigma_uses_variance: bool,
    /// Keep every Q return per action node so the audit can recompute means.
    pub record_returns: bool,
    /// Snapshot the tree after each of the first N episodes.
    pub dump_episodes: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            episodes: 25_000,
            depth: 2,
            gamma: 0.97,
            alpha_s: 0.5,
            lcb_confidence: 0.95,
            pareto_cap: 10,
            discretize_threshold: 0.5,
            min_edge_cost: 0.0,
            widening: WideningOrder::SampleGuided,
            sigma_uses_variance: false,
            record_returns: false,
            dump_episodes: 0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(CastError::Planning("episode budget is zero".into()));
        }
        if self.depth == 0 {
            return Err(CastError::Config("lookahead depth must be at least 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(CastError::Config(format!(
                "discount must be in (0, 1], got {}",
                self.gamma
            )));
        }
        if !(self.alpha_s > 0.0 && self.alpha_s < 1.0) {
            return Err(CastError::Config(format!(
                "widening exponent must be in (0, 1), got {}",
                self.alpha_s
            )));
        }
        if !(self.lcb_confidence > 0.0 && self.lcb_confidence < 1.0) {
            return Err(CastError::Config("confidence level must be in (0, 1)".into()));
        }
        if self.pareto_cap == 0 {
            return Err(CastError::Config("front cap must be at least 1".into()));
        }
        if !self.discretize_threshold.is_finite() {
            return Err(CastError::Config("discretize threshold must be finite".into()));
        }
        if !(self.min_edge_cost >= 0.0) || !self.min_edge_cost.is_finite() {
            return Err(CastError::Config("edge-cost floor must be finite and ≥ 0".into()));
        }
        Ok(())
    }
}

/// Count-mean-M2 accumulator (Welford's update).
#[derive(Debug, Clone, Default)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn add(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; 0 with fewer than two samples.
    pub fn sample_variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn sample_std(&self) -> f64 {
        self.sample_variance().sqrt()
    }
}

/// Cache of one-sided Student-t quantiles at a fixed confidence level.
pub struct TTable {
    confidence: f64,
    quantiles: HashMap<u64, f64>,
}

impl TTable {
    pub fn new(confidence: f64) -> Self {
        TTable { confidence, quantiles: HashMap::new() }
    }

    /// t such that P(T ≤ t) = confidence for T ~ Student-t(df).
    pub fn quantile(&mut self, df: u64) -> f64 {
        let confidence = self.confidence;
        *self.quantiles.entry(df).or_insert_with(|| {
            StudentsT::new(0.0, 1.0, df as f64)
                .expect("degrees of freedom are positive")
                .inverse_cdf(confidence)
        })
    }
}

/// Lower confidence bound on the mean of the accumulated rewards:
/// `mean − t·s/√count`, floored at 0; a single sample is returned raw.
pub fn reward_lcb(stats: &RunningStats, ttable: &mut TTable) -> f64 {
    match stats.count() {
        0 => 0.0,
        1 => stats.mean().max(0.0),
        n => {
            let t = ttable.quantile(n - 1);
            (stats.mean() - t * stats.sample_std() / (n as f64).sqrt()).max(0.0)
        }
    }
}

/// Widening test: the action budget ⌊n^α⌋ just grew with this visit.
pub fn should_widen(n_visits: u64, alpha_s: f64) -> bool {
    budget_floor(n_visits, alpha_s) > budget_floor(n_visits.saturating_sub(1), alpha_s)
}

fn budget_floor(n: u64, alpha_s: f64) -> u64 {
    (n as f64).powf(alpha_s).floor() as u64
}

/// Selection score: `Q + √(2·σ·√n_h / n_ha) + 16·√n_h / (3·n_ha)`.
pub fn cast_uct_score(q_mean: f64, sigma: f64, n_h: u64, n_ha: u64) -> f64 {
    let root_n = (n_h as f64).sqrt();
    let n_ha = n_ha as f64;
    q_mean + (2.0 * sigma * root_n / n_ha).sqrt() + 16.0 * root_n / (3.0 * n_ha)
}

struct BeliefNode {
    depth: usize,
    position: Position,
    /// Cost of the edge leading here (floored planning cost); 0 at the root.
    edge_cost: f64,
    /// λ⁻ samples observed across the incoming edge.
    reward_stats: RunningStats,
    /// Current lower confidence bound g_h on the edge reward.
    lcb: f64,
    n_visits: u64,
    children: Vec<usize>,
    front: Option<ParetoFront>,
}

struct ActionNode {
    action_id: ActionId,
    n_visits: u64,
    q_stats: RunningStats,
    returns: Vec<f64>,
    /// Children keyed by observation bucket, in creation order.
    children: Vec<(i64, usize)>,
    front: Option<ParetoFront>,
}

struct Tree {
    beliefs: Vec<BeliefNode>,
    actions: Vec<ActionNode>,
}

const ROOT: usize = 0;

impl Tree {
    fn new(agent_pos: Position) -> Self {
        Tree {
            beliefs: vec![BeliefNode {
                depth: 0,
                position: agent_pos,
                edge_cost: 0.0,
                reward_stats: RunningStats::default(),
                lcb: 0.0,
                n_visits: 0,
                children: Vec::new(),
                front: None,
            }],
            actions: Vec::new(),
        }
    }
}

/// Aggregate shape of a finished search tree.
#[derive(Debug, Clone, Serialize)]
pub struct TreeStats {
    pub belief_nodes: usize,
    pub action_nodes: usize,
    pub root_visits: u64,
    pub root_children: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BeliefDumpNode {
    pub id: usize,
    pub depth: usize,
    pub visits: u64,
    pub reward_lcb: f64,
    pub edge_cost: f64,
    pub children: Vec<usize>,
    pub front: Option<Vec<RewardCostVector>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ActionDumpNode {
    pub id: usize,
    pub action_id: ActionId,
    pub visits: u64,
    pub q_mean: f64,
    pub children: Vec<(i64, usize)>,
    pub front: Option<Vec<RewardCostVector>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeSnapshot {
    pub episode: usize,
    pub beliefs: Vec<BeliefDumpNode>,
    pub actions: Vec<ActionDumpNode>,
}

/// Tree snapshots taken after each of the first N episodes.
#[derive(Debug, Clone, Serialize)]
pub struct TreeDump {
    pub episodes: Vec<TreeSnapshot>,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub action_id: ActionId,
    /// The front vector that won the reward-per-cost comparison.
    pub chosen_vector: RewardCostVector,
    /// The root Pareto set: non-dominated vectors tagged by root action.
    pub root_front: Vec<(ActionId, RewardCostVector)>,
    pub episodes: usize,
    pub stats: TreeStats,
    pub dump: Option<TreeDump>,
}

/// Plan the next action. See [`search_full`] for the diagnostic-rich variant.
pub fn search(
    data: &MeasurementSet,
    belief: &GaussianBelief,
    agent_pos: Position,
    cfg: &PlannerConfig,
    env: &SearchEnv,
    rng: &mut ChaCha8Rng,
) -> Result<ActionId> {
    search_full(data, belief, agent_pos, cfg, env, rng).map(|o| o.action_id)
}

/// [`crate::sim::Planner`] adapter running one full tree search per decision.
/// Never reports done; a trial with this planner ends by recovery or budget.
pub struct CastPlanner {
    cfg: PlannerConfig,
    rng: ChaCha8Rng,
}

impl CastPlanner {
    pub fn new(cfg: PlannerConfig, rng: ChaCha8Rng) -> Self {
        CastPlanner { cfg, rng }
    }
}

impl crate::sim::Planner for CastPlanner {
    fn next_action(&mut self, ctx: &crate::sim::PlanningContext) -> Result<crate::sim::PlanResult> {
        let id = search(ctx.data, ctx.belief, ctx.position, &self.cfg, ctx.env, &mut self.rng)?;
        Ok(crate::sim::PlanResult::Execute(id))
    }

    fn name(&self) -> &'static str {
        "cast"
    }
}

/// Run m episodes from a fresh tree and pick the root action whose Pareto
/// vector maximizes reward per unit cost.
pub fn search_full(
    data: &MeasurementSet,
    belief: &GaussianBelief,
    agent_pos: Position,
    cfg: &PlannerConfig,
    env: &SearchEnv,
    rng: &mut ChaCha8Rng,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    if env.actions.len() == 0 {
        return Err(CastError::Planning("no actions to expand".into()));
    }

    let sampler = CholeskySampler::new(belief)?;
    let mut run = SearchRun {
        tree: Tree::new(agent_pos),
        est: SequentialEstimator::from_data(belief, data)?,
        ttable: TTable::new(cfg.lcb_confidence),
        env,
        cfg,
        rng,
    };

    let mut dump = (cfg.dump_episodes > 0).then(|| TreeDump { episodes: Vec::new() });
    for episode in 0..cfg.episodes {
        let sample = sampler.draw(run.rng);
        let beta_bin = discretize(&sample, cfg.discretize_threshold);
        run.simulate(ROOT, 0, &beta_bin)?;
        debug_assert_eq!(run.est.depth(), 0);
        if let Some(dump) = dump.as_mut() {
            if episode < cfg.dump_episodes {
                dump.episodes.push(run.snapshot(episode));
            }
        }
    }

    let root_front = run.root_pareto_set()?;
    let (action_id, chosen_vector) = choose_root_action(&root_front);
    if cfg.record_returns || cfg!(debug_assertions) {
        audit_tree(&run.tree, cfg)?;
    }
    let stats = TreeStats {
        belief_nodes: run.tree.beliefs.len(),
        action_nodes: run.tree.actions.len(),
        root_visits: run.tree.beliefs[ROOT].n_visits,
        root_children: run.tree.beliefs[ROOT].children.len(),
    };
    Ok(SearchOutcome {
        action_id,
        chosen_vector,
        root_front,
        episodes: cfg.episodes,
        stats,
        dump,
    })
}

/// Highest reward-per-cost vector wins; exact ties go to the lowest action id
/// (the input is ordered by ascending action id).
fn choose_root_action(front: &[(ActionId, RewardCostVector)]) -> (ActionId, RewardCostVector) {
    let mut best = front[0];
    for &candidate in &front[1..] {
        if candidate.1.reward_rate() > best.1.reward_rate() {
            best = candidate;
        }
    }
    best
}

struct SearchRun<'a> {
    tree: Tree,
    est: SequentialEstimator,
    ttable: TTable,
    env: &'a SearchEnv,
    cfg: &'a PlannerConfig,
    rng: &'a mut ChaCha8Rng,
}

impl SearchRun<'_> {
    /// One descent step; returns the discounted reward and undiscounted cost
    /// accumulated from this node down.
    fn simulate(&mut self, node: usize, depth: usize, beta_bin: &DiscreteSample) -> Result<(f64, f64)> {
        self.tree.beliefs[node].n_visits += 1;
        if depth == self.cfg.depth {
            return Ok((0.0, 0.0));
        }

        let n_visits = self.tree.beliefs[node].n_visits;
        let mut action_node = None;
        if should_widen(n_visits, self.cfg.alpha_s) {
            action_node = self.widen(node, beta_bin)?;
        }
        let action_node = match action_node {
            Some(a) => a,
            None => self.uct_select(node),
        };

        self.tree.actions[action_node].n_visits += 1;
        let action = self.env.actions.get(self.tree.actions[action_node].action_id);
        let observation = action.dot(&beta_bin.beta_bin);
        let bucket = (observation * 1e9).round() as i64;

        let parent_pos = self.tree.beliefs[node].position;
        let child = match self.tree.actions[action_node]
            .children
            .iter()
            .find(|(b, _)| *b == bucket)
        {
            Some(&(_, id)) => id,
            None => {
                let edge_cost = crate::env::action_cost(&parent_pos, action, &self.env.cost)
                    .max(self.cfg.min_edge_cost);
                self.tree.beliefs.push(BeliefNode {
                    depth: depth + 1,
                    position: action.anchor,
                    edge_cost,
                    reward_stats: RunningStats::default(),
                    lcb: 0.0,
                    n_visits: 0,
                    children: Vec::new(),
                    front: None,
                });
                let id = self.tree.beliefs.len() - 1;
                self.tree.actions[action_node].children.push((bucket, id));
                id
            }
        };

        let resid = &beta_bin.beta_bin - self.est.mu();
        let reward = self.est.lambda_peek(action, observation, &resid);
        self.est.push(action, observation);

        {
            let child_node = &mut self.tree.beliefs[child];
            child_node.reward_stats.add(reward);
            child_node.lcb = reward_lcb(&child_node.reward_stats, &mut self.ttable);
        }

        let (cont_reward, cont_cost) = self.simulate(child, depth + 1, beta_bin)?;
        self.est.pop();

        let total_reward = reward + self.cfg.gamma * cont_reward;
        let total_cost = self.tree.beliefs[child].edge_cost + cont_cost;
        let q = total_reward / total_cost.max(RATIO_EPSILON);
        let action_data = &mut self.tree.actions[action_node];
        action_data.q_stats.add(q);
        if self.cfg.record_returns {
            action_data.returns.push(q);
        }

        self.refresh_belief_front(child)?;
        self.refresh_action_front(action_node)?;
        Ok((total_reward, total_cost))
    }

    /// Add a child for one untried action and descend it this visit.
    /// Returns `None` when every action is already expanded.
    fn widen(&mut self, node: usize, beta_bin: &DiscreteSample) -> Result<Option<usize>> {
        let mut tried = vec![false; self.env.actions.len()];
        for &child in &self.tree.beliefs[node].children {
            tried[self.tree.actions[child].action_id] = true;
        }
        let untried: Vec<ActionId> =
            (0..self.env.actions.len()).filter(|&a| !tried[a]).collect();
        if untried.is_empty() {
            return Ok(None);
        }

        let picked = match self.cfg.widening {
            WideningOrder::Random => untried[self.rng.random_range(0..untried.len())],
            WideningOrder::SampleGuided => {
                let position = self.tree.beliefs[node].position;
                let resid = &beta_bin.beta_bin - self.est.mu();
                let mut best = f64::NEG_INFINITY;
                let mut ties: Vec<ActionId> = Vec::new();
                for &id in &untried {
                    let action = self.env.actions.get(id);
                    let observation = action.dot(&beta_bin.beta_bin);
                    let gain = self.est.lambda_peek(action, observation, &resid);
                    let cost = crate::env::action_cost(&position, action, &self.env.cost)
                        .max(self.cfg.min_edge_cost);
                    let value = gain / cost.max(RATIO_EPSILON);
                    if value > best {
                        best = value;
                        ties.clear();
                        ties.push(id);
                    } else if value == best {
                        ties.push(id);
                    }
                }
                ties[self.rng.random_range(0..ties.len())]
            }
        };

        self.tree.actions.push(ActionNode {
            action_id: picked,
            n_visits: 0,
            q_stats: RunningStats::default(),
            returns: Vec::new(),
            children: Vec::new(),
            front: None,
        });
        let id = self.tree.actions.len() - 1;
        self.tree.beliefs[node].children.push(id);
        Ok(Some(id))
    }

    /// Argmax of the selection score over expanded children; ties go to the
    /// lowest action id.
    fn uct_select(&self, node: usize) -> usize {
        let belief = &self.tree.beliefs[node];
        let n_h = belief.n_visits;
        let mut best_child = belief.children[0];
        let mut best_score = f64::NEG_INFINITY;
        let mut best_action = ActionId::MAX;
        for &child in &belief.children {
            let a = &self.tree.actions[child];
            let sigma = if self.cfg.sigma_uses_variance {
                a.q_stats.sample_variance()
            } else {
                a.q_stats.sample_std()
            };
            let score = cast_uct_score(a.q_stats.mean(), sigma, n_h, a.n_visits);
            if score > best_score || (score == best_score && a.action_id < best_action) {
                best_score = score;
                best_child = child;
                best_action = a.action_id;
            }
        }
        best_child
    }

    /// Leaf: the front is the singleton (g, −c) of the incoming edge.
    /// Internal: union the children action fronts, filter, then pull the
    /// result across the incoming edge (reward discounted, costs added).
    fn refresh_belief_front(&mut self, node: usize) -> Result<()> {
        let belief = &self.tree.beliefs[node];
        let immediate = RewardCostVector::new(belief.lcb, -belief.edge_cost);
        let front = if belief.children.is_empty() {
            ParetoFront::singleton(immediate)
        } else {
            let mut union = Vec::new();
            for &child in &belief.children {
                let front = self.tree.actions[child]
                    .front
                    .as_ref()
                    .expect("visited action nodes always carry a front");
                union.extend_from_slice(front.vectors());
            }
            let filtered = pareto_filter(&union, self.cfg.pareto_cap)?;
            discount_shift(&filtered, immediate, self.cfg.gamma, self.cfg.pareto_cap)?
        };
        self.tree.beliefs[node].front = Some(front);
        Ok(())
    }

    /// Visit-count-weighted Minkowski average over the children belief fronts.
    fn refresh_action_front(&mut self, node: usize) -> Result<()> {
        let action = &self.tree.actions[node];
        let mut fronts = Vec::with_capacity(action.children.len());
        let mut weights = Vec::with_capacity(action.children.len());
        for &(_, child) in &action.children {
            let belief = &self.tree.beliefs[child];
            fronts.push(
                belief
                    .front
                    .as_ref()
                    .expect("visited belief nodes always carry a front"),
            );
            weights.push(belief.n_visits as f64);
        }
        let front = weighted_combine(&fronts, &weights, self.cfg.pareto_cap)?;
        self.tree.actions[node].front = Some(front);
        Ok(())
    }

    /// Non-dominated vectors across all root action fronts, tagged by action,
    /// assembled in ascending action id so duplicates keep the lowest id.
    fn root_pareto_set(&self) -> Result<Vec<(ActionId, RewardCostVector)>> {
        let root = &self.tree.beliefs[ROOT];
        if root.children.is_empty() {
            return Err(CastError::Planning("search expanded no root actions".into()));
        }
        let mut children: Vec<usize> = root.children.clone();
        children.sort_by_key(|&c| self.tree.actions[c].action_id);

        let mut tagged = Vec::new();
        for child in children {
            let action = &self.tree.actions[child];
            let front = action
                .front
                .as_ref()
                .expect("root children always carry a front");
            for &v in front.vectors() {
                tagged.push((action.action_id, v));
            }
        }
        let vectors: Vec<RewardCostVector> = tagged.iter().map(|&(_, v)| v).collect();
        Ok(pareto_filter_indices(&vectors)
            .into_iter()
            .map(|i| tagged[i])
            .collect())
    }

    fn snapshot(&self, episode: usize) -> TreeSnapshot {
        TreeSnapshot {
            episode,
            beliefs: self
                .tree
                .beliefs
                .iter()
                .enumerate()
                .map(|(id, b)| BeliefDumpNode {
                    id,
                    depth: b.depth,
                    visits: b.n_visits,
                    reward_lcb: b.lcb,
                    edge_cost: b.edge_cost,
                    children: b.children.clone(),
                    front: b.front.as_ref().map(|f| f.vectors().to_vec()),
                })
                .collect(),
            actions: self
                .tree
                .actions
                .iter()
                .enumerate()
                .map(|(id, a)| ActionDumpNode {
                    id,
                    action_id: a.action_id,
                    visits: a.n_visits,
                    q_mean: a.q_stats.mean(),
                    children: a.children.clone(),
                    front: a.front.as_ref().map(|f| f.vectors().to_vec()),
                })
                .collect(),
        }
    }
}

/// Structural sanity checks over a finished tree.
///
/// Bookkeeping here is the "every visit descends" variant: the widening visit
/// itself descends the new action, so visited internal nodes satisfy
/// n(h) = Σ_a n(h,a) with no creation offset.
fn audit_tree(tree: &Tree, cfg: &PlannerConfig) -> Result<()> {
    let fail = |msg: String| Err(CastError::Planning(format!("tree audit failed: {msg}")));

    for (id, belief) in tree.beliefs.iter().enumerate() {
        let budget = budget_floor(belief.n_visits, cfg.alpha_s);
        if belief.children.len() as u64 > budget {
            return fail(format!(
                "belief {id} has {} children for {} visits (budget {budget})",
                belief.children.len(),
                belief.n_visits
            ));
        }
        if !belief.children.is_empty() {
            let descents: u64 = belief
                .children
                .iter()
                .map(|&c| tree.actions[c].n_visits)
                .sum();
            if descents != belief.n_visits {
                return fail(format!(
                    "belief {id} visits {} but child descents {descents}",
                    belief.n_visits
                ));
            }
        }
        if !belief.lcb.is_finite() || belief.lcb < 0.0 {
            return fail(format!("belief {id} has invalid reward bound {}", belief.lcb));
        }
        if let Some(front) = &belief.front {
            check_front(front, &format!("belief {id}"))?;
        }
    }

    for (id, action) in tree.actions.iter().enumerate() {
        let arrivals: u64 = action
            .children
            .iter()
            .map(|&(_, c)| tree.beliefs[c].n_visits)
            .sum();
        if arrivals != action.n_visits {
            return fail(format!(
                "action node {id} visits {} but child arrivals {arrivals}",
                action.n_visits
            ));
        }
        if !action.q_stats.mean().is_finite() {
            return fail(format!("action node {id} has non-finite Q"));
        }
        if cfg.record_returns && !action.returns.is_empty() {
            let mean = action.returns.iter().sum::<f64>() / action.returns.len() as f64;
            // Relative to scale: guarded zero-cost ratios reach 1e9, where an
            // absolute 1e-10 would be finer than one ULP.
            let tolerance = 1e-10 * mean.abs().max(action.q_stats.mean().abs()).max(1.0);
            if (mean - action.q_stats.mean()).abs() > tolerance {
                return fail(format!(
                    "action node {id} running mean {} drifted from recomputed {mean}",
                    action.q_stats.mean()
                ));
            }
        }
        if let Some(front) = &action.front {
            check_front(front, &format!("action node {id}"))?;
        }
    }
    Ok(())
}

fn check_front(front: &ParetoFront, owner: &str) -> Result<()> {
    let members = front.vectors();
    for (i, a) in members.iter().enumerate() {
        if !a.is_finite() {
            return Err(CastError::Planning(format!(
                "tree audit failed: {owner} front holds a non-finite vector"
            )));
        }
        for (j, b) in members.iter().enumerate() {
            if i != j && a.dominates(b) {
                return Err(CastError::Planning(format!(
                    "tree audit failed: {owner} front is not mutually incomparable"
                )));
            }
        }
    }
    Ok(())
}
