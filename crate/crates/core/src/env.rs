//! Search space, sensing actions, observations, and costs.
//!
//! The world is a square grid of cells, each either holding a target or not.
//! Agents gather linear measurements of the flattened target vector through
//! *region senses*: every axis-aligned power-of-two block from the full grid
//! down to single cells, arranged as a spatial pyramid. A region's weight
//! vector spreads constant sensing power over its cells (unit L2 norm), so
//! coarse senses trade per-cell resolution for coverage.
//!
//! Costs are time: Euclidean travel between positions at constant speed, plus
//! a flat per-sense duration.

use nalgebra::DVector;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CastError, Result};

/// Stable index into the action space.
pub type ActionId = usize;

/// A point in the plane, in meters. `x` runs along columns, `y` along rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Geometry of the search space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    /// Side length of one cell, meters.
    pub cell_width: f64,
    /// Agent movement speed, meters per second.
    pub speed: f64,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize, cell_width: f64, speed: f64) -> Result<Self> {
        let spec = GridSpec { rows, cols, cell_width, speed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(CastError::Config("grid must have at least one cell".into()));
        }
        if !(self.cell_width > 0.0) || !(self.speed > 0.0) {
            return Err(CastError::Config(format!(
                "cell_width and speed must be positive (got {} and {})",
                self.cell_width, self.speed
            )));
        }
        Ok(())
    }

    /// Flattened cell count.
    pub fn n(&self) -> usize {
        self.rows * self.cols
    }

    pub fn cell_index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    /// Center of cell `(row, col)` in meters.
    pub fn cell_center(&self, row: usize, col: usize) -> Position {
        Position::new(
            (col as f64 + 0.5) * self.cell_width,
            (row as f64 + 0.5) * self.cell_width,
        )
    }
}

/// Sparse target vector: which cells hold a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub n: usize,
    pub k: usize,
    /// Sorted flat indices of the target cells.
    pub target_indices: Vec<usize>,
}

impl GroundTruth {
    pub fn from_indices(n: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(CastError::InvalidInput(format!(
                "target index {bad} out of range for n = {n}"
            )));
        }
        Ok(GroundTruth { n, k: indices.len(), target_indices: indices })
    }

    /// Draw `k` distinct target cells uniformly at random.
    pub fn sample_uniform(grid: &GridSpec, k: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let n = grid.n();
        if k > n {
            return Err(CastError::Config(format!("k = {k} exceeds cell count {n}")));
        }
        let indices = rand::seq::index::sample(rng, n, k).into_vec();
        GroundTruth::from_indices(n, indices)
    }

    /// Dense 0/1 vector.
    pub fn beta(&self) -> DVector<f64> {
        let mut beta = DVector::zeros(self.n);
        for &i in &self.target_indices {
            beta[i] = 1.0;
        }
        beta
    }

    pub fn is_target(&self, index: usize) -> bool {
        self.target_indices.binary_search(&index).is_ok()
    }
}

/// Where the agent stands to execute a region sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorMode {
    /// Geometric center of the region.
    #[default]
    Center,
    /// The region's minimum-coordinate corner.
    Corner,
}

/// One region sense: a square block of cells observed with constant power.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensingAction {
    pub action_id: ActionId,
    pub row_offset: usize,
    pub col_offset: usize,
    /// Block side length in cells; a power of two.
    pub side: usize,
    /// Per-cell weight, `1/side`, which normalizes the weight vector to unit L2 norm.
    pub weight: f64,
    /// Flat indices of the region's cells, row-major.
    pub cells: Vec<usize>,
    /// Standing position for execution, meters.
    pub anchor: Position,
}

impl SensingAction {
    /// Dense weight vector of length `n` (value `weight` on the region, 0 elsewhere).
    pub fn weight_vector(&self, n: usize) -> DVector<f64> {
        let mut x = DVector::zeros(n);
        for &i in &self.cells {
            x[i] = self.weight;
        }
        x
    }

    /// `xᵀ v` against a dense vector, using the region's sparsity.
    pub fn dot(&self, v: &DVector<f64>) -> f64 {
        self.weight * self.cells.iter().map(|&i| v[i]).sum::<f64>()
    }

    /// Noiseless observation of a truth: (targets inside region) / side.
    pub fn noiseless_observation(&self, truth: &GroundTruth) -> f64 {
        let hits = self.cells.iter().filter(|&&i| truth.is_target(i)).count();
        self.weight * hits as f64
    }
}

/// The full spatial pyramid over a grid.
///
/// Level 0 is the whole grid; each level quarters the block side until single
/// cells. Ids are level-major (coarse to fine), row-major within a level, so
/// id 0 is always the full-grid sense and the last `n` ids are point senses.
#[derive(Debug, Clone)]
pub struct ActionSpace {
    grid: GridSpec,
    actions: Vec<SensingAction>,
    /// Id of the point sense for each cell, indexed by flat cell index.
    point_ids: Vec<ActionId>,
}

/// Number of pyramid actions for a `2^L × 2^L` grid: `(4^(L+1) − 1) / 3`.
pub fn pyramid_action_count(levels: u32) -> usize {
    ((4usize.pow(levels + 1)) - 1) / 3
}

pub fn build_action_space(grid: &GridSpec) -> Result<ActionSpace> {
    ActionSpace::build(grid, AnchorMode::Center)
}

impl ActionSpace {
    pub fn build(grid: &GridSpec, anchor_mode: AnchorMode) -> Result<Self> {
        grid.validate()?;
        if grid.rows != grid.cols {
            return Err(CastError::Config(format!(
                "pyramid sensing needs a square grid, got {}x{}",
                grid.rows, grid.cols
            )));
        }
        if !grid.rows.is_power_of_two() {
            return Err(CastError::Config(format!(
                "pyramid sensing needs a power-of-two side, got {}",
                grid.rows
            )));
        }

        let levels = grid.rows.trailing_zeros();
        let mut actions = Vec::with_capacity(pyramid_action_count(levels));
        for level in 0..=levels {
            let side = grid.rows >> level;
            let blocks = grid.rows / side;
            let weight = 1.0 / side as f64;
            for block_row in 0..blocks {
                for block_col in 0..blocks {
                    let row_offset = block_row * side;
                    let col_offset = block_col * side;
                    let mut cells = Vec::with_capacity(side * side);
                    for r in row_offset..row_offset + side {
                        for c in col_offset..col_offset + side {
                            cells.push(grid.cell_index(r, c));
                        }
                    }
                    let anchor = match anchor_mode {
                        AnchorMode::Center => Position::new(
                            (col_offset as f64 + side as f64 / 2.0) * grid.cell_width,
                            (row_offset as f64 + side as f64 / 2.0) * grid.cell_width,
                        ),
                        AnchorMode::Corner => Position::new(
                            col_offset as f64 * grid.cell_width,
                            row_offset as f64 * grid.cell_width,
                        ),
                    };
                    actions.push(SensingAction {
                        action_id: actions.len(),
                        row_offset,
                        col_offset,
                        side,
                        weight,
                        cells,
                        anchor,
                    });
                }
            }
        }

        let point_base = actions.len() - grid.n();
        let point_ids = (point_base..actions.len()).collect();
        Ok(ActionSpace { grid: *grid, actions, point_ids })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, id: ActionId) -> &SensingAction {
        &self.actions[id]
    }

    pub fn iter(&self) -> impl Iterator<Item = &SensingAction> {
        self.actions.iter()
    }

    /// Id of the single-cell sense covering `(row, col)`.
    pub fn point_sense_id(&self, row: usize, col: usize) -> ActionId {
        self.point_ids[self.grid.cell_index(row, col)]
    }
}

/// Time cost parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Flat duration of one sense, seconds (`c_s`).
    pub sensing_cost: f64,
    /// Travel speed, meters per second.
    pub speed: f64,
}

impl CostModel {
    pub fn new(sensing_cost: f64, speed: f64) -> Result<Self> {
        if sensing_cost < 0.0 {
            return Err(CastError::Config("sensing_cost must be >= 0".into()));
        }
        if !(speed > 0.0) {
            return Err(CastError::Config("speed must be positive".into()));
        }
        Ok(CostModel { sensing_cost, speed })
    }
}

/// Travel time between two positions: Euclidean distance over speed.
pub fn travel_cost(from: &Position, to: &Position, model: &CostModel) -> f64 {
    from.distance(to) / model.speed
}

/// Total time to walk to an action's anchor and execute it.
pub fn action_cost(agent_pos: &Position, action: &SensingAction, model: &CostModel) -> f64 {
    travel_cost(agent_pos, &action.anchor, model) + model.sensing_cost
}

/// Additive Gaussian observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma2: f64,
}

impl NoiseModel {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(CastError::Config("sigma2 must be positive".into()));
        }
        Ok(NoiseModel { sigma2 })
    }
}

/// One completed sense.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub action_id: ActionId,
    pub observation: f64,
    pub agent_id: usize,
    pub wall_time: f64,
}

/// Noisy linear observation: `xᵀβ + ε`, `ε ~ N(0, σ²)`.
pub fn observe(
    action: &SensingAction,
    truth: &GroundTruth,
    noise: &NoiseModel,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let normal = Normal::new(0.0, noise.sigma2.sqrt()).expect("validated sigma2");
    action.noiseless_observation(truth) + normal.sample(rng)
}

/// Everything fixed about a scenario except the truth: geometry, actions, costs, noise.
#[derive(Debug, Clone)]
pub struct SearchEnv {
    pub grid: GridSpec,
    pub actions: ActionSpace,
    pub cost: CostModel,
    pub noise: NoiseModel,
}

impl SearchEnv {
    pub fn new(grid: GridSpec, sensing_cost: f64, sigma2: f64, anchor_mode: AnchorMode) -> Result<Self> {
        let actions = ActionSpace::build(&grid, anchor_mode)?;
        let cost = CostModel::new(sensing_cost, grid.speed)?;
        let noise = NoiseModel::new(sigma2)?;
        Ok(SearchEnv { grid, actions, cost, noise })
    }
}
