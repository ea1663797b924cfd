use std::collections::{BTreeMap, VecDeque};

use rand::RngCore;

use super::{
    ActionId, EnvError, Environment, ImageTensor, MomdpModel, Observation, ObservationMode,
    ObservationShape, RewardVector, Step,
};

/// Shipped 10x11 map: `.` water, `#` seabed, `T` treasure.
pub const DEEP_SEA_MAP: &str = include_str!("../../data/deep_sea.map");
/// Sidecar table `column,value` for the treasures of [`DEEP_SEA_MAP`].
pub const DEEP_SEA_TREASURES: &str = include_str!("../../data/deep_sea_treasures.csv");

pub const IMAGE_CHANNELS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Cell {
    Water,
    Seabed,
    Treasure(f64),
}

/// Parsed and validated treasure map.
#[derive(Clone, Debug, PartialEq)]
pub struct DeepSeaMap {
    rows: usize,
    cols: usize,
    cells: Vec<Cell>,
    max_treasure: f64,
}

impl DeepSeaMap {
    /// Parses the grid and its `column,value` sidecar.
    ///
    /// Rejects ragged grids, treasures without a value (or values without a
    /// treasure), two treasures in one column, a blocked start cell and
    /// treasures the submarine cannot reach.
    pub fn parse(grid: &str, treasures: &str) -> Result<Self, EnvError> {
        let lines: Vec<&str> = grid
            .lines()
            .map(str::trim_end)
            .filter(|l| !l.is_empty())
            .collect();
        let rows = lines.len();
        let cols = lines.first().map_or(0, |l| l.chars().count());
        if rows == 0 || cols == 0 {
            return Err(EnvError::Config("empty map".into()));
        }

        let mut values = BTreeMap::new();
        for (n, line) in treasures.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (n == 0 && line.starts_with("column")) {
                continue;
            }
            let (col, value) = line
                .split_once(',')
                .ok_or_else(|| EnvError::Config(format!("bad treasure line {:?}", line)))?;
            let col: usize = col
                .trim()
                .parse()
                .map_err(|_| EnvError::Config(format!("bad treasure column {:?}", col)))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| EnvError::Config(format!("bad treasure value {:?}", value)))?;
            if !(value.is_finite() && value > 0.0) {
                return Err(EnvError::Config(format!(
                    "treasure value {value} must be positive"
                )));
            }
            if values.insert(col, value).is_some() {
                return Err(EnvError::Config(format!("duplicate treasure column {col}")));
            }
        }

        let mut cells = Vec::with_capacity(rows * cols);
        let mut used = BTreeMap::new();
        for (y, line) in lines.iter().enumerate() {
            if line.chars().count() != cols {
                return Err(EnvError::Config(format!("row {y} has the wrong width")));
            }
            for (x, ch) in line.chars().enumerate() {
                let cell = match ch {
                    '.' => Cell::Water,
                    '#' => Cell::Seabed,
                    'T' => {
                        let value = *values.get(&x).ok_or_else(|| {
                            EnvError::Config(format!("treasure in column {x} has no value"))
                        })?;
                        if used.insert(x, y).is_some() {
                            return Err(EnvError::Config(format!(
                                "column {x} holds more than one treasure"
                            )));
                        }
                        Cell::Treasure(value)
                    }
                    other => {
                        return Err(EnvError::Config(format!("unknown map character {other:?}")))
                    }
                };
                cells.push(cell);
            }
        }
        if let Some(col) = values.keys().find(|c| !used.contains_key(c)) {
            return Err(EnvError::Config(format!(
                "treasure value given for column {col}, which has no treasure cell"
            )));
        }
        if used.is_empty() {
            return Err(EnvError::Config("map has no treasure".into()));
        }
        let max_treasure = values.values().cloned().fold(f64::MIN, f64::max);
        let map = Self {
            rows,
            cols,
            cells,
            max_treasure,
        };
        if map.cell(0, 0) != Cell::Water {
            return Err(EnvError::Config("start cell (0,0) must be water".into()));
        }
        let reachable = map.reachable();
        if let Some((x, y)) = map
            .treasure_cells()
            .into_iter()
            .find(|&(x, y)| !reachable[y * cols + x])
        {
            return Err(EnvError::Config(format!(
                "treasure at ({x},{y}) is unreachable"
            )));
        }
        Ok(map)
    }

    pub fn classic() -> Self {
        Self::parse(DEEP_SEA_MAP, DEEP_SEA_TREASURES).expect("shipped map is valid")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn cell(&self, x: usize, y: usize) -> Cell {
        self.cells[y * self.cols + x]
    }

    pub fn is_seabed(&self, x: usize, y: usize) -> bool {
        self.cell(x, y) == Cell::Seabed
    }

    pub fn treasure_at(&self, x: usize, y: usize) -> Option<f64> {
        match self.cell(x, y) {
            Cell::Treasure(v) => Some(v),
            _ => None,
        }
    }

    pub fn max_treasure(&self) -> f64 {
        self.max_treasure
    }

    /// Treasure cells ordered by column.
    pub fn treasure_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for x in 0..self.cols {
            for y in 0..self.rows {
                if self.treasure_at(x, y).is_some() {
                    out.push((x, y));
                }
            }
        }
        out
    }

    /// Result of `mv` from `(x, y)`; walls and seabed leave the agent in place.
    pub fn apply_move(&self, x: usize, y: usize, mv: Move) -> (usize, usize) {
        let (dx, dy): (isize, isize) = match mv {
            Move::Up => (0, -1),
            Move::Down => (0, 1),
            Move::Left => (-1, 0),
            Move::Right => (1, 0),
        };
        let nx = x as isize + dx;
        let ny = y as isize + dy;
        if nx < 0 || ny < 0 || nx >= self.cols as isize || ny >= self.rows as isize {
            return (x, y);
        }
        let (nx, ny) = (nx as usize, ny as usize);
        if self.is_seabed(nx, ny) {
            (x, y)
        } else {
            (nx, ny)
        }
    }

    // BFS from the start; treasures are terminal so the search stops there.
    fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.rows * self.cols];
        let mut queue = VecDeque::from([(0usize, 0usize)]);
        seen[0] = true;
        while let Some((x, y)) = queue.pop_front() {
            if self.treasure_at(x, y).is_some() {
                continue;
            }
            for mv in Move::ALL {
                let (nx, ny) = self.apply_move(x, y, mv);
                if !seen[ny * self.cols + nx] {
                    seen[ny * self.cols + nx] = true;
                    queue.push_back((nx, ny));
                }
            }
        }
        seen
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    Up,
    Down,
    Left,
    Right,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::Up, Move::Down, Move::Left, Move::Right];

    pub fn from_action(action: ActionId) -> Option<Move> {
        Self::ALL.get(action).copied()
    }

    pub fn action(self) -> ActionId {
        self as ActionId
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeepSeaConfig {
    pub map: DeepSeaMap,
    pub horizon: usize,
    pub gamma: f64,
    pub observation_mode: ObservationMode,
}

impl Default for DeepSeaConfig {
    fn default() -> Self {
        Self {
            map: DeepSeaMap::classic(),
            horizon: 200,
            gamma: 0.97,
            observation_mode: ObservationMode::Raw,
        }
    }
}

impl DeepSeaConfig {
    pub fn image() -> Self {
        Self {
            observation_mode: ObservationMode::Image,
            ..Self::default()
        }
    }

    /// Per-step time reward, scaled so a full episode sums to -1.
    pub fn time_reward(&self) -> f64 {
        -1.0 / self.horizon as f64
    }

    /// Reward vector for arriving at `(x, y)`: normalised treasure, time.
    pub fn arrival_reward(&self, x: usize, y: usize) -> [f64; 2] {
        let treasure = self
            .map
            .treasure_at(x, y)
            .map_or(0.0, |v| v / self.map.max_treasure());
        [treasure, self.time_reward()]
    }

    fn validate(&self) -> Result<(), EnvError> {
        if self.horizon == 0 {
            return Err(EnvError::Config("horizon must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(EnvError::Config(format!(
                "gamma {} outside [0, 1]",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Explicit model over every non-seabed cell, indexed row-major.
    pub fn explicit_model(&self) -> Result<MomdpModel, EnvError> {
        self.validate()?;
        let map = &self.map;
        let mut index = vec![usize::MAX; map.rows * map.cols];
        let mut cells = Vec::new();
        for y in 0..map.rows {
            for x in 0..map.cols {
                if !map.is_seabed(x, y) {
                    index[y * map.cols + x] = cells.len();
                    cells.push((x, y));
                }
            }
        }
        let actions = Move::ALL.len();
        let mut next = Vec::with_capacity(cells.len() * actions);
        let mut rewards = Vec::with_capacity(cells.len() * actions * 2);
        let mut terminal = Vec::with_capacity(cells.len());
        for &(x, y) in &cells {
            terminal.push(map.treasure_at(x, y).is_some());
            for mv in Move::ALL {
                let (nx, ny) = map.apply_move(x, y, mv);
                next.push(index[ny * map.cols + nx]);
                rewards.extend_from_slice(&self.arrival_reward(nx, ny));
            }
        }
        MomdpModel::new(
            cells.len(),
            actions,
            2,
            next,
            rewards,
            terminal,
            index[0],
            self.gamma,
            self.horizon,
        )
    }

    /// Cell coordinates of each explicit-model state, in state order.
    pub fn model_cells(&self) -> Vec<(usize, usize)> {
        let map = &self.map;
        (0..map.rows)
            .flat_map(|y| (0..map.cols).map(move |x| (x, y)))
            .filter(|&(x, y)| !map.is_seabed(x, y))
            .collect()
    }
}

/// Deep sea treasure: a submarine trading treasure value against time.
#[derive(Clone, Debug)]
pub struct DeepSea {
    config: DeepSeaConfig,
    x: usize,
    y: usize,
    steps: usize,
    done: bool,
}

impl DeepSea {
    pub fn new(config: DeepSeaConfig) -> Result<Self, EnvError> {
        config.validate()?;
        Ok(Self {
            config,
            x: 0,
            y: 0,
            steps: 0,
            done: false,
        })
    }

    pub fn config(&self) -> &DeepSeaConfig {
        &self.config
    }

    pub fn position(&self) -> (usize, usize) {
        (self.x, self.y)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Places the agent at `(x, y)` with a fresh step counter.
    pub fn set_position(&mut self, x: usize, y: usize) -> Result<(), EnvError> {
        let map = &self.config.map;
        if x >= map.cols || y >= map.rows || map.is_seabed(x, y) {
            return Err(EnvError::Config(format!("({x},{y}) is not a water cell")));
        }
        self.x = x;
        self.y = y;
        self.steps = 0;
        self.done = map.treasure_at(x, y).is_some();
        Ok(())
    }

    /// Three one-hot planes: agent, treasures, seabed.
    pub fn render_image(&self) -> ImageTensor {
        render_image(&self.config.map, self.x, self.y)
    }
}

pub fn render_image(map: &DeepSeaMap, x: usize, y: usize) -> ImageTensor {
    let mut image = ImageTensor::zeros(IMAGE_CHANNELS, map.rows, map.cols);
    image.set(0, y, x, 1.0);
    for row in 0..map.rows {
        for col in 0..map.cols {
            match map.cell(col, row) {
                Cell::Treasure(_) => image.set(1, row, col, 1.0),
                Cell::Seabed => image.set(2, row, col, 1.0),
                Cell::Water => {}
            }
        }
    }
    image
}

impl Environment for DeepSea {
    fn num_objectives(&self) -> usize {
        2
    }

    fn num_actions(&self) -> usize {
        Move::ALL.len()
    }

    fn observation_shape(&self) -> ObservationShape {
        match self.config.observation_mode {
            ObservationMode::Raw => ObservationShape::Flat(2),
            ObservationMode::Image => ObservationShape::Image {
                channels: IMAGE_CHANNELS,
                rows: self.config.map.rows,
                cols: self.config.map.cols,
            },
        }
    }

    fn gamma(&self) -> f64 {
        self.config.gamma
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> Observation {
        self.x = 0;
        self.y = 0;
        self.steps = 0;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: ActionId) -> Result<Step, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        let mv = Move::from_action(action).ok_or(EnvError::InvalidAction {
            action,
            num_actions: Move::ALL.len(),
        })?;
        let (x, y) = self.config.map.apply_move(self.x, self.y, mv);
        self.x = x;
        self.y = y;
        self.steps += 1;
        let reward = RewardVector(self.config.arrival_reward(x, y).to_vec());
        let terminal = self.config.map.treasure_at(x, y).is_some();
        let truncated = !terminal && self.steps >= self.config.horizon;
        self.done = terminal || truncated;
        Ok(Step {
            observation: self.observe(),
            reward,
            terminal,
            truncated,
        })
    }

    fn observe(&self) -> Observation {
        match self.config.observation_mode {
            ObservationMode::Raw => {
                let map = &self.config.map;
                let sx = (map.cols - 1).max(1) as f64;
                let sy = (map.rows - 1).max(1) as f64;
                Observation::Raw(vec![self.x as f64 / sx, self.y as f64 / sy])
            }
            ObservationMode::Image => Observation::Image(self.render_image()),
        }
    }

    fn state_index(&self) -> usize {
        self.y * self.config.map.cols + self.x
    }

    fn num_state_indices(&self) -> usize {
        self.config.map.rows * self.config.map.cols
    }
}
