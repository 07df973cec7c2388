//! Gridworld instantiations of [`EnvModel`]: Office, Delivery and Double Slit.
//!
//! Cells are addressed `(x, y)` with `x` the column and `y` the row counted
//! from the top. The state id of a cell is `y * width + x`; obstacle cells
//! are ordinary (enterable, penalised) states, so `|S| = width * height`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{contract, Result};
use crate::mdp::{ActionId, EnvModel, FeatureVector, StateId};

/// Feature value (per component) for entering an obstacle cell.
pub const OBSTACLE_PENALTY: f64 = -1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExitSpec {
    pub cell: Cell,
    /// Single-character label used by the text format.
    pub glyph: char,
    pub proposition: String,
}

/// Static description of a grid environment.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    pub width: usize,
    pub height: usize,
    /// Blocked edges between orthogonally adjacent cells, stored with the
    /// smaller cell first.
    pub walls: BTreeSet<(Cell, Cell)>,
    pub obstacles: BTreeSet<Cell>,
    /// Exits in feature order.
    pub exits: Vec<ExitSpec>,
    pub start: Option<Cell>,
    pub gamma: f64,
    /// `Some(k)`: Double Slit dynamics with wind uniform over `-k..=k`.
    pub wind: Option<u32>,
}

/// Movement actions of the four-neighbour grids.
pub mod cardinal {
    pub const UP: usize = 0;
    pub const DOWN: usize = 1;
    pub const LEFT: usize = 2;
    pub const RIGHT: usize = 3;
}

/// Actions of the Double Slit grid.
pub mod slit {
    pub const UP: usize = 0;
    pub const RIGHT: usize = 1;
    pub const DOWN: usize = 2;
}

/// Maps exit states to the proposition they make true. Non-exit states
/// make no proposition true.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropositionMap {
    labels: Vec<String>,
}

impl PropositionMap {
    pub fn new(labels: Vec<String>) -> Self {
        Self { labels }
    }

    /// Proposition of the exit in feature slot `slot`.
    pub fn label(&self, slot: usize) -> &str {
        &self.labels[slot]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// `O(s)` restricted to a single symbol.
    pub fn of_state<'a>(&'a self, env: &EnvModel, s: StateId) -> Option<&'a str> {
        env.exit_slot(s).map(|slot| self.labels[slot].as_str())
    }

    /// Distinct propositions, sorted.
    pub fn symbols(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.labels.iter().map(String::as_str).collect();
        set.into_iter().collect()
    }

    /// Exit slots that satisfy `prop`.
    pub fn slots_of(&self, prop: &str) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == prop).collect()
    }
}

fn wall_key(a: Cell, b: Cell) -> (Cell, Cell) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl GridLayout {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            walls: BTreeSet::new(),
            obstacles: BTreeSet::new(),
            exits: Vec::new(),
            start: None,
            gamma: 0.95,
            wind: None,
        }
    }

    pub fn add_wall(&mut self, a: Cell, b: Cell) {
        self.walls.insert(wall_key(a, b));
    }

    pub fn has_wall(&self, a: Cell, b: Cell) -> bool {
        self.walls.contains(&wall_key(a, b))
    }

    pub fn add_exit(&mut self, cell: Cell, glyph: char, proposition: &str) {
        self.exits.push(ExitSpec {
            cell,
            glyph,
            proposition: proposition.to_string(),
        });
    }

    pub fn state_of(&self, c: Cell) -> StateId {
        StateId(c.y * self.width + c.x)
    }

    pub fn cell_of(&self, s: StateId) -> Cell {
        Cell::new(s.0 % self.width, s.0 / self.width)
    }

    fn in_bounds(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn num_actions(&self) -> usize {
        if self.wind.is_some() {
            3
        } else {
            4
        }
    }

    /// Checks the structural invariants of a layout.
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(contract("grid has no cells"));
        }
        if self.exits.is_empty() {
            return Err(contract("grid has no exits"));
        }
        let mut cells = BTreeSet::new();
        let mut glyphs = BTreeSet::new();
        for e in &self.exits {
            if !self.in_bounds(e.cell) {
                return Err(contract(format!("exit '{}' out of bounds", e.glyph)));
            }
            if !cells.insert(e.cell) {
                return Err(contract(format!("two exits share cell ({}, {})", e.cell.x, e.cell.y)));
            }
            if !glyphs.insert(e.glyph) {
                return Err(contract(format!("duplicate exit label '{}'", e.glyph)));
            }
            if self.obstacles.contains(&e.cell) {
                return Err(contract(format!("exit '{}' placed on an obstacle", e.glyph)));
            }
            if e.proposition.is_empty() {
                return Err(contract(format!("exit '{}' has an empty proposition", e.glyph)));
            }
        }
        if self.obstacles.iter().any(|&c| !self.in_bounds(c)) {
            return Err(contract("obstacle out of bounds"));
        }
        if let Some(s) = self.start {
            if !self.in_bounds(s) {
                return Err(contract("start cell out of bounds"));
            }
        }
        for &(a, b) in &self.walls {
            if !self.in_bounds(a) || !self.in_bounds(b) || a.x.abs_diff(b.x) + a.y.abs_diff(b.y) != 1 {
                return Err(contract(format!("wall ({},{})-({},{}) does not separate adjacent cells", a.x, a.y, b.x, b.y)));
            }
        }
        if self.wind.is_some() && !self.walls.is_empty() {
            return Err(contract("walls are not supported with wind dynamics"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(contract(format!("discount {} outside [0, 1)", self.gamma)));
        }
        Ok(())
    }

    /// Deterministic four-neighbour move; walls and the border block.
    pub fn step_cardinal(&self, c: Cell, action: usize) -> Cell {
        let target = match action {
            cardinal::UP if c.y > 0 => Cell::new(c.x, c.y - 1),
            cardinal::DOWN if c.y + 1 < self.height => Cell::new(c.x, c.y + 1),
            cardinal::LEFT if c.x > 0 => Cell::new(c.x - 1, c.y),
            cardinal::RIGHT if c.x + 1 < self.width => Cell::new(c.x + 1, c.y),
            _ => return c,
        };
        if self.has_wall(c, target) {
            c
        } else {
            target
        }
    }

    /// Double Slit successor distribution before aggregation: the column
    /// drifts right (two columns for RIGHT) except in the last column, then
    /// the wind shifts the row by a uniform offset; rows are clamped.
    pub fn step_slit(&self, c: Cell, action: usize, wind: u32) -> Vec<(Cell, f64)> {
        let last = self.width - 1;
        let nx = if c.x == last {
            last
        } else {
            (c.x + if action == slit::RIGHT { 2 } else { 1 }).min(last)
        };
        let vy = c.y as i64
            + match action {
                slit::UP => -1,
                slit::DOWN => 1,
                _ => 0,
            };
        let k = wind as i64;
        let p = 1.0 / (2 * k + 1) as f64;
        (-k..=k)
            .map(|off| {
                let ny = (vy + off).clamp(0, self.height as i64 - 1) as usize;
                (Cell::new(nx, ny), p)
            })
            .collect()
    }

    fn feature_for(&self, from: Cell, to: Cell, exit_index: &BTreeMap<Cell, usize>) -> FeatureVector {
        let dim = self.exits.len();
        if !exit_index.contains_key(&from) {
            if let Some(&i) = exit_index.get(&to) {
                return FeatureVector::one_hot(dim, i);
            }
        }
        if self.obstacles.contains(&to) {
            FeatureVector::splat(dim, OBSTACLE_PENALTY)
        } else {
            FeatureVector::zeros(dim)
        }
    }

    /// Builds the tabular model and the exit-to-proposition map.
    pub fn build(&self) -> Result<(EnvModel, PropositionMap)> {
        self.validate()?;
        let n = self.width * self.height;
        let exit_index: BTreeMap<Cell, usize> = self.exits.iter().enumerate().map(|(i, e)| (e.cell, i)).collect();
        let exits = self.exits.iter().map(|e| self.state_of(e.cell)).collect();
        let free = n - self.obstacles.len();
        let initial = (0..n)
            .map(|s| if self.obstacles.contains(&self.cell_of(StateId(s))) { 0.0 } else { 1.0 / free as f64 })
            .collect();
        let mut b = EnvModel::builder(n, self.num_actions(), exits).gamma(self.gamma).initial(initial);
        if let Some(start) = self.start {
            b = b.start(self.state_of(start));
        }
        // Policies are compared by their value from the start cell; learning
        // episodes still restart anywhere.
        if let Some(start) = self.start {
            let mut reference = vec![0.0; n];
            reference[self.state_of(start).0] = 1.0;
            b = b.reference(reference);
        }
        for s in 0..n {
            let c = self.cell_of(StateId(s));
            for a in 0..self.num_actions() {
                match self.wind {
                    None => {
                        let t = self.step_cardinal(c, a);
                        let phi = self.feature_for(c, t, &exit_index);
                        b.transition(StateId(s), ActionId(a), self.state_of(t), 1.0, phi);
                    }
                    Some(k) => {
                        for (t, p) in self.step_slit(c, a, k) {
                            let phi = self.feature_for(c, t, &exit_index);
                            b.transition(StateId(s), ActionId(a), self.state_of(t), p, phi);
                        }
                    }
                }
            }
        }
        let env = b.build()?;
        let props = PropositionMap::new(self.exits.iter().map(|e| e.proposition.clone()).collect());
        Ok((env, props))
    }

    /// ASCII dump in the glyph convention of the text format.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let c = Cell::new(x, y);
                let g = if let Some(e) = self.exits.iter().find(|e| e.cell == c) {
                    e.glyph
                } else if self.obstacles.contains(&c) {
                    '#'
                } else if self.start == Some(c) {
                    'S'
                } else {
                    '.'
                };
                out.push(g);
            }
            out.push('\n');
        }
        out
    }
}

/// The Office grid: 10x10, one vertical wall splitting the upper grid,
/// two horizontal stubs, two exits for each of `coffee`, `mail` and `o`.
pub fn office_layout() -> GridLayout {
    let mut g = GridLayout::new(10, 10);
    for y in 0..=6 {
        g.add_wall(Cell::new(4, y), Cell::new(5, y));
    }
    for x in [1, 2, 7, 8] {
        g.add_wall(Cell::new(x, 4), Cell::new(x, 5));
    }
    g.add_exit(Cell::new(1, 0), '1', "coffee");
    g.add_exit(Cell::new(6, 0), '2', "coffee");
    g.add_exit(Cell::new(0, 2), '3', "mail");
    g.add_exit(Cell::new(9, 9), '4', "mail");
    g.add_exit(Cell::new(0, 9), '5', "o");
    g.add_exit(Cell::new(5, 3), '6', "o");
    g.start = Some(Cell::new(4, 7));
    g
}

/// The Delivery grid: 15x15 with a 4x4 array of 3x3 obstacle blocks and
/// exits `A`, `B`, `C`, `H` in the corridors.
pub fn delivery_layout() -> GridLayout {
    let mut g = GridLayout::new(15, 15);
    let block = |i: usize| i % 4 != 3;
    for y in 0..15 {
        for x in 0..15 {
            if block(x) && block(y) {
                g.obstacles.insert(Cell::new(x, y));
            }
        }
    }
    g.add_exit(Cell::new(1, 7), 'A', "A");
    g.add_exit(Cell::new(11, 11), 'B', "B");
    g.add_exit(Cell::new(3, 1), 'C', "C");
    g.add_exit(Cell::new(7, 13), 'H', "H");
    g.start = Some(Cell::new(7, 7));
    g
}

/// The Double Slit grid: 16 columns by 12 rows, blue exit in the top-right
/// corner, red exit in the bottom-right corner, start at the left edge.
pub fn double_slit_layout() -> GridLayout {
    let mut g = GridLayout::new(16, 12);
    g.add_exit(Cell::new(15, 0), 'B', "blue");
    g.add_exit(Cell::new(15, 11), 'R', "red");
    g.start = Some(Cell::new(0, 6));
    g.wind = Some(3);
    g
}

pub fn build_office() -> (EnvModel, PropositionMap) {
    office_layout().build().expect("office layout is valid")
}

pub fn build_delivery() -> (EnvModel, PropositionMap) {
    delivery_layout().build().expect("delivery layout is valid")
}

pub fn build_double_slit() -> (EnvModel, PropositionMap) {
    double_slit_layout().build().expect("double slit layout is valid")
}

/// Breadth-first distances over the cells of a four-neighbour grid,
/// not expanding through exit cells other than the source.
pub fn bfs_distances(layout: &GridLayout, source: Cell, avoid_obstacles: bool) -> Vec<Option<usize>> {
    let n = layout.width * layout.height;
    let mut dist = vec![None; n];
    let exits: BTreeSet<Cell> = layout.exits.iter().map(|e| e.cell).collect();
    let mut queue = alloc::collections::VecDeque::new();
    dist[layout.state_of(source).0] = Some(0);
    queue.push_back(source);
    while let Some(c) = queue.pop_front() {
        let d = dist[layout.state_of(c).0].unwrap_or(0);
        if c != source && exits.contains(&c) {
            continue;
        }
        for a in 0..4 {
            let t = layout.step_cardinal(c, a);
            if avoid_obstacles && layout.obstacles.contains(&t) {
                continue;
            }
            let k = layout.state_of(t).0;
            if dist[k].is_none() {
                dist[k] = Some(d + 1);
                queue.push_back(t);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::WeightVector;

    #[test]
    fn office_shape() {
        let (env, props) = build_office();
        assert_eq!(env.num_states(), 100);
        assert_eq!(env.dim(), 6);
        assert_eq!(props.symbols(), vec!["coffee", "mail", "o"]);
        for p in props.symbols() {
            assert_eq!(props.slots_of(p).len(), 2);
        }
        assert!(env.is_deterministic());
    }

    #[test]
    fn office_interior_feature_is_zero() {
        let g = office_layout();
        let (env, _) = g.build().unwrap();
        let s = g.state_of(Cell::new(3, 7));
        let t = g.state_of(Cell::new(3, 6));
        assert_eq!(env.feature_of(s, ActionId(cardinal::UP), t).unwrap(), &FeatureVector::zeros(6));
    }

    #[test]
    fn office_wall_blocks_and_stays() {
        let g = office_layout();
        let (env, _) = g.build().unwrap();
        let s = g.state_of(Cell::new(4, 5));
        let ts = env.transitions(s, ActionId(cardinal::RIGHT));
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].next, s);
        assert_eq!(env.feature(ts[0].feature), &FeatureVector::zeros(6));
    }

    #[test]
    fn delivery_shape_and_features() {
        let g = delivery_layout();
        let (env, props) = g.build().unwrap();
        assert_eq!(env.num_states(), 225);
        assert_eq!(env.dim(), 4);
        assert_eq!(props.labels(), ["A", "B", "C", "H"]);
        // (3, 4) is a corridor cell; (3, 5) is an obstacle.
        let s = g.state_of(Cell::new(3, 3));
        let free = g.state_of(Cell::new(3, 4));
        assert_eq!(env.feature_of(s, ActionId(cardinal::DOWN), free).unwrap(), &FeatureVector::zeros(4));
        let s = g.state_of(Cell::new(3, 4));
        let blocked = g.state_of(Cell::new(2, 4));
        let phi = env.feature_of(s, ActionId(cardinal::LEFT), blocked).unwrap();
        assert_eq!(phi, &FeatureVector::splat(4, OBSTACLE_PENALTY));
        assert_eq!(crate::reward(&WeightVector::uniform(4), phi).unwrap(), -1000.0);
        assert_eq!(g.obstacles.len(), 144);
    }

    #[test]
    fn exit_counts_match_enumeration() {
        for g in [office_layout(), delivery_layout(), double_slit_layout()] {
            let (env, _) = g.build().unwrap();
            let count = (0..env.num_states()).filter(|&s| env.is_terminal(StateId(s))).count();
            assert_eq!(count, env.dim());
        }
        let g = delivery_layout();
        let (env, _) = g.build().unwrap();
        assert!(env.is_terminal(g.state_of(Cell::new(1, 7))));
    }

    #[test]
    fn double_slit_right_moves_two_columns() {
        let g = double_slit_layout();
        for x in 0..=g.width - 3 {
            for (c, _) in g.step_slit(Cell::new(x, 6), slit::RIGHT, 3) {
                assert_eq!(c.x, x + 2);
            }
        }
        for (c, _) in g.step_slit(Cell::new(14, 6), slit::RIGHT, 3) {
            assert_eq!(c.x, 15);
        }
        for (c, _) in g.step_slit(Cell::new(15, 6), slit::UP, 3) {
            assert_eq!(c.x, 15);
            assert!(c.y.abs_diff(5) <= 3);
        }
    }

    #[test]
    fn double_slit_rows_sum_to_one() {
        let (env, _) = build_double_slit();
        for s in 0..env.num_states() {
            for a in 0..3 {
                let total: f64 = env.transitions(StateId(s), ActionId(a)).iter().map(|t| t.prob).sum();
                assert!((total - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn validate_rejects_duplicate_glyphs_and_overlap() {
        let mut g = GridLayout::new(3, 3);
        g.add_exit(Cell::new(0, 0), 'A', "a");
        g.add_exit(Cell::new(1, 0), 'A', "b");
        assert!(g.validate().is_err());
        let mut g = GridLayout::new(3, 3);
        g.add_exit(Cell::new(0, 0), 'A', "a");
        g.obstacles.insert(Cell::new(0, 0));
        assert!(g.validate().is_err());
    }

    #[test]
    fn office_nearest_coffee_bfs() {
        let g = office_layout();
        let d = bfs_distances(&g, g.start.unwrap(), false);
        let c1 = d[g.state_of(Cell::new(1, 0)).0].unwrap();
        let c2 = d[g.state_of(Cell::new(6, 0)).0].unwrap();
        // Frozen from the layout: west of the wall up column 4, or around its foot.
        assert_eq!((c1, c2), (10, 9));
    }
}
