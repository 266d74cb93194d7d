//! Space-time A* on an 8-connected grid with wait moves.
//!
//! States are (cell, timestep); each move advances time by one step. The
//! search minimizes arrival timestep first (Chebyshev heuristic, the tight
//! admissible bound when diagonals cost one step), then geometric path cost
//! (octile heuristic), then lexicographic cell order, so results are unique
//! and match a breadth-first oracle on arrival time.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

pub type Cell = (i32, i32);

/// Collision-free trajectory through the space-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimePlan {
    /// Visited cells, one per timestep starting at t = 0.
    pub cells: Vec<(Cell, usize)>,
    /// Meters per grid cell.
    pub resolution: f64,
    /// Seconds per timestep.
    pub step_seconds: f64,
}

impl SpaceTimePlan {
    pub fn arrival_timestep(&self) -> usize {
        self.cells.last().map(|&(_, t)| t).unwrap_or(0)
    }

    /// Cell occupied at timestep `t`; the plan holds its final cell forever.
    pub fn cell_at(&self, t: usize) -> Cell {
        let idx = t.min(self.cells.len().saturating_sub(1));
        self.cells[idx].0
    }
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn chebyshev(a: Cell, b: Cell) -> usize {
    ((a.0 - b.0).abs().max((a.1 - b.1).abs())) as usize
}

fn octile(a: Cell, b: Cell) -> f64 {
    let dx = (a.0 - b.0).abs() as f64;
    let dy = (a.1 - b.1).abs() as f64;
    dx.max(dy) + (SQRT2 - 1.0) * dx.min(dy)
}

#[derive(Debug)]
struct Node {
    f_time: usize,
    f_cost: f64,
    cell: Cell,
    t: usize,
    g_cost: f64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert for lexicographic minimization.
        other
            .f_time
            .cmp(&self.f_time)
            .then_with(|| other.f_cost.partial_cmp(&self.f_cost).unwrap_or(Ordering::Equal))
            .then_with(|| other.cell.cmp(&self.cell))
            .then_with(|| other.t.cmp(&self.t))
    }
}

const MOVES: [(i32, i32, f64); 9] = [
    (0, 0, 0.0),
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, SQRT2),
    (1, -1, SQRT2),
    (-1, 1, SQRT2),
    (-1, -1, SQRT2),
];

/// Searches for a plan from `start` to `goal` that never occupies a blocked
/// (cell, timestep), arriving no later than `horizon`.
///
/// Returns `None` when the start is blocked at t = 0 or no path exists
/// within the horizon.
pub fn plan_astar(
    start: Cell,
    goal: Cell,
    blocked: &dyn Fn(Cell, usize) -> bool,
    horizon: usize,
    resolution: f64,
    step_seconds: f64,
) -> Option<SpaceTimePlan> {
    if blocked(start, 0) || chebyshev(start, goal) > horizon {
        return None;
    }

    let mut open = BinaryHeap::new();
    let mut best_cost: HashMap<(Cell, usize), f64> = HashMap::new();
    let mut parent: HashMap<(Cell, usize), (Cell, usize)> = HashMap::new();

    open.push(Node {
        f_time: chebyshev(start, goal),
        f_cost: octile(start, goal),
        cell: start,
        t: 0,
        g_cost: 0.0,
    });
    best_cost.insert((start, 0), 0.0);

    while let Some(node) = open.pop() {
        if let Some(&known) = best_cost.get(&(node.cell, node.t)) {
            if node.g_cost > known + 1e-12 {
                continue;
            }
        }
        if node.cell == goal {
            let mut cells = vec![(node.cell, node.t)];
            let mut cursor = (node.cell, node.t);
            while let Some(&prev) = parent.get(&cursor) {
                cells.push(prev);
                cursor = prev;
            }
            cells.reverse();
            return Some(SpaceTimePlan {
                cells,
                resolution,
                step_seconds,
            });
        }
        let t_next = node.t + 1;
        if t_next > horizon {
            continue;
        }
        for (dx, dy, move_cost) in MOVES {
            let cell = (node.cell.0 + dx, node.cell.1 + dy);
            if chebyshev(cell, goal) > horizon - t_next {
                continue;
            }
            if blocked(cell, t_next) {
                continue;
            }
            let g_cost = node.g_cost + move_cost;
            let key = (cell, t_next);
            if best_cost.get(&key).is_none_or(|&c| g_cost < c - 1e-12) {
                best_cost.insert(key, g_cost);
                parent.insert(key, (node.cell, node.t));
                open.push(Node {
                    f_time: t_next + chebyshev(cell, goal),
                    f_cost: g_cost + octile(cell, goal),
                    cell,
                    t: t_next,
                    g_cost,
                });
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free(_: Cell, _: usize) -> bool {
        false
    }

    /// Every returned plan must start at t = 0, advance time by exactly one
    /// step per entry, stay 8-adjacent, and avoid all blocked states.
    pub(crate) fn assert_plan_valid(
        plan: &SpaceTimePlan,
        start: Cell,
        goal: Cell,
        blocked: &dyn Fn(Cell, usize) -> bool,
    ) {
        assert_eq!(plan.cells.first().unwrap(), &(start, 0));
        assert_eq!(plan.cells.last().unwrap().0, goal);
        for (i, &(cell, t)) in plan.cells.iter().enumerate() {
            assert_eq!(t, i);
            assert!(!blocked(cell, t), "plan occupies blocked ({cell:?}, {t})");
            if i > 0 {
                let (prev, _) = plan.cells[i - 1];
                assert!((cell.0 - prev.0).abs() <= 1 && (cell.1 - prev.1).abs() <= 1);
            }
        }
    }

    #[test]
    fn straight_corridor_is_minimal() {
        let plan = plan_astar((0, 0), (10, 0), &free, 40, 1.0, 0.5).unwrap();
        assert_eq!(plan.arrival_timestep(), 10);
        assert_plan_valid(&plan, (0, 0), (10, 0), &free);
    }

    #[test]
    fn blocked_goal_yields_none() {
        let blocked = |cell: Cell, _t: usize| cell == (5, 5);
        assert!(plan_astar((0, 0), (5, 5), &blocked, 40, 1.0, 0.5).is_none());
    }

    #[test]
    fn crossing_obstacle_forces_wait_or_detour() {
        // A crossing vehicle occupies the corridor cell (3, 0) exactly at
        // t = 3; the direct plan would be there at that moment.
        let blocked = |cell: Cell, t: usize| cell == (3, 0) && t == 3;
        let plan = plan_astar((0, 0), (6, 0), &blocked, 40, 1.0, 0.5).unwrap();
        assert_plan_valid(&plan, (0, 0), (6, 0), &blocked);
        assert!(plan.arrival_timestep() <= 7);
    }

    #[test]
    fn unreachable_within_horizon_yields_none() {
        assert!(plan_astar((0, 0), (50, 0), &free, 10, 1.0, 0.5).is_none());
    }

    #[test]
    fn diagonal_uses_single_steps() {
        let plan = plan_astar((0, 0), (5, 5), &free, 40, 1.0, 0.5).unwrap();
        assert_eq!(plan.arrival_timestep(), 5);
    }

    #[test]
    fn ties_resolve_deterministically() {
        let a = plan_astar((0, 0), (4, 4), &free, 20, 1.0, 0.5).unwrap();
        let b = plan_astar((0, 0), (4, 4), &free, 20, 1.0, 0.5).unwrap();
        assert_eq!(a, b);
    }
}
