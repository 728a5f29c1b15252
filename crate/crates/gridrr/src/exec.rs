//! Cell-level motion fragments and an executor that turns them into robot paths.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::grid::{GridSpace, Plan, RobotId};

pub const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Move {
    pub from: u32,
    pub to: u32,
}

impl Move {
    pub fn new(from: usize, to: usize) -> Self {
        Move { from: from as u32, to: to as u32 }
    }
}

/// A timed sequence of parallel cell moves. Step `t` holds the moves
/// performed between time `t` and `t + 1`, relative to the fragment start.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Fragment {
    pub steps: Vec<Vec<Move>>,
}

impl Fragment {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn step(&mut self, t: usize) -> &mut Vec<Move> {
        if self.steps.len() <= t {
            self.steps.resize_with(t + 1, Vec::new);
        }
        &mut self.steps[t]
    }

    pub fn push(&mut self, t: usize, from: usize, to: usize) {
        self.step(t).push(Move::new(from, to));
    }

    /// Runs `other` during the same time window. Caller guarantees disjoint regions.
    pub fn merge_parallel(&mut self, other: Fragment) {
        for (t, s) in other.steps.into_iter().enumerate() {
            self.step(t).extend(s);
        }
    }

    /// Runs `other` after this fragment ends.
    pub fn append(&mut self, other: Fragment) {
        self.steps.extend(other.steps);
    }

    pub fn reversed(&self) -> Fragment {
        Fragment {
            steps: self
                .steps
                .iter()
                .rev()
                .map(|s| s.iter().map(|m| Move { from: m.to, to: m.from }).collect())
                .collect(),
        }
    }

    /// Removes the motion of the robots that start on `cells`. Dropping robots
    /// from a valid fragment never creates a conflict.
    pub fn without_robots_at(&self, cells: &[usize]) -> Fragment {
        let mut ghost: HashSet<u32> = cells.iter().map(|&c| c as u32).collect();
        let mut out = Fragment::default();
        for s in &self.steps {
            let (moved, kept): (Vec<Move>, Vec<Move>) = s.iter().partition(|m| ghost.contains(&m.from));
            for m in &moved {
                ghost.remove(&m.from);
            }
            ghost.extend(moved.iter().map(|m| m.to));
            out.steps.push(kept);
        }
        out.trim();
        out
    }

    /// Drops trailing empty steps.
    pub fn trim(&mut self) {
        while self.steps.last().is_some_and(|s| s.is_empty()) {
            self.steps.pop();
        }
    }
}

/// Tracks robot positions while fragments are applied, checking every step.
pub struct Executor<'a> {
    space: &'a GridSpace,
    pos: Vec<u32>,
    occ: Vec<u32>,
    hist: Vec<Vec<u32>>,
    dest: Vec<u32>,
}

impl<'a> Executor<'a> {
    pub fn new(space: &'a GridSpace, starts: &[usize]) -> Result<Self> {
        let mut occ = vec![NONE; space.num_cells()];
        for (r, &c) in starts.iter().enumerate() {
            if occ[c] != NONE {
                return Err(Error::Contract("two robots share a start cell".into()));
            }
            occ[c] = r as u32;
        }
        Ok(Executor {
            space,
            pos: starts.iter().map(|&c| c as u32).collect(),
            occ,
            hist: starts.iter().map(|&c| vec![c as u32]).collect(),
            dest: vec![NONE; starts.len()],
        })
    }

    pub fn time(&self) -> usize {
        self.hist.first().map_or(0, |h| h.len() - 1)
    }

    pub fn pos(&self) -> &[u32] {
        &self.pos
    }

    pub fn occupant(&self, cell: usize) -> Option<usize> {
        let r = self.occ[cell];
        (r != NONE).then_some(r as usize)
    }

    pub fn occupancy(&self) -> &[u32] {
        &self.occ
    }

    pub fn apply(&mut self, frag: &Fragment) -> Result<()> {
        for s in &frag.steps {
            self.apply_step(s)?;
        }
        Ok(())
    }

    pub fn apply_step(&mut self, moves: &[Move]) -> Result<()> {
        let t = self.time();
        let mut movers = Vec::with_capacity(moves.len());
        for m in moves {
            let (u, v) = (m.from as usize, m.to as usize);
            let r = self.occ[u];
            if r == NONE {
                return Err(Error::Contract(format!("step {t}: move from empty cell {:?}", self.space.cell(u))));
            }
            if !self.space.is_free(v) || !self.space.cell(u).is_adjacent(self.space.cell(v)) {
                return Err(Error::Contract(format!(
                    "step {t}: illegal move {:?} -> {:?}",
                    self.space.cell(u),
                    self.space.cell(v)
                )));
            }
            if self.dest[r as usize] != NONE {
                return Err(Error::Contract(format!("step {t}: robot moved twice")));
            }
            self.dest[r as usize] = m.to;
            movers.push(r);
        }
        for m in moves {
            let other = self.occ[m.to as usize];
            if other != NONE && self.dest[other as usize] == m.from {
                return Err(Error::Contract(format!("step {t}: swap across {:?}", self.space.cell(m.from as usize))));
            }
        }
        for m in moves {
            self.occ[m.from as usize] = NONE;
        }
        for (m, &r) in moves.iter().zip(&movers) {
            let v = m.to as usize;
            if self.occ[v] != NONE {
                return Err(Error::Contract(format!("step {t}: vertex conflict at {:?}", self.space.cell(v))));
            }
            self.occ[v] = r;
            self.pos[r as usize] = m.to;
        }
        for &r in &movers {
            self.dest[r as usize] = NONE;
        }
        for (h, &p) in self.hist.iter_mut().zip(&self.pos) {
            h.push(p);
        }
        Ok(())
    }

    pub fn wait(&mut self, steps: usize) {
        for _ in 0..steps {
            for (h, &p) in self.hist.iter_mut().zip(&self.pos) {
                h.push(p);
            }
        }
    }

    pub fn into_plan(self, ids: &[RobotId]) -> Plan {
        let space = self.space;
        let horizon = self.time();
        Plan {
            horizon,
            ids: ids.to_vec(),
            paths: self.hist.into_iter().map(|h| h.into_iter().map(|c| space.cell(c as usize)).collect()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Cell;

    fn setup() -> GridSpace {
        GridSpace::new_2d(2, 3, &[]).unwrap()
    }

    #[test]
    fn rotation_applies() {
        let g = setup();
        let ring: Vec<usize> = [(0, 0), (0, 1), (1, 1), (1, 0)].iter().map(|&(x, y)| g.index(Cell::new(x, y))).collect();
        let mut ex = Executor::new(&g, &ring).unwrap();
        let step: Vec<Move> = (0..4).map(|k| Move::new(ring[k], ring[(k + 1) % 4])).collect();
        ex.apply_step(&step).unwrap();
        assert_eq!(ex.pos()[0] as usize, ring[1]);
        assert_eq!(ex.pos()[3] as usize, ring[0]);
    }

    #[test]
    fn swap_rejected() {
        let g = setup();
        let (a, b) = (g.index(Cell::new(0, 0)), g.index(Cell::new(0, 1)));
        let mut ex = Executor::new(&g, &[a, b]).unwrap();
        assert!(ex.apply_step(&[Move::new(a, b), Move::new(b, a)]).is_err());
    }

    #[test]
    fn following_allowed_and_collision_rejected() {
        let g = setup();
        let c: Vec<usize> = (0..3).map(|y| g.index(Cell::new(0, y))).collect();
        let mut ex = Executor::new(&g, &[c[0], c[1]]).unwrap();
        ex.apply_step(&[Move::new(c[1], c[2]), Move::new(c[0], c[1])]).unwrap();
        let mut ex = Executor::new(&g, &[c[0], c[2]]).unwrap();
        assert!(ex.apply_step(&[Move::new(c[0], c[1]), Move::new(c[2], c[1])]).is_err());
        let mut ex = Executor::new(&g, &[c[0], c[1]]).unwrap();
        assert!(ex.apply_step(&[Move::new(c[0], c[1])]).is_err());
    }

    #[test]
    fn reversed_fragment_undoes() {
        let g = setup();
        let c: Vec<usize> = (0..3).map(|y| g.index(Cell::new(0, y))).collect();
        let mut f = Fragment::default();
        f.push(0, c[0], c[1]);
        f.push(1, c[1], c[2]);
        let mut ex = Executor::new(&g, &[c[0]]).unwrap();
        ex.apply(&f).unwrap();
        ex.apply(&f.reversed()).unwrap();
        assert_eq!(ex.pos()[0] as usize, c[0]);
        assert_eq!(ex.time(), 4);
    }
}
