//! Order-preserving plan refinement: robots drop their waits and advance as
//! soon as the next vertex is free and it is their turn to enter it.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::exec::NONE;
use crate::grid::{Instance, Plan};
use crate::validate::validate_plan;

/// Per-vertex entry order: robot rows in the order they enter each cell,
/// excluding the initial occupants.
pub fn visit_orders(cells: usize, paths: &[Vec<usize>]) -> Vec<VecDeque<u32>> {
    let mut entries: Vec<(usize, usize, u32)> = Vec::new();
    for (r, p) in paths.iter().enumerate() {
        for t in 1..p.len() {
            if p[t] != p[t - 1] {
                entries.push((p[t], t, r as u32));
            }
        }
    }
    entries.sort_unstable();
    let mut q = vec![VecDeque::new(); cells];
    for (c, _, r) in entries {
        q[c].push_back(r);
    }
    q
}

fn compress(p: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(p.len());
    for &c in p {
        if out.last() != Some(&c) {
            out.push(c);
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Unknown,
    Pending,
    Moves,
    Stays,
}

/// Re-times a valid plan without changing any robot's vertex sequence or
/// the order in which robots visit each vertex. The result is valid and
/// never has a larger makespan.
pub fn refine_plan(inst: &Instance, plan: &Plan) -> Result<Plan> {
    let report = validate_plan(inst, plan)?;
    if !report.valid {
        return Err(Error::InvalidPlan(Box::new(report)));
    }
    let space = &inst.space;
    let n = plan.paths.len();
    let timed: Vec<Vec<usize>> = plan.paths.iter().map(|p| p.iter().map(|&c| space.index(c)).collect()).collect();
    let mut queue = visit_orders(space.num_cells(), &timed);
    let routes: Vec<Vec<usize>> = timed.iter().map(|p| compress(p)).collect();
    let mut occ = vec![NONE; space.num_cells()];
    for (r, p) in routes.iter().enumerate() {
        occ[p[0]] = r as u32;
    }
    let mut at = vec![0usize; n];
    let mut hist: Vec<Vec<usize>> = routes.iter().map(|p| vec![p[0]]).collect();
    let mut status = vec![Status::Unknown; n];
    let mut chain: Vec<usize> = Vec::new();
    let mut remaining = routes.iter().filter(|p| p.len() > 1).count();
    while remaining > 0 {
        status.fill(Status::Unknown);
        for i in 0..n {
            if status[i] != Status::Unknown {
                continue;
            }
            chain.clear();
            let mut r = i;
            let res = loop {
                match status[r] {
                    Status::Moves => break true,
                    Status::Stays => break false,
                    Status::Pending => {
                        // cycle back into the chain: rotate it atomically unless it is a swap
                        let k = chain.iter().position(|&x| x == r).expect("pending robots are on the chain");
                        let ok = chain.len() - k >= 3;
                        for x in chain.drain(k..) {
                            status[x] = if ok { Status::Moves } else { Status::Stays };
                        }
                        break ok;
                    }
                    Status::Unknown => {}
                }
                status[r] = Status::Pending;
                chain.push(r);
                if at[r] + 1 >= routes[r].len() || queue[routes[r][at[r] + 1]].front() != Some(&(r as u32)) {
                    chain.pop();
                    status[r] = Status::Stays;
                    break false;
                }
                let o = occ[routes[r][at[r] + 1]];
                if o == NONE {
                    chain.pop();
                    status[r] = Status::Moves;
                    break true;
                }
                r = o as usize;
            };
            for &x in &chain {
                status[x] = if res { Status::Moves } else { Status::Stays };
            }
        }
        let movers: Vec<usize> = (0..n).filter(|&r| status[r] == Status::Moves).collect();
        if movers.is_empty() {
            return Err(Error::Infeasible("refinement made no progress".into()));
        }
        for &r in &movers {
            occ[routes[r][at[r]]] = NONE;
        }
        for &r in &movers {
            at[r] += 1;
            let c = routes[r][at[r]];
            occ[c] = r as u32;
            queue[c].pop_front();
            if at[r] + 1 == routes[r].len() {
                remaining -= 1;
            }
        }
        for (r, h) in hist.iter_mut().enumerate() {
            h.push(routes[r][at[r]]);
        }
    }
    let horizon = hist.first().map_or(0, |h| h.len() - 1);
    let mut out = Plan {
        horizon,
        ids: plan.ids.clone(),
        paths: hist.into_iter().map(|h| h.into_iter().map(|c| space.cell(c)).collect()).collect(),
    };
    out.trim();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Cell, GridSpace};
    use crate::validate::compute_metrics;

    fn c(x: usize, y: usize) -> Cell {
        Cell::new(x, y)
    }

    #[test]
    fn drops_waits() {
        let g = GridSpace::new_2d(1, 4, &[]).unwrap();
        let inst = Instance::new(g, vec![c(0, 0)], vec![c(0, 3)]).unwrap();
        let plan = Plan { horizon: 5, ids: vec![1], paths: vec![vec![c(0, 0), c(0, 0), c(0, 1), c(0, 1), c(0, 2), c(0, 3)]] };
        let r = refine_plan(&inst, &plan).unwrap();
        assert_eq!(r.horizon, 3);
    }

    #[test]
    fn keeps_order_and_rotates_cycles() {
        let g = GridSpace::new_2d(2, 2, &[]).unwrap();
        let ring = [c(0, 0), c(0, 1), c(1, 1), c(1, 0)];
        let inst = Instance::new(g, ring[..3].to_vec(), vec![ring[1], ring[2], ring[3]]).unwrap();
        // robot 3 leaves late; the others wait for it
        let plan = Plan {
            horizon: 3,
            ids: vec![1, 2, 3],
            paths: vec![
                vec![ring[0], ring[0], ring[0], ring[1]],
                vec![ring[1], ring[1], ring[1], ring[2]],
                vec![ring[2], ring[2], ring[2], ring[3]],
            ],
        };
        let r = refine_plan(&inst, &plan).unwrap();
        assert_eq!(r.horizon, 1);
        assert!(validate_plan(&inst, &r).unwrap().valid);

        let full = Instance::new(GridSpace::new_2d(2, 2, &[]).unwrap(), ring.to_vec(), vec![ring[1], ring[2], ring[3], ring[0]]).unwrap();
        let plan = Plan {
            horizon: 2,
            ids: vec![1, 2, 3, 4],
            paths: (0..4).map(|k| vec![ring[k], ring[k], ring[(k + 1) % 4]]).collect(),
        };
        let r = refine_plan(&full, &plan).unwrap();
        assert_eq!(compute_metrics(&full, &r).unwrap().makespan, 1);
    }

    #[test]
    fn rejects_invalid_input() {
        let g = GridSpace::new_2d(1, 2, &[]).unwrap();
        let inst = Instance::new(g, vec![c(0, 0)], vec![c(0, 1)]).unwrap();
        let plan = Plan { horizon: 0, ids: vec![1], paths: vec![vec![c(0, 0)]] };
        assert!(matches!(refine_plan(&inst, &plan), Err(Error::InvalidPlan(_))));
    }
}
