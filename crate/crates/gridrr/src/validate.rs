//! Plan validation under the vertex/swap collision model, metrics and lower bounds.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::grid::{Instance, Plan, RobotId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ViolationKind {
    Vertex,
    Swap,
    Adjacency,
    Endpoint,
    Obstacle,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub time: usize,
    pub robots: Vec<RobotId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

pub type OptimalityRatio = Ratio<u64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Metrics {
    pub makespan: u64,
    pub soc: u64,
    pub lower_bound: u64,
    pub ratio: OptimalityRatio,
}

impl Metrics {
    pub fn ratio_f64(&self) -> f64 {
        *self.ratio.numer() as f64 / *self.ratio.denom() as f64
    }
}

/// Maps each plan row to its instance robot index.
fn align(inst: &Instance, plan: &Plan) -> Result<Vec<usize>> {
    if plan.ids.len() != plan.paths.len() {
        return Err(Error::Dimension("plan ids and paths differ in length".into()));
    }
    let mut by_id: Vec<(RobotId, usize)> = inst.ids.iter().copied().zip(0..).collect();
    by_id.sort_unstable();
    let mut seen = vec![false; inst.len()];
    let mut rows = Vec::with_capacity(plan.ids.len());
    for (k, id) in plan.ids.iter().enumerate() {
        let i = match by_id.binary_search_by_key(id, |e| e.0) {
            Ok(p) => by_id[p].1,
            Err(_) => return Err(Error::Dimension(format!("plan robot {id} is not in the instance"))),
        };
        if seen[i] {
            return Err(Error::Dimension(format!("plan lists robot {id} twice")));
        }
        seen[i] = true;
        if plan.paths[k].len() != plan.horizon + 1 {
            return Err(Error::Dimension(format!(
                "path of robot {id} has length {} but horizon is {}",
                plan.paths[k].len(),
                plan.horizon
            )));
        }
        rows.push(i);
    }
    for i in 0..inst.len() {
        if !seen[i] && !inst.virtual_mask[i] {
            return Err(Error::Dimension(format!("plan has no path for robot {}", inst.ids[i])));
        }
    }
    Ok(rows)
}

pub fn validate_plan(inst: &Instance, plan: &Plan) -> Result<ValidationReport> {
    let rows = align(inst, plan)?;
    let space = &inst.space;
    let n = plan.paths.len();
    let mut out = Vec::new();

    for (k, &i) in rows.iter().enumerate() {
        if inst.virtual_mask[i] {
            continue;
        }
        let p = &plan.paths[k];
        if p[0] != inst.starts[i] {
            out.push(Violation { kind: ViolationKind::Endpoint, time: 0, robots: vec![plan.ids[k]] });
        }
        if p[plan.horizon] != inst.goals[i] {
            out.push(Violation { kind: ViolationKind::Endpoint, time: plan.horizon, robots: vec![plan.ids[k]] });
        }
    }

    // occupancy stamps: stamp[c] = t+1 when written at time t, who[c] = plan row
    let cells = space.num_cells();
    let mut stamp_prev = vec![0u32; cells];
    let mut who_prev = vec![0u32; cells];
    let mut stamp_cur = vec![0u32; cells];
    let mut who_cur = vec![0u32; cells];
    let mut idx_prev = vec![usize::MAX; n];
    let mut idx_cur = vec![usize::MAX; n];

    for t in 0..=plan.horizon {
        let st = t as u32 + 1;
        for k in 0..n {
            let c = plan.paths[k][t];
            if !space.contains(c) || (!space.is_3d() && c.z != 0) || !space.is_free(space.index(c)) {
                out.push(Violation { kind: ViolationKind::Obstacle, time: t, robots: vec![plan.ids[k]] });
                idx_cur[k] = usize::MAX;
                continue;
            }
            let ci = space.index(c);
            idx_cur[k] = ci;
            if stamp_cur[ci] == st {
                let other = who_cur[ci] as usize;
                out.push(Violation {
                    kind: ViolationKind::Vertex,
                    time: t,
                    robots: vec![plan.ids[other], plan.ids[k]],
                });
            } else {
                stamp_cur[ci] = st;
                who_cur[ci] = k as u32;
            }
        }
        if t > 0 {
            for k in 0..n {
                let a = plan.paths[k][t - 1];
                let b = plan.paths[k][t];
                if a != b && !a.is_adjacent(b) {
                    out.push(Violation { kind: ViolationKind::Adjacency, time: t, robots: vec![plan.ids[k]] });
                    continue;
                }
                let (u, v) = (idx_prev[k], idx_cur[k]);
                if u == v || u == usize::MAX || v == usize::MAX {
                    continue;
                }
                // robot j sat on v at t-1 and is on u at t
                if stamp_prev[v] == st - 1 {
                    let j = who_prev[v] as usize;
                    if j != k && idx_cur[j] == u && k < j {
                        out.push(Violation {
                            kind: ViolationKind::Swap,
                            time: t,
                            robots: vec![plan.ids[k], plan.ids[j]],
                        });
                    }
                }
            }
        }
        std::mem::swap(&mut stamp_prev, &mut stamp_cur);
        std::mem::swap(&mut who_prev, &mut who_cur);
        std::mem::swap(&mut idx_prev, &mut idx_cur);
    }

    Ok(ValidationReport { valid: out.is_empty(), violations: out })
}

/// Max over real robots of the start-goal Manhattan distance.
pub fn makespan_lower_bound(inst: &Instance) -> u64 {
    (0..inst.len())
        .filter(|&i| !inst.virtual_mask[i])
        .map(|i| inst.starts[i].manhattan(inst.goals[i]) as u64)
        .max()
        .unwrap_or(0)
}

/// First time after which the path never leaves `goal`.
pub(crate) fn arrival(path: &[crate::grid::Cell], goal: crate::grid::Cell) -> usize {
    let mut t = path.len();
    while t > 0 && path[t - 1] == goal {
        t -= 1;
    }
    t
}

pub fn compute_metrics(inst: &Instance, plan: &Plan) -> Result<Metrics> {
    let report = validate_plan(inst, plan)?;
    if !report.valid {
        return Err(Error::InvalidPlan(Box::new(report)));
    }
    let rows = align(inst, plan)?;
    let mut makespan = 0u64;
    let mut soc = 0u64;
    for (k, &i) in rows.iter().enumerate() {
        if inst.virtual_mask[i] {
            continue;
        }
        let a = arrival(&plan.paths[k], inst.goals[i]) as u64;
        makespan = makespan.max(a);
        soc += a;
    }
    let lower_bound = makespan_lower_bound(inst);
    Ok(Metrics { makespan, soc, lower_bound, ratio: Ratio::new(makespan.max(1), lower_bound.max(1)) })
}

pub fn strip_virtual(inst: &Instance, plan: &Plan) -> Plan {
    let mut virt: Vec<RobotId> = (0..inst.len()).filter(|&i| inst.virtual_mask[i]).map(|i| inst.ids[i]).collect();
    if virt.is_empty() {
        return plan.clone();
    }
    virt.sort_unstable();
    let keep: Vec<usize> = (0..plan.ids.len()).filter(|&k| virt.binary_search(&plan.ids[k]).is_err()).collect();
    Plan {
        horizon: plan.horizon,
        ids: keep.iter().map(|&k| plan.ids[k]).collect(),
        paths: keep.iter().map(|&k| plan.paths[k].clone()).collect(),
    }
}

/// Instance restricted to its real robots.
pub fn real_instance(inst: &Instance) -> Instance {
    let keep: Vec<usize> = (0..inst.len()).filter(|&i| !inst.virtual_mask[i]).collect();
    Instance {
        space: inst.space.clone(),
        ids: keep.iter().map(|&i| inst.ids[i]).collect(),
        starts: keep.iter().map(|&i| inst.starts[i]).collect(),
        goals: keep.iter().map(|&i| inst.goals[i]).collect(),
        virtual_mask: vec![false; keep.len()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Cell, GridSpace};

    fn c(x: usize, y: usize) -> Cell {
        Cell::new(x, y)
    }

    #[test]
    fn identity_plan_is_valid() {
        let g = GridSpace::new_2d(3, 3, &[]).unwrap();
        let inst = Instance::new(g, vec![c(0, 0), c(2, 2)], vec![c(0, 0), c(2, 2)]).unwrap();
        let plan = Plan::waiting(&inst);
        assert!(validate_plan(&inst, &plan).unwrap().valid);
        let m = compute_metrics(&inst, &plan).unwrap();
        assert_eq!((m.makespan, m.soc, m.lower_bound), (0, 0, 0));
        assert_eq!(m.ratio, Ratio::from_integer(1));
    }

    #[test]
    fn adjacent_exchange_is_a_swap() {
        let g = GridSpace::new_2d(1, 2, &[]).unwrap();
        let inst = Instance::new(g, vec![c(0, 0), c(0, 1)], vec![c(0, 1), c(0, 0)]).unwrap();
        let plan = Plan { horizon: 1, ids: vec![1, 2], paths: vec![vec![c(0, 0), c(0, 1)], vec![c(0, 1), c(0, 0)]] };
        let r = validate_plan(&inst, &plan).unwrap();
        assert!(!r.valid);
        assert_eq!(r.count(ViolationKind::Swap), 1);
    }

    #[test]
    fn three_cycle_rotation_on_square_is_legal() {
        let g = GridSpace::new_2d(2, 2, &[]).unwrap();
        let ring = [c(0, 0), c(0, 1), c(1, 1), c(1, 0)];
        let starts = vec![ring[0], ring[1], ring[2]];
        let goals = vec![ring[1], ring[2], ring[3]];
        let inst = Instance::new(g, starts.clone(), goals.clone()).unwrap();
        let plan = Plan {
            horizon: 1,
            ids: vec![1, 2, 3],
            paths: (0..3).map(|i| vec![starts[i], goals[i]]).collect(),
        };
        assert!(validate_plan(&inst, &plan).unwrap().valid);
    }

    #[test]
    fn detects_vertex_adjacency_obstacle_endpoint() {
        let g = GridSpace::new_2d(3, 3, &[c(1, 1)]).unwrap();
        let inst = Instance::new(g, vec![c(0, 0), c(0, 2)], vec![c(0, 1), c(2, 2)]).unwrap();
        let plan = Plan {
            horizon: 2,
            ids: vec![1, 2],
            paths: vec![vec![c(0, 0), c(0, 1), c(0, 1)], vec![c(0, 2), c(0, 1), c(2, 1)]],
        };
        let r = validate_plan(&inst, &plan).unwrap();
        assert_eq!(r.count(ViolationKind::Vertex), 1);
        assert_eq!(r.count(ViolationKind::Adjacency), 1);
        assert_eq!(r.count(ViolationKind::Endpoint), 1);
        let plan2 = Plan { horizon: 1, ids: vec![1, 2], paths: vec![vec![c(0, 0), c(1, 1)], vec![c(0, 2), c(0, 2)]] };
        assert!(validate_plan(&inst, &plan2).unwrap().count(ViolationKind::Obstacle) >= 1);
    }

    #[test]
    fn structural_mismatch_is_an_error() {
        let g = GridSpace::new_2d(2, 2, &[]).unwrap();
        let inst = Instance::new(g, vec![c(0, 0)], vec![c(0, 0)]).unwrap();
        let plan = Plan { horizon: 2, ids: vec![1], paths: vec![vec![c(0, 0)]] };
        assert!(validate_plan(&inst, &plan).is_err());
    }

    #[test]
    fn lower_bound_is_manhattan() {
        let g = GridSpace::new_2d(5, 5, &[]).unwrap();
        let inst = Instance::new(g, vec![c(0, 0)], vec![c(3, 2)]).unwrap();
        assert_eq!(makespan_lower_bound(&inst), 5);
    }

    #[test]
    fn metrics_exclude_trailing_waits() {
        let g = GridSpace::new_2d(1, 10, &[]).unwrap();
        let mut p: Vec<Cell> = (0..=5).map(|y| c(0, y)).collect();
        p.extend([c(0, 5); 3]);
        let inst = Instance::new(g, vec![c(0, 0)], vec![c(0, 5)]).unwrap();
        let plan = Plan { horizon: 8, ids: vec![1], paths: vec![p] };
        let m = compute_metrics(&inst, &plan).unwrap();
        assert_eq!((m.makespan, m.soc), (5, 5));
    }

    #[test]
    fn metrics_sum_and_max() {
        let g = GridSpace::new_2d(2, 8, &[]).unwrap();
        let mut a: Vec<Cell> = (0..=3).map(|y| c(0, y)).collect();
        a.extend([c(0, 3); 4]);
        let b: Vec<Cell> = (0..=7).map(|y| c(1, y)).collect();
        let inst = Instance::new(g, vec![c(0, 0), c(1, 0)], vec![c(0, 3), c(1, 7)]).unwrap();
        let plan = Plan { horizon: 7, ids: vec![1, 2], paths: vec![a, b] };
        let m = compute_metrics(&inst, &plan).unwrap();
        assert_eq!((m.makespan, m.soc), (7, 10));
    }

    #[test]
    fn strip_without_virtuals_is_identity() {
        let g = GridSpace::new_2d(2, 2, &[]).unwrap();
        let inst = Instance::new(g, vec![c(0, 0)], vec![c(0, 0)]).unwrap();
        let plan = Plan::waiting(&inst);
        assert_eq!(strip_virtual(&inst, &plan), plan);
    }
}
