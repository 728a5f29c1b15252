//! Third-density rearrangement on 3D grids: depth shuffles pick an
//! intermediate plane per robot, every plane runs the 2D table core, and a
//! final depth shuffle places robots on their goal planes.

use crate::error::{Error, Result};
use crate::exec::{Executor, Fragment};
use crate::grid::{Cell, GridSpace, Instance, Plan};
use crate::matching::{decompose_into_matchings, lba_assign, ColorRowMultigraph, Edge, Lambda};
use crate::pipeline2d::{
    all_home, fill_virtual, finish, idle_plan, paths_fragment, read_table, rubik_core, Layout, MatchingKind, SolverOptions,
    ThirdLayout,
};
use crate::shuffle::{highway_shuffle, Highway};
use crate::unlabeled::solve_unlabeled;

/// `(x, j, z)` of a slot cell `(x, 3j+1, z)`.
fn slot_coords(space: &GridSpace, cell: usize) -> Result<(usize, usize, usize)> {
    let c = space.cell(cell);
    if c.y % 3 != 1 {
        return Err(Error::Contract(format!("{c:?} is not a centered slot")));
    }
    Ok((c.x as usize, c.y as usize / 3, c.z as usize))
}

/// Moves robots along their depth columns. `pos[r]` is the slot cell of robot
/// `r` and `target_z[r]` its new depth; each column must receive a permutation.
pub fn z_shuffle(space: &GridSpace, pos: &[usize], target_z: &[usize]) -> Result<Fragment> {
    let w = space.m2() / 3;
    let mut per_col: Vec<Vec<(usize, usize)>> = vec![Vec::new(); space.m1() * w];
    for (r, &p) in pos.iter().enumerate() {
        let (x, j, z) = slot_coords(space, p)?;
        if z != target_z[r] {
            per_col[x * w + j].push((z, target_z[r]));
        }
    }
    let mut out = Fragment::default();
    let m3 = space.m3();
    for (k, moves) in per_col.iter().enumerate() {
        if moves.is_empty() {
            continue;
        }
        let (x, j) = (k / w, k % w);
        let line = |y: usize| -> Vec<usize> { (0..m3).map(|z| space.index(Cell::new3(x, y, z))).collect() };
        let (center, low, high) = (line(3 * j + 1), line(3 * j), line(3 * j + 2));
        out.merge_parallel(highway_shuffle(Highway { center: &center, lane_dec: &low, lane_inc: &high }, moves)?);
    }
    Ok(out)
}

/// Chooses an intermediate depth for every robot so that each plane holds
/// exactly one robot of every goal `(x, y)` class, and the depth shuffle that
/// realizes it. `pos` and `goal` are slot cells per robot.
pub fn matching_xy(space: &GridSpace, pos: &[usize], goal: &[usize], matching: MatchingKind) -> Result<(Vec<usize>, Fragment)> {
    let w = space.m2() / 3;
    let side = space.m1() * w;
    let mut edges = Vec::with_capacity(pos.len());
    let mut cur_z = Vec::with_capacity(pos.len());
    let mut goal_z = Vec::with_capacity(pos.len());
    for (r, (&p, &g)) in pos.iter().zip(goal).enumerate() {
        let (x, j, z) = slot_coords(space, p)?;
        let (gx, gj, gz) = slot_coords(space, g)?;
        edges.push(Edge { color: gx * w + gj, row: x * w + j, robot: r });
        cur_z.push(z);
        goal_z.push(gz);
    }
    let g = ColorRowMultigraph::new(side, edges)?;
    let ms = match matching {
        MatchingKind::Hall => decompose_into_matchings(&g)?,
        MatchingKind::Lba => lba_assign(&g, &cur_z, &goal_z, Lambda::Goal)?,
    };
    let target = ms.column_of(pos.len());
    let frag = z_shuffle(space, pos, &target)?;
    Ok((target, frag))
}

/// Third-density 3D solver. `m1` and `m2` must be multiples of 3; obstacles are not supported.
pub fn solve_grh3d(inst: &Instance, opts: &SolverOptions) -> Result<Plan> {
    let space = &inst.space;
    if !space.is_3d() {
        return Err(Error::Dimension("3D solver called on a 2D instance".into()));
    }
    if space.m1() % 3 != 0 || space.m2() % 3 != 0 {
        return Err(Error::Dimension(format!("{}x{} is not a multiple of 3 in both plane dimensions", space.m1(), space.m2())));
    }
    if !space.obstacles().is_empty() {
        return Err(Error::Regime("the 3D solver does not support obstacles".into()));
    }
    let (m1, w, m3) = (space.m1(), space.m2() / 3, space.m3());
    let cap = m1 * w * m3;
    if inst.len() > cap {
        return Err(Error::Regime(format!("{} robots exceed the {cap} third-density slots", inst.len())));
    }
    if all_home(inst) {
        return Ok(idle_plan(inst));
    }
    let full = fill_virtual(inst, cap, opts.seed)?;
    let slots: Vec<usize> =
        (0..m3).flat_map(|z| (0..m1).flat_map(move |x| (0..w).map(move |j| Cell::new3(x, 3 * j + 1, z)))).map(|c| space.index(c)).collect();
    let starts: Vec<usize> = full.starts.iter().map(|&c| space.index(c)).collect();
    let goals: Vec<usize> = full.goals.iter().map(|&c| space.index(c)).collect();
    let (fwd, back) = rayon::join(
        || solve_unlabeled(space, &starts, &slots, opts.unlabeled),
        || solve_unlabeled(space, &goals, &slots, opts.unlabeled),
    );
    let (fwd, back) = (fwd?, back?);
    let goal_slot: Vec<usize> = (0..full.len()).map(|i| back.end(i)).collect();

    let mut ex = Executor::new(space, &starts)?;
    ex.apply(&paths_fragment(&fwd.paths))?;
    let pos: Vec<usize> = ex.pos().iter().map(|&c| c as usize).collect();
    let (_, zf) = matching_xy(space, &pos, &goal_slot, opts.matching)?;
    ex.apply(&zf)?;

    // every plane now holds one robot per goal (x, y) class
    let mut planes = Fragment::default();
    for z in 0..m3 {
        let layout = ThirdLayout { space, holes: false, z, narrow: 0 };
        let table = read_table(&layout, ex.occupancy())?;
        let goal: Vec<(usize, usize)> = goal_slot
            .iter()
            .map(|&g| {
                let c = space.cell(g);
                (c.x as usize, c.y as usize / 3)
            })
            .collect();
        let frag = rubik_core(&layout as &dyn Layout, table, &goal, opts.matching)?;
        planes.merge_parallel(frag);
    }
    ex.apply(&planes)?;

    let pos: Vec<usize> = ex.pos().iter().map(|&c| c as usize).collect();
    let target: Vec<usize> = goal_slot.iter().map(|&g| space.cell(g).z as usize).collect();
    ex.apply(&z_shuffle(space, &pos, &target)?)?;
    ex.apply(&paths_fragment(&back.paths).reversed())?;
    finish(&full, ex.into_plan(&full.ids), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate, InstanceSpec};
    use crate::validate::compute_metrics;
    use num_rational::Ratio;

    #[test]
    fn small_3d_instances() {
        for (dims, seed) in [([6, 6, 3], 1), ([9, 6, 2], 2), ([12, 6, 3], 3)] {
            let inst = generate(&InstanceSpec::random(&dims, Ratio::new(1, 3), seed)).unwrap();
            let p = solve_grh3d(&inst, &SolverOptions::default()).unwrap();
            let m = compute_metrics(&inst, &p).unwrap();
            assert!(m.makespan as usize <= 3 * dims[0] + 4 * dims[1] + 4 * dims[2] + 40);
        }
    }

    #[test]
    fn planes_hold_one_robot_per_class() {
        let space = GridSpace::new_3d(3, 3, 3, &[]).unwrap();
        // 3 classes of 3 robots each, every robot's goal class is its current class shifted
        let pos: Vec<usize> = (0..3).flat_map(|x| (0..3).map(move |z| (x, z))).map(|(x, z)| space.index(Cell::new3(x, 1, z))).collect();
        let goal: Vec<usize> = (0..3).flat_map(|x| (0..3).map(move |z| (x, z))).map(|(x, z)| space.index(Cell::new3((x + z) % 3, 1, z))).collect();
        let (target, frag) = matching_xy(&space, &pos, &goal, MatchingKind::Hall).unwrap();
        let mut ex = Executor::new(&space, &pos).unwrap();
        ex.apply(&frag).unwrap();
        for z in 0..3 {
            let mut classes: Vec<u16> = (0..9).filter(|&r| target[r] == z).map(|r| space.cell(goal[r]).x).collect();
            classes.sort_unstable();
            assert_eq!(classes, vec![0, 1, 2]);
        }
    }

    #[test]
    fn rejects_2d_and_obstacles() {
        let inst = generate(&InstanceSpec::random(&[6, 6], Ratio::new(1, 3), 0)).unwrap();
        assert!(solve_grh3d(&inst, &SolverOptions::default()).is_err());
    }
}
