//! Three-phase table rearrangement on 2D grids at full, half and third density.

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::{Executor, Fragment};
use crate::grid::{Cell, GridSpace, Instance, Plan, RobotId};
use crate::matching::{bottleneck_factor, decompose_into_matchings, lba_assign, ColorRowMultigraph, Edge, Lambda};
use crate::refine::refine_plan;
use crate::shuffle::{follow_paths, highway_shuffle, linear_merge_shuffle, odd_even_shuffle, Highway, ShuffleMode};
use crate::unlabeled::{solve_unlabeled, UnlabeledOptions};
use crate::validate::{strip_virtual, validate_plan};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Every cell occupied; odd-even block shuffles.
    Full,
    /// At most one robot per two cells; linear merge shuffles.
    Half,
    /// At most one robot per three cells; highway shuffles.
    #[default]
    Third,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum MatchingKind {
    /// Any perfect-matching decomposition.
    #[default]
    Hall,
    /// Greedy bottleneck matchings toward goal columns.
    Lba,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolverOptions {
    pub regime: Regime,
    pub mode: ShuffleMode,
    pub matching: MatchingKind,
    pub refine: bool,
    pub seed: u64,
    /// Run column/row/column shuffles instead of row/column/row.
    pub transpose: bool,
    pub unlabeled: UnlabeledOptions,
}

/// Table entry without a robot.
pub(crate) const HOLE: usize = usize::MAX;

/// Maps an abstract table onto grid cells and realizes line shuffles of it.
pub(crate) trait Layout {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn slot(&self, a: usize, j: usize) -> usize;
    /// Whether `(a, j)` holds a robot at the start and end of the core.
    fn present(&self, _a: usize, _j: usize) -> bool {
        true
    }
    /// Table rows per row band. A row shuffle permutes the entries of a band freely.
    fn band(&self) -> usize {
        1
    }
    /// Trailing lanes of every band whose column shuffles are slower per row moved.
    fn slow_lanes(&self) -> usize {
        0
    }
    /// Position of entry `(a, j)` on the line of its band.
    fn lane(&self, _a: usize, j: usize) -> usize {
        j
    }
    /// `perm[a][j]`: new lane of the robot at `(a, j)`, [`HOLE`] for absent entries.
    fn row_shuffle(&self, perm: &[Vec<usize>]) -> Result<Fragment>;
    /// `perm[j][a]`: new row of the robot at `(a, j)`.
    fn col_shuffle(&self, perm: &[Vec<usize>]) -> Result<Fragment>;
}

fn is_identity(perm: &[Vec<usize>]) -> bool {
    perm.iter().all(|p| p.iter().enumerate().all(|(i, &d)| i == d))
}

/// Full density: the table is the grid.
pub(crate) struct FullLayout<'a> {
    space: &'a GridSpace,
    mode: ShuffleMode,
}

impl Layout for FullLayout<'_> {
    fn rows(&self) -> usize {
        self.space.m1()
    }
    fn cols(&self) -> usize {
        self.space.m2()
    }
    fn slot(&self, a: usize, j: usize) -> usize {
        self.space.index(Cell::new(a, j))
    }
    fn row_shuffle(&self, perm: &[Vec<usize>]) -> Result<Fragment> {
        if is_identity(perm) {
            return Ok(Fragment::default());
        }
        let lines: Vec<Vec<usize>> = (0..self.rows()).map(|a| (0..self.cols()).map(|j| self.slot(a, j)).collect()).collect();
        odd_even_shuffle(&lines, perm, self.mode)
    }
    fn col_shuffle(&self, perm: &[Vec<usize>]) -> Result<Fragment> {
        if is_identity(perm) {
            return Ok(Fragment::default());
        }
        let lines: Vec<Vec<usize>> = (0..self.cols()).map(|j| (0..self.rows()).map(|a| self.slot(a, j)).collect()).collect();
        odd_even_shuffle(&lines, perm, self.mode)
    }
}

/// Third density: slots on the middle column of every 3-wide column band.
/// With center-hole obstacles the middle row of each 3-tall band is dropped.
///
/// When the column count is not a multiple of 3, the last one or two bands
/// are 2 wide. Their slots sit on the left column at rows `x % 3 != 1`, so
/// every 3-row band still holds exactly one robot per column. The columns of
/// the table that live there are shuffled by a linear merge.
pub(crate) struct ThirdLayout<'a> {
    pub space: &'a GridSpace,
    pub holes: bool,
    pub z: usize,
    pub narrow: usize,
}

impl ThirdLayout<'_> {
    fn at(&self, x: usize, y: usize) -> usize {
        self.space.index(Cell::new3(x, y, self.z))
    }

    /// Number of 3-wide column bands.
    fn wide(&self) -> usize {
        (self.space.m2() - 2 * self.narrow) / 3
    }

    /// Left grid column of table column `j`'s band, and whether it is narrow.
    fn band_col(&self, j: usize) -> (usize, bool) {
        let w = self.wide();
        if j < w {
            (3 * j, false)
        } else {
            (3 * w + 2 * (j - w), true)
        }
    }

    /// Position on the horizontal center line of a robot at band offset `r` of table column `j`.
    fn hpos(&self, j: usize, r: usize) -> Result<usize> {
        match self.band_col(j) {
            (b, false) => Ok(b + r),
            (b, true) if r != 1 => Ok(b + r / 2),
            _ => Err(Error::Contract(format!("narrow column {j} has no slot at band offset 1"))),
        }
    }

    fn grid_row(&self, a: usize) -> usize {
        if self.holes {
            3 * (a / 2) + 2 * (a % 2)
        } else {
            a
        }
    }

    /// Abstract rows of row band `k` with their offset inside the band.
    fn band_rows(&self, k: usize) -> Vec<(usize, usize)> {
        if self.holes {
            vec![(2 * k, 0), (2 * k + 1, 2)]
        } else {
            vec![(3 * k, 0), (3 * k + 1, 1), (3 * k + 2, 2)]
        }
    }

    /// Cell path from the vertical slot to the horizontal slot of a robot at band offset `r` of cell `j`.
    fn to_horizontal(&self, k: usize, r: usize, j: usize) -> Vec<usize> {
        let a = 3 * k;
        match (self.band_col(j), r) {
            ((b, false), 0) => vec![self.at(a, b + 1), self.at(a, b), self.at(a + 1, b)],
            ((b, false), 1) => vec![self.at(a + 1, b + 1)],
            ((b, false), _) => vec![self.at(a + 2, b + 1), self.at(a + 2, b + 2), self.at(a + 1, b + 2)],
            ((b, true), 0) => vec![self.at(a, b), self.at(a + 1, b)],
            ((b, true), _) => vec![self.at(a + 2, b), self.at(a + 2, b + 1), self.at(a + 1, b + 1)],
        }
    }

    /// Linear merge along a narrow band; holes ride along as placeholders.
    fn narrow_col_shuffle(&self, j: usize, p: &[usize]) -> Result<Fragment> {
        if p.iter().enumerate().all(|(a, &d)| d == HOLE || d == a) {
            return Ok(Fragment::default());
        }
        let m1 = self.space.m1();
        let (b, _) = self.band_col(j);
        let mut targets = p.to_vec();
        let mut hit = vec![false; m1];
        for &d in p.iter().filter(|&&d| d != HOLE) {
            hit[d] = true;
        }
        let holes: Vec<usize> = (0..m1).filter(|&a| p[a] == HOLE).collect();
        for (&a, d) in holes.iter().zip((0..m1).filter(|&x| !hit[x])) {
            targets[a] = d;
        }
        let primary: Vec<usize> = (0..m1).map(|x| self.at(x, b)).collect();
        let secondary: Vec<usize> = (0..m1).map(|x| self.at(x, b + 1)).collect();
        let f = linear_merge_shuffle(&primary, &secondary, &targets)?;
        let ghosts: Vec<usize> = holes.iter().map(|&a| primary[a]).collect();
        Ok(f.without_robots_at(&ghosts))
    }
}

impl Layout for ThirdLayout<'_> {
    fn rows(&self) -> usize {
        if self.holes {
            2 * self.space.m1() / 3
        } else {
            self.space.m1()
        }
    }
    fn cols(&self) -> usize {
        self.wide() + self.narrow
    }
    fn slot(&self, a: usize, j: usize) -> usize {
        match self.band_col(j) {
            (b, false) => self.at(self.grid_row(a), b + 1),
            (b, true) => self.at(a, b),
        }
    }
    fn present(&self, a: usize, j: usize) -> bool {
        j < self.wide() || a % 3 != 1
    }
    fn band(&self) -> usize {
        if self.holes {
            2
        } else {
            3
        }
    }
    fn slow_lanes(&self) -> usize {
        2 * self.narrow
    }
    fn lane(&self, a: usize, j: usize) -> usize {
        let r = if self.holes { 2 * (a % 2) } else { a % 3 };
        self.hpos(j, r).expect("lanes exist only for present entries")
    }
    fn row_shuffle(&self, perm: &[Vec<usize>]) -> Result<Fragment> {
        let mut out = Fragment::default();
        let m2 = self.space.m2();
        for k in 0..self.space.m1() / 3 {
            let rows = self.band_rows(k);
            let mut moves = Vec::new();
            let mut paths = Vec::new();
            for &(a, r) in &rows {
                for (j, &d) in perm[a].iter().enumerate() {
                    if d == HOLE {
                        continue;
                    }
                    let from = self.hpos(j, r)?;
                    paths.push(self.to_horizontal(k, r, j));
                    if d != from {
                        moves.push((from, d));
                    }
                }
            }
            if moves.is_empty() {
                continue;
            }
            let conv = follow_paths(&paths)?;
            let center: Vec<usize> = (0..m2).map(|y| self.at(3 * k + 1, y)).collect();
            let low: Vec<usize> = (0..m2).map(|y| self.at(3 * k, y)).collect();
            let high: Vec<usize> = (0..m2).map(|y| self.at(3 * k + 2, y)).collect();
            let hw = highway_shuffle(Highway { center: &center, lane_dec: &low, lane_inc: &high }, &moves)?;
            let mut band = conv.clone();
            band.append(hw);
            band.append(conv.reversed());
            out.merge_parallel(band);
        }
        Ok(out)
    }
    fn col_shuffle(&self, perm: &[Vec<usize>]) -> Result<Fragment> {
        let mut out = Fragment::default();
        let m1 = self.space.m1();
        for (j, p) in perm.iter().enumerate() {
            if j >= self.wide() {
                out.merge_parallel(self.narrow_col_shuffle(j, p)?);
                continue;
            }
            let moves: Vec<(usize, usize)> =
                p.iter().enumerate().filter(|&(a, &d)| d != HOLE && a != d).map(|(a, &d)| (self.grid_row(a), self.grid_row(d))).collect();
            if moves.is_empty() {
                continue;
            }
            let center: Vec<usize> = (0..m1).map(|x| self.at(x, 3 * j + 1)).collect();
            let low: Vec<usize> = (0..m1).map(|x| self.at(x, 3 * j)).collect();
            let high: Vec<usize> = (0..m1).map(|x| self.at(x, 3 * j + 2)).collect();
            out.merge_parallel(highway_shuffle(Highway { center: &center, lane_dec: &low, lane_inc: &high }, &moves)?);
        }
        Ok(out)
    }
}

/// Half density: slots on the even columns.
pub(crate) struct HalfLayout<'a> {
    space: &'a GridSpace,
}

impl HalfLayout<'_> {
    fn at(&self, x: usize, y: usize) -> usize {
        self.space.index(Cell::new(x, y))
    }
}

impl Layout for HalfLayout<'_> {
    fn rows(&self) -> usize {
        self.space.m1()
    }
    fn cols(&self) -> usize {
        self.space.m2() / 2
    }
    fn slot(&self, a: usize, j: usize) -> usize {
        self.at(a, 2 * j)
    }
    fn row_shuffle(&self, perm: &[Vec<usize>]) -> Result<Fragment> {
        let mut out = Fragment::default();
        let m2 = self.space.m2();
        for k in 0..self.rows() / 2 {
            let band = [&perm[2 * k], &perm[2 * k + 1]];
            if band.iter().all(|p| p.iter().enumerate().all(|(i, &d)| i == d)) {
                continue;
            }
            let mut targets = vec![0; m2];
            for (r, p) in band.iter().enumerate() {
                for (j, &d) in p.iter().enumerate() {
                    targets[2 * j + r] = 2 * d + r;
                }
            }
            let paths: Vec<Vec<usize>> = (0..self.cols())
                .map(|j| vec![self.at(2 * k + 1, 2 * j), self.at(2 * k + 1, 2 * j + 1), self.at(2 * k, 2 * j + 1)])
                .collect();
            let conv = follow_paths(&paths)?;
            let primary: Vec<usize> = (0..m2).map(|y| self.at(2 * k, y)).collect();
            let secondary: Vec<usize> = (0..m2).map(|y| self.at(2 * k + 1, y)).collect();
            let mut f = conv.clone();
            f.append(linear_merge_shuffle(&primary, &secondary, &targets)?);
            f.append(conv.reversed());
            out.merge_parallel(f);
        }
        Ok(out)
    }
    fn col_shuffle(&self, perm: &[Vec<usize>]) -> Result<Fragment> {
        let mut out = Fragment::default();
        let m1 = self.space.m1();
        for (j, p) in perm.iter().enumerate() {
            if p.iter().enumerate().all(|(i, &d)| i == d) {
                continue;
            }
            let primary: Vec<usize> = (0..m1).map(|x| self.at(x, 2 * j)).collect();
            let secondary: Vec<usize> = (0..m1).map(|x| self.at(x, 2 * j + 1)).collect();
            out.merge_parallel(linear_merge_shuffle(&primary, &secondary, p)?);
        }
        Ok(out)
    }
}

/// Robot index at each slot of a fully occupied table, read from cell
/// occupancy. Entries the layout leaves out are [`HOLE`].
pub(crate) fn read_table(layout: &dyn Layout, occupancy: &[u32]) -> Result<Vec<Vec<usize>>> {
    let mut table = vec![vec![HOLE; layout.cols()]; layout.rows()];
    for (a, row) in table.iter_mut().enumerate() {
        for (j, t) in row.iter_mut().enumerate() {
            if !layout.present(a, j) {
                continue;
            }
            let r = occupancy[layout.slot(a, j)];
            if r == crate::exec::NONE {
                return Err(Error::Contract(format!("table slot ({a}, {j}) is empty")));
            }
            *t = r as usize;
        }
    }
    Ok(table)
}

/// The three shuffle phases that carry every robot of a full table to its goal slot.
/// `goal[r]` is the goal slot `(row, col)` of robot index `r`.
pub(crate) fn rubik_core(
    layout: &dyn Layout,
    table: Vec<Vec<usize>>,
    goal: &[(usize, usize)],
    matching: MatchingKind,
) -> Result<Fragment> {
    let (m, w, b) = (layout.rows(), layout.cols(), layout.band());
    // entries of the first band by line position; every band has the same lanes
    let mut lanes: Vec<(usize, usize)> = (0..b).flat_map(|a| (0..w).map(move |j| (a, j))).filter(|&(a, j)| layout.present(a, j)).collect();
    lanes.sort_by_key(|&(a, j)| layout.lane(a, j));
    let mut rank = vec![usize::MAX; lanes.last().map_or(0, |&(a, j)| layout.lane(a, j) + 1)];
    for (l, &(a, j)) in lanes.iter().enumerate() {
        rank[layout.lane(a, j)] = l;
    }
    let rank_of = |a: usize, j: usize| rank[layout.lane(a % b, j)];
    let goal_lane: Vec<usize> = goal.iter().map(|&(a, j)| rank_of(a, j)).collect();
    let lane = assign_lanes(layout, &table, goal, &goal_lane, &rank_of, matching)?;
    let line = |l: usize| layout.lane(lanes[l].0, lanes[l].1);

    let mut frag = Fragment::default();
    // phase 1: each band sends matching l to lane l
    let perm: Vec<Vec<usize>> = table.iter().map(|row| row.iter().map(|&r| if r == HOLE { HOLE } else { line(lane[r]) }).collect()).collect();
    frag.append(layout.row_shuffle(&perm)?);
    let mut cols: Vec<Vec<usize>> = vec![vec![HOLE; m]; w];
    for (a, row) in table.iter().enumerate() {
        for &r in row.iter().filter(|&&r| r != HOLE) {
            let (da, dj) = lanes[lane[r]];
            cols[dj][a - a % b + da] = r;
        }
    }
    // phase 2: columns move robots into their goal bands, keeping their order within a band
    let mut perm: Vec<Vec<usize>> = vec![vec![HOLE; m]; w];
    for (j, col) in cols.iter().enumerate() {
        let mut per_band: Vec<Vec<usize>> = vec![Vec::new(); m / b];
        for (a, &r) in col.iter().enumerate().filter(|&(_, &r)| r != HOLE) {
            per_band[goal[r].0 / b].push(a);
        }
        for (k, from) in per_band.iter().enumerate() {
            let to: Vec<usize> = (k * b..(k + 1) * b).filter(|&a| layout.present(a, j)).collect();
            if from.len() != to.len() {
                return Err(Error::Contract("a column does not match its goal bands after the first phase".into()));
            }
            for (&x, &d) in from.iter().zip(&to) {
                perm[j][x] = d;
            }
        }
    }
    frag.append(layout.col_shuffle(&perm)?);
    let mut next = vec![vec![HOLE; w]; m];
    for (j, p) in perm.iter().enumerate() {
        for (a, &d) in p.iter().enumerate().filter(|&(_, &d)| d != HOLE) {
            next[d][j] = cols[j][a];
        }
    }
    // phase 3: bands sort robots into their goal lanes
    let perm: Vec<Vec<usize>> = next.iter().map(|row| row.iter().map(|&r| if r == HOLE { HOLE } else { line(goal_lane[r]) }).collect()).collect();
    frag.append(layout.row_shuffle(&perm)?);
    Ok(frag)
}

/// Lane of every robot after the first phase: a decomposition of the
/// band/goal-band multigraph into one perfect matching per lane. The slow
/// lanes get the factor whose longest band-to-band move is shortest.
fn assign_lanes(
    layout: &dyn Layout,
    table: &[Vec<usize>],
    goal: &[(usize, usize)],
    goal_lane: &[usize],
    cur_lane: &dyn Fn(usize, usize) -> usize,
    matching: MatchingKind,
) -> Result<Vec<usize>> {
    let b = layout.band();
    let nb = layout.rows() / b;
    let mut cur = vec![0; goal.len()];
    let mut edges = Vec::new();
    for (a, row) in table.iter().enumerate() {
        for (j, &r) in row.iter().enumerate().filter(|&(_, &r)| r != HOLE) {
            cur[r] = cur_lane(a, j);
            edges.push(Edge { color: goal[r].0 / b, row: a / b, robot: r });
        }
    }
    let per_band = edges.len() / nb;
    let slow = layout.slow_lanes();
    let mut lane = vec![usize::MAX; goal.len()];
    if slow > 0 {
        let cand: Vec<(usize, usize, u32)> = edges.iter().map(|e| (e.row, e.color, e.row.abs_diff(e.color) as u32)).collect();
        let (picked, _) = bottleneck_factor(nb, &cand, slow).ok_or_else(|| Error::Regularity("band graph has no factor for the slow lanes".into()))?;
        let f = ColorRowMultigraph::new(nb, picked.iter().map(|&k| edges[k]).collect())?;
        for (k, mt) in decompose_into_matchings(&f)?.matchings.iter().enumerate() {
            for e in mt {
                lane[e.robot] = per_band - slow + k;
            }
        }
        edges.retain(|e| lane[e.robot] == usize::MAX);
    }
    if !edges.is_empty() {
        let g = ColorRowMultigraph::new(nb, edges)?;
        let ms = match matching {
            MatchingKind::Hall => decompose_into_matchings(&g)?,
            MatchingKind::Lba => lba_assign(&g, &cur, goal_lane, Lambda::Goal)?,
        };
        for (k, mt) in ms.matchings.iter().enumerate() {
            for e in mt {
                lane[e.robot] = k;
            }
        }
    }
    Ok(lane)
}

/// Number of robots a density stands for on this grid: `floor(density * cells)`.
pub fn density_count(space: &GridSpace, density: Ratio<u64>) -> usize {
    (Ratio::from_integer(space.num_cells() as u64) * density).to_integer() as usize
}

/// Adds virtual robots until the instance has `total` robots. Virtual robots
/// rest on cells outside the start and goal sets; when those run out the
/// remaining ones pair a start-free cell with a goal-free cell.
pub fn fill_virtual(inst: &Instance, total: usize, seed: u64) -> Result<Instance> {
    let n = inst.len();
    if total <= n {
        return Ok(inst.clone());
    }
    let space = &inst.space;
    if total > space.num_free() {
        return Err(Error::Regime(format!("{total} robots do not fit on {} free cells", space.num_free())));
    }
    let mut in_s = vec![false; space.num_cells()];
    let mut in_g = vec![false; space.num_cells()];
    for (&s, &g) in inst.starts.iter().zip(&inst.goals) {
        in_s[space.index(s)] = true;
        in_g[space.index(g)] = true;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut both: Vec<usize> = space.free_cells().filter(|&c| !in_s[c] && !in_g[c]).collect();
    both.shuffle(&mut rng);
    let need = total - n;
    let mut pairs: Vec<(usize, usize)> = both.iter().take(need).map(|&c| (c, c)).collect();
    if pairs.len() < need {
        let mut s_free: Vec<usize> = space.free_cells().filter(|&c| !in_s[c] && in_g[c]).collect();
        let mut g_free: Vec<usize> = space.free_cells().filter(|&c| in_s[c] && !in_g[c]).collect();
        s_free.shuffle(&mut rng);
        g_free.shuffle(&mut rng);
        let k = need - pairs.len();
        if s_free.len() < k || g_free.len() < k {
            return Err(Error::Regime("not enough free cells for virtual robots".into()));
        }
        pairs.extend(s_free.into_iter().zip(g_free).take(k));
    }
    let mut next_id: RobotId = inst.ids.iter().copied().max().unwrap_or(0) + 1;
    let mut out = inst.clone();
    for (s, g) in pairs {
        out.ids.push(next_id);
        next_id += 1;
        out.starts.push(space.cell(s));
        out.goals.push(space.cell(g));
        out.virtual_mask.push(true);
    }
    Ok(out)
}

/// Virtual filling to a target density.
pub fn fill_to_density(inst: &Instance, density: Ratio<u64>, seed: u64) -> Result<Instance> {
    fill_virtual(inst, density_count(&inst.space, density), seed)
}

pub(crate) fn idle_plan(inst: &Instance) -> Plan {
    let real = crate::validate::real_instance(inst);
    Plan::waiting(&real)
}

pub(crate) fn finish(inst: &Instance, plan: Plan, opts: &SolverOptions) -> Result<Plan> {
    let mut plan = strip_virtual(inst, &plan);
    plan.trim();
    let real = crate::validate::real_instance(inst);
    let report = validate_plan(&real, &plan)?;
    if !report.valid {
        return Err(Error::InvalidPlan(Box::new(report)));
    }
    if opts.refine {
        plan = refine_plan(&real, &plan)?;
    }
    Ok(plan)
}

pub(crate) fn all_home(inst: &Instance) -> bool {
    (0..inst.len()).all(|i| inst.virtual_mask[i] || inst.starts[i] == inst.goals[i])
}

/// Fragment that moves every robot along its unlabeled path.
pub(crate) fn paths_fragment(paths: &[Vec<usize>]) -> Fragment {
    let mut f = Fragment::default();
    for p in paths {
        for (t, w) in p.windows(2).enumerate() {
            if w[0] != w[1] {
                f.push(t, w[0], w[1]);
            }
        }
    }
    f
}

/// Solves with the regime named in the options.
pub fn solve(inst: &Instance, opts: &SolverOptions) -> Result<Plan> {
    match opts.regime {
        Regime::Full => solve_grm(inst, opts),
        Regime::Half => solve_grlm(inst, opts),
        Regime::Third => solve_grh(inst, opts),
    }
}

fn with_orientation(inst: &Instance, opts: &SolverOptions, f: impl Fn(&Instance, &SolverOptions) -> Result<Plan>) -> Result<Plan> {
    if inst.space.is_3d() {
        return Err(Error::Dimension("2D solver called on a 3D instance".into()));
    }
    if !opts.transpose {
        return f(inst, opts);
    }
    let t = inst.transposed()?;
    let inner = SolverOptions { transpose: false, ..*opts };
    Ok(f(&t, &inner)?.transposed())
}

/// Full-density solver. Partially occupied grids are filled with virtual robots first.
pub fn solve_grm(inst: &Instance, opts: &SolverOptions) -> Result<Plan> {
    with_orientation(inst, opts, |inst, opts| {
        if !inst.space.obstacles().is_empty() {
            return Err(Error::Regime("the full-density solver does not support obstacles".into()));
        }
        if all_home(inst) {
            return Ok(idle_plan(inst));
        }
        let space = &inst.space;
        let full = fill_virtual(inst, space.num_free(), opts.seed)?;
        let layout = FullLayout { space, mode: opts.mode };
        let starts: Vec<usize> = full.starts.iter().map(|&c| space.index(c)).collect();
        let mut ex = Executor::new(space, &starts)?;
        let table = read_table(&layout, ex.occupancy())?;
        let goal: Vec<(usize, usize)> = full.goals.iter().map(|c| (c.x as usize, c.y as usize)).collect();
        let frag = rubik_core(&layout, table, &goal, opts.matching)?;
        ex.apply(&frag)?;
        finish(&full, ex.into_plan(&full.ids), opts)
    })
}

/// Detects the center-hole obstacle pattern; any other obstacle set is rejected.
pub fn has_center_holes(space: &GridSpace) -> Result<bool> {
    let obs = space.obstacles();
    if obs.is_empty() {
        return Ok(false);
    }
    let expected = (space.m1() / 3) * (space.m2() / 3) * space.m3();
    let pattern = obs.iter().all(|c| c.x % 3 == 1 && c.y % 3 == 1);
    if obs.len() == expected && pattern {
        Ok(true)
    } else {
        Err(Error::Regime("only the center-hole obstacle pattern is supported".into()))
    }
}

/// Runs unlabeled routing onto the slots, the table core, and the reversed
/// unlabeled routing from the goals. `full` must hold exactly one robot per slot.
fn solve_slotted(full: &Instance, layout: &dyn Layout, opts: &SolverOptions) -> Result<Plan> {
    let space = &full.space;
    let entries: Vec<(usize, usize)> =
        (0..layout.rows()).flat_map(|a| (0..layout.cols()).map(move |j| (a, j))).filter(|&(a, j)| layout.present(a, j)).collect();
    let slots: Vec<usize> = entries.iter().map(|&(a, j)| layout.slot(a, j)).collect();
    let mut slot_of = vec![(usize::MAX, usize::MAX); space.num_cells()];
    for (&e, &s) in entries.iter().zip(&slots) {
        slot_of[s] = e;
    }
    let starts: Vec<usize> = full.starts.iter().map(|&c| space.index(c)).collect();
    let goals: Vec<usize> = full.goals.iter().map(|&c| space.index(c)).collect();
    let (fwd, back) = rayon::join(
        || solve_unlabeled(space, &starts, &slots, opts.unlabeled),
        || solve_unlabeled(space, &goals, &slots, opts.unlabeled),
    );
    let (fwd, back) = (fwd?, back?);
    let goal: Vec<(usize, usize)> = (0..full.len()).map(|i| slot_of[back.end(i)]).collect();
    let mut ex = Executor::new(space, &starts)?;
    ex.apply(&paths_fragment(&fwd.paths))?;
    let table = read_table(layout, ex.occupancy())?;
    ex.apply(&rubik_core(layout, table, &goal, opts.matching)?)?;
    ex.apply(&paths_fragment(&back.paths).reversed())?;
    finish(full, ex.into_plan(&full.ids), opts)
}

/// Third-density solver; supports the center-hole obstacle pattern.
///
/// Without obstacles one dimension must be a multiple of 3; grids whose row
/// count is not are solved transposed. Center holes need both.
pub fn solve_grh(inst: &Instance, opts: &SolverOptions) -> Result<Plan> {
    with_orientation(inst, opts, |inst, opts| {
        let space = &inst.space;
        if space.m1() % 3 != 0 && space.m2() % 3 == 0 && space.obstacles().is_empty() {
            let t = inst.transposed()?;
            return Ok(grh_oriented(&t, opts)?.transposed());
        }
        grh_oriented(inst, opts)
    })
}

fn grh_oriented(inst: &Instance, opts: &SolverOptions) -> Result<Plan> {
    let space = &inst.space;
    let (m1, m2) = (space.m1(), space.m2());
    let holes = has_center_holes(space)?;
    if m1 % 3 != 0 || (holes && m2 % 3 != 0) {
        return Err(Error::Dimension(format!("{m1}x{m2} has no dimension divisible by 3 for a third-density layout")));
    }
    let narrow = [0, 2, 1][m2 % 3];
    if m2 < 2 * narrow {
        return Err(Error::Dimension(format!("{m1}x{m2} is too narrow for a third-density layout")));
    }
    {
        let layout = ThirdLayout { space, holes, z: 0, narrow };
        let cap = layout.rows() * layout.cols() - narrow * m1 / 3;
        if inst.len() > cap {
            return Err(Error::Regime(format!("{} robots exceed the {cap} third-density slots", inst.len())));
        }
        if all_home(inst) {
            return Ok(idle_plan(inst));
        }
        let full = fill_virtual(inst, cap, opts.seed)?;
        solve_slotted(&full, &layout, opts)
    }
}

/// Half-density solver on even-sized grids without obstacles.
pub fn solve_grlm(inst: &Instance, opts: &SolverOptions) -> Result<Plan> {
    with_orientation(inst, opts, |inst, opts| {
        let space = &inst.space;
        if !space.obstacles().is_empty() {
            return Err(Error::Regime("the half-density solver does not support obstacles".into()));
        }
        if space.m1() % 2 != 0 || space.m2() % 2 != 0 {
            return Err(Error::Dimension(format!("{}x{} is not even in both dimensions", space.m1(), space.m2())));
        }
        let layout = HalfLayout { space };
        let cap = layout.rows() * layout.cols();
        if inst.len() > cap {
            return Err(Error::Regime(format!("{} robots exceed the {cap} half-density slots", inst.len())));
        }
        if all_home(inst) {
            return Ok(idle_plan(inst));
        }
        let full = fill_virtual(inst, cap, opts.seed)?;
        solve_slotted(&full, &layout, opts)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::compute_metrics;

    fn random_instance(m1: usize, m2: usize, obstacles: &[Cell], n: usize, seed: u64) -> Instance {
        let g = GridSpace::new_2d(m1, m2, obstacles).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let free: Vec<usize> = g.free_cells().collect();
        let s: Vec<Cell> = free.choose_multiple(&mut rng, n).map(|&c| g.cell(c)).collect();
        let t: Vec<Cell> = free.choose_multiple(&mut rng, n).map(|&c| g.cell(c)).collect();
        Instance::new(g, s, t).unwrap()
    }

    fn holes(m1: usize, m2: usize) -> Vec<Cell> {
        (0..m1 / 3).flat_map(|k| (0..m2 / 3).map(move |j| Cell::new(3 * k + 1, 3 * j + 1))).collect()
    }

    #[test]
    fn grm_small_grids() {
        for (m1, m2) in [(3, 3), (6, 4), (5, 5), (4, 7), (12, 9)] {
            for mode in [ShuffleMode::Fast, ShuffleMode::Faster] {
                let inst = random_instance(m1, m2, &[], m1 * m2, 1);
                let p = solve_grm(&inst, &SolverOptions { regime: Regime::Full, mode, ..Default::default() }).unwrap();
                let mk = compute_metrics(&inst, &p).unwrap().makespan as usize;
                if mode == ShuffleMode::Fast {
                    assert!(mk <= 7 * (m1 + 2 * m2), "{m1}x{m2}: {mk}");
                }
            }
        }
    }

    #[test]
    fn grh_with_and_without_holes() {
        let inst = random_instance(12, 9, &[], 36, 4);
        let p = solve_grh(&inst, &SolverOptions::default()).unwrap();
        let mk = compute_metrics(&inst, &p).unwrap().makespan as usize;
        assert!(mk <= 3 * 12 + 4 * 9 + 30);
        let h = holes(12, 9);
        let inst = random_instance(12, 9, &h, 24, 5);
        let p = solve_grh(&inst, &SolverOptions { matching: MatchingKind::Lba, ..Default::default() }).unwrap();
        compute_metrics(&inst, &p).unwrap();
    }

    #[test]
    fn grh_sparse_and_transposed() {
        let inst = random_instance(9, 12, &[], 10, 8);
        for transpose in [false, true] {
            let p = solve_grh(&inst, &SolverOptions { transpose, refine: true, ..Default::default() }).unwrap();
            assert_eq!(p.ids.len(), 10);
            compute_metrics(&inst, &p).unwrap();
        }
    }

    #[test]
    fn grh_narrow_bands() {
        for (m1, m2, seed) in [(6, 4, 1), (9, 7, 2), (30, 20, 3), (20, 30, 4), (3, 2, 5), (12, 5, 6)] {
            let n = m1 * m2 / 3;
            let inst = random_instance(m1, m2, &[], n, seed);
            for matching in [MatchingKind::Hall, MatchingKind::Lba] {
                let p = solve_grh(&inst, &SolverOptions { matching, ..Default::default() }).unwrap();
                let mk = compute_metrics(&inst, &p).unwrap().makespan as usize;
                let (a, b) = (m1.max(m2), m1.min(m2));
                assert!(mk <= 3 * a + 4 * b + 40, "{m1}x{m2}: {mk}");
            }
        }
    }

    #[test]
    fn grh_narrow_exact_capacity() {
        let inst = random_instance(9, 8, &[], 25, 7);
        assert!(matches!(solve_grh(&inst, &SolverOptions::default()), Err(Error::Regime(_))));
        let inst = random_instance(9, 8, &[], 24, 7);
        solve_grh(&inst, &SolverOptions::default()).unwrap();
    }

    #[test]
    fn grlm_small() {
        let inst = random_instance(8, 10, &[], 40, 2);
        let p = solve_grlm(&inst, &SolverOptions { regime: Regime::Half, ..Default::default() }).unwrap();
        compute_metrics(&inst, &p).unwrap();
    }

    #[test]
    fn identity_gives_zero() {
        let g = GridSpace::new_2d(6, 6, &[]).unwrap();
        let cells = vec![Cell::new(0, 0), Cell::new(3, 4)];
        let inst = Instance::new(g, cells.clone(), cells).unwrap();
        for regime in [Regime::Full, Regime::Half, Regime::Third] {
            let p = solve(&inst, &SolverOptions { regime, ..Default::default() }).unwrap();
            assert_eq!(p.horizon, 0);
        }
    }

    #[test]
    fn regime_errors() {
        let inst = random_instance(8, 8, &[], 20, 1);
        assert!(matches!(solve_grh(&inst, &SolverOptions::default()), Err(Error::Dimension(_))));
        let inst = random_instance(9, 8, &holes(9, 8), 20, 1);
        assert!(matches!(solve_grh(&inst, &SolverOptions::default()), Err(Error::Dimension(_))));
        let inst = random_instance(9, 9, &[], 40, 1);
        assert!(matches!(solve_grh(&inst, &SolverOptions::default()), Err(Error::Regime(_))));
    }

    #[test]
    fn fill_counts() {
        let inst = random_instance(30, 30, &[], 150, 3);
        let f = fill_to_density(&inst, Ratio::new(1, 3), 9).unwrap();
        assert_eq!(f.len(), 300);
        assert_eq!(f.virtual_mask.iter().filter(|&&v| v).count(), 150);
        assert!((150..300).all(|i| f.starts[i] == f.goals[i]));
    }
}
