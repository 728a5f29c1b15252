//! Grid workspace, robot instances and plans.

use std::collections::VecDeque;

use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

pub type RobotId = u64;

/// A grid vertex, 0-based. `z` is 0 on 2D grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Cell {
    pub x: u16,
    pub y: u16,
    pub z: u16,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Cell { x: x as u16, y: y as u16, z: 0 }
    }

    pub const fn new3(x: usize, y: usize, z: usize) -> Self {
        Cell { x: x as u16, y: y as u16, z: z as u16 }
    }

    pub fn manhattan(self, o: Cell) -> usize {
        (self.x.abs_diff(o.x) + self.y.abs_diff(o.y) + self.z.abs_diff(o.z)) as usize
    }

    pub fn is_adjacent(self, o: Cell) -> bool {
        self.manhattan(o) == 1
    }

    pub fn transposed(self) -> Cell {
        Cell { x: self.y, y: self.x, z: self.z }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSpace {
    m1: usize,
    m2: usize,
    m3: usize,
    three_d: bool,
    blocked: Vec<bool>,
    obstacles: Vec<Cell>,
}

impl GridSpace {
    pub fn new_2d(m1: usize, m2: usize, obstacles: &[Cell]) -> Result<Self> {
        Self::build(m1, m2, 1, false, obstacles)
    }

    pub fn new_3d(m1: usize, m2: usize, m3: usize, obstacles: &[Cell]) -> Result<Self> {
        Self::build(m1, m2, m3, true, obstacles)
    }

    fn build(m1: usize, m2: usize, m3: usize, three_d: bool, obstacles: &[Cell]) -> Result<Self> {
        if m1 == 0 || m2 == 0 || m3 == 0 {
            return Err(Error::Malformed("grid dimensions must be positive".into()));
        }
        if m1 > u16::MAX as usize || m2 > u16::MAX as usize || m3 > u16::MAX as usize {
            return Err(Error::Malformed("grid dimension too large".into()));
        }
        let mut g = GridSpace {
            m1,
            m2,
            m3,
            three_d,
            blocked: vec![false; m1 * m2 * m3],
            obstacles: Vec::new(),
        };
        for &c in obstacles {
            if !g.contains(c) {
                return Err(Error::Malformed(format!("obstacle {c:?} out of bounds")));
            }
            let i = g.index(c);
            if !g.blocked[i] {
                g.blocked[i] = true;
                g.obstacles.push(c);
            }
        }
        g.obstacles.sort_unstable();
        if !g.is_connected() {
            return Err(Error::Malformed("free cells are not connected".into()));
        }
        Ok(g)
    }

    pub fn m1(&self) -> usize {
        self.m1
    }
    pub fn m2(&self) -> usize {
        self.m2
    }
    pub fn m3(&self) -> usize {
        self.m3
    }
    pub fn is_3d(&self) -> bool {
        self.three_d
    }
    pub fn obstacles(&self) -> &[Cell] {
        &self.obstacles
    }
    pub fn num_cells(&self) -> usize {
        self.blocked.len()
    }
    pub fn num_free(&self) -> usize {
        self.blocked.len() - self.obstacles.len()
    }

    pub fn contains(&self, c: Cell) -> bool {
        (c.x as usize) < self.m1 && (c.y as usize) < self.m2 && (c.z as usize) < self.m3
    }

    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        (c.z as usize * self.m1 + c.x as usize) * self.m2 + c.y as usize
    }

    #[inline]
    pub fn cell(&self, i: usize) -> Cell {
        let y = i % self.m2;
        let r = i / self.m2;
        Cell::new3(r % self.m1, y, r / self.m1)
    }

    #[inline]
    pub fn is_free(&self, i: usize) -> bool {
        !self.blocked[i]
    }

    pub fn is_free_cell(&self, c: Cell) -> bool {
        self.contains(c) && !self.blocked[self.index(c)]
    }

    /// Free neighbours of cell index `i`, written into `out`; returns the count.
    #[inline]
    pub fn neighbors(&self, i: usize, out: &mut [usize; 6]) -> usize {
        let c = self.cell(i);
        let mut k = 0;
        let mut push = |j: usize| {
            if !self.blocked[j] {
                out[k] = j;
                k += 1;
            }
        };
        if c.x > 0 {
            push(i - self.m2);
        }
        if (c.x as usize) + 1 < self.m1 {
            push(i + self.m2);
        }
        if c.y > 0 {
            push(i - 1);
        }
        if (c.y as usize) + 1 < self.m2 {
            push(i + 1);
        }
        if self.three_d {
            let plane = self.m1 * self.m2;
            if c.z > 0 {
                push(i - plane);
            }
            if (c.z as usize) + 1 < self.m3 {
                push(i + plane);
            }
        }
        k
    }

    pub fn free_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.blocked.len()).filter(|&i| !self.blocked[i])
    }

    /// Multi-source BFS over free cells. Unreached cells get `u32::MAX`.
    pub fn bfs(&self, sources: impl IntoIterator<Item = usize>) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.blocked.len()];
        let mut q = VecDeque::new();
        for s in sources {
            if dist[s] != 0 {
                dist[s] = 0;
                q.push_back(s);
            }
        }
        let mut nb = [0usize; 6];
        while let Some(u) = q.pop_front() {
            let k = self.neighbors(u, &mut nb);
            for &v in &nb[..k] {
                if dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
            }
        }
        dist
    }

    fn is_connected(&self) -> bool {
        match self.free_cells().next() {
            None => true,
            Some(s) => self.bfs([s]).iter().filter(|&&d| d != u32::MAX).count() == self.num_free(),
        }
    }

    pub fn transposed(&self) -> Result<GridSpace> {
        let obs: Vec<Cell> = self.obstacles.iter().map(|c| c.transposed()).collect();
        Self::build(self.m2, self.m1, self.m3, self.three_d, &obs)
    }
}

/// Labelled robots with injective start and goal configurations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub space: GridSpace,
    pub ids: Vec<RobotId>,
    pub starts: Vec<Cell>,
    pub goals: Vec<Cell>,
    pub virtual_mask: Vec<bool>,
}

impl Instance {
    pub fn new(space: GridSpace, starts: Vec<Cell>, goals: Vec<Cell>) -> Result<Self> {
        let n = starts.len();
        let ids = (1..=n as RobotId).collect();
        Self::with_ids(space, ids, starts, goals, vec![false; n])
    }

    pub fn with_ids(
        space: GridSpace,
        ids: Vec<RobotId>,
        starts: Vec<Cell>,
        goals: Vec<Cell>,
        virtual_mask: Vec<bool>,
    ) -> Result<Self> {
        let n = starts.len();
        if goals.len() != n || ids.len() != n || virtual_mask.len() != n {
            return Err(Error::Malformed("start/goal/id arrays differ in length".into()));
        }
        let mut seen_id = ids.clone();
        seen_id.sort_unstable();
        if seen_id.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Malformed("duplicate robot id".into()));
        }
        for (what, cfg) in [("start", &starts), ("goal", &goals)] {
            let mut used = vec![false; space.num_cells()];
            for &c in cfg.iter() {
                if !space.contains(c) {
                    return Err(Error::Malformed(format!("{what} {c:?} out of bounds")));
                }
                if !space.is_3d() && c.z != 0 {
                    return Err(Error::Malformed(format!("{what} {c:?} has a depth index on a 2D grid")));
                }
                let i = space.index(c);
                if !space.is_free(i) {
                    return Err(Error::Malformed(format!("{what} {c:?} is an obstacle")));
                }
                if used[i] {
                    return Err(Error::Malformed(format!("{what} configuration is not injective at {c:?}")));
                }
                used[i] = true;
            }
        }
        Ok(Instance { space, ids, starts, goals, virtual_mask })
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn num_real(&self) -> usize {
        self.virtual_mask.iter().filter(|&&v| !v).count()
    }

    /// Same robots with starts and goals exchanged.
    pub fn reversed(&self) -> Instance {
        Instance { goals: self.starts.clone(), starts: self.goals.clone(), ..self.clone() }
    }

    pub fn transposed(&self) -> Result<Instance> {
        Ok(Instance {
            space: self.space.transposed()?,
            ids: self.ids.clone(),
            starts: self.starts.iter().map(|c| c.transposed()).collect(),
            goals: self.goals.iter().map(|c| c.transposed()).collect(),
            virtual_mask: self.virtual_mask.clone(),
        })
    }

    pub fn from_json(s: &str) -> Result<Instance> {
        let raw: InstanceJson = serde_json::from_str(s)?;
        raw.into_instance()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&InstanceJson::from_instance(self)).expect("instance serializes")
    }
}

/// Per-robot vertex sequences over a common horizon.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plan {
    pub horizon: usize,
    pub ids: Vec<RobotId>,
    pub paths: Vec<Vec<Cell>>,
}

impl Plan {
    /// The plan where every robot of `inst` rests at its start.
    pub fn waiting(inst: &Instance) -> Plan {
        Plan { horizon: 0, ids: inst.ids.clone(), paths: inst.starts.iter().map(|&c| vec![c]).collect() }
    }

    pub fn reversed(&self) -> Plan {
        Plan {
            horizon: self.horizon,
            ids: self.ids.clone(),
            paths: self.paths.iter().map(|p| p.iter().rev().copied().collect()).collect(),
        }
    }

    pub fn transposed(&self) -> Plan {
        Plan {
            horizon: self.horizon,
            ids: self.ids.clone(),
            paths: self.paths.iter().map(|p| p.iter().map(|c| c.transposed()).collect()).collect(),
        }
    }

    /// Drops trailing steps in which no robot moves.
    pub fn trim(&mut self) {
        let mut t = self.horizon;
        while t > 0 && self.paths.iter().all(|p| p[t] == p[t - 1]) {
            t -= 1;
        }
        for p in &mut self.paths {
            p.truncate(t + 1);
        }
        self.horizon = t;
    }

    pub fn to_json(&self, three_d: bool) -> String {
        serde_json::to_string(&PlanJsonOut { plan: self, three_d }).expect("plan serializes")
    }

    /// Parses plan JSON; path keys are robot ids, emitted in ascending numeric order.
    pub fn from_json(s: &str) -> Result<Plan> {
        #[derive(Deserialize)]
        struct Raw {
            horizon: usize,
            paths: std::collections::BTreeMap<String, Vec<Vec<usize>>>,
        }
        let raw: Raw = serde_json::from_str(s)?;
        let mut entries = Vec::with_capacity(raw.paths.len());
        for (k, path) in raw.paths {
            let id: RobotId = k.parse().map_err(|_| Error::Malformed(format!("robot id {k:?} is not an integer")))?;
            let cells = path.iter().map(|v| coord_from_json(v)).collect::<Result<Vec<_>>>()?;
            entries.push((id, cells));
        }
        entries.sort_by_key(|e| e.0);
        let (ids, paths) = entries.into_iter().unzip();
        Ok(Plan { horizon: raw.horizon, ids, paths })
    }
}

fn coord_from_json(v: &[usize]) -> Result<Cell> {
    match *v {
        [x, y] if x >= 1 && y >= 1 => Ok(Cell::new(x - 1, y - 1)),
        [x, y, z] if x >= 1 && y >= 1 && z >= 1 => Ok(Cell::new3(x - 1, y - 1, z - 1)),
        _ => Err(Error::Malformed(format!("bad coordinate {v:?} (coordinates are 1-based)"))),
    }
}

fn coord_to_json(c: Cell, three_d: bool) -> Vec<usize> {
    if three_d {
        vec![c.x as usize + 1, c.y as usize + 1, c.z as usize + 1]
    } else {
        vec![c.x as usize + 1, c.y as usize + 1]
    }
}

#[derive(Serialize, Deserialize)]
struct RobotJson {
    id: RobotId,
    start: Vec<usize>,
    goal: Vec<usize>,
    #[serde(default, rename = "virtual")]
    is_virtual: bool,
}

#[derive(Serialize, Deserialize)]
struct InstanceJson {
    dims: Vec<usize>,
    #[serde(default)]
    obstacles: Vec<Vec<usize>>,
    robots: Vec<RobotJson>,
}

impl InstanceJson {
    fn into_instance(self) -> Result<Instance> {
        let obstacles = self.obstacles.iter().map(|v| coord_from_json(v)).collect::<Result<Vec<_>>>()?;
        let space = match self.dims[..] {
            [m1, m2] => GridSpace::new_2d(m1, m2, &obstacles)?,
            [m1, m2, m3] => GridSpace::new_3d(m1, m2, m3, &obstacles)?,
            _ => return Err(Error::Malformed("dims must have 2 or 3 entries".into())),
        };
        let mut robots = self.robots;
        robots.sort_by_key(|r| r.id);
        let mut ids = Vec::with_capacity(robots.len());
        let mut starts = Vec::with_capacity(robots.len());
        let mut goals = Vec::with_capacity(robots.len());
        let mut mask = Vec::with_capacity(robots.len());
        for r in robots {
            ids.push(r.id);
            starts.push(coord_from_json(&r.start)?);
            goals.push(coord_from_json(&r.goal)?);
            mask.push(r.is_virtual);
        }
        Instance::with_ids(space, ids, starts, goals, mask)
    }

    fn from_instance(inst: &Instance) -> Self {
        let s = &inst.space;
        let d = s.is_3d();
        let dims = if d { vec![s.m1(), s.m2(), s.m3()] } else { vec![s.m1(), s.m2()] };
        InstanceJson {
            dims,
            obstacles: s.obstacles().iter().map(|&c| coord_to_json(c, d)).collect(),
            robots: (0..inst.len())
                .map(|i| RobotJson {
                    id: inst.ids[i],
                    start: coord_to_json(inst.starts[i], d),
                    goal: coord_to_json(inst.goals[i], d),
                    is_virtual: inst.virtual_mask[i],
                })
                .collect(),
        }
    }
}

struct PlanJsonOut<'a> {
    plan: &'a Plan,
    three_d: bool,
}

struct PathsOut<'a>(&'a PlanJsonOut<'a>);

impl Serialize for PathsOut<'_> {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let plan = self.0.plan;
        let mut order: Vec<usize> = (0..plan.ids.len()).collect();
        order.sort_by_key(|&i| plan.ids[i]);
        let mut m = ser.serialize_map(Some(order.len()))?;
        for i in order {
            let path: Vec<Vec<usize>> = plan.paths[i].iter().map(|&c| coord_to_json(c, self.0.three_d)).collect();
            m.serialize_entry(&plan.ids[i].to_string(), &path)?;
        }
        m.end()
    }
}

impl Serialize for PlanJsonOut<'_> {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = ser.serialize_struct("Plan", 2)?;
        st.serialize_field("horizon", &self.plan.horizon)?;
        st.serialize_field("paths", &PathsOut(self))?;
        st.end()
    }
}
