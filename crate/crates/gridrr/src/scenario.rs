//! Instance generators: uniform random, concentric square rings and block exchanges.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Cell, GridSpace, Instance};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Scenario {
    #[default]
    Random,
    Squares,
    Blocks,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub enum ObstaclePattern {
    #[default]
    None,
    /// One obstacle in the middle of every 3x3 cell.
    CenterHole,
    Custom(Vec<Cell>),
}

/// Robot density as an exact fraction of all grid cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Density(pub Ratio<u64>);

impl Default for Density {
    fn default() -> Self {
        Density(Ratio::new(1, 3))
    }
}

impl FromStr for Density {
    type Err = Error;

    /// Accepts `a/b`, integers and decimals such as `0.25`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Malformed(format!("cannot parse density {s:?}"));
        let r = if let Some((a, b)) = s.split_once('/') {
            let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if b == 0 {
                return Err(bad());
            }
            Ratio::new(a, b)
        } else if let Some((i, f)) = s.split_once('.') {
            if f.len() > 12 || !f.chars().all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            let i: u64 = if i.is_empty() { 0 } else { i.parse().map_err(|_| bad())? };
            let den = 10u64.pow(f.len() as u32);
            let f: u64 = if f.is_empty() { 0 } else { f.parse().map_err(|_| bad())? };
            Ratio::new(i * den + f, den)
        } else {
            Ratio::from_integer(s.parse().map_err(|_| bad())?)
        };
        if r > Ratio::from_integer(1) {
            return Err(Error::Malformed(format!("density {s} exceeds 1")));
        }
        Ok(Density(r))
    }
}

impl fmt::Display for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct InstanceSpec {
    pub dims: Vec<usize>,
    pub density: Density,
    pub obstacles: ObstaclePattern,
    pub scenario: Scenario,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn random(dims: &[usize], density: Ratio<u64>, seed: u64) -> Self {
        InstanceSpec { dims: dims.to_vec(), density: Density(density), seed, ..Default::default() }
    }

    /// Short stable description used as a report key.
    pub fn digest(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        let obs = match &self.obstacles {
            ObstaclePattern::None => "none".to_string(),
            ObstaclePattern::CenterHole => "center-hole".to_string(),
            ObstaclePattern::Custom(c) => format!("custom{}", c.len()),
        };
        let sc = match self.scenario {
            Scenario::Random => "random",
            Scenario::Squares => "squares",
            Scenario::Blocks => "blocks",
        };
        format!("{sc}-{}-d{}-{obs}", dims.join("x"), self.density)
    }
}

pub fn center_holes(m1: usize, m2: usize) -> Vec<Cell> {
    (0..m1 / 3).flat_map(|k| (0..m2 / 3).map(move |j| Cell::new(3 * k + 1, 3 * j + 1))).collect()
}

fn space_for(spec: &InstanceSpec) -> Result<GridSpace> {
    let obstacles = match &spec.obstacles {
        ObstaclePattern::None => Vec::new(),
        ObstaclePattern::CenterHole => {
            if spec.dims.len() != 2 {
                return Err(Error::Regime("center-hole obstacles are only defined on 2D grids".into()));
            }
            center_holes(spec.dims[0], spec.dims[1])
        }
        ObstaclePattern::Custom(c) => c.clone(),
    };
    match spec.dims[..] {
        [m1, m2] => GridSpace::new_2d(m1, m2, &obstacles),
        [m1, m2, m3] => GridSpace::new_3d(m1, m2, m3, &obstacles),
        _ => Err(Error::Dimension("dims must have two or three entries".into())),
    }
}

/// Deterministic instance for a spec.
pub fn generate(spec: &InstanceSpec) -> Result<Instance> {
    let space = space_for(spec)?;
    let n = crate::pipeline2d::density_count(&space, spec.density.0);
    if n > space.num_free() {
        return Err(Error::Regime(format!("{n} robots do not fit on {} free cells", space.num_free())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (starts, goals) = match spec.scenario {
        Scenario::Random => {
            let free: Vec<usize> = space.free_cells().collect();
            let s: Vec<Cell> = free.choose_multiple(&mut rng, n).map(|&c| space.cell(c)).collect();
            let g: Vec<Cell> = free.choose_multiple(&mut rng, n).map(|&c| space.cell(c)).collect();
            (s, g)
        }
        Scenario::Squares => squares(&space, n)?,
        Scenario::Blocks => blocks(&space, spec.density.0, &mut rng)?,
    };
    Instance::new(space, starts, goals)
}

/// Rings 1, 4, 7, ... counted from the border, added whole while they fit in `n`.
/// Every goal is the 180-degree rotation of its start.
fn squares(space: &GridSpace, n: usize) -> Result<(Vec<Cell>, Vec<Cell>)> {
    if space.is_3d() || !space.obstacles().is_empty() {
        return Err(Error::Regime("the squares scenario needs an empty 2D grid".into()));
    }
    let (m1, m2) = (space.m1(), space.m2());
    let mut s = Vec::new();
    let mut k = 1;
    while 2 * k < m1.min(m2) {
        let ring: Vec<Cell> = (k..m1 - k)
            .flat_map(|x| (k..m2 - k).map(move |y| Cell::new(x, y)))
            .filter(|c| (c.x as usize) == k || (c.x as usize) == m1 - 1 - k || (c.y as usize) == k || (c.y as usize) == m2 - 1 - k)
            .collect();
        if s.len() + ring.len() > n {
            break;
        }
        s.extend(ring);
        k += 3;
    }
    let g = s.iter().map(|c| Cell::new(m1 - 1 - c.x as usize, m2 - 1 - c.y as usize)).collect();
    Ok((s, g))
}

/// Square blocks (side 6 when the grid allows it, else 3) exchange their
/// robots along a random derangement; robots pair with goals in sorted order.
fn blocks(space: &GridSpace, density: Ratio<u64>, rng: &mut ChaCha8Rng) -> Result<(Vec<Cell>, Vec<Cell>)> {
    if space.is_3d() || !space.obstacles().is_empty() {
        return Err(Error::Regime("the blocks scenario needs an empty 2D grid".into()));
    }
    let (m1, m2) = (space.m1(), space.m2());
    let side = if m1 % 6 == 0 && m2 % 6 == 0 {
        6
    } else if m1 % 3 == 0 && m2 % 3 == 0 {
        3
    } else {
        return Err(Error::Dimension("blocks need dimensions divisible by 3".into()));
    };
    let nb = (m1 / side) * (m2 / side);
    if nb < 2 {
        return Err(Error::Dimension("blocks need at least two blocks".into()));
    }
    let per = (Ratio::from_integer((side * side) as u64) * density).to_integer() as usize;
    // Sattolo's algorithm yields a single cycle, hence no fixed block
    let mut target: Vec<usize> = (0..nb).collect();
    for i in (1..nb).rev() {
        let j = rng.gen_range(0..i);
        target.swap(i, j);
    }
    let origin = |b: usize| ((b / (m2 / side)) * side, (b % (m2 / side)) * side);
    let local: Vec<(usize, usize)> = (0..side).flat_map(|x| (0..side).map(move |y| (x, y))).collect();
    let (mut s, mut g) = (Vec::new(), Vec::new());
    for (b, &tb) in target.iter().enumerate() {
        let mut a: Vec<(usize, usize)> = local.choose_multiple(rng, per).copied().collect();
        let mut c: Vec<(usize, usize)> = local.choose_multiple(rng, per).copied().collect();
        a.sort_unstable();
        c.sort_unstable();
        let (ox, oy) = origin(b);
        let (tx, ty) = origin(tb);
        s.extend(a.iter().map(|&(x, y)| Cell::new(ox + x, oy + y)));
        g.extend(c.iter().map(|&(x, y)| Cell::new(tx + x, ty + y)));
    }
    Ok((s, g))
}
