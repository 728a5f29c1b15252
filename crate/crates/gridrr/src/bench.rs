//! Benchmark sweeps: generate instances, run solvers in parallel, validate
//! every plan and record one CSV row per run.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridSpace, Instance, Plan};
use crate::pipeline2d::{solve_grh, solve_grlm, solve_grm, Regime, SolverOptions};
use crate::pipeline3d::solve_grh3d;
use crate::scenario::{generate, InstanceSpec};
use crate::shuffle::ShuffleMode;
use crate::validate::compute_metrics;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Grm,
    #[default]
    Grh,
    Grlm,
    Grh3d,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Grm, Algorithm::Grh, Algorithm::Grlm, Algorithm::Grh3d];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Grm => "grm",
            Algorithm::Grh => "grh",
            Algorithm::Grlm => "grlm",
            Algorithm::Grh3d => "grh3d",
        }
    }

    pub fn regime(self) -> Regime {
        match self {
            Algorithm::Grm => Regime::Full,
            Algorithm::Grlm => Regime::Half,
            Algorithm::Grh | Algorithm::Grh3d => Regime::Third,
        }
    }

    pub fn solve(self, inst: &Instance, opts: &SolverOptions) -> Result<Plan> {
        let opts = SolverOptions { regime: self.regime(), ..*opts };
        match self {
            Algorithm::Grm => solve_grm(inst, &opts),
            Algorithm::Grh => solve_grh(inst, &opts),
            Algorithm::Grlm => solve_grlm(inst, &opts),
            Algorithm::Grh3d => solve_grh3d(inst, &opts),
        }
    }

    /// Makespan guarantee on this grid.
    pub fn bound(self, space: &GridSpace, mode: ShuffleMode) -> u64 {
        let (m1, m2, m3) = (space.m1() as u64, space.m2() as u64, space.m3() as u64);
        let lg = |x: u64| u64::from(x.max(1).next_power_of_two().trailing_zeros());
        match (self, mode) {
            (Algorithm::Grm, ShuffleMode::Fast) => 7 * (m1 + 2 * m2),
            (Algorithm::Grm, ShuffleMode::Faster) => 4 * (m1 + 2 * m2) + 8,
            (Algorithm::Grh, _) => 3 * m1 + 4 * m2 + 30,
            (Algorithm::Grlm, _) => 3 * m1 + 4 * m2 + 2 * (lg(m1) + lg(m2)) + 8,
            (Algorithm::Grh3d, _) => 3 * m1 + 4 * m2 + 4 * m3 + 40,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Malformed(format!("unknown algorithm {s:?}")))
    }
}

/// A solver with its options, reported under `label`.
#[derive(Clone, Debug)]
pub struct BenchAlgo {
    pub label: String,
    pub algorithm: Algorithm,
    pub options: SolverOptions,
}

impl BenchAlgo {
    pub fn new(algorithm: Algorithm, options: SolverOptions) -> Self {
        BenchAlgo { label: algorithm.name().to_string(), algorithm, options }
    }
}

pub const CSV_HEADER: [&str; 10] =
    ["spec_digest", "algorithm", "seed", "makespan", "soc", "lower_bound", "ratio", "runtime_ms", "bound_satisfied", "status"];

/// One run. Failed runs keep only the identifying columns and the error in `status`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub spec_digest: String,
    pub algorithm: String,
    pub seed: u64,
    pub makespan: Option<u64>,
    pub soc: Option<u64>,
    pub lower_bound: Option<u64>,
    pub ratio: Option<f64>,
    pub runtime_ms: u64,
    pub bound_satisfied: Option<bool>,
    pub status: String,
}

impl BenchRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        out.write_record(CSV_HEADER)?;
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Malformed(e.to_string()))
    }

    /// Mean of `f` over the successful rows of `label` whose digest is `digest`.
    pub fn mean(&self, digest: &str, label: &str, f: impl Fn(&BenchRow) -> Option<f64>) -> Option<f64> {
        let v: Vec<f64> = self.rows.iter().filter(|r| r.spec_digest == digest && r.algorithm == label).filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

fn run_one(spec: &InstanceSpec, algo: &BenchAlgo) -> Result<BenchRow> {
    let mut row = BenchRow {
        spec_digest: spec.digest(),
        algorithm: algo.label.clone(),
        seed: spec.seed,
        makespan: None,
        soc: None,
        lower_bound: None,
        ratio: None,
        runtime_ms: 0,
        bound_satisfied: None,
        status: "ok".into(),
    };
    let inst = match generate(spec) {
        Ok(i) => i,
        Err(e @ (Error::Regime(_) | Error::Dimension(_))) => {
            row.status = e.to_string();
            return Ok(row);
        }
        Err(e) => return Err(e),
    };
    let opts = SolverOptions { seed: spec.seed, ..algo.options };
    let t = Instant::now();
    let plan = match algo.algorithm.solve(&inst, &opts) {
        Ok(p) => p,
        Err(e @ (Error::Regime(_) | Error::Dimension(_))) => {
            row.status = e.to_string();
            return Ok(row);
        }
        Err(e) => return Err(e),
    };
    row.runtime_ms = t.elapsed().as_millis() as u64;
    let m = compute_metrics(&inst, &plan)?;
    row.makespan = Some(m.makespan);
    row.soc = Some(m.soc);
    row.lower_bound = Some(m.lower_bound);
    row.ratio = Some(m.ratio_f64());
    row.bound_satisfied = Some(m.makespan <= algo.algorithm.bound(&inst.space, opts.mode));
    Ok(row)
}

/// Runs every spec under every seed with every algorithm. Regime and
/// dimension errors become failed rows; an invalid plan aborts the sweep.
/// Rows come out in spec, seed, algorithm order.
pub fn bench(specs: &[InstanceSpec], algos: &[BenchAlgo], seeds: &[u64]) -> Result<BenchReport> {
    let jobs: Vec<(InstanceSpec, &BenchAlgo)> = specs
        .iter()
        .flat_map(|s| seeds.iter().map(move |&seed| InstanceSpec { seed, ..s.clone() }))
        .flat_map(|s| algos.iter().map(move |a| (s.clone(), a)))
        .collect();
    let rows = jobs.par_iter().map(|(s, a)| run_one(s, a)).collect::<Result<Vec<_>>>()?;
    Ok(BenchReport { rows })
}
