use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gridrr::bench::{bench, Algorithm, BenchAlgo};
use gridrr::pipeline2d::{MatchingKind, SolverOptions};
use gridrr::refine::refine_plan;
use gridrr::scenario::{generate, Density, InstanceSpec, ObstaclePattern, Scenario};
use gridrr::shuffle::ShuffleMode;
use gridrr::{compute_metrics, validate_plan, Cell, Instance, Plan};

#[derive(Parser)]
#[command(name = "gridrr", version, about = "Grid rearrangement planner for labelled robots on 2D and 3D grids")]
struct Cli {
    /// Directory for the block pattern table cache.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an instance as JSON.
    Gen(GenArgs),
    /// Solve an instance and print the plan as JSON.
    Solve(SolveArgs),
    /// Check a plan against an instance.
    Validate(ValidateArgs),
    /// Re-time a valid plan without changing visit orders.
    Refine(ValidateArgs),
    /// Run a benchmark sweep and write CSV.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Grm,
    Grh,
    Grlm,
    Grh3d,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Grm => Algorithm::Grm,
            AlgoArg::Grh => Algorithm::Grh,
            AlgoArg::Grlm => Algorithm::Grlm,
            AlgoArg::Grh3d => Algorithm::Grh3d,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Fast,
    Faster,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatchingArg {
    Hall,
    Lba,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Random,
    Squares,
    Blocks,
}

#[derive(Args, Clone)]
struct InstanceArgs {
    /// Grid size, e.g. 30x20 or 24x12x6.
    #[arg(long, default_value = "30x20")]
    dims: String,
    /// Robot density as a fraction of all cells, e.g. 1/3 or 0.25.
    #[arg(long, default_value = "1/3")]
    density: Density,
    /// `none`, `center-hole`, or a JSON file with a list of 1-based coordinates.
    #[arg(long, default_value = "none")]
    obstacles: String,
    #[arg(long, value_enum, default_value = "random")]
    scenario: ScenarioArg,
}

impl InstanceArgs {
    fn spec(&self, seed: u64) -> Result<InstanceSpec> {
        let dims: Vec<usize> = self.dims.split(['x', 'X']).map(|s| s.trim().parse()).collect::<Result<_, _>>().context("bad --dims")?;
        let obstacles = match self.obstacles.as_str() {
            "none" => ObstaclePattern::None,
            "center-hole" => ObstaclePattern::CenterHole,
            path => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
                let raw: Vec<Vec<usize>> = serde_json::from_str(&text).context("obstacle list")?;
                ObstaclePattern::Custom(raw.iter().map(|v| cell_from_one_based(v)).collect::<Result<_>>()?)
            }
        };
        let scenario = match self.scenario {
            ScenarioArg::Random => Scenario::Random,
            ScenarioArg::Squares => Scenario::Squares,
            ScenarioArg::Blocks => Scenario::Blocks,
        };
        Ok(InstanceSpec { dims, density: self.density, obstacles, scenario, seed })
    }
}

fn cell_from_one_based(v: &[usize]) -> Result<Cell> {
    match *v {
        [x, y] if x >= 1 && y >= 1 => Ok(Cell::new(x - 1, y - 1)),
        [x, y, z] if x >= 1 && y >= 1 && z >= 1 => Ok(Cell::new3(x - 1, y - 1, z - 1)),
        _ => bail!("bad coordinate {v:?}; coordinates are 1-based"),
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "grh")]
    algo: AlgoArg,
    #[arg(long, value_enum, default_value = "fast")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "hall")]
    matching: MatchingArg,
    /// Apply order-preserving refinement to the plan.
    #[arg(long)]
    refine: bool,
}

impl SolverArgs {
    fn options(&self, seed: u64) -> SolverOptions {
        SolverOptions {
            mode: match self.mode {
                ModeArg::Fast => ShuffleMode::Fast,
                ModeArg::Faster => ShuffleMode::Faster,
            },
            matching: match self.matching {
                MatchingArg::Hall => MatchingKind::Hall,
                MatchingArg::Lba => MatchingKind::Lba,
            },
            refine: self.refine,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Instance JSON; stdin when absent or `-`.
    input: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Seed for virtual robot placement.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Instance JSON.
    instance: PathBuf,
    /// Plan JSON; stdin when absent or `-`.
    plan: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Grid sizes as a comma separated list of `AxB` or `AxBxC`.
    #[arg(long, value_delimiter = ',', default_value = "30x20")]
    dims: Vec<String>,
    #[arg(long, default_value = "1/3")]
    density: Density,
    #[arg(long, default_value = "none")]
    obstacles: String,
    #[arg(long, value_enum, default_value = "random")]
    scenario: ScenarioArg,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "grh")]
    algo: Vec<AlgoArg>,
    #[arg(long, value_enum, default_value = "fast")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "hall")]
    matching: MatchingArg,
    #[arg(long)]
    refine: bool,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_input(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) if p != Path::new("-") => fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
        _ => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).context("reading stdin")?;
            Ok(s)
        }
    }
}

fn write_output(path: Option<&Path>, body: &str) -> Result<()> {
    let body = format!("{}\n", body.trim_end());
    match path {
        Some(p) => fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => Ok(io::stdout().lock().write_all(body.as_bytes())?),
    }
}

fn check(inst: &Instance, plan: &Plan) -> Result<bool> {
    let report = validate_plan(inst, plan)?;
    for v in report.violations.iter().take(20) {
        eprintln!("violation: {:?} at t={} robots {:?}", v.kind, v.time, v.robots);
    }
    if report.violations.len() > 20 {
        eprintln!("... {} violations in total", report.violations.len());
    }
    Ok(report.valid)
}

fn run(cli: Cli) -> Result<bool> {
    if cli.cache_dir.is_some() {
        gridrr::blocks::set_cache_dir(cli.cache_dir.clone());
    }
    match cli.cmd {
        Cmd::Gen(a) => {
            let inst = generate(&a.instance.spec(a.seed)?)?;
            write_output(a.out.as_deref(), &inst.to_json())?;
            Ok(true)
        }
        Cmd::Solve(a) => {
            let inst = Instance::from_json(&read_input(a.input.as_deref())?)?;
            let algo: Algorithm = a.solver.algo.into();
            let plan = algo.solve(&inst, &a.solver.options(a.seed))?;
            let m = compute_metrics(&inst, &plan)?;
            eprintln!("makespan {} soc {} lower bound {} ratio {:.3}", m.makespan, m.soc, m.lower_bound, m.ratio_f64());
            write_output(a.out.as_deref(), &plan.to_json(inst.space.is_3d()))?;
            Ok(true)
        }
        Cmd::Validate(a) => {
            let inst = Instance::from_json(&read_input(Some(&a.instance))?)?;
            let plan = Plan::from_json(&read_input(a.plan.as_deref())?)?;
            let ok = check(&inst, &plan)?;
            let line = if ok {
                let m = compute_metrics(&inst, &plan)?;
                format!("valid makespan={} soc={} lower_bound={} ratio={:.4}", m.makespan, m.soc, m.lower_bound, m.ratio_f64())
            } else {
                "invalid".to_string()
            };
            write_output(a.out.as_deref(), &line)?;
            Ok(ok)
        }
        Cmd::Refine(a) => {
            let inst = Instance::from_json(&read_input(Some(&a.instance))?)?;
            let plan = Plan::from_json(&read_input(a.plan.as_deref())?)?;
            if !check(&inst, &plan)? {
                return Ok(false);
            }
            let refined = refine_plan(&inst, &plan)?;
            let ok = check(&inst, &refined)?;
            write_output(a.out.as_deref(), &refined.to_json(inst.space.is_3d()))?;
            Ok(ok)
        }
        Cmd::Bench(a) => {
            let shape = InstanceArgs { dims: String::new(), density: a.density, obstacles: a.obstacles.clone(), scenario: a.scenario };
            let specs = a
                .dims
                .iter()
                .map(|d| InstanceArgs { dims: d.clone(), ..shape.clone() }.spec(0))
                .collect::<Result<Vec<_>>>()?;
            let solver = SolverArgs { algo: AlgoArg::Grh, mode: a.mode, matching: a.matching, refine: a.refine };
            let algos: Vec<BenchAlgo> = a.algo.iter().map(|&x| BenchAlgo::new(x.into(), solver.options(0))).collect();
            let seeds: Vec<u64> = (a.seed..a.seed + a.seeds).collect();
            let report = bench(&specs, &algos, &seeds)?;
            let csv = report.to_csv()?;
            write_output(a.out.as_deref(), &csv)?;
            let failed = report.rows.iter().filter(|r| !r.ok()).count();
            if failed > 0 {
                eprintln!("{failed} of {} runs failed", report.rows.len());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
