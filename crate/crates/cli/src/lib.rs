//! File formats and command implementations behind the `anm` binary.

pub mod config;
pub mod mesh_io;
pub mod report;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anm_core::anm::{continuation, equational_continuation, Homotopy, Options, Solution};
use anm_core::fem::{self, FemSolution, TetMesh};
use anm_core::{toy, Error};
use rand::{Rng, SeedableRng};

pub use report::{ErrorReport, PhaseReport, RunReport, StepReport};

/// Unreadable or invalid input; exit status 2.
#[derive(Debug, Clone, PartialEq)]
pub struct InputError(pub String);

impl InputError {
    pub fn new(msg: impl Into<String>) -> Self {
        InputError(msg.into())
    }

    /// Diagnostic pointing at `file:line`.
    pub fn at(file: &Path, line: usize, msg: impl fmt::Display) -> Self {
        InputError(format!("{}:{line}: {msg}", file.display()))
    }
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

#[derive(Debug)]
pub enum CliError {
    Input(InputError),
    Solver(Error, Box<RunReport>),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Solver(..) | CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(e) => write!(f, "input error: {e}"),
            CliError::Solver(e, _) => write!(f, "solver failure: {e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<InputError> for CliError {
    fn from(e: InputError) -> Self {
        CliError::Input(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Problem {
    Forward,
    Inverse,
    Deform,
}

impl Problem {
    pub fn as_str(self) -> &'static str {
        match self {
            Problem::Forward => "forward",
            Problem::Inverse => "inverse",
            Problem::Deform => "deform",
        }
    }
}

/// Solver flags that override the configuration file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub order: Option<usize>,
    pub eps_rov: Option<f64>,
    pub eps_res: Option<f64>,
    pub no_pade: bool,
}

impl Overrides {
    pub fn apply(&self, o: &mut Options) {
        if let Some(n) = self.order {
            o.order = n;
        }
        if let Some(e) = self.eps_rov {
            o.eps_rov = e;
        }
        if let Some(e) = self.eps_res {
            o.eps_res = e;
        }
        if self.no_pade {
            o.pade = false;
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ToyArgs {
    pub overrides: Overrides,
    pub equational: bool,
}

/// Circle–ellipse intersection from `(0, −1)`. The range-of-validity
/// tolerance defaults to 1e-6 here.
pub fn run_toy(args: &ToyArgs) -> Result<RunReport, CliError> {
    let mut opts = Options {
        eps_rov: 1e-6,
        ..Options::default()
    };
    args.overrides.apply(&mut opts);
    if opts.order < 3 {
        return Err(InputError::new("toy problem needs order at least 3").into());
    }
    let start = Instant::now();
    let mut ok = |_: &[f64], _: f64| Ok(());
    let (label, sol) = if args.equational {
        let g = toy::system_graph().map_err(|e| solver_failure("toy", e))?;
        ("equational", equational_continuation(&g, &[0.0, 0.0], &toy::START, &opts, &mut ok))
    } else {
        let g = toy::homotopy_graph().map_err(|e| solver_failure("toy", e))?;
        ("plain", continuation(&Homotopy::new(&g), &toy::START, 0.0, 1.0, &opts, &mut ok))
    };
    let sol: Solution = sol.map_err(|e| solver_failure("toy", e))?;
    let mut r = RunReport::new("toy");
    r.phases.push(PhaseReport {
        label: label.into(),
        segment: 0,
        iterations: sol.trace.iterations(),
    });
    r.steps = sol.trace.steps.iter().map(|s| StepReport::from_record(0, s)).collect();
    r.iterations = r.steps.len();
    r.residual_rms = toy::residual(&sol.x);
    r.solution = Some(sol.x.clone());
    r.wall_time_s = start.elapsed().as_secs_f64();
    Ok(r)
}

fn solver_failure(command: &str, e: Error) -> CliError {
    let mut r = RunReport::new(command);
    r.status = "failed".into();
    r.error = Some(ErrorReport::from_error(&e));
    CliError::Solver(e, Box::new(r))
}

#[derive(Clone, Debug)]
pub struct SolveArgs {
    pub problem: Problem,
    pub mesh: PathBuf,
    pub config: PathBuf,
    pub out: PathBuf,
    pub overrides: Overrides,
    pub masses: Option<PathBuf>,
    pub dump_steps: bool,
}

/// Runs one FEM problem and writes its outputs into `args.out`:
/// `result.node`/`result.ele`, `result.vtk`, `coords.txt`, `masses.txt`,
/// `report.json`, and with `dump_steps` one VTK file and coordinate dump
/// per accepted step under `steps/`.
pub fn run_solve(args: &SolveArgs) -> Result<RunReport, CliError> {
    let loaded = mesh_io::load_mesh(&args.mesh)?;
    let file = config::load(&args.config)?;
    let mut cfg = file.to_problem(&loaded.mesh, loaded.base)?;
    args.overrides.apply(&mut cfg.solver);
    if let Some(p) = &args.masses {
        cfg.masses = Some(mesh_io::load_values(p)?);
    }
    match args.problem {
        Problem::Deform if cfg.handles.is_empty() => {
            return Err(InputError::new("deform needs at least one handle").into())
        }
        Problem::Deform if cfg.gravity != [0.0; 3] => {
            return Err(InputError::new("deform does not apply gravity; remove it from the config").into())
        }
        Problem::Forward | Problem::Inverse if !cfg.handles.is_empty() => {
            return Err(InputError::new(format!("{} does not use handles", args.problem.as_str())).into())
        }
        _ => {}
    }
    let command = format!("solve {}", args.problem.as_str());
    let start = Instant::now();
    let mesh = &loaded.mesh;
    let result = match args.problem {
        Problem::Forward => fem::solve_forward(mesh, &cfg),
        Problem::Inverse => fem::solve_inverse(mesh, &cfg),
        Problem::Deform => fem::solve_deform(mesh, &cfg),
    };
    fs::create_dir_all(&args.out)?;
    let sol = match result {
        Ok(s) => s,
        Err(Error::Config(m)) => return Err(InputError::new(m).into()),
        Err(Error::Mesh(m)) => return Err(InputError::new(m).into()),
        Err(e) => {
            let err = solver_failure(&command, e);
            if let CliError::Solver(_, r) = &err {
                fs::write(args.out.join("report.json"), r.to_json())?;
            }
            return Err(err);
        }
    };
    let mut r = fem_report(&command, mesh, &cfg.material, &sol);
    r.wall_time_s = start.elapsed().as_secs_f64();
    write_outputs(&args.out, mesh, loaded.base, &sol, args.dump_steps)?;
    fs::write(args.out.join("report.json"), r.to_json())?;
    Ok(r)
}

fn fem_report(command: &str, mesh: &TetMesh, m: &fem::MaterialSpec, sol: &FemSolution) -> RunReport {
    let mut r = RunReport::new(command);
    r.material = Some(m.describe());
    r.nodes = Some(mesh.num_nodes());
    r.tets = Some(mesh.num_tets());
    r.phases = sol
        .phases
        .iter()
        .map(|p| PhaseReport {
            label: p.label.clone(),
            segment: p.segment,
            iterations: p.trace.iterations(),
        })
        .collect();
    r.steps = sol.steps.iter().map(StepReport::from_state).collect();
    r.iterations = r.steps.len();
    r.residual_rms = sol.residual_rms;
    r
}

fn write_outputs(out: &Path, mesh: &TetMesh, base: usize, sol: &FemSolution, dump_steps: bool) -> std::io::Result<()> {
    mesh_io::write_mesh(&out.join("result"), &sol.coords, &mesh.tets, base)?;
    fs::write(out.join("result.vtk"), mesh_io::vtk_text("result", &sol.coords, &mesh.tets))?;
    fs::write(out.join("coords.txt"), mesh_io::coords_text(&sol.coords))?;
    fs::write(out.join("masses.txt"), mesh_io::values_text(&sol.masses))?;
    if dump_steps {
        let dir = out.join("steps");
        fs::create_dir_all(&dir)?;
        for (i, s) in sol.steps.iter().enumerate() {
            let title = format!("step {} phase {} lambda {}", i + 1, s.phase, s.lambda);
            fs::write(dir.join(format!("step_{:04}.vtk", i + 1)), mesh_io::vtk_text(&title, &s.coords, &mesh.tets))?;
            fs::write(dir.join(format!("step_{:04}.txt", i + 1)), mesh_io::coords_text(&s.coords))?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct BarMeshArgs {
    pub cells: [usize; 3],
    pub size: [f64; 3],
    /// Interior-node perturbation as a fraction of the smallest cell edge.
    pub jitter: f64,
    pub seed: u64,
    pub out: PathBuf,
}

/// Writes a box mesh as `<out>.node`/`<out>.ele` (1-based). Jitter moves
/// only nodes off the boundary, so faces stay planar for selections.
pub fn run_bar_mesh(args: &BarMeshArgs) -> Result<TetMesh, CliError> {
    if !(0.0..0.3).contains(&args.jitter) {
        return Err(InputError::new("jitter must lie in [0, 0.3)").into());
    }
    let grid = TetMesh::box_grid(args.cells, args.size).map_err(|e| InputError::new(e.to_string()))?;
    let h = (0..3).map(|c| args.size[c] / args.cells[c] as f64).fold(f64::INFINITY, f64::min);
    let mut rng = rand::rngs::StdRng::seed_from_u64(args.seed);
    let nodes = grid
        .nodes
        .iter()
        .map(|p| {
            let interior = (0..3).all(|c| p[c] > 1e-12 * args.size[c] && p[c] < args.size[c] * (1.0 - 1e-12));
            let mut q = *p;
            if interior && args.jitter > 0.0 {
                for v in q.iter_mut() {
                    *v += args.jitter * h * rng.gen_range(-1.0..1.0);
                }
            }
            q
        })
        .collect();
    let mesh = TetMesh::new(nodes, grid.tets).map_err(|e| InputError::new(e.to_string()))?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    mesh_io::write_mesh(&args.out, &mesh.nodes, &mesh.tets, 1)?;
    Ok(mesh)
}
