use std::path::PathBuf;
use std::process::ExitCode;

use anm_cli::{run_bar_mesh, run_solve, run_toy, BarMeshArgs, CliError, Overrides, Problem, SolveArgs, ToyArgs};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "anm", version, about = "Asymptotic numerical method continuation solver")]
struct Cli {
    /// Worker threads for batched operators (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SolverFlags {
    /// Truncation order N.
    #[arg(long)]
    order: Option<usize>,
    /// Range-of-validity tolerance.
    #[arg(long)]
    eps_rov: Option<f64>,
    /// Target RMS residual of equational continuation.
    #[arg(long)]
    eps_res: Option<f64>,
    /// Step with Taylor series only.
    #[arg(long)]
    no_pade: bool,
}

impl SolverFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            order: self.order,
            eps_rov: self.eps_rov,
            eps_res: self.eps_res,
            no_pade: self.no_pade,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Forward,
    Inverse,
    Deform,
}

#[derive(Subcommand)]
enum Command {
    /// Circle–ellipse intersection test problem.
    Toy {
        #[command(flatten)]
        solver: SolverFlags,
        /// Use equational continuation on f(x) = 0.
        #[arg(long)]
        equational: bool,
    },
    /// Solve an elasticity problem on a tetgen mesh.
    Solve {
        problem: ProblemArg,
        /// Mesh stem, or its .node/.ele file.
        #[arg(long)]
        mesh: PathBuf,
        /// TOML problem configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Nodal masses, one per line (as written to masses.txt).
        #[arg(long)]
        masses: Option<PathBuf>,
        /// Write every accepted continuation state.
        #[arg(long)]
        dump_steps: bool,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Write a box-shaped test mesh.
    BarMesh {
        #[arg(long, num_args = 3, default_values_t = [12, 3, 3])]
        cells: Vec<usize>,
        #[arg(long, num_args = 3, default_values_t = [6.0, 1.0, 1.0])]
        size: Vec<f64>,
        /// Interior node jitter as a fraction of the cell size.
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output stem; writes <out>.node and <out>.ele.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Toy { solver, equational } => {
            let r = run_toy(&ToyArgs {
                overrides: solver.overrides(),
                equational,
            })?;
            print!("{}", r.to_json());
        }
        Command::Solve {
            problem,
            mesh,
            config,
            out,
            masses,
            dump_steps,
            solver,
        } => {
            let problem = match problem {
                ProblemArg::Forward => Problem::Forward,
                ProblemArg::Inverse => Problem::Inverse,
                ProblemArg::Deform => Problem::Deform,
            };
            let r = run_solve(&SolveArgs {
                problem,
                mesh,
                config,
                out,
                overrides: solver.overrides(),
                masses,
                dump_steps,
            })?;
            print!("{}", r.to_json());
        }
        Command::BarMesh {
            cells,
            size,
            jitter,
            seed,
            out,
        } => {
            let m = run_bar_mesh(&BarMeshArgs {
                cells: [cells[0], cells[1], cells[2]],
                size: [size[0], size[1], size[2]],
                jitter,
                seed,
                out,
            })?;
            println!("{} nodes, {} tets", m.num_nodes(), m.num_tets());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            if let CliError::Solver(_, report) = &e {
                print!("{}", report.to_json());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
