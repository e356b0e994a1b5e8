use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use log::error;

use signorini::config::load_config;
use signorini::fespace::lp_norm;
use signorini::manufactured::eoc;
use signorini::mesh::refine_uniform;
use signorini::{
    bilateral, lagrange, make_structured_mesh, one_sided, run_adaptive_with, Domain, Error,
    Exporter, FeFunction, Mesh, Outcome, Point, SampleSet, Strategy,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_OTHER: u8 = 1;

#[derive(Parser)]
#[command(
    name = "signorini",
    version,
    about = "Adaptive FEM for the scalar Signorini problem"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solve, estimate, mark, refine loop described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Directory for VTK and CSV output; overrides `output_dir`.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Print interpolation errors and rates in L^q over uniform refinements.
    DemoInterpolant {
        #[arg(long, value_enum)]
        function: DemoFunction,
        #[arg(long, default_value_t = 5)]
        levels: usize,
        #[arg(long, default_value_t = 1.3)]
        q: f64,
        #[arg(long, default_value_t = 2)]
        density: usize,
        /// Cells per side of the coarsest mesh.
        #[arg(long, default_value_t = 8)]
        coarse_n: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Uniform,
    Doerfler,
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoFunction {
    /// sin(pi x) sin(pi y) + 1
    Sine,
    /// x^2 + y^2
    Paraboloid,
    /// (x - 1/2)^2 + (y - 1/2)^2
    Bowl,
}

impl DemoFunction {
    fn eval(self, x: &Point) -> f64 {
        match self {
            DemoFunction::Sine => (PI * x.x).sin() * (PI * x.y).sin() + 1.0,
            DemoFunction::Paraboloid => x.x * x.x + x.y * x.y,
            DemoFunction::Bowl => (x.x - 0.5).powi(2) + (x.y - 0.5).powi(2),
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => EXIT_CONFIG,
        Error::SolverDiverged { .. } | Error::LinearSolveFailure(_) => EXIT_SOLVER,
        _ => EXIT_OTHER,
    }
}

fn run(
    config: PathBuf,
    output: Option<PathBuf>,
    p: Option<f64>,
    strategy: Option<StrategyArg>,
    beta: Option<f64>,
) -> Result<(), Error> {
    let mut cfg = load_config(&config).map_err(|e| match e {
        Error::Io { path, source } => Error::Config {
            key: path.display().to_string(),
            reason: source.to_string(),
        },
        other => other,
    })?;
    if let Some(p) = p {
        cfg.p = p;
    }
    if let Some(s) = strategy {
        cfg.strategy = match s {
            StrategyArg::Uniform => Strategy::Uniform,
            StrategyArg::Doerfler => Strategy::Doerfler,
        };
    }
    if let Some(beta) = beta {
        cfg.beta = beta;
    }
    if output.is_some() {
        cfg.output_dir = output;
    }
    cfg.validate()?;

    let exporter = cfg.output_dir.as_ref().map(Exporter::create).transpose()?;
    println!("cycle dofs h_max estimate err_total effectivity N_h condition_ah");
    let trace = run_adaptive_with(&cfg, |view| {
        let r = view.record;
        println!(
            "{} {} {:.6e} {:.6e} {} {} {} {}",
            r.cycle,
            r.dofs,
            r.h_max,
            r.estimate,
            r.err_total.map_or("-".into(), |e| format!("{e:.6e}")),
            r.effectivity.map_or("-".into(), |e| format!("{e:.3}")),
            r.n_h,
            r.condition_ah
        );
        match &exporter {
            Some(x) => x.write_cycle(view),
            None => Ok(()),
        }
    })?;
    match trace.outcome {
        Outcome::Completed => Ok(()),
        Outcome::SolverDiverged { cycle, iterations } => {
            error!("active-set iteration stalled in cycle {cycle}");
            Err(Error::SolverDiverged { iterations })
        }
    }
}

fn demo_interpolant(
    function: DemoFunction,
    levels: usize,
    q: f64,
    density: usize,
    coarse_n: usize,
) -> Result<(), Error> {
    if levels < 1 {
        return Err(Error::Config {
            key: "levels".into(),
            reason: "must be at least 1".into(),
        });
    }
    if density < 1 {
        return Err(Error::Config {
            key: "density".into(),
            reason: "must be at least 1".into(),
        });
    }
    let z = |x: &Point| function.eval(x);
    let samples = SampleSet::new(density);
    let error = |u: &FeFunction| lp_norm(u.mesh(), |t, bary, x| z(x) - u.eval_local(t, bary), q);

    let mut mesh: Arc<Mesh> = Arc::new(make_structured_mesh(Domain::UnitSquare, coarse_n)?);
    let mut rows = Vec::new();
    for level in 0..levels {
        if level > 0 {
            mesh = Arc::new(refine_uniform(&mesh));
        }
        let h = mesh.h_max();
        let e_i = error(&lagrange(z, &mesh)?)?;
        let e_pi = error(&one_sided(z, &mesh, &samples)?)?;
        let e_b = error(&bilateral(z, &mesh, &samples)?)?;
        rows.push((h, [e_i, e_pi, e_b]));
    }
    println!("h lagrange one_sided bilateral");
    for (h, e) in &rows {
        println!("{h:.6e} {:.6e} {:.6e} {:.6e}", e[0], e[1], e[2]);
    }
    if rows.len() >= 2 {
        let rates: Vec<String> = (0..3)
            .map(|k| {
                let data: Vec<(f64, f64)> = rows.iter().map(|(h, e)| (*h, e[k])).collect();
                eoc(&data).map(|t| format!("{:.4}", t.tail_slope))
            })
            .collect::<Result<_, _>>()?;
        println!("rate {}", rates.join(" "));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            output,
            p,
            strategy,
            beta,
        } => run(config, output, p, strategy, beta),
        Command::DemoInterpolant {
            function,
            levels,
            q,
            density,
            coarse_n,
        } => demo_interpolant(function, levels, q, density, coarse_n),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
