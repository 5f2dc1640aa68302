use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use parthines::harness::{
    convergence_study, model_reference, run_sweep, threads_from_env, tolerance_grid,
    write_sweep_csv, ReferenceOptions, SweepSpec,
};
use parthines::models::parse_config;
use parthines::stability::{
    is_stable, monotonicity_nu, stability_boundary_h, stability_functions, Boundary,
    RecursionMethod, TestSystemParams,
};
use parthines::{
    integrate_adaptive, integrate_constant, AdaptiveMethod, AdaptiveOptions, BlockAssignment,
    ConstantMethod, ModelKind, ModelSpec, Problem, SplitState, StageSolveConfig, ToleranceSpec,
};

const MAX_ROWS: usize = 10_000;

#[derive(Parser)]
#[command(
    name = "parthines",
    version,
    about = "Hines-type partitioned integrators for neuron models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one model and write the trajectory as CSV.
    Run(RunArgs),
    /// Constant step convergence study with h = T / 2^k, k = 8, 9, ...
    Converge(ConvergeArgs),
    /// Tolerance sweep over the 49-point grid for several adaptive methods.
    Sweep(SweepArgs),
    /// Stability verdicts and boundary step size for the linear test system.
    Stability(StabilityArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// `hh`, `sds` or the path of a model config file.
    #[arg(long, default_value = "hh")]
    model: String,
    /// Which variables form the x-block: `voltages` or `gates`.
    #[arg(long, default_value = "voltages")]
    assignment: String,
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// hines, cmhines, modhines, modhext or modhnew.
    #[arg(long, default_value = "modhines")]
    method: String,
    /// Relative tolerance of the adaptive methods.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Step size of the constant step methods.
    #[arg(long, conflicts_with = "steps")]
    h: Option<f64>,
    /// Number of steps of the constant step methods.
    #[arg(long)]
    steps: Option<usize>,
    /// Write every step instead of at most 10^4 rows.
    #[arg(long)]
    dense: bool,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// hines or cmhines.
    #[arg(long, default_value = "hines")]
    method: String,
    /// Number of step sizes.
    #[arg(long, default_value_t = 6)]
    steps: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Comma separated adaptive methods.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "modhines,modhext,modhnew"
    )]
    methods: Vec<String>,
}

#[derive(Args)]
struct StabilityArgs {
    #[arg(long, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long, allow_negative_numbers = true)]
    a: f64,
    #[arg(long, allow_negative_numbers = true)]
    b: f64,
    /// Comma separated step sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    h: Vec<f64>,
    /// modified, hines or strang.
    #[arg(long, default_value = "modified")]
    method: String,
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<parthines::Error> for Failure {
    fn from(e: parthines::Error) -> Self {
        match e {
            parthines::Error::Precondition(_) | parthines::Error::Config { .. } => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(format!("cannot write output: {e}"))
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Converge(a) => converge(a),
        Command::Sweep(a) => sweep(a),
        Command::Stability(a) => stability(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(2)
        }
    }
}

fn load_model(name: &str) -> CliResult<ModelSpec> {
    if let Some(kind) = ModelKind::parse(name) {
        return Ok(ModelSpec::standard(kind));
    }
    let path = Path::new(name);
    if !path.is_file() {
        return Err(Failure::Usage(format!(
            "unknown model '{name}' (expected hh, sds or a config file path)"
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{name}: {e}")))?;
    parse_config(&text).map_err(|e| Failure::Usage(format!("{name}: {e}")))
}

fn parse_assignment(s: &str) -> CliResult<BlockAssignment> {
    BlockAssignment::parse(s).ok_or_else(|| {
        Failure::Usage(format!(
            "unknown assignment '{s}' (expected voltages or gates)"
        ))
    })
}

fn parse_adaptive(s: &str) -> CliResult<AdaptiveMethod> {
    AdaptiveMethod::parse(s).ok_or_else(|| {
        Failure::Usage(format!(
            "unknown method '{s}' (expected modhines, modhext or modhnew)"
        ))
    })
}

fn open_output(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            let f = File::create(p)
                .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", p.display())))?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn column_names(kind: ModelKind) -> &'static [&'static str] {
    match kind {
        ModelKind::Hh => &["V", "m", "n", "h"],
        ModelKind::Sds => &["V1", "V2", "V3", "cCa", "n", "m", "h", "r", "s"],
    }
}

/// Evenly spaced indices including both ends.
fn downsample(len: usize, max_rows: usize) -> Vec<usize> {
    if len <= max_rows {
        return (0..len).collect();
    }
    (0..max_rows)
        .map(|k| k * (len - 1) / (max_rows - 1))
        .collect()
}

fn write_trajectory(
    problem: &Problem,
    samples: &[SplitState],
    dense: bool,
    out: &mut dyn Write,
) -> io::Result<()> {
    writeln!(out, "t,{}", column_names(problem.kind).join(","))?;
    let rows = if dense {
        (0..samples.len()).collect()
    } else {
        downsample(samples.len(), MAX_ROWS)
    };
    for i in rows {
        let s = &samples[i];
        let z = problem.to_canonical(s);
        let fields: Vec<String> = z.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{:.16e},{}", s.t, fields.join(","))?;
    }
    out.flush()
}

fn run(args: RunArgs) -> CliResult {
    let spec = load_model(&args.model.model)?;
    let problem = spec.build(parse_assignment(&args.model.assignment)?);
    let span = problem.t_end - problem.initial.t;
    let (samples, fevals, accepted, rejected) =
        if let Some(method) = ConstantMethod::parse(&args.method) {
            let n = match (args.steps, args.h) {
                (Some(n), _) if n > 0 => n,
                (None, Some(h)) if h > 0.0 => (span / h).round().max(1.0) as usize,
                (None, None) => 1000,
                _ => {
                    return Err(Failure::Usage(
                        "step count and step size must be positive".into(),
                    ))
                }
            };
            let cfg = StageSolveConfig::default();
            let r = integrate_constant(
                problem.system.as_ref(),
                &problem.initial,
                problem.t_end,
                n,
                method,
                &cfg,
                true,
            )?;
            (
                r.samples,
                r.counter.fevals + r.counter.startup_fevals,
                n as u64,
                0,
            )
        } else {
            let method = AdaptiveMethod::parse(&args.method).ok_or_else(|| {
                Failure::Usage(format!(
                    "unknown method '{}' (expected hines, cmhines, modhines, modhext or modhnew)",
                    args.method
                ))
            })?;
            let tol = ToleranceSpec::from_typical(args.tol, &problem.system.typical_size())?;
            let r = integrate_adaptive(
                problem.system.as_ref(),
                &problem.initial,
                problem.t_end,
                &tol,
                method,
                &AdaptiveOptions::default(),
            )?;
            (
                r.samples,
                r.counter.fevals,
                r.counter.steps_accepted,
                r.counter.steps_rejected,
            )
        };
    let mut out = open_output(&args.model.output)?;
    write_trajectory(&problem, &samples, args.dense, &mut out)?;
    eprintln!("fevals={fevals} accepted={accepted} rejected={rejected}");
    Ok(())
}

fn converge(args: ConvergeArgs) -> CliResult {
    let spec = load_model(&args.model.model)?;
    let assignment = parse_assignment(&args.model.assignment)?;
    let method = ConstantMethod::parse(&args.method).ok_or_else(|| {
        Failure::Usage(format!(
            "unknown method '{}' (expected hines or cmhines)",
            args.method
        ))
    })?;
    if !(2..=16).contains(&args.steps) {
        return Err(Failure::Usage("--steps must be between 2 and 16".into()));
    }
    let counts: Vec<usize> = (8..8 + args.steps).map(|k| 1usize << k).collect();
    let (reference, _) = model_reference(&spec, &ReferenceOptions::for_model(spec.kind()))?;
    let table = convergence_study(&spec, assignment, method, &counts, &reference)?;
    let mut out = open_output(&args.model.output)?;
    table.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn sweep(args: SweepArgs) -> CliResult {
    let spec = load_model(&args.model.model)?;
    let assignment = parse_assignment(&args.model.assignment)?;
    let methods = args
        .methods
        .iter()
        .map(|m| parse_adaptive(m))
        .collect::<CliResult<Vec<_>>>()?;
    let (reference, _) = model_reference(&spec, &ReferenceOptions::for_model(spec.kind()))?;
    let sweep = SweepSpec {
        tol_list: tolerance_grid(),
        ..SweepSpec::standard(spec, assignment, methods)
    };
    let points = run_sweep(&sweep, &reference, threads_from_env())?;
    let mut out = open_output(&args.model.output)?;
    write_sweep_csv(&points, &mut out)?;
    out.flush()?;
    Ok(())
}

fn stability(args: StabilityArgs) -> CliResult {
    let method = RecursionMethod::parse(&args.method).ok_or_else(|| {
        Failure::Usage(format!(
            "unknown method '{}' (expected modified, hines or strang)",
            args.method
        ))
    })?;
    let p = TestSystemParams::new(args.mu, args.lambda, args.a, args.b);
    if !p.is_admissible() {
        return Err(Failure::Usage(
            "need mu < 0, lambda < 0 and a b < mu lambda".into(),
        ));
    }
    let gamma = p.gamma();
    let mut out = io::stdout().lock();
    for &h in &args.h {
        if !(h > 0.0) {
            return Err(Failure::Usage(format!(
                "step size must be positive, got {h}"
            )));
        }
        let sf = stability_functions(&p, h, method.flavor())?;
        let v = is_stable(sf.alpha, sf.beta, gamma)?;
        writeln!(
            out,
            "method={} h={h} alpha={} beta={} gamma={gamma} lower={} stable={} margin={}",
            method.name(),
            sf.alpha,
            sf.beta,
            v.lower,
            v.stable,
            v.margin
        )?;
    }
    match stability_boundary_h(&p, method)? {
        Boundary::Unbounded => writeln!(out, "boundary=unbounded")?,
        Boundary::Critical(h) => writeln!(out, "boundary h_crit={h}")?,
    }
    let (nu_f, nu_g) = monotonicity_nu(&p);
    writeln!(out, "nu_f={nu_f} nu_g={nu_g}")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn downsample_keeps_ends() {
        assert_eq!(downsample(5, 10), vec![0, 1, 2, 3, 4]);
        let idx = downsample(1_000_001, MAX_ROWS);
        assert_eq!(idx.len(), MAX_ROWS);
        assert_eq!((idx[0], *idx.last().unwrap()), (0, 1_000_000));
        assert!(idx.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
