//! Command-line front end: parsing, balance analysis, limiting-model
//! construction, simulation, and full-versus-reduced comparison as
//! reproducible batch runs. Standard output carries data; progress and
//! diagnostics go to standard error. Exit codes: 0 success, 1 diagnostics or
//! runtime failure, 2 usage error (from the argument parser).

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde_json::json;

use crn_multiscale::network::{Network, State};
use crn_multiscale::parse::{parse_network_opts, parse_scaling, Severity};
use crn_multiscale::rational::{parse_rational, rat_to_f64};
use crn_multiscale::reduce::{build_limit_model, format_limit_model, LimitModel, VarKind};
use crn_multiscale::report::{
    balance_report_human, balance_report_json, run_manifest, scaling_json, timescales_human,
    ManifestInput,
};
use crn_multiscale::rng::RngStream;
use crn_multiscale::scaling::{verify_all_balance, ScalingSpec, DEFAULT_SIGN_BUDGET};
use crn_multiscale::sim::{
    compare_models, ensemble_csv, hits_csv, integrate_ode, run_ensemble, scaled_process,
    simulate_hybrid, simulate_ssa, trajectory_csv, EnsembleStats, HybridOptions, ReplicateOutput,
    SsaOptions, Trajectory, DEFAULT_EVENT_CAP,
};
use crn_multiscale::{gallery, ode::OdeControls};

#[derive(Parser)]
#[command(
    name = "crn",
    version,
    about = "Multiscale stochastic reaction networks: simulate, analyze, reduce, compare"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Report,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Ssa,
    Hybrid,
    Ode,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a network (and optional scaling) file and report diagnostics.
    Validate {
        /// Network file (.crn).
        network: PathBuf,
        /// Scaling file (.scale).
        scaling: Option<PathBuf>,
        /// Treat warnings as errors.
        #[arg(long)]
        strict: bool,
    },
    /// Balance-condition report for one or more time-scale exponents gamma.
    Analyze {
        network: PathBuf,
        scaling: PathBuf,
        /// Time-scale exponent(s), exact rationals like 0, -2, 1/2.
        #[arg(long, default_values_t = [String::from("0")], num_args = 1..)]
        gamma: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "report")]
        format: Format,
    },
    /// Natural time-scale exponents per species plus r1, r2, and the
    /// admissibility bound.
    Timescales {
        network: PathBuf,
        scaling: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Construct the limiting model at gamma and print it.
    Reduce {
        network: PathBuf,
        scaling: PathBuf,
        #[arg(long, default_value = "0")]
        gamma: String,
        /// Auxiliary conserved combination as comma-separated rational
        /// coefficients, one flag per combination.
        #[arg(long)]
        aux: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate the network (ssa, ode) or its limiting model (hybrid).
    Simulate {
        network: PathBuf,
        scaling: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "ssa")]
        method: Method,
        /// Initial copy numbers, comma-separated, one per species.
        #[arg(long)]
        initial: String,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        /// Number of output grid points on [0, t-end].
        #[arg(long, default_value_t = 101)]
        grid: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        /// Scaling parameter N; with a scaling file, simulates the scaled
        /// process at this level (requires --gamma for the time change).
        #[arg(long)]
        n: Option<f64>,
        #[arg(long)]
        gamma: Option<String>,
        /// Auxiliary conserved combinations for hybrid reduction.
        #[arg(long)]
        aux: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_EVENT_CAP)]
        event_cap: u64,
    },
    /// Full-model SSA ensemble versus the compiled limiting model.
    Compare {
        network: PathBuf,
        scaling: PathBuf,
        #[arg(long, default_value = "0")]
        gamma: String,
        #[arg(long)]
        initial: String,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 101)]
        grid: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        replicates: usize,
        #[arg(long)]
        aux: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "report")]
        format: Format,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_EVENT_CAP)]
        event_cap: u64,
    },
    /// Write the bundled example networks and scalings into a directory.
    Examples {
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

/// Failure that terminates the run with exit code 1 after printing to stderr.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type RunResult = Result<(), Failure>;

fn fail(msg: impl Into<String>) -> Failure {
    Failure(msg.into())
}

fn main() {
    let cli = Cli::parse();
    if let Err(Failure(msg)) = dispatch(cli.command) {
        eprintln!("error: {msg}");
        std::process::exit(1);
    }
}

fn dispatch(command: Command) -> RunResult {
    match command {
        Command::Validate { network, scaling, strict } => cmd_validate(&network, scaling.as_deref(), strict),
        Command::Analyze { network, scaling, gamma, out, format } => {
            cmd_analyze(&network, &scaling, &gamma, out.as_deref(), format)
        }
        Command::Timescales { network, scaling, out } => {
            cmd_timescales(&network, &scaling, out.as_deref())
        }
        Command::Reduce { network, scaling, gamma, aux, out } => {
            cmd_reduce(&network, &scaling, &gamma, &aux, out.as_deref())
        }
        Command::Simulate {
            network,
            scaling,
            method,
            initial,
            t_end,
            grid,
            seed,
            replicates,
            n,
            gamma,
            aux,
            out,
            format,
            threads,
            event_cap,
        } => with_threads(threads, || {
            cmd_simulate(SimulateArgs {
                network: &network,
                scaling: scaling.as_deref(),
                method,
                initial: &initial,
                t_end,
                grid,
                seed,
                replicates,
                n,
                gamma: gamma.as_deref(),
                aux: &aux,
                out: out.as_deref(),
                format,
                event_cap,
            })
        }),
        Command::Compare {
            network,
            scaling,
            gamma,
            initial,
            t_end,
            grid,
            seed,
            replicates,
            aux,
            out,
            format,
            threads,
            event_cap,
        } => with_threads(threads, || {
            cmd_compare(CompareArgs {
                network: &network,
                scaling: &scaling,
                gamma: &gamma,
                initial: &initial,
                t_end,
                grid,
                seed,
                replicates,
                aux: &aux,
                out: out.as_deref(),
                format,
                event_cap,
            })
        }),
        Command::Examples { out } => cmd_examples(&out),
    }
}

/// Run `f` inside a rayon pool of the requested size; the thread count caps
/// parallelism without changing any result.
fn with_threads(threads: Option<usize>, f: impl FnOnce() -> RunResult + Send) -> RunResult {
    match threads {
        None => f(),
        Some(t) => {
            if t == 0 {
                return Err(fail("--threads must be at least 1"));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| fail(format!("thread pool: {e}")))?;
            pool.install(f)
        }
    }
}

// ---------------------------------------------------------------------------
// Input loading.
// ---------------------------------------------------------------------------

struct LoadedNetwork {
    network: Network,
    path: String,
    contents: String,
}

struct LoadedScaling {
    spec: ScalingSpec,
    path: String,
    contents: String,
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail(format!("cannot read {}: {e}", path.display())))
}

fn load_network(path: &Path, strict: bool) -> Result<LoadedNetwork, Failure> {
    let contents = read_input(path)?;
    let outcome = parse_network_opts(&contents, strict);
    for d in &outcome.diagnostics {
        eprintln!("{}: {d}", path.display());
    }
    let network = outcome
        .value
        .filter(|_| !outcome.diagnostics.iter().any(|d| d.severity == Severity::Error))
        .ok_or_else(|| fail(format!("{} did not parse cleanly", path.display())))?;
    Ok(LoadedNetwork { network, path: path.display().to_string(), contents })
}

fn load_scaling(path: &Path, network: &Network) -> Result<LoadedScaling, Failure> {
    let contents = read_input(path)?;
    let outcome = parse_scaling(&contents, network);
    for d in &outcome.diagnostics {
        eprintln!("{}: {d}", path.display());
    }
    let spec = outcome
        .value
        .filter(|_| !outcome.diagnostics.iter().any(|d| d.severity == Severity::Error))
        .ok_or_else(|| fail(format!("{} did not parse cleanly", path.display())))?;
    Ok(LoadedScaling { spec, path: path.display().to_string(), contents })
}

fn parse_gamma(text: &str) -> Result<BigRational, Failure> {
    parse_rational(text).ok_or_else(|| fail(format!("invalid rational gamma: {text}")))
}

fn parse_aux(specs: &[String], n_species: usize) -> Result<Vec<Vec<BigRational>>, Failure> {
    specs
        .iter()
        .map(|s| {
            let coeffs: Option<Vec<BigRational>> =
                s.split(',').map(|c| parse_rational(c.trim())).collect();
            let coeffs = coeffs.ok_or_else(|| fail(format!("invalid --aux coefficients: {s}")))?;
            if coeffs.len() != n_species {
                return Err(fail(format!(
                    "--aux needs {n_species} coefficients, got {} in {s}",
                    coeffs.len()
                )));
            }
            Ok(coeffs)
        })
        .collect()
}

fn parse_initial(text: &str, network: &Network) -> Result<State, Failure> {
    let counts: Option<Vec<i64>> =
        text.split(',').map(|c| c.trim().parse::<i64>().ok()).collect();
    let counts = counts.ok_or_else(|| fail(format!("invalid --initial counts: {text}")))?;
    if counts.len() != network.n_species() {
        return Err(fail(format!(
            "--initial needs {} counts (one per species), got {}",
            network.n_species(),
            counts.len()
        )));
    }
    if counts.iter().any(|&c| c < 0) {
        return Err(fail("--initial counts must be nonnegative"));
    }
    Ok(State::new(counts))
}

fn linspace(t_end: f64, points: usize) -> Result<Vec<f64>, Failure> {
    if !(t_end > 0.0) {
        return Err(fail("--t-end must be positive"));
    }
    if points < 2 {
        return Err(fail("--grid needs at least 2 points"));
    }
    Ok((0..points).map(|j| t_end * j as f64 / (points - 1) as f64).collect())
}

// ---------------------------------------------------------------------------
// Output plumbing.
// ---------------------------------------------------------------------------

fn write_output(dir: &Path, name: &str, contents: &str) -> RunResult {
    fs::create_dir_all(dir).map_err(|e| fail(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| fail(format!("cannot write {}: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn write_manifest(
    dir: &Path,
    command: &str,
    inputs: &[(&str, &str)],
    options: serde_json::Value,
) -> RunResult {
    let manifest_inputs: Vec<ManifestInput> = inputs
        .iter()
        .map(|(path, contents)| ManifestInput { path, contents: contents.as_bytes() })
        .collect();
    let manifest = run_manifest(command, &manifest_inputs, options);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_output(dir, "manifest.json", &text)
}

// ---------------------------------------------------------------------------
// Subcommands.
// ---------------------------------------------------------------------------

fn cmd_validate(network_path: &Path, scaling_path: Option<&Path>, strict: bool) -> RunResult {
    let loaded = load_network(network_path, strict)?;
    for d in loaded.network.validate() {
        eprintln!("{}: note: {}", loaded.path, d.message);
    }
    if let Some(sp) = scaling_path {
        load_scaling(sp, &loaded.network)?;
    }
    println!(
        "{}: {} species, {} reactions, ok",
        loaded.path,
        loaded.network.n_species(),
        loaded.network.n_reactions()
    );
    Ok(())
}

fn cmd_analyze(
    network_path: &Path,
    scaling_path: &Path,
    gammas: &[String],
    out: Option<&Path>,
    format: Format,
) -> RunResult {
    let net = load_network(network_path, false)?;
    let sc = load_scaling(scaling_path, &net.network)?;
    let mut human = String::new();
    let mut reports = Vec::new();
    for g in gammas {
        let gamma = parse_gamma(g)?;
        let report = verify_all_balance(&net.network, &sc.spec, &gamma, DEFAULT_SIGN_BUDGET)?;
        human.push_str(&balance_report_human(&net.network, &report));
        human.push('\n');
        reports.push(balance_report_json(&net.network, &report));
    }
    let json_doc = json!({
        "scaling": scaling_json(&net.network, &sc.spec),
        "reports": reports,
    });
    match format {
        Format::Report => print!("{human}"),
        Format::Csv => println!("{json_doc}"),
    }
    if let Some(dir) = out {
        write_output(dir, "balance_report.txt", &human)?;
        let mut text = serde_json::to_string_pretty(&json_doc).expect("report serializes");
        text.push('\n');
        write_output(dir, "balance_report.json", &text)?;
        write_manifest(
            dir,
            "analyze",
            &[(&net.path, &net.contents), (&sc.path, &sc.contents)],
            json!({ "gamma": gammas }),
        )?;
    }
    Ok(())
}

fn cmd_timescales(network_path: &Path, scaling_path: &Path, out: Option<&Path>) -> RunResult {
    let net = load_network(network_path, false)?;
    let sc = load_scaling(scaling_path, &net.network)?;
    let gamma = BigRational::from_integer(0.into());
    let report = verify_all_balance(&net.network, &sc.spec, &gamma, DEFAULT_SIGN_BUDGET)?;
    let table = timescales_human(&net.network, &report);
    print!("{table}");
    if let Some(dir) = out {
        write_output(dir, "timescales.txt", &table)?;
        write_manifest(
            dir,
            "timescales",
            &[(&net.path, &net.contents), (&sc.path, &sc.contents)],
            json!({}),
        )?;
    }
    Ok(())
}

fn cmd_reduce(
    network_path: &Path,
    scaling_path: &Path,
    gamma: &str,
    aux: &[String],
    out: Option<&Path>,
) -> RunResult {
    let net = load_network(network_path, false)?;
    let sc = load_scaling(scaling_path, &net.network)?;
    let g = parse_gamma(gamma)?;
    let aux_thetas = parse_aux(aux, net.network.n_species())?;
    let model = build_limit_model(&net.network, &sc.spec, &g, &aux_thetas)?;
    let text = format_limit_model(&model);
    print!("{text}");
    for w in &model.warnings {
        eprintln!("warning: {w}");
    }
    let unresolved = model.unresolved_reactions();
    if !unresolved.is_empty() {
        eprintln!(
            "note: reactions {} read eliminated fast species and need averaged rates \
             before the model can be simulated",
            unresolved.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join(", ")
        );
    }
    if let Some(dir) = out {
        write_output(dir, "limit_model.crn", &text)?;
        write_manifest(
            dir,
            "reduce",
            &[(&net.path, &net.contents), (&sc.path, &sc.contents)],
            json!({ "gamma": gamma, "aux": aux }),
        )?;
    }
    Ok(())
}

struct SimulateArgs<'a> {
    network: &'a Path,
    scaling: Option<&'a Path>,
    method: Method,
    initial: &'a str,
    t_end: f64,
    grid: usize,
    seed: u64,
    replicates: usize,
    n: Option<f64>,
    gamma: Option<&'a str>,
    aux: &'a [String],
    out: Option<&'a Path>,
    format: Format,
    event_cap: u64,
}

fn cmd_simulate(args: SimulateArgs) -> RunResult {
    let net = load_network(args.network, false)?;
    let sc = match args.scaling {
        Some(p) => Some(load_scaling(p, &net.network)?),
        None => None,
    };
    let x0 = parse_initial(args.initial, &net.network)?;
    let grid = linspace(args.t_end, args.grid)?;
    if args.replicates == 0 {
        return Err(fail("--replicates must be at least 1"));
    }

    let (csv, report, names) = match args.method {
        Method::Ssa => simulate_ssa_cmd(&args, &net.network, sc.as_ref(), &x0, &grid)?,
        Method::Ode => simulate_ode_cmd(&args, &net.network, sc.as_ref(), &x0, &grid)?,
        Method::Hybrid => simulate_hybrid_cmd(&args, &net.network, sc.as_ref(), &x0, &grid)?,
    };

    match args.format {
        Format::Csv => print!("{csv}"),
        Format::Report => print!("{report}"),
    }
    if let Some(dir) = args.out {
        write_output(dir, "trajectories.csv", &csv)?;
        write_output(dir, "summary.txt", &report)?;
        let mut inputs = vec![(net.path.as_str(), net.contents.as_str())];
        if let Some(s) = &sc {
            inputs.push((s.path.as_str(), s.contents.as_str()));
        }
        write_manifest(
            dir,
            "simulate",
            &inputs,
            json!({
                "method": match args.method { Method::Ssa => "ssa", Method::Hybrid => "hybrid", Method::Ode => "ode" },
                "initial": args.initial,
                "t_end": args.t_end,
                "grid": args.grid,
                "seed": args.seed,
                "replicates": args.replicates,
                "n": args.n,
                "gamma": args.gamma,
                "aux": args.aux,
                "event_cap": args.event_cap,
                "observables": names,
            }),
        )?;
    }
    Ok(())
}

fn summarize_trajectory(traj: &Trajectory, names: &[String]) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "events: {}", traj.events.len());
    let _ = writeln!(out, "final time: {}", traj.final_time);
    for (name, v) in names.iter().zip(&traj.final_state) {
        let _ = writeln!(out, "final {name}: {v}");
    }
    out
}

fn summarize_ensemble(stats: &EnsembleStats, names: &[String]) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "replicates: {}", stats.n_replicates);
    if let (Some(&t), Some(mean), Some(std)) =
        (stats.grid.last(), stats.mean.last(), stats.std.last())
    {
        for (o, name) in names.iter().enumerate() {
            let _ = writeln!(
                out,
                "mean {name} at t = {t}: {} (std {})",
                mean[o], std[o]
            );
        }
    }
    out
}

fn simulate_ssa_cmd(
    args: &SimulateArgs,
    network: &Network,
    sc: Option<&LoadedScaling>,
    x0: &State,
    grid: &[f64],
) -> Result<(String, String, Vec<String>), Failure> {
    let names: Vec<String> = network.species.iter().map(|s| s.name.clone()).collect();
    // With --n the run is the scaled process: boosted rates, initial counts
    // lifted from level N0 to level N, output normalized to Z = N^-alpha X.
    let scaled = match (args.n, sc) {
        (Some(n), Some(sc)) => {
            let gamma = parse_gamma(args.gamma.unwrap_or("0"))?;
            Some(scaled_process(network, &sc.spec, &gamma, n))
        }
        (Some(_), None) => return Err(fail("--n requires a scaling file")),
        (None, _) => None,
    };
    let run_one = |mut rng: RngStream| -> Result<Trajectory, Failure> {
        let opts = SsaOptions { grid, event_cap: args.event_cap, ..SsaOptions::default() };
        let traj = match &scaled {
            Some(sp) => sp.simulate(&sp.initial(x0), args.t_end, &mut rng, &opts)?,
            None => simulate_ssa(network, x0, args.t_end, &mut rng, &opts)?,
        };
        Ok(traj)
    };
    if args.replicates == 1 {
        let traj = run_one(RngStream::new(args.seed, 0))?;
        let csv = trajectory_csv(&traj, &names);
        let report = summarize_trajectory(&traj, &names);
        Ok((csv, report, names))
    } else {
        eprintln!("running {} SSA replicates...", args.replicates);
        let stats = run_ensemble(args.replicates, args.seed, grid, |mut rng| {
            let opts = SsaOptions { grid, event_cap: args.event_cap, ..SsaOptions::default() };
            let traj = match &scaled {
                Some(sp) => sp.simulate(&sp.initial(x0), args.t_end, &mut rng, &opts)?,
                None => simulate_ssa(network, x0, args.t_end, &mut rng, &opts)?,
            };
            Ok(ReplicateOutput::from_trajectory(&traj))
        })?;
        let csv = ensemble_csv(&stats, &names);
        let report = summarize_ensemble(&stats, &names);
        Ok((csv, report, names))
    }
}

fn simulate_ode_cmd(
    _args: &SimulateArgs,
    network: &Network,
    sc: Option<&LoadedScaling>,
    x0: &State,
    grid: &[f64],
) -> Result<(String, String, Vec<String>), Failure> {
    let names: Vec<String> = network.species.iter().map(|s| s.name.clone()).collect();
    // With a scaling file the ODE runs in normalized coordinates z = N0^-alpha x
    // with the normalized rates kappa; otherwise raw mass-action.
    let (kappa, z0): (Vec<f64>, Vec<f64>) = match sc {
        Some(sc) => (
            sc.spec.kappa.clone(),
            x0.counts
                .iter()
                .zip(&sc.spec.alpha)
                .map(|(&x, a)| x as f64 * sc.spec.n0.powf(-rat_to_f64(a)))
                .collect(),
        ),
        None => (
            network.reactions.iter().map(|r| r.rate_const).collect(),
            x0.counts.iter().map(|&x| x as f64).collect(),
        ),
    };
    let rhs = |_t: f64, z: &[f64], dz: &mut [f64]| {
        dz.copy_from_slice(&network.classical_ode_rhs(&kappa, z));
    };
    let sol = integrate_ode(rhs, 0.0, &z0, grid, OdeControls::default())?;
    let mut csv = String::from("time");
    for n in &names {
        csv.push(',');
        csv.push_str(n);
    }
    csv.push('\n');
    for (t, row) in sol.times.iter().zip(&sol.states) {
        csv.push_str(&t.to_string());
        for v in row {
            csv.push(',');
            csv.push_str(&v.to_string());
        }
        csv.push('\n');
    }
    use std::fmt::Write;
    let mut report = String::new();
    let _ = writeln!(report, "ODE solution on {} grid points", sol.times.len());
    if let (Some(t), Some(row)) = (sol.times.last(), sol.states.last()) {
        for (n, v) in names.iter().zip(row) {
            let _ = writeln!(report, "final {n} at t = {t}: {v}");
        }
    }
    Ok((csv, report, names))
}

/// Build the limiting model at gamma and compile it with
/// z_i(0) = N0^-alpha_i x_i(0); errors out if averaging is still needed.
fn compiled_limit_model(
    network: &Network,
    spec: &ScalingSpec,
    gamma: &BigRational,
    aux: &[String],
    x0: &State,
) -> Result<(LimitModel, Arc<crn_multiscale::reduce::HybridModel>), Failure> {
    let aux_thetas = parse_aux(aux, network.n_species())?;
    let model = build_limit_model(network, spec, gamma, &aux_thetas)?;
    for w in &model.warnings {
        eprintln!("warning: {w}");
    }
    let unresolved = model.unresolved_reactions();
    if !unresolved.is_empty() {
        return Err(fail(format!(
            "limit model is not closed: reactions {} need averaged rates (the library \
             averaging interface can supply them)",
            unresolved.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join(", ")
        )));
    }
    let z0_species: Vec<f64> = x0
        .counts
        .iter()
        .zip(&spec.alpha)
        .map(|(&x, a)| x as f64 * spec.n0.powf(-rat_to_f64(a)))
        .collect();
    let compiled = model.compile(&z0_species)?;
    Ok((model, Arc::new(compiled)))
}

fn simulate_hybrid_cmd(
    args: &SimulateArgs,
    network: &Network,
    sc: Option<&LoadedScaling>,
    x0: &State,
    grid: &[f64],
) -> Result<(String, String, Vec<String>), Failure> {
    let sc = sc.ok_or_else(|| fail("--method hybrid requires a scaling file"))?;
    let gamma = parse_gamma(args.gamma.unwrap_or("0"))?;
    let (_, compiled) = compiled_limit_model(network, &sc.spec, &gamma, args.aux, x0)?;
    let names = compiled.names.clone();
    if args.replicates == 1 {
        let mut rng = RngStream::new(args.seed, 0);
        let opts = HybridOptions { grid, event_cap: args.event_cap, ..HybridOptions::default() };
        let traj = simulate_hybrid(&compiled, args.t_end, &mut rng, &opts)?;
        let csv = trajectory_csv(&traj, &names);
        let report = summarize_trajectory(&traj, &names);
        Ok((csv, report, names))
    } else {
        eprintln!("running {} hybrid replicates...", args.replicates);
        let model = Arc::clone(&compiled);
        let stats = run_ensemble(args.replicates, args.seed, grid, move |mut rng| {
            let opts =
                HybridOptions { grid, event_cap: args.event_cap, ..HybridOptions::default() };
            let traj = simulate_hybrid(&model, args.t_end, &mut rng, &opts)?;
            Ok(ReplicateOutput::from_trajectory(&traj))
        })?;
        let csv = ensemble_csv(&stats, &names);
        let report = summarize_ensemble(&stats, &names);
        Ok((csv, report, names))
    }
}

struct CompareArgs<'a> {
    network: &'a Path,
    scaling: &'a Path,
    gamma: &'a str,
    initial: &'a str,
    t_end: f64,
    grid: usize,
    seed: u64,
    replicates: usize,
    aux: &'a [String],
    out: Option<&'a Path>,
    format: Format,
    event_cap: u64,
}

fn cmd_compare(args: CompareArgs) -> RunResult {
    let net = load_network(args.network, false)?;
    let sc = load_scaling(args.scaling, &net.network)?;
    let x0 = parse_initial(args.initial, &net.network)?;
    let gamma = parse_gamma(args.gamma)?;
    let gamma_f = rat_to_f64(&gamma);
    let full_grid = linspace(args.t_end, args.grid)?;
    let time_scale = sc.spec.n0.powf(gamma_f);
    // The reduced model lives on the gamma time scale: reduced time t maps to
    // full time t * N0^gamma, so its grid is the full grid divided by that.
    let reduced_grid: Vec<f64> = full_grid.iter().map(|t| t / time_scale).collect();

    let (model, compiled) = compiled_limit_model(&net.network, &sc.spec, &gamma, args.aux, &x0)?;
    let names = compiled.names.clone();

    // Each limit variable is observed in the full model as the matching
    // species count or conserved combination theta . X.
    let projections: Vec<Vec<f64>> = model
        .variables
        .iter()
        .map(|v| match &v.kind {
            VarKind::Species(i) => {
                let mut row = vec![0.0; net.network.n_species()];
                row[*i] = 1.0;
                row
            }
            VarKind::Aux(_) => v
                .theta
                .as_ref()
                .expect("aux variable carries theta")
                .iter()
                .map(rat_to_f64)
                .collect(),
        })
        .collect();
    let alpha_obs: Vec<f64> = model.variables.iter().map(|v| rat_to_f64(&v.alpha)).collect();

    eprintln!("running {} full SSA replicates...", args.replicates);
    let network = &net.network;
    let full = run_ensemble(args.replicates, args.seed, &full_grid, |mut rng| {
        let opts =
            SsaOptions { grid: &full_grid, event_cap: args.event_cap, ..SsaOptions::default() };
        let traj = simulate_ssa(network, &x0, args.t_end, &mut rng, &opts)?;
        let grid_values = traj
            .grid_states
            .iter()
            .map(|counts| {
                projections
                    .iter()
                    .map(|p| p.iter().zip(counts).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect();
        Ok(ReplicateOutput { grid_values, hits: Vec::new() })
    })?;

    eprintln!("running {} reduced hybrid replicates...", args.replicates);
    let reduced_t_end = args.t_end / time_scale;
    let reduced = run_ensemble(args.replicates, args.seed, &reduced_grid, |mut rng| {
        let opts = HybridOptions {
            grid: &reduced_grid,
            event_cap: args.event_cap,
            ..HybridOptions::default()
        };
        let traj = simulate_hybrid(&compiled, reduced_t_end, &mut rng, &opts)?;
        Ok(ReplicateOutput::from_trajectory(&traj))
    })?;

    let report = compare_models(&full, &reduced, sc.spec.n0, gamma_f, &alpha_obs)?;

    use std::fmt::Write;
    let mut human = String::new();
    let _ = writeln!(
        human,
        "full vs reduced comparison at gamma = {} ({} replicates each)",
        args.gamma, args.replicates
    );
    for (o, name) in names.iter().enumerate() {
        let max_diff = report
            .mean_diff
            .iter()
            .map(|row| row[o].abs())
            .fold(0.0f64, f64::max);
        let _ = writeln!(
            human,
            "{name}: max |mean difference| = {max_diff:.6e}, band overlap = {:.1}%",
            100.0 * report.band_overlap[o]
        );
    }

    let mut csv = String::from("time");
    for n in &names {
        csv.push_str(&format!(",diff_{n}"));
    }
    csv.push('\n');
    for (t, row) in report.grid.iter().zip(&report.mean_diff) {
        csv.push_str(&t.to_string());
        for v in row {
            csv.push(',');
            csv.push_str(&v.to_string());
        }
        csv.push('\n');
    }

    match args.format {
        Format::Report => print!("{human}"),
        Format::Csv => print!("{csv}"),
    }
    if let Some(dir) = args.out {
        write_output(dir, "comparison.txt", &human)?;
        write_output(dir, "mean_diff.csv", &csv)?;
        write_output(dir, "full_means.csv", &ensemble_csv(&full, &names))?;
        write_output(dir, "reduced_means.csv", &ensemble_csv(&reduced, &names))?;
        for (p, name) in names.iter().enumerate() {
            if p < full.hit_samples.len() && !full.hit_samples[p].is_empty() {
                write_output(dir, &format!("hits_{name}.csv"), &hits_csv(&full, p, name))?;
            }
        }
        write_manifest(
            dir,
            "compare",
            &[(&net.path, &net.contents), (&sc.path, &sc.contents)],
            json!({
                "gamma": args.gamma,
                "initial": args.initial,
                "t_end": args.t_end,
                "grid": args.grid,
                "seed": args.seed,
                "replicates": args.replicates,
                "aux": args.aux,
                "event_cap": args.event_cap,
                "observables": names,
            }),
        )?;
    }
    Ok(())
}

fn cmd_examples(out: &Path) -> RunResult {
    fs::create_dir_all(out).map_err(|e| fail(format!("cannot create {}: {e}", out.display())))?;
    for (name, contents) in gallery::EXAMPLE_FILES {
        let path = out.join(name);
        fs::write(&path, contents)
            .map_err(|e| fail(format!("cannot write {}: {e}", path.display())))?;
        eprintln!("wrote {}", path.display());
    }
    println!("materialized {} example files in {}", gallery::EXAMPLE_FILES.len(), out.display());
    Ok(())
}
