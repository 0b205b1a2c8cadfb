use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use posevote_core::io::{
    parse_correspondences, parse_sweep_str, read_records, render_document, render_error, write_correspondences,
    write_plot_data, write_records, RunConfig, RunMetadata,
};
use posevote_core::synth::{compare_methods, run_benchmark, BenchOptions};
use posevote_core::{generate_scene, solve, AnalyticConstants, Error, Method, Pose, SceneConfig, SolveOptions};

#[derive(Parser)]
#[command(name = "posevote", version, about = "Gravity-aligned camera pose estimation by incidence counting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic correspondence file.
    Generate(GenerateArgs),
    /// Estimate the pose behind a correspondence file.
    Solve(SolveArgs),
    /// Brute-force counts at every grid vertex, ignoring --method (slow).
    Oracle(SolveArgs),
    /// Run a sweep file and write benchmark records.
    Bench(BenchArgs),
    /// Rank methods per configuration from benchmark records.
    Compare(CompareArgs),
}

#[derive(Args)]
struct SceneArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    inlier_ratio: f64,
    #[arg(long, default_value_t = 0.02)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ground-truth pose as x,y,z,kappa.
    #[arg(long, value_parser = parse_pose, default_value = "0.3,0.2,0.1,0.6")]
    true_pose: Pose,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Destination file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Correspondence file with `w1,w2,w3,xi,eta` lines.
    input: PathBuf,
    #[arg(long, value_parser = parse_method, default_value = "primal-dual")]
    method: Method,
    #[arg(long, default_value_t = 0.03)]
    epsilon: f64,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    /// Recorded in the output for reproducibility.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    early_exit: bool,
    /// Separation threshold of the admissibility conditions.
    #[arg(long, default_value_t = 0.2)]
    a: f64,
    /// Destination file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Sweep file with `method,n,epsilon,inlier_ratio,noise_sigma,seed` lines.
    sweep: PathBuf,
    #[arg(long, value_parser = parse_pose, default_value = "0.3,0.2,0.1,0.6")]
    true_pose: Pose,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    #[arg(long)]
    early_exit: bool,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    /// CSV file for the records.
    #[arg(long, short, default_value = "records.csv")]
    output: PathBuf,
    /// Directory for per-method plot data.
    #[arg(long)]
    plot_dir: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// CSV file written by `bench`.
    records: PathBuf,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_pose(s: &str) -> Result<Pose, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("not a number: '{p}'")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, z, kappa] => Ok(Pose::new(x, y, z, kappa)),
        _ => Err(format!("expected x,y,z,kappa, got {} values", v.len())),
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Error> {
    match output {
        Some(p) => Ok(fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn generate(args: &GenerateArgs) -> Result<(), Error> {
    let s = &args.scene;
    let config = SceneConfig {
        n: s.n,
        inlier_ratio: s.inlier_ratio,
        noise_sigma: s.noise_sigma,
        true_pose: s.true_pose,
        seed: s.seed,
        ..Default::default()
    };
    let scene = generate_scene(&config)?;
    match &args.output {
        Some(p) => write_correspondences(p, &scene.correspondences),
        None => emit(None, &posevote_core::io::format_correspondences(&scene.correspondences)),
    }
}

fn solve_file(args: &SolveArgs, method: Method) -> Result<(), Error> {
    let config = RunConfig {
        method,
        epsilon: args.epsilon,
        consts: AnalyticConstants::with_a(args.a),
        top_k: args.top_k,
        seed: args.seed,
        input: Some(args.input.clone()),
        output: args.output.clone(),
        early_exit: args.early_exit,
    };
    config.validate()?;
    let corrs = parse_correspondences(&args.input)?;
    let start = Instant::now();
    let opts = SolveOptions {
        method,
        epsilon: config.epsilon,
        consts: config.consts,
        top_k: config.top_k,
        early_exit: config.early_exit,
        normalize: true,
    };
    let out = solve(&corrs, &opts)?;
    let meta = RunMetadata {
        config: &config,
        normalization: out.normalization,
        ingest: out.ingest,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    emit(args.output.as_deref(), &render_document(&out.result, &meta))
}

fn bench(args: &BenchArgs) -> Result<(), Error> {
    let entries = parse_sweep_str(&fs::read_to_string(&args.sweep)?, args.true_pose)?;
    if entries.is_empty() {
        eprintln!("warning: sweep file has no entries; nothing to run");
        return Ok(());
    }
    let opts = BenchOptions {
        repetitions: args.repetitions.max(1),
        early_exit: args.early_exit,
        top_k: args.top_k.max(1),
        ..Default::default()
    };
    let records = run_benchmark(&entries, &opts);
    write_records(&args.output, &records)?;
    if let Some(dir) = &args.plot_dir {
        write_plot_data(dir, &records)?;
    }
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    eprintln!("{} records written to {}, {failed} failed", records.len(), args.output.display());
    for r in records.iter().filter(|r| r.error.is_some()) {
        eprintln!("  {} n={} eps={} seed={}: {}", r.method, r.n, r.epsilon, r.seed, r.error.as_deref().unwrap_or(""));
    }
    Ok(())
}

fn compare(args: &CompareArgs) -> Result<(), Error> {
    let records = read_records(&args.records)?;
    let groups = compare_methods(&records)?;
    println!("n\tepsilon\tinlier_ratio\tnoise_sigma\tseed\tfastest\tspeedups");
    for g in groups {
        let speedups: Vec<String> = g.speedups.iter().map(|(m, s)| format!("{m}={s:.3}")).collect();
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            g.n,
            g.epsilon,
            g.inlier_ratio,
            g.noise_sigma,
            g.seed,
            g.fastest,
            speedups.join(",")
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, output) = match &cli.command {
        Command::Generate(a) => (generate(a), None),
        Command::Solve(a) => (solve_file(a, a.method), a.output.as_deref()),
        Command::Oracle(a) => (solve_file(a, Method::Oracle), a.output.as_deref()),
        Command::Bench(a) => (bench(a), None),
        Command::Compare(a) => (compare(a), None),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = render_error(&e);
            eprint!("{record}");
            if let Some(p) = output {
                let _ = fs::write(p, &record);
            }
            ExitCode::from(1)
        }
    }
}
