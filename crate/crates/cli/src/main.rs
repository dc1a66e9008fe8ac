//! Command-line front end: prepare -> fuse -> estimate -> effects -> report,
//! reproducible from a single set of flags.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 model did not converge.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use modechoice::data::{self, io as data_io};
use modechoice::effects::{marginal_effects, MarginalEffectsTable};
use modechoice::estimate::{
    maximize, stepwise_retain, EstimationOptions, EstimationResult, HessianMethod,
};
use modechoice::likelihood::DrawAssignment;
use modechoice::report;
use modechoice::spec::ModelSpecification;
use modechoice::synthetic;
use modechoice::weather::{self, WeatherIndex, DEFAULT_MAX_GAP_MINUTES};

const EXIT_NON_CONVERGENCE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "modechoice",
    about = "Travel-mode choice estimation pipeline",
    version
)]
struct Cli {
    /// Worker threads for likelihood evaluation (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter a raw trip table and recode it into model-ready observations.
    Prepare(PrepareArgs),
    /// Attach station weather to each trip endpoint of a prepared table.
    Fuse(FuseArgs),
    /// Estimate a model by maximum simulated likelihood.
    Estimate(EstimateArgs),
    /// Compute average marginal effects of a fitted model.
    Effects(EffectsArgs),
    /// Re-render a result JSON as text and CSV tables.
    Report(ReportArgs),
    /// Generate a seeded synthetic dataset with known coefficients.
    SimulateFixture(SimulateArgs),
}

#[derive(Args)]
struct PrepareArgs {
    /// Raw trip table (CSV).
    #[arg(long)]
    trips: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FuseArgs {
    /// Prepared observations (CSV, from `prepare`).
    #[arg(long)]
    trips: PathBuf,
    /// Station-hourly weather records (CSV).
    #[arg(long)]
    weather: PathBuf,
    /// Maximum |station time - endpoint time| accepted, in minutes.
    #[arg(long, default_value_t = DEFAULT_MAX_GAP_MINUTES)]
    max_gap_minutes: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, ValueEnum)]
enum HessianArg {
    Numerical,
    OuterProduct,
}

#[derive(Args)]
struct EstimateArgs {
    /// Observations table (CSV, from `prepare` or `fuse`).
    #[arg(long)]
    trips: PathBuf,
    /// Model specification (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Halton draws per individual.
    #[arg(long, default_value_t = 200)]
    draws: usize,
    /// Discarded initial Halton points.
    #[arg(long, default_value_t = 100)]
    skip: usize,
    #[arg(long, default_value_t = 500)]
    max_iterations: usize,
    /// Convergence threshold on the gradient infinity norm.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Standard-error method.
    #[arg(long, value_enum, default_value_t = HessianArg::Numerical)]
    hessian: HessianArg,
    /// Give each trip its own draw block instead of sharing per person.
    #[arg(long)]
    draws_per_trip: bool,
    /// Seed random means from a first-stage fixed-coefficient fit.
    #[arg(long)]
    two_stage: bool,
    /// Apply the 95%-level stepwise retention rule.
    #[arg(long)]
    stepwise: bool,
    /// Also dump the Halton draw matrix for audit.
    #[arg(long)]
    dump_draws: Option<PathBuf>,
}

#[derive(Args)]
struct EffectsArgs {
    /// Observations table the model was fitted on (CSV).
    #[arg(long)]
    trips: PathBuf,
    /// Fitted result (JSON, from `estimate`).
    #[arg(long)]
    result: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Fitted result (JSON, from `estimate`).
    #[arg(long)]
    result: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, ValueEnum)]
enum FixtureKind {
    Mnl,
    Rpl,
    Retention,
}

#[derive(Args)]
struct SimulateArgs {
    /// RNG seed; runs with the same seed are byte-identical.
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FixtureKind::Mnl)]
    kind: FixtureKind,
    /// Observations to generate.
    #[arg(long, default_value_t = 5000)]
    n: usize,
    /// True mean of the random coefficient (rpl only).
    #[arg(long, default_value_t = -2.5, allow_hyphen_values = true)]
    mean: f64,
    /// True sd of the random coefficient (rpl only).
    #[arg(long, default_value_t = 2.8)]
    sd: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; anything else is a
            // usage error (exit 1).
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };

    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("error: could not configure {workers} workers: {e}");
            return ExitCode::from(1);
        }
    }

    let outcome = match cli.command {
        Command::Prepare(args) => cmd_prepare(&args),
        Command::Fuse(args) => cmd_fuse(&args),
        Command::Estimate(args) => cmd_estimate(&args),
        Command::Effects(args) => cmd_effects(&args),
        Command::Report(args) => cmd_report(&args),
        Command::SimulateFixture(args) => cmd_simulate(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn cmd_prepare(args: &PrepareArgs) -> Result<ExitCode> {
    let records = data_io::read_trips_path(&args.trips)
        .with_context(|| format!("reading {}", args.trips.display()))?;
    let total = records.len();
    let retained = data::filter_tld_adults(records);
    let kept = retained.len();

    let mut observations = Vec::with_capacity(kept);
    let mut incomplete = 0usize;
    for record in &retained {
        let obs = data::recode(record)
            .with_context(|| format!("recoding trip `{}`", record.trip_id))?;
        incomplete += usize::from(data::recode_incomplete(&obs));
        observations.push(obs);
    }

    ensure_out_dir(&args.out)?;
    let out_path = args.out.join("observations.csv");
    data_io::write_observations_path(&out_path, &observations)
        .with_context(|| format!("writing {}", out_path.display()))?;

    println!("input rows:                {total}");
    println!("retained (TLD adults):     {kept}");
    println!("dropped by filter:         {}", total - kept);
    println!("incomplete length/duration:{incomplete}");
    println!("wrote {}", out_path.display());
    if total == 0 {
        eprintln!("warning: input table had no data rows");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_fuse(args: &FuseArgs) -> Result<ExitCode> {
    let observations = data_io::read_observations_path(&args.trips)
        .with_context(|| format!("reading {}", args.trips.display()))?;
    let records = weather::read_weather_path(&args.weather)
        .with_context(|| format!("reading {}", args.weather.display()))?;
    let index = WeatherIndex::from_records(records)?;

    let (fused, summary) = weather::fuse(observations, &index, args.max_gap_minutes)?;

    ensure_out_dir(&args.out)?;
    let out_path = args.out.join("observations_fused.csv");
    data_io::write_observations_path(&out_path, &fused)?;

    println!("observations:              {}", fused.len());
    println!(
        "stations / records:        {} / {}",
        index.n_stations(),
        index.n_records()
    );
    println!(
        "origin matched / missing:  {} / {}",
        summary.origin_matched, summary.origin_missing
    );
    println!(
        "dest matched / missing:    {} / {}",
        summary.dest_matched, summary.dest_missing
    );
    println!("wrote {}", out_path.display());
    Ok(ExitCode::SUCCESS)
}

fn estimation_options(args: &EstimateArgs) -> EstimationOptions {
    EstimationOptions {
        n_draws: args.draws,
        skip: args.skip,
        max_iterations: args.max_iterations,
        gradient_tolerance: args.tolerance,
        hessian_method: match args.hessian {
            HessianArg::Numerical => HessianMethod::Numerical,
            HessianArg::OuterProduct => HessianMethod::OuterProduct,
        },
        start: Default::default(),
        draw_assignment: if args.draws_per_trip {
            DrawAssignment::PerTrip
        } else {
            DrawAssignment::PerPerson
        },
        two_stage_start: args.two_stage,
    }
}

fn write_result(out: &Path, result: &EstimationResult) -> Result<()> {
    ensure_out_dir(out)?;
    result.save(&out.join("result.json"))?;
    fs::write(out.join("result.txt"), report::render_estimation_text(result))?;
    fs::write(out.join("result.csv"), report::render_estimation_csv(result))?;
    Ok(())
}

fn cmd_estimate(args: &EstimateArgs) -> Result<ExitCode> {
    let observations = data_io::read_observations_path(&args.trips)
        .with_context(|| format!("reading {}", args.trips.display()))?;
    let spec = ModelSpecification::load(&args.spec)
        .with_context(|| format!("reading {}", args.spec.display()))?;
    let options = estimation_options(args);

    let result = if args.stepwise {
        let (final_spec, result, steps) = stepwise_retain(&spec, &observations, &options)?;
        for step in &steps {
            println!("stepwise: {step:?}");
        }
        drop(final_spec); // the surviving spec is embedded in the result
        result
    } else {
        maximize(&spec, &observations, &options)?
    };

    if let Some(dump) = &args.dump_draws {
        let model = modechoice::likelihood::Model::compile(
            &result.spec,
            &observations,
            options.draw_assignment,
        )?;
        let draws = model.build_draws(options.n_draws, options.skip)?;
        let file = fs::File::create(dump)?;
        draws.write_csv(std::io::BufWriter::new(file))?;
    }

    write_result(&args.out, &result)?;
    print!("{}", report::render_estimation_text(&result));
    println!("wrote {}", args.out.join("result.json").display());

    if result.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("warning: model did not converge");
        Ok(ExitCode::from(EXIT_NON_CONVERGENCE))
    }
}

fn write_effects(out: &Path, table: &MarginalEffectsTable) -> Result<()> {
    ensure_out_dir(out)?;
    let json = serde_json::to_string_pretty(table)?;
    fs::write(out.join("effects.json"), json + "\n")?;
    fs::write(out.join("effects.txt"), report::render_effects_text(table))?;
    fs::write(out.join("effects.csv"), report::render_effects_csv(table))?;
    Ok(())
}

fn cmd_effects(args: &EffectsArgs) -> Result<ExitCode> {
    let observations = data_io::read_observations_path(&args.trips)
        .with_context(|| format!("reading {}", args.trips.display()))?;
    let result = EstimationResult::load(&args.result)
        .with_context(|| format!("reading {}", args.result.display()))?;
    let table = marginal_effects(&result, &observations)?;
    write_effects(&args.out, &table)?;
    print!("{}", report::render_effects_text(&table));
    println!("wrote {}", args.out.join("effects.csv").display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(args: &ReportArgs) -> Result<ExitCode> {
    let result = EstimationResult::load(&args.result)
        .with_context(|| format!("reading {}", args.result.display()))?;
    if result.schema_version != modechoice::estimate::RESULT_SCHEMA_VERSION {
        bail!(
            "result schema version {} is not supported (expected {})",
            result.schema_version,
            modechoice::estimate::RESULT_SCHEMA_VERSION
        );
    }
    ensure_out_dir(&args.out)?;
    fs::write(
        args.out.join("result.txt"),
        report::render_estimation_text(&result),
    )?;
    fs::write(
        args.out.join("result.csv"),
        report::render_estimation_csv(&result),
    )?;
    print!("{}", report::render_estimation_text(&result));
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<ExitCode> {
    let fixture = match args.kind {
        FixtureKind::Mnl => synthetic::mnl_fixture(args.seed, args.n),
        FixtureKind::Rpl => synthetic::rpl_fixture(args.seed, args.n, args.mean, args.sd),
        FixtureKind::Retention => synthetic::retention_fixture(args.seed, args.n),
    };
    ensure_out_dir(&args.out)?;
    data_io::write_observations_path(&args.out.join("observations.csv"), &fixture.observations)?;
    fixture.spec.save(&args.out.join("spec.json"))?;
    let truth = serde_json::to_string_pretty(&fixture.truth)?;
    fs::write(args.out.join("truth.json"), truth + "\n")?;
    println!(
        "wrote {} observations, spec, and truth to {}",
        fixture.observations.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}
