//! `hybridtherm`: synthetic data, physics tiers, hybrid training, evaluation,
//! explanation and data-quantity sweeps from the command line.
//!
//! Exit codes: 0 success, 2 validation error, 3 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use hybridtherm::eval::{
    evaluate_predictions, metrics_csv, monthly_breakdown, rooms_from_frame, run_data_quantity_sweep, run_explain_study,
    run_scenario_matrix, scenario_frame, test_boundary, ExperimentData, HarnessConfig, ReportMeta, StudyModel,
};
use hybridtherm::hybrid::{hybrid_fit, hybrid_predict, load_bundle, save_bundle, HybridModel, HybridStrategy};
use hybridtherm::learners::LearnerKind;
use hybridtherm::physics::{make_tier, PhysicsTier, RcNetwork, TierKind};
use hybridtherm::synth::generate_world;
use hybridtherm::timeseries::{load_csv, save_csv, split_train_test, ScenarioId, ScenarioSpec, Schema, TimeSeriesFrame};
use hybridtherm::{Error, Result};

const DATA_FILE: &str = "data.csv";
const SCHEMA_FILE: &str = "schema.txt";
const NETWORK_FILE: &str = "network.json";

#[derive(Parser)]
#[command(name = "hybridtherm", version, about = "Gray-box building thermal modeling")]
struct Cli {
    /// key=value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; overrides `seed` in the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Measurement CSV
    #[arg(long)]
    data: PathBuf,
    /// Column schema; defaults to schema.txt next to the data
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Documented RC network; defaults to network.json next to the data
    #[arg(long)]
    network: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic building dataset
    Synth,
    /// Run a physics tier over the data
    Simulate {
        #[command(flatten)]
        data: DataArgs,
        /// archetype, uncalibrated or calibrated
        #[arg(long, default_value = "uncalibrated")]
        tier: TierKind,
        /// Previously saved tier; overrides --tier
        #[arg(long)]
        tier_file: Option<PathBuf>,
    },
    /// Calibrate the documented network on the training rows
    Calibrate {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Fit one hybrid model and save it as a bundle
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "residual")]
        strategy: HybridStrategy,
        #[arg(long, default_value = "ffnn")]
        learner: LearnerKind,
        #[arg(long, default_value = "WBR")]
        scenario: ScenarioId,
    },
    /// Score a bundle on the test range, or run the scenario matrix
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        /// Bundle to score; without it the configured scenario matrix runs
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Owen-value study of one or more bundles
    Explain {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, required = true)]
        bundle: Vec<PathBuf>,
    },
    /// Data-quantity sweep over the configured windows
    Sweep {
        #[command(flatten)]
        data: DataArgs,
    },
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn load_config(cli: &Cli) -> Result<HarnessConfig> {
    let mut config = match &cli.config {
        Some(path) => {
            if !path.exists() {
                return Err(Error::MissingFile(path.clone()));
            }
            HarnessConfig::parse(&std::fs::read_to_string(path)?)?
        }
        None => HarnessConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.set("seed", &seed.to_string()).map_err(invalid)?;
    }
    Ok(config)
}

fn sibling(data: &Path, name: &str) -> PathBuf {
    data.parent().unwrap_or(Path::new(".")).join(name)
}

fn load_frame(args: &DataArgs) -> Result<TimeSeriesFrame> {
    let schema_path = args.schema.clone().unwrap_or_else(|| sibling(&args.data, SCHEMA_FILE));
    load_csv(&args.data, &Schema::load(&schema_path)?)
}

fn load_network(args: &DataArgs) -> Result<RcNetwork> {
    RcNetwork::load(&args.network.clone().unwrap_or_else(|| sibling(&args.data, NETWORK_FILE)))
}

fn load_data(args: &DataArgs, config: &HarnessConfig) -> Result<ExperimentData> {
    let frame = load_frame(args)?;
    let rooms = rooms_from_frame(&frame);
    if rooms.is_empty() {
        return Err(invalid("data has no <room>_temp target columns"));
    }
    ExperimentData::prepare(frame, load_network(args)?, rooms, config.plan.resolution_minutes)
}

fn split(data: &ExperimentData, config: &HarnessConfig, spec: &ScenarioSpec) -> Result<(TimeSeriesFrame, TimeSeriesFrame)> {
    let boundary = test_boundary(&config.plan, &data.frame)?;
    split_train_test(&scenario_frame(&data.frame, spec), boundary)
}

fn scenario_for(tier: TierKind) -> ScenarioSpec {
    ScenarioId::ALL.into_iter().map(ScenarioId::spec).find(|s| s.physics_tier == tier).expect("every tier has a scenario")
}

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, body)?;
    info!("wrote {}", path.display());
    Ok(())
}

fn seed_of(config: &HarnessConfig) -> u64 {
    config.plan.seeds[0]
}

fn run(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    let out = &cli.out_dir;
    match &cli.command {
        Command::Synth => {
            let world = generate_world(&config.world)?;
            std::fs::create_dir_all(out)?;
            save_csv(&world.frame, &out.join(DATA_FILE))?;
            Schema::from_frame(&world.frame).save(&out.join(SCHEMA_FILE))?;
            world.truth.documented_network().save(&out.join(NETWORK_FILE))?;
            write(&out.join("truth.json"), world.truth.to_json()?)?;
        }
        Command::Simulate { data, tier, tier_file } => {
            let d = load_data(data, &config)?;
            let tier = match tier_file {
                Some(path) => PhysicsTier::from_json(&std::fs::read_to_string(path).map_err(|_| Error::MissingFile(path.clone()))?)?,
                None => {
                    let (train, _) = split(&d, &config, &scenario_for(*tier))?;
                    make_tier(*tier, &d.documented, &d.rooms, seed_of(&config), Some(&train), &config.plan.calibration)?
                }
            };
            let sim = tier.simulate(&scenario_frame(&d.frame, &scenario_for(tier.kind)))?;
            std::fs::create_dir_all(out)?;
            save_csv(&sim, &out.join("simulation.csv"))?;
        }
        Command::Calibrate { data } => {
            let d = load_data(data, &config)?;
            let spec = ScenarioId::WBR.spec();
            let (train, _) = split(&d, &config, &spec)?;
            let tier = make_tier(TierKind::CalibratedDetailed, &d.documented, &d.rooms, seed_of(&config), Some(&train), &config.plan.calibration)?;
            write(&out.join("tier.json"), tier.to_json()?)?;
            write(&out.join("calibration.json"), serde_json::to_string_pretty(&tier.calibration)?)?;
        }
        Command::Train { data, strategy, learner, scenario } => {
            let d = load_data(data, &config)?;
            let spec = scenario.spec();
            let (train, _) = split(&d, &config, &spec)?;
            let seed = seed_of(&config);
            let tier = make_tier(spec.physics_tier, &d.documented, &d.rooms, seed, Some(&train), &config.plan.calibration)?;
            let (model, report) = hybrid_fit(*strategy, *learner, &config.plan.learner.with_seed(seed), &tier, &train, &spec)?;
            save_bundle(&model, &out.join("bundle"))?;
            write(&out.join("fit_report.json"), serde_json::to_string_pretty(&report)?)?;
        }
        Command::Evaluate { data, bundle: Some(bundle) } => {
            let d = load_data(data, &config)?;
            let model = load_bundle(bundle)?;
            let (train, test) = split(&d, &config, &model.scenario.spec())?;
            let pred = hybrid_predict(&model, &test)?;
            let meta = ReportMeta {
                scenario: model.scenario.to_string(),
                strategy: model.strategy.to_string(),
                learner: model.learner.kind().to_string(),
                seed: seed_of(&config),
                window_months: None,
                train_rows: train.n_rows(),
            };
            let mut report = evaluate_predictions(&test, &pred, &model.rooms, meta)?;
            report.monthly = monthly_breakdown(&test, &pred, &model.rooms)?;
            write(&out.join("metrics.csv"), metrics_csv(std::slice::from_ref(&report)))?;
            write(&out.join("report.json"), serde_json::to_string_pretty(&report)?)?;
        }
        Command::Evaluate { data, bundle: None } => {
            let d = load_data(data, &config)?;
            let mut plan = config.plan.clone();
            plan.output_dir = Some(out.clone());
            run_scenario_matrix(&plan, &d)?;
            write(&out.join("plan.json"), serde_json::to_string_pretty(&plan)?)?;
        }
        Command::Explain { data, bundle } => {
            let d = load_data(data, &config)?;
            let models = bundle.iter().map(|b| load_bundle(b)).collect::<Result<Vec<HybridModel>>>()?;
            let boundary = test_boundary(&config.plan, &d.frame)?;
            let (train, test) = split_train_test(&d.frame, boundary)?;
            let labelled: Vec<(String, StudyModel)> = models
                .iter()
                .enumerate()
                .map(|(i, m)| (format!("{}-{}-{}-{i}", m.scenario, m.strategy, m.learner.kind()), StudyModel::Hybrid(m)))
                .collect();
            run_explain_study(&labelled, &train, &test, &config.explain, Some(out))?;
        }
        Command::Sweep { data } => {
            let d = load_data(data, &config)?;
            let mut plan = config.plan.clone();
            plan.output_dir = Some(out.clone());
            run_data_quantity_sweep(&plan, &d)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
