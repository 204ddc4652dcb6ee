//! `pubsci` binary: one subcommand per pipeline stage, plus `run` for the
//! whole pipeline, `fixture` for synthetic inputs, `eval-match` for scoring
//! the match log, and `report` for the plain-text summary.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pubsci_cli::config::{parse_models, parse_window, PipelineConfig};
use pubsci_cli::manifest::StageRecord;
use pubsci_cli::stages;
use pubsci_cli::CliError;
use pubsci_core::fixture::FixtureSpec;
use pubsci_core::funding::FunderFilter;

#[derive(Parser)]
#[command(
    name = "pubsci",
    version,
    about = "Link references to a paper corpus and analyze public-domain consumption"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Pipeline configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone)]
struct ModelList(Vec<u32>);

fn parse_model_list(s: &str) -> Result<ModelList, String> {
    parse_models(s).map(ModelList)
}

#[derive(Copy, Clone, clap::ValueEnum)]
enum FunderClassArg {
    Government,
    All,
}

impl From<FunderClassArg> for FunderFilter {
    fn from(arg: FunderClassArg) -> Self {
        match arg {
            FunderClassArg::Government => FunderFilter::Government,
            FunderClassArg::All => FunderFilter::All,
        }
    }
}

#[derive(Args)]
struct FundingArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Proration window as START..END, each an ISO date or a bare year.
    #[arg(long, value_parser = parse_window)]
    window: Option<(chrono::NaiveDate, chrono::NaiveDate)>,
    /// Which funders count toward field totals.
    #[arg(long, value_enum)]
    funder_class: Option<FunderClassArg>,
}

#[derive(Args)]
struct RegressArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Models to estimate, e.g. `1-8` or `1,3,7`.
    #[arg(long, value_parser = parse_model_list)]
    models: Option<ModelList>,
    /// Rank-correlate two keyed value files instead of estimating models.
    #[arg(long, num_args = 2, value_names = ["FILE_A", "FILE_B"])]
    spearman: Option<Vec<PathBuf>>,
}

#[derive(Args)]
struct FixtureArgs {
    /// Directory to write the synthetic input files into.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    papers: Option<usize>,
    #[arg(long)]
    level0_fields: Option<usize>,
    #[arg(long)]
    level1_fields: Option<usize>,
    /// Reference strings derived from real corpus papers.
    #[arg(long)]
    references: Option<usize>,
    /// Reference strings with no corpus counterpart.
    #[arg(long)]
    distractors: Option<usize>,
    #[arg(long)]
    grants: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write a manifest.
    Run(ConfigArgs),
    /// Filter the corpus and build the search index.
    Index(ConfigArgs),
    /// Fit the second-best-score null model from the reference file.
    Calibrate(ConfigArgs),
    /// Resolve reference strings into consumption events.
    Match(ConfigArgs),
    /// Score the match log against its gold labels.
    EvalMatch(ConfigArgs),
    /// Compute relative consumption indices per field.
    Rci(ConfigArgs),
    /// Compute highly-cited hit rates per domain.
    Hits(ConfigArgs),
    /// Count exclusive domain intersections over consumed papers.
    Venn(ConfigArgs),
    /// Project per-field indices onto the three-domain simplex.
    Ternary(ConfigArgs),
    /// Profile consumption per subdomain within each domain.
    Subdomains(ConfigArgs),
    /// Rank fields per domain by consumption and by index.
    Rank(ConfigArgs),
    /// Prorate grant money to the window and allocate it to fields.
    Funding(FundingArgs),
    /// Estimate the model suite, or correlate two keyed files.
    Regress(RegressArgs),
    /// Generate a synthetic input set with ground truth and a config.
    Fixture(FixtureArgs),
    /// Assemble the plain-text report from stage outputs.
    Report(ConfigArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(args: &ConfigArgs) -> Result<PipelineConfig, CliError> {
    let mut config = PipelineConfig::load(&args.config)?;
    if let Some(dir) = &args.out_dir {
        config.paths.out_dir = dir.clone();
        config.validate()?;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn print_records(records: &[StageRecord]) {
    for rec in records {
        let counts: Vec<String> = rec.counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("{}: {}", rec.stage, counts.join(" "));
    }
}

fn run_named(args: &ConfigArgs, names: &[&str]) -> Result<(), CliError> {
    let config = load_config(args)?;
    run_stage_list(&config, names)
}

fn run_stage_list(config: &PipelineConfig, names: &[&str]) -> Result<(), CliError> {
    let records = stages::run_stages(config, names)?;
    print_records(&records);
    Ok(())
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(args) => {
            let config = load_config(&args)?;
            let manifest = stages::run_pipeline(&config)?;
            print_records(&manifest.stages);
            println!(
                "manifest: {}",
                config.paths.out_dir.join(stages::MANIFEST_FILE).display()
            );
            Ok(())
        }
        Command::Index(args) => run_named(&args, &["ingest", "index"]),
        Command::Calibrate(args) => run_named(&args, &["calibrate"]),
        Command::Match(args) => run_named(&args, &["match"]),
        Command::EvalMatch(args) => {
            let config = load_config(&args)?;
            let eval = stages::eval_match(&config)?;
            println!(
                "f1={:.4} precision={:.4} recall={:.4} conditional_accuracy={:.4}",
                eval.f1, eval.precision, eval.recall, eval.conditional_accuracy
            );
            Ok(())
        }
        Command::Rci(args) => run_named(&args, &["events", "rci"]),
        Command::Hits(args) => run_named(&args, &["events", "hits"]),
        Command::Venn(args) => run_named(&args, &["events", "venn"]),
        Command::Ternary(args) => run_named(&args, &["ternary"]),
        Command::Subdomains(args) => run_named(&args, &["events", "subdomains"]),
        Command::Rank(args) => run_named(&args, &["rank"]),
        Command::Funding(args) => {
            let mut config = load_config(&args.common)?;
            if let Some((start, end)) = args.window {
                config.analysis.window_start = start;
                config.analysis.window_end = end;
            }
            if let Some(class) = args.funder_class {
                config.analysis.funder_class = class.into();
            }
            run_stage_list(&config, &["funding"])
        }
        Command::Regress(args) => {
            let mut config = load_config(&args.common)?;
            if let Some(files) = &args.spearman {
                let result = stages::spearman_from_files(&files[0], &files[1])?;
                stages::write_spearman(&config, &result)?;
                println!(
                    "spearman: r_s={} p={} n={} exact={}",
                    result.r_s, result.p_value, result.n, result.exact
                );
                return Ok(());
            }
            if let Some(ModelList(models)) = args.models {
                config.analysis.models = models;
            }
            run_stage_list(&config, &["regress"])
        }
        Command::Fixture(args) => {
            let mut spec = FixtureSpec::default();
            if let Some(seed) = args.seed {
                spec.seed = seed;
            }
            if let Some(n) = args.papers {
                spec.papers = n;
            }
            if let Some(n) = args.level0_fields {
                spec.level0_fields = n;
            }
            if let Some(n) = args.level1_fields {
                spec.level1_fields = n;
            }
            if let Some(n) = args.references {
                spec.true_references = n;
            }
            if let Some(n) = args.distractors {
                spec.distractor_references = n;
            }
            if let Some(n) = args.grants {
                spec.grants = n;
            }
            if spec.papers == 0 || spec.level0_fields == 0 || spec.level1_fields < spec.level0_fields
            {
                return Err(CliError::Config(
                    "fixture sizes must be positive, with at least as many level-1 as level-0 fields"
                        .into(),
                ));
            }
            fs::create_dir_all(&args.out_dir).map_err(|e| CliError::io(&args.out_dir, e))?;
            let fixture = stages::write_fixture_set(&spec, &args.out_dir)?;
            println!(
                "fixture: {} papers, {} events, {} references ({} distractors), {} grants",
                fixture.papers.len(),
                fixture.events.len(),
                fixture.references.len(),
                fixture.ground_truth.distractor_reference_count,
                fixture.grants.len()
            );
            println!(
                "config: {}",
                args.out_dir.join(stages::PIPELINE_CONFIG_FILE).display()
            );
            Ok(())
        }
        Command::Report(args) => run_named(&args, &["report"]),
    }
}
