//! Command-line front end for the activation benchmark lab.
//!
//! Four subcommands cover the full workflow: `bench-infer` times forward
//! passes over exponentially growing workloads, `analyze` derives spread
//! ratios, identity-relative costs, per-instance curves, and rendered
//! tables from timing CSVs (live or embedded reference data), `bench-train`
//! runs the digit-classification train-to-threshold experiment, and
//! `costmodel` tallies micro-op totals for instruction listings.
//!
//! Every command that writes files also writes a `manifest.json` next to
//! them recording the exact invocation, resolved configuration, seed, and
//! timestamps, so any artifact can be traced back to the run that made it.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error, 3 completed but
//! some planned measurements were skipped (budget or allocation).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand};

use actbench_core::activations::{ActivationKind, FunctionGroup};
use actbench_core::analysis::{self, TimingTable};
use actbench_core::costmodel::{self, CostTable, Listing};
use actbench_core::fixtures;
use actbench_core::harness::{self, BenchPlan};
use actbench_core::mnist::{self, LabeledDataset, TrainOptions};
use actbench_core::nncore::{self, NetworkConfig};
use actbench_core::Matrix;

const EXIT_SKIPPED_WORK: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "actbench",
    version,
    about = "Benchmark lab for the per-instance cost of neural activation functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Time inference forward passes over workloads of 10^0..=10^n inputs.
    BenchInfer(BenchInferArgs),
    /// Derive statistics and tables from timing CSVs or embedded references.
    Analyze(AnalyzeArgs),
    /// Train digit classifiers to a validation-accuracy threshold.
    BenchTrain(BenchTrainArgs),
    /// Tally micro-op totals for x86-style instruction listings.
    Costmodel(CostmodelArgs),
}

fn main() {
    let cli = Cli::parse();
    let invocation = std::env::args().collect::<Vec<_>>().join(" ");
    let outcome = match cli.command {
        Command::BenchInfer(args) => cmd_bench_infer(args, &invocation),
        Command::Analyze(args) => cmd_analyze(args, &invocation),
        Command::BenchTrain(args) => cmd_bench_train(args, &invocation),
        Command::Costmodel(args) => cmd_costmodel(args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}

// ───────────────────────── shared plumbing ─────────────────────────

/// Comma-separated function names as a clap value; `all` selects the whole
/// benchmark set.
#[derive(Clone, Debug)]
struct FunctionList(Vec<ActivationKind>);

fn parse_function_list(s: &str) -> Result<FunctionList, String> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(FunctionList(ActivationKind::all().to_vec()));
    }
    let mut kinds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let kind = ActivationKind::from_name(part).map_err(|_| {
            let names: Vec<&str> = ActivationKind::all().iter().map(|k| k.name()).collect();
            format!(
                "unknown function {part:?}; valid names are: {}",
                names.join(", ")
            )
        })?;
        kinds.push(kind);
    }
    if kinds.is_empty() {
        return Err("the function list is empty".into());
    }
    Ok(FunctionList(kinds))
}

fn parse_group(s: &str) -> Result<FunctionGroup, String> {
    match s.to_ascii_lowercase().as_str() {
        "activation" => Ok(FunctionGroup::Activation),
        "dropout" => Ok(FunctionGroup::Dropout),
        "identity" => Ok(FunctionGroup::Identity),
        other => Err(format!(
            "unknown group {other:?}; valid groups are: activation, dropout, identity"
        )),
    }
}

/// Provenance record written next to every file-producing run.
#[derive(Debug, serde::Serialize)]
struct RunManifest {
    command: String,
    config: serde_json::Value,
    seed: u64,
    platform_label: String,
    started_at: String,
    finished_at: String,
    tool_version: String,
    /// Files this run produced, relative to the manifest.
    outputs: Vec<String>,
}

fn utc_stamp() -> String {
    chrono::Utc::now().to_rfc3339()
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(manifest)?;
    fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

// ───────────────────────── bench-infer ─────────────────────────

#[derive(Args, Debug)]
struct BenchInferArgs {
    /// Comma-separated function names, or `all`.
    #[arg(long, default_value = "all", value_parser = parse_function_list)]
    functions: FunctionList,
    /// Largest workload exponent; sizes sweep 10^0 through 10^this.
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u32).range(0..=8))]
    max_exponent: u32,
    /// Timed repetitions per (function, size) cell.
    #[arg(long, default_value_t = harness::DEFAULT_RUNS, value_parser = clap::value_parser!(u32).range(1..))]
    runs: u32,
    /// Optimizer updates against random data before any timing.
    #[arg(long, default_value_t = 0)]
    pretrain_epochs: usize,
    /// Wall-clock budget; cells past it become skip markers.
    #[arg(long, default_value_t = harness::DEFAULT_TIME_BUDGET_SECONDS)]
    budget_seconds: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving the records CSV, aggregate JSON, and manifest.
    #[arg(long, default_value = "actbench-out")]
    out: PathBuf,
    /// Host label stamped into every record.
    #[arg(long, env = "ACTBENCH_PLATFORM", default_value = "unspecified")]
    platform: String,
    #[arg(long, default_value = "cpu")]
    device: String,
    /// Cap rows per forward pass to bound peak memory.
    #[arg(long)]
    batch_limit: Option<usize>,
    /// Network shape; defaults reproduce the inference benchmark preset.
    #[arg(long, default_value_t = 64)]
    input_dim: usize,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    hidden_layers: u64,
    #[arg(long, default_value_t = 1024)]
    hidden_width: usize,
    #[arg(long, default_value_t = 16)]
    output_dim: usize,
}

fn cmd_bench_infer(args: BenchInferArgs, invocation: &str) -> Result<i32> {
    let started_at = utc_stamp();
    let plan = BenchPlan {
        functions: args.functions.0.clone(),
        exponents: (0..=args.max_exponent).collect(),
        runs: args.runs,
        time_budget_seconds: args.budget_seconds,
        pretrain_epochs: args.pretrain_epochs,
        seed: args.seed,
        platform_label: args.platform.clone(),
        device: args.device.clone(),
        batch_limit: args.batch_limit,
    };
    let mut config = NetworkConfig::inference_benchmark(ActivationKind::Identity, args.seed);
    config.input_dim = args.input_dim;
    config.hidden_layers = args.hidden_layers as usize;
    config.hidden_width = args.hidden_width;
    config.output_dim = args.output_dim;

    let outcome = harness::run_inference_bench(&plan, &config)?;

    create_out_dir(&args.out)?;
    let records_path = args.out.join("bench_infer_records.csv");
    let mut records_file = fs::File::create(&records_path)
        .with_context(|| format!("creating {}", records_path.display()))?;
    harness::write_records_csv(&outcome, &mut records_file)?;

    let aggregates_path = args.out.join("bench_infer_aggregates.json");
    let aggregates = serde_json::json!({
        "manifest": "manifest.json",
        "rows": harness::aggregate(&outcome.records),
    });
    fs::write(&aggregates_path, serde_json::to_string_pretty(&aggregates)?)
        .with_context(|| format!("writing {}", aggregates_path.display()))?;

    write_manifest(
        &args.out,
        &RunManifest {
            command: invocation.to_string(),
            config: serde_json::json!({ "plan": &plan, "network": &config }),
            seed: args.seed,
            platform_label: args.platform.clone(),
            started_at,
            finished_at: utc_stamp(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: vec![
                "bench_infer_records.csv".to_string(),
                "bench_infer_aggregates.json".to_string(),
            ],
        },
    )?;

    println!(
        "recorded {} timings ({} skipped) into {}",
        outcome.records.len(),
        outcome.skips.len(),
        args.out.display()
    );
    if outcome.skips.is_empty() {
        Ok(0)
    } else {
        for skip in &outcome.skips {
            eprintln!(
                "skipped {} at n={} run {}: {}",
                skip.function.name(),
                skip.size_exponent,
                skip.run_index,
                skip.reason
            );
        }
        Ok(EXIT_SKIPPED_WORK)
    }
}

// ───────────────────────── analyze ─────────────────────────

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["fixture", "input"])))]
#[command(group(ArgGroup::new("action").required(true).args(["spread", "relative", "curve", "table"])))]
struct AnalyzeArgs {
    /// Embedded reference table: table1, table2, table3, or table4.
    #[arg(long)]
    fixture: Option<String>,
    /// Timing CSV in the harness record schema or the mean schema (sniffed
    /// from the header).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Print the slowest/fastest ratio of one group column at --n.
    #[arg(long, requires = "n")]
    spread: bool,
    /// Print activation means at --n relative to Identity.
    #[arg(long, requires = "n")]
    relative: bool,
    /// Emit the per-instance cost series of every function as CSV.
    #[arg(long)]
    curve: bool,
    /// Render the timing grid as monospace text.
    #[arg(long)]
    table: bool,
    /// Workload exponent the statistic is taken at.
    #[arg(long, value_parser = clap::value_parser!(u32).range(0..=8))]
    n: Option<u32>,
    /// Group the spread is taken over.
    #[arg(long, default_value = "activation", value_parser = parse_group)]
    group: FunctionGroup,
    /// Write the artifact (plus a manifest) here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_table(args: &AnalyzeArgs) -> Result<TimingTable> {
    if let Some(name) = &args.fixture {
        let text = fixtures::fixture_table(name).ok_or_else(|| {
            anyhow::anyhow!(
                "unknown fixture {name:?}; shipped tables are: {}",
                fixtures::FIXTURE_TABLE_NAMES.join(", ")
            )
        })?;
        Ok(TimingTable::from_mean_csv(text.as_bytes())?)
    } else {
        let path = args.input.as_ref().expect("clap requires a source");
        let file =
            fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        TimingTable::from_csv_auto(file)
            .with_context(|| format!("reading {}", path.display()))
    }
}

fn cmd_analyze(args: AnalyzeArgs, invocation: &str) -> Result<i32> {
    let started_at = utc_stamp();
    let table = load_table(&args)?;

    let mut artifact_name = String::new();
    let mut artifact = Vec::new();
    if args.spread {
        let n = args.n.expect("clap requires --n with --spread");
        let s = analysis::group_spread(&table, args.group, n)?;
        println!(
            "{} spread at n={}: {:.2} ({} {} / {} {})",
            s.group,
            s.size_exponent,
            s.ratio,
            s.argmax.name(),
            analysis::format_mean(s.max_mean_s),
            s.argmin.name(),
            analysis::format_mean(s.min_mean_s),
        );
        artifact_name = "spread.csv".to_string();
        analysis::write_spread_csv(&[s], &mut artifact)?;
    } else if args.relative {
        let n = args.n.expect("clap requires --n with --relative");
        let r = analysis::relative_to_identity(&table, n)?;
        for (f, ratio) in &r.ratios {
            println!("{} {:.2}", f.name(), ratio);
        }
        println!(
            "activation group at n={}: mean {:.2}x identity, sd {:.2}",
            r.size_exponent, r.mean_ratio, r.sd_ratio
        );
        artifact_name = "relative_to_identity.csv".to_string();
        let mut w = csv::Writer::from_writer(&mut artifact);
        w.write_record(["function", "n", "ratio_to_identity"])?;
        for (f, ratio) in &r.ratios {
            w.write_record([f.name(), &n.to_string(), &format!("{ratio}")])?;
        }
        w.flush()?;
        drop(w);
    } else if args.curve {
        artifact_name = "per_instance_curve.csv".to_string();
        analysis::write_curve_csv(&table, &mut artifact)?;
        if args.out.is_none() {
            print!("{}", String::from_utf8_lossy(&artifact));
        }
    } else if args.table {
        artifact_name = "table.txt".to_string();
        artifact = analysis::emit_table(&table).into_bytes();
        if args.out.is_none() {
            print!("{}", String::from_utf8_lossy(&artifact));
        }
    }

    if let Some(out) = &args.out {
        let dir = out.parent().filter(|p| !p.as_os_str().is_empty());
        if let Some(dir) = dir {
            create_out_dir(dir)?;
        }
        fs::write(out, &artifact).with_context(|| format!("writing {}", out.display()))?;
        let manifest_dir = dir.unwrap_or(Path::new("."));
        write_manifest(
            manifest_dir,
            &RunManifest {
                command: invocation.to_string(),
                config: serde_json::json!({
                    "fixture": &args.fixture,
                    "input": &args.input,
                    "n": args.n,
                    "group": args.group.to_string(),
                    "artifact": artifact_name,
                }),
                seed: 0,
                platform_label: "n/a".to_string(),
                started_at,
                finished_at: utc_stamp(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                outputs: vec![out
                    .file_name()
                    .map(|f| f.to_string_lossy().into_owned())
                    .unwrap_or_else(|| out.display().to_string())],
            },
        )?;
    }
    Ok(0)
}

// ───────────────────────── bench-train ─────────────────────────

#[derive(Args, Debug)]
struct BenchTrainArgs {
    /// Directory holding the IDX image/label files (gzip accepted).
    #[arg(long)]
    mnist_dir: PathBuf,
    /// Comma-separated function names, or `all`.
    #[arg(long, default_value = "all", value_parser = parse_function_list)]
    functions: FunctionList,
    /// Validation accuracy that stops training.
    #[arg(long, default_value_t = mnist::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = mnist::DEFAULT_MAX_EPOCHS)]
    max_epochs: usize,
    /// Independent training runs per function.
    #[arg(long, default_value_t = mnist::DEFAULT_RUNS, value_parser = clap::value_parser!(u32).range(1..))]
    runs: u32,
    /// Keep only this many training examples after the validation split.
    #[arg(long)]
    train_limit: Option<usize>,
    /// Examples held out for validation.
    #[arg(long, default_value_t = mnist::DEFAULT_VALIDATION_SIZE)]
    val_size: usize,
    #[arg(long, default_value_t = mnist::DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    #[arg(long, default_value_t = nncore::SGD_DEFAULT_LR)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Network shape; defaults reproduce the digit-classification preset.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    hidden_layers: u64,
    #[arg(long, default_value_t = 1024)]
    hidden_width: usize,
    /// Directory receiving the per-run CSV, summary CSV, and manifest.
    #[arg(long, default_value = "actbench-out")]
    out: PathBuf,
    #[arg(long, env = "ACTBENCH_PLATFORM", default_value = "unspecified")]
    platform: String,
}

/// Resolve `name` or `name.gz` under the data directory.
fn find_idx_file(dir: &Path, name: &str) -> Result<PathBuf> {
    for candidate in [name.to_string(), format!("{name}.gz")] {
        let path = dir.join(&candidate);
        if path.is_file() {
            return Ok(path);
        }
    }
    bail!(
        "neither {name} nor {name}.gz exists in {}",
        dir.display()
    );
}

/// First `keep` examples of the dataset, in file order.
fn truncate_dataset(data: LabeledDataset, keep: usize) -> Result<LabeledDataset> {
    if keep > data.len() {
        bail!(
            "requested {keep} examples but the files hold only {}",
            data.len()
        );
    }
    if keep == data.len() {
        return Ok(data);
    }
    let mut images = Matrix::zeros(keep, data.images.cols());
    for i in 0..keep {
        images.row_mut(i).copy_from_slice(data.images.row(i));
    }
    Ok(LabeledDataset::new(images, data.labels[..keep].to_vec())?)
}

fn cmd_bench_train(args: BenchTrainArgs, invocation: &str) -> Result<i32> {
    let started_at = utc_stamp();
    let images = find_idx_file(&args.mnist_dir, "train-images-idx3-ubyte")?;
    let labels = find_idx_file(&args.mnist_dir, "train-labels-idx1-ubyte")?;
    let mut data = mnist::load_idx(&images, &labels)?;
    if let Some(limit) = args.train_limit {
        data = truncate_dataset(data, limit + args.val_size)?;
    }

    let opts = TrainOptions {
        threshold: args.threshold,
        max_epochs: args.max_epochs,
        runs: args.runs,
        batch_size: args.batch_size,
        learning_rate: args.learning_rate,
        validation_size: args.val_size,
        seed: args.seed,
    };

    let mut results = Vec::new();
    for &function in &args.functions.0 {
        let mut config = NetworkConfig::mnist(function, args.seed);
        config.hidden_layers = args.hidden_layers as usize;
        config.hidden_width = args.hidden_width;
        let result = mnist::train_to_threshold(&config, &data, &opts)?;
        let reached = result.runs.iter().filter(|r| r.reached_target).count();
        println!(
            "{}: {}/{} runs reached {:.2}, mean train time {:.2}s{}",
            function.name(),
            reached,
            result.runs.len(),
            args.threshold,
            result.mean_seconds,
            if result.any_run_failed { " [failed]" } else { "" },
        );
        results.push(result);
    }

    create_out_dir(&args.out)?;
    let runs_path = args.out.join("bench_train_runs.csv");
    let mut runs_file = fs::File::create(&runs_path)
        .with_context(|| format!("creating {}", runs_path.display()))?;
    mnist::write_train_csv(&results, &mut runs_file)?;
    let summary_path = args.out.join("bench_train_summary.csv");
    let mut summary_file = fs::File::create(&summary_path)
        .with_context(|| format!("creating {}", summary_path.display()))?;
    mnist::write_train_summary_csv(&results, &mut summary_file)?;

    write_manifest(
        &args.out,
        &RunManifest {
            command: invocation.to_string(),
            config: serde_json::json!({
                "options": &opts,
                "mnist_dir": &args.mnist_dir,
                "train_limit": args.train_limit,
                "hidden_layers": args.hidden_layers,
                "hidden_width": args.hidden_width,
                "functions": args.functions.0.iter().map(|f| f.name()).collect::<Vec<_>>(),
            }),
            seed: args.seed,
            platform_label: args.platform.clone(),
            started_at,
            finished_at: utc_stamp(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: vec![
                "bench_train_runs.csv".to_string(),
                "bench_train_summary.csv".to_string(),
            ],
        },
    )?;
    Ok(0)
}

// ───────────────────────── costmodel ─────────────────────────

#[derive(Args, Debug)]
struct CostmodelArgs {
    /// Listing files in the `label: mnemonic operands` format; labels share
    /// one namespace so calls may cross files.
    #[arg(required = true)]
    listings: Vec<PathBuf>,
    /// Replace the built-in per-mnemonic costs with a `mnemonic,count` CSV.
    #[arg(long)]
    cost_table: Option<PathBuf>,
}

fn cmd_costmodel(args: CostmodelArgs) -> Result<i32> {
    let table = match &args.cost_table {
        Some(path) => {
            let file =
                fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            CostTable::from_csv(file).with_context(|| format!("reading {}", path.display()))?
        }
        None => CostTable::default_table(),
    };

    let mut ordered: Vec<Listing> = Vec::new();
    for path in &args.listings {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let listings =
            costmodel::parse_listings(&text).with_context(|| format!("{}", path.display()))?;
        for listing in listings {
            if ordered.iter().any(|l| l.label == listing.label) {
                bail!("label {:?} appears in more than one file", listing.label);
            }
            ordered.push(listing);
        }
    }
    let by_label = costmodel::listing_map(ordered.clone());

    let mut totals = Vec::new();
    for listing in &ordered {
        let total = costmodel::micro_op_total(listing, &table, &by_label)?;
        println!("{}: {} micro-ops", listing.label, total);
        totals.push((listing.label.clone(), total));
    }
    for i in 0..totals.len() {
        for j in (i + 1)..totals.len() {
            let (a, ta) = &totals[i];
            let (b, tb) = &totals[j];
            println!("{b} / {a} = {:.2}", *tb as f64 / *ta as f64);
        }
    }
    Ok(0)
}
