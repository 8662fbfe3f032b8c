//! The timing protocol: for each requested activation and workload size,
//! build the network, run one untimed warm-up forward pass, then time a
//! fixed number of forward passes over the pre-generated workload.
//!
//! Clock discipline is part of the contract and tests rely on it: one read
//! when the plan starts, then exactly two reads (start, stop) per timed
//! run. Warm-up passes and budget checks read nothing; budget checks reuse
//! the latest stop reading. This is what makes scripted-clock replay
//! reproduce aggregation bit for bit.

use std::io::Write;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activations::{ActivationKind, EvalMode, FunctionGroup};
use crate::clock::{Clock, SystemClock};
use crate::matrix::Matrix;
use crate::nncore::{self, DenseNetwork, NetError, NetworkConfig};
use crate::workload::{self, Workload, MAX_EXPONENT};

/// One day, the completion limit the benchmark machines ran under.
pub const DEFAULT_TIME_BUDGET_SECONDS: f64 = 86_400.0;
pub const DEFAULT_RUNS: u32 = 3;

/// At most one measured section may be in flight per process; both the
/// inference sweep and the training experiment hold this while timing.
static MEASUREMENT_GATE: Mutex<()> = Mutex::new(());

pub(crate) fn lock_measurement() -> std::sync::MutexGuard<'static, ()> {
    MEASUREMENT_GATE.lock().unwrap_or_else(|p| p.into_inner())
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid bench plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchPlan {
    pub functions: Vec<ActivationKind>,
    pub exponents: Vec<u32>,
    pub runs: u32,
    pub time_budget_seconds: f64,
    /// Warm-up training updates against random data before any timing.
    pub pretrain_epochs: usize,
    pub seed: u64,
    pub platform_label: String,
    pub device: String,
    /// Cap on rows per forward pass for memory-tight hosts; the timed
    /// section then loops over the row chunks.
    pub batch_limit: Option<usize>,
}

impl BenchPlan {
    pub fn new(functions: Vec<ActivationKind>, exponents: Vec<u32>) -> Self {
        BenchPlan {
            functions,
            exponents,
            runs: DEFAULT_RUNS,
            time_budget_seconds: DEFAULT_TIME_BUDGET_SECONDS,
            pretrain_epochs: 0,
            seed: 0,
            platform_label: "unspecified".to_string(),
            device: "cpu".to_string(),
            batch_limit: None,
        }
    }

    /// Deduplicated functions (input order) and sorted deduplicated
    /// exponents, after validation.
    fn normalized(&self) -> Result<(Vec<ActivationKind>, Vec<u32>), HarnessError> {
        if self.functions.is_empty() {
            return Err(HarnessError::InvalidPlan("no functions requested".into()));
        }
        if self.exponents.is_empty() {
            return Err(HarnessError::InvalidPlan("no size exponents requested".into()));
        }
        if self.runs < 1 {
            return Err(HarnessError::InvalidPlan("runs must be at least 1".into()));
        }
        if !(self.time_budget_seconds > 0.0) {
            return Err(HarnessError::InvalidPlan("time budget must be positive".into()));
        }
        if let Some(&bad) = self.exponents.iter().find(|&&n| n > MAX_EXPONENT) {
            return Err(HarnessError::InvalidPlan(format!(
                "size exponent {bad} is outside 0..={MAX_EXPONENT}"
            )));
        }
        if let Some(limit) = self.batch_limit {
            if limit == 0 {
                return Err(HarnessError::InvalidPlan("batch limit must be positive".into()));
            }
        }
        let mut functions = Vec::new();
        for &f in &self.functions {
            if !functions.contains(&f) {
                functions.push(f);
            }
        }
        let mut exponents = self.exponents.clone();
        exponents.sort_unstable();
        exponents.dedup();
        Ok((functions, exponents))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingRecord {
    pub function: ActivationKind,
    pub platform_label: String,
    pub device: String,
    pub size_exponent: u32,
    pub run_index: u32,
    pub elapsed_seconds: f64,
    pub per_instance_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkipReason {
    BudgetExpired,
    Allocation(String),
}

impl std::fmt::Display for SkipReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SkipReason::BudgetExpired => write!(f, "time budget expired"),
            SkipReason::Allocation(msg) => write!(f, "allocation: {msg}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkipMarker {
    pub function: ActivationKind,
    pub size_exponent: u32,
    pub run_index: u32,
    pub reason: SkipReason,
}

/// Every (function, exponent, run) triple of the plan lands in exactly one
/// of the two lists; there are no silent gaps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchOutcome {
    pub records: Vec<TimingRecord>,
    pub skips: Vec<SkipMarker>,
}

pub fn run_inference_bench(
    plan: &BenchPlan,
    config: &NetworkConfig,
) -> Result<BenchOutcome, HarnessError> {
    let mut clock = SystemClock::new();
    run_inference_bench_with_clock(plan, config, &mut clock)
}

fn split_rows(m: Matrix, limit: Option<usize>) -> Vec<Matrix> {
    let limit = match limit {
        Some(l) if l < m.rows() => l,
        _ => return vec![m],
    };
    let mut out = Vec::with_capacity(m.rows().div_ceil(limit));
    let mut start = 0;
    while start < m.rows() {
        let end = (start + limit).min(m.rows());
        let mut chunk = Matrix::zeros(end - start, m.cols());
        for (i, row) in (start..end).enumerate() {
            chunk.row_mut(i).copy_from_slice(m.row(row));
        }
        out.push(chunk);
        start = end;
    }
    out
}

pub fn run_inference_bench_with_clock(
    plan: &BenchPlan,
    config: &NetworkConfig,
    clock: &mut dyn Clock,
) -> Result<BenchOutcome, HarnessError> {
    use rand::SeedableRng;
    let (functions, exponents) = plan.normalized()?;
    let _exclusive = lock_measurement();

    let mut records = Vec::new();
    let mut skips = Vec::new();
    let plan_start = clock.now();
    let mut last_reading = plan_start;

    for (f_idx, &function) in functions.iter().enumerate() {
        // model construction and warm-up training happen off the clock
        let mut net_config = config.clone();
        net_config.hidden_activation = function;
        net_config.seed = plan.seed;
        let mut net = nncore::init_network(&net_config)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(
            plan.seed ^ (f_idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        if plan.pretrain_epochs > 0 {
            nncore::pretrain_random(&mut net, plan.pretrain_epochs, &mut rng)?;
        }

        let mut expired = false;
        for &n in &exponents {
            if expired || last_reading - plan_start > plan.time_budget_seconds {
                expired = true;
                for run in 0..plan.runs {
                    skips.push(SkipMarker {
                        function,
                        size_exponent: n,
                        run_index: run,
                        reason: SkipReason::BudgetExpired,
                    });
                }
                continue;
            }

            let w = Workload {
                size_exponent: n,
                input_dim: net_config.input_dim,
                seed: plan.seed,
            };
            let batches = match workload::generate(&w) {
                Ok(m) => split_rows(m, plan.batch_limit),
                Err(e) => {
                    for run in 0..plan.runs {
                        skips.push(SkipMarker {
                            function,
                            size_exponent: n,
                            run_index: run,
                            reason: SkipReason::Allocation(e.to_string()),
                        });
                    }
                    continue;
                }
            };

            // one untimed warm-up pass, no clock reads
            for batch in &batches {
                std::hint::black_box(forward_pass(&net, batch, &mut rng)?);
            }

            let instances = 10f64.powi(n as i32);
            for run in 0..plan.runs {
                if last_reading - plan_start > plan.time_budget_seconds {
                    expired = true;
                    skips.push(SkipMarker {
                        function,
                        size_exponent: n,
                        run_index: run,
                        reason: SkipReason::BudgetExpired,
                    });
                    continue;
                }
                let t0 = clock.now();
                for batch in &batches {
                    std::hint::black_box(forward_pass(&net, batch, &mut rng)?);
                }
                let t1 = clock.now();
                last_reading = t1;
                let elapsed = t1 - t0;
                records.push(TimingRecord {
                    function,
                    platform_label: plan.platform_label.clone(),
                    device: plan.device.clone(),
                    size_exponent: n,
                    run_index: run,
                    elapsed_seconds: elapsed,
                    per_instance_seconds: elapsed / instances,
                });
            }
        }
    }

    Ok(BenchOutcome { records, skips })
}

fn forward_pass(
    net: &DenseNetwork,
    batch: &Matrix,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Matrix, NetError> {
    // inference runs in eval mode: dropout layers pass through
    nncore::forward(net, batch, EvalMode::Eval, rng)
}

// ───────────────────────── aggregation ─────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateRow {
    pub function: ActivationKind,
    pub size_exponent: u32,
    pub runs: u32,
    pub mean_elapsed_s: f64,
    pub sd_elapsed_s: f64,
    pub mean_per_instance_s: f64,
    pub sd_per_instance_s: f64,
}

/// Mean with the first value as the shift origin, so aggregating runs
/// that all read the same value returns that value bit for bit.
fn shifted_mean(xs: &[f64]) -> f64 {
    let x0 = xs[0];
    x0 + xs.iter().map(|x| x - x0).sum::<f64>() / xs.len() as f64
}

fn sample_sd(xs: &[f64], mean: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Per-(function, exponent) means and sample standard deviations, in
/// canonical function order then ascending exponent.
pub fn aggregate(records: &[TimingRecord]) -> Vec<AggregateRow> {
    let mut keys: Vec<(ActivationKind, u32)> = Vec::new();
    for r in records {
        let key = (r.function, r.size_exponent);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let order: Vec<ActivationKind> = ActivationKind::all().to_vec();
    keys.sort_by_key(|(f, n)| (order.iter().position(|k| k == f).unwrap_or(usize::MAX), *n));

    keys.into_iter()
        .map(|(function, n)| {
            let elapsed: Vec<f64> = records
                .iter()
                .filter(|r| r.function == function && r.size_exponent == n)
                .map(|r| r.elapsed_seconds)
                .collect();
            let per_instance: Vec<f64> = records
                .iter()
                .filter(|r| r.function == function && r.size_exponent == n)
                .map(|r| r.per_instance_seconds)
                .collect();
            let mean_elapsed = shifted_mean(&elapsed);
            let mean_per_instance = shifted_mean(&per_instance);
            AggregateRow {
                function,
                size_exponent: n,
                runs: elapsed.len() as u32,
                mean_elapsed_s: mean_elapsed,
                sd_elapsed_s: sample_sd(&elapsed, mean_elapsed),
                mean_per_instance_s: mean_per_instance,
                sd_per_instance_s: sample_sd(&per_instance, mean_per_instance),
            }
        })
        .collect()
}

// ───────────────────────── emission ─────────────────────────

fn table_index(f: ActivationKind) -> usize {
    ActivationKind::all().iter().position(|&k| k == f).unwrap()
}

/// Records and skips merged into one CSV; skipped triples keep their row
/// with the numeric cells left empty.
pub fn write_records_csv<W: Write>(outcome: &BenchOutcome, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["function", "group", "platform", "device", "n", "run", "elapsed_s", "per_instance_s"])?;

    enum Row<'a> {
        Rec(&'a TimingRecord),
        Skip(&'a SkipMarker),
    }
    let mut rows: Vec<Row> = outcome.records.iter().map(Row::Rec).collect();
    rows.extend(outcome.skips.iter().map(Row::Skip));
    rows.sort_by_key(|r| match r {
        Row::Rec(r) => (table_index(r.function), r.size_exponent, r.run_index),
        Row::Skip(s) => (table_index(s.function), s.size_exponent, s.run_index),
    });

    for row in rows {
        match row {
            Row::Rec(r) => w.write_record([
                r.function.name(),
                &group_name(r.function.group()),
                &r.platform_label,
                &r.device,
                &r.size_exponent.to_string(),
                &r.run_index.to_string(),
                &format!("{}", r.elapsed_seconds),
                &format!("{}", r.per_instance_seconds),
            ])?,
            Row::Skip(s) => w.write_record([
                s.function.name(),
                &group_name(s.function.group()),
                "",
                "",
                &s.size_exponent.to_string(),
                &s.run_index.to_string(),
                "",
                "",
            ])?,
        }
    }
    w.flush()?;
    Ok(())
}

fn group_name(g: FunctionGroup) -> String {
    g.to_string()
}
