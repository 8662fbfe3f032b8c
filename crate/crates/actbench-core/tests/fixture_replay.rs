//! End-to-end check of the timing pipeline's bookkeeping: drive the bench
//! harness with a scripted clock whose readings are taken from a published
//! reference table, then confirm the aggregated means reproduce that table
//! bit for bit. Any stray clock read, reordered loop, or lossy aggregation
//! step would break the replay.

use actbench_core::analysis::TimingTable;
use actbench_core::clock::ScriptedClock;
use actbench_core::fixtures;
use actbench_core::harness::{self, BenchPlan};
use actbench_core::nncore::NetworkConfig;
use actbench_core::ActivationKind;

const EXPONENTS: [u32; 3] = [0, 1, 2];

fn tiny_config() -> NetworkConfig {
    NetworkConfig {
        input_dim: 4,
        hidden_layers: 1,
        hidden_width: 4,
        output_dim: 2,
        hidden_activation: ActivationKind::Identity,
        output_activation: None,
        seed: 0,
    }
}

/// One plan-start read, then (t0 = 0, t1 = reference mean) per timed run,
/// in the exact order the harness visits (function, exponent, run) triples.
fn scripted_readings(reference: &TimingTable, plan: &BenchPlan) -> Vec<f64> {
    let mut readings = vec![0.0];
    for &f in &plan.functions {
        for &n in &plan.exponents {
            let mean = reference
                .get(f, n)
                .unwrap_or_else(|| panic!("reference table lacks {} at n={n}", f.name()));
            for _ in 0..plan.runs {
                readings.push(0.0);
                readings.push(mean);
            }
        }
    }
    readings
}

#[test]
fn scripted_replay_reproduces_the_reference_table_bit_for_bit() {
    let reference = TimingTable::from_mean_csv(fixtures::TABLE1_CSV.as_bytes()).unwrap();
    let plan = BenchPlan::new(ActivationKind::all().to_vec(), EXPONENTS.to_vec());

    let mut clock = ScriptedClock::new(scripted_readings(&reference, &plan));
    let outcome =
        harness::run_inference_bench_with_clock(&plan, &tiny_config(), &mut clock).unwrap();

    assert_eq!(clock.remaining(), 0, "harness read the clock off-schedule");
    assert!(outcome.skips.is_empty());
    assert_eq!(outcome.records.len(), 26 * EXPONENTS.len() * 3);

    let replayed = TimingTable::from_aggregates(&harness::aggregate(&outcome.records)).unwrap();
    assert_eq!(replayed.exponents(), &EXPONENTS);
    for &f in replayed.functions() {
        for &n in replayed.exponents() {
            assert_eq!(
                replayed.get(f, n),
                reference.get(f, n),
                "{} at n={n} drifted through the pipeline",
                f.name()
            );
        }
    }
}

#[test]
fn record_csv_round_trip_matches_direct_aggregation() {
    let reference = TimingTable::from_mean_csv(fixtures::TABLE1_CSV.as_bytes()).unwrap();
    let plan = BenchPlan::new(ActivationKind::all().to_vec(), EXPONENTS.to_vec());

    let mut clock = ScriptedClock::new(scripted_readings(&reference, &plan));
    let outcome =
        harness::run_inference_bench_with_clock(&plan, &tiny_config(), &mut clock).unwrap();

    let mut csv_bytes = Vec::new();
    harness::write_records_csv(&outcome, &mut csv_bytes).unwrap();

    let via_csv = TimingTable::from_harness_csv(csv_bytes.as_slice()).unwrap();
    let direct = TimingTable::from_aggregates(&harness::aggregate(&outcome.records)).unwrap();
    assert_eq!(via_csv.functions(), direct.functions());
    assert_eq!(via_csv.exponents(), direct.exponents());
    for &f in direct.functions() {
        for &n in direct.exponents() {
            assert_eq!(via_csv.get(f, n), direct.get(f, n));
        }
    }
}
