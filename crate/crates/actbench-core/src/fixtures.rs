//! Reference data compiled into the library: four mean-time tables
//! (one per benchmark machine) plus the instruction listings and default
//! cost table used by the cost model. Everything lives under `fixtures/`
//! at the repository root and is embedded here so the binaries and tests
//! need no working-directory assumptions.

/// Consumer GPU machine (GTX-1080i).
pub const TABLE1_CSV: &str = include_str!("../../../fixtures/table1.csv");
/// Datacentre GPU machine (Tesla P100).
pub const TABLE2_CSV: &str = include_str!("../../../fixtures/table2.csv");
/// Laptop CPU machine (i5-7360U); its n=8 sweep never finished, so that
/// column is absent.
pub const TABLE3_CSV: &str = include_str!("../../../fixtures/table3.csv");
/// Datacentre CPU machine (Xeon E5-2660).
pub const TABLE4_CSV: &str = include_str!("../../../fixtures/table4.csv");

pub const RELU_LISTING: &str = include_str!("../../../fixtures/listings/relu.lst");
pub const TANH_LISTING: &str = include_str!("../../../fixtures/listings/tanh.lst");
pub const DEFAULT_COST_TABLE_CSV: &str =
    include_str!("../../../fixtures/cost_tables/default.csv");

/// Look up an embedded timing table by its short name, `table1`..`table4`.
pub fn fixture_table(name: &str) -> Option<&'static str> {
    match name {
        "table1" => Some(TABLE1_CSV),
        "table2" => Some(TABLE2_CSV),
        "table3" => Some(TABLE3_CSV),
        "table4" => Some(TABLE4_CSV),
        _ => None,
    }
}

pub const FIXTURE_TABLE_NAMES: [&str; 4] = ["table1", "table2", "table3", "table4"];
