//! Derived statistics over timing tables: intra-group spread, times
//! relative to the identity function, per-instance curves, and a
//! monospace table renderer whose output parses back losslessly.
//!
//! A [`TimingTable`] is a function-by-exponent grid of mean seconds.
//! Cells may be absent (a sweep that never finished is not a zero), and
//! absence survives every transformation here.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activations::{ActivationKind, FunctionGroup};
use crate::harness::AggregateRow;

pub const MEAN_CSV_HEADER: &str = "function,n,mean_s";
pub const HARNESS_CSV_HEADER: &str = "function,group,platform,device,n,run,elapsed_s,per_instance_s";

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("record {record}: {msg}")]
    BadCell { record: usize, msg: String },
    #[error("no data")]
    NoData,
    #[error("spread undefined: the {group} group has {found} member(s) at n={n}, need at least 2")]
    UndefinedSpread {
        group: FunctionGroup,
        n: u32,
        found: usize,
    },
    #[error("no identity baseline at n={0}")]
    MissingBaseline(u32),
    #[error("table parse: {0}")]
    TableParse(String),
}

// ───────────────────────── the grid ─────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingTable {
    functions: Vec<ActivationKind>,
    exponents: Vec<u32>,
    /// Row-major over functions x exponents; `None` is an absent cell.
    cells: Vec<Option<f64>>,
}

fn canonical_position(f: ActivationKind) -> usize {
    ActivationKind::all().iter().position(|&k| k == f).unwrap()
}

impl TimingTable {
    pub fn new(mut functions: Vec<ActivationKind>, mut exponents: Vec<u32>) -> Self {
        functions.sort_by_key(|&f| canonical_position(f));
        functions.dedup();
        exponents.sort_unstable();
        exponents.dedup();
        let cells = vec![None; functions.len() * exponents.len()];
        TimingTable {
            functions,
            exponents,
            cells,
        }
    }

    pub fn functions(&self) -> &[ActivationKind] {
        &self.functions
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    fn index(&self, f: ActivationKind, n: u32) -> Option<usize> {
        let row = self.functions.iter().position(|&k| k == f)?;
        let col = self.exponents.iter().position(|&e| e == n)?;
        Some(row * self.exponents.len() + col)
    }

    pub fn set(&mut self, f: ActivationKind, n: u32, value: Option<f64>) {
        let idx = self
            .index(f, n)
            .unwrap_or_else(|| panic!("({f}, n={n}) is outside this table's grid"));
        self.cells[idx] = value;
    }

    pub fn get(&self, f: ActivationKind, n: u32) -> Option<f64> {
        self.index(f, n).and_then(|i| self.cells[i])
    }

    /// Present (function, value) pairs of one group down a column.
    fn group_column(&self, group: FunctionGroup, n: u32) -> Vec<(ActivationKind, f64)> {
        self.functions
            .iter()
            .filter(|f| f.group() == group)
            .filter_map(|&f| self.get(f, n).map(|v| (f, v)))
            .collect()
    }

    /// Build from `function,n,mean_s` CSV. An empty mean_s cell is an
    /// absent measurement and stays absent.
    pub fn from_mean_csv<R: Read>(reader: R) -> Result<Self, AnalysisError> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
        check_header(&mut rdr, MEAN_CSV_HEADER)?;

        let mut triples: Vec<(ActivationKind, u32, Option<f64>)> = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let record = i + 2; // header is line 1
            let row = row?;
            if row.len() != 3 {
                return Err(AnalysisError::BadCell {
                    record,
                    msg: format!("expected 3 fields, got {}", row.len()),
                });
            }
            let f = ActivationKind::from_name(&row[0]).map_err(|e| AnalysisError::BadCell {
                record,
                msg: e.to_string(),
            })?;
            let n: u32 = row[1].parse().map_err(|_| AnalysisError::BadCell {
                record,
                msg: format!("bad exponent {:?}", &row[1]),
            })?;
            let mean = match row[2].trim() {
                "" => None,
                s => Some(s.parse::<f64>().map_err(|_| AnalysisError::BadCell {
                    record,
                    msg: format!("bad mean {s:?}"),
                })?),
            };
            if triples.iter().any(|&(tf, tn, _)| tf == f && tn == n) {
                return Err(AnalysisError::BadCell {
                    record,
                    msg: format!("duplicate cell for {f} at n={n}"),
                });
            }
            triples.push((f, n, mean));
        }
        if triples.is_empty() {
            return Err(AnalysisError::NoData);
        }

        let mut table = TimingTable::new(
            triples.iter().map(|t| t.0).collect(),
            triples.iter().map(|t| t.1).collect(),
        );
        for (f, n, mean) in triples {
            table.set(f, n, mean);
        }
        Ok(table)
    }

    /// Build from the harness record CSV by averaging elapsed seconds over
    /// runs. Skip rows (empty elapsed) leave their cell absent.
    pub fn from_harness_csv<R: Read>(reader: R) -> Result<Self, AnalysisError> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
        check_header(&mut rdr, HARNESS_CSV_HEADER)?;

        let mut samples: Vec<(ActivationKind, u32, Vec<f64>)> = Vec::new();
        let mut seen_any = false;
        for (i, row) in rdr.records().enumerate() {
            let record = i + 2;
            let row = row?;
            if row.len() != 8 {
                return Err(AnalysisError::BadCell {
                    record,
                    msg: format!("expected 8 fields, got {}", row.len()),
                });
            }
            let f = ActivationKind::from_name(&row[0]).map_err(|e| AnalysisError::BadCell {
                record,
                msg: e.to_string(),
            })?;
            let n: u32 = row[4].parse().map_err(|_| AnalysisError::BadCell {
                record,
                msg: format!("bad exponent {:?}", &row[4]),
            })?;
            seen_any = true;
            let entry = match samples.iter_mut().find(|(sf, sn, _)| *sf == f && *sn == n) {
                Some(e) => &mut e.2,
                None => {
                    samples.push((f, n, Vec::new()));
                    &mut samples.last_mut().unwrap().2
                }
            };
            match row[6].trim() {
                "" => {} // skip marker, cell stays absent unless runs exist
                s => entry.push(s.parse::<f64>().map_err(|_| AnalysisError::BadCell {
                    record,
                    msg: format!("bad elapsed {s:?}"),
                })?),
            }
        }
        if !seen_any {
            return Err(AnalysisError::NoData);
        }

        let mut table = TimingTable::new(
            samples.iter().map(|t| t.0).collect(),
            samples.iter().map(|t| t.1).collect(),
        );
        for (f, n, xs) in samples {
            let mean = if xs.is_empty() {
                None
            } else {
                let x0 = xs[0];
                Some(x0 + xs.iter().map(|x| x - x0).sum::<f64>() / xs.len() as f64)
            };
            table.set(f, n, mean);
        }
        Ok(table)
    }

    /// Sniff the header and dispatch to the matching parser.
    pub fn from_csv_auto<R: Read>(reader: R) -> Result<Self, AnalysisError> {
        let mut text = String::new();
        let mut reader = reader;
        reader
            .read_to_string(&mut text)
            .map_err(|e| AnalysisError::SchemaMismatch(e.to_string()))?;
        let first = text.lines().next().unwrap_or("").trim();
        if first == MEAN_CSV_HEADER {
            Self::from_mean_csv(text.as_bytes())
        } else if first == HARNESS_CSV_HEADER {
            Self::from_harness_csv(text.as_bytes())
        } else if first.is_empty() {
            Err(AnalysisError::NoData)
        } else {
            Err(AnalysisError::SchemaMismatch(format!(
                "header {first:?} is neither {MEAN_CSV_HEADER:?} nor {HARNESS_CSV_HEADER:?}"
            )))
        }
    }

    pub fn from_aggregates(rows: &[AggregateRow]) -> Result<Self, AnalysisError> {
        if rows.is_empty() {
            return Err(AnalysisError::NoData);
        }
        let mut table = TimingTable::new(
            rows.iter().map(|r| r.function).collect(),
            rows.iter().map(|r| r.size_exponent).collect(),
        );
        for r in rows {
            table.set(r.function, r.size_exponent, Some(r.mean_elapsed_s));
        }
        Ok(table)
    }

    pub fn write_mean_csv<W: Write>(&self, out: W) -> Result<(), AnalysisError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["function", "n", "mean_s"])?;
        for &f in &self.functions {
            for &n in &self.exponents {
                let cell = self.get(f, n).map(format_mean).unwrap_or_default();
                w.write_record([f.name(), &n.to_string(), &cell])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, want: &str) -> Result<(), AnalysisError> {
    let headers = rdr.headers()?.clone();
    let want_cols: Vec<&str> = want.split(',').collect();
    if headers.len() != want_cols.len() {
        return Err(AnalysisError::SchemaMismatch(format!(
            "expected {} columns ({want}), found {}",
            want_cols.len(),
            headers.len()
        )));
    }
    for (i, want_col) in want_cols.iter().enumerate() {
        if &headers[i] != *want_col {
            return Err(AnalysisError::SchemaMismatch(format!(
                "column {} is {:?}, expected {:?}",
                i + 1,
                &headers[i],
                want_col
            )));
        }
    }
    Ok(())
}

// ───────────────────────── statistics ─────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadSummary {
    pub size_exponent: u32,
    pub group: FunctionGroup,
    pub max_mean_s: f64,
    pub min_mean_s: f64,
    /// Slowest over fastest mean, always >= 1.
    pub ratio: f64,
    pub argmax: ActivationKind,
    pub argmin: ActivationKind,
}

/// Spread of one group's mean times down the column at `n`. Ties go to the
/// function that appears first in table row order.
pub fn group_spread(
    table: &TimingTable,
    group: FunctionGroup,
    n: u32,
) -> Result<SpreadSummary, AnalysisError> {
    let members = table.group_column(group, n);
    if members.len() < 2 {
        return Err(AnalysisError::UndefinedSpread {
            group,
            n,
            found: members.len(),
        });
    }
    let (mut argmax, mut max) = members[0];
    let (mut argmin, mut min) = members[0];
    for &(f, v) in &members[1..] {
        if v > max {
            (argmax, max) = (f, v);
        }
        if v < min {
            (argmin, min) = (f, v);
        }
    }
    Ok(SpreadSummary {
        size_exponent: n,
        group,
        max_mean_s: max,
        min_mean_s: min,
        ratio: max / min,
        argmax,
        argmin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityRelativeSummary {
    pub size_exponent: u32,
    /// (function, mean / identity mean) for each present activation.
    pub ratios: Vec<(ActivationKind, f64)>,
    pub mean_ratio: f64,
    pub sd_ratio: f64,
}

/// Activation-group means at `n` divided by the Identity mean. Dropout
/// functions are excluded by construction.
pub fn relative_to_identity(
    table: &TimingTable,
    n: u32,
) -> Result<IdentityRelativeSummary, AnalysisError> {
    let baseline = table
        .get(ActivationKind::Identity, n)
        .filter(|&v| v > 0.0)
        .ok_or(AnalysisError::MissingBaseline(n))?;
    let ratios: Vec<(ActivationKind, f64)> = table
        .group_column(FunctionGroup::Activation, n)
        .into_iter()
        .map(|(f, v)| (f, v / baseline))
        .collect();
    if ratios.is_empty() {
        return Err(AnalysisError::UndefinedSpread {
            group: FunctionGroup::Activation,
            n,
            found: 0,
        });
    }
    let mean = ratios.iter().map(|(_, r)| r).sum::<f64>() / ratios.len() as f64;
    let sd = if ratios.len() < 2 {
        0.0
    } else {
        let ss: f64 = ratios.iter().map(|(_, r)| (r - mean) * (r - mean)).sum();
        (ss / (ratios.len() - 1) as f64).sqrt()
    };
    Ok(IdentityRelativeSummary {
        size_exponent: n,
        ratios,
        mean_ratio: mean,
        sd_ratio: sd,
    })
}

/// Per-function series of (n, mean / 10^n), absent cells preserved.
pub fn per_instance_curve(
    table: &TimingTable,
) -> Vec<(ActivationKind, Vec<(u32, Option<f64>)>)> {
    table
        .functions()
        .iter()
        .map(|&f| {
            let series = table
                .exponents()
                .iter()
                .map(|&n| (n, table.get(f, n).map(|v| v / 10f64.powi(n as i32))))
                .collect();
            (f, series)
        })
        .collect()
}

pub fn write_curve_csv<W: Write>(table: &TimingTable, out: W) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["function", "n", "per_instance_s"])?;
    for (f, series) in per_instance_curve(table) {
        for (n, v) in series {
            let cell = v.map(|v| format!("{v}")).unwrap_or_default();
            w.write_record([f.name(), &n.to_string(), &cell])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_spread_csv<W: Write>(
    summaries: &[SpreadSummary],
    out: W,
) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "group", "ratio", "argmax", "argmin"])?;
    for s in summaries {
        w.write_record([
            &s.size_exponent.to_string(),
            &s.group.to_string(),
            &format!("{}", s.ratio),
            s.argmax.name(),
            s.argmin.name(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

// ───────────────────────── table rendering ─────────────────────────

/// Four significant digits, two-digit signed exponent: `2.532e-03`.
pub fn format_mean(v: f64) -> String {
    let s = format!("{v:.3e}");
    let (mantissa, exp) = s.split_once('e').expect("{:.3e} always has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

const ABSENT_CELL: &str = "-";
const MIN_MARK: char = '*';

/// Render the grid as monospace text: one block per group in row order,
/// the fastest present cell of each group column marked with `*`, absent
/// cells shown as `-`. The output round-trips through
/// [`parse_rendered_table`].
pub fn emit_table(table: &TimingTable) -> String {
    let name_width = table
        .functions()
        .iter()
        .map(|f| f.name().len())
        .chain(["function".len()])
        .max()
        .unwrap()
        + 2;
    let cell_width = "0.000e+00*".len() + 2;

    let mut marked: Vec<(ActivationKind, u32)> = Vec::new();
    for group in [
        FunctionGroup::Activation,
        FunctionGroup::Dropout,
        FunctionGroup::Identity,
    ] {
        for &n in table.exponents() {
            let members = table.group_column(group, n);
            if let Some(&(f, _)) = members.iter().reduce(|best, cand| {
                // strict comparison keeps the first of a tie
                if cand.1 < best.1 {
                    cand
                } else {
                    best
                }
            }) {
                marked.push((f, n));
            }
        }
    }

    let mut out = String::new();
    out.push_str(&format!("{:<name_width$}", "function"));
    for &n in table.exponents() {
        out.push_str(&format!("{:<cell_width$}", format!("n={n}")));
    }
    out.push('\n');

    let mut previous_group: Option<FunctionGroup> = None;
    for &f in table.functions() {
        if previous_group.is_some_and(|g| g != f.group()) {
            out.push('\n');
        }
        previous_group = Some(f.group());
        out.push_str(&format!("{:<name_width$}", f.name()));
        for &n in table.exponents() {
            let cell = match table.get(f, n) {
                Some(v) => {
                    let mut s = format_mean(v);
                    if marked.contains(&(f, n)) {
                        s.push(MIN_MARK);
                    }
                    s
                }
                None => ABSENT_CELL.to_string(),
            };
            out.push_str(&format!("{cell:<cell_width$}"));
        }
        out.push('\n');
    }
    out
}

/// Invert [`emit_table`]: recover functions, exponents, cell values, and
/// absences. Minimum marks are layout, not data, and are dropped.
pub fn parse_rendered_table(text: &str) -> Result<TimingTable, AnalysisError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or(AnalysisError::NoData)?;
    let mut cols = header.split_whitespace();
    if cols.next() != Some("function") {
        return Err(AnalysisError::TableParse(
            "header must start with 'function'".into(),
        ));
    }
    let mut exponents = Vec::new();
    for col in cols {
        let n = col
            .strip_prefix("n=")
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| AnalysisError::TableParse(format!("bad column header {col:?}")))?;
        exponents.push(n);
    }
    if exponents.is_empty() {
        return Err(AnalysisError::TableParse("no exponent columns".into()));
    }

    let mut rows: Vec<(ActivationKind, Vec<Option<f64>>)> = Vec::new();
    for line in lines {
        let mut fields = line.split_whitespace();
        let name = fields
            .next()
            .ok_or_else(|| AnalysisError::TableParse("empty row".into()))?;
        let f = ActivationKind::from_name(name)
            .map_err(|e| AnalysisError::TableParse(e.to_string()))?;
        let mut cells = Vec::new();
        for field in fields {
            let cleaned = field.trim_end_matches(MIN_MARK);
            if cleaned == ABSENT_CELL {
                cells.push(None);
            } else {
                let v = cleaned.parse::<f64>().map_err(|_| {
                    AnalysisError::TableParse(format!("bad cell {field:?} for {name}"))
                })?;
                cells.push(Some(v));
            }
        }
        if cells.len() != exponents.len() {
            return Err(AnalysisError::TableParse(format!(
                "{name} row has {} cells for {} columns",
                cells.len(),
                exponents.len()
            )));
        }
        rows.push((f, cells));
    }
    if rows.is_empty() {
        return Err(AnalysisError::NoData);
    }

    let mut table = TimingTable::new(rows.iter().map(|r| r.0).collect(), exponents.clone());
    for (f, cells) in rows {
        for (&n, cell) in exponents.iter().zip(cells) {
            table.set(f, n, cell);
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn fixture(name: &str) -> TimingTable {
        TimingTable::from_mean_csv(fixtures::fixture_table(name).unwrap().as_bytes()).unwrap()
    }

    #[test]
    fn fixture_tables_have_the_full_grid() {
        for name in fixtures::FIXTURE_TABLE_NAMES {
            let t = fixture(name);
            assert_eq!(t.functions().len(), 26, "{name}");
            assert_eq!(t.exponents(), &[0, 1, 2, 3, 4, 5, 6, 7, 8], "{name}");
        }
    }

    #[test]
    fn laptop_table_stores_the_unfinished_column_as_absent() {
        let t = fixture("table3");
        for &f in t.functions() {
            assert_eq!(t.get(f, 8), None, "{f}");
            assert!(t.get(f, 7).is_some(), "{f}");
        }
    }

    #[test]
    fn consumer_gpu_spread_at_n4_is_a_factor_of_eleven() {
        let s = group_spread(&fixture("table1"), FunctionGroup::Activation, 4).unwrap();
        assert_eq!(s.argmax, ActivationKind::RReLU);
        assert_eq!(s.argmin, ActivationKind::GELU);
        assert_eq!(s.max_mean_s, 2.532e-3);
        assert_eq!(s.min_mean_s, 2.322e-4);
        assert_eq!(s.ratio, 2.532e-3 / 2.322e-4);
        assert!((s.ratio - 10.90).abs() < 0.01, "{}", s.ratio);
    }

    #[test]
    fn datacentre_gpu_spread_at_n5_is_a_factor_of_seven() {
        let s = group_spread(&fixture("table2"), FunctionGroup::Activation, 5).unwrap();
        assert_eq!(s.argmax, ActivationKind::Softsign);
        assert_eq!(s.argmin, ActivationKind::Softshrink);
        assert!((s.ratio - 6.90).abs() < 0.01, "{}", s.ratio);
    }

    #[test]
    fn datacentre_cpu_spread_at_n8_is_roughly_two() {
        let s = group_spread(&fixture("table4"), FunctionGroup::Activation, 8).unwrap();
        assert_eq!(s.argmax, ActivationKind::Softsign);
        assert!((s.ratio - 2.12).abs() < 0.01, "{}", s.ratio);
    }

    #[test]
    fn spread_needs_two_members() {
        let mut t = TimingTable::new(vec![ActivationKind::Identity], vec![0]);
        t.set(ActivationKind::Identity, 0, Some(1.0));
        assert!(matches!(
            group_spread(&t, FunctionGroup::Identity, 0),
            Err(AnalysisError::UndefinedSpread { found: 1, .. })
        ));
        assert!(matches!(
            group_spread(&t, FunctionGroup::Dropout, 0),
            Err(AnalysisError::UndefinedSpread { found: 0, .. })
        ));
    }

    #[test]
    fn two_identical_members_give_ratio_one_and_tie_to_first() {
        let mut t = TimingTable::new(
            vec![ActivationKind::Dropout, ActivationKind::AlphaDropout],
            vec![2],
        );
        t.set(ActivationKind::Dropout, 2, Some(3.5e-4));
        t.set(ActivationKind::AlphaDropout, 2, Some(3.5e-4));
        let s = group_spread(&t, FunctionGroup::Dropout, 2).unwrap();
        assert_eq!(s.ratio, 1.0);
        // AlphaDropout precedes Dropout in table row order
        assert_eq!(s.argmax, ActivationKind::AlphaDropout);
        assert_eq!(s.argmin, ActivationKind::AlphaDropout);
    }

    #[test]
    fn softsign_runs_four_and_a_half_times_identity_on_the_datacentre_cpu() {
        let summary = relative_to_identity(&fixture("table4"), 8).unwrap();
        let softsign = summary
            .ratios
            .iter()
            .find(|(f, _)| *f == ActivationKind::Softsign)
            .unwrap()
            .1;
        assert!((softsign - 4.56).abs() < 0.01, "{softsign}");
        assert_eq!(summary.ratios.len(), 21);
    }

    #[test]
    fn all_equal_means_give_identity_ratio_one_with_zero_sd() {
        let mut t = TimingTable::new(ActivationKind::all().to_vec(), vec![3]);
        for &f in ActivationKind::all() {
            t.set(f, 3, Some(2.0e-4));
        }
        let summary = relative_to_identity(&t, 3).unwrap();
        assert_eq!(summary.mean_ratio, 1.0);
        assert_eq!(summary.sd_ratio, 0.0);
    }

    #[test]
    fn missing_identity_is_a_baseline_error() {
        let mut t = TimingTable::new(vec![ActivationKind::ReLU, ActivationKind::Tanh], vec![1]);
        t.set(ActivationKind::ReLU, 1, Some(1.0));
        t.set(ActivationKind::Tanh, 1, Some(2.0));
        assert!(matches!(
            relative_to_identity(&t, 1),
            Err(AnalysisError::MissingBaseline(1))
        ));
    }

    #[test]
    fn identity_per_instance_at_n1_divides_by_ten() {
        let curve = per_instance_curve(&fixture("table2"));
        let (_, series) = curve
            .iter()
            .find(|(f, _)| *f == ActivationKind::Identity)
            .unwrap();
        let at_n1 = series.iter().find(|(n, _)| *n == 1).unwrap().1.unwrap();
        assert_eq!(at_n1, 8.792e-5 / 10.0);
    }

    #[test]
    fn unfinished_cells_stay_absent_in_the_curve() {
        let curve = per_instance_curve(&fixture("table3"));
        for (f, series) in curve {
            assert_eq!(series.iter().find(|(n, _)| *n == 8).unwrap().1, None, "{f}");
        }
    }

    #[test]
    fn constant_elapsed_time_makes_a_strictly_decreasing_curve() {
        let mut t = TimingTable::new(vec![ActivationKind::ReLU], vec![0, 1, 2, 3]);
        for n in 0..=3 {
            t.set(ActivationKind::ReLU, n, Some(0.5));
        }
        let curve = per_instance_curve(&t);
        let values: Vec<f64> = curve[0].1.iter().map(|(_, v)| v.unwrap()).collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    }

    #[test]
    fn per_instance_times_reconstruct_the_means() {
        let t = fixture("table1");
        for (f, series) in per_instance_curve(&t) {
            for (n, v) in series {
                let mean = t.get(f, n).unwrap();
                let back = v.unwrap() * 10f64.powi(n as i32);
                assert!((back - mean).abs() <= mean.abs() * f64::EPSILON, "{f} n={n}");
            }
        }
    }

    #[test]
    fn every_fixture_round_trips_through_the_rendered_table() {
        for name in fixtures::FIXTURE_TABLE_NAMES {
            let t = fixture(name);
            let rendered = emit_table(&t);
            let back = parse_rendered_table(&rendered).unwrap();
            assert_eq!(back.functions(), t.functions(), "{name}");
            assert_eq!(back.exponents(), t.exponents(), "{name}");
            for &f in t.functions() {
                for &n in t.exponents() {
                    assert_eq!(back.get(f, n), t.get(f, n), "{name} {f} n={n}");
                }
            }
        }
    }

    #[test]
    fn rendered_table_marks_group_minima_with_ties_to_the_first_row() {
        let mut t = TimingTable::new(
            vec![
                ActivationKind::ReLU,
                ActivationKind::Tanh,
                ActivationKind::Dropout,
            ],
            vec![0],
        );
        t.set(ActivationKind::ReLU, 0, Some(1.0e-3));
        t.set(ActivationKind::Tanh, 0, Some(1.0e-3));
        t.set(ActivationKind::Dropout, 0, Some(5.0e-4));
        let rendered = emit_table(&t);
        let starred: Vec<&str> = rendered
            .lines()
            .filter(|l| l.contains(MIN_MARK))
            .map(|l| l.split_whitespace().next().unwrap())
            .collect();
        // ReLU wins its tie with Tanh by row order; Dropout is alone in
        // its group and is its own minimum
        assert_eq!(starred, vec!["ReLU", "Dropout"]);
    }

    #[test]
    fn one_by_one_grid_is_its_own_minimum() {
        let mut t = TimingTable::new(vec![ActivationKind::GELU], vec![4]);
        t.set(ActivationKind::GELU, 4, Some(2.322e-4));
        let rendered = emit_table(&t);
        assert!(rendered.contains("2.322e-04*"), "{rendered}");
        let back = parse_rendered_table(&rendered).unwrap();
        assert_eq!(back.get(ActivationKind::GELU, 4), Some(2.322e-4));
    }

    #[test]
    fn rendered_absences_come_back_absent() {
        let mut t = TimingTable::new(
            vec![ActivationKind::ReLU, ActivationKind::Identity],
            vec![0, 1],
        );
        t.set(ActivationKind::ReLU, 0, Some(1.0e-4));
        t.set(ActivationKind::Identity, 0, Some(9.0e-5));
        t.set(ActivationKind::Identity, 1, Some(8.0e-5));
        let rendered = emit_table(&t);
        let back = parse_rendered_table(&rendered).unwrap();
        assert_eq!(back.get(ActivationKind::ReLU, 1), None);
        assert_eq!(back.get(ActivationKind::Identity, 1), Some(8.0e-5));
    }

    #[test]
    fn format_mean_pins_the_cell_syntax() {
        assert_eq!(format_mean(2.532e-3), "2.532e-03");
        assert_eq!(format_mean(8.792e-5), "8.792e-05");
        assert_eq!(format_mean(1.089e3), "1.089e+03");
        assert_eq!(format_mean(2.387e2), "2.387e+02");
        assert_eq!(format_mean(1.0), "1.000e+00");
    }

    #[test]
    fn harness_csv_round_trips_into_a_mean_table() {
        let csv_text = "\
function,group,platform,device,n,run,elapsed_s,per_instance_s
ReLU,activation,t,cpu,0,0,1,1
ReLU,activation,t,cpu,0,1,2,2
ReLU,activation,t,cpu,0,2,3,3
ReLU,activation,,,1,0,,
";
        let t = TimingTable::from_harness_csv(csv_text.as_bytes()).unwrap();
        assert_eq!(t.get(ActivationKind::ReLU, 0), Some(2.0));
        assert_eq!(t.get(ActivationKind::ReLU, 1), None);
    }

    #[test]
    fn auto_parser_dispatches_on_the_header() {
        let mean = "function,n,mean_s\nReLU,0,1.5e-4\n";
        let t = TimingTable::from_csv_auto(mean.as_bytes()).unwrap();
        assert_eq!(t.get(ActivationKind::ReLU, 0), Some(1.5e-4));

        let err = TimingTable::from_csv_auto("a,b,c\n1,2,3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, AnalysisError::SchemaMismatch(_)), "{err}");

        let empty = TimingTable::from_csv_auto("".as_bytes()).unwrap_err();
        assert!(matches!(empty, AnalysisError::NoData));
    }

    #[test]
    fn bad_cells_report_their_record() {
        let text = "function,n,mean_s\nReLU,0,1.0e-4\nNopeFn,1,2.0e-4\n";
        let err = TimingTable::from_mean_csv(text.as_bytes()).unwrap_err();
        match err {
            AnalysisError::BadCell { record, .. } => assert_eq!(record, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_cells_are_rejected() {
        let text = "function,n,mean_s\nReLU,0,1.0e-4\nReLU,0,2.0e-4\n";
        assert!(TimingTable::from_mean_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn mean_csv_write_read_is_lossless() {
        let t = fixture("table3");
        let mut buf = Vec::new();
        t.write_mean_csv(&mut buf).unwrap();
        let back = TimingTable::from_mean_csv(buf.as_slice()).unwrap();
        for &f in t.functions() {
            for &n in t.exponents() {
                assert_eq!(back.get(f, n), t.get(f, n));
            }
        }
    }

    #[test]
    fn spread_csv_has_the_documented_columns() {
        let s = group_spread(&fixture("table1"), FunctionGroup::Activation, 4).unwrap();
        let mut buf = Vec::new();
        write_spread_csv(&[s], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "n,group,ratio,argmax,argmin");
        let row = lines.next().unwrap();
        assert!(row.starts_with("4,activation,"), "{row}");
        assert!(row.ends_with("RReLU,GELU"), "{row}");
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn spread_is_invariant_under_uniform_scaling(c in 1e-3f64..1e3) {
                let t = fixture("table1");
                let mut scaled = t.clone();
                for &f in t.functions() {
                    for &n in t.exponents() {
                        scaled.set(f, n, t.get(f, n).map(|v| v * c));
                    }
                }
                let a = group_spread(&t, FunctionGroup::Activation, 4).unwrap();
                let b = group_spread(&scaled, FunctionGroup::Activation, 4).unwrap();
                prop_assert_eq!(a.argmax, b.argmax);
                prop_assert_eq!(a.argmin, b.argmin);
                prop_assert!((a.ratio - b.ratio).abs() <= a.ratio * 1e-12);
                prop_assert!(b.ratio >= 1.0);
            }

            #[test]
            fn identity_relative_ratios_are_scale_free(c in 1e-3f64..1e3) {
                let t = fixture("table4");
                let mut scaled = t.clone();
                for &f in t.functions() {
                    for &n in t.exponents() {
                        scaled.set(f, n, t.get(f, n).map(|v| v * c));
                    }
                }
                let a = relative_to_identity(&t, 8).unwrap();
                let b = relative_to_identity(&scaled, 8).unwrap();
                for ((fa, ra), (fb, rb)) in a.ratios.iter().zip(&b.ratios) {
                    prop_assert_eq!(fa, fb);
                    prop_assert!((ra - rb).abs() <= ra.abs() * 1e-12);
                }
            }
        }
    }
}
