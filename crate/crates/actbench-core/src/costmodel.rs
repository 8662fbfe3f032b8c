//! A deliberately toy instruction cost model: parse little x86-style
//! listings, look every mnemonic up in a cost table, and tally micro-ops,
//! inlining `call` targets at each call site. Two listings ship with the
//! crate, a bit-twiddling rectifier and an x87 tanh, and the point of the
//! tally is the ratio between them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixtures;

#[derive(Debug, Error)]
pub enum CostModelError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no cost for mnemonic {0:?}")]
    UnknownCost(String),
    #[error("call target {0:?} is not a known listing")]
    MissingSymbol(String),
    #[error("call cycle: {0}")]
    Cycle(String),
    #[error("cost table: {0}")]
    BadTable(String),
}

/// How a mnemonic was classified at parse time. The grey set of
/// single-micro-op instructions and the heavy x87 range-reduction trio are
/// built in; everything else defers to the cost table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostClass {
    OneMicroOp,
    Heavy,
    TableLookup,
}

const ONE_MICRO_OP: [&str; 9] = [
    "xor", "and", "pop", "imul", "fld", "fchs", "fsubr", "fadd", "fdiv",
];
const HEAVY: [&str; 3] = ["fscale", "fprem", "f2xm1"];

fn classify(mnemonic: &str) -> CostClass {
    if ONE_MICRO_OP.contains(&mnemonic) {
        CostClass::OneMicroOp
    } else if HEAVY.contains(&mnemonic) {
        CostClass::Heavy
    } else {
        CostClass::TableLookup
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub mnemonic: String,
    pub operands: Vec<String>,
    pub cost_class: CostClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Listing {
    pub label: String,
    pub instructions: Vec<Instruction>,
}

// ───────────────────────── parsing ─────────────────────────

/// Parse `label: mnemonic operands` text into one listing per label.
/// `;` starts a comment; blank lines separate nothing.
pub fn parse_listings(text: &str) -> Result<Vec<Listing>, CostModelError> {
    let mut listings: Vec<Listing> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split(';').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut rest = body;
        // a leading `name:` token opens a new listing
        if let Some((head, tail)) = body.split_once(':') {
            if !head.contains(char::is_whitespace) {
                if head.is_empty() {
                    return Err(CostModelError::Parse {
                        line,
                        msg: "label has no name".into(),
                    });
                }
                if listings.iter().any(|l| l.label == head) {
                    return Err(CostModelError::Parse {
                        line,
                        msg: format!("duplicate label {head:?}"),
                    });
                }
                listings.push(Listing {
                    label: head.to_string(),
                    instructions: Vec::new(),
                });
                rest = tail.trim();
                if rest.is_empty() {
                    continue;
                }
            }
        }

        let current = listings.last_mut().ok_or(CostModelError::Parse {
            line,
            msg: "instruction before any label".into(),
        })?;
        let mut tokens = rest.split(|c: char| c.is_whitespace() || c == ',');
        let mnemonic = tokens.next().filter(|m| !m.is_empty()).ok_or_else(|| {
            CostModelError::Parse {
                line,
                msg: "no mnemonic on the line".into(),
            }
        })?;
        let mnemonic = mnemonic.to_ascii_lowercase();
        let operands: Vec<String> = tokens
            .filter(|t| !t.is_empty())
            .map(|t| t.to_string())
            .collect();
        current.instructions.push(Instruction {
            cost_class: classify(&mnemonic),
            mnemonic,
            operands,
        });
    }

    if let Some(empty) = listings.iter().find(|l| l.instructions.is_empty()) {
        return Err(CostModelError::Parse {
            line: 0,
            msg: format!("label {:?} has an empty body", empty.label),
        });
    }
    Ok(listings)
}

/// Parse text expected to hold exactly one listing.
pub fn parse_listing(text: &str) -> Result<Listing, CostModelError> {
    let mut listings = parse_listings(text)?;
    match listings.len() {
        0 => Err(CostModelError::Parse {
            line: 0,
            msg: "no listing found".into(),
        }),
        1 => Ok(listings.pop().unwrap()),
        n => Err(CostModelError::Parse {
            line: 0,
            msg: format!("expected one listing, found {n}"),
        }),
    }
}

pub fn listing_map(listings: Vec<Listing>) -> BTreeMap<String, Listing> {
    listings.into_iter().map(|l| (l.label.clone(), l)).collect()
}

// ───────────────────────── cost tables ─────────────────────────

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostTable {
    counts: BTreeMap<String, u32>,
    /// Cost for mnemonics missing from the map, if any.
    fallback: Option<u32>,
}

impl CostTable {
    /// The documented defaults shipped with the crate: the grey set at
    /// one micro-op, the heavy trio at fifteen, small assumed values for
    /// the rest.
    pub fn default_table() -> Self {
        Self::from_csv(fixtures::DEFAULT_COST_TABLE_CSV.as_bytes())
            .expect("the embedded default cost table parses")
    }

    /// Every mnemonic costs `count`.
    pub fn uniform(count: u32) -> Self {
        CostTable {
            counts: BTreeMap::new(),
            fallback: Some(count),
        }
    }

    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<Self, CostModelError> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| CostModelError::BadTable(e.to_string()))?;
        if headers.len() != 2 || &headers[0] != "mnemonic" || &headers[1] != "count" {
            return Err(CostModelError::BadTable(format!(
                "header must be mnemonic,count, found {:?}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut counts = BTreeMap::new();
        for row in rdr.records() {
            let row = row.map_err(|e| CostModelError::BadTable(e.to_string()))?;
            let mnemonic = row[0].to_ascii_lowercase();
            let count: u32 = row[1]
                .parse()
                .ok()
                .filter(|&c| c > 0)
                .ok_or_else(|| {
                    CostModelError::BadTable(format!(
                        "count for {mnemonic:?} must be a positive integer, found {:?}",
                        &row[1]
                    ))
                })?;
            if counts.insert(mnemonic.clone(), count).is_some() {
                return Err(CostModelError::BadTable(format!(
                    "duplicate mnemonic {mnemonic:?}"
                )));
            }
        }
        Ok(CostTable {
            counts,
            fallback: None,
        })
    }

    pub fn cost_of(&self, mnemonic: &str) -> Result<u32, CostModelError> {
        self.counts
            .get(mnemonic)
            .copied()
            .or(self.fallback)
            .ok_or_else(|| CostModelError::UnknownCost(mnemonic.to_string()))
    }
}

// ───────────────────────── tallying ─────────────────────────

/// Sum the per-instruction costs; every `call` additionally inlines its
/// target's total at the call site.
pub fn micro_op_total(
    listing: &Listing,
    table: &CostTable,
    follow_calls: &BTreeMap<String, Listing>,
) -> Result<u64, CostModelError> {
    let mut in_flight = vec![listing.label.clone()];
    total_inner(listing, table, follow_calls, &mut in_flight)
}

fn total_inner(
    listing: &Listing,
    table: &CostTable,
    follow_calls: &BTreeMap<String, Listing>,
    in_flight: &mut Vec<String>,
) -> Result<u64, CostModelError> {
    let mut total = 0u64;
    for inst in &listing.instructions {
        total += table.cost_of(&inst.mnemonic)? as u64;
        if inst.mnemonic == "call" {
            let target = inst
                .operands
                .first()
                .ok_or_else(|| CostModelError::MissingSymbol("<no operand>".into()))?;
            if in_flight.iter().any(|l| l == target) {
                return Err(CostModelError::Cycle(format!(
                    "{} -> {target}",
                    in_flight.join(" -> ")
                )));
            }
            let callee = follow_calls
                .get(target)
                .ok_or_else(|| CostModelError::MissingSymbol(target.clone()))?;
            in_flight.push(target.clone());
            total += total_inner(callee, table, follow_calls, in_flight)?;
            in_flight.pop();
        }
    }
    Ok(total)
}

/// Totals for the two embedded listings under a table, handy for reports:
/// `[(label, total)]` in file order plus the tanh/relu ratio.
pub fn shipped_totals(table: &CostTable) -> Result<(Vec<(String, u64)>, f64), CostModelError> {
    let relu = parse_listing(fixtures::RELU_LISTING)?;
    let mut listings = parse_listings(fixtures::TANH_LISTING)?;
    listings.insert(0, relu);
    let map = listing_map(listings.clone());
    let mut totals = Vec::new();
    for l in &listings {
        totals.push((l.label.clone(), micro_op_total(l, table, &map)?));
    }
    let relu_total = totals[0].1 as f64;
    let tanh_total = totals
        .iter()
        .find(|(l, _)| l == "tanh")
        .map(|(_, t)| *t as f64)
        .unwrap_or(f64::NAN);
    Ok((totals, tanh_total / relu_total))
}
