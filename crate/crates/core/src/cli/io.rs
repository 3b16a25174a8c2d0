//! Experiment CSV files and number formatting.
//!
//! Columns: `unit_id`, `w` (0/1), `y`, and `block` for block designs. Rows of
//! a block design are regrouped so that blocks are contiguous, in order of
//! first appearance, which must match the declared block order.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::design::{Assignment, Design};
use crate::error::{Error, Result};
use crate::statistics::ObservedData;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub unit_id: String,
    pub w: u8,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<String>,
}

/// Parsed experiment with unit ids in design order.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub unit_ids: Vec<String>,
    pub data: ObservedData,
}

pub fn read_rows<R: std::io::Read>(reader: R) -> Result<Vec<Row>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for required in ["unit_id", "w", "y"] {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::InvalidData(format!("missing column `{required}`")));
        }
    }
    let rows: Vec<Row> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    if rows.is_empty() {
        return Err(Error::InvalidData("no rows".into()));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.w > 1 {
            return Err(Error::InvalidData(format!("row {}: w must be 0 or 1, got {}", i + 1, r.w)));
        }
        if !r.y.is_finite() {
            return Err(Error::InvalidData(format!("row {}: y is not finite", i + 1)));
        }
    }
    Ok(rows)
}

/// Validates rows against `design` and orders them to match it.
pub fn experiment_from_rows(rows: Vec<Row>, design: &Design) -> Result<Experiment> {
    let has_block = rows.iter().any(|r| r.block.is_some());
    if has_block && rows.iter().any(|r| r.block.is_none()) {
        return Err(Error::InvalidData("block column is partially empty".into()));
    }
    let rows = if design.is_crd() {
        if has_block {
            return Err(Error::InvalidData("block column given for a completely randomized design".into()));
        }
        rows
    } else {
        if !has_block {
            return Err(Error::InvalidData("block design needs a block column".into()));
        }
        let mut labels: Vec<String> = Vec::new();
        for r in &rows {
            let b = r.block.as_ref().unwrap();
            if !labels.contains(b) {
                labels.push(b.clone());
            }
        }
        if labels.len() != design.blocks().len() {
            return Err(Error::InvalidData(format!(
                "file has {} blocks, design {design} has {}",
                labels.len(),
                design.blocks().len()
            )));
        }
        let mut grouped = Vec::with_capacity(rows.len());
        for (label, spec) in labels.iter().zip(design.blocks()) {
            let members: Vec<Row> = rows.iter().filter(|r| r.block.as_ref() == Some(label)).cloned().collect();
            let treated = members.iter().filter(|r| r.w == 1).count();
            if members.len() != spec.size || treated != spec.treated {
                return Err(Error::InvalidData(format!(
                    "block `{label}` has {} units with {treated} treated, design expects {}/{}",
                    members.len(),
                    spec.size,
                    spec.treated
                )));
            }
            grouped.extend(members);
        }
        grouped
    };
    let w = Assignment::new(rows.iter().map(|r| r.w).collect())?;
    let mut data = ObservedData::new(w, rows.iter().map(|r| r.y).collect())?;
    if has_block {
        data = data.with_block_labels(rows.iter().map(|r| r.block.clone().unwrap()).collect())?;
    }
    data.check_design(design)?;
    Ok(Experiment {
        unit_ids: rows.into_iter().map(|r| r.unit_id).collect(),
        data,
    })
}

pub fn load_experiment(path: &Path, design: &Design) -> Result<Experiment> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::InvalidData(format!("cannot open {}: {e}", path.display())))?;
    experiment_from_rows(read_rows(file)?, design)
}

pub fn write_experiment<W: std::io::Write>(writer: W, experiment: &Experiment) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let data = &experiment.data;
    for i in 0..data.n() {
        wtr.serialize(Row {
            unit_id: experiment.unit_ids[i].clone(),
            w: data.w().as_slice()[i],
            y: data.y()[i],
            block: data.block_labels().map(|b| b[i].clone()),
        })?;
    }
    wtr.flush()?;
    Ok(())
}

/// `x` rounded to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

/// JSON number with 12 significant digits; infinities as `"inf"`/`"-inf"`.
pub fn num(x: f64) -> Value {
    if x == f64::INFINITY {
        Value::from("inf")
    } else if x == f64::NEG_INFINITY {
        Value::from("-inf")
    } else if x.is_nan() {
        Value::from("nan")
    } else {
        Value::from(round12(x))
    }
}

/// Text rendering matching [`num`].
pub fn text(x: f64) -> String {
    match num(x) {
        Value::String(s) => s,
        _ => round12(x).to_string(),
    }
}

/// Comma separated numbers; accepts `inf` and `-inf`.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("`{t}` is not a number")))
        })
        .collect()
}
