//! Loading datasets from CSV or JSON files.
//!
//! Both formats carry one record per study with the columns of the chosen
//! [`Measure`] plus an optional `label`. CSV files are comma separated with a
//! header row; JSON files hold an array of objects, or an object with a
//! `studies` array.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::effect::{
    fisher_z, log_odds, log_or, log_ratio_from_ci, mean_difference, smd_hedges_g, ContinuityCorrection,
    CorrelationCount, EffectEstimate, Measure, ProportionCount, RatioWithCi, TwoByTwoTable, TwoGroupContinuous,
};
use crate::engine::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// `.json` files are JSON, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::input(format!("unknown format '{s}'; use csv or json"))),
        }
    }
}

/// One input record: cell text by column name.
struct Record {
    row: usize,
    cells: HashMap<String, String>,
}

impl Record {
    fn text(&self, col: &str) -> Option<&str> {
        self.cells.get(col).map(|s| s.trim()).filter(|s| !s.is_empty())
    }

    fn num(&self, col: &str) -> Result<f64> {
        let t = self
            .text(col)
            .ok_or_else(|| Error::input(format!("row {}: column '{col}' is empty", self.row)))?;
        t.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::input(format!("row {}: column '{col}': '{t}' is not a number", self.row)))
    }

    fn opt_num(&self, col: &str) -> Result<Option<f64>> {
        match self.text(col) {
            None => Ok(None),
            Some(_) => self.num(col).map(Some),
        }
    }
}

/// Derives `(y, σ, n)` for one record.
fn derive(rec: &Record, measure: Measure, cc: ContinuityCorrection) -> Result<(f64, f64, Option<f64>)> {
    let two_group = || -> Result<TwoGroupContinuous> {
        Ok(TwoGroupContinuous {
            mean1: rec.num("mean1")?,
            sd1: rec.num("sd1")?,
            n1: rec.num("n1")?,
            mean2: rec.num("mean2")?,
            sd2: rec.num("sd2")?,
            n2: rec.num("n2")?,
        })
    };
    Ok(match measure {
        Measure::Precomputed => (rec.num("y")?, rec.num("sigma")?, rec.opt_num("n")?),
        Measure::Md => {
            let g = two_group()?;
            let (y, s) = mean_difference(&g)?;
            (y, s, Some(g.n1 + g.n2))
        }
        Measure::Smd => {
            let g = two_group()?;
            let (y, s) = smd_hedges_g(&g)?;
            (y, s, Some(g.n1 + g.n2))
        }
        Measure::LogOr => {
            let t = TwoByTwoTable {
                events1: rec.num("events1")?,
                total1: rec.num("total1")?,
                events2: rec.num("events2")?,
                total2: rec.num("total2")?,
            };
            let (y, s) = log_or(&t, cc)?;
            (y, s, Some(t.total1 + t.total2))
        }
        Measure::LogOdds => {
            let p = ProportionCount {
                events: rec.num("events")?,
                total: rec.num("total")?,
            };
            let (y, s) = log_odds(&p, cc)?;
            (y, s, Some(p.total))
        }
        Measure::LogRatioCi => {
            let r = RatioWithCi {
                point: rec.num("ratio")?,
                lower: rec.num("lower")?,
                upper: rec.num("upper")?,
                level: rec.opt_num("level")?.unwrap_or(0.95),
            };
            let (y, s) = log_ratio_from_ci(&r)?;
            (y, s, rec.opt_num("n")?)
        }
        Measure::FisherZ => {
            let c = CorrelationCount {
                r: rec.num("r")?,
                n: rec.num("n")?,
            };
            let (y, s) = fisher_z(&c)?;
            (y, s, Some(c.n))
        }
    })
}

fn to_estimates(records: Vec<Record>, columns: &[String], measure: Measure, cc: ContinuityCorrection) -> Result<Vec<EffectEstimate>> {
    let missing: Vec<&str> = measure
        .required_columns()
        .iter()
        .copied()
        .filter(|c| !columns.iter().any(|h| h == c))
        .collect();
    if !missing.is_empty() {
        return Err(Error::input(format!(
            "measure '{measure}' needs column(s) {}; found {}",
            missing.join(", "),
            columns.join(", ")
        )));
    }
    records
        .iter()
        .map(|rec| {
            let label = rec.text("label").map(str::to_string).unwrap_or_else(|| format!("study {}", rec.row));
            let (y, sigma, n) = derive(rec, measure, cc).map_err(|e| match e {
                Error::Input(m) => Error::Input(m),
                other => Error::input(format!("row {} ('{label}'): {}", rec.row, strip_kind(&other))),
            })?;
            EffectEstimate::new(label.clone(), y, sigma, n)
                .map_err(|e| Error::input(format!("row {} ('{label}'): {}", rec.row, strip_kind(&e))))
        })
        .collect()
}

/// The message of an error without its category prefix.
fn strip_kind(e: &Error) -> String {
    match e {
        Error::Domain(m) | Error::Input(m) | Error::Numeric(m) | Error::UndefinedMoment(m) | Error::ImproperPosterior(m) => m.clone(),
        other => other.to_string(),
    }
}

fn csv_records(text: &str) -> Result<(Vec<String>, Vec<Record>)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::input(format!("cannot read CSV header: {e}")))?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').to_ascii_lowercase())
        .collect();
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::input(format!("row {}: {e}", i + 1)))?;
        let cells = headers.iter().cloned().zip(row.iter().map(str::to_string)).collect();
        records.push(Record { row: i + 1, cells });
    }
    Ok((headers, records))
}

fn json_records(text: &str) -> Result<(Vec<String>, Vec<Record>)> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::input(format!("invalid JSON: {e}")))?;
    let items = match &value {
        serde_json::Value::Array(a) => a,
        serde_json::Value::Object(o) => match o.get("studies") {
            Some(serde_json::Value::Array(a)) => a,
            _ => return Err(Error::input("JSON input must be an array of studies or have a 'studies' array")),
        },
        _ => return Err(Error::input("JSON input must be an array of studies or have a 'studies' array")),
    };
    let mut columns: Vec<String> = Vec::new();
    let mut records = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let obj = item
            .as_object()
            .ok_or_else(|| Error::input(format!("row {}: expected an object", i + 1)))?;
        let mut cells = HashMap::new();
        for (k, v) in obj {
            let key = k.to_ascii_lowercase();
            let text = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Null => String::new(),
                other => return Err(Error::input(format!("row {}: field '{k}' has unsupported value {other}", i + 1))),
            };
            if !columns.contains(&key) {
                columns.push(key.clone());
            }
            cells.insert(key, text);
        }
        records.push(Record { row: i + 1, cells });
    }
    Ok((columns, records))
}

/// Parses `text` and derives one estimate per record, in input order.
pub fn parse_estimates(text: &str, format: Format, measure: Measure, cc: ContinuityCorrection) -> Result<Vec<EffectEstimate>> {
    let (columns, records) = match format {
        Format::Csv => csv_records(text)?,
        Format::Json => json_records(text)?,
    };
    if records.is_empty() {
        return Err(Error::input("the input contains no studies"));
    }
    to_estimates(records, &columns, measure, cc)
}

/// Reads a dataset from `path`.
pub fn load_dataset(path: &Path, format: Format, measure: Measure, cc: ContinuityCorrection) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
    Dataset::new(parse_estimates(&text, format, measure, cc)?)
}
