//! Interval-data model and the CSV formats that feed it.
//!
//! Every unit's lifetime is known to lie in a closed interval `[lower, upper]`.
//! An exact observation repeats the same value on both ends, a right-censored
//! one has `upper = +inf`, a left-censored one has `lower = -inf`.

use std::fmt::Write as _;

use crate::dist::ModelKind;
use crate::error::DataError;

/// One unit's lifetime bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalObservation {
    lower: f64,
    upper: f64,
}

impl IntervalObservation {
    pub fn new(lower: f64, upper: f64) -> Result<Self, DataError> {
        Self::checked(lower, upper, 0)
    }

    fn checked(lower: f64, upper: f64, record: usize) -> Result<Self, DataError> {
        if lower.is_nan() || upper.is_nan() {
            return Err(DataError::Parse {
                record,
                message: "NaN is not a valid bound".into(),
            });
        }
        if lower.is_infinite() && upper.is_infinite() && lower <= upper {
            return Err(DataError::BothInfinite { record });
        }
        if lower > upper {
            return Err(DataError::LowerAboveUpper {
                record,
                lower,
                upper,
            });
        }
        Ok(Self { lower, upper })
    }

    /// A fully observed lifetime `[x, x]`.
    pub fn exact(x: f64) -> Result<Self, DataError> {
        Self::new(x, x)
    }

    /// A lifetime known only to exceed `x`.
    pub fn right_censored(x: f64) -> Result<Self, DataError> {
        Self::new(x, f64::INFINITY)
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// Degenerate interval; exact float equality is the contract.
    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }

    pub fn is_right_censored(&self) -> bool {
        self.upper == f64::INFINITY
    }
}

/// Validated, immutable collection of interval observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: Vec<IntervalObservation>,
    exact: usize,
}

impl Dataset {
    pub fn new(observations: Vec<IntervalObservation>) -> Result<Self, DataError> {
        if observations.is_empty() {
            return Err(DataError::Empty);
        }
        let exact = observations.iter().filter(|o| o.is_exact()).count();
        Ok(Self {
            observations,
            exact,
        })
    }

    /// Builds a dataset from `(lower, upper)` pairs.
    pub fn from_pairs<I>(pairs: I) -> Result<Self, DataError>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let observations = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (a, b))| IntervalObservation::checked(a, b, i))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(observations)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Number of degenerate (exactly observed) intervals.
    pub fn exact_count(&self) -> usize {
        self.exact
    }

    pub fn interval_count(&self) -> usize {
        self.len() - self.exact
    }

    pub fn observations(&self) -> &[IntervalObservation] {
        &self.observations
    }

    pub fn iter(&self) -> std::slice::Iter<'_, IntervalObservation> {
        self.observations.iter()
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a IntervalObservation;
    type IntoIter = std::slice::Iter<'a, IntervalObservation>;

    fn into_iter(self) -> Self::IntoIter {
        self.iter()
    }
}

/// One row of an intermittent-inspection table: `count` failures seen in `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupedRow {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
}

impl GroupedRow {
    pub fn new(lower: f64, upper: f64, count: u64) -> Result<Self, DataError> {
        Self::checked(lower, upper, count, 0)
    }

    fn checked(lower: f64, upper: f64, count: u64, record: usize) -> Result<Self, DataError> {
        IntervalObservation::checked(lower, upper, record)?;
        if lower >= upper {
            return Err(DataError::EmptyWindow {
                record,
                lower,
                upper,
            });
        }
        Ok(Self {
            lower,
            upper,
            count,
        })
    }
}

/// Expands grouped counts into `count` identical interval observations per row.
pub fn expand_grouped(rows: &[GroupedRow]) -> Result<Dataset, DataError> {
    let mut observations = Vec::with_capacity(rows.iter().map(|r| r.count as usize).sum());
    for (i, row) in rows.iter().enumerate() {
        let obs = IntervalObservation::checked(row.lower, row.upper, i)?;
        observations.extend(std::iter::repeat_n(obs, row.count as usize));
    }
    Dataset::new(observations)
}

/// Checks that every bound lies in the support of `model`.
pub fn validate_for_model(dataset: &Dataset, model: ModelKind) -> Result<(), DataError> {
    if !model.nonnegative_support() {
        return Ok(());
    }
    for (record, obs) in dataset.iter().enumerate() {
        if obs.lower() < 0.0 {
            return Err(DataError::Support {
                record,
                value: obs.lower(),
                model,
            });
        }
    }
    Ok(())
}

fn parse_bound(token: &str, record: usize) -> Result<f64, DataError> {
    let t = token.trim().to_ascii_lowercase();
    let value = match t.as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => f64::INFINITY,
        "-inf" | "-infinity" => f64::NEG_INFINITY,
        _ => t.parse::<f64>().map_err(|_| DataError::Parse {
            record,
            message: format!("'{}' is not a number", token.trim()),
        })?,
    };
    if value.is_nan() {
        return Err(DataError::Parse {
            record,
            message: "NaN is not a valid bound".into(),
        });
    }
    Ok(value)
}

fn format_bound(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        // `Display` for f64 is the shortest string that parses back to the same bits.
        format!("{x}")
    }
}

/// Reads records, skipping blank lines and an optional header whose fields match `header`.
fn read_records(text: &str, header: &[&str]) -> Result<Vec<csv::StringRecord>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| DataError::Parse {
            record: i,
            message: e.to_string(),
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let is_header = i == 0
            && rec.len() == header.len()
            && rec
                .iter()
                .zip(header)
                .all(|(f, h)| f.eq_ignore_ascii_case(h));
        if !is_header {
            records.push(rec);
        }
    }
    Ok(records)
}

/// Parses the `lower,upper` interval CSV format.
pub fn parse_interval_csv(text: &str) -> Result<Dataset, DataError> {
    let records = read_records(text, &["lower", "upper"])?;
    let mut observations = Vec::with_capacity(records.len());
    for (record, rec) in records.iter().enumerate() {
        if rec.len() != 2 {
            return Err(DataError::Parse {
                record,
                message: format!("expected 2 fields `lower,upper`, found {}", rec.len()),
            });
        }
        let lower = parse_bound(&rec[0], record)?;
        let upper = parse_bound(&rec[1], record)?;
        observations.push(IntervalObservation::checked(lower, upper, record)?);
    }
    Dataset::new(observations)
}

/// Writes the interval CSV format, header included.
pub fn serialize_interval_csv(dataset: &Dataset) -> String {
    let mut out = String::from("lower,upper\n");
    for obs in dataset {
        let _ = writeln!(
            out,
            "{},{}",
            format_bound(obs.lower()),
            format_bound(obs.upper())
        );
    }
    out
}

/// Parses the `lower,upper,count` grouped CSV format.
pub fn parse_grouped_csv(text: &str) -> Result<Vec<GroupedRow>, DataError> {
    let records = read_records(text, &["lower", "upper", "count"])?;
    let mut rows = Vec::with_capacity(records.len());
    for (record, rec) in records.iter().enumerate() {
        if rec.len() != 3 {
            return Err(DataError::Parse {
                record,
                message: format!(
                    "expected 3 fields `lower,upper,count`, found {}",
                    rec.len()
                ),
            });
        }
        let lower = parse_bound(&rec[0], record)?;
        let upper = parse_bound(&rec[1], record)?;
        let count = rec[2].parse::<u64>().map_err(|_| DataError::Parse {
            record,
            message: format!("'{}' is not a nonnegative integer count", &rec[2]),
        })?;
        rows.push(GroupedRow::checked(lower, upper, count, record)?);
    }
    Ok(rows)
}
