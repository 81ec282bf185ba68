use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::marginals::PriceSeries;

/// Handling of FRED's "." missing-value marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    #[default]
    Reject,
    Drop,
}

#[derive(Debug, Clone)]
pub struct LoadedPrices {
    pub series: PriceSeries,
    /// Name of the value column.
    pub column: String,
    /// Rows dropped under [`MissingPolicy::Drop`].
    pub dropped: usize,
}

/// Reads a FRED-style CSV: a `DATE` column in ISO format followed by one
/// value column.
pub fn load_fred_csv(path: impl AsRef<Path>, missing: MissingPolicy) -> Result<LoadedPrices> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Ingestion(format!("{}: {e}", path.display())))?;
    parse_fred(file, &path.display().to_string(), missing)
}

pub(crate) fn parse_fred(
    reader: impl std::io::Read,
    source: &str,
    missing: MissingPolicy,
) -> Result<LoadedPrices> {
    let err = |msg: String| Error::Ingestion(format!("{source}: {msg}"));
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| err(e.to_string()))?.clone();
    if headers.len() != 2 || !headers[0].eq_ignore_ascii_case("DATE") {
        return Err(err(format!(
            "expected header `DATE,<series>`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let column = headers[1].to_string();

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut values = Vec::new();
    let mut dropped = 0;
    for (i, record) in rdr.records().enumerate() {
        // Line 1 is the header.
        let line = i + 2;
        let record = record.map_err(|e| err(format!("row {line}: {e}")))?;
        if record.len() != 2 {
            return Err(err(format!(
                "row {line}: expected 2 fields, got {}",
                record.len()
            )));
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| err(format!("row {line}: bad date `{}`: {e}", &record[0])))?;
        if record[1] == *"." {
            match missing {
                MissingPolicy::Drop => {
                    dropped += 1;
                    continue;
                }
                MissingPolicy::Reject => {
                    return Err(err(format!("row {line}: missing value `.` on {date}")));
                }
            }
        }
        let value: f64 = record[1]
            .parse()
            .map_err(|_| err(format!("row {line}: bad value `{}`", &record[1])))?;
        if !(value.is_finite() && value > 0.0) {
            return Err(err(format!(
                "row {line}: price must be positive, got {value}"
            )));
        }
        if let Some(&last) = dates.last() {
            if date == last {
                return Err(err(format!("row {line}: duplicate date {date}")));
            }
            if date < last {
                return Err(err(format!("row {line}: date {date} precedes {last}")));
            }
        }
        dates.push(date);
        values.push(value);
    }
    Ok(LoadedPrices {
        series: PriceSeries::new(dates, values)?,
        column,
        dropped,
    })
}
