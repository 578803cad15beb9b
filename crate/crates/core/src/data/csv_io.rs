use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Outcome};

/// Column mapping from a CSV header to the analysis roles. Mapping is by
/// name, so column order in the file is irrelevant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    pub exposure: String,
    pub outcome: String,
    #[serde(default)]
    pub covariates: Vec<String>,
    /// Optional per-row sampling weight; defaults to 1.
    #[serde(default)]
    pub weight: Option<String>,
    /// Covariates recorded only for diseased units (e.g. tumour stage), used
    /// solely by the missing-subtype model.
    #[serde(default)]
    pub case_covariates: Vec<String>,
}

impl CsvSchema {
    /// Schema matching the header written by [`write_csv`].
    pub fn canonical(data: &Dataset) -> Self {
        CsvSchema {
            exposure: "A".into(),
            outcome: "Y".into(),
            covariates: data.covariate_names().to_vec(),
            weight: Some("weight".into()),
            case_covariates: data.case_covariate_names().to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadReport {
    pub dataset: Dataset,
    /// Rows dropped because a required value was missing.
    pub rejected_rows: usize,
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f == "NA"
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LoadReport, DataError> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<LoadReport, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: HashMap<String, usize> = rdr.headers()?.iter().enumerate().map(|(i, h)| (h.to_string(), i)).collect();
    let col = |name: &str| header.get(name).copied().ok_or_else(|| DataError::MissingColumn(name.to_string()));

    let a_col = col(&schema.exposure)?;
    let y_col = col(&schema.outcome)?;
    let x_cols = schema.covariates.iter().map(|c| col(c)).collect::<Result<Vec<_>, _>>()?;
    let c_cols = schema.case_covariates.iter().map(|c| col(c)).collect::<Result<Vec<_>, _>>()?;
    let w_col = schema.weight.as_deref().map(col).transpose()?;

    let mut data = Dataset::with_capacity(schema.covariates.clone(), schema.case_covariates.clone(), 0);
    let mut rejected = 0usize;
    let mut x = Vec::with_capacity(x_cols.len());
    let mut case = Vec::with_capacity(c_cols.len());

    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let row = idx + 1;
        let field = |j: usize| record.get(j).unwrap_or("");
        let number = |j: usize, name: &str| -> Result<f64, DataError> {
            let s = field(j);
            s.trim().parse::<f64>().map_err(|_| DataError::InvalidNumber {
                row,
                column: name.to_string(),
                value: s.to_string(),
            })
        };

        if is_missing(field(a_col)) || is_missing(field(y_col)) || x_cols.iter().any(|&j| is_missing(field(j))) {
            rejected += 1;
            continue;
        }

        let a_raw = field(a_col);
        let exposure = match a_raw.trim().parse::<f64>() {
            Ok(0.0) => 0u8,
            Ok(1.0) => 1u8,
            _ => {
                return Err(DataError::NonBinaryExposure {
                    row,
                    column: schema.exposure.clone(),
                    value: a_raw.to_string(),
                })
            }
        };
        let y_raw = field(y_col);
        let outcome = y_raw
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.fract() == 0.0 && (0.0..=255.0).contains(v))
            .and_then(|v| Outcome::from_code(v as u8))
            .ok_or_else(|| DataError::UnknownOutcome {
                row,
                column: schema.outcome.clone(),
                value: y_raw.to_string(),
            })?;

        // Case covariates are required only where they are meaningful.
        if outcome.is_diseased() && c_cols.iter().any(|&j| is_missing(field(j))) {
            rejected += 1;
            continue;
        }

        x.clear();
        for (&j, name) in x_cols.iter().zip(&schema.covariates) {
            x.push(number(j, name)?);
        }
        case.clear();
        for (&j, name) in c_cols.iter().zip(&schema.case_covariates) {
            case.push(if is_missing(field(j)) { f64::NAN } else { number(j, name)? });
        }
        let weight = match w_col {
            Some(j) => {
                let w = number(j, schema.weight.as_deref().unwrap_or_default())?;
                if !(w.is_finite() && w >= 0.0) {
                    return Err(DataError::InvalidWeight { row, value: w });
                }
                w
            }
            None => 1.0,
        };
        data.push_row(exposure, &x, &case, outcome, weight);
    }

    if data.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(LoadReport { dataset: data, rejected_rows: rejected })
}

/// Write `data` with the header described by [`CsvSchema::canonical`].
/// Floats use the shortest round-trip representation, so reading the file
/// back reproduces the dataset exactly.
pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<(), DataError> {
    let schema = CsvSchema::canonical(data);
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = vec![&schema.exposure, &schema.outcome];
    header.extend(schema.covariates.iter().map(String::as_str));
    header.push("weight");
    header.extend(schema.case_covariates.iter().map(String::as_str));
    wtr.write_record(&header)?;

    let fmt = |v: f64| if v.is_nan() { "NA".to_string() } else { v.to_string() };
    for i in 0..data.len() {
        let u = data.unit(i);
        let mut rec = vec![u.exposure.to_string(), u.outcome.code().to_string()];
        rec.extend(u.covariates.iter().map(|&v| fmt(v)));
        rec.push(fmt(u.weight));
        rec.extend(data.case_covariates(i).iter().map(|&v| fmt(v)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
