use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Response family of the mixture components.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Bernoulli,
    Gaussian,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bernoulli" => Ok(Family::Bernoulli),
            "gaussian" | "normal" => Ok(Family::Gaussian),
            other => Err(Error::Config(format!("unknown component family '{other}'"))),
        }
    }
}

/// Responses (N×J) and concomitant covariates (N×P), row-aligned.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    responses: DMatrix<f64>,
    covariates: DMatrix<f64>,
    intercept_included: bool,
    response_names: Vec<String>,
    covariate_names: Vec<String>,
}

impl Dataset {
    pub fn new(responses: DMatrix<f64>, covariates: DMatrix<f64>, intercept_included: bool) -> Result<Self> {
        let response_names = (1..=responses.ncols()).map(|j| format!("y{j}")).collect();
        let covariate_names = (1..=covariates.ncols())
            .map(|p| if intercept_included && p == 1 { "intercept".to_string() } else { format!("x{p}") })
            .collect();
        Self::with_names(responses, covariates, intercept_included, response_names, covariate_names)
    }

    pub fn with_names(
        responses: DMatrix<f64>,
        covariates: DMatrix<f64>,
        intercept_included: bool,
        response_names: Vec<String>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let n = responses.nrows();
        if covariates.nrows() != n {
            return Err(Error::Validation(format!(
                "responses have {n} rows but covariates have {}",
                covariates.nrows()
            )));
        }
        if n < 2 {
            return Err(Error::Validation(format!("need at least 2 observations, got {n}")));
        }
        if responses.ncols() == 0 {
            return Err(Error::Validation("responses have no columns".into()));
        }
        if covariates.ncols() == 0 {
            return Err(Error::Validation("covariates have no columns".into()));
        }
        check_finite(&responses, &response_names, "responses")?;
        check_finite(&covariates, &covariate_names, "covariates")?;
        if intercept_included {
            if let Some(i) = (0..n).find(|&i| covariates[(i, 0)] != 1.0) {
                return Err(Error::Validation(format!(
                    "intercept column '{}' is not all ones (row {})",
                    covariate_names[0],
                    i + 1
                )));
            }
        }
        Ok(Self { responses, covariates, intercept_included, response_names, covariate_names })
    }

    /// Checks family-specific constraints on the responses.
    pub fn validate_family(&self, family: Family) -> Result<()> {
        if family == Family::Bernoulli {
            for j in 0..self.responses.ncols() {
                for i in 0..self.n() {
                    let v = self.responses[(i, j)];
                    if v != 0.0 && v != 1.0 {
                        return Err(Error::Validation(format!(
                            "column '{}' is not binary: row {} has value {v}",
                            self.response_names[j],
                            i + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.responses.nrows()
    }

    /// Number of response columns (J, or the Gaussian dimension d).
    pub fn j(&self) -> usize {
        self.responses.ncols()
    }

    /// Number of covariate columns, intercept included.
    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn responses(&self) -> &DMatrix<f64> {
        &self.responses
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn intercept_included(&self) -> bool {
        self.intercept_included
    }

    pub fn response_names(&self) -> &[String] {
        &self.response_names
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn response_row(&self, i: usize) -> Vec<f64> {
        self.responses.row(i).iter().copied().collect()
    }

    pub fn covariate_row(&self, i: usize) -> Vec<f64> {
        self.covariates.row(i).iter().copied().collect()
    }

    /// Reads a header-carrying responses file and covariates file.
    pub fn read_csv(responses: &Path, covariates: &Path, intercept_included: bool) -> Result<Self> {
        let (rn, r) = read_matrix_csv(responses)?;
        let (cn, c) = read_matrix_csv(covariates)?;
        Self::with_names(r, c, intercept_included, rn, cn)
    }

    pub fn write_csv(&self, responses: &Path, covariates: &Path) -> Result<()> {
        write_matrix_csv(responses, &self.response_names, &self.responses)?;
        write_matrix_csv(covariates, &self.covariate_names, &self.covariates)
    }
}

fn check_finite(m: &DMatrix<f64>, names: &[String], what: &str) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::Validation(format!(
                    "{what} column '{}' row {} is missing or not finite",
                    names[j],
                    i + 1
                )));
            }
        }
    }
    Ok(())
}

/// Reads a numeric CSV with a header row into (names, matrix).
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if names.is_empty() || names.iter().all(|s| s.is_empty()) {
        return Err(Error::Validation(format!("{}: header row required", path.display())));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != names.len() {
            return Err(Error::Validation(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                r + 1,
                rec.len(),
                names.len()
            )));
        }
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Validation(format!(
                    "{}: row {}, column '{}': cannot parse '{field}' as a number",
                    path.display(),
                    r + 1,
                    names[c]
                ))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    Ok((names.clone(), DMatrix::from_row_slice(rows, names.len(), &values)))
}

pub fn write_matrix_csv(path: &Path, names: &[String], m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(names)?;
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| format_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest representation that round-trips exactly.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}
