//! Power-law fits of two CSV columns.

use std::io::Read;
use std::path::Path;

use burgers_core::fit::{power_law, LineFit};

#[derive(Debug)]
pub enum FitError {
    Io(std::io::Error),
    Csv(csv::Error),
    Argument(String),
}

impl std::fmt::Display for FitError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitError::Io(e) => write!(f, "{e}"),
            FitError::Csv(e) => write!(f, "{e}"),
            FitError::Argument(m) => write!(f, "invalid argument: {m}"),
        }
    }
}

impl std::error::Error for FitError {}

/// Least squares on `(ln x, ln y)` over the rows of a headed CSV file.
/// `residual` is the largest relative deviation of the fitted power law.
pub fn fit_exponent(csv_path: &Path, x_col: &str, y_col: &str) -> Result<LineFit, FitError> {
    let file = std::fs::File::open(csv_path).map_err(FitError::Io)?;
    fit_exponent_reader(file, x_col, y_col)
}

pub fn fit_exponent_reader(input: impl Read, x_col: &str, y_col: &str) -> Result<LineFit, FitError> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers().map_err(FitError::Csv)?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| FitError::Argument(format!("no column '{name}' in header {:?}", headers.iter().collect::<Vec<_>>())))
    };
    let (xi, yi) = (column(x_col)?, column(y_col)?);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(FitError::Csv)?;
        let value = |i: usize, name: &str| -> Result<f64, FitError> {
            let raw = record.get(i).unwrap_or("").trim();
            let v: f64 = raw
                .parse()
                .map_err(|_| FitError::Argument(format!("row {}: '{raw}' in column '{name}' is not a number", row + 1)))?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(FitError::Argument(format!("row {}: column '{name}' must be positive, got {v}", row + 1)));
            }
            Ok(v)
        };
        xs.push(value(xi, x_col)?);
        ys.push(value(yi, y_col)?);
    }
    if xs.len() < 4 {
        return Err(FitError::Argument(format!("need at least 4 rows, got {}", xs.len())));
    }
    power_law(&xs, &ys).map_err(|e| FitError::Argument(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(f: impl Fn(f64) -> f64) -> String {
        let mut s = String::from("t,value\n");
        for t in [1.0, 2.0, 4.0, 8.0, 16.0] {
            s.push_str(&format!("{t},{}\n", f(t)));
        }
        s
    }

    #[test]
    fn exact_laws() {
        let fit = fit_exponent_reader(table(|t| 3.0 / t.sqrt()).as_bytes(), "t", "value").unwrap();
        assert!((fit.slope + 0.5).abs() <= 1e-12);
        assert!(fit.residual <= 1e-12);
        let fit = fit_exponent_reader(table(|t| 0.7 / t).as_bytes(), "t", "value").unwrap();
        assert!((fit.slope + 1.0).abs() <= 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            fit_exponent_reader(table(|t| 1.0 - t).as_bytes(), "t", "value"),
            Err(FitError::Argument(_))
        ));
        assert!(fit_exponent_reader("t,value\n1,1\n2,2\n4,4\n".as_bytes(), "t", "value").is_err());
        assert!(fit_exponent_reader(table(|t| t).as_bytes(), "t", "missing").is_err());
    }
}
