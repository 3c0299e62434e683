use crate::error::CliError;
use nalgebra::DMatrix;
use std::path::Path;

/// Reads a `t,y1,...,yn` CSV into a `T x n` matrix. `t` must be an integer
/// increasing by exactly one per row; every cell must be a finite number.
pub fn ingest_csv(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let file = std::fs::File::open(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let err = |line: u64, message: String| CliError::Data {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| err(1, e.to_string()))?,
        None => return Err(err(1, "empty file".into())),
    };
    if header.get(0) != Some("t") || header.len() < 2 {
        return Err(err(1, "header must be t,y1,...,yn".into()));
    }
    let n = header.len() - 1;

    let mut values = Vec::new();
    let mut prev_t: Option<i64> = None;
    for rec in records {
        let rec = rec.map_err(|e| err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != n + 1 {
            return Err(err(line, format!("expected {} fields, found {}", n + 1, rec.len())));
        }
        let t: i64 = rec[0]
            .parse()
            .map_err(|_| err(line, format!("time index `{}` is not an integer", &rec[0])))?;
        if let Some(p) = prev_t {
            if t <= p {
                return Err(err(line, format!("time index {t} does not increase (previous {p})")));
            }
            if t != p + 1 {
                return Err(err(line, format!("gap in time index: {p} then {t}")));
            }
        }
        prev_t = Some(t);
        for (j, cell) in rec.iter().skip(1).enumerate() {
            if cell.is_empty() {
                return Err(err(line, format!("missing value in column {}", j + 2)));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| err(line, format!("`{cell}` in column {} is not a number", j + 2)))?;
            if !v.is_finite() {
                return Err(err(line, format!("non-finite value in column {}", j + 2)));
            }
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(err(2, "no data rows".into()));
    }
    Ok(DMatrix::from_row_slice(values.len() / n, n, &values))
}

/// `t,y1,...,yn` with `t` counting from `first_t`.
pub fn matrix_to_csv(m: &DMatrix<f64>, prefix: &str, first_t: usize) -> String {
    let mut out = String::from("t");
    for j in 0..m.ncols() {
        out.push_str(&format!(",{prefix}{}", j + 1));
    }
    out.push('\n');
    for t in 0..m.nrows() {
        out.push_str(&(t + first_t).to_string());
        for j in 0..m.ncols() {
            out.push(',');
            out.push_str(&m[(t, j)].to_string());
        }
        out.push('\n');
    }
    out
}
