//! Matrix interchange: a `rows,cols` header line, then row-major values
//! separated by commas or line breaks.

use std::path::Path;

use faer::Mat;

use crate::error::{Error, Result};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_matrix_csv(text: &str) -> Result<Mat<f64>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty input, expected a `rows,cols` header"))?;
    let dims: Vec<&str> = header.split(',').map(str::trim).collect();
    if dims.len() != 2 {
        return Err(parse_err(
            hline + 1,
            format!("header must be `rows,cols`, got `{header}`"),
        ));
    }
    let dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| parse_err(hline + 1, format!("`{s}` is not a non-negative integer")))
    };
    let (rows, cols) = (dim(dims[0])?, dim(dims[1])?);
    let mut values = Vec::with_capacity(rows * cols);
    let mut last = hline + 1;
    for (i, line) in lines {
        last = i + 1;
        for tok in line.split(',') {
            let tok = tok.trim();
            if tok.is_empty() {
                continue;
            }
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(i + 1, format!("`{tok}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(i + 1, format!("non-finite value `{tok}`")));
            }
            if values.len() == rows * cols {
                return Err(parse_err(
                    i + 1,
                    format!("more than {rows}x{cols} = {} values", rows * cols),
                ));
            }
            values.push(v);
        }
    }
    if values.len() != rows * cols {
        return Err(parse_err(
            last,
            format!("expected {} values, found {}", rows * cols, values.len()),
        ));
    }
    Ok(Mat::from_fn(rows, cols, |i, j| values[i * cols + j]))
}

pub fn read_matrix_csv(path: &Path) -> Result<Mat<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix_csv(&text)
}

/// One matrix row per line; values use the shortest round-trip representation.
pub fn format_matrix_csv(m: &Mat<f64>) -> String {
    let mut out = format!("{},{}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(m: &Mat<f64>, path: &Path) -> Result<()> {
    std::fs::write(path, format_matrix_csv(m))?;
    Ok(())
}
