//! The alist interchange format for sparse parity-check matrices.
//!
//! ```text
//! n m
//! max_col_weight max_row_weight
//! col_weight_1 ... col_weight_n
//! row_weight_1 ... row_weight_m
//! <n lines: 1-based check indices of each column, zero padded>
//! <m lines: 1-based bit indices of each row, zero padded>
//! ```

use super::ParityCheckMatrix;
use crate::error::{Error, Result};

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    /// Next non-blank line as parsed integers, with its 1-based line number.
    fn next_ints(&mut self, what: &str) -> Result<(usize, Vec<usize>)> {
        for (idx, line) in self.inner.by_ref() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            self.last = idx + 1;
            let ints = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<usize>().map_err(|_| Error::Parse {
                        line: idx + 1,
                        msg: format!("invalid integer {tok:?} in {what}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok((idx + 1, ints));
        }
        Err(Error::Parse {
            line: self.last + 1,
            msg: format!("unexpected end of input, expected {what}"),
        })
    }
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Reads one index list, dropping zero padding beyond the declared weight.
fn read_list(
    lines: &mut Lines<'_>,
    what: &str,
    weight: usize,
    max_weight: usize,
    bound: usize,
) -> Result<(usize, Vec<usize>)> {
    let (line, ints) = lines.next_ints(what)?;
    if ints.len() < weight {
        return Err(err(
            line,
            format!("{what} lists {} indices but weight is {weight}", ints.len()),
        ));
    }
    if ints.len() > max_weight.max(weight) {
        return Err(err(
            line,
            format!("{what} has {} entries, more than max weight {max_weight}", ints.len()),
        ));
    }
    let (used, padding) = ints.split_at(weight);
    if let Some(&p) = padding.iter().find(|&&p| p != 0) {
        return Err(err(line, format!("{what} has index {p} beyond its declared weight")));
    }
    let mut out = Vec::with_capacity(weight);
    for &idx in used {
        if idx == 0 || idx > bound {
            return Err(err(line, format!("{what} index {idx} out of range 1..={bound}")));
        }
        let zero_based = idx - 1;
        if out.contains(&zero_based) {
            return Err(err(line, format!("{what} repeats index {idx}")));
        }
        out.push(zero_based);
    }
    Ok((line, out))
}

/// Parses an alist document into a parity-check matrix.
pub fn parse_alist(text: &str) -> Result<ParityCheckMatrix> {
    let mut lines = Lines::new(text);

    let (line, dims) = lines.next_ints("dimensions")?;
    let [n, m] = dims[..] else {
        return Err(err(line, "expected `n m`"));
    };
    if n == 0 || m == 0 {
        return Err(err(line, "dimensions must be positive"));
    }

    let (line, maxw) = lines.next_ints("max weights")?;
    let [max_col, max_row] = maxw[..] else {
        return Err(err(line, "expected `max_col_weight max_row_weight`"));
    };

    let (line, col_weights) = lines.next_ints("column weights")?;
    if col_weights.len() != n {
        return Err(err(
            line,
            format!("expected {n} column weights, found {}", col_weights.len()),
        ));
    }
    if col_weights.iter().max() != Some(&max_col) {
        return Err(err(line, format!("column weights disagree with max weight {max_col}")));
    }

    let (line, row_weights) = lines.next_ints("row weights")?;
    if row_weights.len() != m {
        return Err(err(
            line,
            format!("expected {m} row weights, found {}", row_weights.len()),
        ));
    }
    if row_weights.iter().max() != Some(&max_row) {
        return Err(err(line, format!("row weights disagree with max weight {max_row}")));
    }

    let mut rows = vec![vec![0u8; n]; m];
    for (i, &w) in col_weights.iter().enumerate() {
        let (_, checks) = read_list(&mut lines, "column list", w, max_col, m)?;
        for j in checks {
            rows[j][i] = 1;
        }
    }
    for (j, &w) in row_weights.iter().enumerate() {
        let (line, bits) = read_list(&mut lines, "row list", w, max_row, n)?;
        let from_cols: Vec<usize> = (0..n).filter(|&i| rows[j][i] == 1).collect();
        let mut sorted = bits;
        sorted.sort_unstable();
        if sorted != from_cols {
            return Err(err(
                line,
                format!("row {} disagrees with the column lists", j + 1),
            ));
        }
    }

    ParityCheckMatrix::from_rows(rows).map_err(|e| err(lines.last, e.to_string()))
}

/// Writes `h` as an alist document with zero padding.
pub fn serialize_alist(h: &ParityCheckMatrix) -> String {
    let (n, m) = (h.n(), h.m());
    let col_w: Vec<usize> = (0..n).map(|i| h.col_weight(i)).collect();
    let row_w: Vec<usize> = (0..m).map(|j| h.row_weight(j)).collect();
    let max_col = col_w.iter().copied().max().unwrap_or(0);
    let max_row = row_w.iter().copied().max().unwrap_or(0);

    let join = |v: &mut dyn Iterator<Item = usize>| {
        v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
    };
    let padded = |support: &[usize], width: usize| {
        let mut v: Vec<usize> = support.iter().map(|x| x + 1).collect();
        v.resize(width, 0);
        join(&mut v.into_iter())
    };

    let mut out = String::new();
    out.push_str(&format!("{n} {m}\n{max_col} {max_row}\n"));
    out.push_str(&join(&mut col_w.iter().copied()));
    out.push('\n');
    out.push_str(&join(&mut row_w.iter().copied()));
    out.push('\n');
    for i in 0..n {
        out.push_str(&padded(h.col_support(i), max_col));
        out.push('\n');
    }
    for j in 0..m {
        out.push_str(&padded(h.row_support(j), max_row));
        out.push('\n');
    }
    out
}

/// Parses a dense 0/1 grid, one matrix row per line. Digits may be separated
/// by whitespace or written contiguously.
pub fn parse_dense(text: &str) -> Result<ParityCheckMatrix> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                other => Err(err(idx + 1, format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        rows.push(row);
    }
    ParityCheckMatrix::from_rows(rows)
}
