//! Binary linear block codes: parity-check and generator matrices over GF(2).
//!
//! All bit vectors are `u8` slices holding 0 or 1, indexed in the column order
//! of the parity-check matrix.

mod alist;
mod builtin;
mod gf2;

pub use alist::{parse_alist, parse_dense, serialize_alist};
pub use builtin::{hamming74, repetition2};
pub use gf2::gf2_rank;

use crate::error::{check_len, Error, Result};

/// An `m x n` parity-check matrix `H`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    n: usize,
    m: usize,
    rows: Vec<Vec<u8>>,
    row_supports: Vec<Vec<usize>>,
    col_supports: Vec<Vec<usize>>,
    rank: usize,
}

impl ParityCheckMatrix {
    /// Builds a matrix from dense rows, validating entries and weights.
    pub fn from_rows(rows: Vec<Vec<u8>>) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::Matrix("matrix has no rows".into()));
        }
        let n = rows[0].len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Matrix("rows have differing lengths".into()));
        }
        if m >= n {
            return Err(Error::Matrix(format!(
                "number of checks {m} must be smaller than code length {n}"
            )));
        }
        if rows.iter().flatten().any(|&b| b > 1) {
            return Err(Error::Matrix("entries must be 0 or 1".into()));
        }

        let row_supports: Vec<Vec<usize>> = rows
            .iter()
            .map(|r| (0..n).filter(|&i| r[i] == 1).collect())
            .collect();
        let mut col_supports = vec![Vec::new(); n];
        for (j, support) in row_supports.iter().enumerate() {
            for &i in support {
                col_supports[i].push(j);
            }
        }
        if let Some(j) = row_supports.iter().position(Vec::is_empty) {
            return Err(Error::Matrix(format!("row {j} has weight 0")));
        }
        if let Some(i) = col_supports.iter().position(Vec::is_empty) {
            return Err(Error::Matrix(format!("column {i} has weight 0")));
        }
        let rank = gf2_rank(&rows);

        Ok(Self {
            n,
            m,
            rows,
            row_supports,
            col_supports,
            rank,
        })
    }

    /// Code length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of parity checks (`n - k` for full-rank matrices).
    pub fn m(&self) -> usize {
        self.m
    }

    /// Message length implied by the rank of `H`.
    pub fn k(&self) -> usize {
        self.n - self.rank
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    /// Column indices participating in check `j`.
    pub fn row_support(&self, j: usize) -> &[usize] {
        &self.row_supports[j]
    }

    pub fn row_supports(&self) -> &[Vec<usize>] {
        &self.row_supports
    }

    /// Checks touching bit `i`.
    pub fn col_support(&self, i: usize) -> &[usize] {
        &self.col_supports[i]
    }

    pub fn col_weight(&self, i: usize) -> usize {
        self.col_supports[i].len()
    }

    pub fn row_weight(&self, j: usize) -> usize {
        self.row_supports[j].len()
    }

    /// Number of ones in `H`.
    pub fn edges(&self) -> usize {
        self.row_supports.iter().map(Vec::len).sum()
    }

    /// FNV-1a hash of the dense matrix, used to tag result files.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |b: u8| {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        };
        for b in (self.m as u32).to_le_bytes() {
            feed(b);
        }
        for b in (self.n as u32).to_le_bytes() {
            feed(b);
        }
        for &b in self.rows.iter().flatten() {
            feed(b);
        }
        h
    }

    /// Hard syndrome `s = H y_b^T mod 2`.
    pub fn syndrome(&self, bits: &[u8]) -> Result<Vec<u8>> {
        check_len("hard decision", self.n, bits.len())?;
        Ok(self.syndrome_unchecked(bits))
    }

    pub(crate) fn syndrome_unchecked(&self, bits: &[u8]) -> Vec<u8> {
        self.row_supports
            .iter()
            .map(|support| support.iter().fold(0u8, |acc, &i| acc ^ (bits[i] & 1)))
            .collect()
    }

    /// True when every check is satisfied.
    pub fn is_codeword(&self, bits: &[u8]) -> bool {
        bits.len() == self.n
            && self
                .row_supports
                .iter()
                .all(|support| support.iter().fold(0u8, |acc, &i| acc ^ bits[i]) == 0)
    }
}

/// Free-function form of [`ParityCheckMatrix::syndrome`].
pub fn hard_syndrome(bits: &[u8], h: &ParityCheckMatrix) -> Result<Vec<u8>> {
    h.syndrome(bits)
}

/// A `k x n` generator matrix whose rows span the null space of `H`.
///
/// Rows are stored in the original column order of `H`; `column_permutation`
/// records which original column sits at each position of the systematic
/// form `[I_k | P^T]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorMatrix {
    k: usize,
    n: usize,
    rows: Vec<Vec<u8>>,
    column_permutation: Vec<usize>,
}

impl GeneratorMatrix {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn column_permutation(&self) -> &[usize] {
        &self.column_permutation
    }

    /// `x = m G mod 2`.
    pub fn encode(&self, message: &[u8]) -> Result<Codeword> {
        check_len("message", self.k, message.len())?;
        if message.iter().any(|&b| b > 1) {
            return Err(Error::InvalidInput("message bits must be 0 or 1".into()));
        }
        let mut bits = vec![0u8; self.n];
        for (row, _) in self.rows.iter().zip(message).filter(|(_, &b)| b == 1) {
            for (x, &g) in bits.iter_mut().zip(row) {
                *x ^= g;
            }
        }
        Ok(Codeword { bits })
    }

    /// Encodes the message whose bits are the binary digits of `index`
    /// (bit 0 of `index` is message bit 0).
    pub fn encode_index(&self, index: u64) -> Codeword {
        let message: Vec<u8> = (0..self.k).map(|i| ((index >> i) & 1) as u8).collect();
        self.encode(&message).expect("message length matches k")
    }
}

/// Free-function form of [`GeneratorMatrix::encode`].
pub fn encode(message: &[u8], g: &GeneratorMatrix) -> Result<Codeword> {
    g.encode(message)
}

/// Derives a generator matrix by Gaussian elimination of `H` into
/// `[P | I_m]` (column swaps recorded) and taking `G = [I_k | P^T]`.
pub fn derive_generator(h: &ParityCheckMatrix) -> Result<GeneratorMatrix> {
    let (m, n) = (h.m(), h.n());
    if h.rank() < m {
        return Err(Error::RankDeficient {
            rank: h.rank(),
            required: m,
        });
    }
    let k = n - m;
    let (reduced, perm) = gf2::systematize(h.rows(), k).ok_or(Error::RankDeficient {
        rank: h.rank(),
        required: m,
    })?;

    // In permuted coordinates reduced = [P | I_m]; G' = [I_k | P^T].
    let mut rows = vec![vec![0u8; n]; k];
    for (i, row) in rows.iter_mut().enumerate() {
        row[perm[i]] = 1;
        for (j, red) in reduced.iter().enumerate() {
            row[perm[k + j]] = red[i];
        }
    }

    Ok(GeneratorMatrix {
        k,
        n,
        rows,
        column_permutation: perm,
    })
}

/// A valid codeword of some code.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Codeword {
    pub bits: Vec<u8>,
}

impl Codeword {
    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![0; n] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// A loaded code: `H`, its derived `G` and a display name.
#[derive(Debug, Clone)]
pub struct Code {
    pub name: String,
    pub h: ParityCheckMatrix,
    pub g: GeneratorMatrix,
}

impl Code {
    pub fn new(name: impl Into<String>, h: ParityCheckMatrix) -> Result<Self> {
        let g = derive_generator(&h)?;
        Ok(Self {
            name: name.into(),
            h,
            g,
        })
    }

    pub fn n(&self) -> usize {
        self.h.n()
    }

    pub fn k(&self) -> usize {
        self.g.k()
    }

    pub fn m(&self) -> usize {
        self.h.m()
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.n() as f64
    }

    /// Looks up a built-in code by id (`hamming74`, `rep2`).
    pub fn builtin(id: &str) -> Option<Self> {
        let h = match id {
            "hamming74" | "hamming" => hamming74(),
            "rep2" | "repetition2" => repetition2(),
            _ => return None,
        };
        Some(Self::new(id, h).expect("built-in codes are full rank"))
    }
}
