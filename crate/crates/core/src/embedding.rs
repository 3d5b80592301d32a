//! Row-major embedding storage.
//!
//! Binary fingerprints are packed 64 bits per word; the scoring semantics are
//! the same as for the dense layout, only the inner loops differ.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Binary,
    Dense,
}

impl EmbeddingKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EmbeddingKind::Binary => "binary",
            EmbeddingKind::Dense => "dense",
        }
    }
}

/// Packed binary rows. Bit `k` of a row lives in word `k / 64` at position `k % 64`.
#[derive(Debug, Clone, PartialEq)]
pub struct BitMatrix {
    rows: usize,
    dim: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        let words_per_row = dim.div_ceil(64);
        BitMatrix {
            rows,
            dim,
            words_per_row,
            words: vec![0; rows * words_per_row],
        }
    }

    /// Builds from raw packed words; padding bits past `dim` must be clear.
    pub fn from_words(rows: usize, dim: usize, words: Vec<u64>) -> Option<Self> {
        let words_per_row = dim.div_ceil(64);
        if words.len() != rows * words_per_row {
            return None;
        }
        let m = BitMatrix {
            rows,
            dim,
            words_per_row,
            words,
        };
        if !dim.is_multiple_of(64) {
            let mask = !((1u64 << (dim % 64)) - 1);
            for r in 0..rows {
                if m.row(r)[words_per_row - 1] & mask != 0 {
                    return None;
                }
            }
        }
        Some(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u64] {
        &self.words[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> bool {
        self.row(i)[k / 64] >> (k % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, k: usize, value: bool) {
        let w = i * self.words_per_row + k / 64;
        if value {
            self.words[w] |= 1 << (k % 64);
        } else {
            self.words[w] &= !(1 << (k % 64));
        }
    }

    pub fn push_row(&mut self, bits: &[u64]) {
        assert_eq!(bits.len(), self.words_per_row);
        self.words.extend_from_slice(bits);
        self.rows += 1;
    }

    #[inline]
    pub fn popcount(&self, i: usize) -> u32 {
        self.row(i).iter().map(|w| w.count_ones()).sum()
    }

    #[inline]
    pub fn and_count(&self, i: usize, j: usize) -> u32 {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    dim: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_values(rows: usize, dim: usize, values: Vec<f64>) -> Option<Self> {
        (values.len() == rows * dim).then_some(DenseMatrix { rows, dim, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Embeddings for every ligand in a pool.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingMatrix {
    Binary(BitMatrix),
    Dense(DenseMatrix),
}

impl EmbeddingMatrix {
    /// Packs rows as bits when every value is exactly 0 or 1, otherwise keeps them dense.
    /// Rows must share one length; callers validate that first.
    pub fn from_rows(rows: &[Vec<f64>], dim: usize) -> Self {
        let binary = rows
            .iter()
            .all(|r| r.iter().all(|&v| v == 0.0 || v == 1.0));
        if binary {
            let mut m = BitMatrix::zeros(rows.len(), dim);
            for (i, r) in rows.iter().enumerate() {
                for (k, &v) in r.iter().enumerate() {
                    if v == 1.0 {
                        m.set(i, k, true);
                    }
                }
            }
            EmbeddingMatrix::Binary(m)
        } else {
            let mut values = Vec::with_capacity(rows.len() * dim);
            for r in rows {
                values.extend_from_slice(r);
            }
            EmbeddingMatrix::Dense(DenseMatrix {
                rows: rows.len(),
                dim,
                values,
            })
        }
    }

    /// Forces the dense layout regardless of content.
    pub fn dense_from_rows(rows: &[Vec<f64>], dim: usize) -> Self {
        let mut values = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            values.extend_from_slice(r);
        }
        EmbeddingMatrix::Dense(DenseMatrix {
            rows: rows.len(),
            dim,
            values,
        })
    }

    pub fn kind(&self) -> EmbeddingKind {
        match self {
            EmbeddingMatrix::Binary(_) => EmbeddingKind::Binary,
            EmbeddingMatrix::Dense(_) => EmbeddingKind::Dense,
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            EmbeddingMatrix::Binary(m) => m.rows(),
            EmbeddingMatrix::Dense(m) => m.rows(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            EmbeddingMatrix::Binary(m) => m.dim(),
            EmbeddingMatrix::Dense(m) => m.dim(),
        }
    }

    pub fn row_vec(&self, i: usize) -> Vec<f64> {
        match self {
            EmbeddingMatrix::Binary(m) => (0..m.dim())
                .map(|k| if m.get(i, k) { 1.0 } else { 0.0 })
                .collect(),
            EmbeddingMatrix::Dense(m) => m.row(i).to_vec(),
        }
    }

    /// Raw inner product of rows `i` and `j`.
    #[inline]
    pub fn dot(&self, i: usize, j: usize) -> f64 {
        match self {
            EmbeddingMatrix::Binary(m) => m.and_count(i, j) as f64,
            EmbeddingMatrix::Dense(m) => dot(m.row(i), m.row(j)),
        }
    }

    #[inline]
    pub fn sq_norm(&self, i: usize) -> f64 {
        match self {
            EmbeddingMatrix::Binary(m) => m.popcount(i) as f64,
            EmbeddingMatrix::Dense(m) => dot(m.row(i), m.row(i)),
        }
    }

    /// Inner product of row `i` with an arbitrary weight vector.
    #[inline]
    pub fn dot_weights(&self, i: usize, weights: &[f64]) -> f64 {
        match self {
            EmbeddingMatrix::Binary(m) => {
                let mut acc = 0.0;
                for_each_set_bit(m.row(i), |k| acc += weights[k]);
                acc
            }
            EmbeddingMatrix::Dense(m) => dot(m.row(i), weights),
        }
    }

    /// `out += scale * row(i)`
    pub fn add_scaled_row(&self, i: usize, scale: f64, out: &mut [f64]) {
        match self {
            EmbeddingMatrix::Binary(m) => for_each_set_bit(m.row(i), |k| out[k] += scale),
            EmbeddingMatrix::Dense(m) => {
                for (o, v) in out.iter_mut().zip(m.row(i)) {
                    *o += scale * v;
                }
            }
        }
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.rows();
        let mut sums = vec![0.0; self.dim()];
        for i in 0..n {
            self.add_scaled_row(i, 1.0, &mut sums);
        }
        if n > 0 {
            for s in &mut sums {
                *s /= n as f64;
            }
        }
        sums
    }

    /// Scores row `i` against `n_cls` classifiers at once.
    ///
    /// `weights_t` is laid out feature-major: the weights of all classifiers for
    /// feature `k` are contiguous at `k * n_cls..(k + 1) * n_cls`.
    #[inline]
    pub fn multi_dot(&self, i: usize, weights_t: &[f64], n_cls: usize, out: &mut [f64]) {
        out[..n_cls].fill(0.0);
        match self {
            EmbeddingMatrix::Binary(m) => {
                for_each_set_bit(m.row(i), |k| {
                    let w = &weights_t[k * n_cls..(k + 1) * n_cls];
                    for (o, v) in out.iter_mut().zip(w) {
                        *o += v;
                    }
                });
            }
            EmbeddingMatrix::Dense(m) => {
                for (k, &x) in m.row(i).iter().enumerate() {
                    if x != 0.0 {
                        let w = &weights_t[k * n_cls..(k + 1) * n_cls];
                        for (o, v) in out.iter_mut().zip(w) {
                            *o += x * v;
                        }
                    }
                }
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn for_each_set_bit(words: &[u64], mut f: impl FnMut(usize)) {
    for (wi, &word) in words.iter().enumerate() {
        let mut w = word;
        while w != 0 {
            let tz = w.trailing_zeros() as usize;
            f(wi * 64 + tz);
            w &= w - 1;
        }
    }
}
