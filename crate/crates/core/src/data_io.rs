//! Dataset files and calibrated synthetic datasets.
//!
//! CSV rows are `protein_id,ligand_id,embedding,pic`. A binary embedding is a
//! hex string, four bits per digit, most significant bit first. A dense
//! embedding is a list of decimals separated by `;`, and always contains a `;`
//! or a `.` so a single value is not mistaken for hex.
//!
//! The binary format is little-endian: magic `SPDF`, u32 version, u32 d,
//! u8 kind, u64 count, u32 length-prefixed protein id, then per ligand a
//! u32 length-prefixed id, the embedding (packed u64 words or d f64 values)
//! and the PIC as f64.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{BitMatrix, DenseMatrix, EmbeddingKind, EmbeddingMatrix};
use crate::types::{Dataset, DatasetError, Pool};

pub const MAGIC: &[u8; 4] = b"SPDF";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("protein {protein}: {source}")]
    Invalid {
        protein: String,
        #[source]
        source: DatasetError,
    },
    #[error("not a dataset file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("corrupt dataset file: {0}")]
    Corrupt(String),
    #[error("infeasible synthetic anchors: {0}")]
    InfeasibleAnchors(String),
    #[error("invalid synthetic config: {0}")]
    Config(String),
}

fn malformed(line: u64, message: impl Into<String>) -> DataError {
    DataError::Malformed {
        line,
        message: message.into(),
    }
}

/// Hex digits to bits, most significant bit of the first digit is bit 0.
pub fn parse_hex_bits(s: &str) -> Option<(Vec<u64>, usize)> {
    let dim = s.len() * 4;
    let mut words = vec![0u64; dim.div_ceil(64)];
    for (d, c) in s.bytes().enumerate() {
        let v = (c as char).to_digit(16)? as u64;
        for b in 0..4 {
            if v >> (3 - b) & 1 == 1 {
                let k = d * 4 + b;
                words[k / 64] |= 1 << (k % 64);
            }
        }
    }
    Some((words, dim))
}

pub fn format_hex_bits(words: &[u64], dim: usize) -> String {
    debug_assert_eq!(dim % 4, 0);
    let mut out = String::with_capacity(dim / 4);
    for d in 0..dim / 4 {
        let mut v = 0u32;
        for b in 0..4 {
            let k = d * 4 + b;
            if words[k / 64] >> (k % 64) & 1 == 1 {
                v |= 1 << (3 - b);
            }
        }
        out.push(char::from_digit(v, 16).expect("nibble"));
    }
    out
}

fn is_dense_field(s: &str) -> bool {
    s.contains(';') || s.contains('.')
}

/// Rows of one protein while parsing.
struct ProteinRows {
    protein: String,
    kind: EmbeddingKind,
    dim: usize,
    ids: Vec<String>,
    bits: Option<BitMatrix>,
    dense: Vec<f64>,
    pics: Vec<f64>,
}

impl ProteinRows {
    fn finish(self) -> Result<Dataset, DataError> {
        let n = self.ids.len();
        let emb = match self.kind {
            EmbeddingKind::Binary => EmbeddingMatrix::Binary(self.bits.expect("binary rows")),
            EmbeddingKind::Dense if self.dense.iter().all(|&v| v == 0.0 || v == 1.0) => {
                let mut bits = BitMatrix::zeros(n, self.dim);
                for (k, _) in self.dense.iter().enumerate().filter(|(_, v)| **v == 1.0) {
                    bits.set(k / self.dim, k % self.dim, true);
                }
                EmbeddingMatrix::Binary(bits)
            }
            EmbeddingKind::Dense => {
                EmbeddingMatrix::Dense(DenseMatrix::from_values(n, self.dim, self.dense).expect("row-major values"))
            }
        };
        let invalid = |source| DataError::Invalid {
            protein: self.protein.clone(),
            source,
        };
        let pool = Pool::new(self.ids, emb).map_err(invalid)?;
        Dataset::from_parts(self.protein.clone(), pool, self.pics).map_err(invalid)
    }
}

/// Reads one dataset per protein, in order of first appearance.
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<Dataset>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    let expected = ["protein_id", "ligand_id", "embedding", "pic"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(malformed(1, format!("header must be {}", expected.join(","))));
    }
    let mut proteins: Vec<ProteinRows> = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let line = r as u64 + 2;
        let record = record.map_err(|e| malformed(line, e.to_string()))?;
        if record.len() != 4 {
            return Err(malformed(line, format!("expected 4 fields, found {}", record.len())));
        }
        let (protein, id, emb, pic) = (&record[0], &record[1], record[2].trim(), record[3].trim());
        if id.is_empty() {
            return Err(malformed(line, "empty ligand id"));
        }
        let pic: f64 = pic
            .parse()
            .map_err(|_| malformed(line, format!("ligand {id}: PIC '{pic}' is not a number")))?;
        if !pic.is_finite() {
            return Err(malformed(line, format!("ligand {id}: non-finite PIC")));
        }
        let (kind, bits, values, dim) = if is_dense_field(emb) {
            let values = emb
                .split(';')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| malformed(line, format!("ligand {id}: bad dense embedding")))?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(malformed(line, format!("ligand {id}: non-finite embedding value")));
            }
            let d = values.len();
            (EmbeddingKind::Dense, None, values, d)
        } else {
            let (words, d) = parse_hex_bits(emb).ok_or_else(|| malformed(line, format!("ligand {id}: bad hex embedding")))?;
            (EmbeddingKind::Binary, Some(words), Vec::new(), d)
        };

        let slot = match proteins.iter().position(|p| p.protein == protein) {
            Some(s) => s,
            None => {
                proteins.push(ProteinRows {
                    protein: protein.to_string(),
                    kind,
                    dim,
                    ids: Vec::new(),
                    bits: (kind == EmbeddingKind::Binary).then(|| BitMatrix::zeros(0, dim)),
                    dense: Vec::new(),
                    pics: Vec::new(),
                });
                proteins.len() - 1
            }
        };
        let p = &mut proteins[slot];
        if kind != p.kind {
            return Err(malformed(
                line,
                format!("ligand {id}: {} embedding in a {} dataset", kind.as_str(), p.kind.as_str()),
            ));
        }
        if dim != p.dim {
            return Err(malformed(
                line,
                format!("ligand {id}: embedding has dimension {dim}, expected {}", p.dim),
            ));
        }
        match bits {
            Some(w) => p.bits.as_mut().expect("binary dataset").push_row(&w),
            None => p.dense.extend_from_slice(&values),
        }
        p.ids.push(id.to_string());
        p.pics.push(pic);
    }
    proteins.into_iter().map(ProteinRows::finish).collect()
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<Dataset>, DataError> {
    read_csv(BufReader::new(File::open(path)?))
}

fn embedding_field(emb: &EmbeddingMatrix, i: usize) -> String {
    match emb {
        EmbeddingMatrix::Binary(m) if m.dim() % 4 == 0 => format_hex_bits(m.row(i), m.dim()),
        _ => {
            let v = emb.row_vec(i);
            let parts: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
            let mut s = parts.join(";");
            if v.len() == 1 && !s.contains('.') {
                s.push_str(".0");
            }
            s
        }
    }
}

/// Writes datasets as CSV. Binary embeddings whose dimension is not a
/// multiple of four are written as `0;1;…` decimals.
pub fn write_csv<W: Write>(writer: W, datasets: &[Dataset]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    let to_io = |e: csv::Error| DataError::Io(io::Error::other(e));
    w.write_record(["protein_id", "ligand_id", "embedding", "pic"]).map_err(to_io)?;
    for ds in datasets {
        let pool = ds.pool();
        for i in 0..pool.len() {
            w.write_record([
                ds.protein_id(),
                pool.id(i),
                &embedding_field(pool.embeddings(), i),
                &format!("{:?}", ds.pic(i)),
            ])
            .map_err(to_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(path: impl AsRef<Path>, datasets: &[Dataset]) -> Result<(), DataError> {
    write_csv(BufWriter::new(File::create(path)?), datasets)
}

/// Header of a binary dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetFileHeader {
    pub version: u32,
    pub dim: u32,
    pub kind: EmbeddingKind,
    pub count: u64,
    pub protein_id: String,
}

pub fn write_binary<W: Write>(mut w: W, ds: &Dataset) -> Result<(), DataError> {
    let pool = ds.pool();
    let emb = pool.embeddings();
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(pool.dim() as u32).to_le_bytes())?;
    w.write_all(&[match emb.kind() {
        EmbeddingKind::Binary => 0u8,
        EmbeddingKind::Dense => 1u8,
    }])?;
    w.write_all(&(pool.len() as u64).to_le_bytes())?;
    write_str(&mut w, ds.protein_id())?;
    for i in 0..pool.len() {
        write_str(&mut w, pool.id(i))?;
        match emb {
            EmbeddingMatrix::Binary(m) => {
                for word in m.row(i) {
                    w.write_all(&word.to_le_bytes())?;
                }
            }
            EmbeddingMatrix::Dense(m) => {
                for v in m.row(i) {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        w.write_all(&ds.pic(i).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N], DataError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => DataError::Corrupt("truncated file".into()),
        _ => DataError::Io(e),
    })?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, DataError> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, DataError> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, DataError> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

fn read_str<R: Read>(r: &mut R) -> Result<String, DataError> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)
        .map_err(|_| DataError::Corrupt("truncated string".into()))?;
    String::from_utf8(buf).map_err(|_| DataError::Corrupt("id is not UTF-8".into()))
}

pub fn read_binary_header<R: Read>(r: &mut R) -> Result<DatasetFileHeader, DataError> {
    if &read_array::<4, _>(r).map_err(|_| DataError::BadMagic)? != MAGIC {
        return Err(DataError::BadMagic);
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(DataError::Version(version));
    }
    let dim = read_u32(r)?;
    let kind = match read_array::<1, _>(r)?[0] {
        0 => EmbeddingKind::Binary,
        1 => EmbeddingKind::Dense,
        k => return Err(DataError::Corrupt(format!("unknown embedding kind {k}"))),
    };
    let count = read_u64(r)?;
    let protein_id = read_str(r)?;
    Ok(DatasetFileHeader {
        version,
        dim,
        kind,
        count,
        protein_id,
    })
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Dataset, DataError> {
    let header = read_binary_header(&mut r)?;
    let n = usize::try_from(header.count).map_err(|_| DataError::Corrupt("count overflows".into()))?;
    let dim = header.dim as usize;
    let mut ids = Vec::with_capacity(n.min(1 << 20));
    let mut pics = Vec::with_capacity(n.min(1 << 20));
    let emb = match header.kind {
        EmbeddingKind::Binary => {
            let wpr = dim.div_ceil(64);
            let mut words = Vec::with_capacity((n * wpr).min(1 << 24));
            for _ in 0..n {
                ids.push(read_str(&mut r)?);
                for _ in 0..wpr {
                    words.push(read_u64(&mut r)?);
                }
                pics.push(read_f64(&mut r)?);
            }
            EmbeddingMatrix::Binary(
                BitMatrix::from_words(n, dim, words).ok_or_else(|| DataError::Corrupt("bits set past dimension".into()))?,
            )
        }
        EmbeddingKind::Dense => {
            let mut values = Vec::with_capacity((n * dim).min(1 << 24));
            for _ in 0..n {
                ids.push(read_str(&mut r)?);
                for _ in 0..dim {
                    values.push(read_f64(&mut r)?);
                }
                pics.push(read_f64(&mut r)?);
            }
            EmbeddingMatrix::Dense(DenseMatrix::from_values(n, dim, values).expect("row-major values"))
        }
    };
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(DataError::Corrupt("trailing bytes after last row".into()));
    }
    let invalid = |source| DataError::Invalid {
        protein: header.protein_id.clone(),
        source,
    };
    let pool = Pool::new(ids, emb).map_err(invalid)?;
    Dataset::from_parts(header.protein_id.clone(), pool, pics).map_err(invalid)
}

pub fn save_binary(path: impl AsRef<Path>, ds: &Dataset) -> Result<(), DataError> {
    write_binary(BufWriter::new(File::create(path)?), ds)
}

pub fn load_binary(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    read_binary(BufReader::new(File::open(path)?))
}

/// Settings for [`generate_synthetic`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub protein_id: String,
    pub ligands: usize,
    pub dim: usize,
    pub bit_density: f64,
    /// Number of coordinates carrying the planted signal.
    pub informative: usize,
    /// Standard deviation of the noise relative to the unit-variance signal.
    pub noise: f64,
    pub median_pic: f64,
    /// Target fraction of ligands with PIC >= 8.
    pub frac_above_8: f64,
    /// Target fraction of ligands with PIC >= 8.5.
    pub frac_above_8_5: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            protein_id: "synthetic".to_string(),
            ligands: 5000,
            dim: 2048,
            bit_density: 0.02,
            informative: 32,
            noise: 0.5,
            median_pic: 5.9,
            frac_above_8: 0.07,
            frac_above_8_5: 0.027,
            seed: 0,
        }
    }
}

/// Fixed upper-tail knots above the configured anchors: `(quantile, pic)`.
const TAIL_KNOTS: [(f64, f64); 3] = [(0.995, 9.0), (0.9993, 9.5), (1.0, 10.0)];
const FLOOR_PIC: f64 = 5.0;

impl SyntheticConfig {
    /// Piecewise-linear quantile function knots, strictly increasing in both coordinates.
    pub fn quantile_knots(&self) -> Result<Vec<(f64, f64)>, DataError> {
        let f8 = self.frac_above_8;
        let f85 = self.frac_above_8_5;
        if !(f8 > 0.0 && f8 < 1.0 && f85 > 0.0 && f85 < 1.0) {
            return Err(DataError::InfeasibleAnchors("fractions must lie in (0, 1)".into()));
        }
        if f85 >= f8 {
            return Err(DataError::InfeasibleAnchors(
                "fraction above 8.5 must be below fraction above 8".into(),
            ));
        }
        let knots = vec![
            (0.0, FLOOR_PIC),
            (0.5, self.median_pic),
            (0.75, 7.0),
            (1.0 - f8, 8.0),
            (1.0 - f85, 8.5),
            TAIL_KNOTS[0],
            TAIL_KNOTS[1],
            TAIL_KNOTS[2],
        ];
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0 && w[1].1 > w[0].1)) {
            return Err(DataError::InfeasibleAnchors(format!(
                "need 5 < median < 7, fraction above 8 below 0.25 and fraction above 8.5 above 0.005 (got {}, {f8}, {f85})",
                self.median_pic
            )));
        }
        Ok(knots)
    }
}

fn interpolate(knots: &[(f64, f64)], u: f64) -> f64 {
    let seg = knots.windows(2).find(|w| u <= w[1].0).unwrap_or(&knots[knots.len() - 2..]);
    let (u0, p0) = seg[0];
    let (u1, p1) = seg[1];
    p0 + (p1 - p0) * (u - u0) / (u1 - u0)
}

/// Maps raw scores to PICs through their mid-ranks, so the PIC distribution
/// follows the knots whatever the raw scale. Ties share a PIC.
pub fn quantile_transform(raw: &[f64], knots: &[(f64, f64)]) -> Vec<f64> {
    let n = raw.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
    let mut pics = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && raw[order[end]] == raw[order[start]] {
            end += 1;
        }
        let mid_rank = (start + end) as f64 / 2.0;
        let p = interpolate(knots, mid_rank / n as f64);
        for &i in &order[start..end] {
            pics[i] = p;
        }
        start = end;
    }
    pics
}

/// Bernoulli fingerprints with a planted sparse linear activity signal.
///
/// The signal is `Σ_k a_k x_k` over `informative` random coordinates with
/// `a_k ~ |N(0, 1)|`, scaled to unit variance; Gaussian noise of the configured
/// scale is added and the result is mapped to PICs by [`quantile_transform`].
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Dataset, DataError> {
    let knots = config.quantile_knots()?;
    if config.dim == 0 || config.informative > config.dim {
        return Err(DataError::Config("need 0 < informative <= dim".into()));
    }
    if !(config.bit_density > 0.0 && config.bit_density < 1.0) {
        return Err(DataError::Config("bit density must lie in (0, 1)".into()));
    }
    if config.noise.is_nan() || config.noise < 0.0 {
        return Err(DataError::Config("noise must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.ligands;
    let mut bits = BitMatrix::zeros(n, config.dim);
    for i in 0..n {
        for k in 0..config.dim {
            if rng.random::<f64>() < config.bit_density {
                bits.set(i, k, true);
            }
        }
    }
    let informative: Vec<usize> = index::sample(&mut rng, config.dim, config.informative).into_vec();
    let coef: Vec<f64> = informative
        .iter()
        .map(|_| rng.sample::<f64, _>(StandardNormal).abs())
        .collect();
    let signal: Vec<f64> = (0..n)
        .map(|i| {
            informative
                .iter()
                .zip(&coef)
                .filter(|(k, _)| bits.get(i, **k))
                .map(|(_, a)| a)
                .sum()
        })
        .collect();
    // Scale by the theoretical signal deviation so the result does not depend on the sample.
    let p = config.bit_density;
    let sd = (coef.iter().map(|a| a * a).sum::<f64>() * p * (1.0 - p)).sqrt();
    let mean = coef.iter().sum::<f64>() * p;
    let raw: Vec<f64> = signal
        .iter()
        .map(|s| (s - mean) / sd + config.noise * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let pics = quantile_transform(&raw, &knots);
    let width = n.max(1).to_string().len();
    let ids = (0..n).map(|i| format!("{}-L{i:0width$}", config.protein_id)).collect();
    let invalid = |source| DataError::Invalid {
        protein: config.protein_id.clone(),
        source,
    };
    let pool = Pool::new(ids, EmbeddingMatrix::Binary(bits)).map_err(invalid)?;
    Dataset::from_parts(config.protein_id.clone(), pool, pics).map_err(invalid)
}
