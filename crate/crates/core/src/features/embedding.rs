//! Static token-embedding tables in word2vec text format and the padded
//! sequences fed to the neural heads.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How tokens missing from the table are embedded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OovPolicy {
    Zero,
    /// Mean of hashed character-trigram bucket rows.
    SubwordBuckets,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    vectors: Vec<f32>,
    buckets: Vec<f32>,
}

/// 32-bit FNV-1a.
pub fn fnv1a32(bytes: &[u8]) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for &b in bytes {
        h ^= u32::from(b);
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}

impl EmbeddingTable {
    pub fn new(dim: usize, entries: Vec<(String, Vec<f32>)>, buckets: Vec<Vec<f32>>) -> Result<Self> {
        let mut tokens = Vec::with_capacity(entries.len());
        let mut vectors = Vec::with_capacity(entries.len() * dim);
        for (t, v) in entries {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
            tokens.push(t);
            vectors.extend(v);
        }
        let mut flat_buckets = Vec::with_capacity(buckets.len() * dim);
        for b in buckets {
            if b.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: b.len(),
                });
            }
            flat_buckets.extend(b);
        }
        let mut table = Self {
            dim,
            tokens,
            index: HashMap::new(),
            vectors,
            buckets: flat_buckets,
        };
        table.reindex();
        Ok(table)
    }

    /// Rebuilds the lookup map; needed after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn num_buckets(&self) -> usize {
        self.buckets.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn oov_policy(&self) -> OovPolicy {
        if self.num_buckets() > 0 {
            OovPolicy::SubwordBuckets
        } else {
            OovPolicy::Zero
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Exact match first, then the lowercased token.
    pub fn lookup(&self, token: &str) -> Option<&[f32]> {
        let i = self
            .index
            .get(token)
            .or_else(|| self.index.get(&token.to_lowercase()))?;
        Some(&self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    fn oov_vector(&self, token: &str) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        let nb = self.num_buckets();
        if nb == 0 {
            return out;
        }
        let wrapped: Vec<char> = format!("<{}>", token.to_lowercase()).chars().collect();
        let grams: Vec<String> = wrapped.windows(3).map(|w| w.iter().collect()).collect();
        for g in &grams {
            let b = fnv1a32(g.as_bytes()) as usize % nb;
            for (o, &v) in out.iter_mut().zip(&self.buckets[b * self.dim..(b + 1) * self.dim]) {
                *o += f64::from(v);
            }
        }
        let n = grams.len().max(1) as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    pub fn embed_token(&self, token: &str) -> Vec<f64> {
        match self.lookup(token) {
            Some(v) => v.iter().map(|&x| f64::from(x)).collect(),
            None => self.oov_vector(token),
        }
    }

    /// Reads `count dim [buckets]`, then `count` lines `token v1 .. vdim`,
    /// then `buckets` lines of bare vectors.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let ctx = path.display().to_string();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(&ctx, 1, "missing header"))?
            .map_err(|e| Error::io(path, e))?;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|f| f.parse().map_err(|_| Error::parse(&ctx, 1, format!("bad header field '{f}'"))))
            .collect::<Result<_>>()?;
        let (count, dim, nbuckets) = match head[..] {
            [c, d] => (c, d, 0),
            [c, d, b] => (c, d, b),
            _ => return Err(Error::parse(&ctx, 1, "header must be 'count dim [buckets]'")),
        };
        let parse_vec = |fields: &[&str], lineno: usize| -> Result<Vec<f32>> {
            if fields.len() != dim {
                return Err(Error::parse(
                    &ctx,
                    lineno,
                    format!("expected {dim} values, found {}", fields.len()),
                ));
            }
            fields
                .iter()
                .map(|f| f.parse::<f32>().map_err(|_| Error::parse(&ctx, lineno, format!("bad value '{f}'"))))
                .collect()
        };
        let mut entries = Vec::with_capacity(count);
        let mut buckets = Vec::with_capacity(nbuckets);
        for k in 0..count + nbuckets {
            let lineno = k + 2;
            let line = lines
                .next()
                .ok_or_else(|| Error::parse(&ctx, lineno, "unexpected end of file"))?
                .map_err(|e| Error::io(path, e))?;
            let fields: Vec<&str> = line.split(' ').filter(|f| !f.is_empty()).collect();
            if k < count {
                let (token, rest) = fields
                    .split_first()
                    .ok_or_else(|| Error::parse(&ctx, lineno, "empty line"))?;
                entries.push((token.to_string(), parse_vec(rest, lineno)?));
            } else {
                buckets.push(parse_vec(&fields, lineno)?);
            }
        }
        Self::new(dim, entries, buckets)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        if self.num_buckets() > 0 {
            writeln!(out, "{} {} {}", self.len(), self.dim, self.num_buckets()).map_err(io)?;
        } else {
            writeln!(out, "{} {}", self.len(), self.dim).map_err(io)?;
        }
        let fmt = |v: &[f32]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        for (i, t) in self.tokens.iter().enumerate() {
            writeln!(out, "{t} {}", fmt(&self.vectors[i * self.dim..(i + 1) * self.dim])).map_err(io)?;
        }
        for b in self.buckets.chunks(self.dim.max(1)) {
            writeln!(out, "{}", fmt(b)).map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// `T x d` row-major matrix with a validity mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSequence {
    pub dim: usize,
    pub rows: Vec<f64>,
    pub mask: Vec<bool>,
}

impl EmbeddingSequence {
    /// All rows real.
    pub fn from_rows(dim: usize, rows: Vec<f64>) -> Result<Self> {
        if dim == 0 || !rows.len().is_multiple_of(dim) || rows.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{} values do not form rows of width {dim}",
                rows.len()
            )));
        }
        let t = rows.len() / dim;
        Ok(Self {
            dim,
            rows,
            mask: vec![true; t],
        })
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn real_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.rows[t * self.dim..(t + 1) * self.dim]
    }

    /// Indices of real positions, in order.
    pub fn real_positions(&self) -> Vec<usize> {
        (0..self.len()).filter(|&t| self.mask[t]).collect()
    }

    /// Appends masked zero rows up to `length`.
    pub fn padded(&self, length: usize) -> Self {
        let mut out = self.clone();
        while out.mask.len() < length {
            out.rows.extend(std::iter::repeat_n(0.0, self.dim));
            out.mask.push(false);
        }
        out
    }
}

/// Embeds the first `max_length` tokens and pads to `max_length` with
/// masked zero rows. An empty token list gives one masked zero row.
pub fn embed_sequence(tokens: &[String], table: &EmbeddingTable, max_length: usize) -> Result<EmbeddingSequence> {
    if max_length < 1 {
        return Err(Error::InvalidArgument("max_length must be at least 1".into()));
    }
    let d = table.dim();
    if tokens.is_empty() {
        return Ok(EmbeddingSequence {
            dim: d,
            rows: vec![0.0; d],
            mask: vec![false],
        });
    }
    let mut rows = Vec::with_capacity(max_length * d);
    let mut mask = Vec::with_capacity(max_length);
    for t in tokens.iter().take(max_length) {
        rows.extend(table.embed_token(t));
        mask.push(true);
    }
    let seq = EmbeddingSequence { dim: d, rows, mask };
    Ok(seq.padded(max_length))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy() -> EmbeddingTable {
        EmbeddingTable::new(
            3,
            vec![
                ("hello".into(), vec![1.0, 2.0, 3.0]),
                ("world".into(), vec![-1.5, 0.25, 1e-3]),
            ],
            vec![],
        )
        .unwrap()
    }

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn loads_fixture_and_reports_bad_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.vec");
        std::fs::write(&p, "2 3\nhello 1 2 3\nworld 4 5 6\n").unwrap();
        let t = EmbeddingTable::load(&p).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.lookup("world").unwrap(), [4.0, 5.0, 6.0]);
        assert_eq!(t.oov_policy(), OovPolicy::Zero);

        std::fs::write(&p, "2 3\nhello 1 2 3\nworld 4 5\n").unwrap();
        let err = EmbeddingTable::load(&p).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn save_load_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let entries = (0..20)
            .map(|i| (format!("t{i}"), (0..7).map(|_| rng.gen::<f32>() * 200.0 - 100.0).collect()))
            .collect();
        let buckets = (0..5).map(|_| (0..7).map(|_| rng.gen::<f32>()).collect()).collect();
        let t = EmbeddingTable::new(7, entries, buckets).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.vec");
        t.save(&p).unwrap();
        let back = EmbeddingTable::load(&p).unwrap();
        assert_eq!(back, t);
        for (a, b) in back.vectors.iter().zip(&t.vectors) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncates_and_pads() {
        let t = toy();
        let tokens: Vec<String> = (0..30).map(|i| if i % 2 == 0 { "hello" } else { "x" }.to_string()).collect();
        let seq = embed_sequence(&tokens, &t, 25).unwrap();
        assert_eq!(seq.len(), 25);
        assert_eq!(seq.real_len(), 25);

        let short = embed_sequence(&s(&["hello"]), &t, 4).unwrap();
        assert_eq!(short.mask, [true, false, false, false]);
        assert_eq!(short.row(3), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_input_is_one_masked_row() {
        let seq = embed_sequence(&[], &toy(), 25).unwrap();
        assert_eq!(seq.len(), 1);
        assert_eq!(seq.mask, [false]);
        assert_eq!(seq.rows, [0.0; 3]);
    }

    #[test]
    fn known_tokens_equal_lookups() {
        let t = toy();
        let tokens = s(&["hello", "World", "hello", "world", "hello"]);
        let seq = embed_sequence(&tokens, &t, 5).unwrap();
        for (i, tok) in tokens.iter().enumerate() {
            let want: Vec<f64> = t.lookup(tok).unwrap().iter().map(|&x| f64::from(x)).collect();
            assert_eq!(seq.row(i), &want[..]);
        }
    }

    #[test]
    fn oov_uses_trigram_buckets_when_present() {
        let t = EmbeddingTable::new(2, vec![], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let v = t.embed_token("ab");
        // "<ab>" has trigrams "<ab" and "ab>".
        let mut want = [0.0f64; 2];
        for g in ["<ab", "ab>"] {
            want[fnv1a32(g.as_bytes()) as usize % 2] += 0.5;
        }
        assert_eq!(v, want);
        assert_eq!(toy().embed_token("nope"), [0.0; 3]);
    }
}
