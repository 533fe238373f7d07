//! Extreme-classification repository text format and the missing-label
//! masking protocol.
//!
//! The format is a header line `n d L` followed by exactly `n` rows of
//! `l1,l2,...,lk f1:v1 f2:v2 ...`. A row with no labels starts with a space.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, CooccurrenceMatrix, LabelMatrix, SparseMatrix};

/// Feature rows paired with binary label rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: SparseMatrix,
    pub labels: LabelMatrix,
}

impl Dataset {
    pub fn new(features: SparseMatrix, labels: LabelMatrix) -> Result<Self> {
        check_dim("dataset rows", features.rows(), labels.rows())?;
        Ok(Dataset { features, labels })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_labels(&self) -> usize {
        self.labels.num_labels()
    }

    pub fn with_labels(&self, labels: LabelMatrix) -> Result<Self> {
        Dataset::new(self.features.clone(), labels)
    }
}

fn parse_header(line: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(Error::parse(
            1,
            format!("expected header `n d L`, got {line:?}"),
        ));
    }
    let num = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::parse(1, format!("invalid {what} {s:?} in header")))
    };
    Ok((
        num(parts[0], "instance count")?,
        num(parts[1], "feature count")?,
        num(parts[2], "label count")?,
    ))
}

type ParsedRow = (Vec<u32>, Vec<(u32, f64)>);

fn parse_row(line: &str, lineno: usize, d: usize, num_labels: usize) -> Result<ParsedRow> {
    let mut tokens = line.split_ascii_whitespace().peekable();
    let mut labels = Vec::new();
    let has_label_field =
        !line.starts_with([' ', '\t']) && tokens.peek().is_some_and(|t| !t.contains(':'));
    if has_label_field {
        let field = tokens.next().unwrap_or_default();
        for tok in field.split(',').filter(|t| !t.is_empty()) {
            let l: u32 = tok
                .parse()
                .map_err(|_| Error::parse(lineno, format!("invalid label {tok:?}")))?;
            if l as usize >= num_labels {
                return Err(Error::parse(
                    lineno,
                    format!("label {l} out of range (L = {num_labels})"),
                ));
            }
            labels.push(l);
        }
    }
    let mut feats = Vec::new();
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| Error::parse(lineno, format!("expected index:value, got {tok:?}")))?;
        let j: u32 = idx
            .parse()
            .map_err(|_| Error::parse(lineno, format!("invalid feature index {idx:?}")))?;
        if j as usize >= d {
            return Err(Error::parse(
                lineno,
                format!("feature {j} out of range (d = {d})"),
            ));
        }
        let v: f64 = val
            .parse()
            .map_err(|_| Error::parse(lineno, format!("invalid feature value {val:?}")))?;
        if !v.is_finite() {
            return Err(Error::parse(
                lineno,
                format!("non-finite feature value {val:?}"),
            ));
        }
        feats.push((j, v));
    }
    feats.sort_unstable_by_key(|e| e.0);
    if let Some(w) = feats.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::parse(
            lineno,
            format!("duplicate feature index {}", w[0].0),
        ));
    }
    Ok((labels, feats))
}

/// Reads a dataset in the repository text format. LF and CRLF line endings
/// are accepted.
pub fn parse_xmlc_dataset(source: impl BufRead) -> Result<Dataset> {
    let mut lines = source.lines();
    let header = match lines.next() {
        Some(l) => l?,
        None => return Err(Error::parse(1, "empty input")),
    };
    let (n, d, num_labels) = parse_header(header.trim_end_matches('\r'))?;
    let mut label_rows = Vec::with_capacity(n);
    let mut feature_rows = Vec::with_capacity(n);
    let mut trailing_blank = None;
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if label_rows.len() == n {
            if line.trim().is_empty() {
                trailing_blank.get_or_insert(lineno);
                continue;
            }
            return Err(Error::parse(
                lineno,
                format!("more rows than the {n} declared in the header"),
            ));
        }
        let (labels, feats) = parse_row(line, lineno, d, num_labels)?;
        label_rows.push(labels);
        feature_rows.push(feats);
    }
    if label_rows.len() != n {
        return Err(Error::parse(
            label_rows.len() + 2,
            format!("header declares {n} rows, found {}", label_rows.len()),
        ));
    }
    let features = SparseMatrix::from_rows(d, feature_rows)?;
    let labels = LabelMatrix::from_rows(num_labels, label_rows)?;
    Dataset::new(features, labels)
}

pub fn read_xmlc_file(path: impl AsRef<std::path::Path>) -> Result<Dataset> {
    let f = std::fs::File::open(path)?;
    parse_xmlc_dataset(std::io::BufReader::new(f))
}

/// Writes a dataset in the repository text format. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_xmlc_dataset(data: &Dataset, mut out: impl Write) -> Result<()> {
    writeln!(
        out,
        "{} {} {}",
        data.len(),
        data.num_features(),
        data.num_labels()
    )?;
    for i in 0..data.len() {
        let labels: Vec<String> = data.labels.row(i).iter().map(u32::to_string).collect();
        write!(out, "{}", labels.join(","))?;
        for (j, v) in data.features.row_entries(i) {
            write!(out, " {j}:{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Outcome of hiding a fraction of the nonzero label entries.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskResult {
    pub masked: LabelMatrix,
    /// Hidden `(row, label)` coordinates in row-major order.
    pub hidden: Vec<(usize, u32)>,
    pub fraction: f64,
    pub seed: u64,
}

/// Hides `round(fraction · nnz)` label entries chosen uniformly without
/// replacement. Deterministic for a given seed.
pub fn mask_labels(labels: &LabelMatrix, fraction: f64, seed: u64) -> Result<MaskResult> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid(format!(
            "mask fraction {fraction} outside [0, 1]"
        )));
    }
    let coords = labels.coordinates();
    let hide = (fraction * coords.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; coords.len()];
    for p in rand::seq::index::sample(&mut rng, coords.len(), hide) {
        chosen[p] = true;
    }
    let mut rows = vec![Vec::new(); labels.rows()];
    let mut hidden = Vec::with_capacity(hide);
    for (&(i, l), hid) in coords.iter().zip(chosen) {
        if hid {
            hidden.push((i, l));
        } else {
            rows[i].push(l);
        }
    }
    Ok(MaskResult {
        masked: LabelMatrix::from_rows(labels.num_labels(), rows)?,
        hidden,
        fraction,
        seed,
    })
}

/// Writes the manifest: a `fraction seed nnz_hidden` header followed by one
/// 0-based `row label` pair per line.
pub fn write_mask_manifest(mask: &MaskResult, mut out: impl Write) -> Result<()> {
    writeln!(out, "{} {} {}", mask.fraction, mask.seed, mask.hidden.len())?;
    for (i, l) in &mask.hidden {
        writeln!(out, "{i} {l}")?;
    }
    Ok(())
}

/// Parsed manifest: `(fraction, seed, hidden coordinates)`.
pub type Manifest = (f64, u64, Vec<(usize, u32)>);

pub fn read_mask_manifest(source: impl BufRead) -> Result<Manifest> {
    let mut lines = source.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty manifest"))??;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(Error::parse(1, "expected `fraction seed nnz_hidden`"));
    }
    let fraction: f64 = parts[0]
        .parse()
        .map_err(|_| Error::parse(1, "invalid fraction"))?;
    let seed: u64 = parts[1]
        .parse()
        .map_err(|_| Error::parse(1, "invalid seed"))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| Error::parse(1, "invalid hidden count"))?;
    let mut hidden = Vec::with_capacity(count);
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let pair = (|| Some((it.next()?.parse().ok()?, it.next()?.parse().ok()?)))()
            .ok_or_else(|| Error::parse(k + 2, "expected `row label`"))?;
        hidden.push(pair);
    }
    check_dim("manifest hidden count", count, hidden.len())?;
    Ok((fraction, seed, hidden))
}

/// Label–label co-occurrence `C = YᵀY`; `C_jj` is the support of label `j`.
pub fn build_label_cooccurrence(labels: &LabelMatrix) -> CooccurrenceMatrix {
    linalg::label_cooccurrence(labels)
}
