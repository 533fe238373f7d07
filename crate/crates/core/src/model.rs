//! Binary model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "EXMLDS\0M"
//! version  u32
//! count    u32      number of sections
//! section  repeated `count` times:
//!   name_len u32, name (UTF-8)
//!   kind     u8     1 = f64, 2 = i64
//!   rank     u8
//!   dims     u64 × rank
//!   len      u64    payload bytes, 8 × product of dims
//!   payload
//! ```
//!
//! The section names and their contents are listed in `docs/model-format.md`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::cluster::ClusterModel;
use crate::config::{Algorithm, HyperParams};
use crate::embed::Similarity;
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, LabelMatrix};
use crate::predict::{ClusterPart, TrainedModel};
use crate::regress::Regressor;
use crate::sppmi::JointWeights;

pub const MAGIC: [u8; 8] = *b"EXMLDS\0M";
pub const FORMAT_VERSION: u32 = 1;

const KIND_F64: u8 = 1;
const KIND_I64: u8 = 2;
/// Guards allocation when reading corrupt headers.
const MAX_SECTION_BYTES: u64 = 1 << 40;

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Real(Vec<f64>),
    Int(Vec<i64>),
}

/// One named array with its shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub name: String,
    pub dims: Vec<u64>,
    pub payload: Payload,
}

impl Section {
    fn real(name: impl Into<String>, dims: &[usize], data: Vec<f64>) -> Self {
        Section {
            name: name.into(),
            dims: dims.iter().map(|&d| d as u64).collect(),
            payload: Payload::Real(data),
        }
    }

    fn int(name: impl Into<String>, data: Vec<i64>) -> Self {
        Section {
            name: name.into(),
            dims: vec![data.len() as u64],
            payload: Payload::Int(data),
        }
    }

    fn len(&self) -> usize {
        match &self.payload {
            Payload::Real(v) => v.len(),
            Payload::Int(v) => v.len(),
        }
    }

    /// Serialized bytes of this section.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.name.len() as u32).to_le_bytes());
        out.extend_from_slice(self.name.as_bytes());
        let (kind, bytes): (u8, Vec<u8>) = match &self.payload {
            Payload::Real(v) => (KIND_F64, v.iter().flat_map(|x| x.to_le_bytes()).collect()),
            Payload::Int(v) => (KIND_I64, v.iter().flat_map(|x| x.to_le_bytes()).collect()),
        };
        out.push(kind);
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
        out.extend_from_slice(&bytes);
        out
    }
}

pub fn write_sections(mut w: impl Write, sections: &[Section]) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(sections.len() as u32).to_le_bytes())?;
    for s in sections {
        w.write_all(&s.to_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated file".into()),
        _ => Error::Io(e),
    })?;
    Ok(b)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

pub fn read_sections(mut r: impl Read) -> Result<Vec<Section>> {
    if read_array::<8>(&mut r)? != MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let count = read_u32(&mut r)?;
    let mut sections = Vec::new();
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        if name_len > 4096 {
            return Err(Error::Format(format!("section name of {name_len} bytes")));
        }
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Format("section name is not UTF-8".into()))?;
        let [kind, rank] = read_array::<2>(&mut r)?;
        let dims: Vec<u64> = (0..rank).map(|_| read_u64(&mut r)).collect::<Result<_>>()?;
        let len = read_u64(&mut r)?;
        let expected = dims
            .iter()
            .try_fold(8u64, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format(format!("section {name}: shape overflows")))?;
        if len != expected || len > MAX_SECTION_BYTES {
            return Err(Error::Format(format!(
                "section {name}: payload of {len} bytes does not match shape {dims:?}"
            )));
        }
        let mut bytes = vec![0u8; len as usize];
        r.read_exact(&mut bytes)
            .map_err(|_| Error::Format(format!("section {name} truncated")))?;
        let words = bytes
            .chunks_exact(8)
            .map(|c| <[u8; 8]>::try_from(c).unwrap());
        let payload = match kind {
            KIND_F64 => Payload::Real(words.map(f64::from_le_bytes).collect()),
            KIND_I64 => Payload::Int(words.map(i64::from_le_bytes).collect()),
            k => return Err(Error::Format(format!("section {name}: unknown kind {k}"))),
        };
        sections.push(Section {
            name,
            dims,
            payload,
        });
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after last section".into()));
    }
    Ok(sections)
}

fn similarity_code(s: Similarity) -> i64 {
    match s {
        Similarity::Dot => 0,
        Similarity::Cosine => 1,
    }
}

fn similarity_from(c: i64) -> Result<Similarity> {
    match c {
        0 => Ok(Similarity::Dot),
        1 => Ok(Similarity::Cosine),
        _ => Err(Error::Format(format!("unknown similarity code {c}"))),
    }
}

fn label_arrays(l: &LabelMatrix) -> (Vec<i64>, Vec<i64>) {
    let mut indptr = vec![0i64];
    let mut indices = Vec::with_capacity(l.nnz());
    for row in l.row_iter() {
        indices.extend(row.iter().map(|&v| v as i64));
        indptr.push(indices.len() as i64);
    }
    (indptr, indices)
}

/// Flattens a model into its sections, in file order.
pub fn model_sections(m: &TrainedModel) -> Vec<Section> {
    let p = &m.params;
    let ints = vec![
        p.algo.code(),
        p.dim as i64,
        p.k_context as i64,
        p.k_predict as i64,
        p.top_p as i64,
        p.negatives as i64,
        p.clusters.map_or(0, |c| c as i64),
        p.cluster_iters as i64,
        p.iterations as i64,
        p.seed as i64,
        similarity_code(p.similarity),
        p.knn_sparsify as i64,
        p.zero_diagonal as i64,
    ];
    let reals = vec![
        p.shift,
        p.mu.mu1,
        p.mu.mu2,
        p.mu.mu3,
        p.lambda.unwrap_or(f64::NAN),
        p.learning_rate,
    ];
    let k = m.clusters.num_clusters();
    let mut s = vec![
        Section::int("params.int", ints),
        Section::real("params.real", &[reals.len()], reals),
        Section::int(
            "model.shape",
            vec![m.num_features as i64, m.num_labels as i64, k as i64],
        ),
        Section::real(
            "clusters.centroids",
            &[k, m.num_features],
            m.clusters.centroids.as_slice().to_vec(),
        ),
        Section::int(
            "clusters.assignments",
            m.clusters.assignments.iter().map(|&a| a as i64).collect(),
        ),
    ];
    for (c, part) in m.parts.iter().enumerate() {
        let v = &part.regressor.v;
        s.push(Section::real(
            format!("cluster.{c}.v"),
            &[v.rows(), v.cols()],
            v.as_slice().to_vec(),
        ));
        s.push(Section::real(
            format!("cluster.{c}.lambda"),
            &[1],
            vec![part.regressor.lambda],
        ));
        s.push(Section::real(
            format!("cluster.{c}.z"),
            &[part.embeddings.rows(), part.embeddings.cols()],
            part.embeddings.as_slice().to_vec(),
        ));
        s.push(Section::int(
            format!("cluster.{c}.members"),
            part.members.iter().map(|&i| i as i64).collect(),
        ));
        let (indptr, indices) = label_arrays(&part.labels);
        s.push(Section::int(format!("cluster.{c}.labels.indptr"), indptr));
        s.push(Section::int(format!("cluster.{c}.labels.indices"), indices));
        if let Some(z2) = &part.label_embeddings {
            s.push(Section::real(
                format!("cluster.{c}.z2"),
                &[z2.rows(), z2.cols()],
                z2.as_slice().to_vec(),
            ));
        }
    }
    s
}

pub fn write_model(w: impl Write, m: &TrainedModel) -> Result<()> {
    write_sections(w, &model_sections(m))
}

pub fn save_model(path: impl AsRef<Path>, m: &TrainedModel) -> Result<()> {
    write_model(BufWriter::new(File::create(path)?), m)
}

struct Sections(BTreeMap<String, Section>);

impl Sections {
    fn take(&mut self, name: &str) -> Result<Section> {
        self.0
            .remove(name)
            .ok_or_else(|| Error::Format(format!("missing section {name}")))
    }

    fn ints(&mut self, name: &str, len: Option<usize>) -> Result<Vec<i64>> {
        let s = self.take(name)?;
        let n = s.len();
        match s.payload {
            Payload::Int(v) if len.is_none_or(|l| l == n) => Ok(v),
            Payload::Int(_) => Err(Error::Format(format!(
                "section {name}: {n} entries, expected {}",
                len.unwrap()
            ))),
            Payload::Real(_) => Err(Error::Format(format!("section {name}: expected integers"))),
        }
    }

    fn indices(&mut self, name: &str, len: Option<usize>) -> Result<Vec<usize>> {
        self.ints(name, len)?
            .into_iter()
            .map(|v| {
                usize::try_from(v)
                    .map_err(|_| Error::Format(format!("section {name}: negative index {v}")))
            })
            .collect()
    }

    fn reals(&mut self, name: &str, len: usize) -> Result<Vec<f64>> {
        let s = self.take(name)?;
        match s.payload {
            Payload::Real(v) if v.len() == len => Ok(v),
            Payload::Real(v) => Err(Error::Format(format!(
                "section {name}: {} entries, expected {len}",
                v.len()
            ))),
            Payload::Int(_) => Err(Error::Format(format!("section {name}: expected reals"))),
        }
    }

    fn matrix(
        &mut self,
        name: &str,
        rows: Option<usize>,
        cols: Option<usize>,
    ) -> Result<DenseMatrix> {
        let s = self.take(name)?;
        let [r, c] = s.dims[..] else {
            return Err(Error::Format(format!("section {name}: expected a matrix")));
        };
        let (r, c) = (r as usize, c as usize);
        if rows.is_some_and(|x| x != r) || cols.is_some_and(|x| x != c) {
            return Err(Error::Format(format!(
                "section {name}: shape {r}x{c}, expected {}x{}",
                rows.map_or("?".into(), |x| x.to_string()),
                cols.map_or("?".into(), |x| x.to_string())
            )));
        }
        match s.payload {
            Payload::Real(v) => DenseMatrix::from_vec(r, c, v),
            Payload::Int(_) => Err(Error::Format(format!("section {name}: expected reals"))),
        }
    }
}

fn count(v: i64, what: &str) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Format(format!("negative {what}: {v}")))
}

/// Rebuilds a model from its sections, checking every dimension.
pub fn model_from_sections(sections: Vec<Section>) -> Result<TrainedModel> {
    let mut map = BTreeMap::new();
    for s in sections {
        if let Some(dup) = map.insert(s.name.clone(), s) {
            return Err(Error::Format(format!("duplicate section {}", dup.name)));
        }
    }
    let mut s = Sections(map);
    let ints = s.ints("params.int", Some(13))?;
    let reals = s.reals("params.real", 6)?;
    let clusters_param = count(ints[6], "cluster count")?;
    let params = HyperParams {
        algo: Algorithm::from_code(ints[0])?,
        dim: count(ints[1], "dimension")?,
        k_context: count(ints[2], "k_context")?,
        k_predict: count(ints[3], "k_predict")?,
        top_p: count(ints[4], "top_p")?,
        negatives: count(ints[5], "negatives")?,
        clusters: (clusters_param > 0).then_some(clusters_param),
        cluster_iters: count(ints[7], "cluster iterations")?,
        iterations: count(ints[8], "iterations")?,
        seed: ints[9] as u64,
        similarity: similarity_from(ints[10])?,
        knn_sparsify: ints[11] != 0,
        zero_diagonal: ints[12] != 0,
        shift: reals[0],
        mu: JointWeights {
            mu1: reals[1],
            mu2: reals[2],
            mu3: reals[3],
        },
        lambda: (!reals[4].is_nan()).then_some(reals[4]),
        learning_rate: reals[5],
    };
    params
        .validate()
        .map_err(|e| Error::Format(format!("stored parameters: {e}")))?;
    let shape = s.ints("model.shape", Some(3))?;
    let num_features = count(shape[0], "feature count")?;
    let num_labels = count(shape[1], "label count")?;
    let k = count(shape[2], "cluster count")?;
    let centroids = s.matrix("clusters.centroids", Some(k), Some(num_features))?;
    let assignments = s.indices("clusters.assignments", None)?;
    let clusters = ClusterModel {
        centroids,
        assignments,
    };
    clusters.validate()?;
    let mut parts = Vec::with_capacity(k);
    for c in 0..k {
        let v = s.matrix(&format!("cluster.{c}.v"), None, Some(num_features))?;
        let lambda = s.reals(&format!("cluster.{c}.lambda"), 1)?[0];
        let members = s.indices(&format!("cluster.{c}.members"), None)?;
        let embeddings = s.matrix(
            &format!("cluster.{c}.z"),
            Some(members.len()),
            Some(v.rows()),
        )?;
        let indptr = s.indices(
            &format!("cluster.{c}.labels.indptr"),
            Some(members.len() + 1),
        )?;
        let indices = s.ints(&format!("cluster.{c}.labels.indices"), None)?;
        if indptr[0] != 0
            || indptr.windows(2).any(|w| w[0] > w[1])
            || indptr[members.len()] != indices.len()
        {
            return Err(Error::Format(format!(
                "cluster {c}: malformed label offsets"
            )));
        }
        let rows = indptr
            .windows(2)
            .map(|w| {
                indices[w[0]..w[1]]
                    .iter()
                    .map(|&l| {
                        u32::try_from(l).map_err(|_| Error::Format(format!("label index {l}")))
                    })
                    .collect::<Result<Vec<u32>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let labels = LabelMatrix::from_rows(num_labels, rows)?;
        let z2_name = format!("cluster.{c}.z2");
        let label_embeddings = if s.0.contains_key(&z2_name) {
            Some(s.matrix(&z2_name, Some(num_labels), Some(v.rows()))?)
        } else {
            None
        };
        parts.push(ClusterPart {
            regressor: Regressor {
                v,
                lambda,
                similarity: params.similarity,
            },
            embeddings,
            members,
            labels,
            label_embeddings,
        });
    }
    if let Some(extra) = s.0.keys().next() {
        return Err(Error::Format(format!("unexpected section {extra}")));
    }
    let model = TrainedModel {
        params,
        clusters,
        parts,
        num_features,
        num_labels,
    };
    model.validate()?;
    Ok(model)
}

pub fn read_model(r: impl Read) -> Result<TrainedModel> {
    model_from_sections(read_sections(r)?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    read_model(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::linalg::SparseMatrix;
    use crate::train::{train, TrainOptions};

    fn model(algo: Algorithm) -> TrainedModel {
        let x = SparseMatrix::from_dense(&DenseMatrix::from_fn(10, 4, |i, j| {
            ((i * 7 + j * 3) % 5) as f64
        }));
        let y = LabelMatrix::from_rows(3, (0..10).map(|i| vec![(i % 3) as u32]).collect()).unwrap();
        let params = HyperParams {
            algo,
            dim: 2,
            k_context: 2,
            negatives: 2,
            shift: 1.0,
            iterations: 2,
            clusters: Some(2),
            ..HyperParams::default()
        };
        train(
            &Dataset::new(x, y).unwrap(),
            &params,
            None,
            &TrainOptions::default(),
        )
        .unwrap()
        .0
    }

    #[test]
    fn round_trip_every_algorithm() {
        for algo in Algorithm::ALL {
            let m = model(algo);
            let mut buf = Vec::new();
            write_model(&mut buf, &m).unwrap();
            let back = read_model(&buf[..]).unwrap();
            assert_eq!(back, m);
            let mut again = Vec::new();
            write_model(&mut again, &back).unwrap();
            assert_eq!(again, buf);
        }
    }

    #[test]
    fn rejects_corruption() {
        let m = model(Algorithm::Exmlds1);
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_model(&bad[..]), Err(Error::Format(_))));
        assert!(matches!(
            read_model(&buf[..buf.len() - 3]),
            Err(Error::Format(_))
        ));
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_model(&extra[..]).is_err());
        let mut ver = buf.clone();
        ver[8] = 9;
        assert!(read_model(&ver[..]).is_err());
    }

    #[test]
    fn shape_mismatch_is_caught() {
        let m = model(Algorithm::Exmlds1);
        let mut sections = model_sections(&m);
        let z = sections
            .iter_mut()
            .find(|s| s.name == "cluster.0.z")
            .unwrap();
        z.dims[0] += 1;
        if let Payload::Real(v) = &mut z.payload {
            v.extend([0.0, 0.0]);
        }
        assert!(model_from_sections(sections).is_err());
    }
}
