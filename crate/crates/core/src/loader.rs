//! Bulk ingestion: fvecs/bvecs vector files, CSV vertex files and CSV
//! embedding files whose vectors are separator-joined fields.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gvql::{LoadJob, LoadStmt, LoadTarget, LoadValue};
use crate::schema::{Catalog, Value};
use crate::storage::{Graph, WriteOp};

/// Operations per committed transaction.
pub const DEFAULT_BATCH: usize = 1024;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LoadReport {
    pub records: usize,
    pub vertices: usize,
    pub embeddings: usize,
    pub seconds: f64,
}

impl LoadReport {
    fn absorb(&mut self, o: &LoadReport) {
        self.records += o.records;
        self.vertices += o.vertices;
        self.embeddings += o.embeddings;
        self.seconds += o.seconds;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorFormat {
    /// Per record: `i32` dimension, then that many `f32`.
    Fvecs,
    /// Per record: `i32` dimension, then that many `u8`.
    Bvecs,
}

impl VectorFormat {
    pub fn from_path(path: &Path) -> Option<VectorFormat> {
        match path.extension()?.to_str()? {
            "fvecs" => Some(VectorFormat::Fvecs),
            "bvecs" => Some(VectorFormat::Bvecs),
            _ => None,
        }
    }
}

fn format_err(record: usize, message: impl Into<String>) -> Error {
    Error::Format {
        record,
        message: message.into(),
    }
}

pub fn read_vecs(r: impl Read, format: VectorFormat) -> Result<Vec<Vec<f32>>> {
    let mut r = BufReader::new(r);
    let mut out: Vec<Vec<f32>> = Vec::new();
    loop {
        let record = out.len();
        let dim = match r.read_i32::<LittleEndian>() {
            Ok(d) => d,
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        };
        if dim < 1 {
            return Err(format_err(record, format!("dimension {dim}")));
        }
        if let Some(first) = out.first() {
            if first.len() != dim as usize {
                return Err(format_err(
                    record,
                    format!(
                        "dimension {dim} differs from the first record's {}",
                        first.len()
                    ),
                ));
            }
        }
        let mut v = vec![0f32; dim as usize];
        let read = match format {
            VectorFormat::Fvecs => r.read_f32_into::<LittleEndian>(&mut v),
            VectorFormat::Bvecs => {
                let mut bytes = vec![0u8; dim as usize];
                let res = r.read_exact(&mut bytes);
                for (x, b) in v.iter_mut().zip(&bytes) {
                    *x = *b as f32;
                }
                res
            }
        };
        read.map_err(|e| match e.kind() {
            ErrorKind::UnexpectedEof => format_err(record, "truncated record"),
            _ => e.into(),
        })?;
        out.push(v);
    }
    Ok(out)
}

pub fn read_vecs_file(path: &Path, format: VectorFormat) -> Result<Vec<Vec<f32>>> {
    read_vecs(File::open(path)?, format)
}

pub fn write_fvecs(path: &Path, vectors: &[Vec<f32>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in vectors {
        w.write_i32::<LittleEndian>(v.len() as i32)?;
        for x in v {
            w.write_f32::<LittleEndian>(*x)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Commits `ops` in batches. A batch rejected for spanning partitions is
/// split in half and retried; a single operation never spans partitions.
pub fn commit_batched(graph: &Graph, ops: Vec<WriteOp>, batch: usize) -> Result<()> {
    fn commit(graph: &Graph, ops: Vec<WriteOp>) -> Result<()> {
        if ops.is_empty() {
            return Ok(());
        }
        match graph.write(ops.clone()) {
            Err(Error::CrossPartition(_)) if ops.len() > 1 => {
                let mut first = ops;
                let second = first.split_off(first.len() / 2);
                commit(graph, first)?;
                commit(graph, second)
            }
            r => r.map(|_| ()),
        }
    }
    let mut ops = ops;
    while !ops.is_empty() {
        let rest = ops.split_off(ops.len().min(batch.max(1)));
        commit(graph, ops)?;
        ops = rest;
    }
    Ok(())
}

/// Loads vectors as `vtype` vertices keyed `first_key + i`.
pub fn load_vectors(
    graph: &Graph,
    vtype: &str,
    attr: &str,
    vectors: &[Vec<f32>],
    first_key: i64,
) -> Result<LoadReport> {
    let started = Instant::now();
    let dim = graph.catalog().embedding(vtype, attr)?.meta.dimension;
    let mut ops = Vec::with_capacity(vectors.len() * 2);
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        let key = first_key + i as i64;
        ops.push(WriteOp::UpsertVertex {
            vtype: vtype.into(),
            key,
            attrs: Vec::new(),
        });
        ops.push(WriteOp::SetEmbedding {
            vtype: vtype.into(),
            key,
            attr: attr.into(),
            value: v.clone(),
        });
    }
    commit_batched(graph, ops, DEFAULT_BATCH)?;
    Ok(LoadReport {
        records: vectors.len(),
        vertices: vectors.len(),
        embeddings: vectors.len(),
        seconds: started.elapsed().as_secs_f64(),
    })
}

fn csv_records(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format_err(0, e.to_string()))?;
    let mut out = Vec::new();
    for (i, r) in rdr.records().enumerate() {
        out.push(r.map_err(|e| format_err(i, e.to_string()))?);
    }
    Ok(out)
}

/// Checks a LOAD statement against the catalog.
pub(crate) fn check_load(cat: &Catalog, l: &LoadStmt) -> Result<()> {
    match &l.target {
        LoadTarget::Vertex(t) => {
            let vt = cat.vertex_type(t)?;
            let mut has_key = false;
            for v in &l.values {
                let LoadValue::Column(c) = v else {
                    return Err(Error::Semantic(
                        "split() is only valid when loading embeddings".into(),
                    ));
                };
                if vt.attr(c).is_none() {
                    return Err(Error::UnknownAttribute {
                        vtype: t.clone(),
                        attr: c.clone(),
                    });
                }
                has_key |= vt.key.as_deref() == Some(c.as_str());
            }
            if !has_key {
                return Err(Error::Semantic(format!(
                    "LOAD to {t} must include its primary key"
                )));
            }
        }
        LoadTarget::Embedding { attr, vtype } => {
            cat.embedding(vtype, attr)?;
            if !matches!(
                l.values.as_slice(),
                [LoadValue::Column(_), LoadValue::Split { .. }]
            ) {
                return Err(Error::Semantic(
                    "embedding loads take VALUES (key, split(column, \"sep\"))".into(),
                ));
            }
        }
    }
    Ok(())
}

fn load_stmt(graph: &Graph, l: &LoadStmt, path: &Path) -> Result<LoadReport> {
    let started = Instant::now();
    let cat = graph.catalog();
    check_load(&cat, l)?;
    let records = csv_records(path)?;
    let mut ops = Vec::with_capacity(records.len());
    let mut report = LoadReport {
        records: records.len(),
        ..LoadReport::default()
    };
    match &l.target {
        LoadTarget::Vertex(t) => {
            let vt = cat.vertex_type(t)?;
            for (i, rec) in records.iter().enumerate() {
                if rec.len() != l.values.len() {
                    return Err(format_err(
                        i,
                        format!("expected {} fields, got {}", l.values.len(), rec.len()),
                    ));
                }
                let mut key = None;
                let mut attrs = Vec::new();
                for (field, v) in rec.iter().zip(&l.values) {
                    let LoadValue::Column(c) = v else {
                        unreachable!("checked")
                    };
                    let def = vt.attr(c).expect("checked");
                    let value = Value::parse_as(field, def.ty).ok_or_else(|| {
                        format_err(i, format!("`{field}` is not a valid {} for {c}", def.ty))
                    })?;
                    if vt.key.as_deref() == Some(c.as_str()) {
                        let Value::Int(k) = value else {
                            unreachable!("keys are INT")
                        };
                        key = Some(k);
                    } else {
                        attrs.push((c.clone(), value));
                    }
                }
                ops.push(WriteOp::UpsertVertex {
                    vtype: t.clone(),
                    key: key.expect("checked"),
                    attrs,
                });
            }
            report.vertices = records.len();
        }
        LoadTarget::Embedding { attr, vtype } => {
            let dim = cat.embedding(vtype, attr)?.meta.dimension;
            let [_, LoadValue::Split { sep, .. }] = l.values.as_slice() else {
                unreachable!("checked")
            };
            for (i, rec) in records.iter().enumerate() {
                if rec.len() != 2 {
                    return Err(format_err(
                        i,
                        format!("expected 2 fields, got {}", rec.len()),
                    ));
                }
                let key: i64 = rec[0]
                    .parse()
                    .map_err(|_| format_err(i, format!("`{}` is not an INT key", &rec[0])))?;
                let value = rec[1]
                    .split(sep.as_str())
                    .map(|x| x.trim().parse::<f32>())
                    .collect::<std::result::Result<Vec<f32>, _>>()
                    .map_err(|e| format_err(i, format!("bad vector component: {e}")))?;
                if value.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: value.len(),
                    });
                }
                ops.push(WriteOp::UpsertVertex {
                    vtype: vtype.clone(),
                    key,
                    attrs: Vec::new(),
                });
                ops.push(WriteOp::SetEmbedding {
                    vtype: vtype.clone(),
                    key,
                    attr: attr.clone(),
                    value,
                });
            }
            report.embeddings = records.len();
        }
    }
    commit_batched(graph, ops, DEFAULT_BATCH)?;
    report.seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

/// Runs every LOAD of `job`, binding its file variables through `files`.
pub fn run_job(
    graph: &Graph,
    job: &LoadJob,
    files: &BTreeMap<String, PathBuf>,
) -> Result<LoadReport> {
    let mut total = LoadReport::default();
    for l in &job.loads {
        let path = files
            .get(&l.file)
            .ok_or_else(|| Error::Validation(format!("no file bound to `{}`", l.file)))?;
        total.absorb(&load_stmt(graph, l, path)?);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{
        EmbeddingMeta, EmbeddingSource, IndexKind, Metric, ScalarType, VertexTypeDef,
    };

    fn graph() -> Graph {
        let g = Graph::in_memory();
        g.define_vertex_type(
            VertexTypeDef::new("Post")
                .key("id")
                .attr("author", ScalarType::String)
                .attr("content", ScalarType::String),
        )
        .unwrap();
        g.add_embedding_attribute(
            "Post",
            "content_emb",
            EmbeddingSource::Meta(EmbeddingMeta::new(2, "m", IndexKind::Flat, Metric::L2)),
        )
        .unwrap();
        g
    }

    #[test]
    fn fvecs_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.fvecs");
        let vs = vec![vec![0.1f32, -3.5e-7, f32::MAX], vec![1.0, 2.0, 3.0]];
        write_fvecs(&p, &vs).unwrap();
        let back = read_vecs_file(&p, VectorFormat::Fvecs).unwrap();
        assert_eq!(
            back.iter()
                .flatten()
                .map(|x| x.to_bits())
                .collect::<Vec<_>>(),
            vs.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn truncated_and_empty_files() {
        let mut bytes = Vec::new();
        bytes.write_i32::<LittleEndian>(4).unwrap();
        bytes.write_f32::<LittleEndian>(1.0).unwrap();
        assert!(matches!(
            read_vecs(&bytes[..], VectorFormat::Fvecs),
            Err(Error::Format { record: 0, .. })
        ));
        assert!(read_vecs(&[][..], VectorFormat::Fvecs).unwrap().is_empty());
        let mut b = Vec::new();
        b.write_i32::<LittleEndian>(2).unwrap();
        b.extend([7u8, 255]);
        assert_eq!(
            read_vecs(&b[..], VectorFormat::Bvecs).unwrap(),
            vec![vec![7.0, 255.0]]
        );
    }

    #[test]
    fn csv_and_split_vectors() {
        let dir = tempfile::tempdir().unwrap();
        let f1 = dir.path().join("f1.csv");
        let f2 = dir.path().join("f2.csv");
        std::fs::write(&f1, "7,Alice,hello\n").unwrap();
        std::fs::write(&f2, "7, 0.1:0.2\n").unwrap();
        let g = graph();
        let job = LoadJob {
            name: "j1".into(),
            graph: "g1".into(),
            loads: vec![
                LoadStmt {
                    file: "f1".into(),
                    target: LoadTarget::Vertex("Post".into()),
                    values: ["id", "author", "content"]
                        .map(|c| LoadValue::Column(c.into()))
                        .to_vec(),
                },
                LoadStmt {
                    file: "f2".into(),
                    target: LoadTarget::Embedding {
                        attr: "content_emb".into(),
                        vtype: "Post".into(),
                    },
                    values: vec![
                        LoadValue::Column("id".into()),
                        LoadValue::Split {
                            column: "content_emb".into(),
                            sep: ":".into(),
                        },
                    ],
                },
            ],
        };
        let files = BTreeMap::from([("f1".to_string(), f1), ("f2".to_string(), f2)]);
        let r = run_job(&g, &job, &files).unwrap();
        assert_eq!((r.records, r.vertices, r.embeddings), (2, 1, 1));
        let view = g.read();
        let v = view.lookup("Post", 7).unwrap();
        assert_eq!(view.attr(v, "author"), Some(Value::Str("Alice".into())));
        assert_eq!(view.attr(v, "content"), Some(Value::Str("hello".into())));
        assert_eq!(
            view.get_embedding(v, "content_emb").unwrap(),
            Some(vec![0.1, 0.2])
        );
    }

    #[test]
    fn dimension_is_checked() {
        let g = graph();
        assert!(matches!(
            load_vectors(&g, "Post", "content_emb", &[vec![1.0, 2.0, 3.0]], 0),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 3
            })
        ));
        let r = load_vectors(&g, "Post", "content_emb", &[], 0).unwrap();
        assert_eq!(r.records, 0);
    }

    #[test]
    fn batches_split_across_partitions() {
        let g = Graph::open(
            crate::storage::GraphConfig::in_memory()
                .with_segment_capacity(4)
                .with_partitions(3),
        )
        .unwrap();
        g.define_vertex_type(VertexTypeDef::new("V").key("id"))
            .unwrap();
        g.add_embedding_attribute(
            "V",
            "e",
            EmbeddingSource::Meta(EmbeddingMeta::new(1, "m", IndexKind::Flat, Metric::L2)),
        )
        .unwrap();
        let vs: Vec<Vec<f32>> = (0..50).map(|i| vec![i as f32]).collect();
        load_vectors(&g, "V", "e", &vs, 100).unwrap();
        let view = g.read();
        for i in 0..50 {
            assert_eq!(
                view.get_embedding_by_key("V", 100 + i, "e").unwrap(),
                Some(vec![i as f32])
            );
        }
    }
}
