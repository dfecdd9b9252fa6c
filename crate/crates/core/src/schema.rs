//! Catalog of vertex types, edge types, embedding attributes and embedding spaces.
//!
//! Embedding attributes carry an [`EmbeddingMeta`]. Two attributes may be searched
//! together only when their metadata agree on everything except the index kind;
//! [`Catalog::check_compatibility`] enforces that before a query runs.

use std::fmt;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TypeId = u32;
pub type EdgeTypeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScalarType {
    Int,
    Float,
    String,
    Bool,
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalarType::Int => "INT",
            ScalarType::Float => "FLOAT",
            ScalarType::String => "STRING",
            ScalarType::Bool => "BOOL",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl Value {
    pub fn scalar_type(&self) -> ScalarType {
        match self {
            Value::Int(_) => ScalarType::Int,
            Value::Float(_) => ScalarType::Float,
            Value::Str(_) => ScalarType::String,
            Value::Bool(_) => ScalarType::Bool,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    /// Coerces to `ty` where lossless enough for loading (INT into FLOAT columns).
    pub fn coerce(self, ty: ScalarType) -> Option<Value> {
        match (self, ty) {
            (Value::Int(i), ScalarType::Float) => Some(Value::Float(i as f64)),
            (v, t) if v.scalar_type() == t => Some(v),
            _ => None,
        }
    }

    pub fn parse_as(text: &str, ty: ScalarType) -> Option<Value> {
        let t = text.trim();
        match ty {
            ScalarType::Int => t.parse().ok().map(Value::Int),
            ScalarType::Float => t.parse().ok().map(Value::Float),
            ScalarType::String => Some(Value::Str(text.to_string())),
            ScalarType::Bool => match t.to_ascii_lowercase().as_str() {
                "true" | "1" => Some(Value::Bool(true)),
                "false" | "0" => Some(Value::Bool(false)),
                _ => None,
            },
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Bool(b) => write!(f, "{}", if *b { "TRUE" } else { "FALSE" }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IndexKind {
    Hnsw,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DataType {
    Float32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    L2,
    Cosine,
    InnerProduct,
}

impl Metric {
    /// Distance between two stored vectors. Smaller is closer.
    ///
    /// COSINE assumes both sides were normalized by [`Metric::prepare`].
    #[inline]
    pub fn distance(self, a: &[f32], b: &[f32]) -> f32 {
        match self {
            Metric::L2 => l2(a, b),
            Metric::Cosine => 1.0 - dot(a, b),
            Metric::InnerProduct => -dot(a, b),
        }
    }

    /// Brings a vector into stored form. Only COSINE changes anything.
    pub fn prepare(self, v: &mut [f32]) {
        if self == Metric::Cosine {
            normalize(v);
        }
    }

    pub fn prepared(self, v: &[f32]) -> Vec<f32> {
        let mut out = v.to_vec();
        self.prepare(&mut out);
        out
    }

    /// INNER_PRODUCT distances are unbounded below and cannot back a range predicate.
    pub fn supports_range(self) -> bool {
        self != Metric::InnerProduct
    }
}

#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut s = 0.0f32;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub fn l2(a: &[f32], b: &[f32]) -> f32 {
    let mut s = 0.0f32;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s.sqrt()
}

pub fn normalize(v: &mut [f32]) {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

macro_rules! keyword_display {
    ($ty:ty { $($variant:path => $text:literal),* $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $text),* })
            }
        }
    };
}

keyword_display!(Metric { Metric::L2 => "L2", Metric::Cosine => "COSINE", Metric::InnerProduct => "INNER_PRODUCT" });
keyword_display!(IndexKind { IndexKind::Hnsw => "HNSW", IndexKind::Flat => "FLAT" });
keyword_display!(DataType { DataType::Float32 => "FLOAT" });

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub dimension: usize,
    pub model: String,
    pub index_kind: IndexKind,
    pub datatype: DataType,
    pub metric: Metric,
}

impl EmbeddingMeta {
    pub fn new(
        dimension: usize,
        model: impl Into<String>,
        index_kind: IndexKind,
        metric: Metric,
    ) -> Self {
        Self {
            dimension,
            model: model.into(),
            index_kind,
            datatype: DataType::Float32,
            metric,
        }
    }

    /// Errors with the first field that differs, ignoring the index kind.
    pub fn compatible_with(&self, other: &EmbeddingMeta) -> Result<()> {
        if self.dimension != other.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: other.dimension,
            });
        }
        if self.model != other.model {
            return Err(Error::ModelMismatch {
                left: self.model.clone(),
                right: other.model.clone(),
            });
        }
        if self.datatype != other.datatype {
            return Err(Error::DatatypeMismatch {
                left: self.datatype.to_string(),
                right: other.datatype.to_string(),
            });
        }
        if self.metric != other.metric {
            return Err(Error::MetricMismatch {
                left: self.metric.to_string(),
                right: other.metric.to_string(),
            });
        }
        Ok(())
    }

    pub fn is_compatible(&self, other: &EmbeddingMeta) -> bool {
        self.compatible_with(other).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSpace {
    pub name: String,
    pub meta: EmbeddingMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttrDef {
    pub name: String,
    pub ty: ScalarType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingAttr {
    pub name: String,
    pub meta: EmbeddingMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexType {
    pub id: TypeId,
    pub name: String,
    /// Name of the primary-key attribute. When present it is an INT attribute
    /// whose value is the vertex's external id.
    pub key: Option<String>,
    pub attributes: Vec<AttrDef>,
    pub embeddings: Vec<EmbeddingAttr>,
}

impl VertexType {
    pub fn attr_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn attr(&self, name: &str) -> Option<&AttrDef> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn embedding(&self, name: &str) -> Option<&EmbeddingAttr> {
        self.embeddings.iter().find(|e| e.name == name)
    }

    fn has_name(&self, name: &str) -> bool {
        self.attr(name).is_some() || self.embedding(name).is_some()
    }
}

/// Input to [`Catalog::define_vertex_type`].
#[derive(Debug, Clone, Default)]
pub struct VertexTypeDef {
    pub name: String,
    pub key: Option<String>,
    pub attributes: Vec<(String, ScalarType)>,
}

impl VertexTypeDef {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn key(mut self, name: impl Into<String>) -> Self {
        let name = name.into();
        self.attributes.push((name.clone(), ScalarType::Int));
        self.key = Some(name);
        self
    }

    pub fn attr(mut self, name: impl Into<String>, ty: ScalarType) -> Self {
        self.attributes.push((name.into(), ty));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeType {
    pub id: EdgeTypeId,
    pub name: String,
    /// `(from, to)` vertex type pairs this edge type may connect.
    pub endpoints: Vec<(String, String)>,
    pub directed: bool,
}

impl EdgeType {
    pub fn connects(&self, from: &str, to: &str) -> bool {
        self.endpoints
            .iter()
            .any(|(f, t)| f == from && t == to || !self.directed && f == to && t == from)
    }

    /// The endpoint pair, when the edge type has exactly one.
    pub fn single_pair(&self) -> Option<(&str, &str)> {
        match self.endpoints.as_slice() {
            [(f, t)] => Some((f, t)),
            _ => None,
        }
    }
}

/// Where the metadata of a new embedding attribute comes from.
#[derive(Debug, Clone)]
pub enum EmbeddingSource {
    Meta(EmbeddingMeta),
    Space(String),
}

/// Reference to one embedding attribute: `(vertex type, attribute)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AttrRef {
    pub vtype: String,
    pub attr: String,
}

impl AttrRef {
    pub fn new(vtype: impl Into<String>, attr: impl Into<String>) -> Self {
        Self {
            vtype: vtype.into(),
            attr: attr.into(),
        }
    }
}

impl fmt::Display for AttrRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.vtype, self.attr)
    }
}

/// Result of a successful compatibility check.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibleSet {
    pub meta: EmbeddingMeta,
    pub attrs: Vec<(TypeId, String)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub epoch: u64,
    pub vertex_types: Vec<VertexType>,
    pub edge_types: Vec<EdgeType>,
    pub spaces: Vec<EmbeddingSpace>,
}

impl Catalog {
    pub fn vertex_type(&self, name: &str) -> Result<&VertexType> {
        self.vertex_types
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::UnknownType(name.to_string()))
    }

    pub fn vertex_type_by_id(&self, id: TypeId) -> &VertexType {
        &self.vertex_types[id as usize]
    }

    pub fn edge_type(&self, name: &str) -> Result<&EdgeType> {
        self.edge_types
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::UnknownEdgeType(name.to_string()))
    }

    pub fn edge_type_by_id(&self, id: EdgeTypeId) -> &EdgeType {
        &self.edge_types[id as usize]
    }

    pub fn space(&self, name: &str) -> Result<&EmbeddingSpace> {
        self.spaces
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::UnknownSpace(name.to_string()))
    }

    pub fn embedding(&self, vtype: &str, attr: &str) -> Result<&EmbeddingAttr> {
        self.vertex_type(vtype)?
            .embedding(attr)
            .ok_or_else(|| Error::UnknownAttribute {
                vtype: vtype.to_string(),
                attr: attr.to_string(),
            })
    }

    fn type_name_taken(&self, name: &str) -> bool {
        self.vertex_types.iter().any(|t| t.name == name)
            || self.edge_types.iter().any(|t| t.name == name)
    }

    pub fn define_vertex_type(&mut self, def: VertexTypeDef) -> Result<TypeId> {
        if self.type_name_taken(&def.name) {
            return Err(Error::DuplicateType(def.name));
        }
        let mut attributes: Vec<AttrDef> = Vec::with_capacity(def.attributes.len());
        for (name, ty) in def.attributes {
            if attributes.iter().any(|a| a.name == name) {
                return Err(Error::BadAttribute(format!(
                    "`{name}` declared twice on `{}`",
                    def.name
                )));
            }
            attributes.push(AttrDef { name, ty });
        }
        if let Some(key) = &def.key {
            match attributes.iter().find(|a| &a.name == key) {
                Some(a) if a.ty == ScalarType::Int => {}
                Some(_) => {
                    return Err(Error::BadAttribute(format!(
                        "primary key `{key}` must be INT"
                    )))
                }
                None => {
                    return Err(Error::BadAttribute(format!(
                        "primary key `{key}` is not an attribute"
                    )))
                }
            }
        }
        let id = self.vertex_types.len() as TypeId;
        self.vertex_types.push(VertexType {
            id,
            name: def.name,
            key: def.key,
            attributes,
            embeddings: Vec::new(),
        });
        self.epoch += 1;
        Ok(id)
    }

    pub fn define_edge_type(
        &mut self,
        name: impl Into<String>,
        endpoints: &[(&str, &str)],
        directed: bool,
    ) -> Result<EdgeTypeId> {
        let name = name.into();
        if self.type_name_taken(&name) {
            return Err(Error::DuplicateType(name));
        }
        if endpoints.is_empty() {
            return Err(Error::BadAttribute(format!(
                "edge type {name} needs at least one FROM/TO pair"
            )));
        }
        for (f, t) in endpoints {
            self.vertex_type(f)?;
            self.vertex_type(t)?;
        }
        let id = self.edge_types.len() as EdgeTypeId;
        self.edge_types.push(EdgeType {
            id,
            name,
            endpoints: endpoints
                .iter()
                .map(|(f, t)| (f.to_string(), t.to_string()))
                .collect(),
            directed,
        });
        self.epoch += 1;
        Ok(id)
    }

    pub fn create_embedding_space(
        &mut self,
        name: impl Into<String>,
        meta: EmbeddingMeta,
    ) -> Result<()> {
        let name = name.into();
        if self.spaces.iter().any(|s| s.name == name) {
            return Err(Error::DuplicateSpace(name));
        }
        validate_meta(&meta)?;
        self.spaces.push(EmbeddingSpace { name, meta });
        self.epoch += 1;
        Ok(())
    }

    pub fn add_embedding_attribute(
        &mut self,
        vtype: &str,
        attr: &str,
        source: EmbeddingSource,
    ) -> Result<()> {
        let (meta, space) = match source {
            EmbeddingSource::Meta(m) => (m, None),
            EmbeddingSource::Space(s) => (self.space(&s)?.meta.clone(), Some(s)),
        };
        validate_meta(&meta)?;
        let idx = self.vertex_type(vtype)?.id as usize;
        let t = &mut self.vertex_types[idx];
        if t.has_name(attr) {
            return Err(Error::DuplicateAttribute {
                vtype: vtype.to_string(),
                attr: attr.to_string(),
            });
        }
        t.embeddings.push(EmbeddingAttr {
            name: attr.to_string(),
            meta,
            space,
        });
        self.epoch += 1;
        Ok(())
    }

    /// Static check that all listed embedding attributes can be searched together.
    pub fn check_compatibility(&self, attrs: &[AttrRef]) -> Result<CompatibleSet> {
        let Some(first) = attrs.first() else {
            return Err(Error::Semantic(
                "vector search needs at least one embedding attribute".into(),
            ));
        };
        let meta = self.embedding(&first.vtype, &first.attr)?.meta.clone();
        let mut out = Vec::with_capacity(attrs.len());
        for a in attrs {
            let e = self.embedding(&a.vtype, &a.attr)?;
            meta.compatible_with(&e.meta)?;
            out.push((self.vertex_type(&a.vtype)?.id, a.attr.clone()));
        }
        Ok(CompatibleSet { meta, attrs: out })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }
}

fn validate_meta(meta: &EmbeddingMeta) -> Result<()> {
    if meta.dimension == 0 {
        return Err(Error::BadAttribute(
            "embedding DIMENSION must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Catalog shared between threads. Readers take cheap `Arc` snapshots; writers
/// serialize on an internal mutex and publish a new version.
#[derive(Debug, Default)]
pub struct CatalogHandle {
    current: RwLock<Arc<Catalog>>,
    writer: Mutex<()>,
}

impl CatalogHandle {
    pub fn new(catalog: Catalog) -> Self {
        Self {
            current: RwLock::new(Arc::new(catalog)),
            writer: Mutex::new(()),
        }
    }

    pub fn snapshot(&self) -> Arc<Catalog> {
        self.current.read().clone()
    }

    /// Applies `f` to a copy of the catalog and publishes it if `f` succeeds.
    pub fn update<T>(&self, f: impl FnOnce(&mut Catalog) -> Result<T>) -> Result<T> {
        let _guard = self.writer.lock();
        let mut next = (*self.snapshot()).clone();
        let out = f(&mut next)?;
        *self.current.write() = Arc::new(next);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gpt4(dim: usize) -> EmbeddingMeta {
        EmbeddingMeta::new(dim, "GPT4", IndexKind::Hnsw, Metric::Cosine)
    }

    fn post_def() -> VertexTypeDef {
        VertexTypeDef::new("Post")
            .key("id")
            .attr("author", ScalarType::String)
            .attr("content", ScalarType::String)
    }

    #[test]
    fn define_post_type() {
        let mut c = Catalog::default();
        assert_eq!(c.define_vertex_type(post_def()).unwrap(), 0);
        let t = c.vertex_type("Post").unwrap();
        assert_eq!(t.attributes.len(), 3);
        assert_eq!(t.key.as_deref(), Some("id"));
    }

    #[test]
    fn key_only_type_is_fine() {
        let mut c = Catalog::default();
        c.define_vertex_type(VertexTypeDef::new("Tag").key("id"))
            .unwrap();
    }

    #[test]
    fn redefinition_is_rejected() {
        let mut c = Catalog::default();
        c.define_vertex_type(post_def()).unwrap();
        assert!(matches!(
            c.define_vertex_type(post_def()),
            Err(Error::DuplicateType(_))
        ));
    }

    #[test]
    fn bad_attributes() {
        let mut c = Catalog::default();
        let dup = VertexTypeDef::new("A")
            .attr("x", ScalarType::Int)
            .attr("x", ScalarType::Int);
        assert!(matches!(
            c.define_vertex_type(dup),
            Err(Error::BadAttribute(_))
        ));
        let mut def = VertexTypeDef::new("B").attr("name", ScalarType::String);
        def.key = Some("name".into());
        assert!(matches!(
            c.define_vertex_type(def),
            Err(Error::BadAttribute(_))
        ));
    }

    #[test]
    fn embedding_attribute_and_space() {
        let mut c = Catalog::default();
        c.define_vertex_type(post_def()).unwrap();
        c.define_vertex_type(VertexTypeDef::new("Comment").key("id"))
            .unwrap();
        c.add_embedding_attribute("Post", "content_emb", EmbeddingSource::Meta(gpt4(1024)))
            .unwrap();
        assert!(matches!(
            c.add_embedding_attribute("Post", "content_emb", EmbeddingSource::Meta(gpt4(1024))),
            Err(Error::DuplicateAttribute { .. })
        ));
        c.create_embedding_space("GPT4_emb_space", gpt4(1024))
            .unwrap();
        c.add_embedding_attribute(
            "Comment",
            "content_emb",
            EmbeddingSource::Space("GPT4_emb_space".into()),
        )
        .unwrap();
        assert_eq!(
            c.embedding("Comment", "content_emb").unwrap().meta,
            c.space("GPT4_emb_space").unwrap().meta
        );
        assert!(matches!(
            c.add_embedding_attribute("Comment", "x", EmbeddingSource::Space("nope".into())),
            Err(Error::UnknownSpace(_))
        ));
        assert!(matches!(
            c.add_embedding_attribute("Nope", "x", EmbeddingSource::Meta(gpt4(4))),
            Err(Error::UnknownType(_))
        ));
    }

    #[test]
    fn compatibility() {
        let mut c = Catalog::default();
        c.define_vertex_type(post_def()).unwrap();
        c.define_vertex_type(VertexTypeDef::new("Comment").key("id"))
            .unwrap();
        c.define_vertex_type(VertexTypeDef::new("Doc").key("id"))
            .unwrap();
        c.add_embedding_attribute("Post", "content_emb", EmbeddingSource::Meta(gpt4(1024)))
            .unwrap();
        let mut flat = gpt4(1024);
        flat.index_kind = IndexKind::Flat;
        c.add_embedding_attribute("Comment", "content_emb", EmbeddingSource::Meta(flat))
            .unwrap();
        c.add_embedding_attribute("Doc", "emb", EmbeddingSource::Meta(gpt4(768)))
            .unwrap();

        let both = [
            AttrRef::new("Comment", "content_emb"),
            AttrRef::new("Post", "content_emb"),
        ];
        let set = c.check_compatibility(&both).unwrap();
        assert_eq!(set.meta.dimension, 1024);
        assert_eq!(set.attrs.len(), 2);

        c.check_compatibility(&[AttrRef::new("Doc", "emb")])
            .unwrap();

        let mixed = [
            AttrRef::new("Post", "content_emb"),
            AttrRef::new("Doc", "emb"),
        ];
        assert!(matches!(
            c.check_compatibility(&mixed),
            Err(Error::DimensionMismatch {
                expected: 1024,
                got: 768
            })
        ));
    }

    #[test]
    fn compatibility_reports_first_mismatching_field() {
        let base = gpt4(8);
        let mut other = base.clone();
        other.model = "BERT".into();
        other.metric = Metric::L2;
        assert!(matches!(
            base.compatible_with(&other),
            Err(Error::ModelMismatch { .. })
        ));
        other.model = "GPT4".into();
        assert!(matches!(
            base.compatible_with(&other),
            Err(Error::MetricMismatch { .. })
        ));
    }

    #[test]
    fn catalog_json_round_trips() {
        let mut c = Catalog::default();
        c.define_vertex_type(post_def()).unwrap();
        c.add_embedding_attribute("Post", "content_emb", EmbeddingSource::Meta(gpt4(4)))
            .unwrap();
        let back: Catalog = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn metric_identities() {
        let v = Metric::Cosine.prepared(&[3.0, 4.0]);
        assert!(Metric::Cosine.distance(&v, &v).abs() < 1e-6);
        assert_eq!(Metric::L2.distance(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(Metric::L2.distance(&[1.0, 0.0], &[-1.0, 0.0]), 2.0);
        assert_eq!(
            Metric::InnerProduct.distance(&[1.0, 2.0], &[3.0, 4.0]),
            -11.0
        );
    }

    use proptest::prelude::*;

    fn arb_meta() -> impl Strategy<Value = EmbeddingMeta> {
        (
            1usize..4,
            prop::sample::select(vec!["A", "B"]),
            prop::sample::select(vec![IndexKind::Hnsw, IndexKind::Flat]),
            prop::sample::select(vec![Metric::L2, Metric::Cosine]),
        )
            .prop_map(|(d, m, k, metric)| EmbeddingMeta::new(d, m, k, metric))
    }

    proptest! {
        #[test]
        fn compatibility_is_an_equivalence(a in arb_meta(), b in arb_meta(), c in arb_meta()) {
            prop_assert!(a.is_compatible(&a));
            prop_assert_eq!(a.is_compatible(&b), b.is_compatible(&a));
            if a.is_compatible(&b) && b.is_compatible(&c) {
                prop_assert!(a.is_compatible(&c));
            }
        }
    }
}
