//! Syntax tree and its canonical pretty-printer.

use std::fmt::{self, Write};

use crate::predicate::CmpOp;
use crate::schema::{EmbeddingMeta, ScalarType, Value};
use crate::storage::Direction;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// A node tagged with its source position. Positions do not take part in
/// equality, so a reparsed pretty-print compares equal to the original.
#[derive(Debug, Clone)]
pub struct Spanned<T> {
    pub pos: Pos,
    pub node: T,
}

impl<T: PartialEq> PartialEq for Spanned<T> {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Script {
    pub statements: Vec<Spanned<Statement>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    CreateVertex {
        name: String,
        columns: Vec<Column>,
    },
    CreateEdge {
        name: String,
        directed: bool,
        endpoints: Vec<(String, String)>,
    },
    CreateEmbeddingSpace {
        name: String,
        meta: EmbeddingMeta,
    },
    AddEmbeddingAttr {
        vtype: String,
        attr: String,
        source: EmbeddingDecl,
    },
    LoadJob(LoadJob),
    Select(SelectBlock),
    Explain(SelectBlock),
    Procedure(Procedure),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub ty: ScalarType,
    pub primary_key: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingDecl {
    Meta(EmbeddingMeta),
    Space(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadJob {
    pub name: String,
    pub graph: String,
    pub loads: Vec<LoadStmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadStmt {
    /// File variable, bound to a path when the job runs.
    pub file: String,
    pub target: LoadTarget,
    pub values: Vec<LoadValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadTarget {
    Vertex(String),
    Embedding { attr: String, vtype: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadValue {
    Column(String),
    /// `split(col, ":")`: one field holding separator-joined floats.
    Split {
        column: String,
        sep: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectBlock {
    pub projection: Vec<String>,
    pub pattern: PatternAst,
    pub filter: Option<Expr>,
    pub order: Option<DistCall>,
    pub limit: Option<Operand>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternAst {
    pub nodes: Vec<NodeAst>,
    pub edges: Vec<EdgeAst>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeAst {
    pub alias: Option<String>,
    /// Vertex type or vertex set variable.
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeAst {
    pub alias: Option<String>,
    pub etype: String,
    pub dir: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistCall {
    pub left: Operand,
    pub right: Operand,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Cmp {
        left: Operand,
        op: CmpOp,
        right: Operand,
    },
}

impl Expr {
    /// Top-level AND conjuncts, left to right.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        match self {
            Expr::And(a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            e => vec![e],
        }
    }

    /// Aliases referenced through `alias.attr` operands.
    pub fn aliases(&self, out: &mut Vec<String>) {
        match self {
            Expr::And(a, b) | Expr::Or(a, b) => {
                a.aliases(out);
                b.aliases(out);
            }
            Expr::Not(a) => a.aliases(out),
            Expr::Cmp { left, right, .. } => {
                for o in [left, right] {
                    if let Operand::Attr { alias, .. } = o {
                        if !out.contains(alias) {
                            out.push(alias.clone());
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Attr {
        alias: String,
        attr: String,
    },
    Lit(Value),
    /// Bare name: a parameter, loop variable or scalar variable.
    Var(String),
    /// `$name`
    Param(String),
    Vector(Vec<f32>),
    List(Vec<Value>),
    Dist(Box<DistCall>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Procedure {
    pub name: String,
    pub params: Vec<ParamDecl>,
    pub body: Vec<Spanned<ProcStmt>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDecl {
    pub name: String,
    pub ty: ParamType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamType {
    Int,
    Float,
    String,
    Bool,
    FloatList,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProcStmt {
    /// `Map<VERTEX, FLOAT> @@name;`
    DeclareMap(String),
    Assign {
        var: String,
        rhs: Rhs,
    },
    Print(PrintItem),
    Foreach {
        var: String,
        lo: Operand,
        hi: Operand,
        body: Vec<Spanned<ProcStmt>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PrintItem {
    Var(String),
    Global(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rhs {
    Select(SelectBlock),
    VectorSearch(VectorSearchCall),
    Call { name: String, args: Vec<Operand> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorSearchCall {
    /// `(vertex type, attribute)`
    pub attrs: Vec<(String, String)>,
    pub query: Operand,
    pub k: Operand,
    pub filter: Option<String>,
    pub ef: Option<Operand>,
    pub distance_map: Option<String>,
}

pub(crate) fn is_reserved(word: &str) -> bool {
    const RESERVED: &[&str] = &[
        "ADD",
        "ALTER",
        "AND",
        "ATTRIBUTE",
        "BY",
        "CREATE",
        "DIRECTED",
        "DO",
        "EDGE",
        "EMBEDDING",
        "END",
        "EXPLAIN",
        "FALSE",
        "FOREACH",
        "FROM",
        "IN",
        "JOB",
        "KEY",
        "LIMIT",
        "LOAD",
        "LOADING",
        "NOT",
        "ON",
        "OR",
        "ORDER",
        "PRIMARY",
        "PRINT",
        "QUERY",
        "RANGE",
        "SELECT",
        "SPACE",
        "TO",
        "TRUE",
        "UNDIRECTED",
        "VALUES",
        "VECTOR_DIST",
        "VERTEX",
        "WHERE",
    ];
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(word))
}

fn is_plain_ident(s: &str) -> bool {
    let mut c = s.chars();
    c.next()
        .is_some_and(|h| h.is_ascii_alphabetic() || h == '_')
        && c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
        && !is_reserved(s)
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn fmt_value(v: &Value) -> String {
    match v {
        Value::Str(s) => quote(s),
        other => other.to_string(),
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Attr { alias, attr } => write!(f, "{alias}.{attr}"),
            Operand::Lit(v) => f.write_str(&fmt_value(v)),
            Operand::Var(n) => f.write_str(n),
            Operand::Param(n) => write!(f, "${n}"),
            Operand::Vector(xs) => {
                let items: Vec<String> = xs.iter().map(|x| format!("{x:?}")).collect();
                write!(f, "[{}]", items.join(", "))
            }
            Operand::List(xs) => {
                let items: Vec<String> = xs.iter().map(fmt_value).collect();
                write!(f, "[{}]", items.join(", "))
            }
            Operand::Dist(d) => write!(f, "{d}"),
        }
    }
}

impl fmt::Display for DistCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VECTOR_DIST({}, {})", self.left, self.right)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(e: &Expr, parent_and: bool, right: bool) -> String {
            let wrap = match e {
                Expr::Or(..) => parent_and || right,
                Expr::And(..) => !parent_and || right,
                _ => false,
            };
            if wrap {
                format!("({e})")
            } else {
                e.to_string()
            }
        }
        match self {
            Expr::And(a, b) => write!(f, "{} AND {}", child(a, true, false), child(b, true, true)),
            Expr::Or(a, b) => write!(f, "{} OR {}", child(a, false, false), child(b, false, true)),
            Expr::Not(a) => match **a {
                Expr::Cmp { .. } => write!(f, "NOT {a}"),
                _ => write!(f, "NOT ({a})"),
            },
            Expr::Cmp { left, op, right } => write!(f, "{left} {} {right}", op.symbol()),
        }
    }
}

impl fmt::Display for NodeAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        if let Some(a) = &self.alias {
            f.write_str(a)?;
        }
        if let Some(l) = &self.label {
            write!(f, ":{l}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for PatternAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.nodes[0])?;
        for (e, n) in self.edges.iter().zip(&self.nodes[1..]) {
            let inner = format!("{}:{}", e.alias.as_deref().unwrap_or(""), e.etype);
            match e.dir {
                Direction::Out => write!(f, "-[{inner}]->{n}")?,
                Direction::In => write!(f, "<-[{inner}]-{n}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Display for SelectBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SELECT {}\nFROM {}",
            self.projection.join(", "),
            self.pattern
        )?;
        if let Some(w) = &self.filter {
            write!(f, "\nWHERE {w}")?;
        }
        if let Some(o) = &self.order {
            write!(f, "\nORDER BY {o}")?;
        }
        if let Some(l) = &self.limit {
            write!(f, "\nLIMIT {l}")?;
        }
        Ok(())
    }
}

fn fmt_meta(m: &EmbeddingMeta) -> String {
    let model = if is_plain_ident(&m.model) {
        m.model.clone()
    } else {
        quote(&m.model)
    };
    format!(
        "(\n  DIMENSION = {},\n  MODEL = {model},\n  INDEX = {},\n  DATATYPE = {},\n  METRIC = {}\n)",
        m.dimension, m.index_kind, m.datatype, m.metric
    )
}

impl fmt::Display for ParamType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamType::Int => "INT",
            ParamType::Float => "FLOAT",
            ParamType::String => "STRING",
            ParamType::Bool => "BOOL",
            ParamType::FloatList => "List<FLOAT>",
        })
    }
}

fn indent(text: &str, by: usize) -> String {
    let pad = " ".repeat(by);
    text.lines()
        .map(|l| {
            if l.is_empty() {
                String::new()
            } else {
                format!("{pad}{l}")
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

impl fmt::Display for VectorSearchCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let attrs: Vec<String> = self.attrs.iter().map(|(t, a)| format!("{t}.{a}")).collect();
        write!(
            f,
            "VectorSearch({{{}}}, {}, {}",
            attrs.join(", "),
            self.query,
            self.k
        )?;
        let mut opts = Vec::new();
        if let Some(s) = &self.filter {
            opts.push(format!("filter: {s}"));
        }
        if let Some(e) = &self.ef {
            opts.push(format!("ef: {e}"));
        }
        if let Some(m) = &self.distance_map {
            opts.push(format!("distanceMap: @@{m}"));
        }
        if !opts.is_empty() {
            write!(f, ", {{{}}}", opts.join(", "))?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for ProcStmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcStmt::DeclareMap(m) => write!(f, "Map<VERTEX, FLOAT> @@{m};"),
            ProcStmt::Assign { var, rhs } => match rhs {
                Rhs::Select(b) => write!(f, "{var} =\n{};", indent(&b.to_string(), 2)),
                Rhs::VectorSearch(v) => write!(f, "{var} = {v};"),
                Rhs::Call { name, args } => {
                    let a: Vec<String> = args.iter().map(|x| x.to_string()).collect();
                    write!(f, "{var} = {name}({});", a.join(", "))
                }
            },
            ProcStmt::Print(PrintItem::Var(v)) => write!(f, "PRINT {v};"),
            ProcStmt::Print(PrintItem::Global(v)) => write!(f, "PRINT @@{v};"),
            ProcStmt::Foreach { var, lo, hi, body } => {
                writeln!(f, "FOREACH {var} IN RANGE[{lo}, {hi}] DO")?;
                for s in body {
                    writeln!(f, "{}", indent(&s.node.to_string(), 2))?;
                }
                f.write_str("END;")
            }
        }
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::CreateVertex { name, columns } => {
                let cols: Vec<String> = columns
                    .iter()
                    .map(|c| {
                        format!(
                            "  {} {}{}",
                            c.name,
                            c.ty,
                            if c.primary_key { " PRIMARY KEY" } else { "" }
                        )
                    })
                    .collect();
                write!(f, "CREATE VERTEX {name} (\n{}\n);", cols.join(",\n"))
            }
            Statement::CreateEdge {
                name,
                directed,
                endpoints,
            } => {
                let eps: Vec<String> = endpoints
                    .iter()
                    .map(|(a, b)| format!("FROM {a}, TO {b}"))
                    .collect();
                let kind = if *directed { "DIRECTED" } else { "UNDIRECTED" };
                write!(f, "CREATE {kind} EDGE {name} ({});", eps.join(" | "))
            }
            Statement::CreateEmbeddingSpace { name, meta } => {
                write!(f, "CREATE EMBEDDING SPACE {name} {};", fmt_meta(meta))
            }
            Statement::AddEmbeddingAttr {
                vtype,
                attr,
                source,
            } => match source {
                EmbeddingDecl::Meta(m) => {
                    write!(
                        f,
                        "ALTER VERTEX {vtype}\nADD EMBEDDING ATTRIBUTE {attr} {};",
                        fmt_meta(m)
                    )
                }
                EmbeddingDecl::Space(s) => {
                    write!(f, "ALTER VERTEX {vtype}\nADD EMBEDDING ATTRIBUTE {attr}\nIN EMBEDDING SPACE {s};")
                }
            },
            Statement::LoadJob(job) => {
                writeln!(
                    f,
                    "CREATE LOADING JOB {} FOR GRAPH {} {{",
                    job.name, job.graph
                )?;
                for l in &job.loads {
                    let mut line = format!("  LOAD {} TO ", l.file);
                    match &l.target {
                        LoadTarget::Vertex(t) => write!(line, "VERTEX {t}")?,
                        LoadTarget::Embedding { attr, vtype } => {
                            write!(line, "EMBEDDING ATTRIBUTE {attr} ON VERTEX {vtype}")?
                        }
                    }
                    let vals: Vec<String> = l
                        .values
                        .iter()
                        .map(|v| match v {
                            LoadValue::Column(c) => c.clone(),
                            LoadValue::Split { column, sep } => {
                                format!("split({column}, {})", quote(sep))
                            }
                        })
                        .collect();
                    writeln!(f, "{line} VALUES ({});", vals.join(", "))?;
                }
                f.write_str("}")
            }
            Statement::Select(b) => write!(f, "{b};"),
            Statement::Explain(b) => write!(f, "EXPLAIN {b};"),
            Statement::Procedure(p) => {
                let params: Vec<String> = p
                    .params
                    .iter()
                    .map(|d| format!("{} {}", d.ty, d.name))
                    .collect();
                writeln!(f, "CREATE QUERY {}({}) {{", p.name, params.join(", "))?;
                for s in &p.body {
                    writeln!(f, "{}", indent(&s.node.to_string(), 2))?;
                }
                f.write_str("}")
            }
        }
    }
}

impl fmt::Display for Script {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.statements.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            writeln!(f, "{}", s.node)?;
        }
        Ok(())
    }
}
