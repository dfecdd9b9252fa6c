use crate::error::{Error, Result};
use crate::predicate::CmpOp;
use crate::schema::{DataType, EmbeddingMeta, IndexKind, Metric, ScalarType, Value};
use crate::storage::Direction;

use super::ast::*;
use super::lexer::{lex, Tok, Token};

/// Inline query vectors longer than this are rejected.
pub const MAX_INLINE_VECTOR: usize = 4096;

pub fn parse(src: &str) -> Result<Script> {
    let mut p = Parser {
        toks: lex(src)?,
        i: 0,
    };
    let mut statements = Vec::new();
    while !p.at_eof() {
        statements.push(p.statement()?);
    }
    Ok(Script { statements })
}

/// Parses a script holding exactly one statement.
pub fn parse_statement(src: &str) -> Result<Statement> {
    let mut s = parse(src)?;
    match s.statements.len() {
        1 => Ok(s.statements.pop().expect("one statement").node),
        n => Err(Error::Syntax {
            line: 1,
            column: 1,
            message: format!("expected one statement, found {n}"),
        }),
    }
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.i + n).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.i].tok.clone();
        if self.i < self.toks.len() - 1 {
            self.i += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        let p = self.pos();
        Err(Error::Syntax {
            line: p.line,
            column: p.col,
            message: message.into(),
        })
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Global(s) => format!("`@@{s}`"),
            Tok::Param(s) => format!("`${s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Float(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string {}", quote(s)),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn kw(&mut self, kw: &str) -> Result<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.error(format!("expected {kw}, found {}", self.describe()))
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(format!("expected `{s}`, found {}", self.describe()))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) if is_reserved(&s) => {
                self.error(format!("reserved word `{s}` cannot be used as a name"))
            }
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            _ => self.error(format!("expected a name, found {}", self.describe())),
        }
    }

    fn int(&mut self) -> Result<i64> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.advance();
                Ok(i)
            }
            _ => self.error(format!("expected an integer, found {}", self.describe())),
        }
    }

    fn string(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.advance();
                Ok(s)
            }
            _ => self.error(format!("expected a string, found {}", self.describe())),
        }
    }

    fn statement(&mut self) -> Result<Spanned<Statement>> {
        let pos = self.pos();
        let node = if self.eat_kw("CREATE") {
            if self.eat_kw("VERTEX") {
                self.create_vertex()?
            } else if self.is_kw("EDGE") || self.is_kw("DIRECTED") || self.is_kw("UNDIRECTED") {
                self.create_edge()?
            } else if self.eat_kw("EMBEDDING") {
                self.kw("SPACE")?;
                let name = self.ident()?;
                let meta = self.meta_options()?;
                self.sym(";")?;
                Statement::CreateEmbeddingSpace { name, meta }
            } else if self.eat_kw("LOADING") {
                Statement::LoadJob(self.load_job()?)
            } else if self.eat_kw("QUERY") {
                Statement::Procedure(self.procedure()?)
            } else {
                return self.error(format!(
                    "expected VERTEX, EDGE, EMBEDDING SPACE, LOADING JOB or QUERY after CREATE, found {}",
                    self.describe()
                ));
            }
        } else if self.eat_kw("ALTER") {
            self.alter_vertex()?
        } else if self.is_kw("SELECT") {
            let b = self.select()?;
            self.sym(";")?;
            Statement::Select(b)
        } else if self.eat_kw("EXPLAIN") {
            let b = self.select()?;
            self.sym(";")?;
            Statement::Explain(b)
        } else {
            return self.error(format!("expected a statement, found {}", self.describe()));
        };
        Ok(Spanned { pos, node })
    }

    fn scalar_type(&mut self) -> Result<ScalarType> {
        let t = match self.peek() {
            Tok::Ident(s) => s.to_ascii_uppercase(),
            _ => return self.error(format!("expected a type, found {}", self.describe())),
        };
        let ty = match t.as_str() {
            "INT" | "UINT" => ScalarType::Int,
            "FLOAT" | "DOUBLE" => ScalarType::Float,
            "STRING" => ScalarType::String,
            "BOOL" => ScalarType::Bool,
            _ => return self.error(format!("unknown type {}", self.describe())),
        };
        self.advance();
        Ok(ty)
    }

    fn create_vertex(&mut self) -> Result<Statement> {
        let name = self.ident()?;
        self.sym("(")?;
        let mut columns = Vec::new();
        loop {
            let col_pos = self.pos();
            let cname = self.ident()?;
            let ty = self.scalar_type()?;
            let primary_key = if self.eat_kw("PRIMARY") {
                self.kw("KEY")?;
                true
            } else {
                false
            };
            if primary_key && ty != ScalarType::Int {
                return Err(Error::Syntax {
                    line: col_pos.line,
                    column: col_pos.col,
                    message: "the primary key must be INT".into(),
                });
            }
            columns.push(Column {
                name: cname,
                ty,
                primary_key,
            });
            if !self.eat_sym(",") {
                break;
            }
        }
        self.sym(")")?;
        match columns.iter().filter(|c| c.primary_key).count() {
            1 => {}
            0 => return self.error("vertex type needs one INT PRIMARY KEY column"),
            _ => return self.error("more than one PRIMARY KEY column"),
        }
        self.sym(";")?;
        Ok(Statement::CreateVertex { name, columns })
    }

    fn create_edge(&mut self) -> Result<Statement> {
        let directed = !self.eat_kw("UNDIRECTED");
        self.eat_kw("DIRECTED");
        self.kw("EDGE")?;
        let name = self.ident()?;
        self.sym("(")?;
        let mut endpoints = Vec::new();
        loop {
            self.kw("FROM")?;
            let from = self.ident()?;
            self.sym(",")?;
            self.kw("TO")?;
            let to = self.ident()?;
            endpoints.push((from, to));
            if !self.eat_sym("|") {
                break;
            }
        }
        self.sym(")")?;
        self.sym(";")?;
        Ok(Statement::CreateEdge {
            name,
            directed,
            endpoints,
        })
    }

    fn meta_options(&mut self) -> Result<EmbeddingMeta> {
        self.sym("(")?;
        let (mut dim, mut model, mut index, mut metric) = (None, None, IndexKind::Hnsw, None);
        loop {
            let key_pos = self.pos();
            let key = self.option_word()?;
            self.sym("=")?;
            match key.as_str() {
                "DIMENSION" => {
                    let d = self.int()?;
                    if d < 1 {
                        return Err(Error::Syntax {
                            line: key_pos.line,
                            column: key_pos.col,
                            message: "DIMENSION must be at least 1".into(),
                        });
                    }
                    dim = Some(d as usize);
                }
                "MODEL" => {
                    model = Some(match self.peek().clone() {
                        Tok::Ident(s) => {
                            self.advance();
                            s
                        }
                        Tok::Str(s) => {
                            self.advance();
                            s
                        }
                        _ => {
                            return self
                                .error(format!("expected a model name, found {}", self.describe()))
                        }
                    })
                }
                "INDEX" => {
                    index = match self.option_word()?.as_str() {
                        "HNSW" => IndexKind::Hnsw,
                        "FLAT" => IndexKind::Flat,
                        other => {
                            return self.error_at(key_pos, format!("unknown index kind {other}"))
                        }
                    }
                }
                "DATATYPE" => match self.option_word()?.as_str() {
                    "FLOAT" | "FLOAT32" => {}
                    other => {
                        return self.error_at(key_pos, format!("unsupported datatype {other}"))
                    }
                },
                "METRIC" => {
                    metric = Some(match self.option_word()?.as_str() {
                        "L2" => Metric::L2,
                        "COSINE" => Metric::Cosine,
                        "IP" | "INNER_PRODUCT" => Metric::InnerProduct,
                        other => return self.error_at(key_pos, format!("unknown metric {other}")),
                    })
                }
                other => {
                    return self.error_at(key_pos, format!("unknown embedding option {other}"))
                }
            }
            if !self.eat_sym(",") {
                break;
            }
        }
        self.sym(")")?;
        let (Some(dimension), Some(model), Some(metric)) = (dim, model, metric) else {
            return self.error("embedding options need DIMENSION, MODEL and METRIC");
        };
        Ok(EmbeddingMeta {
            dimension,
            model,
            index_kind: index,
            datatype: DataType::Float32,
            metric,
        })
    }

    fn option_word(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s.to_ascii_uppercase())
            }
            _ => self.error(format!("expected a keyword, found {}", self.describe())),
        }
    }

    fn global(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Global(g) => {
                self.advance();
                Ok(g)
            }
            _ => self.error(format!("expected `@@name`, found {}", self.describe())),
        }
    }

    /// Optional minus, then a number token. Returns the token text too.
    fn signed(&mut self) -> Result<(bool, Tok)> {
        let neg = self.eat_sym("-");
        match self.peek().clone() {
            t @ (Tok::Int(_) | Tok::Float(_)) => {
                self.advance();
                Ok((neg, t))
            }
            _ => self.error(format!("expected a number, found {}", self.describe())),
        }
    }

    fn error_at<T>(&self, pos: Pos, message: String) -> Result<T> {
        Err(Error::Syntax {
            line: pos.line,
            column: pos.col,
            message,
        })
    }

    fn alter_vertex(&mut self) -> Result<Statement> {
        self.kw("VERTEX")?;
        let vtype = self.ident()?;
        self.kw("ADD")?;
        self.kw("EMBEDDING")?;
        self.kw("ATTRIBUTE")?;
        let attr = self.ident()?;
        let source = if self.eat_kw("IN") {
            self.kw("EMBEDDING")?;
            self.kw("SPACE")?;
            EmbeddingDecl::Space(self.ident()?)
        } else {
            EmbeddingDecl::Meta(self.meta_options()?)
        };
        self.sym(";")?;
        Ok(Statement::AddEmbeddingAttr {
            vtype,
            attr,
            source,
        })
    }

    fn load_job(&mut self) -> Result<LoadJob> {
        self.kw("JOB")?;
        let name = self.ident()?;
        self.kw("FOR")?;
        self.kw("GRAPH")?;
        let graph = self.ident()?;
        self.sym("{")?;
        let mut loads = Vec::new();
        while !self.eat_sym("}") {
            self.kw("LOAD")?;
            let file = self.ident()?;
            self.kw("TO")?;
            let target = if self.eat_kw("VERTEX") {
                LoadTarget::Vertex(self.ident()?)
            } else {
                self.kw("EMBEDDING")?;
                self.kw("ATTRIBUTE")?;
                let attr = self.ident()?;
                self.kw("ON")?;
                self.kw("VERTEX")?;
                LoadTarget::Embedding {
                    attr,
                    vtype: self.ident()?,
                }
            };
            self.kw("VALUES")?;
            self.sym("(")?;
            let mut values = Vec::new();
            loop {
                if self.is_kw("split") && matches!(self.peek_at(1), Tok::Sym("(")) {
                    self.advance();
                    self.sym("(")?;
                    let column = self.ident()?;
                    self.sym(",")?;
                    let sep = self.string()?;
                    if sep.is_empty() {
                        return self.error("split separator must not be empty");
                    }
                    self.sym(")")?;
                    values.push(LoadValue::Split { column, sep });
                } else {
                    values.push(LoadValue::Column(self.ident()?));
                }
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.sym(")")?;
            self.sym(";")?;
            loads.push(LoadStmt {
                file,
                target,
                values,
            });
        }
        self.eat_sym(";");
        Ok(LoadJob { name, graph, loads })
    }

    fn select(&mut self) -> Result<SelectBlock> {
        self.kw("SELECT")?;
        let mut projection = vec![self.ident()?];
        while self.eat_sym(",") {
            projection.push(self.ident()?);
        }
        self.kw("FROM")?;
        let pattern = self.pattern()?;
        let filter = if self.eat_kw("WHERE") {
            Some(self.expr()?)
        } else {
            None
        };
        let order = if self.eat_kw("ORDER") {
            self.kw("BY")?;
            let d = self.dist_call()?;
            if !self.is_kw("LIMIT") {
                return self.error("ORDER BY VECTOR_DIST requires LIMIT");
            }
            Some(d)
        } else {
            None
        };
        let limit = if self.eat_kw("LIMIT") {
            if order.is_none() {
                return self.error("LIMIT requires ORDER BY VECTOR_DIST");
            }
            Some(self.operand()?)
        } else {
            None
        };
        Ok(SelectBlock {
            projection,
            pattern,
            filter,
            order,
            limit,
        })
    }

    fn node(&mut self) -> Result<NodeAst> {
        self.sym("(")?;
        let alias = match self.peek() {
            Tok::Ident(_) => Some(self.ident()?),
            _ => None,
        };
        let label = if self.eat_sym(":") {
            Some(self.ident()?)
        } else {
            None
        };
        if alias.is_none() && label.is_none() {
            return self.error("empty vertex pattern");
        }
        self.sym(")")?;
        Ok(NodeAst { alias, label })
    }

    fn edge_body(&mut self) -> Result<(Option<String>, String)> {
        self.sym("[")?;
        let alias = match self.peek() {
            Tok::Ident(_) => Some(self.ident()?),
            _ => None,
        };
        self.sym(":")?;
        let etype = self.ident()?;
        self.sym("]")?;
        Ok((alias, etype))
    }

    fn pattern(&mut self) -> Result<PatternAst> {
        let mut nodes = vec![self.node()?];
        let mut edges = Vec::new();
        loop {
            let dir = if self.is_sym("-") {
                self.advance();
                Direction::Out
            } else if self.is_sym("<") && matches!(self.peek_at(1), Tok::Sym("-")) {
                self.advance();
                self.advance();
                Direction::In
            } else {
                break;
            };
            let (alias, etype) = self.edge_body()?;
            self.sym("-")?;
            if dir == Direction::Out {
                self.sym(">")?;
            }
            edges.push(EdgeAst { alias, etype, dir });
            nodes.push(self.node()?);
        }
        Ok(PatternAst { nodes, edges })
    }

    fn dist_call(&mut self) -> Result<DistCall> {
        self.kw("VECTOR_DIST")?;
        self.sym("(")?;
        let left = self.operand()?;
        self.sym(",")?;
        let right = self.operand()?;
        self.sym(")")?;
        for o in [&left, &right] {
            if matches!(o, Operand::Dist(_) | Operand::List(_) | Operand::Lit(_)) {
                return self.error("VECTOR_DIST takes embedding attributes or query vectors");
            }
        }
        Ok(DistCall { left, right })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut e = self.and_expr()?;
        while self.eat_kw("OR") {
            e = Expr::Or(Box::new(e), Box::new(self.and_expr()?));
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut e = self.not_expr()?;
        while self.eat_kw("AND") {
            e = Expr::And(Box::new(e), Box::new(self.not_expr()?));
        }
        Ok(e)
    }

    fn not_expr(&mut self) -> Result<Expr> {
        if self.eat_kw("NOT") {
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        if self.eat_sym("(") {
            let e = self.expr()?;
            self.sym(")")?;
            return Ok(e);
        }
        let left = self.operand()?;
        let op = match self.peek() {
            Tok::Sym("=") | Tok::Sym("==") => CmpOp::Eq,
            Tok::Sym("!=") => CmpOp::Ne,
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            _ => {
                return self.error(format!(
                    "expected a comparison operator, found {}",
                    self.describe()
                ))
            }
        };
        self.advance();
        let right = self.operand()?;
        Ok(Expr::Cmp { left, op, right })
    }

    fn operand(&mut self) -> Result<Operand> {
        match self.peek().clone() {
            Tok::Ident(s) if s.eq_ignore_ascii_case("VECTOR_DIST") => {
                Ok(Operand::Dist(Box::new(self.dist_call()?)))
            }
            Tok::Ident(s) if s.eq_ignore_ascii_case("TRUE") => {
                self.advance();
                Ok(Operand::Lit(Value::Bool(true)))
            }
            Tok::Ident(s) if s.eq_ignore_ascii_case("FALSE") => {
                self.advance();
                Ok(Operand::Lit(Value::Bool(false)))
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.eat_sym(".") {
                    Ok(Operand::Attr {
                        alias: name,
                        attr: self.ident()?,
                    })
                } else {
                    Ok(Operand::Var(name))
                }
            }
            Tok::Param(p) => {
                self.advance();
                Ok(Operand::Param(p))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Operand::Lit(Value::Str(s)))
            }
            Tok::Int(_) | Tok::Float(_) => Ok(Operand::Lit(self.number()?)),
            Tok::Sym("-") => Ok(Operand::Lit(self.number()?)),
            Tok::Sym("[") => self.list(),
            _ => self.error(format!("expected a value, found {}", self.describe())),
        }
    }

    fn number(&mut self) -> Result<Value> {
        Ok(match self.signed()? {
            (neg, Tok::Int(i)) => Value::Int(if neg { -i } else { i }),
            (neg, Tok::Float(s)) => {
                let x: f64 = s.parse().expect("lexer produced a float");
                Value::Float(if neg { -x } else { x })
            }
            _ => unreachable!("signed returns numbers"),
        })
    }

    /// `[...]`: all-numeric lists become vectors, parsed straight to `f32`.
    fn list(&mut self) -> Result<Operand> {
        let start = self.pos();
        self.sym("[")?;
        let mut numeric: Vec<f32> = Vec::new();
        let mut values: Vec<Value> = Vec::new();
        let mut all_numeric = true;
        if !self.is_sym("]") {
            loop {
                match self.peek().clone() {
                    Tok::Int(_) | Tok::Float(_) | Tok::Sym("-") => {
                        let (neg, tok) = self.signed()?;
                        let (text, v) = match tok {
                            Tok::Int(i) => (i.to_string(), Value::Int(if neg { -i } else { i })),
                            Tok::Float(s) => {
                                let x: f64 = s.parse().expect("lexer produced a float");
                                (s, Value::Float(if neg { -x } else { x }))
                            }
                            _ => unreachable!("signed returns numbers"),
                        };
                        let x: f32 = text.parse().expect("numeric text");
                        numeric.push(if neg { -x } else { x });
                        values.push(v);
                    }
                    Tok::Str(s) => {
                        self.advance();
                        all_numeric = false;
                        values.push(Value::Str(s));
                    }
                    _ => {
                        return self.error(format!(
                            "expected a list element, found {}",
                            self.describe()
                        ))
                    }
                }
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.sym("]")?;
        if all_numeric && !values.is_empty() {
            if numeric.len() > MAX_INLINE_VECTOR {
                return self.error_at(
                    start,
                    format!(
                        "inline vector has {} elements, limit is {MAX_INLINE_VECTOR}",
                        numeric.len()
                    ),
                );
            }
            Ok(Operand::Vector(numeric))
        } else {
            Ok(Operand::List(values))
        }
    }

    fn param_type(&mut self) -> Result<ParamType> {
        if self.is_kw("List") && matches!(self.peek_at(1), Tok::Sym("<")) {
            self.advance();
            self.advance();
            match self.option_word()?.as_str() {
                "FLOAT" | "DOUBLE" => {}
                other => return self.error(format!("unsupported list element type {other}")),
            }
            self.sym(">")?;
            return Ok(ParamType::FloatList);
        }
        Ok(match self.scalar_type()? {
            ScalarType::Int => ParamType::Int,
            ScalarType::Float => ParamType::Float,
            ScalarType::String => ParamType::String,
            ScalarType::Bool => ParamType::Bool,
        })
    }

    fn procedure(&mut self) -> Result<Procedure> {
        let name = self.ident()?;
        self.sym("(")?;
        let mut params = Vec::new();
        if !self.is_sym(")") {
            loop {
                let ty = self.param_type()?;
                params.push(ParamDecl {
                    name: self.ident()?,
                    ty,
                });
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.sym(")")?;
        self.sym("{")?;
        let mut body = Vec::new();
        while !self.eat_sym("}") {
            body.push(self.proc_stmt()?);
        }
        self.eat_sym(";");
        Ok(Procedure { name, params, body })
    }

    fn proc_stmt(&mut self) -> Result<Spanned<ProcStmt>> {
        let pos = self.pos();
        let node = if self.is_kw("Map") && matches!(self.peek_at(1), Tok::Sym("<")) {
            self.advance();
            self.advance();
            self.kw("VERTEX")?;
            self.sym(",")?;
            self.kw("FLOAT")?;
            self.sym(">")?;
            let name = self.global()?;
            self.sym(";")?;
            ProcStmt::DeclareMap(name)
        } else if self.eat_kw("PRINT") {
            let item = match self.peek().clone() {
                Tok::Global(g) => {
                    self.advance();
                    PrintItem::Global(g)
                }
                _ => PrintItem::Var(self.ident()?),
            };
            self.sym(";")?;
            ProcStmt::Print(item)
        } else if self.eat_kw("FOREACH") {
            let var = self.ident()?;
            self.kw("IN")?;
            self.kw("RANGE")?;
            self.sym("[")?;
            let lo = self.operand()?;
            self.sym(",")?;
            let hi = self.operand()?;
            self.sym("]")?;
            self.kw("DO")?;
            let mut body = Vec::new();
            while !self.eat_kw("END") {
                if self.at_eof() {
                    return self.error("FOREACH without END");
                }
                body.push(self.proc_stmt()?);
            }
            self.sym(";")?;
            ProcStmt::Foreach { var, lo, hi, body }
        } else {
            let var = self.ident()?;
            self.sym("=")?;
            let rhs = if self.is_kw("SELECT") {
                Rhs::Select(self.select()?)
            } else if self.is_kw("VectorSearch") {
                self.advance();
                Rhs::VectorSearch(self.vector_search()?)
            } else {
                let name = self.ident()?;
                self.sym("(")?;
                let mut args = Vec::new();
                if !self.is_sym(")") {
                    loop {
                        args.push(self.operand()?);
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                }
                self.sym(")")?;
                Rhs::Call { name, args }
            };
            self.sym(";")?;
            ProcStmt::Assign { var, rhs }
        };
        Ok(Spanned { pos, node })
    }

    fn vector_search(&mut self) -> Result<VectorSearchCall> {
        self.sym("(")?;
        self.sym("{")?;
        let mut attrs = Vec::new();
        loop {
            let t = self.ident()?;
            self.sym(".")?;
            attrs.push((t, self.ident()?));
            if !self.eat_sym(",") {
                break;
            }
        }
        self.sym("}")?;
        self.sym(",")?;
        let query = self.operand()?;
        self.sym(",")?;
        let k = self.operand()?;
        let mut call = VectorSearchCall {
            attrs,
            query,
            k,
            filter: None,
            ef: None,
            distance_map: None,
        };
        if self.eat_sym(",") {
            self.sym("{")?;
            loop {
                let key_pos = self.pos();
                let key = self.ident()?;
                self.sym(":")?;
                match key.as_str() {
                    "filter" => call.filter = Some(self.ident()?),
                    "ef" => call.ef = Some(self.operand()?),
                    "distanceMap" => call.distance_map = Some(self.global()?),
                    other => {
                        return self
                            .error_at(key_pos, format!("unknown VectorSearch option `{other}`"))
                    }
                }
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.sym("}")?;
        }
        self.sym(")")?;
        Ok(call)
    }
}
