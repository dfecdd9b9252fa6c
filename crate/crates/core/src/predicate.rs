//! Scalar predicates over the attributes of a single vertex.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{ScalarType, Value, VertexType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Predicate {
    True,
    Cmp {
        attr: String,
        op: CmpOp,
        value: Value,
    },
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    pub fn cmp(attr: impl Into<String>, op: CmpOp, value: Value) -> Self {
        Predicate::Cmp {
            attr: attr.into(),
            op,
            value,
        }
    }

    pub fn eq(attr: impl Into<String>, value: Value) -> Self {
        Self::cmp(attr, CmpOp::Eq, value)
    }

    pub fn and(self, other: Predicate) -> Self {
        match (self, other) {
            (Predicate::True, p) | (p, Predicate::True) => p,
            (a, b) => Predicate::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn or(self, other: Predicate) -> Self {
        Predicate::Or(Box::new(self), Box::new(other))
    }

    pub fn negate(self) -> Self {
        Predicate::Not(Box::new(self))
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Predicate::True)
    }

    /// Checks attribute names and literal types against a vertex type.
    pub fn check(&self, vtype: &VertexType) -> Result<()> {
        match self {
            Predicate::True => Ok(()),
            Predicate::Cmp { attr, op, value } => {
                let def = vtype.attr(attr).ok_or_else(|| {
                    Error::TypeError(format!("`{}` has no scalar attribute `{attr}`", vtype.name))
                })?;
                let ok = match (def.ty, value) {
                    (ScalarType::Int | ScalarType::Float, Value::Int(_) | Value::Float(_)) => true,
                    (ScalarType::String, Value::Str(_)) => true,
                    (ScalarType::Bool, Value::Bool(_)) => matches!(op, CmpOp::Eq | CmpOp::Ne),
                    _ => false,
                };
                if ok {
                    Ok(())
                } else {
                    Err(Error::TypeError(format!(
                        "cannot compare {}.{attr} ({}) {} {value}",
                        vtype.name,
                        def.ty,
                        op.symbol()
                    )))
                }
            }
            Predicate::And(a, b) | Predicate::Or(a, b) => {
                a.check(vtype)?;
                b.check(vtype)
            }
            Predicate::Not(a) => a.check(vtype),
        }
    }

    /// Evaluates against a row; `lookup` returns `None` for null attributes,
    /// and any comparison with null is false.
    pub fn eval<'v>(&self, lookup: &impl Fn(&str) -> Option<&'v Value>) -> bool {
        match self {
            Predicate::True => true,
            Predicate::Cmp { attr, op, value } => match lookup(attr) {
                Some(v) => compare(v, value).is_some_and(|o| op.holds(o)),
                None => false,
            },
            Predicate::And(a, b) => a.eval(lookup) && b.eval(lookup),
            Predicate::Or(a, b) => a.eval(lookup) || b.eval(lookup),
            Predicate::Not(a) => !a.eval(lookup),
        }
    }
}

pub fn compare(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Some(x.cmp(y)),
        (Value::Str(x), Value::Str(y)) => Some(x.cmp(y)),
        (Value::Bool(x), Value::Bool(y)) => Some(x.cmp(y)),
        _ => a.as_f64()?.partial_cmp(&b.as_f64()?),
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::True => f.write_str("TRUE"),
            Predicate::Cmp { attr, op, value } => write!(f, "{attr} {} {value}", op.symbol()),
            Predicate::And(a, b) => write!(f, "({a} AND {b})"),
            Predicate::Or(a, b) => write!(f, "({a} OR {b})"),
            Predicate::Not(a) => write!(f, "NOT {a}"),
        }
    }
}
