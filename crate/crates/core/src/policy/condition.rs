use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::value::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Operator {
    Equals,
    NotEquals,
    GreaterThan,
    GreaterThanOrEqual,
    LessThan,
    LessThanOrEqual,
    In,
}

impl Operator {
    pub const ALL: [Operator; 7] = [
        Operator::Equals,
        Operator::NotEquals,
        Operator::GreaterThan,
        Operator::GreaterThanOrEqual,
        Operator::LessThan,
        Operator::LessThanOrEqual,
        Operator::In,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Operator::Equals => "Equals",
            Operator::NotEquals => "NotEquals",
            Operator::GreaterThan => "GreaterThan",
            Operator::GreaterThanOrEqual => "GreaterThanOrEqual",
            Operator::LessThan => "LessThan",
            Operator::LessThanOrEqual => "LessThanOrEqual",
            Operator::In => "In",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Operator::ALL.into_iter().find(|op| op.as_str() == s)
    }

    fn symbol(self) -> &'static str {
        match self {
            Operator::Equals => "==",
            Operator::NotEquals => "!=",
            Operator::GreaterThan => ">",
            Operator::GreaterThanOrEqual => ">=",
            Operator::LessThan => "<",
            Operator::LessThanOrEqual => "<=",
            Operator::In => "in",
        }
    }
}

/// One comparison between a context attribute and reference value(s).
/// `In` uses the whole list; every other operator uses exactly one value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Atom {
    pub attribute: String,
    pub operator: Operator,
    pub values: Vec<Scalar>,
}

impl Atom {
    pub fn new(attribute: impl Into<String>, operator: Operator, value: impl Into<Scalar>) -> Self {
        Atom {
            attribute: attribute.into(),
            operator,
            values: vec![value.into()],
        }
    }

    pub fn one_of(attribute: impl Into<String>, values: Vec<Scalar>) -> Self {
        Atom {
            attribute: attribute.into(),
            operator: Operator::In,
            values,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} ", self.attribute, self.operator.symbol())?;
        if self.operator == Operator::In {
            let items: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
            write!(f, "[{}]", items.join(", "))
        } else {
            match self.values.first() {
                Some(v) => write!(f, "{v}"),
                None => f.write_str("?"),
            }
        }
    }
}

/// A rule's gating condition.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub enum ConditionExpr {
    /// Applies in all circumstances.
    #[default]
    Empty,
    Atom(Atom),
    And(Vec<ConditionExpr>),
    Or(Vec<ConditionExpr>),
}

impl ConditionExpr {
    pub fn atom(attribute: impl Into<String>, operator: Operator, value: impl Into<Scalar>) -> Self {
        ConditionExpr::Atom(Atom::new(attribute, operator, value))
    }

    /// Atoms in left-to-right order.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            ConditionExpr::Empty => {}
            ConditionExpr::Atom(a) => out.push(a),
            ConditionExpr::And(cs) | ConditionExpr::Or(cs) => {
                cs.iter().for_each(|c| c.collect_atoms(out))
            }
        }
    }

    /// Structural invariant: And/Or lists non-empty, `In` has a non-empty
    /// list, other operators exactly one value, `Empty` only at the top.
    pub fn check_shape(&self) -> Result<(), String> {
        self.check_shape_at(true)
    }

    fn check_shape_at(&self, top: bool) -> Result<(), String> {
        match self {
            ConditionExpr::Empty if top => Ok(()),
            ConditionExpr::Empty => Err("empty condition nested inside And/Or".into()),
            ConditionExpr::Atom(a) => match (a.operator, a.values.len()) {
                (Operator::In, 0) => Err(format!("In on {} needs at least one value", a.attribute)),
                (Operator::In, _) | (_, 1) => Ok(()),
                (op, n) => Err(format!("{} on {} takes one value, got {n}", op.as_str(), a.attribute)),
            },
            ConditionExpr::And(cs) | ConditionExpr::Or(cs) => {
                if cs.is_empty() {
                    return Err("And/Or with no children".into());
                }
                cs.iter().try_for_each(|c| c.check_shape_at(false))
            }
        }
    }
}

/// Three-valued result of evaluating a condition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Truth {
    True,
    False,
    MissingAttribute(String),
}

impl fmt::Display for Truth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truth::True => f.write_str("true"),
            Truth::False => f.write_str("false"),
            Truth::MissingAttribute(a) => write!(f, "missing attribute {a}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("type mismatch in `{atom}`: context value {found} is not comparable")]
pub struct TypeMismatch {
    pub atom: String,
    pub found: Scalar,
}

pub type Context = BTreeMap<String, Scalar>;

/// Per-atom results recorded during evaluation, in atom order.
pub type AtomLog = Vec<(Atom, Result<Truth, TypeMismatch>)>;

/// Evaluates `expr` against the context bindings.
///
/// Every child is evaluated (no short-circuit). `And` is False if any child
/// is False, else MissingAttribute if any child is missing, else True; `Or`
/// is the dual. A type mismatch anywhere makes the whole evaluation fail.
pub fn evaluate_condition(expr: &ConditionExpr, ctx: &Context) -> Result<Truth, TypeMismatch> {
    evaluate_logged(expr, ctx, &mut Vec::new())
}

/// Like [`evaluate_condition`], recording each atom's own result in `log`.
pub fn evaluate_logged(
    expr: &ConditionExpr,
    ctx: &Context,
    log: &mut AtomLog,
) -> Result<Truth, TypeMismatch> {
    match expr {
        ConditionExpr::Empty => Ok(Truth::True),
        ConditionExpr::Atom(atom) => {
            let r = evaluate_atom(atom, ctx);
            log.push((atom.clone(), r.clone()));
            r
        }
        ConditionExpr::And(children) => combine(children, ctx, log, Truth::False, Truth::True),
        ConditionExpr::Or(children) => combine(children, ctx, log, Truth::True, Truth::False),
    }
}

fn combine(
    children: &[ConditionExpr],
    ctx: &Context,
    log: &mut AtomLog,
    dominant: Truth,
    neutral: Truth,
) -> Result<Truth, TypeMismatch> {
    let results: Vec<Result<Truth, TypeMismatch>> =
        children.iter().map(|c| evaluate_logged(c, ctx, log)).collect();
    let mut missing = None;
    let mut dominated = false;
    for r in results {
        match r? {
            t if t == dominant => dominated = true,
            Truth::MissingAttribute(a) => {
                missing.get_or_insert(a);
            }
            _ => {}
        }
    }
    Ok(if dominated {
        dominant
    } else if let Some(a) = missing {
        Truth::MissingAttribute(a)
    } else {
        neutral
    })
}

fn evaluate_atom(atom: &Atom, ctx: &Context) -> Result<Truth, TypeMismatch> {
    let Some(actual) = ctx.get(&atom.attribute) else {
        return Ok(Truth::MissingAttribute(atom.attribute.clone()));
    };
    let mismatch = || TypeMismatch {
        atom: atom.to_string(),
        found: actual.clone(),
    };
    let holds = match atom.operator {
        Operator::In => {
            let mut any = false;
            for v in &atom.values {
                any |= actual.loose_eq(v).ok_or_else(mismatch)?;
            }
            any
        }
        op => {
            let reference = atom.values.first().ok_or_else(mismatch)?;
            match op {
                Operator::Equals => actual.loose_eq(reference).ok_or_else(mismatch)?,
                Operator::NotEquals => !actual.loose_eq(reference).ok_or_else(mismatch)?,
                _ => {
                    let ord = actual.numeric_cmp(reference).ok_or_else(mismatch)?;
                    match op {
                        Operator::GreaterThan => ord == Ordering::Greater,
                        Operator::GreaterThanOrEqual => ord != Ordering::Less,
                        Operator::LessThan => ord == Ordering::Less,
                        _ => ord != Ordering::Greater,
                    }
                }
            }
        }
    };
    Ok(if holds { Truth::True } else { Truth::False })
}
