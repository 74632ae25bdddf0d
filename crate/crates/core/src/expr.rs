//! Symbolic expressions for first integrals, and their compilation to
//! jets at a base point.
//!
//! The expression language is deliberately tiny: variables `x1..xn`,
//! integer literals, `+ - * / ^` (with integer exponents only) and `exp`.
//! Expressions can also be given as JSON trees; see `docs/grammar.md` and
//! `docs/formats.md`.
//!
//! Expansion is exact. The only non-rational values that can appear are
//! exponential scales `exp(q)` for a rational `q` (from an `exp` node
//! whose argument does not vanish at the base point). Such a scale is
//! carried as an opaque positive unit multiplying an otherwise rational
//! jet: values are `exp(log_scale) * jet`. Sums of values with distinct
//! units are not representable exactly and are rejected.

use crate::jets::{JetError, MultiJet};
use crate::rat::{bit_size, format_q, parse_q, Q};
use num_traits::Zero;
use serde_json::Value;
use std::fmt;
use thiserror::Error;

/// Guard against pathological inputs: maximum expression node count.
pub const MAX_NODES: usize = 10_000;
/// Guard: maximum bit size (numerator + denominator) of any coefficient
/// produced during expansion.
pub const MAX_COEFF_BITS: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expression {
    /// 1-based coordinate index.
    Var(usize),
    Const(Q),
    Add(Box<Expression>, Box<Expression>),
    Sub(Box<Expression>, Box<Expression>),
    Neg(Box<Expression>),
    Mul(Box<Expression>, Box<Expression>),
    Div(Box<Expression>, Box<Expression>),
    IntPow(Box<Expression>, i64),
    Exp(Box<Expression>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExprError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("variable x{index} out of range for dimension {n}")]
    VarOutOfRange { index: usize, n: usize },
    #[error("non-integer exponent")]
    NonIntegerExponent,
    #[error("expression too large: {nodes} nodes exceeds limit {limit}")]
    TooLarge { nodes: usize, limit: usize },
    #[error("division by zero at the base point in subtree `{subtree}`")]
    DivisionByZeroAt { subtree: String },
    #[error("exp argument carries a transcendental unit in subtree `{subtree}`")]
    ExpOfUnit { subtree: String },
    #[error("sum mixes distinct transcendental units (exp({a}) vs exp({b}))")]
    MixedUnits { a: String, b: String },
    #[error("bad expression JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Jet(#[from] JetError),
}

impl Expression {
    pub fn var(i: usize) -> Self {
        Expression::Var(i)
    }

    pub fn constant(q: Q) -> Self {
        Expression::Const(q)
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expression::Var(_) | Expression::Const(_) => 1,
            Expression::Neg(a) | Expression::Exp(a) | Expression::IntPow(a, _) => {
                1 + a.node_count()
            }
            Expression::Add(a, b)
            | Expression::Sub(a, b)
            | Expression::Mul(a, b)
            | Expression::Div(a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expression::Var(_) | Expression::Const(_) => 1,
            Expression::Neg(a) | Expression::Exp(a) | Expression::IntPow(a, _) => 1 + a.depth(),
            Expression::Add(a, b)
            | Expression::Sub(a, b)
            | Expression::Mul(a, b)
            | Expression::Div(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    pub fn max_var(&self) -> usize {
        match self {
            Expression::Var(i) => *i,
            Expression::Const(_) => 0,
            Expression::Neg(a) | Expression::Exp(a) | Expression::IntPow(a, _) => a.max_var(),
            Expression::Add(a, b)
            | Expression::Sub(a, b)
            | Expression::Mul(a, b)
            | Expression::Div(a, b) => a.max_var().max(b.max_var()),
        }
    }

    /// Checks variable indices against the ambient dimension and the
    /// node-count guard.
    pub fn check_dimension(&self, n: usize) -> Result<(), ExprError> {
        let m = self.max_var();
        if m > n {
            return Err(ExprError::VarOutOfRange { index: m, n });
        }
        let nodes = self.node_count();
        if nodes > MAX_NODES {
            return Err(ExprError::TooLarge {
                nodes,
                limit: MAX_NODES,
            });
        }
        Ok(())
    }

    /// Substitutes expressions for variables: `x_i := subs[i-1]`.
    pub fn substitute(&self, subs: &[Expression]) -> Expression {
        match self {
            Expression::Var(i) => subs[i - 1].clone(),
            Expression::Const(q) => Expression::Const(q.clone()),
            Expression::Neg(a) => Expression::Neg(Box::new(a.substitute(subs))),
            Expression::Exp(a) => Expression::Exp(Box::new(a.substitute(subs))),
            Expression::IntPow(a, k) => Expression::IntPow(Box::new(a.substitute(subs)), *k),
            Expression::Add(a, b) => {
                Expression::Add(Box::new(a.substitute(subs)), Box::new(b.substitute(subs)))
            }
            Expression::Sub(a, b) => {
                Expression::Sub(Box::new(a.substitute(subs)), Box::new(b.substitute(subs)))
            }
            Expression::Mul(a, b) => {
                Expression::Mul(Box::new(a.substitute(subs)), Box::new(b.substitute(subs)))
            }
            Expression::Div(a, b) => {
                Expression::Div(Box::new(a.substitute(subs)), Box::new(b.substitute(subs)))
            }
        }
    }

    /// The expression with every variable scaled: `x_i := lambda * x_i`.
    pub fn scale_vars(&self, n: usize, lambda: &Q) -> Expression {
        let subs: Vec<Expression> = (1..=n)
            .map(|i| {
                Expression::Mul(
                    Box::new(Expression::Const(lambda.clone())),
                    Box::new(Expression::Var(i)),
                )
            })
            .collect();
        self.substitute(&subs)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Var(i) => write!(f, "x{i}"),
            Expression::Const(q) => write!(f, "{}", format_q(q)),
            Expression::Add(a, b) => write!(f, "({a} + {b})"),
            Expression::Sub(a, b) => write!(f, "({a} - {b})"),
            Expression::Neg(a) => write!(f, "(-{a})"),
            Expression::Mul(a, b) => write!(f, "({a} * {b})"),
            Expression::Div(a, b) => write!(f, "({a} / {b})"),
            Expression::IntPow(a, k) => write!(f, "({a} ^ {k})"),
            Expression::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

// ---------------------------------------------------------------------
// Text parser: recursive descent with standard precedence.
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := '-' unary | power
//   power  := atom ('^' exponent)?     (exponent: integer literal only)
//   atom   := integer | 'x' digits | '(' expr ')' | 'exp' '(' expr ')'
// ---------------------------------------------------------------------

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected `{}`", c as char))
        }
    }

    fn integer(&mut self) -> Result<String, ExprError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return self.err("expected an integer");
        }
        Ok(std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .to_string())
    }

    fn expr(&mut self) -> Result<Expression, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expression::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expression::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expression, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expression::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expression::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expression, ExprError> {
        if self.eat(b'-') {
            let inner = self.unary()?;
            return Ok(Expression::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression, ExprError> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let k = self.exponent()?;
        Ok(Expression::IntPow(Box::new(base), k))
    }

    /// Exponents are integer literals, optionally signed, optionally in
    /// parentheses. Anything else (`(1/2)`, a variable) is rejected.
    fn exponent(&mut self) -> Result<i64, ExprError> {
        let parens = self.eat(b'(');
        let neg = self.eat(b'-');
        match self.peek() {
            Some(c) if c.is_ascii_digit() => {}
            _ => return Err(ExprError::NonIntegerExponent),
        }
        let digits = self.integer()?;
        if parens {
            if self.peek() == Some(b'/') {
                return Err(ExprError::NonIntegerExponent);
            }
            if !self.eat(b')') {
                return Err(ExprError::NonIntegerExponent);
            }
        }
        let k: i64 = digits.parse().map_err(|_| ExprError::NonIntegerExponent)?;
        Ok(if neg { -k } else { k })
    }

    fn atom(&mut self) -> Result<Expression, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => {
                let digits = self.integer()?;
                let q = parse_q(&digits).map_err(|m| ExprError::Syntax {
                    pos: self.pos,
                    msg: m,
                })?;
                Ok(Expression::Const(q))
            }
            Some(b'e') => {
                // the only identifier other than variables is `exp`
                if self.src[self.pos..].starts_with(b"exp") {
                    self.pos += 3;
                    self.expect(b'(')?;
                    let e = self.expr()?;
                    self.expect(b')')?;
                    Ok(Expression::Exp(Box::new(e)))
                } else {
                    self.err("unknown identifier (only `exp` and `x<k>` are defined)")
                }
            }
            Some(b'x') => {
                self.pos += 1;
                let digits = self.integer().map_err(|_| ExprError::Syntax {
                    pos: self.pos,
                    msg: "variable must be `x` followed by an index, e.g. `x1`".into(),
                })?;
                let i: usize = digits.parse().map_err(|_| ExprError::Syntax {
                    pos: self.pos,
                    msg: "variable index too large".into(),
                })?;
                if i == 0 {
                    return self.err("variable indices start at 1");
                }
                Ok(Expression::Var(i))
            }
            Some(c) => self.err(format!("unexpected character `{}`", c as char)),
            None => self.err("unexpected end of input"),
        }
    }
}

/// Parses an expression over `x1..xn`.
pub fn parse_expression(text: &str, n: usize) -> Result<Expression, ExprError> {
    let mut p = Parser::new(text);
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return p.err("trailing input");
    }
    e.check_dimension(n)?;
    Ok(e)
}

// ---------------------------------------------------------------------
// JSON trees: {"var": 1}, {"const": "3/4"},
// {"op": "add", "args": [...]}; add/mul are n-ary (folded left),
// sub/div binary, neg/exp unary, pow carries {"exponent": k}.
// ---------------------------------------------------------------------

pub fn expression_from_json(v: &Value, n: usize) -> Result<Expression, ExprError> {
    let e = json_node(v)?;
    e.check_dimension(n)?;
    Ok(e)
}

fn json_node(v: &Value) -> Result<Expression, ExprError> {
    let obj = v
        .as_object()
        .ok_or_else(|| ExprError::Json(format!("expected object, got {v}")))?;
    if let Some(var) = obj.get("var") {
        let i = var
            .as_u64()
            .ok_or_else(|| ExprError::Json("\"var\" must be a positive integer".into()))?;
        if i == 0 {
            return Err(ExprError::Json("variable indices start at 1".into()));
        }
        return Ok(Expression::Var(i as usize));
    }
    if let Some(c) = obj.get("const") {
        let q = match c {
            Value::String(s) => parse_q(s).map_err(ExprError::Json)?,
            Value::Number(x) if x.is_i64() => Q::from_integer(x.as_i64().unwrap().into()),
            _ => {
                return Err(ExprError::Json(
                    "\"const\" must be an integer or a \"p/q\" string".into(),
                ))
            }
        };
        return Ok(Expression::Const(q));
    }
    let op = obj
        .get("op")
        .and_then(|o| o.as_str())
        .ok_or_else(|| ExprError::Json("missing \"op\"".into()))?;
    let args: Vec<Expression> = obj
        .get("args")
        .and_then(|a| a.as_array())
        .ok_or_else(|| ExprError::Json(format!("op \"{op}\" needs \"args\"")))?
        .iter()
        .map(json_node)
        .collect::<Result<_, _>>()?;
    let arity = |k: usize| -> Result<(), ExprError> {
        if args.len() == k {
            Ok(())
        } else {
            Err(ExprError::Json(format!(
                "op \"{op}\" expects {k} args, got {}",
                args.len()
            )))
        }
    };
    match op {
        "add" | "mul" => {
            if args.is_empty() {
                return Err(ExprError::Json(format!("op \"{op}\" needs arguments")));
            }
            let is_add = op == "add";
            let mut it = args.into_iter();
            let first = it.next().unwrap();
            Ok(it.fold(first, |acc, e| {
                if is_add {
                    Expression::Add(Box::new(acc), Box::new(e))
                } else {
                    Expression::Mul(Box::new(acc), Box::new(e))
                }
            }))
        }
        "sub" => {
            arity(2)?;
            let mut it = args.into_iter();
            Ok(Expression::Sub(
                Box::new(it.next().unwrap()),
                Box::new(it.next().unwrap()),
            ))
        }
        "div" => {
            arity(2)?;
            let mut it = args.into_iter();
            Ok(Expression::Div(
                Box::new(it.next().unwrap()),
                Box::new(it.next().unwrap()),
            ))
        }
        "neg" => {
            arity(1)?;
            Ok(Expression::Neg(Box::new(args.into_iter().next().unwrap())))
        }
        "exp" => {
            arity(1)?;
            Ok(Expression::Exp(Box::new(args.into_iter().next().unwrap())))
        }
        "pow" => {
            arity(1)?;
            let k = obj
                .get("exponent")
                .and_then(|e| e.as_i64())
                .ok_or(ExprError::NonIntegerExponent)?;
            Ok(Expression::IntPow(
                Box::new(args.into_iter().next().unwrap()),
                k,
            ))
        }
        other => Err(ExprError::Json(format!("unknown op \"{other}\""))),
    }
}

// ---------------------------------------------------------------------
// Expansion to jets
// ---------------------------------------------------------------------

/// The value `exp(log_scale) * jet`: a jet together with an opaque
/// positive exponential unit. Purely rational expressions always have
/// `log_scale = 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaledJet {
    pub jet: MultiJet,
    pub log_scale: Q,
}

impl ScaledJet {
    pub fn is_pure(&self) -> bool {
        self.log_scale.is_zero()
    }
}

/// Order-`order` Taylor expansion of `e` at `base`, in the shifted
/// variables `x - base`, with exact rational coefficients.
pub fn expand_to_jet(e: &Expression, base: &[Q], order: u32) -> Result<ScaledJet, ExprError> {
    let n = base.len();
    e.check_dimension(n)?;
    let sj = expand_rec(e, base, order)?;
    for (_, v) in sj.jet.coeffs() {
        let bits = bit_size(v);
        if bits > MAX_COEFF_BITS {
            return Err(ExprError::Jet(JetError::CoefficientOverflow {
                bits,
                limit: MAX_COEFF_BITS,
            }));
        }
    }
    Ok(sj)
}

fn expand_rec(e: &Expression, base: &[Q], w: u32) -> Result<ScaledJet, ExprError> {
    let n = base.len();
    let pure = |jet: MultiJet| ScaledJet {
        jet,
        log_scale: Q::zero(),
    };
    match e {
        Expression::Var(i) => Ok(pure(MultiJet::coordinate(n, w, base.to_vec(), *i)?)),
        Expression::Const(q) => Ok(pure(MultiJet::constant(n, w, base.to_vec(), q.clone()))),
        Expression::Neg(a) => {
            let sa = expand_rec(a, base, w)?;
            Ok(ScaledJet {
                jet: sa.jet.neg(),
                log_scale: sa.log_scale,
            })
        }
        Expression::Add(a, b) | Expression::Sub(a, b) => {
            let sa = expand_rec(a, base, w)?;
            let sb = expand_rec(b, base, w)?;
            let sb_jet = if matches!(e, Expression::Sub(_, _)) {
                sb.jet.neg()
            } else {
                sb.jet
            };
            // units must agree unless one side vanishes identically
            if sa.log_scale == sb.log_scale {
                Ok(ScaledJet {
                    jet: sa.jet.add(&sb_jet)?,
                    log_scale: sa.log_scale,
                })
            } else if sa.jet.is_zero() {
                Ok(ScaledJet {
                    jet: sb_jet,
                    log_scale: sb.log_scale,
                })
            } else if sb_jet.is_zero() {
                Ok(sa)
            } else {
                Err(ExprError::MixedUnits {
                    a: format_q(&sa.log_scale),
                    b: format_q(&sb.log_scale),
                })
            }
        }
        Expression::Mul(a, b) => {
            let sa = expand_rec(a, base, w)?;
            let sb = expand_rec(b, base, w)?;
            Ok(ScaledJet {
                jet: sa.jet.mul(&sb.jet)?,
                log_scale: sa.log_scale + sb.log_scale,
            })
        }
        Expression::Div(a, b) => {
            let sa = expand_rec(a, base, w)?;
            let sb = expand_rec(b, base, w)?;
            if sb.jet.constant_term().is_zero() {
                return Err(ExprError::DivisionByZeroAt {
                    subtree: b.to_string(),
                });
            }
            Ok(ScaledJet {
                jet: sa.jet.div(&sb.jet)?,
                log_scale: sa.log_scale - sb.log_scale,
            })
        }
        Expression::IntPow(a, k) => {
            let sa = expand_rec(a, base, w)?;
            if *k < 0 && sa.jet.constant_term().is_zero() {
                return Err(ExprError::DivisionByZeroAt {
                    subtree: a.to_string(),
                });
            }
            Ok(ScaledJet {
                jet: sa.jet.int_pow(*k)?,
                log_scale: sa.log_scale * Q::from_integer((*k).into()),
            })
        }
        Expression::Exp(a) => {
            let sa = expand_rec(a, base, w)?;
            if !sa.is_pure() {
                return Err(ExprError::ExpOfUnit {
                    subtree: a.to_string(),
                });
            }
            // exp(q + h) = exp(q) * exp(h); the rational constant q moves
            // into the unit, h has zero constant term
            let q = sa.jet.constant_term();
            let mut h = sa.jet;
            h.set(crate::jets::Mono::zero(n), Q::zero());
            Ok(ScaledJet {
                jet: h.exp_of_nilpotent()?,
                log_scale: q,
            })
        }
    }
}

/// Exact evaluation at a point: returns `(value, log_unit)` meaning
/// `value * exp(log_unit)`.
pub fn eval_at(e: &Expression, point: &[Q]) -> Result<(Q, Q), ExprError> {
    let sj = expand_rec(e, point, 0)?;
    Ok((sj.jet.constant_term(), sj.log_scale))
}

// ---------------------------------------------------------------------
// Degree profile: tracks `f = (p/q) * exp(l)` with `l` of degree <= 1,
// used to upgrade jet certificates to exact identities.
// ---------------------------------------------------------------------

/// Degree data for an expression of the shape
/// `rational function * exp(polynomial of degree <= 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegreeProfile {
    /// Total-degree bound of the numerator.
    pub num_degree: u32,
    /// Total-degree bound of the denominator.
    pub den_degree: u32,
    /// Whether an exponential of an affine argument is present.
    pub has_exp: bool,
}

/// Computes the degree profile, or `None` when the expression leaves the
/// tractable shape (exp of a nonlinear argument, sums involving
/// exponentials, nested exponentials, ...).
pub fn degree_profile(e: &Expression) -> Option<DegreeProfile> {
    // (num_deg, den_deg, has_exp); sums require both sides exp-free
    fn rec(e: &Expression) -> Option<(u32, u32, bool)> {
        match e {
            Expression::Var(_) => Some((1, 0, false)),
            Expression::Const(_) => Some((0, 0, false)),
            Expression::Neg(a) => rec(a),
            Expression::Add(a, b) | Expression::Sub(a, b) => {
                let (an, ad, ae) = rec(a)?;
                let (bn, bd, be) = rec(b)?;
                if ae || be {
                    return None;
                }
                Some(((an + bd).max(bn + ad), ad + bd, false))
            }
            Expression::Mul(a, b) => {
                let (an, ad, ae) = rec(a)?;
                let (bn, bd, be) = rec(b)?;
                Some((an + bn, ad + bd, ae || be))
            }
            Expression::Div(a, b) => {
                let (an, ad, ae) = rec(a)?;
                let (bn, bd, be) = rec(b)?;
                Some((an + bd, ad + bn, ae || be))
            }
            Expression::IntPow(a, k) => {
                let (an, ad, ae) = rec(a)?;
                let ku = k.unsigned_abs() as u32;
                if *k >= 0 {
                    Some((an * ku, ad * ku, ae))
                } else {
                    Some((ad * ku, an * ku, ae))
                }
            }
            Expression::Exp(a) => {
                let (an, ad, ae) = rec(a)?;
                // argument must be an exp-free polynomial of degree <= 1
                if ae || ad != 0 || an > 1 {
                    return None;
                }
                Some((0, 0, true))
            }
        }
    }
    rec(e).map(|(n, d, e)| DegreeProfile {
        num_degree: n,
        den_degree: d,
        has_exp: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::Mono;
    use crate::rat::{qi, qr};

    #[test]
    fn parses_sums_left_associated() {
        let e = parse_expression("x1 + x2 + x3", 3).unwrap();
        assert_eq!(
            e,
            Expression::Add(
                Box::new(Expression::Add(
                    Box::new(Expression::Var(1)),
                    Box::new(Expression::Var(2))
                )),
                Box::new(Expression::Var(3))
            )
        );
    }

    #[test]
    fn parses_cross_ratio() {
        let e = parse_expression(
            "(x1*x2 + x3*x4 - x1*x3 - x2*x4) / (x1*x2 + x3*x4 - x3*x2 - x1*x4)",
            4,
        )
        .unwrap();
        assert!(matches!(e, Expression::Div(_, _)));
        assert_eq!(e.max_var(), 4);
    }

    #[test]
    fn rejects_non_integer_exponent() {
        assert_eq!(
            parse_expression("x1 ^ (1/2)", 1).unwrap_err(),
            ExprError::NonIntegerExponent
        );
        assert!(parse_expression("x1 ^ 2", 1).is_ok());
        assert!(parse_expression("x1 ^ (-2)", 1).is_ok());
    }

    #[test]
    fn rejects_out_of_range_variable() {
        assert!(matches!(
            parse_expression("x1 + x5", 3).unwrap_err(),
            ExprError::VarOutOfRange { index: 5, n: 3 }
        ));
    }

    #[test]
    fn reports_syntax_position() {
        match parse_expression("x1 + + x2", 2).unwrap_err() {
            ExprError::Syntax { pos, .. } => assert_eq!(pos, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn expansion_linear() {
        let e = parse_expression("x1 + x2", 2).unwrap();
        let sj = expand_to_jet(&e, &[qi(0), qi(0)], 3).unwrap();
        assert!(sj.is_pure());
        assert_eq!(sj.jet.coeff(&Mono(vec![1, 0])), qi(1));
        assert_eq!(sj.jet.coeff(&Mono(vec![0, 1])), qi(1));
        assert_eq!(sj.jet.coeffs().count(), 2);
    }

    #[test]
    fn expansion_exp_at_zero() {
        let e = parse_expression("exp(x1)", 1).unwrap();
        let sj = expand_to_jet(&e, &[qi(0)], 3).unwrap();
        assert!(sj.is_pure());
        assert_eq!(sj.jet.coeff(&Mono(vec![0])), qi(1));
        assert_eq!(sj.jet.coeff(&Mono(vec![1])), qi(1));
        assert_eq!(sj.jet.coeff(&Mono(vec![2])), qr(1, 2));
        assert_eq!(sj.jet.coeff(&Mono(vec![3])), qr(1, 6));
    }

    #[test]
    fn expansion_exp_off_zero_carries_unit() {
        let e = parse_expression("exp(x1)", 1).unwrap();
        let sj = expand_to_jet(&e, &[qi(2)], 2).unwrap();
        assert_eq!(sj.log_scale, qi(2));
        assert_eq!(sj.jet.coeff(&Mono(vec![0])), qi(1));
        assert_eq!(sj.jet.coeff(&Mono(vec![1])), qi(1));
    }

    #[test]
    fn mixed_units_rejected() {
        let e = parse_expression("exp(x1) + exp(2*x1)", 1).unwrap();
        assert!(matches!(
            expand_to_jet(&e, &[qi(1)], 2).unwrap_err(),
            ExprError::MixedUnits { .. }
        ));
        // at base 0 both units are 1, so the sum is fine
        assert!(expand_to_jet(&e, &[qi(0)], 2).is_ok());
    }

    #[test]
    fn cross_ratio_constant_term() {
        // g = ((x-t)(y-z))/((x-z)(y-t)) at (0,1,2,3):
        // ((0-3)(1-2))/((0-2)(1-3)) = 3/4, by direct rational arithmetic
        let e = parse_expression(
            "(x1*x2 + x3*x4 - x1*x3 - x2*x4) / (x1*x2 + x3*x4 - x3*x2 - x1*x4)",
            4,
        )
        .unwrap();
        let base = vec![qi(0), qi(1), qi(2), qi(3)];
        let (v, u) = eval_at(&e, &base).unwrap();
        assert_eq!(v, qr(3, 4));
        assert!(u.is_zero());
        let sj = expand_to_jet(&e, &base, 2).unwrap();
        assert_eq!(sj.jet.constant_term(), qr(3, 4));
    }

    #[test]
    fn division_by_zero_names_subtree() {
        let e = parse_expression("x1 / (x2 - 1)", 2).unwrap();
        match expand_to_jet(&e, &[qi(0), qi(1)], 2).unwrap_err() {
            ExprError::DivisionByZeroAt { subtree } => {
                assert!(subtree.contains("x2"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn div_of_self_is_one() {
        let e = parse_expression("(1 + x1 + x1*x2) / (1 + x1 + x1*x2)", 2).unwrap();
        let sj = expand_to_jet(&e, &[qi(0), qi(0)], 4).unwrap();
        assert_eq!(sj.jet, MultiJet::constant(2, 4, vec![qi(0), qi(0)], qi(1)));
    }

    #[test]
    fn constant_term_equals_eval() {
        let e = parse_expression("(x1 - 2*x2)^3 / (1 + x1)", 2).unwrap();
        let base = vec![qi(1), qi(3)];
        let (v, _) = eval_at(&e, &base).unwrap();
        let sj = expand_to_jet(&e, &base, 3).unwrap();
        assert_eq!(sj.jet.constant_term(), v);
        assert_eq!(v, qr(-125, 2));
    }

    #[test]
    fn json_round_trip() {
        let v: Value = serde_json::from_str(
            r#"{"op":"add","args":[{"var":1},{"op":"mul","args":[{"const":"3/4"},{"var":2}]}]}"#,
        )
        .unwrap();
        let e = expression_from_json(&v, 2).unwrap();
        let t = parse_expression("x1 + 3*x2/4", 2).unwrap();
        // not structurally identical, but the expansions agree
        let a = expand_to_jet(&e, &[qi(0), qi(0)], 2).unwrap();
        let b = expand_to_jet(&t, &[qi(0), qi(0)], 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degree_profiles() {
        let rational = parse_expression("(x1*x2 - x3) / (x1 + x2)", 3).unwrap();
        let p = degree_profile(&rational).unwrap();
        assert_eq!((p.num_degree, p.den_degree, p.has_exp), (2, 1, false));

        let with_exp = parse_expression("(1 + x2 - x1) * exp(x3 + x4)", 4).unwrap();
        let p = degree_profile(&with_exp).unwrap();
        assert_eq!((p.num_degree, p.den_degree, p.has_exp), (1, 0, true));

        // a sum with an exponential has no rational degree bound
        let bad = parse_expression("x1 + exp(x2)", 2).unwrap();
        assert!(degree_profile(&bad).is_none());

        let exp_nonlinear = parse_expression("exp(x1 * x2)", 2).unwrap();
        assert!(degree_profile(&exp_nonlinear).is_none());
    }
}
