//! Periodic level-set expressions.
//!
//! An expression is a sum/product tree of `sin`/`cos` terms over the scaled
//! coordinates `X = 2πx`, `Y = 2πy`, `Z = 2πz`. Every variable must sit inside
//! a trigonometric argument whose coefficients are integers, so the parsed
//! function is 2π-periodic in each variable (1-periodic in cell coordinates).
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary ('*' unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' '2')?
//! primary := number | 'X' | 'Y' | 'Z' | ('sin' | 'cos') '(' expr ')' | '(' expr ')'
//! ```

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Smallest grid resolution accepted by [`LevelSetExpr::evaluate_grid`].
pub const MIN_GRID_RESOLUTION: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("empty expression")]
    Empty,
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("unexpected token {0:?}")]
    UnexpectedToken(String),
    #[error("unknown identifier {0:?}")]
    UnknownIdentifier(String),
    #[error("invalid number literal {0:?}")]
    InvalidNumber(String),
    #[error("only the exponent 2 is supported")]
    UnsupportedExponent,
    #[error("variable used outside a periodic sin/cos argument")]
    NonPeriodic,
    #[error("trigonometric argument has a non-integer frequency")]
    NonIntegerFrequency,
    #[error("expression uses {used} dimensions but {requested} were requested")]
    DimensionMismatch { used: usize, requested: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} at byte {offset}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
}

impl ParseError {
    fn new(kind: ParseErrorKind, offset: usize) -> Self {
        Self { kind, offset }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Axis),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Square(Box<Node>),
    Sin(Box<Node>),
    Cos(Box<Node>),
}

impl Node {
    /// Evaluates the tree with variables bound to already-scaled values.
    pub fn eval(&self, vars: &[f64; 3]) -> f64 {
        match self {
            Node::Const(c) => *c,
            Node::Var(a) => vars[a.index()],
            Node::Neg(a) => -a.eval(vars),
            Node::Add(a, b) => a.eval(vars) + b.eval(vars),
            Node::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Node::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Node::Square(a) => {
                let v = a.eval(vars);
                v * v
            }
            Node::Sin(a) => a.eval(vars).sin(),
            Node::Cos(a) => a.eval(vars).cos(),
        }
    }

    fn max_axis(&self) -> Option<usize> {
        match self {
            Node::Const(_) => None,
            Node::Var(a) => Some(a.index()),
            Node::Neg(a) | Node::Square(a) | Node::Sin(a) | Node::Cos(a) => a.max_axis(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) => {
                match (a.max_axis(), b.max_axis()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) => 2,
            Node::Neg(..) => 3,
            Node::Square(..) => 4,
            Node::Const(_) | Node::Var(_) | Node::Sin(_) | Node::Cos(_) => 5,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) => write!(f, "{c}"),
            Node::Var(a) => f.write_str(a.name()),
            Node::Neg(a) => {
                f.write_str("-")?;
                a.fmt_child(f, 3)
            }
            Node::Add(a, b) => {
                a.fmt_child(f, 1)?;
                f.write_str(" + ")?;
                b.fmt_child(f, 2)
            }
            Node::Sub(a, b) => {
                a.fmt_child(f, 1)?;
                f.write_str(" - ")?;
                b.fmt_child(f, 2)
            }
            Node::Mul(a, b) => {
                a.fmt_child(f, 2)?;
                f.write_str("*")?;
                b.fmt_child(f, 3)
            }
            Node::Square(a) => {
                a.fmt_child(f, 5)?;
                f.write_str("^2")
            }
            Node::Sin(a) => write!(f, "sin({a})"),
            Node::Cos(a) => write!(f, "cos({a})"),
        }
    }
}

/// A parsed periodic level-set function over 2 or 3 cell coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetExpr {
    ast: Node,
    dims: usize,
    source: String,
}

impl LevelSetExpr {
    /// Parses `text`; `dims` is 3 when `Z` appears and 2 otherwise.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let ast = Parser::new(text).parse()?;
        let dims = if ast.max_axis() == Some(2) { 3 } else { 2 };
        Ok(Self {
            ast,
            dims,
            source: text.to_string(),
        })
    }

    /// Parses `text` as a function of exactly `dims` coordinates.
    pub fn parse_with_dims(text: &str, dims: usize) -> Result<Self, ParseError> {
        let mut expr = Self::parse(text)?;
        if !(2..=3).contains(&dims) || dims < expr.dims {
            return Err(ParseError::new(
                ParseErrorKind::DimensionMismatch {
                    used: expr.dims,
                    requested: dims,
                },
                0,
            ));
        }
        expr.dims = dims;
        Ok(expr)
    }

    pub fn ast(&self) -> &Node {
        &self.ast
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn source_text(&self) -> &str {
        &self.source
    }

    /// Evaluates at a point in cell coordinates; missing coordinates are 0.
    pub fn evaluate(&self, point: &[f64]) -> f64 {
        let mut vars = [0.0; 3];
        for (v, p) in vars.iter_mut().zip(point) {
            *v = TAU * p;
        }
        self.ast.eval(&vars)
    }

    /// Samples the function at voxel centers `(i + 0.5) / n` on an `n^dims`
    /// grid. Layout is row-major with x fastest: `x + n * (y + n * z)`.
    pub fn evaluate_grid(&self, n: usize) -> Result<ScalarField, GridError> {
        if n < MIN_GRID_RESOLUTION {
            return Err(GridError::ResolutionTooSmall {
                n,
                min: MIN_GRID_RESOLUTION,
            });
        }
        let nz = if self.dims == 3 { n } else { 1 };
        let mut values = Vec::with_capacity(n * n * nz);
        let scale = TAU / n as f64;
        for k in 0..nz {
            let z = if self.dims == 3 { (k as f64 + 0.5) * scale } else { 0.0 };
            for j in 0..n {
                let y = (j as f64 + 0.5) * scale;
                for i in 0..n {
                    let x = (i as f64 + 0.5) * scale;
                    values.push(self.ast.eval(&[x, y, z]));
                }
            }
        }
        Ok(ScalarField {
            n,
            dims: self.dims,
            values,
        })
    }
}

impl fmt::Display for LevelSetExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.ast.fmt(f)
    }
}

impl FromStr for LevelSetExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("grid resolution {n} is below the minimum of {min}")]
    ResolutionTooSmall { n: usize, min: usize },
}

/// Samples of a level-set function on a regular periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub n: usize,
    pub dims: usize,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Center coordinate of voxel `idx` in `[0,1)^3` (z = 0.5/n for 2D grids).
    pub fn center(&self, idx: usize) -> [f64; 3] {
        let n = self.n;
        let h = 1.0 / n as f64;
        let i = idx % n;
        let j = (idx / n) % n;
        let k = idx / (n * n);
        [
            (i as f64 + 0.5) * h,
            (j as f64 + 0.5) * h,
            (k as f64 + 0.5) * h,
        ]
    }
}

/// How a level-set function is turned into solid material at isovalue `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum FamilyForm {
    /// Solid where `f <= t`.
    #[serde(rename = "LE")]
    Le,
    /// Solid where `f >= t`.
    #[serde(rename = "GE")]
    Ge,
    /// Solid where `f^2 <= t^2` (thin-walled sheet around `f = 0`), evaluated
    /// as `|f| <= |t|` so that rounding cannot break monotonicity.
    #[serde(rename = "SQ")]
    Sq,
}

impl FamilyForm {
    #[inline]
    pub fn is_solid(self, f: f64, t: f64) -> bool {
        match self {
            FamilyForm::Le => f <= t,
            FamilyForm::Ge => f >= t,
            FamilyForm::Sq => f.abs() <= t.abs(),
        }
    }

    /// Signed level value whose zero crossing is the surface; negative is solid.
    #[inline]
    pub fn level(self, f: f64, t: f64) -> f64 {
        match self {
            FamilyForm::Le => f - t,
            FamilyForm::Ge => t - f,
            FamilyForm::Sq => f.abs() - t.abs(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FamilyForm::Le => "LE",
            FamilyForm::Ge => "GE",
            FamilyForm::Sq => "SQ",
        }
    }
}

impl fmt::Display for FamilyForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyForm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "LE" => Ok(FamilyForm::Le),
            "GE" => Ok(FamilyForm::Ge),
            "SQ" => Ok(FamilyForm::Sq),
            other => Err(format!("unknown family form {other:?} (expected LE, GE or SQ)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub family_id: String,
    pub expr: LevelSetExpr,
    pub form: FamilyForm,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("line {line}: expected `family_id | expression | form`")]
    Malformed { line: usize },
    #[error("line {line}: {source}")]
    Expr {
        line: usize,
        #[source]
        source: ParseError,
    },
    #[error("line {line}: {message}")]
    Form { line: usize, message: String },
    #[error("line {line}: duplicate family id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("reading catalog: {0}")]
    Io(#[from] std::io::Error),
}

/// Parses a family catalog: one `family_id | expression | form` per line,
/// `#` starts a comment. Expressions are promoted to `dims` coordinates.
pub fn parse_catalog(text: &str, dims: usize) -> Result<Vec<CatalogEntry>, CatalogError> {
    let mut out: Vec<CatalogEntry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let parts: Vec<&str> = content.split('|').map(str::trim).collect();
        if parts.len() != 3 || parts[0].is_empty() {
            return Err(CatalogError::Malformed { line });
        }
        let expr = LevelSetExpr::parse_with_dims(parts[1], dims)
            .map_err(|source| CatalogError::Expr { line, source })?;
        let form = parts[2]
            .parse()
            .map_err(|message| CatalogError::Form { line, message })?;
        if out.iter().any(|e| e.family_id == parts[0]) {
            return Err(CatalogError::DuplicateId {
                line,
                id: parts[0].to_string(),
            });
        }
        out.push(CatalogEntry {
            family_id: parts[0].to_string(),
            expr,
            form,
        });
    }
    Ok(out)
}

pub fn read_catalog(path: &std::path::Path, dims: usize) -> Result<Vec<CatalogEntry>, CatalogError> {
    let text = std::fs::read_to_string(path)?;
    parse_catalog(&text, dims)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&b) = bytes.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let tok = match b {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                let mut end = self.pos;
                while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                    end += 1;
                }
                if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                    let mut e = end + 1;
                    if e < bytes.len() && (bytes[e] == b'+' || bytes[e] == b'-') {
                        e += 1;
                    }
                    if e < bytes.len() && bytes[e].is_ascii_digit() {
                        while e < bytes.len() && bytes[e].is_ascii_digit() {
                            e += 1;
                        }
                        end = e;
                    }
                }
                let text = &self.src[start..end];
                self.pos = end;
                return text
                    .parse::<f64>()
                    .map(|v| (Tok::Num(v), start))
                    .map_err(|_| {
                        ParseError::new(ParseErrorKind::InvalidNumber(text.to_string()), start)
                    });
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut end = self.pos;
                while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_')
                {
                    end += 1;
                }
                self.pos = end;
                return Ok((Tok::Ident(self.src[start..end].to_string()), start));
            }
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('\0');
                return Err(ParseError::new(ParseErrorKind::UnexpectedChar(ch), start));
            }
        };
        self.pos += 1;
        Ok((tok, start))
    }
}

/// Periodicity class of a subtree, used to reject non-periodic input.
#[derive(Debug, Clone, Copy)]
enum Class {
    Const,
    /// `c0 + cx*X + cy*Y + cz*Z` with at least one non-zero coefficient.
    Affine([f64; 3]),
    Periodic,
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            lexer: Lexer { src, pos: 0 },
            tok: Tok::End,
            at: 0,
        }
    }

    fn bump(&mut self) -> Result<(), ParseError> {
        let (tok, at) = self.lexer.next()?;
        self.tok = tok;
        self.at = at;
        Ok(())
    }

    fn unexpected(&self) -> ParseError {
        match &self.tok {
            Tok::End => ParseError::new(ParseErrorKind::UnexpectedEnd, self.at),
            t => ParseError::new(ParseErrorKind::UnexpectedToken(format!("{t:?}")), self.at),
        }
    }

    fn parse(mut self) -> Result<Node, ParseError> {
        if self.lexer.src.trim().is_empty() {
            return Err(ParseError::new(ParseErrorKind::Empty, 0));
        }
        self.bump()?;
        let (node, class) = self.expr()?;
        if self.tok != Tok::End {
            return Err(self.unexpected());
        }
        if let Class::Affine(_) = class {
            return Err(ParseError::new(ParseErrorKind::NonPeriodic, 0));
        }
        Ok(node)
    }

    fn expr(&mut self) -> Result<(Node, Class), ParseError> {
        let (mut lhs, mut lc) = self.term()?;
        loop {
            let neg = match self.tok {
                Tok::Plus => false,
                Tok::Minus => true,
                _ => break,
            };
            let at = self.at;
            self.bump()?;
            let (rhs, rc) = self.term()?;
            lc = combine_additive(lc, rc, neg).ok_or(ParseError::new(ParseErrorKind::NonPeriodic, at))?;
            lhs = if neg {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Add(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok((lhs, lc))
    }

    fn term(&mut self) -> Result<(Node, Class), ParseError> {
        let (mut lhs, mut lc) = self.unary()?;
        while self.tok == Tok::Star {
            let at = self.at;
            self.bump()?;
            let (rhs, rc) = self.unary()?;
            lc = combine_product(lc, rc, &lhs, &rhs)
                .ok_or(ParseError::new(ParseErrorKind::NonPeriodic, at))?;
            lhs = Node::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok((lhs, lc))
    }

    fn unary(&mut self) -> Result<(Node, Class), ParseError> {
        if self.tok == Tok::Minus {
            self.bump()?;
            let (inner, class) = self.unary()?;
            let class = match class {
                Class::Affine(c) => Class::Affine([-c[0], -c[1], -c[2]]),
                other => other,
            };
            return Ok((Node::Neg(Box::new(inner)), class));
        }
        self.power()
    }

    fn power(&mut self) -> Result<(Node, Class), ParseError> {
        let start = self.at;
        let (base, class) = self.primary()?;
        if self.tok != Tok::Caret {
            return Ok((base, class));
        }
        self.bump()?;
        match self.tok {
            Tok::Num(v) if v == 2.0 => {}
            Tok::End => return Err(self.unexpected()),
            _ => return Err(ParseError::new(ParseErrorKind::UnsupportedExponent, self.at)),
        }
        self.bump()?;
        let class = match class {
            Class::Affine(_) => return Err(ParseError::new(ParseErrorKind::NonPeriodic, start)),
            other => other,
        };
        Ok((Node::Square(Box::new(base)), class))
    }

    fn primary(&mut self) -> Result<(Node, Class), ParseError> {
        let at = self.at;
        match std::mem::replace(&mut self.tok, Tok::End) {
            Tok::Num(v) => {
                self.bump()?;
                Ok((Node::Const(v), Class::Const))
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump()?;
                match name.as_str() {
                    "X" | "Y" | "Z" => {
                        let axis = match name.as_str() {
                            "X" => Axis::X,
                            "Y" => Axis::Y,
                            _ => Axis::Z,
                        };
                        let mut coeffs = [0.0; 3];
                        coeffs[axis.index()] = 1.0;
                        Ok((Node::Var(axis), Class::Affine(coeffs)))
                    }
                    "sin" | "cos" => {
                        if self.tok != Tok::LParen {
                            return Err(self.unexpected());
                        }
                        self.bump()?;
                        let (arg, class) = self.expr()?;
                        self.expect_rparen()?;
                        let class = match class {
                            Class::Const => Class::Const,
                            Class::Periodic => Class::Periodic,
                            Class::Affine(c) => {
                                if c.iter().any(|v| (v - v.round()).abs() > 1e-12) {
                                    return Err(ParseError::new(
                                        ParseErrorKind::NonIntegerFrequency,
                                        at,
                                    ));
                                }
                                Class::Periodic
                            }
                        };
                        let node = if name == "sin" {
                            Node::Sin(Box::new(arg))
                        } else {
                            Node::Cos(Box::new(arg))
                        };
                        Ok((node, class))
                    }
                    _ => Err(ParseError::new(ParseErrorKind::UnknownIdentifier(name), at)),
                }
            }
            other => {
                self.tok = other;
                Err(self.unexpected())
            }
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if self.tok != Tok::RParen {
            return Err(self.unexpected());
        }
        self.bump()
    }
}

fn combine_additive(a: Class, b: Class, negate_b: bool) -> Option<Class> {
    let s = if negate_b { -1.0 } else { 1.0 };
    match (a, b) {
        (Class::Const, Class::Const) => Some(Class::Const),
        (Class::Affine(x), Class::Const) => Some(Class::Affine(x)),
        (Class::Const, Class::Affine(y)) => Some(Class::Affine([s * y[0], s * y[1], s * y[2]])),
        (Class::Affine(x), Class::Affine(y)) => {
            let c = [x[0] + s * y[0], x[1] + s * y[1], x[2] + s * y[2]];
            if c.iter().all(|v| *v == 0.0) {
                Some(Class::Const)
            } else {
                Some(Class::Affine(c))
            }
        }
        (Class::Periodic, Class::Affine(_)) | (Class::Affine(_), Class::Periodic) => None,
        _ => Some(Class::Periodic),
    }
}

fn combine_product(a: Class, b: Class, lhs: &Node, rhs: &Node) -> Option<Class> {
    match (a, b) {
        (Class::Const, Class::Const) => Some(Class::Const),
        (Class::Const, Class::Affine(y)) => {
            let k = const_value(lhs)?;
            Some(Class::Affine([k * y[0], k * y[1], k * y[2]]))
        }
        (Class::Affine(x), Class::Const) => {
            let k = const_value(rhs)?;
            Some(Class::Affine([k * x[0], k * x[1], k * x[2]]))
        }
        (Class::Affine(_), _) | (_, Class::Affine(_)) => None,
        _ => Some(Class::Periodic),
    }
}

fn const_value(node: &Node) -> Option<f64> {
    let v = node.eval(&[0.0; 3]);
    v.is_finite().then_some(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> LevelSetExpr {
        LevelSetExpr::parse(s).unwrap()
    }

    #[test]
    fn cos_at_origin() {
        assert_eq!(p("cos(X)").evaluate(&[0.0]), 1.0);
    }

    #[test]
    fn primitive_infers_three_dims() {
        let e = p("cos(X)+cos(Y)+cos(Z)");
        assert_eq!(e.dims(), 3);
        assert_eq!(p("cos(X)*sin(Y)").dims(), 2);
    }

    #[test]
    fn unbalanced_paren_reports_offset() {
        let err = LevelSetExpr::parse("cos(").unwrap_err();
        assert_eq!(err.offset, 4);
        assert_eq!(err.kind, ParseErrorKind::UnexpectedEnd);
    }

    #[test]
    fn error_cases() {
        assert_eq!(LevelSetExpr::parse("").unwrap_err().kind, ParseErrorKind::Empty);
        assert_eq!(LevelSetExpr::parse("   ").unwrap_err().kind, ParseErrorKind::Empty);
        let e = LevelSetExpr::parse("cos(W)").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownIdentifier("W".into()));
        assert_eq!(e.offset, 4);
        // case sensitive
        assert!(matches!(
            LevelSetExpr::parse("cos(x)").unwrap_err().kind,
            ParseErrorKind::UnknownIdentifier(_)
        ));
        assert!(matches!(
            LevelSetExpr::parse("tan(X)").unwrap_err().kind,
            ParseErrorKind::UnknownIdentifier(_)
        ));
        assert_eq!(
            LevelSetExpr::parse("cos(X)^3").unwrap_err().kind,
            ParseErrorKind::UnsupportedExponent
        );
        assert_eq!(LevelSetExpr::parse("X + cos(Y)").unwrap_err().kind, ParseErrorKind::NonPeriodic);
        assert_eq!(LevelSetExpr::parse("X").unwrap_err().kind, ParseErrorKind::NonPeriodic);
        assert_eq!(
            LevelSetExpr::parse("cos(0.5*X)").unwrap_err().kind,
            ParseErrorKind::NonIntegerFrequency
        );
        assert_eq!(LevelSetExpr::parse("cos(X*Y)").unwrap_err().kind, ParseErrorKind::NonPeriodic);
        assert!(LevelSetExpr::parse("cos(X) cos(Y)").is_err());
        assert!(LevelSetExpr::parse("cos(X) $").is_err());
    }

    #[test]
    fn accepts_integer_combinations_and_constants() {
        let e = p("cos(2*X - Y + 3) + sin(X + Y + Z)^2 - 0.5");
        assert_eq!(e.dims(), 3);
        let e = p("cos(X + Y - X)");
        assert!((e.evaluate(&[0.3, 0.0]) - 1.0).abs() < 1e-12);
        // variables cancelling outside trig are constant
        assert!(LevelSetExpr::parse("cos(X) + (X - X)").is_ok());
    }

    #[test]
    fn precedence() {
        // ^2 binds tighter than unary minus
        let e = p("-cos(X)^2");
        assert_eq!(e.evaluate(&[0.0]), -1.0);
        let e = p("1 + 2 * 3 - 4");
        assert_eq!(e.evaluate(&[0.0]), 3.0);
        let e = p("2 - 3 - 4");
        assert_eq!(e.evaluate(&[0.0]), -5.0);
        let e = p("(1 + 2) * 3");
        assert_eq!(e.evaluate(&[0.0]), 9.0);
    }

    #[test]
    fn primitive_quarter_point_is_zero() {
        let e = p("cos(X)+cos(Y)+cos(Z)");
        assert!(e.evaluate(&[0.25, 0.25, 0.25]).abs() < 1e-15);
        assert_eq!(p("cos(X)").evaluate(&[0.5]), -1.0);
    }

    #[test]
    fn grid_layout_and_minimum() {
        let e = LevelSetExpr::parse_with_dims("cos(X)", 3).unwrap();
        let g = e.evaluate_grid(8).unwrap();
        assert_eq!(g.len(), 512);
        for k in 0..8 {
            for j in 0..8 {
                for i in 0..8 {
                    assert_eq!(g.values[i + 8 * (j + 8 * k)], g.values[i]);
                }
            }
        }
        assert_eq!(
            e.evaluate_grid(7).unwrap_err(),
            GridError::ResolutionTooSmall { n: 7, min: 8 }
        );
        let g2 = p("cos(X)").evaluate_grid(8).unwrap();
        assert_eq!(g2.len(), 64);
    }

    #[test]
    fn grid_negation() {
        let e = p("sin(X)*cos(Y)+sin(Y)*cos(Z)+sin(Z)*cos(X)");
        let neg = p("-(sin(X)*cos(Y)+sin(Y)*cos(Z)+sin(Z)*cos(X))");
        let a = e.evaluate_grid(12).unwrap();
        let b = neg.evaluate_grid(12).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn grid_matches_pointwise() {
        use rand::{Rng, SeedableRng};
        let e = p("cos(X)*sin(2*Y) + cos(Z - X)^2");
        let g = e.evaluate_grid(16).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let idx = rng.gen_range(0..g.len());
            let c = g.center(idx);
            assert!((g.values[idx] - e.evaluate(&c)).abs() <= 1e-12);
        }
    }

    #[test]
    fn scalar_multiple_is_exact() {
        let e = p("cos(X)+cos(Y)+cos(Z)");
        let e4 = p("4*(cos(X)+cos(Y)+cos(Z))");
        let a = e.evaluate_grid(16).unwrap();
        let b = e4.evaluate_grid(16).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_eq!(4.0 * x, *y);
        }
    }

    #[test]
    fn catalog_parsing() {
        let text = "# comment\n\nP | cos(X)+cos(Y)+cos(Z) | LE\nG2 | cos(X) | SQ # trailing\n";
        let cat = parse_catalog(text, 3).unwrap();
        assert_eq!(cat.len(), 2);
        assert_eq!(cat[1].form, FamilyForm::Sq);
        assert_eq!(cat[1].expr.dims(), 3);
        assert!(matches!(
            parse_catalog("A | cos(X)", 3),
            Err(CatalogError::Malformed { line: 1 })
        ));
        assert!(matches!(
            parse_catalog("A | cos(X) | XX", 3),
            Err(CatalogError::Form { line: 1, .. })
        ));
        assert!(matches!(
            parse_catalog("A | cos( | LE", 3),
            Err(CatalogError::Expr { line: 1, .. })
        ));
        assert!(matches!(
            parse_catalog("A | cos(X) | LE\nA | cos(Y) | GE", 3),
            Err(CatalogError::DuplicateId { line: 2, .. })
        ));
    }

    fn arb_periodic() -> impl Strategy<Value = String> {
        let arg = (-3i32..=3, -3i32..=3, -3i32..=3, -2.0f64..2.0).prop_map(|(a, b, c, d)| {
            format!("{a}*X + {b}*Y + {c}*Z + {d:.3}")
        });
        let leaf = (prop_oneof![Just("sin"), Just("cos")], arg)
            .prop_map(|(f, a)| format!("{f}({a})"));
        leaf.prop_recursive(3, 12, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) + ({b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) - {b}")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} * ({b})")),
                inner.clone().prop_map(|a| format!("-({a})")),
                inner.clone().prop_map(|a| format!("({a})^2")),
                (-3.0f64..3.0, inner).prop_map(|(k, a)| format!("{k:.4}*({a})")),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(src in arb_periodic(), pts in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 100)) {
            let e = LevelSetExpr::parse(&src).unwrap();
            let printed = e.to_string();
            let back = LevelSetExpr::parse(&printed).unwrap();
            for (x, y, z) in pts {
                let a = e.evaluate(&[x, y, z]);
                let b = back.evaluate(&[x, y, z]);
                prop_assert!((a - b).abs() <= 1e-12, "{printed}: {a} vs {b}");
            }
        }

        #[test]
        fn unit_shift_periodicity(src in arb_periodic(), x in 0.0f64..1.0, y in 0.0f64..1.0, z in 0.0f64..1.0) {
            let e = LevelSetExpr::parse(&src).unwrap();
            let a = e.evaluate(&[x, y, z]);
            let b = e.evaluate(&[x + 1.0, y + 1.0, z + 1.0]);
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }
}
