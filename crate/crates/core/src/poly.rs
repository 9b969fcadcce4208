//! Exact multivariate polynomials over the rationals.
//!
//! A [`Polynomial`] is a sparse map from exponent vectors to nonzero
//! [`BigRational`] coefficients over a fixed, user-declared variable order.
//! Differentiation and linear perturbation stay exact; floating point only
//! appears when a polynomial is evaluated or compiled into a [`PolyFn`].
//!
//! The text grammar accepted by [`Polynomial::parse`] is
//!
//! ```text
//! expr   := sign? term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := base ('^' uint)?
//! base   := rational | ident | '(' expr ')'
//! ```
//!
//! where `rational` is `digits ('.' digits)? ('/' digits)?`. Implicit
//! multiplication is rejected.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("invalid exponent at offset {offset}: {message}")]
    Exponent { offset: usize, message: String },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("variable lists differ")]
    VariableMismatch,
    #[error("invalid variable list: {0}")]
    Variables(String),
    #[error("non-finite value {0} cannot be converted to an exact rational")]
    NonFinite(f64),
}

pub type Exponent = Vec<u32>;

/// Sparse polynomial with exact rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial {
    vars: Vec<String>,
    terms: BTreeMap<Exponent, BigRational>,
}

impl Polynomial {
    pub fn zero(vars: &[String]) -> Self {
        Polynomial {
            vars: vars.to_vec(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: &[String], c: BigRational) -> Self {
        let mut p = Self::zero(vars);
        if !c.is_zero() {
            p.terms.insert(vec![0; vars.len()], c);
        }
        p
    }

    /// The coordinate function `x_i`.
    pub fn variable(vars: &[String], i: usize) -> Self {
        let mut e = vec![0; vars.len()];
        e[i] = 1;
        let mut p = Self::zero(vars);
        p.terms.insert(e, BigRational::one());
        p
    }

    /// Builds a polynomial from raw terms, merging duplicates and dropping zeros.
    pub fn from_terms<I>(vars: &[String], terms: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (Exponent, BigRational)>,
    {
        let mut p = Self::zero(vars);
        for (e, c) in terms {
            if e.len() != vars.len() {
                return Err(PolyError::DimensionMismatch {
                    expected: vars.len(),
                    found: e.len(),
                });
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    pub fn parse(text: &str, vars: &[String]) -> Result<Self, PolyError> {
        validate_vars(vars)?;
        Parser::new(text, vars)?.parse_all()
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn terms(&self) -> &BTreeMap<Exponent, BigRational> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|&k| k == 0))
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Largest absolute coefficient, as a float.
    pub fn coefficient_scale(&self) -> f64 {
        self.terms
            .values()
            .map(|c| ratio_to_f64(c).abs())
            .fold(0.0, f64::max)
    }

    fn add_term(&mut self, e: Exponent, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(e);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn check_same_vars(&self, other: &Self) -> Result<(), PolyError> {
        if self.vars == other.vars {
            Ok(())
        } else {
            Err(PolyError::VariableMismatch)
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, PolyError> {
        self.check_same_vars(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, PolyError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Polynomial {
            vars: self.vars.clone(),
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        let mut out = Self::zero(&self.vars);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Result<Self, PolyError> {
        self.check_same_vars(other)?;
        let mut out = Self::zero(&self.vars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        Ok(out)
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut result = Self::constant(&self.vars, BigRational::one());
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base).expect("same variables");
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base).expect("same variables");
            }
        }
        result
    }

    /// Partial derivative with respect to variable `i`.
    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Self::zero(&self.vars);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut d = e.clone();
            d[i] -= 1;
            out.add_term(d, c * BigRational::from_integer(BigInt::from(e[i])));
        }
        out
    }

    pub fn gradient(&self) -> PolyVector {
        PolyVector {
            entries: (0..self.nvars()).map(|i| self.derivative(i)).collect(),
        }
    }

    pub fn hessian(&self) -> PolyMatrix {
        let n = self.nvars();
        let entries = self
            .gradient()
            .entries
            .iter()
            .map(|gi| (0..n).map(|j| gi.derivative(j)).collect())
            .collect();
        PolyMatrix { entries }
    }

    /// Returns `f - Σ t_i x_i`.
    pub fn perturb(&self, t: &[BigRational]) -> Result<Self, PolyError> {
        if t.len() != self.nvars() {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars(),
                found: t.len(),
            });
        }
        let mut out = self.clone();
        for (i, ti) in t.iter().enumerate() {
            let mut e = vec![0; self.nvars()];
            e[i] = 1;
            out.add_term(e, -ti.clone());
        }
        Ok(out)
    }

    /// [`Polynomial::perturb`] with a float vector, converted exactly.
    pub fn perturb_f64(&self, t: &[f64]) -> Result<Self, PolyError> {
        let exact = t
            .iter()
            .map(|&x| f64_to_ratio(x))
            .collect::<Result<Vec<_>, _>>()?;
        self.perturb(&exact)
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64, PolyError> {
        if point.len() != self.nvars() {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars(),
                found: point.len(),
            });
        }
        Ok(CompiledPoly::new(self).eval(point))
    }
}

fn validate_vars(vars: &[String]) -> Result<(), PolyError> {
    if vars.is_empty() {
        return Err(PolyError::Variables(
            "at least one variable is required".into(),
        ));
    }
    for (i, v) in vars.iter().enumerate() {
        let mut chars = v.chars();
        let ok = chars
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !ok {
            return Err(PolyError::Variables(format!("`{v}` is not an identifier")));
        }
        if vars[..i].contains(v) {
            return Err(PolyError::Variables(format!("`{v}` declared twice")));
        }
    }
    Ok(())
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn f64_to_ratio(x: f64) -> Result<BigRational, PolyError> {
    BigRational::from_float(x).ok_or(PolyError::NonFinite(x))
}

fn graded_order(a: &Exponent, b: &Exponent) -> std::cmp::Ordering {
    let da: u32 = a.iter().sum();
    let db: u32 = b.iter().sum();
    db.cmp(&da).then_with(|| b.cmp(a))
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut keys: Vec<&Exponent> = self.terms.keys().collect();
        keys.sort_by(|a, b| graded_order(a, b));
        for (k, e) in keys.into_iter().enumerate() {
            let c = &self.terms[e];
            let negative = c.is_negative();
            if k == 0 {
                if negative {
                    f.write_str("-")?;
                }
            } else if negative {
                f.write_str(" - ")?;
            } else {
                f.write_str(" + ")?;
            }
            let mag = c.abs();
            let monomial: Vec<String> = e
                .iter()
                .zip(&self.vars)
                .filter(|(&p, _)| p > 0)
                .map(|(&p, v)| {
                    if p == 1 {
                        v.clone()
                    } else {
                        format!("{v}^{p}")
                    }
                })
                .collect();
            if monomial.is_empty() {
                write!(f, "{mag}")?;
            } else {
                if !mag.is_one() {
                    write!(f, "{mag}*")?;
                }
                f.write_str(&monomial.join("*"))?;
            }
        }
        Ok(())
    }
}

/// Gradient of a polynomial, one entry per variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyVector {
    pub entries: Vec<Polynomial>,
}

/// Square matrix of polynomials; symmetric when produced by [`Polynomial::hessian`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyMatrix {
    pub entries: Vec<Vec<Polynomial>>,
}

impl PolyMatrix {
    pub fn is_symmetric(&self) -> bool {
        let n = self.entries.len();
        (0..n).all(|i| (0..n).all(|j| self.entries[i][j] == self.entries[j][i]))
    }
}

/// Float-coefficient copy of a polynomial for fast repeated evaluation.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    terms: Vec<(Exponent, f64)>,
}

impl CompiledPoly {
    pub fn new(p: &Polynomial) -> Self {
        CompiledPoly {
            terms: p
                .terms
                .iter()
                .map(|(e, c)| (e.clone(), ratio_to_f64(c)))
                .collect(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut m = *c;
            for (xi, &k) in x.iter().zip(e) {
                if k > 0 {
                    m *= xi.powi(k as i32);
                }
            }
            acc += m;
        }
        acc
    }
}

/// A polynomial together with its compiled gradient and Hessian.
#[derive(Clone, Debug)]
pub struct PolyFn {
    value: CompiledPoly,
    grad: Vec<CompiledPoly>,
    hess: Vec<Vec<CompiledPoly>>,
    dim: usize,
}

impl PolyFn {
    pub fn new(p: &Polynomial) -> Self {
        let grad = p.gradient();
        let hess = p.hessian();
        PolyFn {
            value: CompiledPoly::new(p),
            grad: grad.entries.iter().map(CompiledPoly::new).collect(),
            hess: hess
                .entries
                .iter()
                .map(|row| row.iter().map(CompiledPoly::new).collect())
                .collect(),
            dim: p.nvars(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.value.eval(x)
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.dim, self.grad.iter().map(|g| g.eval(x)))
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.hess[i][j].eval(x);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational, bool),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
    End,
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: &'a [String],
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, PolyError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let digits = |i: &mut usize| {
        let s = *i;
        while *i < bytes.len() && bytes[*i].is_ascii_digit() {
            *i += 1;
        }
        &text[s..*i]
    };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((Tok::Plus, i)),
            b'-' => out.push((Tok::Minus, i)),
            b'*' => out.push((Tok::Star, i)),
            b'^' => out.push((Tok::Caret, i)),
            b'(' => out.push((Tok::LParen, i)),
            b')' => out.push((Tok::RParen, i)),
            b'0'..=b'9' | b'.' => {
                let int_part = digits(&mut i);
                let mut frac_part = "";
                let mut integral = true;
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    frac_part = digits(&mut i);
                    integral = false;
                    if int_part.is_empty() && frac_part.is_empty() {
                        return Err(PolyError::Syntax {
                            offset: start,
                            message: "malformed number".into(),
                        });
                    }
                }
                let mantissa: BigInt = format!("{int_part}{frac_part}")
                    .parse()
                    .expect("digit string");
                let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
                let mut value = BigRational::new(mantissa, scale);
                if i < bytes.len() && bytes[i] == b'/' {
                    let slash = i;
                    i += 1;
                    let den = digits(&mut i);
                    if den.is_empty() {
                        return Err(PolyError::Syntax {
                            offset: i,
                            message: "expected denominator after '/'".into(),
                        });
                    }
                    let den: BigInt = den.parse().expect("digit string");
                    if den.is_zero() {
                        return Err(PolyError::Syntax {
                            offset: slash,
                            message: "zero denominator".into(),
                        });
                    }
                    value /= BigRational::from_integer(den);
                    integral = false;
                }
                out.push((Tok::Num(value, integral), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
                continue;
            }
            b'/' => {
                return Err(PolyError::Syntax {
                    offset: i,
                    message: "'/' is only allowed inside a rational literal".into(),
                })
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(PolyError::Syntax {
                    offset: i,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        }
        i += 1;
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

impl<'a> Parser<'a> {
    fn new(text: &str, vars: &'a [String]) -> Result<Self, PolyError> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
            vars,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax<T>(&self, message: &str) -> Result<T, PolyError> {
        Err(PolyError::Syntax {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn parse_all(mut self) -> Result<Polynomial, PolyError> {
        let p = self.expr()?;
        if *self.peek() != Tok::End {
            return self.syntax("unexpected trailing input");
        }
        Ok(p)
    }

    fn expr(&mut self) -> Result<Polynomial, PolyError> {
        let negate = match self.peek() {
            Tok::Minus => {
                self.bump();
                true
            }
            Tok::Plus => {
                self.bump();
                false
            }
            _ => false,
        };
        let mut acc = self.term()?;
        if negate {
            acc = acc.neg();
        }
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = acc.add(&self.term()?)?;
                }
                Tok::Minus => {
                    self.bump();
                    acc = acc.sub(&self.term()?)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial, PolyError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    acc = acc.mul(&self.factor()?)?;
                }
                Tok::Num(..) | Tok::Ident(_) | Tok::LParen => {
                    return self.syntax("implicit multiplication is not allowed; use '*'")
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Polynomial, PolyError> {
        let base = self.base()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let offset = self.offset();
        match self.bump().0 {
            Tok::Num(v, true) => {
                let k = v.to_integer().to_u32().ok_or_else(|| PolyError::Exponent {
                    offset,
                    message: "exponent too large".into(),
                })?;
                Ok(base.pow(k))
            }
            Tok::Num(_, false) => Err(PolyError::Exponent {
                offset,
                message: "exponent must be a non-negative integer, found a fraction".into(),
            }),
            Tok::Minus => Err(PolyError::Exponent {
                offset,
                message: "negative exponents are not allowed".into(),
            }),
            _ => Err(PolyError::Syntax {
                offset,
                message: "expected an integer exponent after '^'".into(),
            }),
        }
    }

    fn base(&mut self) -> Result<Polynomial, PolyError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v, _) => {
                self.bump();
                Ok(Polynomial::constant(self.vars, v))
            }
            Tok::Ident(name) => {
                self.bump();
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => Ok(Polynomial::variable(self.vars, i)),
                    None => Err(PolyError::UnknownIdentifier { name, offset }),
                }
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return self.syntax("expected ')'");
                }
                self.bump();
                Ok(inner)
            }
            Tok::End => self.syntax("unexpected end of input"),
            _ => self.syntax("expected a number, variable or '('"),
        }
    }
}

/// Splits a comma-separated variable list such as `x,y,z`.
pub fn parse_var_list(text: &str) -> Result<Vec<String>, PolyError> {
    let vars: Vec<String> = text.split(',').map(|s| s.trim().to_string()).collect();
    validate_vars(&vars)?;
    Ok(vars)
}
