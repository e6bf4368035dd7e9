//! Power counting over monomials in the length scales of a regularized
//! vacuum with matter.
//!
//! Exponents are affine in the undetermined integers `p`, `q`, `q̂` and the
//! derived `s`, `ŝ`. Monomials are only compared after the parameters are
//! bound, and only relative to a declared [`Regime`]: `a ≲ b` holds when
//! `a / b` is a product of non-negative powers of the regime's small
//! quantities. Two derivation paths exist for every relation: parametric
//! closed forms ([`closed_form`]) and a brute-force path ([`brute_force`])
//! that integrates the individual contributions and keeps the dominant terms.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::Rational64;

use crate::error::{CfsError, Result};

pub const SYMBOLS: usize = 8;
pub const PARAMS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sym {
    /// Measure rescaling.
    Sigma,
    /// Operator rescaling.
    Lambda,
    /// Boundedness multiplier.
    Kappa,
    /// Energy-momentum scale.
    Energy,
    /// Regularization length.
    Eps,
    /// Planck length.
    Delta,
    Mass,
    /// Macroscopic length.
    Macro,
}

impl Sym {
    pub const ALL: [Sym; SYMBOLS] =
        [Sym::Sigma, Sym::Lambda, Sym::Kappa, Sym::Energy, Sym::Eps, Sym::Delta, Sym::Mass, Sym::Macro];

    pub fn name(self) -> &'static str {
        match self {
            Sym::Sigma => "σ",
            Sym::Lambda => "λ",
            Sym::Kappa => "κ",
            Sym::Energy => "T",
            Sym::Eps => "ε",
            Sym::Delta => "δ",
            Sym::Mass => "m",
            Sym::Macro => "l",
        }
    }

    /// Power of length carried by the symbol. σ, λ and κ are dimensionless
    /// bookkeeping factors.
    pub fn length_dimension(self) -> i64 {
        match self {
            Sym::Sigma | Sym::Lambda | Sym::Kappa => 0,
            Sym::Energy => -4,
            Sym::Eps | Sym::Delta | Sym::Macro => 1,
            Sym::Mass => -1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Param {
    P,
    Q,
    QHat,
    S,
    SHat,
}

impl Param {
    pub const ALL: [Param; PARAMS] = [Param::P, Param::Q, Param::QHat, Param::S, Param::SHat];

    pub fn name(self) -> &'static str {
        match self {
            Param::P => "p",
            Param::Q => "q",
            Param::QHat => "q̂",
            Param::S => "s",
            Param::SHat => "ŝ",
        }
    }
}

/// `constant + Σ coeffs[i] · param[i]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exponent {
    pub constant: i64,
    pub coeffs: [i64; PARAMS],
}

impl Exponent {
    pub const ZERO: Exponent = Exponent { constant: 0, coeffs: [0; PARAMS] };

    pub fn param(p: Param) -> Self {
        let mut e = Self::ZERO;
        e.coeffs[p as usize] = 1;
        e
    }

    pub fn as_constant(&self) -> Option<i64> {
        self.coeffs.iter().all(|&c| c == 0).then_some(self.constant)
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }

    pub fn eval(&self, b: &Bindings) -> Result<i64> {
        let mut v = self.constant;
        for p in Param::ALL {
            let c = self.coeffs[p as usize];
            if c != 0 {
                v += c * b.value(p)?;
            }
        }
        Ok(v)
    }
}

impl From<i64> for Exponent {
    fn from(c: i64) -> Self {
        Exponent { constant: c, coeffs: [0; PARAMS] }
    }
}

impl From<Param> for Exponent {
    fn from(p: Param) -> Self {
        Exponent::param(p)
    }
}

impl Add for Exponent {
    type Output = Exponent;
    fn add(mut self, o: Exponent) -> Exponent {
        self.constant += o.constant;
        for (a, b) in self.coeffs.iter_mut().zip(o.coeffs) {
            *a += b;
        }
        self
    }
}

impl Neg for Exponent {
    type Output = Exponent;
    fn neg(self) -> Exponent {
        self * -1
    }
}

impl Sub for Exponent {
    type Output = Exponent;
    fn sub(self, o: Exponent) -> Exponent {
        self + (-o)
    }
}

impl Add<i64> for Exponent {
    type Output = Exponent;
    fn add(self, c: i64) -> Exponent {
        self + Exponent::from(c)
    }
}

impl Sub<i64> for Exponent {
    type Output = Exponent;
    fn sub(self, c: i64) -> Exponent {
        self + Exponent::from(-c)
    }
}

impl Mul<i64> for Exponent {
    type Output = Exponent;
    fn mul(mut self, k: i64) -> Exponent {
        self.constant *= k;
        for c in &mut self.coeffs {
            *c *= k;
        }
        self
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<(i64, &str)> = Param::ALL
            .iter()
            .filter(|p| self.coeffs[**p as usize] != 0)
            .map(|p| (self.coeffs[*p as usize], p.name()))
            .collect();
        if parts.is_empty() {
            return write!(f, "{}", self.constant);
        }
        // "p-8" when a parameter enters positively, "8-ŝ" otherwise.
        let lead_constant = self.constant != 0 && parts.iter().all(|(c, _)| *c < 0);
        let mut out = String::new();
        if lead_constant {
            out.push_str(&self.constant.to_string());
        }
        for (i, (c, name)) in parts.drain(..).enumerate() {
            let sign = if c < 0 {
                "-"
            } else if i == 0 && !lead_constant {
                ""
            } else {
                "+"
            };
            let mag = if c.abs() == 1 { String::new() } else { c.abs().to_string() };
            out.push_str(&format!("{sign}{mag}{name}"));
        }
        if !lead_constant && self.constant != 0 {
            out.push_str(&format!("{:+}", self.constant));
        }
        f.write_str(&out)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    exps: [Exponent; SYMBOLS],
}

impl Monomial {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn of(sym: Sym) -> Self {
        Self::one().with(sym, 1)
    }

    /// Multiplies by `sym^e`.
    pub fn with(mut self, sym: Sym, e: impl Into<Exponent>) -> Self {
        self.exps[sym as usize] = self.exps[sym as usize] + e.into();
        self
    }

    pub fn exponent(&self, sym: Sym) -> Exponent {
        self.exps[sym as usize]
    }

    pub fn is_one(&self) -> bool {
        self.exps.iter().all(Exponent::is_zero)
    }

    pub fn is_concrete(&self) -> bool {
        self.exps.iter().all(|e| e.as_constant().is_some())
    }

    /// Raises to a power; a parametric power needs a concrete base so the
    /// result stays affine.
    pub fn pow(&self, e: impl Into<Exponent>) -> Result<Monomial> {
        let e = e.into();
        if let Some(k) = e.as_constant() {
            let mut out = *self;
            for x in &mut out.exps {
                *x = *x * k;
            }
            return Ok(out);
        }
        let base = self
            .concrete()
            .ok_or_else(|| CfsError::InvalidInput(format!("parametric power of parametric monomial {self}")))?;
        let mut out = Monomial::one();
        for (x, b) in out.exps.iter_mut().zip(base) {
            *x = e * b;
        }
        Ok(out)
    }

    pub fn eval(&self, b: &Bindings) -> Result<Monomial> {
        let mut out = Monomial::one();
        for (o, e) in out.exps.iter_mut().zip(&self.exps) {
            *o = Exponent::from(e.eval(b)?);
        }
        Ok(out)
    }

    /// Replaces `sym^k` (k a constant) by `by^k`.
    pub fn substitute(&self, sym: Sym, by: &Monomial) -> Result<Monomial> {
        let k = self
            .exponent(sym)
            .as_constant()
            .ok_or_else(|| CfsError::InvalidInput(format!("parametric power of {} in {self}", sym.name())))?;
        let mut rest = *self;
        rest.exps[sym as usize] = Exponent::ZERO;
        Ok(rest * by.pow(k)?)
    }

    pub fn length_dimension(&self) -> Exponent {
        Sym::ALL.iter().fold(Exponent::ZERO, |acc, s| acc + self.exponent(*s) * s.length_dimension())
    }

    pub fn concrete(&self) -> Option<[i64; SYMBOLS]> {
        let mut v = [0; SYMBOLS];
        for (o, e) in v.iter_mut().zip(&self.exps) {
            *o = e.as_constant()?;
        }
        Some(v)
    }
}

impl Mul for Monomial {
    type Output = Monomial;
    fn mul(mut self, o: Monomial) -> Monomial {
        for (a, b) in self.exps.iter_mut().zip(o.exps) {
            *a = *a + b;
        }
        self
    }
}

impl Div for Monomial {
    type Output = Monomial;
    fn div(mut self, o: Monomial) -> Monomial {
        for (a, b) in self.exps.iter_mut().zip(o.exps) {
            *a = *a - b;
        }
        self
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return f.write_str("1");
        }
        let mut first = true;
        for s in Sym::ALL {
            let e = self.exponent(s);
            if e.is_zero() {
                continue;
            }
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            f.write_str(s.name())?;
            match e.as_constant() {
                Some(1) => {}
                Some(k) => write!(f, "^{k}")?,
                None if e.constant == 0
                    && e.coeffs.iter().filter(|c| **c != 0).count() == 1
                    && e.coeffs.iter().all(|c| *c == 0 || *c == 1) =>
                {
                    write!(f, "^{e}")?
                }
                None => write!(f, "^({e})")?,
            }
        }
        Ok(())
    }
}

/// A sum of monomials; order is irrelevant for comparisons.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MonomialSum {
    pub terms: Vec<Monomial>,
}

impl MonomialSum {
    pub fn new(terms: Vec<Monomial>) -> Self {
        Self { terms }
    }

    pub fn single(m: Monomial) -> Self {
        Self { terms: vec![m] }
    }

    pub fn eval(&self, b: &Bindings) -> Result<Self> {
        Ok(Self { terms: self.terms.iter().map(|t| t.eval(b)).collect::<Result<_>>()? })
    }

    pub fn times(&self, m: &Monomial) -> Self {
        Self { terms: self.terms.iter().map(|t| *t * *m).collect() }
    }

    /// Replaces a linear occurrence of `sym` by a sum, distributing over the
    /// terms. Terms without `sym` pass through.
    pub fn expand(&self, sym: Sym, by: &MonomialSum) -> Result<Self> {
        let mut out = Vec::new();
        for t in &self.terms {
            match t.exponent(sym).as_constant() {
                Some(0) => out.push(*t),
                Some(1) => {
                    let rest = t.substitute(sym, &Monomial::one())?;
                    out.extend(by.terms.iter().map(|b| rest * *b));
                }
                _ => return Err(CfsError::InvalidInput(format!("{} must enter linearly to expand {t}", sym.name()))),
            }
        }
        Ok(Self { terms: out })
    }

    pub fn substitute(&self, sym: Sym, by: &Monomial) -> Result<Self> {
        Ok(Self { terms: self.terms.iter().map(|t| t.substitute(sym, by)).collect::<Result<_>>()? })
    }

    pub fn term_set(&self) -> BTreeSet<Monomial> {
        self.terms.iter().copied().collect()
    }

    pub fn same_terms(&self, other: &MonomialSum) -> bool {
        self.term_set() == other.term_set()
    }

    /// Dominant terms under `regime`, sorted. Two sums scale alike iff
    /// their canonical forms agree.
    pub fn canonical(&self, regime: &Regime) -> Result<MonomialSum> {
        Ok(MonomialSum::new(dominant(&self.terms, regime)?.sum().term_set().into_iter().collect()))
    }

    /// Common length dimension of all terms, if there is one.
    pub fn length_dimension(&self) -> Option<Exponent> {
        let mut dims = self.terms.iter().map(Monomial::length_dimension);
        let first = dims.next()?;
        dims.all(|d| d == first).then_some(first)
    }
}

impl fmt::Display for MonomialSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self.terms.iter().map(|t| t.to_string()).collect();
        f.write_str(&parts.join(" + "))
    }
}

/// Weight-correction type of expression: a monomial sum over a monomial sum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Quotient {
    pub numerator: MonomialSum,
    pub denominator: MonomialSum,
}

impl fmt::Display for Quotient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.numerator, self.denominator)
    }
}

/// `ŝ = max(0, 2 − 2q̂) ∈ {0, 2}`.
pub fn shat_of(qhat: i64) -> Result<i64> {
    if qhat < 0 {
        return Err(CfsError::InvalidInput(format!("q̂ = {qhat} must be non-negative")));
    }
    Ok((2 - 2 * qhat).max(0))
}

/// `s = max(0, 4 − 2q) ∈ {0, 2, 4}`.
pub fn s_of(q: i64) -> Result<i64> {
    if q < 0 {
        return Err(CfsError::InvalidInput(format!("q = {q} must be non-negative")));
    }
    Ok((4 - 2 * q).max(0))
}

/// Smallest admissible origin exponent; `p ≤ 4` admits no minimum under
/// variations at fixed `mδ`.
pub const P_MIN: i64 = 5;

/// Values of the undetermined parameters. Unbound parameters make evaluation
/// fail rather than default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Bindings {
    p: Option<i64>,
    q: Option<i64>,
    qhat: Option<i64>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn full(p: i64, q: i64, qhat: i64) -> Result<Self> {
        Self::new().p(p)?.q(q)?.qhat(qhat)
    }

    pub fn p(mut self, p: i64) -> Result<Self> {
        if p < P_MIN {
            return Err(CfsError::RegimeViolation(format!("p = {p} < {P_MIN}")));
        }
        self.p = Some(p);
        Ok(self)
    }

    pub fn q(mut self, q: i64) -> Result<Self> {
        s_of(q)?;
        self.q = Some(q);
        Ok(self)
    }

    pub fn qhat(mut self, qhat: i64) -> Result<Self> {
        shat_of(qhat)?;
        self.qhat = Some(qhat);
        Ok(self)
    }

    pub fn value(&self, p: Param) -> Result<i64> {
        let unbound = |name: &str| CfsError::InvalidInput(format!("parameter {name} is unbound"));
        match p {
            Param::P => self.p.ok_or_else(|| unbound("p")),
            Param::Q => self.q.ok_or_else(|| unbound("q")),
            Param::QHat => self.qhat.ok_or_else(|| unbound("q̂")),
            Param::S => s_of(self.q.ok_or_else(|| unbound("q"))?),
            Param::SHat => shat_of(self.qhat.ok_or_else(|| unbound("q̂"))?),
        }
    }
}

impl fmt::Display for Bindings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(p) = self.p {
            parts.push(format!("p={p}"));
        }
        if let Some(q) = self.q {
            parts.push(format!("q={q} (s={})", s_of(q).unwrap_or(-1)));
        }
        if let Some(qh) = self.qhat {
            parts.push(format!("q̂={qh} (ŝ={})", shat_of(qh).unwrap_or(-1)));
        }
        if parts.is_empty() {
            return f.write_str("unbound");
        }
        f.write_str(&parts.join(" "))
    }
}

/// A declared small quantity: `monomial ≪ 1` when strict, `≲ 1` otherwise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generator {
    pub name: String,
    pub monomial: Monomial,
    pub strict: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparison {
    Equal,
    /// Left side is dominated.
    Below,
    Above,
    Incomparable,
}

/// Ordered small quantities. The cone they generate must be pointed, so no
/// product of small quantities is large.
#[derive(Clone, Debug)]
pub struct Regime {
    generators: Vec<Generator>,
    vectors: Vec<[i64; SYMBOLS]>,
}

impl Regime {
    pub fn new(generators: Vec<Generator>) -> Result<Self> {
        let mut vectors = Vec::with_capacity(generators.len());
        for g in &generators {
            let v = g
                .monomial
                .concrete()
                .ok_or_else(|| CfsError::InvalidInput(format!("generator {} has parametric exponents", g.name)))?;
            if v.iter().all(|&x| x == 0) {
                return Err(CfsError::InvalidInput(format!("generator {} is trivial", g.name)));
            }
            vectors.push(v);
        }
        if generators.len() > 16 {
            return Err(CfsError::InvalidInput("at most 16 generators".into()));
        }
        for (g, v) in generators.iter().zip(&vectors) {
            let neg = v.map(|x| -x);
            if cone_coefficients(&neg, &vectors).is_some() {
                return Err(CfsError::InvalidInput(format!("inconsistent regime: 1/({}) is also small", g.name)));
            }
        }
        Ok(Self { generators, vectors })
    }

    /// `εm ≪ 1`, `ε/δ ≪ 1`, `mδ ≲ 1`, `1/(m l) ≲ 1`.
    pub fn standard() -> Self {
        let eps = Monomial::of(Sym::Eps);
        let m = Monomial::of(Sym::Mass);
        let d = Monomial::of(Sym::Delta);
        let l = Monomial::of(Sym::Macro);
        Self::new(vec![
            Generator { name: "εm".into(), monomial: eps * m, strict: true },
            Generator { name: "ε/δ".into(), monomial: eps / d, strict: true },
            Generator { name: "mδ".into(), monomial: m * d, strict: false },
            Generator { name: "1/(m l)".into(), monomial: Monomial::one() / (m * l), strict: false },
        ])
        .expect("standard regime is pointed")
    }

    /// A dimensionless `ε ≪ 1`.
    pub fn small_epsilon() -> Self {
        Self::new(vec![Generator { name: "ε".into(), monomial: Monomial::of(Sym::Eps), strict: true }])
            .expect("single generator is pointed")
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    /// Non-negative powers `c` with `a / b = Π gᵢ^{cᵢ}`, if they exist.
    pub fn bound(&self, a: &Monomial, b: &Monomial) -> Result<Option<Vec<Rational64>>> {
        let ratio = (*a / *b)
            .concrete()
            .ok_or_else(|| CfsError::Incomparable(format!("{a} vs {b}: bind the parameters first")))?;
        Ok(cone_coefficients(&ratio, &self.vectors))
    }

    pub fn compare(&self, a: &Monomial, b: &Monomial) -> Result<Comparison> {
        if a == b {
            return Ok(Comparison::Equal);
        }
        if self.bound(a, b)?.is_some() {
            return Ok(Comparison::Below);
        }
        if self.bound(b, a)?.is_some() {
            return Ok(Comparison::Above);
        }
        Ok(Comparison::Incomparable)
    }

    /// Renders cone coefficients as a product of small quantities.
    pub fn describe(&self, coeffs: &[Rational64]) -> String {
        let parts: Vec<String> = self
            .generators
            .iter()
            .zip(coeffs)
            .filter(|(_, c)| **c != Rational64::from_integer(0))
            .map(|(g, c)| format!("({})^{}", g.name, c))
            .collect();
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join(" ")
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.generators.iter().map(|g| format!("{} {} 1", g.name, if g.strict { "≪" } else { "≲" })).collect();
        f.write_str(&parts.join(", "))
    }
}

/// Exact conic decomposition. By Carathéodory a solution exists iff one
/// exists on a linearly independent subset with positive coefficients, so
/// subsets are scanned by size.
fn cone_coefficients(target: &[i64; SYMBOLS], gens: &[[i64; SYMBOLS]]) -> Option<Vec<Rational64>> {
    let zero = Rational64::from_integer(0);
    let k = gens.len();
    if target.iter().all(|&t| t == 0) {
        return Some(vec![zero; k]);
    }
    let mut masks: Vec<u32> = (1..(1u32 << k)).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    for mask in masks {
        let cols: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
        if let Some(x) = solve_exact(target, gens, &cols) {
            if x.iter().all(|v| *v > zero) {
                let mut full = vec![zero; k];
                for (c, v) in cols.iter().zip(x) {
                    full[*c] = v;
                }
                return Some(full);
            }
        }
    }
    None
}

/// Unique solution of `Σ x_j gens[cols[j]] = target`, or `None` when the
/// columns are dependent or the system is inconsistent.
fn solve_exact(target: &[i64; SYMBOLS], gens: &[[i64; SYMBOLS]], cols: &[usize]) -> Option<Vec<Rational64>> {
    let n = cols.len();
    let zero = Rational64::from_integer(0);
    let mut a: Vec<Vec<Rational64>> = (0..SYMBOLS)
        .map(|r| {
            let mut row: Vec<Rational64> = cols.iter().map(|&c| Rational64::from_integer(gens[c][r])).collect();
            row.push(Rational64::from_integer(target[r]));
            row
        })
        .collect();
    let mut rank = 0;
    for col in 0..n {
        let pivot = (rank..SYMBOLS).find(|&r| a[r][col] != zero)?;
        a.swap(rank, pivot);
        let p = a[rank][col];
        for v in a[rank].iter_mut() {
            *v /= p;
        }
        for r in 0..SYMBOLS {
            if r != rank && a[r][col] != zero {
                let factor = a[r][col];
                for c in 0..=n {
                    let d = a[rank][c] * factor;
                    a[r][c] -= d;
                }
            }
        }
        rank += 1;
    }
    if a[rank..].iter().any(|row| row[n] != zero) {
        return None;
    }
    Some((0..n).map(|i| a[i][n]).collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dropped {
    pub term: Monomial,
    pub by: Monomial,
    /// `term / by` as a product of small quantities.
    pub ratio: String,
}

/// Maximal terms under a regime. Equal terms are all kept; pairs of kept
/// terms that the regime cannot order are listed, never resolved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dominance {
    pub kept: Vec<Monomial>,
    pub dropped: Vec<Dropped>,
    pub incomparable: Vec<(Monomial, Monomial)>,
}

impl Dominance {
    /// Kept terms without repetitions, in first-occurrence order.
    pub fn sum(&self) -> MonomialSum {
        let mut seen = BTreeSet::new();
        MonomialSum::new(self.kept.iter().copied().filter(|t| seen.insert(*t)).collect())
    }

    /// The single dominant term; fails when incomparable terms survive.
    pub fn unique(&self) -> Result<Monomial> {
        let s = self.sum();
        match s.terms.as_slice() {
            [t] => Ok(*t),
            _ => Err(CfsError::Incomparable(format!("no single dominant term among {s}"))),
        }
    }
}

pub fn dominant(terms: &[Monomial], regime: &Regime) -> Result<Dominance> {
    if terms.is_empty() {
        return Err(CfsError::InvalidInput("no terms to compare".into()));
    }
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    'outer: for (i, t) in terms.iter().enumerate() {
        for (j, u) in terms.iter().enumerate() {
            if i == j || t == u {
                continue;
            }
            if let Some(c) = regime.bound(t, u)? {
                dropped.push(Dropped { term: *t, by: *u, ratio: regime.describe(&c) });
                continue 'outer;
            }
        }
        kept.push(*t);
    }
    let distinct: Vec<Monomial> = kept.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let mut incomparable = Vec::new();
    for (i, a) in distinct.iter().enumerate() {
        for b in &distinct[i + 1..] {
            incomparable.push((*a, *b));
        }
    }
    Ok(Dominance { kept, dropped, incomparable })
}

/// Derived scaling relations with both a closed form and a brute-force path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    /// `ℓ + 𝔰` in the vacuum: origin plus light-cone contributions.
    VacuumEll,
    /// Upper bound on the boundedness multiplier κ.
    KappaBound,
    /// The constant multiplier 𝔰.
    SMultiplier,
    /// Matter contribution to ℓ.
    MatterEll,
    /// Matter contribution to κ𝔱.
    KappaTMatter,
    /// `ℓ_κ + 𝔰` with matter: the dominant matter term.
    MatterEllTotal,
    /// Bound on the symmetrized derivative of the Lagrangian along a Killing
    /// field, at unit rescaling parameters.
    KillingRhs,
}

impl Relation {
    pub const ALL: [Relation; 7] = [
        Relation::VacuumEll,
        Relation::KappaBound,
        Relation::SMultiplier,
        Relation::MatterEll,
        Relation::KappaTMatter,
        Relation::MatterEllTotal,
        Relation::KillingRhs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Relation::VacuumEll => "vacuum_ell",
            Relation::KappaBound => "kappa_bound",
            Relation::SMultiplier => "s_multiplier",
            Relation::MatterEll => "matter_ell",
            Relation::KappaTMatter => "kappa_t_matter",
            Relation::MatterEllTotal => "matter_ell_total",
            Relation::KillingRhs => "killing_rhs",
        }
    }

    /// Length dimension every term must carry.
    pub fn expected_dimension(self) -> i64 {
        match self {
            Relation::KappaBound => 0,
            Relation::KillingRhs => -12,
            _ => -8,
        }
    }
}

fn sym(s: Sym, e: impl Into<Exponent>) -> Monomial {
    Monomial::one().with(s, e)
}

fn sigma_lambda4() -> Monomial {
    Monomial::of(Sym::Sigma).with(Sym::Lambda, 4)
}

/// `(ε/δ)^e`.
fn eps_over_delta(e: Exponent) -> Monomial {
    sym(Sym::Eps, e).with(Sym::Delta, -e)
}

/// `(εm)^e`.
fn eps_m(e: Exponent) -> Monomial {
    sym(Sym::Eps, e).with(Sym::Mass, e)
}

/// Parametric closed forms.
pub fn closed_form(rel: Relation) -> MonomialSum {
    let p = Exponent::param(Param::P);
    let s = Exponent::param(Param::S);
    let shat = Exponent::param(Param::SHat);
    let kappa = MonomialSum::new(vec![eps_m(p), eps_over_delta(Exponent::from(8) - shat)]);
    match rel {
        Relation::VacuumEll => MonomialSum::new(vec![
            sigma_lambda4() * eps_m(p) * sym(Sym::Eps, -8),
            sigma_lambda4() * sym(Sym::Delta, -8) * eps_over_delta(-shat),
        ]),
        Relation::KappaBound => kappa,
        Relation::SMultiplier => kappa.times(&(sigma_lambda4() * sym(Sym::Eps, -8))),
        Relation::MatterEll => {
            MonomialSum::single(sigma_lambda4() * sym(Sym::Delta, -4) * Monomial::of(Sym::Energy) * eps_over_delta(-s))
        }
        Relation::KappaTMatter => kappa.times(&(sigma_lambda4() * sym(Sym::Eps, -4) * Monomial::of(Sym::Energy))),
        Relation::MatterEllTotal => MonomialSum::single(
            sigma_lambda4() * sym(Sym::Eps, -4) * Monomial::of(Sym::Energy) * eps_over_delta(Exponent::from(4) - s),
        ),
        Relation::KillingRhs => MonomialSum::single(sym(Sym::Mass, 4).with(Sym::Eps, -4).with(Sym::Delta, -4)),
    }
}

/// Radial power counting of a light-cone-localized density integrated over
/// a neighbourhood of the origin. With `t ≈ r` the measure reduces to
/// `r dr`; `r_power` already includes it. The range is `ε ≤ r ≤ δ²/ε`, where
/// the mass expansion stays admissible. The dominant endpoint wins; a
/// logarithm (`r_power = −1`) is dropped.
fn light_cone_integral(prefactor: Monomial, r_power: i64, regime: &Regime) -> Result<(Monomial, String)> {
    let k = r_power + 1;
    if k == 0 {
        return Ok((prefactor, format!("∫ r^-1 dr: logarithm dropped → {prefactor}")));
    }
    let lower = prefactor * sym(Sym::Eps, k);
    let upper = prefactor * sym(Sym::Delta, 2).with(Sym::Eps, -1).pow(k)?;
    let d = dominant(&[lower, upper], regime)?;
    let t = d.unique()?;
    let end = if t == lower { "r = ε" } else { "r = δ²/ε" };
    Ok((t, format!("∫ r^{r_power} dr dominated at {end} → {t}")))
}

/// Light-cone density evaluated at `t ≈ r ≈ ε`, where `δ_ε(ξ²) ~ ε⁻²`.
fn light_cone_peak(prefactor: Monomial, t_power: i64) -> Monomial {
    prefactor * sym(Sym::Eps, t_power - 2)
}

/// A finished brute-force derivation with its audit transcript.
#[derive(Clone, Debug)]
pub struct Derivation {
    pub relation: Relation,
    pub bindings: Bindings,
    pub result: MonomialSum,
    pub transcript: String,
}

struct Log(Vec<String>);

impl Log {
    fn push(&mut self, s: impl Into<String>) {
        self.0.push(s.into());
    }

    fn dominance(&mut self, d: &Dominance) {
        for x in &d.dropped {
            self.push(format!("  drop {} ≲ {}  (ratio {})", x.term, x.by, x.ratio));
        }
        for (a, b) in &d.incomparable {
            self.push(format!("  keep both {a} and {b}: not ordered by the regime"));
        }
        self.push(format!("  dominant: {}", d.sum()));
    }
}

/// The individual contributions, each integrated on its own.
struct Table<'a> {
    b: &'a Bindings,
    regime: &'a Regime,
}

impl Table<'_> {
    /// Light-cone vacuum term: density `δ⁻⁸ (εt)⁻¹ δ_ε(ξ²) (ε/t)^q̂`.
    fn vacuum_light_cone(&self, log: &mut Log) -> Result<Monomial> {
        let qh = self.b.value(Param::QHat)?;
        let pre = sigma_lambda4() * sym(Sym::Delta, -8) * sym(Sym::Eps, qh - 1);
        let (t, msg) = light_cone_integral(pre, -qh, self.regime)?;
        log.push(format!("light cone (q̂={qh}): {msg}"));
        Ok(t)
    }

    /// Origin term: `L(x,x) ~ λ⁴m²ε⁻¹⁰` over a timelike cylinder of height ε
    /// and radius mε², improved by `(εm)^(p−5)`.
    fn vacuum_origin(&self, log: &mut Log) -> Result<Monomial> {
        let p = self.b.value(Param::P)?;
        let l_diag = sym(Sym::Lambda, 4).with(Sym::Mass, 2).with(Sym::Eps, -10);
        let volume = Monomial::of(Sym::Sigma) * Monomial::of(Sym::Eps) * sym(Sym::Mass, 1).with(Sym::Eps, 2).pow(3)?;
        let t = l_diag * volume * eps_m(Exponent::from(p - 5));
        log.push(format!("origin (p={p}): L(x,x) · σ ε (mε²)³ · (εm)^{} → {t}", p - 5));
        Ok(t)
    }

    /// Away from the light cone: power counting only bounds it from above.
    fn vacuum_away(&self) -> Monomial {
        sigma_lambda4() * sym(Sym::Mass, 6).with(Sym::Eps, -2)
    }

    /// `κ𝔱` in the vacuum: density `λ⁴ (εt)⁻⁵ δ_ε(ξ²)`.
    fn vacuum_kappa_t(&self, log: &mut Log) -> Result<Monomial> {
        let pre = Monomial::of(Sym::Kappa) * sigma_lambda4() * sym(Sym::Eps, -5);
        let (t, msg) = light_cone_integral(pre, -4, self.regime)?;
        log.push(format!("κ𝔱 vacuum: {msg}"));
        Ok(t)
    }

    /// Matter term in ℓ: density `δ⁻⁴ T r² (ε/t)^q (εt)⁻² δ_ε(ξ²)`.
    fn matter_ell(&self, log: &mut Log) -> Result<Monomial> {
        let q = self.b.value(Param::Q)?;
        let pre = sigma_lambda4() * sym(Sym::Delta, -4) * Monomial::of(Sym::Energy) * sym(Sym::Eps, q - 2);
        let (t, msg) = light_cone_integral(pre, 1 - q, self.regime)?;
        log.push(format!("matter ℓ (q={q}): {msg}"));
        Ok(t)
    }

    /// Matter term in 𝔱: density `λ⁴ T r² (εt)⁻⁴ δ_ε(ξ²)`.
    fn matter_t(&self, log: &mut Log) -> Result<Monomial> {
        let pre = Monomial::of(Sym::Kappa) * sigma_lambda4() * Monomial::of(Sym::Energy) * sym(Sym::Eps, -4);
        let (t, msg) = light_cone_integral(pre, -1, self.regime)?;
        log.push(format!("κ𝔱 matter: {msg}"));
        Ok(t)
    }
}

/// Brute-force derivation of a relation at concrete parameter values.
pub fn brute_force(rel: Relation, b: &Bindings, regime: &Regime) -> Result<Derivation> {
    let mut log = Log(vec![format!("relation: {}", rel.name()), format!("bindings: {b}"), format!("regime: {regime}")]);
    let result = derive(rel, b, regime, &mut log)?;
    log.push(format!("result: {result}"));
    Ok(Derivation { relation: rel, bindings: *b, result, transcript: log.0.join("\n") })
}

fn derive(rel: Relation, b: &Bindings, regime: &Regime, log: &mut Log) -> Result<MonomialSum> {
    let table = Table { b, regime };
    let keep = |terms: &[Monomial], log: &mut Log| -> Result<MonomialSum> {
        let d = dominant(terms, regime)?;
        log.dominance(&d);
        Ok(d.sum())
    };
    match rel {
        Relation::VacuumEll => {
            let lc = table.vacuum_light_cone(log)?;
            let origin = table.vacuum_origin(log)?;
            log.push(format!(
                "away from light cone: {} is an upper bound suppressed by the regularization strip; not summed",
                table.vacuum_away()
            ));
            keep(&[origin, lc], log)
        }
        Relation::KappaBound => {
            // Unit local trace fixes λ = ε²/m at σ = 1; κ is bounded by the
            // vacuum terms relative to the κ𝔱 coefficient.
            let vac = derive(Relation::VacuumEll, b, regime, log)?;
            let lambda = sym(Sym::Eps, 2).with(Sym::Mass, -1);
            let norm = |m: &Monomial| -> Result<Monomial> {
                m.substitute(Sym::Lambda, &lambda)?.substitute(Sym::Sigma, &Monomial::one())
            };
            let kt = norm(&table.vacuum_kappa_t(log)?.substitute(Sym::Kappa, &Monomial::one())?)?;
            log.push(format!("λ = ε²/m, σ = 1: κ𝔱/κ → {kt}"));
            let ratios: Vec<Monomial> = vac.terms.iter().map(|t| norm(t).map(|n| n / kt)).collect::<Result<_>>()?;
            log.push(format!("κ ≲ {}", MonomialSum::new(ratios.clone())));
            keep(&ratios, log)
        }
        Relation::SMultiplier => {
            let vac = derive(Relation::VacuumEll, b, regime, log)?;
            let kappa = derive(Relation::KappaBound, b, regime, log)?;
            let kt = MonomialSum::single(table.vacuum_kappa_t(log)?).expand(Sym::Kappa, &kappa)?;
            log.push(format!("κ𝔱 with κ bound: {kt}"));
            let mut terms = vac.terms;
            terms.extend(kt.terms);
            keep(&terms, log)
        }
        Relation::MatterEll => Ok(MonomialSum::single(table.matter_ell(log)?)),
        Relation::KappaTMatter => {
            let kappa = derive(Relation::KappaBound, b, regime, log)?;
            let t = MonomialSum::single(table.matter_t(log)?).expand(Sym::Kappa, &kappa)?;
            log.push(format!("κ𝔱 matter with κ bound: {t}"));
            Ok(t)
        }
        Relation::MatterEllTotal => {
            let mut terms = derive(Relation::MatterEll, b, regime, log)?.terms;
            terms.extend(derive(Relation::KappaTMatter, b, regime, log)?.terms);
            keep(&terms, log)
        }
        Relation::KillingRhs => {
            // σ = λ = 1; only matter contributions vary along the field.
            let unit = |m: Monomial| -> Result<Monomial> {
                m.substitute(Sym::Sigma, &Monomial::one())?.substitute(Sym::Lambda, &Monomial::one())
            };
            let q = b.value(Param::Q)?;
            let lag = light_cone_peak(sym(Sym::Delta, -4) * Monomial::of(Sym::Energy) * sym(Sym::Eps, q - 2), -q);
            log.push(format!("matter L at ξ ~ ε (q={q}): {lag}"));
            let kappa = derive(Relation::KappaBound, b, regime, log)?;
            let bc = light_cone_peak(Monomial::of(Sym::Kappa) * Monomial::of(Sym::Energy) * sym(Sym::Eps, -4), -2);
            let bc = MonomialSum::single(bc).expand(Sym::Kappa, &kappa)?;
            log.push(format!("κ |xy|² matter at ξ ~ ε: {bc}"));
            let mut terms = vec![unit(lag)?];
            for t in bc.terms {
                terms.push(unit(t)?);
            }
            let dom = keep(&terms, log)?;
            // T ≃ m / l³ ≲ m⁴.
            let typical = Monomial::of(Sym::Mass).with(Sym::Macro, -3);
            let bound = sym(Sym::Mass, 4);
            if regime.bound(&typical, &bound)?.is_none() {
                return Err(CfsError::RegimeViolation("regime does not give m/l³ ≲ m⁴".into()));
            }
            log.push("T ≃ m/l³ ≲ m⁴".to_string());
            dom.substitute(Sym::Energy, &bound)
        }
    }
}

/// `ŝ` read off the brute-force light-cone integral.
pub fn brute_shat(qhat: i64, regime: &Regime) -> Result<i64> {
    let b = Bindings::new().qhat(qhat)?;
    let t = Table { b: &b, regime }.vacuum_light_cone(&mut Log(Vec::new()))?;
    let rest = t / (sigma_lambda4() * sym(Sym::Delta, -8));
    delta_over_eps_power(&rest)
}

/// `s` read off the brute-force matter integral.
pub fn brute_s(q: i64, regime: &Regime) -> Result<i64> {
    let b = Bindings::new().q(q)?;
    let t = Table { b: &b, regime }.matter_ell(&mut Log(Vec::new()))?;
    let rest = t / (sigma_lambda4() * sym(Sym::Delta, -4) * Monomial::of(Sym::Energy));
    delta_over_eps_power(&rest)
}

fn delta_over_eps_power(m: &Monomial) -> Result<i64> {
    let k = m.exponent(Sym::Delta).as_constant().unwrap_or(0);
    if *m != eps_over_delta(Exponent::from(-k)) {
        return Err(CfsError::InvalidInput(format!("{m} is not a power of δ/ε")));
    }
    Ok(k)
}

fn validated(p: Option<i64>, q: Option<i64>, qhat: Option<i64>) -> Result<Bindings> {
    let mut b = Bindings::new();
    if let Some(p) = p {
        b = b.p(p)?;
    }
    if let Some(q) = q {
        b = b.q(q)?;
    }
    if let Some(qh) = qhat {
        b = b.qhat(qh)?;
    }
    Ok(b)
}

/// `κ ≲ (εm)^p + (ε/δ)^(8−ŝ)`.
pub fn kappa_bound(p: i64, qhat: i64) -> Result<MonomialSum> {
    closed_form(Relation::KappaBound).eval(&validated(Some(p), None, Some(qhat))?)
}

/// `𝔰 ≃ σλ⁴ε⁻⁸ ((εm)^p + (ε/δ)^(8−ŝ))`.
pub fn s_multiplier_scaling(p: i64, qhat: i64) -> Result<MonomialSum> {
    closed_form(Relation::SMultiplier).eval(&validated(Some(p), None, Some(qhat))?)
}

/// `ℓ_matter ≃ σλ⁴ε⁻⁴ T (ε/δ)^(4−s)`.
pub fn matter_ell_scaling(q: i64) -> Result<MonomialSum> {
    closed_form(Relation::MatterEllTotal).eval(&validated(None, Some(q), None)?)
}

/// `(D₁ + D₂) L_κ ≲ m⁴ / (ε⁴δ⁴)` at σ = λ = 1.
pub fn killing_rhs_scaling(p: i64, q: i64, qhat: i64) -> Result<MonomialSum> {
    closed_form(Relation::KillingRhs).eval(&Bindings::full(p, q, qhat)?)
}

/// Weight `h` that restores the field equations with matter: the matter
/// term of ℓ relative to 𝔰, with the common `σλ⁴ε⁻⁸` cancelled.
pub fn weight_correction(p: i64, q: i64, qhat: i64) -> Result<Quotient> {
    let b = Bindings::full(p, q, qhat)?;
    let common = sigma_lambda4() * sym(Sym::Eps, -8);
    let num = closed_form(Relation::MatterEllTotal).eval(&b)?;
    let den = closed_form(Relation::SMultiplier).eval(&b)?;
    Ok(Quotient {
        numerator: MonomialSum::new(num.terms.iter().map(|t| *t / common).collect()),
        denominator: MonomialSum::new(den.terms.iter().map(|t| *t / common).collect()),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Matter is below a vacuum term by `factor`.
    Suppressed { factor: Monomial, at_least_mdelta4: bool },
    /// Matter dominates every vacuum term.
    Dominant,
    /// Neither; reported rather than decided.
    Incomparable,
}

#[derive(Clone, Debug)]
pub struct MatterComparison {
    /// Matter term of ℓ at `T = m⁴`.
    pub matter: Monomial,
    pub vacuum: MonomialSum,
    pub verdict: Verdict,
    /// The matter part of κ𝔱 is dominated by the matter part of ℓ.
    pub kappa_t_negligible: bool,
    /// `(εm)^p ≲ (ε/δ)^(4−s)`.
    pub origin_below_matter_weight: bool,
}

pub fn matter_vs_vacuum(p: i64, q: i64, qhat: i64) -> Result<MatterComparison> {
    let b = Bindings::full(p, q, qhat)?;
    let regime = Regime::standard();
    let mdelta4 = sym(Sym::Mass, 4).with(Sym::Delta, 4);
    let matter = closed_form(Relation::MatterEllTotal).eval(&b)?.substitute(Sym::Energy, &sym(Sym::Mass, 4))?.terms[0];
    let vacuum = closed_form(Relation::VacuumEll).eval(&b)?;
    let mut best: Option<(Monomial, bool)> = None;
    let mut all_above = true;
    for v in &vacuum.terms {
        match regime.compare(&matter, v)? {
            Comparison::Below | Comparison::Equal => {
                let factor = matter / *v;
                let strong = regime.bound(&factor, &mdelta4)?.is_some();
                if best.map_or(true, |(_, s)| strong && !s) {
                    best = Some((factor, strong));
                }
                all_above = false;
            }
            Comparison::Above => {}
            Comparison::Incomparable => all_above = false,
        }
    }
    let verdict = match best {
        Some((factor, at_least_mdelta4)) => Verdict::Suppressed { factor, at_least_mdelta4 },
        None if all_above => Verdict::Dominant,
        None => Verdict::Incomparable,
    };
    let ell = closed_form(Relation::MatterEll).eval(&b)?.terms[0];
    let mut kappa_t_negligible = true;
    for t in &closed_form(Relation::KappaTMatter).eval(&b)?.terms {
        kappa_t_negligible &= regime.compare(t, &ell)? == Comparison::Below;
    }
    let s = b.value(Param::S)?;
    let origin_below_matter_weight =
        regime.bound(&eps_m(Exponent::from(p)), &eps_over_delta(Exponent::from(4 - s)))?.is_some();
    Ok(MatterComparison { matter, vacuum, verdict, kappa_t_negligible, origin_below_matter_weight })
}

/// Length dimension of every closed form; consistent when each relation has
/// one parameter-free dimension equal to its expected value.
#[derive(Clone, Debug)]
pub struct UnitAudit {
    pub entries: Vec<(Relation, Option<Exponent>)>,
    pub consistent: bool,
}

pub fn unit_audit() -> UnitAudit {
    let entries: Vec<(Relation, Option<Exponent>)> =
        Relation::ALL.iter().map(|r| (*r, closed_form(*r).length_dimension())).collect();
    let consistent = entries.iter().all(|(r, d)| d.and_then(|d| d.as_constant()) == Some(r.expected_dimension()));
    UnitAudit { entries, consistent }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eps(k: i64) -> Monomial {
        sym(Sym::Eps, k)
    }

    #[test]
    fn trivial_dominance() {
        let d = dominant(&[eps(-8), eps(-2)], &Regime::small_epsilon()).unwrap();
        assert_eq!(d.sum(), MonomialSum::single(eps(-8)));
        assert_eq!(d.dropped.len(), 1);
    }

    #[test]
    fn origin_beats_away_bound() {
        let a = sym(Sym::Mass, 6).with(Sym::Eps, -2);
        let b = sym(Sym::Mass, 5).with(Sym::Eps, -3);
        let d = dominant(&[a, b], &Regime::standard()).unwrap();
        assert_eq!(d.unique().unwrap(), b);
        assert_eq!(d.dropped[0].ratio, "(εm)^1");
    }

    #[test]
    fn incomparable_terms_are_kept() {
        let b = Bindings::full(5, 0, 1).unwrap();
        let terms = closed_form(Relation::SMultiplier).eval(&b).unwrap();
        let d = dominant(&terms.terms, &Regime::standard()).unwrap();
        assert!(d.sum().same_terms(&terms));
        assert_eq!(d.incomparable.len(), 1);
        assert!(d.unique().is_err());
    }

    #[test]
    fn parametric_comparison_is_refused() {
        let r = Regime::standard();
        let a = closed_form(Relation::KappaBound).terms[0];
        assert!(matches!(r.bound(&a, &Monomial::one()), Err(CfsError::Incomparable(_))));
    }

    #[test]
    fn inconsistent_regime_rejected() {
        let e = Monomial::of(Sym::Eps);
        let g = |name: &str, m| Generator { name: name.into(), monomial: m, strict: true };
        assert!(Regime::new(vec![g("ε", e), g("1/ε", Monomial::one() / e)]).is_err());
        let m = Monomial::of(Sym::Mass);
        assert!(
            Regime::new(vec![g("εm", e * m), g("1/ε", Monomial::one() / e), g("1/m", Monomial::one() / m)]).is_err()
        );
    }

    #[test]
    fn parameter_maps() {
        assert_eq!(shat_of(0).unwrap(), 2);
        assert_eq!(shat_of(3).unwrap(), 0);
        assert_eq!(s_of(0).unwrap(), 4);
        assert_eq!(s_of(1).unwrap(), 2);
        assert_eq!(s_of(2).unwrap(), 0);
        assert!(s_of(-1).is_err());
        assert!(matches!(kappa_bound(4, 0), Err(CfsError::RegimeViolation(_))));
    }

    #[test]
    fn display_is_readable() {
        assert_eq!(closed_form(Relation::KappaBound).to_string(), "ε^p m^p + ε^(8-ŝ) δ^(ŝ-8)");
        assert_eq!(closed_form(Relation::KillingRhs).to_string(), "ε^-4 δ^-4 m^4");
    }

    #[test]
    fn cone_solver_finds_mixed_products() {
        // (εm)^p (δ/ε)^(4−s) = (ε/δ)^(p−4+s) (mδ)^p for p = 5, s = 4.
        let r = Regime::standard();
        let a = eps_m(Exponent::from(5));
        let b = eps_over_delta(Exponent::from(0));
        assert!(r.bound(&a, &b).unwrap().is_some());
        assert!(r.bound(&b, &a).unwrap().is_none());
    }
}
