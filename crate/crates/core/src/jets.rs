//! Truncated Taylor expansions with exact rational coefficients.
//!
//! [`MultiJet`] is a multivariate jet at a rational base point, stored
//! sparsely as a map from exponent vectors to nonzero coefficients, with
//! monomials ordered graded-lexicographically so every iteration order is
//! deterministic. [`UniJet`] is the one-variable counterpart used for
//! field components, reparametrizations and coordinate changes.
//!
//! Truncation convention: an operation that can only guarantee the result
//! to a lower order (a derivative, a bracket) returns a jet whose declared
//! order *is* that lower order. Mixing jets of different orders is an
//! error; callers down-truncate explicitly. This is deliberate — silent
//! order mismatches are the classic bug in jet code.

use crate::rat::{format_q, Q};
use num_traits::{One, Zero};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JetError {
    #[error("jet shape mismatch: {0}")]
    Mismatch(String),
    #[error("variable index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("division by a jet with zero constant term")]
    DivisionByZero,
    #[error("composition center mismatch: outer center {outer}, inner constant term {inner}")]
    CenterMismatch { outer: String, inner: String },
    #[error("coordinate change has zero linear coefficient")]
    NotInvertible,
    #[error("coefficient size limit exceeded ({bits} bits > {limit})")]
    CoefficientOverflow { bits: u64, limit: u64 },
}

/// Exponent vector with graded-lexicographic ordering.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mono(pub Vec<u32>);

impl Mono {
    pub fn zero(n: usize) -> Self {
        Mono(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Mono(e)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn mul(&self, other: &Mono) -> Mono {
        Mono(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl Ord for Mono {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A multivariate jet: the order-`order` Taylor expansion of a function at
/// `base`, written in the shifted variables `x_i - base_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiJet {
    n: usize,
    order: u32,
    base: Vec<Q>,
    coeffs: BTreeMap<Mono, Q>,
}

impl MultiJet {
    pub fn zero(n: usize, order: u32, base: Vec<Q>) -> Self {
        assert_eq!(base.len(), n);
        MultiJet {
            n,
            order,
            base,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, order: u32, base: Vec<Q>, value: Q) -> Self {
        let mut j = MultiJet::zero(n, order, base);
        j.set(Mono::zero(n), value);
        j
    }

    /// The jet of the coordinate function `x_i` (1-based `i`).
    pub fn coordinate(n: usize, order: u32, base: Vec<Q>, i: usize) -> Result<Self, JetError> {
        if i == 0 || i > n {
            return Err(JetError::IndexOutOfRange { index: i, n });
        }
        let mut j = MultiJet::zero(n, order, base);
        let b = j.base[i - 1].clone();
        j.set(Mono::zero(n), b);
        if order >= 1 {
            j.set(Mono::unit(n, i - 1), Q::one());
        }
        Ok(j)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn base(&self) -> &[Q] {
        &self.base
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&Mono, &Q)> {
        self.coeffs.iter()
    }

    pub fn coeff(&self, m: &Mono) -> Q {
        self.coeffs.get(m).cloned().unwrap_or_else(Q::zero)
    }

    pub fn constant_term(&self) -> Q {
        self.coeff(&Mono::zero(self.n))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Sets one coefficient, dropping zeros and over-order monomials.
    pub fn set(&mut self, m: Mono, v: Q) {
        debug_assert_eq!(m.0.len(), self.n);
        if m.degree() > self.order || v.is_zero() {
            self.coeffs.remove(&m);
        } else {
            self.coeffs.insert(m, v);
        }
    }

    pub fn add_to(&mut self, m: Mono, v: &Q) {
        use std::collections::btree_map::Entry;
        if m.degree() > self.order || v.is_zero() {
            return;
        }
        match self.coeffs.entry(m) {
            Entry::Occupied(mut e) => {
                let nv = e.get() + v;
                if nv.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = nv;
                }
            }
            Entry::Vacant(e) => {
                e.insert(v.clone());
            }
        }
    }

    fn check_same_shape(&self, other: &MultiJet) -> Result<(), JetError> {
        if self.n != other.n || self.order != other.order || self.base != other.base {
            return Err(JetError::Mismatch(format!(
                "n {} vs {}, order {} vs {}, base {:?} vs {:?}",
                self.n,
                other.n,
                self.order,
                other.order,
                self.base.iter().map(format_q).collect::<Vec<_>>(),
                other.base.iter().map(format_q).collect::<Vec<_>>()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &MultiJet) -> Result<MultiJet, JetError> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        for (m, v) in &other.coeffs {
            out.add_to(m.clone(), v);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &MultiJet) -> Result<MultiJet, JetError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> MultiJet {
        let mut out = self.clone();
        for v in out.coeffs.values_mut() {
            *v = -v.clone();
        }
        out
    }

    pub fn scale(&self, c: &Q) -> MultiJet {
        if c.is_zero() {
            return MultiJet::zero(self.n, self.order, self.base.clone());
        }
        let mut out = self.clone();
        for v in out.coeffs.values_mut() {
            *v = &*v * c;
        }
        out
    }

    /// Exact product truncated at the common order.
    pub fn mul(&self, other: &MultiJet) -> Result<MultiJet, JetError> {
        self.check_same_shape(other)?;
        let mut out = MultiJet::zero(self.n, self.order, self.base.clone());
        for (ma, va) in &self.coeffs {
            let da = ma.degree();
            for (mb, vb) in &other.coeffs {
                if da + mb.degree() > self.order {
                    // BTreeMap iterates in graded order: all later mb are larger
                    break;
                }
                out.add_to(ma.mul(mb), &(va * vb));
            }
        }
        Ok(out)
    }

    /// Multiplies by the monomial `(x_i - base_i)^k` (a plain exponent
    /// shift), truncating at the declared order.
    pub fn mul_monomial(&self, i: usize, k: u32) -> MultiJet {
        let mut out = MultiJet::zero(self.n, self.order, self.base.clone());
        for (m, v) in &self.coeffs {
            if m.degree() + k <= self.order {
                let mut e = m.clone();
                e.0[i] += k;
                out.set(e, v.clone());
            }
        }
        out
    }

    /// Formal partial derivative with respect to `x_i` (1-based).
    /// The result is declared at order `order - 1`.
    pub fn partial(&self, i: usize) -> Result<MultiJet, JetError> {
        if i == 0 || i > self.n {
            return Err(JetError::IndexOutOfRange { index: i, n: self.n });
        }
        let new_order = self.order.saturating_sub(1);
        let mut out = MultiJet::zero(self.n, new_order, self.base.clone());
        for (m, v) in &self.coeffs {
            let e = m.0[i - 1];
            if e == 0 {
                continue;
            }
            let mut me = m.clone();
            me.0[i - 1] -= 1;
            out.add_to(me, &(v * Q::from_integer(e.into())));
        }
        Ok(out)
    }

    /// Re-declares the jet at a lower order, dropping higher monomials.
    pub fn truncate(&self, order: u32) -> MultiJet {
        let mut out = MultiJet::zero(self.n, order.min(self.order), self.base.clone());
        for (m, v) in &self.coeffs {
            if m.degree() <= out.order {
                out.set(m.clone(), v.clone());
            }
        }
        out
    }

    /// Reinterprets the same coefficients at a translated base point.
    pub fn with_base(&self, base: Vec<Q>) -> MultiJet {
        assert_eq!(base.len(), self.n);
        MultiJet {
            n: self.n,
            order: self.order,
            base,
            coeffs: self.coeffs.clone(),
        }
    }

    /// Largest total degree with a nonzero coefficient, or `None` for the
    /// zero jet.
    pub fn max_degree(&self) -> Option<u32> {
        self.coeffs.keys().map(|m| m.degree()).max()
    }

    /// Smallest total degree with a nonzero coefficient.
    pub fn min_degree(&self) -> Option<u32> {
        self.coeffs.keys().next().map(|m| m.degree())
    }

    /// Restriction to the line through the base point along `x_i`:
    /// keeps the monomials supported on variable `i` alone.
    pub fn restrict_to_axis(&self, i: usize) -> Result<UniJet, JetError> {
        if i == 0 || i > self.n {
            return Err(JetError::IndexOutOfRange { index: i, n: self.n });
        }
        let mut u = UniJet::zero(self.order, self.base[i - 1].clone());
        for (m, v) in &self.coeffs {
            if m.0
                .iter()
                .enumerate()
                .all(|(j, &e)| e == 0 || j == i - 1)
            {
                u.coeffs[m.0[i - 1] as usize] = v.clone();
            }
        }
        Ok(u)
    }

    /// Embeds a one-variable jet as a jet in variable `x_i` of an
    /// `n`-variable ambient space. The ambient base must agree with the
    /// jet's center in coordinate `i`.
    pub fn embed(u: &UniJet, n: usize, order: u32, base: Vec<Q>, i: usize) -> Result<Self, JetError> {
        if i == 0 || i > n {
            return Err(JetError::IndexOutOfRange { index: i, n });
        }
        if base[i - 1] != u.center {
            return Err(JetError::CenterMismatch {
                outer: format_q(&u.center),
                inner: format_q(&base[i - 1]),
            });
        }
        let mut j = MultiJet::zero(n, order, base);
        for (k, v) in u.coeffs.iter().enumerate() {
            if k as u32 > order {
                break;
            }
            if !v.is_zero() {
                let mut e = vec![0; n];
                e[i - 1] = k as u32;
                j.set(Mono(e), v.clone());
            }
        }
        Ok(j)
    }

    /// Multiplicative inverse; requires a nonzero constant term.
    pub fn invert(&self) -> Result<MultiJet, JetError> {
        let c = self.constant_term();
        if c.is_zero() {
            return Err(JetError::DivisionByZero);
        }
        // 1/(c + h) = (1/c) * sum (-h/c)^k, h of positive order
        let c_inv = c.recip();
        let mut h = self.clone();
        h.set(Mono::zero(self.n), Q::zero());
        let h = h.scale(&-c_inv.clone());
        let mut out = MultiJet::constant(self.n, self.order, self.base.clone(), Q::one());
        let mut pow = MultiJet::constant(self.n, self.order, self.base.clone(), Q::one());
        for _ in 1..=self.order {
            pow = pow.mul(&h)?;
            if pow.is_zero() {
                break;
            }
            out = out.add(&pow)?;
        }
        Ok(out.scale(&c_inv))
    }

    pub fn div(&self, other: &MultiJet) -> Result<MultiJet, JetError> {
        self.mul(&other.invert()?)
    }

    /// Integer power by repeated squaring; negative exponents invert first.
    pub fn int_pow(&self, k: i64) -> Result<MultiJet, JetError> {
        if k < 0 {
            return self.invert()?.int_pow(-k);
        }
        let mut result = MultiJet::constant(self.n, self.order, self.base.clone(), Q::one());
        let mut sq = self.clone();
        let mut e = k as u64;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&sq)?;
            }
            e >>= 1;
            if e > 0 {
                sq = sq.mul(&sq)?;
            }
        }
        Ok(result)
    }

    /// `exp` of a jet with zero constant term.
    pub fn exp_of_nilpotent(&self) -> Result<MultiJet, JetError> {
        if !self.constant_term().is_zero() {
            return Err(JetError::Mismatch(
                "exp expansion requires zero constant term".into(),
            ));
        }
        let mut out = MultiJet::constant(self.n, self.order, self.base.clone(), Q::one());
        let mut term = MultiJet::constant(self.n, self.order, self.base.clone(), Q::one());
        for k in 1..=self.order {
            term = term.mul(self)?.scale(&Q::new(1.into(), k.into()));
            if term.is_zero() {
                break;
            }
            out = out.add(&term)?;
        }
        Ok(out)
    }

    /// Substitution `x_i := g_i(t_i)` with one-variable jets `g_i`; the
    /// result is based at the centers of the `g_i`.
    ///
    /// Each `g_i` must hit the current base (`g_i(center_i) = base_i`) and
    /// have a nonzero linear coefficient.
    pub fn substitute_diagonal(&self, g: &[UniJet]) -> Result<MultiJet, JetError> {
        if g.len() != self.n {
            return Err(JetError::Mismatch(format!(
                "expected {} substitution jets, got {}",
                self.n,
                g.len()
            )));
        }
        for (i, gi) in g.iter().enumerate() {
            if gi.constant_term() != self.base[i] {
                return Err(JetError::CenterMismatch {
                    outer: format_q(&gi.constant_term()),
                    inner: format_q(&self.base[i]),
                });
            }
            if gi.order < self.order {
                return Err(JetError::Mismatch(format!(
                    "substitution jet {} has order {} < {}",
                    i + 1,
                    gi.order,
                    self.order
                )));
            }
            if gi.coeffs.len() < 2 || gi.coeffs[1].is_zero() {
                return Err(JetError::NotInvertible);
            }
        }
        let new_base: Vec<Q> = g.iter().map(|gi| gi.center.clone()).collect();
        // powers of (g_i - base_i), each of positive order, embedded lazily
        let w = self.order;
        let mut pows: Vec<Vec<MultiJet>> = Vec::with_capacity(self.n);
        for (i, gi) in g.iter().enumerate() {
            let mut hat = gi.truncate(w);
            hat.coeffs[0] = Q::zero();
            let emb = MultiJet::embed(&hat, self.n, w, new_base.clone(), i + 1)?;
            let mut col = vec![MultiJet::constant(self.n, w, new_base.clone(), Q::one())];
            for k in 1..=w as usize {
                let next = col[k - 1].mul(&emb)?;
                col.push(next);
            }
            pows.push(col);
        }
        let mut out = MultiJet::zero(self.n, w, new_base.clone());
        for (m, v) in &self.coeffs {
            let mut term = MultiJet::constant(self.n, w, new_base.clone(), v.clone());
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    term = term.mul(&pows[i][e as usize])?;
                }
            }
            out = out.add(&term)?;
        }
        Ok(out)
    }
}

impl fmt::Display for MultiJet {
    /// Debug dump: one monomial per line, `coeff  exponent-vector`, in
    /// graded-lex order. Used by golden-file tests.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return writeln!(f, "0");
        }
        for (m, v) in &self.coeffs {
            let expo: Vec<String> = m.0.iter().map(|e| e.to_string()).collect();
            writeln!(f, "{}  [{}]", format_q(v), expo.join(" "))?;
        }
        Ok(())
    }
}

/// A one-variable jet: Taylor coefficients at `center`, length `order+1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniJet {
    pub order: u32,
    pub center: Q,
    pub coeffs: Vec<Q>,
}

impl UniJet {
    pub fn zero(order: u32, center: Q) -> Self {
        UniJet {
            order,
            center,
            coeffs: vec![Q::zero(); order as usize + 1],
        }
    }

    pub fn constant(order: u32, center: Q, v: Q) -> Self {
        let mut u = UniJet::zero(order, center);
        u.coeffs[0] = v;
        u
    }

    /// The identity map `t` as a jet at `center` (constant term = center).
    pub fn identity(order: u32, center: Q) -> Self {
        let mut u = UniJet::zero(order, center.clone());
        u.coeffs[0] = center;
        if order >= 1 {
            u.coeffs[1] = Q::one();
        }
        u
    }

    pub fn from_coeffs(center: Q, coeffs: Vec<Q>) -> Self {
        assert!(!coeffs.is_empty());
        UniJet {
            order: (coeffs.len() - 1) as u32,
            center,
            coeffs,
        }
    }

    /// Jet of a polynomial given in powers of the plain variable `x`,
    /// recentered at `center`: coefficients of `p(center + t)`.
    pub fn from_polynomial(order: u32, center: Q, poly_in_x: &[Q]) -> Self {
        let mut u = UniJet::zero(order, center.clone());
        // p(center + t) via Horner in (center + t)
        for c in poly_in_x.iter().rev() {
            // u = u * (center + t) + c
            let mut next = vec![Q::zero(); order as usize + 1];
            for k in 0..=order as usize {
                if !u.coeffs[k].is_zero() {
                    next[k] = &next[k] + &u.coeffs[k] * &center;
                    if k + 1 <= order as usize {
                        next[k + 1] = &next[k + 1] + &u.coeffs[k];
                    }
                }
            }
            next[0] = &next[0] + c;
            u.coeffs = next;
        }
        u
    }

    pub fn constant_term(&self) -> Q {
        self.coeffs[0].clone()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Smallest index with a nonzero coefficient; `None` when zero to the
    /// declared order.
    pub fn order_of_vanishing(&self) -> Option<u32> {
        self.coeffs
            .iter()
            .position(|c| !c.is_zero())
            .map(|k| k as u32)
    }

    pub fn truncate(&self, order: u32) -> UniJet {
        let order = order.min(self.order);
        UniJet {
            order,
            center: self.center.clone(),
            coeffs: self.coeffs[..=order as usize].to_vec(),
        }
    }

    fn check_compatible(&self, other: &UniJet) -> Result<(), JetError> {
        if self.order != other.order || self.center != other.center {
            return Err(JetError::Mismatch(format!(
                "order {} vs {}, center {} vs {}",
                self.order,
                other.order,
                format_q(&self.center),
                format_q(&other.center)
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &UniJet) -> Result<UniJet, JetError> {
        self.check_compatible(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(UniJet {
            order: self.order,
            center: self.center.clone(),
            coeffs,
        })
    }

    pub fn sub(&self, other: &UniJet) -> Result<UniJet, JetError> {
        self.add(&other.scale(&-Q::one()))
    }

    pub fn scale(&self, c: &Q) -> UniJet {
        UniJet {
            order: self.order,
            center: self.center.clone(),
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    pub fn mul(&self, other: &UniJet) -> Result<UniJet, JetError> {
        self.check_compatible(other)?;
        let w = self.order as usize;
        let mut coeffs = vec![Q::zero(); w + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if i + j > w {
                    break;
                }
                if !b.is_zero() {
                    coeffs[i + j] = &coeffs[i + j] + a * b;
                }
            }
        }
        Ok(UniJet {
            order: self.order,
            center: self.center.clone(),
            coeffs,
        })
    }

    /// Derivative, declared one order lower.
    pub fn derivative(&self) -> UniJet {
        let order = self.order.saturating_sub(1);
        let mut coeffs = vec![Q::zero(); order as usize + 1];
        for k in 1..self.coeffs.len() {
            coeffs[k - 1] = &self.coeffs[k] * Q::from_integer((k as i64).into());
        }
        UniJet {
            order,
            center: self.center.clone(),
            coeffs,
        }
    }

    /// Antiderivative with value `value_at_center` at the center,
    /// declared one order higher.
    pub fn integrate(&self, value_at_center: Q) -> UniJet {
        let order = self.order + 1;
        let mut coeffs = vec![Q::zero(); order as usize + 1];
        coeffs[0] = value_at_center;
        for (k, c) in self.coeffs.iter().enumerate() {
            coeffs[k + 1] = c / Q::from_integer((k as i64 + 1).into());
        }
        UniJet {
            order,
            center: self.center.clone(),
            coeffs,
        }
    }

    pub fn invert(&self) -> Result<UniJet, JetError> {
        let c = self.constant_term();
        if c.is_zero() {
            return Err(JetError::DivisionByZero);
        }
        let c_inv = c.recip();
        let mut h = self.scale(&-c_inv.clone());
        h.coeffs[0] = Q::zero();
        let mut out = UniJet::constant(self.order, self.center.clone(), Q::one());
        let mut pow = UniJet::constant(self.order, self.center.clone(), Q::one());
        for _ in 1..=self.order {
            pow = pow.mul(&h)?;
            if pow.is_zero() {
                break;
            }
            out = out.add(&pow)?;
        }
        Ok(out.scale(&c_inv))
    }

    pub fn div(&self, other: &UniJet) -> Result<UniJet, JetError> {
        self.mul(&other.invert()?)
    }

    /// One-variable composition `self ∘ inner`. Requires
    /// `self.center == inner(center)`, i.e. the inner constant term.
    /// The result is centered where `inner` is centered.
    pub fn compose(&self, inner: &UniJet) -> Result<UniJet, JetError> {
        if inner.constant_term() != self.center {
            return Err(JetError::CenterMismatch {
                outer: format_q(&self.center),
                inner: format_q(&inner.constant_term()),
            });
        }
        let w = self.order.min(inner.order);
        let mut hat = inner.truncate(w);
        hat.coeffs[0] = Q::zero();
        // Horner: result = (((c_W) hat + c_{W-1}) hat + ...) + c_0
        let mut out = UniJet::zero(w, inner.center.clone());
        for k in (0..=w.min(self.order) as usize).rev() {
            out = out.mul(&hat)?;
            out.coeffs[0] = &out.coeffs[0] + &self.coeffs[k];
        }
        Ok(out)
    }

    /// Compositional inverse: returns `h` with `h(self(t)) = t` to the
    /// declared order. Centers swap: `h` is centered at `self`'s constant
    /// term and has constant term `self.center`.
    pub fn reversion(&self) -> Result<UniJet, JetError> {
        if self.coeffs.len() < 2 || self.coeffs[1].is_zero() {
            return Err(JetError::NotInvertible);
        }
        let w = self.order as usize;
        // work with the reduced series ghat(t) = self - const, centered 0
        let mut ghat = self.coeffs.clone();
        ghat[0] = Q::zero();
        // powers of ghat as coefficient vectors
        let mut pows: Vec<Vec<Q>> = vec![vec![Q::zero(); w + 1]; w + 1];
        pows[0][0] = Q::one();
        for k in 1..=w {
            let prev = pows[k - 1].clone();
            for i in 0..=w {
                if prev[i].is_zero() {
                    continue;
                }
                for j in 1..=w - i {
                    if !ghat[j].is_zero() {
                        pows[k][i + j] = &pows[k][i + j] + &prev[i] * &ghat[j];
                    }
                }
            }
        }
        let c1_inv = self.coeffs[1].recip();
        let mut d = vec![Q::zero(); w + 1]; // coefficients of the inverse
        if w >= 1 {
            d[1] = c1_inv.clone();
        }
        let mut c1_pow = c1_inv.clone();
        for k in 2..=w {
            // coefficient of t^k in sum_{j<k} d_j ghat^j must cancel
            let mut acc = Q::zero();
            for j in 1..k {
                if !d[j].is_zero() {
                    acc = acc + &d[j] * &pows[j][k];
                }
            }
            c1_pow = &c1_pow * &c1_inv; // now c1^{-(k)} ... built incrementally
            d[k] = -acc * c1_pow.clone();
        }
        Ok(UniJet {
            order: self.order,
            center: self.constant_term(),
            coeffs: {
                let mut c = d;
                c[0] = self.center.clone();
                c
            },
        })
    }

    /// Composition of a one-variable jet with a multivariate jet:
    /// the order-W expansion of `self ∘ a`.
    pub fn compose_multi(&self, a: &MultiJet) -> Result<MultiJet, JetError> {
        if a.constant_term() != self.center {
            return Err(JetError::CenterMismatch {
                outer: format_q(&self.center),
                inner: format_q(&a.constant_term()),
            });
        }
        let w = a.order().min(self.order);
        let mut hat = a.truncate(w);
        hat.set(Mono::zero(a.n()), Q::zero());
        let mut out = MultiJet::zero(a.n(), w, a.base().to_vec());
        for k in (0..=w.min(self.order) as usize).rev() {
            out = out.mul(&hat)?;
            let c0 = out.constant_term() + &self.coeffs[k];
            out.set(Mono::zero(a.n()), c0);
        }
        Ok(out)
    }
}

/// Order-`order` jet of `exp` composed with a zero-constant-term jet is
/// available through [`MultiJet::exp_of_nilpotent`]; this is the
/// one-variable exponential series `exp(t)` at 0 scaled by nothing.
pub fn exp_series(order: u32) -> UniJet {
    let mut u = UniJet::zero(order, Q::zero());
    u.coeffs[0] = Q::one();
    let mut f = Q::one();
    for k in 1..=order as usize {
        f = f / Q::from_integer((k as i64).into());
        u.coeffs[k] = f.clone();
    }
    u
}

/// `log(1+t)` at 0 to the given order.
pub fn log1p_series(order: u32) -> UniJet {
    let mut u = UniJet::zero(order, Q::zero());
    for k in 1..=order as usize {
        let sign = if k % 2 == 0 { -1 } else { 1 };
        u.coeffs[k] = Q::new(sign.into(), (k as i64).into());
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{qi, qr};

    fn base2() -> Vec<Q> {
        vec![qi(0), qi(0)]
    }

    fn x(n: usize, w: u32, i: usize) -> MultiJet {
        MultiJet::coordinate(n, w, vec![qi(0); n], i).unwrap()
    }

    #[test]
    fn difference_of_squares() {
        // (1+x)(1-x) = 1 - x^2 at W=2
        let one = MultiJet::constant(1, 2, vec![qi(0)], qi(1));
        let xx = x(1, 2, 1);
        let p = one.add(&xx).unwrap();
        let m = one.sub(&xx).unwrap();
        let prod = p.mul(&m).unwrap();
        let mut expect = MultiJet::constant(1, 2, vec![qi(0)], qi(1));
        expect.set(Mono(vec![2]), qi(-1));
        assert_eq!(prod, expect);
    }

    #[test]
    fn multiplicative_identity() {
        let one = MultiJet::constant(2, 3, base2(), qi(1));
        let a = x(2, 3, 1).add(&x(2, 3, 2)).unwrap().add(&one).unwrap();
        assert_eq!(a.mul(&one).unwrap(), a);
    }

    #[test]
    fn cube_of_binomial_matches_multinomials() {
        // (x+y)^3 at W=3, coefficients checked against independently
        // computed binomials 1,3,3,1
        let s = x(2, 3, 1).add(&x(2, 3, 2)).unwrap();
        let c = s.int_pow(3).unwrap();
        assert_eq!(c.coeff(&Mono(vec![3, 0])), qi(1));
        assert_eq!(c.coeff(&Mono(vec![2, 1])), qi(3));
        assert_eq!(c.coeff(&Mono(vec![1, 2])), qi(3));
        assert_eq!(c.coeff(&Mono(vec![0, 3])), qi(1));
        assert_eq!(c.coeffs().count(), 4);
    }

    #[test]
    fn partial_derivative_power_rule() {
        // d/dx (x^2 y) = 2xy
        let j = x(2, 4, 1)
            .int_pow(2)
            .unwrap()
            .mul(&x(2, 4, 2))
            .unwrap();
        let d = j.partial(1).unwrap();
        assert_eq!(d.order(), 3);
        assert_eq!(d.coeff(&Mono(vec![1, 1])), qi(2));
        assert_eq!(d.coeffs().count(), 1);
        // derivative of a constant is zero
        let c = MultiJet::constant(2, 4, base2(), qi(7));
        assert!(c.partial(2).unwrap().is_zero());
    }

    #[test]
    fn exp_series_values() {
        let e = exp_series(3);
        assert_eq!(e.coeffs, vec![qi(1), qi(1), qr(1, 2), qr(1, 6)]);
    }

    #[test]
    fn compose_multi_squaring() {
        // theta = s^2 at center 0, a = x + y, W = 2 -> x^2 + 2xy + y^2
        let mut theta = UniJet::zero(2, qi(0));
        theta.coeffs[2] = qi(1);
        let a = x(2, 2, 1).add(&x(2, 2, 2)).unwrap();
        let c = theta.compose_multi(&a).unwrap();
        assert_eq!(c.coeff(&Mono(vec![2, 0])), qi(1));
        assert_eq!(c.coeff(&Mono(vec![1, 1])), qi(2));
        assert_eq!(c.coeff(&Mono(vec![0, 2])), qi(1));
        assert_eq!(c.coeffs().count(), 3);
    }

    #[test]
    fn compose_multi_identity() {
        let a = x(2, 3, 1).mul(&x(2, 3, 2)).unwrap().add(&x(2, 3, 1)).unwrap();
        let id = UniJet::identity(3, a.constant_term());
        assert_eq!(id.compose_multi(&a).unwrap(), a);
    }

    #[test]
    fn log_of_product_has_no_mixed_terms() {
        // theta = log(1+s), a = x + y + xy (W=4)
        // log((1+x)(1+y)) = log(1+x) + log(1+y): no mixed monomials
        let w = 4;
        let theta = log1p_series(w);
        let a = x(2, w, 1)
            .add(&x(2, w, 2))
            .unwrap()
            .add(&x(2, w, 1).mul(&x(2, w, 2)).unwrap())
            .unwrap();
        let c = theta.compose_multi(&a).unwrap();
        for (m, v) in c.coeffs() {
            let mixed = m.0.iter().filter(|&&e| e > 0).count() > 1;
            assert!(!mixed, "mixed monomial {:?} = {}", m, format_q(v));
        }
        // and the pure parts match log(1+t)
        let l = log1p_series(w);
        for k in 1..=w as usize {
            assert_eq!(c.coeff(&Mono(vec![k as u32, 0])), l.coeffs[k]);
        }
    }

    #[test]
    fn substitute_identity_and_squares() {
        let a = x(2, 4, 1).add(&x(2, 4, 2)).unwrap();
        let id = vec![UniJet::identity(4, qi(0)), UniJet::identity(4, qi(0))];
        assert_eq!(a.substitute_diagonal(&id).unwrap(), a);
        // g_i(t) = t^2 is not invertible (zero linear coefficient)
        let mut sq = UniJet::zero(4, qi(0));
        sq.coeffs[2] = qi(1);
        assert!(matches!(
            a.substitute_diagonal(&[sq.clone(), sq]).unwrap_err(),
            JetError::NotInvertible
        ));
    }

    #[test]
    fn substitute_exp_minus_one() {
        // a = x1 + x2 + x1 x2 (W=4), g_i = e^t - 1:
        // result is e^{t1+t2} - 1, coefficient 1/k! on every monomial of
        // total degree k (independent expansion of the closed form)
        let w = 4;
        let a = x(2, w, 1)
            .add(&x(2, w, 2))
            .unwrap()
            .add(&x(2, w, 1).mul(&x(2, w, 2)).unwrap())
            .unwrap();
        let mut g = exp_series(w);
        g.coeffs[0] = qi(0); // e^t - 1, centered at 0, hits base 0
        let r = a.substitute_diagonal(&[g.clone(), g]).unwrap();
        for (m, v) in r.coeffs() {
            let k = m.degree();
            let mut fact = Q::one();
            for i in 1..=m.0[0] {
                fact = fact * Q::from_integer((i as i64).into());
            }
            for i in 1..=m.0[1] {
                fact = fact * Q::from_integer((i as i64).into());
            }
            // coefficient of t1^a t2^b in e^{t1+t2}-1 is 1/(a! b!)
            assert_eq!(v.clone(), fact.recip(), "monomial degree {}", k);
        }
    }

    #[test]
    fn reversion_catalan_like() {
        // g = t + t^2 -> t - t^2 + 2t^3 - 5t^4 (order 4), verified by
        // composing back to the identity
        let mut g = UniJet::zero(4, qi(0));
        g.coeffs[1] = qi(1);
        g.coeffs[2] = qi(1);
        let h = g.reversion().unwrap();
        assert_eq!(h.coeffs, vec![qi(0), qi(1), qi(-1), qi(2), qi(-5)]);
        let back = h.compose(&g).unwrap();
        assert_eq!(back, UniJet::identity(4, qi(0)));
    }

    #[test]
    fn reversion_scalings() {
        let g = UniJet::from_coeffs(qi(0), vec![qi(0), qi(2), qi(0), qi(0)]);
        let h = g.reversion().unwrap();
        assert_eq!(h.coeffs[1], qr(1, 2));
        let id = UniJet::identity(5, qi(0));
        assert_eq!(id.reversion().unwrap(), id);
    }

    #[test]
    fn reversion_swaps_centers() {
        // g centered at 2 with g(2) = 5
        let g = UniJet::from_coeffs(qi(2), vec![qi(5), qi(3), qi(1)]);
        let h = g.reversion().unwrap();
        assert_eq!(h.center, qi(5));
        assert_eq!(h.constant_term(), qi(2));
        let back = h.compose(&g).unwrap();
        assert_eq!(back, UniJet::identity(2, qi(2)));
    }

    #[test]
    fn invert_geometric() {
        let one_minus_x = MultiJet::constant(1, 5, vec![qi(0)], qi(1))
            .sub(&x(1, 5, 1))
            .unwrap();
        let inv = one_minus_x.invert().unwrap();
        for k in 0..=5u32 {
            assert_eq!(inv.coeff(&Mono(vec![k])), qi(1));
        }
        let prod = inv.mul(&one_minus_x).unwrap();
        assert_eq!(prod, MultiJet::constant(1, 5, vec![qi(0)], qi(1)));
    }

    #[test]
    fn mismatched_shapes_error() {
        let a = x(2, 3, 1);
        let b = x(2, 4, 1);
        assert!(a.add(&b).is_err());
        let c = MultiJet::coordinate(2, 3, vec![qi(1), qi(0)], 1).unwrap();
        assert!(a.add(&c).is_err());
    }
}
