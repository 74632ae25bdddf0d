//! Web validation, the infinitesimal-symmetry solver, and certificates.
//!
//! A web is the family of coordinate foliations `x_1 .. x_n` plus the
//! level sets of one more first integral `f`. Its infinitesimal
//! isomorphisms are the vector fields preserving all n+1 foliations;
//! preserving the coordinate foliations forces the diagonal shape
//! `X = sum_i X_i(x_i) d/dx_i`, and preserving the `f`-foliation is the
//! functional dependence `X.f = phi(f)`.
//!
//! The dependence is tested pairwise: near a point where every partial
//! of `f` is nonzero, `X.f = phi o f` is equivalent to
//! `d_i(X.f) d_j f - d_j(X.f) d_i f = 0` for all `i < j`. That keeps the
//! unknown `phi` out of the linear system. The solver works at a fixed
//! jet order, so its dimension is an upper bound for the analytic
//! symmetry algebra; certificates for explicit fields become exact once
//! the rational degree bound of the residual is below the checked order.

use crate::expr::{degree_profile, expand_to_jet, DegreeProfile, ExprError, Expression};
use crate::jets::{JetError, Mono, MultiJet, UniJet};
use crate::linalg::{Echelon, Mat};
use crate::rat::{format_q, Q};
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WebError {
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("base point has {got} coordinates for dimension {n}")]
    BaseLength { got: usize, n: usize },
    #[error("jet order must be at least 4, got {0}")]
    OrderTooSmall(u32),
    #[error("degree cap {d} must satisfy 1 <= d <= order - 1 = {max}")]
    BadDegreeCap { d: u32, max: u32 },
    #[error("partial derivative with respect to x{index} vanishes at the base point")]
    VanishingPartial { index: usize },
    #[error("expansion failed: {0}")]
    Expansion(#[from] ExprError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("field shape mismatch: {0}")]
    FieldShape(String),
    #[error("induced reparametrization failed verification at order {order}")]
    PhiPostcondition { order: u32 },
    #[error("normal form computation failed: {0}")]
    NormalForm(String),
}

/// Input description of a web: dimension, extra first integral, base
/// point and working jet order.
#[derive(Debug, Clone)]
pub struct WebSpec {
    pub n: usize,
    pub f: Expression,
    pub base: Vec<Q>,
    pub order: u32,
}

impl WebSpec {
    pub fn new(n: usize, f: Expression, base: Vec<Q>, order: u32) -> Self {
        WebSpec { n, f, base, order }
    }
}

/// Builds a web spec from an expression in text form.
pub fn web_from_text(n: usize, f: &str, base: Vec<Q>, order: u32) -> Result<WebSpec, WebError> {
    let e = crate::expr::parse_expression(f, n)?;
    Ok(WebSpec::new(n, e, base, order))
}

/// Validation outcome: the partials of `f` at the base point.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub partials: Vec<Q>,
    pub log_scale: Q,
    pub order: u32,
}

/// A validated web with its cached expansion data.
#[derive(Debug, Clone)]
pub struct Web {
    pub spec: WebSpec,
    /// Jet of `f` at the base, order W, with the exponential unit split off.
    pub f_jet: MultiJet,
    /// `f = exp(log_scale) * f_jet` when an exponential scale is present.
    pub log_scale: Q,
    /// Constant terms of the partials (all nonzero).
    pub partials: Vec<Q>,
    /// Degree data when `f` is rational times exp(affine).
    pub profile: Option<DegreeProfile>,
}

/// Checks the web condition: every partial of `f` is nonzero at the base
/// point and the expansion succeeds to the working order.
pub fn validate_web(spec: &WebSpec) -> Result<Web, WebError> {
    if spec.n < 2 {
        return Err(WebError::DimensionTooSmall(spec.n));
    }
    if spec.base.len() != spec.n {
        return Err(WebError::BaseLength {
            got: spec.base.len(),
            n: spec.n,
        });
    }
    if spec.order < 4 {
        return Err(WebError::OrderTooSmall(spec.order));
    }
    let sj = expand_to_jet(&spec.f, &spec.base, spec.order + 1)?;
    let mut partials = Vec::with_capacity(spec.n);
    for i in 1..=spec.n {
        let p = sj.jet.partial(i)?.constant_term();
        if p.is_zero() {
            return Err(WebError::VanishingPartial { index: i });
        }
        partials.push(p);
    }
    Ok(Web {
        f_jet: sj.jet.truncate(spec.order),
        log_scale: sj.log_scale,
        partials,
        profile: degree_profile(&spec.f),
        spec: spec.clone(),
    })
}

impl Web {
    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn order(&self) -> u32 {
        self.spec.order
    }

    pub fn base(&self) -> &[Q] {
        &self.spec.base
    }

    pub fn report(&self) -> ValidationReport {
        ValidationReport {
            partials: self.partials.clone(),
            log_scale: self.log_scale.clone(),
            order: self.spec.order,
        }
    }
}

// ---------------------------------------------------------------------
// Diagonal fields
// ---------------------------------------------------------------------

/// A candidate infinitesimal isomorphism: `X = sum X_i(x_i) d/dx_i` with
/// one-variable components, the i-th a jet/polynomial in `x_i` centered
/// at `base_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagonalField {
    pub components: Vec<UniJet>,
}

impl DiagonalField {
    pub fn new(components: Vec<UniJet>) -> Self {
        DiagonalField { components }
    }

    /// Builds a field from polynomials in the plain variables `x_i`
    /// (absolute coefficients), recentered at the base point.
    pub fn from_absolute_polys(polys: &[Vec<Q>], base: &[Q], order: u32) -> Self {
        let components = polys
            .iter()
            .zip(base)
            .map(|(p, b)| UniJet::from_polynomial(order, b.clone(), p))
            .collect();
        DiagonalField { components }
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    /// Largest component degree, ignoring trailing zero coefficients.
    pub fn degree(&self) -> u32 {
        self.components
            .iter()
            .filter_map(|c| {
                c.coeffs
                    .iter()
                    .rposition(|v| !v.is_zero())
                    .map(|k| k as u32)
            })
            .max()
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.is_zero())
    }

    /// Values of the components at the base point.
    pub fn values_at_base(&self) -> Vec<Q> {
        self.components.iter().map(|c| c.constant_term()).collect()
    }

    /// Componentwise bracket of two diagonal fields, exact on the
    /// polynomial coefficients.
    pub fn bracket(&self, other: &DiagonalField) -> Result<DiagonalField, WebError> {
        if self.n() != other.n() {
            return Err(WebError::FieldShape(format!(
                "bracket of fields with {} and {} components",
                self.n(),
                other.n()
            )));
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| {
                if a.center != b.center {
                    return Err(WebError::FieldShape("component centers differ".into()));
                }
                Ok(poly_bracket_jet(a, b))
            })
            .collect::<Result<_, _>>()?;
        Ok(DiagonalField { components })
    }

    fn check_against(&self, web: &Web) -> Result<(), WebError> {
        if self.n() != web.n() {
            return Err(WebError::FieldShape(format!(
                "field has {} components for dimension {}",
                self.n(),
                web.n()
            )));
        }
        for (i, c) in self.components.iter().enumerate() {
            if c.center != web.base()[i] {
                return Err(WebError::FieldShape(format!(
                    "component {} is centered at {}, base has {}",
                    i + 1,
                    format_q(&c.center),
                    format_q(&web.base()[i])
                )));
            }
        }
        Ok(())
    }
}

/// Exact polynomial bracket `a b' - b a'` on coefficient vectors; the
/// result keeps full degree (no truncation).
fn poly_bracket_jet(a: &UniJet, b: &UniJet) -> UniJet {
    let pa = &a.coeffs;
    let pb = &b.coeffs;
    let deg = pa.len() + pb.len();
    let mut out = vec![Q::zero(); deg.max(1)];
    for (i, ai) in pa.iter().enumerate() {
        if ai.is_zero() {
            continue;
        }
        // a * b'
        for (j, bj) in pb.iter().enumerate().skip(1) {
            if !bj.is_zero() {
                out[i + j - 1] = &out[i + j - 1] + ai * bj * Q::from_integer((j as i64).into());
            }
        }
    }
    for (i, bi) in pb.iter().enumerate() {
        if bi.is_zero() {
            continue;
        }
        // - b * a'
        for (j, aj) in pa.iter().enumerate().skip(1) {
            if !aj.is_zero() {
                out[i + j - 1] = &out[i + j - 1] - bi * aj * Q::from_integer((j as i64).into());
            }
        }
    }
    while out.len() > 1 && out.last().map_or(false, |v| v.is_zero()) {
        out.pop();
    }
    UniJet::from_coeffs(a.center.clone(), out)
}

/// `X.a = sum_i X_i d_i a`, declared one order lower than `a`.
pub fn apply_field(x: &DiagonalField, a: &MultiJet) -> Result<MultiJet, WebError> {
    let n = a.n();
    if x.n() != n {
        return Err(WebError::FieldShape(format!(
            "field has {} components for a {}-variable jet",
            x.n(),
            n
        )));
    }
    let w = a.order().saturating_sub(1);
    let mut out = MultiJet::zero(n, w, a.base().to_vec());
    for i in 1..=n {
        let da = a.partial(i)?.truncate(w);
        let xi = MultiJet::embed(&x.components[i - 1].truncate(w), n, w, a.base().to_vec(), i)?;
        out = out.add(&xi.mul(&da)?)?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// Symmetry certificates
// ---------------------------------------------------------------------

/// Outcome of checking `X.f = phi(f)` at jet level.
#[derive(Debug, Clone)]
pub struct SymmetryCertificate {
    pub passed: bool,
    /// Order to which the pairwise residuals were checked.
    pub order_checked: u32,
    /// The certificate is an exact identity (degree bound cleared).
    pub exact: bool,
    /// Degree bound of the cleared residual, when `f` is tractable.
    pub residual_degree_bound: Option<u32>,
    /// `X.f` vanishes identically at the checked order.
    pub xf_is_zero: bool,
    /// `X.f = 0` as an exact identity.
    pub xf_zero_exact: bool,
    /// First failing residual: (i, j, monomial, coefficient).
    pub first_failure: Option<(usize, usize, Vec<u32>, String)>,
}

/// Checks whether `x` is an infinitesimal isomorphism of the web by the
/// pairwise dependence test at order `W - 2`.
pub fn is_symmetry(x: &DiagonalField, web: &Web) -> Result<SymmetryCertificate, WebError> {
    x.check_against(web)?;
    let w = web.order();
    let xf = apply_field(x, &web.f_jet)?; // order W-1
    let rc = w.saturating_sub(2);
    let mut first_failure = None;
    'outer: for i in 1..=web.n() {
        for j in i + 1..=web.n() {
            let dxi = xf.partial(i)?; // order W-2
            let dxj = xf.partial(j)?;
            let fi = web.f_jet.partial(i)?.truncate(rc);
            let fj = web.f_jet.partial(j)?.truncate(rc);
            let res = dxi.mul(&fj)?.sub(&dxj.mul(&fi)?)?;
            if !res.is_zero() {
                let (m, v) = res.coeffs().next().expect("nonzero jet has a coefficient");
                first_failure = Some((i, j, m.0.clone(), format_q(v)));
                break 'outer;
            }
        }
    }
    let passed = first_failure.is_none();
    let dx = x.degree();
    let bound = web.profile.map(|p| {
        let b = dx + 2 * p.num_degree + 3 * p.den_degree;
        if p.has_exp {
            b
        } else {
            b.saturating_sub(3)
        }
    });
    let exact = passed && bound.map_or(false, |b| rc >= b);
    let xf_is_zero = xf.is_zero();
    let zero_bound = web.profile.map(|p| {
        let b = dx + p.num_degree + p.den_degree;
        if p.has_exp {
            b
        } else {
            b.saturating_sub(1)
        }
    });
    let xf_zero_exact = xf_is_zero && zero_bound.map_or(false, |b| w - 1 >= b);
    Ok(SymmetryCertificate {
        passed,
        order_checked: rc,
        exact,
        residual_degree_bound: bound,
        xf_is_zero,
        xf_zero_exact,
        first_failure,
    })
}

/// Recovers the one-variable reparametrization `phi` with
/// `X.f = phi o f`, as a jet centered at the base value of `f`
/// (exponential units split off). Restriction runs along the `x_1`
/// axis, where the first partial is nonzero.
pub fn induced_phi(x: &DiagonalField, web: &Web) -> Result<UniJet, WebError> {
    x.check_against(web)?;
    let w = web.order();
    let xf = apply_field(x, &web.f_jet)?; // order W-1
    let f_curve = web.f_jet.restrict_to_axis(1)?; // order W
    let xf_curve = xf.restrict_to_axis(1)?; // order W-1

    // invert s = f|curve(t): centered at base_1, constant f(base)
    let rev = f_curve.reversion().map_err(WebError::Jet)?;
    let phi = xf_curve.compose(&rev.truncate(w - 1))?;

    // postcondition: phi o f = X.f to order W-2
    let lhs = phi.compose_multi(&web.f_jet)?.truncate(w - 2);
    let rhs = xf.truncate(w - 2);
    if lhs != rhs {
        return Err(WebError::PhiPostcondition { order: w - 2 });
    }
    Ok(phi)
}

/// Classification of an induced reparametrization against the named
/// model maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PhiKind {
    Zero,
    Constant(Q),
    Identity,
    Square,
    Other,
}

impl std::fmt::Display for PhiKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PhiKind::Zero => write!(f, "zero"),
            PhiKind::Constant(c) => write!(f, "constant {}", format_q(c)),
            PhiKind::Identity => write!(f, "identity"),
            PhiKind::Square => write!(f, "square"),
            PhiKind::Other => write!(f, "other"),
        }
    }
}

/// Names `phi` when it matches one of the model maps exactly (as jets).
pub fn classify_phi(phi: &UniJet) -> PhiKind {
    let c = &phi.center;
    if phi.is_zero() {
        return PhiKind::Zero;
    }
    if phi.coeffs.iter().skip(1).all(|v| v.is_zero()) {
        return PhiKind::Constant(phi.coeffs[0].clone());
    }
    let id = UniJet::identity(phi.order, c.clone());
    if *phi == id {
        return PhiKind::Identity;
    }
    if phi.order >= 2 {
        let mut sq = UniJet::zero(phi.order, c.clone());
        sq.coeffs[0] = c * c;
        sq.coeffs[1] = c * Q::from_integer(2.into());
        sq.coeffs[2] = Q::one();
        if *phi == sq {
            return PhiKind::Square;
        }
    }
    PhiKind::Other
}

// ---------------------------------------------------------------------
// The solver
// ---------------------------------------------------------------------

/// Closure status of a solved basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClosureStatus {
    /// Brackets lie in the span as exact polynomials.
    Exact,
    /// Brackets lie in the span after truncation to the given order.
    JetLevel(u32),
    /// Some bracket is not in the span even at jet level.
    Failed { i: usize, j: usize },
    /// Trivially closed (dimension 0 or 1 with zero brackets).
    Trivial,
}

/// A solved symmetry algebra at jet order.
#[derive(Debug, Clone)]
pub struct SymmetrySolution {
    pub basis: Vec<DiagonalField>,
    /// Solution-space dimension as the residual order ramps from 3 to W-2.
    pub dims_by_order: Vec<usize>,
    pub stabilized: bool,
    pub order: u32,
    pub degree_cap: u32,
    pub closure: ClosureStatus,
}

impl SymmetrySolution {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// Solves the determining equations for diagonal fields with polynomial
/// components of degree at most `degree_cap` (defaults to `W - 1`).
///
/// The result has upper-bound semantics: every analytic symmetry
/// truncates to a solution, but a solution need not extend. Stability of
/// the dimension over the last three orders is the (reported) heuristic
/// for saturation.
pub fn solve_symmetries(web: &Web, degree_cap: Option<u32>) -> Result<SymmetrySolution, WebError> {
    let n = web.n();
    let w = web.order();
    let d = degree_cap.unwrap_or(w - 1);
    if d == 0 || d > w - 1 {
        return Err(WebError::BadDegreeCap { d, max: w - 1 });
    }
    let rc = w - 2; // residual order
    let base = web.base().to_vec();

    // first and second partials of f
    let mut f1 = Vec::with_capacity(n);
    for i in 1..=n {
        f1.push(web.f_jet.partial(i)?); // order W-1
    }
    let mut f2 = vec![vec![None; n]; n];
    for l in 0..n {
        for i in 0..n {
            f2[l][i] = Some(f1[l].partial(i + 1)?); // order W-2
        }
    }

    // products: v[a][b] = f_a * f_b, u[l][pair] = f_{la} f_b - f_{lb} f_a
    let mut v = vec![vec![None::<MultiJet>; n]; n];
    for a in 0..n {
        for b in a..n {
            let p = f1[a].truncate(rc).mul(&f1[b].truncate(rc))?;
            v[a][b] = Some(p.clone());
            v[b][a] = Some(p);
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let mut u = vec![vec![None::<MultiJet>; pairs.len()]; n];
    for l in 0..n {
        for (pi, &(i, j)) in pairs.iter().enumerate() {
            let a = f2[l][i]
                .as_ref()
                .unwrap()
                .mul(&f1[j].truncate(rc))?;
            let b = f2[l][j]
                .as_ref()
                .unwrap()
                .mul(&f1[i].truncate(rc))?;
            u[l][pi] = Some(a.sub(&b)?);
        }
    }

    // constraint jets per (pair, unknown)
    let ncols = n * (d as usize + 1);
    let mut cjets: Vec<Vec<MultiJet>> = Vec::with_capacity(pairs.len());
    for (pi, &(i, j)) in pairs.iter().enumerate() {
        let mut row = Vec::with_capacity(ncols);
        for l in 0..n {
            for k in 0..=d as usize {
                let mut c = u[l][pi].as_ref().unwrap().mul_monomial(l, k as u32);
                if k >= 1 {
                    let kq = Q::from_integer((k as i64).into());
                    if l == i {
                        let t = v[l][j].as_ref().unwrap().mul_monomial(l, k as u32 - 1);
                        c = c.add(&t.scale(&kq))?;
                    } else if l == j {
                        let t = v[l][i].as_ref().unwrap().mul_monomial(l, k as u32 - 1);
                        c = c.sub(&t.scale(&kq))?;
                    }
                }
                row.push(c);
            }
        }
        cjets.push(row);
    }

    // feed rows by ascending monomial degree, recording dimensions
    let mut ech = Echelon::new(ncols);
    let mut dims_full = Vec::with_capacity(rc as usize + 1);
    let mut monos_by_deg: Vec<Vec<Mono>> = vec![Vec::new(); rc as usize + 1];
    enumerate_monomials(n, rc, &mut |m| {
        monos_by_deg[m.degree() as usize].push(m.clone());
    });
    for deg in 0..=rc as usize {
        for mono in &monos_by_deg[deg] {
            for row_jets in &cjets {
                let mut row = Vec::with_capacity(ncols);
                let mut nonzero = false;
                for jet in row_jets {
                    let c = jet.coeff(mono);
                    if !c.is_zero() {
                        nonzero = true;
                    }
                    row.push(c);
                }
                if nonzero {
                    ech.insert(row);
                }
            }
        }
        // a residual row of order <= deg only touches coefficients of
        // degree <= deg + 1, so the level-deg problem has that many
        // unknowns; rank is unaffected by the phantom higher columns
        let level_cols = n * ((d.min(deg as u32 + 1) as usize) + 1);
        dims_full.push(level_cols - ech.rank());
    }
    let dims_by_order: Vec<usize> = (3..=rc as usize)
        .map(|o| dims_full[o])
        .collect();
    let stabilized = dims_by_order.len() >= 3
        && dims_by_order[dims_by_order.len() - 3..]
            .windows(2)
            .all(|p| p[0] == p[1]);

    // nullspace basis, echelonized with the evaluation block first
    let raw = ech.nullspace();
    let basis = echelonize_basis(raw, n, d as usize, &base);

    // bracket closure of the basis
    let closure = check_closure(&basis, n, w)?;

    Ok(SymmetrySolution {
        basis,
        dims_by_order,
        stabilized,
        order: w,
        degree_cap: d,
        closure,
    })
}

fn enumerate_monomials(n: usize, max_deg: u32, f: &mut impl FnMut(&Mono)) {
    fn rec(e: &mut Vec<u32>, pos: usize, left: u32, f: &mut impl FnMut(&Mono)) {
        if pos == e.len() {
            f(&Mono(e.clone()));
            return;
        }
        for v in 0..=left {
            e[pos] = v;
            rec(e, pos + 1, left - v, f);
            e[pos] = 0;
        }
    }
    let mut e = vec![0u32; n];
    rec(&mut e, 0, max_deg, f);
}

/// Reduces a nullspace basis so that the matrix of base-point values is
/// in echelon form: evaluation columns first, then higher coefficients.
fn echelonize_basis(raw: Vec<Vec<Q>>, n: usize, d: usize, base: &[Q]) -> Vec<DiagonalField> {
    if raw.is_empty() {
        return Vec::new();
    }
    let ncols = n * (d + 1);
    // permutation: evaluation columns (l, 0) first
    let mut perm = Vec::with_capacity(ncols);
    for l in 0..n {
        perm.push(l * (d + 1));
    }
    for l in 0..n {
        for k in 1..=d {
            perm.push(l * (d + 1) + k);
        }
    }
    let rows: Vec<Vec<Q>> = raw
        .iter()
        .map(|v| perm.iter().map(|&c| v[c].clone()).collect())
        .collect();
    let mut mat = Mat::from_rows(rows);
    mat.rref();
    let mut out = Vec::new();
    for r in 0..mat.rows {
        let row = mat.row(r);
        if row.iter().all(|x| x.is_zero()) {
            continue;
        }
        // un-permute
        let mut flat = vec![Q::zero(); ncols];
        for (pc, &oc) in perm.iter().enumerate() {
            flat[oc] = row[pc].clone();
        }
        let components = (0..n)
            .map(|l| {
                let coeffs: Vec<Q> = (0..=d).map(|k| flat[l * (d + 1) + k].clone()).collect();
                UniJet::from_coeffs(base[l].clone(), coeffs)
            })
            .collect();
        out.push(DiagonalField { components });
    }
    out
}

/// Checks that brackets of basis elements stay in the span, first as
/// exact polynomials, then at jet order `W - 3`.
fn check_closure(basis: &[DiagonalField], n: usize, w: u32) -> Result<ClosureStatus, WebError> {
    let m = basis.len();
    if m <= 1 {
        return Ok(ClosureStatus::Trivial);
    }
    let max_len = basis
        .iter()
        .flat_map(|b| b.components.iter().map(|c| c.coeffs.len()))
        .max()
        .unwrap_or(1);

    let flatten = |x: &DiagonalField, len: usize| -> Vec<Q> {
        let mut out = Vec::with_capacity(n * len);
        for c in &x.components {
            for k in 0..len {
                out.push(c.coeffs.get(k).cloned().unwrap_or_else(Q::zero));
            }
        }
        out
    };

    let mut jet_order_needed: Option<u32> = None;
    for i in 0..m {
        for j in i + 1..m {
            let br = basis[i].bracket(&basis[j])?;
            let len = max_len.max(
                br.components
                    .iter()
                    .map(|c| c.coeffs.len())
                    .max()
                    .unwrap_or(1),
            );
            let cols: Vec<Vec<Q>> = basis.iter().map(|b| flatten(b, len)).collect();
            let target = flatten(&br, len);
            let rows: Vec<Vec<Q>> = (0..target.len())
                .map(|r| cols.iter().map(|c| c[r].clone()).collect())
                .collect();
            if Mat::from_rows(rows).solve(&target).is_some() {
                continue;
            }
            // retry at jet order W-3
            let wl = (w - 3) as usize;
            let tr = |x: &DiagonalField| -> Vec<Q> {
                let mut out = Vec::with_capacity(n * (wl + 1));
                for c in &x.components {
                    for k in 0..=wl {
                        out.push(c.coeffs.get(k).cloned().unwrap_or_else(Q::zero));
                    }
                }
                out
            };
            let cols: Vec<Vec<Q>> = basis.iter().map(tr).collect();
            let target = tr(&br);
            let rows: Vec<Vec<Q>> = (0..target.len())
                .map(|r| cols.iter().map(|c| c[r].clone()).collect())
                .collect();
            if Mat::from_rows(rows).solve(&target).is_some() {
                jet_order_needed = Some(w - 3);
            } else {
                return Ok(ClosureStatus::Failed { i, j });
            }
        }
    }
    Ok(match jet_order_needed {
        None => ClosureStatus::Exact,
        Some(o) => ClosureStatus::JetLevel(o),
    })
}

/// Rank of the matrix of component values at the base point: the
/// dimension of the orbit through the base.
pub fn orbit_rank(sol: &SymmetrySolution) -> usize {
    if sol.basis.is_empty() {
        return 0;
    }
    let rows: Vec<Vec<Q>> = sol.basis.iter().map(|b| b.values_at_base()).collect();
    Mat::from_rows(rows).rank()
}

/// Expresses the bracket of two solved fields in the basis; exact first,
/// then truncated to `order`.
pub fn bracket_in_basis(
    basis: &[DiagonalField],
    x: &DiagonalField,
    y: &DiagonalField,
    order: u32,
) -> Result<Option<Vec<Q>>, WebError> {
    let br = x.bracket(y)?;
    let n = x.n();
    let len = basis
        .iter()
        .chain(std::iter::once(&br))
        .flat_map(|b| b.components.iter().map(|c| c.coeffs.len()))
        .max()
        .unwrap_or(1);
    let flat = |z: &DiagonalField, len: usize| -> Vec<Q> {
        let mut out = Vec::with_capacity(n * len);
        for c in &z.components {
            for k in 0..len {
                out.push(c.coeffs.get(k).cloned().unwrap_or_else(Q::zero));
            }
        }
        out
    };
    let cols: Vec<Vec<Q>> = basis.iter().map(|b| flat(b, len)).collect();
    let target = flat(&br, len);
    let rows: Vec<Vec<Q>> = (0..target.len())
        .map(|r| cols.iter().map(|c| c[r].clone()).collect())
        .collect();
    if let Some(sol) = Mat::from_rows(rows).solve(&target) {
        return Ok(Some(sol));
    }
    let wl = order as usize;
    let flat_tr = |z: &DiagonalField| -> Vec<Q> {
        let mut out = Vec::with_capacity(n * (wl + 1));
        for c in &z.components {
            for k in 0..=wl {
                out.push(c.coeffs.get(k).cloned().unwrap_or_else(Q::zero));
            }
        }
        out
    };
    let cols: Vec<Vec<Q>> = basis.iter().map(flat_tr).collect();
    let target = flat_tr(&br);
    let rows: Vec<Vec<Q>> = (0..target.len())
        .map(|r| cols.iter().map(|c| c[r].clone()).collect())
        .collect();
    Ok(Mat::from_rows(rows).solve(&target))
}

// ---------------------------------------------------------------------
// Parallelizability
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParallelizabilityVerdict {
    /// Both tests agree the web is parallelizable to the working order.
    ParallelizableToOrder(u32),
    NotParallelizable,
    /// The two tests disagree; this is an internal-consistency alarm.
    Inconsistent,
}

#[derive(Debug, Clone)]
pub struct ParallelizabilityReport {
    pub verdict: ParallelizabilityVerdict,
    /// Some nonzero symmetry combination vanishes at the base point.
    pub vanishing_combination: bool,
    /// All nonlinear normal-form coefficients vanish to the working order.
    pub normal_form_linear: bool,
    pub solver_dim: usize,
    pub solver_stabilized: bool,
}

/// Runs both parallelizability tests: a vanishing nonzero combination in
/// the solved algebra, and linearity of the computed normal form.
pub fn parallelizability_test(web: &Web) -> Result<ParallelizabilityReport, WebError> {
    let sol = solve_symmetries(web, None)?;
    parallelizability_with(web, &sol)
}

/// Same as [`parallelizability_test`] but reuses a solved algebra.
pub fn parallelizability_with(
    web: &Web,
    sol: &SymmetrySolution,
) -> Result<ParallelizabilityReport, WebError> {
    let rank = orbit_rank(sol);
    let vanishing_combination = sol.dim() > rank;
    let nf = crate::normalform::compute_normal_form(web)
        .map_err(|e| WebError::NormalForm(e.to_string()))?;
    let normal_form_linear = nf.linear_to_order == web.order();
    let verdict = match (vanishing_combination, normal_form_linear) {
        (true, true) => ParallelizabilityVerdict::ParallelizableToOrder(web.order()),
        (false, false) => ParallelizabilityVerdict::NotParallelizable,
        _ => ParallelizabilityVerdict::Inconsistent,
    };
    Ok(ParallelizabilityReport {
        verdict,
        vanishing_combination,
        normal_form_linear,
        solver_dim: sol.dim(),
        solver_stabilized: sol.stabilized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{qi, qr};

    fn web(n: usize, f: &str, base: Vec<i64>, w: u32) -> Web {
        let spec = web_from_text(n, f, base.into_iter().map(qi).collect(), w).unwrap();
        validate_web(&spec).unwrap()
    }

    fn field(web: &Web, polys: &[&[i64]]) -> DiagonalField {
        let ps: Vec<Vec<Q>> = polys
            .iter()
            .map(|p| p.iter().map(|&v| qi(v)).collect())
            .collect();
        DiagonalField::from_absolute_polys(&ps, web.base(), web.order() - 1)
    }

    #[test]
    fn validate_linear_web() {
        let w = web(3, "x1 + x2 + x3", vec![0, 0, 0], 8);
        assert_eq!(w.partials, vec![qi(1), qi(1), qi(1)]);
    }

    #[test]
    fn validate_rejects_vanishing_partial() {
        let spec = web_from_text(3, "x1 + x2*x3", vec![qi(0), qi(0), qi(0)], 8).unwrap();
        match validate_web(&spec).unwrap_err() {
            WebError::VanishingPartial { index } => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validate_three_web_integrand() {
        // denominator at (0,1,2) equals -3
        let w = web(
            3,
            "(x2*x3 + x3*x1 - 2*x1*x2) / (x1 + x2 - 2*x3)",
            vec![0, 1, 2],
            8,
        );
        for p in &w.partials {
            assert!(!p.is_zero());
        }
    }

    #[test]
    fn apply_field_linear() {
        let w = web(3, "x1 + x2 + x3", vec![0, 0, 0], 6);
        let x = field(&w, &[&[1], &[1], &[1]]);
        let xf = apply_field(&x, &w.f_jet).unwrap();
        assert_eq!(xf.constant_term(), qi(3));
        assert_eq!(xf.coeffs().count(), 1);
    }

    #[test]
    fn apply_field_kills_product_integral() {
        // F = d1 + d2 annihilates f = (1 + x2 - x1) exp(x3 + x4)
        let w = web(4, "(1 + x2 - x1) * exp(x3 + x4)", vec![0, 0, 0, 0], 8);
        let x = field(&w, &[&[1], &[1], &[0], &[0]]);
        let xf = apply_field(&x, &w.f_jet).unwrap();
        assert!(xf.is_zero());
    }

    #[test]
    fn symmetry_certificates() {
        let w = web(3, "x1 + x2 + x3", vec![0, 0, 0], 8);
        let x = field(&w, &[&[1], &[1], &[1]]);
        let cert = is_symmetry(&x, &w).unwrap();
        assert!(cert.passed);
        assert!(cert.exact, "bound {:?}", cert.residual_degree_bound);

        // not a symmetry: d2 on f = x1 + x2^2 at base (0, 1)
        let w2 = web(2, "x1 + x2^2", vec![0, 1], 8);
        let bad = field(&w2, &[&[0], &[1]]);
        let cert = is_symmetry(&bad, &w2).unwrap();
        assert!(!cert.passed);
        assert!(cert.first_failure.is_some());
    }

    #[test]
    fn explicit_generators_of_product_web() {
        // F, E, Z3, Z4 on f = (1 + x2 - x1) exp(x3 + x4)
        let w = web(4, "(1 + x2 - x1) * exp(x3 + x4)", vec![0, 0, 0, 0], 8);
        let f = field(&w, &[&[1], &[1], &[0], &[0]]);
        let e = field(&w, &[&[0, 1], &[1, 1], &[0], &[0]]);
        let z3 = field(&w, &[&[0], &[0], &[1], &[0]]);
        let z4 = field(&w, &[&[0], &[0], &[0], &[1]]);
        for (name, x) in [("F", &f), ("E", &e), ("Z3", &z3), ("Z4", &z4)] {
            let cert = is_symmetry(x, &w).unwrap();
            assert!(cert.passed, "{name} fails: {:?}", cert.first_failure);
            assert!(cert.exact, "{name} certificate not exact");
        }
        // phi_F = 0, phi_E = id, phi_Z = id
        let cert_f = is_symmetry(&f, &w).unwrap();
        assert!(cert_f.xf_is_zero && cert_f.xf_zero_exact);
        let phi_e = induced_phi(&e, &w).unwrap();
        assert_eq!(classify_phi(&phi_e), PhiKind::Identity);
        let phi_z = induced_phi(&z3, &w).unwrap();
        assert_eq!(classify_phi(&phi_z), PhiKind::Identity);
    }

    #[test]
    fn induced_phi_constant_one() {
        let w = web(3, "x1 + x2 + x3", vec![0, 0, 0], 8);
        let x = field(&w, &[&[1], &[1], &[1]]);
        let phi = induced_phi(&x, &w).unwrap();
        assert_eq!(classify_phi(&phi), PhiKind::Constant(qi(3)));
        assert_eq!(phi.center, qi(0));
    }

    #[test]
    fn solve_linear_web_dimension_four() {
        let w = web(3, "x1 + x2 + x3", vec![0, 0, 0], 8);
        let sol = solve_symmetries(&w, None).unwrap();
        assert_eq!(sol.dim(), 4);
        assert!(sol.stabilized, "dims {:?}", sol.dims_by_order);
        assert_eq!(sol.closure, ClosureStatus::Exact);
        for b in &sol.basis {
            let cert = is_symmetry(b, &w).unwrap();
            assert!(cert.passed);
        }
        assert_eq!(orbit_rank(&sol), 3);
    }

    #[test]
    fn solve_commutative_pair() {
        // f = x1 + (x2 - x3) + (x2 - x3)^3: dim 2, span {d1, d2 + d3}
        let w = web(3, "x1 + (x2 - x3) + (x2 - x3)^3", vec![0, 0, 0], 8);
        let sol = solve_symmetries(&w, None).unwrap();
        assert_eq!(sol.dim(), 2, "dims {:?}", sol.dims_by_order);
        assert!(sol.stabilized);
        // the span contains d1 and d2 + d3
        let rows: Vec<Vec<Q>> = sol.basis.iter().map(|b| b.values_at_base()).collect();
        let rank = Mat::from_rows(rows).rank();
        assert_eq!(rank, 2);
        for b in &sol.basis {
            // all components constant (translations only)
            assert!(b.degree() == 0, "unexpected degree {}", b.degree());
        }
    }

    #[test]
    fn solve_product_web_dimension_four() {
        let w = web(4, "(1 + x2 - x1) * exp(x3 + x4)", vec![0, 0, 0, 0], 8);
        let sol = solve_symmetries(&w, None).unwrap();
        assert_eq!(sol.dim(), 4, "dims {:?}", sol.dims_by_order);
        assert!(sol.stabilized);
        assert_eq!(orbit_rank(&sol), 4);
    }

    #[test]
    fn degree_cap_is_checked() {
        let w = web(2, "x1 + x2", vec![0, 0], 6);
        assert!(solve_symmetries(&w, Some(9)).is_err());
        assert!(solve_symmetries(&w, Some(3)).is_ok());
    }

    #[test]
    fn phi_square_recognized() {
        let mut sq = UniJet::zero(5, qi(3));
        sq.coeffs[0] = qi(9);
        sq.coeffs[1] = qi(6);
        sq.coeffs[2] = qi(1);
        assert_eq!(classify_phi(&sq), PhiKind::Square);
        assert_eq!(classify_phi(&UniJet::identity(5, qr(3, 4))), PhiKind::Identity);
        assert_eq!(classify_phi(&UniJet::zero(5, qi(0))), PhiKind::Zero);
    }
}
