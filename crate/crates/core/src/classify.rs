//! Structure constants and the direct-product decomposition of a solved
//! symmetry algebra.
//!
//! Two independent routes compute the factor counts (S, N, C):
//!
//! * this module's invariant route: C is the center dimension, the
//!   second derived algebra is the semisimple part (3S dimensions, split
//!   into sl(2) summands), and the derived-modulo-semisimple part
//!   carries one direction per 2-dimensional non-commutative factor;
//! * the constructive route in [`crate::linefields`], which reduces the
//!   component matrix to its block normal form.
//!
//! The two must agree on every input; a disagreement is an
//! internal-consistency alarm, not a recoverable condition.

use crate::linalg::{Echelon, Mat};
use crate::linefields::BracketTable;
use crate::rat::{format_q, Q};
use crate::symmetry::{
    apply_field, bracket_in_basis, classify_phi, induced_phi, DiagonalField, PhiKind,
    SymmetrySolution, Web, WebError,
};
use crate::jets::UniJet;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("bracket of basis elements {i} and {j} is not in the span")]
    NotClosed { i: usize, j: usize },
    #[error("structure constants violate antisymmetry at ({r}, {s})")]
    Antisymmetry { r: usize, s: usize },
    #[error("structure constants violate the Jacobi identity at ({r}, {s}, {t})")]
    Jacobi { r: usize, s: usize, t: usize },
    #[error("not a product of the admissible factor types: {0}")]
    NotProductOfFactors(String),
    #[error("ideal splitting exceeded its search bounds: {0}")]
    SplitSearch(String),
    #[error("more than one sl(2) factor acts transversally")]
    TwoTransverseSl2,
    #[error(transparent)]
    Web(#[from] WebError),
}

/// Structure constants `[X_r, X_s] = sum_u lambda[r][s][u] X_u` of a
/// solved basis, with antisymmetry and Jacobi verified exactly.
#[derive(Debug, Clone)]
pub struct StructureConstants {
    pub m: usize,
    pub table: BracketTable,
    /// Brackets matched the span exactly as polynomials (vs. at jet order).
    pub exact: bool,
}

/// Computes structure constants of a solution basis by exact linear
/// solves on coefficient vectors.
pub fn structure_constants(sol: &SymmetrySolution) -> Result<StructureConstants, ClassifyError> {
    let m = sol.basis.len();
    let mut table = vec![vec![vec![Q::zero(); m]; m]; m];
    let mut exact = true;
    for i in 0..m {
        for j in i + 1..m {
            let x = &sol.basis[i];
            let y = &sol.basis[j];
            let coeffs = match bracket_in_basis(&sol.basis, x, y, sol.order.saturating_sub(3))? {
                Some(c) => c,
                None => return Err(ClassifyError::NotClosed { i, j }),
            };
            // re-check exactness: bracket_in_basis falls back to jets
            let br = x.bracket(y)?;
            let mut recon = zero_field_like(x);
            for (k, c) in coeffs.iter().enumerate() {
                recon = add_scaled(&recon, &sol.basis[k], c);
            }
            if !fields_equal_exact(&recon, &br) {
                exact = false;
            }
            for (u, c) in coeffs.iter().enumerate() {
                table[i][j][u] = c.clone();
                table[j][i][u] = -c.clone();
            }
        }
    }
    verify_table(&table)?;
    Ok(StructureConstants { m, table, exact })
}

/// Builds structure constants directly from a table (for tests and
/// model algebras); verifies antisymmetry and Jacobi.
pub fn structure_constants_from_table(
    table: BracketTable,
) -> Result<StructureConstants, ClassifyError> {
    verify_table(&table)?;
    Ok(StructureConstants {
        m: table.len(),
        table,
        exact: true,
    })
}

fn verify_table(table: &BracketTable) -> Result<(), ClassifyError> {
    let m = table.len();
    for r in 0..m {
        for s in 0..m {
            for u in 0..m {
                if table[r][s][u] != -table[s][r][u].clone() {
                    return Err(ClassifyError::Antisymmetry { r, s });
                }
            }
        }
    }
    for r in 0..m {
        for s in 0..m {
            for t in 0..m {
                for v in 0..m {
                    let mut acc = Q::zero();
                    for u in 0..m {
                        acc = acc
                            + &table[r][s][u] * &table[u][t][v]
                            + &table[s][t][u] * &table[u][r][v]
                            + &table[t][r][u] * &table[u][s][v];
                    }
                    if !acc.is_zero() {
                        return Err(ClassifyError::Jacobi { r, s, t });
                    }
                }
            }
        }
    }
    Ok(())
}

fn zero_field_like(x: &DiagonalField) -> DiagonalField {
    DiagonalField::new(
        x.components
            .iter()
            .map(|c| UniJet::constant(0, c.center.clone(), Q::zero()))
            .collect(),
    )
}

fn add_scaled(a: &DiagonalField, b: &DiagonalField, f: &Q) -> DiagonalField {
    let components = a
        .components
        .iter()
        .zip(&b.components)
        .map(|(ca, cb)| {
            let len = ca.coeffs.len().max(cb.coeffs.len());
            let mut coeffs = vec![Q::zero(); len];
            for (k, slot) in coeffs.iter_mut().enumerate() {
                let va = ca.coeffs.get(k).cloned().unwrap_or_else(Q::zero);
                let vb = cb.coeffs.get(k).cloned().unwrap_or_else(Q::zero);
                *slot = va + f * vb;
            }
            UniJet::from_coeffs(ca.center.clone(), coeffs)
        })
        .collect();
    DiagonalField::new(components)
}

fn fields_equal_exact(a: &DiagonalField, b: &DiagonalField) -> bool {
    a.components.iter().zip(&b.components).all(|(ca, cb)| {
        let len = ca.coeffs.len().max(cb.coeffs.len());
        (0..len).all(|k| {
            ca.coeffs.get(k).cloned().unwrap_or_else(Q::zero)
                == cb.coeffs.get(k).cloned().unwrap_or_else(Q::zero)
        })
    })
}

// ---------------------------------------------------------------------
// Abstract bracket helpers on coefficient vectors
// ---------------------------------------------------------------------

fn bracket_vec(table: &BracketTable, u: &[Q], v: &[Q]) -> Vec<Q> {
    let m = table.len();
    let mut out = vec![Q::zero(); m];
    for r in 0..m {
        if u[r].is_zero() {
            continue;
        }
        for s in 0..m {
            if v[s].is_zero() {
                continue;
            }
            let f = &u[r] * &v[s];
            for (k, t) in table[r][s].iter().enumerate() {
                if !t.is_zero() {
                    out[k] = &out[k] + &f * t;
                }
            }
        }
    }
    out
}

/// Reduced echelon basis of the span of `vecs`.
fn rref_basis(vecs: &[Vec<Q>], _m: usize) -> Vec<Vec<Q>> {
    if vecs.is_empty() {
        return Vec::new();
    }
    let mut mat = Mat::from_rows(vecs.to_vec());
    let pivots = mat.rref();
    (0..pivots.len()).map(|r| mat.row(r).to_vec()).collect()
}

fn derived_span(table: &BracketTable, gens: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let m = table.len();
    let mut all = Vec::new();
    for i in 0..gens.len() {
        for j in i + 1..gens.len() {
            all.push(bracket_vec(table, &gens[i], &gens[j]));
        }
    }
    rref_basis(&all, m)
}

fn center_basis(table: &BracketTable) -> Vec<Vec<Q>> {
    let m = table.len();
    // rows: for each (s, u): sum_r x_r table[r][s][u] = 0
    let mut rows = Vec::with_capacity(m * m);
    for s in 0..m {
        for u in 0..m {
            let row: Vec<Q> = (0..m).map(|r| table[r][s][u].clone()).collect();
            rows.push(row);
        }
    }
    Mat::from_rows(rows).nullspace()
}

// ---------------------------------------------------------------------
// Factor decomposition
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Sl2,
    /// The non-commutative 2-dimensional algebra, generators (F, E)
    /// with [F, E] = F.
    Affine2,
    Abelian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorAction {
    Transverse,
    Tangent,
}

#[derive(Debug, Clone, Serialize)]
pub struct Factor {
    pub kind: FactorKind,
    /// Generator combinations, as coefficient vectors over the solved
    /// basis. sl(2) factors list (F, H, E); 2-dimensional factors list
    /// (F, E); the abelian factor lists a basis of the center.
    pub generators: Vec<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<FactorAction>,
    /// Induced reparametrization classes per generator, when computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_kinds: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorDecomposition {
    pub s: usize,
    pub n: usize,
    pub c: usize,
    pub factors: Vec<Factor>,
    #[serde(skip)]
    pub generators_q: Vec<Vec<Vec<Q>>>,
}

impl FactorDecomposition {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.s, self.n, self.c)
    }
}

/// Decomposes a Jacobi-valid algebra into sl(2) factors, 2-dimensional
/// non-commutative factors and an abelian part, with explicit generator
/// combinations, verifying all cross-brackets and the model relations.
pub fn decompose_factors(sc: &StructureConstants) -> Result<FactorDecomposition, ClassifyError> {
    let m = sc.m;
    let table = &sc.table;
    let full: Vec<Vec<Q>> = (0..m)
        .map(|i| {
            let mut v = vec![Q::zero(); m];
            v[i] = Q::one();
            v
        })
        .collect();

    let center = rref_basis(&center_basis(table), m);
    let c = center.len();
    let d1 = derived_span(table, &full);
    let d2 = derived_span(table, &d1);
    let (dd1, dd2) = (d1.len(), d2.len());
    if dd2 % 3 != 0 {
        return Err(ClassifyError::NotProductOfFactors(format!(
            "second derived algebra has dimension {dd2}, not a multiple of 3"
        )));
    }
    let s = dd2 / 3;
    if dd1 < dd2 {
        return Err(ClassifyError::NotProductOfFactors(
            "derived algebra smaller than its own derived algebra".into(),
        ));
    }
    let n_count = dd1 - dd2;
    if 3 * s + 2 * n_count + c != m {
        return Err(ClassifyError::NotProductOfFactors(format!(
            "3*{s} + 2*{n_count} + {c} != {m}"
        )));
    }

    let mut factors_q: Vec<(FactorKind, Vec<Vec<Q>>)> = Vec::new();

    // sl(2) summands of the second derived algebra
    if s > 0 {
        let summands = split_semisimple(table, &d2)?;
        if summands.len() != s || summands.iter().any(|b| b.len() != 3) {
            return Err(ClassifyError::NotProductOfFactors(format!(
                "semisimple part split into {} pieces of sizes {:?}",
                summands.len(),
                summands.iter().map(|b| b.len()).collect::<Vec<_>>()
            )));
        }
        for summand in summands {
            let triple = chevalley_triple(table, &summand)?;
            factors_q.push((FactorKind::Sl2, triple));
        }
    }

    // 2-dimensional factors from the derived algebra modulo the
    // semisimple part
    if n_count > 0 {
        let pairs = affine_pairs(table, &full, &d1, &d2, n_count)?;
        for p in pairs {
            factors_q.push((FactorKind::Affine2, p));
        }
    }

    if c > 0 {
        factors_q.push((FactorKind::Abelian, center.clone()));
    }

    // global verification: the combined generator rows must be an
    // invertible change of basis whose conjugated table is the exact
    // block-diagonal model
    let mut rows = Vec::with_capacity(m);
    for (_, gens) in &factors_q {
        rows.extend(gens.iter().cloned());
    }
    let t = Mat::from_rows(rows);
    if t.rows != m {
        return Err(ClassifyError::NotProductOfFactors(format!(
            "factor generators span {} of {} dimensions",
            t.rows, m
        )));
    }
    let conj = conjugated_table(&t, table).ok_or_else(|| {
        ClassifyError::NotProductOfFactors("factor generators are dependent".into())
    })?;
    let model = model_table(s, n_count, c);
    if conj != model {
        let mut diffs = Vec::new();
        for a in 0..m {
            for b in 0..m {
                for v in 0..m {
                    if conj[a][b][v] != model[a][b][v] {
                        diffs.push(format!(
                            "[{a},{b}]_{v}: {} vs {}",
                            format_q(&conj[a][b][v]),
                            format_q(&model[a][b][v])
                        ));
                    }
                }
            }
        }
        return Err(ClassifyError::NotProductOfFactors(format!(
            "cross-brackets or intra-factor brackets deviate from the model: {}",
            diffs.join("; ")
        )));
    }

    let factors = factors_q
        .iter()
        .map(|(kind, gens)| Factor {
            kind: *kind,
            generators: gens
                .iter()
                .map(|g| g.iter().map(format_q).collect())
                .collect(),
            action: None,
            phi_kinds: None,
        })
        .collect();
    Ok(FactorDecomposition {
        s,
        n: n_count,
        c,
        factors,
        generators_q: factors_q.into_iter().map(|(_, g)| g).collect(),
    })
}

/// The model table: sl(2) triples, then (F, E) pairs, then central
/// generators, all cross-brackets zero.
pub fn model_table(s: usize, n: usize, c: usize) -> BracketTable {
    let m = 3 * s + 2 * n + c;
    let mut t = vec![vec![vec![Q::zero(); m]; m]; m];
    let two = Q::from_integer(2.into());
    let mut idx = 0;
    for _ in 0..s {
        let (f, h, e) = (idx, idx + 1, idx + 2);
        t[f][h][f] = Q::one();
        t[h][f][f] = -Q::one();
        t[h][e][e] = Q::one();
        t[e][h][e] = -Q::one();
        t[f][e][h] = two.clone();
        t[e][f][h] = -two.clone();
        idx += 3;
    }
    for _ in 0..n {
        let (f, e) = (idx, idx + 1);
        t[f][e][f] = Q::one();
        t[e][f][f] = -Q::one();
        idx += 2;
    }
    t
}

/// `lambda'[a][b][v] = sum T[a][r] T[b][s] lambda[r][s][u] Tinv[u][v]`;
/// `None` when `t` is singular.
pub fn conjugated_table(t: &Mat, table: &BracketTable) -> Option<BracketTable> {
    let m = table.len();
    let tinv = t.inverse()?;
    let mut out = vec![vec![vec![Q::zero(); m]; m]; m];
    for a in 0..m {
        for b in 0..m {
            let mut acc = vec![Q::zero(); m];
            for r in 0..m {
                if t[(a, r)].is_zero() {
                    continue;
                }
                for s in 0..m {
                    if t[(b, s)].is_zero() {
                        continue;
                    }
                    let f = &t[(a, r)] * &t[(b, s)];
                    for (u, l) in table[r][s].iter().enumerate() {
                        if !l.is_zero() {
                            acc[u] = &acc[u] + &f * l;
                        }
                    }
                }
            }
            for v in 0..m {
                let mut x = Q::zero();
                for (u, l) in acc.iter().enumerate() {
                    if !l.is_zero() {
                        x = x + l * &tinv[(u, v)];
                    }
                }
                out[a][b][v] = x;
            }
        }
    }
    Some(out)
}

// ---------------------------------------------------------------------
// Semisimple splitting via the enveloping associative algebra
// ---------------------------------------------------------------------

/// Splits the semisimple subspace (given by an echelon basis of ambient
/// coefficient vectors) into its minimal ideals.
fn split_semisimple(
    table: &BracketTable,
    d2: &[Vec<Q>],
) -> Result<Vec<Vec<Vec<Q>>>, ClassifyError> {
    let dim = d2.len();
    if dim == 3 {
        return Ok(vec![d2.to_vec()]);
    }
    // coordinates inside the subspace: v = sum coords[k] d2[k]
    let coords = |v: &[Q]| -> Option<Vec<Q>> { express_in(d2, v) };
    // adjoint matrices of the basis, restricted to the subspace
    let mut ad = Vec::with_capacity(dim);
    for b in d2 {
        let mut mat = Mat::zero(dim, dim);
        for (j, bj) in d2.iter().enumerate() {
            let br = bracket_vec(table, b, bj);
            let cs = coords(&br).ok_or_else(|| {
                ClassifyError::NotProductOfFactors(
                    "second derived algebra is not bracket-stable".into(),
                )
            })?;
            for (i, v) in cs.into_iter().enumerate() {
                mat[(i, j)] = v;
            }
        }
        ad.push(mat);
    }
    let assoc = associative_closure(&ad, dim);
    let centre = matrix_algebra_center(&assoc, dim);
    let projections = primitive_idempotents(&centre, dim)?;
    let mut out = Vec::new();
    for p in &projections {
        // image of the projection, in subspace coordinates
        let cols: Vec<Vec<Q>> = (0..dim)
            .map(|j| (0..dim).map(|i| p[(i, j)].clone()).collect())
            .collect();
        let img = rref_basis(&cols, dim);
        // back to ambient coordinates
        let mut amb = Vec::with_capacity(img.len());
        for v in img {
            let mut w = vec![Q::zero(); d2[0].len()];
            for (k, c) in v.iter().enumerate() {
                if !c.is_zero() {
                    for (slot, dv) in w.iter_mut().zip(&d2[k]) {
                        *slot = &*slot + c * dv;
                    }
                }
            }
            amb.push(w);
        }
        out.push(rref_basis(&amb, d2[0].len()));
    }
    Ok(out)
}

/// Expresses `v` in the span of `basis` (vectors of equal length).
fn express_in(basis: &[Vec<Q>], v: &[Q]) -> Option<Vec<Q>> {
    let rows: Vec<Vec<Q>> = (0..v.len())
        .map(|r| basis.iter().map(|b| b[r].clone()).collect())
        .collect();
    Mat::from_rows(rows).solve(v)
}

/// Basis of the associative algebra generated by `gens` and the
/// identity, inside End of a `dim`-dimensional space.
fn associative_closure(gens: &[Mat], dim: usize) -> Vec<Mat> {
    let flat = |m: &Mat| -> Vec<Q> { m.data.clone() };
    let mut ech = Echelon::new(dim * dim);
    let mut basis: Vec<Mat> = Vec::new();
    let push = |m: Mat, ech: &mut Echelon, basis: &mut Vec<Mat>| {
        if ech.insert(flat(&m)) {
            basis.push(m);
        }
    };
    push(Mat::identity(dim), &mut ech, &mut basis);
    for g in gens {
        push(g.clone(), &mut ech, &mut basis);
    }
    loop {
        let len = basis.len();
        let snapshot = basis.clone();
        for a in &snapshot {
            for b in &snapshot {
                push(a.mul(b), &mut ech, &mut basis);
            }
        }
        if basis.len() == len {
            return basis;
        }
    }
}

/// Center of a matrix algebra given by a basis: elements of the span
/// commuting with every basis matrix.
fn matrix_algebra_center(basis: &[Mat], dim: usize) -> Vec<Mat> {
    let k = basis.len();
    // unknowns: coefficients over the basis; rows: entries of [Z, B_i]
    let mut rows = Vec::new();
    for b in basis {
        for r in 0..dim {
            for c in 0..dim {
                let mut row = Vec::with_capacity(k);
                for z in basis {
                    let zb = z.mul(b);
                    let bz = b.mul(z);
                    row.push(&zb[(r, c)] - &bz[(r, c)]);
                }
                rows.push(row);
            }
        }
    }
    let ns = Mat::from_rows(rows).nullspace();
    ns.into_iter()
        .map(|cs| {
            let mut z = Mat::zero(dim, dim);
            for (i, c) in cs.iter().enumerate() {
                if !c.is_zero() {
                    for r in 0..dim {
                        for col in 0..dim {
                            let v = &z[(r, col)] + c * &basis[i][(r, col)];
                            z[(r, col)] = v;
                        }
                    }
                }
            }
            z
        })
        .collect()
}

/// Primitive idempotents of a commutative semisimple split matrix
/// algebra given by a center basis. Uses the minimal polynomial of a
/// generic element; its roots are rational by splitness.
fn primitive_idempotents(centre: &[Mat], dim: usize) -> Result<Vec<Mat>, ClassifyError> {
    let k = centre.len();
    if k == 1 {
        // one block: the identity is the only idempotent
        return Ok(vec![Mat::identity(dim)]);
    }
    for t in 1..=(4 * k as i64) {
        // z = sum t^i centre[i]
        let mut z = Mat::zero(dim, dim);
        let mut w = Q::one();
        for c in centre {
            for r in 0..dim {
                for cc in 0..dim {
                    let v = &z[(r, cc)] + &w * &c[(r, cc)];
                    z[(r, cc)] = v;
                }
            }
            w = w * Q::from_integer(t.into());
        }
        let Some(minpoly) = minimal_polynomial(&z, dim) else {
            continue;
        };
        if minpoly.len() != k + 1 {
            continue; // eigenvalue collision; try the next weight
        }
        let Some(roots) = rational_roots(&minpoly)? else {
            continue;
        };
        if roots.len() != k {
            continue;
        }
        // Lagrange idempotents pi_i = prod_{j != i} (z - r_j) / (r_i - r_j)
        let mut out = Vec::with_capacity(k);
        for i in 0..k {
            let mut p = Mat::identity(dim);
            for (j, rj) in roots.iter().enumerate() {
                if j == i {
                    continue;
                }
                let mut factor = z.clone();
                for d in 0..dim {
                    let v = &factor[(d, d)] - rj;
                    factor[(d, d)] = v;
                }
                let denom = &roots[i] - rj;
                p = p.mul(&factor);
                let scale = denom.recip();
                for val in p.data.iter_mut() {
                    *val = &*val * &scale;
                }
            }
            out.push(p);
        }
        return Ok(out);
    }
    Err(ClassifyError::SplitSearch(
        "no splitting element found in the center".into(),
    ))
}

/// Coefficients (constant first) of the monic minimal polynomial of `z`.
fn minimal_polynomial(z: &Mat, dim: usize) -> Option<Vec<Q>> {
    let mut ech = Echelon::new(dim * dim);
    let mut powers: Vec<Mat> = vec![Mat::identity(dim)];
    ech.insert(powers[0].data.clone());
    loop {
        let next = powers.last().unwrap().mul(z);
        if !ech.insert(next.data.clone()) {
            // next = combination of lower powers: solve for it
            let rows: Vec<Vec<Q>> = (0..dim * dim)
                .map(|r| powers.iter().map(|p| p.data[r].clone()).collect())
                .collect();
            let sol = Mat::from_rows(rows).solve(&next.data)?;
            // minpoly = x^d - sum sol_i x^i
            let mut coeffs: Vec<Q> = sol.into_iter().map(|c| -c).collect();
            coeffs.push(Q::one());
            return Some(coeffs);
        }
        powers.push(next);
        if powers.len() > dim * dim + 1 {
            return None;
        }
    }
}

/// All roots of a squarefree rational polynomial known to split over the
/// rationals. Returns `Ok(None)` if splitness fails within bounds.
fn rational_roots(coeffs: &[Q]) -> Result<Option<Vec<Q>>, ClassifyError> {
    let deg = coeffs.len() - 1;
    match deg {
        0 => Ok(Some(vec![])),
        1 => {
            // c0 + c1 x = 0
            Ok(Some(vec![-&coeffs[0] / &coeffs[1]]))
        }
        2 => {
            let (c, b, a) = (&coeffs[0], &coeffs[1], &coeffs[2]);
            let disc = b * b - Q::from_integer(4.into()) * a * c;
            let Some(sq) = rational_sqrt(&disc) else {
                return Ok(None);
            };
            let two_a = Q::from_integer(2.into()) * a;
            Ok(Some(vec![(-b + &sq) / &two_a, (-b - &sq) / &two_a]))
        }
        _ => {
            // root search via small candidates; enough for the factor
            // counts that can actually occur here
            let mut remaining = coeffs.to_vec();
            let mut roots = Vec::new();
            'outer: while remaining.len() > 3 {
                for num in -64i64..=64 {
                    for den in 1i64..=16 {
                        let cand = Q::new(num.into(), den.into());
                        if eval_poly(&remaining, &cand).is_zero() {
                            roots.push(cand.clone());
                            remaining = deflate(&remaining, &cand);
                            continue 'outer;
                        }
                    }
                }
                return Err(ClassifyError::SplitSearch(format!(
                    "no rational root of a degree-{} center polynomial in range",
                    remaining.len() - 1
                )));
            }
            match rational_roots(&remaining)? {
                Some(rest) => {
                    roots.extend(rest);
                    Ok(Some(roots))
                }
                None => Ok(None),
            }
        }
    }
}

fn eval_poly(coeffs: &[Q], x: &Q) -> Q {
    let mut acc = Q::zero();
    for c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

fn deflate(coeffs: &[Q], root: &Q) -> Vec<Q> {
    // synthetic division by (x - root)
    let mut out = vec![Q::zero(); coeffs.len() - 1];
    let mut carry = Q::zero();
    for k in (1..coeffs.len()).rev() {
        let v = &coeffs[k] + &carry;
        out[k - 1] = v.clone();
        carry = v * root;
    }
    out
}

/// Exact square root of a nonnegative rational, if it is a perfect
/// square.
fn rational_sqrt(q: &Q) -> Option<Q> {
    if q.is_negative() {
        return None;
    }
    let ns = q.numer().sqrt();
    let ds = q.denom().sqrt();
    if &(&ns * &ns) == q.numer() && &(&ds * &ds) == q.denom() {
        Some(Q::new(ns, ds))
    } else {
        None
    }
}

/// Finds a Chevalley-style triple (F, H, E) in a 3-dimensional simple
/// summand given by ambient coefficient vectors.
fn chevalley_triple(
    table: &BracketTable,
    summand: &[Vec<Q>],
) -> Result<Vec<Vec<Q>>, ClassifyError> {
    let amb = summand[0].len();
    let coords = |v: &[Q]| express_in(summand, v);
    // local 3x3 bracket table
    let mut local = vec![vec![vec![Q::zero(); 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                continue;
            }
            let br = bracket_vec(table, &summand[i], &summand[j]);
            local[i][j] = coords(&br).ok_or_else(|| {
                ClassifyError::NotProductOfFactors("summand is not bracket-stable".into())
            })?;
        }
    }
    let lb = |u: &[Q], v: &[Q]| bracket_vec(&local, u, v);
    let ad_matrix = |x: &[Q]| -> Mat {
        let mut m = Mat::zero(3, 3);
        for j in 0..3 {
            let mut ej = vec![Q::zero(); 3];
            ej[j] = Q::one();
            let col = lb(x, &ej);
            for i in 0..3 {
                m[(i, j)] = col[i].clone();
            }
        }
        m
    };
    // nilpotent search: ad(x)^3 = 0, x != 0, over a small grid
    let mut nilpotent: Option<Vec<Q>> = None;
    'grid: for range in [2i64, 5, 9] {
        for a in -range..=range {
            for b in -range..=range {
                for c in -range..=range {
                    if a == 0 && b == 0 && c == 0 {
                        continue;
                    }
                    let x = vec![
                        Q::from_integer(a.into()),
                        Q::from_integer(b.into()),
                        Q::from_integer(c.into()),
                    ];
                    let ad = ad_matrix(&x);
                    let ad3 = ad.mul(&ad).mul(&ad);
                    if ad3.data.iter().all(|v| v.is_zero())
                        && !ad.data.iter().all(|v| v.is_zero())
                    {
                        nilpotent = Some(x);
                        break 'grid;
                    }
                }
            }
        }
    }
    let e = nilpotent.ok_or_else(|| {
        ClassifyError::SplitSearch("no rational nilpotent found in an sl(2) summand".into())
    })?;

    // solve [H, E] = E and [F, E] = 2H in local coordinates
    let lin_rows: Vec<Vec<Q>> = (0..3)
        .map(|k| {
            (0..3)
                .map(|r| {
                    let mut er = vec![Q::zero(); 3];
                    er[r] = Q::one();
                    lb(&er, &e)[k].clone()
                })
                .collect()
        })
        .collect();
    let h = Mat::from_rows(lin_rows.clone())
        .solve(&e)
        .ok_or_else(|| ClassifyError::NotProductOfFactors("no H with [H,E] = E".into()))?;
    let rhs2: Vec<Q> = h.iter().map(|x| x * Q::from_integer(2.into())).collect();
    let f0 = Mat::from_rows(lin_rows)
        .solve(&rhs2)
        .ok_or_else(|| ClassifyError::NotProductOfFactors("no F with [F,E] = 2H".into()))?;
    // [F0 + mu E, H] = F0 + mu E  requires  [F0, H] - F0 = 2 mu E
    let mut wv = lb(&f0, &h);
    for k in 0..3 {
        wv[k] = &wv[k] - &f0[k];
    }
    let pivot = e
        .iter()
        .position(|x| !x.is_zero())
        .expect("nilpotent is nonzero");
    let mu = &wv[pivot] / (&e[pivot] * Q::from_integer(2.into()));
    for k in 0..3 {
        if wv[k] != &mu * &e[k] * Q::from_integer(2.into()) {
            return Err(ClassifyError::NotProductOfFactors(
                "summand carries no Chevalley triple".into(),
            ));
        }
    }
    let f: Vec<Q> = f0.iter().zip(&e).map(|(x, y)| x + &mu * y).collect();

    // back to ambient coordinates, rows (F, H, E)
    let lift = |v: &[Q]| -> Vec<Q> {
        let mut out = vec![Q::zero(); amb];
        for (k, c) in v.iter().enumerate() {
            if !c.is_zero() {
                for (slot, sv) in out.iter_mut().zip(&summand[k]) {
                    *slot = &*slot + c * sv;
                }
            }
        }
        out
    };
    Ok(vec![lift(&f), lift(&h), lift(&e)])
}

/// Extracts the (F, E) pairs of the 2-dimensional non-commutative
/// factors: F spans an eigen-direction of the action on derived mod
/// semisimple, corrected to commute with the semisimple part; E is a
/// normalizing element with [F, E] = F commuting with everything else.
fn affine_pairs(
    table: &BracketTable,
    full: &[Vec<Q>],
    d1: &[Vec<Q>],
    d2: &[Vec<Q>],
    n_count: usize,
) -> Result<Vec<Vec<Vec<Q>>>, ClassifyError> {
    let m = table.len();
    // complement representatives of d2 inside d1
    let mut ech = Echelon::new(m);
    for v in d2 {
        ech.insert(v.clone());
    }
    let mut comp: Vec<Vec<Q>> = Vec::new();
    for v in d1 {
        let before = ech.rank();
        ech.insert(v.clone());
        if ech.rank() > before {
            comp.push(v.clone());
        }
    }
    if comp.len() != n_count {
        return Err(ClassifyError::NotProductOfFactors(format!(
            "derived/semisimple complement has dimension {}, expected {n_count}",
            comp.len()
        )));
    }
    // combined basis for quotient coordinates
    let combined: Vec<Vec<Q>> = d2.iter().chain(comp.iter()).cloned().collect();
    let quotient_pi = |v: &[Q]| -> Result<Vec<Q>, ClassifyError> {
        let cs = express_in(&combined, v).ok_or_else(|| {
            ClassifyError::NotProductOfFactors("derived algebra is not an ideal".into())
        })?;
        Ok(cs[d2.len()..].to_vec())
    };
    // action of the full basis on the quotient (commuting matrices)
    let mut action = Vec::with_capacity(m);
    for b in full {
        let mut mat = Mat::zero(n_count, n_count);
        for (j, cj) in comp.iter().enumerate() {
            let br = bracket_vec(table, b, cj);
            let qc = quotient_pi(&br)?;
            for (i, v) in qc.into_iter().enumerate() {
                mat[(i, j)] = v;
            }
        }
        action.push(mat);
    }
    let assoc = associative_closure(&action, n_count);
    let centre = matrix_algebra_center(&assoc, n_count);
    // the action algebra must itself be commutative here
    if centre.len() != assoc.len() {
        return Err(ClassifyError::NotProductOfFactors(
            "quotient action is not commutative".into(),
        ));
    }
    let projections = primitive_idempotents(&centre, n_count)?;
    if projections.len() != n_count {
        return Err(ClassifyError::NotProductOfFactors(format!(
            "quotient action splits into {} characters, expected {n_count}",
            projections.len()
        )));
    }
    let mut pairs = Vec::with_capacity(n_count);
    let mut f_dirs: Vec<Vec<Q>> = Vec::with_capacity(n_count);
    for p in &projections {
        // image of the projection: one quotient direction
        let cols: Vec<Vec<Q>> = (0..n_count)
            .map(|j| (0..n_count).map(|i| p[(i, j)].clone()).collect())
            .collect();
        let img = rref_basis(&cols, n_count);
        if img.len() != 1 {
            return Err(ClassifyError::NotProductOfFactors(
                "quotient projection image is not one-dimensional".into(),
            ));
        }
        // lift to d1: comp-combination
        let mut lift = vec![Q::zero(); m];
        for (k, c) in img[0].iter().enumerate() {
            if !c.is_zero() {
                for (slot, cv) in lift.iter_mut().zip(&comp[k]) {
                    *slot = &*slot + c * cv;
                }
            }
        }
        // correct by a d2 part so that F commutes with the semisimple part
        let fvec = if d2.is_empty() {
            lift
        } else {
            correct_f(table, &lift, d2)?
        };
        f_dirs.push(fvec);
    }
    for (j, fvec) in f_dirs.iter().enumerate() {
        // solve [F, x] = F with x commuting with d2 and the other F's
        let mut rows: Vec<Vec<Q>> = Vec::new();
        let mut rhs: Vec<Q> = Vec::new();
        let basis_bracket: Vec<Vec<Q>> = full
            .iter()
            .map(|b| bracket_vec(table, fvec, b))
            .collect();
        for k in 0..m {
            rows.push((0..m).map(|r| basis_bracket[r][k].clone()).collect());
            rhs.push(fvec[k].clone());
        }
        for v in d2.iter().chain(f_dirs.iter().enumerate().filter_map(|(i, f)| {
            if i != j {
                Some(f)
            } else {
                None
            }
        })) {
            let vb: Vec<Vec<Q>> = full.iter().map(|b| bracket_vec(table, b, v)).collect();
            for k in 0..m {
                rows.push((0..m).map(|r| vb[r][k].clone()).collect());
                rhs.push(Q::zero());
            }
        }
        let evec = Mat::from_rows(rows).solve(&rhs).ok_or_else(|| {
            ClassifyError::NotProductOfFactors("no normalizing element for a 2-dim factor".into())
        })?;
        pairs.push(vec![fvec.clone(), evec]);
    }
    // the E solves are each unique only up to other factors' F
    // directions; the contamination is visible in the cross-brackets
    // [E_i, E_j] = -b_i F_i + b_j F_j and removed here
    for i in 0..n_count {
        for j in i + 1..n_count {
            let (ei, ej) = (pairs[i][1].clone(), pairs[j][1].clone());
            let br = bracket_vec(table, &ei, &ej);
            if br.iter().all(|v| v.is_zero()) {
                continue;
            }
            let cs = express_in(&f_dirs, &br).ok_or_else(|| {
                ClassifyError::NotProductOfFactors(
                    "cross-bracket of 2-dim factors leaves the F span".into(),
                )
            })?;
            // br = -beta_j_at_i F_i + beta_i_at_j F_j
            for (k, slot) in pairs[j][1].iter_mut().enumerate() {
                *slot = &*slot + &cs[i] * &f_dirs[i][k];
            }
            for (k, slot) in pairs[i][1].iter_mut().enumerate() {
                *slot = &*slot - &cs[j] * &f_dirs[j][k];
            }
        }
    }
    Ok(pairs)
}

/// Adjusts `lift` by an element of the semisimple part so that the
/// result commutes with it.
fn correct_f(
    table: &BracketTable,
    lift: &[Q],
    d2: &[Vec<Q>],
) -> Result<Vec<Q>, ClassifyError> {
    let m = table.len();
    // unknowns: coefficients over d2; equations: [lift + sum c_k d2_k, v] = 0
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for v in d2 {
        let base = bracket_vec(table, lift, v);
        let cols: Vec<Vec<Q>> = d2.iter().map(|dk| bracket_vec(table, dk, v)).collect();
        for k in 0..m {
            rows.push(cols.iter().map(|c| c[k].clone()).collect());
            rhs.push(-base[k].clone());
        }
    }
    let cs = Mat::from_rows(rows)
        .solve(&rhs)
        .ok_or_else(|| ClassifyError::NotProductOfFactors("2-dim factor direction cannot be made to commute with the semisimple part".into()))?;
    let mut out = lift.to_vec();
    for (k, c) in cs.iter().enumerate() {
        if !c.is_zero() {
            for (slot, dv) in out.iter_mut().zip(&d2[k]) {
                *slot = &*slot + c * dv;
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// Theorem bound and action profiles
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: i64,
    pub rhs: i64,
    pub pass: bool,
    /// Informational checks are reported but do not fail the bound.
    pub enforced: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub holds: bool,
    pub checks: Vec<BoundCheck>,
}

/// Evaluates the dimension constraints of a non-parallelizable web's
/// factor decomposition: `3S + 2N + C <= n`; a commutative algebra must
/// have `C < n`; with more than one sl(2) factor, `n >= 4S + 2N + C - 1`
/// (also evaluated informationally otherwise).
pub fn check_theorem_bound(d: &FactorDecomposition, n: usize) -> BoundReport {
    let (s, nn, c) = d.counts();
    let (s, nn, c, n) = (s as i64, nn as i64, c as i64, n as i64);
    let mut checks = Vec::new();
    checks.push(BoundCheck {
        name: "3S + 2N + C <= n".into(),
        lhs: 3 * s + 2 * nn + c,
        rhs: n,
        pass: 3 * s + 2 * nn + c <= n,
        enforced: true,
    });
    if s == 0 && nn == 0 {
        checks.push(BoundCheck {
            name: "commutative: C < n".into(),
            lhs: c,
            rhs: n,
            pass: c < n,
            enforced: true,
        });
    }
    checks.push(BoundCheck {
        name: "n >= 4S + 2N + C - 1".into(),
        lhs: n,
        rhs: 4 * s + 2 * nn + c - 1,
        pass: n >= 4 * s + 2 * nn + c - 1,
        enforced: s > 1,
    });
    let holds = checks.iter().all(|c| c.pass || !c.enforced);
    BoundReport { holds, checks }
}

/// Computes, for every factor, whether its orbits are transverse to the
/// level hypersurfaces of the integral (some generator moves `f`) or
/// tangent (all induced reparametrizations vanish). At most one sl(2)
/// factor may be transverse.
pub fn factor_action_profile(
    d: &mut FactorDecomposition,
    sol: &SymmetrySolution,
    web: &Web,
) -> Result<(), ClassifyError> {
    let mut transverse_sl2 = 0;
    for (fi, gens) in d.generators_q.clone().iter().enumerate() {
        let mut tangent = true;
        let mut kinds = Vec::with_capacity(gens.len());
        for combo in gens {
            let field = combo_field(&sol.basis, combo);
            let xf = apply_field(&field, &web.f_jet)?;
            if xf.is_zero() {
                kinds.push("zero".to_string());
                continue;
            }
            tangent = false;
            match induced_phi(&field, web) {
                Ok(phi) => kinds.push(phi_kind_name(&classify_phi(&phi))),
                Err(_) => kinds.push("unresolved".to_string()),
            }
        }
        let action = if tangent {
            FactorAction::Tangent
        } else {
            FactorAction::Transverse
        };
        if d.factors[fi].kind == FactorKind::Sl2 && action == FactorAction::Transverse {
            transverse_sl2 += 1;
        }
        d.factors[fi].action = Some(action);
        d.factors[fi].phi_kinds = Some(kinds);
    }
    if transverse_sl2 > 1 {
        return Err(ClassifyError::TwoTransverseSl2);
    }
    Ok(())
}

fn phi_kind_name(k: &PhiKind) -> String {
    k.to_string()
}

/// Linear combination of basis fields.
pub fn combo_field(basis: &[DiagonalField], coeffs: &[Q]) -> DiagonalField {
    let mut acc = DiagonalField::new(
        basis[0]
            .components
            .iter()
            .map(|c| UniJet::constant(0, c.center.clone(), Q::zero()))
            .collect(),
    );
    for (b, c) in basis.iter().zip(coeffs) {
        if !c.is_zero() {
            acc = add_scaled(&acc, b, c);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::qi;
    use crate::symmetry::{solve_symmetries, validate_web, web_from_text};

    fn model_sc(s: usize, n: usize, c: usize) -> StructureConstants {
        structure_constants_from_table(model_table(s, n, c)).unwrap()
    }

    #[test]
    fn model_tables_are_jacobi_valid() {
        for s in 0..=2 {
            for n in 0..=2 {
                for c in 0..=2 {
                    if 3 * s + 2 * n + c == 0 || 3 * s + 2 * n + c > 6 {
                        continue;
                    }
                    model_sc(s, n, c);
                }
            }
        }
    }

    #[test]
    fn decompose_models_up_to_dimension_six() {
        for s in 0..=2 {
            for n in 0..=3 {
                for c in 0..=6 {
                    let m = 3 * s + 2 * n + c;
                    if m == 0 || m > 6 {
                        continue;
                    }
                    let sc = model_sc(s, n, c);
                    let d = decompose_factors(&sc).unwrap();
                    assert_eq!(d.counts(), (s, n, c), "model ({s},{n},{c})");
                }
            }
        }
    }

    #[test]
    fn decompose_scrambled_models() {
        // conjugate the model by a fixed invertible matrix and recover
        for (s, n, c) in [(1, 0, 0), (1, 1, 1), (2, 0, 0), (0, 2, 1), (1, 0, 2)] {
            let m = 3 * s + 2 * n + c;
            let model = model_table(s, n, c);
            // deterministic unipotent-ish scramble
            let mut t = Mat::identity(m);
            for i in 0..m {
                for j in 0..m {
                    if i < j {
                        t[(i, j)] = qi(((i + 2 * j) % 3) as i64 - 1);
                    }
                }
            }
            let scrambled = conjugated_table(&t, &model).unwrap();
            let sc = structure_constants_from_table(scrambled).unwrap();
            let d = decompose_factors(&sc)
                .unwrap_or_else(|e| panic!("scrambled ({s},{n},{c}): {e}"));
            assert_eq!(d.counts(), (s, n, c), "scrambled ({s},{n},{c})");
        }
    }

    #[test]
    fn decompose_rejects_translation_homothety_algebra() {
        // translations + homothety: [F_i, H] = F_i; derived = R^n,
        // second derived = 0, center = 0: 2n + 0 != n + 1 for n != 1
        let n = 3;
        let m = n + 1;
        let mut table = vec![vec![vec![Q::zero(); m]; m]; m];
        for i in 0..n {
            table[i][n][i] = qi(1);
            table[n][i][i] = qi(-1);
        }
        let sc = structure_constants_from_table(table).unwrap();
        assert!(matches!(
            decompose_factors(&sc).unwrap_err(),
            ClassifyError::NotProductOfFactors(_)
        ));
    }

    #[test]
    fn bound_checks() {
        let d = |s, n, c| FactorDecomposition {
            s,
            n,
            c,
            factors: vec![],
            generators_q: vec![],
        };
        assert!(check_theorem_bound(&d(1, 0, 0), 3).holds);
        assert!(!check_theorem_bound(&d(0, 0, 3), 3).holds);
        assert!(check_theorem_bound(&d(0, 1, 2), 4).holds);
        // two sl(2) factors need n >= 4S - 1 = 7
        assert!(check_theorem_bound(&d(2, 0, 0), 7).holds);
        assert!(!check_theorem_bound(&d(2, 0, 0), 6).holds);
    }

    #[test]
    fn structure_constants_of_solved_product_web() {
        let spec = web_from_text(
            4,
            "(1 + x2 - x1) * exp(x3 + x4)",
            vec![qi(0); 4],
            8,
        )
        .unwrap();
        let web = validate_web(&spec).unwrap();
        let sol = solve_symmetries(&web, None).unwrap();
        assert_eq!(sol.dim(), 4);
        let sc = structure_constants(&sol).unwrap();
        let mut d = decompose_factors(&sc).unwrap();
        assert_eq!(d.counts(), (0, 1, 2));
        factor_action_profile(&mut d, &sol, &web).unwrap();
        // the 2-dim factor is transverse: phi_F = 0, phi_E = identity
        let aff = d
            .factors
            .iter()
            .find(|f| f.kind == FactorKind::Affine2)
            .unwrap();
        assert_eq!(aff.action, Some(FactorAction::Transverse));
    }

    #[test]
    fn rational_sqrt_and_roots() {
        assert_eq!(rational_sqrt(&Q::new(9.into(), 4.into())), Some(Q::new(3.into(), 2.into())));
        assert_eq!(rational_sqrt(&qi(2)), None);
        let p = vec![qi(6), qi(-5), qi(1)]; // (x-2)(x-3)
        let roots = rational_roots(&p).unwrap().unwrap();
        assert_eq!(roots.len(), 2);
        assert!(roots.contains(&qi(2)) && roots.contains(&qi(3)));
    }
}
