//! Lie calculus of vector fields on a line, and the block reduction of
//! component matrices.
//!
//! A field `g(t) d/dt` is stored by its coefficient jet. The bracket is
//! `[g, h] = g h' - h g'`. Finite-dimensional bracket-closed spans of
//! such fields have dimension at most 3, and when some field does not
//! vanish at the base point a coordinate change turns the span into a
//! subspace of `{1, t, t^2}`. [`reduce_line_algebra`] computes that
//! change; [`block_normal_form`] then arranges the full component matrix
//! of a symmetry basis into diagonal sl(2) blocks, blocks of the
//! non-commutative 2-dimensional algebra, and constant rows.

use crate::jets::{JetError, UniJet};
use crate::linalg::Mat;
use crate::rat::{format_q, Q};
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

/// `lambda[r][s][u]`: structure constants of a bracket-closed basis.
pub type BracketTable = Vec<Vec<Vec<Q>>>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LineError {
    #[error("fields have mismatched orders or centers")]
    MixedShapes,
    #[error("bracket closure failure: [{i}, {j}] is not in the span")]
    ClosureFailure { i: usize, j: usize },
    #[error("span dimension {dim} exceeds 3; input is not a line-field algebra")]
    DimensionExceeded { dim: usize },
    #[error("every field vanishes at the base point; reduction not attempted")]
    AllVanishAtCenter,
    #[error("field vanishes at the base point and cannot be rectified")]
    VanishingAtCenter,
    #[error("transformed span is not polynomial of degree <= 2: {0}")]
    NotPolynomial(String),
    #[error("matrix entry at row {row}, column {col} has degree > 2")]
    DegreeTooHigh { row: usize, col: usize },
    #[error("block shape violation at column {col}: {msg}")]
    BlockShape { col: usize, msg: String },
    #[error("line-field reduction internal inconsistency: {0}")]
    Internal(String),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// A vector field `g(t) d/dt` on the line, near the jet center.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineField(pub UniJet);

impl LineField {
    pub fn jet(&self) -> &UniJet {
        &self.0
    }
}

/// `[g, h] = g h' - h g'`, declared one order lower.
pub fn line_bracket(g: &UniJet, h: &UniJet) -> Result<UniJet, JetError> {
    if g.order != h.order || g.center != h.center {
        return Err(JetError::Mismatch(format!(
            "bracket needs equal order/center, got {}@{} and {}@{}",
            g.order,
            format_q(&g.center),
            h.order,
            format_q(&h.center)
        )));
    }
    let w = g.order.saturating_sub(1);
    let gt = g.truncate(w);
    let ht = h.truncate(w);
    gt.mul(&h.derivative())?.sub(&ht.mul(&g.derivative())?)
}

/// Order of vanishing at the center: smallest `k` with a nonzero
/// coefficient, `None` when the field is zero to its declared order.
pub fn line_order(g: &UniJet) -> Option<u32> {
    g.order_of_vanishing()
}

/// Coordinate change `y(t)` with `y(center) = center` and `y' = 1/g`.
/// In the coordinate `y` the field `g(t) d/dt` becomes `d/dy`.
/// Requires `g(center) != 0`; the result is declared one order higher.
pub fn rectify(g: &UniJet) -> Result<UniJet, LineError> {
    if g.constant_term().is_zero() {
        return Err(LineError::VanishingAtCenter);
    }
    let inv = g.invert()?;
    Ok(inv.integrate(g.center.clone()))
}

/// Push-forward of the field `g(t) d/dt` through the coordinate change
/// `y`: the new coefficient is `(g * y') o y^{-1}`.
pub fn transform_field(g: &UniJet, y: &UniJet) -> Result<UniJet, LineError> {
    let yp = y.derivative();
    let w = g.order.min(yp.order);
    let prod = g.truncate(w).mul(&yp.truncate(w))?;
    let yinv = y.reversion()?;
    Ok(prod.compose(&yinv)?)
}

/// Expresses `target` as a linear combination of `basis` (all jets of the
/// same shape, compared up to `order`). Returns the coefficients.
fn in_span(basis: &[UniJet], target: &UniJet, order: u32) -> Option<Vec<Q>> {
    let w = order as usize;
    let mut rows = Vec::with_capacity(w + 1);
    for k in 0..=w {
        let row: Vec<Q> = basis.iter().map(|b| b.coeffs[k].clone()).collect();
        rows.push(row);
    }
    let rhs: Vec<Q> = (0..=w).map(|k| target.coeffs[k].clone()).collect();
    Mat::from_rows(rows).solve(&rhs)
}

/// Result of reducing a bracket-closed span of line fields.
#[derive(Debug, Clone)]
pub struct LineReduction {
    pub dim: usize,
    /// The rectifying change `y(t)`; identity when `dim == 0`.
    pub change: UniJet,
    /// `{1, t, t^2}` truncated to `dim` entries, in the new coordinate.
    pub normal_basis: Vec<UniJet>,
    /// Constant of the normalized basis; 0 under this normalization.
    pub c: Q,
    /// The input fields pushed through the change (order one lower).
    pub transformed_inputs: Vec<UniJet>,
}

/// Reduces the span of `fields` (same center, same order) to its normal
/// form `{1, t+c, (t+c)^2}` with `c = 0`.
///
/// The span must be closed under the bracket to the working order, have
/// dimension at most 3, and contain a field that does not vanish at the
/// center (unless it is the zero span).
pub fn reduce_line_algebra(fields: &[LineField]) -> Result<LineReduction, LineError> {
    let jets: Vec<&UniJet> = fields.iter().map(|f| f.jet()).collect();
    let Some(first) = jets.first() else {
        return Err(LineError::Internal("no input fields".into()));
    };
    let w = first.order;
    let center = first.center.clone();
    if jets.iter().any(|j| j.order != w || j.center != center) {
        return Err(LineError::MixedShapes);
    }

    // span basis via row reduction of coefficient vectors
    let mut mat = Mat::from_rows(jets.iter().map(|j| j.coeffs.clone()).collect());
    let pivots = mat.rref();
    let dim = pivots.len();
    let identity = UniJet::identity(w + 1, center.clone());
    if dim == 0 {
        return Ok(LineReduction {
            dim,
            change: identity,
            normal_basis: vec![],
            c: Q::zero(),
            transformed_inputs: jets.iter().map(|j| (*j).clone()).collect(),
        });
    }
    if dim > 3 {
        return Err(LineError::DimensionExceeded { dim });
    }
    let basis: Vec<UniJet> = (0..dim)
        .map(|r| UniJet::from_coeffs(center.clone(), mat.row(r).to_vec()))
        .collect();

    // bracket closure of the span
    for i in 0..dim {
        for j in i + 1..dim {
            let b = line_bracket(&basis[i], &basis[j])?;
            if in_span(&basis, &b.truncate(w - 1), w - 1).is_none() {
                return Err(LineError::ClosureFailure { i, j });
            }
        }
    }

    // pivot: the first input of minimal vanishing order
    let min_order = jets.iter().filter_map(|j| line_order(j)).min();
    let Some(0) = min_order else {
        return Err(LineError::AllVanishAtCenter);
    };
    let pivot = jets
        .iter()
        .find(|j| line_order(j) == Some(0))
        .expect("pivot exists");

    let change = match dim {
        1 => rectify(pivot)?,
        2 => {
            // rectify the derived-algebra generator, scaled to match the
            // pivot's value at the center (so that proportional inputs
            // reproduce the pivot rectification exactly)
            let v = line_bracket(&basis[0], &basis[1])?;
            let v0 = v.constant_term();
            if v0.is_zero() {
                return Err(LineError::Internal(
                    "derived generator of a 2-dim span vanishes at the center".into(),
                ));
            }
            let scaled = v.scale(&(pivot.constant_term() / v0));
            rectify(&scaled)?
        }
        3 => {
            let f = sl2_nilpotent_with_value(&basis, w)?;
            rectify(&f)?
        }
        _ => unreachable!(),
    };

    let transformed: Vec<UniJet> = jets
        .iter()
        .map(|j| transform_field(j, &change))
        .collect::<Result<_, _>>()?;

    // the transformed span must reduce to {1, t, t^2}[..dim]
    let mut tmat = Mat::from_rows(transformed.iter().map(|j| j.coeffs.clone()).collect());
    let tpivots = tmat.rref();
    if tpivots.len() != dim || tpivots.iter().enumerate().any(|(k, &p)| p != k) {
        return Err(LineError::NotPolynomial(format!(
            "pivot columns {:?} after reduction",
            tpivots
        )));
    }
    let t_order = transformed[0].order;
    let mut normal_basis = Vec::with_capacity(dim);
    for r in 0..dim {
        let row = tmat.row(r);
        for (k, v) in row.iter().enumerate() {
            if k != r && !v.is_zero() {
                return Err(LineError::NotPolynomial(format!(
                    "basis element {r} has stray coefficient {} at degree {k}",
                    format_q(v)
                )));
            }
        }
        let mut u = UniJet::zero(t_order, center.clone());
        u.coeffs[r] = Q::one();
        normal_basis.push(u);
    }

    Ok(LineReduction {
        dim,
        change,
        normal_basis,
        c: Q::zero(),
        transformed_inputs: transformed,
    })
}

/// In a 3-dimensional bracket-closed span, finds the nilpotent element
/// `F` of a Chevalley-style triple ([F,H] = F, [H,E] = E, [F,E] = 2H)
/// where `E` spans the order >= 2 part of the span. `F` never vanishes
/// at the center when the span contains a nonvanishing field.
fn sl2_nilpotent_with_value(basis: &[UniJet], w: u32) -> Result<UniJet, LineError> {
    // structure constants of the span basis
    let mut table = vec![vec![vec![Q::zero(); 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                continue;
            }
            let b = line_bracket(&basis[i], &basis[j])?;
            let coeffs = in_span(basis, &b.truncate(w - 1), w - 1)
                .ok_or(LineError::ClosureFailure { i, j })?;
            table[i][j] = coeffs;
        }
    }
    let bracket_vec = |u: &[Q], v: &[Q]| -> Vec<Q> {
        let mut out = vec![Q::zero(); 3];
        for r in 0..3 {
            if u[r].is_zero() {
                continue;
            }
            for s in 0..3 {
                if v[s].is_zero() {
                    continue;
                }
                for (k, t) in table[r][s].iter().enumerate() {
                    out[k] = &out[k] + &u[r] * &v[s] * t;
                }
            }
        }
        out
    };

    // E spans the order >= 2 subspace: two linear conditions on the span
    let cond = Mat::from_rows(vec![
        basis.iter().map(|b| b.coeffs[0].clone()).collect(),
        basis.iter().map(|b| b.coeffs[1].clone()).collect(),
    ]);
    let ns = cond.nullspace();
    if ns.len() != 1 {
        return Err(LineError::Internal(format!(
            "order >= 2 subspace of a 3-dim span has dimension {}",
            ns.len()
        )));
    }
    let e = ns.into_iter().next().unwrap();

    // solve [H, E] = E (linear in H)
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for k in 0..3 {
        let mut row = vec![Q::zero(); 3];
        for r in 0..3 {
            // coefficient of h_r in [b_r, E]_k
            let mut acc = Q::zero();
            for s in 0..3 {
                acc = acc + &e[s] * &table[r][s][k];
            }
            row[r] = acc;
        }
        rows.push(row);
        rhs.push(e[k].clone());
    }
    let h_mat = Mat::from_rows(rows.clone());
    let h = h_mat
        .solve(&rhs)
        .ok_or_else(|| LineError::Internal("no H with [H, E] = E".into()))?;

    // solve [F, E] = 2H (same coefficient matrix, different RHS)
    let rhs2: Vec<Q> = h.iter().map(|x| x * Q::from_integer(2.into())).collect();
    let f0 = Mat::from_rows(rows)
        .solve(&rhs2)
        .ok_or_else(|| LineError::Internal("no F with [F, E] = 2H".into()))?;

    // fix the E-ambiguity in F: [F0 + mu E, H] = F0 + mu E requires
    // [F0, H] - F0 = 2 mu E
    let mut wvec = bracket_vec(&f0, &h);
    for k in 0..3 {
        wvec[k] = &wvec[k] - &f0[k];
    }
    let mu = {
        let pivot = e.iter().position(|x| !x.is_zero()).unwrap();
        let mu = &wvec[pivot] / (&e[pivot] * Q::from_integer(2.into()));
        for k in 0..3 {
            let expect = &mu * &e[k] * Q::from_integer(2.into());
            if wvec[k] != expect {
                return Err(LineError::Internal(
                    "span is closed but carries no sl(2) Chevalley triple".into(),
                ));
            }
        }
        mu
    };
    let f: Vec<Q> = f0.iter().zip(&e).map(|(a, b)| a + &mu * b).collect();

    // realize F as a jet
    let mut fjet = UniJet::zero(w, basis[0].center.clone());
    for (r, c) in f.iter().enumerate() {
        fjet = fjet.add(&basis[r].scale(c))?;
    }
    if fjet.constant_term().is_zero() {
        return Err(LineError::AllVanishAtCenter);
    }
    Ok(fjet)
}

// ---------------------------------------------------------------------
// Component matrices and the block normal form
// ---------------------------------------------------------------------

/// The matrix of components of a symmetry basis: entry `[j][i]` is the
/// `x_i`-component of the `j`-th basis field, a one-variable jet in `x_i`
/// centered at `base_i`.
#[derive(Debug, Clone)]
pub struct ComponentMatrix {
    pub entries: Vec<Vec<UniJet>>,
}

impl ComponentMatrix {
    pub fn m(&self) -> usize {
        self.entries.len()
    }

    pub fn n(&self) -> usize {
        self.entries.first().map_or(0, |r| r.len())
    }

    pub fn validate(&self) -> Result<(), LineError> {
        let n = self.n();
        if self.entries.iter().any(|r| r.len() != n) {
            return Err(LineError::MixedShapes);
        }
        for i in 0..n {
            let c = &self.entries[0][i].center;
            let w = self.entries[0][i].order;
            for row in &self.entries {
                if row[i].center != *c || row[i].order != w {
                    return Err(LineError::MixedShapes);
                }
            }
        }
        Ok(())
    }
}

/// A quadratic polynomial in the plain (uncentered) variable.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Quad([Q; 3]);

impl Quad {
    fn degree(&self) -> Option<usize> {
        (0..3).rev().find(|&k| !self.0[k].is_zero())
    }

    fn is_zero(&self) -> bool {
        self.degree().is_none()
    }

    fn sub_scaled(&mut self, other: &Quad, f: &Q) {
        for k in 0..3 {
            self.0[k] = &self.0[k] - f * &other.0[k];
        }
    }

    fn scale(&mut self, f: &Q) {
        for k in 0..3 {
            self.0[k] = &self.0[k] * f;
        }
    }
}

/// Converts a jet entry (centered at `b`, polynomial of degree <= 2) to
/// absolute-variable quadratic coefficients.
fn entry_to_quad(u: &UniJet, row: usize, col: usize) -> Result<Quad, LineError> {
    for (k, c) in u.coeffs.iter().enumerate() {
        if k > 2 && !c.is_zero() {
            return Err(LineError::DegreeTooHigh { row, col });
        }
    }
    let a0 = u.coeffs.first().cloned().unwrap_or_else(Q::zero);
    let a1 = u.coeffs.get(1).cloned().unwrap_or_else(Q::zero);
    let a2 = u.coeffs.get(2).cloned().unwrap_or_else(Q::zero);
    let b = &u.center;
    // p(x) = a0 + a1 (x-b) + a2 (x-b)^2
    Ok(Quad([
        &a0 - &a1 * b + &a2 * b * b,
        &a1 - Q::from_integer(2.into()) * &a2 * b,
        a2,
    ]))
}

#[derive(Debug, Clone, Serialize)]
pub struct Sl2Block {
    /// Columns of the block (0-based input numbering).
    pub columns: Vec<usize>,
    /// Constants, one per column: rows are (1, x+c, (x+c)^2).
    #[serde(with = "crate::rat::serde_q_vec")]
    pub constants: Vec<Q>,
    /// Final row indices of the (F, H, E) rows.
    pub rows: [usize; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct NBlock {
    pub columns: Vec<usize>,
    #[serde(with = "crate::rat::serde_q_vec")]
    pub constants: Vec<Q>,
    /// Final row indices of the (F, E) rows.
    pub rows: [usize; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockDecomposition {
    pub sl2_blocks: Vec<Sl2Block>,
    pub n_blocks: Vec<NBlock>,
    /// Final row indices of the constant (abelian) rows.
    pub constant_rows: Vec<usize>,
    /// Invertible transform: final rows = row_transform * input rows.
    pub row_transform: Vec<Vec<String>>,
    /// Block columns first, then leftover columns, then zero columns.
    pub column_permutation: Vec<usize>,
    pub zero_columns: Vec<usize>,
    /// Per-column extra coordinate changes applied during alignment
    /// (coefficient lists of y(t) at the column center), identity = None.
    pub column_alignments: Vec<Option<Vec<String>>>,
}

impl BlockDecomposition {
    pub fn counts(&self) -> (usize, usize, usize) {
        (
            self.sl2_blocks.len(),
            self.n_blocks.len(),
            self.constant_rows.len(),
        )
    }
}

/// Arranges a degree <= 2 component matrix into the block normal form by
/// row operations and a column permutation, with per-column affine or
/// projective alignment where a column's Chevalley triple is scaled or
/// curved. `sc` is the bracket table of the input basis; the conjugated
/// table is verified against the block model at the end.
pub fn block_normal_form(
    m: &ComponentMatrix,
    sc: &BracketTable,
) -> Result<BlockDecomposition, LineError> {
    m.validate()?;
    let nrows = m.m();
    let ncols = m.n();
    let work_order = m
        .entries
        .first()
        .and_then(|r| r.first())
        .map(|u| u.order)
        .unwrap_or(4);

    // convert entries, remembering centers for alignment changes
    let mut quads: Vec<Vec<Quad>> = Vec::with_capacity(nrows);
    for (j, row) in m.entries.iter().enumerate() {
        let mut qrow = Vec::with_capacity(ncols);
        for (i, u) in row.iter().enumerate() {
            qrow.push(entry_to_quad(u, j, i)?);
        }
        quads.push(qrow);
    }
    let centers: Vec<Q> = (0..ncols)
        .map(|i| m.entries[0][i].center.clone())
        .collect();

    let mut transform = Mat::identity(nrows);
    let mut alignments: Vec<Option<UniJet>> = vec![None; ncols];
    let mut remaining_rows: Vec<usize> = (0..nrows).collect();
    let mut remaining_cols: Vec<usize> = (0..ncols).collect();

    // zero columns move to the back immediately
    let zero_columns: Vec<usize> = remaining_cols
        .iter()
        .copied()
        .filter(|&i| quads.iter().all(|row| row[i].is_zero()))
        .collect();
    remaining_cols.retain(|c| !zero_columns.contains(c));

    let mut sl2_blocks_raw: Vec<(Vec<usize>, Vec<Q>, [usize; 3])> = Vec::new();
    let mut n_blocks_raw: Vec<(Vec<usize>, Vec<Q>, [usize; 2])> = Vec::new();

    let two = Q::from_integer(2.into());

    // row operation dst -= f * src on quads and transform
    macro_rules! row_sub {
        ($dst:expr, $src:expr, $f:expr) => {{
            let f: Q = $f;
            if !f.is_zero() {
                for c in 0..ncols {
                    let src_q = quads[$src][c].clone();
                    quads[$dst][c].sub_scaled(&src_q, &f);
                }
                for c in 0..nrows {
                    let v = &transform[($dst, c)] - &f * &transform[($src, c)];
                    transform[($dst, c)] = v;
                }
            }
        }};
    }
    macro_rules! row_scale {
        ($dst:expr, $f:expr) => {{
            let f: Q = $f;
            for c in 0..ncols {
                quads[$dst][c].scale(&f);
            }
            for c in 0..nrows {
                let v = &transform[($dst, c)] * &f;
                transform[($dst, c)] = v;
            }
        }};
    }

    // Phase 1: sl(2) blocks, triggered by a degree-2 entry.
    loop {
        let Some(&pivot_col) = remaining_cols.iter().find(|&&c| {
            remaining_rows
                .iter()
                .any(|&r| quads[r][c].degree() == Some(2))
        }) else {
            break;
        };

        // bring the column to 1, x, x^2 on three chosen rows
        let pe = *remaining_rows
            .iter()
            .find(|&&r| quads[r][pivot_col].degree() == Some(2))
            .unwrap();
        row_scale!(pe, quads[pe][pivot_col].0[2].recip());
        for &r in remaining_rows.clone().iter() {
            if r != pe {
                row_sub!(r, pe, quads[r][pivot_col].0[2].clone());
            }
        }
        let Some(&ph) = remaining_rows
            .iter()
            .find(|&&r| r != pe && quads[r][pivot_col].degree() == Some(1))
        else {
            return Err(LineError::BlockShape {
                col: pivot_col,
                msg: "column with a quadratic entry spans less than 3 dimensions".into(),
            });
        };
        row_scale!(ph, quads[ph][pivot_col].0[1].recip());
        for &r in remaining_rows.clone().iter() {
            if r != ph {
                row_sub!(r, ph, quads[r][pivot_col].0[1].clone());
            }
        }
        let Some(&pf) = remaining_rows
            .iter()
            .find(|&&r| r != pe && r != ph && quads[r][pivot_col].degree() == Some(0))
        else {
            return Err(LineError::BlockShape {
                col: pivot_col,
                msg: "column with a quadratic entry spans less than 3 dimensions".into(),
            });
        };
        row_scale!(pf, quads[pf][pivot_col].0[0].recip());
        for &r in remaining_rows.clone().iter() {
            if r != pf {
                row_sub!(r, pf, quads[r][pivot_col].0[0].clone());
            }
        }
        // normalize: H entry to exactly x, E entry to exactly x^2
        // (the pivot column carries c = 0)
        let d = quads[ph][pivot_col].0[0].clone();
        row_sub!(ph, pf, d);
        let alpha = quads[pe][pivot_col].0[1].clone();
        row_sub!(pe, ph, alpha);
        let beta = quads[pe][pivot_col].0[0].clone();
        row_sub!(pe, pf, beta);

        // column alignment + block membership for the other columns
        let mut cols = vec![pivot_col];
        let mut cs = vec![Q::zero()];
        for &j in remaining_cols.clone().iter() {
            if j == pivot_col {
                continue;
            }
            let fq = quads[pf][j].clone();
            let hq = quads[ph][j].clone();
            let eq = quads[pe][j].clone();
            if fq.is_zero() && hq.is_zero() && eq.is_zero() {
                continue;
            }
            if fq.is_zero() {
                return Err(LineError::BlockShape {
                    col: j,
                    msg: "nonzero Chevalley column with vanishing F entry".into(),
                });
            }
            // align the column so the F entry becomes the constant 1
            if fq.degree() != Some(0) || fq.0[0] != Q::one() {
                align_column(&mut quads, &mut alignments, j, pf, &centers[j], work_order)?;
            }
            let fq = quads[pf][j].clone();
            if fq.degree() != Some(0) || fq.0[0] != Q::one() {
                return Err(LineError::BlockShape {
                    col: j,
                    msg: "F entry could not be aligned to 1".into(),
                });
            }
            let hq = quads[ph][j].clone();
            if hq.0[1] != Q::one() || !hq.0[2].is_zero() {
                return Err(LineError::BlockShape {
                    col: j,
                    msg: "H entry is not x + c".into(),
                });
            }
            let c = hq.0[0].clone();
            let eq = quads[pe][j].clone();
            let expect = Quad([&c * &c, &two * &c, Q::one()]);
            if eq != expect {
                return Err(LineError::BlockShape {
                    col: j,
                    msg: "E entry is not (x + c)^2".into(),
                });
            }
            cols.push(j);
            cs.push(c);
        }
        if cols.len() < 3 {
            return Err(LineError::BlockShape {
                col: pivot_col,
                msg: format!("sl(2) block spans only {} columns (needs >= 3)", cols.len()),
            });
        }
        // rows outside the triple must vanish on the block columns
        for &r in &remaining_rows {
            if r == pf || r == ph || r == pe {
                continue;
            }
            for &j in &cols {
                if !quads[r][j].is_zero() {
                    return Err(LineError::BlockShape {
                        col: j,
                        msg: format!("row {r} does not vanish on an sl(2) block column"),
                    });
                }
            }
        }
        remaining_rows.retain(|&r| r != pf && r != ph && r != pe);
        remaining_cols.retain(|c| !cols.contains(c));
        sl2_blocks_raw.push((cols, cs, [pf, ph, pe]));
    }

    // Phase 2: blocks of the non-commutative 2-dim algebra (affine rows).
    for &r in &remaining_rows {
        for &c in &remaining_cols {
            if quads[r][c].degree() == Some(2) {
                return Err(LineError::Internal(
                    "degree-2 entry survived the sl(2) phase".into(),
                ));
            }
        }
    }
    loop {
        let Some(&pivot_col) = remaining_cols.iter().find(|&&c| {
            remaining_rows
                .iter()
                .any(|&r| quads[r][c].degree() == Some(1))
        }) else {
            break;
        };
        let pe = *remaining_rows
            .iter()
            .find(|&&r| quads[r][pivot_col].degree() == Some(1))
            .unwrap();
        row_scale!(pe, quads[pe][pivot_col].0[1].recip());
        for &r in remaining_rows.clone().iter() {
            if r != pe {
                row_sub!(r, pe, quads[r][pivot_col].0[1].clone());
            }
        }
        let Some(&pf) = remaining_rows
            .iter()
            .find(|&&r| r != pe && quads[r][pivot_col].degree() == Some(0))
        else {
            return Err(LineError::BlockShape {
                col: pivot_col,
                msg: "affine column carries no constant companion row".into(),
            });
        };
        row_scale!(pf, quads[pf][pivot_col].0[0].recip());
        for &r in remaining_rows.clone().iter() {
            if r != pf {
                row_sub!(r, pf, quads[r][pivot_col].0[0].clone());
            }
        }
        // now the pe entry is exactly x (the pivot column carries c = 0)
        let mut cols = vec![pivot_col];
        let mut cs = vec![Q::zero()];
        for &j in remaining_cols.clone().iter() {
            if j == pivot_col {
                continue;
            }
            let fq = quads[pf][j].clone();
            let eq = quads[pe][j].clone();
            if eq.degree() == Some(1) {
                if fq.degree() != Some(0) {
                    return Err(LineError::BlockShape {
                        col: j,
                        msg: "affine block column with non-constant F entry".into(),
                    });
                }
                if fq.0[0].is_zero() {
                    return Err(LineError::BlockShape {
                        col: j,
                        msg: "affine block column with vanishing F entry".into(),
                    });
                }
                if fq.0[0] != Q::one() || eq.0[1] != Q::one() {
                    align_column(&mut quads, &mut alignments, j, pf, &centers[j], work_order)?;
                }
                let fq = quads[pf][j].clone();
                let eq = quads[pe][j].clone();
                if fq.degree() != Some(0) || fq.0[0] != Q::one() || eq.0[1] != Q::one() {
                    return Err(LineError::BlockShape {
                        col: j,
                        msg: "block column could not be aligned to (1, x + c)".into(),
                    });
                }
                cols.push(j);
                cs.push(eq.0[0].clone());
            } else if !fq.is_zero() {
                return Err(LineError::BlockShape {
                    col: j,
                    msg: "F row carries a constant outside its block".into(),
                });
            }
        }
        // remaining rows vanish on the block columns
        for &r in &remaining_rows {
            if r == pf || r == pe {
                continue;
            }
            for &j in &cols {
                if !quads[r][j].is_zero() {
                    return Err(LineError::BlockShape {
                        col: j,
                        msg: format!("row {r} does not vanish on a 2-dim block column"),
                    });
                }
            }
        }
        remaining_rows.retain(|&r| r != pf && r != pe);
        remaining_cols.retain(|c| !cols.contains(c));
        n_blocks_raw.push((cols, cs, [pf, pe]));
    }

    // cross-block cleanup: an earlier E row may carry constants on a
    // later block's columns; closure forces them equal per block, and
    // the later F row removes them
    for bi in 0..n_blocks_raw.len() {
        for bj in 0..n_blocks_raw.len() {
            if bi == bj {
                continue;
            }
            let e_row = n_blocks_raw[bi].2[1];
            let (cols_j, _, [f_j, _]) = n_blocks_raw[bj].clone();
            let consts: Vec<Q> = cols_j
                .iter()
                .map(|&c| quads[e_row][c].0[0].clone())
                .collect();
            if consts.iter().any(|v| !v.is_zero()) {
                let c0 = consts[0].clone();
                if consts.iter().any(|v| v != &c0) {
                    return Err(LineError::BlockShape {
                        col: cols_j[0],
                        msg: "unequal cross-block constants contradict closure".into(),
                    });
                }
                row_sub!(e_row, f_j, c0);
            }
        }
    }
    for (cols_j, _, [f_j, _, _]) in sl2_blocks_raw.clone() {
        for &(_, _, [_, e_row]) in &n_blocks_raw {
            let consts: Vec<Q> = cols_j
                .iter()
                .map(|&c| quads[e_row][c].0[0].clone())
                .collect();
            if consts.iter().any(|v| !v.is_zero()) {
                let c0 = consts[0].clone();
                if consts.iter().any(|v| v != &c0) {
                    return Err(LineError::BlockShape {
                        col: cols_j[0],
                        msg: "unequal cross-block constants contradict closure".into(),
                    });
                }
                row_sub!(e_row, f_j, c0);
            }
        }
    }

    // Phase 3: whatever remains must be constant rows
    for &r in &remaining_rows {
        for &c in &remaining_cols {
            if quads[r][c].degree() > Some(0) {
                return Err(LineError::Internal(format!(
                    "row {r} still has a non-constant entry after block extraction"
                )));
            }
        }
    }

    // final row order: triples, pairs, constants
    let mut final_order: Vec<usize> = Vec::with_capacity(nrows);
    for (_, _, rows) in &sl2_blocks_raw {
        final_order.extend_from_slice(rows);
    }
    for (_, _, rows) in &n_blocks_raw {
        final_order.extend_from_slice(rows);
    }
    final_order.extend(remaining_rows.iter().copied());
    let mut perm = Mat::zero(nrows, nrows);
    for (new_i, &old_i) in final_order.iter().enumerate() {
        perm[(new_i, old_i)] = Q::one();
    }
    let final_transform = perm.mul(&transform);

    // verify the conjugated structure constants against the block model
    verify_block_constants(&final_transform, sc, &sl2_blocks_raw, &n_blocks_raw, nrows)?;

    let mut column_permutation: Vec<usize> = Vec::with_capacity(ncols);
    for (cols, _, _) in &sl2_blocks_raw {
        column_permutation.extend(cols.iter().copied());
    }
    for (cols, _, _) in &n_blocks_raw {
        column_permutation.extend(cols.iter().copied());
    }
    column_permutation.extend(remaining_cols.iter().copied());
    column_permutation.extend(zero_columns.iter().copied());

    let row_of = |old: usize| final_order.iter().position(|&r| r == old).unwrap();
    let sl2_blocks = sl2_blocks_raw
        .iter()
        .map(|(cols, cs, rows)| Sl2Block {
            columns: cols.clone(),
            constants: cs.clone(),
            rows: [row_of(rows[0]), row_of(rows[1]), row_of(rows[2])],
        })
        .collect();
    let n_blocks = n_blocks_raw
        .iter()
        .map(|(cols, cs, rows)| NBlock {
            columns: cols.clone(),
            constants: cs.clone(),
            rows: [row_of(rows[0]), row_of(rows[1])],
        })
        .collect();
    let constant_rows = remaining_rows.iter().map(|&r| row_of(r)).collect();

    Ok(BlockDecomposition {
        sl2_blocks,
        n_blocks,
        constant_rows,
        row_transform: (0..nrows)
            .map(|i| {
                (0..nrows)
                    .map(|j| format_q(&final_transform[(i, j)]))
                    .collect()
            })
            .collect(),
        column_permutation,
        zero_columns,
        column_alignments: alignments
            .iter()
            .map(|a| a.as_ref().map(|u| u.coeffs.iter().map(format_q).collect()))
            .collect(),
    })
}

/// Applies the column coordinate change that rectifies the `pf` row's
/// entry to the constant 1, transforming every row's entry in column `j`
/// and composing into the alignment record.
fn align_column(
    quads: &mut [Vec<Quad>],
    alignments: &mut [Option<UniJet>],
    j: usize,
    pf: usize,
    center: &Q,
    work_order: u32,
) -> Result<(), LineError> {
    let w = work_order.max(4);
    let to_jet = |q: &Quad| -> UniJet { UniJet::from_polynomial(w, center.clone(), &q.0) };
    let fjet = to_jet(&quads[pf][j]);
    if fjet.constant_term().is_zero() {
        return Err(LineError::BlockShape {
            col: j,
            msg: "F entry vanishes at the base point".into(),
        });
    }
    let y = rectify(&fjet)?;
    for row in quads.iter_mut() {
        let jet = to_jet(&row[j]);
        let transformed = transform_field(&jet, &y)?;
        // the transformed entry must again be a degree <= 2 polynomial
        for (k, c) in transformed.coeffs.iter().enumerate() {
            if k > 2 && !c.is_zero() {
                return Err(LineError::NotPolynomial(format!(
                    "column {j} alignment produced degree {k}"
                )));
            }
        }
        let a0 = transformed.coeffs[0].clone();
        let a1 = transformed.coeffs.get(1).cloned().unwrap_or_else(Q::zero);
        let a2 = transformed.coeffs.get(2).cloned().unwrap_or_else(Q::zero);
        // back to absolute coefficients around the (unchanged) center
        let b = center;
        row[j] = Quad([
            &a0 - &a1 * b + &a2 * b * b,
            &a1 - Q::from_integer(2.into()) * &a2 * b,
            a2,
        ]);
    }
    alignments[j] = Some(match alignments[j].take() {
        None => y,
        Some(prev) => y.compose(&prev).map_err(LineError::Jet)?,
    });
    Ok(())
}

/// Conjugates `sc` by the row transform and checks it against the exact
/// block-model constants.
fn verify_block_constants(
    t: &Mat,
    sc: &BracketTable,
    sl2: &[(Vec<usize>, Vec<Q>, [usize; 3])],
    nbl: &[(Vec<usize>, Vec<Q>, [usize; 2])],
    m: usize,
) -> Result<(), LineError> {
    if sc.len() != m {
        return Err(LineError::Internal(format!(
            "bracket table has {} rows for an {}-row matrix",
            sc.len(),
            m
        )));
    }
    let tinv = t
        .inverse()
        .ok_or_else(|| LineError::Internal("row transform is singular".into()))?;
    // lambda'[a][b][v] = sum T[a][r] T[b][s] sc[r][s][u] Tinv[u][v]
    let mut conj = vec![vec![vec![Q::zero(); m]; m]; m];
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
                    for (u, l) in sc[r][s].iter().enumerate() {
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
                conj[a][b][v] = x;
            }
        }
    }
    // expected model table in final row numbering
    let mut expect = vec![vec![vec![Q::zero(); m]; m]; m];
    let mut idx = 0usize;
    let two = Q::from_integer(2.into());
    for _ in sl2 {
        let (f, h, e) = (idx, idx + 1, idx + 2);
        expect[f][h][f] = Q::one();
        expect[h][f][f] = -Q::one();
        expect[h][e][e] = Q::one();
        expect[e][h][e] = -Q::one();
        expect[f][e][h] = two.clone();
        expect[e][f][h] = -two.clone();
        idx += 3;
    }
    for _ in nbl {
        let (f, e) = (idx, idx + 1);
        expect[f][e][f] = Q::one();
        expect[e][f][f] = -Q::one();
        idx += 2;
    }
    if conj != expect {
        return Err(LineError::Internal(
            "conjugated structure constants do not match the block model".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{qi, qr};

    fn u(coeffs: Vec<i64>) -> UniJet {
        UniJet::from_coeffs(qi(0), coeffs.into_iter().map(qi).collect())
    }

    fn pad(mut v: Vec<i64>, w: usize) -> Vec<i64> {
        v.resize(w + 1, 0);
        v
    }

    #[test]
    fn bracket_basics() {
        let w = 6;
        // [1, t] = 1
        let one = u(pad(vec![1], w));
        let t = u(pad(vec![0, 1], w));
        let t2 = u(pad(vec![0, 0, 1], w));
        assert_eq!(line_bracket(&one, &t).unwrap(), u(pad(vec![1], w - 1)));
        // [t, t^2] = t^2
        assert_eq!(line_bracket(&t, &t2).unwrap(), u(pad(vec![0, 0, 1], w - 1)));
        // [1, t^2] = 2t
        assert_eq!(line_bracket(&one, &t2).unwrap(), u(pad(vec![0, 2], w - 1)));
    }

    #[test]
    fn monomial_bracket_formula() {
        // [t^r, t^s] = (s - r) t^{r+s-1} for 0 <= r, s <= 5 at W = 12
        let w = 12usize;
        for r in 0..=5usize {
            for s in 0..=5usize {
                let mut a = vec![0i64; w + 1];
                a[r] = 1;
                let mut b = vec![0i64; w + 1];
                b[s] = 1;
                let got = line_bracket(&u(a), &u(b)).unwrap();
                let mut want = vec![0i64; w];
                if r + s >= 1 && s != r {
                    want[r + s - 1] = s as i64 - r as i64;
                }
                assert_eq!(got, u(want), "r={r} s={s}");
            }
        }
    }

    #[test]
    fn line_order_values() {
        let g = u(vec![0, 0, 3, 0, 0, 1]);
        assert_eq!(line_order(&g), Some(2));
        assert_eq!(line_order(&u(vec![0, 0, 0])), None);
        let ln = crate::jets::log1p_series(5);
        assert_eq!(line_order(&ln), Some(1));
    }

    #[test]
    fn rectify_constant_and_affine() {
        // g = 1 -> identity
        let y = rectify(&u(vec![1, 0, 0, 0])).unwrap();
        assert_eq!(y, UniJet::identity(4, qi(0)));
        // g = 2 -> y = t/2
        let y = rectify(&u(vec![2, 0, 0, 0])).unwrap();
        assert_eq!(y.coeffs, vec![qi(0), qr(1, 2), qi(0), qi(0), qi(0)]);
        // g = 1 + t -> y = log(1+t)
        let y = rectify(&u(vec![1, 1, 0, 0, 0])).unwrap();
        assert_eq!(y.truncate(5), crate::jets::log1p_series(5));
        // vanishing constant term is an error
        assert!(rectify(&u(vec![0, 1, 0])).is_err());
    }

    #[test]
    fn transform_rectified_field_is_one() {
        let g = u(vec![1, 2, -1, 3, 0, 0]);
        let y = rectify(&g).unwrap();
        let t = transform_field(&g, &y).unwrap();
        assert_eq!(t, UniJet::constant(t.order, qi(0), qi(1)));
    }

    #[test]
    fn reduce_dim0_and_dim1() {
        let z = LineField(u(vec![0, 0, 0, 0, 0]));
        let red = reduce_line_algebra(&[z]).unwrap();
        assert_eq!(red.dim, 0);

        let red = reduce_line_algebra(&[LineField(u(vec![2, 0, 0, 0, 0]))]).unwrap();
        assert_eq!(red.dim, 1);
        assert_eq!(red.change.coeffs[1], qr(1, 2));
        assert_eq!(red.normal_basis.len(), 1);
        assert_eq!(red.transformed_inputs[0].constant_term(), qi(1));
    }

    #[test]
    fn reduce_dim2_spec_case() {
        // {2, 2t}: dim 2, change y = t/2, basis {1, y}
        let red = reduce_line_algebra(&[
            LineField(u(vec![2, 0, 0, 0, 0, 0])),
            LineField(u(vec![0, 2, 0, 0, 0, 0])),
        ])
        .unwrap();
        assert_eq!(red.dim, 2);
        assert_eq!(red.change.coeffs[..3], [qi(0), qr(1, 2), qi(0)]);
        assert_eq!(red.c, qi(0));
        // transformed inputs: 2 -> 1, 2t -> 2y
        assert_eq!(red.transformed_inputs[0].constant_term(), qi(1));
        assert_eq!(red.transformed_inputs[1].coeffs[1], qi(2));
    }

    #[test]
    fn reduce_dim2_exponential_span() {
        // {1, e^t - 1} is closed: [1, e^t - 1] = e^t. Rectifying the
        // first input would leave a transcendental element; the derived
        // generator works.
        let w = 8;
        let mut e = crate::jets::exp_series(w);
        e.coeffs[0] = qi(0);
        let red = reduce_line_algebra(&[
            LineField(UniJet::constant(w, qi(0), qi(1))),
            LineField(e),
        ])
        .unwrap();
        assert_eq!(red.dim, 2);
        // transformed inputs are affine in the new coordinate
        for t in &red.transformed_inputs {
            for (k, c) in t.coeffs.iter().enumerate() {
                assert!(k <= 1 || c.is_zero(), "degree {k} coefficient {c}");
            }
        }
    }

    #[test]
    fn reduce_dim3_standard() {
        let w = 8;
        let fields: Vec<LineField> = [
            pad(vec![1], w as usize),
            pad(vec![0, 1], w as usize),
            pad(vec![0, 0, 1], w as usize),
        ]
        .into_iter()
        .map(|c| LineField(u(c)))
        .collect();
        let red = reduce_line_algebra(&fields).unwrap();
        assert_eq!(red.dim, 3);
        assert_eq!(red.c, qi(0));
        // identity change
        assert_eq!(red.change.truncate(w), UniJet::identity(w, qi(0)));
    }

    #[test]
    fn reduce_dim3_conjugated() {
        // span {1, s, s^2} pushed through t = s + s^2/2: still a closed
        // 3-dim span, must reduce back to {1, t, t^2}
        let w = 8;
        let mut y = UniJet::identity(w, qi(0));
        y.coeffs[2] = qr(1, 2);
        let fields: Vec<LineField> = [
            pad(vec![1], w as usize),
            pad(vec![0, 1], w as usize),
            pad(vec![0, 0, 1], w as usize),
        ]
        .into_iter()
        .map(|c| LineField(transform_field(&u(c), &y).unwrap()))
        .collect();
        let red = reduce_line_algebra(&fields).unwrap();
        assert_eq!(red.dim, 3);
        for t in &red.transformed_inputs {
            for (k, c) in t.coeffs.iter().enumerate() {
                assert!(k <= 2 || c.is_zero(), "degree {k} coefficient {c}");
            }
        }
    }

    #[test]
    fn reduce_rejects_dim4_and_open_spans() {
        let w = 8;
        let fields: Vec<LineField> = [
            pad(vec![1], w as usize),
            pad(vec![0, 1], w as usize),
            pad(vec![0, 0, 1], w as usize),
            pad(vec![0, 0, 0, 1], w as usize),
        ]
        .into_iter()
        .map(|c| LineField(u(c)))
        .collect();
        // {1, t, t^2, t^3} is 4-dimensional
        assert!(matches!(
            reduce_line_algebra(&fields).unwrap_err(),
            LineError::DimensionExceeded { dim: 4 }
        ));
        // {1, t^3} is not closed: [1, t^3] = 3 t^2 outside the span
        let open: Vec<LineField> = [pad(vec![1], w as usize), pad(vec![0, 0, 0, 1], w as usize)]
            .into_iter()
            .map(|c| LineField(u(c)))
            .collect();
        assert!(matches!(
            reduce_line_algebra(&open).unwrap_err(),
            LineError::ClosureFailure { .. }
        ));
    }

    #[test]
    fn reduce_rejects_all_vanishing() {
        let w = 6;
        let fields: Vec<LineField> = [pad(vec![0, 1], w as usize), pad(vec![0, 0, 1], w as usize)]
            .into_iter()
            .map(|c| LineField(u(c)))
            .collect();
        assert!(matches!(
            reduce_line_algebra(&fields).unwrap_err(),
            LineError::AllVanishAtCenter
        ));
    }

    // --- block normal form ---

    fn poly_entry(w: u32, center: i64, abs: &[i64]) -> UniJet {
        let coeffs: Vec<Q> = abs.iter().map(|&v| qi(v)).collect();
        UniJet::from_polynomial(w, qi(center), &coeffs)
    }

    fn sl2_table_3() -> BracketTable {
        // basis (F, H, E): [F,H] = F, [H,E] = E, [F,E] = 2H
        let mut t = vec![vec![vec![Q::zero(); 3]; 3]; 3];
        t[0][1][0] = qi(1);
        t[1][0][0] = qi(-1);
        t[1][2][2] = qi(1);
        t[2][1][2] = qi(-1);
        t[0][2][1] = qi(2);
        t[2][0][1] = qi(-2);
        t
    }

    #[test]
    fn block_single_constant_row() {
        let w = 5;
        let m = ComponentMatrix {
            entries: vec![(0..3).map(|_| poly_entry(w, 0, &[1])).collect()],
        };
        let sc = vec![vec![vec![Q::zero(); 1]; 1]; 1];
        let d = block_normal_form(&m, &sc).unwrap();
        assert_eq!(d.counts(), (0, 0, 1));
    }

    #[test]
    fn block_sl2_example() {
        // rows (1,1,1), (x, x+1, x+2), (x^2, (x+1)^2, (x+2)^2)
        let w = 5;
        let mk = |c: i64| -> Vec<UniJet> {
            vec![
                poly_entry(w, 0, &[1]),
                poly_entry(w, 0, &[c, 1]),
                poly_entry(w, 0, &[c * c, 2 * c, 1]),
            ]
        };
        let cols: Vec<Vec<UniJet>> = vec![mk(0), mk(1), mk(2)];
        let entries: Vec<Vec<UniJet>> = (0..3)
            .map(|j| (0..3).map(|i| cols[i][j].clone()).collect())
            .collect();
        let m = ComponentMatrix { entries };
        let d = block_normal_form(&m, &sl2_table_3()).unwrap();
        assert_eq!(d.counts(), (1, 0, 0));
        let b = &d.sl2_blocks[0];
        assert_eq!(b.columns, vec![0, 1, 2]);
        assert_eq!(b.constants, vec![qi(0), qi(1), qi(2)]);
    }

    #[test]
    fn block_n_example() {
        // rows (1,1,0), (x, x+1, 5): one 2-dim block on columns {0,1},
        // a constant tail on column 2
        let w = 5;
        let entries = vec![
            vec![
                poly_entry(w, 0, &[1]),
                poly_entry(w, 0, &[1]),
                poly_entry(w, 0, &[0]),
            ],
            vec![
                poly_entry(w, 0, &[0, 1]),
                poly_entry(w, 0, &[1, 1]),
                poly_entry(w, 0, &[5]),
            ],
        ];
        let m = ComponentMatrix { entries };
        let mut sc = vec![vec![vec![Q::zero(); 2]; 2]; 2];
        sc[0][1][0] = qi(1);
        sc[1][0][0] = qi(-1);
        let d = block_normal_form(&m, &sc).unwrap();
        assert_eq!(d.counts(), (0, 1, 0));
        assert_eq!(d.n_blocks[0].columns, vec![0, 1]);
        assert_eq!(d.n_blocks[0].constants, vec![qi(0), qi(1)]);
    }

    #[test]
    fn block_mixed_rows_get_separated() {
        // the same sl(2) data fed in scrambled row combinations
        let w = 5;
        let mk = |c: i64| -> Vec<UniJet> {
            vec![
                poly_entry(w, 0, &[1]),
                poly_entry(w, 0, &[c, 1]),
                poly_entry(w, 0, &[c * c, 2 * c, 1]),
            ]
        };
        let cols: Vec<Vec<UniJet>> = vec![mk(0), mk(1), mk(2)];
        // rows: F + E, H, E
        let entries: Vec<Vec<UniJet>> = vec![
            (0..3)
                .map(|i| cols[i][0].add(&cols[i][2]).unwrap())
                .collect(),
            (0..3).map(|i| cols[i][1].clone()).collect(),
            (0..3).map(|i| cols[i][2].clone()).collect(),
        ];
        let m = ComponentMatrix { entries };
        // structure constants of (F+E, H, E):
        // [F+E, H] = F - E = (F+E) - 2E ; [H, E] = E ; [F+E, E] = 2H
        let mut sc = vec![vec![vec![Q::zero(); 3]; 3]; 3];
        sc[0][1] = vec![qi(1), qi(0), qi(-2)];
        sc[1][0] = vec![qi(-1), qi(0), qi(2)];
        sc[1][2][2] = qi(1);
        sc[2][1][2] = qi(-1);
        sc[0][2][1] = qi(2);
        sc[2][0][1] = qi(-2);
        let d = block_normal_form(&m, &sc).unwrap();
        assert_eq!(d.counts(), (1, 0, 0));
        assert_eq!(d.sl2_blocks[0].constants, vec![qi(0), qi(1), qi(2)]);
    }

    #[test]
    fn block_rejects_high_degree() {
        let w = 5;
        let mut bad = UniJet::zero(w, qi(0));
        bad.coeffs[3] = qi(1);
        let m = ComponentMatrix {
            entries: vec![vec![bad]],
        };
        let sc = vec![vec![vec![Q::zero(); 1]; 1]; 1];
        assert!(matches!(
            block_normal_form(&m, &sc).unwrap_err(),
            LineError::DegreeTooHigh { .. }
        ));
    }
}
