//! JSON report assembly for the command-line front end and the language
//! bindings.
//!
//! Reports are deterministic: identical input and configuration produce
//! byte-identical JSON. Rationals are serialized as `"p/q"` strings, map
//! keys are ordered, and no timestamps are embedded.

use crate::atlas::{classify_both_routes, ClassificationReport};
use crate::classify::factor_action_profile;
use crate::expr::{expression_from_json, parse_expression, Expression};
use crate::normalform::compute_normal_form;
use crate::rat::{format_q, parse_q, Q};
use crate::symmetry::{
    is_symmetry, orbit_rank, parallelizability_with, solve_symmetries, validate_web,
    DiagonalField, ParallelizabilityVerdict, WebSpec,
};
use serde::Serialize;
use serde_json::Value;
use std::collections::BTreeMap;

pub const DEFAULT_ORDER: u32 = 8;

/// Tool metadata embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub version: &'static str,
    pub order: u32,
    pub degree_cap: u32,
    pub flags: BTreeMap<&'static str, &'static str>,
}

impl ToolInfo {
    pub fn new(order: u32, degree_cap: u32) -> Self {
        let mut flags = BTreeMap::new();
        flags.insert("rationals", "arbitrary-precision, always reduced");
        flags.insert("exp_units", "opaque positive unit exp(q), mixed sums rejected");
        flags.insert("dependence_test", "pairwise d_i(Xf) d_j f - d_j(Xf) d_i f");
        flags.insert("stabilization_window", "3");
        flags.insert(
            "normal_form_theta",
            "degree-k projection onto (sum x)^k removed, scale pinned to x1",
        );
        ToolInfo {
            version: crate::VERSION,
            order,
            degree_cap,
            flags,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("bad web description: {0}")]
    BadInput(String),
    #[error("invalid web: {0}")]
    InvalidWeb(String),
    #[error("internal: {0}")]
    Internal(String),
}

/// Parses `{"n": int, "f": string|tree, "base": ["r", ...], "order"?: int}`.
pub fn web_spec_from_json(v: &Value) -> Result<WebSpec, PipelineError> {
    let obj = v
        .as_object()
        .ok_or_else(|| PipelineError::BadInput("web description must be an object".into()))?;
    let n = obj
        .get("n")
        .and_then(|x| x.as_u64())
        .ok_or_else(|| PipelineError::BadInput("missing integer field \"n\"".into()))?
        as usize;
    let f = match obj.get("f") {
        Some(Value::String(s)) => {
            parse_expression(s, n).map_err(|e| PipelineError::BadInput(e.to_string()))?
        }
        Some(tree) => expression_from_json(tree, n)
            .map_err(|e| PipelineError::BadInput(e.to_string()))?,
        None => return Err(PipelineError::BadInput("missing field \"f\"".into())),
    };
    let base = obj
        .get("base")
        .and_then(|b| b.as_array())
        .ok_or_else(|| PipelineError::BadInput("missing array field \"base\"".into()))?
        .iter()
        .map(|x| match x {
            Value::String(s) => parse_q(s),
            Value::Number(k) if k.is_i64() => Ok(Q::from_integer(k.as_i64().unwrap().into())),
            other => Err(format!("bad base coordinate {other}")),
        })
        .collect::<Result<Vec<Q>, String>>()
        .map_err(PipelineError::BadInput)?;
    let order = obj
        .get("order")
        .and_then(|x| x.as_u64())
        .map(|x| x as u32)
        .unwrap_or(DEFAULT_ORDER);
    Ok(WebSpec::new(n, f, base, order))
}

/// Parses `{"components": [[coeffs of X_1], ...]}`, polynomial
/// coefficients in the plain variables (constant term first).
pub fn field_from_json(v: &Value, spec: &WebSpec) -> Result<DiagonalField, PipelineError> {
    let comps = v
        .as_object()
        .and_then(|o| o.get("components"))
        .and_then(|c| c.as_array())
        .ok_or_else(|| PipelineError::BadInput("missing \"components\" array".into()))?;
    if comps.len() != spec.n {
        return Err(PipelineError::BadInput(format!(
            "field has {} components for dimension {}",
            comps.len(),
            spec.n
        )));
    }
    let mut polys = Vec::with_capacity(spec.n);
    for c in comps {
        let arr = c
            .as_array()
            .ok_or_else(|| PipelineError::BadInput("components must be arrays".into()))?;
        let coeffs = arr
            .iter()
            .map(|x| match x {
                Value::String(s) => parse_q(s),
                Value::Number(k) if k.is_i64() => {
                    Ok(Q::from_integer(k.as_i64().unwrap().into()))
                }
                other => Err(format!("bad coefficient {other}")),
            })
            .collect::<Result<Vec<Q>, String>>()
            .map_err(PipelineError::BadInput)?;
        polys.push(coeffs);
    }
    Ok(DiagonalField::from_absolute_polys(
        &polys,
        &spec.base,
        spec.order.saturating_sub(1),
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverSection {
    pub dim: usize,
    pub dims_by_order: Vec<usize>,
    pub stabilized: bool,
    pub closure: String,
    pub orbit_rank: usize,
    pub basis: Vec<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParallelizabilitySection {
    pub verdict: String,
    pub vanishing_combination: bool,
    pub normal_form_linear: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub tool: ToolInfo,
    pub n: usize,
    pub f: String,
    pub base: Vec<String>,
    pub partials: Vec<String>,
    pub solver: SolverSection,
    pub parallelizability: ParallelizabilitySection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationReport>,
    pub alarms: Vec<String>,
}

fn expr_text(e: &Expression) -> String {
    e.to_string()
}

fn basis_json(basis: &[DiagonalField]) -> Vec<Vec<Vec<String>>> {
    basis
        .iter()
        .map(|b| {
            b.components
                .iter()
                .map(|c| c.coeffs.iter().map(format_q).collect())
                .collect()
        })
        .collect()
}

/// Full pipeline: validate, solve, test parallelizability, classify by
/// both routes, profile factor actions.
pub fn analyze(spec: &WebSpec, degree_cap: Option<u32>) -> Result<AnalyzeReport, PipelineError> {
    let web = validate_web(spec).map_err(|e| PipelineError::InvalidWeb(e.to_string()))?;
    let sol = solve_symmetries(&web, degree_cap)
        .map_err(|e| PipelineError::Internal(e.to_string()))?;
    let mut alarms = Vec::new();
    let par = parallelizability_with(&web, &sol)
        .map_err(|e| PipelineError::Internal(e.to_string()))?;
    let verdict = match par.verdict {
        ParallelizabilityVerdict::ParallelizableToOrder(w) => {
            format!("parallelizable-to-order-{w}")
        }
        ParallelizabilityVerdict::NotParallelizable => "not-parallelizable".into(),
        ParallelizabilityVerdict::Inconsistent => {
            alarms.push("parallelizability branches disagree".into());
            "inconsistent".into()
        }
    };
    let is_par = matches!(
        par.verdict,
        ParallelizabilityVerdict::ParallelizableToOrder(_)
    );
    if !sol.stabilized {
        alarms.push(format!(
            "solver dimension did not stabilize: {:?}",
            sol.dims_by_order
        ));
    }
    let classification = if is_par || sol.dim() == 0 {
        None
    } else {
        match classify_both_routes(&web, &sol) {
            Ok((mut decomp, route_b, bound_report)) => {
                let routes_agree = decomp.counts() == route_b;
                if !routes_agree {
                    alarms.push(format!(
                        "classifier routes disagree: invariants {:?} vs blocks {:?}",
                        decomp.counts(),
                        route_b
                    ));
                }
                if let Err(e) = factor_action_profile(&mut decomp, &sol, &web) {
                    alarms.push(format!("action profile: {e}"));
                }
                Some(ClassificationReport {
                    s: decomp.s,
                    n: decomp.n,
                    c: decomp.c,
                    factors: decomp.factors.clone(),
                    block_route_counts: route_b,
                    routes_agree,
                    bound: bound_report,
                })
            }
            Err(e) => {
                alarms.push(format!("classification failed: {e}"));
                None
            }
        }
    };
    Ok(AnalyzeReport {
        tool: ToolInfo::new(spec.order, sol.degree_cap),
        n: spec.n,
        f: expr_text(&spec.f),
        base: spec.base.iter().map(format_q).collect(),
        partials: web.partials.iter().map(format_q).collect(),
        solver: SolverSection {
            dim: sol.dim(),
            dims_by_order: sol.dims_by_order.clone(),
            stabilized: sol.stabilized,
            closure: format!("{:?}", sol.closure),
            orbit_rank: orbit_rank(&sol),
            basis: basis_json(&sol.basis),
        },
        parallelizability: ParallelizabilitySection {
            verdict,
            vanishing_combination: par.vanishing_combination,
            normal_form_linear: par.normal_form_linear,
        },
        classification,
        alarms,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalFormReport {
    pub tool: ToolInfo,
    pub n: usize,
    pub f: String,
    pub base: Vec<String>,
    /// Normalized jet in the dump format: one `coeff  [exponents]` line
    /// per monomial, graded-lexicographic order.
    pub nf: String,
    pub g: Vec<Vec<String>>,
    pub theta: Vec<String>,
    pub a_quadratic: Vec<(usize, usize, String)>,
    pub linear_to_order: u32,
    pub reconstruction_exact: bool,
}

pub fn normal_form(spec: &WebSpec) -> Result<NormalFormReport, PipelineError> {
    let web = validate_web(spec).map_err(|e| PipelineError::InvalidWeb(e.to_string()))?;
    let nf = compute_normal_form(&web).map_err(|e| PipelineError::Internal(e.to_string()))?;
    Ok(NormalFormReport {
        tool: ToolInfo::new(spec.order, spec.order - 1),
        n: spec.n,
        f: expr_text(&spec.f),
        base: spec.base.iter().map(format_q).collect(),
        nf: nf.nf.to_string(),
        g: nf
            .g
            .iter()
            .map(|u| u.coeffs.iter().map(format_q).collect())
            .collect(),
        theta: nf.theta.coeffs.iter().map(format_q).collect(),
        a_quadratic: nf
            .a_quadratic
            .iter()
            .map(|((i, j), v)| (*i, *j, format_q(v)))
            .collect(),
        linear_to_order: nf.linear_to_order,
        reconstruction_exact: true,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ParallelizableReport {
    pub tool: ToolInfo,
    pub n: usize,
    pub f: String,
    pub verdict: String,
    pub vanishing_combination: bool,
    pub normal_form_linear: bool,
    pub solver_dim: usize,
    pub stabilized: bool,
    pub alarm: bool,
}

pub fn parallelizable(spec: &WebSpec) -> Result<ParallelizableReport, PipelineError> {
    let web = validate_web(spec).map_err(|e| PipelineError::InvalidWeb(e.to_string()))?;
    let sol = solve_symmetries(&web, None).map_err(|e| PipelineError::Internal(e.to_string()))?;
    let par = parallelizability_with(&web, &sol)
        .map_err(|e| PipelineError::Internal(e.to_string()))?;
    let (verdict, alarm) = match par.verdict {
        ParallelizabilityVerdict::ParallelizableToOrder(w) => {
            (format!("parallelizable-to-order-{w}"), false)
        }
        ParallelizabilityVerdict::NotParallelizable => ("not-parallelizable".into(), false),
        ParallelizabilityVerdict::Inconsistent => ("inconsistent".into(), true),
    };
    Ok(ParallelizableReport {
        tool: ToolInfo::new(spec.order, sol.degree_cap),
        n: spec.n,
        f: expr_text(&spec.f),
        verdict,
        vanishing_combination: par.vanishing_combination,
        normal_form_linear: par.normal_form_linear,
        solver_dim: sol.dim(),
        stabilized: sol.stabilized,
        alarm,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldCheckReport {
    pub tool: ToolInfo,
    pub n: usize,
    pub f: String,
    pub passed: bool,
    pub exact: bool,
    pub order_checked: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_degree_bound: Option<u32>,
    pub xf_is_zero: bool,
    pub xf_zero_exact: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub induced_phi: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_kind: Option<String>,
}

pub fn verify_field(spec: &WebSpec, field: &DiagonalField) -> Result<FieldCheckReport, PipelineError> {
    let web = validate_web(spec).map_err(|e| PipelineError::InvalidWeb(e.to_string()))?;
    let cert = is_symmetry(field, &web).map_err(|e| PipelineError::Internal(e.to_string()))?;
    let (phi, kind) = if cert.passed {
        match crate::symmetry::induced_phi(field, &web) {
            Ok(p) => {
                let kind = crate::symmetry::classify_phi(&p).to_string();
                (Some(p.coeffs.iter().map(format_q).collect()), Some(kind))
            }
            Err(_) => (None, None),
        }
    } else {
        (None, None)
    };
    Ok(FieldCheckReport {
        tool: ToolInfo::new(spec.order, spec.order - 1),
        n: spec.n,
        f: expr_text(&spec.f),
        passed: cert.passed,
        exact: cert.exact,
        order_checked: cert.order_checked,
        residual_degree_bound: cert.residual_degree_bound,
        xf_is_zero: cert.xf_is_zero,
        xf_zero_exact: cert.xf_zero_exact,
        first_failure: cert
            .first_failure
            .map(|(i, j, m, v)| format!("pair ({i}, {j}), monomial {m:?}, coefficient {v}")),
        induced_phi: phi,
        phi_kind: kind,
    })
}

/// Renders any serializable report as stable pretty JSON.
pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn web_spec_parsing() {
        let v: Value = serde_json::from_str(
            r#"{"n": 3, "f": "x1 + x2 + x3", "base": ["0", 0, "1/2"], "order": 6}"#,
        )
        .unwrap();
        let spec = web_spec_from_json(&v).unwrap();
        assert_eq!(spec.n, 3);
        assert_eq!(spec.order, 6);
        assert_eq!(spec.base[2], crate::rat::qr(1, 2));
        // tree form
        let v2: Value = serde_json::from_str(
            r#"{"n": 2, "f": {"op": "add", "args": [{"var": 1}, {"var": 2}]}, "base": [0, 0]}"#,
        )
        .unwrap();
        let spec2 = web_spec_from_json(&v2).unwrap();
        assert_eq!(spec2.order, DEFAULT_ORDER);
    }

    #[test]
    fn analyze_report_is_deterministic() {
        let v: Value = serde_json::from_str(
            r#"{"n": 3, "f": "x1 + x2 + x3", "base": [0, 0, 0], "order": 6}"#,
        )
        .unwrap();
        let spec = web_spec_from_json(&v).unwrap();
        let a = to_json(&analyze(&spec, None).unwrap());
        let b = to_json(&analyze(&spec, None).unwrap());
        assert_eq!(a, b);
        assert!(a.contains("\"dim\": 4"));
    }

    #[test]
    fn field_check_report() {
        let v: Value = serde_json::from_str(
            r#"{"n": 2, "f": "x1 + x2", "base": [0, 0], "order": 6}"#,
        )
        .unwrap();
        let spec = web_spec_from_json(&v).unwrap();
        let fv: Value =
            serde_json::from_str(r#"{"components": [[1], ["1"]]}"#).unwrap();
        let field = field_from_json(&fv, &spec).unwrap();
        let rep = verify_field(&spec, &field).unwrap();
        assert!(rep.passed);
        assert!(rep.exact);
    }
}
