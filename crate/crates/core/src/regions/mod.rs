//! Rate regions: the Slepian-Wolf source-coding region, the decode-forward and
//! compress-forward transmissibility conditions, the raw per-error-event
//! systems they summarize, and exact elimination between the two.

mod capacity;
mod fm;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::{opt_inf, sig};
use crate::model::{self, SourceStats, U1, U2, W0, W1, W2, X1, X2, Y1, Y2, Y3, YT1, YT2};
use crate::prob::{total_variation, Dist, InfoCalc};

pub use capacity::{mac_sum_capacity, mac_sum_capacity_bounds, CapacityBounds};
pub use fm::{fm_eliminate, system_feasible, SystemVerdict};

/// Rate variable names of the compress-forward raw system.
pub const R1: &str = "R1";
pub const R2: &str = "R2";
pub const RT1: &str = "RT1";
pub const RT2: &str = "RT2";
pub const RP1: &str = "RP1";
pub const RP2: &str = "RP2";
pub const CF_RATE_VARS: [&str; 6] = [R1, R2, RT1, RT2, RP1, RP2];

/// Numerical tolerances shared by every evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// A constraint holds iff its margin exceeds this.
    pub feas: f64,
    /// A required rate at or below this needs no resources.
    pub zero: f64,
    /// Largest total-variation distance accepted as independence.
    pub indep: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feas: 1e-9,
            zero: 1e-12,
            indep: 1e-6,
        }
    }
}

/// One linear inequality `Σ coeffs[v]·v ≤ rhs` (or `<` when strict).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IneqDoc")]
pub struct LinIneq {
    pub label: String,
    pub coeffs: BTreeMap<String, f64>,
    pub rhs: f64,
    pub strict: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IneqDoc {
    label: String,
    #[serde(default)]
    coeffs: BTreeMap<String, f64>,
    rhs: f64,
    #[serde(default)]
    strict: bool,
    #[serde(default)]
    sense: Option<String>,
}

impl TryFrom<IneqDoc> for LinIneq {
    type Error = Error;
    fn try_from(d: IneqDoc) -> Result<Self> {
        let flip = match d.sense.as_deref() {
            None | Some("le") => false,
            Some("ge") => true,
            Some(other) => {
                return Err(Error::InvalidDocument(format!(
                    "inequality `{}`: sense must be \"le\" or \"ge\", got \"{other}\"",
                    d.label
                )))
            }
        };
        if !d.rhs.is_finite() || d.coeffs.values().any(|c| !c.is_finite()) {
            return Err(Error::InvalidDocument(format!("inequality `{}` has non-finite numbers", d.label)));
        }
        let s = if flip { -1.0 } else { 1.0 };
        Ok(LinIneq {
            label: d.label,
            coeffs: d
                .coeffs
                .into_iter()
                .filter(|(_, c)| *c != 0.0)
                .map(|(k, c)| (k, s * c))
                .collect(),
            rhs: s * d.rhs,
            strict: d.strict,
        })
    }
}

impl LinIneq {
    /// `Σ terms ≤ rhs` (strict: `<`).
    pub fn le(label: &str, terms: &[(&str, f64)], rhs: f64, strict: bool) -> Self {
        let mut coeffs = BTreeMap::new();
        for &(v, c) in terms {
            *coeffs.entry(v.to_string()).or_insert(0.0) += c;
        }
        coeffs.retain(|_, c| *c != 0.0);
        Self {
            label: label.to_string(),
            coeffs,
            rhs,
            strict,
        }
    }

    /// `Σ terms ≥ rhs` (strict: `>`), stored negated.
    pub fn ge(label: &str, terms: &[(&str, f64)], rhs: f64, strict: bool) -> Self {
        let neg: Vec<(&str, f64)> = terms.iter().map(|&(v, c)| (v, -c)).collect();
        Self::le(label, &neg, -rhs, strict)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, var: &str) -> f64 {
        self.coeffs.get(var).copied().unwrap_or(0.0)
    }

    /// Slack `rhs − Σ coeffs·x` at a point; missing variables count as zero.
    pub fn slack(&self, point: &BTreeMap<String, f64>) -> f64 {
        self.rhs
            - self
                .coeffs
                .iter()
                .map(|(v, c)| c * point.get(v).copied().unwrap_or(0.0))
                .sum::<f64>()
    }

    /// Whether the point satisfies the inequality up to `tol`.
    pub fn holds_at(&self, point: &BTreeMap<String, f64>, tol: f64) -> bool {
        let s = self.slack(point);
        if self.strict {
            s > tol
        } else {
            s >= -tol
        }
    }
}

/// A list of linear inequalities over named rate variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemDoc")]
pub struct RateConstraintSystem {
    pub vars: Vec<String>,
    pub ineqs: Vec<LinIneq>,
    /// Implicit `v ≥ 0` for every variable.
    pub nonneg: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemDoc {
    vars: Vec<String>,
    ineqs: Vec<LinIneq>,
    #[serde(default)]
    nonneg: bool,
}

impl TryFrom<SystemDoc> for RateConstraintSystem {
    type Error = Error;
    fn try_from(d: SystemDoc) -> Result<Self> {
        RateConstraintSystem::new(d.vars, d.ineqs, d.nonneg)
    }
}

impl RateConstraintSystem {
    /// Validates variable and label uniqueness and that every coefficient
    /// refers to a declared variable.
    pub fn new(vars: Vec<String>, ineqs: Vec<LinIneq>, nonneg: bool) -> Result<Self> {
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].contains(v) {
                return Err(Error::DuplicateVariable(v.clone()));
            }
        }
        for (i, q) in ineqs.iter().enumerate() {
            if ineqs[..i].iter().any(|p| p.label == q.label) {
                return Err(Error::InvalidDocument(format!("duplicate inequality label `{}`", q.label)));
            }
            if let Some(v) = q.coeffs.keys().find(|v| !vars.contains(v)) {
                return Err(Error::UnknownVariable(v.clone()));
            }
        }
        Ok(Self { vars, ineqs, nonneg })
    }

    pub fn load(doc: &str) -> Result<Self> {
        Ok(serde_json::from_str(doc)?)
    }

    pub fn get(&self, label: &str) -> Option<&LinIneq> {
        self.ineqs.iter().find(|q| q.label == label)
    }

    /// Whether a point satisfies every inequality (and nonnegativity) up to `tol`.
    pub fn holds_at(&self, point: &BTreeMap<String, f64>, tol: f64) -> bool {
        if self.nonneg && self.vars.iter().any(|v| point.get(v).copied().unwrap_or(0.0) < -tol) {
            return false;
        }
        self.ineqs.iter().all(|q| q.holds_at(point, tol))
    }
}

/// Second argument of a min-form bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    #[serde(with = "sig")]
    pub rhs: f64,
    #[serde(with = "sig")]
    pub margin: f64,
}

/// Evaluation of one labeled constraint `lhs < rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintEval {
    pub label: String,
    /// Required rate.
    #[serde(with = "sig")]
    pub lhs: f64,
    /// Available rate.
    #[serde(with = "sig")]
    pub rhs: f64,
    #[serde(with = "sig")]
    pub margin: f64,
    pub satisfied: bool,
    pub vacuous: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branches: Option<Vec<Branch>>,
}

impl ConstraintEval {
    fn new(label: &str, lhs: f64, rhs: f64, tol: &Tolerances) -> Self {
        let margin = rhs - lhs;
        let vacuous = lhs <= tol.zero;
        Self {
            label: label.to_string(),
            lhs,
            rhs,
            margin,
            satisfied: vacuous || margin > tol.feas,
            vacuous,
            branches: None,
        }
    }

    /// `lhs < min(rhs…)`; the margin is the smallest branch margin.
    fn min_form(label: &str, lhs: f64, rhs: &[f64], tol: &Tolerances) -> Self {
        let m = rhs.iter().copied().fold(f64::INFINITY, f64::min);
        let mut c = Self::new(label, lhs, m, tol);
        c.branches = Some(
            rhs.iter()
                .map(|&r| Branch {
                    rhs: r,
                    margin: r - lhs,
                })
                .collect(),
        );
        c
    }
}

/// Outcome of the independence requirement on the two quantized outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceCheck {
    #[serde(with = "sig")]
    pub tv: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Per-constraint margins and the overall verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub strategy: String,
    pub constraints: Vec<ConstraintEval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub independence: Option<IndependenceCheck>,
    pub feasible: bool,
    /// Smallest margin over non-vacuous constraints; `null` when all are vacuous.
    #[serde(with = "opt_inf")]
    pub min_margin: f64,
}

impl FeasibilityReport {
    fn assemble(strategy: &str, constraints: Vec<ConstraintEval>, independence: Option<IndependenceCheck>) -> Self {
        let feasible =
            constraints.iter().all(|c| c.satisfied) && independence.as_ref().is_none_or(|i| i.passed);
        let min_margin = constraints
            .iter()
            .filter(|c| !c.vacuous)
            .map(|c| c.margin)
            .fold(f64::INFINITY, f64::min);
        Self {
            strategy: strategy.to_string(),
            constraints,
            independence,
            feasible,
            min_margin,
        }
    }

    pub fn get(&self, label: &str) -> Option<&ConstraintEval> {
        self.constraints.iter().find(|c| c.label == label)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Source-coding region: `R1 ≥ H(S1|S2)`, `R2 ≥ H(S2|S1)`, `R1 + R2 ≥ H(S1,S2)`.
pub fn slepian_wolf_region(st: &SourceStats) -> RateConstraintSystem {
    RateConstraintSystem {
        vars: vec![R1.into(), R2.into()],
        ineqs: sw_ineqs(st),
        nonneg: true,
    }
}

fn sw_ineqs(st: &SourceStats) -> Vec<LinIneq> {
    vec![
        LinIneq::ge("5a", &[(R1, 1.0)], st.h_s1_given_s2, false),
        LinIneq::ge("5b", &[(R2, 1.0)], st.h_s2_given_s1, false),
        LinIneq::ge("5c", &[(R1, 1.0), (R2, 1.0)], st.h_joint, false),
    ]
}

/// Mutual-information terms of the decode-forward conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DfTerms {
    /// I(X2; Y1 | W, X1): node 1 learning node 2's fresh index.
    pub feedback_to_1: f64,
    /// I(X1; Y2 | W, X2): node 2 learning node 1's fresh index.
    pub feedback_to_2: f64,
    /// I(W0; Y3 | W1, W2).
    pub w0: f64,
    /// I(W1; Y3 | W0, W2) + I(X1; Y3 | W, X2).
    pub dest_1: f64,
    /// I(W2; Y3 | W0, W1) + I(X2; Y3 | W, X1).
    pub dest_2: f64,
    /// I(W0, W1; Y3 | W2) + I(X1; Y3 | W, X2).
    pub dest_01: f64,
    /// I(W0, W2; Y3 | W1) + I(X2; Y3 | W, X1).
    pub dest_02: f64,
    /// I(W1, W2; Y3 | W0) + I(X1, X2; Y3 | W).
    pub dest_12: f64,
    /// I(X1, X2; Y3).
    pub dest_sum: f64,
}

pub fn df_terms(joint: &Dist) -> Result<DfTerms> {
    model::require_vars(joint, &model::DF_VARS)?;
    let c = InfoCalc::new(joint);
    let w = [W0, W1, W2];
    let wx1 = [W0, W1, W2, X1];
    let wx2 = [W0, W1, W2, X2];
    let x1_y3 = c.cmi(&[X1], &[Y3], &wx2)?;
    let x2_y3 = c.cmi(&[X2], &[Y3], &wx1)?;
    Ok(DfTerms {
        feedback_to_1: c.cmi(&[X2], &[Y1], &wx1)?,
        feedback_to_2: c.cmi(&[X1], &[Y2], &wx2)?,
        w0: c.cmi(&[W0], &[Y3], &[W1, W2])?,
        dest_1: c.cmi(&[W1], &[Y3], &[W0, W2])? + x1_y3,
        dest_2: c.cmi(&[W2], &[Y3], &[W0, W1])? + x2_y3,
        dest_01: c.cmi(&[W0, W1], &[Y3], &[W2])? + x1_y3,
        dest_02: c.cmi(&[W0, W2], &[Y3], &[W1])? + x2_y3,
        dest_12: c.cmi(&[W1, W2], &[Y3], &[W0])? + c.cmi(&[X1, X2], &[Y3], &w)?,
        dest_sum: c.cmi(&[X1, X2], &[Y3], &[])?,
    })
}

/// Decode-forward conditions in their stated form, with the two min-forms.
pub fn df_constraints(joint: &Dist, st: &SourceStats) -> Result<FeasibilityReport> {
    df_constraints_with(joint, st, &Tolerances::default())
}

pub fn df_constraints_with(joint: &Dist, st: &SourceStats, tol: &Tolerances) -> Result<FeasibilityReport> {
    let t = df_terms(joint)?;
    let cs = vec![
        ConstraintEval::min_form("1a", st.h_s1_given_s2, &[t.feedback_to_2, t.dest_1], tol),
        ConstraintEval::min_form("1b", st.h_s2_given_s1, &[t.feedback_to_1, t.dest_2], tol),
        ConstraintEval::new("1c", st.i_s1_s2, t.w0, tol),
        ConstraintEval::new("1d", st.h_s1, t.dest_01, tol),
        ConstraintEval::new("1e", st.h_s2, t.dest_02, tol),
        ConstraintEval::new("1f", st.h_s1_given_s2 + st.h_s2_given_s1, t.dest_12, tol),
        ConstraintEval::new("1g", st.h_joint, t.dest_sum, tol),
    ];
    Ok(FeasibilityReport::assemble("df", cs, None))
}

/// Decode-forward conditions one per decoding error event: the two feedback
/// decoders followed by the seven destination events.
pub fn df_raw_constraints(joint: &Dist, st: &SourceStats) -> Result<FeasibilityReport> {
    df_raw_constraints_with(joint, st, &Tolerances::default())
}

pub fn df_raw_constraints_with(joint: &Dist, st: &SourceStats, tol: &Tolerances) -> Result<FeasibilityReport> {
    let t = df_terms(joint)?;
    let cs = vec![
        ConstraintEval::new("2", st.h_s2_given_s1, t.feedback_to_1, tol),
        ConstraintEval::new("3", st.h_s1_given_s2, t.feedback_to_2, tol),
        ConstraintEval::new("4a", st.i_s1_s2, t.w0, tol),
        ConstraintEval::new("4b", st.h_s1_given_s2, t.dest_1, tol),
        ConstraintEval::new("4c", st.h_s2_given_s1, t.dest_2, tol),
        ConstraintEval::new("4d", st.h_s1, t.dest_01, tol),
        ConstraintEval::new("4e", st.h_s2, t.dest_02, tol),
        ConstraintEval::new("4f", st.h_s1_given_s2 + st.h_s2_given_s1, t.dest_12, tol),
        ConstraintEval::new("4g", st.h_joint, t.dest_sum, tol),
    ];
    Ok(FeasibilityReport::assemble("df-raw", cs, None))
}

/// Mutual-information terms of the compress-forward conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfTerms {
    /// I(X1; Ỹ2, Y3 | U1, X2).
    pub msg_1: f64,
    /// I(X2; Ỹ1, Y3 | U2, X1).
    pub msg_2: f64,
    /// I(X1, X2; Ỹ1, Ỹ2, Y3 | U1, U2).
    pub msg_sum: f64,
    /// I(Ỹ1; Y1 | X1): quantization rate at node 1.
    pub quant_1: f64,
    /// I(Ỹ2; Y2 | X2).
    pub quant_2: f64,
    /// I(Ỹ1; Y3 | Ỹ2, U1, U2): destination side information on Ỹ1.
    pub side_1: f64,
    /// I(Ỹ2; Y3 | Ỹ1, U1, U2).
    pub side_2: f64,
    /// I(Ỹ1, Ỹ2; Y3 | U1, U2).
    pub side_sum: f64,
    /// I(U1; Y3 | U2): bin-index capacity for node 1.
    pub bin_1: f64,
    /// I(U2; Y3 | U1).
    pub bin_2: f64,
    /// I(U1, U2; Y3).
    pub bin_sum: f64,
    /// Total-variation distance between p(ỹ1, ỹ2) and p(ỹ1)p(ỹ2).
    pub tv_indep: f64,
}

pub fn cf_terms(joint: &Dist) -> Result<CfTerms> {
    model::require_vars(joint, &model::CF_VARS)?;
    let c = InfoCalc::new(joint);
    let u = [U1, U2];
    let yt = joint.marginalize(&[YT1, YT2])?;
    let prod = yt.product_of_marginals(&[&[YT1], &[YT2]])?;
    Ok(CfTerms {
        msg_1: c.cmi(&[X1], &[YT2, Y3], &[U1, X2])?,
        msg_2: c.cmi(&[X2], &[YT1, Y3], &[U2, X1])?,
        msg_sum: c.cmi(&[X1, X2], &[YT1, YT2, Y3], &u)?,
        quant_1: c.cmi(&[YT1], &[Y1], &[X1])?,
        quant_2: c.cmi(&[YT2], &[Y2], &[X2])?,
        side_1: c.cmi(&[YT1], &[Y3], &[YT2, U1, U2])?,
        side_2: c.cmi(&[YT2], &[Y3], &[YT1, U1, U2])?,
        side_sum: c.cmi(&[YT1, YT2], &[Y3], &u)?,
        bin_1: c.cmi(&[U1], &[Y3], &[U2])?,
        bin_2: c.cmi(&[U2], &[Y3], &[U1])?,
        bin_sum: c.cmi(&[U1, U2], &[Y3], &[])?,
        tv_indep: total_variation(&yt, &prod)?,
    })
}

/// Compress-forward conditions in their stated form plus the independence check.
pub fn cf_constraints(joint: &Dist, st: &SourceStats, tol_indep: f64) -> Result<FeasibilityReport> {
    let tol = Tolerances {
        indep: tol_indep,
        ..Tolerances::default()
    };
    cf_constraints_with(joint, st, &tol)
}

pub fn cf_constraints_with(joint: &Dist, st: &SourceStats, tol: &Tolerances) -> Result<FeasibilityReport> {
    let t = cf_terms(joint)?;
    Ok(cf_report_from_terms(&t, st, tol))
}

pub fn cf_report_from_terms(t: &CfTerms, st: &SourceStats, tol: &Tolerances) -> FeasibilityReport {
    let cs = vec![
        ConstraintEval::new("6a", st.h_s1_given_s2, t.msg_1, tol),
        ConstraintEval::new("6b", st.h_s2_given_s1, t.msg_2, tol),
        ConstraintEval::new("6c", st.h_joint, t.msg_sum, tol),
        ConstraintEval::new("7a", t.quant_1 - t.side_1, t.bin_1, tol),
        ConstraintEval::new("7b", t.quant_2 - t.side_2, t.bin_2, tol),
        ConstraintEval::new("7c", t.quant_1 + t.quant_2 - t.side_sum, t.bin_sum, tol),
    ];
    let independence = IndependenceCheck {
        tv: t.tv_indep,
        tol: tol.indep,
        passed: t.tv_indep <= tol.indep,
    };
    FeasibilityReport::assemble("cf", cs, Some(independence))
}

/// Raw compress-forward system over the six rates `R1, R2` (source-coded
/// message rates), `RT1, RT2` (quantization index rates) and `RP1, RP2`
/// (bin index rates), with every information term evaluated.
pub fn cf_raw_system(joint: &Dist, st: &SourceStats) -> Result<RateConstraintSystem> {
    let t = cf_terms(joint)?;
    Ok(cf_raw_system_from_terms(&t, st, &Tolerances::default()))
}

/// Builds the raw system from precomputed terms. A strict inequality whose
/// information constant is at most `tol.zero` is emitted non-strict, so that a
/// zero-capacity resource can still carry a zero rate.
pub fn cf_raw_system_from_terms(t: &CfTerms, st: &SourceStats, tol: &Tolerances) -> RateConstraintSystem {
    let strict = |k: f64| k > tol.zero;
    let mut ineqs = sw_ineqs(st);
    ineqs.extend([
        LinIneq::ge("8", &[(RT1, 1.0)], t.quant_1, strict(t.quant_1)),
        LinIneq::ge("9", &[(RT2, 1.0)], t.quant_2, strict(t.quant_2)),
        LinIneq::le("10a", &[(RP1, 1.0)], t.bin_1, strict(t.bin_1)),
        LinIneq::le("10b", &[(RP2, 1.0)], t.bin_2, strict(t.bin_2)),
        LinIneq::le("10c", &[(RP1, 1.0), (RP2, 1.0)], t.bin_sum, strict(t.bin_sum)),
        LinIneq::le("11a", &[(RT1, 1.0), (RP1, -1.0)], t.side_1, strict(t.side_1)),
        LinIneq::le("11b", &[(RT2, 1.0), (RP2, -1.0)], t.side_2, strict(t.side_2)),
        LinIneq::le(
            "11c",
            &[(RT1, 1.0), (RT2, 1.0), (RP1, -1.0), (RP2, -1.0)],
            t.side_sum,
            strict(t.side_sum),
        ),
        LinIneq::le("12a", &[(R1, 1.0)], t.msg_1, strict(t.msg_1)),
        LinIneq::le("12b", &[(R2, 1.0)], t.msg_2, strict(t.msg_2)),
        LinIneq::le("12c", &[(R1, 1.0), (R2, 1.0)], t.msg_sum, strict(t.msg_sum)),
    ]);
    RateConstraintSystem {
        vars: CF_RATE_VARS.iter().map(|s| s.to_string()).collect(),
        ineqs,
        nonneg: true,
    }
}
