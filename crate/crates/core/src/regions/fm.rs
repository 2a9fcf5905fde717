//! Fourier-Motzkin elimination with witness back-substitution.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{LinIneq, RateConstraintSystem};
use crate::error::{Error, Result};
use crate::fmt::sig;

/// Tolerance used to decide constant inequalities `0 ⋖ rhs`.
const CONST_TOL: f64 = 1e-9;
/// Coefficients smaller than this after a combination are treated as cancelled.
const COEFF_EPS: f64 = 1e-12;

fn constant_holds(q: &LinIneq) -> bool {
    if q.strict {
        q.rhs > CONST_TOL
    } else {
        q.rhs >= -CONST_TOL
    }
}

fn nonneg_ineq(var: &str) -> LinIneq {
    LinIneq::le(&format!("{var}>=0"), &[(var, -1.0)], 0.0, false)
}

/// Scales so the largest coefficient magnitude is one.
fn normalize(mut q: LinIneq) -> LinIneq {
    q.coeffs.retain(|_, c| c.abs() > COEFF_EPS);
    let m = q.coeffs.values().fold(0.0f64, |a, c| a.max(c.abs()));
    if m > 0.0 && m != 1.0 {
        for c in q.coeffs.values_mut() {
            *c /= m;
        }
        q.rhs /= m;
    }
    q
}

/// Drops satisfied constants and keeps only the tightest inequality per
/// coefficient vector.
fn simplify(ineqs: Vec<LinIneq>) -> Vec<LinIneq> {
    let mut out: Vec<LinIneq> = Vec::with_capacity(ineqs.len());
    let mut by_key: HashMap<Vec<(String, u64)>, usize> = HashMap::new();
    for q in ineqs {
        let q = normalize(q);
        if q.is_constant() && constant_holds(&q) {
            continue;
        }
        let key: Vec<(String, u64)> = q.coeffs.iter().map(|(k, c)| (k.clone(), c.to_bits())).collect();
        match by_key.get(&key) {
            Some(&i) => {
                let p = &mut out[i];
                if q.rhs < p.rhs || (q.rhs == p.rhs && q.strict && !p.strict) {
                    *p = q;
                }
            }
            None => {
                by_key.insert(key, out.len());
                out.push(q);
            }
        }
    }
    out
}

/// Projects `var` out of the system by pairing each lower bound with each
/// upper bound. A derived inequality is strict if either parent is.
pub fn fm_eliminate(sys: &RateConstraintSystem, var: &str) -> Result<RateConstraintSystem> {
    if !sys.vars.iter().any(|v| v == var) {
        return Err(Error::UnknownVariable(var.to_string()));
    }
    let mut all = sys.ineqs.clone();
    if sys.nonneg {
        all.push(nonneg_ineq(var));
    }
    let (mut lower, mut upper, mut rest) = (Vec::new(), Vec::new(), Vec::new());
    for q in all {
        let a = q.coeff(var);
        if a.abs() <= COEFF_EPS {
            let mut q = q;
            q.coeffs.remove(var);
            rest.push(q);
        } else if a < 0.0 {
            lower.push(q);
        } else {
            upper.push(q);
        }
    }
    for lo in &lower {
        let la = -lo.coeff(var);
        for up in &upper {
            let ua = up.coeff(var);
            let mut coeffs: BTreeMap<String, f64> = BTreeMap::new();
            for (v, c) in &lo.coeffs {
                *coeffs.entry(v.clone()).or_insert(0.0) += c / la;
            }
            for (v, c) in &up.coeffs {
                *coeffs.entry(v.clone()).or_insert(0.0) += c / ua;
            }
            coeffs.remove(var);
            rest.push(LinIneq {
                label: format!("{}+{}", lo.label, up.label),
                coeffs,
                rhs: lo.rhs / la + up.rhs / ua,
                strict: lo.strict || up.strict,
            });
        }
    }
    let mut ineqs = simplify(rest);
    // keep labels unique
    let mut seen: HashMap<String, usize> = HashMap::new();
    for q in &mut ineqs {
        let n = seen.entry(q.label.clone()).or_insert(0);
        if *n > 0 {
            q.label = format!("{}#{}", q.label, n);
        }
        *n += 1;
    }
    Ok(RateConstraintSystem {
        vars: sys.vars.iter().filter(|v| *v != var).cloned().collect(),
        ineqs,
        nonneg: sys.nonneg,
    })
}

/// Verdict of [`system_feasible`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemVerdict {
    pub feasible: bool,
    /// A point satisfying the system, present iff feasible.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "witness_fmt")]
    pub witness: Option<BTreeMap<String, f64>>,
    /// Contradictory constant inequalities left after eliminating every variable.
    pub conflicts: Vec<Conflict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conflict {
    pub label: String,
    #[serde(with = "sig")]
    pub rhs: f64,
    pub strict: bool,
}

mod witness_fmt {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(w: &Option<BTreeMap<String, f64>>, s: S) -> Result<S::Ok, S::Error> {
        w.as_ref()
            .map(|m| {
                m.iter()
                    .map(|(k, v)| (k.clone(), crate::fmt::round_sig(*v)))
                    .collect::<BTreeMap<_, _>>()
            })
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BTreeMap<String, f64>>, D::Error> {
        Option::<BTreeMap<String, f64>>::deserialize(d)
    }
}

/// Picks the next variable to eliminate: fewest generated pairs.
fn pick(sys: &RateConstraintSystem) -> usize {
    let mut best = (usize::MAX, 0);
    for (i, v) in sys.vars.iter().enumerate() {
        let (mut lo, mut up) = (usize::from(sys.nonneg), 0);
        for q in &sys.ineqs {
            let a = q.coeff(v);
            if a < -COEFF_EPS {
                lo += 1;
            } else if a > COEFF_EPS {
                up += 1;
            }
        }
        let cost = lo * up;
        if cost < best.0 {
            best = (cost, i);
        }
    }
    best.1
}

/// Decides feasibility by eliminating every variable, then back-substitutes
/// to build a witness: each variable takes the midpoint of its admissible
/// interval, `lower + 1` if unbounded above, `upper - 1` if unbounded below,
/// and 0 if unconstrained.
pub fn system_feasible(sys: &RateConstraintSystem) -> SystemVerdict {
    let mut stages = vec![sys.clone()];
    let mut order = Vec::new();
    while !stages.last().expect("nonempty").vars.is_empty() {
        let cur = stages.last().expect("nonempty");
        let v = cur.vars[pick(cur)].clone();
        let next = fm_eliminate(cur, &v).expect("variable present");
        order.push(v);
        stages.push(next);
    }
    let last = stages.last().expect("nonempty");
    let conflicts: Vec<Conflict> = last
        .ineqs
        .iter()
        .filter(|q| !constant_holds(q))
        .map(|q| Conflict {
            label: q.label.clone(),
            rhs: q.rhs,
            strict: q.strict,
        })
        .collect();
    if !conflicts.is_empty() {
        return SystemVerdict {
            feasible: false,
            witness: None,
            conflicts,
        };
    }
    let mut point: BTreeMap<String, f64> = BTreeMap::new();
    for (stage, v) in stages.iter().zip(&order).rev() {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        if stage.nonneg {
            lo = 0.0;
        }
        for q in &stage.ineqs {
            let a = q.coeff(v);
            if a.abs() <= COEFF_EPS {
                continue;
            }
            let rest: f64 = q
                .coeffs
                .iter()
                .filter(|(k, _)| *k != v)
                .map(|(k, c)| c * point.get(k).copied().unwrap_or(0.0))
                .sum();
            let bound = (q.rhs - rest) / a;
            if a > 0.0 {
                hi = hi.min(bound);
            } else {
                lo = lo.max(bound);
            }
        }
        let x = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo + 1.0,
            (false, true) => hi - 1.0,
            (false, false) => 0.0,
        };
        point.insert(v.clone(), x);
    }
    SystemVerdict {
        feasible: true,
        witness: Some(point),
        conflicts: Vec::new(),
    }
}
