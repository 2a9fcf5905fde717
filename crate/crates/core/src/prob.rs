//! Exact probability calculus over small finite alphabets.
//!
//! A [`Dist`] is a dense joint pmf stored in row-major order of its variable
//! list (the last variable varies fastest). A [`Factor`] is a conditional pmf
//! of a set of child variables given a set of parent variables, stored with
//! the parent assignment as the major index. Every information quantity is
//! measured in bits.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when validating that a pmf sums to one.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Negative information values down to this threshold are treated as roundoff.
pub const NEGATIVE_INFO_TOL: f64 = 1e-12;

/// A named discrete variable with alphabet `{0, .., card-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub card: usize,
}

impl Variable {
    pub fn new(name: impl Into<String>, card: usize) -> Self {
        Self {
            name: name.into(),
            card,
        }
    }
}

fn check_vars(vars: &[Variable]) -> Result<usize> {
    let mut size = 1usize;
    for (i, v) in vars.iter().enumerate() {
        if v.card == 0 {
            return Err(Error::ZeroCardinality(v.name.clone()));
        }
        if vars[..i].iter().any(|w| w.name == v.name) {
            return Err(Error::DuplicateVariable(v.name.clone()));
        }
        size = size
            .checked_mul(v.card)
            .ok_or_else(|| Error::InvalidDocument("joint alphabet too large".into()))?;
    }
    Ok(size)
}

/// Validates a block of entries that must sum to one and renormalizes it in place.
fn normalize_block(block: &mut [f64], offset: usize) -> Result<()> {
    let mut sum = 0.0;
    for (i, &p) in block.iter().enumerate() {
        if p.is_nan() || p < 0.0 {
            return Err(Error::NegativeEntry {
                index: offset + i,
                value: p,
            });
        }
        sum += p;
    }
    if !sum.is_finite() || (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized { sum });
    }
    for p in block.iter_mut() {
        *p /= sum;
    }
    Ok(())
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Shannon entropy in bits of a pmf given as a slice, clamped at zero so a
/// near-point-mass never reports a negative value.
pub fn entropy_of(probs: &[f64]) -> f64 {
    probs.iter().map(|&p| plogp(p)).sum::<f64>().max(0.0)
}

/// Binary entropy function in bits.
pub fn binary_entropy(p: f64) -> f64 {
    plogp(p) + plogp(1.0 - p)
}

/// Dense joint pmf over an ordered list of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Dist {
    vars: Vec<Variable>,
    probs: Vec<f64>,
}

impl Dist {
    /// Validates and normalizes a joint pmf.
    pub fn new(vars: Vec<Variable>, mut probs: Vec<f64>) -> Result<Self> {
        let size = check_vars(&vars)?;
        if probs.len() != size {
            return Err(Error::LengthMismatch {
                expected: size,
                found: probs.len(),
            });
        }
        normalize_block(&mut probs, 0)?;
        Ok(Self { vars, probs })
    }

    pub fn uniform(vars: Vec<Variable>) -> Result<Self> {
        let size = check_vars(&vars)?;
        Ok(Self {
            vars,
            probs: vec![1.0 / size as f64; size],
        })
    }

    /// Point mass on the outcome with the given row-major index.
    pub fn point_mass(vars: Vec<Variable>, index: usize) -> Result<Self> {
        let size = check_vars(&vars)?;
        if index >= size {
            return Err(Error::LengthMismatch {
                expected: size,
                found: index + 1,
            });
        }
        let mut probs = vec![0.0; size];
        probs[index] = 1.0;
        Ok(Self { vars, probs })
    }

    /// Builds a Dist from entries already known to be a normalized pmf.
    pub(crate) fn from_parts_unchecked(vars: Vec<Variable>, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), vars.iter().map(|v| v.card).product::<usize>());
        Self { vars, probs }
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn var_names(&self) -> Vec<&str> {
        self.vars.iter().map(|v| v.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    fn indices(&self, names: &[&str]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.index_of(n)
                    .ok_or_else(|| Error::UnknownVariable((*n).to_string()))
            })
            .collect()
    }

    /// Marginal probabilities over the variables at `idxs`, in the given order.
    fn marginal_probs(&self, idxs: &[usize]) -> Vec<f64> {
        let k = self.vars.len();
        let mut out_stride = vec![0usize; k];
        let mut out_size = 1usize;
        for &i in idxs.iter().rev() {
            out_stride[i] = out_size;
            out_size *= self.vars[i].card;
        }
        if out_size == 1 {
            return vec![self.probs.iter().sum()];
        }
        if idxs.len() == k && idxs.iter().enumerate().all(|(a, &b)| a == b) {
            return self.probs.clone();
        }
        let cards: Vec<usize> = self.vars.iter().map(|v| v.card).collect();
        let mut out = vec![0.0; out_size];
        let mut digits = vec![0usize; k];
        let mut pos = 0usize;
        for &p in &self.probs {
            out[pos] += p;
            // advance the mixed-radix counter, last variable fastest
            let mut d = k;
            while d > 0 {
                d -= 1;
                digits[d] += 1;
                pos += out_stride[d];
                if digits[d] < cards[d] {
                    break;
                }
                digits[d] = 0;
                pos -= out_stride[d] * cards[d];
            }
        }
        out
    }

    /// Sums out every variable not in `keep`; the result follows the order of `keep`.
    pub fn marginalize(&self, keep: &[&str]) -> Result<Dist> {
        let idxs = self.indices(keep)?;
        for (i, &a) in idxs.iter().enumerate() {
            if idxs[..i].contains(&a) {
                return Err(Error::DuplicateVariable(self.vars[a].name.clone()));
            }
        }
        let vars = idxs.iter().map(|&i| self.vars[i].clone()).collect();
        Ok(Dist::from_parts_unchecked(vars, self.marginal_probs(&idxs)))
    }

    /// Joint entropy of `subset` in bits; the empty subset has entropy zero.
    pub fn entropy(&self, subset: &[&str]) -> Result<f64> {
        let mut idxs = self.indices(subset)?;
        idxs.sort_unstable();
        idxs.dedup();
        Ok(entropy_of(&self.marginal_probs(&idxs)))
    }

    /// I(A;B|C) in bits.
    pub fn cond_mutual_info(&self, a: &[&str], b: &[&str], c: &[&str]) -> Result<f64> {
        InfoCalc::new(self).cmi(a, b, c)
    }

    /// Product of the marginals over `groups`, each group a list of variable names.
    ///
    /// The result is laid out in the concatenated order of the groups.
    pub fn product_of_marginals(&self, groups: &[&[&str]]) -> Result<Dist> {
        let mut vars: Vec<Variable> = Vec::new();
        let mut probs = vec![1.0];
        for g in groups {
            let m = self.marginalize(g)?;
            let mut next = Vec::with_capacity(probs.len() * m.len());
            for &p in &probs {
                for &q in m.probs() {
                    next.push(p * q);
                }
            }
            probs = next;
            vars.extend(m.vars);
        }
        check_vars(&vars)?;
        Ok(Dist::from_parts_unchecked(vars, probs))
    }
}

/// Total variation distance ½ Σ |p1 − p2| between two pmfs of identical shape.
pub fn total_variation(d1: &Dist, d2: &Dist) -> Result<f64> {
    if d1.vars != d2.vars {
        return Err(Error::ShapeMismatch);
    }
    Ok(0.5
        * d1
            .probs
            .iter()
            .zip(&d2.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

/// Entropy evaluator that memoizes marginal entropies of one joint.
///
/// Region evaluation asks for many overlapping conditional mutual
/// informations of the same joint; this keeps each marginal to one pass.
pub struct InfoCalc<'a> {
    dist: &'a Dist,
    cache: RefCell<HashMap<u64, f64>>,
}

impl<'a> InfoCalc<'a> {
    pub fn new(dist: &'a Dist) -> Self {
        assert!(dist.vars.len() <= 64, "at most 64 variables supported");
        Self {
            dist,
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn dist(&self) -> &Dist {
        self.dist
    }

    fn mask(&self, names: &[&str]) -> Result<u64> {
        let mut m = 0u64;
        for n in names {
            let i = self
                .dist
                .index_of(n)
                .ok_or_else(|| Error::UnknownVariable((*n).to_string()))?;
            m |= 1 << i;
        }
        Ok(m)
    }

    fn entropy_mask(&self, mask: u64) -> f64 {
        if mask == 0 {
            return 0.0;
        }
        if let Some(&h) = self.cache.borrow().get(&mask) {
            return h;
        }
        let idxs: Vec<usize> = (0..self.dist.vars.len())
            .filter(|i| mask & (1 << i) != 0)
            .collect();
        let h = entropy_of(&self.dist.marginal_probs(&idxs));
        self.cache.borrow_mut().insert(mask, h);
        h
    }

    pub fn h(&self, names: &[&str]) -> Result<f64> {
        Ok(self.entropy_mask(self.mask(names)?))
    }

    /// I(A;B|C) = H(A,C) + H(B,C) − H(A,B,C) − H(C), clamped at zero for roundoff.
    pub fn cmi(&self, a: &[&str], b: &[&str], c: &[&str]) -> Result<f64> {
        let (ma, mb, mc) = (self.mask(a)?, self.mask(b)?, self.mask(c)?);
        for (x, y) in [(ma, mb), (ma, mc), (mb, mc)] {
            let overlap = x & y;
            if overlap != 0 {
                let i = overlap.trailing_zeros() as usize;
                return Err(Error::OverlappingSubsets(self.dist.vars[i].name.clone()));
            }
        }
        let v = self.entropy_mask(ma | mc) + self.entropy_mask(mb | mc)
            - self.entropy_mask(ma | mb | mc)
            - self.entropy_mask(mc);
        if v >= 0.0 {
            Ok(v)
        } else if v >= -NEGATIVE_INFO_TOL {
            Ok(0.0)
        } else {
            Err(Error::NegativeInformation(v))
        }
    }
}

/// Conditional pmf of `children` given `parents`.
///
/// Entries are indexed by the parent assignment (row-major over `parents`)
/// times the child alphabet size, plus the child assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    children: Vec<Variable>,
    parents: Vec<Variable>,
    probs: Vec<f64>,
}

impl Factor {
    pub fn new(children: Vec<Variable>, parents: Vec<Variable>, mut probs: Vec<f64>) -> Result<Self> {
        let all: Vec<Variable> = parents.iter().chain(children.iter()).cloned().collect();
        let size = check_vars(&all)?;
        if children.is_empty() {
            return Err(Error::InvalidDocument("factor without child variables".into()));
        }
        if probs.len() != size {
            return Err(Error::LengthMismatch {
                expected: size,
                found: probs.len(),
            });
        }
        let row = children.iter().map(|v| v.card).product::<usize>();
        for (r, block) in probs.chunks_mut(row).enumerate() {
            normalize_block(block, r * row)?;
        }
        Ok(Self {
            children,
            parents,
            probs,
        })
    }

    pub fn children(&self) -> &[Variable] {
        &self.children
    }

    pub fn parents(&self) -> &[Variable] {
        &self.parents
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn child_size(&self) -> usize {
        self.children.iter().map(|v| v.card).product()
    }

    pub fn parent_size(&self) -> usize {
        self.parents.iter().map(|v| v.card).product()
    }

    /// Conditional pmf row for one parent assignment.
    pub fn row(&self, parent_index: usize) -> &[f64] {
        let k = self.child_size();
        &self.probs[parent_index * k..(parent_index + 1) * k]
    }

    /// All rows, in parent row-major order.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.child_size())
    }
}

impl From<Dist> for Factor {
    fn from(d: Dist) -> Self {
        Factor {
            children: d.vars,
            parents: Vec::new(),
            probs: d.probs,
        }
    }
}

/// Joint pmf of a chain of factors: Π_f p(children_f | parents_f).
///
/// Every parent must be a child of an earlier factor; the joint lists the
/// children in the order they are introduced.
pub fn chain_product(factors: &[Factor]) -> Result<Dist> {
    let mut vars: Vec<Variable> = Vec::new();
    for f in factors {
        for p in &f.parents {
            match vars.iter().find(|v| v.name == p.name) {
                Some(v) if v.card == p.card => {}
                Some(v) => {
                    return Err(Error::CardinalityMismatch {
                        factor: f.children.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join(","),
                        var: p.name.clone(),
                        expected: v.card,
                        found: p.card,
                    })
                }
                None => return Err(Error::DanglingParent(p.name.clone())),
            }
        }
        for c in &f.children {
            if vars.iter().any(|v| v.name == c.name) {
                return Err(Error::DuplicateChild(c.name.clone()));
            }
            vars.push(c.clone());
        }
    }
    let size = check_vars(&vars)?;
    let k = vars.len();
    let cards: Vec<usize> = vars.iter().map(|v| v.card).collect();

    // stride of each joint variable inside each factor's flat index
    let strides: Vec<Vec<usize>> = factors
        .iter()
        .map(|f| {
            let mut s = vec![0usize; k];
            let mut acc = 1usize;
            for v in f.parents.iter().chain(f.children.iter()).rev() {
                let j = vars.iter().position(|w| w.name == v.name).expect("checked above");
                s[j] = acc;
                acc *= v.card;
            }
            s
        })
        .collect();

    let mut probs = Vec::with_capacity(size);
    let mut digits = vec![0usize; k];
    let mut pos = vec![0usize; factors.len()];
    for _ in 0..size {
        let mut p = 1.0;
        for (f, &i) in factors.iter().zip(&pos) {
            p *= f.probs[i];
            if p == 0.0 {
                break;
            }
        }
        probs.push(p);
        let mut d = k;
        while d > 0 {
            d -= 1;
            digits[d] += 1;
            for (q, s) in pos.iter_mut().zip(&strides) {
                *q += s[d];
            }
            if digits[d] < cards[d] {
                break;
            }
            digits[d] = 0;
            for (q, s) in pos.iter_mut().zip(&strides) {
                *q -= s[d] * cards[d];
            }
        }
    }
    Ok(Dist::from_parts_unchecked(vars, probs))
}
