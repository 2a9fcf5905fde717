//! Channel and source instances, source statistics, and the factorized
//! joints over auxiliary, input and output variables.
//!
//! Channel documents are JSON objects carrying the five alphabet sizes and the
//! transition law flattened row-major in the order `x1, x2, y1, y2, y3`:
//!
//! ```json
//! {"x1_card": 2, "x2_card": 2, "y1_card": 1, "y2_card": 1, "y3_card": 4, "probs": [...]}
//! ```
//!
//! Source documents carry `s1_card`, `s2_card` and the joint `probs` in the
//! order `s1, s2`. Composite symbols (for example an output that represents a
//! pair) are plain integers; the toolkit never looks inside a symbol.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::fmt::round_sig_vec;
use crate::prob::{chain_product, Dist, Factor, InfoCalc, Variable};

pub const S1: &str = "S1";
pub const S2: &str = "S2";
pub const X1: &str = "X1";
pub const X2: &str = "X2";
pub const Y1: &str = "Y1";
pub const Y2: &str = "Y2";
pub const Y3: &str = "Y3";
pub const W0: &str = "W0";
pub const W1: &str = "W1";
pub const W2: &str = "W2";
pub const U1: &str = "U1";
pub const U2: &str = "U2";
pub const YT1: &str = "YT1";
pub const YT2: &str = "YT2";

/// Splits a JSON object into its known fields and reports the unknown ones.
fn take_fields(doc: &str, known: &[&str]) -> Result<(Map<String, Value>, Vec<String>)> {
    let value: Value = serde_json::from_str(doc)?;
    let Value::Object(map) = value else {
        return Err(Error::InvalidDocument("expected a JSON object".into()));
    };
    let unknown: Vec<String> = map
        .keys()
        .filter(|k| !known.contains(&k.as_str()))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        log::warn!("ignoring unknown fields: {}", unknown.join(", "));
    }
    Ok((map, unknown))
}

fn card_field(map: &Map<String, Value>, name: &str) -> Result<usize> {
    let v = map.get(name).ok_or_else(|| Error::MissingField(name.into()))?;
    let n = v
        .as_u64()
        .ok_or_else(|| Error::InvalidDocument(format!("`{name}` must be a positive integer")))?;
    if n == 0 {
        return Err(Error::ZeroCardinality(name.into()));
    }
    Ok(n as usize)
}

fn probs_field(map: &Map<String, Value>, name: &str) -> Result<Vec<f64>> {
    let v = map.get(name).ok_or_else(|| Error::MissingField(name.into()))?;
    Ok(Vec::<f64>::deserialize(v)?)
}

/// Transition law p*(y1, y2, y3 | x1, x2) of the three-node channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    law: Factor,
}

impl Channel {
    /// `probs` is row-major in the order `x1, x2, y1, y2, y3`.
    pub fn new(cards: [usize; 5], probs: Vec<f64>) -> Result<Self> {
        let [x1, x2, y1, y2, y3] = cards;
        let law = Factor::new(
            vec![Variable::new(Y1, y1), Variable::new(Y2, y2), Variable::new(Y3, y3)],
            vec![Variable::new(X1, x1), Variable::new(X2, x2)],
            probs,
        )?;
        Ok(Self { law })
    }

    /// Builds a channel from a per-input-pair function returning the output pmf
    /// flattened over `(y1, y2, y3)`.
    pub fn from_fn(cards: [usize; 5], mut f: impl FnMut(usize, usize) -> Vec<f64>) -> Result<Self> {
        let mut probs = Vec::new();
        for a in 0..cards[0] {
            for b in 0..cards[1] {
                probs.extend(f(a, b));
            }
        }
        Self::new(cards, probs)
    }

    /// Builds a channel whose three outputs are produced independently by
    /// deterministic-or-noisy maps `g1, g2, g3`, each returning an output pmf.
    pub fn from_components(
        cards: [usize; 5],
        mut g1: impl FnMut(usize, usize) -> Vec<f64>,
        mut g2: impl FnMut(usize, usize) -> Vec<f64>,
        mut g3: impl FnMut(usize, usize) -> Vec<f64>,
    ) -> Result<Self> {
        Self::from_fn(cards, |a, b| {
            let (p1, p2, p3) = (g1(a, b), g2(a, b), g3(a, b));
            let mut out = Vec::with_capacity(p1.len() * p2.len() * p3.len());
            for &q1 in &p1 {
                for &q2 in &p2 {
                    for &q3 in &p3 {
                        out.push(q1 * q2 * q3);
                    }
                }
            }
            out
        })
    }

    pub fn load(doc: &str) -> Result<Self> {
        let (map, _) = take_fields(doc, &["x1_card", "x2_card", "y1_card", "y2_card", "y3_card", "probs"])?;
        let cards = [
            card_field(&map, "x1_card")?,
            card_field(&map, "x2_card")?,
            card_field(&map, "y1_card")?,
            card_field(&map, "y2_card")?,
            card_field(&map, "y3_card")?,
        ];
        Self::new(cards, probs_field(&map, "probs")?)
    }

    pub fn to_json(&self) -> Value {
        let c = self.cards();
        serde_json::json!({
            "x1_card": c[0], "x2_card": c[1], "y1_card": c[2], "y2_card": c[3], "y3_card": c[4],
            "probs": round_sig_vec(self.law.probs()),
        })
    }

    /// `[x1, x2, y1, y2, y3]` alphabet sizes.
    pub fn cards(&self) -> [usize; 5] {
        let p = self.law.parents();
        let c = self.law.children();
        [p[0].card, p[1].card, c[0].card, c[1].card, c[2].card]
    }

    pub fn law(&self) -> &Factor {
        &self.law
    }

    /// Output pmf over `(y1, y2, y3)` for one input pair.
    pub fn row(&self, x1: usize, x2: usize) -> &[f64] {
        self.law.row(x1 * self.cards()[1] + x2)
    }

    /// Marginal law of one output given the input pair, as `[x1][x2][y]`.
    pub fn output_marginal(&self, output: usize) -> Vec<Vec<Vec<f64>>> {
        let [x1c, x2c, y1c, y2c, y3c] = self.cards();
        let ycards = [y1c, y2c, y3c];
        let mut out = vec![vec![vec![0.0; ycards[output]]; x2c]; x1c];
        for (a, plane) in out.iter_mut().enumerate() {
            for (b, dest) in plane.iter_mut().enumerate() {
                let row = self.row(a, b);
                for (idx, &p) in row.iter().enumerate() {
                    let y = [idx / (y2c * y3c), (idx / y3c) % y2c, idx % y3c];
                    dest[y[output]] += p;
                }
            }
        }
        out
    }

    /// Post-composes `Y3` with a stochastic map `garble[y3][z]`.
    pub fn garble_y3(&self, garble: &[Vec<f64>]) -> Result<Self> {
        let [x1c, x2c, y1c, y2c, y3c] = self.cards();
        if garble.len() != y3c || garble.is_empty() {
            return Err(Error::ShapeMismatch);
        }
        let zc = garble[0].len();
        Self::from_fn([x1c, x2c, y1c, y2c, zc], |a, b| {
            let row = self.row(a, b);
            let mut out = vec![0.0; y1c * y2c * zc];
            for (idx, &p) in row.iter().enumerate() {
                let (y12, y3) = (idx / y3c, idx % y3c);
                for (z, &g) in garble[y3].iter().enumerate() {
                    out[y12 * zc + z] += p * g;
                }
            }
            out
        })
    }
}

/// Bivariate source law p(s1, s2).
#[derive(Debug, Clone, PartialEq)]
pub struct SourcePair {
    joint: Dist,
}

impl SourcePair {
    pub fn new(s1_card: usize, s2_card: usize, probs: Vec<f64>) -> Result<Self> {
        let joint = Dist::new(vec![Variable::new(S1, s1_card), Variable::new(S2, s2_card)], probs)?;
        Ok(Self { joint })
    }

    pub fn load(doc: &str) -> Result<Self> {
        let (map, _) = take_fields(doc, &["s1_card", "s2_card", "probs"])?;
        Self::new(
            card_field(&map, "s1_card")?,
            card_field(&map, "s2_card")?,
            probs_field(&map, "probs")?,
        )
    }

    pub fn to_json(&self) -> Value {
        let [a, b] = self.cards();
        serde_json::json!({"s1_card": a, "s2_card": b, "probs": round_sig_vec(self.joint.probs())})
    }

    /// Doubly symmetric binary source: uniform bits that disagree with probability `p`.
    pub fn dsbs(p: f64) -> Result<Self> {
        Self::new(2, 2, vec![(1.0 - p) / 2.0, p / 2.0, p / 2.0, (1.0 - p) / 2.0])
    }

    /// Independent sources with the given marginals.
    pub fn independent(p1: &[f64], p2: &[f64]) -> Result<Self> {
        let probs = p1.iter().flat_map(|&a| p2.iter().map(move |&b| a * b)).collect();
        Self::new(p1.len(), p2.len(), probs)
    }

    pub fn cards(&self) -> [usize; 2] {
        [self.joint.vars()[0].card, self.joint.vars()[1].card]
    }

    pub fn joint(&self) -> &Dist {
        &self.joint
    }

    pub fn prob(&self, s1: usize, s2: usize) -> f64 {
        self.joint.probs()[s1 * self.cards()[1] + s2]
    }

    /// Common-part labels: the connected components of the bipartite support
    /// graph of p(s1, s2). Returns the component of each `s1` and each `s2`
    /// symbol (symbols outside the support get their own component).
    pub fn common_part(&self) -> (Vec<usize>, Vec<usize>, usize) {
        let [a, b] = self.cards();
        // union-find over a + b nodes
        let mut parent: Vec<usize> = (0..a + b).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for s1 in 0..a {
            for s2 in 0..b {
                if self.prob(s1, s2) > 0.0 {
                    let (r1, r2) = (find(&mut parent, s1), find(&mut parent, a + s2));
                    if r1 != r2 {
                        parent[r1.max(r2)] = r1.min(r2);
                    }
                }
            }
        }
        let mut label = vec![usize::MAX; a + b];
        let mut next = 0;
        let mut out = vec![0usize; a + b];
        for (x, slot) in out.iter_mut().enumerate() {
            let r = find(&mut parent, x);
            if label[r] == usize::MAX {
                label[r] = next;
                next += 1;
            }
            *slot = label[r];
        }
        let c2 = out.split_off(a);
        (out, c2, next)
    }
}

/// Source with a common part: S1 = (D, E), S2 = (D, F) with D, E, F
/// independent and uniform on `d`, `e`, `f` symbols.
///
/// Symbols are encoded as `s1 = d_idx * e + e_idx` and `s2 = d_idx * f + f_idx`.
pub fn make_common_part_source(d: usize, e: usize, f: usize) -> Result<SourcePair> {
    for (name, v) in [("d", d), ("e", e), ("f", f)] {
        if v == 0 {
            return Err(Error::ZeroCardinality(name.into()));
        }
    }
    let (c1, c2) = (d * e, d * f);
    let mass = 1.0 / (d * e * f) as f64;
    let mut probs = vec![0.0; c1 * c2];
    for di in 0..d {
        for ei in 0..e {
            for fi in 0..f {
                probs[(di * e + ei) * c2 + di * f + fi] = mass;
            }
        }
    }
    SourcePair::new(c1, c2, probs)
}

/// Entropy statistics of a source pair, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceStats {
    pub h_s1: f64,
    pub h_s2: f64,
    pub h_s1_given_s2: f64,
    pub h_s2_given_s1: f64,
    pub h_joint: f64,
    pub i_s1_s2: f64,
}

impl SourceStats {
    pub fn rounded(&self) -> Self {
        use crate::fmt::round_sig;
        Self {
            h_s1: round_sig(self.h_s1),
            h_s2: round_sig(self.h_s2),
            h_s1_given_s2: round_sig(self.h_s1_given_s2),
            h_s2_given_s1: round_sig(self.h_s2_given_s1),
            h_joint: round_sig(self.h_joint),
            i_s1_s2: round_sig(self.i_s1_s2),
        }
    }
}

pub fn source_stats(s: &SourcePair) -> SourceStats {
    let calc = InfoCalc::new(s.joint());
    let h1 = calc.h(&[S1]).expect("source variables");
    let h2 = calc.h(&[S2]).expect("source variables");
    let h12 = calc.h(&[S1, S2]).expect("source variables");
    SourceStats {
        h_s1: h1,
        h_s2: h2,
        h_s1_given_s2: (h12 - h2).max(0.0),
        h_s2_given_s1: (h12 - h1).max(0.0),
        h_joint: h12,
        i_s1_s2: (h1 + h2 - h12).max(0.0),
    }
}

fn check_card(factor: &str, var: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::CardinalityMismatch {
            factor: factor.into(),
            var: var.into(),
            expected,
            found,
        });
    }
    Ok(())
}

/// Auxiliary distribution candidate for the decode-forward region:
/// p(w0) p(w1) p(w2) p(x1 | w0, w1, w2) p(x2 | w0, w1, w2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DfInputDoc", into = "DfInputDoc")]
pub struct DfInput {
    pub p_w0: Dist,
    pub p_w1: Dist,
    pub p_w2: Dist,
    pub f_x1: Factor,
    pub f_x2: Factor,
}

/// Serialized form of [`DfInput`]; conditional tables are flattened with the
/// parent assignment `(w0, w1, w2)` major and the child symbol minor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DfInputDoc {
    pub w0_card: usize,
    pub w1_card: usize,
    pub w2_card: usize,
    pub x1_card: usize,
    pub x2_card: usize,
    pub p_w0: Vec<f64>,
    pub p_w1: Vec<f64>,
    pub p_w2: Vec<f64>,
    pub f_x1: Vec<f64>,
    pub f_x2: Vec<f64>,
}

impl DfInput {
    /// Builds a candidate from raw tables (`[w0, w1, w2, x1, x2]` cards).
    pub fn from_tables(
        cards: [usize; 5],
        p_w0: Vec<f64>,
        p_w1: Vec<f64>,
        p_w2: Vec<f64>,
        f_x1: Vec<f64>,
        f_x2: Vec<f64>,
    ) -> Result<Self> {
        let [w0, w1, w2, x1, x2] = cards;
        let ws = || vec![Variable::new(W0, w0), Variable::new(W1, w1), Variable::new(W2, w2)];
        let named = |name: &'static str, r: Result<Factor>| {
            r.map_err(|e| Error::InvalidDocument(format!("{name}: {e}")))
        };
        Ok(Self {
            p_w0: Dist::new(vec![Variable::new(W0, w0)], p_w0)
                .map_err(|e| Error::InvalidDocument(format!("p_w0: {e}")))?,
            p_w1: Dist::new(vec![Variable::new(W1, w1)], p_w1)
                .map_err(|e| Error::InvalidDocument(format!("p_w1: {e}")))?,
            p_w2: Dist::new(vec![Variable::new(W2, w2)], p_w2)
                .map_err(|e| Error::InvalidDocument(format!("p_w2: {e}")))?,
            f_x1: named("f_x1", Factor::new(vec![Variable::new(X1, x1)], ws(), f_x1))?,
            f_x2: named("f_x2", Factor::new(vec![Variable::new(X2, x2)], ws(), f_x2))?,
        })
    }

    /// All factors uniform.
    pub fn uniform(cards: [usize; 5]) -> Result<Self> {
        let [w0, w1, w2, x1, x2] = cards;
        let rows = w0 * w1 * w2;
        Self::from_tables(
            cards,
            vec![1.0 / w0 as f64; w0],
            vec![1.0 / w1 as f64; w1],
            vec![1.0 / w2 as f64; w2],
            vec![1.0 / x1 as f64; rows * x1],
            vec![1.0 / x2 as f64; rows * x2],
        )
    }

    /// Constant auxiliaries and the given input pmfs.
    pub fn independent_inputs(px1: &[f64], px2: &[f64]) -> Result<Self> {
        Self::from_tables(
            [1, 1, 1, px1.len(), px2.len()],
            vec![1.0],
            vec![1.0],
            vec![1.0],
            px1.to_vec(),
            px2.to_vec(),
        )
    }

    /// `[w0, w1, w2, x1, x2]` alphabet sizes.
    pub fn cards(&self) -> [usize; 5] {
        [
            self.p_w0.vars()[0].card,
            self.p_w1.vars()[0].card,
            self.p_w2.vars()[0].card,
            self.f_x1.children()[0].card,
            self.f_x2.children()[0].card,
        ]
    }

    pub fn load(doc: &str) -> Result<Self> {
        Ok(serde_json::from_str(doc)?)
    }
}

impl From<DfInput> for DfInputDoc {
    fn from(d: DfInput) -> Self {
        let [w0, w1, w2, x1, x2] = d.cards();
        DfInputDoc {
            w0_card: w0,
            w1_card: w1,
            w2_card: w2,
            x1_card: x1,
            x2_card: x2,
            p_w0: round_sig_vec(d.p_w0.probs()),
            p_w1: round_sig_vec(d.p_w1.probs()),
            p_w2: round_sig_vec(d.p_w2.probs()),
            f_x1: round_sig_vec(d.f_x1.probs()),
            f_x2: round_sig_vec(d.f_x2.probs()),
        }
    }
}

impl TryFrom<DfInputDoc> for DfInput {
    type Error = Error;
    fn try_from(d: DfInputDoc) -> Result<Self> {
        DfInput::from_tables(
            [d.w0_card, d.w1_card, d.w2_card, d.x1_card, d.x2_card],
            d.p_w0,
            d.p_w1,
            d.p_w2,
            d.f_x1,
            d.f_x2,
        )
    }
}

/// Auxiliary distribution candidate for the compress-forward region:
/// p(u1) p(x1 | u1) p(u2) p(x2 | u2) p(ỹ1 | y1, x1) p(ỹ2 | y2, x2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CfInputDoc", into = "CfInputDoc")]
pub struct CfInput {
    pub p_u1: Dist,
    pub p_u2: Dist,
    pub f_x1: Factor,
    pub f_x2: Factor,
    pub f_yt1: Factor,
    pub f_yt2: Factor,
}

/// Serialized form of [`CfInput`]. `f_x1` is indexed by `(u1, x1)`, `f_x2` by
/// `(u2, x2)`, `f_yt1` by `(y1, x1, ỹ1)` and `f_yt2` by `(y2, x2, ỹ2)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfInputDoc {
    pub u1_card: usize,
    pub u2_card: usize,
    pub yt1_card: usize,
    pub yt2_card: usize,
    pub x1_card: usize,
    pub x2_card: usize,
    pub y1_card: usize,
    pub y2_card: usize,
    pub p_u1: Vec<f64>,
    pub p_u2: Vec<f64>,
    pub f_x1: Vec<f64>,
    pub f_x2: Vec<f64>,
    pub f_yt1: Vec<f64>,
    pub f_yt2: Vec<f64>,
}

/// Alphabet sizes of a compress-forward candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CfCards {
    pub u1: usize,
    pub u2: usize,
    pub yt1: usize,
    pub yt2: usize,
    pub x1: usize,
    pub x2: usize,
    pub y1: usize,
    pub y2: usize,
}

impl CfCards {
    pub fn for_channel(ch: &Channel, u1: usize, u2: usize, yt1: usize, yt2: usize) -> Self {
        let [x1, x2, y1, y2, _] = ch.cards();
        Self {
            u1,
            u2,
            yt1,
            yt2,
            x1,
            x2,
            y1,
            y2,
        }
    }
}

impl CfInput {
    pub fn from_tables(
        c: CfCards,
        p_u1: Vec<f64>,
        p_u2: Vec<f64>,
        f_x1: Vec<f64>,
        f_x2: Vec<f64>,
        f_yt1: Vec<f64>,
        f_yt2: Vec<f64>,
    ) -> Result<Self> {
        let v = Variable::new;
        let named = |name: &'static str, r: Result<Factor>| {
            r.map_err(|e| Error::InvalidDocument(format!("{name}: {e}")))
        };
        Ok(Self {
            p_u1: Dist::new(vec![v(U1, c.u1)], p_u1)
                .map_err(|e| Error::InvalidDocument(format!("p_u1: {e}")))?,
            p_u2: Dist::new(vec![v(U2, c.u2)], p_u2)
                .map_err(|e| Error::InvalidDocument(format!("p_u2: {e}")))?,
            f_x1: named("f_x1", Factor::new(vec![v(X1, c.x1)], vec![v(U1, c.u1)], f_x1))?,
            f_x2: named("f_x2", Factor::new(vec![v(X2, c.x2)], vec![v(U2, c.u2)], f_x2))?,
            f_yt1: named(
                "f_yt1",
                Factor::new(vec![v(YT1, c.yt1)], vec![v(Y1, c.y1), v(X1, c.x1)], f_yt1),
            )?,
            f_yt2: named(
                "f_yt2",
                Factor::new(vec![v(YT2, c.yt2)], vec![v(Y2, c.y2), v(X2, c.x2)], f_yt2),
            )?,
        })
    }

    pub fn uniform(c: CfCards) -> Result<Self> {
        let u = |k: usize, rows: usize| vec![1.0 / k as f64; k * rows];
        Self::from_tables(
            c,
            u(c.u1, 1),
            u(c.u2, 1),
            u(c.x1, c.u1),
            u(c.x2, c.u2),
            u(c.yt1, c.y1 * c.x1),
            u(c.yt2, c.y2 * c.x2),
        )
    }

    pub fn cards(&self) -> CfCards {
        CfCards {
            u1: self.p_u1.vars()[0].card,
            u2: self.p_u2.vars()[0].card,
            yt1: self.f_yt1.children()[0].card,
            yt2: self.f_yt2.children()[0].card,
            x1: self.f_x1.children()[0].card,
            x2: self.f_x2.children()[0].card,
            y1: self.f_yt1.parents()[0].card,
            y2: self.f_yt2.parents()[0].card,
        }
    }

    pub fn load(doc: &str) -> Result<Self> {
        Ok(serde_json::from_str(doc)?)
    }
}

impl From<CfInput> for CfInputDoc {
    fn from(d: CfInput) -> Self {
        let c = d.cards();
        CfInputDoc {
            u1_card: c.u1,
            u2_card: c.u2,
            yt1_card: c.yt1,
            yt2_card: c.yt2,
            x1_card: c.x1,
            x2_card: c.x2,
            y1_card: c.y1,
            y2_card: c.y2,
            p_u1: round_sig_vec(d.p_u1.probs()),
            p_u2: round_sig_vec(d.p_u2.probs()),
            f_x1: round_sig_vec(d.f_x1.probs()),
            f_x2: round_sig_vec(d.f_x2.probs()),
            f_yt1: round_sig_vec(d.f_yt1.probs()),
            f_yt2: round_sig_vec(d.f_yt2.probs()),
        }
    }
}

impl TryFrom<CfInputDoc> for CfInput {
    type Error = Error;
    fn try_from(d: CfInputDoc) -> Result<Self> {
        CfInput::from_tables(
            CfCards {
                u1: d.u1_card,
                u2: d.u2_card,
                yt1: d.yt1_card,
                yt2: d.yt2_card,
                x1: d.x1_card,
                x2: d.x2_card,
                y1: d.y1_card,
                y2: d.y2_card,
            },
            d.p_u1,
            d.p_u2,
            d.f_x1,
            d.f_x2,
            d.f_yt1,
            d.f_yt2,
        )
    }
}

/// Joint over `(W0, W1, W2, X1, X2, Y1, Y2, Y3)`.
pub fn build_df_joint(ch: &Channel, input: &DfInput) -> Result<Dist> {
    let [x1, x2, ..] = ch.cards();
    let c = input.cards();
    check_card("f_x1", X1, x1, c[3])?;
    check_card("f_x2", X2, x2, c[4])?;
    chain_product(&[
        input.p_w0.clone().into(),
        input.p_w1.clone().into(),
        input.p_w2.clone().into(),
        input.f_x1.clone(),
        input.f_x2.clone(),
        ch.law().clone(),
    ])
}

/// Joint over `(U1, U2, X1, X2, Y1, Y2, Y3, YT1, YT2)`.
pub fn build_cf_joint(ch: &Channel, input: &CfInput) -> Result<Dist> {
    let [x1, x2, y1, y2, _] = ch.cards();
    let c = input.cards();
    check_card("f_x1", X1, x1, c.x1)?;
    check_card("f_x2", X2, x2, c.x2)?;
    check_card("f_yt1", X1, x1, input.f_yt1.parents()[1].card)?;
    check_card("f_yt2", X2, x2, input.f_yt2.parents()[1].card)?;
    check_card("f_yt1", Y1, y1, c.y1)?;
    check_card("f_yt2", Y2, y2, c.y2)?;
    chain_product(&[
        input.p_u1.clone().into(),
        input.p_u2.clone().into(),
        input.f_x1.clone(),
        input.f_x2.clone(),
        ch.law().clone(),
        input.f_yt1.clone(),
        input.f_yt2.clone(),
    ])
}

/// Names of all variables carried by a decode-forward joint.
pub const DF_VARS: [&str; 8] = [W0, W1, W2, X1, X2, Y1, Y2, Y3];
/// Names of all variables carried by a compress-forward joint.
pub const CF_VARS: [&str; 9] = [U1, U2, X1, X2, Y1, Y2, Y3, YT1, YT2];

pub(crate) fn require_vars(d: &Dist, names: &[&str]) -> Result<()> {
    let have: BTreeSet<&str> = d.var_names().into_iter().collect();
    for n in names {
        if !have.contains(n) {
            return Err(Error::UnknownVariable((*n).to_string()));
        }
    }
    Ok(())
}

/// Reference channels used across tests, examples and the command line.
pub mod reference {
    use super::*;

    fn bsc(eps: f64, x: usize) -> Vec<f64> {
        if x == 0 {
            vec![1.0 - eps, eps]
        } else {
            vec![eps, 1.0 - eps]
        }
    }

    fn point(card: usize, y: usize) -> Vec<f64> {
        let mut v = vec![0.0; card];
        v[y] = 1.0;
        v
    }

    /// Binary inputs; Y1 = X2 and Y2 = X1 noiselessly; Y3 = (X1, X2) through
    /// two independent BSC(`eps`) pipes, encoded as `2*y_a + y_b`.
    pub fn cross_link(eps: f64) -> Channel {
        Channel::from_components(
            [2, 2, 2, 2, 4],
            |_, b| point(2, b),
            |a, _| point(2, a),
            |a, b| {
                let (pa, pb) = (bsc(eps, a), bsc(eps, b));
                vec![pa[0] * pb[0], pa[0] * pb[1], pa[1] * pb[0], pa[1] * pb[1]]
            },
        )
        .expect("valid reference channel")
    }

    /// Two parallel BSC(`eps`) pipes to the destination, no feedback (Y1, Y2 constant).
    pub fn parallel_bsc(eps: f64) -> Channel {
        Channel::from_components(
            [2, 2, 1, 1, 4],
            |_, _| vec![1.0],
            |_, _| vec![1.0],
            |a, b| {
                let (pa, pb) = (bsc(eps, a), bsc(eps, b));
                vec![pa[0] * pb[0], pa[0] * pb[1], pa[1] * pb[0], pa[1] * pb[1]]
            },
        )
        .expect("valid reference channel")
    }

    /// Perfect cross links, destination output constant.
    pub fn cross_link_deaf_destination() -> Channel {
        Channel::from_components(
            [2, 2, 2, 2, 1],
            |_, b| point(2, b),
            |a, _| point(2, a),
            |_, _| vec![1.0],
        )
        .expect("valid reference channel")
    }

    /// Every output constant.
    pub fn useless() -> Channel {
        Channel::from_components([2, 2, 1, 1, 1], |_, _| vec![1.0], |_, _| vec![1.0], |_, _| vec![1.0])
            .expect("valid reference channel")
    }

    /// Independent Bernoulli(`p`) sources.
    pub fn bernoulli_pair(p: f64) -> SourcePair {
        SourcePair::independent(&[1.0 - p, p], &[1.0 - p, p]).expect("valid source")
    }
}

#[cfg(test)]
mod tests {
    use super::reference::*;
    use super::*;

    const H025: f64 = 0.811_278_124_459_132_9;

    #[test]
    fn load_channel_documents() {
        // noiseless y3 = (x1, x2)
        let mut probs = Vec::new();
        for a in 0..2 {
            for b in 0..2 {
                let mut row = vec![0.0; 4];
                row[2 * a + b] = 1.0;
                probs.extend(row);
            }
        }
        let doc = serde_json::json!({"x1_card":2,"x2_card":2,"y1_card":1,"y2_card":1,"y3_card":4,"probs":probs});
        let ch = Channel::load(&doc.to_string()).unwrap();
        assert_eq!(ch.cards(), [2, 2, 1, 1, 4]);

        let bad = serde_json::json!({"x1_card":1,"x2_card":1,"y1_card":1,"y2_card":1,"y3_card":2,"probs":[0.49,0.49]});
        assert!(matches!(Channel::load(&bad.to_string()), Err(Error::NotNormalized { .. })));

        let missing = serde_json::json!({"x1_card":1,"x2_card":1,"y1_card":1,"y3_card":2,"probs":[0.5,0.5]});
        assert!(matches!(Channel::load(&missing.to_string()), Err(Error::MissingField(_))));

        let short = serde_json::json!({"x1_card":1,"x2_card":1,"y1_card":1,"y2_card":1,"y3_card":2,"probs":[1.0]});
        assert!(matches!(Channel::load(&short.to_string()), Err(Error::LengthMismatch { .. })));

        let cl = cross_link(0.05);
        let reloaded = Channel::load(&cl.to_json().to_string()).unwrap();
        assert_eq!(reloaded.cards(), [2, 2, 2, 2, 4]);
        for row in reloaded.law().rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_fields_are_tolerated() {
        let doc = r#"{"s1_card":1,"s2_card":1,"probs":[1.0],"comment":"x"}"#;
        assert!(SourcePair::load(doc).is_ok());
    }

    #[test]
    fn load_source_documents() {
        let s = SourcePair::load(r#"{"s1_card":2,"s2_card":2,"probs":[0.375,0.125,0.125,0.375]}"#).unwrap();
        assert_eq!(s, SourcePair::dsbs(0.25).unwrap());
        assert!(matches!(
            SourcePair::load(r#"{"s1_card":2,"s2_card":1,"probs":[1.1,-0.1]}"#),
            Err(Error::NegativeEntry { .. })
        ));
        let ind = SourcePair::load(r#"{"s1_card":2,"s2_card":2,"probs":[0.25,0.25,0.25,0.25]}"#).unwrap();
        assert!(source_stats(&ind).i_s1_s2.abs() < 1e-15);
    }

    #[test]
    fn common_part_sources() {
        let s = make_common_part_source(2, 1, 1).unwrap();
        let st = source_stats(&s);
        assert!((st.i_s1_s2 - 1.0).abs() < 1e-12);
        let s = make_common_part_source(1, 2, 2).unwrap();
        assert!(source_stats(&s).i_s1_s2.abs() < 1e-12);
        let st = source_stats(&make_common_part_source(2, 2, 2).unwrap());
        for (v, e) in [(st.h_s1, 2.0), (st.h_s2, 2.0), (st.h_s1_given_s2, 1.0), (st.i_s1_s2, 1.0)] {
            assert!((v - e).abs() < 1e-12);
        }
        assert!(matches!(make_common_part_source(0, 1, 1), Err(Error::ZeroCardinality(_))));
        let (c1, c2, n) = make_common_part_source(3, 2, 2).unwrap().common_part();
        assert_eq!(n, 3);
        assert_eq!(c1, vec![0, 0, 1, 1, 2, 2]);
        assert_eq!(c2, vec![0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn source_stats_cases() {
        let st = source_stats(&SourcePair::independent(&[0.5, 0.5], &[0.5, 0.5]).unwrap());
        let v = [st.h_s1, st.h_s2, st.h_s1_given_s2, st.h_s2_given_s1, st.h_joint, st.i_s1_s2];
        for (a, b) in v.iter().zip([1.0, 1.0, 1.0, 1.0, 2.0, 0.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let st = source_stats(&SourcePair::dsbs(0.25).unwrap());
        assert!((st.h_s1 - 1.0).abs() < 1e-12);
        assert!((st.h_s1_given_s2 - H025).abs() < 1e-12);
        assert!((st.h_joint - 1.0 - H025).abs() < 1e-12);
        assert!((st.i_s1_s2 - (1.0 - H025)).abs() < 1e-12);
        let st = source_stats(&SourcePair::dsbs(0.0).unwrap());
        let v = [st.h_s1, st.h_s2, st.h_s1_given_s2, st.h_s2_given_s1, st.h_joint, st.i_s1_s2];
        for (a, b) in v.iter().zip([1.0, 1.0, 0.0, 0.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn df_joint_shapes() {
        let ch = Channel::from_fn([2, 2, 2, 2, 2], |_, _| vec![0.125; 8]).unwrap();
        let j = build_df_joint(&ch, &DfInput::uniform([2, 2, 2, 2, 2]).unwrap()).unwrap();
        assert_eq!(j.len(), 256);
        assert!((j.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(j.var_names(), DF_VARS.to_vec());

        let ch = cross_link(0.05);
        let input = DfInput::independent_inputs(&[0.3, 0.7], &[0.6, 0.4]).unwrap();
        let j = build_df_joint(&ch, &input).unwrap();
        let m = j.marginalize(&[X1, X2, Y1, Y2, Y3]).unwrap();
        let mut idx = 0;
        for (a, pa) in [0.3, 0.7].iter().enumerate() {
            for (b, pb) in [0.6, 0.4].iter().enumerate() {
                for &l in ch.row(a, b) {
                    assert_eq!(m.probs()[idx], pa * pb * l);
                    idx += 1;
                }
            }
        }

        // deterministic inputs: support bounded by |W| * |Y|
        let det = DfInput::from_tables(
            [2, 2, 2, 2, 2],
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            (0..8).flat_map(|r| if r % 2 == 0 { [1.0, 0.0] } else { [0.0, 1.0] }).collect(),
            (0..8).flat_map(|r| if r < 4 { [1.0, 0.0] } else { [0.0, 1.0] }).collect(),
        )
        .unwrap();
        let j = build_df_joint(&ch, &det).unwrap();
        assert!(j.probs().iter().filter(|&&p| p > 0.0).count() <= 8 * 16);

        let wrong = DfInput::uniform([1, 1, 1, 3, 2]).unwrap();
        assert!(matches!(build_df_joint(&ch, &wrong), Err(Error::CardinalityMismatch { .. })));
    }

    #[test]
    fn cf_joint_shapes() {
        let ch = Channel::from_fn([2, 2, 2, 2, 2], |_, _| vec![0.125; 8]).unwrap();
        let c = CfCards::for_channel(&ch, 2, 2, 2, 2);
        let j = build_cf_joint(&ch, &CfInput::uniform(c).unwrap()).unwrap();
        assert_eq!(j.len(), 512);
        assert!((j.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(j.var_names(), CF_VARS.to_vec());

        let ch = cross_link(0.05);
        let c = CfCards::for_channel(&ch, 1, 1, 1, 1);
        let j = build_cf_joint(&ch, &CfInput::uniform(c).unwrap()).unwrap();
        let m = j.marginalize(&[YT1, YT2]).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m.probs()[0] - 1.0).abs() < 1e-12);
        assert!(j.cond_mutual_info(&[X1], &[X2], &[]).unwrap() < 1e-12);
    }

    #[test]
    fn candidate_documents_round_trip() {
        let input = DfInput::uniform([2, 1, 3, 2, 2]).unwrap();
        let s = serde_json::to_string(&input).unwrap();
        assert_eq!(DfInput::load(&s).unwrap(), input);
        let ch = cross_link(0.1);
        let cf = CfInput::uniform(CfCards::for_channel(&ch, 2, 1, 3, 2)).unwrap();
        let s = serde_json::to_string(&cf).unwrap();
        assert_eq!(CfInput::load(&s).unwrap(), cf);
        assert!(DfInput::load(r#"{"w0_card":1}"#).is_err());
    }

    #[test]
    fn garbling_changes_output_alphabet() {
        let ch = cross_link(0.0);
        let g = ch.garble_y3(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(g.cards(), [2, 2, 2, 2, 2]);
        // z = x1
        assert_eq!(g.output_marginal(2)[1][0], vec![0.0, 1.0]);
    }
}
