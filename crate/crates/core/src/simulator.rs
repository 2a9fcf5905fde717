//! Monte-Carlo simulation of the random codes at small block lengths.
//!
//! Every decoder is maximum likelihood; equal top scores count as errors.
//! Each trial draws its own codebooks, bins and source blocks from streams
//! keyed by `(seed, n, trial)`, so results do not depend on the number of
//! worker threads.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::{csv_float, sig};
use crate::model::{source_stats, Channel, DfInput, SourcePair};
use crate::rng::{self, derive, hash_key, sample, sample_index, unit_from_key};

/// Largest exponent `n·rate` accepted for one codebook.
pub const MAX_CODEBOOK_BITS: f64 = 24.0;
/// Largest number of source sequences enumerated by the binning decoder.
pub const MAX_SEQUENCES: usize = 1 << 24;
/// Largest `candidates × n` product a joint decoder may scan per block.
const MAX_DECODER_WORK: f64 = (1u64 << 30) as f64;
/// Scores within this distance of the best are ties.
const TIE_TOL: f64 = 1e-9;

/// Error-event labels of the decode-forward scheme.
pub const DF_EVENTS: [&str; 9] = [
    "node1-decode-k",
    "node2-decode-j",
    "dest-4a",
    "dest-4b",
    "dest-4c",
    "dest-4d",
    "dest-4e",
    "dest-4f",
    "dest-4g",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Block length in channel uses.
    pub n: usize,
    /// Number of blocks for block-Markov schemes.
    pub blocks: usize,
    pub trials: usize,
    pub seed: u64,
    /// Rates in bits per symbol by name (`R1`, `R2`, and `R0` for the common index).
    pub rates: BTreeMap<String, f64>,
    /// Slack added to information quantities when a rate is not given.
    pub epsilon: f64,
    /// Worker threads; 0 uses every available processor.
    pub workers: usize,
    /// Draw channel codewords without replacement (uniform over all sequences).
    pub distinct_codewords: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 8,
            blocks: 4,
            trials: 1000,
            seed: 0,
            rates: BTreeMap::new(),
            epsilon: 0.05,
            workers: 0,
            distinct_codewords: false,
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("block length n must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if let Some((k, v)) = self.rates.iter().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidConfig(format!("rate {k}={v} must be a nonnegative number")));
        }
        Ok(())
    }

    fn rate(&self, name: &str) -> Result<f64> {
        self.rates
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidConfig(format!("missing rate {name}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub n: usize,
    pub trials: u64,
    pub errors: u64,
    #[serde(with = "sig")]
    pub error_rate: f64,
    /// Failed decoding stages; one trial may log several.
    pub breakdown: BTreeMap<String, u64>,
}

#[derive(Default)]
struct Tally {
    trials: u64,
    errors: u64,
    breakdown: BTreeMap<String, u64>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.trials += other.trials;
        self.errors += other.errors;
        for (k, v) in other.breakdown {
            *self.breakdown.entry(k).or_insert(0) += v;
        }
        self
    }
}

struct Trial {
    error: bool,
    events: Vec<&'static str>,
}

fn run_trials(cfg: &SimConfig, f: impl Fn(u64) -> Trial + Sync) -> Result<SimOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let tally = pool.install(|| {
        (0..cfg.trials as u64)
            .into_par_iter()
            .map(|t| {
                let r = f(t);
                let mut tally = Tally {
                    trials: 1,
                    errors: u64::from(r.error),
                    breakdown: BTreeMap::new(),
                };
                for e in r.events {
                    *tally.breakdown.entry(e.to_string()).or_insert(0) += 1;
                }
                tally
            })
            .reduce(Tally::default, Tally::merge)
    });
    Ok(SimOutcome {
        n: cfg.n,
        trials: tally.trials,
        errors: tally.errors,
        error_rate: tally.errors as f64 / tally.trials as f64,
        breakdown: tally.breakdown,
    })
}

/// Number of codewords or bins, `round(2^(n·rate))`, at least 1.
pub fn codebook_size(n: usize, rate: f64) -> Result<usize> {
    let bits = n as f64 * rate;
    if bits > MAX_CODEBOOK_BITS {
        return Err(Error::CodebookTooLarge(bits));
    }
    Ok((bits.exp2().round() as usize).max(1))
}

fn ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Running maximum that remembers ties with the leader.
struct Best<T: Copy + PartialEq> {
    score: f64,
    arg: Option<T>,
    tied: Vec<T>,
}

impl<T: Copy + PartialEq> Best<T> {
    fn new() -> Self {
        Self {
            score: f64::NEG_INFINITY,
            arg: None,
            tied: Vec::new(),
        }
    }

    fn offer(&mut self, s: f64, x: T) {
        if self.arg.is_none() || s > self.score + TIE_TOL {
            self.score = s;
            self.arg = Some(x);
            self.tied.clear();
        } else if s == self.score || (s - self.score).abs() <= TIE_TOL {
            self.tied.push(x);
        }
    }

    /// The decision and whether it is an error against `truth`. With a tie,
    /// the decision is the first tied candidate that differs from the truth.
    fn decide(&self, truth: T) -> (T, bool) {
        let lead = self.arg.expect("at least one candidate");
        if self.tied.is_empty() {
            return (lead, lead != truth);
        }
        let wrong = std::iter::once(lead).chain(self.tied.iter().copied()).find(|&x| x != truth);
        (wrong.unwrap_or(lead), true)
    }
}

fn digits(mut idx: usize, base: usize, n: usize) -> Vec<u8> {
    let mut d = vec![0u8; n];
    for slot in d.iter_mut().rev() {
        *slot = (idx % base) as u8;
        idx /= base;
    }
    d
}

fn seq_count(card: usize, n: usize) -> Option<usize> {
    let mut c: usize = 1;
    for _ in 0..n {
        c = c.checked_mul(card)?;
        if c > MAX_SEQUENCES {
            return None;
        }
    }
    Some(c)
}

/// Slepian-Wolf random binning of both sources at rates `R1`, `R2`, with the
/// decoder choosing the most likely bin-consistent pair.
///
/// Bins are a fresh uniform hash per trial. When the bin count exceeds the
/// number of sequences every sequence gets its own bin.
pub fn simulate_sw(src: &SourcePair, cfg: &SimConfig) -> Result<SimOutcome> {
    cfg.validate()?;
    let n = cfg.n;
    let [c1, c2] = src.cards();
    let m = [codebook_size(n, cfg.rate("R1")?)?, codebook_size(n, cfg.rate("R2")?)?];
    let count = [
        seq_count(c1, n).ok_or_else(|| Error::InvalidConfig(format!("{c1}^{n} source sequences exceed the limit")))?,
        seq_count(c2, n).ok_or_else(|| Error::InvalidConfig(format!("{c2}^{n} source sequences exceed the limit")))?,
    ];
    let identity = [m[0] > count[0], m[1] > count[1]];
    if identity[0] || identity[1] {
        log::warn!("bin count exceeds the number of source sequences; binning is lossless");
    }
    let logp: Vec<Vec<f64>> = (0..c1).map(|a| (0..c2).map(|b| ln(src.prob(a, b))).collect()).collect();
    let joint = src.joint().probs().to_vec();
    let seqs = [
        (0..count[0]).map(|x| digits(x, c1, n)).collect::<Vec<_>>(),
        (0..count[1]).map(|x| digits(x, c2, n)).collect::<Vec<_>>(),
    ];

    run_trials(cfg, |trial| {
        let mut s = rng::stream(cfg.seed, "sw", &[n as u64, trial]);
        let (mut t1, mut t2) = (0usize, 0usize);
        for _ in 0..n {
            let k = sample(&mut s, &joint);
            t1 = t1 * c1 + k / c2;
            t2 = t2 * c2 + k % c2;
        }
        let keys = [
            hash_key(cfg.seed, "sw-bin1", &[n as u64, trial]),
            hash_key(cfg.seed, "sw-bin2", &[n as u64, trial]),
        ];
        let bin = |side: usize, x: usize| -> usize {
            if identity[side] {
                x
            } else {
                (derive(keys[side], &[x as u64]) % m[side] as u64) as usize
            }
        };
        let (b1, b2) = (bin(0, t1), bin(1, t2));
        let cand1: Vec<usize> = (0..count[0]).filter(|&x| bin(0, x) == b1).collect();
        let cand2: Vec<usize> = (0..count[1]).filter(|&x| bin(1, x) == b2).collect();
        let mut best = Best::new();
        for &x in &cand1 {
            let sx = &seqs[0][x];
            for &y in &cand2 {
                let sy = &seqs[1][y];
                let score: f64 = sx.iter().zip(sy).map(|(&a, &b)| logp[a as usize][b as usize]).sum();
                best.offer(score, (x, y));
            }
        }
        let ((d1, d2), error) = best.decide((t1, t2));
        let mut events = Vec::new();
        if error {
            if d1 != t1 {
                events.push("s1");
            }
            if d2 != t2 {
                events.push("s2");
            }
        }
        Trial { error, events }
    })
}

/// Rank-one factorization of the destination law: `p(y | a, b) = f[y][a]·g[y][b]`.
#[allow(clippy::type_complexity)]
fn separable_factors(law: &[Vec<Vec<f64>>]) -> Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let (na, nb) = (law.len(), law[0].len());
    let ny = law[0][0].len();
    let mut f = vec![vec![0.0; na]; ny];
    let mut g = vec![vec![0.0; nb]; ny];
    for y in 0..ny {
        let Some((a0, b0)) = (0..na)
            .flat_map(|a| (0..nb).map(move |b| (a, b)))
            .find(|&(a, b)| law[a][b][y] > 0.0)
        else {
            continue;
        };
        let pivot = law[a0][b0][y];
        for a in 0..na {
            f[y][a] = law[a][b0][y];
        }
        for b in 0..nb {
            g[y][b] = law[a0][b][y] / pivot;
        }
        for a in 0..na {
            for b in 0..nb {
                let p = f[y][a] * g[y][b];
                if (p - law[a][b][y]).abs() > 1e-12 * (1.0 + law[a][b][y]) {
                    return None;
                }
            }
        }
    }
    Some((f, g))
}

fn draw_codebook(
    s: &mut rng::Stream,
    m: usize,
    n: usize,
    pmf: &[f64],
    distinct: bool,
) -> Result<Vec<Vec<u8>>> {
    if !distinct {
        return Ok((0..m).map(|_| (0..n).map(|_| sample(s, pmf) as u8).collect()).collect());
    }
    let k = pmf.len();
    let count = seq_count(k, n)
        .filter(|&c| c >= m)
        .ok_or_else(|| Error::InvalidConfig(format!("cannot draw {m} distinct codewords of length {n}")))?;
    let picks = rand::seq::index::sample(s, count, m);
    Ok(picks.into_iter().map(|x| digits(x, k, n)).collect())
}

/// Two-user random coding over the destination link, with codewords drawn
/// i.i.d. from `px1`, `px2` and a joint maximum-likelihood decoder. The
/// feedback outputs are ignored.
pub fn simulate_mac(ch: &Channel, cfg: &SimConfig, px1: &[f64], px2: &[f64]) -> Result<SimOutcome> {
    cfg.validate()?;
    let [x1c, x2c, ..] = ch.cards();
    if px1.len() != x1c || px2.len() != x2c {
        return Err(Error::LengthMismatch {
            expected: x1c + x2c,
            found: px1.len() + px2.len(),
        });
    }
    for p in [px1, px2] {
        crate::prob::Dist::new(vec![crate::prob::Variable::new("X", p.len())], p.to_vec())?;
    }
    let n = cfg.n;
    let m1 = codebook_size(n, cfg.rate("R1")?)?;
    let m2 = codebook_size(n, cfg.rate("R2")?)?;
    let law = ch.output_marginal(2);
    let sep = separable_factors(&law);
    if sep.is_none() && (m1 * m2) as f64 * n as f64 > MAX_DECODER_WORK {
        return Err(Error::InvalidConfig(format!(
            "joint decoding of {m1}x{m2} codeword pairs at n={n} exceeds the work limit"
        )));
    }
    let loglaw: Vec<Vec<Vec<f64>>> = law
        .iter()
        .map(|r| r.iter().map(|p| p.iter().map(|&q| ln(q)).collect()).collect())
        .collect();

    run_trials(cfg, |trial| {
        let mut s = rng::stream(cfg.seed, "mac", &[n as u64, trial]);
        let cb1 = draw_codebook(&mut s, m1, n, px1, cfg.distinct_codewords).expect("checked sizes");
        let cb2 = draw_codebook(&mut s, m2, n, px2, cfg.distinct_codewords).expect("checked sizes");
        let (w1, w2) = (s.random_range(0..m1), s.random_range(0..m2));
        let y: Vec<usize> = (0..n)
            .map(|t| sample(&mut s, &law[cb1[w1][t] as usize][cb2[w2][t] as usize]))
            .collect();
        let (d1, d2, error) = match &sep {
            Some((f, g)) => {
                let mut b1 = Best::new();
                for (i, cw) in cb1.iter().enumerate() {
                    b1.offer((0..n).map(|t| ln(f[y[t]][cw[t] as usize])).sum(), i);
                }
                let mut b2 = Best::new();
                for (k, cw) in cb2.iter().enumerate() {
                    b2.offer((0..n).map(|t| ln(g[y[t]][cw[t] as usize])).sum(), k);
                }
                let (d1, e1) = b1.decide(w1);
                let (d2, e2) = b2.decide(w2);
                (d1, d2, e1 || e2)
            }
            None => {
                let mut b = Best::new();
                for (i, c1) in cb1.iter().enumerate() {
                    for (k, c2) in cb2.iter().enumerate() {
                        let sc: f64 = (0..n).map(|t| loglaw[c1[t] as usize][c2[t] as usize][y[t]]).sum();
                        b.offer(sc, (i, k));
                    }
                }
                let ((d1, d2), e) = b.decide((w1, w2));
                (d1, d2, e)
            }
        };
        let mut events = Vec::new();
        if d1 != w1 {
            events.push("msg1");
        }
        if d2 != w2 {
            events.push("msg2");
        }
        Trial { error, events }
    })
}

/// Codebook sizes used by [`simulate_df`]: `[common, node 1, node 2]`.
///
/// Missing rates default to the matching information quantity plus
/// `epsilon`; a quantity that is zero (within 1e-12) gets a single codeword.
pub fn df_codebook_sizes(src: &SourcePair, cfg: &SimConfig) -> Result<[usize; 3]> {
    let st = source_stats(src);
    let mut out = [1usize; 3];
    for (slot, (name, info)) in out
        .iter_mut()
        .zip([("R0", st.i_s1_s2), ("R1", st.h_s1_given_s2), ("R2", st.h_s2_given_s1)])
    {
        *slot = match cfg.rates.get(name) {
            Some(&r) => codebook_size(cfg.n, r)?,
            None if info <= 1e-12 => 1,
            None => codebook_size(cfg.n, info + cfg.epsilon)?,
        };
    }
    Ok(out)
}

/// Tables for one decode-forward trial.
struct DfCode<'a> {
    n: usize,
    input: &'a DfInput,
    wcards: [usize; 3],
    m: [usize; 3],
    /// `w[c][index]` codeword of auxiliary `c`.
    w: [Vec<Vec<u8>>; 3],
    key_x1: u64,
    key_x2: u64,
}

type Triple = (usize, usize, usize);

impl DfCode<'_> {
    fn w_row(&self, h: Triple, t: usize) -> usize {
        let (a, b, c) = (self.w[0][h.0][t] as usize, self.w[1][h.1][t] as usize, self.w[2][h.2][t] as usize);
        (a * self.wcards[1] + b) * self.wcards[2] + c
    }

    /// Codeword of node 1 for fresh index `j` on top of cooperative triple `h`.
    fn x1(&self, j: usize, h: Triple) -> Vec<u8> {
        (0..self.n)
            .map(|t| {
                let u = unit_from_key(derive(self.key_x1, &[j as u64, h.0 as u64, h.1 as u64, h.2 as u64, t as u64]));
                sample_index(self.input.f_x1.row(self.w_row(h, t)), u) as u8
            })
            .collect()
    }

    fn x2(&self, k: usize, h: Triple) -> Vec<u8> {
        (0..self.n)
            .map(|t| {
                let u = unit_from_key(derive(self.key_x2, &[k as u64, h.0 as u64, h.1 as u64, h.2 as u64, t as u64]));
                sample_index(self.input.f_x2.row(self.w_row(h, t)), u) as u8
            })
            .collect()
    }
}

fn dest_label(i: bool, j: bool, k: bool) -> &'static str {
    match (i, j, k) {
        (true, false, false) => "dest-4a",
        (false, true, false) => "dest-4b",
        (false, false, true) => "dest-4c",
        (true, true, false) => "dest-4d",
        (true, false, true) => "dest-4e",
        (false, true, true) => "dest-4f",
        _ => "dest-4g",
    }
}

/// Full block-Markov decode-forward simulation over `cfg.blocks` blocks.
///
/// In block `b` node 1 sends `x1(j_b, h1)` and node 2 sends `x2(k_b, h2)`,
/// where `j_b`, `k_b` are bin indices of the fresh source blocks and `h1`,
/// `h2` are each node's view of the previous block's `(i, j, k)`; `i_b` is
/// the bin of the common-part sequence. Each node decodes the other's fresh
/// index from its feedback output. The destination decodes `(i_b, j_b, k_b)`
/// from blocks `b` and `b + 1` jointly, scoring
/// `p(y3(b) | x1(j, h), x2(k, h)) · p(y3(b+1) | w0(i), w1(j), w2(k))` with its
/// own estimate `h` of the previous triple. Block 0 uses the known triple
/// `(0, 0, 0)`; the last block's fresh indices are not scored.
pub fn simulate_df(ch: &Channel, src: &SourcePair, input: &DfInput, cfg: &SimConfig) -> Result<SimOutcome> {
    cfg.validate()?;
    if cfg.blocks < 3 {
        return Err(Error::InvalidConfig("decode-forward simulation needs at least 3 blocks".into()));
    }
    let chc = ch.cards();
    let inc = input.cards();
    for (name, a, b) in [("f_x1", chc[0], inc[3]), ("f_x2", chc[1], inc[4])] {
        if a != b {
            return Err(Error::CardinalityMismatch {
                factor: name.into(),
                var: if name == "f_x1" { "X1" } else { "X2" }.into(),
                expected: a,
                found: b,
            });
        }
    }
    let n = cfg.n;
    let m = df_codebook_sizes(src, cfg)?;
    let work = (m[0] * m[1] * m[2]) as f64 * n as f64;
    if work > MAX_DECODER_WORK {
        return Err(Error::InvalidConfig(format!(
            "destination decoding of {}x{}x{} index triples at n={n} exceeds the work limit",
            m[0], m[1], m[2]
        )));
    }
    let wcards = [inc[0], inc[1], inc[2]];
    let [c1, c2] = src.cards();
    let (comp1, _, ncomp) = src.common_part();
    let joint = src.joint().probs().to_vec();

    let law1 = ch.output_marginal(0);
    let law2 = ch.output_marginal(1);
    let law3 = ch.output_marginal(2);
    let ln1: Vec<Vec<Vec<f64>>> = law1.iter().map(|r| r.iter().map(|p| p.iter().map(|&q| ln(q)).collect()).collect()).collect();
    let ln2: Vec<Vec<Vec<f64>>> = law2.iter().map(|r| r.iter().map(|p| p.iter().map(|&q| ln(q)).collect()).collect()).collect();
    let ln3: Vec<Vec<Vec<f64>>> = law3.iter().map(|r| r.iter().map(|p| p.iter().map(|&q| ln(q)).collect()).collect()).collect();
    // destination law given the auxiliaries, inputs averaged out
    let nw = wcards[0] * wcards[1] * wcards[2];
    let [_, _, _, y2c, y3c] = chc;
    let lnq: Vec<Vec<f64>> = (0..nw)
        .map(|w| {
            let (r1, r2) = (input.f_x1.row(w), input.f_x2.row(w));
            (0..y3c)
                .map(|y| {
                    let mut p = 0.0;
                    for (a, &pa) in r1.iter().enumerate() {
                        for (b, &pb) in r2.iter().enumerate() {
                            p += pa * pb * law3[a][b][y];
                        }
                    }
                    ln(p)
                })
                .collect()
        })
        .collect();

    let blocks = cfg.blocks;
    run_trials(cfg, |trial| {
        let mut s = rng::stream(cfg.seed, "df", &[n as u64, trial]);
        let ck = hash_key(cfg.seed, "df-code", &[n as u64, trial]);
        let w: [Vec<Vec<u8>>; 3] = std::array::from_fn(|c| {
            (0..m[c])
                .map(|idx| {
                    let pmf = match c {
                        0 => input.p_w0.probs(),
                        1 => input.p_w1.probs(),
                        _ => input.p_w2.probs(),
                    };
                    (0..n)
                        .map(|t| sample_index(pmf, unit_from_key(derive(ck, &[c as u64, idx as u64, t as u64]))) as u8)
                        .collect()
                })
                .collect()
        });
        let code = DfCode {
            n,
            input,
            wcards,
            m,
            w,
            key_x1: derive(ck, &[101]),
            key_x2: derive(ck, &[102]),
        };
        let bin_key = derive(ck, &[200]);
        let bin = |tag: u64, seq: &[usize], size: usize| -> usize {
            if size == 1 {
                return 0;
            }
            let mut h = derive(bin_key, &[tag]);
            for &x in seq {
                h = derive(h, &[x as u64]);
            }
            (h % size as u64) as usize
        };

        // fresh indices per block
        let mut truth: Vec<Triple> = Vec::with_capacity(blocks);
        for _ in 0..blocks {
            let (mut s1, mut s2, mut d) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
            for _ in 0..n {
                let k = sample(&mut s, &joint);
                let (a, b) = (k / c2, k % c2);
                s1.push(a);
                s2.push(b);
                d.push(comp1[a]);
            }
            debug_assert!(s1.iter().all(|&a| a < c1));
            let i = if ncomp > 1 { bin(0, &d, code.m[0]) } else { bin(0, &[], code.m[0]) };
            truth.push((i, bin(1, &s1, code.m[1]), bin(2, &s2, code.m[2])));
        }

        let mut events: Vec<&'static str> = Vec::new();
        let mut error = false;
        let mut h1: Triple = (0, 0, 0);
        let mut h2: Triple = (0, 0, 0);
        let mut h3: Triple = (0, 0, 0);
        let mut y3_blocks: Vec<Vec<usize>> = Vec::with_capacity(blocks);
        for (b, &(i, j, k)) in truth.iter().enumerate() {
            let x1 = code.x1(j, h1);
            let x2 = code.x2(k, h2);
            let mut y1 = Vec::with_capacity(n);
            let mut y2 = Vec::with_capacity(n);
            let mut y3 = Vec::with_capacity(n);
            for t in 0..n {
                let row = ch.row(x1[t] as usize, x2[t] as usize);
                let o = sample(&mut s, row);
                y1.push(o / (y2c * y3c));
                y2.push((o / y3c) % y2c);
                y3.push(o % y3c);
            }
            if b + 1 < blocks {
                // node 1 decodes k from y1, knowing its own codeword and view
                let mut best = Best::new();
                for kk in 0..code.m[2] {
                    let cw = code.x2(kk, h1);
                    let sc: f64 = (0..n).map(|t| ln1[x1[t] as usize][cw[t] as usize][y1[t]]).sum();
                    best.offer(sc, kk);
                }
                let (k_hat, e1) = best.decide(k);
                if e1 {
                    events.push("node1-decode-k");
                }
                // node 2 decodes j from y2
                let mut best = Best::new();
                for jj in 0..code.m[1] {
                    let cw = code.x1(jj, h2);
                    let sc: f64 = (0..n).map(|t| ln2[cw[t] as usize][x2[t] as usize][y2[t]]).sum();
                    best.offer(sc, jj);
                }
                let (j_hat, e2) = best.decide(j);
                if e2 {
                    events.push("node2-decode-j");
                }
                h1 = (i, j, k_hat);
                h2 = (i, j_hat, k);
            }
            y3_blocks.push(y3);
        }

        // destination: decode block b from blocks b and b+1
        for b in 0..blocks - 1 {
            let (i, j, k) = truth[b];
            let y3 = &y3_blocks[b];
            let y3n = &y3_blocks[b + 1];
            let cw1: Vec<Vec<u8>> = (0..code.m[1]).map(|jj| code.x1(jj, h3)).collect();
            let cw2: Vec<Vec<u8>> = (0..code.m[2]).map(|kk| code.x2(kk, h3)).collect();
            let mut term1 = vec![0.0; code.m[1] * code.m[2]];
            for (jj, a) in cw1.iter().enumerate() {
                for (kk, c) in cw2.iter().enumerate() {
                    term1[jj * code.m[2] + kk] = (0..n).map(|t| ln3[a[t] as usize][c[t] as usize][y3[t]]).sum();
                }
            }
            let mut best = Best::new();
            for ii in 0..code.m[0] {
                for jj in 0..code.m[1] {
                    for kk in 0..code.m[2] {
                        let t1 = term1[jj * code.m[2] + kk];
                        if t1 == f64::NEG_INFINITY && best.arg.is_some() && best.score > f64::NEG_INFINITY {
                            continue;
                        }
                        let t2: f64 = (0..n).map(|t| lnq[code.w_row((ii, jj, kk), t)][y3n[t]]).sum();
                        best.offer(t1 + t2, (ii, jj, kk));
                    }
                }
            }
            let ((di, dj, dk), e) = best.decide((i, j, k));
            if e {
                error = true;
                events.push(dest_label(di != i, dj != j, dk != k));
            }
            h3 = (di, dj, dk);
        }
        Trial { error, events }
    })
}

/// Runs `op` once per configuration; configurations should differ only in `n`.
pub fn trend_report(
    op: impl Fn(&SimConfig) -> Result<SimOutcome>,
    cfgs: &[SimConfig],
) -> Result<Vec<SimOutcome>> {
    cfgs.iter().map(op).collect()
}

/// CSV with header `n,trials,errors,error_rate,stage_breakdown`; the
/// breakdown is a semicolon-joined `label:count` list.
pub fn trend_csv(rows: &[SimOutcome]) -> String {
    let mut out = String::from("n,trials,errors,error_rate,stage_breakdown\n");
    for r in rows {
        let bd: Vec<String> = r.breakdown.iter().map(|(k, v)| format!("{k}:{v}")).collect();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.n,
            r.trials,
            r.errors,
            csv_float(r.error_rate),
            bd.join(";")
        ));
    }
    out
}

/// Distinct labels seen in a breakdown.
pub fn breakdown_labels(o: &SimOutcome) -> HashSet<&str> {
    o.breakdown.keys().map(|k| k.as_str()).collect()
}
