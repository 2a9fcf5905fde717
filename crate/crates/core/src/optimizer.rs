//! Search over auxiliary distributions for a certificate of transmissibility.
//!
//! Each restart starts from a candidate (uniform for restart 0, flat-Dirichlet
//! rows otherwise) and improves it by coordinate ascent on the simplex rows.
//! The objective is the smallest margin over non-vacuous constraints, minus a
//! penalty on dependence between the quantized outputs for compress-forward.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::opt_inf;
use crate::model::{build_cf_joint, build_df_joint, CfCards, CfInput, Channel, DfInput, SourceStats};
use crate::regions::{cf_terms, cf_report_from_terms, df_constraints_with, FeasibilityReport, Tolerances};
use crate::rng;

/// Which transmissibility conditions to search against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Df,
    Cf,
}

impl Strategy {
    pub fn card_names(self) -> &'static [&'static str] {
        match self {
            Strategy::Df => &["W0", "W1", "W2"],
            Strategy::Cf => &["U1", "U2", "YT1", "YT2"],
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "df" => Ok(Strategy::Df),
            "cf" => Ok(Strategy::Cf),
            other => Err(Error::InvalidConfig(format!("unknown strategy `{other}` (expected df or cf)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Auxiliary alphabet sizes by name (`W0`, `W1`, `W2`, `U1`, `U2`, `YT1`, `YT2`).
    /// Missing names take their defaults.
    pub cards: BTreeMap<String, usize>,
    pub restarts: usize,
    pub refine_iters: usize,
    pub seed: u64,
    pub tol: Tolerances,
    /// Objective penalty in bits per unit of total variation.
    pub indep_penalty: f64,
    /// Worker threads; 0 uses every available processor.
    pub workers: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            cards: BTreeMap::new(),
            restarts: 16,
            refine_iters: 20,
            seed: 0,
            tol: Tolerances::default(),
            indep_penalty: 10.0,
            workers: 0,
        }
    }
}

impl SearchConfig {
    /// Resolved alphabet sizes for `strategy` on `ch`.
    pub fn resolved_cards(&self, strategy: Strategy, ch: &Channel) -> Result<BTreeMap<String, usize>> {
        let known = ["W0", "W1", "W2", "U1", "U2", "YT1", "YT2"];
        if let Some(k) = self.cards.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::InvalidConfig(format!("unknown auxiliary `{k}`")));
        }
        let [_, _, y1, y2, _] = ch.cards();
        let mut out = BTreeMap::new();
        for &name in strategy.card_names() {
            let default = match name {
                "YT1" => y1 + 1,
                "YT2" => y2 + 1,
                _ => 2,
            };
            let v = self.cards.get(name).copied().unwrap_or(default);
            if v == 0 {
                return Err(Error::ZeroCardinality(name.into()));
            }
            out.insert(name.to_string(), v);
        }
        Ok(out)
    }

    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Formats alphabet sizes as `{W0=2, W1=2, W2=2}`.
pub fn describe_cards(cards: &BTreeMap<String, usize>) -> String {
    let mut s = String::from("{");
    for (i, (k, v)) in cards.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        let _ = write!(s, "{k}={v}");
    }
    s.push('}');
    s
}

/// A candidate of either strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Candidate {
    Df(DfInput),
    Cf(CfInput),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub strategy: Strategy,
    pub feasible: bool,
    pub cards: BTreeMap<String, usize>,
    /// Smallest non-vacuous margin, minus the independence penalty for compress-forward.
    #[serde(with = "opt_inf")]
    pub objective: f64,
    pub evaluations: u64,
    /// Index of the restart that produced the result.
    pub restart: usize,
    pub best_input: Candidate,
    pub report: FeasibilityReport,
    /// Best objective of each restart, in restart order.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

impl SearchResult {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

/// A candidate as a list of simplex rows grouped in blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// Per block: (row count, row length).
    pub shape: Vec<(usize, usize)>,
    pub blocks: Vec<Vec<f64>>,
}

impl Params {
    fn uniform(shape: &[(usize, usize)]) -> Self {
        Self {
            shape: shape.to_vec(),
            blocks: shape.iter().map(|&(r, k)| vec![1.0 / k as f64; r * k]).collect(),
        }
    }

    fn dirichlet(shape: &[(usize, usize)], s: &mut rng::Stream) -> Self {
        Self {
            shape: shape.to_vec(),
            blocks: shape.iter().map(|&(r, k)| rng::dirichlet_rows(s, r, k, 1.0)).collect(),
        }
    }

    /// Whether every row is a pmf within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        self.blocks.iter().zip(&self.shape).all(|(b, &(_, k))| {
            b.chunks(k)
                .all(|row| row.iter().all(|&p| (0.0..=1.0).contains(&p)) && (row.iter().sum::<f64>() - 1.0).abs() <= tol)
        })
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
}

/// Coordinate ascent: each free parameter is moved by ±δ and re-projected,
/// and the move is kept if the objective improves. δ starts at 0.1 and halves
/// after a sweep without improvement, stopping below 1e-4 or after
/// `max_sweeps` sweeps. Returns the refined candidate and its objective.
pub fn refine(
    start: Params,
    max_sweeps: usize,
    evals: &mut u64,
    mut objective: impl FnMut(&Params) -> f64,
) -> (Params, f64) {
    let mut cur = start;
    *evals += 1;
    let mut best = objective(&cur);
    let mut delta = 0.1;
    for _ in 0..max_sweeps {
        let mut improved = false;
        for b in 0..cur.blocks.len() {
            let k = cur.shape[b].1;
            if k < 2 {
                continue;
            }
            for r in 0..cur.shape[b].0 {
                for i in 0..k {
                    for sign in [1.0, -1.0] {
                        let mut row = cur.blocks[b][r * k..(r + 1) * k].to_vec();
                        row[i] += sign * delta;
                        project_simplex(&mut row);
                        if row[..] == cur.blocks[b][r * k..(r + 1) * k] {
                            continue;
                        }
                        let mut cand = cur.clone();
                        cand.blocks[b][r * k..(r + 1) * k].copy_from_slice(&row);
                        *evals += 1;
                        let v = objective(&cand);
                        if v > best {
                            best = v;
                            cur = cand;
                            improved = true;
                            break;
                        }
                    }
                }
            }
        }
        if !improved {
            delta *= 0.5;
            if delta < 1e-4 {
                break;
            }
        }
    }
    (cur, best)
}

trait Problem: Sync {
    fn shape(&self) -> Vec<(usize, usize)>;
    fn candidate(&self, p: &Params) -> Result<Candidate>;
    /// Objective and report of a candidate.
    fn evaluate(&self, c: &Candidate) -> Result<(f64, FeasibilityReport)>;

    fn objective(&self, p: &Params) -> f64 {
        self.candidate(p)
            .and_then(|c| self.evaluate(&c))
            .map(|(o, _)| o)
            .unwrap_or(f64::NEG_INFINITY)
    }
}

fn objective_of(report: &FeasibilityReport, penalty: f64) -> f64 {
    let tv = report.independence.as_ref().map_or(0.0, |i| i.tv);
    report.min_margin - penalty * tv
}

struct DfProblem<'a> {
    ch: &'a Channel,
    st: &'a SourceStats,
    cards: [usize; 5],
    tol: Tolerances,
}

impl Problem for DfProblem<'_> {
    fn shape(&self) -> Vec<(usize, usize)> {
        let [w0, w1, w2, x1, x2] = self.cards;
        let rows = w0 * w1 * w2;
        vec![(1, w0), (1, w1), (1, w2), (rows, x1), (rows, x2)]
    }

    fn candidate(&self, p: &Params) -> Result<Candidate> {
        let b = &p.blocks;
        Ok(Candidate::Df(DfInput::from_tables(
            self.cards,
            b[0].clone(),
            b[1].clone(),
            b[2].clone(),
            b[3].clone(),
            b[4].clone(),
        )?))
    }

    fn evaluate(&self, c: &Candidate) -> Result<(f64, FeasibilityReport)> {
        let Candidate::Df(input) = c else {
            return Err(Error::InvalidConfig("expected a decode-forward candidate".into()));
        };
        let j = build_df_joint(self.ch, input)?;
        let r = df_constraints_with(&j, self.st, &self.tol)?;
        Ok((objective_of(&r, 0.0), r))
    }
}

struct CfProblem<'a> {
    ch: &'a Channel,
    st: &'a SourceStats,
    cards: CfCards,
    tol: Tolerances,
    penalty: f64,
}

impl Problem for CfProblem<'_> {
    fn shape(&self) -> Vec<(usize, usize)> {
        let c = self.cards;
        vec![
            (1, c.u1),
            (1, c.u2),
            (c.u1, c.x1),
            (c.u2, c.x2),
            (c.y1 * c.x1, c.yt1),
            (c.y2 * c.x2, c.yt2),
        ]
    }

    fn candidate(&self, p: &Params) -> Result<Candidate> {
        let b = &p.blocks;
        Ok(Candidate::Cf(CfInput::from_tables(
            self.cards,
            b[0].clone(),
            b[1].clone(),
            b[2].clone(),
            b[3].clone(),
            b[4].clone(),
            b[5].clone(),
        )?))
    }

    fn evaluate(&self, c: &Candidate) -> Result<(f64, FeasibilityReport)> {
        let Candidate::Cf(input) = c else {
            return Err(Error::InvalidConfig("expected a compress-forward candidate".into()));
        };
        let j = build_cf_joint(self.ch, input)?;
        let r = cf_report_from_terms(&cf_terms(&j)?, self.st, &self.tol);
        Ok((objective_of(&r, self.penalty), r))
    }
}

fn run_search(
    problem: &dyn Problem,
    strategy: Strategy,
    cards: BTreeMap<String, usize>,
    cfg: &SearchConfig,
) -> Result<SearchResult> {
    cfg.validate()?;
    let shape = problem.shape();
    let one = |restart: usize| -> (usize, Params, f64, u64) {
        let start = if restart == 0 {
            Params::uniform(&shape)
        } else {
            let mut s = rng::stream(cfg.seed, "search", &[restart as u64]);
            Params::dirichlet(&shape, &mut s)
        };
        let mut evals = 0;
        let (p, v) = refine(start, cfg.refine_iters, &mut evals, |p| problem.objective(p));
        (restart, p, v, evals)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let runs: Vec<(usize, Params, f64, u64)> = pool.install(|| (0..cfg.restarts).into_par_iter().map(one).collect());

    let evaluations: u64 = runs.iter().map(|r| r.3).sum();
    // Finalize every restart through the serialized form so the emitted
    // candidate re-validates to exactly the emitted report, and select on
    // those values so more restarts never lower the result.
    let mut finals = Vec::with_capacity(runs.len());
    for r in &runs {
        let raw = problem.candidate(&r.1)?;
        let candidate: Candidate = serde_json::from_str(&serde_json::to_string(&raw)?)?;
        let (objective, report) = problem.evaluate(&candidate)?;
        finals.push((candidate, objective, report));
    }
    let trace: Vec<f64> = finals.iter().map(|f| f.1).collect();
    let mut best = 0;
    for (i, f) in finals.iter().enumerate() {
        if f.1 > finals[best].1 {
            best = i;
        }
    }
    let (candidate, objective, report) = finals.swap_remove(best);
    Ok(SearchResult {
        strategy,
        feasible: report.feasible,
        cards,
        objective,
        evaluations,
        restart: runs[best].0,
        best_input: candidate,
        report,
        trace,
    })
}

/// Searches decode-forward candidates with auxiliary sizes from `cfg.cards`.
pub fn search_df(ch: &Channel, st: &SourceStats, cfg: &SearchConfig) -> Result<SearchResult> {
    let cards = cfg.resolved_cards(Strategy::Df, ch)?;
    let [x1, x2, ..] = ch.cards();
    let problem = DfProblem {
        ch,
        st,
        cards: [cards["W0"], cards["W1"], cards["W2"], x1, x2],
        tol: cfg.tol,
    };
    run_search(&problem, Strategy::Df, cards, cfg)
}

/// Searches compress-forward candidates; the final verdict also requires the
/// quantized outputs to be independent within `cfg.tol.indep`.
pub fn search_cf(ch: &Channel, st: &SourceStats, cfg: &SearchConfig) -> Result<SearchResult> {
    let cards = cfg.resolved_cards(Strategy::Cf, ch)?;
    let problem = CfProblem {
        ch,
        st,
        cards: CfCards::for_channel(ch, cards["U1"], cards["U2"], cards["YT1"], cards["YT2"]),
        tol: cfg.tol,
        penalty: cfg.indep_penalty,
    };
    run_search(&problem, Strategy::Cf, cards, cfg)
}

pub fn search(strategy: Strategy, ch: &Channel, st: &SourceStats, cfg: &SearchConfig) -> Result<SearchResult> {
    match strategy {
        Strategy::Df => search_df(ch, st, cfg),
        Strategy::Cf => search_cf(ch, st, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference::{bernoulli_pair, cross_link, cross_link_deaf_destination, parallel_bsc, useless};
    use crate::model::source_stats;
    use crate::regions::{cf_constraints_with, df_constraints_with};

    fn cfg(cards: &[(&str, usize)], restarts: usize, seed: u64) -> SearchConfig {
        SearchConfig {
            cards: cards.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            restarts,
            seed,
            workers: 1,
            ..SearchConfig::default()
        }
    }

    #[test]
    fn simplex_projection() {
        let mut v = vec![0.6, 0.6];
        project_simplex(&mut v);
        assert_eq!(v, vec![0.5, 0.5]);
        let mut v = vec![1.1, -0.1, 0.0];
        project_simplex(&mut v);
        assert_eq!(v, vec![1.0, 0.0, 0.0]);
        let mut v = vec![0.2, 0.3, 0.5];
        project_simplex(&mut v);
        assert!((v[0] - 0.2).abs() < 1e-15 && (v[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cross_link_df_is_found() {
        let st = source_stats(&bernoulli_pair(0.11));
        let r = search_df(&cross_link(0.0), &st, &cfg(&[("W0", 1), ("W1", 1), ("W2", 1)], 4, 7)).unwrap();
        assert!(r.feasible);
        assert!(r.objective >= 0.3);
        let Candidate::Df(input) = &r.best_input else { panic!("strategy") };
        let j = build_df_joint(&cross_link(0.0), input).unwrap();
        assert_eq!(df_constraints_with(&j, &st, &Tolerances::default()).unwrap(), r.report);
    }

    #[test]
    fn useless_channel_is_never_feasible() {
        let st = source_stats(&bernoulli_pair(0.2));
        let r = search_df(&useless(), &st, &cfg(&[], 3, 1)).unwrap();
        assert!(!r.feasible);
        assert!(r.objective < 0.0);
    }

    #[test]
    fn determinism_across_workers() {
        let st = source_stats(&bernoulli_pair(0.11));
        let mut c = cfg(&[], 6, 99);
        c.refine_iters = 5;
        let a = search_df(&cross_link(0.1), &st, &c).unwrap();
        c.workers = 3;
        let b = search_df(&cross_link(0.1), &st, &c).unwrap();
        assert_eq!(a.to_json_string(), b.to_json_string());
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn restarts_extend_a_common_prefix() {
        let st = source_stats(&bernoulli_pair(0.11));
        let mut c = cfg(&[("W0", 1), ("W1", 2), ("W2", 1)], 2, 5);
        c.refine_iters = 3;
        let short = search_df(&cross_link(0.2), &st, &c).unwrap();
        c.restarts = 5;
        let long = search_df(&cross_link(0.2), &st, &c).unwrap();
        assert_eq!(&long.trace[..2], &short.trace[..]);
        assert!(long.objective >= short.objective);
    }

    #[test]
    fn classical_mac_cf_is_feasible() {
        let st = source_stats(&bernoulli_pair(0.11));
        let c = cfg(&[("U1", 1), ("U2", 1), ("YT1", 1), ("YT2", 1)], 2, 3);
        let r = search_cf(&parallel_bsc(0.05), &st, &c).unwrap();
        assert!(r.feasible);
        let Candidate::Cf(input) = &r.best_input else { panic!("strategy") };
        let j = build_cf_joint(&parallel_bsc(0.05), input).unwrap();
        assert_eq!(cf_constraints_with(&j, &st, &Tolerances::default()).unwrap(), r.report);
    }

    #[test]
    fn deaf_destination_cf_is_infeasible() {
        let st = source_stats(&bernoulli_pair(0.11));
        let c = cfg(&[("U1", 2), ("U2", 2), ("YT1", 2), ("YT2", 2)], 4, 3);
        let r = search_cf(&cross_link_deaf_destination(), &st, &c).unwrap();
        assert!(!r.feasible);
    }

    #[test]
    fn refine_is_monotone_and_valid() {
        let st = source_stats(&bernoulli_pair(0.11));
        let ch = cross_link(0.05);
        let problem = DfProblem {
            ch: &ch,
            st: &st,
            cards: [2, 2, 2, 2, 2],
            tol: Tolerances::default(),
        };
        for seed in 0..10 {
            let mut s = rng::stream(seed, "t", &[]);
            let start = Params::dirichlet(&problem.shape(), &mut s);
            let v0 = problem.objective(&start);
            let mut evals = 0;
            let (p, v) = refine(start, 4, &mut evals, |p| problem.objective(p));
            assert!(v >= v0);
            assert!(p.is_valid(1e-9));
            // a second pass from the result is never worse
            let (_, v2) = refine(p, 1, &mut evals, |p| problem.objective(p));
            assert!(v2 >= v);
        }
    }

    #[test]
    fn local_optimum_is_kept() {
        // objective maximized at the uniform row; every move loses
        let start = Params::uniform(&[(1, 2)]);
        let mut evals = 0;
        let (p, _) = refine(start.clone(), 10, &mut evals, |p| -(p.blocks[0][0] - 0.5).abs());
        assert_eq!(p, start);
    }

    #[test]
    fn config_validation() {
        let st = source_stats(&bernoulli_pair(0.11));
        assert!(search_df(&cross_link(0.0), &st, &cfg(&[("Q", 2)], 1, 0)).is_err());
        assert!(search_df(&cross_link(0.0), &st, &cfg(&[("W0", 0)], 1, 0)).is_err());
        assert!(search_df(&cross_link(0.0), &st, &cfg(&[], 0, 0)).is_err());
        let cards = cfg(&[], 1, 0).resolved_cards(Strategy::Cf, &cross_link(0.0)).unwrap();
        assert_eq!(describe_cards(&cards), "{U1=2, U2=2, YT1=3, YT2=3}");
    }

    #[test]
    fn result_json_round_trips() {
        let st = source_stats(&bernoulli_pair(0.11));
        let r = search_df(&cross_link(0.0), &st, &cfg(&[("W0", 1), ("W1", 1), ("W2", 1)], 1, 0)).unwrap();
        let s = r.to_json_string();
        let back: SearchResult = serde_json::from_str(&s).unwrap();
        assert_eq!(back.to_json_string(), s);
        assert_eq!(back.best_input, r.best_input);
    }
}
