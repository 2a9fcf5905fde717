use std::collections::BTreeMap;

use proptest::prelude::*;

use macfcs::model::{
    build_cf_joint, build_df_joint, source_stats, DfInput, U1, U2, W0, W1, W2, X1, X2, Y1, Y2, Y3,
};
use macfcs::optimizer::{search, Candidate, SearchConfig, Strategy as Scheme};
use macfcs::prob::{chain_product, Dist, Factor, InfoCalc, Variable};
use macfcs::random;
use macfcs::regions::{
    cf_terms, df_constraints, df_constraints_with, df_raw_constraints, df_terms, fm_eliminate, mac_sum_capacity,
    LinIneq, RateConstraintSystem, Tolerances,
};
use macfcs::rng::{dirichlet, stream};
use macfcs::simulator::{simulate_df, simulate_sw, SimConfig};

fn random_dist(seed: u64, cards: &[usize]) -> Dist {
    let mut s = stream(seed, "prop-dist", &[]);
    let names = ["A", "B", "C", "D"];
    let vars: Vec<Variable> = cards.iter().zip(names).map(|(&k, n)| Variable::new(n, k)).collect();
    let size = cards.iter().product();
    Dist::new(vars, dirichlet(&mut s, size, 0.5)).unwrap()
}

fn cards3() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=3, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn entropy_bounds_and_normalization(seed in any::<u64>(), cards in cards3()) {
        let d = random_dist(seed, &cards);
        prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        let names = ["A", "B", "C"];
        for mask in 1..8usize {
            let subset: Vec<&str> = (0..3).filter(|i| mask >> i & 1 == 1).map(|i| names[i]).collect();
            let cap: usize = (0..3).filter(|i| mask >> i & 1 == 1).map(|i| cards[i]).product();
            let h = d.entropy(&subset).unwrap();
            prop_assert!(h >= 0.0 && h <= (cap as f64).log2() + 1e-9, "H({:?}) = {} cap {}", subset, h, cap);
            let m = d.marginalize(&subset).unwrap();
            prop_assert!((m.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn chain_rule_and_information_bounds(seed in any::<u64>(), cards in cards3()) {
        let d = random_dist(seed, &cards);
        let c = InfoCalc::new(&d);
        let h_ab = c.h(&["A", "B"]).unwrap();
        let h_a = c.h(&["A"]).unwrap();
        let h_b_given_a = h_ab - h_a;
        prop_assert!((h_ab - (h_a + h_b_given_a)).abs() <= 1e-9);
        let i = c.cmi(&["A"], &["B"], &["C"]).unwrap();
        let h_c = c.h(&["C"]).unwrap();
        prop_assert!(i >= 0.0);
        prop_assert!(i <= c.h(&["A", "C"]).unwrap() - h_c + 1e-9);
        prop_assert!(i <= c.h(&["B", "C"]).unwrap() - h_c + 1e-9);
    }

    #[test]
    fn data_processing(seed in any::<u64>(), cx in 1usize..=3, cy in 1usize..=3, cz in 1usize..=3) {
        let mut s = stream(seed, "prop-dpi", &[]);
        let xy = Factor::new(vec![Variable::new("X", cx), Variable::new("Y", cy)], vec![], dirichlet(&mut s, cx * cy, 0.5)).unwrap();
        let mut rows = Vec::new();
        for _ in 0..cy {
            rows.extend(dirichlet(&mut s, cz, 0.5));
        }
        let zy = Factor::new(vec![Variable::new("Z", cz)], vec![Variable::new("Y", cy)], rows).unwrap();
        let j = chain_product(&[xy, zy]).unwrap();
        prop_assert!((j.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        let c = InfoCalc::new(&j);
        prop_assert!(c.cmi(&["X"], &["Z"], &[]).unwrap() <= c.cmi(&["X"], &["Y"], &[]).unwrap() + 1e-9);
    }

    #[test]
    fn single_factor_chain_is_identity(seed in any::<u64>(), cards in cards3()) {
        let d = random_dist(seed, &cards);
        let f = Factor::new(d.vars().to_vec(), vec![], d.probs().to_vec()).unwrap();
        let j = chain_product(&[f]).unwrap();
        prop_assert_eq!(j.vars(), d.vars());
        for (a, b) in j.probs().iter().zip(d.probs()) {
            prop_assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn source_stats_chain_rules(seed in any::<u64>()) {
        let src = random::source(&mut stream(seed, "prop-src", &[]));
        let st = source_stats(&src);
        prop_assert!((st.h_joint - (st.h_s1 + st.h_s2_given_s1)).abs() <= 1e-9);
        prop_assert!((st.h_joint - (st.h_s2 + st.h_s1_given_s2)).abs() <= 1e-9);
        prop_assert!((st.i_s1_s2 - (st.h_s1 - st.h_s1_given_s2)).abs() <= 1e-9);
    }

    #[test]
    fn df_joint_structure(seed in any::<u64>()) {
        let mut s = stream(seed, "prop-df", &[]);
        let ch = random::channel(&mut s);
        let input = random::df_input(&mut s, &ch);
        let j = build_df_joint(&ch, &input).unwrap();
        let c = InfoCalc::new(&j);
        prop_assert!(c.cmi(&[W0], &[W1], &[]).unwrap() <= 1e-9);
        prop_assert!(c.cmi(&[W0], &[W2], &[]).unwrap() <= 1e-9);
        prop_assert!(c.cmi(&[W1], &[W2], &[]).unwrap() <= 1e-9);
    }

    #[test]
    fn df_point_mass_auxiliaries_give_product_inputs(seed in any::<u64>()) {
        let mut s = stream(seed, "prop-pm", &[]);
        let ch = random::channel(&mut s);
        let [x1c, x2c, ..] = ch.cards();
        let (px1, px2) = (dirichlet(&mut s, x1c, 1.0), dirichlet(&mut s, x2c, 1.0));
        let rows = 4;
        let mut f1 = Vec::new();
        let mut f2 = Vec::new();
        for _ in 0..rows {
            f1.extend(px1.iter().copied());
            f2.extend(px2.iter().copied());
        }
        let input = DfInput::from_tables([2, 2, 1, x1c, x2c], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0], f1, f2).unwrap();
        let j = build_df_joint(&ch, &input).unwrap();
        let m = j.marginalize(&[X1, X2, Y1, Y2, Y3]).unwrap();
        let [_, _, y1c, y2c, y3c] = ch.cards();
        let ny = y1c * y2c * y3c;
        for a in 0..x1c {
            for b in 0..x2c {
                for (y, &p) in ch.row(a, b).iter().enumerate() {
                    let got = m.probs()[(a * x2c + b) * ny + y];
                    prop_assert!((got - px1[a] * px2[b] * p).abs() <= 1e-15);
                }
            }
        }
    }

    #[test]
    fn cf_inputs_conditionally_independent(seed in any::<u64>()) {
        let mut s = stream(seed, "prop-cf", &[]);
        let ch = random::channel(&mut s);
        let input = random::cf_input(&mut s, &ch);
        let j = build_cf_joint(&ch, &input).unwrap();
        prop_assert!(InfoCalc::new(&j).cmi(&[X1], &[X2], &[U1, U2]).unwrap() <= 1e-9);
    }

    #[test]
    fn df_min_form_equivalence(seed in any::<u64>()) {
        let mut s = stream(seed, "prop-min", &[]);
        let ch = random::channel(&mut s);
        let src = random::source(&mut s);
        let input = random::df_input(&mut s, &ch);
        let j = build_df_joint(&ch, &input).unwrap();
        let st = source_stats(&src);
        let stated = df_constraints(&j, &st).unwrap();
        let raw = df_raw_constraints(&j, &st).unwrap();
        prop_assert_eq!(stated.feasible, raw.feasible);
        let second = |label: &str| stated.get(label).unwrap().branches.as_ref().unwrap()[1].margin;
        prop_assert!((second("1a") - raw.get("4b").unwrap().margin).abs() <= 1e-12);
        prop_assert!((second("1b") - raw.get("4c").unwrap().margin).abs() <= 1e-12);
    }

    #[test]
    fn mac_degeneracy(seed in any::<u64>()) {
        let mut s = stream(seed, "prop-mac", &[]);
        let ch = random::channel(&mut s);
        let [x1c, x2c, ..] = ch.cards();
        let (px1, px2) = (dirichlet(&mut s, x1c, 1.0), dirichlet(&mut s, x2c, 1.0));
        let input = DfInput::independent_inputs(&px1, &px2).unwrap();
        let t = df_terms(&build_df_joint(&ch, &input).unwrap()).unwrap();

        // direct joint p(x1) p(x2) p(y3 | x1, x2)
        let law = ch.output_marginal(2);
        let y3c = ch.cards()[4];
        let mut probs = Vec::new();
        for a in 0..x1c {
            for b in 0..x2c {
                for y in 0..y3c {
                    probs.push(px1[a] * px2[b] * law[a][b][y]);
                }
            }
        }
        let d = Dist::new(vec![Variable::new("a", x1c), Variable::new("b", x2c), Variable::new("y", y3c)], probs).unwrap();
        let c = InfoCalc::new(&d);
        prop_assert!((t.dest_01 - c.cmi(&["a"], &["y"], &["b"]).unwrap()).abs() <= 1e-9);
        prop_assert!((t.dest_02 - c.cmi(&["b"], &["y"], &["a"]).unwrap()).abs() <= 1e-9);
        prop_assert!((t.dest_sum - c.cmi(&["a", "b"], &["y"], &[]).unwrap()).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cut_set_dominance(seed in any::<u64>()) {
        let mut s = stream(seed, "prop-cut", &[]);
        let ch = random::channel(&mut s);
        let cap = mac_sum_capacity(&ch).unwrap();
        for _ in 0..3 {
            let input = random::df_input(&mut s, &ch);
            let t = df_terms(&build_df_joint(&ch, &input).unwrap()).unwrap();
            prop_assert!(t.dest_sum <= cap + 1e-6, "{} > {}", t.dest_sum, cap);
        }
    }

    #[test]
    fn garbling_never_helps(seed in any::<u64>(), to in 1usize..=3) {
        let mut s = stream(seed, "prop-garble", &[]);
        let ch = random::channel(&mut s);
        let g = random::garbling(&mut s, ch.cards()[4], to);
        let worse = ch.garble_y3(&g).unwrap();

        let input = random::df_input(&mut s, &ch);
        let a = df_terms(&build_df_joint(&ch, &input).unwrap()).unwrap();
        let b = df_terms(&build_df_joint(&worse, &input).unwrap()).unwrap();
        for (x, y) in [
            (a.w0, b.w0),
            (a.dest_1, b.dest_1),
            (a.dest_2, b.dest_2),
            (a.dest_01, b.dest_01),
            (a.dest_02, b.dest_02),
            (a.dest_12, b.dest_12),
            (a.dest_sum, b.dest_sum),
        ] {
            prop_assert!(y <= x + 1e-9);
        }

        let cf = random::cf_input(&mut s, &ch);
        let a = cf_terms(&build_cf_joint(&ch, &cf).unwrap()).unwrap();
        let b = cf_terms(&build_cf_joint(&worse, &cf).unwrap()).unwrap();
        for (x, y) in [
            (a.msg_1, b.msg_1),
            (a.msg_2, b.msg_2),
            (a.msg_sum, b.msg_sum),
            (a.side_1, b.side_1),
            (a.side_2, b.side_2),
            (a.side_sum, b.side_sum),
            (a.bin_1, b.bin_1),
            (a.bin_2, b.bin_2),
            (a.bin_sum, b.bin_sum),
        ] {
            prop_assert!(y <= x + 1e-9);
        }
    }

    #[test]
    fn fm_elimination_is_sound(
        rows in prop::collection::vec((prop::collection::vec(-2i32..=2, 3), 0i32..=8, any::<bool>()), 1..7),
        nonneg in any::<bool>(),
        var in 0usize..3,
    ) {
        let names = ["a", "b", "c"];
        let ineqs: Vec<LinIneq> = rows
            .iter()
            .enumerate()
            .map(|(i, (cs, rhs, strict))| {
                let terms: Vec<(&str, f64)> = cs.iter().zip(names).map(|(&c, n)| (n, c as f64)).collect();
                LinIneq::le(&format!("q{i}"), &terms, *rhs as f64 / 2.0 - 1.0, *strict)
            })
            .collect();
        let sys = RateConstraintSystem::new(names.iter().map(|s| s.to_string()).collect(), ineqs, nonneg).unwrap();
        let out = fm_eliminate(&sys, names[var]).unwrap();
        prop_assert!(out.ineqs.iter().all(|q| q.coeff(names[var]) == 0.0));
        let grid: Vec<f64> = (-8..=8).map(|k| k as f64 * 0.25).collect();
        for &a in &grid {
            for &b in &grid {
                for &c in &grid {
                    let p: BTreeMap<String, f64> = [("a", a), ("b", b), ("c", c)].iter().map(|&(k, v)| (k.to_string(), v)).collect();
                    let inside = sys.holds_at(&p, 0.0) && (!nonneg || (a >= 0.0 && b >= 0.0 && c >= 0.0));
                    if inside {
                        prop_assert!(out.ineqs.iter().all(|q| q.slack(&p) >= -1e-9), "point {:?}", p);
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn optimizer_sound_deterministic_and_monotone(seed in any::<u64>()) {
        let mut s = stream(seed, "prop-opt", &[]);
        let ch = random::channel(&mut s);
        let st = source_stats(&random::source(&mut s));
        let cfg = |restarts: usize, workers: usize| SearchConfig {
            restarts,
            seed,
            workers,
            refine_iters: 4,
            cards: [("W0", 2), ("W1", 1), ("W2", 2)].iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            ..SearchConfig::default()
        };
        let a = search(Scheme::Df, &ch, &st, &cfg(3, 1)).unwrap();
        let b = search(Scheme::Df, &ch, &st, &cfg(3, 3)).unwrap();
        prop_assert_eq!(a.to_json_string(), b.to_json_string());
        let more = search(Scheme::Df, &ch, &st, &cfg(5, 2)).unwrap();
        prop_assert!(more.objective >= a.objective, "{} < {} (restart {} vs {})", more.objective, a.objective, more.restart, a.restart);

        let Candidate::Df(input) = &a.best_input else { panic!("df candidate") };
        for f in [&input.f_x1, &input.f_x2] {
            for row in f.rows() {
                prop_assert!(row.iter().all(|&p| p >= 0.0));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
        }
        let again = df_constraints_with(&build_df_joint(&ch, input).unwrap(), &st, &Tolerances::default()).unwrap();
        prop_assert_eq!(&again, &a.report);
        prop_assert_eq!(again.feasible, a.feasible);
    }

    #[test]
    fn simulation_deterministic_across_workers(seed in any::<u64>()) {
        let src = random::source(&mut stream(seed, "prop-sim", &[]));
        let mut cfg = SimConfig {
            n: 5,
            trials: 64,
            seed,
            rates: [("R1", 0.8), ("R2", 0.8)].iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            workers: 1,
            ..SimConfig::default()
        };
        let a = simulate_sw(&src, &cfg).unwrap();
        cfg.workers = 3;
        let b = simulate_sw(&src, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.error_rate, a.errors as f64 / a.trials as f64);
        prop_assert!(a.breakdown.values().sum::<u64>() >= a.errors);

        let ch = macfcs::model::reference::cross_link(0.1);
        let input = DfInput::independent_inputs(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        let dcfg = SimConfig { n: 4, blocks: 3, trials: 16, seed, workers: 1, ..SimConfig::default() };
        let a = simulate_df(&ch, &macfcs::model::reference::bernoulli_pair(0.2), &input, &dcfg).unwrap();
        let b = simulate_df(&ch, &macfcs::model::reference::bernoulli_pair(0.2), &input, &SimConfig { workers: 4, ..dcfg }).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.breakdown.values().sum::<u64>() >= a.errors);
    }
}
