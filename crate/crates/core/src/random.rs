//! Seeded random instances for property checks and benchmarks.
//!
//! Channel alphabets: inputs have 2 or 3 symbols, outputs 1 to 3, every
//! transition row drawn from a flat Dirichlet. Sources have 2 or 3 symbols per
//! side with a Dirichlet(0.3) joint, which spreads entropies over the full
//! range. Auxiliary alphabets have 1 to 3 symbols with flat Dirichlet rows.

use rand::Rng;

use crate::model::{CfCards, CfInput, Channel, DfInput, SourcePair};
use crate::prob::total_variation;
use crate::rng::{dirichlet, dirichlet_rows, Stream};

pub fn channel(rng: &mut Stream) -> Channel {
    let cards = [
        rng.random_range(2..=3),
        rng.random_range(2..=3),
        rng.random_range(1..=3),
        rng.random_range(1..=3),
        rng.random_range(1..=3),
    ];
    let out = cards[2] * cards[3] * cards[4];
    let probs = dirichlet_rows(rng, cards[0] * cards[1], out, 1.0);
    Channel::new(cards, probs).expect("valid random channel")
}

pub fn source(rng: &mut Stream) -> SourcePair {
    let (a, b) = (rng.random_range(2..=3), rng.random_range(2..=3));
    SourcePair::new(a, b, dirichlet(rng, a * b, 0.3)).expect("valid random source")
}

pub fn df_input(rng: &mut Stream, ch: &Channel) -> DfInput {
    let [x1, x2, ..] = ch.cards();
    let w = [rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=3)];
    let rows = w[0] * w[1] * w[2];
    DfInput::from_tables(
        [w[0], w[1], w[2], x1, x2],
        dirichlet(rng, w[0], 1.0),
        dirichlet(rng, w[1], 1.0),
        dirichlet(rng, w[2], 1.0),
        dirichlet_rows(rng, rows, x1, 1.0),
        dirichlet_rows(rng, rows, x2, 1.0),
    )
    .expect("valid random candidate")
}

/// One unconstrained compress-forward candidate.
pub fn cf_input(rng: &mut Stream, ch: &Channel) -> CfInput {
    let c = CfCards::for_channel(
        ch,
        rng.random_range(1..=3),
        rng.random_range(1..=3),
        rng.random_range(1..=3),
        rng.random_range(1..=3),
    );
    CfInput::from_tables(
        c,
        dirichlet(rng, c.u1, 1.0),
        dirichlet(rng, c.u2, 1.0),
        dirichlet_rows(rng, c.u1, c.x1, 1.0),
        dirichlet_rows(rng, c.u2, c.x2, 1.0),
        dirichlet_rows(rng, c.y1 * c.x1, c.yt1, 1.0),
        dirichlet_rows(rng, c.y2 * c.x2, c.yt2, 1.0),
    )
    .expect("valid random candidate")
}

/// Draws candidates until the two quantized outputs are independent within
/// `tol` in total variation. Returns the candidate and the number of draws.
pub fn cf_input_independent(rng: &mut Stream, ch: &Channel, tol: f64) -> (CfInput, usize) {
    let mut draws = 0;
    loop {
        draws += 1;
        let c = cf_input(rng, ch);
        let j = crate::model::build_cf_joint(ch, &c).expect("matching cards");
        let yt = j.marginalize(&[crate::model::YT1, crate::model::YT2]).expect("vars");
        let prod = yt
            .product_of_marginals(&[&[crate::model::YT1], &[crate::model::YT2]])
            .expect("vars");
        if total_variation(&yt, &prod).expect("same shape") <= tol {
            return (c, draws);
        }
    }
}

/// Stochastic map from `from` symbols to `to` symbols, one Dirichlet row per input.
pub fn garbling(rng: &mut Stream, from: usize, to: usize) -> Vec<Vec<f64>> {
    (0..from).map(|_| dirichlet(rng, to, 1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_cf_joint;
    use crate::regions::cf_terms;
    use crate::rng::stream;

    #[test]
    fn generators_are_deterministic() {
        let a = channel(&mut stream(5, "ch", &[0]));
        let b = channel(&mut stream(5, "ch", &[0]));
        assert_eq!(a, b);
        let mut r = stream(5, "cf", &[0]);
        let (c, _) = cf_input_independent(&mut r, &a, 1e-6);
        let t = cf_terms(&build_cf_joint(&a, &c).unwrap()).unwrap();
        assert!(t.tv_indep <= 1e-6);
    }
}
