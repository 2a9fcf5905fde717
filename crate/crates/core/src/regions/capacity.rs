//! Sum capacity of the destination link over joint (cooperative) inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Channel;
use crate::rng;

const GAP_TOL: f64 = 1e-7;
const RESTARTS: usize = 8;
const MAX_ITERS: usize = 200_000;
const SEED: u64 = 0x00C0_FFEE;

/// Lower and upper bounds (bits) from the alternating maximization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityBounds {
    pub lower: f64,
    pub upper: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Runs one Blahut-Arimoto pass on the `inputs × outputs` matrix `w` from
/// starting distribution `r`. Returns bounds in bits.
fn blahut_arimoto(w: &[Vec<f64>], mut r: Vec<f64>) -> CapacityBounds {
    let ny = w[0].len();
    let mut q = vec![0.0; ny];
    let mut c = vec![0.0; w.len()];
    let mut last = CapacityBounds {
        lower: 0.0,
        upper: f64::INFINITY,
        converged: false,
        iterations: 0,
    };
    for it in 1..=MAX_ITERS {
        q.iter_mut().for_each(|v| *v = 0.0);
        for (rk, row) in r.iter().zip(w) {
            for (qy, &p) in q.iter_mut().zip(row) {
                *qy += rk * p;
            }
        }
        for (ck, row) in c.iter_mut().zip(w) {
            let mut d = 0.0;
            for (&p, &qy) in row.iter().zip(&q) {
                if p > 0.0 {
                    d += p * (p / qy).ln();
                }
            }
            *ck = d.exp();
        }
        let z: f64 = r.iter().zip(&c).map(|(a, b)| a * b).sum();
        let cmax = c.iter().copied().fold(0.0f64, f64::max);
        let lower = z.ln() / std::f64::consts::LN_2;
        let upper = cmax.ln() / std::f64::consts::LN_2;
        last = CapacityBounds {
            lower: lower.max(0.0),
            upper: upper.max(0.0),
            converged: upper - lower < GAP_TOL,
            iterations: it,
        };
        if last.converged {
            break;
        }
        for (rk, ck) in r.iter_mut().zip(&c) {
            *rk *= ck / z;
        }
    }
    last
}

/// Bounds on `max over p(x1, x2) of I(X1, X2; Y3)`, best over eight starts
/// (the first uniform, the rest Dirichlet draws from a fixed stream).
pub fn mac_sum_capacity_bounds(ch: &Channel) -> CapacityBounds {
    let [x1c, x2c, ..] = ch.cards();
    let m = ch.output_marginal(2);
    let w: Vec<Vec<f64>> = (0..x1c).flat_map(|a| (0..x2c).map(move |b| (a, b))).map(|(a, b)| m[a][b].clone()).collect();
    let k = w.len();
    let mut best: Option<CapacityBounds> = None;
    for restart in 0..RESTARTS {
        let r0 = if restart == 0 {
            vec![1.0 / k as f64; k]
        } else {
            let mut s = rng::stream(SEED, "capacity", &[restart as u64]);
            rng::dirichlet(&mut s, k, 1.0)
        };
        let b = blahut_arimoto(&w, r0);
        best = Some(match best {
            None => b,
            Some(prev) => CapacityBounds {
                lower: prev.lower.max(b.lower),
                upper: prev.upper.min(b.upper),
                converged: prev.converged || b.converged,
                iterations: prev.iterations + b.iterations,
            },
        });
    }
    let mut b = best.expect("at least one restart");
    b.converged = b.converged || b.upper - b.lower < GAP_TOL;
    b
}

/// Sum capacity in bits; errors with the best lower bound when no restart
/// closes the duality gap to within 1e-7.
pub fn mac_sum_capacity(ch: &Channel) -> Result<f64> {
    let b = mac_sum_capacity_bounds(ch);
    if b.converged {
        Ok(b.lower)
    } else {
        Err(Error::NotConverged { best: b.lower })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference;

    #[test]
    fn noiseless_pair_has_two_bits() {
        let c = mac_sum_capacity(&reference::cross_link(0.0)).unwrap();
        assert!((c - 2.0).abs() < 1e-7);
    }

    #[test]
    fn single_bsc_user() {
        // Y3 = X1 through BSC(0.05); X2 ignored
        let ch = Channel::from_components(
            [2, 2, 1, 1, 2],
            |_, _| vec![1.0],
            |_, _| vec![1.0],
            |a, _| if a == 0 { vec![0.95, 0.05] } else { vec![0.05, 0.95] },
        )
        .unwrap();
        let c = mac_sum_capacity(&ch).unwrap();
        assert!((c - 0.713_603_042_884_043_9).abs() < 1e-6);
    }

    #[test]
    fn useless_channel() {
        assert!(mac_sum_capacity(&reference::useless()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn z_channel_matches_closed_form() {
        // Z channel with crossover 0.5 on the pair (x1 xor x2 decides the input)
        let ch = Channel::from_components(
            [2, 1, 1, 1, 2],
            |_, _| vec![1.0],
            |_, _| vec![1.0],
            |a, _| if a == 0 { vec![1.0, 0.0] } else { vec![0.5, 0.5] },
        )
        .unwrap();
        // log2(5/4)
        let c = mac_sum_capacity(&ch).unwrap();
        assert!((c - 0.321_928_094_887_362_3).abs() < 1e-6);
    }
}
