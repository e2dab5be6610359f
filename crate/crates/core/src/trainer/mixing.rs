//! Style mixing: feeding two latent codes to disjoint ranges of style sites.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixingPolicy {
    pub probability: f64,
}

impl Default for MixingPolicy {
    fn default() -> Self {
        MixingPolicy { probability: 0.9 }
    }
}

/// Decides whether this batch mixes and, if so, where: returns the first
/// site that receives the second code, uniform over `1..sites`. Models
/// with a single site never mix. Consumes one draw, plus one for the site
/// when mixing.
pub fn draw_crossover(sites: usize, policy: &MixingPolicy, rng: &mut ChaCha8Rng) -> Option<usize> {
    if policy.probability <= 0.0 || sites < 2 {
        return None;
    }
    if rng.gen::<f64>() < policy.probability {
        Some(rng.gen_range(1..sites))
    } else {
        None
    }
}

/// Per-site codes: `w1` for sites before `crossover`, `w2` from it on.
pub fn assign_sites<C: Clone>(w1: &C, w2: &C, sites: usize, crossover: Option<usize>) -> Vec<C> {
    (0..sites)
        .map(|s| match crossover {
            Some(k) if s >= k => w2.clone(),
            _ => w1.clone(),
        })
        .collect()
}

/// Draws a crossover under `policy` and lays out the codes.
pub fn mix_styles<C: Clone>(w1: &C, w2: &C, sites: usize, policy: &MixingPolicy, rng: &mut ChaCha8Rng) -> Vec<C> {
    assign_sites(w1, w2, sites, draw_crossover(sites, policy, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn probability_zero_keeps_first_code() {
        let mut rng = stream(0, "m");
        let p = MixingPolicy { probability: 0.0 };
        assert_eq!(mix_styles(&1, &2, 8, &p, &mut rng), vec![1; 8]);
    }

    #[test]
    fn crossover_at_zero_gives_second_code() {
        assert_eq!(assign_sites(&1, &2, 4, Some(0)), vec![2; 4]);
        assert_eq!(assign_sites(&1, &2, 4, Some(3)), vec![1, 1, 1, 2]);
    }

    #[test]
    fn mixing_frequency() {
        let mut rng = stream(7, "m");
        let p = MixingPolicy::default();
        let mixed = (0..10_000).filter(|_| draw_crossover(8, &p, &mut rng).is_some()).count();
        let f = mixed as f64 / 10_000.0;
        assert!((0.88..=0.92).contains(&f), "{f}");
    }

    #[test]
    fn crossover_range() {
        let mut rng = stream(8, "m");
        let p = MixingPolicy { probability: 1.0 };
        let mut seen = [false; 6];
        for _ in 0..1000 {
            let k = draw_crossover(6, &p, &mut rng).unwrap();
            assert!((1..6).contains(&k));
            seen[k] = true;
        }
        assert!(seen[1..].iter().all(|&s| s));
        assert_eq!(draw_crossover(1, &p, &mut rng), None);
    }
}
