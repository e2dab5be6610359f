//! Progressive-growth schedule measured in training images.
//!
//! Level 0 trains for one stabilization phase at full blend. Every later
//! level first fades in over a transition phase (alpha ramps linearly from
//! 0 to 1), then trains for a stabilization phase at alpha = 1.

use serde::{Deserialize, Serialize};

use crate::model_zoo::GrowthState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    pub transition_images: u64,
    pub stabilization_images: u64,
    pub max_level: usize,
    /// Batch size per level; the last entry repeats for higher levels.
    pub batch_sizes: Vec<usize>,
    /// Learning rate per level; the last entry repeats.
    pub learning_rates: Vec<f64>,
    /// Total training images; defaults to the end of the last phase.
    pub total_images: Option<u64>,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            transition_images: 500_000,
            stabilization_images: 500_000,
            max_level: 0,
            batch_sizes: vec![128, 128, 128, 128, 64],
            learning_rates: vec![0.002],
            total_images: None,
        }
    }
}

fn per_level<V: Copy>(values: &[V], level: usize) -> V {
    values[level.min(values.len() - 1)]
}

impl Schedule {
    pub fn batch_size(&self, level: usize) -> usize {
        per_level(&self.batch_sizes, level)
    }

    pub fn learning_rate(&self, level: usize) -> f64 {
        per_level(&self.learning_rates, level)
    }

    /// Images until every phase has completed.
    pub fn phases_total(&self) -> u64 {
        self.stabilization_images + self.max_level as u64 * (self.transition_images + self.stabilization_images)
    }

    pub fn budget(&self) -> u64 {
        self.total_images.unwrap_or_else(|| self.phases_total())
    }

    /// First image count of the transition into `level` (`level >= 1`).
    pub fn level_start(&self, level: usize) -> u64 {
        assert!(level >= 1);
        self.stabilization_images + (level as u64 - 1) * (self.transition_images + self.stabilization_images)
    }
}

/// Level and blend factor after `images_seen` training images.
pub fn growth_schedule(images_seen: u64, schedule: &Schedule) -> GrowthState {
    let (t, s) = (schedule.transition_images, schedule.stabilization_images);
    if images_seen < s || schedule.max_level == 0 {
        return GrowthState::stable(0);
    }
    let mut rem = images_seen - s;
    for level in 1..=schedule.max_level {
        if rem < t {
            return GrowthState {
                level,
                alpha: (rem as f64 / t as f64).min(1.0),
            };
        }
        rem -= t;
        if rem < s {
            return GrowthState::stable(level);
        }
        rem -= s;
    }
    GrowthState::stable(schedule.max_level)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched() -> Schedule {
        Schedule {
            max_level: 3,
            ..Schedule::default()
        }
    }

    #[test]
    fn start_is_stable_level0() {
        assert_eq!(growth_schedule(0, &sched()), GrowthState::stable(0));
    }

    #[test]
    fn mid_transition() {
        let g = growth_schedule(500_000 + 250_000, &sched());
        assert_eq!(g.level, 1);
        assert_eq!(g.alpha, 0.5);
    }

    #[test]
    fn transition_ends_at_one() {
        let s = sched();
        for level in 1..=3 {
            let end = s.level_start(level) + s.transition_images;
            assert_eq!(growth_schedule(end, &s), GrowthState::stable(level));
            let before = growth_schedule(end - 1, &s);
            assert_eq!(before.level, level);
            assert!(before.alpha < 1.0);
        }
    }

    #[test]
    fn beyond_budget_is_final_stable() {
        let s = sched();
        assert_eq!(growth_schedule(u64::MAX / 2, &s), GrowthState::stable(3));
        assert_eq!(s.budget(), 3_500_000);
    }

    #[test]
    fn never_skips_and_alpha_monotone() {
        let s = Schedule {
            transition_images: 1000,
            stabilization_images: 700,
            max_level: 4,
            ..Schedule::default()
        };
        let mut prev = growth_schedule(0, &s);
        for i in (0..s.budget() + 500).step_by(37) {
            let g = growth_schedule(i, &s);
            assert!(g.level == prev.level || g.level == prev.level + 1);
            if g.level == prev.level {
                assert!(g.alpha >= prev.alpha);
            }
            prev = g;
        }
        assert_eq!(s.batch_size(4), 64);
        assert_eq!(s.batch_size(9), 64);
        assert_eq!(s.learning_rate(2), 0.002);
    }
}
