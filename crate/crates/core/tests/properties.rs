//! Randomized invariants of schedules, interpolation, partitions and
//! checkpoints.

use alae::evaluation::{lerp, site_partition, slerp};
use alae::model_zoo::{Architecture, MlpArch, NetworkBundle};
use alae::rng::stream;
use alae::trainer::{checkpoint_load, checkpoint_save, growth_schedule, restore_bundle, Schedule, Trainer, TrainConfig};
use proptest::prelude::*;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #[test]
    fn growth_is_monotone(t in 1u64..5000, s in 1u64..5000, max_level in 0usize..6, a in 0u64..60_000, b in 0u64..60_000) {
        let sched = Schedule { transition_images: t, stabilization_images: s, max_level, ..Schedule::default() };
        let (lo, hi) = (a.min(b), a.max(b));
        let (g0, g1) = (growth_schedule(lo, &sched), growth_schedule(hi, &sched));
        prop_assert!(g0.level <= g1.level && g1.level <= max_level);
        prop_assert!((0.0..=1.0).contains(&g0.alpha));
        if g0.level == g1.level {
            prop_assert!(g0.alpha <= g1.alpha);
        }
        if hi >= sched.phases_total() {
            prop_assert_eq!(g1.level, max_level);
            prop_assert_eq!(g1.alpha, 1.0);
        }
    }

    #[test]
    fn partition_tiles_the_levels(levels in 1usize..12) {
        let [c, m, f] = site_partition(levels);
        prop_assert_eq!(c.start, 0);
        prop_assert_eq!(c.end, m.start);
        prop_assert_eq!(m.end, f.start);
        prop_assert_eq!(f.end, levels);
        prop_assert!(!c.is_empty());
    }

    #[test]
    fn interpolation_endpoints_and_norms(
        a in prop::collection::vec(-3.0f64..3.0, 4),
        b in prop::collection::vec(-3.0f64..3.0, 4),
        t in 0.0f64..1.0,
    ) {
        prop_assume!(norm(&a) > 1e-3 && norm(&b) > 1e-3);
        for f in [lerp, slerp] {
            let s0 = f(&a, &b, 0.0);
            let s1 = f(&a, &b, 1.0);
            for i in 0..4 {
                prop_assert!((s0[i] - a[i]).abs() < 1e-9 && (s1[i] - b[i]).abs() < 1e-9);
            }
        }
        let expected = norm(&a) + t * (norm(&b) - norm(&a));
        prop_assert!((norm(&slerp(&a, &b, t)) - expected).abs() < 1e-9);
        let l = lerp(&a, &b, t);
        for i in 0..4 {
            prop_assert!((l[i] - (1.0 - t) * a[i] - t * b[i]).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn checkpoints_round_trip(seed in 0u64..1000, hidden in 2usize..6) {
        let arch = Architecture::Mlp(MlpArch {
            data_dim: 5,
            latent_dim: 3,
            hidden_dim: hidden,
            hidden_layers: 1,
            mapping_layers: 2,
            disc_layers: 2,
        });
        let trainer = Trainer::<f32>::new(arch.clone(), TrainConfig::default(), seed, "seed = 1\n".into());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ckpt");
        let data = trainer.to_checkpoint(Default::default());
        checkpoint_save(&data, &path).unwrap();
        let loaded = checkpoint_load(&path).unwrap();
        let bundle = restore_bundle::<f32>(arch.clone(), &loaded).unwrap();
        for (p, q) in trainer.bundle.params.iter().zip(bundle.params.iter()) {
            prop_assert_eq!(&p.name, &q.name);
            prop_assert_eq!(&*p.value, &*q.value);
        }
        // Same seed, same initialization.
        let again = NetworkBundle::<f32>::new(arch, &mut stream(seed, alae::rng::INIT));
        for (p, q) in trainer.bundle.params.iter().zip(again.params.iter()) {
            prop_assert_eq!(&*p.value, &*q.value);
        }
    }
}
