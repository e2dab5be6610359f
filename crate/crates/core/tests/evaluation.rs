//! Metric kernels and artifact layouts against closed forms.

use alae::evaluation::{
    fid_export, knn_accuracy, linear_svm_accuracy, path_length_kernel, perceptual_path_length, reconstruct_batch,
    style_mixing_grid, traversal_grid, EvalError, FeatureKind, FeatureSet, LatentSpace, MeanSquaredPixel, PplConfig,
    PplMode, SiteRange, SquaredEuclidean, SvmConfig,
};
use alae::model_zoo::{Architecture, MlpArch, NetworkBundle, StyleArch};
use alae::params::Group;
use alae::rng::{normal_array, stream};
use alae_autodiff::Array;
use rand::seq::SliceRandom;
use rand::Rng;

fn tiny_mlp() -> Architecture {
    Architecture::Mlp(MlpArch {
        data_dim: 16,
        latent_dim: 4,
        hidden_dim: 8,
        hidden_layers: 2,
        mapping_layers: 2,
        disc_layers: 2,
    })
}

fn tiny_style(max_level: usize) -> Architecture {
    Architecture::Style(StyleArch {
        latent_dim: 6,
        mapping_layers: 2,
        disc_layers: 2,
        image_channels: 3,
        max_level,
        base_channels: 8,
        min_channels: 4,
        max_channels: 8,
        noise: true,
    })
}

fn style_bundle(level: usize) -> NetworkBundle<f64> {
    let mut rng = stream(11, "bundle");
    let mut b = NetworkBundle::new(tiny_style(level), &mut rng);
    for l in 1..=level {
        b.grow_to_level(l, &mut rng).unwrap();
    }
    b.set_growth(alae::model_zoo::GrowthState::stable(level)).unwrap();
    b
}

fn assert_close(a: &[f32], b: &[f32]) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() < 1e-5, "{x} vs {y}");
    }
}

#[test]
fn identity_generator_path_length_is_the_squared_distance() {
    let mut rng = stream(1, "ppl");
    let a: Array<f64> = normal_array(&[16, 5], &mut rng);
    let b: Array<f64> = normal_array(&[16, 5], &mut rng);
    let ts: Vec<f64> = (0..16).map(|_| rng.gen::<f64>()).collect();
    let mut identity = |x: &Array<f64>| Ok::<_, EvalError>(x.clone());
    for eps in [1e-4, 5e-5] {
        let l = path_length_kernel(&a, &b, &ts, eps, LatentSpace::W, &mut identity, &SquaredEuclidean).unwrap();
        for i in 0..16 {
            let expected: f64 = (0..5).map(|j| (b.data()[i * 5 + j] - a.data()[i * 5 + j]).powi(2)).sum();
            assert!((l[i] - expected).abs() < 1e-6, "eps {eps}: {} vs {expected}", l[i]);
        }
    }
}

#[test]
fn constant_generator_has_zero_path_length() {
    let mut bundle = NetworkBundle::<f64>::new(tiny_mlp(), &mut stream(2, "init"));
    let ids: Vec<_> = bundle
        .params
        .iter()
        .filter(|p| p.group == Group::Generator)
        .map(|p| p.name.clone())
        .collect();
    for name in ids {
        let id = bundle.params.id_of(&name).unwrap();
        bundle.params.value_mut(id).data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    for space in [LatentSpace::Z, LatentSpace::W] {
        let cfg = PplConfig {
            space,
            n_pairs: 40,
            batch: 16,
            ..PplConfig::default()
        };
        let v = perceptual_path_length(&bundle, &cfg, &MeanSquaredPixel, &mut stream(3, "p")).unwrap();
        assert_eq!(v, 0.0);
    }
}

#[test]
fn path_length_is_non_negative_and_reproducible() {
    let bundle = style_bundle(1);
    for mode in [PplMode::Full, PplMode::End] {
        let cfg = PplConfig {
            space: LatentSpace::Z,
            mode,
            n_pairs: 6,
            batch: 4,
            ..PplConfig::default()
        };
        let a = perceptual_path_length(&bundle, &cfg, &MeanSquaredPixel, &mut stream(4, "p")).unwrap();
        let b = perceptual_path_length(&bundle, &cfg, &MeanSquaredPixel, &mut stream(4, "p")).unwrap();
        assert!(a >= 0.0 && a.is_finite());
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

fn random_features(n: usize, d: usize, seed: u64) -> FeatureSet {
    let mut rng = stream(seed, "features");
    let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..3)).collect();
    let mut data: Vec<f64> = normal_array::<f64>(&[n, d], &mut rng).into_vec();
    for (i, &l) in labels.iter().enumerate() {
        data[i * d + l as usize] += 2.5;
    }
    FeatureSet::new(FeatureKind::Short, Array::from_vec(vec![n, d], data), labels).unwrap()
}

fn permute_columns(set: &FeatureSet, perm: &[usize]) -> FeatureSet {
    let d = set.dim();
    let data: Vec<f64> = (0..set.len())
        .flat_map(|i| perm.iter().map(move |&j| (i, j)))
        .map(|(i, j)| set.matrix.data()[i * d + j])
        .collect();
    FeatureSet::new(set.kind, Array::from_vec(vec![set.len(), d], data), set.labels.clone()).unwrap()
}

#[test]
fn probes_are_invariant_to_coordinate_permutations() {
    let train = random_features(300, 6, 1);
    let test = random_features(100, 6, 2);
    let mut perm: Vec<usize> = (0..6).collect();
    perm.shuffle(&mut stream(5, "perm"));
    let (ptrain, ptest) = (permute_columns(&train, &perm), permute_columns(&test, &perm));
    assert_eq!(
        knn_accuracy(&train, &test, 1).unwrap(),
        knn_accuracy(&ptrain, &ptest, 1).unwrap()
    );
    let a = linear_svm_accuracy(&train, &test, &SvmConfig::default()).unwrap();
    let b = linear_svm_accuracy(&ptrain, &ptest, &SvmConfig::default()).unwrap();
    assert!(a.converged && b.converged);
    assert_eq!(a.accuracy, b.accuracy);
    assert!(a.accuracy > 0.8, "{}", a.accuracy);
}

#[test]
fn memorized_training_set_is_recovered_by_1nn() {
    let train = random_features(200, 4, 3);
    assert_eq!(knn_accuracy(&train, &train, 1).unwrap(), 1.0);
}

#[test]
fn label_permuted_training_set_gives_chance_svm() {
    let train = random_features(3000, 6, 6);
    let test = random_features(1000, 6, 7);
    let mut labels = train.labels.clone();
    labels.shuffle(&mut stream(8, "labels"));
    let shuffled = FeatureSet::new(train.kind, train.matrix.clone(), labels).unwrap();
    let acc = linear_svm_accuracy(&shuffled, &test, &SvmConfig::default()).unwrap().accuracy;
    assert!((acc - 1.0 / 3.0).abs() < 0.07, "{acc}");
}

#[test]
fn mismatched_feature_sets_are_rejected() {
    let a = random_features(10, 4, 1);
    let b = random_features(10, 5, 2);
    assert!(matches!(knn_accuracy(&a, &b, 1), Err(EvalError::Mismatch(_))));
    let long = FeatureSet::new(FeatureKind::Long, a.matrix.clone(), a.labels.clone()).unwrap();
    assert!(matches!(
        linear_svm_accuracy(&a, &long, &SvmConfig::default()),
        Err(EvalError::Mismatch(_))
    ));
}

#[test]
fn traversal_layout_and_endpoints() {
    let bundle = style_bundle(1);
    let mut rng = stream(9, "t");
    let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g = traversal_grid(&bundle, LatentSpace::W, (&a, &b), 5).unwrap();
    assert_eq!((g.rows, g.cols, g.width(), g.height()), (1, 5, 5 * 8, 8));

    let two = traversal_grid(&bundle, LatentSpace::W, (&a, &b), 2).unwrap();
    let ends = traversal_grid(&bundle, LatentSpace::W, (&a, &a), 2).unwrap();
    assert_close(&two.tile(0, 0), &ends.tile(0, 0));
    let same = traversal_grid(&bundle, LatentSpace::Z, (&a, &a), 4).unwrap();
    for c in 1..4 {
        assert_close(&same.tile(0, c), &same.tile(0, 0));
    }
}

#[test]
fn reconstruction_shapes_and_gap() {
    let bundle = style_bundle(1);
    let x: Array<f64> = normal_array::<f64>(&[3, 8, 8, 3], &mut stream(10, "x")).map(|v| v.tanh());
    let r = reconstruct_batch(&bundle, &x, 2).unwrap();
    assert_eq!(r.output.shape(), x.shape());
    assert!(r.latent_gap >= 0.0 && r.output_variance > 0.0);
    assert_eq!((r.grid.rows, r.grid.cols), (2, 4));
    let wrong: Array<f64> = Array::zeros(&[1, 4, 4, 3]);
    assert!(reconstruct_batch(&bundle, &wrong, 2).is_err());
}

#[test]
fn style_mixing_layout_and_partition() {
    let bundle = style_bundle(2);
    let mut rng = stream(12, "mix");
    let src: Array<f64> = normal_array::<f64>(&[3, 16, 16, 3], &mut rng).map(|v| v.tanh());
    let dst: Array<f64> = normal_array::<f64>(&[5, 16, 16, 3], &mut rng).map(|v| v.tanh());
    let sites = bundle.num_sites();

    let coarse = style_mixing_grid(&bundle, &src, &dst, &SiteRange::Coarse).unwrap();
    assert_eq!((coarse.rows, coarse.cols), (4, 6));

    let none = style_mixing_grid(&bundle, &src, &dst, &SiteRange::Sites(0..0)).unwrap();
    let all = style_mixing_grid(&bundle, &src, &dst, &SiteRange::Sites(0..sites)).unwrap();
    let dst_rec = reconstruct_batch(&bundle, &dst, 1).unwrap().grid;
    let src_rec = reconstruct_batch(&bundle, &src, 1).unwrap().grid;
    for i in 0..3 {
        for j in 0..5 {
            assert_close(&none.tile(i + 1, j + 1), &dst_rec.tile(j, 1));
            assert_close(&all.tile(i + 1, j + 1), &src_rec.tile(i, 1));
        }
    }

    // Complementary ranges: taking the source on A equals taking the
    // destination on the complement of A with roles swapped.
    let k = 2;
    let a = style_mixing_grid(&bundle, &src, &dst, &SiteRange::Sites(0..k)).unwrap();
    let b = style_mixing_grid(&bundle, &dst, &src, &SiteRange::Sites(k..sites)).unwrap();
    for i in 0..3 {
        for j in 0..5 {
            assert_close(&a.tile(i + 1, j + 1), &b.tile(j + 1, i + 1));
        }
    }
}

#[test]
fn fid_export_writes_a_manifest_deterministically() {
    let bundle = style_bundle(0);
    let dir = tempfile::tempdir().unwrap();
    let first = fid_export(&bundle, 7, &dir.path().join("a"), None, &mut stream(13, "fid")).unwrap();
    let second = fid_export(&bundle, 7, &dir.path().join("b"), None, &mut stream(13, "fid")).unwrap();
    assert_eq!(first.len(), 7);
    let manifest = std::fs::read_to_string(dir.path().join("a/manifest.txt")).unwrap();
    assert_eq!(manifest.lines().count(), 7);
    for rel in &first {
        let a = std::fs::read(dir.path().join("a").join(rel)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(rel)).unwrap();
        assert_eq!(a, b);
    }
    assert_eq!(first, second);
}
