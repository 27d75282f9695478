use std::fs;

use fuznet::autodiff::Tensor;
use fuznet::rng::SeededRng;
use fuznet::synthdata::*;
use fuznet::Error;
use proptest::prelude::*;

fn small_config(seed: u64) -> CorpusConfig {
    CorpusConfig {
        seed,
        n_train: 3,
        n_dev: 2,
        n_test: 2,
        features: Some(vec![
            "fau_lld".into(),
            "text_use".into(),
            "mfcc_funct".into(),
        ]),
        ..CorpusConfig::default()
    }
}

#[test]
fn catalog_has_twelve_streams() {
    let expected = [
        ("mfcc_funct", 78, 1300),
        ("egemaps_funct", 88, 1410),
        ("mfcc_lld", 39, 140_500),
        ("egemaps_lld", 23, 140_500),
        ("boaw_mfcc", 100, 14_050),
        ("boaw_egemaps", 100, 14_050),
        ("ds_densenet", 1920, 1415),
        ("pose_lld", 6, 15_000),
        ("gaze_lld", 8, 15_000),
        ("fau_lld", 35, 15_000),
        ("bovw", 100, 15_000),
        ("text_use", 512, 400),
    ];
    let cat = feature_catalog();
    assert_eq!(cat.len(), expected.len());
    for (spec, (name, dim, steps)) in cat.iter().zip(expected) {
        assert_eq!(
            (spec.name.as_str(), spec.dim, spec.timesteps),
            (name, dim, steps)
        );
    }
}

#[test]
fn zero_target_is_pure_noise() {
    let cat = Catalog::full().scaled(100);
    let planted = Generator::new(4, cat.clone(), SignalStrength::default());
    let silent = Generator::new(
        4,
        cat,
        SignalStrength {
            text: 0.0,
            audio: 0.0,
            video: 0.0,
        },
    );
    let a = planted.generate_features(17, 0).unwrap();
    let b = silent.generate_features(17, 24).unwrap();
    assert_eq!(a, b);
}

#[test]
fn generation_is_deterministic_and_validated() {
    let g = Generator::new(1, Catalog::full().scaled(100), SignalStrength::default());
    let a = g.generate_session("x", Partition::Dev, 5, 13).unwrap();
    let b = g.generate_session("x", Partition::Dev, 5, 13).unwrap();
    assert_eq!(a, b);
    a.validate(g.catalog()).unwrap();
    assert_eq!(a.features.len(), 12);
    assert_eq!(a.feature("fau_lld").unwrap().shape(), &[150, 35]);
    for bad in [-1, 25] {
        assert!(matches!(
            g.generate_session("x", Partition::Dev, 5, bad),
            Err(Error::Domain { .. })
        ));
    }
}

#[test]
fn feature_subset_matches_full_generation() {
    let g = Generator::new(2, Catalog::full().scaled(100), SignalStrength::default());
    let full = g.generate_features(9, 20).unwrap();
    let sub = g
        .clone()
        .with_features(&["bovw"])
        .unwrap()
        .generate_features(9, 20)
        .unwrap();
    assert_eq!(sub.len(), 1);
    assert_eq!(sub["bovw"], full["bovw"]);
    assert!(matches!(g.with_features(&["nope"]), Err(Error::Config(_))));
}

/// Ordinary least squares R² of y on x.
fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

#[test]
fn window_contrast_grows_linearly_with_target() {
    let g = Generator::new(8, Catalog::full().scaled(100), SignalStrength::default());
    for name in ["fau_lld", "text_use", "mfcc_funct"] {
        let plan = g.plan(name).unwrap().clone();
        let targets: Vec<f64> = (0..=24).map(f64::from).collect();
        let contrast: Vec<f64> = (0..=24)
            .map(|y| {
                let m = &g.generate_features(31, y).unwrap()[name];
                let proj: Vec<f64> = (0..m.shape()[0])
                    .map(|r| {
                        m.row(r)
                            .iter()
                            .zip(&plan.direction)
                            .map(|(a, b)| a * b)
                            .sum()
                    })
                    .collect();
                let inside = &proj[plan.start..plan.start + plan.len];
                let outside: Vec<f64> = proj
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i < plan.start || *i >= plan.start + plan.len)
                    .map(|(_, v)| *v)
                    .collect();
                let mean_in = inside.iter().sum::<f64>() / inside.len() as f64;
                let mean_out = if outside.is_empty() {
                    0.0
                } else {
                    outside.iter().sum::<f64>() / outside.len() as f64
                };
                mean_in - mean_out
            })
            .collect();
        assert!(r_squared(&targets, &contrast) > 0.99, "{name}");
    }
}

#[test]
fn planted_window_covers_a_tenth() {
    let g = Generator::new(3, Catalog::full().scaled(100), SignalStrength::default());
    assert_eq!(g.plan("fau_lld").unwrap().len, 15);
    assert_eq!(g.plan("text_use").unwrap().len, 1);
    let u = &g.plan("bovw").unwrap().direction;
    assert!((u.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn labels_spread_over_range() {
    for seed in 0..10 {
        let sched = CorpusConfig {
            seed,
            ..CorpusConfig::default()
        }
        .schedule();
        assert_eq!(sched.len(), 275);
        for p in Partition::ALL {
            let labels: Vec<u8> = sched.iter().filter(|s| s.1 == p).map(|s| s.2).collect();
            assert!(labels.iter().any(|&l| l < 8), "seed {seed} {p}");
            assert!(labels.iter().any(|&l| l >= 16), "seed {seed} {p}");
            assert!(labels.iter().all(|&l| l <= 24));
        }
    }
}

#[test]
fn default_corpus_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CorpusConfig::default();
    let manifest = generate_corpus(dir.path(), &cfg).unwrap();
    assert_eq!(manifest.entries.len(), 275);
    let counts: Vec<usize> = Partition::ALL
        .iter()
        .map(|p| {
            manifest
                .entries
                .iter()
                .filter(|e| e.partition == *p)
                .count()
        })
        .collect();
    assert_eq!(counts, vec![163, 56, 56]);
    let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
    assert!(text.starts_with("#FZCORPUS v1 seed=0 divisor=100\n"));
    let only = vec!["fau_lld".to_string()];
    let corpus = Corpus::load(dir.path(), Some(&only)).unwrap();
    assert_eq!(corpus.sessions.len(), 275);
    assert_eq!(
        corpus.sessions[0].feature("fau_lld").unwrap().shape(),
        &[150, 35]
    );
}

#[test]
fn same_seed_same_digest() {
    let (a, b, c) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    let ma = generate_corpus(a.path(), &small_config(5)).unwrap();
    let mb = generate_corpus(b.path(), &small_config(5)).unwrap();
    let mc = generate_corpus(c.path(), &small_config(6)).unwrap();
    let da = ma.digest(a.path()).unwrap();
    assert_eq!(da, mb.digest(b.path()).unwrap());
    assert_ne!(da, mc.digest(c.path()).unwrap());
    assert_eq!(da.len(), 64);
}

#[test]
fn disk_and_memory_corpora_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(11);
    generate_corpus(dir.path(), &cfg).unwrap();
    let loaded = Corpus::load(dir.path(), None).unwrap();
    assert_eq!(loaded, Corpus::generate(&cfg).unwrap());
    assert_eq!(loaded.partition(Partition::Train).len(), 3);
}

#[test]
fn load_rejects_damage() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_corpus(dir.path(), &small_config(2)).unwrap();
    let victim = dir.path().join(&m.entries[1].files["text_use"]);
    let mut bytes = fs::read(&victim).unwrap();
    bytes.truncate(bytes.len() - 5);
    fs::write(&victim, &bytes).unwrap();
    assert!(matches!(
        Corpus::load(dir.path(), None),
        Err(Error::Format { .. })
    ));
    fs::remove_file(&victim).unwrap();
    assert!(matches!(Corpus::load(dir.path(), None), Err(Error::Io(_))));
}

#[test]
fn wrong_shape_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_corpus(dir.path(), &small_config(2)).unwrap();
    let victim = dir.path().join(&m.entries[0].files["text_use"]);
    write_feature(&victim, &Tensor::zeros(&[3, 512])).unwrap();
    assert!(matches!(
        Corpus::load(dir.path(), None),
        Err(Error::Input { .. })
    ));
}

#[test]
fn manifest_parse_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_corpus(dir.path(), &small_config(1)).unwrap();
    assert_eq!(CorpusManifest::parse(&m.to_text()).unwrap(), m);
    assert!(matches!(
        CorpusManifest::parse("nonsense\n"),
        Err(Error::Format { offset: 0, .. })
    ));
    let dup = format!("{}s0000\ttrain\t3\n", m.to_text());
    assert!(matches!(
        CorpusManifest::parse(&dup),
        Err(Error::Format { .. })
    ));
    let bad_label = "#FZCORPUS v1 seed=1 divisor=100\na\ttrain\t30\n";
    assert!(matches!(
        CorpusManifest::parse(bad_label),
        Err(Error::Format { offset: 32, .. })
    ));
}

#[test]
fn bad_config_is_rejected() {
    let cfg = CorpusConfig {
        n_dev: 0,
        ..CorpusConfig::default()
    };
    assert!(matches!(Corpus::generate(&cfg), Err(Error::Config(_))));
}

#[test]
fn unwritable_directory_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    assert!(matches!(
        generate_corpus(&blocker.join("sub"), &small_config(0)),
        Err(Error::Io(_))
    ));
}

#[test]
fn pad_or_truncate_examples() {
    let m = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
    assert_eq!(pad_or_truncate(&m, 2).unwrap(), m);
    let padded = pad_or_truncate(&m, 4).unwrap();
    assert_eq!(padded.shape(), &[4, 2]);
    assert_eq!(&padded.data()[4..], &[0.0; 4]);
    let long = Tensor::from_rows(&(0..5).map(|i| vec![f64::from(i)]).collect::<Vec<_>>()).unwrap();
    assert_eq!(pad_or_truncate(&long, 3).unwrap().data(), &[0.0, 1.0, 2.0]);
}

#[test]
fn feature_files_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = SeededRng::new(77);
    for i in 0..100 {
        let (t, d) = (1 + rng.below(20) as usize, 1 + rng.below(12) as usize);
        let data: Vec<f64> = (0..t * d).map(|_| rng.normal() * 1e3).collect();
        let m = Tensor::new(vec![t, d], data).unwrap();
        let p = dir.path().join(format!("{i}.edf"));
        write_feature(&p, &m).unwrap();
        let back = read_feature(&p).unwrap();
        assert!(back
            .data()
            .iter()
            .zip(m.data())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(back.shape(), m.shape());
    }
}

#[test]
fn feature_format_guards() {
    assert!(matches!(encode_raw(0, 4, &[]), Err(Error::Format { .. })));
    let m = Tensor::filled(&[2, 2], f64::NAN);
    assert!(matches!(encode_feature(&m), Err(Error::Domain { .. })));
    let mut bytes = encode_feature(&Tensor::zeros(&[10, 8])).unwrap();
    bytes[1] = 0;
    assert!(matches!(
        decode_feature(&bytes),
        Err(Error::Format { offset: 0, .. })
    ));
}

proptest! {
    #[test]
    fn arbitrary_bits_round_trip(t in 1usize..6, d in 1usize..6, seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let data: Vec<f64> = (0..t * d)
            .map(|_| f64::from_bits(rng.next_u64()))
            .map(|v| if v.is_finite() { v } else { 0.5 })
            .collect();
        let m = Tensor::new(vec![t, d], data).unwrap();
        let back = decode_feature(&encode_feature(&m).unwrap()).unwrap();
        prop_assert!(back.data().iter().zip(m.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
