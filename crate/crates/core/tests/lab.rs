use featrestrict::histogram::HistogramSpec;
use featrestrict::lab::{
    cluster_centers, gen_clusters, pretrain_classifier, run_experiment, train_restriction_head, ClusterParams,
    Condition, ExperimentConfig, MlpEncoder, TrainConfig, CENTER_SEPARATION,
};
use featrestrict::numeric::{seeded_standard_normal, Stream};
use featrestrict::restriction::{batch_kl, combined_restriction, conventional_kl, VaeMoments};
use featrestrict::restriction::conventional_kl_features;
use featrestrict::translation::LossWeights;
use featrestrict::FeatureBatch;

#[test]
fn default_separation_clears_eight_spreads() {
    let p = ClusterParams::default();
    let c = cluster_centers(p.p, p.classes, p.spread);
    for a in 0..p.classes {
        for b in a + 1..p.classes {
            let d: f64 = c.row(a).iter().zip(c.row(b)).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            assert!(d >= 8.0 * p.spread, "{d}");
            assert!((d - CENTER_SEPARATION * p.spread).abs() < 1e-9);
        }
    }
}

#[test]
fn pretraining_is_deterministic_and_accurate() {
    let p = ClusterParams::default();
    let train = gen_clusters(p.n_per_class, p.p, p.classes, p.spread, 0).unwrap();
    let held = gen_clusters(p.n_per_class, p.p, p.classes, p.spread, 100).unwrap();
    let cfg = TrainConfig::pretraining(0);
    let run = || {
        let enc = MlpEncoder::new(p.p, 32, p.classes, 0, Stream::ClassifierHeadInit);
        pretrain_classifier(&train, &held, enc, &cfg).unwrap()
    };
    let (a, oa) = run();
    let (b, ob) = run();
    assert_eq!(a, b);
    assert_eq!(oa, ob);
    assert!(oa.accuracy >= 0.95, "accuracy {}", oa.accuracy);
}

#[test]
fn frozen_trunk_checksum_is_stable() {
    let p = ClusterParams::default();
    let train = gen_clusters(p.n_per_class, p.p, p.classes, p.spread, 1).unwrap();
    let enc = MlpEncoder::new(p.p, 32, 8, 1, Stream::RestrictionHeadInit);
    let trunk = enc.trunk_checksum();
    let cfg = TrainConfig {
        steps: 200,
        ..TrainConfig::new(Condition::Proposed, 1)
    };
    let (out, o) = train_restriction_head(&train, enc.clone(), &cfg, &HistogramSpec::default(), true).unwrap();
    assert_eq!(o.trunk_checksum_before, trunk);
    assert_eq!(o.trunk_checksum_after, trunk);
    assert_eq!(out.trunk, enc.trunk);
    assert_ne!(out.head, enc.head);
    assert_eq!(o.loss_trace.len(), 200);
}

#[test]
fn conventional_kl_collapses_features() {
    let r = run_experiment(&ExperimentConfig::new(Condition::ConventionalKl, 7), false).unwrap();
    assert!(r.max_std() < 0.1, "max std {}", r.max_std());
    assert_eq!(r.loss_trace.len(), 2000);
    assert_eq!(r.eval_samples, 1024);
}

#[test]
fn pretrained_proposed_run_spreads_and_keeps_classes() {
    let r = run_experiment(&ExperimentConfig::new(Condition::Proposed, 3), true).unwrap();
    assert!(r.classifier_accuracy.unwrap() >= 0.95);
    assert!(r.min_std() >= 0.8 && r.max_std() <= 1.2, "std [{}, {}]", r.min_std(), r.max_std());
    assert!(r.hist_kl_mean < 0.1, "hist KL {}", r.hist_kl_mean);
    assert!(r.class_retention_accuracy.unwrap() >= 0.9);
    assert!(r.freeze_trunk);
    assert_eq!(r.trunk_checksum_before, r.trunk_checksum_after);
}

#[test]
fn reports_are_reproducible() {
    let mut cfg = ExperimentConfig::new(Condition::Proposed, 11);
    cfg.restriction.steps = 100;
    cfg.pretrain.steps = 50;
    let a = serde_json::to_string(&run_experiment(&cfg, true).unwrap()).unwrap();
    let b = serde_json::to_string(&run_experiment(&cfg, true).unwrap()).unwrap();
    assert_eq!(a, b);
    cfg.restriction.seed = 12;
    cfg.pretrain.seed = 12;
    let c = serde_json::to_string(&run_experiment(&cfg, true).unwrap()).unwrap();
    assert_ne!(a, c);
}

#[test]
fn descent_on_restriction_objective_converges() {
    let spec = HistogramSpec::default();
    let w = LossWeights::proposed();
    let mut b = seeded_standard_normal(128, 8, 0).unwrap();
    let initial = combined_restriction(&b, &w, &spec).unwrap().value;
    let mut values = Vec::new();
    for _ in 0..500 {
        let e = combined_restriction(&b, &w, &spec).unwrap();
        values.push(e.value);
        let mut m = b.as_matrix().clone();
        m.axpy(-0.05, &e.grad);
        b = FeatureBatch::from_matrix(m).unwrap();
    }
    let last = combined_restriction(&b, &w, &spec).unwrap().value;
    assert!(last < 0.1 * initial, "{last} vs {initial}");
    let means: Vec<f64> = values
        .chunks(100)
        .map(|w| w.iter().sum::<f64>() / w.len() as f64)
        .collect();
    assert!(means.windows(2).all(|p| p[1] < p[0]), "{means:?}");
}

#[test]
fn per_sample_kl_admits_collapse_but_batch_kl_does_not() {
    let d = 8;
    let zeros = FeatureBatch::new(32, d, vec![0.0; 32 * d]).unwrap();
    let kl = conventional_kl(&VaeMoments::new(zeros.clone(), zeros.clone()).unwrap());
    assert_eq!(kl.value, 0.0);
    assert_eq!(conventional_kl_features(&zeros).value, 0.0);
    let bkl = batch_kl(&zeros).unwrap().value;
    let floor = featrestrict::numeric::STD_FLOOR;
    assert!(bkl >= 0.5 * d as f64 * (-(floor * floor).ln() - 1.0));
}
