//! Variance maps depend only on the config, never on the thread count or
//! on which other slices were computed alongside.

use varmap::estimators::VarianceMap;
use varmap::experiment::{compute_experiment, with_threads, EstimatorKind, ExperimentConfig};

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.phantom.rows = 16;
    cfg.phantom.cols = 16;
    cfg.coils.count = 2;
    cfg.model.steps = 2;
    cfg.estimators.run = vec!["sketch".into(), "naive".into(), "mc".into(), "brute".into()];
    cfg.estimators.sketch_size = 100;
    cfg.estimators.trials = 100;
    cfg.slices = 2;
    cfg
}

fn bits(m: &VarianceMap) -> Vec<u64> {
    m.values().iter().map(|v| v.to_bits()).collect()
}

#[test]
fn thread_count_does_not_change_any_map() {
    let cfg = small();
    let runs: Vec<_> = [1, 2, 3, 4]
        .into_iter()
        .map(|t| with_threads(Some(t), || compute_experiment(&cfg)).unwrap().unwrap())
        .collect();
    for run in &runs[1..] {
        for (a, b) in runs[0].slices.iter().zip(&run.slices) {
            for ((ka, ma), (kb, mb)) in a.maps.iter().zip(&b.maps) {
                assert_eq!(ka, kb);
                assert_eq!(bits(ma), bits(mb), "{ka} differs");
            }
        }
    }
}

#[test]
fn a_slice_does_not_depend_on_its_neighbours() {
    let cfg = small();
    let both = compute_experiment(&cfg).unwrap();
    let mut alone = cfg.clone();
    alone.first_slice = 1;
    alone.slices = 1;
    let single = compute_experiment(&alone).unwrap();
    for kind in [EstimatorKind::Sketch, EstimatorKind::Mc] {
        let a = both.slices[1].map(kind).unwrap();
        let b = single.slices[0].map(kind).unwrap();
        assert_eq!(bits(a), bits(b));
    }
}

#[test]
fn different_master_seeds_give_different_maps() {
    let mut cfg = small();
    cfg.slices = 1;
    let a = compute_experiment(&cfg).unwrap();
    cfg.seed = 1;
    let b = compute_experiment(&cfg).unwrap();
    let (ma, mb) = (a.slices[0].map(EstimatorKind::Sketch).unwrap(), b.slices[0].map(EstimatorKind::Sketch).unwrap());
    assert_ne!(bits(ma), bits(mb));
}
