use std::path::PathBuf;

use xbar_mann::harness::data::{
    load_features, write_features_binary, write_features_csv, FeatureFormat,
};
use xbar_mann::mann::{run_task, DistanceMode, EpisodeConfig, Pipeline};
use xbar_mann::Error;

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/two_class.csv")
}

#[test]
fn fixture_loads() {
    let ds = load_features(fixture(), FeatureFormat::Csv).unwrap();
    assert_eq!(ds.n_classes(), 2);
    assert_eq!(ds.dim(), 4);
    assert_eq!(ds.len(), 6);
    assert_eq!(
        ds.class("cat").unwrap()[1].values(),
        &[0.75, 0.5, 0.125, -0.25]
    );
    assert_eq!(ds.class("dog").unwrap().len(), 3);
}

#[test]
fn csv_and_binary_agree() {
    let ds = load_features(fixture(), FeatureFormat::Csv).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("two_class.xbf");
    write_features_binary(&ds, &bin).unwrap();
    let back = load_features(&bin, FeatureFormat::Binary).unwrap();
    assert_eq!(
        back.classes().collect::<Vec<_>>(),
        ds.classes().collect::<Vec<_>>()
    );

    let csv = dir.path().join("copy.csv");
    write_features_csv(&ds, &csv).unwrap();
    let again = load_features(&csv, FeatureFormat::from_path(&csv)).unwrap();
    assert_eq!(
        again.classes().collect::<Vec<_>>(),
        ds.classes().collect::<Vec<_>>()
    );
}

#[test]
fn malformed_row_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    std::fs::write(&p, "a,1,2\nb,1,x\n").unwrap();
    match load_features(&p, FeatureFormat::Csv).unwrap_err() {
        Error::Parse { line, .. } => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn fixture_drives_an_episode() {
    let ds = load_features(fixture(), FeatureFormat::Csv).unwrap();
    let cfg = EpisodeConfig {
        n_way: 2,
        k_shot: 1,
        queries_per_class: 2,
        repeats: 4,
        distance: DistanceMode::ExactOracle,
        ..Default::default()
    };
    let r = run_task(&cfg, &Pipeline::default(), &ds).unwrap();
    assert_eq!(r.episode_accuracies.len(), 4);
    assert!(r.accuracy.mean > 0.5);
}
