use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hybnet::bench::{self, BerPoint, DetectorKind};
use hybnet::dataset::{Dataset, DatasetSpec};
use hybnet::models::TrainedModel;

fn hybnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybnet"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(hybnet(&[]).status.code(), Some(1));
    assert_eq!(hybnet(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(hybnet(&["evaluate", "--detectors", "psychic"]).status.code(), Some(1));
    assert_eq!(hybnet(&["train", "--net", "resnet", "--data", "x", "--out", "y"]).status.code(), Some(1));
    assert_eq!(hybnet(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.csv");
    fs::write(&junk, "not,a,ber,file\n").unwrap();
    assert_eq!(hybnet(&["envelope-check", "--in", &s(&junk)]).status.code(), Some(2));
    let missing = dir.path().join("missing.lds");
    let out = dir.path().join("m.ckpt");
    assert_eq!(hybnet(&["train", "--net", "fft", "--data", &s(&missing), "--out", &s(&out)]).status.code(), Some(2));
    let manifest = dir.path().join("bad.manifest");
    fs::write(&manifest, "num_train=10\nwhat=is_this\n").unwrap();
    let o = hybnet(&["generate", "--spec", &s(&manifest), "--out", &s(&dir.path().join("c"))]);
    assert_eq!(o.status.code(), Some(2));
    // hybnet without trained models
    let o = hybnet(&["evaluate", "--detectors", "hybnet", "--trials", "1000"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn envelope_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let mk = |d, e| BerPoint::new(d, 10.0, -15.0, 7, 10_000, e, 128);
    let csv = dir.path().join("ber.csv");
    let mut buf = Vec::new();
    bench::write_ber_csv(
        &mut buf,
        &[mk(DetectorKind::Coherent, 3000), mk(DetectorKind::FftCnn, 1000), mk(DetectorKind::Hybnet, 2500)],
    )
    .unwrap();
    fs::write(&csv, &buf).unwrap();
    let o = hybnet(&["envelope-check", "--in", &s(&csv)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    let o = hybnet(&["envelope-check", "--in", &s(&csv), "--margin", "2.0"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn generate_train_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let spec = DatasetSpec {
        num_train: 256,
        num_val: 64,
        rng_seed: 3,
        ..DatasetSpec::default()
    };
    let manifest = dir.path().join("spec.txt");
    fs::write(&manifest, spec.to_manifest()).unwrap();
    let corpus = dir.path().join("fft.lds");
    let o = hybnet(&["generate", "--spec", &s(&manifest), "--out", &s(&corpus)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let train = Dataset::load(&corpus).unwrap();
    assert_eq!(train.len(), 256);
    assert_eq!(Dataset::load(dir.path().join("fft.lds.val")).unwrap().len(), 64);
    let stored = DatasetSpec::from_manifest(&fs::read_to_string(dir.path().join("fft.lds.manifest")).unwrap()).unwrap();
    assert_eq!(stored, spec);

    let model = dir.path().join("fft.ckpt");
    let o = hybnet(&["train", "--net", "fft", "--data", &s(&corpus), "--out", &s(&model), "--epochs", "2", "--batch", "64"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(TrainedModel::load(&model).unwrap().network.has_running_stats());

    // an FFT-CNN checkpoint is not an IQ model
    let o = hybnet(&["evaluate", "--detectors", "iq_cnn", "--iq-model", &s(&model), "--trials", "1000"]);
    assert_eq!(o.status.code(), Some(2));

    let csv = dir.path().join("ber.csv");
    let o = hybnet(&[
        "evaluate", "--detectors", "coherent,fft_cnn", "--fft-model", &s(&model), "--trials", "1000",
        "--inr-from", "0", "--inr-to", "10", "--inr-step", "5", "--out", &s(&csv),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let pts = bench::read_ber_csv(fs::File::open(&csv).unwrap()).unwrap();
    assert_eq!(pts.len(), 6);
    assert!(pts.iter().all(|p| p.trials == 1000 && p.sinr_db == -15.0));
}

#[test]
fn bench_writes_timing_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let o = hybnet(&["bench", "--models", "fft", "--symbols", "1,4", "--repeats", "1", "--out", &s(&csv)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("network,num_symbols,wall_time_s"));
    assert_eq!(lines.count(), 2);
}
