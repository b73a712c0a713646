use std::fs;
use std::path::Path;

use clap::Parser;
use lfsynth::cli::{run, to_frames, Cli};
use lfsynth::report::{self, RateJson};
use lfsynth::{images, lfbs, Error};
use lfsynth_core::codec::{encode_sequence, CodecConfig};
use lfsynth_core::lf::{GopLayout, LightField, View};
use lfsynth_core::metrics::MetricsError;
use lfsynth_core::rdo::RdoError;
use lfsynth_core::synth::{GeneratorModel, GeneratorSpec, Regime};

fn lfsynth(dir: &Path, args: &[&str]) -> lfsynth::Result<()> {
    let owned: Vec<String> = args
        .iter()
        .map(|a| if a.starts_with('@') { dir.join(&a[1..]).to_string_lossy().into_owned() } else { a.to_string() })
        .collect();
    run(Cli::try_parse_from(std::iter::once("lfsynth".to_string()).chain(owned)).expect("valid arguments"))
}

fn corpus(dir: &Path, disparity: &str) {
    lfsynth(dir, &["synth-data", "--out", "@data", "--seed", "4", "--width", "32", "--height", "32", "--disparity", disparity]).unwrap();
}

fn averaging_model(dir: &Path) {
    let mut g = GeneratorModel::new(&GeneratorSpec::desk(), 2).unwrap();
    let mut p = g.params_mut();
    let n = p.len();
    for t in p.iter_mut().skip(n - 2) {
        t.data.iter_mut().for_each(|v| *v = 0.0);
    }
    g.round_to_f32();
    lfsynth::d2gm::save_model(&dir.join("avg.d2gm"), &g).unwrap();
}

#[test]
fn synth_data_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        lfsynth(d, &["synth-data", "--out", "@data", "--scenes", "2", "--seed", "9", "--width", "24", "--height", "20", "--grid", "3", "--disparity", "0.5,2"]).unwrap();
    }
    for scene in ["scene_00", "scene_01"] {
        let names: Vec<_> = fs::read_dir(a.path().join("data").join(scene)).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 10);
        for n in names {
            assert_eq!(fs::read(a.path().join("data").join(scene).join(&n)).unwrap(), fs::read(b.path().join("data").join(scene).join(&n)).unwrap());
        }
    }
    let lf = images::load_lightfield(&a.path().join("data/scene_00")).unwrap();
    assert_eq!((lf.grid_s(), lf.grid_t(), lf.width(), lf.height()), (3, 3, 24, 20));
    let disp = images::read_disparity(&images::disparity_path(&a.path().join("data/scene_00"))).unwrap();
    assert!(disp.data.contains(&2.0) && disp.data.contains(&0.5));
}

#[test]
fn all_coded_and_all_dropped_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    corpus(d, "0");
    lfsynth(d, &["encode", "--input", "@data/scene_00", "--out", "@coded.lfbs", "--qp", "30", "--mode", "all-coded"]).unwrap();
    let log = report::read_decisions(&d.join("coded.decisions.csv")).unwrap();
    assert_eq!(log.len(), 18);
    assert!(log.iter().all(|r| r.branch == "coded"));

    lfsynth(d, &["encode", "--input", "@data/scene_00", "--out", "@dropped.lfbs", "--qp", "30", "--mode", "all-dropped"]).unwrap();
    let log = report::read_decisions(&d.join("dropped.decisions.csv")).unwrap();
    let layout = GopLayout::new(16, 25).unwrap();
    assert!(log.iter().all(|r| r.branch == "dropped" && layout.level(r.poc) >= 3));
    let stream = lfbs::read(&d.join("dropped.lfbs")).unwrap();
    assert_eq!(stream.dropped_pocs().len(), 18);
    let rate: RateJson = report::read_json(&d.join("dropped.rate.json")).unwrap();
    assert_eq!(rate.dropped.len(), 18);
    assert!((rate.level_shares.iter().sum::<f64>() - 1.0).abs() < 1e-9);

    let err = lfsynth(d, &["decode", "--input", "@dropped.lfbs", "--out", "@out"]).unwrap_err();
    assert!(matches!(err, Error::Rdo(RdoError::NoModelForQp(30))), "{err}");
}

#[test]
fn decode_without_drops_matches_codec_and_restores_grid_positions() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    // every view carries its own grid position
    let views: Vec<View> = (0..4).flat_map(|s| (0..5).map(move |t| View::filled(16, 16, [(20 + 40 * s) as u8, (40 + 30 * t) as u8, 128]))).collect();
    let lf = LightField::new(4, 5, views).unwrap();
    images::save_lightfield(&d.join("lf"), &lf).unwrap();
    lfsynth(d, &["encode", "--input", "@lf", "--out", "@s.lfbs", "--qp", "22", "--mode", "all-coded"]).unwrap();
    lfsynth(d, &["decode", "--input", "@s.lfbs", "--out", "@dec"]).unwrap();
    let dec = images::load_lightfield(&d.join("dec")).unwrap();

    let src = images::load_lightfield(&d.join("lf")).unwrap();
    let (frames, scan) = to_frames(&src).unwrap();
    let enc = encode_sequence(&frames, (4, 5), &CodecConfig { qp: 22, ..CodecConfig::default() }, &Default::default()).unwrap();
    for (poc, rec) in enc.reconstructions.iter().enumerate() {
        let (s, t) = scan.cell(poc);
        let rec = rec.as_ref().unwrap();
        assert_eq!(dec.view(s, t), &View::from_rgb(16, 16, &rec.to_rgb()).unwrap());
        for c in 0..3 {
            let got = dec.view(s, t).get(c, 8, 8) as i32;
            assert!((got - src.view(s, t).get(c, 8, 8) as i32).abs() <= 3, "view ({s},{t}) plane {c}");
        }
    }
}

#[test]
fn rdo_round_trip_with_model_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    corpus(d, "0");
    averaging_model(d);
    lfsynth(d, &["encode", "--input", "@data/scene_00", "--out", "@s.lfbs", "--qp", "40", "--model", "@avg.d2gm"]).unwrap();
    let stream = lfbs::read(&d.join("s.lfbs")).unwrap();
    let log = report::read_decisions(&d.join("s.decisions.csv")).unwrap();
    let logged: std::collections::BTreeSet<usize> = log.iter().filter(|r| r.branch == "dropped").map(|r| r.poc).collect();
    assert_eq!(logged, stream.dropped_pocs());
    assert!(!logged.is_empty());

    lfsynth(d, &["decode", "--input", "@s.lfbs", "--out", "@dec", "--model", "@avg.d2gm"]).unwrap();
    lfsynth(d, &["eval", "--original", "@data/scene_00", "--decoded", "@dec", "--rate", "@s.rate.json", "--out", "@p.json", "--views", "@v.csv"]).unwrap();
    let point: serde_json::Value = serde_json::from_slice(&fs::read(d.join("p.json")).unwrap()).unwrap();
    assert_eq!(point["dropped"].as_u64().unwrap() as usize, logged.len());
    assert!(point["psnr_y"].as_f64().unwrap() > 20.0);
    let rows = fs::read_to_string(d.join("v.csv")).unwrap();
    assert_eq!(rows.lines().count(), 26);
    assert!(rows.lines().next().unwrap().starts_with("s,t,poc,dropped,psnr_y"));
}

#[test]
fn rdo_needs_a_matching_model() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    corpus(d, "0");
    let err = lfsynth(d, &["encode", "--input", "@data/scene_00", "--out", "@s.lfbs", "--qp", "32"]).unwrap_err();
    assert!(matches!(err, Error::Rdo(RdoError::NoModelForQp(32))));
    let mut g = GeneratorModel::new(&GeneratorSpec::desk(), 1).unwrap();
    g.regime = Regime::PerQp;
    g.train_qp = 18;
    lfsynth::d2gm::save_model(&d.join("model_qp18.d2gm"), &g).unwrap();
    let err = lfsynth(d, &["encode", "--input", "@data/scene_00", "--out", "@s.lfbs", "--qp", "32", "--model", "@model_qp18.d2gm"]).unwrap_err();
    assert!(matches!(err, Error::Rdo(RdoError::NoModelForQp(32))));
    let err = lfsynth(d, &["encode", "--input", "@data/scene_00", "--out", "@s.lfbs", "--qp", "18,32", "--mode", "all-coded"]).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn eval_identical_and_mismatched_grids() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    corpus(d, "0");
    lfsynth(d, &["encode", "--input", "@data/scene_00", "--out", "@s.lfbs", "--qp", "30", "--mode", "all-coded"]).unwrap();
    lfsynth(d, &["eval", "--original", "@data/scene_00", "--decoded", "@data/scene_00", "--rate", "@s.rate.json", "--out", "@p.json"]).unwrap();
    let text = fs::read_to_string(d.join("p.json")).unwrap();
    let point: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(point["psnr_y"], "inf");
    assert_eq!(point["ssim"].as_f64(), Some(1.0));

    lfsynth(d, &["synth-data", "--out", "@small", "--grid", "3", "--width", "32", "--height", "32"]).unwrap();
    let err = lfsynth(d, &["eval", "--original", "@data/scene_00", "--decoded", "@small/scene_00", "--rate", "@s.rate.json", "--out", "@q.json"]).unwrap_err();
    assert!(matches!(err, Error::Metrics(MetricsError::ShapeError)));
}

#[test]
fn bd_over_four_point_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for (r, q) in [(0.1, 30.0), (0.2, 33.0), (0.4, 36.0), (0.8, 39.0)] {
        report::append_curve_point(&d.join("anchor.csv"), r, q).unwrap();
        report::append_curve_point(&d.join("half.csv"), r / 2.0, q).unwrap();
    }
    lfsynth(d, &["bd", "--anchor", "@anchor.csv", "--test", "@half.csv", "--out", "@bd.json", "--curves", "@curves.json", "--svg", "@rd.svg"]).unwrap();
    let bd: serde_json::Value = serde_json::from_slice(&fs::read(d.join("bd.json")).unwrap()).unwrap();
    assert_eq!(bd[0]["anchor"], "anchor");
    assert_eq!(bd[0]["test"], "half");
    assert!((bd[0]["bd_rate_pct"].as_f64().unwrap() + 50.0).abs() < 0.01);
    let curves: serde_json::Value = serde_json::from_slice(&fs::read(d.join("curves.json")).unwrap()).unwrap();
    assert_eq!(curves[1]["points"].as_array().unwrap().len(), 4);
    assert!(fs::read_to_string(d.join("rd.svg")).unwrap().contains("<svg"));
}

#[test]
fn per_qp_training_writes_one_model_per_qp() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    corpus(d, "0");
    lfsynth(d, &["train", "--data", "@data", "--out", "@models", "--steps", "3"]).unwrap();
    for qp in [18, 24, 28, 32] {
        let m = lfsynth::d2gm::load_model(&d.join(format!("models/model_qp{qp:02}.d2gm"))).unwrap();
        assert_eq!(m.train_qp, qp);
        let log = fs::read_to_string(d.join(format!("models/train_qp{qp:02}.csv"))).unwrap();
        assert_eq!(log.lines().next(), Some("step,d1,d2,adversarial,reconstruction"));
        assert_eq!(log.lines().count(), 4);
    }
}

#[test]
fn config_file_values_yield_to_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    corpus(d, "0");
    fs::write(d.join("run.cfg"), "# defaults\nqp = 40\nmode = all-coded\ngop = 8\n").unwrap();
    lfsynth(d, &["encode", "--config", "@run.cfg", "--input", "@data/scene_00", "--out", "@a.lfbs"]).unwrap();
    lfsynth(d, &["encode", "--config", "@run.cfg", "--input", "@data/scene_00", "--out", "@b.lfbs", "--qp", "20"]).unwrap();
    let (a, b) = (lfbs::read(&d.join("a.lfbs")).unwrap(), lfbs::read(&d.join("b.lfbs")).unwrap());
    assert_eq!((a.header.base_qp, a.header.gop_size), (40, 8));
    assert_eq!((b.header.base_qp, b.header.gop_size), (20, 8));
    fs::write(d.join("bad.cfg"), "qp = 40\ncolour = blue\n").unwrap();
    let err = lfsynth(d, &["encode", "--config", "@bad.cfg", "--input", "@data/scene_00", "--out", "@c.lfbs"]).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn binary_reports_errors_with_nonzero_exit() {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_lfsynth")).args(["decode", "--input", "/nonexistent.lfbs", "--out", "/tmp/x"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent.lfbs"));
}
