use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pnkit_core::data::{synth_background, synth_network_image, SynthParams};
use pnkit_core::imagecore::save_png;

fn pnkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnkit")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Even indices are grid images (atypical), odd ones plain background.
fn write_corpus(dir: &Path, n: usize, side: usize) -> PathBuf {
    let mut labels = String::from("image_id,pn_label\n");
    for i in 0..n {
        let p = SynthParams { width: side, height: side, seed: i as u64, spacing: 16, ..Default::default() };
        let (img, label) =
            if i % 2 == 0 { (synth_network_image(&p).0, "atypical") } else { (synth_background(&p), "typical") };
        save_png(&img, dir.join(format!("S{i:02}.png"))).unwrap();
        labels.push_str(&format!("S{i:02},{label}\n"));
    }
    let path = dir.join("labels.csv");
    fs::write(&path, labels).unwrap();
    path
}

const FAST_CONFIG: &str = "\
resize = [96, 96]
min_component = 20
input_size = [32, 32]
epochs = 3
batch_size = 4
validation_frequency = 2
vocab_size = 8
max_vocab_descriptors = 2000
bof_epochs = 20
";

#[test]
fn help_documents_every_flag() {
    let cases: [(&[&str], &[&str]); 5] = [
        (&["extract"], &["--out", "--emit-stages", "--threshold-offset", "--min-component", "--weights", "--smoother"]),
        (&["dataset", "build"], &["--root", "--labels", "--overrides", "--out", "--threshold-offset"]),
        (&["train", "cnn"], &["--data", "--root", "--labels", "--out", "--epochs", "--lr"]),
        (&["train", "bof"], &["--data", "--out", "--epochs", "--lr", "--vocab-size"]),
        (&["eval"], &["--model", "--data", "--split", "--out"]),
    ];
    for (cmd, flags) in cases {
        let mut args = cmd.to_vec();
        args.push("--help");
        let out = pnkit(&args);
        assert!(out.status.success(), "{cmd:?}");
        let text = stdout(&out);
        for flag in flags.iter().chain(&["--config", "--seed", "--jobs"]) {
            assert!(text.contains(flag), "{cmd:?} help lacks {flag}");
        }
    }
    assert!(pnkit(&["--help"]).status.success());
}

#[test]
fn extract_writes_results_per_image() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write_corpus(src.path(), 3, 128);
    let o = pnkit(&["extract", s(src.path()), "--out", s(out.path()), "--seed", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("# pnkit extract seed=5"));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("S00 true "));
    for id in ["S00", "S01", "S02"] {
        assert!(out.path().join(id).join("09_colorized.png").is_file());
    }

    let staged = tempfile::tempdir().unwrap();
    let single = src.path().join("S00.png");
    let o = pnkit(&["extract", s(&single), "--out", s(staged.path()), "--emit-stages"]);
    assert!(o.status.success());
    assert_eq!(fs::read_dir(staged.path().join("S00")).unwrap().count(), 9);
}

#[test]
fn extract_output_is_independent_of_jobs() {
    let src = tempfile::tempdir().unwrap();
    write_corpus(src.path(), 4, 128);
    let run = |jobs: &str| {
        let out = tempfile::tempdir().unwrap();
        let o = pnkit(&["extract", s(src.path()), "--out", s(out.path()), "--jobs", jobs]);
        assert!(o.status.success());
        let rows: Vec<String> = stdout(&o).lines().filter(|l| !l.starts_with('#')).map(String::from).collect();
        let files: Vec<Vec<u8>> =
            (0..4).map(|i| fs::read(out.path().join(format!("S{i:02}")).join("09_colorized.png")).unwrap()).collect();
        (rows, files)
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn exit_codes_follow_failure_class() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let labels = write_corpus(src.path(), 2, 64);
    let img = src.path().join("S00.png");

    for bad in [&["--threshold-offset", "0.06"][..], &["--weights", "0,0,0"], &["--min-component", "0"]] {
        let mut args = vec!["extract", s(&img), "--out", s(out.path())];
        args.extend_from_slice(bad);
        assert_eq!(pnkit(&args).status.code(), Some(2), "{bad:?}");
    }
    let ok = pnkit(&["extract", s(&img), "--out", s(out.path()), "--threshold-offset", "0.02"]);
    assert_eq!(ok.status.code(), Some(0));

    let cfg = src.path().join("bad.toml");
    fs::write(&cfg, "threshold_ofset = 0.01\n").unwrap();
    assert_eq!(pnkit(&["extract", s(&img), "--out", s(out.path()), "--config", s(&cfg)]).status.code(), Some(2));

    let missing = src.path().join("nope.png");
    assert_eq!(pnkit(&["extract", s(&missing), "--out", s(out.path())]).status.code(), Some(1));
    assert_eq!(pnkit(&["extract", s(&img), "--out", s(out.path()), "--config", s(&missing)]).status.code(), Some(1));

    let dangling = src.path().join("dangling.csv");
    fs::write(&dangling, "image_id,pn_label\nS00,typical\nS77,atypical\n").unwrap();
    let ds = pnkit(&["dataset", "build", "--root", s(src.path()), "--labels", s(&dangling), "--out", s(out.path())]);
    assert_eq!(ds.status.code(), Some(3));
    let badlabel = src.path().join("badlabel.csv");
    fs::write(&badlabel, "image_id,pn_label\nS00,benign\n").unwrap();
    let ds = pnkit(&["dataset", "build", "--root", s(src.path()), "--labels", s(&badlabel), "--out", s(out.path())]);
    assert_eq!(ds.status.code(), Some(3));
    // two images cannot be split 80/20 per class
    let train = pnkit(&["train", "cnn", "--root", s(src.path()), "--labels", s(&labels), "--out", s(out.path())]);
    assert_eq!(train.status.code(), Some(3));
}

#[test]
fn full_workflow_is_reproducible() {
    let src = tempfile::tempdir().unwrap();
    let work = tempfile::tempdir().unwrap();
    let labels = write_corpus(src.path(), 20, 128);
    let cfg = work.path().join("fast.toml");
    fs::write(&cfg, FAST_CONFIG).unwrap();
    let pn = work.path().join("pn");

    let o = pnkit(&[
        "dataset",
        "build",
        "--root",
        s(src.path()),
        "--labels",
        s(&labels),
        "--out",
        s(&pn),
        "--config",
        s(&cfg),
        "--jobs",
        "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(pn.join("manifest.csv").is_file());
    assert!(stdout(&o).contains("# atypical: detected 10/10"));

    let train_cnn = |dir: &Path| {
        let o = pnkit(&["train", "cnn", "--data", s(&pn), "--out", s(dir), "--seed", "7", "--config", s(&cfg)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).starts_with("# pnkit train cnn seed=7"));
        fs::read(dir.join("cnn_model.bin")).unwrap()
    };
    let (a, b) = (work.path().join("cnn_a"), work.path().join("cnn_b"));
    assert_eq!(train_cnn(&a), train_cnn(&b));
    assert_eq!(fs::read(a.join("cnn_log.csv")).unwrap(), fs::read(b.join("cnn_log.csv")).unwrap());
    let split = fs::read_to_string(a.join("val_split.csv")).unwrap();
    assert_eq!(split.lines().count(), 1 + 4);

    let bof = work.path().join("bof");
    let o = pnkit(&["train", "bof", "--data", s(&pn), "--out", s(&bof), "--seed", "7", "--config", s(&cfg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(bof.join("bof_log.csv")).unwrap().starts_with("epoch,objective,train_accuracy\n"));

    for (model, name) in [(a.join("cnn_model.bin"), "cnn"), (bof.join("bof_model.bin"), "bof")] {
        let out = work.path().join(format!("eval_{name}"));
        let split = model.parent().unwrap().join("val_split.csv");
        let o = pnkit(&["eval", "--model", s(&model), "--data", s(&pn), "--split", s(&split), "--out", s(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains(&format!("model={name} images=4")));
        let json = fs::read_to_string(out.join("eval.json")).unwrap();
        for key in ["tp", "fn", "fp", "tn", "se", "sp", "pr", "ac", "auc"] {
            assert!(json.contains(&format!("\"{key}\":")), "{name}: {key} missing from {json}");
        }
        assert!(fs::read_to_string(out.join("roc.csv")).unwrap().starts_with("fpr,tpr\n0,0\n"));
    }

    let junk = work.path().join("junk.bin");
    fs::write(&junk, b"garbage").unwrap();
    let o = pnkit(&["eval", "--model", s(&junk), "--data", s(&pn), "--out", s(work.path())]);
    assert_eq!(o.status.code(), Some(1));
}
