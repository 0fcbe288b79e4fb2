//! End-to-end exercises of the `stdc` binary: the full
//! synth/train/extract/score/eval workflow on a small corpus, plus the
//! machine-parsable failure categories.

use std::process::{Command, Output};

fn stdc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stdc"))
        .args(args)
        .output()
        .expect("spawn stdc")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn full_workflow_on_a_small_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let models = dir.path().join("models");
    let reports = dir.path().join("reports");
    let corpus_str = corpus.to_str().unwrap();
    let manifest = corpus.join("manifest.csv");
    let manifest_str = manifest.to_str().unwrap();

    let synth = stdc(&[
        "synth", "--out", corpus_str, "--count", "20", "--seed", "99",
    ]);
    assert!(synth.status.success(), "{}", stderr(&synth));
    assert!(manifest.exists());
    assert!(corpus.join("utt_00000.wav").exists());

    // Temporal extraction before training must fail with a category.
    let premature = stdc(&[
        "extract",
        "--manifest",
        manifest_str,
        "--kind",
        "stdc",
        "--models",
        models.to_str().unwrap(),
        "--out",
        dir.path().join("early.sdcf").to_str().unwrap(),
    ]);
    assert!(!premature.status.success());
    assert!(
        stderr(&premature).contains("MissingModel"),
        "stderr: {}",
        stderr(&premature)
    );

    let train = stdc(&[
        "train",
        "--manifest",
        manifest_str,
        "--out",
        models.to_str().unwrap(),
        "--seed",
        "99",
    ]);
    assert!(train.status.success(), "{}", stderr(&train));
    for artifact in [
        "bilstm.stdc",
        "stc_head.stdc",
        "fusion.stdc",
        "stdc_head.stdc",
        "sdc_head.stdc",
    ] {
        assert!(models.join(artifact).exists(), "{artifact} missing");
    }

    let features = dir.path().join("eval.sdcf");
    let extract = stdc(&[
        "extract",
        "--manifest",
        manifest_str,
        "--kind",
        "stdc",
        "--models",
        models.to_str().unwrap(),
        "--subset",
        "eval",
        "--out",
        features.to_str().unwrap(),
    ]);
    assert!(extract.status.success(), "{}", stderr(&extract));
    assert!(stdout(&extract).contains("wrote 4 vectors"));

    // A second extraction of the same inputs is byte-identical.
    let features_again = dir.path().join("eval_again.sdcf");
    let rerun = stdc(&[
        "extract",
        "--manifest",
        manifest_str,
        "--kind",
        "stdc",
        "--models",
        models.to_str().unwrap(),
        "--subset",
        "eval",
        "--out",
        features_again.to_str().unwrap(),
    ]);
    assert!(rerun.status.success(), "{}", stderr(&rerun));
    assert_eq!(
        std::fs::read(&features).unwrap(),
        std::fs::read(&features_again).unwrap(),
        "feature files must be byte-identical across runs"
    );

    let scores = dir.path().join("scores.csv");
    let score = stdc(&[
        "score",
        "--manifest",
        manifest_str,
        "--models",
        models.to_str().unwrap(),
        "--kind",
        "stdc",
        "--subset",
        "eval",
        "--out",
        scores.to_str().unwrap(),
    ]);
    assert!(score.status.success(), "{}", stderr(&score));
    let score_text = std::fs::read_to_string(&scores).unwrap();
    assert!(score_text.starts_with("utt_id,score,label"));
    assert_eq!(score_text.lines().count(), 5, "header plus four rows");

    let eval = stdc(&[
        "eval",
        "--manifest",
        manifest_str,
        "--models",
        models.to_str().unwrap(),
        "--kind",
        "stdc",
        "--out",
        reports.to_str().unwrap(),
    ]);
    assert!(eval.status.success(), "{}", stderr(&eval));
    assert!(stdout(&eval).contains("eer"));
    for artifact in [
        "scores_dev_stdc.csv",
        "scores_eval_stdc.csv",
        "report_dev_stdc.txt",
        "report_eval_stdc.txt",
        "det_dev_stdc.csv",
        "det_eval_stdc.csv",
    ] {
        assert!(reports.join(artifact).exists(), "{artifact} missing");
    }
}

#[test]
fn extract_of_empty_manifest_writes_zero_count_file() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.csv");
    std::fs::write(&manifest, "path,label,subset,attack_tag\n").unwrap();
    let out = dir.path().join("empty.sdcf");
    let result = stdc(&[
        "extract",
        "--manifest",
        manifest.to_str().unwrap(),
        "--kind",
        "sdc",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{}", stderr(&result));
    assert!(stdout(&result).contains("wrote 0 vectors"));
    assert!(out.exists());
}

#[test]
fn failures_carry_single_line_categories() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("bad.csv");
    std::fs::write(&manifest, "file,label\n").unwrap();
    let out = stdc(&[
        "extract",
        "--manifest",
        manifest.to_str().unwrap(),
        "--kind",
        "sdc",
        "--out",
        dir.path().join("x.sdcf").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1, "one line, got: {err}");
    assert!(err.starts_with("stdc: error: BadHeader:"), "{err}");
}

#[test]
fn config_file_drives_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("pipeline.conf");
    std::fs::write(
        &config,
        "# analysis geometry\nsample_rate = 16000\nn_fft = 1024\nhop = 256\nn_mels = 64\nseed = 5\n",
    )
    .unwrap();
    let corpus = dir.path().join("corpus");
    let synth = stdc(&[
        "synth",
        "--out",
        corpus.to_str().unwrap(),
        "--count",
        "4",
        "--config",
        config.to_str().unwrap(),
    ]);
    assert!(synth.status.success(), "{}", stderr(&synth));

    let out = dir.path().join("f.sdcf");
    let extract = stdc(&[
        "extract",
        "--manifest",
        corpus.join("manifest.csv").to_str().unwrap(),
        "--kind",
        "sdc",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(extract.status.success(), "{}", stderr(&extract));
    assert!(stdout(&extract).contains("wrote 4 vectors"));

    let bad_config = dir.path().join("bad.conf");
    std::fs::write(&bad_config, "n_fft = 1000\n").unwrap();
    let rejected = stdc(&[
        "extract",
        "--manifest",
        corpus.join("manifest.csv").to_str().unwrap(),
        "--kind",
        "sdc",
        "--config",
        bad_config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!rejected.status.success());
    assert!(stderr(&rejected).contains("BadConfig"));
}

#[test]
fn corrupt_wav_is_reported_with_its_category() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.csv");
    std::fs::write(
        &manifest,
        "path,label,subset,attack_tag\nbroken.wav,bona_fide,train,\n",
    )
    .unwrap();
    std::fs::write(dir.path().join("broken.wav"), b"definitely not audio").unwrap();
    let out = stdc(&[
        "extract",
        "--manifest",
        manifest.to_str().unwrap(),
        "--kind",
        "sdc",
        "--out",
        dir.path().join("x.sdcf").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("CorruptHeader"), "{}", stderr(&out));
}
