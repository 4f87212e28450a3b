use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use uai::embeddings::{labels_path, load_dataset, load_embeddings, save_dataset};
use uai::metrics::read_metrics;
use uai::rttm::{decode_rttm, RttmRecord};
use uai::trials::{decode_scores, load_trials};
use uai_core::data::{EmbeddingDataset, Factor};
use uai_core::eval::{kmeans, nmi, ClusterAssignment};
use uai_core::rng::derive_seed;
use uai_core::uai::load_checkpoint;
use uai_core::Matrix;

fn uai(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uai")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = uai(args);
    assert!(
        out.status.success(),
        "uai {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = uai(args);
    assert!(!out.status.success(), "uai {args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn listing(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

const SMALL: [&str; 12] = [
    "--set", "n_speakers=6",
    "--set", "n_per_speaker=12",
    "--set", "dim=16",
    "--set", "speaker_subspace_dim=4",
    "--set", "nuisance_subspace_dim=2",
    "--set", "noise_sigma=0.1",
];

fn gen_small(dir: &Path, extra: &[&str]) {
    let mut args = vec!["gen-synth", "--out", s(dir)];
    args.extend_from_slice(&SMALL);
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn gen_synth_defaults_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("data");
    ok(&["gen-synth", "--out", s(&out)]);
    let ds = load_dataset(&out.join("dataset.uaie")).unwrap();
    assert_eq!((ds.len(), ds.dim(), ds.n_speakers()), (1000, 512, 20));
    assert_eq!(ds.nuisance["nuisance"].n_classes, 4);
    let again = tmp.path().join("again");
    save_dataset(&ds, &again.with_extension("uaie")).unwrap();
    assert_eq!(
        std::fs::read(again.with_extension("uaie")).unwrap(),
        std::fs::read(out.join("dataset.uaie")).unwrap()
    );
}

#[test]
fn gen_synth_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let extra = ["--set", "split=0.5", "--set", "trials=100", "--set", "sessions=3"];
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    gen_small(&a, &extra);
    gen_small(&b, &extra);
    let names: Vec<_> = listing(&a).iter().map(|p| p.file_name().unwrap().to_owned()).collect();
    assert_eq!(names.len(), 8);
    for name in names {
        assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
    let trials = load_trials(&a.join("trials.tsv")).unwrap();
    assert_eq!(trials.len(), 100);
    let held = load_dataset(&a.join("eval.uaie")).unwrap();
    let index = held.index_of();
    assert!(trials.trials.iter().all(|t| index.contains_key(t.enroll.as_str()) && index.contains_key(t.test.as_str())));
}

#[test]
fn invalid_config_names_the_constraint_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let err = fails(&["gen-synth", "--out", s(&out), "--set", "speaker_subspace_dim=500", "--set", "nuisance_subspace_dim=20"]);
    assert!(err.contains("speaker_subspace_dim + nuisance_subspace_dim"), "{err}");
    let err = fails(&["gen-synth", "--out", s(&out), "--set", "n_speakerz=3"]);
    assert!(err.contains("n_speakerz"), "{err}");
    let err = fails(&["gen-synth", "--out", s(&out), "--set", "trials=1000000", "--set", "n_speakers=3"]);
    assert!(err.contains("trials"), "{err}");
    assert!(!out.exists());
    assert!(listing(tmp.path()).is_empty());
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("synth.cfg");
    std::fs::write(&cfg, "n_speakers = 3\nn_per_speaker=4\ndim=8\nspeaker_subspace_dim=2\nnuisance_subspace_dim=1\nseed=1\n").unwrap();
    let out = tmp.path().join("d");
    ok(&["gen-synth", "--out", s(&out), "--config", s(&cfg), "--set", "n_per_speaker=5"]);
    assert_eq!(load_dataset(&out.join("dataset.uaie")).unwrap().len(), 15);
}

#[test]
fn train_echoes_published_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    gen_small(tmp.path(), &[]);
    let data = tmp.path().join("dataset.uaie");
    let ckpt = tmp.path().join("model.ckpt");
    let out = ok(&["train", "--data", s(&data), "--out", s(&ckpt), "--dry-run"]);
    for line in ["alpha=100", "beta=5", "gamma=50", "epochs=350", "batch_size=128", "h1_dim=128", "h2_dim=32", "dropout_p=0.75"] {
        assert!(out.lines().any(|l| l == line), "missing {line} in\n{out}");
    }
    assert!(out.lines().any(|l| l == "num_speakers=6"));
    assert!(out.lines().any(|l| l == "input_dim=16"));
    assert!(!ckpt.exists());
}

fn train_small(dir: &Path, epochs: usize, extra: &[&str]) -> (PathBuf, PathBuf) {
    let data = dir.join("dataset.uaie");
    let ckpt = dir.join(format!("model{epochs}.ckpt"));
    let metrics = dir.join("metrics.tsv");
    let epochs = format!("epochs={epochs}");
    let mut args = vec![
        "train", "--data", s(&data), "--out", s(&ckpt), "--metrics", s(&metrics), "--run-id", "t",
        "--set", &epochs,
        "--set", "batch_size=16",
        "--set", "h1_dim=6",
        "--set", "h2_dim=3",
        "--set", "enc_hidden=16",
        "--set", "dec_hidden=16",
        "--set", "pred_hidden=8",
        "--set", "dis_hidden=8",
    ];
    args.extend_from_slice(extra);
    ok(&args);
    (ckpt, metrics)
}

#[test]
fn train_extract_and_resume() {
    let tmp = tempfile::tempdir().unwrap();
    gen_small(tmp.path(), &[]);
    let (ckpt, metrics) = train_small(tmp.path(), 2, &[]);
    let model = load_checkpoint(&std::fs::read(&ckpt).unwrap()).unwrap();
    assert_eq!(model.epochs_completed(), 2);
    let log = read_metrics(&metrics).unwrap();
    assert_eq!(log.iter().filter(|r| r.metric == "l_main").count(), 2);
    assert!(log.windows(2).all(|w| w[1].wall_clock >= w[0].wall_clock));

    let resumed = tmp.path().join("resumed.ckpt");
    let out = ok(&[
        "train", "--data", s(&tmp.path().join("dataset.uaie")), "--out", s(&resumed), "--resume", s(&ckpt),
        "--metrics", s(&metrics), "--run-id", "t", "--set", "epochs=4",
    ]);
    assert!(out.contains("resume_from_epoch=2"), "{out}");
    let log = read_metrics(&metrics).unwrap();
    let stages: Vec<&str> = log.iter().filter(|r| r.metric == "l_main").map(|r| r.stage.as_str()).collect();
    assert_eq!(stages, ["1", "2", "3", "4"]);
    assert!(log.windows(2).all(|w| w[1].wall_clock >= w[0].wall_clock));

    let (straight, straight_metrics) = {
        let dir = tmp.path().join("straight");
        std::fs::create_dir(&dir).unwrap();
        std::fs::copy(tmp.path().join("dataset.uaie"), dir.join("dataset.uaie")).unwrap();
        std::fs::copy(tmp.path().join("dataset.labels.tsv"), dir.join("dataset.labels.tsv")).unwrap();
        train_small(&dir, 4, &[])
    };
    assert_eq!(std::fs::read(&straight).unwrap(), std::fs::read(&resumed).unwrap());
    let values = |p: &Path| read_metrics(p).unwrap().into_iter().map(|r| (r.stage, r.metric, r.value.to_bits())).collect::<Vec<_>>();
    assert_eq!(values(&straight_metrics), values(&metrics));

    let err = fails(&[
        "train", "--data", s(&tmp.path().join("dataset.uaie")), "--out", s(&resumed), "--resume", s(&ckpt),
        "--set", "gamma=1",
    ]);
    assert!(err.contains("gamma") && err.contains("resume"), "{err}");

    let (h1, h2) = (tmp.path().join("h1.uaie"), tmp.path().join("h2.uaie"));
    let extract = || ok(&["extract", "--checkpoint", s(&resumed), "--data", s(&tmp.path().join("dataset.uaie")), "--h1", s(&h1), "--h2", s(&h2)]);
    extract();
    let first = (std::fs::read(&h1).unwrap(), std::fs::read(&h2).unwrap());
    let d1 = load_dataset(&h1).unwrap();
    let d2 = load_dataset(&h2).unwrap();
    assert_eq!((d1.dim(), d2.dim(), d1.len()), (6, 3, 72));
    let source = load_dataset(&tmp.path().join("dataset.uaie")).unwrap();
    assert_eq!((d1.speakers.clone(), d1.utterance_ids.clone()), (source.speakers.clone(), source.utterance_ids.clone()));
    assert_eq!(
        std::fs::read(labels_path(&h2)).unwrap(),
        std::fs::read(tmp.path().join("dataset.labels.tsv")).unwrap()
    );
    extract();
    assert_eq!((std::fs::read(&h1).unwrap(), std::fs::read(&h2).unwrap()), first);

    let err = fails(&["extract", "--checkpoint", s(&resumed), "--data", s(&h1), "--h1", s(&h1), "--h2", s(&h2)]);
    assert!(err.contains("dimension"), "{err}");
}

#[test]
fn extract_default_model_gives_128_and_32_dims() {
    let tmp = tempfile::tempdir().unwrap();
    gen_small(tmp.path(), &["--set", "dim=12"]);
    let data = tmp.path().join("dataset.uaie");
    let ckpt = tmp.path().join("m.ckpt");
    ok(&["train", "--data", s(&data), "--out", s(&ckpt), "--set", "epochs=0", "--set", "batch_size=8"]);
    let (h1, h2) = (tmp.path().join("h1.uaie"), tmp.path().join("h2.uaie"));
    ok(&["extract", "--checkpoint", s(&ckpt), "--data", s(&data), "--h1", s(&h1), "--h2", s(&h2)]);
    assert_eq!(load_embeddings(&h1).unwrap().cols(), 128);
    assert_eq!(load_embeddings(&h2).unwrap().cols(), 32);
}

#[test]
fn non_finite_training_aborts_without_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    gen_small(tmp.path(), &[]);
    let data = tmp.path().join("dataset.uaie");
    let mut ds = load_dataset(&data).unwrap();
    ds.embeddings[(3, 2)] = f64::INFINITY;
    save_dataset(&ds, &data).unwrap();
    let ckpt = tmp.path().join("m.ckpt");
    let err = fails(&["train", "--data", s(&data), "--out", s(&ckpt), "--set", "epochs=2", "--set", "batch_size=16"]);
    assert!(err.contains("non-finite") && err.contains("epoch 0"), "{err}");
    assert!(!ckpt.exists());
}

#[test]
fn eval_verify_separable_and_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    gen_small(tmp.path(), &["--set", "split=0.5", "--set", "trials=300"]);
    let scores = tmp.path().join("scores.tsv");
    let (train, eval, trials) = (tmp.path().join("train.uaie"), tmp.path().join("eval.uaie"), tmp.path().join("trials.tsv"));
    let args = [
        "eval-verify",
        "--train", s(&train),
        "--eval", s(&eval),
        "--trials", s(&trials),
        "--scores", s(&scores),
        "--lda-dim", "4",
    ];
    let out = ok(&args);
    let eer: f64 = out.trim().strip_prefix("eer\t").unwrap().parse().unwrap();
    assert!(eer < 0.05, "eer {eer}");
    let first = std::fs::read(&scores).unwrap();
    let parsed = decode_scores(&String::from_utf8(first.clone()).unwrap(), &scores).unwrap();
    assert_eq!(parsed.len(), 300);
    ok(&args);
    assert_eq!(std::fs::read(&scores).unwrap(), first);
}

#[test]
fn eval_verify_lists_missing_trial_ids() {
    let tmp = tempfile::tempdir().unwrap();
    gen_small(tmp.path(), &["--set", "split=0.5", "--set", "trials=20"]);
    let trials = tmp.path().join("trials.tsv");
    let mut text = std::fs::read_to_string(&trials).unwrap();
    text.push_str("ghost-1\tspk000-utt0000\ttarget\nspk000-utt0000\tghost-2\tnontarget\n");
    std::fs::write(&trials, text).unwrap();
    let scores = tmp.path().join("scores.tsv");
    let err = fails(&[
        "eval-verify",
        "--train", s(&tmp.path().join("train.uaie")),
        "--eval", s(&tmp.path().join("eval.uaie")),
        "--trials", s(&trials),
        "--scores", s(&scores),
        "--lda-dim", "4",
    ]);
    assert!(err.contains("ghost-1") && err.contains("ghost-2"), "{err}");
    assert!(!scores.exists());
}

fn one_hot_dataset(labels: &[usize], rooms: &[usize]) -> EmbeddingDataset {
    let k = labels.iter().max().unwrap() + 1;
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&l| (0..k).map(|j| if j == l { 10.0 } else { 0.0 }).collect())
        .collect();
    let mut nuisance = std::collections::BTreeMap::new();
    nuisance.insert("room".to_string(), Factor::from_labels(rooms.to_vec()));
    EmbeddingDataset::new(
        Matrix::from_rows(&rows).unwrap(),
        Factor::from_labels(labels.to_vec()),
        nuisance,
        (0..labels.len()).map(|i| format!("u{i}")).collect(),
    )
    .unwrap()
}

#[test]
fn eval_cluster_reports_each_factor_and_matches_the_library() {
    let tmp = tempfile::tempdir().unwrap();
    let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
    let rooms: Vec<usize> = (0..30).map(|i| (i / 3) % 2).collect();
    let ds = one_hot_dataset(&labels, &rooms);
    let path = tmp.path().join("e.uaie");
    save_dataset(&ds, &path).unwrap();
    let report = tmp.path().join("nmi.tsv");
    let out = ok(&["eval-cluster", "--embeddings", s(&path), "--report", s(&report), "--set", "seed=4"]);
    assert_eq!(std::fs::read_to_string(&report).unwrap(), out);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "speaker\t3\t1");

    let room_nmi = nmi(
        &kmeans(&ds.embeddings, 2, derive_seed(4, "room"), 300).unwrap().assignment,
        &ClusterAssignment::new(rooms.clone(), 2).unwrap(),
    )
    .unwrap();
    assert_eq!(lines[1], format!("room\t2\t{room_nmi}"));

    let out = ok(&["eval-cluster", "--embeddings", s(&path), "--factor", "speaker:5"]);
    assert!(out.starts_with("speaker\t5\t"), "{out}");
    let err = fails(&["eval-cluster", "--embeddings", s(&path), "--factor", "mic"]);
    assert!(err.contains("mic"), "{err}");
}

#[test]
fn eval_diar_reports_per_session_and_average() {
    let tmp = tempfile::tempdir().unwrap();
    // Two well separated speakers; utterance u1 sits with speaker A's cluster
    // but is labelled B in the reference, which costs its 10 s of 30 s.
    let rows = vec![vec![0.0, 0.0], vec![0.1, 0.0], vec![9.0, 9.0], vec![0.0, 0.1], vec![9.1, 9.0]];
    let ds = EmbeddingDataset::new(
        Matrix::from_rows(&rows).unwrap(),
        Factor::from_labels(vec![0, 1, 1, 0, 1]),
        Default::default(),
        (0..5).map(|i| format!("u{i}")).collect(),
    )
    .unwrap();
    let emb = tmp.path().join("e.uaie");
    save_dataset(&ds, &emb).unwrap();
    let rttm = tmp.path().join("ref.rttm");
    std::fs::write(
        &rttm,
        "SPEAKER hand 1 0 10 u0 <NA> A <NA> <NA>\n\
         SPEAKER hand 1 10 10 u1 <NA> B <NA> <NA>\n\
         SPEAKER hand 1 20 10 u2 <NA> B <NA> <NA>\n\
         SPEAKER clean 1 0.00 2.50 u3 <NA> A <NA> <NA>\n\
         SPEAKER clean 1 2.50 1.25 u4 <NA> B <NA> <NA>\n",
    )
    .unwrap();
    let hyp = tmp.path().join("hyp.rttm");
    let report = tmp.path().join("der.tsv");
    let out = ok(&["eval-diar", "--sessions", s(&rttm), "--embeddings", s(&emb), "--hyp", s(&hyp), "--report", s(&report)]);
    let rows: Vec<(String, f64)> = out
        .lines()
        .map(|l| {
            let (a, b) = l.split_once('\t').unwrap();
            (a.to_string(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows[0], ("hand".to_string(), 10.0 / 30.0));
    assert_eq!(rows[1], ("clean".to_string(), 0.0));
    assert_eq!(rows[2], ("average".to_string(), (10.0 / 30.0 + 0.0) / 2.0));
    assert_eq!(std::fs::read_to_string(&report).unwrap(), out);

    let records: Vec<RttmRecord> = decode_rttm(&std::fs::read_to_string(&hyp).unwrap(), &hyp).unwrap();
    assert_eq!(records.len(), 5);
    assert_eq!(records[3].start_text, "0.00");
    assert_eq!(records[0].speaker, records[1].speaker);
    assert_ne!(records[0].speaker, records[2].speaker);
    assert!(records.iter().all(|r| r.speaker.starts_with("spk")));
}

#[test]
fn eval_diar_on_generated_sessions_with_clean_embeddings_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    gen_small(tmp.path(), &["--set", "n_nuisance=1", "--set", "noise_sigma=0.01", "--set", "sessions=4"]);
    let out = ok(&[
        "eval-diar",
        "--sessions", s(&tmp.path().join("sessions.rttm")),
        "--embeddings", s(&tmp.path().join("dataset.uaie")),
        "--hyp", s(&tmp.path().join("hyp.rttm")),
    ]);
    assert_eq!(out.lines().count(), 5);
    assert!(out.lines().all(|l| l.ends_with("\t0")), "{out}");
}

#[test]
fn missing_inputs_fail_before_any_output() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.uaie");
    let out = tmp.path().join("x");
    let err = fails(&["extract", "--checkpoint", s(&missing), "--data", s(&missing), "--h1", s(&out), "--h2", s(&out)]);
    assert!(err.contains("nope.uaie"), "{err}");
    let err = fails(&["train", "--data", s(&missing), "--out", s(&tmp.path().join("no/dir/m.ckpt"))]);
    assert!(err.contains("nope.uaie"), "{err}");
    assert!(listing(tmp.path()).is_empty());
    let help = ok(&["--help"]);
    for cmd in ["gen-synth", "train", "extract", "eval-verify", "eval-cluster", "eval-diar"] {
        assert!(help.contains(cmd), "{help}");
    }
}
