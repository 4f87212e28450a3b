//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use uai_core::data::{generate_synthetic, split, EmbeddingDataset};
use uai_core::eval::{
    der, diarize_oracle, kmeans, make_sessions, make_trials, nmi, verify_pipeline, ClusterAssignment, VerifyConfig,
};
use uai_core::rng::{derive_indexed, derive_seed};
use uai_core::uai::{load_checkpoint, save_checkpoint, train, EpochLosses, TrainObserver, UaiConfig, UaiModel};

use crate::embeddings::{decode_labels, labels_path, load_dataset, save_dataset};
use crate::error::{Error, Result};
use crate::fsutil::{check_readable, check_writable_parent, read, read_text, write_atomic};
use crate::metrics::MetricsLog;
use crate::rttm::{load_rttm, save_rttm, sessions_from_rttm, sessions_to_rttm};
use crate::settings::Settings;
use crate::trials::{encode_scores, load_trials, save_trials};

#[derive(Debug, Parser)]
#[command(name = "uai", version, about = "Adversarial speaker/nuisance disentanglement of speech embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic speaker/nuisance embedding dataset.
    GenSynth(GenSynthArgs),
    /// Train a UAI model and write a checkpoint.
    Train(TrainArgs),
    /// Encode a dataset into h1 (speaker) and h2 (nuisance) embeddings.
    Extract(ExtractArgs),
    /// Score a trial list with LDA + PLDA and report the equal error rate.
    EvalVerify(EvalVerifyArgs),
    /// Cluster embeddings with k-means and report NMI against labelled factors.
    EvalCluster(EvalClusterArgs),
    /// Diarize oracle-segmented sessions and report DER.
    EvalDiar(EvalDiarArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// key=value config file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one config key; may be repeated. Wins over --config.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<Settings> {
        if let Some(p) = &self.config {
            check_readable(p)?;
        }
        Settings::load(self.config.as_deref(), &self.set)
    }
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Append metrics to this TSV log.
    #[arg(long, value_name = "FILE")]
    pub metrics: Option<PathBuf>,
    /// Run id written in the metrics log.
    #[arg(long, default_value = "run")]
    pub run_id: String,
}

impl MetricsArgs {
    fn check(&self) -> Result<()> {
        match &self.metrics {
            Some(p) => check_writable_parent(p),
            None => Ok(()),
        }
    }

    fn open(&self) -> Result<Option<MetricsLog>> {
        self.metrics
            .as_deref()
            .map(|p| MetricsLog::open(p, &self.run_id))
            .transpose()
    }
}

/// Keys: the generator's (`n_speakers`, `n_per_speaker`, `n_nuisance`, `dim`,
/// `speaker_subspace_dim`, `nuisance_subspace_dim`, `noise_sigma`, `seed`)
/// plus `split` (train fraction, 0 = none), `trials` (count, 0 = none),
/// `sessions` (count, 0 = none), `speakers_per_session`, `segments_per_session`.
#[derive(Debug, Args)]
pub struct GenSynthArgs {
    /// Output directory; created if missing.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training dataset (`.uaie` with label sidecar).
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Checkpoint to write.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Continue from this checkpoint; only `epochs` may be changed.
    #[arg(long, value_name = "FILE")]
    pub resume: Option<PathBuf>,
    /// Print the resolved configuration and stop.
    #[arg(long)]
    pub dry_run: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub metrics: MetricsArgs,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Output for the speaker embeddings.
    #[arg(long, value_name = "FILE")]
    pub h1: PathBuf,
    /// Output for the nuisance embeddings.
    #[arg(long, value_name = "FILE")]
    pub h2: PathBuf,
}

/// Keys: `lda_dim`, `em_iters`, `lda_ridge`.
#[derive(Debug, Args)]
pub struct EvalVerifyArgs {
    /// Embeddings the LDA and PLDA are fitted on.
    #[arg(long, value_name = "FILE")]
    pub train: PathBuf,
    /// Embeddings the trial ids refer to.
    #[arg(long, value_name = "FILE")]
    pub eval: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub trials: PathBuf,
    /// Scores output.
    #[arg(long, value_name = "FILE")]
    pub scores: PathBuf,
    /// LDA output dimension. Defaults to min(150, dim, speakers - 1).
    #[arg(long)]
    pub lda_dim: Option<usize>,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub metrics: MetricsArgs,
}

/// Keys: `seed`.
#[derive(Debug, Args)]
pub struct EvalClusterArgs {
    #[arg(long, value_name = "FILE")]
    pub embeddings: PathBuf,
    /// Label table to use instead of the embeddings' sidecar.
    #[arg(long, value_name = "FILE")]
    pub labels: Option<PathBuf>,
    /// `NAME` or `NAME:K`; may be repeated. K defaults to the factor's class
    /// count. Without this flag every labelled factor is probed.
    #[arg(long, value_name = "NAME[:K]")]
    pub factor: Vec<String>,
    /// Report output (`factor<TAB>k<TAB>nmi`); also printed to stdout.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub metrics: MetricsArgs,
}

/// Keys: `seed`.
#[derive(Debug, Args)]
pub struct EvalDiarArgs {
    /// Reference RTTM with oracle segments.
    #[arg(long, value_name = "FILE")]
    pub sessions: PathBuf,
    /// Embeddings the RTTM utterance ids refer to.
    #[arg(long, value_name = "FILE")]
    pub embeddings: PathBuf,
    /// Hypothesis RTTM to write.
    #[arg(long, value_name = "FILE")]
    pub hyp: PathBuf,
    /// Report output (`session<TAB>der`, then `average`); also printed to stdout.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub metrics: MetricsArgs,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenSynth(a) => gen_synth(&a),
        Command::Train(a) => train_cmd(&a),
        Command::Extract(a) => extract(&a),
        Command::EvalVerify(a) => eval_verify(&a),
        Command::EvalCluster(a) => eval_cluster(&a),
        Command::EvalDiar(a) => eval_diar(&a),
    }
}

fn gen_synth(a: &GenSynthArgs) -> Result<()> {
    let mut s = a.config.load()?;
    let cfg = s.synth_config()?;
    let train_fraction: f64 = s.take_or("split", 0.0)?;
    let n_trials: usize = s.take_or("trials", 0)?;
    let n_sessions: usize = s.take_or("sessions", 0)?;
    let per_session: usize = s.take_or("speakers_per_session", 4)?;
    let segments: usize = s.take_or("segments_per_session", 10)?;
    s.finish()?;
    if a.out.exists() && !a.out.is_dir() {
        return Err(Error::Config(format!("--out {} exists and is not a directory", a.out.display())));
    }

    let mut ds = generate_synthetic(&cfg)?.dataset;
    ds.embeddings = crate::embeddings::quantize(&ds.embeddings);
    let halves = if train_fraction == 0.0 {
        None
    } else {
        Some(split(&ds, train_fraction, derive_seed(cfg.seed, "split"))?)
    };
    let eval_side = halves.as_ref().map_or(&ds, |(_, held)| held);
    let trials = (n_trials > 0)
        .then(|| make_trials(eval_side, n_trials, derive_seed(cfg.seed, "trials")))
        .transpose()?;
    let sessions = (n_sessions > 0)
        .then(|| make_sessions(eval_side, n_sessions, per_session, segments, derive_seed(cfg.seed, "sessions")))
        .transpose()?;

    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    save_dataset(&ds, &a.out.join("dataset.uaie"))?;
    if let Some((train, held)) = &halves {
        save_dataset(train, &a.out.join("train.uaie"))?;
        save_dataset(held, &a.out.join("eval.uaie"))?;
    }
    if let Some(t) = &trials {
        save_trials(t, &a.out.join("trials.tsv"))?;
    }
    if let Some(sessions) = &sessions {
        save_rttm(&sessions_to_rttm(sessions, eval_side), &a.out.join("sessions.rttm"))?;
    }
    println!("wrote {} items of dim {} to {}", ds.len(), ds.dim(), a.out.display());
    Ok(())
}

struct Progress<'a> {
    log: Option<&'a mut MetricsLog>,
    error: Option<Error>,
}

impl TrainObserver for Progress<'_> {
    fn on_epoch(&mut self, l: &EpochLosses, _model: &UaiModel) {
        eprintln!(
            "epoch {:>4}  l_main {:.6}  l_pred {:.6}  l_recon {:.6}  l_adv {:.6}",
            l.epoch + 1,
            l.main.l_main,
            l.main.l_pred,
            l.main.l_recon,
            l.adv_l_adv
        );
        let Some(log) = self.log.as_deref_mut() else { return };
        let stage = format!("{}", l.epoch + 1);
        let rows = [
            ("l_main", l.main.l_main),
            ("l_pred", l.main.l_pred),
            ("l_recon", l.main.l_recon),
            ("l_dis1", l.main.l_dis1),
            ("l_dis2", l.main.l_dis2),
            ("l_adv", l.main.l_adv),
            ("adv_step_l_adv", l.adv_l_adv),
        ];
        for (name, v) in rows {
            if let Err(e) = log.record(&stage, name, v) {
                self.error.get_or_insert(e);
            }
        }
    }
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let mut s = a.config.load()?;
    check_readable(&a.data)?;
    check_writable_parent(&a.out)?;
    a.metrics.check()?;
    let mut model = match &a.resume {
        Some(path) => {
            let mut model = load_checkpoint(&read(path)?)?;
            if let Some(epochs) = s.take::<usize>("epochs")? {
                model.set_epochs(epochs);
            }
            s.finish()
                .map_err(|e| Error::Config(format!("{e} (only epochs can change on --resume)")))?;
            model
        }
        None => {
            let explicit_dim = s.contains("input_dim");
            let mut cfg = s.uai_config(UaiConfig::default())?;
            s.finish()?;
            let ds = load_dataset(&a.data)?;
            if !explicit_dim {
                cfg.input_dim = ds.dim();
            }
            if cfg.num_speakers == 0 {
                cfg.num_speakers = ds.n_speakers();
            }
            cfg.validate()?;
            UaiModel::new(cfg)?
        }
    };
    for line in model.config().describe() {
        println!("{line}");
    }
    if a.resume.is_some() {
        println!("resume_from_epoch={}", model.epochs_completed());
    }
    if a.dry_run {
        return Ok(());
    }
    let ds = load_dataset(&a.data)?;
    let mut log = a.metrics.open()?;
    let mut progress = Progress {
        log: log.as_mut(),
        error: None,
    };
    let result = train(&mut model, &ds, &mut progress);
    let log_error = progress.error.take();
    if let Some(log) = log.as_mut() {
        log.flush()?;
    }
    result?;
    if let Some(e) = log_error {
        return Err(e);
    }
    write_atomic(&a.out, &save_checkpoint(&model))?;
    println!("wrote checkpoint after epoch {} to {}", model.epochs_completed(), a.out.display());
    Ok(())
}

fn extract(a: &ExtractArgs) -> Result<()> {
    check_readable(&a.checkpoint)?;
    check_readable(&a.data)?;
    check_writable_parent(&a.h1)?;
    check_writable_parent(&a.h2)?;
    let model = load_checkpoint(&read(&a.checkpoint)?)?;
    let ds = load_dataset(&a.data)?;
    let latents = model.encode(&ds.embeddings)?;
    save_dataset(&ds.with_embeddings(latents.h1)?, &a.h1)?;
    save_dataset(&ds.with_embeddings(latents.h2)?, &a.h2)?;
    println!("wrote {} items: h1 dim {}, h2 dim {}", ds.len(), model.config().h1_dim, model.config().h2_dim);
    Ok(())
}

fn eval_verify(a: &EvalVerifyArgs) -> Result<()> {
    let mut s = a.config.load()?;
    if let Some(d) = a.lda_dim {
        s.insert("lda_dim", &d.to_string(), "--lda-dim");
    }
    let lda_dim: Option<usize> = s.take("lda_dim")?;
    let defaults = VerifyConfig::raw();
    let em_iters = s.take_or("em_iters", defaults.em_iters)?;
    let lda_ridge = s.take_or("lda_ridge", defaults.lda_ridge)?;
    s.finish()?;
    for p in [&a.train, &a.eval, &a.trials] {
        check_readable(p)?;
    }
    check_writable_parent(&a.scores)?;
    a.metrics.check()?;

    let train = load_dataset(&a.train)?;
    let eval = load_dataset(&a.eval)?;
    let trials = load_trials(&a.trials)?;
    let lda_dim = lda_dim.unwrap_or_else(|| defaults.lda_dim.min(train.dim()).min(train.n_speakers().saturating_sub(1)));
    let config = VerifyConfig {
        lda_dim,
        em_iters,
        lda_ridge,
    };
    let result = verify_pipeline(&train, &eval, &trials, &config)?;
    write_atomic(&a.scores, encode_scores(&trials, &result.scores).as_bytes())?;
    if result.plda_regularizations > 0 {
        eprintln!("PLDA needed {} ridge regularizations", result.plda_regularizations);
    }
    if let Some(mut log) = a.metrics.open()? {
        log.record("eval-verify", "eer", result.eer)?;
        log.flush()?;
    }
    println!("eer\t{}", result.eer);
    Ok(())
}

fn eval_cluster(a: &EvalClusterArgs) -> Result<()> {
    let mut s = a.config.load()?;
    let seed: u64 = s.take_or("seed", 0)?;
    s.finish()?;
    check_readable(&a.embeddings)?;
    if let Some(p) = &a.labels {
        check_readable(p)?;
    }
    if let Some(p) = &a.report {
        check_writable_parent(p)?;
    }
    a.metrics.check()?;

    let ds = load_dataset_with_labels(&a.embeddings, a.labels.as_deref())?;
    let requests = if a.factor.is_empty() {
        std::iter::once("speaker".to_string())
            .chain(ds.nuisance.keys().cloned())
            .map(|n| (n, None))
            .collect()
    } else {
        a.factor.iter().map(|f| parse_factor(f)).collect::<Result<Vec<_>>>()?
    };
    let mut rows = Vec::new();
    for (name, k) in requests {
        let factor = ds
            .factor(&name)
            .ok_or_else(|| Error::Config(format!("no factor named {name:?} in the label table")))?;
        let k = k.unwrap_or(factor.n_classes);
        let truth = ClusterAssignment::new(factor.labels.clone(), factor.n_classes)?;
        let clusters = kmeans(&ds.embeddings, k, derive_seed(seed, &name), 300)?;
        rows.push((name, k, nmi(&clusters.assignment, &truth)?));
    }
    let report: String = rows.iter().map(|(n, k, v)| format!("{n}\t{k}\t{v}\n")).collect();
    if let Some(p) = &a.report {
        write_atomic(p, report.as_bytes())?;
    }
    if let Some(mut log) = a.metrics.open()? {
        for (n, k, v) in &rows {
            log.record("eval-cluster", &format!("nmi_{n}_k{k}"), *v)?;
        }
        log.flush()?;
    }
    print_stdout(&report)
}

fn parse_factor(spec: &str) -> Result<(String, Option<usize>)> {
    match spec.split_once(':') {
        None => Ok((spec.to_string(), None)),
        Some((name, k)) => {
            let k = k
                .parse()
                .ok()
                .filter(|&k: &usize| k > 0)
                .ok_or_else(|| Error::Config(format!("--factor {spec:?}: K must be a positive integer")))?;
            Ok((name.to_string(), Some(k)))
        }
    }
}

fn load_dataset_with_labels(embeddings: &Path, labels: Option<&Path>) -> Result<EmbeddingDataset> {
    let Some(labels) = labels else {
        return load_dataset(embeddings);
    };
    let x = crate::embeddings::load_embeddings(embeddings)?;
    let table = decode_labels(&read_text(labels)?, labels)?;
    if table.utterance_ids.len() != x.rows() {
        return Err(Error::parse(
            labels,
            0,
            format!("{} label rows for {} embeddings", table.utterance_ids.len(), x.rows()),
        ));
    }
    Ok(EmbeddingDataset::new(x, table.speakers, table.nuisance, table.utterance_ids)?)
}

fn eval_diar(a: &EvalDiarArgs) -> Result<()> {
    let mut s = a.config.load()?;
    let seed: u64 = s.take_or("seed", 0)?;
    s.finish()?;
    check_readable(&a.sessions)?;
    check_readable(&a.embeddings)?;
    check_readable(&labels_path(&a.embeddings))?;
    check_writable_parent(&a.hyp)?;
    if let Some(p) = &a.report {
        check_writable_parent(p)?;
    }
    a.metrics.check()?;

    let ds = load_dataset(&a.embeddings)?;
    let records = load_rttm(&a.sessions)?;
    let sessions = sessions_from_rttm(&records, &ds, &a.sessions)?;
    if sessions.is_empty() {
        return Err(Error::parse(&a.sessions, 0, "no SPEAKER records"));
    }
    let mut hyp = records.clone();
    let mut report = String::new();
    let mut ders = Vec::with_capacity(sessions.len());
    for (i, parsed) in sessions.iter().enumerate() {
        let labels = diarize_oracle(&parsed.session, &ds.embeddings, derive_indexed(seed, "diar", i as u64))?;
        let d = der(&parsed.session, &labels)?;
        for (&r, &h) in parsed.records.iter().zip(&labels) {
            hyp[r].speaker = format!("spk{h}");
        }
        report.push_str(&format!("{}\t{d}\n", parsed.session.session_id));
        ders.push(d);
    }
    let average = ders.iter().sum::<f64>() / ders.len() as f64;
    report.push_str(&format!("average\t{average}\n"));
    save_rttm(&hyp, &a.hyp)?;
    if let Some(p) = &a.report {
        write_atomic(p, report.as_bytes())?;
    }
    if let Some(mut log) = a.metrics.open()? {
        log.record("eval-diar", "der_average", average)?;
        log.flush()?;
    }
    print_stdout(&report)
}

fn print_stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io("<stdout>", e))
}
