use uai_core::data::{generate_synthetic, EmbeddingDataset, Factor, SynthConfig};
use uai_core::nn::{Activation, DenseLayer, Mlp};
use uai_core::rng::rng_from;
use uai_core::uai::{
    load_checkpoint, save_checkpoint, train, EpochLosses, LossReport, TrainObserver, UaiConfig,
    UaiModel, UpdateEvent,
};
use uai_core::{Error, Matrix};

fn dense(rows: usize, cols: usize, weight: &[f64], bias: &[f64], act: Activation) -> DenseLayer {
    DenseLayer::from_parts(Matrix::from_vec(rows, cols, weight.to_vec()).unwrap(), bias.to_vec(), act).unwrap()
}

fn net(layers: Vec<DenseLayer>) -> Mlp {
    Mlp::new(layers).unwrap()
}

fn tiny_config() -> UaiConfig {
    UaiConfig {
        input_dim: 2,
        h1_dim: 2,
        h2_dim: 1,
        num_speakers: 1,
        dropout_p: 0.0,
        enc_hidden: vec![2],
        dec_hidden: vec![],
        pred_hidden: vec![],
        dis_hidden: vec![],
        ..UaiConfig::default()
    }
}

// Hand-picked parameters for the 2/2/1 model.
const TRUNK_W: [f64; 4] = [1.0, -0.5, 0.25, 2.0];
const TRUNK_B: [f64; 2] = [0.1, -0.2];
const H1_W: [f64; 4] = [0.5, 1.0, -1.0, 0.5];
const H1_B: [f64; 2] = [0.0, 0.3];
const H2_W: [f64; 2] = [0.7, -0.4];
const H2_B: [f64; 1] = [0.05];
const DEC_W: [f64; 6] = [1.0, 0.0, 0.5, -0.5, -1.0, 2.0];
const DEC_B: [f64; 2] = [0.0, 0.1];
const DIS1_W: [f64; 2] = [0.2, -0.3];
const DIS1_B: [f64; 1] = [0.1];
const DIS2_W: [f64; 2] = [1.5, -0.5];
const DIS2_B: [f64; 2] = [0.0, 0.2];

fn hand_model() -> UaiModel {
    use uai_core::uai::Encoder;
    let enc = Encoder {
        trunk: net(vec![dense(2, 2, &TRUNK_W, &TRUNK_B, Activation::Relu)]),
        h1_head: net(vec![dense(2, 2, &H1_W, &H1_B, Activation::Linear)]),
        h2_head: net(vec![dense(2, 1, &H2_W, &H2_B, Activation::Linear)]),
    };
    UaiModel::from_parts(
        tiny_config(),
        enc,
        net(vec![dense(3, 2, &DEC_W, &DEC_B, Activation::Linear)]),
        net(vec![dense(2, 1, &[0.3, -0.8], &[0.0], Activation::Linear)]),
        net(vec![dense(2, 1, &DIS1_W, &DIS1_B, Activation::Linear)]),
        net(vec![dense(1, 2, &DIS2_W, &DIS2_B, Activation::Linear)]),
    )
    .unwrap()
}

/// `v · W + b` for a row-major `W` of shape `v.len() × b.len()`.
fn affine(v: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    (0..b.len())
        .map(|j| b[j] + v.iter().enumerate().map(|(i, x)| x * w[i * b.len() + j]).sum::<f64>())
        .collect()
}

fn sq_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[test]
fn forward_main_matches_hand_computation() {
    let model = hand_model();
    let rows = [[1.0, 2.0], [-0.5, 0.25]];
    let x = Matrix::from_rows(&rows).unwrap();
    let (report, _) = model.forward_main(&x, &[0, 0], &mut rng_from(1)).unwrap();

    let (mut recon, mut dis1, mut dis2) = (0.0, 0.0, 0.0);
    for r in &rows {
        let t: Vec<f64> = affine(r, &TRUNK_W, &TRUNK_B).into_iter().map(|v| v.max(0.0)).collect();
        let h1 = affine(&t, &H1_W, &H1_B);
        let h2 = affine(&t, &H2_W, &H2_B);
        let z = [h1[0], h1[1], h2[0]];
        recon += sq_err(&affine(&z, &DEC_W, &DEC_B), r);
        dis1 += sq_err(&affine(&h1, &DIS1_W, &DIS1_B), &h2);
        dis2 += sq_err(&affine(&h2, &DIS2_W, &DIS2_B), &h1);
    }
    let (recon, dis1, dis2) = (recon / 4.0, dis1 / 2.0, dis2 / 4.0);

    // One speaker class: the softmax is identically 1.
    assert_eq!(report.l_pred, 0.0);
    assert!((report.l_recon - recon).abs() < 1e-12);
    assert!((report.l_dis1 - dis1).abs() < 1e-12);
    assert!((report.l_dis2 - dis2).abs() < 1e-12);
    assert!((report.l_main - 5.0 * recon).abs() < 1e-12);
    assert_eq!(report.l_adv, report.l_dis1 + report.l_dis2);

    let (adv, _) = model.forward_adv(&x).unwrap();
    assert_eq!((adv.l_dis1, adv.l_dis2), (report.l_dis1, report.l_dis2));
}

#[test]
fn loss_combination_uses_published_weights() {
    let c = UaiConfig::default();
    assert!((c.alpha * 0.02 + c.beta * 0.1 - 2.5).abs() < 1e-15);
}

#[test]
fn zero_disentanglers_predict_nothing() {
    let mut model = hand_model();
    for p in model.dis1.param_slices_mut().into_iter().chain(model.dis2.param_slices_mut()) {
        p.iter_mut().for_each(|v| *v = 0.0);
    }
    let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, -1.0]]).unwrap();
    let lat = model.encode(&x).unwrap();
    let mean_sq = |m: &Matrix| m.as_slice().iter().map(|v| v * v).sum::<f64>() / m.as_slice().len() as f64;
    let (r, _) = model.forward_adv(&x).unwrap();
    assert!((r.l_adv - (mean_sq(&lat.h2) + mean_sq(&lat.h1))).abs() < 1e-12);
}

#[test]
fn perfect_disentanglers_give_zero_adversarial_loss() {
    // h1 = [t, t], h2 = [t] with identity-like heads; dis maps are exact.
    let enc = uai_core::uai::Encoder {
        trunk: net(vec![dense(2, 1, &[1.0, 1.0], &[0.0], Activation::Linear)]),
        h1_head: net(vec![dense(1, 2, &[1.0, 1.0], &[0.0, 0.0], Activation::Linear)]),
        h2_head: net(vec![dense(1, 1, &[1.0], &[0.0], Activation::Linear)]),
    };
    let model = UaiModel::from_parts(
        UaiConfig { enc_hidden: vec![1], ..tiny_config() },
        enc,
        net(vec![dense(3, 2, &[0.0; 6], &[0.0; 2], Activation::Linear)]),
        net(vec![dense(2, 1, &[0.0; 2], &[0.0], Activation::Linear)]),
        net(vec![dense(2, 1, &[1.0, 0.0], &[0.0], Activation::Linear)]),
        net(vec![dense(1, 2, &[1.0, 1.0], &[0.0, 0.0], Activation::Linear)]),
    )
    .unwrap();
    let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5]]).unwrap();
    assert_eq!(model.forward_adv(&x).unwrap().0.l_adv, 0.0);
}

#[test]
fn encode_zero_parameters_and_default_shapes() {
    let mut model = hand_model();
    for m in [&mut model.enc.trunk, &mut model.enc.h1_head, &mut model.enc.h2_head] {
        m.param_slices_mut().into_iter().for_each(|p| p.iter_mut().for_each(|v| *v = 0.0));
    }
    let x = Matrix::from_rows(&[vec![4.0, -2.0]]).unwrap();
    let lat = model.encode(&x).unwrap();
    assert!(lat.h1.as_slice().iter().chain(lat.h2.as_slice()).all(|&v| v == 0.0));

    let model = UaiModel::new(UaiConfig { num_speakers: 5, ..UaiConfig::default() }).unwrap();
    let x = Matrix::from_vec(3, 512, (0..3 * 512).map(|i| (i as f64 * 0.01).sin()).collect()).unwrap();
    let lat = model.encode(&x).unwrap();
    assert_eq!((lat.h1.shape(), lat.h2.shape()), ((3, 128), (3, 32)));
    assert_eq!(lat, model.encode(&x).unwrap());
    assert_eq!(lat.pairs().count(), 3);
    assert!(matches!(model.encode(&Matrix::zeros(1, 7)), Err(Error::DimensionMismatch { .. })));
}

fn small_config(hidden: Activation, latent: Activation) -> UaiConfig {
    UaiConfig {
        input_dim: 4,
        h1_dim: 3,
        h2_dim: 2,
        num_speakers: 3,
        dropout_p: 0.5,
        enc_hidden: vec![5, 4],
        dec_hidden: vec![4],
        pred_hidden: vec![4],
        dis_hidden: vec![3],
        hidden_activation: hidden,
        latent_activation: latent,
        ..UaiConfig::default()
    }
}

fn small_batch() -> (Matrix, Vec<usize>) {
    let x = Matrix::from_vec(5, 4, (0..20).map(|i| ((i * 7 % 11) as f64 - 5.0) * 0.3).collect()).unwrap();
    (x, vec![0, 2, 1, 2, 0])
}

fn assert_close(analytic: &[f64], numeric: &[f64]) {
    assert_eq!(analytic.len(), numeric.len());
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        let tol = 1e-4 * a.abs().max(n.abs()) + 1e-8;
        assert!((a - n).abs() <= tol, "parameter {i}: analytic {a}, numeric {n}");
    }
}

/// Central differences of `objective` over the parameters of the chosen networks.
fn numeric_gradient(
    model: &mut UaiModel,
    main_group: bool,
    objective: &dyn Fn(&UaiModel) -> f64,
) -> Vec<f64> {
    let h = 1e-5;
    let n_nets = if main_group { 5 } else { 2 };
    let mut out = Vec::new();
    for k in 0..n_nets {
        let lens: Vec<usize> = pick(model, main_group, k).param_lens();
        for (s, len) in lens.into_iter().enumerate() {
            for j in 0..len {
                let original = pick(model, main_group, k).param_slices_mut()[s][j];
                pick(model, main_group, k).param_slices_mut()[s][j] = original + h;
                let plus = objective(model);
                pick(model, main_group, k).param_slices_mut()[s][j] = original - h;
                let minus = objective(model);
                pick(model, main_group, k).param_slices_mut()[s][j] = original;
                out.push((plus - minus) / (2.0 * h));
            }
        }
    }
    out
}

fn pick(model: &mut UaiModel, main_group: bool, k: usize) -> &mut Mlp {
    match (main_group, k) {
        (true, 0) => &mut model.enc.trunk,
        (true, 1) => &mut model.enc.h1_head,
        (true, 2) => &mut model.enc.h2_head,
        (true, 3) => &mut model.dec,
        (true, 4) => &mut model.pred,
        (false, 0) => &mut model.dis1,
        (false, 1) => &mut model.dis2,
        _ => unreachable!(),
    }
}

#[test]
fn main_gradient_matches_finite_differences() {
    let (x, y) = small_batch();
    for (seed, hidden, latent) in [
        (1, Activation::Tanh, Activation::Tanh),
        (2, Activation::Tanh, Activation::Linear),
        (3, Activation::Relu, Activation::Linear),
    ] {
        let mut model = UaiModel::new(UaiConfig { seed, ..small_config(hidden, latent) }).unwrap();
        let objective = |m: &UaiModel| {
            let (r, _) = m.forward_main(&x, &y, &mut rng_from(11)).unwrap();
            r.l_main - m.config().gamma * r.l_adv
        };
        let (_, pass) = model.forward_main(&x, &y, &mut rng_from(11)).unwrap();
        let grads = model.main_gradients(&pass).unwrap();
        let analytic: Vec<f64> = grads.slices().concat();
        let numeric = numeric_gradient(&mut model, true, &objective);
        assert_close(&analytic, &numeric);
    }
}

#[test]
fn adversarial_gradient_matches_finite_differences() {
    let (x, _) = small_batch();
    let mut model = UaiModel::new(small_config(Activation::Tanh, Activation::Linear)).unwrap();
    let objective = |m: &UaiModel| m.forward_adv(&x).unwrap().0.l_adv;
    let (_, pass) = model.forward_adv(&x).unwrap();
    let analytic: Vec<f64> = model.adv_gradients(&pass).unwrap().slices().concat();
    let numeric = numeric_gradient(&mut model, false, &objective);
    assert_close(&analytic, &numeric);
}

fn toy_dataset(seed: u64) -> EmbeddingDataset {
    generate_synthetic(&SynthConfig {
        n_speakers: 3,
        n_per_speaker: 12,
        n_nuisance: 2,
        dim: 6,
        speaker_subspace_dim: 2,
        nuisance_subspace_dim: 1,
        noise_sigma: 0.2,
        seed,
    })
    .unwrap()
    .dataset
}

fn toy_config(seed: u64) -> UaiConfig {
    UaiConfig {
        input_dim: 6,
        h1_dim: 4,
        h2_dim: 2,
        num_speakers: 3,
        epochs: 3,
        batch_size: 8,
        seed,
        enc_hidden: vec![8, 8],
        dec_hidden: vec![8],
        pred_hidden: vec![8],
        dis_hidden: vec![4],
        latent_activation: Activation::Tanh,
        ..UaiConfig::default()
    }
}

#[derive(Default)]
struct Audit {
    events: Vec<UpdateEvent>,
    theta: Vec<u64>,
    phi: Vec<u64>,
    reports: Vec<LossReport>,
}

impl TrainObserver for Audit {
    fn on_update(&mut self, _epoch: usize, event: UpdateEvent, batch: &LossReport, model: &UaiModel) {
        self.events.push(event);
        self.theta.push(model.theta_fingerprint());
        self.phi.push(model.phi_fingerprint());
        self.reports.push(*batch);
    }
}

#[test]
fn schedule_identities_and_parameter_isolation() {
    let ds = toy_dataset(0);
    let mut model = UaiModel::new(toy_config(0)).unwrap();
    let (mut theta, mut phi) = (model.theta_fingerprint(), model.phi_fingerprint());
    let mut audit = Audit::default();
    let history = train(&mut model, &ds, &mut audit).unwrap();
    assert_eq!(history.len(), 3);

    // 36 items, batch 8: 4 main updates per epoch, each preceded by 10 adversarial ones.
    assert_eq!(audit.events.len(), 3 * 4 * 11);
    for (i, e) in audit.events.iter().enumerate() {
        let expected = if i % 11 == 10 { UpdateEvent::Main } else { UpdateEvent::Adversarial };
        assert_eq!(*e, expected, "event {i}");
    }
    let c = model.config().clone();
    for i in 0..audit.events.len() {
        let r = audit.reports[i];
        assert!((r.l_adv - (r.l_dis1 + r.l_dis2)).abs() <= 1e-15 * r.l_adv.abs().max(1.0));
        match audit.events[i] {
            UpdateEvent::Adversarial => {
                assert_eq!(audit.theta[i], theta, "adversarial step {i} moved the main model");
                assert_ne!(audit.phi[i], phi);
            }
            UpdateEvent::Main => {
                assert_eq!(audit.phi[i], phi, "main step {i} moved the disentanglers");
                assert_ne!(audit.theta[i], theta);
                let combined = c.alpha * r.l_pred + c.beta * r.l_recon;
                assert!((r.l_main - combined).abs() <= 1e-15 * combined.abs().max(1.0));
            }
        }
        theta = audit.theta[i];
        phi = audit.phi[i];
    }
}

#[test]
fn identical_seeds_give_identical_runs() {
    let ds = toy_dataset(4);
    let run = || {
        let mut model = UaiModel::new(toy_config(9)).unwrap();
        let history = train(&mut model, &ds, &mut ()).unwrap();
        (history, save_checkpoint(&model))
    };
    let (h1, c1) = run();
    let (h2, c2) = run();
    assert_eq!(h1, h2);
    assert_eq!(c1, c2);
    let mut other = UaiModel::new(toy_config(10)).unwrap();
    assert_ne!(train(&mut other, &ds, &mut ()).unwrap(), h1);
}

#[test]
fn resumed_training_matches_uninterrupted() {
    let ds = toy_dataset(2);
    let mut full = UaiModel::new(UaiConfig { epochs: 4, ..toy_config(5) }).unwrap();
    let full_history = train(&mut full, &ds, &mut ()).unwrap();

    let mut first = UaiModel::new(UaiConfig { epochs: 2, ..toy_config(5) }).unwrap();
    let mut history = train(&mut first, &ds, &mut ()).unwrap();
    let mut resumed = load_checkpoint(&save_checkpoint(&first)).unwrap();
    assert_eq!(resumed.epochs_completed(), 2);
    resumed.set_epochs(4);
    history.extend(train(&mut resumed, &ds, &mut ()).unwrap());

    assert_eq!(history, full_history);
    assert_eq!(history.iter().map(|h| h.epoch).collect::<Vec<_>>(), [0, 1, 2, 3]);
    assert_eq!(save_checkpoint(&resumed), save_checkpoint(&full));
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let ds = toy_dataset(1);
    let mut model = UaiModel::new(toy_config(3)).unwrap();
    train(&mut model, &ds, &mut ()).unwrap();
    let bytes = save_checkpoint(&model);
    assert_eq!(&bytes[..4], b"UAI1");
    let loaded = load_checkpoint(&bytes).unwrap();
    assert_eq!(loaded, model);
    assert_eq!(save_checkpoint(&loaded), bytes);
    assert_eq!(loaded.encode(&ds.embeddings).unwrap(), model.encode(&ds.embeddings).unwrap());

    let x = ds.embeddings.select_rows(&[0, 5, 9, 30]);
    let y: Vec<usize> = [0, 5, 9, 30].iter().map(|&i| ds.speakers.labels[i]).collect();
    let before = model.forward_main(&x, &y, &mut rng_from(8)).unwrap().0;
    let after = loaded.forward_main(&x, &y, &mut rng_from(8)).unwrap().0;
    assert_eq!(before, after);
    assert_eq!(model.forward_adv(&x).unwrap().0, loaded.forward_adv(&x).unwrap().0);
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let model = UaiModel::new(toy_config(0)).unwrap();
    let bytes = save_checkpoint(&model);
    for len in 0..bytes.len() {
        assert!(
            matches!(load_checkpoint(&bytes[..len]), Err(Error::Checkpoint(_))),
            "prefix of {len} bytes accepted"
        );
    }
    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(load_checkpoint(&trailing).is_err());
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(load_checkpoint(&magic).is_err());
    let mut version = bytes;
    version[4] = 9;
    assert!(load_checkpoint(&version).is_err());
}

#[test]
fn classification_only_configuration_learns_separable_speakers() {
    // Two speakers on opposite sides of the origin.
    let rows: Vec<Vec<f64>> = (0..32)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            vec![s + 0.05 * (i as f64).sin(), 0.1 * (i as f64).cos(), s * 0.5]
        })
        .collect();
    let labels: Vec<usize> = (0..32).map(|i| i % 2).collect();
    let ds = EmbeddingDataset::new(
        Matrix::from_rows(&rows).unwrap(),
        Factor::new(labels, 2).unwrap(),
        Default::default(),
        (0..32).map(|i| format!("u{i}")).collect(),
    )
    .unwrap();
    let config = UaiConfig {
        input_dim: 3,
        h1_dim: 4,
        h2_dim: 2,
        num_speakers: 2,
        alpha: 1.0,
        beta: 0.0,
        gamma: 0.0,
        epochs: 40,
        batch_size: 8,
        enc_hidden: vec![8],
        dec_hidden: vec![4],
        pred_hidden: vec![4],
        dis_hidden: vec![4],
        ..UaiConfig::default()
    };
    let mut model = UaiModel::new(config).unwrap();
    let history = train(&mut model, &ds, &mut ()).unwrap();
    let first = history.first().unwrap().main.l_pred;
    let last = history.last().unwrap().main.l_pred;
    assert!(last < 0.5 * first, "l_pred {first} -> {last}");
}

#[test]
fn reconstruction_improves_every_epoch_without_adversary_or_dropout() {
    let ds = generate_synthetic(&SynthConfig {
        n_speakers: 8,
        n_per_speaker: 16,
        n_nuisance: 2,
        dim: 16,
        speaker_subspace_dim: 3,
        nuisance_subspace_dim: 1,
        noise_sigma: 0.0,
        seed: 6,
    })
    .unwrap()
    .dataset;
    let config = UaiConfig {
        input_dim: 16,
        h1_dim: 6,
        h2_dim: 3,
        num_speakers: 8,
        gamma: 0.0,
        dropout_p: 0.0,
        epochs: 10,
        batch_size: 16,
        enc_hidden: vec![32, 32],
        dec_hidden: vec![32, 32],
        pred_hidden: vec![16],
        dis_hidden: vec![8],
        ..UaiConfig::default()
    };
    let mut model = UaiModel::new(config).unwrap();
    let history = train(&mut model, &ds, &mut ()).unwrap();
    let recon: Vec<f64> = history.iter().map(|h: &EpochLosses| h.main.l_recon).collect();
    for w in recon.windows(2) {
        assert!(w[1] < w[0], "reconstruction loss rose: {recon:?}");
    }
}

#[test]
fn non_finite_input_aborts_with_diagnostic() {
    let mut ds = toy_dataset(0);
    ds.embeddings.row_mut(3)[1] = f64::NAN;
    let mut model = UaiModel::new(UaiConfig { batch_size: 36, ..toy_config(0) }).unwrap();
    match train(&mut model, &ds, &mut ()) {
        Err(Error::NonFinite { component, epoch }) => {
            assert_eq!(epoch, 0);
            assert!(component.starts_with("l_"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn training_rejects_mismatched_data() {
    let ds = toy_dataset(0);
    let mut model = UaiModel::new(UaiConfig { input_dim: 5, ..toy_config(0) }).unwrap();
    assert!(train(&mut model, &ds, &mut ()).is_err());
    let mut model = UaiModel::new(UaiConfig { batch_size: 64, ..toy_config(0) }).unwrap();
    assert!(matches!(train(&mut model, &ds, &mut ()), Err(Error::Config(_))));
    let mut model = UaiModel::new(UaiConfig { num_speakers: 2, ..toy_config(0) }).unwrap();
    assert!(matches!(train(&mut model, &ds, &mut ()), Err(Error::Input(_))));
}
