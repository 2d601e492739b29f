use precip_sr::autodiff::{GradOptions, Graph, Tensor};
use precip_sr::data::{Dataset, PrecipField, Split};
use precip_sr::networks::{
    build_critic, build_generator, critic_forward, CriticConfig, GeneratorConfig, NetworkParams,
};
use precip_sr::rng;
use precip_sr::training::{
    critic_loss, critic_loss_graph, generator_loss, mean_score, read_history, run_training,
    srcnn_loss, RecordKind, TrainConfig, TrainMode, Trainer, HISTORY_FILE,
};
use precip_sr::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    Tensor::from_fn(shape.to_vec(), |_| rng.gen_range(lo..hi))
}

fn tiny_config(mode: TrainMode) -> TrainConfig {
    TrainConfig {
        mode,
        batch_size: 2,
        epochs: 2,
        seed: 11,
        generator: GeneratorConfig {
            scale_factor: 2,
            channels: vec![4, 4],
            kernel_sizes: vec![3, 3, 3],
            ..GeneratorConfig::default()
        },
        critic: CriticConfig {
            widths: vec![4, 8],
            input_size: 8,
            ..CriticConfig::default()
        },
        ..TrainConfig::default()
    }
}

fn tiny_dataset(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields = (0..n)
        .map(|i| {
            let v = (0..64).map(|_| rng.gen_range(0.0f32..20.0)).collect();
            (
                format!("f{i}"),
                PrecipField::new(8, v, i as i64, 1.0).unwrap(),
            )
        })
        .collect();
    Dataset::from_hr(Split::Train, fields, 2).unwrap()
}

fn bytes(p: &NetworkParams) -> Vec<u8> {
    p.to_bytes()
}

#[test]
fn srcnn_loss_matches_double_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random(&mut rng, &[3, 1, 5, 4], 0.0, 1.0);
    let b = random(&mut rng, &[3, 1, 5, 4], 0.0, 1.0);
    let mut acc = 0.0;
    for bi in 0..3 {
        for k in 0..20 {
            let d = a.data()[bi * 20 + k] - b.data()[bi * 20 + k];
            acc += d * d;
        }
    }
    let oracle = acc / (3.0 * 20.0);
    assert!((srcnn_loss(&a, &b).unwrap() - oracle).abs() < 1e-15);
}

#[test]
fn generator_loss_decomposes() {
    let critic = build_critic(
        &CriticConfig {
            widths: vec![4, 8],
            input_size: 8,
            ..Default::default()
        },
        2,
    )
    .unwrap();
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gen = random(&mut rng, &[4, 1, 8, 8], 0.0, 1.0);
        let tgt = random(&mut rng, &[4, 1, 8, 8], 0.0, 1.0);
        let alpha = rng.gen_range(0.0..20.0);
        let total = generator_loss(&critic, &gen, &tgt, alpha).unwrap();
        let parts = -mean_score(&critic, &gen).unwrap() + alpha * srcnn_loss(&gen, &tgt).unwrap();
        assert!((total - parts).abs() < 1e-12, "{total} vs {parts}");
    }
    let zero = critic.zeroed();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let gen = random(&mut rng, &[2, 1, 8, 8], 0.0, 1.0);
    assert_eq!(generator_loss(&zero, &gen, &gen, 0.0).unwrap(), 0.0);
    let with_alpha = generator_loss(&critic, &gen, &gen, 10.0).unwrap();
    assert!((with_alpha + mean_score(&critic, &gen).unwrap()).abs() < 1e-12);
}

fn linear_critic(weights: Vec<f64>, side: usize) -> NetworkParams {
    let cfg = CriticConfig {
        widths: vec![],
        input_size: side,
        ..Default::default()
    };
    let mut p = build_critic(&cfg, 0).unwrap();
    {
        let mut it = p.values_mut();
        it.next().unwrap().copy_from_slice(&weights);
        it.next().unwrap()[0] = 0.3;
    }
    p
}

#[test]
fn unit_norm_linear_critic_has_zero_penalty() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let w: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let critic = linear_critic(w.iter().map(|x| x / n).collect(), 4);
    let real = random(&mut rng, &[3, 1, 4, 4], 0.0, 1.0);
    let fake = random(&mut rng, &[3, 1, 4, 4], 0.0, 1.0);
    let v = critic_loss(&critic, &real, &fake, 10.0, &[0.1, 0.5, 0.9]).unwrap();
    assert!(v.gp.abs() < 1e-10, "gp {}", v.gp);
}

#[test]
fn wasserstein_term_closed_form_for_linear_critic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let w: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let critic = linear_critic(w.clone(), 4);
    let real = random(&mut rng, &[3, 1, 4, 4], 0.0, 1.0);
    let fake = random(&mut rng, &[3, 1, 4, 4], 0.0, 1.0);
    let v = critic_loss(&critic, &real, &fake, 0.0, &[0.2, 0.4, 0.6]).unwrap();
    // mean_b w·real_b - mean_b w·fake_b
    let dot = |t: &Tensor, b: usize| (0..16).map(|k| w[k] * t.data()[b * 16 + k]).sum::<f64>();
    let expect = (0..3).map(|b| dot(&real, b) - dot(&fake, b)).sum::<f64>() / 3.0;
    assert!((v.wasserstein - expect).abs() < 1e-12);
    assert_eq!(v.gp, 0.0);
    assert_eq!(v.loss, -v.wasserstein);

    let same = critic_loss(&critic, &real, &real, 10.0, &[0.2, 0.4, 0.6]).unwrap();
    assert_eq!(same.wasserstein, 0.0);
}

#[test]
fn penalty_is_nonnegative_and_rejects_bad_eps() {
    let critic = build_critic(
        &CriticConfig {
            widths: vec![4],
            input_size: 8,
            ..Default::default()
        },
        3,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..5 {
        let real = random(&mut rng, &[2, 1, 8, 8], 0.0, 1.0);
        let fake = random(&mut rng, &[2, 1, 8, 8], 0.0, 1.0);
        let eps = [rng.gen(), rng.gen()];
        assert!(critic_loss(&critic, &real, &fake, 10.0, &eps).unwrap().gp >= 0.0);
    }
    let real = random(&mut rng, &[2, 1, 8, 8], 0.0, 1.0);
    assert!(critic_loss(&critic, &real, &real, 10.0, &[1.2, 0.0]).is_err());
}

/// Gradient of the penalty term with respect to the critic parameters.
fn gp_and_grad(
    critic: &NetworkParams,
    real: &Tensor,
    fake: &Tensor,
    eps: &[f64],
) -> (f64, Vec<Tensor>) {
    let cfg = critic.critic_config().unwrap();
    let mut g = Graph::new();
    let vars = critic.bind(&mut g, true);
    let t = critic_loss_graph(&mut g, cfg, &vars, real, fake, 10.0, eps).unwrap();
    let value = g.value(t.gp).item().unwrap();
    // The final bias does not move the input gradient, so it is unused.
    let opts = GradOptions {
        create_graph: false,
        allow_unused: true,
    };
    let grads = g.grad_with(t.gp, &vars, opts).unwrap();
    (
        value,
        grads.into_iter().map(|v| g.value(v).clone()).collect(),
    )
}

#[test]
fn penalty_gradient_matches_finite_differences() {
    let critic = build_critic(
        &CriticConfig {
            widths: vec![3],
            input_size: 4,
            ..Default::default()
        },
        8,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let real = random(&mut rng, &[2, 1, 4, 4], 0.0, 1.0);
    let fake = random(&mut rng, &[2, 1, 4, 4], 0.0, 1.0);
    let eps = [0.3, 0.8];
    let (_, analytic) = gp_and_grad(&critic, &real, &fake, &eps);
    let h = 1e-6;
    let (mut diff2, mut norm2) = (0.0, 0.0);
    for (k, (_, t)) in critic.tensors().iter().enumerate() {
        for i in 0..t.len() {
            let shift = |d: f64| {
                let mut p = critic.clone();
                p.values_mut().nth(k).unwrap()[i] += d;
                gp_and_grad(&p, &real, &fake, &eps).0
            };
            let fd = (shift(h) - shift(-h)) / (2.0 * h);
            let a = analytic[k].data()[i];
            diff2 += (fd - a).powi(2);
            norm2 += a.powi(2).max(fd.powi(2));
        }
    }
    let rel = (diff2 / norm2).sqrt();
    assert!(rel < 1e-4, "relative error {rel:e}");
}

#[test]
fn zero_learning_rate_leaves_parameters() {
    let mut cfg = tiny_config(TrainMode::Srcnn);
    cfg.adam.learning_rate = 0.0;
    let mut t = Trainer::new(cfg).unwrap();
    let before = bytes(&t.generator);
    let data = tiny_dataset(4, 1).normalized().unwrap();
    let batch = data.batch(&[0, 1]).unwrap();
    t.train_step(&batch, &mut rng::stream(0, 9)).unwrap();
    assert_eq!(bytes(&t.generator), before);
}

#[test]
fn wgan_step_schedule() {
    let mut cfg = tiny_config(TrainMode::Wgan);
    cfg.n_critic = 3;
    let data = tiny_dataset(4, 2).normalized().unwrap();
    let batch = data.batch(&[0, 1]).unwrap();
    let mut t = Trainer::new(cfg).unwrap();
    let g0 = bytes(&t.generator);
    let c0 = bytes(t.critic.as_ref().unwrap());
    let recs = t.train_step(&batch, &mut rng::stream(0, 9)).unwrap();
    let kinds: Vec<RecordKind> = recs.iter().map(|r| r.kind).collect();
    assert_eq!(
        kinds,
        [
            RecordKind::Critic,
            RecordKind::Critic,
            RecordKind::Critic,
            RecordKind::Generator
        ]
    );
    assert_ne!(bytes(&t.generator), g0);
    assert_ne!(bytes(t.critic.as_ref().unwrap()), c0);
}

#[test]
fn separate_updates_touch_only_their_network() {
    // Critic updates with the generator optimizer frozen, and vice versa.
    let data = tiny_dataset(4, 3).normalized().unwrap();
    let batch = data.batch(&[0, 1]).unwrap();
    let mut t = Trainer::new(tiny_config(TrainMode::Wgan)).unwrap();
    t.generator_opt.config.learning_rate = 0.0;
    let g0 = bytes(&t.generator);
    t.train_step(&batch, &mut rng::stream(0, 1)).unwrap();
    assert_eq!(
        bytes(&t.generator),
        g0,
        "critic phase changed the generator"
    );

    let mut t = Trainer::new(tiny_config(TrainMode::Wgan)).unwrap();
    t.critic_opt.as_mut().unwrap().config.learning_rate = 0.0;
    let c0 = bytes(t.critic.as_ref().unwrap());
    t.train_step(&batch, &mut rng::stream(0, 1)).unwrap();
    assert_eq!(
        bytes(t.critic.as_ref().unwrap()),
        c0,
        "generator phase changed the critic"
    );
    assert_ne!(
        bytes(&t.generator),
        bytes(
            &Trainer::new(tiny_config(TrainMode::Wgan))
                .unwrap()
                .generator
        )
    );
}

#[test]
fn wgan_step_is_deterministic() {
    let data = tiny_dataset(4, 4).normalized().unwrap();
    let batch = data.batch(&[2, 3]).unwrap();
    let run = || {
        let mut t = Trainer::new(tiny_config(TrainMode::Wgan)).unwrap();
        t.train_step(&batch, &mut rng::stream(5, 5)).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn memorizes_four_samples() {
    let mut cfg = tiny_config(TrainMode::Srcnn);
    cfg.batch_size = 4;
    cfg.adam.learning_rate = 1e-2;
    cfg.adam.beta1 = 0.9;
    cfg.adam.beta2 = 0.999;
    cfg.generator.channels = vec![16, 16];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let fields = (0..4)
        .map(|i| {
            let v = (0..64).map(|_| rng.gen_range(0.0f32..16.0)).collect();
            (format!("f{i}"), PrecipField::new(8, v, i, 1.0).unwrap())
        })
        .collect();
    let data = Dataset::from_hr(Split::Train, fields, 2)
        .unwrap()
        .normalized()
        .unwrap();
    let batch = data.batch(&[0, 1, 2, 3]).unwrap();
    let mut t = Trainer::new(cfg).unwrap();
    let mut srng = rng::stream(0, 0);
    let first = t.train_step(&batch, &mut srng).unwrap()[0].total;
    let mut last = first;
    for _ in 0..499 {
        last = t.train_step(&batch, &mut srng).unwrap()[0].total;
    }
    assert!(last < 0.1 * first, "loss {first} -> {last}");
}

#[test]
fn zero_epochs_returns_initial_networks() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(TrainMode::Srcnn);
    cfg.epochs = 0;
    let out = run_training(&tiny_dataset(4, 5), None, &cfg, dir.path(), false).unwrap();
    assert!(out.history.is_empty());
    assert_eq!(
        out.generator,
        build_generator(&cfg.generator, cfg.seed).unwrap()
    );
    let text = std::fs::read_to_string(dir.path().join(HISTORY_FILE)).unwrap();
    assert_eq!(text.trim(), "step,mode,wasserstein,mse,gp,total");
}

#[test]
fn wgan_history_has_n_critic_records_per_generator_record() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(TrainMode::Wgan);
    cfg.epochs = 1;
    let out = run_training(&tiny_dataset(6, 6), None, &cfg, dir.path(), false).unwrap();
    let critic = out
        .history
        .iter()
        .filter(|r| r.kind == RecordKind::Critic)
        .count();
    let gen = out
        .history
        .iter()
        .filter(|r| r.kind == RecordKind::Generator)
        .count();
    assert_eq!(gen, 3);
    assert_eq!(critic, 5 * gen);
    for chunk in out.history.chunks(6) {
        assert!(chunk[..5].iter().all(|r| r.kind == RecordKind::Critic));
        assert_eq!(chunk[5].kind, RecordKind::Generator);
    }
    let on_disk = read_history(std::io::BufReader::new(
        std::fs::File::open(&out.history_path).unwrap(),
    ))
    .unwrap();
    assert_eq!(on_disk, out.history);
}

#[test]
fn resume_matches_uninterrupted_run() {
    for mode in [TrainMode::Srcnn, TrainMode::Wgan] {
        let data = tiny_dataset(6, 7);
        let mut cfg = tiny_config(mode);
        cfg.epochs = 3;
        let full_dir = tempfile::tempdir().unwrap();
        let full = run_training(&data, Some(&data), &cfg, full_dir.path(), false).unwrap();

        let split_dir = tempfile::tempdir().unwrap();
        let mut first = cfg.clone();
        first.epochs = 1;
        run_training(&data, Some(&data), &first, split_dir.path(), false).unwrap();
        let resumed = run_training(&data, Some(&data), &cfg, split_dir.path(), true).unwrap();

        assert_eq!(resumed.history, full.history);
        assert_eq!(bytes(&resumed.generator), bytes(&full.generator));
        assert_eq!(resumed.best, full.best);
        let a = std::fs::read(full_dir.path().join(HISTORY_FILE)).unwrap();
        let b = std::fs::read(split_dir.path().join(HISTORY_FILE)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn resume_with_other_config_is_refused() {
    let data = tiny_dataset(4, 8);
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(TrainMode::Srcnn);
    run_training(&data, None, &cfg, dir.path(), false).unwrap();
    let mut other = cfg.clone();
    other.generator.channels = vec![8, 4];
    assert!(matches!(
        run_training(&data, None, &other, dir.path(), true),
        Err(Error::Config(_))
    ));
}

#[test]
fn divergence_is_reported_with_last_finite_record() {
    let mut cfg = tiny_config(TrainMode::Srcnn);
    cfg.adam.learning_rate = 1e150;
    let data = tiny_dataset(4, 9).normalized().unwrap();
    let batch = data.batch(&[0, 1]).unwrap();
    let mut t = Trainer::new(cfg).unwrap();
    let mut srng = rng::stream(0, 0);
    let mut err = None;
    for _ in 0..20 {
        if let Err(e) = t.train_step(&batch, &mut srng) {
            err = Some(e);
            break;
        }
    }
    match err {
        Some(Error::Divergence { last_finite, .. }) => assert!(last_finite.is_some()),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn critic_scores_are_per_sample() {
    let critic = build_critic(
        &CriticConfig {
            widths: vec![4],
            input_size: 8,
            ..Default::default()
        },
        1,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x = random(&mut rng, &[3, 1, 8, 8], 0.0, 1.0);
    let all = critic_forward(&critic, &x).unwrap();
    for b in 0..3 {
        let one = Tensor::new(vec![1, 1, 8, 8], x.data()[b * 64..(b + 1) * 64].to_vec()).unwrap();
        assert!((critic_forward(&critic, &one).unwrap().data()[0] - all.data()[b]).abs() < 1e-12);
    }
}
