use criterion::{criterion_group, criterion_main, Criterion};
use posegail::autodiff::AdamConfig;
use posegail::imitation::{BcConfig, BcTrainer, GailConfig, WgailTrainer};
use posegail::nn::{GruCell, ParamSet};
use posegail::rng::{stream, Stream};
use posegail::{Frames, Precision, Tape, Tensor};
use posegail_bench::{critic, dataset, episode, policy, BATCH, HIDDEN, POSE_DIM};
use rand::Rng;

fn random(shape: &[usize], seed: u64) -> Tensor {
    let r = &mut stream(seed, Stream::Synthetic);
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn kernels(c: &mut Criterion) {
    let (a, b) = (random(&[64, 64], 1), random(&[64, 64], 2));
    c.bench_function("matmul 64x64", |bench| bench.iter(|| a.matmul(&b).unwrap()));

    let cell = GruCell {
        input_dim: POSE_DIM,
        hidden: HIDDEN,
    };
    let params = ParamSet::init(&cell.specs("g"), &mut stream(0, Stream::PolicyInit)).unwrap();
    let (x, h) = (random(&[BATCH, POSE_DIM], 3), random(&[BATCH, HIDDEN], 4));
    c.bench_function("gru step forward and backward", |bench| {
        bench.iter(|| {
            let tape = Tape::new(Precision::Test);
            let p = params.bind(&tape);
            let out = cell
                .step(&p, &tape.constant(x.clone()), &tape.constant(h.clone()))
                .unwrap();
            posegail::autodiff::gradient_values(&out.sum().unwrap(), &p).unwrap()
        })
    });
}

fn training_steps(c: &mut Criterion) {
    let data = dataset().unwrap();
    let ep = episode();
    let mut group = c.benchmark_group("desk scale");
    group.sample_size(10);

    for precision in [Precision::Test, Precision::Train] {
        let mut model = policy().unwrap();
        let mut bc = BcTrainer::new(&model, ep, BcConfig::default(), precision).unwrap();
        let trajectories: Vec<Frames> = (0..BATCH)
            .map(|i| data.window((i % data.len(), i), ep.span()).unwrap())
            .collect();
        let refs: Vec<&Frames> = trajectories.iter().collect();
        group.bench_function(format!("bc step {}", precision.name()), |bench| {
            bench.iter(|| bc.step_on(&mut model, &refs).unwrap())
        });
    }

    let mut model = policy().unwrap();
    let mut scorer = critic().unwrap();
    let config = GailConfig {
        critic_adam: AdamConfig::with_lr(1e-4),
        generator_adam: AdamConfig::with_lr(1e-5),
        ..Default::default()
    };
    let mut trainer = WgailTrainer::new(&model, &scorer, ep, config, Precision::Test).unwrap();
    let batch = trainer.sample_critic_batch(&data, &model).unwrap();
    group.bench_function("critic step", |bench| {
        bench.iter(|| trainer.d_step(&mut scorer, &batch).unwrap())
    });
    let (_, expert) = trainer.sample_generator_batch(&data).unwrap();
    group.bench_function("generator step", |bench| {
        bench.iter(|| trainer.g_step(&mut model, &scorer, &expert).unwrap())
    });
    group.finish();
}

criterion_group!(benches, kernels, training_steps);
criterion_main!(benches);
