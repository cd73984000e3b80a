//! Finite-difference checks of every primitive and both networks in 64-bit mode.

use posegail::autodiff::check::check_gradient;
use posegail::autodiff::uniform_init;
use posegail::nn::{
    policy_forward, CriticConfig, CriticModel, DecoderFeed, GruCell, LstmCell, LstmCritic,
    ParamSet, PolicyConfig, PolicyModel, Seq2SeqPolicy,
};
use posegail::{Result, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-4;
const STEP: f64 = 1e-5;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rand_tensor(shape: &[usize], r: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Entries bounded away from zero, for kinks and poles.
fn away_from_zero(shape: &[usize], r: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v: f64 = r.gen_range(0.2..1.2);
            if r.gen::<bool>() {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

/// Contracts a node with fixed weights into a scalar so that every output
/// entry carries a distinct adjoint.
fn contract(y: &Var, seed: u64) -> Result<Var> {
    let weights = rand_tensor(&y.shape(), &mut rng(seed));
    y.mul(&y.tape().constant(weights))?.sum()
}

fn assert_grad<F>(name: &str, f: F, inputs: &[Tensor])
where
    F: Fn(&[Var]) -> Result<Var>,
{
    let err = check_gradient(|v| contract(&f(v)?, 99), inputs, STEP).unwrap();
    assert!(err < TOL, "{name}: relative error {err:e}");
}

#[test]
fn binary_elementwise() {
    let r = &mut rng(1);
    let (a, b) = (rand_tensor(&[3, 4], r), rand_tensor(&[3, 4], r));
    assert_grad("add", |v| v[0].add(&v[1]), &[a.clone(), b.clone()]);
    assert_grad("sub", |v| v[0].sub(&v[1]), &[a.clone(), b.clone()]);
    assert_grad("mul", |v| v[0].mul(&v[1]), &[a, b]);
}

#[test]
fn scalar_ops() {
    let x = rand_tensor(&[2, 5], &mut rng(2));
    assert_grad("scale", |v| v[0].scale(-1.7), std::slice::from_ref(&x));
    assert_grad(
        "add_scalar",
        |v| v[0].add_scalar(0.3),
        std::slice::from_ref(&x),
    );
    assert_grad("neg", |v| v[0].neg(), &[x]);
}

#[test]
fn matmul_and_transpose() {
    let r = &mut rng(3);
    let (a, b) = (rand_tensor(&[3, 4], r), rand_tensor(&[4, 2], r));
    assert_grad("matmul", |v| v[0].matmul(&v[1]), &[a.clone(), b]);
    assert_grad("transpose", |v| v[0].t(), &[a]);
}

#[test]
fn activations() {
    let r = &mut rng(4);
    let x = rand_tensor(&[4, 3], r).map(|v| 3.0 * v);
    assert_grad("sigmoid", |v| v[0].sigmoid(), std::slice::from_ref(&x));
    assert_grad("tanh", |v| v[0].tanh(), &[x]);
    let y = away_from_zero(&[4, 3], r);
    assert_grad("leaky_relu", |v| v[0].leaky_relu(0.2), &[y]);
}

#[test]
fn concat_and_slice() {
    let r = &mut rng(5);
    let (a, b) = (rand_tensor(&[2, 3], r), rand_tensor(&[2, 2], r));
    assert_grad(
        "concat axis 1",
        |v| Var::concat(&[v[0].clone(), v[1].clone()], 1),
        &[a.clone(), b],
    );
    let c = rand_tensor(&[1, 3], r);
    assert_grad(
        "concat axis 0",
        |v| Var::concat(&[v[0].clone(), v[1].clone()], 0),
        &[a.clone(), c],
    );
    assert_grad(
        "slice axis 1",
        |v| v[0].slice(1, 1, 2),
        std::slice::from_ref(&a),
    );
    assert_grad("slice axis 0", |v| v[0].slice(0, 1, 1), &[a]);
}

#[test]
fn reductions_and_broadcasts() {
    let r = &mut rng(6);
    let x = rand_tensor(&[3, 4], r);
    assert_grad("sum", |v| v[0].sum(), std::slice::from_ref(&x));
    assert_grad("mean", |v| v[0].mean(), std::slice::from_ref(&x));
    assert_grad(
        "sum_to rows",
        |v| v[0].sum_to(&[1, 4]),
        std::slice::from_ref(&x),
    );
    assert_grad("sum_to cols", |v| v[0].sum_to(&[3, 1]), &[x]);
    let b = rand_tensor(&[1, 4], r);
    assert_grad(
        "broadcast_to",
        |v| v[0].broadcast_to(&[3, 4]),
        std::slice::from_ref(&b),
    );
    let x = rand_tensor(&[3, 4], r);
    assert_grad("add_bias", |v| v[0].add_bias(&v[1]), &[x, b]);
}

#[test]
fn powers_reciprocal_and_norms() {
    let r = &mut rng(7);
    let x = away_from_zero(&[3, 3], r);
    for p in [1.0, 1.5, 2.0, 6.0] {
        assert_grad(
            &format!("pow_abs {p}"),
            |v| v[0].pow_abs(p),
            std::slice::from_ref(&x),
        );
    }
    assert_grad("recip", |v| v[0].recip(), std::slice::from_ref(&x));
    assert_grad(
        "l2_norm all",
        |v| v[0].l2_norm(None),
        std::slice::from_ref(&x),
    );
    assert_grad(
        "l2_norm rows",
        |v| v[0].l2_norm(Some(1)),
        std::slice::from_ref(&x),
    );
    assert_grad("l2_norm cols", |v| v[0].l2_norm(Some(0)), &[x]);
}

fn cell_params(specs: &[posegail::nn::ParamSpec], seed: u64) -> Vec<Tensor> {
    ParamSet::init(specs, &mut rng(seed))
        .unwrap()
        .tensors()
        .to_vec()
}

#[test]
fn gru_cell() {
    let cell = GruCell {
        input_dim: 3,
        hidden: 5,
    };
    let r = &mut rng(8);
    let mut inputs = cell_params(&cell.specs("g"), 9);
    inputs.push(rand_tensor(&[2, 3], r));
    inputs.push(rand_tensor(&[2, 5], r));
    assert_grad(
        "gru step",
        |v| {
            let n = v.len();
            cell.step(&v[..n - 2], &v[n - 2], &v[n - 1])
        },
        &inputs,
    );
}

#[test]
fn lstm_cell() {
    let cell = LstmCell {
        input_dim: 4,
        hidden: 3,
    };
    let r = &mut rng(10);
    let mut inputs = cell_params(&cell.specs("l"), 11);
    for shape in [[2, 4], [2, 3], [2, 3]] {
        inputs.push(rand_tensor(&shape, r));
    }
    assert_grad(
        "lstm step",
        |v| {
            let n = v.len();
            let (h, c) = cell.step(&v[..n - 3], &v[n - 3], &v[n - 2], &v[n - 1])?;
            Var::concat(&[h, c], 1)
        },
        &inputs,
    );
}

#[test]
fn full_policy_network() {
    let r = &mut rng(12);
    for (feed, residual) in [
        (DecoderFeed::Autoregressive, false),
        (DecoderFeed::Autoregressive, true),
        (DecoderFeed::GroundTruthDuringBc, false),
    ] {
        let config = PolicyConfig {
            decoder_feed: feed,
            residual_output: residual,
            ..PolicyConfig::new(3, 8)
        };
        let policy = Seq2SeqPolicy::new(config, r).unwrap();
        let n_params = policy.params().len();
        let mut inputs = policy.params().tensors().to_vec();
        // three observed frames, then a window of three
        for _ in 0..3 {
            inputs.push(rand_tensor(&[2, 3], r));
        }
        assert_grad(
            "policy",
            |v| {
                let frames = policy_forward(&policy, &v[..n_params], &v[n_params..], 3)?;
                Var::concat(&frames, 1)
            },
            &inputs,
        );
    }
}

#[test]
fn full_critic_network() {
    let r = &mut rng(13);
    let config = CriticConfig {
        widths: vec![6, 4, 1],
        ..CriticConfig::new(4, 8)
    };
    let critic = LstmCritic::new(config, r).unwrap();
    let n_params = critic.params().len();
    let mut inputs = critic.params().tensors().to_vec();
    // state of four frames, action of two
    for _ in 0..6 {
        inputs.push(rand_tensor(&[2, 4], r));
    }
    let err = check_gradient(
        |v| {
            let w = &v[..n_params];
            critic
                .score(w, &v[n_params..n_params + 4], &v[n_params + 4..])?
                .sum()
        },
        &inputs,
        STEP,
    )
    .unwrap();
    assert!(err < TOL, "critic: relative error {err:e}");
}

#[test]
fn uniform_init_respects_fan_in() {
    let t = uniform_init(&[50, 4], 16, &mut rng(14)).unwrap();
    assert!(t.data().iter().all(|v| v.abs() <= 0.25));
}
