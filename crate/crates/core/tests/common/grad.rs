//! Finite-difference error measures, shared by the gradient tests and the
//! acceptance run. Errors are norm-wise: `||analytic - numeric|| / ||numeric||`.

use super::{numeric_grad, probe, random_tensor, rel_err, rng};
use rand::seq::SliceRandom;
use rand::Rng;
use twinbranch::networks::{ConvNet, LayerSpec, Parameterized};
use twinbranch::tensor::{GradTape, Var};
use twinbranch::Tensor;

pub const TOL: f64 = 1e-3;
pub const EPS: f32 = 1e-2;

/// Values spaced at least 0.1 apart and at least 0.05 from zero, so no
/// max or ReLU decision flips under an `EPS` perturbation.
pub fn kink_free(r: &mut impl Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    let mut v: Vec<f32> = (0..n)
        .map(|i| (i as f32 - n as f32 / 2.0) * 0.1 + 0.05)
        .collect();
    v.shuffle(r);
    Tensor::new(shape.to_vec(), v).unwrap()
}

/// Records `build(x_leaf)` on a fresh tape, backpropagates a random probe,
/// and compares the gradient for `x` against central differences.
pub fn unary_error(x: &Tensor, seed: u64, build: impl Fn(&mut GradTape, Var) -> Var) -> f64 {
    let mut tape = GradTape::new();
    let v = tape.leaf(x.clone(), true);
    let y = build(&mut tape, v);
    let r = random_tensor(&mut rng(seed), tape.value(y).shape());
    let g = tape.backward(y, r.clone()).unwrap();
    let analytic = g.get(v).cloned().unwrap();
    let numeric = numeric_grad(x.data(), EPS, |p| {
        let mut t = GradTape::new();
        let v = t.leaf(Tensor::new(x.shape().to_vec(), p.to_vec()).unwrap(), true);
        let y = build(&mut t, v);
        probe(t.value(y), r.data())
    });
    rel_err(analytic.data(), &numeric)
}

/// Perturbs every parameter of `model` in turn and compares the gradient of
/// `probe(response)` against the tape.
pub fn param_error<P: Parameterized + Clone>(
    model: &P,
    eps: f32,
    run: impl Fn(&P, &mut GradTape) -> (Var, Vec<Var>),
) -> f64 {
    let mut tape = GradTape::new();
    let (y, vars) = run(model, &mut tape);
    let r = random_tensor(&mut rng(99), tape.value(y).shape());
    let g = tape.backward(y, r.clone()).unwrap();
    let analytic: Vec<f32> = vars
        .iter()
        .flat_map(|&v| {
            g.get(v)
                .map_or_else(|| vec![0.0; tape.value(v).numel()], |t| t.data().to_vec())
        })
        .collect();
    let flat: Vec<f32> = model.snapshot().concat();
    let numeric = numeric_grad(&flat, eps, |p| {
        let mut m = model.clone();
        let mut off = 0;
        m.visit_params_mut(&mut |_, d| {
            d.copy_from_slice(&p[off..off + d.len()]);
            off += d.len();
        });
        let mut t = GradTape::new();
        let (y, _) = run(&m, &mut t);
        probe(t.value(y), r.data())
    });
    rel_err(&analytic, &numeric)
}

/// f64 reference of the weighted logistic loss.
pub fn logistic_ref(h: &[f32], y: &[f32], w: &[f32]) -> f64 {
    h.iter()
        .zip(y)
        .zip(w)
        .map(|((&h, &y), &w)| w as f64 * (1.0 + (-(y as f64) * h as f64).exp()).ln())
        .sum()
}

/// A three-layer A-Net-shaped stack small enough to perturb exhaustively.
pub fn mini_anet() -> ConvNet {
    let specs = vec![
        LayerSpec::Conv {
            name: "conv1".into(),
            kernel: 3,
            stride: 2,
            out_channels: 3,
            relu: true,
        },
        LayerSpec::MaxPool {
            kernel: 2,
            stride: 1,
        },
        LayerSpec::Conv {
            name: "conv2".into(),
            kernel: 2,
            stride: 1,
            out_channels: 4,
            relu: false,
        },
    ];
    ConvNet::init(&specs, 3, &mut rng(21))
}
