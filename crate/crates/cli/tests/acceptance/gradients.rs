//! Analytic gradients against central differences with `h = 1e-5`.
//!
//! Each instance draws fresh shapes, inputs, parameters and a random linear
//! read-out `L = Σ w·y`. The error of an instance is
//! `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)` over every checked
//! coordinate.

use spkadapt::features::{FEATURE_DIM, WINDOW};
use spkadapt::layers::{softmax_xent_indices, BatchNorm, Blstm, Dense, Params, Relu};
use spkadapt::model::{ModelBundle, ModelConfig, Variant};
use spkadapt::train::{domain_backward, domain_loss, gradients, speaker_backward, speaker_loss, DomainObjective};
use spkadapt::{Domain, RngState, Speaker, Tensor};

use crate::Outcome;

const H: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;
const INSTANCES: u64 = 20;
/// Parameter coordinates sampled per instance on the assembled paths.
const PATH_COORDS: usize = 400;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale == 0.0 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

fn central(mut f: impl FnMut(f64) -> f64, x: f64) -> f64 {
    (f(x + H) - f(x - H)) / (2.0 * H)
}

fn random_tensor(shape: &[usize], scale: f64, rng: &mut RngState) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| scale * rng.normal::<f64>()).collect()).unwrap()
}

fn dot(a: &Tensor<f64>, w: &[f64]) -> f64 {
    a.data().iter().zip(w).map(|(x, y)| x * y).sum()
}

/// Numeric gradient of `loss` with respect to every entry of `x`.
fn numeric_input(x: &Tensor<f64>, mut loss: impl FnMut(&Tensor<f64>) -> f64) -> Vec<f64> {
    let mut probe = x.clone();
    (0..x.len())
        .map(|i| {
            let orig = probe.data()[i];
            central(
                |v| {
                    probe.data_mut()[i] = v;
                    let l = loss(&probe);
                    probe.data_mut()[i] = orig;
                    l
                },
                orig,
            )
        })
        .collect()
}

/// Numeric gradient with respect to every parameter coordinate of a layer.
fn numeric_params<L: Params<f64>>(layer: &mut L, mut loss: impl FnMut(&mut L) -> f64) -> Vec<f64> {
    let sizes: Vec<usize> = layer.params().iter().map(|p| p.len()).collect();
    let mut out = Vec::new();
    for (pi, &n) in sizes.iter().enumerate() {
        for i in 0..n {
            let orig = layer.params()[pi].data()[i];
            let mut eval = |v: f64| {
                layer.params_mut()[pi].data_mut()[i] = v;
                let l = loss(layer);
                layer.params_mut()[pi].data_mut()[i] = orig;
                l
            };
            out.push((eval(orig + H) - eval(orig - H)) / (2.0 * H));
        }
    }
    out
}

fn flat_grads<L: Params<f64>>(layer: &L) -> Vec<f64> {
    gradients(layer.params()).concat()
}

fn dense_instance(seed: u64) -> f64 {
    let mut rng = RngState::new(seed);
    let (n, i, o) = (2 + rng.index(4), 2 + rng.index(6), 1 + rng.index(5));
    let mut layer = Dense::<f64>::new(i, o, &mut rng).unwrap();
    for p in layer.params_mut() {
        p.data_mut().iter_mut().for_each(|v| *v += 0.3 * rng.normal::<f64>());
    }
    let x = random_tensor(&[n, i], 1.0, &mut rng);
    let w: Vec<f64> = (0..n * o).map(|_| rng.normal()).collect();
    layer.zero_grads();
    let y = layer.forward(&x).unwrap();
    let dx = layer.backward(&Tensor::new(y.shape(), w.clone()).unwrap()).unwrap();
    let mut analytic = dx.data().to_vec();
    analytic.extend(flat_grads(&layer));
    let mut numeric = numeric_input(&x, |x| dot(&layer.infer(x).unwrap(), &w));
    numeric.extend(numeric_params(&mut layer, |l| dot(&l.infer(&x).unwrap(), &w)));
    rel_error(&analytic, &numeric)
}

fn relu_instance(seed: u64) -> f64 {
    let mut rng = RngState::new(seed);
    let (n, d) = (1 + rng.index(5), 1 + rng.index(8));
    // keep inputs away from the kink so the difference quotient is defined
    let data: Vec<f64> = (0..n * d)
        .map(|_| {
            let v: f64 = rng.uniform_in(0.01, 2.0);
            if rng.bernoulli(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    let x = Tensor::new(&[n, d], data).unwrap();
    let w: Vec<f64> = (0..n * d).map(|_| rng.normal()).collect();
    let mut layer = Relu::<f64>::new();
    layer.forward(&x);
    let analytic = layer.backward(&Tensor::new(&[n, d], w.clone()).unwrap()).unwrap();
    let numeric = numeric_input(&x, |x| dot(&Relu::new().forward(x), &w));
    rel_error(analytic.data(), &numeric)
}

fn batchnorm_instance(seed: u64) -> f64 {
    let mut rng = RngState::new(seed);
    let (n, d) = (3 + rng.index(5), 1 + rng.index(5));
    let mut layer = BatchNorm::<f64>::new(d);
    for p in layer.params_mut() {
        p.data_mut().iter_mut().for_each(|v| *v += 0.5 * rng.normal::<f64>());
    }
    let x = random_tensor(&[n, d], 2.0, &mut rng);
    let w: Vec<f64> = (0..n * d).map(|_| rng.normal()).collect();
    layer.zero_grads();
    layer.forward(&x).unwrap();
    let dx = layer.backward(&Tensor::new(&[n, d], w.clone()).unwrap()).unwrap();
    let mut analytic = dx.data().to_vec();
    analytic.extend(flat_grads(&layer));
    // training-mode output depends on the batch statistics, so every probe
    // runs a full forward pass on a scratch copy
    let mut numeric = numeric_input(&x, |x| dot(&layer.clone().forward(x).unwrap(), &w));
    numeric.extend(numeric_params(&mut layer, |l| dot(&l.clone().forward(&x).unwrap(), &w)));
    rel_error(&analytic, &numeric)
}

fn blstm_instance(seed: u64) -> f64 {
    let mut rng = RngState::new(seed);
    let (n, t, d, h) = (1 + rng.index(3), 2 + rng.index(6), 1 + rng.index(4), 1 + rng.index(4));
    let mut layer = Blstm::<f64>::new(d, h, &mut rng).unwrap();
    for p in layer.params_mut() {
        p.data_mut().iter_mut().for_each(|v| *v += 0.2 * rng.normal::<f64>());
    }
    let x = random_tensor(&[n, t, d], 1.0, &mut rng);
    let w: Vec<f64> = (0..n * 2 * h).map(|_| rng.normal()).collect();
    layer.zero_grads();
    layer.forward(&x).unwrap();
    let dx = layer.backward(&Tensor::new(&[n, 2 * h], w.clone()).unwrap()).unwrap();
    let mut analytic = dx.data().to_vec();
    analytic.extend(flat_grads(&layer));
    let mut numeric = numeric_input(&x, |x| dot(&layer.infer(x).unwrap(), &w));
    numeric.extend(numeric_params(&mut layer, |l| dot(&l.infer(&x).unwrap(), &w)));
    rel_error(&analytic, &numeric)
}

fn xent_instance(seed: u64) -> f64 {
    let mut rng = RngState::new(seed);
    let (n, k) = (1 + rng.index(6), 2 + rng.index(3));
    let logits = random_tensor(&[n, k], 3.0, &mut rng);
    let labels: Vec<usize> = (0..n).map(|_| rng.index(k)).collect();
    let (_, analytic) = softmax_xent_indices(&logits, &labels).unwrap();
    let numeric = numeric_input(&logits, |z| softmax_xent_indices(z, &labels).unwrap().0);
    rel_error(analytic.data(), &numeric)
}

/// Small bundle with dropout off and every weight (heads included) randomized,
/// so that gradients reach the generator.
fn path_bundle(seed: u64, rng: &mut RngState) -> ModelBundle<f64> {
    let config = ModelConfig {
        hidden: 2 + rng.index(3),
        dropout: 0.0,
        variant: Variant::Gr,
        ..ModelConfig::default()
    };
    let mut b = ModelBundle::new(config, &mut RngState::new(seed)).unwrap();
    for p in b
        .generator
        .params_mut()
        .into_iter()
        .chain(b.classifier.params_mut())
        .chain(b.discriminator.params_mut())
    {
        p.data_mut().iter_mut().for_each(|v| *v += 0.1 * rng.normal::<f64>());
    }
    b
}

fn windows(n: usize, rng: &mut RngState) -> Tensor<f64> {
    random_tensor(&[n, WINDOW, FEATURE_DIM], 1.0, rng)
}

/// Every (network, tensor, coordinate) triple over the given networks.
fn all_coords(sizes: &[Vec<usize>]) -> Vec<(usize, usize, usize)> {
    sizes
        .iter()
        .enumerate()
        .flat_map(|(net, ts)| ts.iter().enumerate().flat_map(move |(ti, &n)| (0..n).map(move |i| (net, ti, i))))
        .collect()
}

/// Sign pattern of every ReLU input on the path, from the last forward.
fn relu_pattern(b: &ModelBundle<f64>, path: Path) -> Vec<bool> {
    let head = match path {
        Path::Speaker => &b.classifier,
        Path::Domain => &b.discriminator,
    };
    b.generator
        .mlp
        .blocks
        .iter()
        .chain(&head.blocks)
        .flat_map(|blk| blk.pre_activation().expect("forward ran").data().iter().map(|&v| v > 0.0))
        .collect()
}

#[derive(Clone, Copy)]
enum Path {
    Speaker,
    Domain,
}

fn param_mut(b: &mut ModelBundle<f64>, path: Path, net: usize, t: usize) -> &mut Tensor<f64> {
    let mut list = match (path, net) {
        (_, 0) => b.generator.params_mut(),
        (Path::Speaker, _) => b.classifier.params_mut(),
        (Path::Domain, _) => b.discriminator.params_mut(),
    };
    list.swap_remove(t)
}

/// Coordinates whose `±h` probes put some ReLU input on opposite sides of
/// zero are redrawn: the loss is not differentiable on that interval. Returns
/// the error and the number of redraws.
fn path_instance(path: Path, seed: u64) -> (f64, usize) {
    let mut rng = RngState::new(seed);
    let mut bundle = path_bundle(seed, &mut rng);
    let n = 3 + rng.index(3);
    let x = windows(n, &mut rng);
    let speakers: Vec<Speaker> = (0..n).map(|i| Speaker::from_index(i % 2).unwrap()).collect();
    let domains: Vec<Domain> = (0..n).map(|i| if i < n / 2 { Domain::Source } else { Domain::Target }).collect();
    let fwd = RngState::new(0);

    let (g_grads, head_grads, head_sizes) = match path {
        Path::Speaker => {
            speaker_backward(&mut bundle, &x, &speakers, &mut fwd.clone()).unwrap();
            let sizes = bundle.classifier.params().iter().map(|p| p.len()).collect::<Vec<_>>();
            (gradients(bundle.generator.params()), gradients(bundle.classifier.params()), sizes)
        }
        Path::Domain => {
            domain_backward(&mut bundle, &x, &domains, DomainObjective::TrueLabels, true, &mut fwd.clone()).unwrap();
            let sizes = bundle.discriminator.params().iter().map(|p| p.len()).collect::<Vec<_>>();
            (gradients(bundle.generator.params()), gradients(bundle.discriminator.params()), sizes)
        }
    };
    let g_sizes: Vec<usize> = bundle.generator.params().iter().map(|p| p.len()).collect();
    let coords = all_coords(&[g_sizes, head_sizes]);

    let loss = |b: &mut ModelBundle<f64>| match path {
        Path::Speaker => speaker_loss(b, &x, &speakers, &mut fwd.clone()).unwrap(),
        Path::Domain => domain_loss(b, &x, &domains, DomainObjective::TrueLabels, &mut fwd.clone()).unwrap(),
    };
    let mut analytic = Vec::with_capacity(PATH_COORDS);
    let mut numeric = Vec::with_capacity(PATH_COORDS);
    let mut redrawn = 0;
    while analytic.len() < PATH_COORDS {
        let (net, t, i) = coords[rng.index(coords.len())];
        let orig = param_mut(&mut bundle, path, net, t).data()[i];
        let mut eval = |v: f64| {
            param_mut(&mut bundle, path, net, t).data_mut()[i] = v;
            let l = loss(&mut bundle);
            let pattern = relu_pattern(&bundle, path);
            param_mut(&mut bundle, path, net, t).data_mut()[i] = orig;
            (l, pattern)
        };
        let (plus, plus_pattern) = eval(orig + H);
        let (minus, minus_pattern) = eval(orig - H);
        if plus_pattern != minus_pattern {
            redrawn += 1;
            continue;
        }
        analytic.push(if net == 0 { g_grads[t][i] } else { head_grads[t][i] });
        numeric.push((plus - minus) / (2.0 * H));
    }
    (rel_error(&analytic, &numeric), redrawn)
}

pub fn criterion() -> Outcome {
    let layer = |f: fn(u64) -> f64| -> Box<dyn Fn(u64) -> (f64, usize)> { Box::new(move |s| (f(s), 0)) };
    let suites: Vec<(&str, Box<dyn Fn(u64) -> (f64, usize)>)> = vec![
        ("dense", layer(dense_instance)),
        ("relu", layer(relu_instance)),
        ("batchnorm", layer(batchnorm_instance)),
        ("blstm", layer(blstm_instance)),
        ("softmax-xent", layer(xent_instance)),
        ("G->C", Box::new(|s| path_instance(Path::Speaker, s))),
        ("G->D->loss", Box::new(|s| path_instance(Path::Domain, s))),
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    let mut redrawn = 0;
    for (name, run) in suites {
        let mut worst = 0.0f64;
        for i in 0..INSTANCES {
            let (err, r) = run(1000 + i);
            worst = worst.max(err);
            redrawn += r;
        }
        passed &= worst < TOLERANCE;
        parts.push(format!("{} {:.1e}", name, worst));
    }
    Outcome::new(
        passed,
        format!(
            "worst relative error over {} instances each: {} ({} path coordinates redrawn for a ReLU kink inside ±h)",
            INSTANCES,
            parts.join(", "),
            redrawn
        ),
    )
}
