//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::sync::OnceLock;

use num_complex::Complex64;
use pixforge::autograd::{Tape, Tensor, Var};
use pixforge::image::{Image, RealImage};
use pixforge::nn::{synthetic, train, Dataset, Layer, Metrics, Network, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: Vec<usize>, rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Entries at least `gap` away from zero, so kinks at 0 stay out of reach
/// of the finite-difference stencil.
pub fn away_from_zero(shape: Vec<usize>, gap: f64, rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v: f64 = rng.gen_range(gap..1.0);
            if rng.gen_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

/// Entries in random order from a grid with spacing `1 / n`, so maxima are
/// unique by a wide margin.
pub fn distinct_tensor(shape: Vec<usize>, rng: &mut impl Rng) -> Tensor {
    use rand::seq::SliceRandom;
    let n: usize = shape.iter().product();
    let mut data: Vec<f64> = (0..n).map(|i| i as f64 / n as f64 - 0.5).collect();
    data.shuffle(rng);
    Tensor::new(shape, data).unwrap()
}

pub const FD_STEP: f64 = 1e-5;

/// `||a - b|| / max(||a|| + ||b||, 1e-12)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / (na + nb).max(1e-12)
}

/// Largest relative error between reverse-mode gradients of the scalar `f`
/// and central differences, over all inputs.
pub fn grad_check<F>(inputs: &[Tensor], f: F) -> f64
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    let eval = |ts: &[Tensor]| {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = ts.iter().map(|t| tape.param(t)).collect();
        f(&tape, &vars).item()
    };
    let tape = Tape::new();
    let vars: Vec<Var<'_>> = inputs.iter().map(|t| tape.param(t)).collect();
    let out = f(&tape, &vars);
    assert_eq!(out.numel(), 1, "objective must be scalar");
    out.backward().unwrap();

    let mut worst: f64 = 0.0;
    for (k, v) in vars.iter().enumerate() {
        let analytic = v.grad();
        let numeric: Vec<f64> = (0..analytic.len())
            .map(|i| {
                let mut probe = inputs.to_vec();
                probe[k].data_mut()[i] += FD_STEP;
                let up = eval(&probe);
                probe[k].data_mut()[i] -= 2.0 * FD_STEP;
                let down = eval(&probe);
                (up - down) / (2.0 * FD_STEP)
            })
            .collect();
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    worst
}

/// Scalarizes a tensor output by a fixed random weighting, so every output
/// entry influences the checked gradient differently.
pub fn weighted_sum<'t>(tape: &'t Tape, v: Var<'t>, seed: u64) -> Var<'t> {
    let mut r = rng(seed ^ 0x5eed);
    let w: Vec<f64> = (0..v.numel()).map(|_| r.gen_range(-1.0..1.0)).collect();
    v.mul(tape.constant(v.shape(), w).unwrap()).unwrap().sum()
}

/// Literal double sum over all pixels for every frequency, with the
/// symmetric `1 / sqrt(MN)` scaling and twiddles from `f64` angles.
pub fn dft_quadruple_loop(img: &RealImage) -> Vec<Complex64> {
    let (m, n) = (img.width(), img.height());
    let scale = 1.0 / ((m * n) as f64).sqrt();
    let mut out = vec![Complex64::new(0.0, 0.0); m * n];
    for v in 0..n {
        for u in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for y in 0..n {
                for x in 0..m {
                    let angle = -2.0 * std::f64::consts::PI * ((u * x) as f64 / m as f64 + (v * y) as f64 / n as f64);
                    acc += img.get(x, y) * Complex64::from_polar(1.0, angle);
                }
            }
            out[v * m + u] = acc * scale;
        }
    }
    out
}

pub fn random_plane(w: usize, h: usize, seed: u64) -> RealImage {
    let mut r = rng(seed);
    RealImage::from_fn(w, h, |_, _| r.gen_range(-1.0..1.0))
}

/// Cross-correlation with valid padding, one sample, written as plainly as
/// possible: `out[o][i][j] = b[o] + sum_c,p,q w[o][c][p][q] x[c][i*s+p][j*s+q]`.
pub fn conv_oracle(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize) -> Vec<f64> {
    let [c_in, h, wd] = x.shape()[..] else { panic!("rank") };
    let [c_out, _, kh, kw] = w.shape()[..] else { panic!("rank") };
    let (oh, ow) = ((h - kh) / stride + 1, (wd - kw) / stride + 1);
    let xs = |c: usize, y: usize, xx: usize| x.data()[(c * h + y) * wd + xx];
    let ws = |o: usize, c: usize, p: usize, q: usize| w.data()[((o * c_in + c) * kh + p) * kw + q];
    let mut out = Vec::new();
    for o in 0..c_out {
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = b.data()[o];
                for c in 0..c_in {
                    for p in 0..kh {
                        for q in 0..kw {
                            acc += ws(o, c, p, q) * xs(c, i * stride + p, j * stride + q);
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

/// The 5x5 source image of the worked convolution example.
pub fn table_one() -> RealImage {
    RealImage::from_rows(&[
        vec![3.0, 1.0, 7.0, 2.0, 1.0],
        vec![2.0, 1.0, 7.0, 2.0, 4.0],
        vec![5.0, 9.0, 6.0, 6.0, 7.0],
        vec![2.0, 1.0, 5.0, 7.0, 1.0],
        vec![3.0, 4.0, 1.0, 7.0, 3.0],
    ])
    .unwrap()
}

/// 32x32 black image with a white 12x12 square whose pixels span 10..=21.
pub fn square_fixture() -> Image {
    Image::from_fn(32, 32, |x, y| if (10..22).contains(&x) && (10..22).contains(&y) { 255 } else { 0 }).unwrap()
}

pub const SQUARE_VERTICES: [(f64, f64); 4] = [(10.0, 10.0), (21.0, 10.0), (10.0, 21.0), (21.0, 21.0)];

pub fn shapes_config() -> TrainConfig {
    TrainConfig { lr: 0.05, epochs: 30, batch_size: 16, test_fraction: 0.2, seed: 7 }
}

pub struct Trained {
    pub net: Network,
    pub metrics: Metrics,
    pub train: Dataset,
    pub test: Dataset,
    pub seconds: f64,
}

/// Small CNN trained once per test binary on 500 generated 16x16 images.
pub fn trained() -> &'static Trained {
    static MODEL: OnceLock<Trained> = OnceLock::new();
    MODEL.get_or_init(|| {
        let ds = synthetic::shapes_dataset(500, 16, 7).unwrap();
        let mut net = Network::small_cnn(1, 16, 16, 2, 7).unwrap();
        let start = std::time::Instant::now();
        let (metrics, train_set, test) = train(&mut net, &ds, &shapes_config()).unwrap();
        Trained { net, metrics, train: train_set, test, seconds: start.elapsed().as_secs_f64() }
    })
}

/// Per-pixel bilinear blend solved from `v = a x + b y + c x y + d` through
/// the four neighbours, evaluated directly.
pub fn bilinear_coefficient_form(img: &RealImage, x: f64, y: f64) -> f64 {
    let x0 = (x.floor() as usize).min(img.width() - 2);
    let y0 = (y.floor() as usize).min(img.height() - 2);
    let (x1, y1) = (x0 as f64 + 1.0, y0 as f64 + 1.0);
    let (x0f, y0f) = (x0 as f64, y0 as f64);
    let (f00, f10, f01, f11) = (
        img.get(x0, y0),
        img.get(x0 + 1, y0),
        img.get(x0, y0 + 1),
        img.get(x0 + 1, y0 + 1),
    );
    // Solve the 4x4 system [x y xy 1] [a b c d]^T = f at the four corners.
    let rows = [
        [x0f, y0f, x0f * y0f, 1.0, f00],
        [x1, y0f, x1 * y0f, 1.0, f10],
        [x0f, y1, x0f * y1, 1.0, f01],
        [x1, y1, x1 * y1, 1.0, f11],
    ];
    let coef = solve4(rows);
    coef[0] * x + coef[1] * y + coef[2] * x * y + coef[3]
}

/// Gaussian elimination with partial pivoting on an augmented 4x5 matrix.
fn solve4(mut m: [[f64; 5]; 4]) -> [f64; 4] {
    for col in 0..4 {
        let piv = (col..4).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
        m.swap(col, piv);
        let pivot_row = m[col];
        for (r, row) in m.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot_row[col];
                for (v, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *v -= f * p;
                }
            }
        }
    }
    [m[0][4] / m[0][0], m[1][4] / m[1][1], m[2][4] / m[2][2], m[3][4] / m[3][3]]
}

/// Whether every ReLU input is clear of zero and every pooling window has a
/// unique maximum, both by more than the finite-difference reach.
pub fn smooth_point(net: &Network, x: &Tensor) -> bool {
    const MARGIN: f64 = 1e-3;
    let tape = Tape::new();
    let fwd = net.forward(&tape, tape.param(x)).unwrap();
    for (i, layer) in net.layers.iter().enumerate() {
        let input = if i == 0 { x.clone() } else { fwd.activations[i - 1].to_tensor() };
        match layer {
            Layer::Relu => {
                if input.data().iter().any(|v| v.abs() < MARGIN) {
                    return false;
                }
            }
            Layer::MaxPool { window, stride } => {
                let shape = input.shape();
                let (h, w) = (shape[shape.len() - 2], shape[shape.len() - 1]);
                for plane in input.data().chunks_exact(h * w) {
                    for i0 in (0..=h - window).step_by(*stride) {
                        for j0 in (0..=w - window).step_by(*stride) {
                            let mut vals: Vec<f64> = (0..*window)
                                .flat_map(|p| (0..*window).map(move |q| (p, q)))
                                .map(|(p, q)| plane[(i0 + p) * w + j0 + q])
                                .collect();
                            vals.sort_by(|a, b| b.total_cmp(a));
                            // Exact zeros from a preceding ReLU are locally constant.
                            let flat_zeros = vals[0] == 0.0 && vals[1] == 0.0;
                            if vals[0] - vals[1] < MARGIN && !flat_zeros {
                                return false;
                            }
                        }
                    }
                }
            }
            _ => {}
        }
    }
    true
}

/// Gradient of a network loss with respect to the input batch and every
/// parameter tensor, against central differences on a cloned network.
pub fn network_check(net: &Network, input_shape: Vec<usize>, labels: Vec<usize>, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut x = distinct_tensor(input_shape.clone(), &mut r);
    // Finite differences are meaningless at kinks; redraw until the input
    // sits at a differentiable point of the network.
    while !smooth_point(net, &x) {
        x = distinct_tensor(input_shape.clone(), &mut r);
    }
    let loss_of = |n: &Network, x: &Tensor| {
        let tape = Tape::new();
        let xv = tape.param(x);
        n.loss(&tape, xv, &labels).unwrap().0.item()
    };

    let tape = Tape::new();
    let xv = tape.param(&x);
    let (loss, fwd) = net.loss(&tape, xv, &labels).unwrap();
    loss.backward().unwrap();

    let numeric_x: Vec<f64> = (0..x.numel())
        .map(|i| {
            let (mut up, mut down) = (x.clone(), x.clone());
            up.data_mut()[i] += FD_STEP;
            down.data_mut()[i] -= FD_STEP;
            (loss_of(net, &up) - loss_of(net, &down)) / (2.0 * FD_STEP)
        })
        .collect();
    let mut worst = relative_error(&xv.grad(), &numeric_x);

    for (k, bound) in fwd.params.iter().enumerate() {
        let len = net.params()[k].numel();
        let numeric: Vec<f64> = (0..len)
            .map(|i| {
                let shifted = |delta: f64| {
                    let mut n = net.clone();
                    n.params_mut()[k].data_mut()[i] += delta;
                    loss_of(&n, &x)
                };
                (shifted(FD_STEP) - shifted(-FD_STEP)) / (2.0 * FD_STEP)
            })
            .collect();
        worst = worst.max(relative_error(&bound.grad(), &numeric));
    }
    worst
}
