mod common;

use common::*;
use pixforge::autograd::Tensor;
use pixforge::image::Image;
use pixforge::imageopt::*;
use pixforge::nn::save_weights;

fn sample(i: usize) -> Image {
    tensor_to_image(&trained().test.inputs()[i]).unwrap()
}

#[test]
fn fgsm_perturbation_is_bounded() {
    let t = trained();
    for i in 0..10 {
        let img = sample(i);
        let adv = fgsm_attack(&t.net, &img, t.test.labels()[i], 0.05).unwrap();
        for (a, b) in adv.data().iter().zip(img.data()) {
            let d = (*a as f64 - *b as f64).abs() / 255.0;
            assert!(d <= 0.05 + 1.0 / 255.0);
        }
    }
}

#[test]
fn fgsm_raises_the_loss() {
    let t = trained();
    let i = 3;
    let x = &t.test.inputs()[i];
    let adv = fgsm_tensor(&t.net, x, t.test.labels()[i], 0.1).unwrap();
    let p_clean = t.net.predict_tensor(x).unwrap()[t.test.labels()[i]];
    let p_adv = t.net.predict_tensor(&adv).unwrap()[t.test.labels()[i]];
    assert!(p_adv < p_clean);
}

#[test]
fn gram_matrices_are_symmetric_psd() {
    for seed in 0..10 {
        let mut r = rng(seed);
        let acts = random_tensor(vec![3, 4, 5], &mut r);
        let g = gram(&acts).unwrap();
        for j in 0..3 {
            assert!(g.get(j, j) >= 0.0);
            for k in 0..3 {
                assert!((g.get(j, k) - g.get(k, j)).abs() < 1e-12);
            }
        }
        // Leading principal minors of a 3x3 PSD matrix are non-negative.
        let m2 = g.get(0, 0) * g.get(1, 1) - g.get(0, 1) * g.get(1, 0);
        let det = g.get(0, 0) * (g.get(1, 1) * g.get(2, 2) - g.get(1, 2) * g.get(2, 1))
            - g.get(0, 1) * (g.get(1, 0) * g.get(2, 2) - g.get(1, 2) * g.get(2, 0))
            + g.get(0, 2) * (g.get(1, 0) * g.get(2, 1) - g.get(1, 1) * g.get(2, 0));
        assert!(m2 >= -1e-9 && det >= -1e-9);
        // Quadratic form check along random directions.
        for _ in 0..20 {
            let v = random_tensor(vec![3], &mut r);
            let q: f64 = (0..3).flat_map(|j| (0..3).map(move |k| (j, k))).map(|(j, k)| v.data()[j] * g.get(j, k) * v.data()[k]).sum();
            assert!(q >= -1e-9);
        }
    }
}

#[test]
fn gram_of_orthonormal_rows_is_scaled_identity() {
    let acts = Tensor::new(vec![2, 1, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let g = gram(&acts).unwrap();
    // Normalization divides by channels * height * width = 4.
    assert_eq!(g.data, vec![0.25, 0.0, 0.0, 0.25]);
}

#[test]
fn dream_step_never_decreases_objective() {
    let t = trained();
    let sel = LayerSelection::new(&t.net, vec![0, 2]).unwrap();
    let mut x = t.test.inputs()[1].clone();
    for _ in 0..10 {
        let s = dream_step(&t.net, &x, &sel, 0.2).unwrap();
        assert!(s.after >= s.before);
        assert!(s.image.data().iter().all(|v| (0.0..=1.0).contains(v)));
        x = s.image;
    }
}

#[test]
fn dream_step_ignores_loss_scale() {
    // Scaling the first conv by 10 scales the post-ReLU activations by 10 and
    // the objective by 100; the normalized step must not change.
    let t = trained();
    let mut scaled = t.net.clone();
    for p in scaled.layers[0].params_mut() {
        p.data_mut().iter_mut().for_each(|v| *v *= 10.0);
    }
    let sel = LayerSelection::new(&t.net, vec![1]).unwrap();
    let x = t.test.inputs()[2].clone();
    let a = dream_step(&t.net, &x, &sel, 0.01).unwrap();
    let b = dream_step(&scaled, &x, &sel, 0.01).unwrap();
    assert!((b.before / a.before - 100.0).abs() < 1e-9);
    for (u, v) in a.image.data().iter().zip(b.image.data()) {
        // Only the 1e-8 stabilizer in the normalization breaks exact invariance.
        assert!((u - v).abs() < 1e-9);
    }
}

#[test]
fn early_and_late_taps_dream_differently() {
    let t = trained();
    let img = sample(4);
    let params = DreamParams { steps: 5, octaves: 1, ..Default::default() };
    let early = deep_dream(&t.net, &img, &LayerSelection::new(&t.net, vec![0]).unwrap(), &params).unwrap();
    let late = deep_dream(&t.net, &img, &LayerSelection::new(&t.net, vec![4]).unwrap(), &params).unwrap();
    assert_ne!(early.image, late.image);
}

#[test]
fn dream_rejects_tiny_images() {
    let t = trained();
    let img = Image::filled(4, 4, 1, 100).unwrap();
    let params = DreamParams { octaves: 3, ..Default::default() };
    assert!(deep_dream(&t.net, &img, &LayerSelection::default_for(&t.net), &params).is_err());
}

#[test]
fn zero_style_weight_returns_content() {
    let t = trained();
    let (content, style) = (sample(0), sample(1));
    let params = StyleParams { style_weight: 0.0, steps: 10, ..Default::default() };
    let out = style_transfer(&t.net, &content, &style, &LayerSelection::default_for(&t.net), &params).unwrap();
    assert_eq!(out.image, content);
}

#[test]
fn procedures_leave_weights_untouched() {
    let t = trained();
    let before = save_weights(&t.net);
    let sel = LayerSelection::default_for(&t.net);
    fgsm_attack(&t.net, &sample(0), 0, 0.1).unwrap();
    deep_dream(&t.net, &sample(0), &sel, &DreamParams { steps: 2, ..Default::default() }).unwrap();
    style_transfer(&t.net, &sample(0), &sample(1), &sel, &StyleParams { steps: 3, ..Default::default() }).unwrap();
    assert_eq!(save_weights(&t.net), before);
}
