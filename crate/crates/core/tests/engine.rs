use fedmenf::data::{gen_synthetic_signal, SignalKind};
use fedmenf::nn::{forward, grad, hvp, loss_mse, siren_init, Activation, Architecture, Batch, ParamVector};
use fedmenf::rng;
use proptest::prelude::*;
use rand::Rng;

fn random_batch(n: usize, din: usize, dout: usize, seed: u64) -> Batch {
    let mut r = rng::from_seed(seed);
    let coords = (0..n * din).map(|_| r.random_range(-1.0..1.0)).collect();
    let targets = (0..n * dout).map(|_| r.random_range(-1.0..1.0)).collect();
    Batch::new(coords, targets, din, dout).unwrap()
}

fn tiny(seed: u64) -> (Architecture, ParamVector, Batch) {
    let arch = Architecture::new(vec![2, 6, 5, 2], 3.0, Activation::Sine).unwrap();
    let mut p = siren_init(&arch, seed);
    // Non-zero biases so every term of the gradient is exercised.
    let mut r = rng::derive(seed, &[7]);
    for v in p.iter_mut() {
        *v += r.random_range(-0.3..0.3);
    }
    (arch, p, random_batch(9, 2, 2, seed + 100))
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    num / den.max(1e-300)
}

#[test]
fn gradient_matches_central_differences() {
    for seed in 0..24 {
        let (arch, p, batch) = tiny(seed);
        let g = grad(&p, &arch, &batch).unwrap();
        let h = 1e-6;
        let fd: Vec<f64> = (0..p.len())
            .map(|i| {
                let mut a = p.clone();
                a[i] += h;
                let mut b = p.clone();
                b[i] -= h;
                (loss_mse(&a, &arch, &batch).unwrap() - loss_mse(&b, &arch, &batch).unwrap()) / (2.0 * h)
            })
            .collect();
        let e = rel_err(&g, &fd);
        assert!(e < 1e-4, "seed {seed}: relative error {e}");
    }
}

#[test]
fn hvp_matches_gradient_differences() {
    for seed in 0..24 {
        let (arch, p, batch) = tiny(seed);
        let mut r = rng::derive(seed, &[9]);
        let v = ParamVector::new((0..p.len()).map(|_| r.random_range(-1.0..1.0)).collect());
        let hv = hvp(&p, &arch, &batch, &v).unwrap();
        let h = 1e-5;
        let mut a = p.clone();
        a.axpy(h, &v);
        let mut b = p.clone();
        b.axpy(-h, &v);
        let ga = grad(&a, &arch, &batch).unwrap();
        let gb = grad(&b, &arch, &batch).unwrap();
        let fd: Vec<f64> = ga.iter().zip(gb.iter()).map(|(x, y)| (x - y) / (2.0 * h)).collect();
        let e = rel_err(&hv, &fd);
        assert!(e < 1e-4, "seed {seed}: relative error {e}");
    }
}

#[test]
fn hvp_is_symmetric() {
    for seed in 0..10 {
        let (arch, p, batch) = tiny(seed);
        let mut r = rng::derive(seed, &[11]);
        let mut rand_vec = || ParamVector::new((0..p.len()).map(|_| r.random_range(-1.0..1.0)).collect());
        let (u, v) = (rand_vec(), rand_vec());
        let uhv = u.dot(&hvp(&p, &arch, &batch, &v).unwrap());
        let vhu = v.dot(&hvp(&p, &arch, &batch, &u).unwrap());
        assert!((uhv - vhu).abs() <= 1e-10 * uhv.abs().max(1.0), "{uhv} vs {vhu}");
    }
}

#[test]
fn single_affine_layer_hessian_is_gram_matrix() {
    // Loss (1/n) sum (W x + b - y)^2 with one output has Hessian
    // (2/n) sum [x;1][x;1]^T over the (w, b) parameters.
    let arch = Architecture::siren(vec![3, 1]).unwrap();
    let batch = random_batch(7, 3, 1, 5);
    let p = ParamVector::new(vec![0.2, -0.4, 0.1, 0.05]);
    let v = ParamVector::new(vec![1.0, -2.0, 0.5, 3.0]);
    let n = batch.len() as f64;
    let mut expect = [0.0; 4];
    for i in 0..batch.len() {
        let x = batch.coord(i);
        let z = [x[0], x[1], x[2], 1.0];
        let zv: f64 = z.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        for k in 0..4 {
            expect[k] += 2.0 / n * z[k] * zv;
        }
    }
    let got = hvp(&p, &arch, &batch, &v).unwrap();
    for k in 0..4 {
        assert!((got[k] - expect[k]).abs() < 1e-10, "{k}: {} vs {}", got[k], expect[k]);
    }
}

#[test]
fn siren_fits_smooth_image() {
    // A 6-layer SIREN should fit a smooth 32x32 image closely with a few
    // hundred full-batch steps.
    use fedmenf::nn::{loss_and_grad, optimizer_step, OptimizerState};
    let arch = Architecture::siren_uniform(2, 64, 4, 1, 30.0).unwrap();
    let batch = gen_synthetic_signal(SignalKind::RandSmooth, &[32, 32], 1, 0).unwrap().to_batch();
    let mut p = siren_init(&arch, 0);
    let mut opt = OptimizerState::adamw(p.len()).with_weight_decay(0.0);
    for _ in 0..300 {
        let (_, g) = loss_and_grad(&p, &arch, &batch).unwrap();
        let (next, s) = optimizer_step(&opt, &p, &g, 1e-3);
        p = next;
        opt = s;
    }
    let mse = loss_mse(&p, &arch, &batch).unwrap();
    assert!(mse < 1e-2, "final mse {mse}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn forward_output_length(n in 1usize..20, seed in 0u64..1000) {
        let arch = Architecture::siren(vec![2, 5, 3]).unwrap();
        let p = siren_init(&arch, seed);
        let coords = random_batch(n, 2, 1, seed).coords().to_vec();
        prop_assert_eq!(forward(&p, &arch, &coords).unwrap().len(), n * 3);
    }

    #[test]
    fn loss_is_non_negative(seed in 0u64..1000) {
        let (arch, p, batch) = tiny(seed);
        prop_assert!(loss_mse(&p, &arch, &batch).unwrap() >= 0.0);
    }

    #[test]
    fn hvp_is_linear_in_direction(seed in 0u64..200, s in -3.0f64..3.0) {
        let (arch, p, batch) = tiny(seed);
        let v = ParamVector::new((0..p.len()).map(|i| ((i as f64) * 0.37).sin()).collect());
        let hv = hvp(&p, &arch, &batch, &v).unwrap();
        let hsv = hvp(&p, &arch, &batch, &v.scaled(s)).unwrap();
        for (a, b) in hv.iter().zip(hsv.iter()) {
            prop_assert!((a * s - b).abs() <= 1e-9 * (1.0 + a.abs() * s.abs()));
        }
    }
}
