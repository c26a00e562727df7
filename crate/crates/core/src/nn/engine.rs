//! Forward, reverse and forward-over-reverse passes.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use super::{Architecture, Batch, LayerShape, ParamVector};
use crate::{Error, Result};

fn weight<'a>(params: &'a [f64], shape: &LayerShape) -> ArrayView2<'a, f64> {
    ArrayView2::from_shape((shape.rows, shape.cols), &params[shape.weight_range()]).expect("layer shape")
}

fn bias<'a>(params: &'a [f64], shape: &LayerShape) -> ArrayView1<'a, f64> {
    ArrayView1::from(&params[shape.bias_range()])
}

/// Activations recorded during a forward pass.
struct Tape {
    /// Input to every layer: `inputs[0]` is the coordinate matrix.
    inputs: Vec<Array2<f64>>,
    /// Scaled pre-activations `omega_l * (W a + b)` of hidden layers.
    pre: Vec<Array2<f64>>,
    out: Array2<f64>,
}

fn affine(a: &ArrayView2<f64>, w: &ArrayView2<f64>, b: &ArrayView1<f64>) -> Array2<f64> {
    let mut z = a.dot(&w.t());
    z += b;
    z
}

fn run_forward(params: &[f64], arch: &Architecture, x: ArrayView2<f64>) -> Tape {
    let layers = arch.layers();
    let act = arch.activation();
    let last = layers.len() - 1;
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre = Vec::with_capacity(last);
    inputs.push(x.to_owned());
    let mut out = None;
    for (l, shape) in layers.iter().enumerate() {
        let z = affine(&inputs[l].view(), &weight(params, shape), &bias(params, shape));
        if l == last {
            out = Some(z);
        } else {
            let omega = arch.omega(l);
            let s = z.mapv(|v| omega * v);
            inputs.push(s.mapv(|v| act.eval(v)));
            pre.push(s);
        }
    }
    Tape {
        inputs,
        pre,
        out: out.expect("at least one layer"),
    }
}

fn check_params(params: &ParamVector, arch: &Architecture) -> Result<()> {
    params.check_len("params", arch.param_count())
}

fn check_batch(arch: &Architecture, batch: &Batch) -> Result<()> {
    if batch.coord_dim() != arch.input_dim() {
        return Err(Error::ShapeMismatch {
            what: "batch coordinate dim",
            expected: arch.input_dim(),
            got: batch.coord_dim(),
        });
    }
    if batch.value_dim() != arch.output_dim() {
        return Err(Error::ShapeMismatch {
            what: "batch value dim",
            expected: arch.output_dim(),
            got: batch.value_dim(),
        });
    }
    Ok(())
}

fn coords_view<'a>(batch: &'a Batch) -> ArrayView2<'a, f64> {
    ArrayView2::from_shape((batch.len(), batch.coord_dim()), batch.coords()).expect("batch shape")
}

fn targets_view<'a>(batch: &'a Batch) -> ArrayView2<'a, f64> {
    ArrayView2::from_shape((batch.len(), batch.value_dim()), batch.targets()).expect("batch shape")
}

/// Evaluate the network on a flat row-major coordinate matrix.
pub fn forward(params: &ParamVector, arch: &Architecture, coords: &[f64]) -> Result<Vec<f64>> {
    check_params(params, arch)?;
    let d = arch.input_dim();
    if !coords.len().is_multiple_of(d) {
        return Err(Error::ShapeMismatch {
            what: "coords",
            expected: coords.len() / d * d,
            got: coords.len(),
        });
    }
    if coords.is_empty() {
        return Ok(Vec::new());
    }
    let x = ArrayView2::from_shape((coords.len() / d, d), coords).expect("coord shape");
    let tape = run_forward(params, arch, x);
    Ok(tape.out.into_iter().collect())
}

/// Mean squared error over samples and channels.
pub fn loss_mse(params: &ParamVector, arch: &Architecture, batch: &Batch) -> Result<f64> {
    check_params(params, arch)?;
    check_batch(arch, batch)?;
    Ok(loss_unchecked(params, arch, batch))
}

pub(crate) fn loss_unchecked(params: &[f64], arch: &Architecture, batch: &Batch) -> f64 {
    let tape = run_forward(params, arch, coords_view(batch));
    let n = tape.out.len() as f64;
    Zip::from(&tape.out)
        .and(&targets_view(batch))
        .fold(0.0, |acc, &o, &t| acc + (o - t) * (o - t))
        / n
}

/// Residual scaled so that it equals dL/d(out).
fn output_delta(tape: &Tape, batch: &Batch) -> (f64, Array2<f64>) {
    let scale = 2.0 / tape.out.len() as f64;
    let resid = &tape.out - &targets_view(batch);
    let loss = resid.iter().map(|e| e * e).sum::<f64>() / tape.out.len() as f64;
    (loss, resid * scale)
}

fn write_layer_grad(g: &mut [f64], shape: &LayerShape, dw: &Array2<f64>, db: &Array1<f64>) {
    for (dst, src) in g[shape.weight_range()].iter_mut().zip(dw.iter()) {
        *dst = *src;
    }
    for (dst, src) in g[shape.bias_range()].iter_mut().zip(db.iter()) {
        *dst = *src;
    }
}

pub(crate) fn loss_and_grad_unchecked(params: &[f64], arch: &Architecture, batch: &Batch) -> (f64, ParamVector) {
    let layers = arch.layers();
    let act = arch.activation();
    let tape = run_forward(params, arch, coords_view(batch));
    let (loss, mut delta) = output_delta(&tape, batch);
    let mut g = vec![0.0; arch.param_count()];
    for (l, shape) in layers.iter().enumerate().rev() {
        let dw = delta.t().dot(&tape.inputs[l]);
        let db = delta.sum_axis(Axis(0));
        write_layer_grad(&mut g, shape, &dw, &db);
        if l > 0 {
            let omega = arch.omega(l - 1);
            let mut da = delta.dot(&weight(params, shape));
            Zip::from(&mut da)
                .and(&tape.pre[l - 1])
                .for_each(|d, &s| *d *= omega * act.d1(s));
            delta = da;
        }
    }
    (loss, ParamVector::new(g))
}

pub fn loss_and_grad(params: &ParamVector, arch: &Architecture, batch: &Batch) -> Result<(f64, ParamVector)> {
    check_params(params, arch)?;
    check_batch(arch, batch)?;
    Ok(loss_and_grad_unchecked(params, arch, batch))
}

/// Exact reverse-mode gradient of [`loss_mse`].
pub fn grad(params: &ParamVector, arch: &Architecture, batch: &Batch) -> Result<ParamVector> {
    loss_and_grad(params, arch, batch).map(|(_, g)| g)
}

pub(crate) fn hvp_unchecked(params: &[f64], arch: &Architecture, batch: &Batch, v: &[f64]) -> ParamVector {
    let layers = arch.layers();
    let act = arch.activation();
    let last = layers.len() - 1;
    let tape = run_forward(params, arch, coords_view(batch));

    // Forward tangents: d(input_l)/dv and d(pre_l)/dv.
    let n = batch.len();
    let mut r_inputs: Vec<Array2<f64>> = Vec::with_capacity(layers.len());
    let mut r_pre: Vec<Array2<f64>> = Vec::with_capacity(last);
    r_inputs.push(Array2::zeros((n, arch.input_dim())));
    let mut r_out = None;
    for (l, shape) in layers.iter().enumerate() {
        let w = weight(params, shape);
        let vw = weight(v, shape);
        let mut rz = if l == 0 {
            // Input has no tangent.
            tape.inputs[0].dot(&vw.t())
        } else {
            r_inputs[l].dot(&w.t()) + tape.inputs[l].dot(&vw.t())
        };
        rz += &bias(v, shape);
        if l == last {
            r_out = Some(rz);
        } else {
            let omega = arch.omega(l);
            rz.mapv_inplace(|x| omega * x);
            let mut ra = rz.clone();
            Zip::from(&mut ra).and(&tape.pre[l]).for_each(|r, &s| *r *= act.d1(s));
            r_inputs.push(ra);
            r_pre.push(rz);
        }
    }
    let r_out = r_out.expect("at least one layer");

    // Reverse pass carrying (delta, R delta).
    let (_, mut delta) = output_delta(&tape, batch);
    let mut r_delta = r_out * (2.0 / tape.out.len() as f64);
    let mut h = vec![0.0; arch.param_count()];
    for (l, shape) in layers.iter().enumerate().rev() {
        let mut dw = r_delta.t().dot(&tape.inputs[l]);
        if l > 0 {
            dw += &delta.t().dot(&r_inputs[l]);
        }
        let db = r_delta.sum_axis(Axis(0));
        write_layer_grad(&mut h, shape, &dw, &db);
        if l > 0 {
            let omega = arch.omega(l - 1);
            let w = weight(params, shape);
            let vw = weight(v, shape);
            let da = delta.dot(&w);
            let r_da = r_delta.dot(&w) + delta.dot(&vw);
            let mut next_delta = da.clone();
            let mut next_r = r_da;
            Zip::from(&mut next_r)
                .and(&da)
                .and(&tape.pre[l - 1])
                .and(&r_pre[l - 1])
                .for_each(|r, &d, &s, &rs| *r = omega * (*r * act.d1(s) + d * act.d2(s) * rs));
            Zip::from(&mut next_delta)
                .and(&tape.pre[l - 1])
                .for_each(|d, &s| *d *= omega * act.d1(s));
            delta = next_delta;
            r_delta = next_r;
        }
    }
    ParamVector::new(h)
}

/// Exact Hessian-vector product `(d^2 L / dp^2) v` via forward-over-reverse.
pub fn hvp(params: &ParamVector, arch: &Architecture, batch: &Batch, v: &ParamVector) -> Result<ParamVector> {
    check_params(params, arch)?;
    check_batch(arch, batch)?;
    v.check_len("hvp direction", params.len())?;
    Ok(hvp_unchecked(params, arch, batch, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{siren_init, Activation};
    use crate::rng;
    use rand::Rng;

    fn random_batch(n: usize, d: usize, c: usize, seed: u64) -> Batch {
        let mut r = rng::from_seed(seed);
        let coords = (0..n * d).map(|_| r.random_range(-1.0..1.0)).collect();
        let targets = (0..n * c).map(|_| r.random_range(-1.0..1.0)).collect();
        Batch::new(coords, targets, d, c).unwrap()
    }

    /// Scalar re-evaluation, independent of the matrix path.
    fn scalar_forward(params: &[f64], arch: &Architecture, x: &[f64]) -> Vec<f64> {
        let layers = arch.layers();
        let mut a = x.to_vec();
        for (l, shape) in layers.iter().enumerate() {
            let mut z = vec![0.0; shape.rows];
            for r in 0..shape.rows {
                let mut acc = params[shape.bias_offset + r];
                for c in 0..shape.cols {
                    acc += params[shape.weight_offset + r * shape.cols + c] * a[c];
                }
                z[r] = acc;
            }
            a = if l + 1 == layers.len() {
                z
            } else {
                let omega = if l == 0 { arch.omega0() } else { arch.omega_hidden() };
                z.iter().map(|v| (omega * v).sin()).collect()
            };
        }
        a
    }

    #[test]
    fn identity_affine_layer() {
        let arch = Architecture::siren(vec![2, 2]).unwrap();
        let p = ParamVector::new(vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let out = forward(&p, &arch, &[0.3, -0.7]).unwrap();
        assert_eq!(out, vec![0.3, -0.7]);
    }

    #[test]
    fn zero_weights_give_final_bias() {
        let arch = Architecture::siren(vec![2, 3, 2]).unwrap();
        let mut p = ParamVector::zeros(arch.param_count());
        let last = arch.layers()[1];
        p[last.bias_range()].copy_from_slice(&[0.25, -0.5]);
        let out = forward(&p, &arch, &[0.1, 0.2, -0.9, 0.4, 1.0, 1.0]).unwrap();
        assert_eq!(out, vec![0.25, -0.5, 0.25, -0.5, 0.25, -0.5]);
    }

    #[test]
    fn matches_scalar_reimplementation() {
        let arch = Architecture::siren(vec![2, 6, 5, 3]).unwrap();
        let p = siren_init(&arch, 11);
        let batch = random_batch(5, 2, 3, 3);
        let out = forward(&p, &arch, batch.coords()).unwrap();
        for i in 0..5 {
            let expect = scalar_forward(&p, &arch, batch.coord(i));
            for c in 0..3 {
                assert!((out[i * 3 + c] - expect[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_errors() {
        let arch = Architecture::siren(vec![2, 3, 1]).unwrap();
        let p = ParamVector::zeros(arch.param_count() - 1);
        assert!(forward(&p, &arch, &[0.0, 0.0]).is_err());
        let p = ParamVector::zeros(arch.param_count());
        assert!(forward(&p, &arch, &[0.0, 0.0, 0.0]).is_err());
        let b = random_batch(3, 3, 1, 0);
        assert!(loss_mse(&p, &arch, &b).is_err());
        let b = random_batch(3, 2, 1, 0);
        assert!(hvp(&p, &arch, &b, &ParamVector::zeros(2)).is_err());
    }

    #[test]
    fn loss_forced_arithmetic() {
        // All-zero params -> output 0; targets 1 -> MSE 1.
        let arch = Architecture::siren(vec![1, 2, 1]).unwrap();
        let p = ParamVector::zeros(arch.param_count());
        let b = Batch::new(vec![0.1, 0.2, 0.3, 0.4], vec![1.0; 4], 1, 1).unwrap();
        assert_eq!(loss_mse(&p, &arch, &b).unwrap(), 1.0);
    }

    #[test]
    fn loss_brute_force() {
        let arch = Architecture::siren(vec![2, 4, 2]).unwrap();
        let p = siren_init(&arch, 5);
        let b = random_batch(7, 2, 2, 9);
        let mut sum = 0.0;
        for i in 0..b.len() {
            let o = scalar_forward(&p, &arch, b.coord(i));
            for (oc, tc) in o.iter().zip(b.target(i)) {
                sum += (oc - tc).powi(2);
            }
        }
        let expect = sum / 14.0;
        assert!((loss_mse(&p, &arch, &b).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn zero_residual_gives_zero_grad() {
        let arch = Architecture::siren(vec![2, 5, 1]).unwrap();
        let p = siren_init(&arch, 1);
        let b = random_batch(6, 2, 1, 2);
        let out = forward(&p, &arch, b.coords()).unwrap();
        let b = Batch::new(b.coords().to_vec(), out, 2, 1).unwrap();
        let g = grad(&p, &arch, &b).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn last_bias_grad_linear_in_residual() {
        let arch = Architecture::siren(vec![2, 5, 1]).unwrap();
        let p = siren_init(&arch, 1);
        let b = random_batch(6, 2, 1, 2);
        let out = forward(&p, &arch, b.coords()).unwrap();
        let resid: Vec<f64> = b.targets().iter().zip(&out).map(|(t, o)| t - o).collect();
        let t2: Vec<f64> = out.iter().zip(&resid).map(|(o, r)| o + 2.0 * r).collect();
        let b2 = Batch::new(b.coords().to_vec(), t2, 2, 1).unwrap();
        let bias = arch.layers()[1].bias_range();
        let g1 = grad(&p, &arch, &b).unwrap();
        let g2 = grad(&p, &arch, &b2).unwrap();
        for i in bias {
            assert!((g2[i] - 2.0 * g1[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn relu_gradient_matches_fd() {
        let arch = Architecture::new(vec![2, 6, 1], 1.0, Activation::Relu).unwrap();
        let p = siren_init(&arch, 4);
        let b = random_batch(8, 2, 1, 4);
        let g = grad(&p, &arch, &b).unwrap();
        let h = 1e-6;
        for i in 0..p.len() {
            let mut pp = p.clone();
            pp[i] += h;
            let mut pm = p.clone();
            pm[i] -= h;
            let fd = (loss_mse(&pp, &arch, &b).unwrap() - loss_mse(&pm, &arch, &b).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6, "param {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn hvp_of_zero_is_zero() {
        let arch = Architecture::siren(vec![2, 4, 1]).unwrap();
        let p = siren_init(&arch, 3);
        let b = random_batch(5, 2, 1, 1);
        let hv = hvp(&p, &arch, &b, &ParamVector::zeros(p.len())).unwrap();
        assert!(hv.iter().all(|&v| v == 0.0));
    }
}
