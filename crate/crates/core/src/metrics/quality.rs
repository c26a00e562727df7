use crate::{Error, Result};

pub const PSNR_CAP: f64 = 100.0;
pub const SSIM_WINDOW: usize = 8;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

#[inline]
fn unit(v: f64) -> f64 {
    (v + 1.0) * 0.5
}

/// PSNR in dB of two `[-1, 1]` sequences after mapping both to `[0, 1]`.
pub fn psnr(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::ShapeMismatch {
            what: "psnr inputs",
            expected: target.len(),
            got: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("psnr of empty sequences".into()));
    }
    let mse = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let e = unit(*p) - unit(*t);
            e * e
        })
        .sum::<f64>()
        / pred.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

fn window_ssim(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let (mut mx, mut my) = (0.0, 0.0);
    for &(x, y) in pairs {
        mx += x;
        my += y;
    }
    mx /= n;
    my /= n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
        cxy += (x - mx) * (y - my);
    }
    vx /= n;
    vy /= n;
    cxy /= n;
    ((2.0 * mx * my + SSIM_C1) * (2.0 * cxy + SSIM_C2)) / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2))
}

fn check_layout(len: usize, dims: &[usize], channels: usize) -> Result<(usize, usize, usize)> {
    if !(2..=3).contains(&dims.len()) {
        return Err(Error::arg("dims", format!("expected 2 or 3 axes, got {}", dims.len())));
    }
    let expected = dims.iter().product::<usize>() * channels;
    if len != expected || channels == 0 {
        return Err(Error::ShapeMismatch {
            what: "ssim inputs",
            expected,
            got: len,
        });
    }
    let (w, h) = (dims[0], dims[1]);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::arg(
            "dims",
            format!("{SSIM_WINDOW}x{SSIM_WINDOW} window larger than {w}x{h} image"),
        ));
    }
    Ok((w, h, dims.get(2).copied().unwrap_or(1)))
}

/// Mean SSIM over non-overlapping 8x8 windows of every frame and channel,
/// optionally restricted to `mask`ed pixels.
fn ssim_impl(pred: &[f64], target: &[f64], dims: &[usize], channels: usize, mask: Option<&[bool]>) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::ShapeMismatch {
            what: "ssim inputs",
            expected: target.len(),
            got: pred.len(),
        });
    }
    let (w, h, frames) = check_layout(pred.len(), dims, channels)?;
    let mut total = 0.0;
    let mut count = 0usize;
    let mut pairs = Vec::with_capacity(SSIM_WINDOW * SSIM_WINDOW);
    for t in 0..frames {
        for y0 in (0..=h - SSIM_WINDOW).step_by(SSIM_WINDOW) {
            for x0 in (0..=w - SSIM_WINDOW).step_by(SSIM_WINDOW) {
                for c in 0..channels {
                    pairs.clear();
                    for y in y0..y0 + SSIM_WINDOW {
                        for x in x0..x0 + SSIM_WINDOW {
                            let p = x + w * (y + h * t);
                            if mask.is_none_or(|m| m[p]) {
                                let i = p * channels + c;
                                pairs.push((unit(pred[i]), unit(target[i])));
                            }
                        }
                    }
                    if pairs.len() >= 2 {
                        total += window_ssim(&pairs);
                        count += 1;
                    }
                }
            }
        }
    }
    if count == 0 {
        return Err(Error::Empty("no SSIM window has at least two samples".into()));
    }
    Ok(total / count as f64)
}

pub fn ssim(pred: &[f64], target: &[f64], dims: &[usize], channels: usize) -> Result<f64> {
    ssim_impl(pred, target, dims, channels, None)
}

/// SSIM restricted to grid points where `mask` is set; windows with fewer
/// than two such points are skipped.
pub fn masked_ssim(pred: &[f64], target: &[f64], dims: &[usize], channels: usize, mask: &[bool]) -> Result<f64> {
    let n: usize = dims.iter().product();
    if mask.len() != n {
        return Err(Error::ShapeMismatch {
            what: "ssim mask",
            expected: n,
            got: mask.len(),
        });
    }
    ssim_impl(pred, target, dims, channels, Some(mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic_signal, SignalKind};
    use proptest::prelude::*;

    #[test]
    fn identical_is_capped() {
        assert_eq!(psnr(&[0.1, -0.3], &[0.1, -0.3]).unwrap(), PSNR_CAP);
    }

    #[test]
    fn twenty_db() {
        // Error 0.2 on the [-1,1] scale is 0.1 on [0,1], so MSE = 0.01.
        let t = vec![0.0; 10];
        let p = vec![0.2; 10];
        assert!((psnr(&p, &t).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn psnr_brute_force() {
        let p = [0.3, -0.8, 0.11, 0.95, -0.2];
        let t = [0.1, -0.7, 0.4, 1.0, -0.5];
        let mut mse = 0.0f64;
        for i in 0..5 {
            let a = (p[i] + 1.0) / 2.0;
            let b = (t[i] + 1.0) / 2.0;
            mse += (a - b) * (a - b);
        }
        mse /= 5.0;
        let expect = 10.0 * (1.0 / mse).log10();
        assert!((psnr(&p, &t).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn psnr_length_mismatch() {
        assert!(psnr(&[0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn ssim_identity() {
        let s = gen_synthetic_signal(SignalKind::Rings, &[16, 16], 3, 1).unwrap();
        assert!((ssim(s.values(), s.values(), s.dims(), 3).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_inversion_is_negative() {
        let s = gen_synthetic_signal(SignalKind::Checker, &[16, 16], 1, 0).unwrap();
        let inv: Vec<f64> = s.values().iter().map(|v| -v).collect();
        assert!(ssim(&inv, s.values(), s.dims(), 1).unwrap() < 0.0);
    }

    #[test]
    fn ssim_constant_offset_luminance_only() {
        let a = vec![0.0; 64];
        let b = vec![0.2; 64];
        let (m1, m2) = (0.5, 0.6);
        let expect = (2.0 * m1 * m2 + SSIM_C1) / (m1 * m1 + m2 * m2 + SSIM_C1);
        assert!((ssim(&a, &b, &[8, 8], 1).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn ssim_window_too_large() {
        assert!(ssim(&[0.0; 49], &[0.0; 49], &[7, 7], 1).is_err());
    }

    #[test]
    fn masked_ssim_full_mask_equals_ssim() {
        let a = gen_synthetic_signal(SignalKind::Gabor, &[16, 8], 1, 1).unwrap();
        let b = gen_synthetic_signal(SignalKind::Gabor, &[16, 8], 1, 2).unwrap();
        let full = ssim(a.values(), b.values(), a.dims(), 1).unwrap();
        let masked = masked_ssim(a.values(), b.values(), a.dims(), 1, &[true; 128]).unwrap();
        assert_eq!(full, masked);
    }

    proptest! {
        #[test]
        fn symmetric_and_monotone(vals in proptest::collection::vec((-1.0f64..1.0, -0.5f64..0.5), 64), s in 1.01f64..3.0) {
            let t: Vec<f64> = vals.iter().map(|v| v.0).collect();
            let p: Vec<f64> = vals.iter().map(|v| (v.0 + v.1 * 0.3).clamp(-1.0, 1.0)).collect();
            prop_assert_eq!(psnr(&p, &t).unwrap(), psnr(&t, &p).unwrap());
            let s1 = ssim(&p, &t, &[8, 8], 1).unwrap();
            let s2 = ssim(&t, &p, &[8, 8], 1).unwrap();
            prop_assert!((s1 - s2).abs() < 1e-12);
            prop_assert!((-1.0..=1.0 + 1e-12).contains(&s1));
            // Scaling the error field (unclamped) strictly lowers PSNR.
            let p2: Vec<f64> = t.iter().zip(&p).map(|(a, b)| a + s * (b - a)).collect();
            let (q1, q2) = (psnr(&p, &t).unwrap(), psnr(&p2, &t).unwrap());
            prop_assert!(q1 == PSNR_CAP || q2 < q1);
        }

        #[test]
        fn affine_rescale_invariance(vals in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..50)) {
            let p: Vec<f64> = vals.iter().map(|v| v.0).collect();
            let t: Vec<f64> = vals.iter().map(|v| v.1).collect();
            // Computing on [-1,1] with peak 2 equals mapping to [0,1] with peak 1.
            let mse = p.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64;
            if mse > 0.0 {
                let direct = 10.0 * (4.0 / mse).log10();
                prop_assert!((direct.min(PSNR_CAP) - psnr(&p, &t).unwrap()).abs() < 1e-10);
            }
        }
    }
}
