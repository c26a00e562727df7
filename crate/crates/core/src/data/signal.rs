use std::f64::consts::PI;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::coord_grid;
use crate::nn::Batch;
use crate::{rng, Error, Result};

/// Raw data of one task: values on a regular grid, normalized to `[-1, 1]`.
///
/// `dims` is `(width, height)` for images or `(width, height, frames)` for
/// video; the first axis varies fastest. Values are interleaved by channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    dims: Vec<usize>,
    channels: usize,
    values: Vec<f64>,
    pub source_tag: String,
}

impl Signal {
    pub fn new(dims: Vec<usize>, channels: usize, values: Vec<f64>, source_tag: impl Into<String>) -> Result<Self> {
        if !(2..=3).contains(&dims.len()) {
            return Err(Error::arg("dims", format!("expected 2 or 3 axes, got {}", dims.len())));
        }
        if dims.contains(&0) {
            return Err(Error::arg("dims", "zero-length axis"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::arg("channels", format!("expected 1 or 3, got {channels}")));
        }
        let expected = dims.iter().product::<usize>() * channels;
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                what: "signal values",
                expected,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::arg("values", format!("value {} at {i} outside [-1, 1]", values[i])));
        }
        Ok(Self {
            dims,
            channels,
            values,
            source_tag: source_tag.into(),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_points(&self) -> usize {
        self.dims.iter().product()
    }

    /// Every grid point as one batch, in grid order.
    pub fn to_batch(&self) -> Batch {
        let coords = coord_grid(&self.dims).expect("validated dims");
        Batch::new(coords, self.values.clone(), self.dims.len(), self.channels).expect("validated signal")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Gabor,
    Rings,
    Checker,
    RandSmooth,
}

impl FromStr for SignalKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gabor" => Ok(Self::Gabor),
            "rings" => Ok(Self::Rings),
            "checker" => Ok(Self::Checker),
            "rand_smooth" => Ok(Self::RandSmooth),
            other => Err(Error::arg("kind", format!("unknown signal kind `{other}`"))),
        }
    }
}

fn random_unit(r: &mut rng::SimRng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn channel_field(kind: SignalKind, dims: &[usize], coords: &[f64], r: &mut rng::SimRng) -> Vec<f64> {
    let d = dims.len();
    let points = coords.chunks(d);
    match kind {
        SignalKind::Gabor => {
            let center: Vec<f64> = (0..d).map(|_| r.random_range(-0.5..0.5)).collect();
            let sigma: f64 = r.random_range(0.25..0.6);
            let freq: f64 = r.random_range(1.0..3.0);
            let dir = random_unit(r, d);
            let phase: f64 = r.random_range(0.0..2.0 * PI);
            points
                .map(|x| {
                    let (mut r2, mut proj) = (0.0, 0.0);
                    for i in 0..d {
                        let dx = x[i] - center[i];
                        r2 += dx * dx;
                        proj += dir[i] * dx;
                    }
                    (-r2 / (2.0 * sigma * sigma)).exp() * (2.0 * PI * freq * proj + phase).cos()
                })
                .collect()
        }
        SignalKind::Rings => {
            let center: Vec<f64> = (0..d).map(|_| r.random_range(-0.5..0.5)).collect();
            let freq: f64 = r.random_range(1.5..4.0);
            let phase: f64 = r.random_range(0.0..2.0 * PI);
            points
                .map(|x| {
                    let rad = x.iter().zip(&center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
                    (2.0 * PI * freq * rad + phase).cos()
                })
                .collect()
        }
        SignalKind::Checker => {
            let flip = if r.random::<bool>() { -1.0 } else { 1.0 };
            let total: usize = dims.iter().product();
            (0..total)
                .map(|flat| {
                    let mut rem = flat;
                    let mut parity = 0;
                    for &n in dims {
                        let i = rem % n;
                        rem /= n;
                        let cells = n.min(8);
                        parity += i * cells / n;
                    }
                    if parity % 2 == 0 {
                        flip
                    } else {
                        -flip
                    }
                })
                .collect()
        }
        SignalKind::RandSmooth => {
            // Random low-frequency cosine modes with 1/(1+|k|^2) amplitude decay.
            let kmax = if d == 2 { 4 } else { 3 };
            let modes = (kmax as usize).pow(d as u32);
            let mut terms = Vec::with_capacity(modes);
            for m in 0..modes {
                let mut rem = m;
                let k: Vec<f64> = (0..d)
                    .map(|_| {
                        let v = rem % kmax as usize;
                        rem /= kmax as usize;
                        v as f64
                    })
                    .collect();
                let k2: f64 = k.iter().map(|v| v * v).sum();
                let amp: f64 = r.sample::<f64, _>(StandardNormal) / (1.0 + k2);
                let phase: f64 = r.random_range(0.0..2.0 * PI);
                terms.push((k, amp, phase));
            }
            let raw: Vec<f64> = points
                .map(|x| {
                    terms
                        .iter()
                        .map(|(k, a, p)| a * (PI * k.iter().zip(x).map(|(ki, xi)| ki * xi).sum::<f64>() + p).cos())
                        .sum()
                })
                .collect();
            let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if peak > 0.0 {
                raw.into_iter().map(|v| v / peak).collect()
            } else {
                raw
            }
        }
    }
}

/// Deterministic synthetic signal on a grid.
pub fn gen_synthetic_signal(kind: SignalKind, dims: &[usize], channels: usize, seed: u64) -> Result<Signal> {
    let coords = coord_grid(dims)?;
    if channels != 1 && channels != 3 {
        return Err(Error::arg("channels", format!("expected 1 or 3, got {channels}")));
    }
    let mut r = rng::from_seed(seed);
    let fields: Vec<Vec<f64>> = (0..channels).map(|_| channel_field(kind, dims, &coords, &mut r)).collect();
    let n: usize = dims.iter().product();
    let mut values = Vec::with_capacity(n * channels);
    for p in 0..n {
        for f in &fields {
            values.push(f[p].clamp(-1.0, 1.0));
        }
    }
    Signal::new(dims.to_vec(), channels, values, format!("{kind:?}/{seed}"))
}

/// A task signal from a population: a shared template, a per-client identity
/// component and a per-task variation, mixed with weights 0.5 / 0.35 / 0.15.
pub fn gen_task_signal(
    kind: SignalKind,
    dims: &[usize],
    channels: usize,
    population_seed: u64,
    client_seed: u64,
    task_seed: u64,
) -> Result<Signal> {
    let base = gen_synthetic_signal(kind, dims, channels, rng::derive_seed(population_seed, &[0]))?;
    let ident = gen_synthetic_signal(kind, dims, channels, rng::derive_seed(population_seed, &[1, client_seed]))?;
    let var = gen_synthetic_signal(
        kind,
        dims,
        channels,
        rng::derive_seed(population_seed, &[2, client_seed, task_seed]),
    )?;
    let values = base
        .values()
        .iter()
        .zip(ident.values())
        .zip(var.values())
        .map(|((b, i), v)| (0.5 * b + 0.35 * i + 0.15 * v).clamp(-1.0, 1.0))
        .collect();
    Signal::new(
        dims.to_vec(),
        channels,
        values,
        format!("{kind:?}/pop{population_seed}/client{client_seed}/task{task_seed}"),
    )
}
