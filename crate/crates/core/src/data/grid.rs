use crate::{Error, Result};

/// Evenly spaced coordinates on `[-1, 1]^d`, first axis varying fastest.
///
/// An axis with a single point maps to 0. The output is flat with one
/// `dims.len()`-tuple per grid point.
pub fn coord_grid(dims: &[usize]) -> Result<Vec<f64>> {
    if dims.is_empty() {
        return Err(Error::arg("dims", "at least one axis required"));
    }
    if let Some(i) = dims.iter().position(|&d| d == 0) {
        return Err(Error::arg("dims", format!("axis {i} has zero length")));
    }
    let total: usize = dims.iter().product();
    let d = dims.len();
    let mut out = Vec::with_capacity(total * d);
    for flat in 0..total {
        let mut rem = flat;
        for &n in dims {
            let i = rem % n;
            rem /= n;
            out.push(axis_coord(i, n));
        }
    }
    Ok(out)
}

fn axis_coord(i: usize, n: usize) -> f64 {
    if n == 1 {
        0.0
    } else {
        -1.0 + 2.0 * i as f64 / (n - 1) as f64
    }
}

/// Inverse of [`coord_grid`]: the flat grid index of a coordinate tuple,
/// or `None` if the tuple is not a grid point.
pub fn grid_index(coord: &[f64], dims: &[usize]) -> Option<usize> {
    if coord.len() != dims.len() {
        return None;
    }
    let mut idx = 0;
    let mut stride = 1;
    for (&x, &n) in coord.iter().zip(dims) {
        let i = if n == 1 {
            0.0
        } else {
            ((x + 1.0) * 0.5 * (n - 1) as f64).round()
        };
        if !(0.0..n as f64).contains(&i) || (axis_coord(i as usize, n) - x).abs() > 1e-9 {
            return None;
        }
        idx += i as usize * stride;
        stride *= n;
    }
    Some(idx)
}
