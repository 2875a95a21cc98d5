use crate::error::{Error, Result};

/// Locally weighted linear regression with tricube weights over the
/// `ceil(frac * n)` nearest neighbours of each point; no robustness passes.
/// Falls back to the weighted mean when the local design is degenerate.
pub fn lowess(x: &[f64], y: &[f64], frac: f64) -> Result<Vec<f64>> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::InvalidArgument("lowess: x and y lengths differ".into()));
    }
    if n < 3 {
        return Err(Error::InvalidArgument(format!("lowess needs at least 3 points, got {n}")));
    }
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(Error::InvalidArgument(format!("lowess frac {frac} outside (0, 1]")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("lowess: non-finite input".into()));
    }
    let r = ((frac * n as f64).ceil() as usize).clamp(2, n);
    let mut out = Vec::with_capacity(n);
    let mut dist = vec![0.0; n];
    for i in 0..n {
        for (d, &xj) in dist.iter_mut().zip(x) {
            *d = (xj - x[i]).abs();
        }
        let mut sorted = dist.clone();
        sorted.sort_by(f64::total_cmp);
        let h = sorted[r - 1];
        let w: Vec<f64> = dist
            .iter()
            .map(|&d| {
                if h == 0.0 {
                    if d == 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else if d < h {
                    let u = d / h;
                    (1.0 - u * u * u).powi(3)
                } else {
                    0.0
                }
            })
            .collect();
        out.push(local_linear(x, y, &w, x[i]));
    }
    Ok(out)
}

fn local_linear(x: &[f64], y: &[f64], w: &[f64], at: f64) -> f64 {
    let sw: f64 = w.iter().sum();
    let xm = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((&wj, &xj), &yj) in w.iter().zip(x).zip(y) {
        sxx += wj * (xj - xm) * (xj - xm);
        sxy += wj * (xj - xm) * (yj - ym);
    }
    let scale = w.iter().zip(x).map(|(w, x)| w * x * x).sum::<f64>() / sw;
    if sxx <= 1e-12 * scale.max(1e-300) * sw {
        return ym;
    }
    ym + sxy / sxx * (at - xm)
}

/// Scales to `[0, 1]`; a constant series maps to all zeros.
pub fn minmax_scale(series: &[f64]) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("cannot scale an empty series".into()));
    }
    let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidArgument("cannot scale a non-finite series".into()));
    }
    Ok(if hi > lo {
        series.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; series.len()]
    })
}
