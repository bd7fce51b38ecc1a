use crate::{Error, Result};

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::param("ys", "length differs from xs"));
    }
    if xs.len() < 2 {
        return Err(Error::param("xs", "a slope needs at least two points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::param("xs", "all abscissae coincide"));
    }
    let slope = sxy / sxx;
    if !slope.is_finite() {
        return Err(Error::NonFinite("least-squares slope"));
    }
    Ok(slope)
}
