/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    if m == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

/// `(E v^q)^{1/q}` with a delta-method standard error.
pub fn lq_norm(values: &[f64], q: f64) -> (f64, f64) {
    let powered: Vec<f64> = values.iter().map(|v| v.abs().powf(q)).collect();
    let (mean, se) = mean_se(&powered);
    if mean <= 0.0 {
        return (0.0, 0.0);
    }
    let stat = mean.powf(1.0 / q);
    (stat, stat / (q * mean) * se)
}

/// Least-squares slope of `y` on `x` and its standard error.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    if x.len() <= 2 {
        return (slope, 0.0);
    }
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    (slope, (rss / (n - 2.0) / sxx).sqrt())
}

/// `diff / se`, with a floor on `se` for coordinates that carry no noise.
pub fn z_score(diff: f64, se: f64) -> f64 {
    diff / se.max(1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_error() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_se(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn lq_of_constant() {
        let (s, se) = lq_norm(&[2.0, -2.0, 2.0], 3.0);
        assert!((s - 2.0).abs() < 1e-14);
        assert_eq!(se, 0.0);
        assert_eq!(lq_norm(&[0.0, 0.0], 2.0), (0.0, 0.0));
    }

    #[test]
    fn exact_line_slope() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 1.5 * v - 2.0).collect();
        let (s, se) = ols_slope(&x, &y);
        assert!((s - 1.5).abs() < 1e-14);
        assert!(se < 1e-14);
    }
}
