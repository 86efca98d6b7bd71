//! Compensated summation and sample moments.

/// Neumaier-compensated sum; the result does not depend on how the input
/// was produced, only on its order.
pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for x in values {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    sum(values.iter().copied()) / values.len() as f64
}

/// Unbiased sample covariance.
pub fn covariance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return f64::NAN;
    }
    let (ma, mb) = (mean(a), mean(b));
    sum(a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb))) / (n - 1) as f64
}

pub fn variance(values: &[f64]) -> f64 {
    covariance(values, values)
}

pub fn std_error(values: &[f64]) -> f64 {
    (variance(values).max(0.0) / values.len() as f64).sqrt()
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let d = (variance(a) * variance(b)).sqrt();
    if d == 0.0 {
        return 0.0;
    }
    covariance(a, b) / d
}

/// Sample kurtosis `m4 / m2^2` (3 for a Gaussian).
pub fn kurtosis(values: &[f64]) -> f64 {
    let m = mean(values);
    let n = values.len() as f64;
    let m2 = sum(values.iter().map(|x| (x - m).powi(2))) / n;
    let m4 = sum(values.iter().map(|x| (x - m).powi(4))) / n;
    m4 / (m2 * m2)
}
