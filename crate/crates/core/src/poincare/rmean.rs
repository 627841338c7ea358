use crate::error::{LabError, Result};

/// Minimizer `λ*` of `Σ wᵢ |vᵢ - λ|^r` for `r ≥ 1`.
///
/// `r = 1` returns the smallest weighted median, `r = 2` the weighted mean;
/// otherwise bisection on the derivative over `[min v, max v]`.
pub fn r_mean(values: &[f64], weights: &[f64], r: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(LabError::InvalidArgument("r-mean of an empty sample".into()));
    }
    if values.len() != weights.len() {
        return Err(LabError::InvalidArgument("values and weights differ in length".into()));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(LabError::InvalidArgument("weights must be positive".into()));
    }
    if !(r >= 1.0) {
        return Err(LabError::InvalidArgument(format!("exponent r = {r} must be at least 1")));
    }
    if r == 1.0 {
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let half = 0.5 * weights.iter().sum::<f64>();
        let mut acc = 0.0;
        for &i in &idx {
            acc += weights[i];
            if acc >= half {
                return Ok(values[i]);
            }
        }
        return Ok(values[idx[idx.len() - 1]]);
    }
    if r == 2.0 {
        let wsum: f64 = weights.iter().sum();
        return Ok(values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / wsum);
    }
    // the derivative Σ wᵢ sgn(λ - vᵢ)|λ - vᵢ|^{r-1} is increasing; bisect on its sign
    let slope = |l: f64| {
        values.iter().zip(weights).map(|(v, w)| w * (l - v).signum() * (l - v).abs().powf(r - 1.0)).sum::<f64>()
    };
    let (mut a, mut b) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    loop {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if slope(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_cases() {
        assert_eq!(r_mean(&[1.0, 2.0, 3.0], &[1.0; 3], 2.0).unwrap(), 2.0);
        assert_eq!(r_mean(&[0.0, 0.0, 10.0], &[1.0; 3], 1.0).unwrap(), 0.0);
        assert!((r_mean(&[0.0, 1.0], &[1.0; 2], 4.0).unwrap() - 0.5).abs() < 1e-12);
        assert!(r_mean(&[], &[], 2.0).is_err());
    }

    #[test]
    fn bisection_agrees_with_mean_at_two() {
        let v = [0.3, -1.2, 4.0, 2.5];
        let w = [1.0, 2.0, 0.5, 1.5];
        let direct = r_mean(&v, &w, 2.0).unwrap();
        let near = r_mean(&v, &w, 2.0 + 1e-9).unwrap();
        assert!((direct - near).abs() < 1e-7);
    }
}
