use crate::error::{Error, Result};

/// Spread of the segment slopes in log-log coordinates above which only the
/// three smallest ε enter the fit.
pub const CURVATURE_THRESHOLD: f64 = 0.2;

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Least-squares slope of log(error) against log(ε).
///
/// Points are ordered by decreasing ε. With more than three points and a
/// segment-slope spread above [`CURVATURE_THRESHOLD`], the fit uses the three
/// smallest ε only.
pub fn fit_rate(errors: &[f64], epsilons: &[f64]) -> Result<f64> {
    if errors.len() != epsilons.len() {
        return Err(Error::param("errors", format!("{} errors for {} epsilons", errors.len(), epsilons.len())));
    }
    if errors.len() < 3 {
        return Err(Error::Insufficient(format!("rate fit needs at least 3 points, got {}", errors.len())));
    }
    if errors.iter().chain(epsilons).any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::param("errors", "all errors and epsilons must be positive and finite"));
    }
    let mut points: Vec<(f64, f64)> = epsilons.iter().zip(errors).map(|(e, r)| (e.ln(), r.ln())).collect();
    points.sort_by(|a, b| b.0.total_cmp(&a.0));
    if points.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::param("epsilons", "values must be distinct"));
    }
    let segments: Vec<f64> = points.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    let lo = segments.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = segments.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let used = if points.len() > 3 && hi - lo > CURVATURE_THRESHOLD { &points[points.len() - 3..] } else { &points[..] };
    Ok(slope(used))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const EPS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

    #[test]
    fn power_laws() {
        for (p, want) in [(1.0, 1.0), (0.5, 0.5), (0.0, 0.0)] {
            let errors: Vec<f64> = EPS.iter().map(|e| 3.0 * e.powf(p)).collect();
            assert_abs_diff_eq!(fit_rate(&errors, &EPS).unwrap(), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn order_of_points_is_irrelevant() {
        let errors: Vec<f64> = EPS.iter().map(|e| e.powf(0.7)).collect();
        let mut rev_e = EPS.to_vec();
        let mut rev_r = errors.clone();
        rev_e.reverse();
        rev_r.reverse();
        assert_abs_diff_eq!(fit_rate(&rev_r, &rev_e).unwrap(), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn curved_data_uses_the_asymptotic_points() {
        // pre-asymptotic bump at the largest ε
        let errors = [1.0, 0.1 * 0.1, 0.1 * 0.05, 0.1 * 0.025];
        assert_abs_diff_eq!(fit_rate(&errors, &EPS).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_rate(&[1.0, 2.0], &[0.1, 0.05]).is_err());
        assert!(fit_rate(&[1.0, 2.0, 3.0], &[0.1, 0.05]).is_err());
        assert!(fit_rate(&[1.0, 0.0, 3.0], &[0.1, 0.05, 0.025]).is_err());
        assert!(fit_rate(&[1.0, 2.0, 3.0], &[0.1, 0.1, 0.025]).is_err());
        assert!(fit_rate(&[1.0, f64::NAN, 3.0], &[0.1, 0.05, 0.025]).is_err());
    }
}
