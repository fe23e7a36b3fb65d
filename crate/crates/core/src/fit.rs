//! Least-squares fits and summary statistics shared by the experiments.

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub slope_err: f64,
}

/// Ordinary least squares y = slope * x + intercept.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "linear fit needs 2 points, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all abscissae equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_err = if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_err,
    })
}

/// Exponent p of y = c x^p, fitted in log-log space.
pub fn power_law_exponent(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.iter().chain(y).any(|v| *v <= 0.0 || !v.is_finite()) {
        return Err(Error::domain("power-law fit needs positive finite data"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    /// Decay rate per time unit.
    pub gamma: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

/// Minimizes a one-dimensional function on [lo, hi]: coarse grid, then golden section
/// around the best grid point.
fn minimize_1d(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    const GRID: usize = 400;
    let step = (hi - lo) / GRID as f64;
    let best = (0..=GRID)
        .map(|k| lo + step * k as f64)
        .map(|g| (g, f(g)))
        .fold(
            (lo, f64::INFINITY),
            |acc, p| if p.1 < acc.1 { p } else { acc },
        );
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

/// Local maxima of |y - 1/2|-style envelopes: indices of strict local maxima of `y`.
fn local_maxima(y: &[f64]) -> Vec<usize> {
    (1..y.len().saturating_sub(1))
        .filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1])
        .collect()
}

/// Envelope fit A e^{-gamma t} + c to the local maxima of |y - center|, where `y` is an
/// oscillating series. The series must contain at least three oscillation periods (six
/// extrema of |y - center|).
pub fn fit_envelope_decay(t: &[f64], y: &[f64], center: f64) -> Result<DecayFit> {
    if t.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: t.len(),
            found: y.len(),
        });
    }
    let dev: Vec<f64> = y.iter().map(|v| (v - center).abs()).collect();
    let peaks = local_maxima(&dev);
    if peaks.len() < 6 {
        return Err(Error::InsufficientData(format!(
            "envelope fit needs three oscillation periods, found {} extrema",
            peaks.len()
        )));
    }
    let tp: Vec<f64> = peaks.iter().map(|&i| t[i]).collect();
    let yp: Vec<f64> = peaks.iter().map(|&i| dev[i]).collect();
    let span = tp.last().unwrap() - tp[0];
    // For fixed gamma the model is linear in (A, c).
    let solve = |g: f64| -> (f64, f64, f64) {
        let e: Vec<f64> = tp.iter().map(|t| (-g * t).exp()).collect();
        let n = e.len() as f64;
        let (se, sy) = (e.iter().sum::<f64>(), yp.iter().sum::<f64>());
        let see: f64 = e.iter().map(|v| v * v).sum();
        let sey: f64 = e.iter().zip(&yp).map(|(a, b)| a * b).sum();
        let det = n * see - se * se;
        let (a, c) = if det.abs() < 1e-300 {
            (0.0, sy / n)
        } else {
            ((n * sey - se * sy) / det, (see * sy - se * sey) / det)
        };
        let rss: f64 = e
            .iter()
            .zip(&yp)
            .map(|(ei, yi)| (yi - a * ei - c).powi(2))
            .sum();
        (a, c, rss)
    };
    let gamma = minimize_1d(0.0, 20.0 / span, |g| solve(g).2);
    let (amplitude, offset, rss) = solve(gamma);
    let mean = yp.iter().sum::<f64>() / yp.len() as f64;
    let rss_flat: f64 = yp.iter().map(|v| (v - mean).powi(2)).sum();
    // A decay that explains less than half of the envelope's variance is not resolved.
    if amplitude <= 0.0 || rss > 0.5 * rss_flat {
        return Ok(DecayFit {
            gamma: 0.0,
            amplitude: 0.0,
            offset: mean,
            residual: (rss_flat / yp.len() as f64).sqrt(),
        });
    }
    Ok(DecayFit {
        gamma,
        amplitude,
        offset,
        residual: (rss / yp.len() as f64).sqrt(),
    })
}

/// Decay of a noisy oscillation measured against its noise-free reference: fits
/// y_noisy(t) = e^{-gamma t} y_ideal(t) in least squares, with both series already centered.
pub fn fit_reference_decay(t: &[f64], noisy: &[f64], ideal: &[f64]) -> Result<DecayFit> {
    if t.len() != noisy.len() || t.len() != ideal.len() {
        return Err(Error::DimensionMismatch {
            expected: t.len(),
            found: noisy.len().min(ideal.len()),
        });
    }
    if t.len() < 3 {
        return Err(Error::InsufficientData(
            "reference fit needs 3 points".into(),
        ));
    }
    let span = t.last().unwrap() - t[0];
    let rss = |g: f64| -> f64 {
        t.iter()
            .zip(noisy)
            .zip(ideal)
            .map(|((t, y), r)| (y - (-g * t).exp() * r).powi(2))
            .sum()
    };
    let gamma = minimize_1d(0.0, 20.0 / span.max(1e-12), rss);
    Ok(DecayFit {
        gamma,
        amplitude: 1.0,
        offset: 0.0,
        residual: (rss(gamma) / t.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!(f.slope_err < 1e-12);
        assert!(linear_fit(&[1.0], &[1.0]).is_err());
        assert!(linear_fit(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-2.0)).collect();
        assert!((power_law_exponent(&x, &y).unwrap().slope + 2.0).abs() < 1e-12);
    }

    #[test]
    fn synthetic_damped_cosine() {
        let t: Vec<f64> = (0..400).map(|k| k as f64 * 0.25).collect();
        let y: Vec<f64> = t
            .iter()
            .map(|t| 0.5 + (-0.05 * t).exp() * (0.2 * t).cos())
            .collect();
        let f = fit_envelope_decay(&t, &y, 0.5).unwrap();
        assert!((f.gamma - 0.05).abs() < 0.05 * 0.05, "gamma {}", f.gamma);
    }

    #[test]
    fn undamped_series_gives_zero_rate() {
        let t: Vec<f64> = (0..200).map(|k| k as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| 0.5 + 0.45 * (0.3 * t).cos()).collect();
        let f = fit_envelope_decay(&t, &y, 0.5).unwrap();
        assert!(f.gamma < 1e-3, "gamma {}", f.gamma);
        let r: Vec<f64> = y.iter().map(|v| v - 0.5).collect();
        assert!(fit_reference_decay(&t, &r, &r).unwrap().gamma < 1e-6);
    }

    #[test]
    fn too_short_series_rejected() {
        let t: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| (0.3 * t).cos()).collect();
        assert!(matches!(
            fit_envelope_decay(&t, &y, 0.0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn reference_fit_recovers_rate() {
        let t: Vec<f64> = (0..181).map(|k| k as f64).collect();
        let ideal: Vec<f64> = t.iter().map(|t| 0.45 * (0.07 * t).cos()).collect();
        let noisy: Vec<f64> = t
            .iter()
            .zip(&ideal)
            .map(|(t, r)| (-0.004 * t).exp() * r)
            .collect();
        let f = fit_reference_decay(&t, &noisy, &ideal).unwrap();
        assert!((f.gamma - 0.004).abs() < 1e-6);
    }

    #[test]
    fn stderr() {
        let (m, e) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((e - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
    }
}
