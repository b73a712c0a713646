//! Bjøntegaard delta rate and delta quality with the classic cubic fit.

use alloc::string::String;
use alloc::vec::Vec;

use super::MetricsError;

/// Ordered (rate in bpp, quality) samples for one coding configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RdCurve {
    pub label: String,
    points: Vec<(f64, f64)>,
}

impl RdCurve {
    /// Sorts by rate; rates must be positive and distinct, qualities finite.
    pub fn new(label: impl Into<String>, mut points: Vec<(f64, f64)>) -> Result<Self, MetricsError> {
        if points.iter().any(|&(r, q)| !(r > 0.0) || !r.is_finite() || !q.is_finite()) {
            return Err(MetricsError::InvalidCurve("rates must be positive and qualities finite"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(MetricsError::InvalidCurve("rates must be strictly increasing"));
        }
        Ok(Self { label: label.into(), points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn scale_rates(&self, k: f64) -> Result<Self, MetricsError> {
        Self::new(self.label.clone(), self.points.iter().map(|&(r, q)| (r * k, q)).collect())
    }
}

/// Cubic in the normalised variable `(x - centre) / scale`.
#[derive(Debug, Clone, Copy)]
struct Cubic {
    coeffs: [f64; 4],
    centre: f64,
    scale: f64,
}

impl Cubic {
    fn fit(xs: &[f64], ys: &[f64]) -> Result<Self, MetricsError> {
        if xs.len() < 4 {
            return Err(MetricsError::InvalidCurve("at least four points are required"));
        }
        let mut sorted: Vec<f64> = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(MetricsError::DegenerateFit);
        }
        let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
        let centre = 0.5 * (lo + hi);
        let scale = 0.5 * (hi - lo);
        if !(scale > 0.0) {
            return Err(MetricsError::DegenerateFit);
        }
        // normal equations, [A | b]
        let mut m = [[0.0f64; 5]; 4];
        for (&x, &y) in xs.iter().zip(ys) {
            let t = (x - centre) / scale;
            let pow = [1.0, t, t * t, t * t * t];
            for i in 0..4 {
                for j in 0..4 {
                    m[i][j] += pow[i] * pow[j];
                }
                m[i][4] += pow[i] * y;
            }
        }
        let coeffs = solve4(m).ok_or(MetricsError::DegenerateFit)?;
        Ok(Self { coeffs, centre, scale })
    }

    /// Definite integral over x in [lo, hi].
    fn integral(&self, lo: f64, hi: f64) -> f64 {
        let anti = |x: f64| {
            let t = (x - self.centre) / self.scale;
            let c = &self.coeffs;
            t * (c[0] + t * (c[1] / 2.0 + t * (c[2] / 3.0 + t * c[3] / 4.0)))
        };
        self.scale * (anti(hi) - anti(lo))
    }
}

fn solve4(mut m: [[f64; 5]; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..4 {
            let f = m[row][col] / m[col][col];
            for k in col..5 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let tail: f64 = (row + 1..4).map(|k| m[row][k] * x[k]).sum();
        x[row] = (m[row][4] - tail) / m[row][row];
    }
    Some(x)
}

/// Average vertical gap `test - anchor` between the fitted curves over the
/// overlap of their x ranges.
fn average_gap(anchor: (&[f64], &[f64]), test: (&[f64], &[f64])) -> Result<f64, MetricsError> {
    let fa = Cubic::fit(anchor.0, anchor.1)?;
    let ft = Cubic::fit(test.0, test.1)?;
    let range = |xs: &[f64]| xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let (alo, ahi) = range(anchor.0);
    let (tlo, thi) = range(test.0);
    let lo = alo.max(tlo);
    let hi = ahi.min(thi);
    if !(hi > lo) {
        return Err(MetricsError::NoOverlap);
    }
    Ok((ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo))
}

fn split(curve: &RdCurve) -> (Vec<f64>, Vec<f64>) {
    curve.points.iter().map(|&(r, q)| (libm::log10(r), q)).unzip()
}

/// Average bitrate difference at equal quality, in percent. Negative means
/// `test` needs fewer bits than `anchor`.
pub fn bd_rate(anchor: &RdCurve, test: &RdCurve) -> Result<f64, MetricsError> {
    let (ar, aq) = split(anchor);
    let (tr, tq) = split(test);
    let avg = average_gap((&aq, &ar), (&tq, &tr))?;
    Ok((libm::pow(10.0, avg) - 1.0) * 100.0)
}

/// Average quality difference at equal rate (dB for PSNR curves).
pub fn bd_quality(anchor: &RdCurve, test: &RdCurve) -> Result<f64, MetricsError> {
    let (ar, aq) = split(anchor);
    let (tr, tq) = split(test);
    average_gap((&ar, &aq), (&tr, &tq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn anchor() -> RdCurve {
        RdCurve::new("anchor", vec![(0.05, 30.1), (0.11, 33.4), (0.22, 36.2), (0.41, 38.9)]).unwrap()
    }

    #[test]
    fn identical_curves() {
        let a = anchor();
        assert_eq!(bd_rate(&a, &a).unwrap(), 0.0);
        assert_eq!(bd_quality(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn halved_rates() {
        let a = anchor();
        let t = a.scale_rates(0.5).unwrap();
        assert!((bd_rate(&a, &t).unwrap() + 50.0).abs() < 0.01);
    }

    #[test]
    fn constant_quality_offset() {
        let a = anchor();
        let t = RdCurve::new("t", a.points().iter().map(|&(r, q)| (r, q + 1.0)).collect()).unwrap();
        assert!((bd_quality(&a, &t).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn no_overlap() {
        let a = anchor();
        let t = RdCurve::new("t", a.points().iter().map(|&(r, q)| (r, q + 20.0)).collect()).unwrap();
        assert_eq!(bd_rate(&a, &t), Err(MetricsError::NoOverlap));
    }

    #[test]
    fn duplicate_qualities() {
        let a = anchor();
        let t = RdCurve::new("t", vec![(0.1, 33.0), (0.2, 33.0), (0.3, 35.0), (0.4, 36.0)]).unwrap();
        assert_eq!(bd_rate(&a, &t), Err(MetricsError::DegenerateFit));
    }

    #[test]
    fn curve_validation() {
        assert!(RdCurve::new("x", vec![(0.0, 30.0)]).is_err());
        assert!(RdCurve::new("x", vec![(0.1, 30.0), (0.1, 31.0)]).is_err());
        let short = RdCurve::new("x", vec![(0.1, 30.0), (0.2, 31.0), (0.3, 32.0)]).unwrap();
        assert!(bd_rate(&anchor(), &short).is_err());
    }
}
