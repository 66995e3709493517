use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn neumaier_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Neumaier::default();
    xs.into_iter().for_each(|x| acc.add(x));
    acc.value()
}

/// A statistic with its jackknife standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    /// Standardized distance to `predicted`; 0 when both error and gap vanish.
    pub fn z(&self, predicted: f64) -> f64 {
        let gap = self.value - predicted;
        if self.std_error > 0.0 {
            gap / self.std_error
        } else if gap.abs() <= 1e-12 * (1.0 + predicted.abs()) {
            0.0
        } else {
            f64::INFINITY.copysign(gap)
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    neumaier_sum(xs.iter().copied()) / xs.len() as f64
}

/// Unbiased sample covariance with the closed-form leave-one-out jackknife.
pub fn covariance(a: &[f64], b: &[f64]) -> Estimate {
    assert_eq!(a.len(), b.len());
    let r = a.len();
    assert!(r >= 2, "covariance needs at least two samples");
    let (ma, mb) = (mean(a), mean(b));
    let da: Vec<f64> = a.iter().map(|x| x - ma).collect();
    let db: Vec<f64> = b.iter().map(|x| x - mb).collect();
    let sab = neumaier_sum(da.iter().zip(&db).map(|(x, y)| x * y));
    let rf = r as f64;
    let full = sab / (rf - 1.0);
    if r == 2 {
        // Normal-theory error; the jackknife needs three samples.
        let saa = neumaier_sum(da.iter().map(|x| x * x));
        let sbb = neumaier_sum(db.iter().map(|y| y * y));
        return Estimate {
            value: full,
            std_error: (saa * sbb + sab * sab).sqrt(),
        };
    }
    // Removing sample k from centered data: S_ab - x_k y_k - x_k y_k/(r-1).
    let loo: Vec<f64> = da
        .iter()
        .zip(&db)
        .map(|(x, y)| (sab - x * y * rf / (rf - 1.0)) / (rf - 2.0))
        .collect();
    let lm = mean(&loo);
    let ss = neumaier_sum(loo.iter().map(|v| (v - lm) * (v - lm)));
    Estimate {
        value: full,
        std_error: ((rf - 1.0) / rf * ss).sqrt(),
    }
}

pub fn variance(a: &[f64]) -> Estimate {
    covariance(a, a)
}

/// Mean with its usual standard error.
pub fn mean_estimate(a: &[f64]) -> Estimate {
    let v = variance(a).value;
    Estimate {
        value: mean(a),
        std_error: (v / a.len() as f64).sqrt(),
    }
}

/// Sample skewness and excess kurtosis after centering.
pub fn skew_kurtosis(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    let n = xs.len() as f64;
    let m2 = neumaier_sum(xs.iter().map(|x| (x - m).powi(2))) / n;
    let m3 = neumaier_sum(xs.iter().map(|x| (x - m).powi(3))) / n;
    let m4 = neumaier_sum(xs.iter().map(|x| (x - m).powi(4))) / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Kolmogorov–Smirnov distance of the sample to the standard normal law.
pub fn ks_normal(xs: &[f64]) -> f64 {
    let normal = Normal::standard();
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Lag-1 autocorrelation of a sequence of replicate statistics.
pub fn lag1_correlation(xs: &[f64]) -> f64 {
    if xs.len() < 3 {
        return 0.0;
    }
    let m = mean(xs);
    let num = neumaier_sum(xs.windows(2).map(|w| (w[0] - m) * (w[1] - m)));
    let den = neumaier_sum(xs.iter().map(|x| (x - m) * (x - m)));
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Pearson χ² homogeneity test of two count vectors; returns `(statistic, p)`.
/// Cells empty in both samples are dropped.
pub fn chi2_homogeneity(a: &[u64], b: &[u64]) -> (f64, f64) {
    assert_eq!(a.len(), b.len());
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let total = na + nb;
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        cells += 1;
        let (ea, eb) = (na * col / total, nb * col / total);
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    if cells < 2 {
        return (0.0, 1.0);
    }
    let dist = ChiSquared::new((cells - 1) as f64).expect("positive degrees of freedom");
    (stat, 1.0 - dist.cdf(stat))
}

/// Weighted least squares fit `y = a + b x`; returns `(a, se(a), b)`.
pub fn weighted_line(x: &[f64], y: &[f64], se: &[f64]) -> (f64, f64, f64) {
    let w: Vec<f64> = se.iter().map(|s| if *s > 0.0 { 1.0 / (s * s) } else { 1e12 }).collect();
    let sw = neumaier_sum(w.iter().copied());
    let sx = neumaier_sum(w.iter().zip(x).map(|(w, x)| w * x));
    let sy = neumaier_sum(w.iter().zip(y).map(|(w, y)| w * y));
    let sxx = neumaier_sum(w.iter().zip(x).map(|(w, x)| w * x * x));
    let sxy = neumaier_sum(w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y));
    let det = sw * sxx - sx * sx;
    if x.len() < 2 || det.abs() < 1e-300 {
        let a = sy / sw;
        return (a, (1.0 / sw).sqrt(), 0.0);
    }
    let a = (sxx * sy - sx * sxy) / det;
    let b = (sw * sxy - sx * sy) / det;
    (a, (sxx / det).sqrt(), b)
}
