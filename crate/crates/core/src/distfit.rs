//! Lognormal fitting, quantiles, ECDFs and the Kolmogorov-Smirnov distance.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("no samples")]
    EmptyInput,
    #[error("sample {0} is not positive")]
    NonPositiveSample(f64),
    #[error("probability {0} outside (0, 1)")]
    DomainError(f64),
}

/// Parameters of a lognormal distribution in log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalFit {
    pub meanlog: f64,
    pub sdlog: f64,
    /// Number of samples the fit was estimated from (0 for a prescribed model).
    #[serde(default)]
    pub n: usize,
}

impl LognormalFit {
    pub fn new(meanlog: f64, sdlog: f64) -> Self {
        Self { meanlog, sdlog, n: 0 }
    }

    pub fn median(&self) -> f64 {
        self.meanlog.exp()
    }

    pub fn mean(&self) -> f64 {
        (self.meanlog + 0.5 * self.sdlog * self.sdlog).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let z = x.ln() - self.meanlog;
        if self.sdlog == 0.0 {
            return if z >= 0.0 { 1.0 } else { 0.0 };
        }
        normal_cdf(z / self.sdlog)
    }

    /// Left limit of the CDF; differs from [`Self::cdf`] only at the atom of
    /// a degenerate fit.
    pub fn cdf_left(&self, x: f64) -> f64 {
        if self.sdlog == 0.0 && x > 0.0 {
            return if x.ln() > self.meanlog { 1.0 } else { 0.0 };
        }
        self.cdf(x)
    }
}

/// Sorted samples with right-continuous cumulative probabilities `i/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfTable {
    pub points: Vec<(f64, f64)>,
}

impl EcdfTable {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.points.partition_point(|&(v, _)| v <= x);
        if k == 0 {
            0.0
        } else {
            self.points[k - 1].1
        }
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal quantile (Wichura's AS 241, relative error about 1e-16).
#[allow(clippy::excessive_precision)]
pub fn normal_quantile(p: f64) -> Result<f64, FitError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(FitError::DomainError(p));
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r
            + 45921.953931549871457)
            * r
            + 13731.693765509461125)
            * r
            + 1971.5909503065514427)
            * r
            + 133.14166789178437745)
            * r
            + 3.387132872796366608;
        let den = ((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r
            + 21213.794301586595867)
            * r
            + 5394.1960214247511077)
            * r
            + 687.1870074920579083)
            * r
            + 42.313330701600911252)
            * r
            + 1.0;
        return Ok(q * num / den);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        let num = ((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734;
        let den = ((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r
            + 0.14810397642748007459)
            * r
            + 0.68976733498510000455)
            * r
            + 1.6763848301838038494)
            * r
            + 2.05319162663775882187)
            * r
            + 1.0;
        num / den
    } else {
        let r = r - 5.0;
        let num = ((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772;
        let den = ((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r
            + 7.868691311456132591e-4)
            * r
            + 0.0148753612908506148525)
            * r
            + 0.13692988092273580531)
            * r
            + 0.59983220655588793769)
            * r
            + 1.0;
        num / den
    };
    Ok(if q < 0.0 { -x } else { x })
}

fn check_samples(samples: &[f64]) -> Result<(), FitError> {
    if samples.is_empty() {
        return Err(FitError::EmptyInput);
    }
    match samples.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
        Some(&bad) => Err(FitError::NonPositiveSample(bad)),
        None => Ok(()),
    }
}

/// Maximum-likelihood lognormal fit: mean and population stddev of `ln x`.
pub fn fit_lognormal(samples: &[f64]) -> Result<LognormalFit, FitError> {
    check_samples(samples)?;
    let logs: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
    let n = logs.len() as f64;
    let meanlog = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|l| (l - meanlog).powi(2)).sum::<f64>() / n;
    Ok(LognormalFit { meanlog, sdlog: var.sqrt(), n: samples.len() })
}

pub fn lognormal_quantile(p: f64, fit: &LognormalFit) -> Result<f64, FitError> {
    let z = normal_quantile(p)?;
    Ok((fit.meanlog + fit.sdlog * z).exp())
}

pub fn ecdf(samples: &[f64]) -> Result<EcdfTable, FitError> {
    if samples.is_empty() {
        return Err(FitError::EmptyInput);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let points = sorted.into_iter().enumerate().map(|(i, v)| (v, (i + 1) as f64 / n)).collect();
    Ok(EcdfTable { points })
}

/// Two-sided KS distance between the sample ECDF and the fitted model.
pub fn ks_statistic(samples: &[f64], fit: &LognormalFit) -> Result<f64, FitError> {
    check_samples(samples)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        d = d.max((i + 1) as f64 / n - fit.cdf(x)).max(fit.cdf_left(x) - i as f64 / n);
    }
    Ok(d.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, LogNormal};

    /// Quantile by bisection on the CDF; independent of the rational approximation.
    fn quantile_by_bisection(p: f64) -> f64 {
        if p > 0.5 {
            return -quantile_by_bisection(1.0 - p);
        }
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn quantile_matches_bisection_oracle() {
        for &p in &[1e-12, 1e-6, 0.001, 0.02, 0.1, 0.25, 0.5, 0.6, 0.9, 0.975, 0.999, 1.0 - 1e-9] {
            let z = normal_quantile(p).unwrap();
            assert!((z - quantile_by_bisection(p)).abs() < 1e-9, "p={p}");
        }
        assert!((normal_quantile(0.75).unwrap() - 0.6744897501960817).abs() < 1e-12);
        assert_eq!(normal_quantile(0.0), Err(FitError::DomainError(0.0)));
        assert_eq!(normal_quantile(1.0), Err(FitError::DomainError(1.0)));
    }

    #[test]
    fn fit_examples() {
        let e2 = 2f64.exp();
        let f = fit_lognormal(&[e2; 5]).unwrap();
        assert!((f.meanlog - 2.0).abs() < 1e-12 && f.sdlog < 1e-12);
        let f = fit_lognormal(&[1f64.exp(), 3f64.exp()]).unwrap();
        assert!((f.meanlog - 2.0).abs() < 1e-12 && (f.sdlog - 1.0).abs() < 1e-12);
        assert_eq!(fit_lognormal(&[]), Err(FitError::EmptyInput));
        assert_eq!(fit_lognormal(&[1.0, 0.0]), Err(FitError::NonPositiveSample(0.0)));
    }

    #[test]
    fn quantile_examples() {
        let fit = LognormalFit::new(5.16, 1.31);
        assert!((lognormal_quantile(0.5, &fit).unwrap() - 174.16).abs() < 0.01);
        assert!((lognormal_quantile(0.25, &fit).unwrap() - 72.0).abs() < 0.1);
        assert!((lognormal_quantile(0.75, &fit).unwrap() - 421.4).abs() < 0.1);
        assert_eq!(lognormal_quantile(0.5, &LognormalFit::new(1.5, 0.0)).unwrap(), 1.5f64.exp());
        assert!(lognormal_quantile(1.5, &fit).is_err());
    }

    #[test]
    fn ks_examples() {
        let fit = LognormalFit::new(5.16, 1.31);
        let n = 1000;
        let samples: Vec<f64> =
            (0..n).map(|i| lognormal_quantile((i as f64 + 0.5) / n as f64, &fit).unwrap()).collect();
        assert!(ks_statistic(&samples, &fit).unwrap() <= 0.001);
        let d = ks_statistic(&[fit.median()], &fit).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
        let low = lognormal_quantile(0.01, &fit).unwrap();
        assert!(ks_statistic(&[low / 1e6; 10], &fit).unwrap() >= 0.99);
    }

    #[test]
    fn ks_degenerate_model_is_a_step() {
        let fit = LognormalFit::new(0.0, 0.0);
        assert_eq!(ks_statistic(&[1.0], &fit).unwrap(), 0.0);
        assert_eq!(ks_statistic(&[0.5], &fit).unwrap(), 1.0);
    }

    #[test]
    fn ecdf_examples() {
        let t = ecdf(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(t.points, vec![(1.0, 1.0 / 3.0), (2.0, 2.0 / 3.0), (3.0, 1.0)]);
        assert_eq!(ecdf(&[7.0]).unwrap().points, vec![(7.0, 1.0)]);
        let t = ecdf(&[2.0, 2.0]).unwrap();
        assert_eq!(t.points, vec![(2.0, 0.5), (2.0, 1.0)]);
        assert_eq!(t.eval(2.0), 1.0);
        assert_eq!(t.eval(1.9), 0.0);
        assert_eq!(ecdf(&[]), Err(FitError::EmptyInput));
    }

    #[test]
    fn recovers_parameters_over_grid() {
        for (k, &(mu, sigma)) in [(1.0, 0.5), (3.5, 1.2), (6.0, 2.0), (5.16, 1.31)].iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
            let dist = LogNormal::new(mu, sigma).unwrap();
            let xs: Vec<f64> = (0..100_000).map(|_| dist.sample(&mut rng)).collect();
            let fit = fit_lognormal(&xs).unwrap();
            assert!((fit.meanlog - mu).abs() < 0.02, "{fit:?}");
            assert!((fit.sdlog - sigma).abs() < 0.02, "{fit:?}");
        }
    }

    proptest! {
        #[test]
        fn fit_is_scale_equivariant(xs in prop::collection::vec(0.01f64..1e4, 2..100), c in 0.01f64..100.0) {
            let a = fit_lognormal(&xs).unwrap();
            let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
            let b = fit_lognormal(&scaled).unwrap();
            prop_assert!((b.meanlog - a.meanlog - c.ln()).abs() < 1e-9);
            prop_assert!((b.sdlog - a.sdlog).abs() < 1e-9);
        }

        #[test]
        fn quantile_is_increasing(p in 0.0001f64..0.9998, dp in 1e-6f64..1e-4) {
            let fit = LognormalFit::new(5.16, 1.31);
            prop_assert!(lognormal_quantile(p + dp, &fit).unwrap() > lognormal_quantile(p, &fit).unwrap());
        }

        #[test]
        fn ks_is_scale_invariant(xs in prop::collection::vec(0.1f64..1e3, 1..60), c in 0.1f64..10.0) {
            let fit = LognormalFit::new(3.0, 1.0);
            let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
            let fit_c = LognormalFit::new(3.0 + c.ln(), 1.0);
            let d1 = ks_statistic(&xs, &fit).unwrap();
            let d2 = ks_statistic(&scaled, &fit_c).unwrap();
            prop_assert!((d1 - d2).abs() < 1e-9);
        }
    }
}
