//! Shared statistics: goodness-of-fit tests, regression and simple summaries.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Normal, Poisson};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    let ss = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    (m, ss / (xs.len() - 1) as f64)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Standard error of a binomial proportion.
pub fn binomial_stderr(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Survival function of the Kolmogorov distribution. The alternating series
/// 2 Σ (-1)^{j-1} e^{-2 j² λ²} converges fast only for large λ; for small λ
/// the theta-transformed CDF series is used instead.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // CDF = (√(2π)/λ) Σ e^{-(2j-1)² π² / (8λ²)}.
        let mut cdf = 0.0;
        for j in 1..=20 {
            let m = (2 * j - 1) as f64;
            cdf += (-m * m * std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / lambda;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic KS p-value with the finite-sample correction factor
/// (√N + 0.12 + 0.11/√N).
pub fn ks_pvalue(statistic: f64, n_effective: f64) -> f64 {
    let sqrt_n = n_effective.sqrt();
    kolmogorov_sf(statistic * (sqrt_n + 0.12 + 0.11 / sqrt_n))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub samples: usize,
}

/// One-sample KS test against an arbitrary CDF.
pub fn ks_test_cdf<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> KsResult {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(((i + 1) as f64 / n - f).abs());
        d = d.max((f - i as f64 / n).abs());
    }
    KsResult {
        statistic: d,
        p_value: ks_pvalue(d, n),
        samples: sorted.len(),
    }
}

/// One-sample KS test against N(mean, var).
pub fn ks_test_normal(xs: &[f64], mean: f64, var: f64) -> KsResult {
    let normal = Normal::new(mean, var.sqrt()).expect("variance must be positive");
    ks_test_cdf(xs, |x| normal.cdf(x))
}

/// Two-sample KS test; p-value via the asymptotic law at the effective size.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n, m) = (a.len(), b.len());
    let mut i = 0;
    let mut j = 0;
    let mut d = 0.0f64;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let n_eff = (n as f64 * m as f64) / (n + m) as f64;
    (d, ks_pvalue(d, n_eff))
}

/// Chi-square goodness of fit of observed counts against Poisson(lambda).
/// Bins with expected count below 5 are pooled into their neighbors.
pub fn chi_square_poisson_gof(counts: &[usize], lambda: f64) -> (f64, usize, f64) {
    let n = counts.len() as f64;
    let max_count = *counts.iter().max().unwrap_or(&0);
    let pois = Poisson::new(lambda).expect("lambda must be positive");
    let mut observed = vec![0.0f64; max_count + 2];
    for &c in counts {
        observed[c] += 1.0;
    }
    let mut expected = vec![0.0f64; max_count + 2];
    let mut tail = 1.0f64;
    for k in 0..=max_count {
        let p = pois.pmf(k as u64);
        expected[k] = n * p;
        tail -= p;
    }
    expected[max_count + 1] = n * tail.max(0.0);

    // Pool adjacent cells until every pooled cell has expectation ≥ 5. A
    // cell also flushes once it holds substantial observed mass, so gross
    // misfits cannot hide inside one giant pooled cell (a Poisson cell with
    // expectation < 5 reaches 25 observations with negligible probability,
    // leaving the null calibration intact).
    let mut pooled_obs = Vec::new();
    let mut pooled_exp = Vec::new();
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    for k in 0..expected.len() {
        acc_o += observed[k];
        acc_e += expected[k];
        if acc_e >= 5.0 || acc_o >= 25.0 {
            pooled_obs.push(acc_o);
            pooled_exp.push(acc_e.max(1e-12));
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 {
        if let (Some(o), Some(e)) = (pooled_obs.last_mut(), pooled_exp.last_mut()) {
            *o += acc_o;
            *e += acc_e;
        } else {
            pooled_obs.push(acc_o);
            pooled_exp.push(acc_e);
        }
    }
    let chi2: f64 = pooled_obs
        .iter()
        .zip(&pooled_exp)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = pooled_obs.len().saturating_sub(1).max(1);
    let dist = ChiSquared::new(dof as f64).unwrap();
    (chi2, dof, 1.0 - dist.cdf(chi2))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

/// Ordinary least squares on (x, y) pairs, with the usual slope standard error.
pub fn ols(points: &[(f64, f64)]) -> LineFit {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum();
    let dof = (points.len().saturating_sub(2)).max(1) as f64;
    let slope_se = (ss_res / dof / sxx).sqrt();
    LineFit { slope, intercept, slope_se }
}

/// Normal CDF, exposed for prediction anchoring in reports.
pub fn normal_cdf(x: f64, mean: f64, var: f64) -> f64 {
    Normal::new(mean, var.sqrt()).unwrap().cdf(x)
}
