//! Goodness-of-fit helpers for the distributional properties.

/// Asymptotic Kolmogorov critical coefficient `c(α) = sqrt(-ln(α/2)/2)`.
pub fn ks_coefficient(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// Two-sample Kolmogorov–Smirnov statistic with optional sample weights.
///
/// Returns `(D, n_eff_a, n_eff_b)` where the effective sizes are
/// `(Σw)²/Σw²`.
pub fn ks_weighted(a: &[f64], wa: Option<&[f64]>, b: &[f64], wb: Option<&[f64]>) -> (f64, f64, f64) {
    fn prep(x: &[f64], w: Option<&[f64]>) -> (Vec<(f64, f64)>, f64) {
        let mut v: Vec<(f64, f64)> = match w {
            Some(w) => x.iter().copied().zip(w.iter().copied()).collect(),
            None => x.iter().map(|&v| (v, 1.0)).collect(),
        };
        v.sort_by(|p, q| p.0.total_cmp(&q.0));
        let s: f64 = v.iter().map(|p| p.1).sum();
        let s2: f64 = v.iter().map(|p| p.1 * p.1).sum();
        v.iter_mut().for_each(|p| p.1 /= s);
        (v, s * s / s2)
    }
    let (a, na) = prep(a, wa);
    let (b, nb) = prep(b, wb);
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb, mut d) = (0.0f64, 0.0f64, 0.0f64);
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(p), Some(q)) => p.0.min(q.0),
            (Some(p), None) => p.0,
            (None, Some(q)) => q.0,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i].0 == x {
            fa += a[i].1;
            i += 1;
        }
        while j < b.len() && b[j].0 == x {
            fb += b[j].1;
            j += 1;
        }
        d = d.max((fa - fb).abs());
    }
    (d, na, nb)
}

/// True when the two-sample KS test rejects equality at level `alpha`.
pub fn ks_two_sample_rejects(a: &[f64], b: &[f64], alpha: f64) -> bool {
    let (d, na, nb) = ks_weighted(a, None, b, None);
    d > ks_coefficient(alpha) * ((na + nb) / (na * nb)).sqrt()
}

/// Weighted variant: sample `a` reweighted by `wa` against plain sample `b`.
pub fn ks_reweighted_rejects(a: &[f64], wa: &[f64], b: &[f64], alpha: f64) -> bool {
    let (d, na, nb) = ks_weighted(a, Some(wa), b, None);
    d > ks_coefficient(alpha) * ((na + nb) / (na * nb)).sqrt()
}

/// Statistical test of the LLR symmetry `dP_a = e^{-w_a} dP_0`.
///
/// `pool` holds a statistic of equally many samples drawn under `v = 0` and
/// under `v = a`, with `pool_wa` their `w_a` entries; `given_a` is an
/// independent sample of the statistic under `v = a`. Under symmetry the
/// pool reweighted by `1/(1 + e^{w_a})` follows the `v = a` law. The
/// weights are bounded, so unlike direct `e^{-w_a}` reweighting the
/// effective sample size stays close to the pool size.
pub fn symmetry_rejects(pool: &[f64], pool_wa: &[f64], given_a: &[f64], alpha: f64) -> bool {
    let weights: Vec<f64> = pool_wa.iter().map(|&w| 1.0 / (1.0 + w.exp())).collect();
    ks_reweighted_rejects(pool, &weights, given_a, alpha)
}

/// Pearson chi-square statistic of observed counts against equal cells.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let e = n as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}

/// Upper `alpha` quantile of the standard normal, by bisection on `erfc`.
pub fn normal_upper_quantile(alpha: f64) -> f64 {
    let tail = |z: f64| 0.5 * libm::erfc(z / std::f64::consts::SQRT_2);
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Upper `alpha` critical value of χ² with `df` degrees of freedom
/// (Wilson–Hilferty cube approximation).
pub fn chi_square_critical(df: usize, alpha: f64) -> f64 {
    let k = df as f64;
    let c = 2.0 / (9.0 * k);
    k * (1.0 - c + normal_upper_quantile(alpha) * c.sqrt()).powi(3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    #[test]
    fn ks_detects_shift_and_accepts_same() {
        let mut rng = stream_rng(1, 0);
        let a: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let c: Vec<f64> = (0..5000).map(|_| rng.random::<f64>() + 0.1).collect();
        assert!(!ks_two_sample_rejects(&a, &b, 0.01));
        assert!(ks_two_sample_rejects(&a, &c, 0.01));
        assert!((ks_coefficient(0.05) - 1.358).abs() < 1e-3);
    }

    #[test]
    fn chi_square_of_equal_counts_is_zero() {
        assert_eq!(chi_square_uniform(&[5, 5, 5]), 0.0);
        assert!((chi_square_uniform(&[4, 6]) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn critical_values_match_tables() {
        assert!((normal_upper_quantile(0.01) - 2.326348).abs() < 1e-5);
        assert!((normal_upper_quantile(0.5)).abs() < 1e-12);
        // tabulated 0.99 quantiles
        for (df, v) in [(2, 9.2103), (5, 15.0863), (10, 23.2093), (41, 64.950), (100, 135.807), (167, 212.431)] {
            let c = chi_square_critical(df, 0.01);
            assert!((c - v).abs() / v < 0.01, "df={df}: {c} vs {v}");
        }
    }
}
