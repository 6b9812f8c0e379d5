//! Statistical and algebraic verification: empirical-vs-exact distribution
//! comparison, the position-basis normalization check, and scaling
//! measurements of the sampler.

use std::collections::HashMap;
use std::time::Instant;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::linalg::{hafnian, submatrix_wx, ComplexMatrix, HafnianMode, PositionString};
use crate::marginal::{normalization_f, MarginalMode};
use crate::sampler::{sample_configuration, SampleRecord};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Expected-count threshold below which chi-square cells are pooled.
pub const CHI2_POOL_THRESHOLD: f64 = 5.0;

/// Comparison of an empirical sample set against an exact distribution.
#[derive(Debug, Clone, Serialize)]
pub struct DistributionReport {
    pub tvd: f64,
    pub chi2_stat: f64,
    pub chi2_pvalue: f64,
    pub sample_count: usize,
    pub support_size: usize,
    /// Binned counts over `-log p` of each sample's exact probability.
    pub log_prob_histogram: Vec<HistogramBin>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
}

impl DistributionReport {
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,count\n");
        for b in &self.log_prob_histogram {
            out.push_str(&format!("{},{},{}\n", b.bin_left, b.bin_right, b.count));
        }
        out
    }
}

/// Compares sampled configurations to an exact probability table.
///
/// Computes the total variation distance, a Pearson chi-square statistic
/// with cells below [`CHI2_POOL_THRESHOLD`] expected counts pooled, and a
/// histogram of `-log p` over the drawn outcomes.
pub fn compare_to_exact(
    samples: &[SampleRecord],
    exact: &[(Vec<usize>, f64)],
) -> Result<DistributionReport> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no samples to compare".into()));
    }
    let n = samples[0].n;
    let m = samples[0].s.len();
    for rec in samples {
        if rec.n != n || rec.s.len() != m {
            return Err(Error::Shape(
                "samples disagree on photon number or mode count".into(),
            ));
        }
    }
    let total = samples.len() as f64;
    let exact_map: HashMap<&[usize], f64> =
        exact.iter().map(|(s, p)| (s.as_slice(), *p)).collect();
    let mut counts: HashMap<&[usize], usize> = HashMap::new();
    for rec in samples {
        if !exact_map.contains_key(rec.s.as_slice()) {
            return Err(Error::Shape(format!(
                "sampled configuration {:?} missing from exact table",
                rec.s
            )));
        }
        *counts.entry(rec.s.as_slice()).or_insert(0) += 1;
    }

    let mut tvd = 0.0;
    for (s, p) in exact {
        let emp = counts.get(s.as_slice()).copied().unwrap_or(0) as f64 / total;
        tvd += (emp - p).abs();
    }
    tvd /= 2.0;

    // Pearson chi-square with pooling of low-expectation cells.
    let mut pooled_obs = 0.0f64;
    let mut pooled_exp = 0.0f64;
    let mut chi2 = 0.0f64;
    let mut cells = 0usize;
    for (s, p) in exact {
        let expected = p * total;
        let observed = counts.get(s.as_slice()).copied().unwrap_or(0) as f64;
        if expected < CHI2_POOL_THRESHOLD {
            pooled_obs += observed;
            pooled_exp += expected;
        } else {
            chi2 += (observed - expected).powi(2) / expected;
            cells += 1;
        }
    }
    if pooled_exp > 0.0 {
        chi2 += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        cells += 1;
    }
    let dof = cells.saturating_sub(1).max(1) as f64;
    let chi2_pvalue = 1.0 - ChiSquared::new(dof).expect("dof >= 1").cdf(chi2);

    // Histogram of -log p over the drawn outcomes, bin width 0.5.
    let width = 0.5f64;
    let mut bins: HashMap<i64, usize> = HashMap::new();
    for rec in samples {
        let p = exact_map[rec.s.as_slice()];
        let neg_log = if p > 0.0 { -p.ln() } else { f64::INFINITY };
        let idx = (neg_log / width).floor() as i64;
        *bins.entry(idx).or_insert(0) += 1;
    }
    let mut log_prob_histogram: Vec<HistogramBin> = bins
        .into_iter()
        .map(|(idx, count)| HistogramBin {
            bin_left: idx as f64 * width,
            bin_right: (idx + 1) as f64 * width,
            count,
        })
        .collect();
    log_prob_histogram.sort_by(|a, b| a.bin_left.partial_cmp(&b.bin_left).unwrap());

    Ok(DistributionReport {
        tvd,
        chi2_stat: chi2,
        chi2_pvalue,
        sample_count: samples.len(),
        support_size: exact.len(),
        log_prob_histogram,
    })
}

/// Verifies the position-basis normalization
/// `sum over x in [m]^n of |Haf(W_x)|^2 = f_n` to relative `1e-9`.
pub fn check_normalization(w: &ComplexMatrix, n: usize, m: usize) -> Result<bool> {
    if (m as f64).powi(n as i32) > 1e7 {
        return Err(Error::GuardExceeded(format!(
            "normalization check would sum {}^{n} terms",
            m
        )));
    }
    if w.rows() != m {
        return Err(Error::Shape(format!("W is {}x{} but m = {m}", w.rows(), w.cols())));
    }
    let f_n = normalization_f(n, m)?.value();
    let mut digits = vec![1usize; n];
    let mut total = 0.0f64;
    loop {
        let x = PositionString::new(digits.clone());
        let wx = submatrix_wx(w, &x)?;
        total += hafnian(&wx, HafnianMode::Fast)?.norm_sqr();
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok((total - f_n).abs() <= 1e-9 * f_n);
            }
            digits[pos] += 1;
            if digits[pos] <= m {
                break;
            }
            digits[pos] = 1;
            pos += 1;
        }
    }
}

/// Per-photon-number timing of the configuration sampler.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub m: usize,
    pub mean_wall_time_s: f64,
    /// Nominal kernel cost: Hafnian and permanent invocations weighted by
    /// their input sizes' canonical operation counts.
    pub operation_estimate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub mode: String,
    pub points: Vec<ScalingPoint>,
    /// Least-squares slope of `log2(time)` against `n`; `None` with fewer
    /// than two points.
    pub fitted_exponent: Option<f64>,
    /// The analytic per-photon exponents reported alongside, not asserted.
    pub poly_space_bound: f64,
    pub exp_space_bound: f64,
    pub partial: bool,
}

/// Times `sample_configuration` across photon numbers with `m` given by
/// `m_rule`, and fits the growth exponent.
pub fn bench_scaling(
    n_list: &[usize],
    m_rule: impl Fn(usize) -> usize,
    mode: MarginalMode,
    repetitions: usize,
    seed: u64,
) -> Result<ScalingReport> {
    if n_list.is_empty() {
        return Err(Error::InvalidParameter("empty photon-number list".into()));
    }
    let mut points = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let m = m_rule(n);
        let im = crate::linalg::haar_unitary(m, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
        let start = Instant::now();
        for _ in 0..repetitions.max(1) {
            sample_configuration(&im.w, n, &mut rng, mode)?;
        }
        let mean = start.elapsed().as_secs_f64() / repetitions.max(1) as f64;
        points.push(ScalingPoint {
            n,
            m,
            mean_wall_time_s: mean,
            operation_estimate: nominal_operation_count(n, m),
        });
    }
    let fitted_exponent = fit_log2_slope(&points);
    Ok(ScalingReport {
        mode: crate::sampler::mode_tag(mode).to_string(),
        points,
        fitted_exponent,
        poly_space_bound: 8.0 / 3.0,
        exp_space_bound: 5.0 / 2.0,
        partial: n_list.len() < 2,
    })
}

/// Counts the decomposition's kernel calls weighted by nominal costs
/// (`j^3 2^j` per Hafnian of `2j` vertices, `mu` per delta-permanent),
/// summed over the full enumeration ranges. Wall-clock independent.
fn nominal_operation_count(n: usize, m: usize) -> f64 {
    let mut total = 0.0f64;
    let binom = |a: usize, b: usize| -> f64 {
        if b > a {
            return 0.0;
        }
        let mut c = 1.0f64;
        for i in 0..b {
            c = c * (a - i) as f64 / (b - i) as f64;
        }
        c
    };
    for k in 1..=n {
        let j_min = k.saturating_sub(n / 2);
        for j1 in j_min..=(k / 2) {
            for j2 in j_min..=(k / 2) {
                let combos = binom(k, 2 * j1) * binom(k, 2 * j2);
                let haf_cost = |j: usize| -> f64 {
                    if j == 0 {
                        1.0
                    } else {
                        (j as f64).powi(3) * (2.0f64).powi(j as i32)
                    }
                };
                let outer = combos * (haf_cost(j1) + haf_cost(j2));
                let mut inner = 0.0f64;
                let lo = (3 * k as i64 - 2 * (j1 + j2) as i64 - n as i64).max(0);
                let hi = k as i64 - 2 * j1.max(j2) as i64;
                let mut mu = lo;
                if (mu - k as i64).rem_euclid(2) != 0 {
                    mu += 1;
                }
                while mu <= hi {
                    let muu = mu as usize;
                    let e1 = (k - 2 * j1 - muu) / 2;
                    let e2 = (k - 2 * j2 - muu) / 2;
                    inner += binom(k - 2 * j1, muu)
                        * binom(k - 2 * j2, muu)
                        * (muu as f64 + haf_cost(e1) + haf_cost(e2));
                    mu += 2;
                }
                total += outer + combos * inner;
            }
        }
    }
    total * m as f64
}

fn fit_log2_slope(points: &[ScalingPoint]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let ys: Vec<f64> = points
        .iter()
        .map(|p| p.mean_wall_time_s.max(1e-12).log2())
        .collect();
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::haar_unitary;
    use crate::sampler::ExactTable;
    use rand::Rng;

    fn exact_pairs(table: &ExactTable) -> Vec<(Vec<usize>, f64)> {
        table
            .entries()
            .iter()
            .map(|(c, p)| (c.occupations().to_vec(), *p))
            .collect()
    }

    fn resample_records(table: &ExactTable, count: usize, seed: u64) -> Vec<SampleRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let config = table.sample(&mut rng).clone();
                SampleRecord {
                    seed,
                    n: table.n,
                    s: config.occupations().to_vec(),
                    x: Vec::new(),
                    mode: "exact-resample".into(),
                    wall_time_s: 0.0,
                }
            })
            .collect()
    }

    #[test]
    fn self_resampling_passes_chi_square() {
        let im = haar_unitary(4, 1).unwrap();
        let table = ExactTable::build(&im.w, 4, 4).unwrap();
        let exact = exact_pairs(&table);
        let samples = resample_records(&table, 100_000, 7);
        let report = compare_to_exact(&samples, &exact).unwrap();
        assert!(report.chi2_pvalue > 0.001, "p={}", report.chi2_pvalue);
        assert!(report.tvd < 0.02, "tvd={}", report.tvd);
    }

    #[test]
    fn chi_square_calibration_rarely_rejects() {
        let im = haar_unitary(4, 2).unwrap();
        let table = ExactTable::build(&im.w, 4, 4).unwrap();
        let exact = exact_pairs(&table);
        let mut rejections = 0;
        for rep in 0..100u64 {
            let samples = resample_records(&table, 20_000, 1000 + rep);
            let report = compare_to_exact(&samples, &exact).unwrap();
            if report.chi2_pvalue <= 0.001 {
                rejections += 1;
            }
        }
        assert!(rejections <= 1, "{rejections} rejections in 100 runs");
    }

    #[test]
    fn uniform_generator_is_rejected() {
        let im = haar_unitary(4, 3).unwrap();
        let table = ExactTable::build(&im.w, 4, 4).unwrap();
        let exact = exact_pairs(&table);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let samples: Vec<SampleRecord> = (0..20_000)
            .map(|_| {
                let idx = rng.gen_range(0..table.entries().len());
                SampleRecord {
                    seed: 9,
                    n: 4,
                    s: table.entries()[idx].0.occupations().to_vec(),
                    x: Vec::new(),
                    mode: "uniform".into(),
                    wall_time_s: 0.0,
                }
            })
            .collect();
        let report = compare_to_exact(&samples, &exact).unwrap();
        assert!(report.chi2_pvalue <= 0.001, "p={}", report.chi2_pvalue);
    }

    #[test]
    fn mismatched_samples_are_rejected() {
        let a = SampleRecord {
            seed: 0,
            n: 2,
            s: vec![2, 0],
            x: vec![1, 1],
            mode: "poly".into(),
            wall_time_s: 0.0,
        };
        let b = SampleRecord { n: 4, s: vec![4, 0], ..a.clone() };
        assert!(compare_to_exact(&[a, b], &[(vec![2, 0], 1.0)]).is_err());
    }

    #[test]
    fn normalization_passes_for_haar_w() {
        for (n, m, seed) in [(2usize, 3usize, 1u64), (4, 4, 2), (4, 3, 3)] {
            let im = haar_unitary(m, seed).unwrap();
            assert!(check_normalization(&im.w, n, m).unwrap(), "n={n} m={m}");
        }
    }

    #[test]
    fn normalization_fails_for_non_unitary() {
        use num_complex::Complex64;
        let w = ComplexMatrix::from_fn(3, 3, |i, j| {
            Complex64::new(0.5 * (i + j) as f64, 0.1)
        });
        assert!(!check_normalization(&w, 2, 3).unwrap());
    }

    #[test]
    fn normalization_guard_refuses() {
        let im = haar_unitary(20, 1).unwrap();
        assert!(matches!(
            check_normalization(&im.w, 8, 20),
            Err(Error::GuardExceeded(_))
        ));
    }

    #[test]
    fn bench_reports_exponent_and_partial_flag() {
        let report =
            bench_scaling(&[2, 4], |n| n * n, MarginalMode::PolySpace, 2, 42).unwrap();
        assert_eq!(report.points.len(), 2);
        assert!(report.fitted_exponent.is_some());
        assert!(!report.partial);
        let single = bench_scaling(&[4], |n| n * n, MarginalMode::PolySpace, 1, 42).unwrap();
        assert!(single.fitted_exponent.is_none());
        assert!(single.partial);
        assert!(bench_scaling(&[], |n| n, MarginalMode::PolySpace, 1, 0).is_err());
    }

    #[test]
    fn operation_estimates_grow_with_n() {
        let a = nominal_operation_count(4, 16);
        let b = nominal_operation_count(6, 36);
        let c = nominal_operation_count(8, 64);
        assert!(a < b && b < c);
    }
}
