//! End-to-end samplers: the chain-rule configuration sampler and the
//! brute-force interval sampler used as its trust oracle.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hafnian, read_config, submatrix_ws, ComplexMatrix, HafnianMode, PhotonConfig, PositionString};
use crate::marginal::{marginal_q, normalization_f, MarginalMode, MarginalQuery};
use crate::photon::{photon_count_pmf, sample_photon_count, SqueezeSetup};

/// One drawn sample together with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleRecord {
    pub seed: u64,
    pub n: usize,
    pub s: Vec<usize>,
    pub x: Vec<usize>,
    pub mode: String,
    pub wall_time_s: f64,
}

impl SampleRecord {
    pub fn config(&self) -> PhotonConfig {
        PhotonConfig::new(self.s.clone())
    }
}

pub(crate) fn mode_tag(mode: MarginalMode) -> &'static str {
    match mode {
        MarginalMode::PolySpace => "poly",
        MarginalMode::ExpSpace => "exp",
        MarginalMode::CollisionFree => "collision-free",
    }
}

/// Unnormalized marginals for each candidate next mode. Their sum equals
/// the current prefix's marginal by the chain rule.
#[derive(Debug, Clone)]
pub struct ConditionalWeights {
    pub weights: Vec<f64>,
}

impl ConditionalWeights {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Evaluates `weights[l] = q_n(prefix + l)` for every candidate mode `l`.
///
/// Candidates are independent, so they are mapped in parallel and
/// collected in index order; the result does not depend on thread count.
/// Collision-free mode skips candidates already present in the prefix.
pub fn conditional_weights(
    w: &ComplexMatrix,
    prefix: &PositionString,
    n: usize,
    mode: MarginalMode,
) -> Result<ConditionalWeights> {
    if prefix.len() >= n {
        return Err(Error::InvalidParameter(format!(
            "prefix of length {} cannot be extended within n={n}",
            prefix.len()
        )));
    }
    let m = w.rows();
    let weights: Result<Vec<f64>> = (1..=m)
        .into_par_iter()
        .map(|l| {
            if mode == MarginalMode::CollisionFree && prefix.modes().contains(&l) {
                return Ok(0.0);
            }
            let ext = prefix.extended(l);
            let query = MarginalQuery { w, prefix: &ext, n };
            marginal_q(&query, mode, None)
        })
        .collect();
    let weights = weights?;
    if weights.iter().all(|&v| v <= 0.0) {
        return Err(Error::DegenerateDistribution(
            "all candidate weights vanished".into(),
        ));
    }
    Ok(ConditionalWeights { weights })
}

/// Draws a full configuration of `n` photons by sampling each position
/// sequentially with one inverse-CDF draw per step.
pub fn sample_configuration<R: Rng + ?Sized>(
    w: &ComplexMatrix,
    n: usize,
    rng: &mut R,
    mode: MarginalMode,
) -> Result<SampleRecord> {
    if n % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "photon number must be even, got {n}"
        )));
    }
    let m = w.rows();
    if mode == MarginalMode::CollisionFree && n > m {
        return Err(Error::CollisionFreeRegime { n, m });
    }
    let start = Instant::now();
    let mut prefix = PositionString::empty();
    for _ in 0..n {
        let cw = conditional_weights(w, &prefix, n, mode)?;
        let total = cw.total();
        let u: f64 = rng.gen();
        let target = u * total;
        let mut cum = 0.0;
        let mut chosen = m;
        for (i, &wl) in cw.weights.iter().enumerate() {
            cum += wl;
            if target < cum {
                chosen = i + 1;
                break;
            }
        }
        if chosen > m {
            // Round-off pushed the draw past the last interval.
            chosen = cw
                .weights
                .iter()
                .rposition(|&v| v > 0.0)
                .map(|i| i + 1)
                .ok_or_else(|| Error::DegenerateDistribution("no positive weight".into()))?;
        }
        prefix.push(chosen);
    }
    let s = read_config(&prefix, m)?;
    Ok(SampleRecord {
        seed: 0,
        n,
        s: s.occupations().to_vec(),
        x: prefix.modes().to_vec(),
        mode: mode_tag(mode).to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// The exact configuration distribution `p_n(s)` over all
/// `C(m+n-1, n)` configurations, in lexicographic order.
#[derive(Debug, Clone)]
pub struct ExactTable {
    pub n: usize,
    pub m: usize,
    entries: Vec<(PhotonConfig, f64)>,
}

impl ExactTable {
    /// Enumerates every configuration and its probability
    /// `p_n(s) = |Haf(W_s)|^2 N_p / f_n`.
    pub fn build(w: &ComplexMatrix, n: usize, m: usize) -> Result<Self> {
        if n % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "photon number must be even, got {n}"
            )));
        }
        if w.rows() != m {
            return Err(Error::Shape(format!(
                "W is {}x{} but m = {m}",
                w.rows(),
                w.cols()
            )));
        }
        let count = configuration_count(m, n);
        if count > 1e7 {
            return Err(Error::GuardExceeded(format!(
                "exact table would hold {count:.3e} configurations"
            )));
        }
        let f_n = normalization_f(n, m)?.value();
        let mut entries = Vec::with_capacity(count as usize);
        let mut occ = vec![0usize; m];
        enumerate_configs(&mut occ, 0, n, &mut |occ| {
            let config = PhotonConfig::new(occ.to_vec());
            let ws = submatrix_ws(w, &config)?;
            let h = hafnian(&ws, HafnianMode::Fast)?;
            let p = h.norm_sqr() * config.multiplicity() / f_n;
            entries.push((config, p));
            Ok(())
        })?;
        Ok(Self { n, m, entries })
    }

    pub fn entries(&self) -> &[(PhotonConfig, f64)] {
        &self.entries
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    /// Interval draw: partitions `[0, 1]` by the table probabilities and
    /// returns the configuration whose interval contains `u`.
    pub fn pick(&self, u: f64) -> &PhotonConfig {
        let mut cum = 0.0;
        for (config, p) in &self.entries {
            cum += p;
            if u < cum {
                return config;
            }
        }
        // Fall back to the last configuration with positive mass.
        &self
            .entries
            .iter()
            .rev()
            .find(|(_, p)| *p > 0.0)
            .unwrap_or(&self.entries[self.entries.len() - 1])
            .0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &PhotonConfig {
        self.pick(rng.gen())
    }

    /// CSV export with header `s,prob`; the configuration is rendered as a
    /// space-separated occupation vector.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,prob\n");
        for (config, p) in &self.entries {
            let s: Vec<String> = config.occupations().iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("{},{:.17e}\n", s.join(" "), p));
        }
        out
    }
}

fn configuration_count(m: usize, n: usize) -> f64 {
    // C(m + n - 1, n)
    let mut c = 1.0f64;
    for i in 0..n {
        c = c * (m + n - 1 - i) as f64 / (n - i) as f64;
    }
    c
}

fn enumerate_configs(
    occ: &mut Vec<usize>,
    mode: usize,
    remaining: usize,
    f: &mut impl FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    if mode + 1 == occ.len() {
        occ[mode] = remaining;
        f(occ)?;
        occ[mode] = 0;
        return Ok(());
    }
    for take in (0..=remaining).rev() {
        occ[mode] = take;
        enumerate_configs(occ, mode + 1, remaining - take, f)?;
    }
    occ[mode] = 0;
    Ok(())
}

/// One draw from the exact enumerated distribution (building the table
/// each call; use [`ExactTable`] directly for repeated draws).
pub fn brute_force_sample<R: Rng + ?Sized>(
    w: &ComplexMatrix,
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<SampleRecord> {
    let start = Instant::now();
    let table = ExactTable::build(w, n, m)?;
    let config = table.sample(rng).clone();
    // Canonical position string: modes in increasing order.
    let mut x = Vec::with_capacity(n);
    for (j, &sj) in config.occupations().iter().enumerate() {
        for _ in 0..sj {
            x.push(j + 1);
        }
    }
    Ok(SampleRecord {
        seed: 0,
        n,
        s: config.occupations().to_vec(),
        x,
        mode: "brute-force".to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Full two-stage pipeline: draw `n` from the photon-number pmf, then a
/// configuration of `n` photons.
pub fn run_pipeline<R: Rng + ?Sized>(
    setup: &SqueezeSetup,
    w: &ComplexMatrix,
    rng: &mut R,
    mode: MarginalMode,
) -> Result<SampleRecord> {
    if w.rows() != setup.modes {
        return Err(Error::Shape(format!(
            "W is {}x{} but setup has {} modes",
            w.rows(),
            w.cols(),
            setup.modes
        )));
    }
    let start = Instant::now();
    let pmf = photon_count_pmf(setup)?;
    let n = sample_photon_count(&pmf, rng);
    let mut record = sample_configuration(w, n, rng, mode)?;
    record.wall_time_s = start.elapsed().as_secs_f64();
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::haar_unitary;
    use crate::marginal::marginal_q_bruteforce;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weights_match_bruteforce_marginals() {
        let im = haar_unitary(4, 7).unwrap();
        let prefix = PositionString::new(vec![2]);
        let cw = conditional_weights(&im.w, &prefix, 4, MarginalMode::PolySpace).unwrap();
        for (i, &wl) in cw.weights.iter().enumerate() {
            let ext = prefix.extended(i + 1);
            let oracle =
                marginal_q_bruteforce(&MarginalQuery { w: &im.w, prefix: &ext, n: 4 }).unwrap();
            assert!((wl - oracle).abs() <= 1e-9 * oracle.max(1e-12));
        }
    }

    #[test]
    fn empty_prefix_weights_sum_to_one() {
        let im = haar_unitary(2, 19).unwrap();
        let cw = conditional_weights(&im.w, &PositionString::empty(), 2, MarginalMode::PolySpace)
            .unwrap();
        assert!((cw.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn collision_free_weights_exclude_prefix_modes() {
        let im = haar_unitary(5, 23).unwrap();
        let prefix = PositionString::new(vec![2, 4]);
        let cw = conditional_weights(&im.w, &prefix, 4, MarginalMode::CollisionFree).unwrap();
        assert_eq!(cw.weights[1], 0.0);
        assert_eq!(cw.weights[3], 0.0);
    }

    #[test]
    fn zero_photons_gives_zero_configuration() {
        let im = haar_unitary(3, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rec = sample_configuration(&im.w, 0, &mut rng, MarginalMode::PolySpace).unwrap();
        assert_eq!(rec.s, vec![0, 0, 0]);
        assert!(rec.x.is_empty());
    }

    #[test]
    fn odd_photon_number_is_rejected() {
        let im = haar_unitary(3, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_configuration(&im.w, 3, &mut rng, MarginalMode::PolySpace).is_err());
    }

    #[test]
    fn collision_free_refuses_when_n_exceeds_m() {
        let im = haar_unitary(4, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_configuration(&im.w, 6, &mut rng, MarginalMode::CollisionFree),
            Err(Error::CollisionFreeRegime { n: 6, m: 4 })
        ));
    }

    #[test]
    fn poly_and_exp_modes_emit_identical_records() {
        let im = haar_unitary(4, 3).unwrap();
        for seed in 0..5u64 {
            let mut rng_a = ChaCha8Rng::seed_from_u64(seed);
            let mut rng_b = ChaCha8Rng::seed_from_u64(seed);
            let a = sample_configuration(&im.w, 4, &mut rng_a, MarginalMode::PolySpace).unwrap();
            let b = sample_configuration(&im.w, 4, &mut rng_b, MarginalMode::ExpSpace).unwrap();
            assert_eq!(a.x, b.x);
            assert_eq!(a.s, b.s);
        }
    }

    #[test]
    fn chain_rule_telescoping_recovers_q() {
        // Product of normalized conditionals along a sampled x equals q_n(x).
        let im = haar_unitary(4, 29).unwrap();
        let n = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rec = sample_configuration(&im.w, n, &mut rng, MarginalMode::PolySpace).unwrap();
        let mut product = 1.0f64;
        let mut prefix = PositionString::empty();
        for &step in &rec.x {
            let cw = conditional_weights(&im.w, &prefix, n, MarginalMode::PolySpace).unwrap();
            product *= cw.weights[step - 1] / cw.total();
            prefix.push(step);
        }
        let q = marginal_q(
            &MarginalQuery { w: &im.w, prefix: &prefix, n },
            MarginalMode::PolySpace,
            None,
        )
        .unwrap();
        assert!((product - q).abs() <= 1e-9 * q.max(1e-15), "{product} vs {q}");
    }

    #[test]
    fn exact_table_normalizes() {
        let im = haar_unitary(2, 47).unwrap();
        let table = ExactTable::build(&im.w, 2, 2).unwrap();
        assert_eq!(table.entries().len(), 3);
        assert!((table.total_mass() - 1.0).abs() < 1e-10);
        let im4 = haar_unitary(4, 47).unwrap();
        let table4 = ExactTable::build(&im4.w, 4, 4).unwrap();
        assert_eq!(table4.entries().len(), 35);
        assert!((table4.total_mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn interval_pick_at_zero_is_first_positive() {
        let im = haar_unitary(3, 2).unwrap();
        let table = ExactTable::build(&im.w, 2, 3).unwrap();
        let first_positive = table.entries().iter().find(|(_, p)| *p > 0.0).unwrap();
        assert_eq!(table.pick(0.0), &first_positive.0);
    }

    #[test]
    fn table_guard_refuses() {
        let im = haar_unitary(30, 2).unwrap();
        assert!(matches!(
            ExactTable::build(&im.w, 12, 30),
            Err(Error::GuardExceeded(_))
        ));
    }

    #[test]
    fn pipeline_zero_squeezing_yields_vacuum() {
        let setup = SqueezeSetup::new(3, 0.0, 50.0).unwrap();
        let im = haar_unitary(3, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let rec = run_pipeline(&setup, &im.w, &mut rng, MarginalMode::PolySpace).unwrap();
            assert_eq!(rec.n, 0);
            assert_eq!(rec.s, vec![0, 0, 0]);
        }
    }

    #[test]
    fn pipeline_is_deterministic_per_seed() {
        let setup = SqueezeSetup::new(4, 0.4, 50.0).unwrap();
        let im = haar_unitary(4, 5).unwrap();
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..5)
                .map(|_| run_pipeline(&setup, &im.w, &mut rng, MarginalMode::PolySpace).unwrap())
                .map(|r| (r.n, r.s, r.x))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(42), run(42));
    }

    #[test]
    fn chain_sampler_matches_exact_table_small() {
        let im = haar_unitary(2, 99).unwrap();
        let n = 2;
        let table = ExactTable::build(&im.w, n, 2).unwrap();
        let trials = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = std::collections::HashMap::new();
        for _ in 0..trials {
            let rec = sample_configuration(&im.w, n, &mut rng, MarginalMode::PolySpace).unwrap();
            *counts.entry(rec.s).or_insert(0usize) += 1;
        }
        let tvd: f64 = table
            .entries()
            .iter()
            .map(|(config, p)| {
                let emp = counts.get(config.occupations()).copied().unwrap_or(0) as f64
                    / trials as f64;
                (emp - p).abs()
            })
            .sum::<f64>()
            / 2.0;
        assert!(tvd < 0.01, "tvd={tvd}");
    }
}
