//! Photon-number stage: the truncated negative-binomial distribution over
//! even total photon counts, and inverse-CDF sampling from it.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Experiment setup for the photon-number stage: `m` modes each fed a
/// squeezed state with parameter `r`, truncated at `N = c * n_most`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SqueezeSetup {
    pub modes: usize,
    pub squeezing: f64,
    /// Cutoff multiplier; the truncation is `c * n_most`, floored to even.
    pub cutoff: f64,
}

impl SqueezeSetup {
    pub fn new(modes: usize, squeezing: f64, cutoff: f64) -> Result<Self> {
        if modes < 2 {
            return Err(Error::InvalidParameter(format!(
                "photon-number stage needs at least 2 modes, got {modes}"
            )));
        }
        if squeezing < 0.0 || !squeezing.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "squeezing parameter must be a finite non-negative real, got {squeezing}"
            )));
        }
        if cutoff <= 0.0 || !cutoff.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cutoff multiplier must be positive, got {cutoff}"
            )));
        }
        Ok(Self { modes, squeezing, cutoff })
    }

    /// Truncation bound: `c * n_most` floored to an even integer, at least 2.
    pub fn truncation(&self) -> usize {
        let n_most = most_probable_n_unchecked(self.modes, self.squeezing);
        let raw = (self.cutoff * n_most as f64).floor() as usize;
        (raw - raw % 2).max(2)
    }
}

/// `n_most = 2 * floor((m/2 - 1) * sinh^2 r)`.
pub fn most_probable_n(m: usize, r: f64) -> Result<usize> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "most probable photon number needs m >= 2, got {m}"
        )));
    }
    Ok(most_probable_n_unchecked(m, r))
}

fn most_probable_n_unchecked(m: usize, r: f64) -> usize {
    let s = r.sinh();
    2 * ((m as f64 / 2.0 - 1.0) * s * s).floor() as usize
}

/// Truncated, renormalized photon-count distribution over even
/// `n in {0, 2, ..., N}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhotonCountPmf {
    /// `probs[i]` is the renormalized probability of `n = 2i`.
    probs: Vec<f64>,
    /// Total raw mass before renormalization; records the truncation loss.
    raw_mass: f64,
}

impl PhotonCountPmf {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Renormalized probability of drawing `n` photons (zero for odd `n`
    /// and beyond the truncation).
    pub fn prob(&self, n: usize) -> f64 {
        if n % 2 != 0 {
            return 0.0;
        }
        self.probs.get(n / 2).copied().unwrap_or(0.0)
    }

    pub fn truncation(&self) -> usize {
        2 * (self.probs.len() - 1)
    }

    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    /// Writes the pmf as CSV with header `n,prob`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,prob\n");
        for (i, p) in self.probs.iter().enumerate() {
            out.push_str(&format!("{},{:.17e}\n", 2 * i, p));
        }
        out
    }
}

/// Evaluates the truncated negative-binomial pmf
/// `P_n ∝ C((m+n)/2 - 1, n/2) tanh^n r / cosh^m r` over even `n <= N`.
///
/// Binomials go through `ln_gamma` so large `m + n` cannot overflow.
pub fn photon_count_pmf(setup: &SqueezeSetup) -> Result<PhotonCountPmf> {
    let m = setup.modes as f64;
    let r = setup.squeezing;
    let n_max = setup.truncation();
    let ln_tanh = if r == 0.0 { f64::NEG_INFINITY } else { r.tanh().ln() };
    let ln_cosh = r.cosh().ln();

    let mut raw = Vec::with_capacity(n_max / 2 + 1);
    for n in (0..=n_max).step_by(2) {
        let nf = n as f64;
        let ln_p = if n == 0 {
            -m * ln_cosh
        } else {
            ln_binomial((m + nf) / 2.0 - 1.0, nf / 2.0) + nf * ln_tanh - m * ln_cosh
        };
        raw.push(ln_p.exp());
    }
    let raw_mass: f64 = raw.iter().sum();
    if !(raw_mass > 0.0) {
        return Err(Error::Internal("photon-count pmf has zero mass".into()));
    }
    let probs = raw.iter().map(|p| p / raw_mass).collect();
    Ok(PhotonCountPmf { probs, raw_mass })
}

/// Inverse-CDF draw of an even photon count.
pub fn sample_photon_count<R: Rng + ?Sized>(pmf: &PhotonCountPmf, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    for (i, p) in pmf.probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return 2 * i;
        }
    }
    pmf.truncation()
}

/// `ln C(a, b)` via the gamma function; `a` and `b` may be half-integers
/// as long as `a - b` stays a non-negative integer-shift away.
pub(crate) fn ln_binomial(a: f64, b: f64) -> f64 {
    // Zero when b < 0 or a - b <= -1 (the denominator gamma hits a pole for
    // integer arguments there); half-integer a keeps a - b > -1 valid.
    if b < 0.0 || a - b <= -1.0 + 1e-9 {
        return f64::NEG_INFINITY;
    }
    ln_gamma(a + 1.0) - ln_gamma(b + 1.0) - ln_gamma(a - b + 1.0)
}
