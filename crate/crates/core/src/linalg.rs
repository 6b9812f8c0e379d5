//! Dense complex-matrix primitives: Hafnian, permanent, Haar-random
//! unitaries, and the submatrix constructions used by the marginal engine.
//!
//! Matrices here are small (tens of rows at most in hot paths), so
//! everything is plain row-major `Vec<Complex64>` storage with no BLAS.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Symmetry tolerance accepted by [`hafnian`] before symmetrizing input.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self { rows, cols, entries }
    }

    pub fn from_rows(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {} entries for a {}x{} matrix, got {}",
                rows * cols,
                rows,
                cols,
                entries.len()
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `A * B`.
    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                for j in 0..other.cols {
                    let v = out.at(i, j) + a * other.at(k, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self.at(j, i))
    }

    pub fn conj_transpose(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self.at(j, i).conj())
    }

    pub fn conj(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.rows, self.cols, |i, j| self.at(i, j).conj())
    }

    /// Largest entrywise deviation of `A * A†` from the identity.
    pub fn unitarity_defect(&self) -> Result<f64> {
        let prod = self.matmul(&self.conj_transpose())?;
        let mut max = 0.0f64;
        for i in 0..prod.rows {
            for j in 0..prod.cols {
                let target = if i == j {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                max = max.max((prod.at(i, j) - target).norm());
            }
        }
        Ok(max)
    }

    /// Largest `|A(i,j) - A(j,i)|` over all pairs.
    pub fn asymmetry(&self) -> f64 {
        let mut max = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols.min(self.rows) {
                max = max.max((self.at(i, j) - self.at(j, i)).norm());
            }
        }
        max
    }
}

/// The `m x m` interferometer unitary together with `W = U Uᵗ`.
#[derive(Debug, Clone)]
pub struct InterferometerMatrix {
    pub dim: usize,
    pub u: ComplexMatrix,
    pub w: ComplexMatrix,
}

impl InterferometerMatrix {
    /// Wraps a unitary `U`, computing `W = U Uᵗ` and checking the
    /// unitarity invariant on both.
    pub fn from_unitary(u: ComplexMatrix) -> Result<Self> {
        if !u.is_square() || u.rows() == 0 {
            return Err(Error::InvalidDimension(format!(
                "interferometer matrix must be square and nonempty, got {}x{}",
                u.rows(),
                u.cols()
            )));
        }
        let defect = u.unitarity_defect()?;
        if defect > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "U is not unitary: defect {defect:.3e}"
            )));
        }
        let w = u.matmul(&u.transpose())?;
        Ok(Self { dim: u.rows(), u, w })
    }
}

/// Occupation-number vector `s = (s_1, ..., s_m)` with total `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhotonConfig {
    occupations: Vec<usize>,
}

impl PhotonConfig {
    pub fn new(occupations: Vec<usize>) -> Self {
        Self { occupations }
    }

    pub fn occupations(&self) -> &[usize] {
        &self.occupations
    }

    pub fn modes(&self) -> usize {
        self.occupations.len()
    }

    pub fn total(&self) -> usize {
        self.occupations.iter().sum()
    }

    /// `N_p = n! / (s_1! ... s_m!)`, the number of position strings that
    /// read back to this configuration.
    pub fn multiplicity(&self) -> f64 {
        let n = self.total();
        let mut ln = ln_factorial(n);
        for &s in &self.occupations {
            ln -= ln_factorial(s);
        }
        ln.exp().round()
    }
}

/// First-quantized photon positions `x = (x_1, ..., x_n)`, each in `1..=m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PositionString {
    modes: Vec<usize>,
}

impl PositionString {
    /// Entries are 1-based mode indices; validity against a mode count is
    /// checked at the point of use.
    pub fn new(modes: Vec<usize>) -> Self {
        Self { modes }
    }

    pub fn empty() -> Self {
        Self { modes: Vec::new() }
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn push(&mut self, mode: usize) {
        self.modes.push(mode);
    }

    pub fn extended(&self, mode: usize) -> PositionString {
        let mut modes = self.modes.clone();
        modes.push(mode);
        PositionString { modes }
    }

    pub fn check_range(&self, m: usize) -> Result<()> {
        for &x in &self.modes {
            if x < 1 || x > m {
                return Err(Error::IndexOutOfRange(format!(
                    "position entry {x} outside 1..={m}"
                )));
            }
        }
        Ok(())
    }

    /// True when every entry occurs at most once (collision-free).
    pub fn is_collision_free(&self) -> bool {
        let mut sorted = self.modes.clone();
        sorted.sort_unstable();
        sorted.windows(2).all(|w| w[0] != w[1])
    }
}

/// Counts occurrences of each mode: `s_j = #{i : x_i = j}`.
pub fn read_config(x: &PositionString, m: usize) -> Result<PhotonConfig> {
    x.check_range(m)?;
    let mut occ = vec![0usize; m];
    for &mode in x.modes() {
        occ[mode - 1] += 1;
    }
    Ok(PhotonConfig::new(occ))
}

/// Draws an `m x m` Haar-random unitary deterministically from a seed.
///
/// A matrix of independent standard complex Gaussians is orthonormalized
/// column by column (modified Gram-Schmidt), which fixes the triangular
/// factor's diagonal to be real-positive and yields the Haar measure.
pub fn haar_unitary(m: usize, seed: u64) -> Result<InterferometerMatrix> {
    if m == 0 {
        return Err(Error::InvalidDimension("m must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let mut cols: Vec<Vec<Complex64>> = (0..m)
        .map(|_| {
            (0..m)
                .map(|_| {
                    let re: f64 = normal.sample(&mut rng);
                    let im: f64 = normal.sample(&mut rng);
                    Complex64::new(re, im)
                })
                .collect()
        })
        .collect();

    for j in 0..m {
        for prev in 0..j {
            let mut dot = Complex64::new(0.0, 0.0);
            for i in 0..m {
                dot += cols[prev][i].conj() * cols[j][i];
            }
            for i in 0..m {
                let upd = cols[prev][i] * dot;
                cols[j][i] -= upd;
            }
        }
        let norm: f64 = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(Error::Internal("Gram-Schmidt breakdown".into()));
        }
        for v in cols[j].iter_mut() {
            *v /= norm;
        }
    }

    let u = ComplexMatrix::from_fn(m, m, |i, j| cols[j][i]);
    InterferometerMatrix::from_unitary(u)
}

/// Hafnian evaluation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HafnianMode {
    /// Walk all `(n-1)!!` perfect matchings. The trust anchor; keep `n <= 12`.
    Enumeration,
    /// Power-trace algorithm over pair subsets, `O(n^3 2^{n/2})`.
    Fast,
}

/// Hafnian of a symmetric even-dimensional matrix.
///
/// Input asymmetric beyond [`SYMMETRY_TOL`] is rejected; within the
/// tolerance, entries are averaged with their transpose before evaluation.
pub fn hafnian(a: &ComplexMatrix, mode: HafnianMode) -> Result<Complex64> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "hafnian requires a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if n % 2 != 0 {
        return Err(Error::OddDimension(n));
    }
    let asym = a.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let sym = ComplexMatrix::from_fn(n, n, |i, j| 0.5 * (a.at(i, j) + a.at(j, i)));
    match mode {
        HafnianMode::Enumeration => Ok(hafnian_enumeration(&sym)),
        HafnianMode::Fast => Ok(hafnian_power_trace(&sym)),
    }
}

fn hafnian_enumeration(a: &ComplexMatrix) -> Complex64 {
    fn go(a: &ComplexMatrix, alive: &mut Vec<usize>) -> Complex64 {
        if alive.is_empty() {
            return Complex64::new(1.0, 0.0);
        }
        let first = alive[0];
        let mut total = Complex64::new(0.0, 0.0);
        for pos in 1..alive.len() {
            let partner = alive[pos];
            let weight = a.at(first, partner);
            let mut rest: Vec<usize> = alive[1..pos].to_vec();
            rest.extend_from_slice(&alive[pos + 1..]);
            total += weight * go(a, &mut rest);
        }
        total
    }
    let mut all: Vec<usize> = (0..a.rows()).collect();
    go(a, &mut all)
}

/// Power-trace Hafnian: sum over subsets `Z` of the `n/2` index pairs of
/// `(-1)^{n/2-|Z|} [z^{n/2}] exp( sum_k tr((X A_Z)^k) z^k / (2k) )`,
/// where `X` swaps the two rows of each pair.
fn hafnian_power_trace(a: &ComplexMatrix) -> Complex64 {
    let n = a.rows();
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let p = n / 2;
    let mut total = Complex64::new(0.0, 0.0);
    for subset in 1u64..(1 << p) {
        let size = subset.count_ones() as usize;
        let mut idx = Vec::with_capacity(2 * size);
        for pair in 0..p {
            if subset >> pair & 1 == 1 {
                idx.push(2 * pair);
                idx.push(2 * pair + 1);
            }
        }
        let dim = idx.len();
        // B = X * A_Z: rows of each pair swapped.
        let mut b = ComplexMatrix::zeros(dim, dim);
        for (i, &gi) in idx.iter().enumerate() {
            let swapped = i ^ 1;
            for (j, &gj) in idx.iter().enumerate() {
                b.set(swapped, j, a.at(gi, gj));
            }
        }
        // Power traces tr(B^k) for k = 1..=p.
        let mut traces = Vec::with_capacity(p);
        let mut power = b.clone();
        for _ in 0..p {
            let mut tr = Complex64::new(0.0, 0.0);
            for i in 0..dim {
                tr += power.at(i, i);
            }
            traces.push(tr);
            power = power.matmul(&b).expect("square");
        }
        // f(z) = exp(g(z)) truncated at degree p, g(z) = sum tr(B^k)/(2k) z^k.
        let mut g = vec![Complex64::new(0.0, 0.0); p + 1];
        for k in 1..=p {
            g[k] = traces[k - 1] / (2.0 * k as f64);
        }
        let mut f = vec![Complex64::new(0.0, 0.0); p + 1];
        f[0] = Complex64::new(1.0, 0.0);
        let mut term = f.clone();
        for j in 1..=p {
            term = poly_mul_trunc(&term, &g, p);
            for t in term.iter_mut() {
                *t /= j as f64;
            }
            for c in 0..=p {
                f[c] += term[c];
            }
        }
        let sign = if (p - size) % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * f[p];
    }
    total
}

fn poly_mul_trunc(a: &[Complex64], b: &[Complex64], deg: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); deg + 1];
    for (i, &ai) in a.iter().enumerate().take(deg + 1) {
        if ai == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(deg + 1 - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Permanent by inclusion-exclusion over column subsets, `O(2^n n)`.
pub fn permanent(a: &ComplexMatrix) -> Result<Complex64> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "permanent requires a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let mut total = Complex64::new(0.0, 0.0);
    for subset in 1u64..(1 << n) {
        let mut prod = Complex64::new(1.0, 0.0);
        for i in 0..n {
            let mut row_sum = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if subset >> j & 1 == 1 {
                    row_sum += a.at(i, j);
                }
            }
            prod *= row_sum;
        }
        let sign = if (n - subset.count_ones() as usize) % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        total += sign * prod;
    }
    Ok(total)
}

/// Builds `W_s` by taking `s_j` copies of column `j`, then `s_j` copies of
/// row `j`.
pub fn submatrix_ws(w: &ComplexMatrix, s: &PhotonConfig) -> Result<ComplexMatrix> {
    if !w.is_square() || w.rows() != s.modes() {
        return Err(Error::Shape(format!(
            "W is {}x{} but configuration has {} modes",
            w.rows(),
            w.cols(),
            s.modes()
        )));
    }
    let mut picks = Vec::with_capacity(s.total());
    for (j, &sj) in s.occupations().iter().enumerate() {
        for _ in 0..sj {
            picks.push(j);
        }
    }
    Ok(ComplexMatrix::from_fn(picks.len(), picks.len(), |i, j| {
        w.at(picks[i], picks[j])
    }))
}

/// Builds `W_x` with entry `(i, j) = W(x_i, x_j)`.
pub fn submatrix_wx(w: &ComplexMatrix, x: &PositionString) -> Result<ComplexMatrix> {
    x.check_range(w.rows())?;
    let modes = x.modes();
    Ok(ComplexMatrix::from_fn(modes.len(), modes.len(), |i, j| {
        w.at(modes[i] - 1, modes[j] - 1)
    }))
}

pub(crate) fn ln_factorial(n: usize) -> f64 {
    statrs::function::gamma::ln_gamma(n as f64 + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_symmetric(n: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = StandardNormal;
        let mut a = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let re: f64 = normal.sample(&mut rng);
                let im: f64 = normal.sample(&mut rng);
                let v = Complex64::new(re, im);
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        a
    }

    #[test]
    fn haar_unitary_is_deterministic() {
        let a = haar_unitary(3, 42).unwrap();
        let b = haar_unitary(3, 42).unwrap();
        assert_eq!(a.u.entries(), b.u.entries());
    }

    #[test]
    fn haar_unitary_one_mode_is_a_phase() {
        let u = haar_unitary(1, 7).unwrap();
        assert!((u.u.at(0, 0).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn haar_unitary_rejects_zero_dim() {
        assert!(matches!(haar_unitary(0, 1), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn haar_unitary_invariants_hold() {
        for m in [1usize, 2, 5, 6, 13, 32] {
            let im = haar_unitary(m, m as u64).unwrap();
            assert!(im.u.unitarity_defect().unwrap() <= 1e-10, "m={m}");
            assert!(im.w.unitarity_defect().unwrap() <= 1e-10, "m={m}");
            for i in 0..m {
                for j in 0..m {
                    assert_eq!(im.w.at(i, j), im.w.at(j, i));
                }
            }
        }
    }

    #[test]
    fn hafnian_empty_matrix_is_one() {
        let a = ComplexMatrix::zeros(0, 0);
        assert_eq!(hafnian(&a, HafnianMode::Enumeration).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(hafnian(&a, HafnianMode::Fast).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn hafnian_four_by_four_expansion() {
        let v = random_symmetric(4, 11);
        let expected = v.at(0, 1) * v.at(2, 3) + v.at(0, 2) * v.at(1, 3) + v.at(0, 3) * v.at(1, 2);
        for mode in [HafnianMode::Enumeration, HafnianMode::Fast] {
            let got = hafnian(&v, mode).unwrap();
            assert!((got - expected).norm() < 1e-12 * expected.norm());
        }
    }

    #[test]
    fn hafnian_all_ones_is_double_factorial() {
        let a = ComplexMatrix::from_fn(6, 6, |_, _| Complex64::new(1.0, 0.0));
        let got = hafnian(&a, HafnianMode::Enumeration).unwrap();
        assert!((got.re - 15.0).abs() < 1e-10 && got.im.abs() < 1e-10);
        let fast = hafnian(&a, HafnianMode::Fast).unwrap();
        assert!((fast - got).norm() < 1e-9);
    }

    #[test]
    fn hafnian_identity_is_zero() {
        let a = ComplexMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let got = hafnian(&a, HafnianMode::Enumeration).unwrap();
        assert!(got.norm() < 1e-14);
    }

    #[test]
    fn hafnian_rejects_odd_and_asymmetric() {
        let a = ComplexMatrix::zeros(3, 3);
        assert!(matches!(hafnian(&a, HafnianMode::Fast), Err(Error::OddDimension(3))));
        let mut b = ComplexMatrix::zeros(2, 2);
        b.set(0, 1, Complex64::new(1.0, 0.0));
        b.set(1, 0, Complex64::new(2.0, 0.0));
        assert!(matches!(hafnian(&b, HafnianMode::Fast), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn fast_hafnian_matches_enumeration() {
        for n in [2usize, 4, 6, 8, 10] {
            for seed in 0..4u64 {
                let a = random_symmetric(n, 100 * n as u64 + seed);
                let slow = hafnian(&a, HafnianMode::Enumeration).unwrap();
                let fast = hafnian(&a, HafnianMode::Fast).unwrap();
                assert!(
                    (slow - fast).norm() <= 1e-9 * slow.norm().max(1.0),
                    "n={n} seed={seed}: {slow} vs {fast}"
                );
            }
        }
    }

    #[test]
    fn permanent_identity_and_ones() {
        let id = ComplexMatrix::from_fn(5, 5, |i, j| {
            Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)
        });
        assert!((permanent(&id).unwrap().re - 1.0).abs() < 1e-12);
        let ones = ComplexMatrix::from_fn(4, 4, |_, _| Complex64::new(1.0, 0.0));
        assert!((permanent(&ones).unwrap().re - 24.0).abs() < 1e-9);
    }

    #[test]
    fn permanent_matches_naive_expansion() {
        fn naive(a: &ComplexMatrix) -> Complex64 {
            fn go(a: &ComplexMatrix, row: usize, used: u64) -> Complex64 {
                if row == a.rows() {
                    return Complex64::new(1.0, 0.0);
                }
                let mut total = Complex64::new(0.0, 0.0);
                for j in 0..a.cols() {
                    if used >> j & 1 == 0 {
                        total += a.at(row, j) * go(a, row + 1, used | 1 << j);
                    }
                }
                total
            }
            go(a, 0, 0)
        }
        let a = random_symmetric(5, 3);
        let fast = permanent(&a).unwrap();
        let slow = naive(&a);
        assert!((fast - slow).norm() <= 1e-10 * slow.norm());
    }

    #[test]
    fn permanent_zero_row_is_zero() {
        let mut a = random_symmetric(4, 9);
        for j in 0..4 {
            a.set(2, j, Complex64::new(0.0, 0.0));
        }
        assert!(permanent(&a).unwrap().norm() < 1e-12);
    }

    #[test]
    fn submatrix_ws_matches_column_row_repetition() {
        let w = ComplexMatrix::from_fn(6, 6, |i, j| Complex64::new((i + 1) as f64, (j + 1) as f64));
        let s = PhotonConfig::new(vec![1, 1, 0, 2, 0, 0]);
        let ws = submatrix_ws(&w, &s).unwrap();
        assert_eq!(ws.rows(), 4);
        let rows = [0usize, 1, 3, 3];
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(ws.at(i, j), w.at(rows[i], rows[j]));
            }
        }
    }

    #[test]
    fn submatrix_ws_zero_total_is_empty() {
        let w = ComplexMatrix::zeros(3, 3);
        let s = PhotonConfig::new(vec![0, 0, 0]);
        assert_eq!(submatrix_ws(&w, &s).unwrap().rows(), 0);
    }

    #[test]
    fn submatrix_wx_agrees_with_ws() {
        let im = haar_unitary(6, 5).unwrap();
        let x = PositionString::new(vec![1, 2, 4, 4]);
        let s = read_config(&x, 6).unwrap();
        assert_eq!(s.occupations(), &[1, 1, 0, 2, 0, 0]);
        let wx = submatrix_wx(&im.w, &x).unwrap();
        let ws = submatrix_ws(&im.w, &s).unwrap();
        let hx = hafnian(&wx, HafnianMode::Enumeration).unwrap();
        let hs = hafnian(&ws, HafnianMode::Enumeration).unwrap();
        assert!((hx - hs).norm() <= 1e-10 * hs.norm());
    }

    #[test]
    fn submatrix_wx_rejects_out_of_range() {
        let w = ComplexMatrix::zeros(3, 3);
        let x = PositionString::new(vec![1, 4]);
        assert!(matches!(submatrix_wx(&w, &x), Err(Error::IndexOutOfRange(_))));
    }

    #[test]
    fn read_config_counts() {
        let x = PositionString::new(vec![3, 3, 3, 3]);
        assert_eq!(read_config(&x, 3).unwrap().occupations(), &[0, 0, 4]);
        let empty = PositionString::empty();
        assert_eq!(read_config(&empty, 4).unwrap().occupations(), &[0, 0, 0, 0]);
    }

    #[test]
    fn hafnian_permutation_invariance() {
        let im = haar_unitary(5, 77).unwrap();
        let x = PositionString::new(vec![2, 5, 1, 2, 4, 4]);
        let base = hafnian(&submatrix_wx(&im.w, &x).unwrap(), HafnianMode::Fast).unwrap();
        let perms = [
            vec![5, 2, 1, 2, 4, 4],
            vec![4, 4, 2, 1, 5, 2],
            vec![1, 2, 2, 4, 4, 5],
        ];
        for p in perms {
            let h = hafnian(&submatrix_wx(&im.w, &PositionString::new(p)).unwrap(), HafnianMode::Fast)
                .unwrap();
            assert!((h - base).norm() <= 1e-10 * base.norm().max(1e-30));
        }
    }
}
