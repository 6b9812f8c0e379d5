//! Marginal probabilities `q_n(x_1, ..., x_k)` of a photon-position
//! prefix, evaluated by decomposing the summed `|Haf(W_x)|^2` into
//! sub-Hafnians of the prefix, delta-permanents, and a combinatorial
//! weight factor, instead of the literal `m^{n-k}`-term sum.

use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{hafnian, permanent, submatrix_wx, ComplexMatrix, HafnianMode, PositionString};
use crate::photon::ln_binomial;

/// Largest prefix length for which a dense sub-Hafnian table is built.
/// The bitmask keys themselves work up to 62 bits, but a dense table
/// beyond this is not storable anyway.
pub const MAX_CACHE_PREFIX: usize = 26;

/// Term budget for the brute-force marginal oracle.
pub const BRUTE_FORCE_TERM_GUARD: f64 = 1e7;

/// How the marginal engine evaluates sub-Hafnians and delta-permanents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalMode {
    /// Recompute every sub-Hafnian on demand.
    PolySpace,
    /// Read sub-Hafnians of the prefix from a precomputed table.
    ExpSpace,
    /// Pairwise-distinct prefixes only; delta-permanents collapse to 0/1.
    CollisionFree,
}

/// A marginal-probability query: prefix of length `k` out of `n` photons
/// routed through the `m x m` symmetric unitary `W`.
#[derive(Debug, Clone, Copy)]
pub struct MarginalQuery<'a> {
    pub w: &'a ComplexMatrix,
    pub prefix: &'a PositionString,
    pub n: usize,
}

impl<'a> MarginalQuery<'a> {
    pub fn modes(&self) -> usize {
        self.w.rows()
    }

    fn validate(&self) -> Result<()> {
        if self.n % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "total photon number must be even, got {}",
                self.n
            )));
        }
        if self.prefix.len() > self.n {
            return Err(Error::InvalidParameter(format!(
                "prefix length {} exceeds photon number {}",
                self.prefix.len(),
                self.n
            )));
        }
        self.prefix.check_range(self.modes())
    }
}

/// The position-basis normalization constant
/// `f_n = n! C((m+n)/2 - 1, n/2)`, kept in log space.
#[derive(Debug, Clone, Copy)]
pub struct NormalizationConstant {
    pub n: usize,
    pub m: usize,
    pub ln_value: f64,
}

impl NormalizationConstant {
    pub fn value(&self) -> f64 {
        self.ln_value.exp()
    }
}

pub fn normalization_f(n: usize, m: usize) -> Result<NormalizationConstant> {
    if n % 2 != 0 {
        return Err(Error::InvalidParameter(format!("f_n needs even n, got {n}")));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("f_n needs m >= 1".into()));
    }
    let nf = n as f64;
    let mf = m as f64;
    let ln_value = ln_gamma(nf + 1.0) + ln_binomial((mf + nf) / 2.0 - 1.0, nf / 2.0);
    Ok(NormalizationConstant { n, m, ln_value })
}

/// Parameters of the combinatorial weight `F(k, mu, j1, j2)`.
#[derive(Debug, Clone, Copy)]
pub struct FFactorParams {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub mu: usize,
    pub j1: usize,
    pub j2: usize,
}

impl FFactorParams {
    pub fn validate(&self) -> Result<()> {
        let (n, k, j1, j2, mu) = (
            self.n as i64,
            self.k as i64,
            self.j1 as i64,
            self.j2 as i64,
            self.mu as i64,
        );
        let jmin = (k - n / 2).max(0);
        let jmax = k / 2;
        if j1 < jmin || j1 > jmax || j2 < jmin || j2 > jmax {
            return Err(Error::InvalidParameter(format!(
                "j out of range: j1={j1}, j2={j2}, allowed [{jmin}, {jmax}]"
            )));
        }
        let lo = 3 * k - 2 * (j1 + j2) - n;
        let hi = k - 2 * j1.max(j2);
        if mu < lo.max(0) || mu > hi || (mu - k).rem_euclid(2) != 0 {
            return Err(Error::InvalidParameter(format!(
                "mu={mu} outside S_mu for k={k}, j1={j1}, j2={j2}, n={n}"
            )));
        }
        Ok(())
    }
}

/// Closed form `F = (n-k)! C((n-k+mu+m)/2 - 1, k - j1 - j2 + m/2 - 1)`,
/// evaluated in log space. For odd `m` the half-integer binomial goes
/// through the gamma function.
pub fn f_factor(p: &FFactorParams) -> Result<f64> {
    p.validate()?;
    Ok(ln_f_factor(p.n, p.m, p.k, p.mu, p.j1, p.j2).exp())
}

fn ln_f_factor(n: usize, m: usize, k: usize, mu: usize, j1: usize, j2: usize) -> f64 {
    let (nf, mf, kf, muf) = (n as f64, m as f64, k as f64, mu as f64);
    ln_gamma(nf - kf + 1.0)
        + ln_binomial(
            (nf - kf + muf + mf) / 2.0 - 1.0,
            kf - j1 as f64 - j2 as f64 + mf / 2.0 - 1.0,
        )
}

/// Permanent of the 0/1 matrix `S(i, j) = [x_{A_i} = x_{B_j}]`.
///
/// When the entries named by either index set are pairwise distinct the
/// matrix has at most one 1 per row and column, so the permanent is 1
/// exactly when the two value sets coincide.
pub fn delta_permanent(
    a_set: &[usize],
    b_set: &[usize],
    prefix: &PositionString,
) -> Result<f64> {
    if a_set.len() != b_set.len() {
        return Err(Error::Shape(format!(
            "delta-permanent index sets differ in size: {} vs {}",
            a_set.len(),
            b_set.len()
        )));
    }
    let modes = prefix.modes();
    for &i in a_set.iter().chain(b_set) {
        if i >= modes.len() {
            return Err(Error::IndexOutOfRange(format!(
                "delta-permanent position {i} outside prefix of length {}",
                modes.len()
            )));
        }
    }
    let va: Vec<usize> = a_set.iter().map(|&i| modes[i]).collect();
    let vb: Vec<usize> = b_set.iter().map(|&i| modes[i]).collect();
    if distinct(&va) && distinct(&vb) {
        let mut sa = va.clone();
        let mut sb = vb.clone();
        sa.sort_unstable();
        sb.sort_unstable();
        return Ok(if sa == sb { 1.0 } else { 0.0 });
    }
    let s = ComplexMatrix::from_fn(va.len(), vb.len(), |i, j| {
        Complex64::new(if va[i] == vb[j] { 1.0 } else { 0.0 }, 0.0)
    });
    Ok(permanent(&s)?.re)
}

fn distinct(vals: &[usize]) -> bool {
    let mut sorted = vals.to_vec();
    sorted.sort_unstable();
    sorted.windows(2).all(|w| w[0] != w[1])
}

/// Dense table of sub-Hafnians of a prefix matrix `W_x`, keyed by a
/// bitmask over prefix positions. Only even-cardinality masks hold values.
/// Built once, then shared read-only.
#[derive(Debug, Clone)]
pub struct HafnianCache {
    prefix_len: usize,
    table: Vec<Complex64>,
}

impl HafnianCache {
    /// Computes all even-subset Hafnians of the `k x k` matrix `wx`
    /// bottom-up via the pick-the-highest-vertex recursion. The arithmetic
    /// matches [`subset_hafnian`] operation for operation, so cached and
    /// recomputed values are bit-identical.
    pub fn build(wx: &ComplexMatrix) -> Result<Self> {
        if !wx.is_square() {
            return Err(Error::Shape("sub-Hafnian table needs a square matrix".into()));
        }
        let k = wx.rows();
        if k > MAX_CACHE_PREFIX {
            return Err(Error::GuardExceeded(format!(
                "sub-Hafnian table for prefix length {k} exceeds the {MAX_CACHE_PREFIX}-bit build limit"
            )));
        }
        let mut table = vec![Complex64::new(0.0, 0.0); 1 << k];
        table[0] = Complex64::new(1.0, 0.0);
        for mask in 1u64..(1 << k) {
            if mask.count_ones() % 2 != 0 {
                continue;
            }
            let v = 63 - mask.leading_zeros() as usize;
            let rest = mask & !(1 << v);
            let mut acc = Complex64::new(0.0, 0.0);
            let mut bits = rest;
            while bits != 0 {
                let u = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                acc += wx.at(v, u) * table[(rest & !(1 << u)) as usize];
            }
            table[mask as usize] = acc;
        }
        Ok(Self { prefix_len: k, table })
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix_len
    }

    pub fn get(&self, mask: u64) -> Complex64 {
        self.table[mask as usize]
    }
}

/// Hafnian of `wx` restricted to the positions in `mask`, by direct
/// recursion. Matching on the highest set vertex and summing partners in
/// ascending order keeps the arithmetic identical to the cache build.
pub fn subset_hafnian(wx: &ComplexMatrix, mask: u64) -> Complex64 {
    if mask == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let v = 63 - mask.leading_zeros() as usize;
    let rest = mask & !(1 << v);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut bits = rest;
    while bits != 0 {
        let u = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        acc += wx.at(v, u) * subset_hafnian(wx, rest & !(1 << u));
    }
    acc
}

/// Calls `f` with the bitmask of every `r`-element combination of `pool`,
/// in lexicographic order of the chosen index vectors.
fn for_each_combination(pool: &[usize], r: usize, f: &mut impl FnMut(u64)) {
    fn go(pool: &[usize], start: usize, remaining: usize, acc: u64, f: &mut impl FnMut(u64)) {
        if remaining == 0 {
            f(acc);
            return;
        }
        for i in start..=(pool.len() - remaining) {
            go(pool, i + 1, remaining - 1, acc | 1 << pool[i], f);
        }
    }
    if r > pool.len() {
        return;
    }
    go(pool, 0, r, 0, f);
}

fn mask_positions(mut mask: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    while mask != 0 {
        out.push(mask.trailing_zeros() as usize);
        mask &= mask - 1;
    }
    out
}

/// Compensated (Kahan) complex accumulator; keeps the result independent
/// of how the work is later partitioned.
#[derive(Debug, Clone, Copy, Default)]
struct KahanSum {
    sum: Complex64,
    comp: Complex64,
}

impl KahanSum {
    fn add(&mut self, v: Complex64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> Complex64 {
        self.sum
    }
}

/// Evaluates the marginal probability `q_n(x_1, ..., x_k)`.
///
/// The decomposition sums, over splittings of the prefix vertices, products
/// of prefix sub-Hafnians, delta-permanents, and the weight
/// `F(k, mu, j1, j2) / f_n`. Enumeration is lexicographic over
/// `(j1, j2, a, a', mu, A, B)`; blocks with `j2 < j1` fold with their
/// conjugate `(j2, j1)` block as `2 Re(.)`.
pub fn marginal_q(
    query: &MarginalQuery,
    mode: MarginalMode,
    cache: Option<&HafnianCache>,
) -> Result<f64> {
    query.validate()?;
    let k = query.prefix.len();
    let n = query.n;
    let m = query.modes();
    if k == 0 {
        return Ok(1.0);
    }
    if mode == MarginalMode::CollisionFree && !query.prefix.is_collision_free() {
        return Err(Error::CollidingPrefix);
    }
    let wx = submatrix_wx(query.w, query.prefix)?;
    let built;
    let cache_ref: Option<&HafnianCache> = match (mode, cache) {
        (MarginalMode::ExpSpace, Some(c)) => {
            if c.prefix_len() != k {
                return Err(Error::Shape(format!(
                    "sub-Hafnian table is for prefix length {}, query has {}",
                    c.prefix_len(),
                    k
                )));
            }
            Some(c)
        }
        (MarginalMode::ExpSpace, None) => {
            built = HafnianCache::build(&wx)?;
            Some(&built)
        }
        _ => None,
    };
    let haf = |mask: u64| -> Complex64 {
        match cache_ref {
            Some(c) => c.get(mask),
            None => subset_hafnian(&wx, mask),
        }
    };

    let ln_fn = normalization_f(n, m)?.ln_value;
    let positions: Vec<usize> = (0..k).collect();
    let full_mask: u64 = (1u64 << k) - 1;
    let j_min = k.saturating_sub(n / 2);
    let j_max = k / 2;

    let mut total = KahanSum::default();
    for j1 in j_min..=j_max {
        for j2 in j_min..=j1 {
            let mut block = KahanSum::default();
            for_each_combination(&positions, 2 * j1, &mut |a_mask| {
                let haf_a = haf(a_mask);
                for_each_combination(&positions, 2 * j2, &mut |a2_mask| {
                    let haf_a2 = haf(a2_mask).conj();
                    let pool_a: Vec<usize> = mask_positions(full_mask & !a_mask);
                    let pool_b: Vec<usize> = mask_positions(full_mask & !a2_mask);
                    let mut inner = Complex64::new(0.0, 0.0);
                    let mu_hi = k as i64 - 2 * j1.max(j2) as i64;
                    let mut mu = (3 * k as i64 - 2 * (j1 + j2) as i64 - n as i64).max(0);
                    if (mu - k as i64).rem_euclid(2) != 0 {
                        mu += 1;
                    }
                    while mu <= mu_hi {
                        let weight = (ln_f_factor(n, m, k, mu as usize, j1, j2) - ln_fn).exp();
                        let mut sab = Complex64::new(0.0, 0.0);
                        if mode == MarginalMode::CollisionFree {
                            // Prop. 1: only A = B survives, Per = 1.
                            let shared: Vec<usize> =
                                mask_positions(full_mask & !a_mask & !a2_mask);
                            for_each_combination(&shared, mu as usize, &mut |ab| {
                                let e = full_mask & !a_mask & !ab;
                                let e2 = full_mask & !a2_mask & !ab;
                                sab += haf(e) * haf(e2).conj();
                            });
                        } else {
                            for_each_combination(&pool_a, mu as usize, &mut |a_big| {
                                let a_pos = mask_positions(a_big);
                                for_each_combination(&pool_b, mu as usize, &mut |b_big| {
                                    let b_pos = mask_positions(b_big);
                                    let per = delta_permanent(&a_pos, &b_pos, query.prefix)
                                        .expect("validated index sets");
                                    if per != 0.0 {
                                        let e = full_mask & !a_mask & !a_big;
                                        let e2 = full_mask & !a2_mask & !b_big;
                                        sab += per * haf(e) * haf(e2).conj();
                                    }
                                });
                            });
                        }
                        inner += weight * sab;
                        mu += 2;
                    }
                    block.add(haf_a * haf_a2 * inner);
                });
            });
            let b = block.value();
            if j2 < j1 {
                total.add(Complex64::new(2.0 * b.re, 0.0));
            } else {
                total.add(b);
            }
        }
    }
    let q = total.value();
    if q.im.abs() > 1e-8 * (1.0 + q.re.abs()) {
        return Err(Error::Internal(format!(
            "marginal has non-negligible imaginary part {:.3e}",
            q.im
        )));
    }
    if q.re < -1e-12 {
        return Err(Error::Internal(format!(
            "marginal is negative beyond round-off: {:.3e}",
            q.re
        )));
    }
    Ok(q.re.max(0.0))
}

/// The literal marginal: sum of `|Haf(W_x)|^2 / f_n` over every completion
/// of the prefix. The trust oracle for [`marginal_q`].
pub fn marginal_q_bruteforce(query: &MarginalQuery) -> Result<f64> {
    query.validate()?;
    let k = query.prefix.len();
    let n = query.n;
    let m = query.modes();
    let terms = (m as f64).powi((n - k) as i32);
    if terms > BRUTE_FORCE_TERM_GUARD {
        return Err(Error::GuardExceeded(format!(
            "brute-force marginal would sum {terms:.3e} terms"
        )));
    }
    let f_n = normalization_f(n, m)?.value();
    let free = n - k;
    let mut digits = vec![1usize; free];
    let mut total = 0.0f64;
    loop {
        let mut x = query.prefix.clone();
        for &d in &digits {
            x.push(d);
        }
        let wx = submatrix_wx(query.w, &x)?;
        let h = hafnian(&wx, HafnianMode::Fast)?;
        total += h.norm_sqr() / f_n;
        // Odometer over [1, m]^free.
        let mut pos = 0;
        loop {
            if pos == free {
                return Ok(total);
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

/// Verifies the Hafnian splitting identity on `W_x` at cut `k`: the sum of
/// `Haf(R_a) Haf(T_a') Per(G_{e,e'})` over all splittings equals
/// `Haf(W_x)` to relative `1e-9`.
pub fn hafnian_split_check(w: &ComplexMatrix, x: &PositionString, k: usize) -> Result<bool> {
    let n = x.len();
    if n % 2 != 0 {
        return Err(Error::OddDimension(n));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!("cut {k} exceeds length {n}")));
    }
    let wx = submatrix_wx(w, x)?;
    let lhs = hafnian(&wx, HafnianMode::Fast)?;

    let head: Vec<usize> = (0..k).collect();
    let tail: Vec<usize> = (k..n).collect();
    let head_mask: u64 = head.iter().fold(0, |acc, &p| acc | 1 << p);
    let tail_mask: u64 = tail.iter().fold(0, |acc, &p| acc | 1 << p);

    let mut rhs = Complex64::new(0.0, 0.0);
    let j_min = k.saturating_sub(n / 2);
    for j in j_min..=(k / 2) {
        let tail_take = n + 2 * j - 2 * k; // n - 2k + 2j
        for_each_combination(&head, 2 * j, &mut |a_mask| {
            let haf_a = subset_hafnian(&wx, a_mask);
            let e = mask_positions(head_mask & !a_mask);
            for_each_combination(&tail, tail_take, &mut |a2_mask| {
                let haf_t = subset_hafnian(&wx, a2_mask);
                let e2 = mask_positions(tail_mask & !a2_mask);
                let g = ComplexMatrix::from_fn(e.len(), e2.len(), |i, j| wx.at(e[i], e2[j]));
                let per = permanent(&g).expect("square bipartite block");
                rhs += haf_a * haf_t * per;
            });
        });
    }
    let scale = lhs.norm().max(1e-30);
    Ok((lhs - rhs).norm() <= 1e-9 * scale)
}
