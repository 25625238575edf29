//! Rank payoffs: the polynomial `g` paying a player at quantile `y` against
//! uniform opponents, its inverse, and the exact payoff against an arbitrary
//! discrete opponent distribution (ties split uniformly).

use crate::error::{ContestError, Result};
use crate::market::RewardScheme;
use crate::scalar::Scalar;

/// Binomial coefficient as a float, by the multiplicative formula.
pub(crate) fn binomial_f64(m: usize, j: usize) -> f64 {
    if j > m {
        return 0.0;
    }
    let j = j.min(m - j);
    let mut c = 1.0;
    for t in 0..j {
        c = c * (m - t) as f64 / (t + 1) as f64;
    }
    c.round()
}

/// `y^a (1 - y)^b` with `0^0 = 1`.
#[inline]
pub(crate) fn bernstein_kernel<T: Scalar>(y: T, a: usize, b: usize) -> T {
    y.powi(a as i32) * (T::one() - y).powi(b as i32)
}

/// `g(y) = sum_k R_k C(n-1, k-1) y^(n-k) (1-y)^(k-1)`, the expected reward for
/// stopping at quantile `y` when the other `n - 1` players are uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct RankPolynomial<T> {
    coef: Vec<T>,
    dcoef: Vec<T>,
    low: T,
    high: T,
}

impl<T: Scalar> RankPolynomial<T> {
    pub fn new(reward: &RewardScheme<T>) -> Self {
        let r = reward.as_slice();
        let n = r.len();
        let coef = (0..n)
            .map(|k| r[k] * T::lit(binomial_f64(n - 1, k)))
            .collect();
        let dcoef = (0..n - 1)
            .map(|k| {
                T::from_usize_lossy(n - 1) * (r[k] - r[k + 1]) * T::lit(binomial_f64(n - 2, k))
            })
            .collect();
        Self {
            coef,
            dcoef,
            low: reward.last(),
            high: reward.first(),
        }
    }

    pub fn n(&self) -> usize {
        self.coef.len()
    }

    pub fn eval(&self, y: T) -> T {
        let n = self.n();
        if y <= T::zero() {
            return self.low;
        }
        if y >= T::one() {
            return self.high;
        }
        self.coef
            .iter()
            .enumerate()
            .map(|(k, &c)| c * bernstein_kernel(y, n - 1 - k, k))
            .sum()
    }

    /// `g'(y) = (n-1) sum_{k<n} (R_k - R_{k+1}) C(n-2, k-1) y^(n-1-k) (1-y)^(k-1)`.
    pub fn derivative(&self, y: T) -> T {
        let n = self.n();
        let y = y.max(T::zero()).min(T::one());
        self.dcoef
            .iter()
            .enumerate()
            .map(|(k, &c)| c * bernstein_kernel(y, n - 2 - k, k))
            .sum()
    }

    /// Unique `y` with `g(y) = v`: bisection to width `1e-8`, then safeguarded
    /// Newton down to rounding level.
    pub fn inverse(&self, v: T) -> Result<T> {
        let span = self.high - self.low;
        let slack = span * T::tol(1e-12);
        if !(v >= self.low - slack && v <= self.high + slack) {
            return Err(ContestError::OutOfRange(format!(
                "g^-1 argument {v} outside [{}, {}]",
                self.low, self.high
            )));
        }
        if v <= self.low {
            return Ok(T::zero());
        }
        if v >= self.high {
            return Ok(T::one());
        }
        let (mut lo, mut hi) = (T::zero(), T::one());
        let bracket = T::tol(1e-8);
        while hi - lo > bracket {
            let mid = (lo + hi) / T::lit(2.0);
            if self.eval(mid) < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tol = T::epsilon() * T::lit(4.0);
        let mut y = (lo + hi) / T::lit(2.0);
        for _ in 0..100 {
            let gy = self.eval(y) - v;
            if gy == T::zero() {
                return Ok(y);
            }
            if gy < T::zero() {
                lo = y;
            } else {
                hi = y;
            }
            let d = self.derivative(y);
            let mut next = if d > T::zero() {
                y - gy / d
            } else {
                lo - T::one()
            };
            if !(next > lo && next < hi) {
                next = (lo + hi) / T::lit(2.0);
            }
            let step = (next - y).abs();
            y = next;
            if step <= tol || hi - lo <= tol {
                break;
            }
        }
        Ok(y)
    }
}

/// `g(y)` for a reward scheme; `y` must lie in `[0, 1]`.
pub fn g_eval<T: Scalar>(reward: &RewardScheme<T>, y: T) -> Result<T> {
    if !(y >= T::zero() && y <= T::one()) {
        return Err(ContestError::OutOfRange(format!(
            "g argument {y} outside [0, 1]"
        )));
    }
    Ok(RankPolynomial::new(reward).eval(y))
}

/// Inverse of [`g_eval`] on `[Rn, R1]`.
pub fn g_inverse<T: Scalar>(reward: &RewardScheme<T>, v: T) -> Result<T> {
    RankPolynomial::new(reward).inverse(v)
}

/// Finite distribution of stopping levels, sorted by level with distinct atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution<T> {
    levels: Vec<T>,
    probs: Vec<T>,
    /// `cum[i]` = total mass of atoms `0..i`.
    cum: Vec<T>,
}

impl<T: Scalar> DiscreteDistribution<T> {
    /// Builds from `(level, probability)` pairs; equal levels are merged.
    pub fn new(mut atoms: Vec<(T, T)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(ContestError::InvalidDistribution("no atoms".into()));
        }
        for &(x, p) in &atoms {
            if !x.is_finite() || x < T::zero() {
                return Err(ContestError::InvalidDistribution(format!(
                    "level {x} is not a nonnegative real"
                )));
            }
            if !(p > T::zero()) || !p.is_finite() {
                return Err(ContestError::InvalidDistribution(format!(
                    "probability {p} is not positive"
                )));
            }
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite levels"));
        let mut levels: Vec<T> = Vec::with_capacity(atoms.len());
        let mut probs: Vec<T> = Vec::with_capacity(atoms.len());
        for (x, p) in atoms {
            match levels.last() {
                Some(&last) if last == x => {
                    let top = probs.last_mut().expect("parallel vectors");
                    *top = *top + p;
                }
                _ => {
                    levels.push(x);
                    probs.push(p);
                }
            }
        }
        let mut cum = Vec::with_capacity(probs.len() + 1);
        let mut acc = T::zero();
        cum.push(acc);
        for &p in &probs {
            acc = acc + p;
            cum.push(acc);
        }
        if (acc - T::one()).abs() > T::tol(1e-12) {
            return Err(ContestError::InvalidDistribution(format!(
                "probabilities sum to {acc}"
            )));
        }
        Ok(Self { levels, probs, cum })
    }

    /// Empirical distribution putting mass `1/len` on each sample.
    pub fn empirical(samples: &[T]) -> Result<Self> {
        let p = T::one() / T::from_usize_lossy(samples.len().max(1));
        Self::new(samples.iter().map(|&x| (x, p)).collect())
    }

    pub fn atoms(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.levels.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// `F(x)`.
    pub fn cdf(&self, x: T) -> T {
        let idx = self.levels.partition_point(|&l| l <= x);
        self.cum[idx].min(T::one())
    }

    /// `F(x-)`.
    pub fn cdf_left(&self, x: T) -> T {
        let idx = self.levels.partition_point(|&l| l < x);
        self.cum[idx].min(T::one())
    }
}

/// Expected reward for stopping at `x` when each of the other `n - 1` players
/// stops independently according to `others`.
///
/// Sums over configurations with `i` opponents above, `j` below and `k` tied;
/// a tie pays the average of the `k + 1` prizes `R_{i+1} ..= R_{n-j}`.
pub fn payoff_against<T: Scalar>(
    reward: &RewardScheme<T>,
    others: &DiscreteDistribution<T>,
    x: T,
) -> T {
    let r = reward.as_slice();
    let n = r.len();
    let below = others.cdf_left(x);
    let at_or_below = others.cdf(x);
    let above = (T::one() - at_or_below).max(T::zero());
    let tied = (at_or_below - below).max(T::zero());

    let mut prefix = vec![T::zero(); n + 1];
    for (i, &v) in r.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    let m = n - 1;
    let mut total = T::zero();
    for i in 0..=m {
        let ci = binomial_f64(m, i);
        for j in 0..=(m - i) {
            let k = m - i - j;
            let weight = T::lit(ci * binomial_f64(m - i, j))
                * above.powi(i as i32)
                * below.powi(j as i32)
                * tied.powi(k as i32);
            if weight == T::zero() {
                continue;
            }
            let pot = prefix[n - j] - prefix[i];
            total = total + weight * pot / T::from_usize_lossy(k + 1);
        }
    }
    total
}
