//! Market parameters, rank-based reward schemes and the Lorenz order on them.

use crate::error::{ContestError, Result};
use crate::scalar::Scalar;

/// Common diffusion parameters shared by all players: initial level `x0`,
/// drift `mu`, volatility `sigma`, and the number of players `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams<T> {
    x0: T,
    mu: T,
    sigma: T,
    n: usize,
}

impl<T: Scalar> MarketParams<T> {
    pub fn new(x0: T, mu: T, sigma: T, n: usize) -> Result<Self> {
        if !(x0 > T::zero()) || !x0.is_finite() {
            return Err(ContestError::InvalidMarket(format!(
                "x0 must be positive, got {x0}"
            )));
        }
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(ContestError::InvalidMarket(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if !mu.is_finite() {
            return Err(ContestError::InvalidMarket(format!(
                "mu must be finite, got {mu}"
            )));
        }
        if n < 2 {
            return Err(ContestError::InvalidMarket(format!(
                "need at least 2 players, got {n}"
            )));
        }
        Ok(Self { x0, mu, sigma, n })
    }

    pub fn x0(&self) -> T {
        self.x0
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Same market with a different drift.
    pub fn with_mu(&self, mu: T) -> Result<Self> {
        Self::new(self.x0, mu, self.sigma, self.n)
    }

    /// Same market with a different player count.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(self.x0, self.mu, self.sigma, n)
    }

    /// Drifts with `|mu| < 1e-12 sigma^2 / x0` are treated as zero.
    pub fn is_driftless(&self) -> bool {
        self.mu.abs() < T::lit(1e-12) * self.sigma * self.sigma / self.x0
    }

    /// `sigma^2 / (2 x0)`, the prefactor of every drift bound.
    pub(crate) fn drift_scale(&self) -> T {
        self.sigma * self.sigma / (T::lit(2.0) * self.x0)
    }
}

/// Rewards by rank, index 0 holding the first prize.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardScheme<T> {
    r: Vec<T>,
}

impl<T: Scalar> RewardScheme<T> {
    /// Checks `r[0] >= r[1] >= ... >= r[n-1] >= 0` and `r[0] > r[n-1]`.
    pub fn new(r: Vec<T>) -> Result<Self> {
        if r.len() < 2 {
            return Err(ContestError::DimensionMismatch {
                expected: 2,
                got: r.len(),
            });
        }
        for (i, v) in r.iter().enumerate() {
            if !v.is_finite() || *v < T::zero() {
                return Err(ContestError::NonMonotoneReward { rank: i + 1 });
            }
        }
        if let Some(i) = r.windows(2).position(|w| w[1] > w[0]) {
            return Err(ContestError::NonMonotoneReward { rank: i + 2 });
        }
        if !(r[0] > r[r.len() - 1]) {
            return Err(ContestError::DegenerateReward);
        }
        Ok(Self { r })
    }

    /// Entire reward to the first rank.
    pub fn winner_takes_all(n: usize) -> Result<Self> {
        Self::cutoff(n, 1)
    }

    /// Equal rewards to ranks `1..n-1`, nothing to the last.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::cutoff(n, n.saturating_sub(1))
    }

    /// Normalized cut-off at `j`: `1/j` to each of the first `j` ranks.
    pub fn cutoff(n: usize, j: usize) -> Result<Self> {
        if n < 2 || j == 0 || j >= n {
            return Err(ContestError::OutOfRange(format!(
                "cut-off index {j} must lie in [1, {}]",
                n.saturating_sub(1)
            )));
        }
        let share = T::one() / T::from_usize_lossy(j);
        Self::new(
            (0..n)
                .map(|i| if i < j { share } else { T::zero() })
                .collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.r.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.r
    }

    pub fn into_vec(self) -> Vec<T> {
        self.r
    }

    /// First prize `R1`.
    pub fn first(&self) -> T {
        self.r[0]
    }

    /// Last prize `Rn`.
    pub fn last(&self) -> T {
        self.r[self.r.len() - 1]
    }

    pub fn total(&self) -> T {
        self.r.iter().copied().sum()
    }

    pub fn average(&self) -> T {
        self.total() / T::from_usize_lossy(self.n())
    }

    /// Shift so the last prize is zero and scale to unit total.
    ///
    /// Idempotent; leaves the equilibrium distribution unchanged.
    pub fn normalize(&self) -> Result<Self> {
        let last = self.last();
        let spread: T = self.r.iter().map(|&v| v - last).sum();
        if !(spread > T::zero()) {
            return Err(ContestError::DegenerateReward);
        }
        let mut r: Vec<T> = self.r.iter().map(|&v| (v - last) / spread).collect();
        // Division can leave the sum a few ulps away from one.
        let s: T = r.iter().copied().sum();
        if s != T::one() {
            r.iter_mut().for_each(|v| *v = *v / s);
        }
        let n = r.len();
        r[n - 1] = T::zero();
        Self::new(r)
    }

    pub fn is_normalized(&self) -> bool {
        self.last() == T::zero() && (self.total() - T::one()).abs() <= T::tol(1e-12)
    }

    /// Convex blend `sum_i weights[i] * cutoff(i + 1)` of the `n - 1` cut-off schemes.
    pub fn from_cutoff_weights(n: usize, weights: &[T]) -> Result<Self> {
        if weights.len() + 1 != n {
            return Err(ContestError::DimensionMismatch {
                expected: n - 1,
                got: weights.len(),
            });
        }
        let mut r = vec![T::zero(); n];
        for (idx, &w) in weights.iter().enumerate() {
            let j = idx + 1;
            let share = w / T::from_usize_lossy(j);
            r.iter_mut().take(j).for_each(|v| *v = *v + share);
        }
        Self::new(r)
    }

    /// Random normalized scheme: cut-off weights drawn uniformly from the simplex.
    pub fn random_normalized<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(ContestError::DimensionMismatch {
                expected: 2,
                got: n,
            });
        }
        let draws: Vec<f64> = (0..n - 1)
            .map(|_| -(1.0 - rng.random::<f64>()).ln())
            .collect();
        let total: f64 = draws.iter().sum();
        let weights: Vec<T> = draws.iter().map(|&d| T::lit(d / total)).collect();
        Self::from_cutoff_weights(n, &weights)?.normalize()
    }

    /// Inverse of [`RewardScheme::from_cutoff_weights`] for a normalized scheme:
    /// `lambda_j = j (R_j - R_{j+1})`.
    pub fn cutoff_weights(&self) -> Vec<T> {
        (0..self.n() - 1)
            .map(|i| T::from_usize_lossy(i + 1) * (self.r[i] - self.r[i + 1]))
            .collect()
    }
}

/// Outcome of comparing two equal-total schemes by prefix sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LorenzRelation {
    /// First argument is less unequal.
    LessEqual,
    /// First argument is more unequal.
    GreaterEqual,
    Equal,
    Incomparable,
}

/// Compares prefix sums of two normalized schemes; ties within `1e-12`.
pub fn lorenz_compare<T: Scalar>(
    a: &RewardScheme<T>,
    b: &RewardScheme<T>,
) -> Result<LorenzRelation> {
    if a.n() != b.n() {
        return Err(ContestError::DimensionMismatch {
            expected: a.n(),
            got: b.n(),
        });
    }
    let tol = T::tol(1e-12);
    let (mut sa, mut sb) = (T::zero(), T::zero());
    let (mut below, mut above) = (false, false);
    for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
        sa = sa + x;
        sb = sb + y;
        if sa < sb - tol {
            below = true;
        } else if sa > sb + tol {
            above = true;
        }
    }
    Ok(match (below, above) {
        (false, false) => LorenzRelation::Equal,
        (true, false) => LorenzRelation::LessEqual,
        (false, true) => LorenzRelation::GreaterEqual,
        (true, true) => LorenzRelation::Incomparable,
    })
}

/// Largest drift for which the equilibrium support stays bounded:
/// `sigma^2/(2 x0) * ln((R1 - Rn) / (R1 - Rbar))`.
pub fn mu_bar<T: Scalar>(market: &MarketParams<T>, reward: &RewardScheme<T>) -> Result<T> {
    let (r1, rn, rbar) = (reward.first(), reward.last(), reward.average());
    if !(r1 > rn) || !(r1 > rbar) {
        return Err(ContestError::DegenerateReward);
    }
    Ok(market.drift_scale() * ((r1 - rn) / (r1 - rbar)).ln())
}

/// Checks that `reward` fits the market and that `mu < mu_bar(reward)`.
pub fn validate<T: Scalar>(market: &MarketParams<T>, reward: &RewardScheme<T>) -> Result<()> {
    if reward.n() != market.n() {
        return Err(ContestError::DimensionMismatch {
            expected: market.n(),
            got: reward.n(),
        });
    }
    let bound = mu_bar(market, reward)?;
    if !(market.mu() < bound) {
        return Err(ContestError::DriftTooLarge {
            mu: market.mu().as_f64(),
            mu_bar: bound.as_f64(),
        });
    }
    Ok(())
}
