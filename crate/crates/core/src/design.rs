//! Optimal reward design for a principal who cares about the average
//! player, the winner, or the `k`-th ranked player.
//!
//! Normalized schemes are exactly the convex combinations of the cut-off
//! schemes `R^1, ..., R^{n-1}`, so a scheme is parametrized by weights on
//! the simplex. The `k`-th rank objective is linear in those weights at zero
//! drift, convex for positive drift and strictly concave for negative drift.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::equilibrium::Equilibrium;
use crate::error::{ContestError, Result};
use crate::market::{mu_bar, MarketParams, RewardScheme};
use crate::metrics::{expected_performance, order_stat_mean, phi_coeff, OrderStatQuery};
use crate::payoff::{bernstein_kernel, RankPolynomial};
use crate::quadrature::{self, integrate_unit};
use crate::scalar::Scalar;

/// Seed of the random schemes used to verify the first-rank optimum when
/// none is supplied.
pub const FIRST_RANK_SWEEP_SEED: u64 = 0x5eed_0001;
const FIRST_RANK_SWEEP_SIZE: usize = 50;
const TIE_TOL: f64 = 1e-10;

/// Cut-off at `j`: reward `1/j` to each of the first `j` ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutoffScheme {
    j: usize,
}

impl CutoffScheme {
    pub fn new(j: usize, n: usize) -> Result<Self> {
        if j == 0 || j >= n {
            return Err(ContestError::OutOfRange(format!(
                "cut-off {j} outside [1, {}]",
                n.saturating_sub(1)
            )));
        }
        Ok(Self { j })
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn expand<T: Scalar>(&self, n: usize) -> Result<RewardScheme<T>> {
        RewardScheme::cutoff(n, self.j)
    }
}

/// Weights over the cut-off schemes `R^1, ..., R^{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights<T> {
    lambda: Vec<T>,
}

impl<T: Scalar> SimplexWeights<T> {
    pub fn new(lambda: Vec<T>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(ContestError::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        if lambda.iter().any(|&l| !(l >= T::zero())) {
            return Err(ContestError::OutOfRange(
                "simplex weights must be nonnegative".into(),
            ));
        }
        let s: T = lambda.iter().copied().sum();
        if (s - T::one()).abs() > T::tol(1e-12) {
            return Err(ContestError::OutOfRange(format!(
                "simplex weights sum to {s}"
            )));
        }
        Ok(Self { lambda })
    }

    /// Unit vector on cut-off `j` (1-based).
    pub fn vertex(n: usize, j: usize) -> Result<Self> {
        CutoffScheme::new(j, n)?;
        let mut lambda = vec![T::zero(); n - 1];
        lambda[j - 1] = T::one();
        Ok(Self { lambda })
    }

    pub fn barycenter(n: usize) -> Self {
        let w = T::one() / T::from_usize_lossy(n - 1);
        Self {
            lambda: vec![w; n - 1],
        }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.lambda
    }

    pub fn n(&self) -> usize {
        self.lambda.len() + 1
    }

    pub fn to_scheme(&self) -> Result<RewardScheme<T>> {
        RewardScheme::from_cutoff_weights(self.n(), &self.lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignRegime {
    ClosedFormZeroDrift,
    EnumerationPositiveDrift,
    ConcaveAscentNegativeDrift,
    ClosedFormAverage,
    ClosedFormFirstRank,
}

impl DesignRegime {
    pub fn name(&self) -> &'static str {
        match self {
            DesignRegime::ClosedFormZeroDrift => "ClosedFormZeroDrift",
            DesignRegime::EnumerationPositiveDrift => "EnumerationPositiveDrift",
            DesignRegime::ConcaveAscentNegativeDrift => "ConcaveAscentNegativeDrift",
            DesignRegime::ClosedFormAverage => "ClosedFormAverage",
            DesignRegime::ClosedFormFirstRank => "ClosedFormFirstRank",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignDiagnostics<T> {
    /// `k*` of the targeted rank, when one is targeted.
    pub k_star: Option<usize>,
    /// `(j, objective)` for every cut-off; `None` marks cut-offs excluded by the drift bound.
    pub enumeration: Vec<(usize, Option<T>)>,
    /// Optimal cut-off index, when the optimum is a cut-off.
    pub cutoff: Option<usize>,
    /// Optimal cut-off lies at or below `k*`.
    pub within_k_star: bool,
    /// Optimal cut-off lies strictly below the targeted rank.
    pub below_k: bool,
    pub iterations: usize,
    pub projected_gradient_norm: Option<T>,
    /// Optimal cut-off weights found by the concave ascent.
    pub weights: Option<Vec<T>>,
    /// Every scheme yields the same objective (average objective at zero drift).
    pub all_equivalent: bool,
    /// Smallest `E[Y^(1)](WTA) - E[Y^(1)](R)` over the random comparison schemes.
    pub verification_margin: Option<T>,
    pub verification_count: usize,
}

impl<T> Default for DesignDiagnostics<T> {
    fn default() -> Self {
        Self {
            k_star: None,
            enumeration: Vec::new(),
            cutoff: None,
            within_k_star: false,
            below_k: false,
            iterations: 0,
            projected_gradient_norm: None,
            weights: None,
            all_equivalent: false,
            verification_margin: None,
            verification_count: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignResult<T> {
    pub scheme: RewardScheme<T>,
    pub objective_value: T,
    pub regime: DesignRegime,
    pub diagnostics: DesignDiagnostics<T>,
}

/// Largest `j` in `[k, n-1]` with `(j-1) phi(k,j) >= sum_{l<j} phi(k,l)`:
/// the optimal cut-off for the `k`-th rank at zero drift.
pub fn k_star(n: usize, k: usize) -> Result<usize> {
    OrderStatQuery::new(k, n)?;
    let phis = (1..n)
        .map(|l| phi_coeff(n, k, l))
        .collect::<Result<Vec<_>>>()?;
    let mut best = k;
    let mut running = num_bigint::BigUint::from(0u32);
    for j in 1..n {
        let phi_j = &phis[j - 1];
        if j >= k && phi_j * num_bigint::BigUint::from(j - 1) >= running {
            best = j;
        }
        running += phi_j;
    }
    Ok(best)
}

/// `A` and `B` for a drifted market.
fn drift_constants<T: Scalar>(market: &MarketParams<T>) -> Result<(T, T)> {
    if market.is_driftless() {
        return Err(ContestError::InvalidMarket(
            "the weight objective needs a nonzero drift".into(),
        ));
    }
    let a = -T::lit(2.0) * market.mu() / (market.sigma() * market.sigma());
    Ok((a, (a * market.x0()).exp_m1()))
}

fn blended_first_prize<T: Scalar>(lambda: &[T]) -> T {
    lambda
        .iter()
        .enumerate()
        .map(|(i, &l)| l / T::from_usize_lossy(i + 1))
        .sum()
}

fn check_blend_feasible<T: Scalar>(market: &MarketParams<T>, b: T, lambda: &[T]) -> Result<()> {
    let n = T::from_usize_lossy(market.n());
    if !(n * b * blended_first_prize(lambda) > -T::one()) {
        let scheme = RewardScheme::from_cutoff_weights(market.n(), lambda)?;
        return Err(ContestError::DriftTooLarge {
            mu: market.mu().as_f64(),
            mu_bar: mu_bar(market, &scheme)?.as_f64(),
        });
    }
    Ok(())
}

fn cutoff_polys<T: Scalar>(n: usize) -> Result<Vec<RankPolynomial<T>>> {
    (1..n)
        .map(|j| Ok(RankPolynomial::new(&RewardScheme::cutoff(n, j)?)))
        .collect()
}

/// `J(lambda) = A^-1 int_0^1 ln(nB sum_i lambda_i g^i(y) + 1) y^(n-k) (1-y)^(k-1) dy`,
/// with `E[Y^(k)] = n C(n-1,k-1) J(lambda)`.
pub fn objective_j<T: Scalar>(
    market: &MarketParams<T>,
    k: usize,
    lambda: &SimplexWeights<T>,
) -> Result<T> {
    let n = market.n();
    OrderStatQuery::new(k, n)?;
    if lambda.n() != n {
        return Err(ContestError::DimensionMismatch {
            expected: n - 1,
            got: lambda.as_slice().len(),
        });
    }
    let (a, b) = drift_constants(market)?;
    check_blend_feasible(market, b, lambda.as_slice())?;
    let polys = cutoff_polys::<T>(n)?;
    let nb = T::from_usize_lossy(n) * b;
    let i = integrate_unit(|y| {
        let blend: T = lambda
            .as_slice()
            .iter()
            .zip(&polys)
            .map(|(&l, p)| l * p.eval(y))
            .sum();
        (nb * blend).ln_1p() * bernstein_kernel(y, n - k, k - 1)
    });
    Ok(i.value / a)
}

/// Gradient of [`objective_j`] with respect to the weights.
pub fn grad_j<T: Scalar>(
    market: &MarketParams<T>,
    k: usize,
    lambda: &SimplexWeights<T>,
) -> Result<Vec<T>> {
    let n = market.n();
    OrderStatQuery::new(k, n)?;
    if lambda.n() != n {
        return Err(ContestError::DimensionMismatch {
            expected: n - 1,
            got: lambda.as_slice().len(),
        });
    }
    let (a, b) = drift_constants(market)?;
    check_blend_feasible(market, b, lambda.as_slice())?;
    let polys = cutoff_polys::<T>(n)?;
    let nb = T::from_usize_lossy(n) * b;
    Ok((0..n - 1)
        .map(|i| {
            integrate_unit(|y| {
                let blend: T = lambda
                    .as_slice()
                    .iter()
                    .zip(&polys)
                    .map(|(&l, p)| l * p.eval(y))
                    .sum();
                nb * polys[i].eval(y) / (nb * blend + T::one()) * bernstein_kernel(y, n - k, k - 1)
            })
            .value
                / a
        })
        .collect())
}

/// `J` frozen on one quadrature rule, with the cut-off polynomials
/// tabulated at its nodes, so repeated evaluations are consistent.
struct RankObjective<T> {
    a: T,
    nb: T,
    weights: Vec<T>,
    /// `basis[i][m] = g^{i+1}(y_m)`
    basis: Vec<Vec<T>>,
}

impl<T: Scalar> RankObjective<T> {
    fn new(market: &MarketParams<T>, k: usize) -> Result<Self> {
        let n = market.n();
        let (a, b) = drift_constants(market)?;
        let nb = T::from_usize_lossy(n) * b;
        let polys = cutoff_polys::<T>(n)?;
        // large enough for every vertex integrand
        let size = polys
            .iter()
            .map(|p| {
                quadrature::converged_size(|y: T| {
                    (nb * p.eval(y)).ln_1p() * bernstein_kernel(y, n - k, k - 1)
                })
            })
            .max()
            .unwrap_or(quadrature::MAX_NODES);
        let rule = quadrature::rule(size);
        let nodes: Vec<T> = rule.nodes.iter().map(|&y| T::lit(y)).collect();
        let weights = rule
            .weights
            .iter()
            .zip(&nodes)
            .map(|(&w, &y)| T::lit(w) * bernstein_kernel(y, n - k, k - 1))
            .collect();
        let basis = polys
            .iter()
            .map(|p| nodes.iter().map(|&y| p.eval(y)).collect())
            .collect();
        Ok(Self {
            a,
            nb,
            weights,
            basis,
        })
    }

    fn blend(&self, lambda: &[T], m: usize) -> T {
        lambda.iter().zip(&self.basis).map(|(&l, g)| l * g[m]).sum()
    }

    fn value(&self, lambda: &[T]) -> T {
        let s: T = self
            .weights
            .iter()
            .enumerate()
            .map(|(m, &w)| w * (self.nb * self.blend(lambda, m)).ln_1p())
            .sum();
        s / self.a
    }

    fn gradient(&self, lambda: &[T]) -> Vec<T> {
        let inv: Vec<T> = (0..self.weights.len())
            .map(|m| self.weights[m] * self.nb / (self.nb * self.blend(lambda, m) + T::one()))
            .collect();
        self.basis
            .iter()
            .map(|g| g.iter().zip(&inv).map(|(&gi, &w)| gi * w).sum::<T>() / self.a)
            .collect()
    }
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_to_simplex<T: Scalar>(v: &[T]) -> Vec<T> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite coordinates"));
    let mut cum = T::zero();
    let mut theta = T::zero();
    for (j, &uj) in u.iter().enumerate() {
        cum = cum + uj;
        let t = (cum - T::one()) / T::from_usize_lossy(j + 1);
        if uj - t > T::zero() {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(T::zero())).collect()
}

/// Settings of the projected gradient ascent used for negative drift.
#[derive(Debug, Clone, PartialEq)]
pub struct AscentOptions<T> {
    /// Search the whole simplex instead of the face spanned by `R^{k*}, ..., R^{n-1}`.
    pub full_simplex: bool,
    /// Starting weights over all `n - 1` cut-offs; defaults to the barycenter
    /// of the searched face.
    pub start: Option<SimplexWeights<T>>,
    pub tolerance: T,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for AscentOptions<T> {
    fn default() -> Self {
        Self {
            full_simplex: false,
            start: None,
            tolerance: T::tol(1e-9),
            max_iterations: 10_000,
        }
    }
}

struct AscentOutcome<T> {
    lambda: Vec<T>,
    iterations: usize,
    pg_norm: T,
}

fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Projected gradient ascent with Armijo backtracking on the face `active`.
fn concave_ascent<T: Scalar>(
    objective: &RankObjective<T>,
    n: usize,
    active: &[usize],
    opts: &AscentOptions<T>,
) -> Result<AscentOutcome<T>> {
    let embed = |x: &[T]| {
        let mut full = vec![T::zero(); n - 1];
        for (&i, &v) in active.iter().zip(x) {
            full[i] = v;
        }
        full
    };
    let mut x = match &opts.start {
        Some(s) => project_to_simplex(&active.iter().map(|&i| s.as_slice()[i]).collect::<Vec<_>>()),
        None => vec![T::one() / T::from_usize_lossy(active.len()); active.len()],
    };
    let armijo = T::lit(1e-4);
    let mut step = T::one();
    let mut value = objective.value(&embed(&x));
    for iter in 0..opts.max_iterations {
        let full_grad = objective.gradient(&embed(&x));
        let grad: Vec<T> = active.iter().map(|&i| full_grad[i]).collect();
        let probe: Vec<T> = x.iter().zip(&grad).map(|(&xi, &gi)| xi + gi).collect();
        let pg: Vec<T> = project_to_simplex(&probe)
            .iter()
            .zip(&x)
            .map(|(&p, &xi)| p - xi)
            .collect();
        let pg_norm = norm(&pg);
        if pg_norm < opts.tolerance {
            return Ok(AscentOutcome {
                lambda: embed(&x),
                iterations: iter,
                pg_norm,
            });
        }
        // objective differences below this are rounding noise
        let slack = T::epsilon() * T::lit(16.0) * value.abs().max(T::min_positive_value());
        step = (step * T::lit(2.0)).min(T::lit(1e8));
        loop {
            let trial: Vec<T> = x
                .iter()
                .zip(&grad)
                .map(|(&xi, &gi)| xi + step * gi)
                .collect();
            let cand = project_to_simplex(&trial);
            let ascent: T = cand
                .iter()
                .zip(&x)
                .zip(&grad)
                .map(|((&c, &xi), &gi)| (c - xi) * gi)
                .sum();
            let cand_value = objective.value(&embed(&cand));
            if cand_value >= value + armijo * ascent - slack {
                x = cand;
                value = cand_value;
                break;
            }
            step = step / T::lit(2.0);
            if step < T::lit(1e-30) {
                return Err(ContestError::NotConverged(format!(
                    "line search stalled at projected gradient norm {pg_norm}"
                )));
            }
        }
    }
    Err(ContestError::NotConverged(format!(
        "no convergence within {} iterations",
        opts.max_iterations
    )))
}

/// Best normalized reward for the expected level of the `k`-th ranked player.
pub fn optimize_rank_k<T: Scalar>(market: &MarketParams<T>, k: usize) -> Result<DesignResult<T>> {
    optimize_rank_k_with(market, k, &AscentOptions::default())
}

pub fn optimize_rank_k_with<T: Scalar>(
    market: &MarketParams<T>,
    k: usize,
    opts: &AscentOptions<T>,
) -> Result<DesignResult<T>> {
    let n = market.n();
    let query = OrderStatQuery::new(k, n)?;
    let kstar = k_star(n, k)?;
    let mut diagnostics = DesignDiagnostics {
        k_star: Some(kstar),
        ..Default::default()
    };

    if market.is_driftless() {
        let scheme = RewardScheme::cutoff(n, kstar)?;
        let eq = Equilibrium::build(market, &scheme)?;
        let objective_value = order_stat_mean(&eq, query)?;
        diagnostics.cutoff = Some(kstar);
        diagnostics.within_k_star = true;
        diagnostics.below_k = kstar < k;
        return Ok(DesignResult {
            scheme,
            objective_value,
            regime: DesignRegime::ClosedFormZeroDrift,
            diagnostics,
        });
    }

    if market.mu() > T::zero() {
        let mut best: Option<(usize, T)> = None;
        for j in 1..n {
            let scheme = RewardScheme::cutoff(n, j)?;
            let value = match Equilibrium::build(market, &scheme) {
                Ok(eq) => Some(order_stat_mean(&eq, query)?),
                Err(ContestError::DriftTooLarge { .. }) => None,
                Err(e) => return Err(e),
            };
            diagnostics.enumeration.push((j, value));
            if let Some(v) = value {
                let better = match best {
                    None => true,
                    Some((_, bv)) => v > bv + T::lit(TIE_TOL) * bv.abs().max(T::one()),
                };
                if better {
                    best = Some((j, v));
                }
            }
        }
        let (j, objective_value) = best.ok_or(ContestError::NoFeasibleScheme)?;
        diagnostics.cutoff = Some(j);
        diagnostics.within_k_star = j <= kstar;
        diagnostics.below_k = j < k;
        return Ok(DesignResult {
            scheme: RewardScheme::cutoff(n, j)?,
            objective_value,
            regime: DesignRegime::EnumerationPositiveDrift,
            diagnostics,
        });
    }

    let objective = RankObjective::new(market, k)?;
    let active: Vec<usize> = if opts.full_simplex {
        (0..n - 1).collect()
    } else {
        (kstar - 1..n - 1).collect()
    };
    let outcome = concave_ascent(&objective, n, &active, opts)?;
    let scheme = RewardScheme::from_cutoff_weights(n, &outcome.lambda)?.normalize()?;
    let eq = Equilibrium::build(market, &scheme)?;
    let objective_value = order_stat_mean(&eq, query)?;
    let support: Vec<usize> = outcome
        .lambda
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > T::zero())
        .map(|(i, _)| i + 1)
        .collect();
    if let [j] = support[..] {
        diagnostics.cutoff = Some(j);
        diagnostics.below_k = j < k;
    }
    diagnostics.within_k_star = support.first().is_some_and(|&j| j >= kstar);
    diagnostics.iterations = outcome.iterations;
    diagnostics.projected_gradient_norm = Some(outcome.pg_norm);
    diagnostics.weights = Some(outcome.lambda);
    Ok(DesignResult {
        scheme,
        objective_value,
        regime: DesignRegime::ConcaveAscentNegativeDrift,
        diagnostics,
    })
}

/// Best normalized reward for the mean level `E[X]`: winner-takes-all under
/// positive drift, uniform under negative drift, anything at zero drift.
pub fn optimize_average<T: Scalar>(market: &MarketParams<T>) -> Result<DesignResult<T>> {
    let n = market.n();
    let driftless = market.is_driftless();
    let scheme = if !driftless && market.mu() > T::zero() {
        RewardScheme::winner_takes_all(n)?
    } else {
        RewardScheme::uniform(n)?
    };
    let eq = Equilibrium::build(market, &scheme)?;
    let diagnostics = DesignDiagnostics {
        all_equivalent: driftless,
        ..Default::default()
    };
    Ok(DesignResult {
        objective_value: expected_performance(&eq),
        scheme,
        regime: DesignRegime::ClosedFormAverage,
        diagnostics,
    })
}

/// Best normalized reward for the winner's level: always winner-takes-all.
///
/// Diagnostics carry a sweep comparing against 50 random schemes.
pub fn optimize_first_rank<T: Scalar>(market: &MarketParams<T>) -> Result<DesignResult<T>> {
    optimize_first_rank_seeded(market, FIRST_RANK_SWEEP_SEED)
}

pub fn optimize_first_rank_seeded<T: Scalar>(
    market: &MarketParams<T>,
    seed: u64,
) -> Result<DesignResult<T>> {
    let n = market.n();
    let query = OrderStatQuery::new(1, n)?;
    let scheme = RewardScheme::winner_takes_all(n)?;
    let best = order_stat_mean(&Equilibrium::build(market, &scheme)?, query)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut margin: Option<T> = None;
    let mut count = 0;
    while count < FIRST_RANK_SWEEP_SIZE {
        let other = RewardScheme::<T>::random_normalized(n, &mut rng)?;
        if other.first() >= T::one() - T::tol(1e-12) {
            continue;
        }
        let v = order_stat_mean(&Equilibrium::build(market, &other)?, query)?;
        let gap = best - v;
        margin = Some(margin.map_or(gap, |m: T| m.min(gap)));
        count += 1;
    }
    let diagnostics = DesignDiagnostics {
        cutoff: Some(1),
        within_k_star: true,
        k_star: Some(1),
        verification_margin: margin,
        verification_count: count,
        ..Default::default()
    };
    Ok(DesignResult {
        scheme,
        objective_value: best,
        regime: DesignRegime::ClosedFormFirstRank,
        diagnostics,
    })
}
