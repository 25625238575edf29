//! Principal objectives evaluated on an equilibrium: mean performance,
//! duration, expected utility, order-statistic means, plus the single
//! crossing and second-order dominance comparisons between two equilibria.
//!
//! Every expectation is an integral over quantile levels `y in [0, 1]`.

use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use crate::equilibrium::{Equilibrium, Regime};
use crate::error::{ContestError, Result};
use crate::payoff::{bernstein_kernel, binomial_f64};
use crate::quadrature::{integrate_unit, Rule};
use crate::scalar::Scalar;

/// Largest `n` for which [`phi_coeff_f64`] is attempted.
pub const PHI_FLOAT_CAP: usize = 170;

/// Reverse rank `k` (1 = largest level) among `n` players, `1 <= k <= n - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderStatQuery {
    k: usize,
}

impl OrderStatQuery {
    pub fn new(k: usize, n: usize) -> Result<Self> {
        if k == 0 || k >= n {
            return Err(ContestError::OutOfRange(format!(
                "rank {k} outside [1, {}]",
                n.saturating_sub(1)
            )));
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

fn product(from: usize, to: usize) -> BigUint {
    (from..=to).fold(BigUint::one(), |acc, t| acc * BigUint::from(t))
}

fn factorial(m: usize) -> BigUint {
    product(1, m)
}

/// `phi(k, l) = (2n-k-l)! (k+l-2)! / ((n-l)! (l-1)!)`, exact.
///
/// Always an integer: both quotients are products of consecutive integers.
pub fn phi_coeff(n: usize, k: usize, l: usize) -> Result<BigUint> {
    if k == 0 || k > n || l == 0 || l > n {
        return Err(ContestError::OutOfRange(format!(
            "phi({k}, {l}) needs 1 <= k, l <= {n}"
        )));
    }
    Ok(product(n - l + 1, 2 * n - k - l) * product(l, k + l - 2))
}

/// Float value of [`phi_coeff`]; refuses `n` above [`PHI_FLOAT_CAP`].
pub fn phi_coeff_f64(n: usize, k: usize, l: usize) -> Result<f64> {
    if n > PHI_FLOAT_CAP {
        return Err(ContestError::Overflow {
            n,
            cap: PHI_FLOAT_CAP,
        });
    }
    let v = phi_coeff(n, k, l)?;
    v.to_f64()
        .filter(|x| x.is_finite())
        .ok_or(ContestError::Overflow {
            n,
            cap: PHI_FLOAT_CAP,
        })
}

/// Exact weights `c_l = n!/(2n-1)! C(n-1,k-1) phi(k,l)` with
/// `E[Y^(k)] = n x0 sum_l R_l c_l` at zero drift.
pub(crate) fn driftless_order_weights(n: usize, k: usize) -> Vec<f64> {
    let binom = factorial(n - 1) / (factorial(k - 1) * factorial(n - k));
    let scale = factorial(n) * binom;
    let denom = BigInt::from(factorial(2 * n - 1));
    (1..=n)
        .map(|l| {
            let phi = phi_coeff(n, k, l).expect("l in range");
            BigRational::new(BigInt::from(&scale * phi), denom.clone())
                .to_f64()
                .expect("ratio below one")
        })
        .collect()
}

/// `E[X]`, the mean stopping level.
pub fn expected_performance<T: Scalar>(eq: &Equilibrium<T>) -> T {
    integrate_unit(|y| eq.quantile_unchecked(y)).value
}

/// `E[tau]` from optional sampling: `(E[X] - x0) / mu`, or
/// `(E[X^2] - x0^2) / sigma^2` at zero drift.
pub fn expected_duration<T: Scalar>(eq: &Equilibrium<T>) -> T {
    let m = eq.market();
    match eq.regime() {
        Regime::Drifted => (expected_performance(eq) - m.x0()) / m.mu(),
        Regime::Driftless => {
            let second = integrate_unit(|y| {
                let q = eq.quantile_unchecked(y);
                q * q
            })
            .value;
            (second - m.x0() * m.x0()) / (m.sigma() * m.sigma())
        }
    }
}

/// `E[phi(X)]` for a utility defined on the support.
pub fn expected_utility<T: Scalar, F: Fn(T) -> T>(eq: &Equilibrium<T>, phi: F) -> T {
    integrate_unit(|y| phi(eq.quantile_unchecked(y))).value
}

/// Built-in increasing utilities of the principal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Utility<T> {
    Linear,
    /// `x^gamma`
    Power(T),
    /// `-exp(-gamma x) / gamma`
    Exponential(T),
}

impl<T: Scalar> Utility<T> {
    pub fn eval(&self, x: T) -> T {
        match *self {
            Utility::Linear => x,
            Utility::Power(g) => x.max(T::zero()).powf(g),
            Utility::Exponential(g) => -(-g * x).exp() / g,
        }
    }

    pub fn expected(&self, eq: &Equilibrium<T>) -> T {
        expected_utility(eq, |x| self.eval(x))
    }
}

/// Mean of the `k`-th largest of the `n` equilibrium levels, `1 <= k <= n-1`.
///
/// Closed form with exact `phi` weights at zero drift, quadrature otherwise.
pub fn order_stat_mean<T: Scalar>(eq: &Equilibrium<T>, query: OrderStatQuery) -> Result<T> {
    let n = eq.n();
    let k = OrderStatQuery::new(query.k(), n)?.k();
    match eq.regime() {
        Regime::Driftless => {
            let weights = driftless_order_weights(n, k);
            let s: T = eq
                .reward()
                .as_slice()
                .iter()
                .zip(&weights)
                .map(|(&r, &c)| r * T::lit(c))
                .sum();
            Ok(T::from_usize_lossy(n) * eq.market().x0() * s)
        }
        Regime::Drifted => order_stat_mean_by_quadrature(eq, query),
    }
}

/// `n C(n-1,k-1) int_0^1 q(y) y^(n-k) (1-y)^(k-1) dy`, in any regime.
pub fn order_stat_mean_by_quadrature<T: Scalar>(
    eq: &Equilibrium<T>,
    query: OrderStatQuery,
) -> Result<T> {
    let n = eq.n();
    let k = OrderStatQuery::new(query.k(), n)?.k();
    let scale = T::from_usize_lossy(n) * T::lit(binomial_f64(n - 1, k - 1));
    let i = integrate_unit(|y| eq.quantile_unchecked(y) * bernstein_kernel(y, n - k, k - 1));
    Ok(scale * i.value)
}

/// Mean level of the last rank, `n E[X] - sum_{k<n} E[Y^(k)]`.
///
/// Not covered by the order-statistic closed form; provided for
/// completeness and cross-checked by simulation.
pub fn order_stat_mean_last<T: Scalar>(eq: &Equilibrium<T>) -> Result<T> {
    let n = eq.n();
    let mut upper = T::zero();
    for k in 1..n {
        upper = upper + order_stat_mean(eq, OrderStatQuery::new(k, n)?)?;
    }
    Ok(T::from_usize_lossy(n) * expected_performance(eq) - upper)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingDirection {
    /// `cdf_b - cdf_a` goes from negative to positive.
    UpCross,
    DownCross,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing<T> {
    pub location: T,
    pub direction: CrossingDirection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingReport<T> {
    pub crossings: Vec<Crossing<T>>,
    pub is_strict_single_crossing: bool,
}

impl<T: Scalar> CrossingReport<T> {
    pub fn up_crossings(&self) -> usize {
        self.crossings
            .iter()
            .filter(|c| c.direction == CrossingDirection::UpCross)
            .count()
    }

    pub fn down_crossings(&self) -> usize {
        self.crossings.len() - self.up_crossings()
    }
}

pub const CROSSING_GRID: usize = 2000;

fn check_same_market<T: Scalar>(a: &Equilibrium<T>, b: &Equilibrium<T>) -> Result<()> {
    if a.n() != b.n() {
        return Err(ContestError::DimensionMismatch {
            expected: a.n(),
            got: b.n(),
        });
    }
    if a.market() != b.market() {
        return Err(ContestError::InvalidMarket(
            "equilibria belong to different markets".into(),
        ));
    }
    Ok(())
}

/// Locates the sign changes of `cdf_b - cdf_a` on a grid of width
/// `max(xbar_a, xbar_b) / 2000`, each refined by bisection to `1e-8`.
///
/// With `b` the less unequal scheme, a single `UpCross` is expected.
pub fn single_crossing<T: Scalar>(
    a: &Equilibrium<T>,
    b: &Equilibrium<T>,
) -> Result<CrossingReport<T>> {
    check_same_market(a, b)?;
    let tol = T::tol(1e-12);
    let identical = a
        .reward()
        .as_slice()
        .iter()
        .zip(b.reward().as_slice())
        .all(|(&x, &y)| (x - y).abs() <= tol);
    if identical {
        return Err(ContestError::IdenticalSchemes);
    }
    let diff = |x: T| b.cdf(x) - a.cdf(x);
    let sign = |d: T| {
        if d > T::tol(1e-11) {
            1
        } else if d < -T::tol(1e-11) {
            -1
        } else {
            0
        }
    };
    let xmax = a.xbar().max(b.xbar());
    let width = T::tol(1e-8);
    let mut crossings = Vec::new();
    let mut last: Option<(T, i32)> = None;
    for i in 1..CROSSING_GRID {
        let x = xmax * T::from_usize_lossy(i) / T::from_usize_lossy(CROSSING_GRID);
        let s = sign(diff(x));
        if s == 0 {
            continue;
        }
        if let Some((x_prev, s_prev)) = last {
            if s != s_prev {
                let (mut lo, mut hi) = (x_prev, x);
                while hi - lo > width * xmax.max(T::one()) {
                    let mid = (lo + hi) / T::lit(2.0);
                    let sm = sign(diff(mid));
                    if sm == s_prev {
                        lo = mid;
                    } else if sm == s {
                        hi = mid;
                    } else {
                        lo = mid;
                        hi = mid;
                    }
                }
                let direction = if s > 0 {
                    CrossingDirection::UpCross
                } else {
                    CrossingDirection::DownCross
                };
                crossings.push(Crossing {
                    location: (lo + hi) / T::lit(2.0),
                    direction,
                });
            }
        }
        last = Some((x, s));
    }
    let is_strict_single_crossing =
        crossings.len() == 1 && crossings[0].direction == CrossingDirection::UpCross;
    Ok(CrossingReport {
        crossings,
        is_strict_single_crossing,
    })
}

fn cell_rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| Rule::new(16))
}

/// True iff `int_0^y (cdf_b - cdf_a) dx <= 1e-9` at every grid point, i.e.
/// `b` dominates `a` in the second (concave) stochastic order.
pub fn second_order_dominance<T: Scalar>(a: &Equilibrium<T>, b: &Equilibrium<T>) -> Result<bool> {
    check_same_market(a, b)?;
    let xmax = a.xbar().max(b.xbar());
    let limit = T::lit(1e-9);
    let mut running = T::zero();
    let step = xmax / T::from_usize_lossy(CROSSING_GRID);
    for i in 0..CROSSING_GRID {
        let lo = step * T::from_usize_lossy(i);
        running = running + cell_rule().integrate_interval(lo, lo + step, |x| b.cdf(x) - a.cdf(x));
        if running > limit {
            return Ok(false);
        }
    }
    Ok(true)
}
