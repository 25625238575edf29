//! The unique symmetric equilibrium of the stopping contest.
//!
//! Players stop at i.i.d. levels with cdf `F = g^-1 o u` on `[0, xbar]`,
//! where `u` is the value function solving `mu u' + sigma^2/2 u'' = 0` with
//! `u(0) = Rn`, `u(x0) = Rbar`, `u(xbar) = R1`. Rewards are normalized on
//! construction, so `u(x) = h(x) / n`.

use crate::error::{ContestError, Result};
use crate::market::{mu_bar, validate, MarketParams, RewardScheme};
use crate::payoff::RankPolynomial;
use crate::quadrature::integrate_unit;
use crate::scalar::Scalar;

/// Normalized scale function: `h(0) = 0`, `h(x0) = 1`, and `h(X_t)` is a
/// martingale for the drifted diffusion.
pub fn scale_h<T: Scalar>(market: &MarketParams<T>, x: T) -> T {
    if market.is_driftless() {
        return x / market.x0();
    }
    let a = drift_exponent(market);
    (a * x).exp_m1() / (a * market.x0()).exp_m1()
}

/// `A = -2 mu / sigma^2`.
fn drift_exponent<T: Scalar>(market: &MarketParams<T>) -> T {
    -T::lit(2.0) * market.mu() / (market.sigma() * market.sigma())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Driftless,
    Drifted,
}

#[derive(Debug, Clone)]
pub struct Equilibrium<T> {
    market: MarketParams<T>,
    reward: RewardScheme<T>,
    poly: RankPolynomial<T>,
    xbar: T,
    mu_bar: T,
    a: T,
    b: T,
    regime: Regime,
}

impl<T: Scalar> Equilibrium<T> {
    /// Validates the pair, normalizes the reward and computes the support bound.
    pub fn build(market: &MarketParams<T>, reward: &RewardScheme<T>) -> Result<Self> {
        validate(market, reward)?;
        let reward = reward.normalize()?;
        let mu_bar = mu_bar(market, &reward)?;
        let n = T::from_usize_lossy(market.n());
        let r1 = reward.first();
        let (a, b, regime, xbar) = if market.is_driftless() {
            (
                T::zero(),
                T::zero(),
                Regime::Driftless,
                n * r1 * market.x0(),
            )
        } else {
            let a = drift_exponent(market);
            let b = (a * market.x0()).exp_m1();
            let arg = n * r1 * b;
            if !(arg > -T::one()) {
                return Err(ContestError::DriftTooLarge {
                    mu: market.mu().as_f64(),
                    mu_bar: mu_bar.as_f64(),
                });
            }
            (a, b, Regime::Drifted, arg.ln_1p() / a)
        };
        if !(xbar > T::zero()) || !xbar.is_finite() {
            return Err(ContestError::DriftTooLarge {
                mu: market.mu().as_f64(),
                mu_bar: mu_bar.as_f64(),
            });
        }
        let poly = RankPolynomial::new(&reward);
        Ok(Self {
            market: *market,
            reward,
            poly,
            xbar,
            mu_bar,
            a,
            b,
            regime,
        })
    }

    pub fn market(&self) -> &MarketParams<T> {
        &self.market
    }

    /// The normalized reward scheme.
    pub fn reward(&self) -> &RewardScheme<T> {
        &self.reward
    }

    pub fn rank_polynomial(&self) -> &RankPolynomial<T> {
        &self.poly
    }

    pub fn n(&self) -> usize {
        self.market.n()
    }

    /// Upper end of the support.
    pub fn xbar(&self) -> T {
        self.xbar
    }

    pub fn mu_bar(&self) -> T {
        self.mu_bar
    }

    /// `A = -2 mu / sigma^2`, zero in the driftless regime.
    pub fn a(&self) -> T {
        self.a
    }

    /// `B = exp(A x0) - 1`, zero in the driftless regime.
    pub fn b(&self) -> T {
        self.b
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    fn n_scalar(&self) -> T {
        T::from_usize_lossy(self.n())
    }

    fn check_support(&self, x: T) -> Result<()> {
        let slack = self.xbar * T::tol(1e-12);
        if x >= -slack && x <= self.xbar + slack {
            Ok(())
        } else {
            Err(ContestError::OutOfRange(format!(
                "level {x} outside [0, {}]",
                self.xbar
            )))
        }
    }

    pub fn scale_h(&self, x: T) -> T {
        match self.regime {
            Regime::Driftless => x / self.market.x0(),
            Regime::Drifted => (self.a * x).exp_m1() / self.b,
        }
    }

    fn scale_h_prime(&self, x: T) -> T {
        match self.regime {
            Regime::Driftless => T::one() / self.market.x0(),
            Regime::Drifted => self.a * (self.a * x).exp() / self.b,
        }
    }

    fn u_unchecked(&self, x: T) -> T {
        self.scale_h(x) / self.n_scalar()
    }

    /// Equilibrium value of stopping at `x`.
    pub fn value_u(&self, x: T) -> Result<T> {
        self.check_support(x)?;
        Ok(self.u_unchecked(x.max(T::zero()).min(self.xbar)))
    }

    /// Equilibrium cdf; 0 below the support, 1 above it.
    pub fn cdf(&self, x: T) -> T {
        if x <= T::zero() {
            return T::zero();
        }
        if x >= self.xbar {
            return T::one();
        }
        let v = self.u_unchecked(x).max(T::zero()).min(self.reward.first());
        self.poly
            .inverse(v)
            .expect("u(x) lies in [Rn, R1] on the support")
    }

    /// `q(y) = u^-1(g(y))`.
    pub fn quantile(&self, y: T) -> Result<T> {
        if !(y >= T::zero() && y <= T::one()) {
            return Err(ContestError::OutOfRange(format!(
                "quantile level {y} outside [0, 1]"
            )));
        }
        Ok(self.quantile_unchecked(y))
    }

    pub(crate) fn quantile_unchecked(&self, y: T) -> T {
        let g = self.poly.eval(y);
        match self.regime {
            Regime::Driftless => self.n_scalar() * self.market.x0() * g,
            Regime::Drifted => (self.n_scalar() * self.b * g).ln_1p() / self.a,
        }
    }

    /// Density `u'(x) / g'(F(x))`; zero off the support and possibly `+inf`
    /// at its endpoints.
    pub fn pdf(&self, x: T) -> T {
        if x < T::zero() || x > self.xbar {
            return T::zero();
        }
        let du = self.scale_h_prime(x) / self.n_scalar();
        let dg = self.poly.derivative(self.cdf(x));
        if dg > T::zero() {
            du / dg
        } else {
            T::infinity()
        }
    }

    /// `|int_0^1 h(q(y)) dy - 1|`, which vanishes for an embeddable law.
    pub fn feasibility_check(&self) -> T {
        let i = integrate_unit(|y| self.scale_h(self.quantile_unchecked(y)));
        (i.value - T::one()).abs()
    }
}

/// Free-function form of [`Equilibrium::build`].
pub fn build<T: Scalar>(
    market: &MarketParams<T>,
    reward: &RewardScheme<T>,
) -> Result<Equilibrium<T>> {
    Equilibrium::build(market, reward)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::{payoff_against, DiscreteDistribution};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::E;

    fn market(x0: f64, mu: f64, sigma: f64, n: usize) -> MarketParams<f64> {
        MarketParams::new(x0, mu, sigma, n).unwrap()
    }

    fn scheme(v: &[f64]) -> RewardScheme<f64> {
        RewardScheme::new(v.to_vec()).unwrap()
    }

    #[test]
    fn scale_h_examples() {
        let m = market(1.0, -0.5, 1.0, 2);
        assert_eq!(scale_h(&m, 0.0), 0.0);
        assert_abs_diff_eq!(scale_h(&m, 1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(scale_h(&m, 2.0), (E * E - 1.0) / (E - 1.0), epsilon = 1e-13);
        assert_abs_diff_eq!(scale_h(&m, 2.0), 3.71828, epsilon = 1e-5);
        let m0 = market(4.0, 0.0, 1.0, 2);
        assert_eq!(scale_h(&m0, 3.0), 0.75);
    }

    #[test]
    fn build_examples() {
        let wta2 = RewardScheme::winner_takes_all(2).unwrap();
        let eq = Equilibrium::build(&market(100.0, 0.0, 1.0, 2), &wta2).unwrap();
        assert_eq!(eq.regime(), Regime::Driftless);
        assert_abs_diff_eq!(eq.xbar(), 200.0, epsilon = 1e-12);

        for n in 2..8 {
            let eq = Equilibrium::build(
                &market(100.0, 0.0, 1.0, n),
                &RewardScheme::uniform(n).unwrap(),
            )
            .unwrap();
            assert_abs_diff_eq!(
                eq.xbar(),
                n as f64 / (n as f64 - 1.0) * 100.0,
                epsilon = 1e-10
            );
        }

        let eq = Equilibrium::build(&market(1.0, -0.5, 1.0, 2), &wta2).unwrap();
        assert_abs_diff_eq!(eq.xbar(), (2.0 * (E - 1.0) + 1.0).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(eq.xbar(), 1.48988, epsilon = 1e-5);
        assert_abs_diff_eq!(eq.value_u(eq.xbar()).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn build_rejects_large_drift() {
        let wta2 = RewardScheme::winner_takes_all(2).unwrap();
        let err = Equilibrium::build(&market(100.0, 0.004, 1.0, 2), &wta2).unwrap_err();
        assert_eq!(err.name(), "DriftTooLarge");
    }

    #[test]
    fn value_function_boundary_values() {
        for mu in [-0.3, 0.0, 0.05] {
            let r = scheme(&[0.5, 0.3, 0.2, 0.0]);
            let eq = Equilibrium::build(&market(1.0, mu, 1.0, 4), &r).unwrap();
            assert_abs_diff_eq!(eq.value_u(0.0).unwrap(), 0.0);
            assert_abs_diff_eq!(eq.value_u(1.0).unwrap(), 0.25, epsilon = 1e-14);
            assert_abs_diff_eq!(eq.value_u(eq.xbar()).unwrap(), 0.5, epsilon = 1e-13);
            assert!(eq.value_u(eq.xbar() * 1.01).is_err());
        }
        let eq =
            Equilibrium::build(&market(10.0, 0.0, 1.0, 4), &scheme(&[0.5, 0.3, 0.2, 0.0])).unwrap();
        for x in [0.0, 3.0, 7.5, 19.0] {
            assert_abs_diff_eq!(eq.value_u(x).unwrap(), x / 40.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn value_function_solves_generator_equation() {
        for (mu, sigma) in [(-0.5, 1.0), (0.02, 0.7), (0.0, 2.0)] {
            let r = scheme(&[0.4, 0.3, 0.2, 0.1, 0.0]);
            let m = market(1.0, mu, sigma, 5);
            let eq = Equilibrium::build(&m, &r).unwrap();
            let xb = eq.xbar();
            let h = xb * 1e-4;
            for i in 1..=100 {
                let x = xb * i as f64 / 101.0;
                let (um, u0, up) = (
                    eq.u_unchecked(x - h),
                    eq.u_unchecked(x),
                    eq.u_unchecked(x + h),
                );
                let d1 = (up - um) / (2.0 * h);
                let d2 = (up - 2.0 * u0 + um) / (h * h);
                let resid = mu * d1 + 0.5 * sigma * sigma * d2;
                assert!(
                    resid.abs() < 1e-6 * (r.first() / (xb * xb)).max(1.0),
                    "residual {resid}"
                );
            }
        }
    }

    #[test]
    fn cdf_and_quantile() {
        let wta2 = RewardScheme::winner_takes_all(2).unwrap();
        let eq = Equilibrium::build(&market(100.0, 0.0, 1.0, 2), &wta2).unwrap();
        assert_abs_diff_eq!(eq.cdf(100.0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(eq.cdf(50.0), 0.25, epsilon = 1e-12);
        assert_eq!(eq.cdf(-1.0), 0.0);
        assert_eq!(eq.cdf(250.0), 1.0);
        assert_eq!(eq.quantile(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(eq.quantile(1.0).unwrap(), 200.0, epsilon = 1e-12);
        assert!(eq.quantile(1.2).is_err());

        let r = scheme(&[0.5, 0.3, 0.2, 0.0]);
        let eq = Equilibrium::build(&market(3.0, 0.0, 1.0, 4), &r).unwrap();
        for i in 0..=20 {
            let y = i as f64 / 20.0;
            let g = eq.rank_polynomial().eval(y);
            assert_abs_diff_eq!(eq.quantile(y).unwrap(), 4.0 * 3.0 * g, epsilon = 1e-13);
        }
    }

    #[test]
    fn quantile_round_trip_and_g_of_cdf() {
        for mu in [-1.0, -0.01, 0.0, 0.01] {
            let r = scheme(&[0.45, 0.25, 0.2, 0.1, 0.0]);
            let eq = Equilibrium::build(&market(1.0, mu, 1.0, 5), &r).unwrap();
            for i in 0..=1000 {
                let y = i as f64 / 1000.0;
                let x = eq.quantile(y).unwrap();
                assert!((eq.cdf(x) - y).abs() < 1e-9, "mu={mu} y={y}");
            }
            for i in 1..200 {
                let x = eq.xbar() * i as f64 / 200.0;
                let gf = eq.rank_polynomial().eval(eq.cdf(x));
                assert_abs_diff_eq!(gf, eq.value_u(x).unwrap(), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn cdf_invariant_under_scaling_and_shift() {
        let m = market(2.0, -0.2, 1.3, 4);
        let base = scheme(&[0.5, 0.3, 0.2, 0.0]);
        let other = scheme(&[7.0, 5.0, 4.0, 2.0]); // 10 * base + 2
        let (e1, e2) = (
            Equilibrium::build(&m, &base).unwrap(),
            Equilibrium::build(&m, &other).unwrap(),
        );
        for i in 0..=50 {
            let x = e1.xbar() * i as f64 / 50.0;
            assert_abs_diff_eq!(e1.cdf(x), e2.cdf(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn density_positive_inside_support() {
        let r = scheme(&[0.6, 0.4, 0.0]);
        let eq = Equilibrium::build(&market(1.0, -0.1, 1.0, 3), &r).unwrap();
        for i in 1..100 {
            let x = eq.xbar() * i as f64 / 100.0;
            assert!(eq.pdf(x) > 0.0 && eq.pdf(x).is_finite());
        }
        assert_eq!(eq.pdf(-0.1), 0.0);
        // density integrates F over a sub-interval
        let (a, b) = (0.2 * eq.xbar(), 0.7 * eq.xbar());
        let mass = crate::quadrature::rule(256).integrate_interval(a, b, |x| eq.pdf(x));
        assert_abs_diff_eq!(mass, eq.cdf(b) - eq.cdf(a), epsilon = 1e-9);
        // winner-takes-all with n = 3: g'(0) = 0, density blows up at the top
        let wta = RewardScheme::winner_takes_all(3).unwrap();
        let eq = Equilibrium::build(&market(1.0, 0.0, 1.0, 3), &wta).unwrap();
        assert!(eq.pdf(0.0).is_infinite());
    }

    #[test]
    fn feasibility_defect_small() {
        let r = scheme(&[1.0, 0.0]);
        let eq = Equilibrium::build(&market(1.0, -0.5, 1.0, 2), &r).unwrap();
        assert!(eq.feasibility_check() < 1e-9);
        let eq = Equilibrium::build(&market(100.0, 0.0, 1.0, 2), &r).unwrap();
        assert!(eq.feasibility_check() < 1e-10);
        let r5 = scheme(&[0.37, 0.31, 0.2, 0.12, 0.0]);
        let eq = Equilibrium::build(&market(1.0, 0.001, 1.0, 5), &r5).unwrap();
        assert!(eq.feasibility_check() < 1e-9);
    }

    #[test]
    fn payoff_against_atomless_and_discretized() {
        let r = scheme(&[0.5, 0.3, 0.2, 0.0]);
        let eq = Equilibrium::build(&market(1.0, -0.2, 1.0, 4), &r).unwrap();
        let m = 10_000;
        let atoms = (0..m)
            .map(|i| {
                (
                    eq.quantile((i as f64 + 0.5) / m as f64).unwrap(),
                    1.0 / m as f64,
                )
            })
            .collect();
        let d = DiscreteDistribution::new(atoms).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=200 {
            let x = eq.xbar() * i as f64 / 200.0;
            let p = payoff_against(eq.reward(), &d, x);
            worst = worst.max((p - eq.value_u(x).unwrap()).abs());
            // against a fine grid the payoff is g evaluated at the empirical cdf
            if d.cdf(x) == d.cdf_left(x) {
                assert_abs_diff_eq!(p, eq.rank_polynomial().eval(d.cdf(x)), epsilon = 1e-12);
            }
        }
        assert!(worst < 2e-3, "worst {worst}");
    }

    #[test]
    fn f32_equilibrium() {
        let m = MarketParams::<f32>::new(1.0, -0.1, 1.0, 3).unwrap();
        let eq = Equilibrium::build(&m, &RewardScheme::winner_takes_all(3).unwrap()).unwrap();
        let x = eq.quantile(0.4).unwrap();
        assert!((eq.cdf(x) - 0.4).abs() < 1e-4);
    }
}
