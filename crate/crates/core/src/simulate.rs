//! Monte Carlo checks of the equilibrium.
//!
//! Games draw each player's stopping level by inverse transform from the
//! equilibrium quantile. Game `i` uses its own ChaCha stream (stream id `i`
//! under a key derived from the seed), and games are accumulated in fixed
//! chunks merged in a fixed order, so estimates are bit-identical for any
//! number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::equilibrium::Equilibrium;
use crate::error::{ContestError, Result};
use crate::metrics::{order_stat_mean, OrderStatQuery};
use crate::scalar::Scalar;

const CHUNK: u64 = 4096;
const PLAY_KEY: u64 = 0x706c_6179;
const DEVIATE_KEY: u64 = 0x6465_7669;
const PATH_KEY: u64 = 0x7061_7468;

/// Smallest admissible `xbar / (sigma sqrt(dt))`.
pub const MIN_STEPS_ACROSS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T> {
    games: u64,
    seed: u64,
    path_step: Option<T>,
    deviation_grid: usize,
}

impl<T: Scalar> SimConfig<T> {
    pub fn new(games: u64, seed: u64) -> Result<Self> {
        if games == 0 {
            return Err(ContestError::OutOfRange("games must be at least 1".into()));
        }
        Ok(Self {
            games,
            seed,
            path_step: None,
            deviation_grid: 101,
        })
    }

    /// Euler step for [`path_exit_check`]; defaults to `1e-4 (xbar/sigma)^2`.
    pub fn with_path_step(mut self, dt: T) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(ContestError::OutOfRange(format!(
                "path step {dt} must be positive"
            )));
        }
        self.path_step = Some(dt);
        Ok(self)
    }

    pub fn with_deviation_grid(mut self, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(ContestError::OutOfRange(
                "deviation grid needs at least 2 points".into(),
            ));
        }
        self.deviation_grid = points;
        Ok(self)
    }

    pub fn games(&self) -> u64 {
        self.games
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_step(&self) -> Option<T> {
        self.path_step
    }

    pub fn deviation_grid(&self) -> usize {
        self.deviation_grid
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCEstimate<T> {
    pub mean: T,
    pub std_error: T,
    pub samples: u64,
}

impl<T: Scalar> MCEstimate<T> {
    /// `(mean - target) / std_error`; gaps at rounding level count as zero.
    pub fn z_score(&self, target: T) -> T {
        let gap = self.mean - target;
        if gap.abs() <= Self::noise(target) {
            T::zero()
        } else if self.std_error > T::zero() {
            gap / self.std_error
        } else {
            T::infinity() * gap.signum()
        }
    }

    pub fn within(&self, target: T, multiplier: T) -> bool {
        (self.mean - target).abs() <= multiplier * self.std_error + Self::noise(target)
    }

    fn noise(target: T) -> T {
        T::tol(0.0) * target.abs().max(T::one())
    }
}

/// Running count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let d = other.mean - self.mean;
        let (na, nb) = (self.count as f64, other.count as f64);
        Moments {
            count,
            mean: self.mean + d * nb / count as f64,
            m2: self.m2 + other.m2 + d * d * na * nb / count as f64,
        }
    }

    fn estimate<T: Scalar>(&self) -> MCEstimate<T> {
        let var = if self.count > 1 {
            self.m2 / (self.count - 1) as f64
        } else {
            0.0
        };
        MCEstimate {
            mean: T::lit(self.mean),
            std_error: T::lit((var / self.count.max(1) as f64).sqrt()),
            samples: self.count,
        }
    }
}

fn merge_all(a: &mut [Moments], b: &[Moments]) {
    for (x, &y) in a.iter_mut().zip(b) {
        *x = x.merge(y);
    }
}

/// Pairwise reduction in index order.
fn reduce_pairwise(mut parts: Vec<Vec<Moments>>) -> Vec<Moments> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut left) = it.next() {
            if let Some(right) = it.next() {
                merge_all(&mut left, &right);
            }
            next.push(left);
        }
        parts = next;
    }
    parts.pop().unwrap_or_default()
}

/// Runs `body(rng, acc)` for items `0..count`, item `i` on stream `i` of
/// the key `(seed, purpose)`.
fn run_chunked<F>(seed: u64, purpose: u64, count: u64, width: usize, body: F) -> Vec<Moments>
where
    F: Fn(&mut ChaCha8Rng, &mut [Moments]) + Sync,
{
    let base = ChaCha8Rng::seed_from_u64(seed ^ purpose.rotate_left(32));
    let chunks = count.div_ceil(CHUNK);
    let parts: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Moments::default(); width];
            for i in c * CHUNK..((c + 1) * CHUNK).min(count) {
                let mut rng = base.clone();
                rng.set_stream(i);
                body(&mut rng, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = reduce_pairwise(parts);
    total.resize(width, Moments::default());
    total
}

fn draw_levels<T: Scalar>(eq: &Equilibrium<T>, rng: &mut ChaCha8Rng, out: &mut [T]) {
    for v in out.iter_mut() {
        *v = eq.quantile_unchecked(T::lit(rng.random::<f64>()));
    }
}

/// Stopping levels of game `index` (one per player).
pub fn sample_game<T: Scalar>(eq: &Equilibrium<T>, seed: u64, index: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ PLAY_KEY.rotate_left(32));
    rng.set_stream(index);
    let mut levels = vec![T::zero(); eq.n()];
    draw_levels(eq, &mut rng, &mut levels);
    levels
}

/// The per-game level vectors `play_games` sees, in game order.
pub fn sample_levels<'a, T: Scalar>(
    eq: &'a Equilibrium<T>,
    config: &SimConfig<T>,
) -> impl Iterator<Item = Vec<T>> + 'a {
    let seed = config.seed;
    (0..config.games).map(move |i| sample_game(eq, seed, i))
}

/// Player indices from rank 1 down to rank `n`; runs of equal levels are
/// put in uniformly random order.
pub fn settle_ranks<T: Scalar, R: Rng + ?Sized>(levels: &[T], rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&a, &b| {
        levels[b]
            .partial_cmp(&levels[a])
            .expect("finite levels")
            .then(a.cmp(&b))
    });
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && levels[order[end]] == levels[order[start]] {
            end += 1;
        }
        // Fisher-Yates on the tied block
        for i in (start + 1..end).rev() {
            let j = rng.random_range(start..=i);
            order.swap(i, j);
        }
        start = end;
    }
    order
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlayResult<T> {
    /// Mean reward of each player.
    pub payoff: Vec<MCEstimate<T>>,
    /// Mean level of the player at each rank.
    pub rank_level: Vec<MCEstimate<T>>,
}

/// Plays `config.games` independent contests at the equilibrium.
pub fn play_games<T: Scalar>(eq: &Equilibrium<T>, config: &SimConfig<T>) -> PlayResult<T> {
    let n = eq.n();
    let reward: Vec<f64> = eq.reward().as_slice().iter().map(|r| r.as_f64()).collect();
    let acc = run_chunked(config.seed, PLAY_KEY, config.games, 2 * n, |rng, acc| {
        let mut levels = vec![T::zero(); n];
        draw_levels(eq, rng, &mut levels);
        let order = settle_ranks(&levels, rng);
        for (rank, &player) in order.iter().enumerate() {
            acc[player].push(reward[rank]);
            acc[n + rank].push(levels[player].as_f64());
        }
    });
    PlayResult {
        payoff: acc[..n].iter().map(Moments::estimate).collect(),
        rank_level: acc[n..].iter().map(Moments::estimate).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponsePoint<T> {
    pub x: T,
    pub empirical: MCEstimate<T>,
    /// Value function `u(x)`.
    pub analytic: T,
    /// `g(F(x))`, the same payoff written through the rank polynomial.
    pub rank_form: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponseCurve<T> {
    pub points: Vec<BestResponsePoint<T>>,
    /// Largest `|empirical - u(x)|` over the grid.
    pub max_deviation: T,
    /// Largest `(empirical - u(x)) / std_error` over the grid.
    pub max_excess_z: T,
}

/// Payoff of one player stopping at each of `config.deviation_grid` points
/// of `[0, xbar]` while the other `n - 1` play the equilibrium.
pub fn best_response_curve<T: Scalar>(
    eq: &Equilibrium<T>,
    config: &SimConfig<T>,
) -> Result<BestResponseCurve<T>> {
    let n = eq.n();
    let m = config.deviation_grid;
    let xbar = eq.xbar();
    let grid: Vec<T> = (0..m)
        .map(|i| xbar * T::from_usize_lossy(i) / T::from_usize_lossy(m - 1))
        .collect();
    let reward: Vec<f64> = eq.reward().as_slice().iter().map(|r| r.as_f64()).collect();
    let acc = run_chunked(config.seed, DEVIATE_KEY, config.games, m, |rng, acc| {
        let mut others = vec![T::zero(); n - 1];
        draw_levels(eq, rng, &mut others);
        others.sort_by(|a, b| a.partial_cmp(b).expect("finite levels"));
        for (slot, &x) in acc.iter_mut().zip(&grid) {
            let below = others.partition_point(|&o| o < x);
            let not_above = others.partition_point(|&o| o <= x);
            let above = n - 1 - not_above;
            let tied = not_above - below;
            // expected reward over the uniform tie-break
            let pay = reward[above..=above + tied].iter().sum::<f64>() / (tied + 1) as f64;
            slot.push(pay);
        }
    });
    let mut points = Vec::with_capacity(m);
    let mut max_deviation = T::zero();
    let mut max_excess_z = T::neg_infinity();
    for (x, mom) in grid.into_iter().zip(&acc) {
        let empirical: MCEstimate<T> = mom.estimate();
        let analytic = eq.value_u(x)?;
        let rank_form = eq.rank_polynomial().eval(eq.cdf(x));
        max_deviation = max_deviation.max((empirical.mean - analytic).abs());
        max_excess_z = max_excess_z.max(empirical.z_score(analytic));
        points.push(BestResponsePoint {
            x,
            empirical,
            analytic,
            rank_form,
        });
    }
    Ok(BestResponseCurve {
        points,
        max_deviation,
        max_excess_z,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathExit<T> {
    /// `u` at the exit point; its mean should be `1/n`.
    pub utility: MCEstimate<T>,
    /// Fraction of paths leaving through `xbar`.
    pub hit_probability: MCEstimate<T>,
    /// `h(x0)/h(xbar)`.
    pub analytic_hit_probability: T,
    /// Euler step used.
    pub step: T,
    /// Bias bound from monitoring the barriers only at grid times,
    /// `sigma sqrt(dt) / xbar`, in probability units.
    pub discretization_allowance: T,
}

/// Euler–Maruyama paths from `x0`, stopped on leaving `(0, xbar)`.
/// `config.games` is the number of paths.
pub fn path_exit_check<T: Scalar>(
    eq: &Equilibrium<T>,
    config: &SimConfig<T>,
) -> Result<PathExit<T>> {
    let market = eq.market();
    let (x0, mu, sigma) = (
        market.x0().as_f64(),
        market.mu().as_f64(),
        market.sigma().as_f64(),
    );
    let xbar = eq.xbar().as_f64();
    let dt = match config.path_step {
        Some(dt) => dt.as_f64(),
        None => 1e-4 * (xbar / sigma).powi(2),
    };
    let across = xbar / (sigma * dt.sqrt());
    if !(across > MIN_STEPS_ACROSS) {
        return Err(ContestError::StepTooCoarse(format!(
            "xbar/(sigma sqrt(dt)) = {across:.3} must exceed {MIN_STEPS_ACROSS}"
        )));
    }
    let r1 = eq.reward().first().as_f64();
    let (drift, vol) = (mu * dt, sigma * dt.sqrt());
    let acc = run_chunked(config.seed, PATH_KEY, config.games, 2, |rng, acc| {
        let mut x = x0;
        let hit = loop {
            let z: f64 = rng.sample(StandardNormal);
            x += drift + vol * z;
            if x <= 0.0 {
                break false;
            }
            if x >= xbar {
                break true;
            }
        };
        acc[0].push(if hit { r1 } else { 0.0 });
        acc[1].push(if hit { 1.0 } else { 0.0 });
    });
    Ok(PathExit {
        utility: acc[0].estimate(),
        hit_probability: acc[1].estimate(),
        analytic_hit_probability: eq.scale_h(eq.market().x0()) / eq.scale_h(eq.xbar()),
        step: T::lit(dt),
        discretization_allowance: T::lit(vol / xbar),
    })
}

/// Analytic mean level at every rank, paired with `play_games` output.
pub fn analytic_rank_levels<T: Scalar>(eq: &Equilibrium<T>) -> Result<Vec<T>> {
    let n = eq.n();
    let mut out = (1..n)
        .map(|k| order_stat_mean(eq, OrderStatQuery::new(k, n)?))
        .collect::<Result<Vec<_>>>()?;
    out.push(crate::metrics::order_stat_mean_last(eq)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{MarketParams, RewardScheme};

    fn eq(x0: f64, mu: f64, reward: RewardScheme<f64>) -> Equilibrium<f64> {
        let m = MarketParams::new(x0, mu, 1.0, reward.n()).unwrap();
        Equilibrium::build(&m, &reward).unwrap()
    }

    #[test]
    fn moments_merge_matches_direct() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut whole = Moments::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut parts = Vec::new();
        for c in xs.chunks(77) {
            let mut m = Moments::default();
            c.iter().for_each(|&x| m.push(x));
            parts.push(vec![m]);
        }
        let merged = reduce_pairwise(parts)[0];
        assert_eq!(merged.count, 1000);
        assert!((merged.mean - whole.mean).abs() < 1e-12);
        assert!((merged.m2 - whole.m2).abs() < 1e-9 * whole.m2);
    }

    #[test]
    fn levels_deterministic_and_in_range() {
        let e = eq(1.0, -0.1, RewardScheme::cutoff(5, 3).unwrap());
        let cfg = SimConfig::new(2000, 11).unwrap();
        let a: Vec<Vec<f64>> = sample_levels(&e, &cfg).collect();
        let b: Vec<Vec<f64>> = sample_levels(&e, &cfg).collect();
        assert_eq!(a, b);
        assert!(a.iter().flatten().all(|&x| (0.0..=e.xbar()).contains(&x)));
        let other: Vec<Vec<f64>> = sample_levels(&e, &SimConfig::new(2000, 12).unwrap()).collect();
        assert_ne!(a, other);
    }

    #[test]
    fn empirical_cdf_at_x0() {
        let e = eq(1.0, -0.1, RewardScheme::cutoff(5, 3).unwrap());
        let cfg = SimConfig::new(200_000, 3).unwrap();
        let (mut below, mut total) = (0u64, 0u64);
        for game in sample_levels(&e, &cfg) {
            for x in game {
                below += u64::from(x <= 1.0);
                total += 1;
            }
        }
        let p = e.cdf(1.0);
        let se = (p * (1.0 - p) / total as f64).sqrt();
        assert!((below as f64 / total as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn tie_split_is_fair() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 200_000;
        let mut first = 0u64;
        for _ in 0..trials {
            first += u64::from(settle_ranks(&[1.0, 1.0], &mut rng)[0] == 0);
        }
        let freq = first as f64 / trials as f64;
        let se = (0.25 / trials as f64).sqrt();
        assert!((freq - 0.5).abs() < 4.0 * se, "{freq}");
        assert_eq!(settle_ranks(&[0.1, 3.0, 2.0], &mut rng), vec![1, 2, 0]);
    }

    #[test]
    fn play_is_reproducible_and_consistent() {
        let e = eq(100.0, 0.0, RewardScheme::winner_takes_all(2).unwrap());
        let cfg = SimConfig::new(100_000, 9).unwrap();
        let a = play_games(&e, &cfg);
        assert_eq!(a, play_games(&e, &cfg));
        assert!(a.rank_level[0].within(400.0 / 3.0, 4.0));
        assert!(a.rank_level[1].within(200.0 / 3.0, 4.0));
        for p in &a.payoff {
            assert!(p.within(0.5, 4.0));
        }
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        assert_eq!(single.install(|| play_games(&e, &cfg)), a);
    }

    #[test]
    fn best_response_matches_value_function() {
        let e = eq(
            1.0,
            -0.1,
            RewardScheme::new(vec![0.5, 0.3, 0.2, 0.0]).unwrap(),
        );
        let cfg = SimConfig::new(50_000, 1)
            .unwrap()
            .with_deviation_grid(21)
            .unwrap();
        let curve = best_response_curve(&e, &cfg).unwrap();
        for p in &curve.points {
            assert!((p.analytic - p.rank_form).abs() < 1e-9);
            assert!(p.empirical.within(p.analytic, 4.0), "{p:?}");
        }
        let at_x0 = e.cdf(1.0);
        assert!((e.rank_polynomial().eval(at_x0) - 0.25).abs() < 1e-9);
    }

    #[test]
    fn gamblers_ruin() {
        let e = eq(100.0, 0.0, RewardScheme::winner_takes_all(2).unwrap());
        let cfg = SimConfig::new(4000, 2).unwrap();
        let r = path_exit_check(&e, &cfg).unwrap();
        assert!((r.analytic_hit_probability - 0.5).abs() < 1e-12);
        let tol = 4.0 * r.hit_probability.std_error + r.discretization_allowance;
        assert!((r.hit_probability.mean - 0.5).abs() < tol);
    }

    #[test]
    fn exit_utility_for_non_cutoff_scheme() {
        let e = eq(
            1.0,
            -0.1,
            RewardScheme::new(vec![0.5, 0.3, 0.2, 0.0, 0.0]).unwrap(),
        );
        let cfg = SimConfig::new(4000, 4).unwrap();
        let r = path_exit_check(&e, &cfg).unwrap();
        let tol = 4.0 * r.utility.std_error + 0.5 * r.discretization_allowance;
        assert!((r.utility.mean - 0.2).abs() < tol, "{r:?}");
    }

    #[test]
    fn coarse_step_rejected() {
        let e = eq(100.0, 0.0, RewardScheme::winner_takes_all(2).unwrap());
        let cfg = SimConfig::new(10, 2)
            .unwrap()
            .with_path_step(1000.0)
            .unwrap();
        assert_eq!(
            path_exit_check(&e, &cfg).unwrap_err().name(),
            "StepTooCoarse"
        );
        assert!(SimConfig::<f64>::new(0, 1).is_err());
        assert!(SimConfig::<f64>::new(1, 1)
            .unwrap()
            .with_path_step(0.0)
            .is_err());
    }
}
