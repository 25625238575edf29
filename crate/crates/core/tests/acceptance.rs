//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Run with `cargo test -p rankcontest --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankcontest::quadrature::integrate_unit;
use rankcontest::*;

type Outcome = std::result::Result<(), String>;
/// Name, time budget in seconds, check.
type Criterion = (&'static str, u64, fn() -> Outcome);

fn market(x0: f64, mu: f64, n: usize) -> MarketParams64 {
    MarketParams::new(x0, mu, 1.0, n).expect("valid market")
}

fn scheme(r: &[f64]) -> RewardScheme64 {
    RewardScheme::new(r.to_vec()).expect("valid scheme")
}

fn eq(m: &MarketParams64, r: &RewardScheme64) -> std::result::Result<Equilibrium64, String> {
    Equilibrium::build(m, r).map_err(|e| e.to_string())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn kstar_exact() -> Outcome {
    for n in 2..=50 {
        let k1 = k_star(n, 1).map_err(|e| e.to_string())?;
        ensure(k1 == 1, || format!("k*(n={n}, k=1) = {k1}"))?;
        if n >= 3 {
            let k2 = k_star(n, 2).map_err(|e| e.to_string())?;
            ensure(k2 == 2, || format!("k*(n={n}, k=2) = {k2}"))?;
        }
    }
    let a = k_star(5, 3).map_err(|e| e.to_string())?;
    ensure(a == 4, || format!("k*(5,3) = {a}"))?;
    let b = k_star(10, 5).map_err(|e| e.to_string())?;
    ensure(b == 7, || format!("k*(10,5) = {b}"))
}

fn driftless_mean() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let n = rng.random_range(2..=10);
        let r = RewardScheme::random_normalized(n, &mut rng).map_err(|e| e.to_string())?;
        let e = expected_performance(&eq(&market(100.0, 0.0, n), &r)?);
        ensure(((e - 100.0) / 100.0).abs() < 1e-9, || {
            format!("n={n} {:?}: E[X] = {e}", r.as_slice())
        })?;
    }
    Ok(())
}

fn strictly_monotone(v: &[f64], increasing: bool) -> bool {
    v.windows(2)
        .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

fn lorenz_monotonicity() -> Outcome {
    // most unequal first
    let chain = [
        scheme(&[1.0, 0.0, 0.0, 0.0, 0.0]),
        scheme(&[0.6, 0.4, 0.0, 0.0, 0.0]),
        scheme(&[0.5, 0.3, 0.2, 0.0, 0.0]),
        scheme(&[0.4, 0.3, 0.2, 0.1, 0.0]),
        scheme(&[0.25, 0.25, 0.25, 0.25, 0.0]),
    ];
    for w in chain.windows(2) {
        let rel = lorenz_compare(&w[1], &w[0]).map_err(|e| e.to_string())?;
        ensure(rel == LorenzRelation::LessEqual, || {
            format!("chain not Lorenz ordered: {rel:?}")
        })?;
    }
    for mu in [-0.01, 0.0, 0.001] {
        let m = market(100.0, mu, 5);
        let eqs = chain
            .iter()
            .map(|r| eq(&m, r))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let perf: Vec<f64> = eqs.iter().map(expected_performance).collect();
        let dur: Vec<f64> = eqs.iter().map(expected_duration).collect();
        // along the chain inequality falls
        if mu < 0.0 {
            ensure(strictly_monotone(&perf, true), || {
                format!("mu={mu}: performance {perf:?}")
            })?;
        } else if mu > 0.0 {
            ensure(strictly_monotone(&perf, false), || {
                format!("mu={mu}: performance {perf:?}")
            })?;
        }
        ensure(strictly_monotone(&dur, false), || {
            format!("mu={mu}: duration {dur:?}")
        })?;
    }
    Ok(())
}

fn single_crossing_chain() -> Outcome {
    let m = market(100.0, -0.01, 4);
    let chain = [
        scheme(&[0.6, 0.2, 0.2, 0.0]),
        scheme(&[0.5, 0.3, 0.2, 0.0]),
        scheme(&[0.4, 0.4, 0.2, 0.0]),
        scheme(&[0.4, 0.35, 0.25, 0.0]),
        scheme(&[0.4, 0.3, 0.3, 0.0]),
    ];
    for (i, w) in chain.windows(2).enumerate() {
        let report =
            single_crossing(&eq(&m, &w[0])?, &eq(&m, &w[1])?).map_err(|e| e.to_string())?;
        ensure(
            report.up_crossings() == 1 && report.down_crossings() == 0,
            || format!("pair {}-{}: {:?}", i + 1, i + 2, report.crossings),
        )?;
    }
    Ok(())
}

fn first_rank_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for x0 in [1.0, 100.0] {
        for mu in [-0.5, 0.0, 0.001] {
            for n in [3, 4, 5] {
                let m = market(x0, mu, n);
                let q = OrderStatQuery::new(1, n).map_err(|e| e.to_string())?;
                let best =
                    order_stat_mean(&eq(&m, &RewardScheme::winner_takes_all(n).unwrap())?, q)
                        .map_err(|e| e.to_string())?;
                let mut drawn = 0;
                while drawn < 50 {
                    let r =
                        RewardScheme::random_normalized(n, &mut rng).map_err(|e| e.to_string())?;
                    if r.first() >= 1.0 - 1e-12 {
                        continue;
                    }
                    drawn += 1;
                    let v = order_stat_mean(&eq(&m, &r)?, q).map_err(|e| e.to_string())?;
                    ensure(best > v, || {
                        format!("x0={x0} mu={mu} n={n} {:?}: {v} >= {best}", r.as_slice())
                    })?;
                }
            }
        }
    }
    Ok(())
}

fn negative_drift_optimizer() -> Outcome {
    let r = optimize_rank_k(&market(1.0, -0.5, 5), 2).map_err(|e| e.to_string())?;
    let target = [0.416, 0.416, 0.168, 0.0, 0.0];
    let dist = r
        .scheme
        .as_slice()
        .iter()
        .zip(target)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ensure(dist < 5e-3, || {
        format!("scheme {:?}, sup distance {dist}", r.scheme.as_slice())
    })
}

fn positive_drift_optimizer() -> Outcome {
    let r = optimize_rank_k(&market(1.0, 0.05, 10), 5).map_err(|e| e.to_string())?;
    let j = r.diagnostics.cutoff;
    let kstar = r.diagnostics.k_star;
    ensure(j == Some(6), || format!("optimal cut-off {j:?}"))?;
    ensure(kstar == Some(7) && r.diagnostics.within_k_star, || {
        format!("k* = {kstar:?}")
    })?;
    let best = r
        .diagnostics
        .enumeration
        .iter()
        .filter_map(|&(j, v)| v.map(|v| (j, v)));
    ensure(best.clone().all(|(_, v)| v <= r.objective_value), || {
        "enumeration exceeds optimum".into()
    })
}

fn analytic_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..100 {
        let n = rng.random_range(2..=10);
        let r = RewardScheme64::random_normalized(n, &mut rng).map_err(|e| e.to_string())?;
        let g = RankPolynomial::new(&r);
        let integral = integrate_unit(|y| g.eval(y)).value;
        ensure((integral - 1.0 / n as f64).abs() < 1e-12, || {
            format!("int g = {integral}, n = {n}")
        })?;
        let mu = [-1.0, -0.01, 0.0, 0.0005][i % 4];
        let defect = eq(&market(1.0, mu, n), &r)?.feasibility_check();
        ensure(defect < 1e-9, || {
            format!("mu={mu} {:?}: defect {defect}", r.as_slice())
        })?;
    }
    Ok(())
}

fn monte_carlo() -> Outcome {
    let e = eq(&market(1.0, -0.1, 5), &RewardScheme::cutoff(5, 3).unwrap())?;
    let cfg = SimConfig::new(1_000_000, 2024).unwrap();
    let play = play_games(&e, &cfg);
    for (i, p) in play.payoff.iter().enumerate() {
        ensure(p.within(0.2, 4.0), || format!("player {i}: payoff {p:?}"))?;
    }
    let analytic = analytic_rank_levels(&e).map_err(|e| e.to_string())?;
    for (k, (est, a)) in play.rank_level.iter().zip(&analytic).enumerate() {
        ensure(est.within(*a, 4.0), || {
            format!("rank {}: {est:?} vs {a}", k + 1)
        })?;
    }
    let curve = best_response_curve(&e, &cfg).map_err(|e| e.to_string())?;
    for p in &curve.points {
        ensure(
            p.empirical.mean <= p.analytic + 4.0 * p.empirical.std_error + 1e-12,
            || {
                format!(
                    "deviation at x={} pays {:?} > u = {}",
                    p.x, p.empirical, p.analytic
                )
            },
        )?;
    }
    Ok(())
}

fn path_martingale() -> Outcome {
    for n in [2, 5] {
        for mu in [0.0, -0.1] {
            let e = eq(
                &market(1.0, mu, n),
                &RewardScheme::winner_takes_all(n).unwrap(),
            )?;
            let cfg = SimConfig::new(100_000, 17).unwrap();
            let r = path_exit_check(&e, &cfg).map_err(|e| e.to_string())?;
            let target = 1.0 / n as f64;
            ensure((r.analytic_hit_probability - target).abs() < 1e-12, || {
                "h(x0)/h(xbar) != 1/n".into()
            })?;
            let tol = 4.0 * r.hit_probability.std_error + r.discretization_allowance;
            ensure((r.hit_probability.mean - target).abs() <= tol, || {
                format!(
                    "n={n} mu={mu}: hit {:?}, tolerance {tol}",
                    r.hit_probability
                )
            })?;
        }
    }
    Ok(())
}

fn drift_sweep_shape() -> Outcome {
    let schemes = [
        scheme(&[1.0, 0.0, 0.0]),
        scheme(&[2.0 / 3.0, 1.0 / 3.0, 0.0]),
        scheme(&[0.5, 0.5, 0.0]),
    ];
    let steps = 315;
    let grid: Vec<f64> = (0..=steps)
        .map(|i| -0.03 + 0.0315 * i as f64 / steps as f64)
        .collect();
    let mut minima = Vec::new();
    for r in &schemes {
        let losses = grid
            .iter()
            .map(|&mu| Ok(expected_performance(&eq(&market(100.0, mu, 3), r)?) - 100.0))
            .collect::<std::result::Result<Vec<f64>, String>>()?;
        let (arg, min) =
            losses
                .iter()
                .enumerate()
                .fold((0, f64::MAX), |b, (i, &v)| if v < b.1 { (i, v) } else { b });
        ensure(arg > 0 && arg < steps && grid[arg] < 0.0, || {
            format!(
                "{:?}: minimum at mu = {} is not interior and negative",
                r.as_slice(),
                grid[arg]
            )
        })?;
        minima.push(min);
    }
    ensure(minima[0] < minima[1] && minima[0] < minima[2], || {
        format!("minima {minima:?}")
    })
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("k* exactness", 1, kstar_exact),
        ("driftless mean invariance", 1, driftless_mean),
        ("Lorenz monotonicity", 2, lorenz_monotonicity),
        ("single crossing", 5, single_crossing_chain),
        ("first-rank optimality", 10, first_rank_optimality),
        ("negative-drift optimizer", 30, negative_drift_optimizer),
        ("positive-drift optimizer", 30, positive_drift_optimizer),
        ("analytic identities", 10, analytic_identities),
        ("Monte Carlo consistency", 120, monte_carlo),
        ("path martingale check", 120, path_martingale),
        ("drift sweep shape", 30, drift_sweep_shape),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = run();
        let elapsed = start.elapsed();
        if outcome.is_ok() && elapsed > Duration::from_secs(*budget) {
            outcome = Err(format!("took longer than {budget} s"));
        }
        match outcome {
            Ok(()) => println!("PASS {:>2} {name} ({:.2} s)", i + 1, elapsed.as_secs_f64()),
            Err(msg) => {
                failed += 1;
                println!(
                    "FAIL {:>2} {name} ({:.2} s): {msg}",
                    i + 1,
                    elapsed.as_secs_f64()
                );
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
