use rankcontest::{
    analytic_rank_levels, best_response_curve, expected_duration, expected_performance, k_star,
    mu_bar, optimize_average, optimize_first_rank_seeded, optimize_rank_k, order_stat_mean,
    order_stat_mean_last, path_exit_check, play_games, ContestError, DesignResult64, Equilibrium,
    Equilibrium64, MarketParams, MarketParams64, OrderStatQuery, RewardScheme, RewardScheme64,
    SimConfig, Utility,
};

use crate::args::{
    Common, EquilibriumArgs, MetricsArgs, Objective, OptimizeArgs, SimulateArgs, SweepArgs,
    SweepMode,
};
use crate::format::{num, Table};
use crate::CliError;

/// Warnings go to standard error; the CSV goes to `--out` or standard output.
pub struct Output {
    pub csv: String,
    pub strict_failures: usize,
}

impl From<Table> for Output {
    fn from(t: Table) -> Self {
        Output {
            csv: t.into_string(),
            strict_failures: 0,
        }
    }
}

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

pub fn parse_reward(spec: &str, n: Option<usize>) -> Result<RewardScheme64, CliError> {
    let spec = spec.trim();
    let need_n =
        || n.ok_or_else(|| CliError::Usage(format!("--n is required with --reward {spec}")));
    let scheme = match spec {
        "wta" | "winner-takes-all" => RewardScheme::winner_takes_all(need_n()?)?,
        "uniform" => RewardScheme::uniform(need_n()?)?,
        _ if spec.starts_with("cutoff:") => {
            let j = spec["cutoff:".len()..]
                .parse()
                .map_err(|_| CliError::Usage(format!("bad cut-off in {spec}")))?;
            RewardScheme::cutoff(need_n()?, j)?
        }
        _ => {
            let values = spec
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| CliError::Usage(format!("cannot parse reward `{spec}`")))?;
            if let Some(n) = n {
                if n != values.len() {
                    return Err(ContestError::DimensionMismatch {
                        expected: n,
                        got: values.len(),
                    }
                    .into());
                }
            }
            let raw = RewardScheme::new(values)?;
            let normalized = raw.normalize()?;
            let changed = raw
                .as_slice()
                .iter()
                .zip(normalized.as_slice())
                .any(|(a, b)| (a - b).abs() > 1e-12);
            if changed {
                let shown: Vec<String> = normalized.as_slice().iter().map(|&v| num(v)).collect();
                warn(&format!("reward normalized to {}", shown.join(",")));
            }
            normalized
        }
    };
    Ok(scheme)
}

fn setup(c: &Common) -> Result<(MarketParams64, RewardScheme64), CliError> {
    let reward = parse_reward(&c.reward, c.n)?;
    let market = MarketParams::new(c.x0, c.mu, c.sigma, reward.n())?;
    Ok((market, reward))
}

fn rank_mean(eq: &Equilibrium64, k: usize) -> Result<f64, ContestError> {
    if k == eq.n() {
        order_stat_mean_last(eq)
    } else {
        order_stat_mean(eq, OrderStatQuery::new(k, eq.n())?)
    }
}

pub fn equilibrium(a: &EquilibriumArgs) -> Result<Output, CliError> {
    let (market, reward) = setup(&a.common)?;
    let eq = Equilibrium::build(&market, &reward)?;
    let mut t = Table::new("y,quantile,x,cdf,u");
    let xbar = eq.xbar();
    for i in 0..=1000 {
        let y = i as f64 / 1000.0;
        let x = xbar * y;
        t.row(&[
            num(y),
            num(eq.quantile(y)?),
            num(x),
            num(eq.cdf(x)),
            num(eq.value_u(x)?),
        ]);
    }
    t.meta("xbar", num(xbar));
    t.meta("mubar", num(eq.mu_bar()));
    t.meta("A", num(eq.a()));
    t.meta("B", num(eq.b()));
    Ok(t.into())
}

fn parse_utility(spec: &str) -> Result<Utility<f64>, CliError> {
    let bad = || {
        CliError::Usage(format!(
            "unknown utility `{spec}` (linear, power:GAMMA, exp:GAMMA)"
        ))
    };
    let (family, gamma) = match spec.split_once(':') {
        Some((f, g)) => (f, Some(g.parse::<f64>().map_err(|_| bad())?)),
        None => (spec, None),
    };
    match (family, gamma) {
        ("linear", None) => Ok(Utility::Linear),
        ("power", Some(g)) if g > 0.0 => Ok(Utility::Power(g)),
        ("exp", Some(g)) if g != 0.0 => Ok(Utility::Exponential(g)),
        _ => Err(bad()),
    }
}

pub fn metrics(a: &MetricsArgs) -> Result<Output, CliError> {
    let (market, reward) = setup(&a.common)?;
    let eq = Equilibrium::build(&market, &reward)?;
    let n = eq.n();
    let ks: Vec<usize> = if a.k.is_empty() {
        (1..=n).collect()
    } else {
        a.k.clone()
    };
    for &k in &ks {
        if k == 0 || k > n {
            return Err(ContestError::OutOfRange(format!("rank k={k} outside [1, {n}]")).into());
        }
    }
    let utilities = a
        .utility
        .iter()
        .map(|u| Ok((u.trim(), parse_utility(u.trim())?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut t = Table::new("metric,k,value");
    t.row(&[
        "expected_performance".into(),
        String::new(),
        num(expected_performance(&eq)),
    ]);
    t.row(&[
        "expected_duration".into(),
        String::new(),
        num(expected_duration(&eq)),
    ]);
    for k in ks {
        t.row(&[
            "order_stat_mean".into(),
            k.to_string(),
            num(rank_mean(&eq, k)?),
        ]);
    }
    for (label, u) in utilities {
        t.row(&[
            format!("expected_utility[{label}]"),
            String::new(),
            num(u.expected(&eq)),
        ]);
    }
    Ok(t.into())
}

pub fn optimize(a: &OptimizeArgs) -> Result<Output, CliError> {
    let c = &a.common;
    let n = match c.n {
        Some(n) => n,
        None => parse_reward(&c.reward, None)?.n(),
    };
    let market = MarketParams::new(c.x0, c.mu, c.sigma, n)?;
    let result: DesignResult64 = match a.objective {
        Objective::Average => optimize_average(&market)?,
        Objective::FirstRank => optimize_first_rank_seeded(
            &market,
            a.seed.unwrap_or(rankcontest::design::FIRST_RANK_SWEEP_SEED),
        )?,
        Objective::RankK => {
            let k = a
                .k
                .ok_or_else(|| CliError::Usage("--k is required for --objective rank-k".into()))?;
            optimize_rank_k(&market, k)?
        }
    };
    let mut t = Table::new("rank,reward");
    for (i, &r) in result.scheme.as_slice().iter().enumerate() {
        t.row(&[(i + 1).to_string(), num(r)]);
    }
    t.meta("objective", num(result.objective_value));
    t.meta("regime", result.regime.name());
    let d = &result.diagnostics;
    if let Some(k) = d.k_star {
        t.meta("kstar", k);
    }
    if let Some(m) = d.verification_margin {
        t.meta("verification_schemes", d.verification_count);
        t.meta("verification_margin", num(m));
    }
    if d.all_equivalent {
        t.meta("all_schemes_equivalent", true);
    }
    if !d.enumeration.is_empty() {
        t.line("j,objective_j");
        for &(j, v) in &d.enumeration {
            t.row(&[j.to_string(), v.map_or_else(|| "infeasible".into(), num)]);
        }
    }
    Ok(t.into())
}

fn scheme_id(spec: &str, index: usize) -> String {
    if spec.contains(',') {
        format!("custom{}", index + 1)
    } else {
        spec.to_string()
    }
}

pub fn sweep(a: &SweepArgs) -> Result<Output, CliError> {
    match a.mode {
        SweepMode::Drift => sweep_drift(a),
        SweepMode::KstarPanel => sweep_panel(a),
        SweepMode::KstarRatio => sweep_ratio(a),
    }
}

fn sweep_drift(a: &SweepArgs) -> Result<Output, CliError> {
    let c = &a.common;
    if a.mu_steps < 2 || !(a.mu_max > a.mu_min) {
        return Err(CliError::Usage(
            "need --mu-min < --mu-max and --mu-steps >= 2".into(),
        ));
    }
    let specs: Vec<&str> = match &a.schemes {
        Some(s) => s
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect(),
        None => vec![c.reward.as_str()],
    };
    let schemes = specs
        .iter()
        .map(|s| parse_reward(s, c.n))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new("mu,scheme_id,expected_performance");
    let grid: Vec<f64> = (0..a.mu_steps)
        .map(|i| a.mu_min + (a.mu_max - a.mu_min) * i as f64 / (a.mu_steps - 1) as f64)
        .collect();
    let mut skipped = 0;
    for &mu in &grid {
        for (i, (spec, r)) in specs.iter().zip(&schemes).enumerate() {
            let market = MarketParams::new(c.x0, mu, c.sigma, r.n())?;
            match Equilibrium::build(&market, r) {
                Ok(eq) => t.row(&[num(mu), scheme_id(spec, i), num(expected_performance(&eq))]),
                Err(e @ ContestError::DriftTooLarge { .. }) if a.skip_infeasible => {
                    warn(&format!(
                        "skipping mu={} for {}: {e}",
                        num(mu),
                        scheme_id(spec, i)
                    ));
                    skipped += 1;
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    for (i, (spec, r)) in specs.iter().zip(&schemes).enumerate() {
        let market = MarketParams::new(c.x0, 0.0, c.sigma, r.n())?;
        let shown: Vec<String> = r.as_slice().iter().map(|&v| num(v)).collect();
        t.meta(&format!("scheme {}", scheme_id(spec, i)), shown.join(" "));
        t.meta(
            &format!("mubar {}", scheme_id(spec, i)),
            num(mu_bar(&market, r)?),
        );
    }
    if skipped > 0 {
        t.meta("skipped", skipped);
    }
    Ok(t.into())
}

fn sweep_panel(a: &SweepArgs) -> Result<Output, CliError> {
    let c = &a.common;
    let n =
        c.n.ok_or_else(|| CliError::Usage("--n is required for kstar-panel".into()))?;
    let k =
        a.k.ok_or_else(|| CliError::Usage("--k is required for kstar-panel".into()))?;
    let query = OrderStatQuery::new(k, n)?;
    let market = MarketParams::new(c.x0, c.mu, c.sigma, n)?;
    let mut t = Table::new("j,objective");
    for j in 1..n {
        match Equilibrium::build(&market, &RewardScheme::cutoff(n, j)?) {
            Ok(eq) => t.row(&[j.to_string(), num(order_stat_mean(&eq, query)?)]),
            Err(e @ ContestError::DriftTooLarge { .. }) if a.skip_infeasible => {
                warn(&format!("skipping cut-off {j}: {e}"));
            }
            Err(e) => return Err(e.into()),
        }
    }
    t.meta("kstar", k_star(n, k)?);
    Ok(t.into())
}

fn sweep_ratio(a: &SweepArgs) -> Result<Output, CliError> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) || a.n_min < 2 || a.n_max < a.n_min {
        return Err(CliError::Usage(
            "need 0 < --alpha < 1 and 2 <= --n-min <= --n-max".into(),
        ));
    }
    let mut t = Table::new("n,kstar_over_n");
    for n in a.n_min..=a.n_max {
        let k = ((a.alpha * n as f64).round() as usize).clamp(1, n - 1);
        t.row(&[n.to_string(), num(k_star(n, k)? as f64 / n as f64)]);
    }
    t.meta("alpha", num(a.alpha));
    Ok(t.into())
}

pub fn simulate(a: &SimulateArgs) -> Result<Output, CliError> {
    let (market, reward) = setup(&a.common)?;
    let eq = Equilibrium::build(&market, &reward)?;
    let seed = a
        .seed
        .ok_or_else(|| CliError::Usage("--seed is required".into()))?;
    let n = eq.n();
    let cfg = SimConfig::new(a.games, seed)?.with_deviation_grid(a.grid)?;
    let mut path_cfg = SimConfig::new(a.paths, seed)?;
    if let Some(dt) = a.path_step {
        path_cfg = path_cfg.with_path_step(dt)?;
    }
    let mut t = Table::new("quantity,k_or_x,estimate,std_error,analytic,z_score");
    let mut failures = 0;
    let mut push = |t: &mut Table,
                    quantity: &str,
                    at: String,
                    est: &rankcontest::MCEstimate64,
                    analytic: f64,
                    slack: f64| {
        let z = est.z_score(analytic);
        if (est.mean - analytic).abs() > 4.0 * est.std_error + slack && z.abs() > 4.0 {
            failures += 1;
        }
        t.row(&[
            quantity.into(),
            at,
            num(est.mean),
            num(est.std_error),
            num(analytic),
            num(z),
        ]);
    };

    let play = play_games(&eq, &cfg);
    for (i, p) in play.payoff.iter().enumerate() {
        push(
            &mut t,
            "payoff",
            (i + 1).to_string(),
            p,
            1.0 / n as f64,
            0.0,
        );
    }
    let levels = analytic_rank_levels(&eq)?;
    for (k, (est, &an)) in play.rank_level.iter().zip(&levels).enumerate() {
        push(&mut t, "rank_level", (k + 1).to_string(), est, an, 0.0);
    }
    let curve = best_response_curve(&eq, &cfg)?;
    for p in &curve.points {
        push(
            &mut t,
            "best_response",
            num(p.x),
            &p.empirical,
            p.analytic,
            0.0,
        );
    }
    let exit = path_exit_check(&eq, &path_cfg)?;
    let x0 = num(market.x0());
    let allowance = exit.discretization_allowance;
    push(
        &mut t,
        "path_hit_probability",
        x0.clone(),
        &exit.hit_probability,
        exit.analytic_hit_probability,
        allowance,
    );
    push(
        &mut t,
        "path_exit_utility",
        x0,
        &exit.utility,
        1.0 / n as f64,
        allowance * reward.first(),
    );

    t.meta("seed", seed);
    t.meta("games", a.games);
    t.meta("paths", a.paths);
    t.meta("path_step", num(exit.step));
    t.meta("path_allowance", num(allowance));
    t.meta("best_response_max_deviation", num(curve.max_deviation));
    t.meta("failures", failures);
    Ok(Output {
        csv: t.into_string(),
        strict_failures: failures,
    })
}
