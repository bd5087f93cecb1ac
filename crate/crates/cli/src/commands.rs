//! Command implementations. Each command validates its configuration,
//! computes everything, and only then returns the output files as bytes —
//! a failing run never leaves partial outputs behind.

use crate::config::ExperimentConfig;
use obqsim_core::attacker::{estimate_t, observe_rounds, OperatorConfig};
use obqsim_core::cost::{cost_model, format_ratio, parse_ratio, Rational};
use obqsim_core::distributions::{moments_of_s, McConfig};
use obqsim_core::exec::{calibrate_sizes, execute};
use obqsim_core::metric::{plan_min_rtr, rtr, ErrPolicy, Rounds, RtRQuery};
use obqsim_core::plan::{build_plan, place_resizers, PlacementRule, PlanNode};
use obqsim_core::resizer::{resize, TrimStrategy};
use obqsim_core::{rng, LeakageLedger, OpId, PaddedTable, Schema};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

fn config_err<E: ToString>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err<E: ToString>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Output files as (name, bytes), written by the caller on success only.
pub type Outputs = Vec<(String, Vec<u8>)>;

pub struct CommonArgs<'a> {
    pub seed: u64,
    pub trials_override: Option<u64>,
    pub csv_has_header: bool,
    pub config_dir: &'a Path,
}

fn mc_config(config: &ExperimentConfig, seed: u64) -> McConfig {
    McConfig {
        samples: config.mc.as_ref().map_or(1_000_000, |m| m.samples),
        seed,
    }
}

fn built_plan(config: &ExperimentConfig) -> Result<PlanNode, CliError> {
    let spec = config
        .plan
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [plan] section".into()))?;
    build_plan(spec).map_err(config_err)
}

fn placement(config: &ExperimentConfig) -> Result<PlacementRule, CliError> {
    match &config.placement {
        None => Ok(PlacementRule::None),
        Some(p) => p.build().map_err(CliError::Config),
    }
}

fn metric_settings(config: &ExperimentConfig) -> Result<(ErrPolicy, f64), CliError> {
    let metric = config
        .metric
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [metric] section".into()))?;
    Ok((metric.err.build().map_err(CliError::Config)?, metric.alpha))
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

pub fn cmd_run(config: &ExperimentConfig, args: &CommonArgs) -> Result<Outputs, CliError> {
    let plan = built_plan(config)?;
    let rule = placement(config)?;
    let (catalog, _) =
        crate::config::build_catalog(config, args.seed, args.csv_has_header, args.config_dir)
            .map_err(CliError::Config)?;
    let placed = place_resizers(&plan, &rule);

    let (result, ledger, stats) =
        execute(&placed, &catalog, args.seed).map_err(runtime_err)?;

    let mut result_csv = String::new();
    writeln!(result_csv, "{}", result.schema().columns().join(",")).unwrap();
    for row in result.sorted_rows() {
        let line: Vec<String> = row.iter().map(i64::to_string).collect();
        writeln!(result_csv, "{}", line.join(",")).unwrap();
    }

    let ledger_json = serde_json::to_vec_pretty(&ledger).map_err(runtime_err)?;

    let mut stats_csv = String::from("op,kind,oblivious_size,effective_size\n");
    for op in &stats.per_op {
        writeln!(
            stats_csv,
            "{},{},{},{}",
            op.op, op.kind, op.oblivious_size, op.effective_size
        )
        .unwrap();
    }
    writeln!(
        stats_csv,
        "total,total,{},{}",
        stats.total_tuples, stats.total_tuples
    )
    .unwrap();

    Ok(vec![
        ("result.csv".into(), result_csv.into_bytes()),
        ("ledger.json".into(), ledger_json),
        ("stats.csv".into(), stats_csv.into_bytes()),
    ])
}

// ---------------------------------------------------------------------------
// rtr
// ---------------------------------------------------------------------------

pub fn cmd_rtr(config: &ExperimentConfig, args: &CommonArgs) -> Result<Outputs, CliError> {
    let (err_policy, alpha) = metric_settings(config)?;
    let mc = mc_config(config, args.seed);
    let mut csv = String::from("experiment,scope,op,n,t,strategy,sigma2,err,alpha,rtr\n");

    if let Some(op) = &config.operator {
        let strategy = op.strategy.build().map_err(config_err)?;
        let mut axis: Vec<u64> = config
            .sweep
            .as_ref()
            .map(|s| s.n.clone())
            .filter(|ns| !ns.is_empty())
            .unwrap_or_else(|| vec![op.n]);
        axis.sort_unstable();
        for n in axis {
            let t = (op.t_fraction * n as f64).floor() as u64;
            let est = moments_of_s(&strategy, n, t, mc).map_err(runtime_err)?;
            let err = err_policy.err_for(n);
            let rounds = if strategy.is_none() {
                Rounds::Infinite
            } else {
                Rounds::Finite(
                    rtr(&RtRQuery {
                        sigma2: est.variance,
                        err,
                        alpha,
                    })
                    .map_err(runtime_err)?,
                )
            };
            writeln!(
                csv,
                "{},operator,,{},{},{},{},{},{},{}",
                config.experiment,
                n,
                t,
                strategy.label(),
                est.variance,
                err,
                alpha,
                rounds
            )
            .unwrap();
        }
    } else {
        let plan = built_plan(config)?;
        let rule = placement(config)?;
        let (catalog, _) =
            crate::config::build_catalog(config, args.seed, args.csv_has_header, args.config_dir)
                .map_err(CliError::Config)?;
        let placed = place_resizers(&plan, &rule);
        let sizes = calibrate_sizes(&placed, &catalog).map_err(runtime_err)?;
        let report =
            plan_min_rtr(&placed, &sizes, err_policy, alpha, mc).map_err(runtime_err)?;
        for record in &report.records {
            writeln!(
                csv,
                "{},plan,{},{},{},{},{},{},{},{}",
                config.experiment,
                record.op,
                record.n,
                record.t,
                record.strategy,
                record
                    .sigma2
                    .map_or(String::new(), |v| v.to_string()),
                err_policy.err_for(record.n),
                alpha,
                record.rounds
            )
            .unwrap();
        }
        writeln!(
            csv,
            "{},plan-minimum,,,,,,,{},{}",
            config.experiment, alpha, report.minimum
        )
        .unwrap();
    }

    Ok(vec![("rtr.csv".into(), csv.into_bytes())])
}

// ---------------------------------------------------------------------------
// attack
// ---------------------------------------------------------------------------

pub fn cmd_attack(config: &ExperimentConfig, args: &CommonArgs) -> Result<Outputs, CliError> {
    let op_section = config
        .operator
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [operator] section".into()))?;
    let attack = config
        .attack
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [attack] section".into()))?;
    let (_, alpha) = metric_settings(config)?;
    let trials = args.trials_override.unwrap_or(attack.trials);
    if trials < 100 {
        return Err(CliError::Config(format!(
            "need at least 100 trials, got {trials}"
        )));
    }

    let strategy = op_section.strategy.build().map_err(config_err)?;
    let n = op_section.n;
    let t = (op_section.t_fraction * n as f64).floor() as u64;
    let op = OperatorConfig::new(OpId(0), n, t, strategy).map_err(config_err)?;
    let mc = mc_config(config, args.seed);

    let est = moments_of_s(&op.strategy, n, t, mc).map_err(runtime_err)?;
    let analytic = rtr(&RtRQuery {
        sigma2: est.variance,
        err: attack.err,
        alpha,
    })
    .map_err(runtime_err)?;

    // Success rate of the mean estimator at exactly the analytic RtR.
    let mu_eta = est.expected_fillers(t);
    let mut hits = 0u64;
    for trial in 0..trials {
        let mut trial_rng = rng::derive("attack-at-analytic", &[args.seed, trial]);
        let series = observe_rounds(&op, analytic, &mut trial_rng).map_err(runtime_err)?;
        let outcome = estimate_t(&series, mu_eta, t, attack.err).map_err(runtime_err)?;
        if outcome.success {
            hits += 1;
        }
    }
    let success_rate = hits as f64 / trials as f64;

    let (empirical, ceiling_exceeded) = match obqsim_core::attacker::empirical_rtr(
        &op,
        attack.err,
        alpha,
        trials,
        args.seed,
        attack.ceiling,
    ) {
        Ok(r) => (Some(r), false),
        Err(obqsim_core::Error::ExceedsCeiling(_)) => (None, true),
        Err(e) => return Err(runtime_err(e)),
    };

    let mut csv = String::from(
        "experiment,n,t,strategy,err,alpha,trials,analytic_rtr,empirical_rtr,\
         success_rate_at_analytic,ceiling_exceeded\n",
    );
    writeln!(
        csv,
        "{},{},{},{},{},{},{},{},{},{},{}",
        config.experiment,
        n,
        t,
        op.strategy.label(),
        attack.err,
        alpha,
        trials,
        analytic,
        empirical.map_or("exceeds-ceiling".into(), |r| r.to_string()),
        success_rate,
        ceiling_exceeded
    )
    .unwrap();

    Ok(vec![("attack.csv".into(), csv.into_bytes())])
}

// ---------------------------------------------------------------------------
// cost
// ---------------------------------------------------------------------------

pub fn cmd_cost(config: &ExperimentConfig, args: &CommonArgs) -> Result<Outputs, CliError> {
    let plan = built_plan(config)?;
    let cost = config
        .cost
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [cost] section".into()))?;
    let sweep = config
        .sweep
        .as_ref()
        .filter(|s| !s.f.is_empty())
        .ok_or_else(|| CliError::Config("cost needs a [sweep] f list".into()))?;

    let s = parse_ratio(&cost.selectivity).map_err(config_err)?;
    let mut fractions: Vec<(Rational, String)> = sweep
        .f
        .iter()
        .map(|text| Ok((parse_ratio(text).map_err(config_err)?, text.clone())))
        .collect::<Result<_, CliError>>()?;
    fractions.sort_by(|a, b| a.0.cmp(&b.0));

    let table_sizes = match &config.catalog {
        Some(c) => match &c.synthetic {
            Some(synth) => synth
                .table_sizes
                .iter()
                .enumerate()
                .map(|(i, &n)| (format!("t{i}"), n))
                .collect(),
            None => {
                let (catalog, _) = crate::config::build_catalog(
                    config,
                    args.seed,
                    args.csv_has_header,
                    args.config_dir,
                )
                .map_err(CliError::Config)?;
                catalog.sizes()
            }
        },
        None => return Err(CliError::Config("missing [catalog] section".into())),
    };

    let mut csv = String::from("experiment,selectivity,f,filler_pct_of_n,total_tuples\n");
    let hundred = parse_ratio("100").unwrap();
    for (f, text) in &fractions {
        let total = cost_model(&plan, &table_sizes, &s, f).map_err(runtime_err)?;
        // Filler share of N on the sweep axis: f * (1 - s) of each output.
        let filler_pct = f * (Rational::from_integer(1.into()) - &s) * &hundred;
        writeln!(
            csv,
            "{},{},{},{},{}",
            config.experiment,
            cost.selectivity,
            text,
            format_ratio(&filler_pct),
            format_ratio(&total)
        )
        .unwrap();
    }

    Ok(vec![("cost.csv".into(), csv.into_bytes())])
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

pub fn cmd_gen_data(config: &ExperimentConfig, args: &CommonArgs) -> Result<Outputs, CliError> {
    let section = config
        .catalog
        .as_ref()
        .and_then(|c| c.synthetic.as_ref())
        .ok_or_else(|| CliError::Config("missing [catalog.synthetic] section".into()))?;
    let (tables, report) =
        obqsim_core::synth::gen_synthetic(&section.to_spec(), args.seed).map_err(config_err)?;

    let mut outputs = Outputs::new();
    for (i, table) in tables.iter().enumerate() {
        let mut csv = String::new();
        writeln!(csv, "{}", table.schema().columns().join(",")).unwrap();
        for row in table.rows() {
            let line: Vec<String> = row.iter().map(i64::to_string).collect();
            writeln!(csv, "{}", line.join(",")).unwrap();
        }
        outputs.push((format!("t{i}.csv"), csv.into_bytes()));
    }
    outputs.push((
        "gen_report.json".into(),
        serde_json::to_vec_pretty(&report).map_err(runtime_err)?,
    ));
    Ok(outputs)
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

fn bench_table(rows: u64, cols: u64) -> PaddedTable {
    let names: Vec<String> = (0..cols).map(|c| format!("c{c}")).collect();
    let schema = Schema::shared(names).expect("bench columns are distinct");
    let data: Vec<Vec<i64>> = (0..rows as i64)
        .map(|r| (0..cols as i64).map(|c| r ^ c).collect())
        .collect();
    let valid: Vec<bool> = (0..rows).map(|r| r % 10 == 0).collect();
    PaddedTable::new(schema, data, valid, OpId(0)).expect("bench table is well formed")
}

fn median_resize_ns(rows: u64, cols: u64, reps: u64, seed: u64) -> u64 {
    let strategy = TrimStrategy::CoinToss(obqsim_core::distributions::FillerDistribution::Beta {
        alpha: 2.0,
        beta: 6.0,
    });
    let table = bench_table(rows, cols);
    let mut times: Vec<u64> = (0..reps)
        .map(|rep| {
            let input = table.clone();
            let mut ledger = LeakageLedger::new();
            let start = Instant::now();
            let out = resize(
                input,
                &strategy,
                seed ^ rep,
                OpId::resizer_over(OpId(0)),
                &mut ledger,
            )
            .expect("bench resize");
            let elapsed = start.elapsed().as_nanos() as u64;
            std::hint::black_box(out.public_size());
            elapsed
        })
        .collect();
    times.sort_unstable();
    times[times.len() / 2]
}

/// Least-squares slope on (ln x, ln y).
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

pub fn cmd_bench(config: &ExperimentConfig, args: &CommonArgs) -> Result<Outputs, CliError> {
    let bench = config
        .bench
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [bench] section".into()))?;
    if bench.rows.is_empty() && bench.cols.is_empty() {
        return Err(CliError::Config(
            "bench needs a rows and/or cols sweep".into(),
        ));
    }
    let reps = bench.reps.max(5);

    let mut csv = String::from("experiment,sweep,axis,median_ns,reps\n");
    let mut fits = String::from("experiment,sweep,slope,points\n");

    let mut run_sweep = |label: &str, axis: &[u64], f: &dyn Fn(u64) -> u64| {
        let mut points = Vec::new();
        let mut sorted = axis.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        for &x in &sorted {
            let median = f(x);
            writeln!(csv, "{},{},{},{},{}", config.experiment, label, x, median, reps).unwrap();
            points.push((x as f64, median as f64));
        }
        if let Some(slope) = loglog_slope(&points) {
            writeln!(
                fits,
                "{},{},{:.4},{}",
                config.experiment,
                label,
                slope,
                points.len()
            )
            .unwrap();
        }
    };

    if !bench.rows.is_empty() {
        run_sweep("rows", &bench.rows, &|n| {
            median_resize_ns(n, 4, reps, args.seed)
        });
    }
    if !bench.cols.is_empty() {
        let rows = bench.rows_for_cols;
        run_sweep("cols", &bench.cols, &|m| {
            median_resize_ns(rows, m, reps, args.seed)
        });
    }

    Ok(vec![
        ("bench.csv".into(), csv.into_bytes()),
        ("bench_fit.csv".into(), fits.into_bytes()),
    ])
}
