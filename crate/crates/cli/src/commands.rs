//! Subcommand implementations. Every output embeds the resolved config.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Serialize;

use kdense::amp::{amp_trials, AmpConfig};
use kdense::coverage::{coverage_rate_bound, cover_lower_bound, greedy_cover, verify_cover_with};
use kdense::exact::mle_trials;
use kdense::instance::{generate_instance, rate, ProblemParams, Snr};
use kdense::report::{csv_table, LineChart, Marker, Series, SweepResult};
use kdense::se::{phase_grid, SeInit, SeOptions};
use kdense::sweep::{mle_mc, se_transitions, sweep_amp, sweep_se, AmpSweep, MleSweep, SeSweep, SnrAxis};
use kdense::thresholds::{gamma_amp, gamma_lb_g, gamma_ub_exact, snr_convert, OrderRegime, ReportOptions, Scaling, ThresholdReport};
use kdense::Exec;

use crate::config::{echo, section, ConfigFile, InitChoice};
use crate::{Cli, CliError, Command, Format, ProblemArgs, SeInitArg};

const EXEC: Exec = Exec::Parallel;

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn to_json<T: Serialize>(config: &str, data: &T) -> String {
    let mut s = serde_json::to_string_pretty(&serde_json::json!({ "config": config, "data": data }))
        .expect("serializable output");
    s.push('\n');
    s
}

/// Writes `stem.csv` or `stem.json` according to `--format`.
fn emit<T: Serialize>(cli: &Cli, stem: &str, echo: &str, csv: impl FnOnce() -> String, data: &T) -> Result<(), CliError> {
    match cli.format {
        Format::Csv => write(&cli.out_dir, &format!("{stem}.csv"), &csv()),
        Format::Json => write(&cli.out_dir, &format!("{stem}.json"), &to_json(echo, data)),
    }
}

fn params_from(a: &ProblemArgs, seed: u64) -> Result<ProblemParams, CliError> {
    let snr = match (a.gamma, a.beta) {
        (Some(g), None) => Snr::Gamma(g),
        (None, Some(b)) => Snr::Beta(b),
        _ => return Err(CliError::Config("give exactly one of --gamma and --beta".into())),
    };
    Ok(ProblemParams::new(a.p, a.k, a.d, snr, seed)?)
}

fn bool_cell(b: bool) -> String {
    (if b { "1" } else { "0" }).to_string()
}

#[derive(Serialize)]
struct Resolved<'a, T: Serialize> {
    #[serde(flatten)]
    inner: &'a T,
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Gen { problem, trial } => gen(cli, problem, *trial),
        Command::Amp { problem, threshold, init, trials, damping, max_iter, tol, square_term } => {
            let params = params_from(problem, cli.seed)?;
            let config = AmpConfig {
                threshold: (*threshold).into(),
                init: (*init).into(),
                square_term: (*square_term).into(),
                damping: *damping,
                max_iter: *max_iter,
                tol: *tol,
                ..AmpConfig::default()
            };
            config.validate()?;
            let echo = echo(
                "amp",
                cli.seed,
                &serde_json::json!({
                    "p": params.p, "k": params.k, "d": params.d,
                    "beta": params.beta()?, "gamma": params.gamma()?,
                    "threshold": config.threshold, "init": config.init, "square_term": config.square_term,
                    "trials": trials, "damping": damping, "max_iter": max_iter, "tol": tol,
                }),
            );
            let results = amp_trials(&params, *trials, &config, EXEC)?;
            emit(
                cli,
                "amp",
                &echo,
                || {
                    let rows: Vec<Vec<String>> = results
                        .iter()
                        .map(|t| vec![t.trial.to_string(), t.iterations.to_string(), t.final_overlap.to_string(), bool_cell(t.converged)])
                        .collect();
                    csv_table(&echo, &["trial", "iter_converged", "final_overlap", "converged_flag"], &rows)
                },
                &results,
            )
        }
        Command::Se { p, k, d, beta_grid, init, quad_order } => {
            let betas = kdense::sweep::parse_grid(beta_grid)?;
            let inits = match init {
                SeInitArg::Ui => vec![SeInit::Ui],
                SeInitArg::Ii => vec![SeInit::Ii],
                SeInitArg::Both => vec![SeInit::Ui, SeInit::Ii],
            };
            let opts = SeOptions { order: *quad_order, ..SeOptions::default() };
            let grid: Vec<_> = betas.iter().map(|&b| (*p, *k, *d, b)).collect();
            let echo = echo(
                "se",
                cli.seed,
                &serde_json::json!({ "p": p, "k": k, "d": d, "beta_grid": beta_grid, "init": format!("{init:?}").to_lowercase(), "quad_order": quad_order }),
            );
            let points = phase_grid(&grid, &inits, opts, EXEC)?;
            emit(
                cli,
                "se",
                &echo,
                || {
                    let rows: Vec<Vec<String>> = points
                        .iter()
                        .map(|pt| {
                            vec![
                                pt.beta.to_string(),
                                pt.gamma.to_string(),
                                pt.init.name().to_string(),
                                pt.m_star_normalized.to_string(),
                                pt.iterations.to_string(),
                                bool_cell(pt.converged),
                                pt.gamma_amp.to_string(),
                            ]
                        })
                        .collect();
                    csv_table(&echo, &["beta", "gamma", "init", "m_star_normalized", "iters", "converged", "gamma_amp_claim"], &rows)
                },
                &points,
            )
        }
        Command::Mle { problem, trials, kprime, cap } => {
            let params = params_from(problem, cli.seed)?;
            let kprime = kprime.unwrap_or(params.k);
            let echo = echo(
                "mle",
                cli.seed,
                &serde_json::json!({ "p": params.p, "k": params.k, "d": params.d, "beta": params.beta()?, "gamma": params.gamma()?, "trials": trials, "kprime": kprime, "cap": cap }),
            );
            let results = mle_trials(&params, *trials, *cap, EXEC)?;
            emit(
                cli,
                "mle",
                &echo,
                || {
                    let rows: Vec<Vec<String>> = results
                        .iter()
                        .map(|t| {
                            vec![
                                t.trial.to_string(),
                                t.overlap.to_string(),
                                bool_cell(t.exact),
                                bool_cell(t.overlap >= kprime),
                                t.max_weight.to_string(),
                                t.planted_weight.to_string(),
                            ]
                        })
                        .collect();
                    csv_table(&echo, &["trial", "overlap", "exact", "kprime_recovered", "max_weight", "planted_weight"], &rows)
                },
                &results,
            )
        }
        Command::Cover { p, k, r, verify, cap } => cover(cli, *p, *k, *r, *verify, *cap),
        Command::Thresholds { p, k, d, kprime, alpha, regime, convert, from } => {
            let report = ThresholdReport::compute(
                *p,
                *k,
                *d,
                ReportOptions { kprime: *kprime, alpha_k: *alpha, regime: regime.map(Into::into) },
            )?;
            let json = serde_json::to_string_pretty(&report).expect("serializable report") + "\n";
            write(&cli.out_dir, "thresholds.json", &json)?;
            match cli.format {
                Format::Csv => print!("{}", report.to_table()),
                Format::Json => print!("{json}"),
            }
            if let (Some(v), Some(from)) = (convert, from) {
                println!("\n{v} in {from} scaling:");
                for to in Scaling::ALL {
                    println!("  {:<10} {}", to.name(), snr_convert(*v, *from, to, *p, *k, *d)?);
                }
            }
            Ok(())
        }
        Command::SweepAmp { config } => run_sweep_amp(cli, config),
        Command::SweepSe { config } => run_sweep_se(cli, config),
        Command::MleMc { config } => run_mle_mc(cli, config),
    }
}

fn gen(cli: &Cli, problem: &ProblemArgs, trial: u64) -> Result<(), CliError> {
    let params = params_from(problem, cli.seed)?;
    let inst = generate_instance(&params, trial)?;
    let stem = format!("instance_t{trial}");
    let mut bin = Vec::new();
    inst.observations.write_to(&mut bin)?;
    std::fs::write(cli.out_dir.join(format!("{stem}.bin")), bin)?;
    let meta = serde_json::json!({
        "p": params.p, "k": params.k, "d": params.d, "seed": params.seed, "trial": trial,
        "beta": inst.beta, "gamma": params.gamma()?,
        "signal": inst.signal.members(),
        "planted_weight": inst.planted_weight(),
        "tensor": format!("{stem}.bin"),
    });
    write(&cli.out_dir, &format!("{stem}.json"), &(serde_json::to_string_pretty(&meta).expect("json") + "\n"))
}

fn cover(cli: &Cli, p: usize, k: usize, r: Option<usize>, verify: bool, cap: u64) -> Result<(), CliError> {
    let radii: Vec<usize> = match r {
        Some(r) => vec![r],
        None => (0..=k).collect(),
    };
    let echo = echo("cover", cli.seed, &serde_json::json!({ "p": p, "k": k, "r": r, "verify": verify, "cap": cap }));
    #[derive(Serialize)]
    struct Row {
        r: usize,
        cardinality: usize,
        lower_bound: Option<String>,
        rate_exact: f64,
        rate_asymptotic: f64,
        valid: Option<bool>,
    }
    let mut rows = Vec::new();
    for r in radii {
        let c = greedy_cover(p, k, r, cap)?;
        let rate = coverage_rate_bound(p, k, r)?;
        let valid = if verify { Some(verify_cover_with(&c, cap, EXEC)?.is_none()) } else { None };
        rows.push(Row {
            r,
            cardinality: c.cardinality(),
            lower_bound: cover_lower_bound(p, k, r).map(|v| v.to_string()),
            rate_exact: rate.exact,
            rate_asymptotic: rate.asymptotic,
            valid,
        });
    }
    emit(
        cli,
        "cover",
        &echo,
        || {
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.r.to_string(),
                        r.cardinality.to_string(),
                        r.lower_bound.clone().unwrap_or_default(),
                        r.rate_exact.to_string(),
                        r.rate_asymptotic.to_string(),
                        r.valid.map(bool_cell).unwrap_or_default(),
                    ]
                })
                .collect();
            csv_table(&echo, &["r", "cardinality", "lower_bound", "rate_exact", "rate_asymptotic", "valid"], &cells)
        },
        &rows,
    )
}

fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let set: BTreeSet<u64> = values.map(f64::to_bits).collect();
    let mut v: Vec<f64> = set.into_iter().map(f64::from_bits).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// One chart per value of `group`, x = `x_col`, one series per label.
fn charts_by(result: &SweepResult, group: &str, x_col: &str) -> Vec<(f64, Vec<Series>)> {
    let groups = distinct((0..result.rows.len()).filter_map(|i| result.param(i, group)));
    groups
        .into_iter()
        .map(|g| {
            let mut series: Vec<Series> = Vec::new();
            for (i, row) in result.rows.iter().enumerate() {
                if result.param(i, group) != Some(g) {
                    continue;
                }
                let x = result.param(i, x_col).unwrap_or(f64::NAN);
                match series.iter_mut().find(|s| s.name == row.series) {
                    Some(s) => s.points.push((x, row.median)),
                    None => series.push(Series { name: row.series.clone(), points: vec![(x, row.median)] }),
                }
            }
            (g, series)
        })
        .collect()
}

fn run_sweep_amp(cli: &Cli, path: &Path) -> Result<(), CliError> {
    let cfg = section(ConfigFile::load(path)?.sweep_amp, "sweep-amp")?;
    let seed = cfg.seed.unwrap_or(cli.seed);
    let base = cfg.grid.values()?;
    let echo = echo("sweep-amp", seed, &Resolved { inner: &cfg });
    let mut all = SweepResult::default();
    for &k in &cfg.k {
        let unit = if cfg.relative && cfg.axis == SnrAxis::Gamma { gamma_amp(cfg.p, k, cfg.d)? } else { 1.0 };
        let spec = AmpSweep {
            p: cfg.p,
            d: cfg.d,
            ks: vec![k],
            grid: base.iter().map(|v| v * unit).collect(),
            axis: cfg.axis,
            variants: cfg.variants.clone(),
            trials: cfg.trials,
            seed,
            config: cfg.amp_config(),
        };
        all.rows.extend(sweep_amp(&spec, EXEC)?.rows);
    }
    all.validate()?;
    emit(cli, "sweep_amp", &echo, || all.to_csv(&echo), &all)?;
    for (k, series) in charts_by(&all, "k", "gamma") {
        let k = k as usize;
        let chart = LineChart {
            title: format!("AMP median overlap, p = {}, d = {}, k = {k}", cfg.p, cfg.d),
            x_label: "gamma".into(),
            y_label: "median overlap / k".into(),
            series,
            markers: vec![Marker { name: "gamma_AMP".into(), x: gamma_amp(cfg.p, k, cfg.d)? }],
            y_range: Some((0.0, 1.0)),
        };
        write(&cli.out_dir, &format!("sweep_amp_k{k}.svg"), &chart.to_svg(&echo))?;
    }
    Ok(())
}

fn run_sweep_se(cli: &Cli, path: &Path) -> Result<(), CliError> {
    let cfg = section(ConfigFile::load(path)?.sweep_se, "sweep-se")?;
    let echo = echo("sweep-se", cli.seed, &Resolved { inner: &cfg });
    let options = SeOptions { tol: cfg.tol, max_iter: cfg.max_iter, order: cfg.quad_order };
    let inits = match cfg.init {
        InitChoice::Ui => vec![SeInit::Ui],
        InitChoice::Ii => vec![SeInit::Ii],
        InitChoice::Both => vec![SeInit::Ui, SeInit::Ii],
    };
    let spec = SeSweep {
        p: cfg.p,
        ds: cfg.d.clone(),
        ks: cfg.k.clone(),
        betas: cfg.beta_grid.values()?,
        scale: cfg.scale,
        inits,
        options,
    };
    let result = sweep_se(&spec, EXEC)?;
    emit(cli, "sweep_se", &echo, || result.to_csv(&echo), &result)?;
    for &d in &cfg.d {
        let rows: Vec<usize> = (0..result.rows.len()).filter(|&i| result.param(i, "d") == Some(d as f64)).collect();
        let sub = SweepResult { rows: rows.iter().map(|&i| result.rows[i].clone()).collect() };
        for (k, series) in charts_by(&sub, "k", "beta") {
            let k = k as usize;
            let chart = LineChart {
                title: format!("State evolution fixed point, p = {}, d = {d}, k = {k}", cfg.p),
                x_label: "beta".into(),
                y_label: "m* / delta".into(),
                series,
                markers: vec![Marker { name: "beta_AMP".into(), x: kdense::thresholds::beta_amp(cfg.p, k, d)? }],
                y_range: Some((0.0, 1.0)),
            };
            write(&cli.out_dir, &format!("sweep_se_d{d}_k{k}.svg"), &chart.to_svg(&echo))?;
        }
        if cfg.transitions {
            let trans = se_transitions(cfg.p, d, &cfg.k, options, EXEC)?;
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let cells: Vec<Vec<String>> = trans
                .iter()
                .map(|t| vec![t.k.to_string(), opt(t.beta_ui), opt(t.beta_ii), t.beta_amp.to_string()])
                .collect();
            write(&cli.out_dir, &format!("se_transitions_d{d}.csv"), &csv_table(&echo, &["k", "beta_ui", "beta_ii", "beta_amp"], &cells))?;
            let curve = |name: &str, f: &dyn Fn(&kdense::sweep::TransitionRow) -> Option<f64>| Series {
                name: name.into(),
                points: trans.iter().filter_map(|t| f(t).map(|b| (t.k as f64, b))).collect(),
            };
            let chart = LineChart {
                title: format!("Transition beta vs k, p = {}, d = {d}", cfg.p),
                x_label: "k".into(),
                y_label: "beta".into(),
                series: vec![
                    curve("UI transition", &|t| t.beta_ui),
                    curve("II transition", &|t| t.beta_ii),
                    curve("beta_AMP", &|t| Some(t.beta_amp)),
                ],
                markers: vec![],
                y_range: None,
            };
            write(&cli.out_dir, &format!("se_transitions_d{d}.svg"), &chart.to_svg(&echo))?;
        }
    }
    Ok(())
}

fn run_mle_mc(cli: &Cli, path: &Path) -> Result<(), CliError> {
    let cfg = section(ConfigFile::load(path)?.mle_mc, "mle-mc")?;
    let seed = cfg.seed.unwrap_or(cli.seed);
    let echo = echo("mle-mc", seed, &Resolved { inner: &cfg });
    let spec = MleSweep {
        p: cfg.p,
        k: cfg.k,
        d: cfg.d,
        grid: cfg.grid.values()?,
        axis: cfg.axis,
        trials: cfg.trials,
        kprime: cfg.kprime.unwrap_or(cfg.k),
        seed,
        cap: cfg.cap,
    };
    let result = mle_mc(&spec, EXEC)?;
    result.validate()?;
    emit(cli, "mle_mc", &echo, || result.to_csv(&echo), &result)?;
    let alpha = rate(cfg.k as f64, cfg.p as f64);
    let mut markers = vec![Marker { name: "gamma_UB (exact)".into(), x: gamma_ub_exact(alpha)? }];
    if let Ok(lb) = gamma_lb_g(alpha, OrderRegime::heuristic(cfg.k, cfg.d)) {
        markers.push(Marker { name: "gamma_LB,G".into(), x: lb });
    }
    let points: Vec<(f64, f64)> =
        (0..result.rows.len()).map(|i| (result.param(i, "gamma").unwrap_or(f64::NAN), result.rows[i].recovery_rate)).collect();
    let chart = LineChart {
        title: format!("Exact MLE recovery rate, p = {}, k = {}, d = {}", cfg.p, cfg.k, cfg.d),
        x_label: "gamma".into(),
        y_label: format!("P(overlap >= {})", spec.kprime),
        series: vec![Series { name: "MLE".into(), points }],
        markers,
        y_range: Some((0.0, 1.0)),
    };
    write(&cli.out_dir, "mle_mc.svg", &chart.to_svg(&echo))
}
