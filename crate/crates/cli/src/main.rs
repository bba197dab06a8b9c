mod args;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Parser;
use serde_json::json;

use args::{Cli, Command, OptimizeCommand, SchemeArgs, SweepArgs, SweepVar, ZetaSweep};
use kqaoi::analytic;
use kqaoi::figures::{self, SimPlan};
use kqaoi::optimizer::{self, GridSpec, RealGrid, SweepVariable};
use kqaoi::simulator::{episode_seed, SimOptions, Simulator};
use kqaoi::{AgeCost, ScenarioParams};
use output::{csv_string, emit, manifest_path, opt_cell, write_manifest, write_text, RunManifest, OUT_DIR_ENV};

/// Bad flag combinations; exit code 2 like clap's own usage errors.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| Usage(format!("{e:#}")).into())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn run(cli: Cli, argv: &[String]) -> Result<()> {
    let started = Instant::now();
    match cli.command {
        Command::Analytic(a) => {
            let params = usage(a.scenario.resolve())?;
            let scheme = usage(a.scheme.resolve())?;
            let point = analytic::evaluate(&params, &scheme)?;
            let text = serde_json::to_string_pretty(&point)? + "\n";
            if a.json {
                print!("{text}");
            } else {
                println!(
                    "{scheme}: k-QAoI {} energy {} J ({:.6} mJ)",
                    point.expected_kqaoi,
                    point.expected_energy_joules,
                    point.expected_energy_joules * 1e3
                );
            }
            if let Some(path) = a.output {
                write_text(&path, &text)?;
                finish(argv, json!({ "scenario": params, "scheme": scheme }), None, &[path], started, vec![])?;
            }
        }
        Command::Simulate(a) => {
            let params = usage(a.scenario.resolve())?;
            let scheme = usage(a.scheme.resolve())?;
            if a.episodes == 0 {
                return Err(Usage("--episodes must be at least 1".into()).into());
            }
            let sim = Simulator::new(&params, SimOptions::default())?;
            let stats = sim.batch(&scheme, a.episodes, a.seed)?;
            let text = serde_json::to_string_pretty(&stats)? + "\n";
            print!("{text}");
            let mut written = Vec::new();
            if let Some(path) = &a.episodes_csv {
                let mut rows = Vec::new();
                for e in 0..a.episodes {
                    let seed = episode_seed(a.seed, e);
                    let (o, _) = sim.run(&scheme, seed)?;
                    rows.push(vec![
                        e.to_string(),
                        seed.to_string(),
                        o.kqaoi.to_string(),
                        o.total_energy_joules.to_string(),
                        o.woken_count().to_string(),
                    ]);
                }
                let header = ["episode", "seed", "kqaoi", "energy_joules", "woken"].map(String::from);
                write_text(path, &csv_string(&header, &rows)?)?;
                written.push(path.clone());
            }
            if let Some(path) = &a.event_log {
                let logger = Simulator::new(&params, SimOptions { event_log: true, ..SimOptions::default() })?;
                let (_, log) = logger.run(&scheme, episode_seed(a.seed, a.log_episode))?;
                write_text(path, &log.map(|l| l.to_string()).unwrap_or_default())?;
                written.push(path.clone());
            }
            if let Some(path) = &a.output {
                write_text(path, &text)?;
                written.push(path.clone());
            }
            if !written.is_empty() {
                finish(argv, json!({ "scenario": params, "scheme": scheme, "episodes": a.episodes }), Some(a.seed), &written, started, vec![])?;
            }
        }
        Command::Sweep(a) => sweep(a, argv, started)?,
        Command::Optimize(cmd) => optimize(cmd, argv, started)?,
        Command::Reproduce(a) => {
            let dir = match (&a.out_dir, std::env::var_os(OUT_DIR_ENV)) {
                (Some(d), _) => d.clone(),
                (None, Some(d)) => PathBuf::from(d),
                (None, None) => PathBuf::from("."),
            };
            if !figures::FIGURES.contains(&a.figure) {
                return Err(Usage(format!("unknown figure {}; expected one of {:?}", a.figure, figures::FIGURES)).into());
            }
            let plan = (!a.no_sim).then_some(SimPlan { episodes: a.episodes, master_seed: a.seed });
            let table = figures::reproduce(a.figure, plan)?;
            let header = table.columns.clone();
            let rows: Vec<Vec<String>> = table.rows.iter().map(|r| r.iter().map(|c| c.to_string()).collect()).collect();
            let csv_path = dir.join(format!("fig{}.csv", a.figure));
            write_text(&csv_path, &csv_string(&header, &rows)?)?;
            let mut argv = argv.to_vec();
            if a.out_dir.is_none() {
                argv.extend(["--out-dir".to_string(), dir.display().to_string()]);
            }
            let params = json!({ "title": table.title, "scenarios": table.scenarios, "simulation": plan });
            finish(&argv, params, plan.map(|p| p.master_seed), std::slice::from_ref(&csv_path), started, table.notes.clone())?;
            eprintln!("wrote {}", csv_path.display());
        }
        Command::Rerun { manifest } => {
            let m = RunManifest::read(&manifest)?;
            let cli = Cli::try_parse_from(&m.argv).context("manifest argv no longer parses")?;
            if matches!(cli.command, Command::Rerun { .. }) {
                bail!("manifest records a rerun");
            }
            run(cli, &m.argv)?;
        }
    }
    Ok(())
}

fn finish(
    argv: &[String],
    parameters: serde_json::Value,
    seed: Option<u64>,
    outputs: &[PathBuf],
    started: Instant,
    notes: Vec<String>,
) -> Result<()> {
    let mut m = RunManifest::new(argv, parameters, seed);
    m.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
    m.wall_clock_seconds = started.elapsed().as_secs_f64();
    m.notes = notes;
    write_manifest(&manifest_path(&outputs[0]), &m)
}

fn fill<T>(slot: &mut Option<T>, v: T, flag: &str) -> Result<()> {
    if slot.is_some() {
        return Err(Usage(format!("--{flag} is swept; do not also pass it")).into());
    }
    *slot = Some(v);
    Ok(())
}

fn sweep(a: SweepArgs, argv: &[String], started: Instant) -> Result<()> {
    let base = usage(a.scenario.resolve())?;
    let grid = usage(RealGrid::new(a.from, a.to, a.step).map_err(Into::into))?;
    let xs = grid.values();
    let mut rows = Vec::with_capacity(xs.len());
    for &x in &xs {
        let mut params = base.clone();
        let mut s: SchemeArgs = a.scheme.clone();
        match a.vary {
            SweepVar::Vth => fill(&mut s.vth, x, "vth")?,
            SweepVar::Zeta => {
                if x.fract() != 0.0 || x < 1.0 {
                    return Err(Usage(format!("zeta values must be positive integers, got {x}")).into());
                }
                fill(&mut s.zeta, x as u32, "zeta")?
            }
            SweepVar::Q => fill(&mut s.q, x, "q")?,
            SweepVar::Alpha => params.age_cost = AgeCost::Exponential { alpha: x },
            SweepVar::Gamma => params.age_penalty_slots = x,
            SweepVar::Ec => params.erasure_prob = x,
            SweepVar::N => {
                if x.fract() != 0.0 || x < 1.0 {
                    return Err(Usage(format!("n values must be positive integers, got {x}")).into());
                }
                params.n_nodes = x as usize
            }
        }
        usage(params.validate().map_err(Into::into))?;
        let scheme = usage(s.resolve())?;
        let point = analytic::evaluate(&params, &scheme)?;
        let (kq_sim, en_sim) = match a.sim_episodes {
            Some(e) => {
                let b = Simulator::new(&params, SimOptions::default())?.batch(&scheme, e, a.seed)?;
                (Some(b.mean_kqaoi), Some(b.mean_energy_joules))
            }
            None => (None, None),
        };
        rows.push(vec![
            x.to_string(),
            point.expected_kqaoi.to_string(),
            opt_cell(kq_sim),
            point.expected_energy_joules.to_string(),
            opt_cell(en_sim),
        ]);
    }
    let header = ["x", "kqaoi_theory", "kqaoi_sim", "energy_theory", "energy_sim"].map(String::from);
    emit(&csv_string(&header, &rows)?, a.output.as_deref())?;
    if let Some(path) = a.output {
        let params = json!({ "scenario": base, "vary": format!("{:?}", a.vary).to_lowercase(), "grid": grid,
                             "scheme": format!("{:?}", a.scheme.scheme).to_lowercase() });
        finish(argv, params, a.sim_episodes.map(|_| a.seed), &[path], started, vec![])?;
    }
    Ok(())
}

fn rr_or_number(constraint: &str, params: &ScenarioParams) -> Result<f64> {
    if constraint.eq_ignore_ascii_case("rr") {
        return Ok(analytic::rr_expected_kqaoi(params)?);
    }
    usage(constraint.parse::<f64>().with_context(|| format!("--constraint must be `rr` or a number, got `{constraint}`")))
}

fn optimize(cmd: OptimizeCommand, argv: &[String], started: Instant) -> Result<()> {
    match cmd {
        OptimizeCommand::Params { scenario, grid, constraint, fixed_p, output } => {
            let mut params = usage(scenario.resolve())?;
            params.oracle_p = !fixed_p;
            let grid = usage(grid.resolve(GridSpec::default()))?;
            let cap = rr_or_number(&constraint, &params)?;
            let r = optimizer::min_energy_params(&params, cap, &grid)?;
            let text = serde_json::to_string_pretty(&r)? + "\n";
            print!("{text}");
            if r.feasible {
                eprintln!("minimum energy {:.6} mJ at V_th {} zeta {}", r.energy_joules * 1e3, r.threshold, r.lead_slots);
            } else {
                eprintln!("infeasible: no grid point has k-QAoI <= {cap}");
            }
            if let Some(path) = output {
                write_text(&path, &text)?;
                finish(argv, json!({ "scenario": params, "grid": grid }), None, &[path], started, vec![])?;
            }
        }
        OptimizeCommand::Zeta { scenario, sweep, from, to, step, vth, zeta_grid, output } => {
            let mut params = usage(scenario.resolve())?;
            let values = usage(RealGrid::new(from, to, step).map_err(Into::into))?.values();
            let leads = usage(args::int_grid(&zeta_grid))?;
            let variable = match sweep {
                ZetaSweep::Alpha => SweepVariable::Alpha,
                ZetaSweep::Gamma => SweepVariable::Gamma,
            };
            if variable == SweepVariable::Alpha && params.age_cost == AgeCost::Linear {
                params.age_cost = AgeCost::Exponential { alpha: values[0] };
            }
            let curve = optimizer::zeta_opt_curve(&params, variable, &values, vth, &leads)?;
            let rows: Vec<Vec<String>> = curve
                .iter()
                .map(|p| vec![p.value.to_string(), p.lead_slots.to_string(), p.kqaoi.to_string()])
                .collect();
            let header = ["value", "zeta_opt", "kqaoi_opt"].map(String::from);
            emit(&csv_string(&header, &rows)?, output.as_deref())?;
            if let Some(path) = output {
                finish(argv, json!({ "scenario": params, "vth": vth, "zeta_grid": leads }), None, &[path], started, vec![])?;
            }
        }
        OptimizeCommand::Maxk { scenario, grid, setting, energy_cap, kqaoi_cap, fixed_p, output } => {
            let mut params = usage(scenario.resolve())?;
            if let Some(s) = setting {
                let preset = usage(figures::max_k_setting(s, params.n_nodes).map_err(Into::into))?;
                params = ScenarioParams { n_nodes: params.n_nodes, ..preset };
            }
            params.oracle_p = !fixed_p;
            let grid = usage(grid.resolve(GridSpec::max_k()))?;
            let energy_cap = match energy_cap {
                Some(e) => e,
                None => analytic::rr_energy(&params)?,
            };
            let r = match kqaoi_cap {
                Some(c) => optimizer::max_k(&params, energy_cap, |_| c, &grid)?,
                None => optimizer::max_k(
                    &params,
                    energy_cap,
                    |k| analytic::rr_expected_kqaoi(&ScenarioParams { k, ..params.clone() }).unwrap_or(f64::NAN),
                    &grid,
                )?,
            };
            let text = serde_json::to_string_pretty(&r)? + "\n";
            print!("{text}");
            if let Some(path) = output {
                write_text(&path, &text)?;
                finish(argv, json!({ "scenario": params, "grid": grid }), None, &[path], started, vec![])?;
            }
        }
    }
    Ok(())
}
