//! Experiment harness: named presets, flat key=value configs, deterministic
//! parallel trial execution, CSV/SVG emission, and plain-text reporting.

pub mod presets;
pub mod svg;
pub mod table;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::bounds::rate_probe;
use crate::error::{Error, Result};
use presets::{find, Preset, PresetKind};
use table::{ResultTable, Row};

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub preset: String,
    pub trials: usize,
    pub master_seed: u64,
    /// Output directory; no files are written when absent.
    pub out_dir: Option<PathBuf>,
    pub emit_svg: bool,
    /// Worker threads; 0 picks the rayon default.
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn new(preset: &str) -> Result<Self> {
        let p = find(preset)?;
        Ok(ExperimentConfig {
            preset: p.name.to_string(),
            trials: p.default_trials,
            master_seed: 0,
            out_dir: None,
            emit_svg: false,
            threads: 0,
        })
    }

    /// Parses a flat `key=value` config file. Blank lines and `#` comments
    /// are ignored. Recognized keys: preset, trials, seed, out, svg, threads.
    pub fn from_config_text(text: &str) -> Result<Self> {
        let mut preset = None;
        let mut cfg_pairs = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::spec(format!("config line {}: expected key=value", ln + 1)))?;
            let (key, value) = (key.trim(), value.trim().to_string());
            if key == "preset" {
                preset = Some(value);
            } else {
                cfg_pairs.push((key.to_string(), value));
            }
        }
        let preset = preset.ok_or_else(|| Error::spec("config must set preset="))?;
        let mut cfg = ExperimentConfig::new(&preset)?;
        for (key, value) in cfg_pairs {
            cfg.apply_override(&key, &value)?;
        }
        Ok(cfg)
    }

    /// Applies one key=value override (CLI flags reuse this path and win by
    /// being applied last).
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::spec(format!("invalid {what}: {value}"));
        match key {
            "trials" => {
                self.trials = value.parse().map_err(|_| bad("trials"))?;
                if self.trials == 0 {
                    return Err(Error::spec("trials must be >= 1"));
                }
            }
            "seed" => self.master_seed = value.parse().map_err(|_| bad("seed"))?,
            "out" => self.out_dir = Some(PathBuf::from(value)),
            "svg" => self.emit_svg = value.parse().map_err(|_| bad("svg"))?,
            "threads" => self.threads = value.parse().map_err(|_| bad("threads"))?,
            other => return Err(Error::spec(format!("unknown config key: {other}"))),
        }
        Ok(())
    }
}

/// Runs every trial of a preset (in parallel), assembles the sorted table,
/// and writes CSV/SVG artifacts when an output directory is configured.
/// Output bytes depend only on the preset, trial count, and seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let preset = find(&cfg.preset)?;
    let run = || -> Result<Vec<Vec<Row>>> {
        (0..cfg.trials as u64)
            .into_par_iter()
            .map(|trial| preset.run_trial(cfg.master_seed, trial))
            .collect()
    };
    let per_trial = if cfg.threads == 0 {
        run()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::spec(format!("thread pool: {e}")))?;
        pool.install(run)?
    };

    let mut tab = ResultTable::new(preset.name);
    for rows in per_trial {
        tab.rows.extend(rows);
    }
    tab.sort();

    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.csv", preset.name)), tab.to_csv())?;
        std::fs::write(dir.join(format!("{}_agg.csv", preset.name)), tab.to_agg_csv())?;
        if cfg.emit_svg {
            let chart = preset_chart(&preset, &tab);
            std::fs::write(dir.join(format!("{}.svg", preset.name)), chart)?;
        }
    }
    Ok(tab)
}

fn mean_series(tab: &ResultTable, metric: &str) -> svg::Series {
    let points = tab
        .times_of(metric)
        .into_iter()
        .map(|t| {
            let vals = tab.metric_at(metric, t);
            (t, vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect();
    svg::Series {
        label: metric.to_string(),
        points,
    }
}

fn preset_chart(preset: &Preset, tab: &ResultTable) -> String {
    match preset.kind {
        PresetKind::RateProbeLinreg | PresetKind::RateProbeDiag => svg::line_chart(
            preset.name,
            "n",
            &[mean_series(tab, "er")],
            true,
        ),
        PresetKind::GradNorm | PresetKind::BoundCompare => {
            let metrics: Vec<&str> = {
                let mut ms: Vec<&str> = tab
                    .rows
                    .iter()
                    .map(|r| r.metric.as_str())
                    .collect::<std::collections::BTreeSet<_>>()
                    .into_iter()
                    .collect();
                ms.sort_unstable();
                ms
            };
            let series: Vec<svg::Series> = metrics.iter().map(|m| mean_series(tab, m)).collect();
            svg::line_chart(preset.name, "t", &series, false)
        }
        _ => svg::line_chart(
            preset.name,
            "t",
            &[
                mean_series(tab, "er"),
                mean_series(tab, "ber"),
                mean_series(tab, "ver"),
                mean_series(tab, "dist_emp"),
                mean_series(tab, "ddc_rhs"),
            ],
            true,
        ),
    }
}

/// Per-trial DDC verdict from the emitted rows: holds iff
/// dist_emp <= ddc_rhs + tol + 3 mc_se at every recorded time.
pub fn ddc_verdicts(tab: &ResultTable, tol: f64) -> Vec<(u64, bool, Option<f64>)> {
    tab.trials()
        .into_iter()
        .map(|trial| {
            let rows = tab.trial_rows(trial);
            let lookup = |metric: &str, t: f64| {
                rows.iter()
                    .find(|r| r.metric == metric && r.t == t)
                    .map(|r| r.value)
            };
            let mut ok = true;
            let mut first = None;
            for t in tab.times_of("dist_emp") {
                let (Some(lhs), Some(rhs)) = (lookup("dist_emp", t), lookup("ddc_rhs", t)) else {
                    continue;
                };
                let se = lookup("mc_se", t).unwrap_or(0.0);
                if lhs > rhs + tol + 3.0 * se {
                    ok = false;
                    if first.is_none() {
                        first = Some(t);
                    }
                }
            }
            (trial, ok, first)
        })
        .collect()
}

/// Smallest DDC constant `a` fitted from a trial's rows, given the slack
/// already folded into `ddc_rhs` under the preset's (a, C, C').
pub fn fitted_min_a(tab: &ResultTable, trial: u64, a_used: f64) -> Option<f64> {
    let rows = tab.trial_rows(trial);
    let mut best: Option<f64> = None;
    for t in tab.times_of("dist_emp") {
        let lookup = |metric: &str| {
            rows.iter()
                .find(|r| r.metric == metric && r.t == t)
                .map(|r| r.value)
        };
        let (lhs, db, dv, rhs) = (
            lookup("dist_emp")?,
            lookup("dist_bias")?,
            lookup("dist_var")?,
            lookup("ddc_rhs")?,
        );
        let slack = rhs - a_used * (db + dv);
        let denom = db + dv;
        if denom > 1e-12 {
            let need = (lhs - slack).max(0.0) / denom;
            best = Some(best.map_or(need, |b: f64| b.max(need)));
        }
    }
    best
}

/// Writes the plain-text summary for a set of result tables.
pub fn emit_report(tables: &[ResultTable]) -> Result<String> {
    if tables.is_empty() {
        return Err(Error::spec("report needs at least one result table"));
    }
    let mut out = String::new();
    for tab in tables {
        let preset = find(&tab.experiment)?;
        let trials = tab.trials().len();
        let _ = writeln!(out, "preset {} ({} trials)", preset.name, trials);
        match preset.kind {
            PresetKind::RateProbeLinreg | PresetKind::RateProbeDiag => {
                let points: Vec<(usize, f64)> = tab
                    .times_of("er")
                    .into_iter()
                    .map(|t| {
                        let vals = tab.metric_at("er", t);
                        (t as usize, vals.iter().sum::<f64>() / vals.len() as f64)
                    })
                    .collect();
                let slope = rate_probe(&points)?;
                let verdict = if (-0.7..=-0.3).contains(&slope) { "pass" } else { "fail" };
                let _ = writeln!(
                    out,
                    "  log-log rate slope: {slope:.4} (target [-0.7, -0.3]: {verdict})"
                );
            }
            PresetKind::BoundCompare => {
                let t = tab.times_of("b")[0];
                let (bs, bps) = (tab.metric_at("b", t), tab.metric_at("b_prime", t));
                let b_wins = bs.iter().zip(&bps).filter(|(b, bp)| b < bp).count();
                let (thm1s, bases) = (tab.metric_at("thm1_bound", t), tab.metric_at("baseline_bound", t));
                let bound_wins = thm1s.iter().zip(&bases).filter(|(a, b)| a < b).count();
                let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
                let _ = writeln!(out, "  B < B' in {b_wins}/{} trials (mean B = {:.3}, mean B' = {:.3})", bs.len(), mean(&bs), mean(&bps));
                let _ = writeln!(
                    out,
                    "  decomposition bound < stability baseline in {bound_wins}/{} trials ({:.3} vs {:.3})",
                    thm1s.len(),
                    mean(&thm1s),
                    mean(&bases)
                );
            }
            PresetKind::GradNorm => {
                let t = 0.0;
                let mean = |m: &str| {
                    let v = tab.metric_at(m, t);
                    v.iter().sum::<f64>() / v.len() as f64
                };
                let _ = writeln!(
                    out,
                    "  initial gradient norm: standard {:.3} (2||theta*|| = {:.3}), variance {:.3}",
                    mean("grad_norm_standard"),
                    mean("two_theta_star_norm"),
                    mean("grad_norm_variance")
                );
            }
            _ => {
                let ddc = preset.ddc_params().expect("decomposition preset");
                let verdicts = ddc_verdicts(tab, 1e-9);
                let ok = verdicts.iter().filter(|(_, h, _)| *h).count();
                if ok == verdicts.len() {
                    let _ = writeln!(
                        out,
                        "  DDC (a={}, C={}, C'={}): holds at all recorded times in {ok}/{} trials",
                        ddc.a,
                        ddc.c_t,
                        ddc.c_n,
                        verdicts.len()
                    );
                } else {
                    let _ = writeln!(
                        out,
                        "  DDC (a={}, C={}, C'={}): holds in {ok}/{} trials",
                        ddc.a,
                        ddc.c_t,
                        ddc.c_n,
                        verdicts.len()
                    );
                    for (trial, holds, first) in &verdicts {
                        if !holds {
                            let _ = writeln!(
                                out,
                                "    trial {trial}: first violation at t = {}",
                                first.unwrap()
                            );
                        }
                    }
                }
                let max_a = tab
                    .trials()
                    .into_iter()
                    .filter_map(|trial| fitted_min_a(tab, trial, ddc.a))
                    .fold(f64::NAN, f64::max);
                let _ = writeln!(out, "  fitted min a (worst trial): {max_a:.4}");
                if let PresetKind::MatrecDecomp { n, .. } = preset.kind {
                    // smallest C' making the DDC hold at a = 1, C = 0
                    let mut worst = 0.0f64;
                    for trial in tab.trials() {
                        let rows = tab.trial_rows(trial);
                        for t in tab.times_of("dist_emp") {
                            let get = |m: &str| {
                                rows.iter().find(|r| r.metric == m && r.t == t).map(|r| r.value)
                            };
                            if let (Some(lhs), Some(db), Some(dv)) =
                                (get("dist_emp"), get("dist_bias"), get("dist_var"))
                            {
                                worst = worst.max((lhs - (db + dv)).max(0.0));
                            }
                        }
                    }
                    let fitted = worst * (n as f64).sqrt();
                    let _ = writeln!(
                        out,
                        "  fitted C' (worst trial): {fitted:.3} (checked against {})",
                        ddc.c_n
                    );
                }
                if tab.times_of("bound_rhs").is_empty() {
                    let _ = writeln!(out, "  composite bound: not applicable (no exact sharpness)");
                } else {
                    let mut violations = 0usize;
                    for trial in tab.trials() {
                        let rows = tab.trial_rows(trial);
                        for t in tab.times_of("er") {
                            let er = rows.iter().find(|r| r.metric == "er" && r.t == t);
                            let rhs = rows.iter().find(|r| r.metric == "bound_rhs" && r.t == t);
                            if let (Some(er), Some(rhs)) = (er, rhs) {
                                if er.value > rhs.value + 1e-9 {
                                    violations += 1;
                                }
                            }
                        }
                    }
                    let _ = writeln!(
                        out,
                        "  composite bound: {} (checked every recorded time)",
                        if violations == 0 {
                            "ER <= RHS everywhere".to_string()
                        } else {
                            format!("{violations} violations")
                        }
                    );
                }
            }
        }
    }
    Ok(out)
}

/// Loads every raw-rows CSV in a directory and writes `report.txt` there.
pub fn report_dir(dir: &Path) -> Result<String> {
    let mut tables = Vec::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.extension().is_some_and(|x| x == "csv")
                && !p
                    .file_stem()
                    .is_some_and(|s| s.to_string_lossy().ends_with("_agg"))
        })
        .collect();
    entries.sort();
    for path in entries {
        tables.push(ResultTable::load(&path)?);
    }
    let text = emit_report(&tables)?;
    std::fs::write(dir.join("report.txt"), &text)?;
    Ok(text)
}
