use std::fs::File;
use std::io::{BufReader, Write};

use iolrt_core::backbone::{disparity_filter, GraphFormat, Sidedness};
use iolrt_core::baselines::{ConstantTerm, Target, VarSimulation};
use iolrt_core::dynamics::ShockProfile;
use iolrt_core::iodata::{canonical_code, parse_panel, write_long_format, IOTable, NoiseSpec, Panel, EU28};
use iolrt_core::pipeline::{
    self, panel_aggregates, panel_forecasts, panel_susceptibility, Baseline, BenchmarkConfig,
    FluctuationOptions,
};
use iolrt_core::response::{
    general_response, impulse_response, impulse_response_monte_carlo, recovery_time, step_response,
    uniform_grid, ChangeMeasure, ImpliedShockOptions, ResponseCurve,
};
use iolrt_core::scenario::{run_scenario, ScenarioSpec};
use iolrt_core::susceptibility::{
    susceptibility_analytic, susceptibility_monte_carlo, Horizon, Method, MonteCarloSpec,
    SumConvention, SusceptibilityMatrix,
};
use iolrt_core::synthetic::{synthetic_panel, SyntheticPanelSpec};
use iolrt_core::Error;
use nalgebra::DVector;
use serde_json::json;

use crate::config::Settings;
use crate::error::{usage, CliError, CliResult};
use crate::staging::Staging;

pub const COMMANDS: &[(&str, &str)] = &[
    ("ingest", "validate a panel and write it in canonical long format"),
    ("susceptibility", "susceptibility matrices, sector aggregates and ranking"),
    ("response", "response curves and recovery times for one economy"),
    ("forecast", "implied shocks and two-year LRT forecasts"),
    ("fluctuation", "regression of average output changes on predicted fluctuations"),
    ("benchmark", "LRT forecasts against ARIMA, VAR and perturbed-IO baselines"),
    ("scenario", "impacts of a demand-shock scenario"),
    ("backbone", "disparity-filter backbone of a susceptibility matrix"),
    ("synth", "generate a synthetic panel"),
];

pub fn run(command: &str, s: &Settings, out: &mut Staging) -> CliResult<()> {
    match command {
        "ingest" => ingest(s, out),
        "susceptibility" => susceptibility(s, out),
        "response" => response(s, out),
        "forecast" => forecast(s, out),
        "fluctuation" => fluctuation(s, out),
        "benchmark" => benchmark(s, out),
        "scenario" => scenario(s, out),
        "backbone" => backbone(s, out),
        "synth" => synth(s, out),
        other => usage(format!("unknown command {other:?}")),
    }
}

fn parse_countries(raw: &str) -> Vec<String> {
    if raw.trim().eq_ignore_ascii_case("all") {
        return Vec::new();
    }
    let mut out = Vec::new();
    for c in raw.split(',').map(|c| c.trim().to_ascii_uppercase()).filter(|c| !c.is_empty()) {
        if c == "EU28" {
            out.extend(EU28.iter().map(|s| s.to_string()));
        } else {
            out.push(c);
        }
    }
    out.sort();
    out.dedup();
    out
}

fn parse_years(raw: &str) -> CliResult<Vec<i32>> {
    if raw.trim().eq_ignore_ascii_case("all") {
        return Ok(Vec::new());
    }
    let bad = || CliError::Usage(format!("invalid year selection {raw:?}"));
    let mut out = Vec::new();
    for part in raw.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (i32, i32) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if b < a {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn read_panel(s: &Settings) -> CliResult<Panel> {
    let path = s.require("data")?;
    let file = File::open(path).map_err(|e| {
        CliError::Core(Error::Io(std::io::Error::new(e.kind(), format!("{path}: {e}"))))
    })?;
    Ok(parse_panel(BufReader::new(file))?)
}

/// The panel restricted to the `country` and `year` selections.
fn load_panel(s: &Settings) -> CliResult<Panel> {
    let full = read_panel(s)?;
    let countries = parse_countries(s.require("country")?);
    let years = parse_years(s.require("year")?)?;
    let selected = full.select(&countries, &years);
    let mut missing = Vec::new();
    if !countries.is_empty() && !years.is_empty() {
        for c in &countries {
            for y in &years {
                if !selected.contains(c, *y) {
                    missing.push((c.clone(), *y));
                }
            }
        }
    } else {
        for c in &countries {
            if selected.years(c).is_empty() {
                missing.extend(full.all_years().into_iter().map(|y| (c.clone(), y)));
            }
        }
        let present = selected.all_years();
        for y in &years {
            if !present.contains(y) {
                missing.extend(full.countries().into_iter().map(|c| (c, *y)));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingPanelCell { cells: missing }.into());
    }
    if selected.is_empty() {
        return Err(Error::InvalidArgument("the selection contains no tables".into()).into());
    }
    Ok(selected)
}

fn single_table(panel: &Panel) -> CliResult<&IOTable> {
    let mut tables = panel.tables();
    match (tables.next(), tables.next()) {
        (Some(t), None) => Ok(t),
        _ => usage(format!(
            "this command needs exactly one country and year, the selection has {} tables",
            panel.len()
        )),
    }
}

fn noise(s: &Settings) -> CliResult<NoiseSpec> {
    let eta: f64 = s.parse("eta")?;
    Ok(match s.choice("noise", &["proportional", "isotropic"])? {
        "isotropic" => NoiseSpec::Isotropic { epsilon: eta },
        _ => NoiseSpec::OutputProportional { eta },
    })
}

fn monte_carlo(s: &Settings) -> CliResult<MonteCarloSpec> {
    Ok(MonteCarloSpec {
        dt: s.parse("dt")?,
        length: s.parse("length")?,
        burn_in: s.parse("burn-in")?,
        replicas: s.parse("replicas")?,
        seed: s.parse("seed")?,
        standard_errors: s.flag("standard-errors")?,
    })
}

fn method(s: &Settings) -> CliResult<Method> {
    Ok(match s.choice("method", &["analytic", "monte-carlo"])? {
        "monte-carlo" => Method::MonteCarlo(monte_carlo(s)?),
        _ => Method::Analytic,
    })
}

fn horizon(s: &Settings) -> CliResult<Horizon> {
    let h: Horizon = s.parse("horizon")?;
    Ok(h.validate()?)
}

fn sector_index(table: &IOTable, code: &str) -> CliResult<usize> {
    table
        .sector_index(&canonical_code(code))
        .ok_or_else(|| CliError::Usage(format!("unknown sector {code:?} in {} {}", table.country(), table.year())))
}

/// `all=V` or `SECTOR=V,SECTOR=V`.
fn shock_vector(s: &Settings, table: &IOTable) -> CliResult<DVector<f64>> {
    let raw = s.require("shock")?;
    let mut x = DVector::zeros(table.n());
    for part in raw.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let Some((code, value)) = part.split_once('=') else {
            return usage(format!("shock entry {part:?} is not SECTOR=VALUE"));
        };
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("invalid shock value in {part:?}")))?;
        if code.trim().eq_ignore_ascii_case("all") {
            x.fill(v);
        } else {
            x[sector_index(table, code.trim())?] = v;
        }
    }
    Ok(x)
}

/// Tabulated shock rate from a file with header `t,SECTOR,...`; sectors not
/// listed receive no shock.
fn tabulated_shock(s: &Settings, table: &IOTable) -> CliResult<ShockProfile> {
    let path = s.require("shock-file")?;
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').map(str::trim).collect();
    if header.first() != Some(&"t") {
        return Err(Error::MalformedRow {
            line: 1,
            reason: "shock file header must start with t".into(),
        }
        .into());
    }
    let columns: Vec<usize> = header[1..]
        .iter()
        .map(|c| sector_index(table, c))
        .collect::<CliResult<_>>()?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| Error::MalformedRow {
                line: i + 2,
                reason: "non-numeric field".into(),
            })?;
        if fields.len() != header.len() {
            return Err(Error::MalformedRow {
                line: i + 2,
                reason: format!("expected {} fields, found {}", header.len(), fields.len()),
            }
            .into());
        }
        times.push(fields[0]);
        let mut x = DVector::zeros(table.n());
        for (k, col) in columns.iter().enumerate() {
            x[*col] = fields[k + 1];
        }
        values.push(x);
    }
    let profile = ShockProfile::Tabulated { times, values };
    profile.validate(table.n())?;
    Ok(profile)
}

fn write_json(out: &mut Staging, name: &str, value: &serde_json::Value) -> CliResult<()> {
    let mut w = out.create(name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn ingest(s: &Settings, out: &mut Staging) -> CliResult<()> {
    let panel = load_panel(s)?;
    write_long_format(panel.tables(), out.create("panel.csv")?)?;
    let mut w = out.create("tables.csv")?;
    writeln!(w, "country,year,sectors,spectral_radius,accounting_residual,final_demand_discrepancy")?;
    for t in panel.tables() {
        let gap = t.final_demand_discrepancy();
        if gap > 1e-6 {
            log::warn!(
                "{} {}: recorded final demand differs from the accounting residual by {gap:e}",
                t.country(),
                t.year()
            );
        }
        writeln!(
            w,
            "{},{},{},{:.16e},{:.16e},{:.16e}",
            t.country(),
            t.year(),
            t.n(),
            t.spectral_radius(),
            t.accounting_residual(),
            gap
        )?;
    }
    Ok(())
}

fn susceptibility(s: &Settings, out: &mut Staging) -> CliResult<()> {
    let panel = load_panel(s)?;
    let convention = match s.choice("sum-over", &["second", "first"])? {
        "first" => SumConvention::FirstIndex,
        _ => SumConvention::SecondIndex,
    };
    let matrices = panel_susceptibility(&panel, horizon(s)?, &method(s)?, noise(s)?)?;
    for ((c, y), rho) in &matrices {
        rho.write_csv(out.create(&format!("rho/{c}_{y}.csv"))?)?;
    }
    let agg = panel_aggregates(&panel, &matrices, convention)?;
    let mut w = out.create("sector_susceptibility.csv")?;
    writeln!(w, "country,year,sector,rho,output")?;
    for ((c, y), v) in &agg.sector {
        let table = panel.get(c, *y)?;
        for (k, code) in agg.sectors.iter().enumerate() {
            writeln!(w, "{c},{y},{code},{:.16e},{:.16e}", v[k], table.output()[k])?;
        }
    }
    agg.write_csv(out.create("weighted_sector.csv")?)?;
    let mut w = out.create("ranking.csv")?;
    writeln!(w, "rank,sector,name,rho,ci_low,ci_high")?;
    let first = panel.tables().next().expect("non-empty selection");
    for (rank, k) in agg.ranking().into_iter().enumerate() {
        let ws = agg.weighted_sector[k];
        writeln!(
            w,
            "{},{},\"{}\",{:.16e},{:.16e},{:.16e}",
            rank + 1,
            agg.sectors[k],
            first.sectors()[k].short_name.replace('"', "'"),
            ws.rho,
            ws.ci_low,
            ws.ci_high
        )?;
    }
    let mut w = out.create("country_average.csv")?;
    writeln!(w, "country,rho")?;
    for (c, v) in &agg.country_average {
        writeln!(w, "{c},{v:.16e}")?;
    }
    Ok(())
}

fn response(s: &Settings, out: &mut Staging) -> CliResult<()> {
    let panel = load_panel(s)?;
    let table = single_table(&panel)?;
    let grid = uniform_grid(s.parse("response-horizon")?, s.parse("spacing")?)?;
    let shock_type = s.choice("shock-type", &["impulse", "step", "tabulated"])?;
    let curve: ResponseCurve = match (shock_type, method(s)?) {
        ("impulse", Method::Analytic) => impulse_response(table, &shock_vector(s, table)?, &grid)?,
        ("impulse", Method::MonteCarlo(spec)) => {
            let nu = noise(s)?.covariance(table)?;
            impulse_response_monte_carlo(table, &nu, &shock_vector(s, table)?, &grid, &spec)?
        }
        ("step", Method::Analytic) => step_response(table, &shock_vector(s, table)?, &grid)?,
        ("tabulated", Method::Analytic) => general_response(table, &tabulated_shock(s, table)?, &grid)?,
        (kind, _) => return usage(format!("{kind} responses are only available with --method analytic")),
    };
    curve.write_csv(out.create("curve.csv")?)?;
    if shock_type != "step" {
        let threshold: f64 = s.parse("recovery-threshold")?;
        let mut w = out.create("recovery.csv")?;
        writeln!(w, "sector,recovery_years")?;
        for (code, t) in curve.sectors.iter().zip(recovery_time(&curve, threshold)) {
            writeln!(w, "{code},{t:.16e}")?;
        }
    }
    Ok(())
}

fn implied_options(s: &Settings) -> CliResult<ImpliedShockOptions> {
    Ok(ImpliedShockOptions {
        condition_cap: s.parse("condition-cap")?,
        ridge: s.parse_opt("ridge")?,
    })
}

fn forecast(s: &Settings, out: &mut Staging) -> CliResult<()> {
    let panel = load_panel(s)?;
    let cells = panel_forecasts(&panel, &implied_options(s)?)?;
    if cells.is_empty() {
        return Err(Error::TooShortSeries { len: 2, required: 3 }.into());
    }
    let sectors = pipeline::panel_sectors(&panel)?;
    let mut fw = out.create("forecast.csv")?;
    writeln!(fw, "country,year,sector,observed,predicted")?;
    let mut sw = out.create("implied_shocks.csv")?;
    writeln!(sw, "country,year,sector,implied_shock")?;
    let mut cw = out.create("conditioning.csv")?;
    writeln!(cw, "country,year,condition,ridge_lambda,roundtrip_error")?;
    for ((c, y), cell) in &cells {
        for (k, code) in sectors.iter().enumerate() {
            writeln!(fw, "{c},{y},{code},{:.16e},{:.16e}", cell.y_t2[k], cell.lrt.forecast[k])?;
            writeln!(sw, "{c},{y},{code},{:.16e}", cell.lrt.shock.x[k])?;
        }
        let change = (&cell.y_t1 - &cell.y_t).norm();
        let gap = (&cell.lrt.intermediate - &cell.y_t1).norm();
        let err = if change > 0.0 { gap / change } else { gap };
        let ridge = cell.lrt.shock.ridge_lambda.map_or_else(|| "NaN".to_string(), |l| format!("{l:.16e}"));
        writeln!(cw, "{c},{y},{:.16e},{ridge},{err:.16e}", cell.lrt.shock.condition)?;
    }
    Ok(())
}

fn fluctuation(s: &Settings, out: &mut Staging) -> CliResult<()> {
    let panel = load_panel(s)?;
    let opts = FluctuationOptions {
        base_year: s.parse_opt("base-year")?,
        horizon: horizon(s)?,
        measure: match s.choice("change-measure", &["signed", "absolute"])? {
            "absolute" => ChangeMeasure::Absolute,
            _ => ChangeMeasure::Signed,
        },
    };
    let analysis = pipeline::fluctuation_analysis(&panel, &opts)?;
    let mut w = out.create("points.csv")?;
    writeln!(w, "country,sector,predicted,observed,own_output")?;
    for r in &analysis.rows {
        writeln!(
            w,
            "{},{},{:.16e},{:.16e},{:.16e}",
            r.country, r.sector, r.point.predicted, r.point.observed, r.point.own_output
        )?;
    }
    let g = analysis.regression;
    write_json(
        out,
        "regression.json",
        &json!({
            "n": g.n,
            "r": g.r,
            "eta": g.eta,
            "intercept": g.intercept,
            "output_only_r": g.output_only_r,
            "joint_r": g.joint_r,
            "own_output_coefficient": g.own_output_coefficient,
            "own_output_stderr": g.own_output_stderr,
        }),
    )
}

fn benchmark_config(s: &Settings) -> CliResult<BenchmarkConfig> {
    let baselines = s
        .require("baselines")?
        .split(',')
        .map(str::trim)
        .filter(|b| !b.is_empty())
        .map(|b| b.parse::<Baseline>().map_err(|e| CliError::Usage(e.to_string())))
        .collect::<CliResult<Vec<_>>>()?;
    if baselines.is_empty() {
        return usage("--baselines lists no baseline");
    }
    Ok(BenchmarkConfig {
        baselines,
        target: match s.choice("target", &["changes", "levels"])? {
            "levels" => Target::Levels,
            _ => Target::Changes,
        },
        implied: implied_options(s)?,
        constant: match s.choice("arima-constant", &["auto", "include", "exclude"])? {
            "include" => ConstantTerm::Include,
            "exclude" => ConstantTerm::Exclude,
            _ => ConstantTerm::Auto,
        },
        noise: noise(s)?,
        var_samples: s.parse("var-samples")?,
        var_calibration_year: s.parse_opt("var-calibration-year")?,
        var_simulation: VarSimulation {
            dt: s.parse("dt")?,
            burn_in: s.parse("burn-in")?,
        },
        seed: s.parse("seed")?,
        oracle_lrt: s.flag("oracle-lrt")?,
    })
}

fn benchmark(s: &Settings, out: &mut Staging) -> CliResult<()> {
    let panel = load_panel(s)?;
    let config = benchmark_config(s)?;
    let report = pipeline::benchmark(&panel, &config)?;
    let sectors = pipeline::panel_sectors(&panel)?;

    let mut w = out.create("lrt_predictions.csv")?;
    writeln!(w, "country,year,sector,observed,predicted")?;
    for ((c, y), p) in &report.lrt {
        for (k, code) in sectors.iter().enumerate() {
            writeln!(w, "{c},{y},{code},{:.16e},{:.16e}", p.observed[k], p.predicted[k])?;
        }
    }
    let mut summary = Vec::new();
    for b in &report.baselines {
        let name = b.baseline.to_string();
        let mut w = out.create(&format!("{name}/predictions.csv"))?;
        writeln!(w, "country,year,sector,observed,predicted")?;
        for ((c, y), p) in &b.predictions {
            for (k, code) in sectors.iter().enumerate() {
                writeln!(w, "{c},{y},{code},{:.16e},{:.16e}", p.observed[k], p.predicted[k])?;
            }
        }
        let ev = &b.evaluation;
        ev.write_cells_csv(out.create(&format!("{name}/cells.csv"))?)?;
        ev.write_summary_csv(out.create(&format!("{name}/summary.csv"))?)?;
        let mut w = out.create(&format!("{name}/histogram.csv"))?;
        writeln!(w, "bin_low,bin_high,count")?;
        for (i, count) in ev.histogram.iter().enumerate() {
            let low = -2.0 + 0.1 * i as f64;
            writeln!(w, "{low:.1},{:.1},{count}", low + 0.1)?;
        }
        summary.push(json!({
            "baseline": name,
            "cells": ev.cells.len(),
            "skipped_cells": ev.skipped.iter().map(|(c, y)| format!("{c}/{y}")).collect::<Vec<_>>(),
            "arima_fallbacks": b.fallbacks.iter().map(|(c, y, k)| format!("{c}/{y}/{k}")).collect::<Vec<_>>(),
            "pooled": {
                "n": ev.pooled.n,
                "mean_pg": ev.pooled.mean,
                "std_dev": ev.pooled.std_dev,
                "t": ev.pooled.t,
                "p_value": ev.pooled.p_value,
                "ci_low": ev.pooled.ci_low,
                "ci_high": ev.pooled.ci_high,
            },
            "years": ev.years.iter().map(|y| json!({
                "year": y.year,
                "cells": y.cells,
                "mean_pg": y.mean_pg,
                "p_value": y.test.map(|t| t.p_value),
            })).collect::<Vec<_>>(),
        }));
    }
    write_json(
        out,
        "report.json",
        &json!({
            "target": match config.target { Target::Changes => "changes", Target::Levels => "levels" },
            "forecast_cells": report.forecasts.len(),
            "baselines": summary,
        }),
    )
}

fn scenario(s: &Settings, out: &mut Staging) -> CliResult<()> {
    let path = s.require("scenario")?;
    let spec = ScenarioSpec::parse(&std::fs::read_to_string(path)?)?;
    let panel = read_panel(s)?;
    let result = run_scenario(&spec, &panel)?;
    result.write_sectors_csv(out.create("sectors.csv")?)?;
    result.write_aggregates_csv(out.create("aggregates.csv")?)?;
    result.write_indirect_csv(out.create("indirect.csv")?)?;
    for (c, curve) in &result.curves {
        curve.write_csv(out.create(&format!("curves/{c}.csv"))?)?;
    }
    Ok(())
}

fn backbone(s: &Settings, out: &mut Staging) -> CliResult<()> {
    let panel = load_panel(s)?;
    let table = single_table(&panel)?;
    let h = horizon(s)?;
    let rho: SusceptibilityMatrix = match (method(s)?, h) {
        (Method::Analytic, _) => susceptibility_analytic(table, h)?,
        (Method::MonteCarlo(spec), Horizon::Finite(t)) => {
            susceptibility_monte_carlo(table, &noise(s)?.covariance(table)?, t, &spec)?
        }
        (Method::MonteCarlo(_), Horizon::Infinite) => {
            return usage("Monte Carlo susceptibilities need a finite --horizon")
        }
    };
    let sidedness = match s.choice("sidedness", &["two-sided", "out-only"])? {
        "out-only" => Sidedness::OutOnly,
        _ => Sidedness::TwoSided,
    };
    let mut graph = disparity_filter(&rho, s.parse("p")?, sidedness)?;
    if let Some(t) = s.parse_opt::<f64>("response-time")? {
        let curve = impulse_response(table, &shock_vector(s, table)?, &[0.0, t])?;
        graph = graph.with_responses(curve.values[1].as_slice())?;
    }
    let format: GraphFormat = s.require("format")?.parse()?;
    let name = match format {
        GraphFormat::EdgeList => "backbone.csv",
        GraphFormat::GraphMl => "backbone.graphml",
    };
    graph.export(format, out.create(name)?)?;
    Ok(())
}

fn synth(s: &Settings, out: &mut Staging) -> CliResult<()> {
    let spec = SyntheticPanelSpec {
        countries: parse_countries(s.require("synth-countries")?),
        first_year: s.parse("synth-first-year")?,
        last_year: s.parse("synth-last-year")?,
        sectors: s.parse("synth-sectors")?,
        density: s.parse("synth-density")?,
        shock_scale: s.parse("synth-shock-scale")?,
        seed: s.parse("seed")?,
        ..Default::default()
    };
    let panel = synthetic_panel(&spec)?;
    write_long_format(panel.tables(), out.create("panel.csv")?)?;
    Ok(())
}

/// Commands that record which seed drove their random draws.
pub fn uses_seed(command: &str, s: &Settings) -> bool {
    match command {
        "benchmark" | "synth" => true,
        "susceptibility" | "response" | "backbone" => s.get("method") == Some("monte-carlo"),
        _ => false,
    }
}

pub fn manifest(command: &str, s: &Settings, files: &[String]) -> serde_json::Value {
    let (config, sources) = s.to_json();
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut files: Vec<String> = files.to_vec();
    files.extend(["manifest.json".to_string(), "resolved.conf".to_string()]);
    files.sort();
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp_unix": timestamp,
        "seed": s.get("seed"),
        "seed_used": uses_seed(command, s),
        "config": config,
        "sources": sources,
        "outputs": files,
        "rerun": format!("iolrt {command} --config resolved.conf"),
    })
}
