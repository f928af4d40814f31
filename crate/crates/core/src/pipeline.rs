//! Panel-level runs: the per-country-year operations mapped over a panel.
//!
//! Tasks run on the current rayon pool. Results are gathered in key order,
//! and the first error in that order is reported, so the worker count never
//! changes the outcome.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::baselines::{
    arima_forecast, evaluate_forecasts, fit_arima, fit_var1, perturbed_io_forecast, var_forecast,
    ArimaOrder, ConstantTerm, ForecastEvaluation, Prediction, Target, VarSimulation,
};
use crate::error::{Error, Result};
use crate::iodata::{IOTable, NoiseSpec, Panel};
use crate::response::{
    average_change, fluctuation_prediction, fluctuation_regression, lrt_forecast, ChangeMeasure,
    FluctuationPoint, FluctuationRegression, ImpliedShockOptions, LrtForecast,
};
use crate::susceptibility::{
    aggregate_susceptibilities, sector_susceptibility, susceptibility_analytic,
    susceptibility_monte_carlo, Horizon, Method, SectorCell, SumConvention,
    SusceptibilityAggregates, SusceptibilityMatrix,
};

pub type CellKey = (String, i32);

fn collect_ordered<T: Send>(results: Vec<(CellKey, Result<T>)>) -> Result<BTreeMap<CellKey, T>> {
    let mut out = BTreeMap::new();
    for (key, r) in results {
        out.insert(key, r?);
    }
    Ok(out)
}

/// Sector codes shared by every table of the panel.
pub fn panel_sectors(panel: &Panel) -> Result<Vec<String>> {
    let mut tables = panel.tables();
    let first = tables
        .next()
        .ok_or_else(|| Error::InvalidArgument("the selection contains no tables".into()))?;
    let codes: Vec<String> = first.sectors().iter().map(|s| s.code.clone()).collect();
    for t in tables {
        if t.sectors().iter().map(|s| &s.code).ne(codes.iter()) {
            return Err(Error::MisalignedPanel(format!(
                "{} {} has a different sector list than {} {}",
                t.country(),
                t.year(),
                first.country(),
                first.year()
            )));
        }
    }
    Ok(codes)
}

pub fn panel_susceptibility(
    panel: &Panel,
    horizon: Horizon,
    method: &Method,
    noise: NoiseSpec,
) -> Result<BTreeMap<CellKey, SusceptibilityMatrix>> {
    let tables: Vec<&IOTable> = panel.tables().collect();
    let results = tables
        .par_iter()
        .map(|t| {
            let key = (t.country().to_string(), t.year());
            let r = match (method, horizon) {
                (Method::Analytic, _) => susceptibility_analytic(t, horizon),
                (Method::MonteCarlo(spec), Horizon::Finite(h)) => noise
                    .covariance(t)
                    .and_then(|nu| susceptibility_monte_carlo(t, &nu, h, spec)),
                (Method::MonteCarlo(_), Horizon::Infinite) => Err(Error::InvalidArgument(
                    "Monte Carlo estimation needs a finite horizon".into(),
                )),
            };
            (key, r)
        })
        .collect();
    collect_ordered(results)
}

pub fn panel_aggregates(
    panel: &Panel,
    matrices: &BTreeMap<CellKey, SusceptibilityMatrix>,
    convention: SumConvention,
) -> Result<SusceptibilityAggregates> {
    let sectors = panel_sectors(panel)?;
    let mut cells = BTreeMap::new();
    for (key, rho) in matrices {
        let table = panel.get(&key.0, key.1)?;
        cells.insert(
            key.clone(),
            SectorCell {
                susceptibility: sector_susceptibility(rho, convention),
                output: table.output().clone(),
            },
        );
    }
    aggregate_susceptibilities(&sectors, &cells, &panel.countries(), &panel.all_years())
}

/// LRT forecast made at year `t` from the observed `Y(t)` and `Y(t+1)`,
/// alongside the observed `Y(t+2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastCell {
    pub lrt: LrtForecast,
    pub y_t: DVector<f64>,
    pub y_t1: DVector<f64>,
    pub y_t2: DVector<f64>,
}

/// Country-years `t` for which `t + 1` and `t + 2` are also present.
pub fn forecast_keys(panel: &Panel) -> Vec<CellKey> {
    let mut keys = Vec::new();
    for c in panel.countries() {
        for y in panel.years(&c) {
            if panel.contains(&c, y + 1) && panel.contains(&c, y + 2) {
                keys.push((c.clone(), y));
            }
        }
    }
    keys
}

pub fn panel_forecasts(panel: &Panel, opts: &ImpliedShockOptions) -> Result<BTreeMap<CellKey, ForecastCell>> {
    panel_sectors(panel)?;
    let results = forecast_keys(panel)
        .into_par_iter()
        .map(|key| {
            let r = (|| {
                let t0 = panel.get(&key.0, key.1)?;
                let y_t1 = panel.get(&key.0, key.1 + 1)?.output().clone();
                let y_t2 = panel.get(&key.0, key.1 + 2)?.output().clone();
                let lrt = lrt_forecast(t0, t0.output(), &y_t1, opts)?;
                Ok(ForecastCell {
                    lrt,
                    y_t: t0.output().clone(),
                    y_t1,
                    y_t2,
                })
            })();
            (key, r)
        })
        .collect();
    collect_ordered(results)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctuationOptions {
    /// Year whose susceptibility and outputs drive the prediction; defaults
    /// to each country's first year.
    pub base_year: Option<i32>,
    pub horizon: Horizon,
    pub measure: ChangeMeasure,
}

impl Default for FluctuationOptions {
    fn default() -> Self {
        Self {
            base_year: None,
            horizon: Horizon::Infinite,
            measure: ChangeMeasure::Signed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationRow {
    pub country: String,
    pub sector: String,
    pub point: FluctuationPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationAnalysis {
    pub rows: Vec<FluctuationRow>,
    pub regression: FluctuationRegression,
}

/// Predicted `Σ_i ρ_ki(t0) Y_i(t0)` against the observed average yearly
/// change of every (country, sector), pooled into one regression.
pub fn fluctuation_analysis(panel: &Panel, opts: &FluctuationOptions) -> Result<FluctuationAnalysis> {
    let sectors = panel_sectors(panel)?;
    let countries = panel.countries();
    let per_country: Vec<(CellKey, Result<Vec<FluctuationRow>>)> = countries
        .par_iter()
        .map(|c| {
            let years = panel.years(c);
            let base = opts.base_year.unwrap_or(years[0]);
            let r = (|| {
                let table = panel.get(c, base)?;
                let rho = susceptibility_analytic(table, opts.horizon)?;
                let predicted = fluctuation_prediction(&rho.values, table.output())?;
                let series: Vec<DVector<f64>> = years
                    .iter()
                    .filter(|y| **y >= base)
                    .map(|y| panel.get(c, *y).map(|t| t.output().clone()))
                    .collect::<Result<_>>()?;
                let observed = average_change(&series, opts.measure)?;
                Ok(sectors
                    .iter()
                    .enumerate()
                    .map(|(k, s)| FluctuationRow {
                        country: c.clone(),
                        sector: s.clone(),
                        point: FluctuationPoint {
                            predicted: predicted[k],
                            observed: observed[k],
                            own_output: table.output()[k],
                        },
                    })
                    .collect())
            })();
            ((c.clone(), base), r)
        })
        .collect();
    let rows: Vec<FluctuationRow> = collect_ordered(per_country)?.into_values().flatten().collect();
    let points: Vec<FluctuationPoint> = rows.iter().map(|r| r.point).collect();
    let regression = fluctuation_regression(&points)?;
    Ok(FluctuationAnalysis { rows, regression })
}

/// ARIMA calibration window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Calibration {
    /// Data up to and including `t + 1`.
    Expanding,
    /// The whole series, in-sample.
    FullSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Baseline {
    Arima { order: ArimaOrder, calibration: Calibration },
    Var,
    PerturbedIo,
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Baseline::Arima { order, calibration } => write!(
                f,
                "arima{}{}{}_{}",
                order.p,
                order.d,
                order.q,
                match calibration {
                    Calibration::Expanding => "expanding",
                    Calibration::FullSample => "full",
                }
            ),
            Baseline::Var => f.write_str("var1"),
            Baseline::PerturbedIo => f.write_str("perturbed_io"),
        }
    }
}

impl FromStr for Baseline {
    type Err = Error;

    /// `var1`, `perturbed_io`, or `arimaPDQ_expanding` / `arimaPDQ_full`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("unknown baseline {s:?}"));
        match s {
            "var1" | "var" => return Ok(Baseline::Var),
            "perturbed_io" | "io" => return Ok(Baseline::PerturbedIo),
            _ => {}
        }
        let rest = s.strip_prefix("arima").ok_or_else(bad)?;
        let (digits, regime) = rest.split_once('_').ok_or_else(bad)?;
        let d: Vec<u8> = digits
            .chars()
            .map(|c| c.to_digit(10).map(|v| v as u8))
            .collect::<Option<_>>()
            .ok_or_else(bad)?;
        let [p, dd, q] = d.as_slice() else {
            return Err(bad());
        };
        let calibration = match regime {
            "expanding" => Calibration::Expanding,
            "full" => Calibration::FullSample,
            _ => return Err(bad()),
        };
        Ok(Baseline::Arima {
            order: ArimaOrder::new(*p, *dd, *q)?,
            calibration,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub baselines: Vec<Baseline>,
    pub target: Target,
    pub implied: ImpliedShockOptions,
    pub constant: ConstantTerm,
    pub noise: NoiseSpec,
    pub var_samples: usize,
    /// Year of the table each country's VAR is calibrated on; defaults to
    /// the country's first year.
    pub var_calibration_year: Option<i32>,
    pub var_simulation: VarSimulation,
    pub seed: u64,
    /// Replace LRT predictions by the observations (harness check).
    pub oracle_lrt: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            baselines: vec![
                Baseline::Arima {
                    order: ArimaOrder { p: 1, d: 1, q: 1 },
                    calibration: Calibration::Expanding,
                },
                Baseline::Arima {
                    order: ArimaOrder { p: 1, d: 1, q: 1 },
                    calibration: Calibration::FullSample,
                },
                Baseline::Var,
                Baseline::PerturbedIo,
            ],
            target: Target::Changes,
            implied: ImpliedShockOptions::default(),
            constant: ConstantTerm::Auto,
            noise: NoiseSpec::default(),
            var_samples: 10_000,
            var_calibration_year: None,
            var_simulation: VarSimulation::default(),
            seed: 0,
            oracle_lrt: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineReport {
    pub baseline: Baseline,
    pub predictions: BTreeMap<CellKey, Prediction>,
    pub evaluation: ForecastEvaluation,
    /// Sectors whose ARIMA fit did not converge and fell back to the last
    /// observation: (country, year, sector).
    pub fallbacks: Vec<(String, i32, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub forecasts: BTreeMap<CellKey, ForecastCell>,
    pub lrt: BTreeMap<CellKey, Prediction>,
    pub baselines: Vec<BaselineReport>,
}

fn output_series(panel: &Panel, country: &str, last: i32) -> Result<Vec<DVector<f64>>> {
    panel
        .years(country)
        .into_iter()
        .filter(|y| *y <= last)
        .map(|y| panel.get(country, y).map(|t| t.output().clone()))
        .collect()
}

enum ArimaOutcome {
    Forecast(f64),
    Fallback(f64),
    TooShort,
}

fn arima_two_step(fit_on: &[f64], history: &[f64], order: ArimaOrder, constant: ConstantTerm) -> Result<ArimaOutcome> {
    match fit_arima(fit_on, order, constant) {
        Ok(model) => match arima_forecast(&model, history, 2) {
            Ok(f) => Ok(ArimaOutcome::Forecast(f[1])),
            Err(Error::TooShortSeries { .. }) => Ok(ArimaOutcome::TooShort),
            Err(e) => Err(e),
        },
        Err(Error::TooShortSeries { .. }) => Ok(ArimaOutcome::TooShort),
        Err(Error::NonConvergent { .. }) => Ok(ArimaOutcome::Fallback(*history.last().unwrap())),
        Err(e) => Err(e),
    }
}

type ArimaCell = Option<(Prediction, Vec<String>)>;

fn arima_predictions(
    panel: &Panel,
    sectors: &[String],
    cells: &BTreeMap<CellKey, ForecastCell>,
    order: ArimaOrder,
    calibration: Calibration,
    constant: ConstantTerm,
) -> Result<(BTreeMap<CellKey, Prediction>, Vec<(String, i32, String)>)> {
    let keys: Vec<&CellKey> = cells.keys().collect();
    let results: Vec<(CellKey, Result<ArimaCell>)> = keys
        .par_iter()
        .map(|key| {
            let r = (|| {
                let (c, t) = (&key.0, key.1);
                let history = output_series(panel, c, t + 1)?;
                let full = match calibration {
                    Calibration::Expanding => None,
                    Calibration::FullSample => Some(output_series(panel, c, i32::MAX)?),
                };
                let mut predicted = DVector::zeros(sectors.len());
                let mut fallbacks = Vec::new();
                for k in 0..sectors.len() {
                    let h: Vec<f64> = history.iter().map(|y| y[k]).collect();
                    let fit_on: Vec<f64> = match &full {
                        Some(f) => f.iter().map(|y| y[k]).collect(),
                        None => h.clone(),
                    };
                    match arima_two_step(&fit_on, &h, order, constant)? {
                        ArimaOutcome::Forecast(v) => predicted[k] = v,
                        ArimaOutcome::Fallback(v) => {
                            log::warn!("{c} {t} {}: ARIMA fit did not converge, using last value", sectors[k]);
                            predicted[k] = v;
                            fallbacks.push(sectors[k].clone());
                        }
                        ArimaOutcome::TooShort => return Ok(None),
                    }
                }
                let cell = &cells[*key];
                Ok(Some((
                    Prediction {
                        anchor: cell.y_t1.clone(),
                        observed: cell.y_t2.clone(),
                        predicted,
                    },
                    fallbacks,
                )))
            })();
            ((*key).clone(), r)
        })
        .collect();
    let mut predictions = BTreeMap::new();
    let mut fallbacks = Vec::new();
    for (key, cell) in collect_ordered(results)? {
        if let Some((p, fb)) = cell {
            fallbacks.extend(fb.into_iter().map(|s| (key.0.clone(), key.1, s)));
            predictions.insert(key, p);
        } else {
            log::debug!("{} {}: series too short for ARIMA{order}", key.0, key.1);
        }
    }
    Ok((predictions, fallbacks))
}

fn var_predictions(
    panel: &Panel,
    cells: &BTreeMap<CellKey, ForecastCell>,
    config: &BenchmarkConfig,
) -> Result<BTreeMap<CellKey, Prediction>> {
    let countries: Vec<String> = cells.keys().map(|k| k.0.clone()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let models: Vec<(CellKey, Result<_>)> = countries
        .par_iter()
        .map(|c| {
            let year = config.var_calibration_year.unwrap_or_else(|| panel.years(c)[0]);
            let r = panel.get(c, year).and_then(|table| {
                let nu = config.noise.covariance(table)?;
                fit_var1(table, &nu, config.var_samples, config.seed, config.var_simulation)
            });
            ((c.clone(), year), r)
        })
        .collect();
    let models: BTreeMap<String, _> = collect_ordered(models)?.into_iter().map(|((c, _), m)| (c, m)).collect();
    let mut out = BTreeMap::new();
    for (key, cell) in cells {
        let (_, two) = var_forecast(&models[&key.0], &cell.y_t)?;
        out.insert(
            key.clone(),
            Prediction {
                anchor: cell.y_t1.clone(),
                observed: cell.y_t2.clone(),
                predicted: two,
            },
        );
    }
    Ok(out)
}

fn perturbed_io_predictions(
    panel: &Panel,
    cells: &BTreeMap<CellKey, ForecastCell>,
) -> Result<BTreeMap<CellKey, Prediction>> {
    let mut out = BTreeMap::new();
    for (key, cell) in cells {
        let table = panel.get(&key.0, key.1)?;
        let delta = perturbed_io_forecast(table, &cell.lrt.shock.x)?;
        out.insert(
            key.clone(),
            Prediction {
                anchor: cell.y_t1.clone(),
                observed: cell.y_t2.clone(),
                predicted: &cell.y_t + delta,
            },
        );
    }
    Ok(out)
}

/// LRT forecasts against every configured baseline on the cells both can
/// predict.
pub fn benchmark(panel: &Panel, config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    let sectors = panel_sectors(panel)?;
    let forecasts = panel_forecasts(panel, &config.implied)?;
    if forecasts.is_empty() {
        return Err(Error::InsufficientSamples { required: 1, got: 0 });
    }
    let lrt: BTreeMap<CellKey, Prediction> = forecasts
        .iter()
        .map(|(k, cell)| {
            let predicted = if config.oracle_lrt {
                cell.y_t2.clone()
            } else {
                cell.lrt.forecast.clone()
            };
            (
                k.clone(),
                Prediction {
                    anchor: cell.y_t1.clone(),
                    observed: cell.y_t2.clone(),
                    predicted,
                },
            )
        })
        .collect();

    let mut baselines = Vec::new();
    for baseline in &config.baselines {
        let (predictions, fallbacks) = match *baseline {
            Baseline::Arima { order, calibration } => {
                arima_predictions(panel, &sectors, &forecasts, order, calibration, config.constant)?
            }
            Baseline::Var => (var_predictions(panel, &forecasts, config)?, Vec::new()),
            Baseline::PerturbedIo => (perturbed_io_predictions(panel, &forecasts)?, Vec::new()),
        };
        let matched: BTreeMap<CellKey, Prediction> = lrt
            .iter()
            .filter(|(k, _)| predictions.contains_key(*k))
            .map(|(k, p)| (k.clone(), p.clone()))
            .collect();
        let evaluation = evaluate_forecasts(&matched, &predictions, config.target)?;
        baselines.push(BaselineReport {
            baseline: *baseline,
            predictions,
            evaluation,
            fallbacks,
        });
    }
    Ok(BenchmarkReport {
        forecasts,
        lrt,
        baselines,
    })
}
