//! Output responses to demand shocks, implied shocks and the two-year
//! linear-response forecaster.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dynamics::{self, ShockProfile, SimulationSpec};
use crate::error::{Error, Result};
use crate::iodata::IOTable;
use crate::linalg::{self, Factorized};
use crate::rng::task_stream;
use crate::stats;
use crate::susceptibility::{truncated_susceptibility, Horizon, MonteCarloSpec};

pub const DEFAULT_SPACING: f64 = 0.01;
pub const DEFAULT_HORIZON: f64 = 10.0;
pub const DEFAULT_RECOVERY_THRESHOLD: f64 = 0.05;
pub const DEFAULT_CONDITION_CAP: f64 = 1e12;

/// `0, h, 2h, …` up to the horizon.
pub fn uniform_grid(horizon: f64, spacing: f64) -> Result<Vec<f64>> {
    if !(spacing > 0.0 && spacing.is_finite() && horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "grid needs a positive spacing and nonnegative horizon, got {spacing} and {horizon}"
        )));
    }
    let steps = (horizon / spacing).round() as usize;
    Ok((0..=steps).map(|k| k as f64 * spacing).collect())
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    match grid.first() {
        None => Err(Error::InvalidArgument("response grid is empty".into())),
        Some(t) if *t != 0.0 => Err(Error::InvalidArgument(format!(
            "response grid must start at 0, starts at {t}"
        ))),
        _ if grid.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) => Err(
            Error::InvalidArgument("response grid must be strictly increasing".into()),
        ),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseCurve {
    pub grid: Vec<f64>,
    /// `⟨ΔY(t')⟩` at each grid time.
    pub values: Vec<DVector<f64>>,
    pub standard_errors: Option<Vec<DVector<f64>>>,
    pub shock: ShockProfile,
    pub provenance: Provenance,
    pub sectors: Vec<String>,
}

impl ResponseCurve {
    pub fn n(&self) -> usize {
        self.sectors.len()
    }

    /// `t_prime,sector,value[,stderr]`
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        match &self.standard_errors {
            Some(_) => writeln!(w, "t_prime,sector,value,stderr")?,
            None => writeln!(w, "t_prime,sector,value")?,
        }
        for (k, t) in self.grid.iter().enumerate() {
            for (i, code) in self.sectors.iter().enumerate() {
                write!(w, "{t:.16e},{code},{:.16e}", self.values[k][i])?;
                if let Some(se) = &self.standard_errors {
                    write!(w, ",{:.16e}", se[k][i])?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

fn sector_codes(table: &IOTable) -> Vec<String> {
    table.sectors().iter().map(|s| s.code.clone()).collect()
}

fn check_shock(table: &IOTable, x: &DVector<f64>) -> Result<()> {
    if x.len() != table.n() {
        return Err(Error::InvalidArgument(format!(
            "shock has {} entries, economy has {} sectors",
            x.len(),
            table.n()
        )));
    }
    Ok(())
}

/// `⟨ΔY(t')⟩ = exp((A − I)t')·X`
pub fn impulse_response(table: &IOTable, x: &DVector<f64>, grid: &[f64]) -> Result<ResponseCurve> {
    validate_grid(grid)?;
    check_shock(table, x)?;
    let m = table.drift();
    let values = grid
        .iter()
        .map(|t| {
            if *t == 0.0 {
                x.clone()
            } else {
                linalg::expm(&(&m * *t)) * x
            }
        })
        .collect();
    Ok(ResponseCurve {
        grid: grid.to_vec(),
        values,
        standard_errors: None,
        shock: ShockProfile::Impulse {
            x: x.clone(),
            t0: 0.0,
        },
        provenance: Provenance::Analytic,
        sectors: sector_codes(table),
    })
}

/// `⟨ΔY(t')⟩ = ρ(t')·X = (I − A)⁻¹(I − exp((A − I)t'))·X`
pub fn step_response(table: &IOTable, x: &DVector<f64>, grid: &[f64]) -> Result<ResponseCurve> {
    validate_grid(grid)?;
    check_shock(table, x)?;
    let values = grid
        .iter()
        .map(|t| {
            if *t == 0.0 {
                Ok(DVector::zeros(x.len()))
            } else {
                Ok(truncated_susceptibility(table.technical(), Horizon::Finite(*t))? * x)
            }
        })
        .collect::<Result<_>>()?;
    Ok(ResponseCurve {
        grid: grid.to_vec(),
        values,
        standard_errors: None,
        shock: ShockProfile::Step {
            x: x.clone(),
            t0: 0.0,
        },
        provenance: Provenance::Analytic,
        sectors: sector_codes(table),
    })
}

/// `⟨ΔY(t)⟩ = ∫ exp(M(t − τ))·X(τ) dτ` for a tabulated shock, by the
/// trapezoid rule on the shock's own grid. The running integral is carried
/// forward one shock interval at a time with the exact propagator, so each
/// interval costs two matrix-vector products.
pub fn general_response(
    table: &IOTable,
    shock: &ShockProfile,
    grid: &[f64],
) -> Result<ResponseCurve> {
    validate_grid(grid)?;
    let n = table.n();
    shock.validate(n)?;
    let (times, values) = match shock {
        ShockProfile::Tabulated { times, values } => (times, values),
        _ => {
            return Err(Error::InvalidArgument(
                "general response needs a tabulated shock".into(),
            ))
        }
    };
    let finest_response = grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let coarsest_shock = times
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0f64, f64::max);
    if coarsest_shock > finest_response * (1.0 + 1e-9) {
        return Err(Error::GridMismatch(format!(
            "shock grid spacing {coarsest_shock} is coarser than response spacing {finest_response}"
        )));
    }

    let m = table.drift();
    let propagator = |h: f64| linalg::expm(&(&m * h));
    let spacing = if times.len() > 1 {
        (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64
    } else {
        0.0
    };
    let uniform = times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - spacing).abs() <= 1e-9 * spacing);
    let uniform_step = uniform.then(|| propagator(spacing));

    let mut out = Vec::with_capacity(grid.len());
    let mut acc = DVector::zeros(n);
    let mut k = 0usize;
    for t in grid {
        if *t < times[0] {
            out.push(DVector::zeros(n));
            continue;
        }
        while k + 1 < times.len() && times[k + 1] <= *t {
            let h = times[k + 1] - times[k];
            let local;
            let e = match &uniform_step {
                Some(e) => e,
                None => {
                    local = propagator(h);
                    &local
                }
            };
            let carried = e * (&acc + &values[k] * (0.5 * h));
            acc = carried + &values[k + 1] * (0.5 * h);
            k += 1;
        }
        let delta = t - times[k];
        if delta == 0.0 {
            out.push(acc.clone());
            continue;
        }
        let e = propagator(delta);
        if k + 1 < times.len() {
            let x_t = shock.rate_at(*t).unwrap_or_else(|| DVector::zeros(n));
            out.push(e * (&acc + &values[k] * (0.5 * delta)) + x_t * (0.5 * delta));
        } else {
            // past the last tabulated time the shock is zero
            out.push(e * &acc);
        }
    }
    Ok(ResponseCurve {
        grid: grid.to_vec(),
        values: out,
        standard_errors: None,
        shock: shock.clone(),
        provenance: Provenance::Analytic,
        sectors: sector_codes(table),
    })
}

/// Impulse response as the replica average of simulated `Y(t') − Y⁰` after a
/// kick `X` applied in the step that ends at `t' = 0`. Grid times must be
/// multiples of `dt`.
pub fn impulse_response_monte_carlo(
    table: &IOTable,
    nu: &DMatrix<f64>,
    x: &DVector<f64>,
    grid: &[f64],
    spec: &MonteCarloSpec,
) -> Result<ResponseCurve> {
    validate_grid(grid)?;
    check_shock(table, x)?;
    if spec.replicas == 0 || (spec.standard_errors && spec.replicas < 2) {
        return Err(Error::InsufficientSamples {
            required: if spec.standard_errors { 2 } else { 1 },
            got: spec.replicas,
        });
    }
    if spec.burn_in < spec.dt {
        return Err(Error::InvalidArgument(
            "Monte Carlo impulse responses need a burn-in of at least one step".into(),
        ));
    }
    let steps: Vec<usize> = grid
        .iter()
        .map(|t| {
            let k = (t / spec.dt).round();
            if (t / spec.dt - k).abs() > 1e-6 {
                Err(Error::GridMismatch(format!(
                    "grid time {t} is not a multiple of dt = {}",
                    spec.dt
                )))
            } else {
                Ok(k as usize)
            }
        })
        .collect::<Result<_>>()?;
    let horizon = *grid.last().unwrap();
    let y0 = dynamics::equilibrium_output(table.technical(), table.demand())?;
    let shock = ShockProfile::Impulse {
        x: x.clone(),
        t0: -0.5 * spec.dt,
    };

    let replicas: Vec<Vec<DVector<f64>>> = (0..spec.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let sim = SimulationSpec {
                dt: spec.dt,
                horizon: horizon.max(spec.dt),
                burn_in: spec.burn_in,
                t_start: 0.0,
                seed: spec.seed,
                stream: task_stream("impulse", table.country(), table.year(), r),
            };
            let mut recorded = Vec::with_capacity(grid.len());
            let mut next = 0usize;
            dynamics::simulate_with(table, nu, &shock, &sim, |t, state| {
                let k = (t / spec.dt).round() as usize;
                if next < steps.len() && k == steps[next] && t > -0.5 * spec.dt {
                    recorded.push(state - &y0);
                    next += 1;
                }
            })?;
            Ok(recorded)
        })
        .collect::<Result<_>>()?;

    let r = replicas.len() as f64;
    let n = table.n();
    let mean: Vec<DVector<f64>> = (0..grid.len())
        .map(|k| replicas.iter().fold(DVector::zeros(n), |a, rep| a + &rep[k]) / r)
        .collect();
    let standard_errors = spec.standard_errors.then(|| {
        (0..grid.len())
            .map(|k| {
                let ss = replicas.iter().fold(DVector::zeros(n), |a: DVector<f64>, rep| {
                    a + (&rep[k] - &mean[k]).map(|v| v * v)
                });
                (ss / (r - 1.0)).map(|v| (v / r).sqrt())
            })
            .collect()
    });
    Ok(ResponseCurve {
        grid: grid.to_vec(),
        values: mean,
        standard_errors,
        shock: ShockProfile::Impulse {
            x: x.clone(),
            t0: 0.0,
        },
        provenance: Provenance::MonteCarlo,
        sectors: sector_codes(table),
    })
}

/// Per sector, the first grid time after which `|ΔY_k|` stays within
/// `ε·|X_k|` (or `ε·‖X‖∞` when `X_k = 0`) to the end of the grid.
/// `f64::INFINITY` when the last grid point is still outside the band.
pub fn recovery_time(curve: &ResponseCurve, epsilon: f64) -> Vec<f64> {
    let n = curve.n();
    let magnitude = curve.shock.magnitude(n);
    let largest = magnitude.amax();
    (0..n)
        .map(|k| {
            let reference = if magnitude[k] > 0.0 {
                magnitude[k]
            } else {
                largest
            };
            let band = epsilon * reference * (1.0 + 1e-12);
            let mut recovered = None;
            for (j, v) in curve.values.iter().enumerate().rev() {
                if v[k].abs() <= band {
                    recovered = Some(j);
                } else {
                    break;
                }
            }
            recovered.map_or(f64::INFINITY, |j| curve.grid[j])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpliedShockOptions {
    pub condition_cap: f64,
    /// Tikhonov ridge as a fraction of the largest singular value of `ρ(t, 1)`,
    /// used only when the direct solve is ill-conditioned.
    pub ridge: Option<f64>,
}

impl Default for ImpliedShockOptions {
    fn default() -> Self {
        Self {
            condition_cap: DEFAULT_CONDITION_CAP,
            ridge: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpliedShock {
    pub year: i32,
    pub x: DVector<f64>,
    pub horizon: f64,
    /// 1-norm condition number of `ρ(t, 1)`.
    pub condition: f64,
    /// Absolute ridge parameter when the regularised fallback was used.
    pub ridge_lambda: Option<f64>,
}

fn check_outputs(table: &IOTable, y_t: &DVector<f64>, y_t1: &DVector<f64>) -> Result<()> {
    if y_t.len() != table.n() || y_t1.len() != table.n() {
        return Err(Error::InvalidArgument(format!(
            "output vectors have {} and {} entries, economy has {} sectors",
            y_t.len(),
            y_t1.len(),
            table.n()
        )));
    }
    Ok(())
}

fn solve_implied(
    rho1: &DMatrix<f64>,
    delta: &DVector<f64>,
    opts: &ImpliedShockOptions,
) -> Result<(DVector<f64>, f64, Option<f64>)> {
    match Factorized::with_cap(rho1, opts.condition_cap) {
        Ok(lu) => {
            let mut x = lu.solve_vec(delta);
            // one step of iterative refinement
            let residual = delta - rho1 * &x;
            x += lu.solve_vec(&residual);
            Ok((x, lu.condition(), None))
        }
        Err(Error::SingularSystem { condition }) => match opts.ridge {
            Some(ridge) if ridge > 0.0 => {
                let sigma_max = rho1.clone().singular_values().max();
                let lambda = ridge * sigma_max;
                let n = rho1.nrows();
                let normal = rho1.transpose() * rho1 + DMatrix::identity(n, n) * lambda * lambda;
                let x = Factorized::new(&normal)?.solve_vec(&(rho1.transpose() * delta));
                Ok((x, condition, Some(lambda)))
            }
            _ => Err(Error::IllConditioned {
                condition,
                cap: opts.condition_cap,
            }),
        },
        Err(e) => Err(e),
    }
}

/// `X̃ = ρ(t, 1)⁻¹ (Y(t+1) − Y(t))` by LU solve.
pub fn implied_shock(
    table: &IOTable,
    y_t: &DVector<f64>,
    y_t1: &DVector<f64>,
    opts: &ImpliedShockOptions,
) -> Result<ImpliedShock> {
    check_outputs(table, y_t, y_t1)?;
    let rho1 = truncated_susceptibility(table.technical(), Horizon::Finite(1.0))?;
    let (x, condition, ridge_lambda) = solve_implied(&rho1, &(y_t1 - y_t), opts)?;
    Ok(ImpliedShock {
        year: table.year(),
        x,
        horizon: 1.0,
        condition,
        ridge_lambda,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrtForecast {
    pub shock: ImpliedShock,
    /// `Y(t) + ρ(t, 1)·X̃`, which reproduces `Y(t+1)`.
    pub intermediate: DVector<f64>,
    /// `Y(t) + ρ(t, 2)·X̃`
    pub forecast: DVector<f64>,
}

pub fn lrt_forecast(
    table: &IOTable,
    y_t: &DVector<f64>,
    y_t1: &DVector<f64>,
    opts: &ImpliedShockOptions,
) -> Result<LrtForecast> {
    let shock = implied_shock(table, y_t, y_t1, opts)?;
    let rho1 = truncated_susceptibility(table.technical(), Horizon::Finite(1.0))?;
    let rho2 = truncated_susceptibility(table.technical(), Horizon::Finite(2.0))?;
    Ok(LrtForecast {
        intermediate: y_t + rho1 * &shock.x,
        forecast: y_t + rho2 * &shock.x,
        shock,
    })
}

/// `Σ_i ρ_ki Y_i(t0)` per sector; the prefactor η is left to the regression.
pub fn fluctuation_prediction(rho: &DMatrix<f64>, output: &DVector<f64>) -> Result<DVector<f64>> {
    if rho.ncols() != output.len() {
        return Err(Error::InvalidArgument(format!(
            "susceptibility has {} columns, output has {} entries",
            rho.ncols(),
            output.len()
        )));
    }
    Ok(rho * output)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChangeMeasure {
    /// Mean of `Y(t+1) − Y(t)`
    #[default]
    Signed,
    /// Mean of `|Y(t+1) − Y(t)|`
    Absolute,
}

/// Time-averaged yearly output change over consecutive states.
pub fn average_change(series: &[DVector<f64>], measure: ChangeMeasure) -> Result<DVector<f64>> {
    if series.len() < 2 {
        return Err(Error::TooShortSeries {
            len: series.len(),
            required: 2,
        });
    }
    let n = series[0].len();
    let diffs = series.windows(2).map(|w| {
        let d = &w[1] - &w[0];
        match measure {
            ChangeMeasure::Signed => d,
            ChangeMeasure::Absolute => d.abs(),
        }
    });
    Ok(diffs.fold(DVector::zeros(n), |a, d| a + d) / (series.len() - 1) as f64)
}

/// One (country, sector) point of the fluctuation regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctuationPoint {
    pub predicted: f64,
    pub observed: f64,
    pub own_output: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctuationRegression {
    pub n: usize,
    /// Pearson r between prediction and observed mean change.
    pub r: f64,
    /// Fitted slope η of observed on predicted, with intercept.
    pub eta: f64,
    pub intercept: f64,
    /// Pearson r between own output `Y_k(t0)` and observed mean change.
    pub output_only_r: f64,
    /// Multiple correlation of observed on prediction and own output jointly.
    pub joint_r: f64,
    pub own_output_coefficient: f64,
    pub own_output_stderr: f64,
}

pub fn fluctuation_regression(points: &[FluctuationPoint]) -> Result<FluctuationRegression> {
    let pred: Vec<f64> = points.iter().map(|p| p.predicted).collect();
    let obs: Vec<f64> = points.iter().map(|p| p.observed).collect();
    let own: Vec<f64> = points.iter().map(|p| p.own_output).collect();
    let r = stats::pearson_r(&pred, &obs)?;
    let output_only_r = stats::pearson_r(&own, &obs)?;
    let y = DVector::from_vec(obs);
    let single = stats::ols(&DMatrix::from_column_slice(points.len(), 1, &pred), &y, true)?;
    let mut both = DMatrix::zeros(points.len(), 2);
    both.set_column(0, &DVector::from_vec(pred));
    both.set_column(1, &DVector::from_vec(own));
    let joint = stats::ols(&both, &y, true)?;
    Ok(FluctuationRegression {
        n: points.len(),
        r,
        eta: single.coefficients[1],
        intercept: single.coefficients[0],
        output_only_r,
        joint_r: joint.r_squared.max(0.0).sqrt(),
        own_output_coefficient: joint.coefficients[2],
        own_output_stderr: joint.standard_errors[2],
    })
}
