//! First-order vector autoregression calibrated on simulated yearly outputs.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{self, ShockProfile, SimulationSpec};
use crate::error::{Error, Result};
use crate::iodata::IOTable;
use crate::rng::task_stream;
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    /// `Y(t+1) = intercept + ar·Y(t) + e`
    pub ar: DMatrix<f64>,
    pub intercept: DVector<f64>,
    /// Standard errors of the `ar` entries.
    pub ar_stderr: DMatrix<f64>,
    pub calibration_year: i32,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarSimulation {
    pub dt: f64,
    pub burn_in: f64,
}

impl Default for VarSimulation {
    fn default() -> Self {
        Self {
            dt: dynamics::DEFAULT_DT,
            burn_in: dynamics::DEFAULT_BURN_IN,
        }
    }
}

/// Simulate the unshocked economy for `samples` years, record yearly states
/// and fit each equation by ordinary least squares with intercept.
pub fn fit_var1(
    table: &IOTable,
    nu: &DMatrix<f64>,
    samples: usize,
    seed: u64,
    sim: VarSimulation,
) -> Result<VarModel> {
    let n = table.n();
    if samples < n + 2 {
        return Err(Error::InsufficientSamples {
            required: n + 2,
            got: samples,
        });
    }
    let per_year = (1.0 / sim.dt).round() as usize;
    if per_year == 0 || ((1.0 / sim.dt) - per_year as f64).abs() > 1e-9 * per_year as f64 {
        return Err(Error::InvalidArgument(format!(
            "dt = {} must divide one year",
            sim.dt
        )));
    }
    let spec = SimulationSpec {
        dt: sim.dt,
        horizon: samples as f64,
        burn_in: sim.burn_in,
        t_start: 0.0,
        seed,
        stream: task_stream("var", table.country(), table.year(), 0),
    };
    let mut yearly = Vec::with_capacity(samples + 1);
    let mut step = 0usize;
    dynamics::simulate_with(table, nu, &ShockProfile::None, &spec, |_, state| {
        if step % per_year == 0 {
            yearly.push(state.clone());
        }
        step += 1;
    })?;

    let pairs = yearly.len() - 1;
    let x_mean = yearly[..pairs].iter().fold(DVector::zeros(n), |a, y| a + y) / pairs as f64;
    let mut x = DMatrix::zeros(pairs, n);
    for (row, y) in yearly[..pairs].iter().enumerate() {
        x.set_row(row, &(y - &x_mean).transpose());
    }
    let mut ar = DMatrix::zeros(n, n);
    let mut ar_stderr = DMatrix::zeros(n, n);
    let mut intercept = DVector::zeros(n);
    for k in 0..n {
        let target = DVector::from_iterator(pairs, yearly[1..].iter().map(|y| y[k]));
        let fit = stats::ols(&x, &target, true)?;
        let coef = fit.coefficients.rows(1, n);
        ar.set_row(k, &coef.transpose());
        ar_stderr.set_row(k, &fit.standard_errors.rows(1, n).transpose());
        // undo the centering of the regressors
        intercept[k] = fit.coefficients[0] - coef.dot(&x_mean);
    }
    Ok(VarModel {
        ar,
        intercept,
        ar_stderr,
        calibration_year: table.year(),
        samples: pairs,
    })
}

/// Iterate the fitted map: returns the one- and two-step predictions from `y`.
pub fn var_forecast(model: &VarModel, y: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    if y.len() != model.ar.ncols() {
        return Err(Error::InvalidArgument(format!(
            "VAR has {} sectors, state has {}",
            model.ar.ncols(),
            y.len()
        )));
    }
    let one = &model.intercept + &model.ar * y;
    let two = &model.intercept + &model.ar * &one;
    Ok((one, two))
}
