//! Econometric baselines and the forecast evaluation harness.

pub mod arima;
pub mod evaluate;
mod optimize;
pub mod var;

use nalgebra::DVector;

pub use arima::{arima_forecast, fit_arima, ArimaModel, ArimaOrder, ConstantTerm};
pub use evaluate::{evaluate_forecasts, CellScore, ForecastEvaluation, Prediction, Target};
pub use optimize::{nelder_mead, Minimum, Tolerances};
pub use var::{fit_var1, var_forecast, VarModel, VarSimulation};

pub use crate::stats::pearson_r;

use crate::error::Result;
use crate::iodata::IOTable;
use crate::linalg::Factorized;

/// Perturbed-equilibrium change `ΔY = (I − A)⁻¹ X̃`.
pub fn perturbed_io_forecast(table: &IOTable, shock: &DVector<f64>) -> Result<DVector<f64>> {
    if shock.len() != table.n() {
        return Err(crate::Error::InvalidArgument(format!(
            "shock has {} entries, economy has {} sectors",
            shock.len(),
            table.n()
        )));
    }
    Ok(Factorized::new(&table.leontief())?.solve_vec(shock))
}
