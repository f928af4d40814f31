//! Random productive panels with the layout of a multi-regional table.
//!
//! Each country starts from a random productive technology. Every year the
//! coefficients drift a little and the economy receives a random step demand
//! shock, so `Y(t+1) = Y(t) + ρ(t, 1)·X(t)`. Final demand is split between the
//! home country and exports to the other panel countries.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::equilibrium_output;
use crate::error::{Error, Result};
use crate::iodata::{IOTable, Panel, WIOD_SECTORS};
use crate::rng::{task_stream, NormalStream};
use crate::susceptibility::{truncated_susceptibility, Horizon};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPanelSpec {
    pub countries: Vec<String>,
    pub first_year: i32,
    pub last_year: i32,
    /// Number of sectors, taken from the start of the WIOD list.
    pub sectors: usize,
    /// Probability that an off-diagonal coefficient is nonzero.
    pub density: f64,
    /// Standard deviation of yearly shocks relative to final demand.
    pub shock_scale: f64,
    /// Mean yearly demand growth applied through the shocks.
    pub growth: f64,
    /// Log-scale standard deviation of the yearly coefficient drift.
    pub drift: f64,
    pub seed: u64,
}

impl Default for SyntheticPanelSpec {
    fn default() -> Self {
        Self {
            countries: ["AUT", "DEU", "FRA", "ITA", "USA"].map(String::from).to_vec(),
            first_year: 2000,
            last_year: 2014,
            sectors: 10,
            density: 0.5,
            shock_scale: 0.03,
            growth: 0.02,
            drift: 0.02,
            seed: 0,
        }
    }
}

fn bounded_columns(a: &mut DMatrix<f64>, cap: f64) {
    for mut col in a.column_iter_mut() {
        let s = col.sum();
        if s > cap {
            col.scale_mut(cap / s);
        }
    }
}

fn initial_technology(n: usize, density: f64, rng: &mut NormalStream) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let present = if i == j { rng.uniform() < 0.5 } else { rng.uniform() < density };
            if present {
                a[(i, j)] = rng.uniform();
            }
        }
        let s: f64 = a.column(j).sum();
        if s > 0.0 {
            let target = 0.2 + 0.4 * rng.uniform();
            a.column_mut(j).scale_mut(target / s);
        }
    }
    a
}

pub fn synthetic_panel(spec: &SyntheticPanelSpec) -> Result<Panel> {
    let n = spec.sectors;
    if n == 0 || n > WIOD_SECTORS.len() {
        return Err(Error::InvalidArgument(format!(
            "sector count must be between 1 and {}",
            WIOD_SECTORS.len()
        )));
    }
    if spec.countries.is_empty() || spec.last_year < spec.first_year {
        return Err(Error::InvalidArgument("empty country list or year range".into()));
    }
    if !(0.0..=1.0).contains(&spec.density) {
        return Err(Error::InvalidArgument(format!("density {} outside [0, 1]", spec.density)));
    }
    let codes: Vec<String> = WIOD_SECTORS[..n].iter().map(|s| s.0.to_string()).collect();
    let mut panel = Panel::new();
    for country in &spec.countries {
        let mut rng = NormalStream::new(spec.seed, task_stream("synthetic", country, 0, 0));
        let destinations: Vec<String> = spec.countries.iter().filter(|c| *c != country).cloned().collect();
        let mut a = initial_technology(n, spec.density, &mut rng);
        let d0 = DVector::from_fn(n, |_, _| 100.0 * rng.standard_normal().exp());
        let mut y = equilibrium_output(&a, &d0)?;
        let export_share = DVector::from_fn(n, |_, _| 0.1 + 0.3 * rng.uniform());
        let dest_weights = DMatrix::from_fn(n, destinations.len(), |_, _| rng.uniform());

        for year in spec.first_year..=spec.last_year {
            if year > spec.first_year {
                a = a.map(|v| v * (spec.drift * rng.standard_normal()).exp());
                bounded_columns(&mut a, 0.9);
            }
            let demand = (DMatrix::identity(n, n) - &a) * &y;
            let mut flows = a.clone();
            for j in 0..n {
                flows.column_mut(j).scale_mut(y[j]);
            }
            let mut exports = DMatrix::zeros(n, destinations.len());
            let mut domestic = demand.clone();
            if !destinations.is_empty() {
                for i in 0..n {
                    let total = export_share[i] * demand[i].max(0.0);
                    let w = dest_weights.row(i);
                    let wsum = w.sum();
                    for k in 0..destinations.len() {
                        exports[(i, k)] = total * w[k] / wsum;
                    }
                    domestic[i] -= total;
                }
            }
            panel.insert(IOTable::from_flows(
                country,
                year,
                &codes,
                flows,
                y.clone(),
                domestic,
                destinations.clone(),
                exports,
            )?);

            let shock = DVector::from_fn(n, |i, _| {
                demand[i].abs() * (spec.growth + spec.shock_scale * rng.standard_normal())
            });
            let rho1 = truncated_susceptibility(&a, Horizon::Finite(1.0))?;
            let next = &y + rho1 * shock;
            y = next.zip_map(&y, |new, old| new.max(1e-3 * old));
        }
    }
    Ok(panel)
}
