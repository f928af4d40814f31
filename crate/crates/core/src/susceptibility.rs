//! Economic susceptibility: the stationary output change per unit step demand
//! shock, `ρ(T) = ∫₀ᵀ C(τ) σ⁻¹ dτ` with centered lagged covariances `C`.
//!
//! The analytic path evaluates the closed form `(I − A)⁻¹(I − exp((A − I)T))`.
//! The Monte Carlo path estimates `C` and `σ` from simulated unshocked
//! trajectories and integrates over the lag grid by the trapezoid rule.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::iodata::IOTable;
use crate::linalg::{self, Factorized};
use crate::rng::task_stream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

impl Horizon {
    pub fn validate(self) -> Result<Self> {
        match self {
            Horizon::Finite(t) if !(t > 0.0 && t.is_finite()) => Err(Error::InvalidArgument(
                format!("susceptibility horizon must be positive, got {t}"),
            )),
            h => Ok(h),
        }
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Finite(t) => write!(f, "{t}"),
            Horizon::Infinite => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Horizon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if matches!(s.to_ascii_lowercase().as_str(), "inf" | "infinity" | "∞") {
            return Ok(Horizon::Infinite);
        }
        let t: f64 = s
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("invalid horizon {s:?}")))?;
        Horizon::Finite(t).validate()
    }
}

/// Simulation budget for the Monte Carlo estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSpec {
    pub dt: f64,
    /// Recorded years per replica, after burn-in.
    pub length: f64,
    pub burn_in: f64,
    pub replicas: usize,
    pub seed: u64,
    pub standard_errors: bool,
}

impl Default for MonteCarloSpec {
    fn default() -> Self {
        Self {
            dt: crate::dynamics::DEFAULT_DT,
            length: 10_000.0,
            burn_in: crate::dynamics::DEFAULT_BURN_IN,
            replicas: 4,
            seed: 0,
            standard_errors: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Analytic,
    MonteCarlo(MonteCarloSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SusceptibilityMatrix {
    pub values: DMatrix<f64>,
    pub country: String,
    pub year: i32,
    pub sectors: Vec<String>,
    pub horizon: Horizon,
    pub method: Method,
    pub standard_errors: Option<DMatrix<f64>>,
}

impl SusceptibilityMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// `row_sector,col_sector,value[,stderr]`, one row per entry.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        match &self.standard_errors {
            Some(_) => writeln!(w, "row_sector,col_sector,value,stderr")?,
            None => writeln!(w, "row_sector,col_sector,value")?,
        }
        for (k, row) in self.sectors.iter().enumerate() {
            for (i, col) in self.sectors.iter().enumerate() {
                write!(w, "{row},{col},{:.16e}", self.values[(k, i)])?;
                if let Some(se) = &self.standard_errors {
                    write!(w, ",{:.16e}", se[(k, i)])?;
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

/// `ρ(T) = (I − A)⁻¹(I − exp((A − I)T))` for a technical-coefficient matrix.
pub fn truncated_susceptibility(a: &DMatrix<f64>, horizon: Horizon) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let lu = Factorized::new(&(&id - a))?;
    match horizon.validate()? {
        Horizon::Infinite => Ok(lu.solve_mat(&id)),
        Horizon::Finite(t) => {
            let decay = linalg::expm(&((a - &id) * t));
            Ok(lu.solve_mat(&(id - decay)))
        }
    }
}

pub fn susceptibility_analytic(table: &IOTable, horizon: Horizon) -> Result<SusceptibilityMatrix> {
    Ok(SusceptibilityMatrix {
        values: truncated_susceptibility(table.technical(), horizon)?,
        country: table.country().to_string(),
        year: table.year(),
        sectors: sector_codes(table),
        horizon,
        method: Method::Analytic,
        standard_errors: None,
    })
}

/// Running sums for the lag-integrated covariance `Ĝ = Σ_l w_l Ĉ(l·dt)` of
/// one trajectory, without storing it.
///
/// With `W_s = Σ_l w_l y_{s+l}` (trapezoid weights over `L + 1` lags) every
/// lag uses the same `P = S − L` pairs, so `Ĝ = P⁻¹ Σ_s (W_s − T ȳ)(y_s − ȳ)ᵀ`,
/// which expands into uncentered sums centered afterwards with the sample mean.
struct LagIntegrator {
    n: usize,
    lags: usize,
    dt: f64,
    ring: Vec<DVector<f64>>,
    window: DVector<f64>,
    filled: usize,
    since_refresh: usize,
    pairs: usize,
    count: usize,
    sum: DVector<f64>,
    sum_outer: DMatrix<f64>,
    sum_paired: DVector<f64>,
    sum_weighted: DVector<f64>,
    cross: DMatrix<f64>,
    w: DVector<f64>,
}

impl LagIntegrator {
    fn new(n: usize, lags: usize, dt: f64) -> Self {
        Self {
            n,
            lags,
            dt,
            ring: vec![DVector::zeros(n); lags + 1],
            window: DVector::zeros(n),
            filled: 0,
            since_refresh: 0,
            pairs: 0,
            count: 0,
            sum: DVector::zeros(n),
            sum_outer: DMatrix::zeros(n, n),
            sum_paired: DVector::zeros(n),
            sum_weighted: DVector::zeros(n),
            cross: DMatrix::zeros(n, n),
            w: DVector::zeros(n),
        }
    }

    fn push(&mut self, y: &DVector<f64>) {
        self.count += 1;
        self.sum += y;
        self.sum_outer.ger(1.0, y, y, 1.0);

        let len = self.lags + 1;
        let slot = self.filled % len;
        if self.filled >= len {
            self.window -= &self.ring[slot];
        }
        self.ring[slot].copy_from(y);
        self.window += y;
        self.filled += 1;
        self.since_refresh += 1;
        if self.since_refresh >= len.max(1024) {
            // bound the drift of the sliding sum
            self.window.fill(0.0);
            for v in &self.ring[..self.filled.min(len)] {
                self.window += v;
            }
            self.since_refresh = 0;
        }
        if self.filled < len {
            return;
        }
        // window now holds y_s ..= y_{s+L} with s the oldest entry
        let oldest = &self.ring[self.filled % len];
        if self.lags == 0 {
            // a single lag integrates over an empty range
            self.w.fill(0.0);
        } else {
            self.w.copy_from(&self.window);
            self.w.axpy(-0.5, oldest, 1.0);
            self.w.axpy(-0.5, y, 1.0);
            self.w *= self.dt;
        }
        self.cross.ger(1.0, &self.w, oldest, 1.0);
        self.sum_weighted += &self.w;
        self.sum_paired += oldest;
        self.pairs += 1;
    }

    /// `(σ̂, Ĝ)` centered with the full-sample mean.
    fn finish(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if self.pairs == 0 || self.count < 2 {
            return Err(Error::InsufficientSamples {
                required: self.lags + 2,
                got: self.count,
            });
        }
        let s = self.count as f64;
        let p = self.pairs as f64;
        let mean = &self.sum / s;
        let sigma = &self.sum_outer / s - &mean * mean.transpose();
        let total_weight = self.lags as f64 * self.dt;
        let g = (&self.cross
            - &self.sum_weighted * mean.transpose()
            - (&mean * self.sum_paired.transpose()) * total_weight)
            / p
            + (&mean * mean.transpose()) * total_weight;
        debug_assert_eq!(sigma.nrows(), self.n);
        Ok((linalg::symmetrize(&sigma), g))
    }
}

/// Green–Kubo estimate `Ĝ σ̂⁻¹` from one unshocked trajectory.
fn replica_estimate(
    table: &IOTable,
    nu: &DMatrix<f64>,
    t: f64,
    spec: &MonteCarloSpec,
    stream: u64,
) -> Result<DMatrix<f64>> {
    let n = table.n();
    let lags = (t / spec.dt).round() as usize;
    let mut acc = LagIntegrator::new(n, lags, spec.dt);
    let sim = crate::dynamics::SimulationSpec {
        dt: spec.dt,
        horizon: spec.length,
        burn_in: spec.burn_in,
        t_start: 0.0,
        seed: spec.seed,
        stream,
    };
    let y0 = crate::dynamics::equilibrium_output(table.technical(), table.demand())?;
    let mut dev = DVector::zeros(n);
    crate::dynamics::simulate_with(
        table,
        nu,
        &crate::dynamics::ShockProfile::None,
        &sim,
        |_, state| {
            dev.copy_from(state);
            dev -= &y0;
            acc.push(&dev);
        },
    )?;
    let (sigma, g) = acc.finish()?;
    // ρ̂ σ̂ = Ĝ with σ̂ symmetric
    let lu = Factorized::new(&sigma)?;
    Ok(lu.solve_mat(&g.transpose()).transpose())
}

pub fn susceptibility_monte_carlo(
    table: &IOTable,
    nu: &DMatrix<f64>,
    t: f64,
    spec: &MonteCarloSpec,
) -> Result<SusceptibilityMatrix> {
    let horizon = Horizon::Finite(t).validate()?;
    if spec.replicas == 0 || (spec.standard_errors && spec.replicas < 2) {
        return Err(Error::InsufficientSamples {
            required: if spec.standard_errors { 2 } else { 1 },
            got: spec.replicas,
        });
    }
    if !(spec.length > t) {
        return Err(Error::InvalidArgument(format!(
            "trajectory length {} must exceed the horizon {t}",
            spec.length
        )));
    }
    if nu.iter().all(|v| *v == 0.0) {
        return Err(Error::InvalidArgument(
            "Monte Carlo estimation needs nonzero noise".into(),
        ));
    }
    let estimates: Vec<DMatrix<f64>> = (0..spec.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let stream = task_stream("susceptibility", table.country(), table.year(), r);
            replica_estimate(table, nu, t, spec, stream)
        })
        .collect::<Result<_>>()?;

    let r = estimates.len() as f64;
    let n = table.n();
    let mean = estimates.iter().fold(DMatrix::zeros(n, n), |acc, e| acc + e) / r;
    let standard_errors = spec.standard_errors.then(|| {
        let ss = estimates
            .iter()
            .fold(DMatrix::zeros(n, n), |acc: DMatrix<f64>, e| {
                acc + (e - &mean).map(|v| v * v)
            });
        (ss / (r - 1.0)).map(|v| (v / r).sqrt())
    });
    Ok(SusceptibilityMatrix {
        values: mean,
        country: table.country().to_string(),
        year: table.year(),
        sectors: sector_codes(table),
        horizon,
        method: Method::MonteCarlo(spec.clone()),
        standard_errors,
    })
}

/// Which index [`sector_susceptibility`] sums over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SumConvention {
    /// `s_i = Σ_j ρ_ij`
    #[default]
    SecondIndex,
    /// `s_i = Σ_j ρ_ji`
    FirstIndex,
}

pub fn sector_susceptibility(rho: &SusceptibilityMatrix, convention: SumConvention) -> DVector<f64> {
    sum_susceptibility(&rho.values, convention)
}

pub fn sum_susceptibility(values: &DMatrix<f64>, convention: SumConvention) -> DVector<f64> {
    let n = values.nrows();
    DVector::from_iterator(
        n,
        (0..n).map(|i| match convention {
            SumConvention::SecondIndex => linalg::compensated_sum(values.row(i).iter().copied()),
            SumConvention::FirstIndex => linalg::compensated_sum(values.column(i).iter().copied()),
        }),
    )
}

/// One (country, year) cell: sector susceptibilities and gross outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorCell {
    pub susceptibility: DVector<f64>,
    pub output: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedSusceptibility {
    pub rho: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SusceptibilityAggregates {
    pub sectors: Vec<String>,
    /// `ρ_i^c(t)` per cell.
    pub sector: BTreeMap<(String, i32), DVector<f64>>,
    /// `ρ^c`, the mean over sectors and years.
    pub country_average: BTreeMap<String, f64>,
    /// Output-weighted `ρ_i` over all cells with a normal-approximation 95% interval.
    pub weighted_sector: Vec<WeightedSusceptibility>,
}

const Z95: f64 = 1.959_963_984_540_054;

pub fn aggregate_susceptibilities(
    sectors: &[String],
    cells: &BTreeMap<(String, i32), SectorCell>,
    countries: &[String],
    years: &[i32],
) -> Result<SusceptibilityAggregates> {
    let missing: Vec<(String, i32)> = countries
        .iter()
        .flat_map(|c| years.iter().map(move |y| (c.clone(), *y)))
        .filter(|key| !cells.contains_key(key))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingPanelCell { cells: missing });
    }
    if countries.is_empty() || years.is_empty() {
        return Err(Error::InvalidArgument("aggregation needs at least one cell".into()));
    }
    let n = sectors.len();
    let mut selected = Vec::new();
    for c in countries {
        for y in years {
            let cell = &cells[&(c.clone(), *y)];
            if cell.susceptibility.len() != n || cell.output.len() != n {
                return Err(Error::MisalignedPanel(format!(
                    "{c} {y} has {} sectors, expected {n}",
                    cell.susceptibility.len()
                )));
            }
            selected.push(((c.clone(), *y), cell));
        }
    }

    let country_average = countries
        .iter()
        .map(|c| {
            let values = selected
                .iter()
                .filter(|((cc, _), _)| cc == c)
                .flat_map(|(_, cell)| cell.susceptibility.iter().copied());
            let avg = linalg::compensated_sum(values) / (years.len() * n) as f64;
            (c.clone(), avg)
        })
        .collect();

    let weighted_sector = (0..n)
        .map(|i| {
            let pairs: Vec<(f64, f64)> = selected
                .iter()
                .map(|(_, cell)| (cell.output[i], cell.susceptibility[i]))
                .collect();
            weighted_mean_ci(&pairs)
        })
        .collect::<Result<_>>()?;

    Ok(SusceptibilityAggregates {
        sectors: sectors.to_vec(),
        sector: selected
            .into_iter()
            .map(|(k, cell)| (k, cell.susceptibility.clone()))
            .collect(),
        country_average,
        weighted_sector,
    })
}

/// Weighted mean with `mean ± 1.96·s_w/√n_eff`, where `s_w` is the weighted
/// standard deviation and `n_eff = (Σw)²/Σw²` (Kish).
fn weighted_mean_ci(pairs: &[(f64, f64)]) -> Result<WeightedSusceptibility> {
    let total = linalg::compensated_sum(pairs.iter().map(|(w, _)| *w));
    if !(total > 0.0) {
        return Err(Error::DegenerateInput(
            "output weights must have a positive sum".into(),
        ));
    }
    let mean = linalg::compensated_sum(pairs.iter().map(|(w, x)| w * x)) / total;
    let sq = linalg::compensated_sum(pairs.iter().map(|(w, _)| w * w));
    let n_eff = total * total / sq;
    let var = linalg::compensated_sum(pairs.iter().map(|(w, x)| w * (x - mean).powi(2))) / total;
    let half = if n_eff > 1.0 {
        Z95 * (var * n_eff / (n_eff - 1.0)).sqrt() / n_eff.sqrt()
    } else {
        0.0
    };
    Ok(WeightedSusceptibility {
        rho: mean,
        ci_low: mean - half,
        ci_high: mean + half,
    })
}

impl SusceptibilityAggregates {
    /// `sector,rho,ci_low,ci_high`
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "sector,rho,ci_low,ci_high")?;
        for (code, ws) in self.sectors.iter().zip(&self.weighted_sector) {
            writeln!(
                w,
                "{code},{:.16e},{:.16e},{:.16e}",
                ws.rho, ws.ci_low, ws.ci_high
            )?;
        }
        Ok(())
    }

    /// Sector indices ordered by decreasing weighted susceptibility.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.sectors.len()).collect();
        idx.sort_by(|a, b| {
            self.weighted_sector[*b]
                .rho
                .total_cmp(&self.weighted_sector[*a].rho)
                .then(a.cmp(b))
        });
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table(a: &[f64], n: usize) -> IOTable {
        let codes: Vec<String> = (0..n).map(|i| format!("S{}", i + 1)).collect();
        IOTable::from_technical(
            "AAA",
            2000,
            &codes,
            &DMatrix::from_row_slice(n, n, a),
            &DVector::from_element(n, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn analytic_examples() {
        let t = table(&[0.0; 4], 2);
        let rho = susceptibility_analytic(&t, Horizon::Finite(1.0)).unwrap();
        let want = 1.0 - (-1.0f64).exp();
        assert_relative_eq!(rho.values, DMatrix::identity(2, 2) * want, epsilon = 1e-15);

        let t = table(&[0.5], 1);
        let rho = susceptibility_analytic(&t, Horizon::Infinite).unwrap();
        assert_relative_eq!(rho.values[(0, 0)], 2.0, max_relative = 1e-15);
        let rho = susceptibility_analytic(&t, Horizon::Finite(1.0)).unwrap();
        assert_relative_eq!(
            rho.values[(0, 0)],
            2.0 * (1.0 - (-0.5f64).exp()),
            max_relative = 1e-14
        );
        assert!((rho.values[(0, 0)] - 0.78694).abs() < 1e-5);
    }

    #[test]
    fn horizon_must_be_positive() {
        let t = table(&[0.5], 1);
        assert!(susceptibility_analytic(&t, Horizon::Finite(0.0)).is_err());
        assert!(susceptibility_analytic(&t, Horizon::Finite(f64::NAN)).is_err());
        assert_eq!("inf".parse::<Horizon>().unwrap(), Horizon::Infinite);
        assert_eq!("2".parse::<Horizon>().unwrap(), Horizon::Finite(2.0));
        assert!("-1".parse::<Horizon>().is_err());
    }

    #[test]
    fn sector_sums() {
        let rho = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            sum_susceptibility(&rho, SumConvention::SecondIndex),
            DVector::from_vec(vec![3.0, 7.0])
        );
        assert_eq!(
            sum_susceptibility(&rho, SumConvention::FirstIndex),
            DVector::from_vec(vec![4.0, 6.0])
        );
        assert_eq!(
            sum_susceptibility(&DMatrix::identity(3, 3), SumConvention::SecondIndex),
            DVector::from_element(3, 1.0)
        );
    }

    fn cell(s: &[f64], y: &[f64]) -> SectorCell {
        SectorCell {
            susceptibility: DVector::from_column_slice(s),
            output: DVector::from_column_slice(y),
        }
    }

    #[test]
    fn aggregate_examples() {
        let sectors = vec!["S1".to_string(), "S2".to_string()];
        let mut cells = BTreeMap::new();
        cells.insert(("AAA".to_string(), 2000), cell(&[0.1, 0.3], &[1.0, 1.0]));
        let agg =
            aggregate_susceptibilities(&sectors, &cells, &["AAA".to_string()], &[2000]).unwrap();
        assert_relative_eq!(agg.country_average["AAA"], 0.2, max_relative = 1e-15);

        let sectors = vec!["S1".to_string()];
        let countries = vec!["AAA".to_string(), "BBB".to_string()];
        let mut cells = BTreeMap::new();
        cells.insert(("AAA".to_string(), 2000), cell(&[0.1], &[1.0]));
        cells.insert(("BBB".to_string(), 2000), cell(&[0.3], &[1.0]));
        let agg = aggregate_susceptibilities(&sectors, &cells, &countries, &[2000]).unwrap();
        assert_relative_eq!(agg.weighted_sector[0].rho, 0.2, max_relative = 1e-15);

        cells.insert(("BBB".to_string(), 2000), cell(&[0.3], &[3.0]));
        let agg = aggregate_susceptibilities(&sectors, &cells, &countries, &[2000]).unwrap();
        let ws = agg.weighted_sector[0];
        assert_relative_eq!(ws.rho, 0.25, max_relative = 1e-15);
        assert!(ws.ci_low <= ws.rho && ws.rho <= ws.ci_high);
    }

    #[test]
    fn aggregate_reports_missing_cells() {
        let sectors = vec!["S1".to_string()];
        let mut cells = BTreeMap::new();
        cells.insert(("AAA".to_string(), 2000), cell(&[0.1], &[1.0]));
        let err = aggregate_susceptibilities(
            &sectors,
            &cells,
            &["AAA".to_string(), "BBB".to_string()],
            &[2000, 2001],
        )
        .unwrap_err();
        match err {
            Error::MissingPanelCell { cells } => assert_eq!(
                cells,
                vec![
                    ("AAA".to_string(), 2001),
                    ("BBB".to_string(), 2000),
                    ("BBB".to_string(), 2001)
                ]
            ),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn lag_integrator_matches_direct_sums() {
        // direct O(S·L) evaluation on a short deterministic sequence
        let n = 2;
        let dt = 0.1;
        let lags = 3;
        let ys: Vec<DVector<f64>> = (0..40)
            .map(|s| {
                let t = s as f64;
                DVector::from_vec(vec![(0.7 * t).sin() + 0.2, (0.3 * t).cos() * 1.5 - 0.1])
            })
            .collect();
        let mut acc = LagIntegrator::new(n, lags, dt);
        for y in &ys {
            acc.push(y);
        }
        let (sigma, g) = acc.finish().unwrap();

        let s = ys.len();
        let mean = ys.iter().fold(DVector::zeros(n), |a, y| a + y) / s as f64;
        let c: Vec<DVector<f64>> = ys.iter().map(|y| y - &mean).collect();
        let direct_sigma = c.iter().fold(DMatrix::zeros(n, n), |a, y| a + y * y.transpose())
            / s as f64;
        let pairs = s - lags;
        let mut direct_g = DMatrix::zeros(n, n);
        for l in 0..=lags {
            let w = if l == 0 || l == lags { 0.5 * dt } else { dt };
            let cl = (0..pairs).fold(DMatrix::zeros(n, n), |a, p| {
                a + &c[p + l] * c[p].transpose()
            }) / pairs as f64;
            direct_g += cl * w;
        }
        assert_relative_eq!(sigma, direct_sigma, epsilon = 1e-12);
        assert_relative_eq!(g, direct_g, epsilon = 1e-12);
    }

    #[test]
    fn monte_carlo_needs_two_replicas_for_errors() {
        let t = table(&[0.5], 1);
        let nu = DMatrix::from_element(1, 1, 0.01);
        let spec = MonteCarloSpec {
            replicas: 1,
            length: 10.0,
            burn_in: 0.0,
            ..MonteCarloSpec::default()
        };
        assert!(matches!(
            susceptibility_monte_carlo(&t, &nu, 1.0, &spec),
            Err(Error::InsufficientSamples { .. })
        ));
        let spec = MonteCarloSpec {
            standard_errors: false,
            ..spec
        };
        let rho = susceptibility_monte_carlo(&t, &nu, 1.0, &spec).unwrap();
        assert!(rho.standard_errors.is_none());
    }

    #[test]
    fn matrix_csv_layout() {
        let t = table(&[0.0, 0.5, 0.2, 0.0], 2);
        let rho = susceptibility_analytic(&t, Horizon::Infinite).unwrap();
        let mut buf = Vec::new();
        rho.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "row_sector,col_sector,value");
        assert!(lines[2].starts_with("S1,S2,"));
        assert_eq!(lines.len(), 5);
    }
}
