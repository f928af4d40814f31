//! National input–output tables: construction, validation, noise model and
//! the long-format text interface.

mod parse;
pub mod sectors;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

pub use parse::{parse_io_table, parse_panel, write_long_format, LONG_FORMAT_HEADER};
pub use sectors::{canonical_code, lookup, SectorGroup, SectorId, EU28, WIOD_SECTORS};

/// Relative tolerance of the accounting identity `Y = A·Y + D`.
pub const ACCOUNTING_TOLERANCE: f64 = 1e-9;

/// One country-year Leontief economy.
///
/// Immutable once built: every constructor validates the invariants
/// (nonnegative coefficients, nonnegative output, spectral radius of `A`
/// below one) and derives `A` and `D` from flows and output.
#[derive(Debug, Clone, PartialEq)]
pub struct IOTable {
    country: String,
    year: i32,
    sectors: Vec<SectorId>,
    flows: DMatrix<f64>,
    output: DVector<f64>,
    technical: DMatrix<f64>,
    demand: DVector<f64>,
    domestic_final: DVector<f64>,
    destinations: Vec<String>,
    export_demand: DMatrix<f64>,
    spectral_radius: f64,
}

impl IOTable {
    /// Build a table from intermediate flows `Z`, gross output `Y` and the
    /// final-demand detail. `A = Z_ij / Y_j`, and `D` is the residual `(I − A)·Y`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_flows(
        country: &str,
        year: i32,
        codes: &[String],
        flows: DMatrix<f64>,
        output: DVector<f64>,
        domestic_final: DVector<f64>,
        destinations: Vec<String>,
        export_demand: DMatrix<f64>,
    ) -> Result<Self> {
        let n = codes.len();
        if flows.shape() != (n, n) || output.len() != n || domestic_final.len() != n {
            return Err(Error::InvalidArgument(format!(
                "table {country}/{year}: inconsistent dimensions for {n} sectors"
            )));
        }
        if export_demand.shape() != (n, destinations.len()) {
            return Err(Error::InvalidArgument(format!(
                "table {country}/{year}: export demand must be {n}x{}",
                destinations.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        let sectors: Vec<SectorId> = codes
            .iter()
            .enumerate()
            .map(|(i, c)| SectorId::new(c, i))
            .collect();
        for s in &sectors {
            if !seen.insert(s.code.clone()) {
                return Err(Error::InvalidArgument(format!(
                    "table {country}/{year}: duplicate sector code {}",
                    s.code
                )));
            }
        }
        if let Some(v) = flows.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "table {country}/{year}: intermediate flows must be finite and nonnegative, found {v}"
            )));
        }
        if let Some(v) = output.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "table {country}/{year}: output must be finite and nonnegative, found {v}"
            )));
        }

        let mut technical = DMatrix::zeros(n, n);
        for j in 0..n {
            let yj = output[j];
            if yj > 0.0 {
                for i in 0..n {
                    technical[(i, j)] = flows[(i, j)] / yj;
                }
            } else if flows.column(j).iter().any(|v| *v != 0.0) {
                return Err(Error::ZeroOutputSector {
                    sector: sectors[j].code.clone(),
                });
            }
        }

        let spectral_radius = linalg::spectral_radius(&technical)?;
        if !(spectral_radius < 1.0) {
            return Err(Error::NonProductiveEconomy { spectral_radius });
        }

        let demand = &output - &technical * &output;
        for (i, d) in demand.iter().enumerate() {
            if *d < 0.0 {
                log::warn!(
                    "{country}/{year}: residual demand of sector {} is negative ({d:.6e}); kept as is",
                    sectors[i].code
                );
            }
        }

        Ok(Self {
            country: country.to_string(),
            year,
            sectors,
            flows,
            output,
            technical,
            demand,
            domestic_final,
            destinations,
            export_demand,
            spectral_radius,
        })
    }

    /// Build a closed economy from technical coefficients and final demand:
    /// `Y = (I − A)⁻¹ D`, `Z = A·diag(Y)`, and all demand is domestic.
    pub fn from_technical(
        country: &str,
        year: i32,
        codes: &[String],
        technical: &DMatrix<f64>,
        demand: &DVector<f64>,
    ) -> Result<Self> {
        let n = codes.len();
        if technical.shape() != (n, n) || demand.len() != n {
            return Err(Error::InvalidArgument(format!(
                "table {country}/{year}: inconsistent dimensions for {n} sectors"
            )));
        }
        let rho = linalg::spectral_radius(technical)?;
        if !(rho < 1.0) {
            return Err(Error::NonProductiveEconomy {
                spectral_radius: rho,
            });
        }
        let output = crate::dynamics::equilibrium_output(technical, demand)?;
        let mut flows = technical.clone();
        for j in 0..n {
            let yj = output[j];
            flows.column_mut(j).scale_mut(yj);
        }
        Self::from_flows(
            country,
            year,
            codes,
            flows,
            output,
            demand.clone(),
            Vec::new(),
            DMatrix::zeros(n, 0),
        )
    }

    pub fn country(&self) -> &str {
        &self.country
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn n(&self) -> usize {
        self.sectors.len()
    }

    pub fn sectors(&self) -> &[SectorId] {
        &self.sectors
    }

    pub fn sector_index(&self, code: &str) -> Option<usize> {
        let canon = sectors::canonical_code(code);
        self.sectors.iter().position(|s| s.code == canon)
    }

    pub fn flows(&self) -> &DMatrix<f64> {
        &self.flows
    }

    pub fn output(&self) -> &DVector<f64> {
        &self.output
    }

    pub fn technical(&self) -> &DMatrix<f64> {
        &self.technical
    }

    pub fn demand(&self) -> &DVector<f64> {
        &self.demand
    }

    pub fn domestic_final(&self) -> &DVector<f64> {
        &self.domestic_final
    }

    /// Foreign destination countries, in column order of [`Self::export_demand`].
    pub fn destinations(&self) -> &[String] {
        &self.destinations
    }

    /// N×C final demand by foreign destination country.
    pub fn export_demand(&self) -> &DMatrix<f64> {
        &self.export_demand
    }

    pub fn export_to(&self, sector: usize, destination: &str) -> Option<f64> {
        self.destinations
            .iter()
            .position(|d| d == destination)
            .map(|c| self.export_demand[(sector, c)])
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    /// Drift matrix `M = A − I` of the Leontief dynamics.
    pub fn drift(&self) -> DMatrix<f64> {
        let n = self.n();
        &self.technical - DMatrix::<f64>::identity(n, n)
    }

    /// `I − A`.
    pub fn leontief(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::<f64>::identity(n, n) - &self.technical
    }

    /// `‖Y − (A·Y + D)‖∞ / ‖Y‖∞`.
    pub fn accounting_residual(&self) -> f64 {
        let resid = &self.output - (&self.technical * &self.output + &self.demand);
        let scale = linalg::max_abs(&self.output);
        if scale == 0.0 {
            linalg::max_abs(&resid)
        } else {
            linalg::max_abs(&resid) / scale
        }
    }

    /// Largest relative gap between recorded final demand (domestic plus
    /// exports) and the residual demand `D`. Zero on internally consistent data.
    pub fn final_demand_discrepancy(&self) -> f64 {
        let n = self.n();
        let scale = linalg::max_abs(&self.demand).max(f64::MIN_POSITIVE);
        (0..n)
            .map(|i| {
                let recorded = self.domestic_final[i] + self.export_demand.row(i).sum();
                (recorded - self.demand[i]).abs() / scale
            })
            .fold(0.0, f64::max)
    }
}

/// Covariance model of the equilibrium driving noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    /// `ν = ε²·I`
    Isotropic { epsilon: f64 },
    /// `ν = diag((η·Y⁰_i)²)`
    OutputProportional { eta: f64 },
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::OutputProportional { eta: 0.01 }
    }
}

impl NoiseSpec {
    pub fn scale(&self) -> f64 {
        match *self {
            NoiseSpec::Isotropic { epsilon } => epsilon,
            NoiseSpec::OutputProportional { eta } => eta,
        }
    }

    /// Noise covariance `ν` for the given economy.
    pub fn covariance(&self, table: &IOTable) -> Result<DMatrix<f64>> {
        let scale = self.scale();
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::NonPositiveScale { value: scale });
        }
        let n = table.n();
        Ok(match *self {
            NoiseSpec::Isotropic { epsilon } => {
                DMatrix::<f64>::identity(n, n) * (epsilon * epsilon)
            }
            NoiseSpec::OutputProportional { eta } => {
                let diag = table.output().map(|y| (eta * y).powi(2));
                if diag.iter().any(|v| *v == 0.0) {
                    log::warn!(
                        "{}/{}: zero-output sectors receive no noise; covariance is singular",
                        table.country(),
                        table.year()
                    );
                }
                DMatrix::from_diagonal(&diag)
            }
        })
    }
}

/// All country-year tables of a dataset, keyed by (country, year).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Panel {
    tables: BTreeMap<(String, i32), IOTable>,
}

impl Panel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, table: IOTable) {
        self.tables
            .insert((table.country().to_string(), table.year()), table);
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn get(&self, country: &str, year: i32) -> Result<&IOTable> {
        self.tables
            .get(&(country.to_string(), year))
            .ok_or_else(|| Error::MissingCountryYear {
                country: country.to_string(),
                year,
            })
    }

    pub fn contains(&self, country: &str, year: i32) -> bool {
        self.tables.contains_key(&(country.to_string(), year))
    }

    /// Tables in (country, year) order.
    pub fn tables(&self) -> impl Iterator<Item = &IOTable> {
        self.tables.values()
    }

    pub fn countries(&self) -> Vec<String> {
        let mut out: Vec<String> = self.tables.keys().map(|(c, _)| c.clone()).collect();
        out.dedup();
        out
    }

    pub fn years(&self, country: &str) -> Vec<i32> {
        self.tables
            .keys()
            .filter(|(c, _)| c == country)
            .map(|(_, y)| *y)
            .collect()
    }

    pub fn all_years(&self) -> Vec<i32> {
        let mut out: Vec<i32> = self.tables.keys().map(|(_, y)| *y).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Restrict to the given countries and years; empty selectors keep everything.
    pub fn select(&self, countries: &[String], years: &[i32]) -> Panel {
        let tables = self
            .tables
            .iter()
            .filter(|((c, y), _)| {
                (countries.is_empty() || countries.contains(c))
                    && (years.is_empty() || years.contains(y))
            })
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Panel { tables }
    }
}

impl FromIterator<IOTable> for Panel {
    fn from_iter<I: IntoIterator<Item = IOTable>>(iter: I) -> Self {
        let mut p = Panel::new();
        for t in iter {
            p.insert(t);
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn codes(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("S{}", i + 1)).collect()
    }

    #[test]
    fn two_sector_coefficients_and_residual_demand() {
        let z = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.4, 0.0]);
        let y = DVector::from_vec(vec![2.0, 2.0]);
        let fd = DVector::from_vec(vec![1.0, 1.6]);
        let t = IOTable::from_flows("AAA", 2000, &codes(2), z, y, fd, vec![], DMatrix::zeros(2, 0))
            .unwrap();
        assert_eq!(
            t.technical(),
            &DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.2, 0.0])
        );
        assert_relative_eq!(t.demand()[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(t.demand()[1], 1.6, epsilon = 1e-15);
        assert!(t.accounting_residual() < ACCOUNTING_TOLERANCE);
        assert!(t.final_demand_discrepancy() < 1e-9);
    }

    #[test]
    fn zero_output_with_inputs_is_rejected() {
        let z = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let y = DVector::from_vec(vec![2.0, 0.0]);
        let err = IOTable::from_flows(
            "AAA",
            2000,
            &codes(2),
            z,
            y,
            DVector::zeros(2),
            vec![],
            DMatrix::zeros(2, 0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::ZeroOutputSector { ref sector } if sector == "S2"));
    }

    #[test]
    fn nonproductive_economy_reports_radius() {
        // A = [[0, 1.2], [1.2, 0]] has spectral radius 1.2
        let z = DMatrix::from_row_slice(2, 2, &[0.0, 1.2, 1.2, 0.0]);
        let y = DVector::from_vec(vec![1.0, 1.0]);
        let err = IOTable::from_flows(
            "AAA",
            2000,
            &codes(2),
            z,
            y,
            DVector::zeros(2),
            vec![],
            DMatrix::zeros(2, 0),
        )
        .unwrap_err();
        match err {
            Error::NonProductiveEconomy { spectral_radius } => {
                assert_relative_eq!(spectral_radius, 1.2, max_relative = 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn noise_covariances() {
        let t = IOTable::from_technical(
            "AAA",
            2000,
            &codes(2),
            &DMatrix::zeros(2, 2),
            &DVector::from_vec(vec![100.0, 200.0]),
        )
        .unwrap();
        let iso = NoiseSpec::Isotropic { epsilon: 0.2 }.covariance(&t).unwrap();
        assert_relative_eq!(iso, DMatrix::identity(2, 2) * 0.04, epsilon = 1e-15);
        let prop = NoiseSpec::OutputProportional { eta: 0.01 }
            .covariance(&t)
            .unwrap();
        assert_relative_eq!(prop[(0, 0)], 1.0, max_relative = 1e-12);
        assert_relative_eq!(prop[(1, 1)], 4.0, max_relative = 1e-12);
        assert_eq!(prop[(0, 1)], 0.0);
        assert!(matches!(
            NoiseSpec::OutputProportional { eta: 0.0 }.covariance(&t),
            Err(Error::NonPositiveScale { .. })
        ));
        assert!(matches!(
            NoiseSpec::Isotropic { epsilon: -1.0 }.covariance(&t),
            Err(Error::NonPositiveScale { .. })
        ));
    }

    #[test]
    fn productive_implies_hurwitz_drift() {
        let a = DMatrix::from_row_slice(3, 3, &[0.1, 0.3, 0.2, 0.2, 0.1, 0.4, 0.3, 0.2, 0.1]);
        let t = IOTable::from_technical("AAA", 2000, &codes(3), &a, &DVector::from_element(3, 1.0))
            .unwrap();
        assert!(t.spectral_radius() < 1.0);
        assert!(linalg::max_real_eigenvalue(&t.drift()).unwrap() < 0.0);
    }
}
