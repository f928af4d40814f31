//! Demand-shock scenarios: shock vectors from export-demand policies,
//! stationary impacts `ΔY = ρ·X`, and country aggregates.
//!
//! Scenario files are flat `key = value` text; `#` starts a comment.
//!
//! ```text
//! name = steel-tariffs
//! year = 2014
//! horizon = 10            # years of response curve, 0 for none
//! compensate = true       # destination absorbs the redirected demand
//! impact_horizon = inf    # T used for impacts; inf is the stationary limit
//! shock = EU28,C24,export_to,USA,-1
//! shock = DEU;FRA,C29,absolute,-250
//! ```
//!
//! A shock line is `countries,sector,kind,...`: countries separated by `;`
//! (`EU28` expands to the member states), then either
//! `export_to,DEST,fraction` or `absolute,value` (millions USD).

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::iodata::{canonical_code, IOTable, Panel, EU28};
use crate::linalg;
use crate::response::{self, ResponseCurve};
use crate::susceptibility::{truncated_susceptibility, Horizon};

#[derive(Debug, Clone, PartialEq)]
pub enum ShockKind {
    /// `X = fraction · export_demand[sector, destination]`
    ExportTo { destination: String, fraction: f64 },
    Absolute { value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShockEntry {
    pub countries: Vec<String>,
    pub sector: String,
    pub kind: ShockKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub year: i32,
    /// Length of the response curves in years; 0 disables them.
    pub horizon: f64,
    pub compensate: bool,
    pub impact_horizon: Horizon,
    pub shocks: Vec<ShockEntry>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            year: 2014,
            horizon: 0.0,
            compensate: true,
            impact_horizon: Horizon::Infinite,
            shocks: Vec::new(),
        }
    }
}

fn parse_countries(field: &str) -> Vec<String> {
    field
        .split(';')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .flat_map(|c| {
            if c.eq_ignore_ascii_case("EU28") {
                EU28.iter().map(|s| s.to_string()).collect::<Vec<_>>()
            } else {
                vec![c.to_string()]
            }
        })
        .collect()
}

fn parse_f64(value: &str, what: &str, line: usize) -> Result<f64> {
    value.trim().parse().map_err(|_| Error::MalformedRow {
        line,
        reason: format!("invalid {what} {value:?}"),
    })
}

impl ScenarioSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = ScenarioSpec::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::MalformedRow {
                line,
                reason: "expected key = value".into(),
            })?;
            let value = value.trim();
            match key.trim() {
                "name" => spec.name = value.to_string(),
                "year" => {
                    spec.year = value.parse().map_err(|_| Error::MalformedRow {
                        line,
                        reason: format!("invalid year {value:?}"),
                    })?
                }
                "horizon" => spec.horizon = parse_f64(value, "horizon", line)?,
                "compensate" => {
                    spec.compensate = match value.to_ascii_lowercase().as_str() {
                        "true" | "yes" | "1" | "on" => true,
                        "false" | "no" | "0" | "off" => false,
                        _ => {
                            return Err(Error::MalformedRow {
                                line,
                                reason: format!("invalid boolean {value:?}"),
                            })
                        }
                    }
                }
                "impact_horizon" => {
                    spec.impact_horizon = value.parse().map_err(|_| Error::MalformedRow {
                        line,
                        reason: format!("invalid impact horizon {value:?}"),
                    })?
                }
                "shock" => spec.shocks.push(parse_shock(value, line)?),
                other => {
                    return Err(Error::MalformedRow {
                        line,
                        reason: format!("unknown key {other:?}"),
                    })
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "scenario horizon must be nonnegative, got {}",
                self.horizon
            )));
        }
        for s in &self.shocks {
            if s.countries.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "shock on {} names no country",
                    s.sector
                )));
            }
            match &s.kind {
                ShockKind::ExportTo { fraction, .. } if !(-1.0..=1.0).contains(fraction) => {
                    return Err(Error::InvalidArgument(format!(
                        "export fraction must lie in [-1, 1], got {fraction}"
                    )))
                }
                ShockKind::Absolute { value } if !value.is_finite() => {
                    return Err(Error::InvalidArgument("absolute shock must be finite".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn parse_shock(value: &str, line: usize) -> Result<ShockEntry> {
    let fields: Vec<&str> = value.split(',').map(str::trim).collect();
    let malformed = |reason: &str| Error::MalformedRow {
        line,
        reason: reason.to_string(),
    };
    if fields.len() < 4 {
        return Err(malformed(
            "shock needs countries,sector,export_to,DEST,fraction or countries,sector,absolute,value",
        ));
    }
    let countries = parse_countries(fields[0]);
    let sector = canonical_code(fields[1]);
    let kind = match (fields[2].to_ascii_lowercase().as_str(), fields.len()) {
        ("export_to", 5) => ShockKind::ExportTo {
            destination: fields[3].to_string(),
            fraction: parse_f64(fields[4], "fraction", line)?,
        },
        ("absolute", 4) => ShockKind::Absolute {
            value: parse_f64(fields[3], "value", line)?,
        },
        _ => return Err(malformed("unknown shock kind or wrong field count")),
    };
    Ok(ShockEntry {
        countries,
        sector,
        kind,
    })
}

fn sector_of(table: &IOTable, code: &str) -> Result<usize> {
    table.sector_index(code).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "sector {code} not present in {} {}",
            table.country(),
            table.year()
        ))
    })
}

/// Per-country shock vectors for the scenario year. Export shocks remove
/// (or add) a fraction of the recorded export demand; with compensation on,
/// the destination receives the opposite of the total change on the same
/// sector of its own final demand.
pub fn build_shock_vectors(spec: &ScenarioSpec, panel: &Panel) -> Result<BTreeMap<String, DVector<f64>>> {
    spec.validate()?;
    let mut out: BTreeMap<String, DVector<f64>> = BTreeMap::new();
    let mut compensation: BTreeMap<(String, String), f64> = BTreeMap::new();
    for entry in &spec.shocks {
        for country in &entry.countries {
            let table = panel.get(country, spec.year)?;
            let k = sector_of(table, &entry.sector)?;
            let x = match &entry.kind {
                ShockKind::ExportTo {
                    destination,
                    fraction,
                } => {
                    let exports = table.export_to(k, destination).ok_or_else(|| {
                        Error::MissingExportDetail {
                            country: country.clone(),
                            sector: entry.sector.clone(),
                            destination: destination.clone(),
                        }
                    })?;
                    let change = fraction * exports;
                    *compensation
                        .entry((destination.clone(), entry.sector.clone()))
                        .or_default() -= change;
                    change
                }
                ShockKind::Absolute { value } => *value,
            };
            out.entry(country.clone())
                .or_insert_with(|| DVector::zeros(table.n()))[k] += x;
        }
    }
    if spec.compensate {
        for ((dest, sector), value) in compensation {
            let table = panel.get(&dest, spec.year)?;
            let k = sector_of(table, &sector)?;
            out.entry(dest).or_insert_with(|| DVector::zeros(table.n()))[k] += value;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountryImpact {
    pub country: String,
    pub sectors: Vec<String>,
    pub shock: DVector<f64>,
    /// `ΔY = ρ·X`, millions USD
    pub delta: DVector<f64>,
    /// `100·ΔY_k / Y_k`
    pub percent: DVector<f64>,
    /// `Σ_k ΔY_k`
    pub aggregate: f64,
    /// `Σ_k X_k`
    pub direct: f64,
    /// `Σ_k (ΔY_k − X_k)`
    pub indirect: f64,
}

pub fn scenario_impact(table: &IOTable, x: &DVector<f64>, horizon: Horizon) -> Result<CountryImpact> {
    if x.len() != table.n() {
        return Err(Error::InvalidArgument(format!(
            "shock has {} entries, economy has {} sectors",
            x.len(),
            table.n()
        )));
    }
    let rho = truncated_susceptibility(table.technical(), horizon)?;
    let delta = rho * x;
    let percent = delta.zip_map(table.output(), |d, y| 100.0 * d / y);
    let aggregate = linalg::compensated_sum(delta.iter().copied());
    let direct = linalg::compensated_sum(x.iter().copied());
    let indirect = linalg::compensated_sum(delta.iter().zip(x.iter()).map(|(d, s)| d - s));
    Ok(CountryImpact {
        country: table.country().to_string(),
        sectors: table.sectors().iter().map(|s| s.code.clone()).collect(),
        shock: x.clone(),
        delta,
        percent,
        aggregate,
        direct,
        indirect,
    })
}

/// Step-response curve of the scenario shock over `[0, horizon]`.
pub fn scenario_response_curves(table: &IOTable, x: &DVector<f64>, horizon: f64) -> Result<ResponseCurve> {
    let grid = response::uniform_grid(horizon, response::DEFAULT_SPACING)?;
    response::step_response(table, x, &grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub name: String,
    pub year: i32,
    pub impacts: BTreeMap<String, CountryImpact>,
    pub curves: BTreeMap<String, ResponseCurve>,
}

/// Shock vectors, impacts and (when `horizon > 0`) response curves for every
/// shocked country.
pub fn run_scenario(spec: &ScenarioSpec, panel: &Panel) -> Result<ScenarioResult> {
    let shocks = build_shock_vectors(spec, panel)?;
    let mut impacts = BTreeMap::new();
    let mut curves = BTreeMap::new();
    for (country, x) in &shocks {
        let table = panel.get(country, spec.year)?;
        impacts.insert(country.clone(), scenario_impact(table, x, spec.impact_horizon)?);
        if spec.horizon > 0.0 {
            curves.insert(
                country.clone(),
                scenario_response_curves(table, x, spec.horizon)?,
            );
        }
    }
    Ok(ScenarioResult {
        name: spec.name.clone(),
        year: spec.year,
        impacts,
        curves,
    })
}

impl ScenarioResult {
    /// `country,sector,delta_usd,delta_pct`
    pub fn write_sectors_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "country,sector,delta_usd,delta_pct")?;
        for (c, imp) in &self.impacts {
            for (k, code) in imp.sectors.iter().enumerate() {
                writeln!(w, "{c},{code},{:.16e},{:.16e}", imp.delta[k], imp.percent[k])?;
            }
        }
        Ok(())
    }

    /// `country,aggregate_usd`
    pub fn write_aggregates_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "country,aggregate_usd")?;
        for (c, imp) in &self.impacts {
            writeln!(w, "{c},{:.16e}", imp.aggregate)?;
        }
        Ok(())
    }

    /// `country,direct_usd,indirect_usd`
    pub fn write_indirect_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "country,direct_usd,indirect_usd")?;
        for (c, imp) in &self.impacts {
            writeln!(w, "{c},{:.16e},{:.16e}", imp.direct, imp.indirect)?;
        }
        Ok(())
    }
}
