//! Forecast evaluation: per-cell Pearson correlations across sectors,
//! predictability gains and t-tests.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::stats::{self, TTest};

/// Whether correlations compare output levels or output changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Target {
    Levels,
    #[default]
    Changes,
}

/// A prediction of `Y(t+2)` made at year `t`, with the observed `Y(t+1)` it
/// was anchored on and the observed `Y(t+2)` it is scored against.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub anchor: DVector<f64>,
    pub observed: DVector<f64>,
    pub predicted: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellScore {
    pub r_lrt: f64,
    pub r_baseline: f64,
    pub pg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct YearSummary {
    pub year: i32,
    pub cells: usize,
    pub mean_pg: f64,
    /// `None` when the year has fewer than two cells or no spread.
    pub test: Option<TTest>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastEvaluation {
    pub target: Target,
    pub cells: BTreeMap<(String, i32), CellScore>,
    /// Cells dropped because a correlation was undefined (constant vector).
    pub skipped: Vec<(String, i32)>,
    pub years: Vec<YearSummary>,
    pub pooled: TTest,
    /// Counts of PG in 40 bins of width 0.1 covering [−2, 2].
    pub histogram: Vec<usize>,
}

pub const HISTOGRAM_BINS: usize = 40;

fn histogram(values: &[f64]) -> Vec<usize> {
    let mut bins = vec![0; HISTOGRAM_BINS];
    for v in values {
        let k = ((v + 2.0) / 0.1).floor().clamp(0.0, (HISTOGRAM_BINS - 1) as f64) as usize;
        bins[k] += 1;
    }
    bins
}

fn score(p: &Prediction, target: Target) -> Result<f64> {
    let (obs, pred): (Vec<f64>, Vec<f64>) = match target {
        Target::Levels => (p.observed.iter().copied().collect(), p.predicted.iter().copied().collect()),
        Target::Changes => (
            (&p.observed - &p.anchor).iter().copied().collect(),
            (&p.predicted - &p.anchor).iter().copied().collect(),
        ),
    };
    stats::pearson_r(&obs, &pred)
}

/// Score aligned LRT and baseline predictions keyed by (country, year).
pub fn evaluate_forecasts(
    lrt: &BTreeMap<(String, i32), Prediction>,
    baseline: &BTreeMap<(String, i32), Prediction>,
    target: Target,
) -> Result<ForecastEvaluation> {
    let lk: BTreeSet<_> = lrt.keys().collect();
    let bk: BTreeSet<_> = baseline.keys().collect();
    if lk != bk {
        let diff: Vec<String> = lk
            .symmetric_difference(&bk)
            .take(5)
            .map(|(c, y)| format!("{c} {y}"))
            .collect();
        return Err(Error::MisalignedPanel(format!(
            "predictions cover different cells, e.g. {}",
            diff.join(", ")
        )));
    }
    let mut cells = BTreeMap::new();
    let mut skipped = Vec::new();
    for (key, l) in lrt {
        let b = &baseline[key];
        let n = l.observed.len();
        let aligned = [&l.anchor, &l.predicted, &b.anchor, &b.observed, &b.predicted]
            .iter()
            .all(|v| v.len() == n);
        if !aligned || l.observed != b.observed || l.anchor != b.anchor {
            return Err(Error::MisalignedPanel(format!(
                "{} {}: LRT and baseline predictions disagree on sectors or observations",
                key.0, key.1
            )));
        }
        match (score(l, target), score(b, target)) {
            (Ok(r_lrt), Ok(r_baseline)) => {
                cells.insert(
                    key.clone(),
                    CellScore {
                        r_lrt,
                        r_baseline,
                        pg: r_lrt - r_baseline,
                    },
                );
            }
            (Err(Error::DegenerateInput(why)), _) | (_, Err(Error::DegenerateInput(why))) => {
                log::warn!("{} {}: cell skipped, {why}", key.0, key.1);
                skipped.push(key.clone());
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }

    let mut by_year: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for ((_, year), s) in &cells {
        by_year.entry(*year).or_default().push(s.pg);
    }
    let years = by_year
        .into_iter()
        .map(|(year, pgs)| YearSummary {
            year,
            cells: pgs.len(),
            mean_pg: stats::mean(&pgs),
            test: stats::one_sample_t_test(&pgs).ok(),
        })
        .collect();
    let all: Vec<f64> = cells.values().map(|s| s.pg).collect();
    let pooled = stats::one_sample_t_test(&all)?;
    Ok(ForecastEvaluation {
        target,
        histogram: histogram(&all),
        cells,
        skipped,
        years,
        pooled,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |x| format!("{x:.16e}"))
}

impl ForecastEvaluation {
    /// `country,year,r_lrt,r_baseline,pg`
    pub fn write_cells_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "country,year,r_lrt,r_baseline,pg")?;
        for ((c, y), s) in &self.cells {
            writeln!(
                w,
                "{c},{y},{:.16e},{:.16e},{:.16e}",
                s.r_lrt, s.r_baseline, s.pg
            )?;
        }
        Ok(())
    }

    /// `year,mean_pg,ci_low,ci_high,p_value`, one row per year and a final
    /// `pooled` row.
    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "year,mean_pg,ci_low,ci_high,p_value")?;
        for y in &self.years {
            writeln!(
                w,
                "{},{:.16e},{},{},{}",
                y.year,
                y.mean_pg,
                opt(y.test.map(|t| t.ci_low)),
                opt(y.test.map(|t| t.ci_high)),
                opt(y.test.map(|t| t.p_value)),
            )?;
        }
        writeln!(
            w,
            "pooled,{:.16e},{:.16e},{:.16e},{:.16e}",
            self.pooled.mean, self.pooled.ci_low, self.pooled.ci_high, self.pooled.p_value
        )?;
        Ok(())
    }
}
