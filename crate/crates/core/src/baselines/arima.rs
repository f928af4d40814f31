//! ARIMA(p, d, q) with p, d, q ∈ {0, 1}, fitted by conditional sum of squares.

use std::fmt;

use super::optimize::{nelder_mead, Tolerances};
use crate::error::{Error, Result};
use crate::stats;

/// Coefficients are kept inside `[−BOUND, BOUND]` after fitting.
pub const COEFFICIENT_BOUND: f64 = 0.99;
const STARTS: [f64; 3] = [-0.5, 0.0, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArimaOrder {
    pub p: u8,
    pub d: u8,
    pub q: u8,
}

impl ArimaOrder {
    pub fn new(p: u8, d: u8, q: u8) -> Result<Self> {
        if p > 1 || d > 1 || q > 1 {
            return Err(Error::InvalidArgument(format!(
                "ARIMA orders must be 0 or 1, got ({p},{d},{q})"
            )));
        }
        Ok(Self { p, d, q })
    }

    pub fn min_length(self) -> usize {
        (self.p + self.d + self.q) as usize + 3
    }
}

impl fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

impl std::str::FromStr for ArimaOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s
            .trim()
            .trim_start_matches('(')
            .trim_end_matches(')')
            .split(',')
            .map(str::trim)
            .collect();
        let parsed: Vec<u8> = parts
            .iter()
            .map(|p| p.parse::<u8>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidArgument(format!("invalid ARIMA order {s:?}")))?;
        match parsed.as_slice() {
            [p, d, q] => ArimaOrder::new(*p, *d, *q),
            _ => Err(Error::InvalidArgument(format!("invalid ARIMA order {s:?}"))),
        }
    }
}

/// Whether to estimate a constant. `Auto` includes one only for undifferenced
/// models, the usual convention for ARIMA software.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConstantTerm {
    #[default]
    Auto,
    Include,
    Exclude,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub phi: f64,
    pub theta: f64,
    pub constant: f64,
    pub has_constant: bool,
    pub innovation_variance: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// A coefficient left the invertible/stationary region and was clamped.
    pub clamped: bool,
}

fn difference(series: &[f64], d: u8) -> Vec<f64> {
    if d == 0 {
        series.to_vec()
    } else {
        series.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// CSS residuals `e_t = w_t − c − φ·w_{t−1} − θ·e_{t−1}` with `e = 0` before
/// the first usable observation.
fn residuals(w: &[f64], order: ArimaOrder, c: f64, phi: f64, theta: f64) -> Vec<f64> {
    let start = order.p as usize;
    let mut out = Vec::with_capacity(w.len().saturating_sub(start));
    let mut prev = 0.0;
    for t in start..w.len() {
        let mut pred = c;
        if order.p == 1 {
            pred += phi * w[t - 1];
        }
        if order.q == 1 {
            pred += theta * prev;
        }
        let e = w[t] - pred;
        out.push(e);
        prev = e;
    }
    out
}

struct Layout {
    order: ArimaOrder,
    constant: bool,
}

impl Layout {
    fn unpack(&self, x: &[f64]) -> (f64, f64, f64) {
        let mut it = x.iter().copied();
        let c = if self.constant { it.next().unwrap() } else { 0.0 };
        let phi = if self.order.p == 1 { it.next().unwrap() } else { 0.0 };
        let theta = if self.order.q == 1 { it.next().unwrap() } else { 0.0 };
        (c, phi, theta)
    }
}

/// Fit by minimising the conditional sum of squares over the `d`-times
/// differenced series. Nelder–Mead is started from every combination of
/// φ, θ ∈ {−0.5, 0, 0.5} with `c = mean·(1 − φ)`; the lowest objective wins
/// and near-ties go to the smaller parameter vector.
pub fn fit_arima(series: &[f64], order: ArimaOrder, constant: ConstantTerm) -> Result<ArimaModel> {
    if series.len() < order.min_length() {
        return Err(Error::TooShortSeries {
            len: series.len(),
            required: order.min_length(),
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("series contains non-finite values".into()));
    }
    let w = difference(series, order.d);
    let has_constant = match constant {
        ConstantTerm::Auto => order.d == 0,
        ConstantTerm::Include => true,
        ConstantTerm::Exclude => false,
    };
    let layout = Layout {
        order,
        constant: has_constant,
    };
    let mean = stats::mean(&w);
    let spread = if w.len() > 1 { stats::std_dev(&w) } else { 0.0 };
    let scale = w.iter().map(|v| v * v).sum::<f64>() + w.len() as f64 * f64::MIN_POSITIVE;
    let objective = |x: &[f64]| {
        let (c, phi, theta) = layout.unpack(x);
        if phi.abs() >= 1.0 || theta.abs() >= 1.0 {
            return f64::INFINITY;
        }
        residuals(&w, order, c, phi, theta).iter().map(|e| e * e).sum::<f64>()
    };
    let tol = Tolerances {
        f_abs: 1e-24 * scale,
        ..Tolerances::default()
    };

    let phis: &[f64] = if order.p == 1 { &STARTS } else { &[0.0] };
    let thetas: &[f64] = if order.q == 1 { &STARTS } else { &[0.0] };
    let dim = usize::from(has_constant) + order.p as usize + order.q as usize;

    let mut best: Option<(Vec<f64>, f64, usize, bool)> = None;
    let mut total_iterations = 0;
    if dim == 0 {
        best = Some((Vec::new(), objective(&[]), 0, true));
    }
    for &phi0 in phis {
        for &theta0 in thetas {
            if dim == 0 {
                break;
            }
            let mut start = Vec::with_capacity(dim);
            let mut steps = Vec::with_capacity(dim);
            if has_constant {
                start.push(mean * (1.0 - phi0));
                steps.push((0.1 * spread).max(1e-3 * mean.abs()).max(1e-8));
            }
            if order.p == 1 {
                start.push(phi0);
                steps.push(0.1);
            }
            if order.q == 1 {
                start.push(theta0);
                steps.push(0.1);
            }
            let m = nelder_mead(objective, &start, &steps, tol);
            total_iterations += m.iterations;
            let better = match &best {
                None => true,
                Some((x, v, _, _)) => {
                    let tie = (m.value - v).abs() <= 1e-10 * v.abs().max(tol.f_abs);
                    if tie {
                        norm(&m.x) < norm(x)
                    } else {
                        m.value < *v
                    }
                }
            };
            if better {
                best = Some((m.x, m.value, m.iterations, m.converged));
            }
        }
    }
    let (x, value, _, converged) = best.expect("at least one start");
    if !converged || !value.is_finite() {
        return Err(Error::NonConvergent {
            iterations: total_iterations,
            objective: value,
        });
    }
    let (c, mut phi, mut theta) = layout.unpack(&x);
    let mut clamped = false;
    for v in [&mut phi, &mut theta] {
        if v.abs() > COEFFICIENT_BOUND {
            *v = v.signum() * COEFFICIENT_BOUND;
            clamped = true;
        }
    }
    let res = residuals(&w, order, c, phi, theta);
    let dof = (res.len() as f64 - dim as f64).max(1.0);
    Ok(ArimaModel {
        order,
        phi,
        theta,
        constant: c,
        has_constant,
        innovation_variance: res.iter().map(|e| e * e).sum::<f64>() / dof,
        objective: value,
        iterations: total_iterations,
        converged,
        clamped,
    })
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Minimum-mean-square-error forecasts `steps` ahead of the end of `series`.
pub fn arima_forecast(model: &ArimaModel, series: &[f64], steps: usize) -> Result<Vec<f64>> {
    let order = model.order;
    if series.len() < (order.p + order.d) as usize + 1 {
        return Err(Error::TooShortSeries {
            len: series.len(),
            required: (order.p + order.d) as usize + 1,
        });
    }
    let w = difference(series, order.d);
    let res = residuals(&w, order, model.constant, model.phi, model.theta);
    let mut last_w = *w.last().unwrap();
    let mut last_e = res.last().copied().unwrap_or(0.0);
    let mut level = *series.last().unwrap();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut next = model.constant;
        if order.p == 1 {
            next += model.phi * last_w;
        }
        if order.q == 1 {
            next += model.theta * last_e;
        }
        last_w = next;
        last_e = 0.0;
        if order.d == 1 {
            level += next;
            out.push(level);
        } else {
            out.push(next);
        }
    }
    Ok(out)
}
