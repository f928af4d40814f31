//! Time evolution of the Leontief economy `dY = [(A − I)Y + D + X(t)]dt + dW`.
//!
//! Simulations integrate the deviation `y = Y − Y⁰` from equilibrium and add
//! `Y⁰` back when states are recorded, which keeps the deterministic part
//! exact at the fixed point.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::iodata::IOTable;
use crate::linalg::{self, Factorized};
use crate::rng::NormalStream;

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_BURN_IN: f64 = 50.0;
const BLOWUP_FACTOR: f64 = 1e12;

/// `Y⁰ = (I − A)⁻¹ D` by direct LU solve.
pub fn equilibrium_output(a: &DMatrix<f64>, d: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.nrows();
    if a.ncols() != n || d.len() != n {
        return Err(Error::InvalidArgument(format!(
            "equilibrium_output: A is {}x{}, D has {} entries",
            a.nrows(),
            a.ncols(),
            d.len()
        )));
    }
    let leontief = DMatrix::<f64>::identity(n, n) - a;
    Ok(Factorized::new(&leontief)?.solve_vec(d))
}

/// Stationary covariance σ of the unshocked process: `Mσ + σMᵀ + ν = 0`, `M = A − I`.
pub fn stationary_covariance(a: &DMatrix<f64>, nu: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let m = a - DMatrix::<f64>::identity(n, n);
    linalg::lyapunov(&m, nu)
}

/// Centered lagged covariance `C(τ) = ⟨y(t+τ) y(t)ᵀ⟩ = exp(Mτ)·σ`.
pub fn lagged_covariance(a: &DMatrix<f64>, nu: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lag must be finite and nonnegative, got {tau}"
        )));
    }
    let sigma = stationary_covariance(a, nu)?;
    if tau == 0.0 {
        return Ok(sigma);
    }
    let n = a.nrows();
    let m = a - DMatrix::<f64>::identity(n, n);
    Ok(linalg::expm(&(m * tau)) * sigma)
}

/// Demand shock `X(t)` applied on top of equilibrium demand.
#[derive(Debug, Clone, PartialEq)]
pub enum ShockProfile {
    None,
    /// `X(t) = δ(t − t0)·x`
    Impulse { x: DVector<f64>, t0: f64 },
    /// `X(t) = θ(t − t0)·x`
    Step { x: DVector<f64>, t0: f64 },
    /// Piecewise-linear profile, zero outside the tabulated range.
    Tabulated {
        times: Vec<f64>,
        values: Vec<DVector<f64>>,
    },
}

impl ShockProfile {
    pub fn validate(&self, n: usize) -> Result<()> {
        let check_len = |x: &DVector<f64>| {
            if x.len() != n {
                Err(Error::InvalidArgument(format!(
                    "shock vector has {} entries, economy has {n} sectors",
                    x.len()
                )))
            } else {
                Ok(())
            }
        };
        match self {
            ShockProfile::None => Ok(()),
            ShockProfile::Impulse { x, t0 } | ShockProfile::Step { x, t0 } => {
                if !t0.is_finite() {
                    return Err(Error::InvalidArgument("shock time must be finite".into()));
                }
                check_len(x)
            }
            ShockProfile::Tabulated { times, values } => {
                if times.len() != values.len() || times.is_empty() {
                    return Err(Error::InvalidArgument(
                        "tabulated shock needs one vector per grid time".into(),
                    ));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidArgument(
                        "tabulated shock grid must be strictly increasing".into(),
                    ));
                }
                values.iter().try_for_each(check_len)
            }
        }
    }

    /// Continuous part of the drive at time `t` (impulses excluded).
    pub fn rate_at(&self, t: f64) -> Option<DVector<f64>> {
        match self {
            ShockProfile::Step { x, t0 } if t >= *t0 => Some(x.clone()),
            ShockProfile::Tabulated { times, values } => {
                let first = times[0];
                let last = *times.last().unwrap();
                if t < first || t > last {
                    return None;
                }
                let k = times.partition_point(|s| *s <= t);
                if k == times.len() {
                    return Some(values[k - 1].clone());
                }
                let (t_lo, t_hi) = (times[k - 1], times[k]);
                let w = (t - t_lo) / (t_hi - t_lo);
                Some(&values[k - 1] * (1.0 - w) + &values[k] * w)
            }
            _ => None,
        }
    }

    /// Per-sector reference magnitude `|X_k|` (largest over time for tabulated shocks).
    pub fn magnitude(&self, n: usize) -> DVector<f64> {
        match self {
            ShockProfile::None => DVector::zeros(n),
            ShockProfile::Impulse { x, .. } | ShockProfile::Step { x, .. } => x.abs(),
            ShockProfile::Tabulated { values, .. } => {
                values.iter().fold(DVector::zeros(n), |acc: DVector<f64>, v| {
                    acc.zip_map(v, |a, b| a.max(b.abs()))
                })
            }
        }
    }
}

/// Sampled path of gross outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub t_start: f64,
    pub states: Vec<DVector<f64>>,
    pub seed: u64,
    pub shock: ShockProfile,
}

impl Trajectory {
    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        (self.states.len() - 1) as f64 * self.dt
    }

    /// `t,Y_1,...,Y_N` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.states.first().map_or(0, |s| s.len());
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=n).map(|i| format!("Y_{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (k, s) in self.states.iter().enumerate() {
            write!(w, "{:.16e}", self.time(k))?;
            for v in s.iter() {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum NoiseFactor {
    Zero,
    Diagonal(DVector<f64>),
    Full(DMatrix<f64>),
}

impl NoiseFactor {
    /// A factor `L` with `L Lᵀ = ν` for symmetric positive semidefinite `ν`.
    fn new(nu: &DMatrix<f64>) -> Result<Self> {
        let n = nu.nrows();
        if nu.ncols() != n {
            return Err(Error::InvalidArgument("noise covariance must be square".into()));
        }
        let asym = (nu - nu.transpose()).amax();
        if asym > 1e-12 * nu.amax().max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidArgument("noise covariance must be symmetric".into()));
        }
        if nu.iter().all(|v| *v == 0.0) {
            return Ok(NoiseFactor::Zero);
        }
        let off_diagonal = (0..n).any(|i| (0..n).any(|j| i != j && nu[(i, j)] != 0.0));
        if !off_diagonal {
            if let Some(v) = nu.diagonal().iter().find(|v| **v < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "noise variance must be nonnegative, got {v}"
                )));
            }
            return Ok(NoiseFactor::Diagonal(nu.diagonal().map(f64::sqrt)));
        }
        if let Some(ch) = nu.clone().cholesky() {
            return Ok(NoiseFactor::Full(ch.l()));
        }
        // semidefinite: symmetric square root
        let eig = nu.clone().symmetric_eigen();
        let floor = -1e-12 * eig.eigenvalues.amax();
        if eig.eigenvalues.iter().any(|l| *l < floor) {
            return Err(Error::InvalidArgument(
                "noise covariance is not positive semidefinite".into(),
            ));
        }
        let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let q = &eig.eigenvectors;
        Ok(NoiseFactor::Full(q * DMatrix::from_diagonal(&root) * q.transpose()))
    }
}

/// Euler–Maruyama stepper for the deviation process `dy = (M y + X)dt + L dB`.
#[derive(Debug, Clone)]
pub(crate) struct DeviationStepper {
    transition: DMatrix<f64>,
    noise: NoiseFactor,
    dt: f64,
    sqrt_dt: f64,
    scratch: DVector<f64>,
    xi: DVector<f64>,
}

impl DeviationStepper {
    pub(crate) fn new(m: &DMatrix<f64>, nu: &DMatrix<f64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        let n = m.nrows();
        if nu.nrows() != n {
            return Err(Error::InvalidArgument(format!(
                "noise covariance is {}x{}, economy has {n} sectors",
                nu.nrows(),
                nu.ncols()
            )));
        }
        Ok(Self {
            transition: DMatrix::<f64>::identity(n, n) + m * dt,
            noise: NoiseFactor::new(nu)?,
            dt,
            sqrt_dt: dt.sqrt(),
            scratch: DVector::zeros(n),
            xi: DVector::zeros(n),
        })
    }

    /// Advance `y` by one step. `rate` is the continuous drive, `kick` an
    /// impulse added in full during this step.
    pub(crate) fn step(
        &mut self,
        y: &mut DVector<f64>,
        rate: Option<&DVector<f64>>,
        kick: Option<&DVector<f64>>,
        rng: &mut NormalStream,
    ) {
        self.transition.mul_to(y, &mut self.scratch);
        if let Some(x) = rate {
            self.scratch.axpy(self.dt, x, 1.0);
        }
        if let Some(x) = kick {
            self.scratch += x;
        }
        match &self.noise {
            NoiseFactor::Zero => {}
            NoiseFactor::Diagonal(sd) => {
                for i in 0..sd.len() {
                    self.scratch[i] += sd[i] * self.sqrt_dt * rng.standard_normal();
                }
            }
            NoiseFactor::Full(l) => {
                rng.fill_standard_normal(self.xi.as_mut_slice());
                self.scratch.gemv(self.sqrt_dt, l, &self.xi, 1.0);
            }
        }
        std::mem::swap(y, &mut self.scratch);
    }
}

/// Parameters of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub dt: f64,
    pub horizon: f64,
    pub burn_in: f64,
    pub t_start: f64,
    pub seed: u64,
    pub stream: u64,
}

impl SimulationSpec {
    pub fn new(dt: f64, horizon: f64, burn_in: f64, seed: u64) -> Self {
        Self {
            dt,
            horizon,
            burn_in,
            t_start: 0.0,
            seed,
            stream: 0,
        }
    }
}

/// Euler–Maruyama simulation started at equilibrium. Burn-in states are
/// discarded; the returned trajectory covers `[t_start, t_start + horizon]`.
pub fn simulate_trajectory(
    table: &IOTable,
    nu: &DMatrix<f64>,
    shock: &ShockProfile,
    spec: &SimulationSpec,
) -> Result<Trajectory> {
    let n = table.n();
    let mut states = Vec::with_capacity((spec.horizon / spec.dt).round() as usize + 1);
    simulate_with(table, nu, shock, spec, |_, state| {
        states.push(state.clone());
    })?;
    Ok(Trajectory {
        dt: spec.dt,
        t_start: spec.t_start,
        states,
        seed: spec.seed,
        shock: if n == 0 { ShockProfile::None } else { shock.clone() },
    })
}

/// Streaming form of [`simulate_trajectory`]: `visit(t, Y)` is called for every
/// recorded state instead of storing the path.
pub fn simulate_with(
    table: &IOTable,
    nu: &DMatrix<f64>,
    shock: &ShockProfile,
    spec: &SimulationSpec,
    mut visit: impl FnMut(f64, &DVector<f64>),
) -> Result<()> {
    if !(spec.horizon > 0.0 && spec.horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive, got {}",
            spec.horizon
        )));
    }
    if !(spec.burn_in >= 0.0 && spec.burn_in.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "burn-in must be nonnegative, got {}",
            spec.burn_in
        )));
    }
    let n = table.n();
    shock.validate(n)?;
    let y0 = equilibrium_output(table.technical(), table.demand())?;
    let mut stepper = DeviationStepper::new(&table.drift(), nu, spec.dt)?;
    let mut rng = NormalStream::new(spec.seed, spec.stream);
    let bound = BLOWUP_FACTOR * linalg::max_abs(&y0).max(1.0);

    let burn_steps = (spec.burn_in / spec.dt).round() as usize;
    let steps = (spec.horizon / spec.dt).round().max(1.0) as usize;
    let origin = spec.t_start - burn_steps as f64 * spec.dt;
    let time = |k: usize| origin + k as f64 * spec.dt;

    let mut y = DVector::zeros(n);
    let mut state = y0.clone();
    if burn_steps == 0 {
        visit(time(0), &state);
    }
    for k in 0..(burn_steps + steps) {
        let t = time(k);
        let rate = shock.rate_at(t);
        let kick = match shock {
            ShockProfile::Impulse { x, t0 } if *t0 >= t && *t0 < t + spec.dt => Some(x),
            _ => None,
        };
        stepper.step(&mut y, rate.as_ref(), kick, &mut rng);
        if y.iter().zip(y0.iter()).any(|(d, e)| !((d + e).abs() <= bound)) {
            return Err(Error::NumericalBlowup {
                time: time(k + 1),
                bound,
            });
        }
        if k + 1 >= burn_steps {
            state.copy_from(&y0);
            state += &y;
            visit(time(k + 1), &state);
        }
    }
    Ok(())
}
