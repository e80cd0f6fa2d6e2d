//! Least-squares extraction of decay times, linewidths, skewness and Rabi
//! frequencies, and the two routes from measured rates to the
//! spin-photon coupling.

mod lm;
mod models;

use serde::{Deserialize, Serialize};

use crate::error::{check, invalid, Error, Result};
use lm::{levenberg_marquardt, Data, Model};
use models::{Exponential, Lorentzian, Rabi, SkewedLorentzian};

const MAX_ITER: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Uniform,
    /// `(1 + y)^(−1/2)`, for count data.
    Poisson,
}

impl Weighting {
    fn weights(self, y: &[f64]) -> Vec<f64> {
        match self {
            Weighting::Uniform => vec![1.0; y.len()],
            Weighting::Poisson => y.iter().map(|&v| 1.0 / (1.0 + v.max(0.0)).sqrt()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParameter {
    pub name: String,
    pub unit: String,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: Vec<FitParameter>,
    /// Weighted residual norm at the optimum.
    pub residual_norm: f64,
    /// Weighted sum of squares after each accepted step.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl FitResult {
    fn new(names: &[(&str, &str)], sol: lm::Solution) -> Self {
        let parameters = names
            .iter()
            .zip(sol.params.iter().zip(&sol.errors))
            .map(|(&(name, unit), (&value, &error))| FitParameter { name: name.into(), unit: unit.into(), value, error })
            .collect();
        FitResult {
            parameters,
            residual_norm: sol.cost.sqrt(),
            cost_history: sol.history,
            iterations: sol.iterations,
            converged: sol.converged,
            warnings: Vec::new(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&FitParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// Value of a parameter this fit is known to produce.
    pub fn value(&self, name: &str) -> f64 {
        self.get(name).unwrap_or_else(|| panic!("fit has no parameter {name}")).value
    }

    fn push(&mut self, name: &str, unit: &str, value: f64, error: f64) {
        self.parameters.push(FitParameter { name: name.into(), unit: unit.into(), value, error });
    }
}

fn check_data(x: &[f64], y: &[f64], min_points: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(invalid("data", format!("{} abscissae for {} values", x.len(), y.len())));
    }
    if x.len() < min_points {
        return Err(invalid("data", format!("need at least {min_points} points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(invalid("data", "contains non-finite values"));
    }
    Ok(())
}

fn restrict(x: &[f64], y: &[f64], window: Option<(f64, f64)>) -> (Vec<f64>, Vec<f64>) {
    x.iter()
        .zip(y)
        .filter(|(t, _)| window.is_none_or(|(a, b)| **t >= a && **t <= b))
        .map(|(&t, &v)| (t, v))
        .unzip()
}

fn run(model: &dyn Model, x: &[f64], y: &[f64], weighting: Weighting, start: &[f64], free: &[bool]) -> Result<lm::Solution> {
    let w = weighting.weights(y);
    levenberg_marquardt(model, &Data { x, y, w: &w }, start, free, MAX_ITER)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `y = A·exp(−t/T1) + c` over the points inside `window`.
pub fn fit_exponential(t: &[f64], y: &[f64], window: Option<(f64, f64)>, weighting: Weighting) -> Result<FitResult> {
    check_data(t, y, 0)?;
    let (x, v) = restrict(t, y, window);
    check_data(&x, &v, 5)?;
    let n = x.len();
    let tail = mean(&v[n - n.div_ceil(10)..]);
    let head = mean(&v[..n.div_ceil(10)]);
    let amp0 = head - tail;
    let span = x[n - 1] - x[0];
    if span <= 0.0 {
        return Err(invalid("t", "window must contain distinct times"));
    }
    // time for the excess over the tail to fall by e
    let target = tail + amp0 / std::f64::consts::E;
    let t_e = x.iter().zip(&v).find(|(_, &y)| (y - target) * amp0.signum() <= 0.0).map_or(span / 3.0, |(&t, _)| (t - x[0]).max(span / 50.0));
    // reference to the window start keeps the amplitude well scaled
    let t0 = x[0];
    let shifted: Vec<f64> = x.iter().map(|t| t - t0).collect();
    let mut best: Option<lm::Solution> = None;
    for f in [1.0, 0.3, 3.0] {
        match run(&Exponential, &shifted, &v, weighting, &[amp0, t_e * f, tail], &[true; 3]) {
            Ok(s) if best.as_ref().is_none_or(|b| s.cost < b.cost) => best = Some(s),
            Ok(_) => {}
            Err(e) if f == 3.0 && best.is_none() => return Err(e),
            Err(_) => {}
        }
    }
    let mut sol = best.expect("loop returns on total failure");
    let t1 = sol.params[1];
    if !(t1 > 0.0) || !t1.is_finite() {
        return Err(Error::NonConvergence { iterations: sol.iterations, reason: format!("decay time {t1} is not positive") });
    }
    sol.params[0] *= (t0 / t1).exp();
    sol.errors[0] *= (t0 / t1).exp();
    let mut r = FitResult::new(&[("amplitude", "y"), ("t1_eff", "s"), ("offset", "y")], sol);
    if r.value("amplitude") < 0.0 {
        r.warnings.push("negative amplitude: the trace rises instead of decaying".into());
    }
    Ok(r)
}

fn lorentzian_start(x: &[f64], y: &[f64]) -> Result<[f64; 4]> {
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let base = y.iter().copied().fold(f64::INFINITY, f64::min);
    let (k, &top) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
    let half = base + 0.5 * (top - base);
    let above: Vec<f64> = x.iter().zip(y).filter(|(_, &v)| v >= half).map(|(&t, _)| t).collect();
    let (a, b) = above.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let width = (0.5 * (b - a)).max((hi - lo) / x.len() as f64);
    if top <= base {
        return Err(Error::NonConvergence { iterations: 0, reason: "flat spectrum, no peak".into() });
    }
    Ok([x[k], width, top - base, base])
}

/// `a + h / (1 + ((x − x0)/w)²)`. The width is the half width at half
/// maximum in the units of `x`; when `x` is a field and `field_slope`
/// gives the transition's dω/dB, the width is also reported in Hz.
pub fn fit_lorentzian(x: &[f64], y: &[f64], weighting: Weighting, field_slope: Option<f64>) -> Result<FitResult> {
    check_data(x, y, 7)?;
    let start = lorentzian_start(x, y)?;
    let sol = run(&Lorentzian, x, y, weighting, &start, &[true; 4])?;
    let mut r = FitResult::new(&[("center", "x"), ("width", "x"), ("amplitude", "y"), ("offset", "y")], sol);
    span_check(&mut r, x);
    if let Some(s) = field_slope {
        let w = r.get("width").expect("fitted");
        let (v, e) = (w.value.abs() * s.abs() / (2.0 * std::f64::consts::PI), w.error * s.abs() / (2.0 * std::f64::consts::PI));
        r.push("width_frequency", "Hz", v, e);
    }
    Ok(r)
}

fn span_check(r: &mut FitResult, x: &[f64]) {
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo < 4.0 * r.value("width").abs() {
        r.warnings.push("data span fewer than two full widths".into());
    }
}

/// Lorentzian whose width varies across the centre as
/// `w(x) = w0·(1 + γ·tanh((x − x0)/w0))`. `fixed_skew` pins γ.
/// Besides `skew` the result carries `skew_width = γ·w0`.
pub fn fit_skewed_lorentzian(x: &[f64], y: &[f64], weighting: Weighting, fixed_skew: Option<f64>) -> Result<FitResult> {
    check_data(x, y, 7)?;
    let [x0, w0, h, a] = lorentzian_start(x, y)?;
    let free = [true, true, fixed_skew.is_none(), true, true];
    let skew = match fixed_skew {
        Some(g) => {
            check("fixed_skew", g, g.abs() < 1.0, "must lie in (−1, 1)")?;
            g
        }
        None => 0.0,
    };
    let mut best: Option<lm::Solution> = None;
    let starts: &[f64] = if fixed_skew.is_some() { &[skew] } else { &[0.0, 0.3, -0.3] };
    for &g in starts {
        if let Ok(s) = run(&SkewedLorentzian, x, y, weighting, &[x0, w0, g, h, a], &free) {
            if best.as_ref().is_none_or(|b| s.cost < b.cost) {
                best = Some(s);
            }
        }
    }
    let sol = match best {
        Some(s) => s,
        None => run(&SkewedLorentzian, x, y, weighting, &[x0, w0, skew, h, a], &free)?,
    };
    let (g, ge, w, we) = (sol.params[2], sol.errors[2], sol.params[1], sol.errors[1]);
    let mut r = FitResult::new(&[("center", "x"), ("width", "x"), ("skew", "1"), ("amplitude", "y"), ("offset", "y")], sol);
    span_check(&mut r, x);
    r.push("skew_width", "x", g * w, ((ge * w).powi(2) + (g * we).powi(2)).sqrt());
    Ok(r)
}

/// `A sin²(Ω_R t/2) e^(−t/T_c1) + B (1 − e^(−t/T_c2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiModelParams {
    pub amplitude: f64,
    /// rad/s
    pub omega_r: f64,
    pub t_c1: f64,
    pub background: f64,
    pub t_c2: f64,
}

impl RabiModelParams {
    pub fn eval(&self, t: f64) -> f64 {
        Rabi.eval(t, &self.as_array(), &mut [0.0; 5])
    }

    fn as_array(&self) -> [f64; 5] {
        [self.amplitude, self.omega_r, self.t_c1, self.background, self.t_c2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiFit {
    pub params: RabiModelParams,
    pub errors: RabiModelParams,
    pub fit: FitResult,
}

/// Dominant frequency (rad/s) of `v` sampled at `t`, by a zero-padded
/// discrete Fourier transform on the uniform grid spanned by `t`.
/// Returns the frequency and the ratio of its power to the median power.
fn dominant_frequency(t: &[f64], v: &[f64]) -> (f64, f64) {
    let n = t.len();
    let span = t[n - 1] - t[0];
    let f_max = 0.5 * (n - 1) as f64 / span;
    let df = 1.0 / (8.0 * span);
    let m = (f_max / df) as usize;
    let power: Vec<f64> = (1..=m)
        .map(|k| {
            let w = 2.0 * std::f64::consts::PI * k as f64 * df;
            let (c, s) = t.iter().zip(v).fold((0.0, 0.0), |(c, s), (&ti, &vi)| (c + vi * (w * ti).cos(), s + vi * (w * ti).sin()));
            c * c + s * s
        })
        .collect();
    // skip the lowest bins: fewer than three extrema in the record
    let first = (1.5 / span / df).ceil() as usize;
    let (k, &p) = power.iter().enumerate().skip(first.saturating_sub(1)).max_by(|a, b| a.1.total_cmp(b.1)).unwrap_or((0, &0.0));
    let mut sorted = power.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    (2.0 * std::f64::consts::PI * (k + 1) as f64 * df, p / median.max(f64::MIN_POSITIVE))
}

/// Damped Rabi oscillation fit with the frequency seeded from the
/// spectrum of the detrended data and refined from five starts.
pub fn fit_rabi(t: &[f64], y: &[f64], weighting: Weighting) -> Result<RabiFit> {
    check_data(t, y, 12)?;
    let n = t.len();
    let span = t[n - 1] - t[0];
    let scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    // trend: B(1 − e^(−t/T)) + c
    let trend = {
        let yn: Vec<f64> = y.iter().map(|v| v / scale).collect();
        let end = mean(&yn[n - n.div_ceil(5)..]);
        let sol = run(&Exponential, t, &yn, Weighting::Uniform, &[-end, span / 3.0, end], &[true; 3]);
        sol.map(|s| s.params).unwrap_or([0.0, span, mean(&yn)].to_vec())
    };
    let resid: Vec<f64> = t.iter().zip(y).map(|(&ti, &yi)| yi / scale - (trend[0] * (-ti / trend[1]).exp() + trend[2])).collect();
    let rms = (resid.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt();
    let (omega0, contrast) = dominant_frequency(t, &resid);
    if rms < 1e-9 || contrast < 20.0 {
        return Err(Error::NoOscillation);
    }
    let pp = resid.iter().copied().fold(f64::NEG_INFINITY, f64::max) - resid.iter().copied().fold(f64::INFINITY, f64::min);
    let b0 = (trend[2] * scale).max(0.0);
    let t2 = trend[1].abs().clamp(span / 50.0, 100.0 * span);
    let mut best: Option<lm::Solution> = None;
    for (f, d) in [(1.0, 1.0), (0.97, 0.5), (1.03, 2.0), (0.9, 1.0), (1.1, 1.0)] {
        let start = [pp * scale, omega0 * f, span * d, b0, t2];
        if let Ok(s) = run(&Rabi, t, y, weighting, &start, &[true; 5]) {
            if best.as_ref().is_none_or(|b| s.cost < b.cost) {
                best = Some(s);
            }
        }
    }
    // an undamped trace drives both decay times to infinity, which the free
    // fit cannot reach; pin them far beyond the record instead
    for f in [1.0, 0.97, 1.03] {
        let start = [pp * scale, omega0 * f, 1e6 * span, 0.0, 1e6 * span];
        if let Ok(s) = run(&Rabi, t, y, weighting, &start, &[true, true, false, false, false]) {
            if best.as_ref().is_none_or(|b| s.cost < b.cost) {
                best = Some(s);
            }
        }
    }
    let sol = best.ok_or(Error::NonConvergence { iterations: MAX_ITER, reason: "no Rabi start converged".into() })?;
    let p = RabiModelParams { amplitude: sol.params[0], omega_r: sol.params[1], t_c1: sol.params[2], background: sol.params[3], t_c2: sol.params[4] };
    let e = RabiModelParams { amplitude: sol.errors[0], omega_r: sol.errors[1], t_c1: sol.errors[2], background: sol.errors[3], t_c2: sol.errors[4] };
    let fit = FitResult::new(&[("amplitude", "y"), ("omega_r", "rad/s"), ("t_c1", "s"), ("background", "y"), ("t_c2", "s")], sol);
    Ok(RabiFit { params: p, errors: e, fit })
}

/// Coupling from a Rabi frequency driven by `n_bar` intracavity photons.
pub fn g0_from_rabi(omega_r: f64, n_bar: f64) -> Result<f64> {
    check("n_bar", n_bar, n_bar > 0.0, "must be > 0")?;
    Ok(omega_r / (2.0 * n_bar.sqrt()))
}

/// Coupling of a resonant spin with radiative rate `gamma_r`.
pub fn g0_from_purcell(gamma_r: f64, kappa: f64) -> Result<f64> {
    check("gamma_r", gamma_r, gamma_r > 0.0, "must be > 0")?;
    check("kappa", kappa, kappa > 0.0, "must be > 0")?;
    Ok((kappa * gamma_r).sqrt() / 2.0)
}

/// Amplitude of a sine `a·sin(k·x + φ) + c` through `(x, y)`, used to
/// locate where a fitted quantity changes sign across an angle sweep.
/// Returns `(a, φ, c)`; `k` is fixed.
pub fn fit_sine(x: &[f64], y: &[f64], k: f64) -> Result<(f64, f64, f64)> {
    check_data(x, y, 3)?;
    // linear in (a cos φ, a sin φ, c)
    let m = nalgebra::DMatrix::from_fn(x.len(), 3, |i, j| match j {
        0 => (k * x[i]).sin(),
        1 => (k * x[i]).cos(),
        _ => 1.0,
    });
    let b = nalgebra::DVector::from_column_slice(y);
    let sol = m.svd(true, true).solve(&b, 1e-12).map_err(|e| invalid("data", e))?;
    let (ac, as_) = (sol[0], sol[1]);
    Ok((ac.hypot(as_), as_.atan2(ac), sol[2]))
}

#[cfg(test)]
mod tests;
