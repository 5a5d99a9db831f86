//! Scalar delay models and a fixed-step method-of-steps integrator.
//!
//! The integrator is classical RK4 with cubic Hermite dense output. The step
//! is chosen so that every delay is an integer number of steps; delayed
//! values then fall on nodes or segment midpoints of already completed
//! segments and derivative jumps propagated from `t = 0` land on nodes.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::params::ScaledParams;
use crate::{Error, Result};

/// Blow-up threshold for `|T|`.
pub const BLOW_UP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ss,
    Voc,
    Mz,
    #[serde(rename = "linear2")]
    LinearTwoDelay,
    #[serde(rename = "voc2")]
    VocTwoDelay,
}

impl ModelKind {
    pub const SCALED: [ModelKind; 3] = [ModelKind::Ss, ModelKind::Voc, ModelKind::Mz];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ss => "ss",
            ModelKind::Voc => "voc",
            ModelKind::Mz => "mz",
            ModelKind::LinearTwoDelay => "linear2",
            ModelKind::VocTwoDelay => "voc2",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ss" => Ok(ModelKind::Ss),
            "voc" => Ok(ModelKind::Voc),
            "mz" => Ok(ModelKind::Mz),
            "linear2" | "linear-two-delay" => Ok(ModelKind::LinearTwoDelay),
            "voc2" | "voc-two-delay" => Ok(ModelKind::VocTwoDelay),
            _ => Err(Error::InvalidParameter { name: "model", reason: format!("unknown model `{s}`") }),
        }
    }
}

/// Unscaled coefficients of the two-delay models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawDelayParams {
    /// Local damping `c_T(x_E)`.
    pub c_t: f64,
    /// Short-delay (positive) feedback strength.
    pub c_short: f64,
    /// Long-delay (negative) feedback strength.
    pub c_long: f64,
    pub beta: f64,
    pub d_short: f64,
    pub d: f64,
}

impl RawDelayParams {
    pub fn from_scaled(s: &ScaledParams) -> Self {
        Self { c_t: s.ct_e, c_short: s.cs_star, c_long: s.cl_star, beta: s.beta, d_short: s.d_short, d: s.d }
    }

    /// Scaled `(alpha, gamma, delta)` obtained by collapsing the short delay.
    pub fn collapsed(&self) -> (f64, f64, f64) {
        let g = self.c_short - self.c_t;
        (self.c_long / g, g / self.c_short, g * self.d)
    }

    /// Factor turning a raw temperature into the scaled one of the collapsed model.
    pub fn temperature_scale(&self) -> f64 {
        (self.beta * self.c_short / (self.c_short - self.c_t)).sqrt()
    }

    /// Time unit of the collapsed model in raw time units.
    pub fn time_scale(&self) -> f64 {
        1.0 / (self.c_short - self.c_t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DelayModel {
    Ss {
        alpha: f64,
        delta: f64,
    },
    Voc {
        alpha: f64,
        gamma: f64,
        delta: f64,
    },
    Mz {
        alpha: f64,
        gamma: f64,
        delta: f64,
    },
    #[serde(rename = "linear2")]
    LinearTwoDelay(RawDelayParams),
    #[serde(rename = "voc2")]
    VocTwoDelay(RawDelayParams),
}

impl DelayModel {
    /// One of the scaled models; `gamma` is ignored for SS.
    pub fn scaled(kind: ModelKind, alpha: f64, gamma: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter { name: "delta", reason: "must be positive".into() });
        }
        match kind {
            ModelKind::Ss => Ok(DelayModel::Ss { alpha, delta }),
            ModelKind::Voc => Ok(DelayModel::Voc { alpha, gamma, delta }),
            ModelKind::Mz => Ok(DelayModel::Mz { alpha, gamma, delta }),
            _ => Err(Error::InvalidParameter { name: "model", reason: format!("{kind} needs raw parameters") }),
        }
    }

    pub fn raw(kind: ModelKind, raw: RawDelayParams) -> Result<Self> {
        if !(raw.d > 0.0 && raw.d_short >= 0.0 && raw.d_short <= raw.d) {
            return Err(Error::InvalidParameter { name: "d", reason: "need 0 <= d_short <= d, d > 0".into() });
        }
        match kind {
            ModelKind::LinearTwoDelay => Ok(DelayModel::LinearTwoDelay(raw)),
            ModelKind::VocTwoDelay => Ok(DelayModel::VocTwoDelay(raw)),
            _ => Err(Error::InvalidParameter { name: "model", reason: format!("{kind} takes scaled parameters") }),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            DelayModel::Ss { .. } => ModelKind::Ss,
            DelayModel::Voc { .. } => ModelKind::Voc,
            DelayModel::Mz { .. } => ModelKind::Mz,
            DelayModel::LinearTwoDelay(_) => ModelKind::LinearTwoDelay,
            DelayModel::VocTwoDelay(_) => ModelKind::VocTwoDelay,
        }
    }

    pub fn lags(&self) -> Vec<f64> {
        match *self {
            DelayModel::Ss { delta, .. } | DelayModel::Voc { delta, .. } | DelayModel::Mz { delta, .. } => vec![delta],
            DelayModel::LinearTwoDelay(r) | DelayModel::VocTwoDelay(r) => vec![r.d_short, r.d],
        }
    }

    pub fn max_delay(&self) -> f64 {
        self.lags().into_iter().fold(0.0, f64::max)
    }

    /// Right-hand side given the current value and the delayed values in
    /// the order of [`DelayModel::lags`].
    #[inline]
    pub fn rhs(&self, x: f64, delayed: &[f64]) -> f64 {
        match *self {
            DelayModel::Ss { alpha, .. } => x - x * x * x - alpha * delayed[0],
            DelayModel::Voc { alpha, gamma, .. } => x - x * x * x - alpha * delayed[0] * (1.0 - gamma * x * x),
            DelayModel::Mz { alpha, gamma, .. } => {
                let xd = delayed[0];
                x - x * x * x - alpha * xd * (1.0 - gamma * xd * xd)
            }
            DelayModel::LinearTwoDelay(r) => -r.c_t * x + r.c_short * delayed[0] - r.c_long * delayed[1],
            DelayModel::VocTwoDelay(r) => {
                -r.c_t * x + (1.0 - r.beta * x * x) * (r.c_short * delayed[0] - r.c_long * delayed[1])
            }
        }
    }
}

/// Initial function on `[-max_delay, 0]`.
#[derive(Clone)]
pub enum History {
    Constant(f64),
    /// Uniform samples starting at `start` with spacing `dt`, linearly interpolated
    /// and held constant beyond either end.
    Sampled { start: f64, dt: f64, values: Vec<f64> },
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            History::Constant(v) => write!(f, "Constant({v})"),
            History::Sampled { start, dt, values } => {
                write!(f, "Sampled {{ start: {start}, dt: {dt}, len: {} }}", values.len())
            }
            History::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl History {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            History::Constant(v) => *v,
            History::Sampled { start, dt, values } => {
                let s = (t - start) / dt;
                if s <= 0.0 {
                    return values[0];
                }
                let last = values.len() - 1;
                if s >= last as f64 {
                    return values[last];
                }
                let i = s.floor() as usize;
                let u = s - i as f64;
                (1.0 - u) * values[i] + u * values[i + 1]
            }
            History::Function(f) => f(t),
        }
    }

    pub fn negated(&self) -> History {
        match self {
            History::Constant(v) => History::Constant(-v),
            History::Sampled { start, dt, values } => {
                History::Sampled { start: *start, dt: *dt, values: values.iter().map(|v| -v).collect() }
            }
            History::Function(f) => {
                let f = Arc::clone(f);
                History::Function(Arc::new(move |t| -f(t)))
            }
        }
    }
}

/// Piecewise cubic Hermite record on the uniform nodes `t0 + k dt`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
    pub history: Option<History>,
}

impl Trajectory {
    /// Samples with finite-difference slopes (Catmull-Rom style).
    pub fn from_samples(t0: f64, dt: f64, values: Vec<f64>) -> Self {
        let n = values.len();
        let slopes = (0..n)
            .map(|k| match (k, n) {
                (_, 1) => 0.0,
                (0, _) => (values[1] - values[0]) / dt,
                (k, n) if k == n - 1 => (values[k] - values[k - 1]) / dt,
                (k, _) => (values[k + 1] - values[k - 1]) / (2.0 * dt),
            })
            .collect();
        Self { t0, dt, values, slopes, history: None }
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.values.len() - 1)
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| self.time(k))
    }

    /// Dense evaluation; before `t0` the history (if any) is used.
    pub fn eval(&self, t: f64) -> f64 {
        if t < self.t0 {
            if let Some(h) = &self.history {
                return h.eval(t - self.t0);
            }
            return self.values[0];
        }
        let s = (t - self.t0) / self.dt;
        let last = self.values.len() - 1;
        if s >= last as f64 {
            return self.values[last];
        }
        let mut i = s.floor() as usize;
        let mut u = s - i as f64;
        if u > 1.0 - 1e-12 {
            i += 1;
            u = 0.0;
        }
        if u < 1e-12 {
            return self.values[i];
        }
        self.hermite(i, u)
    }

    #[inline]
    fn hermite(&self, i: usize, u: f64) -> f64 {
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.dt, self.slopes[i + 1] * self.dt);
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * y0 + (u3 - 2.0 * u2 + u) * m0 + (-2.0 * u3 + 3.0 * u2) * y1 + (u3 - u2) * m1
    }

    /// Extremes of the Hermite segment `i` (local parameter in `[0, 1]`).
    fn segment_range(&self, i: usize) -> (f64, f64) {
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.dt, self.slopes[i + 1] * self.dt);
        // p'(u) = a u^2 + b u + c
        let a = 6.0 * y0 + 3.0 * m0 - 6.0 * y1 + 3.0 * m1;
        let b = -6.0 * y0 - 4.0 * m0 + 6.0 * y1 - 2.0 * m1;
        let c = m0;
        let mut lo = y0.min(y1);
        let mut hi = y0.max(y1);
        let mut consider = |u: f64| {
            if u > 0.0 && u < 1.0 {
                let v = self.hermite(i, u);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        };
        if a.abs() < 1e-14 {
            if b.abs() > 1e-14 {
                consider(-c / b);
            }
        } else {
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let r = disc.sqrt();
                consider((-b + r) / (2.0 * a));
                consider((-b - r) / (2.0 * a));
            }
        }
        (lo, hi)
    }

    fn window_start(&self, transient_fraction: f64) -> usize {
        let n = self.values.len() - 1;
        ((transient_fraction.clamp(0.0, 1.0) * n as f64).floor() as usize).min(n.saturating_sub(1))
    }

    /// Evenly resampled values at spacing `dt_out` from `t0` to the end.
    pub fn resample(&self, dt_out: f64) -> Vec<(f64, f64)> {
        let n = ((self.t_end() - self.t0) / dt_out + 1e-9).floor() as usize;
        (0..=n)
            .map(|k| {
                let t = self.t0 + k as f64 * dt_out;
                (t, self.eval(t))
            })
            .collect()
    }
}

/// Largest step `<= dt_request` making every positive lag an integer number
/// of steps; falls back to a step dividing the longest lag.
pub fn aligned_step(lags: &[f64], dt_request: f64) -> f64 {
    let positive: Vec<f64> = lags.iter().copied().filter(|l| *l > 0.0).collect();
    let Some(&longest) = positive.iter().max_by(|a, b| a.total_cmp(b)) else {
        return dt_request;
    };
    let shortest = positive.iter().copied().fold(f64::INFINITY, f64::min);
    let n0 = (longest / dt_request).ceil().max(1.0) as usize;
    for n in n0..=64 * n0 {
        let h = longest / n as f64;
        let ok = positive.iter().all(|l| {
            let r = l / h;
            (r - r.round()).abs() < 1e-9 * r.max(1.0)
        });
        if ok {
            return h;
        }
    }
    let h = longest / (longest / dt_request.min(shortest)).ceil();
    log::warn!("no common step divides lags {positive:?}; using {h} (delays off-grid)");
    h
}

/// Integrates `model` from `t = 0` to at least `t_end`.
pub fn integrate(model: &DelayModel, history: &History, t_end: f64, dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter { name: "dt", reason: "must be positive".into() });
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter { name: "t_end", reason: "must be non-negative".into() });
    }
    let lags = model.lags();
    let h = aligned_step(&lags, dt);
    let steps = (t_end / h - 1e-9).ceil().max(0.0) as usize;

    let mut values = Vec::with_capacity(steps + 1);
    let mut slopes = Vec::with_capacity(steps + 1);
    let y0 = history.eval(0.0);
    let mut delayed = vec![0.0; lags.len()];

    let lookup = |values: &[f64], slopes: &[f64], s: f64, current: f64, lag: f64| -> f64 {
        if lag == 0.0 {
            return current;
        }
        if s <= 0.0 {
            return history.eval(s);
        }
        let r = s / h;
        let mut i = r.floor() as usize;
        let mut u = r - i as f64;
        if u > 1.0 - 1e-9 {
            i += 1;
            u = 0.0;
        }
        if u < 1e-9 {
            return values[i];
        }
        let (a, b) = (values[i], values[i + 1]);
        let (m0, m1) = (slopes[i] * h, slopes[i + 1] * h);
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * a + (u3 - 2.0 * u2 + u) * m0 + (-2.0 * u3 + 3.0 * u2) * b + (u3 - u2) * m1
    };

    for (j, &lag) in lags.iter().enumerate() {
        delayed[j] = lookup(&values, &slopes, -lag, y0, lag);
    }
    values.push(y0);
    slopes.push(model.rhs(y0, &delayed));

    for k in 0..steps {
        let t = k as f64 * h;
        let y = values[k];
        let k1 = slopes[k];
        let mid = y + 0.5 * h * k1;
        for (j, &lag) in lags.iter().enumerate() {
            delayed[j] = lookup(&values, &slopes, t + 0.5 * h - lag, mid, lag);
        }
        let k2 = model.rhs(mid, &delayed);
        let mid2 = y + 0.5 * h * k2;
        if lags.contains(&0.0) {
            for (j, &lag) in lags.iter().enumerate() {
                delayed[j] = lookup(&values, &slopes, t + 0.5 * h - lag, mid2, lag);
            }
        }
        let k3 = model.rhs(mid2, &delayed);
        let end = y + h * k3;
        for (j, &lag) in lags.iter().enumerate() {
            delayed[j] = lookup(&values, &slopes, t + h - lag, end, lag);
        }
        let k4 = model.rhs(end, &delayed);
        let next = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let t_next = (k + 1) as f64 * h;
        if !next.is_finite() || next.abs() > BLOW_UP {
            return Err(Error::BlowUp { t: t_next, last_valid: t, bound: BLOW_UP });
        }
        for (j, &lag) in lags.iter().enumerate() {
            delayed[j] = lookup(&values, &slopes, t_next - lag, next, lag);
        }
        values.push(next);
        slopes.push(model.rhs(next, &delayed));
    }
    Ok(Trajectory { t0: 0.0, dt: h, values, slopes, history: Some(history.clone()) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Oscillating,
    Equilibrium,
    NonPeriodic,
    /// Too few crossings in the analysis window.
    Insufficient,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Oscillating => "oscillating",
            Classification::Equilibrium => "equilibrium",
            Classification::NonPeriodic => "non_periodic",
            Classification::Insufficient => "insufficient",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodEstimate {
    pub classification: Classification,
    /// Mean crossing spacing; set for oscillating and non-periodic signals.
    pub mean_spacing: Option<f64>,
    /// Standard deviation over mean of the crossing spacings.
    pub spacing_cv: f64,
    pub crossings: usize,
    pub amplitude: f64,
}

impl PeriodEstimate {
    pub fn period(&self) -> Option<f64> {
        match self.classification {
            Classification::Oscillating => self.mean_spacing,
            _ => None,
        }
    }
}

/// Period from upward crossings of the mean-subtracted signal after the
/// leading `transient_fraction` of the run.
pub fn measure_period(traj: &Trajectory, transient_fraction: f64) -> PeriodEstimate {
    let start = traj.window_start(transient_fraction);
    let last = traj.values.len() - 1;
    let amp = amplitude(traj, transient_fraction);
    let mut est = PeriodEstimate {
        classification: Classification::Equilibrium,
        mean_spacing: None,
        spacing_cv: 0.0,
        crossings: 0,
        amplitude: amp,
    };
    if amp < 1e-6 {
        return est;
    }
    // decaying oscillations count as converging to equilibrium
    let third = (last - start) / 3;
    if third >= 2 {
        let first = range_of(traj, start, start + third);
        let final_ = range_of(traj, last - third, last);
        if final_ < 0.9 * first {
            return est;
        }
    }

    let v = &traj.values[start..=last];
    let mean = if v.len() > 1 {
        let s: f64 = v.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum();
        s / (v.len() - 1) as f64
    } else {
        v[0]
    };
    let mut crossings = Vec::new();
    for i in start..last {
        let a = traj.values[i] - mean;
        let b = traj.values[i + 1] - mean;
        if a < 0.0 && b >= 0.0 {
            crossings.push(traj.time(i) + traj.dt * refine_crossing(traj, i, mean));
        }
    }
    est.crossings = crossings.len();
    if crossings.len() < 3 {
        est.classification = Classification::Insufficient;
        return est;
    }
    let spacings: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
    let m = spacings.iter().sum::<f64>() / spacings.len() as f64;
    let var = spacings.iter().map(|s| (s - m).powi(2)).sum::<f64>() / spacings.len() as f64;
    est.mean_spacing = Some(m);
    est.spacing_cv = var.sqrt() / m;
    est.classification =
        if est.spacing_cv > 0.05 { Classification::NonPeriodic } else { Classification::Oscillating };
    est
}

fn range_of(traj: &Trajectory, a: usize, b: usize) -> f64 {
    let s = &traj.values[a..=b];
    let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

fn refine_crossing(traj: &Trajectory, i: usize, level: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if traj.hermite(i, mid) - level < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Half peak-to-peak amplitude after the leading `transient_fraction`.
pub fn amplitude(traj: &Trajectory, transient_fraction: f64) -> f64 {
    let start = traj.window_start(transient_fraction);
    let last = traj.values.len() - 1;
    if last == 0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in start..last {
        let (a, b) = traj.segment_range(i);
        lo = lo.min(a);
        hi = hi.max(b);
    }
    0.5 * (hi - lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sine(period: f64, amp: f64, t_end: f64, dt: f64) -> Trajectory {
        let n = (t_end / dt).round() as usize;
        let w = 2.0 * PI / period;
        Trajectory {
            t0: 0.0,
            dt,
            values: (0..=n).map(|k| amp * (w * k as f64 * dt).sin()).collect(),
            slopes: (0..=n).map(|k| amp * w * (w * k as f64 * dt).cos()).collect(),
            history: None,
        }
    }

    #[test]
    fn step_divides_every_lag() {
        let h = aligned_step(&[4.8], 0.01);
        assert!((4.8 / h - 480.0).abs() < 1e-9);
        let h = aligned_step(&[0.4, 3.4], 0.01);
        assert!(h <= 0.01 && ((3.4 / h).round() - 3.4 / h).abs() < 1e-9);
        let h = aligned_step(&[4.326_335_177_998_98], 0.01);
        assert!(h <= 0.01 && h > 0.0099);
        assert_eq!(aligned_step(&[0.0, 2.0], 0.1), 0.1);
    }

    #[test]
    fn ss_without_feedback_reaches_unit_equilibrium() {
        let m = DelayModel::scaled(ModelKind::Ss, 0.0, 0.0, 1.0).unwrap();
        let tr = integrate(&m, &History::Constant(0.5), 20.0, 0.01).unwrap();
        assert!((tr.values.last().unwrap() - 1.0).abs() < 1e-8);
        // logistic-cubic closed form x^2 = 1 / (1 + (1/x0^2 - 1) e^{-2t})
        let t = 1.0f64;
        let exact = (1.0 / (1.0 + 3.0 * (-2.0f64 * t).exp())).sqrt();
        assert!((tr.eval(t) - exact).abs() < 1e-9);
    }

    #[test]
    fn equilibrium_history_stays_put() {
        let (alpha, gamma) = (0.93f64, 0.49);
        let t0 = ((1.0 - alpha) / (1.0 - alpha * gamma)).sqrt();
        for kind in [ModelKind::Voc, ModelKind::Mz] {
            let m = DelayModel::scaled(kind, alpha, gamma, 4.8).unwrap();
            let tr = integrate(&m, &History::Constant(t0), 30.0, 0.01).unwrap();
            assert!(tr.values.iter().all(|v| (v - t0).abs() < 1e-10), "{kind}");
        }
        let m = DelayModel::scaled(ModelKind::Ss, 0.5, 0.0, 2.0).unwrap();
        let tr = integrate(&m, &History::Constant(0.5f64.sqrt()), 30.0, 0.01).unwrap();
        assert!(tr.values.iter().all(|v| (v - 0.5f64.sqrt()).abs() < 1e-10));
    }

    #[test]
    fn fig3_voc_oscillates() {
        let m = DelayModel::scaled(ModelKind::Voc, 0.93, 0.49, 4.8).unwrap();
        let tr = integrate(&m, &History::Constant(0.1), 40.0 * 4.8, 0.01).unwrap();
        let est = measure_period(&tr, 0.5);
        assert_eq!(est.classification, Classification::Oscillating);
        assert!(est.period().unwrap() > 4.8);
    }

    #[test]
    fn below_trivial_hopf_decays() {
        // alpha = 1.2: trivial Hopf at delta = acos(1/1.2)/sqrt(0.44)
        let m = DelayModel::scaled(ModelKind::Voc, 1.2, 0.49, 0.6).unwrap();
        let tr = integrate(&m, &History::Constant(0.1), 200.0, 0.01).unwrap();
        let est = measure_period(&tr, 0.5);
        assert_eq!(est.period(), None);
        assert_eq!(est.classification, Classification::Equilibrium);
    }

    #[test]
    fn blow_up_reports_last_valid_time() {
        let r = RawDelayParams { c_t: -5.0, c_short: 0.0, c_long: 0.0, beta: 0.0, d_short: 0.5, d: 1.0 };
        let m = DelayModel::raw(ModelKind::LinearTwoDelay, r).unwrap();
        match integrate(&m, &History::Constant(1.0), 10.0, 0.01) {
            Err(Error::BlowUp { t, last_valid, bound }) => {
                assert_eq!(bound, BLOW_UP);
                assert!(last_valid < t && (t - (1e6f64).ln() / 5.0).abs() < 0.05);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn synthetic_sine_period_and_amplitude() {
        let tr = sine(3.7, 2.0, 100.0, 0.01);
        let est = measure_period(&tr, 0.3);
        assert!((est.period().unwrap() - 3.7).abs() < 1e-6);
        assert!((amplitude(&tr, 0.3) - 2.0).abs() < 1e-6);
        let flat = Trajectory::from_samples(0.0, 0.1, vec![0.3; 50]);
        assert_eq!(amplitude(&flat, 0.5), 0.0);
        assert_eq!(measure_period(&flat, 0.5).classification, Classification::Equilibrium);
    }

    #[test]
    fn irregular_crossings_are_flagged() {
        // two incommensurate tones of equal strength
        let n = 20_000;
        let dt = 0.01;
        let v: Vec<f64> = (0..=n).map(|k| {
            let t = k as f64 * dt;
            t.sin() + (2f64.sqrt() * 1.7 * t).sin()
        }).collect();
        let tr = Trajectory::from_samples(0.0, dt, v);
        assert_eq!(measure_period(&tr, 0.0).classification, Classification::NonPeriodic);
    }

    #[test]
    fn rk4_convergence_order() {
        let m = DelayModel::scaled(ModelKind::Voc, 0.93, 0.49, 4.8).unwrap();
        let h = History::Constant(0.1);
        let at = |dt: f64| integrate(&m, &h, 12.0, dt).unwrap().eval(12.0);
        let (a, b, c) = (at(0.08), at(0.04), at(0.02));
        let order = ((a - b) / (b - c)).abs().log2();
        assert!(order >= 3.5, "order {order}");
    }

    #[test]
    fn gamma_zero_models_agree_bitwise() {
        let h = History::Constant(0.1);
        let run = |k| integrate(&DelayModel::scaled(k, 0.93, 0.0, 4.8).unwrap(), &h, 100.0, 0.01).unwrap().values;
        let ss = run(ModelKind::Ss);
        assert_eq!(ss, run(ModelKind::Voc));
        assert_eq!(ss, run(ModelKind::Mz));
    }

    #[test]
    fn two_delay_voc_collapses_to_voc() {
        let raw = RawDelayParams { c_t: 1.327, c_short: 2.6, c_long: 1.455, beta: 1.0 / 64.0, d_short: 0.0, d: 3.4 };
        let (alpha, gamma, delta) = raw.collapsed();
        let ts = raw.temperature_scale();
        let tau = raw.time_scale();
        let two = integrate(&DelayModel::raw(ModelKind::VocTwoDelay, raw).unwrap(), &History::Constant(0.1 / ts), 20.0, 0.001).unwrap();
        let one = integrate(&DelayModel::scaled(ModelKind::Voc, alpha, gamma, delta).unwrap(), &History::Constant(0.1), 20.0 / tau, 0.001).unwrap();
        for k in 1..20 {
            let t = k as f64;
            assert!((two.eval(t) * ts - one.eval(t / tau)).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn sampled_history_interpolates_linearly() {
        let h = History::Sampled { start: -1.0, dt: 0.5, values: vec![0.0, 1.0, 3.0] };
        assert_eq!(h.eval(-0.75), 0.5);
        assert_eq!(h.eval(-2.0), 0.0);
        assert_eq!(h.eval(0.25), 3.0);
        assert_eq!(h.negated().eval(-0.25), -2.0);
    }

    #[test]
    fn model_names_round_trip() {
        for k in [ModelKind::Ss, ModelKind::Voc, ModelKind::Mz, ModelKind::LinearTwoDelay, ModelKind::VocTwoDelay] {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("foo".parse::<ModelKind>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn models_are_odd(alpha in 0.5f64..1.5, gamma in 0.0f64..0.9, delta in 0.5f64..6.0, x0 in -1.2f64..1.2, k in 0usize..3) {
            let m = DelayModel::scaled(ModelKind::SCALED[k], alpha, gamma, delta).unwrap();
            let h = History::Constant(x0);
            let a = integrate(&m, &h, 30.0, 0.02).unwrap();
            let b = integrate(&m, &h.negated(), 30.0, 0.02).unwrap();
            for (u, v) in a.values.iter().zip(&b.values) {
                prop_assert!((u + v).abs() < 1e-10);
            }
        }

        #[test]
        fn dense_output_matches_nodes(alpha in 0.5f64..1.5, delta in 1.0f64..5.0) {
            let m = DelayModel::scaled(ModelKind::Voc, alpha, 0.49, delta).unwrap();
            let tr = integrate(&m, &History::Constant(0.1), 20.0, 0.01).unwrap();
            for k in (0..tr.values.len()).step_by(37) {
                prop_assert_eq!(tr.eval(tr.time(k)), tr.values[k]);
            }
            prop_assert_eq!(tr.eval(-0.5), 0.1);
        }
    }
}
