//! PDE against the two-delay equation it reduces to when the wind forcing is
//! a point source and there is no eastern reflection.
//!
//! Along characteristics the thermocline at `x_E` is the forcing history
//! seen through two lags: the direct Kelvin path `x_E - x_w` and the Rossby
//! path `y_n^2 x_w + x_E` (west and back). The Rossby density is stretched
//! by `y_n^2` in the lag, so a unit point source contributes `y_n^2` times
//! the pointwise weight. Both coefficients use `c_h*(x_E)` and the damping
//! accumulated over their own lag.

use enso_mz::dde::{self, DelayModel, History, ModelKind, RawDelayParams};
use enso_mz::pde::{InitialBump, PdeModel, RunOptions, WindForcing};
use enso_mz::{Error, PhysicalParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    pub n: usize,
    pub sigmas: Vec<f64>,
    /// End of the comparison window; three long delays when unset.
    pub t_end: Option<f64>,
    pub linear: bool,
    pub dde_dt: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { n: 2048, sigmas: vec![0.04, 0.02, 0.01], t_end: None, linear: true, dde_dt: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaResult {
    pub sigma_w: f64,
    /// Relative max-norm difference over `[d, t_end]`.
    pub discrepancy: f64,
    /// Same with the collapsed-model coefficients and lags measured to `x = 1`.
    pub printed_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub options: ValidationOptions,
    pub raw: RawDelayParams,
    pub printed: RawDelayParams,
    pub t_end: f64,
    pub results: Vec<SigmaResult>,
    /// Least-squares slope of `log discrepancy` against `log sigma_w`.
    pub rate: f64,
    /// Discrepancy strictly decreases as `sigma_w` shrinks.
    pub monotone: bool,
}

/// Two-delay coefficients of the exact reduction at the coupling point.
pub fn reduction_coefficients(p: &PhysicalParams, linear: bool) -> enso_mz::Result<RawDelayParams> {
    p.validate()?;
    let (c_t, c_h) = p.local_coeffs(p.x_e)?;
    let y2 = p.y_n * p.y_n;
    let rt = p.round_trip();
    let eps0 = p.eps0();
    let d_short = p.x_e - p.x_w;
    let d = p.x_e + y2 * p.x_w;
    if d_short <= 0.0 {
        return Err(Error::InvalidParameter { name: "x_w", reason: "wind patch must lie west of x_E".into() });
    }
    Ok(RawDelayParams {
        c_t,
        c_short: p.mu * p.a0 * (1.0 - p.theta / rt) * c_h * (-eps0 * d_short).exp(),
        c_long: p.mu * p.a0 * p.theta * (p.a_rw() / rt) * c_h * (-eps0 * d).exp(),
        beta: if linear { 0.0 } else { p.beta() },
        d_short,
        d,
    })
}

fn printed_coefficients(p: &PhysicalParams, linear: bool) -> enso_mz::Result<RawDelayParams> {
    let (c_t, c_h) = p.local_coeffs(p.x_e)?;
    let y2 = p.y_n * p.y_n;
    let rt = p.round_trip();
    let eps0 = p.eps0();
    let d_short = 1.0 - p.x_w;
    let d = 1.0 + y2 * p.x_w;
    Ok(RawDelayParams {
        c_t,
        c_short: p.mu * p.a0 * (1.0 - p.theta / rt) * c_h * (-eps0 * d_short).exp(),
        c_long: p.mu * p.a0 * (p.theta / y2) * (p.a_rw() / rt) * c_h * (-eps0 * d).exp(),
        beta: if linear { 0.0 } else { p.beta() },
        d_short,
        d,
    })
}

fn compare(
    raw: &RawDelayParams,
    linear: bool,
    te: &[f64],
    dt: f64,
    t_end: f64,
    dde_dt: f64,
) -> enso_mz::Result<f64> {
    let kind = if linear { ModelKind::LinearTwoDelay } else { ModelKind::VocTwoDelay };
    let model = DelayModel::raw(kind, *raw)?;
    let start = raw.d.max(raw.d_short);
    let k0 = (start / dt).ceil() as usize;
    let t0 = k0 as f64 * dt;
    // the delay equation starts at t0 with the PDE record as history
    let history = History::Sampled { start: -t0, dt, values: te[..=k0].to_vec() };
    let traj = dde::integrate(&model, &history, t_end - t0, dde_dt)?;
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for (k, v) in te.iter().enumerate().skip(k0) {
        let t = k as f64 * dt;
        if t > t_end + 1e-12 {
            break;
        }
        err = err.max((v - traj.eval(t - t0)).abs());
        scale = scale.max(v.abs());
    }
    Ok(if scale == 0.0 { err } else { err / scale })
}

pub fn validate_reduction(p: &PhysicalParams, opts: &ValidationOptions) -> enso_mz::Result<ValidationReport> {
    if p.r_e != 0.0 {
        return Err(Error::InvalidParameter { name: "r_E", reason: "the reduction assumes no eastern reflection".into() });
    }
    if opts.sigmas.is_empty() {
        return Err(Error::InvalidParameter { name: "sigmas", reason: "need at least one width".into() });
    }
    let raw = reduction_coefficients(p, opts.linear)?;
    let printed = printed_coefficients(p, opts.linear)?;
    let t_end = opts.t_end.unwrap_or(3.0 * raw.d);
    if t_end <= raw.d {
        return Err(Error::InvalidParameter { name: "t_end", reason: "must exceed the long delay".into() });
    }
    let mut results = Vec::with_capacity(opts.sigmas.len());
    for &sigma_w in &opts.sigmas {
        let forcing = WindForcing::from_params(p, sigma_w)?;
        let model = PdeModel::new(p, forcing, opts.n, !opts.linear)?;
        let run = model.run(model.initial_state(InitialBump::default()), t_end, &RunOptions::default())?;
        let discrepancy = compare(&raw, opts.linear, &run.te_east, run.dt, t_end, opts.dde_dt)?;
        let printed_discrepancy = compare(&printed, opts.linear, &run.te_east, run.dt, t_end, opts.dde_dt)?;
        log::info!("sigma_w {sigma_w}: discrepancy {discrepancy:.3e} (collapsed coefficients {printed_discrepancy:.3e})");
        results.push(SigmaResult { sigma_w, discrepancy, printed_discrepancy });
    }
    let mut sorted = results.clone();
    sorted.sort_by(|a, b| b.sigma_w.partial_cmp(&a.sigma_w).unwrap());
    let monotone = sorted.windows(2).all(|w| w[1].discrepancy < w[0].discrepancy);
    Ok(ValidationReport { options: opts.clone(), raw, printed, t_end, rate: log_slope(&results), results, monotone })
}

fn log_slope(r: &[SigmaResult]) -> f64 {
    let pts: Vec<(f64, f64)> = r
        .iter()
        .filter(|s| s.discrepancy > 0.0)
        .map(|s| (s.sigma_w.ln(), s.discrepancy.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
