//! Equilibria, linear stability and oscillation regimes of the scaled models.
//!
//! Linearizing any scaled model about an equilibrium gives the characteristic
//! equation `lambda = a + b exp(-lambda delta)`. Hopf points are where a root
//! sits on the imaginary axis. The oscillation boundary for `alpha < 1` and
//! the physical-parameter period sweeps are computed from simulations.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dde::{self, Classification, DelayModel, History, ModelKind};
use crate::numeric::brent;
use crate::params::PhysicalParams;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibria {
    pub values: Vec<f64>,
    pub alpha: f64,
    pub gamma: f64,
    /// `alpha == 1`, where the nontrivial pair merges into zero.
    pub pitchfork: bool,
    /// `alpha == 1/gamma`, where the nontrivial pair is undefined.
    pub singular: bool,
}

impl Equilibria {
    pub fn nontrivial(&self) -> Option<f64> {
        self.values.iter().copied().find(|v| *v > 0.0)
    }
}

/// Equilibria of the scaled VoC and MZ models (SS for `gamma = 0`).
pub fn equilibria(alpha: f64, gamma: f64) -> Result<Equilibria> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidParameter { name: "gamma", reason: "must lie in [0, 1)".into() });
    }
    let singular = gamma > 0.0 && alpha * gamma == 1.0;
    let pitchfork = alpha == 1.0;
    let mut values = vec![0.0];
    if singular {
        log::warn!("alpha = 1/gamma: nontrivial equilibria omitted");
    } else if !pitchfork {
        let r = (1.0 - alpha) / (1.0 - alpha * gamma);
        if r > 0.0 {
            let t = r.sqrt();
            values = vec![-t, 0.0, t];
        }
    }
    Ok(Equilibria { values, alpha, gamma, pitchfork, singular })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharCoeffs {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
}

impl CharCoeffs {
    /// Linearization about `T = 0`, shared by all scaled models.
    pub fn trivial(alpha: f64, delta: f64) -> Self {
        Self { a: 1.0, b: -alpha, delta }
    }

    /// Linearization about `T = +-T0` with `t0_sq = T0^2`.
    pub fn about(kind: ModelKind, alpha: f64, gamma: f64, t0_sq: f64, delta: f64) -> Self {
        let (a, b) = match kind {
            ModelKind::Voc => (1.0 - 3.0 * t0_sq + 2.0 * alpha * gamma * t0_sq, -alpha * (1.0 - gamma * t0_sq)),
            ModelKind::Mz => (1.0 - 3.0 * t0_sq, -alpha * (1.0 - 3.0 * gamma * t0_sq)),
            _ => (1.0 - 3.0 * t0_sq, -alpha),
        };
        Self { a, b, delta }
    }

    /// Linearization about the positive nontrivial equilibrium, if it exists.
    pub fn nontrivial(kind: ModelKind, alpha: f64, gamma: f64, delta: f64) -> Option<Self> {
        let g = if kind == ModelKind::Ss { 0.0 } else { gamma };
        let eq = equilibria(alpha, g).ok()?;
        let t0 = eq.nontrivial()?;
        Some(Self::about(kind, alpha, g, t0 * t0, delta))
    }

    pub fn residual(&self, lambda: Complex64) -> f64 {
        (lambda - self.a - self.b * (-lambda * self.delta).exp()).norm()
    }
}

/// Root of `lambda = a + b exp(-lambda delta)` with the largest real part
/// (the upper-half-plane member of a conjugate pair).
pub fn rightmost_root(c: &CharCoeffs) -> Result<Complex64> {
    if !(c.delta >= 0.0) {
        return Err(Error::InvalidParameter { name: "delta", reason: "must be non-negative".into() });
    }
    if c.b == 0.0 {
        return Ok(Complex64::new(c.a, 0.0));
    }
    if c.delta == 0.0 {
        return Ok(Complex64::new(c.a + c.b, 0.0));
    }
    let re_lo = c.a - c.b.abs() - 1.0;
    let re_hi = c.a + c.b.abs() + 1.0;
    let im_hi = 4.0 * std::f64::consts::PI / c.delta.max(1e-6);
    let (nr, ni) = (12, 24);
    let mut best: Option<Complex64> = None;
    for i in 0..=nr {
        for j in 0..=ni {
            let seed = Complex64::new(
                re_lo + (re_hi - re_lo) * i as f64 / nr as f64,
                im_hi * j as f64 / ni as f64,
            );
            if let Some(r) = newton(c, seed) {
                let r = Complex64::new(r.re, r.im.abs());
                if best.is_none_or(|b| r.re > b.re + 1e-12 || (r.re > b.re - 1e-12 && r.im < b.im)) {
                    best = Some(r);
                }
            }
        }
    }
    best.ok_or_else(|| {
        Error::NoConvergence(format!(
            "no characteristic root from seeds Re in [{re_lo}, {re_hi}], Im in [0, {im_hi}] for {c:?}"
        ))
    })
}

fn newton(c: &CharCoeffs, mut z: Complex64) -> Option<Complex64> {
    for _ in 0..100 {
        let e = (-z * c.delta).exp();
        let g = z - c.a - c.b * e;
        let dg = 1.0 + c.b * c.delta * e;
        if dg.norm() < 1e-300 {
            return None;
        }
        let step = g / dg;
        z -= step;
        if !z.re.is_finite() || !z.im.is_finite() || z.re < -1e3 {
            return None;
        }
        if step.norm() < 1e-15 * (1.0 + z.norm()) {
            break;
        }
    }
    (c.residual(z) < 1e-10).then_some(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Trivial,
    Nontrivial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfPoint {
    pub alpha: f64,
    pub delta: f64,
    pub omega: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfCurve {
    pub kind: ModelKind,
    pub gamma: f64,
    pub branch: Branch,
    pub points: Vec<HopfPoint>,
}

/// Hopf loci in the `(alpha, delta)` plane, one or more points per frequency
/// sample in `omega_range`. On the nontrivial branch points are sorted by `alpha`.
pub fn hopf_curve(kind: ModelKind, gamma: f64, branch: Branch, omega_range: (f64, f64), n_points: usize) -> HopfCurve {
    let (w_lo, w_hi) = omega_range;
    let omegas: Vec<f64> = if n_points <= 1 {
        vec![w_lo]
    } else {
        (0..n_points).map(|i| w_lo + (w_hi - w_lo) * i as f64 / (n_points - 1) as f64).collect()
    };
    let mut points = Vec::new();
    for w in omegas {
        if !(w > 0.0) {
            log::warn!("skipping non-positive Hopf frequency {w}");
            continue;
        }
        match branch {
            Branch::Trivial => {
                let alpha = (1.0 + w * w).sqrt();
                let delta = (1.0 / alpha).acos() / w;
                let c = CharCoeffs::trivial(alpha, delta);
                points.push(HopfPoint { alpha, delta, omega: w, residual: c.residual(Complex64::new(0.0, w)) });
            }
            Branch::Nontrivial => points.extend(nontrivial_hopf(kind, gamma, w)),
        }
    }
    if branch == Branch::Nontrivial {
        points.sort_by(|p, q| p.alpha.total_cmp(&q.alpha));
    }
    HopfCurve { kind, gamma, branch, points }
}

fn nontrivial_hopf(kind: ModelKind, gamma: f64, w: f64) -> Vec<HopfPoint> {
    let coeffs = |alpha: f64| CharCoeffs::nontrivial(kind, alpha, gamma, 1.0);
    let f = |alpha: f64| match coeffs(alpha) {
        Some(c) => c.b * c.b - c.a * c.a - w * w,
        None => f64::NAN,
    };
    let n = 400;
    let grid: Vec<f64> = (1..n).map(|i| i as f64 / n as f64).collect();
    let mut out = Vec::new();
    for pair in grid.windows(2) {
        let (fa, fb) = (f(pair[0]), f(pair[1]));
        if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
            continue;
        }
        let Ok(alpha) = brent(f, pair[0], pair[1], 1e-15, 200) else {
            log::warn!("Hopf bracket [{}, {}] failed at omega {w}", pair[0], pair[1]);
            continue;
        };
        let c = coeffs(alpha).expect("bracket inside existence range");
        let mut phase = (-w / c.b).atan2(-c.a / c.b);
        if phase <= 0.0 {
            phase += 2.0 * std::f64::consts::PI;
        }
        let delta = phase / w;
        let cd = CharCoeffs { delta, ..c };
        let residual = cd.residual(Complex64::new(0.0, w));
        if residual < 1e-10 {
            out.push(HopfPoint { alpha, delta, omega: w, residual });
        } else {
            log::warn!("Hopf point at omega {w} rejected, residual {residual}");
        }
    }
    if out.is_empty() {
        log::info!("no nontrivial Hopf bracket at omega {w}");
    }
    out
}

/// Simulation settings shared by the boundary search and the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub dt: f64,
    /// Run length in units of the delay.
    pub run_delays: f64,
    /// Lower bound on the run length.
    pub min_run: f64,
    pub transient_fraction: f64,
    /// Constant history; large values select the large-amplitude orbit.
    pub history: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self { dt: 0.01, run_delays: 60.0, min_run: 100.0, transient_fraction: 0.5, history: 1.5 }
    }
}

impl SimSettings {
    pub fn run(&self, model: &DelayModel) -> Result<dde::PeriodEstimate> {
        let t_end = (self.run_delays * model.max_delay()).max(self.min_run);
        let traj = dde::integrate(model, &History::Constant(self.history), t_end, self.dt)?;
        Ok(dde::measure_period(&traj, self.transient_fraction))
    }

    fn oscillates(&self, kind: ModelKind, alpha: f64, gamma: f64, delta: f64) -> Result<bool> {
        let est = self.run(&DelayModel::scaled(kind, alpha, gamma, delta)?)?;
        Ok(matches!(est.classification, Classification::Oscillating | Classification::NonPeriodic))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub alpha: f64,
    /// Delay separating equilibrium (below) from sustained oscillation (above).
    pub delta: Option<f64>,
    pub bracket: (f64, f64),
    /// Classification did not produce a usable bracket.
    pub flagged: bool,
}

/// Smallest delay with sustained oscillation for each `alpha < 1`, by
/// bisection on simulation outcomes.
pub fn oscillation_boundary(
    kind: ModelKind,
    gamma: f64,
    alphas: &[f64],
    settings: &SimSettings,
    tol: f64,
) -> Result<Vec<BoundaryPoint>> {
    alphas
        .par_iter()
        .map(|&alpha| {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::InvalidParameter { name: "alpha", reason: "boundary needs 0 < alpha < 1".into() });
            }
            boundary_at(kind, gamma, alpha, settings, tol)
        })
        .collect()
}

fn boundary_at(kind: ModelKind, gamma: f64, alpha: f64, s: &SimSettings, tol: f64) -> Result<BoundaryPoint> {
    let osc = |d: f64| s.oscillates(kind, alpha, gamma, d);
    let (mut lo, mut hi) = (1.0, 8.0);
    let mut flagged = false;
    while !osc(hi)? {
        if hi > 40.0 {
            flagged = true;
            break;
        }
        lo = hi;
        hi *= 1.5;
    }
    while !flagged && osc(lo)? {
        if lo < 0.05 {
            flagged = true;
            break;
        }
        hi = lo;
        lo *= 0.5;
    }
    if flagged {
        log::warn!("no oscillation bracket for {kind} at alpha {alpha}");
        return Ok(BoundaryPoint { alpha, delta: None, bracket: (lo, hi), flagged });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if osc(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(BoundaryPoint { alpha, delta: Some(0.5 * (lo + hi)), bracket: (lo, hi), flagged })
}

/// Inclusive range `lo, lo + step, ..., hi` without accumulated drift.
pub fn grid_range(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| ((lo + k as f64 * step) * 1e10).round() / 1e10).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: PhysicalParams,
    pub thetas: Vec<f64>,
    pub a0s: Vec<f64>,
    pub y_ns: Vec<f64>,
    pub models: Vec<ModelKind>,
    pub settings: SimSettings,
}

impl SweepSpec {
    /// The `theta`, `A0`, `y_n` ranges and steps used for the published sweeps.
    pub fn table1(base: PhysicalParams) -> Self {
        Self {
            base,
            thetas: grid_range(1.0, 4.0, 0.2),
            a0s: grid_range(0.1, 0.6, 0.05),
            y_ns: grid_range(1.4, 3.4, 0.2),
            models: vec![ModelKind::Ss, ModelKind::Voc],
            settings: SimSettings::default(),
        }
    }

    pub fn cell_count(&self) -> usize {
        self.thetas.len() * self.a0s.len() * self.y_ns.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelOutcome {
    pub kind: ModelKind,
    pub classification: Classification,
    pub period: Option<f64>,
    pub period_years: Option<f64>,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub theta: f64,
    pub a0: f64,
    pub y_n: f64,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub outcomes: Vec<ModelOutcome>,
    /// Set when scaling or integration failed for this cell.
    pub error: Option<String>,
}

impl SweepCell {
    pub fn outcome(&self, kind: ModelKind) -> Option<&ModelOutcome> {
        self.outcomes.iter().find(|o| o.kind == kind)
    }

    pub fn oscillates(&self, kind: ModelKind) -> bool {
        self.outcome(kind).is_some_and(|o| o.classification == Classification::Oscillating)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodGrid {
    pub spec: SweepSpec,
    /// Cells in `theta`-major, then `A0`, then `y_n` order.
    pub cells: Vec<SweepCell>,
}

impl PeriodGrid {
    pub fn cell(&self, i_theta: usize, i_a0: usize, i_yn: usize) -> &SweepCell {
        let (na, ny) = (self.spec.a0s.len(), self.spec.y_ns.len());
        &self.cells[(i_theta * na + i_a0) * ny + i_yn]
    }
}

/// Runs every grid cell through scaling, integration and period measurement.
pub fn period_sweep(spec: &SweepSpec) -> PeriodGrid {
    let (na, ny) = (spec.a0s.len(), spec.y_ns.len());
    let cells = (0..spec.cell_count())
        .into_par_iter()
        .map(|idx| {
            let theta = spec.thetas[idx / (na * ny)];
            let a0 = spec.a0s[(idx / ny) % na];
            let y_n = spec.y_ns[idx % ny];
            sweep_cell(spec, PhysicalParams { theta, a0, y_n, ..spec.base })
        })
        .collect();
    PeriodGrid { spec: spec.clone(), cells }
}

fn sweep_cell(spec: &SweepSpec, p: PhysicalParams) -> SweepCell {
    let mut cell = SweepCell {
        theta: p.theta,
        a0: p.a0,
        y_n: p.y_n,
        alpha: None,
        gamma: None,
        delta: None,
        outcomes: Vec::new(),
        error: None,
    };
    let s = match p.scale() {
        Ok(s) => s,
        Err(e) => {
            cell.error = Some(e.to_string());
            return cell;
        }
    };
    cell.alpha = Some(s.alpha);
    cell.gamma = Some(s.gamma);
    cell.delta = Some(s.delta);
    for &kind in &spec.models {
        let model = match DelayModel::scaled(kind, s.alpha, s.gamma, s.delta) {
            Ok(m) => m,
            Err(e) => {
                cell.error = Some(e.to_string());
                continue;
            }
        };
        match spec.settings.run(&model) {
            Ok(est) => {
                let period = est.period();
                cell.outcomes.push(ModelOutcome {
                    kind,
                    classification: est.classification,
                    period,
                    period_years: period.map(|t| s.dimensionalize_years(t)),
                    amplitude: est.amplitude,
                });
            }
            Err(e) => cell.error = Some(e.to_string()),
        }
    }
    cell
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaDeltaCell {
    pub alpha: f64,
    pub delta: f64,
    pub classification: Classification,
    pub period: Option<f64>,
}

/// Period levels over an `(alpha, delta)` grid for one model.
pub fn alpha_delta_sweep(
    kind: ModelKind,
    gamma: f64,
    alphas: &[f64],
    deltas: &[f64],
    settings: &SimSettings,
) -> Result<Vec<AlphaDeltaCell>> {
    let pairs: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| deltas.iter().map(move |&d| (a, d))).collect();
    pairs
        .par_iter()
        .map(|&(alpha, delta)| {
            let est = settings.run(&DelayModel::scaled(kind, alpha, gamma, delta)?)?;
            Ok(AlphaDeltaCell { alpha, delta, classification: est.classification, period: est.period() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

    /// Principal branch of Lambert W by Halley iteration.
    fn lambert_w0(z: Complex64) -> Complex64 {
        let mut w = if z.norm() < 1.0 { z } else { z.ln() - z.ln().ln() };
        for _ in 0..200 {
            let ew = w.exp();
            let f = w * ew - z;
            let step = f / (ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0));
            w -= step;
            if step.norm() < 1e-16 {
                break;
            }
        }
        w
    }

    #[test]
    fn equilibria_examples() {
        let e = equilibria(0.93, 0.49).unwrap();
        // sqrt(0.07 / 0.5443)
        assert!((e.nontrivial().unwrap() - 0.358_616_157_487_086_6).abs() < 1e-14);
        assert_eq!(e.values.len(), 3);
        let e = equilibria(1.0, 0.49).unwrap();
        assert_eq!(e.values, vec![0.0]);
        assert!(e.pitchfork);
        let e = equilibria(0.5, 0.0).unwrap();
        assert!((e.nontrivial().unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        let e = equilibria(2.0, 0.5).unwrap();
        assert!(e.singular && e.values == vec![0.0]);
    }

    #[test]
    fn pitchfork_count_changes_at_one() {
        for g in [0.0, 0.2, 0.49, 0.9] {
            assert_eq!(equilibria(1.0 - 1e-9, g).unwrap().values.len(), 3);
            assert_eq!(equilibria(1.0, g).unwrap().values.len(), 1);
            let above = if g > 0.0 { (1.0 + 1.0 / g) / 2.0 } else { 1.5 };
            assert_eq!(equilibria(above, g).unwrap().values.len(), 1);
        }
    }

    #[test]
    fn root_special_cases() {
        let r = rightmost_root(&CharCoeffs { a: 0.7, b: 0.0, delta: 3.0 }).unwrap();
        assert_eq!(r, Complex64::new(0.7, 0.0));
        let r = rightmost_root(&CharCoeffs { a: 1.0, b: -0.4, delta: 0.0 }).unwrap();
        assert!((r.re - 0.6).abs() < 1e-15);
        let c = CharCoeffs { a: 1.0, b: -SQRT_2, delta: FRAC_PI_4 };
        let r = rightmost_root(&c).unwrap();
        assert!(r.re.abs() < 1e-12 && (r.im - 1.0).abs() < 1e-12, "{r}");
    }

    #[test]
    fn root_matches_lambert_w() {
        // lambda = a + W0(b delta e^{-a delta}) / delta
        for &(a, b, delta) in &[(1.0, -1.3, 2.0), (1.0, -0.93, 4.8), (-0.5, 0.2, 1.0), (0.3, -2.0, 0.7)] {
            let c = CharCoeffs { a, b, delta };
            let w = lambert_w0(Complex64::new(b * delta * (-a * delta).exp(), 0.0));
            let expect = a + w / delta;
            let r = rightmost_root(&c).unwrap();
            assert!((r.re - expect.re).abs() < 1e-9 && (r.im - expect.im.abs()).abs() < 1e-9, "{r} vs {expect}");
            assert!(c.residual(r) < 1e-10);
        }
    }

    #[test]
    fn trivial_hopf_analytic_point() {
        let curve = hopf_curve(ModelKind::Voc, 0.49, Branch::Trivial, (1.0, 1.0), 1);
        let p = curve.points[0];
        assert!((p.alpha - SQRT_2).abs() < 1e-15);
        assert!((p.delta - PI / 4.0).abs() < 1e-15);
        assert!(p.residual < 1e-10);
        let low = hopf_curve(ModelKind::Voc, 0.49, Branch::Trivial, (1e-4, 1e-4), 1).points[0];
        assert!((low.alpha - 1.0).abs() < 1e-7);
    }

    #[test]
    fn ss_nontrivial_branch_shape() {
        let curve = hopf_curve(ModelKind::Ss, 0.0, Branch::Nontrivial, (0.05, 0.7), 40);
        assert!(curve.points.iter().all(|p| p.residual < 1e-10));
        let upper: Vec<&HopfPoint> = curve.points.iter().filter(|p| p.alpha > 0.75).collect();
        assert!(upper.len() > 10);
        // delay falls as alpha approaches the pitchfork
        for w in upper.windows(2) {
            assert!(w[1].delta < w[0].delta);
        }
        assert!((upper.last().unwrap().delta - 1.0).abs() < 0.05);
    }

    #[test]
    fn nontrivial_points_solve_their_equation() {
        for kind in [ModelKind::Voc, ModelKind::Mz] {
            let curve = hopf_curve(kind, 0.49, Branch::Nontrivial, (0.05, 0.6), 12);
            assert!(!curve.points.is_empty(), "{kind}");
            for p in &curve.points {
                let c = CharCoeffs::nontrivial(kind, p.alpha, 0.49, p.delta).unwrap();
                assert!(c.residual(Complex64::new(0.0, p.omega)) < 1e-10);
            }
        }
    }

    #[test]
    fn hopf_onset_behaviour() {
        let p = hopf_curve(ModelKind::Voc, 0.49, Branch::Trivial, (1.0, 1.0), 1).points[0];
        let s = SimSettings { dt: 0.005, run_delays: 0.0, min_run: 600.0, transient_fraction: 0.6, history: 0.05 };
        let above = s.run(&DelayModel::scaled(ModelKind::Voc, p.alpha, 0.49, p.delta + 0.05).unwrap()).unwrap();
        let period = above.period().expect("oscillates above the curve");
        assert!((period - 2.0 * PI / p.omega).abs() < 0.15 * 2.0 * PI / p.omega, "{period}");
        let below = s.run(&DelayModel::scaled(ModelKind::Voc, p.alpha, 0.49, p.delta - 0.05).unwrap()).unwrap();
        assert_eq!(below.period(), None);
    }

    #[test]
    fn hopf_is_supercritical() {
        // amplitude grows like the square root of the distance past the curve
        let p = hopf_curve(ModelKind::Voc, 0.49, Branch::Trivial, (1.0, 1.0), 1).points[0];
        let s = SimSettings { dt: 0.005, run_delays: 0.0, min_run: 1500.0, transient_fraction: 0.8, history: 0.05 };
        let amp = |e: f64| s.run(&DelayModel::scaled(ModelKind::Voc, p.alpha, 0.49, p.delta + e).unwrap()).unwrap().amplitude;
        let ratio = amp(0.04) / amp(0.01);
        assert!((ratio - 2.0).abs() < 0.3, "ratio {ratio}");
    }

    #[test]
    fn grid_ranges_hit_their_ends() {
        let t = grid_range(1.0, 4.0, 0.2);
        assert_eq!(t.len(), 16);
        assert_eq!(*t.last().unwrap(), 4.0);
        assert_eq!(grid_range(0.1, 0.6, 0.05).len(), 11);
        assert_eq!(grid_range(1.4, 3.4, 0.2)[5], 2.4);
    }

    #[test]
    fn sweep_orders_cells_and_records_failures() {
        let spec = SweepSpec {
            base: PhysicalParams::default(),
            thetas: vec![3.0],
            a0s: vec![0.1, 0.2],
            y_ns: vec![2.0, 2.2],
            models: vec![ModelKind::Ss, ModelKind::Voc],
            settings: SimSettings::default(),
        };
        let grid = period_sweep(&spec);
        assert_eq!(grid.cells.len(), 4);
        assert_eq!((grid.cell(0, 1, 1).a0, grid.cell(0, 1, 1).y_n), (0.2, 2.2));
        // A0 = 0.1 leaves c_S* below c_T(x_E)
        assert!(grid.cell(0, 0, 0).error.is_some());
        let c = grid.cell(0, 1, 0);
        assert!(c.oscillates(ModelKind::Voc));
        let o = c.outcome(ModelKind::Voc).unwrap();
        assert!(o.period_years.unwrap() > 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn time_rescaling_preserves_stability(a in -1.0f64..1.5, b in -2.0f64..2.0, delta in 0.1f64..5.0, c in 0.3f64..3.0) {
            let r = rightmost_root(&CharCoeffs { a, b, delta }).unwrap();
            let rs = rightmost_root(&CharCoeffs { a: a / c, b: b / c, delta: delta * c }).unwrap();
            prop_assert!((rs.re - r.re / c).abs() < 1e-8);
            if r.re.abs() > 1e-8 {
                prop_assert_eq!(rs.re > 0.0, r.re > 0.0);
            }
        }

        #[test]
        fn roots_satisfy_the_equation(a in -1.0f64..1.5, b in -2.0f64..2.0, delta in 0.1f64..5.0) {
            let c = CharCoeffs { a, b, delta };
            let r = rightmost_root(&c).unwrap();
            prop_assert!(c.residual(r) < 1e-10);
        }
    }
}
