//! Semi-Lagrangian solver for the two-strip model.
//!
//! Unknowns on `x in [0, 1]`: the Kelvin combination `h_c` (moves east at
//! speed 1), the off-equatorial `h_n` (moves west at speed `1/y_n^2`) and the
//! SST anomaly `T_e`. The thermocline is forced by `g(x) T_e(x_E, t)`; `T_e`
//! responds locally through `c_h (h_c + h_n/(1 + y_n^2))`.
//!
//! The step equals the grid spacing, so Kelvin characteristics land on
//! nodes. Rossby foot points are interpolated with cubic Lagrange
//! polynomials. Damping along characteristics is applied exactly and the
//! forcing is integrated along each characteristic by quadrature.
//! `x_E` need not be a node: the SST there is carried as a separate scalar
//! driven by interpolated thermocline values.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::dde::Trajectory;
use crate::numeric::{cubic_interp, cubic_stencil, linear_interp, simpson};
use crate::params::{check_position, PhysicalParams};
use crate::{Error, Result};

/// Spatial pattern `g(x)` of the wind forcing, amplitude included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WindForcing {
    /// Gaussian of width `sigma_w` around `x_w`, scaled to integrate to `a0` on `[0, 1]`.
    DeltaApprox { x_w: f64, a0: f64, sigma_w: f64, norm: f64 },
    /// Samples on a uniform grid over `[0, 1]`, linearly interpolated.
    Tabulated { values: Vec<f64> },
}

impl WindForcing {
    pub fn delta_approx(x_w: f64, a0: f64, sigma_w: f64) -> Result<Self> {
        check_position(x_w)?;
        if !(sigma_w > 0.0 && sigma_w.is_finite()) {
            return Err(Error::InvalidParameter { name: "sigma_w", reason: "must be positive".into() });
        }
        let shape = |x: f64| (-0.5 * ((x - x_w) / sigma_w).powi(2)).exp();
        let n = ((40.0 / sigma_w).ceil() as usize).max(2000);
        let mass = simpson(shape, 0.0, 1.0, n);
        Ok(WindForcing::DeltaApprox { x_w, a0, sigma_w, norm: a0 / mass })
    }

    pub fn from_params(p: &PhysicalParams, sigma_w: f64) -> Result<Self> {
        Self::delta_approx(p.x_w, p.a0, sigma_w)
    }

    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter { name: "table", reason: "need at least two finite samples".into() });
        }
        Ok(WindForcing::Tabulated { values })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        match self {
            WindForcing::DeltaApprox { x_w, sigma_w, norm, .. } => norm * (-0.5 * ((x - x_w) / sigma_w).powi(2)).exp(),
            WindForcing::Tabulated { values } => linear_interp(values, x),
        }
    }

    pub fn integral(&self) -> f64 {
        match self {
            WindForcing::DeltaApprox { .. } => simpson(|x| self.eval(x), 0.0, 1.0, 40_000),
            WindForcing::Tabulated { values } => {
                let n = values.len() - 1;
                let s: f64 = values.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum();
                s / n as f64
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            WindForcing::DeltaApprox { norm, .. } => norm.abs(),
            WindForcing::Tabulated { values } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// Location and amplitude when the pattern stands in for a point forcing.
    pub fn as_delta(&self) -> Option<(f64, f64)> {
        match self {
            WindForcing::DeltaApprox { x_w, a0, .. } => Some((*x_w, *a0)),
            WindForcing::Tabulated { .. } => None,
        }
    }
}

type Stencil = (usize, [f64; 4]);

#[inline]
fn apply(st: &Stencil, f: &[f64]) -> f64 {
    let (s, w) = st;
    w[0] * f[*s] + w[1] * f[s + 1] + w[2] * f[s + 2] + w[3] * f[s + 3]
}

/// Unforced advection with exact damping and the boundary reflections.
#[derive(Debug, Clone)]
pub struct Transport {
    pub n: usize,
    pub dx: f64,
    decay_full: f64,
    decay_half: f64,
    kelvin_half: Vec<Stencil>,
    rossby_full: Vec<Stencil>,
    rossby_half: Vec<Stencil>,
    /// `h_c(0) = bc_west h_n(0)`.
    pub bc_west: f64,
    /// `h_n(1) = bc_east h_c(1)`.
    pub bc_east: f64,
}

impl Transport {
    pub fn new(p: &PhysicalParams, n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidParameter { name: "N", reason: "need at least 4 cells".into() });
        }
        let dx = 1.0 / n as f64;
        let y2 = p.y_n * p.y_n;
        let rt = p.round_trip();
        if (rt - p.r_e).abs() < 1e-12 {
            return Err(Error::InvalidParameter { name: "r_E", reason: "r_E = 1 + y_n^2 makes the eastern condition singular".into() });
        }
        let eps0 = p.eps0();
        Ok(Self {
            n,
            dx,
            decay_full: (-eps0 * dx).exp(),
            decay_half: (-eps0 * 0.5 * dx).exp(),
            kelvin_half: (1..=n).map(|i| cubic_stencil(i as f64 * dx - 0.5 * dx, n)).collect(),
            rossby_full: (0..n).map(|i| cubic_stencil(i as f64 * dx + dx / y2, n)).collect(),
            rossby_half: (0..n).map(|i| cubic_stencil(i as f64 * dx + 0.5 * dx / y2, n)).collect(),
            bc_west: p.r_w - 1.0 / rt,
            bc_east: p.r_e / (1.0 - p.r_e / rt),
        })
    }

    /// Advances by one step (`half = false`) or half a step into `out_*`;
    /// boundary nodes are left for [`Transport::apply_bc`].
    pub fn advance(&self, hc: &[f64], hn: &[f64], out_c: &mut [f64], out_n: &mut [f64], half: bool) {
        let n = self.n;
        if half {
            for i in 1..=n {
                out_c[i] = self.decay_half * apply(&self.kelvin_half[i - 1], hc);
            }
            for i in 0..n {
                out_n[i] = self.decay_half * apply(&self.rossby_half[i], hn);
            }
        } else {
            for i in 1..=n {
                out_c[i] = self.decay_full * hc[i - 1];
            }
            for i in 0..n {
                out_n[i] = self.decay_full * apply(&self.rossby_full[i], hn);
            }
        }
    }

    pub fn apply_bc(&self, hc: &mut [f64], hn: &mut [f64]) {
        hc[0] = self.bc_west * hn[0];
        hn[self.n] = self.bc_east * hc[self.n];
    }
}

/// Fields on the `N + 1` uniform nodes at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeState {
    pub x_grid: Vec<f64>,
    pub h_c: Vec<f64>,
    pub h_n: Vec<f64>,
    pub t_e: Vec<f64>,
    /// SST at the coupling point `x_E`.
    pub te_east: f64,
    pub t: f64,
}

impl PdeState {
    pub fn zeros(n: usize) -> Self {
        Self {
            x_grid: (0..=n).map(|i| i as f64 / n as f64).collect(),
            h_c: vec![0.0; n + 1],
            h_n: vec![0.0; n + 1],
            t_e: vec![0.0; n + 1],
            te_east: 0.0,
            t: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.x_grid.len() - 1
    }

    /// Linear interpolation of `T_e` in `x`.
    pub fn probe(&self, x: f64) -> Result<f64> {
        check_position(x)?;
        Ok(linear_interp(&self.t_e, x))
    }

    pub fn is_finite(&self) -> bool {
        self.te_east.is_finite()
            && self.h_c.iter().chain(&self.h_n).chain(&self.t_e).all(|v| v.is_finite())
    }
}

/// Initial SST: a Gaussian bump at `x_E`; thermocline at rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialBump {
    pub amplitude: f64,
    pub width: f64,
}

impl Default for InitialBump {
    fn default() -> Self {
        Self { amplitude: 0.1, width: 0.05 }
    }
}

#[derive(Debug, Clone)]
pub struct PdeModel {
    pub params: PhysicalParams,
    pub forcing: WindForcing,
    pub nonlinear: bool,
    pub transport: Transport,
    pub c_t: Vec<f64>,
    pub c_h: Vec<f64>,
    pub c_t_east: f64,
    pub c_h_east: f64,
    pub beta: f64,
    rt: f64,
    src_c_full: Vec<f64>,
    src_c_half: Vec<f64>,
    src_n_full: Vec<f64>,
    src_n_half: Vec<f64>,
}

impl PdeModel {
    pub fn new(p: &PhysicalParams, forcing: WindForcing, n: usize, nonlinear: bool) -> Result<Self> {
        p.validate()?;
        let transport = Transport::new(p, n)?;
        let dx = transport.dx;
        let mut c_t = Vec::with_capacity(n + 1);
        let mut c_h = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let (a, b) = p.local_coeffs(i as f64 * dx)?;
            c_t.push(a);
            c_h.push(b);
        }
        let (c_t_east, c_h_east) = p.local_coeffs(p.x_e)?;
        let y2 = p.y_n * p.y_n;
        let rt = p.round_trip();
        let eps0 = p.eps0();
        let kc = p.mu * (1.0 - p.theta / rt);
        let kn = -p.mu * p.theta / y2;
        let g = |x: f64| forcing.eval(x);
        const SUB: usize = 16;
        let mut src_c_full = vec![0.0; n + 1];
        let mut src_c_half = vec![0.0; n + 1];
        let mut src_n_full = vec![0.0; n + 1];
        let mut src_n_half = vec![0.0; n + 1];
        for i in 0..=n {
            let x = i as f64 * dx;
            if i >= 1 {
                src_c_full[i] = kc * simpson(|s| (-eps0 * (dx - s)).exp() * g(x - dx + s), 0.0, dx, SUB);
                let h = 0.5 * dx;
                src_c_half[i] = kc * simpson(|s| (-eps0 * (h - s)).exp() * g(x - h + s), 0.0, h, SUB);
            }
            if i < n {
                src_n_full[i] = kn * simpson(|s| (-eps0 * (dx - s)).exp() * g(x + (dx - s) / y2), 0.0, dx, SUB);
                let h = 0.5 * dx;
                src_n_half[i] = kn * simpson(|s| (-eps0 * (h - s)).exp() * g(x + (h - s) / y2), 0.0, h, SUB);
            }
        }
        Ok(Self {
            params: *p,
            forcing,
            nonlinear,
            transport,
            c_t,
            c_h,
            c_t_east,
            c_h_east,
            beta: p.beta(),
            rt,
            src_c_full,
            src_c_half,
            src_n_full,
            src_n_half,
        })
    }

    pub fn n(&self) -> usize {
        self.transport.n
    }

    pub fn dt(&self) -> f64 {
        self.transport.dx
    }

    pub fn initial_state(&self, bump: InitialBump) -> PdeState {
        let mut s = PdeState::zeros(self.n());
        let xe = self.params.x_e;
        let f = |x: f64| bump.amplitude * (-((x - xe) / bump.width).powi(2)).exp();
        for (t, x) in s.t_e.iter_mut().zip(&s.x_grid) {
            *t = f(*x);
        }
        s.te_east = f(xe);
        s
    }

    #[inline]
    fn feedback(&self, c_h: f64, temp: f64) -> f64 {
        if self.nonlinear {
            c_h * (1.0 - self.beta * temp * temp)
        } else {
            c_h
        }
    }

    #[inline]
    fn combined(&self, hc: f64, hn: f64) -> f64 {
        hc + hn / self.rt
    }

    fn east_thermocline(&self, hc: &[f64], hn: &[f64]) -> f64 {
        let x = self.params.x_e;
        self.combined(cubic_interp(hc, x), cubic_interp(hn, x))
    }

    fn rk4_east(&self, temp: f64, h0: f64, hm: f64, h1: f64, dt: f64) -> f64 {
        let f = |v: f64, h: f64| -self.c_t_east * v + self.feedback(self.c_h_east, v) * h;
        let k1 = f(temp, h0);
        let k2 = f(temp + 0.5 * dt * k1, hm);
        let k3 = f(temp + 0.5 * dt * k2, hm);
        let k4 = f(temp + dt * k3, h1);
        temp + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    }

    /// Advances `state` by `dt`, which must equal the grid spacing.
    pub fn step(&self, state: &mut PdeState, dt: f64) -> Result<()> {
        let dx = self.transport.dx;
        if (dt - dx).abs() > 1e-12 * dx {
            return Err(Error::Cfl { dt, dx });
        }
        if state.n() != self.n() {
            return Err(Error::Dimension(format!("state has {} cells, model {}", state.n(), self.n())));
        }
        let n = self.n();
        let he0 = self.east_thermocline(&state.h_c, &state.h_n);
        let f0 = -self.c_t_east * state.te_east + self.feedback(self.c_h_east, state.te_east) * he0;
        let t_quarter = state.te_east + 0.25 * dt * f0;
        let t_mid = state.te_east + 0.5 * dt * f0;

        let mut hc_h = vec![0.0; n + 1];
        let mut hn_h = vec![0.0; n + 1];
        let mut hc_1 = vec![0.0; n + 1];
        let mut hn_1 = vec![0.0; n + 1];
        self.transport.advance(&state.h_c, &state.h_n, &mut hc_h, &mut hn_h, true);
        self.transport.advance(&state.h_c, &state.h_n, &mut hc_1, &mut hn_1, false);
        for i in 0..=n {
            hc_h[i] += self.src_c_half[i] * t_quarter;
            hn_h[i] += self.src_n_half[i] * t_quarter;
            hc_1[i] += self.src_c_full[i] * t_mid;
            hn_1[i] += self.src_n_full[i] * t_mid;
        }
        self.transport.apply_bc(&mut hc_h, &mut hn_h);
        self.transport.apply_bc(&mut hc_1, &mut hn_1);

        for i in 0..=n {
            let h0 = self.combined(state.h_c[i], state.h_n[i]);
            let hm = self.combined(hc_h[i], hn_h[i]);
            let h1 = self.combined(hc_1[i], hn_1[i]);
            let (ct, ch) = (self.c_t[i], self.c_h[i]);
            let f = |v: f64, h: f64| -ct * v + self.feedback(ch, v) * h;
            let v = state.t_e[i];
            let k1 = f(v, h0);
            let k2 = f(v + 0.5 * dt * k1, hm);
            let k3 = f(v + 0.5 * dt * k2, hm);
            let k4 = f(v + dt * k3, h1);
            state.t_e[i] = v + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let hem = self.east_thermocline(&hc_h, &hn_h);
        let he1 = self.east_thermocline(&hc_1, &hn_1);
        state.te_east = self.rk4_east(state.te_east, he0, hem, he1, dt);
        state.h_c = hc_1;
        state.h_n = hn_1;
        state.t += dt;
        if !state.is_finite() {
            let field = if !state.te_east.is_finite() { "T_e(x_E)" } else { "fields" };
            return Err(Error::NonFinite { field, t: state.t });
        }
        Ok(())
    }

    /// Steps until `t_end`, recording `T_e(x_E)` and the requested probes
    /// every step, plus optional snapshots.
    pub fn run(&self, mut state: PdeState, t_end: f64, opts: &RunOptions) -> Result<PdeRun> {
        for &x in &opts.probes {
            check_position(x)?;
        }
        let dt = self.dt();
        let steps = ((t_end - state.t) / dt - 1e-9).ceil().max(0.0) as usize;
        let mut out = PdeRun {
            t0: state.t,
            dt,
            te_east: Vec::with_capacity(steps + 1),
            probes: opts.probes.iter().map(|&x| (x, Vec::with_capacity(steps + 1))).collect(),
            snapshots: Vec::new(),
            final_state: PdeState::zeros(0),
        };
        let record = |s: &PdeState, k: usize, out: &mut PdeRun| {
            out.te_east.push(s.te_east);
            for (x, v) in out.probes.iter_mut() {
                v.push(linear_interp(&s.t_e, *x));
            }
            if let Some(every) = opts.snapshot_every {
                if every > 0 && k % every == 0 {
                    out.snapshots.push(s.clone());
                }
            }
        };
        record(&state, 0, &mut out);
        for k in 1..=steps {
            self.step(&mut state, dt)?;
            record(&state, k, &mut out);
        }
        out.final_state = state;
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub probes: Vec<f64>,
    /// Keep a full state every this many steps.
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct PdeRun {
    pub t0: f64,
    pub dt: f64,
    pub te_east: Vec<f64>,
    pub probes: Vec<(f64, Vec<f64>)>,
    pub snapshots: Vec<PdeState>,
    pub final_state: PdeState,
}

impl PdeRun {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.te_east.len()).map(move |k| self.t0 + k as f64 * self.dt)
    }

    pub fn east_trajectory(&self) -> Trajectory {
        Trajectory::from_samples(self.t0, self.dt, self.te_east.clone())
    }

    pub fn probe_trajectory(&self, i: usize) -> Trajectory {
        Trajectory::from_samples(self.t0, self.dt, self.probes[i].1.clone())
    }
}

/// `T_e(x, .)` from equally spaced snapshots, linear in `x`.
pub fn probe(states: &[PdeState], x: f64) -> Result<Trajectory> {
    check_position(x)?;
    if states.is_empty() {
        return Err(Error::Dimension("no states to probe".into()));
    }
    let dt = if states.len() > 1 { states[1].t - states[0].t } else { 1.0 };
    let values = states.iter().map(|s| linear_interp(&s.t_e, x)).collect();
    Ok(Trajectory::from_samples(states[0].t, dt, values))
}

/// Homogeneous solution `e^{sigma t}` of the thermocline equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenMode {
    pub k: i64,
    pub sigma: Complex64,
    pub h_n: Complex64,
    pub h_c: Complex64,
    pub eps0: f64,
    pub y2: f64,
}

impl EigenMode {
    pub fn fields(&self, x: f64, t: f64) -> (f64, f64) {
        let s = self.sigma + self.eps0;
        let time = (self.sigma * t).exp();
        let hc = self.h_c * time * (-s * x).exp();
        let hn = self.h_n * time * (s * self.y2 * x).exp();
        (hc.re, hn.re)
    }
}

pub fn eigenmode(k: i64, p: &PhysicalParams) -> Result<EigenMode> {
    if p.r_e == 0.0 {
        return Err(Error::TrivialHomogeneous);
    }
    let rt = p.round_trip();
    if (rt - p.r_e).abs() < 1e-12 {
        return Err(Error::InvalidParameter { name: "r_E", reason: "must differ from 1 + y_n^2".into() });
    }
    let arg = (p.r_e * p.r_w * rt - p.r_e) / (rt - p.r_e);
    if arg == 0.0 {
        return Err(Error::InvalidParameter { name: "r_W", reason: "zero western reflection leaves no mode".into() });
    }
    let ln = Complex64::new(arg, 0.0).ln();
    let sigma = -p.eps0() + (ln + Complex64::new(0.0, 2.0 * PI * k as f64)) / rt;
    let h_n = Complex64::new(1.0, 0.0);
    Ok(EigenMode { k, sigma, h_n, h_c: h_n * (p.r_w - 1.0 / rt), eps0: p.eps0(), y2: p.y_n * p.y_n })
}
