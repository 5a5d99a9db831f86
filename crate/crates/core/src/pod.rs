//! Pseudo-orthogonal dynamics of the nonlinear two-strip model.
//!
//! The unresolved thermocline fields are transported without forcing (the
//! same advection, damping and reflections as the full model) and drive
//! `dT^Q/dt = c_h*(x) (1 - beta T^Q^2) (h_c^Q + h_n^Q/(1 + y_n^2))`.
//! This equation separates, giving a closed form in terms of the time
//! integral of the thermocline along the characteristics. The memory kernel
//! is approximated by a directional finite difference of the noise term.

use serde::{Deserialize, Serialize};

use crate::numeric::{adaptive_simpson, cubic_interp};
use crate::params::{check_position, PhysicalParams};
use crate::pde::{InitialBump, PdeState, Transport, WindForcing};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Tanh,
    Coth,
    Constant,
}

impl Branch {
    pub fn of(beta: f64, temp: f64) -> Self {
        let u = beta * temp * temp;
        if u < 1.0 {
            Branch::Tanh
        } else if u > 1.0 {
            Branch::Coth
        } else {
            Branch::Constant
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PodState {
    pub x_grid: Vec<f64>,
    pub h_c: Vec<f64>,
    pub h_n: Vec<f64>,
    pub t_e: Vec<f64>,
    pub te_east: f64,
    pub t: f64,
}

impl PodState {
    pub fn from_pde(s: &PdeState) -> Self {
        Self {
            x_grid: s.x_grid.clone(),
            h_c: s.h_c.clone(),
            h_n: s.h_n.clone(),
            t_e: s.t_e.clone(),
            te_east: s.te_east,
            t: s.t,
        }
    }

    pub fn n(&self) -> usize {
        self.x_grid.len() - 1
    }

    pub fn branches(&self, beta: f64) -> Vec<Branch> {
        self.t_e.iter().map(|&v| Branch::of(beta, v)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct PodModel {
    pub params: PhysicalParams,
    pub transport: Transport,
    pub c_h: Vec<f64>,
    pub c_h_east: f64,
    pub beta: f64,
    rt: f64,
}

const MAX_HALVINGS: u32 = 12;

/// Thermocline forcing over one step: quadratic through the start, middle
/// and end values.
#[derive(Clone, Copy)]
struct Drive {
    h0: f64,
    hm: f64,
    h1: f64,
    dt: f64,
}

impl Drive {
    fn at(&self, s: f64) -> f64 {
        let u = s / self.dt;
        2.0 * (u - 0.5) * (u - 1.0) * self.h0 - 4.0 * u * (u - 1.0) * self.hm + 2.0 * u * (u - 0.5) * self.h1
    }
}

impl PodModel {
    pub fn new(p: &PhysicalParams, n: usize) -> Result<Self> {
        Self::with_beta(p, n, p.beta())
    }

    /// Same transport with an explicit nonlinearity strength (0 gives the linear model).
    pub fn with_beta(p: &PhysicalParams, n: usize, beta: f64) -> Result<Self> {
        p.validate()?;
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter { name: "beta", reason: "must be non-negative".into() });
        }
        let transport = Transport::new(p, n)?;
        let c_h = (0..=n).map(|i| p.local_coeffs(i as f64 / n as f64).map(|c| c.1)).collect::<Result<Vec<_>>>()?;
        let (_, c_h_east) = p.local_coeffs(p.x_e)?;
        Ok(Self { params: *p, transport, c_h, c_h_east, beta, rt: p.round_trip() })
    }

    pub fn n(&self) -> usize {
        self.transport.n
    }

    pub fn dt(&self) -> f64 {
        self.transport.dx
    }

    fn rhs(&self, c_h: f64, temp: f64, h: f64) -> f64 {
        c_h * (1.0 - self.beta * temp * temp) * h
    }

    fn rk4(&self, c_h: f64, temp: f64, d: &Drive, a: f64, b: f64) -> f64 {
        let h = b - a;
        let k1 = self.rhs(c_h, temp, d.at(a));
        let k2 = self.rhs(c_h, temp + 0.5 * h * k1, d.at(a + 0.5 * h));
        let k3 = self.rhs(c_h, temp + 0.5 * h * k2, d.at(a + 0.5 * h));
        let k4 = self.rhs(c_h, temp + h * k3, d.at(b));
        temp + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    }

    /// One node over `[a, b]`, halving while the step jumps across `beta T^2 = 1`.
    fn advance_node(&self, c_h: f64, temp: f64, d: &Drive, a: f64, b: f64, depth: u32, halvings: &mut usize) -> f64 {
        let start = Branch::of(self.beta, temp);
        if start == Branch::Constant {
            return temp;
        }
        let end = self.rk4(c_h, temp, d, a, b);
        if Branch::of(self.beta, end) == start || depth >= MAX_HALVINGS {
            return end;
        }
        *halvings += 1;
        let m = 0.5 * (a + b);
        let mid = self.advance_node(c_h, temp, d, a, m, depth + 1, halvings);
        self.advance_node(c_h, mid, d, m, b, depth + 1, halvings)
    }

    fn combined(&self, hc: f64, hn: f64) -> f64 {
        hc + hn / self.rt
    }

    fn east(&self, hc: &[f64], hn: &[f64]) -> f64 {
        let x = self.params.x_e;
        self.combined(cubic_interp(hc, x), cubic_interp(hn, x))
    }

    /// Advances by `dt` (which must equal the grid spacing); returns the number of halvings.
    pub fn step(&self, s: &mut PodState, dt: f64) -> Result<usize> {
        let dx = self.transport.dx;
        if (dt - dx).abs() > 1e-12 * dx {
            return Err(Error::Cfl { dt, dx });
        }
        if s.n() != self.n() {
            return Err(Error::Dimension(format!("state has {} cells, model {}", s.n(), self.n())));
        }
        let n = self.n();
        let mut hc_h = vec![0.0; n + 1];
        let mut hn_h = vec![0.0; n + 1];
        let mut hc_1 = vec![0.0; n + 1];
        let mut hn_1 = vec![0.0; n + 1];
        self.transport.advance(&s.h_c, &s.h_n, &mut hc_h, &mut hn_h, true);
        self.transport.advance(&s.h_c, &s.h_n, &mut hc_1, &mut hn_1, false);
        self.transport.apply_bc(&mut hc_h, &mut hn_h);
        self.transport.apply_bc(&mut hc_1, &mut hn_1);
        let mut halvings = 0;
        for i in 0..=n {
            let d = Drive {
                h0: self.combined(s.h_c[i], s.h_n[i]),
                hm: self.combined(hc_h[i], hn_h[i]),
                h1: self.combined(hc_1[i], hn_1[i]),
                dt,
            };
            s.t_e[i] = self.advance_node(self.c_h[i], s.t_e[i], &d, 0.0, dt, 0, &mut halvings);
        }
        let d = Drive { h0: self.east(&s.h_c, &s.h_n), hm: self.east(&hc_h, &hn_h), h1: self.east(&hc_1, &hn_1), dt };
        s.te_east = self.advance_node(self.c_h_east, s.te_east, &d, 0.0, dt, 0, &mut halvings);
        s.h_c = hc_1;
        s.h_n = hn_1;
        s.t += dt;
        if !s.te_east.is_finite() || s.t_e.iter().chain(&s.h_c).chain(&s.h_n).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { field: "POD state", t: s.t });
        }
        Ok(halvings)
    }

    /// Noise term at `x` on a POD state.
    pub fn noise(&self, s: &PodState, x: f64) -> Result<f64> {
        check_position(x)?;
        let (_, c_h) = self.params.local_coeffs(x)?;
        let temp = cubic_interp(&s.t_e, x);
        Ok(self.rhs(c_h, temp, self.combined(cubic_interp(&s.h_c, x), cubic_interp(&s.h_n, x))))
    }

    /// Noise term at `x_E`, using the SST carried at that point.
    pub fn noise_east(&self, s: &PodState) -> f64 {
        self.rhs(self.c_h_east, s.te_east, self.east(&s.h_c, &s.h_n))
    }

    /// Max-norm of `2 beta T^Q c_h* (h_c^Q + h_n^Q/(1+y_n^2))` over the grid:
    /// the sensitivity of the unresolved vector field to `T`, used as a
    /// rough indicator of how far commutation is violated.
    pub fn error_indicator(&self, s: &PodState) -> f64 {
        (0..=self.n())
            .map(|i| (2.0 * self.beta * s.t_e[i] * self.c_h[i] * self.combined(s.h_c[i], s.h_n[i])).abs())
            .fold(0.0, f64::max)
    }

    pub fn integrate(&self, mut s: PodState, t_end: f64, opts: &PodOptions) -> Result<PodRun> {
        for &x in &opts.probes {
            check_position(x)?;
        }
        let dt = self.dt();
        let steps = ((t_end - s.t) / dt - 1e-9).ceil().max(0.0) as usize;
        let start_branches = s.branches(self.beta);
        let mut run = PodRun {
            t0: s.t,
            dt,
            noise_east: Vec::with_capacity(steps + 1),
            te_east: Vec::with_capacity(steps + 1),
            probes: opts.probes.iter().map(|&x| (x, Vec::new())).collect(),
            snapshots: Vec::new(),
            halvings: 0,
            branch_changes: 0,
            max_error_indicator: 0.0,
            final_state: PodState::from_pde(&PdeState::zeros(0)),
        };
        let record = |s: &PodState, k: usize, run: &mut PodRun| -> Result<()> {
            run.noise_east.push(self.noise_east(s));
            run.te_east.push(s.te_east);
            for (x, v) in run.probes.iter_mut() {
                v.push(self.noise(s, *x)?);
            }
            run.max_error_indicator = run.max_error_indicator.max(self.error_indicator(s));
            if let Some(every) = opts.snapshot_every {
                if every > 0 && k % every == 0 {
                    run.snapshots.push(s.clone());
                }
            }
            Ok(())
        };
        record(&s, 0, &mut run)?;
        for k in 1..=steps {
            run.halvings += self.step(&mut s, dt)?;
            record(&s, k, &mut run)?;
        }
        run.branch_changes = s.branches(self.beta).iter().zip(&start_branches).filter(|(a, b)| a != b).count();
        run.final_state = s;
        Ok(run)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PodOptions {
    /// Points where the noise term is recorded every step.
    pub probes: Vec<f64>,
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct PodRun {
    pub t0: f64,
    pub dt: f64,
    pub noise_east: Vec<f64>,
    pub te_east: Vec<f64>,
    pub probes: Vec<(f64, Vec<f64>)>,
    pub snapshots: Vec<PodState>,
    pub halvings: usize,
    /// Nodes whose branch differs at the end from the start.
    pub branch_changes: usize,
    pub max_error_indicator: f64,
    pub final_state: PodState,
}

impl PodRun {
    pub fn times(&self) -> Vec<f64> {
        (0..self.noise_east.len()).map(|k| self.t0 + k as f64 * self.dt).collect()
    }
}

/// How characteristics that leave the basin are treated in the closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Characteristics {
    /// Follow boundary reflections back into the basin (matches the grid solver).
    #[default]
    Reflected,
    /// Treat data from outside `[0, 1]` as zero.
    Clipped,
}

/// Closed-form expression variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedForm {
    /// `(1/sqrt(beta)) tanh(...)`, the solution of the separable equation.
    #[default]
    Tanh,
    /// `(1/beta) tanh^2(...)`, as it is sometimes printed.
    AsPrinted,
}

/// Initial thermocline as functions of `x`.
pub struct Thermocline<'a> {
    pub h_c: &'a dyn Fn(f64) -> f64,
    pub h_n: &'a dyn Fn(f64) -> f64,
}

struct Exact<'a> {
    init: &'a Thermocline<'a>,
    eps0: f64,
    y2: f64,
    west: f64,
    east: f64,
    mode: Characteristics,
}

impl Exact<'_> {
    fn h_c(&self, x: f64, s: f64) -> f64 {
        if s <= x {
            return (-self.eps0 * s).exp() * (self.init.h_c)(x - s);
        }
        match self.mode {
            Characteristics::Clipped => 0.0,
            Characteristics::Reflected => (-self.eps0 * x).exp() * self.west * self.h_n(0.0, s - x),
        }
    }

    fn h_n(&self, x: f64, s: f64) -> f64 {
        let reach = self.y2 * (1.0 - x);
        if s <= reach {
            return (-self.eps0 * s).exp() * (self.init.h_n)(x + s / self.y2);
        }
        if self.mode == Characteristics::Clipped || self.east == 0.0 {
            return 0.0;
        }
        (-self.eps0 * reach).exp() * self.east * self.h_c(1.0, s - reach)
    }
}

/// `int_0^t (h_c^Q(x, s) + h_n^Q(x, s)/(1 + y_n^2)) ds` for the unforced transport.
pub fn characteristic_integral(
    p: &PhysicalParams,
    init: &Thermocline<'_>,
    x: f64,
    t: f64,
    mode: Characteristics,
    tol: f64,
) -> Result<f64> {
    check_position(x)?;
    if t < 0.0 {
        return Err(Error::InvalidParameter { name: "t", reason: "must be non-negative".into() });
    }
    let rt = p.round_trip();
    let y2 = p.y_n * p.y_n;
    let ex = Exact {
        init,
        eps0: p.eps0(),
        y2,
        west: p.r_w - 1.0 / rt,
        east: p.r_e / (1.0 - p.r_e / rt),
        mode,
    };
    // arrival times of boundary-reflected data are kinks of the integrand
    let mut cuts = vec![0.0, t];
    let mut m = 0.0;
    while m * rt < t {
        for base in [x, x + y2, y2 * (1.0 - x), y2 * (1.0 - x) + 1.0] {
            let c = base + m * rt;
            if c > 0.0 && c < t {
                cuts.push(c);
            }
        }
        m += 1.0;
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let f = |s: f64| ex.h_c(x, s) + ex.h_n(x, s) / rt;
    Ok(cuts.windows(2).map(|w| adaptive_simpson(&f, w[0], w[1], tol)).sum())
}

/// Closed-form `T^Q(x, t)` on the tanh branch.
pub fn closed_form_te_q(
    p: &PhysicalParams,
    beta: f64,
    init: &Thermocline<'_>,
    t_e0: f64,
    x: f64,
    t: f64,
    mode: Characteristics,
    form: ClosedForm,
) -> Result<f64> {
    let u0 = beta.sqrt() * t_e0;
    if u0 * u0 >= 1.0 {
        return Err(Error::WrongBranch { value: u0 * u0 });
    }
    let (_, c_h) = p.local_coeffs(x)?;
    let i = characteristic_integral(p, init, x, t, mode, 1e-12)?;
    if beta == 0.0 {
        return Ok(match form {
            ClosedForm::Tanh => t_e0 + c_h * i,
            // the squared form has no finite beta -> 0 limit; report it as is
            ClosedForm::AsPrinted => f64::NAN,
        });
    }
    let arg = u0.atanh() + c_h * beta.sqrt() * i;
    Ok(match form {
        ClosedForm::Tanh => arg.tanh() / beta.sqrt(),
        ClosedForm::AsPrinted => arg.tanh().powi(2) / beta,
    })
}

/// Closed form off the tanh branch: coth when `beta T^2 > 1`, constant when equal.
pub fn closed_form_te_q_outer(
    p: &PhysicalParams,
    beta: f64,
    init: &Thermocline<'_>,
    t_e0: f64,
    x: f64,
    t: f64,
    mode: Characteristics,
) -> Result<f64> {
    match Branch::of(beta, t_e0) {
        Branch::Tanh => Err(Error::InvalidParameter { name: "T_e", reason: "state is on the tanh branch".into() }),
        Branch::Constant => Ok(t_e0),
        Branch::Coth => {
            let (_, c_h) = p.local_coeffs(x)?;
            let i = characteristic_integral(p, init, x, t, mode, 1e-12)?;
            let u0 = beta.sqrt() * t_e0;
            // arcoth(u) = atanh(1/u)
            let arg = (1.0 / u0).atanh() + c_h * beta.sqrt() * i;
            Ok(1.0 / (arg.tanh() * beta.sqrt()))
        }
    }
}

/// Settings for the finite-difference kernel estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelProbe {
    pub epsilon_fd: f64,
    pub n: usize,
    pub t_end: f64,
    /// SST of the resolved state: a bump at `x_E` with this peak.
    pub t_hat: f64,
    pub bump_width: f64,
}

impl Default for KernelProbe {
    fn default() -> Self {
        Self { epsilon_fd: 1e-5, n: 1024, t_end: 8.0, t_hat: 1.0, bump_width: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFd {
    pub lags: Vec<f64>,
    /// Estimate with `epsilon_fd`.
    pub raw: Vec<f64>,
    /// Estimate with `epsilon_fd / 2`.
    pub half: Vec<f64>,
    /// `2 half - raw`.
    pub extrapolated: Vec<f64>,
    pub direction_norm: f64,
    pub t_hat: f64,
    /// The perturbed run left the tanh branch somewhere.
    pub off_branch: bool,
    pub max_error_indicator: f64,
}

/// Directional finite difference of the noise term at `x_E` around a
/// resolved state with the thermocline at rest.
pub fn kernel_fd(p: &PhysicalParams, forcing: &WindForcing, beta: f64, probe: &KernelProbe) -> Result<KernelFd> {
    if !(probe.epsilon_fd > 0.0) {
        return Err(Error::InvalidParameter { name: "epsilon_fd", reason: "must be positive".into() });
    }
    let model = PodModel::with_beta(p, probe.n, beta)?;
    let n = probe.n;
    let dx = 1.0 / n as f64;
    let rt = p.round_trip();
    let y2 = p.y_n * p.y_n;
    let bump = InitialBump { amplitude: probe.t_hat, width: probe.bump_width };
    let xe = p.x_e;
    let temp = |x: f64| bump.amplitude * (-((x - xe) / bump.width).powi(2)).exp();
    let te_east = temp(xe);
    // full vector field at the resolved state
    let mut r_c = vec![0.0; n + 1];
    let mut r_n = vec![0.0; n + 1];
    let mut r_t = vec![0.0; n + 1];
    for i in 0..=n {
        let x = i as f64 * dx;
        let g = forcing.eval(x);
        r_c[i] = p.mu * (1.0 - p.theta / rt) * g * te_east;
        r_n[i] = -p.mu * (p.theta / y2) * g * te_east;
        let (c_t, _) = p.local_coeffs(x)?;
        r_t[i] = -c_t * temp(x);
    }
    let (c_t_east, _) = p.local_coeffs(xe)?;
    let r_t_east = -c_t_east * te_east;
    let norm = (dx * r_c.iter().chain(&r_n).chain(&r_t).map(|v| v * v).sum::<f64>()).sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidParameter { name: "resolved state", reason: "vector field vanishes".into() });
    }
    let perturbed = |eps: f64| -> PodState {
        let s = eps / norm;
        let mut st = PodState::from_pde(&PdeState::zeros(n));
        for i in 0..=n {
            let x = i as f64 * dx;
            st.h_c[i] = s * r_c[i];
            st.h_n[i] = s * r_n[i];
            st.t_e[i] = temp(x) + s * r_t[i];
        }
        st.te_east = te_east + s * r_t_east;
        st
    };
    let opts = PodOptions::default();
    let (a, b) = rayon::join(
        || model.integrate(perturbed(probe.epsilon_fd), probe.t_end, &opts),
        || model.integrate(perturbed(0.5 * probe.epsilon_fd), probe.t_end, &opts),
    );
    let (a, b) = (a?, b?);
    let scale = |run: &PodRun, eps: f64| run.noise_east.iter().map(|f| norm * f / eps).collect::<Vec<_>>();
    let raw = scale(&a, probe.epsilon_fd);
    let half = scale(&b, 0.5 * probe.epsilon_fd);
    let extrapolated = raw.iter().zip(&half).map(|(r, h)| 2.0 * h - r).collect();
    let starts_off = Branch::of(beta, te_east) != Branch::Tanh;
    let off_branch = starts_off
        || a.branch_changes > 0
        || b.branch_changes > 0
        || a.te_east.iter().chain(&b.te_east).any(|&v| Branch::of(beta, v) != Branch::Tanh);
    Ok(KernelFd {
        lags: a.times(),
        raw,
        half,
        extrapolated,
        direction_norm: norm,
        t_hat: te_east,
        off_branch,
        max_error_indicator: a.max_error_indicator.max(b.max_error_indicator),
    })
}
