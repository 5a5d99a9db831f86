//! Subcommand arguments and their implementations. Each command returns its
//! artifacts in memory; writing them out is left to the caller.

use std::str::FromStr;

use clap::{Args, Subcommand, ValueEnum};
use enso_mz::bif::{self, SimSettings, SweepSpec};
use enso_mz::dde::{self, DelayModel, History, ModelKind, RawDelayParams};
use enso_mz::kernel::{self, KernelBranch, RossbyJacobian};
use enso_mz::linmz::{self, BlockLinearSystem};
use enso_mz::pde::{InitialBump, PdeModel, RunOptions, WindForcing};
use enso_mz::pod::{self, Characteristics, ClosedForm, KernelProbe, PodModel, PodOptions, PodState, Thermocline};
use enso_mz::PhysicalParams;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::output::{csv_artifact, json_artifact, num, opt_num, Outputs};
use crate::validate::{validate_reduction, ValidationOptions};

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Nondimensional scaling: alpha, gamma, delta and the feedback strengths.
    Scale(ScaleArgs),
    /// Three-term decomposition of a small linear block system.
    LinmzDemo(LinmzArgs),
    /// Two-strip PDE run.
    SimulatePde(PdeArgs),
    /// Scalar delay model run.
    SimulateDde(DdeArgs),
    /// Linear memory kernel on a lag grid.
    Kernel(KernelArgs),
    /// Finite-difference kernel from the pseudo-orthogonal dynamics.
    PodKernel(PodKernelArgs),
    /// Hopf curve in the (alpha, delta) plane.
    Hopf(HopfArgs),
    /// Oscillation boundary by simulation bisection.
    Boundary(BoundaryArgs),
    /// Period sweep over theta, A0 and y_n.
    SweepPeriod(SweepArgs),
    /// PDE against the two-delay equation for shrinking forcing widths.
    Validate(ValidateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Scale(_) => "scale",
            Command::LinmzDemo(_) => "linmz-demo",
            Command::SimulatePde(_) => "simulate-pde",
            Command::SimulateDde(_) => "simulate-dde",
            Command::Kernel(_) => "kernel",
            Command::PodKernel(_) => "pod-kernel",
            Command::Hopf(_) => "hopf",
            Command::Boundary(_) => "boundary",
            Command::SweepPeriod(_) => "sweep-period",
            Command::Validate(_) => "validate",
        }
    }

    pub fn execute(&self, p: &PhysicalParams) -> CliResult<Outputs> {
        match self {
            Command::Scale(a) => scale(p, a),
            Command::LinmzDemo(a) => linmz_demo(a),
            Command::SimulatePde(a) => simulate_pde(p, a),
            Command::SimulateDde(a) => simulate_dde(p, a),
            Command::Kernel(a) => kernel_cmd(p, a),
            Command::PodKernel(a) => pod_kernel(p, a),
            Command::Hopf(a) => hopf(a),
            Command::Boundary(a) => boundary(a),
            Command::SweepPeriod(a) => sweep_period(p, a),
            Command::Validate(a) => validate(p, a),
        }
    }
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    ModelKind::from_str(s).map_err(|e| e.to_string())
}

/// Values from `lo:hi:step` or a single number.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Grid(pub Vec<f64>);

fn parse_range(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let f = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number"));
    match parts.as_slice() {
        [v] => Ok(Grid(vec![f(v)?])),
        [lo, hi, step] => {
            let (lo, hi, step) = (f(lo)?, f(hi)?, f(step)?);
            if !(step > 0.0) || hi < lo {
                return Err(format!("bad range `{s}`"));
            }
            Ok(Grid(bif::grid_range(lo, hi, step)))
        }
        _ => Err(format!("expected lo:hi:step or a value, got `{s}`")),
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScaleArgs {}

fn scale(p: &PhysicalParams, _: &ScaleArgs) -> CliResult<Outputs> {
    let s = p.scale()?;
    let mut out = Outputs::default();
    out.push(json_artifact(
        "scale.json",
        &json!({
            "alpha": s.alpha,
            "gamma": s.gamma,
            "delta": s.delta,
            "c_S_star": s.cs_star,
            "c_L_star": s.cl_star,
            "d": s.d,
            "d_short": s.d_short,
            "beta": s.beta,
            "time_scale_days": s.time_scale_seconds / 86_400.0,
            "scaled": s,
        }),
    )?);
    Ok(out)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LinmzArgs {
    /// JSON file `{"a": [[..]], "m": 1, "x0": [..]}`; a 1+2 demo system otherwise.
    #[arg(long)]
    pub system: Option<String>,
    #[arg(long, default_value_t = 10.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Write every n-th step.
    #[arg(long, default_value_t = 10)]
    pub every: usize,
}

#[derive(Deserialize)]
struct SystemFile {
    a: Vec<Vec<f64>>,
    m: usize,
    x0: Vec<f64>,
}

fn load_system(path: Option<&str>) -> CliResult<BlockLinearSystem> {
    let sys = match path {
        None => SystemFile {
            a: vec![vec![-1.0, 1.0, 0.0], vec![1.0, -1.0, 0.0], vec![0.0, 0.0, -1.0]],
            m: 1,
            x0: vec![1.0, 0.5, -0.3],
        },
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read `{p}`: {e}")))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("system file `{p}`: {e}")))?
        }
    };
    let n = sys.a.len();
    if sys.a.iter().any(|r| r.len() != n) {
        return Err(CliError::Usage("system matrix must be square".into()));
    }
    let a = DMatrix::from_fn(n, n, |i, j| sys.a[i][j]);
    Ok(BlockLinearSystem::from_full(&a, sys.m, &DVector::from_vec(sys.x0))?)
}

fn linmz_demo(a: &LinmzArgs) -> CliResult<Outputs> {
    if a.every == 0 {
        return Err(CliError::Usage("--every must be positive".into()));
    }
    let sys = load_system(a.system.as_deref())?;
    let red = linmz::reduce_and_integrate(&sys, a.t_end, a.dt)?;
    let full = linmz::integrate_full(&sys, a.t_end, a.dt)?;
    let m = sys.resolved_dim();
    let mut header = vec!["t".to_string()];
    for i in 0..m {
        for col in ["phi_hat", "markov", "noise", "memory", "full"] {
            header.push(format!("{col}_{i}"));
        }
    }
    let steps = red.times.len().min(full.times.len());
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for k in 0..steps {
        let xf = full.resolved(k);
        worst = worst.max((&red.phi_hat[k] - &xf).amax());
        if k % a.every != 0 && k + 1 != steps {
            continue;
        }
        let mut row = vec![num(red.times[k])];
        for i in 0..m {
            row.extend([red.phi_hat[k][i], red.markov_part[k][i], red.noise_part[k][i], red.memory_part[k][i], xf[i]].map(num));
        }
        rows.push(row);
    }
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut out = Outputs::default();
    out.push(csv_artifact("linmz.csv", &h, rows)?);
    out.push(json_artifact("linmz_summary.json", &json!({"resolved_dim": m, "dt": a.dt, "t_end": a.t_end, "max_abs_error": worst}))?);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ForcingKind {
    /// Normalized Gaussian of width sigma_w at x_w.
    Delta,
    /// Values on a uniform grid over [0, 1], read from --forcing-file.
    Tabulated,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ForcingArgs {
    #[arg(long, value_enum, default_value_t = ForcingKind::Delta)]
    pub forcing: ForcingKind,
    #[arg(long, default_value_t = 0.01)]
    pub sigma_w: f64,
    /// One value per line (a header line is skipped), or a JSON array.
    #[arg(long)]
    pub forcing_file: Option<String>,
}

impl ForcingArgs {
    fn build(&self, p: &PhysicalParams) -> CliResult<WindForcing> {
        match self.forcing {
            ForcingKind::Delta => Ok(WindForcing::from_params(p, self.sigma_w)?),
            ForcingKind::Tabulated => {
                let path = self
                    .forcing_file
                    .as_deref()
                    .ok_or_else(|| CliError::Usage("tabulated forcing needs --forcing-file".into()))?;
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read `{path}`: {e}")))?;
                Ok(WindForcing::tabulated(parse_table(&text).map_err(CliError::Usage)?)?)
            }
        }
    }
}

fn parse_table(text: &str) -> Result<Vec<f64>, String> {
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(text).map_err(|e| e.to_string());
    }
    let mut values = Vec::new();
    for (i, line) in text.lines().map(str::trim).filter(|l| !l.is_empty()).enumerate() {
        let field = line.split(',').next_back().unwrap_or(line).trim();
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if i == 0 => {}
            Err(_) => return Err(format!("line {}: `{line}` is not a number", i + 1)),
        }
    }
    Ok(values)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PdeArgs {
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    #[arg(long, default_value_t = 20.0)]
    pub t_end: f64,
    #[arg(long)]
    pub nonlinear: bool,
    #[command(flatten)]
    pub forcing: ForcingArgs,
    /// Extra SST probe positions.
    #[arg(long = "probe")]
    pub probes: Vec<f64>,
    /// Dump full fields every n steps.
    #[arg(long)]
    pub snapshot_every: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub bump_amplitude: f64,
    #[arg(long, default_value_t = 0.05)]
    pub bump_width: f64,
    /// Write every n-th step of the time series.
    #[arg(long, default_value_t = 1)]
    pub every: usize,
}

fn simulate_pde(p: &PhysicalParams, a: &PdeArgs) -> CliResult<Outputs> {
    if a.every == 0 || a.snapshot_every == Some(0) {
        return Err(CliError::Usage("strides must be positive".into()));
    }
    let model = PdeModel::new(p, a.forcing.build(p)?, a.n, a.nonlinear)?;
    let init = model.initial_state(InitialBump { amplitude: a.bump_amplitude, width: a.bump_width });
    let run = model.run(init, a.t_end, &RunOptions { probes: a.probes.clone(), snapshot_every: a.snapshot_every })?;
    let mut header = vec!["t".to_string(), "T_e_east".to_string()];
    header.extend(run.probes.iter().map(|(x, _)| format!("T_e_{}", num(*x))));
    let last = run.te_east.len() - 1;
    let rows = run
        .times()
        .enumerate()
        .filter(|(k, _)| k % a.every == 0 || *k == last)
        .map(|(k, t)| {
            let mut row = vec![num(t), num(run.te_east[k])];
            row.extend(run.probes.iter().map(|(_, v)| num(v[k])));
            row
        })
        .collect::<Vec<_>>();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut out = Outputs::default();
    out.push(csv_artifact("pde.csv", &h, rows)?);
    for (i, s) in run.snapshots.iter().enumerate() {
        let rows = (0..=s.n()).map(|j| vec![num(s.x_grid[j]), num(s.h_c[j]), num(s.h_n[j]), num(s.t_e[j])]);
        out.push(csv_artifact(&format!("snapshot_{i:05}.csv"), &["x", "h_c", "h_n", "T_e"], rows)?);
    }
    let snapshot_times: Vec<f64> = run.snapshots.iter().map(|s| s.t).collect();
    out.push(json_artifact(
        "pde_summary.json",
        &json!({
            "n": a.n,
            "dt": run.dt,
            "steps": last,
            "t_end": run.final_state.t,
            "nonlinear": a.nonlinear,
            "final_T_e_east": run.final_state.te_east,
            "max_abs_T_e_east": run.te_east.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            "snapshot_times": snapshot_times,
        }),
    )?);
    Ok(out)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DdeArgs {
    /// ss, voc, mz, linear2 or voc2.
    #[arg(long, value_parser = parse_model, default_value = "voc")]
    pub model: ModelKind,
    /// Scaled parameters; derived from the physical parameters when all are omitted.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Defaults to 40 delays.
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Constant initial function.
    #[arg(long, default_value_t = 0.1)]
    pub history: f64,
    #[arg(long, default_value_t = 0.5)]
    pub transient: f64,
    #[arg(long, default_value_t = 1)]
    pub every: usize,
}

fn simulate_dde(p: &PhysicalParams, a: &DdeArgs) -> CliResult<Outputs> {
    if a.every == 0 {
        return Err(CliError::Usage("--every must be positive".into()));
    }
    let given = [a.alpha, a.gamma, a.delta];
    let mut years_per_unit = None;
    let model = match a.model {
        ModelKind::LinearTwoDelay | ModelKind::VocTwoDelay => {
            if given.iter().any(Option::is_some) {
                return Err(CliError::Usage(format!("{} takes its coefficients from the physical parameters", a.model)));
            }
            let s = p.scale()?;
            years_per_unit = Some(p.crossing_time_seconds() / enso_mz::params::SECONDS_PER_YEAR);
            DelayModel::raw(a.model, RawDelayParams::from_scaled(&s))?
        }
        kind => match given {
            [Some(alpha), gamma, Some(delta)] if gamma.is_some() || kind == ModelKind::Ss => {
                DelayModel::scaled(kind, alpha, gamma.unwrap_or(0.0), delta)?
            }
            [None, None, None] => {
                let s = p.scale()?;
                years_per_unit = Some(s.dimensionalize_years(1.0));
                DelayModel::scaled(kind, s.alpha, s.gamma, s.delta)?
            }
            _ => return Err(CliError::Usage("give all of --alpha, --gamma, --delta or none".into())),
        },
    };
    let t_end = a.t_end.unwrap_or(40.0 * model.max_delay());
    let traj = dde::integrate(&model, &History::Constant(a.history), t_end, a.dt)?;
    let est = dde::measure_period(&traj, a.transient);
    let last = traj.values.len() - 1;
    let rows = traj
        .values
        .iter()
        .enumerate()
        .filter(|(k, _)| k % a.every == 0 || *k == last)
        .map(|(k, v)| vec![num(traj.time(k)), num(*v)]);
    let mut out = Outputs::default();
    out.push(csv_artifact("dde.csv", &["t", "T"], rows)?);
    out.push(json_artifact(
        "dde_summary.json",
        &json!({
            "model": model,
            "dt": traj.dt,
            "t_end": traj.t_end(),
            "classification": est.classification,
            "period": est.period(),
            "period_years": est.period().zip(years_per_unit).map(|(t, y)| t * y),
            "amplitude": est.amplitude,
            "crossings": est.crossings,
            "spacing_cv": est.spacing_cv,
        }),
    )?);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JacobianArg {
    Omitted,
    Included,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KernelArgs {
    #[arg(long, default_value_t = 0.0)]
    pub tau_min: f64,
    #[arg(long, default_value_t = 12.0)]
    pub tau_max: f64,
    #[arg(long, default_value_t = 0.01)]
    pub tau_step: f64,
    /// Reflection count; defaults to a geometric tail below 1e-10.
    #[arg(long)]
    pub k_max: Option<usize>,
    #[command(flatten)]
    pub forcing: ForcingArgs,
    /// Observation point of the kernel.
    #[arg(long, default_value_t = 1.0)]
    pub probe: f64,
    /// Emit the collapsed discrete delays as JSON instead of the lag grid.
    #[arg(long)]
    pub discrete: bool,
    #[arg(long, value_enum, default_value_t = JacobianArg::Omitted)]
    pub jacobian: JacobianArg,
}

fn kernel_cmd(p: &PhysicalParams, a: &KernelArgs) -> CliResult<Outputs> {
    let forcing = a.forcing.build(p)?;
    let k_max = a.k_max.unwrap_or_else(|| kernel::default_k_max(p, 1e-10));
    let mut out = Outputs::default();
    if a.discrete {
        let jac = match a.jacobian {
            JacobianArg::Omitted => RossbyJacobian::Omitted,
            JacobianArg::Included => RossbyJacobian::Included,
        };
        out.push(json_artifact("delays.json", &kernel::discrete_delays(&forcing, p, k_max, jac, a.probe)?)?);
        return Ok(out);
    }
    if !(a.tau_step > 0.0) || a.tau_max < a.tau_min {
        return Err(CliError::Usage("need tau_step > 0 and tau_max >= tau_min".into()));
    }
    let mut rows = Vec::new();
    for tau in bif::grid_range(a.tau_min, a.tau_max, a.tau_step) {
        let terms = kernel::kernel_terms(tau, &forcing, p, k_max, a.probe)?;
        let total: f64 = terms.iter().map(|s| s.value).sum();
        let lead = terms.iter().max_by(|x, y| x.value.abs().total_cmp(&y.value.abs()));
        let (branch, k) = match lead {
            Some(s) => {
                let b = match s.branch {
                    KernelBranch::KelvinFirst => "kelvin_first",
                    KernelBranch::RossbyFirst => "rossby_first",
                };
                (b.to_string(), s.k.to_string())
            }
            None => ("none".to_string(), String::new()),
        };
        rows.push(vec![num(tau), num(total), branch, k]);
    }
    out.push(csv_artifact("kernel.csv", &["tau", "K", "branch", "k"], rows)?);
    Ok(out)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PodKernelArgs {
    /// Nonlinearity; defaults to the value implied by the parameters.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Shorthand for --beta 0.
    #[arg(long, conflicts_with = "beta")]
    pub linear: bool,
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    #[arg(long, default_value_t = 8.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_hat: f64,
    #[arg(long, default_value_t = 0.05)]
    pub bump_width: f64,
    #[arg(long, default_value_t = 0.04)]
    pub sigma_w: f64,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Also compare the grid solution with both closed-form variants.
    #[arg(long)]
    pub as_printed: bool,
    #[arg(long, default_value_t = 0.5)]
    pub thermocline_amplitude: f64,
}

fn pod_kernel(p: &PhysicalParams, a: &PodKernelArgs) -> CliResult<Outputs> {
    let beta = if a.linear { 0.0 } else { a.beta.unwrap_or_else(|| p.beta()) };
    let forcing = WindForcing::from_params(p, a.sigma_w)?;
    let probe = KernelProbe { epsilon_fd: a.epsilon, n: a.n, t_end: a.t_end, t_hat: a.t_hat, bump_width: a.bump_width };
    let k = pod::kernel_fd(p, &forcing, beta, &probe)?;
    let k_max = a.k_max.unwrap_or_else(|| kernel::default_k_max(p, 1e-10));
    let reference = kernel::kernel_series(&k.lags, &forcing, p, k_max, p.x_e)?;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    let rows = (0..k.lags.len())
        .map(|i| {
            let fd = k.extrapolated[i] / k.t_hat;
            worst = worst.max((fd - reference[i]).abs());
            scale = scale.max(reference[i].abs());
            vec![num(k.lags[i]), num(fd), num(k.raw[i] / k.t_hat), num(reference[i])]
        })
        .collect::<Vec<_>>();
    let mut out = Outputs::default();
    out.push(csv_artifact("pod_kernel.csv", &["lag", "K_fd", "K_fd_raw", "K_linear_reference"], rows)?);
    let mut summary = json!({
        "beta": beta,
        "probe": probe,
        "k_max": k_max,
        "direction_norm": k.direction_norm,
        "off_branch": k.off_branch,
        "max_error_indicator": k.max_error_indicator,
        "max_abs_difference": worst,
        "relative_difference": if scale > 0.0 { worst / scale } else { worst },
    });
    if a.as_printed {
        let (artifact, diff) = closed_form_comparison(p, beta, a)?;
        out.push(artifact);
        summary["closed_form_max_difference"] = json!(diff);
    }
    out.push(json_artifact("pod_kernel_summary.json", &summary)?);
    Ok(out)
}

/// Grid POD run from thermocline bumps against both closed-form variants at `x_E`.
fn closed_form_comparison(p: &PhysicalParams, beta: f64, a: &PodKernelArgs) -> CliResult<(crate::output::Artifact, f64)> {
    let amp = a.thermocline_amplitude;
    let hc = move |x: f64| amp * (-((x - 0.45) / 0.08f64).powi(2)).exp();
    let hn = move |x: f64| -0.8 * amp * (-((x - 0.55) / 0.08f64).powi(2)).exp();
    let xe = p.x_e;
    let (t_hat, width) = (a.t_hat, a.bump_width);
    let te = move |x: f64| t_hat * (-((x - xe) / width).powi(2)).exp();
    let model = PodModel::with_beta(p, a.n, beta)?;
    let mut s = PodState::from_pde(&enso_mz::pde::PdeState::zeros(a.n));
    for i in 0..=a.n {
        let x = s.x_grid[i];
        s.h_c[i] = hc(x);
        s.h_n[i] = hn(x);
        s.t_e[i] = te(x);
    }
    s.te_east = te(xe);
    let run = model.integrate(s, a.t_end, &PodOptions::default())?;
    let init = Thermocline { h_c: &hc, h_n: &hn };
    let stride = (run.te_east.len() / 200).max(1);
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for (k, t) in run.times().into_iter().enumerate().step_by(stride) {
        let form = |f| pod::closed_form_te_q(p, beta, &init, t_hat, xe, t, Characteristics::Reflected, f);
        let tanh = form(ClosedForm::Tanh)?;
        let printed = form(ClosedForm::AsPrinted)?;
        worst = worst.max((run.te_east[k] - tanh).abs());
        rows.push(vec![num(t), num(run.te_east[k]), num(tanh), num(printed)]);
    }
    Ok((csv_artifact("closed_form.csv", &["t", "T_grid", "T_tanh", "T_as_printed"], rows)?, worst))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchArg {
    Trivial,
    Nontrivial,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HopfArgs {
    #[arg(long, value_parser = parse_model, default_value = "voc")]
    pub model: ModelKind,
    #[arg(long, default_value_t = 0.49)]
    pub gamma: f64,
    #[arg(long, value_enum, default_value_t = BranchArg::Trivial)]
    pub branch: BranchArg,
    #[arg(long, default_value_t = 0.05)]
    pub omega_min: f64,
    #[arg(long, default_value_t = 3.0)]
    pub omega_max: f64,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

fn hopf(a: &HopfArgs) -> CliResult<Outputs> {
    if !ModelKind::SCALED.contains(&a.model) {
        return Err(CliError::Usage("hopf curves are defined for ss, voc and mz".into()));
    }
    if !(a.omega_min > 0.0 && a.omega_max > a.omega_min) {
        return Err(CliError::Usage("need 0 < omega_min < omega_max".into()));
    }
    let branch = match a.branch {
        BranchArg::Trivial => bif::Branch::Trivial,
        BranchArg::Nontrivial => bif::Branch::Nontrivial,
    };
    let curve = bif::hopf_curve(a.model, a.gamma, branch, (a.omega_min, a.omega_max), a.points);
    let rows = curve.points.iter().map(|h| vec![num(h.alpha), num(h.delta), num(h.omega), num(h.residual)]);
    let mut out = Outputs::default();
    out.push(csv_artifact("hopf.csv", &["alpha", "delta", "omega", "residual"], rows)?);
    Ok(out)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundaryArgs {
    #[arg(long, value_parser = parse_model, default_value = "voc")]
    pub model: ModelKind,
    #[arg(long, default_value_t = 0.49)]
    pub gamma: f64,
    /// `lo:hi:step` over alpha in (0, 1).
    #[arg(long, value_parser = parse_range, default_value = "0.5:0.95:0.05")]
    pub alpha: Grid,
    #[arg(long, default_value_t = 0.01)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
}

fn boundary(a: &BoundaryArgs) -> CliResult<Outputs> {
    if !ModelKind::SCALED.contains(&a.model) {
        return Err(CliError::Usage("boundaries are defined for ss, voc and mz".into()));
    }
    let settings = SimSettings { dt: a.dt, ..Default::default() };
    let pts = bif::oscillation_boundary(a.model, a.gamma, &a.alpha.0, &settings, a.tol)?;
    let rows = pts
        .iter()
        .map(|b| vec![num(b.alpha), opt_num(b.delta), num(b.bracket.0), num(b.bracket.1), b.flagged.to_string()]);
    let mut out = Outputs::default();
    out.push(csv_artifact("boundary.csv", &["alpha", "delta", "delta_lo", "delta_hi", "flagged"], rows)?);
    Ok(out)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    /// Use the standard theta, A0 and y_n grid.
    #[arg(long)]
    pub table1: bool,
    /// `lo:hi:step` or a single value; the parameter value when omitted.
    #[arg(long, value_parser = parse_range)]
    pub theta: Option<Grid>,
    #[arg(long, value_parser = parse_range)]
    pub a0: Option<Grid>,
    #[arg(long, value_parser = parse_range)]
    pub y_n: Option<Grid>,
    #[arg(long, value_parser = parse_model, value_delimiter = ',', default_value = "ss,voc")]
    pub models: Vec<ModelKind>,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
}

pub fn sweep_spec(p: &PhysicalParams, a: &SweepArgs) -> CliResult<SweepSpec> {
    let mut spec = if a.table1 {
        SweepSpec::table1(*p)
    } else {
        SweepSpec {
            base: *p,
            thetas: vec![p.theta],
            a0s: vec![p.a0],
            y_ns: vec![p.y_n],
            models: Vec::new(),
            settings: SimSettings::default(),
        }
    };
    if let Some(v) = &a.theta {
        spec.thetas = v.0.clone();
    }
    if let Some(v) = &a.a0 {
        spec.a0s = v.0.clone();
    }
    if let Some(v) = &a.y_n {
        spec.y_ns = v.0.clone();
    }
    if let Some(k) = a.models.iter().find(|k| !ModelKind::SCALED.contains(k)) {
        return Err(CliError::Usage(format!("sweeps run ss, voc and mz, not {k}")));
    }
    spec.models = a.models.clone();
    spec.settings.dt = a.dt;
    Ok(spec)
}

fn sweep_period(p: &PhysicalParams, a: &SweepArgs) -> CliResult<Outputs> {
    let spec = sweep_spec(p, a)?;
    let grid = bif::period_sweep(&spec);
    let mut rows = Vec::new();
    for c in &grid.cells {
        for o in &c.outcomes {
            rows.push(vec![
                num(c.theta),
                num(c.a0),
                num(c.y_n),
                opt_num(c.alpha),
                opt_num(c.gamma),
                opt_num(c.delta),
                o.kind.to_string(),
                o.classification.to_string(),
                opt_num(o.period),
                opt_num(o.period_years),
                num(o.amplitude),
            ]);
        }
        if c.outcomes.is_empty() {
            let e = c.error.clone().unwrap_or_default();
            rows.push(vec![num(c.theta), num(c.a0), num(c.y_n), opt_num(c.alpha), opt_num(c.gamma), opt_num(c.delta), String::new(), format!("error: {e}"), String::new(), String::new(), String::new()]);
        }
    }
    let header =
        ["theta", "A0", "y_n", "alpha", "gamma", "delta", "model", "classification", "period", "period_years", "amplitude"];
    let mut per_model = serde_json::Map::new();
    for &kind in &spec.models {
        let years: Vec<f64> = grid.cells.iter().filter_map(|c| c.outcome(kind)?.period_years).collect();
        let lo = years.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = years.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        per_model.insert(
            kind.to_string(),
            json!({
                "oscillating_cells": years.len(),
                "period_years_min": if years.is_empty() { None } else { Some(lo) },
                "period_years_max": if years.is_empty() { None } else { Some(hi) },
            }),
        );
    }
    let errors = grid.cells.iter().filter(|c| c.error.is_some()).count();
    let mut out = Outputs::default();
    out.push(csv_artifact("sweep.csv", &header, rows)?);
    out.push(json_artifact(
        "sweep_summary.json",
        &json!({
            "cells": grid.cells.len(),
            "cells_with_errors": errors,
            "thetas": spec.thetas,
            "A0s": spec.a0s,
            "y_ns": spec.y_ns,
            "settings": spec.settings,
            "units": {"period": "scaled time (1 / (c_S* - c_T(x_E)) crossing times)", "period_years": "years"},
            "models": per_model,
        }),
    )?);
    Ok(out)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 2048)]
    pub n: usize,
    /// Forcing widths, largest first.
    #[arg(long = "sigma", value_delimiter = ',', default_value = "0.04,0.02,0.01")]
    pub sigmas: Vec<f64>,
    /// End of the comparison window; three long delays by default.
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub nonlinear: bool,
    #[arg(long, default_value_t = 1e-3)]
    pub dde_dt: f64,
}

fn validate(p: &PhysicalParams, a: &ValidateArgs) -> CliResult<Outputs> {
    let opts = ValidationOptions { n: a.n, sigmas: a.sigmas.clone(), t_end: a.t_end, linear: !a.nonlinear, dde_dt: a.dde_dt };
    let report = validate_reduction(p, &opts)?;
    let rows = report
        .results
        .iter()
        .map(|r| vec![num(r.sigma_w), num(r.discrepancy), num(r.printed_discrepancy)]);
    let mut out = Outputs::default();
    out.push(json_artifact("validate.json", &report)?);
    out.push(csv_artifact("validate.csv", &["sigma_w", "discrepancy", "collapsed_discrepancy"], rows)?);
    if !report.monotone {
        out.failure = Some(format!(
            "discrepancy does not decrease with sigma_w: {:?}",
            report.results.iter().map(|r| (r.sigma_w, r.discrepancy)).collect::<Vec<_>>()
        ));
    }
    Ok(out)
}
