//! Memory kernel of the SST at a probe point after the thermocline has been
//! eliminated.
//!
//! A wind anomaly at `x` launches a Kelvin signal that reaches the probe
//! `x_p` directly and a Rossby signal that travels west, reflects into a
//! Kelvin wave at `x = 0` and then arrives. Every further trip around the
//! basin (east reflection, west reflection) multiplies the weight by
//! `A_rE A_rW e^{-eps0 (1 + y_n^2)}`. The functions here return the kernel
//! as a density in the lag `tau`, so that the memory term reads
//! `int K(tau) T_e(x_E, t - tau) dtau`.
//!
//! The default probe is the eastern boundary `x_p = 1`.

use serde::{Deserialize, Serialize};

use crate::params::{check_position, PhysicalParams};
use crate::pde::WindForcing;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelBranch {
    KelvinFirst,
    RossbyFirst,
}

/// One active contribution to the kernel at a given lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSample {
    pub branch: KernelBranch,
    /// Number of extra round trips.
    pub k: usize,
    /// Source position feeding this lag.
    pub source: f64,
    pub value: f64,
}

struct Geometry {
    y2: f64,
    rt: f64,
    eps0: f64,
    kelvin: f64,
    rossby: f64,
    q: f64,
    probe: f64,
}

impl Geometry {
    fn new(p: &PhysicalParams, probe: f64) -> Result<Self> {
        p.validate()?;
        check_position(probe)?;
        let (_, ch) = p.local_coeffs(p.x_e)?;
        let y2 = p.y_n * p.y_n;
        let rt = p.round_trip();
        let eps0 = p.eps0();
        Ok(Self {
            y2,
            rt,
            eps0,
            kelvin: p.mu * (1.0 - p.theta / rt) * ch,
            rossby: -p.mu * (p.theta / y2) * (p.a_rw() / rt) * ch,
            q: p.a_re() * p.a_rw(),
            probe,
        })
    }

    fn trips(&self, k: usize) -> f64 {
        self.q.powi(k as i32) * (-self.eps0 * k as f64 * self.rt).exp()
    }
}

/// Individual kernel contributions at lag `tau` for `k = 0..=k_max`.
pub fn kernel_terms(
    tau: f64,
    forcing: &WindForcing,
    p: &PhysicalParams,
    k_max: usize,
    probe: f64,
) -> Result<Vec<KernelSample>> {
    let g = Geometry::new(p, probe)?;
    Ok(terms(&g, tau, forcing, k_max))
}

fn terms(g: &Geometry, tau: f64, forcing: &WindForcing, k_max: usize) -> Vec<KernelSample> {
    let mut out = Vec::new();
    if tau < 0.0 {
        return out;
    }
    let damp = (-g.eps0 * tau).exp();
    for k in 0..=k_max {
        let shift = k as f64 * g.rt;
        if tau + 1.0 < shift {
            break;
        }
        let w = g.trips(k);
        if w == 0.0 {
            break;
        }
        let xk = g.probe + shift - tau;
        // without a round trip only sources west of the probe reach it
        let upper = if k == 0 { g.probe } else { 1.0 };
        if (0.0..=upper).contains(&xk) {
            // `trips` already holds the round-trip damping; strip it from `damp`
            let v = g.kelvin * forcing.eval(xk) * damp * (g.eps0 * shift).exp() * w;
            out.push(KernelSample { branch: KernelBranch::KelvinFirst, k, source: xk, value: v });
        }
        let xr = (tau - g.probe - shift) / g.y2;
        if (0.0..=1.0).contains(&xr) {
            let v = g.rossby * forcing.eval(xr) * damp * (g.eps0 * shift).exp() * w;
            out.push(KernelSample { branch: KernelBranch::RossbyFirst, k, source: xr, value: v });
        }
    }
    out
}

/// Kernel density at lag `tau` seen from the eastern boundary.
pub fn kernel_eval(tau: f64, forcing: &WindForcing, p: &PhysicalParams, k_max: usize) -> Result<f64> {
    kernel_eval_at(tau, forcing, p, k_max, 1.0)
}

pub fn kernel_eval_at(tau: f64, forcing: &WindForcing, p: &PhysicalParams, k_max: usize, probe: f64) -> Result<f64> {
    let g = Geometry::new(p, probe)?;
    Ok(terms(&g, tau, forcing, k_max).iter().map(|s| s.value).sum())
}

/// Kernel on a lag grid; one validation for the whole batch.
pub fn kernel_series(
    taus: &[f64],
    forcing: &WindForcing,
    p: &PhysicalParams,
    k_max: usize,
    probe: f64,
) -> Result<Vec<f64>> {
    let g = Geometry::new(p, probe)?;
    Ok(taus.iter().map(|&t| terms(&g, t, forcing, k_max).iter().map(|s| s.value).sum()).collect())
}

/// Largest reflection index that can contribute to the memory integral up to
/// time `t`; `-1` before the first full crossing.
pub fn kmax_at(t: f64, y_n: f64) -> i64 {
    if t < 1.0 {
        -1
    } else {
        ((t - 1.0) / (y_n * y_n + 1.0)).floor() as i64
    }
}

/// Round-trip attenuation `|A_rE A_rW| e^{-eps0 (1 + y_n^2)}`.
pub fn round_trip_factor(p: &PhysicalParams) -> f64 {
    (p.a_re() * p.a_rw()).abs() * (-p.eps0() * p.round_trip()).exp()
}

/// Smallest truncation whose first omitted trip is below `rel_tol` of the
/// leading term.
pub fn default_k_max(p: &PhysicalParams, rel_tol: f64) -> usize {
    let q = round_trip_factor(p);
    if q == 0.0 {
        return 0;
    }
    if q >= 1.0 {
        return 200;
    }
    let mut k = 0;
    let mut w = q;
    while w >= rel_tol && k < 200 {
        k += 1;
        w *= q;
    }
    k
}

/// Bound on the pointwise error from dropping trips beyond `k_max`.
pub fn truncation_bound(forcing: &WindForcing, p: &PhysicalParams, k_max: usize) -> Result<f64> {
    let g = Geometry::new(p, 1.0)?;
    let lead = g.kelvin.abs().max(g.rossby.abs()) * forcing.max_abs();
    Ok(lead * round_trip_factor(p).powi(k_max as i32 + 1))
}

/// Whether the Rossby-first delay coefficient keeps the `y_n^2` factor that
/// a point source picks up when the density is integrated over the lag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RossbyJacobian {
    /// Source strength times the pointwise coefficient (the usual delay model).
    #[default]
    Omitted,
    /// Integral of the density over the lag.
    Included,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayEntry {
    pub branch: KernelBranch,
    pub k: usize,
    pub lag: f64,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDelays {
    pub k_max: usize,
    pub jacobian: RossbyJacobian,
    pub probe: f64,
    pub entries: Vec<DelayEntry>,
}

impl DiscreteDelays {
    pub fn lags(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.lag).collect()
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.coefficient).collect()
    }
}

/// Collapses a point-like forcing into discrete delays. Entries whose weight
/// vanishes (for instance every round trip when `r_E = 0`) are dropped.
pub fn discrete_delays(
    forcing: &WindForcing,
    p: &PhysicalParams,
    k_max: usize,
    jacobian: RossbyJacobian,
    probe: f64,
) -> Result<DiscreteDelays> {
    let (x_w, a0) = forcing.as_delta().ok_or_else(|| Error::InvalidParameter {
        name: "forcing",
        reason: "discrete delays need a point-like forcing".into(),
    })?;
    let g = Geometry::new(p, probe)?;
    let jac = match jacobian {
        RossbyJacobian::Omitted => 1.0,
        RossbyJacobian::Included => g.y2,
    };
    let mut entries = Vec::new();
    for k in 0..=k_max {
        let w = g.trips(k);
        if w == 0.0 {
            break;
        }
        let shift = k as f64 * g.rt;
        if k > 0 || x_w <= probe {
            let lag = probe - x_w + shift;
            let coefficient = a0 * g.kelvin * (-g.eps0 * (lag - shift)).exp() * w;
            entries.push(DelayEntry { branch: KernelBranch::KelvinFirst, k, lag, coefficient });
        }
        let lag = probe + g.y2 * x_w + shift;
        let coefficient = jac * a0 * g.rossby * (-g.eps0 * (lag - shift)).exp() * w;
        entries.push(DelayEntry { branch: KernelBranch::RossbyFirst, k, lag, coefficient });
    }
    Ok(DiscreteDelays { k_max, jacobian, probe, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::simpson;
    use proptest::prelude::*;

    fn reflecting() -> PhysicalParams {
        PhysicalParams { r_e: 0.5, ..Default::default() }
    }

    fn wide(p: &PhysicalParams) -> WindForcing {
        WindForcing::delta_approx(p.x_w, p.a0, 0.05).unwrap()
    }

    #[test]
    fn delays_match_scaled_coefficients() {
        let p = PhysicalParams::default();
        let s = p.scale().unwrap();
        let g = WindForcing::from_params(&p, 0.01).unwrap();
        let d = discrete_delays(&g, &p, 5, RossbyJacobian::Omitted, 1.0).unwrap();
        assert_eq!(d.entries.len(), 2);
        assert!((d.entries[0].lag - s.d_short).abs() < 1e-15);
        assert!((d.entries[1].lag - s.d).abs() < 1e-15);
        assert!((d.entries[0].coefficient - s.cs_star).abs() < 1e-12 * s.cs_star);
        assert!((d.entries[1].coefficient + s.cl_star).abs() < 1e-12 * s.cl_star);
        let j = discrete_delays(&g, &p, 0, RossbyJacobian::Included, 1.0).unwrap();
        assert!((j.entries[1].coefficient + 4.0 * s.cl_star).abs() < 1e-12 * s.cl_star);
    }

    #[test]
    fn reflections_add_delay_pairs() {
        let p = reflecting();
        let g = WindForcing::from_params(&p, 0.01).unwrap();
        let d = discrete_delays(&g, &p, 2, RossbyJacobian::Omitted, 1.0).unwrap();
        assert_eq!(d.entries.len(), 6);
        let q = p.a_re() * p.a_rw() * (-p.eps0() * p.round_trip()).exp();
        for k in 1..3 {
            for b in 0..2 {
                let (a, c) = (d.entries[2 * (k - 1) + b], d.entries[2 * k + b]);
                assert!((c.lag - a.lag - p.round_trip()).abs() < 1e-14);
                assert!((c.coefficient / a.coefficient - q).abs() < 1e-12);
            }
        }
        assert!(discrete_delays(&WindForcing::tabulated(vec![1.0, 1.0]).unwrap(), &p, 1, RossbyJacobian::Omitted, 1.0).is_err());
    }

    #[test]
    fn density_integrates_to_the_delay_coefficients() {
        // the Rossby density is stretched by y^2 in the lag, so its integral
        // carries that factor over the pointwise coefficient
        let p = PhysicalParams::default();
        let s = p.scale().unwrap();
        let g = WindForcing::from_params(&p, 0.002).unwrap();
        let f = |t: f64| kernel_eval(t, &g, &p, 0).unwrap();
        let kelvin = simpson(f, 0.0, 1.0, 20_000);
        let rossby = simpson(f, 1.0, 5.0, 80_000);
        assert!((kelvin / s.cs_star - 1.0).abs() < 1e-4, "{}", kelvin / s.cs_star);
        assert!((rossby / (-4.0 * s.cl_star) - 1.0).abs() < 1e-4, "{}", rossby / s.cl_star);
    }

    #[test]
    fn round_trips_scale_by_the_reflection_ratio() {
        let p = reflecting();
        let g = wide(&p);
        let q = p.a_re() * p.a_rw() * (-p.eps0() * p.round_trip()).exp();
        for tau in [0.3, 0.55, 2.0, 3.7] {
            let a = kernel_terms(tau, &g, &p, 4, 1.0).unwrap();
            let b = kernel_terms(tau + p.round_trip(), &g, &p, 4, 1.0).unwrap();
            for s in &a {
                let next = b.iter().find(|t| t.branch == s.branch && t.k == s.k + 1).unwrap();
                assert!((next.value / s.value - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn truncation_meets_its_bound() {
        let p = reflecting();
        let g = wide(&p);
        let k = default_k_max(&p, 1e-10);
        assert!(k > 0);
        let scale = (0..2000)
            .map(|i| kernel_eval(i as f64 * 0.005, &g, &p, 200).unwrap().abs())
            .fold(0.0, f64::max);
        let bound = truncation_bound(&g, &p, k).unwrap();
        assert!(bound < 1e-9 * scale);
        for i in 0..4000 {
            let tau = i as f64 * 0.02;
            let err = (kernel_eval(tau, &g, &p, k).unwrap() - kernel_eval(tau, &g, &p, 200).unwrap()).abs();
            assert!(err <= bound * (1.0 + 1e-9), "{tau}");
        }
        assert_eq!(default_k_max(&PhysicalParams::default(), 1e-10), 0);
    }

    #[test]
    fn kmax_counts_completed_trips() {
        assert_eq!(kmax_at(0.5, 2.0), -1);
        assert_eq!(kmax_at(1.0, 2.0), 0);
        assert_eq!(kmax_at(5.99, 2.0), 0);
        assert_eq!(kmax_at(6.0, 2.0), 1);
    }

    #[test]
    fn kelvin_first_needs_a_source_west_of_the_probe() {
        let p = PhysicalParams::default();
        let g = WindForcing::tabulated(vec![1.0; 11]).unwrap();
        // probe at 0.5: lag 0.2 means a source at 0.3
        let t = kernel_terms(0.2, &g, &p, 0, 0.5).unwrap();
        assert_eq!(t.len(), 1);
        assert!((t[0].source - 0.3).abs() < 1e-15);
        assert!(kernel_terms(-0.1, &g, &p, 0, 0.5).unwrap().is_empty());
        assert!(kernel_eval_at(0.2, &g, &p, 0, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn branch_signs(tau in 0.0..20.0f64, theta in 0.5..4.9f64, r_e in 0.0..0.9f64) {
            let p = PhysicalParams { theta, r_e, ..Default::default() };
            let g = wide(&p);
            for s in kernel_terms(tau, &g, &p, 3, 1.0).unwrap() {
                match s.branch {
                    KernelBranch::KelvinFirst => prop_assert!(s.value >= 0.0),
                    KernelBranch::RossbyFirst => prop_assert!(s.value <= 0.0),
                }
            }
        }

        #[test]
        fn weights_bounded_by_reflection_powers(tau in 0.0..20.0f64, r_e in 0.0..0.9f64) {
            let p = PhysicalParams { r_e, ..Default::default() };
            let g = wide(&p);
            let (_, ch) = p.local_coeffs(p.x_e).unwrap();
            let lead = p.mu * g.max_abs() * ch;
            for s in kernel_terms(tau, &g, &p, 3, 1.0).unwrap() {
                prop_assert!(s.value.abs() <= lead * (p.a_re() * p.a_rw()).abs().powi(s.k as i32) * (1.0 + 1e-12));
            }
        }
    }
}
