//! Physical constants and the nondimensional scaling chain.
//!
//! [`PhysicalParams`] holds the dimensional constants of the ocean-atmosphere
//! setup together with the dimensionless tunables of the two-strip model.
//! [`PhysicalParams::scale`] turns them into the feedback strengths
//! `c_S*`, `c_L*`, the delays and the scaled delay-model parameters
//! `(alpha, gamma, delta)`.
//!
//! The offset `h0` of the subsurface temperature profile is absorbed into the
//! anomaly definition and has no runtime parameter.
//!
//! Parameter files are flat JSON objects whose keys are the field names below
//! (see `params.schema.json` for units). Unknown keys are rejected; missing
//! keys take their default values.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::{Error, Result};

/// Seconds per year used when converting scaled times.
pub const SECONDS_PER_YEAR: f64 = 365.25 * 86_400.0;

/// Below this magnitude `c_S* - c_T(x_E)` is treated as zero.
const GROWTH_RATE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalParams {
    /// Newtonian cooling damping scale [1/s].
    #[serde(rename = "eps_T")]
    pub eps_t: f64,
    /// Basin length [m].
    #[serde(rename = "L")]
    pub l: f64,
    /// Speed of the first baroclinic Kelvin mode [m/s].
    pub c0: f64,
    /// Background wind forcing strength [m/s^2].
    pub tau0: f64,
    /// Wind parametrization constant [s].
    pub b_w: f64,
    /// Surface layer depth [m].
    #[serde(rename = "H1")]
    pub h1: f64,
    /// Top layer depth [m].
    #[serde(rename = "H")]
    pub h: f64,
    /// Depth scale of the temperature gradient [m].
    #[serde(rename = "H_tilde")]
    pub h_tilde: f64,
    /// Steepness of the subsurface temperature transition [m].
    #[serde(rename = "H_star")]
    pub h_star: f64,
    /// Equilibrium temperature without dynamics [degC].
    #[serde(rename = "T0")]
    pub t0: f64,
    /// Background subsurface temperature [degC].
    #[serde(rename = "Ts0")]
    pub ts0: f64,
    /// Rayleigh friction coefficient [1/s].
    #[serde(rename = "a_M")]
    pub a_m: f64,
    /// Steepness of the tanh switch in the local coefficients.
    pub eps_small: f64,
    /// Eastern reference point where the SST feedback is evaluated.
    #[serde(rename = "x_E")]
    pub x_e: f64,
    /// Center of the background wind forcing profile.
    pub x0_wind: f64,
    /// Coupling coefficient of the wind forcing.
    pub mu: f64,
    /// Wind forcing factor at the Rossby strip latitude.
    pub theta: f64,
    /// Wind forcing strength.
    #[serde(rename = "A0")]
    pub a0: f64,
    /// Rossby strip latitude (in equatorial deformation radii).
    pub y_n: f64,
    /// Western boundary mass-flux measure.
    #[serde(rename = "r_W")]
    pub r_w: f64,
    /// Eastern boundary mass-flux measure.
    #[serde(rename = "r_E")]
    pub r_e: f64,
    /// Location of the localized wind forcing.
    pub x_w: f64,
    /// Proportionality constant between SST and subsurface temperature anomalies.
    pub c_se: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            eps_t: 9.25e-8,
            l: 1.5e7,
            c0: 2.0,
            tau0: 2.667e-7,
            b_w: 1.026e2,
            h1: 50.0,
            h: 200.0,
            h_tilde: 50.0,
            h_star: 30.0,
            t0: 30.0,
            ts0: 22.0,
            a_m: 1.3e-8,
            eps_small: 1e-4,
            x_e: 0.9,
            x0_wind: 0.57,
            mu: 1.0,
            theta: 3.0,
            a0: 0.2,
            y_n: 2.0,
            r_w: 0.6,
            r_e: 0.0,
            x_w: 0.6,
            c_se: 1.0,
        }
    }
}

/// Coefficients derived from [`PhysicalParams`] by [`PhysicalParams::scale`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledParams {
    pub eps0: f64,
    pub eps_w: f64,
    pub alpha0: f64,
    #[serde(rename = "deltaF1")]
    pub delta_f1: f64,
    #[serde(rename = "cT_E")]
    pub ct_e: f64,
    #[serde(rename = "chstar_E")]
    pub chstar_e: f64,
    pub cs_star: f64,
    pub cl_star: f64,
    pub d: f64,
    pub d_short: f64,
    pub beta: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
    /// One scaled time unit in seconds.
    pub time_scale_seconds: f64,
    #[serde(rename = "A_rW")]
    pub a_rw: f64,
    #[serde(rename = "A_rE")]
    pub a_re: f64,
}

impl ScaledParams {
    /// Growth rate `c_S* - c_T(x_E)` of the undelayed linear part.
    pub fn growth_rate(&self) -> f64 {
        self.cs_star - self.ct_e
    }

    /// Converts a scaled time into seconds.
    pub fn dimensionalize_time(&self, t_scaled: f64) -> f64 {
        t_scaled * self.time_scale_seconds
    }

    pub fn dimensionalize_years(&self, t_scaled: f64) -> f64 {
        self.dimensionalize_time(t_scaled) / SECONDS_PER_YEAR
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("eps_T", self.eps_t),
            ("L", self.l),
            ("c0", self.c0),
            ("tau0", self.tau0),
            ("b_w", self.b_w),
            ("H1", self.h1),
            ("H", self.h),
            ("H_tilde", self.h_tilde),
            ("H_star", self.h_star),
            ("T0", self.t0),
            ("Ts0", self.ts0),
            ("a_M", self.a_m),
            ("eps_small", self.eps_small),
            ("x_E", self.x_e),
            ("x0_wind", self.x0_wind),
            ("mu", self.mu),
            ("theta", self.theta),
            ("A0", self.a0),
            ("y_n", self.y_n),
            ("r_W", self.r_w),
            ("r_E", self.r_e),
            ("x_w", self.x_w),
            ("c_se", self.c_se),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        for (name, v) in [
            ("L", self.l),
            ("c0", self.c0),
            ("H1", self.h1),
            ("H", self.h),
            ("H_tilde", self.h_tilde),
            ("H_star", self.h_star),
            ("eps_small", self.eps_small),
            ("x0_wind", self.x0_wind),
        ] {
            if v <= 0.0 {
                return Err(invalid(name, "must be positive"));
            }
        }
        if self.t0 <= self.ts0 {
            return Err(invalid("T0", "must exceed Ts0"));
        }
        if !(0.0 < self.x_w && self.x_w < self.x_e && self.x_e < 1.0) {
            return Err(invalid("x_w", "need 0 < x_w < x_E < 1"));
        }
        if self.y_n <= 1.0 {
            return Err(invalid("y_n", "must exceed 1"));
        }
        if self.r_w < 0.0 || self.r_e < 0.0 {
            return Err(invalid("r_W", "boundary mass-flux measures must be non-negative"));
        }
        Ok(())
    }

    /// `1 + y_n^2`, the Kelvin-plus-Rossby round-trip time of the basin.
    pub fn round_trip(&self) -> f64 {
        1.0 + self.y_n * self.y_n
    }

    /// Friction damping `eps0 = a_M L / c0`.
    pub fn eps0(&self) -> f64 {
        self.a_m * self.l / self.c0
    }

    /// Basin crossing time `L / c0` in seconds.
    pub fn crossing_time_seconds(&self) -> f64 {
        self.l / self.c0
    }

    pub fn beta(&self) -> f64 {
        (self.c_se / (self.t0 - self.ts0)).powi(2)
    }

    /// Western reflection coefficient `r_W (1 + y_n^2) - 1`.
    pub fn a_rw(&self) -> f64 {
        self.r_w * self.round_trip() - 1.0
    }

    /// Eastern reflection coefficient `((1 + y_n^2)/r_E - 1)^-1`, zero for `r_E = 0`.
    pub fn a_re(&self) -> f64 {
        if self.r_e == 0.0 {
            0.0
        } else {
            1.0 / (self.round_trip() / self.r_e - 1.0)
        }
    }

    /// Background wind forcing profile `F(x)`.
    pub fn background_forcing(&self, x: f64) -> Result<f64> {
        check_position(x)?;
        let c = (PI * (x - self.x0_wind) / (2.0 * self.x0_wind)).cos();
        Ok(0.6 * (0.12 - c * c))
    }

    /// Local damping `c_T(x)` and thermocline feedback `c_h*(x)`.
    pub fn local_coeffs(&self, x: f64) -> Result<(f64, f64)> {
        let f = self.background_forcing(x)?;
        let eps_w = self.eps_t * self.l / self.c0;
        let alpha0 = self.h1 / self.h_tilde;
        let df = self.delta_f1() * f;
        let switch = (df / self.eps_small).tanh();
        let ct = eps_w + 0.5 * (1.0 - alpha0 + (1.0 + alpha0) * switch) * df;
        let ch = 0.5 * (switch - 1.0) * alpha0 * df * (self.t0 - self.ts0) * self.h / self.h_star;
        Ok((ct, ch))
    }

    fn delta_f1(&self) -> f64 {
        (self.tau0 * self.l / self.c0) * (self.b_w / self.h1)
    }

    pub fn scale(&self) -> Result<ScaledParams> {
        self.validate()?;
        let eps0 = self.eps0();
        let y2 = self.y_n * self.y_n;
        let rt = self.round_trip();
        let (ct_e, chstar_e) = self.local_coeffs(self.x_e)?;
        let a_rw = self.a_rw();
        let d = 1.0 + y2 * self.x_w;
        let d_short = 1.0 - self.x_w;
        let cs_star = self.mu * self.a0 * (1.0 - self.theta / rt) * chstar_e * (-eps0 * d_short).exp();
        let cl_star = self.mu * self.a0 * (self.theta / y2) * (a_rw / rt) * chstar_e * (-eps0 * d).exp();
        let growth = cs_star - ct_e;
        if growth <= GROWTH_RATE_FLOOR {
            return Err(Error::NonPositiveGrowthRate { cs_star, ct_e });
        }
        Ok(ScaledParams {
            eps0,
            eps_w: self.eps_t * self.l / self.c0,
            alpha0: self.h1 / self.h_tilde,
            delta_f1: self.delta_f1(),
            ct_e,
            chstar_e,
            cs_star,
            cl_star,
            d,
            d_short,
            beta: self.beta(),
            alpha: cl_star / growth,
            gamma: growth / cs_star,
            delta: growth * d,
            time_scale_seconds: self.crossing_time_seconds() / growth,
            a_rw,
            a_re: self.a_re(),
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text).map_err(|e| Error::ParamFile(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("flat struct of floats serializes")
    }

    /// Applies `key=value` style overrides. Keys may carry a `params.` prefix.
    pub fn with_overrides<'a, I>(&self, overrides: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut value = serde_json::to_value(self).map_err(|e| Error::ParamFile(e.to_string()))?;
        let map = value.as_object_mut().expect("params serialize to an object");
        for (key, v) in overrides {
            let key = key.strip_prefix("params.").unwrap_or(key);
            if !map.contains_key(key) {
                return Err(Error::ParamFile(format!("unknown parameter key `{key}`")));
            }
            let num = serde_json::Number::from_f64(v)
                .ok_or_else(|| Error::ParamFile(format!("non-finite override for `{key}`")))?;
            map.insert(key.to_string(), serde_json::Value::Number(num));
        }
        let p: Self = serde_json::from_value(value).map_err(|e| Error::ParamFile(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

pub(crate) fn check_position(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::OutsideDomain { x })
    }
}

fn invalid(name: &'static str, reason: &str) -> Error {
    Error::InvalidParameter { name, reason: reason.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn forcing_at_center_and_domain_edge() {
        let p = PhysicalParams::default();
        assert!((p.background_forcing(0.57).unwrap() + 0.528).abs() < 1e-15);
        assert_eq!(p.background_forcing(1.14), Err(Error::OutsideDomain { x: 1.14 }));
        assert!(p.background_forcing(-0.01).is_err());
        // 50-digit evaluation of 0.6 (0.12 - cos^2(0.33 pi / 1.14))
        let f = p.background_forcing(0.9).unwrap();
        assert!((f - (-0.154_354_353_857_760_26)).abs() < 1e-15);
    }

    #[test]
    fn local_coefficients_at_defaults() {
        let p = PhysicalParams::default();
        assert_eq!(p.eps_t * p.l / p.c0, 0.69375);
        let (ct, ch) = p.local_coeffs(p.x_e).unwrap();
        // alpha0 = 1 leaves c_T = eps_w + tanh(.) dF F, the switch saturated at -1
        assert!((ct - 1.327_299_452_015_777).abs() < 1e-12);
        assert!((ch - 33.789_304_107_508_11).abs() < 1e-10);
    }

    #[test]
    fn feedback_vanishes_with_forcing() {
        // F(x) -> 0 from above at the western zero of F
        let p = PhysicalParams::default();
        let x0 = 0.57 - 2.0 * 0.57 / PI * (0.12f64.sqrt()).acos();
        assert!(p.background_forcing(x0 - 1e-9).unwrap() > 0.0);
        let (_, ch) = p.local_coeffs(x0 - 1e-9).unwrap();
        assert!(ch.abs() < 1e-6, "{ch}");
    }

    #[test]
    fn scale_at_defaults() {
        let s = PhysicalParams::default().scale().unwrap();
        assert!((s.d - 3.4).abs() < 1e-15);
        assert!((s.d_short - 0.4).abs() < 1e-15);
        assert_eq!(s.a_rw, 2.0);
        assert_eq!(s.a_re, 0.0);
        assert_eq!(s.eps0, 0.0975);
        assert_eq!(s.beta, 1.0 / 64.0);
        // 30-digit evaluation of the scaling chain
        assert!((s.alpha - 1.143_722_411_621_023_1).abs() < 1e-12);
        assert!((s.gamma - 0.489_451_310_990_312_2).abs() < 1e-12);
        assert!((s.delta - 4.326_335_177_998_980).abs() < 1e-11);
        assert!(s.gamma > 0.0 && s.gamma < 1.0);
    }

    #[test]
    fn dimensional_time() {
        let p = PhysicalParams::default();
        let s = p.scale().unwrap();
        assert_eq!(s.dimensionalize_time(0.0), 0.0);
        assert_eq!(p.crossing_time_seconds(), 7.5e6);
        // scaled delay maps back onto d basin crossings
        let secs = s.dimensionalize_time(s.delta);
        assert!((secs - 3.4 * 7.5e6).abs() < 1e-6);
        assert!((secs / SECONDS_PER_YEAR - 0.808).abs() < 1e-3);
    }

    #[test]
    fn non_positive_growth_is_an_error() {
        let p = PhysicalParams { a0: 0.1, theta: 4.0, ..Default::default() };
        assert!(matches!(p.scale(), Err(Error::NonPositiveGrowthRate { .. })));
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let p = PhysicalParams { theta: 2.4, ..Default::default() };
        let text = p.to_json_pretty();
        assert!(text.contains("\"eps_T\"") && text.contains("\"H_star\"") && text.contains("\"r_W\""));
        assert_eq!(PhysicalParams::from_json_str(&text).unwrap(), p);
        assert!(PhysicalParams::from_json_str(r#"{"thetta": 2.0}"#).is_err());
        let partial = PhysicalParams::from_json_str(r#"{"A0": 0.3}"#).unwrap();
        assert_eq!(partial.a0, 0.3);
        assert_eq!(partial.theta, 3.0);
    }

    #[test]
    fn overrides_use_schema_keys() {
        let p = PhysicalParams::default().with_overrides([("params.A0", 0.35), ("y_n", 2.2)]).unwrap();
        assert_eq!((p.a0, p.y_n), (0.35, 2.2));
        assert!(PhysicalParams::default().with_overrides([("a0", 0.3)]).is_err());
        assert!(PhysicalParams::default().with_overrides([("x_w", 0.95)]).is_err());
    }

    proptest! {
        #[test]
        fn stored_scaled_fields_are_consistent(theta in 2.2f64..3.6, a0 in 0.15f64..0.6, y_n in 1.8f64..2.4) {
            let p = PhysicalParams { theta, a0, y_n, ..Default::default() };
            if let Ok(s) = p.scale() {
                let g = s.cs_star - s.ct_e;
                prop_assert!((s.alpha - s.cl_star / g).abs() <= 1e-14 * s.alpha.abs());
                prop_assert!((s.gamma - g / s.cs_star).abs() <= 1e-14);
                prop_assert!((s.delta - g * s.d).abs() <= 1e-13 * s.delta);
                prop_assert!(s.gamma > 0.0 && s.gamma < 1.0);
            }
        }

        #[test]
        fn scaled_parameters_ignore_c_se(c_se in 0.5f64..2.0) {
            let base = PhysicalParams::default().scale().unwrap();
            let s = PhysicalParams { c_se, ..Default::default() }.scale().unwrap();
            prop_assert_eq!(s.gamma, base.gamma);
            prop_assert_eq!(s.alpha, base.alpha);
            prop_assert_eq!(s.delta, base.delta);
            prop_assert!((s.beta - c_se * c_se / 64.0).abs() < 1e-15);
        }

        #[test]
        fn delays_depend_only_on_geometry(eps_t in 5e-8f64..2e-7, tau0 in 2e-7f64..3e-7, h_star in 20.0f64..40.0) {
            let p = PhysicalParams { eps_t, tau0, h_star, ..Default::default() };
            if let Ok(s) = p.scale() {
                prop_assert_eq!(s.d, 1.0 + 4.0 * 0.6);
                prop_assert_eq!(s.d_short, 1.0 - 0.6);
            }
        }

        #[test]
        fn eastern_reflection_is_monotone(r1 in 0.0f64..1.0, r2 in 0.0f64..1.0) {
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            let a = PhysicalParams { r_e: lo, ..Default::default() }.a_re();
            let b = PhysicalParams { r_e: hi, ..Default::default() }.a_re();
            prop_assert!(a <= b);
            prop_assert!(a >= 0.0);
        }
    }
}
