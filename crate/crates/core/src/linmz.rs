//! Memory-integral reduction of linear block systems.
//!
//! For `d/dt (u, v) = [[A11, A12], [A21, A22]] (u, v)` the unresolved block
//! `v` can be eliminated exactly:
//!
//! ```text
//! du/dt = A11 u(t) + A12 e^{A22 t} v0 + ∫_0^t A12 e^{A22 (t-s)} A21 u(s) ds
//! ```
//!
//! The three terms are the Markovian part, the noise part and the memory part.
//! [`reduce_and_integrate`] integrates this form directly and
//! [`integrate_full`] integrates the original system, so the two can be
//! compared.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BlockLinearSystem {
    pub a11: DMatrix<f64>,
    pub a12: DMatrix<f64>,
    pub a21: DMatrix<f64>,
    pub a22: DMatrix<f64>,
    pub x_hat0: DVector<f64>,
    pub x_tilde0: DVector<f64>,
}

impl BlockLinearSystem {
    pub fn new(
        a11: DMatrix<f64>,
        a12: DMatrix<f64>,
        a21: DMatrix<f64>,
        a22: DMatrix<f64>,
        x_hat0: DVector<f64>,
        x_tilde0: DVector<f64>,
    ) -> Result<Self> {
        let m = a11.nrows();
        let r = a22.nrows();
        let ok = m >= 1
            && r >= 1
            && a11.shape() == (m, m)
            && a12.shape() == (m, r)
            && a21.shape() == (r, m)
            && a22.shape() == (r, r)
            && x_hat0.len() == m
            && x_tilde0.len() == r;
        if !ok {
            return Err(Error::Dimension(format!(
                "blocks {:?} {:?} {:?} {:?} with states {} and {}",
                a11.shape(),
                a12.shape(),
                a21.shape(),
                a22.shape(),
                x_hat0.len(),
                x_tilde0.len()
            )));
        }
        Ok(Self { a11, a12, a21, a22, x_hat0, x_tilde0 })
    }

    /// Splits a full `n x n` matrix after the first `m` coordinates.
    pub fn from_full(a: &DMatrix<f64>, m: usize, x0: &DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || x0.len() != n || m == 0 || m >= n {
            return Err(Error::Dimension(format!("cannot split {:?} at {m}", a.shape())));
        }
        Self::new(
            a.view((0, 0), (m, m)).into_owned(),
            a.view((0, m), (m, n - m)).into_owned(),
            a.view((m, 0), (n - m, m)).into_owned(),
            a.view((m, m), (n - m, n - m)).into_owned(),
            x0.rows(0, m).into_owned(),
            x0.rows(m, n - m).into_owned(),
        )
    }

    pub fn resolved_dim(&self) -> usize {
        self.a11.nrows()
    }

    pub fn full_matrix(&self) -> DMatrix<f64> {
        let m = self.resolved_dim();
        let r = self.a22.nrows();
        let mut a = DMatrix::zeros(m + r, m + r);
        a.view_mut((0, 0), (m, m)).copy_from(&self.a11);
        a.view_mut((0, m), (m, r)).copy_from(&self.a12);
        a.view_mut((m, 0), (r, m)).copy_from(&self.a21);
        a.view_mut((m, m), (r, r)).copy_from(&self.a22);
        a
    }

    pub fn full_state0(&self) -> DVector<f64> {
        let m = self.resolved_dim();
        let mut x = DVector::zeros(m + self.x_tilde0.len());
        x.rows_mut(0, m).copy_from(&self.x_hat0);
        x.rows_mut(m, self.x_tilde0.len()).copy_from(&self.x_tilde0);
        x
    }
}

// Padé [13/13] coefficients for scaling and squaring.
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371_920_351_148_152;

/// `e^{M t}` by scaling and squaring with a degree-13 Padé approximant.
pub fn matrix_exponential(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension(format!("matrix exponential of non-square {:?}", m.shape())));
    }
    if m.iter().any(|v| !v.is_finite()) || !t.is_finite() {
        return Err(Error::NonFinite { field: "matrix", t });
    }
    let a = m * t;
    let norm1 = (0..n).map(|j| a.column(j).abs().sum()).fold(0.0, f64::max);
    let s = if norm1 > THETA13 { (norm1 / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a / 2f64.powi(s);

    let b = &PADE13;
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::NoConvergence("singular Padé denominator".into()))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

#[derive(Debug, Clone)]
pub struct FullTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub resolved_dim: usize,
}

impl FullTrajectory {
    pub fn resolved(&self, i: usize) -> DVector<f64> {
        self.states[i].rows(0, self.resolved_dim).into_owned()
    }
}

/// Classical RK4 on the full system.
pub fn integrate_full(sys: &BlockLinearSystem, t_end: f64, dt: f64) -> Result<FullTrajectory> {
    let steps = step_count(t_end, dt)?;
    let a = sys.full_matrix();
    let mut x = sys.full_state0();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(x.clone());
    for i in 0..steps {
        let k1 = &a * &x;
        let k2 = &a * (&x + &k1 * (0.5 * dt));
        let k3 = &a * (&x + &k2 * (0.5 * dt));
        let k4 = &a * (&x + &k3 * dt);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        times.push((i + 1) as f64 * dt);
        states.push(x.clone());
    }
    Ok(FullTrajectory { times, states, resolved_dim: sys.resolved_dim() })
}

#[derive(Debug, Clone)]
pub struct ReducedTrajectory {
    pub times: Vec<f64>,
    pub phi_hat: Vec<DVector<f64>>,
    pub markov_part: Vec<DVector<f64>>,
    pub noise_part: Vec<DVector<f64>>,
    pub memory_part: Vec<DVector<f64>>,
}

/// Memory kernels `A12 e^{A22 j dt} A21` for `j = 0..=n`.
pub fn memory_kernels(sys: &BlockLinearSystem, dt: f64, n: usize) -> Result<Vec<DMatrix<f64>>> {
    let e = matrix_exponential(&sys.a22, dt)?;
    let mut prop = sys.a21.clone();
    let mut out = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        out.push(&sys.a12 * &prop);
        prop = &e * prop;
    }
    Ok(out)
}

/// Trapezoid-rule memory integral at the last node of a history sampled on
/// the step grid `0, dt, ..., (len-1) dt`.
pub fn memory_term(kernels: &[DMatrix<f64>], history: &[DVector<f64>], dt: f64) -> DVector<f64> {
    let j = history.len() - 1;
    let m = kernels[0].nrows();
    let mut acc = DVector::zeros(m);
    if j == 0 {
        return acc;
    }
    for (i, phi) in history.iter().enumerate() {
        let w = if i == 0 || i == j { 0.5 } else { 1.0 };
        acc += &kernels[j - i] * phi * w;
    }
    acc * dt
}

/// Integrates the memory-integral form with the implicit trapezoid rule in
/// time and the trapezoid rule on the stored history for the memory term.
pub fn reduce_and_integrate(sys: &BlockLinearSystem, t_end: f64, dt: f64) -> Result<ReducedTrajectory> {
    let steps = step_count(t_end, dt)?;
    let m = sys.resolved_dim();
    let e = matrix_exponential(&sys.a22, dt)?;

    let mut noise = Vec::with_capacity(steps + 1);
    let mut v = sys.x_tilde0.clone();
    for _ in 0..=steps {
        noise.push(&sys.a12 * &v);
        v = &e * v;
    }
    let k0 = &sys.a12 * &sys.a21;

    // The trapezoid sum sum_i w_i A12 e^{A22 (j-i) dt} A21 phi_i over nodes
    // 0..j-1 is A12 z_j with z_{j+1} = e^{A22 dt} (z_j + w_j A21 phi_j).
    let mut z = DVector::zeros(sys.a22.nrows());
    let mut phi = vec![sys.x_hat0.clone()];

    let id = DMatrix::<f64>::identity(m, m);
    let lhs = &id - &sys.a11 * (0.5 * dt) - &k0 * (0.25 * dt * dt);
    let lu = lhs.lu();

    let mut memory = vec![DVector::zeros(m)];
    let mut f_prev = &sys.a11 * &sys.x_hat0 + &noise[0];
    for n in 0..steps {
        let j = n + 1;
        let w = if n == 0 { 0.5 } else { 1.0 };
        z = &e * (z + &sys.a21 * &phi[n] * w);
        let mem_explicit = &sys.a12 * &z * dt;
        let rhs = &phi[n] + (&f_prev + &noise[j] + &mem_explicit) * (0.5 * dt);
        let phi_next = lu
            .solve(&rhs)
            .ok_or_else(|| Error::NoConvergence("singular trapezoid system".into()))?;
        let mem = mem_explicit + &k0 * &phi_next * (0.5 * dt);
        f_prev = &sys.a11 * &phi_next + &noise[j] + &mem;
        memory.push(mem);
        phi.push(phi_next);
    }

    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    let markov_part = phi.iter().map(|p| &sys.a11 * p).collect();
    Ok(ReducedTrajectory { times, phi_hat: phi, markov_part, noise_part: noise, memory_part: memory })
}

fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter { name: "dt", reason: "must be positive".into() });
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter { name: "t_end", reason: "must be non-negative".into() });
    }
    Ok((t_end / dt).round() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn taylor_exp(m: &DMatrix<f64>, t: f64, terms: usize) -> DMatrix<f64> {
        let n = m.nrows();
        let mut term = DMatrix::identity(n, n);
        let mut acc = term.clone();
        for k in 1..terms {
            term = &term * m * (t / k as f64);
            acc += &term;
        }
        acc
    }

    fn one_plus_two() -> BlockLinearSystem {
        BlockLinearSystem::new(
            dmatrix![-1.0],
            dmatrix![1.0, 0.0],
            dmatrix![1.0; 0.0],
            -DMatrix::identity(2, 2),
            DVector::from_element(1, 1.0),
            DVector::from_vec(vec![0.5, -0.3]),
        )
        .unwrap()
    }

    #[test]
    fn exponential_of_zero_and_diagonal() {
        let z = matrix_exponential(&DMatrix::zeros(3, 3), 1.0).unwrap();
        assert_eq!(z, DMatrix::identity(3, 3));
        let d = matrix_exponential(&DMatrix::from_diagonal(&DVector::from_vec(vec![0.3, -2.0])), 1.0).unwrap();
        assert!((d[(0, 0)] - 0.3f64.exp()).abs() < 1e-15);
        assert!((d[(1, 1)] - (-2f64).exp()).abs() < 1e-15);
        assert_eq!(d[(0, 1)], 0.0);
        assert!(matrix_exponential(&DMatrix::zeros(2, 3), 1.0).is_err());
    }

    #[test]
    fn exponential_matches_taylor_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
            let e = matrix_exponential(&m, 0.5).unwrap();
            let t = taylor_exp(&m, 0.5, 30);
            assert!((e - &t).norm() < 1e-13 * t.norm());
        }
    }

    #[test]
    fn exponential_with_squaring() {
        // rotation generator scaled far past the Padé radius
        let m = dmatrix![0.0, -1.0; 1.0, 0.0];
        let t = 40.0;
        let e = matrix_exponential(&m, t).unwrap();
        let expect = dmatrix![t.cos(), -t.sin(); t.sin(), t.cos()];
        assert!((e - expect).norm() < 1e-12);
        let big = dmatrix![-3.0, 2.0; 0.0, -5.0];
        let e = matrix_exponential(&big, 20.0).unwrap();
        // upper-triangular closed form
        let (a, b, c) = (-3.0f64, 2.0, -5.0f64);
        let off = b * ((a * 20.0).exp() - (c * 20.0).exp()) / (a - c);
        assert!((e[(0, 0)] - (a * 20.0).exp()).abs() < 1e-12 * (a * 20.0).exp());
        assert!((e[(0, 1)] - off).abs() < 1e-12 * off.abs());
    }

    #[test]
    fn block_dimensions_are_checked() {
        let r = BlockLinearSystem::new(
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![1.0; 0.0],
            DMatrix::identity(2, 2),
            DVector::zeros(1),
            DVector::zeros(2),
        );
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn zero_matrix_gives_constant_trajectory() {
        let sys = BlockLinearSystem::from_full(&DMatrix::zeros(3, 3), 1, &DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        let full = integrate_full(&sys, 1.0, 0.1).unwrap();
        assert!(full.states.iter().all(|s| *s == full.states[0]));
        let red = reduce_and_integrate(&sys, 1.0, 0.1).unwrap();
        assert!(red.phi_hat.iter().all(|p| p[0] == 1.0));
    }

    #[test]
    fn decoupled_blocks_follow_the_resolved_exponential() {
        let a11 = dmatrix![-0.5, 1.0; -1.0, -0.5];
        let sys = BlockLinearSystem::new(
            a11.clone(),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(1, 2),
            dmatrix![-2.0],
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_element(1, 4.0),
        )
        .unwrap();
        let full = integrate_full(&sys, 2.0, 1e-3).unwrap();
        let red = reduce_and_integrate(&sys, 2.0, 1e-3).unwrap();
        let exact = matrix_exponential(&a11, 2.0).unwrap() * &sys.x_hat0;
        assert!((full.resolved(2000) - &exact).norm() < 1e-12);
        assert!((&red.phi_hat[2000] - &exact).norm() < 1e-6);
        assert!(red.noise_part.iter().chain(&red.memory_part).all(|v| v.norm() == 0.0));
    }

    #[test]
    fn noise_only_case_matches_quadrature() {
        let a22 = dmatrix![-1.0, 0.5; 0.0, -2.0];
        let a12 = dmatrix![1.0, -1.0];
        let x0 = DVector::from_vec(vec![0.7, 0.2]);
        let sys = BlockLinearSystem::new(
            dmatrix![0.0],
            a12.clone(),
            DMatrix::zeros(2, 1),
            a22.clone(),
            DVector::zeros(1),
            x0.clone(),
        )
        .unwrap();
        let t = 3.0;
        let red = reduce_and_integrate(&sys, t, 1e-3).unwrap();
        let e = matrix_exponential(&a22, t).unwrap();
        let inv = a22.clone().try_inverse().unwrap();
        let exact = &a12 * inv * (e - DMatrix::identity(2, 2)) * &x0;
        assert!((red.phi_hat[3000][0] - exact[0]).abs() < 1e-6);
    }

    #[test]
    fn reduced_matches_full_on_the_reference_system() {
        let sys = one_plus_two();
        let full = integrate_full(&sys, 10.0, 1e-3).unwrap();
        let red = reduce_and_integrate(&sys, 10.0, 1e-3).unwrap();
        let err = (0..red.times.len())
            .map(|i| (full.resolved(i) - &red.phi_hat[i]).amax())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn decomposition_sums_to_the_derivative() {
        let sys = one_plus_two();
        let dt = 1e-3;
        let red = reduce_and_integrate(&sys, 2.0, dt).unwrap();
        for i in (100..1900).step_by(97) {
            let deriv = (&red.phi_hat[i + 1] - &red.phi_hat[i - 1]) / (2.0 * dt);
            let sum = &red.markov_part[i] + &red.noise_part[i] + &red.memory_part[i];
            assert!((deriv - sum).amax() < 1e-5);
        }
    }

    #[test]
    fn trapezoid_memory_is_second_order() {
        let sys = one_plus_two();
        let reference = integrate_full(&sys, 4.0, 1e-4).unwrap().resolved(40_000)[0];
        let e1 = (reduce_and_integrate(&sys, 4.0, 0.02).unwrap().phi_hat[200][0] - reference).abs();
        let e2 = (reduce_and_integrate(&sys, 4.0, 0.01).unwrap().phi_hat[400][0] - reference).abs();
        let order = (e1 / e2).log2();
        assert!(order >= 1.9, "order {order}");
    }

    #[test]
    fn memory_term_agrees_with_integrator() {
        let sys = one_plus_two();
        let dt = 1e-2;
        let red = reduce_and_integrate(&sys, 1.0, dt).unwrap();
        let k = memory_kernels(&sys, dt, 100).unwrap();
        let m = memory_term(&k, &red.phi_hat, dt);
        assert!((m - &red.memory_part[100]).amax() < 1e-13);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn noise_decays_with_the_unresolved_spectrum(d1 in -2.0f64..-0.2, d2 in -2.0f64..-0.2, c in -1.0f64..1.0) {
            let a22 = dmatrix![d1, c; 0.0, d2];
            let sys = BlockLinearSystem::new(
                dmatrix![-1.0],
                dmatrix![1.0, 1.0],
                dmatrix![0.3; -0.2],
                a22,
                DVector::from_element(1, 1.0),
                DVector::from_vec(vec![1.0, 1.0]),
            ).unwrap();
            let red = reduce_and_integrate(&sys, 6.0, 1e-2).unwrap();
            let rate = d1.max(d2);
            // C covers the transient growth of a non-normal 2x2 block
            let c0 = 4.0 * (1.0 + c.abs() / (d1 - d2).abs().max(1e-3)).min(1e3);
            for (i, t) in red.times.iter().enumerate() {
                prop_assert!(red.noise_part[i].norm() <= c0 * (rate * t).exp() * (1.0 + t));
            }
        }
    }
}
