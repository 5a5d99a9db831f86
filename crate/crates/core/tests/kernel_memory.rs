//! The kernel density against the memory term of an explicitly discretized
//! thermocline (upwind in `x`, continuous in time) with the SST prescribed.

use enso_mz::kernel::kernel_eval_at;
use enso_mz::linmz::{memory_kernels, memory_term, BlockLinearSystem};
use enso_mz::numeric::simpson;
use enso_mz::pde::WindForcing;
use enso_mz::PhysicalParams;
use nalgebra::{DMatrix, DVector};

fn upwind_system(p: &PhysicalParams, g: &WindForcing, n: usize) -> BlockLinearSystem {
    let dx = 1.0 / n as f64;
    let y2 = p.y_n * p.y_n;
    let rt = p.round_trip();
    let eps0 = p.eps0();
    let west = p.r_w - 1.0 / rt;
    let (_, ch) = p.local_coeffs(p.x_e).unwrap();
    // h_c at nodes 1..=n -> 0..n ; h_n at nodes 0..n-1 -> n..2n
    let r = 2 * n;
    let hc = |i: usize| i - 1;
    let hn = |i: usize| n + i;
    let mut a22 = DMatrix::zeros(r, r);
    let mut a21 = DMatrix::zeros(r, 1);
    for i in 1..=n {
        let row = hc(i);
        a22[(row, row)] -= 1.0 / dx + eps0;
        if i == 1 {
            a22[(row, hn(0))] += west / dx;
        } else {
            a22[(row, hc(i - 1))] += 1.0 / dx;
        }
        a21[(row, 0)] = p.mu * (1.0 - p.theta / rt) * g.eval(i as f64 * dx);
    }
    for i in 0..n {
        let row = hn(i);
        a22[(row, row)] -= 1.0 / (y2 * dx) + eps0;
        // r_E = 0: h_n vanishes at the eastern node
        if i + 1 < n {
            a22[(row, hn(i + 1))] += 1.0 / (y2 * dx);
        }
        a21[(row, 0)] = -p.mu * (p.theta / y2) * g.eval(i as f64 * dx);
    }
    let probe = (p.x_e * n as f64).round() as usize;
    let mut a12 = DMatrix::zeros(1, r);
    a12[(0, hc(probe))] = ch;
    a12[(0, hn(probe))] = ch / rt;
    BlockLinearSystem::new(
        DMatrix::from_element(1, 1, 0.0),
        a12,
        a21,
        a22,
        DVector::zeros(1),
        DVector::zeros(r),
    )
    .unwrap()
}

#[test]
fn kernel_reproduces_the_discretized_memory_term() {
    let p = PhysicalParams::default();
    let g = WindForcing::delta_approx(0.5, p.a0, 0.07).unwrap();
    let (t_end, dt) = (8.0, 0.01);
    let steps = (t_end / dt) as usize;
    let temp = |s: f64| 1.0 + 0.1 * s;
    let history: Vec<DVector<f64>> = (0..=steps).map(|j| DVector::from_element(1, temp(j as f64 * dt))).collect();
    let memory = |n: usize| {
        let kernels = memory_kernels(&upwind_system(&p, &g, n), dt, steps).unwrap();
        memory_term(&kernels, &history, dt)[0]
    };
    // upwind is first order in dx; extrapolate away the leading error
    let (coarse, fine) = (memory(100), memory(200));
    let discrete = 2.0 * fine - coarse;
    let exact = simpson(|tau| kernel_eval_at(tau, &g, &p, 0, p.x_e).unwrap() * temp(t_end - tau), 0.0, t_end, 80_000);
    let rel = (discrete - exact).abs() / exact.abs();
    assert!(rel < 1e-3, "discrete {discrete} kernel {exact} rel {rel}");
    assert!((fine - exact).abs() < (coarse - exact).abs());
}
