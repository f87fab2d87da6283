//! Checks the linearization against the nonlinear equations: finite-difference
//! Jacobian at the fixed point, then a noise-free run kicked off the fixed
//! point that rings at the relaxation-oscillation frequency.
//!
//! ```text
//! cargo run --release --example nonlinear_ringing
//! ```

use num_complex::Complex64;
use spinflip::model::{derive, drift_matrices, numerical_stokes_jacobian, FieldState, LaserParams};
use spinflip::noise_sim::{
    factorize, ring_frequency, DiffusionMatrix, NonlinearSimulator, Scheme, SimConfig,
};

fn main() -> spinflip::Result<()> {
    let params = LaserParams::reference();
    let derived = derive(&params)?;
    let drift = drift_matrices(&derived, &params);
    let diff = numerical_stokes_jacobian(&params, &derived) - drift.full();
    println!(
        "max |J_fd - A| = {:.3e} (max |A| = {})",
        diff.amax(),
        drift.full().amax()
    );

    let quiet = factorize(&DiffusionMatrix::zeros())?;
    let mut start = FieldState::steady(&derived);
    start.a_plus = Complex64::new(1.01 * derived.q, 0.0);
    start.a_minus = Complex64::new(1.01 * derived.q, 0.0);
    let cfg = SimConfig {
        dt: 0.0005,
        t_total: 10.0,
        n_traj: 1,
        seed: 0,
        burn_in: Some(0.0),
        scheme: Scheme::EulerMaruyama,
    };
    let traj = NonlinearSimulator::new(&params, &derived, &quiet, cfg)?
        .with_initial(start)
        .simulate_one(0)?;

    let s1: Vec<f64> = traj.component(0).collect();
    for k in (0..s1.len()).step_by(1000) {
        println!("t = {:4.1} ns  dS1 = {:+.6}", k as f64 * traj.dt, s1[k]);
    }
    let expected = drift.eigenvalues()[0].im.abs();
    println!(
        "ringing {:.4} GHz, block-1 eigenfrequency {expected:.4} GHz",
        ring_frequency(&s1, traj.dt).unwrap_or(f64::NAN)
    );
    Ok(())
}
