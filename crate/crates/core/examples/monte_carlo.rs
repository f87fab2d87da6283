//! Simulates the linearized Langevin equations, estimates the spectra with
//! Welch's method and compares them with the closed forms and the
//! integrated variances.
//!
//! ```text
//! cargo run --release --example monte_carlo -- [n_traj] [seed]
//! ```

use spinflip::analytic::{
    integrated_variances, source_spectra, stokes_spectra_closed_form, ClosedFormVariant,
};
use spinflip::model::{derive, drift_matrices, LaserParams};
use spinflip::noise_sim::{diffusion_matrix, factorize, LinearSimulator, Scheme, SimConfig};
use spinflip::spectra_est::{band_summary, estimate, variance_check, Window};

fn main() -> spinflip::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_traj = args.next().and_then(|a| a.parse().ok()).unwrap_or(100);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);

    let params = LaserParams::reference();
    let derived = derive(&params)?;
    let drift = drift_matrices(&derived, &params);
    let factor = factorize(&diffusion_matrix(&source_spectra(&params, &derived)))?;
    let cfg = SimConfig {
        dt: 0.002,
        t_total: 400.0,
        n_traj,
        seed,
        burn_in: Some(40.0),
        scheme: Scheme::ExactGaussian,
    };
    let sim = LinearSimulator::new(&drift, &factor, cfg)?;

    let est = estimate(&sim, Window::Hann, 400.0)?;
    let reference = stokes_spectra_closed_form(&params, &derived, &est.grid)?;
    let band = band_summary(&est, &reference, (0.5, 20.0))?;
    println!(
        "{n_traj} trajectories x 400 ns, {} bins in [0.5, 20] GHz",
        band.bins
    );
    for (name, (z, rms)) in ["s11", "s22", "s33", "s23"]
        .iter()
        .zip(band.max_abs_z.iter().zip(band.rms_rel_dev))
    {
        println!("  {name}: max |z| {z:.2}, rms relative deviation {rms:.4}");
    }

    let expected = integrated_variances(&params, &derived, ClosedFormVariant::Corrected)?;
    let rep = variance_check(&sim, &expected)?;
    for m in rep.variances.iter().chain(&rep.means) {
        println!(
            "  {:10} expected {:10.4} estimate {:10.4} +- {:.4} (z {:+.2})",
            m.name, m.expected, m.estimate, m.stderr, m.z
        );
    }
    Ok(())
}
