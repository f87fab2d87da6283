//! Steady state, linearized drift and stability of the reference laser,
//! then a pump scan showing where the polarization block destabilizes.
//!
//! ```text
//! cargo run --example steady_state
//! ```

use spinflip::model::{derive, drift_matrices, stability, LaserParams, STATE_LABELS};

fn main() -> spinflip::Result<()> {
    let params = LaserParams::reference();
    let derived = derive(&params)?;
    println!(
        "kappa_x = {} GHz, photons n_x = {:.4}, Gamma_s = {:.3} GHz",
        derived.kappa_x, derived.n_x, derived.big_gamma_s
    );
    println!(
        "inversion D = {:.3}, check D*c - kappa_x = {:e}",
        derived.d_st,
        derived.d_st * params.c_sat - derived.kappa_x
    );

    let drift = drift_matrices(&derived, &params);
    println!("\ndrift in order {STATE_LABELS:?}:{}", drift.full());
    for z in drift.eigenvalues() {
        println!("  eigenvalue {:+.5} {:+.5}i", z.re, z.im);
    }
    let rep = stability(&drift);
    println!(
        "stable: {} (max Re: block1 {:.4}, block2 {:.4})",
        rep.stable, rep.max_real_eig_block1, rep.max_real_eig_block2
    );

    println!("\n    r   block1 Re   block2 Re  stable");
    for r in [1.02, 1.04, 1.1, 1.2, 1.3, 1.5, 2.0] {
        let p = params.with_pump(r, 0.0);
        let rep = stability(&drift_matrices(&derive(&p)?, &p));
        println!(
            "{r:5.2} {:11.4} {:11.4}  {}",
            rep.max_real_eig_block1, rep.max_real_eig_block2, rep.stable
        );
    }
    Ok(())
}
