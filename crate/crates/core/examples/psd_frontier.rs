//! Where classical Gaussian sampling of the Langevin forces stops working:
//! the diffusion matrix is positive semidefinite only for `p·r ≤ 2`.
//!
//! ```text
//! cargo run --example psd_frontier
//! ```

use spinflip::analytic::source_spectra;
use spinflip::model::{derive, LaserParams};
use spinflip::noise_sim::{diffusion_matrix, factorize};

fn main() -> spinflip::Result<()> {
    println!("'#' factorizes, '.' does not; rows p = 1 .. 0, columns r = 1.1 .. 10");
    for i in (0..=10).rev() {
        let p = i as f64 / 10.0;
        let row: String = (1..=45)
            .map(|j| {
                let r = 1.0 + 0.2 * j as f64 - 0.1;
                let lp = LaserParams::reference().with_pump(r, p);
                let d = derive(&lp).expect("above threshold");
                if factorize(&diffusion_matrix(&source_spectra(&lp, &d))).is_ok() {
                    '#'
                } else {
                    '.'
                }
            })
            .collect();
        println!("p = {p:.1}  {row}");
    }

    let lp = LaserParams::reference().with_pump(6.0, 1.0);
    let d = derive(&lp)?;
    match factorize(&diffusion_matrix(&source_spectra(&lp, &d))) {
        Ok(_) => println!("p = 1, r = 6 factorized"),
        Err(e) => println!("\np = 1, r = 6: {e}"),
    }
    Ok(())
}
