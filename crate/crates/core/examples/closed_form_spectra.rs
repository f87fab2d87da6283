//! Closed-form Stokes-fluctuation spectra at the reference point: the
//! relaxation-oscillation peak in `(δS1²)`, the spin-flip features in the
//! polarization block and the circular cross-correlation `C+-`.
//!
//! ```text
//! cargo run --example closed_form_spectra
//! ```

use spinflip::analytic::{cross_correlation, stokes_spectra_closed_form, FrequencyGrid};
use spinflip::model::{derive, LaserParams};

fn main() -> spinflip::Result<()> {
    let params = LaserParams::reference();
    let derived = derive(&params)?;
    let grid = FrequencyGrid::linear(0.05, 50.0, 2048)?;
    let s = stokes_spectra_closed_form(&params, &derived, &grid)?;
    let c = cross_correlation(&s);

    let peak = s.s11_peak_index();
    println!(
        "s11 peak at {:.4} GHz, height {:.3}",
        grid.omegas()[peak],
        s.s11[peak]
    );

    println!("\n omega      s11         s22         s33         s23        C+-");
    for i in (0..grid.len()).step_by(128) {
        println!(
            "{:6.2} {:11.4e} {:11.4e} {:11.4e} {:11.4e} {:8.4}",
            grid.omegas()[i],
            s.s11[i],
            s.s22[i],
            s.s33[i],
            s.s23[i],
            c[i].unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
