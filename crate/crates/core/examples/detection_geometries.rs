//! Shot-noise-normalized photocurrent-difference spectra for the six
//! polarizer/waveplate settings, at a stable regular-pump operating point.
//!
//! ```text
//! cargo run --example detection_geometries
//! ```

use spinflip::analytic::{stokes_spectra_closed_form, FrequencyGrid};
use spinflip::detection::{detection_spectrum, DetectionGeometry};
use spinflip::model::{derive, LaserParams};

fn main() -> spinflip::Result<()> {
    let params = LaserParams {
        alpha: 0.0,
        ..LaserParams::reference().with_pump(6.0, 1.0)
    };
    let derived = derive(&params)?;
    let grid = FrequencyGrid::new(vec![0.0, 1.0, 5.0, 20.0, 100.0, 1e3, 1e5])?;
    let spectra = stokes_spectra_closed_form(&params, &derived, &grid)?;

    print!("{:20}", "geometry \\ omega");
    for w in grid.omegas() {
        print!("{w:>16}");
    }
    println!();
    for g in DetectionGeometry::ALL {
        let d = detection_spectrum(&spectra, g, &params, &derived);
        print!("{:20}", g.name());
        for v in &d.values {
            print!("{v:16.4}");
        }
        println!();
    }
    Ok(())
}
