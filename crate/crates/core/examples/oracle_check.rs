//! Cross-checks the closed forms against the frequency-domain linear-response
//! solution `S = T M T†`, for both coefficient sets.
//!
//! ```text
//! cargo run --example oracle_check
//! ```

use spinflip::analytic::{
    linear_response_oracle, source_spectra, stokes_spectra_closed_form_variant, ClosedFormVariant,
    FrequencyGrid,
};
use spinflip::model::{derive, LaserParams};
use spinflip::noise_sim::diffusion_matrix;

fn main() -> spinflip::Result<()> {
    let grid = FrequencyGrid::linear(0.05, 50.0, 2048)?;
    for (label, params) in [
        ("reference", LaserParams::reference()),
        (
            "dichroic, regular pump",
            LaserParams {
                kappa_a: -0.5,
                omega_p: 5.0,
                alpha: 2.0,
                ..LaserParams::reference().with_pump(1.8, 1.0)
            },
        ),
    ] {
        let derived = derive(&params)?;
        let m = diffusion_matrix(&source_spectra(&params, &derived));
        let oracle = linear_response_oracle(&params, &derived, &m, &grid)?;
        println!("{label}:");
        for variant in [ClosedFormVariant::Corrected, ClosedFormVariant::Printed] {
            let cf = stokes_spectra_closed_form_variant(&params, &derived, &grid, variant)?;
            let mut worst = [0.0f64; 4];
            for i in 0..grid.len() {
                let cross = (oracle.s22[i] * oracle.s33[i]).abs().sqrt();
                worst[0] = worst[0].max((cf.s11[i] - oracle.s11[i]).abs() / oracle.s11[i].abs());
                worst[1] = worst[1].max((cf.s22[i] - oracle.s22[i]).abs() / oracle.s22[i].abs());
                worst[2] = worst[2].max((cf.s33[i] - oracle.s33[i]).abs() / oracle.s33[i].abs());
                worst[3] = worst[3].max((cf.s23[i] - oracle.s23[i]).abs() / cross);
            }
            println!(
                "  {variant:?}: max rel dev s11 {:.1e}, s22 {:.1e}, s33 {:.1e}, s23 {:.1e}",
                worst[0], worst[1], worst[2], worst[3]
            );
        }
    }
    Ok(())
}
