//! Zero-frequency intensity noise for a regular pump: this laser against the
//! two reference lasers, and the pump level where squeezing sets in.
//!
//! ```text
//! cargo run --example squeezing
//! ```

use spinflip::detection::squeezing_at_zero;

fn main() -> spinflip::Result<()> {
    println!("    r   this laser  nondegenerate  short lower level");
    for r in [1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 20.0, 100.0, 1e4] {
        let s = squeezing_at_zero(r)?;
        println!(
            "{r:7} {:11.4} {:14.4} {:18.4}",
            s.this_laser, s.nondegenerate_ref, s.short_lower_ref
        );
    }
    let onset = (1..=2000).map(|k| 1.0 + k as f64 * 0.01).find(|&r| {
        squeezing_at_zero(r)
            .map(|s| s.this_laser < 1.0)
            .unwrap_or(false)
    });
    println!("\nfirst r below shot noise (step 0.01): {onset:?}");
    Ok(())
}
