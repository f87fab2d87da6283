use nalgebra::{Complex, SMatrix};
use proptest::prelude::*;
use spinflip::analytic::{
    cross_correlation, linear_response_oracle, source_spectra, stokes_spectra_closed_form,
    FrequencyGrid,
};
use spinflip::detection::squeezing_at_zero;
use spinflip::model::{derive, drift_matrices, stability, LaserParams};
use spinflip::noise_sim::{diffusion_matrix, factorize};

type C5 = SMatrix<Complex<f64>, 5, 5>;

fn params() -> impl Strategy<Value = LaserParams> {
    (
        10.0..1000.0f64,
        -2.0..0.5f64,
        0.05..20.0f64,
        0.1..5.0f64,
        1.0..300.0f64,
        -6.0..6.0f64,
        1.01..20.0f64,
        0.0..=1.0f64,
        0.05..5.0f64,
    )
        .prop_map(
            |(kappa, kappa_a, omega_p, gamma, ratio, alpha, r, p, c)| LaserParams {
                kappa,
                kappa_a,
                omega_p,
                gamma,
                gamma_s: gamma * ratio,
                alpha,
                pump_r: r,
                pump_p: p,
                c_sat: c,
            },
        )
}

fn classical(p: &LaserParams) -> bool {
    p.pump_p * p.pump_r <= 2.0 && stable(p)
}

fn stable(p: &LaserParams) -> bool {
    derive(p)
        .map(|d| stability(&drift_matrices(&d, p)).stable)
        .unwrap_or(false)
}

/// Full 5x5 response `(−iΩ − A)⁻¹ M (−iΩ − A)⁻†`, without using block structure.
fn full_response(p: &LaserParams, w: f64) -> C5 {
    let d = derive(p).unwrap();
    let a = drift_matrices(&d, p).full().map(|x| Complex::new(x, 0.0));
    let m = diffusion_matrix(&source_spectra(p, &d))
        .matrix()
        .map(|x| Complex::new(x, 0.0));
    let t = (C5::from_diagonal_element(Complex::new(0.0, -w)) - a)
        .try_inverse()
        .unwrap();
    t * m * t.adjoint()
}

fn close(a: f64, b: f64, scale: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * scale.max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, max_global_rejects: 100_000, ..ProptestConfig::default() })]

    #[test]
    fn closed_form_matches_response_oracle(p in params().prop_filter("stable", stable)) {
        let d = derive(&p).unwrap();
        let grid = FrequencyGrid::linear(0.05, 50.0, 64).unwrap();
        let cf = stokes_spectra_closed_form(&p, &d, &grid).unwrap();
        let or = linear_response_oracle(&p, &d, &diffusion_matrix(&source_spectra(&p, &d)), &grid).unwrap();
        for i in 0..grid.len() {
            let full = full_response(&p, grid.omegas()[i]);
            let s23_scale = (cf.s22[i] * cf.s33[i]).sqrt();
            for (c, o, f, scale) in [
                (cf.s11[i], or.s11[i], full[(0, 0)].re, cf.s11[i].abs()),
                (cf.s22[i], or.s22[i], full[(2, 2)].re, cf.s22[i].abs()),
                (cf.s33[i], or.s33[i], full[(3, 3)].re, cf.s33[i].abs()),
                (cf.s23[i], or.s23[i], full[(2, 3)].re, s23_scale),
            ] {
                prop_assert!(close(c, o, scale, 1e-8), "closed {c} vs oracle {o} at {}", grid.omegas()[i]);
                prop_assert!(close(o, f, scale, 1e-8), "oracle {o} vs full {f}");
            }
            prop_assert!(full[(0, 2)].norm() <= 1e-9 * (cf.s11[i].abs() * cf.s22[i].abs()).sqrt());
        }
    }

    // Positivity needs a classical (positive semidefinite) diffusion matrix;
    // a regular pump with p·r > 2 gives sub-shot-noise, negative s11.
    #[test]
    fn spectra_even_positive_and_bounded(p in params().prop_filter("classical noise", classical), w in 0.0..200.0f64) {
        let d = derive(&p).unwrap();
        let grid = FrequencyGrid::new(vec![-w - 1e-3, w + 1e-3]).unwrap();
        let s = stokes_spectra_closed_form(&p, &d, &grid).unwrap();
        prop_assert_eq!(s.s11[0], s.s11[1]);
        prop_assert_eq!(s.s22[0], s.s22[1]);
        prop_assert_eq!(s.s33[0], s.s33[1]);
        prop_assert_eq!(s.s23[0], s.s23[1]);
        prop_assert!(s.s11[1] >= 0.0 && s.s22[1] >= 0.0 && s.s33[1] >= 0.0);
        prop_assert!(s.s23[1].abs() <= (s.s22[1] * s.s33[1]).sqrt() * (1.0 + 1e-9));
        for c in cross_correlation(&s).into_iter().flatten() {
            prop_assert!((-1.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn factorization_reconstructs(p in params()) {
        let Ok(d) = derive(&p) else { return Ok(()) };
        let m = diffusion_matrix(&source_spectra(&p, &d));
        match factorize(&m) {
            Ok(f) => {
                let err = (f.reconstruct() - m.matrix()).norm();
                prop_assert!(err <= 1e-10 * m.matrix().norm(), "err {err}");
            }
            Err(_) => prop_assert!(p.pump_p * p.pump_r > 2.0 - 1e-6),
        }
    }

    #[test]
    fn psd_frontier(p in 0.05..1.0f64, off in 1e-6..1.0f64, above in any::<bool>()) {
        let r = if above { 2.0 / p * (1.0 + off) } else { 2.0 / p * (1.0 - off) };
        prop_assume!(r > 1.0);
        let lp = LaserParams::reference().with_pump(r, p);
        let d = derive(&lp).unwrap();
        let ok = factorize(&diffusion_matrix(&source_spectra(&lp, &d))).is_ok();
        prop_assert_eq!(ok, !above);
    }

    #[test]
    fn intensity_block_always_stable(kappa in 0.01..1e4f64, gamma in 0.01..100.0f64, r in 1.0001..1e3f64) {
        let p = LaserParams { kappa, gamma, gamma_s: gamma, pump_r: r, ..LaserParams::reference() };
        let d = derive(&p).unwrap();
        prop_assert!(stability(&drift_matrices(&d, &p)).max_real_eig_block1 < 0.0);
    }

    #[test]
    fn derived_inversion_clamps_gain(p in params()) {
        let Ok(d) = derive(&p) else { return Ok(()) };
        prop_assert!((d.d_st * p.c_sat - d.kappa_x).abs() <= 4.0 * f64::EPSILON * d.kappa_x.abs());
        prop_assert!(d.n_x >= 0.0);
        prop_assert_eq!(derive(&p).unwrap(), d);
    }

    #[test]
    fn squeezing_only_above_five(r in 1.0001..20.0f64) {
        let s = squeezing_at_zero(r).unwrap();
        prop_assert_eq!(s.this_laser < 1.0, r > 5.0);
    }
}
