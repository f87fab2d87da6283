//! Laser parameters, the x-polarized steady state and its linearization.
//!
//! Units: rates in GHz, time in ns, field amplitudes in photon-number^1/2.
//! The state of the linearized problem is ordered `(S1, D, S2, S3, d)`; the
//! first two components form the intensity/inversion block, the last three
//! the polarization/spin block, and the two blocks do not couple.

use nalgebra::{Complex, Matrix2, Matrix3, SMatrix};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix5 = SMatrix<f64, 5, 5>;

/// Labels of the linearized state, in storage order.
pub const STATE_LABELS: [&str; 5] = ["S1", "D", "S2", "S3", "d"];

/// Physical inputs of the spin-flip model with equal level lifetimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserParams {
    /// Cavity decay rate κ.
    pub kappa: f64,
    /// Linear dichroism κ_a.
    pub kappa_a: f64,
    /// Linear birefringence ω_p.
    pub omega_p: f64,
    /// Level decay rate γ (both levels).
    pub gamma: f64,
    /// Effective spin decay γ_s = γ + 2γ_c.
    pub gamma_s: f64,
    /// Linewidth-enhancement factor α.
    pub alpha: f64,
    /// Pump rate in units of the threshold pump rate.
    pub pump_r: f64,
    /// Pump statistics: 0 Poissonian, 1 regular.
    pub pump_p: f64,
    /// Saturation coupling c. `γ/2` makes the photon number equal to `r - 1`.
    pub c_sat: f64,
}

impl LaserParams {
    /// The parameter set used for the relaxation-oscillation and
    /// cross-correlation figures: κ = 300, ω_p = 1, α = −3, γ = 1, γ_s = 100,
    /// κ_a = 0, r = 1.04, Poissonian pump, c = γ/2.
    pub fn reference() -> Self {
        LaserParams {
            kappa: 300.0,
            kappa_a: 0.0,
            omega_p: 1.0,
            gamma: 1.0,
            gamma_s: 100.0,
            alpha: -3.0,
            pump_r: 1.04,
            pump_p: 0.0,
            c_sat: 0.5,
        }
    }

    pub fn with_pump(mut self, r: f64, p: f64) -> Self {
        self.pump_r = r;
        self.pump_p = p;
        self
    }

    /// Checks the parameter invariants. Lasing (`r > 1`) is checked by [`derive`].
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("kappa", self.kappa),
            ("kappa_a", self.kappa_a),
            ("omega_p", self.omega_p),
            ("gamma", self.gamma),
            ("gamma_s", self.gamma_s),
            ("alpha", self.alpha),
            ("pump_r", self.pump_r),
            ("pump_p", self.pump_p),
            ("c_sat", self.c_sat),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(invalid(name, format!("{v} is not finite")));
            }
        }
        if self.kappa <= 0.0 {
            return Err(invalid("kappa", "must be positive".into()));
        }
        if self.gamma <= 0.0 {
            return Err(invalid("gamma", "must be positive".into()));
        }
        if self.gamma_s < self.gamma {
            return Err(invalid(
                "gamma_s",
                format!(
                    "{} is below gamma = {} (spin-flip rate would be negative)",
                    self.gamma_s, self.gamma
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.pump_p) {
            return Err(invalid(
                "pump_p",
                format!("{} is outside [0, 1]", self.pump_p),
            ));
        }
        if self.c_sat <= 0.0 {
            return Err(invalid("c_sat", "must be positive".into()));
        }
        if self.kappa + self.kappa_a <= 0.0 {
            return Err(invalid(
                "kappa_a",
                "kappa + kappa_a must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn invalid(name: &'static str, reason: String) -> Error {
    Error::InvalidParameter { name, reason }
}

/// Constants derived from [`LaserParams`] at the x-polarized steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// κ_x = κ + κ_a.
    pub kappa_x: f64,
    /// Lasing frequency offset Δ_x = ω_p + ακ_x.
    pub delta_x: f64,
    /// Spin-flip rate γ_c = (γ_s − γ)/2.
    pub gamma_c: f64,
    /// Γ_s = γ_s + γ(r − 1).
    pub big_gamma_s: f64,
    /// Threshold pump rate γκ_x/c.
    pub mu_th: f64,
    /// Pump rate rμ_th.
    pub mu: f64,
    /// Steady amplitude of each circular component.
    pub q: f64,
    /// Mean photon number of the x mode, 2Q².
    pub n_x: f64,
    /// Steady inversion κ_x/c.
    pub d_st: f64,
}

/// Derived constants; rejects operation at or below threshold.
pub fn derive(params: &LaserParams) -> Result<DerivedParams> {
    params.validate()?;
    let r = params.pump_r;
    if r <= 1.0 {
        return Err(Error::BelowThreshold(r));
    }
    let kappa_x = params.kappa + params.kappa_a;
    let mu_th = params.gamma * kappa_x / params.c_sat;
    let n_x = params.gamma * (r - 1.0) / (2.0 * params.c_sat);
    Ok(DerivedParams {
        kappa_x,
        delta_x: params.omega_p + params.alpha * kappa_x,
        gamma_c: 0.5 * (params.gamma_s - params.gamma),
        big_gamma_s: params.gamma_s + params.gamma * (r - 1.0),
        mu_th,
        mu: r * mu_th,
        q: (0.5 * n_x).sqrt(),
        n_x,
        d_st: kappa_x / params.c_sat,
    })
}

/// Drift of the linearized fluctuation equations, one matrix per decoupled block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftMatrices {
    /// Acts on `(δS1, δD)`.
    pub block1: Matrix2<f64>,
    /// Acts on `(δS2, δS3, δd)`.
    pub block2: Matrix3<f64>,
}

impl DriftMatrices {
    /// Block-diagonal 5×5 drift in state order `(S1, D, S2, S3, d)`.
    pub fn full(&self) -> Matrix5 {
        let mut a = Matrix5::zeros();
        a.fixed_view_mut::<2, 2>(0, 0).copy_from(&self.block1);
        a.fixed_view_mut::<3, 3>(2, 2).copy_from(&self.block2);
        a
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = self
            .block1
            .complex_eigenvalues()
            .iter()
            .map(to_c64)
            .collect();
        out.extend(self.block2.complex_eigenvalues().iter().map(to_c64));
        out
    }

    /// Largest eigenvalue modulus, the stiffness that limits explicit steps.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Largest eigenvalue real part over both blocks.
    pub fn max_real_eigenvalue(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn to_c64(z: &Complex<f64>) -> Complex64 {
    Complex64::new(z.re, z.im)
}

/// Linearized drift around the x-polarized steady state.
pub fn drift_matrices(derived: &DerivedParams, params: &LaserParams) -> DriftMatrices {
    let g = params.gamma;
    let r = params.pump_r;
    let gain = g * (r - 1.0);
    let kx = derived.kappa_x;
    let ka = params.kappa_a;
    let wp = params.omega_p;
    DriftMatrices {
        block1: Matrix2::new(
            0.0,
            gain, //
            -2.0 * kx,
            -g * r,
        ),
        block2: Matrix3::new(
            2.0 * ka,
            -2.0 * wp,
            -params.alpha * gain, //
            2.0 * wp,
            2.0 * ka,
            -gain, //
            0.0,
            2.0 * kx,
            -derived.big_gamma_s,
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    pub max_real_eig_block1: f64,
    pub max_real_eig_block2: f64,
    pub stable: bool,
}

pub fn stability(drift: &DriftMatrices) -> StabilityReport {
    let max_re =
        |eigs: &[Complex<f64>]| eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let b1 = max_re(drift.block1.complex_eigenvalues().as_slice());
    let b2 = max_re(drift.block2.complex_eigenvalues().as_slice());
    StabilityReport {
        max_real_eig_block1: b1,
        max_real_eig_block2: b2,
        stable: b1.max(b2) < 0.0,
    }
}

/// Field amplitudes and inversions of the adiabatically reduced model,
/// in the frame rotating at the lasing frequency offset Δ_x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldState {
    pub a_plus: Complex64,
    pub a_minus: Complex64,
    /// Total inversion D.
    pub inversion: f64,
    /// Spin inversion difference d.
    pub spin: f64,
}

impl FieldState {
    /// The x-polarized fixed point: `a± = Q`, `D = κ_x/c`, `d = 0`.
    pub fn steady(derived: &DerivedParams) -> Self {
        FieldState {
            a_plus: Complex64::new(derived.q, 0.0),
            a_minus: Complex64::new(derived.q, 0.0),
            inversion: derived.d_st,
            spin: 0.0,
        }
    }

    pub fn zero() -> Self {
        FieldState {
            a_plus: Complex64::new(0.0, 0.0),
            a_minus: Complex64::new(0.0, 0.0),
            inversion: 0.0,
            spin: 0.0,
        }
    }

    /// `(Re a+, Im a+, Re a−, Im a−, D, d)`.
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.a_plus.re,
            self.a_plus.im,
            self.a_minus.re,
            self.a_minus.im,
            self.inversion,
            self.spin,
        ]
    }

    pub fn from_array(x: &[f64; 6]) -> Self {
        FieldState {
            a_plus: Complex64::new(x[0], x[1]),
            a_minus: Complex64::new(x[2], x[3]),
            inversion: x[4],
            spin: x[5],
        }
    }

    /// Stokes parameters `(S1, S2, S3)`.
    ///
    /// `S1 = 2 Re(a+* a−)`, `S2 = −2 Im(a+* a−)`, `S3 = |a−|² − |a+|²`. The sign of
    /// `S3` is the one for which the linearized equations take the form of
    /// [`drift_matrices`].
    pub fn stokes(&self) -> [f64; 3] {
        let cross = self.a_plus.conj() * self.a_minus;
        [
            2.0 * cross.re,
            -2.0 * cross.im,
            self.a_minus.norm_sqr() - self.a_plus.norm_sqr(),
        ]
    }

    /// Deviation `(δS1, δD, δS2, δS3, δd)` from the steady state.
    pub fn fluctuation(&self, derived: &DerivedParams) -> [f64; 5] {
        let [s1, s2, s3] = self.stokes();
        [
            s1 - derived.n_x,
            self.inversion - derived.d_st,
            s2,
            s3,
            self.spin,
        ]
    }
}

/// Deterministic right-hand side of the adiabatically reduced equations.
pub fn nonlinear_rhs(
    state: &FieldState,
    params: &LaserParams,
    derived: &DerivedParams,
) -> FieldState {
    let c = params.c_sat;
    let i = Complex64::i();
    let gain = Complex64::new(c, -c * params.alpha);
    let cross = Complex64::new(params.kappa_a, params.omega_p);
    let rot = i * derived.delta_x - params.kappa;
    let (ap, am) = (state.a_plus, state.a_minus);
    let (big_d, small_d) = (state.inversion, state.spin);

    let dap = rot * ap - cross * am + gain * (big_d + small_d) * ap;
    let dam = rot * am - cross * ap + gain * (big_d - small_d) * am;

    let total = ap.norm_sqr() + am.norm_sqr();
    let diff = ap.norm_sqr() - am.norm_sqr();
    let dd_big =
        derived.mu - params.gamma * big_d - 2.0 * c * big_d * total - 2.0 * c * small_d * diff;
    let dd_small = -params.gamma_s * small_d - 2.0 * c * big_d * diff - 2.0 * c * small_d * total;

    FieldState {
        a_plus: dap,
        a_minus: dam,
        inversion: dd_big,
        spin: dd_small,
    }
}

/// Jacobian of [`nonlinear_rhs`] at the fixed point, by central differences,
/// expressed in the fluctuation variables `(S1, D, S2, S3, d)`.
///
/// The field Jacobian `J` (6×6 in `(Re a+, Im a+, Re a−, Im a−, D, d)`) maps
/// to `P J P⁺`, where `P` is the 5×6 derivative of the fluctuation variables
/// and `P⁺` its pseudo-inverse. This is exact because the only direction `P`
/// discards, a common phase rotation of both fields, is a null vector of `J`.
/// The five-point stencil is exact for the cubic right-hand side up to rounding.
pub fn numerical_stokes_jacobian(params: &LaserParams, derived: &DerivedParams) -> Matrix5 {
    let x0 = FieldState::steady(derived).to_array();
    let steps: [f64; 6] = std::array::from_fn(|k| 0.1 * x0[k].abs().max(derived.q));
    let f = |x: &[f64; 6]| nonlinear_rhs(&FieldState::from_array(x), params, derived).to_array();
    let shifted = |k: usize, h: f64| {
        let mut x = x0;
        x[k] += h;
        f(&x)
    };

    let mut j = SMatrix::<f64, 6, 6>::zeros();
    for k in 0..6 {
        let h = steps[k];
        let (p1, m1, p2, m2) = (
            shifted(k, h),
            shifted(k, -h),
            shifted(k, 2.0 * h),
            shifted(k, -2.0 * h),
        );
        for i in 0..6 {
            j[(i, k)] = (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * h);
        }
    }

    let q = derived.q;
    #[rustfmt::skip]
    let p = SMatrix::<f64, 5, 6>::new(
        2.0 * q, 0.0, 2.0 * q, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 1.0, 0.0,
        0.0, 2.0 * q, 0.0, -2.0 * q, 0.0, 0.0,
        -2.0 * q, 0.0, 2.0 * q, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
    );
    let pinv = p.transpose()
        * (p * p.transpose())
            .try_inverse()
            .expect("P has full row rank");
    p * j * pinv
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_constants() {
        let p = LaserParams::reference();
        let d = derive(&p).unwrap();
        assert_eq!(d.kappa_x, 300.0);
        assert_relative_eq!(d.n_x, 0.04, max_relative = 1e-12);
        assert_relative_eq!(d.q, (0.02f64).sqrt(), max_relative = 1e-12);
        assert_eq!(d.d_st * p.c_sat - d.kappa_x, 0.0);
    }

    #[test]
    fn lasing_frequency_offset() {
        let p = LaserParams {
            kappa: 300.0,
            omega_p: 1.0,
            alpha: -3.0,
            ..LaserParams::reference()
        };
        assert_eq!(derive(&p).unwrap().delta_x, -899.0);
    }

    #[test]
    fn spin_relaxation_with_gain() {
        let p = LaserParams {
            gamma: 1.0,
            gamma_s: 100.0,
            pump_r: 1.04,
            ..LaserParams::reference()
        };
        assert_relative_eq!(
            derive(&p).unwrap().big_gamma_s,
            100.04,
            max_relative = 1e-14
        );
    }

    #[test]
    fn threshold_limit() {
        let p = LaserParams::reference().with_pump(1.0 + 1e-12, 0.0);
        let d = derive(&p).unwrap();
        assert!(d.n_x < 1e-11 && d.q < 1e-5);
        assert!(matches!(
            derive(&p.with_pump(1.0, 0.0)),
            Err(Error::BelowThreshold(_))
        ));
        assert!(matches!(
            derive(&p.with_pump(0.5, 0.0)),
            Err(Error::BelowThreshold(_))
        ));
    }

    #[test]
    fn photon_number_from_pump_balance() {
        // μ / (γ + 4cQ²) = κ_x / c for arbitrary c
        let p = LaserParams {
            c_sat: 0.013,
            pump_r: 3.7,
            ..LaserParams::reference()
        };
        let d = derive(&p).unwrap();
        assert_relative_eq!(
            d.mu / (p.gamma + 4.0 * p.c_sat * d.q * d.q),
            d.kappa_x / p.c_sat,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            d.n_x,
            p.gamma * (p.pump_r - 1.0) / (2.0 * p.c_sat),
            max_relative = 1e-14
        );
    }

    #[test]
    fn invalid_parameters_rejected() {
        let base = LaserParams::reference();
        assert!(LaserParams { kappa: 0.0, ..base }.validate().is_err());
        assert!(LaserParams {
            gamma: -1.0,
            ..base
        }
        .validate()
        .is_err());
        assert!(LaserParams {
            gamma_s: 0.5,
            ..base
        }
        .validate()
        .is_err());
        assert!(LaserParams {
            pump_p: 1.5,
            ..base
        }
        .validate()
        .is_err());
        assert!(LaserParams { c_sat: 0.0, ..base }.validate().is_err());
        assert!(LaserParams {
            alpha: f64::NAN,
            ..base
        }
        .validate()
        .is_err());
    }

    #[test]
    fn drift_at_reference_point() {
        let p = LaserParams::reference();
        let d = derive(&p).unwrap();
        let a = drift_matrices(&d, &p);
        assert_relative_eq!(a.block1[(0, 1)], 0.04, max_relative = 1e-12);
        assert_eq!(a.block1[(1, 0)], -600.0);
        assert_relative_eq!(a.block1[(1, 1)], -1.04, max_relative = 1e-14);
        assert_relative_eq!(a.block1.determinant(), 24.0, max_relative = 1e-12);
        // no dichroism: block-2 diagonal is (0, 0, -Γ_s)
        assert_eq!(a.block2[(0, 0)], 0.0);
        assert_eq!(a.block2[(1, 1)], 0.0);
        assert_relative_eq!(a.block2[(2, 2)], -100.04, max_relative = 1e-14);
    }

    #[test]
    fn reference_point_is_stable() {
        let p = LaserParams::reference();
        let d = derive(&p).unwrap();
        let rep = stability(&drift_matrices(&d, &p));
        assert!(rep.stable);
        assert_relative_eq!(rep.max_real_eig_block1, -0.52, max_relative = 1e-10);
        assert!(rep.max_real_eig_block2 < 0.0);
    }

    #[test]
    fn strong_dichroism_destabilizes() {
        let p = LaserParams {
            kappa_a: 5.0,
            omega_p: 0.0,
            alpha: 0.0,
            ..LaserParams::reference()
        };
        let d = derive(&p).unwrap();
        let rep = stability(&drift_matrices(&d, &p));
        assert!(rep.max_real_eig_block1 < 0.0);
        assert!(rep.max_real_eig_block2 > 0.0);
        assert!(!rep.stable);
    }

    #[test]
    fn steady_state_is_fixed_point() {
        for p in [
            LaserParams::reference(),
            LaserParams {
                kappa_a: 0.3,
                omega_p: 2.0,
                alpha: 1.5,
                c_sat: 0.9,
                pump_r: 2.2,
                ..LaserParams::reference()
            },
        ] {
            let d = derive(&p).unwrap();
            let f = nonlinear_rhs(&FieldState::steady(&d), &p, &d);
            let scale = d.mu;
            for v in f.to_array() {
                assert!(v.abs() < 1e-12 * scale, "{v}");
            }
        }
    }

    #[test]
    fn empty_cavity_only_pumps() {
        let p = LaserParams::reference();
        let d = derive(&p).unwrap();
        let f = nonlinear_rhs(&FieldState::zero(), &p, &d);
        assert_eq!(f.inversion, d.mu);
        assert_eq!(f.spin, 0.0);
        assert_eq!(f.a_plus, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn stokes_of_x_polarized_state() {
        let d = derive(&LaserParams::reference()).unwrap();
        let s = FieldState::steady(&d).stokes();
        assert_relative_eq!(s[0], d.n_x, max_relative = 1e-14);
        assert_eq!(s[1], 0.0);
        assert_eq!(s[2], 0.0);
    }

    #[test]
    fn numerical_jacobian_matches_drift() {
        for p in [
            LaserParams::reference(),
            LaserParams {
                kappa_a: 0.4,
                omega_p: 3.0,
                alpha: 2.0,
                c_sat: 0.2,
                pump_r: 2.5,
                ..LaserParams::reference()
            },
        ] {
            let d = derive(&p).unwrap();
            let num = numerical_stokes_jacobian(&p, &d);
            let exact = drift_matrices(&d, &p).full();
            let scale = exact.abs().max();
            for (a, b) in num.iter().zip(exact.iter()) {
                if *b == 0.0 {
                    assert!(a.abs() < 1e-10 * scale, "{a}");
                } else {
                    assert_relative_eq!(*a, *b, max_relative = 1e-8);
                }
            }
        }
    }
}
