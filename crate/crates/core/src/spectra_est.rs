//! Welch estimates of Stokes auto- and cross-spectra from simulated ensembles.
//!
//! Each segment of `L` samples gives `X_i(Ω) = Σ_n w_n x_i(t_n) e^{iΩ t_n} dt`
//! and the periodogram `Re[X_i X_k*] / (T_seg U)` with `T_seg = L dt` and
//! `U = mean(w²)`. For white noise `<ξ(t)ξ(t')> = m δ(t − t')` sampled as
//! independent values of variance `m/dt`, the expectation is exactly `m` at
//! every bin, which ties the estimator to the spectral-density convention of
//! [`crate::analytic`].
//!
//! Segments do not overlap. Standard errors are computed across trajectories
//! (each contributes its segment-averaged periodogram), which stays valid
//! whatever the correlation between segments of one trajectory. A single
//! trajectory falls back to the scatter across its segments.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::analytic::{FrequencyGrid, StokesSpectra, StokesVariances};
use crate::error::{Error, Result};
use crate::noise_sim::{Trajectory, TrajectorySource};

/// Minimum number of samples per segment.
pub const MIN_SEGMENT_SAMPLES: usize = 64;

/// State components that carry the Stokes fluctuations `δS1, δS2, δS3`.
const CHANNELS: [usize; 3] = [0, 2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
}

impl Window {
    /// Periodic window of length `n`.
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|k| {
                    let s = (std::f64::consts::PI * k as f64 / n as f64).sin();
                    s * s
                })
                .collect(),
        }
    }
}

/// Mean and standard error of one estimated spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimated {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectraEstimate {
    /// Non-negative FFT bins `2πk/T_seg`, `k = 0..=L/2`.
    pub grid: FrequencyGrid,
    pub s11: Estimated,
    pub s22: Estimated,
    pub s33: Estimated,
    pub s23: Estimated,
    pub window: Window,
    pub segment_samples: usize,
    pub n_segments: usize,
    pub n_traj: usize,
}

impl SpectraEstimate {
    pub fn segment_len(&self, dt: f64) -> f64 {
        self.segment_samples as f64 * dt
    }
}

/// Periodogram sums of one trajectory: `[s11, s22, s33, s23]` per bin.
struct Periodograms {
    sums: Vec<[f64; 4]>,
    sq_sums: Vec<[f64; 4]>,
    segments: usize,
}

/// Running mean and squared deviation (Welford) of per-trajectory averages.
struct Accumulator {
    n: usize,
    segments: usize,
    mean: Vec<[f64; 4]>,
    m2: Vec<[f64; 4]>,
}

impl Accumulator {
    fn new(nb: usize) -> Self {
        Accumulator {
            n: 0,
            segments: 0,
            mean: vec![[0.0; 4]; nb],
            m2: vec![[0.0; 4]; nb],
        }
    }

    fn push(&mut self, p: &Periodograms) -> Result<()> {
        if self.n == 0 {
            self.segments = p.segments;
        } else if p.segments != self.segments {
            return Err(Error::InvalidSimConfig(
                "trajectories differ in length".into(),
            ));
        }
        self.n += 1;
        let n = self.n as f64;
        for ((m, m2), s) in self.mean.iter_mut().zip(&mut self.m2).zip(&p.sums) {
            for j in 0..4 {
                let x = s[j] / self.segments as f64;
                let d = x - m[j];
                m[j] += d / n;
                m2[j] += d * (x - m[j]);
            }
        }
        Ok(())
    }
}

/// Plans and scratch shared by all segments of one estimate.
struct Welch {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    norm: f64,
    len: usize,
}

impl Welch {
    fn new(window: Window, len: usize, dt: f64) -> Self {
        let w = window.coefficients(len);
        let u = w.iter().map(|x| x * x).sum::<f64>() / len as f64;
        let t_seg = len as f64 * dt;
        Welch {
            // the inverse transform carries the e^{+iΩt} kernel
            fft: FftPlanner::new().plan_fft_inverse(len),
            window: w,
            norm: dt * dt / (t_seg * u),
            len,
        }
    }

    fn bins(&self) -> usize {
        self.len / 2 + 1
    }

    fn trajectory(&self, t: &Trajectory) -> Periodograms {
        let nb = self.bins();
        let segments = t.len() / self.len;
        let mut sums = vec![[0.0; 4]; nb];
        let mut sq_sums = vec![[0.0; 4]; nb];
        let mut buf = vec![vec![Complex64::new(0.0, 0.0); self.len]; 3];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for s in 0..segments {
            let seg = &t.samples[s * self.len..(s + 1) * self.len];
            for (c, &k) in CHANNELS.iter().enumerate() {
                for ((z, x), w) in buf[c].iter_mut().zip(seg).zip(&self.window) {
                    *z = Complex64::new(x[k] * w, 0.0);
                }
                self.fft.process_with_scratch(&mut buf[c], &mut scratch);
            }
            for b in 0..nb {
                let (x1, x2, x3) = (buf[0][b], buf[1][b], buf[2][b]);
                let p = [
                    x1.norm_sqr() * self.norm,
                    x2.norm_sqr() * self.norm,
                    x3.norm_sqr() * self.norm,
                    (x2 * x3.conj()).re * self.norm,
                ];
                for j in 0..4 {
                    sums[b][j] += p[j];
                    sq_sums[b][j] += p[j] * p[j];
                }
            }
        }
        Periodograms {
            sums,
            sq_sums,
            segments,
        }
    }
}

/// Welch estimate over every trajectory of `source`.
///
/// `segment_len` is in ns and is rounded to a whole number of samples.
pub fn estimate<S: TrajectorySource + ?Sized>(
    source: &S,
    window: Window,
    segment_len: f64,
) -> Result<SpectraEstimate> {
    let dt = source.dt();
    let n_traj = source.n_traj();
    if n_traj == 0 {
        return Err(Error::InvalidSimConfig(
            "ensemble has no trajectories".into(),
        ));
    }
    let len = (segment_len / dt).round() as usize;
    if len < MIN_SEGMENT_SAMPLES {
        return Err(Error::SegmentTooShort {
            samples: len,
            min: MIN_SEGMENT_SAMPLES,
        });
    }
    let welch = Welch::new(window, len, dt);
    let nb = welch.bins();

    // Trajectories are transformed in parallel a chunk at a time and folded in
    // index order, so memory stays bounded and the result is bit-reproducible.
    const CHUNK: usize = 32;
    let mut acc = Accumulator::new(nb);
    let mut single = None;
    for first in (0..n_traj).step_by(CHUNK) {
        let chunk: Vec<Periodograms> = (first..(first + CHUNK).min(n_traj))
            .into_par_iter()
            .map(|i| {
                let t = source.trajectory(i)?;
                if t.len() < len {
                    return Err(Error::SegmentTooShort {
                        samples: t.len(),
                        min: len,
                    });
                }
                Ok(welch.trajectory(&t))
            })
            .collect::<Result<_>>()?;
        for p in chunk {
            acc.push(&p)?;
            if n_traj == 1 {
                single = Some(p);
            }
        }
    }
    let segments = acc.segments;

    let mut mean = acc.mean;
    let mut var = vec![[0.0; 4]; nb];
    if n_traj >= 2 {
        // trajectory-level averages are the independent units
        let denom = (n_traj * (n_traj - 1)) as f64;
        for (v, m2) in var.iter_mut().zip(&acc.m2) {
            for j in 0..4 {
                v[j] = m2[j] / denom;
            }
        }
    } else {
        let p = single.expect("one trajectory");
        let k = segments as f64;
        for b in 0..nb {
            for j in 0..4 {
                mean[b][j] = p.sums[b][j] / k;
                var[b][j] = if segments >= 2 {
                    ((p.sq_sums[b][j] - k * mean[b][j] * mean[b][j]) / (k - 1.0)).max(0.0) / k
                } else {
                    f64::NAN
                };
            }
        }
    }

    let omegas = (0..nb)
        .map(|b| 2.0 * std::f64::consts::PI * b as f64 / (len as f64 * dt))
        .collect();
    let column = |j: usize| Estimated {
        mean: mean.iter().map(|m| m[j]).collect(),
        stderr: var.iter().map(|v| v[j].sqrt()).collect(),
    };
    Ok(SpectraEstimate {
        grid: FrequencyGrid::new(omegas)?,
        s11: column(0),
        s22: column(1),
        s33: column(2),
        s23: column(3),
        window,
        segment_samples: len,
        n_segments: segments,
        n_traj,
    })
}

/// Comparison of an estimate with reference spectra on the same bins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumComparison {
    pub omega: Vec<f64>,
    pub reference: [Vec<f64>; 4],
    pub z: [Vec<f64>; 4],
}

/// z-scores `(estimate − reference)/stderr` for `s11, s22, s33, s23`.
pub fn compare(est: &SpectraEstimate, reference: &StokesSpectra) -> Result<SpectrumComparison> {
    if est.grid != reference.grid {
        return Err(Error::GridMismatch);
    }
    let z = |e: &Estimated, r: &[f64]| -> Vec<f64> {
        e.mean
            .iter()
            .zip(&e.stderr)
            .zip(r)
            .map(|((m, s), r)| z_score(*m - r, *s))
            .collect()
    };
    Ok(SpectrumComparison {
        omega: est.grid.omegas().to_vec(),
        reference: [
            reference.s11.clone(),
            reference.s22.clone(),
            reference.s33.clone(),
            reference.s23.clone(),
        ],
        z: [
            z(&est.s11, &reference.s11),
            z(&est.s22, &reference.s22),
            z(&est.s33, &reference.s33),
            z(&est.s23, &reference.s23),
        ],
    })
}

/// Agreement statistics of an estimate over a frequency band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandSummary {
    pub band: (f64, f64),
    pub bins: usize,
    /// Largest `|z|` for `s11, s22, s33, s23`.
    pub max_abs_z: [f64; 4],
    /// RMS of `(estimate − reference)/scale`, where the scale is the reference
    /// value for auto-spectra and `√(s22 s33)` for the cross-spectrum, which
    /// changes sign.
    pub rms_rel_dev: [f64; 4],
}

pub fn band_summary(
    est: &SpectraEstimate,
    reference: &StokesSpectra,
    band: (f64, f64),
) -> Result<BandSummary> {
    let cmp = compare(est, reference)?;
    let bins: Vec<usize> = (0..cmp.omega.len())
        .filter(|&i| cmp.omega[i] >= band.0 && cmp.omega[i] <= band.1)
        .collect();
    if bins.is_empty() {
        return Err(Error::InvalidGrid(format!(
            "no estimate bins inside [{}, {}] GHz",
            band.0, band.1
        )));
    }
    let means = [&est.s11.mean, &est.s22.mean, &est.s33.mean, &est.s23.mean];
    let mut max_abs_z = [0.0; 4];
    let mut rms_rel_dev = [0.0; 4];
    for j in 0..4 {
        let mut sq = 0.0;
        for &i in &bins {
            max_abs_z[j] = f64::max(max_abs_z[j], cmp.z[j][i].abs());
            let scale = if j == 3 {
                (reference.s22[i] * reference.s33[i]).sqrt()
            } else {
                cmp.reference[j][i]
            };
            sq += ((means[j][i] - cmp.reference[j][i]) / scale).powi(2);
        }
        rms_rel_dev[j] = (sq / bins.len() as f64).sqrt();
    }
    Ok(BandSummary {
        band,
        bins: bins.len(),
        max_abs_z,
        rms_rel_dev,
    })
}

fn z_score(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if se > 0.0 {
        diff / se
    } else {
        f64::INFINITY.copysign(diff)
    }
}

/// Time-domain moment of one quantity against its expected value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentCheck {
    pub name: &'static str,
    pub expected: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReport {
    /// `Var δS1`, `Var δS2`, `Var δS3`, `Cov(δS2, δS3)`.
    pub variances: [MomentCheck; 4],
    /// Means of `δS1, δD, δS2, δS3, δd` against zero.
    pub means: [MomentCheck; 5],
}

impl VarianceReport {
    pub fn max_abs_z(&self) -> f64 {
        self.variances
            .iter()
            .chain(&self.means)
            .map(|c| c.z.abs())
            .fold(0.0, f64::max)
    }
}

/// Compares sample moments with `(1/2π)∫S(Ω)dΩ`. Uncertainties come from the
/// scatter of per-trajectory time averages, so at least two trajectories are
/// needed for finite z-scores.
pub fn variance_check<S: TrajectorySource + ?Sized>(
    source: &S,
    expected: &StokesVariances,
) -> Result<VarianceReport> {
    let n = source.n_traj();
    // per trajectory: 5 means, then E[S1²], E[S2²], E[S3²], E[S2 S3]
    let stats: Vec<[f64; 9]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let t = source.trajectory(i)?;
            let mut acc = [0.0; 9];
            for s in &t.samples {
                for k in 0..5 {
                    acc[k] += s[k];
                }
                acc[5] += s[0] * s[0];
                acc[6] += s[2] * s[2];
                acc[7] += s[3] * s[3];
                acc[8] += s[2] * s[3];
            }
            let len = t.len().max(1) as f64;
            Ok(acc.map(|x| x / len))
        })
        .collect::<Result<_>>()?;

    let moment = |j: usize| -> (f64, f64) {
        let mean = stats.iter().map(|s| s[j]).sum::<f64>() / n as f64;
        let se = if n >= 2 {
            (stats.iter().map(|s| (s[j] - mean).powi(2)).sum::<f64>() / ((n * (n - 1)) as f64))
                .sqrt()
        } else {
            f64::NAN
        };
        (mean, se)
    };
    let check = |name: &'static str, j: usize, expected: f64| {
        let (estimate, stderr) = moment(j);
        MomentCheck {
            name,
            expected,
            estimate,
            stderr,
            z: z_score(estimate - expected, stderr),
        }
    };
    Ok(VarianceReport {
        variances: [
            check("var_S1", 5, expected.s1),
            check("var_S2", 6, expected.s2),
            check("var_S3", 7, expected.s3),
            check("cov_S2_S3", 8, expected.s23),
        ],
        means: [
            check("mean_S1", 0, 0.0),
            check("mean_D", 1, 0.0),
            check("mean_S2", 2, 0.0),
            check("mean_S3", 3, 0.0),
            check("mean_d", 4, 0.0),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise_sim::{Ensemble, EnsembleKind, EnsembleMeta, Scheme, SimConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn ensemble(dt: f64, trajectories: Vec<Trajectory>) -> Ensemble {
        let len = trajectories[0].len();
        Ensemble {
            meta: EnsembleMeta {
                kind: EnsembleKind::Linear,
                config: SimConfig {
                    dt,
                    t_total: len as f64 * dt,
                    n_traj: trajectories.len(),
                    seed: 0,
                    burn_in: Some(0.0),
                    scheme: Scheme::EulerMaruyama,
                },
                burn_in: 0.0,
                params: None,
            },
            trajectories,
        }
    }

    /// Independent white noise with `<ξ_k(t)ξ_k(t')> = m_k δ(t − t')` and a
    /// correlated S2/S3 pair.
    fn white(dt: f64, n_traj: usize, len: usize, m: [f64; 3], rho: f64) -> Ensemble {
        let trajectories = (0..n_traj)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + i as u64);
                let g = Normal::new(0.0, 1.0).unwrap();
                let samples = (0..len)
                    .map(|_| {
                        let (a, b, c): (f64, f64, f64) =
                            (g.sample(&mut rng), g.sample(&mut rng), g.sample(&mut rng));
                        let s2 = b;
                        let s3 = rho * b + (1.0 - rho * rho).sqrt() * c;
                        [
                            a * (m[0] / dt).sqrt(),
                            0.0,
                            s2 * (m[1] / dt).sqrt(),
                            s3 * (m[2] / dt).sqrt(),
                            0.0,
                        ]
                    })
                    .collect();
                Trajectory {
                    index: i,
                    sub_seed: i as u64,
                    dt,
                    samples,
                }
            })
            .collect();
        ensemble(dt, trajectories)
    }

    #[test]
    fn white_noise_calibration() {
        let m = [2.0, 0.5, 3.0];
        let rho = 0.6;
        let ens = white(0.01, 8, 4096, m, rho);
        for window in [Window::Rectangular, Window::Hann] {
            let est = estimate(&ens, window, 1.28).unwrap();
            assert_eq!(est.segment_samples, 128);
            assert_eq!(est.n_segments, 32);
            let expected = [m[0], m[1], m[2], rho * (m[1] * m[2]).sqrt()];
            let cols = [&est.s11, &est.s22, &est.s33, &est.s23];
            for (col, &want) in cols.iter().zip(&expected) {
                // interior bins only: DC and Nyquist are real-valued and noisier
                let bins = 1..est.grid.len() - 1;
                let n = bins.len() as f64;
                let avg: f64 = bins.clone().map(|b| col.mean[b]).sum::<f64>() / n;
                let se: f64 = bins
                    .clone()
                    .map(|b| col.stderr[b].powi(2))
                    .sum::<f64>()
                    .sqrt()
                    / n;
                assert!(
                    (avg - want).abs() < 4.0 * se,
                    "{window:?}: {avg} vs {want} (se {se})"
                );
                let outliers = bins
                    .filter(|&b| ((col.mean[b] - want) / col.stderr[b]).abs() > 4.0)
                    .count();
                assert!(outliers <= 1, "{window:?}: {outliers} bins beyond 4 sigma");
            }
        }
    }

    #[test]
    fn grid_spacing_is_two_pi_over_segment() {
        let ens = white(0.01, 2, 1024, [1.0; 3], 0.0);
        let est = estimate(&ens, Window::Hann, 2.56).unwrap();
        let g = est.grid.omegas();
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 2.0 * std::f64::consts::PI / 2.56).abs() < 1e-12);
        assert_eq!(g.len(), 129);
    }

    #[test]
    fn zero_input_zero_estimate() {
        let t = Trajectory {
            index: 0,
            sub_seed: 0,
            dt: 0.1,
            samples: vec![[0.0; 5]; 256],
        };
        let ens = ensemble(0.1, vec![t.clone(), Trajectory { index: 1, ..t }]);
        let est = estimate(&ens, Window::Hann, 12.8).unwrap();
        for col in [&est.s11, &est.s22, &est.s33, &est.s23] {
            assert!(col.mean.iter().chain(&col.stderr).all(|&x| x == 0.0));
        }
    }

    #[test]
    fn short_segments_rejected() {
        let ens = white(0.01, 2, 1024, [1.0; 3], 0.0);
        assert!(matches!(
            estimate(&ens, Window::Hann, 0.5),
            Err(Error::SegmentTooShort { samples: 50, .. })
        ));
        assert!(matches!(
            estimate(&ens, Window::Hann, 20.0),
            Err(Error::SegmentTooShort { .. })
        ));
    }

    #[test]
    fn stderr_shrinks_with_data() {
        let small = estimate(
            &white(0.01, 4, 2048, [1.0; 3], 0.0),
            Window::Rectangular,
            1.28,
        )
        .unwrap();
        let large = estimate(
            &white(0.01, 16, 2048, [1.0; 3], 0.0),
            Window::Rectangular,
            1.28,
        )
        .unwrap();
        let avg = |e: &SpectraEstimate| e.s11.stderr[1..60].iter().sum::<f64>() / 59.0;
        let ratio = avg(&small) / avg(&large);
        assert!((ratio - 2.0).abs() < 0.3, "{ratio}");
    }

    #[test]
    fn single_trajectory_uses_segment_scatter() {
        let est = estimate(
            &white(0.01, 1, 4096, [1.0; 3], 0.0),
            Window::Rectangular,
            1.28,
        )
        .unwrap();
        let mid = est.s11.stderr[20];
        // exponential periodogram: stderr ≈ mean / √segments
        assert!((mid - 1.0 / 32f64.sqrt()).abs() < 0.08, "{mid}");
    }

    #[test]
    fn moments_of_white_samples() {
        let dt = 0.01;
        let ens = white(dt, 6, 5000, [1.0, 2.0, 2.0], 0.5);
        let expected = StokesVariances {
            s1: 1.0 / dt,
            s2: 2.0 / dt,
            s3: 2.0 / dt,
            s23: 0.5 * 2.0 / dt,
        };
        let rep = variance_check(&ens, &expected).unwrap();
        assert!(rep.max_abs_z() < 4.5, "{rep:?}");
        let wrong = StokesVariances {
            s1: 1.1 / dt,
            ..expected
        };
        assert!(variance_check(&ens, &wrong).unwrap().variances[0].z < -5.0);
    }

    #[test]
    fn zero_ensemble_matches_zero_variances() {
        let t = Trajectory {
            index: 0,
            sub_seed: 0,
            dt: 0.1,
            samples: vec![[0.0; 5]; 100],
        };
        let ens = ensemble(0.1, vec![t.clone(), Trajectory { index: 1, ..t }]);
        let zero = StokesVariances {
            s1: 0.0,
            s2: 0.0,
            s3: 0.0,
            s23: 0.0,
        };
        assert_eq!(variance_check(&ens, &zero).unwrap().max_abs_z(), 0.0);
    }
}
