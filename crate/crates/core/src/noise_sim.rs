//! Correlated white noise and stochastic integration of the fluctuation equations.
//!
//! Sampling needs a real factor `L` with `L Lᵀ = M`. The c-number diffusion
//! matrix is not always positive semidefinite: for a regular pump the
//! `(S1, D)` block `[[A, −A], [−A, B]]` has Schur complement
//! `B − A ∝ 1 − p·r/2`, so operating points with `p·r > 2` describe
//! sub-shot-noise statistics that no classical Gaussian process reproduces.
//! [`factorize`] rejects them; the closed forms in [`crate::analytic`] remain
//! valid there.

use std::borrow::Cow;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{SMatrix, SVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::SourceSpectra;
use crate::error::{Error, NotPositiveSemidefinite, Result};
use crate::model::{
    drift_matrices, nonlinear_rhs, stability, DerivedParams, DriftMatrices, FieldState,
    LaserParams, Matrix5, STATE_LABELS,
};

type Vector5 = SVector<f64, 5>;

/// Symmetric white-noise covariance in state order `(S1, D, S2, S3, d)`:
/// `<ξ_i(t) ξ_j(t')> = m_ij δ(t − t')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionMatrix {
    m: Matrix5,
}

impl DiffusionMatrix {
    pub fn zeros() -> Self {
        DiffusionMatrix {
            m: Matrix5::zeros(),
        }
    }

    /// Wraps an arbitrary matrix; it must be finite and symmetric.
    pub fn from_matrix(m: Matrix5) -> Result<Self> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSimConfig(
                "diffusion matrix has non-finite entries".into(),
            ));
        }
        let scale = m.abs().max();
        if (m - m.transpose()).abs().max() > 1e-14 * scale {
            return Err(Error::InvalidSimConfig(
                "diffusion matrix is not symmetric".into(),
            ));
        }
        Ok(DiffusionMatrix { m })
    }

    pub fn matrix(&self) -> &Matrix5 {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }
}

pub fn diffusion_matrix(src: &SourceSpectra) -> DiffusionMatrix {
    let a = src.s_common;
    let mut m = Matrix5::from_diagonal(&Vector5::new(a, src.s_inversion, a, a, src.s_spin));
    m[(0, 1)] = -a;
    m[(1, 0)] = -a;
    m[(3, 4)] = a;
    m[(4, 3)] = a;
    DiffusionMatrix { m }
}

/// Lower-triangular-up-to-permutation factor `L` with `L Lᵀ = M`.
/// Columns beyond [`NoiseFactor::rank`] are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseFactor {
    l: Matrix5,
    rank: usize,
}

impl NoiseFactor {
    pub fn zero() -> Self {
        NoiseFactor {
            l: Matrix5::zeros(),
            rank: 0,
        }
    }

    pub fn l(&self) -> &Matrix5 {
        &self.l
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn reconstruct(&self) -> Matrix5 {
        self.l * self.l.transpose()
    }
}

/// Pivoted Cholesky factorization with pivot tolerance `1e−12·trace`.
pub fn factorize(m: &DiffusionMatrix) -> std::result::Result<NoiseFactor, NotPositiveSemidefinite> {
    pivoted_cholesky(&m.m, &STATE_LABELS)
}

fn pivoted_cholesky(
    m: &Matrix5,
    labels: &[&'static str; 5],
) -> std::result::Result<NoiseFactor, NotPositiveSemidefinite> {
    let tol = 1e-12 * m.trace().abs();
    let mut a = *m;
    let mut l = Matrix5::zeros();
    let mut remaining: Vec<usize> = (0..5).collect();
    let mut eliminated: Vec<&str> = Vec::new();
    let mut rank = 0;

    while !remaining.is_empty() {
        let (pos, &piv) = remaining
            .iter()
            .enumerate()
            .max_by(|x, y| a[(*x.1, *x.1)].total_cmp(&a[(*y.1, *y.1)]))
            .expect("non-empty");
        let d = a[(piv, piv)];
        if d <= tol {
            // Every remaining Schur complement must vanish within tolerance.
            for &i in &remaining {
                let worst = remaining
                    .iter()
                    .map(|&j| if i == j { -a[(i, i)] } else { a[(i, j)].abs() })
                    .fold(f64::NEG_INFINITY, f64::max);
                if worst > tol {
                    return Err(NotPositiveSemidefinite {
                        variable: labels[i],
                        eliminated: eliminated.join(", "),
                        schur_complement: a[(i, i)],
                        tolerance: tol,
                    });
                }
            }
            break;
        }
        let s = d.sqrt();
        remaining.swap_remove(pos);
        for &i in &remaining {
            l[(i, rank)] = a[(i, piv)] / s;
        }
        l[(piv, rank)] = s;
        for &i in &remaining {
            for &j in &remaining {
                a[(i, j)] -= l[(i, rank)] * l[(j, rank)];
            }
        }
        eliminated.push(labels[piv]);
        rank += 1;
    }
    Ok(NoiseFactor { l, rank })
}

/// Stationary covariance `P` solving `A P + P Aᵀ + M = 0`; only exists for a
/// stable drift.
pub fn stationary_covariance(
    drift: &DriftMatrices,
    diffusion: &DiffusionMatrix,
) -> Result<Matrix5> {
    let max_real = drift.max_real_eigenvalue();
    if max_real >= 0.0 {
        return Err(Error::Unstable { max_real });
    }
    let a = drift.full();
    let eye = Matrix5::identity();
    // vec(A P + P Aᵀ) = (I ⊗ A + A ⊗ I) vec(P) for column-major vec
    let k = eye.kronecker(&a) + a.kronecker(&eye);
    let rhs = -SVector::<f64, 25>::from_column_slice(diffusion.m.as_slice());
    let p = k.lu().solve(&rhs).ok_or(Error::Unstable {
        max_real: drift.max_real_eigenvalue(),
    })?;
    let p = Matrix5::from_column_slice(p.as_slice());
    Ok(0.5 * (p + p.transpose()))
}

/// Time-stepping scheme of the linear simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `x ← x + A x dt + L w √dt`, guarded by `dt·max|eig(A)| < 0.1`.
    #[default]
    EulerMaruyama,
    /// `x ← e^{A dt} x + L_d w` with the exact one-step covariance
    /// `Q_d = ∫₀^dt e^{As} M e^{Aᵀs} ds`; exact in distribution for any `dt`.
    ExactGaussian,
}

/// Accuracy limit on `dt·max|eig|` for explicit steps.
pub const STEP_GUARD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Step (ns).
    pub dt: f64,
    /// Recorded duration after burn-in (ns).
    pub t_total: f64,
    pub n_traj: usize,
    /// Master seed; trajectory `i` uses stream `i` of the master generator.
    pub seed: u64,
    /// Discarded initial span (ns); `None` means `10/|max Re eig|`.
    pub burn_in: Option<f64>,
    #[serde(default)]
    pub scheme: Scheme,
}

impl SimConfig {
    /// Burn-in that will actually be used with this drift.
    pub fn effective_burn_in(&self, drift: &DriftMatrices) -> f64 {
        self.burn_in
            .unwrap_or_else(|| 10.0 / drift.max_real_eigenvalue().abs())
    }

    pub fn recorded_steps(&self) -> usize {
        (self.t_total / self.dt).round() as usize
    }

    fn burn_in_steps(&self, drift: &DriftMatrices) -> usize {
        (self.effective_burn_in(drift) / self.dt).round() as usize
    }

    /// Checks the config against a drift matrix.
    pub fn validate(&self, drift: &DriftMatrices, explicit_steps: bool) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidSimConfig(format!(
                "dt = {} must be positive",
                self.dt
            )));
        }
        if !(self.t_total > 0.0 && self.t_total.is_finite()) {
            return Err(Error::InvalidSimConfig(format!(
                "t_total = {} must be positive",
                self.t_total
            )));
        }
        if self.n_traj == 0 {
            return Err(Error::InvalidSimConfig("n_traj must be at least 1".into()));
        }
        if self.recorded_steps() == 0 {
            return Err(Error::InvalidSimConfig(
                "t_total is shorter than one step".into(),
            ));
        }
        let rep = stability(drift);
        if !rep.stable {
            return Err(Error::Unstable {
                max_real: rep.max_real_eig_block1.max(rep.max_real_eig_block2),
            });
        }
        let burn_in = self.effective_burn_in(drift);
        if !(burn_in >= 0.0 && burn_in.is_finite()) {
            return Err(Error::InvalidSimConfig(format!(
                "burn_in = {burn_in} must be non-negative"
            )));
        }
        if self.t_total < 10.0 * burn_in {
            return Err(Error::InvalidSimConfig(format!(
                "t_total = {} ns is shorter than 10 x burn_in = {} ns",
                self.t_total,
                10.0 * burn_in
            )));
        }
        if explicit_steps {
            let product = self.dt * drift.spectral_radius();
            if product >= STEP_GUARD {
                return Err(Error::StepSizeGuard {
                    product,
                    limit: STEP_GUARD,
                });
            }
        }
        Ok(())
    }
}

/// One recorded time series of `(δS1, δD, δS2, δS3, δd)`, starting at `t = 0`
/// after burn-in.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub index: usize,
    /// Stream of the master generator this trajectory was drawn from.
    pub sub_seed: u64,
    pub dt: f64,
    pub samples: Vec<[f64; 5]>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples of one state component.
    pub fn component(&self, k: usize) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.samples.iter().map(move |s| s[k])
    }

    /// Writes `t,dS1,dD,dS2,dS3,dd` rows.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        writeln!(w, "t,dS1,dD,dS2,dS3,dd")?;
        for (n, s) in self.samples.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                n as f64 * self.dt,
                s[0],
                s[1],
                s[2],
                s[3],
                s[4]
            )?;
        }
        w.flush()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleMeta {
    pub kind: EnsembleKind,
    pub config: SimConfig,
    pub burn_in: f64,
    pub params: Option<LaserParams>,
}

/// Trajectories held in memory, in index order.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub meta: EnsembleMeta,
    pub trajectories: Vec<Trajectory>,
}

impl Ensemble {
    pub fn with_params(mut self, params: LaserParams) -> Self {
        self.meta.params = Some(params);
        self
    }

    /// One CSV per trajectory, `traj_00000.csv`, … in `dir`.
    pub fn write_csv_dir(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        for t in &self.trajectories {
            t.write_csv(&dir.join(format!("traj_{:05}.csv", t.index)))?;
        }
        Ok(())
    }
}

/// Anything that can hand out trajectories by index, either stored or
/// generated on demand. Large ensembles are streamed so that only one
/// trajectory per worker is alive at a time.
pub trait TrajectorySource: Sync {
    fn n_traj(&self) -> usize;
    fn dt(&self) -> f64;
    fn trajectory(&self, index: usize) -> Result<Cow<'_, Trajectory>>;
}

impl TrajectorySource for Ensemble {
    fn n_traj(&self) -> usize {
        self.trajectories.len()
    }

    fn dt(&self) -> f64 {
        self.meta.config.dt
    }

    fn trajectory(&self, index: usize) -> Result<Cow<'_, Trajectory>> {
        Ok(Cow::Borrowed(&self.trajectories[index]))
    }
}

fn trajectory_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn normals<const N: usize>(rng: &mut ChaCha8Rng) -> SVector<f64, N> {
    SVector::<f64, N>::from_fn(|_, _| StandardNormal.sample(rng))
}

/// Integrator of the linear SDE `dx = A x dt + L dW`.
#[derive(Debug, Clone)]
pub struct LinearSimulator {
    cfg: SimConfig,
    transition: Matrix5,
    noise: Matrix5,
    burn_in_steps: usize,
    burn_in: f64,
}

impl LinearSimulator {
    pub fn new(drift: &DriftMatrices, factor: &NoiseFactor, cfg: SimConfig) -> Result<Self> {
        cfg.validate(drift, cfg.scheme == Scheme::EulerMaruyama)?;
        let a = drift.full();
        let (transition, noise) = match cfg.scheme {
            Scheme::EulerMaruyama => (Matrix5::identity() + a * cfg.dt, factor.l * cfg.dt.sqrt()),
            Scheme::ExactGaussian => {
                let (f, q) = van_loan(&a, &factor.reconstruct(), cfg.dt);
                (f, pivoted_cholesky(&q, &STATE_LABELS)?.l)
            }
        };
        Ok(LinearSimulator {
            cfg,
            transition,
            noise,
            burn_in_steps: cfg.burn_in_steps(drift),
            burn_in: cfg.effective_burn_in(drift),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn burn_in(&self) -> f64 {
        self.burn_in
    }

    /// Generates trajectory `index`; identical for identical `(seed, cfg)`.
    pub fn simulate_one(&self, index: usize) -> Trajectory {
        let mut rng = trajectory_rng(self.cfg.seed, index);
        let n = self.cfg.recorded_steps();
        let mut x = Vector5::zeros();
        let mut samples = Vec::with_capacity(n);
        for step in 0..self.burn_in_steps + n {
            if step >= self.burn_in_steps {
                samples.push([x[0], x[1], x[2], x[3], x[4]]);
            }
            x = self.transition * x + self.noise * normals::<5>(&mut rng);
        }
        Trajectory {
            index,
            sub_seed: index as u64,
            dt: self.cfg.dt,
            samples,
        }
    }

    pub fn run(&self) -> Ensemble {
        let trajectories = (0..self.cfg.n_traj)
            .into_par_iter()
            .map(|i| self.simulate_one(i))
            .collect();
        Ensemble {
            meta: EnsembleMeta {
                kind: EnsembleKind::Linear,
                config: self.cfg,
                burn_in: self.burn_in,
                params: None,
            },
            trajectories,
        }
    }
}

impl TrajectorySource for LinearSimulator {
    fn n_traj(&self) -> usize {
        self.cfg.n_traj
    }

    fn dt(&self) -> f64 {
        self.cfg.dt
    }

    fn trajectory(&self, index: usize) -> Result<Cow<'_, Trajectory>> {
        Ok(Cow::Owned(self.simulate_one(index)))
    }
}

/// Transition matrix `e^{A dt}` and one-step covariance via the Van Loan
/// block exponential of `[[−A, M], [0, Aᵀ]]·dt`.
fn van_loan(a: &Matrix5, m: &Matrix5, dt: f64) -> (Matrix5, Matrix5) {
    let mut c = SMatrix::<f64, 10, 10>::zeros();
    c.fixed_view_mut::<5, 5>(0, 0).copy_from(&(-a * dt));
    c.fixed_view_mut::<5, 5>(0, 5).copy_from(&(m * dt));
    c.fixed_view_mut::<5, 5>(5, 5)
        .copy_from(&(a.transpose() * dt));
    let e = c.exp();
    let f = e.fixed_view::<5, 5>(5, 5).transpose();
    let q = f * e.fixed_view::<5, 5>(0, 5);
    (f, 0.5 * (q + q.transpose()))
}

/// Runs the linear simulator and keeps every trajectory in memory.
pub fn simulate_linear(
    drift: &DriftMatrices,
    factor: &NoiseFactor,
    cfg: SimConfig,
) -> Result<Ensemble> {
    Ok(LinearSimulator::new(drift, factor, cfg)?.run())
}

/// Integrator of the rotating-frame nonlinear equations with additive noise
/// frozen at its steady-state covariance.
///
/// Stokes noise `ξ_S` is carried by the fields through `η = Pᵀ ξ_S / (8Q²)`,
/// where `P` is the Jacobian of `(S1, S2, S3)` with respect to
/// `(Re a+, Im a+, Re a−, Im a−)` at the fixed point; `P Pᵀ = 8Q² I`, so the
/// Stokes parameters receive exactly `ξ_S` and the overall phase none.
/// Steps use the stochastic Heun scheme, which is strong order 1 for additive
/// noise.
#[derive(Debug, Clone)]
pub struct NonlinearSimulator {
    params: LaserParams,
    derived: DerivedParams,
    cfg: SimConfig,
    noise: Matrix5,
    initial: FieldState,
    burn_in_steps: usize,
    burn_in: f64,
    field_map: SMatrix<f64, 4, 3>,
    scale: f64,
}

impl NonlinearSimulator {
    pub fn new(
        params: &LaserParams,
        derived: &DerivedParams,
        factor: &NoiseFactor,
        cfg: SimConfig,
    ) -> Result<Self> {
        let drift = drift_matrices(derived, params);
        cfg.validate(&drift, true)?;
        let q = derived.q;
        let p = SMatrix::<f64, 3, 4>::new(
            2.0 * q,
            0.0,
            2.0 * q,
            0.0, //
            0.0,
            2.0 * q,
            0.0,
            -2.0 * q, //
            -2.0 * q,
            0.0,
            2.0 * q,
            0.0,
        );
        let steady = FieldState::steady(derived);
        Ok(NonlinearSimulator {
            params: *params,
            derived: *derived,
            cfg,
            noise: factor.l * cfg.dt.sqrt(),
            initial: steady,
            burn_in_steps: cfg.burn_in_steps(&drift),
            burn_in: cfg.effective_burn_in(&drift),
            field_map: p.transpose() / (8.0 * q * q),
            scale: norm6(&steady.to_array()),
        })
    }

    /// Starts every trajectory from `state` instead of the fixed point.
    pub fn with_initial(mut self, state: FieldState) -> Self {
        self.initial = state;
        self
    }

    pub fn burn_in(&self) -> f64 {
        self.burn_in
    }

    fn rhs(&self, x: &[f64; 6]) -> [f64; 6] {
        nonlinear_rhs(&FieldState::from_array(x), &self.params, &self.derived).to_array()
    }

    pub fn simulate_one(&self, index: usize) -> Result<Trajectory> {
        let mut rng = trajectory_rng(self.cfg.seed, index);
        let dt = self.cfg.dt;
        let n = self.cfg.recorded_steps();
        let mut x = self.initial.to_array();
        let mut samples = Vec::with_capacity(n);
        for step in 0..self.burn_in_steps + n {
            if step >= self.burn_in_steps {
                samples.push(FieldState::from_array(&x).fluctuation(&self.derived));
            }
            let xi = self.noise * normals::<5>(&mut rng);
            let eta = self.field_map * nalgebra::Vector3::new(xi[0], xi[2], xi[3]);
            let kick = [eta[0], eta[1], eta[2], eta[3], xi[1], xi[4]];

            let f0 = self.rhs(&x);
            let mut pred = x;
            for k in 0..6 {
                pred[k] += f0[k] * dt + kick[k];
            }
            let f1 = self.rhs(&pred);
            for k in 0..6 {
                x[k] += 0.5 * (f0[k] + f1[k]) * dt + kick[k];
            }
            let norm = norm6(&x);
            if !norm.is_finite() || norm > 1e3 * self.scale {
                return Err(Error::Diverged {
                    trajectory: index,
                    time: (step + 1) as f64 * dt - self.burn_in,
                });
            }
        }
        Ok(Trajectory {
            index,
            sub_seed: index as u64,
            dt,
            samples,
        })
    }

    pub fn run(&self) -> Result<Ensemble> {
        let trajectories = (0..self.cfg.n_traj)
            .into_par_iter()
            .map(|i| self.simulate_one(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Ensemble {
            meta: EnsembleMeta {
                kind: EnsembleKind::Nonlinear,
                config: self.cfg,
                burn_in: self.burn_in,
                params: Some(self.params),
            },
            trajectories,
        })
    }
}

impl TrajectorySource for NonlinearSimulator {
    fn n_traj(&self) -> usize {
        self.cfg.n_traj
    }

    fn dt(&self) -> f64 {
        self.cfg.dt
    }

    fn trajectory(&self, index: usize) -> Result<Cow<'_, Trajectory>> {
        self.simulate_one(index).map(Cow::Owned)
    }
}

fn norm6(x: &[f64; 6]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn simulate_nonlinear(
    params: &LaserParams,
    derived: &DerivedParams,
    factor: &NoiseFactor,
    cfg: SimConfig,
) -> Result<Ensemble> {
    NonlinearSimulator::new(params, derived, factor, cfg)?.run()
}

/// Angular frequency of a ringing signal from its zero crossings (GHz).
pub fn ring_frequency(samples: &[f64], dt: f64) -> Option<f64> {
    let mut crossings = Vec::new();
    for (n, w) in samples.windows(2).enumerate() {
        if w[0] == 0.0 || w[0].signum() != w[1].signum() && w[1] != 0.0 {
            let frac = if w[0] == w[1] {
                0.0
            } else {
                w[0] / (w[0] - w[1])
            };
            crossings.push((n as f64 + frac) * dt);
        }
    }
    if crossings.len() < 3 {
        return None;
    }
    let span = crossings[crossings.len() - 1] - crossings[0];
    Some(std::f64::consts::PI * (crossings.len() - 1) as f64 / span)
}
