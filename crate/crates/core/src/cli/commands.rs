use std::path::PathBuf;

use rayon::prelude::*;
use serde_json::json;

use super::config::{RunConfig, SimModel};
use super::output::{extra, svg_plot, write_atomic, write_csv, write_svg, Cell, Series, Table};
use super::CliError;
use crate::analytic::{
    cross_correlation, integrated_variances, source_spectra, stokes_spectra_closed_form_variant,
    ClosedFormVariant, StokesSpectra,
};
use crate::detection::{detection_spectrum, squeezing_at_zero, DetectionGeometry};
use crate::error::Error;
use crate::model::{derive, drift_matrices, stability, DerivedParams, LaserParams};
use crate::noise_sim::{
    diffusion_matrix, factorize, LinearSimulator, NonlinearSimulator, TrajectorySource,
};
use crate::spectra_est::{band_summary, compare, estimate, variance_check, SpectraEstimate};

type Outcome = Result<Vec<PathBuf>, CliError>;

/// Derived constants of a stable operating point.
fn operating_point(cfg: &RunConfig) -> Result<(LaserParams, DerivedParams), CliError> {
    let params = cfg.laser_params();
    let derived = derive(&params)?;
    let rep = stability(&drift_matrices(&derived, &params));
    if !rep.stable {
        return Err(Error::Unstable {
            max_real: rep.max_real_eig_block1.max(rep.max_real_eig_block2),
        }
        .into());
    }
    Ok((params, derived))
}

pub fn spectra(cfg: &RunConfig) -> Outcome {
    let (params, derived) = operating_point(cfg)?;
    let grid = cfg.grid()?;
    let s = stokes_spectra_closed_form_variant(&params, &derived, &grid, cfg.variant)?;
    let c = cross_correlation(&s);
    let mut t = Table::new(&["omega_ghz", "s11", "s22", "s33", "s23", "c_plus_minus"]);
    for (i, &ci) in c.iter().enumerate() {
        t.push(vec![
            grid.omegas()[i].into(),
            s.s11[i].into(),
            s.s22[i].into(),
            s.s33[i].into(),
            s.s23[i].into(),
            ci.into(),
        ]);
    }
    let peak = grid.omegas()[s.s11_peak_index()];
    let mut files = vec![write_csv(
        cfg,
        "spectra",
        "spectra.csv",
        &t,
        json!({ "derived": derived, "variant": cfg.variant, "s11_peak_omega_ghz": peak }),
    )?];
    if cfg.svg {
        let w = grid.omegas();
        let total: Vec<f64> = s.s11.iter().zip(&s.s22).map(|(a, b)| a + b).collect();
        let svg = svg_plot(
            "Stokes fluctuation spectra",
            "Omega (GHz)",
            "spectral density",
            &[
                Series {
                    label: "(dS1^2)",
                    x: w,
                    y: &s.s11,
                },
                Series {
                    label: "(dS2^2)",
                    x: w,
                    y: &s.s22,
                },
                Series {
                    label: "(dS3^2)",
                    x: w,
                    y: &s.s33,
                },
                Series {
                    label: "(dS1^2)+(dS2^2)",
                    x: w,
                    y: &total,
                },
            ],
            true,
        );
        files.push(write_svg(cfg, "spectra.svg", &svg)?);
    }
    say!(
        "s11 peak at {peak:.4} GHz ({} grid points, {:?} coefficients)",
        grid.len(),
        cfg.variant
    );
    Ok(files)
}

fn nonclassical_hint(params: &LaserParams) -> String {
    format!(
        "with pump statistics p = {} and pump r = {}, p·r = {} exceeds 2: the inversion noise is sub-Poissonian \
         and the (S1, D) diffusion block has Schur complement ∝ 1 − p·r/2 < 0, so it is not a classical \
         covariance. Sampling needs p·r ≤ 2; the `spectra` and `detect` commands cover this regime analytically.",
        params.pump_p,
        params.pump_r,
        params.pump_p * params.pump_r
    )
}

pub fn simulate(cfg: &RunConfig) -> Outcome {
    let params = cfg.laser_params();
    let derived = derive(&params)?;
    let drift = drift_matrices(&derived, &params);
    let diffusion = diffusion_matrix(&source_spectra(&params, &derived));
    let factor = factorize(&diffusion)
        .map_err(|e| CliError::Run(e.into(), Some(nonclassical_hint(&params))))?;
    let sim_cfg = cfg.sim_config();

    let linear;
    let nonlinear;
    let (source, burn_in): (&dyn TrajectorySource, f64) = match cfg.model {
        SimModel::Linear => {
            linear = LinearSimulator::new(&drift, &factor, sim_cfg)?;
            (&linear, linear.burn_in())
        }
        SimModel::Nonlinear => {
            nonlinear = NonlinearSimulator::new(&params, &derived, &factor, sim_cfg)?;
            (&nonlinear, nonlinear.burn_in())
        }
    };

    let mut files = Vec::new();
    for i in 0..cfg.dump_trajectories.min(cfg.n_traj) {
        let traj = source.trajectory(i)?;
        let path = cfg
            .out_dir
            .join("trajectories")
            .join(format!("traj_{i:05}.csv"));
        let mut t = Table::new(&["t", "dS1", "dD", "dS2", "dS3", "dd"]);
        for (n, s) in traj.samples.iter().enumerate() {
            let mut row: Vec<Cell> = vec![(n as f64 * traj.dt).into()];
            row.extend(s.iter().map(|&v| Cell::from(v)));
            t.push(row);
        }
        write_atomic(&path, t.render().as_bytes())?;
        files.push(path);
    }

    let est = estimate(source, cfg.window, cfg.segment_len)?;
    let reference = stokes_spectra_closed_form_variant(&params, &derived, &est.grid, cfg.variant)?;
    let summary = band_summary(&est, &reference, (cfg.band_min, cfg.band_max))?;
    let meta = json!({
        "derived": derived,
        "burn_in_ns": burn_in,
        "segments_per_trajectory": est.n_segments,
        "segment_samples": est.segment_samples,
        "band_summary": summary,
    });
    files.push(write_csv(
        cfg,
        "simulate",
        "estimate.csv",
        &estimate_table(&est),
        meta.clone(),
    )?);
    files.push(write_csv(
        cfg,
        "simulate",
        "compare.csv",
        &compare_table(&est, &reference)?,
        meta,
    )?);

    if cfg.variance_check {
        let expected = integrated_variances(&params, &derived, cfg.variant)?;
        let rep = variance_check(source, &expected)?;
        let mut t = Table::new(&["quantity", "expected", "estimate", "stderr", "z"]);
        for c in rep.variances.iter().chain(&rep.means) {
            t.push(vec![
                c.name.into(),
                c.expected.into(),
                c.estimate.into(),
                c.stderr.into(),
                c.z.into(),
            ]);
        }
        files.push(write_csv(cfg, "simulate", "variance.csv", &t, extra(&rep))?);
        say!("time-domain moments: max |z| = {:.2}", rep.max_abs_z());
    }

    if cfg.svg {
        let w = est.grid.omegas();
        let svg = svg_plot(
            "Welch estimate vs closed form",
            "Omega (GHz)",
            "spectral density",
            &[
                Series {
                    label: "(dS1^2) closed form",
                    x: w,
                    y: &reference.s11,
                },
                Series {
                    label: "(dS1^2) estimate",
                    x: w,
                    y: &est.s11.mean,
                },
                Series {
                    label: "(dS2^2) closed form",
                    x: w,
                    y: &reference.s22,
                },
                Series {
                    label: "(dS2^2) estimate",
                    x: w,
                    y: &est.s22.mean,
                },
            ],
            true,
        );
        files.push(write_svg(cfg, "compare.svg", &svg)?);
    }

    for (j, name) in ["s11", "s22", "s33", "s23"].iter().enumerate() {
        say!(
            "{name}: max |z| = {:.2}, rms relative deviation = {:.4} over [{}, {}] GHz ({} bins)",
            summary.max_abs_z[j],
            summary.rms_rel_dev[j],
            cfg.band_min,
            cfg.band_max,
            summary.bins
        );
    }
    Ok(files)
}

fn estimate_table(est: &SpectraEstimate) -> Table {
    let mut t = Table::new(&[
        "omega_ghz",
        "s11",
        "s11_stderr",
        "s22",
        "s22_stderr",
        "s33",
        "s33_stderr",
        "s23",
        "s23_stderr",
    ]);
    let cols = [&est.s11, &est.s22, &est.s33, &est.s23];
    for (i, &w) in est.grid.omegas().iter().enumerate() {
        let mut row: Vec<Cell> = vec![w.into()];
        for c in cols {
            row.push(c.mean[i].into());
            row.push(c.stderr[i].into());
        }
        t.push(row);
    }
    t
}

fn compare_table(est: &SpectraEstimate, reference: &StokesSpectra) -> Result<Table, CliError> {
    let cmp = compare(est, reference)?;
    let mut header = vec!["omega_ghz".to_string()];
    for n in ["s11", "s22", "s33", "s23"] {
        header.extend([
            format!("{n}_analytic"),
            format!("{n}_estimate"),
            format!("{n}_z"),
        ]);
    }
    let mut t = Table::new(&header);
    let means = [&est.s11.mean, &est.s22.mean, &est.s33.mean, &est.s23.mean];
    for (i, &w) in cmp.omega.iter().enumerate() {
        let mut row: Vec<Cell> = vec![w.into()];
        for ((reference, mean), z) in cmp.reference.iter().zip(means).zip(&cmp.z) {
            row.push(reference[i].into());
            row.push(mean[i].into());
            row.push(z[i].into());
        }
        t.push(row);
    }
    Ok(t)
}

pub fn detect(cfg: &RunConfig) -> Outcome {
    let (params, derived) = operating_point(cfg)?;
    let grid = cfg.grid()?;
    let s = stokes_spectra_closed_form_variant(&params, &derived, &grid, cfg.variant)?;
    let mut files = Vec::new();
    for geom in cfg.detection_geometries() {
        let d = detection_spectrum(&s, geom, &params, &derived);
        let mut t = Table::new(&["omega_ghz", "value"]);
        for (w, v) in grid.omegas().iter().zip(&d.values) {
            t.push(vec![(*w).into(), (*v).into()]);
        }
        let (phi, theta) = geom.angles();
        let name = format!("detect_{}.csv", geom.name());
        files.push(write_csv(
            cfg,
            "detect",
            &name,
            &t,
            json!({ "phi": phi, "theta": theta, "derived": derived }),
        )?);
    }

    let mut t = Table::new(&["r", "this_laser", "nondegenerate_ref", "short_lower_ref"]);
    let mut onset = None;
    for r in cfg.squeeze_values() {
        let z = squeezing_at_zero(r)?;
        if onset.is_none() && z.this_laser < 1.0 {
            onset = Some(r);
        }
        t.push(vec![
            r.into(),
            z.this_laser.into(),
            z.nondegenerate_ref.into(),
            z.short_lower_ref.into(),
        ]);
    }
    files.push(write_csv(
        cfg,
        "detect",
        "squeezing.csv",
        &t,
        json!({ "first_squeezed_r": onset }),
    )?);
    match onset {
        Some(r) => say!("zero-frequency squeezing first appears at r = {r}"),
        None => say!("no squeezing in the scanned pump range"),
    }
    Ok(files)
}

pub fn stability_report(cfg: &RunConfig) -> Outcome {
    let params = cfg.laser_params();
    let derived = derive(&params)?;
    let drift = drift_matrices(&derived, &params);
    let rep = stability(&drift);
    let mut t = Table::new(&["block", "re", "im"]);
    let eig = drift.eigenvalues();
    for (k, z) in eig.iter().enumerate() {
        t.push(vec![
            if k < 2 { "1" } else { "2" }.into(),
            z.re.into(),
            z.im.into(),
        ]);
    }
    let radius = drift.spectral_radius();
    let path = write_csv(
        cfg,
        "stability",
        "stability.csv",
        &t,
        json!({ "report": rep, "derived": derived, "spectral_radius": radius }),
    )?;
    say!(
        "max Re eig: block1 {:.6}, block2 {:.6} GHz -> {}; explicit steps need dt < {:.5} ns",
        rep.max_real_eig_block1,
        rep.max_real_eig_block2,
        if rep.stable { "stable" } else { "UNSTABLE" },
        crate::noise_sim::STEP_GUARD / radius
    );
    Ok(vec![path])
}

pub fn sweep(cfg: &RunConfig) -> Outcome {
    let grid = cfg.grid()?;
    let rows: Vec<Result<Vec<Cell>, CliError>> = cfg
        .sweep_values
        .par_iter()
        .map(|&v| {
            let point = cfg.with_laser_value(&cfg.sweep_param, v);
            let params = point.laser_params();
            let derived = derive(&params)?;
            let rep = stability(&drift_matrices(&derived, &params));
            let classical =
                factorize(&diffusion_matrix(&source_spectra(&params, &derived))).is_ok();
            let mut row: Vec<Cell> = vec![
                v.into(),
                rep.stable.into(),
                rep.max_real_eig_block1.into(),
                rep.max_real_eig_block2.into(),
                classical.into(),
            ];
            if rep.stable {
                let s = stokes_spectra_closed_form_variant(&params, &derived, &grid, cfg.variant)?;
                let peak = s.s11_peak_index();
                let var = integrated_variances(&params, &derived, cfg.variant)?;
                let zero = crate::analytic::FrequencyGrid::new(vec![0.0])?;
                let s0 = stokes_spectra_closed_form_variant(&params, &derived, &zero, cfg.variant)?;
                let d0 = detection_spectrum(&s0, DetectionGeometry::Intensity, &params, &derived)
                    .values[0];
                row.extend([
                    grid.omegas()[peak].into(),
                    s.s11[peak].into(),
                    var.s1.into(),
                    var.s2.into(),
                    var.s3.into(),
                    d0.into(),
                ]);
            } else {
                row.extend((0..6).map(|_| Cell::Missing));
            }
            Ok(row)
        })
        .collect();
    let mut t = Table::new(&[
        "value",
        "stable",
        "max_real_eig_block1",
        "max_real_eig_block2",
        "classical_noise",
        "s11_peak_omega",
        "s11_peak",
        "var_s1",
        "var_s2",
        "var_s3",
        "intensity_noise_at_zero",
    ]);
    for r in rows {
        t.push(r?);
    }
    let path = write_csv(
        cfg,
        "sweep",
        "sweep.csv",
        &t,
        json!({ "sweep_param": cfg.sweep_param }),
    )?;
    say!(
        "swept {} over {} values",
        cfg.sweep_param,
        cfg.sweep_values.len()
    );
    Ok(vec![path])
}

pub fn reproduce_figures(cfg: &RunConfig) -> Outcome {
    let (params, derived) = operating_point(cfg)?;
    let grid = cfg.grid()?;
    let w = grid.omegas();
    let s =
        stokes_spectra_closed_form_variant(&params, &derived, &grid, ClosedFormVariant::Corrected)?;
    let printed =
        stokes_spectra_closed_form_variant(&params, &derived, &grid, ClosedFormVariant::Printed)?;
    let total: Vec<f64> = s.s11.iter().zip(&s.s22).map(|(a, b)| a + b).collect();
    let total_printed: Vec<f64> = printed
        .s11
        .iter()
        .zip(&printed.s22)
        .map(|(a, b)| a + b)
        .collect();
    let c = cross_correlation(&s);
    let c_printed = cross_correlation(&printed);

    let mut files = Vec::new();
    let mut t = Table::new(&["omega_ghz", "s11", "s11_plus_s22", "s11_plus_s22_printed"]);
    for i in 0..grid.len() {
        t.push(vec![
            w[i].into(),
            s.s11[i].into(),
            total[i].into(),
            total_printed[i].into(),
        ]);
    }
    let meta = json!({ "derived": derived });
    files.push(write_csv(
        cfg,
        "reproduce-figures",
        "fig3.csv",
        &t,
        meta.clone(),
    )?);

    let mut t = Table::new(&["omega_ghz", "c_plus_minus", "c_plus_minus_printed"]);
    for i in 0..grid.len() {
        t.push(vec![w[i].into(), c[i].into(), c_printed[i].into()]);
    }
    files.push(write_csv(cfg, "reproduce-figures", "fig5.csv", &t, meta)?);

    if cfg.svg {
        let svg = svg_plot(
            "Full spectral power",
            "Omega (GHz)",
            "spectral density",
            &[
                Series {
                    label: "(dS1^2)",
                    x: w,
                    y: &s.s11,
                },
                Series {
                    label: "(dS1^2)+(dS2^2)",
                    x: w,
                    y: &total,
                },
                Series {
                    label: "(dS1^2)+(dS2^2) printed",
                    x: w,
                    y: &total_printed,
                },
            ],
            true,
        );
        files.push(write_svg(cfg, "fig3.svg", &svg)?);
        let cc: Vec<f64> = c.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        let cp: Vec<f64> = c_printed.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        let svg = svg_plot(
            "Cross-correlation of circular components",
            "Omega (GHz)",
            "C+-",
            &[
                Series {
                    label: "C+-",
                    x: w,
                    y: &cc,
                },
                Series {
                    label: "C+- printed",
                    x: w,
                    y: &cp,
                },
            ],
            false,
        );
        files.push(write_svg(cfg, "fig5.svg", &svg)?);
    }
    say!("wrote fig3/fig5 tables on {} frequencies", grid.len());
    Ok(files)
}
