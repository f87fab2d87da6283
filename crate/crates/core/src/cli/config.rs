//! JSON run configuration with flat keys.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analytic::{ClosedFormVariant, FrequencyGrid};
use crate::detection::DetectionGeometry;
use crate::model::LaserParams;
use crate::noise_sim::{Scheme, SimConfig};
use crate::spectra_est::Window;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimModel {
    #[default]
    Linear,
    Nonlinear,
}

/// Everything a command needs. Missing keys take the defaults below, which
/// describe the reference operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub kappa: f64,
    pub kappa_a: f64,
    pub omega_p: f64,
    pub gamma: f64,
    pub gamma_s: f64,
    pub alpha: f64,
    pub pump_r: f64,
    pub pump_p: f64,
    /// Defaults to `gamma / 2`.
    pub c_sat: Option<f64>,

    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_count: usize,
    pub grid_scale: GridScale,
    pub variant: ClosedFormVariant,

    pub model: SimModel,
    pub dt: f64,
    pub t_total: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub burn_in: Option<f64>,
    pub scheme: Scheme,
    pub window: Window,
    pub segment_len: f64,
    pub band_min: f64,
    pub band_max: f64,
    pub variance_check: bool,
    pub dump_trajectories: usize,

    pub geometries: Vec<String>,
    pub squeeze_r_min: f64,
    pub squeeze_r_max: f64,
    pub squeeze_r_step: f64,

    pub sweep_param: String,
    pub sweep_values: Vec<f64>,

    pub out_dir: PathBuf,
    pub svg: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = LaserParams::reference();
        RunConfig {
            kappa: p.kappa,
            kappa_a: p.kappa_a,
            omega_p: p.omega_p,
            gamma: p.gamma,
            gamma_s: p.gamma_s,
            alpha: p.alpha,
            pump_r: p.pump_r,
            pump_p: p.pump_p,
            c_sat: None,
            grid_min: 0.05,
            grid_max: 50.0,
            grid_count: 2048,
            grid_scale: GridScale::Linear,
            variant: ClosedFormVariant::Corrected,
            model: SimModel::Linear,
            dt: 0.002,
            t_total: 400.0,
            n_traj: 200,
            seed: 1,
            burn_in: Some(40.0),
            scheme: Scheme::ExactGaussian,
            window: Window::Hann,
            segment_len: 400.0,
            band_min: 0.5,
            band_max: 20.0,
            variance_check: true,
            dump_trajectories: 0,
            geometries: DetectionGeometry::ALL
                .iter()
                .map(|g| g.name().to_string())
                .collect(),
            squeeze_r_min: 1.5,
            squeeze_r_max: 20.0,
            squeeze_r_step: 0.05,
            sweep_param: "pump_r".into(),
            sweep_values: vec![1.04, 1.1, 1.5, 2.0, 4.0, 6.0, 10.0],
            out_dir: PathBuf::from("out"),
            svg: true,
        }
    }
}

/// Keys of [`RunConfig`] that name laser parameters, usable as sweep axes.
pub const LASER_KEYS: [&str; 9] = [
    "kappa", "kappa_a", "omega_p", "gamma", "gamma_s", "alpha", "pump_r", "pump_p", "c_sat",
];

/// A configuration problem, located in the source text where possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub message: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        ConfigError {
            message: message.into(),
            line: None,
            column: None,
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "config line {l}, column {c}: {}", self.message),
            (Some(l), None) => write!(f, "config line {l}: {}", self.message),
            _ => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn locate_key(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines()
        .position(|l| l.contains(&needle))
        .map(|i| i + 1)
}

impl RunConfig {
    /// Parses a JSON document; syntax and type errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError {
            message: e
                .to_string()
                .split(" at line ")
                .next()
                .unwrap_or_default()
                .to_string(),
            line: Some(e.line()),
            column: Some(e.column()),
        })?;
        cfg.validate().map_err(|(key, message)| ConfigError {
            message,
            line: locate_key(text, key),
            column: None,
        })?;
        Ok(cfg)
    }

    /// Applies `key=value` overrides. Values are parsed as JSON, falling back
    /// to a plain string.
    pub fn with_overrides(self, sets: &[String]) -> Result<Self, ConfigError> {
        if sets.is_empty() {
            return Ok(self);
        }
        let mut value = serde_json::to_value(&self).expect("config serializes");
        let map = value.as_object_mut().expect("config is an object");
        for item in sets {
            let (key, raw) = item.split_once('=').ok_or_else(|| {
                ConfigError::new(format!("override `{item}` is not of the form key=value"))
            })?;
            let key = key.trim();
            if !map.contains_key(key) {
                return Err(ConfigError::new(format!("unknown override key `{key}`")));
            }
            let parsed = serde_json::from_str(raw.trim())
                .unwrap_or_else(|_| Value::String(raw.trim().to_string()));
            map.insert(key.to_string(), parsed);
        }
        let cfg: RunConfig = serde_json::from_value(value)
            .map_err(|e| ConfigError::new(format!("invalid override: {e}")))?;
        cfg.validate().map_err(|(_, m)| ConfigError::new(m))?;
        Ok(cfg)
    }

    /// Checks what serde cannot; returns the offending key.
    fn validate(&self) -> Result<(), (&'static str, String)> {
        self.laser_params().validate().map_err(|e| match e {
            crate::Error::InvalidParameter { name, reason } => {
                (name, format!("invalid `{name}`: {reason}"))
            }
            other => ("pump_r", other.to_string()),
        })?;
        if self.grid_count == 0 {
            return Err((
                "grid_count",
                "frequency grid is empty (grid_count = 0)".into(),
            ));
        }
        self.grid().map_err(|e| ("grid_min", e.to_string()))?;
        for g in &self.geometries {
            g.parse::<DetectionGeometry>()
                .map_err(|e| ("geometries", e.to_string()))?;
        }
        if !LASER_KEYS.contains(&self.sweep_param.as_str()) {
            return Err((
                "sweep_param",
                format!(
                    "sweep_param `{}` is not one of {}",
                    self.sweep_param,
                    LASER_KEYS.join(", ")
                ),
            ));
        }
        if !(self.squeeze_r_step > 0.0 && self.squeeze_r_step.is_finite())
            || self.squeeze_r_max < self.squeeze_r_min
        {
            return Err((
                "squeeze_r_step",
                "squeeze range needs step > 0 and max ≥ min".into(),
            ));
        }
        if self.band_max < self.band_min {
            return Err(("band_max", "band_max is below band_min".into()));
        }
        Ok(())
    }

    pub fn laser_params(&self) -> LaserParams {
        LaserParams {
            kappa: self.kappa,
            kappa_a: self.kappa_a,
            omega_p: self.omega_p,
            gamma: self.gamma,
            gamma_s: self.gamma_s,
            alpha: self.alpha,
            pump_r: self.pump_r,
            pump_p: self.pump_p,
            c_sat: self.c_sat.unwrap_or(0.5 * self.gamma),
        }
    }

    pub fn grid(&self) -> crate::Result<FrequencyGrid> {
        match self.grid_scale {
            GridScale::Linear => {
                FrequencyGrid::linear(self.grid_min, self.grid_max, self.grid_count)
            }
            GridScale::Log => FrequencyGrid::log(self.grid_min, self.grid_max, self.grid_count),
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            dt: self.dt,
            t_total: self.t_total,
            n_traj: self.n_traj,
            seed: self.seed,
            burn_in: self.burn_in,
            scheme: self.scheme,
        }
    }

    pub fn detection_geometries(&self) -> Vec<DetectionGeometry> {
        self.geometries
            .iter()
            .filter_map(|g| g.parse().ok())
            .collect()
    }

    /// Pump values of the squeezing table, rounded to the step's decimals so
    /// that round values such as 5 and 6 are hit exactly.
    pub fn squeeze_values(&self) -> Vec<f64> {
        let n = ((self.squeeze_r_max - self.squeeze_r_min) / self.squeeze_r_step + 1e-9).floor()
            as usize;
        (0..=n)
            .map(|k| {
                let r = self.squeeze_r_min + k as f64 * self.squeeze_r_step;
                (r * 1e9).round() / 1e9
            })
            .collect()
    }

    /// Copy with one laser parameter replaced.
    pub fn with_laser_value(&self, key: &str, v: f64) -> RunConfig {
        let mut c = self.clone();
        match key {
            "kappa" => c.kappa = v,
            "kappa_a" => c.kappa_a = v,
            "omega_p" => c.omega_p = v,
            "gamma" => c.gamma = v,
            "gamma_s" => c.gamma_s = v,
            "alpha" => c.alpha = v,
            "pump_r" => c.pump_r = v,
            "pump_p" => c.pump_p = v,
            "c_sat" => c.c_sat = Some(v),
            _ => {}
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_reference_point() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.laser_params(), LaserParams::reference());
        assert_eq!(c.grid().unwrap().len(), 2048);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = RunConfig::from_json("{\n  \"kappa\": 300,\n  \"kapa\": 1\n}").unwrap_err();
        assert_eq!(err.line, Some(3));
        assert!(err.message.contains("kapa"), "{}", err.message);
    }

    #[test]
    fn semantic_error_reports_line_of_key() {
        let err = RunConfig::from_json("{\n  \"seed\": 3,\n  \"pump_p\": 1.5\n}").unwrap_err();
        assert_eq!(err.line, Some(3));
        let err = RunConfig::from_json("{\n\"grid_count\": 0\n}").unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.to_string().starts_with("config line 2"));
    }

    #[test]
    fn overrides() {
        let c = RunConfig::default()
            .with_overrides(&[
                "pump_r=2.5".into(),
                "window=rectangular".into(),
                "burn_in=null".into(),
            ])
            .unwrap();
        assert_eq!(c.pump_r, 2.5);
        assert_eq!(c.window, Window::Rectangular);
        assert_eq!(c.burn_in, None);
        assert!(RunConfig::default()
            .with_overrides(&["nope=1".into()])
            .is_err());
        assert!(RunConfig::default()
            .with_overrides(&["pump_r".into()])
            .is_err());
        assert!(RunConfig::default()
            .with_overrides(&["geometries=[\"spiral\"]".into()])
            .is_err());
    }

    #[test]
    fn squeeze_values_hit_integers() {
        let c = RunConfig::default();
        let v = c.squeeze_values();
        assert_eq!(v[0], 1.5);
        assert_eq!(*v.last().unwrap(), 20.0);
        assert!(v.contains(&5.0) && v.contains(&6.0));
    }

    #[test]
    fn round_trip_through_json() {
        let c = RunConfig {
            seed: 99,
            c_sat: Some(0.3),
            ..RunConfig::default()
        };
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
    }
}
