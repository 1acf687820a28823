//! Run configuration, read from JSON.

use crate::density::DensityOptions;
use crate::error::{Error, Result};
use crate::parabolic::InitialProfile;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Source of the initial datum `v0` on `[0, R]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialSource {
    /// CSV file with columns `s,v0`.
    Csv { path: PathBuf },
    /// Slope `slope` on `[rise_end, fall_start]`, zero near both ends,
    /// with quintic smoothstep ramps in between.
    Plateau {
        slope: f64,
        rise_start: f64,
        rise_end: f64,
        fall_start: f64,
        fall_end: f64,
    },
    /// `amplitude cos(modes pi s / R)`.
    Cosine { amplitude: f64, modes: u32 },
}

impl Default for InitialSource {
    fn default() -> Self {
        InitialSource::Plateau {
            slope: 2.0,
            rise_start: 0.15,
            rise_end: 0.3,
            fall_start: 0.7,
            fall_end: 0.85,
        }
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
}

const PROFILE_SAMPLES: usize = 4000;

impl InitialSource {
    pub fn load(&self, radius: f64, base: &Path) -> Result<InitialProfile> {
        match self {
            InitialSource::Csv { path } => {
                let p = if path.is_absolute() { path.clone() } else { base.join(path) };
                InitialProfile::from_csv(&p)
            }
            InitialSource::Plateau {
                slope,
                rise_start,
                rise_end,
                fall_start,
                fall_end,
            } => {
                let knots = [*rise_start, *rise_end, *fall_start, *fall_end];
                if knots.windows(2).any(|w| w[1] < w[0]) || knots[0] <= 0.0 || knots[3] >= 1.0 {
                    return Err(Error::Config(format!(
                        "plateau knots {knots:?} must increase inside (0, 1)"
                    )));
                }
                let rate = |s: f64| {
                    let x = s / radius;
                    slope
                        * smoothstep((x - rise_start) / (rise_end - rise_start))
                        * smoothstep((fall_end - x) / (fall_end - fall_start))
                };
                let n = PROFILE_SAMPLES;
                let h = radius / n as f64;
                let mut values = Vec::with_capacity(n + 1);
                let mut acc = 0.0;
                values.push(0.0);
                for k in 0..n {
                    let a = k as f64 * h;
                    acc += h / 6.0 * (rate(a) + 4.0 * rate(a + 0.5 * h) + rate(a + h));
                    values.push(acc);
                }
                let s: Vec<f64> = (0..=n).map(|k| radius * k as f64 / n as f64).collect();
                InitialProfile::from_samples(s, values)
            }
            InitialSource::Cosine { amplitude, modes } => {
                let k = *modes as f64 * std::f64::consts::PI / radius;
                InitialProfile::from_fn(|s| amplitude * (k * s).cos(), radius, PROFILE_SAMPLES + 1)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Space dimension.
    pub n: u32,
    pub radius: f64,
    pub horizon: f64,
    pub ns: usize,
    pub nt: usize,
    pub flux: String,
    pub initial: InitialSource,
    /// Sets `lambda = M + epsilon` and the first defect level.
    pub epsilon: f64,
    /// First displacement budget; later steps halve it.
    pub eta0: f64,
    pub iterations: usize,
    /// Strip width cap as a fraction of `R`.
    pub strip_cap: f64,
    pub square_coverage: f64,
    pub diamond_coverage: f64,
    pub block_fraction: f64,
    pub floor_levels: u32,
    pub samples: usize,
    pub selection_samples: usize,
    pub row_samples: usize,
    pub band: f64,
    /// Points for the gradient bound and strip checks.
    pub diagnostic_samples: usize,
    pub seed: u64,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let d = DensityOptions::default();
        RunConfig {
            n: 2,
            radius: 1.0,
            horizon: 0.5,
            ns: 200,
            nt: 200,
            flux: "pm_gaussian".into(),
            initial: InitialSource::default(),
            epsilon: 0.2,
            eta0: 0.05,
            iterations: 2,
            strip_cap: 0.2,
            square_coverage: d.square_coverage,
            diamond_coverage: d.diamond_coverage,
            block_fraction: d.block_fraction,
            floor_levels: d.floor_levels,
            samples: d.samples,
            selection_samples: d.selection_samples,
            row_samples: d.row_samples,
            band: d.band,
            diagnostic_samples: 20_000,
            seed: 0,
            output: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        RunConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n < 1 {
            return bad(format!("n={} must be at least 1", self.n));
        }
        if !(self.radius > 0.0 && self.horizon > 0.0) {
            return bad(format!("need R>0 and T>0 (R={}, T={})", self.radius, self.horizon));
        }
        if !(self.epsilon > 0.0 && self.eta0 > 0.0) {
            return bad(format!("need epsilon>0 and eta0>0 (epsilon={}, eta0={})", self.epsilon, self.eta0));
        }
        if self.ns < 4 || self.nt < 1 {
            return bad(format!("grid {}x{} too small", self.ns, self.nt));
        }
        for (name, x) in [("square_coverage", self.square_coverage), ("diamond_coverage", self.diamond_coverage)] {
            if !(x > 0.0 && x < 1.0) {
                return bad(format!("{name}={x} must lie in (0,1)"));
            }
        }
        if !(self.block_fraction > 0.0 && self.block_fraction <= 1.0) {
            return bad(format!("block_fraction={} must lie in (0,1]", self.block_fraction));
        }
        if self.samples < 2 || self.selection_samples < 2 {
            return bad("sample counts must be at least 2".into());
        }
        Ok(())
    }

    /// Displacement budget of step `k`.
    pub fn eta(&self, k: usize) -> f64 {
        self.eta0 / 2f64.powi(k as i32)
    }

    /// Defect level of step `k`.
    pub fn epsilon_at(&self, k: usize) -> f64 {
        self.epsilon / 2f64.powi(k as i32)
    }

    pub fn density_options(&self) -> DensityOptions {
        DensityOptions {
            samples: self.samples,
            selection_samples: self.selection_samples,
            row_samples: self.row_samples,
            square_coverage: self.square_coverage,
            diamond_coverage: self.diamond_coverage,
            block_fraction: self.block_fraction,
            floor_levels: self.floor_levels,
            generation_cap: self.iterations.max(1) + 8,
            band: self.band,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back.initial, cfg.initial);
        assert_eq!(back.ns, cfg.ns);
    }

    #[test]
    fn partial_config_uses_defaults() {
        let cfg = RunConfig::from_json(r#"{"n": 1, "initial": {"kind": "cosine", "amplitude": 0.1, "modes": 1}}"#).unwrap();
        assert_eq!(cfg.n, 1);
        assert_eq!(cfg.horizon, 0.5);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_json(r#"{"n": 0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"epsilon": 0.0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"unknown": 1}"#).is_err());
    }

    #[test]
    fn plateau_slope() {
        let p = InitialSource::default().load(1.0, Path::new(".")).unwrap();
        assert!((p.max_slope() - 2.0).abs() < 1e-3);
        assert!(p.derivative(0.05).abs() < 1e-9 && p.derivative(0.95).abs() < 1e-9);
    }
}
