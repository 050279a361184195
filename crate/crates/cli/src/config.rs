use std::path::Path;

use serde::Deserialize;

use salprop::crf::BcfwConfig;
use salprop::features::FeatureConfig;
use salprop::pipeline::PipelineConfig;
use salprop::proposals::WindowConfig;

use crate::error::CliError;

/// Every tunable, as loaded from `--config` and overridden by flags.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub alpha: f64,
    pub nms_theta: f64,
    pub max_n: usize,
    pub ltp_threshold: f64,
    pub beta: f64,
    pub texture_scale: f64,
    pub min_len: usize,
    pub min_mag: f64,
    pub link_radius: f64,
    pub seed: u64,
    pub c: f64,
    pub max_passes: usize,
    pub decoder: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 0.65,
            nms_theta: 0.75,
            max_n: 1000,
            ltp_threshold: 5.0,
            beta: 0.8,
            texture_scale: 0.5,
            min_len: 15,
            min_mag: 40.0,
            link_radius: 15.0,
            seed: 42,
            c: 1.0,
            max_passes: 200,
            decoder: "bp".into(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(CliError::Usage(format!("{what} out of range")))
            }
        };
        check(self.alpha > 0.0 && self.alpha < 1.0, "alpha (0 < alpha < 1)")?;
        check(self.nms_theta > 0.0 && self.nms_theta < 1.0, "nms_theta (0 < theta < 1)")?;
        check(self.max_n >= 1, "max_n (>= 1)")?;
        check(self.ltp_threshold >= 0.0 && self.ltp_threshold.is_finite(), "ltp_threshold (>= 0)")?;
        check(self.beta > 0.0 && self.beta <= 1.0, "beta (0 < beta <= 1)")?;
        check(self.texture_scale > 0.0 && self.texture_scale.is_finite(), "texture_scale (> 0)")?;
        check(self.min_mag >= 0.0 && self.min_mag <= 255.0, "min_mag (0..=255)")?;
        check(self.link_radius > 0.0 && self.link_radius.is_finite(), "link_radius (> 0)")?;
        check(self.c >= 0.0 && self.c.is_finite(), "c (>= 0)")?;
        check(self.max_passes >= 1, "max_passes (>= 1)")?;
        check(salprop::registry::decoder_names().contains(&self.decoder.as_str()), "decoder")?;
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            features: FeatureConfig {
                ltp_threshold: self.ltp_threshold,
                texture_scale: self.texture_scale,
                seed: self.seed,
                ..FeatureConfig::default()
            },
            beta: self.beta,
            min_len: self.min_len,
            min_mag: self.min_mag,
            link_radius: self.link_radius,
            windows: WindowConfig {
                alpha: self.alpha,
                ..WindowConfig::default()
            },
            nms_theta: self.nms_theta,
            max_n: self.max_n,
            ..PipelineConfig::default()
        }
    }

    pub fn bcfw(&self) -> BcfwConfig {
        BcfwConfig {
            c: self.c,
            max_passes: self.max_passes,
            seed: self.seed,
            ..BcfwConfig::default()
        }
    }

    /// `key=value` pairs for output headers.
    pub fn echo(&self) -> String {
        format!(
            "alpha={} nms_theta={} max_n={} ltp_threshold={} beta={} texture_scale={} min_len={} min_mag={} link_radius={} seed={} c={} max_passes={} decoder={}",
            self.alpha,
            self.nms_theta,
            self.max_n,
            self.ltp_threshold,
            self.beta,
            self.texture_scale,
            self.min_len,
            self.min_mag,
            self.link_radius,
            self.seed,
            self.c,
            self.max_passes,
            self.decoder
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let err = toml::from_str::<RunConfig>("alpha = 0.5\nbogus = 1\n");
        assert!(err.is_err());
        let cfg: RunConfig = toml::from_str("alpha = 0.5\n").unwrap();
        assert_eq!(cfg.alpha, 0.5);
        assert_eq!(cfg.max_n, 1000);
    }

    #[test]
    fn ranges() {
        assert!(RunConfig::default().validate().is_ok());
        let bad = RunConfig {
            alpha: 1.0,
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
