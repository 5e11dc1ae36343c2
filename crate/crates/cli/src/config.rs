//! Flat experiment configuration. Every key has a default, so an empty file
//! is a valid experiment (Neumann heat with n = 200, no perturbation).

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    /// second-order form with Robin coefficients (zero gives Neumann)
    Robin,
    NonlocalRobin,
    ClampedBilaplacian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    None,
    Delta,
    Kernel,
    Fractional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelShape {
    /// exp(-(x-y)^2) - 1/2
    Gaussian,
    /// sin(xy) exp(-(x^2+y^2)), sign-changing
    Sine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,

    pub operator: OperatorKind,
    pub n: usize,
    pub left: f64,
    pub right: f64,
    pub robin_left: f64,
    pub robin_right: f64,
    pub nonlocal_left: f64,
    pub nonlocal_right: f64,
    /// grid for the exponent fits; defaults to `n`
    pub ultra_n: Option<usize>,
    /// grid for the contour and gap stages; defaults to `n`
    pub spectral_n: Option<usize>,

    pub perturbation: PerturbationKind,
    /// multiplies the perturbation direction
    pub perturbation_sign: f64,
    pub delta_point: f64,
    pub kernel: KernelShape,
    pub kernel_scale: f64,
    /// rescale the kernel perturbation to this L² operator norm
    pub kernel_norm: Option<f64>,
    pub fractional_power: f64,
    pub fractional_shift: Option<f64>,

    /// κ for the single-κ stages
    pub kappa: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub kappa_count: usize,

    pub ultra_t_lo: f64,
    pub ultra_t_hi: f64,
    pub ultra_samples: usize,
    pub interpolation_theta: f64,
    pub compat_t_lo: f64,
    pub compat_t_hi: f64,
    pub growth_t_lo: f64,
    pub growth_samples: usize,
    pub admissibility_t0: f64,
    pub admissibility_panels: usize,

    pub dyson_t: f64,
    pub dyson_terms: usize,
    pub dyson_panels: usize,
    pub dyson_max_panels: usize,
    pub dyson_tol: f64,
    pub variation_panels: Vec<usize>,

    /// defaults to the spectral bound of the base generator
    pub contour_center: Option<f64>,
    pub contour_radius: f64,
    pub contour_nodes: usize,
    pub analyticity_rho: f64,
    pub analyticity_samples: usize,
    pub analyticity_terms: usize,

    pub gap_instances: usize,
    pub gap_dim: usize,
    pub gap_sequence: usize,

    pub positivity_t_min: f64,
    /// defaults to 10 / spectral gap
    pub positivity_t_max: Option<f64>,
    pub positivity_geometric: usize,
    pub positivity_uniform: usize,
    pub nonpositivity_probes: Vec<f64>,
    /// the base semigroup is expected to have negative entries at small t
    pub expect_nonpositive: bool,

    pub seed: u64,
    pub out: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            operator: OperatorKind::Robin,
            n: 200,
            left: -PI,
            right: PI,
            robin_left: 0.0,
            robin_right: 0.0,
            nonlocal_left: 1.0,
            nonlocal_right: -1.0,
            ultra_n: None,
            spectral_n: None,
            perturbation: PerturbationKind::None,
            perturbation_sign: 1.0,
            delta_point: 0.0,
            kernel: KernelShape::Gaussian,
            kernel_scale: 1.0,
            kernel_norm: None,
            fractional_power: 0.5,
            fractional_shift: None,
            kappa: 0.25,
            kappa_min: -1.0,
            kappa_max: 1.0,
            kappa_count: 11,
            ultra_t_lo: 1e-3,
            ultra_t_hi: 1e-1,
            ultra_samples: 20,
            interpolation_theta: 0.5,
            compat_t_lo: 1e-3,
            compat_t_hi: 1.0,
            growth_t_lo: 1e-3,
            growth_samples: 20,
            admissibility_t0: 0.5,
            admissibility_panels: 16,
            dyson_t: 0.5,
            dyson_terms: 12,
            dyson_panels: 32,
            dyson_max_panels: 256,
            dyson_tol: 1e-6,
            variation_panels: vec![32, 64, 128, 256],
            contour_center: None,
            contour_radius: 0.1,
            contour_nodes: 32,
            analyticity_rho: 0.05,
            analyticity_samples: 32,
            analyticity_terms: 10,
            gap_instances: 100,
            gap_dim: 40,
            gap_sequence: 10,
            positivity_t_min: 0.05,
            positivity_t_max: None,
            positivity_geometric: 16,
            positivity_uniform: 24,
            nonpositivity_probes: vec![1e-4, 1e-3, 1e-2],
            expect_nonpositive: false,
            seed: 20240601,
            out: "out".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("config fields are all representable")
    }

    /// First 12 hex digits of SHA-256 over the rendering, ignoring `out`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out.clear();
        let digest = Sha256::digest(c.render().as_bytes());
        format!("{digest:x}")[..12].to_string()
    }

    pub fn kappa_grid(&self) -> Vec<f64> {
        match self.kappa_count {
            0 => Vec::new(),
            1 => vec![self.kappa_min],
            c => {
                let step = (self.kappa_max - self.kappa_min) / (c - 1) as f64;
                (0..c)
                    .map(|i| {
                        let k = self.kappa_min + step * i as f64;
                        // snap to 12 decimals so a symmetric grid is exactly symmetric
                        let k = (k * 1e12).round() / 1e12;
                        if k == 0.0 { 0.0 } else { k }
                    })
                    .collect()
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError(m));
        if self.n < 8 {
            return bad(format!("n = {} is too small (need at least 8)", self.n));
        }
        if !(self.left < self.right) {
            return bad(format!("empty interval [{}, {}]", self.left, self.right));
        }
        if !(0.0 < self.ultra_t_lo && self.ultra_t_lo < self.ultra_t_hi) {
            return bad("ultra window must satisfy 0 < ultra_t_lo < ultra_t_hi".into());
        }
        if !(0.0 < self.compat_t_lo && self.compat_t_lo < self.compat_t_hi) {
            return bad("compat window must satisfy 0 < compat_t_lo < compat_t_hi".into());
        }
        if !(0.0..=1.0).contains(&self.interpolation_theta) {
            return bad("interpolation_theta must lie in [0, 1]".into());
        }
        if !(self.dyson_t > 0.0 && self.dyson_t <= 1.0) {
            return bad("dyson_t must lie in (0, 1]".into());
        }
        if self.kappa_min > self.kappa_max {
            return bad("kappa_min exceeds kappa_max".into());
        }
        if self.contour_radius <= 0.0 {
            return bad("contour_radius must be positive".into());
        }
        if self.perturbation_sign != 1.0 && self.perturbation_sign != -1.0 {
            return bad("perturbation_sign must be 1 or -1".into());
        }
        if !(self.fractional_power > 0.0 && self.fractional_power <= 1.0) {
            return bad("fractional_power must lie in (0, 1]".into());
        }
        if self.positivity_t_min <= 0.0 {
            return bad("positivity_t_min must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn round_trip() {
        let c = ExperimentConfig {
            kernel_norm: Some(0.05),
            operator: OperatorKind::NonlocalRobin,
            ..Default::default()
        };
        assert_eq!(ExperimentConfig::parse(&c.render()).unwrap(), c);
    }

    #[test]
    fn hash_ignores_out() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.out = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn errors_carry_line() {
        let e = ExperimentConfig::parse("n = 10\nbogus = 3\n").unwrap_err();
        assert!(e.0.contains("line 2"), "{}", e.0);
    }

    #[test]
    fn symmetric_grid_hits_zero() {
        let c = ExperimentConfig::default();
        let g = c.kappa_grid();
        assert_eq!(g.len(), 11);
        assert_eq!(g[5], 0.0);
        for i in 0..5 {
            assert_eq!(g[i], -g[10 - i]);
        }
    }
}
