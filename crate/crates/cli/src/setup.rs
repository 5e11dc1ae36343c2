//! Assemble grids, generators and perturbation families from a config.

use crate::config::{ExperimentConfig, KernelShape, OperatorKind, PerturbationKind};
use ultrapos_core::numkernel::spectral_norm;
use ultrapos_core::operators::{
    build_clamped_bilaplacian, build_delta_perturbation, build_kernel_perturbation, build_nonlocal_robin,
    build_robin_laplacian, build_spectral_power, sample_kernel,
};
use ultrapos_core::{DiscreteOperator, GridSpace, PerturbationFamily, Result};

pub struct Problem {
    /// positive form L
    pub form: DiscreteOperator,
    /// generator A = -L
    pub generator: DiscreteOperator,
    /// direction B, already signed and scaled; None without a perturbation
    pub direction: Option<DiscreteOperator>,
}

impl Problem {
    pub fn space(&self) -> &GridSpace {
        &self.generator.space
    }

    /// A + κB; the zero direction when the config has no perturbation.
    pub fn family(&self) -> Result<PerturbationFamily> {
        let b = match &self.direction {
            Some(b) => b.clone(),
            None => DiscreteOperator::zero(self.space()),
        };
        PerturbationFamily::new(self.generator.clone(), b)
    }
}

fn space_for(cfg: &ExperimentConfig, n: usize) -> Result<GridSpace> {
    match cfg.operator {
        OperatorKind::ClampedBilaplacian => GridSpace::interior(cfg.left, cfg.right, n),
        _ => GridSpace::new(cfg.left, cfg.right, n),
    }
}

pub fn build(cfg: &ExperimentConfig, n: usize) -> Result<Problem> {
    let space = space_for(cfg, n)?;
    let form = match cfg.operator {
        OperatorKind::Robin => build_robin_laplacian(&space, |_| 1.0, cfg.robin_left, cfg.robin_right)?,
        OperatorKind::NonlocalRobin => build_nonlocal_robin(&space, cfg.nonlocal_left, cfg.nonlocal_right)?,
        OperatorKind::ClampedBilaplacian => build_clamped_bilaplacian(&space)?,
    };
    let sign = cfg.perturbation_sign;
    let direction = match cfg.perturbation {
        PerturbationKind::None => None,
        PerturbationKind::Delta => Some(build_delta_perturbation(&space, cfg.delta_point, sign)?),
        PerturbationKind::Kernel => {
            let s = cfg.kernel_scale;
            let k = match cfg.kernel {
                KernelShape::Gaussian => sample_kernel(&space, |x, y| s * ((-(x - y) * (x - y)).exp() - 0.5)),
                KernelShape::Sine => sample_kernel(&space, |x, y| s * (x * y).sin() * (-(x * x + y * y)).exp()),
            };
            let b = build_kernel_perturbation(&space, &k, true)?;
            let b = match cfg.kernel_norm {
                Some(target) => {
                    let current = l2_norm(&b);
                    if current > 0.0 { b.scaled(target / current) } else { b }
                }
                None => b,
            };
            Some(b.scaled(sign))
        }
        PerturbationKind::Fractional => {
            Some(build_spectral_power(&form, cfg.fractional_power, cfg.fractional_shift)?.scaled(sign))
        }
    };
    Ok(Problem { generator: form.negated(), form, direction })
}

/// Operator norm on L² with the grid weights.
pub fn l2_norm(op: &DiscreteOperator) -> f64 {
    let s: Vec<f64> = op.space.weights.iter().map(|w| w.sqrt()).collect();
    let n = op.dim();
    let m = ultrapos_core::RMat::from_fn(n, n, |i, j| op.matrix[(i, j)] * s[i] / s[j]);
    spectral_norm(&m)
}
