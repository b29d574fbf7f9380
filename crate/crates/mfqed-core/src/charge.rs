//! Charge distributions, represented purely through their Fourier profile
//! `F[κ](k)` sampled on the retained modes. Profiles are real and even; a
//! real, even profile keeps the smeared vector potential real-valued.

use crate::error::CoreError;
use crate::grid::ModelGrid;

#[derive(Debug, Clone, PartialEq)]
pub enum ChargeKind {
    /// Gaussian of width σ and total charge e.
    Gaussian { sigma: f64, e: f64 },
    /// Sharp momentum cutoff at Λ with total charge e.
    SharpCutoff { lambda: f64, e: f64 },
    /// Neutral profile `e σ|k| exp(-σ²|k|²/2)`: zero total charge but a
    /// nontrivial low-k coupling.
    Dipole { sigma: f64, e: f64 },
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChargeDistribution {
    pub kind: ChargeKind,
    /// `F[κ](k)` per retained mode, in the `(2π)^{-d/2}` transform convention.
    pub fourier_values: Vec<f64>,
    pub total_charge: f64,
}

impl ChargeDistribution {
    /// Identically zero coupling (decoupled field).
    pub fn zero(grid: &ModelGrid) -> Self {
        ChargeDistribution {
            kind: ChargeKind::Custom,
            fourier_values: vec![0.0; grid.n_modes()],
            total_charge: 0.0,
        }
    }

    pub fn gaussian(grid: &ModelGrid, sigma: f64, e: f64) -> Result<Self, CoreError> {
        if !(sigma > 0.0) {
            return Err(CoreError::InvalidConfig("gaussian charge needs sigma > 0".into()));
        }
        let norm = transform_norm(grid.dim);
        let values = grid
            .retained_modes
            .iter()
            .map(|m| e * norm * (-0.5 * sigma * sigma * m.k_abs * m.k_abs).exp())
            .collect();
        Self::from_values(grid, ChargeKind::Gaussian { sigma, e }, values, e)
    }

    pub fn sharp_cutoff(grid: &ModelGrid, lambda: f64, e: f64) -> Result<Self, CoreError> {
        if !(lambda > 0.0) {
            return Err(CoreError::InvalidConfig("sharp cutoff needs lambda > 0".into()));
        }
        let norm = transform_norm(grid.dim);
        let values = grid
            .retained_modes
            .iter()
            .map(|m| if m.k_abs <= lambda { e * norm } else { 0.0 })
            .collect();
        Self::from_values(grid, ChargeKind::SharpCutoff { lambda, e }, values, e)
    }

    pub fn dipole(grid: &ModelGrid, sigma: f64, e: f64) -> Result<Self, CoreError> {
        if !(sigma > 0.0) {
            return Err(CoreError::InvalidConfig("dipole charge needs sigma > 0".into()));
        }
        let norm = transform_norm(grid.dim);
        let values = grid
            .retained_modes
            .iter()
            .map(|m| {
                e * norm * sigma * m.k_abs * (-0.5 * sigma * sigma * m.k_abs * m.k_abs).exp()
            })
            .collect();
        // F(0) = 0 for this profile: null total charge.
        Self::from_values(grid, ChargeKind::Dipole { sigma, e }, values, 0.0)
    }

    /// Explicit per-mode values; validated for reality/evenness.
    pub fn custom(grid: &ModelGrid, values: Vec<f64>, total_charge: f64) -> Result<Self, CoreError> {
        Self::from_values(grid, ChargeKind::Custom, values, total_charge)
    }

    fn from_values(
        grid: &ModelGrid,
        kind: ChargeKind,
        values: Vec<f64>,
        total_charge: f64,
    ) -> Result<Self, CoreError> {
        if values.len() != grid.n_modes() {
            return Err(CoreError::LengthMismatch {
                got: values.len(),
                expected: grid.n_modes(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFiniteCharge);
        }
        for (i, &v) in values.iter().enumerate() {
            let j = grid.neg_partner(i);
            let diff = (v - values[j]).abs();
            if diff > 1e-12 * (1.0 + v.abs()) {
                return Err(CoreError::OddChargeProfile { mode: i, diff });
            }
        }
        Ok(ChargeDistribution {
            kind,
            fourier_values: values,
            total_charge,
        })
    }

    /// Discrete admissibility sum `Σ weight (|k|^{-2} + |k|) F[κ](k)²`,
    /// the quadrature form of the infrared/ultraviolet integrability
    /// requirement on the profile.
    pub fn admissibility_sum(&self, grid: &ModelGrid) -> f64 {
        grid.retained_modes
            .iter()
            .zip(self.fourier_values.iter())
            .map(|(m, &f)| m.weight * (m.k_abs.powi(-2) + m.k_abs) * f * f)
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.fourier_values.iter().all(|&v| v == 0.0)
    }
}

/// `(2π)^{-d/2}`, the point-charge plateau of the transform convention.
fn transform_norm(dim: usize) -> f64 {
    (2.0 * std::f64::consts::PI).powf(-(dim as f64) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DiscretizationConfig};

    fn grid3() -> ModelGrid {
        build_grid(&DiscretizationConfig {
            dim: 3,
            sites_per_dim: 2,
            box_length: 2.0 * std::f64::consts::PI,
            k_max: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn sharp_cutoff_plateau() {
        let grid = grid3();
        let kappa = ChargeDistribution::sharp_cutoff(&grid, 1.5, 1.0).unwrap();
        let plateau = (2.0 * std::f64::consts::PI).powf(-1.5);
        for &v in &kappa.fourier_values {
            assert!((v - plateau).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_point_charge_limit() {
        let grid = grid3();
        let kappa = ChargeDistribution::gaussian(&grid, 1e-9, 2.5).unwrap();
        let plateau = 2.5 * (2.0 * std::f64::consts::PI).powf(-1.5);
        for &v in &kappa.fourier_values {
            assert!((v - plateau).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_unit_width_at_unit_k() {
        let grid = grid3();
        let kappa = ChargeDistribution::gaussian(&grid, 1.0, 1.0).unwrap();
        // closed form (2π)^{-3/2} e^{-1/2}, cross-checked against radial
        // quadrature of the position-space profile in tests/charge_oracle.rs
        let expect = (2.0 * std::f64::consts::PI).powf(-1.5) * (-0.5f64).exp();
        for &v in &kappa.fourier_values {
            assert!((v - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn dipole_is_neutral_and_even() {
        let grid = grid3();
        let kappa = ChargeDistribution::dipole(&grid, 0.7, 1.0).unwrap();
        assert_eq!(kappa.total_charge, 0.0);
        for i in 0..grid.n_modes() {
            let j = grid.neg_partner(i);
            assert!((kappa.fourier_values[i] - kappa.fourier_values[j]).abs() < 1e-15);
        }
        assert!(kappa.fourier_values.iter().any(|&v| v > 0.0));
    }

    #[test]
    fn admissibility_sum_is_finite_and_positive() {
        let grid = grid3();
        let kappa = ChargeDistribution::gaussian(&grid, 1.0, 1.0).unwrap();
        let s = kappa.admissibility_sum(&grid);
        assert!(s.is_finite() && s > 0.0);
    }

    #[test]
    fn custom_odd_profile_rejected() {
        let grid = build_grid(&DiscretizationConfig {
            dim: 1,
            sites_per_dim: 4,
            box_length: 2.0 * std::f64::consts::PI,
            k_max: 1.0,
        })
        .unwrap();
        // modes k = -1, +1: an odd assignment must be refused
        let err = ChargeDistribution::custom(&grid, vec![-0.3, 0.3], 0.0).unwrap_err();
        assert!(matches!(err, CoreError::OddChargeProfile { .. }));
    }
}
