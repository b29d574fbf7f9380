//! Shared discretization: periodic lattice, retained photon modes, and
//! polarization geometry. Both solvers consume the same [`ModelGrid`], so the
//! comparison between them never mixes discretizations.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::fourier::LatticeFft;
use crate::vec3;

/// Input for [`build_grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationConfig {
    /// Spatial dimension, 1 or 3. The 1-d variant is a scalarized toy with a
    /// single polarization slot; the 3-d path carries the full transverse
    /// geometry.
    pub dim: usize,
    pub sites_per_dim: usize,
    pub box_length: f64,
    /// Photon modes are every dual-lattice `k` with `0 < |k| <= k_max`.
    pub k_max: f64,
}

/// One retained photon mode: wavevector, polarization label and vector, and
/// the dual-cell volume that converts mode sums into integral approximations.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSlot {
    /// Integer coordinates of `k` on the dual lattice.
    pub m: [i64; 3],
    pub k: [f64; 3],
    pub k_abs: f64,
    /// Polarization index, 1-based: {1, 2} for dim 3, {1} for dim 1.
    pub lambda: u8,
    pub epsilon: [f64; 3],
    /// Dual-cell volume `(2π/L)^d`.
    pub weight: f64,
}

/// Periodic lattice plus retained photon-mode set.
#[derive(Debug, Clone)]
pub struct ModelGrid {
    pub dim: usize,
    pub sites_per_dim: usize,
    pub box_length: f64,
    pub spacing: f64,
    /// Lattice quadrature weight `h^d`.
    pub cell_volume: f64,
    pub dual_lattice_spacing: f64,
    pub site_positions: Vec<[f64; 3]>,
    pub retained_modes: Vec<ModeSlot>,
    /// Index of the mode `(-k, λ)` for each mode `(k, λ)`.
    neg_partner: Vec<usize>,
    fft: LatticeFft,
}

impl ModelGrid {
    pub fn n_sites(&self) -> usize {
        self.site_positions.len()
    }

    pub fn n_modes(&self) -> usize {
        self.retained_modes.len()
    }

    pub fn fft(&self) -> &LatticeFft {
        &self.fft
    }

    /// Index of the negation partner `(-k, λ)` of mode `idx`.
    pub fn neg_partner(&self, idx: usize) -> usize {
        self.neg_partner[idx]
    }

    /// Sign relating the polarization vectors of a mode and its partner,
    /// `ε_λ(k) · ε_λ(-k)`; always ±1 in this basis.
    pub fn mode_parity(&self, idx: usize) -> f64 {
        let a = &self.retained_modes[idx];
        let b = &self.retained_modes[self.neg_partner[idx]];
        let p = vec3::dot(a.epsilon, b.epsilon);
        if p >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Weighted mode-space norm `( Σ weight (1+|k|²)^m |α|² )^{1/2}`.
    pub fn weighted_alpha_norm(&self, alpha: &[crate::C64], m: f64) -> f64 {
        assert_eq!(alpha.len(), self.n_modes());
        self.retained_modes
            .iter()
            .zip(alpha.iter())
            .map(|(mode, a)| {
                mode.weight * (1.0 + mode.k_abs * mode.k_abs).powf(m) * a.norm_sqr()
            })
            .sum::<f64>()
            .sqrt()
    }

    fn validate(&self) -> Result<(), CoreError> {
        for (i, mode) in self.retained_modes.iter().enumerate() {
            if mode.k_abs == 0.0 {
                return Err(CoreError::InvalidConfig("retained mode with k = 0".into()));
            }
            if self.dim == 3 {
                let t = vec3::dot(mode.k, mode.epsilon).abs();
                if t > 1e-14 * mode.k_abs {
                    return Err(CoreError::InvalidConfig(format!(
                        "mode {i} violates transversality: |k·ε| = {t:.3e}"
                    )));
                }
            }
            if (vec3::norm(mode.epsilon) - 1.0).abs() > 1e-14 {
                return Err(CoreError::InvalidConfig(format!(
                    "mode {i} polarization not unit length"
                )));
            }
            let partner = &self.retained_modes[self.neg_partner[i]];
            if partner.lambda != mode.lambda
                || partner.m[0] != -mode.m[0]
                || partner.m[1] != -mode.m[1]
                || partner.m[2] != -mode.m[2]
            {
                return Err(CoreError::InvalidConfig(format!(
                    "mode set not closed under k -> -k at mode {i}"
                )));
            }
        }
        Ok(())
    }
}

/// Deterministic transverse pair for `k` in dimension 3.
///
/// If `k` is not parallel to `ẑ`, `ε₁ = (k × ẑ)/|k × ẑ|` and `ε₂ = k̂ × ε₁`;
/// for `k ∥ ẑ` the degenerate direction is fixed to `(x̂, ŷ)`.
pub fn polarization_basis(k: [f64; 3]) -> Result<([f64; 3], [f64; 3]), CoreError> {
    let k_abs = vec3::norm(k);
    if k_abs == 0.0 {
        return Err(CoreError::ZeroWavevector);
    }
    let z = [0.0, 0.0, 1.0];
    let cz = vec3::cross(k, z);
    let cz_norm = vec3::norm(cz);
    if cz_norm <= 1e-14 * k_abs {
        return Ok(([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]));
    }
    let eps1 = vec3::scale(cz, 1.0 / cz_norm);
    let khat = vec3::scale(k, 1.0 / k_abs);
    let eps2 = vec3::cross(khat, eps1);
    Ok((eps1, eps2))
}

/// Build the shared grid: uniform periodic lattice and every dual-lattice
/// mode with `0 < |k| <= k_max`, ordered lexicographically in `(m, λ)`.
pub fn build_grid(config: &DiscretizationConfig) -> Result<ModelGrid, CoreError> {
    if config.dim != 1 && config.dim != 3 {
        return Err(CoreError::InvalidConfig(format!(
            "dim must be 1 or 3, got {}",
            config.dim
        )));
    }
    if config.sites_per_dim < 2 {
        return Err(CoreError::InvalidConfig(format!(
            "sites_per_dim must be >= 2, got {}",
            config.sites_per_dim
        )));
    }
    if !(config.box_length > 0.0) || !config.box_length.is_finite() {
        return Err(CoreError::InvalidConfig("box_length must be positive".into()));
    }
    if !config.k_max.is_finite() {
        return Err(CoreError::InvalidConfig("k_max must be finite".into()));
    }
    let dim = config.dim;
    let n = config.sites_per_dim;
    let dual = 2.0 * std::f64::consts::PI / config.box_length;
    if config.k_max < dual * (1.0 - 1e-12) {
        return Err(CoreError::EmptyModeSet {
            k_max: config.k_max,
            smallest: dual,
        });
    }

    let spacing = config.box_length / n as f64;
    let n_sites = n.pow(dim as u32);
    let mut site_positions = Vec::with_capacity(n_sites);
    for idx in 0..n_sites {
        let mut pos = [0.0; 3];
        let mut rest = idx;
        for axis in (0..dim).rev() {
            pos[axis] = (rest % n) as f64 * spacing;
            rest /= n;
        }
        site_positions.push(pos);
    }

    let m_ceil = (config.k_max / dual * (1.0 + 1e-12)).floor() as i64;
    let weight = dual.powi(dim as i32);
    let mut modes = Vec::new();
    let range = -m_ceil..=m_ceil;
    let mut push_mode = |m: [i64; 3]| -> Result<(), CoreError> {
        if m == [0, 0, 0] {
            return Ok(());
        }
        let k = [dual * m[0] as f64, dual * m[1] as f64, dual * m[2] as f64];
        let k_abs = vec3::norm(k);
        if k_abs > config.k_max * (1.0 + 1e-12) {
            return Ok(());
        }
        if dim == 3 {
            let (e1, e2) = polarization_basis(k)?;
            modes.push(ModeSlot { m, k, k_abs, lambda: 1, epsilon: e1, weight });
            modes.push(ModeSlot { m, k, k_abs, lambda: 2, epsilon: e2, weight });
        } else {
            modes.push(ModeSlot { m, k, k_abs, lambda: 1, epsilon: [1.0, 0.0, 0.0], weight });
        }
        Ok(())
    };
    if dim == 1 {
        for m0 in range {
            push_mode([m0, 0, 0])?;
        }
    } else {
        for m0 in range.clone() {
            for m1 in range.clone() {
                for m2 in range.clone() {
                    push_mode([m0, m1, m2])?;
                }
            }
        }
    }
    if modes.is_empty() {
        return Err(CoreError::EmptyModeSet {
            k_max: config.k_max,
            smallest: dual,
        });
    }
    modes.sort_by(|a, b| (a.m, a.lambda).cmp(&(b.m, b.lambda)));

    let mut neg_partner = vec![usize::MAX; modes.len()];
    for (i, mode) in modes.iter().enumerate() {
        let target = ([-mode.m[0], -mode.m[1], -mode.m[2]], mode.lambda);
        let j = modes
            .iter()
            .position(|other| (other.m, other.lambda) == target)
            .ok_or_else(|| {
                CoreError::InvalidConfig(format!("missing negation partner for mode {i}"))
            })?;
        neg_partner[i] = j;
    }

    let grid = ModelGrid {
        dim,
        sites_per_dim: n,
        box_length: config.box_length,
        spacing,
        cell_volume: spacing.powi(dim as i32),
        dual_lattice_spacing: dual,
        site_positions,
        retained_modes: modes,
        neg_partner,
        fft: LatticeFft::new(dim, n, config.box_length),
    };
    grid.validate()?;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_mode_count() {
        let grid = build_grid(&DiscretizationConfig {
            dim: 1,
            sites_per_dim: 4,
            box_length: 2.0 * std::f64::consts::PI,
            k_max: 2.0,
        })
        .unwrap();
        let ms: Vec<i64> = grid.retained_modes.iter().map(|m| m.m[0]).collect();
        assert_eq!(ms, vec![-2, -1, 1, 2]);
        assert_eq!(grid.n_modes(), 4);
        assert!((grid.dual_lattice_spacing - 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_dimensional_mode_count() {
        let grid = build_grid(&DiscretizationConfig {
            dim: 3,
            sites_per_dim: 2,
            box_length: 2.0 * std::f64::consts::PI,
            k_max: 1.0,
        })
        .unwrap();
        // six unit wavevectors, two polarizations each
        assert_eq!(grid.n_modes(), 12);
        for mode in &grid.retained_modes {
            assert!((mode.k_abs - 1.0).abs() < 1e-14);
            assert!((mode.weight - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_polarization_rule() {
        let (e1, e2) = polarization_basis([0.0, 0.0, 3.0]).unwrap();
        assert_eq!(e1, [1.0, 0.0, 0.0]);
        assert_eq!(e2, [0.0, 1.0, 0.0]);
    }

    #[test]
    fn polarization_for_x_axis() {
        // cross-product evaluation: k = x̂ gives ε₁ = (0,-1,0), ε₂ = k̂ × ε₁
        let (e1, e2) = polarization_basis([1.0, 0.0, 0.0]).unwrap();
        assert!((e1[0]).abs() < 1e-15 && (e1[1] + 1.0).abs() < 1e-15 && e1[2].abs() < 1e-15);
        let expect2 = vec3::cross([1.0, 0.0, 0.0], e1);
        for a in 0..3 {
            assert!((e2[a] - expect2[a]).abs() < 1e-15);
        }
        assert!(vec3::dot(e1, [1.0, 0.0, 0.0]).abs() < 1e-15);
        assert!(vec3::dot(e2, [1.0, 0.0, 0.0]).abs() < 1e-15);
    }

    #[test]
    fn rejects_empty_mode_set() {
        let err = build_grid(&DiscretizationConfig {
            dim: 1,
            sites_per_dim: 4,
            box_length: 2.0 * std::f64::consts::PI,
            k_max: 0.5,
        })
        .unwrap_err();
        assert!(matches!(err, CoreError::EmptyModeSet { .. }));
    }

    #[test]
    fn zero_wavevector_rejected() {
        assert!(matches!(
            polarization_basis([0.0, 0.0, 0.0]),
            Err(CoreError::ZeroWavevector)
        ));
    }

    #[test]
    fn deterministic_rebuild() {
        let cfg = DiscretizationConfig {
            dim: 3,
            sites_per_dim: 4,
            box_length: 2.0 * std::f64::consts::PI,
            k_max: 1.5,
        };
        let a = build_grid(&cfg).unwrap();
        let b = build_grid(&cfg).unwrap();
        assert_eq!(a.retained_modes, b.retained_modes);
        assert_eq!(a.site_positions, b.site_positions);
    }

    #[test]
    fn weighted_alpha_norm_single_mode() {
        let grid = build_grid(&DiscretizationConfig {
            dim: 1,
            sites_per_dim: 4,
            box_length: 2.0 * std::f64::consts::PI,
            k_max: 1.0,
        })
        .unwrap();
        // modes are k = -1, +1 with weight 1
        let alpha = vec![crate::C64::new(0.0, 0.0), crate::C64::new(1.0, 0.0)];
        for m in [-0.5, 0.0, 1.5] {
            let expect = 2f64.powf(m / 2.0);
            assert!((grid.weighted_alpha_norm(&alpha, m) - expect).abs() < 1e-14);
        }
        let zero = vec![crate::C64::new(0.0, 0.0); 2];
        assert_eq!(grid.weighted_alpha_norm(&zero, 1.5), 0.0);
    }
}
