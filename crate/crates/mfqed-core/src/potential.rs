//! Pair potentials on relative lattice displacements. Profiles are even,
//! real, and non-negative; the convolution `v ∗ |φ|²` and the two-body sum of
//! the many-body model read from the same table.

use crate::error::CoreError;
use crate::grid::ModelGrid;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    Zero,
    /// `e² / sqrt(r² + soft²)` with `r` the minimal periodic image distance.
    SoftenedCoulomb { e: f64, soft: f64 },
    /// `a · exp(-r²/(2 s²))`.
    GaussianWell { s: f64, a: f64 },
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairPotential {
    pub kind: PotentialKind,
    /// Value per relative displacement, indexed like lattice sites.
    pub values: Vec<f64>,
}

impl PairPotential {
    pub fn zero(grid: &ModelGrid) -> Self {
        PairPotential {
            kind: PotentialKind::Zero,
            values: vec![0.0; grid.n_sites()],
        }
    }

    pub fn softened_coulomb(grid: &ModelGrid, e: f64, soft: f64) -> Result<Self, CoreError> {
        if !(soft > 0.0) {
            return Err(CoreError::BadPotential("softening length must be positive".into()));
        }
        let values = displacement_profile(grid, |r2| e * e / (r2 + soft * soft).sqrt());
        Self::from_values(grid, PotentialKind::SoftenedCoulomb { e, soft }, values)
    }

    pub fn gaussian_well(grid: &ModelGrid, s: f64, a: f64) -> Result<Self, CoreError> {
        if !(s > 0.0) || a < 0.0 {
            return Err(CoreError::BadPotential(
                "gaussian well needs s > 0 and a >= 0".into(),
            ));
        }
        let values = displacement_profile(grid, |r2| a * (-0.5 * r2 / (s * s)).exp());
        Self::from_values(grid, PotentialKind::GaussianWell { s, a }, values)
    }

    pub fn custom(grid: &ModelGrid, values: Vec<f64>) -> Result<Self, CoreError> {
        Self::from_values(grid, PotentialKind::Custom, values)
    }

    fn from_values(
        grid: &ModelGrid,
        kind: PotentialKind,
        values: Vec<f64>,
    ) -> Result<Self, CoreError> {
        if values.len() != grid.n_sites() {
            return Err(CoreError::LengthMismatch {
                got: values.len(),
                expected: grid.n_sites(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CoreError::BadPotential("values must be finite and >= 0".into()));
        }
        let n = grid.sites_per_dim;
        for idx in 0..values.len() {
            // negation of the displacement, component-wise mod n
            let mut rest = idx;
            let mut neg = 0usize;
            let mut coords = [0usize; 3];
            for axis in (0..grid.dim).rev() {
                coords[axis] = rest % n;
                rest /= n;
            }
            for coord in coords.iter().take(grid.dim) {
                neg = neg * n + (n - coord) % n;
            }
            if (values[idx] - values[neg]).abs() > 1e-12 * (1.0 + values[idx].abs()) {
                return Err(CoreError::BadPotential(format!(
                    "not even under x -> -x at displacement {idx}"
                )));
            }
        }
        Ok(PairPotential { kind, values })
    }

    /// Value at the relative displacement of site `x` minus site `y`.
    pub fn at_displacement(&self, grid: &ModelGrid, x: usize, y: usize) -> f64 {
        self.values[relative_index(grid, x, y)]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Flat index of the displacement `(x - y) mod n` per axis.
pub fn relative_index(grid: &ModelGrid, x: usize, y: usize) -> usize {
    let n = grid.sites_per_dim;
    let mut rx = x;
    let mut ry = y;
    let mut cx = [0usize; 3];
    let mut cy = [0usize; 3];
    for axis in (0..grid.dim).rev() {
        cx[axis] = rx % n;
        cy[axis] = ry % n;
        rx /= n;
        ry /= n;
    }
    let mut idx = 0usize;
    for axis in 0..grid.dim {
        idx = idx * n + (cx[axis] + n - cy[axis]) % n;
    }
    idx
}

fn displacement_profile(grid: &ModelGrid, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = grid.sites_per_dim;
    let l = grid.box_length;
    let h = grid.spacing;
    (0..grid.n_sites())
        .map(|idx| {
            let mut rest = idx;
            let mut r2 = 0.0;
            for _ in 0..grid.dim {
                let c = (rest % n) as f64 * h;
                rest /= n;
                // minimal periodic image
                let d = c.min(l - c);
                r2 += d * d;
            }
            f(r2)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DiscretizationConfig};

    fn grid1(n: usize) -> ModelGrid {
        build_grid(&DiscretizationConfig {
            dim: 1,
            sites_per_dim: n,
            box_length: 2.0 * std::f64::consts::PI,
            k_max: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn softened_coulomb_even_and_positive() {
        let grid = grid1(6);
        let v = PairPotential::softened_coulomb(&grid, 1.0, 0.5).unwrap();
        for x in 0..6 {
            for y in 0..6 {
                let a = v.at_displacement(&grid, x, y);
                let b = v.at_displacement(&grid, y, x);
                assert!((a - b).abs() < 1e-15);
                assert!(a > 0.0);
            }
        }
    }

    #[test]
    fn gaussian_well_peak_at_origin() {
        let grid = grid1(4);
        let v = PairPotential::gaussian_well(&grid, 0.8, 2.0).unwrap();
        assert!((v.values[0] - 2.0).abs() < 1e-15);
        assert!(v.values[1] < 2.0);
    }

    #[test]
    fn negative_custom_rejected() {
        let grid = grid1(4);
        let err = PairPotential::custom(&grid, vec![1.0, -0.1, 0.2, -0.1]).unwrap_err();
        assert!(matches!(err, CoreError::BadPotential(_)));
    }

    #[test]
    fn relative_index_wraps() {
        let grid = grid1(4);
        assert_eq!(relative_index(&grid, 1, 3), 2);
        assert_eq!(relative_index(&grid, 3, 1), 2);
        assert_eq!(relative_index(&grid, 0, 0), 0);
    }
}
