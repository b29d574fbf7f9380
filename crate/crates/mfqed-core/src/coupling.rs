//! Site–mode coupling table `G_x(k,λ) = F[κ](k) (2|k|)^{-1/2} ε_λ(k) e^{-ik·x}`,
//! the single place where the charge profile, the mode geometry and the
//! lattice positions combine. Both the field operators of the many-body
//! model and the auxiliary-field identities are assembled from this table.

use crate::charge::ChargeDistribution;
use crate::error::CoreError;
use crate::grid::ModelGrid;
use crate::vec3;
use crate::C64;

#[derive(Debug, Clone)]
pub struct CouplingTable {
    n_sites: usize,
    n_modes: usize,
    /// Row-major `(site, mode)` of complex 3-vectors.
    g: Vec<[C64; 3]>,
}

impl CouplingTable {
    pub fn build(grid: &ModelGrid, kappa: &ChargeDistribution) -> Result<Self, CoreError> {
        if kappa.fourier_values.len() != grid.n_modes() {
            return Err(CoreError::LengthMismatch {
                got: kappa.fourier_values.len(),
                expected: grid.n_modes(),
            });
        }
        let n_sites = grid.n_sites();
        let n_modes = grid.n_modes();
        let mut g = Vec::with_capacity(n_sites * n_modes);
        for x in grid.site_positions.iter() {
            for (mode, &f) in grid.retained_modes.iter().zip(kappa.fourier_values.iter()) {
                let radial = f / (2.0 * mode.k_abs).sqrt();
                let phase = C64::from_polar(1.0, -vec3::dot(mode.k, *x));
                g.push([
                    phase * radial * mode.epsilon[0],
                    phase * radial * mode.epsilon[1],
                    phase * radial * mode.epsilon[2],
                ]);
            }
        }
        Ok(CouplingTable { n_sites, n_modes, g })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn g(&self, site: usize, mode: usize) -> [C64; 3] {
        self.g[site * self.n_modes + mode]
    }

    /// `|G_x(k,λ)|` (independent of the site by construction).
    pub fn magnitude(&self, mode: usize) -> f64 {
        let v = self.g(0, mode);
        (v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DiscretizationConfig};

    #[test]
    fn magnitude_independent_of_site() {
        let grid = build_grid(&DiscretizationConfig {
            dim: 3,
            sites_per_dim: 2,
            box_length: 2.0 * std::f64::consts::PI,
            k_max: 1.0,
        })
        .unwrap();
        let kappa = ChargeDistribution::gaussian(&grid, 0.8, 1.0).unwrap();
        let table = CouplingTable::build(&grid, &kappa).unwrap();
        for m in 0..grid.n_modes() {
            let reference = table.magnitude(m);
            for x in 0..grid.n_sites() {
                let v = table.g(x, m);
                let mag = (v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()).sqrt();
                assert!((mag - reference).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn matches_defining_formula() {
        let grid = build_grid(&DiscretizationConfig {
            dim: 1,
            sites_per_dim: 4,
            box_length: 2.0 * std::f64::consts::PI,
            k_max: 2.0,
        })
        .unwrap();
        let kappa = ChargeDistribution::gaussian(&grid, 0.5, 1.3).unwrap();
        let table = CouplingTable::build(&grid, &kappa).unwrap();
        for (mi, mode) in grid.retained_modes.iter().enumerate() {
            for (xi, x) in grid.site_positions.iter().enumerate() {
                let expect = C64::from_polar(1.0, -mode.k[0] * x[0])
                    * (kappa.fourier_values[mi] / (2.0 * mode.k_abs).sqrt());
                assert!((table.g(xi, mi)[0] - expect).norm() < 1e-14);
            }
        }
    }
}
