//! Truncated many-body model: `N` identical bosons on the lattice coupled to
//! the retained photon modes, each mode truncated at a per-mode occupation
//! cutoff. States live on (symmetric N-particle configurations) × (occupation
//! multi-indices); all operators are applied matrix-free.
//!
//! The paper-style delta-normalized mode operators relate to the discrete
//! per-mode ladder operators by `a(k,λ) ↦ a_mode / sqrt(weight)`; that
//! dictionary is fixed here once and inherited by every other operation.

pub mod density;
pub mod krylov;
pub mod ops;
pub mod states;

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::PfError;
use crate::grid::ModelGrid;
use crate::C64;

/// Per-mode occupation cutoff for the photon sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockTruncation {
    pub n_max: usize,
}

impl FockTruncation {
    pub fn new(n_max: usize) -> Self {
        assert!(n_max >= 1);
        FockTruncation { n_max }
    }

    /// Probability mass a coherent state of amplitude `z` loses to the cutoff:
    /// the Poisson tail `Σ_{n > n_max} e^{-|z|²} |z|^{2n}/n!`.
    pub fn poisson_tail(&self, z_abs_sq: f64) -> f64 {
        let mut term = (-z_abs_sq).exp();
        let mut cum = term;
        for n in 1..=self.n_max {
            term *= z_abs_sq / n as f64;
            cum += term;
        }
        (1.0 - cum).max(0.0)
    }
}

/// Occupation multi-index arithmetic for the truncated photon sector.
#[derive(Debug, Clone)]
pub struct FockShape {
    pub n_modes: usize,
    pub n_max: usize,
    pub dim: usize,
    strides: Vec<usize>,
    /// Total occupation per flat index.
    total: Vec<u32>,
}

impl FockShape {
    pub fn new(n_modes: usize, trunc: FockTruncation) -> Self {
        let base = trunc.n_max + 1;
        let dim = base.pow(n_modes as u32);
        let strides: Vec<usize> = (0..n_modes).map(|m| base.pow(m as u32)).collect();
        let mut total = vec![0u32; dim];
        for (f, t) in total.iter_mut().enumerate() {
            let mut rest = f;
            let mut acc = 0u32;
            for _ in 0..n_modes {
                acc += (rest % base) as u32;
                rest /= base;
            }
            *t = acc;
        }
        FockShape {
            n_modes,
            n_max: trunc.n_max,
            dim,
            strides,
            total,
        }
    }

    #[inline]
    pub fn stride(&self, mode: usize) -> usize {
        self.strides[mode]
    }

    #[inline]
    pub fn digit(&self, f: usize, mode: usize) -> usize {
        (f / self.strides[mode]) % (self.n_max + 1)
    }

    #[inline]
    pub fn total_occupation(&self, f: usize) -> u32 {
        self.total[f]
    }
}

/// Accumulate `y += coeff · (a_mode x)` over a `(rows × fock)` tensor.
pub fn acc_annihilate(shape: &FockShape, mode: usize, coeff: C64, x: &[C64], y: &mut [C64]) {
    if coeff == C64::new(0.0, 0.0) {
        return;
    }
    let fdim = shape.dim;
    let stride = shape.strides[mode];
    let rows = x.len() / fdim;
    for f in 0..fdim {
        let n = shape.digit(f, mode);
        if n == 0 {
            continue;
        }
        let c = coeff * (n as f64).sqrt();
        let dst = f - stride;
        for r in 0..rows {
            y[r * fdim + dst] += c * x[r * fdim + f];
        }
    }
}

/// Accumulate `y += coeff · (a†_mode x)`; components raised past the cutoff
/// are dropped (the truncation).
pub fn acc_create(shape: &FockShape, mode: usize, coeff: C64, x: &[C64], y: &mut [C64]) {
    if coeff == C64::new(0.0, 0.0) {
        return;
    }
    let fdim = shape.dim;
    let stride = shape.strides[mode];
    let rows = x.len() / fdim;
    for f in 0..fdim {
        let n = shape.digit(f, mode);
        if n >= shape.n_max {
            continue;
        }
        let c = coeff * ((n + 1) as f64).sqrt();
        let dst = f + stride;
        for r in 0..rows {
            y[r * fdim + dst] += c * x[r * fdim + f];
        }
    }
}

/// Symmetric-sector basis: bosonic occupation configurations over lattice
/// sites, with precomputed hop amplitudes for one-body operators.
#[derive(Debug, Clone)]
pub struct SymmetricBasis {
    pub n_sites: usize,
    pub n_particles: usize,
    pub configs: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    /// `b†_x b_y` on config `p`: entry `(p·n_s + x)·n_s + y` holds the target
    /// config and amplitude; zero amplitude marks an annihilated move.
    hops: Vec<(u32, f64)>,
}

impl SymmetricBasis {
    pub fn new(n_sites: usize, n_particles: usize) -> Self {
        let mut configs = Vec::new();
        let mut current = vec![0u8; n_sites];
        enumerate_configs(&mut configs, &mut current, 0, n_particles);
        let index: HashMap<Vec<u8>, usize> =
            configs.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();

        let mut hops = vec![(0u32, 0.0f64); configs.len() * n_sites * n_sites];
        let mut scratch = vec![0u8; n_sites];
        for (p, config) in configs.iter().enumerate() {
            for x in 0..n_sites {
                for y in 0..n_sites {
                    if config[y] == 0 {
                        continue;
                    }
                    let my = config[y] as f64;
                    let slot = (p * n_sites + x) * n_sites + y;
                    if x == y {
                        hops[slot] = (p as u32, my);
                        continue;
                    }
                    scratch.copy_from_slice(config);
                    scratch[y] -= 1;
                    scratch[x] += 1;
                    let target = index[&scratch];
                    let amp = (my * (config[x] as f64 + 1.0)).sqrt();
                    hops[slot] = (target as u32, amp);
                }
            }
        }
        SymmetricBasis {
            n_sites,
            n_particles,
            configs,
            index,
            hops,
        }
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn config_index(&self, config: &[u8]) -> Option<usize> {
        self.index.get(config).copied()
    }

    /// `b†_x b_y |p⟩ = amp |target⟩`; amp is zero when the move annihilates.
    #[inline]
    pub fn hop(&self, p: usize, x: usize, y: usize) -> (usize, f64) {
        let (t, a) = self.hops[(p * self.n_sites + x) * self.n_sites + y];
        (t as usize, a)
    }
}

fn enumerate_configs(out: &mut Vec<Vec<u8>>, current: &mut Vec<u8>, site: usize, left: usize) {
    if site == current.len() - 1 {
        current[site] = left as u8;
        out.push(current.clone());
        return;
    }
    for occ in (0..=left).rev() {
        current[site] = occ as u8;
        enumerate_configs(out, current, site + 1, left - occ);
    }
}

/// The product of the symmetric particle sector and the truncated photon
/// sector, bound to one grid.
#[derive(Debug, Clone)]
pub struct PfSpace {
    pub grid: Arc<ModelGrid>,
    pub basis: SymmetricBasis,
    pub fock: FockShape,
}

impl PfSpace {
    pub fn new(
        grid: Arc<ModelGrid>,
        n_particles: usize,
        trunc: FockTruncation,
        budget: usize,
    ) -> Result<Arc<Self>, PfError> {
        assert!(n_particles >= 1);
        let fock = FockShape::new(grid.n_modes(), trunc);
        let particle_dim = binomial(n_particles + grid.n_sites() - 1, n_particles);
        let dim = particle_dim.saturating_mul(fock.dim);
        if dim > budget {
            return Err(PfError::BudgetExceeded { dim, budget });
        }
        let basis = SymmetricBasis::new(grid.n_sites(), n_particles);
        debug_assert_eq!(basis.len(), particle_dim);
        Ok(Arc::new(PfSpace { grid, basis, fock }))
    }

    pub fn dim(&self) -> usize {
        self.basis.len() * self.fock.dim
    }

    pub fn n_particles(&self) -> usize {
        self.basis.n_particles
    }

    /// Coherent displacement per mode for the amplitude profile `α`:
    /// `z_mode = sqrt(N) sqrt(weight) α_mode`.
    pub fn coherent_displacements(&self, alpha: &[C64]) -> Vec<C64> {
        let n = self.n_particles() as f64;
        self.grid
            .retained_modes
            .iter()
            .zip(alpha.iter())
            .map(|(mode, a)| a * (n * mode.weight).sqrt())
            .collect()
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Amplitude tensor on a [`PfSpace`], layout `(config, fock)` with the fock
/// index fastest.
#[derive(Debug, Clone)]
pub struct ManyBodyState {
    pub space: Arc<PfSpace>,
    pub amp: Vec<C64>,
    pub time: f64,
}

impl ManyBodyState {
    pub fn zero(space: Arc<PfSpace>) -> Self {
        let dim = space.dim();
        ManyBodyState {
            space,
            amp: vec![C64::new(0.0, 0.0); dim],
            time: 0.0,
        }
    }

    pub fn n_particles(&self) -> usize {
        self.space.n_particles()
    }

    pub fn norm(&self) -> f64 {
        self.amp.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &ManyBodyState) -> C64 {
        self.amp
            .iter()
            .zip(other.amp.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DiscretizationConfig};

    fn grid1() -> Arc<ModelGrid> {
        Arc::new(
            build_grid(&DiscretizationConfig {
                dim: 1,
                sites_per_dim: 4,
                box_length: 2.0 * std::f64::consts::PI,
                k_max: 1.0,
            })
            .unwrap(),
        )
    }

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(11, 8), 165);
        assert_eq!(binomial(4, 4), 1);
    }

    #[test]
    fn basis_dimension_matches_binomial() {
        let basis = SymmetricBasis::new(4, 3);
        assert_eq!(basis.len(), binomial(6, 3));
        for c in &basis.configs {
            assert_eq!(c.iter().map(|&v| v as usize).sum::<usize>(), 3);
        }
    }

    #[test]
    fn hop_amplitudes_are_bosonic() {
        let basis = SymmetricBasis::new(3, 2);
        let p = basis.config_index(&[2, 0, 0]).unwrap();
        // b†_1 b_0 |2,0,0⟩ = sqrt(2·1) |1,1,0⟩
        let (t, amp) = basis.hop(p, 1, 0);
        assert_eq!(basis.configs[t], vec![1, 1, 0]);
        assert!((amp - 2f64.sqrt()).abs() < 1e-15);
        // number operator on site 0
        let (t0, n0) = basis.hop(p, 0, 0);
        assert_eq!(t0, p);
        assert!((n0 - 2.0).abs() < 1e-15);
        // annihilated move
        let (_, dead) = basis.hop(p, 0, 1);
        assert_eq!(dead, 0.0);
    }

    #[test]
    fn fock_shape_digits_and_totals() {
        let shape = FockShape::new(2, FockTruncation::new(3));
        assert_eq!(shape.dim, 16);
        let f = 1 + 4 * 2; // n_0 = 1, n_1 = 2
        assert_eq!(shape.digit(f, 0), 1);
        assert_eq!(shape.digit(f, 1), 2);
        assert_eq!(shape.total_occupation(f), 3);
    }

    #[test]
    fn ladder_ops_satisfy_truncated_ccr() {
        let shape = FockShape::new(2, FockTruncation::new(3));
        let dim = shape.dim;
        // state supported strictly below the cutoff
        let mut x = vec![C64::new(0.0, 0.0); dim];
        for f in 0..dim {
            if shape.digit(f, 0) <= 2 && shape.digit(f, 1) <= 2 {
                x[f] = C64::new(0.3 + f as f64 * 0.1, 0.2 - f as f64 * 0.05);
            }
        }
        let one = C64::new(1.0, 0.0);
        for mode in 0..2 {
            let mut a_x = vec![C64::new(0.0, 0.0); dim];
            acc_annihilate(&shape, mode, one, &x, &mut a_x);
            let mut adag_a_x = vec![C64::new(0.0, 0.0); dim];
            acc_create(&shape, mode, one, &a_x, &mut adag_a_x);
            let mut adag_x = vec![C64::new(0.0, 0.0); dim];
            acc_create(&shape, mode, one, &x, &mut adag_x);
            let mut a_adag_x = vec![C64::new(0.0, 0.0); dim];
            acc_annihilate(&shape, mode, one, &adag_x, &mut a_adag_x);
            for f in 0..dim {
                let comm = a_adag_x[f] - adag_a_x[f];
                assert!((comm - x[f]).norm() < 1e-12, "mode {mode} f {f}");
            }
        }
    }

    #[test]
    fn annihilation_kills_vacuum_and_counts_occupation() {
        let shape = FockShape::new(1, FockTruncation::new(4));
        let one = C64::new(1.0, 0.0);
        let mut vacuum = vec![C64::new(0.0, 0.0); shape.dim];
        vacuum[0] = one;
        let mut out = vec![C64::new(0.0, 0.0); shape.dim];
        acc_annihilate(&shape, 0, one, &vacuum, &mut out);
        assert!(out.iter().all(|v| v.norm() == 0.0));

        // a†a |n⟩ = n |n⟩
        for n in 0..=4usize {
            let mut basis_n = vec![C64::new(0.0, 0.0); shape.dim];
            basis_n[n] = one;
            let mut a = vec![C64::new(0.0, 0.0); shape.dim];
            acc_annihilate(&shape, 0, one, &basis_n, &mut a);
            let mut na = vec![C64::new(0.0, 0.0); shape.dim];
            acc_create(&shape, 0, one, &a, &mut na);
            assert!((na[n].re - n as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn budget_guard_refuses_large_spaces() {
        let grid = grid1();
        let err = PfSpace::new(grid, 8, FockTruncation::new(9), 1000).unwrap_err();
        assert!(matches!(err, PfError::BudgetExceeded { .. }));
    }

    #[test]
    fn poisson_tail_matches_direct_sum() {
        let trunc = FockTruncation::new(8);
        let mean: f64 = 0.5;
        let mut direct = 0.0;
        let mut fact = 1.0;
        for n in 0..=8u32 {
            if n > 0 {
                fact *= n as f64;
            }
            direct += (-mean).exp() * mean.powi(n as i32) / fact;
        }
        assert!((trunc.poisson_tail(mean) - (1.0 - direct)).abs() < 1e-15);
    }
}
