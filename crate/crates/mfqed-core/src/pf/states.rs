//! Initial states of the many-body model: truncated per-mode coherent
//! vectors, condensate product states, unitary mode displacements, and the
//! first-quantized expansion used by the slot-resolved diagnostics.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::PfError;
use crate::grid::ModelGrid;
use crate::C64;

use super::{acc_annihilate, acc_create, FockShape, ManyBodyState, PfSpace};

/// Truncated coherent coefficients for one mode: `c_n ∝ z^n/sqrt(n!)`,
/// renormalized after the cutoff. Returns the coefficients and the Poisson
/// tail mass lost to truncation.
pub fn coherent_mode_coeffs(n_max: usize, z: C64) -> (Vec<C64>, f64) {
    let mut coeffs = Vec::with_capacity(n_max + 1);
    let mut u = C64::new(1.0, 0.0);
    coeffs.push(u);
    for n in 1..=n_max {
        u *= z / (n as f64).sqrt();
        coeffs.push(u);
    }
    let weight = (-z.norm_sqr() / 2.0).exp();
    let kept: f64 = coeffs.iter().map(|c| (c * weight).norm_sqr()).sum();
    let tail = (1.0 - kept).max(0.0);
    let scale = weight / kept.sqrt();
    for c in coeffs.iter_mut() {
        *c *= scale;
    }
    (coeffs, tail)
}

/// Photon-sector coherent vector for the amplitude profile `α` with the mode
/// dictionary `z_m = sqrt(N) sqrt(w_m) α_m`. Fails if the combined tail mass
/// exceeds `tail_tol`.
pub fn coherent_fock(
    space: &Arc<PfSpace>,
    alpha: &[C64],
    tail_tol: f64,
) -> Result<(Vec<C64>, f64), PfError> {
    let z = space.coherent_displacements(alpha);
    let n_max = space.fock.n_max;
    let mut per_mode = Vec::with_capacity(z.len());
    let mut kept_total = 1.0;
    for &zm in &z {
        let (coeffs, tail) = coherent_mode_coeffs(n_max, zm);
        kept_total *= 1.0 - tail;
        per_mode.push(coeffs);
    }
    let tail_mass = 1.0 - kept_total;
    if tail_mass > tail_tol {
        return Err(PfError::TailMass { mass: tail_mass, tol: tail_tol, n_max });
    }
    let mut out = vec![C64::new(1.0, 0.0); space.fock.dim];
    for (f, v) in out.iter_mut().enumerate() {
        for (m, coeffs) in per_mode.iter().enumerate() {
            *v *= coeffs[space.fock.digit(f, m)];
        }
    }
    Ok((out, tail_mass))
}

/// Orthonormal-basis coefficients of a lattice wave function,
/// `c_x = sqrt(h^d) φ(x)`.
pub fn site_coefficients(grid: &ModelGrid, phi: &[C64]) -> Vec<C64> {
    let s = grid.cell_volume.sqrt();
    phi.iter().map(|v| v * s).collect()
}

/// Condensate ⊗ coherent initial state `φ^{⊗N} ⊗ W(√N α)Ω` in the symmetric
/// encoding. Returns the state and the coherent tail mass.
pub fn product_initial_state(
    space: &Arc<PfSpace>,
    phi: &[C64],
    alpha: &[C64],
    tail_tol: f64,
) -> Result<(ManyBodyState, f64), PfError> {
    let (fock, tail) = coherent_fock(space, alpha, tail_tol)?;
    let c = site_coefficients(&space.grid, phi);
    let n = space.n_particles();
    let n_fact = factorial(n);
    let fdim = space.fock.dim;
    let mut state = ManyBodyState::zero(space.clone());
    for (p, config) in space.basis.configs.iter().enumerate() {
        let mut amp = C64::new(1.0, 0.0);
        let mut denom = 1.0;
        for (x, &mx) in config.iter().enumerate() {
            for _ in 0..mx {
                amp *= c[x];
            }
            denom *= factorial(mx as usize);
        }
        amp *= (n_fact / denom).sqrt();
        if amp == C64::new(0.0, 0.0) {
            continue;
        }
        for f in 0..fdim {
            state.amp[p * fdim + f] = amp * fock[f];
        }
    }
    state.time = 0.0;
    Ok((state, tail))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Truncated displacement `D(z) = exp(z a† - z̄ a)` for one mode; exactly
/// unitary because the truncated generator stays anti-Hermitian.
pub fn displacement_matrix(n_max: usize, z: C64) -> DMatrix<C64> {
    let dim = n_max + 1;
    // i(z a† - z̄ a) is Hermitian
    let mut gen = DMatrix::<C64>::zeros(dim, dim);
    for n in 0..n_max {
        let s = ((n + 1) as f64).sqrt();
        gen[(n + 1, n)] = C64::new(0.0, 1.0) * z * s;
        gen[(n, n + 1)] = (C64::new(0.0, 1.0) * z * s).conj();
    }
    let eig = gen.symmetric_eigen();
    let mut d = DMatrix::<C64>::zeros(dim, dim);
    for j in 0..dim {
        let phase = C64::from_polar(1.0, -eig.eigenvalues[j]);
        for r in 0..dim {
            for c in 0..dim {
                d[(r, c)] += eig.eigenvectors[(r, j)] * phase * eig.eigenvectors[(c, j)].conj();
            }
        }
    }
    d
}

/// Apply a one-mode matrix along the given mode of a `(rows × fock)` tensor.
pub fn apply_mode_matrix(shape: &FockShape, mode: usize, mat: &DMatrix<C64>, x: &[C64]) -> Vec<C64> {
    let fdim = shape.dim;
    let rows = x.len() / fdim;
    let stride = shape.stride(mode);
    let base = shape.n_max + 1;
    let mut y = vec![C64::new(0.0, 0.0); x.len()];
    for f in 0..fdim {
        let n = shape.digit(f, mode);
        for n_new in 0..base {
            let m = mat[(n_new, n)];
            if m == C64::new(0.0, 0.0) {
                continue;
            }
            let dst = f + (n_new as isize - n as isize) as usize * stride;
            // (wrapping arithmetic is safe: dst stays within the f-block)
            let dst = (f as isize + (n_new as isize - n as isize) * stride as isize) as usize;
            let _ = dst;
            let dst = ((f as isize) + (n_new as isize - n as isize) * (stride as isize)) as usize;
            for r in 0..rows {
                y[r * fdim + dst] += m * x[r * fdim + f];
            }
        }
    }
    y
}

/// Apply the product displacement `Π_m D(sign · z_m)` with
/// `z_m = sqrt(N) sqrt(w_m) α_m`. Returns the displaced state and the
/// Poisson-tail estimate of the truncation error.
pub fn displaced(state: &ManyBodyState, alpha: &[C64], sign: f64) -> (ManyBodyState, f64) {
    let space = &state.space;
    let z = space.coherent_displacements(alpha);
    let trunc = super::FockTruncation::new(space.fock.n_max);
    let mut kept = 1.0;
    let mut amp = state.amp.clone();
    for (m, &zm) in z.iter().enumerate() {
        kept *= 1.0 - trunc.poisson_tail(zm.norm_sqr());
        if zm == C64::new(0.0, 0.0) {
            continue;
        }
        let d = displacement_matrix(space.fock.n_max, zm * sign);
        amp = apply_mode_matrix(&space.fock, m, &d, &amp);
    }
    (
        ManyBodyState { space: space.clone(), amp, time: state.time },
        1.0 - kept,
    )
}

/// First-quantized expansion of a symmetric state: amplitudes over ordered
/// site tuples `(x₁,…,x_N)` × Fock indices, slot 1 slowest. Only used by the
/// slot-resolved derivative diagnostics at toy scale.
#[derive(Debug, Clone)]
pub struct FirstQuantized {
    pub n_sites: usize,
    pub n_particles: usize,
    pub fock: FockShape,
    pub amp: Vec<C64>,
}

pub fn expand_first_quantized(
    state: &ManyBodyState,
    budget: usize,
) -> Result<FirstQuantized, PfError> {
    let space = &state.space;
    let ns = space.grid.n_sites();
    let n = space.n_particles();
    let fdim = space.fock.dim;
    let tuples = ns.pow(n as u32);
    let dim = tuples.saturating_mul(fdim);
    if dim > budget {
        return Err(PfError::ExpansionBudget { dim, budget });
    }
    let n_fact = factorial(n);
    let mut amp = vec![C64::new(0.0, 0.0); dim];
    let mut occupation = vec![0u8; ns];
    for tuple in 0..tuples {
        occupation.iter_mut().for_each(|o| *o = 0);
        let mut rest = tuple;
        for _ in 0..n {
            occupation[rest % ns] += 1;
            rest /= ns;
        }
        let p = space
            .basis
            .config_index(&occupation)
            .expect("occupation enumerates a valid config");
        let mut scale = 1.0;
        for &o in occupation.iter() {
            scale *= factorial(o as usize);
        }
        let scale = (scale / n_fact).sqrt();
        for f in 0..fdim {
            amp[tuple * fdim + f] = state.amp[p * fdim + f] * scale;
        }
    }
    Ok(FirstQuantized {
        n_sites: ns,
        n_particles: n,
        fock: space.fock.clone(),
        amp,
    })
}

impl FirstQuantized {
    /// Elements per slot-1 block.
    fn block(&self) -> usize {
        self.amp.len() / self.n_sites
    }

    pub fn inner(&self, other: &FirstQuantized) -> C64 {
        self.amp
            .iter()
            .zip(other.amp.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn zeros_like(&self) -> FirstQuantized {
        FirstQuantized {
            n_sites: self.n_sites,
            n_particles: self.n_particles,
            fock: self.fock.clone(),
            amp: vec![C64::new(0.0, 0.0); self.amp.len()],
        }
    }

    /// One-body matrix on slot 1 (row-major `n_s × n_s`).
    pub fn apply_slot1_matrix(&self, mat: &[C64]) -> FirstQuantized {
        let block = self.block();
        let ns = self.n_sites;
        let mut out = self.zeros_like();
        for x1 in 0..ns {
            for xp in 0..ns {
                let m = mat[x1 * ns + xp];
                if m == C64::new(0.0, 0.0) {
                    continue;
                }
                let src = &self.amp[xp * block..(xp + 1) * block];
                let dst = &mut out.amp[x1 * block..(x1 + 1) * block];
                for (d, s) in dst.iter_mut().zip(src.iter()) {
                    *d += m * s;
                }
            }
        }
        out
    }

    /// Multiply each slot-1 block by a complex scalar (site-diagonal factor).
    pub fn apply_slot1_diag(&self, diag: &[C64]) -> FirstQuantized {
        let block = self.block();
        let mut out = self.clone();
        for x1 in 0..self.n_sites {
            let d = diag[x1];
            for v in out.amp[x1 * block..(x1 + 1) * block].iter_mut() {
                *v *= d;
            }
        }
        out
    }

    /// Fock ladder combination per slot-1 site:
    /// `y(x₁) = Σ_m [ ca(x₁,m) a_m + cc(x₁,m) a†_m ] x(x₁)`.
    pub fn apply_slot1_fock(&self, per_site: &[Vec<(C64, C64)>]) -> FirstQuantized {
        let block = self.block();
        let mut out = self.zeros_like();
        for x1 in 0..self.n_sites {
            let src = &self.amp[x1 * block..(x1 + 1) * block];
            let dst = &mut out.amp[x1 * block..(x1 + 1) * block];
            for (m, &(ca, cc)) in per_site[x1].iter().enumerate() {
                acc_annihilate(&self.fock, m, ca, src, dst);
                acc_create(&self.fock, m, cc, src, dst);
            }
        }
        out
    }

    /// Rank-one projector `p₁ = |c⟩⟨c|` on slot 1.
    pub fn apply_slot1_projector(&self, c: &[C64]) -> FirstQuantized {
        let block = self.block();
        let mut reduced = vec![C64::new(0.0, 0.0); block];
        for x1 in 0..self.n_sites {
            let cc = c[x1].conj();
            for (r, s) in reduced.iter_mut().zip(self.amp[x1 * block..].iter()) {
                *r += cc * s;
            }
        }
        let mut out = self.zeros_like();
        for x1 in 0..self.n_sites {
            let cx = c[x1];
            for (d, r) in out.amp[x1 * block..(x1 + 1) * block].iter_mut().zip(reduced.iter()) {
                *d = cx * r;
            }
        }
        out
    }

    /// Diagonal two-body factor `f(x₁, x₂)`; requires `N ≥ 2`.
    pub fn apply_pair12_diag(&self, f: impl Fn(usize, usize) -> f64) -> FirstQuantized {
        assert!(self.n_particles >= 2);
        let block1 = self.block();
        let block2 = block1 / self.n_sites;
        let mut out = self.clone();
        for x1 in 0..self.n_sites {
            for x2 in 0..self.n_sites {
                let v = f(x1, x2);
                let base = x1 * block1 + x2 * block2;
                for a in out.amp[base..base + block2].iter_mut() {
                    *a *= v;
                }
            }
        }
        out
    }

    /// Fock-sector mode fluctuation `(a_m/(√w √N) - α_m)` (delta-normalized).
    pub fn apply_mode_fluctuation(
        &self,
        mode: usize,
        weight: f64,
        alpha_m: C64,
    ) -> FirstQuantized {
        let n = self.n_particles as f64;
        let scale = C64::new(1.0 / (weight.sqrt() * n.sqrt()), 0.0);
        let mut out = self.zeros_like();
        acc_annihilate(&self.fock, mode, scale, &self.amp, &mut out.amp);
        for (o, s) in out.amp.iter_mut().zip(self.amp.iter()) {
            *o -= alpha_m * s;
        }
        out
    }
}
