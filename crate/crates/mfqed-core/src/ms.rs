//! Effective light–matter solver: the coupled system for the one-particle
//! wave function `φ` and the complex mode amplitudes `α` on the shared grid,
//!
//! ```text
//! i ∂t φ = (-i∇ - κ∗A)² φ + (v ∗ |φ|²) φ
//! i ∂t α(k,λ) = |k| α(k,λ) - sqrt((2π)^d / (2|k|)) F[κ](k) ε_λ(k)·F[j](k)
//! ```
//!
//! with the current `j = 2( Im(φ̄∇φ) - |φ|² (κ∗A) )` and the vector potential
//! reconstructed from the mode amplitudes. Space derivatives are spectral;
//! time stepping is a classical explicit fourth-order step on `φ` combined
//! with an exact integrating factor `e^{-i|k|dt}` on the stiff mode rotation,
//! so a source-free field evolves exactly. The norm of `φ` is never
//! renormalized mid-run: its drift is a measured error diagnostic.

use std::sync::Arc;

use crate::charge::ChargeDistribution;
use crate::error::MsError;
use crate::grid::ModelGrid;
use crate::potential::PairPotential;
use crate::vec3;
use crate::C64;

/// `(φ, α)` at a point in time. `φ` is stored on lattice sites with the
/// quadrature norm `h^d Σ|φ|²`; `α` has one complex slot per retained mode.
#[derive(Debug, Clone)]
pub struct EffectiveState {
    pub phi: Vec<C64>,
    pub alpha: Vec<C64>,
    pub time: f64,
}

/// Conserved-quantity snapshot appended once per sample time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservationLedger {
    pub time: f64,
    pub energy: f64,
    pub l2_norm: f64,
    pub div_a_residual: f64,
    pub alpha_h_norm: f64,
    pub alpha_h32_norm: f64,
}

/// The effective model on a fixed grid with fixed charge profile and pair
/// potential. Stepping is a pure function of the state.
#[derive(Debug, Clone)]
pub struct MsModel {
    pub grid: Arc<ModelGrid>,
    pub kappa: ChargeDistribution,
    pub potential: PairPotential,
}

/// `h^d Σ conj(a)·b` lattice inner product.
pub fn inner(grid: &ModelGrid, a: &[C64], b: &[C64]) -> C64 {
    let s: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    s * grid.cell_volume
}

pub fn l2_norm(grid: &ModelGrid, phi: &[C64]) -> f64 {
    (phi.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.cell_volume).sqrt()
}

pub fn normalize(grid: &ModelGrid, phi: &mut [C64]) {
    let n = l2_norm(grid, phi);
    if n > 0.0 {
        let s = 1.0 / n;
        for v in phi.iter_mut() {
            *v *= s;
        }
    }
}

/// Vector potential on lattice sites from the mode amplitudes,
///
/// `A(x) = (2π)^{-d/2} Σ_modes w (2|k|)^{-1/2} ε (e^{ikx} α + e^{-ikx} ᾱ)`.
///
/// With `kappa` supplied each mode term is multiplied by
/// `(2π)^{d/2} F[κ](k)`, producing the smeared field `κ∗A`.
pub fn reconstruct_a(
    grid: &ModelGrid,
    alpha: &[C64],
    kappa: Option<&ChargeDistribution>,
) -> Vec<[f64; 3]> {
    assert_eq!(alpha.len(), grid.n_modes());
    let d = grid.dim as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    let pref = two_pi.powf(-d / 2.0);
    let smear_scale = two_pi.powf(d / 2.0);
    let mut out = vec![[0.0; 3]; grid.n_sites()];
    for (xi, x) in grid.site_positions.iter().enumerate() {
        let mut acc = [0.0; 3];
        for (mi, mode) in grid.retained_modes.iter().enumerate() {
            let smear = match kappa {
                Some(c) => smear_scale * c.fourier_values[mi],
                None => 1.0,
            };
            if smear == 0.0 {
                continue;
            }
            let radial = mode.weight / (2.0 * mode.k_abs).sqrt();
            let phase = C64::from_polar(1.0, vec3::dot(mode.k, *x));
            // e^{ikx} α + e^{-ikx} ᾱ = 2 Re(α e^{ikx})
            let term = 2.0 * (alpha[mi] * phase).re * radial * smear;
            for axis in 0..grid.dim {
                acc[axis] += term * mode.epsilon[axis];
            }
        }
        for axis in 0..grid.dim {
            out[xi][axis] = pref * acc[axis];
        }
    }
    out
}

impl MsModel {
    pub fn new(grid: Arc<ModelGrid>, kappa: ChargeDistribution, potential: PairPotential) -> Self {
        MsModel { grid, kappa, potential }
    }

    /// Smeared vector potential `κ∗A` seen by the particle.
    pub fn smeared_a(&self, alpha: &[C64]) -> Vec<[f64; 3]> {
        reconstruct_a(&self.grid, alpha, Some(&self.kappa))
    }

    /// Current `j = 2( Im(φ̄ ∇φ) - |φ|² B )` with `B = κ∗A` given.
    pub fn current(&self, phi: &[C64], a_smeared: &[[f64; 3]]) -> Vec<[f64; 3]> {
        let grad = self.grid.fft().gradient(phi);
        let mut j = vec![[0.0; 3]; phi.len()];
        for (xi, jv) in j.iter_mut().enumerate() {
            let dens = phi[xi].norm_sqr();
            for axis in 0..self.grid.dim {
                let para = (phi[xi].conj() * grad[axis][xi]).im;
                jv[axis] = 2.0 * (para - dens * a_smeared[xi][axis]);
            }
        }
        j
    }

    /// `ε_λ(k) · F[j](k)` per retained mode.
    fn current_mode_coeffs(&self, j: &[[f64; 3]]) -> Vec<C64> {
        let fft = self.grid.fft();
        let modes_int: Vec<[i64; 3]> = self.grid.retained_modes.iter().map(|m| m.m).collect();
        let mut per_axis: Vec<Vec<C64>> = Vec::with_capacity(self.grid.dim);
        for axis in 0..self.grid.dim {
            let comp: Vec<C64> = j.iter().map(|v| C64::new(v[axis], 0.0)).collect();
            per_axis.push(fft.continuum_coeffs(&comp, &modes_int));
        }
        self.grid
            .retained_modes
            .iter()
            .enumerate()
            .map(|(mi, mode)| {
                let mut acc = C64::new(0.0, 0.0);
                for (axis, coeffs) in per_axis.iter().enumerate() {
                    acc += coeffs[mi] * mode.epsilon[axis];
                }
                acc
            })
            .collect()
    }

    /// Source amplitude `S(k,λ) = sqrt((2π)^d/(2|k|)) F[κ](k) ε·F[j](k)`;
    /// the mode equation reads `i ∂t α = |k| α - S`.
    pub fn source_term(&self, phi: &[C64], alpha: &[C64]) -> Vec<C64> {
        if self.kappa.is_zero() {
            return vec![C64::new(0.0, 0.0); self.grid.n_modes()];
        }
        let b = self.smeared_a(alpha);
        let j = self.current(phi, &b);
        self.source_term_from_current(&j)
    }

    /// Same source built from an externally supplied current.
    pub fn source_term_from_current(&self, j: &[[f64; 3]]) -> Vec<C64> {
        let d = self.grid.dim as f64;
        let two_pi_pow = (2.0 * std::f64::consts::PI).powf(d);
        let eps_dot_fj = self.current_mode_coeffs(j);
        self.grid
            .retained_modes
            .iter()
            .enumerate()
            .map(|(mi, mode)| {
                let pref = (two_pi_pow / (2.0 * mode.k_abs)).sqrt();
                eps_dot_fj[mi] * (pref * self.kappa.fourier_values[mi])
            })
            .collect()
    }

    /// Full right-hand side of `i ∂t α`: `|k| α - S`.
    pub fn alpha_source(&self, phi: &[C64], alpha: &[C64]) -> Vec<C64> {
        let s = self.source_term(phi, alpha);
        self.grid
            .retained_modes
            .iter()
            .zip(alpha.iter().zip(s.iter()))
            .map(|(mode, (a, src))| a * mode.k_abs - src)
            .collect()
    }

    /// `dφ/dt = -i [ (-i∇ - B)² + (v∗|φ|²) ] φ` with `B = κ∗A(α)`.
    fn phi_derivative(&self, phi: &[C64], alpha: &[C64]) -> Vec<C64> {
        let h_phi = self.apply_effective_hamiltonian(phi, alpha);
        h_phi.into_iter().map(|v| v * C64::new(0.0, -1.0)).collect()
    }

    /// `[ (-i∇ - B)² + (v∗|φ|²) ] φ`, the generator of the φ-equation.
    /// The magnetic cross term is applied in the symmetric form
    /// `i∇·(Bφ) + iB·∇φ`, which is Hermitian on the lattice.
    pub fn apply_effective_hamiltonian(&self, phi: &[C64], alpha: &[C64]) -> Vec<C64> {
        let fft = self.grid.fft();
        let n = phi.len();
        let mut out = fft.neg_laplacian(phi);

        if !self.kappa.is_zero() {
            let b = self.smeared_a(alpha);
            let grad = fft.gradient(phi);
            // i ∇·(Bφ)
            for axis in 0..self.grid.dim {
                let prod: Vec<C64> = (0..n).map(|x| phi[x] * b[x][axis]).collect();
                let dprod = fft.gradient(&prod);
                for x in 0..n {
                    out[x] += C64::new(0.0, 1.0) * dprod[axis][x];
                }
            }
            // i B·∇φ + |B|² φ
            for x in 0..n {
                let mut cross = C64::new(0.0, 0.0);
                let mut b2 = 0.0;
                for axis in 0..self.grid.dim {
                    cross += grad[axis][x] * b[x][axis];
                    b2 += b[x][axis] * b[x][axis];
                }
                out[x] += C64::new(0.0, 1.0) * cross + phi[x] * b2;
            }
        }

        if !self.potential.is_zero() {
            let rho: Vec<C64> = phi.iter().map(|v| C64::new(v.norm_sqr(), 0.0)).collect();
            let conv = fft.convolve(&self.potential.values, &rho);
            for x in 0..n {
                out[x] += phi[x] * conv[x].re;
            }
        }
        out
    }

    /// Time derivative of the full state.
    pub fn rhs(&self, state: &EffectiveState) -> (Vec<C64>, Vec<C64>) {
        let dphi = self.phi_derivative(&state.phi, &state.alpha);
        let s = self.source_term(&state.phi, &state.alpha);
        let dalpha = self
            .grid
            .retained_modes
            .iter()
            .zip(state.alpha.iter().zip(s.iter()))
            .map(|(mode, (a, src))| C64::new(0.0, -1.0) * (a * mode.k_abs - src))
            .collect();
        (dphi, dalpha)
    }

    /// Energy functional: `‖(-i∇ - B)φ‖² + ½⟨φ,(v∗|φ|²)φ⟩ + Σ w |k| |α|²`.
    pub fn energy(&self, state: &EffectiveState) -> f64 {
        let fft = self.grid.fft();
        let grad = fft.gradient(&state.phi);
        let b = if self.kappa.is_zero() {
            vec![[0.0; 3]; state.phi.len()]
        } else {
            self.smeared_a(&state.alpha)
        };
        let mut kinetic = 0.0;
        for x in 0..state.phi.len() {
            for axis in 0..self.grid.dim {
                let d = C64::new(0.0, -1.0) * grad[axis][x] - state.phi[x] * b[x][axis];
                kinetic += d.norm_sqr();
            }
        }
        kinetic *= self.grid.cell_volume;

        let mut interaction = 0.0;
        if !self.potential.is_zero() {
            let rho: Vec<C64> = state.phi.iter().map(|v| C64::new(v.norm_sqr(), 0.0)).collect();
            let conv = fft.convolve(&self.potential.values, &rho);
            interaction = 0.5
                * self.grid.cell_volume
                * rho.iter().zip(conv.iter()).map(|(r, c)| r.re * c.re).sum::<f64>();
        }

        let field: f64 = self
            .grid
            .retained_modes
            .iter()
            .zip(state.alpha.iter())
            .map(|(mode, a)| mode.weight * mode.k_abs * a.norm_sqr())
            .sum();

        kinetic + interaction + field
    }

    /// Largest stable explicit step, `≈ 2.8 / max|p|²` from the spectral
    /// radius of the kinetic term on this grid.
    pub fn stability_bound(&self) -> f64 {
        2.8 / self.grid.fft().max_p_sq()
    }

    /// One step of size `dt`: classical RK4 on `φ` jointly with a
    /// Lawson/integrating-factor RK4 on `α`, exact on the free rotation.
    pub fn step(&self, state: &EffectiveState, dt: f64) -> Result<EffectiveState, MsError> {
        if !(dt > 0.0) {
            return Err(MsError::NonPositiveStep(dt));
        }
        let n_modes = self.grid.n_modes();
        let omegas: Vec<f64> = self.grid.retained_modes.iter().map(|m| m.k_abs).collect();
        let phase = |c: f64, sign: f64| -> Vec<C64> {
            omegas.iter().map(|w| C64::from_polar(1.0, sign * w * c * dt)).collect()
        };
        let half_fwd = phase(0.5, 1.0); // e^{+i|k| dt/2}
        let full_fwd = phase(1.0, 1.0);
        let half_bwd = phase(0.5, -1.0); // e^{-i|k| dt/2}
        let full_bwd = phase(1.0, -1.0);

        let g = |phi: &[C64], alpha: &[C64]| -> Vec<C64> {
            // nonstiff part of dα/dt: +i S(φ, α)
            self.source_term(phi, alpha)
                .into_iter()
                .map(|s| C64::new(0.0, 1.0) * s)
                .collect::<Vec<C64>>()
        };

        let u0 = state.alpha.clone();
        let phi0 = &state.phi;

        // stage 1 (c = 0)
        let kphi1 = self.phi_derivative(phi0, &state.alpha);
        let ku1 = g(phi0, &state.alpha);

        // stage 2 (c = 1/2)
        let phi2: Vec<C64> = phi0.iter().zip(kphi1.iter()).map(|(p, k)| p + k * (0.5 * dt)).collect();
        let u2: Vec<C64> = u0.iter().zip(ku1.iter()).map(|(u, k)| u + k * (0.5 * dt)).collect();
        let alpha2: Vec<C64> = (0..n_modes).map(|m| u2[m] * half_bwd[m]).collect();
        let kphi2 = self.phi_derivative(&phi2, &alpha2);
        let g2 = g(&phi2, &alpha2);
        let ku2: Vec<C64> = (0..n_modes).map(|m| g2[m] * half_fwd[m]).collect();

        // stage 3 (c = 1/2)
        let phi3: Vec<C64> = phi0.iter().zip(kphi2.iter()).map(|(p, k)| p + k * (0.5 * dt)).collect();
        let u3: Vec<C64> = u0.iter().zip(ku2.iter()).map(|(u, k)| u + k * (0.5 * dt)).collect();
        let alpha3: Vec<C64> = (0..n_modes).map(|m| u3[m] * half_bwd[m]).collect();
        let kphi3 = self.phi_derivative(&phi3, &alpha3);
        let g3 = g(&phi3, &alpha3);
        let ku3: Vec<C64> = (0..n_modes).map(|m| g3[m] * half_fwd[m]).collect();

        // stage 4 (c = 1)
        let phi4: Vec<C64> = phi0.iter().zip(kphi3.iter()).map(|(p, k)| p + k * dt).collect();
        let u4: Vec<C64> = u0.iter().zip(ku3.iter()).map(|(u, k)| u + k * dt).collect();
        let alpha4: Vec<C64> = (0..n_modes).map(|m| u4[m] * full_bwd[m]).collect();
        let kphi4 = self.phi_derivative(&phi4, &alpha4);
        let g4 = g(&phi4, &alpha4);
        let ku4: Vec<C64> = (0..n_modes).map(|m| g4[m] * full_fwd[m]).collect();

        let phi_new: Vec<C64> = (0..phi0.len())
            .map(|x| phi0[x] + (kphi1[x] + (kphi2[x] + kphi3[x]) * 2.0 + kphi4[x]) * (dt / 6.0))
            .collect();
        let alpha_new: Vec<C64> = (0..n_modes)
            .map(|m| {
                let u = u0[m] + (ku1[m] + (ku2[m] + ku3[m]) * 2.0 + ku4[m]) * (dt / 6.0);
                u * full_bwd[m]
            })
            .collect();

        let drift = (l2_norm(&self.grid, &phi_new) - l2_norm(&self.grid, phi0)).abs();
        if drift > 1e-3 {
            return Err(MsError::Unstable {
                time: state.time,
                drift,
                dt,
                bound: self.stability_bound(),
            });
        }

        Ok(EffectiveState {
            phi: phi_new,
            alpha: alpha_new,
            time: state.time + dt,
        })
    }

    /// Conserved-quantity row for the trajectory ledger.
    pub fn ledger(&self, state: &EffectiveState) -> ConservationLedger {
        let a = reconstruct_a(&self.grid, &state.alpha, None);
        let div = self.grid.fft().divergence(&a);
        let a_scale = a
            .iter()
            .map(|v| vec3::norm(*v))
            .fold(0.0, f64::max);
        let k_scale = self
            .grid
            .retained_modes
            .iter()
            .map(|m| m.k_abs)
            .fold(0.0, f64::max);
        let div_max = div.iter().map(|v| v.norm()).fold(0.0, f64::max);
        ConservationLedger {
            time: state.time,
            energy: self.energy(state),
            l2_norm: l2_norm(&self.grid, &state.phi),
            div_a_residual: div_max / (1.0 + a_scale * k_scale),
            alpha_h_norm: self.grid.weighted_alpha_norm(&state.alpha, 0.0),
            alpha_h32_norm: self.grid.weighted_alpha_norm(&state.alpha, 1.5),
        }
    }

    /// Ground state of `-Δ + v∗|φ|²` by normalized imaginary-time descent.
    pub fn ground_state(&self, tol: f64, max_iter: usize) -> Result<Vec<C64>, MsError> {
        let grid = &self.grid;
        let fft = grid.fft();
        let n = grid.n_sites();
        let mut phi: Vec<C64> = (0..n)
            .map(|x| C64::new(1.0 + 0.1 * ((x as f64) * 0.7).cos(), 0.0))
            .collect();
        normalize(grid, &mut phi);
        let vmax = self.potential.values.iter().cloned().fold(0.0, f64::max);
        let tau = 1.0 / (fft.max_p_sq() + vmax * grid.box_length.powi(grid.dim as i32) + 1.0);
        let mut residual = f64::INFINITY;
        for _ in 0..max_iter {
            let hphi = self.hartree_hamiltonian(&phi);
            let mu = inner(grid, &phi, &hphi).re;
            residual = {
                let r: f64 = phi
                    .iter()
                    .zip(hphi.iter())
                    .map(|(p, h)| (h - p * mu).norm_sqr())
                    .sum();
                (r * grid.cell_volume).sqrt()
            };
            if residual <= tol {
                return Ok(phi);
            }
            for x in 0..n {
                phi[x] -= hphi[x] * tau;
            }
            normalize(grid, &mut phi);
        }
        Err(MsError::GroundStateDiverged { residual, iters: max_iter })
    }

    /// `(-Δ + v∗|φ|²) φ` (the `α = 0`, `κ = 0` generator).
    pub fn hartree_hamiltonian(&self, phi: &[C64]) -> Vec<C64> {
        let fft = self.grid.fft();
        let mut out = fft.neg_laplacian(phi);
        if !self.potential.is_zero() {
            let rho: Vec<C64> = phi.iter().map(|v| C64::new(v.norm_sqr(), 0.0)).collect();
            let conv = fft.convolve(&self.potential.values, &rho);
            for x in 0..phi.len() {
                out[x] += phi[x] * conv[x].re;
            }
        }
        out
    }
}

/// Anti-unitary time reversal: `φ → φ̄` and
/// `α(k,λ) → -p_λ(k) conj(α(-k,λ))` with `p_λ(k) = ε_λ(k)·ε_λ(-k)`, which
/// sends `A → -A` and `E → E` so that composing forward flow with reversal
/// on both sides inverts the dynamics.
pub fn time_reversal(grid: &ModelGrid, state: &EffectiveState) -> EffectiveState {
    let phi = state.phi.iter().map(|v| v.conj()).collect();
    let alpha = (0..grid.n_modes())
        .map(|m| {
            let j = grid.neg_partner(m);
            -state.alpha[j].conj() * grid.mode_parity(m)
        })
        .collect();
    EffectiveState {
        phi,
        alpha,
        time: -state.time,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DiscretizationConfig};

    fn grid1(n: usize, k_max: f64) -> Arc<ModelGrid> {
        Arc::new(
            build_grid(&DiscretizationConfig {
                dim: 1,
                sites_per_dim: n,
                box_length: 2.0 * std::f64::consts::PI,
                k_max,
            })
            .unwrap(),
        )
    }

    fn free_model(grid: &Arc<ModelGrid>) -> MsModel {
        MsModel::new(
            grid.clone(),
            ChargeDistribution::zero(grid),
            PairPotential::zero(grid),
        )
    }

    fn plane_wave(grid: &ModelGrid, m: i64) -> Vec<C64> {
        let vol = grid.box_length.powi(grid.dim as i32);
        grid.site_positions
            .iter()
            .map(|x| C64::from_polar(1.0 / vol.sqrt(), m as f64 * grid.dual_lattice_spacing * x[0]))
            .collect()
    }

    #[test]
    fn reconstruct_zero_alpha_is_zero() {
        let grid = grid1(8, 2.0);
        let alpha = vec![C64::new(0.0, 0.0); grid.n_modes()];
        let a = reconstruct_a(&grid, &alpha, None);
        assert!(a.iter().all(|v| v[0] == 0.0));
    }

    #[test]
    fn reconstruct_matches_two_term_hand_sum() {
        let grid = grid1(8, 1.0); // modes k = -1, +1, weight 1
        let c = C64::new(0.3, -0.4);
        // α(k=+1) = c, α(k=-1) = conj(c)
        let alpha = vec![c.conj(), c];
        let a = reconstruct_a(&grid, &alpha, None);
        let pref = (2.0 * std::f64::consts::PI).powf(-0.5);
        for (xi, x) in grid.site_positions.iter().enumerate() {
            // both modes contribute 2 Re(α e^{ikx}) / sqrt(2|k|); by symmetry
            // the two terms are equal, so the total is twice one of them.
            let w = 1.0;
            let term = 2.0 * (c * C64::from_polar(1.0, x[0])).re / (2.0f64).sqrt();
            let expect = pref * 2.0 * w * term;
            assert!((a[xi][0] - expect).abs() < 1e-13, "site {xi}");
        }
    }

    #[test]
    fn conjugation_relabeling_leaves_a_unchanged() {
        let grid = grid1(8, 2.0);
        let alpha: Vec<C64> = (0..grid.n_modes())
            .map(|m| C64::new(0.1 * m as f64 - 0.2, 0.3 * (m as f64).sin()))
            .collect();
        let relabeled: Vec<C64> = (0..grid.n_modes())
            .map(|m| alpha[grid.neg_partner(m)].conj())
            .collect();
        let a = reconstruct_a(&grid, &alpha, None);
        let b = reconstruct_a(&grid, &relabeled, None);
        for x in 0..grid.n_sites() {
            assert!((a[x][0] - b[x][0]).abs() < 1e-13);
        }
    }

    #[test]
    fn current_of_real_phi_without_field_vanishes() {
        let grid = grid1(8, 1.0);
        let model = free_model(&grid);
        let mut phi: Vec<C64> = grid
            .site_positions
            .iter()
            .map(|x| C64::new(1.0 + 0.3 * x[0].cos(), 0.0))
            .collect();
        normalize(&grid, &mut phi);
        let a = vec![[0.0; 3]; grid.n_sites()];
        let j = model.current(&phi, &a);
        for v in &j {
            assert!(v[0].abs() < 1e-13);
        }
    }

    #[test]
    fn plane_wave_current_is_uniform() {
        let grid = grid1(8, 1.0);
        let model = free_model(&grid);
        let phi = plane_wave(&grid, 2);
        let a = vec![[0.0; 3]; grid.n_sites()];
        let j = model.current(&phi, &a);
        let vol = grid.box_length;
        for v in &j {
            assert!((v[0] - 2.0 * 2.0 / vol).abs() < 1e-13);
        }
    }

    #[test]
    fn current_sum_equals_momentum_expectation() {
        let grid = grid1(8, 1.0);
        let model = free_model(&grid);
        let mut phi: Vec<C64> = grid
            .site_positions
            .iter()
            .map(|x| C64::new((0.9 * x[0]).cos() + 0.2, (1.3 * x[0]).sin() * 0.4))
            .collect();
        normalize(&grid, &mut phi);
        let a = vec![[0.0; 3]; grid.n_sites()];
        let j = model.current(&phi, &a);
        let sum_j: f64 = j.iter().map(|v| v[0]).sum::<f64>() * grid.cell_volume;
        // independent quadratic form: 2 ⟨φ, -i∂ φ⟩
        let grad = grid.fft().gradient(&phi);
        let p: C64 = inner(&grid, &phi, &grad[0]) * C64::new(0.0, -1.0);
        assert!(p.im.abs() < 1e-12);
        assert!((sum_j - 2.0 * p.re).abs() < 1e-12);
    }

    #[test]
    fn source_with_zero_current_is_free_rotation() {
        let grid = grid1(8, 1.0);
        let grid_model = MsModel::new(
            grid.clone(),
            ChargeDistribution::gaussian(&grid, 0.5, 1.0).unwrap(),
            PairPotential::zero(&grid),
        );
        let j = vec![[0.0; 3]; grid.n_sites()];
        let alpha: Vec<C64> = (0..grid.n_modes()).map(|m| C64::new(0.2 + m as f64, 0.1)).collect();
        let src = grid_model.source_term_from_current(&j);
        assert!(src.iter().all(|s| s.norm() < 1e-15));
        let rhs = {
            let s = grid_model.source_term_from_current(&j);
            grid
                .retained_modes
                .iter()
                .zip(alpha.iter().zip(s.iter()))
                .map(|(mode, (a, src))| a * mode.k_abs - src)
                .collect::<Vec<C64>>()
        };
        for (m, mode) in grid.retained_modes.iter().enumerate() {
            assert!((rhs[m] - alpha[m] * mode.k_abs).norm() < 1e-14);
        }
    }

    #[test]
    fn uniform_phi_without_interactions_is_stationary() {
        let grid = grid1(8, 1.0);
        let model = free_model(&grid);
        let mut phi: Vec<C64> = vec![C64::new(1.0, 0.0); grid.n_sites()];
        normalize(&grid, &mut phi);
        let state = EffectiveState {
            phi,
            alpha: vec![C64::new(0.0, 0.0); grid.n_modes()],
            time: 0.0,
        };
        let (dphi, dalpha) = model.rhs(&state);
        assert!(dphi.iter().all(|v| v.norm() < 1e-13));
        assert!(dalpha.iter().all(|v| v.norm() < 1e-13));
    }

    #[test]
    fn free_evolution_is_exact_on_modes_and_accurate_on_phi() {
        let grid = grid1(8, 2.0);
        let model = free_model(&grid);
        let phi = plane_wave(&grid, 1);
        let alpha: Vec<C64> = (0..grid.n_modes())
            .map(|m| C64::new(0.5 - 0.1 * m as f64, 0.2))
            .collect();
        let mut state = EffectiveState { phi: phi.clone(), alpha: alpha.clone(), time: 0.0 };
        let dt = 1e-2;
        let steps = 100;
        for _ in 0..steps {
            state = model.step(&state, dt).unwrap();
        }
        let t = dt * steps as f64;
        for (m, mode) in grid.retained_modes.iter().enumerate() {
            let expect = alpha[m] * C64::from_polar(1.0, -mode.k_abs * t);
            assert!((state.alpha[m] - expect).norm() < 1e-12, "mode {m}");
        }
        // φ picks up e^{-i p² t}
        let p = grid.dual_lattice_spacing;
        for x in 0..grid.n_sites() {
            let expect = phi[x] * C64::from_polar(1.0, -p * p * t);
            assert!((state.phi[x] - expect).norm() < 1e-8);
        }
    }

    #[test]
    fn step_is_fourth_order() {
        let grid = grid1(8, 1.0);
        let model = MsModel::new(
            grid.clone(),
            ChargeDistribution::gaussian(&grid, 0.6, 1.0).unwrap(),
            PairPotential::gaussian_well(&grid, 0.8, 0.5).unwrap(),
        );
        let mut phi: Vec<C64> = grid
            .site_positions
            .iter()
            .map(|x| C64::from_polar(1.0 + 0.2 * x[0].cos(), 0.5 * x[0].sin()))
            .collect();
        normalize(&grid, &mut phi);
        let alpha: Vec<C64> = vec![C64::new(0.3, -0.1); grid.n_modes()];
        let init = EffectiveState { phi, alpha, time: 0.0 };
        let t_final = 0.5;

        let run = |nsteps: usize| {
            let dt = t_final / nsteps as f64;
            let mut s = init.clone();
            for _ in 0..nsteps {
                s = model.step(&s, dt).unwrap();
            }
            s
        };
        let fine = run(512);
        let err = |s: &EffectiveState| {
            let mut e = 0.0f64;
            for x in 0..s.phi.len() {
                e = e.max((s.phi[x] - fine.phi[x]).norm());
            }
            e
        };
        let e1 = err(&run(32));
        let e2 = err(&run(64));
        let order = (e1 / e2).log2();
        assert!(order > 3.6 && order < 4.6, "observed order {order}");
    }

    #[test]
    fn time_reversal_inverts_the_flow() {
        let grid = grid1(8, 1.0);
        let model = MsModel::new(
            grid.clone(),
            ChargeDistribution::gaussian(&grid, 0.6, 1.0).unwrap(),
            PairPotential::gaussian_well(&grid, 0.8, 0.4).unwrap(),
        );
        let mut phi: Vec<C64> = grid
            .site_positions
            .iter()
            .map(|x| C64::from_polar(1.0 + 0.1 * (2.0 * x[0]).sin(), 0.7 * x[0].cos()))
            .collect();
        normalize(&grid, &mut phi);
        let alpha = vec![C64::new(0.25, 0.15); grid.n_modes()];
        let init = EffectiveState { phi, alpha, time: 0.0 };

        let round_trip = |dt: f64| {
            let fwd = model.step(&init, dt).unwrap();
            let rev = time_reversal(&grid, &fwd);
            let back = model.step(&rev, dt).unwrap();
            let again = time_reversal(&grid, &back);
            let mut e = 0.0f64;
            for x in 0..init.phi.len() {
                e = e.max((again.phi[x] - init.phi[x]).norm());
            }
            for m in 0..init.alpha.len() {
                e = e.max((again.alpha[m] - init.alpha[m]).norm());
            }
            e
        };
        let e1 = round_trip(0.02);
        let e2 = round_trip(0.01);
        assert!(e1 < 1e-6, "round trip error {e1}");
        // local error O(dt^5) per step pair
        let order = (e1 / e2).log2();
        assert!(order > 3.5, "reversal order {order}");
    }

    #[test]
    fn ground_state_is_stationary_up_to_phase() {
        let grid = grid1(8, 1.0);
        let model = MsModel::new(
            grid.clone(),
            ChargeDistribution::zero(&grid),
            PairPotential::gaussian_well(&grid, 0.9, 1.2).unwrap(),
        );
        let phi = model.ground_state(1e-11, 200_000).unwrap();
        let state = EffectiveState {
            phi: phi.clone(),
            alpha: vec![C64::new(0.0, 0.0); grid.n_modes()],
            time: 0.0,
        };
        let (dphi, _) = model.rhs(&state);
        // dφ/dt must be a pure phase rotation: project out the φ direction
        let overlap = inner(&grid, &phi, &dphi);
        let mut residual = 0.0f64;
        for x in 0..phi.len() {
            residual = residual.max((dphi[x] - phi[x] * overlap).norm());
        }
        assert!(residual < 1e-8, "orthogonal residual {residual}");
    }

    #[test]
    fn energy_of_plane_wave_is_p_squared() {
        let grid = grid1(8, 1.0);
        let model = free_model(&grid);
        let state = EffectiveState {
            phi: plane_wave(&grid, 2),
            alpha: vec![C64::new(0.0, 0.0); grid.n_modes()],
            time: 0.0,
        };
        assert!((model.energy(&state) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn field_energy_counts_mode_weights() {
        let grid = grid1(8, 1.0);
        let model = free_model(&grid);
        let mut alpha = vec![C64::new(0.0, 0.0); grid.n_modes()];
        alpha[1] = C64::new(0.6, -0.3); // k = +1, weight 1
        let state = EffectiveState {
            phi: plane_wave(&grid, 0),
            alpha,
            time: 0.0,
        };
        let expect = 1.0 * 1.0 * (0.6f64 * 0.6 + 0.3 * 0.3);
        assert!((model.energy(&state) - expect).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_step() {
        let grid = grid1(4, 1.0);
        let model = free_model(&grid);
        let state = EffectiveState {
            phi: plane_wave(&grid, 0),
            alpha: vec![C64::new(0.0, 0.0); grid.n_modes()],
            time: 0.0,
        };
        assert!(matches!(model.step(&state, 0.0), Err(MsError::NonPositiveStep(_))));
    }

    #[test]
    fn instability_detected_above_the_bound() {
        let grid = grid1(16, 1.0);
        let model = free_model(&grid);
        let mut phi: Vec<C64> = grid
            .site_positions
            .iter()
            .map(|x| C64::new((7.0 * x[0]).cos(), (8.0 * x[0]).sin()))
            .collect();
        normalize(&grid, &mut phi);
        let mut state = EffectiveState {
            phi,
            alpha: vec![C64::new(0.0, 0.0); grid.n_modes()],
            time: 0.0,
        };
        let dt = 10.0 * model.stability_bound();
        let mut failed = false;
        for _ in 0..200 {
            match model.step(&state, dt) {
                Ok(s) => state = s,
                Err(MsError::Unstable { .. }) => {
                    failed = true;
                    break;
                }
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        assert!(failed, "expected instability detection");
    }
}
