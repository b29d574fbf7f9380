//! Short-iterate Lanczos propagation `ψ(t) = e^{-iHt} ψ(0)` with adaptive
//! sub-stepping, plus the dense eigendecomposition oracle used to validate it
//! on small spaces.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::PfError;
use crate::C64;

use super::ops::{LinearOp, OperatorHandle};
use super::ManyBodyState;

const M_MAX: usize = 36;

#[derive(Debug, Clone, Copy, Default)]
pub struct EvolveReport {
    pub sub_steps: usize,
    pub max_krylov_dim: usize,
    /// Sum of the per-substep local error estimates.
    pub error_estimate: f64,
}

struct LanczosBasis {
    vectors: Vec<Vec<C64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// Norm of the residual after the last retained vector.
    beta_last: f64,
    happy: bool,
}

fn lanczos(op: &OperatorHandle, v0: &[C64], norm0: f64, m_max: usize) -> LanczosBasis {
    let dim = v0.len();
    let mut vectors: Vec<Vec<C64>> = Vec::with_capacity(m_max);
    let mut alpha = Vec::with_capacity(m_max);
    let mut beta: Vec<f64> = Vec::new();
    let mut happy = false;
    let mut beta_last = 0.0;

    let first: Vec<C64> = v0.iter().map(|z| z / norm0).collect();
    vectors.push(first);
    let mut w = vec![C64::new(0.0, 0.0); dim];
    for j in 0..m_max {
        op.apply(&vectors[j], &mut w);
        let aj: f64 = vectors[j]
            .iter()
            .zip(w.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        alpha.push(aj);
        for (x, v) in w.iter_mut().zip(vectors[j].iter()) {
            *x -= v * aj;
        }
        if j > 0 {
            let bj = beta[j - 1];
            for (x, v) in w.iter_mut().zip(vectors[j - 1].iter()) {
                *x -= v * bj;
            }
        }
        // full re-orthogonalization keeps the recurrence clean at tight
        // tolerances
        for v in vectors.iter() {
            let overlap: C64 = v.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum();
            for (x, vi) in w.iter_mut().zip(v.iter()) {
                *x -= vi * overlap;
            }
        }
        let bnext = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        beta_last = bnext;
        if bnext < 1e-13 * norm0.max(1.0) {
            happy = true;
            break;
        }
        if j + 1 == m_max {
            break;
        }
        beta.push(bnext);
        vectors.push(w.iter().map(|z| z / bnext).collect());
    }
    LanczosBasis { vectors, alpha, beta, beta_last, happy }
}

/// `e^{-i T dt} e₁` for the real symmetric tridiagonal `T`.
fn expv_tridiag(alpha: &[f64], beta: &[f64], dt: f64) -> Vec<C64> {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = t.symmetric_eigen();
    let q = &eig.eigenvectors;
    let mut u = vec![C64::new(0.0, 0.0); m];
    for j in 0..m {
        let phase = C64::from_polar(1.0, -eig.eigenvalues[j] * dt);
        let w = q[(0, j)];
        for (i, ui) in u.iter_mut().enumerate() {
            *ui += phase * (q[(i, j)] * w);
        }
    }
    u
}

/// Evolve by `e^{-iHt}` with per-substep residual control. The propagator
/// never renormalizes; unitarity drift stays within the error budget.
pub fn evolve(
    state: &ManyBodyState,
    h: &OperatorHandle,
    t: f64,
    tol: f64,
) -> Result<(ManyBodyState, EvolveReport), PfError> {
    if !h.hermitian {
        return Err(PfError::RequiresHermitian(h.name.clone()));
    }
    if h.dim() != state.amp.len() {
        return Err(PfError::DimensionMismatch { got: state.amp.len(), expected: h.dim() });
    }
    let mut out = state.clone();
    if t == 0.0 {
        return Ok((out, EvolveReport::default()));
    }
    let total = t.abs();
    let sign = t.signum();
    let min_dt = total * 1e-14;
    let mut remaining = total;
    let mut dt = total;
    let mut report = EvolveReport::default();

    while remaining > 0.0 {
        dt = dt.min(remaining);
        let norm0 = out.amp.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            break;
        }
        let basis = lanczos(h, &out.amp, norm0, M_MAX);
        let m = basis.alpha.len();
        report.max_krylov_dim = report.max_krylov_dim.max(m);

        let (u, err, dt_used) = loop {
            let u = expv_tridiag(&basis.alpha, &basis.beta, sign * dt);
            let err = if basis.happy {
                0.0
            } else {
                norm0 * basis.beta_last * u[m - 1].norm() * dt
            };
            if basis.happy || err <= tol * (dt / total) {
                break (u, err, dt);
            }
            dt *= 0.5;
            if dt < min_dt {
                return Err(PfError::KrylovBreakdown { min_dt });
            }
        };

        let mut next = vec![C64::new(0.0, 0.0); out.amp.len()];
        for (j, v) in basis.vectors.iter().enumerate() {
            let c = u[j] * norm0;
            for (n, vi) in next.iter_mut().zip(v.iter()) {
                *n += vi * c;
            }
        }
        out.amp = next;
        out.time += sign * dt_used;
        remaining -= dt_used;
        report.sub_steps += 1;
        report.error_estimate += err;
        dt = (dt_used * 2.0).min(remaining.max(min_dt));
    }
    Ok((out, report))
}

/// Dense matrix-exponential action via Hermitian eigendecomposition,
/// refused above `max_dim`.
pub fn dense_expm_apply(
    h: &OperatorHandle,
    x: &[C64],
    t: f64,
    max_dim: usize,
) -> Result<Vec<C64>, PfError> {
    if !h.hermitian {
        return Err(PfError::RequiresHermitian(h.name.clone()));
    }
    let dense = h.to_dense(max_dim)?;
    let eig = dense.symmetric_eigen();
    let v = DVector::<C64>::from_column_slice(x);
    let coeffs = eig.eigenvectors.adjoint() * v;
    let mut rotated = coeffs;
    for (i, c) in rotated.iter_mut().enumerate() {
        *c *= C64::from_polar(1.0, -eig.eigenvalues[i] * t);
    }
    let y = &eig.eigenvectors * rotated;
    Ok(y.iter().cloned().collect())
}

/// Wrap a dense matrix as a [`LinearOp`] (oracle and test helper).
pub struct DenseOp(pub DMatrix<C64>);

impl LinearOp for DenseOp {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let v = DVector::<C64>::from_column_slice(x);
        let out = &self.0 * v;
        y.copy_from_slice(out.as_slice());
    }
}

impl DenseOp {
    pub fn into_handle(self, name: &str, hermitian: bool) -> OperatorHandle {
        OperatorHandle::new(name, hermitian, false, Arc::new(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DiscretizationConfig};
    use crate::pf::{FockTruncation, PfSpace};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(dim: usize, seed: u64) -> DMatrix<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..=i {
                let v = C64::new(rng.random::<f64>() - 0.5, if i == j { 0.0 } else { rng.random::<f64>() - 0.5 });
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
            }
        }
        m
    }

    fn toy_state(dim: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<C64> = (0..dim)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= n);
        v
    }

    fn wrap_state(space: &std::sync::Arc<PfSpace>, amp: Vec<C64>) -> ManyBodyState {
        ManyBodyState { space: space.clone(), amp, time: 0.0 }
    }

    fn small_space() -> std::sync::Arc<PfSpace> {
        let grid = std::sync::Arc::new(
            build_grid(&DiscretizationConfig {
                dim: 1,
                sites_per_dim: 4,
                box_length: 2.0 * std::f64::consts::PI,
                k_max: 1.0,
            })
            .unwrap(),
        );
        PfSpace::new(grid, 2, FockTruncation::new(2), 1_000_000).unwrap()
    }

    #[test]
    fn eigenvector_picks_up_a_phase() {
        let space = small_space();
        let dim = space.dim();
        let m = random_hermitian(dim, 3);
        let eig = m.clone().symmetric_eigen();
        let h = DenseOp(m).into_handle("dense", true);
        let v0: Vec<C64> = eig.eigenvectors.column(0).iter().cloned().collect();
        let lambda = eig.eigenvalues[0];
        let t = 0.83;
        let (out, _) = evolve(&wrap_state(&space, v0.clone()), &h, t, 1e-12).unwrap();
        let phase = C64::from_polar(1.0, -lambda * t);
        for (a, b) in out.amp.iter().zip(v0.iter()) {
            assert!((a - b * phase).norm() < 1e-10);
        }
    }

    #[test]
    fn krylov_matches_dense_oracle() {
        let space = small_space();
        let dim = space.dim();
        let h = DenseOp(random_hermitian(dim, 11)).into_handle("dense", true);
        let psi0 = toy_state(dim, 5);
        let t = 1.3;
        let (krylov, report) = evolve(&wrap_state(&space, psi0.clone()), &h, t, 1e-11).unwrap();
        let dense = dense_expm_apply(&h, &psi0, t, 4000).unwrap();
        let mut worst = 0.0f64;
        for (a, b) in krylov.amp.iter().zip(dense.iter()) {
            worst = worst.max((a - b).norm());
        }
        assert!(worst < 1e-9, "discrepancy {worst}, report {report:?}");
        let norm = krylov.amp.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-10);
    }

    #[test]
    fn backwards_evolution_returns_home() {
        let space = small_space();
        let dim = space.dim();
        let h = DenseOp(random_hermitian(dim, 21)).into_handle("dense", true);
        let psi0 = toy_state(dim, 9);
        let (fwd, _) = evolve(&wrap_state(&space, psi0.clone()), &h, 0.9, 1e-12).unwrap();
        let (back, _) = evolve(&fwd, &h, -0.9, 1e-12).unwrap();
        for (a, b) in back.amp.iter().zip(psi0.iter()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let space = small_space();
        let dim = space.dim();
        let mut m = random_hermitian(dim, 2);
        m[(0, 1)] += C64::new(0.3, 0.0);
        let h = DenseOp(m).into_handle("skew", false);
        let psi0 = toy_state(dim, 1);
        assert!(matches!(
            evolve(&wrap_state(&space, psi0), &h, 0.1, 1e-10),
            Err(PfError::RequiresHermitian(_))
        ));
    }
}
