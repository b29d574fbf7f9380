//! Matrix-free operators on the truncated space: per-mode ladder operators,
//! the smeared field `Â_κ(x)`, field energy and photon number, and the full
//! minimal-coupling Hamiltonian
//!
//! ```text
//! H_N = Σ_j (-i∇_j - N^{-1/2} Â_κ(x_j))² + N^{-1} Σ_{j<k} v(x_j - x_k) + H_f .
//! ```

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::charge::ChargeDistribution;
use crate::coupling::CouplingTable;
use crate::error::PfError;
use crate::grid::ModelGrid;
use crate::potential::PairPotential;
use crate::C64;

use super::{acc_annihilate, acc_create, FockShape, PfSpace};

/// A linear operator on the truncated space, applied out-of-place.
pub trait LinearOp: Send + Sync {
    fn dim(&self) -> usize;
    /// `y = O x`; `y` is overwritten.
    fn apply(&self, x: &[C64], y: &mut [C64]);
}

/// Named operator with verified structural flags.
#[derive(Clone)]
pub struct OperatorHandle {
    pub name: String,
    pub hermitian: bool,
    pub particle_symmetric: bool,
    op: Arc<dyn LinearOp>,
}

impl std::fmt::Debug for OperatorHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorHandle")
            .field("name", &self.name)
            .field("hermitian", &self.hermitian)
            .field("dim", &self.op.dim())
            .finish()
    }
}

impl OperatorHandle {
    pub fn new(
        name: impl Into<String>,
        hermitian: bool,
        particle_symmetric: bool,
        op: Arc<dyn LinearOp>,
    ) -> Self {
        OperatorHandle {
            name: name.into(),
            hermitian,
            particle_symmetric,
            op,
        }
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.op.apply(x, y);
    }

    pub fn apply_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        self.op.apply(x, &mut y);
        y
    }

    /// `⟨x, O x⟩`.
    pub fn expectation(&self, x: &[C64]) -> C64 {
        let y = self.apply_vec(x);
        x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// Largest relative defect of `⟨u, Ov⟩ = ⟨Ou, v⟩` over seeded random
    /// vector pairs.
    pub fn hermiticity_defect(&self, seed: u64, trials: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = self.dim();
        let mut worst = 0.0f64;
        for _ in 0..trials {
            let u: Vec<C64> = (0..dim)
                .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let v: Vec<C64> = (0..dim)
                .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let ov = self.apply_vec(&v);
            let ou = self.apply_vec(&u);
            let lhs: C64 = u.iter().zip(ov.iter()).map(|(a, b)| a.conj() * b).sum();
            let rhs: C64 = ou.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
            let scale: f64 = ov.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
                * u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
                + 1.0;
            worst = worst.max((lhs - rhs).norm() / scale);
        }
        worst
    }

    pub fn verify_hermitian(&self, seed: u64, trials: usize, tol: f64) -> Result<f64, PfError> {
        let defect = self.hermiticity_defect(seed, trials);
        if defect > tol {
            return Err(PfError::NotHermitian(self.name.clone(), defect));
        }
        Ok(defect)
    }

    /// Dense matrix, refused above `max_dim`.
    pub fn to_dense(&self, max_dim: usize) -> Result<DMatrix<C64>, PfError> {
        let dim = self.dim();
        if dim > max_dim {
            return Err(PfError::BudgetExceeded { dim, budget: max_dim });
        }
        let mut mat = DMatrix::<C64>::zeros(dim, dim);
        let mut unit = vec![C64::new(0.0, 0.0); dim];
        let mut col = vec![C64::new(0.0, 0.0); dim];
        for j in 0..dim {
            unit[j] = C64::new(1.0, 0.0);
            self.op.apply(&unit, &mut col);
            for i in 0..dim {
                mat[(i, j)] = col[i];
            }
            unit[j] = C64::new(0.0, 0.0);
        }
        Ok(mat)
    }
}

/// One-body kinetic (`|p|²` multiplier) and momentum matrices in the
/// orthonormal site basis, shared verbatim with the effective solver's
/// spectral derivatives.
pub fn one_body_matrices(grid: &ModelGrid) -> (Vec<C64>, [Vec<C64>; 3]) {
    let ns = grid.n_sites();
    let fft = grid.fft();
    let mut kinetic = vec![C64::new(0.0, 0.0); ns * ns];
    let mut momentum: [Vec<C64>; 3] = [
        vec![C64::new(0.0, 0.0); ns * ns],
        vec![C64::new(0.0, 0.0); ns * ns],
        vec![C64::new(0.0, 0.0); ns * ns],
    ];
    let mut unit = vec![C64::new(0.0, 0.0); ns];
    for y in 0..ns {
        unit[y] = C64::new(1.0, 0.0);
        let lap = fft.neg_laplacian(&unit);
        for x in 0..ns {
            kinetic[x * ns + y] = lap[x];
        }
        let grad = fft.gradient(&unit);
        for (axis, g) in grad.iter().enumerate().take(grid.dim) {
            for x in 0..ns {
                // P = -i ∇
                momentum[axis][x * ns + y] = C64::new(0.0, -1.0) * g[x];
            }
        }
        unit[y] = C64::new(0.0, 0.0);
    }
    (kinetic, momentum)
}

struct ModeLadderOp {
    space: Arc<PfSpace>,
    mode: usize,
    raise: bool,
}

impl LinearOp for ModeLadderOp {
    fn dim(&self) -> usize {
        self.space.dim()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.fill(C64::new(0.0, 0.0));
        let one = C64::new(1.0, 0.0);
        if self.raise {
            acc_create(&self.space.fock, self.mode, one, x, y);
        } else {
            acc_annihilate(&self.space.fock, self.mode, one, x, y);
        }
    }
}

/// Per-mode truncated ladder operators `(a, a†)` in deterministic mode order.
pub fn ladder_ops(space: &Arc<PfSpace>) -> Vec<(OperatorHandle, OperatorHandle)> {
    (0..space.grid.n_modes())
        .map(|mode| {
            let a = OperatorHandle::new(
                format!("a[{mode}]"),
                false,
                true,
                Arc::new(ModeLadderOp { space: space.clone(), mode, raise: false }),
            );
            let adag = OperatorHandle::new(
                format!("a_dag[{mode}]"),
                false,
                true,
                Arc::new(ModeLadderOp { space: space.clone(), mode, raise: true }),
            );
            (a, adag)
        })
        .collect()
}

struct FockDiagOp {
    space: Arc<PfSpace>,
    diag: Vec<f64>,
}

impl LinearOp for FockDiagOp {
    fn dim(&self) -> usize {
        self.space.dim()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let fdim = self.space.fock.dim;
        for (i, (xv, yv)) in x.iter().zip(y.iter_mut()).enumerate() {
            *yv = xv * self.diag[i % fdim];
        }
    }
}

/// One Hermitian component of the smeared field,
/// `Â_dir(x) = Σ_m sqrt(w) [ conj(G_{x,m,dir}) a_m + G_{x,m,dir} a†_m ]`.
pub struct SiteFieldOp {
    space: Arc<PfSpace>,
    /// `(annihilation, creation)` coefficient per mode.
    coeffs: Vec<(C64, C64)>,
}

impl SiteFieldOp {
    pub fn accumulate(&self, scale: C64, x: &[C64], y: &mut [C64]) {
        for (m, &(ca, cc)) in self.coeffs.iter().enumerate() {
            acc_annihilate(&self.space.fock, m, scale * ca, x, y);
            acc_create(&self.space.fock, m, scale * cc, x, y);
        }
    }
}

impl LinearOp for SiteFieldOp {
    fn dim(&self) -> usize {
        self.space.dim()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.fill(C64::new(0.0, 0.0));
        self.accumulate(C64::new(1.0, 0.0), x, y);
    }
}

/// Field operators over the whole lattice plus the photon diagonals.
pub struct FieldOps {
    /// `Â_dir(x)`, indexed `site * dim + dir`.
    pub a_hat: Vec<OperatorHandle>,
    pub h_f: OperatorHandle,
    pub number: OperatorHandle,
}

/// Coefficient tables `sqrt(w) G_x(m)` used by the field operators.
fn field_coefficients(
    space: &Arc<PfSpace>,
    kappa: &ChargeDistribution,
) -> Result<Vec<[C64; 3]>, PfError> {
    let table = CouplingTable::build(&space.grid, kappa)
        .map_err(|_| PfError::DimensionMismatch { got: kappa.fourier_values.len(), expected: space.grid.n_modes() })?;
    let mut out = Vec::with_capacity(space.grid.n_sites() * space.grid.n_modes());
    for x in 0..space.grid.n_sites() {
        for (m, mode) in space.grid.retained_modes.iter().enumerate() {
            let g = table.g(x, m);
            let s = mode.weight.sqrt();
            out.push([g[0] * s, g[1] * s, g[2] * s]);
        }
    }
    Ok(out)
}

/// `Â_κ(x)` per site and direction, `H_f = Σ_m |k_m| a†_m a_m`, and the
/// photon number `𝒩 = Σ_m a†_m a_m` (the mode dictionary cancels the
/// quadrature weights in both diagonals).
pub fn build_field_ops(
    space: &Arc<PfSpace>,
    kappa: &ChargeDistribution,
) -> Result<FieldOps, PfError> {
    let coeffs = field_coefficients(space, kappa)?;
    let n_modes = space.grid.n_modes();
    let mut a_hat = Vec::with_capacity(space.grid.n_sites() * space.grid.dim);
    for x in 0..space.grid.n_sites() {
        for dir in 0..space.grid.dim {
            let per_mode: Vec<(C64, C64)> = (0..n_modes)
                .map(|m| {
                    let g = coeffs[x * n_modes + m][dir];
                    (g.conj(), g)
                })
                .collect();
            a_hat.push(OperatorHandle::new(
                format!("A_hat[site={x},dir={dir}]"),
                true,
                true,
                Arc::new(SiteFieldOp { space: space.clone(), coeffs: per_mode }),
            ));
        }
    }
    let fdim = space.fock.dim;
    let mut hf_diag = vec![0.0; fdim];
    let mut n_diag = vec![0.0; fdim];
    for f in 0..fdim {
        let mut e = 0.0;
        for (m, mode) in space.grid.retained_modes.iter().enumerate() {
            e += mode.k_abs * space.fock.digit(f, m) as f64;
        }
        hf_diag[f] = e;
        n_diag[f] = space.fock.total_occupation(f) as f64;
    }
    let h_f = OperatorHandle::new(
        "H_f",
        true,
        true,
        Arc::new(FockDiagOp { space: space.clone(), diag: hf_diag }),
    );
    let number = OperatorHandle::new(
        "N_photon",
        true,
        true,
        Arc::new(FockDiagOp { space: space.clone(), diag: n_diag }),
    );
    Ok(FieldOps { a_hat, h_f, number })
}

/// Auxiliary-field route to the same operator: `Â_κ(x)` assembled as
/// `-i (η ∗ F̂⁺)(x) + i (η ∗ F̂⁻)(x)` with `F[η](k) = (2π)^{-d/2} |k|^{-1/2}
/// F[κ](k)`, built directly from the mode geometry rather than the coupling
/// table. Used to cross-check the production field operators.
pub fn aux_field_op(
    space: &Arc<PfSpace>,
    kappa: &ChargeDistribution,
    site: usize,
    dir: usize,
) -> OperatorHandle {
    let grid = &space.grid;
    let x = grid.site_positions[site];
    let coeffs: Vec<(C64, C64)> = grid
        .retained_modes
        .iter()
        .zip(kappa.fourier_values.iter())
        .map(|(mode, &f)| {
            let w = mode.weight;
            let phase = C64::from_polar(1.0, crate::vec3::dot(mode.k, x));
            // -i (η∗F̂⁺): -i · (i/√2) Σ w ε e^{ikx} |k|^{-1/2} F (a_m/√w)
            let ca = phase * (w.sqrt() * mode.epsilon[dir] * f
                / (2.0f64.sqrt() * mode.k_abs.sqrt()));
            // +i (η∗F̂⁻): +i · (-i/√2) Σ w ε e^{-ikx} |k|^{-1/2} F (a†_m/√w)
            let cc = phase.conj()
                * (w.sqrt() * mode.epsilon[dir] * f / (2.0f64.sqrt() * mode.k_abs.sqrt()));
            (ca, cc)
        })
        .collect();
    OperatorHandle::new(
        format!("A_hat_aux[site={site},dir={dir}]"),
        true,
        true,
        Arc::new(SiteFieldOp { space: space.clone(), coeffs }),
    )
}

/// The truncated minimal-coupling Hamiltonian, applied matrix-free.
pub struct Hamiltonian {
    space: Arc<PfSpace>,
    kinetic: Vec<C64>,
    /// Cross-term ladder coefficients per `(site_x, site_y, mode)`, with the
    /// `-N^{-1/2} P_dir[x,y]` factors folded in.
    cross: Vec<(C64, C64)>,
    /// Field coefficients per `(site, dir, mode)` for the diamagnetic square.
    site_field: Vec<(C64, C64)>,
    hf_diag: Vec<f64>,
    pair_diag: Vec<f64>,
    inv_n: f64,
    has_coupling: bool,
}

impl Hamiltonian {
    pub fn new(
        space: Arc<PfSpace>,
        kappa: &ChargeDistribution,
        potential: &PairPotential,
    ) -> Result<Self, PfError> {
        let grid = &space.grid;
        let ns = grid.n_sites();
        let n_modes = grid.n_modes();
        let n = space.n_particles() as f64;
        let (kinetic, momentum) = one_body_matrices(grid);

        let has_coupling = !kappa.is_zero();
        let mut cross = vec![(C64::new(0.0, 0.0), C64::new(0.0, 0.0)); ns * ns * n_modes];
        let mut site_field = vec![(C64::new(0.0, 0.0), C64::new(0.0, 0.0)); ns * 3 * n_modes];
        if has_coupling {
            let coeffs = field_coefficients(&space, kappa)?;
            let c = 1.0 / n.sqrt();
            for sx in 0..ns {
                for sy in 0..ns {
                    for m in 0..n_modes {
                        let mut ca = C64::new(0.0, 0.0);
                        let mut cc = C64::new(0.0, 0.0);
                        for dir in 0..grid.dim {
                            let p = momentum[dir][sx * ns + sy];
                            if p == C64::new(0.0, 0.0) {
                                continue;
                            }
                            let gx = coeffs[sx * n_modes + m][dir];
                            let gy = coeffs[sy * n_modes + m][dir];
                            ca += p * (gx.conj() + gy.conj());
                            cc += p * (gx + gy);
                        }
                        cross[(sx * ns + sy) * n_modes + m] = (ca * (-c), cc * (-c));
                    }
                }
            }
            for s in 0..ns {
                for dir in 0..grid.dim {
                    for m in 0..n_modes {
                        let g = coeffs[s * n_modes + m][dir];
                        site_field[(s * 3 + dir) * n_modes + m] = (g.conj(), g);
                    }
                }
            }
        }

        let fdim = space.fock.dim;
        let mut hf_diag = vec![0.0; fdim];
        for (f, hf) in hf_diag.iter_mut().enumerate() {
            let mut e = 0.0;
            for (m, mode) in grid.retained_modes.iter().enumerate() {
                e += mode.k_abs * space.fock.digit(f, m) as f64;
            }
            *hf = e;
        }

        let mut pair_diag = vec![0.0; space.basis.len()];
        if !potential.is_zero() {
            for (p, config) in space.basis.configs.iter().enumerate() {
                let mut acc = 0.0;
                for (x, &mx) in config.iter().enumerate() {
                    if mx == 0 {
                        continue;
                    }
                    for (y, &my) in config.iter().enumerate() {
                        if my == 0 {
                            continue;
                        }
                        acc += potential.at_displacement(grid, x, y) * (mx as f64) * (my as f64);
                    }
                }
                acc -= potential.values[0] * n;
                pair_diag[p] = acc / (2.0 * n);
            }
        }

        Ok(Hamiltonian {
            space,
            kinetic,
            cross,
            site_field,
            hf_diag,
            pair_diag,
            inv_n: 1.0 / n,
            has_coupling,
        })
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let space = &self.space;
        let shape = &space.fock;
        let fdim = shape.dim;
        let ns = space.grid.n_sites();
        let n_modes = space.grid.n_modes();
        let pdim = space.basis.len();
        let zero = C64::new(0.0, 0.0);
        y.fill(zero);

        // photon energy + pair potential (diagonal)
        for p in 0..pdim {
            let row = &x[p * fdim..(p + 1) * fdim];
            let out = &mut y[p * fdim..(p + 1) * fdim];
            let vp = self.pair_diag[p];
            for f in 0..fdim {
                out[f] += row[f] * (self.hf_diag[f] + vp);
            }
        }

        // one-body kinetic hops
        for p in 0..pdim {
            let row = p * fdim;
            for sx in 0..ns {
                for sy in 0..ns {
                    let t = self.kinetic[sx * ns + sy];
                    if t == zero {
                        continue;
                    }
                    let (target, amp) = space.basis.hop(p, sx, sy);
                    if amp == 0.0 {
                        continue;
                    }
                    let c = t * amp;
                    let dst = target * fdim;
                    for f in 0..fdim {
                        y[dst + f] += c * x[row + f];
                    }
                }
            }
        }

        if self.has_coupling {
            // paramagnetic cross term
            for p in 0..pdim {
                let row = p * fdim;
                for sx in 0..ns {
                    for sy in 0..ns {
                        let (target, amp) = space.basis.hop(p, sx, sy);
                        if amp == 0.0 {
                            continue;
                        }
                        let base = (sx * ns + sy) * n_modes;
                        let dst = target * fdim;
                        let src = &x[row..row + fdim];
                        let out = &mut y[dst..dst + fdim];
                        for m in 0..n_modes {
                            let (ca, cc) = self.cross[base + m];
                            acc_annihilate(shape, m, ca * amp, src, out);
                            acc_create(shape, m, cc * amp, src, out);
                        }
                    }
                }
            }

            // diamagnetic square, (1/N) Σ_s n̂_s ⊗ Â(s)²
            let mut t1 = vec![zero; fdim];
            for p in 0..pdim {
                let row = p * fdim;
                let config = &space.basis.configs[p];
                for (s, &occ) in config.iter().enumerate() {
                    if occ == 0 {
                        continue;
                    }
                    let scale = C64::new(self.inv_n * occ as f64, 0.0);
                    for dir in 0..space.grid.dim {
                        let base = (s * 3 + dir) * n_modes;
                        t1.fill(zero);
                        let src = &x[row..row + fdim];
                        for m in 0..n_modes {
                            let (ca, cc) = self.site_field[base + m];
                            acc_annihilate(shape, m, ca, src, &mut t1);
                            acc_create(shape, m, cc, src, &mut t1);
                        }
                        let out = &mut y[row..row + fdim];
                        for m in 0..n_modes {
                            let (ca, cc) = self.site_field[base + m];
                            acc_annihilate(shape, m, ca * scale, &t1, out);
                            acc_create(shape, m, cc * scale, &t1, out);
                        }
                    }
                }
            }
        }
    }
}

impl LinearOp for Hamiltonian {
    fn dim(&self) -> usize {
        self.space.dim()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.apply_into(x, y);
    }
}

/// Assemble `H_N` and verify Hermiticity on seeded random vectors.
pub fn build_hamiltonian(
    space: &Arc<PfSpace>,
    kappa: &ChargeDistribution,
    potential: &PairPotential,
) -> Result<OperatorHandle, PfError> {
    let h = Hamiltonian::new(space.clone(), kappa, potential)?;
    let handle = OperatorHandle::new(
        format!("H_N[N={}]", space.n_particles()),
        true,
        true,
        Arc::new(h),
    );
    handle.verify_hermitian(0x5eed_0001, 3, 1e-12)?;
    Ok(handle)
}
