//! Discrete Fourier machinery for the periodic lattice.
//!
//! Conventions, fixed once and shared by both solvers:
//!
//! * sites `x = i·h` with `h = L/n`, flat row-major index, axis 0 slowest;
//! * dual lattice `k = (2π/L)·m` with integer `m`; bin `b` of the DFT holds
//!   `m ≡ b (mod n)`;
//! * the continuum transform `F[f](k) = (2π)^{-d/2} ∫ f e^{-ikx}` is
//!   approximated by `(2π)^{-d/2} h^d Σ_x f(x) e^{-ikx}`, i.e. by
//!   `(2π)^{-d/2} h^d · dft(f)[bin(m)]`;
//! * first-derivative multipliers zero the unpaired Nyquist bin so that the
//!   spectral momentum operator is Hermitian and maps real fields to real
//!   fields; the Laplacian keeps the full `|p|²` multiplier.

use std::sync::Arc;

use rustfft::{Fft, FftDirection, FftPlanner};

use crate::C64;

#[derive(Clone)]
pub struct LatticeFft {
    dim: usize,
    n: usize,
    len: usize,
    box_length: f64,
    spacing: f64,
    cell_volume: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Integer frequency per bin, Nyquist mapped to -n/2.
    freq_int: Vec<i64>,
    /// First-derivative momentum per bin (Nyquist zeroed).
    grad_p: Vec<f64>,
    /// `|p|²` per flat dual index (full multiplier).
    lap: Vec<f64>,
}

impl std::fmt::Debug for LatticeFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LatticeFft")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("box_length", &self.box_length)
            .finish()
    }
}

impl LatticeFft {
    pub fn new(dim: usize, sites_per_dim: usize, box_length: f64) -> Self {
        assert!(dim == 1 || dim == 3, "lattice dimension must be 1 or 3");
        assert!(sites_per_dim >= 2);
        let n = sites_per_dim;
        let len = n.pow(dim as u32);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft(n, FftDirection::Forward);
        let inv = planner.plan_fft(n, FftDirection::Inverse);
        let dual = 2.0 * std::f64::consts::PI / box_length;
        let freq_int: Vec<i64> = (0..n)
            .map(|b| if b <= (n - 1) / 2 { b as i64 } else { b as i64 - n as i64 })
            .collect();
        let grad_p: Vec<f64> = (0..n)
            .map(|b| {
                if n % 2 == 0 && b == n / 2 {
                    0.0
                } else {
                    dual * freq_int[b] as f64
                }
            })
            .collect();
        let mut lap = vec![0.0; len];
        for (idx, l) in lap.iter_mut().enumerate() {
            let mut rest = idx;
            let mut acc = 0.0;
            for axis in (0..dim).rev() {
                let _ = axis;
                let b = rest % n;
                rest /= n;
                let p = dual * freq_int[b] as f64;
                acc += p * p;
            }
            *l = acc;
        }
        let spacing = box_length / n as f64;
        LatticeFft {
            dim,
            n,
            len,
            box_length,
            spacing,
            cell_volume: spacing.powi(dim as i32),
            fwd,
            inv,
            freq_int,
            grad_p,
            lap,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sites_per_dim(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// Largest `|p|²` on the full dual lattice (sets the explicit-step bound).
    pub fn max_p_sq(&self) -> f64 {
        self.lap.iter().cloned().fold(0.0, f64::max)
    }

    fn transform_axes(&self, data: &mut [C64], forward: bool) {
        assert_eq!(data.len(), self.len);
        let plan = if forward { &self.fwd } else { &self.inv };
        let mut lane = vec![C64::new(0.0, 0.0); self.n];
        for axis in 0..self.dim {
            let stride = self.n.pow((self.dim - 1 - axis) as u32);
            for base in 0..self.len {
                // `base` enumerates lane heads: indices whose coordinate along
                // `axis` is zero.
                if (base / stride) % self.n != 0 {
                    continue;
                }
                for j in 0..self.n {
                    lane[j] = data[base + j * stride];
                }
                plan.process(&mut lane);
                for j in 0..self.n {
                    data[base + j * stride] = lane[j];
                }
            }
        }
    }

    /// Unnormalized forward DFT: `out[b] = Σ_x f(x) e^{-i k_b x}`.
    pub fn dft(&self, data: &mut [C64]) {
        self.transform_axes(data, true);
    }

    /// Inverse of [`dft`](Self::dft), including the `1/n^d` factor.
    pub fn idft(&self, data: &mut [C64]) {
        self.transform_axes(data, false);
        let scale = 1.0 / self.len as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// Flat dual index of the integer mode vector `m` (aliased into range).
    pub fn mode_bin(&self, m: [i64; 3]) -> usize {
        let n = self.n as i64;
        let mut idx = 0usize;
        for axis in 0..self.dim {
            let b = m[axis].rem_euclid(n) as usize;
            idx = idx * self.n + b;
        }
        idx
    }

    /// Spectral gradient; the unpaired Nyquist bin does not contribute.
    pub fn gradient(&self, f: &[C64]) -> [Vec<C64>; 3] {
        let mut hat = f.to_vec();
        self.dft(&mut hat);
        let mut out: [Vec<C64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for (axis, slot) in out.iter_mut().enumerate().take(self.dim) {
            let stride = self.n.pow((self.dim - 1 - axis) as u32);
            let mut g = hat.clone();
            for (idx, v) in g.iter_mut().enumerate() {
                let b = (idx / stride) % self.n;
                *v *= C64::new(0.0, self.grad_p[b]);
            }
            self.idft(&mut g);
            *slot = g;
        }
        for slot in out.iter_mut().skip(self.dim) {
            *slot = vec![C64::new(0.0, 0.0); self.len];
        }
        out
    }

    /// `(-Δ f)(x)` with the full `|p|²` Fourier multiplier.
    pub fn neg_laplacian(&self, f: &[C64]) -> Vec<C64> {
        let mut hat = f.to_vec();
        self.dft(&mut hat);
        for (idx, v) in hat.iter_mut().enumerate() {
            *v *= self.lap[idx];
        }
        self.idft(&mut hat);
        hat
    }

    /// Divergence of a vector field with Nyquist-zeroed multipliers.
    pub fn divergence(&self, field: &[[f64; 3]]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.len];
        for axis in 0..self.dim {
            let comp: Vec<C64> = field.iter().map(|v| C64::new(v[axis], 0.0)).collect();
            let mut hat = comp;
            self.dft(&mut hat);
            let stride = self.n.pow((self.dim - 1 - axis) as u32);
            for (idx, v) in hat.iter_mut().enumerate() {
                let b = (idx / stride) % self.n;
                *v *= C64::new(0.0, self.grad_p[b]);
            }
            self.idft(&mut hat);
            for (o, v) in out.iter_mut().zip(hat.iter()) {
                *o += v;
            }
        }
        out
    }

    /// Periodic lattice convolution `(v ∗ ρ)(x) = h^d Σ_y v(x-y) ρ(y)`,
    /// with `v` given by its values on relative displacements.
    pub fn convolve(&self, v_table: &[f64], rho: &[C64]) -> Vec<C64> {
        assert_eq!(v_table.len(), self.len);
        assert_eq!(rho.len(), self.len);
        let mut vh: Vec<C64> = v_table.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.dft(&mut vh);
        let mut rh = rho.to_vec();
        self.dft(&mut rh);
        for (a, b) in rh.iter_mut().zip(vh.iter()) {
            *a *= b;
        }
        self.idft(&mut rh);
        for a in rh.iter_mut() {
            *a *= self.cell_volume;
        }
        rh
    }

    /// Continuum-convention Fourier coefficient of `f` at integer mode `m`:
    /// `(2π)^{-d/2} h^d Σ_x f(x) e^{-ikx}` read off the appropriate DFT bin.
    pub fn continuum_coeffs(&self, f: &[C64], modes: &[[i64; 3]]) -> Vec<C64> {
        let mut hat = f.to_vec();
        self.dft(&mut hat);
        let norm = self.cell_volume / (2.0 * std::f64::consts::PI).powf(self.dim as f64 / 2.0);
        modes
            .iter()
            .map(|&m| hat[self.mode_bin(m)] * norm)
            .collect()
    }
}
