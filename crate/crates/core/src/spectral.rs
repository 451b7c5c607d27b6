//! Pseudo-spectral operators on the periodic box.
//!
//! Every linear operator here is diagonal in Fourier space: the Helmholtz
//! inverse `mu/(lambda + |k|^2)`, the heat semigroup `exp(-|k|^2 tau)`, the
//! damped semigroup `exp(-tau(1 + |k|^2))`, the Laplacian `-|k|^2`, and
//! first derivatives `i k`. Wavenumbers on `[-L, L)` with `n` points are
//! `k = pi m / L` for signed mode index `m`; the Nyquist mode is kept for
//! even symbols and zeroed for odd ones (first derivatives).

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField, VectorField};
use crate::model::Dim;

/// FFT plans and wavenumber tables for one grid.
pub struct SpectralOps {
    grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Signed wavenumber per mode index, Nyquist zeroed (odd symbols).
    k_odd: Vec<f64>,
    /// Squared wavenumber per mode index, Nyquist kept (even symbols).
    k2: Vec<f64>,
}

impl SpectralOps {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.n[0];
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut k_odd = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        for (m, (ko, k2m)) in k_odd.iter_mut().zip(k2.iter_mut()).enumerate() {
            let signed = if m <= n / 2 {
                m as f64
            } else {
                m as f64 - n as f64
            };
            let k = std::f64::consts::PI * signed / grid.half_length;
            *k2m = k * k;
            *ko = if m == n / 2 { 0.0 } else { k };
        }
        SpectralOps {
            grid: *grid,
            fwd,
            inv,
            k_odd,
            k2,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn check(&self, u: &ScalarField) -> Result<()> {
        if u.grid() != &self.grid {
            return Err(Error::GridMismatch(
                "field grid differs from plan grid".into(),
            ));
        }
        Ok(())
    }

    fn transform(&self, buf: &mut [Complex64], forward: bool) {
        let nx = self.grid.n[0];
        let ny = self.grid.n[1];
        let plan = if forward { &self.fwd } else { &self.inv };
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        for row in buf.chunks_mut(nx) {
            plan.process_with_scratch(row, &mut scratch);
        }
        if ny > 1 {
            // Square grid: the same plan serves the second axis.
            let mut tmp = vec![Complex64::default(); buf.len()];
            for iy in 0..ny {
                for ix in 0..nx {
                    tmp[ix * ny + iy] = buf[iy * nx + ix];
                }
            }
            for col in tmp.chunks_mut(ny) {
                plan.process_with_scratch(col, &mut scratch);
            }
            for iy in 0..ny {
                for ix in 0..nx {
                    buf[iy * nx + ix] = tmp[ix * ny + iy];
                }
            }
        }
    }

    pub fn forward(&self, u: &ScalarField) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = u
            .as_slice()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        self.transform(&mut buf, true);
        buf
    }

    pub fn inverse(&self, mut spec: Vec<Complex64>) -> ScalarField {
        self.transform(&mut spec, false);
        let scale = 1.0 / self.grid.len() as f64;
        let values = spec.iter().map(|c| c.re * scale).collect();
        ScalarField::from_values(self.grid, values).expect("sizes match by construction")
    }

    fn mode_k2(&self, idx: usize) -> f64 {
        let mx = idx % self.grid.n[0];
        match self.grid.dim {
            Dim::One => self.k2[mx],
            Dim::Two => self.k2[mx] + self.k2[idx / self.grid.n[0]],
        }
    }

    /// Apply a real symbol `f(|k|^2)` mode by mode.
    pub fn apply_symbol(&self, u: &ScalarField, f: impl Fn(f64) -> f64) -> Result<ScalarField> {
        self.check(u)?;
        let mut spec = self.forward(u);
        for (idx, c) in spec.iter_mut().enumerate() {
            *c *= f(self.mode_k2(idx));
        }
        Ok(self.inverse(spec))
    }

    /// Solve `0 = Lap(v) - lambda v + mu u` for `v`.
    pub fn helmholtz_solve(&self, u: &ScalarField, lambda: f64, mu: f64) -> Result<ScalarField> {
        if !(lambda > 0.0) {
            return Err(Error::invalid("lambda must be positive"));
        }
        if !u.all_finite() {
            return Err(Error::NonFinite("helmholtz input"));
        }
        self.apply_symbol(u, |k2| mu / (lambda + k2))
    }

    /// Heat semigroup `exp(tau Lap)`, exact per mode.
    pub fn diffuse(&self, u: &ScalarField, tau: f64) -> Result<ScalarField> {
        self.apply_symbol(u, |k2| (-k2 * tau).exp())
    }

    /// Damped semigroup `exp(tau (Lap - I))` used by the mild formulation.
    pub fn damped_semigroup(&self, u: &ScalarField, tau: f64) -> Result<ScalarField> {
        let damp = (-tau).exp();
        self.apply_symbol(u, |k2| damp * (-k2 * tau).exp())
    }

    pub fn laplacian(&self, u: &ScalarField) -> Result<ScalarField> {
        self.apply_symbol(u, |k2| -k2)
    }

    /// Spectral gradient; exact for resolved modes.
    pub fn gradient(&self, v: &ScalarField) -> Result<VectorField> {
        self.check(v)?;
        let spec = self.forward(v);
        let nx = self.grid.n[0];
        let mut components = Vec::new();
        for axis in 0..self.grid.dim.as_usize() {
            let mut comp = spec.clone();
            for (idx, c) in comp.iter_mut().enumerate() {
                let m = if axis == 0 { idx % nx } else { idx / nx };
                let k = self.k_odd[m];
                *c = Complex64::new(0.0, k) * *c;
            }
            components.push(self.inverse(comp));
        }
        VectorField::new(components)
    }

    /// Spectral divergence of a vector field.
    pub fn divergence(&self, w: &VectorField) -> Result<ScalarField> {
        if w.grid() != &self.grid {
            return Err(Error::GridMismatch("vector field grid differs".into()));
        }
        let nx = self.grid.n[0];
        let mut acc = vec![Complex64::default(); self.grid.len()];
        for (axis, comp) in w.components().iter().enumerate() {
            let spec = self.forward(comp);
            for (idx, c) in spec.iter().enumerate() {
                let m = if axis == 0 { idx % nx } else { idx / nx };
                acc[idx] += Complex64::new(0.0, self.k_odd[m]) * c;
            }
        }
        Ok(self.inverse(acc))
    }
}
