//! Periodic grids, FFTs and scalar fields on the torus.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::vector::{norm, Vec2};

/// Uniform grid on the torus `[0, L)^N` with `n` points per dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    length: f64,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::param("dim", format!("must be 1 or 2, got {dim}")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::param("grid.n", format!("must be a power of two >= 2, got {n}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::param("grid.L", format!("must be positive, got {length}")));
        }
        Ok(TorusGrid { dim, n, length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Coordinates of flat index `idx`; in two dimensions `idx = i n + j`
    /// is the point `(i h, j h)`.
    pub fn point(&self, idx: usize) -> Vec2 {
        let h = self.spacing();
        if self.dim == 1 {
            [idx as f64 * h, 0.0]
        } else {
            [(idx / self.n) as f64 * h, (idx % self.n) as f64 * h]
        }
    }

    pub fn points(&self) -> Vec<Vec2> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    fn signed(&self, m: usize) -> f64 {
        if m <= self.n / 2 {
            m as f64
        } else {
            m as f64 - self.n as f64
        }
    }

    /// Physical wave vector `2π m / L` of spectral index `idx`.
    pub fn wavevector(&self, idx: usize) -> Vec2 {
        let s = 2.0 * PI / self.length;
        if self.dim == 1 {
            [s * self.signed(idx), 0.0]
        } else {
            [s * self.signed(idx / self.n), s * self.signed(idx % self.n)]
        }
    }

    pub fn wavevectors(&self) -> Vec<Vec2> {
        (0..self.len()).map(|i| self.wavevector(i)).collect()
    }

    /// Largest resolved wavenumber per dimension, `π n / L`.
    pub fn k_max(&self) -> f64 {
        PI * self.n as f64 / self.length
    }

    /// True if any component of the mode sits on the Nyquist frequency.
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let half = self.n / 2;
        if self.dim == 1 {
            idx == half
        } else {
            idx / self.n == half || idx % self.n == half
        }
    }

    /// Cell index containing `x`, after wrapping onto the torus.
    pub fn cell_of(&self, x: Vec2) -> usize {
        let h = self.spacing();
        let wrap = |c: f64| {
            let c = c.rem_euclid(self.length);
            ((c / h) as usize).min(self.n - 1)
        };
        if self.dim == 1 {
            wrap(x[0])
        } else {
            wrap(x[0]) * self.n + wrap(x[1])
        }
    }
}

/// Forward/inverse FFT on a [`TorusGrid`]. The forward transform is
/// unnormalized; the inverse divides by the number of points.
#[derive(Clone)]
pub struct SpectralTransform {
    grid: TorusGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralTransform").field("grid", &self.grid).finish()
    }
}

impl SpectralTransform {
    pub fn new(grid: TorusGrid) -> Self {
        let mut planner = FftPlanner::new();
        SpectralTransform {
            grid,
            forward: planner.plan_fft_forward(grid.n()),
            inverse: planner.plan_fft_inverse(grid.n()),
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    fn apply(&self, fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        let n = self.grid.n();
        if self.grid.dim() == 1 {
            fft.process(data);
            return;
        }
        fft.process(data);
        let mut column = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                column[i] = data[i * n + j];
            }
            fft.process(&mut column);
            for i in 0..n {
                data[i * n + j] = column[i];
            }
        }
    }

    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        self.apply(&self.forward, data);
    }

    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.apply(&self.inverse, data);
        let scale = 1.0 / self.grid.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward_in_place(&mut data);
        data
    }

    /// Inverse transform keeping the real part.
    pub fn inverse_real(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut data = spectrum.to_vec();
        self.inverse_in_place(&mut data);
        data.into_iter().map(|z| z.re).collect()
    }
}

/// Scalar density on the torus at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroField {
    grid: TorusGrid,
    values: Vec<f64>,
    t: f64,
}

impl MacroField {
    pub fn new(grid: TorusGrid, values: Vec<f64>, t: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(MacroField { grid, values, t })
    }

    pub fn from_fn<F: Fn(Vec2) -> f64>(grid: TorusGrid, t: f64, f: F) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        MacroField { grid, values, t }
    }

    pub fn from_spectrum(
        transform: &SpectralTransform,
        spectrum: &[Complex64],
        t: f64,
    ) -> Result<Self> {
        let grid = *transform.grid();
        if spectrum.len() != grid.len() {
            return Err(Error::GridMismatch("spectrum length differs from grid size".into()));
        }
        Ok(MacroField { grid, values: transform.inverse_real(spectrum), t })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn spectrum(&self, transform: &SpectralTransform) -> Vec<Complex64> {
        transform.forward_real(&self.values)
    }

    /// ∫ρ dx.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// ‖ρ‖ in L²(dx).
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|x| x * x).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    /// Applies the Fourier multiplier `m(k)`.
    pub fn apply_multiplier<M>(&self, transform: &SpectralTransform, m: M) -> MacroField
    where
        M: Fn(Vec2) -> Complex64,
    {
        let mut spec = self.spectrum(transform);
        for (idx, z) in spec.iter_mut().enumerate() {
            *z *= m(self.grid.wavevector(idx));
        }
        MacroField { grid: self.grid, values: transform.inverse_real(&spec), t: self.t }
    }

    /// L² inner product with another field on the same grid.
    pub fn inner(&self, other: &MacroField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("inner product of fields on different grids".into()));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
            * self.grid.cell_volume())
    }
}

/// |k| of a wave vector; shorthand used by multipliers.
pub fn wavenumber(k: Vec2) -> f64 {
    norm(k)
}
