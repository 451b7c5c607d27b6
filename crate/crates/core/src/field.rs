//! Gridded scalar and vector fields on the periodic box `[-L, L)^N`.
//!
//! Fields serialize to a flat binary layout (little-endian header with
//! dimension, grid sizes and spacing, then row-major `f64` payload) and to
//! CSV for small grids.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dim;

/// Uniform periodic grid. In 2D the layout is row-major: index `iy * nx + ix`
/// with `x` the fastest axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: Dim,
    /// Points per axis; `n[1] == 1` in one dimension.
    pub n: [usize; 2],
    /// Spacing, identical on both axes.
    pub h: f64,
    /// Half-length `L` of the box `[-L, L)`.
    pub half_length: f64,
}

impl Grid {
    pub fn new(dim: Dim, points_per_axis: usize, half_length: f64) -> Result<Self> {
        if points_per_axis < 16 || points_per_axis % 2 != 0 {
            return Err(Error::invalid(format!(
                "grid_points must be an even integer >= 16, got {points_per_axis}"
            )));
        }
        if !(half_length > 0.0) || !half_length.is_finite() {
            return Err(Error::invalid("box_half_length must be positive"));
        }
        let n = match dim {
            Dim::One => [points_per_axis, 1],
            Dim::Two => [points_per_axis, points_per_axis],
        };
        Ok(Grid {
            dim,
            n,
            h: 2.0 * half_length / points_per_axis as f64,
            half_length,
        })
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinate of the 1D axis node `i`, starting at `-L`.
    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.h
    }

    /// Coordinates of the flattened node `idx` as `[x, y]` (`y = 0` in 1D).
    pub fn coord(&self, idx: usize) -> [f64; 2] {
        let ix = idx % self.n[0];
        let iy = idx / self.n[0];
        [
            self.axis_coord(ix),
            if self.dim == Dim::Two {
                self.axis_coord(iy)
            } else {
                0.0
            },
        ]
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// A real scalar field sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        ScalarField {
            values: vec![value; grid.len()],
            grid,
        }
    }

    /// Build a field from a function of the node coordinates.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coord(i))).collect();
        ScalarField { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "value count {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sup norm `max |u|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_same_grid(&self, other: &ScalarField) -> Result<()> {
        self.grid.check_same(&other.grid)
    }

    /// Sup norm of the difference.
    pub fn sup_distance(&self, other: &ScalarField) -> Result<f64> {
        self.ensure_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Pointwise map into a new field.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self + alpha * other`, grids must match.
    pub fn add_scaled(&self, alpha: f64, other: &ScalarField) -> Result<ScalarField> {
        self.ensure_same_grid(other)?;
        Ok(ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        })
    }

    /// Flat binary layout: `dim: u32, n0: u32, n1: u32, h: f64, L: f64`,
    /// then row-major values, all little-endian.
    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        let dim: u32 = match self.grid.dim {
            Dim::One => 1,
            Dim::Two => 2,
        };
        w.write_all(&dim.to_le_bytes())?;
        w.write_all(&(self.grid.n[0] as u32).to_le_bytes())?;
        w.write_all(&(self.grid.n[1] as u32).to_le_bytes())?;
        w.write_all(&self.grid.h.to_le_bytes())?;
        w.write_all(&self.grid.half_length.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Self> {
        let mut u32buf = [0u8; 4];
        let mut f64buf = [0u8; 8];
        r.read_exact(&mut u32buf)?;
        let dim = match u32::from_le_bytes(u32buf) {
            1 => Dim::One,
            2 => Dim::Two,
            other => return Err(Error::Format(format!("bad dimension {other}"))),
        };
        r.read_exact(&mut u32buf)?;
        let n0 = u32::from_le_bytes(u32buf) as usize;
        r.read_exact(&mut u32buf)?;
        let n1 = u32::from_le_bytes(u32buf) as usize;
        r.read_exact(&mut f64buf)?;
        let h = f64::from_le_bytes(f64buf);
        r.read_exact(&mut f64buf)?;
        let half_length = f64::from_le_bytes(f64buf);
        if n0 == 0 || n1 == 0 || !(h > 0.0) || !(half_length > 0.0) {
            return Err(Error::Format("bad grid header".into()));
        }
        let grid = Grid {
            dim,
            n: [n0, n1],
            h,
            half_length,
        };
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            r.read_exact(&mut f64buf)?;
            values.push(f64::from_le_bytes(f64buf));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_binary(&mut file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_binary(&mut file)
    }

    /// CSV rows `x[,y],value` with 17 significant digits.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        match self.grid.dim {
            Dim::One => writeln!(w, "x,value")?,
            Dim::Two => writeln!(w, "x,y,value")?,
        }
        for (i, v) in self.values.iter().enumerate() {
            let c = self.grid.coord(i);
            match self.grid.dim {
                Dim::One => writeln!(w, "{:.16e},{:.16e}", c[0], v)?,
                Dim::Two => writeln!(w, "{:.16e},{:.16e},{:.16e}", c[0], c[1], v)?,
            }
        }
        Ok(())
    }
}

/// One scalar component per axis; holds gradients.
#[derive(Debug, Clone)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("vector field needs at least one component"));
        }
        for c in &components[1..] {
            components[0].ensure_same_grid(c)?;
        }
        Ok(VectorField { components })
    }

    pub fn grid(&self) -> &Grid {
        self.components[0].grid()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, axis: usize) -> &ScalarField {
        &self.components[axis]
    }

    /// Sup over nodes of the Euclidean magnitude.
    pub fn magnitude_sup(&self) -> f64 {
        let n = self.components[0].as_slice().len();
        let mut sup = 0.0_f64;
        for i in 0..n {
            let mut s = 0.0;
            for c in &self.components {
                let v = c.as_slice()[i];
                s += v * v;
            }
            sup = sup.max(s.sqrt());
        }
        sup
    }

    /// Sup over nodes and components of `|w_i|` (per-axis CFL bound).
    pub fn component_sup(&self) -> f64 {
        self.components
            .iter()
            .fold(0.0_f64, |m, c| m.max(c.sup_norm()))
    }
}
