//! Elevation grids: ASCII-grid I/O, synthetic terrain and slope queries.
//!
//! Grids are stored row-major with row 0 being the first (northernmost) data
//! row of an ASCII grid, matching the ESRI convention: world y grows with
//! decreasing row index, `yllcorner` is the south-west corner.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec3;

#[derive(Debug, Error)]
pub enum TerrainError {
    #[error("missing header key `{0}`")]
    MissingHeader(&'static str),
    #[error("bad value for header key `{key}`: {value:?}")]
    BadHeader { key: String, value: String },
    #[error("unknown header key `{0}`")]
    UnknownHeader(String),
    #[error("dimension mismatch: expected {expected} {what}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-numeric cell at row {row}, col {col}: {value:?}")]
    BadCell { row: usize, col: usize, value: String },
    #[error("index ({col}, {row}) out of bounds for {ncols}x{nrows} grid")]
    OutOfBounds {
        col: usize,
        row: usize,
        ncols: usize,
        nrows: usize,
    },
    #[error("nodata cell at ({col}, {row})")]
    Nodata { col: usize, row: usize },
    #[error("invalid grid: {0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Column/row address of a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridIndex {
    pub col: usize,
    pub row: usize,
}

impl GridIndex {
    pub const fn new(col: usize, row: usize) -> Self {
        GridIndex { col, row }
    }
}

/// Finite-difference slope components at a cell.
///
/// `gx`/`gy` are rise-over-run along world x and y; `gz` is the planar slope
/// magnitude `sqrt(gx^2 + gy^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerrainGradient {
    pub gx: f64,
    pub gy: f64,
    pub gz: f64,
}

/// Raster digital elevation model.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainGrid {
    ncols: usize,
    nrows: usize,
    cell_size: f64,
    origin_x: f64,
    origin_y: f64,
    elevations: Vec<f64>,
    nodata: f64,
}

const DEFAULT_NODATA: f64 = -9999.0;

impl TerrainGrid {
    pub fn new(
        ncols: usize,
        nrows: usize,
        cell_size: f64,
        origin_x: f64,
        origin_y: f64,
        elevations: Vec<f64>,
        nodata: f64,
    ) -> Result<Self, TerrainError> {
        if ncols < 2 || nrows < 2 {
            return Err(TerrainError::Invalid(format!(
                "grid must be at least 2x2, got {ncols}x{nrows}"
            )));
        }
        if !(cell_size > 0.0) {
            return Err(TerrainError::Invalid(format!(
                "cell_size must be positive, got {cell_size}"
            )));
        }
        if elevations.len() != ncols * nrows {
            return Err(TerrainError::Dimension {
                what: "cells",
                expected: ncols * nrows,
                found: elevations.len(),
            });
        }
        if let Some(bad) = elevations.iter().find(|v| **v != nodata && !v.is_finite()) {
            return Err(TerrainError::Invalid(format!(
                "non-finite elevation {bad} in grid"
            )));
        }
        Ok(TerrainGrid {
            ncols,
            nrows,
            cell_size,
            origin_x,
            origin_y,
            elevations,
            nodata,
        })
    }

    /// Builds a grid by sampling `f(x, y)` at every cell center.
    pub fn from_fn(
        ncols: usize,
        nrows: usize,
        cell_size: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self, TerrainError> {
        let mut elevations = Vec::with_capacity(ncols * nrows);
        for row in 0..nrows {
            for col in 0..ncols {
                let x = (col as f64 + 0.5) * cell_size;
                let y = (nrows as f64 - 1.0 - row as f64 + 0.5) * cell_size;
                elevations.push(f(x, y));
            }
        }
        TerrainGrid::new(ncols, nrows, cell_size, 0.0, 0.0, elevations, DEFAULT_NODATA)
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.origin_x, self.origin_y)
    }

    pub fn nodata_sentinel(&self) -> f64 {
        self.nodata
    }

    pub fn in_bounds(&self, idx: GridIndex) -> bool {
        idx.col < self.ncols && idx.row < self.nrows
    }

    fn linear(&self, idx: GridIndex) -> usize {
        idx.row * self.ncols + idx.col
    }

    pub fn is_nodata(&self, idx: GridIndex) -> bool {
        self.in_bounds(idx) && self.elevations[self.linear(idx)] == self.nodata
    }

    pub fn elevation_at(&self, idx: GridIndex) -> Result<f64, TerrainError> {
        if !self.in_bounds(idx) {
            return Err(TerrainError::OutOfBounds {
                col: idx.col,
                row: idx.row,
                ncols: self.ncols,
                nrows: self.nrows,
            });
        }
        let v = self.elevations[self.linear(idx)];
        if v == self.nodata {
            return Err(TerrainError::Nodata {
                col: idx.col,
                row: idx.row,
            });
        }
        Ok(v)
    }

    /// World coordinates of a cell center. Row 0 is the northern edge.
    pub fn cell_center(&self, idx: GridIndex) -> (f64, f64) {
        let x = self.origin_x + (idx.col as f64 + 0.5) * self.cell_size;
        let y = self.origin_y + (self.nrows as f64 - 1.0 - idx.row as f64 + 0.5) * self.cell_size;
        (x, y)
    }

    /// Cell center lifted to the terrain surface.
    pub fn surface_point(&self, idx: GridIndex) -> Result<Vec3, TerrainError> {
        let (x, y) = self.cell_center(idx);
        Ok(Vec3::new(x, y, self.elevation_at(idx)?))
    }

    /// Cell containing the world position, if any. Positions exactly on the
    /// outer edge snap to the nearest cell.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<GridIndex> {
        let fc = (x - self.origin_x) / self.cell_size;
        let fr = self.nrows as f64 - ((y - self.origin_y) / self.cell_size);
        if fc < 0.0 || fr < 0.0 || fc > self.ncols as f64 || fr > self.nrows as f64 {
            return None;
        }
        let col = (fc.floor() as usize).min(self.ncols - 1);
        let row = (fr.floor() as usize).min(self.nrows - 1);
        Some(GridIndex::new(col, row))
    }

    pub fn max_elevation(&self) -> f64 {
        self.elevations
            .iter()
            .copied()
            .filter(|v| *v != self.nodata)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_elevation(&self) -> f64 {
        self.elevations
            .iter()
            .copied()
            .filter(|v| *v != self.nodata)
            .fold(f64::INFINITY, f64::min)
    }

    /// Finite-difference slope at a cell: central differences where both
    /// neighbors exist, one-sided at the grid edges.
    pub fn gradient_at(&self, idx: GridIndex) -> Result<TerrainGradient, TerrainError> {
        let z = self.elevation_at(idx)?;
        let gx = self.axis_diff(idx, z, true)?;
        let gy_row = self.axis_diff(idx, z, false)?;
        // Row index grows southward, world y grows northward.
        let gy = -gy_row;
        let gz = (gx * gx + gy * gy).sqrt();
        Ok(TerrainGradient { gx, gy, gz })
    }

    fn axis_diff(&self, idx: GridIndex, center: f64, along_x: bool) -> Result<f64, TerrainError> {
        let (pos, len) = if along_x {
            (idx.col, self.ncols)
        } else {
            (idx.row, self.nrows)
        };
        let fetch = |p: usize| -> Result<f64, TerrainError> {
            let i = if along_x {
                GridIndex::new(p, idx.row)
            } else {
                GridIndex::new(idx.col, p)
            };
            self.elevation_at(i)
        };
        let d = if pos == 0 {
            (fetch(1)? - center) / self.cell_size
        } else if pos == len - 1 {
            (center - fetch(len - 2)?) / self.cell_size
        } else {
            (fetch(pos + 1)? - fetch(pos - 1)?) / (2.0 * self.cell_size)
        };
        Ok(d)
    }

    /// Parses an ESRI ASCII grid. Header keys are case-insensitive;
    /// `nodata_value` is optional and defaults to -9999.
    pub fn parse_ascii(reader: impl BufRead) -> Result<Self, TerrainError> {
        let mut ncols: Option<usize> = None;
        let mut nrows: Option<usize> = None;
        let mut xll: Option<f64> = None;
        let mut yll: Option<f64> = None;
        let mut cell: Option<f64> = None;
        let mut nodata = DEFAULT_NODATA;

        let mut lines = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                lines.push(line);
            }
        }

        let mut data_start = 0;
        for (i, line) in lines.iter().enumerate() {
            let trimmed = line.trim();
            let first = trimmed.chars().next().unwrap_or(' ');
            if !first.is_ascii_alphabetic() {
                data_start = i;
                break;
            }
            data_start = i + 1;
            let mut parts = trimmed.split_whitespace();
            let key = parts.next().unwrap_or("").to_ascii_lowercase();
            let value = parts.next().unwrap_or("").to_string();
            if parts.next().is_some() {
                return Err(TerrainError::BadHeader {
                    key,
                    value: trimmed.to_string(),
                });
            }
            let bad = |key: &str, value: &str| TerrainError::BadHeader {
                key: key.to_string(),
                value: value.to_string(),
            };
            match key.as_str() {
                "ncols" => ncols = Some(value.parse().map_err(|_| bad("ncols", &value))?),
                "nrows" => nrows = Some(value.parse().map_err(|_| bad("nrows", &value))?),
                "xllcorner" => xll = Some(value.parse().map_err(|_| bad("xllcorner", &value))?),
                "yllcorner" => yll = Some(value.parse().map_err(|_| bad("yllcorner", &value))?),
                "cellsize" => cell = Some(value.parse().map_err(|_| bad("cellsize", &value))?),
                "nodata_value" => {
                    nodata = value.parse().map_err(|_| bad("nodata_value", &value))?
                }
                other => return Err(TerrainError::UnknownHeader(other.to_string())),
            }
        }

        let ncols = ncols.ok_or(TerrainError::MissingHeader("ncols"))?;
        let nrows = nrows.ok_or(TerrainError::MissingHeader("nrows"))?;
        let xll = xll.ok_or(TerrainError::MissingHeader("xllcorner"))?;
        let yll = yll.ok_or(TerrainError::MissingHeader("yllcorner"))?;
        let cell = cell.ok_or(TerrainError::MissingHeader("cellsize"))?;

        let data_lines = &lines[data_start..];
        if data_lines.len() != nrows {
            return Err(TerrainError::Dimension {
                what: "data rows",
                expected: nrows,
                found: data_lines.len(),
            });
        }

        let mut elevations = Vec::with_capacity(ncols * nrows);
        for (row, line) in data_lines.iter().enumerate() {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != ncols {
                return Err(TerrainError::Dimension {
                    what: "columns",
                    expected: ncols,
                    found: tokens.len(),
                });
            }
            for (col, tok) in tokens.iter().enumerate() {
                let v: f64 = tok.parse().map_err(|_| TerrainError::BadCell {
                    row,
                    col,
                    value: tok.to_string(),
                })?;
                elevations.push(v);
            }
        }

        TerrainGrid::new(ncols, nrows, cell, xll, yll, elevations, nodata)
    }

    /// Writes the grid back out in the same ASCII format. Values are printed
    /// with the shortest representation that round-trips through f64.
    pub fn write_ascii(&self, mut w: impl Write) -> Result<(), TerrainError> {
        writeln!(w, "ncols {}", self.ncols)?;
        writeln!(w, "nrows {}", self.nrows)?;
        writeln!(w, "xllcorner {}", self.origin_x)?;
        writeln!(w, "yllcorner {}", self.origin_y)?;
        writeln!(w, "cellsize {}", self.cell_size)?;
        writeln!(w, "NODATA_value {}", self.nodata)?;
        for row in 0..self.nrows {
            let mut line = String::new();
            for col in 0..self.ncols {
                if col > 0 {
                    line.push(' ');
                }
                line.push_str(&format!("{}", self.elevations[row * self.ncols + col]));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn synthesize(spec: &SynthSpec) -> Result<Self, TerrainError> {
        spec.validate()?;
        let n = spec.ncols;
        let m = spec.nrows;
        let amp = spec.amplitude;
        match spec.kind {
            SynthKind::Flat => TerrainGrid::from_fn(n, m, spec.cell_size, |_, _| amp),
            SynthKind::Ramp => {
                let span = (n as f64 - 1.0) * spec.cell_size;
                TerrainGrid::from_fn(n, m, spec.cell_size, move |x, _| {
                    amp * ((x - 0.5 * spec.cell_size) / span).clamp(0.0, 1.0)
                })
            }
            SynthKind::Ridge => {
                // Single triangular band crossing the full grid along y.
                // The peak sits exactly on a cell center so the band tops
                // out at `amplitude`.
                let center = ((n / 2) as f64 + 0.5) * spec.cell_size;
                let half_width = ((n as f64 / 6.0).max(1.5)) * spec.cell_size;
                TerrainGrid::from_fn(n, m, spec.cell_size, move |x, _| {
                    let t = 1.0 - (x - center).abs() / half_width;
                    amp * t.clamp(0.0, 1.0)
                })
            }
            SynthKind::RandomSmooth => {
                let coarse = 5usize;
                let cn = n.div_ceil(coarse) + 2;
                let cm = m.div_ceil(coarse) + 2;
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                let lattice: Vec<f64> = (0..cn * cm).map(|_| rng.random::<f64>()).collect();
                let mut raw = Vec::with_capacity(n * m);
                for row in 0..m {
                    for col in 0..n {
                        let fx = col as f64 / coarse as f64;
                        let fy = row as f64 / coarse as f64;
                        let ix = fx.floor() as usize;
                        let iy = fy.floor() as usize;
                        let tx = smoothstep(fx - ix as f64);
                        let ty = smoothstep(fy - iy as f64);
                        let v00 = lattice[iy * cn + ix];
                        let v10 = lattice[iy * cn + ix + 1];
                        let v01 = lattice[(iy + 1) * cn + ix];
                        let v11 = lattice[(iy + 1) * cn + ix + 1];
                        let v0 = v00 * (1.0 - tx) + v10 * tx;
                        let v1 = v01 * (1.0 - tx) + v11 * tx;
                        raw.push(v0 * (1.0 - ty) + v1 * ty);
                    }
                }
                let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let span = (hi - lo).max(f64::MIN_POSITIVE);
                let elevations = raw.iter().map(|v| amp * (v - lo) / span).collect();
                TerrainGrid::new(n, m, spec.cell_size, 0.0, 0.0, elevations, DEFAULT_NODATA)
            }
        }
    }

    /// Largest planar slope magnitude over all cells with a full gradient.
    pub fn max_slope(&self) -> f64 {
        let mut worst = 0.0f64;
        for row in 0..self.nrows {
            for col in 0..self.ncols {
                if let Ok(g) = self.gradient_at(GridIndex::new(col, row)) {
                    worst = worst.max(g.gz);
                }
            }
        }
        worst
    }

    /// Scales every elevation in place; used by tests to cap slopes.
    pub fn scale_elevations(&mut self, factor: f64) {
        for v in &mut self.elevations {
            if *v != self.nodata {
                *v *= factor;
            }
        }
    }
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    Flat,
    Ramp,
    Ridge,
    RandomSmooth,
}

impl std::str::FromStr for SynthKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "flat" => Ok(SynthKind::Flat),
            "ramp" => Ok(SynthKind::Ramp),
            "ridge" => Ok(SynthKind::Ridge),
            "random-smooth" => Ok(SynthKind::RandomSmooth),
            other => Err(format!(
                "unknown terrain kind {other:?} (expected flat|ramp|ridge|random-smooth)"
            )),
        }
    }
}

/// Recipe for a synthetic terrain; a pure function of its fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub ncols: usize,
    pub nrows: usize,
    pub cell_size: f64,
    pub amplitude: f64,
    pub seed: u64,
}

impl SynthSpec {
    fn validate(&self) -> Result<(), TerrainError> {
        if self.ncols < 2 || self.nrows < 2 {
            return Err(TerrainError::Invalid(format!(
                "synthetic grid must be at least 2x2, got {}x{}",
                self.ncols, self.nrows
            )));
        }
        if !(self.cell_size > 0.0) {
            return Err(TerrainError::Invalid("cell_size must be positive".into()));
        }
        if !(self.amplitude >= 0.0) {
            return Err(TerrainError::Invalid("amplitude must be >= 0".into()));
        }
        Ok(())
    }
}
