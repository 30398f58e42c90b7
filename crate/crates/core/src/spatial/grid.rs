use std::io::{BufRead, Write};

use nalgebra::Point2;

use crate::error::{Error, Result};

pub const DEFAULT_RESOLUTION: f64 = 0.1;

/// Lattice of square BEV cells. Cell `(ix, iy)` spans
/// `origin + [ix, ix+1) * resolution` by `origin + [iy, iy+1) * resolution`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: Point2<f64>,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn new(origin: Point2<f64>, resolution: f64, width: usize, height: usize) -> Result<Self> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::param("resolution", format!("must be positive, got {resolution}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::param("grid", "width and height must be at least 1"));
        }
        Ok(GridSpec {
            origin,
            resolution,
            width,
            height,
        })
    }

    /// Smallest grid aligned to multiples of `resolution` that covers the rectangle.
    pub fn covering_rect(min: Point2<f64>, max: Point2<f64>, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0) {
            return Err(Error::param("resolution", format!("must be positive, got {resolution}")));
        }
        let x0 = (min.x / resolution).floor() * resolution;
        let y0 = (min.y / resolution).floor() * resolution;
        let width = (((max.x - x0) / resolution).ceil() as usize).max(1);
        let height = (((max.y - y0) / resolution).ceil() as usize).max(1);
        Self::new(Point2::new(x0, y0), resolution, width, height)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.resolution * self.resolution
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.width + ix
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Point2<f64> {
        Point2::new(
            self.origin.x + (ix as f64 + 0.5) * self.resolution,
            self.origin.y + (iy as f64 + 0.5) * self.resolution,
        )
    }

    pub fn max_corner(&self) -> Point2<f64> {
        Point2::new(
            self.origin.x + self.width as f64 * self.resolution,
            self.origin.y + self.height as f64 * self.resolution,
        )
    }

    /// Cell containing `p`, if any.
    pub fn locate(&self, p: &Point2<f64>) -> Option<(usize, usize)> {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            None
        } else {
            Some((fx as usize, fy as usize))
        }
    }

    /// Inclusive cell ranges overlapping the rectangle `[min, max]`, clamped to the grid.
    pub fn cell_range(&self, min: &Point2<f64>, max: &Point2<f64>) -> Option<((usize, usize), (usize, usize))> {
        let to_cell = |v: f64, o: f64| ((v - o) / self.resolution).floor();
        let x0 = to_cell(min.x, self.origin.x).max(0.0);
        let y0 = to_cell(min.y, self.origin.y).max(0.0);
        let x1 = to_cell(max.x, self.origin.x).min(self.width as f64 - 1.0);
        let y1 = to_cell(max.y, self.origin.y).min(self.height as f64 - 1.0);
        if x1 < x0 || y1 < y0 {
            return None;
        }
        Some(((x0 as usize, x1 as usize), (y0 as usize, y1 as usize)))
    }
}

/// Per-cell values on a [`GridSpec`], row-major from the lowest `y`.
///
/// For densities the values are in 1/m^2 and `mass()` is the integral.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl SpatialGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        SpatialGrid {
            values: vec![0.0; spec.len()],
            spec,
        }
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.spec.index(ix, iy)]
    }

    /// Value of the cell containing `p`, or zero outside the grid.
    pub fn sample(&self, p: &Point2<f64>) -> f64 {
        self.spec
            .locate(p)
            .map(|(ix, iy)| self.get(ix, iy))
            .unwrap_or(0.0)
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_area()
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Shannon entropy (nats) of the normalized cell masses.
    pub fn entropy(&self) -> f64 {
        let total: f64 = self.values.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        self.values
            .iter()
            .filter(|v| **v > 0.0)
            .map(|v| {
                let p = v / total;
                -p * p.ln()
            })
            .sum()
    }

    /// CSV: a header line, the metadata line, then one line per grid row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let s = &self.spec;
        writeln!(out, "origin_x,origin_y,resolution,width,height")?;
        writeln!(out, "{},{},{},{},{}", s.origin.x, s.origin.y, s.resolution, s.width, s.height)?;
        for row in self.values.chunks(s.width) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        const CTX: &str = "grid csv";
        let mut lines = input.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, l)) => Ok((i + 1, l?)),
                None => Err(Error::parse(CTX, 0, format!("missing {what}"))),
            }
        };
        let (n, header) = next("header")?;
        if header.trim() != "origin_x,origin_y,resolution,width,height" {
            return Err(Error::parse(CTX, n, "unexpected header"));
        }
        let (n, meta) = next("metadata")?;
        let f: Vec<&str> = meta.trim().split(',').collect();
        if f.len() != 5 {
            return Err(Error::parse(CTX, n, "metadata needs 5 fields"));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::parse(CTX, n, e.to_string()));
        let count = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::parse(CTX, n, e.to_string()));
        let spec = GridSpec::new(Point2::new(num(f[0])?, num(f[1])?), num(f[2])?, count(f[3])?, count(f[4])?)?;
        let mut values = Vec::with_capacity(spec.len());
        for _ in 0..spec.height {
            let (n, line) = next("grid row")?;
            let row: Vec<f64> = line
                .trim()
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::parse(CTX, n, e.to_string())))
                .collect::<Result<_>>()?;
            if row.len() != spec.width {
                return Err(Error::parse(CTX, n, format!("expected {} values, got {}", spec.width, row.len())));
            }
            values.extend(row);
        }
        Ok(SpatialGrid { spec, values })
    }

    /// Binary 16-bit PGM scaled to the peak value, top row = largest `y`.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        let s = &self.spec;
        let peak = self.peak();
        write!(out, "P5\n{} {}\n65535\n", s.width, s.height)?;
        let mut bytes = Vec::with_capacity(2 * s.len());
        for iy in (0..s.height).rev() {
            for ix in 0..s.width {
                let v = self.get(ix, iy);
                let level = if peak > 0.0 {
                    (v / peak * 65535.0).round().clamp(0.0, 65535.0) as u16
                } else {
                    0
                };
                bytes.extend_from_slice(&level.to_be_bytes());
            }
        }
        out.write_all(&bytes)?;
        Ok(())
    }
}
