//! Elevation maps, synthetic terrain generators, steepness scoring and map I/O.
//!
//! Heights live on a regular grid of cell centers. `heights[iy * width_cells + ix]`
//! is the height of cell `(ix, iy)`, whose center sits at
//! `origin + (ix * resolution, iy * resolution)`. Row index `iy` runs along y,
//! column index `ix` along x.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TerrainError {
    #[error("invalid terrain spec: {0}")]
    InvalidSpec(String),
    #[error("map must be at least {min}x{min} cells, got {w}x{l}")]
    MapTooSmall { min: usize, w: usize, l: usize },
    #[error("kernel ({kw}x{kl}) larger than grid ({w}x{l})")]
    KernelTooLarge { kw: usize, kl: usize, w: usize, l: usize },
    #[error("query ({x}, {y}) outside map bounds")]
    OutOfBounds { x: f64, y: f64 },
    #[error("non-finite height in map data")]
    NonFiniteHeight,
    #[error("map header declares {expected} heights, found {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("malformed map file at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Regular grid of terrain heights; the feasible foothold set is its cell centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElevationMap {
    /// World position of the center of cell (0, 0), meters.
    pub origin: Vector2<f64>,
    /// Cell edge length, meters.
    pub resolution: f64,
    /// Cells along x.
    pub width_cells: usize,
    /// Cells along y.
    pub length_cells: usize,
    /// Row-major heights, meters; `length_cells` rows of `width_cells` values.
    pub heights: Vec<f64>,
}

impl ElevationMap {
    pub fn new(
        origin: Vector2<f64>,
        resolution: f64,
        width_cells: usize,
        length_cells: usize,
        heights: Vec<f64>,
    ) -> Result<Self, TerrainError> {
        if resolution <= 0.0 || !resolution.is_finite() {
            return Err(TerrainError::InvalidSpec(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if width_cells == 0 || length_cells == 0 {
            return Err(TerrainError::InvalidSpec(
                "map dimensions must be positive".into(),
            ));
        }
        if heights.len() != width_cells * length_cells {
            return Err(TerrainError::DimensionMismatch {
                expected: width_cells * length_cells,
                got: heights.len(),
            });
        }
        if heights.iter().any(|h| !h.is_finite()) || !origin.x.is_finite() || !origin.y.is_finite()
        {
            return Err(TerrainError::NonFiniteHeight);
        }
        Ok(Self {
            origin,
            resolution,
            width_cells,
            length_cells,
            heights,
        })
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.width_cells + ix
    }

    #[inline]
    pub fn height(&self, ix: usize, iy: usize) -> f64 {
        self.heights[self.index(ix, iy)]
    }

    /// World position of the center of cell (ix, iy).
    #[inline]
    pub fn cell_center(&self, ix: usize, iy: usize) -> Vector2<f64> {
        Vector2::new(
            self.origin.x + ix as f64 * self.resolution,
            self.origin.y + iy as f64 * self.resolution,
        )
    }

    /// Cell containing the world point, by nearest cell center.
    pub fn cell_at(&self, p: Vector2<f64>) -> Option<(usize, usize)> {
        let fx = ((p.x - self.origin.x) / self.resolution).round();
        let fy = ((p.y - self.origin.y) / self.resolution).round();
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        (ix < self.width_cells && iy < self.length_cells).then_some((ix, iy))
    }

    /// Nearest-cell height lookup, no interpolation.
    pub fn height_at(&self, p: Vector2<f64>) -> Result<f64, TerrainError> {
        let (ix, iy) = self
            .cell_at(p)
            .ok_or(TerrainError::OutOfBounds { x: p.x, y: p.y })?;
        Ok(self.height(ix, iy))
    }

    pub fn save(&self, path: &Path) -> Result<(), TerrainError> {
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        out.write_all(self.to_emap_string().as_bytes())?;
        Ok(())
    }

    /// EMAP text format: version line, header line, then one line per row.
    pub fn to_emap_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "EMAP 1");
        let _ = writeln!(
            s,
            "{} {} {} {} {}",
            self.origin.x, self.origin.y, self.resolution, self.width_cells, self.length_cells
        );
        for iy in 0..self.length_cells {
            for ix in 0..self.width_cells {
                if ix > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{}", self.height(ix, iy));
            }
            s.push('\n');
        }
        s
    }

    pub fn load(path: &Path) -> Result<Self, TerrainError> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        Self::from_emap_lines(reader.lines())
    }

    pub fn from_emap_str(text: &str) -> Result<Self, TerrainError> {
        Self::from_emap_lines(text.lines().map(|l| Ok(l.to_string())))
    }

    fn from_emap_lines<I>(mut lines: I) -> Result<Self, TerrainError>
    where
        I: Iterator<Item = std::io::Result<String>>,
    {
        let parse_err = |line: usize, msg: &str| TerrainError::Parse {
            line,
            msg: msg.to_string(),
        };
        let magic = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty file"))??;
        if magic.trim() != "EMAP 1" {
            return Err(parse_err(1, "expected 'EMAP 1'"));
        }
        let header = lines
            .next()
            .ok_or_else(|| parse_err(2, "missing header"))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(parse_err(2, "header needs 5 fields"));
        }
        let ox: f64 = fields[0].parse().map_err(|_| parse_err(2, "bad origin_x"))?;
        let oy: f64 = fields[1].parse().map_err(|_| parse_err(2, "bad origin_y"))?;
        let res: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(2, "bad resolution"))?;
        let w: usize = fields[3]
            .parse()
            .map_err(|_| parse_err(2, "bad width_cells"))?;
        let l: usize = fields[4]
            .parse()
            .map_err(|_| parse_err(2, "bad length_cells"))?;
        let mut heights = Vec::with_capacity(w.saturating_mul(l));
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            for tok in line.split_whitespace() {
                let h: f64 = tok
                    .parse()
                    .map_err(|_| parse_err(row + 3, "bad height value"))?;
                heights.push(h);
            }
        }
        if heights.len() != w * l {
            return Err(TerrainError::DimensionMismatch {
                expected: w * l,
                got: heights.len(),
            });
        }
        Self::new(Vector2::new(ox, oy), res, w, l, heights)
    }

    /// 8-bit binary PGM with linear min-max scaling of the heights.
    pub fn to_pgm(&self) -> Vec<u8> {
        values_to_pgm(&self.heights, self.width_cells, self.length_cells)
    }
}

/// Per-cell aggregated gradient magnitude; higher means steeper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteepnessMap {
    pub origin: Vector2<f64>,
    pub resolution: f64,
    pub width_cells: usize,
    pub length_cells: usize,
    /// Row-major non-negative scores (dimensionless slope aggregate).
    pub scores: Vec<f64>,
}

impl SteepnessMap {
    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.width_cells + ix
    }

    #[inline]
    pub fn score(&self, ix: usize, iy: usize) -> f64 {
        self.scores[self.index(ix, iy)]
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        values_to_pgm(&self.scores, self.width_cells, self.length_cells)
    }
}

/// Aggregation kernel matching the foot dimensions; extents are odd cell counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootprintKernel {
    /// Foot extent along x, meters.
    pub foot_length: f64,
    /// Foot extent along y, meters.
    pub foot_width: f64,
}

impl FootprintKernel {
    pub fn new(foot_length: f64, foot_width: f64) -> Self {
        Self {
            foot_length,
            foot_width,
        }
    }

    /// Kernel extents in cells: ceil(dim / resolution) rounded up to odd, at least 1.
    pub fn extents(&self, resolution: f64) -> (usize, usize) {
        let to_odd = |dim: f64| -> usize {
            let cells = (dim / resolution).ceil().max(1.0) as usize;
            if cells % 2 == 0 {
                cells + 1
            } else {
                cells
            }
        };
        (to_odd(self.foot_length), to_odd(self.foot_width))
    }
}

impl Default for FootprintKernel {
    fn default() -> Self {
        // 3x3 cells at the default 5 cm resolution
        Self {
            foot_length: 0.15,
            foot_width: 0.10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerrainKind {
    Flat,
    PyramidStairs,
    Rough,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TerrainSpec {
    pub kind: TerrainKind,
    pub width_cells: usize,
    pub length_cells: usize,
    pub resolution: f64,
    /// Center of cell (0,0); defaults so the grid is centered on the world origin.
    pub origin: Option<Vector2<f64>>,
    pub step_height: f64,
    pub tread_depth: f64,
    /// Cap on the number of risers for pyramid stairs.
    pub num_steps: usize,
    pub roughness_amplitude: f64,
    pub seed: u64,
}

impl Default for TerrainSpec {
    fn default() -> Self {
        Self {
            kind: TerrainKind::Flat,
            width_cells: 36,
            length_cells: 24,
            resolution: 0.05,
            origin: None,
            step_height: 0.25,
            tread_depth: 0.30,
            num_steps: 1000,
            roughness_amplitude: 0.04,
            seed: 0,
        }
    }
}

pub fn generate_terrain(spec: &TerrainSpec) -> Result<ElevationMap, TerrainError> {
    if spec.resolution <= 0.0 || !spec.resolution.is_finite() {
        return Err(TerrainError::InvalidSpec(format!(
            "resolution must be positive, got {}",
            spec.resolution
        )));
    }
    if spec.width_cells == 0 || spec.length_cells == 0 {
        return Err(TerrainError::InvalidSpec(
            "map dimensions must be positive".into(),
        ));
    }
    let (w, l, res) = (spec.width_cells, spec.length_cells, spec.resolution);
    let origin = spec.origin.unwrap_or_else(|| {
        Vector2::new(-((w - 1) as f64) * res / 2.0, -((l - 1) as f64) * res / 2.0)
    });
    let heights = match spec.kind {
        TerrainKind::Flat => vec![0.0; w * l],
        TerrainKind::PyramidStairs => {
            if spec.step_height < 0.0 {
                return Err(TerrainError::InvalidSpec(format!(
                    "step_height must be non-negative, got {}",
                    spec.step_height
                )));
            }
            if spec.tread_depth < res {
                return Err(TerrainError::InvalidSpec(format!(
                    "tread_depth {} must be at least the resolution {res}",
                    spec.tread_depth
                )));
            }
            // Square rings around the grid center, rising outward by
            // step_height per tread_depth band. The epsilon keeps bands
            // regular when tread_depth is an exact multiple of resolution.
            let cx = origin.x + (w - 1) as f64 * res / 2.0;
            let cy = origin.y + (l - 1) as f64 * res / 2.0;
            let mut hs = Vec::with_capacity(w * l);
            for iy in 0..l {
                for ix in 0..w {
                    let x = origin.x + ix as f64 * res;
                    let y = origin.y + iy as f64 * res;
                    let d = (x - cx).abs().max((y - cy).abs());
                    let band = ((d / spec.tread_depth) + 1e-9).floor() as usize;
                    hs.push(band.min(spec.num_steps) as f64 * spec.step_height);
                }
            }
            hs
        }
        TerrainKind::Rough => {
            if spec.roughness_amplitude < 0.0 {
                return Err(TerrainError::InvalidSpec(format!(
                    "roughness_amplitude must be non-negative, got {}",
                    spec.roughness_amplitude
                )));
            }
            // Value noise: random lattice every ~0.2 m, bilinear in between.
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let spacing = ((0.2 / res).round() as usize).max(1);
            let lw = w / spacing + 2;
            let ll = l / spacing + 2;
            let amp = spec.roughness_amplitude;
            let lattice: Vec<f64> = (0..lw * ll).map(|_| rng.gen_range(-amp..=amp)).collect();
            let mut hs = Vec::with_capacity(w * l);
            for iy in 0..l {
                for ix in 0..w {
                    let fx = ix as f64 / spacing as f64;
                    let fy = iy as f64 / spacing as f64;
                    let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
                    let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
                    let at = |gx: usize, gy: usize| lattice[gy * lw + gx];
                    let top = at(x0, y0) * (1.0 - tx) + at(x0 + 1, y0) * tx;
                    let bot = at(x0, y0 + 1) * (1.0 - tx) + at(x0 + 1, y0 + 1) * tx;
                    hs.push(top * (1.0 - ty) + bot * ty);
                }
            }
            hs
        }
    };
    ElevationMap::new(origin, res, w, l, heights)
}

/// Gradient magnitude of the standard 3x3 Sobel kernels, scaled by
/// 1/(8*resolution) so the output approximates dimensionless slope.
/// Borders use replicate padding.
pub fn sobel_gradient(map: &ElevationMap) -> Result<SteepnessMap, TerrainError> {
    let (w, l) = (map.width_cells, map.length_cells);
    if w < 3 || l < 3 {
        return Err(TerrainError::MapTooSmall { min: 3, w, l });
    }
    let clamp_h = |ix: isize, iy: isize| -> f64 {
        let ix = ix.clamp(0, w as isize - 1) as usize;
        let iy = iy.clamp(0, l as isize - 1) as usize;
        map.height(ix, iy)
    };
    let scale = 1.0 / (8.0 * map.resolution);
    let mut scores = Vec::with_capacity(w * l);
    for iy in 0..l as isize {
        for ix in 0..w as isize {
            let gx = (clamp_h(ix + 1, iy - 1) + 2.0 * clamp_h(ix + 1, iy) + clamp_h(ix + 1, iy + 1))
                - (clamp_h(ix - 1, iy - 1) + 2.0 * clamp_h(ix - 1, iy) + clamp_h(ix - 1, iy + 1));
            let gy = (clamp_h(ix - 1, iy + 1) + 2.0 * clamp_h(ix, iy + 1) + clamp_h(ix + 1, iy + 1))
                - (clamp_h(ix - 1, iy - 1) + 2.0 * clamp_h(ix, iy - 1) + clamp_h(ix + 1, iy - 1));
            scores.push((gx * scale).hypot(gy * scale));
        }
    }
    Ok(SteepnessMap {
        origin: map.origin,
        resolution: map.resolution,
        width_cells: w,
        length_cells: l,
        scores,
    })
}

/// Box-mean of gradient magnitudes over the footprint window, replicate padding.
pub fn aggregate_steepness(
    gradient: &SteepnessMap,
    kernel: &FootprintKernel,
) -> Result<SteepnessMap, TerrainError> {
    let (w, l) = (gradient.width_cells, gradient.length_cells);
    let (kw, kl) = kernel.extents(gradient.resolution);
    if kw > w || kl > l {
        return Err(TerrainError::KernelTooLarge { kw, kl, w, l });
    }
    let (hx, hy) = (kw as isize / 2, kl as isize / 2);
    let inv_area = 1.0 / (kw * kl) as f64;
    let mut scores = Vec::with_capacity(w * l);
    for iy in 0..l as isize {
        for ix in 0..w as isize {
            let mut sum = 0.0;
            for dy in -hy..=hy {
                for dx in -hx..=hx {
                    let jx = (ix + dx).clamp(0, w as isize - 1) as usize;
                    let jy = (iy + dy).clamp(0, l as isize - 1) as usize;
                    sum += gradient.scores[jy * w + jx];
                }
            }
            scores.push(sum * inv_area);
        }
    }
    Ok(SteepnessMap {
        origin: gradient.origin,
        resolution: gradient.resolution,
        width_cells: w,
        length_cells: l,
        scores,
    })
}

/// Sobel gradient followed by footprint aggregation.
pub fn compute_steepness(
    map: &ElevationMap,
    kernel: &FootprintKernel,
) -> Result<SteepnessMap, TerrainError> {
    aggregate_steepness(&sobel_gradient(map)?, kernel)
}

fn values_to_pgm(values: &[f64], w: usize, l: usize) -> Vec<u8> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;
    let mut out = format!("P5\n{w} {l}\n255\n").into_bytes();
    out.reserve(values.len());
    for &v in values {
        let g = if span > 0.0 {
            ((v - lo) / span * 255.0).round() as u8
        } else {
            0
        };
        out.push(g);
    }
    out
}
