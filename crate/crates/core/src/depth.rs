//! Local perception: 8×8 time-of-flight frames, Gaussian smoothing with zero
//! padding, and extraction of the freest steering column plus the central
//! obstacle distance.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side length of the sensor grid.
pub const GRID: usize = 8;
/// Side length of the smoothing kernel.
pub const KERNEL: usize = 5;
const PAD: usize = KERNEL / 2;

pub const RANGE_MIN_MM: u16 = 200;
pub const RANGE_MAX_MM: u16 = 4000;

/// Multiply-accumulate operations per smoothing pass: one kernel sweep per
/// output cell, padded taps included.
pub const MACS_PER_FRAME: u32 = (GRID * GRID * KERNEL * KERNEL) as u32;

/// One 8×8 acquisition in millimeters, row-major, with a validity bitmask
/// (bit `row * 8 + col`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepthFrame {
    cells: [[u16; GRID]; GRID],
    valid: u64,
    tick: u64,
}

impl DepthFrame {
    /// Builds a frame, rejecting valid cells outside the sensor range.
    pub fn new(cells: [[u16; GRID]; GRID], valid: u64, tick: u64) -> Result<Self> {
        for (r, row) in cells.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                let bit = valid >> (r * GRID + c) & 1 == 1;
                if bit && !(RANGE_MIN_MM..=RANGE_MAX_MM).contains(&v) {
                    return Err(Error::InvalidFrame(format!(
                        "cell ({r},{c}) = {v} mm outside [{RANGE_MIN_MM}, {RANGE_MAX_MM}]"
                    )));
                }
            }
        }
        Ok(Self { cells, valid, tick })
    }

    /// Builds a frame from a flat row-major slice of exactly 64 values.
    pub fn from_slice(values: &[u16], valid: u64, tick: u64) -> Result<Self> {
        if values.len() != GRID * GRID {
            return Err(Error::InvalidFrame(format!(
                "expected {} cells, got {}",
                GRID * GRID,
                values.len()
            )));
        }
        let mut cells = [[0u16; GRID]; GRID];
        for (i, &v) in values.iter().enumerate() {
            cells[i / GRID][i % GRID] = v;
        }
        Self::new(cells, valid, tick)
    }

    /// Every cell at `mm`, all valid.
    pub fn uniform(mm: u16) -> Result<Self> {
        Self::new([[mm; GRID]; GRID], u64::MAX, 0)
    }

    pub fn cells(&self) -> &[[u16; GRID]; GRID] {
        &self.cells
    }

    pub fn validity_mask(&self) -> u64 {
        self.valid
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.valid >> (row * GRID + col) & 1 == 1
    }

    /// Cell value with invalid zones replaced by the maximum range.
    pub fn effective(&self, row: usize, col: usize) -> u16 {
        if self.is_valid(row, col) {
            self.cells[row][col]
        } else {
            RANGE_MAX_MM
        }
    }

    /// Left-right reflection of the frame.
    pub fn mirrored(&self) -> Self {
        let mut cells = [[0u16; GRID]; GRID];
        let mut valid = 0u64;
        for r in 0..GRID {
            for c in 0..GRID {
                let m = GRID - 1 - c;
                cells[r][m] = self.cells[r][c];
                if self.is_valid(r, c) {
                    valid |= 1 << (r * GRID + m);
                }
            }
        }
        Self { cells, valid, tick: self.tick }
    }

    /// `c0,…,c63,0x<mask>,<tick>` with cells in row-major order.
    pub fn to_csv_row(&self) -> String {
        let mut out = String::with_capacity(64 * 5 + 32);
        for row in &self.cells {
            for v in row {
                out.push_str(&v.to_string());
                out.push(',');
            }
        }
        out.push_str(&format!("0x{:016x},{}", self.valid, self.tick));
        out
    }

    pub fn from_csv_row(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != GRID * GRID + 2 {
            return Err(Error::InvalidFrame(format!(
                "expected {} fields, got {}",
                GRID * GRID + 2,
                fields.len()
            )));
        }
        let bad = |what: &str, f: &str| Error::InvalidFrame(format!("bad {what} `{f}`"));
        let values = fields[..GRID * GRID]
            .iter()
            .map(|f| f.trim().parse::<u16>().map_err(|_| bad("cell", f)))
            .collect::<Result<Vec<_>>>()?;
        let mask = fields[GRID * GRID].trim();
        let mask = mask.strip_prefix("0x").unwrap_or(mask);
        let valid = u64::from_str_radix(mask, 16).map_err(|_| bad("validity mask", mask))?;
        let tick_field = fields[GRID * GRID + 1].trim();
        let tick = tick_field.parse().map_err(|_| bad("tick", tick_field))?;
        Self::from_slice(&values, valid, tick)
    }
}

/// A normalized, symmetric, strictly positive 5×5 smoothing kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianKernel {
    weights: [[f32; KERNEL]; KERNEL],
}

impl GaussianKernel {
    pub const DEFAULT_SIGMA: f64 = 1.0;

    /// Samples the isotropic Gaussian at integer offsets and normalizes.
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidKernel(format!("sigma must be > 0, got {sigma}")));
        }
        let mut raw = [[0f64; KERNEL]; KERNEL];
        let mut sum = 0.0;
        for (i, row) in raw.iter_mut().enumerate() {
            for (j, w) in row.iter_mut().enumerate() {
                let di = i as f64 - PAD as f64;
                let dj = j as f64 - PAD as f64;
                *w = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
                sum += *w;
            }
        }
        let weights = raw.map(|row| row.map(|w| (w / sum) as f32));
        Self::from_array(weights)
    }

    pub fn from_array(weights: [[f32; KERNEL]; KERNEL]) -> Result<Self> {
        let mut sum = 0f64;
        for i in 0..KERNEL {
            for j in 0..KERNEL {
                let w = weights[i][j];
                if !(w.is_finite() && w > 0.0) {
                    return Err(Error::InvalidKernel(format!("weight ({i},{j}) = {w} is not > 0")));
                }
                let mirrors = [
                    weights[KERNEL - 1 - i][j],
                    weights[i][KERNEL - 1 - j],
                    weights[j][i],
                ];
                if mirrors.iter().any(|&m| (m - w).abs() > 1e-6) {
                    return Err(Error::InvalidKernel(format!("weight ({i},{j}) breaks symmetry")));
                }
                sum += w as f64;
            }
        }
        if (sum - 1.0).abs() > 1e-4 {
            return Err(Error::InvalidKernel(format!("weights sum to {sum}, expected 1")));
        }
        Ok(Self { weights })
    }

    /// Accepts any nested shape and rejects everything but 5×5.
    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        if rows.len() != KERNEL || rows.iter().any(|r| r.len() != KERNEL) {
            let shape: Vec<usize> = rows.iter().map(Vec::len).collect();
            return Err(Error::InvalidKernel(format!("expected 5×5, got row lengths {shape:?}")));
        }
        let mut weights = [[0f32; KERNEL]; KERNEL];
        for (dst, src) in weights.iter_mut().zip(rows) {
            dst.copy_from_slice(src);
        }
        Self::from_array(weights)
    }

    pub fn weights(&self) -> &[[f32; KERNEL]; KERNEL] {
        &self.weights
    }
}

impl Default for GaussianKernel {
    fn default() -> Self {
        Self::gaussian(Self::DEFAULT_SIGMA).expect("default sigma is valid")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothedFrame {
    pub cells: [[f32; GRID]; GRID],
    pub mac_count: u32,
}

/// Convolves the frame with `kernel` over a 2-cell zero border, so the output
/// keeps the 8×8 shape and cells near the edges are pulled toward zero.
/// Invalid zones enter the convolution at maximum range.
pub fn smooth_depth(frame: &DepthFrame, kernel: &GaussianKernel) -> SmoothedFrame {
    const P: usize = GRID + 2 * PAD;
    let mut padded = [[0f32; P]; P];
    for r in 0..GRID {
        for c in 0..GRID {
            padded[r + PAD][c + PAD] = frame.effective(r, c) as f32;
        }
    }

    let w = kernel.weights();
    let mut cells = [[0f32; GRID]; GRID];
    let mut mac_count = 0u32;
    for (r, out_row) in cells.iter_mut().enumerate() {
        for (c, out) in out_row.iter_mut().enumerate() {
            let mut acc = 0f32;
            for (i, w_row) in w.iter().enumerate() {
                let window = &padded[r + i][c..c + KERNEL];
                for (k, v) in w_row.iter().zip(window) {
                    acc += k * v;
                    mac_count += 1;
                }
            }
            *out = acc;
        }
    }
    SmoothedFrame { cells, mac_count }
}

/// Steering zone implied by the freest column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    LeftTurn,
    NoTurn,
    RightTurn,
}

impl Zone {
    pub const ALL: [Zone; 3] = [Zone::LeftTurn, Zone::NoTurn, Zone::RightTurn];

    /// Columns 0–2 steer left, 5–7 steer right.
    pub fn from_column(col: u8) -> Zone {
        match col {
            0..=2 => Zone::LeftTurn,
            5.. => Zone::RightTurn,
            _ => Zone::NoTurn,
        }
    }

    pub fn mirrored(self) -> Zone {
        match self {
            Zone::LeftTurn => Zone::RightTurn,
            Zone::NoTurn => Zone::NoTurn,
            Zone::RightTurn => Zone::LeftTurn,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Zone::LeftTurn => "left_turn",
            Zone::NoTurn => "no_turn",
            Zone::RightTurn => "right_turn",
        }
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalPercept {
    /// Column of the maximal smoothed cell, 0 = leftmost.
    pub x_dmax: u8,
    pub zone: Zone,
    /// Mean of the four central raw cells, mm.
    pub d_c: f32,
}

/// Mean of rows 3–4 × columns 3–4 of the raw frame.
pub fn central_distance(raw: &DepthFrame) -> f32 {
    let mut sum = 0f32;
    for r in 3..=4 {
        for c in 3..=4 {
            sum += raw.effective(r, c) as f32;
        }
    }
    sum / 4.0
}

/// Picks the freest column of the smoothed frame. Exact ties prefer the column
/// nearest the image center, then the lower row, then the lower column.
pub fn extract_percept(sm: &SmoothedFrame, raw: &DepthFrame) -> LocalPercept {
    // (value, center distance in half-columns, row, col)
    let mut best = (f32::NEG_INFINITY, usize::MAX, 0usize, 0usize);
    for (r, row) in sm.cells.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let off = (2 * c).abs_diff(GRID - 1);
            let better = v > best.0 || (v == best.0 && off < best.1);
            if better {
                best = (v, off, r, c);
            }
        }
    }
    let x_dmax = best.3 as u8;
    LocalPercept { x_dmax, zone: Zone::from_column(x_dmax), d_c: central_distance(raw) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_from_fn(f: impl Fn(usize, usize) -> u16) -> DepthFrame {
        let mut cells = [[0u16; GRID]; GRID];
        for (r, row) in cells.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = f(r, c);
            }
        }
        DepthFrame::new(cells, u64::MAX, 0).unwrap()
    }

    #[test]
    fn constant_frame_is_identity_away_from_borders() {
        let k = GaussianKernel::default();
        let sm = smooth_depth(&DepthFrame::uniform(4000).unwrap(), &k);
        assert_eq!(sm.mac_count, 1600);
        let interior = sm.cells[3][3];
        assert!((interior - 4000.0).abs() < 4000.0 * 1e-6, "{interior}");
        // Every cell whose neighborhood touches the zero border is attenuated.
        assert!(sm.cells[0][0] < 4000.0);
        assert!(sm.cells[1][3] < 4000.0);
        assert!(sm.cells[3][0] < sm.cells[3][3]);
    }

    #[test]
    fn single_peak_keeps_its_location() {
        let k = GaussianKernel::default();
        let raw = frame_from_fn(|r, c| if (r, c) == (3, 3) { 4000 } else { 200 });
        let sm = smooth_depth(&raw, &k);
        let mut best = (0, 0);
        for r in 0..GRID {
            for c in 0..GRID {
                if sm.cells[r][c] > sm.cells[best.0][best.1] {
                    best = (r, c);
                }
            }
        }
        assert_eq!(best, (3, 3));
    }

    #[test]
    fn uniform_frame_steers_straight() {
        let raw = DepthFrame::uniform(2500).unwrap();
        let p = extract_percept(&smooth_depth(&raw, &GaussianKernel::default()), &raw);
        assert!(p.x_dmax == 3 || p.x_dmax == 4);
        assert_eq!(p.zone, Zone::NoTurn);
    }

    #[test]
    fn free_left_half_steers_left() {
        let raw = frame_from_fn(|_, c| if c < 4 { 4000 } else { 200 });
        let p = extract_percept(&smooth_depth(&raw, &GaussianKernel::default()), &raw);
        assert_eq!(p.zone, Zone::LeftTurn, "x_dmax = {}", p.x_dmax);
    }

    #[test]
    fn central_mean() {
        let raw = frame_from_fn(|r, c| match (r, c) {
            (3, 3) => 1000,
            (3, 4) => 1200,
            (4, 3) => 800,
            (4, 4) => 1000,
            _ => 3000,
        });
        assert_eq!(central_distance(&raw), 1000.0);
    }

    #[test]
    fn invalid_cells_count_as_max_range() {
        let mut cells = [[1000u16; GRID]; GRID];
        cells[3][3] = 0;
        let valid = u64::MAX & !(1 << (3 * GRID + 3));
        let raw = DepthFrame::new(cells, valid, 7).unwrap();
        assert_eq!(central_distance(&raw), 1750.0);
        let sm = smooth_depth(&raw, &GaussianKernel::default());
        let p = extract_percept(&sm, &raw);
        assert_eq!(p.x_dmax, 3);
    }

    #[test]
    fn exact_ties_prefer_center_column() {
        let mut sm = SmoothedFrame { cells: [[0.0; GRID]; GRID], mac_count: 1600 };
        sm.cells[6][0] = 10.0;
        sm.cells[5][5] = 10.0;
        sm.cells[2][2] = 10.0;
        let raw = DepthFrame::uniform(1000).unwrap();
        assert_eq!(extract_percept(&sm, &raw).x_dmax, 2);
        sm.cells[1][5] = 10.0;
        // columns 2 and 5 are equally central; lower row wins
        assert_eq!(extract_percept(&sm, &raw).x_dmax, 5);
    }

    #[test]
    fn rejects_bad_shapes_and_ranges() {
        assert!(DepthFrame::from_slice(&[1000; 63], u64::MAX, 0).is_err());
        assert!(DepthFrame::from_slice(&[1000; 65], u64::MAX, 0).is_err());
        assert!(DepthFrame::uniform(100).is_err());
        assert!(DepthFrame::uniform(4001).is_err());
        // out-of-range values are fine when flagged invalid
        assert!(DepthFrame::from_slice(&[0; 64], 0, 0).is_ok());
    }

    #[test]
    fn kernel_validation() {
        let k = GaussianKernel::default();
        let sum: f32 = k.weights().iter().flatten().sum();
        assert!((sum - 1.0).abs() < 1e-6);
        assert!(GaussianKernel::from_rows(&vec![vec![0.04; 5]; 4]).is_err());
        assert!(GaussianKernel::from_rows(&vec![vec![1.0 / 9.0; 3]; 3]).is_err());
        assert!(GaussianKernel::from_rows(&vec![vec![0.05; 5]; 5]).is_err());
        assert!(GaussianKernel::from_rows(&vec![vec![0.04; 5]; 5]).is_ok());
        let mut lopsided = *k.weights();
        lopsided[0][1] += 0.01;
        lopsided[2][2] -= 0.01;
        assert!(GaussianKernel::from_array(lopsided).is_err());
        assert!(GaussianKernel::gaussian(0.0).is_err());
    }

    #[test]
    fn csv_row_round_trip() {
        let raw = frame_from_fn(|r, c| 200 + (r * 8 + c) as u16 * 50);
        let mut cells = *raw.cells();
        cells[0][0] = 0;
        let f = DepthFrame::new(cells, u64::MAX ^ 1, 42).unwrap();
        let line = f.to_csv_row();
        assert!(line.ends_with(",0xfffffffffffffffe,42"));
        assert_eq!(DepthFrame::from_csv_row(&line).unwrap(), f);
        assert!(DepthFrame::from_csv_row("1,2,3").is_err());
    }
}
