//! Outer-boundary tracing and the 22 chain-code shape features.
//!
//! Directions follow the 8-way Freeman numbering, counter-clockwise from
//! east, with `y` pointing down on screen:
//!
//! ```text
//!   3 2 1
//!   4 . 0
//!   5 6 7
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::raster::{BinaryImage, GrayImage};

/// `(dx, dy)` per Freeman code.
pub const DIRECTIONS: [(isize, isize); 8] = [(1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)];

/// Circularity reported when the distance spread collapses.
pub const CIRCULARITY_CAP: f64 = 1e6;
const SIGMA_FLOOR: f64 = 1e-9;

fn direction_of(dx: isize, dy: isize) -> usize {
    DIRECTIONS
        .iter()
        .position(|&d| d == (dx, dy))
        .expect("offset is a unit neighbour step")
}

/// A closed boundary as a start pixel plus Freeman direction codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainCode {
    start: (usize, usize),
    codes: Vec<u8>,
}

impl ChainCode {
    pub fn new(start: (usize, usize), codes: Vec<u8>) -> Result<Self> {
        if let Some(c) = codes.iter().find(|&&c| c > 7) {
            return Err(Error::InvalidParameter(format!("chain code {c} outside 0..=7")));
        }
        Ok(ChainCode { start, codes })
    }

    pub fn start(&self) -> (usize, usize) {
        self.start
    }

    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    /// Sum of unit steps; `(0, 0)` for every closed boundary.
    pub fn displacement(&self) -> (isize, isize) {
        self.codes.iter().fold((0, 0), |(x, y), &c| {
            let (dx, dy) = DIRECTIONS[c as usize];
            (x + dx, y + dy)
        })
    }
}

/// All traced outer boundaries of an image.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySet {
    pub boundaries: Vec<ChainCode>,
    /// Distinct pixels visited by the traces, sorted by `(y, x)`.
    pub boundary_pixels: Vec<(usize, usize)>,
    /// Coordinate sums over every foreground pixel.
    pub foreground_sum: (u64, u64),
    pub foreground_count: usize,
}

impl BoundarySet {
    /// Wraps bare chain codes (no pixel geometry) for the histogram features.
    pub fn from_chain_codes(boundaries: Vec<ChainCode>) -> Self {
        BoundarySet {
            boundaries,
            boundary_pixels: Vec::new(),
            foreground_sum: (0, 0),
            foreground_count: 0,
        }
    }

    /// Mean coordinate of every foreground pixel.
    pub fn centroid(&self) -> (f64, f64) {
        let n = self.foreground_count.max(1) as f64;
        (self.foreground_sum.0 as f64 / n, self.foreground_sum.1 as f64 / n)
    }

    fn all_codes(&self) -> impl Iterator<Item = u8> + '_ {
        self.boundaries.iter().flat_map(|b| b.codes.iter().copied())
    }

    fn code_count(&self) -> usize {
        self.boundaries.iter().map(|b| b.codes.len()).sum()
    }

    /// One line per boundary: start `x y`, then the code digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for b in &self.boundaries {
            let digits: String = b.codes.iter().map(|c| char::from(b'0' + c)).collect();
            let _ = writeln!(out, "{} {} {}", b.start.0, b.start.1, digits);
        }
        out
    }

    /// Debug overlay: paper white, ink grey, traced boundary black.
    pub fn overlay(&self, img: &BinaryImage) -> GrayImage {
        let mut data: Vec<u8> = img.data().iter().map(|&v| if v == 1 { 160 } else { 255 }).collect();
        for &(x, y) in &self.boundary_pixels {
            data[y * img.width() + x] = 0;
        }
        GrayImage::new(img.width(), img.height(), data).expect("same dimensions as the input")
    }
}

/// Traces the outer boundary of every 8-connected foreground component with
/// Moore-neighbour tracing (clockwise on screen) and Jacob's stopping rule.
///
/// Components are visited in row-major order of their first pixel, which is
/// also where each trace starts. Returns [`Error::NoForeground`] for a blank
/// image.
pub fn trace_boundaries(img: &BinaryImage) -> Result<BoundarySet> {
    let (w, h) = (img.width(), img.height());
    let mut labelled = vec![false; w * h];
    let mut boundaries = Vec::new();
    let mut pixels = BTreeSet::new();
    let (mut sx, mut sy, mut count) = (0u64, 0u64, 0usize);

    for y in 0..h {
        for x in 0..w {
            if !img.get(x, y) || labelled[y * w + x] {
                continue;
            }
            let size = flood_component(img, (x, y), &mut labelled, |px, py| {
                sx += px as u64;
                sy += py as u64;
            });
            count += size;
            let (chain, visited) = trace_from(img, (x, y), size);
            pixels.extend(visited.into_iter().map(|(px, py)| (py, px)));
            boundaries.push(chain);
        }
    }

    if boundaries.is_empty() {
        return Err(Error::NoForeground);
    }
    Ok(BoundarySet {
        boundaries,
        boundary_pixels: pixels.into_iter().map(|(y, x)| (x, y)).collect(),
        foreground_sum: (sx, sy),
        foreground_count: count,
    })
}

fn flood_component(
    img: &BinaryImage,
    seed: (usize, usize),
    labelled: &mut [bool],
    mut visit: impl FnMut(usize, usize),
) -> usize {
    let w = img.width();
    let mut stack = vec![seed];
    labelled[seed.1 * w + seed.0] = true;
    let mut size = 0;
    while let Some((x, y)) = stack.pop() {
        size += 1;
        visit(x, y);
        for &(dx, dy) in &DIRECTIONS {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            if img.ink_at(nx, ny) {
                let idx = ny as usize * w + nx as usize;
                if !labelled[idx] {
                    labelled[idx] = true;
                    stack.push((nx as usize, ny as usize));
                }
            }
        }
    }
    size
}

fn trace_from(img: &BinaryImage, start: (usize, usize), component_size: usize) -> (ChainCode, Vec<(usize, usize)>) {
    let mut cur = (start.0 as isize, start.1 as isize);
    let origin = cur;
    // Direction from the current pixel to the backtrack (background) pixel.
    // The start is the first component pixel in row-major order, so its west
    // neighbour is background.
    let mut back = 4usize;
    let mut first_move = None;
    let mut codes = Vec::new();
    let mut visited = vec![start];
    // each (pixel, backtrack) state occurs at most once per period
    let max_steps = 8 * component_size + 8;

    while codes.len() <= max_steps {
        let Some(dir) = (1..=8)
            .map(|k| (back + 8 - k) % 8)
            .find(|&d| img.ink_at(cur.0 + DIRECTIONS[d].0, cur.1 + DIRECTIONS[d].1))
        else {
            break; // isolated pixel
        };
        if cur == origin && first_move == Some(dir) {
            break;
        }
        first_move.get_or_insert(dir);

        // The neighbour examined just before `dir` was background; it becomes
        // the backtrack pixel, expressed relative to the new position.
        let prev = (dir + 1) % 8;
        let (dx, dy) = DIRECTIONS[dir];
        back = direction_of(DIRECTIONS[prev].0 - dx, DIRECTIONS[prev].1 - dy);
        cur = (cur.0 + dx, cur.1 + dy);
        codes.push(dir as u8);
        visited.push((cur.0 as usize, cur.1 as usize));
    }
    debug_assert!(codes.len() <= max_steps, "Moore trace failed to close");
    // the final step lands back on the start pixel
    if !codes.is_empty() {
        visited.pop();
    }
    (ChainCode { start, codes }, visited)
}

/// Normalized frequency of each of the 8 direction codes (F1-F8).
pub fn chain_code_histogram(bs: &BoundarySet) -> [f64; 8] {
    let mut hist = [0.0; 8];
    let total = bs.code_count();
    if total == 0 {
        return hist;
    }
    for c in bs.all_codes() {
        hist[c as usize] += 1.0;
    }
    hist.iter_mut().for_each(|v| *v /= total as f64);
    hist
}

/// Signed turn between consecutive codes, `None` for an exact reversal.
pub fn signed_turn(from: u8, to: u8) -> Option<i8> {
    match (to + 8 - from) % 8 {
        4 => None,
        d @ 0..=3 => Some(d as i8),
        d => Some(d as i8 - 8),
    }
}

/// Histogram of cyclic first differences as signed turns `-3..=3` (F9-F15).
///
/// Bin `i` holds turn `i - 3`. Reversals are skipped and the histogram is
/// normalized by the number of turns actually counted.
pub fn first_difference_histogram(bs: &BoundarySet) -> [f64; 7] {
    let mut hist = [0.0; 7];
    let mut counted = 0usize;
    for b in &bs.boundaries {
        let n = b.codes.len();
        for i in 0..n {
            if let Some(turn) = signed_turn(b.codes[i], b.codes[(i + 1) % n]) {
                hist[(turn + 3) as usize] += 1.0;
                counted += 1;
            }
        }
    }
    if counted > 0 {
        hist.iter_mut().for_each(|v| *v /= counted as f64);
    }
    hist
}

/// Boundary length with axis steps counted as 1 and diagonal steps as sqrt(2) (F16).
pub fn perimeter_length(bs: &BoundarySet) -> f64 {
    let odd = bs.all_codes().filter(|c| c % 2 == 1).count();
    let even = bs.code_count() - odd;
    even as f64 + std::f64::consts::SQRT_2 * odd as f64
}

/// Haralick circularity `mu_R / sigma_R` over centroid-to-boundary distances (F17).
///
/// Uses the population deviation; returns [`CIRCULARITY_CAP`] when it falls
/// below `1e-9`.
pub fn circularity(bs: &BoundarySet) -> Result<f64> {
    if bs.boundary_pixels.is_empty() {
        return Err(Error::NoForeground);
    }
    // offsets from an integer origin keep the arithmetic translation exact
    let ox = bs.boundary_pixels.iter().map(|p| p.0).min().unwrap_or(0) as u64;
    let oy = bs.boundary_pixels[0].1 as u64;
    let n = bs.foreground_count.max(1) as u64;
    let cx = bs.foreground_sum.0.saturating_sub(n * ox) as f64 / n as f64;
    let cy = bs.foreground_sum.1.saturating_sub(n * oy) as f64 / n as f64;
    let dists: Vec<f64> = bs
        .boundary_pixels
        .iter()
        .map(|&(x, y)| ((x as u64 - ox) as f64 - cx).hypot((y as u64 - oy) as f64 - cy))
        .collect();
    let k = dists.len() as f64;
    let mean = dists.iter().sum::<f64>() / k;
    let sigma = (dists.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / k).sqrt();
    Ok(if sigma < SIGMA_FLOOR {
        CIRCULARITY_CAP
    } else {
        mean / sigma
    })
}

/// Slope-angle classes `[0, |45|, |90|, |135|, 180]` degrees, normalized (F18-F22).
pub fn slope_counts(bs: &BoundarySet) -> [f64; 5] {
    const BIN: [usize; 8] = [0, 1, 2, 3, 4, 3, 2, 1];
    let mut bins = [0.0; 5];
    let total = bs.code_count();
    if total == 0 {
        return bins;
    }
    for c in bs.all_codes() {
        bins[BIN[c as usize]] += 1.0;
    }
    bins.iter_mut().for_each(|v| *v /= total as f64);
    bins
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ContourFeatures {
    pub cch: [f64; 8],
    pub first_diff: [f64; 7],
    pub perimeter: f64,
    pub circularity: f64,
    pub slope_counts: [f64; 5],
}

impl ContourFeatures {
    pub const LEN: usize = 22;

    pub fn from_boundaries(bs: &BoundarySet) -> Result<Self> {
        Ok(ContourFeatures {
            cch: chain_code_histogram(bs),
            first_diff: first_difference_histogram(bs),
            perimeter: perimeter_length(bs),
            circularity: circularity(bs)?,
            slope_counts: slope_counts(bs),
        })
    }

    pub fn to_array(&self) -> [f64; Self::LEN] {
        let mut out = [0.0; Self::LEN];
        out[..8].copy_from_slice(&self.cch);
        out[8..15].copy_from_slice(&self.first_diff);
        out[15] = self.perimeter;
        out[16] = self.circularity;
        out[17..].copy_from_slice(&self.slope_counts);
        out
    }
}

/// F1-F22 for a binary text line; a blank image gives all zeros.
pub fn contour_features(img: &BinaryImage) -> ContourFeatures {
    match trace_boundaries(img) {
        Ok(bs) => ContourFeatures::from_boundaries(&bs).expect("traced set has boundary pixels"),
        Err(_) => ContourFeatures::default(),
    }
}
