//! Series-to-image rendering.
//!
//! A series is drawn as a waveform into a fixed-size grayscale canvas. The
//! renderer is deterministic to the byte on every platform:
//!
//! * plot coordinates and radii are snapped to a 1/256-pixel grid, on which
//!   sample centers also fall, so all geometry below is integer arithmetic;
//! * coverage is the number of points of a regular 16×16 sample grid inside
//!   the shape, found per sample row by intersecting the row with each shape
//!   exactly and counting the sample columns in the merged spans;
//! * a pixel with `c` covered samples gets ink `(255·c + 128) / 256`.
//!
//! `Line` draws segments of width `scale` with butt caps at the two ends and
//! round joins at interior vertices. `Point` stamps a disc of radius `scale`
//! at every point.

use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::data::TimeSeries;
use crate::error::{GtdaError, Result};

/// Sample grid resolution per pixel axis.
pub const SUBSAMPLES: usize = 16;
/// Plot coordinates are snapped to multiples of `1 / SUBPIXEL`.
pub const SUBPIXEL: f64 = 256.0;

/// Curve scales of the parameter grid, in output pixels.
pub const SCALES: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 2.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CurveType {
    Line,
    Point,
}

impl CurveType {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveType::Line => "line",
            CurveType::Point => "point",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "line" => Some(CurveType::Line),
            "point" => Some(CurveType::Point),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Normalization {
    Normal,
    NonNormal,
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::Normal => "normal",
            Normalization::NonNormal => "non_normal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "normal" => Some(Normalization::Normal),
            "non_normal" | "nonnormal" => Some(Normalization::NonNormal),
            _ => None,
        }
    }
}

/// How the vertical axis range is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisMode {
    /// Fit each sample's own min/max to the plot box.
    PerSample,
    /// Use one fixed value range for every sample. Applies to raw values;
    /// normalized samples always span `[0, 1]`. Values outside are clamped.
    Shared { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct S2IParams {
    pub scale: f64,
    pub curve_type: CurveType,
    pub normalize: Normalization,
    pub width_px: usize,
    pub height_px: usize,
    pub margin_px: usize,
    pub axis: AxisMode,
}

impl Default for S2IParams {
    fn default() -> Self {
        S2IParams {
            scale: 1.5,
            curve_type: CurveType::Line,
            normalize: Normalization::NonNormal,
            width_px: 224,
            height_px: 224,
            margin_px: 8,
            axis: AxisMode::PerSample,
        }
    }
}

impl S2IParams {
    pub fn with_size(mut self, width: usize, height: usize) -> Self {
        self.width_px = width;
        self.height_px = height;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(GtdaError::InvalidInput(format!("S2I scale {} must be positive", self.scale)));
        }
        if self.width_px < 32 || self.height_px < 32 {
            return Err(GtdaError::InvalidInput(format!(
                "S2I canvas {}x{} is below the 32x32 minimum",
                self.width_px, self.height_px
            )));
        }
        if 4 * self.margin_px >= self.width_px.min(self.height_px) {
            return Err(GtdaError::InvalidInput(format!(
                "S2I margin {} must be below a quarter of the canvas side",
                self.margin_px
            )));
        }
        if let AxisMode::Shared { lo, hi } = self.axis {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(GtdaError::InvalidInput(format!("shared axis range [{lo}, {hi}] is invalid")));
            }
        }
        Ok(())
    }

    /// Short tag used for grid cell names and cache keys.
    pub fn tag(&self) -> String {
        format!("{}-{}-{}", self.scale, self.curve_type.as_str(), self.normalize.as_str())
    }
}

impl fmt::Display for S2IParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}) {}x{} margin {}",
            self.scale,
            self.curve_type.as_str(),
            self.normalize.as_str(),
            self.width_px,
            self.height_px,
            self.margin_px
        )
    }
}

/// The full scale × curve type × normalization product, 20 entries, ordered
/// lexicographically with scale slowest. Canvas settings come from `base`.
pub fn param_grid(base: &S2IParams) -> Vec<S2IParams> {
    let mut out = Vec::with_capacity(SCALES.len() * 4);
    for &scale in &SCALES {
        for curve_type in [CurveType::Line, CurveType::Point] {
            for normalize in [Normalization::Normal, Normalization::NonNormal] {
                out.push(S2IParams {
                    scale,
                    curve_type,
                    normalize,
                    ..base.clone()
                });
            }
        }
    }
    out
}

/// Row-major ink densities: 0 is background, 255 full ink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn blank(width: usize, height: usize) -> Self {
        RasterImage {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(GtdaError::InvalidInput(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(RasterImage { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn total_ink(&self) -> u64 {
        self.pixels.iter().map(|&p| p as u64).sum()
    }

    /// Pixels scaled to `[0, 1]` for the classifier.
    pub fn to_unit(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64 / 255.0).collect()
    }
}

/// Maps values to `[0, 1]` by `(x − min) / (max − min)`. A constant series
/// maps to 0.5 everywhere.
pub fn minmax_normalize(series: &TimeSeries) -> TimeSeries {
    let values = normalized_values(series.values());
    TimeSeries::from_parts_unchecked(series.id().to_string(), values)
}

fn normalized_values(v: &[f64]) -> Vec<f64> {
    let (lo, hi) = min_max(v);
    let range = hi - lo;
    if range == 0.0 {
        vec![0.5; v.len()]
    } else {
        v.iter().map(|&x| (x - lo) / range).collect()
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Keeps every bucket's minimum and maximum, in time order, so narrow spikes
/// survive. Returns `(original index, value)` pairs.
fn decimate(v: &[f64], buckets: usize) -> Vec<(usize, f64)> {
    let n = v.len();
    let mut out = Vec::with_capacity(2 * buckets);
    for b in 0..buckets {
        let start = b * n / buckets;
        let end = ((b + 1) * n / buckets).max(start + 1);
        let mut imin = start;
        let mut imax = start;
        for i in start..end {
            if v[i] < v[imin] {
                imin = i;
            }
            if v[i] > v[imax] {
                imax = i;
            }
        }
        let (first, second) = if imin <= imax { (imin, imax) } else { (imax, imin) };
        out.push((first, v[first]));
        if second != first {
            out.push((second, v[second]));
        }
    }
    out
}

fn snap(x: f64) -> f64 {
    (x * SUBPIXEL).round() / SUBPIXEL
}

/// Plot positions of the series in pixel coordinates (y grows downward),
/// snapped to the subpixel grid. Series longer than four times the canvas
/// width are min/max decimated into `width_px` buckets first.
pub fn plot_points(series: &TimeSeries, params: &S2IParams) -> Vec<(f64, f64)> {
    let raw = series.values();
    let values: Vec<f64> = match params.normalize {
        Normalization::Normal => normalized_values(raw),
        Normalization::NonNormal => raw.to_vec(),
    };
    let n = values.len();
    let indexed: Vec<(usize, f64)> = if n > 4 * params.width_px {
        decimate(&values, params.width_px)
    } else {
        values.iter().copied().enumerate().collect()
    };
    let (lo, hi) = match (params.axis, params.normalize) {
        (AxisMode::Shared { .. }, Normalization::Normal) => (0.0, 1.0),
        (AxisMode::Shared { lo, hi }, Normalization::NonNormal) => (lo, hi),
        (AxisMode::PerSample, _) => min_max(&values),
    };
    let m = params.margin_px as f64;
    let w = params.width_px as f64;
    let h = params.height_px as f64;
    let x_span = w - 2.0 * m;
    let y_span = h - 2.0 * m;
    let last = (n - 1) as f64;
    indexed
        .into_iter()
        .map(|(i, v)| {
            let x = m + i as f64 * x_span / last;
            let frac = if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
            let y = (h - m) - frac * y_span;
            (snap(x), snap(y))
        })
        .collect()
}

/// Primitive shapes a curve is made of, in 1/256-pixel integer units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// Points within `radius` of the segment, measured perpendicular to it,
    /// whose projection falls inside the segment (a butt-capped stroke).
    Band { a: (i64, i64), b: (i64, i64), radius: i64 },
    Disc { c: (i64, i64), radius: i64 },
}

fn to_units(x: f64) -> i64 {
    (x * SUBPIXEL).round() as i64
}

/// Decomposes a curve into shapes. Coordinates and the radius are snapped to
/// the subpixel grid.
pub fn curve_shapes(points: &[(f64, f64)], curve_type: CurveType, scale: f64) -> Vec<Shape> {
    let pts: Vec<(i64, i64)> = points.iter().map(|&(x, y)| (to_units(x), to_units(y))).collect();
    match curve_type {
        CurveType::Point => {
            let radius = to_units(scale);
            pts.iter().map(|&c| Shape::Disc { c, radius }).collect()
        }
        CurveType::Line => {
            let radius = to_units(scale / 2.0);
            let mut shapes: Vec<Shape> = pts
                .windows(2)
                .filter(|w| w[0] != w[1])
                .map(|w| Shape::Band { a: w[0], b: w[1], radius })
                .collect();
            if pts.len() > 2 {
                shapes.extend(pts[1..pts.len() - 1].iter().map(|&c| Shape::Disc { c, radius }));
            }
            shapes
        }
    }
}

/// Sample grid spacing and offset in subpixel units: sample `s` sits at
/// `STEP·s + HALF`.
const STEP: i64 = SUBPIXEL as i64 / SUBSAMPLES as i64;
const HALF: i64 = STEP / 2;

fn div_floor(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn div_ceil(a: i128, b: i128) -> i128 {
    -div_floor(-a, b)
}

fn isqrt(n: i128) -> i128 {
    if n <= 0 {
        return 0;
    }
    let mut x = (n as f64).sqrt() as i128;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

/// Sample indices `s` with `lo ≤ coef·(STEP·s + HALF) + off ≤ hi`.
fn sample_range(coef: i128, off: i128, lo: i128, hi: i128) -> Option<(i128, i128)> {
    let slope = coef * STEP as i128;
    let base = coef * HALF as i128 + off;
    if slope == 0 {
        return (lo <= base && base <= hi).then_some((i128::MIN / 4, i128::MAX / 4));
    }
    let (lo, hi) = (lo - base, hi - base);
    Some(if slope > 0 {
        (div_ceil(lo, slope), div_floor(hi, slope))
    } else {
        (div_ceil(hi, slope), div_floor(lo, slope))
    })
}

impl Shape {
    fn y_extent(&self) -> (i64, i64) {
        match *self {
            Shape::Disc { c, radius } => (c.1 - radius, c.1 + radius),
            Shape::Band { a, b, radius } => (a.1.min(b.1) - radius, a.1.max(b.1) + radius),
        }
    }

    /// Sample columns covered on the sample row at height `y` (subpixel units).
    fn row_span(&self, y: i64) -> Option<(i128, i128)> {
        match *self {
            Shape::Disc { c, radius } => {
                let dy = (y - c.1) as i128;
                let rem = (radius as i128).pow(2) - dy * dy;
                if rem < 0 {
                    return None;
                }
                let q = isqrt(rem);
                let cx = c.0 as i128;
                sample_range(1, 0, cx - q, cx + q)
            }
            Shape::Band { a, b, radius } => {
                let (ax, ay) = (a.0 as i128, a.1 as i128);
                let dx = (b.0 - a.0) as i128;
                let dy = (b.1 - a.1) as i128;
                let len2 = dx * dx + dy * dy;
                let ry = y as i128 - ay;
                // projection (x − ax)·dx + ry·dy ∈ [0, len2]
                let (t_lo, t_hi) = sample_range(dx, ry * dy - ax * dx, 0, len2)?;
                // cross product ry·dx − (x − ax)·dy, |cross| ≤ r·|d|
                let bound = isqrt((radius as i128).pow(2) * len2);
                let (s_lo, s_hi) = sample_range(-dy, ry * dx + ax * dy, -bound, bound)?;
                let lo = t_lo.max(s_lo);
                let hi = t_hi.min(s_hi);
                (lo <= hi).then_some((lo, hi))
            }
        }
    }
}

/// Renders shapes into a coverage image. Each pixel's value comes from the
/// count of covered points of its 16×16 sample grid.
pub fn render_shapes(shapes: &[Shape], width: usize, height: usize) -> RasterImage {
    let rows = (height * SUBSAMPLES) as i64;
    let cols = (width * SUBSAMPLES) as i128;
    // (sample row, first sample column, last sample column)
    let mut spans: Vec<(u32, u32, u32)> = Vec::new();
    for shape in shapes {
        let (y0, y1) = shape.y_extent();
        let k0 = div_ceil((y0 - HALF) as i128, STEP as i128).max(0) as i64;
        let k1 = div_floor((y1 - HALF) as i128, STEP as i128).min(rows as i128 - 1) as i64;
        for k in k0..=k1 {
            if let Some((a, b)) = shape.row_span(STEP * k + HALF) {
                let a = a.max(0);
                let b = b.min(cols - 1);
                if a <= b {
                    spans.push((k as u32, a as u32, b as u32));
                }
            }
        }
    }
    spans.sort_unstable();

    let mut counts = vec![0u16; width * height];
    let mut flush = |k: u32, a: u32, b: u32| {
        let row = (k as usize / SUBSAMPLES) * width;
        let (pa, pb) = (a as usize / SUBSAMPLES, b as usize / SUBSAMPLES);
        for p in pa..=pb {
            let lo = (a as usize).max(p * SUBSAMPLES);
            let hi = (b as usize).min(p * SUBSAMPLES + SUBSAMPLES - 1);
            counts[row + p] += (hi - lo + 1) as u16;
        }
    };
    let mut iter = spans.into_iter();
    if let Some(mut cur) = iter.next() {
        for next in iter {
            if next.0 == cur.0 && next.1 <= cur.2 + 1 {
                cur.2 = cur.2.max(next.2);
            } else {
                flush(cur.0, cur.1, cur.2);
                cur = next;
            }
        }
        flush(cur.0, cur.1, cur.2);
    }
    let pixels = counts.into_iter().map(coverage_to_ink).collect();
    RasterImage { width, height, pixels }
}

/// Maps a covered-sample count (0..=256) to an ink level.
pub fn coverage_to_ink(count: u16) -> u8 {
    let area = (SUBSAMPLES * SUBSAMPLES) as u32;
    ((count as u32 * 255 + area / 2) / area) as u8
}

/// Draws the series as a waveform image.
pub fn rasterize(series: &TimeSeries, params: &S2IParams) -> Result<RasterImage> {
    params.validate()?;
    let points = plot_points(series, params);
    let shapes = curve_shapes(&points, params.curve_type, params.scale);
    Ok(render_shapes(&shapes, params.width_px, params.height_px))
}

/// Writes a binary PGM. Bytes are `255 − ink` so ink shows dark.
pub fn write_pgm(image: &RasterImage, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(image.pixels.len() + 20);
    write!(buf, "P5\n{} {}\n255\n", image.width, image.height).expect("write to Vec");
    buf.extend(image.pixels.iter().map(|&p| 255 - p));
    std::fs::write(path, buf).map_err(|e| GtdaError::io(path, e))
}

/// Reads a binary PGM (maxval 255) written by [`write_pgm`] or any P5 writer.
pub fn read_pgm(path: &Path) -> Result<RasterImage> {
    let bytes = std::fs::read(path).map_err(|e| GtdaError::io(path, e))?;
    let bad = |msg: &str| GtdaError::Data(format!("{}: {msg}", path.display()));
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    if fields[0] != "P5" {
        return Err(bad("not a binary PGM (P5)"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad PGM header number"));
    let (width, height, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    let data = bytes.get(pos..pos + width * height).ok_or_else(|| bad("truncated PGM raster"))?;
    Ok(RasterImage {
        width,
        height,
        pixels: data.iter().map(|&b| 255 - b).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(v: &[f64]) -> TimeSeries {
        TimeSeries::new("s", v.to_vec()).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(minmax_normalize(&ts(&[2.0, 4.0, 6.0])).values(), &[0.0, 0.5, 1.0]);
        assert_eq!(minmax_normalize(&ts(&[5.0, 5.0, 5.0])).values(), &[0.5, 0.5, 0.5]);
        assert_eq!(minmax_normalize(&ts(&[-1.0, 0.0, 3.0])).values(), &[0.0, 0.25, 1.0]);
    }

    #[test]
    fn grid_order_and_contents() {
        let grid = param_grid(&S2IParams::default());
        assert_eq!(grid.len(), 20);
        assert_eq!(
            (grid[0].scale, grid[0].curve_type, grid[0].normalize),
            (0.5, CurveType::Line, Normalization::Normal)
        );
        assert!(grid
            .iter()
            .any(|p| p.scale == 1.5 && p.curve_type == CurveType::Line && p.normalize == Normalization::NonNormal));
        let default = S2IParams::default();
        assert_eq!(grid[9].tag(), default.tag());
    }

    #[test]
    fn params_validation() {
        assert!(S2IParams::default().validate().is_ok());
        assert!(S2IParams { scale: 0.0, ..Default::default() }.validate().is_err());
        assert!(S2IParams::default().with_size(31, 64).validate().is_err());
        assert!(S2IParams { margin_px: 8, ..Default::default() }.with_size(32, 32).validate().is_err());
        assert!(S2IParams { margin_px: 7, ..Default::default() }.with_size(32, 32).validate().is_ok());
    }

    #[test]
    fn constant_series_is_a_uniform_horizontal_band() {
        let params = S2IParams::default().with_size(64, 64);
        let img = rasterize(&ts(&[3.0; 20]), &params).unwrap();
        let column = |x: usize| (0..64).map(|y| img.get(x, y)).collect::<Vec<_>>();
        let inked: Vec<usize> = (0..64).filter(|&x| column(x).iter().any(|&p| p > 0)).collect();
        assert_eq!(inked, (8..56).collect::<Vec<_>>());
        let reference = column(8);
        for &x in &inked {
            assert_eq!(column(x), reference, "column {x}");
        }
        // centered on the midline y = 32
        assert_eq!(reference[31], reference[32]);
        assert!(reference[31] > 0);
        assert_eq!(reference[30], 0);
    }

    #[test]
    fn plot_points_stay_in_box() {
        let params = S2IParams::default().with_size(64, 48);
        let pts = plot_points(&ts(&[1e5, -3.0, 7.0, 0.0]), &params);
        for (x, y) in pts {
            assert!((8.0..=56.0).contains(&x) && (8.0..=40.0).contains(&y));
        }
    }

    #[test]
    fn decimation_keeps_spikes() {
        let mut v = vec![0.0; 10_000];
        v[5_003] = 50.0;
        v[7_777] = -40.0;
        let params = S2IParams::default().with_size(64, 64);
        let pts = plot_points(&ts(&v), &params);
        assert!(pts.len() <= 128);
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        assert!(ys.contains(&8.0));
        assert!(ys.contains(&56.0));
    }

    #[test]
    fn shared_axis_only_affects_raw_values() {
        let s = ts(&[0.0, 1.0, 0.5]);
        let shared = S2IParams {
            axis: AxisMode::Shared { lo: 0.0, hi: 10.0 },
            ..S2IParams::default().with_size(64, 64)
        };
        let per = S2IParams::default().with_size(64, 64);
        assert_ne!(rasterize(&s, &shared).unwrap(), rasterize(&s, &per).unwrap());
        let shared_norm = S2IParams { normalize: Normalization::Normal, ..shared };
        let per_norm = S2IParams { normalize: Normalization::Normal, ..per };
        assert_eq!(rasterize(&s, &shared_norm).unwrap(), rasterize(&s, &per_norm).unwrap());
    }

    #[test]
    fn coverage_rule_endpoints() {
        assert_eq!(coverage_to_ink(0), 0);
        assert_eq!(coverage_to_ink(256), 255);
        assert_eq!(coverage_to_ink(128), 128);
    }

    #[test]
    fn pgm_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        write_pgm(&RasterImage::blank(2, 2), &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"P5\n2 2\n255\n\xFF\xFF\xFF\xFF");

        let img = RasterImage::from_pixels(2, 1, vec![255, 10]).unwrap();
        write_pgm(&img, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[bytes.len() - 2..], &[0x00, 245]);
        assert_eq!(read_pgm(&path).unwrap(), img);
    }

    #[test]
    fn pgm_io_error_names_path() {
        let err = write_pgm(&RasterImage::blank(2, 2), Path::new("/nonexistent-dir/x.pgm")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.pgm"));
    }
}
