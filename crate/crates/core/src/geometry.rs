//! Visual-angle conversion and Gaussian fixation density maps.

use std::io::Write;

use crate::error::{Error, Result};
use crate::gaze::{Fixation, ImageAnnotation};
use crate::scalar::Scalar;

/// Physical viewing setup used to convert visual angle to pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViewingGeometry<T = f64> {
    /// Eye-to-screen distance in cm.
    pub viewing_distance: T,
    pub screen_width_cm: T,
    pub screen_height_cm: T,
    pub resolution_x: u32,
    pub resolution_y: u32,
}

impl<T: Scalar> ViewingGeometry<T> {
    /// 17" panel at 60 cm, 1280x1024. The panel is assumed 4:3, which the
    /// source setup does not state.
    pub fn pet_default() -> Self {
        let diag_cm = 17.0 * 2.54;
        ViewingGeometry {
            viewing_distance: T::lit(60.0),
            screen_width_cm: T::lit(diag_cm * 0.8),
            screen_height_cm: T::lit(diag_cm * 0.6),
            resolution_x: 1280,
            resolution_y: 1024,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.viewing_distance > T::zero()
            && self.screen_width_cm > T::zero()
            && self.screen_height_cm > T::zero()
            && self.resolution_x > 0
            && self.resolution_y > 0;
        if positive {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "viewing geometry fields must be positive: {self:?}"
            )))
        }
    }

    /// Horizontal pixels per cm; used for both axes.
    pub fn pixels_per_cm(&self) -> T {
        T::lit(self.resolution_x as f64) / self.screen_width_cm
    }

    /// Size in pixels of an object subtending `angle_deg` at the eye.
    pub fn degrees_to_pixels(&self, angle_deg: T) -> Result<T> {
        if !(angle_deg > T::zero() && angle_deg < T::lit(90.0)) {
            return Err(Error::InvalidParameter(format!(
                "visual angle {angle_deg} must lie in (0, 90) degrees"
            )));
        }
        let half = angle_deg.to_radians() / T::lit(2.0);
        Ok(self.pixels_per_cm() * T::lit(2.0) * self.viewing_distance * half.tan())
    }
}

/// Row-major density grid over an image's pixel centres.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMap<T = f64> {
    pub image_id: String,
    pub width: usize,
    pub height: usize,
    pub values: Vec<T>,
    pub sigma_px: T,
}

impl<T: Scalar> DensityMap<T> {
    pub fn get(&self, col: usize, row: usize) -> T {
        self.values[row * self.width + col]
    }

    pub fn sum(&self) -> T {
        self.values.iter().copied().sum()
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::zero(), T::max)
    }

    /// (col, row) of the first maximal cell.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }

    /// Binary P5 graymap, 16 bits per sample, scaled so the maximum is 65535.
    pub fn write_pgm16<W: Write>(&self, mut out: W) -> Result<()> {
        let display = normalize_for_display(self)?;
        let io = |e| Error::io("<pgm>", e);
        write!(out, "P5\n{} {}\n65535\n", self.width, self.height).map_err(io)?;
        let mut buf = Vec::with_capacity(self.values.len() * 2);
        for &v in &display.values {
            let q = (v.as_f64().clamp(0.0, 1.0) * 65535.0).round() as u16;
            buf.extend_from_slice(&q.to_be_bytes());
        }
        out.write_all(&buf).map_err(io)
    }

    /// `GMAT` raw matrix: rows, cols (u32 LE) then row-major f32 LE.
    pub fn write_gmat<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = Vec::with_capacity(12 + self.values.len() * 4);
        buf.extend_from_slice(b"GMAT");
        buf.extend_from_slice(&(self.height as u32).to_le_bytes());
        buf.extend_from_slice(&(self.width as u32).to_le_bytes());
        for &v in &self.values {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
        out.write_all(&buf).map_err(|e| Error::io("<gmat>", e))
    }
}

/// Reads a `GMAT` matrix back as (rows, cols, values).
pub fn read_gmat(bytes: &[u8]) -> Result<(usize, usize, Vec<f32>)> {
    if bytes.len() < 12 || &bytes[..4] != b"GMAT" {
        return Err(Error::Format("missing GMAT header".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != rows * cols * 4 {
        return Err(Error::Format(format!(
            "GMAT body has {} bytes, expected {}",
            body.len(),
            rows * cols * 4
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((rows, cols, values))
}

/// Sums a unit-mass isotropic Gaussian, truncated to a ±3σ square, at every
/// fixation. Weights are 1, or the fixation duration when `duration_weighted`.
pub fn density_map<T: Scalar>(
    fixations: &[Fixation<T>],
    ann: &ImageAnnotation<T>,
    geometry: &ViewingGeometry<T>,
    bandwidth_deg: T,
    duration_weighted: bool,
) -> Result<DensityMap<T>> {
    if fixations.is_empty() {
        return Err(Error::EmptyInput("density map needs at least one fixation"));
    }
    geometry.validate()?;
    let sigma = geometry.degrees_to_pixels(bandwidth_deg)?;
    let (width, height) = (ann.width as usize, ann.height as usize);
    let mut values = vec![T::zero(); width * height];

    let two = T::lit(2.0);
    let norm = T::one() / (two * T::lit(std::f64::consts::PI) * sigma * sigma);
    let reach = T::lit(3.0) * sigma;
    let inv_two_var = T::one() / (two * sigma * sigma);

    for f in fixations {
        let w = if duration_weighted { f.duration } else { T::one() };
        let Some((c0, c1)) = span(f.x - reach, f.x + reach, width) else {
            continue;
        };
        let Some((r0, r1)) = span(f.y - reach, f.y + reach, height) else {
            continue;
        };
        for row in r0..=r1 {
            let dy = T::from_count(row) - f.y;
            let base = row * width;
            for col in c0..=c1 {
                let dx = T::from_count(col) - f.x;
                values[base + col] += w * norm * (-(dx * dx + dy * dy) * inv_two_var).exp();
            }
        }
    }

    Ok(DensityMap {
        image_id: ann.image_id.clone(),
        width,
        height,
        values,
        sigma_px: sigma,
    })
}

/// Integer pixel range [ceil(lo), floor(hi)] clipped to [0, n).
fn span<T: Scalar>(lo: T, hi: T, n: usize) -> Option<(usize, usize)> {
    let lo = lo.ceil().max(T::zero());
    let hi = hi.floor().min(T::from_count(n) - T::one());
    if !(lo <= hi) {
        return None;
    }
    Some((lo.to_usize()?, hi.to_usize()?))
}

/// Rescales a map so its maximum is 1.
pub fn normalize_for_display<T: Scalar>(m: &DensityMap<T>) -> Result<DensityMap<T>> {
    let max = m.max();
    if !(max > T::zero()) {
        return Err(Error::Degenerate(format!(
            "density map for {} has no positive value",
            m.image_id
        )));
    }
    Ok(DensityMap {
        values: m.values.iter().map(|&v| v / max).collect(),
        ..m.clone()
    })
}
