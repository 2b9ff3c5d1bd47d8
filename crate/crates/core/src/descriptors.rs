//! Dense gradient-orientation histogram descriptors on a regular grid, plus
//! the `GDSC` binary format for exchanging precomputed descriptors.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{l2_norm, Scalar};

/// Single-channel image with intensities in [0, 1], row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage<T = f64> {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<T>,
}

impl<T: Scalar> GrayImage<T> {
    pub fn new(width: usize, height: usize, pixels: Vec<T>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: pixels.len(),
            });
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let pixels = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        GrayImage {
            width,
            height,
            pixels,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.pixels[y * self.width + x]
    }

    /// Reads an 8-bit PGM or PPM. Colour is reduced to luminance with
    /// weights 0.299 / 0.587 / 0.114.
    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let scale = T::lit(1.0 / 255.0);
        let pixels = if img.color().has_color() {
            img.to_rgb8()
                .pixels()
                .map(|p| {
                    let [r, g, b] = p.0;
                    T::lit(0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) * scale
                })
                .collect()
        } else {
            img.to_luma8()
                .pixels()
                .map(|p| T::lit(p.0[0] as f64) * scale)
                .collect()
        };
        GrayImage::new(w, h, pixels)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalDescriptor<T = f64> {
    pub center_x: T,
    pub center_y: T,
    pub vector: Vec<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DescriptorGridConfig {
    pub patch_size: usize,
    pub stride: usize,
    /// Cells per patch side.
    pub cells: usize,
    pub orientations: usize,
}

impl Default for DescriptorGridConfig {
    fn default() -> Self {
        DescriptorGridConfig {
            patch_size: 16,
            stride: 8,
            cells: 4,
            orientations: 8,
        }
    }
}

impl DescriptorGridConfig {
    pub fn dimension(&self) -> usize {
        self.cells * self.cells * self.orientations
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0
            || self.stride == 0
            || self.cells == 0
            || self.orientations == 0
            || self.patch_size % self.cells != 0
        {
            return Err(Error::InvalidParameter(format!(
                "descriptor grid needs positive sizes and patch divisible by cells: {self:?}"
            )));
        }
        Ok(())
    }

    /// Grid positions along one axis of length `len`.
    pub fn positions(&self, len: usize) -> usize {
        if len < self.patch_size {
            0
        } else {
            (len - self.patch_size) / self.stride + 1
        }
    }
}

/// Central-difference gradients with replicated borders.
fn gradients<T: Scalar>(img: &GrayImage<T>) -> (Vec<T>, Vec<T>) {
    let (w, h) = (img.width, img.height);
    let mut gx = vec![T::zero(); w * h];
    let mut gy = vec![T::zero(); w * h];
    for y in 0..h {
        for x in 0..w {
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
            gx[y * w + x] = img.get(xr, y) - img.get(xl, y);
            gy[y * w + x] = img.get(x, yd) - img.get(x, yu);
        }
    }
    (gx, gy)
}

/// One L2-normalized descriptor per grid position, row by row. Each
/// descriptor concatenates per-cell orientation histograms weighted by
/// gradient magnitude with linear interpolation between adjacent bins.
pub fn dense_descriptors<T: Scalar>(
    img: &GrayImage<T>,
    cfg: &DescriptorGridConfig,
) -> Result<Vec<LocalDescriptor<T>>> {
    cfg.validate()?;
    if img.width < cfg.patch_size || img.height < cfg.patch_size {
        return Err(Error::ImageTooSmall {
            width: img.width,
            height: img.height,
            patch: cfg.patch_size,
        });
    }
    let (gx, gy) = gradients(img);
    let w = img.width;
    let cell = cfg.patch_size / cfg.cells;
    let bins = cfg.orientations;
    let tau = T::lit(std::f64::consts::TAU);
    let bins_t = T::from_count(bins);

    let mut out = Vec::with_capacity(cfg.positions(img.width) * cfg.positions(img.height));
    for gy_i in 0..cfg.positions(img.height) {
        for gx_i in 0..cfg.positions(img.width) {
            let (px, py) = (gx_i * cfg.stride, gy_i * cfg.stride);
            let mut hist = vec![T::zero(); cfg.dimension()];
            for y in py..py + cfg.patch_size {
                for x in px..px + cfg.patch_size {
                    let (dx, dy) = (gx[y * w + x], gy[y * w + x]);
                    let mag = dx.hypot(dy);
                    if mag == T::zero() {
                        continue;
                    }
                    let mut theta = dy.atan2(dx);
                    if theta < T::zero() {
                        theta += tau;
                    }
                    let pos = theta / tau * bins_t;
                    let lower = pos.floor();
                    let frac = pos - lower;
                    let b0 = lower.to_usize().unwrap_or(0) % bins;
                    let b1 = (b0 + 1) % bins;
                    let base = (((y - py) / cell) * cfg.cells + (x - px) / cell) * bins;
                    hist[base + b0] += mag * (T::one() - frac);
                    hist[base + b1] += mag * frac;
                }
            }
            let norm = l2_norm(&hist);
            if norm > T::zero() {
                hist.iter_mut().for_each(|v| *v /= norm);
            }
            let half = T::lit(cfg.patch_size as f64 / 2.0);
            out.push(LocalDescriptor {
                center_x: T::from_count(px) + half,
                center_y: T::from_count(py) + half,
                vector: hist,
            });
        }
    }
    Ok(out)
}

/// Descriptors for one image.
pub type ImageDescriptors<T> = (String, Vec<LocalDescriptor<T>>);

pub fn write_descriptors<T: Scalar, W: Write>(
    records: &[ImageDescriptors<T>],
    dimension: usize,
    mut out: W,
) -> Result<()> {
    if dimension == 0 {
        return Err(Error::Format("descriptor dimension must be positive".into()));
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(b"GDSC");
    buf.extend_from_slice(&(dimension as u32).to_le_bytes());
    for (id, descs) in records {
        buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
        buf.extend_from_slice(id.as_bytes());
        buf.extend_from_slice(&(descs.len() as u32).to_le_bytes());
        for d in descs {
            if d.vector.len() != dimension {
                return Err(Error::Format(format!(
                    "descriptor of dimension {} in image {id}, file dimension is {dimension}",
                    d.vector.len()
                )));
            }
            buf.extend_from_slice(&(d.center_x.as_f64() as f32).to_le_bytes());
            buf.extend_from_slice(&(d.center_y.as_f64() as f32).to_le_bytes());
            for &v in &d.vector {
                buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
            }
        }
    }
    out.write_all(&buf).map_err(|e| Error::io("<descriptors>", e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Format(format!(
                "truncated record at byte {} (need {n} more)",
                self.pos
            )));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

/// Parses a `GDSC` buffer. Returns the file dimension and the records.
pub fn read_descriptors<T: Scalar>(bytes: &[u8]) -> Result<(usize, Vec<ImageDescriptors<T>>)> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4).ok() != Some(b"GDSC".as_slice()) {
        return Err(Error::Format("missing GDSC magic".into()));
    }
    let d = cur.u32()? as usize;
    if d == 0 {
        return Err(Error::Format("descriptor dimension must be positive".into()));
    }
    let mut records = Vec::new();
    while !cur.done() {
        let id_len = cur.u32()? as usize;
        let id = std::str::from_utf8(cur.take(id_len)?)
            .map_err(|e| Error::Format(format!("image id is not UTF-8: {e}")))?
            .to_string();
        let count = cur.u32()? as usize;
        // every record must fit the declared dimension exactly
        if count.saturating_mul((d + 2) * 4) > bytes.len() - cur.pos {
            return Err(Error::Format(format!(
                "image {id}: {count} descriptors of dimension {d} overrun the file"
            )));
        }
        let mut descs = Vec::with_capacity(count);
        for _ in 0..count {
            let x = cur.f32()?;
            let y = cur.f32()?;
            let vector = (0..d)
                .map(|_| cur.f32().map(|v| T::lit(v as f64)))
                .collect::<Result<Vec<T>>>()?;
            descs.push(LocalDescriptor {
                center_x: T::lit(x as f64),
                center_y: T::lit(y as f64),
                vector,
            });
        }
        records.push((id, descs));
    }
    Ok((d, records))
}

pub fn load_descriptors<T: Scalar>(path: &Path) -> Result<(usize, Vec<ImageDescriptors<T>>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_descriptors(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc(d: usize, v: f32) -> LocalDescriptor<f64> {
        LocalDescriptor {
            center_x: 8.0,
            center_y: 16.0,
            vector: vec![v as f64; d],
        }
    }

    #[test]
    fn constant_image_gives_zero_descriptors() {
        let img = GrayImage::from_fn(40, 24, |_, _| 0.37);
        let ds = dense_descriptors(&img, &DescriptorGridConfig::default()).unwrap();
        assert_eq!(ds.len(), 4 * 2);
        assert!(ds.iter().all(|d| d.vector.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn single_patch_image() {
        let img = GrayImage::from_fn(16, 16, |x, y| ((x * 7 + y * 3) % 11) as f64 / 10.0);
        let ds = dense_descriptors(&img, &DescriptorGridConfig::default()).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].vector.len(), 128);
        assert_eq!((ds[0].center_x, ds[0].center_y), (8.0, 8.0));
        assert!((l2_norm(&ds[0].vector) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vertical_edge_fills_horizontal_gradient_bins() {
        // Step from 0 to 1 between columns 7 and 8: gx = 1 at columns 7 and 8,
        // gy = 0 everywhere, so θ = 0 and only bin 0 of each cell gets mass.
        let img = GrayImage::from_fn(16, 16, |x, _| if x >= 8 { 1.0 } else { 0.0 });
        let cfg = DescriptorGridConfig::default();
        let d = &dense_descriptors(&img, &cfg).unwrap()[0].vector;
        let total: f64 = d.iter().sum();
        let bin0: f64 = d.iter().step_by(8).sum();
        assert!(total > 0.0);
        assert!((bin0 - total).abs() < 1e-12);
        // only cells in columns 1 and 2 (pixels 4..12) see the edge: 8 cells,
        // equal mass, unit norm -> each 1/sqrt(8)
        let nonzero: Vec<f64> = d.iter().copied().filter(|&v| v > 0.0).collect();
        assert_eq!(nonzero.len(), 8);
        assert!(nonzero.iter().all(|v| (v - 8f64.sqrt().recip()).abs() < 1e-12));
    }

    #[test]
    fn small_image_rejected() {
        let img = GrayImage::from_fn(15, 40, |_, _| 0.0);
        assert!(matches!(
            dense_descriptors(&img, &DescriptorGridConfig::default()),
            Err(Error::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn gdsc_records() {
        let recs = vec![
            ("a".to_string(), vec![desc(128, 0.5), desc(128, 0.25)]),
            ("empty".to_string(), vec![]),
        ];
        let mut buf = Vec::new();
        write_descriptors(&recs, 128, &mut buf).unwrap();
        let (d, back) = read_descriptors::<f64>(&buf).unwrap();
        assert_eq!(d, 128);
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].1.len(), 2);
        assert!(back[1].1.is_empty());
        assert_eq!(back, recs);
    }

    #[test]
    fn gdsc_dimension_mismatch() {
        let recs = vec![("a".to_string(), vec![desc(3, 0.5), desc(4, 0.5)])];
        assert!(matches!(
            write_descriptors(&recs, 3, Vec::new()),
            Err(Error::Format(_))
        ));

        // hand-built file: header says d = 3 but the record carries 4 values
        let mut buf = b"GDSC".to_vec();
        buf.extend_from_slice(&3u32.to_le_bytes());
        buf.extend_from_slice(&1u32.to_le_bytes());
        buf.extend_from_slice(b"a");
        buf.extend_from_slice(&1u32.to_le_bytes());
        for v in [1.0f32, 2.0, 0.1, 0.2, 0.3, 0.4] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        assert!(matches!(read_descriptors::<f64>(&buf), Err(Error::Format(_))));
    }
}
