//! Decoupling: inverse-square 3D-to-2D attention projection, patch-grid
//! pooling, top-fraction mask retention, and masked-image construction.
//!
//! The attention at a pixel is sum_n E_n / max(||pix - pix_n||^2, eps^2),
//! summed over all 24 joints. Images are divided into p x p pixel regions;
//! the top ceil(rho * R) regions by mean attention are kept and the rest are
//! filled with mid-gray.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::{Image, RenderedFrame};

/// Default pixel-distance floor for the attention singularity.
pub const DEFAULT_EPS_PIX: f64 = 1.0;

/// Default fill value for dropped regions.
pub const DEFAULT_FILL: f64 = 0.5;

/// H x W non-negative attention values.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    pub values: Image,
}

/// (H/p) x (W/p) grid of region-averaged attention.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGrid {
    pub rows: usize,
    pub cols: usize,
    pub patch: usize,
    pub values: Vec<f64>,
}

impl RegionGrid {
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Boolean keep-grid over regions with its retained fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMask {
    pub rows: usize,
    pub cols: usize,
    pub patch: usize,
    pub keep: Vec<bool>,
    pub rho: f64,
}

impl RegionMask {
    #[inline]
    pub fn kept(&self, r: usize, c: usize) -> bool {
        self.keep[r * self.cols + c]
    }

    pub fn kept_count(&self) -> usize {
        self.keep.iter().filter(|k| **k).count()
    }

    /// Row-major indices of kept regions.
    pub fn kept_indices(&self) -> Vec<usize> {
        self.keep.iter().enumerate().filter(|(_, k)| **k).map(|(i, _)| i).collect()
    }

    /// Keep-everything mask for the given geometry.
    pub fn all_keep(rows: usize, cols: usize, patch: usize) -> Self {
        RegionMask { rows, cols, patch, keep: vec![true; rows * cols], rho: 1.0 }
    }
}

/// An image with dropped regions replaced by a fill value.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedImage {
    pub pixels: Image,
    pub mask: RegionMask,
    pub fill: f64,
}

impl MaskedImage {
    /// True if the pixel at (row, col) lies in a kept region.
    #[inline]
    pub fn pixel_kept(&self, row: usize, col: usize) -> bool {
        self.mask.kept(row / self.mask.patch, col / self.mask.patch)
    }
}

/// Inverse-square attention projection over all joints (Eq. of the decoupling
/// stage): A(pix) = sum_n E_n / max(d^2, eps_pix^2).
pub fn attention_map(
    joint_pixels: &[(f64, f64)],
    per_joint_energy: &[f64],
    height: usize,
    width: usize,
    eps_pix: f64,
) -> Result<AttentionMap> {
    if joint_pixels.len() != per_joint_energy.len() {
        return Err(Error::invalid_argument("joint pixel and energy counts differ"));
    }
    if !(eps_pix > 0.0) {
        return Err(Error::invalid_argument(format!("eps_pix must be > 0, got {eps_pix}")));
    }
    if per_joint_energy.iter().any(|e| *e < 0.0 || !e.is_finite()) {
        return Err(Error::invalid_argument("energies must be finite and non-negative"));
    }
    let eps2 = eps_pix * eps_pix;
    let mut values = Image::zeros(height, width);
    for row in 0..height {
        for col in 0..width {
            let mut acc = 0.0;
            for (n, &(jx, jy)) in joint_pixels.iter().enumerate() {
                let dx = col as f64 - jx;
                let dy = row as f64 - jy;
                let d2 = (dx * dx + dy * dy).max(eps2);
                acc += per_joint_energy[n] / d2;
            }
            values.set(row, col, acc);
        }
    }
    Ok(AttentionMap { values })
}

/// Average attention per p x p block.
pub fn region_average(a: &AttentionMap, patch: usize) -> Result<RegionGrid> {
    let h = a.values.height;
    let w = a.values.width;
    if patch == 0 || h % patch != 0 || w % patch != 0 {
        return Err(Error::invalid_argument(format!(
            "image {h}x{w} not divisible into {patch}x{patch} regions"
        )));
    }
    let rows = h / patch;
    let cols = w / patch;
    let mut values = vec![0.0; rows * cols];
    for gr in 0..rows {
        for gc in 0..cols {
            let mut acc = 0.0;
            for r in 0..patch {
                for c in 0..patch {
                    acc += a.values.get(gr * patch + r, gc * patch + c);
                }
            }
            values[gr * cols + gc] = acc / (patch * patch) as f64;
        }
    }
    Ok(RegionGrid { rows, cols, patch, values })
}

/// Keep the ceil(rho * R) highest cells. Ties break toward the lower
/// row-major index.
pub fn top_fraction_mask(g: &RegionGrid, rho: f64) -> Result<RegionMask> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::invalid_argument(format!("rho must be in (0,1], got {rho}")));
    }
    let total = g.values.len();
    let k = (rho * total as f64).ceil() as usize;
    let k = k.min(total).max(1);
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| g.values[b].total_cmp(&g.values[a]).then(a.cmp(&b)));
    let mut keep = vec![false; total];
    for &i in order.iter().take(k) {
        keep[i] = true;
    }
    Ok(RegionMask { rows: g.rows, cols: g.cols, patch: g.patch, keep, rho })
}

/// Copy kept regions from the source; fill dropped regions.
pub fn apply_mask(img: &Image, mask: &RegionMask, fill: f64) -> Result<MaskedImage> {
    if img.height != mask.rows * mask.patch || img.width != mask.cols * mask.patch {
        return Err(Error::invalid_argument(format!(
            "mask geometry {}x{} regions of {} px does not match image {}x{}",
            mask.rows, mask.cols, mask.patch, img.height, img.width
        )));
    }
    let mut pixels = img.clone();
    for gr in 0..mask.rows {
        for gc in 0..mask.cols {
            if mask.kept(gr, gc) {
                continue;
            }
            for r in 0..mask.patch {
                for c in 0..mask.patch {
                    pixels.set(gr * mask.patch + r, gc * mask.patch + c, fill);
                }
            }
        }
    }
    Ok(MaskedImage { pixels, mask: mask.clone(), fill })
}

/// Geometry and thresholds for decoupling a composite frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoupleConfig {
    pub patch: usize,
    pub rho: f64,
    pub eps_pix: f64,
    pub fill: f64,
}

impl Default for DecoupleConfig {
    fn default() -> Self {
        DecoupleConfig { patch: 8, rho: 1.0 / 3.0, eps_pix: DEFAULT_EPS_PIX, fill: DEFAULT_FILL }
    }
}

/// Split a rendered composite into two masked images, one per source: both
/// attention maps are built from the composite's joint pixels, each with one
/// source's per-joint energies.
pub fn decouple_composite(
    composite: &RenderedFrame,
    e_i: &[f64],
    e_j: &[f64],
    cfg: &DecoupleConfig,
) -> Result<(MaskedImage, MaskedImage)> {
    let h = composite.pixels.height;
    let w = composite.pixels.width;
    let mask_i = source_mask(&composite.joint_pixels, e_i, h, w, cfg)?;
    let mask_j = source_mask(&composite.joint_pixels, e_j, h, w, cfg)?;
    Ok((apply_mask(&composite.pixels, &mask_i, cfg.fill)?, apply_mask(&composite.pixels, &mask_j, cfg.fill)?))
}

/// The retained-region mask one source induces on a composite frame.
pub fn source_mask(
    joint_pixels: &[(f64, f64)],
    energies: &[f64],
    height: usize,
    width: usize,
    cfg: &DecoupleConfig,
) -> Result<RegionMask> {
    let a = attention_map(joint_pixels, energies, height, width, cfg.eps_pix)?;
    let g = region_average(&a, cfg.patch)?;
    top_fraction_mask(&g, cfg.rho)
}
