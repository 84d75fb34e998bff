//! Frontal normalization and stick-figure rasterization of skeletons into
//! grayscale images.
//!
//! Projection is orthographic: the depth axis is dropped, world x maps to
//! pixel columns and world y (up) to rows, top-down. Two rasterizers share
//! that projection: a crisp anti-aliased line rasterizer for evaluation and
//! artifact output, and a smoothed Gaussian-splat rasterizer whose pixels are
//! differentiable in the joint coordinates, used on the training path.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{MotionSequence, Pose, BONES, NUM_JOINTS};

/// Orthographic camera over a fixed-size grayscale canvas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub height: usize,
    pub width: usize,
    /// Pixels per meter.
    pub scale: f64,
    /// Pixel coordinates of the world origin (col, row).
    pub principal: (f64, f64),
}

impl CameraConfig {
    /// 64x64 desk-scale default, skeleton root centered.
    pub fn desk() -> Self {
        CameraConfig { height: 64, width: 64, scale: 32.0, principal: (32.0, 32.0) }
    }

    /// 224x224 preset matching the masked-autoencoder input convention.
    pub fn mae_standard() -> Self {
        CameraConfig { height: 224, width: 224, scale: 112.0, principal: (112.0, 112.0) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::invalid_argument("image dimensions must be positive"));
        }
        if !(self.scale > 0.0) {
            return Err(Error::invalid_argument(format!("scale must be > 0, got {}", self.scale)));
        }
        Ok(())
    }
}

/// Row-major grayscale image with intensities in [0,1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn zeros(height: usize, width: usize) -> Self {
        Image { height, width, data: vec![0.0; height * width] }
    }

    pub fn filled(height: usize, width: usize, v: f64) -> Self {
        Image { height, width, data: vec![v; height * width] }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.width + col] = v;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Encode as binary P5 (grayscale, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

/// A rasterized frame: pixels plus the projected joint coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    pub pixels: Image,
    /// Per-joint (col, row) pixel coordinates; may lie outside the canvas.
    pub joint_pixels: [(f64, f64); NUM_JOINTS],
}

/// Orthographic projection of a world point to continuous pixel coordinates.
#[inline]
pub fn project_joint(point: &[f64; 3], cam: &CameraConfig) -> (f64, f64) {
    (cam.principal.0 + cam.scale * point[0], cam.principal.1 - cam.scale * point[1])
}

pub fn project_pose(pose: &Pose, cam: &CameraConfig) -> [(f64, f64); NUM_JOINTS] {
    let mut out = [(0.0, 0.0); NUM_JOINTS];
    for (n, j) in pose.joints.iter().enumerate() {
        out[n] = project_joint(j, cam);
    }
    out
}

/// Rigidly transform a sequence so the first frame's root joint sits at the
/// origin and the hip axis is parallel to the image plane. The same transform
/// is applied to every frame, so relative motion (and hence energies) is
/// preserved. Returns the transformed sequence and a flag that is true when
/// the hip axis was degenerate and the rotation fell back to identity.
pub fn normalize_frontal(seq: &MotionSequence) -> (MotionSequence, bool) {
    let root = seq.frames[0].joints[0];
    // hip axis left_hip(1) - right_hip(2), horizontal components
    let lh = seq.frames[0].joints[1];
    let rh = seq.frames[0].joints[2];
    let hx = lh[0] - rh[0];
    let hz = lh[2] - rh[2];
    let len = (hx * hx + hz * hz).sqrt();
    let degenerate = len < 1e-9;
    let (cos_t, sin_t) = if degenerate { (1.0, 0.0) } else { (hx / len, hz / len) };

    let mut frames = Vec::with_capacity(seq.len());
    for f in &seq.frames {
        let mut joints = [[0.0; 3]; NUM_JOINTS];
        for (n, j) in f.joints.iter().enumerate() {
            let x = j[0] - root[0];
            let y = j[1] - root[1];
            let z = j[2] - root[2];
            // yaw by -theta about the vertical axis: maps the hip axis onto +x
            joints[n] = [x * cos_t + z * sin_t, y, -x * sin_t + z * cos_t];
        }
        frames.push(Pose { joints });
    }
    (MotionSequence { frames, label: seq.label, fps: seq.fps }, degenerate)
}

fn dist_point_segment_sq(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let abx = b.0 - a.0;
    let aby = b.1 - a.1;
    let apx = px - a.0;
    let apy = py - a.1;
    let denom = abx * abx + aby * aby;
    let t = if denom > 0.0 { ((apx * abx + apy * aby) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let cx = a.0 + t * abx;
    let cy = a.1 + t * aby;
    let dx = px - cx;
    let dy = py - cy;
    (dx * dx + dy * dy, t)
}

/// Crisp anti-aliased rasterizer: line segments of the given thickness drawn
/// between bone-connected joint pixels, composited by max. Pixel coverage is
/// clamp(thickness/2 + 0.5 - distance, 0, 1).
pub fn render_frame_with(
    pose: &Pose,
    cam: &CameraConfig,
    bones: &[(usize, usize)],
    thickness: f64,
) -> RenderedFrame {
    let joint_pixels = project_pose(pose, cam);
    let mut pixels = Image::zeros(cam.height, cam.width);
    let reach = thickness / 2.0 + 0.5;
    for &(a, b) in bones {
        let pa = joint_pixels[a];
        let pb = joint_pixels[b];
        let min_x = (pa.0.min(pb.0) - reach).floor().max(0.0) as usize;
        let max_x = (pa.0.max(pb.0) + reach).ceil().min((cam.width - 1) as f64) as usize;
        let min_y = (pa.1.min(pb.1) - reach).floor().max(0.0) as usize;
        let max_y = (pa.1.max(pb.1) + reach).ceil().min((cam.height - 1) as f64) as usize;
        if pa.0.max(pb.0) < -reach || pa.1.max(pb.1) < -reach {
            continue;
        }
        for row in min_y..=max_y {
            for col in min_x..=max_x {
                let (d2, _) = dist_point_segment_sq(col as f64, row as f64, pa, pb);
                let cov = (reach - d2.sqrt()).clamp(0.0, 1.0);
                if cov > pixels.get(row, col) {
                    pixels.set(row, col, cov);
                }
            }
        }
    }
    RenderedFrame { pixels, joint_pixels }
}

/// Crisp rasterization with the default 2 px stroke and SMPL bone list.
pub fn render_frame(pose: &Pose, cam: &CameraConfig) -> RenderedFrame {
    render_frame_with(pose, cam, &BONES, 2.0)
}

/// Render every `stride`-th frame, starting at frame 0.
pub fn render_sequence(seq: &MotionSequence, cam: &CameraConfig, stride: usize) -> Result<Vec<RenderedFrame>> {
    if stride == 0 {
        return Err(Error::invalid_argument("stride must be >= 1"));
    }
    Ok((0..seq.len()).step_by(stride).map(|t| render_frame(&seq.frames[t], cam)).collect())
}

/// Indices rendered by `render_sequence` for a given length and stride.
pub fn sampled_frame_indices(len: usize, stride: usize) -> Result<Vec<usize>> {
    if stride == 0 {
        return Err(Error::invalid_argument("stride must be >= 1"));
    }
    Ok((0..len).step_by(stride).collect())
}

/// Smoothed Gaussian-splat rasterizer. Each bone contributes
/// exp(-d^2 / (2 sigma^2)) of its pixel distance-to-segment, and contributions
/// saturate through tanh, keeping intensities in [0,1) and the whole map
/// piecewise-smooth in the joint pixel coordinates.
pub fn render_frame_splat(
    pose: &Pose,
    cam: &CameraConfig,
    bones: &[(usize, usize)],
    sigma_px: f64,
) -> RenderedFrame {
    let joint_pixels = project_pose(pose, cam);
    let pixels = splat_image(&joint_pixels, cam, bones, sigma_px);
    RenderedFrame { pixels, joint_pixels }
}

/// The splat rasterizer on already-projected joint pixels.
pub fn splat_image(
    joint_pixels: &[(f64, f64); NUM_JOINTS],
    cam: &CameraConfig,
    bones: &[(usize, usize)],
    sigma_px: f64,
) -> Image {
    let inv_two_sigma2 = 1.0 / (2.0 * sigma_px * sigma_px);
    let mut pixels = Image::zeros(cam.height, cam.width);
    for row in 0..cam.height {
        for col in 0..cam.width {
            let mut s = 0.0;
            for &(a, b) in bones {
                let (d2, _) = dist_point_segment_sq(col as f64, row as f64, joint_pixels[a], joint_pixels[b]);
                s += (-d2 * inv_two_sigma2).exp();
            }
            pixels.set(row, col, s.tanh());
        }
    }
    pixels
}

/// Backpropagate a pixel-space gradient of the splat rasterizer to the joint
/// pixel coordinates. `d_pixels` is d(loss)/d(pixel); returns
/// d(loss)/d(joint col, joint row) per joint.
pub fn splat_backward(
    joint_pixels: &[(f64, f64); NUM_JOINTS],
    cam: &CameraConfig,
    bones: &[(usize, usize)],
    sigma_px: f64,
    d_pixels: &Image,
) -> [(f64, f64); NUM_JOINTS] {
    let inv_two_sigma2 = 1.0 / (2.0 * sigma_px * sigma_px);
    let mut grads = [(0.0, 0.0); NUM_JOINTS];
    let mut g_cache = vec![0.0; bones.len()];
    let mut t_cache = vec![0.0; bones.len()];
    for row in 0..cam.height {
        for col in 0..cam.width {
            let upstream = d_pixels.get(row, col);
            if upstream == 0.0 {
                continue;
            }
            let px = col as f64;
            let py = row as f64;
            let mut s = 0.0;
            for (k, &(a, b)) in bones.iter().enumerate() {
                let (d2, t) = dist_point_segment_sq(px, py, joint_pixels[a], joint_pixels[b]);
                let g = (-d2 * inv_two_sigma2).exp();
                g_cache[k] = g;
                t_cache[k] = t;
                s += g;
            }
            let v = s.tanh();
            let dv_ds = 1.0 - v * v;
            for (k, &(a, b)) in bones.iter().enumerate() {
                let g = g_cache[k];
                if g < 1e-300 {
                    continue;
                }
                let t = t_cache[k];
                let pa = joint_pixels[a];
                let pb = joint_pixels[b];
                // closest point c = a + t*(b-a); for the clamped/interior
                // cases alike: d(d2)/da = -2(1-t)e, d(d2)/db = -2t e with
                // e = p - c (envelope form; exact at t in {0,1} too).
                let cx = pa.0 + t * (pb.0 - pa.0);
                let cy = pa.1 + t * (pb.1 - pa.1);
                let ex = px - cx;
                let ey = py - cy;
                // dL/d(d2) = upstream * dv_ds * (-g * inv_two_sigma2)... chain:
                // dg/d(d2) = -g * inv_two_sigma2
                let dl_dd2 = upstream * dv_ds * (-g * inv_two_sigma2);
                grads[a].0 += dl_dd2 * (-2.0 * (1.0 - t) * ex);
                grads[a].1 += dl_dd2 * (-2.0 * (1.0 - t) * ey);
                grads[b].0 += dl_dd2 * (-2.0 * t * ex);
                grads[b].1 += dl_dd2 * (-2.0 * t * ey);
            }
        }
    }
    grads
}

/// Convert a joint-pixel gradient to a world-coordinate gradient under the
/// orthographic projection (depth gets none).
pub fn pixel_grad_to_world(grad_px: &[(f64, f64); NUM_JOINTS], cam: &CameraConfig) -> [[f64; 3]; NUM_JOINTS] {
    let mut out = [[0.0; 3]; NUM_JOINTS];
    for n in 0..NUM_JOINTS {
        out[n][0] = grad_px[n].0 * cam.scale;
        out[n][1] = -grad_px[n].1 * cam.scale;
    }
    out
}

/// Tile frames into a single contact-sheet image, `cols` frames per row.
pub fn contact_sheet(frames: &[RenderedFrame], cols: usize) -> Result<Image> {
    if frames.is_empty() || cols == 0 {
        return Err(Error::invalid_argument("contact sheet needs frames and cols >= 1"));
    }
    let fh = frames[0].pixels.height;
    let fw = frames[0].pixels.width;
    let rows = frames.len().div_ceil(cols);
    let mut sheet = Image::zeros(rows * fh, cols * fw);
    for (k, f) in frames.iter().enumerate() {
        if f.pixels.height != fh || f.pixels.width != fw {
            return Err(Error::invalid_argument("contact sheet frames must share dimensions"));
        }
        let r0 = (k / cols) * fh;
        let c0 = (k % cols) * fw;
        for r in 0..fh {
            for c in 0..fw {
                sheet.set(r0 + r, c0 + c, f.pixels.get(r, c));
            }
        }
    }
    Ok(sheet)
}
