//! A small corner-based feature extractor producing the 64 + 16 dimensional
//! descriptors consumed by the vocabularies.
//!
//! Corner strength is the Harris response of the smoothed structure tensor.
//! The grayscale descriptor is a 4x4 grid of cells, each a 4-bin histogram of
//! gradient orientation weighted by magnitude; the color descriptor is the
//! mean hue angle over the same 4x4 grid.

use std::path::Path;

use image::imageops::{self, FilterType};
use image::RgbImage;

use super::{FeaturePoint, FrameFeatures};
use crate::error::{Error, Result};
use crate::vocab::{COLOR_DESCRIPTOR_DIM, GRAY_DESCRIPTOR_DIM};

/// Frames wider than this are downscaled before extraction.
pub const TARGET_WIDTH: u32 = 320;

const HARRIS_K: f32 = 0.04;
const PATCH_RADIUS: i64 = 8;
const BORDER: usize = 3;

/// Loads one raster frame (binary PPM or any format the `image` crate reads).
pub fn load_frame(path: &Path) -> Result<RgbImage> {
    Ok(image::open(path)?.to_rgb8())
}

struct Plane {
    w: usize,
    h: usize,
    data: Vec<f32>,
}

impl Plane {
    fn new(w: usize, h: usize) -> Self {
        Plane {
            w,
            h,
            data: vec![0.0; w * h],
        }
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.w + x]
    }

    #[inline]
    fn clamped(&self, x: i64, y: i64) -> f32 {
        let x = x.clamp(0, self.w as i64 - 1) as usize;
        let y = y.clamp(0, self.h as i64 - 1) as usize;
        self.at(x, y)
    }

    fn box_filter(&self, radius: i64) -> Plane {
        let mut tmp = Plane::new(self.w, self.h);
        for y in 0..self.h {
            for x in 0..self.w {
                let mut s = 0.0;
                for dx in -radius..=radius {
                    s += self.clamped(x as i64 + dx, y as i64);
                }
                tmp.data[y * self.w + x] = s;
            }
        }
        let mut out = Plane::new(self.w, self.h);
        for y in 0..self.h {
            for x in 0..self.w {
                let mut s = 0.0;
                for dy in -radius..=radius {
                    s += tmp.clamped(x as i64, y as i64 + dy);
                }
                out.data[y * self.w + x] = s;
            }
        }
        out
    }
}

/// Detects up to `max_points` corners and describes them.
pub fn extract_frame_features(
    image: &RgbImage,
    max_points: usize,
    frame_index: u64,
    timestamp: f64,
) -> Result<FrameFeatures> {
    let (w0, h0) = image.dimensions();
    if w0 < 16 || h0 < 16 {
        return Err(Error::ImageTooSmall {
            width: w0,
            height: h0,
        });
    }
    let scaled;
    let img = if w0 > TARGET_WIDTH {
        let h = ((h0 as u64 * TARGET_WIDTH as u64) / w0 as u64).max(16) as u32;
        scaled = imageops::resize(image, TARGET_WIDTH, h, FilterType::Triangle);
        &scaled
    } else {
        image
    };
    let (w, h) = (img.width() as usize, img.height() as usize);

    let mut gray = Plane::new(w, h);
    let mut hue = Plane::new(w, h);
    for (x, y, p) in img.enumerate_pixels() {
        let [r, g, b] = p.0.map(|c| c as f32 / 255.0);
        gray.data[y as usize * w + x as usize] = 0.299 * r + 0.587 * g + 0.114 * b;
        let angle = (3f32.sqrt() * (g - b)).atan2(2.0 * r - g - b);
        hue.data[y as usize * w + x as usize] = angle / std::f32::consts::TAU + 0.5;
    }

    // Sobel gradients.
    let mut gx = Plane::new(w, h);
    let mut gy = Plane::new(w, h);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let p = |dx: i64, dy: i64| gray.clamped(x + dx, y + dy);
            let sx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let sy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            gx.data[y as usize * w + x as usize] = sx / 8.0;
            gy.data[y as usize * w + x as usize] = sy / 8.0;
        }
    }

    let mut ixx = Plane::new(w, h);
    let mut iyy = Plane::new(w, h);
    let mut ixy = Plane::new(w, h);
    for i in 0..w * h {
        ixx.data[i] = gx.data[i] * gx.data[i];
        iyy.data[i] = gy.data[i] * gy.data[i];
        ixy.data[i] = gx.data[i] * gy.data[i];
    }
    let (sxx, syy, sxy) = (ixx.box_filter(2), iyy.box_filter(2), ixy.box_filter(2));
    let mut response = Plane::new(w, h);
    for i in 0..w * h {
        let det = sxx.data[i] * syy.data[i] - sxy.data[i] * sxy.data[i];
        let tr = sxx.data[i] + syy.data[i];
        response.data[i] = det - HARRIS_K * tr * tr;
    }

    let max_r = response.data.iter().cloned().fold(0.0f32, f32::max);
    let threshold = (0.01 * max_r).max(1e-7);
    let mut corners: Vec<(f32, usize, usize)> = Vec::new();
    if max_r > 0.0 {
        for y in BORDER..h.saturating_sub(BORDER) {
            for x in BORDER..w.saturating_sub(BORDER) {
                let r = response.at(x, y);
                if r <= threshold {
                    continue;
                }
                let mut is_max = true;
                'nbhd: for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let n = response.clamped(x as i64 + dx, y as i64 + dy);
                        // Plateaus keep only their first pixel in raster order.
                        let earlier = dy < 0 || (dy == 0 && dx < 0);
                        if n > r || (earlier && n == r) {
                            is_max = false;
                            break 'nbhd;
                        }
                    }
                }
                if is_max {
                    corners.push((r, y, x));
                }
            }
        }
    }
    corners.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    corners.truncate(max_points);

    let points = corners
        .iter()
        .map(|&(_, y, x)| FeaturePoint {
            x: x as f32 / (w - 1) as f32,
            y: y as f32 / (h - 1) as f32,
            gray_desc: gray_descriptor(&gx, &gy, x as i64, y as i64),
            color_desc: color_descriptor(&hue, x as i64, y as i64),
        })
        .collect();
    Ok(FrameFeatures {
        frame_index,
        timestamp,
        points,
    })
}

fn gray_descriptor(gx: &Plane, gy: &Plane, cx: i64, cy: i64) -> Vec<f32> {
    let mut d = vec![0f32; GRAY_DESCRIPTOR_DIM];
    let cell = 2 * PATCH_RADIUS / 4;
    for py in 0..2 * PATCH_RADIUS {
        for px in 0..2 * PATCH_RADIUS {
            let x = cx - PATCH_RADIUS + px;
            let y = cy - PATCH_RADIUS + py;
            let (dx, dy) = (gx.clamped(x, y), gy.clamped(x, y));
            let mag = (dx * dx + dy * dy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let theta = dy.atan2(dx).rem_euclid(std::f32::consts::TAU);
            let bin = ((theta / std::f32::consts::FRAC_PI_2) as usize).min(3);
            let c = (py / cell) as usize * 4 + (px / cell) as usize;
            d[c * 4 + bin] += mag;
        }
    }
    let norm = d.iter().map(|v| v * v).sum::<f32>().sqrt();
    if norm > 0.0 {
        d.iter_mut().for_each(|v| *v /= norm);
    }
    d
}

fn color_descriptor(hue: &Plane, cx: i64, cy: i64) -> Vec<f32> {
    let mut d = vec![0f32; COLOR_DESCRIPTOR_DIM];
    let cell = 2 * PATCH_RADIUS / 4;
    let per_cell = (cell * cell) as f32;
    for py in 0..2 * PATCH_RADIUS {
        for px in 0..2 * PATCH_RADIUS {
            let v = hue.clamped(cx - PATCH_RADIUS + px, cy - PATCH_RADIUS + py);
            d[(py / cell) as usize * 4 + (px / cell) as usize] += v / per_cell;
        }
    }
    d
}
