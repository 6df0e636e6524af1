//! Per-image corruptions.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::image::Image;

/// Adds independent `N(0, sigma^2)` noise to every pixel, then clamps to `[0, 1]`.
pub fn gaussian_noise<R: Rng>(img: &Image, sigma: f64, rng: &mut R) -> Image {
    let mut out = img.clone();
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
        for p in &mut out.pixels {
            *p += normal.sample(rng);
        }
    }
    out.clamp_unit();
    out
}

/// Normalised 1-D Gaussian kernel of radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Mirror index into `[0, n)` with edge-inclusive reflection
/// (`... b a | a b c ... | c b a ...`).
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let r = i.rem_euclid(period);
    (if r < n { r } else { period - 1 - r }) as usize
}

fn convolve_axis(img: &Image, kernel: &[f64], horizontal: bool) -> Image {
    let radius = (kernel.len() / 2) as i64;
    let mut out = img.clone();
    for y in 0..img.height {
        for x in 0..img.width {
            for c in 0..img.channels {
                let center = img.get(y, x, c);
                // accumulate deviations from the centre pixel so that flat
                // regions are reproduced exactly
                let mut acc = 0.0;
                for (k, &w) in kernel.iter().enumerate() {
                    let off = k as i64 - radius;
                    let v = if horizontal {
                        img.get(y, reflect(x as i64 + off, img.width), c)
                    } else {
                        img.get(reflect(y as i64 + off, img.height), x, c)
                    };
                    acc += w * (v - center);
                }
                out.set(y, x, c, center + acc);
            }
        }
    }
    out
}

/// Separable Gaussian blur with reflect padding. `sigma = 0` is the identity.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Image {
    if sigma <= 0.0 {
        return img.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let mut out = convolve_axis(&convolve_axis(img, &kernel, true), &kernel, false);
    out.clamp_unit();
    out
}

/// Bounds for random affine perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageShiftParams {
    pub max_rotation_deg: f64,
    /// Maximum translation per axis as a fraction of that axis' size.
    pub max_translate_frac: f64,
    pub max_zoom_frac: f64,
    pub max_shear_deg: f64,
}

/// A concrete affine map about the image centre.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AffineTransform {
    pub rotation_deg: f64,
    pub shear_deg: f64,
    pub zoom: f64,
    pub translate_x: f64,
    pub translate_y: f64,
}

impl AffineTransform {
    pub fn identity() -> Self {
        AffineTransform {
            zoom: 1.0,
            ..Default::default()
        }
    }

    /// Linear part `R(theta) * Shear(s) * zoom`, row-major 2x2 acting on (x, y).
    fn linear(&self) -> [f64; 4] {
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        let t = self.shear_deg.to_radians().tan();
        let z = self.zoom;
        // [c -s; s c] * [1 t; 0 1] * z
        [c * z, (c * t - s) * z, s * z, (s * t + c) * z]
    }
}

fn uniform_sym<R: Rng>(rng: &mut R, bound: f64) -> f64 {
    if bound > 0.0 {
        rng.random_range(-bound..=bound)
    } else {
        0.0
    }
}

impl ImageShiftParams {
    pub fn draw<R: Rng>(&self, height: usize, width: usize, rng: &mut R) -> AffineTransform {
        AffineTransform {
            rotation_deg: uniform_sym(rng, self.max_rotation_deg),
            translate_x: uniform_sym(rng, self.max_translate_frac) * width as f64,
            translate_y: uniform_sym(rng, self.max_translate_frac) * height as f64,
            zoom: 1.0 + uniform_sym(rng, self.max_zoom_frac),
            shear_deg: uniform_sym(rng, self.max_shear_deg),
        }
    }
}

/// Applies `t` about the image centre. Each output pixel samples the source
/// with bilinear interpolation; sources outside the image read as 0.
pub fn warp_affine(img: &Image, t: &AffineTransform) -> Image {
    let [a, b, c, d] = t.linear();
    let det = a * d - b * c;
    // inverse of the linear part
    let (ia, ib, ic, id) = (d / det, -b / det, -c / det, a / det);
    let cx = (img.width as f64 - 1.0) / 2.0;
    let cy = (img.height as f64 - 1.0) / 2.0;

    let mut out = Image::filled(img.height, img.width, img.channels, 0.0);
    let sample = |yy: i64, xx: i64, ch: usize| -> f64 {
        if yy < 0 || xx < 0 || yy >= img.height as i64 || xx >= img.width as i64 {
            0.0
        } else {
            img.get(yy as usize, xx as usize, ch)
        }
    };
    for y in 0..img.height {
        for x in 0..img.width {
            let ux = x as f64 - cx - t.translate_x;
            let uy = y as f64 - cy - t.translate_y;
            let sx = ia * ux + ib * uy + cx;
            let sy = ic * ux + id * uy + cy;
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            let (x0, y0) = (x0 as i64, y0 as i64);
            for ch in 0..img.channels {
                let top = sample(y0, x0, ch) * (1.0 - fx) + sample(y0, x0 + 1, ch) * fx;
                let bottom = sample(y0 + 1, x0, ch) * (1.0 - fx) + sample(y0 + 1, x0 + 1, ch) * fx;
                out.set(y, x, ch, top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    out.clamp_unit();
    out
}

/// Random rotation, translation, zoom and shear within `params`.
pub fn image_shift<R: Rng>(img: &Image, params: &ImageShiftParams, rng: &mut R) -> Image {
    let t = params.draw(img.height, img.width, rng);
    warp_affine(img, &t)
}
