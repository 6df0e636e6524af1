//! Covariate-shift generators for image datasets.

mod image;
mod ops;
mod spec;

pub use image::Image;
pub use ops::{
    gaussian_blur, gaussian_kernel, gaussian_noise, image_shift, warp_affine, AffineTransform,
    ImageShiftParams,
};
pub use spec::{
    apply_shift, intensity_ladder, shifted_indices, Intensity, IntensityLadder, ShiftFamily,
    ShiftKind, ShiftSpec,
};
