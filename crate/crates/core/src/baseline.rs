//! Frame-wise baseline: the centroid of each thresholded mask, with no
//! temporal model.

use crate::geometry::ImagePoint;
use crate::mask::SoftMask;
use crate::metrics::Trajectory2D;

pub const DEFAULT_THRESHOLD: f32 = 0.5;

/// Mean position of the pixels with value `>= threshold`; `None` when the
/// thresholded mask is empty.
pub fn mask_centroid(mask: &SoftMask, threshold: f32) -> Option<ImagePoint> {
    mask.threshold(threshold)
        .centroid()
        .map(|(u, v)| ImagePoint::new(u, v))
}

/// Per-frame centroids. A frame with an empty mask repeats the previous
/// estimate (`start` before the first detection), so it still counts as a
/// prediction when scored.
pub fn centroid_track<'a>(
    masks: impl IntoIterator<Item = &'a SoftMask>,
    threshold: f32,
    start: ImagePoint,
) -> Trajectory2D {
    let mut last = start;
    masks
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            if let Some(p) = mask_centroid(m, threshold) {
                last = p;
            }
            (i as u64, last)
        })
        .collect()
}
