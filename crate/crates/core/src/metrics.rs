//! Evaluation: detection rate for point tracks, pixel scores for masks and
//! relative distance error for localized markers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{ImagePoint, WorldPoint};
use crate::mask::BinaryMask;
use crate::{Error, Result};

/// Radii (px) reported by default.
pub const SDR_RADII: [f64; 3] = [10.0, 20.0, 30.0];

/// Per-frame point annotations; frames without an entry are unannotated.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory2D {
    points: BTreeMap<u64, ImagePoint>,
}

impl Trajectory2D {
    pub fn new() -> Self {
        Self::default()
    }

    /// Dense trajectory with one point per frame starting at frame 0.
    pub fn from_points(points: impl IntoIterator<Item = ImagePoint>) -> Self {
        Trajectory2D {
            points: points
                .into_iter()
                .enumerate()
                .map(|(i, p)| (i as u64, p))
                .collect(),
        }
    }

    pub fn insert(&mut self, frame: u64, p: ImagePoint) {
        self.points.insert(frame, p);
    }

    pub fn get(&self, frame: u64) -> Option<ImagePoint> {
        self.points.get(&frame).copied()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, ImagePoint)> + '_ {
        self.points.iter().map(|(&f, &p)| (f, p))
    }
}

impl FromIterator<(u64, ImagePoint)> for Trajectory2D {
    fn from_iter<I: IntoIterator<Item = (u64, ImagePoint)>>(iter: I) -> Self {
        Trajectory2D {
            points: iter.into_iter().collect(),
        }
    }
}

fn common_distances(pred: &Trajectory2D, gt: &Trajectory2D) -> Result<Vec<f64>> {
    let d: Vec<f64> = gt
        .iter()
        .filter_map(|(f, g)| pred.get(f).map(|p| p.distance(&g)))
        .collect();
    if d.is_empty() {
        return Err(Error::NoCommonFrames);
    }
    Ok(d)
}

/// Successful detection rate in percent: frames with `‖pred − gt‖ ≤ radius`.
pub fn sdr(pred: &Trajectory2D, gt: &Trajectory2D, radius: f64) -> Result<f64> {
    sdr_scaled(pred, gt, radius, 1.0)
}

/// As [`sdr`], with pixel distances multiplied by `scale` first (to evaluate
/// at a resolution other than the mask's).
pub fn sdr_scaled(pred: &Trajectory2D, gt: &Trajectory2D, radius: f64, scale: f64) -> Result<f64> {
    if !(scale > 0.0) {
        return Err(Error::config("scale", "must be > 0"));
    }
    let d = common_distances(pred, gt)?;
    let hits = d.iter().filter(|&&d| d * scale <= radius).count();
    Ok(100.0 * hits as f64 / d.len() as f64)
}

/// Pixel confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn of(pred: &BinaryMask, gt: &BinaryMask) -> Result<Self> {
        if pred.width() != gt.width() || pred.height() != gt.height() {
            return Err(Error::DimensionMismatch(format!(
                "pred {}x{} vs gt {}x{}",
                pred.width(),
                pred.height(),
                gt.width(),
                gt.height()
            )));
        }
        let mut c = Confusion::default();
        for (&p, &g) in pred.bits().iter().zip(gt.bits()) {
            match (p, g) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                _ => {}
            }
        }
        Ok(c)
    }

    pub fn add(self, o: Confusion) -> Confusion {
        Confusion {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }

    pub fn scores(&self) -> MaskScores {
        let (tp, fp, fn_) = (self.tp as f64, self.fp as f64, self.fn_ as f64);
        if self.tp + self.fp + self.fn_ == 0 {
            return MaskScores {
                iou: 1.0,
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                both_empty: true,
            };
        }
        let ratio = |n: f64, d: f64| if d > 0.0 { n / d } else { 0.0 };
        MaskScores {
            iou: tp / (tp + fp + fn_),
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            f1: 2.0 * tp / (2.0 * tp + fp + fn_),
            both_empty: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskScores {
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Both masks were empty; scores are 1.0 by convention.
    pub both_empty: bool,
}

pub fn mask_scores(pred: &BinaryMask, gt: &BinaryMask) -> Result<MaskScores> {
    Ok(Confusion::of(pred, gt)?.scores())
}

/// Micro (pixels pooled over frames) and macro (mean of per-frame scores)
/// aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskAggregate {
    pub frames: usize,
    pub both_empty_frames: usize,
    pub micro: MaskScores,
    #[serde(rename = "macro")]
    pub macro_: MaskScores,
}

pub fn aggregate_mask_scores<'a>(
    pairs: impl IntoIterator<Item = (&'a BinaryMask, &'a BinaryMask)>,
) -> Result<MaskAggregate> {
    let mut total = Confusion::default();
    let mut sums = [0.0; 4];
    let (mut frames, mut both_empty) = (0, 0);
    for (p, g) in pairs {
        let c = Confusion::of(p, g)?;
        let s = c.scores();
        total = total.add(c);
        for (acc, v) in sums.iter_mut().zip([s.iou, s.precision, s.recall, s.f1]) {
            *acc += v;
        }
        frames += 1;
        both_empty += s.both_empty as usize;
    }
    if frames == 0 {
        return Err(Error::NoCommonFrames);
    }
    let n = frames as f64;
    Ok(MaskAggregate {
        frames,
        both_empty_frames: both_empty,
        micro: total.scores(),
        macro_: MaskScores {
            iou: sums[0] / n,
            precision: sums[1] / n,
            recall: sums[2] / n,
            f1: sums[3] / n,
            both_empty: both_empty == frames,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceError {
    pub mean: f64,
    /// Population standard deviation over pairs.
    pub std: f64,
    pub pairs: usize,
}

/// Error of all pairwise distances, `| ‖pᵢ − pⱼ‖ − ‖gᵢ − gⱼ‖ |` for `i < j`.
pub fn relative_distance_error(pred: &[WorldPoint], gt: &[WorldPoint]) -> Result<DistanceError> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            what: "predicted and ground-truth points",
            left: pred.len(),
            right: gt.len(),
        });
    }
    if pred.len() < 2 {
        return Err(Error::TooFewPoints {
            need: 2,
            got: pred.len(),
        });
    }
    let mut errs = Vec::new();
    for i in 0..pred.len() {
        for j in i + 1..pred.len() {
            errs.push((pred[i].distance(&pred[j]) - gt[i].distance(&gt[j])).abs());
        }
    }
    let n = errs.len() as f64;
    let mean = errs.iter().sum::<f64>() / n;
    let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    Ok(DistanceError {
        mean,
        std: var.sqrt(),
        pairs: errs.len(),
    })
}

/// Evaluation report, written as `key=value` text and as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub version: String,
    pub frames_evaluated: usize,
    pub scale: f64,
    pub sdr: Vec<SdrEntry>,
    pub sdr_monotone: bool,
    pub masks: Option<MaskAggregate>,
    pub world_distance: Option<DistanceError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdrEntry {
    pub radius_px: f64,
    pub percent: f64,
}

impl EvalReport {
    pub fn new(pred: &Trajectory2D, gt: &Trajectory2D, radii: &[f64], scale: f64) -> Result<Self> {
        let frames = common_distances(pred, gt)?.len();
        let mut sdr = radii
            .iter()
            .map(|&r| {
                Ok(SdrEntry {
                    radius_px: r,
                    percent: sdr_scaled(pred, gt, r, scale)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        sdr.sort_by(|a, b| a.radius_px.total_cmp(&b.radius_px));
        let sdr_monotone = sdr.windows(2).all(|w| w[0].percent <= w[1].percent);
        Ok(EvalReport {
            version: crate::VERSION.to_string(),
            frames_evaluated: frames,
            scale,
            sdr,
            sdr_monotone,
            masks: None,
            world_distance: None,
        })
    }

    pub fn sdr_at(&self, radius: f64) -> Option<f64> {
        self.sdr
            .iter()
            .find(|e| e.radius_px == radius)
            .map(|e| e.percent)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        kv("version", self.version.clone());
        kv("frames_evaluated", self.frames_evaluated.to_string());
        kv("scale", self.scale.to_string());
        for e in &self.sdr {
            kv(&format!("sdr_{}", e.radius_px), format!("{:.4}", e.percent));
        }
        kv("sdr_monotone", self.sdr_monotone.to_string());
        if let Some(m) = &self.masks {
            kv("mask_frames", m.frames.to_string());
            kv("mask_both_empty_frames", m.both_empty_frames.to_string());
            for (name, s) in [("micro", &m.micro), ("macro", &m.macro_)] {
                kv(&format!("{name}_iou"), format!("{:.6}", s.iou));
                kv(&format!("{name}_precision"), format!("{:.6}", s.precision));
                kv(&format!("{name}_recall"), format!("{:.6}", s.recall));
                kv(&format!("{name}_f1"), format!("{:.6}", s.f1));
            }
        }
        if let Some(d) = &self.world_distance {
            kv("world_distance_error_m", format!("{:.6}", d.mean));
            kv("world_distance_std_m", format!("{:.6}", d.std));
            kv("world_distance_pairs", d.pairs.to_string());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line(n: usize, dx: f64) -> Trajectory2D {
        Trajectory2D::from_points((0..n).map(|i| ImagePoint::new(i as f64 + dx, 5.0)))
    }

    #[test]
    fn sdr_examples() {
        let gt = line(10, 0.0);
        assert_eq!(sdr(&gt, &gt, 10.0).unwrap(), 100.0);
        assert_eq!(sdr(&line(10, 11.0), &gt, 10.0).unwrap(), 0.0);
        let half: Trajectory2D = gt
            .iter()
            .map(|(f, p)| {
                let dx = if f % 2 == 0 { 0.0 } else { 20.0 };
                (f, ImagePoint::new(p.u + dx, p.v))
            })
            .collect();
        assert_eq!(sdr(&half, &gt, 10.0).unwrap(), 50.0);
        // radius boundary is inclusive
        assert_eq!(sdr(&line(10, 10.0), &gt, 10.0).unwrap(), 100.0);
        assert_eq!(sdr_scaled(&line(10, 10.0), &gt, 10.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn sdr_excludes_unmatched_frames() {
        let gt = line(4, 0.0);
        let mut pred = Trajectory2D::new();
        pred.insert(1, ImagePoint::new(1.0, 5.0));
        pred.insert(9, ImagePoint::new(0.0, 0.0));
        assert_eq!(sdr(&pred, &gt, 1.0).unwrap(), 100.0);
        let far: Trajectory2D = [(7, ImagePoint::new(0.0, 0.0))].into_iter().collect();
        assert!(matches!(sdr(&far, &gt, 1.0), Err(Error::NoCommonFrames)));
    }

    fn block(w: u32, h: u32, i0: u32, i1: u32) -> BinaryMask {
        let mut m = BinaryMask::new(w, h);
        for j in 0..h {
            m.fill_span(j, i0, i1);
        }
        m
    }

    #[test]
    fn mask_score_examples() {
        let gt = block(8, 4, 0, 8);
        let s = mask_scores(&gt, &gt).unwrap();
        assert_eq!((s.iou, s.precision, s.recall, s.f1), (1.0, 1.0, 1.0, 1.0));
        let s = mask_scores(&block(8, 4, 0, 4), &block(8, 4, 4, 8)).unwrap();
        assert_eq!((s.iou, s.precision, s.recall, s.f1), (0.0, 0.0, 0.0, 0.0));
        let s = mask_scores(&block(8, 4, 0, 4), &gt).unwrap();
        assert_eq!((s.iou, s.precision, s.recall), (0.5, 1.0, 0.5));
        assert_abs_diff_eq!(s.f1, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_mask_conventions() {
        let e = BinaryMask::new(3, 3);
        let s = mask_scores(&e, &e).unwrap();
        assert!(s.both_empty && s.iou == 1.0 && s.f1 == 1.0);
        let s = mask_scores(&e, &block(3, 3, 0, 1)).unwrap();
        assert!(!s.both_empty && s.iou == 0.0 && s.recall == 0.0 && s.precision == 0.0);
        assert!(mask_scores(&e, &BinaryMask::new(3, 2)).is_err());
    }

    #[test]
    fn micro_and_macro_differ() {
        let gt_big = block(10, 1, 0, 10);
        let pred_big = block(10, 1, 0, 10);
        let gt_small = block(10, 1, 0, 2);
        let pred_small = block(10, 1, 2, 4);
        let agg =
            aggregate_mask_scores([(&pred_big, &gt_big), (&pred_small, &gt_small)]).unwrap();
        assert_eq!(agg.frames, 2);
        assert_abs_diff_eq!(agg.macro_.iou, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(agg.micro.iou, 10.0 / 14.0, epsilon = 1e-12);
    }

    #[test]
    fn distance_error_examples() {
        let gt = [WorldPoint::new(0.0, 0.0, 0.0), WorldPoint::new(14.0, 0.0, 0.0)];
        let pred = [WorldPoint::new(0.0, 0.0, 0.0), WorldPoint::new(15.0, 0.0, 0.0)];
        let e = relative_distance_error(&pred, &gt).unwrap();
        assert_eq!((e.mean, e.std, e.pairs), (1.0, 0.0, 1));
        let shifted: Vec<_> = gt
            .iter()
            .map(|p| WorldPoint::new(p.x + 3.0, p.y - 7.0, p.z))
            .collect();
        assert_abs_diff_eq!(relative_distance_error(&shifted, &gt).unwrap().mean, 0.0);
        assert!(relative_distance_error(&gt[..1], &gt[..1]).is_err());
    }

    #[test]
    fn report_text_and_json() {
        let gt = line(5, 0.0);
        let r = EvalReport::new(&line(5, 15.0), &gt, &SDR_RADII, 1.0).unwrap();
        assert_eq!(r.sdr_at(10.0), Some(0.0));
        assert_eq!(r.sdr_at(20.0), Some(100.0));
        assert!(r.sdr_monotone);
        let text = r.to_text();
        assert!(text.contains("sdr_30=100.0000\n"));
        let back: EvalReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
