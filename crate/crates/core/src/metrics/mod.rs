//! CLEAR-MOT, identity and HOTA metrics.

mod clear;
mod hota;
pub mod hungarian;
mod identity;
mod report;

use std::collections::BTreeMap;

pub use clear::{clear_mot, match_frames, ClearResult, FrameMatch, FrameMatching};
pub use hota::{hota, HotaResult, HOTA_ALPHAS};
pub use identity::{idf1, IdentityResult};
pub use report::{evaluate, MetricReport};

use crate::error::{Error, Result};
use crate::graph::BBox;

/// IoU threshold for CLEAR and identity metrics.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// One labelled box of a ground-truth or predicted sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackBox {
    pub frame: u32,
    pub id: u32,
    pub bbox: BBox,
}

impl TrackBox {
    pub fn new(frame: u32, id: u32, bbox: BBox) -> Self {
        Self { frame, id, bbox }
    }
}

/// Boxes of one frame, sorted by id.
pub(crate) type FrameBoxes = Vec<(u32, BBox)>;

/// Groups boxes per frame; every frame present on either side gets an entry.
pub(crate) fn by_frame(
    gt: &[TrackBox],
    pred: &[TrackBox],
) -> Result<BTreeMap<u32, (FrameBoxes, FrameBoxes)>> {
    let mut frames: BTreeMap<u32, (FrameBoxes, FrameBoxes)> = BTreeMap::new();
    for b in gt {
        frames.entry(b.frame).or_default().0.push((b.id, b.bbox));
    }
    for b in pred {
        frames.entry(b.frame).or_default().1.push((b.id, b.bbox));
    }
    for (frame, (g, p)) in frames.iter_mut() {
        for (side, list) in [("ground truth", g), ("prediction", p)] {
            list.sort_by_key(|x| x.0);
            if let Some(w) = list.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::Validation(format!(
                    "{side} id {} appears twice in frame {frame}",
                    w[0].0
                )));
            }
        }
    }
    Ok(frames)
}

pub(crate) fn iou_matrix(gt: &FrameBoxes, pred: &FrameBoxes) -> Vec<Vec<f64>> {
    gt.iter()
        .map(|(_, g)| pred.iter().map(|(_, p)| g.iou(p)).collect())
        .collect()
}
