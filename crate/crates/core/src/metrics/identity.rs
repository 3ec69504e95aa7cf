use std::collections::BTreeMap;

use super::hungarian::max_weight_assignment;
use super::{by_frame, TrackBox};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityResult {
    pub idf1: f64,
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
    /// Set when both sides are empty and IDF1 is 1 by convention.
    pub empty: bool,
}

/// Per-pair counts of frames in which a ground-truth and a predicted
/// trajectory overlap with IoU at or above the threshold.
pub(crate) fn overlap_counts(
    gt: &[TrackBox],
    pred: &[TrackBox],
    iou_threshold: f64,
) -> Result<(Vec<u32>, Vec<u32>, Vec<Vec<f64>>)> {
    let frames = by_frame(gt, pred)?;
    let index = |boxes: &[TrackBox]| -> BTreeMap<u32, usize> {
        let mut ids: Vec<u32> = boxes.iter().map(|b| b.id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter().enumerate().map(|(i, id)| (id, i)).collect()
    };
    let (gi, pi) = (index(gt), index(pred));
    let mut counts = vec![vec![0.0; pi.len()]; gi.len()];
    for (g, p) in frames.values() {
        for (gid, gb) in g {
            for (pid, pb) in p {
                if gb.iou(pb) >= iou_threshold {
                    counts[gi[gid]][pi[pid]] += 1.0;
                }
            }
        }
    }
    Ok((gi.into_keys().collect(), pi.into_keys().collect(), counts))
}

/// Identity F1 under the trajectory matching that maximises identity true
/// positives.
pub fn idf1(gt: &[TrackBox], pred: &[TrackBox], iou_threshold: f64) -> Result<IdentityResult> {
    let (_, _, counts) = overlap_counts(gt, pred, iou_threshold)?;
    let idtp: f64 = max_weight_assignment(&counts)
        .into_iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| counts[r][c]))
        .sum();
    let idtp = idtp as u64;
    let idfn = gt.len() as u64 - idtp;
    let idfp = pred.len() as u64 - idtp;
    let denom = 2 * idtp + idfp + idfn;
    if denom == 0 {
        return Ok(IdentityResult {
            idf1: 1.0,
            idtp,
            idfp,
            idfn,
            empty: true,
        });
    }
    Ok(IdentityResult {
        idf1: 2.0 * idtp as f64 / denom as f64,
        idtp,
        idfp,
        idfn,
        empty: false,
    })
}
