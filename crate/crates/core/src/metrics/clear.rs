use std::collections::BTreeMap;

use super::hungarian::max_weight_assignment;
use super::{by_frame, iou_matrix, TrackBox};
use crate::error::Result;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameMatch {
    pub frame: u32,
    /// `(gt_id, pred_id)` pairs sorted by gt id.
    pub matches: Vec<(u32, u32)>,
    pub unmatched_gt: Vec<u32>,
    pub unmatched_pred: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameMatching {
    pub iou_threshold: f64,
    pub frames: Vec<FrameMatch>,
}

/// Per-frame matching with the CLEAR persistence rule: a pair matched in the
/// previous frame is kept while its IoU stays at or above the threshold; the
/// remaining boxes are matched to maximise the number of pairs, then their
/// total IoU.
pub fn match_frames(
    gt: &[TrackBox],
    pred: &[TrackBox],
    iou_threshold: f64,
) -> Result<FrameMatching> {
    let frames = by_frame(gt, pred)?;
    let mut out = Vec::with_capacity(frames.len());
    let mut previous: BTreeMap<u32, u32> = BTreeMap::new();
    let mut previous_frame = None;
    for (&frame, (g, p)) in &frames {
        if previous_frame.is_some_and(|f| f + 1 != frame) {
            previous.clear();
        }
        previous_frame = Some(frame);
        let iou = iou_matrix(g, p);
        let mut gt_used = vec![false; g.len()];
        let mut pred_used = vec![false; p.len()];
        let mut matches = Vec::new();
        for (gi, (gid, _)) in g.iter().enumerate() {
            if let Some(&pid) = previous.get(gid) {
                if let Ok(pi) = p.binary_search_by_key(&pid, |x| x.0) {
                    if iou[gi][pi] >= iou_threshold {
                        gt_used[gi] = true;
                        pred_used[pi] = true;
                        matches.push((gi, pi));
                    }
                }
            }
        }
        let free_g: Vec<usize> = (0..g.len()).filter(|&i| !gt_used[i]).collect();
        let free_p: Vec<usize> = (0..p.len()).filter(|&i| !pred_used[i]).collect();
        let bonus = free_g.len().min(free_p.len()) as f64 + 1.0;
        let weights: Vec<Vec<f64>> = free_g
            .iter()
            .map(|&gi| {
                free_p
                    .iter()
                    .map(|&pi| {
                        if iou[gi][pi] >= iou_threshold {
                            bonus + iou[gi][pi]
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        for (r, c) in max_weight_assignment(&weights).into_iter().enumerate() {
            if let Some(c) = c {
                if weights[r][c] > 0.0 {
                    gt_used[free_g[r]] = true;
                    pred_used[free_p[c]] = true;
                    matches.push((free_g[r], free_p[c]));
                }
            }
        }
        matches.sort_unstable();
        previous = matches.iter().map(|&(gi, pi)| (g[gi].0, p[pi].0)).collect();
        out.push(FrameMatch {
            frame,
            matches: matches.iter().map(|&(gi, pi)| (g[gi].0, p[pi].0)).collect(),
            unmatched_gt: (0..g.len())
                .filter(|&i| !gt_used[i])
                .map(|i| g[i].0)
                .collect(),
            unmatched_pred: (0..p.len())
                .filter(|&i| !pred_used[i])
                .map(|i| p[i].0)
                .collect(),
        });
    }
    Ok(FrameMatching {
        iou_threshold,
        frames: out,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClearResult {
    /// NaN when there are no ground-truth boxes.
    pub mota: f64,
    pub idsw: u64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub num_gt: u64,
}

/// MOTA and identity switches. A switch is counted when a matched
/// ground-truth id is paired with a different prediction than at its most
/// recent earlier match.
pub fn clear_mot(matching: &FrameMatching) -> ClearResult {
    let mut last: BTreeMap<u32, u32> = BTreeMap::new();
    let (mut tp, mut fp, mut fn_, mut idsw) = (0u64, 0u64, 0u64, 0u64);
    for f in &matching.frames {
        for &(g, p) in &f.matches {
            if last.insert(g, p).is_some_and(|old| old != p) {
                idsw += 1;
            }
        }
        tp += f.matches.len() as u64;
        fp += f.unmatched_pred.len() as u64;
        fn_ += f.unmatched_gt.len() as u64;
    }
    let num_gt = tp + fn_;
    let mota = if num_gt == 0 {
        f64::NAN
    } else {
        1.0 - (fn_ + fp + idsw) as f64 / num_gt as f64
    };
    ClearResult {
        mota,
        idsw,
        tp,
        fp,
        fn_,
        num_gt,
    }
}
