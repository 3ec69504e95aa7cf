use super::hungarian::max_weight_assignment;
use super::{by_frame, iou_matrix, TrackBox};
use crate::error::Result;

/// Localisation thresholds 0.05, 0.10, ..., 0.95.
pub const HOTA_ALPHAS: usize = 19;

pub(crate) fn alpha(i: usize) -> f64 {
    0.05 + i as f64 * 0.05
}

/// Per-threshold sums, kept so several sequences can be combined.
#[derive(Clone, Debug, PartialEq)]
pub struct HotaResult {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub tp: Vec<f64>,
    pub fn_: Vec<f64>,
    pub fp: Vec<f64>,
    /// Sum over true positives of their association accuracy.
    pub ass_sum: Vec<f64>,
    /// Set when there are no ground-truth boxes; the scores are then NaN.
    pub undefined: bool,
}

impl HotaResult {
    pub(crate) fn from_sums(tp: Vec<f64>, fn_: Vec<f64>, fp: Vec<f64>, ass_sum: Vec<f64>) -> Self {
        let undefined = tp.first().is_none_or(|&t| t + fn_[0] == 0.0);
        let (mut h, mut d, mut a) = (0.0, 0.0, 0.0);
        for i in 0..HOTA_ALPHAS {
            let deta = tp[i] / (tp[i] + fn_[i] + fp[i]).max(1.0);
            let assa = ass_sum[i] / tp[i].max(1.0);
            h += (deta * assa).sqrt();
            d += deta;
            a += assa;
        }
        let n = HOTA_ALPHAS as f64;
        let (hota, deta, assa) = if undefined {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            (h / n, d / n, a / n)
        };
        Self {
            hota,
            deta,
            assa,
            tp,
            fn_,
            fp,
            ass_sum,
            undefined,
        }
    }
}

/// Higher Order Tracking Accuracy. Each frame is matched once, weighting IoU
/// by the global alignment of the two trajectories; the matching is then
/// thresholded at each localisation level.
pub fn hota(gt: &[TrackBox], pred: &[TrackBox]) -> Result<HotaResult> {
    let frames = by_frame(gt, pred)?;
    let index = |boxes: &[TrackBox]| {
        let mut ids: Vec<u32> = boxes.iter().map(|b| b.id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    let (gids, pids) = (index(gt), index(pred));
    let gpos = |id: u32| gids.binary_search(&id).expect("known gt id");
    let ppos = |id: u32| pids.binary_search(&id).expect("known pred id");
    let (ng, np) = (gids.len(), pids.len());

    let mut gt_count = vec![0.0; ng];
    let mut pred_count = vec![0.0; np];
    let mut potential = vec![vec![0.0; np]; ng];
    let mut sims = Vec::with_capacity(frames.len());
    for (g, p) in frames.values() {
        let sim = iou_matrix(g, p);
        let col_sum: Vec<f64> = (0..p.len())
            .map(|j| sim.iter().map(|r| r[j]).sum())
            .collect();
        for (i, (gid, _)) in g.iter().enumerate() {
            let row_sum: f64 = sim[i].iter().sum();
            for (j, (pid, _)) in p.iter().enumerate() {
                let denom = row_sum + col_sum[j] - sim[i][j];
                if denom > 0.0 {
                    potential[gpos(*gid)][ppos(*pid)] += sim[i][j] / denom;
                }
            }
        }
        for (gid, _) in g {
            gt_count[gpos(*gid)] += 1.0;
        }
        for (pid, _) in p {
            pred_count[ppos(*pid)] += 1.0;
        }
        sims.push(sim);
    }
    let global: Vec<Vec<f64>> = (0..ng)
        .map(|i| {
            (0..np)
                .map(|j| {
                    let d = gt_count[i] + pred_count[j] - potential[i][j];
                    if d > 0.0 {
                        potential[i][j] / d
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();

    let eps = f64::EPSILON;
    let mut tp = vec![0.0; HOTA_ALPHAS];
    let mut matches = vec![vec![vec![0.0; np]; ng]; HOTA_ALPHAS];
    for ((g, p), sim) in frames.values().zip(&sims) {
        if g.is_empty() || p.is_empty() {
            continue;
        }
        let score: Vec<Vec<f64>> = g
            .iter()
            .enumerate()
            .map(|(i, (gid, _))| {
                p.iter()
                    .enumerate()
                    .map(|(j, (pid, _))| global[gpos(*gid)][ppos(*pid)] * sim[i][j])
                    .collect()
            })
            .collect();
        for (i, j) in max_weight_assignment(&score).into_iter().enumerate() {
            let Some(j) = j else { continue };
            if score[i][j] <= eps {
                continue;
            }
            for (a, m) in matches.iter_mut().enumerate() {
                if sim[i][j] >= alpha(a) - eps {
                    tp[a] += 1.0;
                    m[gpos(g[i].0)][ppos(p[j].0)] += 1.0;
                }
            }
        }
    }
    let (num_gt, num_pred) = (gt.len() as f64, pred.len() as f64);
    let mut ass_sum = vec![0.0; HOTA_ALPHAS];
    for (a, m) in matches.iter().enumerate() {
        for i in 0..ng {
            for j in 0..np {
                let c = m[i][j];
                if c > 0.0 {
                    ass_sum[a] += c * c / (gt_count[i] + pred_count[j] - c);
                }
            }
        }
    }
    let fn_ = tp.iter().map(|t| num_gt - t).collect();
    let fp = tp.iter().map(|t| num_pred - t).collect();
    Ok(HotaResult::from_sums(tp, fn_, fp, ass_sum))
}
