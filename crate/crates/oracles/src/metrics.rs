//! Brute-force tracking metrics. Every matching is found by enumerating all
//! partial one-to-one assignments, so inputs must stay small (five or so ids
//! per side).

use std::collections::{BTreeMap, BTreeSet};

use langtrack::metrics::TrackBox;

const EPS: f64 = f64::EPSILON;

pub fn iou(a: &TrackBox, b: &TrackBox) -> f64 {
    let (a, b) = (a.bbox, b.bbox);
    let w = (a.left + a.width).min(b.left + b.width) - a.left.max(b.left);
    let h = (a.top + a.height).min(b.top + b.height) - a.top.max(b.top);
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let inter = w * h;
    inter / (a.width * a.height + b.width * b.height - inter)
}

/// All partial injective assignments rows -> columns over allowed pairs.
pub fn assignments(
    rows: usize,
    cols: usize,
    allowed: &dyn Fn(usize, usize) -> bool,
) -> Vec<Vec<(usize, usize)>> {
    fn go(
        r: usize,
        rows: usize,
        cols: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize)>,
        allowed: &dyn Fn(usize, usize) -> bool,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if r == rows {
            out.push(cur.clone());
            return;
        }
        go(r + 1, rows, cols, used, cur, allowed, out);
        for c in 0..cols {
            if !used[c] && allowed(r, c) {
                used[c] = true;
                cur.push((r, c));
                go(r + 1, rows, cols, used, cur, allowed, out);
                cur.pop();
                used[c] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(
        0,
        rows,
        cols,
        &mut vec![false; cols],
        &mut Vec::new(),
        allowed,
        &mut out,
    );
    out
}

fn frames(gt: &[TrackBox], pred: &[TrackBox]) -> BTreeMap<u32, (Vec<TrackBox>, Vec<TrackBox>)> {
    let mut out: BTreeMap<u32, (Vec<TrackBox>, Vec<TrackBox>)> = BTreeMap::new();
    for b in gt {
        out.entry(b.frame).or_default().0.push(*b);
    }
    for b in pred {
        out.entry(b.frame).or_default().1.push(*b);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Clear {
    pub mota: f64,
    pub idsw: u64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

/// CLEAR MOT: last frame's pairs are kept while they still overlap enough;
/// the rest is matched for the most pairs, then the largest IoU sum.
pub fn clear(gt: &[TrackBox], pred: &[TrackBox], thr: f64) -> Clear {
    let (mut tp, mut fp, mut fn_, mut idsw) = (0, 0, 0, 0);
    let mut prev: BTreeMap<u32, u32> = BTreeMap::new();
    let mut last: BTreeMap<u32, u32> = BTreeMap::new();
    let mut prev_frame: Option<u32> = None;
    for (frame, (g, p)) in frames(gt, pred) {
        if prev_frame != Some(frame.wrapping_sub(1)) {
            prev.clear();
        }
        prev_frame = Some(frame);
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (i, gb) in g.iter().enumerate() {
            if let Some(j) = prev
                .get(&gb.id)
                .and_then(|pid| p.iter().position(|pb| pb.id == *pid))
            {
                if iou(gb, &p[j]) >= thr {
                    pairs.push((i, j));
                }
            }
        }
        let g_free: Vec<usize> = (0..g.len())
            .filter(|i| !pairs.iter().any(|x| x.0 == *i))
            .collect();
        let p_free: Vec<usize> = (0..p.len())
            .filter(|j| !pairs.iter().any(|x| x.1 == *j))
            .collect();
        let allowed = |r: usize, c: usize| iou(&g[g_free[r]], &p[p_free[c]]) >= thr;
        let mut best: Option<(usize, f64, Vec<(usize, usize)>)> = None;
        for a in assignments(g_free.len(), p_free.len(), &allowed) {
            let sum: f64 = a
                .iter()
                .map(|&(r, c)| iou(&g[g_free[r]], &p[p_free[c]]))
                .sum();
            let better = match &best {
                None => true,
                Some((n, s, _)) => a.len() > *n || (a.len() == *n && sum > *s),
            };
            if better {
                best = Some((a.len(), sum, a));
            }
        }
        if let Some((_, _, a)) = best {
            pairs.extend(a.into_iter().map(|(r, c)| (g_free[r], p_free[c])));
        }
        prev.clear();
        for &(i, j) in &pairs {
            let (gid, pid) = (g[i].id, p[j].id);
            if let Some(old) = last.insert(gid, pid) {
                if old != pid {
                    idsw += 1;
                }
            }
            prev.insert(gid, pid);
        }
        tp += pairs.len() as u64;
        fp += (p.len() - pairs.len()) as u64;
        fn_ += (g.len() - pairs.len()) as u64;
    }
    let mota = 1.0 - (fn_ + fp + idsw) as f64 / gt.len() as f64;
    Clear {
        mota,
        idsw,
        tp,
        fp,
        fn_,
    }
}

fn ids(boxes: &[TrackBox]) -> Vec<u32> {
    boxes
        .iter()
        .map(|b| b.id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// IDF1 from the best one-to-one gt/pred trajectory matching, found by
/// enumeration.
pub fn idf1(gt: &[TrackBox], pred: &[TrackBox], thr: f64) -> (f64, u64) {
    let (gids, pids) = (ids(gt), ids(pred));
    let overlap = |g: u32, p: u32| -> u64 {
        gt.iter()
            .filter(|a| a.id == g)
            .map(|a| {
                pred.iter()
                    .filter(|b| b.id == p && b.frame == a.frame && iou(a, b) >= thr)
                    .count() as u64
            })
            .sum()
    };
    let table: Vec<Vec<u64>> = gids
        .iter()
        .map(|&g| pids.iter().map(|&p| overlap(g, p)).collect())
        .collect();
    let idtp = assignments(gids.len(), pids.len(), &|_, _| true)
        .iter()
        .map(|a| a.iter().map(|&(r, c)| table[r][c]).sum::<u64>())
        .max()
        .unwrap_or(0);
    let total = (gt.len() + pred.len()) as u64;
    if total == 0 {
        return (1.0, 0);
    }
    (2.0 * idtp as f64 / total as f64, idtp)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hota {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
}

/// HOTA over the 19 thresholds 0.05..0.95. One matching per frame maximises
/// the IoU weighted by the trajectory-level alignment of the two ids; each
/// threshold then keeps the matched pairs whose IoU reaches it.
pub fn hota(gt: &[TrackBox], pred: &[TrackBox]) -> Hota {
    let per_frame = frames(gt, pred);
    let count = |boxes: &[TrackBox], id: u32| boxes.iter().filter(|b| b.id == id).count() as f64;

    // Soft co-occurrence of every id pair, normalised within each frame.
    let mut soft: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for (g, p) in per_frame.values() {
        for a in g {
            for b in p {
                let s = iou(a, b);
                let row: f64 = p.iter().map(|x| iou(a, x)).sum();
                let col: f64 = g.iter().map(|x| iou(x, b)).sum();
                if row + col - s > 0.0 {
                    *soft.entry((a.id, b.id)).or_default() += s / (row + col - s);
                }
            }
        }
    }
    let align = |g: u32, p: u32| {
        let s = soft.get(&(g, p)).copied().unwrap_or(0.0);
        let d = count(gt, g) + count(pred, p) - s;
        if d > 0.0 {
            s / d
        } else {
            0.0
        }
    };

    // (gt id, pred id, iou) of every matched pair over the sequence.
    let mut matched: Vec<(u32, u32, f64)> = Vec::new();
    for (g, p) in per_frame.values() {
        let score = |r: usize, c: usize| align(g[r].id, p[c].id) * iou(&g[r], &p[c]);
        let mut best: (f64, Vec<(usize, usize)>) = (f64::NEG_INFINITY, Vec::new());
        for a in assignments(g.len(), p.len(), &|r, c| score(r, c) > EPS) {
            let total: f64 = a.iter().map(|&(r, c)| score(r, c)).sum();
            if total > best.0 {
                best = (total, a);
            }
        }
        matched.extend(
            best.1
                .iter()
                .map(|&(r, c)| (g[r].id, p[c].id, iou(&g[r], &p[c]))),
        );
    }

    let (mut h, mut d, mut a) = (0.0, 0.0, 0.0);
    for i in 0..19 {
        let alpha = 0.05 * (i + 1) as f64;
        let tps: Vec<(u32, u32)> = matched
            .iter()
            .filter(|m| m.2 >= alpha - EPS)
            .map(|m| (m.0, m.1))
            .collect();
        let tp = tps.len() as f64;
        let fn_ = gt.len() as f64 - tp;
        let fp = pred.len() as f64 - tp;
        let deta = tp / (tp + fn_ + fp).max(1.0);
        let mut ass = 0.0;
        for &(g, p) in &tps {
            let tpa = tps.iter().filter(|&&x| x == (g, p)).count() as f64;
            let fna = count(gt, g) - tpa;
            let fpa = count(pred, p) - tpa;
            ass += tpa / (tpa + fna + fpa);
        }
        let assa = ass / tp.max(1.0);
        h += (deta * assa).sqrt();
        d += deta;
        a += assa;
    }
    Hota {
        hota: h / 19.0,
        deta: d / 19.0,
        assa: a / 19.0,
    }
}
