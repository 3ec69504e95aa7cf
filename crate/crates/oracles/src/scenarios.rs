//! Random small tracking scenarios for metric comparisons.

use langtrack::graph::BBox;
use langtrack::metrics::TrackBox;
use rand::seq::SliceRandom;
use rand::Rng;

/// Ground truth and a noisy prediction with missed boxes, false positives
/// and identity swaps. At most `max_ids` ids per side and `max_frames`
/// frames; ids in one frame are distinct on each side.
pub fn scenario<R: Rng>(
    rng: &mut R,
    max_ids: usize,
    max_frames: u32,
) -> (Vec<TrackBox>, Vec<TrackBox>) {
    let num_gt = rng.random_range(1..=max_ids);
    let num_frames = rng.random_range(1..=max_frames);
    let mut gt = Vec::new();
    let mut pred = Vec::new();
    let mut id_map: Vec<u32> = (1..=max_ids as u32).collect();
    id_map.shuffle(rng);
    let tracks: Vec<(u32, u32, f64, f64, f64, f64)> = (0..num_gt)
        .map(|_| {
            let start = rng.random_range(1..=num_frames);
            let end = rng.random_range(start..=num_frames);
            let (x, y) = (rng.random_range(0.0..60.0), rng.random_range(0.0..60.0));
            let (vx, vy) = (rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
            (start, end, x, y, vx, vy)
        })
        .collect();
    for frame in 1..=num_frames {
        if rng.random_bool(0.15) && max_ids > 1 {
            let (a, b) = (rng.random_range(0..max_ids), rng.random_range(0..max_ids));
            id_map.swap(a, b);
        }
        let mut used = Vec::new();
        for (k, &(start, end, x, y, vx, vy)) in tracks.iter().enumerate() {
            if frame < start || frame > end {
                continue;
            }
            let t = (frame - start) as f64;
            let truth = BBox::new(x + vx * t, y + vy * t, 20.0, 40.0);
            gt.push(TrackBox::new(frame, k as u32 + 1, truth));
            if rng.random_bool(0.8) {
                let j = |rng: &mut R| rng.random_range(-6.0..6.0);
                let b = BBox::new(
                    truth.left + j(rng),
                    truth.top + j(rng),
                    20.0 + j(rng),
                    40.0 + j(rng),
                );
                pred.push(TrackBox::new(frame, id_map[k], b));
                used.push(id_map[k]);
            }
        }
        if rng.random_bool(0.3) {
            if let Some(&id) = id_map.iter().find(|id| !used.contains(id)) {
                let b = BBox::new(
                    rng.random_range(0.0..80.0),
                    rng.random_range(0.0..80.0),
                    20.0,
                    40.0,
                );
                pred.push(TrackBox::new(frame, id, b));
            }
        }
    }
    (gt, pred)
}

/// One object over `frames` frames with exact predicted boxes whose id
/// changes from 1 to 2 at `switch_at`.
pub fn id_switch(frames: u32, switch_at: u32) -> (Vec<TrackBox>, Vec<TrackBox>) {
    let b = |f: u32| BBox::new(10.0 * f as f64, 50.0, 30.0, 60.0);
    let gt = (1..=frames).map(|f| TrackBox::new(f, 1, b(f))).collect();
    let pred = (1..=frames)
        .map(|f| TrackBox::new(f, if f < switch_at { 1 } else { 2 }, b(f)))
        .collect();
    (gt, pred)
}
