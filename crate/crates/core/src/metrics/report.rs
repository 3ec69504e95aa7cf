use std::fmt::Write as _;

use super::hota::HotaResult;
use super::{clear_mot, hota, idf1, match_frames, TrackBox};
use crate::error::Result;

/// All metrics of one evaluation. Undefined scores are NaN and listed in
/// `flags`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub mota: f64,
    pub idf1: f64,
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub idsw: u64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
    pub num_gt: u64,
    pub num_pred: u64,
    pub hota_detail: HotaResult,
    pub flags: Vec<String>,
}

/// Evaluates one sequence.
pub fn evaluate(gt: &[TrackBox], pred: &[TrackBox], iou_threshold: f64) -> Result<MetricReport> {
    let clear = clear_mot(&match_frames(gt, pred, iou_threshold)?);
    let id = idf1(gt, pred, iou_threshold)?;
    let h = hota(gt, pred)?;
    let mut flags = Vec::new();
    if clear.num_gt == 0 {
        flags.push("no-ground-truth".to_string());
    }
    if id.empty {
        flags.push("idf1-empty-convention".to_string());
    }
    Ok(MetricReport {
        mota: clear.mota,
        idf1: id.idf1,
        hota: h.hota,
        deta: h.deta,
        assa: h.assa,
        idsw: clear.idsw,
        tp: clear.tp,
        fp: clear.fp,
        fn_: clear.fn_,
        idtp: id.idtp,
        idfp: id.idfp,
        idfn: id.idfn,
        num_gt: clear.num_gt,
        num_pred: pred.len() as u64,
        hota_detail: h,
        flags,
    })
}

impl MetricReport {
    /// Pools several sequences by summing their counts, in the given order.
    pub fn combine(reports: &[MetricReport]) -> MetricReport {
        let sum = |f: fn(&MetricReport) -> u64| reports.iter().map(f).sum::<u64>();
        let (tp, fp, fn_, idsw) = (
            sum(|r| r.tp),
            sum(|r| r.fp),
            sum(|r| r.fn_),
            sum(|r| r.idsw),
        );
        let (idtp, idfp, idfn) = (sum(|r| r.idtp), sum(|r| r.idfp), sum(|r| r.idfn));
        let (num_gt, num_pred) = (sum(|r| r.num_gt), sum(|r| r.num_pred));
        let vsum = |f: fn(&HotaResult) -> &Vec<f64>| -> Vec<f64> {
            (0..super::HOTA_ALPHAS)
                .map(|i| reports.iter().map(|r| f(&r.hota_detail)[i]).sum())
                .collect()
        };
        let h = HotaResult::from_sums(
            vsum(|h| &h.tp),
            vsum(|h| &h.fn_),
            vsum(|h| &h.fp),
            vsum(|h| &h.ass_sum),
        );
        let mut flags = Vec::new();
        let mota = if num_gt == 0 {
            flags.push("no-ground-truth".to_string());
            f64::NAN
        } else {
            1.0 - (fn_ + fp + idsw) as f64 / num_gt as f64
        };
        let denom = 2 * idtp + idfp + idfn;
        let idf1 = if denom == 0 {
            flags.push("idf1-empty-convention".to_string());
            1.0
        } else {
            2.0 * idtp as f64 / denom as f64
        };
        MetricReport {
            mota,
            idf1,
            hota: h.hota,
            deta: h.deta,
            assa: h.assa,
            idsw,
            tp,
            fp,
            fn_,
            idtp,
            idfp,
            idfn,
            num_gt,
            num_pred,
            hota_detail: h,
            flags,
        }
    }

    /// `key=value` lines in a fixed order; floats use shortest round-trip
    /// formatting.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for (k, v) in [
            ("mota", self.mota),
            ("idf1", self.idf1),
            ("hota", self.hota),
            ("deta", self.deta),
            ("assa", self.assa),
        ] {
            let _ = writeln!(out, "{k}={v}");
        }
        for (k, v) in [
            ("idsw", self.idsw),
            ("tp", self.tp),
            ("fp", self.fp),
            ("fn", self.fn_),
            ("idtp", self.idtp),
            ("idfp", self.idfp),
            ("idfn", self.idfn),
            ("num_gt", self.num_gt),
            ("num_pred", self.num_pred),
        ] {
            let _ = writeln!(out, "{k}={v}");
        }
        let _ = writeln!(out, "flags={}", self.flags.join(","));
        out
    }

    /// Reads back the scalar fields written by [`MetricReport::to_key_value`].
    pub fn value(text: &str, key: &str) -> Option<f64> {
        text.lines()
            .find_map(|l| l.strip_prefix(key)?.strip_prefix('=')?.parse().ok())
    }

    /// Fixed-width table with one row per labelled report, scores in percent.
    pub fn table(rows: &[(String, MetricReport)]) -> String {
        let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(8);
        let mut out = format!(
            "{:<width$} {:>7} {:>7} {:>7} {:>7} {:>7} {:>6}\n",
            "sequence", "HOTA", "IDF1", "MOTA", "DetA", "AssA", "IDSW"
        );
        for (name, r) in rows {
            let _ = writeln!(
                out,
                "{:<width$} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>6}",
                name,
                100.0 * r.hota,
                100.0 * r.idf1,
                100.0 * r.mota,
                100.0 * r.deta,
                100.0 * r.assa,
                r.idsw
            );
        }
        out
    }
}
