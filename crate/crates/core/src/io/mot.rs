//! MOTChallenge text files.
//!
//! Every line is `frame,id,left,top,width,height,conf,class,visibility`
//! followed by optional fields. Only the first six are required. Detection
//! files produced by this crate use ten columns and append the appearance
//! vector from column eleven on; tracking results are written as
//! `frame,id,left,top,width,height,conf,-1,-1,-1`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{read_text, write_text};
use crate::error::{Error, Result};
use crate::graph::{BBox, Detection};
use crate::inference::TrackResult;
use crate::metrics::TrackBox;

#[derive(Clone, Debug, PartialEq)]
pub struct MotRecord {
    pub frame: u32,
    pub id: i64,
    pub bbox: BBox,
    pub conf: f64,
    pub class_id: i64,
    /// -1 when absent.
    pub visibility: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MotMode {
    /// Ground truth: box sizes must be positive.
    Gt,
    /// Detections or results.
    Any,
}

fn field<T: std::str::FromStr>(
    fields: &[&str],
    i: usize,
    name: &str,
) -> std::result::Result<T, String> {
    let raw = fields
        .get(i)
        .ok_or_else(|| format!("missing {name} column"))?;
    raw.trim()
        .parse()
        .map_err(|_| format!("bad {name} value {raw:?}"))
}

fn parse_line(line: &str, mode: MotMode) -> std::result::Result<(MotRecord, Vec<&str>), String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() < 6 {
        return Err(format!(
            "expected at least 6 comma-separated fields, found {}",
            fields.len()
        ));
    }
    let frame: u32 = field(&fields, 0, "frame")?;
    if frame < 1 {
        return Err("frame must be >= 1".into());
    }
    let id: i64 = field(&fields, 1, "id")?;
    let coords: Vec<f64> = (2..6)
        .map(|i| {
            field::<f64>(&fields, i, "box").and_then(|v| {
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err("non-finite box value".into())
                }
            })
        })
        .collect::<std::result::Result<_, _>>()?;
    let bbox = BBox::new(coords[0], coords[1], coords[2], coords[3]);
    if mode == MotMode::Gt && !(bbox.width > 0.0 && bbox.height > 0.0) {
        return Err("ground-truth box must have positive width and height".into());
    }
    let conf = if fields.len() > 6 {
        field(&fields, 6, "conf")?
    } else {
        1.0
    };
    let class_id = if fields.len() > 7 {
        field(&fields, 7, "class")?
    } else {
        -1
    };
    let visibility = if fields.len() > 8 {
        field(&fields, 8, "visibility")?
    } else {
        -1.0
    };
    let rest = fields.get(10..).map(<[&str]>::to_vec).unwrap_or_default();
    Ok((
        MotRecord {
            frame,
            id,
            bbox,
            conf,
            class_id,
            visibility,
        },
        rest,
    ))
}

/// Parses MOT text; `path` is only used in error messages. Blank lines are
/// skipped.
pub fn parse_mot(text: &str, path: &Path, mode: MotMode) -> Result<Vec<MotRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (rec, _) = parse_line(line, mode).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_mot(path: impl AsRef<Path>, mode: MotMode) -> Result<Vec<MotRecord>> {
    let path = path.as_ref();
    parse_mot(&read_text(path)?, path, mode)
}

/// Reads a detection file with appearance vectors. Non-negative ids become
/// ground-truth ids of the detections.
pub fn read_detections(path: impl AsRef<Path>) -> Result<Vec<Detection>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut out = Vec::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: PathBuf::from(path),
            line: i + 1,
            message,
        };
        let (rec, rest) = parse_line(line, MotMode::Gt).map_err(err)?;
        let appearance: Vec<f64> = rest
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| format!("bad appearance value {s:?}"))
            })
            .collect::<std::result::Result<_, _>>()
            .map_err(err)?;
        if *dim.get_or_insert(appearance.len()) != appearance.len() {
            return Err(err(format!(
                "appearance has {} values, earlier lines {}",
                appearance.len(),
                dim.unwrap()
            )));
        }
        out.push(record_to_detection(&rec, appearance));
    }
    Ok(out)
}

fn record_to_detection(rec: &MotRecord, appearance: Vec<f64>) -> Detection {
    Detection {
        frame: rec.frame,
        bbox: rec.bbox,
        appearance,
        confidence: rec.conf,
        visibility: rec.visibility,
        gt_id: u32::try_from(rec.id).ok(),
    }
}

/// Detections without appearance from plain records.
pub fn detections_from_records(records: &[MotRecord]) -> Vec<Detection> {
    records
        .iter()
        .map(|r| record_to_detection(r, Vec::new()))
        .collect()
}

fn push_box(out: &mut String, frame: u32, id: i64, b: &BBox) {
    let _ = write!(
        out,
        "{frame},{id},{},{},{},{}",
        b.left, b.top, b.width, b.height
    );
}

/// Writes detections with their appearance vectors; the id column carries
/// the ground-truth id or -1.
pub fn write_detections(path: impl AsRef<Path>, detections: &[Detection]) -> Result<()> {
    let mut out = String::new();
    for d in detections {
        push_box(&mut out, d.frame, d.gt_id.map_or(-1, i64::from), &d.bbox);
        let _ = write!(out, ",{},-1,-1,-1", d.confidence);
        for v in &d.appearance {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    write_text(path.as_ref(), &out)
}

pub fn write_gt(path: impl AsRef<Path>, boxes: &[(TrackBox, f64)]) -> Result<()> {
    let mut out = String::new();
    for (b, vis) in boxes {
        push_box(&mut out, b.frame, i64::from(b.id), &b.bbox);
        let _ = writeln!(out, ",1,1,{vis}");
    }
    write_text(path.as_ref(), &out)
}

/// Result boxes sorted by `(frame, id)`.
pub fn result_boxes(result: &TrackResult) -> Vec<(TrackBox, f64)> {
    let mut rows: Vec<(TrackBox, f64)> = result
        .trajectories
        .iter()
        .flat_map(|(&id, dets)| {
            dets.iter()
                .map(move |d| (TrackBox::new(d.frame, id, d.bbox), d.confidence))
        })
        .collect();
    rows.sort_by_key(|(b, _)| (b.frame, b.id));
    rows
}

pub fn write_result(path: impl AsRef<Path>, result: &TrackResult) -> Result<()> {
    let mut out = String::new();
    for (b, conf) in result_boxes(result) {
        push_box(&mut out, b.frame, i64::from(b.id), &b.bbox);
        let _ = writeln!(out, ",{conf},-1,-1,-1");
    }
    write_text(path.as_ref(), &out)
}

impl MotRecord {
    pub fn track_box(&self) -> Option<TrackBox> {
        u32::try_from(self.id)
            .ok()
            .map(|id| TrackBox::new(self.frame, id, self.bbox))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positional_parse() {
        let recs = parse_mot("1,2,100,200,50,120,1,1,1.0\n", Path::new("x"), MotMode::Gt).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!((r.frame, r.id), (1, 2));
        assert_eq!(r.bbox, BBox::new(100.0, 200.0, 50.0, 120.0));
        assert_eq!(r.visibility, 1.0);
        assert!(parse_mot("", Path::new("x"), MotMode::Gt)
            .unwrap()
            .is_empty());
        let trailing = parse_mot(
            "3,4,1,2,3,4,0.5,-1,-1,-1,7,8,9\n",
            Path::new("x"),
            MotMode::Any,
        )
        .unwrap();
        assert_eq!(trailing[0].conf, 0.5);
    }

    #[test]
    fn gt_rejects_zero_width() {
        let err = parse_mot(
            "1,2,100,200,50,120,1,1,1\n1,2,100,200,0,120,1,1,1\n",
            Path::new("gt.txt"),
            MotMode::Gt,
        );
        assert!(matches!(err, Err(Error::Parse { line: 2, .. })));
        assert!(parse_mot("1,2,100,200,0,120\n", Path::new("r"), MotMode::Any).is_ok());
        assert!(matches!(
            parse_mot("1,2,3\n", Path::new("r"), MotMode::Any),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(parse_mot("0,2,1,1,1,1\n", Path::new("r"), MotMode::Any).is_err());
    }
}
