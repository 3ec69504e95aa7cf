//! File formats: MOTChallenge text files, language annotations and
//! embedding fixtures.

mod annotations;
mod fixture;
mod mot;

pub use annotations::{
    compose_instance_description, compose_scene_description, read_annotations, write_annotations,
    AnnotationSet, InstanceAttributes, SceneAttributes, ANNOTATION_SCHEMA_VERSION,
};
pub use fixture::{
    read_embedding_fixture, write_embedding_fixture, FIXTURE_FORMAT, FIXTURE_VERSION,
};
pub use mot::{
    detections_from_records, parse_mot, read_detections, read_mot, result_boxes, write_detections,
    write_gt, write_result, MotMode, MotRecord,
};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}
