//! Language annotations, stored as TOML:
//!
//! ```toml
//! schema_version = 1
//!
//! [scene]
//! camera = "static"
//! viewpoint = "medium"
//! condition = "on a sunny day"
//!
//! [[instance]]
//! track_id = 1
//! gender = "male"
//! shirt_color = "red"
//! pant_color = "black"
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_text, write_text};
use crate::error::{Error, Result};

pub const ANNOTATION_SCHEMA_VERSION: u32 = 1;

const VIEWPOINTS: [&str; 3] = ["low", "medium", "high"];
const CAMERAS: [&str; 2] = ["static", "moving"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneAttributes {
    pub camera: String,
    pub viewpoint: String,
    /// Free text such as "on a sunny day" or "at night".
    pub condition: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceAttributes {
    pub gender: String,
    pub shirt_color: String,
    pub pant_color: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotationSet {
    pub scene: SceneAttributes,
    pub instances: BTreeMap<u32, InstanceAttributes>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceRecord {
    track_id: u32,
    #[serde(flatten)]
    attributes: InstanceAttributes,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationFile {
    schema_version: u32,
    scene: SceneAttributes,
    #[serde(default)]
    instance: Vec<InstanceRecord>,
}

fn missing(what: &str) -> Error {
    Error::Validation(format!("missing attribute {what}"))
}

/// `A {gender} person wearing a {shirt_color} shirt and {pant_color} pants`.
pub fn compose_instance_description(attrs: &InstanceAttributes) -> Result<String> {
    for (name, v) in [
        ("gender", &attrs.gender),
        ("shirt_color", &attrs.shirt_color),
        ("pant_color", &attrs.pant_color),
    ] {
        if v.trim().is_empty() {
            return Err(missing(name));
        }
    }
    Ok(format!(
        "A {} person wearing a {} shirt and {} pants",
        attrs.gender, attrs.shirt_color, attrs.pant_color
    ))
}

/// `A scene captured by a {camera} camera from a {viewpoint} viewpoint {condition}`.
pub fn compose_scene_description(attrs: &SceneAttributes) -> Result<String> {
    for (name, v) in [
        ("camera", &attrs.camera),
        ("viewpoint", &attrs.viewpoint),
        ("condition", &attrs.condition),
    ] {
        if v.trim().is_empty() {
            return Err(missing(name));
        }
    }
    Ok(format!(
        "A scene captured by a {} camera from a {} viewpoint {}",
        attrs.camera, attrs.viewpoint, attrs.condition
    ))
}

impl AnnotationSet {
    pub fn validate(&self) -> Result<()> {
        if !CAMERAS.contains(&self.scene.camera.as_str()) {
            return Err(Error::Validation(format!(
                "camera must be one of {CAMERAS:?}, got {:?}",
                self.scene.camera
            )));
        }
        if !VIEWPOINTS.contains(&self.scene.viewpoint.as_str()) {
            return Err(Error::Validation(format!(
                "viewpoint must be one of {VIEWPOINTS:?}, got {:?}",
                self.scene.viewpoint
            )));
        }
        compose_scene_description(&self.scene)?;
        for (id, attrs) in &self.instances {
            compose_instance_description(attrs)
                .map_err(|e| Error::Validation(format!("track {id}: {e}")))?;
        }
        Ok(())
    }

    pub fn scene_description(&self) -> Result<String> {
        compose_scene_description(&self.scene)
    }

    pub fn instance_description(&self, track_id: u32) -> Result<String> {
        let attrs = self.instances.get(&track_id).ok_or_else(|| {
            Error::Validation(format!("no instance annotation for track {track_id}"))
        })?;
        compose_instance_description(attrs)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let file: AnnotationFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        if file.schema_version != ANNOTATION_SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "{}: unsupported annotation schema_version {}",
                path.display(),
                file.schema_version
            )));
        }
        let mut instances = BTreeMap::new();
        for rec in file.instance {
            if instances.insert(rec.track_id, rec.attributes).is_some() {
                return Err(Error::Validation(format!(
                    "{}: duplicate track_id {}",
                    path.display(),
                    rec.track_id
                )));
            }
        }
        let set = Self {
            scene: file.scene,
            instances,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn to_toml(&self) -> String {
        let file = AnnotationFile {
            schema_version: ANNOTATION_SCHEMA_VERSION,
            scene: self.scene.clone(),
            instance: self
                .instances
                .iter()
                .map(|(&track_id, a)| InstanceRecord {
                    track_id,
                    attributes: a.clone(),
                })
                .collect(),
        };
        toml::to_string(&file).expect("annotation set serialises")
    }
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<AnnotationSet> {
    let path = path.as_ref();
    AnnotationSet::parse(&read_text(path)?, path)
}

pub fn write_annotations(path: impl AsRef<Path>, set: &AnnotationSet) -> Result<()> {
    set.validate()?;
    write_text(path.as_ref(), &set.to_toml())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(g: &str, s: &str, p: &str) -> InstanceAttributes {
        InstanceAttributes {
            gender: g.into(),
            shirt_color: s.into(),
            pant_color: p.into(),
        }
    }

    #[test]
    fn instance_template() {
        assert_eq!(
            compose_instance_description(&inst("male", "red", "black")).unwrap(),
            "A male person wearing a red shirt and black pants"
        );
        assert_eq!(
            compose_instance_description(&inst("female", "blue", "white")).unwrap(),
            "A female person wearing a blue shirt and white pants"
        );
        assert!(compose_instance_description(&inst("male", "", "black")).is_err());
    }

    #[test]
    fn scene_template() {
        let s = |c: &str, v: &str, cond: &str| SceneAttributes {
            camera: c.into(),
            viewpoint: v.into(),
            condition: cond.into(),
        };
        assert_eq!(
            compose_scene_description(&s("static", "medium", "on a sunny day")).unwrap(),
            "A scene captured by a static camera from a medium viewpoint on a sunny day"
        );
        assert_eq!(
            compose_scene_description(&s("moving", "low", "at night")).unwrap(),
            "A scene captured by a moving camera from a low viewpoint at night"
        );
        assert!(compose_scene_description(&s("moving", "low", "")).is_err());
    }

    const SAMPLE: &str = r#"
schema_version = 1
[scene]
camera = "static"
viewpoint = "high"
condition = "indoors"
[[instance]]
track_id = 1
gender = "male"
shirt_color = "red"
pant_color = "black"
[[instance]]
track_id = 2
gender = "female"
shirt_color = "green"
pant_color = "blue"
"#;

    #[test]
    fn parse_and_round_trip() {
        let set = AnnotationSet::parse(SAMPLE, Path::new("a.toml")).unwrap();
        assert_eq!(set.instances.len(), 2);
        let again = AnnotationSet::parse(&set.to_toml(), Path::new("b.toml")).unwrap();
        assert_eq!(again, set);
    }

    #[test]
    fn rejects_bad_files() {
        let dup = SAMPLE.replace("track_id = 2", "track_id = 1");
        assert!(matches!(
            AnnotationSet::parse(&dup, Path::new("a")),
            Err(Error::Validation(_))
        ));
        let bad_view = SAMPLE.replace("\"high\"", "\"sideways\"");
        assert!(AnnotationSet::parse(&bad_view, Path::new("a")).is_err());
        let unknown = SAMPLE.replace("[scene]", "[scene]\nweather = \"rain\"");
        assert!(AnnotationSet::parse(&unknown, Path::new("a")).is_err());
        let version = SAMPLE.replace("schema_version = 1", "schema_version = 9");
        assert!(AnnotationSet::parse(&version, Path::new("a")).is_err());
    }
}
