use std::collections::BTreeMap;
use std::path::Path;

use langtrack::graph::{BBox, Detection};
use langtrack::inference::TrackResult;
use langtrack::io::*;
use langtrack::synth::{build_store, vocabulary_descriptions};
use langtrack::Error;
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    -1e4f64..1e4
}

fn size() -> impl Strategy<Value = f64> {
    1e-3f64..1e3
}

fn result_strategy() -> impl Strategy<Value = TrackResult> {
    prop::collection::btree_map(
        0u32..50,
        prop::collection::btree_map(
            1u32..40,
            (coord(), coord(), size(), size(), 0.0f64..1.0),
            1..6,
        ),
        0..6,
    )
    .prop_map(|tracks| {
        let mut trajectories = BTreeMap::new();
        let mut ids = Vec::new();
        for (id, boxes) in tracks {
            let dets: Vec<Detection> = boxes
                .into_iter()
                .map(|(frame, (l, t, w, h, c))| {
                    let mut d = Detection::new(frame, BBox::new(l, t, w, h), Vec::new()).unwrap();
                    d.confidence = c;
                    d
                })
                .collect();
            ids.extend(std::iter::repeat_n(id, dets.len()));
            trajectories.insert(id, dets);
        }
        TrackResult { ids, trajectories }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn results_round_trip(result in result_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("res.txt");
        write_result(&path, &result).unwrap();
        let back = read_mot(&path, MotMode::Gt).unwrap();
        let want = result_boxes(&result);
        prop_assert_eq!(back.len(), want.len());
        for (r, (b, conf)) in back.iter().zip(&want) {
            prop_assert_eq!(r.track_box().unwrap(), *b);
            prop_assert_eq!(r.conf, *conf);
        }
        let keys: Vec<_> = back.iter().map(|r| (r.frame, r.id)).collect();
        prop_assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn detections_round_trip(
        rows in prop::collection::vec((1u32..100, prop::option::of(0u32..1000), coord(), coord(), size(), size()), 0..20),
        dim in 0usize..5,
        values in prop::collection::vec(-1e6f64..1e6, 100),
    ) {
        let dets: Vec<Detection> = rows
            .iter()
            .enumerate()
            .map(|(i, &(frame, id, l, t, w, h))| Detection {
                frame,
                bbox: BBox::new(l, t, w, h),
                appearance: values[i * dim % 80..][..dim].to_vec(),
                confidence: 1.0,
                visibility: -1.0,
                gt_id: id,
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("det.txt");
        write_detections(&path, &dets).unwrap();
        prop_assert_eq!(read_detections(&path).unwrap(), dets);
    }

    #[test]
    fn annotations_round_trip(
        camera in 0usize..2,
        viewpoint in 0usize..3,
        condition in "[a-z ]{1,20}",
        instances in prop::collection::btree_map(0u32..100, (0usize..2, 0usize..6, 0usize..6), 0..8),
    ) {
        const COLORS: [&str; 6] = ["red", "blue", "green", "black", "white", "yellow"];
        prop_assume!(!condition.trim().is_empty());
        let set = AnnotationSet {
            scene: SceneAttributes {
                camera: ["static", "moving"][camera].into(),
                viewpoint: ["low", "medium", "high"][viewpoint].into(),
                condition,
            },
            instances: instances
                .into_iter()
                .map(|(id, (g, s, p))| {
                    (id, InstanceAttributes {
                        gender: ["male", "female"][g].into(),
                        shirt_color: COLORS[s].into(),
                        pant_color: COLORS[p].into(),
                    })
                })
                .collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.toml");
        write_annotations(&path, &set).unwrap();
        prop_assert_eq!(read_annotations(&path).unwrap(), set);
    }
}

#[test]
fn fixture_round_trip() {
    let store = build_store(&vocabulary_descriptions(), 16, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fixture.jsonl");
    write_embedding_fixture(&path, &store).unwrap();
    let back = read_embedding_fixture(&path).unwrap();
    assert_eq!(back.len(), store.len());
    for ((a, x), (b, y)) in store.iter().zip(back.iter()) {
        assert_eq!(a, b);
        assert_eq!(x, y);
    }
}

#[test]
fn fixture_with_mixed_dims_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    let text = format!(
        "{{\"format\":\"{FIXTURE_FORMAT}\",\"version\":{FIXTURE_VERSION},\"dim\":512}}\n\
         {{\"description\":\"a\",\"vector\":{:?}}}\n{{\"description\":\"b\",\"vector\":{:?}}}\n",
        vec![0.5; 512],
        vec![0.5; 256]
    );
    std::fs::write(&path, text).unwrap();
    assert!(matches!(
        read_embedding_fixture(&path),
        Err(Error::Validation(_))
    ));
}

#[test]
fn mot_parsing() {
    let p = Path::new("gt.txt");
    let recs = parse_mot("1,2,100,200,50,120,1,1,1.0\n", p, MotMode::Gt).unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!((recs[0].frame, recs[0].id), (1, 2));
    assert_eq!(recs[0].bbox, BBox::new(100.0, 200.0, 50.0, 120.0));
    assert_eq!(recs[0].visibility, 1.0);
    assert!(parse_mot("", p, MotMode::Gt).unwrap().is_empty());
    match parse_mot("1,1,0,0,5,5\n1,2,100,200,0,120,1,1,1\n", p, MotMode::Gt) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected a parse error, got {other:?}"),
    }
    assert_eq!(
        parse_mot("1,2,100,200,0,120,1,1,1", p, MotMode::Any)
            .unwrap()
            .len(),
        1
    );
}

#[test]
fn result_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("res.txt");
    write_result(
        &path,
        &TrackResult {
            ids: Vec::new(),
            trajectories: BTreeMap::new(),
        },
    )
    .unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "");

    let d = |f| Detection::new(f, BBox::new(1.0, 2.0, 3.0, 4.0), Vec::new()).unwrap();
    let result = TrackResult {
        ids: vec![5, 5, 2, 2],
        trajectories: BTreeMap::from([(5, vec![d(1), d(2)]), (2, vec![d(2), d(3)])]),
    };
    write_result(&path, &result).unwrap();
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        "1,5,1,2,3,4,1,-1,-1,-1\n2,2,1,2,3,4,1,-1,-1,-1\n2,5,1,2,3,4,1,-1,-1,-1\n3,2,1,2,3,4,1,-1,-1,-1\n"
    );
}

#[test]
fn descriptions() {
    let inst = |g: &str, s: &str, p: &str| InstanceAttributes {
        gender: g.into(),
        shirt_color: s.into(),
        pant_color: p.into(),
    };
    assert_eq!(
        compose_instance_description(&inst("male", "red", "black")).unwrap(),
        "A male person wearing a red shirt and black pants"
    );
    assert!(compose_instance_description(&inst("male", "", "black")).is_err());
    let scene = SceneAttributes {
        camera: "static".into(),
        viewpoint: "medium".into(),
        condition: "on a sunny day".into(),
    };
    assert_eq!(
        compose_scene_description(&scene).unwrap(),
        "A scene captured by a static camera from a medium viewpoint on a sunny day"
    );
    assert!(compose_scene_description(&SceneAttributes {
        condition: String::new(),
        ..scene
    })
    .is_err());
}

#[test]
fn duplicate_track_ids_are_rejected() {
    let text = "schema_version = 1\n[scene]\ncamera = \"static\"\nviewpoint = \"low\"\ncondition = \"at night\"\n\
                [[instance]]\ntrack_id = 1\ngender = \"male\"\nshirt_color = \"red\"\npant_color = \"black\"\n\
                [[instance]]\ntrack_id = 1\ngender = \"female\"\nshirt_color = \"blue\"\npant_color = \"white\"\n";
    assert!(AnnotationSet::parse(text, Path::new("a.toml")).is_err());
    let ok = text.replacen(
        "track_id = 1\ngender = \"female\"",
        "track_id = 2\ngender = \"female\"",
        1,
    );
    assert_eq!(
        AnnotationSet::parse(&ok, Path::new("a.toml"))
            .unwrap()
            .instances
            .len(),
        2
    );
}
