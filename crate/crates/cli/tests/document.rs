use koenigs::generate::{lightcone_net, moutard_net, rng_from_seed, LightconeParams, MoutardParams};
use koenigs::{QNet, Tolerances};
use koenigs_cli::{export_obj, obj_string, DocError, NetDocument};
use proptest::prelude::*;

fn moutard_doc() -> NetDocument {
    let mut rng = rng_from_seed(1);
    let g = moutard_net(&mut rng, &MoutardParams::new(vec![4, 5]), &Tolerances::default()).unwrap();
    NetDocument::from_net(&g.net).with_nu(&g.nu).with_moutard(&g.moutard)
}

#[test]
fn canonical_text_survives_a_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    let doc = moutard_doc();
    doc.save(&path).unwrap();
    let first = std::fs::read_to_string(&path).unwrap();
    let back = NetDocument::load(&path).unwrap();
    assert_eq!(back, doc);
    back.save(&path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), first);
}

#[test]
fn decorated_lightcone_document_round_trips() {
    let mut rng = rng_from_seed(2);
    let ev = lightcone_net(&mut rng, &LightconeParams::new(vec![3, 3, 3]), &Tolerances::default()).unwrap();
    let doc = NetDocument::from_net(&ev.iso.net)
        .with_s(&ev.iso.metric)
        .with_labels(&ev.iso.labels)
        .with_moutard(&ev.y);
    let text = doc.to_canonical_string().unwrap();
    let back = NetDocument::parse(&text).unwrap();
    assert_eq!(back, doc);
    assert_eq!(back.net().unwrap(), ev.iso.net);
    assert_eq!(back.labels().unwrap().unwrap(), ev.iso.labels);
    let y = back.moutard_net().unwrap().unwrap();
    assert_eq!(y.points(), ev.y.points());
}

#[test]
fn truncated_file_is_a_parse_error() {
    let text = moutard_doc().to_canonical_string().unwrap();
    let cut = &text[..text.len() / 2];
    match NetDocument::parse(cut) {
        Err(DocError::Parse { line, .. }) => assert!(line > 1),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn wrong_field_type_names_the_field() {
    let text = moutard_doc().to_canonical_string().unwrap().replacen("\"ambient_dim\": 3", "\"ambient_dim\": \"3\"", 1);
    match NetDocument::parse(&text) {
        Err(DocError::Parse { line, message, .. }) => {
            assert_eq!(line, 5);
            assert!(message.contains("invalid type"), "{message}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn vertex_count_must_match_extents() {
    let text = moutard_doc().to_canonical_string().unwrap().replacen("\"extents\": [4, 5]", "\"extents\": [4, 4]", 1);
    assert!(matches!(NetDocument::parse(&text), Err(DocError::SchemaMismatch(_))));
}

#[test]
fn schema_version_and_m_are_checked() {
    let text = moutard_doc().to_canonical_string().unwrap();
    let v2 = text.replacen("\"schema_version\": 1", "\"schema_version\": 2", 1);
    assert!(matches!(NetDocument::parse(&v2), Err(DocError::SchemaMismatch(_))));
    let m3 = text.replacen("\"m\": 2", "\"m\": 3", 1);
    assert!(matches!(NetDocument::parse(&m3), Err(DocError::SchemaMismatch(_))));
    let short_nu = r#"{"schema_version": 1, "m": 2, "extents": [2, 2], "ambient_dim": 2,
        "vertices": [0, 0, 1, 0, 0, 1, 1, 1], "nu": [1, 1, 1]}"#;
    assert!(matches!(NetDocument::parse(short_nu), Err(DocError::SchemaMismatch(_))));
    let unknown = r#"{"schema_version": 1, "m": 2, "extents": [2, 2], "ambient_dim": 2,
        "vertices": [0, 0, 1, 0, 0, 1, 1, 1], "colour": 1}"#;
    assert!(matches!(NetDocument::parse(unknown), Err(DocError::Parse { .. })));
}

#[test]
fn non_finite_values_are_not_written() {
    let mut doc = moutard_doc();
    doc.nu.as_mut().unwrap()[3] = f64::NAN;
    assert!(matches!(doc.to_canonical_string(), Err(DocError::NonFinite("nu"))));
}

#[test]
fn obj_of_a_single_quad() {
    let doc = NetDocument::from_net(&QNet::grid(vec![2, 2], 2).unwrap());
    let text = obj_string(&doc).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.iter().filter(|l| l.starts_with("v ")).count(), 4);
    assert_eq!(lines.iter().copied().filter(|l| l.starts_with("f ")).collect::<Vec<_>>(), ["f 1 3 4 2"]);
    // planar input is padded with z = 0
    assert!(lines[3].starts_with("v 1.0000000000000000e0 1.0000000000000000e0 0.0000000000000000e0"));
}

#[test]
fn obj_of_a_three_by_three_net() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.obj");
    let doc = NetDocument::from_net(&QNet::grid(vec![3, 3], 3).unwrap());
    export_obj(&doc, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 9);
    let faces: Vec<&str> = text.lines().filter(|l| l.starts_with("f ")).collect();
    assert_eq!(faces, ["f 1 4 5 2", "f 2 5 6 3", "f 4 7 8 5", "f 5 8 9 6"]);
    assert_eq!(obj_string(&doc).unwrap(), text);
}

#[test]
fn obj_rejects_other_dimensions() {
    let cube = NetDocument::from_net(&QNet::grid(vec![2, 2, 2], 3).unwrap());
    assert!(matches!(obj_string(&cube), Err(DocError::UnsupportedDimension { m: 3, .. })));
    let high = NetDocument::from_net(&QNet::grid(vec![2, 2], 4).unwrap());
    assert!(matches!(obj_string(&high), Err(DocError::UnsupportedDimension { ambient_dim: 4, .. })));
}

proptest! {
    #[test]
    fn any_finite_document_round_trips(
        n1 in 2usize..5,
        n2 in 2usize..5,
        dim in 1usize..5,
        seed in any::<u64>(),
        scale in prop::sample::select(vec![1e-300, 1e-8, 1.0, 1e8, 1e300]),
    ) {
        use rand::Rng;
        let mut rng = rng_from_seed(seed);
        let n = n1 * n2;
        let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.random_range(-1.0..1.0) * scale).collect() };
        let doc = NetDocument {
            extents: vec![n1, n2],
            ambient_dim: dim,
            vertices: draw(n * dim),
            nu: Some(draw(n)),
            s: None,
            labels: Some(vec![draw(n1 - 1), draw(n2 - 1)]),
            moutard: None,
        };
        let text = doc.to_canonical_string().unwrap();
        let back = NetDocument::parse(&text).unwrap();
        prop_assert_eq!(&back, &doc);
        prop_assert_eq!(back.to_canonical_string().unwrap(), text);
    }
}
