use bnforge_core::dsl::parse_kb;
use bnforge_core::versioning::{apply_diff, content_id, diff_kb, Change, Target};

const V1: &str = "
fragment Activity {
  input Threat states {hi, lo} prior (0.35, 0.65)
  var Active states {t, f} given Threat cpt {
    (0.9, 0.1)
    (0.2, 0.8)
  }
}
";

#[test]
fn ids_ignore_formatting() {
    let a = parse_kb(V1).unwrap();
    let b = parse_kb(&V1.replace("\n  ", "\n        ").replace(", ", ",")).unwrap();
    assert_eq!(content_id(&a), content_id(&b));
    assert_eq!(content_id(&a).len(), 64);
    assert!(diff_kb(&a, &b).is_empty());
}

#[test]
fn row_changes_cite_the_parent_configuration() {
    let a = parse_kb(V1).unwrap();
    let b = parse_kb(&V1.replace("(0.2, 0.8)\n", "(0.25, 0.75)\n")).unwrap();
    let d = diff_kb(&a, &b);
    assert_eq!(d.entries.len(), 1);
    let e = &d.entries[0];
    assert_eq!(
        e.target,
        Target::Row {
            fragment: "Activity".into(),
            var: "Active".into(),
            row: 1,
            configuration: vec![("Threat".into(), "lo".into())],
        }
    );
    assert_eq!(e.to_string(), "~ fragment Activity / var Active / row 1 (Threat=lo): (0.2, 0.8) => (0.25, 0.75)");
    assert_eq!(apply_diff(&a, &d).unwrap(), b);
}

#[test]
fn arcs_and_items_are_reported_separately() {
    let a = parse_kb(V1).unwrap();
    let text = V1.replace("given Threat cpt {\n    (0.9, 0.1)\n    (0.2, 0.8)\n  }", "prior (0.5, 0.5)")
        + "fragment Extra {\n  var X states {t, f} prior (0.5, 0.5)\n}\n";
    let b = parse_kb(&text).unwrap();
    let d = diff_kb(&a, &b);
    let shown: Vec<String> = d.entries.iter().map(|e| e.to_string()).collect();
    assert!(shown.iter().any(|s| s.starts_with("- fragment Activity / arc Threat -> Active")), "{shown:#?}");
    assert!(shown.iter().any(|s| s.starts_with("~ fragment Activity / var Active / cpt")), "{shown:#?}");
    assert!(shown.iter().any(|s| s.starts_with("+ fragment Extra:")), "{shown:#?}");
    assert!(matches!(d.entries.last().unwrap().change, Change::Added { .. }));
    assert_eq!(apply_diff(&a, &d).unwrap(), b);
    assert_ne!(content_id(&a), content_id(&b));
}

#[test]
fn renames_are_a_removal_and_an_addition() {
    let a = parse_kb(V1).unwrap();
    let b = parse_kb(&V1.replace("Activity", "Behaviour")).unwrap();
    let d = diff_kb(&a, &b);
    assert_eq!(d.entries.len(), 2);
    assert!(matches!(d.entries[0].change, Change::Removed { .. }));
    assert!(matches!(d.entries[1].change, Change::Added { .. }));
}
