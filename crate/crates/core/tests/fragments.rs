use bnforge_core::dsl::parse_kb;
use bnforge_core::fragments::{
    build_model, compile, compose, resolve_class, Binding, ClassHierarchy, Fragment, FragmentError, VarRef,
};
use bnforge_core::inference::brute_force_posterior;
use bnforge_core::{posterior, CptSpec, Evidence};

fn fragments(text: &str) -> Vec<Fragment> {
    parse_kb(text).unwrap().fragments
}

fn no_classes() -> ClassHierarchy {
    ClassHierarchy::default()
}

#[test]
fn two_homes_for_one_variable_conflict() {
    let fs = fragments(
        "fragment F1 { var A states {t, f} prior (0.5, 0.5) }
         fragment F2 { var A states {t, f} prior (0.1, 0.9) }",
    );
    let err = compose(fs, &Binding::new(), &no_classes()).unwrap_err();
    assert_eq!(err, FragmentError::HomeConflict { variable: "A".into(), first: "F1".into(), second: "F2".into() });
}

#[test]
fn bound_state_spaces_must_match() {
    let fs = fragments(
        "fragment Src { var Threat states {hi, lo} prior (0.5, 0.5) }
         fragment Dst { input T states {t, f} var B states {t, f} given T cpt { (0.9, 0.1) (0.1, 0.9) } }",
    );
    let binding = Binding::new().connect(VarRef::new("Dst", "T"), VarRef::new("Src", "Threat"));
    let err = compose(fs, &binding, &no_classes()).unwrap_err();
    assert!(matches!(err, FragmentError::InterfaceMismatch { .. }), "{err:?}");
}

#[test]
fn cycles_through_bindings_are_rejected() {
    let fs = fragments(
        "fragment F1 { input X states {t, f} var A states {t, f} given X cpt { (0.9, 0.1) (0.1, 0.9) } }
         fragment F2 { input Z states {t, f} var Y states {t, f} given Z cpt { (0.8, 0.2) (0.3, 0.7) } }",
    );
    let binding = Binding::new()
        .connect(VarRef::new("F1", "X"), VarRef::new("F2", "Y"))
        .connect(VarRef::new("F2", "Z"), VarRef::new("F1", "A"));
    let err = compose(fs, &binding, &no_classes()).unwrap_err();
    match err {
        FragmentError::CrossCycle(path) => {
            assert_eq!(path.len(), 2);
            assert!(path.contains(&"A".to_string()) && path.contains(&"Y".to_string()));
        }
        other => panic!("expected a cycle, got {other:?}"),
    }
}

#[test]
fn inputs_need_a_binding_or_a_prior() {
    let fs =
        fragments("fragment F { input X states {t, f} var A states {t, f} given X cpt { (0.9, 0.1) (0.1, 0.9) } }");
    let err = compose(fs, &Binding::new(), &no_classes()).unwrap_err();
    assert_eq!(err, FragmentError::UnboundInput(VarRef::new("F", "X")));
}

const DEMO4: &str = "
fragment Threat { var T states {hi, lo} prior (0.3, 0.7) }
fragment Activity {
  input Th states {hi, lo}
  var Act states {t, f} given Th cpt { (0.8, 0.2) (0.1, 0.9) }
}
fragment Sensor {
  input A states {t, f}
  var Obs states {t, f} given A noisyor { links (0.9) leak 0.05 }
}
fragment Report {
  input O states {t, f}
  input Th2 states {hi, lo}
  var Alarm states {t, f} given O, Th2 cpt { (0.95, 0.05) (0.7, 0.3) (0.2, 0.8) (0.01, 0.99) }
}
";

fn demo_binding() -> Binding {
    Binding::new()
        .connect(VarRef::new("Activity", "Th"), VarRef::new("Threat", "T"))
        .connect(VarRef::new("Sensor", "A"), VarRef::new("Activity", "Act"))
        .connect(VarRef::new("Report", "O"), VarRef::new("Sensor", "Obs"))
        .connect(VarRef::new("Report", "Th2"), VarRef::new("Threat", "T"))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn composition_ignores_fragment_order() {
    let fs = fragments(DEMO4);
    let reference = compile(&compose(fs.clone(), &demo_binding(), &no_classes()).unwrap(), &no_classes()).unwrap();
    let perms = permutations(fs.len());
    assert_eq!(perms.len(), 24);
    for p in perms {
        let shuffled: Vec<Fragment> = p.iter().map(|&i| fs[i].clone()).collect();
        let composed = compose(shuffled, &demo_binding(), &no_classes()).unwrap();
        let net = compile(&composed, &no_classes()).unwrap();
        assert_eq!(net, reference, "order {p:?}");
        assert_eq!(net.content_hash(), reference.content_hash());
    }
    let names: Vec<&str> = reference.variables().iter().map(|v| v.name.as_str()).collect();
    assert_eq!(names, ["T", "Act", "Obs", "Alarm"]);
}

const STUBBED: &str = "
fragment Threat { var T states {hi, lo} prior (0.3, 0.7) }
stub LossStub {
  input Th states {hi, lo}
  var Loss states {t, f} given Th cpt { (0.5, 0.5) (0.5, 0.5) }
}
fragment LossFull {
  input Th states {hi, lo}
  var Engaged states {y, n, maybe} given Th cpt { (0.6, 0.3, 0.1) (0.1, 0.7, 0.2) }
  var Loss states {t, f} given Engaged cpt { (0.7, 0.3) (0.05, 0.95) (0.3, 0.7) }
}
fragment Assess {
  input L states {t, f}
  input Th2 states {hi, lo}
  var Readiness states {low, mid, high} given L, Th2 cpt {
    (0.7, 0.2, 0.1)
    (0.5, 0.3, 0.2)
    (0.2, 0.3, 0.5)
    (0.05, 0.25, 0.7)
  }
}
model stubbed {
  fragments Threat, LossStub, Assess
  bind LossStub.Th = Threat.T
  bind Assess.L = LossStub.Loss
  bind Assess.Th2 = Threat.T
}
model full {
  fragments Threat, LossStub, Assess
  bind LossStub.Th = Threat.T
  bind Assess.L = LossStub.Loss
  bind Assess.Th2 = Threat.T
  replace LossStub with LossFull
}
";

#[test]
fn stub_with_oracle_boundary_is_transparent() {
    let mut kb = parse_kb(STUBBED).unwrap();
    let full = build_model(&kb, Some("full")).unwrap().network;
    // P(Loss | T) of the full sub-model, by enumeration.
    let rows: Vec<Vec<f64>> = ["hi", "lo"]
        .iter()
        .map(|t| {
            brute_force_posterior(&full, &Evidence::new().with("T", *t), &["Loss"]).unwrap()["Loss"]
                .probabilities
                .clone()
        })
        .collect();
    let stub = kb.fragments.iter_mut().find(|f| f.name == "LossStub").unwrap();
    stub.residents[0].cpt = Some(CptSpec::Explicit { rows });
    let stubbed = build_model(&kb, Some("stubbed")).unwrap().network;
    assert!(stubbed.find("Engaged").is_none());

    let evidence_sets = [
        Evidence::new(),
        Evidence::new().with("T", "hi"),
        Evidence::new().with("Readiness", "low"),
        Evidence::new().with("Readiness", "high").with("T", "lo"),
    ];
    for ev in &evidence_sets {
        let a = posterior(&stubbed, ev, &["T", "Readiness"]).unwrap();
        let b = posterior(&full, ev, &["T", "Readiness"]).unwrap();
        for v in ["T", "Readiness"] {
            for (x, y) in a[v].probabilities.iter().zip(&b[v].probabilities) {
                assert!((x - y).abs() < 1e-9, "{v} under {ev:?}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn replacement_must_match_the_stub_interface() {
    let text = STUBBED.replace(
        "var Loss states {t, f} given Engaged cpt { (0.7, 0.3) (0.05, 0.95) (0.3, 0.7) }",
        "var Loss states {yes, no} given Engaged cpt { (0.7, 0.3) (0.05, 0.95) (0.3, 0.7) }",
    );
    let kb = parse_kb(&text).unwrap();
    assert!(matches!(build_model(&kb, Some("full")), Err(FragmentError::StubInterface(_))));
    assert!(matches!(
        build_model(&parse_kb(&STUBBED.replace("replace LossStub", "replace Threat")).unwrap(), Some("full")),
        Err(FragmentError::NotAStub(_))
    ));
}

const CLASSES: &str = "
class Distance {
  states ordered {near, mid, far}
  description \"distance between two objects\"
  prior (0.2, 0.3, 0.5)
}
class DistanceToTarget : Distance {
  constraint P(self = near | class Distance) nondecreasing
}
class Range : Distance {
}
fragment Geo {
  var R : Range
  var D : DistanceToTarget given R cpt {
    (0.8, 0.15, 0.05)
    (0.5, 0.3, 0.2)
    (0.1, 0.3, 0.6)
  }
}
";

#[test]
fn classes_supply_states_priors_and_constraints() {
    let kb = parse_kb(CLASSES).unwrap();
    let hierarchy = ClassHierarchy::new(kb.classes.clone()).unwrap();
    let resolved = resolve_class("DistanceToTarget", &hierarchy).unwrap();
    assert_eq!(resolved.states.as_ref().unwrap().supplier, "Distance");
    assert_eq!(resolved.constraints.as_ref().unwrap().supplier, "DistanceToTarget");

    let built = build_model(&kb, None).unwrap();
    let r = built.network.find("R").unwrap();
    assert_eq!(r.states.states(), ["near", "mid", "far"]);
    assert_eq!(built.network.cpt(built.network.index_of("R").unwrap()), [vec![0.2, 0.3, 0.5]]);
    assert_eq!(r.description, "distance between two objects");
    // P(D = near | R) must not fall as R moves from near to far, and it does.
    assert_eq!(built.constraints.len(), 1);
    let report = bnforge_core::check_constraints(&built.network, &built.constraints).unwrap();
    assert_eq!(report.violations.len(), 2);
}

#[test]
fn missing_features_are_reported() {
    let kb = parse_kb("class Bare { }\nfragment F { var A : Bare }").unwrap();
    let err = build_model(&kb, None).unwrap_err();
    assert_eq!(err, FragmentError::MissingFeature { variable: "A".into(), feature: "state space" });
}

#[test]
fn class_cycles_are_detected() {
    let kb = parse_kb("class A : B { }\nclass B : A { }\nfragment F { var X : A }").unwrap();
    assert!(matches!(build_model(&kb, None), Err(FragmentError::ClassCycle(_))));
}
