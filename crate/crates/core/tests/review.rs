use bnforge_core::dsl::parse_kb_with_spans;
use bnforge_core::harness::{elicitation_review, ReviewFinding, Rule};
use bnforge_core::network::Severity;

const CLEAN: &str = r#"class Level {
  states ordered {low, high}
}

fragment Threat {
  var T : Level prior (0.3, 0.7)
}

fragment Act {
  input Th : Level
  var A states {t, f} given Th partition {
    when (low) because "quiet period" -> (0.2, 0.8)
    when (high) because "surge" -> (0.7, 0.3)
  }
}

model main {
  fragments Threat, Act
  bind Act.Th = Threat.T
}

constraint rising P(A = t | T) nondecreasing
"#;

fn review(text: &str) -> Vec<ReviewFinding> {
    let (kb, spans) = parse_kb_with_spans(text, "kb.bnkb").unwrap();
    elicitation_review(&kb, &spans)
}

fn of(findings: &[ReviewFinding], rule: Rule) -> Vec<&ReviewFinding> {
    findings.iter().filter(|f| f.rule == rule).collect()
}

#[test]
fn clean_kb_has_no_findings() {
    assert_eq!(review(CLEAN), vec![]);
}

#[test]
fn r1_state_space_disagreement() {
    let text = format!("{CLEAN}\nfragment Other {{\n  var A states {{yes, no}} prior (0.5, 0.5)\n}}\n");
    let f = review(&text);
    let r1 = of(&f, Rule::R1);
    assert_eq!(r1.len(), 1, "{f:#?}");
    assert_eq!(r1[0].severity, Severity::Error);
    assert_eq!(r1[0].location.line, 25);
    assert!(of(&review(CLEAN), Rule::R1).is_empty());
}

#[test]
fn r1_registry_disagreement() {
    let text = format!("define A states {{yes, no}}\n{CLEAN}");
    assert_eq!(of(&review(&text), Rule::R1).len(), 1);
    let agreeing = format!("define A states {{t, f}}\n{CLEAN}");
    assert!(of(&review(&agreeing), Rule::R1).is_empty());
}

#[test]
fn r2_rows_must_be_distributions() {
    let text = CLEAN.replace("(0.7, 0.3)", "(0.7, 0.4)");
    let f = review(&text);
    let r2 = of(&f, Rule::R2);
    assert_eq!(r2.len(), 1, "{f:#?}");
    assert!(r2[0].message.contains("partition element 1"));
    assert!(of(&review(CLEAN), Rule::R2).is_empty());
}

#[test]
fn r3_identical_rows_and_missing_rationale() {
    let text = CLEAN.replace(
        "partition {\n    when (low) because \"quiet period\" -> (0.2, 0.8)\n    when (high) because \"surge\" -> (0.7, 0.3)\n  }",
        "cpt {\n    (0.5, 0.5)\n    (0.5, 0.5)\n  }",
    );
    let f = review(&text);
    let r3 = of(&f, Rule::R3);
    assert_eq!(r3.len(), 1, "{f:#?}");
    assert_eq!(r3[0].severity, Severity::Warning);
    let bare = CLEAN.replace(" because \"surge\"", "");
    let r3 = review(&bare);
    assert_eq!(of(&r3, Rule::R3).len(), 1);
    assert_eq!(of(&r3, Rule::R3)[0].severity, Severity::Info);
    assert!(of(&review(CLEAN), Rule::R3).is_empty());
}

#[test]
fn r4_constraint_violations() {
    let text = CLEAN.replace("nondecreasing", "nonincreasing");
    let f = review(&text);
    let r4 = of(&f, Rule::R4);
    assert_eq!(r4.len(), 1, "{f:#?}");
    assert_eq!(r4[0].severity, Severity::Error);
    assert!(r4[0].message.contains("rising"));
    assert!(of(&review(CLEAN), Rule::R4).is_empty());
}

#[test]
fn r4_inherited_class_constraints() {
    let text = CLEAN
        .replace("class Level {\n", "class Level {\n  constraint P(self = low | class Level) nonincreasing\n")
        .replace("var A states {t, f} given Th", "var A : Level given Th")
        .replace("constraint rising P(A = t | T) nondecreasing\n", "");
    // A inherits from Level, so P(A = low | T) may not rise with T; it goes 0.2 -> 0.7.
    let f = review(&text);
    assert_eq!(of(&f, Rule::R4).len(), 1, "{f:#?}");
    assert!(of(&f, Rule::R4)[0].message.contains("inherited"));
}

#[test]
fn r5_dangling_references() {
    let text = CLEAN.replace("fragments Threat, Act", "fragments Threat, Act, Ghost");
    let f = review(&text);
    let r5 = of(&f, Rule::R5);
    assert_eq!(r5.len(), 1, "{f:#?}");
    assert!(r5[0].message.contains("Ghost"));
    let text = format!("{CLEAN}\nscenario s {{\n  focus Nope\n}}\n");
    assert_eq!(of(&review(&text), Rule::R5).len(), 1);
    assert!(of(&review(CLEAN), Rule::R5).is_empty());
}

#[test]
fn r6_stub_inventory() {
    let text = format!("{CLEAN}\nstub Later {{\n  var Loss states {{t, f}} prior (0.1, 0.9)\n}}\n");
    let f = review(&text);
    let r6 = of(&f, Rule::R6);
    assert_eq!(r6.len(), 1);
    assert_eq!(r6[0].severity, Severity::Info);
    assert_eq!(r6[0].message, "stub `Later` stands in for: Loss");
    assert!(of(&review(CLEAN), Rule::R6).is_empty());
}

#[test]
fn r7_unused_classes_and_cycles() {
    let text = format!("{CLEAN}\nclass Unused {{\n  states {{a, b}}\n}}\n");
    let f = review(&text);
    assert_eq!(of(&f, Rule::R7).len(), 1);
    assert_eq!(of(&f, Rule::R7)[0].severity, Severity::Warning);
    let cyclic =
        format!("{CLEAN}\nclass P : Q {{\n}}\nclass Q : P {{\n}}\nfragment Z {{\n  var Z1 : P prior (0.5, 0.5)\n}}\n");
    let f = review(&cyclic);
    assert!(of(&f, Rule::R7).iter().any(|x| x.severity == Severity::Error && x.message.contains("cycle")));
    assert!(of(&review(CLEAN), Rule::R7).is_empty());
}

#[test]
fn findings_are_ordered_and_repeatable() {
    let text = format!(
        "{}\nclass Unused {{\n  states {{a, b}}\n}}\nstub Later {{\n  var Loss states {{t, f}} prior (0.1, 0.9)\n}}\n",
        CLEAN.replace("(0.7, 0.3)", "(0.7, 0.4)").replace("nondecreasing", "nonincreasing")
    );
    let a = review(&text);
    let b = review(&text);
    assert_eq!(a, b);
    let key =
        |f: &ReviewFinding| (f.location.file.clone(), f.location.line, f.rule, f.location.column, f.message.clone());
    assert!(a.windows(2).all(|w| key(&w[0]) <= key(&w[1])));
    let rules: Vec<Rule> = a.iter().map(|f| f.rule).collect();
    assert!(rules.contains(&Rule::R2) && rules.contains(&Rule::R6) && rules.contains(&Rule::R7));
    assert!(a[0].to_string().starts_with("kb.bnkb:"));
}
