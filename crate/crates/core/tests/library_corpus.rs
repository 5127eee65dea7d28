use sable_core::analysis::analyze_source;
use sable_core::engine::EngineConfig;
use sable_core::frontend::StatementLabel;
use sable_core::library::{Library, Variant};
use sable_core::report::Report;
use sable_core::sable::{parse_program, parse_sable, pretty};

fn library() -> Library {
    Library::embedded().expect("embedded library loads")
}

#[test]
fn every_fixture_yields_its_expected_alarm_lines() {
    let lib = library();
    assert_eq!(lib.fixtures.len(), 13);
    for f in &lib.fixtures {
        let entry = lib.entry(&f.entry).unwrap();
        let a = analyze_source(
            &f.source,
            &f.qualifier,
            &f.annotation,
            &entry.program,
            EngineConfig::default(),
        )
        .unwrap_or_else(|e| panic!("{} {:?}: {e}", f.id, f.variant));
        let report = Report::new(&a, &f.annotation_path, &entry.definition_path);
        assert_eq!(
            report.lines(),
            f.alarm_lines,
            "{} {:?}\n{}",
            f.id,
            f.variant,
            report.to_text()
        );
    }
}

#[test]
fn vulnerable_snippets_raise_a_single_alarm() {
    let lib = library();
    let vulnerable: Vec<_> = lib
        .fixtures
        .iter()
        .filter(|f| f.variant == Variant::Vulnerable && f.entry != "RunningExample")
        .collect();
    assert_eq!(vulnerable.len(), 6);
    for f in vulnerable {
        let entry = lib.entry(&f.entry).unwrap();
        let a = analyze_source(
            &f.source,
            &f.qualifier,
            &f.annotation,
            &entry.program,
            EngineConfig::default(),
        )
        .unwrap();
        assert_eq!(a.outcome.ledger.len(), 1, "{}", f.id);
        assert_eq!(a.outcome.ledger.alarms().len(), 1, "{}", f.id);
    }
}

#[test]
fn end_of_procedure_alarms_sit_on_the_exit_state() {
    let lib = library();
    for (id, label) in [
        ("CVE-2017-15612", StatementLabel::ExitProcedure),
        ("CVE-2011-4030", StatementLabel::ExitContainer),
    ] {
        let f = lib
            .fixtures
            .iter()
            .find(|f| f.id == id && f.variant == Variant::Vulnerable)
            .unwrap();
        let entry = lib.entry(&f.entry).unwrap();
        let a = analyze_source(
            &f.source,
            &f.qualifier,
            &f.annotation,
            &entry.program,
            EngineConfig::default(),
        )
        .unwrap();
        let alarm = &a.outcome.ledger.alarms()[0];
        assert_eq!(a.scfg.state(alarm.state).label, label, "{id}");
    }
}

#[test]
fn known_false_positive_is_the_only_one() {
    let lib = library();
    let fps: Vec<_> = lib
        .fixtures
        .iter()
        .filter(|f| f.variant == Variant::KnownFalsePositive)
        .collect();
    assert_eq!(fps.len(), 1);
    assert_eq!(fps[0].id, "CVE-2014-1829");
    assert_eq!(fps[0].alarm_lines.len(), 1);
    assert!(fps[0].note.is_some());
    for f in lib.fixtures.iter().filter(|f| f.variant == Variant::Fixed) {
        assert!(f.alarm_lines.is_empty(), "{}", f.id);
    }
}

#[test]
fn loop_bodies_are_revisited_at_most_three_times() {
    let lib = library();
    for f in &lib.fixtures {
        let entry = lib.entry(&f.entry).unwrap();
        let a = analyze_source(
            &f.source,
            &f.qualifier,
            &f.annotation,
            &entry.program,
            EngineConfig::default(),
        )
        .unwrap();
        for ((trav, _), n) in &a.outcome.loop_entries {
            assert!(*n <= 3, "{} {trav}: {n}", f.id);
        }
    }
}

#[test]
fn definitions_survive_a_pretty_print_round_trip() {
    for entry in &library().entries {
        let parsed = parse_program(&entry.sable_text).unwrap();
        let once = pretty(&parsed);
        let reparsed = parse_sable(&once).unwrap_or_else(|e| panic!("{}: {e}\n{once}", entry.name));
        let twice = pretty(&reparsed);
        assert_eq!(once, twice, "{}", entry.name);
        assert_eq!(reparsed.traversals.len(), parsed.traversals.len());
    }
}

#[test]
fn analyses_are_deterministic() {
    let lib = library();
    for f in &lib.fixtures {
        let entry = lib.entry(&f.entry).unwrap();
        let run = || {
            let a = analyze_source(
                &f.source,
                &f.qualifier,
                &f.annotation,
                &entry.program,
                EngineConfig::default(),
            )
            .unwrap();
            Report::new(&a, &f.annotation_path, &entry.definition_path).to_text()
        };
        assert_eq!(run(), run(), "{}", f.id);
    }
}
