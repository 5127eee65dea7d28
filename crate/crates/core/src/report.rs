//! Alarm reports.

use std::fmt::Write as _;

use serde::Serialize;

use crate::analysis::Analysis;
use crate::value::AspectValue;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ReportedAlarm {
    pub line: usize,
    pub step: u64,
    pub aspect: String,
    pub value: AspectValue,
    /// `point:Label` of the alarming state.
    pub state: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Report {
    pub id: u64,
    pub procedure: String,
    pub source_annotation: String,
    pub static_aspect_definition: String,
    pub alarms: Vec<ReportedAlarm>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl Report {
    pub fn new(
        analysis: &Analysis,
        source_annotation: &str,
        static_aspect_definition: &str,
    ) -> Report {
        let scfg = &analysis.scfg;
        let mut alarms: Vec<ReportedAlarm> = analysis
            .outcome
            .ledger
            .alarms()
            .into_iter()
            .map(|a| {
                let st = scfg.state(a.state);
                ReportedAlarm {
                    line: st.loc,
                    step: a.step,
                    aspect: a.aspect,
                    value: a.value,
                    state: st.name(),
                }
            })
            .collect();
        alarms.sort();
        let mut report = Report {
            id: 0,
            procedure: analysis.qualifier.clone(),
            source_annotation: source_annotation.to_string(),
            static_aspect_definition: static_aspect_definition.to_string(),
            alarms,
        };
        report.id = fnv1a(report.body().as_bytes()) % 10_000_000_000;
        report
    }

    /// Distinct alarming lines, ascending.
    pub fn lines(&self) -> Vec<usize> {
        let mut lines: Vec<usize> = self.alarms.iter().map(|a| a.line).collect();
        lines.dedup();
        lines
    }

    fn body(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "   - procedure = {}", self.procedure);
        let _ = writeln!(out, "   - source_annotation = {}", self.source_annotation);
        let _ = writeln!(
            out,
            "   - static_aspect_definition = {}",
            self.static_aspect_definition
        );
        out.push_str("   - alarms:\n");
        let mut line = None;
        for a in &self.alarms {
            if line != Some(a.line) {
                let _ = writeln!(out, "      - line {}", a.line);
                line = Some(a.line);
            }
            let _ = writeln!(
                out,
                "         {} = {} at step {}",
                a.aspect, a.value, a.step
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        format!(
            "<StaticAspectAnalysis (id {}):\n{}>\n",
            self.id,
            self.body()
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::analyze_source;
    use crate::engine::EngineConfig;
    use crate::sable::{parse_sable, SourceAnnotation};

    #[test]
    fn empty_report_shape() {
        let program = parse_sable("traversal T:\n\taspect B aspectType bool\n").unwrap();
        let a = analyze_source(
            "def f():\n    pass\n",
            "m.py:f",
            &SourceAnnotation::default(),
            &program,
            EngineConfig::default(),
        )
        .unwrap();
        let r = Report::new(&a, "a.json", "d.sable");
        let text = r.to_text();
        assert!(text.ends_with("   - alarms:\n>\n"), "{text}");
        assert!(text.starts_with(&format!("<StaticAspectAnalysis (id {}):\n", r.id)));
        assert!(r.id < 10_000_000_000);
        assert_eq!(r, Report::new(&a, "a.json", "d.sable"));
    }
}
