//! Evidence ledgers: the coded observations that define one test.
//!
//! A ledger is a JSON document:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "case_name": "...",
//!   "working_hypothesis": "...",
//!   "rival_hypothesis": "...",
//!   "alpha_thresholds": [0.05, 0.10],
//!   "observations": [
//!     {"id": "obs1", "description": "...", "supports": "working",
//!      "weight": 1, "source_kind": "interview", "rationale": "..."}
//!   ]
//! }
//! ```
//!
//! `alpha_thresholds`, `weight`, `source_kind` and `rationale` are optional.
//! Observations compatible with both hypotheses are coded `"rival"`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::urn::{build_plus_one_urn, UrnSpec, WeightVector};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_ALPHAS: [f64; 2] = [0.05, 0.10];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Support {
    Working,
    Rival,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Interview,
    Document,
    Map,
    Other,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observation {
    pub id: String,
    pub description: String,
    pub supports: Support,
    #[serde(default = "default_weight")]
    pub weight: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_kind: Option<SourceKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

fn default_weight() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvidenceLedger {
    pub case_name: String,
    pub working_hypothesis: String,
    pub rival_hypothesis: String,
    pub observations: Vec<Observation>,
    pub alpha_thresholds: Vec<f64>,
}

/// On-disk shape of a ledger.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LedgerDocument {
    schema_version: u32,
    case_name: String,
    working_hypothesis: String,
    rival_hypothesis: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha_thresholds: Option<Vec<f64>>,
    observations: Vec<Observation>,
}

const LEDGER_FIELDS: &[&str] = &[
    "schema_version",
    "case_name",
    "working_hypothesis",
    "rival_hypothesis",
    "alpha_thresholds",
    "observations",
];
const OBSERVATION_FIELDS: &[&str] = &[
    "id",
    "description",
    "supports",
    "weight",
    "source_kind",
    "rationale",
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ParseMode {
    /// Unknown fields are errors.
    #[default]
    Strict,
    /// Unknown fields are dropped with a warning.
    Lax,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedLedger {
    pub ledger: EvidenceLedger,
    pub warnings: Vec<String>,
}

/// Parses and validates a ledger in strict mode.
pub fn parse_ledger(document: &[u8]) -> Result<EvidenceLedger> {
    parse_ledger_with(document, ParseMode::Strict).map(|p| p.ledger)
}

pub fn parse_ledger_with(document: &[u8], mode: ParseMode) -> Result<ParsedLedger> {
    let mut warnings = Vec::new();
    let doc: LedgerDocument = match mode {
        ParseMode::Strict => serde_json::from_slice(document).map_err(parse_error)?,
        ParseMode::Lax => {
            let mut value: Value = serde_json::from_slice(document).map_err(parse_error)?;
            strip_unknown(&mut value, &mut warnings);
            serde_json::from_value(value).map_err(|e| Error::Ledger(e.to_string()))?
        }
    };
    let ledger = validate(doc)?;
    Ok(ParsedLedger { ledger, warnings })
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn strip_unknown(value: &mut Value, warnings: &mut Vec<String>) {
    let Value::Object(top) = value else { return };
    drop_keys(top, LEDGER_FIELDS, "ledger", warnings);
    if let Some(Value::Array(obs)) = top.get_mut("observations") {
        for (i, o) in obs.iter_mut().enumerate() {
            if let Value::Object(fields) = o {
                drop_keys(fields, OBSERVATION_FIELDS, &format!("observation {i}"), warnings);
            }
        }
    }
}

fn drop_keys(map: &mut Map<String, Value>, known: &[&str], place: &str, warnings: &mut Vec<String>) {
    let unknown: Vec<String> = map
        .keys()
        .filter(|k| !known.contains(&k.as_str()))
        .cloned()
        .collect();
    for key in unknown {
        map.remove(&key);
        warnings.push(format!("ignoring unknown field {key:?} in {place}"));
    }
}

fn validate(doc: LedgerDocument) -> Result<EvidenceLedger> {
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::Ledger(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            doc.schema_version
        )));
    }
    if doc.observations.is_empty() {
        return Err(Error::Ledger("the ledger has no observations".into()));
    }
    let mut seen = HashSet::new();
    for obs in &doc.observations {
        if obs.id.is_empty() {
            return Err(Error::Ledger("observation ids must be nonempty".into()));
        }
        if !seen.insert(obs.id.as_str()) {
            return Err(Error::DuplicateId(obs.id.clone()));
        }
        if obs.weight == 0 {
            return Err(Error::Ledger(format!(
                "observation {:?} has weight 0; weights are positive integers",
                obs.id
            )));
        }
        if obs.weight > 1 && obs.supports == Support::Rival {
            return Err(Error::Ledger(format!(
                "observation {:?} supports the rival but has weight {}; only working evidence can be weighted",
                obs.id, obs.weight
            )));
        }
    }
    if !doc.observations.iter().any(|o| o.supports == Support::Working) {
        return Err(Error::NoSupportingEvidence);
    }
    let alphas = doc.alpha_thresholds.unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
    validate_alphas(&alphas)?;
    Ok(EvidenceLedger {
        case_name: doc.case_name,
        working_hypothesis: doc.working_hypothesis,
        rival_hypothesis: doc.rival_hypothesis,
        observations: doc.observations,
        alpha_thresholds: alphas,
    })
}

/// Thresholds must lie strictly inside (0, 1) and strictly increase.
pub fn validate_alphas(alphas: &[f64]) -> Result<()> {
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::Ledger(format!("alpha threshold {a} is not in (0, 1)")));
    }
    if alphas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Ledger(
            "alpha thresholds must be strictly increasing".into(),
        ));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counts {
    pub working: u64,
    pub rival: u64,
    /// Weights of the working observations, in ledger order.
    pub weights: WeightVector,
}

pub fn derive_counts(ledger: &EvidenceLedger) -> Counts {
    let weights: Vec<u64> = ledger
        .observations
        .iter()
        .filter(|o| o.supports == Support::Working)
        .map(|o| o.weight)
        .collect();
    let working = weights.len() as u64;
    Counts {
        working,
        rival: ledger.observations.len() as u64 - working,
        weights: WeightVector::new(weights).expect("weights validated on parse"),
    }
}

impl EvidenceLedger {
    pub fn counts(&self) -> Counts {
        derive_counts(self)
    }

    /// The +1 urn this ledger defines.
    pub fn urn(&self) -> Result<UrnSpec> {
        let c = self.counts();
        build_plus_one_urn(c.working, c.rival, Some(&c.weights))
    }

    pub fn to_json(&self) -> String {
        let doc = LedgerDocument {
            schema_version: SCHEMA_VERSION,
            case_name: self.case_name.clone(),
            working_hypothesis: self.working_hypothesis.clone(),
            rival_hypothesis: self.rival_hypothesis.clone(),
            alpha_thresholds: Some(self.alpha_thresholds.clone()),
            observations: self.observations.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("ledger serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(id: &str, supports: &str, extra: &str) -> String {
        format!(r#"{{"id":"{id}","description":"d","supports":"{supports}"{extra}}}"#)
    }

    fn doc(observations: &[String], extra: &str) -> String {
        format!(
            r#"{{"schema_version":1,"case_name":"c","working_hypothesis":"w","rival_hypothesis":"r"{extra},"observations":[{}]}}"#,
            observations.join(",")
        )
    }

    #[test]
    fn parses_minimal_ledger() {
        let d = doc(&[obs("a", "working", "")], "");
        let ledger = parse_ledger(d.as_bytes()).unwrap();
        assert_eq!(ledger.alpha_thresholds, vec![0.05, 0.10]);
        assert_eq!(ledger.observations[0].weight, 1);
        let c = derive_counts(&ledger);
        assert_eq!((c.working, c.rival), (1, 0));
        assert_eq!(c.weights.as_slice(), &[1]);
    }

    #[test]
    fn rejects_duplicate_ids() {
        let d = doc(&[obs("obs1", "working", ""), obs("obs1", "rival", "")], "");
        assert_eq!(parse_ledger(d.as_bytes()), Err(Error::DuplicateId("obs1".into())));
    }

    #[test]
    fn rejects_weighted_rival_evidence() {
        let d = doc(&[obs("a", "working", ""), obs("b", "rival", r#","weight":2"#)], "");
        let err = parse_ledger(d.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("\"b\""), "{err}");
        let d = doc(&[obs("a", "working", r#","weight":0"#)], "");
        assert!(matches!(parse_ledger(d.as_bytes()), Err(Error::Ledger(_))));
    }

    #[test]
    fn rejects_ledgers_without_working_evidence() {
        let d = doc(&[obs("a", "rival", ""), obs("b", "rival", "")], "");
        assert_eq!(parse_ledger(d.as_bytes()), Err(Error::NoSupportingEvidence));
        let d = doc(&[], "");
        assert!(matches!(parse_ledger(d.as_bytes()), Err(Error::Ledger(_))));
    }

    #[test]
    fn malformed_json_reports_position() {
        let d = "{\n  \"schema_version\": 1,\n  \"case_name\": oops\n}";
        match parse_ledger(d.as_bytes()) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(parse_ledger(b"\xff\xfe"), Err(Error::Parse { .. })));
    }

    #[test]
    fn schema_checks() {
        let d = doc(&[obs("a", "working", "")], "").replace("\"schema_version\":1", "\"schema_version\":2");
        assert!(matches!(parse_ledger(d.as_bytes()), Err(Error::Ledger(_))));
        let d = doc(&[obs("a", "both", "")], "");
        assert!(matches!(parse_ledger(d.as_bytes()), Err(Error::Parse { .. })));
        let d = doc(&[obs("a", "working", r#","source_kind":"archive""#)], "");
        assert!(matches!(parse_ledger(d.as_bytes()), Err(Error::Parse { .. })));
        let d = doc(&[obs("", "working", "")], "");
        assert!(matches!(parse_ledger(d.as_bytes()), Err(Error::Ledger(_))));
    }

    #[test]
    fn alpha_validation() {
        for bad in [r#","alpha_thresholds":[0.1,0.05]"#, r#","alpha_thresholds":[0,0.05]"#, r#","alpha_thresholds":[0.05,1]"#, r#","alpha_thresholds":[0.05,0.05]"#] {
            let d = doc(&[obs("a", "working", "")], bad);
            assert!(matches!(parse_ledger(d.as_bytes()), Err(Error::Ledger(_))), "{bad}");
        }
        let d = doc(&[obs("a", "working", "")], r#","alpha_thresholds":[0.01,0.05,0.1]"#);
        assert_eq!(parse_ledger(d.as_bytes()).unwrap().alpha_thresholds, vec![0.01, 0.05, 0.1]);
    }

    #[test]
    fn strict_and_lax_unknown_fields() {
        let d = doc(&[obs("a", "working", r#","colour":"red""#)], r#","author":"x""#);
        assert!(matches!(parse_ledger(d.as_bytes()), Err(Error::Parse { .. })));
        let parsed = parse_ledger_with(d.as_bytes(), ParseMode::Lax).unwrap();
        assert_eq!(parsed.warnings.len(), 2);
        assert!(parsed.warnings.iter().any(|w| w.contains("author")));
        assert!(parsed.warnings.iter().any(|w| w.contains("colour")));
    }

    #[test]
    fn weights_follow_observation_order() {
        let d = doc(
            &[
                obs("r1", "rival", ""),
                obs("w1", "working", ""),
                obs("w2", "working", r#","weight":3"#),
                obs("w3", "working", ""),
            ],
            "",
        );
        let ledger = parse_ledger(d.as_bytes()).unwrap();
        let c = derive_counts(&ledger);
        assert_eq!(c.weights.as_slice(), &[1, 3, 1]);
        assert_eq!(c.working + c.rival, ledger.observations.len() as u64);
        assert_eq!(ledger.urn().unwrap(), UrnSpec::new(3, 6, 4, 3).unwrap());
    }

    #[test]
    fn serialization_round_trips() {
        let d = doc(
            &[obs("a", "working", r#","source_kind":"map","rationale":"why""#), obs("b", "rival", "")],
            "",
        );
        let ledger = parse_ledger(d.as_bytes()).unwrap();
        assert_eq!(parse_ledger(ledger.to_json().as_bytes()).unwrap(), ledger);
    }
}
