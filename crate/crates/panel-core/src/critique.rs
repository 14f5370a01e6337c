//! Natural-language self-critique: the parsed verdict a critic model gives a
//! candidate reasoning step (or a complete solution).

use alloc::string::{String, ToString};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correctness {
    Correct,
    Incorrect,
    /// The critic's reply did not contain a well-formed verdict.
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Critique {
    pub candidate_index: usize,
    pub correctness: Correctness,
    /// Natural-language description of the flaw; empty when correct.
    pub text: String,
    /// Verbatim critic output, kept for traces and debugging.
    pub raw: String,
}

impl Critique {
    pub fn correct(candidate_index: usize, raw: impl Into<String>) -> Critique {
        Critique {
            candidate_index,
            correctness: Correctness::Correct,
            text: String::new(),
            raw: raw.into(),
        }
    }

    pub fn incorrect(
        candidate_index: usize,
        text: impl Into<String>,
        raw: impl Into<String>,
    ) -> Critique {
        Critique {
            candidate_index,
            correctness: Correctness::Incorrect,
            text: text.into(),
            raw: raw.into(),
        }
    }

    pub fn unparseable(candidate_index: usize, raw: impl Into<String>) -> Critique {
        Critique {
            candidate_index,
            correctness: Correctness::Unparseable,
            text: String::new(),
            raw: raw.into(),
        }
    }

    /// The same critique reattached to another candidate (used when duplicate
    /// candidates share one critic call).
    pub fn with_index(&self, candidate_index: usize) -> Critique {
        Critique { candidate_index, ..self.clone() }
    }

    /// How the critique reads when quoted inside a selection prompt.
    pub fn annotation(&self) -> &str {
        match self.correctness {
            Correctness::Correct => "no issues found",
            Correctness::Incorrect => &self.text,
            Correctness::Unparseable => "no usable critique",
        }
    }
}

/// Parses a critic reply. The reply is expected to contain a JSON object with
/// `correctness` ("correct" or "incorrect") and `critique` fields, but critics
/// wrap it in prose, code fences, or trailing commentary often enough that the
/// parser scans for the first well-formed object carrying both keys.
///
/// A verdict of `correct` forces the critique text empty; anything without a
/// recognizable verdict is recorded as unparseable with the raw reply kept.
pub fn parse_critique(raw: &str, candidate_index: usize) -> Critique {
    for (pos, _) in raw.char_indices().filter(|(_, c)| *c == '{') {
        let mut de = serde_json::Deserializer::from_str(&raw[pos..]);
        let Ok(value) = Value::deserialize(&mut de) else { continue };
        let Some(obj) = value.as_object() else { continue };
        let (Some(correctness), Some(critique)) = (obj.get("correctness"), obj.get("critique"))
        else {
            continue;
        };
        let (Some(label), Some(text)) = (correctness.as_str(), critique.as_str()) else {
            return Critique::unparseable(candidate_index, raw);
        };
        let label = label.trim();
        if label.eq_ignore_ascii_case("correct") {
            return Critique::correct(candidate_index, raw);
        }
        if label.eq_ignore_ascii_case("incorrect") {
            return Critique::incorrect(candidate_index, text.trim().to_string(), raw);
        }
        return Critique::unparseable(candidate_index, raw);
    }
    Critique::unparseable(candidate_index, raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    #[test]
    fn parses_bare_correct_verdict() {
        let raw = r#"{"correctness": "correct", "critique": ""}"#;
        let c = parse_critique(raw, 2);
        assert_eq!(c.correctness, Correctness::Correct);
        assert_eq!(c.text, "");
        assert_eq!(c.candidate_index, 2);
        assert_eq!(c.raw, raw);
    }

    #[test]
    fn correct_verdict_discards_stray_text() {
        let raw = r#"{"correctness": "Correct", "critique": "looks good"}"#;
        let c = parse_critique(raw, 0);
        assert_eq!(c.correctness, Correctness::Correct);
        assert_eq!(c.text, "");
    }

    #[test]
    fn parses_fenced_incorrect_verdict() {
        let raw = "Here is my assessment:\n```json\n{\"correctness\": \"incorrect\", \"critique\": \"the mole ratio was misapplied\"}\n```\nDone.";
        let c = parse_critique(raw, 1);
        assert_eq!(c.correctness, Correctness::Incorrect);
        assert_eq!(c.text, "the mole ratio was misapplied");
    }

    #[test]
    fn prose_without_json_is_unparseable() {
        let c = parse_critique("I think it looks fine.", 3);
        assert_eq!(c.correctness, Correctness::Unparseable);
        assert_eq!(c.raw, "I think it looks fine.");
    }

    #[test]
    fn skips_objects_missing_the_keys() {
        let raw = r#"{"note": "irrelevant"} {"correctness": "incorrect", "critique": "off by one"}"#;
        let c = parse_critique(raw, 0);
        assert_eq!(c.correctness, Correctness::Incorrect);
        assert_eq!(c.text, "off by one");
    }

    #[test]
    fn unknown_verdict_label_is_unparseable() {
        let raw = r#"{"correctness": "maybe", "critique": "hmm"}"#;
        assert_eq!(parse_critique(raw, 0).correctness, Correctness::Unparseable);
    }

    #[test]
    fn non_string_fields_are_unparseable() {
        let raw = r#"{"correctness": true, "critique": 3}"#;
        assert_eq!(parse_critique(raw, 0).correctness, Correctness::Unparseable);
    }

    #[test]
    fn verdict_survives_trailing_garbage() {
        let raw = r#"{"correctness":"incorrect","critique":"sign error"} and furthermore {{{"#;
        let c = parse_critique(raw, 0);
        assert_eq!(c.correctness, Correctness::Incorrect);
        assert_eq!(c.text, "sign error");
    }

    #[test]
    fn round_trips_through_serialization() {
        let c = Critique::incorrect(4, "unit mismatch", "raw text");
        let json = serde_json::to_string(&c).unwrap();
        let back: Critique = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn annotation_covers_all_verdicts() {
        assert_eq!(Critique::correct(0, "").annotation(), "no issues found");
        assert_eq!(Critique::incorrect(0, "bad units", "").annotation(), "bad units");
        assert_eq!(Critique::unparseable(0, "???").annotation(), "no usable critique");
    }

    #[test]
    fn with_index_preserves_content() {
        let c = Critique::incorrect(0, "dropped a term", "raw");
        let moved = c.with_index(3);
        assert_eq!(moved.candidate_index, 3);
        assert_eq!(moved.text, c.text);
        assert_eq!(moved.correctness, c.correctness);
    }

    #[test]
    fn parser_never_panics_on_noise() {
        for raw in ["", "{", "{{{{", "{\"correctness\":}", "null", "[1,2]", "{\"a\""] {
            let _ = parse_critique(raw, 0);
        }
        let long = format!("{}{}", "{\"correctness\":\"incorrect\",", "x".repeat(4096));
        assert_eq!(parse_critique(&long, 0).correctness, Correctness::Unparseable);
    }
}
