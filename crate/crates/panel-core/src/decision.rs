//! Parsing of selection decisions and scalar self-evaluation scores.

use alloc::string::{String, ToString};
use serde::{Deserialize, Serialize};

/// A selection among K candidates, parsed from a policy model reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub chosen_index: usize,
    /// Free text following the selected index, if any.
    pub rationale: String,
    /// False when the reply had no usable selection and a fallback was used.
    pub parse_ok: bool,
    /// Verbatim reply.
    pub raw: String,
}

impl Decision {
    pub fn fallback(index: usize, raw: impl Into<String>) -> Decision {
        Decision { chosen_index: index, rationale: String::new(), parse_ok: false, raw: raw.into() }
    }

    pub fn forced(index: usize, rationale: impl Into<String>) -> Decision {
        Decision {
            chosen_index: index,
            rationale: rationale.into(),
            parse_ok: true,
            raw: String::new(),
        }
    }
}

/// Parses a reply against the `SELECTED: <index>` contract. The last line
/// containing the marker wins, matching is case-insensitive, and an optional
/// `#` before the digits is tolerated. Replies with no marker or an index
/// outside `[0, k)` fall back to `fallback_index` with `parse_ok` false.
pub fn parse_selection(raw: &str, k: usize, fallback_index: usize) -> Decision {
    const MARKER: &str = "selected:";
    let mut result: Option<Decision> = None;
    for line in raw.lines() {
        let Some(pos) = find_ignore_ascii_case(line, MARKER) else { continue };
        let rest = line[pos + MARKER.len()..].trim_start();
        let rest = rest.strip_prefix('#').unwrap_or(rest).trim_start();
        let digits_len = rest.bytes().take_while(|b| b.is_ascii_digit()).count();
        if digits_len == 0 {
            continue;
        }
        let Ok(index) = rest[..digits_len].parse::<usize>() else { continue };
        if index >= k {
            continue;
        }
        let rationale = rest[digits_len..]
            .trim_start_matches([' ', '\t', '-', ':', ',', ')', '.'])
            .trim()
            .to_string();
        result = Some(Decision { chosen_index: index, rationale, parse_ok: true, raw: raw.to_string() });
    }
    result.unwrap_or_else(|| Decision::fallback(fallback_index, raw))
}

fn find_ignore_ascii_case(haystack: &str, needle: &str) -> Option<usize> {
    let hay = haystack.as_bytes();
    let pat = needle.as_bytes();
    if pat.is_empty() || hay.len() < pat.len() {
        return None;
    }
    (0..=hay.len() - pat.len()).find(|&i| hay[i..i + pat.len()].eq_ignore_ascii_case(pat))
}

/// A scalar self-evaluation of one candidate on a 0 to 10 scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfEvalScore {
    pub candidate_index: usize,
    pub score: f64,
    /// False when no in-range number was found and the score defaulted to 0.
    pub parse_ok: bool,
    pub raw: String,
}

/// Parses a score reply: the first number in `[0, 10]` wins. Replies with no
/// such number score 0 and are flagged.
pub fn parse_score(raw: &str, candidate_index: usize) -> SelfEvalScore {
    let bytes = raw.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if !bytes[i].is_ascii_digit() {
            i += 1;
            continue;
        }
        let negative = i > 0 && bytes[i - 1] == b'-';
        let start = i;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        let token = raw[start..i].trim_end_matches('.');
        if let Ok(value) = token.parse::<f64>() {
            let value = if negative { -value } else { value };
            if (0.0..=10.0).contains(&value) {
                return SelfEvalScore {
                    candidate_index,
                    score: value,
                    parse_ok: true,
                    raw: raw.to_string(),
                };
            }
        }
    }
    SelfEvalScore { candidate_index, score: 0.0, parse_ok: false, raw: raw.to_string() }
}

/// Index of the highest-scoring candidate; ties go to the lowest index.
/// Returns `None` only for an empty slice.
pub fn select_argmax(scores: &[SelfEvalScore]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        match best {
            Some((_, top)) if s.score <= top => {}
            _ => best = Some((i, s.score)),
        }
    }
    best.map(|(i, _)| i)
}
