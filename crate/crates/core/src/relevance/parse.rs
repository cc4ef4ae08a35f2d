use super::{RelevanceError, RelevanceLabel, Result};

/// Extracts the first standalone digit in 1..=3 from a model response.
///
/// A digit is standalone when neither neighbour is alphanumeric, so "10",
/// "2023" or "h1" never match. Later candidates are ignored.
pub fn parse_response(raw: &str) -> Result<RelevanceLabel> {
    let chars: Vec<char> = raw.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_ascii_digit() {
            continue;
        }
        let before = i.checked_sub(1).map(|j| chars[j]);
        let after = chars.get(i + 1).copied();
        let isolated = before.is_none_or(|b| !b.is_alphanumeric()) && after.is_none_or(|a| !a.is_alphanumeric());
        if !isolated {
            continue;
        }
        if let Some(label) = RelevanceLabel::from_code(c as u8 - b'0') {
            return Ok(label);
        }
    }
    Err(RelevanceError::Unparseable(raw.to_string()))
}
