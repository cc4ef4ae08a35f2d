//! Word tokenizer for social-media text.
//!
//! Rules, applied per whitespace-separated chunk of the lowercased, NFC
//! normalized text:
//! - chunks starting with `http://`, `https://` or `www.` become `<url>`;
//! - `@name` becomes `<user>`;
//! - a chunk that is exactly a known emoticon is kept whole;
//! - anything else splits into runs of alphanumerics (with any combining
//!   marks that follow them); punctuation, `#` included, is dropped.

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

pub const URL_TOKEN: &str = "<url>";
pub const USER_TOKEN: &str = "<user>";

const EMOTICONS: &[&str] = &[
    ":)", ":-)", ":(", ":-(", ":d", ":-d", ";)", ";-)", ":p", ":-p", ":'(", ":/", ":-/", ":o", ":|", "=)", "=(", "<3",
    "</3",
];

fn is_handle_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn push_words(chunk: &str, out: &mut Vec<String>) {
    let mut word = String::new();
    for c in chunk.chars() {
        if c.is_alphanumeric() || (!word.is_empty() && is_combining_mark(c)) {
            word.push(c);
        } else if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    let norm: String = text.to_lowercase().nfc().collect();
    let mut out = Vec::new();
    for chunk in norm.split_whitespace() {
        if chunk.starts_with("http://") || chunk.starts_with("https://") || chunk.starts_with("www.") {
            out.push(URL_TOKEN.to_string());
        } else if chunk == URL_TOKEN || chunk == USER_TOKEN || EMOTICONS.contains(&chunk) {
            out.push(chunk.to_string());
        } else if chunk.strip_prefix('@').and_then(|r| r.chars().next()).is_some_and(is_handle_char) {
            out.push(USER_TOKEN.to_string());
        } else {
            push_words(chunk, &mut out);
        }
    }
    out
}
