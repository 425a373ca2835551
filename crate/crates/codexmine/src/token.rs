//! Word tokenization shared by the lexicon index and the corpus mapper.
//!
//! A token is a maximal run of Unicode alphanumeric characters, where single
//! interior hyphens join runs into one token ("TNF-alpha" stays whole).
//! Everything is lowercased with the full Unicode mapping; no stemming.

/// Splits text into lowercased word tokens.
///
/// Hyphens are kept when they sit between alphanumeric characters; leading,
/// trailing, or doubled hyphens act as separators. All other non-alphanumeric
/// characters separate tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
            i += 1;
        } else if c == '-'
            && !current.is_empty()
            && i + 1 < chars.len()
            && chars[i + 1].is_alphanumeric()
        {
            current.push('-');
            i += 1;
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            i += 1;
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Canonical index key for a surface form: lowercased tokens joined by a
/// single space. Returns `None` when the surface contains no word tokens.
pub fn normalize_surface(surface: &str) -> Option<String> {
    let tokens = tokenize(surface);
    if tokens.is_empty() {
        None
    } else {
        Some(tokens.join(" "))
    }
}

/// Number of word tokens in a surface form.
pub fn surface_token_count(surface: &str) -> usize {
    tokenize(surface).len()
}
