//! Small text helpers shared by the pipeline, the policy features and the mock oracle.

use std::collections::BTreeSet;

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "of", "to", "in", "on", "for", "with", "by", "at", "from", "as",
    "is", "it", "its", "be", "this", "that", "these", "those", "into", "onto", "your", "you", "my",
    "i", "me", "we", "our", "how", "do", "does", "can", "will", "then", "so", "all", "any", "each",
    "word", "microsoft", "office", "document", "doc", "make", "using", "use", "set", "add",
];

/// Lowercased alphanumeric tokens with stopwords removed and a trailing plural `s` stripped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .map(|t| stem(&t))
        .collect()
}

pub fn token_set(text: &str) -> BTreeSet<String> {
    tokenize(text).into_iter().collect()
}

fn stem(token: &str) -> String {
    if token.len() > 3 && token.ends_with('s') && !token.ends_with("ss") {
        token[..token.len() - 1].to_string()
    } else {
        token.to_string()
    }
}

/// Lowercase, strip punctuation, collapse whitespace.
pub fn normalize(text: &str) -> String {
    let cleaned: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect::<String>()
        .to_lowercase();
    collapse_whitespace(&cleaned)
}

pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Fraction of `part` tokens present in `whole`; 0 when `part` has no tokens.
pub fn overlap(part: &BTreeSet<String>, whole: &BTreeSet<String>) -> f64 {
    if part.is_empty() {
        return 0.0;
    }
    part.intersection(whole).count() as f64 / part.len() as f64
}

/// Substrings enclosed in single or double quotes, in order of appearance, deduplicated.
pub fn quoted_spans(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let q = chars[i];
        // an apostrophe inside a word ("don't") is not an opening quote
        let opens = (q == '\'' || q == '"')
            && (i == 0 || !chars[i - 1].is_alphanumeric());
        if opens {
            if let Some(rel) = chars[i + 1..].iter().position(|&c| c == q) {
                let span: String = chars[i + 1..i + 1 + rel].iter().collect();
                if !span.trim().is_empty() && !out.contains(&span) {
                    out.push(span);
                }
                i += rel + 2;
                continue;
            }
        }
        i += 1;
    }
    out
}

/// Text with quoted spans removed, so keywords inside target text are not mistaken for intent.
pub fn without_quotes(text: &str) -> String {
    let mut out = text.to_string();
    for span in quoted_spans(text) {
        out = out.replace(&format!("'{span}'"), " ").replace(&format!("\"{span}\""), " ");
    }
    out
}

/// Standalone non-negative integers outside quoted spans, in order, deduplicated.
pub fn integers(text: &str) -> Vec<u32> {
    let mut out = Vec::new();
    for tok in without_quotes(text).split(|c: char| !c.is_ascii_digit()) {
        if let Ok(n) = tok.parse::<u32>() {
            if !out.contains(&n) {
                out.push(n);
            }
        }
    }
    out
}

/// `RxC` dimension pairs such as `3x4`.
pub fn dimensions(text: &str) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for tok in without_quotes(text).split(|c: char| !c.is_alphanumeric()) {
        let lower = tok.to_lowercase();
        if let Some((r, c)) = lower.split_once('x') {
            if let (Ok(r), Ok(c)) = (r.parse::<u32>(), c.parse::<u32>()) {
                if !out.contains(&(r, c)) {
                    out.push((r, c));
                }
            }
        }
    }
    out
}

/// Share of ASCII letters among all alphabetic characters (1.0 when there are none).
pub fn ascii_letter_ratio(text: &str) -> f64 {
    let letters: Vec<char> = text.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.is_empty() {
        return 1.0;
    }
    letters.iter().filter(|c| c.is_ascii_alphabetic()).count() as f64 / letters.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_drops_stopwords_and_plurals() {
        assert_eq!(tokenize("Add a border to the Page Borders"), vec!["border", "page", "border"]);
    }

    #[test]
    fn normalize_strips_punctuation() {
        assert_eq!(normalize("go to DESIGN  > page borders."), "go to design page borders");
        assert_eq!(normalize("Go to Design > Page Borders."), "go to design page borders");
    }

    #[test]
    fn quoted_spans_skip_apostrophes() {
        assert_eq!(quoted_spans("Don't touch 'Test For Fun' or \"x y\""), vec!["Test For Fun", "x y"]);
        assert!(quoted_spans("it's fine").is_empty());
    }

    #[test]
    fn integers_ignore_quoted_digits() {
        assert_eq!(integers("Set size 14 for 'Q3 2024' and 3x4"), vec![14, 3, 4]);
        assert_eq!(dimensions("Insert a 3x4 table"), vec![(3, 4)]);
    }

    #[test]
    fn ascii_ratio() {
        assert_eq!(ascii_letter_ratio("hello"), 1.0);
        assert!(ascii_letter_ratio("добавить рамку") < 0.1);
    }
}
