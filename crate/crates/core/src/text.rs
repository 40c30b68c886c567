//! Small text utilities shared by the embedder and the perception tools.

/// Lowercased alphanumeric runs of `text`, in order of appearance.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Lowercased alphabetic word tokens with digits dropped and a crude plural
/// strip, used for matching free-text queries against entity names.
pub fn match_tokens(text: &str) -> Vec<String> {
    const STOPWORDS: &[&str] = &[
        "a", "an", "the", "of", "on", "in", "to", "with", "and", "my", "some", "any", "is",
        "are", "that", "which", "for", "at", "from", "this", "these", "those",
    ];
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .map(|t| {
            if t.len() > 3 && t.ends_with('s') && !t.ends_with("ss") {
                t[..t.len() - 1].to_string()
            } else {
                t
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_splits_on_punctuation() {
        assert_eq!(
            tokenize("Grandfather's gifted tea-kettle_2"),
            vec!["grandfather", "s", "gifted", "tea", "kettle", "2"]
        );
        assert!(tokenize("  ,;  ").is_empty());
    }

    #[test]
    fn match_tokens_strips_stopwords_and_plurals() {
        assert_eq!(match_tokens("toys on the floor"), vec!["toy", "floor"]);
        assert_eq!(match_tokens("counter_22"), vec!["counter"]);
        assert_eq!(match_tokens("glass"), vec!["glass"]);
    }
}
