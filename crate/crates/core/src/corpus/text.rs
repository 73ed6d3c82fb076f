//! Text normalization and tokenization shared by every layer.

use std::sync::OnceLock;

use regex::Regex;

pub const URL_TOKEN: &str = "[URL]";
pub const USER_TOKEN: &str = "[USER]";

fn url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S+").unwrap())
}

fn user_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // `@name` mentions and reddit-style `u/name` / `/u/name` references.
    RE.get_or_init(|| Regex::new(r"@\w+|(?:\B/|\b)u/\w+").unwrap())
}

fn underscore_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // Underscore runs touching a non-word character or a string boundary are
    // emphasis markers; runs strictly inside a word (snake_case) are kept.
    RE.get_or_init(|| Regex::new(r"(?:^|\W)_+|_+(?:\W|$)").unwrap())
}

fn strip_emphasis(s: &str) -> String {
    let s: String = s.chars().filter(|&c| c != '*' && c != '~').collect();
    underscore_re()
        .replace_all(&s, |caps: &regex::Captures<'_>| caps[0].replace('_', ""))
        .into_owned()
}

fn single_pass(s: &str) -> String {
    let s = strip_emphasis(s);
    let s = url_re().replace_all(&s, URL_TOKEN);
    let s = user_re().replace_all(&s, USER_TOKEN);
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Strips emphasis markers, maps URLs and user references to fixed
/// placeholder tokens and collapses whitespace.
///
/// The passes are repeated until nothing changes so the result is a fixed
/// point: `normalize_text(normalize_text(x)) == normalize_text(x)`.
pub fn normalize_text(raw: &str) -> String {
    let mut current = single_pass(raw);
    loop {
        let next = single_pass(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Splits on whitespace and punctuation boundaries.
///
/// Word characters form tokens, an apostrophe between two word characters
/// stays inside the token ("don't"), every other punctuation character is a
/// token of its own, and the `[URL]` / `[USER]` placeholders are kept whole.
/// Case is preserved.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '[' {
            let rest: String = chars[i..chars.len().min(i + 6)].iter().collect();
            let placeholder = [URL_TOKEN, USER_TOKEN].into_iter().find(|p| rest.starts_with(p));
            if let Some(p) = placeholder {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(p.to_owned());
                i += p.chars().count();
                continue;
            }
        }
        let inner_apostrophe = (c == '\'' || c == '\u{2019}')
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|&n| is_word_char(n));
        if is_word_char(c) || inner_apostrophe {
            current.push(c);
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
        }
        i += 1;
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_emphasis_and_whitespace() {
        assert_eq!(normalize_text("*so*   happy  "), "so happy");
        assert_eq!(normalize_text("_really_ __bold__ ~~gone~~"), "really bold gone");
        assert_eq!(normalize_text("snake_case stays"), "snake_case stays");
    }

    #[test]
    fn maps_references() {
        assert_eq!(normalize_text("see http://a.b/c now"), "see [URL] now");
        assert_eq!(normalize_text("ask @bob or u/alice"), "ask [USER] or [USER]");
        assert_eq!(normalize_text("www.example.com!"), "[URL]");
    }

    #[test]
    fn empty_is_fine() {
        assert_eq!(normalize_text(""), "");
        assert_eq!(normalize_text("   \t\n"), "");
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("I don't know!!"), ["I", "don't", "know", "!", "!"]);
        assert_eq!(tokenize("see [URL], [USER]."), ["see", "[URL]", ",", "[USER]", "."]);
        assert_eq!(tokenize("[x]"), ["[", "x", "]"]);
        assert_eq!(tokenize("héllo wörld"), ["héllo", "wörld"]);
        assert!(tokenize("").is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn normalize_is_idempotent(s in r"[a-z @_*~/:.\[\]A-Zwhtps\t\n]{0,40}") {
            let once = normalize_text(&s);
            prop_assert_eq!(normalize_text(&once), once);
        }

        #[test]
        fn normalize_is_idempotent_any_unicode(s in any::<String>()) {
            let once = normalize_text(&s);
            prop_assert_eq!(normalize_text(&once), once);
        }

        #[test]
        fn tokens_never_contain_whitespace(s in any::<String>()) {
            for t in tokenize(&s) {
                prop_assert!(!t.is_empty());
                prop_assert!(!t.chars().any(char::is_whitespace));
            }
        }
    }
}
