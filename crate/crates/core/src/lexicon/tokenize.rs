use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Script {
    Han,
    Latin,
    Punct,
}

/// A word (Latin), syllable (Han) or punctuation run, with its character span
/// `[start, end)` in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub script: Script,
    pub span: (usize, usize),
}

pub fn is_han(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xF900..=0xFAFF
        | 0x2_0000..=0x2_EBEF
        | 0x3_0000..=0x3_134F)
}

/// Splits text into Han codepoints, Latin words and punctuation runs.
///
/// Latin words are ASCII letters with internal apostrophes (`it's`); an
/// apostrophe that is not followed by a letter ends the word. Anything that
/// is neither whitespace, Han nor a Latin word is grouped into `Punct` runs.
/// Whitespace is the only input not covered by some token.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if is_han(c) {
            tokens.push(Token {
                surface: c.into(),
                script: Script::Han,
                span: (i, i + 1),
            });
            i += 1;
        } else if c.is_ascii_alphabetic() {
            let start = i;
            i += 1;
            while i < chars.len() {
                let d = chars[i];
                let joins_word = d == '\''
                    && chars.get(i + 1).is_some_and(|n| n.is_ascii_alphabetic());
                if d.is_ascii_alphabetic() || joins_word {
                    i += 1;
                } else {
                    break;
                }
            }
            tokens.push(Token {
                surface: chars[start..i].iter().collect(),
                script: Script::Latin,
                span: (start, i),
            });
        } else {
            let start = i;
            while i < chars.len()
                && !chars[i].is_whitespace()
                && !is_han(chars[i])
                && !chars[i].is_ascii_alphabetic()
            {
                i += 1;
            }
            tokens.push(Token {
                surface: chars[start..i].iter().collect(),
                script: Script::Punct,
                span: (start, i),
            });
        }
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn surfaces(text: &str) -> Vec<(Script, String)> {
        tokenize(text)
            .into_iter()
            .map(|t| (t.script, t.surface))
            .collect()
    }

    #[test]
    fn single_latin_word() {
        assert_eq!(surfaces("hello"), vec![(Script::Latin, "hello".into())]);
    }

    #[test]
    fn one_token_per_han_codepoint() {
        assert_eq!(
            surfaces("你好"),
            vec![(Script::Han, "你".into()), (Script::Han, "好".into())]
        );
    }

    #[test]
    fn mixed_text_with_spaces() {
        let toks = tokenize("我 在 用 mixed");
        let got: Vec<_> = toks.iter().map(|t| (t.script, t.surface.as_str(), t.span)).collect();
        assert_eq!(
            got,
            vec![
                (Script::Han, "我", (0, 1)),
                (Script::Han, "在", (2, 3)),
                (Script::Han, "用", (4, 5)),
                (Script::Latin, "mixed", (6, 11)),
            ]
        );
    }

    #[test]
    fn han_and_latin_never_share_a_token() {
        assert_eq!(
            surfaces("用mixed的"),
            vec![
                (Script::Han, "用".into()),
                (Script::Latin, "mixed".into()),
                (Script::Han, "的".into()),
            ]
        );
    }

    #[test]
    fn apostrophes_and_punctuation() {
        assert_eq!(
            surfaces("'it's ok', 42!"),
            vec![
                (Script::Punct, "'".into()),
                (Script::Latin, "it's".into()),
                (Script::Latin, "ok".into()),
                (Script::Punct, "',".into()),
                (Script::Punct, "42!".into()),
            ]
        );
        assert_eq!(surfaces("好，"), vec![(Script::Han, "好".into()), (Script::Punct, "，".into())]);
    }

    #[test]
    fn empty_and_whitespace_only() {
        assert!(tokenize("").is_empty());
        assert!(tokenize(" \t\n ").is_empty());
    }
}
