//! Sentence splitting, tokenization and the stem pipeline shared by every
//! other module.

use std::collections::HashSet;
use std::sync::OnceLock;

static STOPWORDS_EN: &str = include_str!("../data/stopwords_en.txt");

/// The shipped English stopword list.
pub fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS_EN.lines().map(str::trim).filter(|l| !l.is_empty()).collect())
}

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "st", "jr", "sr", "gen", "sen", "rep", "gov", "pres", "prof", "inc", "co", "corp", "lt",
    "col", "capt", "vs", "etc", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec",
    "no", "mt", "ft",
];

/// A whitespace token with surrounding punctuation trimmed, plus its char span
/// in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawToken {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

fn is_trim_char(c: char) -> bool {
    matches!(
        c,
        '"' | '\''
            | '('
            | ')'
            | '['
            | ']'
            | '{'
            | '}'
            | ','
            | ';'
            | ':'
            | '!'
            | '?'
            | '.'
            | '“'
            | '”'
            | '‘'
            | '’'
            | '«'
            | '»'
            | '—'
            | '–'
    )
}

/// `D.C.`, `U.S.` and friends.
fn is_initialism(chunk: &str) -> bool {
    let bytes: Vec<char> = chunk.chars().collect();
    bytes.len() >= 2 && bytes.len().is_multiple_of(2) && bytes.chunks(2).all(|p| p[0].is_alphabetic() && p[1] == '.')
}

fn ends_sentence(chunk: &str) -> bool {
    let core = chunk.trim_end_matches(['"', '\'', ')', ']', '”', '’']);
    let Some(last) = core.chars().last() else {
        return false;
    };
    match last {
        '!' | '?' => true,
        '.' => {
            if is_initialism(core) {
                return false;
            }
            let word = core.trim_end_matches('.').trim_start_matches(is_trim_char);
            !ABBREVIATIONS.contains(&word.to_lowercase().as_str())
        }
        _ => false,
    }
}

/// Splits text into sentences of raw tokens. Tokens keep their original
/// casing and internal punctuation (`Korea's`, `D.C`).
pub fn split_sentences(text: &str) -> Vec<Vec<RawToken>> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    let mut chunk_start: Option<usize> = None;
    let mut chunk = String::new();

    let flush = |chunk: &mut String, start: usize, current: &mut Vec<RawToken>| {
        let end_sentence = ends_sentence(chunk);
        let lead = chunk.chars().take_while(|&c| is_trim_char(c)).count();
        let trimmed = chunk.trim_start_matches(is_trim_char).trim_end_matches(is_trim_char);
        if !trimmed.is_empty() {
            let s = start + lead;
            current.push(RawToken {
                text: trimmed.to_string(),
                start: s,
                end: s + trimmed.chars().count(),
            });
        }
        chunk.clear();
        end_sentence
    };

    for (char_pos, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            if let Some(start) = chunk_start.take() {
                if flush(&mut chunk, start, &mut current) && !current.is_empty() {
                    sentences.push(std::mem::take(&mut current));
                }
            }
        } else {
            if chunk_start.is_none() {
                chunk_start = Some(char_pos);
            }
            chunk.push(c);
        }
    }
    if let Some(start) = chunk_start {
        flush(&mut chunk, start, &mut current);
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    sentences
}

/// Lowercases, drops a trailing possessive `'s`, and removes every
/// non-alphanumeric character.
pub fn normalize_token(token: &str) -> String {
    let lower = token.to_lowercase();
    let base = lower
        .strip_suffix("'s")
        .or_else(|| lower.strip_suffix("’s"))
        .unwrap_or(&lower);
    base.chars().filter(|c| c.is_alphanumeric()).collect()
}

/// Normalized tokens of a multi-word name, e.g. `"Washington D.C."` becomes
/// `["washington", "dc"]`.
pub fn normalize_name(name: &str) -> Vec<String> {
    name.split_whitespace()
        .map(normalize_token)
        .filter(|t| !t.is_empty())
        .collect()
}

/// Porter stem of an already-normalized token.
pub fn stem(token: &str) -> String {
    if token.is_ascii() {
        porter_stemmer::stem(token)
    } else {
        token.to_string()
    }
}

fn is_stopword(raw: &str, normalized: &str) -> bool {
    let sw = stopwords();
    let lower = raw.to_lowercase().replace('’', "'");
    sw.contains(lower.as_str()) || sw.contains(normalized)
}

/// Stems of one token list, stopwords removed.
pub fn stem_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    tokens
        .into_iter()
        .filter_map(|raw| {
            let norm = normalize_token(raw);
            if norm.is_empty() || is_stopword(raw, &norm) {
                None
            } else {
                Some(stem(&norm))
            }
        })
        .collect()
}

/// Sentence-split, lowercase, strip punctuation, drop stopwords and stem.
/// A sentence made entirely of stopwords becomes an empty list so the
/// sentence count matches [`split_sentences`].
pub fn preprocess(text: &str) -> Vec<Vec<String>> {
    split_sentences(text)
        .iter()
        .map(|s| stem_tokens(s.iter().map(|t| t.text.as_str())))
        .collect()
}

/// Stems identifying a name inside a word graph (`"New York City"` gives
/// `["new", "york", "citi"]`).
pub fn name_stems(name: &str) -> Vec<String> {
    stem_tokens(name.split_whitespace())
}

/// Start indices where `needle` occurs as a contiguous run in `haystack`.
pub fn find_token_run(haystack: &[String], needle: &[String]) -> Vec<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return Vec::new();
    }
    (0..=haystack.len() - needle.len())
        .filter(|&i| haystack[i..i + needle.len()] == *needle)
        .collect()
}
