//! Cleaning and tokenization of developer comments.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::LazyLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

const SEED_ACRONYMS: &str = include_str!("../data/acronyms.tsv");

#[derive(Debug, thiserror::Error)]
pub enum TextprepError {
    #[error("{path}:{line}: {message}")]
    Dictionary { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub tokens: Vec<String>,
    pub total_count: usize,
}

impl TokenStream {
    pub fn new(tokens: Vec<String>) -> Self {
        let total_count = tokens.len();
        TokenStream { tokens, total_count }
    }

    pub fn extend(&mut self, other: TokenStream) {
        self.tokens.extend(other.tokens);
        self.total_count = self.tokens.len();
    }

    pub fn is_empty(&self) -> bool {
        self.total_count == 0
    }
}

static FENCED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)```.*?```|~~~.*?~~~|```.*|~~~.*").unwrap());
static QUOTE_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*>").unwrap());
static STACK_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(concat!(
        r"^\s*(?:",
        r"at\s+[\w$.<>/:\[\]-]+\s*\(.*\)",            // Java, JavaScript
        r"|at\s+[\w$.<>]+\.[\w$<>]+\s*$",
        r#"|File\s+".*",\s+line\s+\d+.*"#,            // Python
        r"|Traceback\s+\(most recent call last\):?",
        r"|#\d+\s+0x[0-9a-fA-F]+.*",                  // gdb
        r"|\d+:\s+0x[0-9a-fA-F]+.*",                  // Rust backtrace
        r"|thread\s+'.*'\s+panicked\s+at.*",
        r"|(?:[\w$]+\.)+[\w$]*(?:Exception|Error)(?::.*)?",
        r"|\.\.\.\s+\d+\s+more",
        r")\s*$"
    ))
    .unwrap()
});
static INLINE_CODE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"`[^`\n]*`").unwrap());
static URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(?:https?|ftp|file)://\S+|\bwww\.\S+").unwrap());
static EMAIL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[\w.+-]+@[\w-]+(?:\.[\w-]+)+").unwrap());
static PATH: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(concat!(
        r"(?:^|\s)(?:~|\.{1,2})?/[\w.\-]+(?:/[\w.\-]*)*",
        r"|\b[\w.\-]+(?:/[\w.\-]+)*/[\w\-]+\.[A-Za-z][A-Za-z0-9]{0,5}\b",
        r"|\b[\w\-]+\.(?:rs|py|js|ts|tsx|jsx|java|kt|c|h|cc|cpp|hpp|go|rb|php|cs|swift|scala|md|txt|json|ya?ml|toml|xml|html|css|sh|lock|cfg|ini|log|gradle)\b",
    ))
    .unwrap()
});
static HEX: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b[0-9a-fA-F]{7,}\b").unwrap());
static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(^|[^\w@.])@[A-Za-z0-9][A-Za-z0-9-]*(?:\[bot\])?").unwrap());
static SPACE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+").unwrap());

/// Blanks out fenced blocks and inline code spans, leaving the rest intact.
pub fn remove_code(body: &str) -> String {
    let text = FENCED.replace_all(body, " ");
    INLINE_CODE.replace_all(&text, " ").into_owned()
}

fn strip_once(body: &str) -> String {
    let text = FENCED.replace_all(body, " ");
    let kept: Vec<&str> = text
        .lines()
        .filter(|l| !QUOTE_LINE.is_match(l) && !STACK_LINE.is_match(l))
        .collect();
    let text = kept.join("\n");
    let text = INLINE_CODE.replace_all(&text, " ");
    let text = URL.replace_all(&text, " ");
    let text = EMAIL.replace_all(&text, " ");
    let text = PATH.replace_all(&text, " ");
    let text = HEX.replace_all(&text, |c: &Captures| {
        if c[0].bytes().any(|b| b.is_ascii_digit()) {
            " ".to_string()
        } else {
            c[0].to_string()
        }
    });
    let text = MENTION.replace_all(&text, "$1 ");
    SPACE.replace_all(&text, " ").trim().to_string()
}

/// Removes code, URLs, e-mail addresses, file paths, hash strings, stack-trace
/// lines, quoted-reply lines and @-mentions, then collapses whitespace into
/// single spaces. Hex runs of 7+ characters are removed only when they contain
/// a digit, so words such as "deadbeef" or "effaced" survive.
pub fn strip_se_artifacts(body: &str) -> String {
    let mut current = strip_once(body);
    loop {
        let next = strip_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

/// Case-insensitive whole-word acronym table.
#[derive(Debug, Clone)]
pub struct AcronymDict {
    expansions: BTreeMap<String, String>,
    pattern: Option<Regex>,
}

impl Default for AcronymDict {
    fn default() -> Self {
        AcronymDict::from_pairs(std::iter::empty::<(String, String)>())
    }
}

impl AcronymDict {
    pub fn from_pairs<K: AsRef<str>, V: AsRef<str>>(pairs: impl IntoIterator<Item = (K, V)>) -> Self {
        let expansions: BTreeMap<String, String> = pairs
            .into_iter()
            .map(|(k, v)| (k.as_ref().trim().to_lowercase(), v.as_ref().trim().to_string()))
            .filter(|(k, _)| !k.is_empty())
            .collect();
        let mut keys: Vec<&String> = expansions.keys().collect();
        // Longest first so overlapping keys prefer the longer match.
        keys.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then(a.cmp(b)));
        let pattern = (!keys.is_empty()).then(|| {
            let alts: Vec<String> = keys.iter().map(|k| regex::escape(k)).collect();
            Regex::new(&format!(r"(?i)\b(?:{})\b", alts.join("|"))).unwrap()
        });
        AcronymDict { expansions, pattern }
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, TextprepError> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('\t').ok_or_else(|| TextprepError::Dictionary {
                path: origin.to_string(),
                line: i + 1,
                message: "expected ACRONYM<TAB>expansion".into(),
            })?;
            if k.trim().is_empty() || v.trim().is_empty() {
                return Err(TextprepError::Dictionary {
                    path: origin.to_string(),
                    line: i + 1,
                    message: "empty acronym or expansion".into(),
                });
            }
            pairs.push((k.to_string(), v.to_string()));
        }
        Ok(AcronymDict::from_pairs(pairs))
    }

    pub fn load(path: &Path) -> Result<Self, TextprepError> {
        let text = std::fs::read_to_string(path).map_err(|source| TextprepError::Io {
            path: path.display().to_string(),
            source,
        })?;
        AcronymDict::parse(&text, &path.display().to_string())
    }

    /// The dictionary shipped with the crate.
    pub fn seed() -> Self {
        AcronymDict::parse(SEED_ACRONYMS, "acronyms.tsv").expect("seed dictionary parses")
    }

    pub fn len(&self) -> usize {
        self.expansions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.expansions.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.expansions.get(&key.to_lowercase()).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.expansions.keys().map(String::as_str)
    }
}

pub fn expand_acronyms(text: &str, dict: &AcronymDict) -> String {
    match &dict.pattern {
        None => text.to_string(),
        Some(re) => re
            .replace_all(text, |c: &Captures| dict.get(&c[0]).unwrap_or(&c[0]).to_string())
            .into_owned(),
    }
}

fn keep_token(w: &str) -> bool {
    w.chars().any(char::is_alphabetic) && !w.chars().any(char::is_numeric)
}

/// Unicode word segmentation, lowercased. Contractions stay whole; any token
/// without a letter, or containing a digit, is dropped.
pub fn tokenize(text: &str) -> TokenStream {
    let normalized = text.replace(['\u{2019}', '\u{2018}'], "'");
    let tokens = normalized
        .unicode_words()
        .filter(|w| keep_token(w))
        .map(|w| w.trim_matches(|c: char| c == '\'' || c.is_whitespace()).to_lowercase())
        .filter(|w| !w.is_empty() && !w.chars().any(char::is_whitespace))
        .collect();
    TokenStream::new(tokens)
}

/// Strip, expand, tokenize.
pub fn prepare(body: &str, acronyms: &AcronymDict) -> TokenStream {
    tokenize(&expand_acronyms(&strip_se_artifacts(body), acronyms))
}
