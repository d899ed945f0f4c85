//! Word-category dictionaries and per-corpus category profiles.
//!
//! Dictionary file format:
//!
//! ```text
//! # comment
//! [articles]
//! a
//! an
//! the
//! [auxiliary_verbs]
//! be*
//! ```
//!
//! All eight function-word sections must be present. A trailing `*` makes a
//! prefix pattern. Patterns must be lowercase.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::textprep::TokenStream;

pub const CATEGORIES: [&str; 8] = [
    "personal_pronouns",
    "impersonal_pronouns",
    "articles",
    "prepositions",
    "auxiliary_verbs",
    "common_adverbs",
    "conjunctions",
    "negations",
];

pub const SUMMARY_NAMES: [&str; 4] = ["analytic", "clout", "authentic", "tone"];

const BUNDLED: &str = include_str!("../data/function_words.dic");

pub const SELF_WORDS: &[&str] = &["i", "me", "my", "mine", "myself", "i'm", "i've", "i'll", "i'd"];
pub const SOCIAL_WORDS: &[&str] = &[
    "we", "us", "our", "ours", "ourselves", "we're", "we've", "we'll", "we'd", "let's", "you", "your", "yours",
    "yourself", "yourselves", "you're", "you've", "you'll", "you'd", "they", "them", "their", "theirs",
];
pub const TONE_POSITIVE: &[&str] = &[
    "good", "great", "nice", "thanks", "thank", "love", "awesome", "excellent", "happy", "glad", "cool", "perfect",
    "appreciate", "appreciated", "welcome", "helpful", "wonderful", "amazing", "better", "best", "fantastic",
    "agree", "elegant", "yay", "pleased", "impressive",
];
pub const TONE_NEGATIVE: &[&str] = &[
    "bad", "wrong", "broken", "fail", "fails", "failed", "failing", "failure", "ugly", "hate", "annoying",
    "terrible", "awful", "worse", "worst", "sad", "sorry", "confusing", "confused", "frustrating", "frustrated",
    "angry", "stupid", "weird", "horrible", "painful", "mess", "disappointed",
];

pub fn is_tone_word(w: &str) -> bool {
    TONE_POSITIVE.contains(&w) || TONE_NEGATIVE.contains(&w)
}

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{path}: missing category `{category}`")]
    MissingCategory { path: String, category: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("profile undefined: corpus has no words")]
    EmptyCorpus,
    #[error("summary import: {0}")]
    Import(String),
    #[error("summary import: no row for corpus `{0}`")]
    MissingSummary(String),
    #[error("summary import: corpus `{corpus}` has negative {field} ({value})")]
    NegativeSummary { corpus: String, field: &'static str, value: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct PatternSet {
    literals: BTreeSet<String>,
    prefixes: BTreeSet<String>,
}

impl PatternSet {
    fn matches(&self, w: &str) -> bool {
        self.literals.contains(w) || self.prefixes.iter().any(|p| w.starts_with(p.as_str()))
    }
}

/// The eight function-word categories, in the fixed order of [`CATEGORIES`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryDictionary {
    sets: Vec<PatternSet>,
}

impl CategoryDictionary {
    pub fn parse(text: &str, origin: &str) -> Result<Self, LexiconError> {
        let err = |line: usize, message: String| LexiconError::Parse {
            path: origin.to_string(),
            line,
            message,
        };
        let mut sets: Vec<Option<PatternSet>> = vec![None; CATEGORIES.len()];
        let mut current: Option<usize> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                let idx = CATEGORIES
                    .iter()
                    .position(|c| *c == name)
                    .ok_or_else(|| err(line_no, format!("unknown category `{name}`")))?;
                sets[idx].get_or_insert_with(PatternSet::default);
                current = Some(idx);
                continue;
            }
            let idx = current.ok_or_else(|| err(line_no, "pattern before any [category] header".into()))?;
            if line != line.to_lowercase() {
                return Err(err(line_no, format!("pattern `{line}` is not lowercase")));
            }
            if line.chars().any(char::is_whitespace) {
                return Err(err(line_no, format!("pattern `{line}` contains whitespace")));
            }
            let set = sets[idx].get_or_insert_with(PatternSet::default);
            match line.strip_suffix('*') {
                Some(prefix) if !prefix.is_empty() && !prefix.contains('*') => {
                    set.prefixes.insert(prefix.to_string());
                }
                None if !line.contains('*') => {
                    set.literals.insert(line.to_string());
                }
                _ => return Err(err(line_no, format!("malformed wildcard `{line}`"))),
            }
        }
        let sets = sets
            .into_iter()
            .zip(CATEGORIES)
            .map(|(s, name)| {
                s.ok_or_else(|| LexiconError::MissingCategory {
                    path: origin.to_string(),
                    category: name.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CategoryDictionary { sets })
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        CategoryDictionary::parse(&text, &path.display().to_string())
    }

    /// The open ~400-word dictionary shipped with the crate.
    pub fn bundled() -> Self {
        CategoryDictionary::parse(BUNDLED, "function_words.dic").expect("bundled dictionary parses")
    }

    pub fn bundled_text() -> &'static str {
        BUNDLED
    }

    pub fn categories(&self) -> [&'static str; 8] {
        CATEGORIES
    }

    pub fn matches(&self, category: usize, word: &str) -> bool {
        self.sets[category].matches(word)
    }

    pub fn pattern_count(&self, category: usize) -> usize {
        self.sets[category].literals.len() + self.sets[category].prefixes.len()
    }

    /// Literal words of a category (wildcards excluded).
    pub fn literals(&self, category: usize) -> impl Iterator<Item = &str> {
        self.sets[category].literals.iter().map(String::as_str)
    }

    /// Whether `word` matches any category.
    pub fn is_function_word(&self, word: &str) -> bool {
        (0..CATEGORIES.len()).any(|c| self.matches(c, word))
    }
}

fn frequencies(tokens: &TokenStream) -> HashMap<&str, usize> {
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for t in &tokens.tokens {
        *freq.entry(t.as_str()).or_default() += 1;
    }
    freq
}

/// Percent of all tokens matching each category.
pub fn category_percentages(tokens: &TokenStream, dict: &CategoryDictionary) -> Result<[f64; 8], LexiconError> {
    if tokens.total_count == 0 {
        return Err(LexiconError::EmptyCorpus);
    }
    let freq = frequencies(tokens);
    let mut counts = [0usize; 8];
    for (w, n) in &freq {
        for (c, count) in counts.iter_mut().enumerate() {
            if dict.matches(c, w) {
                *count += n;
            }
        }
    }
    let total = tokens.total_count as f64;
    Ok(counts.map(|c| 100.0 * c as f64 / total))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SummaryScores {
    pub analytic: f64,
    pub clout: f64,
    pub authentic: f64,
    pub tone: f64,
}

impl SummaryScores {
    pub fn to_array(self) -> [f64; 4] {
        [self.analytic, self.clout, self.authentic, self.tone]
    }

    fn validate(&self, corpus: &str) -> Result<(), LexiconError> {
        for (field, value) in SUMMARY_NAMES.into_iter().zip(self.to_array()) {
            if value.is_nan() || value < 0.0 {
                return Err(LexiconError::NegativeSummary {
                    corpus: corpus.to_string(),
                    field,
                    value,
                });
            }
        }
        Ok(())
    }
}

/// Externally produced summary scores keyed by corpus id, read from
/// `corpus_id,analytic,clout,authentic,tone`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SummaryTable {
    rows: BTreeMap<String, SummaryScores>,
}

#[derive(Deserialize)]
struct SummaryRow {
    corpus_id: String,
    analytic: f64,
    clout: f64,
    authentic: f64,
    tone: f64,
}

impl SummaryTable {
    pub fn from_reader(r: impl std::io::Read) -> Result<Self, LexiconError> {
        let mut rows = BTreeMap::new();
        for (i, rec) in csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r).deserialize().enumerate() {
            let row: SummaryRow = rec.map_err(|e| LexiconError::Import(format!("row {}: {e}", i + 1)))?;
            let scores = SummaryScores {
                analytic: row.analytic,
                clout: row.clout,
                authentic: row.authentic,
                tone: row.tone,
            };
            scores.validate(&row.corpus_id)?;
            rows.insert(row.corpus_id, scores);
        }
        Ok(SummaryTable { rows })
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let f = std::fs::File::open(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        SummaryTable::from_reader(f)
    }

    pub fn get(&self, corpus_id: &str) -> Option<SummaryScores> {
        self.rows.get(corpus_id).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SummaryScorer {
    /// Open approximation computed from the tokens.
    Approx,
    Import(SummaryTable),
}

impl SummaryScorer {
    pub fn mode(&self) -> &'static str {
        match self {
            SummaryScorer::Approx => "approx",
            SummaryScorer::Import(_) => "import",
        }
    }
}

fn share(freq: &HashMap<&str, usize>, words: &[&str], total: f64) -> f64 {
    100.0 * words.iter().map(|w| freq.get(w).copied().unwrap_or(0)).sum::<usize>() as f64 / total
}

/// Open approximation of the four summary variables. Inputs are percentages of
/// total words; `function_pct` follows [`CATEGORIES`].
///
/// * analytic = clamp(30 + articles + prepositions - personal - impersonal
///   - auxiliary - conjunctions - adverbs - negations, 0, 100)
/// * clout = 50 + 50 (social - self) / (social + self + 1)
/// * authentic = 100 (self + 0.5) / (self + social + negations + 1)
/// * tone = 50 + 50 (positive - negative) / (positive + negative + 1)
///
/// These are not the licensed tool's formulas.
pub fn approx_summary(tokens: &TokenStream, function_pct: &[f64; 8]) -> Result<SummaryScores, LexiconError> {
    if tokens.total_count == 0 {
        return Err(LexiconError::EmptyCorpus);
    }
    let total = tokens.total_count as f64;
    let freq = frequencies(tokens);
    let [ppron, ipron, article, prep, auxverb, adverb, conj, negate] = *function_pct;
    let analytic = (30.0 + article + prep - ppron - ipron - auxverb - conj - adverb - negate).clamp(0.0, 100.0);
    let self_ = share(&freq, SELF_WORDS, total);
    let social = share(&freq, SOCIAL_WORDS, total);
    let pos = share(&freq, TONE_POSITIVE, total);
    let neg = share(&freq, TONE_NEGATIVE, total);
    Ok(SummaryScores {
        analytic,
        clout: 50.0 + 50.0 * (social - self_) / (social + self_ + 1.0),
        authentic: 100.0 * (self_ + 0.5) / (self_ + social + negate + 1.0),
        tone: 50.0 + 50.0 * (pos - neg) / (pos + neg + 1.0),
    })
}

pub fn summary_scores(
    tokens: &TokenStream,
    function_pct: &[f64; 8],
    scorer: &SummaryScorer,
    corpus_id: &str,
) -> Result<SummaryScores, LexiconError> {
    match scorer {
        SummaryScorer::Approx => approx_summary(tokens, function_pct),
        SummaryScorer::Import(table) => table
            .get(corpus_id)
            .ok_or_else(|| LexiconError::MissingSummary(corpus_id.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryProfile {
    pub function_pct: [f64; 8],
    pub summary: SummaryScores,
    pub total_words: usize,
}

impl CategoryProfile {
    /// The twelve values compared by LSM: eight categories, then the four
    /// summary scores.
    pub fn values(&self) -> [f64; 12] {
        let mut v = [0.0; 12];
        v[..8].copy_from_slice(&self.function_pct);
        v[8..].copy_from_slice(&self.summary.to_array());
        v
    }
}

pub fn score_corpus(
    tokens: &TokenStream,
    dict: &CategoryDictionary,
    scorer: &SummaryScorer,
    corpus_id: &str,
) -> Result<CategoryProfile, LexiconError> {
    let function_pct = category_percentages(tokens, dict)?;
    let summary = summary_scores(tokens, &function_pct, scorer, corpus_id)?;
    Ok(CategoryProfile {
        function_pct,
        summary,
        total_words: tokens.total_count,
    })
}
