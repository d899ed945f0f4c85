use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{filter_cross_status, ConversationThread, Side};
use crate::status::StatusLookup;
use crate::textprep::{expand_acronyms, strip_se_artifacts, tokenize, AcronymDict, TokenStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusLine {
    pub thread: String,
    #[serde(with = "crate::timefmt")]
    pub timestamp: DateTime<Utc>,
    /// Cleaned, acronym-expanded text.
    pub text: String,
}

/// Cross-status corpora by side, plus the single-status corpora used for the
/// three-corpora comparison.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusTriple {
    pub cross_elite: Vec<CorpusLine>,
    pub cross_nonelite: Vec<CorpusLine>,
    pub within_elite: Vec<CorpusLine>,
    pub within_nonelite: Vec<CorpusLine>,
}

impl CorpusTriple {
    pub const FILE_NAMES: [&'static str; 4] = [
        "cross_elite.txt",
        "cross_nonelite.txt",
        "within_elite.txt",
        "within_nonelite.txt",
    ];

    pub fn parts(&self) -> [&[CorpusLine]; 4] {
        [&self.cross_elite, &self.cross_nonelite, &self.within_elite, &self.within_nonelite]
    }

    pub fn cross(&self, side: Side) -> &[CorpusLine] {
        match side {
            Side::Elite => &self.cross_elite,
            Side::NonElite => &self.cross_nonelite,
        }
    }

    pub fn within(&self, side: Side) -> &[CorpusLine] {
        match side {
            Side::Elite => &self.within_elite,
            Side::NonElite => &self.within_nonelite,
        }
    }

    /// `<thread-id>\t<timestamp>\t<text>` per line.
    pub fn render(lines: &[CorpusLine]) -> String {
        let mut out = String::new();
        for l in lines {
            out.push_str(&l.thread);
            out.push('\t');
            out.push_str(&crate::timefmt::format(&l.timestamp));
            out.push('\t');
            out.push_str(&l.text);
            out.push('\n');
        }
        out
    }

    /// Inverse of [`CorpusTriple::render`]; malformed lines are skipped.
    pub fn parse(text: &str) -> Vec<CorpusLine> {
        text.lines()
            .filter_map(|line| {
                let mut parts = line.splitn(3, '\t');
                let thread = parts.next()?.to_string();
                let timestamp = crate::timefmt::parse(parts.next()?).ok()?;
                let text = parts.next()?.to_string();
                Some(CorpusLine { thread, timestamp, text })
            })
            .collect()
    }

    pub fn tokens(lines: &[CorpusLine]) -> TokenStream {
        let mut out = TokenStream::default();
        for l in lines {
            out.extend(tokenize(&l.text));
        }
        out
    }
}

/// Routes each thread's messages into the four corpora. Threads are taken in
/// id order and messages in time order. Messages of mixed-status threads go
/// to the cross corpora only if admitted by [`filter_cross_status`]; threads
/// whose messages all come from one status feed the within corpora.
pub fn aggregate_corpora<L: StatusLookup + ?Sized>(
    threads: &[ConversationThread],
    lookup: &L,
    acronyms: &AcronymDict,
) -> CorpusTriple {
    let mut sorted: Vec<&ConversationThread> = threads.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = CorpusTriple::default();
    for th in sorted {
        let line = |i: usize| {
            let m = &th.messages[i];
            let text = expand_acronyms(&strip_se_artifacts(&m.body), acronyms);
            (!text.is_empty()).then(|| CorpusLine {
                thread: th.id.to_string(),
                timestamp: m.timestamp,
                text,
            })
        };
        match filter_cross_status(th, lookup) {
            Some(admitted) => {
                for a in admitted {
                    if let Some(l) = line(a.index) {
                        match a.side {
                            Side::Elite => out.cross_elite.push(l),
                            Side::NonElite => out.cross_nonelite.push(l),
                        }
                    }
                }
            }
            None => {
                let side: Side = lookup.status(&th.messages[0].author, th.messages[0].timestamp).into();
                let single = th
                    .messages
                    .iter()
                    .all(|m| Side::from(lookup.status(&m.author, m.timestamp)) == side);
                if !single {
                    continue;
                }
                let target = match side {
                    Side::Elite => &mut out.within_elite,
                    Side::NonElite => &mut out.within_nonelite,
                };
                target.extend((0..th.messages.len()).filter_map(line));
            }
        }
    }
    out
}
