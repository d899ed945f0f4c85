//! Conversation threads and cross-status corpora.

mod corpus;
mod filter;
mod thread;

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::ingest::{TargetRef, ThreadKind};
use crate::status::Status;

pub use corpus::{aggregate_corpora, CorpusLine, CorpusTriple};
pub use filter::{filter_cross_status, Admitted};
pub use thread::{build_threads, extract_mentions, BotFilter, BuildStats, Mentions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Elite,
    NonElite,
}

impl From<Status> for Side {
    fn from(s: Status) -> Side {
        match s {
            Status::Elite => Side::Elite,
            Status::NonElite => Side::NonElite,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    /// Source id (issue/PR id for the opening post, else the comment id).
    pub id: String,
    pub author: String,
    #[serde(with = "crate::timefmt")]
    pub timestamp: DateTime<Utc>,
    pub body: String,
    /// Mentioned developers that resolve to the project roster.
    pub mentions: BTreeSet<String>,
    /// Handles that did not resolve; kept for reference, never used for routing.
    pub unresolved_mentions: BTreeSet<String>,
    pub thread: TargetRef,
    pub is_initiator: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationThread {
    pub id: TargetRef,
    pub kind: ThreadKind,
    pub messages: Vec<Message>,
}

impl ConversationThread {
    pub fn participants(&self) -> BTreeSet<&str> {
        self.messages.iter().map(|m| m.author.as_str()).collect()
    }
}
