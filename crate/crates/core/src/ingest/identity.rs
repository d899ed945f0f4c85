//! Developer identity resolution.
//!
//! Canonical ids are lowercase logins. Resolution order for an event actor:
//! alias map (login, then email, then display name), then the login itself,
//! then for commits the email and normalized-name heuristics learned from
//! commits that carry both a login and an email/name, and finally the email or
//! normalized name itself as a stand-alone identity.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::{keys, EventKind, IngestError, RawEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AliasKind {
    Login,
    Email,
    Name,
}

impl AliasKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AliasKind::Login => "login",
            AliasKind::Email => "email",
            AliasKind::Name => "name",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "login" => Some(AliasKind::Login),
            "email" => Some(AliasKind::Email),
            "name" => Some(AliasKind::Name),
            _ => None,
        }
    }

    fn normalize(self, value: &str) -> String {
        match self {
            AliasKind::Login | AliasKind::Email => value.trim().to_lowercase(),
            AliasKind::Name => normalize_name(value),
        }
    }
}

/// Lowercase, alphanumerics only.
pub fn normalize_name(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// A partition of aliases into canonical developer groups, read from
/// `canonical_login,alias_kind,alias_value` CSV rows.
#[derive(Debug, Clone, Default)]
pub struct AliasMap {
    lookup: BTreeMap<(AliasKind, String), String>,
    groups: BTreeMap<String, BTreeSet<(AliasKind, String)>>,
}

impl AliasMap {
    pub fn from_rows<'a>(
        rows: impl IntoIterator<Item = (&'a str, &'a str, &'a str)>,
    ) -> Result<Self, IngestError> {
        let mut map = AliasMap::default();
        for (line, (canonical, kind, value)) in rows.into_iter().enumerate() {
            let canonical = canonical.trim().to_lowercase();
            if canonical.is_empty() {
                return Err(IngestError::AliasMap(format!("row {}: empty canonical login", line + 1)));
            }
            let kind = AliasKind::parse(kind).ok_or_else(|| {
                IngestError::AliasMap(format!("row {}: unknown alias kind `{kind}`", line + 1))
            })?;
            let value = kind.normalize(value);
            if value.is_empty() {
                continue;
            }
            map.insert(canonical.clone(), AliasKind::Login, canonical.clone())?;
            map.insert(canonical, kind, value)?;
        }
        Ok(map)
    }

    fn insert(&mut self, canonical: String, kind: AliasKind, value: String) -> Result<(), IngestError> {
        match self.lookup.get(&(kind, value.clone())) {
            Some(existing) if *existing != canonical => {
                return Err(IngestError::AliasMap(format!(
                    "{} `{value}` appears in the groups of both `{existing}` and `{canonical}`",
                    kind.as_str()
                )));
            }
            Some(_) => {}
            None => {
                self.lookup.insert((kind, value.clone()), canonical.clone());
            }
        }
        self.groups.entry(canonical).or_default().insert((kind, value));
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_path(path)
            .map_err(|e| IngestError::AliasMap(format!("{}: {e}", path.display())))?;
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| IngestError::AliasMap(format!("{}: {e}", path.display())))?;
            if rec.len() != 3 {
                return Err(IngestError::AliasMap(format!(
                    "{}: row {} has {} fields, expected 3",
                    path.display(),
                    i + 1,
                    rec.len()
                )));
            }
            if i == 0 && rec.get(0) == Some("canonical_login") {
                continue;
            }
            rows.push((rec[0].to_string(), rec[1].to_string(), rec[2].to_string()));
        }
        Self::from_rows(rows.iter().map(|(a, b, c)| (a.as_str(), b.as_str(), c.as_str())))
    }

    pub fn lookup(&self, kind: AliasKind, value: &str) -> Option<&str> {
        self.lookup.get(&(kind, kind.normalize(value))).map(String::as_str)
    }

    pub fn groups(&self) -> impl Iterator<Item = (&String, &BTreeSet<(AliasKind, String)>)> {
        self.groups.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// Resolves raw actor strings to canonical logins for one project.
#[derive(Debug, Clone, Default)]
pub struct IdentityResolver {
    aliases: AliasMap,
    email_to_login: BTreeMap<String, String>,
    name_to_login: BTreeMap<String, String>,
}

impl IdentityResolver {
    /// Learns the email and name heuristics from `events`. Keys seen with two
    /// different logins are ambiguous and dropped.
    pub fn learn(events: &[RawEvent], aliases: Option<&AliasMap>) -> Self {
        let aliases = aliases.cloned().unwrap_or_default();
        let mut emails: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut names: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut logins: BTreeSet<String> = BTreeSet::new();

        for e in events {
            if e.kind == EventKind::Commit {
                if let Some(login) = e.text(keys::AUTHOR_LOGIN) {
                    let login = login.to_lowercase();
                    if let Some(email) = e.text(keys::AUTHOR_EMAIL) {
                        emails.entry(AliasKind::Email.normalize(email)).or_default().insert(login.clone());
                    }
                    if let Some(name) = e.text(keys::AUTHOR_NAME) {
                        names.entry(normalize_name(name)).or_default().insert(login.clone());
                    }
                    logins.insert(login);
                }
            } else {
                logins.insert(e.actor.to_lowercase());
            }
        }
        for login in &logins {
            names.entry(normalize_name(login)).or_default().insert(login.clone());
        }
        let unambiguous = |m: BTreeMap<String, BTreeSet<String>>| {
            m.into_iter()
                .filter(|(k, v)| !k.is_empty() && v.len() == 1)
                .map(|(k, v)| (k, v.into_iter().next().unwrap_or_default()))
                .collect()
        };
        IdentityResolver {
            aliases,
            email_to_login: unambiguous(emails),
            name_to_login: unambiguous(names),
        }
    }

    fn canonical(&self, login: &str) -> String {
        self.aliases
            .lookup(AliasKind::Login, login)
            .map(str::to_string)
            .unwrap_or_else(|| login.trim().to_lowercase())
    }

    /// Canonical id for a plain login (actors, target authors, mentions).
    pub fn resolve_login(&self, login: &str) -> String {
        self.canonical(login)
    }

    fn resolve_commit(&self, e: &RawEvent) -> String {
        let login = e.text(keys::AUTHOR_LOGIN);
        let email = e.text(keys::AUTHOR_EMAIL);
        let name = e.text(keys::AUTHOR_NAME);
        let from_alias = login
            .and_then(|l| self.aliases.lookup(AliasKind::Login, l))
            .or_else(|| email.and_then(|m| self.aliases.lookup(AliasKind::Email, m)))
            .or_else(|| name.and_then(|n| self.aliases.lookup(AliasKind::Name, n)));
        if let Some(c) = from_alias {
            return c.to_string();
        }
        if let Some(login) = login {
            return self.canonical(login);
        }
        if let Some(l) = email.and_then(|m| self.email_to_login.get(&AliasKind::Email.normalize(m))) {
            return self.canonical(l);
        }
        if let Some(l) = name.and_then(|n| self.name_to_login.get(&normalize_name(n))) {
            return self.canonical(l);
        }
        match (email, name) {
            (Some(m), _) => AliasKind::Email.normalize(m),
            (None, Some(n)) if !normalize_name(n).is_empty() => normalize_name(n),
            _ => e.actor.to_lowercase(),
        }
    }

    pub fn resolve_event(&self, mut e: RawEvent) -> RawEvent {
        e.actor = if e.kind == EventKind::Commit {
            self.resolve_commit(&e)
        } else {
            self.canonical(&e.actor)
        };
        if let Some(author) = e.target_author().map(str::to_string) {
            e.payload.insert(keys::TARGET_AUTHOR.into(), self.canonical(&author).into());
        }
        e
    }
}

/// Replaces every actor (and target author) by its canonical login.
pub fn resolve_identities(events: Vec<RawEvent>, aliases: Option<&AliasMap>) -> Vec<RawEvent> {
    let resolver = IdentityResolver::learn(&events, aliases);
    events.into_iter().map(|e| resolver.resolve_event(e)).collect()
}
