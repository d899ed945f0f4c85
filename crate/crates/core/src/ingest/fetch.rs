//! Paginated REST client that downloads a repository into the API-export
//! format.
//!
//! Pages are written to `out/pages/<endpoint>/NNNN.json` as they arrive and the
//! next page URL of every unfinished endpoint is recorded in `out/cursor.json`,
//! so an interrupted fetch resumes where it stopped. Once every endpoint is
//! complete the pages are assembled into `out/api_export.json`. Requests are
//! strictly sequential (one in flight per host).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const DEFAULT_API_BASE: &str = "https://api.github.com";

const PAGED_ENDPOINTS: [(&str, &str); 6] = [
    ("contributors", "contributors?per_page={pp}&anon=0"),
    ("issues", "issues?state=all&per_page={pp}"),
    ("issue_comments", "issues/comments?per_page={pp}"),
    ("review_comments", "pulls/comments?per_page={pp}"),
    ("commits", "commits?per_page={pp}"),
    ("commit_comments", "comments?per_page={pp}"),
];

#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error("authentication failed ({status}) for {url}")]
    Auth { status: u16, url: String },
    #[error("rate limit exhausted with no reset time for {url}; resume from {cursor}")]
    RateLimitExhausted { url: String, cursor: String },
    #[error("partial or malformed page from {url}: {message}; resume from {cursor}")]
    PartialPage {
        url: String,
        message: String,
        cursor: String,
    },
    #[error("HTTP {status} from {url}; resume from {cursor}")]
    Status { status: u16, url: String, cursor: String },
    #[error("transport error for {url}: {message}")]
    Transport { url: String, message: String },
    #[error("repository locator `{0}` is not of the form owner/name")]
    BadRemote(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FetchError + '_ {
    move |source| FetchError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone)]
pub struct FetchConfig {
    pub api_base: String,
    pub per_page: u32,
    /// Look up `/users/{login}` for every contributor to get account ages.
    pub fetch_accounts: bool,
    pub max_retries: u32,
    pub user_agent: String,
}

impl Default for FetchConfig {
    fn default() -> Self {
        FetchConfig {
            api_base: DEFAULT_API_BASE.to_string(),
            per_page: 100,
            fetch_accounts: true,
            max_retries: 5,
            user_agent: concat!("lsm-core/", env!("CARGO_PKG_VERSION")).to_string(),
        }
    }
}

/// Resumption state persisted between runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Cursor {
    /// Next URL per endpoint still in progress.
    pub pending: BTreeMap<String, String>,
    pub completed: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FetchSummary {
    pub requests: usize,
    pub records: BTreeMap<String, usize>,
    pub waited: Duration,
}

struct Page {
    status: u16,
    headers: BTreeMap<String, String>,
    body: String,
}

pub struct Fetcher<'a> {
    agent: ureq::Agent,
    token: String,
    config: FetchConfig,
    out: PathBuf,
    sleep: Box<dyn Fn(Duration) + 'a>,
    now: Box<dyn Fn() -> u64 + 'a>,
    summary: FetchSummary,
}

impl<'a> Fetcher<'a> {
    pub fn new(token: &str, out: &Path, config: FetchConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        Fetcher {
            agent,
            token: token.to_string(),
            config,
            out: out.to_path_buf(),
            sleep: Box::new(std::thread::sleep),
            now: Box::new(|| {
                SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            }),
            summary: FetchSummary::default(),
        }
    }

    /// Replaces the wall clock and sleeping, for replayed fixtures.
    pub fn with_clock(mut self, now: impl Fn() -> u64 + 'a, sleep: impl Fn(Duration) + 'a) -> Self {
        self.now = Box::new(now);
        self.sleep = Box::new(sleep);
        self
    }

    fn cursor_path(&self) -> PathBuf {
        self.out.join("cursor.json")
    }

    fn load_cursor(&self) -> Result<Cursor, FetchError> {
        let path = self.cursor_path();
        if !path.exists() {
            return Ok(Cursor::default());
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| FetchError::Io {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })
    }

    fn save_cursor(&self, cursor: &Cursor) -> Result<(), FetchError> {
        if !self.out.exists() {
            return Ok(());
        }
        let path = self.cursor_path();
        let text = serde_json::to_string_pretty(cursor).expect("cursor serializes");
        fs::write(&path, text).map_err(io_err(&path))
    }

    fn get(&mut self, url: &str) -> Result<Page, FetchError> {
        let mut attempt = 0;
        loop {
            self.summary.requests += 1;
            let mut req = self
                .agent
                .get(url)
                .header("Accept", "application/vnd.github+json")
                .header("User-Agent", &self.config.user_agent);
            if !self.token.is_empty() {
                req = req.header("Authorization", &format!("Bearer {}", self.token));
            }
            let mut resp = req.call().map_err(|e| FetchError::Transport {
                url: url.to_string(),
                message: e.to_string(),
            })?;
            let status = resp.status().as_u16();
            let headers: BTreeMap<String, String> = resp
                .headers()
                .iter()
                .filter_map(|(k, v)| Some((k.as_str().to_ascii_lowercase(), v.to_str().ok()?.to_string())))
                .collect();
            let body = resp.body_mut().read_to_string().map_err(|e| FetchError::Transport {
                url: url.to_string(),
                message: e.to_string(),
            })?;

            if status == 401 {
                return Err(FetchError::Auth {
                    status,
                    url: url.to_string(),
                });
            }
            let limited = status == 429
                || (status == 403 && headers.get("x-ratelimit-remaining").map(String::as_str) == Some("0"));
            if limited {
                let wait = headers
                    .get("retry-after")
                    .and_then(|s| s.parse::<u64>().ok())
                    .or_else(|| self.until_reset(&headers));
                match wait {
                    Some(secs) if attempt < self.config.max_retries => {
                        attempt += 1;
                        self.wait(secs);
                        continue;
                    }
                    _ => {
                        return Err(FetchError::RateLimitExhausted {
                            url: url.to_string(),
                            cursor: self.cursor_path().display().to_string(),
                        })
                    }
                }
            }
            if status == 403 {
                return Err(FetchError::Auth {
                    status,
                    url: url.to_string(),
                });
            }
            // Proactive wait when the budget is spent but the request succeeded.
            if headers.get("x-ratelimit-remaining").map(String::as_str) == Some("0") {
                if let Some(secs) = self.until_reset(&headers) {
                    self.wait(secs);
                }
            }
            return Ok(Page { status, headers, body });
        }
    }

    fn until_reset(&self, headers: &BTreeMap<String, String>) -> Option<u64> {
        let reset = headers.get("x-ratelimit-reset")?.parse::<u64>().ok()?;
        Some(reset.saturating_sub((self.now)()) + 1)
    }

    fn wait(&mut self, secs: u64) {
        let d = Duration::from_secs(secs);
        log::info!("rate limited; waiting {secs}s");
        self.summary.waited += d;
        (self.sleep)(d);
    }

    fn ensure_out(&self) -> Result<(), FetchError> {
        fs::create_dir_all(self.out.join("pages")).map_err(io_err(&self.out))
    }

    fn write_json(&self, rel: &Path, body: &Value) -> Result<(), FetchError> {
        self.ensure_out()?;
        let path = self.out.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, serde_json::to_string(body).expect("json")).map_err(io_err(&path))
    }

    fn page_error(&self, url: &str, message: String, status: Option<u16>) -> FetchError {
        let cursor = self.cursor_path().display().to_string();
        match status {
            Some(status) => FetchError::Status {
                status,
                url: url.to_string(),
                cursor,
            },
            None => FetchError::PartialPage {
                url: url.to_string(),
                message,
                cursor,
            },
        }
    }

    fn fetch_paged(&mut self, name: &str, start: String, cursor: &mut Cursor) -> Result<(), FetchError> {
        let dir = self.out.join("pages").join(name);
        let mut page_no = fs::read_dir(&dir).map(|d| d.count()).unwrap_or(0);
        let mut next = Some(start);
        while let Some(url) = next {
            let page = self.get(&url)?;
            if page.status == 404 || page.status == 204 {
                // Empty repositories answer some list endpoints this way.
                break;
            }
            if !(200..300).contains(&page.status) {
                cursor.pending.insert(name.to_string(), url.clone());
                self.save_cursor(cursor)?;
                return Err(self.page_error(&url, String::new(), Some(page.status)));
            }
            let items: Value = match serde_json::from_str(&page.body) {
                Ok(v @ Value::Array(_)) => v,
                Ok(_) => Value::Array(Vec::new()),
                Err(e) => {
                    cursor.pending.insert(name.to_string(), url.clone());
                    self.save_cursor(cursor)?;
                    return Err(self.page_error(&url, e.to_string(), None));
                }
            };
            page_no += 1;
            *self.summary.records.entry(name.to_string()).or_default() +=
                items.as_array().map_or(0, Vec::len);
            self.write_json(&PathBuf::from(format!("pages/{name}/{page_no:04}.json")), &items)?;
            next = page.headers.get("link").and_then(|l| next_link(l));
            match &next {
                Some(n) => cursor.pending.insert(name.to_string(), n.clone()),
                None => cursor.pending.remove(name),
            };
            self.save_cursor(cursor)?;
        }
        cursor.pending.remove(name);
        cursor.completed.push(name.to_string());
        self.save_cursor(cursor)
    }

    pub fn run(mut self, remote: &str) -> Result<FetchSummary, FetchError> {
        let (owner, repo) = remote
            .split_once('/')
            .filter(|(o, r)| !o.is_empty() && !r.is_empty() && !r.contains('/'))
            .ok_or_else(|| FetchError::BadRemote(remote.to_string()))?;
        let base = format!("{}/repos/{owner}/{repo}", self.config.api_base.trim_end_matches('/'));
        let mut cursor = self.load_cursor()?;

        if !cursor.completed.iter().any(|c| c == "repo") {
            let page = self.get(&base)?;
            if !(200..300).contains(&page.status) {
                return Err(self.page_error(&base, String::new(), Some(page.status)));
            }
            let meta: Value = serde_json::from_str(&page.body)
                .map_err(|e| self.page_error(&base, e.to_string(), None))?;
            self.write_json(Path::new("pages/repo.json"), &meta)?;
            cursor.completed.push("repo".into());
            self.save_cursor(&cursor)?;
        }

        let pp = self.config.per_page;
        for (name, path) in PAGED_ENDPOINTS {
            if cursor.completed.iter().any(|c| c == name) {
                continue;
            }
            let start = cursor
                .pending
                .get(name)
                .cloned()
                .unwrap_or_else(|| format!("{base}/{}", path.replace("{pp}", &pp.to_string())));
            self.fetch_paged(name, start, &mut cursor)?;
        }

        let mut export = serde_json::Map::new();
        export.insert("repo".into(), read_json(&self.out.join("pages/repo.json"))?);
        for (name, _) in PAGED_ENDPOINTS {
            export.insert(name.into(), Value::Array(self.collect_pages(name)?));
        }

        if self.config.fetch_accounts && !cursor.completed.iter().any(|c| c == "users") {
            let logins: Vec<String> = export["contributors"]
                .as_array()
                .into_iter()
                .flatten()
                .filter_map(|c| c.get("login").and_then(Value::as_str).map(str::to_string))
                .collect();
            for login in logins {
                let rel = PathBuf::from(format!("pages/users/{login}.json"));
                if self.out.join(&rel).exists() {
                    continue;
                }
                let url = format!("{}/users/{login}", self.config.api_base.trim_end_matches('/'));
                let page = self.get(&url)?;
                if !(200..300).contains(&page.status) {
                    continue;
                }
                let user: Value = serde_json::from_str(&page.body)
                    .map_err(|e| self.page_error(&url, e.to_string(), None))?;
                self.write_json(&rel, &user)?;
            }
            cursor.completed.push("users".into());
            self.save_cursor(&cursor)?;
        }
        if let Some(Value::Array(contributors)) = export.get_mut("contributors") {
            for c in contributors.iter_mut() {
                let Some(login) = c.get("login").and_then(Value::as_str).map(str::to_string) else {
                    continue;
                };
                let user_path = self.out.join(format!("pages/users/{login}.json"));
                if user_path.exists() {
                    if let Some(created) = read_json(&user_path)?.get("created_at").cloned() {
                        c["created_at"] = created;
                    }
                }
            }
        }

        self.ensure_out()?;
        let path = self.out.join("api_export.json");
        let text = serde_json::to_string_pretty(&Value::Object(export)).expect("json");
        fs::write(&path, text).map_err(io_err(&path))?;
        self.save_cursor(&cursor)?;
        Ok(self.summary)
    }

    fn collect_pages(&self, name: &str) -> Result<Vec<Value>, FetchError> {
        let dir = self.out.join("pages").join(name);
        let mut files: Vec<PathBuf> = match fs::read_dir(&dir) {
            Ok(rd) => rd.filter_map(|e| e.ok().map(|e| e.path())).collect(),
            Err(_) => return Ok(Vec::new()),
        };
        files.sort();
        let mut out = Vec::new();
        for f in files {
            if let Value::Array(items) = read_json(&f)? {
                out.extend(items);
            }
        }
        Ok(out)
    }
}

fn read_json(path: &Path) -> Result<Value, FetchError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| FetchError::Io {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })
}

/// The `rel="next"` target of an RFC 8288 `Link` header.
pub fn next_link(header: &str) -> Option<String> {
    header.split(',').find_map(|part| {
        let (url, params) = part.split_once(';')?;
        let is_next = params
            .split(';')
            .any(|p| matches!(p.trim(), "rel=\"next\"" | "rel=next"));
        is_next.then(|| url.trim().trim_start_matches('<').trim_end_matches('>').to_string())
    })
}

/// Downloads `remote` (`owner/name`) into `out`.
pub fn fetch_project(remote: &str, token: &str, out: &Path, config: FetchConfig) -> Result<FetchSummary, FetchError> {
    Fetcher::new(token, out, config).run(remote)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_next_link() {
        let h = r#"<https://api.x/r?page=2>; rel="next", <https://api.x/r?page=5>; rel="last""#;
        assert_eq!(next_link(h).as_deref(), Some("https://api.x/r?page=2"));
        let last = r#"<https://api.x/r?page=1>; rel="prev", <https://api.x/r?page=1>; rel="first""#;
        assert_eq!(next_link(last), None);
    }

    #[test]
    fn rejects_bad_remote() {
        let dir = tempfile::tempdir().unwrap();
        let err = fetch_project("just-a-name", "t", dir.path(), FetchConfig::default()).unwrap_err();
        assert!(matches!(err, FetchError::BadRemote(_)));
    }
}
