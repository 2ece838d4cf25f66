use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Provenance, TranslationProvider, TranslationRequest, TranslationResult};
use crate::error::{Error, Result};

/// Environment variable forwarded as a bearer token when set.
pub const TOKEN_ENV: &str = "CSAUG_HTTP_TOKEN";

const MAX_ATTEMPTS: u32 = 3;
const DEFAULT_BACKOFF: Duration = Duration::from_millis(250);
const DEFAULT_MAX_IN_FLIGHT: usize = 4;

#[derive(Serialize)]
struct TranslateBody<'a> {
    q: &'a str,
    source: &'a str,
    target: &'a str,
}

#[derive(Deserialize)]
struct TranslateReply {
    #[serde(rename = "translatedText")]
    translated_text: String,
}

#[derive(Deserialize)]
struct LanguageEntry {
    code: String,
}

#[derive(Debug)]
struct Semaphore {
    available: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(permits: usize) -> Self {
        Semaphore {
            available: Mutex::new(permits),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut available = self.available.lock().expect("semaphore poisoned");
        while *available == 0 {
            available = self.freed.wait(available).expect("semaphore poisoned");
        }
        *available -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("semaphore poisoned") += 1;
        self.0.freed.notify_one();
    }
}

enum Attempt<T> {
    Done(T),
    Retry(String),
}

/// Client for a minimal JSON translation endpoint:
/// `POST <base>/translate` with `{"q","source","target"}` answering
/// `{"translatedText"}`, and `GET <base>/languages` answering `[{"code"}]`.
///
/// 5xx responses and transport errors are retried (3 attempts, exponential
/// backoff); 4xx responses are not. HTTP 429 surfaces as [`Error::RateLimited`].
#[derive(Debug)]
pub struct HttpProvider {
    base: String,
    agent: ureq::Agent,
    token: Option<String>,
    backoff_base: Duration,
    in_flight: Semaphore,
    requests: AtomicUsize,
    languages: Mutex<Option<BTreeSet<String>>>,
}

impl HttpProvider {
    pub fn new(base: impl Into<String>) -> Result<Self> {
        let base = base.into().trim_end_matches('/').to_string();
        if !(base.starts_with("http://") || base.starts_with("https://")) {
            return Err(Error::Configuration(format!("`{base}` is not an http(s) URL")));
        }
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(Duration::from_secs(10))
            .timeout(Duration::from_secs(60))
            .build();
        Ok(HttpProvider {
            base,
            agent,
            token: None,
            backoff_base: DEFAULT_BACKOFF,
            in_flight: Semaphore::new(DEFAULT_MAX_IN_FLIGHT),
            requests: AtomicUsize::new(0),
            languages: Mutex::new(None),
        })
    }

    /// Like [`HttpProvider::new`], picking up the bearer token from [`TOKEN_ENV`].
    pub fn from_env(base: impl Into<String>) -> Result<Self> {
        let provider = HttpProvider::new(base)?;
        Ok(match std::env::var(TOKEN_ENV) {
            Ok(token) if !token.is_empty() => provider.with_token(token),
            _ => provider,
        })
    }

    pub fn with_token(mut self, token: impl Into<String>) -> Self {
        self.token = Some(token.into());
        self
    }

    pub fn with_max_in_flight(mut self, permits: usize) -> Self {
        self.in_flight = Semaphore::new(permits.max(1));
        self
    }

    pub fn with_backoff_base(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    /// Number of HTTP requests sent so far, retries included.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    fn authorize(&self, req: ureq::Request) -> ureq::Request {
        match &self.token {
            Some(token) => req.set("Authorization", &format!("Bearer {token}")),
            None => req,
        }
    }

    fn with_retries<T>(&self, what: &str, mut call: impl FnMut() -> Result<Attempt<T>>) -> Result<T> {
        let mut last = String::new();
        for attempt in 0..MAX_ATTEMPTS {
            if attempt > 0 {
                thread::sleep(self.backoff_base * 2u32.pow(attempt - 1));
            }
            let _permit = self.in_flight.acquire();
            self.requests.fetch_add(1, Ordering::SeqCst);
            match call()? {
                Attempt::Done(value) => return Ok(value),
                Attempt::Retry(reason) => {
                    log::debug!("{what}: attempt {} failed: {reason}", attempt + 1);
                    last = reason;
                }
            }
        }
        Err(Error::ProviderUnavailable(format!(
            "{what} failed after {MAX_ATTEMPTS} attempts: {last}"
        )))
    }

    fn classify(&self, outcome: std::result::Result<ureq::Response, ureq::Error>) -> Result<Attempt<ureq::Response>> {
        match outcome {
            Ok(response) => Ok(Attempt::Done(response)),
            Err(ureq::Error::Status(status, response)) => {
                let body = response.into_string().unwrap_or_default();
                match status {
                    429 => Err(Error::RateLimited(format!("{} answered 429: {body}", self.base))),
                    400..=499 => Err(Error::ProviderRejected { status, message: body }),
                    _ => Ok(Attempt::Retry(format!("HTTP {status}: {body}"))),
                }
            }
            Err(ureq::Error::Transport(t)) => Ok(Attempt::Retry(t.to_string())),
        }
    }
}

impl TranslationProvider for HttpProvider {
    fn id(&self) -> String {
        format!("http:{}", self.base)
    }

    fn supported_languages(&self) -> Result<BTreeSet<String>> {
        let mut known = self.languages.lock().expect("language cache poisoned");
        if let Some(set) = known.as_ref() {
            return Ok(set.clone());
        }
        let url = format!("{}/languages", self.base);
        let response = self.with_retries("GET /languages", || {
            self.classify(self.authorize(self.agent.get(&url)).call())
        })?;
        let entries: Vec<LanguageEntry> = response
            .into_json()
            .map_err(|e| Error::ProviderUnavailable(format!("malformed /languages response: {e}")))?;
        let set: BTreeSet<String> = entries.into_iter().map(|e| e.code.to_lowercase()).collect();
        if set.is_empty() {
            return Err(Error::Configuration(format!("{url} lists no languages")));
        }
        *known = Some(set.clone());
        Ok(set)
    }

    fn translate(&self, req: &TranslationRequest) -> Result<TranslationResult> {
        let url = format!("{}/translate", self.base);
        let body = TranslateBody {
            q: &req.text,
            source: &req.source_lang,
            target: &req.target_lang,
        };
        let response = self.with_retries("POST /translate", || {
            self.classify(self.authorize(self.agent.post(&url)).send_json(&body))
        })?;
        let reply: TranslateReply = response
            .into_json()
            .map_err(|e| Error::ProviderUnavailable(format!("malformed /translate response: {e}")))?;
        Ok(TranslationResult::from_text(
            reply.translated_text,
            &req.target_lang,
            Provenance::Http,
        ))
    }
}
