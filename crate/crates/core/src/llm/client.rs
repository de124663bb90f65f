use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Strategy;
use crate::chart::Chart;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// One chat-completion call.
#[derive(Debug, Clone)]
pub struct LlmRequest {
    pub prompt: String,
    pub model: String,
    pub temperature: f64,
    pub n_mutants: usize,
    /// Structured view of what the prompt describes. Only the synthetic
    /// mock reads it; real endpoints see the prompt text alone.
    pub chart: Option<Chart>,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmResponse {
    pub text: String,
    pub usage: Usage,
    pub latency_s: f64,
    pub retries: u32,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("authentication failed: {0}")]
    AuthFailure(String),
    #[error("rate limited after {0} retries")]
    RateLimited(u32),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed completion: {0}")]
    BadResponse(String),
    #[error("no recorded response for prompt {0}")]
    MissingFixture(String),
    #[error("{0}")]
    Io(String),
}

pub trait LlmClient: Send + Sync {
    fn complete(&self, req: &LlmRequest) -> Result<LlmResponse, LlmError>;
}

/// Rough token count: one token per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Latency charged by the offline clients: a fixed overhead plus a steady
/// output rate of 50 tokens per second.
pub(crate) fn modeled_latency(usage: Usage) -> f64 {
    0.25 + usage.completion_tokens as f64 / 50.0
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    3
}

fn default_backoff() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Provider {
    /// OpenAI- or Ollama-style `POST {base_url}/chat/completions`.
    Http {
        base_url: String,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_backoff")]
        backoff_ms: u64,
    },
    /// Offline generator built on the baseline operators.
    Synthetic {
        #[serde(default)]
        defect_rate: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Serves recorded responses keyed by prompt hash.
    Replay { fixtures: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmEndpointConfig {
    pub name: String,
    pub model: String,
    pub provider: Provider,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Price per prompt token.
    #[serde(default)]
    pub price_in: f64,
    /// Price per completion token.
    #[serde(default)]
    pub price_out: f64,
}

impl LlmEndpointConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.timeout_s.is_nan() || self.timeout_s <= 0.0 {
            return Err(format!("endpoint {}: timeout_s must be positive", self.name));
        }
        if let Some(t) = self.temperature {
            if !(0.0..=1.0).contains(&t) {
                return Err(format!("endpoint {}: temperature {t} outside [0, 1]", self.name));
            }
        }
        if let Provider::Synthetic { defect_rate, .. } = self.provider {
            if !(0.0..=1.0).contains(&defect_rate) {
                return Err(format!("endpoint {}: defect_rate {defect_rate} outside [0, 1]", self.name));
            }
        }
        if self.price_in < 0.0 || self.price_out < 0.0 {
            return Err(format!("endpoint {}: prices must be nonnegative", self.name));
        }
        Ok(())
    }

    pub fn cost(&self, usage: Usage) -> f64 {
        usage.prompt_tokens as f64 * self.price_in + usage.completion_tokens as f64 * self.price_out
    }

    /// Builds the client. Relative replay directories resolve against `base`.
    pub fn client(&self, base: &Path) -> Box<dyn LlmClient> {
        match &self.provider {
            Provider::Http { base_url, api_key_env, backoff_ms } => Box::new(HttpChatClient {
                base_url: base_url.clone(),
                api_key_env: api_key_env.clone(),
                timeout: Duration::from_secs_f64(self.timeout_s),
                max_retries: self.max_retries,
                backoff: Duration::from_millis(*backoff_ms),
            }),
            Provider::Synthetic { defect_rate, seed } => {
                Box::new(super::SyntheticClient { defect_rate: *defect_rate, seed: *seed })
            }
            Provider::Replay { fixtures } => Box::new(ReplayClient { dir: base.join(fixtures) }),
        }
    }
}

pub struct HttpChatClient {
    pub base_url: String,
    pub api_key_env: Option<String>,
    pub timeout: Duration,
    pub max_retries: u32,
    /// First retry delay; doubles on every further retry.
    pub backoff: Duration,
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

impl LlmClient for HttpChatClient {
    fn complete(&self, req: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let key = match &self.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| LlmError::AuthFailure(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
        let body = serde_json::json!({
            "model": req.model,
            "temperature": req.temperature,
            "messages": [{"role": "user", "content": req.prompt}],
        })
        .to_string();

        let start = Instant::now();
        let mut retries = 0;
        loop {
            let mut builder = agent.post(&url).header("Content-Type", "application/json");
            if let Some(k) = key.as_deref().filter(|k| !k.is_empty()) {
                builder = builder.header("Authorization", format!("Bearer {k}"));
            }
            let failure = match builder.send(body.as_str()) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let text = resp.body_mut().read_to_string().map_err(|e| LlmError::Transport(e.to_string()))?;
                    match status {
                        200..=299 => {
                            let mut out = parse_completion(&text, &req.prompt)?;
                            out.latency_s = start.elapsed().as_secs_f64();
                            out.retries = retries;
                            return Ok(out);
                        }
                        401 | 403 => return Err(LlmError::AuthFailure(format!("HTTP {status}"))),
                        429 => LlmError::RateLimited(retries),
                        500..=599 => LlmError::Http { status, body: text },
                        _ => return Err(LlmError::Http { status, body: text }),
                    }
                }
                Err(ureq::Error::Timeout(_)) => LlmError::Timeout,
                Err(e) => LlmError::Transport(e.to_string()),
            };
            if retries >= self.max_retries {
                return Err(failure);
            }
            retries += 1;
            log::warn!("{url}: {failure}; retry {retries}/{}", self.max_retries);
            std::thread::sleep(self.backoff * 2u32.saturating_pow(retries - 1));
        }
    }
}

fn parse_completion(text: &str, prompt: &str) -> Result<LlmResponse, LlmError> {
    let c: Completion = serde_json::from_str(text).map_err(|e| LlmError::BadResponse(e.to_string()))?;
    let content =
        c.choices.into_iter().next().ok_or_else(|| LlmError::BadResponse("no choices".into()))?.message.content;
    let usage = c
        .usage
        .unwrap_or(Usage { prompt_tokens: estimate_tokens(prompt), completion_tokens: estimate_tokens(&content) });
    Ok(LlmResponse { text: content, usage, latency_s: 0.0, retries: 0 })
}

fn fixture_path(dir: &Path, prompt: &str) -> PathBuf {
    dir.join(format!("{}.resp.txt", prompt_hash(prompt)))
}

/// Serves `fixtures/<sha256(prompt)>.resp.txt`.
pub struct ReplayClient {
    pub dir: PathBuf,
}

impl LlmClient for ReplayClient {
    fn complete(&self, req: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let path = fixture_path(&self.dir, &req.prompt);
        let text = fs::read_to_string(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => LlmError::MissingFixture(prompt_hash(&req.prompt)),
            _ => LlmError::Io(format!("{}: {e}", path.display())),
        })?;
        let usage = Usage { prompt_tokens: estimate_tokens(&req.prompt), completion_tokens: estimate_tokens(&text) };
        Ok(LlmResponse { text, usage, latency_s: modeled_latency(usage), retries: 0 })
    }
}

/// Passes requests through and stores each response as a replay fixture.
pub struct RecordingClient<C> {
    pub inner: C,
    pub dir: PathBuf,
}

impl<C: LlmClient> LlmClient for RecordingClient<C> {
    fn complete(&self, req: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let resp = self.inner.complete(req)?;
        let io = |e: std::io::Error| LlmError::Io(e.to_string());
        fs::create_dir_all(&self.dir).map_err(io)?;
        let path = fixture_path(&self.dir, &req.prompt);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, &resp.text).map_err(io)?;
        fs::rename(&tmp, &path).map_err(io)?;
        Ok(resp)
    }
}

impl LlmClient for Box<dyn LlmClient> {
    fn complete(&self, req: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (**self).complete(req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Answers successive connections with the given statuses and bodies.
    fn scripted_server(script: Vec<(u16, String)>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for (status, body) in script {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                let resp = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(resp.as_bytes()).unwrap();
            }
        });
        format!("http://{addr}/v1")
    }

    fn client(base_url: String, key: Option<&str>) -> HttpChatClient {
        HttpChatClient {
            base_url,
            api_key_env: key.map(String::from),
            timeout: Duration::from_secs(5),
            max_retries: 3,
            backoff: Duration::from_millis(1),
        }
    }

    fn req() -> LlmRequest {
        LlmRequest {
            prompt: "hello".into(),
            model: "m".into(),
            temperature: 0.0,
            n_mutants: 1,
            chart: None,
            strategy: Strategy::Global,
        }
    }

    #[test]
    fn retries_server_errors_then_succeeds() {
        let ok = r#"{"choices":[{"message":{"content":"done"}}],"usage":{"prompt_tokens":7,"completion_tokens":3}}"#;
        let url = scripted_server(vec![(500, "{}".into()), (503, "{}".into()), (200, ok.into())]);
        let resp = client(url, None).complete(&req()).unwrap();
        assert_eq!(resp.text, "done");
        assert_eq!(resp.retries, 2);
        assert_eq!(resp.usage, Usage { prompt_tokens: 7, completion_tokens: 3 });
    }

    #[test]
    fn missing_usage_is_estimated() {
        let url = scripted_server(vec![(200, r#"{"choices":[{"message":{"content":"12345"}}]}"#.into())]);
        let resp = client(url, None).complete(&req()).unwrap();
        assert_eq!(resp.usage, Usage { prompt_tokens: 2, completion_tokens: 2 });
    }

    #[test]
    fn auth_failures() {
        let err = client("http://127.0.0.1:9".into(), Some("CHARTMUT_TEST_UNSET_KEY")).complete(&req()).unwrap_err();
        assert!(matches!(err, LlmError::AuthFailure(_)));
        let url = scripted_server(vec![(401, "{}".into())]);
        assert!(matches!(client(url, None).complete(&req()), Err(LlmError::AuthFailure(_))));
    }

    #[test]
    fn gives_up_after_max_retries() {
        let url = scripted_server(vec![(429, "{}".into()); 4]);
        assert_eq!(client(url, None).complete(&req()), Err(LlmError::RateLimited(3)));
    }

    #[test]
    fn replay_and_record() {
        let dir = tempfile::tempdir().unwrap();
        let replay = ReplayClient { dir: dir.path().to_path_buf() };
        assert!(matches!(replay.complete(&req()), Err(LlmError::MissingFixture(_))));
        let rec = RecordingClient {
            inner: super::super::SyntheticClient { defect_rate: 0.0, seed: 1 },
            dir: dir.path().to_path_buf(),
        };
        let mut r = req();
        r.chart = Some(crate::corpus::fridge().chart);
        let live = rec.complete(&r).unwrap();
        assert_eq!(replay.complete(&r).unwrap().text, live.text);
    }

    #[test]
    fn cost_and_estimate() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abcde"), 2);
        let cfg: LlmEndpointConfig = serde_json::from_str(
            r#"{"name":"a","model":"m","provider":{"type":"synthetic"},"price_in":0.001,"price_out":0.002}"#,
        )
        .unwrap();
        assert!((cfg.cost(Usage { prompt_tokens: 1000, completion_tokens: 500 }) - 2.0).abs() < 1e-12);
        assert!(cfg.check().is_ok());
    }
}
