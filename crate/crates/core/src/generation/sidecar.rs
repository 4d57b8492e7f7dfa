//! Client for an external model process speaking line-delimited JSON.
//!
//! Requests and replies, one JSON object per line:
//!
//! ```text
//! {"op":"hello"}                                  -> {"dim":384,"vocab":[...]}
//! {"op":"embed","text":["w1","w2"]}               -> {"vec":[0.1, ...]}
//! {"op":"next","input":[...],"prefix":[...]}      -> {"probs":{"tok":0.7, ...}}
//! ```
//!
//! `vocab` is optional. A `next` reply may list only the top tokens; the
//! missing mass is assigned to `<unk>`. Any reply carrying an `error` field
//! fails the request.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::retrieval::{Embedder, Embedding};

use super::{Generator, GeneratorInput, TokenDistribution, Vocabulary, DISTRIBUTION_TOLERANCE, UNK};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Environment variable that overrides the configured endpoint.
pub const ENDPOINT_ENV: &str = "DOCIE_SIDECAR";

struct Connection {
    writer: Box<dyn Write + Send>,
    replies: Receiver<std::io::Result<String>>,
    child: Option<Child>,
    poisoned: bool,
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

pub struct SidecarClient {
    conn: Mutex<Connection>,
    timeout: Duration,
    dim: usize,
    vocab: Option<Vec<String>>,
}

impl std::fmt::Debug for SidecarClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SidecarClient")
            .field("timeout", &self.timeout)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

fn spawn_reader<R: std::io::Read + Send + 'static>(source: R) -> Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut reader = BufReader::new(source);
        loop {
            let mut line = String::new();
            match reader.read_line(&mut line) {
                Ok(0) => {
                    let _ = tx.send(Err(std::io::ErrorKind::UnexpectedEof.into()));
                    break;
                }
                Ok(_) => {
                    if tx.send(Ok(line)).is_err() {
                        break;
                    }
                }
                Err(e) => {
                    let _ = tx.send(Err(e));
                    break;
                }
            }
        }
    });
    rx
}

fn field<'v>(reply: &'v Value, name: &str) -> Result<&'v Value> {
    reply
        .get(name)
        .ok_or_else(|| Error::Protocol(format!("reply is missing field `{name}`")))
}

impl SidecarClient {
    /// Connects to `tcp://host:port` or spawns `exec:<shell command>`, then
    /// performs the `hello` handshake.
    pub fn connect(endpoint: &str, timeout: Duration) -> Result<Self> {
        let conn = if let Some(addr) = endpoint.strip_prefix("tcp://") {
            let sock = addr
                .to_socket_addrs()
                .map_err(|e| Error::Config(format!("bad sidecar address {addr}: {e}")))?
                .next()
                .ok_or_else(|| Error::Config(format!("sidecar address {addr} did not resolve")))?;
            let stream = TcpStream::connect_timeout(&sock, timeout)
                .map_err(|e| Error::Protocol(format!("cannot connect to {addr}: {e}")))?;
            let reader = stream
                .try_clone()
                .map_err(|e| Error::Protocol(format!("cannot clone socket: {e}")))?;
            Connection {
                writer: Box::new(stream),
                replies: spawn_reader(reader),
                child: None,
                poisoned: false,
            }
        } else if let Some(cmd) = endpoint.strip_prefix("exec:") {
            let mut child = Command::new("sh")
                .arg("-c")
                .arg(cmd)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .spawn()
                .map_err(|e| Error::Config(format!("cannot start sidecar `{cmd}`: {e}")))?;
            let stdin = child.stdin.take().expect("piped stdin");
            let stdout = child.stdout.take().expect("piped stdout");
            Connection {
                writer: Box::new(stdin),
                replies: spawn_reader(stdout),
                child: Some(child),
                poisoned: false,
            }
        } else {
            return Err(Error::Config(format!(
                "sidecar endpoint `{endpoint}` must start with tcp:// or exec:"
            )));
        };
        let mut client = SidecarClient {
            conn: Mutex::new(conn),
            timeout,
            dim: 0,
            vocab: None,
        };
        let hello = client.request(&json!({"op": "hello"}))?;
        let dim = field(&hello, "dim")?
            .as_u64()
            .filter(|d| *d > 0)
            .ok_or_else(|| Error::Protocol("field `dim` must be a positive integer".into()))?;
        client.dim = dim as usize;
        client.vocab = match hello.get("vocab") {
            None | Some(Value::Null) => None,
            Some(Value::Array(items)) => Some(
                items
                    .iter()
                    .map(|v| {
                        v.as_str()
                            .map(String::from)
                            .ok_or_else(|| Error::Protocol("field `vocab` must hold strings".into()))
                    })
                    .collect::<Result<_>>()?,
            ),
            Some(_) => return Err(Error::Protocol("field `vocab` must be an array".into())),
        };
        Ok(client)
    }

    /// Uses `$DOCIE_SIDECAR` when set, otherwise `endpoint`.
    pub fn from_env(endpoint: Option<&str>, timeout: Duration) -> Result<Self> {
        match std::env::var(ENDPOINT_ENV) {
            Ok(e) if !e.is_empty() => Self::connect(&e, timeout),
            _ => match endpoint {
                Some(e) => Self::connect(e, timeout),
                None => Err(Error::Config(format!("no sidecar endpoint given and {ENDPOINT_ENV} is unset"))),
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> Option<&[String]> {
        self.vocab.as_deref()
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    fn request(&self, body: &Value) -> Result<Value> {
        let mut conn = self.conn.lock().unwrap_or_else(|p| p.into_inner());
        if conn.poisoned {
            return Err(Error::Protocol("connection unusable after an earlier failure".into()));
        }
        let mut line = body.to_string();
        line.push('\n');
        if let Err(e) = conn.writer.write_all(line.as_bytes()).and_then(|_| conn.writer.flush()) {
            conn.poisoned = true;
            return Err(Error::Protocol(format!("send failed: {e}")));
        }
        let reply = match conn.replies.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => {
                conn.poisoned = true;
                return Err(Error::Protocol(format!("connection closed: {e}")));
            }
            Err(RecvTimeoutError::Timeout) => {
                // A late reply would desynchronize later requests.
                conn.poisoned = true;
                return Err(Error::Timeout(self.timeout));
            }
            Err(RecvTimeoutError::Disconnected) => {
                conn.poisoned = true;
                return Err(Error::Protocol("connection closed".into()));
            }
        };
        let value: Value = serde_json::from_str(reply.trim())
            .map_err(|e| Error::Protocol(format!("malformed reply: {e}")))?;
        if !value.is_object() {
            return Err(Error::Protocol("reply is not a JSON object".into()));
        }
        if let Some(err) = value.get("error") {
            return Err(Error::Protocol(format!("sidecar reported: {err}")));
        }
        Ok(value)
    }

    pub fn embed(&self, text: &[String]) -> Result<Vec<f64>> {
        let reply = self.request(&json!({"op": "embed", "text": text}))?;
        let values = field(&reply, "vec")?
            .as_array()
            .ok_or_else(|| Error::Protocol("field `vec` must be an array".into()))?
            .iter()
            .map(|v| {
                v.as_f64()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Protocol("field `vec` must hold finite numbers".into()))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != self.dim {
            return Err(Error::Protocol(format!(
                "field `vec` has length {}, expected {}",
                values.len(),
                self.dim
            )));
        }
        Ok(values)
    }

    pub fn next(&self, input: &[String], prefix: &[String]) -> Result<BTreeMap<String, f64>> {
        let reply = self.request(&json!({"op": "next", "input": input, "prefix": prefix}))?;
        let probs = field(&reply, "probs")?
            .as_object()
            .ok_or_else(|| Error::Protocol("field `probs` must be an object".into()))?;
        probs
            .iter()
            .map(|(tok, p)| {
                p.as_f64()
                    .filter(|x| x.is_finite() && *x >= 0.0)
                    .map(|x| (tok.clone(), x))
                    .ok_or_else(|| {
                        Error::Protocol(format!("field `probs` has an invalid value for `{tok}`"))
                    })
            })
            .collect()
    }
}

pub struct SidecarGenerator {
    client: Arc<SidecarClient>,
    vocab: Arc<Vocabulary>,
}

impl SidecarGenerator {
    /// The vocabulary is the sidecar's own (if announced) plus `words`.
    pub fn new<I, S>(client: Arc<SidecarClient>, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let announced = client.vocab().unwrap_or(&[]).to_vec();
        let vocab = Vocabulary::new(announced.into_iter().chain(words.into_iter().map(Into::into)));
        SidecarGenerator {
            client,
            vocab: Arc::new(vocab),
        }
    }
}

impl Generator for SidecarGenerator {
    fn vocabulary(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    fn next_distribution(&self, input: &GeneratorInput, prefix: &[String]) -> Result<TokenDistribution> {
        let mut probs = self.client.next(&input.rendered, prefix)?;
        let sum: f64 = probs.values().sum();
        if sum > 1.0 + DISTRIBUTION_TOLERANCE || sum <= 0.0 {
            return Err(Error::DegenerateDistribution { sum });
        }
        let residual = 1.0 - sum;
        if residual > 0.0 {
            *probs.entry(UNK.to_string()).or_default() += residual;
        }
        let mut dist = TokenDistribution::from_map(self.vocab.clone(), &probs);
        dist.renormalize();
        Ok(dist)
    }
}

pub struct SidecarEmbedder {
    client: Arc<SidecarClient>,
}

impl SidecarEmbedder {
    pub fn new(client: Arc<SidecarClient>) -> Self {
        SidecarEmbedder { client }
    }
}

impl Embedder for SidecarEmbedder {
    fn dimension(&self) -> usize {
        self.client.dim()
    }

    fn embed(&self, text: &[String]) -> Result<Embedding> {
        let values = self.client.embed(text)?;
        Ok(Embedding::normalized(values).unwrap_or_else(|| Embedding::basis(self.client.dim())))
    }
}
