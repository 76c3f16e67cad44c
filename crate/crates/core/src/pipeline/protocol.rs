//! Newline-delimited JSON protocol for external NLU/NLG components.
//!
//! ```text
//! -> {"id":0,"op":"hello"}
//! <- {"id":0,"result":{"name":"bert-nlu","roles":["nlu"]}}
//! -> {"id":1,"op":"nlu","payload":{"utterance":"cheap food please"}}
//! <- {"id":1,"result":{"frame":{"act":"inform","slots":{"pricerange":"cheap"},"requests":[]}}}
//! -> {"id":2,"op":"nlg","payload":{"frames":[...]}}
//! <- {"id":2,"result":{"utterance":"..."}}
//! ```
//!
//! A hello reply may also be the bare `{"name", "roles"}` object. Failed
//! calls are retried once with a fresh id; the remote wrappers then fall back
//! to the template components and record a [`DegradationEvent`].

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::frame::SemanticFrame;
use super::nlu::TemplateNlu;
use super::templates::TemplateSet;
use crate::ontology::DomainOntology;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("cannot start component: {0}")]
    Spawn(String),
    #[error("connection closed")]
    Closed,
    #[error("no response within {0:?}")]
    Timeout(Duration),
    #[error("response id {got} does not match request id {expected}")]
    IdMismatch { expected: u64, got: u64 },
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("component reported an error: {0}")]
    Remote(String),
    #[error("component `{name}` does not offer role {role}")]
    Role { name: String, role: Role },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Nlu,
    Nlg,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Role::Nlu => "nlu",
            Role::Nlg => "nlg",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "payload", rename_all = "lowercase")]
pub enum Request {
    Hello,
    Nlu { utterance: String },
    Nlg { frames: Vec<SemanticFrame> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestEnvelope {
    pub id: u64,
    #[serde(flatten)]
    pub request: Request,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseEnvelope {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelloReply {
    pub name: String,
    pub roles: Vec<Role>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NluReply {
    pub frame: SemanticFrame,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NlgReply {
    pub utterance: String,
}

pub fn encode<T: Serialize>(message: &T) -> String {
    serde_json::to_string(message).expect("protocol messages serialise")
}

/// Where a component lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EndpointSpec {
    /// Program and arguments, spoken to over stdin/stdout.
    Command(Vec<String>),
    /// `host:port`.
    Tcp(String),
}

impl std::str::FromStr for EndpointSpec {
    type Err = String;

    /// `tcp:HOST:PORT` or `cmd:PROGRAM ARGS...` (split on whitespace).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(addr) = s.strip_prefix("tcp:") {
            return Ok(EndpointSpec::Tcp(addr.to_string()));
        }
        let cmd = s.strip_prefix("cmd:").unwrap_or(s);
        let parts: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
        if parts.is_empty() {
            return Err("empty endpoint".into());
        }
        Ok(EndpointSpec::Command(parts))
    }
}

/// Line transport: writes go straight to the peer, reads arrive through a
/// reader thread so they can time out.
struct LineChannel {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    child: Option<Child>,
    /// Shut down on drop; the reader thread holds a clone of the socket.
    socket: Option<TcpStream>,
}

impl LineChannel {
    fn new(writer: Box<dyn Write + Send>, reader: Box<dyn Read + Send>, child: Option<Child>) -> Self {
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        LineChannel {
            writer,
            lines: rx,
            child,
            socket: None,
        }
    }

    fn send(&mut self, line: &str) -> Result<(), ProtocolError> {
        writeln!(self.writer, "{line}").and_then(|_| self.writer.flush()).map_err(|e| match e.kind() {
            std::io::ErrorKind::BrokenPipe => ProtocolError::Closed,
            _ => ProtocolError::Io(e),
        })
    }

    fn recv(&self, timeout: Duration) -> Result<String, ProtocolError> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(ProtocolError::Io(e)),
            Err(RecvTimeoutError::Timeout) => Err(ProtocolError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(ProtocolError::Closed),
        }
    }
}

impl Drop for LineChannel {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
        if let Some(s) = &self.socket {
            let _ = s.shutdown(std::net::Shutdown::Both);
        }
    }
}

/// A connected component that completed the hello handshake.
pub struct ComponentEndpoint {
    pub role: Role,
    pub negotiated_name: String,
    pub spec: EndpointSpec,
    channel: LineChannel,
    next_id: u64,
    timeout: Duration,
}

impl std::fmt::Debug for ComponentEndpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ComponentEndpoint")
            .field("role", &self.role)
            .field("negotiated_name", &self.negotiated_name)
            .field("spec", &self.spec)
            .field("next_id", &self.next_id)
            .finish()
    }
}

/// Opens the transport and performs the hello handshake.
pub fn connect_component(spec: &EndpointSpec, role: Role, timeout: Duration) -> Result<ComponentEndpoint, ProtocolError> {
    let channel = match spec {
        EndpointSpec::Command(argv) => {
            let mut child = Command::new(&argv[0])
                .args(&argv[1..])
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .stderr(Stdio::inherit())
                .spawn()
                .map_err(|e| ProtocolError::Spawn(format!("{}: {e}", argv[0])))?;
            let stdin = child.stdin.take().expect("piped stdin");
            let stdout = child.stdout.take().expect("piped stdout");
            LineChannel::new(Box::new(stdin), Box::new(stdout), Some(child))
        }
        EndpointSpec::Tcp(addr) => {
            let stream = TcpStream::connect(addr).map_err(|e| ProtocolError::Spawn(format!("{addr}: {e}")))?;
            let reader = stream.try_clone()?;
            let handle = stream.try_clone()?;
            let mut channel = LineChannel::new(Box::new(stream), Box::new(reader), None);
            channel.socket = Some(handle);
            channel
        }
    };
    let mut endpoint = ComponentEndpoint {
        role,
        negotiated_name: String::new(),
        spec: spec.clone(),
        channel,
        next_id: 0,
        timeout,
    };
    let value = endpoint.call_once(&Request::Hello)?;
    let hello: HelloReply = serde_json::from_value(value).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    if !hello.roles.contains(&role) {
        return Err(ProtocolError::Role { name: hello.name, role });
    }
    endpoint.negotiated_name = hello.name;
    Ok(endpoint)
}

impl ComponentEndpoint {
    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    /// Id the next request will carry.
    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    fn call_once(&mut self, request: &Request) -> Result<Value, ProtocolError> {
        let id = self.next_id;
        self.next_id += 1;
        self.channel.send(&encode(&RequestEnvelope {
            id,
            request: request.clone(),
        }))?;
        loop {
            let line = self.channel.recv(self.timeout)?;
            let value: Value = serde_json::from_str(&line).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
            if matches!(request, Request::Hello) && value.get("id").is_none() {
                return Ok(value);
            }
            let reply: ResponseEnvelope =
                serde_json::from_value(value).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
            if reply.id < id {
                log::debug!("discarding late reply {} (waiting for {id})", reply.id);
                continue;
            }
            if reply.id != id {
                return Err(ProtocolError::IdMismatch {
                    expected: id,
                    got: reply.id,
                });
            }
            return match (reply.result, reply.error) {
                (_, Some(e)) => Err(ProtocolError::Remote(e)),
                (Some(v), None) => Ok(v),
                (None, None) => Err(ProtocolError::Malformed("reply has neither result nor error".into())),
            };
        }
    }

    /// One call, retried once on any failure.
    pub fn call(&mut self, request: &Request) -> Result<Value, ProtocolError> {
        self.call_once(request).or_else(|first| {
            log::warn!("{} ({}): {first}; retrying", self.negotiated_name, self.role);
            self.call_once(request)
        })
    }
}

/// Recorded whenever a remote component was bypassed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationEvent {
    pub role: Role,
    pub component: String,
    pub reason: String,
}

/// Something that turns user text into a frame.
pub trait Understand {
    fn understand(&mut self, utterance: &str) -> SemanticFrame;
}

/// Something that turns frames into text.
pub trait Generate {
    fn generate(&mut self, frames: &[SemanticFrame]) -> String;
}

impl Understand for TemplateNlu {
    fn understand(&mut self, utterance: &str) -> SemanticFrame {
        self.parse(utterance)
    }
}

impl Generate for TemplateSet {
    fn generate(&mut self, frames: &[SemanticFrame]) -> String {
        self.realize_all(frames)
    }
}

fn degrade(events: &mut Vec<DegradationEvent>, role: Role, component: &str, reason: String) {
    log::warn!("{role} component `{component}` bypassed: {reason}");
    events.push(DegradationEvent {
        role,
        component: component.to_string(),
        reason,
    });
}

/// Remote NLU with a template fallback. Frames are validated against the
/// ontology; an invalid frame counts as a failed call.
pub struct RemoteNlu {
    pub endpoint: Option<ComponentEndpoint>,
    pub fallback: TemplateNlu,
    pub ontology: DomainOntology,
    pub events: Vec<DegradationEvent>,
}

impl RemoteNlu {
    pub fn new(endpoint: Option<ComponentEndpoint>, fallback: TemplateNlu, ontology: DomainOntology) -> Self {
        RemoteNlu {
            endpoint,
            fallback,
            ontology,
            events: Vec::new(),
        }
    }

    /// Connects, or starts in degraded mode when the endpoint is unreachable.
    pub fn connect(spec: &EndpointSpec, timeout: Duration, fallback: TemplateNlu, ontology: DomainOntology) -> Self {
        let mut me = Self::new(None, fallback, ontology);
        match connect_component(spec, Role::Nlu, timeout) {
            Ok(ep) => me.endpoint = Some(ep),
            Err(e) => degrade(&mut me.events, Role::Nlu, &format!("{spec:?}"), e.to_string()),
        }
        me
    }

    fn remote(&mut self, utterance: &str) -> Result<SemanticFrame, ProtocolError> {
        let ep = self.endpoint.as_mut().ok_or(ProtocolError::Closed)?;
        let request = Request::Nlu {
            utterance: utterance.to_string(),
        };
        let ontology = &self.ontology;
        let attempt = |ep: &mut ComponentEndpoint| -> Result<SemanticFrame, ProtocolError> {
            let v = ep.call_once(&request)?;
            let reply: NluReply = serde_json::from_value(v).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
            reply
                .frame
                .validate(ontology)
                .map_err(|e| ProtocolError::Malformed(e.to_string()))?;
            Ok(reply.frame)
        };
        attempt(ep).or_else(|first| {
            log::warn!("nlu `{}`: {first}; retrying", ep.negotiated_name);
            attempt(ep)
        })
    }
}

impl Understand for RemoteNlu {
    fn understand(&mut self, utterance: &str) -> SemanticFrame {
        if self.endpoint.is_none() {
            return self.fallback.parse(utterance);
        }
        match self.remote(utterance) {
            Ok(frame) => frame,
            Err(e) => {
                let name = self.endpoint.as_ref().map(|e| e.negotiated_name.clone()).unwrap_or_default();
                degrade(&mut self.events, Role::Nlu, &name, e.to_string());
                self.fallback.parse(utterance)
            }
        }
    }
}

/// Remote NLG with a template fallback.
pub struct RemoteNlg {
    pub endpoint: Option<ComponentEndpoint>,
    pub fallback: TemplateSet,
    pub events: Vec<DegradationEvent>,
}

impl RemoteNlg {
    pub fn new(endpoint: Option<ComponentEndpoint>, fallback: TemplateSet) -> Self {
        RemoteNlg {
            endpoint,
            fallback,
            events: Vec::new(),
        }
    }

    pub fn connect(spec: &EndpointSpec, timeout: Duration, fallback: TemplateSet) -> Self {
        let mut me = Self::new(None, fallback);
        match connect_component(spec, Role::Nlg, timeout) {
            Ok(ep) => me.endpoint = Some(ep),
            Err(e) => degrade(&mut me.events, Role::Nlg, &format!("{spec:?}"), e.to_string()),
        }
        me
    }
}

impl Generate for RemoteNlg {
    fn generate(&mut self, frames: &[SemanticFrame]) -> String {
        let Some(ep) = self.endpoint.as_mut() else {
            return self.fallback.realize_all(frames);
        };
        let request = Request::Nlg { frames: frames.to_vec() };
        let result = ep.call(&request).and_then(|v| {
            let r: NlgReply = serde_json::from_value(v).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
            if r.utterance.contains(['\n', '\r']) {
                return Err(ProtocolError::Malformed("utterance spans several lines".into()));
            }
            Ok(r.utterance)
        });
        match result {
            Ok(u) => u,
            Err(e) => {
                let name = ep.negotiated_name.clone();
                degrade(&mut self.events, Role::Nlg, &name, e.to_string());
                self.fallback.realize_all(frames)
            }
        }
    }
}

/// Misbehaviours the reference server can simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Every non-hello reply carries `id + 1000`.
    WrongId,
    /// Every non-hello reply is not JSON.
    Garbage,
    /// Non-hello requests are never answered.
    Silent,
    /// Only the first reply after hello has a wrong id.
    WrongIdOnce,
    /// Exit after this many non-hello replies.
    ExitAfter(u32),
}

impl std::str::FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Fault::None),
            "wrong-id" => Ok(Fault::WrongId),
            "wrong-id-once" => Ok(Fault::WrongIdOnce),
            "garbage" => Ok(Fault::Garbage),
            "silent" => Ok(Fault::Silent),
            other => other
                .strip_prefix("exit-after=")
                .and_then(|n| n.parse().ok())
                .map(Fault::ExitAfter)
                .ok_or_else(|| format!("unknown fault `{other}`")),
        }
    }
}

/// Reference server answering both roles with template components.
/// Returns when the input ends or an `ExitAfter` fault fires.
pub fn serve_templates<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    nlu: &TemplateNlu,
    nlg: &TemplateSet,
    name: &str,
    fault: Fault,
) -> std::io::Result<()> {
    let mut answered = 0u32;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Result<RequestEnvelope, _> = serde_json::from_str(&line);
        let reply = match parsed {
            Ok(RequestEnvelope {
                id,
                request: Request::Hello,
            }) => {
                let hello = HelloReply {
                    name: name.to_string(),
                    roles: vec![Role::Nlu, Role::Nlg],
                };
                writeln!(output, "{}", encode(&ResponseEnvelope {
                    id,
                    result: Some(serde_json::to_value(hello).expect("serialisable")),
                    error: None,
                }))?;
                output.flush()?;
                continue;
            }
            Ok(RequestEnvelope { id, request }) => {
                let result = match request {
                    Request::Nlu { utterance } => serde_json::to_value(NluReply {
                        frame: nlu.parse(&utterance),
                    }),
                    Request::Nlg { frames } => serde_json::to_value(NlgReply {
                        utterance: nlg.realize_all(&frames),
                    }),
                    Request::Hello => unreachable!("handled above"),
                }
                .expect("serialisable");
                ResponseEnvelope {
                    id,
                    result: Some(result),
                    error: None,
                }
            }
            Err(e) => ResponseEnvelope {
                id: serde_json::from_str::<Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(Value::as_u64))
                    .unwrap_or(0),
                result: None,
                error: Some(format!("bad request: {e}")),
            },
        };
        match fault {
            Fault::None | Fault::ExitAfter(_) => writeln!(output, "{}", encode(&reply))?,
            Fault::WrongId => writeln!(output, "{}", encode(&ResponseEnvelope { id: reply.id + 1000, ..reply }))?,
            Fault::WrongIdOnce if answered == 0 => {
                writeln!(output, "{}", encode(&ResponseEnvelope { id: reply.id + 1000, ..reply }))?
            }
            Fault::WrongIdOnce => writeln!(output, "{}", encode(&reply))?,
            Fault::Garbage => writeln!(output, "<<not json>>")?,
            Fault::Silent => {}
        }
        output.flush()?;
        answered += 1;
        if matches!(fault, Fault::ExitAfter(n) if answered >= n) {
            return Ok(());
        }
    }
    Ok(())
}
