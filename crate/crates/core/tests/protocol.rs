//! Remote NLU/NLG wrappers against the real `serve-templates` binary, over
//! pipes and TCP, with injected faults.

use std::io::{BufRead, BufReader};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use dialoforge::corpus::bundled_synonyms;
use dialoforge::pipeline::protocol::{EndpointSpec, Generate, RemoteNlg, RemoteNlu, Role, Understand};
use dialoforge::pipeline::{SemanticFrame, TemplateNlu, TemplateSet};
use dialoforge::DialogueEnv;

const BIN: &str = env!("CARGO_BIN_EXE_dialoforge");
const UTTERANCE: &str = "i want cheap italian food in the north";

fn server(fault: &str) -> EndpointSpec {
    EndpointSpec::Command(vec![
        BIN.into(),
        "serve-templates".into(),
        "--name".into(),
        "ref".into(),
        "--fault".into(),
        fault.into(),
    ])
}

fn nlu(spec: &EndpointSpec, timeout: Duration) -> (RemoteNlu, TemplateNlu) {
    let env = DialogueEnv::bundled();
    let local = TemplateNlu::with_kb(&env.ontology, &env.kb, &bundled_synonyms());
    // the fallback knows no KB names, so a remote answer is distinguishable on names
    let fallback = TemplateNlu::new(&env.ontology, &bundled_synonyms());
    (RemoteNlu::connect(spec, timeout, fallback, env.ontology.clone()), local)
}

fn request_area() -> Vec<SemanticFrame> {
    vec![SemanticFrame::new("request").with_request("area")]
}

#[test]
fn healthy_component_over_pipes() {
    let (mut remote, local) = nlu(&server("none"), Duration::from_secs(5));
    assert_eq!(remote.endpoint.as_ref().unwrap().negotiated_name, "ref");
    for u in [UTTERANCE, "what is the phone number ?", "thanks , goodbye"] {
        assert_eq!(remote.understand(u), local.parse(u));
    }
    assert!(remote.events.is_empty());

    let mut g = RemoteNlg::connect(&server("none"), Duration::from_secs(5), TemplateSet::bundled_user());
    // the server realises with system templates; the fallback would use user ones
    assert_eq!(g.generate(&request_area()), TemplateSet::bundled_system().realize_all(&request_area()));
    assert!(g.events.is_empty());
}

#[test]
fn one_wrong_id_is_retried() {
    let (mut remote, local) = nlu(&server("wrong-id-once"), Duration::from_secs(5));
    assert_eq!(remote.understand(UTTERANCE), local.parse(UTTERANCE));
    assert!(remote.events.is_empty(), "{:?}", remote.events);
}

#[test]
fn persistent_faults_fall_back_with_an_event() {
    for fault in ["wrong-id", "garbage", "silent", "exit-after=1"] {
        let (mut remote, _) = nlu(&server(fault), Duration::from_millis(400));
        let first = remote.understand(UTTERANCE);
        let second = remote.understand(UTTERANCE);
        let expected = remote.fallback.parse(UTTERANCE);
        match fault {
            // the first reply is fine, the process is gone for the second
            "exit-after=1" => assert_eq!(remote.events.len(), 1, "{fault}"),
            _ => {
                assert_eq!(first, expected, "{fault}");
                assert_eq!(remote.events.len(), 2, "{fault}: {:?}", remote.events);
            }
        }
        assert_eq!(second, expected, "{fault}");
        assert!(remote.events.iter().all(|e| e.role == Role::Nlu && e.component == "ref"));
    }
}

#[test]
fn unreachable_component_degrades_at_connect() {
    let spec = EndpointSpec::Command(vec!["/nonexistent/component".into()]);
    let mut g = RemoteNlg::connect(&spec, Duration::from_secs(1), TemplateSet::bundled_system());
    assert!(g.endpoint.is_none());
    assert_eq!(g.events.len(), 1);
    assert_eq!(g.generate(&request_area()), "which area are you looking for ?");
}

struct Listener(Child);

impl Drop for Listener {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn tcp_component() {
    let mut child = Command::new(BIN)
        .args(["serve-templates", "--listen", "127.0.0.1:0", "--name", "tcp-ref"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let _guard = Listener(child);
    let addr = line.trim().strip_prefix("listening ").expect("address line").to_string();

    let spec = EndpointSpec::Tcp(addr);
    let (mut remote, local) = nlu(&spec, Duration::from_secs(5));
    assert_eq!(remote.endpoint.as_ref().unwrap().negotiated_name, "tcp-ref");
    assert_eq!(remote.understand(UTTERANCE), local.parse(UTTERANCE));
    // the listener serves connections one after another
    drop(remote);
    let start = Instant::now();
    let mut g = RemoteNlg::connect(&spec, Duration::from_secs(5), TemplateSet::bundled_user());
    assert_eq!(g.generate(&request_area()), "which area are you looking for ?");
    assert!(g.events.is_empty() && start.elapsed() < Duration::from_secs(5));
}
