//! Serves the template components over TCP on a local port, connects the
//! remote NLU/NLG wrappers to them, then shows the fallback once the server
//! starts answering with garbage.

use std::io::BufReader;
use std::net::TcpListener;
use std::time::Duration;

use dialoforge::corpus::bundled_synonyms;
use dialoforge::pipeline::protocol::{serve_templates, EndpointSpec, Fault, Generate, RemoteNlg, RemoteNlu, Understand};
use dialoforge::pipeline::{SemanticFrame, TemplateNlu, TemplateSet};
use dialoforge::DialogueEnv;

fn spawn_server(fault: Fault) -> anyhow::Result<String> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?.to_string();
    std::thread::spawn(move || {
        let env = DialogueEnv::bundled();
        let nlu = TemplateNlu::with_kb(&env.ontology, &env.kb, &bundled_synonyms());
        let nlg = TemplateSet::bundled_system();
        for stream in listener.incoming().flatten() {
            let reader = BufReader::new(stream.try_clone().expect("clone socket"));
            let _ = serve_templates(reader, stream, &nlu, &nlg, "tcp-templates", fault);
        }
    });
    Ok(addr)
}

fn main() -> anyhow::Result<()> {
    let env = DialogueEnv::bundled();
    let fallback = || TemplateNlu::new(&env.ontology, &bundled_synonyms());
    let timeout = Duration::from_secs(2);

    let mut nlu = RemoteNlu::connect(&EndpointSpec::Tcp(spawn_server(Fault::None)?), timeout, fallback(), env.ontology.clone());
    let frame = nlu.understand("i would like expensive italian food");
    println!("remote nlu: {frame}  (events: {})", nlu.events.len());

    let mut nlg = RemoteNlg::connect(&EndpointSpec::Tcp(spawn_server(Fault::Garbage)?), timeout, TemplateSet::bundled_system());
    let text = nlg.generate(&[SemanticFrame::parse("request(area)")?]);
    println!("degraded nlg: {text}");
    for e in &nlg.events {
        println!("  {} `{}`: {}", e.role, e.component, e.reason);
    }
    Ok(())
}
