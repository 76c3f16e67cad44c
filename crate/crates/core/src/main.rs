use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dialoforge::config::Config;
use dialoforge::corpus::{
    bundled_act_mapping, bundled_synonyms, generate_corpus, load_act_mapping, load_dialogues, load_synonyms,
    parse_pair, prepare_corpus, SynonymTable, SynthConfig,
};
use dialoforge::dialogue::{train_dm, GreedyPolicy, Policy, RulePolicy, TrainingReport};
use dialoforge::hpo::objectives::{quadratic, quadratic_space, DmObjective, ExternalObjective};
use dialoforge::hpo::{param_importance, MedianPruner, Objective, SamplerKind, SearchSpace, Study};
use dialoforge::metrics::{pairs_from_lines, score_nlg, score_nlu, NluExample, ScoredPair};
use dialoforge::ontology::{generate_kb, kb_query, KbRecord};
use dialoforge::pipeline::chat::{parse_goal, run_scripted, ChatSession};
use dialoforge::pipeline::protocol::{serve_templates, EndpointSpec, Fault, RemoteNlg, RemoteNlu, DEFAULT_TIMEOUT};
use dialoforge::pipeline::{TemplateNlu, TemplateSet};
use dialoforge::report::{nlu_table, tables_for_file, training_summary, Table};
use dialoforge::{stream_rng, AgentHyperParams, QAgent, Variant};

#[derive(Parser)]
#[command(name = "dialoforge", version, about = "Task-oriented dialogue workbench")]
struct Cli {
    /// Run configuration (JSON); defaults apply when omitted.
    #[arg(long, global = true, env = "DIALOFORGE_CONFIG")]
    config: Option<PathBuf>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build NLU and NLG train/test files from raw dialogues.
    Prep(PrepArgs),
    /// Generate or query the restaurant knowledge base.
    #[command(subcommand)]
    Kb(KbCmd),
    /// Train DQN/DDQN dialogue managers against the simulator.
    TrainDm(TrainArgs),
    /// Run a hyperparameter study.
    Hpo(HpoArgs),
    /// Score generated utterances against references.
    EvalNlg(EvalNlgArgs),
    /// Score NLU predictions against gold annotations.
    ScoreNlu(ScoreNluArgs),
    /// Talk to a trained dialogue manager.
    Chat(ChatArgs),
    /// Render tables from training reports, study logs and score files.
    Report(ReportArgs),
    #[command(hide = true)]
    ServeTemplates(ServeArgs),
}

#[derive(Args)]
struct PrepArgs {
    /// Dialogues in the MultiWOZ JSON layout.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    input: Option<PathBuf>,
    /// Generate this many simulated dialogues instead of reading a file.
    #[arg(long)]
    synthetic: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    act_map: Option<PathBuf>,
    #[arg(long)]
    synonyms: Option<PathBuf>,
    /// Split seed; the config seed when omitted.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum KbCmd {
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Print records matching every `--where slot=value`.
    Inspect {
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long = "where", value_parser = parse_kv)]
        filters: Vec<(String, String)>,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_delimiter = ',', default_value = "dqn,ddqn")]
    variant: Vec<Variant>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    measure_every: Option<usize>,
    /// Number of seeds, counted up from the config seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Use each variant's reference hyperparameters instead of the config's.
    #[arg(long)]
    reported: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveKind {
    Dm,
    Quadratic,
    External,
}

#[derive(Args)]
struct HpoArgs {
    /// Space file or bundled name (dm, nlg, nlu_bert, nlu_lstm); follows the
    /// objective when omitted.
    #[arg(long)]
    space: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value = "tpe")]
    sampler: SamplerKind,
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "dm")]
    objective: ObjectiveKind,
    /// Command run per trial for `--objective external`.
    #[arg(long)]
    command: Option<String>,
    #[arg(long, default_value_t = 2000)]
    episodes: usize,
    #[arg(long, default_value = "ddqn")]
    variant: Variant,
    /// Trial log (JSONL), written as trials finish.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Continue the study in `--log` instead of starting a new one.
    #[arg(long, requires = "log")]
    resume: bool,
    #[arg(long, default_value_t = 1)]
    warmup_steps: usize,
    #[arg(long)]
    no_prune: bool,
}

#[derive(Args)]
struct EvalNlgArgs {
    /// Hypotheses, one per line.
    #[arg(long, requires = "reference", conflicts_with = "template")]
    hyp: Option<PathBuf>,
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// Realise the frames of `--test` with the template generator.
    #[arg(long, requires = "test")]
    template: bool,
    /// `frames<||>utterance` lines.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreNluArgs {
    /// Gold annotations (JSONL).
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, required_unless_present = "template")]
    pred: Option<PathBuf>,
    /// Predict with the template parser.
    #[arg(long, conflicts_with = "pred")]
    template: bool,
    #[arg(long)]
    synonyms: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ChatArgs {
    /// Agent checkpoint; the rule policy when omitted.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// `cmd:<command line>` or `tcp:host:port`.
    #[arg(long)]
    nlu: Option<EndpointSpec>,
    #[arg(long)]
    nlg: Option<EndpointSpec>,
    #[arg(long, default_value_t = DEFAULT_TIMEOUT.as_millis() as u64)]
    timeout_ms: u64,
    /// Play N simulated users instead of reading stdin.
    #[arg(long)]
    script: Option<usize>,
    /// Goal for the session, e.g. `area=north food=indian request=phone`.
    #[arg(long)]
    goal: Option<String>,
    /// Write the turns as JSONL.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Csv,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "md")]
    format: Format,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "none")]
    fault: Fault,
    #[arg(long, default_value = "templates")]
    name: String,
    /// Serve over TCP instead of stdin/stdout.
    #[arg(long)]
    listen: Option<String>,
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("expected slot=value, got `{s}`"))
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli) {
        // most error types already print their source; skip repeats
        let mut msg = String::new();
        for cause in e.chain().map(ToString::to_string) {
            if !msg.contains(&cause) {
                msg = if msg.is_empty() { cause } else { format!("{msg}: {cause}") };
            }
        }
        eprintln!("error: {msg}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = Config::load(cli.config.as_deref())?;
    match cli.command {
        Cmd::Prep(a) => prep(&config, a),
        Cmd::Kb(k) => kb(&config, k),
        Cmd::TrainDm(a) => train(&config, a),
        Cmd::Hpo(a) => hpo(&config, a),
        Cmd::EvalNlg(a) => eval_nlg(a),
        Cmd::ScoreNlu(a) => score(&config, a),
        Cmd::Chat(a) => chat(&config, a),
        Cmd::Report(a) => report(a),
        Cmd::ServeTemplates(a) => serve(&config, a),
    }
}

fn synonyms(path: Option<&Path>) -> Result<SynonymTable> {
    Ok(match path {
        Some(p) => load_synonyms(p)?,
        None => bundled_synonyms(),
    })
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value)?;
    Ok(())
}

fn print_table(t: &Table) {
    // a closed pipe (`| head`) ends the program quietly
    if let Err(e) = writeln!(io::stdout().lock(), "{}", t.to_markdown()) {
        if e.kind() == io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        panic!("writing to stdout: {e}");
    }
}

fn prep(config: &Config, a: PrepArgs) -> Result<()> {
    let ontology = config.ontology()?;
    let seed = a.seed.unwrap_or(config.seed);
    let dialogues = match (&a.input, a.synthetic) {
        (Some(p), _) => load_dialogues(p)?,
        (None, Some(n)) => generate_corpus(
            &config.env()?,
            &SynthConfig {
                dialogues: n,
                seed,
                ..Default::default()
            },
        )?,
        (None, None) => unreachable!("clap requires one source"),
    };
    let mapping = match &a.act_map {
        Some(p) => load_act_mapping(p)?,
        None => bundled_act_mapping(),
    };
    let out = prepare_corpus(&dialogues, &mapping, &ontology, &synonyms(a.synonyms.as_deref())?, seed)?;
    out.write_to(&a.out)?;
    println!("{}", serde_json::to_string_pretty(&out.summary)?);
    Ok(())
}

fn kb(config: &Config, cmd: KbCmd) -> Result<()> {
    match cmd {
        KbCmd::Generate { out, n, seed } => {
            let kb = generate_kb(&config.ontology()?, seed, n)?;
            write_json(&out, &kb)?;
            eprintln!("wrote {} records to {}", kb.len(), out.display());
        }
        KbCmd::Inspect { kb, filters } => {
            let records: Vec<KbRecord> = match kb {
                Some(p) => dialoforge::ontology::load_kb(p)?,
                None => config.env()?.kb,
            };
            let constraints: BTreeMap<String, String> = filters.into_iter().collect();
            let hits = kb_query(&records, &constraints)?;
            let mut t = Table::new(
                &format!("{} of {} records", hits.len(), records.len()),
                &["name", "area", "food", "pricerange", "phone", "address", "postcode"],
            );
            for r in hits {
                t.push(vec![
                    r.name.clone(),
                    r.area.clone(),
                    r.food.clone(),
                    r.pricerange.clone(),
                    r.phone.clone(),
                    r.address.clone(),
                    r.postcode.clone(),
                ]);
            }
            print_table(&t);
        }
    }
    Ok(())
}

fn train(config: &Config, a: TrainArgs) -> Result<()> {
    let env = config.env()?;
    let mut tc = config.train.clone();
    if let Some(n) = a.episodes {
        tc.episodes = n;
        tc.measure_every = a.measure_every.unwrap_or((n / 10).max(1));
    } else if let Some(m) = a.measure_every {
        tc.measure_every = m;
    }
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut reports: Vec<TrainingReport> = Vec::new();
    for &variant in &a.variant {
        let hyper = if a.reported {
            AgentHyperParams::reported(variant)
        } else {
            config.agent.clone()
        };
        for k in 0..a.seeds {
            let run = dialoforge::dialogue::TrainConfig {
                seed: config.seed + k,
                ..tc.clone()
            };
            log::info!("training {variant} seed {}", run.seed);
            let (agent, report) = train_dm(&env, variant, hyper.clone(), &run, |w| {
                log::info!("  episode {:>6}: success {:.3}", w.end_episode, w.success_rate);
                true
            })?;
            agent.save(a.out.join(format!("{variant}_seed{}.json", run.seed)))?;
            reports.push(report);
        }
    }
    write_json(&a.out.join("training.json"), &reports)?;
    print_table(&training_summary(&reports));
    Ok(())
}

fn hpo(config: &Config, a: HpoArgs) -> Result<()> {
    let space = match (&a.space, a.objective) {
        (Some(s), _) => SearchSpace::load(s)?,
        (None, ObjectiveKind::Quadratic) => quadratic_space(),
        (None, _) => SearchSpace::load("dm")?,
    };
    let objective: Box<dyn Objective> = match a.objective {
        ObjectiveKind::Dm => Box::new(DmObjective::new(config.env()?, a.variant, a.episodes)),
        ObjectiveKind::Quadratic => Box::new(quadratic),
        ObjectiveKind::External => {
            let cmd = a.command.as_deref().context("--objective external needs --command")?;
            Box::new(ExternalObjective::from_command(cmd, &space.name)?)
        }
    };
    let pruner = (!a.no_prune).then(|| MedianPruner::new(a.warmup_steps));
    let mut study = match (&a.log, a.resume) {
        (Some(log), true) => {
            let mut s = Study::resume(log)?;
            if s.space != space {
                bail!("{} was recorded for a different search space", log.display());
            }
            s.pruner = pruner;
            s
        }
        _ => {
            let mut s = Study::new(space, a.sampler, a.seed.unwrap_or(config.seed));
            s.pruner = pruner;
            if let Some(log) = &a.log {
                s.attach_log(log)?;
            }
            s
        }
    };
    let n = a.trials.unwrap_or(study.space.n_trials);
    study.optimize(objective.as_ref(), n, a.parallel)?;
    print_table(&dialoforge::report::study_trials(&study));
    match param_importance(&study) {
        Ok(_) => print_table(&dialoforge::report::importance_table(&study)?),
        Err(e) => log::warn!("importance skipped: {e}"),
    }
    if let Some(best) = study.best_trial() {
        println!("best trial {}: {:.6}", best.id, best.value.unwrap_or(f64::NAN));
        println!("{}", serde_json::to_string(&best.params)?);
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn eval_nlg(a: EvalNlgArgs) -> Result<()> {
    let pairs: Vec<ScoredPair> = if a.template {
        let nlg = match &a.templates {
            Some(p) => TemplateSet::load(p)?,
            None => TemplateSet::bundled_system(),
        };
        let test = read(a.test.as_deref().expect("clap requires --test"))?;
        let mut pairs = Vec::new();
        for line in test.lines().filter(|l| !l.trim().is_empty()) {
            let (frames, reference) = parse_pair(line)?;
            pairs.push(ScoredPair::from_text(&nlg.realize_all(&frames), &reference));
        }
        pairs
    } else {
        let (Some(h), Some(r)) = (&a.hyp, &a.reference) else {
            bail!("give --hyp and --ref, or --template --test FILE");
        };
        pairs_from_lines(&read(h)?, &read(r)?)?
    };
    let scores = score_nlg(&pairs)?;
    let json = serde_json::to_string_pretty(&scores)?;
    match &a.out {
        Some(p) => fs::write(p, &json).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{json}"),
    }
    print_table(&dialoforge::report::nlg_table(&[("scores".into(), scores)]));
    Ok(())
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn score(config: &Config, a: ScoreNluArgs) -> Result<()> {
    let gold: Vec<NluExample> = read_jsonl(&a.gold)?;
    let pred: Vec<NluExample> = if a.template {
        #[derive(serde::Deserialize)]
        struct Tokens {
            tokens: Vec<String>,
        }
        let env = config.env()?;
        let syn = synonyms(a.synonyms.as_deref())?;
        let nlu = TemplateNlu::with_kb(&env.ontology, &env.kb, &syn);
        read_jsonl::<Tokens>(&a.gold)?
            .iter()
            .map(|t| {
                let u = nlu.tag(&t.tokens.join(" "), &env.ontology, &syn)?;
                Ok(NluExample {
                    intent: u.intent,
                    inform_tags: u.inform_tags,
                    request_tags: u.request_tags,
                })
            })
            .collect::<Result<_>>()?
    } else {
        read_jsonl(a.pred.as_deref().expect("clap requires --pred"))?
    };
    let scores = score_nlu(&pred, &gold)?;
    if let Some(p) = &a.out {
        write_json(p, &scores)?;
    }
    print_table(&nlu_table(&scores));
    Ok(())
}

fn chat(config: &Config, a: ChatArgs) -> Result<()> {
    let env = config.env()?;
    let syn = bundled_synonyms();
    let agent = match &a.checkpoint {
        Some(p) => {
            let agent = QAgent::load(p)?;
            env.check_agent(&agent)?;
            Some(agent)
        }
        None => None,
    };
    let policy: Box<dyn Policy + '_> = match &agent {
        Some(agent) => Box::new(GreedyPolicy(agent)),
        None => Box::new(RulePolicy::new(&env.ontology)),
    };
    let timeout = Duration::from_millis(a.timeout_ms);
    let template_nlu = TemplateNlu::with_kb(&env.ontology, &env.kb, &syn);
    let nlu = match &a.nlu {
        Some(spec) => RemoteNlu::connect(spec, timeout, template_nlu, env.ontology.clone()),
        None => RemoteNlu::new(None, template_nlu, env.ontology.clone()),
    };
    let nlg = match &a.nlg {
        Some(spec) => RemoteNlg::connect(spec, timeout, TemplateSet::bundled_system()),
        None => RemoteNlg::new(None, TemplateSet::bundled_system()),
    };
    let mut session = ChatSession::new(&env, policy, Box::new(nlu), Box::new(nlg));
    let goal = a.goal.as_deref().map(parse_goal).transpose().map_err(anyhow::Error::msg)?;
    let mut transcript = Vec::new();

    if let Some(n) = a.script {
        let mut rng = stream_rng(config.seed, 0xc4a7);
        let mut user_nlg = TemplateSet::bundled_user();
        let mut complete = 0;
        for episode in 0..n {
            session.reset();
            let g = match &goal {
                Some(g) => g.clone(),
                None => env.sample_goal(&mut rng)?,
            };
            let replies = run_scripted(&mut session, g, &mut user_nlg, &mut rng)?;
            let ok = session.goal_status().is_some_and(|s| s.complete());
            complete += usize::from(ok);
            println!("episode {episode}: {} agent turns, goal {}", replies.len(), if ok { "met" } else { "not met" });
            for turn in session.transcript() {
                println!("  {:?}: {}", turn.speaker, turn.utterance.as_deref().unwrap_or(""));
            }
            transcript.push((episode, session.transcript().to_vec()));
        }
        println!("goals met: {complete}/{n}");
    } else {
        if let Some(g) = goal {
            session.set_goal(g);
        }
        eprintln!("type a request; /state, /goal slot=value ..., /reset, /quit");
        let stdin = io::stdin();
        let mut out = io::stdout().lock();
        for line in stdin.lock().lines() {
            let reply = session.handle(&line?)?;
            writeln!(out, "{}", reply.text)?;
            out.flush()?;
            if reply.finished {
                break;
            }
        }
        transcript.push((0, session.transcript().to_vec()));
    }
    if let Some(p) = &a.transcript {
        let mut f = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
        for (episode, turns) in &transcript {
            for t in turns {
                let mut v = serde_json::to_value(t)?;
                v["episode"] = (*episode).into();
                writeln!(f, "{v}")?;
            }
        }
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    for f in &a.files {
        for t in tables_for_file(f)? {
            match a.format {
                Format::Md => print_table(&t),
                Format::Csv => print!("{}", t.to_csv()?),
            }
        }
    }
    Ok(())
}

fn serve(config: &Config, a: ServeArgs) -> Result<()> {
    let env = config.env()?;
    let nlu = TemplateNlu::with_kb(&env.ontology, &env.kb, &bundled_synonyms());
    let nlg = TemplateSet::bundled_system();
    match &a.listen {
        None => serve_templates(io::stdin().lock(), io::stdout().lock(), &nlu, &nlg, &a.name, a.fault)?,
        Some(addr) => {
            let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
            // the test harness reads the bound port from this line
            println!("listening {}", listener.local_addr()?);
            io::stdout().flush()?;
            for stream in listener.incoming() {
                let stream = stream?;
                let reader = BufReader::new(stream.try_clone()?);
                if let Err(e) = serve_templates(reader, stream, &nlu, &nlg, &a.name, a.fault) {
                    log::warn!("connection ended: {e}");
                }
            }
        }
    }
    Ok(())
}

