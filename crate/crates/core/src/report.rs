//! Tables for training runs, studies and component scores, rendered as CSV
//! or markdown.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::dialogue::TrainingReport;
use crate::hpo::{param_importance, HpoError, Study, TrialStatus};
use crate::metrics::{NlgScores, NluScores};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}: not a training report, study log, NLU or NLG score file")]
    Unrecognised(String),
    #[error(transparent)]
    Hpo(#[from] HpoError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn num(x: f64) -> String {
    format!("{x:.4}")
}

impl Table {
    pub fn new(title: &str, headers: &[&str]) -> Self {
        Table {
            title: title.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
    }

    pub fn to_markdown(&self) -> String {
        let esc = |s: &str| s.replace('|', "\\|");
        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "### {}\n", self.title);
        }
        let _ = writeln!(out, "| {} |", self.headers.iter().map(|h| esc(h)).collect::<Vec<_>>().join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(self.headers.len()));
        for r in &self.rows {
            let _ = writeln!(out, "| {} |", r.iter().map(|c| esc(c)).collect::<Vec<_>>().join(" | "));
        }
        out
    }
}

/// Per-window learning curves, one row per (variant, seed, window).
pub fn training_curves(reports: &[TrainingReport]) -> Table {
    let mut t = Table::new(
        "Training curves",
        &[
            "variant",
            "seed",
            "end_episode",
            "success_rate",
            "avg_reward",
            "avg_turns",
            "epsilon",
            "eval_success_rate",
        ],
    );
    for r in reports {
        for w in &r.windows {
            t.push(vec![
                r.variant.to_string(),
                r.seed.to_string(),
                w.end_episode.to_string(),
                num(w.success_rate),
                num(w.avg_reward),
                num(w.avg_turns),
                num(w.epsilon),
                w.eval.map(|e| num(e.success_rate)).unwrap_or_default(),
            ]);
        }
    }
    t
}

/// Final greedy evaluation averaged over seeds, one row per variant.
pub fn training_summary(reports: &[TrainingReport]) -> Table {
    let mut t = Table::new(
        "Final evaluation (mean over seeds)",
        &["variant", "seeds", "success_rate", "avg_reward", "avg_turns"],
    );
    let mut by_variant: BTreeMap<String, Vec<&TrainingReport>> = BTreeMap::new();
    for r in reports {
        by_variant.entry(r.variant.to_string()).or_default().push(r);
    }
    for (variant, rs) in by_variant {
        let n = rs.len() as f64;
        let mean = |f: &dyn Fn(&TrainingReport) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n;
        t.push(vec![
            variant,
            rs.len().to_string(),
            num(mean(&|r| r.final_eval.success_rate)),
            num(mean(&|r| r.final_eval.avg_reward)),
            num(mean(&|r| r.final_eval.avg_turns)),
        ]);
    }
    t
}

/// Per-tag precision, recall and F1 followed by the overall scores.
pub fn nlu_table(scores: &NluScores) -> Table {
    let mut t = Table::new("NLU scores", &["tag", "precision", "recall", "f1", "support"]);
    for (tag, s) in &scores.per_tag {
        t.push(vec![tag.clone(), num(s.precision), num(s.recall), num(s.f1), s.support.to_string()]);
    }
    let blank = || String::new();
    for (name, v) in [
        ("intent accuracy", scores.intent_accuracy),
        ("inform slot f1", scores.inform_slot_f1),
        ("request slot f1", scores.request_slot_f1),
        ("average accuracy", scores.average_accuracy()),
    ] {
        t.push(vec![name.into(), blank(), blank(), num(v), blank()]);
    }
    t
}

pub fn nlg_table(rows: &[(String, NlgScores)]) -> Table {
    let mut t = Table::new("NLG scores", &["system", "bleu", "meteor", "rouge1", "rouge2", "rougeL", "mean"]);
    for (name, s) in rows {
        t.push(vec![
            name.clone(),
            num(s.bleu),
            num(s.meteor),
            num(s.rouge1),
            num(s.rouge2),
            num(s.rouge_l),
            num(s.mean()),
        ]);
    }
    t
}

/// Every trial with its parameters, value and status, best first.
pub fn study_trials(study: &Study) -> Table {
    let names: Vec<&str> = study.space.params.iter().map(|p| p.name.as_str()).collect();
    let mut headers = vec!["trial", "status", "value", "steps"];
    headers.extend(&names);
    let mut t = Table::new(&format!("Study {} ({})", study.space.name, study.direction()), &headers);
    let mut trials: Vec<_> = study.trials().iter().collect();
    let dir = study.direction();
    trials.sort_by(|a, b| match (a.value, b.value, a.status, b.status) {
        (Some(x), Some(y), TrialStatus::Complete, TrialStatus::Complete) if dir.better(x, y) => std::cmp::Ordering::Less,
        (Some(x), Some(y), TrialStatus::Complete, TrialStatus::Complete) if dir.better(y, x) => {
            std::cmp::Ordering::Greater
        }
        (_, _, TrialStatus::Complete, s) if s != TrialStatus::Complete => std::cmp::Ordering::Less,
        (_, _, s, TrialStatus::Complete) if s != TrialStatus::Complete => std::cmp::Ordering::Greater,
        _ => a.id.cmp(&b.id),
    });
    for tr in trials {
        let mut row = vec![
            tr.id.to_string(),
            format!("{:?}", tr.status).to_lowercase(),
            tr.value.map(num).unwrap_or_default(),
            tr.intermediate.len().to_string(),
        ];
        row.extend(names.iter().map(|n| match tr.params.get(*n) {
            Some(serde_json::Value::Number(x)) if x.is_f64() => format!("{:.6}", x.as_f64().unwrap_or_default()),
            Some(v) => v.to_string(),
            None => String::new(),
        }));
        t.push(row);
    }
    t
}

pub fn importance_table(study: &Study) -> Result<Table, ReportError> {
    let mut t = Table::new("Parameter importance", &["parameter", "importance"]);
    let mut scores: Vec<(String, f64)> = param_importance(study)?.into_iter().collect();
    scores.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (name, s) in scores {
        t.push(vec![name, num(s)]);
    }
    Ok(t)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Input {
    Reports(Vec<TrainingReport>),
    Report(Box<TrainingReport>),
    Nlu(NluScores),
    Nlg(NlgScores),
    NamedNlg(BTreeMap<String, NlgScores>),
}

/// Tables for whatever `text` holds: training report(s), a study log, NLU
/// scores, or NLG scores (single or keyed by system name).
pub fn tables_for(text: &str, origin: &str) -> Result<Vec<Table>, ReportError> {
    if text.trim_start().starts_with(r#"{"record":"study""#) {
        let study = Study::from_jsonl(text.as_bytes())?;
        let mut out = vec![study_trials(&study)];
        if let Ok(t) = importance_table(&study) {
            out.push(t);
        }
        return Ok(out);
    }
    let input: Input = serde_json::from_str(text).map_err(|_| ReportError::Unrecognised(origin.into()))?;
    Ok(match input {
        Input::Reports(rs) => vec![training_summary(&rs), training_curves(&rs)],
        Input::Report(r) => {
            let rs = [*r];
            vec![training_summary(&rs), training_curves(&rs)]
        }
        Input::Nlu(s) => vec![nlu_table(&s)],
        Input::Nlg(s) => vec![nlg_table(&[(origin.to_string(), s)])],
        Input::NamedNlg(m) => vec![nlg_table(&m.into_iter().collect::<Vec<_>>())],
    })
}

pub fn tables_for_file(path: impl AsRef<Path>) -> Result<Vec<Table>, ReportError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ReportError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    tables_for(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hpo::objectives::{quadratic, quadratic_space};
    use crate::hpo::{run_study, StudyOptions};
    use crate::metrics::TagScore;

    #[test]
    fn csv_quotes_and_markdown_escapes() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec!["x,y".into(), "p|q".into()]);
        assert_eq!(t.to_csv().unwrap(), "a,b\n\"x,y\",p|q\n");
        assert_eq!(t.to_markdown(), "### t\n\n| a | b |\n|---|---|\n| x,y | p\\|q |\n");
    }

    #[test]
    fn nlu_rows() {
        let s = NluScores {
            intent_accuracy: 1.0,
            inform_slot_f1: 0.5,
            request_slot_f1: 0.0,
            per_tag: BTreeMap::from([(
                "inform:B-AREA".to_string(),
                TagScore {
                    precision: 1.0,
                    recall: 0.5,
                    f1: 2.0 / 3.0,
                    support: 2,
                },
            )]),
        };
        let t = nlu_table(&s);
        assert_eq!(t.rows[0], vec!["inform:B-AREA", "1.0000", "0.5000", "0.6667", "2"]);
        assert_eq!(t.rows.last().unwrap()[3], "0.5000");
    }

    #[test]
    fn study_log_renders_best_first() {
        let s = run_study(quadratic_space(), &quadratic, &StudyOptions { n_trials: 10, ..Default::default() }).unwrap();
        let tables = tables_for(&s.to_jsonl().unwrap(), "s.jsonl").unwrap();
        assert_eq!(tables.len(), 2);
        assert_eq!(tables[0].rows[0][0], s.best_trial().unwrap().id.to_string());
        assert_eq!(tables[0].rows.len(), 10);
        assert!(tables_for("[1,2]", "x").is_err());
    }

    #[test]
    fn nlg_scores_by_name() {
        let json = r#"{"templates": {"bleu": 0.1, "meteor": 0.2, "rouge1": 0.3, "rouge2": 0.2, "rougeL": 0.3}}"#;
        let t = &tables_for(json, "x").unwrap()[0];
        assert_eq!(t.rows[0][0], "templates");
        assert_eq!(t.rows[0][6], "0.2200");
    }
}
