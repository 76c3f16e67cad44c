//! Semantic frames and their canonical one-line rendering.
//!
//! A frame renders as `act(k1=v1, k2=v2, r1, r2)`: slot pairs sorted by name,
//! then bare request names. Several frames join with `"; "`. Inside values the
//! characters `\ , ; ( ) =` are backslash-escaped, so rendering is injective
//! and [`parse_frames`] inverts [`render_frames`] exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::DomainOntology;

const SPECIAL: &[char] = &['\\', ',', ';', '(', ')', '='];

#[derive(Debug, Error, PartialEq)]
pub enum FrameError {
    #[error("invalid name `{0}`: names use letters, digits, `_`, `-` or `.`")]
    BadName(String),
    #[error("parse error at byte {pos}: {message}")]
    Parse { pos: usize, message: String },
    #[error("act `{0}` is not an ontology intent")]
    UnknownAct(String),
    #[error("slot `{0}` is not in the ontology")]
    UnknownSlot(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SemanticFrame {
    pub act: String,
    #[serde(default)]
    pub slots: BTreeMap<String, String>,
    #[serde(default)]
    pub requests: BTreeSet<String>,
}

impl SemanticFrame {
    pub fn new(act: impl Into<String>) -> Self {
        SemanticFrame {
            act: act.into(),
            ..Default::default()
        }
    }

    pub fn with_slot(mut self, slot: impl Into<String>, value: impl Into<String>) -> Self {
        self.slots.insert(slot.into(), value.into());
        self
    }

    pub fn with_request(mut self, slot: impl Into<String>) -> Self {
        self.requests.insert(slot.into());
        self
    }

    /// Checks that the act is an intent and every slot name exists.
    pub fn validate(&self, ontology: &DomainOntology) -> Result<(), FrameError> {
        if !ontology.has_intent(&self.act) {
            return Err(FrameError::UnknownAct(self.act.clone()));
        }
        for slot in self.slots.keys().chain(self.requests.iter()) {
            if !ontology.has_slot(slot) {
                return Err(FrameError::UnknownSlot(slot.clone()));
            }
        }
        Ok(())
    }

    /// Checks that every name is renderable.
    pub fn check_names(&self) -> Result<(), FrameError> {
        for name in std::iter::once(&self.act).chain(self.slots.keys()).chain(self.requests.iter()) {
            if !is_name(name) {
                return Err(FrameError::BadName(name.clone()));
            }
        }
        Ok(())
    }

    pub fn render(&self) -> Result<String, FrameError> {
        self.check_names()?;
        Ok(self.to_string())
    }

    pub fn parse(text: &str) -> Result<Self, FrameError> {
        let mut frames = parse_frames(text)?;
        if frames.len() != 1 {
            return Err(FrameError::Parse {
                pos: 0,
                message: format!("expected one frame, found {}", frames.len()),
            });
        }
        Ok(frames.remove(0))
    }
}

/// Renders without validating names; use [`SemanticFrame::render`] for checked output.
impl fmt::Display for SemanticFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.act)?;
        let mut first = true;
        for (k, v) in &self.slots {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "{k}={}", escape(v))?;
        }
        for r in &self.requests {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            f.write_str(r)?;
        }
        f.write_str(")")
    }
}

pub fn is_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

pub fn escape(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        if SPECIAL.contains(&c) {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

pub fn render_frames(frames: &[SemanticFrame]) -> Result<String, FrameError> {
    let parts = frames.iter().map(SemanticFrame::render).collect::<Result<Vec<_>, _>>()?;
    Ok(parts.join("; "))
}

pub fn parse_frames(text: &str) -> Result<Vec<SemanticFrame>, FrameError> {
    let (frames, used) = parse_frames_prefix(text)?;
    if used != text.len() {
        return Err(FrameError::Parse {
            pos: used,
            message: "trailing text after frames".into(),
        });
    }
    Ok(frames)
}

/// Parses as many frames as the grammar allows from the start of `text` and
/// returns them with the number of bytes consumed.
pub fn parse_frames_prefix(text: &str) -> Result<(Vec<SemanticFrame>, usize), FrameError> {
    let mut p = Parser { s: text, pos: 0 };
    let mut frames = Vec::new();
    if p.peek().is_none_or(|c| !is_name_char(c)) {
        return Ok((frames, 0));
    }
    loop {
        frames.push(p.frame()?);
        if p.rest().starts_with("; ") {
            p.pos += 2;
        } else {
            break;
        }
    }
    Ok((frames, p.pos))
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.')
}

struct Parser<'a> {
    s: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn rest(&self) -> &str {
        &self.s[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, FrameError> {
        Err(FrameError::Parse {
            pos: self.pos,
            message: message.into(),
        })
    }

    fn expect(&mut self, c: char) -> Result<(), FrameError> {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn name(&mut self) -> Result<String, FrameError> {
        let start = self.pos;
        while let Some(c) = self.peek().filter(|c| is_name_char(*c)) {
            self.pos += c.len_utf8();
        }
        if self.pos == start {
            return self.err("expected a name");
        }
        Ok(self.s[start..self.pos].to_string())
    }

    fn value(&mut self) -> Result<String, FrameError> {
        let mut out = String::new();
        while let Some(c) = self.peek() {
            match c {
                '\\' => {
                    self.pos += 1;
                    match self.peek() {
                        Some(e) if SPECIAL.contains(&e) => {
                            out.push(e);
                            self.pos += e.len_utf8();
                        }
                        _ => return self.err("bad escape"),
                    }
                }
                ',' | ')' => break,
                ';' | '(' | '=' => return self.err(format!("unescaped `{c}` in value")),
                _ => {
                    out.push(c);
                    self.pos += c.len_utf8();
                }
            }
        }
        Ok(out)
    }

    fn frame(&mut self) -> Result<SemanticFrame, FrameError> {
        let mut frame = SemanticFrame::new(self.name()?);
        self.expect('(')?;
        if self.peek() == Some(')') {
            self.pos += 1;
            return Ok(frame);
        }
        let mut last_slot: Option<String> = None;
        let mut in_requests = false;
        loop {
            let name = self.name()?;
            if self.peek() == Some('=') {
                if in_requests {
                    return self.err("slot pair after request names");
                }
                self.pos += 1;
                if last_slot.as_deref().is_some_and(|prev| prev >= name.as_str()) {
                    return self.err("slot names must be strictly sorted");
                }
                let value = self.value()?;
                frame.slots.insert(name.clone(), value);
                last_slot = Some(name);
            } else {
                if frame.requests.last().is_some_and(|prev| prev >= &name) {
                    return self.err("request names must be strictly sorted");
                }
                in_requests = true;
                frame.requests.insert(name);
            }
            match self.peek() {
                Some(')') => {
                    self.pos += 1;
                    return Ok(frame);
                }
                Some(',') if self.rest().starts_with(", ") => self.pos += 2,
                _ => return self.err("expected `, ` or `)`"),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_rendering() {
        let f = SemanticFrame::new("inform").with_slot("phone", "123");
        assert_eq!(f.render().unwrap(), "inform(phone=123)");
        let g = SemanticFrame::new("request")
            .with_request("phone")
            .with_slot("food", "thai")
            .with_slot("area", "north")
            .with_request("address");
        assert_eq!(g.render().unwrap(), "request(area=north, food=thai, address, phone)");
        assert_eq!(SemanticFrame::new("bye").render().unwrap(), "bye()");
    }

    #[test]
    fn escapes_survive_round_trip() {
        let f = SemanticFrame::new("inform")
            .with_slot("address", "1 (old) road, cb1=x; \\ end")
            .with_slot("name", " padded ");
        let text = f.render().unwrap();
        assert_eq!(SemanticFrame::parse(&text).unwrap(), f);
    }

    #[test]
    fn multiple_frames() {
        let frames = vec![
            SemanticFrame::new("inform").with_slot("area", "north"),
            SemanticFrame::new("request").with_request("phone"),
        ];
        let text = render_frames(&frames).unwrap();
        assert_eq!(text, "inform(area=north); request(phone)");
        assert_eq!(parse_frames(&text).unwrap(), frames);
        assert_eq!(parse_frames("").unwrap(), vec![]);
    }

    #[test]
    fn rejects_non_canonical_text() {
        for bad in [
            "inform(b=1, a=2)",
            "inform(a=1,b=2)",
            "inform(x, a=1)",
            "inform(a=1",
            "inform(a=(1))",
            "inform(a=1)x",
            "inform(a=1);inform()",
        ] {
            assert!(parse_frames(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn bad_names_are_rejected() {
        let f = SemanticFrame::new("in form");
        assert!(matches!(f.render(), Err(FrameError::BadName(_))));
        let g = SemanticFrame::new("inform").with_slot("a=b", "x");
        assert!(g.render().is_err());
    }

    #[test]
    fn ontology_validation() {
        let o = DomainOntology::bundled();
        assert!(SemanticFrame::new("inform").with_slot("area", "north").validate(&o).is_ok());
        assert_eq!(
            SemanticFrame::new("dance").validate(&o),
            Err(FrameError::UnknownAct("dance".into()))
        );
        assert!(SemanticFrame::new("request").with_request("colour").validate(&o).is_err());
    }
}
