use super::CorpusError;
use crate::pipeline::frame::{parse_frames_prefix, render_frames, SemanticFrame};

pub const DELIMITER: &str = "<||>";

/// `act(k=v) <||> utterance` on one line.
pub fn serialize_pair(frame: &SemanticFrame, utterance: &str) -> Result<String, CorpusError> {
    serialize_frames_pair(std::slice::from_ref(frame), utterance)
}

pub fn serialize_frames_pair(frames: &[SemanticFrame], utterance: &str) -> Result<String, CorpusError> {
    if frames.is_empty() {
        return Err(CorpusError::Format {
            context: "serialize".into(),
            message: "at least one frame is required".into(),
        });
    }
    if utterance.contains(DELIMITER) {
        return Err(CorpusError::DelimiterInUtterance);
    }
    if utterance.contains(['\n', '\r']) {
        return Err(CorpusError::LineBreak);
    }
    Ok(format!("{} {DELIMITER} {utterance}", render_frames(frames)?))
}

/// Inverse of [`serialize_frames_pair`]. The frame grammar is parsed first, so
/// a delimiter-like sequence inside an escaped value cannot confuse the split.
pub fn parse_pair(line: &str) -> Result<(Vec<SemanticFrame>, String), CorpusError> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    if line.contains(['\n', '\r']) {
        return Err(CorpusError::LineBreak);
    }
    let (frames, used) = parse_frames_prefix(line)?;
    if frames.is_empty() {
        return Err(CorpusError::Format {
            context: "parse_pair".into(),
            message: "line does not start with a frame".into(),
        });
    }
    let rest = line[used..]
        .strip_prefix(" <||> ")
        .or_else(|| (&line[used..] == " <||>").then_some(""))
        .ok_or(CorpusError::MissingDelimiter)?;
    if rest.contains(DELIMITER) {
        return Err(CorpusError::DelimiterInUtterance);
    }
    Ok((frames, rest.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_example() {
        let f = SemanticFrame::new("inform").with_slot("phone", "123");
        let line = serialize_pair(&f, "the phone number is 123").unwrap();
        assert_eq!(line, "inform(phone=123) <||> the phone number is 123");
        assert_eq!(parse_pair(&line).unwrap(), (vec![f], "the phone number is 123".to_string()));
    }

    #[test]
    fn delimiter_in_utterance_is_rejected() {
        let f = SemanticFrame::new("greet");
        assert!(matches!(serialize_pair(&f, "a <||> b"), Err(CorpusError::DelimiterInUtterance)));
        assert!(matches!(serialize_pair(&f, "a\nb"), Err(CorpusError::LineBreak)));
        assert!(matches!(parse_pair("greet() <||> a <||> b"), Err(CorpusError::DelimiterInUtterance)));
    }

    #[test]
    fn escaped_values_survive() {
        let f = SemanticFrame::new("inform").with_slot("name", "a (b), c; d=e <||> x");
        let g = SemanticFrame::new("request").with_request("phone");
        let line = serialize_frames_pair(&[f.clone(), g.clone()], "  spaced ").unwrap();
        assert_eq!(parse_pair(&line).unwrap(), (vec![f, g], "  spaced ".to_string()));
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(parse_pair("greet()"), Err(CorpusError::MissingDelimiter)));
        assert!(matches!(parse_pair("greet()<||> hi"), Err(CorpusError::MissingDelimiter)));
        assert!(parse_pair(" <||> hi").is_err());
        assert_eq!(parse_pair("bye() <||> ").unwrap().1, "");
    }
}
