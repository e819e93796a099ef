use std::io::Write;

use super::ConversationOutcome;
use crate::error::{Error, Result};

const SILENCE: &str = "(silence)";

/// Transcript rows: `round, sender, message` for each message (M is the
/// DM's machine, W the informant), then `action, complexity`.
pub fn transcript_lines(outcome: &ConversationOutcome, action_name: &str) -> Vec<Vec<String>> {
    let mut rows = vec![vec![
        "round".to_string(),
        "sender".to_string(),
        "message".to_string(),
    ]];
    for (i, ex) in outcome.view.history.iter().enumerate() {
        let round = (i + 1).to_string();
        rows.push(vec![round.clone(), "M".into(), ex.sent.clone()]);
        rows.push(vec![
            round,
            "W".into(),
            ex.reply.clone().unwrap_or_else(|| SILENCE.to_string()),
        ]);
    }
    rows.push(vec!["action".into(), "complexity".into()]);
    rows.push(vec![
        action_name.to_string(),
        outcome.complexity.to_string(),
    ]);
    rows
}

pub fn write_transcript(
    outcome: &ConversationOutcome,
    action_name: &str,
    out: impl Write,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    for row in transcript_lines(outcome, action_name) {
        w.write_record(&row)
            .map_err(|e| Error::Invalid(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(())
}
