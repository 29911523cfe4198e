use serde::{Deserialize, Serialize};

use super::graph::{ResultResolver, Scene};
use super::instruction::EditInstruction;
use super::{EditError, LogParseError, ReplayError};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EditLog {
    pub instructions: Vec<EditInstruction>,
    #[serde(default)]
    pub initial_scene_ref: Option<String>,
}

impl EditLog {
    pub fn new(instructions: Vec<EditInstruction>) -> Self {
        Self {
            instructions,
            initial_scene_ref: None,
        }
    }

    /// Parses JSON lines; blank lines are skipped.
    pub fn from_jsonl(text: &str) -> Result<EditLog, LogParseError> {
        let mut instructions = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let instr: EditInstruction = serde_json::from_str(line).map_err(|e| LogParseError {
                line: n + 1,
                message: e.to_string(),
            })?;
            instructions.push(instr);
        }
        let log = EditLog::new(instructions);
        log.check_order().map_err(|(i, message)| LogParseError { line: i + 1, message })?;
        Ok(log)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for instr in &self.instructions {
            out.push_str(&serde_json::to_string(instr).expect("instruction serializes"));
            out.push('\n');
        }
        out
    }

    fn check_order(&self) -> Result<(), (usize, String)> {
        for (i, pair) in self.instructions.windows(2).enumerate() {
            if pair[1].seq <= pair[0].seq {
                return Err((
                    i + 1,
                    format!("seq {} does not follow {}", pair[1].seq, pair[0].seq),
                ));
            }
        }
        Ok(())
    }
}

/// Folds the log over `initial` in seq order. On failure the error carries
/// the offending seq and the scene as it stood before that instruction.
pub fn replay_log(initial: &Scene, log: &EditLog, results: &dyn ResultResolver) -> Result<Scene, ReplayError> {
    if let Err((i, message)) = log.check_order() {
        return Err(ReplayError {
            seq: log.instructions[i].seq,
            source: EditError::MalformedInstruction(message),
            partial: Box::new(initial.clone()),
        });
    }
    let mut scene = initial.clone();
    for instr in &log.instructions {
        if let Err(source) = scene.apply(instr, results) {
            return Err(ReplayError {
                seq: instr.seq,
                source,
                partial: Box::new(scene),
            });
        }
    }
    Ok(scene)
}
