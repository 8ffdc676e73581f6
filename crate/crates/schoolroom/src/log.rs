//! Structured progress lines: one JSON object per line on stderr.

use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};

use serde_json::{Map, Value};

static QUIET: AtomicBool = AtomicBool::new(false);

pub fn set_quiet(quiet: bool) {
    QUIET.store(quiet, Ordering::Relaxed);
}

/// Build the line without printing it.
pub fn line(stage: &str, event: &str, fields: Value) -> String {
    let mut obj = Map::new();
    obj.insert("stage".into(), stage.into());
    obj.insert("event".into(), event.into());
    if let Value::Object(extra) = fields {
        obj.extend(extra);
    }
    Value::Object(obj).to_string()
}

pub fn emit(stage: &str, event: &str, fields: Value) {
    if QUIET.load(Ordering::Relaxed) {
        return;
    }
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{}", line(stage, event, fields));
}
