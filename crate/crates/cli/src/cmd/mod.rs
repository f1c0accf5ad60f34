pub mod analyze;
pub mod exec;
pub mod passk;
pub mod score;
pub mod simulate;
pub mod stats;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::failure::{CmdResult, Context};

fn ensure_parent(path: &Path) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).infra_ctx(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> CmdResult {
    ensure_parent(path)?;
    fs::write(path, text).infra_ctx(|| format!("writing {}", path.display()))
}

pub fn write_lines<T: Serialize>(path: &Path, records: &[T]) -> CmdResult {
    ensure_parent(path)?;
    let file = fs::File::create(path).infra_ctx(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    passweight::interchange::write_jsonl(&mut out, records)
        .and_then(|_| out.flush())
        .infra_ctx(|| format!("writing {}", path.display()))
}

pub fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Writes a JSON report to `out`, or to standard output.
pub fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> CmdResult {
    let text = pretty(value);
    match out {
        Some(path) => write_text(path, &text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .infra_ctx(|| "writing to standard output".into())
        }
    }
}
