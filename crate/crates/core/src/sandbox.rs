//! Runs candidate programs against a test suite.
//!
//! Every test gets a fresh scratch directory holding a copy of the source.
//! The candidate runs in its own process group with a cleared environment,
//! stdin fed from the test input, and stdout/stderr captured up to a byte
//! cap. The whole group is killed when the wall-clock limit passes, when
//! stdout overflows the cap, and after the main process exits (so stray
//! children never outlive the test). Scratch directories are removed when
//! the run finishes.
//!
//! Isolation is process level only. There is no filesystem jail, network
//! namespace or seccomp filter; wrap the command template in a jail runner
//! if candidates may be hostile.

use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Problem, UnitTest};

/// Placeholder replaced by the absolute path of the source file.
pub const SOURCE_PLACEHOLDER: &str = "{src}";

/// Environment variable naming the directory scratch space is created in.
pub const SCRATCH_ENV: &str = "PASSWEIGHT_SCRATCH_DIR";

const POLL_INTERVAL: Duration = Duration::from_millis(2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecLimits {
    /// Per-test wall-clock limit.
    pub wall_time_ms: u64,
    /// Cap on captured stdout (and, separately, stderr).
    pub max_output_bytes: usize,
    pub max_concurrent_tests: usize,
}

impl Default for ExecLimits {
    fn default() -> Self {
        ExecLimits {
            wall_time_ms: 2_000,
            max_output_bytes: 1 << 20,
            max_concurrent_tests: thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

impl ExecLimits {
    pub fn validate(&self) -> Result<()> {
        if self.wall_time_ms == 0 || self.max_output_bytes == 0 || self.max_concurrent_tests == 0 {
            return Err(Error::param("execution limits must all be at least 1"));
        }
        Ok(())
    }
}

/// A program to judge: a command template and the source it runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    command_template: Vec<String>,
    source: Vec<u8>,
    file_name: String,
}

impl Candidate {
    /// `command_template` must mention [`SOURCE_PLACEHOLDER`] exactly once,
    /// e.g. `["python3", "{src}"]`.
    pub fn new(command_template: Vec<String>, source: impl Into<Vec<u8>>) -> Result<Self> {
        let uses: usize = command_template
            .iter()
            .map(|a| a.matches(SOURCE_PLACEHOLDER).count())
            .sum();
        if command_template.is_empty() {
            return Err(Error::param("command template is empty"));
        }
        if uses != 1 {
            return Err(Error::param(format!(
                "command template must contain `{SOURCE_PLACEHOLDER}` exactly once, found {uses}"
            )));
        }
        Ok(Candidate {
            command_template,
            source: source.into(),
            file_name: "solution".into(),
        })
    }

    /// Name of the source file inside the scratch directory.
    pub fn with_file_name(mut self, name: impl Into<String>) -> Self {
        self.file_name = name.into();
        self
    }

    pub fn source(&self) -> &[u8] {
        &self.source
    }

    fn command_for(&self, source_path: &Path) -> Vec<String> {
        let path = source_path.to_string_lossy();
        self.command_template
            .iter()
            .map(|a| a.replace(SOURCE_PLACEHOLDER, &path))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestStatus {
    Passed,
    WrongOutput,
    Timeout,
    RuntimeError,
    OutputOverflow,
    /// Not attempted because the run stopped at an earlier failure.
    Skipped,
}

impl TestStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TestStatus::Passed => "passed",
            TestStatus::WrongOutput => "wrong_output",
            TestStatus::Timeout => "timeout",
            TestStatus::RuntimeError => "runtime_error",
            TestStatus::OutputOverflow => "output_overflow",
            TestStatus::Skipped => "skipped",
        }
    }
}

impl fmt::Display for TestStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test_id: String,
    pub status: TestStatus,
    pub stdout_prefix: Vec<u8>,
    pub stderr_prefix: Vec<u8>,
    pub duration_ms: f64,
    /// `None` when the process was killed by a signal or never ran.
    pub exit_code: Option<i32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Stop launching tests after the first failure. Later tests are
    /// reported as [`TestStatus::Skipped`]. For evaluation-only runs; reward
    /// statistics need the full pass vector.
    pub stop_on_first_failure: bool,
}

/// Judge comparison: lines compared exactly after stripping trailing
/// whitespace from each line and dropping trailing blank lines.
pub fn outputs_match(actual: &[u8], expected: &[u8]) -> bool {
    normalized_lines(actual).eq(normalized_lines(expected))
}

fn normalized_lines(text: &[u8]) -> impl Iterator<Item = &[u8]> {
    let lines: Vec<&[u8]> = text.split(|&b| b == b'\n').map(trim_end).collect();
    let keep = lines.iter().rposition(|l| !l.is_empty()).map_or(0, |i| i + 1);
    lines.into_iter().take(keep)
}

fn trim_end(line: &[u8]) -> &[u8] {
    let end = line
        .iter()
        .rposition(|b| !b.is_ascii_whitespace())
        .map_or(0, |i| i + 1);
    &line[..end]
}

fn scratch_root() -> PathBuf {
    std::env::var_os(SCRATCH_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir)
}

fn make_scratch(parent: &Path) -> Result<tempfile::TempDir> {
    tempfile::Builder::new()
        .prefix("pw-run-")
        .tempdir_in(parent)
        .map_err(|e| Error::Infrastructure(format!("creating scratch dir in {}: {e}", parent.display())))
}

/// Runs one test in a fresh scratch directory.
pub fn run_test(candidate: &Candidate, test: &UnitTest, limits: &ExecLimits) -> Result<TestOutcome> {
    limits.validate()?;
    let root = make_scratch(&scratch_root())?;
    run_in(candidate, test, limits, root.path())
}

/// Runs every test of the suite and returns `(passes, outcomes)` in suite
/// order.
pub fn run_suite(candidate: &Candidate, problem: &Problem, limits: &ExecLimits) -> Result<(Vec<bool>, Vec<TestOutcome>)> {
    run_suite_with(candidate, problem, limits, RunOptions::default())
}

pub fn run_suite_with(
    candidate: &Candidate,
    problem: &Problem,
    limits: &ExecLimits,
    options: RunOptions,
) -> Result<(Vec<bool>, Vec<TestOutcome>)> {
    limits.validate()?;
    let root = make_scratch(&scratch_root())?;
    let tests = &problem.tests;
    let slots: Vec<Mutex<Option<Result<TestOutcome>>>> = tests.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let workers = limits.max_concurrent_tests.min(tests.len()).max(1);

    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::SeqCst);
                if j >= tests.len() {
                    break;
                }
                let outcome = if stop.load(Ordering::SeqCst) {
                    Ok(skipped(&tests[j]))
                } else {
                    let dir = root.path().join(format!("t{j}"));
                    fs::create_dir(&dir)
                        .map_err(|e| Error::Infrastructure(format!("creating {}: {e}", dir.display())))
                        .and_then(|_| run_in(candidate, &tests[j], limits, &dir))
                };
                let failed = !matches!(&outcome, Ok(o) if o.status == TestStatus::Passed);
                if failed && options.stop_on_first_failure {
                    stop.store(true, Ordering::SeqCst);
                }
                *slots[j].lock().unwrap() = Some(outcome);
            });
        }
    });

    let mut outcomes = Vec::with_capacity(tests.len());
    for slot in slots {
        outcomes.push(slot.into_inner().unwrap().expect("every test index is visited")?);
    }
    let passes = outcomes.iter().map(|o| o.status == TestStatus::Passed).collect();
    Ok((passes, outcomes))
}

fn skipped(test: &UnitTest) -> TestOutcome {
    TestOutcome {
        test_id: test.test_id.clone(),
        status: TestStatus::Skipped,
        stdout_prefix: Vec::new(),
        stderr_prefix: Vec::new(),
        duration_ms: 0.0,
        exit_code: None,
    }
}

/// Reads up to `cap` bytes. Past the cap, either flags overflow and stops
/// reading (`overflow` given) or keeps draining and discards.
fn capture(mut pipe: impl Read, cap: usize, overflow: Option<Arc<AtomicBool>>) -> Vec<u8> {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 8192];
    loop {
        match pipe.read(&mut chunk) {
            Ok(0) => break,
            Ok(n) => {
                let room = cap - buf.len();
                if n > room {
                    buf.extend_from_slice(&chunk[..room]);
                    if let Some(flag) = &overflow {
                        flag.store(true, Ordering::SeqCst);
                        break;
                    }
                } else {
                    buf.extend_from_slice(&chunk[..n]);
                }
            }
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(_) => break,
        }
    }
    buf
}

fn kill_group(child: &Child) {
    // The child leads its own process group (pgid == pid).
    unsafe {
        libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
    }
}

fn run_in(candidate: &Candidate, test: &UnitTest, limits: &ExecLimits, dir: &Path) -> Result<TestOutcome> {
    let source_path = dir.join(&candidate.file_name);
    fs::write(&source_path, &candidate.source)
        .map_err(|e| Error::Infrastructure(format!("writing {}: {e}", source_path.display())))?;
    let argv = candidate.command_for(&source_path);

    let mut cmd = Command::new(&argv[0]);
    cmd.args(&argv[1..])
        .current_dir(dir)
        .env_clear()
        .env("PATH", std::env::var_os("PATH").unwrap_or_else(|| "/usr/bin:/bin".into()))
        .env("HOME", dir)
        .env("TMPDIR", dir)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0);

    let start = Instant::now();
    let mut child = cmd
        .spawn()
        .map_err(|e| Error::Infrastructure(format!("spawning `{}`: {e}", argv[0])))?;

    let overflow = Arc::new(AtomicBool::new(false));
    let cap = limits.max_output_bytes;
    let stdout = child.stdout.take().expect("piped stdout");
    let stderr = child.stderr.take().expect("piped stderr");
    let out_flag = Arc::clone(&overflow);
    let out_reader = thread::spawn(move || capture(stdout, cap, Some(out_flag)));
    let err_reader = thread::spawn(move || capture(stderr, cap, None));

    let mut stdin = child.stdin.take().expect("piped stdin");
    let input = test.input.clone().into_bytes();
    let writer = thread::spawn(move || {
        // A candidate that exits without reading closes the pipe; that is not an error.
        let _ = stdin.write_all(&input);
    });

    let limit = Duration::from_millis(limits.wall_time_ms);
    let mut timed_out = false;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) => {}
            Err(e) => {
                kill_group(&child);
                let _ = child.wait();
                return Err(Error::Infrastructure(format!("waiting on candidate: {e}")));
            }
        }
        if start.elapsed() >= limit {
            timed_out = true;
            break None;
        }
        if overflow.load(Ordering::SeqCst) {
            break None;
        }
        thread::sleep(POLL_INTERVAL);
    };
    let elapsed = start.elapsed();
    kill_group(&child);
    let status = match status {
        Some(s) => s,
        None => child
            .wait()
            .map_err(|e| Error::Infrastructure(format!("reaping candidate: {e}")))?,
    };
    let _ = writer.join();
    let stdout = out_reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();

    let status_kind = if timed_out || elapsed > limit {
        TestStatus::Timeout
    } else if overflow.load(Ordering::SeqCst) {
        TestStatus::OutputOverflow
    } else if !status.success() {
        TestStatus::RuntimeError
    } else if outputs_match(&stdout, test.expected_output.as_bytes()) {
        TestStatus::Passed
    } else {
        TestStatus::WrongOutput
    };

    Ok(TestOutcome {
        test_id: test.test_id.clone(),
        status: status_kind,
        stdout_prefix: stdout,
        stderr_prefix: stderr,
        duration_ms: elapsed.as_secs_f64() * 1e3,
        exit_code: status.code(),
    })
}

const PREVIEW_CHARS: usize = 120;

fn preview(bytes: &[u8]) -> String {
    let text = String::from_utf8_lossy(bytes);
    let mut out: String = text.chars().take(PREVIEW_CHARS).collect::<String>().escape_debug().to_string();
    if text.chars().count() > PREVIEW_CHARS {
        out.push_str("...");
    }
    out
}

/// Human-readable execution feedback: a tally line, then up to `max_shown`
/// failing tests with their inputs and expected/actual output.
pub fn render_feedback(outcomes: &[TestOutcome], problem: &Problem, max_shown: usize) -> String {
    let passed = outcomes.iter().filter(|o| o.status == TestStatus::Passed).count();
    let mut out = format!("passed {passed}/{}\n", outcomes.len());
    let failures: Vec<(usize, &TestOutcome)> = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.status != TestStatus::Passed)
        .collect();
    for (shown, &(j, o)) in failures.iter().take(max_shown).enumerate() {
        let test = problem.tests.get(j);
        out.push_str(&format!(
            "\n[{}/{}] test {} ({})\n",
            shown + 1,
            failures.len(),
            o.test_id,
            o.status
        ));
        if let Some(test) = test {
            out.push_str(&format!("  input:    \"{}\"\n", preview(test.input.as_bytes())));
        }
        match o.status {
            TestStatus::WrongOutput => {
                if let Some(test) = test {
                    out.push_str(&format!(
                        "  expected: \"{}\"\n",
                        preview(test.expected_output.as_bytes())
                    ));
                }
                out.push_str(&format!("  actual:   \"{}\"\n", preview(&o.stdout_prefix)));
            }
            TestStatus::RuntimeError => {
                let code = o.exit_code.map_or("signal".to_string(), |c| c.to_string());
                out.push_str(&format!("  exit:     {code}\n"));
                out.push_str(&format!("  stderr:   \"{}\"\n", preview(&o.stderr_prefix)));
            }
            TestStatus::Timeout => {
                out.push_str(&format!("  killed after {:.0} ms\n", o.duration_ms));
            }
            TestStatus::OutputOverflow => {
                out.push_str(&format!("  output exceeded {} bytes\n", o.stdout_prefix.len()));
            }
            TestStatus::Skipped | TestStatus::Passed => {}
        }
    }
    if failures.len() > max_shown {
        out.push_str(&format!("\n... {} more failing tests not shown\n", failures.len() - max_shown));
    }
    out
}
