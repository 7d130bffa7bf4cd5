//! Subprocess plumbing shared by the testing, verification, and benchmark
//! paths: compiler discovery, timed execution with output capture, and an
//! optional address-space cap for validator runs.

use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    #[error("tool not found: {0}")]
    ToolMissing(String),
    #[error("failed to run {cmd}: {source}")]
    Spawn {
        cmd: String,
        #[source]
        source: std::io::Error,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Paths to the external C compiler; found once, threaded everywhere.
#[derive(Debug, Clone)]
pub struct Toolchain {
    pub cc: PathBuf,
}

impl Toolchain {
    /// Resolve the compiler: $VECPIPE_CC, then clang, then gcc, then cc.
    pub fn discover() -> Result<Toolchain, ToolError> {
        if let Ok(cc) = std::env::var("VECPIPE_CC") {
            let p = PathBuf::from(cc);
            if is_runnable(&p) {
                return Ok(Toolchain { cc: p });
            }
        }
        for cand in ["clang", "gcc", "cc"] {
            if let Some(p) = find_in_path(cand) {
                return Ok(Toolchain { cc: p });
            }
        }
        Err(ToolError::ToolMissing("no C compiler found".to_string()))
    }
}

pub fn find_in_path(name: &str) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    for dir in std::env::split_paths(&path) {
        let cand = dir.join(name);
        if cand.is_file() {
            return Some(cand);
        }
    }
    None
}

fn is_runnable(p: &Path) -> bool {
    p.is_file() || find_in_path(&p.to_string_lossy()).is_some()
}

#[derive(Debug, Clone)]
pub struct CmdOutput {
    pub status: Option<i32>,
    pub stdout: String,
    pub stderr: String,
    pub timed_out: bool,
    pub wall: Duration,
}

impl CmdOutput {
    pub fn success(&self) -> bool {
        !self.timed_out && self.status == Some(0)
    }
}

/// Run a command with output capture, an optional wall-clock timeout, and an
/// optional address-space limit (MiB). Reader threads drain the pipes so a
/// chatty child never deadlocks on a full pipe buffer.
pub fn run_command(
    mut cmd: Command,
    timeout: Option<Duration>,
    mem_limit_mb: Option<u64>,
) -> Result<CmdOutput, ToolError> {
    cmd.stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    // own process group, so a timeout kill reaps grandchildren too (a killed
    // tool must not leave descendants holding the output pipes open)
    let bytes = mem_limit_mb.map(|mb| mb.saturating_mul(1024 * 1024));
    unsafe {
        use std::os::unix::process::CommandExt;
        cmd.pre_exec(move || {
            libc::setpgid(0, 0);
            if let Some(bytes) = bytes {
                let lim = libc::rlimit {
                    rlim_cur: bytes,
                    rlim_max: bytes,
                };
                libc::setrlimit(libc::RLIMIT_AS, &lim);
            }
            Ok(())
        });
    }
    let started = Instant::now();
    let cmd_desc = format!("{cmd:?}");
    let mut child = cmd.spawn().map_err(|source| ToolError::Spawn {
        cmd: cmd_desc,
        source,
    })?;

    let mut stdout_pipe = child.stdout.take().expect("stdout piped");
    let mut stderr_pipe = child.stderr.take().expect("stderr piped");
    let out_thread = std::thread::spawn(move || {
        use std::io::Read;
        let mut buf = Vec::new();
        let _ = stdout_pipe.read_to_end(&mut buf);
        buf
    });
    let err_thread = std::thread::spawn(move || {
        use std::io::Read;
        let mut buf = Vec::new();
        let _ = stderr_pipe.read_to_end(&mut buf);
        buf
    });

    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if let Some(t) = timeout {
            if started.elapsed() > t {
                timed_out = true;
                unsafe {
                    libc::kill(-(child.id() as i32), libc::SIGKILL);
                }
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
        }
        std::thread::sleep(Duration::from_millis(5));
    };

    let stdout = String::from_utf8_lossy(&out_thread.join().unwrap_or_default()).into_owned();
    let stderr = String::from_utf8_lossy(&err_thread.join().unwrap_or_default()).into_owned();
    Ok(CmdOutput {
        status: status.and_then(|s| s.code()),
        stdout,
        stderr,
        timed_out,
        wall: started.elapsed(),
    })
}

/// Split a profile's flag string into compile flags and link libraries
/// (`-l...` goes on the link line only).
pub fn split_flags(flags: &str) -> (Vec<String>, Vec<String>) {
    let mut compile = Vec::new();
    let mut link = Vec::new();
    for tok in flags.split_whitespace() {
        if tok.starts_with("-l") {
            link.push(tok.to_string());
        } else {
            compile.push(tok.to_string());
        }
    }
    (compile, link)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discovers_a_compiler() {
        let tc = Toolchain::discover().unwrap();
        assert!(
            tc.cc.to_string_lossy().contains("clang")
                || tc.cc.to_string_lossy().contains("cc")
                || tc.cc.to_string_lossy().contains("gcc")
        );
    }

    #[test]
    fn captures_output_and_times_out() {
        let mut ok = Command::new("sh");
        ok.args(["-c", "echo hi; echo err >&2"]);
        let out = run_command(ok, Some(Duration::from_secs(5)), None).unwrap();
        assert!(out.success());
        assert_eq!(out.stdout.trim(), "hi");
        assert_eq!(out.stderr.trim(), "err");

        let mut slow = Command::new("sh");
        slow.args(["-c", "sleep 10"]);
        let out = run_command(slow, Some(Duration::from_millis(100)), None).unwrap();
        assert!(out.timed_out);
        assert!(!out.success());
    }

    #[test]
    fn splits_link_flags() {
        let (compile, link) = split_flags("-O3 -mavx2 -lm");
        assert_eq!(compile, vec!["-O3", "-mavx2"]);
        assert_eq!(link, vec!["-lm"]);
    }
}
