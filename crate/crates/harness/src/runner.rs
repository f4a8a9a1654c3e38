use std::io::Read;
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use wait_timeout::ChildExt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Exit {
    Code(i32),
    /// Terminated by a signal it did not receive from us.
    Signaled,
    TimedOut,
    SpawnFailed(String),
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub exit: Exit,
    pub stdout: String,
    pub stderr: String,
    pub elapsed: Duration,
}

impl Outcome {
    pub fn success(&self) -> bool {
        self.exit == Exit::Code(0)
    }
}

/// Runs `argv` in `cwd` as the leader of a fresh process group. On timeout
/// the whole group gets SIGTERM, then SIGKILL after `grace`.
pub fn run_command(
    argv: &[String],
    cwd: &Path,
    env: &[(String, String)],
    timeout: Duration,
    grace: Duration,
) -> Outcome {
    let start = Instant::now();
    let failed = |msg: String| Outcome {
        exit: Exit::SpawnFailed(msg),
        stdout: String::new(),
        stderr: String::new(),
        elapsed: start.elapsed(),
    };
    let Some((program, args)) = argv.split_first() else {
        return failed("empty command".into());
    };
    let mut cmd = Command::new(program);
    cmd.args(args)
        .current_dir(cwd)
        .envs(env.iter().map(|(k, v)| (k, v)))
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        cmd.process_group(0);
    }
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => return failed(format!("{program}: {e}")),
    };
    let stdout = drain(child.stdout.take());
    let stderr = drain(child.stderr.take());

    let mut timed_out = false;
    let status = match child.wait_timeout(timeout) {
        Ok(Some(s)) => Some(s),
        Ok(None) => {
            timed_out = true;
            terminate(&mut child, grace)
        }
        Err(_) => terminate(&mut child, grace),
    };
    // Stragglers left in the group would hold the pipes open.
    kill_group(&child, Signal::Kill);

    let exit = match (timed_out, status.and_then(|s| s.code())) {
        (true, _) => Exit::TimedOut,
        (false, Some(code)) => Exit::Code(code),
        (false, None) => Exit::Signaled,
    };
    Outcome {
        exit,
        stdout: stdout.join().unwrap_or_default(),
        stderr: stderr.join().unwrap_or_default(),
        elapsed: start.elapsed(),
    }
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

enum Signal {
    Term,
    Kill,
}

#[cfg(unix)]
fn kill_group(child: &Child, signal: Signal) {
    let sig = match signal {
        Signal::Term => libc::SIGTERM,
        Signal::Kill => libc::SIGKILL,
    };
    if let Ok(pid) = libc::pid_t::try_from(child.id()) {
        // SAFETY: plain syscall on a process group we created.
        unsafe {
            libc::kill(-pid, sig);
        }
    }
}

#[cfg(not(unix))]
fn kill_group(_child: &Child, _signal: Signal) {}

fn terminate(child: &mut Child, grace: Duration) -> Option<std::process::ExitStatus> {
    kill_group(child, Signal::Term);
    if let Ok(Some(s)) = child.wait_timeout(grace) {
        return Some(s);
    }
    kill_group(child, Signal::Kill);
    let _ = child.kill();
    child.wait().ok()
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;

    fn sh(script: &str) -> Vec<String> {
        vec!["sh".into(), "-c".into(), script.into()]
    }

    #[test]
    fn captures_output_and_code() {
        let out = run_command(
            &sh("echo hi; echo err >&2; exit 3"),
            Path::new("."),
            &[],
            Duration::from_secs(10),
            Duration::from_secs(1),
        );
        assert_eq!(out.exit, Exit::Code(3));
        assert_eq!(out.stdout, "hi\n");
        assert_eq!(out.stderr, "err\n");
    }

    #[test]
    fn timeout_kills_the_group() {
        let out = run_command(
            &sh("trap '' TERM; sleep 30 & wait"),
            Path::new("."),
            &[],
            Duration::from_millis(300),
            Duration::from_millis(300),
        );
        assert_eq!(out.exit, Exit::TimedOut);
        assert!(out.elapsed < Duration::from_secs(10));
    }

    #[test]
    fn missing_program_is_a_spawn_failure() {
        let out = run_command(
            &["/nonexistent/program".to_string()],
            Path::new("."),
            &[],
            Duration::from_secs(1),
            Duration::from_secs(1),
        );
        assert!(matches!(out.exit, Exit::SpawnFailed(_)));
    }
}
