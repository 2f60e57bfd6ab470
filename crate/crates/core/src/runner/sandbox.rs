use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use crate::corpus::{BugRecord, Verdict};

#[derive(Debug, thiserror::Error)]
pub enum SandboxError {
    #[error("sandbox {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("sandbox {0} has no file {1}")]
    MissingTarget(PathBuf, String),
    #[error("bug {0} has no prepared working copy")]
    NoWorkdir(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SandboxError + '_ {
    move |source| SandboxError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Recursive copy preserving symlinks as links.
pub fn copy_tree(from: &Path, to: &Path) -> Result<(), SandboxError> {
    std::fs::create_dir_all(to).map_err(io_err(to))?;
    for entry in std::fs::read_dir(from).map_err(io_err(from))? {
        let entry = entry.map_err(io_err(from))?;
        let src = entry.path();
        let dst = to.join(entry.file_name());
        let kind = entry.file_type().map_err(io_err(&src))?;
        if kind.is_dir() {
            copy_tree(&src, &dst)?;
        } else if kind.is_symlink() {
            let target = std::fs::read_link(&src).map_err(io_err(&src))?;
            std::os::unix::fs::symlink(target, &dst).map_err(io_err(&dst))?;
        } else {
            std::fs::copy(&src, &dst).map_err(io_err(&src))?;
        }
    }
    Ok(())
}

/// A private copy of a bug's working tree, removed on drop.
pub struct Sandbox {
    dir: tempfile::TempDir,
}

impl Sandbox {
    pub fn prepare(bug: &BugRecord, parent: Option<&Path>) -> Result<Sandbox, SandboxError> {
        let workdir = bug.workdir.as_ref().ok_or_else(|| SandboxError::NoWorkdir(bug.bug_id.clone()))?;
        let dir = match parent {
            Some(p) => {
                std::fs::create_dir_all(p).map_err(io_err(p))?;
                tempfile::Builder::new().prefix("job-").tempdir_in(p)
            }
            None => tempfile::Builder::new().prefix("factsel-job-").tempdir(),
        }
        .map_err(io_err(parent.unwrap_or(Path::new("."))))?;
        copy_tree(workdir, dir.path())?;
        Ok(Sandbox { dir })
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }
}

/// Restores the original file contents when dropped.
struct Restore<'a> {
    path: &'a Path,
    original: Vec<u8>,
}

impl Drop for Restore<'_> {
    fn drop(&mut self) {
        if let Err(e) = std::fs::write(self.path, &self.original) {
            log::error!("could not restore {}: {e}", self.path.display());
        }
    }
}

fn kill_group(pid: u32) {
    // SAFETY: plain syscall on a process group we created.
    unsafe {
        libc::killpg(pid as libc::pid_t, libc::SIGKILL);
    }
}

/// Write `patched_source` over the bug's file inside `sandbox`, run the
/// test command there, and put the original file back.
///
/// Exit 0 is Plausible and any other exit code is TestFail, except 126/127
/// (the shell could not find or execute the command), which count as
/// BuildError together with spawn failures. When `timeout` elapses the
/// whole process group is killed and the verdict is Timeout.
pub fn validate(bug: &BugRecord, patched_source: &str, sandbox: &Path, timeout: Duration) -> Result<Verdict, SandboxError> {
    let target = sandbox.join(&bug.source_file_path);
    if !target.is_file() {
        return Err(SandboxError::MissingTarget(sandbox.to_path_buf(), bug.source_file_path.clone()));
    }
    let original = std::fs::read(&target).map_err(io_err(&target))?;
    let _restore = Restore {
        path: &target,
        original,
    };
    std::fs::write(&target, patched_source).map_err(io_err(&target))?;

    let spawned = Command::new("sh")
        .arg("-c")
        .arg(&bug.test_command)
        .current_dir(sandbox)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .process_group(0)
        .spawn();
    let mut child = match spawned {
        Ok(c) => c,
        Err(e) => {
            log::warn!("{}: test command failed to start: {e}", bug.bug_id);
            return Ok(Verdict::BuildError);
        }
    };
    let started = Instant::now();
    loop {
        match child.try_wait().map_err(io_err(sandbox))? {
            Some(status) => {
                return Ok(match status.code() {
                    Some(0) => Verdict::Plausible,
                    Some(126) | Some(127) => Verdict::BuildError,
                    _ => Verdict::TestFail,
                })
            }
            None if started.elapsed() >= timeout => {
                kill_group(child.id());
                let _ = child.wait();
                return Ok(Verdict::Timeout);
            }
            None => std::thread::sleep(Duration::from_millis(5)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(command: &str) -> (tempfile::TempDir, BugRecord) {
        let tmp = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(tmp.path().join("repo/pkg")).unwrap();
        std::fs::write(tmp.path().join("repo/pkg/m.py"), "def f():\n    return 1\n").unwrap();
        let bug = BugRecord::builder("p:1", "p", "pkg/m.py", "def f():\n    return 1\n")
            .span(1, 2)
            .test_command(command)
            .workdir(tmp.path().join("repo"))
            .build()
            .unwrap();
        (tmp, bug)
    }

    fn run(command: &str, timeout: Duration) -> Verdict {
        let (_tmp, bug) = setup(command);
        let sb = Sandbox::prepare(&bug, None).unwrap();
        validate(&bug, "def f():\n    return 2\n", sb.path(), timeout).unwrap()
    }

    #[test]
    fn exit_codes_map_to_verdicts() {
        assert_eq!(run("true", Duration::from_secs(5)), Verdict::Plausible);
        assert_eq!(run("false", Duration::from_secs(5)), Verdict::TestFail);
        assert_eq!(run("definitely-not-a-command-xyz", Duration::from_secs(5)), Verdict::BuildError);
    }

    #[test]
    fn timeout_kills_the_group() {
        let started = Instant::now();
        assert_eq!(run("sleep 10", Duration::from_millis(300)), Verdict::Timeout);
        assert!(started.elapsed() < Duration::from_secs(5));
    }

    #[test]
    fn patched_file_is_visible_then_restored() {
        let (tmp, bug) = setup("grep -q 'return 2' pkg/m.py");
        let sb = Sandbox::prepare(&bug, Some(&tmp.path().join("sandboxes"))).unwrap();
        assert_eq!(validate(&bug, "def f():\n    return 2\n", sb.path(), Duration::from_secs(5)).unwrap(), Verdict::Plausible);
        assert_eq!(std::fs::read_to_string(sb.path().join("pkg/m.py")).unwrap(), "def f():\n    return 1\n");
        // the working copy the sandbox came from is untouched
        assert_eq!(std::fs::read_to_string(tmp.path().join("repo/pkg/m.py")).unwrap(), "def f():\n    return 1\n");
    }

    #[test]
    fn missing_target_is_a_sandbox_error() {
        let (tmp, bug) = setup("true");
        let empty = tmp.path().join("empty");
        std::fs::create_dir_all(&empty).unwrap();
        assert!(matches!(
            validate(&bug, "x", &empty, Duration::from_secs(1)),
            Err(SandboxError::MissingTarget(..))
        ));
    }
}
