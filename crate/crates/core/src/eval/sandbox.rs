//! Process sandbox for untrusted programs.
//!
//! Each execution gets its own process group, rlimits on address space, CPU
//! time, open files, processes and written file size, a private network
//! namespace with no interfaces, and a private mount namespace where every
//! mount is read-only except the execution's scratch directory.

use std::ffi::CString;
use std::io::Read;
use std::os::unix::ffi::OsStrExt;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use wait_timeout::ChildExt;

pub const DEFAULT_TIMEOUT_SECS: f64 = 10.0;
pub const DEFAULT_MEMORY_BYTES: u64 = 512 * 1024 * 1024;
const OUTPUT_CAP: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandboxPolicy {
    pub timeout_secs: f64,
    /// Address-space cap per process.
    pub memory_bytes: u64,
    pub max_open_files: u64,
    pub max_processes: u64,
    pub max_file_bytes: u64,
    /// Mount every filesystem read-only except the scratch directory and these.
    pub readonly_root: bool,
    #[serde(default)]
    pub writable_paths: Vec<PathBuf>,
}

impl Default for SandboxPolicy {
    fn default() -> Self {
        Self {
            timeout_secs: DEFAULT_TIMEOUT_SECS,
            memory_bytes: DEFAULT_MEMORY_BYTES,
            max_open_files: 256,
            max_processes: 1024,
            max_file_bytes: 64 * 1024 * 1024,
            readonly_root: true,
            writable_paths: Vec::new(),
        }
    }
}

impl SandboxPolicy {
    pub fn validate(&self) -> Result<(), SandboxError> {
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(SandboxError::Policy(format!("timeout must be positive, got {}", self.timeout_secs)));
        }
        if self.memory_bytes == 0 || self.max_open_files < 4 || self.max_processes == 0 {
            return Err(SandboxError::Policy("resource limits must be positive".into()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("invalid sandbox policy: {0}")]
    Policy(String),
    #[error("sandbox setup failed: {0}")]
    Setup(String),
    #[error("command not found: {0}")]
    MissingCommand(String),
}

/// What happened to one sandboxed command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandboxOutcome {
    pub exit_code: Option<i32>,
    pub signal: Option<i32>,
    /// Killed by the wall-clock or CPU-time limit.
    pub timed_out: bool,
    /// Killed for exceeding a size limit without the program reporting it.
    pub resource_limited: bool,
    pub stdout: String,
    pub stderr: String,
    pub wall_secs: f64,
}

impl SandboxOutcome {
    pub fn success(&self) -> bool {
        self.exit_code == Some(0) && !self.timed_out
    }
}

// Linux mount_setattr(2) ABI; not every libc release exposes it.
#[repr(C)]
struct MountAttr {
    attr_set: u64,
    attr_clr: u64,
    propagation: u64,
    userns_fd: u64,
}
const MOUNT_ATTR_RDONLY: u64 = 0x1;
const AT_RECURSIVE: libc::c_int = 0x8000;

fn set_rdonly(path: &CString, recursive: bool, readonly: bool) -> libc::c_long {
    let attr = MountAttr {
        attr_set: if readonly { MOUNT_ATTR_RDONLY } else { 0 },
        attr_clr: if readonly { 0 } else { MOUNT_ATTR_RDONLY },
        propagation: 0,
        userns_fd: 0,
    };
    let flags = if recursive { AT_RECURSIVE } else { 0 };
    // SAFETY: plain syscall with a valid C string and a properly sized attr struct.
    unsafe {
        libc::syscall(
            libc::SYS_mount_setattr,
            libc::AT_FDCWD,
            path.as_ptr(),
            flags,
            &attr as *const MountAttr,
            std::mem::size_of::<MountAttr>(),
        )
    }
}

fn cstring(path: &Path) -> Result<CString, SandboxError> {
    CString::new(path.as_os_str().as_bytes()).map_err(|_| SandboxError::Setup(format!("path contains NUL: {}", path.display())))
}

struct ChildSetup {
    policy: SandboxPolicy,
    root: CString,
    writable: Vec<CString>,
    uid_map: CString,
    gid_map: CString,
}

fn set_limit(resource: libc::__rlimit_resource_t, value: u64) -> std::io::Result<()> {
    let lim = libc::rlimit { rlim_cur: value as libc::rlim_t, rlim_max: value as libc::rlim_t };
    // SAFETY: setrlimit with a valid pointer.
    if unsafe { libc::setrlimit(resource, &lim) } != 0 {
        return Err(std::io::Error::last_os_error());
    }
    Ok(())
}

fn write_file(path: &[u8], content: &[u8]) -> std::io::Result<()> {
    // SAFETY: path is NUL-terminated; open/write/close are async-signal-safe.
    unsafe {
        let fd = libc::open(path.as_ptr().cast(), libc::O_WRONLY);
        if fd < 0 {
            return Err(std::io::Error::last_os_error());
        }
        let n = libc::write(fd, content.as_ptr().cast(), content.len());
        libc::close(fd);
        if n < 0 {
            return Err(std::io::Error::last_os_error());
        }
    }
    Ok(())
}

/// Runs between fork and exec. Only async-signal-safe work: everything that
/// allocates was prepared by the parent.
fn isolate(setup: &ChildSetup) -> std::io::Result<()> {
    let p = &setup.policy;
    // SAFETY: unshare/mount are raw syscalls on valid, parent-prepared C strings.
    unsafe {
        if libc::unshare(libc::CLONE_NEWNET | libc::CLONE_NEWNS) != 0 {
            // unprivileged fallback: a user namespace grants the needed capabilities
            if libc::unshare(libc::CLONE_NEWUSER | libc::CLONE_NEWNET | libc::CLONE_NEWNS) != 0 {
                return Err(std::io::Error::last_os_error());
            }
            let _ = write_file(b"/proc/self/setgroups\0", b"deny");
            write_file(b"/proc/self/uid_map\0", setup.uid_map.as_bytes())?;
            write_file(b"/proc/self/gid_map\0", setup.gid_map.as_bytes())?;
        }
        if p.readonly_root {
            let none = c"none";
            let slash = c"/";
            if libc::mount(none.as_ptr(), slash.as_ptr(), std::ptr::null(), libc::MS_REC | libc::MS_PRIVATE, std::ptr::null()) != 0 {
                return Err(std::io::Error::last_os_error());
            }
            for dir in std::iter::once(&setup.root).chain(&setup.writable) {
                if libc::mount(dir.as_ptr(), dir.as_ptr(), std::ptr::null(), libc::MS_BIND | libc::MS_REC, std::ptr::null()) != 0 {
                    return Err(std::io::Error::last_os_error());
                }
            }
            if set_rdonly(&CString::from(slash), true, true) != 0 {
                return Err(std::io::Error::last_os_error());
            }
            for dir in std::iter::once(&setup.root).chain(&setup.writable) {
                if set_rdonly(dir, false, false) != 0 {
                    return Err(std::io::Error::last_os_error());
                }
            }
            // the cwd was entered before the bind mount and still points below it
            if libc::chdir(setup.root.as_ptr()) != 0 {
                return Err(std::io::Error::last_os_error());
            }
        }
    }
    set_limit(libc::RLIMIT_AS, p.memory_bytes)?;
    set_limit(libc::RLIMIT_CPU, p.timeout_secs.ceil() as u64 + 1)?;
    set_limit(libc::RLIMIT_NOFILE, p.max_open_files)?;
    set_limit(libc::RLIMIT_NPROC, p.max_processes)?;
    set_limit(libc::RLIMIT_FSIZE, p.max_file_bytes)?;
    set_limit(libc::RLIMIT_CORE, 0)?;
    Ok(())
}

fn drain(mut reader: impl Read + Send + 'static) -> std::thread::JoinHandle<String> {
    std::thread::spawn(move || {
        let mut kept = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match reader.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = OUTPUT_CAP.saturating_sub(kept.len());
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        String::from_utf8_lossy(&kept).into_owned()
    })
}

/// Runs `argv` inside `workdir` under `policy`.
///
/// `workdir` should be a fresh scratch directory; it is the only writable
/// location the program sees (plus `policy.writable_paths`).
pub fn run_sandboxed(argv: &[String], workdir: &Path, policy: &SandboxPolicy) -> Result<SandboxOutcome, SandboxError> {
    policy.validate()?;
    let (program, args) = argv.split_first().ok_or_else(|| SandboxError::Setup("empty command".into()))?;
    let root = workdir.canonicalize().map_err(|e| SandboxError::Setup(format!("{}: {e}", workdir.display())))?;
    // SAFETY: getuid/getgid cannot fail.
    let (uid, gid) = unsafe { (libc::getuid(), libc::getgid()) };
    let setup = ChildSetup {
        policy: policy.clone(),
        root: cstring(&root)?,
        writable: policy.writable_paths.iter().map(|p| cstring(p)).collect::<Result<_, _>>()?,
        uid_map: CString::new(format!("{uid} {uid} 1")).expect("no NUL"),
        gid_map: CString::new(format!("{gid} {gid} 1")).expect("no NUL"),
    };

    let mut cmd = Command::new(program);
    cmd.args(args)
        .current_dir(&root)
        .env_clear()
        .env("PATH", std::env::var_os("PATH").unwrap_or_else(|| "/usr/local/bin:/usr/bin:/bin".into()))
        .env("HOME", &root)
        .env("TMPDIR", &root)
        .env("LANG", "C.UTF-8")
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0);
    // SAFETY: the closure only calls async-signal-safe functions on data
    // prepared before fork.
    unsafe {
        cmd.pre_exec(move || isolate(&setup));
    }

    let started = Instant::now();
    let mut child = cmd.spawn().map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => SandboxError::MissingCommand(program.clone()),
        _ => SandboxError::Setup(format!("spawning {program}: {e}")),
    })?;
    let pgid = child.id() as libc::pid_t;
    let out = drain(child.stdout.take().expect("piped"));
    let err = drain(child.stderr.take().expect("piped"));

    let waited = child.wait_timeout(policy.timeout()).map_err(|e| SandboxError::Setup(e.to_string()))?;
    let (status, wall_timeout) = match waited {
        Some(status) => (status, false),
        None => {
            // SAFETY: signalling our own child's process group.
            unsafe {
                libc::killpg(pgid, libc::SIGKILL);
            }
            (child.wait().map_err(|e| SandboxError::Setup(e.to_string()))?, true)
        }
    };
    // grandchildren may still hold the pipes open
    // SAFETY: as above; ESRCH when the group is already gone is fine.
    unsafe {
        libc::killpg(pgid, libc::SIGKILL);
    }
    let wall_secs = started.elapsed().as_secs_f64();
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();
    let signal = status.signal();
    let timed_out = wall_timeout || signal == Some(libc::SIGXCPU);
    let resource_limited = !timed_out && matches!(signal, Some(libc::SIGXFSZ) | Some(libc::SIGKILL));
    Ok(SandboxOutcome { exit_code: status.code(), signal, timed_out, resource_limited, stdout, stderr, wall_secs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh(script: &str, policy: &SandboxPolicy) -> SandboxOutcome {
        let dir = tempfile::tempdir().unwrap();
        run_sandboxed(&["/bin/sh".into(), "-c".into(), script.into()], dir.path(), policy).unwrap()
    }

    #[test]
    fn captures_output_and_status() {
        let o = sh("echo hi; echo oops >&2; exit 3", &SandboxPolicy::default());
        assert_eq!(o.stdout, "hi\n");
        assert_eq!(o.stderr, "oops\n");
        assert_eq!(o.exit_code, Some(3));
        assert!(!o.timed_out);
    }

    #[test]
    fn timeout_kills_the_group() {
        let policy = SandboxPolicy { timeout_secs: 0.5, ..Default::default() };
        let o = sh("sleep 30 & sleep 30", &policy);
        assert!(o.timed_out);
        assert!(o.wall_secs < 1.5, "took {}", o.wall_secs);
    }

    #[test]
    fn writes_confined_to_workdir() {
        let o = sh("echo x > inside.txt && cat inside.txt && echo y > /tmp/plforge-escape-$$", &SandboxPolicy::default());
        assert_eq!(o.stdout, "x\n", "{}", o.stderr);
        assert_ne!(o.exit_code, Some(0), "write outside the scratch dir must fail: {}", o.stderr);
    }

    #[test]
    fn no_network_interfaces_beyond_loopback() {
        let o = sh("cat /proc/net/dev", &SandboxPolicy::default());
        let ifaces: Vec<&str> = o.stdout.lines().skip(2).map(|l| l.split(':').next().unwrap().trim()).collect();
        assert!(ifaces.iter().all(|i| *i == "lo"), "{ifaces:?}");
    }

    #[test]
    fn invalid_policy_and_missing_command() {
        let dir = tempfile::tempdir().unwrap();
        let bad = SandboxPolicy { timeout_secs: 0.0, ..Default::default() };
        assert!(matches!(run_sandboxed(&["/bin/true".into()], dir.path(), &bad), Err(SandboxError::Policy(_))));
        let missing = run_sandboxed(&["/nonexistent/tool".into()], dir.path(), &SandboxPolicy::default());
        assert!(matches!(missing, Err(SandboxError::MissingCommand(_))));
    }
}
