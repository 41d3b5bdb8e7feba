use std::io::Write;
use std::net::{TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::trajectory::{Sample, Trajectory};
use super::{ContactError, EndEffector, TaskType};

pub const WIRE_VERSION: u32 = 1;
/// Largest allowed distance between the last trajectory sample and `point_rob`.
pub const ENDPOINT_TOLERANCE: f64 = 1e-9;

/// A resolved contact, ready for the whole-body controller.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactTask {
    pub end_effector: EndEffector,
    pub task_type: TaskType,
    pub point_cam: Vector3<f64>,
    pub point_rob: Vector3<f64>,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WireTrajectory {
    duration: f64,
    samples: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WireTask {
    version: u32,
    end_effector: EndEffector,
    task_type: TaskType,
    point_cam: [f64; 3],
    point_rob: [f64; 3],
    trajectory: WireTrajectory,
}

impl ContactTask {
    /// Trajectory well-formed, finite points, and the trajectory ending at
    /// `point_rob`.
    pub fn check(&self) -> Result<(), ContactError> {
        self.trajectory.check().map_err(|e| ContactError::InvalidTask(e.to_string()))?;
        if !self.point_cam.iter().chain(self.point_rob.iter()).all(|c| c.is_finite()) {
            return Err(ContactError::InvalidTask("non-finite contact point".into()));
        }
        let gap = (self.trajectory.end() - self.point_rob).amax();
        if gap > ENDPOINT_TOLERANCE {
            return Err(ContactError::InvalidTask(format!(
                "trajectory ends {gap:e} m away from the contact point"
            )));
        }
        Ok(())
    }

    /// One JSON object, no trailing newline.
    pub fn to_wire(&self) -> Result<String, ContactError> {
        self.check()?;
        let wire = WireTask {
            version: WIRE_VERSION,
            end_effector: self.end_effector,
            task_type: self.task_type,
            point_cam: self.point_cam.into(),
            point_rob: self.point_rob.into(),
            trajectory: WireTrajectory {
                duration: self.trajectory.duration,
                samples: self
                    .trajectory
                    .samples
                    .iter()
                    .map(|s| [s.t, s.position.x, s.position.y, s.position.z])
                    .collect(),
            },
        };
        serde_json::to_string(&wire).map_err(|e| ContactError::Serialization(e.to_string()))
    }

    pub fn from_wire(text: &str) -> Result<Self, ContactError> {
        let wire: WireTask = serde_json::from_str(text).map_err(|e| ContactError::Serialization(e.to_string()))?;
        if wire.version != WIRE_VERSION {
            return Err(ContactError::Serialization(format!("unsupported version {}", wire.version)));
        }
        let task = ContactTask {
            end_effector: wire.end_effector,
            task_type: wire.task_type,
            point_cam: Vector3::from(wire.point_cam),
            point_rob: Vector3::from(wire.point_rob),
            trajectory: Trajectory {
                duration: wire.trajectory.duration,
                samples: wire
                    .trajectory
                    .samples
                    .iter()
                    .map(|[t, x, y, z]| Sample {
                        t: *t,
                        position: Vector3::new(*x, *y, *z),
                    })
                    .collect(),
            },
        };
        task.check()?;
        Ok(task)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Acknowledgement {
    pub destination: String,
    pub bytes: usize,
}

/// Somewhere contact tasks go. Implementations serialize deliveries.
pub trait TaskSink: Send + Sync {
    /// Delivers one wire message (without the trailing newline).
    fn deliver(&self, message: &str) -> Result<Acknowledgement, ContactError>;
}

/// Validates, serializes and delivers a task. Invalid tasks never reach the
/// sink.
pub fn emit_contact_task(task: &ContactTask, sink: &dyn TaskSink) -> Result<Acknowledgement, ContactError> {
    let message = task.to_wire()?;
    sink.deliver(&message)
}

/// Writes `task-<n>.json` files into a directory, numbering from 1.
#[derive(Debug)]
pub struct FileSink {
    dir: PathBuf,
    next: Mutex<u64>,
}

impl FileSink {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, ContactError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| ContactError::Sink(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            next: Mutex::new(1),
        })
    }
}

impl TaskSink for FileSink {
    fn deliver(&self, message: &str) -> Result<Acknowledgement, ContactError> {
        let mut next = self.next.lock().unwrap_or_else(|p| p.into_inner());
        let path = self.dir.join(format!("task-{:06}.json", *next));
        let body = format!("{message}\n");
        std::fs::write(&path, &body).map_err(|e| ContactError::Sink(format!("{}: {e}", path.display())))?;
        *next += 1;
        Ok(Acknowledgement {
            destination: path.display().to_string(),
            bytes: body.len(),
        })
    }
}

/// Sends each task as one newline-terminated line over a fresh TCP
/// connection.
#[derive(Debug)]
pub struct TcpSink {
    addr: String,
    timeout: Duration,
    lock: Mutex<()>,
}

impl TcpSink {
    pub fn new(addr: impl Into<String>, timeout: Duration) -> Self {
        Self {
            addr: addr.into(),
            timeout,
            lock: Mutex::new(()),
        }
    }
}

impl TaskSink for TcpSink {
    fn deliver(&self, message: &str) -> Result<Acknowledgement, ContactError> {
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        let unreachable = |e: std::io::Error| ContactError::Sink(format!("{}: {e}", self.addr));
        let addr = self
            .addr
            .to_socket_addrs()
            .map_err(unreachable)?
            .next()
            .ok_or_else(|| ContactError::Sink(format!("{}: no address", self.addr)))?;
        let mut stream = TcpStream::connect_timeout(&addr, self.timeout).map_err(unreachable)?;
        stream.set_write_timeout(Some(self.timeout)).map_err(unreachable)?;
        stream.write_all(message.as_bytes()).map_err(unreachable)?;
        stream.write_all(b"\n").map_err(unreachable)?;
        stream.flush().map_err(unreachable)?;
        Ok(Acknowledgement {
            destination: format!("tcp://{}", self.addr),
            bytes: message.len() + 1,
        })
    }
}

/// Keeps messages in memory.
#[derive(Debug, Default)]
pub struct MemorySink {
    messages: Mutex<Vec<String>>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn messages(&self) -> Vec<String> {
        self.messages.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }
}

impl TaskSink for MemorySink {
    fn deliver(&self, message: &str) -> Result<Acknowledgement, ContactError> {
        let mut messages = self.messages.lock().unwrap_or_else(|p| p.into_inner());
        messages.push(message.to_string());
        Ok(Acknowledgement {
            destination: format!("memory#{}", messages.len()),
            bytes: message.len(),
        })
    }
}
