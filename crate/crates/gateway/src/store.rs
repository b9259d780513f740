//! On-disk session store.
//!
//! ```text
//! <root>/sessions/<id>/meta.json            format version, params, snapshot count
//! <root>/sessions/<id>/snapshots/000003.json state with the cloud by file name
//! <root>/sessions/<id>/clouds/cloud-000003.ply
//! ```
//!
//! `meta.json` is authoritative: snapshot files past its count are leftovers
//! of an interrupted write and are ignored. Every file is written to a
//! temporary name and renamed into place. Consecutive snapshots that share a
//! cloud (same `Arc`) share the PLY file, so undo history costs one cloud
//! per cloud edit rather than one per snapshot.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cellreach::cloudkit::{ply, OrientedBox, PointCloud};
use cellreach::feastool::{AnalysisParams, RobotPlacement, Session, SessionState};
use cellreach::zonekit::InteractionZone;
use serde::{Deserialize, Serialize};

use crate::error::{GatewayError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub format_version: u32,
    pub id: String,
    pub created_ms: u64,
    pub params: AnalysisParams,
    pub snapshots: usize,
}

/// A snapshot as written: the cloud is a file name under `clouds/`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredState {
    workspace: OrientedBox,
    cloud: String,
    robot: Option<RobotPlacement>,
    zones: Vec<InteractionZone>,
}

/// What `load_all` found for one session directory.
#[derive(Debug)]
pub enum Loaded {
    Ok(Persisted),
    /// The directory exists but cannot be rebuilt; `reason` says why.
    Unrecoverable { id: String, reason: String },
}

/// A session together with the bookkeeping needed to persist later edits.
#[derive(Debug, Clone)]
pub struct Persisted {
    pub meta: Meta,
    pub session: Session,
    /// Cloud file of each snapshot, parallel to the session history.
    clouds: Vec<String>,
}

impl Persisted {
    pub fn id(&self) -> &str {
        &self.meta.id
    }
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> GatewayError {
    GatewayError::storage(format!("{}: {e}", path.display()))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn json_bytes<S: Serialize>(v: &S) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("store records serialize");
    out.push(b'\n');
    out
}

fn snapshot_name(i: usize) -> String {
    format!("{i:06}.json")
}

fn cloud_name(i: usize) -> String {
    format!("cloud-{i:06}.ply")
}

impl Store {
    /// Opens (creating if needed) the store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let sessions = root.join("sessions");
        fs::create_dir_all(&sessions).map_err(|e| io_err(&sessions, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(id)
    }

    /// Writes a new session with its whole history.
    pub fn create(&self, id: &str, created_ms: u64, session: Session) -> Result<Persisted> {
        let dir = self.dir(id);
        for sub in ["snapshots", "clouds"] {
            let d = dir.join(sub);
            fs::create_dir_all(&d).map_err(|e| io_err(&d, e))?;
        }
        let mut p = Persisted {
            meta: Meta {
                format_version: FORMAT_VERSION,
                id: id.to_string(),
                created_ms,
                params: session.params,
                snapshots: 0,
            },
            session,
            clouds: Vec::new(),
        };
        self.sync(&mut p)?;
        Ok(p)
    }

    /// Brings the files in line with `p.session`: appends snapshots the disk
    /// lacks, drops ones that were undone, and rewrites the meta record.
    pub fn sync(&self, p: &mut Persisted) -> Result<()> {
        let dir = self.dir(&p.meta.id);
        let history = p.session.history();
        let on_disk = p.clouds.len();

        if history.len() < on_disk {
            // Meta first: a crash between the two steps leaves an ignored file.
            let old = std::mem::replace(&mut p.meta.snapshots, history.len());
            p.meta.params = p.session.params;
            write_atomic(&dir.join("meta.json"), &json_bytes(&p.meta))?;
            for i in history.len()..old {
                let _ = fs::remove_file(dir.join("snapshots").join(snapshot_name(i)));
                if p.clouds[i] == cloud_name(i) {
                    let _ = fs::remove_file(dir.join("clouds").join(&p.clouds[i]));
                }
            }
            p.clouds.truncate(history.len());
            return Ok(());
        }

        for i in on_disk..history.len() {
            let state = &history[i];
            let shared = i > 0 && Arc::ptr_eq(&state.cloud, &history[i - 1].cloud);
            let cloud = if shared {
                p.clouds[i - 1].clone()
            } else {
                let name = cloud_name(i);
                write_atomic(&dir.join("clouds").join(&name), &ply::write_exact(&*state.cloud))?;
                name
            };
            let stored = StoredState {
                workspace: state.workspace,
                cloud: cloud.clone(),
                robot: state.robot.clone(),
                zones: state.zones.clone(),
            };
            write_atomic(&dir.join("snapshots").join(snapshot_name(i)), &json_bytes(&stored))?;
            p.clouds.push(cloud);
        }
        p.meta.snapshots = history.len();
        p.meta.params = p.session.params;
        write_atomic(&dir.join("meta.json"), &json_bytes(&p.meta))
    }

    pub fn delete(&self, id: &str) -> Result<()> {
        let dir = self.dir(id);
        match fs::remove_dir_all(&dir) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(io_err(&dir, e)),
        }
    }

    /// Every session directory, in id order. A broken session never stops
    /// the others from loading.
    pub fn load_all(&self) -> Result<Vec<Loaded>> {
        let sessions = self.root.join("sessions");
        let mut ids: Vec<String> = fs::read_dir(&sessions)
            .map_err(|e| io_err(&sessions, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .filter_map(|e| e.file_name().into_string().ok())
            .collect();
        ids.sort();
        Ok(ids
            .into_iter()
            .map(|id| match self.load(&id) {
                Ok(p) => Loaded::Ok(p),
                Err(reason) => Loaded::Unrecoverable { id, reason },
            })
            .collect())
    }

    fn load(&self, id: &str) -> std::result::Result<Persisted, String> {
        let dir = self.dir(id);
        let read = |p: PathBuf| fs::read(&p).map_err(|e| format!("{}: {e}", p.display()));
        let meta: Meta = serde_json::from_slice(&read(dir.join("meta.json"))?)
            .map_err(|e| format!("meta.json: {e}"))?;
        if meta.format_version != FORMAT_VERSION {
            return Err(format!("unsupported format_version {}", meta.format_version));
        }
        if meta.id != id {
            return Err(format!("meta.json names session `{}`", meta.id));
        }
        let mut history: Vec<SessionState> = Vec::with_capacity(meta.snapshots);
        let mut clouds: Vec<String> = Vec::with_capacity(meta.snapshots);
        for i in 0..meta.snapshots {
            let name = snapshot_name(i);
            let stored: StoredState = serde_json::from_slice(&read(dir.join("snapshots").join(&name))?)
                .map_err(|e| format!("{name}: {e}"))?;
            if stored.cloud.contains(['/', '\\']) || stored.cloud.starts_with('.') {
                return Err(format!("{name}: bad cloud reference `{}`", stored.cloud));
            }
            let cloud = match (history.last(), clouds.last()) {
                (Some(prev), Some(prev_name)) if *prev_name == stored.cloud => prev.cloud.clone(),
                _ => {
                    let bytes = read(dir.join("clouds").join(&stored.cloud))?;
                    let c: PointCloud = ply::read(&bytes).map_err(|e| format!("{}: {e}", stored.cloud))?;
                    Arc::new(c)
                }
            };
            let state = SessionState {
                workspace: stored.workspace,
                cloud,
                robot: stored.robot,
                zones: stored.zones,
            };
            state.workspace.validate().map_err(|e| format!("{name}: {e}"))?;
            clouds.push(stored.cloud);
            history.push(state);
        }
        let session = Session::from_history(meta.params, history).map_err(|e| e.to_string())?;
        Ok(Persisted { meta, session, clouds })
    }
}
