//! Session state and the in-memory session store.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock as StdRwLock};
use std::time::{Duration, Instant, SystemTime};

use lungseg::edit::{seeds_from_stroke, EditHistory, Stroke};
use lungseg::fc::{AffinityParams, FcResult, DEFAULT_THETA};
use lungseg::io::{load_volume, save_labels, save_volume};
use lungseg::seeds::{Provenance, SeedSet};
use lungseg::{BinaryMask, HuVolume, Side};
use serde::Serialize;
use tokio::sync::RwLock;

use crate::error::ApiError;

#[derive(Clone, Debug, Serialize)]
pub struct SessionDescriptor {
    pub session_id: String,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub hu_min: f32,
    pub hu_max: f32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SideVolumes {
    pub left: f64,
    pub right: f64,
    pub combined: f64,
}

pub struct Session {
    pub id: String,
    pub volume: Arc<HuVolume>,
    pub mask: BinaryMask,
    /// Side labels from the last segmentation: 0 none, 1 right, 2 left.
    segmented_sides: Option<Vec<u8>>,
    /// Seeds painted with seed strokes, used by the next seeded run.
    pub pending_seeds: SeedSet,
    pub last_seeds: Option<SeedSet>,
    pub history: EditHistory,
    pub params: AffinityParams,
    pub theta: f64,
    pub created_at: SystemTime,
}

impl Session {
    pub fn new(id: String, volume: HuVolume) -> Self {
        Session {
            id,
            mask: BinaryMask::empty(volume.geometry().clone()),
            volume: Arc::new(volume),
            segmented_sides: None,
            pending_seeds: SeedSet::new(vec![], vec![], Provenance::ManualStroke),
            last_seeds: None,
            history: EditHistory::new(),
            params: AffinityParams::default(),
            theta: DEFAULT_THETA,
            created_at: SystemTime::now(),
        }
    }

    pub fn descriptor(&self) -> SessionDescriptor {
        let g = self.volume.geometry();
        let (hu_min, hu_max) = self.volume.min_max();
        SessionDescriptor {
            session_id: self.id.clone(),
            dims: g.dims,
            spacing: g.spacing,
            hu_min,
            hu_max,
        }
    }

    /// Side of a mask voxel: its label from the last segmentation, or for
    /// voxels painted in afterwards, the half of the grid it lies in.
    pub fn side_of(&self, index: usize) -> Side {
        match self.segmented_sides.as_ref().map(|s| s[index]) {
            Some(1) => Side::Right,
            Some(2) => Side::Left,
            _ => {
                let g = self.volume.geometry();
                let (axis, _) = g.left_right_axis();
                let mid = (g.dims[axis] as f64 - 1.0) / 2.0;
                g.side_of(g.voxel(index)[axis] as f64, mid)
            }
        }
    }

    /// Label map of the current mask: 1 right, 2 left.
    pub fn labels(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.mask.geometry().len()];
        for i in self.mask.iter_set() {
            out[i] = match self.side_of(i) {
                Side::Right => 1,
                Side::Left => 2,
            };
        }
        out
    }

    pub fn volumes(&self) -> SideVolumes {
        let ml = self.volume.geometry().voxel_volume_mm3() / 1000.0;
        let (mut left, mut right) = (0usize, 0usize);
        for i in self.mask.iter_set() {
            match self.side_of(i) {
                Side::Left => left += 1,
                Side::Right => right += 1,
            }
        }
        SideVolumes {
            left: left as f64 * ml,
            right: right as f64 * ml,
            combined: (left + right) as f64 * ml,
        }
    }

    pub fn combined_volume_ml(&self) -> f64 {
        lungseg::metrics::volume_ml(&self.mask)
    }

    /// Replaces the mask with a segmentation result and clears the edit
    /// stack.
    pub fn set_segmentation(&mut self, result: &FcResult, params: AffinityParams, theta: f64) {
        self.mask = result.combined_mask.clone();
        self.segmented_sides = Some(result.side_labels());
        self.last_seeds = Some(result.seeds.clone());
        self.history.clear();
        self.params = params;
        self.theta = theta;
    }

    /// Adds the voxels of a seed stroke to the pending seeds; returns the
    /// number of new seeds.
    pub fn stash_seeds(&mut self, stroke: &Stroke) -> lungseg::Result<usize> {
        let painted = seeds_from_stroke(stroke, self.volume.geometry())?;
        let mut added = 0;
        for side in [Side::Left, Side::Right] {
            let pending = self.pending_seeds.side_mut(side);
            for v in painted.side(side) {
                if !pending.contains(v) {
                    pending.push(*v);
                    added += 1;
                }
            }
        }
        Ok(added)
    }

    fn restore(id: String, volume: HuVolume, labels: &HuVolume) -> lungseg::Result<Self> {
        let mut session = Session::new(id, volume);
        let sides: Vec<u8> = labels.values().iter().map(|&v| v.clamp(0.0, 2.0) as u8).collect();
        session.mask = BinaryMask::from_bits(session.volume.geometry().clone(), sides.clone())?;
        session.segmented_sides = Some(sides);
        Ok(session)
    }
}

pub struct SessionEntry {
    pub session: RwLock<Session>,
    last_access: Mutex<Instant>,
}

impl SessionEntry {
    fn touch(&self) {
        *self.last_access.lock().expect("poisoned") = Instant::now();
    }

    fn idle_since(&self) -> Instant {
        *self.last_access.lock().expect("poisoned")
    }
}

/// Sessions by id. Idle sessions are evicted after `ttl`; with a spill
/// directory they are written there first and reloaded on next access
/// (edit history is not kept across a spill).
pub struct SessionStore {
    sessions: StdRwLock<HashMap<String, Arc<SessionEntry>>>,
    ttl: Duration,
    spill_dir: Option<PathBuf>,
}

impl SessionStore {
    pub fn new(ttl: Duration, spill_dir: Option<PathBuf>) -> Self {
        SessionStore {
            sessions: StdRwLock::new(HashMap::new()),
            ttl,
            spill_dir,
        }
    }

    pub fn create(&self, volume: HuVolume) -> (String, Arc<SessionEntry>) {
        let id = uuid::Uuid::new_v4().to_string();
        let entry = self.insert(Session::new(id.clone(), volume));
        (id, entry)
    }

    fn insert(&self, session: Session) -> Arc<SessionEntry> {
        let id = session.id.clone();
        let entry = Arc::new(SessionEntry {
            session: RwLock::new(session),
            last_access: Mutex::new(Instant::now()),
        });
        self.sessions
            .write()
            .expect("poisoned")
            .insert(id, entry.clone());
        entry
    }

    pub fn get(&self, id: &str) -> Result<Arc<SessionEntry>, ApiError> {
        let found = self.sessions.read().expect("poisoned").get(id).cloned();
        let entry = match found {
            Some(e) => e,
            None => self.unspill(id)?,
        };
        entry.touch();
        Ok(entry)
    }

    pub fn remove(&self, id: &str) -> bool {
        let removed = self.sessions.write().expect("poisoned").remove(id).is_some();
        if let Some(dir) = self.spill_paths(id) {
            let _ = std::fs::remove_file(&dir.0);
            let _ = std::fs::remove_file(&dir.1);
        }
        removed
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Evicts sessions idle for longer than the ttl as of `now`. Sessions
    /// with a request in flight are skipped. Returns the number evicted.
    pub fn evict_idle(&self, now: Instant) -> usize {
        let stale: Vec<(String, Arc<SessionEntry>)> = self
            .sessions
            .read()
            .expect("poisoned")
            .iter()
            .filter(|(_, e)| now.saturating_duration_since(e.idle_since()) > self.ttl)
            .map(|(id, e)| (id.clone(), e.clone()))
            .collect();
        let mut evicted = 0;
        for (id, entry) in stale {
            let Ok(session) = entry.session.try_write() else {
                continue;
            };
            if let Err(e) = self.spill(&session) {
                log::warn!("could not spill session {id}, keeping it in memory: {e}");
                continue;
            }
            self.sessions.write().expect("poisoned").remove(&id);
            evicted += 1;
        }
        evicted
    }

    fn spill_paths(&self, id: &str) -> Option<(PathBuf, PathBuf)> {
        // ids are uuids; anything else never touches the filesystem
        uuid::Uuid::parse_str(id).ok()?;
        let dir: &Path = self.spill_dir.as_deref()?;
        Some((
            dir.join(format!("{id}.volume.nii.gz")),
            dir.join(format!("{id}.labels.nii.gz")),
        ))
    }

    fn spill(&self, session: &Session) -> lungseg::Result<()> {
        let Some((vol_path, label_path)) = self.spill_paths(&session.id) else {
            return Ok(());
        };
        save_volume(&session.volume, &vol_path)?;
        save_labels(session.volume.geometry(), &session.labels(), &label_path)
    }

    fn unspill(&self, id: &str) -> Result<Arc<SessionEntry>, ApiError> {
        let unknown = || ApiError::UnknownSession(id.to_string());
        let (vol_path, label_path) = self.spill_paths(id).ok_or_else(unknown)?;
        if !vol_path.exists() {
            return Err(unknown());
        }
        let volume = load_volume(&vol_path)?;
        let labels = load_volume(&label_path)?;
        let session = Session::restore(id.to_string(), volume, &labels)?;
        let _ = std::fs::remove_file(&vol_path);
        let _ = std::fs::remove_file(&label_path);
        Ok(self.insert(session))
    }
}
