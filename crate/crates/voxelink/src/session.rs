//! One loaded scan, its mask, and the background worker that keeps a mesh
//! of the mask up to date.

use std::sync::{Arc, Mutex, MutexGuard, Weak};
use std::time::Duration;

use serde::Serialize;
use tokio::sync::{broadcast, mpsc};
use voxelink_core::annotation::{apply_stroke, redo, undo, CanvasPlane, EditJournal, EditRecord, StrokeLogEntry};
use voxelink_core::annotation::DEFAULT_JOURNAL_DEPTH;
use voxelink_core::cache::SliceCache;
use voxelink_core::mesh::{LodLadder, LodSummary};
use voxelink_core::surface::{CancelToken, DensityGrid, ExtractionProgress, ExtractionState, RegionUpdate, VoxelBox};
use voxelink_core::{Axis, MaskVolume, SliceImage, SliceRef, VoxelVolume};

use crate::error::ServiceError;
use crate::pipeline::{build_ladder, PipelineConfig};

/// Quiet period after an edit before a new extraction starts.
pub const DEBOUNCE: Duration = Duration::from_millis(150);

/// Progress and outcome of extraction jobs, as sent over the event socket.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobEvent {
    pub job_id: u64,
    #[serde(flatten)]
    pub body: JobEventBody,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "payload", rename_all = "lowercase")]
pub enum JobEventBody {
    Progress(ExtractionProgress),
    Done(MeshReady),
    Cancelled(ExtractionProgress),
}

impl JobEvent {
    pub fn is_terminal(&self) -> bool {
        !matches!(self.body, JobEventBody::Progress(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshReady {
    pub triangles: usize,
    pub vertices: usize,
    pub incremental: bool,
    pub cubes_marched: u64,
    pub levels: Vec<LodSummary>,
}

/// Result of an edit: voxels that changed and the slice they lie on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EditOutcome {
    pub changed_count: usize,
    pub slice: Option<SliceRef>,
    pub can_undo: bool,
    pub can_redo: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionInfo {
    pub id: String,
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub source_bit_depth: u8,
    pub window: Option<[f64; 2]>,
    pub foreground_voxels: usize,
    pub can_undo: bool,
    pub can_redo: bool,
    pub active_job: Option<u64>,
    pub mesh_job: Option<u64>,
}

struct ActiveJob {
    id: u64,
    cancel: CancelToken,
}

struct SessionState {
    mask: MaskVolume,
    canvas: CanvasPlane,
    journal: EditJournal,
    dirty: VoxelBox,
    active: Option<ActiveJob>,
    next_job: u64,
    lod: Option<(u64, Arc<LodLadder>)>,
    events: Vec<JobEvent>,
}

pub struct Session {
    pub id: String,
    volume: Arc<VoxelVolume>,
    config: PipelineConfig,
    state: Mutex<SessionState>,
    cache: Mutex<SliceCache>,
    events: broadcast::Sender<JobEvent>,
    kick: mpsc::UnboundedSender<()>,
}

/// Mesh bytes ready to send, or the job still producing them.
pub enum MeshLookup {
    Ready { job_id: u64, level: usize, ladder: Arc<LodLadder> },
    Pending { job_id: Option<u64> },
}

impl Session {
    /// Creates the session and starts its worker, which runs the first
    /// extraction right away. Must be called inside a tokio runtime.
    pub fn start(
        id: String,
        volume: VoxelVolume,
        mask: MaskVolume,
        config: PipelineConfig,
        cache_slices: usize,
    ) -> Result<Arc<Session>, ServiceError> {
        config.validate()?;
        mask.check_bound_to(&volume)?;
        let dims = volume.dims();
        let canvas = CanvasPlane::for_slice(dims, volume.spacing(), SliceRef::new(Axis::Axial, 0));
        let grid = DensityGrid::from_mask(&mask, volume.spacing());
        let (events, _) = broadcast::channel(1024);
        let (kick, kicks) = mpsc::unbounded_channel();
        let session = Arc::new(Session {
            id,
            volume: Arc::new(volume),
            config,
            state: Mutex::new(SessionState {
                mask,
                canvas,
                journal: EditJournal::new(DEFAULT_JOURNAL_DEPTH),
                dirty: VoxelBox::empty(),
                active: None,
                next_job: 1,
                lod: None,
                events: Vec::new(),
            }),
            cache: Mutex::new(SliceCache::new(Axis::Axial, cache_slices.max(1))),
            events,
            kick,
        });
        tokio::spawn(worker(Arc::downgrade(&session), kicks, grid));
        Ok(session)
    }

    pub fn volume(&self) -> &VoxelVolume {
        &self.volume
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn lock(&self) -> MutexGuard<'_, SessionState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn info(&self) -> SessionInfo {
        let st = self.lock();
        SessionInfo {
            id: self.id.clone(),
            dims: self.volume.dims(),
            spacing_mm: self.volume.spacing(),
            source_bit_depth: self.volume.source_bit_depth(),
            window: self.volume.window().map(|w| [w.center, w.width]),
            foreground_voxels: st.mask.foreground_count(),
            can_undo: st.journal.can_undo(),
            can_redo: st.journal.can_redo(),
            active_job: st.active.as_ref().map(|j| j.id),
            mesh_job: st.lod.as_ref().map(|(id, _)| *id),
        }
    }

    /// Grayscale slice through the slice cache, which follows the most
    /// recently requested axis and keeps a window around the last index.
    pub fn slice(&self, slice: SliceRef) -> Result<SliceImage, ServiceError> {
        slice.validate(self.volume.dims())?;
        let mut cache = self.cache.lock().unwrap_or_else(|p| p.into_inner());
        if cache.axis() != slice.axis {
            cache.reset(slice.axis);
        }
        Ok(cache.get(&self.volume, slice.index)?.clone())
    }

    pub fn mask_slice(&self, slice: SliceRef) -> Result<Vec<u8>, ServiceError> {
        Ok(self.lock().mask.slice_labels(slice.axis, slice.index)?)
    }

    pub fn mask_snapshot(&self) -> MaskVolume {
        self.lock().mask.clone()
    }

    pub fn apply_stroke(&self, entry: &StrokeLogEntry) -> Result<EditOutcome, ServiceError> {
        let (canvas, stroke) = entry.to_stroke()?;
        canvas.check_bound(self.volume.dims())?;
        let mut st = self.lock();
        let record = apply_stroke(&mut st.mask, &canvas, &stroke)?;
        st.canvas = canvas;
        let slice = Some(record.slice);
        let changed = record.len();
        if changed > 0 {
            self.mark_dirty(&mut st, &record);
            st.journal.push(record);
        }
        Ok(outcome(&st, changed, slice))
    }

    pub fn undo(&self) -> EditOutcome {
        let mut st = self.lock();
        let SessionState { mask, journal, .. } = &mut *st;
        let record = undo(mask, journal);
        self.finish_history(st, record)
    }

    pub fn redo(&self) -> EditOutcome {
        let mut st = self.lock();
        let SessionState { mask, journal, .. } = &mut *st;
        let record = redo(mask, journal);
        self.finish_history(st, record)
    }

    fn finish_history(&self, mut st: MutexGuard<'_, SessionState>, record: Option<EditRecord>) -> EditOutcome {
        match record {
            Some(r) => {
                self.mark_dirty(&mut st, &r);
                outcome(&st, r.len(), Some(r.slice))
            }
            None => outcome(&st, 0, None),
        }
    }

    /// Grows the pending re-extraction box, cancels any running job and
    /// wakes the worker.
    fn mark_dirty(&self, st: &mut SessionState, record: &EditRecord) {
        if let Some((a, b)) = record.voxel_bounds() {
            st.dirty = st.dirty.union(&VoxelBox::from_inclusive(a, b));
        }
        if let Some(job) = &st.active {
            job.cancel.cancel();
        }
        let _ = self.kick.send(());
    }

    pub fn mesh(&self, distance: f64) -> MeshLookup {
        let st = self.lock();
        if let Some(job) = &st.active {
            return MeshLookup::Pending { job_id: Some(job.id) };
        }
        match &st.lod {
            Some((job_id, ladder)) => MeshLookup::Ready {
                job_id: *job_id,
                level: voxelink_core::mesh::select_lod(ladder, distance),
                ladder: ladder.clone(),
            },
            None => MeshLookup::Pending { job_id: None },
        }
    }

    /// Subscribes to job events. With `replay`, events already emitted come
    /// first, with no gap or duplicate between the two.
    pub fn subscribe(&self, replay: bool) -> (Vec<JobEvent>, broadcast::Receiver<JobEvent>) {
        let st = self.lock();
        let rx = self.events.subscribe();
        let past = if replay { st.events.clone() } else { Vec::new() };
        (past, rx)
    }

    pub fn event_log(&self) -> Vec<JobEvent> {
        self.lock().events.clone()
    }

    fn emit_locked(&self, st: &mut SessionState, event: JobEvent) {
        st.events.push(event.clone());
        let _ = self.events.send(event);
    }

    fn emit(&self, event: JobEvent) {
        let mut st = self.lock();
        self.emit_locked(&mut st, event);
    }

    /// Claims the pending edits and registers a new job.
    fn begin_job(&self, grid: &mut DensityGrid) -> (u64, CancelToken, VoxelBox) {
        let mut st = self.lock();
        let dirty = std::mem::replace(&mut st.dirty, VoxelBox::empty());
        if !dirty.is_empty() {
            grid.refresh_from_mask(&st.mask, dirty);
        }
        let id = st.next_job;
        st.next_job += 1;
        let cancel = CancelToken::new();
        st.active = Some(ActiveJob {
            id,
            cancel: cancel.clone(),
        });
        (id, cancel, dirty)
    }

    fn finish_job(&self, id: u64, outcome: JobOutcome) {
        let mut st = self.lock();
        st.active = None;
        let body = match outcome {
            JobOutcome::Done { ladder, ready } => {
                st.lod = Some((id, Arc::new(ladder)));
                JobEventBody::Done(ready)
            }
            JobOutcome::Cancelled { progress, unfinished } => {
                st.dirty = st.dirty.union(&unfinished);
                JobEventBody::Cancelled(progress)
            }
            JobOutcome::Failed(message) => {
                tracing::error!(session = %self.id, job = id, %message, "extraction failed");
                JobEventBody::Cancelled(ExtractionProgress {
                    cancelled: true,
                    ..Default::default()
                })
            }
        };
        self.emit_locked(&mut st, JobEvent { job_id: id, body });
    }
}

fn outcome(st: &SessionState, changed_count: usize, slice: Option<SliceRef>) -> EditOutcome {
    EditOutcome {
        changed_count,
        slice,
        can_undo: st.journal.can_undo(),
        can_redo: st.journal.can_redo(),
    }
}

enum JobOutcome {
    Done { ladder: LodLadder, ready: MeshReady },
    /// `unfinished` must be re-marched by a later job.
    Cancelled { progress: ExtractionProgress, unfinished: VoxelBox },
    Failed(String),
}

struct JobInput {
    id: u64,
    grid: DensityGrid,
    state: Option<ExtractionState>,
    dirty: VoxelBox,
    cancel: CancelToken,
}

struct JobOutput {
    grid: DensityGrid,
    state: Option<ExtractionState>,
    outcome: JobOutcome,
}

/// Debounced extraction loop. At most one job runs at a time and a new one
/// starts only after `DEBOUNCE` has passed without further edits.
async fn worker(session: Weak<Session>, mut kicks: mpsc::UnboundedReceiver<()>, mut grid: DensityGrid) {
    let mut state: Option<ExtractionState> = None;
    let mut first = true;
    loop {
        if !first {
            loop {
                tokio::select! {
                    k = kicks.recv() => if k.is_none() { return },
                    _ = tokio::time::sleep(DEBOUNCE) => break,
                }
            }
        }
        first = false;
        let Some(s) = session.upgrade() else { return };
        let (id, cancel, dirty) = s.begin_job(&mut grid);
        let input = JobInput {
            id,
            grid,
            state: state.take(),
            dirty,
            cancel,
        };
        let job_session = s.clone();
        drop(s);
        let mut handle = tokio::task::spawn_blocking(move || run_job(&job_session, input));
        let mut rekicked = false;
        let out = loop {
            tokio::select! {
                r = &mut handle => break r,
                k = kicks.recv(), if !kicks.is_closed() => if k.is_some() { rekicked = true },
            }
        };
        let out = match out {
            Ok(out) => out,
            Err(e) => {
                tracing::error!(job = id, "extraction task panicked: {e}");
                return;
            }
        };
        grid = out.grid;
        state = out.state;
        let Some(s) = session.upgrade() else { return };
        s.finish_job(id, out.outcome);
        drop(s);
        if !rekicked && kicks.recv().await.is_none() {
            return;
        }
    }
}

fn run_job(session: &Session, input: JobInput) -> JobOutput {
    let JobInput {
        id,
        grid,
        state,
        dirty,
        cancel,
    } = input;
    let mc = session.config.mc;
    let mut report = |p: ExtractionProgress| {
        if !p.cancelled {
            session.emit(JobEvent {
                job_id: id,
                body: JobEventBody::Progress(p),
            });
        }
    };
    let (state, incremental, marched) = match state {
        Some(mut st) => match st.update_observed(&grid, dirty, mc.yield_interval, &mut report, &cancel) {
            Ok(RegionUpdate::Done(n)) => (st, true, n),
            Ok(RegionUpdate::Cancelled(progress)) => {
                return JobOutput {
                    grid,
                    state: Some(st),
                    outcome: JobOutcome::Cancelled {
                        progress,
                        unfinished: dirty,
                    },
                }
            }
            Err(e) => {
                return JobOutput {
                    grid,
                    state: None,
                    outcome: JobOutcome::Failed(e.to_string()),
                }
            }
        },
        None => match ExtractionState::build(&grid, &mc, &mut report, &cancel) {
            Ok(st) => {
                let n = st.last_remarched();
                (st, false, n)
            }
            // a partial build is useless; the next job starts over
            Err((_, progress)) => {
                return JobOutput {
                    grid,
                    state: None,
                    outcome: JobOutcome::Cancelled {
                        progress,
                        unfinished: VoxelBox::empty(),
                    },
                }
            }
        },
    };
    let mesh = state.mesh(&grid);
    let outcome = match build_ladder(&mesh, &session.config.decimation) {
        Ok(ladder) => JobOutcome::Done {
            ready: MeshReady {
                triangles: mesh.triangle_count(),
                vertices: mesh.vertex_count(),
                incremental,
                cubes_marched: marched,
                levels: ladder.summary(),
            },
            ladder,
        },
        Err(e) => JobOutcome::Failed(e.to_string()),
    };
    JobOutput {
        grid,
        state: Some(state),
        outcome,
    }
}
