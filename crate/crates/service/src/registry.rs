//! Session registry, model loading and background optimization runs.
//!
//! Each session sits behind a reader-writer lock: edits and published
//! optimization steps take the write lock, so readers always see a complete
//! snapshot. Optimization runs on its own thread and publishes one snapshot
//! per iteration.

use crate::export::{export, export_panel_config};
use crate::protocol::{
    CreateSession, Event, ExportKind, ExportResponse, PollResponse, ReferenceSource, RunReport, SessionFile, Snapshot,
};
use crate::session::{load_mesh, EditResult, Model, RunStatus, Session};
use crate::{Error, Result, SCHEMA_VERSION};
use coldbend_core::panel::PanelConfig;
use coldbend_core::P3;
use coldbend_design::{OptimizeConfig, Problem, ReferenceSurface};
use coldbend_surrogate::MdnModel;
use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock, RwLockReadGuard};
use std::thread::JoinHandle;
use tokio::sync::broadcast;

#[derive(Default)]
struct RunState {
    stop: Arc<AtomicBool>,
    reports: Vec<RunReport>,
    thread: Option<JoinHandle<()>>,
}

pub struct SessionHandle {
    session: RwLock<Session>,
    run: Mutex<RunState>,
    events: broadcast::Sender<Event>,
    panel: PanelConfig,
}

fn poisoned<T>(_: T) -> Error {
    Error::Invalid("session lock poisoned by an earlier failure".into())
}

impl SessionHandle {
    pub fn new(session: Session) -> Arc<Self> {
        let (events, _) = broadcast::channel(256);
        Arc::new(Self { session: RwLock::new(session), run: Mutex::new(RunState::default()), events, panel: export_panel_config() })
    }

    /// Read access to the latest complete snapshot.
    pub fn read(&self) -> Result<RwLockReadGuard<'_, Session>> {
        self.session.read().map_err(poisoned)
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Event> {
        self.events.subscribe()
    }

    fn emit(&self, e: Event) {
        // no subscribers is fine
        let _ = self.events.send(e);
    }

    pub fn snapshot(&self, tessellate: bool) -> Result<Snapshot> {
        Ok(self.read()?.snapshot(tessellate))
    }

    fn edited(&self, r: EditResult) -> EditResult {
        if r.changed {
            self.emit(Event::Predictions { revision: r.revision, panels: r.panels.clone() });
        }
        r
    }

    pub fn move_vertex(&self, v: usize, pos: P3) -> Result<EditResult> {
        let r = self.session.write().map_err(poisoned)?.move_vertex(v, pos)?;
        Ok(self.edited(r))
    }

    pub fn set_mode(&self, face: usize, mode: usize) -> Result<EditResult> {
        let r = self.session.write().map_err(poisoned)?.set_mode(face, mode)?;
        Ok(self.edited(r))
    }

    pub fn subdivide(&self) -> Result<Snapshot> {
        let mut s = self.session.write().map_err(poisoned)?;
        s.subdivide()?;
        let snap = s.snapshot(false);
        drop(s);
        self.emit(Event::Predictions { revision: snap.revision, panels: snap.panels.clone() });
        Ok(snap)
    }

    pub fn export(&self, what: ExportKind) -> Result<ExportResponse> {
        let s = self.read()?;
        if *s.status() == RunStatus::Optimizing {
            return Err(Error::Busy("export needs an idle session".into()));
        }
        Ok(ExportResponse { schema: SCHEMA_VERSION, session: s.id, revision: s.revision(), export: export(&s, what, &self.panel)? })
    }

    /// Starts a background optimization of the current state.
    pub fn start(self: &Arc<Self>, config: OptimizeConfig) -> Result<()> {
        config.weights.validate().map_err(|e| Error::Invalid(e.to_string()))?;
        let mut run = self.run.lock().map_err(poisoned)?;
        let (state, model, reference, revision) = {
            let mut s = self.session.write().map_err(poisoned)?;
            if *s.status() == RunStatus::Optimizing {
                return Err(Error::Busy("an optimization is already running".into()));
            }
            s.set_status(RunStatus::Optimizing);
            (s.state().clone(), s.model(), s.reference(), s.revision())
        };
        if let Some(t) = run.thread.take() {
            let _ = t.join();
        }
        let stop = Arc::new(AtomicBool::new(false));
        run.stop = stop.clone();
        run.reports.clear();
        self.emit(Event::Status { status: RunStatus::Optimizing, revision });
        let me = self.clone();
        run.thread = Some(std::thread::spawn(move || {
            let outcome = me.optimize(state, model, reference.as_deref(), config, &stop);
            let status = match outcome {
                Ok(()) => RunStatus::Idle,
                Err(e) => RunStatus::Error { message: e.to_string() },
            };
            let revision = match me.session.write() {
                Ok(mut s) => {
                    s.set_status(status.clone());
                    s.revision()
                }
                Err(_) => 0,
            };
            me.emit(Event::Status { status, revision });
        }));
        Ok(())
    }

    fn optimize(
        &self,
        mut state: coldbend_design::DesignState,
        model: Model,
        reference: Option<&ReferenceSurface>,
        config: OptimizeConfig,
        stop: &AtomicBool,
    ) -> Result<()> {
        let problem = Problem::new(&state, &*model, reference, config)?;
        let mut failure = None;
        problem.run(&mut state, |r, st| {
            let published = self.session.write().map_err(poisoned).and_then(|mut s| {
                let revision = s.publish(st.clone())?;
                Ok((RunReport { revision, checksum: s.checksum(), report: r.clone() }, s.snapshot(false).panels))
            });
            match published {
                Ok((report, panels)) => {
                    if let Ok(mut run) = self.run.lock() {
                        run.reports.push(report.clone());
                    }
                    self.emit(Event::Predictions { revision: report.revision, panels });
                    self.emit(Event::Iteration(report));
                    !stop.load(Ordering::SeqCst)
                }
                Err(e) => {
                    failure = Some(e);
                    false
                }
            }
        })?;
        failure.map_or(Ok(()), Err)
    }

    /// Asks a running optimization to stop after its current iteration.
    pub fn stop(&self) -> Result<()> {
        self.run.lock().map_err(poisoned)?.stop.store(true, Ordering::SeqCst);
        Ok(())
    }

    /// Blocks until the current run, if any, has finished.
    pub fn wait(&self) -> Result<()> {
        let t = self.run.lock().map_err(poisoned)?.thread.take();
        if let Some(t) = t {
            t.join().map_err(|_| Error::Invalid("optimization thread panicked".into()))?;
        }
        Ok(())
    }

    pub fn poll(&self, since: usize) -> Result<PollResponse> {
        let run = self.run.lock().map_err(poisoned)?;
        let s = self.read()?;
        Ok(PollResponse {
            schema: SCHEMA_VERSION,
            session: s.id,
            status: s.status().clone(),
            revision: s.revision(),
            reports: run.reports.iter().skip(since).cloned().collect(),
            total: run.reports.len(),
        })
    }

    pub fn file(&self) -> Result<SessionFile> {
        Ok(self.read()?.to_file())
    }
}

/// All sessions of one server and the models they use.
pub struct Service {
    sessions: RwLock<HashMap<u64, Arc<SessionHandle>>>,
    next: AtomicU64,
    default_model: Option<String>,
    models: Mutex<HashMap<String, Model>>,
}

impl Service {
    /// `default_model` names the model used when a request gives none; it is
    /// loaded from disk on first use unless registered beforehand.
    pub fn new(default_model: Option<String>) -> Self {
        Self { sessions: RwLock::default(), next: AtomicU64::new(1), default_model, models: Mutex::default() }
    }

    /// Makes an in-memory model available under `name`.
    pub fn register_model(&self, name: &str, model: Model) {
        self.models.lock().expect("model table").insert(name.to_string(), model);
    }

    pub fn model(&self, name: Option<&str>) -> Result<(Model, String)> {
        let name = name
            .map(str::to_string)
            .or_else(|| self.default_model.clone())
            .ok_or_else(|| Error::Invalid("no model given and the server has no default model".into()))?;
        let mut models = self.models.lock().map_err(poisoned)?;
        if let Some(m) = models.get(&name) {
            return Ok((m.clone(), name));
        }
        let m: Model = Arc::new(MdnModel::load(Path::new(&name))?);
        models.insert(name.clone(), m.clone());
        Ok((m, name))
    }

    fn insert(&self, session: Session) -> Result<Arc<SessionHandle>> {
        let h = SessionHandle::new(session);
        let id = h.read()?.id;
        self.sessions.write().map_err(poisoned)?.insert(id, h.clone());
        Ok(h)
    }

    pub fn create(&self, req: CreateSession) -> Result<Arc<SessionHandle>> {
        let mesh = load_mesh(&req.mesh)?;
        let reference = match req.reference {
            None => None,
            Some(ReferenceSource::Triangles(doc)) => Some(doc.surface()?),
            Some(ReferenceSource::Mesh(src)) => Some(ReferenceSurface::from_quad_mesh(&load_mesh(&src)?)?),
        };
        let (model, name) = self.model(req.model.as_deref())?;
        let id = self.next.fetch_add(1, Ordering::SeqCst);
        self.insert(Session::create(id, &mesh, model, Some(name), reference, req.options)?)
    }

    /// Restores a saved session; `model` overrides the file's model.
    pub fn load(&self, file: SessionFile, model: Option<&str>) -> Result<Arc<SessionHandle>> {
        let (m, name) = self.model(model.or(file.model.as_deref()))?;
        let id = self.next.fetch_add(1, Ordering::SeqCst);
        let mut file = file;
        file.model = Some(name);
        self.insert(Session::from_file(id, file, m)?)
    }

    pub fn get(&self, id: u64) -> Result<Arc<SessionHandle>> {
        self.sessions.read().map_err(poisoned)?.get(&id).cloned().ok_or(Error::NotFound(id))
    }

    pub fn remove(&self, id: u64) -> Result<()> {
        let h = self.sessions.write().map_err(poisoned)?.remove(&id).ok_or(Error::NotFound(id))?;
        h.stop()?;
        Ok(())
    }
}
