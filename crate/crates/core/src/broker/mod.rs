//! Generative job orchestration: immediate submission, online proxy
//! production on a worker pool, variant selection and a sequential offline
//! queue whose results replace proxies in the scene.

mod requests;
mod state;

use std::collections::{BTreeMap, HashMap};
use std::sync::{mpsc, Arc, Condvar, Mutex, MutexGuard};
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::assets::{AssetError, AssetId, AssetStore};
use crate::events::{EventBus, EventKind};
use crate::genmod::{
    dispatch_with_timeout, generate_variants, AssetRole, Backend, GenError, GenerationResult, ModuleKind, VariantSet,
    VARIANT_COUNT,
};
use crate::render::{Camera, RenderError};
use crate::scene::{
    EditError, EditInstruction, EditLog, InstructionType, JobOutcome, ObjectId, ResultResolver, Scene, VariantPreview,
};
use crate::splat::Aabb;

pub use requests::{framing_camera, module_kinds};
pub use state::{transition, JobEvent, JobState, TRANSITION_TABLE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BrokerConfig {
    pub online_workers: usize,
    pub online_timeout_s: f64,
    pub offline_timeout_s: f64,
    /// Variant picked automatically when a job's proxies are ready.
    pub auto_select: Option<u8>,
    /// Seed for every job unless the instruction carries `params.seed`.
    pub base_seed: u64,
    /// Side length of object renders sent to online modules.
    pub preview_size: u32,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        Self {
            online_workers: 2,
            online_timeout_s: 30.0,
            offline_timeout_s: 1800.0,
            auto_select: None,
            base_seed: 0,
            preview_size: 128,
        }
    }
}

impl BrokerConfig {
    pub fn validate(&self) -> Result<(), BrokerError> {
        let ok = self.online_workers >= 1
            && self.online_timeout_s > 0.0
            && self.offline_timeout_s > 0.0
            && self.auto_select.is_none_or(|i| (i as usize) < VARIANT_COUNT)
            && self.preview_size > 0;
        if ok {
            Ok(())
        } else {
            Err(BrokerError::Malformed("invalid broker configuration".into()))
        }
    }

    pub fn online_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.online_timeout_s)
    }

    pub fn offline_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.offline_timeout_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationJob {
    pub id: String,
    pub instruction_id: String,
    /// Seq of the instruction; offline order follows it.
    pub seq: u64,
    pub instruction_type: InstructionType,
    pub target_object_id: Option<ObjectId>,
    pub prompt: String,
    pub kind: ModuleKind,
    pub offline_kind: Option<ModuleKind>,
    pub state: JobState,
    pub base_seed: u64,
    pub variants: Option<VariantSet>,
    pub selected_variant: Option<u8>,
    pub final_asset: Option<AssetId>,
    pub created_ms: u64,
    pub updated_ms: u64,
    pub error: Option<String>,
    pub warning: Option<String>,
}

impl GenerationJob {
    fn outcome(&self) -> JobOutcome {
        JobOutcome {
            variants: self.variants.as_ref().map(|set| {
                set.variants
                    .iter()
                    .map(|r| VariantPreview {
                        preview: r.asset(AssetRole::PreviewImage).cloned(),
                        mesh: r.asset(AssetRole::LowFiMesh).cloned(),
                    })
                    .collect()
            }),
            selected: self.selected_variant,
            final_asset: if self.state == JobState::Completed {
                self.final_asset.clone()
            } else {
                None
            },
        }
    }
}

/// One line of the job event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobEventRecord {
    pub job_id: String,
    pub seq: u64,
    /// `None` for the creation record.
    pub from: Option<String>,
    pub to: String,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitOutcome {
    pub job_id: Option<String>,
    pub applied: bool,
    pub object_id: Option<ObjectId>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BrokerError {
    #[error("object {0} not found")]
    ObjectNotFound(ObjectId),
    #[error("malformed instruction: {0}")]
    Malformed(String),
    #[error("instruction {0} selects a variant but its job produced none")]
    StaleVariant(String),
    #[error("object id {0} is already in use")]
    DuplicateObjectId(ObjectId),
    #[error("job {0} not found")]
    UnknownJob(String),
    #[error("event {event} is not allowed in state {state}")]
    IllegalTransition { state: String, event: String },
    #[error("job {job} is {state}; expected {expected}")]
    WrongState { job: String, state: String, expected: String },
    #[error("variant index {0} is out of range")]
    BadIndex(u8),
    #[error("prompt must not be empty")]
    EmptyPrompt,
    #[error(transparent)]
    Render(RenderError),
    #[error(transparent)]
    Generation(#[from] GenError),
    #[error(transparent)]
    Asset(#[from] AssetError),
}

impl From<EditError> for BrokerError {
    fn from(e: EditError) -> Self {
        match e {
            EditError::ObjectNotFound(id) => Self::ObjectNotFound(id),
            EditError::MalformedInstruction(m) => Self::Malformed(m),
            EditError::StaleVariant(id) => Self::StaleVariant(id),
            EditError::DuplicateObjectId(id) => Self::DuplicateObjectId(id),
        }
    }
}

impl From<RenderError> for BrokerError {
    fn from(e: RenderError) -> Self {
        Self::Render(e)
    }
}

/// Per-job data that is not part of the public job record.
struct JobContext {
    instruction: EditInstruction,
    /// Scene right after the instruction was applied.
    scene: Arc<Scene>,
}

struct State {
    scene: Arc<Scene>,
    jobs: BTreeMap<String, GenerationJob>,
    contexts: HashMap<String, JobContext>,
    by_instruction: HashMap<String, String>,
    log: Vec<EditInstruction>,
    log_index: HashMap<String, usize>,
    job_events: Vec<JobEventRecord>,
    next_job: u64,
}

/// Resolver over the job table while the state lock is held.
struct JobView<'a> {
    state: &'a State,
    assets: &'a AssetStore,
}

impl ResultResolver for JobView<'_> {
    fn outcome(&self, instruction_id: &str) -> Option<JobOutcome> {
        let job = self.state.by_instruction.get(instruction_id)?;
        Some(self.state.jobs[job].outcome())
    }

    fn asset_bounds(&self, asset: &AssetId) -> Option<Aabb> {
        self.assets.bounds(asset)
    }
}

struct Shared {
    state: Mutex<State>,
    changed: Condvar,
    assets: AssetStore,
    backend: Arc<dyn Backend>,
    config: BrokerConfig,
    events: Arc<EventBus>,
    queue: Mutex<Option<mpsc::Sender<String>>>,
    offline: Mutex<()>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

pub struct Broker {
    shared: Arc<Shared>,
}

impl Broker {
    /// Starts a broker with `config.online_workers` online workers.
    pub fn new(
        scene: Scene,
        assets: AssetStore,
        backend: Arc<dyn Backend>,
        config: BrokerConfig,
        events: Arc<EventBus>,
    ) -> Result<Broker, BrokerError> {
        config.validate()?;
        let broker = Self::build(scene, assets, backend, config, events);
        let (tx, rx) = mpsc::channel::<String>();
        let rx = Arc::new(Mutex::new(rx));
        for i in 0..broker.shared.config.online_workers {
            let shared = broker.shared.clone();
            let rx = rx.clone();
            thread::Builder::new()
                .name(format!("online-{i}"))
                .spawn(move || loop {
                    let next = rx.lock().expect("queue lock").recv();
                    match next {
                        Ok(job) => shared.process_online(&job),
                        Err(_) => break,
                    }
                })
                .expect("spawn online worker");
        }
        *broker.shared.queue.lock().expect("queue lock") = Some(tx);
        Ok(broker)
    }

    /// A broker without workers; jobs only move through [`Broker::advance_job`],
    /// [`Broker::select_variant`] and [`Broker::run_offline_once`].
    pub fn manual(scene: Scene, assets: AssetStore, backend: Arc<dyn Backend>, config: BrokerConfig) -> Broker {
        Self::build(scene, assets, backend, config, Arc::new(EventBus::new()))
    }

    fn build(scene: Scene, assets: AssetStore, backend: Arc<dyn Backend>, config: BrokerConfig, events: Arc<EventBus>) -> Broker {
        let state = State {
            scene: Arc::new(scene),
            jobs: BTreeMap::new(),
            contexts: HashMap::new(),
            by_instruction: HashMap::new(),
            log: Vec::new(),
            log_index: HashMap::new(),
            job_events: Vec::new(),
            next_job: 1,
        };
        Broker {
            shared: Arc::new(Shared {
                state: Mutex::new(state),
                changed: Condvar::new(),
                assets,
                backend,
                config,
                events,
                queue: Mutex::new(None),
                offline: Mutex::new(()),
            }),
        }
    }

    pub fn assets(&self) -> &AssetStore {
        &self.shared.assets
    }

    pub fn events(&self) -> &Arc<EventBus> {
        &self.shared.events
    }

    pub fn config(&self) -> &BrokerConfig {
        &self.shared.config
    }

    /// Current scene; never shows a half-applied instruction.
    pub fn scene(&self) -> Arc<Scene> {
        self.shared.lock().scene.clone()
    }

    pub fn job(&self, id: &str) -> Option<GenerationJob> {
        self.shared.lock().jobs.get(id).cloned()
    }

    pub fn jobs(&self) -> Vec<GenerationJob> {
        self.shared.lock().jobs.values().cloned().collect()
    }

    pub fn job_for_instruction(&self, instruction_id: &str) -> Option<GenerationJob> {
        let st = self.shared.lock();
        st.by_instruction.get(instruction_id).map(|j| st.jobs[j].clone())
    }

    /// Accepted instructions in order, with selections folded in.
    pub fn export_log(&self) -> EditLog {
        EditLog::new(self.shared.lock().log.clone())
    }

    pub fn job_events(&self) -> Vec<JobEventRecord> {
        self.shared.lock().job_events.clone()
    }

    pub fn job_events_jsonl(&self) -> String {
        self.job_events()
            .iter()
            .map(|e| serde_json::to_string(e).expect("event serializes") + "\n")
            .collect()
    }

    /// Fills `id`, `seq` and `timestamp_ms` when absent, then submits.
    pub fn submit_json(&self, mut value: Value) -> Result<SubmitOutcome, BrokerError> {
        let obj = value
            .as_object_mut()
            .ok_or_else(|| BrokerError::Malformed("instruction must be a JSON object".into()))?;
        if !obj.contains_key("id") {
            obj.insert("id".into(), json!(uuid::Uuid::new_v4().to_string()));
        }
        if !obj.contains_key("timestamp_ms") {
            obj.insert("timestamp_ms".into(), json!(now_ms()));
        }
        let mut st = self.shared.lock();
        if !obj.contains_key("seq") {
            obj.insert("seq".into(), json!(st.scene.next_seq));
        }
        let instr: EditInstruction =
            serde_json::from_value(value).map_err(|e| BrokerError::Malformed(e.to_string()))?;
        self.shared.submit_locked(&mut st, instr)
    }

    /// Applies non-generative instructions at once; generative ones get a
    /// job, a proxy or label in the scene, and return without waiting for
    /// any backend.
    pub fn submit_instruction(&self, instr: EditInstruction) -> Result<SubmitOutcome, BrokerError> {
        let mut st = self.shared.lock();
        self.shared.submit_locked(&mut st, instr)
    }

    /// Next free seq for building instructions by hand.
    pub fn next_seq(&self) -> u64 {
        self.shared.lock().scene.next_seq
    }

    /// Submits a Magic Camera instruction for `cam`.
    pub fn magic_camera_snapshot(&self, cam: &Camera, prompt: &str) -> Result<String, BrokerError> {
        if prompt.trim().is_empty() {
            return Err(BrokerError::EmptyPrompt);
        }
        let value = json!({
            "type": "MagicCamera",
            "prompt": prompt,
            "params": { "camera": cam },
        });
        let out = self.submit_json(value)?;
        Ok(out.job_id.expect("magic camera creates a job"))
    }

    pub fn advance_job(&self, job_id: &str, event: JobEvent) -> Result<JobState, BrokerError> {
        let mut st = self.shared.lock();
        self.shared.advance(&mut st, job_id, event)
    }

    /// Picks variant `index` of a job whose proxies are ready and queues it
    /// for offline processing.
    pub fn select_variant(&self, job_id: &str, index: u8) -> Result<JobState, BrokerError> {
        let mut st = self.shared.lock();
        self.shared.select_locked(&mut st, job_id, index)
    }

    /// Runs every queued offline job once, in instruction seq order.
    /// Returns how many jobs were run.
    pub fn run_offline_once(&self) -> usize {
        self.shared.run_offline_once()
    }

    /// Waits until no job is waiting on its online phase.
    pub fn wait_online_idle(&self, timeout: Duration) -> bool {
        self.wait_until(timeout, |jobs| jobs.values().all(|j| !j.state.is_online()))
    }

    /// Waits until `pred` holds for the job table.
    pub fn wait_until(&self, timeout: Duration, pred: impl Fn(&BTreeMap<String, GenerationJob>) -> bool) -> bool {
        let deadline = Instant::now() + timeout;
        let mut st = self.shared.lock();
        loop {
            if pred(&st.jobs) {
                return true;
            }
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return false;
            }
            st = self.shared.changed.wait_timeout(st, left).expect("state lock").0;
        }
    }

    /// Stops accepting online work; running dispatches finish in the background.
    pub fn shutdown(&self) {
        self.shared.queue.lock().expect("queue lock").take();
    }
}

impl Drop for Broker {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl ResultResolver for Broker {
    fn outcome(&self, instruction_id: &str) -> Option<JobOutcome> {
        self.job_for_instruction(instruction_id).map(|j| j.outcome())
    }

    fn asset_bounds(&self, asset: &AssetId) -> Option<Aabb> {
        self.shared.assets.bounds(asset)
    }
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().expect("broker state lock")
    }

    fn scene_changed(&self, st: &State, reason: &str) {
        self.events.publish(
            EventKind::SceneChanged,
            json!({ "reason": reason, "next_seq": st.scene.next_seq, "objects": st.scene.objects.len() }),
        );
    }

    fn submit_locked(&self, st: &mut State, instr: EditInstruction) -> Result<SubmitOutcome, BrokerError> {
        if st.log_index.contains_key(&instr.id) {
            return Err(BrokerError::Malformed(format!("instruction id {} was already used", instr.id)));
        }
        if instr.kind == InstructionType::MagicCamera {
            instr.validate()?;
            requests::magic_camera(&instr)?;
            requests::check_scene_assets(&st.scene, &self.assets)?;
        }
        let mut scene = (*st.scene).clone();
        let touched = scene.apply(&instr, &JobView { state: st, assets: &self.assets })?;
        let scene = Arc::new(scene);
        st.scene = scene.clone();
        st.log_index.insert(instr.id.clone(), st.log.len());
        st.log.push(instr.clone());

        let Some((kind, offline_kind)) = module_kinds(instr.kind) else {
            self.scene_changed(st, "instruction");
            self.changed.notify_all();
            return Ok(SubmitOutcome {
                job_id: None,
                applied: true,
                object_id: touched,
            });
        };

        let job_id = format!("job-{:04}", st.next_job);
        st.next_job += 1;
        let target = match instr.kind {
            InstructionType::MagicCamera => None,
            _ => touched.clone(),
        };
        if let Some(target) = &target {
            let pending: Vec<String> = st
                .jobs
                .values()
                .filter(|j| j.target_object_id.as_ref() == Some(target) && !j.state.is_terminal())
                .map(|j| j.id.clone())
                .collect();
            for old in pending {
                self.advance(st, &old, JobEvent::Supersede(job_id.clone()))?;
            }
        }
        let now = now_ms();
        let job = GenerationJob {
            id: job_id.clone(),
            instruction_id: instr.id.clone(),
            seq: instr.seq,
            instruction_type: instr.kind,
            target_object_id: target,
            prompt: instr.prompt.clone().unwrap_or_default(),
            kind,
            offline_kind,
            state: JobState::Submitted,
            base_seed: instr.param_u64("seed").unwrap_or(self.config.base_seed),
            variants: None,
            selected_variant: None,
            final_asset: None,
            created_ms: now,
            updated_ms: now,
            error: None,
            warning: None,
        };
        st.by_instruction.insert(instr.id.clone(), job_id.clone());
        st.contexts.insert(job_id.clone(), JobContext { instruction: instr, scene });
        st.jobs.insert(job_id.clone(), job);
        self.record(st, &job_id, None);
        self.scene_changed(st, "instruction");
        if let Some(tx) = self.queue.lock().expect("queue lock").as_ref() {
            let _ = tx.send(job_id.clone());
        }
        self.changed.notify_all();
        Ok(SubmitOutcome {
            job_id: Some(job_id),
            applied: true,
            object_id: touched,
        })
    }

    fn record(&self, st: &mut State, job_id: &str, from: Option<&JobState>) {
        let job = &st.jobs[job_id];
        let record = JobEventRecord {
            job_id: job_id.to_string(),
            seq: st.job_events.len() as u64 + 1,
            from: from.map(|s| s.name().to_string()),
            to: job.state.name().to_string(),
            timestamp_ms: job.updated_ms,
        };
        self.events.publish(
            EventKind::JobStateChanged,
            json!({ "job_id": job_id, "from": record.from, "to": record.to, "job": job }),
        );
        st.job_events.push(record);
    }

    /// Re-derives scene content from the job's current outcome.
    fn refresh_scene(&self, st: &mut State, job_id: &str) -> bool {
        let outcome = st.jobs[job_id].outcome();
        let instr = st.log[st.log_index[&st.contexts[job_id].instruction.id]].clone();
        let mut scene = (*st.scene).clone();
        let found = scene.refresh_outcome(&instr, &outcome, &JobView { state: st, assets: &self.assets });
        if scene != *st.scene {
            st.scene = Arc::new(scene);
            self.scene_changed(st, "job");
        }
        found
    }

    fn advance(&self, st: &mut State, job_id: &str, event: JobEvent) -> Result<JobState, BrokerError> {
        let job = st.jobs.get(job_id).ok_or_else(|| BrokerError::UnknownJob(job_id.to_string()))?;
        let from = job.state.clone();
        let next = transition(&from, &event).ok_or_else(|| BrokerError::IllegalTransition {
            state: from.name().to_string(),
            event: event.name().to_string(),
        })?;
        if let JobEvent::Select(i) = event {
            if i as usize >= VARIANT_COUNT {
                return Err(BrokerError::BadIndex(i));
            }
        }
        let job = st.jobs.get_mut(job_id).expect("checked");
        job.state = next.clone();
        job.updated_ms = now_ms();
        let mut publish_assets = Vec::new();
        match &event {
            JobEvent::ProxyDone(set) => {
                job.variants = Some(set.clone());
                publish_assets.extend(set.variants.iter().flat_map(|r| r.assets.iter().map(|(_, id)| id.clone())));
            }
            JobEvent::ProxyFailed(reason) | JobEvent::OfflineFailed(reason) => job.error = Some(reason.clone()),
            JobEvent::Select(i) => job.selected_variant = Some(*i),
            JobEvent::OfflineDone(result) => {
                job.final_asset = requests::final_asset(result).cloned();
                publish_assets.extend(result.assets.iter().map(|(_, id)| id.clone()));
            }
            _ => {}
        }
        for id in publish_assets {
            self.events.publish(EventKind::AssetAdded, json!({ "asset": id }));
        }
        self.record(st, job_id, Some(&from));

        match event {
            JobEvent::ProxyDone(_) => {
                self.refresh_scene(st, job_id);
                let instr_pick = st.contexts[job_id].instruction.selected_variant;
                if let Some(pick) = instr_pick.or(self.config.auto_select) {
                    self.select_locked(st, job_id, pick)?;
                }
            }
            JobEvent::Select(i) => {
                let idx = st.log_index[&st.contexts[job_id].instruction.id];
                st.log[idx].selected_variant = Some(i);
                self.refresh_scene(st, job_id);
            }
            JobEvent::OfflineDone(_) => {
                if !self.refresh_scene(st, job_id) {
                    let job = st.jobs.get_mut(job_id).expect("checked");
                    job.warning = Some("target was removed before the result arrived; stored as an orphan asset".into());
                }
            }
            _ => {}
        }
        self.changed.notify_all();
        Ok(next)
    }

    fn select_locked(&self, st: &mut State, job_id: &str, index: u8) -> Result<JobState, BrokerError> {
        let job = st.jobs.get(job_id).ok_or_else(|| BrokerError::UnknownJob(job_id.to_string()))?;
        if job.state != JobState::ProxyReady {
            return Err(BrokerError::WrongState {
                job: job_id.to_string(),
                state: job.state.name().to_string(),
                expected: "ProxyReady".into(),
            });
        }
        if index as usize >= VARIANT_COUNT {
            return Err(BrokerError::BadIndex(index));
        }
        self.advance(st, job_id, JobEvent::Select(index))?;
        self.advance(st, job_id, JobEvent::Enqueue)
    }

    fn process_online(&self, job_id: &str) {
        let (instr, scene, seed) = {
            let mut st = self.lock();
            if st.jobs.get(job_id).map(|j| &j.state) != Some(&JobState::Submitted) {
                return;
            }
            if self.advance(&mut st, job_id, JobEvent::Pickup).is_err() {
                return;
            }
            let ctx = &st.contexts[job_id];
            (ctx.instruction.clone(), ctx.scene.clone(), st.jobs[job_id].base_seed)
        };
        let outcome = requests::online_request(&instr, &scene, &self.assets, seed, self.config.preview_size)
            .and_then(|req| {
                generate_variants(self.backend.clone(), &req, &self.assets, self.config.online_timeout()).map_err(BrokerError::from)
            });
        let mut st = self.lock();
        if st.jobs.get(job_id).map(|j| &j.state) != Some(&JobState::ProxyRunning) {
            return;
        }
        let event = match outcome {
            Ok(set) => JobEvent::ProxyDone(set),
            Err(e) => JobEvent::ProxyFailed(e.to_string()),
        };
        let _ = self.advance(&mut st, job_id, event);
    }

    fn run_offline_once(&self) -> usize {
        let _serial = self.offline.lock().expect("offline lock");
        let queued: Vec<String> = {
            let st = self.lock();
            let mut q: Vec<&GenerationJob> = st.jobs.values().filter(|j| j.state == JobState::OfflineQueued).collect();
            q.sort_by_key(|j| j.seq);
            q.into_iter().map(|j| j.id.clone()).collect()
        };
        let mut processed = 0;
        for job_id in queued {
            let prepared = {
                let mut st = self.lock();
                if st.jobs[&job_id].state != JobState::OfflineQueued {
                    continue;
                }
                if self.advance(&mut st, &job_id, JobEvent::OfflineStart).is_err() {
                    continue;
                }
                let job = &st.jobs[&job_id];
                let ctx = &st.contexts[&job_id];
                let chosen = job
                    .variants
                    .as_ref()
                    .and_then(|set| set.variants.get(job.selected_variant.unwrap_or(0) as usize))
                    .cloned();
                chosen
                    .ok_or_else(|| BrokerError::Malformed("selected variant is missing".into()))
                    .and_then(|chosen| {
                        requests::offline_request(&ctx.instruction, &ctx.scene, job.offline_kind, &chosen).map(|req| (req, chosen))
                    })
            };
            let result: Result<GenerationResult, BrokerError> = prepared.and_then(|(req, chosen)| match req {
                None => Ok(chosen),
                Some(req) => dispatch_with_timeout(self.backend.clone(), &req, &self.assets, self.config.offline_timeout())
                    .map_err(BrokerError::from),
            });
            let mut st = self.lock();
            if st.jobs[&job_id].state != JobState::OfflineRunning {
                continue;
            }
            let event = match result {
                Ok(r) => JobEvent::OfflineDone(r),
                Err(e) => JobEvent::OfflineFailed(e.to_string()),
            };
            let _ = self.advance(&mut st, &job_id, event);
            processed += 1;
        }
        processed
    }
}
