//! Headless entry points: serve, import, render, replay, offline and the
//! one-shot Magic Camera `snapshot`.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime errors.

pub mod config;

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use splatwright::assets::{AssetId, AssetStore};
use splatwright::broker::{Broker, BrokerConfig, JobState};
use splatwright::events::EventBus;
use splatwright::mesh::TriMesh;
use splatwright::render::{compose_snapshot, Camera};
use splatwright::scene::{EditInstruction, EditLog, InstructionType, JobOutcome, ObjectKindTag, ResultResolver, Scene};
use splatwright::splat::{parse_ply, Aabb, TransformTRS, Vec3};

pub use config::{BackendConfig, CliConfig};

#[derive(Debug, Parser)]
#[command(name = "splatwright", version, about = "Radiance-field scene editing with latency-hiding proxies")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Scene file (canonical JSON).
    #[arg(long, global = true)]
    pub scene: Option<PathBuf>,
    /// Asset directory; defaults to `assets/` next to the scene.
    #[arg(long, global = true)]
    pub assets: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendFlag>,
    /// Base URL of the module server when `--backend http`.
    #[arg(long, global = true)]
    pub backend_url: Option<String>,
    /// Variant chosen automatically once proxies are ready.
    #[arg(long, global = true)]
    pub auto_select: Option<u8>,
    /// Base seed for every job in this run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendFlag {
    Mock,
    Http,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve the HTTP and event-stream API.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Write the edit log here on shutdown.
        #[arg(long)]
        log_out: Option<PathBuf>,
    },
    /// Add a PLY splat cloud or OBJ mesh to the scene.
    Import {
        file: PathBuf,
        /// Placement `x,y,z`; omitted means resting on the ground at the origin.
        #[arg(long, value_parser = parse_vec3)]
        at: Option<Vec3>,
        #[arg(long)]
        id: Option<String>,
        /// Append the AddAsset instruction to this log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Render a color PPM and optional depth PGM of the scene.
    Render {
        #[arg(long)]
        camera: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        depth: Option<PathBuf>,
    },
    /// Replay an edit log headlessly and write the final scene.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write the job event log (JSON lines) here.
        #[arg(long)]
        job_log: Option<PathBuf>,
    },
    /// Run the offline queue of a running server.
    Offline {
        /// Server URL; defaults to the configured local port.
        #[arg(long)]
        url: Option<String>,
    },
    /// Magic Camera one-shot: stylize a view of the scene.
    Snapshot {
        #[arg(long)]
        camera: PathBuf,
        #[arg(long)]
        prompt: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write the unstylized render.
        #[arg(long)]
        raw: Option<PathBuf>,
        #[arg(long)]
        depth: Option<PathBuf>,
    },
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let parts: Vec<f32> = s
        .split(',')
        .map(|p| p.trim().parse::<f32>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x, y, z] if parts.iter().all(|v| v.is_finite()) => Ok(Vec3::new(x, y, z)),
        _ => Err(format!("expected x,y,z, got {s:?}")),
    }
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

/// Effective configuration after applying flags over the config file.
pub fn resolve_config(common: &Common) -> Result<CliConfig> {
    let mut cfg = match &common.config {
        Some(path) => CliConfig::load(path)?,
        None => CliConfig::default(),
    };
    if let Some(scene) = &common.scene {
        cfg.scene_path = Some(scene.clone());
    }
    if let Some(dir) = &common.assets {
        cfg.asset_dir = Some(dir.clone());
    }
    match (common.backend, &common.backend_url) {
        (Some(BackendFlag::Mock), _) => cfg.backend = BackendConfig::Mock,
        (Some(BackendFlag::Http), Some(url)) | (None, Some(url)) => cfg.backend = BackendConfig::Http { base_url: url.clone() },
        (Some(BackendFlag::Http), None) => {
            if !matches!(cfg.backend, BackendConfig::Http { .. }) {
                bail!("--backend http needs --backend-url or a configured base_url");
            }
        }
        (None, None) => {}
    }
    if let Some(i) = common.auto_select {
        cfg.broker.auto_select = Some(i);
    }
    if let Some(seed) = common.seed {
        cfg.broker.base_seed = seed;
    }
    cfg.broker.validate().map_err(|e| anyhow!(e))?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    let mut cfg = resolve_config(&cli.common)?;
    match cli.command {
        Command::Serve { port, host, log_out } => {
            if let Some(p) = port {
                cfg.port = p;
            }
            serve(&cfg, &host, log_out.as_deref())
        }
        Command::Import { file, at, id, log } => import(&cfg, &file, at, id, log.as_deref()),
        Command::Render { camera, out, depth } => render(&cfg, &camera, &out, depth.as_deref()),
        Command::Replay { log, out, job_log } => {
            cfg.broker.auto_select = cfg.broker.auto_select.or(Some(0));
            replay(&cfg, &log, &out, job_log.as_deref())
        }
        Command::Offline { url } => offline(url.unwrap_or_else(|| format!("http://127.0.0.1:{}", cfg.port))),
        Command::Snapshot {
            camera,
            prompt,
            out,
            raw,
            depth,
        } => {
            cfg.broker.auto_select = cfg.broker.auto_select.or(Some(0));
            snapshot(&cfg, &camera, &prompt, &out, raw.as_deref(), depth.as_deref())
        }
    }
}

fn scene_path(cfg: &CliConfig) -> Result<&Path> {
    cfg.scene_path.as_deref().ok_or_else(|| anyhow!("--scene is required"))
}

/// Loads the configured scene; a missing file is an empty scene.
pub fn load_scene(cfg: &CliConfig) -> Result<Scene> {
    let Some(path) = cfg.scene_path.as_deref() else {
        return Ok(Scene::new());
    };
    if !path.exists() {
        return Ok(Scene::new());
    }
    let bytes = std::fs::read(path).with_context(|| format!("reading scene {}", path.display()))?;
    Scene::deserialize(&bytes).with_context(|| format!("parsing scene {}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn open_store(cfg: &CliConfig) -> Result<AssetStore> {
    let dir = cfg.asset_dir();
    AssetStore::open(&dir).with_context(|| format!("opening asset directory {}", dir.display()))
}

fn load_camera(path: &Path) -> Result<Camera> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading camera {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing camera {}", path.display()))
}

/// Bounds lookups against the store; no jobs.
struct StoreBounds<'a>(&'a AssetStore);

impl ResultResolver for StoreBounds<'_> {
    fn outcome(&self, _: &str) -> Option<JobOutcome> {
        None
    }

    fn asset_bounds(&self, asset: &AssetId) -> Option<Aabb> {
        self.0.bounds(asset)
    }
}

fn broker_for(cfg: &CliConfig, scene: Scene, store: AssetStore, broker: &BrokerConfig) -> Result<Broker> {
    Broker::new(scene, store, cfg.backend.build(broker), broker.clone(), Arc::new(EventBus::new())).map_err(|e| anyhow!(e))
}

fn serve(cfg: &CliConfig, host: &str, log_out: Option<&Path>) -> Result<()> {
    let store = open_store(cfg)?;
    let scene = load_scene(cfg)?;
    let broker = Arc::new(broker_for(cfg, scene, store, &cfg.broker)?);
    let addr: SocketAddr = format!("{host}:{}", cfg.port).parse().context("bad host or port")?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let served = broker.clone();
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        tokio::select! {
            r = splatwright_server::serve(listener, served) => r.context("server failed"),
            r = tokio::signal::ctrl_c() => r.context("waiting for ctrl-c"),
        }
    })?;
    rt.shutdown_timeout(Duration::from_secs(1));
    if let Some(path) = cfg.scene_path.as_deref() {
        write_file(path, &broker.scene().serialize())?;
        eprintln!("saved scene to {}", path.display());
    }
    if let Some(path) = log_out {
        write_file(path, broker.export_log().to_jsonl().as_bytes())?;
    }
    Ok(())
}

fn import(cfg: &CliConfig, file: &Path, at: Option<Vec3>, id: Option<String>, log: Option<&Path>) -> Result<()> {
    let path = scene_path(cfg)?;
    let store = open_store(cfg)?;
    let mut scene = load_scene(cfg)?;
    let bytes = std::fs::read(file).with_context(|| format!("reading {}", file.display()))?;
    let ext = file.extension().and_then(|e| e.to_str()).unwrap_or_default().to_ascii_lowercase();
    let (tag, asset) = match ext.as_str() {
        "ply" => {
            let cloud = parse_ply(&bytes).with_context(|| format!("parsing {}", file.display()))?;
            (ObjectKindTag::Splat, store.put_cloud(&cloud)?)
        }
        "obj" => {
            let text = String::from_utf8(bytes).context("OBJ is not UTF-8")?;
            let mesh = TriMesh::from_obj(&text).with_context(|| format!("parsing {}", file.display()))?;
            (ObjectKindTag::Mesh, store.put_mesh(&mesh)?)
        }
        other => bail!("unsupported file type {other:?}; expected .ply or .obj"),
    };
    let seq = scene.next_seq;
    let mut instr = EditInstruction::new(format!("import-{seq}-{}", asset.as_str()), seq, InstructionType::AddAsset)
        .with_object_type(tag)
        .with_param("asset", json!(asset));
    if let Some(id) = id {
        instr = instr.with_object(id);
    }
    if let Some(at) = at {
        instr = instr.with_transform(TransformTRS::from_translation(at));
    }
    let object = scene.apply(&instr, &StoreBounds(&store))?.expect("AddAsset creates an object");
    write_file(path, &scene.serialize())?;
    if let Some(log_path) = log {
        let mut text = if log_path.exists() { std::fs::read_to_string(log_path)? } else { String::new() };
        text.push_str(&EditLog::new(vec![instr]).to_jsonl());
        write_file(log_path, text.as_bytes())?;
    }
    println!("{object}");
    Ok(())
}

fn render(cfg: &CliConfig, camera: &Path, out: &Path, depth: Option<&Path>) -> Result<()> {
    scene_path(cfg)?;
    let store = open_store(cfg)?;
    let scene = load_scene(cfg)?;
    let cam = load_camera(camera)?;
    let target = compose_snapshot(&scene, &cam, &store)?;
    write_file(out, &target.color.to_ppm())?;
    if let Some(depth) = depth {
        write_file(depth, &target.depth.to_pgm(cam.near, cam.far))?;
    }
    Ok(())
}

/// Submits every instruction of `log` in order, letting each job finish its
/// online phase before the next instruction so that scene-dependent renders
/// are reproducible, then runs the offline queue.
pub fn replay_with_broker(broker: &Broker, log: &EditLog) -> Result<()> {
    let wait = Duration::from_secs_f64(broker.config().online_timeout_s * 4.0 + 10.0);
    for instr in &log.instructions {
        let out = broker
            .submit_instruction(instr.clone())
            .with_context(|| format!("instruction {} (seq {})", instr.id, instr.seq))?;
        if let Some(job) = out.job_id {
            let settled = broker.wait_until(wait, |jobs| {
                let s = &jobs[&job].state;
                !s.is_online() && (*s != JobState::ProxyReady || broker_auto_off(broker))
            });
            if !settled {
                bail!("job {job} did not finish its online phase");
            }
        }
    }
    broker.run_offline_once();
    Ok(())
}

fn broker_auto_off(broker: &Broker) -> bool {
    broker.config().auto_select.is_none()
}

fn replay(cfg: &CliConfig, log_path: &Path, out: &Path, job_log: Option<&Path>) -> Result<()> {
    let store = open_store(cfg)?;
    let scene = load_scene(cfg)?;
    let text = std::fs::read_to_string(log_path).with_context(|| format!("reading log {}", log_path.display()))?;
    let log = EditLog::from_jsonl(&text)?;
    let broker = broker_for(cfg, scene, store, &cfg.broker)?;
    replay_with_broker(&broker, &log)?;
    write_file(out, &broker.scene().serialize())?;
    if let Some(path) = job_log {
        write_file(path, broker.job_events_jsonl().as_bytes())?;
    }
    let jobs = broker.jobs();
    let completed = jobs.iter().filter(|j| j.state == JobState::Completed).count();
    let failed: Vec<_> = jobs.iter().filter(|j| matches!(j.state, JobState::Failed { .. })).collect();
    for j in &failed {
        eprintln!("job {} failed: {}", j.id, j.error.as_deref().unwrap_or("unknown"));
    }
    eprintln!(
        "replayed {} instructions; {} jobs, {completed} completed, {} failed",
        log.instructions.len(),
        jobs.len(),
        failed.len()
    );
    Ok(())
}

fn offline(url: String) -> Result<()> {
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let endpoint = format!("{}/offline/run", url.trim_end_matches('/'));
    let mut resp = agent
        .post(&endpoint)
        .header("content-type", "application/json")
        .send("{}")
        .with_context(|| format!("POST {endpoint}"))?;
    let status = resp.status().as_u16();
    let body = resp.body_mut().read_to_string()?;
    if !(200..300).contains(&status) {
        bail!("server answered {status}: {body}");
    }
    println!("{body}");
    Ok(())
}

fn snapshot(cfg: &CliConfig, camera: &Path, prompt: &str, out: &Path, raw: Option<&Path>, depth: Option<&Path>) -> Result<()> {
    let store = open_store(cfg)?;
    let scene = load_scene(cfg)?;
    let cam = load_camera(camera)?;
    if raw.is_some() || depth.is_some() {
        let target = compose_snapshot(&scene, &cam, &store)?;
        if let Some(raw) = raw {
            write_file(raw, &target.color.to_ppm())?;
        }
        if let Some(depth) = depth {
            write_file(depth, &target.depth.to_pgm(cam.near, cam.far))?;
        }
    }
    let broker = broker_for(cfg, scene, store.clone(), &cfg.broker)?;
    let job = broker.magic_camera_snapshot(&cam, prompt)?;
    let wait = Duration::from_secs_f64(cfg.broker.online_timeout_s * 4.0 + 10.0);
    if !broker.wait_until(wait, |jobs| !jobs[&job].state.is_online() && jobs[&job].state != JobState::ProxyReady) {
        bail!("stylization did not finish");
    }
    broker.run_offline_once();
    let j = broker.job(&job).expect("job exists");
    match (&j.state, &j.final_asset) {
        (JobState::Completed, Some(asset)) => {
            write_file(out, &store.get(asset)?.bytes)?;
            println!("{}", asset.as_str());
            Ok(())
        }
        (state, _) => bail!("magic camera job ended {state}: {}", j.error.unwrap_or_default()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(args).unwrap()
    }

    #[test]
    fn vec3_flag() {
        assert_eq!(parse_vec3("1, 2.5,-3").unwrap(), Vec3::new(1.0, 2.5, -3.0));
        assert!(parse_vec3("1,2").is_err());
        assert!(parse_vec3("a,b,c").is_err());
    }

    #[test]
    fn flags_override_config() {
        let dir = std::env::temp_dir().join(format!("splatwright-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let cfg_path = dir.join("c.json");
        std::fs::write(&cfg_path, r#"{"broker":{"base_seed":3,"auto_select":2},"port":9000}"#).unwrap();
        let cli = parse(&["splatwright", "replay", "--log", "l", "--out", "o", "--config", cfg_path.to_str().unwrap(), "--seed", "7"]);
        let cfg = resolve_config(&cli.common).unwrap();
        assert_eq!(cfg.broker.base_seed, 7);
        assert_eq!(cfg.broker.auto_select, Some(2));
        assert_eq!(cfg.port, 9000);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn http_backend_needs_a_url() {
        let cli = parse(&["splatwright", "offline", "--backend", "http"]);
        assert!(resolve_config(&cli.common).is_err());
        let cli = parse(&["splatwright", "offline", "--backend", "http", "--backend-url", "http://m"]);
        assert_eq!(
            resolve_config(&cli.common).unwrap().backend,
            BackendConfig::Http { base_url: "http://m".into() }
        );
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["splatwright", "frobnicate"]), 1);
        assert_eq!(run(["splatwright", "render"]), 1);
        assert_eq!(run(["splatwright", "--help"]), 0);
        assert_eq!(run(["splatwright", "render", "--camera", "/nonexistent/c.json", "--out", "x.ppm"]), 2);
    }
}
