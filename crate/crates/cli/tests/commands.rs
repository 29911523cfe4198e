use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};
use splatwright::assets::AssetStore;
use splatwright::broker::{Broker, BrokerConfig, JobState};
use splatwright::demo::{ball_cloud, scripted_session};
use splatwright::events::EventBus;
use splatwright::genmod::MockBackend;
use splatwright::image::{decode_pgm16, RgbImage};
use splatwright::mesh::{tessellate, Shape};
use splatwright::scene::{EditLog, InstructionType, ObjectId, ObjectKind, Scene};
use splatwright::splat::write_ply;
use splatwright_server::ServerHandle;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_splatwright"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_camera(dir: &Path, w: u32, h: u32) -> PathBuf {
    let path = dir.join("cam.json");
    let cam = json!({"position": [0, 1.5, 4], "target": [0, 0.4, 0], "width": w, "height": h});
    std::fs::write(&path, cam.to_string()).unwrap();
    path
}

fn read_scene(path: &Path) -> Scene {
    Scene::deserialize(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn import_adds_splat_and_mesh_objects() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("s.json");
    let ply = dir.path().join("cat.ply");
    std::fs::write(&ply, write_ply(&ball_cloud(50, 0.3, [0.8, 0.6, 0.2], 4))).unwrap();
    let out = ok(&["import", s(&ply), "--scene", s(&scene), "--at", "0,0,0"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "obj-0000");
    let sc = read_scene(&scene);
    assert_eq!(sc.objects.len(), 1);
    assert!(matches!(sc.objects[0].kind, ObjectKind::Splat { .. }));
    assert_eq!(sc.objects[0].transform.translation.x, 0.0);
    let asset = sc.objects[0].kind.asset().unwrap();
    assert!(dir.path().join("assets").join(format!("{}.ply", asset.as_str())).exists());

    let obj = dir.path().join("box.obj");
    std::fs::write(&obj, tessellate(Shape::Cube).to_obj()).unwrap();
    let log = dir.path().join("edits.jsonl");
    ok(&["import", s(&obj), "--scene", s(&scene), "--id", "crate", "--log", s(&log)]);
    let sc = read_scene(&scene);
    let mesh = sc.object(&ObjectId::from("crate")).unwrap();
    assert!(matches!(mesh.kind, ObjectKind::Mesh { .. }));
    assert!((mesh.world_bounds().min.y).abs() < 1e-6, "ground snapped");
    let logged = EditLog::from_jsonl(&std::fs::read_to_string(&log).unwrap()).unwrap();
    assert_eq!(logged.instructions.len(), 1);
    assert_eq!(logged.instructions[0].seq, 1);

    let bad = dir.path().join("x.txt");
    std::fs::write(&bad, "hi").unwrap();
    assert_eq!(run(&["import", s(&bad), "--scene", s(&scene)]).status.code(), Some(2));
    assert_eq!(run(&["import", s(&ply), "--scene", s(&scene), "--at", "1,2"]).status.code(), Some(1));
}

#[test]
fn render_of_an_empty_scene_is_background() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("empty.json");
    std::fs::write(&scene, Scene::new().serialize()).unwrap();
    let cam = write_camera(dir.path(), 20, 10);
    let ppm = dir.path().join("img.ppm");
    let pgm = dir.path().join("d.pgm");
    ok(&["render", "--scene", s(&scene), "--camera", s(&cam), "--out", s(&ppm), "--depth", s(&pgm)]);
    let img = RgbImage::from_ppm(&std::fs::read(&ppm).unwrap()).unwrap();
    assert_eq!((img.width, img.height), (20, 10));
    assert!(img.data.iter().all(|&b| b == 0));
    let (w, h, codes) = decode_pgm16(&std::fs::read(&pgm).unwrap()).unwrap();
    assert_eq!((w, h), (20, 10));
    assert!(codes.iter().all(|&c| c == 65535));
}

fn write_session(dir: &Path) -> (PathBuf, PathBuf) {
    let assets = dir.join("assets");
    let store = AssetStore::open(&assets).unwrap();
    let log = dir.join("edits.jsonl");
    std::fs::write(&log, EditLog::new(scripted_session(&store).unwrap()).to_jsonl()).unwrap();
    (log, assets)
}

#[test]
fn replay_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (log, assets) = write_session(dir.path());
    let outs: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let out = dir.path().join(format!("final{i}.json"));
            let jobs = dir.path().join(format!("jobs{i}.jsonl"));
            let args = [
                "replay", "--log", s(&log), "--assets", s(&assets), "--backend", "mock", "--auto-select", "0", "--seed", "7",
                "--out", s(&out), "--job-log", s(&jobs),
            ];
            ok(&args);
            assert!(!std::fs::read_to_string(&jobs).unwrap().is_empty());
            std::fs::read(&out).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);

    let scene = Scene::deserialize(&outs[0]).unwrap();
    assert!(scene.objects.iter().all(|o| !o.kind.is_proxy()), "proxy left after offline run");
    let session = EditLog::from_jsonl(&std::fs::read_to_string(&log).unwrap()).unwrap();
    for obj in &scene.objects {
        let last_move = session
            .instructions
            .iter()
            .rfind(|i| i.kind == InstructionType::Move && i.object_id.as_ref() == Some(&obj.id));
        if let Some(m) = last_move {
            assert_eq!(Some(obj.transform), m.transform, "{}", obj.id);
        }
    }
    assert_eq!(scene.snapshots.len(), 2);
    assert!(scene.snapshots.iter().all(|s| s.annotation.preview_asset.is_some()));
}

#[test]
fn snapshot_writes_the_stylized_image() {
    let dir = tempfile::tempdir().unwrap();
    let (log, assets) = write_session(dir.path());
    let scene = dir.path().join("room.json");
    ok(&["replay", "--log", s(&log), "--assets", s(&assets), "--out", s(&scene)]);
    let cam = write_camera(dir.path(), 40, 30);
    let out = dir.path().join("styled.ppm");
    let raw = dir.path().join("raw.ppm");
    let depth = dir.path().join("raw.pgm");
    let args = [
        "snapshot", "--scene", s(&scene), "--assets", s(&assets), "--camera", s(&cam), "--prompt",
        "realistic apartment living room", "--out", s(&out), "--raw", s(&raw), "--depth", s(&depth),
    ];
    let printed = ok(&args);
    let styled = RgbImage::from_ppm(&std::fs::read(&out).unwrap()).unwrap();
    let plain = RgbImage::from_ppm(&std::fs::read(&raw).unwrap()).unwrap();
    assert_eq!((styled.width, styled.height), (40, 30));
    assert_ne!(styled, plain);
    let id = String::from_utf8(printed.stdout).unwrap().trim().to_string();
    assert!(assets.join(format!("{id}.ppm")).exists());
    assert_eq!(run(&["snapshot", "--scene", s(&scene), "--camera", s(&cam), "--prompt", "", "--out", s(&out)]).status.code(), Some(2));
}

#[test]
fn offline_runs_a_remote_queue() {
    let config = BrokerConfig { auto_select: Some(0), ..BrokerConfig::default() };
    let broker = Arc::new(
        Broker::new(Scene::new(), AssetStore::in_memory(), Arc::new(MockBackend::new()), config, Arc::new(EventBus::new())).unwrap(),
    );
    let server = ServerHandle::start(broker.clone(), "127.0.0.1:0".parse().unwrap()).unwrap();
    let job = broker.submit_json(json!({"type": "GeneratePrompt", "prompt": "lamp"})).unwrap().job_id.unwrap();
    assert!(broker.wait_until(Duration::from_secs(30), |jobs| jobs[&job].state == JobState::OfflineQueued));
    let out = ok(&["offline", "--url", &server.url()]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v, json!({"processed": 1}));
    assert_eq!(broker.job(&job).unwrap().state, JobState::Completed);
    assert_eq!(run(&["offline", "--url", "http://127.0.0.1:1"]).status.code(), Some(2));
}

#[test]
fn serve_answers_and_saves_on_interrupt() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("live.json");
    let log = dir.path().join("live.jsonl");
    let mut child = bin()
        .args(["serve", "--port", "0", "--scene", s(&scene), "--log-out", s(&log)])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let first = lines.next().unwrap().unwrap();
    let url = first.strip_prefix("listening on ").unwrap().to_string();
    let agent: ureq::Agent = ureq::Agent::config_builder().build().into();
    let body = json!({"type": "GeneratePrompt", "prompt": "a floor lamp"}).to_string();
    let mut resp = agent.post(format!("{url}/instructions")).header("content-type", "application/json").send(body).unwrap();
    let v: Value = serde_json::from_str(&resp.body_mut().read_to_string().unwrap()).unwrap();
    assert!(v["job_id"].is_string());
    let mut resp = agent.get(format!("{url}/scene")).call().unwrap();
    let live: Value = serde_json::from_str(&resp.body_mut().read_to_string().unwrap()).unwrap();
    assert_eq!(live["objects"].as_array().unwrap().len(), 1);

    let status = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(status.success());
    assert!(child.wait().unwrap().success());
    let saved = read_scene(&scene);
    assert_eq!(saved.objects.len(), 1);
    assert_eq!(saved.objects[0].annotation.as_ref().unwrap().prompt, "a floor lamp");
    assert_eq!(EditLog::from_jsonl(&std::fs::read_to_string(&log).unwrap()).unwrap().instructions.len(), 1);
}

#[test]
fn usage_errors_exit_with_one() {
    let out = run(&["replay", "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage: splatwright replay"));
    assert_eq!(run(&["render", "--camera", "c.json", "--out", "o.ppm", "--backend", "quantum"]).status.code(), Some(1));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}
