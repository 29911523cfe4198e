use std::io::{BufRead, BufReader};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use splatwright::assets::AssetStore;
use splatwright::broker::{Broker, BrokerConfig, JobState};
use splatwright::demo::living_room;
use splatwright::events::EventBus;
use splatwright::genmod::MockBackend;
use splatwright::scene::{NoResults, Scene};
use splatwright_server::ServerHandle;

struct Client {
    agent: ureq::Agent,
    base: String,
}

struct Reply {
    status: u16,
    content_type: String,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

impl Client {
    fn new(base: String) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        Self { agent, base }
    }

    fn finish(resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Reply {
        let mut resp = resp.unwrap();
        let status = resp.status().as_u16();
        let content_type = resp
            .headers()
            .get("content-type")
            .map(|v| v.to_str().unwrap().to_string())
            .unwrap_or_default();
        let body = resp.body_mut().with_config().limit(64 << 20).read_to_vec().unwrap();
        Reply { status, content_type, body }
    }

    fn get(&self, path: &str) -> Reply {
        Self::finish(self.agent.get(format!("{}{path}", self.base)).call())
    }

    fn post(&self, path: &str, body: Value) -> Reply {
        Self::finish(
            self.agent
                .post(format!("{}{path}", self.base))
                .header("content-type", "application/json")
                .send(body.to_string()),
        )
    }

    fn post_raw(&self, path: &str, body: &str) -> Reply {
        Self::finish(
            self.agent
                .post(format!("{}{path}", self.base))
                .header("content-type", "application/json")
                .send(body),
        )
    }
}

fn start(backend: MockBackend, config: BrokerConfig) -> (ServerHandle, Arc<Broker>, Client) {
    let store = AssetStore::in_memory();
    let mut scene = Scene::new();
    for instr in living_room(&store, 0).unwrap() {
        scene.apply(&instr, &NoResults).unwrap();
    }
    let broker = Arc::new(Broker::new(scene, store, Arc::new(backend), config, Arc::new(EventBus::new())).unwrap());
    let server = ServerHandle::start(broker.clone(), "127.0.0.1:0".parse().unwrap()).unwrap();
    let client = Client::new(server.url());
    (server, broker, client)
}

fn default_server() -> (ServerHandle, Arc<Broker>, Client) {
    start(MockBackend::new(), BrokerConfig::default())
}

fn move_body(id: &str, x: f64) -> Value {
    json!({"type": "Move", "object_id": id, "transform": {"t": [x, 0, 0], "r": [1, 0, 0, 0], "s": 1}})
}

fn wait_job(broker: &Broker, job: &str, state: JobState) {
    assert!(broker.wait_until(Duration::from_secs(30), |jobs| jobs[job].state == state), "{:?}", broker.job(job));
}

#[test]
fn scene_is_canonical_json() {
    let (_server, broker, client) = default_server();
    let r = client.get("/scene");
    assert_eq!(r.status, 200);
    assert_eq!(r.content_type, "application/json");
    assert_eq!(String::from_utf8(r.body).unwrap(), broker.scene().to_canonical_json());
}

#[test]
fn move_is_applied_at_once() {
    let (_server, broker, client) = default_server();
    let r = client.post("/instructions", move_body("chair", 2.0));
    assert_eq!(r.status, 200);
    let v = r.json();
    assert_eq!(v["job_id"], Value::Null);
    assert_eq!(v["applied"], json!(true));
    let scene = client.get("/scene").json();
    let chair = scene["objects"].as_array().unwrap().iter().find(|o| o["id"] == "chair").unwrap();
    assert_eq!(chair["transform"]["t"], json!([2.0, 0.0, 0.0]));
    assert_eq!(broker.export_log().instructions.len(), 1);
}

#[test]
fn errors_carry_code_and_message() {
    let (_server, _broker, client) = default_server();
    let cases = [
        (client.post("/instructions", move_body("ghost", 0.0)), 404, "object_not_found"),
        (client.post("/instructions", json!({"type": "Move"})), 400, "malformed_instruction"),
        (client.post_raw("/instructions", "{not json"), 400, "bad_json"),
        (client.get("/jobs/job-9999"), 404, "unknown_job"),
        (client.get("/assets/ffff"), 404, "asset_not_found"),
        (client.get("/nowhere"), 404, "not_found"),
        (client.post("/snapshot", json!({"camera": {"position": [0, 0, 3]}, "prompt": ""})), 400, "empty_prompt"),
        (client.post("/jobs/job-0001/variant", json!({"index": 0})), 404, "unknown_job"),
    ];
    for (reply, status, code) in cases {
        assert_eq!(reply.status, status, "{code}");
        let v = reply.json();
        assert_eq!(v["code"], json!(code));
        assert!(!v["message"].as_str().unwrap().is_empty());
    }
}

#[test]
fn generate_select_and_finish_over_http() {
    let (_server, broker, client) = default_server();
    let v = client.post("/instructions", json!({"type": "GeneratePrompt", "prompt": "a floor lamp"})).json();
    let job = v["job_id"].as_str().unwrap().to_string();
    assert_eq!(client.get(&format!("/jobs/{job}")).json()["instruction_type"], json!("GeneratePrompt"));
    wait_job(&broker, &job, JobState::ProxyReady);

    let bad = client.post(&format!("/jobs/{job}/variant"), json!({"index": 3}));
    assert_eq!((bad.status, bad.json()["code"].clone()), (400, json!("bad_index")));
    let huge = client.post(&format!("/jobs/{job}/variant"), json!({"index": 100000}));
    assert_eq!(huge.status, 400);
    let picked = client.post(&format!("/jobs/{job}/variant"), json!({"index": 2})).json();
    assert_eq!(picked["state"]["state"], json!("OfflineQueued"));
    assert_eq!(picked["selected_variant"], json!(2));
    let again = client.post(&format!("/jobs/{job}/variant"), json!({"index": 1}));
    assert_eq!((again.status, again.json()["code"].clone()), (409, json!("wrong_state")));

    let preview = picked["variants"]["variants"][2]["assets"][0][1].as_str().unwrap().to_string();
    let img = client.get(&format!("/assets/{preview}"));
    assert_eq!(img.content_type, "image/x-portable-pixmap");
    assert!(img.body.starts_with(b"P6"));

    assert_eq!(client.post("/offline/run", json!({})).json(), json!({"processed": 1}));
    let done = client.get(&format!("/jobs/{job}")).json();
    assert_eq!(done["state"]["state"], json!("Completed"));
    let mesh = client.get(&format!("/assets/{}", done["final_asset"].as_str().unwrap()));
    assert_eq!(mesh.content_type, "model/obj");
    assert!(mesh.body.starts_with(b"v ") || String::from_utf8_lossy(&mesh.body).contains("\nv "));
    let jobs = client.get("/jobs").json();
    assert_eq!(jobs.as_array().unwrap().len(), 1);
}

#[test]
fn splat_assets_are_octet_streams() {
    let (_server, broker, client) = default_server();
    let scene = broker.scene();
    let sofa = scene.objects[0].kind.asset().unwrap();
    let r = client.get(&format!("/assets/{}", sofa.as_str()));
    assert_eq!(r.content_type, "application/octet-stream");
    assert!(r.body.starts_with(b"ply\n"));
}

#[test]
fn snapshot_creates_a_magic_camera_job() {
    let (_server, broker, client) = start(MockBackend::new(), BrokerConfig { auto_select: Some(0), ..BrokerConfig::default() });
    let body = json!({
        "camera": {"position": [0, 1.5, 4], "target": [0, 0.4, 0], "width": 48, "height": 32},
        "prompt": "realistic apartment living room",
    });
    let job = client.post("/snapshot", body).json()["job_id"].as_str().unwrap().to_string();
    wait_job(&broker, &job, JobState::OfflineQueued);
    assert_eq!(client.post("/offline/run", json!(null)).json()["processed"], json!(1));
    let j = client.get(&format!("/jobs/{job}")).json();
    assert_eq!(j["state"]["state"], json!("Completed"));
    let scene = client.get("/scene").json();
    assert_eq!(scene["snapshots"][0]["annotation"]["prompt"], json!("realistic apartment living room"));
    let bad_cam = client.post("/snapshot", json!({"camera": {"position": [0, 0, 0], "near": 2, "far": 1}, "prompt": "x"}));
    assert_eq!(bad_cam.status, 400);
}

/// Reads `data:` events from `/events` on a background thread.
fn event_reader(base: &str) -> mpsc::Receiver<Value> {
    let (tx, rx) = mpsc::channel();
    let (ready_tx, ready_rx) = mpsc::channel();
    let url = format!("{base}/events");
    thread::spawn(move || {
        let agent: ureq::Agent = ureq::Agent::config_builder().build().into();
        let resp = agent.get(&url).call().unwrap();
        assert_eq!(resp.headers()["content-type"], "text/event-stream");
        ready_tx.send(()).unwrap();
        let reader = BufReader::new(resp.into_body().into_reader());
        for line in reader.lines() {
            let Ok(line) = line else { break };
            if let Some(data) = line.strip_prefix("data:") {
                if tx.send(serde_json::from_str(data.trim()).unwrap()).is_err() {
                    break;
                }
            }
        }
    });
    ready_rx.recv_timeout(Duration::from_secs(10)).unwrap();
    rx
}

fn wait_subscribers(broker: &Broker, n: usize) {
    let start = Instant::now();
    while broker.events().subscriber_count() < n {
        assert!(start.elapsed() < Duration::from_secs(10));
        thread::sleep(Duration::from_millis(5));
    }
}

#[test]
fn events_stream_in_seq_order() {
    let (server, broker, client) = start(MockBackend::new(), BrokerConfig { auto_select: Some(0), ..BrokerConfig::default() });
    let a = event_reader(&server.url());
    let b = event_reader(&server.url());
    wait_subscribers(&broker, 2);

    client.post("/instructions", move_body("chair", 1.0));
    let job = client.post("/instructions", json!({"type": "GeneratePrompt", "prompt": "lamp"})).json()["job_id"]
        .as_str()
        .unwrap()
        .to_string();
    wait_job(&broker, &job, JobState::OfflineQueued);

    let mut seen = Vec::new();
    while let Ok(ev) = a.recv_timeout(Duration::from_secs(5)) {
        let done = ev["payload"]["to"] == json!("OfflineQueued");
        seen.push(ev);
        if done {
            break;
        }
    }
    let seqs: Vec<u64> = seen.iter().map(|e| e["seq"].as_u64().unwrap()).collect();
    assert!(seqs.windows(2).all(|w| w[1] == w[0] + 1), "{seqs:?}");
    assert_eq!(seen[0]["kind"], json!("SceneChanged"));
    assert_eq!(seen[0]["payload"]["reason"], json!("instruction"));
    assert_eq!(seen[1]["kind"], json!("JobStateChanged"));
    assert_eq!(seen[1]["payload"]["to"], json!("Submitted"));
    let kinds: Vec<&str> = seen.iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert!(kinds.contains(&"AssetAdded"));
    let transitions: Vec<&str> = seen
        .iter()
        .filter(|e| e["kind"] == "JobStateChanged")
        .map(|e| e["payload"]["to"].as_str().unwrap())
        .collect();
    assert_eq!(transitions, ["Submitted", "ProxyRunning", "ProxyReady", "VariantSelected", "OfflineQueued"]);

    let other: Vec<u64> = (0..seen.len()).map(|_| b.recv_timeout(Duration::from_secs(5)).unwrap()["seq"].as_u64().unwrap()).collect();
    assert_eq!(other, seqs);
}

#[test]
fn one_scene_event_per_mutation() {
    let (server, broker, client) = default_server();
    let rx = event_reader(&server.url());
    wait_subscribers(&broker, 1);
    for i in 0..5 {
        client.post("/instructions", move_body("table", i as f64));
    }
    client.post("/instructions", json!({"type": "Delete", "object_id": "sofa"}));
    let events: Vec<Value> = (0..6).map(|_| rx.recv_timeout(Duration::from_secs(5)).unwrap()).collect();
    assert!(events.iter().all(|e| e["kind"] == "SceneChanged"));
    assert!(rx.recv_timeout(Duration::from_millis(200)).is_err());
}

#[test]
fn endpoints_answer_while_offline_runs() {
    let (_server, broker, client) = start(
        MockBackend::new().with_latency(Duration::ZERO, Duration::from_millis(1500)),
        BrokerConfig { auto_select: Some(0), ..BrokerConfig::default() },
    );
    let job = client.post("/instructions", json!({"type": "GeneratePrompt", "prompt": "lamp"})).json()["job_id"]
        .as_str()
        .unwrap()
        .to_string();
    wait_job(&broker, &job, JobState::OfflineQueued);
    let base = client.base.clone();
    let runner = thread::spawn(move || Client::new(base).post("/offline/run", json!({})).json());
    wait_job(&broker, &job, JobState::OfflineRunning);
    let mut worst = Duration::ZERO;
    for i in 0..10 {
        let t = Instant::now();
        assert_eq!(client.get("/scene").status, 200);
        assert_eq!(client.get("/jobs").status, 200);
        assert_eq!(client.post("/instructions", move_body("chair", i as f64)).status, 200);
        worst = worst.max(t.elapsed());
    }
    assert!(broker.job(&job).unwrap().state == JobState::OfflineRunning, "offline finished too early to measure");
    assert!(worst < Duration::from_millis(150), "{worst:?}");
    assert_eq!(runner.join().unwrap()["processed"], json!(1));
}
