use std::path::PathBuf;

use reqwest::StatusCode;
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use announce_core::{
    save_policy, scenario_trace, solve_point_based, solve_qmdp, Action, Belief, Model, Observation, PointBasedOptions,
    ProblemConfig, Tracker,
};
use announce_service::{serve, Recommendation, ServeOptions, SessionView};

struct Server {
    base: String,
    client: reqwest::Client,
    stop: Option<oneshot::Sender<()>>,
    task: Option<tokio::task::JoinHandle<std::io::Result<()>>>,
}

impl Server {
    async fn start(options: ServeOptions) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = oneshot::channel::<()>();
        let task = tokio::spawn(serve(listener, options, async {
            let _ = rx.await;
        }));
        Self {
            base,
            client: reqwest::Client::new(),
            stop: Some(tx),
            task: Some(task),
        }
    }

    async fn stop(mut self) {
        self.stop.take().unwrap().send(()).unwrap();
        self.task.take().unwrap().await.unwrap().unwrap();
    }

    async fn post(&self, path: &str, body: Value) -> (StatusCode, Value) {
        let r = self.client.post(format!("{}{path}", self.base)).json(&body).send().await.unwrap();
        let status = r.status();
        (status, r.json().await.unwrap())
    }

    async fn get(&self, path: &str) -> (StatusCode, Value) {
        let r = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        let status = r.status();
        let text = r.text().await.unwrap();
        (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }

    async fn create(&self, body: Value) -> String {
        let (status, v) = self.post("/sessions", body).await;
        assert_eq!(status, StatusCode::CREATED, "{v}");
        v["id"].as_str().unwrap().to_string()
    }

    async fn observe(&self, id: &str, estimate: u32, completed: bool) -> Recommendation {
        let (status, v) = self
            .post(&format!("/sessions/{id}/observe"), json!({"estimate": estimate, "completed": completed}))
            .await;
        assert_eq!(status, StatusCode::OK, "{v}");
        serde_json::from_value(v).unwrap()
    }

    async fn announce(&self, id: &str, week: u32) -> SessionView {
        let (status, v) = self.post(&format!("/sessions/{id}/announce"), json!({"announce": week})).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        serde_json::from_value(v).unwrap()
    }

    async fn view(&self, id: &str) -> SessionView {
        let (status, v) = self.get(&format!("/sessions/{id}")).await;
        assert_eq!(status, StatusCode::OK);
        serde_json::from_value(v).unwrap()
    }
}

#[tokio::test]
async fn health_and_empty_policy_listing() {
    let server = Server::start(ServeOptions::default()).await;
    let (status, body) = server.get("/healthz").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, Value::String("ok".into()));
    let (status, body) = server.get("/policies").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!([]));
    server.stop().await;
}

#[tokio::test]
async fn new_session_starts_uniform() {
    let server = Server::start(ServeOptions::default()).await;
    let id = server.create(json!({"config_name": "small", "policy": "qmdp"})).await;
    let view = server.view(&id).await;
    assert_eq!(view.clock, 0);
    assert_eq!(serde_json::to_value(view.status).unwrap(), json!("active"));
    assert_eq!(serde_json::to_value(view.phase).unwrap(), json!("awaiting_observation"));
    assert_eq!(view.belief.len(), 12);
    assert!(view.belief.iter().all(|e| (e.probability - 1.0 / 12.0).abs() < 1e-12));
    // the on-demand solve is now listed
    let (_, listed) = server.get("/policies").await;
    assert_eq!(listed[0]["policy"], "qmdp");
    assert_eq!(listed[0]["source"], "on_demand");
    server.stop().await;
}

#[tokio::test]
async fn request_errors_carry_codes() {
    let server = Server::start(ServeOptions::default()).await;
    let (status, v) = server.post("/sessions", json!({"config_name": "small", "policy": "magic"})).await;
    assert_eq!((status, v["error"].as_str().unwrap()), (StatusCode::BAD_REQUEST, "UnknownPolicy"));

    let (status, v) = server.post("/sessions", json!({"config_name": "extra-large", "policy": "qmdp"})).await;
    assert_eq!((status, v["error"].as_str().unwrap()), (StatusCode::UNPROCESSABLE_ENTITY, "SolveUnavailable"));
    assert!(v["message"].as_str().unwrap().contains("--policies-dir"));

    let (status, v) = server.post("/sessions", json!({"config_name": "small", "policy": "sarsop"})).await;
    assert_eq!(v["error"], "SolveUnavailable", "{status}");

    let (status, v) = server.post("/sessions", json!({"policy": "qmdp"})).await;
    assert_eq!((status, v["error"].as_str().unwrap()), (StatusCode::BAD_REQUEST, "InvalidRequest"));

    let missing = uuid::Uuid::nil();
    let (status, v) = server.get(&format!("/sessions/{missing}")).await;
    assert_eq!((status, v["error"].as_str().unwrap()), (StatusCode::NOT_FOUND, "SessionNotFound"));

    let id = server.create(json!({"config_name": "small", "policy": "mostlikely"})).await;
    let (status, v) = server.post(&format!("/sessions/{id}/announce"), json!({"announce": 5})).await;
    assert_eq!((status, v["error"].as_str().unwrap()), (StatusCode::CONFLICT, "WrongPhase"));

    let (status, v) = server.post(&format!("/sessions/{id}/observe"), json!({"estimate": 14})).await;
    assert_eq!((status, v["error"].as_str().unwrap()), (StatusCode::UNPROCESSABLE_ENTITY, "OutOfRange"));
    let (status, v) = server.post(&format!("/sessions/{id}/observe"), json!({"estimate": 1})).await;
    assert_eq!(v["error"], "OutOfRange", "{status}");

    server.observe(&id, 5, false).await;
    let (status, v) = server.post(&format!("/sessions/{id}/observe"), json!({"estimate": 5})).await;
    assert_eq!((status, v["error"].as_str().unwrap()), (StatusCode::CONFLICT, "WrongPhase"));
    server.stop().await;
}

#[tokio::test]
async fn replaying_a_scenario_reproduces_its_recommendations() {
    let cfg = ProblemConfig::preset("small").unwrap();
    let (policy, _) = solve_qmdp::<f64>(&cfg, 1e-6, 10_000).unwrap();
    let server = Server::start(ServeOptions::default()).await;
    for seed in 0..10 {
        let trace = scenario_trace(&cfg, &policy, 9, seed).unwrap();
        let id = server.create(json!({"config_name": "small", "policy": "qmdp"})).await;
        for (step, snap) in trace.record.steps.iter().zip(&trace.beliefs) {
            let completed = step.t >= step.true_completion;
            let rec = server.observe(&id, step.observation, completed).await;
            assert_eq!(rec.recommended, step.action, "seed {seed} week {}", step.t);
            assert_eq!(rec.belief_mode, snap.mode);
            for (a, b) in rec.belief.iter().zip(&snap.belief) {
                assert_eq!(a.completion, b.completion);
                assert!((a.probability - b.probability).abs() < 1e-12);
            }
            let view = server.announce(&id, rec.recommended).await;
            assert_eq!(view.history.len(), step.t as usize + 1);
        }
        let view = server.view(&id).await;
        assert_eq!(serde_json::to_value(view.status).unwrap(), json!("completed"));
        let (status, v) = server.post(&format!("/sessions/{id}/observe"), json!({"estimate": 9})).await;
        assert_eq!((status, v["error"].as_str().unwrap()), (StatusCode::CONFLICT, "SessionCompleted"));
    }
    server.stop().await;
}

#[tokio::test]
async fn overridden_announcements_drive_the_filter() {
    let cfg = ProblemConfig::preset("small").unwrap();
    let model = Model::<f64>::new(cfg.clone()).unwrap();
    let server = Server::start(ServeOptions::default()).await;
    let id = server.create(json!({"config_name": "small", "policy": "qmdp"})).await;

    let mut tracker = Tracker::new(&model);
    let script = [(6, 6), (7, 6), (8, 11), (9, 9)];
    for (estimate, announce) in script {
        let rec = server.observe(&id, estimate, false).await;
        tracker.observe(&model, Observation { estimate }, false).unwrap();
        for (a, b) in rec.belief.iter().zip(tracker.belief().mass()) {
            assert!((a.probability - b).abs() < 1e-12);
        }
        let view = server.announce(&id, announce).await;
        tracker.announce(&model, Action { announce }).unwrap();
        assert_eq!(view.clock, tracker.clock());
        assert_eq!(view.observable.prev_announce, announce);
        assert_eq!(view.history.last().unwrap().announce, Some(announce));
    }

    // a change at week 2 spreads mass later than keeping the announcement would
    let x = announce_core::ObservableState::new(2, 6);
    let b = Belief::point(&cfg, x, 9);
    let kept = b.predict(&model, Action { announce: 6 });
    let moved = b.predict(&model, Action { announce: 11 });
    assert_eq!(kept.prob(9), 1.0);
    assert!(moved.prob(10) > 0.0 && moved.prob(12) > 0.0);
    server.stop().await;
}

#[tokio::test]
async fn point_mass_at_completion_recommends_it() {
    let server = Server::start(ServeOptions::default()).await;
    let config = ProblemConfig::with_horizon(2, 24);
    let id = server.create(json!({"config": config, "policy": "qmdp"})).await;
    for _ in 0..22 {
        server.observe(&id, 22, false).await;
        server.announce(&id, 22).await;
    }
    let rec = server.observe(&id, 22, true).await;
    assert_eq!(rec.belief_mode, 22);
    assert!((rec.belief.iter().find(|e| e.completion == 22).unwrap().probability - 1.0).abs() < 1e-12);
    assert_eq!(rec.recommended, 22);
    let keep = rec.candidates.iter().find(|c| c.keep_previous).unwrap();
    assert_eq!(keep.announce, 22);
    assert_eq!(rec.candidates.len(), 5);
    server.stop().await;
}

#[tokio::test]
async fn candidates_include_keep_previous_and_values() {
    let server = Server::start(ServeOptions::default()).await;
    let id = server.create(json!({"config_name": "small", "policy": "qmdp"})).await;
    server.observe(&id, 4, false).await;
    server.announce(&id, 4).await;
    let rec = server.observe(&id, 12, false).await;
    assert!(rec.candidates.iter().filter(|c| !c.keep_previous).count() >= 5);
    let keep: Vec<_> = rec.candidates.iter().filter(|c| c.keep_previous).collect();
    assert_eq!(keep.len(), 1);
    assert_eq!(keep[0].announce, 4);
    assert!(rec.candidates.iter().all(|c| c.expected_value.is_some_and(|v| v <= 0.0)));
    let best = rec
        .candidates
        .iter()
        .max_by(|a, b| a.expected_value.unwrap().total_cmp(&b.expected_value.unwrap()))
        .unwrap();
    if best.announce != rec.recommended {
        // the recommendation is outside the listed window only if no listed
        // action beats it
        assert!(!rec.candidates.iter().any(|c| c.announce == rec.recommended));
    }

    let id = server.create(json!({"config_name": "small", "policy": "observedtime"})).await;
    let rec = server.observe(&id, 7, false).await;
    assert_eq!(rec.recommended, 7);
    assert!(rec.candidates.iter().all(|c| c.expected_value.is_none()));
    server.stop().await;
}

#[tokio::test]
async fn sessions_are_isolated() {
    let server = Server::start(ServeOptions::default()).await;
    let a = server.create(json!({"config_name": "small", "policy": "mostlikely"})).await;
    let b = server.create(json!({"config_name": "small", "policy": "mostlikely"})).await;
    let before = server.view(&b).await;
    server.observe(&a, 10, false).await;
    server.announce(&a, 10).await;
    assert_eq!(server.view(&b).await, before);
    assert_eq!(server.view(&a).await.clock, 1);
    server.stop().await;
}

fn write_policies(dir: &std::path::Path) -> ProblemConfig {
    let small = ProblemConfig::preset("small").unwrap();
    let (q, _) = solve_qmdp::<f64>(&small, 1e-6, 10_000).unwrap();
    save_policy(&q, dir.join("small-qmdp.json")).unwrap();

    let tiny = ProblemConfig::with_horizon(2, 6);
    std::fs::write(dir.join("tiny.json"), serde_json::to_string(&tiny).unwrap()).unwrap();
    let options = PointBasedOptions {
        max_trials: Some(20),
        ..Default::default()
    };
    let (pb, _) = solve_point_based::<f64>(&tiny, &options).unwrap();
    save_policy(&pb, dir.join("tiny-sarsop.json")).unwrap();

    // solved for a config the service cannot resolve
    let (orphan, _) = solve_qmdp::<f64>(&ProblemConfig::with_horizon(3, 7), 1e-6, 10_000).unwrap();
    save_policy(&orphan, dir.join("orphan.json")).unwrap();
    std::fs::write(dir.join("notes.txt"), "ignored").unwrap();
    tiny
}

#[tokio::test]
async fn precomputed_policies_are_served() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = write_policies(dir.path());
    let server = Server::start(ServeOptions {
        policies_dir: Some(dir.path().to_path_buf()),
        snapshot: None,
    })
    .await;
    let (_, listed) = server.get("/policies").await;
    let listed = listed.as_array().unwrap();
    assert_eq!(listed.len(), 2);
    assert!(listed.iter().all(|p| p["source"] == "precomputed"));
    assert!(listed.iter().any(|p| p["policy"] == "qmdp" && p["config_name"] == "small"));
    assert!(listed.iter().any(|p| p["policy"] == "sarsop" && p["t_max"] == 6));

    let id = server.create(json!({"config": tiny, "policy": "sarsop"})).await;
    let rec = server.observe(&id, 4, false).await;
    assert!((2..=6).contains(&rec.recommended));
    server.stop().await;
}

#[tokio::test]
async fn sessions_survive_a_restart_through_the_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let snapshot: PathBuf = dir.path().join("sessions.json");
    let options = ServeOptions {
        policies_dir: None,
        snapshot: Some(snapshot.clone()),
    };
    let server = Server::start(options.clone()).await;
    let id = server.create(json!({"config_name": "small", "policy": "qmdp"})).await;
    server.observe(&id, 8, false).await;
    server.announce(&id, 8).await;
    server.observe(&id, 9, false).await;
    let before = server.view(&id).await;
    server.stop().await;
    assert!(snapshot.exists());

    let server = Server::start(options).await;
    let after = server.view(&id).await;
    assert_eq!(after, before);
    server.announce(&id, 9).await;
    server.stop().await;
}
