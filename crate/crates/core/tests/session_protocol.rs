use std::io::Cursor;
use std::sync::{Arc, Mutex};

use gridcomm::config::FileConfig;
use gridcomm::session::{serve, Session, TraceSink};
use gridcomm::solver::oracle_solve;
use gridcomm::trace::read_trace;
use serde_json::{json, Value};

fn session() -> Session {
    Session::new(FileConfig::default()).unwrap()
}

fn call(s: &mut Session, req: Value) -> Value {
    serde_json::from_str(&s.handle_line(&req.to_string())).unwrap()
}

fn error_code(v: &Value) -> &str {
    v["error"].as_str().unwrap_or_else(|| panic!("expected an error, got {v}"))
}

fn oracle_plan(s: &Session) -> Vec<String> {
    let (ep, state) = s.current_episode().unwrap();
    oracle_solve(state, &ep.task, s.config().environment.episode_len)
        .unwrap()
        .iter()
        .map(|a| a.name().to_string())
        .collect()
}

#[test]
fn same_seed_gives_identical_reset() {
    let mut s = session();
    let a = s.handle_line(r#"{"cmd":"reset","seed":7}"#);
    let b = s.handle_line(r#"{"cmd":"reset","seed":7}"#);
    assert_eq!(a, b);
    let c = session().handle_line(r#"{"cmd":"reset","seed":7}"#);
    assert_eq!(a, c);
    assert_ne!(a, s.handle_line(r#"{"cmd":"reset","seed":8}"#));
}

#[test]
fn views_are_asymmetric() {
    let mut s = session();
    let r = call(&mut s, json!({"cmd": "reset", "seed": 3}));
    assert_eq!(r["ok"], true);
    let speaker = r["speaker"].as_object().unwrap();
    let listener = r["listener"].as_object().unwrap();
    let mut sk: Vec<&str> = speaker.keys().map(String::as_str).collect();
    sk.sort();
    assert_eq!(sk, ["concept", "instruction"]);
    assert!(listener.contains_key("grid") && listener.contains_key("messages"));
    assert!(!listener.contains_key("concept") && !listener.contains_key("instruction"));
    let grid = listener["grid"].as_array().unwrap();
    assert_eq!(grid.len(), 4);
    assert!(grid.iter().all(|row| row.as_array().unwrap().iter().all(|c| c.as_array().unwrap().len() == 17)));

    let step = call(&mut s, json!({"cmd": "step", "action": "left"}));
    let keys: Vec<&str> = step.as_object().unwrap().keys().map(String::as_str).collect();
    assert!(!keys.contains(&"speaker") && !step["listener"].as_object().unwrap().contains_key("concept"));
}

#[test]
fn oracle_actions_finish_with_reward_one() {
    let mut s = session();
    call(&mut s, json!({"cmd": "reset", "seed": 11}));
    let msgs = json!([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1]]);
    assert_eq!(call(&mut s, json!({"cmd": "speak", "messages": msgs}))["ok"], true);
    let plan = oracle_plan(&s);
    let mut last = Value::Null;
    for (i, a) in plan.iter().enumerate() {
        last = call(&mut s, json!({"cmd": "step", "action": a}));
        assert_eq!(last["done"], i + 1 == plan.len(), "{last}");
        assert_eq!(last["listener"]["messages"], json!([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]]));
    }
    assert_eq!(last["reward"], 1.0);
    assert_eq!(error_code(&call(&mut s, json!({"cmd": "step", "action": 0}))), "BAD_STATE");
    let rec = &s.trace()[0];
    assert_eq!(rec.actions.len(), plan.len());
    assert_eq!(rec.messages, vec![vec![0, 1, 3]]);
    assert_eq!(rec.reward, 1.0);
}

#[test]
fn errors_carry_codes() {
    let mut s = session();
    assert_eq!(error_code(&call(&mut s, json!({"cmd": "step", "action": "left"}))), "BAD_STATE");
    assert_eq!(error_code(&call(&mut s, json!({"cmd": "fly"}))), "BAD_CMD");
    assert_eq!(error_code(&serde_json::from_str(&s.handle_line("not json")).unwrap()), "BAD_CMD");
    call(&mut s, json!({"cmd": "reset"}));
    assert_eq!(error_code(&call(&mut s, json!({"cmd": "step", "action": "jump"}))), "BAD_CMD");
    assert_eq!(error_code(&call(&mut s, json!({"cmd": "step", "action": 8}))), "BAD_CMD");
    let bad = call(&mut s, json!({"cmd": "speak", "messages": [[1, 1, 0, 0], [1, 0, 0, 0], [1, 0, 0, 0]]}));
    assert_eq!(error_code(&bad), "VALIDATION");
    assert!(bad["detail"].as_str().unwrap().contains("message 0"));
    let short = call(&mut s, json!({"cmd": "speak", "messages": [[1, 0, 0, 0]]}));
    assert_eq!(error_code(&short), "VALIDATION");
    let good = json!({"cmd": "speak", "messages": [[1, 0, 0, 0], [1, 0, 0, 0], [1, 0, 0, 0]]});
    assert_eq!(call(&mut s, good.clone())["ok"], true);
    assert_eq!(error_code(&call(&mut s, good)), "BAD_STATE");
    let cfg = json!({"cmd": "reset", "config": {"environment": {"distractors": 99}}});
    assert_eq!(error_code(&call(&mut s, cfg)), "CONFIG");
    let cfg = json!({"cmd": "reset", "config": {"environment": {"grid_sise": 4}}});
    assert_eq!(error_code(&call(&mut s, cfg)), "BAD_CMD");
    // the default channel cannot carry a whole concept
    assert_eq!(error_code(&call(&mut s, json!({"cmd": "baseline", "kind": "perfect_speaker"}))), "CONFIG");
}

#[test]
fn speaking_after_acting_is_rejected() {
    let mut s = session();
    call(&mut s, json!({"cmd": "reset", "seed": 1}));
    call(&mut s, json!({"cmd": "step", "action": "left"}));
    let r = call(&mut s, json!({"cmd": "speak", "messages": [[1, 0, 0, 0], [1, 0, 0, 0], [1, 0, 0, 0]]}));
    assert_eq!(error_code(&r), "BAD_STATE");
}

#[test]
fn baselines_speak_and_extend_the_view() {
    let mut s = session();
    assert_eq!(call(&mut s, json!({"cmd": "baseline", "kind": "fixed_speaker"}))["ok"], true);
    let r = call(&mut s, json!({"cmd": "reset", "seed": 2}));
    assert_eq!(r["listener"]["messages"], json!([[1.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]]));
    let r = call(&mut s, json!({"cmd": "speak", "messages": [[1, 0, 0, 0], [1, 0, 0, 0], [1, 0, 0, 0]]}));
    assert_eq!(error_code(&r), "BAD_STATE");

    let r = call(&mut s, json!({"cmd": "baseline", "kind": "oracle_listener"}));
    let grid = r["listener"]["grid"].as_array().unwrap();
    let marked: u64 = grid.iter().flat_map(|row| row.as_array().unwrap()).map(|c| c[17].as_u64().unwrap()).sum();
    assert_eq!(marked, 1);

    call(&mut s, json!({"cmd": "baseline", "kind": null}));
    let r = call(&mut s, json!({"cmd": "reset", "seed": 2}));
    assert_eq!(r["listener"]["messages"], Value::Null);
    assert_eq!(r["listener"]["grid"][0][0].as_array().unwrap().len(), 17);
}

#[test]
fn perfect_speaker_with_room_round_trips() {
    let cfg: FileConfig = toml::from_str("[channel]\ncomm_type = \"binary\"\nnum_msgs = 5\nmsg_len = 4").unwrap();
    let mut s = Session::new(cfg).unwrap();
    s.baseline(Some(gridcomm::channel::BaselineKind::PerfectSpeaker)).unwrap();
    let r = s.reset(None, Some(4)).unwrap();
    let flat: Vec<u8> = r.listener.messages.unwrap().messages.concat().iter().map(|&v| v as u8).collect();
    assert_eq!(&flat[..18], &r.speaker.concept.bits()[..]);
}

#[test]
fn signalling_cost_reduces_the_final_reward() {
    let cfg: FileConfig = toml::from_str("[channel]\ncost_per_message = 0.05").unwrap();
    let mut s = Session::new(cfg).unwrap();
    call(&mut s, json!({"cmd": "reset", "seed": 5}));
    call(&mut s, json!({"cmd": "speak", "messages": [[0, 0, 0, 1], [0, 0, 0, 1], [0, 0, 0, 1]]}));
    let mut last = Value::Null;
    for a in oracle_plan(&s) {
        last = call(&mut s, json!({"cmd": "step", "action": a}));
    }
    assert_eq!(last["reward"], 1.0);
    assert!((last["adjusted_reward"].as_f64().unwrap() - 0.85).abs() < 1e-12);
    assert!((s.trace()[0].reward - 0.85).abs() < 1e-12);
}

#[test]
fn transcript_replays_identically() {
    let transcript = [
        r#"{"cmd":"baseline","kind":"random_speaker"}"#,
        r#"{"cmd":"reset","seed":21}"#,
        r#"{"cmd":"step","action":"forward"}"#,
        r#"{"cmd":"step","action":2}"#,
        r#"{"cmd":"render","cell_px":8}"#,
        r#"{"cmd":"reset"}"#,
        r#"{"cmd":"step","action":"right"}"#,
        r#"{"cmd":"metrics"}"#,
        r#"{"cmd":"close"}"#,
    ];
    let run = || {
        let mut s = session();
        transcript.iter().map(|l| s.handle_line(l)).collect::<Vec<_>>()
    };
    let a = run();
    assert_eq!(a, run());
    assert!(a.iter().all(|l| !l.contains("\"error\"")), "{a:?}");
}

#[test]
fn serve_flushes_trace_on_close() {
    let buf: Arc<Mutex<Vec<u8>>> = Arc::new(Mutex::new(Vec::new()));
    let sink: TraceSink = buf.clone();
    let mut s = session().with_sink(sink);
    let input = [
        r#"{"cmd":"reset","seed":1}"#,
        r#"{"cmd":"step","action":"left"}"#,
        r#"{"cmd":"reset","seed":2}"#,
        r#"{"cmd":"close"}"#,
        r#"{"cmd":"reset"}"#,
    ]
    .join("\n");
    let mut out = Vec::new();
    serve(&mut s, Cursor::new(input), &mut out).unwrap();
    let lines: Vec<Value> = String::from_utf8(out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 4, "requests after close are not read");
    assert_eq!(lines[3], json!({"ok": true, "records": 2}));
    let records = read_trace(Cursor::new(buf.lock().unwrap().clone())).unwrap();
    assert_eq!(records.iter().map(|r| (r.episode_id, r.seed, r.actions.len())).collect::<Vec<_>>(), [(0, 1, 1), (1, 2, 0)]);
    assert_eq!(records[0].config_digest, FileConfig::default().digest());
    assert_eq!(error_code(&call(&mut s, json!({"cmd": "metrics"}))), "BAD_STATE");
}

#[test]
fn image_observations_and_render() {
    let cfg: FileConfig = toml::from_str("[environment]\ngrid_input_type = \"image\"\nlights_out_prob = 1.0\n[render]\ncell_px = 10").unwrap();
    let mut s = Session::new(cfg).unwrap();
    let r = call(&mut s, json!({"cmd": "reset", "seed": 9}));
    let image = &r["listener"]["image"];
    assert!(r["listener"].get("grid").is_none());
    assert_eq!((image["width"].as_u64(), image["height"].as_u64()), (Some(40), Some(40)));
    let hex = image["pixels_hex"].as_str().unwrap();
    assert_eq!(hex.len(), 40 * 40 * 3 * 2);
    // dimmed: no pixel keeps full brightness
    assert!(!hex.as_bytes().chunks(2).any(|b| b == b"ff"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("frame.ppm");
    let r = call(&mut s, json!({"cmd": "render", "cell_px": 12, "path": path.to_str().unwrap()}));
    assert_eq!(r["width"], 48);
    let bytes = std::fs::read(&path).unwrap();
    assert!(bytes.starts_with(b"P6 48 48 255\n"));
    assert_eq!(bytes.len(), 13 + 48 * 48 * 3);
    assert_eq!(error_code(&call(&mut s, json!({"cmd": "render", "cell_px": 2}))), "VALIDATION");
}
