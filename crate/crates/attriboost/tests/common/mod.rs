//! Mock OpenAI-compatible chat server answering from a scripted world.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use attriboost::core::oracle::{DefinitionRequest, LabelRequest};
use attriboost::core::synth::ScriptedBackend;
use attriboost::core::OracleBackend;
use serde_json::{json, Value};

pub struct MockServer {
    pub url: String,
    state: Arc<State>,
}

struct State {
    scripted: ScriptedBackend,
    iteration: AtomicU32,
    requests: AtomicUsize,
    fail_first: AtomicUsize,
    bodies: Mutex<Vec<Vec<u8>>>,
}

impl MockServer {
    pub fn start(scripted: ScriptedBackend) -> MockServer {
        Self::start_failing(scripted, 0)
    }

    /// The first `fail_first` requests get a 503.
    pub fn start_failing(scripted: ScriptedBackend, fail_first: usize) -> MockServer {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let state = Arc::new(State {
            scripted,
            iteration: AtomicU32::new(0),
            requests: AtomicUsize::new(0),
            fail_first: AtomicUsize::new(fail_first),
            bodies: Mutex::new(Vec::new()),
        });
        let s = state.clone();
        std::thread::spawn(move || {
            for conn in listener.incoming() {
                let Ok(conn) = conn else { break };
                let s = s.clone();
                std::thread::spawn(move || serve(conn, &s));
            }
        });
        MockServer { url, state }
    }

    pub fn requests(&self) -> usize {
        self.state.requests.load(Ordering::SeqCst)
    }

    /// Raw bodies of every request received, in arrival order.
    pub fn bodies(&self) -> Vec<Vec<u8>> {
        self.state.bodies.lock().unwrap().clone()
    }
}

fn serve(conn: TcpStream, s: &State) {
    let mut reader = BufReader::new(conn.try_clone().unwrap());
    conn.set_nodelay(true).unwrap();
    let mut out = conn;
    loop {
        let mut len = 0usize;
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        loop {
            line.clear();
            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                return;
            }
            if line == "\r\n" {
                break;
            }
            if let Some((k, v)) = line.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    len = v.trim().parse().unwrap();
                }
            }
        }
        let mut body = vec![0; len];
        reader.read_exact(&mut body).unwrap();
        s.requests.fetch_add(1, Ordering::SeqCst);
        s.bodies.lock().unwrap().push(body.clone());
        let (status, reply) = if s
            .fail_first
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok()
        {
            ("503 Service Unavailable", "{\"error\":\"busy\"}".to_string())
        } else {
            match answer(s, &body) {
                Ok(content) => (
                    "200 OK",
                    json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string(),
                ),
                Err(e) => ("400 Bad Request", json!({"error": e}).to_string()),
            }
        };
        let msg = format!(
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{reply}",
            reply.len()
        );
        if out.write_all(msg.as_bytes()).is_err() {
            return;
        }
    }
}

fn answer(s: &State, body: &[u8]) -> Result<String, String> {
    let v: Value = serde_json::from_slice(body).map_err(|e| e.to_string())?;
    let parts = v["messages"][0]["content"].as_array().ok_or("no content")?;
    let prompt = parts[0]["text"].as_str().ok_or("no prompt")?.to_string();
    let schema = &v["response_format"]["json_schema"];
    let urls = |tag: char| -> Vec<String> {
        let mut out = Vec::new();
        for w in parts.windows(2) {
            let is_tag = w[0]["text"].as_str().is_some_and(|t| t.starts_with(tag) && t.ends_with(':'));
            if is_tag {
                out.push(w[1]["audio_url"]["url"].as_str().unwrap_or_default().to_string());
            }
        }
        out
    };
    match schema["name"].as_str() {
        Some("attribute_questions") => {
            let k = schema["schema"]["properties"]["questions"]["minItems"].as_u64().ok_or("no k")? as usize;
            let req = DefinitionRequest {
                template: String::new(),
                prompt,
                group_a: urls('A'),
                group_b: urls('B'),
                k,
                iteration: s.iteration.fetch_add(1, Ordering::SeqCst) + 1,
                attempt: 0,
            };
            let resp = s.scripted.define(&req).map_err(|e| e.to_string())?;
            Ok(serde_json::to_string(&resp).unwrap())
        }
        Some("attribute_answers") => {
            let questions: Vec<String> = prompt
                .lines()
                .filter_map(|l| {
                    let (n, q) = l.split_once(". ")?;
                    n.parse::<usize>().ok()?;
                    Some(q.to_string())
                })
                .collect();
            let media_ref = parts[1]["audio_url"]["url"].as_str().ok_or("no media")?.to_string();
            let req = LabelRequest {
                template: String::new(),
                prompt,
                media_ref,
                questions,
                attempt: 0,
            };
            let resp = s.scripted.label(&req).map_err(|e| e.to_string())?;
            Ok(serde_json::to_string(&resp).unwrap())
        }
        other => Err(format!("unknown schema {other:?}")),
    }
}
