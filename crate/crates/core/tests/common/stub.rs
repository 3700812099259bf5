//! Minimal single-threaded chat-completion stub server.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener};
use std::sync::{Arc, Mutex};
use std::thread;

use garden_core::agents::{
    RemoteBackend, RemoteBackendConfig, RuleBackend, PROMPT_CONSTRAINTS, PROMPT_ROAD, PROMPT_SELECTION, PROMPT_TERRAIN,
};
use serde_json::{json, Value};

#[derive(Debug, Clone)]
pub struct Recorded {
    pub path: String,
    pub authorization: Option<String>,
    pub body: Value,
}

pub type Handler = fn(&Value) -> String;

pub struct Stub {
    pub addr: SocketAddr,
    log: Arc<Mutex<Vec<Recorded>>>,
}

impl Stub {
    pub fn spawn(handler: Handler) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let log = Arc::new(Mutex::new(Vec::new()));
        let sink = log.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let path = line.split_whitespace().nth(1).unwrap_or_default().to_string();
                let (mut len, mut authorization) = (0usize, None);
                loop {
                    let mut h = String::new();
                    reader.read_line(&mut h).unwrap();
                    let h = h.trim_end();
                    if h.is_empty() {
                        break;
                    }
                    let (k, v) = h.split_once(':').unwrap();
                    match k.to_ascii_lowercase().as_str() {
                        "content-length" => len = v.trim().parse().unwrap(),
                        "authorization" => authorization = Some(v.trim().to_string()),
                        _ => {}
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                let body: Value = serde_json::from_slice(&body).unwrap();
                let content = handler(&body);
                sink.lock().unwrap().push(Recorded { path, authorization, body });
                let reply = json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string();
                let head = format!(
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                    reply.len()
                );
                stream.write_all(head.as_bytes()).unwrap();
                stream.write_all(reply.as_bytes()).unwrap();
            }
        });
        Self { addr, log }
    }

    pub fn requests(&self) -> Vec<Recorded> {
        self.log.lock().unwrap().clone()
    }

    pub fn backend(&self, max_retries: u32, key: &str) -> RemoteBackend {
        let cfg = RemoteBackendConfig {
            base_url: format!("http://{}/v1", self.addr),
            model: "stub-model".into(),
            timeout_secs: 10,
            max_retries,
            api_key: Some(key.into()),
            ..Default::default()
        };
        RemoteBackend::new(cfg, RuleBackend::default())
    }
}

pub fn system_prompt(body: &Value) -> &str {
    body["messages"][0]["content"].as_str().unwrap()
}

pub fn user_message(body: &Value) -> Value {
    serde_json::from_str(body["messages"][1]["content"].as_str().unwrap()).unwrap_or(Value::Null)
}

pub fn malformed(_: &Value) -> String {
    "Sure! Here is a lovely garden: { not json".into()
}

/// Well-formed replies that also carry one bad entry per agent.
pub fn valid(body: &Value) -> String {
    let system = system_prompt(body);
    let rules = RuleBackend::default().interpret("a garden with a pond").unwrap();
    if system == PROMPT_TERRAIN {
        json!({"terrain": rules.terrain, "themes": ["hydric", "cyberpunk"]}).to_string()
    } else if system == PROMPT_ROAD {
        json!({"roads": {"num_entrances": 2, "num_keypoints": 2, "main_road_width": 3.0, "complexity": 0.6}})
            .to_string()
    } else if system == PROMPT_SELECTION {
        let user = user_message(body);
        let first = user["candidates"][0]["name"].as_str().unwrap();
        format!("```json\n{}\n```", json!({"objects": [{"name": first, "count": 1}, {"name": "unicorn statue"}]}))
    } else if system == PROMPT_CONSTRAINTS {
        let user = user_message(body);
        let area = user["area name"].as_str().unwrap();
        let name = user["objects"][0]["name"].as_str().unwrap();
        json!({area: {name: [["edge", "Global"], ["besides", name, "Position"]]}}).to_string()
    } else {
        panic!("unexpected system prompt")
    }
}
