//! Minimal scripted HTTP completion server for endpoint tests.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

/// One scripted reply: an HTTP status and, for 200s, the completion text.
#[derive(Clone)]
pub enum Reply {
    Ok(&'static str),
    Status(u16),
}

pub struct StubServer {
    pub address: String,
    hits: Arc<AtomicUsize>,
    bodies: Arc<Mutex<Vec<serde_json::Value>>>,
    shutdown: Arc<std::sync::atomic::AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Serve the scripted replies in order, then repeat the last one.
    pub fn start(script: Vec<Reply>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let address = format!("http://{}/v1/completions", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let shutdown = Arc::new(std::sync::atomic::AtomicBool::new(false));
        let thread_hits = hits.clone();
        let thread_bodies = bodies.clone();
        let thread_shutdown = shutdown.clone();
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if thread_shutdown.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { break };
                let n = thread_hits.fetch_add(1, Ordering::SeqCst);
                let reply = script.get(n).or_else(|| script.last()).cloned();
                if let Some(reply) = reply {
                    if let Some(body) = handle_connection(stream, &reply) {
                        thread_bodies.lock().unwrap().push(body);
                    }
                }
            }
        });
        Self {
            address,
            hits,
            bodies,
            shutdown,
            handle: Some(handle),
        }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn stop(mut self) -> Vec<serde_json::Value> {
        self.shutdown.store(true, Ordering::SeqCst);
        // Unblock the accept loop with a final throwaway connection.
        let addr = self.address.trim_start_matches("http://");
        let addr = addr.trim_end_matches("/v1/completions");
        let _ = TcpStream::connect(addr);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
        let bodies = self.bodies.lock().unwrap().clone();
        bodies
    }
}

fn handle_connection(mut stream: TcpStream, reply: &Reply) -> Option<serde_json::Value> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    let mut content_length = 0usize;
    loop {
        let mut header = String::new();
        reader.read_line(&mut header).ok()?;
        let header = header.trim();
        if header.is_empty() {
            break;
        }
        if let Some(value) = header.to_ascii_lowercase().strip_prefix("content-length:") {
            content_length = value.trim().parse().unwrap_or(0);
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body).ok()?;
    let parsed: Option<serde_json::Value> = serde_json::from_slice(&body).ok();

    let (status_line, payload) = match reply {
        Reply::Ok(text) => (
            "HTTP/1.1 200 OK".to_string(),
            serde_json::json!({
                "choices": [{"text": text, "finish_reason": "stop"}],
                "usage": {"prompt_tokens": 10, "completion_tokens": 5}
            })
            .to_string(),
        ),
        Reply::Status(code) => (
            format!("HTTP/1.1 {code} Stub"),
            serde_json::json!({"error": "scripted failure"}).to_string(),
        ),
    };
    let response = format!(
        "{status_line}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
    stream.write_all(response.as_bytes()).ok()?;
    stream.flush().ok()?;
    parsed
}
