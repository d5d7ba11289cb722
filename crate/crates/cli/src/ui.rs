//! Static HTTP server for the browser console.
//!
//! `/` and other asset paths come from the console directory (or a minimal
//! built-in page), `/session.json` tells the page where the WebSocket session
//! server listens, and `/replays/<file>` serves recorded episodes.

use std::fs;
use std::io;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use serde::Serialize;
use tiny_http::{Header, Method, Request, Response, Server};

use crate::session::PROTOCOL_VERSION;

const INDEX: &str = r#"<!doctype html>
<html><head><meta charset="utf-8"><title>c2sim console</title>
<style>body{font:14px monospace;margin:1em}#log{white-space:pre-wrap}</style></head>
<body><h1>c2sim</h1><p id="status">connecting</p><div id="log"></div>
<script>
fetch('/session.json').then(r => r.json()).then(info => {
  const ws = new WebSocket(info.websocket);
  const log = m => { document.getElementById('log').textContent = m; };
  ws.onopen = () => { document.getElementById('status').textContent = 'connected'; };
  ws.onclose = () => { document.getElementById('status').textContent = 'closed'; };
  ws.onmessage = e => {
    const msg = JSON.parse(e.data);
    log(JSON.stringify(msg, null, 1));
    if (msg.kind === 'state') ws.send(JSON.stringify({ kind: 'orders', tick: msg.tick, actions: [] }));
  };
});
</script></body></html>
"#;

#[derive(Serialize)]
struct SessionInfo {
    protocol_version: u32,
    websocket: String,
}

pub struct UiServer {
    server: Arc<Server>,
    addr: SocketAddr,
    worker: Option<JoinHandle<()>>,
}

impl UiServer {
    /// Start serving on `addr` in a background thread.
    pub fn start(
        addr: &str,
        ui_dir: Option<PathBuf>,
        ws_addr: SocketAddr,
        replay_dir: Option<PathBuf>,
    ) -> io::Result<Self> {
        let server = Server::http(addr).map_err(|e| io::Error::other(e.to_string()))?;
        let addr = server.server_addr().to_ip().ok_or_else(|| io::Error::other("not an IP listener"))?;
        let server = Arc::new(server);
        let info = serde_json::to_string(&SessionInfo {
            protocol_version: PROTOCOL_VERSION,
            websocket: format!("ws://{ws_addr}/"),
        })
        .expect("serializable");
        let s = server.clone();
        let worker = thread::spawn(move || {
            for req in s.incoming_requests() {
                let result = respond(req, ui_dir.as_deref(), replay_dir.as_deref(), &info);
                if let Err(e) = result {
                    log::debug!("ui: {e}");
                }
            }
        });
        Ok(Self { server, addr, worker: Some(worker) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }
}

impl Drop for UiServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("wasm") => "application/wasm",
        _ => "application/octet-stream",
    }
}

fn header(value: &str) -> Header {
    Header::from_bytes("Content-Type", value).expect("valid header")
}

/// Join `rel` under `root`, refusing anything that could escape it.
pub fn safe_join(root: &Path, rel: &str) -> Option<PathBuf> {
    let rel = Path::new(rel);
    if rel.components().all(|c| matches!(c, Component::Normal(_))) && rel.components().next().is_some() {
        Some(root.join(rel))
    } else {
        None
    }
}

fn file_response(path: &Path) -> Option<Response<io::Cursor<Vec<u8>>>> {
    let bytes = fs::read(path).ok()?;
    Some(Response::from_data(bytes).with_header(header(content_type(path))))
}

fn respond(req: Request, ui_dir: Option<&Path>, replay_dir: Option<&Path>, info: &str) -> io::Result<()> {
    if req.method() != &Method::Get && req.method() != &Method::Head {
        return req.respond(Response::from_string("method not allowed").with_status_code(405));
    }
    let path = req.url().split(['?', '#']).next().unwrap_or("/").to_string();
    let not_found = || Response::from_string("not found").with_status_code(404);
    if path == "/session.json" {
        return req.respond(Response::from_string(info).with_header(header("application/json")));
    }
    if let Some(name) = path.strip_prefix("/replays/") {
        let found = replay_dir.and_then(|d| safe_join(d, name)).and_then(|p| file_response(&p));
        return match found {
            Some(r) => req.respond(r),
            None => req.respond(not_found()),
        };
    }
    let rel = path.trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    match ui_dir {
        Some(dir) => match safe_join(dir, rel).and_then(|p| file_response(&p)) {
            Some(r) => req.respond(r),
            None => req.respond(not_found()),
        },
        None if rel == "index.html" => {
            req.respond(Response::from_string(INDEX).with_header(header("text/html; charset=utf-8")))
        }
        None => req.respond(not_found()),
    }
}
