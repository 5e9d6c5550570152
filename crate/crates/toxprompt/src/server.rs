//! Mock server speaking the native protocol from a fixture.

use std::sync::Arc;
use std::thread;

use tiny_http::{Header, Method, Request, Response, Server};
use toxprompt_core::backend::LanguageModel;
use toxprompt_core::mock::MockBackend;

use crate::wire::{EmbedRequest, EmbedResponse, ErrorResponse, ScoreRequest, ScoreResponse, WireToken};

pub struct MockServer {
    server: Arc<Server>,
    workers: Vec<thread::JoinHandle<()>>,
    port: u16,
}

impl MockServer {
    /// Binds `127.0.0.1:port` (0 picks a free port) and starts `threads` workers.
    pub fn start(backend: MockBackend, port: u16, threads: usize) -> std::io::Result<Self> {
        let server = Server::http(("127.0.0.1", port)).map_err(std::io::Error::other)?;
        let port = server
            .server_addr()
            .to_ip()
            .map(|a| a.port())
            .ok_or_else(|| std::io::Error::other("server bound to a non-IP address"))?;
        let server = Arc::new(server);
        let backend = Arc::new(backend);
        let workers = (0..threads.max(1))
            .map(|_| {
                let server = Arc::clone(&server);
                let backend = Arc::clone(&backend);
                thread::spawn(move || {
                    for request in server.incoming_requests() {
                        handle(&backend, request);
                    }
                })
            })
            .collect();
        Ok(MockServer { server, workers, port })
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    pub fn url(&self) -> String {
        format!("http://127.0.0.1:{}", self.port)
    }

    /// Blocks until every worker exits, which happens only on [`MockServer::stop`].
    pub fn join(mut self) {
        for worker in self.workers.drain(..) {
            let _ = worker.join();
        }
    }

    pub fn stop(mut self) {
        self.server.unblock();
        for _ in 1..self.workers.len() {
            self.server.unblock();
        }
        for worker in self.workers.drain(..) {
            let _ = worker.join();
        }
    }
}

fn json_response(status: u16, body: String) -> Response<std::io::Cursor<Vec<u8>>> {
    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
    Response::from_string(body).with_status_code(status).with_header(header)
}

fn error(status: u16, message: impl Into<String>) -> Response<std::io::Cursor<Vec<u8>>> {
    let body = serde_json::to_string(&ErrorResponse { error: message.into() }).expect("serializes");
    json_response(status, body)
}

fn route(backend: &MockBackend, method: &Method, url: &str, body: &[u8]) -> Response<std::io::Cursor<Vec<u8>>> {
    if *method != Method::Post {
        return error(404, format!("no route for {method} {url}"));
    }
    match url {
        "/score" => {
            let request: ScoreRequest = match serde_json::from_slice(body) {
                Ok(r) => r,
                Err(e) => return error(400, format!("malformed score request: {e}")),
            };
            match backend.score_tokens(&request.context, &request.continuation) {
                Ok(tokens) => {
                    let response = ScoreResponse {
                        tokens: tokens.into_iter().map(WireToken::from).collect(),
                    };
                    json_response(200, serde_json::to_string(&response).expect("serializes"))
                }
                Err(e) => error(422, e.to_string()),
            }
        }
        "/embed" => {
            let request: EmbedRequest = match serde_json::from_slice(body) {
                Ok(r) => r,
                Err(e) => return error(400, format!("malformed embed request: {e}")),
            };
            match backend.embed_raw(&request.text) {
                Ok(vector) => json_response(200, serde_json::to_string(&EmbedResponse { vector }).expect("serializes")),
                Err(e) => error(422, e.to_string()),
            }
        }
        _ => error(404, format!("no route for {url}")),
    }
}

fn handle(backend: &MockBackend, mut request: Request) {
    let mut body = Vec::new();
    let response = match request.as_reader().read_to_end(&mut body) {
        Ok(_) => route(backend, request.method(), request.url(), &body),
        Err(e) => error(400, format!("unreadable body: {e}")),
    };
    let _ = request.respond(response);
}
