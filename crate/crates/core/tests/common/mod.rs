//! In-process mock of an OpenAI-compatible server for sampler tests.
#![allow(dead_code)]

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

#[derive(Default)]
pub struct MockState {
    pub in_flight: AtomicUsize,
    pub max_in_flight: AtomicUsize,
    pub requests: AtomicUsize,
    pub bodies: Mutex<Vec<Value>>,
    /// Statuses to answer with before answering normally, in order.
    pub script: Mutex<VecDeque<u16>>,
    /// When set, every request gets this status.
    pub always: Mutex<Option<u16>>,
    pub delay_ms: u64,
}

pub struct Mock {
    pub addr: SocketAddr,
    pub state: Arc<MockState>,
}

impl Mock {
    pub fn endpoint(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn bodies(&self) -> Vec<Value> {
        self.state.bodies.lock().unwrap().clone()
    }
}

async fn answer(state: Arc<MockState>, body: Value, chat: bool) -> Response {
    let now = state.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    state.max_in_flight.fetch_max(now, Ordering::SeqCst);
    let n = state.requests.fetch_add(1, Ordering::SeqCst);
    tokio::time::sleep(Duration::from_millis(state.delay_ms)).await;
    state.bodies.lock().unwrap().push(body.clone());
    let status = match *state.always.lock().unwrap() {
        Some(s) => Some(s),
        None => state.script.lock().unwrap().pop_front(),
    };
    state.in_flight.fetch_sub(1, Ordering::SeqCst);
    if let Some(s) = status {
        let code = StatusCode::from_u16(s).unwrap();
        let mut resp = (code, Json(json!({"error": {"message": "scripted"}}))).into_response();
        if s == 429 {
            resp.headers_mut().insert("retry-after", "0".parse().unwrap());
        }
        return resp;
    }
    let prompt = if chat {
        body["messages"].as_array().and_then(|m| m.last()).map(|m| m["content"].clone())
    } else {
        Some(body["prompt"].clone())
    };
    let text = format!(
        "A generated answer number {n} to {}. It was a good day and the words were fine.",
        prompt.and_then(|p| p.as_str().map(str::to_owned)).unwrap_or_default()
    );
    let choice = if chat {
        json!({"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"})
    } else {
        json!({"index": 0, "text": text, "finish_reason": "stop"})
    };
    Json(json!({"id": format!("cmpl-{n}"), "choices": [choice]})).into_response()
}

async fn completions(State(s): State<Arc<MockState>>, Json(body): Json<Value>) -> Response {
    answer(s, body, false).await
}

async fn chat(State(s): State<Arc<MockState>>, Json(body): Json<Value>) -> Response {
    answer(s, body, true).await
}

/// Starts a server on an ephemeral port inside the current runtime.
pub async fn start(state: MockState) -> Mock {
    let state = Arc::new(state);
    let app = Router::new()
        .route("/v1/completions", post(completions))
        .route("/v1/chat/completions", post(chat))
        .with_state(state.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    Mock { addr, state }
}

pub fn with_delay(delay_ms: u64) -> MockState {
    MockState {
        delay_ms,
        ..Default::default()
    }
}
