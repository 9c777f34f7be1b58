//! Request/response wrappers around [`RewardModel`]: newline-delimited JSON
//! over stdio and a small HTTP API.

use std::io::{self, BufRead, Write};
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{RewardBreakdown, RewardModel};
use crate::smtlib::parse_formula;

pub const DEFAULT_BIND: &str = "127.0.0.1:8841";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardRequest {
    pub completion: String,
    pub ground_truth: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardResponse {
    #[serde(flatten)]
    pub breakdown: RewardBreakdown,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<Value>,
}

/// Grouped batch: many completions against one ground truth.
#[derive(Debug, Clone, Deserialize)]
struct GroupedBatch {
    completions: Vec<String>,
    ground_truth: String,
}

fn error_object(kind: &str, detail: impl std::fmt::Display) -> Value {
    json!({ "error": kind, "detail": detail.to_string() })
}

/// Scores one request; an unparseable ground truth becomes an error object.
pub fn handle(model: &RewardModel, req: &RewardRequest) -> Result<RewardResponse, Value> {
    let gt = parse_formula(&req.ground_truth)
        .map_err(|e| error_object("invalid_ground_truth", e))?;
    Ok(RewardResponse { breakdown: model.score(&req.completion, &gt), tag: req.tag.clone() })
}

fn handle_value(model: &RewardModel, req: &RewardRequest) -> Value {
    match handle(model, req) {
        Ok(r) => serde_json::to_value(r).expect("responses serialize"),
        Err(e) => e,
    }
}

fn parse_batch(body: &[u8]) -> Result<Vec<RewardRequest>, Value> {
    let v: Value = serde_json::from_slice(body).map_err(|e| error_object("parse", e))?;
    if v.is_array() {
        return serde_json::from_value(v).map_err(|e| error_object("request", e));
    }
    let grouped: GroupedBatch = serde_json::from_value(v).map_err(|e| error_object("request", e))?;
    Ok(grouped
        .completions
        .into_iter()
        .map(|completion| RewardRequest {
            completion,
            ground_truth: grouped.ground_truth.clone(),
            tag: None,
        })
        .collect())
}

/// Reads one JSON request per line and writes one JSON response per line.
/// Blank lines are skipped; bad lines produce an error object and the loop
/// carries on.
pub fn serve_stdio<R: BufRead, W: Write>(model: &RewardModel, input: R, mut output: W) -> io::Result<()> {
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let response = match serde_json::from_str::<Value>(&line) {
            Err(_) => json!({ "error": "parse", "line": lineno }),
            Ok(v) => match serde_json::from_value::<RewardRequest>(v) {
                Err(e) => json!({ "error": "request", "line": lineno, "detail": e.to_string() }),
                Ok(req) => handle_value(model, &req),
            },
        };
        serde_json::to_writer(&mut output, &response)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

type Shared = Arc<RewardModel>;

async fn score_blocking(model: Shared, req: RewardRequest) -> Value {
    tokio::task::spawn_blocking(move || handle_value(&model, &req))
        .await
        .unwrap_or_else(|e| error_object("internal", e))
}

async fn reward(State(model): State<Shared>, body: Bytes) -> Response {
    let req: RewardRequest = match serde_json::from_slice::<Value>(&body) {
        Err(e) => return (StatusCode::BAD_REQUEST, Json(error_object("parse", e))).into_response(),
        Ok(v) => match serde_json::from_value(v) {
            Ok(r) => r,
            Err(e) => {
                return (StatusCode::UNPROCESSABLE_ENTITY, Json(error_object("request", e)))
                    .into_response()
            }
        },
    };
    let out = score_blocking(model, req).await;
    let status = if out.get("error").is_some() {
        StatusCode::UNPROCESSABLE_ENTITY
    } else {
        StatusCode::OK
    };
    (status, Json(out)).into_response()
}

async fn reward_batch(State(model): State<Shared>, body: Bytes) -> Response {
    let reqs = match parse_batch(&body) {
        Ok(r) => r,
        Err(e) => {
            let status = if e["error"] == "parse" {
                StatusCode::BAD_REQUEST
            } else {
                StatusCode::UNPROCESSABLE_ENTITY
            };
            return (status, Json(e)).into_response();
        }
    };
    let handles: Vec<_> = reqs
        .into_iter()
        .map(|req| tokio::spawn(score_blocking(model.clone(), req)))
        .collect();
    let mut out = Vec::with_capacity(handles.len());
    for h in handles {
        out.push(h.await.unwrap_or_else(|e| error_object("internal", e)));
    }
    Json(out).into_response()
}

pub fn router(model: RewardModel) -> Router {
    Router::new()
        .route("/v1/reward", post(reward))
        .route("/v1/reward/batch", post(reward_batch))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(Arc::new(model))
}

/// Serves on an already-bound listener until ctrl-c.
pub async fn serve_http(listener: tokio::net::TcpListener, model: RewardModel) -> io::Result<()> {
    axum::serve(listener, router(model))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

pub fn serve_http_blocking(bind: SocketAddr, model: RewardModel) -> io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind).await?;
        serve_http(listener, model).await
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equivalence::SolverConfig;
    use crate::sgf::RewardOptions;

    fn model() -> RewardModel {
        RewardModel::new(SolverConfig::internal(), RewardOptions::default())
    }

    #[test]
    fn stdio_loop_handles_bad_lines() {
        let input = concat!(
            r#"{"completion":"<think>a</think><answer>(assert (<= in0 in1))</answer>","ground_truth":"(assert (<= in0 in1))","tag":7}"#,
            "\n",
            "{not json\n",
            "\n",
            r#"{"completion":"x"}"#,
            "\n",
            r#"{"completion":"x","ground_truth":"(assert"}"#,
            "\n",
        );
        let mut out = Vec::new();
        serve_stdio(&model(), input.as_bytes(), &mut out).unwrap();
        let lines: Vec<Value> = String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0]["reward"], 1.0);
        assert_eq!(lines[0]["tag"], 7);
        assert_eq!(lines[1], json!({"error": "parse", "line": 2}));
        assert_eq!(lines[2]["error"], "request");
        assert_eq!(lines[2]["line"], 4);
        assert_eq!(lines[3]["error"], "invalid_ground_truth");
    }

    #[test]
    fn batch_shapes() {
        let grouped = br#"{"completions":["a","b"],"ground_truth":"None"}"#;
        assert_eq!(parse_batch(grouped).unwrap().len(), 2);
        let bare = br#"[{"completion":"a","ground_truth":"None"}]"#;
        assert_eq!(parse_batch(bare).unwrap()[0].ground_truth, "None");
        assert_eq!(parse_batch(b"[").unwrap_err()["error"], "parse");
        assert_eq!(parse_batch(b"{}").unwrap_err()["error"], "request");
    }
}
