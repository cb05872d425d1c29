//! axum routes for the handlers in [`super`].

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use log::info;

use super::{PredictRequest, Service, ServiceError, WhatIfRequest};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

fn bad_body(r: JsonRejection) -> ServiceError {
    ServiceError {
        status: r.status().as_u16(),
        code: "bad_request".into(),
        stage: "parse".into(),
        message: r.body_text(),
    }
}

async fn model_info(State(s): State<Arc<Service>>) -> Response {
    Json(s.handle_model_info()).into_response()
}

async fn health(State(s): State<Arc<Service>>) -> Response {
    Json(s.health()).into_response()
}

async fn predict(State(s): State<Arc<Service>>, body: Result<Json<PredictRequest>, JsonRejection>) -> Response {
    match body.map_err(bad_body).and_then(|Json(req)| s.handle_predict(&req)) {
        Ok(r) => Json(r).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn whatif(State(s): State<Arc<Service>>, body: Result<Json<WhatIfRequest>, JsonRejection>) -> Response {
    match body.map_err(bad_body).and_then(|Json(req)| s.handle_whatif(&req)) {
        Ok(r) => Json(r).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn not_found() -> Response {
    ServiceError {
        status: 404,
        code: "not_found".into(),
        stage: "route".into(),
        message: "no such endpoint".into(),
    }
    .into_response()
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/api/v1/model-info", get(model_info))
        .route("/api/v1/predict", post(predict))
        .route("/api/v1/whatif", post(whatif))
        .route("/api/v1/health", get(health))
        .fallback(not_found)
        .with_state(service)
}

/// Serves until Ctrl-C.
pub async fn serve(service: Arc<Service>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
