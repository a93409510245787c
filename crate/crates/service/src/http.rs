use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::extract::{Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Router;
use tokio::net::TcpListener;

use crate::api::{ApiRequest, Method, Service};
use crate::error::ApiError;

const MAX_BODY: usize = 1 << 20;

/// Every path goes through [`Service::handle`], so HTTP responses are
/// byte-for-byte those of the in-process handler.
pub fn router(service: Arc<Service>) -> Router {
    Router::new().fallback(dispatch).with_state(service)
}

async fn dispatch(State(service): State<Arc<Service>>, req: Request) -> Response {
    let method = Method::parse(req.method().as_str());
    let target = req.uri().path_and_query().map_or("/", |pq| pq.as_str()).to_string();
    let bytes = match to_bytes(req.into_body(), MAX_BODY).await {
        Ok(b) => b,
        Err(e) => return reply(400, "application/json", ApiError::invalid(format!("request body: {e}")).body().to_string().into()),
    };
    let api_req = ApiRequest::new(method, &target, bytes.to_vec());
    // Sampling can take a while; keep it off the async workers.
    match tokio::task::spawn_blocking(move || service.handle(&api_req)).await {
        Ok(r) => reply(r.status, r.content_type, Body::from(r.body.to_vec())),
        Err(e) => reply(500, "application/json", ApiError::internal(e.to_string()).body().to_string().into()),
    }
}

fn reply(status: u16, content_type: &'static str, body: Body) -> Response {
    let status = StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, [(header::CONTENT_TYPE, content_type)], body).into_response()
}

/// Serves until Ctrl-C.
pub async fn serve(listener: TcpListener, service: Arc<Service>) -> std::io::Result<()> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
