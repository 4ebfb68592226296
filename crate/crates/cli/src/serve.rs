use std::net::SocketAddr;

use axum::body::Bytes;
use axum::http::{header, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;

use footprint_core::service::Service;
use footprint_core::ReferenceData;

use crate::{Failure, EXIT_IO, EXIT_VALIDATION};

async fn dispatch(service: Service, method: Method, uri: Uri, body: Bytes) -> Response {
    let r = service.handle_request(method.as_str(), uri.path(), &body);
    let status = StatusCode::from_u16(r.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, [(header::CONTENT_TYPE, "application/json")], r.body).into_response()
}

pub fn run(data: ReferenceData, host: &str, port: u16) -> Result<(), Failure> {
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| Failure::new(EXIT_VALIDATION, format!("--host/--port: {e}")))?;
    let service = Service::new(data);
    let app = Router::new().fallback(move |method: Method, uri: Uri, body: Bytes| {
        dispatch(service.clone(), method, uri, body)
    });
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::new(EXIT_IO, format!("runtime: {e}")))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Failure::new(EXIT_IO, format!("bind {addr}: {e}")))?;
        eprintln!("listening on http://{addr}/v1");
        axum::serve(listener, app)
            .await
            .map_err(|e| Failure::new(EXIT_IO, format!("serve: {e}")))
    })
}
