//! HTTP handlers.

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::Deserialize;
use watchtower_core::collection::SubmissionContent;

use crate::error::ApiError;
use crate::state::{parse_body, AppState, ComposeRequest, ExperienceRequest};

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/catenas/{id}/views", get(get_views))
        .route("/catenas/{id}", get(get_catena).put(put_catena).delete(delete_catena))
        .route("/forms/{id}", post(post_form))
        .route("/repository/{kind}", get(browse))
        .route("/compose", post(compose))
        .route("/experience", post(experience))
        .with_state(state)
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(str::trim)
}

async fn get_views(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let principal = state.authenticate(bearer(&headers))?;
    {
        let shared = state.shared.read().await;
        if !shared.needs_refresh(&id) {
            return Ok(Json(shared.views(&principal, &id)?).into_response());
        }
    }
    let mut shared = state.shared.write().await;
    shared.refresh(&id, Utc::now())?;
    Ok(Json(shared.views(&principal, &id)?).into_response())
}

async fn post_form(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: String,
) -> Result<Response, ApiError> {
    let principal = state.authenticate(bearer(&headers))?;
    let content: SubmissionContent = parse_body(&body)?;
    let accepted = state
        .shared
        .write()
        .await
        .submit(&principal, &id, content, Utc::now())?;
    Ok(Json(accepted).into_response())
}

async fn get_catena(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let principal = state.authenticate(bearer(&headers))?;
    let catena = state.shared.read().await.get_catena(&principal, &id)?;
    Ok(Json(catena).into_response())
}

async fn put_catena(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: String,
) -> Result<Response, ApiError> {
    let principal = state.authenticate(bearer(&headers))?;
    let saved = state.shared.write().await.put_catena(&principal, &id, &body)?;
    let status = if saved.created {
        StatusCode::CREATED
    } else {
        StatusCode::OK
    };
    Ok((status, Json(saved)).into_response())
}

async fn delete_catena(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let principal = state.authenticate(bearer(&headers))?;
    state.shared.write().await.delete_catena(&principal, &id)?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

#[derive(Debug, Deserialize)]
struct BrowseQuery {
    #[serde(default)]
    tags: Option<String>,
}

async fn browse(
    State(state): State<AppState>,
    Path(kind): Path<String>,
    Query(q): Query<BrowseQuery>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    state.authenticate(bearer(&headers))?;
    let tags: Vec<String> = q
        .tags
        .iter()
        .flat_map(|t| t.split(','))
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect();
    let records = state.shared.read().await.browse(&kind, &tags)?;
    Ok(Json(records).into_response())
}

async fn compose(State(state): State<AppState>, headers: HeaderMap, body: String) -> Result<Response, ApiError> {
    let principal = state.authenticate(bearer(&headers))?;
    let req: ComposeRequest = parse_body(&body)?;
    let result = state.shared.read().await.compose(&principal, &req)?;
    Ok(Json(result).into_response())
}

async fn experience(State(state): State<AppState>, headers: HeaderMap, body: String) -> Result<Response, ApiError> {
    let principal = state.authenticate(bearer(&headers))?;
    let req: ExperienceRequest = parse_body(&body)?;
    let recorded = state.shared.write().await.record_experience(&principal, &req)?;
    Ok((StatusCode::CREATED, Json(recorded)).into_response())
}
