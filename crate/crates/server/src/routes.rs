use std::path::PathBuf;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use lungseg::edit::{Stroke, StrokeMode};
use lungseg::fc::{segment_auto, segment_lungs, AffinityParams};
use lungseg::io::{decode_volume, encode_mask, load_volume};
use lungseg::render::{render_slice, DEFAULT_WINDOW_CENTER, DEFAULT_WINDOW_WIDTH};
use lungseg::seeds::{validate_manual_seeds, Provenance, SeedSet};
use lungseg::{Adjacency, HuVolume, Plane, Side, Voxel};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::session::{SessionDescriptor, SideVolumes};
use crate::AppState;

fn parse_json<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::Malformed(e.to_string()))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> lungseg::Result<T> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(ApiError::from)
}

#[derive(Deserialize)]
struct PathSource {
    path: PathBuf,
}

/// Accepts `{"path": …}` as JSON, a multipart form (first file field, or
/// the one named `file`), or the raw bytes of a single-file NIfTI image.
pub async fn create_session(
    State(state): State<AppState>,
    req: Request,
) -> Result<(StatusCode, Json<SessionDescriptor>), ApiError> {
    let content_type = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_ascii_lowercase();
    let volume: HuVolume = if content_type.starts_with("multipart/form-data") {
        let mut form = Multipart::from_request(req, &())
            .await
            .map_err(|e| ApiError::Malformed(e.body_text()))?;
        let mut data: Option<Bytes> = None;
        while let Some(field) = form
            .next_field()
            .await
            .map_err(|e| ApiError::Malformed(e.body_text()))?
        {
            let named_file = field.name() == Some("file");
            if named_file || data.is_none() {
                data = Some(
                    field
                        .bytes()
                        .await
                        .map_err(|e| ApiError::Malformed(e.body_text()))?,
                );
            }
            if named_file {
                break;
            }
        }
        let data = data.ok_or_else(|| ApiError::Malformed("multipart form has no file".into()))?;
        blocking(move || decode_volume(&data)).await?
    } else {
        let body = Bytes::from_request(req, &())
            .await
            .map_err(|e| ApiError::Malformed(e.body_text()))?;
        if content_type.starts_with("application/json") {
            let source: PathSource = parse_json(&body)?;
            blocking(move || load_volume(&source.path)).await?
        } else {
            blocking(move || decode_volume(&body)).await?
        }
    };
    let (_, entry) = state.store.create(volume);
    let descriptor = entry.session.read().await.descriptor();
    log::info!("created session {}", descriptor.session_id);
    Ok((StatusCode::CREATED, Json(descriptor)))
}

pub async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionDescriptor>, ApiError> {
    let entry = state.store.get(&id)?;
    let descriptor = entry.session.read().await.descriptor();
    Ok(Json(descriptor))
}

pub async fn delete_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    if state.store.remove(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::UnknownSession(id))
    }
}

fn default_wc() -> f64 {
    DEFAULT_WINDOW_CENTER
}

fn default_ww() -> f64 {
    DEFAULT_WINDOW_WIDTH
}

#[derive(Deserialize)]
pub struct SliceQuery {
    plane: Plane,
    index: usize,
    #[serde(default = "default_wc")]
    wc: f64,
    #[serde(default = "default_ww")]
    ww: f64,
    #[serde(default)]
    overlay: bool,
}

pub async fn slice(
    State(state): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<SliceQuery>, axum::extract::rejection::QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::Malformed(e.body_text()))?;
    let entry = state.store.get(&id)?;
    let session = entry.session.read().await;
    let overlay = q.overlay.then_some(&session.mask);
    let image = render_slice(&session.volume, overlay, q.plane, q.index, q.wc, q.ww)?;
    let png = image.to_png()?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SegmentMode {
    #[default]
    Auto,
    Seeded,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBody {
    mean: Option<f64>,
    sigma: Option<f64>,
    theta: Option<f64>,
    adjacency: Option<u32>,
}

impl ParamsBody {
    /// Fills unspecified fields with defaults.
    fn resolve(&self) -> Result<(AffinityParams, f64), ApiError> {
        let defaults = AffinityParams::default();
        let adjacency = match self.adjacency {
            None => defaults.adjacency,
            Some(n) => Adjacency::from_count(n).ok_or_else(|| {
                lungseg::Error::InvalidParams(format!("adjacency must be 6 or 26, got {n}"))
            })?,
        };
        Ok((
            AffinityParams {
                mean_hu: self.mean.unwrap_or(defaults.mean_hu),
                sigma_hu: self.sigma.unwrap_or(defaults.sigma_hu),
                adjacency,
            },
            self.theta.unwrap_or(lungseg::fc::DEFAULT_THETA),
        ))
    }
}

#[derive(Debug, Deserialize)]
pub struct SeedsBody {
    #[serde(default)]
    left: Vec<Voxel>,
    #[serde(default)]
    right: Vec<Voxel>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRequest {
    #[serde(default)]
    mode: SegmentMode,
    /// Seeded mode only; defaults to the seeds painted with seed strokes.
    #[serde(default)]
    seeds: Option<SeedsBody>,
    #[serde(default)]
    params: ParamsBody,
}

#[derive(Debug, Serialize)]
pub struct SeedPoint {
    pub side: Side,
    pub voxel: Voxel,
}

#[derive(Debug, Serialize)]
pub struct SegmentResponse {
    pub volumes_ml: SideVolumes,
    pub seeds: Vec<SeedPoint>,
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub elapsed_ms: u64,
}

pub async fn segment(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SegmentResponse>, ApiError> {
    let req: SegmentRequest = if body.iter().all(u8::is_ascii_whitespace) {
        SegmentRequest::default()
    } else {
        parse_json(&body)?
    };
    let (params, theta) = req.params.resolve()?;
    let entry = state.store.get(&id)?;
    let mut session = entry.session.write().await;
    let volume = session.volume.clone();
    let seeds = match req.mode {
        SegmentMode::Auto => None,
        SegmentMode::Seeded => {
            let seeds = match &req.seeds {
                Some(s) => SeedSet::new(s.left.clone(), s.right.clone(), Provenance::ManualClick),
                None => session.pending_seeds.clone(),
            };
            Some(validate_manual_seeds(&volume, seeds)?)
        }
    };
    let started = Instant::now();
    let job = tokio::task::spawn_blocking(move || match seeds {
        None => segment_auto(&volume, &params, theta),
        Some(seeds) => segment_lungs(&volume, &seeds, &params, theta),
    });
    let limit = state.config.segment_timeout;
    let result = tokio::time::timeout(limit, job)
        .await
        .map_err(|_| ApiError::Timeout(limit))?
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    let elapsed_ms = started.elapsed().as_millis() as u64;

    session.set_segmentation(&result, params, theta);
    if req.mode == SegmentMode::Seeded && req.seeds.is_none() {
        session.pending_seeds.left.clear();
        session.pending_seeds.right.clear();
    }
    let seeds = [Side::Left, Side::Right]
        .into_iter()
        .flat_map(|side| {
            result
                .seeds
                .side(side)
                .iter()
                .map(move |&voxel| SeedPoint { side, voxel })
        })
        .collect();
    log::info!("session {id}: segmented in {elapsed_ms} ms");
    Ok(Json(SegmentResponse {
        volumes_ml: session.volumes(),
        seeds,
        provenance: result.seeds.provenance,
        warnings: result.seeds.warnings.clone(),
        elapsed_ms,
    }))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SeedCounts {
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Serialize)]
pub struct EditResponse {
    pub changed: usize,
    pub volume_ml: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_counts: Option<SeedCounts>,
}

pub async fn stroke(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<EditResponse>, ApiError> {
    let stroke: Stroke = parse_json(&body)?;
    let entry = state.store.get(&id)?;
    let mut session = entry.session.write().await;
    let session = &mut *session;
    let response = match stroke.mode {
        StrokeMode::Add | StrokeMode::Delete => {
            let (_, record) = session.history.apply(&mut session.mask, &stroke)?;
            EditResponse {
                changed: record.changed(),
                volume_ml: 0.0,
                seed_counts: None,
            }
        }
        StrokeMode::SeedLeft | StrokeMode::SeedRight => {
            let added = session.stash_seeds(&stroke)?;
            EditResponse {
                changed: added,
                volume_ml: 0.0,
                seed_counts: Some(SeedCounts {
                    left: session.pending_seeds.left.len(),
                    right: session.pending_seeds.right.len(),
                }),
            }
        }
    };
    Ok(Json(EditResponse {
        volume_ml: session.combined_volume_ml(),
        ..response
    }))
}

pub async fn undo(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<EditResponse>, ApiError> {
    let entry = state.store.get(&id)?;
    let mut session = entry.session.write().await;
    let session = &mut *session;
    let record = session
        .history
        .undo(&mut session.mask, None)?
        .ok_or(ApiError::NothingToUndo)?;
    Ok(Json(EditResponse {
        changed: record.changed(),
        volume_ml: session.combined_volume_ml(),
        seed_counts: None,
    }))
}

pub async fn mask(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let entry = state.store.get(&id)?;
    let mask = entry.session.read().await.mask.clone();
    let bytes = blocking(move || encode_mask(&mask, true)).await?;
    let disposition = format!("attachment; filename=\"{id}_mask.nii.gz\"");
    Ok((
        [
            (header::CONTENT_TYPE, "application/gzip".to_string()),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        bytes,
    )
        .into_response())
}

pub async fn metrics(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SideVolumes>, ApiError> {
    let entry = state.store.get(&id)?;
    let volumes = entry.session.read().await.volumes();
    Ok(Json(volumes))
}
