//! JSON payloads. Rasters travel as base64-encoded binary PGM (P5).

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use facemanifold::shadow::{BlendMode, ShadowOverlay};
use facemanifold::sketch::ComponentKind;
use facemanifold::{SketchRaster, Stroke};
use serde::{Deserialize, Serialize};

use crate::session::{SessionConfig, SessionResult, SettingsUpdate, Snapshot, Synthesis};
use crate::ServiceError;

pub fn pgm_base64(r: &SketchRaster) -> String {
    STANDARD.encode(r.to_pgm())
}

pub fn raster_from_base64(s: &str) -> Result<SketchRaster, ServiceError> {
    let bytes = STANDARD
        .decode(s)
        .map_err(|e| ServiceError::BadRequest(format!("bad base64 raster: {e}")))?;
    Ok(SketchRaster::from_pgm(&bytes)?)
}

/// Provenance as a P5 image with intensity `50 × component index`.
pub fn provenance_pgm(width: usize, height: usize, kinds: &[ComponentKind]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(kinds.iter().map(|k| (k.index() * 50) as u8));
    out
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ShadowModeDto {
    InverseDistance,
    Uniform,
}

impl From<ShadowModeDto> for BlendMode {
    fn from(m: ShadowModeDto) -> Self {
        match m {
            ShadowModeDto::InverseDistance => BlendMode::InverseDistance,
            ShadowModeDto::Uniform => BlendMode::Uniform,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub tag_filter: Option<String>,
    #[serde(default)]
    pub auto_update: Option<bool>,
    #[serde(default)]
    pub wb: Option<[f64; 5]>,
    #[serde(default)]
    pub shadow_mode: Option<ShadowModeDto>,
}

impl From<CreateSessionRequest> for SessionConfig {
    fn from(r: CreateSessionRequest) -> Self {
        SessionConfig {
            k: r.k,
            tag_filter: r.tag_filter,
            auto_update: r.auto_update,
            weights: r.wb,
            shadow_mode: r.shadow_mode.map(Into::into),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CreateSessionResponse {
    pub id: String,
    pub revision: u64,
    pub k: usize,
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StrokeRequest {
    pub points: Vec<[f64; 2]>,
    pub width: f64,
    #[serde(default)]
    pub erase: bool,
}

impl From<&StrokeRequest> for Stroke {
    fn from(r: &StrokeRequest) -> Self {
        let points = r.points.iter().map(|p| (p[0], p[1])).collect();
        if r.erase {
            Stroke::eraser(points, r.width)
        } else {
            Stroke::new(points, r.width)
        }
    }
}

impl From<&Stroke> for StrokeRequest {
    fn from(s: &Stroke) -> Self {
        StrokeRequest {
            points: s.points.iter().map(|&(x, y)| [x, y]).collect(),
            width: s.width,
            erase: s.erase,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct WeightsRequest {
    pub wb: [f64; 5],
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SettingsRequest {
    #[serde(default)]
    pub k: Option<usize>,
    /// Empty string clears the filter.
    #[serde(default)]
    pub tag_filter: Option<String>,
    #[serde(default)]
    pub auto_update: Option<bool>,
}

impl From<SettingsRequest> for SettingsUpdate {
    fn from(r: SettingsRequest) -> Self {
        SettingsUpdate {
            k: r.k,
            tag_filter: r.tag_filter.map(|t| if t.is_empty() { None } else { Some(t) }),
            auto_update: r.auto_update,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RevisionResponse {
    pub revision: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SessionStateResponse {
    pub id: String,
    pub revision: u64,
    pub k: usize,
    pub tag_filter: Option<String>,
    pub auto_update: bool,
    pub wb: [f64; 5],
    pub canvas: String,
}

impl SessionStateResponse {
    pub fn new(id: String, s: &Snapshot) -> Self {
        Self {
            id,
            revision: s.revision,
            k: s.k,
            tag_filter: s.tag_filter.clone(),
            auto_update: s.auto_update,
            wb: s.weights,
            canvas: pgm_base64(&s.canvas),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ComponentShadowDto {
    pub component: String,
    pub blank: bool,
    pub neighbor_ids: Vec<u64>,
    pub weights: Vec<f64>,
    pub raster: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ShadowResponse {
    pub revision: u64,
    pub k: usize,
    pub composite: String,
    pub components: Vec<ComponentShadowDto>,
}

impl ShadowResponse {
    pub fn new(revision: u64, s: &ShadowOverlay) -> Self {
        Self {
            revision,
            k: s.k,
            composite: pgm_base64(&s.composite),
            components: s
                .components
                .iter()
                .map(|c| ComponentShadowDto {
                    component: c.component.name().to_string(),
                    blank: c.blank_query,
                    neighbor_ids: c.neighbor_ids.clone(),
                    weights: c.weights.clone(),
                    raster: pgm_base64(&c.raster),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ComponentNeighborsDto {
    pub component: String,
    pub neighbor_ids: Vec<u64>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SynthesisResponse {
    pub revision: u64,
    pub width: usize,
    pub height: usize,
    pub preview: String,
    pub provenance: String,
    pub components: Vec<ComponentNeighborsDto>,
    /// Channel 0 of the fused canvas before clamping, row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<Vec<f64>>,
}

impl SynthesisResponse {
    pub fn new(s: &Synthesis, include_raw: bool) -> Self {
        let c = &s.reconstruction.canvas;
        Self {
            revision: s.revision,
            width: c.width,
            height: c.height,
            preview: pgm_base64(&s.reconstruction.preview),
            provenance: STANDARD.encode(provenance_pgm(c.width, c.height, &c.provenance)),
            components: ComponentKind::ALL
                .into_iter()
                .map(|k| ComponentNeighborsDto {
                    component: k.name().to_string(),
                    neighbor_ids: s.neighbor_ids[k.index()].clone(),
                    weights: s.neighbor_weights[k.index()].clone(),
                })
                .collect(),
            raw: include_raw.then(|| c.channel(0).to_vec()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExportRequest {
    pub path: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExportResponse {
    pub revision: u64,
    pub files: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ErrorResponse {
    pub error: String,
}

/// Messages pushed to WebSocket clients.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello { revision: u64 },
    Update { revision: u64, shadow: ShadowResponse, synthesis: SynthesisResponse },
    Ack { revision: u64 },
    Error { message: String },
}

impl ServerMessage {
    pub fn update(r: &SessionResult) -> Self {
        ServerMessage::Update {
            revision: r.revision,
            shadow: ShadowResponse::new(r.revision, &r.shadow),
            synthesis: SynthesisResponse::new(&r.synthesis, false),
        }
    }
}

/// Messages accepted from WebSocket clients.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Stroke(StrokeRequest),
    Weights(WeightsRequest),
    Convert,
}
