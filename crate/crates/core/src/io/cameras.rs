//! Camera rigs as JSON: an array of
//! `{id, width, height, fx, fy, cx, cy, world_to_camera: [16 floats, row-major]}`.

use std::path::Path;

use nalgebra::Matrix4;
use serde_json::Value;

use crate::camera::{CameraRecord, CameraView};
use crate::error::{Error, Result};

const FIELDS: [&str; 8] = ["id", "width", "height", "fx", "fy", "cx", "cy", "world_to_camera"];

impl CameraView {
    pub(crate) fn to_record(&self) -> CameraRecord {
        CameraRecord {
            id: self.id,
            width: self.width,
            height: self.height,
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            world_to_camera: (0..16).map(|i| self.world_to_camera[(i / 4, i % 4)]).collect(),
        }
    }

    pub(crate) fn from_record(r: CameraRecord) -> Result<Self> {
        if r.world_to_camera.len() != 16 {
            return Err(Error::InvalidCamera(format!(
                "world_to_camera needs 16 values, got {}",
                r.world_to_camera.len()
            )));
        }
        let cam = CameraView {
            id: r.id,
            width: r.width,
            height: r.height,
            fx: r.fx,
            fy: r.fy,
            cx: r.cx,
            cy: r.cy,
            world_to_camera: Matrix4::from_row_slice(&r.world_to_camera),
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Parse one camera object, reporting the first missing field by name.
    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Parse("camera must be a JSON object".into()))?;
        if let Some(f) = FIELDS.iter().find(|f| !obj.contains_key(**f)) {
            return Err(Error::MissingField((*f).to_string()));
        }
        let rec: CameraRecord = serde_json::from_value(v.clone()).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_record(rec)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self.to_record()).expect("camera serializes")
    }
}

pub fn parse_cameras(text: &str) -> Result<Vec<CameraView>> {
    let v: Value = serde_json::from_str(text)?;
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Parse("camera file must hold a JSON array".into()))?;
    arr.iter().map(CameraView::from_json).collect()
}

pub fn cameras_to_string(cams: &[CameraView]) -> String {
    let recs: Vec<CameraRecord> = cams.iter().map(|c| c.to_record()).collect();
    serde_json::to_string_pretty(&recs).expect("cameras serialize")
}

pub fn read_cameras(path: &Path) -> Result<Vec<CameraView>> {
    parse_cameras(&super::read_text(path)?)
}

pub fn write_cameras(cams: &[CameraView], path: &Path) -> Result<()> {
    std::fs::write(path, cameras_to_string(cams))?;
    Ok(())
}
