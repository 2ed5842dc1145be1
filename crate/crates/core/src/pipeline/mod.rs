//! The staged reconstruction pipeline: oriented field fit, strand tracing,
//! and fine optimization of the chained strand model.

mod fine;
mod ogf;
mod strands;

pub use fine::{run_fine, view_gradient, FineConfig, FineReport, ViewLoss};
pub use ogf::{field_from_model, field_to_model, fit_ogf, init_field, OgfConfig, OgfReport};
pub use strands::{refine_geo, resample, strands_from_field, trace_strand, StrandConfig};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::camera::CameraView;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::gabor::{gabor_orientation, GaborConfig, Gray};
use crate::io;
use crate::loss::LossWeights;
use crate::model::ScatterParams;
use crate::optim::OptimConfig;
use crate::raster::{LightPassConfig, OrientationImage, Planes, RenderConfig};

/// One calibrated training image.
#[derive(Clone, Debug)]
pub struct TrainView {
    pub cam: CameraView,
    pub image: Vec<[f64; 3]>,
    pub alpha: Vec<f64>,
    pub orientation: Option<OrientationImage>,
}

impl TrainView {
    pub fn validate(&self) -> Result<()> {
        let n = self.cam.pixel_count();
        for (what, len) in [("image", self.image.len()), ("alpha", self.alpha.len())] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: format!("{n} pixels in {what} of camera {}", self.cam.id),
                    got: len.to_string(),
                });
            }
        }
        if let Some(o) = &self.orientation {
            if o.width != self.cam.width || o.height != self.cam.height {
                return Err(Error::DimensionMismatch {
                    expected: format!("{}x{} orientation map", self.cam.width, self.cam.height),
                    got: format!("{}x{}", o.width, o.height),
                });
            }
        }
        Ok(())
    }
}

/// Input locations. Relative paths are resolved against the directory of
/// the config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataPaths {
    pub cameras: Option<PathBuf>,
    /// Directory holding `<camera id>.png` per view.
    pub images: Option<PathBuf>,
    /// Directory of grayscale `<id>.png` mattes; when absent the image
    /// alpha channel is used.
    pub alphas: Option<PathBuf>,
    /// Directory of `<id>.ghfb` orientation planes; computed with the
    /// Gabor bank when absent.
    pub orientations: Option<PathBuf>,
    pub head_mesh: Option<PathBuf>,
    pub hair_mesh: Option<PathBuf>,
    pub scalp_mesh: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub field: Option<PathBuf>,
    pub lights: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub data: DataPaths,
    pub weights: LossWeights,
    pub optim: OptimConfig,
    pub render: RenderConfig,
    pub scatter: ScatterParams,
    pub light_pass: LightPassConfig,
    pub gabor: GaborConfig,
    pub ogf: OgfConfig,
    pub strands: StrandConfig,
    pub fine: FineConfig,
    pub sh_degree: usize,
    pub diameter: f64,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            data: DataPaths::default(),
            weights: LossWeights::default(),
            optim: OptimConfig::default(),
            render: RenderConfig::default(),
            scatter: ScatterParams::default(),
            light_pass: LightPassConfig::default(),
            gabor: GaborConfig::default(),
            ogf: OgfConfig::default(),
            strands: StrandConfig::default(),
            fine: FineConfig::default(),
            sh_degree: 0,
            diameter: crate::model::DEFAULT_DIAMETER,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        cfg.resolve(base);
        cfg.render.exec = cfg.exec;
        cfg.light_pass.exec = cfg.exec;
        cfg.gabor.exec = cfg.exec;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = io::read_text(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    fn resolve(&mut self, base: &Path) {
        let d = &mut self.data;
        for p in [
            &mut d.cameras,
            &mut d.images,
            &mut d.alphas,
            &mut d.orientations,
            &mut d.head_mesh,
            &mut d.hair_mesh,
            &mut d.scalp_mesh,
            &mut d.model,
            &mut d.field,
            &mut d.lights,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.optim.validate()?;
        self.scatter.validate()?;
        if self.sh_degree > crate::sh::MAX_DEGREE {
            return Err(Error::InvalidParam(format!("sh_degree {} exceeds {}", self.sh_degree, crate::sh::MAX_DEGREE)));
        }
        if !(self.diameter > 0.0 && self.diameter.is_finite()) {
            return Err(Error::InvalidParam("diameter must be positive".into()));
        }
        Ok(())
    }

    pub fn require<'a>(&self, p: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        p.as_deref().ok_or_else(|| Error::MissingField(format!("data.{name}")))
    }
}

/// Read cameras, images, mattes and (if configured) orientation maps.
pub fn load_views(cfg: &PipelineConfig) -> Result<Vec<TrainView>> {
    let cams = io::read_cameras(cfg.require(&cfg.data.cameras, "cameras")?)?;
    let images = cfg.require(&cfg.data.images, "images")?;
    let mut views = Vec::with_capacity(cams.len());
    for cam in cams {
        let name = format!("{}.png", cam.id);
        let img = io::images::read_png(&images.join(&name))?;
        if img.width != cam.width || img.height != cam.height {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} image for camera {}", cam.width, cam.height, cam.id),
                got: format!("{}x{}", img.width, img.height),
            });
        }
        let alpha = match &cfg.data.alphas {
            Some(dir) => io::images::read_gray(&dir.join(&name))?.2,
            None => img.alpha.clone().ok_or_else(|| Error::MissingField(format!("alpha matte for camera {}", cam.id)))?,
        };
        let orientation = match &cfg.data.orientations {
            Some(dir) => Some(OrientationImage::from_planes(&Planes::decode(&io::read_bytes(&dir.join(format!("{}.ghfb", cam.id)))?)?)?),
            None => None,
        };
        let v = TrainView {
            cam,
            image: img.color,
            alpha,
            orientation,
        };
        v.validate()?;
        views.push(v);
    }
    Ok(views)
}

/// Fill in missing orientation maps with the Gabor bank, restricted to
/// pixels whose matte exceeds one half.
pub fn compute_orientations(views: &mut [TrainView], cfg: &GaborConfig) -> Result<()> {
    for v in views.iter_mut().filter(|v| v.orientation.is_none()) {
        let gray = Gray::from_rgb(&v.image, v.cam.width as usize, v.cam.height as usize);
        let mask: Vec<bool> = v.alpha.iter().map(|&a| a > 0.5).collect();
        v.orientation = Some(gabor_orientation(&gray, Some(&mask), cfg)?);
    }
    Ok(())
}

/// Split views into (train, held out) by camera id.
pub fn split_views(views: Vec<TrainView>, holdout: &[u64]) -> (Vec<TrainView>, Vec<TrainView>) {
    views.into_iter().partition(|v| !holdout.contains(&v.cam.id))
}
