//! Edits applied to a loaded model and its material, and the shared image
//! path used by every renderer front end.

use serde::{Deserialize, Serialize};

use crate::camera::CameraView;
use crate::error::{Error, Result};
use crate::model::{HairModel, ScatterParams};
use crate::raster::{self, FrameBuffer, LightPassConfig, Payload, PrimitiveSet, RenderConfig};
use crate::scatter::{self, LightRig, LightSource};
use crate::sh;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EditCommand {
    /// Keep `ceil(fraction · segments)` segments of each selected strand.
    Cut {
        fraction: f64,
        #[serde(default)]
        strands: Option<Vec<usize>>,
    },
    /// Multiply (`scale`) or replace (`color`) the base color.
    Recolor {
        #[serde(default)]
        scale: Option<[f64; 3]>,
        #[serde(default)]
        color: Option<[f64; 3]>,
        #[serde(default)]
        strands: Option<Vec<usize>>,
    },
    Roughness {
        value: f64,
    },
    Shift {
        value: f64,
    },
    Eta {
        value: f64,
    },
    Lobes {
        scale: [f64; 3],
    },
    Lights {
        lights: Vec<LightSource>,
    },
}

fn check_strands(ids: &Option<Vec<usize>>, n: usize) -> Result<()> {
    if let Some(ids) = ids {
        if let Some(bad) = ids.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidParam(format!("strand id {bad} out of range (model has {n} strands)")));
        }
    }
    Ok(())
}

fn selected(ids: &Option<Vec<usize>>, n: usize) -> Vec<bool> {
    match ids {
        None => vec![true; n],
        Some(ids) => {
            let mut sel = vec![false; n];
            ids.iter().for_each(|&i| sel[i] = true);
            sel
        }
    }
}

fn finite3(v: &[f64; 3], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite() && *x >= 0.0) {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("{what} must be finite and non-negative")))
    }
}

impl EditCommand {
    /// Check the payload against the current model without applying it.
    pub fn validate(&self, model: &HairModel, params: &ScatterParams) -> Result<()> {
        let n = model.strands.len();
        match self {
            EditCommand::Cut { fraction, strands } => {
                if !(0.0..=1.0).contains(fraction) {
                    return Err(Error::InvalidParam(format!("cut fraction must lie in [0, 1], got {fraction}")));
                }
                check_strands(strands, n)
            }
            EditCommand::Recolor { scale, color, strands } => {
                match (scale, color) {
                    (Some(s), None) => finite3(s, "recolor scale")?,
                    (None, Some(c)) => {
                        finite3(c, "recolor color")?;
                        if c.iter().any(|&x| x > 1.0) {
                            return Err(Error::InvalidParam("recolor color must lie in [0, 1]".into()));
                        }
                    }
                    _ => return Err(Error::InvalidParam("recolor needs exactly one of `scale` or `color`".into())),
                }
                check_strands(strands, n)
            }
            EditCommand::Roughness { value } => ScatterParams { roughness: *value, ..params.clone() }.validate(),
            EditCommand::Shift { value } => ScatterParams { shift: *value, ..params.clone() }.validate(),
            EditCommand::Eta { value } => ScatterParams { eta: *value, ..params.clone() }.validate(),
            EditCommand::Lobes { scale } => ScatterParams { lobe_scale: *scale, ..params.clone() }.validate(),
            EditCommand::Lights { lights } => lights.iter().try_for_each(|l| l.validate()),
        }
    }

    /// Validate, then apply.
    pub fn apply(&self, model: &mut HairModel, params: &mut ScatterParams, lights: &mut Vec<LightSource>) -> Result<()> {
        self.validate(model, params)?;
        match self {
            EditCommand::Cut { fraction, strands } => cut(model, *fraction, strands.as_deref()),
            EditCommand::Recolor { scale, color, strands } => {
                let sel = selected(strands, model.strands.len());
                for (s, _) in model.strands.iter_mut().zip(&sel).filter(|(_, &k)| k) {
                    for g in &mut s.segments {
                        let b = sh::dc_color(&g.sh);
                        let c = match (scale, color) {
                            (Some(k), _) => std::array::from_fn(|ch| b[ch] * k[ch]),
                            (_, Some(c)) => *c,
                            _ => unreachable!(),
                        };
                        for (ch, v) in c.iter().enumerate() {
                            g.sh[0][ch] = sh::dc_from_color(*v);
                        }
                    }
                }
                model.touch();
            }
            EditCommand::Roughness { value } => params.roughness = *value,
            EditCommand::Shift { value } => params.shift = *value,
            EditCommand::Eta { value } => params.eta = *value,
            EditCommand::Lobes { scale } => params.lobe_scale = *scale,
            EditCommand::Lights { lights: l } => lights.clone_from(l),
        }
        Ok(())
    }
}

/// Shorten strands to `ceil(fraction · segments)` segments; the root is
/// always kept. `strands` restricts the cut to the listed indices.
pub fn cut(model: &mut HairModel, fraction: f64, strands: Option<&[usize]>) {
    let f = fraction.clamp(0.0, 1.0);
    let sel = selected(&strands.map(|s| s.to_vec()), model.strands.len());
    for (s, _) in model.strands.iter_mut().zip(&sel).filter(|(_, &k)| k) {
        let keep = (f * s.segments.len() as f64).ceil() as usize;
        s.segments.truncate(keep);
    }
    model.touch();
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderMode {
    #[default]
    Color,
    Relight,
    Orientation,
}

impl std::str::FromStr for RenderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "color" => Ok(Self::Color),
            "relight" => Ok(Self::Relight),
            "orientation" => Ok(Self::Orientation),
            _ => Err(Error::InvalidParam(format!("unknown render mode `{s}`"))),
        }
    }
}

/// One image of `model`: SH color, relit under `lights` (the light pass
/// is run here), or the orientation map shown as `(½(1+x), ½(1+y), 0)`.
pub fn render_image(
    model: &HairModel,
    cam: &CameraView,
    mode: RenderMode,
    lights: &[LightSource],
    params: &ScatterParams,
    rcfg: &RenderConfig,
    lcfg: &LightPassConfig,
) -> Result<FrameBuffer> {
    cam.validate()?;
    match mode {
        RenderMode::Color => Ok(raster::render_model(model, cam, Payload::ShColor, rcfg).frame),
        RenderMode::Relight => {
            lights.iter().try_for_each(|l| l.validate())?;
            let rig = LightRig::compute(model, lights, lcfg)?;
            scatter::relight(model, cam, &rig, params, rcfg)
        }
        RenderMode::Orientation => {
            let set = PrimitiveSet::from_model(model, true);
            let (o, fwd) = raster::render_orientation(&set, cam, rcfg);
            let mut frame = fwd.frame;
            for px in 0..frame.pixel_count() {
                frame.color[px] = if o.valid[px] {
                    [0.5 * (1.0 + o.dir[px][0]), 0.5 * (1.0 + o.dir[px][1]), 0.0]
                } else {
                    [0.0; 3]
                };
            }
            Ok(frame)
        }
    }
}
