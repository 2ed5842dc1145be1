use super::frame::{FrameBuffer, NO_SPLAT};
use super::{kernel, RenderConfig, Splat2D};
use crate::exec::Exec;

/// Per-tile splat lists, each sorted by (depth, source id).
#[derive(Clone, Debug, PartialEq)]
pub struct TileBins {
    pub width: usize,
    pub height: usize,
    pub tile: usize,
    pub tiles_x: usize,
    pub tiles_y: usize,
    pub lists: Vec<Vec<u32>>,
}

/// Inclusive pixel range covered by a splat's 3σ box, clipped to the image.
pub(crate) fn pixel_rect(s: &Splat2D, width: usize, height: usize) -> Option<(usize, usize, usize, usize)> {
    let x0 = (s.mean.x - s.extent.x).ceil().max(0.0);
    let x1 = (s.mean.x + s.extent.x).floor().min(width as f64 - 1.0);
    let y0 = (s.mean.y - s.extent.y).ceil().max(0.0);
    let y1 = (s.mean.y + s.extent.y).floor().min(height as f64 - 1.0);
    (x0 <= x1 && y0 <= y1).then_some((x0 as usize, x1 as usize, y0 as usize, y1 as usize))
}

impl TileBins {
    pub fn build(splats: &[Splat2D], width: usize, height: usize, tile: usize, exec: Exec) -> Self {
        let tile = tile.max(1);
        let tiles_x = width.div_ceil(tile);
        let tiles_y = height.div_ceil(tile);
        let mut lists = vec![Vec::new(); tiles_x * tiles_y];
        for (k, s) in splats.iter().enumerate() {
            let Some((x0, x1, y0, y1)) = pixel_rect(s, width, height) else {
                continue;
            };
            for ty in y0 / tile..=y1 / tile {
                for tx in x0 / tile..=x1 / tile {
                    lists[ty * tiles_x + tx].push(k as u32);
                }
            }
        }
        exec.for_each_mut(&mut lists, |_, list| {
            list.sort_by(|&a, &b| {
                let (sa, sb) = (&splats[a as usize], &splats[b as usize]);
                sa.depth.total_cmp(&sb.depth).then(sa.source_id.cmp(&sb.source_id))
            })
        });
        Self {
            width,
            height,
            tile,
            tiles_x,
            tiles_y,
            lists,
        }
    }

    pub fn tile_count(&self) -> usize {
        self.lists.len()
    }

    /// Pixel index range `(x0, x1, y0, y1)` (exclusive ends) of tile `t`.
    pub fn tile_pixels(&self, t: usize) -> (usize, usize, usize, usize) {
        let tx = t % self.tiles_x;
        let ty = t / self.tiles_x;
        let x0 = tx * self.tile;
        let y0 = ty * self.tile;
        (
            x0,
            (x0 + self.tile).min(self.width),
            y0,
            (y0 + self.tile).min(self.height),
        )
    }
}

#[derive(Default)]
struct TileOut {
    color: Vec<[f64; 3]>,
    alpha: Vec<f64>,
    depth: Vec<f64>,
    top: Vec<u32>,
    top_w: Vec<f64>,
    count: Vec<u32>,
}

pub(crate) fn composite(splats: &[Splat2D], bins: &TileBins, cfg: &RenderConfig) -> FrameBuffer {
    let outs = cfg.exec.map(bins.tile_count(), |t| {
        let (x0, x1, y0, y1) = bins.tile_pixels(t);
        let list = &bins.lists[t];
        let n = (x1 - x0) * (y1 - y0);
        let mut out = TileOut {
            color: Vec::with_capacity(n),
            alpha: Vec::with_capacity(n),
            depth: Vec::with_capacity(n),
            top: Vec::with_capacity(n),
            top_w: Vec::with_capacity(n),
            count: Vec::with_capacity(n),
        };
        for y in y0..y1 {
            for x in x0..x1 {
                let (px, py) = (x as f64, y as f64);
                let mut t_acc = 1.0;
                let mut c = [0.0; 3];
                let mut depth = 0.0;
                let mut top = NO_SPLAT;
                let mut top_w = 0.0;
                let mut count = 0u32;
                for &k in list {
                    let s = &splats[k as usize];
                    let g = s.kernel_at(px, py);
                    if g <= 0.0 {
                        continue;
                    }
                    let w = s.opacity * g;
                    let tw = t_acc * w;
                    for ch in 0..3 {
                        c[ch] += tw * s.payload[ch];
                    }
                    depth += tw * s.depth;
                    if w > top_w {
                        top_w = w;
                        top = k;
                    }
                    count += 1;
                    t_acc *= 1.0 - w;
                    if t_acc < cfg.early_stop {
                        break;
                    }
                }
                for ch in 0..3 {
                    c[ch] += t_acc * cfg.background[ch];
                }
                out.color.push(c);
                out.alpha.push(1.0 - t_acc);
                out.depth.push(depth);
                out.top.push(top);
                out.top_w.push(top_w);
                out.count.push(count);
            }
        }
        out
    });
    let mut frame = FrameBuffer::new(bins.width as u32, bins.height as u32);
    for (t, out) in outs.into_iter().enumerate() {
        let (x0, x1, y0, y1) = bins.tile_pixels(t);
        let mut i = 0;
        for y in y0..y1 {
            for x in x0..x1 {
                let p = y * bins.width + x;
                frame.color[p] = out.color[i];
                frame.alpha[p] = out.alpha[i];
                frame.depth[p] = out.depth[i];
                frame.top[p] = out.top[i];
                frame.top_weight[p] = out.top_w[i];
                frame.contributors[p] = out.count[i];
                i += 1;
            }
        }
    }
    frame
}

/// Contributors of one pixel in compositing order, replaying the forward
/// pass: `(position in list, kernel, weight, transmittance before it)`.
pub(crate) fn pixel_contributors(
    splats: &[Splat2D],
    list: &[u32],
    px: f64,
    py: f64,
    early_stop: f64,
    out: &mut Vec<(u32, f64, f64, f64)>,
) -> f64 {
    out.clear();
    let mut t_acc = 1.0;
    for (j, &k) in list.iter().enumerate() {
        let s = &splats[k as usize];
        let g = kernel(s.mahalanobis(px, py).0);
        if g <= 0.0 {
            continue;
        }
        let w = s.opacity * g;
        out.push((j as u32, g, w, t_acc));
        t_acc *= 1.0 - w;
        if t_acc < early_stop {
            break;
        }
    }
    t_acc
}
