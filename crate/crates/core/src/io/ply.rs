use std::fmt::Write;

use crate::model::HairModel;

/// ASCII PLY with one vertex per strand node and one polyline edge chain
/// per strand; each vertex carries its segment's base color.
pub fn polylines_to_ply(model: &HairModel) -> String {
    let nodes: Vec<_> = model.strands.iter().map(|s| s.chain_nodes()).collect();
    let nv: usize = nodes.iter().map(|n| n.len()).sum();
    let ne: usize = nodes.iter().map(|n| n.len().saturating_sub(1)).sum();
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {nv}");
    out.push_str("property float x\nproperty float y\nproperty float z\n");
    out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    let _ = writeln!(out, "element edge {ne}");
    out.push_str("property int vertex1\nproperty int vertex2\nend_header\n");
    for (s, ns) in model.strands.iter().zip(&nodes) {
        for (k, p) in ns.iter().enumerate() {
            let seg = s.segments.get(k.min(s.segments.len().saturating_sub(1)));
            let c = seg.map_or([0.0; 3], |g| g.base_color());
            let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            let _ = writeln!(out, "{} {} {} {} {} {}", p.x as f32, p.y as f32, p.z as f32, q(c[0]), q(c[1]), q(c[2]));
        }
    }
    let mut base = 0;
    for ns in &nodes {
        for k in 1..ns.len() {
            let _ = writeln!(out, "{} {}", base + k - 1, base + k);
        }
        base += ns.len();
    }
    out
}
