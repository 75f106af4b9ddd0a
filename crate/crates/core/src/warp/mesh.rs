use std::io::Write;
use std::path::Path;

use super::sample_flow;
use crate::flowcore::{FlowField, ImageFrame};
use crate::{Error, Result};

/// Points advected by the flow, plus grid edges for drawing overlays.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedMesh {
    points: Vec<(f64, f64)>,
    edges: Vec<(usize, usize)>,
    /// Set once a point has been clamped back into the frame.
    lost: Vec<bool>,
}

impl TrackedMesh {
    pub fn new(points: Vec<(f64, f64)>, edges: Vec<(usize, usize)>) -> Result<Self> {
        if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::NonFinite("mesh point is not finite".into()));
        }
        if let Some(e) = edges.iter().find(|e| e.0 >= points.len() || e.1 >= points.len()) {
            return Err(Error::Dimension(format!("edge {:?} references a point beyond {}", e, points.len())));
        }
        let lost = vec![false; points.len()];
        Ok(TrackedMesh { points, edges, lost })
    }

    /// Regular `nx` x `ny` grid inset by `margin` pixels, 4-connected.
    pub fn grid(width: usize, height: usize, nx: usize, ny: usize, margin: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidConfig("mesh grid needs at least 2x2 points".into()));
        }
        let (w, h) = (width as f64 - 1.0 - 2.0 * margin, height as f64 - 1.0 - 2.0 * margin);
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::Dimension(format!("margin {margin} leaves no room in {width}x{height}")));
        }
        let mut points = Vec::with_capacity(nx * ny);
        let mut edges = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                points.push((margin + w * i as f64 / (nx - 1) as f64, margin + h * j as f64 / (ny - 1) as f64));
                let id = j * nx + i;
                if i + 1 < nx {
                    edges.push((id, id + 1));
                }
                if j + 1 < ny {
                    edges.push((id, id + nx));
                }
            }
        }
        Self::new(points, edges)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn lost(&self) -> &[bool] {
        &self.lost
    }

    fn advect(&self, flow: &FlowField) -> TrackedMesh {
        let (maxx, maxy) = ((flow.width() - 1) as f64, (flow.height() - 1) as f64);
        let mut next = self.clone();
        for (p, lost) in next.points.iter_mut().zip(next.lost.iter_mut()) {
            let (du, dv) = sample_flow(flow, p.0, p.1);
            let (x, y) = (p.0 + du, p.1 + dv);
            let (cx, cy) = (x.clamp(0.0, maxx), y.clamp(0.0, maxy));
            if cx != x || cy != y {
                *lost = true;
            }
            *p = (cx, cy);
        }
        next
    }
}

/// Mesh positions at every frame; entry 0 is the initial mesh.
#[derive(Debug, Clone)]
pub struct MeshTrack {
    pub meshes: Vec<TrackedMesh>,
}

/// Forward point advection: `p' = p + w(p)` with the inter-frame flow sampled bilinearly.
pub fn track_mesh(mesh: &TrackedMesh, flows: &[FlowField]) -> Result<MeshTrack> {
    if let Some(f) = flows.first() {
        let (w, h) = (f.width() as f64, f.height() as f64);
        if mesh.points.iter().any(|p| p.0 < 0.0 || p.1 < 0.0 || p.0 > w - 1.0 || p.1 > h - 1.0) {
            return Err(Error::Dimension("initial mesh points must lie inside the frame".into()));
        }
        if let Some(bad) = flows.iter().find(|g| !g.same_size(f)) {
            return Err(Error::Dimension(format!("flow sequence mixes {}x{} and {}x{}", f.width(), f.height(), bad.width(), bad.height())));
        }
    }
    let mut meshes = Vec::with_capacity(flows.len() + 1);
    meshes.push(mesh.clone());
    for flow in flows {
        let next = meshes.last().expect("nonempty").advect(flow);
        meshes.push(next);
    }
    Ok(MeshTrack { meshes })
}

/// Mean point distance between two tracks, per frame.
pub fn mesh_drift(track: &MeshTrack, reference: &MeshTrack) -> Result<Vec<f64>> {
    if track.meshes.len() != reference.meshes.len() {
        return Err(Error::Dimension("tracks have different lengths".into()));
    }
    track
        .meshes
        .iter()
        .zip(&reference.meshes)
        .map(|(a, b)| {
            if a.points.len() != b.points.len() {
                return Err(Error::Dimension("meshes have different point counts".into()));
            }
            let total: f64 = a.points.iter().zip(&b.points).map(|(p, q)| (p.0 - q.0).hypot(p.1 - q.1)).sum();
            Ok(total / a.points.len().max(1) as f64)
        })
        .collect()
}

/// CSV with header `frame,point_id,x,y`.
pub fn write_trajectory_csv(track: &MeshTrack, first_frame: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("frame,point_id,x,y\n");
    for (k, mesh) in track.meshes.iter().enumerate() {
        for (id, p) in mesh.points.iter().enumerate() {
            out.push_str(&format!("{},{},{:.6},{:.6}\n", first_frame + k, id, p.0, p.1));
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Draws mesh edges (green) and lost points (red) over an RGB copy of `frame`.
pub fn render_mesh_overlay(frame: &ImageFrame, mesh: &TrackedMesh) -> ImageFrame {
    let (w, h) = (frame.width(), frame.height());
    let mut rgb: Vec<f32> =
        if frame.channels() == 3 { frame.data().to_vec() } else { frame.data().iter().flat_map(|&g| [g, g, g]).collect() };
    let mut plot = |x: f64, y: f64, color: [f32; 3]| {
        let (xi, yi) = (x.round(), y.round());
        if xi >= 0.0 && yi >= 0.0 && (xi as usize) < w && (yi as usize) < h {
            let i = (yi as usize * w + xi as usize) * 3;
            rgb[i..i + 3].copy_from_slice(&color);
        }
    };
    for &(a, b) in &mesh.edges {
        let (p, q) = (mesh.points[a], mesh.points[b]);
        let steps = ((q.0 - p.0).abs().max((q.1 - p.1).abs()).ceil() as usize).max(1);
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            plot(p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1), [0.1, 0.9, 0.2]);
        }
    }
    for (p, &lost) in mesh.points.iter().zip(&mesh.lost) {
        let color = if lost { [1.0, 0.1, 0.1] } else { [1.0, 0.9, 0.1] };
        for (dx, dy) in [(0.0, 0.0), (1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            plot(p.0 + dx, p.1 + dy, color);
        }
    }
    ImageFrame::new(w, h, 3, rgb).expect("overlay samples stay in range")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_flow_keeps_mesh_still() {
        let mesh = TrackedMesh::grid(32, 24, 4, 3, 2.0).unwrap();
        let track = track_mesh(&mesh, &vec![FlowField::zeros(32, 24); 5]).unwrap();
        assert_eq!(track.meshes.len(), 6);
        assert!(track.meshes.iter().all(|m| m.points() == mesh.points()));
    }

    #[test]
    fn constant_flow_shifts_points() {
        let mesh = TrackedMesh::grid(64, 32, 3, 3, 4.0).unwrap();
        let flows = vec![FlowField::constant(64, 32, 1.0, 0.0).unwrap(); 10];
        let track = track_mesh(&mesh, &flows).unwrap();
        for (p, q) in mesh.points().iter().zip(track.meshes[10].points()) {
            if p.0 + 10.0 <= 63.0 {
                assert_eq!(q.0, p.0 + 10.0);
                assert_eq!(q.1, p.1);
            }
        }
    }

    #[test]
    fn rotation_orbit_is_preserved() {
        let n = 101;
        let c = 50.0;
        let (s, co) = 1f64.to_radians().sin_cos();
        let flow = FlowField::from_fn(n, n, |x, y| {
            let (dx, dy) = (x as f64 - c, y as f64 - c);
            (co * dx - s * dy - dx, s * dx + co * dy - dy)
        })
        .unwrap();
        let mesh = TrackedMesh::new(vec![(c + 30.0, c)], vec![]).unwrap();
        let track = track_mesh(&mesh, &vec![flow; 90]).unwrap();
        let p = track.meshes[90].points()[0];
        // after 90 one-degree steps the point sits at 90 degrees on its orbit
        assert!(((p.0 - c) - 0.0).abs() < 0.1 && ((p.1 - c) - 30.0).abs() < 0.1, "{p:?}");
    }

    #[test]
    fn leaving_points_are_clamped_and_flagged() {
        let mesh = TrackedMesh::grid(16, 16, 2, 2, 1.0).unwrap();
        let track = track_mesh(&mesh, &[FlowField::constant(16, 16, 100.0, 0.0).unwrap()]).unwrap();
        let last = &track.meshes[1];
        assert!(last.points().iter().all(|p| p.0 == 15.0 && p.1.is_finite()));
        assert!(last.lost().iter().all(|&l| l));
    }

    #[test]
    fn invalid_meshes_rejected() {
        assert!(TrackedMesh::new(vec![(0.0, f64::NAN)], vec![]).is_err());
        assert!(TrackedMesh::new(vec![(0.0, 0.0)], vec![(0, 1)]).is_err());
        let outside = TrackedMesh::new(vec![(-1.0, 0.0)], vec![]).unwrap();
        assert!(track_mesh(&outside, &[FlowField::zeros(4, 4)]).is_err());
    }

    #[test]
    fn trajectory_csv_has_one_row_per_point_and_frame() {
        let mesh = TrackedMesh::grid(8, 8, 2, 2, 1.0).unwrap();
        let track = track_mesh(&mesh, &vec![FlowField::zeros(8, 8); 2]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_trajectory_csv(&track, 10, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 4);
        assert!(text.lines().nth(1).unwrap().starts_with("10,0,"));
    }
}
