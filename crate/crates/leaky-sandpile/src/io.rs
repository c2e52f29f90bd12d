//! File emitters: CSV dumps, PPM slices, SVG overlays, run manifests.
//!
//! Float formatting goes through Rust's shortest round-trip `Display`, so a
//! dump reloads bit-exactly and identical runs produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Ellipsoid, Polytope, StarBody};
use crate::green::GreenTable;
use crate::sandpile::SandpileState;
use crate::spectral::BoundarySample;

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// `x_1,...,x_d,color,<label>` rows; colors are 1-based in files.
pub fn write_field_csv(
    path: &Path,
    d: usize,
    label: &str,
    entries: &[(Vec<i32>, usize, f64)],
) -> Result<()> {
    let mut out = String::new();
    for k in 1..=d {
        let _ = write!(out, "x_{k},");
    }
    let _ = writeln!(out, "color,{label}");
    for (x, color, value) in entries {
        for c in x {
            let _ = write!(out, "{c},");
        }
        let _ = writeln!(out, "{},{}", color + 1, value);
    }
    write_file(path, &out)
}

pub fn write_final_csv(path: &Path, state: &SandpileState) -> Result<()> {
    write_field_csv(path, state.d, "mass", &state.sorted_entries())
}

/// Shape curve: `u_1..u_d, radius, gamma`.
pub fn write_shape_csv(
    path: &Path,
    directions: &[Vec<f64>],
    radii: &[f64],
    gammas: &[f64],
) -> Result<()> {
    let d = directions.first().map(|u| u.len()).unwrap_or(0);
    let mut out = String::new();
    for k in 1..=d {
        let _ = write!(out, "u_{k},");
    }
    let _ = writeln!(out, "radius,gamma");
    for ((u, r), g) in directions.iter().zip(radii).zip(gammas) {
        let _ = writeln!(out, "{},{},{}", join_floats(u), r, g);
    }
    write_file(path, &out)
}

/// Boundary sweep: `u_1..u_d, h, t_1..t_d, kkt_residual`.
pub fn write_boundary_csv(path: &Path, sample: &BoundarySample) -> Result<()> {
    let d = sample
        .points
        .first()
        .map(|p| p.u.len())
        .ok_or_else(|| Error::Validation("empty boundary sample".into()))?;
    let mut out = String::new();
    for k in 1..=d {
        let _ = write!(out, "u_{k},");
    }
    let _ = write!(out, "h,");
    for k in 1..=d {
        let _ = write!(out, "t_{k},");
    }
    let _ = writeln!(out, "kkt_residual");
    for p in &sample.points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            join_floats(&p.u),
            p.h,
            join_floats(&p.t),
            p.kkt_residual
        );
    }
    write_file(path, &out)
}

/// Green dump plus a `key: value` metadata sidecar.
pub fn write_green_csv(path: &Path, sidecar: &Path, table: &GreenTable) -> Result<()> {
    write_field_csv(path, table.d, "value", &table.sorted_entries())?;
    let meta = format!(
        "source_color: {}\nbox_r: {}\neps_stop: {}\ntail_bound: {}\nsteps: {}\n",
        table.source_color + 1,
        table.box_r,
        table.eps_stop,
        table.tail_bound,
        table.steps
    );
    write_file(sidecar, &meta)
}

pub fn write_polytope_csv(path: &Path, polytope: &Polytope) -> Result<()> {
    let mut out = String::new();
    for k in 1..=polytope.d {
        let _ = write!(out, "v_{k}");
        if k < polytope.d {
            let _ = write!(out, ",");
        }
    }
    let _ = writeln!(out);
    let mut vertices = polytope.vertices.clone();
    vertices.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for v in vertices {
        let _ = writeln!(out, "{}", join_floats(&v));
    }
    write_file(path, &out)
}

pub fn write_ellipsoid_csv(path: &Path, e: &Ellipsoid) -> Result<()> {
    let mut out = String::from("i,j,a_ij\n");
    for i in 0..e.a.n {
        for j in 0..e.a.n {
            let _ = writeln!(out, "{},{},{}", i + 1, j + 1, e.a[(i, j)]);
        }
    }
    write_file(path, &out)
}

/// One grayscale P6 image per color of a 2-d slice of the state. For `d > 2`
/// the slice fixes `axis = value` (remaining two axes are drawn); intensity
/// is mass relative to the color threshold.
pub fn render_ppm(
    dir: &Path,
    prefix: &str,
    state: &SandpileState,
    thresholds: &[f64],
    slice: Option<(usize, i32)>,
) -> Result<Vec<std::path::PathBuf>> {
    let entries = state.sorted_entries();
    if entries.is_empty() {
        return Err(Error::Validation("nothing to render".into()));
    }
    let d = state.d;
    let drawn_axes: Vec<usize> = match (d, slice) {
        (1, _) => vec![0],
        (2, _) => vec![0, 1],
        (_, Some((axis, _))) if axis < d => (0..d).filter(|&k| k != axis).take(2).collect(),
        (_, None) => {
            return Err(Error::Validation(
                "rendering d > 2 needs --slice axis=value".into(),
            ))
        }
        _ => return Err(Error::Validation("slice axis out of range".into())),
    };
    let keep = |x: &[i32]| -> bool {
        match slice {
            Some((axis, value)) if d > 2 => x[axis] == value,
            _ => true,
        }
    };
    let mut min = [i32::MAX; 2];
    let mut max = [i32::MIN; 2];
    for (x, _, _) in entries.iter().filter(|(x, _, _)| keep(x)) {
        for (k, &axis) in drawn_axes.iter().enumerate() {
            let c = if d == 1 && k == 1 { 0 } else { x[axis] };
            min[k] = min[k].min(c);
            max[k] = max[k].max(c);
        }
    }
    if drawn_axes.len() == 1 {
        min[1] = 0;
        max[1] = 0;
    }
    if min[0] > max[0] {
        return Err(Error::Validation("slice contains no sites".into()));
    }
    let w = (max[0] - min[0] + 1) as usize;
    let h = (max[1] - min[1] + 1) as usize;
    let mut paths = Vec::new();
    for color in 0..state.p {
        let mut img = vec![0u8; w * h];
        for (x, c, mass) in entries.iter().filter(|(x, _, _)| keep(x)) {
            if *c != color {
                continue;
            }
            let px = (x[drawn_axes[0]] - min[0]) as usize;
            let py = if drawn_axes.len() == 2 {
                (x[drawn_axes[1]] - min[1]) as usize
            } else {
                0
            };
            let level = (mass / thresholds[color] * 255.0).clamp(0.0, 255.0) as u8;
            img[(h - 1 - py) * w + px] = level;
        }
        let mut bytes = format!("P6\n{w} {h}\n255\n").into_bytes();
        for &v in &img {
            bytes.extend_from_slice(&[v, v, v]);
        }
        let path = dir.join(format!("{prefix}_color{}.ppm", color + 1));
        fs::write(&path, &bytes)
            .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Overlay plot for `d = 2`: lattice points plus closed curves.
pub struct SvgOverlay {
    pub points: Vec<(Vec<f64>, &'static str)>,
    pub curves: Vec<(Vec<Vec<f64>>, &'static str, String)>,
}

impl SvgOverlay {
    pub fn new() -> Self {
        SvgOverlay {
            points: Vec::new(),
            curves: Vec::new(),
        }
    }

    pub fn add_points(&mut self, pts: impl IntoIterator<Item = Vec<f64>>, color: &'static str) {
        for p in pts {
            self.points.push((p, color));
        }
    }

    pub fn add_curve(&mut self, pts: Vec<Vec<f64>>, color: &'static str, label: String) {
        self.curves.push((pts, color, label));
    }

    pub fn add_star_body(&mut self, body: &StarBody, color: &'static str, label: String) {
        self.add_curve(body.points(), color, label);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut touch = |p: &[f64]| {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        };
        for (p, _) in &self.points {
            touch(p);
        }
        for (c, _, _) in &self.curves {
            for p in c {
                touch(p);
            }
        }
        if !lo[0].is_finite() {
            return Err(Error::Validation("empty overlay".into()));
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
        let size = 800.0;
        let margin = 40.0;
        let scale = (size - 2.0 * margin) / span;
        let map = |p: &[f64]| -> (f64, f64) {
            (
                margin + (p[0] - lo[0]) * scale,
                size - margin - (p[1] - lo[1]) * scale,
            )
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">"
        );
        let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
        for (p, color) in &self.points {
            let (x, y) = map(p);
            let _ = writeln!(
                out,
                "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"1.5\" fill=\"{color}\"/>"
            );
        }
        for (curve, color, label) in &self.curves {
            if curve.is_empty() {
                continue;
            }
            let mut path = String::new();
            for (i, p) in curve.iter().enumerate() {
                let (x, y) = map(p);
                let _ = write!(path, "{}{x:.2},{y:.2} ", if i == 0 { "M" } else { "L" });
            }
            path.push('Z');
            let _ = writeln!(
                out,
                "<path d=\"{path}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"><title>{label}</title></path>"
            );
        }
        let _ = writeln!(out, "</svg>");
        write_file(path, &out)
    }
}

impl Default for SvgOverlay {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn field_csv_shape() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_field_csv(
            &path,
            2,
            "mass",
            &[(vec![0, 1], 0, 1.5), (vec![2, -1], 1, 0.25)],
        )
        .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "x_1,x_2,color,mass\n0,1,1,1.5\n2,-1,2,0.25\n");
    }

    #[test]
    fn ppm_header() {
        let dir = tempdir().unwrap();
        let mut state = SandpileState::empty(2, 1);
        state.add_mass(&[0, 0], 0, 4.0);
        state.add_mass(&[2, 1], 0, 8.0);
        let paths = render_ppm(dir.path(), "test", &state, &[8.0], None).unwrap();
        let bytes = fs::read(&paths[0]).unwrap();
        assert!(bytes.starts_with(b"P6\n3 2\n255\n"));
        assert_eq!(bytes.len(), 11 + 3 * 2 * 3);
    }

    #[test]
    fn svg_writes() {
        let dir = tempdir().unwrap();
        let mut overlay = SvgOverlay::new();
        overlay.add_points(vec![vec![0.0, 0.0], vec![1.0, 1.0]], "black");
        overlay.add_curve(
            vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![-1.0, 0.0]],
            "red",
            "curve".into(),
        );
        let path = dir.path().join("o.svg");
        overlay.write(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.contains("</svg>"));
    }
}
