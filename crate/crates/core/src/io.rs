//! Artifact files, the CSV grid slice format and zero-level contours.
//!
//! Artifacts are JSON with an `env` name and a tagged payload; floats are
//! written with shortest round-trip text, so reloading is bit-exact.
//!
//! A CSV grid slice is a two-dimensional table:
//!
//! ```text
//! # reach-avoid grid slice
//! # axes,0,1
//! # lower,-2,-2
//! # upper,2,10
//! # counts,81,241
//! # fixed,2:0
//! v(0,0),v(0,1),...
//! ```
//!
//! Header numbers use shortest round-trip text. Each data row holds one
//! index of the first free axis and `counts[1]` values of the second, in
//! scientific notation with 9 significant digits (`{:.8e}`). `fixed` lists
//! `axis:coordinate` pairs for the remaining dimensions and may be empty.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvironmentSpec;
use crate::neural::{Mlp, Objective};
use crate::tabular::{Grid, QTable, ValueGrid};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("artifact shape: {0}")]
    Shape(String),
    #[error("artifact does not match environment: {0}")]
    Incompatible(String),
    #[error("slice: {0}")]
    Slice(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "kebab-case")]
pub enum Artifact {
    ValueGrid(ValueGrid),
    QTable(QTable),
    Network { net: Mlp, objective: Objective },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactFile {
    pub env: String,
    pub artifact: Artifact,
}

fn check_grid(grid: &Grid) -> Result<(), IoError> {
    Grid::new(grid.lower().to_vec(), grid.upper().to_vec(), grid.counts().to_vec(), grid.periodic().to_vec())
        .map(|_| ())
        .map_err(|e| IoError::Shape(e.to_string()))
}

impl ArtifactFile {
    pub fn validate(&self) -> Result<(), IoError> {
        match &self.artifact {
            Artifact::ValueGrid(vg) => {
                check_grid(&vg.grid)?;
                if vg.values.len() != vg.grid.n_cells() {
                    return Err(IoError::Shape(format!("{} values for {} cells", vg.values.len(), vg.grid.n_cells())));
                }
            }
            Artifact::QTable(qt) => {
                check_grid(&qt.grid)?;
                if qt.n_actions == 0 || qt.q.len() != qt.grid.n_cells() * qt.n_actions {
                    return Err(IoError::Shape(format!("{} entries for {} cells x {} actions", qt.q.len(), qt.grid.n_cells(), qt.n_actions)));
                }
            }
            Artifact::Network { .. } => {}
        }
        Ok(())
    }

    /// Reject artifacts whose name, state dimension or action count disagree with `env`.
    pub fn check_env(&self, env: &EnvironmentSpec) -> Result<(), IoError> {
        if self.env != env.name {
            return Err(IoError::Incompatible(format!("artifact is for `{}`, config selects `{}`", self.env, env.name)));
        }
        let (dim, actions) = match &self.artifact {
            Artifact::ValueGrid(vg) => (vg.grid.dim(), None),
            Artifact::QTable(qt) => (qt.grid.dim(), Some(qt.n_actions)),
            Artifact::Network { net, .. } => (net.n_inputs(), Some(net.n_outputs())),
        };
        if dim != env.state_dim() {
            return Err(IoError::Incompatible(format!("state dimension {dim}, environment has {}", env.state_dim())));
        }
        if let Some(n) = actions.filter(|n| *n != env.n_actions()) {
            return Err(IoError::Incompatible(format!("{n} actions, environment has {}", env.n_actions())));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifacts serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, IoError> {
        let file: Self = serde_json::from_str(text)?;
        file.validate()?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// A two-dimensional table of values over free axes `axes` of a larger grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSlice {
    pub axes: [usize; 2],
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub counts: [usize; 2],
    pub fixed: Vec<(usize, f64)>,
    pub values: Vec<f64>,
}

impl GridSlice {
    pub fn center(&self, k: usize, i: usize) -> f64 {
        self.lower[k] + (i as f64 + 0.5) * (self.upper[k] - self.lower[k]) / self.counts[k] as f64
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.counts[1] + j]
    }
}

/// Parse a slice spec: one comma-separated entry per dimension, `*` for a
/// free axis or a coordinate for a fixed one. An empty spec on a
/// two-dimensional state means the identity slice.
pub fn parse_slice(spec: &str, dim: usize) -> Result<Vec<Option<f64>>, IoError> {
    if spec.trim().is_empty() {
        return if dim == 2 { Ok(vec![None, None]) } else { Err(IoError::Slice(format!("{dim}-D grid needs a slice spec"))) };
    }
    let parts: Vec<Option<f64>> = spec
        .split(',')
        .map(|p| match p.trim() {
            "*" => Ok(None),
            x => x.parse::<f64>().map(Some).map_err(|_| IoError::Slice(format!("`{x}` is neither `*` nor a number"))),
        })
        .collect::<Result<_, _>>()?;
    check_slice(&parts, dim)?;
    Ok(parts)
}

fn check_slice(spec: &[Option<f64>], dim: usize) -> Result<[usize; 2], IoError> {
    if spec.len() != dim {
        return Err(IoError::Slice(format!("{} entries for a {dim}-D grid", spec.len())));
    }
    let free: Vec<usize> = spec.iter().enumerate().filter(|(_, s)| s.is_none()).map(|(d, _)| d).collect();
    match free.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(IoError::Slice(format!("exactly two free axes required, got {}", free.len()))),
    }
}

/// Cut a value grid along `spec`. Fixed coordinates select the nearest cell
/// layer, and the slice records that layer's center coordinate.
pub fn slice_value_grid(vg: &ValueGrid, spec: &[Option<f64>]) -> Result<GridSlice, IoError> {
    let grid = &vg.grid;
    let axes = check_slice(spec, grid.dim())?;
    let point: Vec<f64> = spec.iter().enumerate().map(|(d, s)| s.unwrap_or(grid.axis_center(d, 0))).collect();
    let base = grid.multi_index(grid.nearest_cell(&point));
    let fixed = spec
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_some())
        .map(|(d, _)| (d, grid.axis_center(d, base[d])))
        .collect();
    let counts = [grid.counts()[axes[0]], grid.counts()[axes[1]]];
    let mut index = base.clone();
    let mut values = Vec::with_capacity(counts[0] * counts[1]);
    for i in 0..counts[0] {
        for j in 0..counts[1] {
            index[axes[0]] = i;
            index[axes[1]] = j;
            values.push(vg.values[grid.flat_index(&index)]);
        }
    }
    Ok(GridSlice {
        axes,
        lower: [grid.lower()[axes[0]], grid.lower()[axes[1]]],
        upper: [grid.upper()[axes[0]], grid.upper()[axes[1]]],
        counts,
        fixed,
        values,
    })
}

/// Sample `f` at the cell centers of a `counts` grid over the free axes of
/// `bounds`, holding the fixed coordinates of `spec`.
pub fn sample_slice(bounds: &[[f64; 2]], spec: &[Option<f64>], counts: [usize; 2], f: impl Fn(&[f64]) -> f64) -> Result<GridSlice, IoError> {
    let axes = check_slice(spec, bounds.len())?;
    if counts.iter().any(|c| *c < 2) {
        return Err(IoError::Slice("slice resolution must be at least 2".into()));
    }
    let mut slice = GridSlice {
        axes,
        lower: [bounds[axes[0]][0], bounds[axes[1]][0]],
        upper: [bounds[axes[0]][1], bounds[axes[1]][1]],
        counts,
        fixed: spec.iter().enumerate().filter_map(|(d, s)| s.map(|x| (d, x))).collect(),
        values: Vec::with_capacity(counts[0] * counts[1]),
    };
    let mut x: Vec<f64> = spec.iter().map(|s| s.unwrap_or(0.0)).collect();
    for i in 0..counts[0] {
        for j in 0..counts[1] {
            x[axes[0]] = slice.center(0, i);
            x[axes[1]] = slice.center(1, j);
            let v = f(&x);
            slice.values.push(v);
        }
    }
    Ok(slice)
}

pub fn write_grid_csv(slice: &GridSlice) -> String {
    let fixed: Vec<String> = slice.fixed.iter().map(|(d, x)| format!("{d}:{x:?}")).collect();
    let mut out = String::from("# reach-avoid grid slice\n");
    out += &format!("# axes,{},{}\n", slice.axes[0], slice.axes[1]);
    out += &format!("# lower,{:?},{:?}\n", slice.lower[0], slice.lower[1]);
    out += &format!("# upper,{:?},{:?}\n", slice.upper[0], slice.upper[1]);
    out += &format!("# counts,{},{}\n", slice.counts[0], slice.counts[1]);
    out += &format!("# fixed,{}\n", fixed.join(","));
    for row in slice.values.chunks(slice.counts[1]) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.8e}")).collect();
        out += &cells.join(",");
        out.push('\n');
    }
    out
}

fn header<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, key: &str) -> Result<(usize, Vec<&'a str>), IoError> {
    let (n, line) = lines.next().ok_or(IoError::Format { line: 0, reason: format!("missing `{key}` header") })?;
    let body = line
        .strip_prefix("# ")
        .and_then(|l| l.strip_prefix(key))
        .and_then(|l| l.strip_prefix(','))
        .ok_or(IoError::Format { line: n, reason: format!("expected `# {key},...`") })?;
    Ok((n, if body.is_empty() { Vec::new() } else { body.split(',').collect() }))
}

fn number<T: std::str::FromStr>(line: usize, text: &str) -> Result<T, IoError> {
    text.trim().parse().map_err(|_| IoError::Format { line, reason: format!("bad number `{text}`") })
}

fn pair<T: std::str::FromStr + Copy>(line: usize, parts: &[&str]) -> Result<[T; 2], IoError> {
    match parts {
        [a, b] => Ok([number(line, a)?, number(line, b)?]),
        _ => Err(IoError::Format { line, reason: "expected two entries".into() }),
    }
}

pub fn read_grid_csv(text: &str) -> Result<GridSlice, IoError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, "# reach-avoid grid slice")) => {}
        _ => return Err(IoError::Format { line: 1, reason: "missing grid slice banner".into() }),
    }
    let (n, axes) = header(&mut lines, "axes")?;
    let axes = pair(n, &axes)?;
    let (n, lower) = header(&mut lines, "lower")?;
    let lower = pair(n, &lower)?;
    let (n, upper) = header(&mut lines, "upper")?;
    let upper = pair(n, &upper)?;
    let (n, counts) = header(&mut lines, "counts")?;
    let counts: [usize; 2] = pair(n, &counts)?;
    let (n, fixed_parts) = header(&mut lines, "fixed")?;
    let fixed = fixed_parts
        .iter()
        .map(|p| {
            let (d, x) = p.split_once(':').ok_or(IoError::Format { line: n, reason: format!("bad fixed entry `{p}`") })?;
            Ok((number(n, d)?, number(n, x)?))
        })
        .collect::<Result<Vec<_>, IoError>>()?;
    let mut values = Vec::with_capacity(counts[0] * counts[1]);
    let mut rows = 0;
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line.split(',').map(|v| number(n, v)).collect::<Result<_, _>>()?;
        if row.len() != counts[1] {
            return Err(IoError::Format { line: n, reason: format!("{} values, expected {}", row.len(), counts[1]) });
        }
        values.extend(row);
        rows += 1;
    }
    if rows != counts[0] {
        return Err(IoError::Format { line: 0, reason: format!("{rows} rows, expected {}", counts[0]) });
    }
    Ok(GridSlice { axes, lower, upper, counts, fixed, values })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub level: f64,
    pub axes: [usize; 2],
    pub polylines: Vec<Vec<[f64; 2]>>,
}

/// Edge of the lattice of slice cell centers: `(0, i, j)` joins node
/// `(i, j)` to `(i + 1, j)`, `(1, i, j)` joins it to `(i, j + 1)`.
type Edge = (u8, usize, usize);

/// Zero-level contour of a slice by marching squares over cell centers.
/// Saddles are split by the mean of the four corners; segments sharing an
/// edge crossing are chained into polylines.
pub fn zero_contour(slice: &GridSlice) -> Contour {
    let [n0, n1] = slice.counts;
    let inside = |i: usize, j: usize| slice.get(i, j) <= 0.0;
    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for i in 0..n0.saturating_sub(1) {
        for j in 0..n1.saturating_sub(1) {
            let corners = [inside(i, j), inside(i + 1, j), inside(i + 1, j + 1), inside(i, j + 1)];
            let bottom = (0, i, j);
            let right = (1, i + 1, j);
            let top = (0, i, j + 1);
            let left = (1, i, j);
            let corner_edges = [(bottom, left), (bottom, right), (right, top), (left, top)];
            let n_inside = corners.iter().filter(|c| **c).count();
            match n_inside {
                0 | 4 => {}
                1 | 3 => {
                    let odd = corners.iter().position(|c| *c == (n_inside == 1)).expect("one corner differs");
                    segments.push(corner_edges[odd]);
                }
                _ if corners[0] == corners[1] || corners[0] == corners[3] => {
                    // two adjacent corners inside: one straight cut
                    let crossed: Vec<Edge> = [bottom, right, top, left]
                        .into_iter()
                        .zip([(0, 1), (1, 2), (3, 2), (0, 3)])
                        .filter(|(_, (a, b))| corners[*a] != corners[*b])
                        .map(|(e, _)| e)
                        .collect();
                    segments.push((crossed[0], crossed[1]));
                }
                _ => {
                    let mean = (slice.get(i, j) + slice.get(i + 1, j) + slice.get(i + 1, j + 1) + slice.get(i, j + 1)) / 4.0;
                    let centre = mean <= 0.0;
                    for (k, c) in corners.iter().enumerate() {
                        if *c != centre {
                            segments.push(corner_edges[k]);
                        }
                    }
                }
            }
        }
    }
    let point = |(dir, i, j): Edge| -> [f64; 2] {
        let (a, b) = if dir == 0 { ((i, j), (i + 1, j)) } else { ((i, j), (i, j + 1)) };
        let (va, vb) = (slice.get(a.0, a.1), slice.get(b.0, b.1));
        let t = if va == vb { 0.5 } else { va / (va - vb) };
        let pa = [slice.center(0, a.0), slice.center(1, a.1)];
        let pb = [slice.center(0, b.0), slice.center(1, b.1)];
        [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
    };
    let mut incident: BTreeMap<Edge, Vec<usize>> = BTreeMap::new();
    for (k, (a, b)) in segments.iter().enumerate() {
        incident.entry(*a).or_default().push(k);
        incident.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();
    let open_ends: Vec<Edge> = incident.iter().filter(|(_, s)| s.len() == 1).map(|(e, _)| *e).collect();
    let starts = open_ends.into_iter().chain(segments.iter().map(|(a, _)| *a));
    for start in starts {
        let Some(&first) = incident[&start].iter().find(|k| !used[**k]) else {
            continue;
        };
        let mut line = vec![point(start)];
        let mut at = start;
        let mut seg = Some(first);
        while let Some(k) = seg {
            used[k] = true;
            let (a, b) = segments[k];
            at = if a == at { b } else { a };
            line.push(point(at));
            seg = incident[&at].iter().copied().find(|k| !used[*k]);
        }
        polylines.push(line);
    }
    Contour { level: 0.0, axes: slice.axes, polylines }
}
