use std::fmt::Write as _;
use std::path::Path;

use super::{PointCloud, TriangleMesh};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CloudFormat {
    /// Whitespace-separated floats, one point per line.
    Xyz,
    /// Comma-separated, optional header; a trailing `label` column becomes labels.
    Csv,
}

impl CloudFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "xyz" | "txt" | "pts" => Some(CloudFormat::Xyz),
            "csv" => Some(CloudFormat::Csv),
            _ => None,
        }
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn name_of(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("cloud")
        .to_string()
}

pub fn load_pointcloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path)?;
    parse_pointcloud(&text, format, path)
}

pub(crate) fn parse_pointcloud(text: &str, format: CloudFormat, path: &Path) -> Result<PointCloud> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut width: Option<usize> = None;
    let mut has_label = false;
    let mut first_content = true;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = match format {
            CloudFormat::Xyz => line.split_whitespace().collect(),
            CloudFormat::Csv => line.split(',').map(str::trim).collect(),
        };
        if first_content {
            first_content = false;
            if format == CloudFormat::Csv && fields.iter().any(|f| f.parse::<f64>().is_err()) {
                has_label = fields
                    .last()
                    .is_some_and(|f| f.eq_ignore_ascii_case("label"));
                width = Some(fields.len());
                continue;
            }
        }
        match width {
            Some(w) if w != fields.len() => {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("expected {w} columns, found {}", fields.len()),
                ))
            }
            None => width = Some(fields.len()),
            _ => {}
        }
        let coord_fields = if has_label { &fields[..fields.len() - 1] } else { &fields[..] };
        let mut row = Vec::with_capacity(coord_fields.len());
        for f in coord_fields {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("not a number: {f:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(path, lineno, "non-finite coordinate"));
            }
            row.push(v);
        }
        if has_label {
            let f = fields[fields.len() - 1];
            let l: usize = f
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("label is not a non-negative integer: {f:?}")))?;
            labels.push(l);
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(parse_err(path, 0, format!("need at least 2 points, found {}", rows.len())));
    }
    if rows[0].is_empty() {
        return Err(parse_err(path, 0, "no coordinate columns"));
    }
    let pc = PointCloud::from_rows(&rows, name_of(path))?;
    if has_label {
        pc.with_labels(labels)
    } else {
        Ok(pc)
    }
}

/// Writes XYZ or CSV; CSV gets an `x0,x1,…[,label]` header.
pub fn write_pointcloud(pc: &PointCloud, path: &Path, format: CloudFormat) -> Result<()> {
    let mut out = String::new();
    let sep = match format {
        CloudFormat::Xyz => " ",
        CloudFormat::Csv => ",",
    };
    if format == CloudFormat::Csv {
        let mut header: Vec<String> = (0..pc.dim()).map(|j| format!("x{j}")).collect();
        if pc.labels().is_some() {
            header.push("label".into());
        }
        out.push_str(&header.join(","));
        out.push('\n');
    }
    for i in 0..pc.n() {
        let mut fields: Vec<String> = pc.point(i).iter().map(|v| format!("{v:.17e}")).collect();
        if format == CloudFormat::Csv {
            if let Some(l) = pc.labels() {
                fields.push(l[i].to_string());
            }
        }
        let _ = writeln!(out, "{}", fields.join(sep));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_off_mesh(path: &Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path)?;
    parse_off(&text, path)
}

pub(crate) fn parse_off(text: &str, path: &Path) -> Result<TriangleMesh> {
    // Tokens with their line numbers, comments stripped.
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 0, "empty file"))?;
    let mut head_tokens = header.split_whitespace();
    if head_tokens.next() != Some("OFF") {
        return Err(parse_err(path, hline, "missing OFF header"));
    }
    let rest: Vec<&str> = head_tokens.collect();
    let (cline, counts) = if rest.is_empty() {
        let (l, c) = lines
            .next()
            .ok_or_else(|| parse_err(path, hline, "missing counts line"))?;
        (l, c.split_whitespace().collect::<Vec<_>>())
    } else {
        (hline, rest)
    };
    if counts.len() < 2 {
        return Err(parse_err(path, cline, "counts line needs vertex and face counts"));
    }
    let nv: usize = counts[0]
        .parse()
        .map_err(|_| parse_err(path, cline, "bad vertex count"))?;
    let nf: usize = counts[1]
        .parse()
        .map_err(|_| parse_err(path, cline, "bad face count"))?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, s) = lines
            .next()
            .ok_or_else(|| parse_err(path, cline, format!("expected {nv} vertices")))?;
        let v: Vec<f64> = s
            .split_whitespace()
            .take(3)
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(path, l, "bad vertex coordinate"))?;
        if v.len() != 3 {
            return Err(parse_err(path, l, "vertex needs 3 coordinates"));
        }
        vertices.push([v[0], v[1], v[2]]);
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (l, s) = lines
            .next()
            .ok_or_else(|| parse_err(path, cline, format!("expected {nf} faces")))?;
        let idx: Vec<usize> = s
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(path, l, "bad face index"))?;
        let k = *idx.first().ok_or_else(|| parse_err(path, l, "empty face"))?;
        if k < 3 || idx.len() < k + 1 {
            return Err(parse_err(path, l, format!("face declares {k} vertices")));
        }
        let poly = &idx[1..=k];
        if let Some(&bad) = poly.iter().find(|&&v| v >= nv) {
            return Err(parse_err(path, l, format!("vertex index {bad} out of range")));
        }
        // Fan split around the first corner.
        for j in 1..k - 1 {
            faces.push([poly[0], poly[j], poly[j + 1]]);
        }
    }
    TriangleMesh::new(vertices, faces)
}

pub fn write_off_mesh(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    let mut out = String::from("OFF\n");
    let _ = writeln!(out, "{} {} 0", mesh.vertices.len(), mesh.faces.len());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{:.17e} {:.17e} {:.17e}", v[0], v[1], v[2]);
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem.txt")
    }

    #[test]
    fn xyz_two_points() {
        let pc = parse_pointcloud("0 0 0\n1 0 0", CloudFormat::Xyz, p()).unwrap();
        assert_eq!((pc.n(), pc.dim()), (2, 3));
        assert_eq!(pc.point(1), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn csv_label_column() {
        let pc = parse_pointcloud("x,y,z,label\n0,0,0,1\n1,2,3,0\n", CloudFormat::Csv, p()).unwrap();
        assert_eq!(pc.dim(), 3);
        assert_eq!(pc.labels().unwrap(), &[1, 0]);
    }

    #[test]
    fn wide_feature_csv() {
        let row: Vec<String> = (0..768).map(|j| format!("{}", j as f64 * 0.01)).collect();
        let text = format!("{}\n{}\n{}\n", row.join(","), row.join(","), row.join(","));
        let pc = parse_pointcloud(&text, CloudFormat::Csv, p()).unwrap();
        assert_eq!((pc.n(), pc.dim()), (3, 768));
    }

    #[test]
    fn ragged_rows_report_line() {
        match parse_pointcloud("0 0\n1 1\n2\n", CloudFormat::Xyz, p()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse_pointcloud("0 0\n1 x\n", CloudFormat::Xyz, p()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn off_quad_is_fan_split() {
        let m = parse_off("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n", p()).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn off_tetrahedron_is_closed() {
        let text = "OFF\n# tetra\n4 4 6\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n";
        let m = parse_off(text, p()).unwrap();
        assert_eq!(m.euler_characteristic(), 2);
    }

    #[test]
    fn off_bad_header() {
        assert!(matches!(parse_off("PLY\n", p()), Err(Error::Parse { .. })));
        assert!(matches!(parse_off("OFF\n3 1\n0 0 0\n", p()), Err(Error::Parse { .. })));
    }
}
