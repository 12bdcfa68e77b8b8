use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SpectralBasis;
use crate::error::{Error, Result};
use crate::ndiff::Tensor;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format: String,
    pub n: usize,
    pub k: usize,
    pub config_hash: String,
    pub files: Vec<String>,
}

const FILES: [&str; 3] = ["Q.csv", "mass.csv", "lambdas.csv"];

/// 17 significant digits, which round-trips every finite `f64`.
fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// Writes `Q.csv`, `mass.csv`, `lambdas.csv` and `manifest.json` into `dir`.
pub fn write_basis_bundle(dir: &Path, basis: &SpectralBasis, config_hash: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut q = String::new();
    for i in 0..basis.n() {
        let row: Vec<String> = basis.q.row(i).iter().map(|&v| fmt(v)).collect();
        let _ = writeln!(q, "{}", row.join(","));
    }
    std::fs::write(dir.join(FILES[0]), q)?;
    let col = |vals: &[f64]| vals.iter().map(|&v| fmt(v) + "\n").collect::<String>();
    std::fs::write(dir.join(FILES[1]), col(&basis.mass))?;
    std::fs::write(dir.join(FILES[2]), col(&basis.lambdas))?;
    let manifest = BundleManifest {
        format: "oae-basis-1".into(),
        n: basis.n(),
        k: basis.k(),
        config_hash: config_hash.into(),
        files: FILES.iter().map(|s| s.to_string()).collect(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Contract(e.to_string()))?;
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

fn parse_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                path: PathBuf::from(path),
                line: i + 1,
                msg: e.to_string(),
            })?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_basis_bundle(dir: &Path) -> Result<(SpectralBasis, BundleManifest)> {
    let mpath = dir.join("manifest.json");
    let manifest: BundleManifest =
        serde_json::from_str(&std::fs::read_to_string(&mpath)?).map_err(|e| Error::Parse {
            path: mpath.clone(),
            line: e.line(),
            msg: e.to_string(),
        })?;
    let rows = parse_rows(&dir.join(FILES[0]))?;
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    if n != manifest.n || k != manifest.k || rows.iter().any(|r| r.len() != k) {
        return Err(Error::dim(
            "read_basis_bundle",
            format!("Q.csv is not {}x{}", manifest.n, manifest.k),
        ));
    }
    let q = Tensor::matrix(n, k, rows.concat())?;
    let single = |name: &str, len: usize| -> Result<Vec<f64>> {
        let rows = parse_rows(&dir.join(name))?;
        if rows.len() != len || rows.iter().any(|r| r.len() != 1) {
            return Err(Error::dim("read_basis_bundle", format!("{name} needs {len} single values")));
        }
        Ok(rows.into_iter().map(|r| r[0]).collect())
    };
    let mass = single(FILES[1], n)?;
    let lambdas = single(FILES[2], k)?;
    Ok((SpectralBasis { q, mass, lambdas }, manifest))
}
