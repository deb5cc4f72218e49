//! JSON interchange for matrices and channel families, plus fixture validation.
//!
//! A matrix file is `{"dim": d, "re": [[..]], "im": [[..]]}` with row-major
//! `d×d` arrays. An optional `"kind"` of `"density"` (default), `"projector"`
//! or `"hermitian"` selects which invariants [`validate_fixture`] checks.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::authchannel::CQChannelFamily;
use crate::error::{Error, Result};
use crate::operator::{
    DensityOperator, HermitianOperator, Matrix, Projector, C64, HERMITIAN_TOL, IDEMPOTENT_TOL, PSD_TOL, TRACE_TOL,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
}

impl MatrixJson {
    pub fn from_matrix(m: &Matrix) -> Self {
        let d = m.nrows();
        Self {
            dim: d,
            re: (0..d).map(|i| (0..d).map(|j| m[(i, j)].re).collect()).collect(),
            im: (0..d).map(|i| (0..d).map(|j| m[(i, j)].im).collect()).collect(),
            kind: None,
        }
    }

    pub fn with_kind(mut self, kind: &str) -> Self {
        self.kind = Some(kind.to_string());
        self
    }

    /// Shape problems, one string per offending row or array.
    pub fn schema_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.dim == 0 {
            out.push("schema: dim must be positive".to_string());
        }
        for (name, rows) in [("re", &self.re), ("im", &self.im)] {
            if rows.len() != self.dim {
                out.push(format!("schema: '{name}' has {} rows, dim is {}", rows.len(), self.dim));
            }
            for (i, r) in rows.iter().enumerate() {
                if r.len() != self.dim {
                    out.push(format!(
                        "schema: '{name}' row {i} has {} entries, dim is {}",
                        r.len(),
                        self.dim
                    ));
                }
                if let Some(j) = r.iter().position(|x| !x.is_finite()) {
                    out.push(format!("schema: '{name}'[{i}][{j}] is not finite"));
                }
            }
        }
        out
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        if let Some(v) = self.schema_violations().into_iter().next() {
            return Err(Error::InvalidOperator(v));
        }
        let d = self.dim;
        Ok(Matrix::from_fn(d, d, |i, j| C64::new(self.re[i][j], self.im[i][j])))
    }

    pub fn to_density(&self) -> Result<DensityOperator> {
        DensityOperator::from_matrix(self.to_matrix()?)
    }

    pub fn to_projector(&self) -> Result<Projector> {
        Projector::from_matrix(self.to_matrix()?)
    }

    pub fn to_hermitian(&self) -> Result<HermitianOperator> {
        HermitianOperator::new(self.to_matrix()?)
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<MatrixJson> {
    read_json(path.as_ref())
}

pub fn load_density(path: impl AsRef<Path>) -> Result<DensityOperator> {
    load_matrix(path)?.to_density()
}

pub fn load_projector(path: impl AsRef<Path>) -> Result<Projector> {
    load_matrix(path)?.to_projector()
}

pub fn save_matrix(path: impl AsRef<Path>, m: &Matrix, kind: Option<&str>) -> Result<()> {
    let mut j = MatrixJson::from_matrix(m);
    j.kind = kind.map(str::to_string);
    fs::write(path, serde_json::to_string_pretty(&j)?)?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelFamilyJson {
    pub labels: Vec<String>,
    pub s0: String,
    pub alphabet: usize,
    pub states: BTreeMap<String, Vec<MatrixJson>>,
}

impl ChannelFamilyJson {
    pub fn from_family(f: &CQChannelFamily) -> Self {
        Self {
            labels: f.labels().to_vec(),
            s0: f.s0().to_string(),
            alphabet: f.alphabet(),
            states: f
                .labels()
                .iter()
                .map(|l| {
                    (
                        l.clone(),
                        f.states(l)
                            .iter()
                            .map(|s| MatrixJson::from_matrix(s.matrix()))
                            .collect(),
                    )
                })
                .collect(),
        }
    }

    pub fn to_family(&self) -> Result<CQChannelFamily> {
        let mut states = BTreeMap::new();
        for (label, mats) in &self.states {
            let row = mats
                .iter()
                .enumerate()
                .map(|(x, m)| {
                    m.to_density()
                        .map_err(|e| Error::InvalidOperator(format!("state '{label}'[{x}]: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            states.insert(label.clone(), row);
        }
        let fam = CQChannelFamily::new(self.labels.clone(), self.s0.clone(), states)?;
        if fam.alphabet() != self.alphabet {
            return Err(Error::InvalidParameter(format!(
                "declared alphabet {} but states define {}",
                self.alphabet,
                fam.alphabet()
            )));
        }
        Ok(fam)
    }
}

pub fn load_channel_family(path: impl AsRef<Path>) -> Result<CQChannelFamily> {
    read_json::<ChannelFamilyJson>(path.as_ref())?.to_family()
}

pub fn save_channel_family(path: impl AsRef<Path>, f: &CQChannelFamily) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(&ChannelFamilyJson::from_family(f))?)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixtureReport {
    pub path: String,
    pub kind: String,
    pub pass: bool,
    pub violations: Vec<String>,
}

/// Checks schema and type invariants of a matrix or channel-family file.
/// Only I/O failures are errors; malformed content is reported as violations.
pub fn validate_fixture(path: impl AsRef<Path>) -> Result<FixtureReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut report = FixtureReport {
        path: path.display().to_string(),
        kind: "unknown".into(),
        pass: false,
        violations: Vec::new(),
    };
    let value: Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => {
            report.violations.push(format!("schema: not valid JSON ({e})"));
            return Ok(report);
        }
    };
    if value.get("states").is_some() {
        report.kind = "channel_family".into();
        match serde_json::from_value::<ChannelFamilyJson>(value) {
            Ok(f) => {
                for (label, mats) in &f.states {
                    for (x, m) in mats.iter().enumerate() {
                        for v in matrix_violations(m, "density") {
                            report.violations.push(format!("states['{label}'][{x}]: {v}"));
                        }
                    }
                }
                if report.violations.is_empty() {
                    if let Err(e) = f.to_family() {
                        report.violations.push(format!("family: {e}"));
                    }
                }
            }
            Err(e) => report.violations.push(format!("schema: {e}")),
        }
    } else {
        match serde_json::from_value::<MatrixJson>(value) {
            Ok(m) => {
                let kind = m.kind.clone().unwrap_or_else(|| "density".into());
                report.violations = matrix_violations(&m, &kind);
                report.kind = kind;
            }
            Err(e) => report.violations.push(format!("schema: {e}")),
        }
    }
    report.pass = report.violations.is_empty();
    Ok(report)
}

fn matrix_violations(m: &MatrixJson, kind: &str) -> Vec<String> {
    let mut out = m.schema_violations();
    if !out.is_empty() {
        return out;
    }
    if !matches!(kind, "density" | "projector" | "hermitian") {
        return vec![format!("schema: unknown kind '{kind}'")];
    }
    let a = m.to_matrix().expect("schema checked");
    let d = m.dim;
    let scale = a.norm().max(1.0);
    for i in 0..d {
        for j in i..d {
            let gap = (a[(i, j)] - a[(j, i)].conj()).norm();
            if gap > HERMITIAN_TOL * scale {
                out.push(format!(
                    "hermiticity: entry ({i},{j}) = {} differs from conj of ({j},{i}) = {} by {gap:.3e}",
                    a[(i, j)],
                    a[(j, i)]
                ));
            }
        }
    }
    if !out.is_empty() {
        return out;
    }
    let h = HermitianOperator::from_matrix_unchecked(a.clone());
    let Ok(eig) = h.eig() else {
        return vec!["numerics: eigendecomposition failed".into()];
    };
    let tr = h.trace();
    match kind {
        "density" => {
            if (tr - 1.0).abs() > TRACE_TOL {
                out.push(format!("unit trace: trace = {tr}"));
            }
            if let Some((i, l)) = eig.values.iter().enumerate().find(|(_, l)| **l < -PSD_TOL) {
                out.push(format!("positivity: eigenvalue #{i} = {l:.3e} is negative"));
            }
        }
        "projector" => {
            let sq = &a * &a;
            let mut worst = (0, 0, 0.0);
            for i in 0..d {
                for j in 0..d {
                    let g = (sq[(i, j)] - a[(i, j)]).norm();
                    if g > worst.2 {
                        worst = (i, j, g);
                    }
                }
            }
            if worst.2 > IDEMPOTENT_TOL {
                out.push(format!(
                    "idempotence: (P²−P) entry ({},{}) has magnitude {:.3e}",
                    worst.0, worst.1, worst.2
                ));
            }
        }
        _ => {}
    }
    out
}
