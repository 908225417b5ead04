//! JSON interchange for user-supplied 2-jets.
//!
//! ```json
//! {"n": 2, "N": 3, "c": 0, "radius": null,
//!  "points": [{"u": [0, 0], "f": [..N], "df": [[..N], [..N]], "d2f": [[..N], [..N], [..N]]}]}
//! ```
//!
//! `df` has one row per parameter. `d2f` lists the rows for `(i, j)` with
//! `i <= j` in lexicographic order: `(0,0), (0,1), ..., (0,n-1), (1,1), ...`.
//! A full symmetric `n*n` block (row `i*n + j`) is also accepted. Rows may be
//! nested arrays or a single flat row-major array.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{pair_index, AmbientSpace, Jet2};
use crate::{Error, Result};

/// Relative asymmetry tolerated in a full `d2f` block.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rows {
    Nested(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

impl Rows {
    fn flatten(&self, width: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            Rows::Flat(v) => Ok(v.clone()),
            Rows::Nested(rows) => {
                if let Some(r) = rows.iter().find(|r| r.len() != width) {
                    return Err(Error::Schema(format!("{what}: row of length {} where N = {width}", r.len())));
                }
                Ok(rows.concat())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetPoint {
    pub u: Vec<f64>,
    pub f: Vec<f64>,
    pub df: Rows,
    pub d2f: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetFile {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub c: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    pub points: Vec<JetPoint>,
}

impl JetFile {
    pub fn from_json(s: &str) -> Result<Self> {
        let file: JetFile = serde_json::from_str(s).map_err(|e| Error::Schema(e.to_string()))?;
        file.ambient()?;
        Ok(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `c = 0`: `R^N`; `c = 1`: the sphere of the given radius (default 1)
    /// centred at the origin of `R^N`.
    pub fn ambient(&self) -> Result<AmbientSpace> {
        match (self.c, self.radius) {
            (0, None) => Ok(AmbientSpace::euclidean(self.big_n)),
            (0, Some(_)) => Err(Error::Schema("radius is only meaningful for c = 1".into())),
            (1, r) => {
                if self.big_n < 2 {
                    return Err(Error::Schema("a sphere ambient needs N >= 2".into()));
                }
                AmbientSpace::sphere(self.big_n - 1, r.unwrap_or(1.0)).map_err(|e| Error::Schema(e.to_string()))
            }
            (c, _) => Err(Error::Schema(format!("c must be 0 or 1, got {c}"))),
        }
    }

    /// Validated jets, one per point.
    pub fn jets(&self) -> Result<Vec<Jet2>> {
        self.points.iter().enumerate().map(|(idx, p)| self.point_jet(p).map_err(|e| Error::Schema(format!("point {idx}: {e}")))).collect()
    }

    fn point_jet(&self, p: &JetPoint) -> Result<Jet2> {
        let (n, big_n) = (self.n, self.big_n);
        if p.u.len() != n {
            return Err(Error::Schema(format!("u has length {}, expected n = {n}", p.u.len())));
        }
        if p.f.len() != big_n {
            return Err(Error::Schema(format!("f has length {}, expected N = {big_n}", p.f.len())));
        }
        let df = p.df.flatten(big_n, "df")?;
        if df.len() != n * big_n {
            return Err(Error::Schema(format!("df has {} entries, expected n*N = {}", df.len(), n * big_n)));
        }
        let raw = p.d2f.flatten(big_n, "d2f")?;
        let packed_len = n * (n + 1) / 2 * big_n;
        let d2 = if raw.len() == packed_len {
            raw
        } else if raw.len() == n * n * big_n {
            let row = |i: usize, j: usize| &raw[(i * n + j) * big_n..(i * n + j + 1) * big_n];
            let mut packed = vec![0.0; packed_len];
            for i in 0..n {
                for j in i..n {
                    let (a, b) = (row(i, j), row(j, i));
                    for (k, (x, y)) in a.iter().zip(b).enumerate() {
                        if (x - y).abs() > SYMMETRY_TOL * (1.0 + x.abs().max(y.abs())) {
                            return Err(Error::Schema(format!("d2f is not symmetric at ({i},{j}), component {k}: {x} vs {y}")));
                        }
                    }
                    let q = pair_index(n, i, j);
                    packed[q * big_n..(q + 1) * big_n].copy_from_slice(a);
                }
            }
            packed
        } else {
            return Err(Error::Schema(format!("d2f has {} entries, expected {packed_len} (upper triangle) or {} (full)", raw.len(), n * n * big_n)));
        };
        Jet2::new(n, p.f.clone(), df, d2)
    }

    /// Jet file holding `jets` at the parameter points `us`, rows nested.
    pub fn from_jets(ambient: &AmbientSpace, us: &[Vec<f64>], jets: &[Jet2]) -> Result<Self> {
        let n = jets.first().map(Jet2::n).ok_or_else(|| Error::Schema("no points".into()))?;
        let big_n = ambient.vector_dim();
        let (c, radius) = match ambient.radius() {
            None => (0, None),
            Some(r) => (1, Some(r)),
        };
        let chunks = |v: &[f64]| Rows::Nested(v.chunks(big_n).map(<[f64]>::to_vec).collect());
        let points = us
            .iter()
            .zip(jets)
            .map(|(u, j)| JetPoint { u: u.clone(), f: j.position().to_vec(), df: chunks(j.raw_first()), d2f: chunks(j.raw_second()) })
            .collect();
        Ok(JetFile { n, big_n, c, radius, points })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_model, ModelSpec};

    const PLANE: &str = r#"{"n": 2, "N": 3, "c": 0, "points": [
        {"u": [0, 0], "f": [0, 0, 0], "df": [[1, 0, 0], [0, 1, 0]], "d2f": [[0, 0, 0], [0, 0, 0], [0, 0, 0]]}]}"#;

    #[test]
    fn reads_plane() {
        let file = JetFile::from_json(PLANE).unwrap();
        let jets = file.jets().unwrap();
        assert_eq!(jets[0].first(1), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn full_block_and_asymmetry() {
        let full = PLANE.replace(r#""d2f": [[0, 0, 0], [0, 0, 0], [0, 0, 0]]"#, r#""d2f": [[0,0,1],[0,0,2],[0,0,2],[0,0,3]]"#);
        let jets = JetFile::from_json(&full).unwrap().jets().unwrap();
        assert_eq!(jets[0].second(0, 1), &[0.0, 0.0, 2.0]);
        assert_eq!(jets[0].second(1, 1), &[0.0, 0.0, 3.0]);
        let bad = PLANE.replace(r#""d2f": [[0, 0, 0], [0, 0, 0], [0, 0, 0]]"#, r#""d2f": [[0,0,1],[0,0,2],[0,0,2.5],[0,0,3]]"#);
        assert!(matches!(JetFile::from_json(&bad).unwrap().jets(), Err(Error::Schema(_))));
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(JetFile::from_json(&PLANE.replace("\"c\": 0", "\"c\": 2")), Err(Error::Schema(_))));
        assert!(matches!(JetFile::from_json(&PLANE.replace("[1, 0, 0]", "[1, 0]")).unwrap().jets(), Err(Error::Schema(_))));
        assert!(matches!(JetFile::from_json("{\"n\": 2}"), Err(Error::Schema(_))));
    }

    #[test]
    fn round_trip_through_json() {
        let chart = build_model(&ModelSpec::CliffordTorus { n: 4, k: 2, r: 0.6 }).unwrap();
        let us = chart.domain().random_points(3, 1);
        let jets: Vec<Jet2> = us.iter().map(|u| chart.jet(u).unwrap()).collect();
        let file = JetFile::from_jets(chart.ambient(), &us, &jets).unwrap();
        let back = JetFile::from_json(&file.to_json().unwrap()).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.ambient().unwrap(), *chart.ambient());
        for (a, b) in back.jets().unwrap().iter().zip(&jets) {
            assert_eq!(a.max_abs_diff(b), 0.0);
        }
    }
}
