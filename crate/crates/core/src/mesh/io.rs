//! Line-based mesh text format.
//!
//! ```text
//! NV NT NB
//! x y                  (NV lines)
//! v0 v1 v2 refedge     (NT lines)
//! v0 v1 label          (NB lines, label in D/N/R)
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{BoundaryEdge, BoundaryLabel, MeshError, Triangle, TriMesh};
use crate::scalar::Real;

fn parse_tokens<F: FromStr>(
    line_no: usize,
    line: &str,
    expected: usize,
) -> Result<Vec<F>, MeshError> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != expected {
        return Err(MeshError::Parse {
            line: line_no,
            message: format!("expected {expected} fields, found {}", tokens.len()),
        });
    }
    tokens
        .iter()
        .map(|t| {
            t.parse::<F>().map_err(|_| MeshError::Parse {
                line: line_no,
                message: format!("cannot parse `{t}`"),
            })
        })
        .collect()
}

impl<T: Real> TriMesh<T> {
    /// Serialises into the text format. Coordinates use the shortest
    /// representation that parses back to the identical value.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {}",
            self.num_vertices(),
            self.num_triangles(),
            self.boundary.len()
        );
        for v in &self.vertices {
            let _ = writeln!(out, "{} {}", v[0], v[1]);
        }
        for t in &self.triangles {
            let [a, b, c] = t.vertices;
            let _ = writeln!(out, "{a} {b} {c} {}", t.refine_edge);
        }
        for e in &self.boundary {
            let _ = writeln!(out, "{} {} {}", e.vertices[0], e.vertices[1], e.label);
        }
        out
    }

    /// Parses and validates the text format. Generations are reset to zero.
    pub fn from_text(text: &str) -> Result<Self, MeshError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines.next().ok_or(MeshError::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let counts: Vec<usize> = parse_tokens(hline, header, 3)?;
        let (nv, nt, nb) = (counts[0], counts[1], counts[2]);

        let mut vertices = Vec::with_capacity(nv);
        for k in 0..nv {
            let (no, line) = lines.next().ok_or(MeshError::CountMismatch {
                what: "vertex",
                expected: nv,
                found: k,
            })?;
            let xy: Vec<T> = parse_tokens(no, line, 2)?;
            vertices.push([xy[0], xy[1]]);
        }
        let check = |line: usize, index: usize| {
            if index >= nv {
                Err(MeshError::IndexOutOfRange {
                    line,
                    index,
                    count: nv,
                })
            } else {
                Ok(index)
            }
        };
        let mut triangles = Vec::with_capacity(nt);
        for k in 0..nt {
            let (no, line) = lines.next().ok_or(MeshError::CountMismatch {
                what: "triangle",
                expected: nt,
                found: k,
            })?;
            let f: Vec<usize> = parse_tokens(no, line, 4)?;
            if f[3] > 2 {
                return Err(MeshError::BadRefineEdge {
                    line: no,
                    value: f[3],
                });
            }
            triangles.push(Triangle {
                vertices: [check(no, f[0])?, check(no, f[1])?, check(no, f[2])?],
                refine_edge: f[3] as u8,
            });
        }
        let mut boundary = Vec::with_capacity(nb);
        for k in 0..nb {
            let (no, line) = lines.next().ok_or(MeshError::CountMismatch {
                what: "boundary edge",
                expected: nb,
                found: k,
            })?;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != 3 {
                return Err(MeshError::Parse {
                    line: no,
                    message: format!("expected 3 fields, found {}", tokens.len()),
                });
            }
            let idx: Vec<usize> = parse_tokens(no, &tokens[..2].join(" "), 2)?;
            let label = BoundaryLabel::from_str(tokens[2]).map_err(|_| MeshError::BadLabel {
                line: no,
                label: tokens[2].to_string(),
            })?;
            boundary.push(BoundaryEdge {
                vertices: [check(no, idx[0])?, check(no, idx[1])?],
                label,
            });
        }
        if let Some((no, _)) = lines.next() {
            return Err(MeshError::Parse {
                line: no,
                message: "trailing content after the declared counts".into(),
            });
        }
        TriMesh::new(vertices, triangles, boundary)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MeshError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MeshError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn round_trip_criss_cross() {
        let m = TriMesh::<f64>::criss_cross(2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.mesh");
        m.save(&path).unwrap();
        assert_eq!(TriMesh::<f64>::load(&path).unwrap(), m);
    }

    #[test]
    fn index_equal_to_vertex_count() {
        let text = "3 1 3\n0 0\n1 0\n0 1\n0 1 3 0\n0 1 R\n1 2 R\n2 0 R\n";
        assert!(matches!(
            TriMesh::<f64>::from_text(text),
            Err(MeshError::IndexOutOfRange {
                line: 5,
                index: 3,
                count: 3
            })
        ));
    }

    #[test]
    fn distinct_errors() {
        let ok = "3 1 3\n0 0\n1 0\n0 1\n0 1 2 0\n0 1 R\n1 2 R\n2 0 R\n";
        TriMesh::<f64>::from_text(ok).unwrap();
        let short = "3 1 3\n0 0\n1 0\n0 1\n0 1 2 0\n0 1 R\n1 2 R\n";
        assert!(matches!(
            TriMesh::<f64>::from_text(short),
            Err(MeshError::CountMismatch { found: 2, .. })
        ));
        let unlabeled = "3 1 2\n0 0\n1 0\n0 1\n0 1 2 0\n0 1 R\n1 2 R\n";
        assert!(matches!(
            TriMesh::<f64>::from_text(unlabeled),
            Err(MeshError::UnlabeledBoundaryEdge(2, 0))
        ));
        let bad_label = "3 1 3\n0 0\n1 0\n0 1\n0 1 2 0\n0 1 R\n1 2 X\n2 0 R\n";
        assert!(matches!(
            TriMesh::<f64>::from_text(bad_label),
            Err(MeshError::BadLabel { line: 7, .. })
        ));
        let garbage = "3 1 3\n0 zero\n";
        assert!(matches!(
            TriMesh::<f64>::from_text(garbage),
            Err(MeshError::Parse { line: 2, .. })
        ));
        let bad_tag = "3 1 3\n0 0\n1 0\n0 1\n0 1 2 3\n0 1 R\n1 2 R\n2 0 R\n";
        assert!(matches!(
            TriMesh::<f64>::from_text(bad_tag),
            Err(MeshError::BadRefineEdge { line: 5, value: 3 })
        ));
        // Four triangles fanning around one edge: non-conforming.
        let fan = "5 3 0\n0 0\n1 0\n0 1\n0 -1\n0.5 0.5\n0 1 2 0\n0 1 4 0\n0 1 2 0\n";
        assert!(matches!(
            TriMesh::<f64>::from_text(fan),
            Err(MeshError::NonConforming(..))
        ));
    }

    proptest! {
        #[test]
        fn refined_meshes_round_trip(n in 1usize..4, marks in proptest::collection::vec(0usize..1000, 0..6)) {
            let mut m = TriMesh::<f64>::criss_cross(n).unwrap();
            for k in marks {
                let t = k % m.num_triangles();
                m = m.refine(&[t]);
            }
            let back = TriMesh::<f64>::from_text(&m.to_text()).unwrap();
            prop_assert_eq!(back.vertices(), m.vertices());
            prop_assert_eq!(back.triangles(), m.triangles());
            prop_assert_eq!(back.boundary(), m.boundary());
        }
    }
}
