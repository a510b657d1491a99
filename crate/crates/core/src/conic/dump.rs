//! Text dump of conic problems for cross-checking against external solvers.

use std::fmt::Write as _;
use std::path::Path;

use super::{ConvexQuadraticProgram, SemidefiniteProgram};
use crate::error::Result;

fn write_row_major(out: &mut String, name: &str, rows: usize, cols: usize, get: impl Fn(usize, usize) -> String) {
    let _ = writeln!(out, "{name} {rows} {cols}");
    for r in 0..rows {
        let line: Vec<String> = (0..cols).map(|c| get(r, c)).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
}

pub fn dump_qcqp(p: &ConvexQuadraticProgram, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "problem qcqp");
    let _ = writeln!(out, "vars {}", p.n);
    write_row_major(&mut out, "objective", 1, p.n, |_, c| format!("{:.17e}", p.maximize.coeffs[c]));
    let _ = writeln!(out, "objective_constant {:.17e}", p.maximize.constant);
    let _ = writeln!(out, "linear {}", p.linear.len());
    for lc in &p.linear {
        write_row_major(&mut out, "row", 1, p.n, |_, c| format!("{:.17e}", lc.coeffs[c]));
        let _ = writeln!(out, "constant {:.17e}", lc.constant);
    }
    let _ = writeln!(out, "quadratic {}", p.quadratic.len());
    for qc in &p.quadratic {
        let form = qc.dense_form();
        write_row_major(&mut out, "form", p.n, p.n, |r, c| format!("{:.17e}", form[(r, c)]));
        write_row_major(&mut out, "upper", 1, p.n, |_, c| format!("{:.17e}", qc.upper.coeffs[c]));
        let _ = writeln!(out, "upper_constant {:.17e}", qc.upper.constant);
    }
    let _ = writeln!(out, "norm_bounds {}", p.norm_bounds.len());
    for nb in &p.norm_bounds {
        let idxs: Vec<String> = nb.indices.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(out, "indices {}", idxs.join(" "));
        let _ = writeln!(out, "radius {:.17e}", nb.radius);
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn dump_sdp(p: &SemidefiniteProgram, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "problem sdp");
    let _ = writeln!(out, "dim {}", p.dim);
    match &p.maximize {
        Some(c) => write_row_major(&mut out, "objective", p.dim, p.dim, |r, col| {
            format!("{:.17e}{:+.17e}j", c[(r, col)].re, c[(r, col)].im)
        }),
        None => {
            let _ = writeln!(out, "objective feasibility");
        }
    }
    let _ = writeln!(out, "constraints {}", p.constraints.len());
    for tc in &p.constraints {
        write_row_major(&mut out, "matrix", p.dim, p.dim, |r, col| {
            format!("{:.17e}{:+.17e}j", tc.matrix[(r, col)].re, tc.matrix[(r, col)].im)
        });
        let _ = writeln!(out, "upper {:.17e}", tc.upper);
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{LinearExpr, TraceConstraint};
    use nalgebra::{DMatrix, DVector};
    use num_complex::Complex64;

    #[test]
    fn dumps_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let qcqp = ConvexQuadraticProgram {
            n: 2,
            maximize: LinearExpr::new(DVector::from_vec(vec![1.0, 0.0]), 0.0),
            quadratic: vec![],
            linear: vec![],
            norm_bounds: vec![],
        };
        let path = dir.path().join("p.qcqp");
        dump_qcqp(&qcqp, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("problem qcqp"));

        let sdp = SemidefiniteProgram {
            dim: 2,
            maximize: None,
            constraints: vec![TraceConstraint {
                matrix: DMatrix::identity(2, 2).map(|v: f64| Complex64::new(v, 0.0)),
                upper: 1.0,
            }],
        };
        let path = dir.path().join("p.sdp");
        dump_sdp(&sdp, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("objective feasibility"));
    }
}
