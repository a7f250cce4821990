//! Numerical evidence for non-membership in the range of the Killing
//! operator: the best least-squares fit of `∇_(a X_b) = h_ab` on a grid
//! patch, discretised by fourth-order central differences with exact
//! Christoffel symbols at the nodes.

use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use crate::diffops::{christoffel, JetField};
use crate::error::{Error, Result};
use crate::linalg::{cgls, CsrMatrix};
use crate::models::ChartGeometry;

/// Radius of the coordinate ball containing the patch.
pub const PATCH_RADIUS: f64 = 0.4;
/// Grid sizes at which the probe is reported.
pub const PROBE_GRIDS: [usize; 3] = [8, 12, 16];
/// Counterexample threshold on the residual ratio against the control.
pub const PROBE_RATIO_FLAGGED: f64 = 100.0;
/// Ratio below which a field counts as indistinguishable from the control.
pub const PROBE_RATIO_CLEAN: f64 = 10.0;

const CGLS_TOL: f64 = 1e-10;
const CGLS_MAX_ITER: usize = 20_000;

/// One discretised equation: sparse coefficients and right-hand side.
type Row = (Vec<(usize, f64)>, f64);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub grid_n: usize,
    /// `|A X − h| / |h|` at the least-squares optimum.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Five-point fourth-order first-derivative weights (times `12 dx`) at node
/// `i` of `n`, one-sided near the ends.
fn stencil(i: usize, n: usize) -> &'static [(i64, f64)] {
    const LEFT0: [(i64, f64); 5] = [(0, -25.0), (1, 48.0), (2, -36.0), (3, 16.0), (4, -3.0)];
    const LEFT1: [(i64, f64); 5] = [(-1, -3.0), (0, -10.0), (1, 18.0), (2, -6.0), (3, 1.0)];
    const CENTRAL: [(i64, f64); 4] = [(-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)];
    const RIGHT1: [(i64, f64); 5] = [(-3, -1.0), (-2, 6.0), (-1, -18.0), (0, 10.0), (1, 3.0)];
    const RIGHT0: [(i64, f64); 5] = [(-4, 3.0), (-3, -16.0), (-2, 36.0), (-1, -48.0), (0, 25.0)];
    match i {
        0 => &LEFT0,
        1 => &LEFT1,
        _ if i + 2 == n => &RIGHT1,
        _ if i + 1 == n => &RIGHT0,
        _ => &CENTRAL,
    }
}

/// Least-squares Killing fit of `h` on the cube of half-width
/// `PATCH_RADIUS / √n` about the chart origin, `grid_n` nodes per axis.
/// Every node carries the three-or-more equations `a ≤ b`, so the system is
/// overdetermined and its kernel is the discrete Killing fields.
pub fn exactness_probe(chart: &ChartGeometry, h: &JetField, grid_n: usize) -> Result<ProbeResult> {
    if grid_n < 8 {
        return Err(Error::InvalidArgument(format!(
            "probe grid must have at least 8 nodes per axis, got {grid_n}"
        )));
    }
    let n = chart.num_coords;
    let half = PATCH_RADIUS / (n as f64).sqrt();
    let dx = 2.0 * half / (grid_n - 1) as f64;
    let nodes = grid_n.pow(n as u32);
    let coords = |k: usize| -> Vec<usize> {
        let mut idx = vec![0; n];
        let mut r = k;
        for slot in idx.iter_mut().rev() {
            *slot = r % grid_n;
            r /= grid_n;
        }
        idx
    };
    let node_of = |idx: &[usize]| idx.iter().fold(0, |acc, &i| acc * grid_n + i);
    let unknown = |node: usize, c: usize| node * n + c;

    let rows: Vec<Vec<Row>> = (0..nodes)
        .into_par_iter()
        .map(|k| -> Result<Vec<Row>> {
            let idx = coords(k);
            let point: Vec<f64> = idx.iter().map(|&i| -half + i as f64 * dx).collect();
            let gamma = christoffel(chart, &point)?;
            let hv = h.eval(chart, &point, 0, n)?.values();
            let mut out = Vec::with_capacity(n * (n + 1) / 2);
            for p in 0..n {
                for q in p..n {
                    let mut row: Vec<(usize, f64)> = Vec::with_capacity(10 + n);
                    for (deriv, comp) in [(p, q), (q, p)] {
                        for &(off, w) in stencil(idx[deriv], grid_n) {
                            let mut j = idx.clone();
                            j[deriv] = (j[deriv] as i64 + off) as usize;
                            row.push((unknown(node_of(&j), comp), 0.5 * w / (12.0 * dx)));
                        }
                    }
                    for c in 0..n {
                        let gam = *gamma.get(&[c, p, q]);
                        if gam != 0.0 {
                            row.push((unknown(k, c), -gam));
                        }
                    }
                    out.push((row, *hv.get(&[p, q])));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut a = CsrMatrix::new(nodes * n);
    let mut b = Vec::with_capacity(nodes * n * (n + 1) / 2);
    for (row, rhs) in rows.into_iter().flatten() {
        a.push_row(&row);
        b.push(rhs);
    }
    let bnorm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok(ProbeResult {
            grid_n,
            residual: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let sol = cgls(&a, &b, CGLS_TOL, CGLS_MAX_ITER)?;
    Ok(ProbeResult {
        grid_n,
        residual: sol.residual_norm / bnorm,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}
