//! Smoothed book-edge values from the price–volume distribution of one side.
//!
//! Levels are placed at `y = |p − p_best|` dollars, so the best price is the
//! origin. A Gauss–Radau rule with a node pinned at `y = 0` gives the
//! interpolated best-level volume (the weight at that node), and a
//! Radon–Nikodym ratio of the age measure to the volume measure gives the
//! interpolated time-in-book at the edge.

use thiserror::Error;

use crate::book::{Order, OrderBook};
use crate::flow::LegendreTable;
use crate::linalg::{tridiagonal_eigen, Cholesky};
use crate::types::{Price4, Side};

pub const DEFAULT_CUTOFF: f64 = 1.0;
pub const DEFAULT_RADAU_NODES: usize = 10;
pub const DEFAULT_TAU_BASIS: usize = 4;

/// Relative pivot floor for the volume Gram matrix. Entries are evaluated
/// directly from the recurrence, so far less precision is lost than in the
/// flow estimator.
const GRAM_PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdgeError {
    #[error("book side is empty")]
    EmptySide,
    #[error("measure has non-finite moments")]
    NonFiniteMoments,
    #[error("volume Gram matrix is numerically singular")]
    SingularGram,
}

/// Volume and age per populated level within the cutoff, best level first.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceMeasure {
    pub side: Side,
    /// Offsets from the best price in dollars, strictly ascending, `y[0] = 0`.
    pub y: Vec<f64>,
    /// Shares at each level.
    pub w: Vec<f64>,
    /// Size-weighted mean age at each level, in seconds.
    pub a: Vec<f64>,
}

impl PriceMeasure {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn total_volume(&self) -> f64 {
        self.w.iter().sum()
    }

    /// `Σ w_i y_i^m`.
    pub fn moment(&self, m: i32) -> f64 {
        self.y.iter().zip(&self.w).map(|(y, w)| w * y.powi(m)).sum()
    }
}

/// Aggregates per-level shares and ages for the levels of `side` within
/// `cutoff` dollars of the best price. `levels` must yield levels from the
/// best price outward.
pub fn build_measure<'a, I>(side: Side, levels: I, now_ns: u64, cutoff: f64) -> Result<PriceMeasure, EdgeError>
where
    I: IntoIterator<Item = (Price4, &'a [Order])>,
{
    let mut measure = PriceMeasure {
        side,
        y: Vec::new(),
        w: Vec::new(),
        a: Vec::new(),
    };
    let mut best = None;
    for (price, orders) in levels {
        let p_best = *best.get_or_insert(price);
        let y = price.distance(p_best);
        if y > cutoff {
            break;
        }
        let mut shares = 0u64;
        let mut weighted_age_ns = 0u128;
        for o in orders {
            shares += o.shares as u64;
            weighted_age_ns += o.shares as u128 * now_ns.saturating_sub(o.origination_ns) as u128;
        }
        if shares == 0 {
            continue;
        }
        measure.y.push(y);
        measure.w.push(shares as f64);
        measure.a.push(weighted_age_ns as f64 / shares as f64 * 1e-9);
    }
    if measure.is_empty() {
        return Err(EdgeError::EmptySide);
    }
    Ok(measure)
}

/// [`build_measure`] over one side of `book`.
pub fn book_measure(book: &OrderBook, side: Side, now_ns: u64, cutoff: f64) -> Result<PriceMeasure, EdgeError> {
    build_measure(side, book.levels(side).map(|(l, o)| (l.price, o)), now_ns, cutoff)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadauRule {
    /// Ascending; `nodes[0]` is the pinned node at `y = 0`.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub n_requested: usize,
    pub n_effective: usize,
}

impl RadauRule {
    /// `Σ weights_k f(nodes_k)`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, w)| w * f(x)).sum()
    }
}

/// Gauss–Radau rule with `n_nodes` nodes and one node fixed at `y = 0`.
///
/// A measure with at most `n_nodes` support points is its own rule. Larger
/// measures are reduced to the Jacobi matrix of their orthogonal
/// polynomials by Lanczos iteration on `diag(y)` (with full
/// reorthogonalization), the last diagonal entry is modified to place an
/// eigenvalue at 0, and nodes and weights follow from the tridiagonal
/// eigenproblem.
pub fn radau_rule(measure: &PriceMeasure, n_nodes: usize) -> Result<RadauRule, EdgeError> {
    assert!(n_nodes >= 1, "at least one node is required");
    let s = measure.len();
    if s == 0 {
        return Err(EdgeError::EmptySide);
    }
    if measure.y.iter().chain(&measure.w).any(|v| !v.is_finite()) {
        return Err(EdgeError::NonFiniteMoments);
    }
    if s <= n_nodes {
        return Ok(RadauRule {
            nodes: measure.y.clone(),
            weights: measure.w.clone(),
            n_requested: n_nodes,
            n_effective: s,
        });
    }
    if n_nodes == 1 {
        return Ok(RadauRule {
            nodes: vec![0.0],
            weights: vec![measure.total_volume()],
            n_requested: 1,
            n_effective: 1,
        });
    }
    let mu0 = measure.total_volume();
    let (mut alpha, beta) = lanczos(&measure.y, &measure.w, n_nodes - 1)?;
    // Radau modification at a = 0: (J_{n-1} − aI) δ = β_{n-1}² e_{n-1},
    // then α_{n-1} = a + δ_{n-1}.
    let last = beta[n_nodes - 2];
    let delta = solve_tridiagonal(&alpha, &beta[..n_nodes - 2], last * last).ok_or(EdgeError::NonFiniteMoments)?;
    alpha.push(delta);
    let (mut nodes, first) = tridiagonal_eigen(&alpha, &beta).map_err(|_| EdgeError::NonFiniteMoments)?;
    // The modified matrix is singular by construction; the eigensolver
    // returns that eigenvalue to within rounding of the scale.
    if nodes[0].abs() <= 1e3 * f64::EPSILON * measure.y[s - 1] {
        nodes[0] = 0.0;
    }
    let weights: Vec<f64> = first.iter().map(|z| mu0 * z * z).collect();
    if nodes.iter().chain(&weights).any(|v| !v.is_finite()) {
        return Err(EdgeError::NonFiniteMoments);
    }
    Ok(RadauRule {
        nodes,
        weights,
        n_requested: n_nodes,
        n_effective: n_nodes,
    })
}

/// `steps` diagonal entries and `steps` off-diagonal entries of the Jacobi
/// matrix of the discrete measure `(y, w)`.
fn lanczos(y: &[f64], w: &[f64], steps: usize) -> Result<(Vec<f64>, Vec<f64>), EdgeError> {
    let s = y.len();
    let norm = w.iter().sum::<f64>().sqrt();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    basis.push(w.iter().map(|v| v.sqrt() / norm).collect());
    let mut alpha = Vec::with_capacity(steps + 1);
    let mut beta = Vec::with_capacity(steps);
    for k in 0..steps {
        let q = &basis[k];
        let mut v: Vec<f64> = q.iter().zip(y).map(|(q, y)| q * y).collect();
        let a: f64 = v.iter().zip(q).map(|(v, q)| v * q).sum();
        alpha.push(a);
        // Two passes of classical Gram–Schmidt against every previous vector.
        for _ in 0..2 {
            for b in &basis {
                let c: f64 = v.iter().zip(b).map(|(v, b)| v * b).sum();
                v.iter_mut().zip(b).for_each(|(v, b)| *v -= c * b);
            }
        }
        let b = v.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !b.is_finite() || b <= f64::EPSILON * (a.abs() + y[s - 1]) {
            return Err(EdgeError::NonFiniteMoments);
        }
        beta.push(b);
        v.iter_mut().for_each(|v| *v /= b);
        basis.push(v);
    }
    Ok((alpha, beta))
}

/// Last component of the solution of `J δ = rhs · e_last` for the symmetric
/// tridiagonal `J` with diagonal `diag` and off-diagonal `off`.
fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: f64) -> Option<f64> {
    // Forward elimination; only the last pivot matters since the right-hand
    // side is zero above the last row.
    let mut pivot = diag[0];
    for (i, &b) in off.iter().enumerate() {
        if pivot == 0.0 {
            return None;
        }
        pivot = diag[i + 1] - b * b / pivot;
    }
    let d = rhs / pivot;
    d.is_finite().then_some(d)
}

/// Quadrature weight at the pinned node `y = 0`.
pub fn christoffel_volume(rule: &RadauRule) -> f64 {
    rule.weights[0]
}

/// Time-in-book at the edge: the Radon–Nikodym derivative of the age
/// measure `a_i w_i` with respect to the volume measure `w_i`, evaluated at
/// `y = 0` in a shifted Legendre basis on `[0, cutoff]` of size
/// `min(n_basis, s)`.
///
/// Computed as `Σ a_i w_i f_i² / Σ w_i f_i²` with `f = Σ_j ψ_j P_j(y_i)` and
/// `ψ = G_V⁻¹ k`, which equals the quadratic-form ratio and is a convex
/// combination of the `a_i`.
pub fn rn_tau_at_edge(measure: &PriceMeasure, n_basis: usize, cutoff: f64) -> Result<f64, EdgeError> {
    let s = measure.len();
    if s == 0 {
        return Err(EdgeError::EmptySide);
    }
    let n = n_basis.min(s).max(1);
    let table = LegendreTable::new(n);
    let mut p = vec![0.0; s * n];
    for (i, &y) in measure.y.iter().enumerate() {
        table.eval_all(y / cutoff, &mut p[i * n..(i + 1) * n]);
    }
    let mut g = vec![0.0; n * n];
    for (i, &w) in measure.w.iter().enumerate() {
        let row = &p[i * n..(i + 1) * n];
        for j in 0..n {
            for k in j..n {
                g[j * n + k] += w * row[j] * row[k];
            }
        }
    }
    for j in 0..n {
        for k in 0..j {
            g[j * n + k] = g[k * n + j];
        }
    }
    let ch = Cholesky::new(&g, n, GRAM_PIVOT_TOLERANCE).map_err(|_| EdgeError::SingularGram)?;
    let mut psi: Vec<f64> = (0..n).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } * ((2 * j + 1) as f64).sqrt()).collect();
    ch.solve(&mut psi);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..s {
        let f: f64 = p[i * n..(i + 1) * n].iter().zip(&psi).map(|(a, b)| a * b).sum();
        let wf = measure.w[i] * f * f;
        num += measure.a[i] * wf;
        den += wf;
    }
    let tau = num / den;
    if !tau.is_finite() {
        return Err(EdgeError::SingularGram);
    }
    Ok(tau)
}

/// Both edge values for one side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeValues {
    pub v_christoffel: Option<f64>,
    pub tau_edge: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeConfig {
    pub cutoff: f64,
    pub radau_nodes: usize,
    pub tau_basis: usize,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        Self {
            cutoff: DEFAULT_CUTOFF,
            radau_nodes: DEFAULT_RADAU_NODES,
            tau_basis: DEFAULT_TAU_BASIS,
        }
    }
}

/// Edge values for one side of `book`, falling back to the raw best-level
/// volume and time-in-book when an estimate cannot be formed.
pub fn edge_values(book: &OrderBook, side: Side, now_ns: u64, config: &EdgeConfig) -> EdgeValues {
    let measure = match book_measure(book, side, now_ns, config.cutoff) {
        Ok(m) => m,
        Err(_) => {
            return EdgeValues {
                v_christoffel: None,
                tau_edge: None,
            }
        }
    };
    let v_christoffel = match radau_rule(&measure, config.radau_nodes) {
        Ok(rule) => christoffel_volume(&rule),
        Err(_) => measure.w[0],
    };
    let tau_edge = rn_tau_at_edge(&measure, config.tau_basis, config.cutoff).unwrap_or(measure.a[0]);
    EdgeValues {
        v_christoffel: Some(v_christoffel),
        tau_edge: Some(tau_edge),
    }
}
