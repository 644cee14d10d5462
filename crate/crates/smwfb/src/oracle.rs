//! Ground-truth projection-operator engine.
//!
//! Every auxiliary quantity of the lattice has a definition of the form
//! e = nu P⊥[U] w^T: the value left when the row vector nu is projected onto
//! the orthogonal complement of the row space of U, read out through w (the
//! pinning vector selects the latest time slot). This module computes those
//! definitions directly with dense pseudo-inverse algebra, with no recursion
//! anywhere, so the streaming lattice can be accepted only when it matches.
//!
//! Conventions: all rows live on the block grid j = 1..n of the analysis
//! time; the row with delay d holds x(jM - d) with zeros for negative sample
//! indices. Singular values below 1e-12 of the largest are treated as zero,
//! which handles the rank-deficient pre-windowed startup.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Relative singular-value cutoff for pseudo-inverses.
pub const SV_CUTOFF: f64 = 1e-12;

/// Result of projecting a row vector on the orthogonal complement of a
/// row space. `params` follows the sign convention
/// residual = nu + params * V.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub residual: DVector<f64>,
    pub params: DVector<f64>,
    pub rank: usize,
}

/// Orthonormal basis of the row space of `rows` (possibly rank deficient).
/// Returns an r x L matrix with orthonormal rows.
fn row_space_basis(rows: &DMatrix<f64>) -> DMatrix<f64> {
    if rows.nrows() == 0 {
        return DMatrix::zeros(0, rows.ncols());
    }
    let svd = rows.clone().svd(false, true);
    let vt = svd.v_t.expect("svd with v_t");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > SV_CUTOFF * smax && **s > 0.0)
        .count();
    vt.rows(0, rank).into_owned()
}

/// nu - nu P[basis] for an orthonormal `basis`.
fn subtract_projection(nu: &DVector<f64>, basis: &DMatrix<f64>) -> DVector<f64> {
    if basis.nrows() == 0 {
        return nu.clone();
    }
    let coeffs = basis * nu; // r x 1
    nu - basis.transpose() * coeffs
}

/// Least-squares residual and (minimum-norm) parameter vector of projecting
/// `nu` on the orthogonal complement of the rows of `v`.
pub fn residual_projection(nu: &DVector<f64>, v: &DMatrix<f64>) -> Result<ProjectionResult> {
    if v.nrows() > 0 && v.ncols() != nu.len() {
        return Err(Error::DimensionMismatch(format!(
            "vector has {} columns, matrix has {}",
            nu.len(),
            v.ncols()
        )));
    }
    if v.nrows() == 0 {
        return Ok(ProjectionResult {
            residual: nu.clone(),
            params: DVector::zeros(0),
            rank: 0,
        });
    }
    let svd = v.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd u");
    let vt = svd.v_t.as_ref().expect("svd v_t");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > SV_CUTOFF * smax && **s > 0.0)
        .count();
    // params = -nu * pinv(V) with pinv(V) = W S^-1 U^T
    let mut params = DVector::zeros(v.nrows());
    for r in 0..rank {
        let w_r = vt.row(r).transpose();
        let coeff = nu.dot(&w_r) / svd.singular_values[r];
        params += u.column(r) * (-coeff);
    }
    let residual = nu + v.transpose() * &params;
    Ok(ProjectionResult {
        residual,
        params,
        rank,
    })
}

/// Auxiliary quantity kinds. Cross-band kinds live on the per-channel sample
/// grid, channel kinds on the constrained block grid, scalar kinds are the
/// full-rate (M = 1) specialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QuantityKind {
    /// epsilon_i^q(Mn-i)
    CrossForward,
    /// gamma_i^q(Mn-i-1)
    CrossBackward,
    /// delta-hat_q^i(Mn-i-1)
    CrossDelta,
    /// e_i^p(Mn-i)
    ChannelForward,
    /// r_i^p(Mn-M)
    ChannelBackward,
    /// delta_p^i(Mn-M)
    ChannelDelta,
    /// e^p(n), full rate
    ScalarForward,
    /// r^p(n-1), full rate
    ScalarBackward,
}

/// Row with delay `d` on the block grid j = 1..n: slot j holds x(jM - d).
pub fn grid_row(s: &Signal, m_decim: usize, delay: usize, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |j0, _| {
        let idx = ((j0 + 1) * m_decim) as isize - delay as isize;
        if idx < 0 {
            0.0
        } else {
            s.get(idx)
        }
    })
}

fn pinning(n: usize) -> DVector<f64> {
    let mut p = DVector::zeros(n);
    if n > 0 {
        p[n - 1] = 1.0;
    }
    p
}

fn grid_matrix(s: &Signal, m_decim: usize, delays: impl Iterator<Item = usize>, n: usize) -> DMatrix<f64> {
    let rows: Vec<DVector<f64>> = delays.map(|d| grid_row(s, m_decim, d, n)).collect();
    let mut mat = DMatrix::zeros(rows.len(), n);
    for (r, row) in rows.iter().enumerate() {
        mat.set_row(r, &row.transpose());
    }
    mat
}

/// Evaluate one auxiliary quantity from its projection definition.
///
/// `order` is q for cross-band kinds, p for channel and scalar kinds; `i` is
/// the channel index (ignored for scalar kinds); `n` is the analysis block
/// (for scalar kinds, the full-rate time index of the forward error).
pub fn projection_quantity(
    kind: QuantityKind,
    data: &Signal,
    m_decim: usize,
    i: usize,
    order: usize,
    n: usize,
) -> Result<f64> {
    if m_decim == 0 {
        return Err(Error::InvalidParameter("M must be >= 1".into()));
    }
    let m = m_decim;
    match kind {
        QuantityKind::CrossForward | QuantityKind::CrossBackward | QuantityKind::CrossDelta => {
            if i >= m {
                return Err(Error::InvalidParameter(format!("channel {} >= M {}", i, m)));
            }
            let q = order;
            let u = grid_matrix(data, m, (0..q).map(|r| i + 1 + r), n);
            let nu = match kind {
                QuantityKind::CrossForward => grid_row(data, m, i, n),
                QuantityKind::CrossBackward => grid_row(data, m, i + 1 + q, n),
                _ => pinning(n),
            };
            let res = residual_projection(&nu, &u)?;
            Ok(res.residual[n - 1])
        }
        QuantityKind::ChannelForward | QuantityKind::ChannelBackward | QuantityKind::ChannelDelta => {
            if i >= m {
                return Err(Error::InvalidParameter(format!("channel {} >= M {}", i, m)));
            }
            let p = order;
            let constraint = grid_matrix(data, m, (0..m - 1 - i).map(|r| i + 1 + r), n);
            let cbasis = row_space_basis(&constraint);
            let nu0 = match kind {
                QuantityKind::ChannelForward => grid_row(data, m, i, n),
                QuantityKind::ChannelBackward => grid_row(data, m, m + p, n),
                _ => pinning(n),
            };
            let nu = subtract_projection(&nu0, &cbasis);
            let mut u = grid_matrix(data, m, (0..p).map(|r| m + r), n);
            for r in 0..u.nrows() {
                let row = subtract_projection(&u.row(r).transpose(), &cbasis);
                u.set_row(r, &row.transpose());
            }
            let res = residual_projection(&nu, &u)?;
            if kind == QuantityKind::ChannelDelta {
                // delta = (pi P⊥[C] P⊥[U]) (pi P⊥[C])^T = squared norm of the
                // doubly projected pinning vector
                Ok(res.residual.dot(&nu))
            } else {
                Ok(res.residual[n - 1])
            }
        }
        QuantityKind::ScalarForward | QuantityKind::ScalarBackward => {
            let p = order;
            let u = grid_matrix(data, 1, (0..p).map(|r| 1 + r), n);
            let nu = match kind {
                QuantityKind::ScalarForward => grid_row(data, 1, 0, n),
                _ => grid_row(data, 1, 1 + p, n),
            };
            let res = residual_projection(&nu, &u)?;
            Ok(res.residual[n - 1])
        }
    }
}

/// Both sides of the inner-product update identity (projection space grown by
/// one row `nu_next`). `degenerate` flags nu_next (numerically) inside the
/// span of `v`, where the raw identity needs the pseudo-inverse reading.
#[derive(Debug, Clone, Serialize)]
pub struct InnerProductCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub degenerate: bool,
}

pub fn check_inner_product_update(
    nu: &DVector<f64>,
    v: &DMatrix<f64>,
    w: &DVector<f64>,
    nu_next: &DVector<f64>,
) -> Result<InnerProductCheck> {
    let basis = row_space_basis(v);
    let res_next = subtract_projection(nu_next, &basis);
    let denom = res_next.dot(&res_next);
    let degenerate = denom <= SV_CUTOFF * nu_next.dot(nu_next);

    // grown space
    let mut grown = DMatrix::zeros(v.nrows() + 1, nu.len());
    for r in 0..v.nrows() {
        grown.set_row(r, &v.row(r));
    }
    grown.set_row(v.nrows(), &nu_next.transpose());
    let gbasis = row_space_basis(&grown);
    let lhs = subtract_projection(nu, &gbasis).dot(w);

    let res_nu = subtract_projection(nu, &basis);
    let res_w = subtract_projection(w, &basis);
    let rhs = if degenerate {
        res_nu.dot(&res_w)
    } else {
        res_nu.dot(&res_w) - res_nu.dot(&res_next) / denom * res_next.dot(&res_w)
    };
    Ok(InnerProductCheck {
        lhs,
        rhs,
        degenerate,
    })
}

/// Numerical discrepancies of the space identities used by the recursions:
/// the augmented-space lemma, the channel-orthogonality corollary, and the
/// constrained-projection decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct SpaceIdentityReport {
    pub lemma2: f64,
    pub corollary1: f64,
    pub corollary13: f64,
}

impl SpaceIdentityReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.lemma2.max(self.corollary1).max(self.corollary13)
    }
}

fn projector(basis: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    if basis.nrows() == 0 {
        return DMatrix::zeros(dim, dim);
    }
    basis.transpose() * basis
}

/// One-row orthonormal basis for a residual direction, or an empty basis when
/// the residual is zero relative to the original vector's scale (the residual
/// of a vector lying in the projected-away span is pure rounding noise and
/// must not be normalized into a direction).
fn residual_basis(residual: &DVector<f64>, scale: f64) -> DMatrix<f64> {
    let norm = residual.norm();
    if norm <= SV_CUTOFF * scale.max(1e-300) {
        DMatrix::zeros(0, residual.len())
    } else {
        DMatrix::from_rows(&[(residual / norm).transpose()])
    }
}

pub fn check_space_identities(
    nu: &DVector<f64>,
    x: &DVector<f64>,
    v: &DMatrix<f64>,
    w: &DVector<f64>,
) -> Result<SpaceIdentityReport> {
    let dim = nu.len();
    let vbasis = row_space_basis(v);

    // x P⊥[V] as a one-row space
    let x_perp_v = subtract_projection(x, &vbasis);
    let xpv_basis = residual_basis(&x_perp_v, x.norm());

    // Lemma 2: P[V P⊥[x P⊥[V]]] = P[V]
    let mut v_proj = v.clone();
    for r in 0..v_proj.nrows() {
        let row = subtract_projection(&v_proj.row(r).transpose(), &xpv_basis);
        v_proj.set_row(r, &row.transpose());
    }
    let lemma2 = (projector(&row_space_basis(&v_proj), dim) - projector(&vbasis, dim)).norm();

    // Corollary 1:
    // nu P⊥[xP⊥[V]] P⊥[V P⊥[xP⊥[V]]] w^T = nu P⊥[x] P⊥[V P⊥[x]] w^T
    let lhs = {
        let nu1 = subtract_projection(nu, &xpv_basis);
        let basis2 = row_space_basis(&v_proj);
        let w1 = subtract_projection(w, &xpv_basis);
        subtract_projection(&nu1, &basis2).dot(&w1)
    };
    let rhs = {
        let xmat = DMatrix::from_rows(&[x.transpose()]);
        let xbasis = row_space_basis(&xmat);
        let nu1 = subtract_projection(nu, &xbasis);
        let mut vproj = v.clone();
        for r in 0..vproj.nrows() {
            let row = subtract_projection(&vproj.row(r).transpose(), &xbasis);
            vproj.set_row(r, &row.transpose());
        }
        let basis2 = row_space_basis(&vproj);
        let w1 = subtract_projection(w, &xbasis);
        subtract_projection(&nu1, &basis2).dot(&w1)
    };
    let corollary1 = (lhs - rhs).abs();

    // Corollary 1.3:
    // nu P⊥[x] P⊥[V P⊥[x]] w^T = nu P⊥[V] w^T - nu P[x P⊥[V]] w^T
    let lhs13 = rhs; // same expression as corollary 1's RHS
    let rhs13 = {
        let t1 = subtract_projection(nu, &vbasis).dot(w);
        let t2 = if xpv_basis.nrows() == 0 {
            0.0
        } else {
            let b = xpv_basis.row(0).transpose();
            nu.dot(&b) * w.dot(&b)
        };
        t1 - t2
    };
    let corollary13 = (lhs13 - rhs13).abs();

    Ok(SpaceIdentityReport {
        lemma2,
        corollary1,
        corollary13,
    })
}

/// Both sides of the pseudo-inverse update relation: the row-extension and
/// constraint terms that drive the parameter-estimation recursions.
pub fn check_pseudo_inverse_update(
    z: &DVector<f64>,
    v: &DMatrix<f64>,
    x: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = v.nrows();
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one row".into()));
    }
    // z K_n[x] where K_n[x] is the pseudo-inverse of the x-projected rows
    let xmat = DMatrix::from_rows(&[x.transpose()]);
    let xbasis = row_space_basis(&xmat);
    let mut vx = v.clone();
    for r in 0..n {
        let row = subtract_projection(&vx.row(r).transpose(), &xbasis);
        vx.set_row(r, &row.transpose());
    }
    let lhs = -residual_projection(z, &vx)?.params;

    // RHS terms built from the n-1 row space
    let v_head = v.rows(0, n - 1).into_owned();
    let head_basis = row_space_basis(&v_head);
    let nu_n = v.row(n - 1).transpose();

    let k_head = |vec: &DVector<f64>| -> DVector<f64> {
        -residual_projection(vec, &v_head).unwrap().params
    };
    let k_full = |vec: &DVector<f64>| -> DVector<f64> {
        -residual_projection(vec, v).unwrap().params
    };

    let mut rhs = DVector::zeros(n);
    let zk = k_head(z);
    for r in 0..n - 1 {
        rhs[r] = zk[r];
    }
    let res_nu = subtract_projection(&nu_n, &head_basis);
    let denom = res_nu.dot(&res_nu);
    if denom > SV_CUTOFF * nu_n.norm_squared().max(1e-300) {
        let coeff = subtract_projection(z, &head_basis).dot(&nu_n) / denom;
        let nk = k_head(&nu_n);
        for r in 0..n - 1 {
            rhs[r] += coeff * (-nk[r]);
        }
        rhs[n - 1] += coeff;
    }
    let vbasis = row_space_basis(v);
    let xres = subtract_projection(x, &vbasis);
    let xden = xres.dot(&xres);
    if xden > SV_CUTOFF * x.norm_squared().max(1e-300) {
        let coeff = subtract_projection(z, &vbasis).dot(x) / xden;
        let xk = k_full(x);
        for r in 0..n {
            rhs[r] += coeff * (-xk[r]);
        }
    }
    Ok((lhs, rhs))
}

/// Constrained least-squares filter coefficients computed directly.
#[derive(Debug, Clone)]
pub struct LsCoefficients {
    /// Prediction taps over the shared regressor rows x(Mn-M-r), r = 0..p-1.
    pub h: Vec<f64>,
    /// Prefilter row over the constraint rows x(Mn-i-1-r).
    pub a: Vec<f64>,
    pub regressor_rank: usize,
    pub constraint_rank: usize,
}

/// Solve the channel-i constrained prediction problem of order `p` at block
/// `n`: h minimizes the constrained residual, a completes the prefilter row.
pub fn ls_filter_coeffs(
    data: &Signal,
    m_decim: usize,
    i: usize,
    p: usize,
    n: usize,
) -> Result<LsCoefficients> {
    let m = m_decim;
    if m == 0 || i >= m {
        return Err(Error::InvalidParameter("need 0 <= i < M".into()));
    }
    let constraint = grid_matrix(data, m, (0..m - 1 - i).map(|r| i + 1 + r), n);
    let cbasis = row_space_basis(&constraint);
    let nu0 = grid_row(data, m, i, n);
    let nu = subtract_projection(&nu0, &cbasis);
    let u0 = grid_matrix(data, m, (0..p).map(|r| m + r), n);
    let mut u = u0.clone();
    for r in 0..u.nrows() {
        let row = subtract_projection(&u.row(r).transpose(), &cbasis);
        u.set_row(r, &row.transpose());
    }
    let fwd = residual_projection(&nu, &u)?;
    let h: Vec<f64> = fwd.params.iter().cloned().collect();

    // a_i = -(x(Mn-i) + h X_p) C^T (C C^T)^-1, pseudo-inverse when deficient
    let mut target = nu0.clone();
    for (r, hr) in h.iter().enumerate() {
        target += u0.row(r).transpose() * *hr;
    }
    let aproj = residual_projection(&target, &constraint)?;
    Ok(LsCoefficients {
        h,
        a: aproj.params.iter().cloned().collect(),
        regressor_rank: fwd.rank,
        constraint_rank: aproj.rank,
    })
}

/// Per-quantity worst-case errors for a verification run, serialized to JSON.
#[derive(Debug, Clone, Serialize)]
pub struct QuantityError {
    pub kind: String,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub worst_block: usize,
    pub worst_channel: usize,
    pub worst_order: usize,
}
