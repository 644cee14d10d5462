//! Order-recursive estimation of the analysis filter-bank parameters.
//!
//! The lattice produces residuals, not filter taps. This module recovers the
//! taps from the lattice's retained quotients:
//!
//! * per-phase ladder coefficient pairs (the forward/backward parameter
//!   vectors behind eps^q and gam^q; at M = 1 these are the classic c/d
//!   ladder vectors),
//! * per-channel constrained taps h_i and their backward companions g_i,
//!   where channel M-1 seeds from the ladder vectors and each channel i
//!   inherits g from channel i+1 through the same transfer quotient that
//!   moves the backward residual,
//! * the prefilter rows a_i, solved directly from a running block-grid Gram
//!   every reporting interval (with an optional rank-one-update fast path).
//!
//! All parameter vectors follow the sign convention residual = nu + theta * U,
//! so for an AR(1) process with coefficient 0.5 the first tap estimates -0.5.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ChannelOutputs, Whitener};
use crate::signal::Signal;

/// Lattice-derived parameter vectors per order and channel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub channels: usize,
    pub order: usize,
    /// Forward ladder vectors per phase and order; entry [j][q] has length q.
    pub cross_fwd: Vec<Vec<Vec<f64>>>,
    /// Backward ladder vectors per phase and order.
    pub cross_bwd: Vec<Vec<Vec<f64>>>,
    /// Constrained forward taps per channel and order; [i][p] has length p.
    pub h: Vec<Vec<Vec<f64>>>,
    /// Backward companions per channel and order.
    pub g: Vec<Vec<Vec<f64>>>,
    /// Prefilter rows; a[i] has length M-1-i.
    pub a: Vec<Vec<f64>>,
}

impl CoefficientSet {
    fn new(channels: usize, order: usize, depth: usize) -> Self {
        let ladder = |_: usize| -> Vec<Vec<f64>> {
            (0..=depth).map(|q| vec![0.0; q]).collect()
        };
        let chain = |_: usize| -> Vec<Vec<f64>> {
            (0..=order).map(|p| vec![0.0; p]).collect()
        };
        CoefficientSet {
            channels,
            order,
            cross_fwd: (0..channels).map(ladder).collect(),
            cross_bwd: (0..channels).map(ladder).collect(),
            h: (0..channels).map(chain).collect(),
            g: (0..channels).map(chain).collect(),
            a: (0..channels)
                .map(|i| vec![0.0; channels - 1 - i])
                .collect(),
        }
    }

    /// Scalar-predictor forward vectors (the phase-0 ladder).
    pub fn c(&self) -> &Vec<Vec<f64>> {
        &self.cross_fwd[0]
    }

    /// Scalar-predictor backward vectors (the phase-0 ladder).
    pub fn d(&self) -> &Vec<Vec<f64>> {
        &self.cross_bwd[0]
    }

    /// Full-order taps of channel i.
    pub fn h_full(&self, i: usize) -> &[f64] {
        &self.h[i][self.order]
    }
}

/// Sherman-Morrison state for one channel's constraint Gram inverse.
#[derive(Debug, Clone)]
struct FastPrefilter {
    inv: Option<DMatrix<f64>>,
    dim: usize,
}

impl FastPrefilter {
    fn update(&mut self, gram_c: &DMatrix<f64>, u: &DVector<f64>, lambda: f64, blocks: usize) {
        if self.dim == 0 {
            return;
        }
        match &mut self.inv {
            Some(inv) => {
                // (lambda G + u u^T)^-1 from G^-1
                let iu = &*inv * u;
                let denom = lambda + u.dot(&iu);
                let correction = &iu * iu.transpose() / denom;
                *inv = (&*inv - correction) / lambda;
            }
            None => {
                if blocks >= self.dim + 4 {
                    self.inv = gram_c.clone().try_inverse();
                }
            }
        }
    }
}

/// Streaming coefficient estimator; drive with one `update_coefficients` per
/// processed block, immediately after `Whitener::process_block`.
#[derive(Debug, Clone)]
pub struct CoefficientEstimator {
    channels: usize,
    order: usize,
    depth: usize,
    lambda: f64,
    report_interval: usize,
    blocks: usize,
    set: CoefficientSet,
    /// Running Gram over delays 0..M+N-1 on the block grid.
    gram: DMatrix<f64>,
    /// The last M+N samples, newest first.
    history: Vec<f64>,
    fast: Vec<FastPrefilter>,
}

impl CoefficientEstimator {
    /// Estimator with the default prefilter reporting cadence of 16 blocks.
    /// An order whose update quotient is skipped keeps its previous
    /// coefficient vector for that block (freeze-on-skip).
    pub fn new(whitener: &Whitener) -> Self {
        Self::with_report_interval(whitener, 16)
    }

    pub fn with_report_interval(whitener: &Whitener, report_interval: usize) -> Self {
        let cfg = whitener.config();
        let m = cfg.channels;
        let n = cfg.order;
        let depth = whitener.ladder_depth();
        let span = m + n;
        CoefficientEstimator {
            channels: m,
            order: n,
            depth,
            lambda: cfg.forgetting,
            report_interval: report_interval.max(1),
            blocks: 0,
            set: CoefficientSet::new(m, n, depth),
            gram: DMatrix::zeros(span, span),
            history: vec![0.0; span],
            fast: (0..m)
                .map(|i| FastPrefilter {
                    inv: None,
                    dim: m - 1 - i,
                })
                .collect(),
        }
    }

    pub fn coefficients(&self) -> &CoefficientSet {
        &self.set
    }

    pub fn blocks_processed(&self) -> usize {
        self.blocks
    }

    /// Apply the parameter recursions for the block just processed by
    /// `whitener`. `samples` must be the same block that was fed to it.
    pub fn update_coefficients(&mut self, whitener: &Whitener, samples: &[f64]) -> Result<()> {
        let m = self.channels;
        let n = self.order;
        let d = self.depth;
        if samples.len() != m {
            return Err(Error::WrongSampleCount {
                expected: m,
                got: samples.len(),
            });
        }
        if whitener.blocks_processed() != self.blocks + 1 {
            return Err(Error::InvalidParameter(format!(
                "estimator at block {} but whitener at {}",
                self.blocks,
                whitener.blocks_processed()
            )));
        }
        let quots = whitener.last_block_quotients();

        // phase-0 backward vectors of the previous block seed both the first
        // ladder replay and g_{M-1}
        let bwd_prev_block = self.set.cross_bwd[0].clone();

        // ladder replay in processing order: phases M-1 down to 0
        for idx in 0..m {
            let phase = m - 1 - idx;
            let lq = &quots.ladder[phase];
            let prev_bwd = if phase == m - 1 {
                &bwd_prev_block
            } else {
                &self.set.cross_bwd[phase + 1]
            };
            let mut new_fwd: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
            let mut new_bwd: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
            new_fwd.push(Vec::new());
            new_bwd.push(Vec::new());
            for q in 0..d {
                let fwd = match lq.fwd[q] {
                    Some(qf) => {
                        let mut v = new_fwd[q].clone();
                        v.push(0.0);
                        for (r, slot) in v.iter_mut().enumerate() {
                            let prev = if r < q { prev_bwd[q][r] } else { 1.0 };
                            *slot -= qf * prev;
                        }
                        v
                    }
                    None => self.set.cross_fwd[phase][q + 1].clone(),
                };
                let bwd = match lq.bwd[q] {
                    Some(qb) => {
                        let mut v = vec![0.0; q + 1];
                        v[1..].copy_from_slice(&prev_bwd[q]);
                        for (r, slot) in v.iter_mut().enumerate() {
                            let cur = if r == 0 { 1.0 } else { new_fwd[q][r - 1] };
                            *slot -= qb * cur;
                        }
                        v
                    }
                    None => self.set.cross_bwd[phase][q + 1].clone(),
                };
                new_fwd.push(fwd);
                new_bwd.push(bwd);
            }
            self.set.cross_fwd[phase] = new_fwd;
            self.set.cross_bwd[phase] = new_bwd;
        }

        // channel chains: channel M-1 aliases the ladder vectors
        for p in 0..=n {
            self.set.h[m - 1][p] = self.set.cross_fwd[m - 1][p].clone();
            self.set.g[m - 1][p] = bwd_prev_block[p].clone();
        }
        for i in (0..m.saturating_sub(1)).rev() {
            let cq = &quots.channel[i];
            for p in 0..=n {
                let mut g = self.set.g[i + 1][p].clone();
                if let Some(t) = cq.transfer[p] {
                    for (r, slot) in g.iter_mut().enumerate() {
                        *slot -= t * self.set.h[i + 1][p][r];
                    }
                }
                self.set.g[i][p] = g;
            }
            for p in 0..n {
                if let Some(qe) = cq.order[p] {
                    let mut v = self.set.h[i][p].clone();
                    v.push(0.0);
                    for (r, slot) in v.iter_mut().enumerate() {
                        let gr = if r < p { self.set.g[i][p][r] } else { 1.0 };
                        *slot -= qe * gr;
                    }
                    self.set.h[i][p + 1] = v;
                }
            }
        }

        // running block-grid Gram over delays 0..M+N-1
        let span = m + n;
        for &x in samples {
            self.history.rotate_right(1);
            self.history[0] = x;
        }
        let lagvec = DVector::from_fn(span, |a, _| self.history[a]);
        self.gram = &self.gram * self.lambda + &lagvec * lagvec.transpose();
        self.blocks += 1;

        // prefilter rows on the reporting cadence
        for i in 0..m {
            let dim = m - 1 - i;
            if dim == 0 {
                continue;
            }
            let gram_c = self.constraint_gram(i);
            let u = DVector::from_fn(dim, |r, _| self.history[i + 1 + r]);
            let blocks = self.blocks;
            let lambda = self.lambda;
            self.fast[i].update(&gram_c, &u, lambda, blocks);
            if self.blocks % self.report_interval == 0 {
                self.set.a[i] = self.solve_prefilter(i)?;
            }
        }
        Ok(())
    }

    fn constraint_gram(&self, i: usize) -> DMatrix<f64> {
        let dim = self.channels - 1 - i;
        DMatrix::from_fn(dim, dim, |r, c| self.gram[(i + 1 + r, i + 1 + c)])
    }

    fn prefilter_rhs(&self, i: usize) -> DVector<f64> {
        let m = self.channels;
        let dim = m - 1 - i;
        let h = &self.set.h[i][self.order];
        DVector::from_fn(dim, |r, _| {
            let mut v = self.gram[(i, i + 1 + r)];
            for (p, hp) in h.iter().enumerate() {
                v += hp * self.gram[(m + p, i + 1 + r)];
            }
            v
        })
    }

    /// Direct prefilter solve for channel i:
    /// a_i = -(x(Mn-i) + h_i X_N) C^T (C C^T)^-1 from the running Gram,
    /// with a pseudo-inverse fallback when the constraint Gram is deficient.
    pub fn solve_prefilter(&self, i: usize) -> Result<Vec<f64>> {
        let m = self.channels;
        if i >= m {
            return Err(Error::InvalidParameter(format!("channel {} >= M", i)));
        }
        let dim = m - 1 - i;
        if dim == 0 {
            return Ok(Vec::new());
        }
        let gram_c = self.constraint_gram(i);
        let rhs = self.prefilter_rhs(i);
        let svd = gram_c.svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let sol = svd
            .solve(&rhs, crate::oracle::SV_CUTOFF * smax.max(1e-300))
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(sol.iter().map(|v| -v).collect())
    }

    /// Rank-one-update prefilter solve; agrees with `solve_prefilter` once
    /// the constraint Gram has become invertible.
    pub fn solve_prefilter_fast(&self, i: usize) -> Option<Vec<f64>> {
        let dim = self.channels - 1 - i;
        if dim == 0 {
            return Some(Vec::new());
        }
        let inv = self.fast[i].inv.as_ref()?;
        let rhs = self.prefilter_rhs(i);
        let sol = inv * rhs;
        Some(sol.iter().map(|v| -v).collect())
    }

    /// Refresh every prefilter row by direct solve (ignores the cadence).
    pub fn refresh_prefilter(&mut self) -> Result<()> {
        for i in 0..self.channels {
            self.set.a[i] = self.solve_prefilter(i)?;
        }
        Ok(())
    }
}

/// Direct-form analysis bank: e(Mn) = A x(Mn) + sum_p H(p) x(M(n-p)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBankCoefficients {
    pub channels: usize,
    /// Lattice order N; the direct-form filters have length N + M.
    pub order: usize,
    pub layout_version: u32,
    /// M x M upper-triangular prefilter with unit diagonal, row major.
    pub prefilter: Vec<Vec<f64>>,
    /// Tap matrices H(p), p = 1..=N/M, each M x M row major;
    /// H(p)[i][k] multiplies x(M(n-p)-k).
    pub taps: Vec<Vec<Vec<f64>>>,
}

pub const LAYOUT_VERSION: u32 = 1;

/// Pack the full-order taps and prefilter rows into the direct form.
/// Requires N divisible by M so that the taps fill whole matrices.
pub fn assemble_direct_form(set: &CoefficientSet) -> Result<FilterBankCoefficients> {
    let m = set.channels;
    let n = set.order;
    if n % m != 0 {
        return Err(Error::InvalidParameter(format!(
            "order {} not divisible by {} channels",
            n, m
        )));
    }
    let mut prefilter = vec![vec![0.0; m]; m];
    for i in 0..m {
        prefilter[i][i] = 1.0;
        for (j, aij) in set.a[i].iter().enumerate() {
            prefilter[i][i + 1 + j] = *aij;
        }
    }
    let mut taps = Vec::with_capacity(n / m);
    for p in 1..=n / m {
        let mut hp = vec![vec![0.0; m]; m];
        for (i, row) in hp.iter_mut().enumerate() {
            for (k, slot) in row.iter_mut().enumerate() {
                *slot = set.h[i][n][m * (p - 1) + k];
            }
        }
        taps.push(hp);
    }
    Ok(FilterBankCoefficients {
        channels: m,
        order: n,
        layout_version: LAYOUT_VERSION,
        prefilter,
        taps,
    })
}

/// Causal polyphase evaluation of the direct form over a pre-windowed signal:
/// block n (starting at 1) reads x(Mn-j) and x(M(n-p)-k).
pub fn apply_direct_form(fb: &FilterBankCoefficients, s: &Signal) -> Vec<ChannelOutputs> {
    let m = fb.channels;
    if s.len() < m + 1 {
        return Vec::new();
    }
    let blocks = (s.len() - 1) / m;
    let mut out = Vec::with_capacity(blocks);
    for n in 1..=blocks {
        let mut values = vec![0.0; m];
        for (i, value) in values.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, aij) in fb.prefilter[i].iter().enumerate() {
                if *aij != 0.0 {
                    acc += aij * s.get((n * m) as isize - j as isize);
                }
            }
            for (p, hp) in fb.taps.iter().enumerate() {
                for (k, tap) in hp[i].iter().enumerate() {
                    acc += tap * s.get((m * n) as isize - (m * (p + 1) + k) as isize);
                }
            }
            *value = acc;
        }
        out.push(ChannelOutputs { block: n, values });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::WhitenerConfig;
    use crate::oracle::ls_filter_coeffs;
    use crate::signal::{apply_rational_filter, draw_excitation, generate_ar, ArModel, Excitation};

    fn gaussian(seed: u64, len: usize) -> Vec<f64> {
        draw_excitation(
            Excitation::Gaussian {
                mean: 0.0,
                variance: 1.0,
            },
            seed,
            len,
        )
        .unwrap()
        .samples()
        .to_vec()
    }

    /// Drive whitener + estimator over `blocks` blocks of a stream starting
    /// at x(1); returns (signal with x(0)=0, whitener, estimator).
    fn run(
        m: usize,
        order: usize,
        blocks: usize,
        stream: &[f64],
    ) -> (Signal, Whitener, CoefficientEstimator) {
        let mut sig = vec![0.0];
        sig.extend_from_slice(&stream[..m * blocks]);
        let mut w = Whitener::new(WhitenerConfig::new(m, order)).unwrap();
        let mut est = CoefficientEstimator::new(&w);
        for b in 0..blocks {
            let chunk = &stream[b * m..(b + 1) * m];
            w.process_block(chunk).unwrap();
            est.update_coefficients(&w, chunk).unwrap();
        }
        (Signal::from_samples(sig), w, est)
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn recursive_taps_match_direct_solve() {
        let model = ArModel::from_poles(0.8, 1.1).unwrap();
        let stream = generate_ar(
            &model,
            Excitation::Gaussian {
                mean: 0.0,
                variance: 1.0,
            },
            42,
            400,
        )
        .unwrap();
        for (m, order) in [(2usize, 3usize), (3, 2), (2, 4)] {
            let blocks = 48;
            let (sig, _, est) = run(m, order, blocks, stream.samples());
            for i in 0..m {
                for p in 1..=order {
                    let oracle = ls_filter_coeffs(&sig, m, i, p, blocks).unwrap();
                    let rec = &est.coefficients().h[i][p];
                    for (r, (a, b)) in rec.iter().zip(oracle.h.iter()).enumerate() {
                        assert!(
                            rel_close(*a, *b, 1e-6),
                            "M={} i={} p={} tap {}: rec {} oracle {}",
                            m, i, p, r, a, b
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn prefilter_matches_oracle() {
        let model = ArModel::from_poles(0.9, 0.8).unwrap();
        let stream = generate_ar(
            &model,
            Excitation::Gaussian {
                mean: 0.0,
                variance: 1.0,
            },
            7,
            300,
        )
        .unwrap();
        let (m, order, blocks) = (3usize, 3usize, 40usize);
        let (sig, _, est) = run(m, order, blocks, stream.samples());
        for i in 0..m {
            let direct = est.solve_prefilter(i).unwrap();
            let oracle = ls_filter_coeffs(&sig, m, i, order, blocks).unwrap();
            assert_eq!(direct.len(), oracle.a.len());
            for (a, b) in direct.iter().zip(oracle.a.iter()) {
                assert!(rel_close(*a, *b, 1e-8), "i={} {} vs {}", i, a, b);
            }
        }
        // i = M-1 has no constraints
        assert!(est.solve_prefilter(m - 1).unwrap().is_empty());
    }

    #[test]
    fn fast_prefilter_agrees_with_direct() {
        let stream = gaussian(11, 600);
        let (m, order, blocks) = (4usize, 4usize, 128usize);
        let (_, _, est) = run(m, order, blocks, &stream);
        for i in 0..m - 1 {
            let fast = est.solve_prefilter_fast(i).expect("fast path started");
            let direct = est.solve_prefilter(i).unwrap();
            for (a, b) in fast.iter().zip(direct.iter()) {
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn white_input_taps_near_zero() {
        let stream = gaussian(5, 4002);
        let (m, order, blocks) = (2usize, 3usize, 2000usize);
        let (_, _, est) = run(m, order, blocks, &stream);
        let bound = 3.0 / (blocks as f64).sqrt();
        for i in 0..m {
            for h in est.coefficients().h_full(i) {
                assert!(h.abs() <= bound, "h {}", h);
            }
            for a in est.solve_prefilter(i).unwrap() {
                assert!(a.abs() <= bound, "a {}", a);
            }
        }
    }

    #[test]
    fn scalar_ar1_ladder_coefficient() {
        // M = 1 degenerate path: c_1 estimates the negated AR(1) coefficient
        let w = draw_excitation(
            Excitation::Gaussian {
                mean: 0.0,
                variance: 1.0,
            },
            3,
            1101,
        )
        .unwrap();
        let s = apply_rational_filter(&w, &[1.0], &[1.0, -0.5]).unwrap();
        let (_, _, est) = run(1, 3, 1000, s.samples());
        let c1 = est.coefficients().c()[1][0];
        assert!((c1 + 0.5).abs() < 0.05, "c1 = {}", c1);
    }

    #[test]
    fn coefficients_scale_invariant() {
        let stream = gaussian(23, 300);
        let (m, order, blocks) = (2usize, 2usize, 100usize);
        let (_, _, base) = run(m, order, blocks, &stream);
        for alpha in [0.1, 10.0] {
            let scaled: Vec<f64> = stream.iter().map(|v| alpha * v).collect();
            let (_, _, est) = run(m, order, blocks, &scaled);
            for i in 0..m {
                for (a, b) in est
                    .coefficients()
                    .h_full(i)
                    .iter()
                    .zip(base.coefficients().h_full(i).iter())
                {
                    assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
                }
                let pa = est.solve_prefilter(i).unwrap();
                let pb = base.solve_prefilter(i).unwrap();
                for (a, b) in pa.iter().zip(pb.iter()) {
                    assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn assemble_zero_and_roundtrip() {
        let set = CoefficientSet::new(2, 4, 4);
        let fb = assemble_direct_form(&set).unwrap();
        for (i, row) in fb.prefilter.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, if i == j { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(fb.taps.len(), 2);
        assert!(fb.taps.iter().flatten().flatten().all(|v| *v == 0.0));
        let js = serde_json::to_string(&fb).unwrap();
        let back: FilterBankCoefficients = serde_json::from_str(&js).unwrap();
        assert_eq!(back, fb);
    }

    #[test]
    fn assemble_index_map() {
        // M=2, N=4: H(1)[i][k] = h_i[k], H(2)[i][k] = h_i[2+k]
        let mut set = CoefficientSet::new(2, 4, 4);
        set.h[0][4] = vec![1.0, 2.0, 3.0, 4.0];
        set.h[1][4] = vec![5.0, 6.0, 7.0, 8.0];
        set.a[0] = vec![9.0];
        let fb = assemble_direct_form(&set).unwrap();
        assert_eq!(fb.taps[0][0], vec![1.0, 2.0]);
        assert_eq!(fb.taps[0][1], vec![5.0, 6.0]);
        assert_eq!(fb.taps[1][0], vec![3.0, 4.0]);
        assert_eq!(fb.taps[1][1], vec![7.0, 8.0]);
        assert_eq!(fb.prefilter[0], vec![1.0, 9.0]);
        assert_eq!(fb.prefilter[1], vec![0.0, 1.0]);
        assert!(assemble_direct_form(&CoefficientSet::new(2, 3, 3)).is_err());
    }

    #[test]
    fn apply_identity_bank_returns_polyphase_samples() {
        let set = CoefficientSet::new(2, 2, 2);
        let fb = assemble_direct_form(&set).unwrap();
        let s = Signal::from_samples((0..9).map(|k| k as f64).collect());
        let outs = apply_direct_form(&fb, &s);
        assert_eq!(outs.len(), 4);
        for (n, o) in outs.iter().enumerate() {
            let base = 2 * (n + 1);
            assert_eq!(o.values, vec![base as f64, (base - 1) as f64]);
        }
    }

    #[test]
    fn impulse_response_reads_out_columns() {
        let mut set = CoefficientSet::new(2, 2, 2);
        set.h[0][2] = vec![0.25, -0.5];
        set.h[1][2] = vec![0.75, 1.5];
        set.a[0] = vec![-0.125];
        let fb = assemble_direct_form(&set).unwrap();
        let mut imp = vec![0.0; 9];
        imp[1] = 1.0; // unit impulse at x(1)
        let outs = apply_direct_form(&fb, &Signal::from_samples(imp));
        // block 1: x(2)=0, x(1)=1 -> e_0 = a_0(0)*x(1), e_1 = x(1)
        assert_eq!(outs[0].values, vec![-0.125, 1.0]);
        // block 2: x(1) sits at lag 3 = M*1+1, the k=1 column of H(1)
        assert_eq!(outs[1].values, vec![-0.5, 1.5]);
        // block 3 and on: zero again (filter length exhausted)
        assert!(outs[2].values.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn residual_identity_direct_form_equals_lattice() {
        let model = ArModel::from_poles(0.85, 0.9).unwrap();
        let stream = generate_ar(
            &model,
            Excitation::Gaussian {
                mean: 0.0,
                variance: 1.0,
            },
            31,
            1000,
        )
        .unwrap();
        let (m, order, blocks) = (2usize, 4usize, 400usize);
        let mut sig = vec![0.0];
        sig.extend_from_slice(&stream.samples()[..m * blocks]);
        let sig = Signal::from_samples(sig);
        let mut w = Whitener::new(WhitenerConfig::new(m, order)).unwrap();
        let mut est = CoefficientEstimator::new(&w);
        for b in 0..blocks {
            let chunk = &stream.samples()[b * m..(b + 1) * m];
            let out = w.process_block(chunk).unwrap();
            est.update_coefficients(&w, chunk).unwrap();
            if b >= blocks - blocks / 10 {
                // block-n coefficients reproduce block-n lattice outputs
                est.refresh_prefilter().unwrap();
                let fb = assemble_direct_form(est.coefficients()).unwrap();
                let direct = apply_direct_form(&fb, &sig);
                let dv = &direct[b].values;
                for (i, (a, b_)) in dv.iter().zip(out.values.iter()).enumerate() {
                    assert!(
                        (a - b_).abs() <= 1e-8 * b_.abs().max(1.0),
                        "block {} ch {}: direct {} lattice {}",
                        b, i, a, b_
                    );
                }
            }
        }
    }
}
