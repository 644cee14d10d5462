//! Streaming exact least-squares whitening filter bank.
//!
//! The bank consumes the input one M-sample block at a time and emits the M
//! decimated channel outputs e_i^N(Mn-i), the least-squares prediction errors
//! constrained to be orthogonal in time and across channels.
//!
//! Internally the state is organized as M coupled per-phase lattice chains
//! plus a constrained channel section:
//!
//! * Per sample x(t) with phase j = (-t) mod M, a ladder pass computes the
//!   forward/backward residual chains eps^q(t), gam^q(t) together with their
//!   correlation registers. The order-q step consumes the order-q values of
//!   the previous sample (the next phase, or the last phase of the previous
//!   block), so the chains interleave across phases. At M = 1 this reduces
//!   exactly to the classic scalar LS lattice.
//! * After the block's M passes, the channel section builds the constrained
//!   residuals. Channel M-1 has an empty constraint set and aliases the
//!   ladder directly: its forward errors are the first sample's eps chain and
//!   its backward errors are the previous block's phase-0 gam chain. Each
//!   remaining channel i is produced from channel i+1 by the cross-channel
//!   transfer (one more constraint row enters the projection), followed by
//!   the per-channel time updates and the order recursion in p.
//!
//! Every register kept here has a direct projection-operator definition and
//! is validated against the dense oracle; see the `verify` module.
//!
//! Startup ("exact initialization") is handled by divisor guards: a quotient
//! is applied only when its denominator exceeds `eps_reg`. In exact
//! arithmetic a vanishing denominator implies the corresponding correction is
//! identically zero (the pinning vector or the new regressor row already lies
//! in the projection span), so skipping reproduces the pseudo-inverse oracle.
//! The stream starts at x(1): block n carries samples x(M(n-1)+1 .. Mn), and
//! the sample at index 0 never enters any data vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Configuration of the whitening filter bank.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WhitenerConfig {
    /// Number of channels M (M = 1 degenerates to the scalar lattice).
    pub channels: usize,
    /// Lattice order N: the number of shared regressor rows x(Mn-M-r).
    pub order: usize,
    /// Forgetting factor lambda in (0, 1]; 1 is the growing-memory algorithm.
    pub forgetting: f64,
    /// Divisor guard for exact initialization (absolute).
    pub eps_reg: f64,
}

impl WhitenerConfig {
    pub fn new(channels: usize, order: usize) -> Self {
        WhitenerConfig {
            channels,
            order,
            forgetting: 1.0,
            eps_reg: 1e-12,
        }
    }

    pub fn with_forgetting(mut self, lambda: f64) -> Self {
        self.forgetting = lambda;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::InvalidParameter("channels must be >= 1".into()));
        }
        if self.order == 0 {
            return Err(Error::InvalidParameter("order must be >= 1".into()));
        }
        if !(self.forgetting > 0.0 && self.forgetting <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "forgetting {} outside (0, 1]",
                self.forgetting
            )));
        }
        if self.eps_reg <= 0.0 {
            return Err(Error::InvalidParameter("eps_reg must be > 0".into()));
        }
        Ok(())
    }
}

/// Channel outputs of one processed block: entry i is e_i^N(Mn-i).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelOutputs {
    pub block: usize,
    pub values: Vec<f64>,
}

/// Exact addition/multiplication counts (divisions count as multiplications).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    pub adds: u64,
    pub mults: u64,
}

/// One per-phase ladder: values at the phase's most recent sample plus the
/// correlation registers accumulated on that phase's block-spaced grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseLadder {
    /// Forward residuals eps^q(t), q = 0..=depth.
    pub eps: Vec<f64>,
    /// Backward residuals gam^q(t).
    pub gam: Vec<f64>,
    /// Pinning-vector energies delta-hat_q(t), in [0, 1].
    pub dhat: Vec<f64>,
    /// Cross correlations Delta_{eps,gam}^q (equal to Delta_{gam,eps}^q).
    pub delta: Vec<f64>,
    /// Forward energies R_q^eps.
    pub r_fwd: Vec<f64>,
    /// Backward energies R_q^gam.
    pub r_bwd: Vec<f64>,
}

impl PhaseLadder {
    fn new(depth: usize) -> Self {
        PhaseLadder {
            eps: vec![0.0; depth + 1],
            gam: vec![0.0; depth + 1],
            dhat: vec![1.0; depth + 1],
            delta: vec![0.0; depth + 1],
            r_fwd: vec![0.0; depth + 1],
            r_bwd: vec![0.0; depth + 1],
        }
    }
}

/// Constrained-channel registers for one channel i < M-1 (channel M-1 aliases
/// the ladder and keeps no registers of its own).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelSection {
    /// Forward residual chain e_i^p(Mn-i) of the last processed block.
    pub e: Vec<f64>,
    /// Transferred backward residuals r_i^p(Mn-M).
    pub r: Vec<f64>,
    /// Constrained pinning energies delta_p^i(Mn-M).
    pub delta_pin: Vec<f64>,
    /// Cross correlations Delta_{e_i,r_i}^p.
    pub delta: Vec<f64>,
    /// Forward energies R_p^{e_i}.
    pub r_e: Vec<f64>,
    /// Backward energies R_p^{r_i}.
    pub r_r: Vec<f64>,
}

impl ChannelSection {
    fn new(order: usize) -> Self {
        ChannelSection {
            e: vec![0.0; order + 1],
            r: vec![0.0; order + 1],
            delta_pin: vec![1.0; order + 1],
            delta: vec![0.0; order + 1],
            r_e: vec![0.0; order + 1],
            r_r: vec![0.0; order + 1],
        }
    }
}

/// Phase-0 values frozen at the end of the previous block; the channel
/// section reads r_{M-1}^p(Mn-M), delta_p^{M-1}(Mn-M) and R_p^{r_{M-1}} here.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Phase0Snapshot {
    pub gam: Vec<f64>,
    pub dhat: Vec<f64>,
    pub r_bwd: Vec<f64>,
}

/// Per-order quotients of one ladder pass, retained for the coefficient
/// estimator (None where the update was skipped).
#[derive(Debug, Clone, Default)]
pub(crate) struct LadderQuotients {
    pub fwd: Vec<Option<f64>>,
    pub bwd: Vec<Option<f64>>,
}

/// Per-order quotients of the channel section for one channel.
#[derive(Debug, Clone, Default)]
pub(crate) struct ChannelQuotients {
    /// Cross-channel transfer quotient at each order p.
    pub transfer: Vec<Option<f64>>,
    /// Forward order-update quotient at each order p.
    pub order: Vec<Option<f64>>,
}

/// All quotients of the last processed block, in processing order.
#[derive(Debug, Clone, Default)]
pub(crate) struct BlockQuotients {
    /// Indexed by phase j = 0..M-1.
    pub ladder: Vec<LadderQuotients>,
    /// Indexed by channel i = 0..M-1 (entry M-1 unused).
    pub channel: Vec<ChannelQuotients>,
}

/// Streaming whitener state.
#[derive(Debug, Clone)]
pub struct Whitener {
    cfg: WhitenerConfig,
    depth: usize,
    blocks: usize,
    ladder: Vec<PhaseLadder>,
    chan: Vec<ChannelSection>,
    phase0_prev: Phase0Snapshot,
    ops_block: OpCounters,
    ops_total: OpCounters,
    quotients: BlockQuotients,
}

/// Full register dump; serializes to JSON and round-trips exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WhitenerSnapshot {
    pub config: WhitenerConfig,
    pub blocks_processed: usize,
    pub ladder: Vec<PhaseLadder>,
    /// Channel sections for i = 0..M-1; entry M-1 is materialized from the
    /// ladder aliases so every channel is inspectable uniformly.
    pub channels: Vec<ChannelSection>,
    pub ops_last_block: OpCounters,
    pub ops_total: OpCounters,
}

impl Whitener {
    /// Fresh state: correlations zero, all pinning energies 1 (the empty
    /// projection of the unit pinning vector).
    pub fn new(cfg: WhitenerConfig) -> Result<Self> {
        cfg.validate()?;
        let depth = cfg.order.max(cfg.channels.saturating_sub(1));
        let ladder = (0..cfg.channels).map(|_| PhaseLadder::new(depth)).collect();
        let chan = (0..cfg.channels.saturating_sub(1))
            .map(|_| ChannelSection::new(cfg.order))
            .collect();
        Ok(Whitener {
            cfg,
            depth,
            blocks: 0,
            ladder,
            chan,
            phase0_prev: Phase0Snapshot {
                gam: vec![0.0; depth + 1],
                dhat: vec![1.0; depth + 1],
                r_bwd: vec![0.0; depth + 1],
            },
            ops_block: OpCounters::default(),
            ops_total: OpCounters::default(),
            quotients: BlockQuotients::default(),
        })
    }

    pub fn config(&self) -> &WhitenerConfig {
        &self.cfg
    }

    pub fn blocks_processed(&self) -> usize {
        self.blocks
    }

    /// Ladder depth per phase: max(N, M-1).
    pub fn ladder_depth(&self) -> usize {
        self.depth
    }

    /// Process one block of M samples x(M(n-1)+1 .. Mn) and return the M
    /// channel outputs e_i^N(Mn-i). Blocks must be supplied in order.
    pub fn process_block(&mut self, samples: &[f64]) -> Result<ChannelOutputs> {
        let m = self.cfg.channels;
        let n_ord = self.cfg.order;
        if samples.len() != m {
            return Err(Error::WrongSampleCount {
                expected: m,
                got: samples.len(),
            });
        }
        if let Some(pos) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteInput(self.blocks * m + pos + 1));
        }

        self.ops_block = OpCounters::default();
        self.quotients = BlockQuotients {
            ladder: vec![LadderQuotients::default(); m],
            channel: vec![ChannelQuotients::default(); m],
        };

        // Phase-0 values still hold the previous block's last sample; the
        // channel section needs them after phase 0 is overwritten below.
        let snap = Phase0Snapshot {
            gam: self.ladder[0].gam.clone(),
            dhat: self.ladder[0].dhat.clone(),
            r_bwd: self.ladder[0].r_bwd.clone(),
        };

        // Ladder passes in sample order: phases M-1 down to 0.
        for (idx, &x) in samples.iter().enumerate() {
            let phase = m - 1 - idx;
            let prev = if phase == m - 1 {
                // previous sample is the last phase-0 sample of the previous
                // block (for M = 1 the snapshot serves the same role)
                snap.clone()
            } else {
                Phase0Snapshot {
                    gam: self.ladder[phase + 1].gam.clone(),
                    dhat: self.ladder[phase + 1].dhat.clone(),
                    r_bwd: self.ladder[phase + 1].r_bwd.clone(),
                }
            };
            self.ladder_pass(phase, x, &prev);
        }

        // Channel section.
        let mut outputs = vec![0.0; m];
        outputs[m - 1] = self.ladder[m - 1].eps[n_ord];
        if m > 1 {
            let lam = self.cfg.forgetting;
            let eps_reg = self.cfg.eps_reg;
            let top = n_ord + 1;
            let mut e_prev = self.ladder[m - 1].eps[..top].to_vec();
            let mut re_prev = self.ladder[m - 1].r_fwd[..top].to_vec();
            let mut d_prev = self.ladder[m - 1].delta[..top].to_vec();
            let mut r_prev = snap.gam[..top].to_vec();
            let mut dl_prev = snap.dhat[..top].to_vec();

            for i in (0..m - 1).rev() {
                let seed = self.ladder[i].eps[m - 1 - i];
                let mut e_cur = vec![0.0; top];
                let mut r_cur = vec![0.0; top];
                let mut dl_cur = vec![0.0; top];
                e_cur[0] = seed;
                let mut q_transfer = vec![None; top];
                let mut q_order = vec![None; top];
                let st = &mut self.chan[i];
                for p in 0..=n_ord {
                    // cross-channel transfers from channel i+1
                    if re_prev[p] > eps_reg {
                        let inv = 1.0 / re_prev[p];
                        let t = d_prev[p] * inv;
                        r_cur[p] = r_prev[p] - t * e_prev[p];
                        dl_cur[p] = dl_prev[p] - e_prev[p] * e_prev[p] * inv;
                        q_transfer[p] = Some(t);
                        self.ops_block.mults += 5;
                        self.ops_block.adds += 2;
                    } else {
                        r_cur[p] = r_prev[p];
                        dl_cur[p] = dl_prev[p];
                    }
                    // time updates, divisor delta_p^i(Mn-M)
                    if dl_cur[p] > eps_reg {
                        let inv = 1.0 / dl_cur[p];
                        st.delta[p] = lam * st.delta[p] + e_cur[p] * r_cur[p] * inv;
                        st.r_e[p] = lam * st.r_e[p] + e_cur[p] * e_cur[p] * inv;
                        st.r_r[p] = lam * st.r_r[p] + r_cur[p] * r_cur[p] * inv;
                        self.ops_block.mults += 10;
                        self.ops_block.adds += 3;
                    }
                    // order update p -> p+1
                    if p < n_ord {
                        if st.r_r[p] > eps_reg {
                            let q = st.delta[p] / st.r_r[p];
                            e_cur[p + 1] = e_cur[p] - q * r_cur[p];
                            q_order[p] = Some(q);
                            self.ops_block.mults += 2;
                            self.ops_block.adds += 1;
                        } else {
                            e_cur[p + 1] = e_cur[p];
                        }
                    }
                }
                outputs[i] = e_cur[n_ord];
                st.e = e_cur.clone();
                st.r = r_cur.clone();
                st.delta_pin = dl_cur.clone();
                self.quotients.channel[i] = ChannelQuotients {
                    transfer: q_transfer,
                    order: q_order,
                };
                e_prev = e_cur;
                re_prev = self.chan[i].r_e[..top].to_vec();
                d_prev = self.chan[i].delta[..top].to_vec();
                r_prev = r_cur;
                dl_prev = dl_cur;
            }
        }

        self.phase0_prev = snap;
        self.ops_total.adds += self.ops_block.adds;
        self.ops_total.mults += self.ops_block.mults;
        self.blocks += 1;
        Ok(ChannelOutputs {
            block: self.blocks,
            values: outputs,
        })
    }

    /// One per-sample ladder pass at `phase`, consuming the previous sample's
    /// backward-side values.
    fn ladder_pass(&mut self, phase: usize, x: f64, prev: &Phase0Snapshot) {
        let d = self.depth;
        let lam = self.cfg.forgetting;
        let eps_reg = self.cfg.eps_reg;
        let st = &mut self.ladder[phase];
        let mut eps = vec![0.0; d + 1];
        let mut gam = vec![0.0; d + 1];
        let mut dhat = vec![0.0; d + 1];
        eps[0] = x;
        gam[0] = x;
        dhat[0] = 1.0;
        let mut q_fwd = vec![None; d + 1];
        let mut q_bwd = vec![None; d + 1];
        for q in 0..=d {
            // time updates of the correlation registers (divisor is the
            // previous sample's pinning energy)
            if prev.dhat[q] > eps_reg {
                let inv = 1.0 / prev.dhat[q];
                st.delta[q] = lam * st.delta[q] + eps[q] * prev.gam[q] * inv;
                st.r_fwd[q] = lam * st.r_fwd[q] + eps[q] * eps[q] * inv;
                self.ops_block.mults += 7;
                self.ops_block.adds += 2;
            }
            // backward energy on this phase's own label
            if dhat[q] > eps_reg {
                st.r_bwd[q] = lam * st.r_bwd[q] + gam[q] * gam[q] / dhat[q];
                self.ops_block.mults += 4;
                self.ops_block.adds += 1;
            }
            if q == d {
                break;
            }
            // pinning-energy order update on this label
            if st.r_bwd[q] > eps_reg {
                dhat[q + 1] = dhat[q] - gam[q] * gam[q] / st.r_bwd[q];
                self.ops_block.mults += 2;
                self.ops_block.adds += 1;
            } else {
                dhat[q + 1] = dhat[q];
            }
            // forward order update (divisor: previous sample's R^gam)
            if prev.r_bwd[q] > eps_reg {
                let qf = st.delta[q] / prev.r_bwd[q];
                eps[q + 1] = eps[q] - qf * prev.gam[q];
                q_fwd[q] = Some(qf);
                self.ops_block.mults += 2;
                self.ops_block.adds += 1;
            } else {
                eps[q + 1] = eps[q];
            }
            // backward order update (divisor: this sample's fresh R^eps)
            if st.r_fwd[q] > eps_reg {
                let qb = st.delta[q] / st.r_fwd[q];
                gam[q + 1] = prev.gam[q] - qb * eps[q];
                q_bwd[q] = Some(qb);
                self.ops_block.mults += 2;
                self.ops_block.adds += 1;
            } else {
                gam[q + 1] = prev.gam[q];
            }
        }
        st.eps = eps;
        st.gam = gam;
        st.dhat = dhat;
        self.quotients.ladder[phase] = LadderQuotients {
            fwd: q_fwd,
            bwd: q_bwd,
        };
    }

    /// Read-only dump of every register, with channel M-1 materialized from
    /// its ladder aliases.
    pub fn snapshot_registers(&self) -> WhitenerSnapshot {
        let m = self.cfg.channels;
        let n_ord = self.cfg.order;
        let top = n_ord + 1;
        let mut channels: Vec<ChannelSection> = self.chan.clone();
        let last = ChannelSection {
            e: self.ladder[m - 1].eps[..top].to_vec(),
            r: self.phase0_prev.gam[..top].to_vec(),
            delta_pin: self.phase0_prev.dhat[..top].to_vec(),
            delta: self.ladder[m - 1].delta[..top].to_vec(),
            r_e: self.ladder[m - 1].r_fwd[..top].to_vec(),
            r_r: self.phase0_prev.r_bwd[..top].to_vec(),
        };
        channels.push(last);
        WhitenerSnapshot {
            config: self.cfg,
            blocks_processed: self.blocks,
            ladder: self.ladder.clone(),
            channels,
            ops_last_block: self.ops_block,
            ops_total: self.ops_total,
        }
    }

    /// Addition/multiplication counts of the last processed block. Control
    /// flow is data independent after startup, so counts do not depend on
    /// sample values. Divisions are counted as multiplications.
    pub fn op_counters(&self) -> OpCounters {
        self.ops_block
    }

    pub fn op_totals(&self) -> OpCounters {
        self.ops_total
    }

    pub(crate) fn last_block_quotients(&self) -> &BlockQuotients {
        &self.quotients
    }

    /// Test hook: corrupt one correlation register so verification must fail.
    #[doc(hidden)]
    pub fn inject_fault(&mut self) {
        if let Some(l) = self.ladder.first_mut() {
            l.delta[0] += 1.0;
        }
    }
}

/// Reference per-block operation counts: additions (7+6M)N + 7M and
/// multiplications (14+12M)N + 14M.
pub fn reference_op_counts(m: usize, order: usize) -> OpCounters {
    OpCounters {
        adds: ((7 + 6 * m) * order + 7 * m) as u64,
        mults: ((14 + 12 * m) * order + 14 * m) as u64,
    }
}
