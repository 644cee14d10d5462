//! Pre-windowed test signals and the data vectors/matrices built from them.
//!
//! A [`Signal`] is a finite scalar sequence x(0..n) with the pre-windowed
//! convention: any access at a negative index yields exactly 0. Test inputs
//! are AR processes driven by seeded excitations, or excitations shaped by a
//! rational coloring filter.
//!
//! [`DataVector`] and [`DataMatrix`] materialize the delayed, M-down-sampled
//! history rows used by the projection oracle. At analysis block n the row
//! with delay d holds entries x(jM - d) for j = 1..n; entries with a negative
//! sample index are implicit zeros and are never stored.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal, Uniform};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// A pre-windowed scalar sequence. Samples never mutate once written.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
}

impl Signal {
    pub fn from_samples(samples: Vec<f64>) -> Self {
        Signal { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample at index `k`; exactly 0 for any `k < 0` (pre-windowed).
    ///
    /// Panics if `k` is at or beyond the stored length.
    pub fn get(&self, k: isize) -> f64 {
        if k < 0 {
            0.0
        } else {
            self.samples[k as usize]
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Serialize as CSV: a header row `x`, then one sample per line.
    ///
    /// Values are written with Rust's shortest round-trip formatting, so
    /// parsing the file back reproduces every bit.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x")?;
        for s in &self.samples {
            writeln!(w, "{}", s)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut samples = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if idx == 0 && t == "x" {
                continue;
            }
            if t.is_empty() {
                continue;
            }
            let v: f64 = t
                .parse()
                .map_err(|e| Error::InvalidParameter(format!("bad sample {:?}: {}", t, e)))?;
            samples.push(v);
        }
        Ok(Signal { samples })
    }

    /// Serialize as a raw little-endian f64 stream.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        for s in &self.samples {
            w.write_all(&s.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(bytes: &[u8]) -> Result<Self> {
        if bytes.len() % 8 != 0 {
            return Err(Error::InvalidParameter(
                "binary signal length is not a multiple of 8".into(),
            ));
        }
        let samples = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Signal { samples })
    }
}

/// AR model given by complex-conjugate pole pair radius/angle, or explicit
/// denominator coefficients. All denominator roots must lie strictly inside
/// the unit circle.
#[derive(Debug, Clone)]
pub struct ArModel {
    /// Denominator in ascending powers of z^-1; element 0 is 1.
    pub denominator: Vec<f64>,
    /// Numerator in ascending powers of z^-1; defaults to [1].
    pub numerator: Vec<f64>,
}

impl ArModel {
    /// AR(2) with poles at rho * exp(+-j*theta).
    ///
    /// Expanding (1 - rho e^{j theta} z^-1)(1 - rho e^{-j theta} z^-1) gives
    /// denominator (1, -2 rho cos theta, rho^2).
    pub fn from_poles(rho: f64, theta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::InvalidParameter(format!(
                "pole radius {} outside [0, 1)",
                rho
            )));
        }
        Ok(ArModel {
            denominator: vec![1.0, -2.0 * rho * theta.cos(), rho * rho],
            numerator: vec![1.0],
        })
    }

    pub fn from_coefficients(denominator: Vec<f64>, numerator: Vec<f64>) -> Result<Self> {
        check_stable(&denominator)?;
        Ok(ArModel {
            denominator,
            numerator,
        })
    }
}

/// Excitation distribution and seed for reproducible generation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Excitation {
    /// mean, variance
    Gaussian { mean: f64, variance: f64 },
    Uniform { lo: f64, hi: f64 },
    /// mean mu > 0
    Exponential { mean: f64 },
    Gamma { shape: f64, scale: f64 },
}

impl Excitation {
    fn validate(&self) -> Result<()> {
        match *self {
            Excitation::Gaussian { variance, .. } if variance <= 0.0 => Err(
                Error::InvalidDistribution(format!("gaussian variance {} <= 0", variance)),
            ),
            Excitation::Uniform { lo, hi } if hi <= lo => Err(Error::InvalidDistribution(
                format!("uniform bounds [{}, {}] empty", lo, hi),
            )),
            Excitation::Exponential { mean } if mean <= 0.0 => Err(Error::InvalidDistribution(
                format!("exponential mean {} <= 0", mean),
            )),
            Excitation::Gamma { shape, scale } if shape <= 0.0 || scale <= 0.0 => Err(
                Error::InvalidDistribution(format!("gamma({}, {}) invalid", shape, scale)),
            ),
            _ => Ok(()),
        }
    }
}

/// Draw `length` excitation samples. Reproducible bit-exactly per seed
/// (ChaCha8 generator, platform independent).
pub fn draw_excitation(spec: Excitation, seed: u64, length: usize) -> Result<Signal> {
    if length == 0 {
        return Err(Error::InvalidParameter("length must be >= 1".into()));
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<f64> = match spec {
        Excitation::Gaussian { mean, variance } => {
            let d = Normal::new(mean, variance.sqrt())
                .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
            (0..length).map(|_| d.sample(&mut rng)).collect()
        }
        Excitation::Uniform { lo, hi } => {
            let d = Uniform::new(lo, hi).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
            (0..length).map(|_| d.sample(&mut rng)).collect()
        }
        Excitation::Exponential { mean } => {
            let d = Exp::new(1.0 / mean).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
            (0..length).map(|_| d.sample(&mut rng)).collect()
        }
        Excitation::Gamma { shape, scale } => {
            let d =
                Gamma::new(shape, scale).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
            (0..length).map(|_| d.sample(&mut rng)).collect()
        }
    };
    Ok(Signal::from_samples(samples))
}

/// Largest root magnitude of the polynomial 1 + a1 z^-1 + ... + ap z^-p,
/// via companion-matrix eigenvalues. Returns 0 for order 0.
fn max_root_magnitude(denominator: &[f64]) -> f64 {
    let a0 = denominator[0];
    let coeffs: Vec<f64> = denominator[1..].iter().map(|c| c / a0).collect();
    let p = coeffs.len();
    if p == 0 {
        return 0.0;
    }
    let mut companion = nalgebra::DMatrix::<f64>::zeros(p, p);
    for (j, c) in coeffs.iter().enumerate() {
        companion[(0, j)] = -c;
    }
    for r in 1..p {
        companion[(r, r - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max)
}

fn check_stable(denominator: &[f64]) -> Result<()> {
    if denominator.is_empty() || denominator[0] == 0.0 {
        return Err(Error::InvalidParameter(
            "denominator[0] must be nonzero".into(),
        ));
    }
    let m = max_root_magnitude(denominator);
    if m >= 1.0 {
        return Err(Error::UnstableFilter(m));
    }
    Ok(())
}

/// Causal direct-form IIR filter with zero initial state (pre-windowed).
///
/// `numerator` and `denominator` are in ascending powers of z^-1. The
/// denominator must have all roots strictly inside the unit circle; zeros may
/// lie anywhere (maximum-phase coloring filters are allowed).
pub fn apply_rational_filter(
    input: &Signal,
    numerator: &[f64],
    denominator: &[f64],
) -> Result<Signal> {
    check_stable(denominator)?;
    let a0 = denominator[0];
    let n = input.len();
    let mut out = vec![0.0; n];
    for k in 0..n {
        let mut acc = 0.0;
        for (j, b) in numerator.iter().enumerate() {
            if j <= k {
                acc += b * input.get(k as isize - j as isize);
            }
        }
        for (j, a) in denominator.iter().enumerate().skip(1) {
            if j <= k {
                acc -= a * out[k - j];
            }
        }
        out[k] = acc / a0;
    }
    Ok(Signal::from_samples(out))
}

/// Generate an AR/ARMA process: seeded excitation shaped by the model filter.
pub fn generate_ar(
    model: &ArModel,
    excitation: Excitation,
    seed: u64,
    length: usize,
) -> Result<Signal> {
    let e = draw_excitation(excitation, seed, length)?;
    apply_rational_filter(&e, &model.numerator, &model.denominator)
}

/// One delayed, M-down-sampled history row: entries x(jM - delay) for
/// j = 1..blocks in chronological order, negative sample indices skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct DataVector {
    entries: Vec<f64>,
    pub m_decim: usize,
    pub delay: usize,
    pub blocks: usize,
}

impl DataVector {
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Entries right-aligned into the block grid j = 1..blocks
    /// (leading zeros restored).
    pub fn aligned(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.blocks - self.entries.len()];
        v.extend_from_slice(&self.entries);
        v
    }
}

fn row_entries(s: &Signal, m_decim: usize, delay: usize, blocks: usize) -> Vec<f64> {
    // first j with jM - d >= 0, never below 1
    let j0 = std::cmp::max(1, delay.div_ceil(m_decim));
    (j0..=blocks)
        .map(|j| s.get((j * m_decim) as isize - delay as isize))
        .collect()
}

/// Data vector for channel delay `i` at block `n`: (x(M-i), x(2M-i), ..., x(Mn-i)).
pub fn make_data_vector(s: &Signal, m_decim: usize, i: usize, n: usize) -> Result<DataVector> {
    if m_decim == 0 {
        return Err(Error::InvalidParameter("M must be >= 1".into()));
    }
    if i >= m_decim {
        return Err(Error::InvalidParameter(format!(
            "delay {} outside 0..{}",
            i,
            m_decim - 1
        )));
    }
    if n * m_decim >= s.len() + i {
        return Err(Error::InsufficientData(format!(
            "need sample {} but signal has {}",
            n * m_decim - i,
            s.len()
        )));
    }
    Ok(DataVector {
        entries: row_entries(s, m_decim, i, n),
        m_decim,
        delay: i,
        blocks: n,
    })
}

/// Stack of data vectors with the top row at `top_index` and each subsequent
/// row delayed by one sample; all rows share the block grid of `top_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    pub rows: Vec<DataVector>,
    pub top_index: usize,
    pub m_decim: usize,
    pub blocks: usize,
}

impl DataMatrix {
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Rows right-aligned to the common block grid (each `blocks` wide).
    pub fn aligned_rows(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.aligned()).collect()
    }
}

/// Build the matrix whose top row is the data vector ending at `top_index`.
/// A zero row count is allowed and yields the empty constraint set.
pub fn make_data_matrix(s: &Signal, m_decim: usize, top_index: usize, p: usize) -> Result<DataMatrix> {
    if m_decim == 0 {
        return Err(Error::InvalidParameter("M must be >= 1".into()));
    }
    if top_index >= s.len() {
        return Err(Error::InsufficientData(format!(
            "top index {} beyond signal length {}",
            top_index,
            s.len()
        )));
    }
    // canonical (delay, blocks) for the top row: smallest delay in 0..M-1
    let delay0 = (m_decim - top_index % m_decim) % m_decim;
    let blocks = (top_index + delay0) / m_decim;
    let rows = (0..p)
        .map(|r| DataVector {
            entries: row_entries(s, m_decim, delay0 + r, blocks),
            m_decim,
            delay: delay0 + r,
            blocks,
        })
        .collect();
    Ok(DataMatrix {
        rows,
        top_index,
        m_decim,
        blocks,
    })
}
