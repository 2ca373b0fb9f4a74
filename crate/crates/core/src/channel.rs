//! Memoryless per-bit channels and their symbol LLR vectors.
//!
//! A symbol of `G(2^p)` is sent as `p` independent bits through the bit
//! channel (BPSK `b -> 1 - 2b` for AWGN), bit 0 being the least-significant
//! bit of the symbol index. Since the bits are independent, the symbol LLR
//! vector is `W_i = Σ_t bit_t(i) L_t` with `L_t` the bit LLRs.

use std::num::NonZeroUsize;

use gauss_quad::hermite::GaussHermite;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use crate::group_algebra::{check_width, order, GroupSymbol};
use crate::messages::{ExactDensity, LdrVector};
use crate::{Error, Result, LLR_CLAMP};

/// Per-bit channel with a Bhattacharyya coefficient
/// `∫ √(p(y|0) p(y|1)) dy`.
pub trait ChannelModel: Sync {
    fn bit_bhattacharyya(&self) -> Result<f64>;
}

/// Per-bit channel that can be simulated.
pub trait LlrSource: ChannelModel {
    /// One bit LLR `ln P(y|0)/P(y|1)` for a transmitted `bit`.
    fn sample_bit_llr(&self, bit: u8, rng: &mut dyn RngCore) -> f64;

    /// Symbol LLR vector for transmitted symbol `v` of width `out.len() = 2^p`.
    fn sample_symbol_llr(&self, v: usize, out: &mut [f64], rng: &mut dyn RngCore) {
        let p = out.len().trailing_zeros() as u8;
        let mut bits = [0.0f64; 8];
        for (t, b) in bits.iter_mut().enumerate().take(p as usize) {
            *b = self.sample_bit_llr(((v >> t) & 1) as u8, rng);
        }
        symbol_llr_from_bits(&bits[..p as usize], out);
    }
}

/// `out[i] = Σ_t bit_t(i) bits[t]` with every bit LLR first clamped to
/// `±LLR_CLAMP`.
///
/// The clamp acts on the bits rather than on the sums: clamping the sums
/// would merge the distinct large entries of a near-noiseless observation
/// into ties and lose the transmitted symbol.
#[inline]
pub fn symbol_llr_from_bits(bits: &[f64], out: &mut [f64]) {
    out[0] = 0.0;
    for i in 1..out.len() {
        let t = i.trailing_zeros() as usize;
        out[i] = out[i & (i - 1)] + bits[t].clamp(-LLR_CLAMP, LLR_CLAMP);
    }
}

/// Binary-input AWGN channel with noise variance `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiAwgnChannel {
    sigma2: f64,
}

const GAUSS_HERMITE_NODES: usize = 64;

impl BiAwgnChannel {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidChannel(format!("noise variance {sigma2} must be > 0")));
        }
        Ok(Self { sigma2 })
    }

    /// `σ² = 1 / (2 R 10^{EbN0/10})`.
    pub fn from_ebn0_db(ebn0_db: f64, rate: f64) -> Result<Self> {
        Self::new(1.0 / (2.0 * rate * 10f64.powf(ebn0_db / 10.0)))
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Noisy BPSK observation of every bit of `symbol`.
    pub fn transmit<R: Rng + ?Sized>(&self, symbol: GroupSymbol, rng: &mut R) -> Vec<f64> {
        let sigma = self.sigma2.sqrt();
        (0..symbol.width())
            .map(|t| {
                let n: f64 = StandardNormal.sample(rng);
                1.0 - 2.0 * symbol.bit(t) as f64 + sigma * n
            })
            .collect()
    }

    /// `W_i = Σ_t bit_t(i) · 2 y_t / σ²`, bit terms clamped.
    pub fn llr_vector(&self, y: &[f64]) -> Result<LdrVector> {
        let p = y.len() as u8;
        check_width(p)?;
        let bits: Vec<f64> = y.iter().map(|v| 2.0 * v / self.sigma2).collect();
        let mut out = vec![0.0; order(p)];
        symbol_llr_from_bits(&bits, &mut out);
        LdrVector::new(p, out)
    }
}

impl ChannelModel for BiAwgnChannel {
    /// Gauss–Hermite evaluation of `E_{y~N(1,σ²)} √(p(y|-1)/p(y|+1))`.
    fn bit_bhattacharyya(&self) -> Result<f64> {
        let quad = GaussHermite::new(NonZeroUsize::new(GAUSS_HERMITE_NODES).expect("nonzero"));
        let sigma = self.sigma2.sqrt();
        // y = 1 + √2 σ t; √(p(y|-1)/p(y|+1)) = exp(-y/σ²)
        let integral = quad.integrate(|t| {
            let y = 1.0 + std::f64::consts::SQRT_2 * sigma * t;
            (-y / self.sigma2).exp()
        });
        Ok(integral / std::f64::consts::PI.sqrt())
    }
}

impl LlrSource for BiAwgnChannel {
    fn sample_bit_llr(&self, bit: u8, rng: &mut dyn RngCore) -> f64 {
        let n: f64 = StandardNormal.sample(rng);
        let y = 1.0 - 2.0 * bit as f64 + self.sigma2.sqrt() * n;
        2.0 * y / self.sigma2
    }
}

/// Discrete per-bit channel whose output alphabet is mirror-symmetric:
/// `P(k | 1) = P(K-1-k | 0)`. Its LLR densities are exactly enumerable and
/// satisfy the symmetry identity exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOracleChannel {
    given_zero: Vec<f64>,
}

impl DiscreteOracleChannel {
    /// `given_zero[k] = P(output k | bit 0)`; between 2 and 8 outputs.
    pub fn new(given_zero: Vec<f64>) -> Result<Self> {
        let k = given_zero.len();
        if !(2..=8).contains(&k) {
            return Err(Error::InvalidChannel(format!("output alphabet size {k} not in 2..=8")));
        }
        if given_zero.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidChannel("transition probabilities must be positive".into()));
        }
        let s: f64 = given_zero.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidChannel(format!("transition row sums to {s}")));
        }
        Ok(Self { given_zero })
    }

    /// Binary symmetric channel with crossover `eps`.
    pub fn bsc(eps: f64) -> Result<Self> {
        Self::new(vec![1.0 - eps, eps])
    }

    pub fn alphabet(&self) -> usize {
        self.given_zero.len()
    }

    /// `P(output k | bit)`.
    pub fn transition(&self, bit: u8, k: usize) -> f64 {
        if bit == 0 {
            self.given_zero[k]
        } else {
            self.given_zero[self.alphabet() - 1 - k]
        }
    }

    /// Bit LLR of output `k`.
    pub fn bit_llr(&self, k: usize) -> f64 {
        (self.transition(0, k) / self.transition(1, k)).ln()
    }

    /// Exact LLR density of a `G(2^p)` symbol, conditioned on every
    /// transmitted symbol, by enumerating all `K^p` output sequences.
    pub fn oracle_llr_density(&self, p: u8) -> Result<ExactDensity> {
        check_width(p)?;
        if p > 3 {
            return Err(Error::InvalidChannel(format!("exact enumeration limited to p <= 3, got {p}")));
        }
        let k = self.alphabet();
        let q = order(p);
        let outcomes = k.pow(p as u32);
        let mut atoms = Vec::with_capacity(outcomes);
        let mut probs = vec![Vec::with_capacity(outcomes); q];
        let mut ys = vec![0usize; p as usize];
        for code in 0..outcomes {
            let mut c = code;
            for y in ys.iter_mut() {
                *y = c % k;
                c /= k;
            }
            let bits: Vec<f64> = ys.iter().map(|&y| self.bit_llr(y)).collect();
            let mut w = vec![0.0; q];
            symbol_llr_from_bits(&bits, &mut w);
            atoms.push(LdrVector::new(p, w)?);
            for (v, row) in probs.iter_mut().enumerate() {
                let pr: f64 = ys
                    .iter()
                    .enumerate()
                    .map(|(t, &y)| self.transition(((v >> t) & 1) as u8, y))
                    .product();
                row.push(pr);
            }
        }
        ExactDensity::new(p, atoms, probs)
    }
}

impl ChannelModel for DiscreteOracleChannel {
    fn bit_bhattacharyya(&self) -> Result<f64> {
        Ok((0..self.alphabet())
            .map(|k| (self.transition(0, k) * self.transition(1, k)).sqrt())
            .sum())
    }
}

impl LlrSource for DiscreteOracleChannel {
    fn sample_bit_llr(&self, bit: u8, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for k in 0..self.alphabet() {
            acc += self.transition(bit, k);
            if u < acc {
                return self.bit_llr(k);
            }
        }
        self.bit_llr(self.alphabet() - 1)
    }
}

/// A bit channel known only through its output densities sampled on a
/// grid; the Bhattacharyya integral uses the trapezoid rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedChannel {
    grid: Vec<f64>,
    pdf0: Vec<f64>,
    pdf1: Vec<f64>,
}

impl GriddedChannel {
    pub fn new(grid: Vec<f64>, pdf0: Vec<f64>, pdf1: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != pdf0.len() || grid.len() != pdf1.len() {
            return Err(Error::InvalidChannel("grid and densities must share a length >= 2".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidChannel("grid must be strictly increasing".into()));
        }
        if pdf0.iter().chain(&pdf1).any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidChannel("densities must be finite and nonnegative".into()));
        }
        Ok(Self { grid, pdf0, pdf1 })
    }
}

impl ChannelModel for GriddedChannel {
    fn bit_bhattacharyya(&self) -> Result<f64> {
        let f: Vec<f64> = self.pdf0.iter().zip(&self.pdf1).map(|(a, b)| (a * b).sqrt()).collect();
        let mass = trapezoid(&self.grid, &self.pdf0);
        if !(mass > 0.0) {
            return Err(Error::InvalidChannel("density has no mass on the grid".into()));
        }
        Ok(trapezoid(&self.grid, &f))
    }
}

fn trapezoid(x: &[f64], f: &[f64]) -> f64 {
    x.windows(2)
        .zip(f.windows(2))
        .map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0] + f[1]))
        .sum()
}
