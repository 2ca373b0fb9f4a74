//! Encoder, syndrome and belief-propagation decoder for hybrid codes.
//!
//! All decoder messages live in the probability domain, in the group of
//! the variable they concern. On the way into a check a message is extended
//! by the edge map; the check combines the extended messages with
//! Walsh–Hadamard transforms and truncates the result back for each edge.

use rayon::prelude::*;

use crate::channel::{BiAwgnChannel, LlrSource};
use crate::code_builder::HybridParityCheck;
use crate::fmt::sig12;
use crate::gf2_maps::{extend_with_table, truncate_with_table, LinearMap};
use crate::group_algebra::{order, GroupSymbol};
use crate::messages::{argmax, ldr_to_prob_into, mean_se, normalize_in_place, LdrVector, ProbVector};
use crate::rng::{stream_id, stream_rng};
use crate::wht::{iwht_in_place, wht_in_place};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codeword {
    pub symbols: Vec<GroupSymbol>,
}

impl Codeword {
    pub fn zero(h: &HybridParityCheck) -> Self {
        Self {
            symbols: h
                .col_widths()
                .iter()
                .map(|&w| GroupSymbol::zero(w).expect("valid width"))
                .collect(),
        }
    }

    /// Symbolwise group sum.
    pub fn add(&self, other: &Codeword) -> Result<Codeword> {
        if self.symbols.len() != other.symbols.len() {
            return Err(Error::LengthMismatch {
                expected: self.symbols.len(),
                found: other.symbols.len(),
            });
        }
        let symbols = self
            .symbols
            .iter()
            .zip(&other.symbols)
            .map(|(a, b)| a.add(*b))
            .collect::<Result<_>>()?;
        Ok(Codeword { symbols })
    }

    fn check_widths(&self, h: &HybridParityCheck) -> Result<()> {
        if self.symbols.len() != h.n_cols() {
            return Err(Error::LengthMismatch {
                expected: h.n_cols(),
                found: self.symbols.len(),
            });
        }
        for (s, &w) in self.symbols.iter().zip(h.col_widths()) {
            if s.width() != w {
                return Err(Error::WidthMismatch {
                    expected: w,
                    found: s.width(),
                });
            }
        }
        Ok(())
    }
}

/// Solves the rows in order: each row fixes its diagonal redundancy symbol
/// from the already known symbols of the row.
pub fn encode(h: &HybridParityCheck, message: &[GroupSymbol]) -> Result<Codeword> {
    let k = h.n_info();
    if message.len() != k {
        return Err(Error::LengthMismatch {
            expected: k,
            found: message.len(),
        });
    }
    let mut symbols = message.to_vec();
    symbols.extend(h.col_widths()[k..].iter().map(|&w| GroupSymbol::zero(w).expect("valid width")));
    for (s, &w) in message.iter().zip(h.col_widths()) {
        if s.width() != w {
            return Err(Error::WidthMismatch {
                expected: w,
                found: s.width(),
            });
        }
    }
    for r in 0..h.n_rows() {
        let diag = h
            .diagonal_edge(r)
            .ok_or_else(|| Error::Structure(format!("row {r} has no diagonal entry")))?;
        let mut acc = 0u8;
        for &e in h.row_edges(r) {
            if e == diag {
                continue;
            }
            let edge = &h.edges()[e];
            if edge.col >= k + r {
                return Err(Error::Structure(format!(
                    "row {r} references unsolved redundancy column {}",
                    edge.col
                )));
            }
            acc ^= edge.map.apply_raw(symbols[edge.col].value());
        }
        let d = &h.edges()[diag];
        let target = GroupSymbol::new(acc as u16, h.row_widths()[r])?;
        let solved = d
            .map
            .image_index(target)?
            .ok_or_else(|| Error::Structure(format!("diagonal map of row {r} is singular")))?;
        symbols[k + r] = solved;
    }
    Ok(Codeword { symbols })
}

fn syndrome_raw<'a, F: Fn(usize) -> u8 + 'a>(h: &'a HybridParityCheck, symbols: F) -> impl Iterator<Item = u8> + 'a {
    (0..h.n_rows()).map(move |r| {
        h.row_edges(r)
            .iter()
            .map(|&e| {
                let edge = &h.edges()[e];
                edge.map.apply_raw(symbols(edge.col))
            })
            .fold(0u8, |a, b| a ^ b)
    })
}

/// Per-row XOR of the extended symbols.
pub fn syndrome(h: &HybridParityCheck, c: &Codeword) -> Result<Vec<GroupSymbol>> {
    c.check_widths(h)?;
    syndrome_raw(h, |i| c.symbols[i].value())
        .zip(h.row_widths())
        .map(|(s, &w)| GroupSymbol::new(s as u16, w))
        .collect()
}

/// Reusable buffers for [`check_node_into`].
#[derive(Debug, Default, Clone)]
pub struct CheckScratch {
    spectra: Vec<f64>,
    suffix: Vec<f64>,
    prefix: Vec<f64>,
    buf: Vec<f64>,
}

/// Check-node update over `G(q_l)`.
///
/// `inputs[e]` is the incoming message of edge `e` in its variable group and
/// `tables[e]` the image table of the edge map. Writes to `outputs[e]` the
/// normalized distribution of the edge symbol given the other edges.
pub fn check_node_into(
    tables: &[&[u8]],
    inputs: &[&[f64]],
    q_l: usize,
    outputs: &mut [&mut [f64]],
    scratch: &mut CheckScratch,
) {
    let d = inputs.len();
    scratch.spectra.resize(d * q_l, 0.0);
    for (e, (t, x)) in tables.iter().zip(inputs).enumerate() {
        let f = &mut scratch.spectra[e * q_l..(e + 1) * q_l];
        extend_with_table(t, x, f);
        wht_in_place(f);
    }
    // suffix[e] = Π_{e' >= e} spectra[e']
    scratch.suffix.resize((d + 1) * q_l, 0.0);
    scratch.suffix[d * q_l..].iter_mut().for_each(|v| *v = 1.0);
    for e in (0..d).rev() {
        let (head, tail) = scratch.suffix.split_at_mut((e + 1) * q_l);
        let dst = &mut head[e * q_l..];
        let src = &tail[..q_l];
        let f = &scratch.spectra[e * q_l..(e + 1) * q_l];
        for ((o, a), b) in dst.iter_mut().zip(f).zip(src) {
            *o = a * b;
        }
    }
    scratch.prefix.clear();
    scratch.prefix.resize(q_l, 1.0);
    scratch.buf.resize(q_l, 0.0);
    for e in 0..d {
        let after = &scratch.suffix[(e + 1) * q_l..(e + 2) * q_l];
        for ((o, a), b) in scratch.buf.iter_mut().zip(&scratch.prefix).zip(after) {
            *o = a * b;
        }
        iwht_in_place(&mut scratch.buf);
        truncate_with_table(tables[e], &scratch.buf, outputs[e]);
        normalize_in_place(outputs[e]);
        let f = &scratch.spectra[e * q_l..(e + 1) * q_l];
        scratch.prefix.iter_mut().zip(f).for_each(|(p, v)| *p *= v);
    }
}

/// Convenience form of [`check_node_into`] on owned vectors.
pub fn check_update(inputs: &[ProbVector], maps: &[LinearMap]) -> Result<Vec<ProbVector>> {
    if inputs.len() != maps.len() || inputs.is_empty() {
        return Err(Error::LengthMismatch {
            expected: maps.len(),
            found: inputs.len(),
        });
    }
    let p_l = maps[0].rows();
    for (x, m) in inputs.iter().zip(maps) {
        if m.rows() != p_l {
            return Err(Error::WidthMismatch {
                expected: p_l,
                found: m.rows(),
            });
        }
        if x.width() != m.cols() {
            return Err(Error::WidthMismatch {
                expected: m.cols(),
                found: x.width(),
            });
        }
    }
    let tables: Vec<Vec<u8>> = maps.iter().map(|m| m.image_table()).collect();
    let trefs: Vec<&[u8]> = tables.iter().map(|t| t.as_slice()).collect();
    let irefs: Vec<&[f64]> = inputs.iter().map(|x| x.as_slice()).collect();
    let mut outs: Vec<Vec<f64>> = inputs.iter().map(|x| vec![0.0; x.len()]).collect();
    let mut orefs: Vec<&mut [f64]> = outs.iter_mut().map(|o| o.as_mut_slice()).collect();
    check_node_into(&trefs, &irefs, order(p_l), &mut orefs, &mut CheckScratch::default());
    inputs
        .iter()
        .zip(outs)
        .map(|(x, o)| ProbVector::from_raw(x.width(), o))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    pub codeword: Codeword,
    pub converged: bool,
    pub iters: usize,
}

pub const DEFAULT_MAX_ITERS: usize = 50;

/// Flooding belief-propagation decoder bound to one matrix. Holds every
/// buffer so repeated frames allocate nothing.
#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    h: &'a HybridParityCheck,
    tables: Vec<Vec<u8>>,
    /// Offset of each edge's message in the flat buffers (variable width).
    edge_off: Vec<usize>,
    var_off: Vec<usize>,
    channel: Vec<f64>,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    hard: Vec<u8>,
    scratch: CheckScratch,
    outs: Vec<Vec<f64>>,
    acc: Vec<f64>,
}

impl<'a> Decoder<'a> {
    pub fn new(h: &'a HybridParityCheck) -> Self {
        let tables = h.edges().iter().map(|e| e.map.image_table()).collect();
        let mut edge_off = Vec::with_capacity(h.edges().len() + 1);
        let mut off = 0;
        for e in h.edges() {
            edge_off.push(off);
            off += order(h.col_widths()[e.col]);
        }
        edge_off.push(off);
        let mut var_off = Vec::with_capacity(h.n_cols() + 1);
        let mut voff = 0;
        for &w in h.col_widths() {
            var_off.push(voff);
            voff += order(w);
        }
        var_off.push(voff);
        Self {
            h,
            tables,
            edge_off,
            var_off,
            channel: vec![0.0; voff],
            v2c: vec![0.0; off],
            c2v: vec![0.0; off],
            hard: vec![0; h.n_cols()],
            scratch: CheckScratch::default(),
            outs: Vec::new(),
            acc: Vec::new(),
        }
    }

    /// Decodes one frame from per-variable channel LLR vectors.
    pub fn decode(&mut self, llrs: &[LdrVector], max_iters: usize) -> Result<DecodeOutcome> {
        let h = self.h;
        if llrs.len() != h.n_cols() {
            return Err(Error::LengthMismatch {
                expected: h.n_cols(),
                found: llrs.len(),
            });
        }
        for (c, (w, &p)) in llrs.iter().zip(h.col_widths()).enumerate() {
            if w.width() != p {
                return Err(Error::WidthMismatch {
                    expected: p,
                    found: w.width(),
                });
            }
            ldr_to_prob_into(w.as_slice(), &mut self.channel[self.var_off[c]..self.var_off[c + 1]]);
        }
        for (n, e) in h.edges().iter().enumerate() {
            let (a, b) = (self.edge_off[n], self.edge_off[n + 1]);
            self.v2c[a..b].copy_from_slice(&self.channel[self.var_off[e.col]..self.var_off[e.col + 1]]);
        }
        for c in 0..h.n_cols() {
            self.hard[c] = argmax(&self.channel[self.var_off[c]..self.var_off[c + 1]]) as u8;
        }
        let mut iters = 0;
        let mut converged = self.syndrome_is_zero();
        while !converged && iters < max_iters {
            iters += 1;
            self.check_pass();
            self.variable_pass();
            converged = self.syndrome_is_zero();
        }
        let symbols = self
            .hard
            .iter()
            .zip(h.col_widths())
            .map(|(&s, &w)| GroupSymbol::new(s as u16, w))
            .collect::<Result<_>>()?;
        Ok(DecodeOutcome {
            codeword: Codeword { symbols },
            converged,
            iters,
        })
    }

    fn syndrome_is_zero(&self) -> bool {
        syndrome_raw(self.h, |c| self.hard[c]).all(|s| s == 0)
    }

    fn check_pass(&mut self) {
        let h = self.h;
        for r in 0..h.n_rows() {
            let edges = h.row_edges(r);
            let q_l = order(h.row_widths()[r]);
            let tables: Vec<&[u8]> = edges.iter().map(|&e| self.tables[e].as_slice()).collect();
            let inputs: Vec<&[f64]> = edges
                .iter()
                .map(|&e| &self.v2c[self.edge_off[e]..self.edge_off[e + 1]])
                .collect();
            self.outs.resize(edges.len(), Vec::new());
            for (o, &e) in self.outs.iter_mut().zip(edges) {
                o.resize(self.edge_off[e + 1] - self.edge_off[e], 0.0);
            }
            let mut outs: Vec<&mut [f64]> = self.outs.iter_mut().take(edges.len()).map(|o| o.as_mut_slice()).collect();
            check_node_into(&tables, &inputs, q_l, &mut outs, &mut self.scratch);
            for (o, &e) in self.outs.iter().zip(edges) {
                self.c2v[self.edge_off[e]..self.edge_off[e + 1]].copy_from_slice(o);
            }
        }
    }

    fn variable_pass(&mut self) {
        let h = self.h;
        for c in 0..h.n_cols() {
            let q = self.var_off[c + 1] - self.var_off[c];
            let chan = &self.channel[self.var_off[c]..self.var_off[c + 1]];
            let edges = h.col_edges(c);
            // forward pass leaves prefix products in v2c, backward pass
            // multiplies in the suffix
            self.acc.clear();
            self.acc.extend_from_slice(chan);
            for &e in edges {
                let (a, b) = (self.edge_off[e], self.edge_off[e + 1]);
                self.v2c[a..b].copy_from_slice(&self.acc);
                for (x, m) in self.acc.iter_mut().zip(&self.c2v[a..b]) {
                    *x *= m;
                }
                // keep the running product in range
                let s: f64 = self.acc.iter().sum();
                if s > 0.0 {
                    self.acc.iter_mut().for_each(|x| *x /= s);
                }
            }
            self.hard[c] = argmax(&self.acc) as u8;
            self.acc.clear();
            self.acc.resize(q, 1.0);
            for &e in edges.iter().rev() {
                let (a, b) = (self.edge_off[e], self.edge_off[e + 1]);
                for (x, s) in self.v2c[a..b].iter_mut().zip(&self.acc) {
                    *x *= s;
                }
                normalize_in_place(&mut self.v2c[a..b]);
                for (x, m) in self.acc.iter_mut().zip(&self.c2v[a..b]) {
                    *x *= m;
                }
                let s: f64 = self.acc.iter().sum();
                if s > 0.0 {
                    self.acc.iter_mut().for_each(|x| *x /= s);
                }
            }
        }
    }
}

/// One-shot decode.
pub fn decode(h: &HybridParityCheck, llrs: &[LdrVector], max_iters: usize) -> Result<DecodeOutcome> {
    Decoder::new(h).decode(llrs, max_iters)
}

/// Which codewords a simulation transmits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodewordMode {
    AllZero,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub frames: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub mode: CodewordMode,
}

/// Aggregate over the frames of one SNR point. Bit errors are counted on
/// the information symbols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimPoint {
    pub ebn0_db: f64,
    pub frames: usize,
    pub bit_errors: u64,
    pub frame_errors: u64,
    pub ber: f64,
    /// Standard error of `ber`, from the per-frame error fractions.
    pub ber_se: f64,
    pub fer: f64,
    pub avg_iters: f64,
}

pub const SIM_HEADER: &str = "snr_db,ber,fer,avg_iters";

impl SimPoint {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            sig12(self.ebn0_db),
            sig12(self.ber),
            sig12(self.fer),
            sig12(self.avg_iters)
        )
    }
}

struct FrameResult {
    bit_errors: u32,
    iters: usize,
}

/// Simulates `cfg.frames` frames at one Eb/N0 over BI-AWGN. Frame `f` uses
/// its own random stream, so the result is independent of thread count.
pub fn simulate_point(h: &HybridParityCheck, ebn0_db: f64, point_index: u64, cfg: &SimConfig) -> Result<SimPoint> {
    let channel = BiAwgnChannel::from_ebn0_db(ebn0_db, h.bit_rate())?;
    let k = h.n_info();
    let info_bits = h.info_bits() as f64;
    let results: Vec<Result<FrameResult>> = (0..cfg.frames)
        .into_par_iter()
        .map_init(
            || Decoder::new(h),
            |dec, f| {
                let mut rng = stream_rng(cfg.seed, stream_id(&[point_index, f as u64]));
                let cw = match cfg.mode {
                    CodewordMode::AllZero => Codeword::zero(h),
                    CodewordMode::Random => {
                        let msg = h.col_widths()[..k]
                            .iter()
                            .map(|&w| GroupSymbol::new(rand::Rng::random_range(&mut rng, 0..order(w)) as u16, w))
                            .collect::<Result<Vec<_>>>()?;
                        encode(h, &msg)?
                    }
                };
                let mut llrs = Vec::with_capacity(h.n_cols());
                for &s in &cw.symbols {
                    let mut w = vec![0.0; order(s.width())];
                    channel.sample_symbol_llr(s.index(), &mut w, &mut rng);
                    llrs.push(LdrVector::new(s.width(), w)?);
                }
                let out = dec.decode(&llrs, cfg.max_iters)?;
                let bit_errors = cw.symbols[..k]
                    .iter()
                    .zip(&out.codeword.symbols)
                    .map(|(a, b)| (a.value() ^ b.value()).count_ones())
                    .sum();
                Ok(FrameResult {
                    bit_errors,
                    iters: out.iters,
                })
            },
        )
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let bit_errors: u64 = results.iter().map(|r| r.bit_errors as u64).sum();
    let frame_errors = results.iter().filter(|r| r.bit_errors > 0).count() as u64;
    let iters: usize = results.iter().map(|r| r.iters).sum();
    let (ber, ber_se) = mean_se(results.iter().map(|r| r.bit_errors as f64 / info_bits));
    let n = cfg.frames.max(1) as f64;
    Ok(SimPoint {
        ebn0_db,
        frames: cfg.frames,
        bit_errors,
        frame_errors,
        ber: if cfg.frames == 0 { 0.0 } else { ber },
        ber_se: if cfg.frames == 0 { 0.0 } else { ber_se },
        fer: frame_errors as f64 / n,
        avg_iters: iters as f64 / n,
    })
}

pub fn simulate(h: &HybridParityCheck, snrs_db: &[f64], cfg: &SimConfig) -> Result<Vec<SimPoint>> {
    snrs_db
        .iter()
        .enumerate()
        .map(|(n, &s)| simulate_point(h, s, n as u64, cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::DiscreteOracleChannel;
    use crate::code_builder::build;
    use crate::ensemble::EnsembleSpec;
    use crate::gf2_maps::sample_uniform_map;
    use crate::messages::{check_symmetry_exact, to_ldr, ExactDensity};
    use crate::rng::stream_rng;
    use rand::Rng;

    fn random_message<R: Rng>(h: &HybridParityCheck, rng: &mut R) -> Vec<GroupSymbol> {
        h.col_widths()[..h.n_info()]
            .iter()
            .map(|&w| GroupSymbol::new(rng.random_range(0..order(w)) as u16, w).unwrap())
            .collect()
    }

    fn hybrid_code(p: u8, n: usize, seed: u64) -> HybridParityCheck {
        build(&EnsembleSpec::rate_half_hybrid(p).unwrap(), n, &mut stream_rng(seed, 0), 1).unwrap()
    }

    /// `P(x_t = i) ∝ Σ_{others: Σ A_e x_e = A_t i} Π x_e`, by enumeration.
    fn brute_force_check(inputs: &[ProbVector], maps: &[LinearMap]) -> Vec<Vec<f64>> {
        let d = inputs.len();
        (0..d)
            .map(|t| {
                let mut out = vec![0.0; inputs[t].len()];
                let others: Vec<usize> = (0..d).filter(|&e| e != t).collect();
                let sizes: Vec<usize> = others.iter().map(|&e| inputs[e].len()).collect();
                let total: usize = sizes.iter().product();
                for code in 0..total {
                    let mut c = code;
                    let (mut s, mut pr) = (0u8, 1.0);
                    for (&e, &q) in others.iter().zip(&sizes) {
                        let x = c % q;
                        c /= q;
                        s ^= maps[e].apply_raw(x as u8);
                        pr *= inputs[e].as_slice()[x];
                    }
                    for (i, o) in out.iter_mut().enumerate() {
                        if maps[t].apply_raw(i as u8) == s {
                            *o += pr;
                        }
                    }
                }
                let z: f64 = out.iter().sum();
                out.iter().map(|v| v / z).collect()
            })
            .collect()
    }

    #[test]
    fn check_update_matches_brute_force() {
        let mut rng = stream_rng(21, 0);
        for trial in 0..100 {
            let p_l = [2u8, 3, 4][trial % 3];
            let d = 2 + trial % 3;
            let mut inputs = Vec::new();
            let mut maps = Vec::new();
            for _ in 0..d {
                let p_k = rng.random_range(1..=p_l);
                maps.push(sample_uniform_map(p_k, p_l, &mut rng).unwrap());
                let raw: Vec<f64> = (0..order(p_k)).map(|_| rng.random::<f64>() + 1e-3).collect();
                inputs.push(ProbVector::from_raw(p_k, raw).unwrap().normalized());
            }
            let fast = check_update(&inputs, &maps).unwrap();
            let slow = brute_force_check(&inputs, &maps);
            for (f, s) in fast.iter().zip(&slow) {
                for (a, b) in f.as_slice().iter().zip(s) {
                    assert!((a - b).abs() < 1e-10, "trial {trial}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn zero_and_linearity() {
        let h = hybrid_code(2, 300, 1);
        let zero = encode(&h, &vec![GroupSymbol::zero(1).unwrap(); h.n_info()]).unwrap();
        assert_eq!(zero, Codeword::zero(&h));
        let mut rng = stream_rng(2, 0);
        let a = encode(&h, &random_message(&h, &mut rng)).unwrap();
        let b = encode(&h, &random_message(&h, &mut rng)).unwrap();
        let sum = a.add(&b).unwrap();
        assert!(syndrome(&h, &sum).unwrap().iter().all(|s| s.value() == 0));
    }

    #[test]
    fn encoder_outputs_are_codewords() {
        for p in 1..=3u8 {
            for spec in [EnsembleSpec::rate_half_nonbinary(p).unwrap(), EnsembleSpec::rate_half_hybrid(p).unwrap()] {
                let h = build(&spec, 600 / p as usize, &mut stream_rng(p as u64, 1), 1).unwrap();
                let mut rng = stream_rng(3, p as u64);
                for _ in 0..100 {
                    let msg = random_message(&h, &mut rng);
                    let c = encode(&h, &msg).unwrap();
                    assert_eq!(&c.symbols[..h.n_info()], &msg[..]);
                    assert!(syndrome(&h, &c).unwrap().iter().all(|s| s.value() == 0));
                }
            }
        }
    }

    #[test]
    fn syndrome_detects_changes() {
        let h = hybrid_code(3, 200, 4);
        let mut rng = stream_rng(5, 0);
        let c = encode(&h, &random_message(&h, &mut rng)).unwrap();
        for col in 0..h.n_cols() {
            let mut bad = c.clone();
            let w = bad.symbols[col].width();
            bad.symbols[col] = bad.symbols[col].add(GroupSymbol::new(1, w).unwrap()).unwrap();
            assert!(syndrome(&h, &bad).unwrap().iter().any(|s| s.value() != 0));
        }
        for _ in 0..100 {
            let v = Codeword {
                symbols: h
                    .col_widths()
                    .iter()
                    .map(|&w| GroupSymbol::new(rng.random_range(0..order(w)) as u16, w).unwrap())
                    .collect(),
            };
            assert!(syndrome(&h, &v).unwrap().iter().any(|s| s.value() != 0));
        }
        let short = Codeword { symbols: c.symbols[1..].to_vec() };
        assert!(syndrome(&h, &short).is_err());
    }

    #[test]
    fn noiseless_decode_is_immediate() {
        let h = hybrid_code(2, 300, 6);
        let ch = BiAwgnChannel::new(1e-4).unwrap();
        let mut rng = stream_rng(7, 0);
        for _ in 0..20 {
            let c = encode(&h, &random_message(&h, &mut rng)).unwrap();
            let llrs: Vec<LdrVector> = c.symbols.iter().map(|&s| ch.llr_vector(&ch.transmit(s, &mut rng)).unwrap()).collect();
            let out = decode(&h, &llrs, 50).unwrap();
            assert!(out.converged && out.iters <= 1);
            assert_eq!(out.codeword, c);
        }
    }

    #[test]
    fn zero_iterations_is_channel_argmax() {
        let h = hybrid_code(2, 120, 8);
        let ch = BiAwgnChannel::new(2.0).unwrap();
        let mut rng = stream_rng(9, 0);
        let c = Codeword::zero(&h);
        let llrs: Vec<LdrVector> = c.symbols.iter().map(|&s| ch.llr_vector(&ch.transmit(s, &mut rng)).unwrap()).collect();
        let out = decode(&h, &llrs, 0).unwrap();
        for (s, w) in out.codeword.symbols.iter().zip(&llrs) {
            // largest probability = smallest LDR, first on ties
            let mut best = 0;
            for (i, &x) in w.as_slice().iter().enumerate() {
                if x < w.as_slice()[best] {
                    best = i;
                }
            }
            assert_eq!(s.index(), best);
        }
        assert!(decode(&h, &llrs[1..], 5).is_err());
    }

    #[test]
    fn ber_improves_with_snr() {
        let h = build(&EnsembleSpec::rate_half_hybrid(2).unwrap(), 666, &mut stream_rng(10, 0), 2).unwrap();
        let cfg = SimConfig {
            frames: 300,
            max_iters: 30,
            seed: 11,
            mode: CodewordMode::Random,
        };
        let pts = simulate(&h, &[2.0, 4.0], &cfg).unwrap();
        let (lo, hi) = (pts[0], pts[1]);
        assert!(lo.ber > 0.0);
        let se = (lo.ber_se.powi(2) + hi.ber_se.powi(2)).sqrt();
        assert!(lo.ber - hi.ber > 3.0 * se, "{lo:?} {hi:?}");
    }

    #[test]
    fn simulation_is_deterministic() {
        let h = hybrid_code(2, 150, 12);
        let cfg = SimConfig {
            frames: 40,
            max_iters: 20,
            seed: 13,
            mode: CodewordMode::Random,
        };
        let a = simulate(&h, &[1.0, 2.0], &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| simulate(&h, &[1.0, 2.0], &cfg).unwrap());
        assert_eq!(a, b);
    }

    /// Exact message densities on a single check: every output of the
    /// check and the resulting posterior stay symmetric.
    #[test]
    fn tree_messages_are_symmetric() {
        let ch = DiscreteOracleChannel::new(vec![0.6, 0.3, 0.1]).unwrap();
        let mut rng = stream_rng(14, 0);
        for widths in [vec![1u8, 2, 2], vec![1, 1, 2], vec![2, 2], vec![1, 1, 1]] {
            let p_l = *widths.iter().max().unwrap();
            let maps: Vec<LinearMap> = widths.iter().map(|&w| sample_uniform_map(w, p_l, &mut rng).unwrap()).collect();
            let densities: Vec<ExactDensity> = widths.iter().map(|&w| ch.oracle_llr_density(w).unwrap()).collect();
            let t = 0;
            let pt = widths[t];
            let others: Vec<usize> = (1..widths.len()).collect();
            // enumerate channel atoms of the other edges
            let sizes: Vec<usize> = others.iter().map(|&e| densities[e].atoms().len()).collect();
            let total: usize = sizes.iter().product();
            let mut atoms = Vec::new();
            let mut probs = vec![Vec::new(); order(pt)];
            let mut post_atoms = Vec::new();
            let mut post_probs = vec![Vec::new(); order(pt)];
            for code in 0..total {
                let mut c = code;
                let picks: Vec<usize> = sizes
                    .iter()
                    .map(|&q| {
                        let x = c % q;
                        c /= q;
                        x
                    })
                    .collect();
                let mut inputs = vec![ProbVector::uniform(pt).unwrap()];
                for (&e, &n) in others.iter().zip(&picks) {
                    inputs.push(crate::messages::from_ldr(&densities[e].atoms()[n]));
                }
                let out = check_update(&inputs, &maps).unwrap();
                let w = to_ldr(&out[t]).unwrap();
                // P(outputs | x_t = v): average over the other symbols that
                // satisfy the check
                let cond: Vec<f64> = (0..order(pt))
                    .map(|v| {
                        let target = maps[t].apply_raw(v as u8);
                        let osizes: Vec<usize> = others.iter().map(|&e| order(widths[e])).collect();
                        let combos: usize = osizes.iter().product();
                        let (mut acc, mut count) = (0.0, 0usize);
                        for k in 0..combos {
                            let mut kk = k;
                            let mut s = 0u8;
                            let mut pr = 1.0;
                            for ((&e, &q), &n) in others.iter().zip(&osizes).zip(&picks) {
                                let x = kk % q;
                                kk /= q;
                                s ^= maps[e].apply_raw(x as u8);
                                pr *= densities[e].conditional(x)[n];
                            }
                            if s == target {
                                acc += pr;
                                count += 1;
                            }
                        }
                        acc / count as f64
                    })
                    .collect();
                // posterior of x_t: own channel atom times the check message
                for (n0, own) in densities[t].atoms().iter().enumerate() {
                    let mut post = crate::messages::from_ldr(own).into_vec();
                    post.iter_mut().zip(out[t].as_slice()).for_each(|(a, b)| *a *= b);
                    let post = ProbVector::from_raw(pt, post).unwrap().normalized();
                    post_atoms.push(to_ldr(&post).unwrap());
                    for v in 0..order(pt) {
                        post_probs[v].push(cond[v] * densities[t].conditional(v)[n0]);
                    }
                }
                atoms.push(w);
                for v in 0..order(pt) {
                    probs[v].push(cond[v]);
                }
            }
            let d = ExactDensity::new(pt, atoms, probs).unwrap();
            assert!(check_symmetry_exact(&d).unwrap(), "check output {widths:?}");
            let d = ExactDensity::new(pt, post_atoms, post_probs).unwrap();
            assert!(check_symmetry_exact(&d).unwrap(), "posterior {widths:?}");
        }
    }
}
