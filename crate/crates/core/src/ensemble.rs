//! Edge-perspective ensemble `π(i, j, k, l)` and the stability parameters.
//!
//! `π(i, j, k, l)` is the fraction of edges joining a degree-`i` variable
//! in `G(2^{p_k})` to a degree-`j` check in `G(2^{p_l})`. Everything else
//! (node-perspective counts, rates, Ω, Δ) is derived from it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::channel::ChannelModel;
use crate::fmt::sig12;
use crate::group_algebra::{check_width, order};
use crate::{Error, Result};

/// The four labels of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeClass {
    /// Variable-node degree.
    pub i: u32,
    /// Check-node degree.
    pub j: u32,
    /// Variable group width.
    pub p_k: u8,
    /// Check group width.
    pub p_l: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleEntry {
    pub i: u32,
    pub j: u32,
    pub p_k: u8,
    pub p_l: u8,
    pub weight: f64,
}

impl EnsembleEntry {
    pub fn class(&self) -> EdgeClass {
        EdgeClass {
            i: self.i,
            j: self.j,
            p_k: self.p_k,
            p_l: self.p_l,
        }
    }
}

impl From<(u32, u32, u8, u8, f64)> for EnsembleEntry {
    fn from((i, j, p_k, p_l, weight): (u32, u32, u8, u8, f64)) -> Self {
        Self {
            i,
            j,
            p_k,
            p_l,
            weight,
        }
    }
}

/// Coordinates of `π` for marginals and conditionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    I,
    J,
    K,
    L,
}

impl Dim {
    fn of(self, e: &EnsembleEntry) -> u32 {
        match self {
            Dim::I => e.i,
            Dim::J => e.j,
            Dim::K => e.p_k as u32,
            Dim::L => e.p_l as u32,
        }
    }
}

/// A validated edge distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    entries: Vec<EnsembleEntry>,
}

impl EnsembleSpec {
    /// Validates and merges duplicate classes. Zero-weight entries are dropped.
    pub fn from_entries(entries: Vec<EnsembleEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidEnsemble(
                "spec has no entries (weights must sum to 1)".into(),
            ));
        }
        let mut merged: BTreeMap<EdgeClass, f64> = BTreeMap::new();
        for e in &entries {
            check_width(e.p_k).map_err(|_| Error::InvalidEnsemble(format!("p_k={} outside 1..=8", e.p_k)))?;
            check_width(e.p_l).map_err(|_| Error::InvalidEnsemble(format!("p_l={} outside 1..=8", e.p_l)))?;
            if e.p_k > e.p_l {
                return Err(Error::InvalidEnsemble(format!(
                    "entry ({}, {}, {}, {}) violates p_k <= p_l",
                    e.i, e.j, e.p_k, e.p_l
                )));
            }
            if e.i < 1 {
                return Err(Error::InvalidEnsemble("variable degree must be >= 1".into()));
            }
            if e.j < 2 {
                return Err(Error::InvalidEnsemble("check degree must be >= 2".into()));
            }
            if !(e.weight.is_finite() && e.weight >= 0.0) {
                return Err(Error::InvalidEnsemble(format!("weight {} must be >= 0", e.weight)));
            }
            *merged.entry(e.class()).or_insert(0.0) += e.weight;
        }
        let total: f64 = merged.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidEnsemble(format!(
                "weights must sum to 1 within 1e-9 (sum = {total})"
            )));
        }
        let entries = merged
            .into_iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(c, weight)| EnsembleEntry {
                i: c.i,
                j: c.j,
                p_k: c.p_k,
                p_l: c.p_l,
                weight,
            })
            .collect();
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[EnsembleEntry] {
        &self.entries
    }

    /// `(d_v, d_c)`-regular ensemble over a single group.
    pub fn regular(dv: u32, dc: u32, p: u8) -> Result<Self> {
        Self::from_entries(vec![(dv, dc, p, p, 1.0).into()])
    }

    /// Single-group ensemble from edge-perspective degree distributions,
    /// `π(i, j) = λ_i ρ_j`.
    pub fn from_degree_distributions(lambda: &[(u32, f64)], rho: &[(u32, f64)], p: u8) -> Result<Self> {
        let mut entries = Vec::new();
        for &(i, li) in lambda {
            for &(j, rj) in rho {
                entries.push((i, j, p, p, li * rj).into());
            }
        }
        Self::from_entries(entries)
    }

    /// Rate-1/2 `GF(2^p)` ensemble with `d_v = 2`, `d_c = 4`.
    pub fn rate_half_nonbinary(p: u8) -> Result<Self> {
        Self::regular(2, 4, p)
    }

    /// Rate-1/2 hybrid `G(2)–G(2^p)` ensemble: information symbols in
    /// `G(2)`, redundancy and checks in `G(2^p)`, all variables of degree 2,
    /// checks of degree `2(p+1)`.
    pub fn rate_half_hybrid(p: u8) -> Result<Self> {
        check_width(p)?;
        let pf = p as f64;
        let j = 2 * (p as u32 + 1);
        Self::from_entries(vec![
            (2, j, 1, p, pf / (pf + 1.0)).into(),
            (2, j, p, p, 1.0 / (pf + 1.0)).into(),
        ])
    }

    /// Sums `π` over every coordinate not in `dims`.
    pub fn marginal(&self, dims: &[Dim]) -> BTreeMap<Vec<u32>, f64> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            let key: Vec<u32> = dims.iter().map(|d| d.of(e)).collect();
            *out.entry(key).or_insert(0.0) += e.weight;
        }
        out
    }

    /// `π(target | given = values)`.
    pub fn conditional(&self, target: &[Dim], given: &[Dim], values: &[u32]) -> Result<BTreeMap<Vec<u32>, f64>> {
        let mut out = BTreeMap::new();
        let mut total = 0.0;
        for e in &self.entries {
            if given.iter().zip(values).all(|(d, &v)| d.of(e) == v) {
                let key: Vec<u32> = target.iter().map(|d| d.of(e)).collect();
                *out.entry(key).or_insert(0.0) += e.weight;
                total += e.weight;
            }
        }
        if total <= 0.0 {
            return Err(Error::ZeroSlice(format!("{given:?} = {values:?}")));
        }
        out.values_mut().for_each(|w| *w /= total);
        Ok(out)
    }

    /// `π(k)` per variable width.
    pub fn pi_k(&self) -> Vec<(u8, f64)> {
        self.marginal(&[Dim::K])
            .into_iter()
            .map(|(k, w)| (k[0] as u8, w))
            .collect()
    }

    /// `π(k, l)`.
    pub fn pi_kl(&self) -> Vec<(u8, u8, f64)> {
        self.marginal(&[Dim::K, Dim::L])
            .into_iter()
            .map(|(k, w)| (k[0] as u8, k[1] as u8, w))
            .collect()
    }

    /// `π(l | k)`.
    pub fn pi_l_given_k(&self, p_k: u8) -> Result<Vec<(u8, f64)>> {
        Ok(self
            .conditional(&[Dim::L], &[Dim::K], &[p_k as u32])?
            .into_iter()
            .map(|(l, w)| (l[0] as u8, w))
            .collect())
    }

    /// Node-perspective variable counts per `(i, p_k)`, as fractions.
    pub fn variable_node_fractions(&self) -> BTreeMap<(u32, u8), f64> {
        node_fractions(self.entries.iter().map(|e| ((e.i, e.p_k), e.weight / e.i as f64)))
    }

    /// Node-perspective check counts per `(j, p_l)`, as fractions.
    pub fn check_node_fractions(&self) -> BTreeMap<(u32, u8), f64> {
        node_fractions(self.entries.iter().map(|e| ((e.j, e.p_l), e.weight / e.j as f64)))
    }

    /// `R = 1 - (Σ check bits)/(Σ variable bits)`.
    pub fn bit_rate(&self) -> f64 {
        let var_bits: f64 = self.entries.iter().map(|e| e.weight / e.i as f64 * e.p_k as f64).sum();
        let chk_bits: f64 = self.entries.iter().map(|e| e.weight / e.j as f64 * e.p_l as f64).sum();
        1.0 - chk_bits / var_bits
    }

    /// `Ω = Σ_{j,k,l} π(i=2, j, k, l) (q_k-1)/(q_l-1) (j-1)`.
    pub fn omega(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.i == 2)
            .map(|e| {
                e.weight * (order(e.p_k) - 1) as f64 / (order(e.p_l) - 1) as f64 * (e.j - 1) as f64
            })
            .sum()
    }

    /// Δ for BI-AWGN with per-bit BPSK, using the closed form
    /// `Σ_{i=1}^{q_k-1} e^{-n_i/(2σ²)} = (1 + e^{-1/(2σ²)})^{p_k} - 1`.
    pub fn delta_biawgn(&self, sigma2: f64) -> Result<f64> {
        check_sigma2(sigma2)?;
        let z = (-1.0 / (2.0 * sigma2)).exp();
        Ok(self.delta_from_bit_coefficient(|p_k| (1.0 + z).powi(p_k as i32) - 1.0))
    }

    /// Same as [`delta_biawgn`](Self::delta_biawgn) with the inner sum taken
    /// term by term over the Hamming weights.
    pub fn delta_biawgn_enumerated(&self, sigma2: f64) -> Result<f64> {
        check_sigma2(sigma2)?;
        let z = (-1.0 / (2.0 * sigma2)).exp();
        Ok(self.delta_from_bit_coefficient(|p_k| enumerate_weight_sum(p_k, z)))
    }

    /// Δ for a memoryless per-bit channel, from its numerically evaluated
    /// Bhattacharyya coefficient.
    pub fn delta_generic(&self, channel: &dyn ChannelModel) -> Result<f64> {
        let z = channel.bit_bhattacharyya()?;
        Ok(self.delta_from_bit_coefficient(|p_k| enumerate_weight_sum(p_k, z)))
    }

    fn delta_from_bit_coefficient<F: Fn(u8) -> f64>(&self, inner: F) -> f64 {
        self.pi_kl()
            .into_iter()
            .map(|(p_k, p_l, w)| w / (order(p_l) - 1) as f64 * inner(p_k))
            .sum()
    }

    pub fn stability_report(&self, sigma2: f64) -> Result<StabilityReport> {
        Ok(StabilityReport::new(self.omega(), self.delta_biawgn(sigma2)?))
    }

    pub fn stability_report_with(&self, channel: &dyn ChannelModel) -> Result<StabilityReport> {
        Ok(StabilityReport::new(self.omega(), self.delta_generic(channel)?))
    }

    /// Parses the text format: one `i j p_k p_l weight` entry per line,
    /// `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let perr = |msg: String| Error::Parse { line: n + 1, msg };
            if toks.len() != 5 {
                return Err(perr(format!("expected 5 fields `i j p_k p_l weight`, found {}", toks.len())));
            }
            let int = |t: &str| t.parse::<u32>().map_err(|e| perr(format!("{t:?}: {e}")));
            let i = int(toks[0])?;
            let j = int(toks[1])?;
            let p_k = int(toks[2])?;
            let p_l = int(toks[3])?;
            let weight: f64 = toks[4].parse().map_err(|e| perr(format!("{:?}: {e}", toks[4])))?;
            if p_k > 8 || p_l > 8 {
                return Err(perr("group widths must be in 1..=8".into()));
            }
            entries.push((i, j, p_k as u8, p_l as u8, weight).into());
        }
        Self::from_entries(entries)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# i j p_k p_l weight\n");
        for e in &self.entries {
            let _ = writeln!(s, "{} {} {} {} {}", e.i, e.j, e.p_k, e.p_l, e.weight);
        }
        s
    }
}

fn node_fractions<I: Iterator<Item = ((u32, u8), f64)>>(it: I) -> BTreeMap<(u32, u8), f64> {
    let mut out = BTreeMap::new();
    for (k, v) in it {
        *out.entry(k).or_insert(0.0) += v;
    }
    let total: f64 = out.values().sum();
    out.values_mut().for_each(|v| *v /= total);
    out
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidChannel(format!("noise variance {sigma2} must be > 0")))
    }
}

/// `Σ_{i=1}^{2^p - 1} z^{n_i}` by enumeration.
pub fn enumerate_weight_sum(p_k: u8, z: f64) -> f64 {
    (1..order(p_k)).map(|i| z.powi(i.count_ones() as i32)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Unstable,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
        })
    }
}

/// Ω, Δ and the stability verdict; `ΩΔ = 1` counts as unstable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub omega: f64,
    pub delta: f64,
    pub product: f64,
    pub verdict: Verdict,
}

impl StabilityReport {
    pub fn new(omega: f64, delta: f64) -> Self {
        let product = omega * delta;
        let verdict = if product < 1.0 {
            Verdict::Stable
        } else {
            Verdict::Unstable
        };
        Self {
            omega,
            delta,
            product,
            verdict,
        }
    }

    pub const CSV_HEADER: &'static str = "omega,delta,product,verdict";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            sig12(self.omega),
            sig12(self.delta),
            sig12(self.product),
            self.verdict
        )
    }
}

/// One row of the hybrid-versus-non-binary comparison at rate 1/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub q: usize,
    pub nonbinary: StabilityReport,
    pub hybrid: StabilityReport,
}

pub const SWEEP_HEADER: &str = "q,omega_nb,delta_nb,product_nb,omega_hyb,delta_hyb,product_hyb";

impl SweepRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.q,
            sig12(self.nonbinary.omega),
            sig12(self.nonbinary.delta),
            sig12(self.nonbinary.product),
            sig12(self.hybrid.omega),
            sig12(self.hybrid.delta),
            sig12(self.hybrid.product)
        )
    }
}

/// Ω, Δ of the rate-1/2 `GF(q)` and `G(2)–G(q)` ensembles for each width.
pub fn stability_sweep(sigma2: f64, widths: impl IntoIterator<Item = u8>) -> Result<Vec<SweepRow>> {
    widths
        .into_iter()
        .map(|p| {
            Ok(SweepRow {
                q: order(p),
                nonbinary: EnsembleSpec::rate_half_nonbinary(p)?.stability_report(sigma2)?,
                hybrid: EnsembleSpec::rate_half_hybrid(p)?.stability_report(sigma2)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{BiAwgnChannel, DiscreteOracleChannel};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Straight-line Ω oracle: enumerate edge classes, no shared helpers.
    fn omega_oracle(spec: &EnsembleSpec) -> f64 {
        let mut s = 0.0;
        for e in spec.entries() {
            if e.i != 2 {
                continue;
            }
            let qk = 2f64.powi(e.p_k as i32);
            let ql = 2f64.powi(e.p_l as i32);
            s += e.weight * (qk - 1.0) / (ql - 1.0) * (e.j as f64 - 1.0);
        }
        s
    }

    /// Term-by-term Δ oracle over (k, l) pairs and every symbol weight.
    fn delta_oracle(spec: &EnsembleSpec, sigma2: f64) -> f64 {
        let mut s = 0.0;
        for e in spec.entries() {
            let ql = 2f64.powi(e.p_l as i32);
            let mut inner = 0.0;
            for i in 1..(1u32 << e.p_k) {
                inner += (-(i.count_ones() as f64) / (2.0 * sigma2)).exp();
            }
            s += e.weight / (ql - 1.0) * inner;
        }
        s
    }

    #[test]
    fn marginals() {
        let single = EnsembleSpec::regular(3, 6, 2).unwrap();
        assert_eq!(single.marginal(&[Dim::I, Dim::J]).get(&vec![3, 6]), Some(&1.0));
        assert_eq!(EnsembleSpec::rate_half_nonbinary(4).unwrap().pi_k(), vec![(4, 1.0)]);
        for p in 1..=8u8 {
            let h = EnsembleSpec::rate_half_hybrid(p).unwrap();
            let pk = h.pi_k();
            let pf = p as f64;
            if p > 1 {
                assert!(close(pk[0].1, pf / (pf + 1.0), 1e-15));
            }
        }
        assert!(matches!(
            single.conditional(&[Dim::L], &[Dim::K], &[5]),
            Err(Error::ZeroSlice(_))
        ));
    }

    #[test]
    fn node_fractions_of_hybrid() {
        // K = pM info symbols, M redundancy symbols
        let h = EnsembleSpec::rate_half_hybrid(3).unwrap();
        let v = h.variable_node_fractions();
        assert!(close(v[&(2, 1)], 0.75, 1e-15));
        assert!(close(v[&(2, 3)], 0.25, 1e-15));
    }

    #[test]
    fn omega_examples() {
        for p in 1..=8 {
            let nb = EnsembleSpec::rate_half_nonbinary(p).unwrap();
            assert!(close(nb.omega(), 3.0, 1e-15));
            assert!(close(nb.omega(), omega_oracle(&nb), 1e-15));
        }
        assert_eq!(EnsembleSpec::regular(3, 6, 1).unwrap().omega(), 0.0);
        let h8 = EnsembleSpec::rate_half_hybrid(8).unwrap();
        let expect = 17.0 * ((8.0 / 9.0) / 255.0 + 1.0 / 9.0);
        assert!(close(h8.omega(), expect, 1e-13));
        assert!(close(h8.omega(), omega_oracle(&h8), 1e-13));
        assert!(close(h8.omega(), 1.9481, 1e-4));
        let h2 = EnsembleSpec::rate_half_hybrid(2).unwrap();
        assert!(close(h2.omega(), 25.0 / 9.0, 1e-13));
    }

    #[test]
    fn delta_examples() {
        let gf2 = EnsembleSpec::rate_half_nonbinary(1).unwrap();
        assert!(close(gf2.delta_biawgn(1.0).unwrap(), (-0.5f64).exp(), 1e-15));
        assert!(close(gf2.delta_biawgn(1.0).unwrap(), 0.606531, 1e-6));
        let gf256 = EnsembleSpec::rate_half_nonbinary(8).unwrap();
        let d = gf256.delta_biawgn(1.0).unwrap();
        assert!(close(d, ((1.0 + (-0.5f64).exp()).powi(8) - 1.0) / 255.0, 1e-15));
        assert!(close(d, 0.170087, 1e-6));
        let h8 = EnsembleSpec::rate_half_hybrid(8).unwrap();
        let dh = h8.delta_biawgn(1.0).unwrap();
        assert!(close(dh, delta_oracle(&h8, 1.0), 1e-14));
        assert!(close(dh, 0.021013, 1e-6));
        assert!(gf2.delta_biawgn(0.0).is_err());
    }

    #[test]
    fn delta_closed_form_matches_enumeration() {
        for p in 1..=8 {
            for s2 in [0.25, 0.5, 1.0, 2.0] {
                for spec in [EnsembleSpec::rate_half_nonbinary(p).unwrap(), EnsembleSpec::rate_half_hybrid(p).unwrap()] {
                    let a = spec.delta_biawgn(s2).unwrap();
                    let b = spec.delta_biawgn_enumerated(s2).unwrap();
                    assert!(close(a, b, 1e-12), "p={p} s2={s2}");
                    assert!(close(a, delta_oracle(&spec, s2), 1e-12));
                }
            }
        }
    }

    #[test]
    fn delta_generic_agrees_with_closed_form() {
        for p in 1..=8 {
            for s2 in [0.25, 0.5, 1.0, 2.0] {
                let ch = BiAwgnChannel::new(s2).unwrap();
                for spec in [EnsembleSpec::rate_half_nonbinary(p).unwrap(), EnsembleSpec::rate_half_hybrid(p).unwrap()] {
                    let a = spec.delta_generic(&ch).unwrap();
                    let b = spec.delta_biawgn(s2).unwrap();
                    assert!(close(a, b, 1e-6), "p={p} s2={s2}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn delta_generic_edge_channels() {
        let spec = EnsembleSpec::rate_half_hybrid(3).unwrap();
        let perfect = BiAwgnChannel::new(1e-4).unwrap();
        assert!(spec.delta_generic(&perfect).unwrap() < 1e-100);
        let useless = DiscreteOracleChannel::new(vec![0.5, 0.5]).unwrap();
        // Bhattacharyya coefficient 1: Σ π(k,l) (q_k-1)/(q_l-1)
        let expect: f64 = spec
            .pi_kl()
            .into_iter()
            .map(|(k, l, w)| w * ((1 << k) - 1) as f64 / ((1 << l) - 1) as f64)
            .sum();
        assert!(close(spec.delta_generic(&useless).unwrap(), expect, 1e-12));
    }

    #[test]
    fn rate_half_specs() {
        for p in 1..=8 {
            let nb = EnsembleSpec::rate_half_nonbinary(p).unwrap();
            assert!(close(nb.bit_rate(), 0.5, 1e-15));
            let h = EnsembleSpec::rate_half_hybrid(p).unwrap();
            assert!(close(h.bit_rate(), 0.5, 1e-15));
            let total: f64 = h.entries().iter().map(|e| e.weight).sum();
            assert!(close(total, 1.0, 1e-15));
        }
        assert_eq!(EnsembleSpec::rate_half_hybrid(1).unwrap(), EnsembleSpec::rate_half_nonbinary(1).unwrap());
    }

    #[test]
    fn stability_examples() {
        let h2 = EnsembleSpec::rate_half_hybrid(2).unwrap().stability_report(1.0).unwrap();
        assert!(close(h2.omega, 2.7778, 1e-4));
        assert!(close(h2.delta, 0.31044, 1e-5));
        assert!(close(h2.product, 0.8624, 1e-4));
        assert_eq!(h2.verdict, Verdict::Stable);
        let gf4 = EnsembleSpec::rate_half_nonbinary(2).unwrap().stability_report(1.0).unwrap();
        assert!(close(gf4.delta, 0.52698, 1e-5));
        assert!(close(gf4.product, 1.581, 1e-3));
        assert_eq!(gf4.verdict, Verdict::Unstable);
        let gf2 = EnsembleSpec::rate_half_nonbinary(1).unwrap().stability_report(1.0).unwrap();
        assert!(close(gf2.product, 1.8196, 1e-4));
        assert_eq!(gf2.verdict, Verdict::Unstable);
        let h8 = EnsembleSpec::rate_half_hybrid(8).unwrap().stability_report(1.0).unwrap();
        assert!(close(h8.product, 1.9481 * 0.021013, 1e-4));
        assert_eq!(StabilityReport::new(2.0, 0.5).verdict, Verdict::Unstable);
    }

    #[test]
    fn hybrid_dominates_and_delta_decreases() {
        let mut prev = f64::INFINITY;
        for p in 1..=8 {
            let nb = EnsembleSpec::rate_half_nonbinary(p).unwrap();
            let h = EnsembleSpec::rate_half_hybrid(p).unwrap();
            assert!(h.omega() <= nb.omega() + 1e-15);
            let (dn, dh) = (nb.delta_biawgn(1.0).unwrap(), h.delta_biawgn(1.0).unwrap());
            assert!(dh <= dn + 1e-15);
            assert!(dn < prev, "delta_nb not strictly decreasing at p={p}");
            prev = dn;
        }
    }

    #[test]
    fn single_group_omega_is_rho_prime_lambda_prime() {
        let cases: [(&[(u32, f64)], &[(u32, f64)]); 3] = [
            (&[(2, 1.0)], &[(4, 1.0)]),
            (&[(2, 0.3), (3, 0.5), (6, 0.2)], &[(5, 0.4), (6, 0.6)]),
            (&[(2, 0.25), (4, 0.75)], &[(3, 0.1), (7, 0.7), (8, 0.2)]),
        ];
        for (lambda, rho) in cases {
            for p in [1u8, 3, 8] {
                let spec = EnsembleSpec::from_degree_distributions(lambda, rho, p).unwrap();
                let lambda2: f64 = lambda.iter().filter(|l| l.0 == 2).map(|l| l.1).sum();
                let rho_prime: f64 = rho.iter().map(|&(j, r)| r * (j - 1) as f64).sum();
                assert!(close(spec.omega(), lambda2 * rho_prime, 1e-12));
            }
        }
    }

    #[test]
    fn parse_format() {
        let spec = EnsembleSpec::parse("# hybrid\n2 6 1 2 0.6666666666666666\n2 6 2 2 0.3333333333333333 # red\n\n").unwrap();
        assert_eq!(spec, EnsembleSpec::rate_half_hybrid(2).unwrap());
        assert_eq!(EnsembleSpec::parse(&spec.to_text()).unwrap(), spec);
        assert!(matches!(EnsembleSpec::parse(""), Err(Error::InvalidEnsemble(_))));
        assert!(matches!(EnsembleSpec::parse("2 4 1 1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(EnsembleSpec::parse("2 4 1 1 0.5"), Err(Error::InvalidEnsemble(_))));
        assert!(matches!(EnsembleSpec::parse("\n2 4 3 1 1.0"), Err(Error::InvalidEnsemble(_))));
        assert!(matches!(EnsembleSpec::parse("2 x 1 1 1.0"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn sweep_rows() {
        let rows = stability_sweep(1.0, 1..=8).unwrap();
        let last = rows.last().unwrap();
        assert_eq!(last.q, 256);
        let row = last.csv_row();
        assert!(row.starts_with("256,3,0.17008"), "{row}");
    }
}
