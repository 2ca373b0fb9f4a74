//! Message vectors and the functionals of the stability analysis.
//!
//! A [`ProbVector`] holds a distribution over `G(2^p)`; an [`LdrVector`]
//! holds the log-density ratios `w_i = ln(x_0 / x_i)`. Populations of
//! messages are summarised by the error probability [`p_e`] and the
//! Bhattacharyya-type functionals [`d_a`] and [`d_n`].

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::Rng;

use crate::ensemble::{EdgeClass, EnsembleSpec};
use crate::gf2_maps::{sample_uniform_map, LinearMap};
use crate::group_algebra::{check_width, order, GroupSymbol};
use crate::{Error, Result, LLR_CLAMP, PROB_FLOOR};

/// Probability vector over `G(2^width)`. Entries are nonnegative; they sum
/// to one once [`normalized`](Self::normalized) (raw truncations may not).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    width: u8,
    entries: Vec<f64>,
}

impl ProbVector {
    pub fn from_raw(width: u8, entries: Vec<f64>) -> Result<Self> {
        check_width(width)?;
        if entries.len() != order(width) {
            return Err(Error::LengthMismatch {
                expected: order(width),
                found: entries.len(),
            });
        }
        if entries.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidChannel(
                "probability entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { width, entries })
    }

    pub fn uniform(width: u8) -> Result<Self> {
        check_width(width)?;
        let q = order(width);
        Ok(Self {
            width,
            entries: vec![1.0 / q as f64; q],
        })
    }

    /// All mass on symbol `s`.
    pub fn point_mass(s: GroupSymbol) -> Self {
        let mut entries = vec![0.0; order(s.width())];
        entries[s.index()] = 1.0;
        Self {
            width: s.width(),
            entries,
        }
    }

    #[inline]
    pub fn width(&self) -> u8 {
        self.width
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.entries
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().sum()
    }

    pub fn normalized(mut self) -> Self {
        normalize_in_place(&mut self.entries);
        self
    }

    /// Index of the largest entry; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.entries)
    }
}

/// Scales to unit sum after flooring every entry at [`PROB_FLOOR`].
#[inline]
pub fn normalize_in_place(x: &mut [f64]) {
    let mut s = 0.0;
    for v in x.iter_mut() {
        if !(*v >= PROB_FLOOR) {
            *v = PROB_FLOOR;
        }
        s += *v;
    }
    let inv = 1.0 / s;
    x.iter_mut().for_each(|v| *v *= inv);
}

/// First index of the maximum.
#[inline]
pub fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate().skip(1) {
        if v > x[best] {
            best = i;
        }
    }
    best
}

/// Log-density-ratio vector `w_i = ln(x_0/x_i)`, with `w_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LdrVector {
    width: u8,
    entries: Vec<f64>,
}

impl LdrVector {
    pub fn new(width: u8, entries: Vec<f64>) -> Result<Self> {
        check_width(width)?;
        if entries.len() != order(width) {
            return Err(Error::LengthMismatch {
                expected: order(width),
                found: entries.len(),
            });
        }
        if entries[0] != 0.0 {
            return Err(Error::InvalidChannel("LDR entry 0 must be 0".into()));
        }
        if entries.iter().any(|w| w.is_nan() || *w == f64::NEG_INFINITY) {
            return Err(Error::InvalidChannel("LDR entries must be finite or +inf".into()));
        }
        Ok(Self { width, entries })
    }

    pub fn zero(width: u8) -> Result<Self> {
        check_width(width)?;
        Ok(Self {
            width,
            entries: vec![0.0; order(width)],
        })
    }

    #[inline]
    pub fn width(&self) -> u8 {
        self.width
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    /// Every entry clamped to `±LLR_CLAMP`.
    pub fn clamped(mut self) -> Self {
        self.entries
            .iter_mut()
            .for_each(|w| *w = w.clamp(-LLR_CLAMP, LLR_CLAMP));
        self
    }
}

pub fn to_ldr(x: &ProbVector) -> Result<LdrVector> {
    let x0 = x.entries[0];
    if x0 <= 0.0 {
        return Err(Error::ZeroReference);
    }
    let entries = x
        .entries
        .iter()
        .map(|&xi| if xi > 0.0 { (x0 / xi).ln() } else { LLR_CLAMP })
        .collect();
    Ok(LdrVector {
        width: x.width,
        entries,
    })
}

/// Normalized probability vector with `x_i ∝ exp(-w_i)`.
pub fn from_ldr(w: &LdrVector) -> ProbVector {
    let mut out = vec![0.0; w.entries.len()];
    ldr_to_prob_into(&w.entries, &mut out);
    ProbVector {
        width: w.width,
        entries: out,
    }
}

/// Slice form of [`from_ldr`], used in hot loops.
#[inline]
pub fn ldr_to_prob_into(w: &[f64], out: &mut [f64]) {
    let wmin = w.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut s = 0.0;
    for (o, &wi) in out.iter_mut().zip(w) {
        *o = (-(wi - wmin)).exp();
        s += *o;
    }
    let inv = 1.0 / s;
    out.iter_mut().for_each(|o| *o *= inv);
}

/// `W^a_i = W_{a+i} - W_a`.
pub fn cyclic_shift(w: &LdrVector, a: GroupSymbol) -> Result<LdrVector> {
    if a.width() != w.width {
        return Err(Error::WidthMismatch {
            expected: w.width,
            found: a.width(),
        });
    }
    let av = a.index();
    let wa = w.entries[av];
    let entries = (0..w.entries.len())
        .map(|i| {
            let v = w.entries[av ^ i] - wa;
            if v.is_nan() {
                0.0
            } else {
                v
            }
        })
        .collect();
    Ok(LdrVector {
        width: w.width,
        entries,
    })
}

/// A finitely supported LDR density, given conditionally on every
/// transmitted symbol `v`: `probs[v][n] = P(W = atoms[n] | v)`.
#[derive(Debug, Clone)]
pub struct ExactDensity {
    width: u8,
    atoms: Vec<LdrVector>,
    probs: Vec<Vec<f64>>,
}

fn atom_key(w: &LdrVector) -> Vec<i64> {
    w.entries.iter().map(|x| (x * 1e9).round() as i64).collect()
}

impl ExactDensity {
    /// Builds a density, merging atoms that agree to 1e-9.
    pub fn new(width: u8, atoms: Vec<LdrVector>, probs: Vec<Vec<f64>>) -> Result<Self> {
        check_width(width)?;
        if probs.len() != order(width) {
            return Err(Error::SupportMismatch(format!(
                "expected {} conditionals, found {}",
                order(width),
                probs.len()
            )));
        }
        for (v, row) in probs.iter().enumerate() {
            if row.len() != atoms.len() {
                return Err(Error::SupportMismatch(format!(
                    "conditional v={v} has {} masses for {} atoms",
                    row.len(),
                    atoms.len()
                )));
            }
        }
        if let Some(a) = atoms.iter().find(|a| a.width != width) {
            return Err(Error::WidthMismatch {
                expected: width,
                found: a.width,
            });
        }
        let mut index: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
        let mut merged_atoms = Vec::new();
        let mut merged = vec![Vec::new(); probs.len()];
        for (n, atom) in atoms.into_iter().enumerate() {
            let key = atom_key(&atom);
            let slot = *index.entry(key).or_insert_with(|| {
                merged_atoms.push(atom);
                merged.iter_mut().for_each(|r| r.push(0.0));
                merged_atoms.len() - 1
            });
            for (v, row) in probs.iter().enumerate() {
                merged[v][slot] += row[n];
            }
        }
        Ok(Self {
            width,
            atoms: merged_atoms,
            probs: merged,
        })
    }

    #[inline]
    pub fn width(&self) -> u8 {
        self.width
    }

    pub fn atoms(&self) -> &[LdrVector] {
        &self.atoms
    }

    /// Masses conditional on transmitted symbol `v`.
    pub fn conditional(&self, v: usize) -> &[f64] {
        &self.probs[v]
    }

    /// Probability of `w` (up to the 1e-9 merge tolerance) given `v`.
    pub fn mass_of(&self, w: &LdrVector, v: usize) -> f64 {
        let key = atom_key(w);
        self.atoms
            .iter()
            .position(|a| atom_key(a) == key)
            .map_or(0.0, |n| self.probs[v][n])
    }

    /// Pushes the density through a map on atoms. The transmitted-symbol
    /// relabeling `relabel(v)` gives the new conditioning symbol (or `None`
    /// if the image of `v` cannot occur); `out_width` is the new width.
    pub fn map_atoms<F, G>(&self, out_width: u8, f: F, relabel: G) -> Result<Self>
    where
        F: Fn(&LdrVector) -> LdrVector,
        G: Fn(usize) -> Option<usize>,
    {
        let atoms: Vec<LdrVector> = self.atoms.iter().map(f).collect();
        let mut probs = vec![vec![0.0; atoms.len()]; order(out_width)];
        for v in 0..self.probs.len() {
            if let Some(v2) = relabel(v) {
                for (n, &p) in self.probs[v].iter().enumerate() {
                    probs[v2][n] += p;
                }
            }
        }
        Self::new(out_width, atoms, probs)
    }

    /// Density of the extended message `W^{×A}` conditioned on the extended
    /// symbol `A·v`. Symbols outside `Im(A)` get an empty conditional.
    pub fn extend(&self, a: &LinearMap) -> Result<Self> {
        if a.cols() != self.width {
            return Err(Error::WidthMismatch {
                expected: a.cols(),
                found: self.width,
            });
        }
        let table = a.image_table();
        let rows = a.rows();
        self.map_atoms(
            rows,
            |w| {
                let x = from_ldr(w);
                let y = a.extend(&x).expect("widths checked");
                to_ldr(&y).expect("x_0 keeps its mass").clamped()
            },
            |v| Some(table[v] as usize),
        )
    }

    /// Density of the truncated message `W^{×A^{-1}}` given `v`, for a
    /// density living in `G(2^{A.rows})` whose mass sits on `Im(A)`.
    pub fn truncate(&self, a: &LinearMap) -> Result<Self> {
        if a.rows() != self.width {
            return Err(Error::WidthMismatch {
                expected: a.rows(),
                found: self.width,
            });
        }
        let table = a.image_table();
        let cols = a.cols();
        self.map_atoms(
            cols,
            |w| {
                let x = from_ldr(w);
                let t = a.truncate(&x).expect("widths checked").normalized();
                to_ldr(&t).expect("floored").clamped()
            },
            |v| table.iter().position(|&t| t as usize == v),
        )
    }

    /// Error probability given `v = 0`, with fractional ties.
    pub fn error_probability(&self) -> f64 {
        self.atoms
            .iter()
            .zip(&self.probs[0])
            .map(|(w, &p)| p * tie_error(&from_ldr(w).entries))
            .sum()
    }

    /// `(1/(q-1)) Σ_{i≥1} E[√(X_i/X_0) | v=0] = (1/(q-1)) Σ_i E[e^{-W_i/2}]`.
    pub fn bhattacharyya(&self) -> f64 {
        let q = order(self.width);
        self.atoms
            .iter()
            .zip(&self.probs[0])
            .map(|(w, &p)| p * w.entries[1..].iter().map(|x| (-x / 2.0).exp()).sum::<f64>())
            .sum::<f64>()
            / (q - 1) as f64
    }
}

/// Exact symmetry check: `P(W=w|v=a) = e^{-w_a} P(W=w|v=0)` for every `a` and every
/// atom, within `1e-10`.
pub fn check_symmetry_exact(density: &ExactDensity) -> Result<bool> {
    for (v, row) in density.probs.iter().enumerate() {
        if row.len() != density.atoms.len() {
            return Err(Error::SupportMismatch(format!("conditional v={v}")));
        }
    }
    let p0 = &density.probs[0];
    for (a, row) in density.probs.iter().enumerate() {
        for (n, atom) in density.atoms.iter().enumerate() {
            let expected = (-atom.entries[a]).exp() * p0[n];
            if (row[n] - expected).abs() > 1e-10 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Random extension: `extend(A, x)` with `A` uniform over full-rank maps.
pub fn random_extension<R: Rng + ?Sized>(x: &ProbVector, p_l: u8, rng: &mut R) -> Result<ProbVector> {
    let a = sample_uniform_map(x.width, p_l, rng)?;
    a.extend(x)
}

/// `Σ_{i≥1} √(x_i/x_0)` with `x_0` floored.
#[inline]
pub fn sqrt_ratio_sum(x: &[f64]) -> f64 {
    let inv = 1.0 / x[0].max(PROB_FLOOR);
    x[1..].iter().map(|&xi| (xi * inv).sqrt()).sum()
}

/// Error contribution of one vector: 0 if position 0 is the unique
/// maximum, `(m-1)/m` for an `m`-way tie including 0, else 1.
#[inline]
pub fn tie_error(x: &[f64]) -> f64 {
    let x0 = x[0];
    let mut ties = 1usize;
    for &xi in &x[1..] {
        if xi > x0 {
            return 1.0;
        }
        if xi == x0 {
            ties += 1;
        }
    }
    (ties - 1) as f64 / ties as f64
}

fn check_samples(samples: &[ProbVector]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if samples.iter().any(|s| s.entries[0] <= 0.0) {
        return Err(Error::ZeroReference);
    }
    Ok(())
}

/// `D_a(X) = (1/(q-1)) Σ_{j=1}^{q-1} E[√(X_j/X_0)]`, empirical mean.
pub fn d_a(samples: &[ProbVector]) -> Result<f64> {
    Ok(d_a_with_se(samples)?.0)
}

/// [`d_a`] together with its standard error.
pub fn d_a_with_se(samples: &[ProbVector]) -> Result<(f64, f64)> {
    check_samples(samples)?;
    let q = samples[0].len();
    let scale = 1.0 / (q - 1) as f64;
    Ok(mean_se(samples.iter().map(|s| scale * sqrt_ratio_sum(&s.entries))))
}

/// Empirical error probability with fractional ties.
pub fn p_e(samples: &[ProbVector]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(samples.iter().map(|s| tie_error(&s.entries)).sum::<f64>() / samples.len() as f64)
}

/// `(mean, standard error of the mean)` of a sequence.
pub fn mean_se<I: IntoIterator<Item = f64>>(it: I) -> (f64, f64) {
    let (mut n, mut s, mut s2) = (0usize, 0.0, 0.0);
    for x in it {
        n += 1;
        s += x;
        s2 += x * x;
    }
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = s / n as f64;
    let var = if n > 1 {
        ((s2 - n as f64 * mean * mean) / (n - 1) as f64).max(0.0)
    } else {
        0.0
    };
    (mean, (var / n as f64).sqrt())
}

/// `D_n(R) = Σ_k π(k) Σ_l π(l|k) (1/(q_l-1)) Σ_{i=1}^{q_k-1} E[√(X_i/X_0)]`.
///
/// `populations` maps each variable group width `p_k` to its samples.
pub fn d_n(populations: &BTreeMap<u8, Vec<ProbVector>>, spec: &EnsembleSpec) -> Result<f64> {
    let mut total = 0.0;
    for (p_k, w_k) in spec.pi_k() {
        if w_k <= 0.0 {
            continue;
        }
        let samples = populations
            .get(&p_k)
            .ok_or_else(|| Error::InvalidEnsemble(format!("missing population for p_k={p_k}")))?;
        check_samples(samples)?;
        let mean_sum = samples.iter().map(|s| sqrt_ratio_sum(&s.entries)).sum::<f64>()
            / samples.len() as f64;
        let weight: f64 = spec
            .pi_l_given_k(p_k)?
            .into_iter()
            .map(|(p_l, w)| w / (order(p_l) - 1) as f64)
            .sum();
        total += w_k * weight * mean_sum;
    }
    Ok(total)
}

/// One message together with the edge class it travels on.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageSample {
    pub vector: ProbVector,
    pub class: EdgeClass,
}

impl MessageSample {
    pub fn new(vector: ProbVector, class: EdgeClass) -> Result<Self> {
        if vector.width != class.p_k {
            return Err(Error::WidthMismatch {
                expected: class.p_k,
                found: vector.width,
            });
        }
        Ok(Self { vector, class })
    }
}

/// Writes one population record: `u32` width, `u64` count, then the
/// entries as little-endian `f64`.
pub fn write_population<W: Write>(out: &mut W, width: u8, samples: &[ProbVector]) -> Result<()> {
    out.write_all(&(width as u32).to_le_bytes())?;
    out.write_all(&(samples.len() as u64).to_le_bytes())?;
    for s in samples {
        if s.width != width {
            return Err(Error::WidthMismatch {
                expected: width,
                found: s.width,
            });
        }
        for v in &s.entries {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads one record written by [`write_population`]; `None` at clean EOF.
pub fn read_population<R: Read>(input: &mut R) -> Result<Option<(u8, Vec<ProbVector>)>> {
    let mut head = [0u8; 4];
    match input.read_exact(&mut head) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let width = u32::from_le_bytes(head);
    let width = u8::try_from(width).map_err(|_| Error::InvalidWidth(u8::MAX))?;
    check_width(width)?;
    let mut count = [0u8; 8];
    input.read_exact(&mut count)?;
    let count = u64::from_le_bytes(count) as usize;
    let q = order(width);
    let mut samples = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        let mut entries = Vec::with_capacity(q);
        for _ in 0..q {
            input.read_exact(&mut buf)?;
            entries.push(f64::from_le_bytes(buf));
        }
        samples.push(ProbVector::from_raw(width, entries)?);
    }
    Ok(Some((width, samples)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::channel::DiscreteOracleChannel;
    use crate::ensemble::EnsembleSpec;
    use crate::gf2_maps::enumerate_full_rank;
    use crate::rng::stream_rng;
    use crate::stats::ks_two_sample_rejects;
    use proptest::prelude::*;

    fn pv(w: u8, e: &[f64]) -> ProbVector {
        ProbVector::from_raw(w, e.to_vec()).unwrap()
    }

    #[test]
    fn to_ldr_examples() {
        let u = ProbVector::uniform(2).unwrap();
        assert_eq!(to_ldr(&u).unwrap().as_slice(), &[0.0; 4]);
        let x = pv(2, &[0.5, 0.25, 0.125, 0.125]);
        let w = to_ldr(&x).unwrap();
        let ln2 = 2f64.ln();
        for (a, b) in w.as_slice().iter().zip([0.0, ln2, 2.0 * ln2, 2.0 * ln2]) {
            assert!((a - b).abs() < 1e-15);
        }
        let back = from_ldr(&w);
        for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(to_ldr(&pv(1, &[0.0, 1.0])), Err(Error::ZeroReference));
        let z = to_ldr(&pv(1, &[1.0, 0.0])).unwrap();
        assert_eq!(z.as_slice(), &[0.0, LLR_CLAMP]);
    }

    #[test]
    fn cyclic_shift_examples() {
        let w = LdrVector::new(2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let zero = GroupSymbol::zero(2).unwrap();
        assert_eq!(cyclic_shift(&w, zero).unwrap(), w);
        let a = GroupSymbol::new(1, 2).unwrap();
        // i=0: w1-w1, i=1: w0-w1, i=2: w3-w1, i=3: w2-w1
        assert_eq!(cyclic_shift(&w, a).unwrap().as_slice(), &[0.0, -1.0, 2.0, 1.0]);
        assert_eq!(cyclic_shift(&cyclic_shift(&w, a).unwrap(), a).unwrap(), w);
        assert!(cyclic_shift(&w, GroupSymbol::new(1, 3).unwrap()).is_err());
    }

    #[test]
    fn d_a_examples() {
        let eps = 1e-12;
        let near = pv(2, &[1.0, eps, eps, eps]).normalized();
        assert!(d_a(&[near.clone(), near]).unwrap() < 1e-5);
        let u = ProbVector::uniform(3).unwrap();
        assert!((d_a(&[u.clone(), u]).unwrap() - 1.0).abs() < 1e-15);
        let x = pv(2, &[0.5, 0.25, 0.125, 0.125]);
        let expect = (0.5f64.sqrt() + 0.25f64.sqrt() + 0.25f64.sqrt()) / 3.0;
        assert!((d_a(&[x]).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.569).abs() < 1e-3);
        assert_eq!(d_a(&[]), Err(Error::EmptySamples));
        assert_eq!(d_a(&[pv(1, &[0.0, 1.0])]), Err(Error::ZeroReference));
    }

    #[test]
    fn p_e_examples() {
        let pm = ProbVector::point_mass(GroupSymbol::zero(3).unwrap());
        assert_eq!(p_e(&[pm]).unwrap(), 0.0);
        for p in 1..=4u8 {
            let q = order(p) as f64;
            let u = ProbVector::uniform(p).unwrap();
            assert!((p_e(&[u]).unwrap() - (q - 1.0) / q).abs() < 1e-15);
        }
        assert_eq!(p_e(&[pv(2, &[0.3, 0.3, 0.4, 0.0])]).unwrap(), 1.0);
        assert_eq!(p_e(&[pv(2, &[0.4, 0.4, 0.2, 0.0])]).unwrap(), 0.5);
        assert_eq!(p_e(&[]), Err(Error::EmptySamples));
    }

    #[test]
    fn d_n_single_group_reduces_to_d_a() {
        let spec = EnsembleSpec::regular(2, 4, 2).unwrap();
        let mut rng = stream_rng(5, 0);
        let samples: Vec<ProbVector> = (0..50)
            .map(|_| pv(2, &(0..4).map(|_| rng.random::<f64>() + 0.01).collect::<Vec<_>>()).normalized())
            .collect();
        let mut pops = BTreeMap::new();
        pops.insert(2u8, samples.clone());
        let dn = d_n(&pops, &spec).unwrap();
        assert!((dn - d_a(&samples).unwrap()).abs() < 1e-14);
        assert!(d_n(&BTreeMap::new(), &spec).is_err());
    }

    #[test]
    fn d_n_matches_straight_line_formula() {
        // two variable groups feeding two check groups
        let spec = EnsembleSpec::from_entries(vec![
            (2, 6, 1, 2, 0.4).into(),
            (3, 6, 2, 2, 0.3).into(),
            (2, 4, 1, 3, 0.2).into(),
            (2, 4, 3, 3, 0.1).into(),
        ])
        .unwrap();
        let mut rng = stream_rng(9, 1);
        let mut pops = BTreeMap::new();
        for p in [1u8, 2, 3] {
            let v: Vec<ProbVector> = (0..100)
                .map(|_| {
                    let e: Vec<f64> = (0..order(p)).map(|_| rng.random::<f64>() + 1e-3).collect();
                    pv(p, &e).normalized()
                })
                .collect();
            pops.insert(p, v);
        }
        // brute force: loop over entries directly
        let mut oracle = 0.0;
        for e in spec.entries() {
            let q_l = (1usize << e.p_l) as f64;
            let pop = &pops[&e.p_k];
            let mut m = 0.0;
            for s in pop {
                let x = s.as_slice();
                for i in 1..x.len() {
                    m += (x[i] / x[0]).sqrt();
                }
            }
            m /= pop.len() as f64;
            oracle += e.weight * m / (q_l - 1.0);
        }
        assert!((d_n(&pops, &spec).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn oracle_density_is_symmetric_and_perturbation_is_not() {
        let ch = DiscreteOracleChannel::new(vec![0.6, 0.25, 0.1, 0.05]).unwrap();
        for p in 1..=3u8 {
            let d = ch.oracle_llr_density(p).unwrap();
            assert!(check_symmetry_exact(&d).unwrap(), "p={p}");
        }
        let d = ch.oracle_llr_density(2).unwrap();
        let mut probs = d.probs.clone();
        probs[1][0] += 1e-3;
        let bad = ExactDensity::new(2, d.atoms.clone(), probs).unwrap();
        assert!(!check_symmetry_exact(&bad).unwrap());
        let short = ExactDensity::new(2, d.atoms.clone(), vec![vec![1.0]; 2]);
        assert!(matches!(short, Err(Error::SupportMismatch(_))));
    }

    #[test]
    fn near_perfect_channel_is_symmetric() {
        // bit LLRs just inside the clamp; symbol entries reach twice that
        let ch = DiscreteOracleChannel::new(vec![1.0 - 1e-13, 1e-13]).unwrap();
        for p in 1..=3 {
            let d = ch.oracle_llr_density(p).unwrap();
            assert!(check_symmetry_exact(&d).unwrap(), "p={p}");
        }
    }

    #[test]
    fn extension_and_truncation_preserve_symmetry() {
        let ch = DiscreteOracleChannel::new(vec![0.5, 0.3, 0.15, 0.05]).unwrap();
        for p_l in 1..=3u8 {
            for p_k in 1..=p_l {
                let d = ch.oracle_llr_density(p_k).unwrap();
                for a in enumerate_full_rank(p_k, p_l).unwrap() {
                    let ext = d.extend(&a).unwrap();
                    assert!(check_symmetry_exact(&ext).unwrap(), "ext {p_k}->{p_l}");
                    let back = ext.truncate(&a).unwrap();
                    assert!(check_symmetry_exact(&back).unwrap(), "trunc {p_l}->{p_k}");
                }
            }
        }
    }

    #[test]
    fn sandwich_on_oracle_densities() {
        for table in [vec![0.9, 0.1], vec![0.6, 0.25, 0.1, 0.05], vec![0.5, 0.5], vec![0.4, 0.3, 0.2, 0.1]] {
            let ch = DiscreteOracleChannel::new(table).unwrap();
            for p in 1..=3u8 {
                let d = ch.oracle_llr_density(p).unwrap();
                let q = order(p) as f64;
                let pe = d.error_probability();
                let dd = d.bhattacharyya();
                assert!(dd * dd / (q * q) <= pe + 1e-10, "lower p={p}");
                assert!(pe <= (q - 1.0) * dd + 1e-10, "upper p={p}");
            }
        }
    }

    #[test]
    fn random_extension_examples() {
        let mut rng = stream_rng(3, 0);
        let e = pv(1, &[1.0, 0.0]);
        for _ in 0..50 {
            assert_eq!(random_extension(&e, 2, &mut rng).unwrap().as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        }
        // p_k = p_l: a relabeling that fixes position 0
        let x = pv(2, &[0.4, 0.3, 0.2, 0.1]);
        let y = random_extension(&x, 2, &mut rng).unwrap();
        assert_eq!(y.as_slice()[0], 0.4);
        let mut sorted = y.into_vec();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_eq!(sorted, vec![0.4, 0.3, 0.2, 0.1]);
        assert!(random_extension(&x, 1, &mut rng).is_err());
    }

    /// After random extension every nonzero position is identically
    /// distributed.
    #[test]
    fn random_extension_components_identically_distributed() {
        let mut rng = stream_rng(2024, 0);
        let n = 100_000;
        let p_k = 1u8;
        let p_l = 2u8;
        let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); 4];
        for _ in 0..n {
            let a: f64 = rng.random::<f64>();
            let x = pv(p_k, &[0.5 + 0.5 * a, 0.5 - 0.5 * a]);
            let y = random_extension(&x, p_l, &mut rng).unwrap();
            for (c, v) in cols.iter_mut().zip(y.as_slice()) {
                c.push(*v);
            }
        }
        for i in 1..4 {
            for j in (i + 1)..4 {
                assert!(!ks_two_sample_rejects(&cols[i], &cols[j], 0.01), "{i} vs {j}");
            }
        }
    }

    /// A random extension is LA-invariant.
    #[test]
    fn random_extension_is_la_invariant() {
        let mut rng = stream_rng(77, 0);
        let n = 100_000;
        let (p_k, p_l) = (2u8, 3u8);
        // two fixed truncations
        let a = LinearMap::from_rows(2, &[0b01, 0b10, 0b00]).unwrap();
        let b = LinearMap::from_rows(2, &[0b11, 0b01, 0b10]).unwrap();
        let mut ta: Vec<Vec<f64>> = vec![Vec::with_capacity(n); 4];
        let mut tb: Vec<Vec<f64>> = vec![Vec::with_capacity(n); 4];
        for _ in 0..n {
            let e: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            let x = pv(p_k, &e).normalized();
            let y = random_extension(&x, p_l, &mut rng).unwrap();
            let ya = a.truncate(&y).unwrap();
            let y2 = random_extension(&x, p_l, &mut rng).unwrap();
            let yb = b.truncate(&y2).unwrap();
            for c in 0..4 {
                ta[c].push(ya.as_slice()[c]);
                tb[c].push(yb.as_slice()[c]);
            }
        }
        for c in 0..4 {
            assert!(!ks_two_sample_rejects(&ta[c], &tb[c], 0.01), "component {c}");
        }
    }

    #[test]
    fn population_roundtrip() {
        let samples = vec![pv(2, &[0.1, 0.2, 0.3, 0.4]), pv(2, &[0.25; 4])];
        let mut buf = Vec::new();
        write_population(&mut buf, 2, &samples).unwrap();
        assert_eq!(buf.len(), 4 + 8 + 2 * 4 * 8);
        let mut cur = std::io::Cursor::new(buf);
        let (w, back) = read_population(&mut cur).unwrap().unwrap();
        assert_eq!(w, 2);
        assert_eq!(back, samples);
        assert!(read_population(&mut cur).unwrap().is_none());
    }

    proptest! {
        #[test]
        fn ldr_roundtrip(p in 1u8..=8, raw in proptest::collection::vec(-30.0f64..0.0, 256)) {
            // entries in [1e-30·c, 1]
            let q = order(p);
            let e: Vec<f64> = raw[..q].iter().map(|l| 10f64.powf(*l)).collect();
            let x = pv(p, &e).normalized();
            let back = from_ldr(&to_ldr(&x).unwrap());
            for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn shift_is_involution(p in 1u8..=6, a in any::<u8>(), raw in proptest::collection::vec(-20.0f64..20.0, 64)) {
            let q = order(p);
            let mut e = raw[..q].to_vec();
            e[0] = 0.0;
            let w = LdrVector::new(p, e).unwrap();
            let a = GroupSymbol::new((a as usize % q) as u16, p).unwrap();
            let back = cyclic_shift(&cyclic_shift(&w, a).unwrap(), a).unwrap();
            for (x, y) in back.as_slice().iter().zip(w.as_slice()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
