//! Monte-Carlo (population) density evolution.
//!
//! The density of variable-to-check messages in each variable group is
//! represented by `N` sampled probability vectors, assuming the all-zero
//! codeword. One step regenerates every sample through a random local tree:
//! fresh edge classes drawn from `π`, fresh incoming samples, fresh uniform
//! edge maps for extension and truncation, and a fresh channel observation.
//!
//! Populations are generated in fixed-size chunks, each with its own random
//! stream, so results do not depend on the number of threads.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::channel::{BiAwgnChannel, LlrSource};
use crate::ensemble::{Dim, EnsembleSpec};
use crate::fmt::sig12;
use crate::gf2_maps::{extend_with_table, sample_uniform_map, truncate_with_table};
use crate::group_algebra::order;
use crate::messages::{
    d_n, ldr_to_prob_into, mean_se, normalize_in_place, read_population, sqrt_ratio_sum, tie_error, write_population,
    ProbVector,
};
use crate::rng::{stream_id, stream_rng, StreamRng};
use crate::wht::{iwht_in_place, wht_in_place};
use crate::{Error, Result};

const CHUNK: usize = 256;
const TAG_INIT: u64 = 0x1417;
const TAG_STEP: u64 = 0x57e9;

/// Variable-to-check message samples per variable group width.
#[derive(Debug, Clone, PartialEq)]
pub struct DePopulation {
    size: usize,
    /// Flat `size × 2^p` buffers.
    groups: BTreeMap<u8, Vec<f64>>,
}

impl DePopulation {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn widths(&self) -> impl Iterator<Item = u8> + '_ {
        self.groups.keys().copied()
    }

    /// Sample `n` of group `p_k`.
    pub fn sample(&self, p_k: u8, n: usize) -> Option<&[f64]> {
        let q = order(p_k);
        self.groups.get(&p_k).map(|g| &g[n * q..(n + 1) * q])
    }

    pub fn to_prob_vectors(&self) -> BTreeMap<u8, Vec<ProbVector>> {
        self.groups
            .iter()
            .map(|(&p, g)| {
                let v = g
                    .chunks_exact(order(p))
                    .map(|c| ProbVector::from_raw(p, c.to_vec()).expect("normalized samples"))
                    .collect();
                (p, v)
            })
            .collect()
    }

    /// Error probability of one group, fractional ties counted.
    pub fn group_pe(&self, p_k: u8) -> Option<f64> {
        let q = order(p_k);
        self.groups
            .get(&p_k)
            .map(|g| g.chunks_exact(q).map(tie_error).sum::<f64>() / self.size as f64)
    }

    /// `D` of one group: `(1/(q-1)) Σ_i E√(X_i/X_0)`, with standard error.
    pub fn group_d(&self, p_k: u8) -> Option<(f64, f64)> {
        let q = order(p_k);
        let scale = 1.0 / (q - 1) as f64;
        self.groups
            .get(&p_k)
            .map(|g| mean_se(g.chunks_exact(q).map(|x| scale * sqrt_ratio_sum(x))))
    }

    /// Binary dump: one [`write_population`] record per group.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        for (p, samples) in self.to_prob_vectors() {
            write_population(w, p, &samples)?;
        }
        Ok(())
    }

    /// Inverse of [`write_to`](Self::write_to).
    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut groups = BTreeMap::new();
        let mut size = None;
        while let Some((p, samples)) = read_population(r)? {
            let n = *size.get_or_insert(samples.len());
            if samples.len() != n {
                return Err(Error::LengthMismatch { expected: n, found: samples.len() });
            }
            groups.insert(p, samples.into_iter().flat_map(ProbVector::into_vec).collect());
        }
        Ok(Self { size: size.unwrap_or(0), groups })
    }
}

/// Categorical distribution over a small label set.
#[derive(Debug, Clone)]
struct Categorical<T: Copy> {
    labels: Vec<T>,
    cum: Vec<f64>,
}

impl<T: Copy> Categorical<T> {
    fn new(items: impl IntoIterator<Item = (T, f64)>) -> Self {
        let mut labels = Vec::new();
        let mut cum = Vec::new();
        let mut acc = 0.0;
        for (t, w) in items {
            if w > 0.0 {
                acc += w;
                labels.push(t);
                cum.push(acc);
            }
        }
        Self { labels, cum }
    }

    #[inline]
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let u = rng.random::<f64>() * self.cum.last().copied().unwrap_or(0.0);
        let n = self.cum.partition_point(|&c| c <= u).min(self.labels.len() - 1);
        self.labels[n]
    }
}

/// The conditionals of `π` one DE step draws from.
#[derive(Debug, Clone)]
struct Tree {
    /// `π(k)`.
    groups: Vec<(u8, f64)>,
    /// `π(i | k)`.
    var_degree: BTreeMap<u8, Categorical<u32>>,
    /// `π(j, l | i, k)`.
    check_class: BTreeMap<(u32, u8), Categorical<(u32, u8)>>,
    /// `π(k | j, l)`.
    incoming_group: BTreeMap<(u32, u8), Categorical<u8>>,
}

impl Tree {
    fn new(spec: &EnsembleSpec) -> Result<Self> {
        let groups = spec.pi_k();
        let mut var_degree = BTreeMap::new();
        let mut check_class = BTreeMap::new();
        let mut incoming_group = BTreeMap::new();
        for &(p_k, _) in &groups {
            let c = spec.conditional(&[Dim::I], &[Dim::K], &[p_k as u32])?;
            var_degree.insert(p_k, Categorical::new(c.into_iter().map(|(k, w)| (k[0], w))));
        }
        for e in spec.entries() {
            check_class.entry((e.i, e.p_k)).or_insert_with(|| {
                let c = spec
                    .conditional(&[Dim::J, Dim::L], &[Dim::I, Dim::K], &[e.i, e.p_k as u32])
                    .expect("class present");
                Categorical::new(c.into_iter().map(|(k, w)| ((k[0], k[1] as u8), w)))
            });
            incoming_group.entry((e.j, e.p_l)).or_insert_with(|| {
                let c = spec
                    .conditional(&[Dim::K], &[Dim::J, Dim::L], &[e.j, e.p_l as u32])
                    .expect("class present");
                Categorical::new(c.into_iter().map(|(k, w)| (k[0] as u8, w)))
            });
        }
        Ok(Self {
            groups,
            var_degree,
            check_class,
            incoming_group,
        })
    }
}

/// Scratch buffers of one generating thread.
#[derive(Default)]
struct Work {
    llr: Vec<f64>,
    acc: Vec<f64>,
    ext: Vec<f64>,
    prod: Vec<f64>,
    out: Vec<f64>,
}

/// Population of channel messages (the iteration-0 variable output).
pub fn initial_population(spec: &EnsembleSpec, channel: &dyn LlrSource, size: usize, seed: u64) -> Result<DePopulation> {
    if size == 0 {
        return Err(Error::EmptySamples);
    }
    let mut groups = BTreeMap::new();
    for (p_k, _) in spec.pi_k() {
        let q = order(p_k);
        let chunks: Vec<Vec<f64>> = (0..size.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut rng = stream_rng(seed, stream_id(&[TAG_INIT, p_k as u64, c as u64]));
                let len = CHUNK.min(size - c * CHUNK);
                let mut buf = vec![0.0; len * q];
                let mut llr = vec![0.0; q];
                for x in buf.chunks_exact_mut(q) {
                    channel.sample_symbol_llr(0, &mut llr, &mut rng);
                    ldr_to_prob_into(&llr, x);
                }
                buf
            })
            .collect();
        groups.insert(p_k, chunks.concat());
    }
    Ok(DePopulation { size, groups })
}

/// One density-evolution iteration.
pub fn de_step(pop: &DePopulation, spec: &EnsembleSpec, channel: &dyn LlrSource, seed: u64, iter: u64) -> Result<DePopulation> {
    let tree = Tree::new(spec)?;
    step_with(pop, &tree, channel, seed, iter)
}

fn step_with(pop: &DePopulation, tree: &Tree, channel: &dyn LlrSource, seed: u64, iter: u64) -> Result<DePopulation> {
    for cat in tree.incoming_group.values() {
        for &p in &cat.labels {
            if pop.groups.get(&p).is_none_or(|g| g.is_empty()) {
                return Err(Error::DensityEvolution(format!(
                    "no samples for group width {p} although π assigns it weight"
                )));
            }
        }
    }
    let size = pop.size;
    let mut groups = BTreeMap::new();
    for &(p_k, _) in &tree.groups {
        let q = order(p_k);
        let chunks: Vec<Vec<f64>> = (0..size.div_ceil(CHUNK))
            .into_par_iter()
            .map_init(Work::default, |work, c| {
                let mut rng = stream_rng(seed, stream_id(&[TAG_STEP, iter, p_k as u64, c as u64]));
                let len = CHUNK.min(size - c * CHUNK);
                let mut buf = vec![0.0; len * q];
                for x in buf.chunks_exact_mut(q) {
                    variable_output(pop, tree, channel, p_k, work, &mut rng, x);
                }
                buf
            })
            .collect();
        groups.insert(p_k, chunks.concat());
    }
    Ok(DePopulation { size, groups })
}

/// One fresh variable-to-check sample of group `p_k`, written to `out`.
fn variable_output(
    pop: &DePopulation,
    tree: &Tree,
    channel: &dyn LlrSource,
    p_k: u8,
    w: &mut Work,
    rng: &mut StreamRng,
    out: &mut [f64],
) {
    let q = order(p_k);
    let i = tree.var_degree[&p_k].draw(rng);
    w.llr.resize(q, 0.0);
    channel.sample_symbol_llr(0, &mut w.llr, rng);
    w.acc.resize(q, 0.0);
    ldr_to_prob_into(&w.llr, &mut w.acc);
    for _ in 1..i {
        let (j, p_l) = tree.check_class[&(i, p_k)].draw(rng);
        let q_l = order(p_l);
        w.prod.clear();
        w.prod.resize(q_l, 1.0);
        w.ext.resize(q_l, 0.0);
        for _ in 1..j {
            let p_in = tree.incoming_group[&(j, p_l)].draw(rng);
            let n = rng.random_range(0..pop.size);
            let x = pop.sample(p_in, n).expect("checked above");
            let a = sample_uniform_map(p_in, p_l, rng).expect("p_k <= p_l");
            extend_with_table(&a.image_table(), x, &mut w.ext);
            wht_in_place(&mut w.ext);
            w.prod.iter_mut().zip(&w.ext).for_each(|(p, e)| *p *= e);
        }
        iwht_in_place(&mut w.prod);
        let a = sample_uniform_map(p_k, p_l, rng).expect("p_k <= p_l");
        w.out.resize(q, 0.0);
        truncate_with_table(&a.image_table(), &w.prod, &mut w.out);
        normalize_in_place(&mut w.out);
        w.acc.iter_mut().zip(&w.out).for_each(|(a, b)| *a *= b);
        normalize_in_place(&mut w.acc);
    }
    out.copy_from_slice(&w.acc);
    normalize_in_place(out);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeStatus {
    /// `P_e` stayed below target for three consecutive iterations.
    Converged,
    /// `P_e` stopped decreasing well above target.
    Stalled,
    MaxIters,
}

impl std::fmt::Display for DeStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DeStatus::Converged => "converged",
            DeStatus::Stalled => "stalled",
            DeStatus::MaxIters => "max-iters",
        })
    }
}

/// Per-group statistics of one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupStats {
    pub p_k: u8,
    pub pe: f64,
    pub d: f64,
    pub d_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeRecord {
    pub iter: usize,
    pub pe: f64,
    pub dn: f64,
    pub groups: Vec<GroupStats>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeTrajectory {
    pub records: Vec<DeRecord>,
    pub status: DeStatus,
}

pub const TRAJECTORY_HEADER: &str = "iter,pe,dn";

impl DeTrajectory {
    pub fn final_pe(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.pe)
    }

    pub fn converged(&self) -> bool {
        self.status == DeStatus::Converged
    }

    /// CSV without timings, so identical runs give identical text.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRAJECTORY_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&format!("{},{},{}\n", r.iter, sig12(r.pe), sig12(r.dn)));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeConfig {
    pub pop_size: usize,
    pub max_iters: usize,
    pub target_pe: f64,
    pub seed: u64,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            pop_size: 10_000,
            max_iters: 200,
            target_pe: 1e-4,
            seed: 0,
        }
    }
}

/// Consecutive iterations below target needed to declare convergence.
const CONFIRM: usize = 3;
/// Window for the stall test.
const STALL_WINDOW: usize = 10;

fn record(pop: &DePopulation, spec: &EnsembleSpec, iter: usize, start: Instant) -> Result<DeRecord> {
    let mut groups = Vec::new();
    let mut pe = 0.0;
    for (p_k, w) in spec.pi_k() {
        let g_pe = pop.group_pe(p_k).ok_or(Error::EmptySamples)?;
        let (d, d_se) = pop.group_d(p_k).ok_or(Error::EmptySamples)?;
        pe += w * g_pe;
        groups.push(GroupStats { p_k, pe: g_pe, d, d_se });
    }
    let dn = d_n(&pop.to_prob_vectors(), spec)?;
    Ok(DeRecord {
        iter,
        pe,
        dn,
        groups,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn stalled(records: &[DeRecord], target: f64) -> bool {
    let n = records.len();
    if n < 3 * STALL_WINDOW {
        return false;
    }
    let mean = |r: &[DeRecord]| r.iter().map(|x| x.pe).sum::<f64>() / r.len() as f64;
    let recent = mean(&records[n - STALL_WINDOW..]);
    let before = mean(&records[n - 2 * STALL_WINDOW..n - STALL_WINDOW]);
    recent > 10.0 * target && recent >= 0.98 * before
}

/// Evolves `pop` under `channel` and records the trajectory, starting
/// with the statistics of `pop` itself as iteration 0.
pub fn run_de_from(spec: &EnsembleSpec, channel: &dyn LlrSource, pop: DePopulation, cfg: &DeConfig) -> Result<DeTrajectory> {
    evolve(spec, channel, pop, cfg).map(|(t, _)| t)
}

/// Like [`run_de_from`], also returning the last population.
pub fn evolve(
    spec: &EnsembleSpec,
    channel: &dyn LlrSource,
    mut pop: DePopulation,
    cfg: &DeConfig,
) -> Result<(DeTrajectory, DePopulation)> {
    let tree = Tree::new(spec)?;
    let start = Instant::now();
    let mut records = vec![record(&pop, spec, 0, start)?];
    let mut below = usize::from(records[0].pe < cfg.target_pe);
    let mut status = DeStatus::MaxIters;
    for t in 1..=cfg.max_iters {
        if below >= CONFIRM {
            break;
        }
        pop = step_with(&pop, &tree, channel, cfg.seed, t as u64)?;
        let r = record(&pop, spec, t, start)?;
        below = if r.pe < cfg.target_pe { below + 1 } else { 0 };
        records.push(r);
        if below < CONFIRM && stalled(&records, cfg.target_pe) {
            status = DeStatus::Stalled;
            break;
        }
    }
    if below >= CONFIRM {
        status = DeStatus::Converged;
    }
    Ok((DeTrajectory { records, status }, pop))
}

/// Density evolution from the channel-only population.
pub fn run_de(spec: &EnsembleSpec, channel: &dyn LlrSource, cfg: &DeConfig) -> Result<DeTrajectory> {
    if cfg.pop_size < 1000 {
        return Err(Error::DensityEvolution(format!(
            "population size {} below the minimum of 1000",
            cfg.pop_size
        )));
    }
    let pop = initial_population(spec, channel, cfg.pop_size, cfg.seed)?;
    run_de_from(spec, channel, pop, cfg)
}

/// `Q(x) = P(N(0,1) > x)`.
fn gaussian_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Noise variance at which the BI-AWGN channel messages alone have error
/// probability `pe` under `π(k)`: a symbol is wrong iff one of its bits is.
pub fn seeding_sigma2(spec: &EnsembleSpec, pe: f64) -> Result<f64> {
    if !(pe > 0.0 && pe < 0.5) {
        return Err(Error::DensityEvolution(format!("seed error probability {pe} outside (0, 0.5)")));
    }
    let groups = spec.pi_k();
    let f = |sigma: f64| -> f64 {
        let b = gaussian_tail(1.0 / sigma);
        groups.iter().map(|&(p, w)| w * (1.0 - (1.0 - b).powi(p as i32))).sum()
    };
    let (mut lo, mut hi) = (1e-3, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < pe {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let sigma = 0.5 * (lo + hi);
    Ok(sigma * sigma)
}

/// Density evolution started near the zero-error fixed point: the
/// population is drawn from a cleaner BI-AWGN channel whose messages have
/// error probability `seed_pe`, then evolves under noise variance `sigma2`.
pub fn run_de_seeded(spec: &EnsembleSpec, sigma2: f64, seed_pe: f64, cfg: &DeConfig) -> Result<DeTrajectory> {
    let channel = BiAwgnChannel::new(sigma2)?;
    let seed_channel = BiAwgnChannel::new(seeding_sigma2(spec, seed_pe)?)?;
    let pop = initial_population(spec, &seed_channel, cfg.pop_size, cfg.seed)?;
    run_de_from(spec, &channel, pop, cfg)
}

/// Bisection on the BI-AWGN noise standard deviation: `lo` must converge
/// and `hi` must not. Every probe reuses `cfg.seed`.
pub fn threshold_search(spec: &EnsembleSpec, lo: f64, hi: f64, tol: f64, cfg: &DeConfig) -> Result<f64> {
    if !(lo > 0.0 && hi > lo && tol > 0.0) {
        return Err(Error::DensityEvolution(format!("invalid bracket [{lo}, {hi}] or tolerance {tol}")));
    }
    let converges = |sigma: f64| -> Result<bool> {
        let ch = BiAwgnChannel::new(sigma * sigma)?;
        Ok(run_de(spec, &ch, cfg)?.converged())
    };
    if !converges(lo)? {
        return Err(Error::DensityEvolution(format!("lower bracket sigma={lo} does not converge")));
    }
    if converges(hi)? {
        return Err(Error::DensityEvolution(format!("upper bracket sigma={hi} converges")));
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if converges(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
