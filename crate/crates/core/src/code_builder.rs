//! Finite-length hybrid parity-check matrices.
//!
//! Columns and rows are laid out in ascending group width. The last `M`
//! columns carry the redundancy symbols and form a bidiagonal staircase
//! with the `M` rows: row `r` holds redundancy column `r` through an
//! identity map and, for `r > 0`, redundancy column `r - 1`. Every other
//! redundancy edge lands in a later row, so the redundancy block is
//! triangular and the encoder solves the rows in order.
//!
//! The remaining sockets are paired by a configuration model inside each
//! edge class `(i, k) -> (j, l)`.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::ensemble::{Dim, EdgeClass, EnsembleSpec};
use crate::gf2_maps::{sample_uniform_map, LinearMap};
use crate::group_algebra::check_width;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub row: usize,
    pub col: usize,
    /// `row width × col width`, full rank.
    pub map: LinearMap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HybridParityCheck {
    col_widths: Vec<u8>,
    row_widths: Vec<u8>,
    /// Sorted by `(row, col)`.
    edges: Vec<Edge>,
    row_adj: Vec<Vec<usize>>,
    col_adj: Vec<Vec<usize>>,
}

impl HybridParityCheck {
    /// Checks indices, map dimensions and duplicate edges; the structural
    /// invariants (layout, staircase) are left to [`audit`].
    pub fn new(col_widths: Vec<u8>, row_widths: Vec<u8>, mut edges: Vec<Edge>) -> Result<Self> {
        for &w in col_widths.iter().chain(&row_widths) {
            check_width(w)?;
        }
        if row_widths.len() >= col_widths.len() || row_widths.is_empty() {
            return Err(Error::Structure(format!(
                "need 0 < M < N, got N={} M={}",
                col_widths.len(),
                row_widths.len()
            )));
        }
        edges.sort_by_key(|e| (e.row, e.col));
        let mut row_adj = vec![Vec::new(); row_widths.len()];
        let mut col_adj = vec![Vec::new(); col_widths.len()];
        for (n, e) in edges.iter().enumerate() {
            if e.row >= row_widths.len() || e.col >= col_widths.len() {
                return Err(Error::Structure(format!("edge ({}, {}) out of range", e.row, e.col)));
            }
            if e.map.rows() != row_widths[e.row] || e.map.cols() != col_widths[e.col] {
                return Err(Error::Structure(format!(
                    "edge ({}, {}) map is {}x{}, expected {}x{}",
                    e.row,
                    e.col,
                    e.map.rows(),
                    e.map.cols(),
                    row_widths[e.row],
                    col_widths[e.col]
                )));
            }
            if n > 0 && edges[n - 1].row == e.row && edges[n - 1].col == e.col {
                return Err(Error::Structure(format!("parallel edge ({}, {})", e.row, e.col)));
            }
            row_adj[e.row].push(n);
            col_adj[e.col].push(n);
        }
        Ok(Self {
            col_widths,
            row_widths,
            edges,
            row_adj,
            col_adj,
        })
    }

    pub fn n_cols(&self) -> usize {
        self.col_widths.len()
    }

    pub fn n_rows(&self) -> usize {
        self.row_widths.len()
    }

    /// Number of information columns `N - M`.
    pub fn n_info(&self) -> usize {
        self.n_cols() - self.n_rows()
    }

    pub fn col_widths(&self) -> &[u8] {
        &self.col_widths
    }

    pub fn row_widths(&self) -> &[u8] {
        &self.row_widths
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge indices of row `r`, ascending column.
    pub fn row_edges(&self, r: usize) -> &[usize] {
        &self.row_adj[r]
    }

    /// Edge indices of column `c`, ascending row.
    pub fn col_edges(&self, c: usize) -> &[usize] {
        &self.col_adj[c]
    }

    /// Staircase diagonal edge of row `r`, if present.
    pub fn diagonal_edge(&self, r: usize) -> Option<usize> {
        let c = self.n_info() + r;
        self.row_adj[r].iter().copied().find(|&e| self.edges[e].col == c)
    }

    pub fn info_bits(&self) -> usize {
        self.col_widths[..self.n_info()].iter().map(|&w| w as usize).sum()
    }

    pub fn total_bits(&self) -> usize {
        self.col_widths.iter().map(|&w| w as usize).sum()
    }

    /// `1 - Σ row bits / Σ column bits`.
    pub fn bit_rate(&self) -> f64 {
        let rows: usize = self.row_widths.iter().map(|&w| w as usize).sum();
        1.0 - rows as f64 / self.total_bits() as f64
    }

    /// Hybrid-alist text.
    pub fn to_alist(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.n_cols(), self.n_rows());
        let join = |w: &[u8]| w.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "{}", join(&self.col_widths));
        let _ = writeln!(s, "{}", join(&self.row_widths));
        for e in &self.edges {
            let _ = writeln!(s, "{} {} {}", e.row, e.col, e.map.to_hex_tokens().join(" "));
        }
        s
    }

    pub fn from_alist(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .map(|(n, l)| (n + 1, l))
                .ok_or_else(|| Error::Parse {
                    line: text.lines().count() + 1,
                    msg: format!("missing {what}"),
                })
        };
        let parse_nums = |line: usize, l: &str| -> Result<Vec<usize>> {
            l.split_whitespace()
                .map(|t| {
                    t.parse::<usize>().map_err(|e| Error::Parse {
                        line,
                        msg: format!("{t:?}: {e}"),
                    })
                })
                .collect()
        };
        let (ln, l) = next("header `N M`")?;
        let head = parse_nums(ln, l)?;
        if head.len() != 2 {
            return Err(Error::Parse {
                line: ln,
                msg: "expected `N M`".into(),
            });
        }
        let (n, m) = (head[0], head[1]);
        let mut widths = |count: usize, what: &str| -> Result<Vec<u8>> {
            let (ln, l) = next(what)?;
            let w = parse_nums(ln, l)?;
            if w.len() != count {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("expected {count} {what}, found {}", w.len()),
                });
            }
            w.into_iter()
                .map(|x| {
                    u8::try_from(x)
                        .ok()
                        .filter(|&x| check_width(x).is_ok())
                        .ok_or(Error::Parse {
                            line: ln,
                            msg: format!("width {x} outside 1..=8"),
                        })
                })
                .collect()
        };
        let col_widths = widths(n, "column widths")?;
        let row_widths = widths(m, "row widths")?;
        let mut edges = Vec::new();
        for (ln, l) in lines {
            let ln = ln + 1;
            let toks: Vec<&str> = l.split_whitespace().collect();
            let perr = |msg: String| Error::Parse { line: ln, msg };
            if toks.len() < 3 {
                return Err(perr("expected `row col hex...`".into()));
            }
            let idx = |t: &str| t.parse::<usize>().map_err(|e| perr(format!("{t:?}: {e}")));
            let (row, col) = (idx(toks[0])?, idx(toks[1])?);
            if row >= m || col >= n {
                return Err(perr(format!("edge ({row}, {col}) out of range")));
            }
            if toks.len() - 2 != row_widths[row] as usize {
                return Err(perr(format!(
                    "expected {} map rows, found {}",
                    row_widths[row],
                    toks.len() - 2
                )));
            }
            let map = LinearMap::from_hex_tokens(col_widths[col], &toks[2..]).map_err(|e| perr(e.to_string()))?;
            edges.push(Edge { row, col, map });
        }
        Self::new(col_widths, row_widths, edges)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_alist())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_alist(&std::fs::read_to_string(path)?)
    }
}

/// Result of [`audit`]. An empty `violations` list means every structural
/// invariant holds.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub violations: Vec<String>,
    /// Edge counts per class, with `i`, `j` the realized node degrees.
    pub class_counts: BTreeMap<EdgeClass, usize>,
    /// Shortest cycle length if at most 8.
    pub girth: Option<usize>,
    pub bit_rate: f64,
}

impl AuditReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn n_edges(&self) -> usize {
        self.class_counts.values().sum()
    }

    /// L1 distance between the empirical and the target edge distributions.
    pub fn l1_distance(&self, spec: &EnsembleSpec) -> f64 {
        let e = self.n_edges() as f64;
        let mut diff: BTreeMap<EdgeClass, f64> = spec.entries().iter().map(|x| (x.class(), -x.weight)).collect();
        for (c, &n) in &self.class_counts {
            *diff.entry(*c).or_insert(0.0) += n as f64 / e;
        }
        diff.values().map(|d| d.abs()).sum()
    }
}

pub fn audit(h: &HybridParityCheck) -> AuditReport {
    let mut v = Vec::new();
    if h.col_widths.windows(2).any(|w| w[0] > w[1]) {
        v.push("column widths not ascending".to_string());
    }
    if h.row_widths.windows(2).any(|w| w[0] > w[1]) {
        v.push("row widths not ascending".to_string());
    }
    for e in &h.edges {
        if h.col_widths[e.col] > h.row_widths[e.row] {
            v.push(format!("edge ({}, {}) maps a wider column into a narrower row", e.row, e.col));
        }
    }
    for (r, adj) in h.row_adj.iter().enumerate() {
        match adj.iter().map(|&e| h.col_widths[h.edges[e].col]).max() {
            Some(w) if w == h.row_widths[r] => {}
            Some(w) => v.push(format!("row {r} has width {} but widest column {w}", h.row_widths[r])),
            None => v.push(format!("row {r} is empty")),
        }
    }
    for (c, adj) in h.col_adj.iter().enumerate() {
        if adj.is_empty() {
            v.push(format!("column {c} is unconnected"));
        }
    }
    let k = h.n_info();
    for r in 0..h.n_rows() {
        match h.diagonal_edge(r) {
            Some(e) if h.edges[e].map.rows() == h.edges[e].map.cols() => {}
            Some(_) => v.push(format!("diagonal map of row {r} is not square")),
            None => v.push(format!("row {r} has no diagonal entry")),
        }
        for &e in &h.row_adj[r] {
            let c = h.edges[e].col;
            if c > k + r {
                v.push(format!("redundancy column {c} appears in row {r} before its diagonal"));
            }
        }
    }
    let mut class_counts = BTreeMap::new();
    for e in &h.edges {
        let class = EdgeClass {
            i: h.col_adj[e.col].len() as u32,
            j: h.row_adj[e.row].len() as u32,
            p_k: h.col_widths[e.col],
            p_l: h.row_widths[e.row],
        };
        *class_counts.entry(class).or_insert(0) += 1;
    }
    AuditReport {
        violations: v,
        class_counts,
        girth: girth_up_to(h, 8),
        bit_rate: h.bit_rate(),
    }
}

/// Length of the shortest cycle of the Tanner graph if it is `<= limit`.
pub fn girth_up_to(h: &HybridParityCheck, limit: usize) -> Option<usize> {
    // nodes: columns 0..N, rows N..N+M
    let n = h.n_cols();
    let neighbours = |u: usize| -> Vec<usize> {
        if u < n {
            h.col_adj[u].iter().map(|&e| n + h.edges[e].row).collect()
        } else {
            h.row_adj[u - n].iter().map(|&e| h.edges[e].col).collect()
        }
    };
    let mut best = usize::MAX;
    let mut dist = vec![usize::MAX; n + h.n_rows()];
    let mut parent = vec![usize::MAX; n + h.n_rows()];
    for root in 0..n {
        let mut touched = vec![root];
        dist[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            if 2 * dist[u] + 1 >= best.min(limit + 1) {
                break;
            }
            for w in neighbours(u) {
                if w == parent[u] {
                    continue;
                }
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    parent[w] = u;
                    touched.push(w);
                    queue.push_back(w);
                } else {
                    best = best.min(dist[u] + dist[w] + 1);
                }
            }
        }
        for t in touched {
            dist[t] = usize::MAX;
            parent[t] = usize::MAX;
        }
    }
    (best <= limit).then_some(best)
}

/// Largest-remainder rounding of `fractions` to integers summing to `total`.
fn largest_remainder<K: Clone + Ord>(fractions: &BTreeMap<K, f64>, total: usize) -> BTreeMap<K, usize> {
    let mut out: BTreeMap<K, usize> = BTreeMap::new();
    let mut rem: Vec<(f64, K)> = Vec::new();
    let mut assigned = 0;
    for (k, &f) in fractions {
        let x = f * total as f64;
        let fl = x.floor() as usize;
        assigned += fl;
        out.insert(k.clone(), fl);
        rem.push((x - fl as f64, k.clone()));
    }
    rem.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    for (_, k) in rem.into_iter().take(total.saturating_sub(assigned)) {
        *out.get_mut(&k).expect("present") += 1;
    }
    out
}

#[derive(Clone, Copy)]
struct Socket {
    node: usize,
    /// Node type: `(degree, width)`.
    kind: (u32, u8),
}

/// Builds a matrix with `n_symbols` columns from `spec`.
pub fn build<R: Rng + ?Sized>(spec: &EnsembleSpec, n_symbols: usize, rng: &mut R, girth_passes: usize) -> Result<HybridParityCheck> {
    let var_frac = spec.variable_node_fractions();
    let chk_frac = spec.check_node_fractions();
    let vars_per_edge: f64 = spec.entries().iter().map(|e| e.weight / e.i as f64).sum();
    let chks_per_edge: f64 = spec.entries().iter().map(|e| e.weight / e.j as f64).sum();
    let m = (n_symbols as f64 * chks_per_edge / vars_per_edge).round() as usize;
    if m == 0 || m >= n_symbols {
        return Err(Error::Unrealizable(format!(
            "n_symbols={n_symbols} yields {m} checks; need 0 < M < N"
        )));
    }
    let var_counts = largest_remainder(&var_frac, n_symbols);
    let chk_counts = largest_remainder(&chk_frac, m);

    // columns: ascending width, higher degrees first inside a width
    let mut col_kinds: Vec<(u32, u8)> = Vec::with_capacity(n_symbols);
    for (&(i, p), &c) in &var_counts {
        col_kinds.extend(std::iter::repeat_n((i, p), c));
    }
    col_kinds.sort_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)));
    let mut row_kinds: Vec<(u32, u8)> = Vec::with_capacity(m);
    for (&(j, p), &c) in &chk_counts {
        row_kinds.extend(std::iter::repeat_n((j, p), c));
    }
    row_kinds.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));

    let k = n_symbols - m;
    for r in 0..m {
        if col_kinds[k + r].1 != row_kinds[r].1 {
            return Err(Error::Unrealizable(format!(
                "staircase needs redundancy column {} (width {}) to match row {r} (width {})",
                k + r,
                col_kinds[k + r].1,
                row_kinds[r].1
            )));
        }
    }
    let col_widths: Vec<u8> = col_kinds.iter().map(|c| c.1).collect();
    let row_widths: Vec<u8> = row_kinds.iter().map(|c| c.1).collect();

    // staircase
    let mut edges: Vec<Edge> = Vec::new();
    let mut fixed = 0;
    for r in 0..m {
        edges.push(Edge {
            row: r,
            col: k + r,
            map: LinearMap::identity(row_widths[r])?,
        });
        if r > 0 {
            edges.push(Edge {
                row: r,
                col: k + r - 1,
                map: sample_uniform_map(col_widths[k + r - 1], row_widths[r], rng)?,
            });
        }
    }
    fixed += edges.len();

    // free sockets
    let mut var_sockets: Vec<Socket> = Vec::new();
    for (c, &(i, p)) in col_kinds.iter().enumerate() {
        let free = if c < k {
            i as usize
        } else {
            let r = c - k;
            // staircase rows r and r + 1 are taken; later rows only
            let used = if r + 1 < m { 2 } else { 1 };
            (i as usize).saturating_sub(used).min(m.saturating_sub(r + 2))
        };
        var_sockets.extend(std::iter::repeat_n(Socket { node: c, kind: (i, p) }, free));
    }
    let mut chk_sockets: Vec<Socket> = Vec::new();
    for (r, &(j, p)) in row_kinds.iter().enumerate() {
        let used = if r == 0 { 1 } else { 2 };
        let free = (j as usize).saturating_sub(used);
        chk_sockets.extend(std::iter::repeat_n(Socket { node: r, kind: (j, p) }, free));
    }
    // rounding and staircase leave the totals slightly apart; drop the excess
    var_sockets.shuffle(rng);
    chk_sockets.shuffle(rng);
    let total = var_sockets.len().min(chk_sockets.len());
    var_sockets.truncate(total);
    chk_sockets.truncate(total);

    let pairs = class_table(spec, &var_sockets, &chk_sockets)?;
    let mut var_pools: BTreeMap<(u32, u8), Vec<Socket>> = BTreeMap::new();
    for s in var_sockets {
        var_pools.entry(s.kind).or_default().push(s);
    }
    let mut chk_pools: BTreeMap<(u32, u8), Vec<Socket>> = BTreeMap::new();
    for s in chk_sockets {
        chk_pools.entry(s.kind).or_default().push(s);
    }
    let mut free_edges: Vec<(usize, usize)> = Vec::new();
    for ((a, b), n) in pairs {
        let vp = var_pools.get_mut(&a).expect("pool");
        let cp = chk_pools.get_mut(&b).expect("pool");
        for _ in 0..n {
            let v = vp.pop().expect("count");
            let c = cp.pop().expect("count");
            free_edges.push((v.node, c.node));
        }
    }

    let mut occupied: HashSet<(usize, usize)> = edges.iter().map(|e| (e.col, e.row)).collect();
    repair(&mut free_edges, &mut occupied, k, &col_widths, &row_widths, rng)?;
    for _ in 0..girth_passes {
        break_four_cycles(&mut free_edges, &mut occupied, &edges[..fixed], k, &col_widths, &row_widths, rng);
    }
    for (c, r) in free_edges {
        edges.push(Edge {
            row: r,
            col: c,
            map: sample_uniform_map(col_widths[c], row_widths[r], rng)?,
        });
    }
    HybridParityCheck::new(col_widths, row_widths, edges)
}

/// Integer socket pairing counts per `((i, k), (j, l))` whose margins are
/// the socket counts and whose shape follows `π` as closely as rounding
/// allows.
fn class_table(
    spec: &EnsembleSpec,
    var_sockets: &[Socket],
    chk_sockets: &[Socket],
) -> Result<BTreeMap<((u32, u8), (u32, u8)), usize>> {
    let mut rows: BTreeMap<(u32, u8), usize> = BTreeMap::new();
    for s in var_sockets {
        *rows.entry(s.kind).or_insert(0) += 1;
    }
    let mut cols: BTreeMap<(u32, u8), usize> = BTreeMap::new();
    for s in chk_sockets {
        *cols.entry(s.kind).or_insert(0) += 1;
    }
    let mut cells: Vec<(((u32, u8), (u32, u8)), f64)> = Vec::new();
    for (&a, &na) in &rows {
        let cond = spec.conditional(&[Dim::J, Dim::L], &[Dim::I, Dim::K], &[a.0, a.1 as u32])?;
        for (b, w) in cond {
            let b = (b[0], b[1] as u8);
            if cols.contains_key(&b) {
                cells.push(((a, b), w * na as f64));
            }
        }
    }
    let mut table: BTreeMap<((u32, u8), (u32, u8)), usize> = BTreeMap::new();
    let mut row_left = rows.clone();
    let mut col_left = cols.clone();
    for &((a, b), x) in &cells {
        let n = (x.floor() as usize).min(row_left[&a]).min(col_left[&b]);
        *table.entry((a, b)).or_insert(0) += n;
        *row_left.get_mut(&a).unwrap() -= n;
        *col_left.get_mut(&b).unwrap() -= n;
    }
    // remaining units: favoured cells first, then any width-compatible cell
    cells.sort_by(|x, y| (y.1 - y.1.floor()).total_cmp(&(x.1 - x.1.floor())).then(x.0.cmp(&y.0)));
    let mut order: Vec<((u32, u8), (u32, u8))> = cells.iter().map(|c| c.0).collect();
    for &a in rows.keys() {
        for &b in cols.keys() {
            if a.1 <= b.1 && !order.contains(&(a, b)) {
                order.push((a, b));
            }
        }
    }
    loop {
        let mut progress = false;
        for &(a, b) in &order {
            if row_left[&a] > 0 && col_left[&b] > 0 {
                *table.entry((a, b)).or_insert(0) += 1;
                *row_left.get_mut(&a).unwrap() -= 1;
                *col_left.get_mut(&b).unwrap() -= 1;
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }
    if row_left.values().any(|&n| n > 0) {
        return Err(Error::Unrealizable(
            "variable sockets cannot be paired with checks of equal or larger width".into(),
        ));
    }
    Ok(table)
}

fn edge_ok(c: usize, r: usize, k: usize, occupied: &HashSet<(usize, usize)>) -> bool {
    !occupied.contains(&(c, r)) && (c < k || r > c - k)
}

/// Swaps row endpoints until there are no parallel edges and every
/// redundancy edge sits below its diagonal.
fn repair<R: Rng + ?Sized>(
    free: &mut [(usize, usize)],
    occupied: &mut HashSet<(usize, usize)>,
    k: usize,
    col_widths: &[u8],
    row_widths: &[u8],
    rng: &mut R,
) -> Result<()> {
    let mut bad = Vec::new();
    for (n, &(c, r)) in free.iter().enumerate() {
        if edge_ok(c, r, k, occupied) {
            occupied.insert((c, r));
        } else {
            bad.push(n);
        }
    }
    for n in bad {
        let (c, r) = free[n];
        let mut placed = false;
        for _ in 0..1000 * free.len().max(1) {
            let m = rng.random_range(0..free.len());
            if m == n {
                continue;
            }
            let (c2, r2) = free[m];
            if !occupied.contains(&(c2, r2)) || row_widths[r2] != row_widths[r] || col_widths[c2] != col_widths[c] {
                continue;
            }
            occupied.remove(&(c2, r2));
            if edge_ok(c, r2, k, occupied) && edge_ok(c2, r, k, occupied) && (c, r2) != (c2, r) {
                free[n] = (c, r2);
                free[m] = (c2, r);
                occupied.insert((c, r2));
                occupied.insert((c2, r));
                placed = true;
                break;
            }
            occupied.insert((c2, r2));
        }
        if !placed {
            return Err(Error::Unrealizable(format!(
                "could not place column {c} without parallel or out-of-order edges"
            )));
        }
    }
    Ok(())
}

/// One round of row-endpoint swaps removing 4-cycles through free edges.
fn break_four_cycles<R: Rng + ?Sized>(
    free: &mut [(usize, usize)],
    occupied: &mut HashSet<(usize, usize)>,
    fixed: &[Edge],
    k: usize,
    col_widths: &[u8],
    row_widths: &[u8],
    rng: &mut R,
) {
    if free.len() < 2 {
        return;
    }
    let n_rows = row_widths.len();
    let rows_of = |occupied: &HashSet<(usize, usize)>, c: usize| -> Vec<usize> {
        (0..n_rows).filter(|&r| occupied.contains(&(c, r))).collect()
    };
    let mut row_cols: Vec<Vec<usize>> = vec![Vec::new(); n_rows];
    for e in fixed {
        row_cols[e.row].push(e.col);
    }
    for &(c, r) in free.iter() {
        row_cols[r].push(c);
    }
    for n in 0..free.len() {
        let (c, r) = free[n];
        // is (c, r) on a 4-cycle?
        let on_cycle = rows_of(occupied, c).into_iter().filter(|&r2| r2 != r).any(|r2| {
            row_cols[r].iter().any(|&c2| c2 != c && row_cols[r2].contains(&c2))
        });
        if !on_cycle {
            continue;
        }
        for _ in 0..20 {
            let m = rng.random_range(0..free.len());
            let (c2, r2) = free[m];
            if m == n || r2 == r || row_widths[r2] != row_widths[r] || col_widths[c2] != col_widths[c] {
                continue;
            }
            occupied.remove(&(c, r));
            occupied.remove(&(c2, r2));
            if edge_ok(c, r2, k, occupied) && edge_ok(c2, r, k, occupied) {
                free[n] = (c, r2);
                free[m] = (c2, r);
                occupied.insert((c, r2));
                occupied.insert((c2, r));
                row_cols[r].retain(|&x| x != c);
                row_cols[r2].retain(|&x| x != c2);
                row_cols[r].push(c2);
                row_cols[r2].push(c);
                break;
            }
            occupied.insert((c, r));
            occupied.insert((c2, r2));
        }
    }
}
