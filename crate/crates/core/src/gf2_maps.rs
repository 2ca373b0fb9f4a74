//! Full-rank binary linear maps `G(2)^{p_k} -> G(2)^{p_l}`.
//!
//! These are the nonzero entries of a hybrid parity-check matrix. Pushing a
//! message from a variable in `G(q_k)` to a check in `G(q_l)` is an
//! *extension*; pulling it back is a *truncation*.

use rand::Rng;

use crate::group_algebra::{check_width, order, GroupSymbol};
use crate::messages::ProbVector;
use crate::{Error, Result};

/// A `rows x cols` binary matrix stored as `rows` bitmasks of width `cols`.
///
/// Bit `t` of a row mask multiplies input coordinate `t`; output coordinate
/// `r` of `A·s` is the parity of `row[r] & s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LinearMap {
    rows: u8,
    cols: u8,
    masks: [u8; 8],
}

/// Rank over GF(2) of a set of row bitmasks.
pub fn gf2_rank(rows: &[u8]) -> usize {
    let mut rows: Vec<u8> = rows.to_vec();
    let mut rank = 0;
    for bit in 0..8 {
        let pivot = 1u8 << bit;
        let Some(pos) = (rank..rows.len()).find(|&r| rows[r] & pivot != 0) else {
            continue;
        };
        rows.swap(rank, pos);
        let p = rows[rank];
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && *row & pivot != 0 {
                *row ^= p;
            }
        }
        rank += 1;
    }
    rank
}

fn check_dims(rows: u8, cols: u8) -> Result<()> {
    check_width(rows)?;
    check_width(cols)?;
    if cols > rows {
        return Err(Error::InvalidMapDims { rows, cols });
    }
    Ok(())
}

impl LinearMap {
    /// Builds a map from row masks; fails unless the map is injective.
    pub fn from_rows(cols: u8, row_masks: &[u8]) -> Result<Self> {
        let rows = row_masks.len() as u8;
        check_dims(rows, cols)?;
        let colmask = ((1u16 << cols) - 1) as u8;
        let mut masks = [0u8; 8];
        for (m, &r) in masks.iter_mut().zip(row_masks) {
            if r & !colmask != 0 {
                return Err(Error::ValueOutOfRange {
                    value: r as u16,
                    width: cols,
                });
            }
            *m = r;
        }
        let rank = gf2_rank(row_masks);
        if rank != cols as usize {
            return Err(Error::RankDeficient { rank, cols });
        }
        Ok(Self { rows, cols, masks })
    }

    pub fn identity(width: u8) -> Result<Self> {
        check_width(width)?;
        let rows: Vec<u8> = (0..width).map(|r| 1u8 << r).collect();
        Self::from_rows(width, &rows)
    }

    /// Embedding of `G(2)^cols` onto the low coordinates of `G(2)^rows`.
    pub fn embedding(cols: u8, rows: u8) -> Result<Self> {
        check_dims(rows, cols)?;
        let masks: Vec<u8> = (0..rows)
            .map(|r| if r < cols { 1u8 << r } else { 0 })
            .collect();
        Self::from_rows(cols, &masks)
    }

    /// Output width `p_l`.
    #[inline]
    pub fn rows(&self) -> u8 {
        self.rows
    }

    /// Input width `p_k`.
    #[inline]
    pub fn cols(&self) -> u8 {
        self.cols
    }

    #[inline]
    pub fn row_masks(&self) -> &[u8] {
        &self.masks[..self.rows as usize]
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols && self.row_masks().iter().enumerate().all(|(r, &m)| m == 1 << r)
    }

    /// `A·s` on raw indices; `s` must be below `2^cols`.
    #[inline]
    pub fn apply_raw(&self, s: u8) -> u8 {
        let mut out = 0u8;
        for (r, &m) in self.row_masks().iter().enumerate() {
            out |= (((m & s).count_ones() & 1) as u8) << r;
        }
        out
    }

    pub fn apply(&self, s: GroupSymbol) -> Result<GroupSymbol> {
        if s.width() != self.cols {
            return Err(Error::WidthMismatch {
                expected: self.cols,
                found: s.width(),
            });
        }
        GroupSymbol::new(self.apply_raw(s.value()) as u16, self.rows)
    }

    /// Image table: entry `i` is `A·i` for every `i` in `G(2^cols)`.
    pub fn image_table(&self) -> Vec<u8> {
        (0..order(self.cols)).map(|i| self.apply_raw(i as u8)).collect()
    }

    /// Unique preimage of `j` when `j ∈ Im(A)`.
    pub fn image_index(&self, j: GroupSymbol) -> Result<Option<GroupSymbol>> {
        if j.width() != self.rows {
            return Err(Error::WidthMismatch {
                expected: self.rows,
                found: j.width(),
            });
        }
        Ok((0..order(self.cols))
            .find(|&i| self.apply_raw(i as u8) == j.value())
            .map(|i| GroupSymbol::new(i as u16, self.cols).expect("index below order")))
    }

    /// Extension of a probability vector from `G(q_k)` into `G(q_l)`: mass
    /// moves to `A·i`, positions outside the image are zero.
    pub fn extend(&self, x: &ProbVector) -> Result<ProbVector> {
        if x.width() != self.cols {
            return Err(Error::LengthMismatch {
                expected: order(self.cols),
                found: x.len(),
            });
        }
        let mut y = vec![0.0; order(self.rows)];
        extend_with_table(&self.image_table(), x.as_slice(), &mut y);
        ProbVector::from_raw(self.rows, y)
    }

    /// Truncation of a probability vector from `G(q_l)` back to `G(q_k)`:
    /// `x_i = y_{A·i}`. No renormalization.
    pub fn truncate(&self, y: &ProbVector) -> Result<ProbVector> {
        if y.width() != self.rows {
            return Err(Error::LengthMismatch {
                expected: order(self.rows),
                found: y.len(),
            });
        }
        let mut x = vec![0.0; order(self.cols)];
        truncate_with_table(&self.image_table(), y.as_slice(), &mut x);
        ProbVector::from_raw(self.cols, x)
    }

    /// Hex tokens, one per row; the most-significant bit of each token is
    /// input coordinate 0.
    pub fn to_hex_tokens(&self) -> Vec<String> {
        self.row_masks()
            .iter()
            .map(|&m| format!("{:x}", reverse_bits(m, self.cols)))
            .collect()
    }

    pub fn from_hex_tokens(cols: u8, tokens: &[&str]) -> Result<Self> {
        check_width(cols)?;
        let mut masks = Vec::with_capacity(tokens.len());
        for t in tokens {
            let v = u8::from_str_radix(t, 16).map_err(|e| Error::Parse {
                line: 0,
                msg: format!("bad hex token {t:?}: {e}"),
            })?;
            if cols < 8 && v >> cols != 0 {
                return Err(Error::ValueOutOfRange {
                    value: v as u16,
                    width: cols,
                });
            }
            masks.push(reverse_bits(v, cols));
        }
        Self::from_rows(cols, &masks)
    }
}

fn reverse_bits(m: u8, width: u8) -> u8 {
    m.reverse_bits() >> (8 - width)
}

/// `y[table[i]] = x[i]`, all other `y` entries zeroed.
#[inline]
pub fn extend_with_table(table: &[u8], x: &[f64], y: &mut [f64]) {
    y.iter_mut().for_each(|v| *v = 0.0);
    for (&t, &xi) in table.iter().zip(x) {
        y[t as usize] = xi;
    }
}

/// `x[i] = y[table[i]]`.
#[inline]
pub fn truncate_with_table(table: &[u8], y: &[f64], x: &mut [f64]) {
    for (xi, &t) in x.iter_mut().zip(table) {
        *xi = y[t as usize];
    }
}

/// Draws a map uniformly from the set of full-rank `p_l x p_k` matrices.
///
/// Rejection sampling: i.i.d. fair bits, accepted when the rank is `p_k`.
pub fn sample_uniform_map<R: Rng + ?Sized>(p_k: u8, p_l: u8, rng: &mut R) -> Result<LinearMap> {
    check_dims(p_l, p_k)?;
    let colmask = ((1u16 << p_k) - 1) as u8;
    let mut masks = [0u8; 8];
    loop {
        for m in masks.iter_mut().take(p_l as usize) {
            *m = rng.random::<u8>() & colmask;
        }
        if gf2_rank(&masks[..p_l as usize]) == p_k as usize {
            return Ok(LinearMap {
                rows: p_l,
                cols: p_k,
                masks,
            });
        }
    }
}

/// Every full-rank `p_l x p_k` map, in lexicographic order of row masks.
pub fn enumerate_full_rank(p_k: u8, p_l: u8) -> Result<Vec<LinearMap>> {
    check_dims(p_l, p_k)?;
    let per_row = 1usize << p_k;
    let total = per_row.pow(p_l as u32);
    let mut out = Vec::new();
    let mut masks = vec![0u8; p_l as usize];
    for code in 0..total {
        let mut c = code;
        for m in masks.iter_mut() {
            *m = (c % per_row) as u8;
            c /= per_row;
        }
        if gf2_rank(&masks) == p_k as usize {
            out.push(LinearMap::from_rows(p_k, &masks)?);
        }
    }
    Ok(out)
}

/// Number of full-rank `p_l x p_k` binary matrices, `prod_{t<p_k} (2^{p_l} - 2^t)`.
pub fn count_full_rank(p_k: u8, p_l: u8) -> u64 {
    (0..p_k as u32).map(|t| (1u64 << p_l) - (1u64 << t)).product()
}
