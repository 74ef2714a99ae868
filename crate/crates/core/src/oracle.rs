//! Exact ground truth: transfer-matrix evaluation of the partition function
//! for moderate row counts, brute-force enumeration for tiny lattices, and
//! the small exact sums the statistical tests are checked against.
//!
//! The transfer operator never materializes its matrix. A column-to-column
//! product is applied site by site: the state vector is reindexed over mixed
//! (new-column prefix, old-column suffix) strings, consuming one old bit and
//! appending one new bit per row. Strings with a zero vertical partial
//! product are pruned, so the RLL operator works over the F(rows+2) valid
//! columns and one application costs `O(rows * #states)` instead of
//! `O(#states^2)`. Everything runs in log2 with per-column renormalization.

use alloc::vec;
use alloc::vec::Vec;
use alloc::{format, string::String};

use crate::error::{Error, Result};
use crate::model::{ColumnState, LatticeModel, StripView};
use crate::num;

/// Hard cap on rows for the transfer method.
pub const TRANSFER_MAX_ROWS: usize = 30;
/// Hard cap on the pruned column-state count for the transfer method.
pub const TRANSFER_MAX_STATES: usize = 2_200_000;
/// Hard cap on `rows * cols` for brute-force enumeration.
pub const BRUTE_MAX_SITES: usize = 24;
/// Hard cap on rows for brute-force conditional sums.
pub const CONDITIONAL_MAX_ROWS: usize = 24;

/// How `exact_log2_z` evaluates the partition function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Transfer matrix if the size limits allow (transposing the lattice if
    /// that helps), else brute force, else a size-limit error.
    Auto,
    Transfer,
    Brute,
}

/// Exact log2 partition function. Returns `NEG_INFINITY` for a model whose
/// support is empty.
pub fn exact_log2_z(model: &LatticeModel, method: Method) -> Result<f64> {
    match method {
        Method::Brute => brute_force_log2_z(model),
        Method::Transfer => Ok(TransferOperator::new(model)?.log2_partition(model.cols())),
        Method::Auto => {
            let oriented;
            let m = if model.rows() <= model.cols() {
                model
            } else {
                oriented = transpose(model);
                &oriented
            };
            match TransferOperator::new(m) {
                Ok(op) => Ok(op.log2_partition(m.cols())),
                Err(Error::SizeLimit(_)) if model.sites() <= BRUTE_MAX_SITES => {
                    brute_force_log2_z(model)
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// Exact capacity: `log2 Z / (rows * cols)`.
pub fn exact_capacity(model: &LatticeModel) -> Result<f64> {
    Ok(exact_log2_z(model, Method::Auto)? / model.sites() as f64)
}

/// Number of columns of length `rows` with positive RLL column weight:
/// the Fibonacci number F(rows + 2) with F(1) = F(2) = 1.
///
/// Panics if the count exceeds `u128` (rows > 184).
pub fn valid_column_count(rows: usize) -> u128 {
    assert!(rows >= 1, "row count must be positive");
    let (mut a, mut b) = (1u128, 1u128); // F(1), F(2)
    for _ in 0..rows {
        let next = a.checked_add(b).expect("column count exceeds u128");
        a = b;
        b = next;
    }
    b
}

/// Brute-force conditional normalizer: the exact sum over all `2^rows`
/// columns of `column weight * coupling to prev`. Reference for the
/// resampling weights reported by the forward pass.
pub fn conditional_normalizer(model: &LatticeModel, prev: &ColumnState) -> Result<f64> {
    let rows = model.rows();
    if rows > CONDITIONAL_MAX_ROWS {
        return Err(Error::SizeLimit(format!(
            "conditional sums enumerate 2^rows columns; rows must be <= {CONDITIONAL_MAX_ROWS}, got {rows}"
        )));
    }
    if prev.len() != rows {
        return Err(Error::DimensionMismatch {
            expected: rows,
            got: prev.len(),
        });
    }
    let h = model.h_potential();
    let v = model.v_potential();
    let mut total = 0.0;
    'next: for mask in 0..(1u64 << rows) {
        let mut w = 1.0;
        for r in 0..rows {
            let b = ((mask >> r) & 1) as u8;
            w *= h.eval(b, prev.bit(r));
            if r + 1 < rows {
                w *= v.eval(((mask >> (r + 1)) & 1) as u8, b);
            }
            if w == 0.0 {
                continue 'next;
            }
        }
        total += w;
    }
    Ok(total)
}

/// Transfer operator over the column states with positive column weight.
#[derive(Debug)]
pub struct TransferOperator {
    rows: usize,
    h: [[f64; 2]; 2],
    v: [[f64; 2]; 2],
    /// `sets[l]`: sorted masks of length `l` whose internal vertical
    /// partial product is nonzero. `sets[rows]` is the state basis.
    sets: Vec<Vec<u32>>,
    /// Per suffix length `l`, the rank in `sets[l-1]` of each mask with its
    /// first bit dropped.
    drop_rank: Vec<Vec<u32>>,
    /// Per prefix length `l` and appended bit, the rank in `sets[l+1]`
    /// (`u32::MAX` when the extension has zero vertical weight).
    append_rank: Vec<[Vec<u32>; 2]>,
}

impl TransferOperator {
    pub fn new(model: &LatticeModel) -> Result<Self> {
        let rows = model.rows();
        if rows > TRANSFER_MAX_ROWS {
            return Err(Error::SizeLimit(format!(
                "transfer method supports rows <= {TRANSFER_MAX_ROWS}, got {rows} \
                 (swap rows and columns, or use brute force for tiny lattices)"
            )));
        }
        let v = model.v_potential().table();
        let h = model.h_potential().table();

        let mut sets: Vec<Vec<u32>> = Vec::with_capacity(rows + 1);
        let mut append_rank: Vec<[Vec<u32>; 2]> = Vec::with_capacity(rows);
        sets.push(vec![0]);
        for l in 0..rows {
            let cur = &sets[l];
            let mut next: Vec<u32> = Vec::new();
            let mut ranks = [vec![u32::MAX; cur.len()], vec![u32::MAX; cur.len()]];
            for b in 0..2usize {
                for (p_rank, &p) in cur.iter().enumerate() {
                    let allowed = l == 0 || v[b][((p >> (l - 1)) & 1) as usize] != 0.0;
                    if allowed {
                        ranks[b][p_rank] = next.len() as u32;
                        next.push(p | ((b as u32) << l));
                    }
                }
            }
            if next.len() > TRANSFER_MAX_STATES {
                return Err(Error::SizeLimit(format!(
                    "transfer basis would exceed {TRANSFER_MAX_STATES} column states at length {}",
                    l + 1
                )));
            }
            append_rank.push(ranks);
            sets.push(next);
        }

        // Drop-first-bit ranks, built with a two-pointer walk: masks are
        // sorted, and mask >> 1 is nondecreasing along them.
        let mut drop_rank: Vec<Vec<u32>> = Vec::with_capacity(rows + 1);
        drop_rank.push(Vec::new()); // length 0: never dropped
        for l in 1..=rows {
            let shorter = &sets[l - 1];
            let mut out = Vec::with_capacity(sets[l].len());
            let mut ptr = 0usize;
            for &m in &sets[l] {
                let target = m >> 1;
                while shorter[ptr] < target {
                    ptr += 1;
                }
                debug_assert_eq!(shorter[ptr], target);
                out.push(ptr as u32);
            }
            drop_rank.push(out);
        }

        Ok(Self {
            rows,
            h,
            v,
            sets,
            drop_rank,
            append_rank,
        })
    }

    pub fn n_states(&self) -> usize {
        self.sets[self.rows].len()
    }

    pub fn state(&self, idx: usize) -> ColumnState {
        ColumnState::from_mask(self.sets[self.rows][idx] as u64, self.rows)
    }

    /// Weight of the `from -> to` column transition: `to`'s column weight
    /// times the coupling between the two columns. Evaluated directly from
    /// the potentials, independent of the site-by-site product below.
    pub fn transition_weight(&self, to: &ColumnState, from: &ColumnState) -> f64 {
        debug_assert_eq!(to.len(), self.rows);
        debug_assert_eq!(from.len(), self.rows);
        let mut w = 1.0;
        for r in 0..self.rows {
            w *= self.h[to.bit(r) as usize][from.bit(r) as usize];
            if r + 1 < self.rows {
                w *= self.v[to.bit(r + 1) as usize][to.bit(r) as usize];
            }
        }
        w
    }

    /// Column weight of each basis state (the initial vector).
    fn initial_vector(&self) -> Vec<f64> {
        self.sets[self.rows]
            .iter()
            .map(|&m| {
                let mut w = 1.0;
                for r in 0..self.rows.saturating_sub(1) {
                    w *= self.v[((m >> (r + 1)) & 1) as usize][((m >> r) & 1) as usize];
                }
                w
            })
            .collect()
    }

    /// Applies the operator once: `out[s'] = sum_s weight(s', s) * v[s]`.
    fn apply(&self, v_in: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v_in.len(), self.n_states());
        let rows = self.rows;
        let mut cur = v_in.to_vec();
        for r in 0..rows {
            let pre = &self.sets[r];
            let suf_len = self.sets[rows - r].len();
            let new_suf_len = self.sets[rows - r - 1].len();
            let suf_masks = &self.sets[rows - r];
            let drop = &self.drop_rank[rows - r];
            let append = &self.append_rank[r];
            let mut next = vec![0.0; self.sets[r + 1].len() * new_suf_len];
            for (p_rank, &p) in pre.iter().enumerate() {
                let p_last = if r > 0 { ((p >> (r - 1)) & 1) as usize } else { 0 };
                let base_in = p_rank * suf_len;
                for t_rank in 0..suf_len {
                    let x = cur[base_in + t_rank];
                    if x == 0.0 {
                        continue;
                    }
                    let a = (suf_masks[t_rank] & 1) as usize;
                    let t_new = drop[t_rank] as usize;
                    for b in 0..2usize {
                        let p_new = append[b][p_rank];
                        if p_new == u32::MAX {
                            continue;
                        }
                        let mut w = self.h[b][a];
                        if r > 0 {
                            w *= self.v[b][p_last];
                        }
                        if w != 0.0 {
                            next[p_new as usize * new_suf_len + t_new] += w * x;
                        }
                    }
                }
            }
            cur = next;
        }
        cur
    }

    /// log2 of the partition function over `cols` columns, accumulated with
    /// per-column renormalization.
    pub fn log2_partition(&self, cols: usize) -> f64 {
        assert!(cols >= 1);
        let mut v = self.initial_vector();
        let mut acc = 0.0;
        for k in 0..cols {
            if k > 0 {
                v = self.apply(&v);
            }
            let total: f64 = v.iter().sum();
            if total == 0.0 {
                return f64::NEG_INFINITY;
            }
            acc += num::log2(total);
            for x in &mut v {
                *x /= total;
            }
        }
        acc
    }
}

fn transpose(model: &LatticeModel) -> LatticeModel {
    LatticeModel::new(
        model.cols(),
        model.rows(),
        model.v_potential().clone(),
        model.h_potential().clone(),
    )
    .expect("transpose of a valid model is valid")
}

fn brute_force_log2_z(model: &LatticeModel) -> Result<f64> {
    let sites = model.sites();
    if sites > BRUTE_MAX_SITES {
        return Err(Error::SizeLimit(format!(
            "brute force enumerates 2^(rows*cols) configurations; rows*cols must be <= \
             {BRUTE_MAX_SITES}, got {sites}"
        )));
    }
    let (rows, cols) = (model.rows(), model.cols());
    let h = model.h_potential();
    let v = model.v_potential();
    let bit = |cfg: u64, r: usize, c: usize| ((cfg >> (c * rows + r)) & 1) as u8;
    let mut total = 0.0;
    'next: for cfg in 0..(1u64 << sites) {
        let mut w = 1.0;
        for c in 0..cols {
            for r in 0..rows {
                if r + 1 < rows {
                    w *= v.eval(bit(cfg, r + 1, c), bit(cfg, r, c));
                }
                if c + 1 < cols {
                    w *= h.eval(bit(cfg, r, c + 1), bit(cfg, r, c));
                }
                if w == 0.0 {
                    continue 'next;
                }
            }
        }
        total += w;
    }
    if total == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(num::log2(total))
}

/// Exact log2 partition function evaluated over the strip decomposition:
/// strips are enumerated jointly and chained through their last columns.
/// An independent route for checking that the strip factor convention
/// counts every edge exactly once.
pub fn strip_exact_log2_z(view: &StripView<'_>) -> Result<f64> {
    let model = view.model();
    let rows = model.rows();
    if rows > 10 || rows * view.width() > BRUTE_MAX_SITES {
        return Err(Error::SizeLimit(String::from(
            "strip enumeration requires rows <= 10 and rows*width <= 24",
        )));
    }
    let col_states = 1usize << rows;
    let h = model.h_potential();
    let v = model.v_potential();

    // mat[last * col_states + first] = total in-strip weight with the given
    // first and last columns; one matrix per distinct strip width.
    let strip_matrix = |width: usize| -> Vec<f64> {
        let s = 1usize << width;
        let inrow: Vec<f64> = (0..s)
            .map(|sigma| {
                let mut val = 1.0;
                for i in 1..width {
                    val *= h.eval(((sigma >> i) & 1) as u8, ((sigma >> (i - 1)) & 1) as u8);
                }
                val
            })
            .collect();
        let pair = |below: usize, above: usize| -> f64 {
            let mut val = 1.0;
            for i in 0..width {
                val *= v.eval(((below >> i) & 1) as u8, ((above >> i) & 1) as u8);
            }
            val
        };
        let mut mat = vec![0.0; col_states * col_states];
        let total_bits = rows * width;
        'cfg: for cfg in 0..(1u64 << total_bits) {
            let sigma = |j: usize| ((cfg >> (j * width)) & ((1 << width) - 1)) as usize;
            let mut w = 1.0;
            for j in 0..rows {
                w *= inrow[sigma(j)];
                if j + 1 < rows {
                    w *= pair(sigma(j + 1), sigma(j));
                }
                if w == 0.0 {
                    continue 'cfg;
                }
            }
            let mut first = 0usize;
            let mut last = 0usize;
            for j in 0..rows {
                first |= (sigma(j) & 1) << j;
                last |= ((sigma(j) >> (width - 1)) & 1) << j;
            }
            mat[last * col_states + first] += w;
        }
        mat
    };

    // Coupling between a strip's first column and the previous last column.
    let mut cross = vec![0.0; col_states * col_states];
    for (first, row) in cross.chunks_mut(col_states).enumerate() {
        for (prev, slot) in row.iter_mut().enumerate() {
            let mut w = 1.0;
            for j in 0..rows {
                w *= h.eval(((first >> j) & 1) as u8, ((prev >> j) & 1) as u8);
            }
            *slot = w;
        }
    }

    let mut acc = 0.0;
    let mut dist: Vec<f64> = Vec::new();
    let mut mats: [(usize, Vec<f64>); 2] = [(0, Vec::new()), (0, Vec::new())];
    for step in 0..view.super_cols() {
        let width = view.width_of(step);
        if mats[0].0 != width && mats[1].0 != width {
            let slot = if mats[0].0 == 0 { 0 } else { 1 };
            mats[slot] = (width, strip_matrix(width));
        }
        let mat = if mats[0].0 == width { &mats[0].1 } else { &mats[1].1 };

        let incoming: Vec<f64> = if step == 0 {
            vec![1.0; col_states] // no coupling before the first strip
        } else {
            (0..col_states)
                .map(|first| {
                    (0..col_states)
                        .map(|prev| cross[first * col_states + prev] * dist[prev])
                        .sum()
                })
                .collect()
        };
        let mut next = vec![0.0; col_states];
        for (last, slot) in next.iter_mut().enumerate() {
            let row = &mat[last * col_states..(last + 1) * col_states];
            *slot = row.iter().zip(&incoming).map(|(m, x)| m * x).sum();
        }
        let total: f64 = next.iter().sum();
        if total == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        acc += num::log2(total);
        for x in &mut next {
            *x /= total;
        }
        dist = next;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PairwisePotential;

    #[test]
    fn square_rll_counts() {
        let expected = [2.0, 7.0, 63.0, 1234.0, 55447.0];
        for (n, &z) in (1..=5usize).zip(&expected) {
            let m = LatticeModel::rll(n, n).unwrap();
            let t = num::exp2(exact_log2_z(&m, Method::Transfer).unwrap());
            assert!((t - z).abs() < 1e-6 * z, "{n}x{n} transfer: {t} vs {z}");
            if n <= 4 {
                let b = num::exp2(exact_log2_z(&m, Method::Brute).unwrap());
                assert!((b - z).abs() < 1e-6 * z, "{n}x{n} brute: {b} vs {z}");
            }
        }
    }

    #[test]
    fn brute_and_transfer_agree_on_small_lattices() {
        for rows in 1..=6usize {
            for cols in 1..=6usize {
                if rows * cols > 20 {
                    continue;
                }
                let m = LatticeModel::rll(rows, cols).unwrap();
                let b = exact_log2_z(&m, Method::Brute).unwrap();
                let t = exact_log2_z(&m, Method::Transfer).unwrap();
                assert!((b - t).abs() < 1e-9 * b.abs().max(1.0), "{rows}x{cols}");
            }
        }
    }

    #[test]
    fn brute_and_transfer_agree_at_24_sites() {
        for (rows, cols, z) in [(4usize, 6usize, 36787.0), (3, 8, 39561.0)] {
            let m = LatticeModel::rll(rows, cols).unwrap();
            let b = num::exp2(exact_log2_z(&m, Method::Brute).unwrap());
            let t = num::exp2(exact_log2_z(&m, Method::Transfer).unwrap());
            assert!((b - z).abs() < 1e-6 * z);
            assert!((t - z).abs() < 1e-6 * z);
        }
    }

    #[test]
    fn weighted_models_agree_between_methods() {
        let h = PairwisePotential::new([[1.0, 0.5], [2.0, 0.25]]).unwrap();
        let v = PairwisePotential::new([[0.8, 1.2], [1.1, 0.3]]).unwrap();
        for (rows, cols) in [(1usize, 5usize), (2, 4), (3, 3), (4, 4), (2, 6)] {
            let m = LatticeModel::new(rows, cols, h.clone(), v.clone()).unwrap();
            let b = exact_log2_z(&m, Method::Brute).unwrap();
            let t = exact_log2_z(&m, Method::Transfer).unwrap();
            assert!(
                (b - t).abs() < 1e-9 * b.abs().max(1.0),
                "{rows}x{cols}: brute {b} vs transfer {t}"
            );
        }
    }

    #[test]
    fn transpose_symmetry() {
        let a = LatticeModel::rll(7, 13).unwrap();
        let b = LatticeModel::rll(13, 7).unwrap();
        let za = exact_log2_z(&a, Method::Auto).unwrap();
        let zb = exact_log2_z(&b, Method::Auto).unwrap();
        assert!((za - zb).abs() < 1e-9 * za);

        // Asymmetric potentials: transposing swaps the edge orientations.
        let h = PairwisePotential::new([[1.0, 0.5], [2.0, 0.0]]).unwrap();
        let v = PairwisePotential::new([[0.7, 1.4], [1.0, 0.2]]).unwrap();
        let m = LatticeModel::new(3, 4, h.clone(), v.clone()).unwrap();
        let mt = LatticeModel::new(4, 3, v, h).unwrap();
        let z = exact_log2_z(&m, Method::Brute).unwrap();
        let zt = exact_log2_z(&mt, Method::Brute).unwrap();
        assert!((z - zt).abs() < 1e-9 * z.abs().max(1.0));
    }

    #[test]
    fn one_row_chain_counts_fibonacci() {
        for cols in 1..=40usize {
            let m = LatticeModel::rll(1, cols).unwrap();
            let z = exact_log2_z(&m, Method::Auto).unwrap();
            let f = valid_column_count(cols) as f64;
            assert!((z - num::log2(f)).abs() < 1e-9, "cols={cols}");
        }
    }

    #[test]
    fn fibonacci_column_counts() {
        assert_eq!(valid_column_count(1), 2);
        assert_eq!(valid_column_count(2), 3);
        assert_eq!(valid_column_count(5), 13);
        assert_eq!(valid_column_count(10), 144);
    }

    #[test]
    fn valid_count_matches_enumeration() {
        for rows in 1..=18usize {
            let m = LatticeModel::rll(rows, 1).unwrap();
            let mut count = 0u128;
            for mask in 0..(1u64 << rows) {
                let s = ColumnState::from_mask(mask, rows);
                if m.column_weight(&s).unwrap() == 1.0 {
                    count += 1;
                }
            }
            assert_eq!(count, valid_column_count(rows), "rows={rows}");
        }
    }

    #[test]
    fn conditional_normalizer_examples() {
        let m1 = LatticeModel::rll(1, 2).unwrap();
        assert_eq!(
            conditional_normalizer(&m1, &ColumnState::zeros(1)).unwrap(),
            2.0
        );
        let m2 = LatticeModel::rll(2, 2).unwrap();
        let prev = ColumnState::new(vec![1, 0]).unwrap();
        assert_eq!(conditional_normalizer(&m2, &prev).unwrap(), 2.0);
        let m3 = LatticeModel::rll(3, 2).unwrap();
        assert_eq!(
            conditional_normalizer(&m3, &ColumnState::zeros(3)).unwrap(),
            5.0
        );
    }

    #[test]
    fn operator_weights_are_binary_for_rll() {
        let m = LatticeModel::rll(5, 5).unwrap();
        let op = TransferOperator::new(&m).unwrap();
        assert_eq!(op.n_states(), 13);
        let zeros = ColumnState::zeros(5);
        for i in 0..op.n_states() {
            let s = op.state(i);
            assert_eq!(m.column_weight(&s).unwrap(), 1.0);
            // Every valid state follows the all-zeros column with weight 1.
            assert_eq!(op.transition_weight(&s, &zeros), 1.0);
            for j in 0..op.n_states() {
                let w = op.transition_weight(&s, &op.state(j));
                assert!(w == 0.0 || w == 1.0);
            }
        }
    }

    #[test]
    fn headline_capacity_at_ten() {
        let m = LatticeModel::rll(10, 10).unwrap();
        let c = exact_capacity(&m).unwrap();
        assert!((c - 0.6081622029498402).abs() < 1e-10);
    }

    #[test]
    fn strip_partition_matches_base() {
        for rows in 2..=6usize {
            for cols in 2..=6usize {
                let m = LatticeModel::rll(rows, cols).unwrap();
                let base = exact_log2_z(&m, Method::Auto).unwrap();
                for width in 1..=3usize.min(cols) {
                    let view = m.strip_view(width).unwrap();
                    let strip = strip_exact_log2_z(&view).unwrap();
                    assert!(
                        (strip - base).abs() < 1e-9 * base.abs().max(1.0),
                        "{rows}x{cols} W={width}: {strip} vs {base}"
                    );
                }
            }
        }
    }

    #[test]
    fn strip_partition_matches_base_weighted() {
        let h = PairwisePotential::new([[1.0, 0.6], [1.5, 0.1]]).unwrap();
        let v = PairwisePotential::new([[0.9, 1.1], [1.2, 0.4]]).unwrap();
        let m = LatticeModel::new(4, 5, h, v).unwrap();
        let base = exact_log2_z(&m, Method::Brute).unwrap();
        for width in 1..=3usize {
            let view = m.strip_view(width).unwrap();
            let strip = strip_exact_log2_z(&view).unwrap();
            assert!((strip - base).abs() < 1e-9 * base.abs().max(1.0), "W={width}");
        }
    }

    #[test]
    fn size_limits_are_enforced() {
        let m = LatticeModel::rll(5, 5).unwrap();
        assert!(matches!(
            exact_log2_z(&m, Method::Brute),
            Err(Error::SizeLimit(_))
        ));
        let tall = LatticeModel::rll(31, 2).unwrap();
        assert!(matches!(
            exact_log2_z(&tall, Method::Transfer),
            Err(Error::SizeLimit(_))
        ));
        // Auto transposes: 31 rows x 2 cols runs as 2 x 31.
        let z = exact_log2_z(&tall, Method::Auto).unwrap();
        let wide = LatticeModel::rll(2, 31).unwrap();
        let zw = exact_log2_z(&wide, Method::Transfer).unwrap();
        assert!((z - zw).abs() < 1e-9 * z);

        assert!(conditional_normalizer(&LatticeModel::rll(25, 2).unwrap(), &ColumnState::zeros(25)).is_err());
    }
}
