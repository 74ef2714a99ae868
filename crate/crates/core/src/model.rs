//! Lattice graphical model: pairwise potentials on an `M x K` grid of bits,
//! the hard-squares (1,inf) RLL potential, and the column/strip chain
//! decomposition consumed by the sampler.
//!
//! Conventions, fixed once and used everywhere:
//!
//! - A vertical edge joins rows `j` and `j+1` within a column and carries
//!   `v.eval(bit(j+1), bit(j))` (lower row first).
//! - A horizontal edge joins columns `k-1` and `k` within a row and carries
//!   `h.eval(bit(col k), bit(col k-1))` (current column first).
//! - A strip of width `W` turns each row into a super-node with `2^W` states
//!   (bit `w` of a super-state is the bit of original column `start + w`).
//!   The super-node's unary weight absorbs the `W-1` horizontal edges
//!   internal to that row of the strip plus the single horizontal edge back
//!   to the previous strip's last column; vertical edges sit between
//!   consecutive super-nodes. Every original edge is counted exactly once.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

use crate::error::{Error, Result};

/// Largest accepted strip width; per-row state count is `2^width`.
pub const MAX_STRIP_WIDTH: usize = 24;

/// 2x2 table of nonnegative weights attached to one lattice edge.
///
/// `table[a][b]` is the weight of the edge when its endpoints hold bits
/// `a` and `b` (argument order per the module-level edge conventions).
#[derive(Debug, Clone, PartialEq)]
pub struct PairwisePotential {
    table: [[f64; 2]; 2],
}

impl PairwisePotential {
    /// Validates that all entries are nonnegative, finite, and not all zero.
    pub fn new(table: [[f64; 2]; 2]) -> Result<Self> {
        let mut any_positive = false;
        for row in &table {
            for &w in row {
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidPotential(format!(
                        "entries must be finite and nonnegative, got {w}"
                    )));
                }
                if w > 0.0 {
                    any_positive = true;
                }
            }
        }
        if !any_positive {
            return Err(Error::InvalidPotential(String::from(
                "all entries are zero; the model would have empty support",
            )));
        }
        Ok(Self { table })
    }

    /// The hard-squares potential: weight 0 when both endpoints are 1,
    /// weight 1 otherwise.
    pub fn rll() -> Self {
        Self {
            table: [[1.0, 1.0], [1.0, 0.0]],
        }
    }

    #[inline]
    pub fn eval(&self, a: u8, b: u8) -> f64 {
        self.table[a as usize][b as usize]
    }

    pub fn table(&self) -> [[f64; 2]; 2] {
        self.table
    }

    pub fn is_rll(&self) -> bool {
        self.table == [[1.0, 1.0], [1.0, 0.0]]
    }
}

/// One column of lattice bits; length always equals the model's row count.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ColumnState {
    bits: Vec<u8>,
}

impl ColumnState {
    /// Validates that every entry is 0 or 1.
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidParameter(format!(
                "column bits must be 0 or 1, got {b}"
            )));
        }
        Ok(Self { bits })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            bits: vec![0; len],
        }
    }

    /// Unpacks the low `len` bits of `mask` (bit `j` becomes row `j`).
    pub fn from_mask(mask: u64, len: usize) -> Self {
        debug_assert!(len <= 64);
        Self {
            bits: (0..len).map(|j| ((mask >> j) & 1) as u8).collect(),
        }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn bit(&self, row: usize) -> u8 {
        self.bits[row]
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Binary `rows x cols` lattice with pairwise edge potentials.
///
/// Immutable after construction; shared freely across worker threads.
#[derive(Debug, Clone)]
pub struct LatticeModel {
    rows: usize,
    cols: usize,
    h: PairwisePotential,
    v: PairwisePotential,
}

impl LatticeModel {
    pub fn new(
        rows: usize,
        cols: usize,
        h_potential: PairwisePotential,
        v_potential: PairwisePotential,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "lattice dimensions must be positive, got {rows}x{cols}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            h: h_potential,
            v: v_potential,
        })
    }

    /// The 2-D (1,inf) RLL channel: no two adjacent 1s in either direction.
    pub fn rll(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, PairwisePotential::rll(), PairwisePotential::rll())
    }

    /// Same potential on both edge orientations.
    pub fn isotropic(rows: usize, cols: usize, potential: PairwisePotential) -> Result<Self> {
        Self::new(rows, cols, potential.clone(), potential)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn sites(&self) -> usize {
        self.rows * self.cols
    }

    pub fn h_potential(&self) -> &PairwisePotential {
        &self.h
    }

    pub fn v_potential(&self) -> &PairwisePotential {
        &self.v
    }

    pub fn is_rll(&self) -> bool {
        self.h.is_rll() && self.v.is_rll()
    }

    /// Product of the vertical-edge potentials down one column. For the RLL
    /// model this is 1 when the column has no two adjacent 1s, else 0.
    pub fn column_weight(&self, state: &ColumnState) -> Result<f64> {
        self.check_len(state)?;
        let bits = state.bits();
        let mut w = 1.0;
        for j in 0..self.rows.saturating_sub(1) {
            w *= self.v.eval(bits[j + 1], bits[j]);
        }
        Ok(w)
    }

    /// Product of the horizontal-edge potentials between aligned rows of two
    /// adjacent columns (`state` to the right of `prev`).
    pub fn between_weight(&self, state: &ColumnState, prev: &ColumnState) -> Result<f64> {
        self.check_len(state)?;
        self.check_len(prev)?;
        let mut w = 1.0;
        for j in 0..self.rows {
            w *= self.h.eval(state.bit(j), prev.bit(j));
        }
        Ok(w)
    }

    /// View in which each sampling step covers `width` consecutive columns.
    pub fn strip_view(&self, width: usize) -> Result<StripView<'_>> {
        StripView::new(self, width)
    }

    /// The ungrouped view: one original column per sampling step.
    pub fn column_view(&self) -> StripView<'_> {
        StripView::new(self, 1).expect("width 1 is always valid")
    }

    fn check_len(&self, state: &ColumnState) -> Result<()> {
        if state.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: state.len(),
            });
        }
        Ok(())
    }
}

/// Groups every `width` consecutive columns of a lattice into one sampling
/// step; the final step may be narrower when `cols % width != 0`.
///
/// With `width == 1` every derived quantity coincides bit-for-bit with the
/// base model's (the same code path evaluates both).
#[derive(Debug, Clone)]
pub struct StripView<'a> {
    model: &'a LatticeModel,
    width: usize,
}

impl<'a> StripView<'a> {
    fn new(model: &'a LatticeModel, width: usize) -> Result<Self> {
        if width == 0 || width > model.cols() {
            return Err(Error::InvalidParameter(format!(
                "strip width must be in 1..={}, got {width}",
                model.cols()
            )));
        }
        if width > MAX_STRIP_WIDTH {
            return Err(Error::InvalidParameter(format!(
                "strip width {width} exceeds the supported maximum {MAX_STRIP_WIDTH} \
                 (per-row state count is 2^width)"
            )));
        }
        Ok(Self { model, width })
    }

    pub fn model(&self) -> &LatticeModel {
        self.model
    }

    pub fn rows(&self) -> usize {
        self.model.rows()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of sampling steps covering the lattice.
    pub fn super_cols(&self) -> usize {
        self.model.cols().div_ceil(self.width)
    }

    /// Width of step `step` (0-based); equals `width` except possibly last.
    pub fn width_of(&self, step: usize) -> usize {
        debug_assert!(step < self.super_cols());
        let start = step * self.width;
        self.width.min(self.model.cols() - start)
    }

    /// Per-row state count at step `step`.
    pub fn state_count(&self, step: usize) -> usize {
        1 << self.width_of(step)
    }

    /// In-strip weight of one row super-state: the product of the horizontal
    /// edges internal to the strip row.
    pub(crate) fn inrow_weights(&self, step: usize) -> Vec<f64> {
        let w = self.width_of(step);
        let h = &self.model.h;
        (0..1usize << w)
            .map(|sigma| {
                let mut val = 1.0;
                for i in 1..w {
                    val *= h.eval(bit(sigma, i), bit(sigma, i - 1));
                }
                val
            })
            .collect()
    }

    /// Weight of the horizontal edge from the previous strip's last column
    /// into this super-state's first column.
    #[inline]
    pub(crate) fn cross_weight(&self, sigma: usize, prev_bit: u8) -> f64 {
        self.model.h.eval(bit(sigma, 0), prev_bit)
    }

    /// Product of the vertical edges between two super-states on consecutive
    /// rows (`below` is the larger row index).
    #[inline]
    pub(crate) fn pair_weight(&self, step: usize, below: usize, above: usize) -> f64 {
        let w = self.width_of(step);
        let v = &self.model.v;
        let mut val = 1.0;
        for i in 0..w {
            val *= v.eval(bit(below, i), bit(above, i));
        }
        val
    }

    /// Splits a sampled strip (one super-state per row) back into original
    /// columns, left to right.
    pub fn columns_of(&self, step: usize, row_states: &[usize]) -> Vec<ColumnState> {
        debug_assert_eq!(row_states.len(), self.rows());
        let w = self.width_of(step);
        (0..w)
            .map(|i| {
                ColumnState {
                    bits: row_states.iter().map(|&s| bit(s, i)).collect(),
                }
            })
            .collect()
    }
}

#[inline]
fn bit(state: usize, i: usize) -> u8 {
    ((state >> i) & 1) as u8
}
