//! Exact single-step inference on one (super-)column: a forward message
//! pass with per-row normalization, the log resampling weight it yields as
//! a byproduct, and exact backward sampling from the optimal proposal.
//!
//! A step of the sampler conditions on the previous step's last column
//! `prev` and targets the distribution proportional to
//! `column factors(x) * coupling(x, prev)` over the new (super-)column `x`.
//! That target is a chain over the rows, so both its normalizer and exact
//! draws from it cost `O(rows * states^2)`.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{ColumnState, StripView};
use crate::num;

/// Normalized forward messages for one step, plus the log2 normalizers
/// folded out of them.
///
/// `messages()[j]` is the message entering row `j` (row 0 carries the
/// uniform leaf), each normalized to sum 1. The row-to-row normalizers and
/// the terminal sum are kept in log2 so the resampling weight
/// reconstructs without overflow for any number of rows.
#[derive(Debug, Clone)]
pub struct MessageStack {
    mu: Vec<Vec<f64>>,
    log2_c: Vec<f64>,
    log2_terminal: f64,
    alive: bool,
    step: usize,
}

impl MessageStack {
    /// Normalized messages, one per row.
    pub fn messages(&self) -> &[Vec<f64>] {
        &self.mu
    }

    /// Interior log2 normalizers (`rows - 1` entries).
    pub fn log2_normalizers(&self) -> &[f64] {
        &self.log2_c
    }

    pub fn log2_terminal(&self) -> f64 {
        self.log2_terminal
    }

    /// Whether the conditioning column admits any positive-weight extension.
    pub fn has_support(&self) -> bool {
        self.alive
    }

    /// log2 of the conditional normalizer `sum_x column(x) * coupling(x, prev)`
    /// (for the first step, of the partition function of the first strip).
    /// `NEG_INFINITY` when the step has no support.
    pub fn log2_resampling_weight(&self) -> f64 {
        if !self.alive {
            return f64::NEG_INFINITY;
        }
        // The stored leaf is uniform over the states; its mass is folded
        // back in here so the identity with the brute-force sum is exact.
        let leaf = num::log2(self.mu[0].len() as f64);
        leaf + self.log2_c.iter().sum::<f64>() + self.log2_terminal
    }

    pub fn step(&self) -> usize {
        self.step
    }
}

/// One exact draw from the optimal proposal, split back into original
/// columns (`width` of them for a strip step).
#[derive(Debug, Clone)]
pub struct ProposalDraw {
    /// The sampled original columns, left to right.
    pub columns: Vec<ColumnState>,
    /// log2 resampling weight of the conditioning particle, kept for audit;
    /// the draw itself carries no importance weight.
    pub log2_conditioning_weight: f64,
}

impl ProposalDraw {
    /// The rightmost sampled column: what the next step conditions on.
    pub fn last_column(&self) -> &ColumnState {
        self.columns.last().expect("draw covers at least one column")
    }
}

/// Runs the forward pass for step `step` of `view`, conditioned on the
/// previous step's last column (`None` exactly when `step == 0`).
///
/// Messages travel top to bottom; each is normalized to sum 1 and the
/// normalizer recorded in log2. A zero normalizer means the conditioning
/// column has no valid extension; the stack then reports no support. For
/// the RLL potentials this cannot happen (the all-zeros column extends
/// anything) and is debug-asserted.
pub fn forward_messages(
    view: &StripView<'_>,
    step: usize,
    prev: Option<&ColumnState>,
) -> Result<MessageStack> {
    let rows = view.rows();
    if step >= view.super_cols() {
        return Err(Error::InvalidParameter(alloc::format!(
            "step {step} out of range for {} super-columns",
            view.super_cols()
        )));
    }
    match prev {
        Some(_) if step == 0 => {
            return Err(Error::InvalidParameter(
                alloc::string::String::from("the first step takes no conditioning column"),
            ));
        }
        None if step > 0 => {
            return Err(Error::InvalidParameter(alloc::format!(
                "step {step} requires the previous step's last column"
            )));
        }
        Some(p) if p.len() != rows => {
            return Err(Error::DimensionMismatch {
                expected: rows,
                got: p.len(),
            });
        }
        _ => {}
    }

    let states = view.state_count(step);
    let inrow = view.inrow_weights(step);
    let unary = |row: usize, sigma: usize| -> f64 {
        match prev {
            Some(p) => inrow[sigma] * view.cross_weight(sigma, p.bit(row)),
            None => inrow[sigma],
        }
    };

    let mut mu: Vec<Vec<f64>> = Vec::with_capacity(rows);
    mu.push(vec![1.0 / states as f64; states]);
    let mut log2_c = Vec::with_capacity(rows.saturating_sub(1));
    let mut alive = true;

    for j in 0..rows - 1 {
        if !alive {
            mu.push(vec![1.0 / states as f64; states]);
            log2_c.push(0.0);
            continue;
        }
        let prev_mu = &mu[j];
        let mut next = vec![0.0; states];
        for sigma in 0..states {
            let w = unary(j, sigma) * prev_mu[sigma];
            if w == 0.0 {
                continue;
            }
            for tau in 0..states {
                next[tau] += view.pair_weight(step, tau, sigma) * w;
            }
        }
        let c: f64 = next.iter().sum();
        if c == 0.0 {
            alive = false;
            mu.push(vec![1.0 / states as f64; states]);
            log2_c.push(0.0);
            continue;
        }
        for x in &mut next {
            *x /= c;
        }
        mu.push(next);
        log2_c.push(num::log2(c));
    }

    let log2_terminal = if alive {
        let t: f64 = (0..states).map(|s| unary(rows - 1, s) * mu[rows - 1][s]).sum();
        if t == 0.0 {
            alive = false;
            0.0
        } else {
            num::log2(t)
        }
    } else {
        0.0
    };

    debug_assert!(
        alive || !view.model().is_rll(),
        "the RLL model always admits an extension"
    );

    Ok(MessageStack {
        mu,
        log2_c,
        log2_terminal,
        alive,
        step,
    })
}

/// Draws one exact sample from the optimal proposal for `(step, prev)`,
/// bottom row first, using the messages of a matching forward pass.
///
/// Normalized messages substitute for unnormalized ones without changing
/// any sampled conditional (the normalizers cancel row by row).
pub fn backward_sample<R: Rng>(
    view: &StripView<'_>,
    step: usize,
    prev: Option<&ColumnState>,
    stack: &MessageStack,
    rng: &mut R,
) -> ProposalDraw {
    let rows = view.rows();
    let states = view.state_count(step);
    debug_assert!(stack.has_support(), "cannot sample a zero-support step");
    debug_assert_eq!(stack.step(), step);
    debug_assert_eq!(stack.messages().len(), rows);
    debug_assert_eq!(stack.messages()[0].len(), states);

    let inrow = view.inrow_weights(step);
    let unary = |row: usize, sigma: usize| -> f64 {
        match prev {
            Some(p) => inrow[sigma] * view.cross_weight(sigma, p.bit(row)),
            None => inrow[sigma],
        }
    };

    let mut row_states = vec![0usize; rows];
    let mut weights = vec![0.0; states];

    // Bottom row: terminal factor times its message.
    for (sigma, w) in weights.iter_mut().enumerate() {
        *w = unary(rows - 1, sigma) * stack.messages()[rows - 1][sigma];
    }
    row_states[rows - 1] = sample_index(&weights, rng);

    // Remaining rows in reverse, each conditioned on the row below.
    for j in (0..rows - 1).rev() {
        let below = row_states[j + 1];
        for (sigma, w) in weights.iter_mut().enumerate() {
            *w = view.pair_weight(step, below, sigma)
                * unary(j, sigma)
                * stack.messages()[j][sigma];
        }
        row_states[j] = sample_index(&weights, rng);
    }

    ProposalDraw {
        columns: view.columns_of(step, &row_states),
        log2_conditioning_weight: stack.log2_resampling_weight(),
    }
}

/// Inverse-CDF draw from an unnormalized weight vector with one uniform.
fn sample_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0, "conditional with zero support");
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 && w > 0.0 {
            return i;
        }
    }
    // Rounding pushed u past the last bucket; take the last positive weight.
    weights
        .iter()
        .rposition(|&w| w > 0.0)
        .expect("at least one positive weight")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LatticeModel, PairwisePotential};
    use crate::oracle;
    use alloc::collections::BTreeMap;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn log2(x: f64) -> f64 {
        crate::num::log2(x)
    }

    #[test]
    fn single_row_weights() {
        let m = LatticeModel::rll(1, 3).unwrap();
        let view = m.column_view();
        let prev1 = ColumnState::new(vec![1]).unwrap();
        let prev0 = ColumnState::zeros(1);

        let s1 = forward_messages(&view, 1, Some(&prev1)).unwrap();
        assert!((s1.log2_resampling_weight() - 0.0).abs() < 1e-12);

        let s0 = forward_messages(&view, 1, Some(&prev0)).unwrap();
        assert!((s0.log2_resampling_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn first_step_normalizer_counts_valid_columns() {
        // Valid length-3 columns: F(5) = 5.
        let m = LatticeModel::rll(3, 3).unwrap();
        let stack = forward_messages(&m.column_view(), 0, None).unwrap();
        assert!((stack.log2_resampling_weight() - log2(5.0)).abs() < 1e-12);
    }

    #[test]
    fn conditional_normalizer_examples() {
        let m2 = LatticeModel::rll(2, 3).unwrap();
        let s = forward_messages(&m2.column_view(), 1, Some(&ColumnState::zeros(2))).unwrap();
        assert!((s.log2_resampling_weight() - log2(3.0)).abs() < 1e-12);

        let m3 = LatticeModel::rll(3, 3).unwrap();
        let s = forward_messages(&m3.column_view(), 1, Some(&ColumnState::zeros(3))).unwrap();
        assert!((s.log2_resampling_weight() - log2(5.0)).abs() < 1e-12);
    }

    #[test]
    fn messages_are_normalized() {
        let m = LatticeModel::rll(6, 4).unwrap();
        let prev = ColumnState::new(vec![1, 0, 0, 1, 0, 0]).unwrap();
        let stack = forward_messages(&m.column_view(), 2, Some(&prev)).unwrap();
        for mu in stack.messages() {
            let s: f64 = mu.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(mu.iter().all(|&x| x >= 0.0));
        }
        assert_eq!(stack.log2_normalizers().len(), 5);
    }

    #[test]
    fn weight_matches_brute_force_sum() {
        // All conditioning columns for M <= 8, RLL and a weighted model.
        let weighted = PairwisePotential::new([[1.0, 0.7], [1.3, 0.2]]).unwrap();
        for m_rows in 1..=8usize {
            let models = [
                LatticeModel::rll(m_rows, 2).unwrap(),
                LatticeModel::isotropic(m_rows, 2, weighted.clone()).unwrap(),
            ];
            for model in &models {
                let view = model.column_view();
                for mask in 0..(1u64 << m_rows) {
                    let prev = ColumnState::from_mask(mask, m_rows);
                    let exact = oracle::conditional_normalizer(model, &prev).unwrap();
                    let got = forward_messages(&view, 1, Some(&prev))
                        .unwrap()
                        .log2_resampling_weight();
                    if exact == 0.0 {
                        assert_eq!(got, f64::NEG_INFINITY);
                    } else {
                        assert!(
                            (crate::num::exp2(got) - exact).abs() <= 1e-10 * exact,
                            "rows={m_rows} prev={mask:b}: {got} vs {exact}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn weight_matches_brute_force_m12() {
        let model = LatticeModel::rll(12, 2).unwrap();
        let view = model.column_view();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            // Random conditioning column (need not be internally valid).
            let mask = rng.gen::<u64>() & ((1 << 12) - 1);
            let prev = ColumnState::from_mask(mask, 12);
            let exact = oracle::conditional_normalizer(&model, &prev).unwrap();
            let got = crate::num::exp2(
                forward_messages(&view, 1, Some(&prev))
                    .unwrap()
                    .log2_resampling_weight(),
            );
            assert!((got - exact).abs() <= 1e-10 * exact);
        }
    }

    #[test]
    fn zero_support_is_reported_not_sampled() {
        // Horizontal edge forbids everything next to a 1:
        // eval(a, 1) = 0 for both a.
        let h = PairwisePotential::new([[1.0, 0.0], [1.0, 0.0]]).unwrap();
        let m = LatticeModel::new(1, 2, h, PairwisePotential::rll()).unwrap();
        let prev = ColumnState::new(vec![1]).unwrap();
        let stack = forward_messages(&m.column_view(), 1, Some(&prev)).unwrap();
        assert!(!stack.has_support());
        assert_eq!(stack.log2_resampling_weight(), f64::NEG_INFINITY);
    }

    #[test]
    fn argument_validation() {
        let m = LatticeModel::rll(3, 3).unwrap();
        let view = m.column_view();
        let prev = ColumnState::zeros(3);
        assert!(forward_messages(&view, 0, Some(&prev)).is_err());
        assert!(forward_messages(&view, 1, None).is_err());
        assert!(forward_messages(&view, 3, Some(&prev)).is_err());
        let short = ColumnState::zeros(2);
        assert!(matches!(
            forward_messages(&view, 1, Some(&short)),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn forced_draw_is_deterministic() {
        // M=1, prev = 1: the constraint forces the new column to 0.
        let m = LatticeModel::rll(1, 2).unwrap();
        let view = m.column_view();
        let prev = ColumnState::new(vec![1]).unwrap();
        let stack = forward_messages(&view, 1, Some(&prev)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let draw = backward_sample(&view, 1, Some(&prev), &stack, &mut rng);
            assert_eq!(draw.columns[0].bits(), &[0]);
        }
    }

    #[test]
    fn free_draw_is_fair() {
        // M=1, prev = 0: both states valid, probability 1/2 each.
        let m = LatticeModel::rll(1, 2).unwrap();
        let view = m.column_view();
        let prev = ColumnState::zeros(1);
        let stack = forward_messages(&view, 1, Some(&prev)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let mut ones = 0usize;
        for _ in 0..n {
            let draw = backward_sample(&view, 1, Some(&prev), &stack, &mut rng);
            ones += draw.columns[0].bit(0) as usize;
        }
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.01, "freq = {freq}");
    }

    #[test]
    fn draws_never_hit_zero_weight() {
        let m = LatticeModel::rll(6, 3).unwrap();
        let view = m.column_view();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..200 {
            let mask = rng.gen::<u64>() & 0x3f;
            let prev = ColumnState::from_mask(mask, 6);
            let stack = forward_messages(&view, 1, Some(&prev)).unwrap();
            let draw = backward_sample(&view, 1, Some(&prev), &stack, &mut rng);
            let col = &draw.columns[0];
            let phi = m.column_weight(col).unwrap();
            let psi = m.between_weight(col, &prev).unwrap();
            assert!(phi * psi > 0.0, "trial {trial}: zero-weight draw");
        }
    }

    #[test]
    fn normalized_messages_leave_conditionals_unchanged() {
        // Enumerate every backward conditional from the normalized stack and
        // from an unnormalized message recursion; they must agree.
        let weighted = PairwisePotential::new([[1.0, 0.4], [1.7, 0.9]]).unwrap();
        for model in [
            LatticeModel::rll(8, 2).unwrap(),
            LatticeModel::isotropic(8, 2, weighted).unwrap(),
        ] {
            let rows = model.rows();
            let view = model.column_view();
            let prev = ColumnState::from_mask(0b01001010, rows);
            let stack = forward_messages(&view, 1, Some(&prev)).unwrap();

            // Unnormalized recursion, same factor conventions.
            let h = model.h_potential().clone();
            let v = model.v_potential().clone();
            let unary =
                |j: usize, s: usize| -> f64 { h.eval(s as u8, prev.bit(j)) };
            let mut m_msgs: Vec<[f64; 2]> = vec![[1.0, 1.0]];
            for j in 0..rows - 1 {
                let prev_m = m_msgs[j];
                let mut next = [0.0, 0.0];
                for (tau, slot) in next.iter_mut().enumerate() {
                    for s in 0..2usize {
                        *slot += v.eval(tau as u8, s as u8) * unary(j, s) * prev_m[s];
                    }
                }
                m_msgs.push(next);
            }

            let normalize = |w: [f64; 2]| {
                let t = w[0] + w[1];
                [w[0] / t, w[1] / t]
            };
            // Bottom row conditional.
            let via_mu = normalize([
                unary(rows - 1, 0) * stack.messages()[rows - 1][0],
                unary(rows - 1, 1) * stack.messages()[rows - 1][1],
            ]);
            let via_m = normalize([
                unary(rows - 1, 0) * m_msgs[rows - 1][0],
                unary(rows - 1, 1) * m_msgs[rows - 1][1],
            ]);
            for s in 0..2 {
                assert!((via_mu[s] - via_m[s]).abs() < 1e-12);
            }
            // Interior rows, both choices of the row below.
            for j in (0..rows - 1).rev() {
                for below in 0..2usize {
                    let cond = |msg: [f64; 2]| {
                        normalize([
                            v.eval(below as u8, 0) * unary(j, 0) * msg[0],
                            v.eval(below as u8, 1) * unary(j, 1) * msg[1],
                        ])
                    };
                    let a = cond([stack.messages()[j][0], stack.messages()[j][1]]);
                    let b = cond(m_msgs[j]);
                    for s in 0..2 {
                        assert!((a[s] - b[s]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn first_column_draws_are_uniform_over_valid_states() {
        // M=5: 13 valid columns, all weight 1 under the first-step target.
        let m = LatticeModel::rll(5, 5).unwrap();
        let view = m.column_view();
        let stack = forward_messages(&view, 0, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 100_000usize;
        let mut counts: BTreeMap<Vec<u8>, usize> = BTreeMap::new();
        for _ in 0..n {
            let draw = backward_sample(&view, 0, None, &stack, &mut rng);
            *counts.entry(draw.columns[0].bits().to_vec()).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 13);
        let tv: f64 = 0.5
            * counts
                .values()
                .map(|&c| (c as f64 / n as f64 - 1.0 / 13.0).abs())
                .sum::<f64>();
        assert!(tv < 0.01, "tv = {tv}");
    }

    #[test]
    fn width_one_strip_is_bit_identical_to_column_view() {
        let m = LatticeModel::rll(7, 5).unwrap();
        let via_strip = m.strip_view(1).unwrap();
        let via_columns = m.column_view();
        let prev = ColumnState::from_mask(0b0100101, 7);
        let a = forward_messages(&via_strip, 2, Some(&prev)).unwrap();
        let b = forward_messages(&via_columns, 2, Some(&prev)).unwrap();
        assert_eq!(
            a.log2_resampling_weight().to_bits(),
            b.log2_resampling_weight().to_bits()
        );
        for (ma, mb) in a.messages().iter().zip(b.messages()) {
            for (xa, xb) in ma.iter().zip(mb) {
                assert_eq!(xa.to_bits(), xb.to_bits());
            }
        }
    }

    #[test]
    fn strip_step_covers_whole_small_lattice() {
        // 2x2 lattice as one width-2 step: the first-step normalizer is the
        // full partition function, 7.
        let m = LatticeModel::rll(2, 2).unwrap();
        let view = m.strip_view(2).unwrap();
        assert_eq!(view.super_cols(), 1);
        let stack = forward_messages(&view, 0, None).unwrap();
        assert!((crate::num::exp2(stack.log2_resampling_weight()) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn strip_weights_match_enumeration() {
        // Strip conditional normalizers vs direct enumeration over all strip
        // configurations, M=3, W=2, several conditioning columns.
        let m = LatticeModel::rll(3, 4).unwrap();
        let view = m.strip_view(2).unwrap();
        for mask in [0u64, 0b010, 0b101, 0b100] {
            let prev = ColumnState::from_mask(mask, 3);
            let stack = forward_messages(&view, 1, Some(&prev)).unwrap();
            let got = crate::num::exp2(stack.log2_resampling_weight());

            let mut exact = 0.0;
            for s0 in 0..4usize {
                for s1 in 0..4usize {
                    for s2 in 0..4usize {
                        let cols = view.columns_of(1, &[s0, s1, s2]);
                        let mut w = m.column_weight(&cols[0]).unwrap()
                            * m.column_weight(&cols[1]).unwrap()
                            * m.between_weight(&cols[1], &cols[0]).unwrap();
                        w *= m.between_weight(&cols[0], &prev).unwrap();
                        exact += w;
                    }
                }
            }
            assert!((got - exact).abs() < 1e-10 * exact.max(1.0));
        }
    }

    #[test]
    fn column_pass_scales_linearly_in_rows() {
        // One forward pass is O(rows); doubling the rows should roughly
        // double the time, well under the quadratic ratio of 4.
        use std::time::Instant;
        let time_pass = |rows: usize| -> f64 {
            let m = LatticeModel::rll(rows, 2).unwrap();
            let view = m.column_view();
            let prev = ColumnState::zeros(rows);
            // warm up
            let _ = forward_messages(&view, 1, Some(&prev)).unwrap();
            let mut best = f64::INFINITY;
            for _ in 0..10 {
                let t0 = Instant::now();
                for _ in 0..40 {
                    let s = forward_messages(&view, 1, Some(&prev)).unwrap();
                    std::hint::black_box(s.log2_resampling_weight());
                }
                best = best.min(t0.elapsed().as_secs_f64());
            }
            best
        };
        let t1000 = time_pass(1000);
        let t2000 = time_pass(2000);
        let ratio = t2000 / t1000;
        assert!(ratio < 2.5, "ratio = {ratio} (t1000={t1000}, t2000={t2000})");
    }
}
