//! Generic inclusive scan over an associative operator, in two modes:
//!
//! * `Sequential` — a left-to-right (or right-to-left) fold, L-1 combine
//!   stages;
//! * `Tree` — a work-efficient up-sweep/down-sweep tree with exactly
//!   ceil(log2 L) stages per sweep. Combinations inside one stage are
//!   mutually independent and dispatched over the configured workers.
//!
//! Non-power-of-two lengths are padded with a caller-supplied identity.
//! Against real values the identity only ever appears as the right-hand
//! operand (padding is a block-aligned suffix, and the leftmost tree path is
//! special-cased positionally); identity-with-identity combinations occur in
//! fully padded blocks and are discarded. `depth_counter` records the number
//! of sequential stages of the last run, the quantity a depth-limited device
//! would be bound by.

use crate::exec::Parallelism;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanDirection {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanMode {
    Sequential,
    Tree,
}

#[derive(Debug, Clone)]
pub struct ScanPlan {
    pub length: usize,
    pub direction: ScanDirection,
    pub mode: ScanMode,
    pub depth_counter: usize,
}

impl ScanPlan {
    pub fn new(direction: ScanDirection, mode: ScanMode) -> Self {
        ScanPlan { length: 0, direction, mode, depth_counter: 0 }
    }

    /// Inclusive scan of `items`. Forward output j is items[0] x .. x items[j];
    /// reverse output j is items[j] x .. x items[L-1], with `combine(a, b)`
    /// always receiving `a` from the lower-index side.
    pub fn inclusive_scan<T, C>(
        &mut self,
        items: &[T],
        identity: &T,
        combine: C,
        par: &Parallelism,
    ) -> Vec<T>
    where
        T: Clone + Send + Sync,
        C: Fn(&T, &T) -> T + Sync,
    {
        self.length = items.len();
        self.depth_counter = 0;
        match self.direction {
            ScanDirection::Forward => self.run_forward(items, identity, &combine, par),
            ScanDirection::Reverse => {
                // Reverse scan == forward scan of the reversed sequence with
                // swapped operands, reversed back.
                let rev: Vec<T> = items.iter().rev().cloned().collect();
                let swapped = |a: &T, b: &T| combine(b, a);
                let mut out = self.run_forward(&rev, identity, &swapped, par);
                out.reverse();
                out
            }
        }
    }

    fn run_forward<T, C>(
        &mut self,
        items: &[T],
        identity: &T,
        combine: &C,
        par: &Parallelism,
    ) -> Vec<T>
    where
        T: Clone + Send + Sync,
        C: Fn(&T, &T) -> T + Sync,
    {
        match self.mode {
            ScanMode::Sequential => {
                self.depth_counter = items.len().saturating_sub(1);
                let mut out: Vec<T> = Vec::with_capacity(items.len());
                for item in items {
                    match out.last() {
                        None => out.push(item.clone()),
                        Some(acc) => out.push(combine(acc, item)),
                    }
                }
                out
            }
            ScanMode::Tree => self.tree_forward(items, identity, combine, par),
        }
    }

    fn tree_forward<T, C>(
        &mut self,
        items: &[T],
        identity: &T,
        combine: &C,
        par: &Parallelism,
    ) -> Vec<T>
    where
        T: Clone + Send + Sync,
        C: Fn(&T, &T) -> T + Sync,
    {
        let len = items.len();
        if len <= 1 {
            return items.to_vec();
        }
        let padded = len.next_power_of_two();
        let levels = padded.trailing_zeros() as usize;
        let mut work: Vec<T> = items.to_vec();
        work.resize(padded, identity.clone());

        // Up-sweep stage 0 pairs adjacent items. Its reductions are kept
        // aside for the fused final stage: deeper up-sweep levels overwrite
        // every other pair slot, so they cannot be recovered from `work`
        // afterwards.
        let pair_sums: Vec<T> =
            par.map_indexed(padded / 2, |t| combine(&work[2 * t], &work[2 * t + 1]));
        for (t, v) in pair_sums.iter().enumerate() {
            work[2 * t + 1] = v.clone();
        }
        self.depth_counter += 1;

        // Remaining up-sweep: work[k + w - 1] accumulates the reduction of
        // its block.
        for d in 1..levels {
            let w = 1usize << (d + 1);
            let stage = par.map_indexed(padded / w, |j| {
                let k = j * w;
                combine(&work[k + w / 2 - 1], &work[k + w - 1])
            });
            for (j, v) in stage.into_iter().enumerate() {
                work[j * w + w - 1] = v;
            }
            self.depth_counter += 1;
        }

        // Down-sweep: work[k + w - 1] now carries the exclusive prefix of its
        // block. Block 0's prefix is empty, kept as an untouched placeholder
        // so the identity is never combined from the left.
        work[padded - 1] = identity.clone();
        for d in (1..levels).rev() {
            let w = 1usize << (d + 1);
            let stage = par.map_indexed(padded / w, |j| {
                let k = j * w;
                let prefix = &work[k + w - 1];
                let left_sum = &work[k + w / 2 - 1];
                let right_prefix =
                    if j == 0 { left_sum.clone() } else { combine(prefix, left_sum) };
                (prefix.clone(), right_prefix)
            });
            for (j, (left, right)) in stage.into_iter().enumerate() {
                let k = j * w;
                work[k + w / 2 - 1] = left;
                work[k + w - 1] = right;
            }
            self.depth_counter += 1;
        }

        // Final stage, fused with the exclusive->inclusive conversion: each
        // pair block emits prefix x item and prefix x pair-reduction.
        let out = par.map_indexed(len, |i| {
            let t = i / 2;
            if t == 0 {
                if i == 0 {
                    items[0].clone()
                } else {
                    pair_sums[0].clone()
                }
            } else {
                let prefix = &work[2 * t + 1];
                if i % 2 == 0 {
                    combine(prefix, &items[i])
                } else {
                    combine(prefix, &pair_sums[t])
                }
            }
        });
        self.depth_counter += 1;
        out
    }
}

/// Stage count the tree mode is expected to hit: one per up-sweep level and
/// one per down-sweep level, zero for degenerate lengths.
pub fn expected_tree_depth(len: usize) -> usize {
    if len <= 1 {
        0
    } else {
        2 * (usize::BITS - (len - 1).leading_zeros()) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scan_i64(items: &[i64], dir: ScanDirection, mode: ScanMode) -> (Vec<i64>, usize) {
        let mut plan = ScanPlan::new(dir, mode);
        let out = plan.inclusive_scan(items, &0, |a, b| a + b, &Parallelism::serial());
        (out, plan.depth_counter)
    }

    #[test]
    fn forward_prefix_sums() {
        let items = [1i64, 2, 3, 4];
        let (seq, d_seq) = scan_i64(&items, ScanDirection::Forward, ScanMode::Sequential);
        let (tree, d_tree) = scan_i64(&items, ScanDirection::Forward, ScanMode::Tree);
        assert_eq!(seq, vec![1, 3, 6, 10]);
        assert_eq!(tree, vec![1, 3, 6, 10]);
        assert_eq!(d_seq, 3);
        assert_eq!(d_tree, 4);
    }

    #[test]
    fn reverse_suffix_sums() {
        let items = [1i64, 2, 3, 4, 5];
        let (seq, _) = scan_i64(&items, ScanDirection::Reverse, ScanMode::Sequential);
        let (tree, _) = scan_i64(&items, ScanDirection::Reverse, ScanMode::Tree);
        assert_eq!(seq, vec![15, 14, 12, 9, 5]);
        assert_eq!(tree, seq);
    }

    #[test]
    fn non_commutative_order_respected() {
        // String concatenation exposes any operand-order slip.
        let items: Vec<String> = ["a", "b", "c", "d", "e", "f", "g"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let combine = |a: &String, b: &String| format!("{a}{b}");
        let par = Parallelism::new(3);
        for dir in [ScanDirection::Forward, ScanDirection::Reverse] {
            let mut seq_plan = ScanPlan::new(dir, ScanMode::Sequential);
            let mut tree_plan = ScanPlan::new(dir, ScanMode::Tree);
            let seq = seq_plan.inclusive_scan(&items, &String::new(), combine, &par);
            let tree = tree_plan.inclusive_scan(&items, &String::new(), combine, &par);
            assert_eq!(seq, tree);
        }
    }

    #[test]
    fn tree_depth_is_two_log() {
        for len in 1..=300usize {
            let items: Vec<i64> = (0..len as i64).collect();
            let (tree, depth) = scan_i64(&items, ScanDirection::Forward, ScanMode::Tree);
            let (seq, _) = scan_i64(&items, ScanDirection::Forward, ScanMode::Sequential);
            assert_eq!(tree, seq, "len {len}");
            assert_eq!(depth, expected_tree_depth(len), "len {len}");
        }
        assert_eq!(expected_tree_depth(1000), 20);
        assert_eq!(expected_tree_depth(1024), 20);
        assert_eq!(expected_tree_depth(1025), 22);
    }

    #[test]
    fn degenerate_lengths() {
        let (out, depth) = scan_i64(&[], ScanDirection::Forward, ScanMode::Tree);
        assert!(out.is_empty());
        assert_eq!(depth, 0);
        let (out, depth) = scan_i64(&[7], ScanDirection::Reverse, ScanMode::Tree);
        assert_eq!(out, vec![7]);
        assert_eq!(depth, 0);
    }

    #[test]
    fn workers_do_not_change_results() {
        let items: Vec<i64> = (1..=97).collect();
        let baseline = scan_i64(&items, ScanDirection::Forward, ScanMode::Tree).0;
        for workers in [2, 4, 8] {
            let par = Parallelism::new(workers);
            let mut plan = ScanPlan::new(ScanDirection::Forward, ScanMode::Tree);
            let out = plan.inclusive_scan(&items, &0, |a, b| a + b, &par);
            assert_eq!(out, baseline);
        }
    }
}
