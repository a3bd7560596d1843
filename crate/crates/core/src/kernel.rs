//! Packed weighted-popcount routines behind the all-pairs sweep.
//!
//! A window's samples are held as `u64` words, bit `k` of word `j` being
//! window offset `64·j + k`. Weighted sums add terms in a fixed order so
//! results do not depend on how work is split across threads.

use crate::trace_model::{words_for, BinTrace, WindowSpec};

/// Extracts `len` cycles starting at `start` (may be negative), zero-padded.
pub(crate) fn window_bits(trace: &BinTrace, start: i64, len: usize) -> Vec<u64> {
    let mut out = vec![0u64; words_for(len)];
    trace.extract_into(start, &mut out);
    mask_tail(&mut out, len);
    out
}

#[inline]
pub(crate) fn mask_tail(words: &mut [u64], len: usize) {
    let rem = len % 64;
    if rem != 0 {
        if let Some(last) = words.last_mut() {
            *last &= (1u64 << rem) - 1;
        }
    }
}

/// `Σ weights[k]` over set bits `k`, iterating set bits only.
pub(crate) fn weighted_sum_sparse(words: &[u64], weights: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (j, &word) in words.iter().enumerate() {
        let mut bits = word;
        while bits != 0 {
            let k = bits.trailing_zeros() as usize;
            acc += weights[j * 64 + k];
            bits &= bits - 1;
        }
    }
    acc
}

/// Per-byte lookup of partial weight sums for one window length.
///
/// Entry `(p, b)` holds the sum of the weights at byte position `p` selected
/// by the bits of `b`. A weighted popcount of a window is then one table
/// lookup per byte.
#[derive(Debug, Clone)]
pub struct WeightTable {
    len: usize,
    table: Vec<f64>,
    weight_sum: f64,
}

impl WeightTable {
    pub fn new(window: &WindowSpec) -> Self {
        let weights = window.weights();
        let bytes = words_for(weights.len()) * 8;
        let mut table = vec![0.0; bytes * 256];
        for p in 0..bytes {
            let base = p * 8;
            let row = &mut table[p * 256..(p + 1) * 256];
            for (b, slot) in row.iter_mut().enumerate().skip(1) {
                let mut acc = 0.0;
                for bit in 0..8 {
                    if b >> bit & 1 == 1 {
                        acc += weights.get(base + bit).copied().unwrap_or(0.0);
                    }
                }
                *slot = acc;
            }
        }
        WeightTable {
            len: weights.len(),
            table,
            weight_sum: window.weight_sum(),
        }
    }

    /// Window length in cycles.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> usize {
        words_for(self.len)
    }

    /// Adds word `j`'s contribution into one accumulator per byte lane. The
    /// lanes break the dependency chain between additions; their order is
    /// fixed, so sums stay reproducible.
    #[inline(always)]
    fn accumulate(row: &[f64], word: u64, lanes: &mut [f64; 8]) {
        for (byte, lane) in lanes.iter_mut().enumerate() {
            let b = (word >> (8 * byte)) as u8 as usize;
            *lane += row[byte * 256 + b];
        }
    }

    #[inline(always)]
    fn finish(&self, lanes: [f64; 8]) -> f64 {
        let acc = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
        crate::measures::normalize(acc, self.weight_sum)
    }

    /// Weighted expectation of packed window samples.
    pub fn expectation(&self, words: &[u64]) -> f64 {
        debug_assert_eq!(words.len(), self.words());
        let mut lanes = [0.0; 8];
        for (row, &w) in self.table.chunks_exact(8 * 256).zip(words) {
            if w != 0 {
                Self::accumulate(row, w, &mut lanes);
            }
        }
        self.finish(lanes)
    }

    /// Weighted expectation of the pointwise product of two packed windows.
    pub fn expectation_and(&self, a: &[u64], b: &[u64]) -> f64 {
        debug_assert_eq!(a.len(), self.words());
        debug_assert_eq!(b.len(), self.words());
        let mut lanes = [0.0; 8];
        for ((row, &x), &y) in self.table.chunks_exact(8 * 256).zip(a).zip(b) {
            let w = x & y;
            if w != 0 {
                Self::accumulate(row, w, &mut lanes);
            }
        }
        self.finish(lanes)
    }
}
