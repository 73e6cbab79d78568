//! Length-limited canonical Huffman codes.
//!
//! Tables are fully described by one code length per symbol; codes are
//! assigned canonically (shorter codes first, ties by ascending symbol), so
//! only the lengths need to be transmitted.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::bitio::{BitReader, BitWriter};
use crate::error::{Error, Result};

pub const MAX_CODE_LEN: u8 = 15;

/// Canonical prefix code over a declared alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanTable {
    lengths: Vec<u8>,
    codes: Vec<u16>,
}

impl HuffmanTable {
    /// Builds the canonical code for the given lengths (0 = absent symbol).
    pub fn from_lengths(lengths: Vec<u8>) -> Result<Self> {
        if let Some(&l) = lengths.iter().find(|&&l| l > MAX_CODE_LEN) {
            return Err(Error::corrupt(
                "code length",
                format!("length {l} exceeds {MAX_CODE_LEN}"),
            ));
        }
        if lengths.iter().all(|&l| l == 0) {
            return Err(Error::corrupt("code length", "table has no symbols"));
        }
        if kraft_sum(&lengths) > 1 << MAX_CODE_LEN {
            return Err(Error::corrupt(
                "kraft",
                "code lengths oversubscribe the code space",
            ));
        }
        let codes = canonical_codes(&lengths);
        Ok(HuffmanTable { lengths, codes })
    }

    pub fn lengths(&self) -> &[u8] {
        &self.lengths
    }

    /// `(code, length)` for a symbol, or `None` if it is absent.
    #[inline]
    pub fn code(&self, symbol: usize) -> Option<(u16, u8)> {
        match self.lengths.get(symbol) {
            Some(&l) if l > 0 => Some((self.codes[symbol], l)),
            _ => None,
        }
    }

    /// Total encoded bits for the given symbol frequencies.
    pub fn cost(&self, freqs: &[u64]) -> u64 {
        freqs
            .iter()
            .zip(&self.lengths)
            .map(|(&f, &l)| f * l as u64)
            .sum()
    }

    /// `sum(2^(15 - len))`; at most `2^15` for a valid prefix code.
    pub fn kraft_sum(&self) -> u64 {
        kraft_sum(&self.lengths)
    }

    pub fn encode(&self, symbol: usize, out: &mut BitWriter) -> Result<()> {
        let (code, len) = self.code(symbol).ok_or_else(|| {
            Error::InvalidArgument(format!("symbol {symbol} is not in the code table"))
        })?;
        out.write(code as u32, len);
        Ok(())
    }

    pub fn decoder(&self) -> HuffmanDecoder {
        HuffmanDecoder::new(&self.lengths)
    }
}

fn kraft_sum(lengths: &[u8]) -> u64 {
    lengths
        .iter()
        .filter(|&&l| l > 0)
        .map(|&l| 1u64 << (MAX_CODE_LEN - l))
        .sum()
}

fn canonical_codes(lengths: &[u8]) -> Vec<u16> {
    let mut bl_count = [0u16; MAX_CODE_LEN as usize + 1];
    for &l in lengths {
        if l > 0 {
            bl_count[l as usize] += 1;
        }
    }
    let mut next = [0u16; MAX_CODE_LEN as usize + 1];
    let mut code = 0u32;
    for len in 1..=MAX_CODE_LEN as usize {
        next[len] = code as u16;
        code = (code + bl_count[len] as u32) << 1;
    }
    lengths
        .iter()
        .map(|&l| {
            if l == 0 {
                0
            } else {
                let c = next[l as usize];
                next[l as usize] += 1;
                c
            }
        })
        .collect()
}

/// Canonical decoder: per-length counts plus symbols in code order.
#[derive(Debug, Clone)]
pub struct HuffmanDecoder {
    counts: [u16; MAX_CODE_LEN as usize + 1],
    symbols: Vec<u16>,
}

impl HuffmanDecoder {
    fn new(lengths: &[u8]) -> Self {
        let mut counts = [0u16; MAX_CODE_LEN as usize + 1];
        for &l in lengths {
            if l > 0 {
                counts[l as usize] += 1;
            }
        }
        let mut symbols: Vec<(u8, u16)> = lengths
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > 0)
            .map(|(s, &l)| (l, s as u16))
            .collect();
        symbols.sort_unstable();
        HuffmanDecoder {
            counts,
            symbols: symbols.into_iter().map(|(_, s)| s).collect(),
        }
    }

    /// Reads one symbol.
    pub fn decode(&self, bits: &mut BitReader<'_>) -> Result<u16> {
        let mut code = 0u32;
        let mut first = 0u32;
        let mut index = 0u32;
        for len in 1..=MAX_CODE_LEN as usize {
            let bit = bits
                .read_bit()
                .ok_or_else(|| Error::corrupt("truncated", "payload ends inside a code word"))?;
            code |= bit as u32;
            let count = self.counts[len] as u32;
            if code < first + count {
                return Ok(self.symbols[(index + code - first) as usize]);
            }
            index += count;
            first = (first + count) << 1;
            code <<= 1;
        }
        Err(Error::corrupt(
            "code word",
            "bit pattern is not in the table",
        ))
    }
}

/// Builds an optimal length-limited prefix code for `freqs`.
///
/// Tree construction repeatedly merges the two lowest-weight nodes; ties go
/// to the lower symbol, and leaves sort before internal nodes, which sort by
/// creation order. A lone symbol gets length 1. Trees deeper than 15 levels
/// are flattened with the usual shorten-the-longest adjustment.
pub fn huffman_build(freqs: &[u64]) -> Result<HuffmanTable> {
    let present: Vec<usize> = (0..freqs.len()).filter(|&s| freqs[s] > 0).collect();
    if present.is_empty() {
        return Err(Error::InvalidArgument(
            "huffman_build needs at least one non-zero frequency".into(),
        ));
    }
    let mut lengths = vec![0u8; freqs.len()];
    if present.len() == 1 {
        lengths[present[0]] = 1;
        return HuffmanTable::from_lengths(lengths);
    }

    let n = freqs.len();
    // Node ids: leaves are their symbol; internal nodes count up from n.
    let mut parent: Vec<usize> = vec![usize::MAX; n + present.len()];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
        present.iter().map(|&s| Reverse((freqs[s], s))).collect();
    let mut next_id = n;
    while heap.len() > 1 {
        let Reverse((fa, a)) = heap.pop().expect("heap has two nodes");
        let Reverse((fb, b)) = heap.pop().expect("heap has two nodes");
        parent[a] = next_id;
        parent[b] = next_id;
        heap.push(Reverse((fa + fb, next_id)));
        next_id += 1;
    }
    let mut depth = vec![0u32; next_id];
    for id in (0..next_id).rev() {
        if parent[id] != usize::MAX {
            depth[id] = depth[parent[id]] + 1;
        }
    }
    let max_depth = present.iter().map(|&s| depth[s]).max().unwrap_or(0);
    if max_depth <= MAX_CODE_LEN as u32 {
        for &s in &present {
            lengths[s] = depth[s] as u8;
        }
    } else {
        let mut bl_count = vec![0u64; max_depth as usize + 1];
        for &s in &present {
            bl_count[depth[s] as usize] += 1;
        }
        limit_lengths(&mut bl_count, MAX_CODE_LEN as usize);
        // Hand the shortest lengths to the most frequent symbols.
        let mut order = present.clone();
        order.sort_by_key(|&s| (Reverse(freqs[s]), s));
        let mut it = order.into_iter();
        for (len, &count) in bl_count.iter().enumerate().skip(1) {
            for _ in 0..count {
                lengths[it.next().expect("length counts match symbol count")] = len as u8;
            }
        }
    }
    let table = HuffmanTable::from_lengths(lengths)?;
    assert!(
        table.kraft_sum() <= 1 << MAX_CODE_LEN,
        "kraft inequality violated"
    );
    Ok(table)
}

/// Moves leaves deeper than `limit` up the tree while keeping the Kraft
/// sum at exactly one.
fn limit_lengths(bl_count: &mut Vec<u64>, limit: usize) {
    let mut i = bl_count.len() - 1;
    while i > limit {
        while bl_count[i] > 0 {
            let mut j = i - 2;
            while bl_count[j] == 0 {
                j -= 1;
            }
            bl_count[i] -= 2;
            bl_count[i - 1] += 1;
            bl_count[j + 1] += 2;
            bl_count[j] -= 1;
        }
        i -= 1;
    }
    bl_count.truncate(limit + 1);
}
