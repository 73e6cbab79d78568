//! Run-length tokenization of label sequences.

/// Longest run a single token can carry.
pub const MAX_RUN: u8 = 255;

/// A run of `run` copies of `label`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RunToken {
    pub label: u8,
    pub run: u8,
}

/// Splits `labels` into maximal runs, capping each token at [`MAX_RUN`].
pub fn rle_tokenize(labels: &[u8]) -> Vec<RunToken> {
    let mut tokens = Vec::new();
    let mut iter = labels.iter().copied();
    let Some(mut current) = iter.next() else {
        return tokens;
    };
    let mut run = 1u8;
    for l in iter {
        if l == current && run < MAX_RUN {
            run += 1;
        } else {
            tokens.push(RunToken {
                label: current,
                run,
            });
            current = l;
            run = 1;
        }
    }
    tokens.push(RunToken {
        label: current,
        run,
    });
    tokens
}

/// Inverse of [`rle_tokenize`].
pub fn rle_expand(tokens: &[RunToken]) -> Vec<u8> {
    let mut out = Vec::with_capacity(tokens.iter().map(|t| t.run as usize).sum());
    for t in tokens {
        out.extend(std::iter::repeat_n(t.label, t.run as usize));
    }
    out
}

/// Token count without materializing the tokens.
pub(crate) fn count_tokens(labels: impl IntoIterator<Item = u8>) -> usize {
    let mut count = 0;
    let mut prev: Option<u8> = None;
    let mut run = 0u8;
    for l in labels {
        if prev == Some(l) && run < MAX_RUN {
            run += 1;
        } else {
            count += 1;
            prev = Some(l);
            run = 1;
        }
    }
    count
}
