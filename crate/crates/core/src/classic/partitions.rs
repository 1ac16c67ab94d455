use crate::error::{invalid, Result};

/// Largest `n` accepted by [`enumerate_partitions`].
pub const MAX_ENUMERATION: usize = 12;

/// Set partitions of `n` items into at most `m` blocks as restricted growth
/// strings (block ids in first-use order), in lexicographic order.
#[derive(Debug, Clone)]
pub struct Partitions {
    current: Option<Vec<usize>>,
    m: usize,
}

impl Iterator for Partitions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        self.current = successor(&out, self.m);
        Some(out)
    }
}

fn successor(a: &[usize], m: usize) -> Option<Vec<usize>> {
    let n = a.len();
    // prefix maxima: a[i] may be at most 1 + max(a[..i]) and below m
    let mut prefix_max = vec![0usize; n];
    for i in 1..n {
        prefix_max[i] = prefix_max[i - 1].max(a[i - 1]);
    }
    for i in (1..n).rev() {
        let cap = (prefix_max[i] + 1).min(m - 1);
        if a[i] < cap {
            let mut b = a.to_vec();
            b[i] += 1;
            for v in b.iter_mut().skip(i + 1) {
                *v = 0;
            }
            return Some(b);
        }
    }
    None
}

pub fn enumerate_partitions(n: usize, m: usize) -> Result<Partitions> {
    if n > MAX_ENUMERATION {
        return Err(invalid("n", format!("{n} exceeds the enumeration limit {MAX_ENUMERATION}")));
    }
    if m == 0 {
        return Err(invalid("m", "must be at least 1"));
    }
    Ok(Partitions {
        current: Some(vec![0; n]),
        m,
    })
}

/// Stirling number of the second kind `S(n, k)`.
pub fn stirling2(n: usize, k: usize) -> u64 {
    let mut row = vec![0u64; k + 1];
    row[0] = 1;
    for _ in 0..n {
        for j in (1..=k).rev() {
            row[j] = j as u64 * row[j] + row[j - 1];
        }
        row[0] = 0;
    }
    row[k]
}
