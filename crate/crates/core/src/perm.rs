//! Permutations of `{1..n}` stored 1-based.

use crate::error::{Error, Result};

/// Checks that `sigma` is a bijection of `{1..n}`.
pub fn validate(sigma: &[usize]) -> Result<()> {
    let n = sigma.len();
    let mut seen = vec![false; n + 1];
    for &v in sigma {
        if v == 0 || v > n || seen[v] {
            return Err(Error::InvalidPermutation(format!("{sigma:?} is not a permutation of 1..={n}")));
        }
        seen[v] = true;
    }
    Ok(())
}

pub fn inverse(sigma: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; sigma.len()];
    for (i, &v) in sigma.iter().enumerate() {
        inv[v - 1] = i + 1;
    }
    inv
}

/// Advances to the next permutation in lexicographic order; false after the last.
pub fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// All permutations of `{1..n}` in lexicographic order.
pub fn all(n: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (1..=n).collect();
    let mut out = vec![p.clone()];
    while next_permutation(&mut p) {
        out.push(p.clone());
    }
    out
}

/// Parses `"2,1,3"`.
pub fn parse(text: &str) -> Result<Vec<usize>> {
    let sigma = text
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidPermutation(format!("{text:?}: {e}")))?;
    validate(&sigma)?;
    Ok(sigma)
}
