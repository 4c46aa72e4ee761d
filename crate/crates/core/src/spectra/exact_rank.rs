//! Exact rank of small integer matrices.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

const PRIME: u64 = 2_147_483_647;

fn pow_mod(mut b: u64, mut e: u64) -> u64 {
    let mut r = 1u64;
    b %= PRIME;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % PRIME;
        }
        b = b * b % PRIME;
        e >>= 1;
    }
    r
}

/// Rank over Z/pZ of a dense row-major integer matrix.
pub fn rank_mod_p(rows: usize, cols: usize, a: &[i64]) -> usize {
    let mut m: Vec<u64> = a.iter().map(|&v| v.rem_euclid(PRIME as i64) as u64).collect();
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..rows).find(|&r| m[r * cols + c] != 0) else {
            continue;
        };
        if piv != rank {
            for j in 0..cols {
                m.swap(piv * cols + j, rank * cols + j);
            }
        }
        let inv = pow_mod(m[rank * cols + c], PRIME - 2);
        for r in rank + 1..rows {
            let f = m[r * cols + c] * inv % PRIME;
            if f == 0 {
                continue;
            }
            for j in c..cols {
                let sub = f * m[rank * cols + j] % PRIME;
                m[r * cols + j] = (m[r * cols + j] + PRIME - sub) % PRIME;
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

/// Rank over Q by rational Gaussian elimination.
pub fn rank_rational(rows: usize, cols: usize, a: &[i64]) -> usize {
    let mut m: Vec<BigRational> = a
        .iter()
        .map(|&v| BigRational::from_integer(BigInt::from(v)))
        .collect();
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..rows).find(|&r| !m[r * cols + c].is_zero()) else {
            continue;
        };
        if piv != rank {
            for j in 0..cols {
                m.swap(piv * cols + j, rank * cols + j);
            }
        }
        let inv = BigRational::one() / m[rank * cols + c].clone();
        for r in rank + 1..rows {
            if m[r * cols + c].is_zero() {
                continue;
            }
            let f = m[r * cols + c].clone() * inv.clone();
            for j in c..cols {
                if m[rank * cols + j].is_zero() {
                    continue;
                }
                let sub = f.clone() * m[rank * cols + j].clone();
                m[r * cols + j] -= sub;
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

/// Exact rank over Q. A full-rank reduction modulo a prime already proves full
/// rank over Q; otherwise the rational elimination decides.
pub fn rank_exact(rows: usize, cols: usize, a: &[i64]) -> usize {
    let full = rows.min(cols);
    if full == 0 {
        return 0;
    }
    if rank_mod_p(rows, cols, a) == full {
        return full;
    }
    rank_rational(rows, cols, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deficient_matrix() {
        let a = [1, 2, 3, 2, 4, 6, 1, 0, 1];
        assert_eq!(rank_rational(3, 3, &a), 2);
        assert_eq!(rank_exact(3, 3, &a), 2);
        assert_eq!(rank_mod_p(3, 3, &a), 2);
    }

    #[test]
    fn prime_multiple_fools_mod_p_only() {
        let p = PRIME as i64;
        let a = [p, 0, 0, 1];
        assert_eq!(rank_mod_p(2, 2, &a), 1);
        assert_eq!(rank_exact(2, 2, &a), 2);
    }
}
