//! Reference counts used by the acceptance run.

/// Number of cyclically reduced words of length `n` in the free group on `k` generators.
pub fn cyclically_reduced_count(k: u64, n: u32) -> u64 {
    let even = if n % 2 == 0 { 1 } else { 0 };
    (2 * k - 1).pow(n) + 1 + (k - 1) * 2 * even
}

fn divisors(n: u32) -> impl Iterator<Item = u32> {
    (1..=n).filter(move |d| n % d == 0)
}

fn totient(n: u32) -> u64 {
    (1..=n).filter(|&i| gcd(i, n) == 1).count() as u64
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn mobius(n: u32) -> i64 {
    let mut m = n;
    let mut out = 1;
    let mut p = 2;
    while p * p <= m {
        if m % p == 0 {
            m /= p;
            if m % p == 0 {
                return 0;
            }
            out = -out;
        }
        p += 1;
    }
    if m > 1 {
        out = -out;
    }
    out
}

/// Conjugacy classes of cyclically reduced words of length `n`, by Burnside
/// over the rotation action.
pub fn burnside_classes(k: u64, n: u32) -> u64 {
    divisors(n).map(|d| totient(n / d) * cyclically_reduced_count(k, d)).sum::<u64>() / n as u64
}

/// Primitive classes of length `n`, by Mobius inversion.
pub fn primitive_classes(k: u64, n: u32) -> u64 {
    let s: i64 = divisors(n).map(|d| mobius(n / d) * cyclically_reduced_count(k, d) as i64).sum();
    (s / n as i64) as u64
}
