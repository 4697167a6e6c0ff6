//! Exact rational binomial tails, independent of the log-space code under test.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

fn binomials(n: u64) -> Vec<BigUint> {
    let mut row = Vec::with_capacity(n as usize + 1);
    let mut c = BigUint::one();
    row.push(c.clone());
    for i in 0..n {
        c = c * BigUint::from(n - i) / BigUint::from(i + 1);
        row.push(c.clone());
    }
    row
}

fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    // keep ~80 significant bits in the quotient
    let shift = 80 + den.bits() as i64 - num.bits() as i64;
    let shift = shift.max(0) as u64;
    let q = (num << shift) / den;
    q.to_f64().unwrap() * 2f64.powi(-(shift as i32))
}

/// `P(lo <= X <= hi)` for `X ~ Binomial(n, a/b)`, exactly, then rounded to f64.
pub fn exact_binom_range(n: u64, a: u64, b: u64, lo: u64, hi: u64) -> f64 {
    let c = binomials(n);
    let pa = BigUint::from(a);
    let qa = BigUint::from(b - a);
    let mut num = BigUint::zero();
    for i in lo..=hi.min(n) {
        num += &c[i as usize] * pa.pow(i as u32) * qa.pow((n - i) as u32);
    }
    ratio_to_f64(&num, &BigUint::from(b).pow(n as u32))
}
