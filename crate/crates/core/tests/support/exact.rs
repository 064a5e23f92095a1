//! Exact rational reference values for dyadic probabilities `p = a / 2^m`.
//!
//! Powers and quotients are computed exactly with big integers; the only
//! rounding happens in the final conversion to `f64` and, for logarithms,
//! in one call to a correctly rounded `ln`/`ln_1p` on an exactly
//! representable argument.

#![allow(dead_code)]

use num_bigint::BigUint;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dyadic {
    pub a: u64,
    pub m: u32,
}

impl Dyadic {
    pub fn new(a: u64, m: u32) -> Self {
        assert!(m <= 52 && a > 0 && a < 1 << m, "p must lie in (0, 1)");
        Self { a, m }
    }

    pub fn value(&self) -> f64 {
        self.a as f64 / (1u64 << self.m) as f64
    }

    /// `1 - p` numerator over the same denominator.
    fn b(&self) -> u64 {
        (1u64 << self.m) - self.a
    }

    fn den(&self, power: u64) -> BigUint {
        BigUint::from(1u8) << (self.m as u64 * power)
    }
}

/// `num / den` rounded to `f64` with relative error below `2^-60`.
pub fn ratio(num: &BigUint, den: &BigUint) -> f64 {
    if num.bits() == 0 {
        return 0.0;
    }
    let shift = den.bits() as i64 - num.bits() as i64 + 64;
    let q = if shift >= 0 {
        (num << shift as u64) / den
    } else {
        num / (den << (-shift) as u64)
    };
    let digits = q.to_u64_digits();
    let mut v = 0u128;
    for (i, d) in digits.iter().enumerate() {
        v |= (*d as u128) << (64 * i);
    }
    scale_pow2(v as f64, -shift)
}

fn scale_pow2(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e as i32)
}

/// `(1 - p)^n` as an exact fraction.
pub fn miss_fraction(p: Dyadic, n: u64) -> (BigUint, BigUint) {
    (BigUint::from(p.b()).pow(n as u32), p.den(n))
}

pub fn coverage(p: Dyadic, n: u64) -> f64 {
    let (num, den) = miss_fraction(p, n);
    ratio(&(&den - &num), &den)
}

/// `F = N a b^(N-1) / (2^(mN) - b^N)`.
pub fn dco_factor(p: Dyadic, n: u64) -> f64 {
    let b = BigUint::from(p.b());
    let num = BigUint::from(n) * BigUint::from(p.a) * b.pow(n as u32 - 1);
    let den = p.den(n) - b.pow(n as u32);
    ratio(&num, &den)
}

/// `-ln(1 - (1 - p)^N)`.
pub fn dco_loss(p: Dyadic, n: u64) -> f64 {
    let (num, den) = miss_fraction(p, n);
    let miss = ratio(&num, &den);
    if miss < 0.5 {
        -(-miss).ln_1p()
    } else {
        -ratio(&(&den - &num), &den).ln()
    }
}

/// `-ln p`, with `ln p = ln_1p(-(1 - p))` when `p` is near 1.
pub fn neg_log(p: Dyadic) -> f64 {
    if p.value() < 0.5 {
        -p.value().ln()
    } else {
        -(-(p.b() as f64 / (1u64 << p.m) as f64)).ln_1p()
    }
}

/// `-(1 - p)^gamma ln p` for integer `gamma`.
pub fn focal_loss(p: Dyadic, gamma: u32) -> f64 {
    let (num, den) = miss_fraction(p, gamma as u64);
    ratio(&num, &den) * neg_log(p)
}

/// Relative error with an absolute floor for values that underflow.
pub fn rel_err(got: f64, want: f64) -> f64 {
    if want.abs() < 1e-300 {
        return if got.abs() < 1e-300 { 0.0 } else { f64::INFINITY };
    }
    ((got - want) / want).abs()
}
