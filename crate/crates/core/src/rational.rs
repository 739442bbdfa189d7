//! Exact rational scalars and dense rational vectors.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;
pub type Vector = Vec<Q>;

pub fn int(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

pub fn frac(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

pub fn zeros(len: usize) -> Vector {
    vec![Q::zero(); len]
}

pub fn unit(len: usize, i: usize) -> Vector {
    let mut v = zeros(len);
    v[i] = Q::one();
    v
}

pub fn dot(a: &[Q], b: &[Q]) -> Q {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).filter(|(x, y)| !x.is_zero() && !y.is_zero()).fold(Q::zero(), |acc, (x, y)| acc + x * y)
}

pub fn add(a: &[Q], b: &[Q]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[Q], b: &[Q]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[Q], s: &Q) -> Vector {
    a.iter().map(|x| x * s).collect()
}

pub fn is_zero_vec(a: &[Q]) -> bool {
    a.iter().all(Zero::is_zero)
}

/// Rescales so that the largest-magnitude entry becomes ±1 (first one wins on ties).
pub fn max_normalize(a: &[Q]) -> Vector {
    let mut best: Option<&Q> = None;
    for x in a {
        if best.map_or(!x.is_zero(), |b| x.abs() > b.abs()) {
            best = Some(x);
        }
    }
    match best {
        Some(b) => {
            let s = b.abs().recip();
            scale(a, &s)
        }
        None => a.to_vec(),
    }
}

/// Flips sign so that the first nonzero entry is positive.
pub fn sign_canonical(a: &[Q]) -> Vector {
    match a.iter().find(|x| !x.is_zero()) {
        Some(x) if x.is_negative() => a.iter().map(|y| -y).collect(),
        _ => a.to_vec(),
    }
}

/// `"p/q"` with the denominator always present.
pub fn format_q(q: &Q) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

pub fn to_f64(q: &Q) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        let n = q.numer().to_f64().unwrap_or(f64::NAN);
        let d = q.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

pub fn factorial(k: u32) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Binomial with the convention C(n, k) = 0 for negative n or k.
pub fn binomial_i(n: i64, k: i64) -> usize {
    if n < 0 || k < 0 {
        0
    } else {
        binomial(n as usize, k as usize)
    }
}
