//! Clebsch-Gordan coefficients and 6j/9j Racah symbols in exact arithmetic.
//!
//! Condon-Shortley phases throughout. All symbols vanish on triangle
//! violations rather than erroring; only malformed magnetic labels are errors.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use lru::LruCache;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use parking_lot::Mutex;
use thiserror::Error;

use crate::exactnum::{factorial, HalfInt, SqrtRational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WignerError {
    #[error("label error: {0}")]
    Label(String),
}

/// True when `c` is in `{|a-b|, ..., a+b}` and `a+b+c` is an integer.
pub fn triangle(a: HalfInt, b: HalfInt, c: HalfInt) -> bool {
    let (a, b, c) = (a.twice(), b.twice(), c.twice());
    a >= 0 && b >= 0 && c >= 0 && (a + b + c) % 2 == 0 && c >= (a - b).abs() && c <= a + b
}

/// The admissible couplings of `a` and `b`: `|a-b|, ..., a+b`.
pub fn couplings(a: HalfInt, b: HalfInt) -> impl Iterator<Item = HalfInt> {
    let lo = (a.twice() - b.twice()).abs();
    let hi = a.twice() + b.twice();
    (lo..=hi).step_by(2).map(HalfInt::from_twice)
}

fn fact(twice_sum: i32) -> BigInt {
    debug_assert!(twice_sum >= 0 && twice_sum % 2 == 0);
    factorial((twice_sum / 2) as u32)
}

fn sign_of_power(n: i64) -> i32 {
    if n.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

fn check_magnetic(j: HalfInt, m: HalfInt, name: &str) -> Result<(), WignerError> {
    if j.twice() < 0 {
        return Err(WignerError::Label(format!("negative spin {name} = {j}")));
    }
    if (j.twice() - m.twice()).rem_euclid(2) != 0 {
        return Err(WignerError::Label(format!(
            "magnetic label {m} has the wrong parity for spin {j}"
        )));
    }
    if m.twice().abs() > j.twice() {
        return Err(WignerError::Label(format!("|{m}| exceeds spin {j}")));
    }
    Ok(())
}

/// Clebsch-Gordan coefficient `<j1 m1; j2 m2 | j m>`.
pub fn clebsch_gordan(
    j1: HalfInt,
    m1: HalfInt,
    j2: HalfInt,
    m2: HalfInt,
    j: HalfInt,
    m: HalfInt,
) -> Result<SqrtRational, WignerError> {
    check_magnetic(j1, m1, "j1")?;
    check_magnetic(j2, m2, "j2")?;
    check_magnetic(j, m, "j")?;
    Ok(cg(j1, m1, j2, m2, j, m))
}

/// Unchecked Clebsch-Gordan coefficient; zero for any inadmissible labels.
pub fn cg(
    j1: HalfInt,
    m1: HalfInt,
    j2: HalfInt,
    m2: HalfInt,
    j: HalfInt,
    m: HalfInt,
) -> SqrtRational {
    let (j1, m1, j2, m2, j, m) = (
        j1.twice(),
        m1.twice(),
        j2.twice(),
        m2.twice(),
        j.twice(),
        m.twice(),
    );
    if m1 + m2 != m
        || m1.abs() > j1
        || m2.abs() > j2
        || m.abs() > j
        || (j1 - m1) % 2 != 0
        || (j2 - m2) % 2 != 0
        || !triangle(
            HalfInt::from_twice(j1),
            HalfInt::from_twice(j2),
            HalfInt::from_twice(j),
        )
    {
        return SqrtRational::zero();
    }
    let num = BigInt::from(j + 1)
        * fact(j1 + j2 - j)
        * fact(j1 - j2 + j)
        * fact(-j1 + j2 + j)
        * fact(j1 + m1)
        * fact(j1 - m1)
        * fact(j2 + m2)
        * fact(j2 - m2)
        * fact(j + m)
        * fact(j - m);
    let den = fact(j1 + j2 + j + 2);
    // k runs over twice-values; every factorial argument must be nonnegative.
    let kmin = 0.max(j2 - j - m1).max(j1 - j + m2);
    let kmax = (j1 + j2 - j).min(j1 - m1).min(j2 + m2);
    let mut sum = BigRational::zero();
    let mut k = kmin;
    while k <= kmax {
        let d = fact(k)
            * fact(j1 + j2 - j - k)
            * fact(j1 - m1 - k)
            * fact(j2 + m2 - k)
            * fact(j - j2 + m1 + k)
            * fact(j - j1 - m2 + k);
        let term = BigRational::new(BigInt::from(sign_of_power(i64::from(k / 2))), d);
        sum += term;
        k += 2;
    }
    if sum.is_zero() {
        return SqrtRational::zero();
    }
    SqrtRational::from_rational(&sum) * SqrtRational::sqrt_of(BigRational::new(num, den))
}

/// Square of the triangle coefficient: `(a+b-c)!(a-b+c)!(-a+b+c)!/(a+b+c+1)!`.
fn delta_sq(a: i32, b: i32, c: i32) -> BigRational {
    BigRational::new(
        fact(a + b - c) * fact(a - b + c) * fact(-a + b + c),
        fact(a + b + c + 2),
    )
}

fn tri(a: i32, b: i32, c: i32) -> bool {
    triangle(
        HalfInt::from_twice(a),
        HalfInt::from_twice(b),
        HalfInt::from_twice(c),
    )
}

/// Racah's single sum for a 6j symbol, without the triangle prefactor.
fn sixj_sum(j: [i32; 6]) -> BigRational {
    let [a, b, c, d, e, f] = j;
    let s1 = a + b + c;
    let s2 = a + e + f;
    let s3 = d + b + f;
    let s4 = d + e + c;
    let p1 = a + b + d + e;
    let p2 = a + c + d + f;
    let p3 = b + c + e + f;
    let tmin = s1.max(s2).max(s3).max(s4);
    let tmax = p1.min(p2).min(p3);
    let mut sum = BigRational::zero();
    let mut t = tmin;
    while t <= tmax {
        let num = BigInt::from(sign_of_power(i64::from(t / 2))) * fact(t + 2);
        let den = fact(t - s1)
            * fact(t - s2)
            * fact(t - s3)
            * fact(t - s4)
            * fact(p1 - t)
            * fact(p2 - t)
            * fact(p3 - t);
        sum += BigRational::new(num, den);
        t += 2;
    }
    sum
}

fn sixj_admissible(j: [i32; 6]) -> bool {
    let [a, b, c, d, e, f] = j;
    tri(a, b, c) && tri(a, e, f) && tri(d, b, f) && tri(d, e, c)
}

/// The 6j symbol `{j1 j2 j3; j4 j5 j6}`.
pub fn wigner_6j(j: [HalfInt; 6]) -> SqrtRational {
    let t = j.map(HalfInt::twice);
    if !sixj_admissible(t) {
        return SqrtRational::zero();
    }
    let [a, b, c, d, e, f] = t;
    let dsq = delta_sq(a, b, c) * delta_sq(a, e, f) * delta_sq(d, b, f) * delta_sq(d, e, c);
    SqrtRational::from_rational(&sixj_sum(t)) * SqrtRational::sqrt_of(dsq)
}

fn ninej_admissible(t: &[i32; 9]) -> bool {
    let [a, b, c, d, e, f, g, h, i] = *t;
    tri(a, b, c) && tri(d, e, f) && tri(g, h, i) && tri(a, d, g) && tri(b, e, h) && tri(c, f, i)
}

/// Uncached 9j symbol `{a b c; d e f; g h i}` (rows of the array, row-major).
///
/// Summed over the intermediate `x` of three 6j symbols. The triangle factors
/// that depend on `x` appear squared, so the sum is a rational multiple of a
/// single square root.
pub fn wigner_9j_uncached(j: [HalfInt; 9]) -> SqrtRational {
    let t = j.map(HalfInt::twice);
    if !ninej_admissible(&t) {
        return SqrtRational::zero();
    }
    let [a, b, c, d, e, f, g, h, i] = t;
    let fixed = delta_sq(a, b, c)
        * delta_sq(f, i, c)
        * delta_sq(d, e, f)
        * delta_sq(b, e, h)
        * delta_sq(g, h, i)
        * delta_sq(g, a, d);
    let lo = (a - i).abs().max((d - h).abs()).max((b - f).abs());
    let hi = (a + i).min(d + h).min(b + f);
    let mut sum = BigRational::zero();
    let mut x = lo;
    while x <= hi {
        let s1 = [a, b, c, f, i, x];
        let s2 = [d, e, f, b, x, h];
        let s3 = [g, h, i, x, a, d];
        if sixj_admissible(s1) && sixj_admissible(s2) && sixj_admissible(s3) {
            let weight =
                BigRational::from_integer(BigInt::from(sign_of_power(i64::from(x)) * (x + 1)));
            let varying = delta_sq(a, i, x) * delta_sq(f, b, x) * delta_sq(d, x, h);
            sum += weight * varying * sixj_sum(s1) * sixj_sum(s2) * sixj_sum(s3);
        }
        x += 2;
    }
    SqrtRational::from_rational(&sum) * SqrtRational::sqrt_of(fixed)
}

const ROW_PERMS: [([usize; 3], bool); 6] = [
    ([0, 1, 2], false),
    ([1, 2, 0], false),
    ([2, 0, 1], false),
    ([1, 0, 2], true),
    ([0, 2, 1], true),
    ([2, 1, 0], true),
];

/// Canonical representative of the 72-element symmetry class of a 9j symbol,
/// together with the sign relating the original to the representative.
fn canonical_9j(t: [i32; 9]) -> ([i32; 9], i32) {
    let total: i32 = t.iter().sum();
    let odd_sign = sign_of_power(i64::from(total / 2));
    let mut best: Option<([i32; 9], i32)> = None;
    for transpose in [false, true] {
        let base: [i32; 9] = if transpose {
            [t[0], t[3], t[6], t[1], t[4], t[7], t[2], t[5], t[8]]
        } else {
            t
        };
        for (rp, rodd) in ROW_PERMS {
            for (cp, codd) in ROW_PERMS {
                let mut out = [0; 9];
                for r in 0..3 {
                    for c in 0..3 {
                        out[3 * r + c] = base[3 * rp[r] + cp[c]];
                    }
                }
                let sign = if rodd ^ codd { odd_sign } else { 1 };
                if best.as_ref().is_none_or(|(b, _)| out < *b) {
                    best = Some((out, sign));
                }
            }
        }
    }
    best.expect("symmetry group is nonempty")
}

const CACHE_CAPACITY: usize = 1 << 16;

fn cache() -> &'static Mutex<LruCache<[i32; 9], SqrtRational>> {
    static CACHE: OnceLock<Mutex<LruCache<[i32; 9], SqrtRational>>> = OnceLock::new();
    CACHE.get_or_init(|| {
        Mutex::new(LruCache::new(
            NonZeroUsize::new(CACHE_CAPACITY).expect("nonzero capacity"),
        ))
    })
}

/// The 9j symbol `{a b c; d e f; g h i}`, memoized over its symmetry class.
pub fn wigner_9j(j: [HalfInt; 9]) -> SqrtRational {
    let t = j.map(HalfInt::twice);
    if !ninej_admissible(&t) {
        return SqrtRational::zero();
    }
    let (key, sign) = canonical_9j(t);
    let hit = cache().lock().get(&key).cloned();
    let value = match hit {
        Some(v) => v,
        None => {
            let v = wigner_9j_uncached(key.map(HalfInt::from_twice));
            cache().lock().put(key, v.clone());
            v
        }
    };
    if sign < 0 {
        -value
    } else {
        value
    }
}

/// Dimension-normalized 9j: `sqrt(d_c d_f d_g d_h) {a b c; d e f; g h i}`.
pub fn bracket_9j(j: [HalfInt; 9]) -> SqrtRational {
    let v = wigner_9j(j);
    if v.is_zero() {
        return v;
    }
    let dims = [j[2], j[5], j[6], j[7]]
        .iter()
        .fold(BigInt::one(), |acc, x| acc * BigInt::from(x.dim()));
    v * SqrtRational::sqrt_of(BigRational::from_integer(dims))
}

/// Parse helper for tables: `h("3/2")`. Panics on malformed input.
pub fn h(text: &str) -> HalfInt {
    text.parse().unwrap_or_else(|e| panic!("{e}"))
}
