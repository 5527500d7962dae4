//! Functionals on the subsets of a finite ground configuration, with the
//! convolution `*`, its exponential and logarithm, and the shift `D`.
//!
//! Subsets are bitmasks over the ground's canonical order.

use std::ops::{Add, Neg, Sub};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{CompensatedSum, Scalar};

/// Largest supported ground size.
pub const GROUND_CAP: usize = 16;

/// Below this ground size `star_mul` stays sequential.
const PARALLEL_FROM: usize = 11;

/// Dense table over all `2^n` subsets of a ground of `n` points.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFunctional<T> {
    ground_size: usize,
    values: Vec<T>,
}

fn check_size(n: usize) -> Result<()> {
    if n > GROUND_CAP {
        return Err(Error::SizeLimit {
            what: "functional ground",
            size: n,
            cap: GROUND_CAP,
        });
    }
    Ok(())
}

/// Submasks of `s` in decreasing order, including `s` and `0`.
#[inline]
pub fn submasks(s: u32) -> impl Iterator<Item = u32> {
    let mut next = Some(s);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 { None } else { Some((cur - 1) & s) };
        Some(cur)
    })
}

impl<T: Scalar> ConfigFunctional<T> {
    pub fn new(ground_size: usize, values: Vec<T>) -> Result<Self> {
        check_size(ground_size)?;
        if values.len() != 1 << ground_size {
            return Err(Error::SizeLimit {
                what: "functional table length",
                size: values.len(),
                cap: 1 << ground_size,
            });
        }
        Ok(Self { ground_size, values })
    }

    pub fn zeros(ground_size: usize) -> Result<Self> {
        check_size(ground_size)?;
        Ok(Self {
            ground_size,
            values: vec![T::zero(); 1 << ground_size],
        })
    }

    /// `1*`: one on the empty set, zero elsewhere.
    pub fn unit(ground_size: usize) -> Result<Self> {
        let mut f = Self::zeros(ground_size)?;
        f.values[0] = T::one();
        Ok(f)
    }

    pub fn from_fn(ground_size: usize, mut f: impl FnMut(u32) -> T) -> Result<Self> {
        check_size(ground_size)?;
        Ok(Self {
            ground_size,
            values: (0..1u32 << ground_size).map(&mut f).collect(),
        })
    }

    pub fn ground_size(&self) -> usize {
        self.ground_size
    }

    #[inline]
    pub fn get(&self, mask: u32) -> T {
        self.values[mask as usize]
    }

    pub fn set(&mut self, mask: u32, v: T) {
        self.values[mask as usize] = v;
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn full_mask(&self) -> u32 {
        ((1u64 << self.ground_size) - 1) as u32
    }

    pub fn scale(&self, c: T) -> Self {
        Self {
            ground_size: self.ground_size,
            values: self.values.iter().map(|v| *v * c).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }

    pub fn cast<U: Scalar>(&self) -> ConfigFunctional<U> {
        ConfigFunctional {
            ground_size: self.ground_size,
            values: self.values.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    fn same_ground(&self, other: &Self) -> Result<()> {
        if self.ground_size != other.ground_size {
            return Err(Error::GroundMismatch {
                left: self.ground_size,
                right: other.ground_size,
            });
        }
        Ok(())
    }
}

impl<T: Scalar> Add for &ConfigFunctional<T> {
    type Output = ConfigFunctional<T>;
    fn add(self, rhs: Self) -> ConfigFunctional<T> {
        assert_eq!(self.ground_size, rhs.ground_size, "ground mismatch");
        ConfigFunctional {
            ground_size: self.ground_size,
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| *a + *b).collect(),
        }
    }
}

impl<T: Scalar> Sub for &ConfigFunctional<T> {
    type Output = ConfigFunctional<T>;
    fn sub(self, rhs: Self) -> ConfigFunctional<T> {
        assert_eq!(self.ground_size, rhs.ground_size, "ground mismatch");
        ConfigFunctional {
            ground_size: self.ground_size,
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| *a - *b).collect(),
        }
    }
}

impl<T: Scalar> Neg for &ConfigFunctional<T> {
    type Output = ConfigFunctional<T>;
    fn neg(self) -> ConfigFunctional<T> {
        self.scale(-T::one())
    }
}

/// `(a * b)(S) = sum_{T subset S} a(T) b(S \ T)`.
pub fn star_mul<T: Scalar>(a: &ConfigFunctional<T>, b: &ConfigFunctional<T>) -> Result<ConfigFunctional<T>> {
    a.same_ground(b)?;
    let entry = |s: u32| {
        let mut acc = CompensatedSum::new();
        for t in submasks(s) {
            let x = a.values[t as usize];
            if x != T::zero() {
                acc.add(x * b.values[(s ^ t) as usize]);
            }
        }
        acc.value()
    };
    let size = 1u32 << a.ground_size;
    let values = if a.ground_size >= PARALLEL_FROM {
        (0..size).into_par_iter().map(entry).collect()
    } else {
        (0..size).map(entry).collect()
    };
    Ok(ConfigFunctional {
        ground_size: a.ground_size,
        values,
    })
}

/// `exp* psi`, by the anchored recursion
/// `f(S) = sum_{T subset S, a in T} psi(T) f(S \ T)` with `a` the lowest element of `S`.
pub fn star_exp<T: Scalar>(psi: &ConfigFunctional<T>) -> Result<ConfigFunctional<T>> {
    if psi.values[0] != T::zero() {
        return Err(Error::NotInIdeal {
            value: psi.values[0].as_f64(),
        });
    }
    let mut f = vec![T::zero(); psi.values.len()];
    f[0] = T::one();
    for s in 1..psi.values.len() as u32 {
        let low = s & s.wrapping_neg();
        let rest = s ^ low;
        let mut acc = CompensatedSum::new();
        for u in submasks(rest) {
            let t = u | low;
            acc.add(psi.values[t as usize] * f[(s ^ t) as usize]);
        }
        f[s as usize] = acc.value();
    }
    Ok(ConfigFunctional {
        ground_size: psi.ground_size,
        values: f,
    })
}

/// `ln* f`, inverting the recursion of [`star_exp`]:
/// `psi(S) = f(S) - sum_{a in T strictly inside S} psi(T) f(S \ T)`.
pub fn star_log<T: Scalar>(f: &ConfigFunctional<T>) -> Result<ConfigFunctional<T>> {
    if f.values[0] != T::one() {
        return Err(Error::NotNormalized {
            value: f.values[0].as_f64(),
        });
    }
    let mut psi = vec![T::zero(); f.values.len()];
    for s in 1..f.values.len() as u32 {
        let low = s & s.wrapping_neg();
        let rest = s ^ low;
        let mut acc = CompensatedSum::new();
        acc.add(f.values[s as usize]);
        for u in submasks(rest) {
            if u == rest {
                continue;
            }
            let t = u | low;
            acc.add(-psi[t as usize] * f.values[(s ^ t) as usize]);
        }
        psi[s as usize] = acc.value();
    }
    Ok(ConfigFunctional {
        ground_size: f.ground_size,
        values: psi,
    })
}

/// `sum_{m=0}^{n} psi^{*m} / m!` computed literally.
pub fn star_exp_series<T: Scalar>(psi: &ConfigFunctional<T>) -> Result<ConfigFunctional<T>> {
    if psi.values[0] != T::zero() {
        return Err(Error::NotInIdeal {
            value: psi.values[0].as_f64(),
        });
    }
    let mut total = ConfigFunctional::unit(psi.ground_size)?;
    let mut power = ConfigFunctional::unit(psi.ground_size)?;
    for m in 1..=psi.ground_size {
        power = star_mul(&power, psi)?;
        total = &total + &power.scale(T::one() / T::of(crate::scalar::factorial(m)));
    }
    Ok(total)
}

/// `sum_{m=1}^{n} (-1)^{m-1} phi^{*m} / m` with `phi = f - 1*`, computed literally.
pub fn star_log_series<T: Scalar>(f: &ConfigFunctional<T>) -> Result<ConfigFunctional<T>> {
    if f.values[0] != T::one() {
        return Err(Error::NotNormalized {
            value: f.values[0].as_f64(),
        });
    }
    let phi = f - &ConfigFunctional::unit(f.ground_size)?;
    let mut total = ConfigFunctional::zeros(f.ground_size)?;
    let mut power = ConfigFunctional::unit(f.ground_size)?;
    for m in 1..=f.ground_size {
        power = star_mul(&power, &phi)?;
        let sign = if m % 2 == 1 { T::one() } else { -T::one() };
        total = &total + &power.scale(sign / T::of_usize(m));
    }
    Ok(total)
}

/// `(D_A psi)(w) = psi(w u A)` for `w` disjoint from `A`, zero otherwise.
pub fn d_shift<T: Scalar>(psi: &ConfigFunctional<T>, attach: u32) -> ConfigFunctional<T> {
    ConfigFunctional {
        ground_size: psi.ground_size,
        values: (0..psi.values.len() as u32)
            .map(|w| {
                if w & attach != 0 {
                    T::zero()
                } else {
                    psi.values[(w | attach) as usize]
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn functional(n: usize, vals: &[f64], ideal: bool) -> ConfigFunctional<f64> {
        let mut f = ConfigFunctional::from_fn(n, |s| vals[s as usize % vals.len()]).unwrap();
        f.set(0, if ideal { 0.0 } else { 1.0 });
        f
    }

    #[test]
    fn unit_is_neutral() {
        let b = functional(3, &[0.3, -1.2, 0.7, 2.0, 0.1], false);
        let one = ConfigFunctional::unit(3).unwrap();
        assert_eq!(star_mul(&one, &b).unwrap(), b);
    }

    #[test]
    fn indicators_multiply_to_pair() {
        let mut a = ConfigFunctional::<f64>::zeros(2).unwrap();
        a.set(0b01, 1.0);
        let mut b = ConfigFunctional::<f64>::zeros(2).unwrap();
        b.set(0b10, 1.0);
        let c = star_mul(&a, &b).unwrap();
        assert_eq!(c.values(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn exp_small_grounds() {
        let z = ConfigFunctional::<f64>::zeros(3).unwrap();
        assert_eq!(star_exp(&z).unwrap(), ConfigFunctional::unit(3).unwrap());
        let psi = ConfigFunctional::new(1, vec![0.0, 0.4]).unwrap();
        assert_eq!(star_exp(&psi).unwrap().values(), &[1.0, 0.4]);
        let psi = ConfigFunctional::<f64>::new(2, vec![0.0, 0.3, -0.5, 0.9]).unwrap();
        let e = star_exp(&psi).unwrap();
        assert!((e.get(3) - (0.9 + 0.3 * -0.5)).abs() < 1e-15);
        let back = star_log(&e).unwrap();
        assert!((back.get(3) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        let bad = ConfigFunctional::new(1, vec![0.5, 0.4]).unwrap();
        assert!(matches!(star_exp(&bad), Err(Error::NotInIdeal { .. })));
        assert!(matches!(star_log(&bad), Err(Error::NotNormalized { .. })));
        let other = ConfigFunctional::<f64>::zeros(2).unwrap();
        assert!(matches!(star_mul(&bad, &other), Err(Error::GroundMismatch { .. })));
        assert!(ConfigFunctional::<f64>::zeros(17).is_err());
    }

    #[test]
    fn f32_round_trip() {
        let psi = ConfigFunctional::<f32>::from_fn(5, |s| if s == 0 { 0.0 } else { 0.1 * s.count_ones() as f32 }).unwrap();
        let back = star_log(&star_exp(&psi).unwrap()).unwrap();
        assert!(back.max_abs_diff(&psi) < 1e-5);
    }

    fn arb_functional(max_n: usize, ideal: bool) -> impl Strategy<Value = ConfigFunctional<f64>> {
        (1..=max_n).prop_flat_map(move |n| {
            prop::collection::vec(-1.5f64..1.5, 1 << n).prop_map(move |mut v| {
                v[0] = if ideal { 0.0 } else { 1.0 };
                ConfigFunctional::new(n, v).unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn mul_commutes_and_associates((a, b, c) in (1usize..=6).prop_flat_map(|n| {
            let v = || prop::collection::vec(-1.0f64..1.0, 1 << n).prop_map(move |v| ConfigFunctional::new(n, v).unwrap());
            (v(), v(), v())
        })) {
            let ab = star_mul(&a, &b).unwrap();
            let ba = star_mul(&b, &a).unwrap();
            prop_assert!(ab.max_abs_diff(&ba) <= 1e-12);
            let l = star_mul(&ab, &c).unwrap();
            let r = star_mul(&a, &star_mul(&b, &c).unwrap()).unwrap();
            let scale = l.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
            prop_assert!(l.max_abs_diff(&r) <= 1e-12 * scale);
        }

        #[test]
        fn ideal_is_closed(a in arb_functional(5, true)) {
            let sq = star_mul(&a, &a).unwrap();
            prop_assert_eq!(sq.get(0), 0.0);
        }

        #[test]
        fn round_trips(psi in arb_functional(6, true), f in arb_functional(6, false)) {
            let back = star_log(&star_exp(&psi).unwrap()).unwrap();
            prop_assert!(back.max_abs_diff(&psi) <= 1e-10);
            let again = star_exp(&star_log(&f).unwrap()).unwrap();
            prop_assert!(again.max_abs_diff(&f) <= 1e-10);
        }

        #[test]
        fn recursion_matches_series(psi in arb_functional(5, true), f in arb_functional(5, false)) {
            prop_assert!(star_exp(&psi).unwrap().max_abs_diff(&star_exp_series(&psi).unwrap()) <= 1e-11);
            prop_assert!(star_log(&f).unwrap().max_abs_diff(&star_log_series(&f).unwrap()) <= 1e-9);
        }

        #[test]
        fn shifts_commute(psi in arb_functional(5, false), x in 0u32..5, y in 0u32..5) {
            let n = psi.ground_size() as u32;
            let (x, y) = (1 << (x % n), 1 << (y % n));
            prop_assert_eq!(d_shift(&d_shift(&psi, x), y), d_shift(&d_shift(&psi, y), x));
            prop_assert_eq!(d_shift(&psi, 0), psi.clone());
        }

        #[test]
        fn leibniz_and_exponential_rules(
            (a, b, psi) in (2usize..=5).prop_flat_map(|n| {
                let v = || prop::collection::vec(-1.0f64..1.0, 1 << n).prop_map(move |v| ConfigFunctional::new(n, v).unwrap());
                (v(), v(), v())
            }),
            x in 0u32..5,
        ) {
            let n = a.ground_size() as u32;
            let x = 1u32 << (x % n);
            // identities hold on arguments not containing x
            let lhs = d_shift(&star_mul(&a, &b).unwrap(), x);
            let rhs = &star_mul(&d_shift(&a, x), &b).unwrap() + &star_mul(&a, &d_shift(&b, x)).unwrap();
            for w in 0..1u32 << n {
                if w & x == 0 {
                    prop_assert!((lhs.get(w) - rhs.get(w)).abs() <= 1e-12);
                }
            }
            let mut psi = psi;
            psi.set(0, 0.0);
            let e = star_exp(&psi).unwrap();
            let lhs = d_shift(&e, x);
            let rhs = star_mul(&e, &d_shift(&psi, x)).unwrap();
            for w in 0..1u32 << n {
                if w & x == 0 {
                    prop_assert!((lhs.get(w) - rhs.get(w)).abs() <= 1e-12);
                }
            }
        }
    }
}
