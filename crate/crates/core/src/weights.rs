//! Bivariate weight functions `f(m, n)`.
//!
//! `m` is the number of relays ranked strictly below a class and `n` the
//! class size, so only `m >= 0, n >= 1, m + n <= N` is ever evaluated. Values
//! are tabulated once at construction.
//!
//! Two structural conditions make the cone family a partition:
//!
//! * additivity of reciprocals, `1/f(m, n1+n2) = 1/f(m, n1) + 1/f(m+n1, n2)`;
//! * monotonicity, `f(m, n1) >= f(m+n1, n2)`.
//!
//! A third, ratio condition `f(m, n1) / f(m+n1, n2) >= 1/p_min`, is what ORCD
//! refinement needs. The geometric family `1 / (K^m (K^n - 1))` satisfies the
//! first two for `K >= 2` and the third once `K >= 1 + 1/p_min`.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("f({m}, {n}) is outside the domain m >= 0, n >= 1, m + n <= {n_max}")]
    DomainError { m: usize, n: usize, n_max: usize },
    #[error("invalid weight parameter: {0}")]
    BadParameter(String),
    #[error("weight table is missing f({m}, {n})")]
    MissingEntry { m: usize, n: usize },
    #[error("weight f({m}, {n}) = {value} is not positive")]
    NonPositive { m: usize, n: usize, value: String },
}

/// Smallest geometric base accepted by [`WeightTable::geometric`].
pub const MIN_GEOMETRIC_K: f64 = 1.0 + 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum WeightFamily<T> {
    Geometric { k: T },
    Custom,
}

/// Tabulated weight function on `{(m, n) : m + n <= n_max, n >= 1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTable<T> {
    name: String,
    family: WeightFamily<T>,
    n_max: usize,
    values: Vec<T>,
}

/// Which condition failed, and where.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// `f(m, n) <= 0`.
    NonPositive { m: usize, n: usize },
    /// The condition fails on the triple `(m, n1, n2)`.
    Triple { m: usize, n1: usize, n2: usize },
}

impl<T: Scalar> WeightTable<T> {
    /// `f(m, n) = 1 / (K^m (K^n - 1))`, requiring `K >= 1 + 1e-9`.
    pub fn geometric(k: T, n_max: usize) -> Result<Self, WeightError> {
        let min_k = T::from_f64(MIN_GEOMETRIC_K).expect("representable");
        if k < min_k {
            return Err(WeightError::BadParameter(format!("geometric K = {k} < {MIN_GEOMETRIC_K}")));
        }
        Self::geometric_raw(k, n_max)
    }

    /// Same formula without the lower bound on `K`; only `K > 0, K != 1` is
    /// required. Used for negative controls.
    pub fn geometric_raw(k: T, n_max: usize) -> Result<Self, WeightError> {
        if k <= T::zero() || k == T::one() {
            return Err(WeightError::BadParameter(format!("geometric K = {k}")));
        }
        let mut powers = vec![T::one()];
        for i in 0..n_max {
            let next = powers[i].clone() * k.clone();
            powers.push(next);
        }
        let mut t = Self::from_fn(format!("geometric(K={k})"), n_max, |m, n| {
            T::one() / (powers[m].clone() * (powers[n].clone() - T::one()))
        });
        t.family = WeightFamily::Geometric { k };
        Ok(t)
    }

    /// Tabulates an arbitrary rule. Values are not checked for positivity.
    pub fn from_fn(name: impl Into<String>, n_max: usize, mut rule: impl FnMut(usize, usize) -> T) -> Self {
        let width = n_max + 1;
        let mut values = vec![T::zero(); width * width];
        for m in 0..n_max {
            for n in 1..=n_max - m {
                values[m * width + n] = rule(m, n);
            }
        }
        WeightTable {
            name: name.into(),
            family: WeightFamily::Custom,
            n_max,
            values,
        }
    }

    /// Explicit `(m, n, value)` triples covering the whole domain with
    /// positive values.
    pub fn from_triples(name: impl Into<String>, n_max: usize, triples: &[(usize, usize, T)]) -> Result<Self, WeightError> {
        let width = n_max + 1;
        let mut seen = vec![false; width * width];
        let mut t = Self::from_fn(name, n_max, |_, _| T::zero());
        for (m, n, v) in triples {
            let (m, n) = (*m, *n);
            if n == 0 || m + n > n_max {
                return Err(WeightError::DomainError { m, n, n_max });
            }
            if *v <= T::zero() {
                return Err(WeightError::NonPositive {
                    m,
                    n,
                    value: v.to_string(),
                });
            }
            t.values[m * width + n] = v.clone();
            seen[m * width + n] = true;
        }
        for m in 0..n_max {
            for n in 1..=n_max - m {
                if !seen[m * width + n] {
                    return Err(WeightError::MissingEntry { m, n });
                }
            }
        }
        Ok(t)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn family(&self) -> &WeightFamily<T> {
        &self.family
    }

    /// Largest `m + n` covered by the table.
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn eval(&self, m: usize, n: usize) -> Result<T, WeightError> {
        if n == 0 || m + n > self.n_max {
            return Err(WeightError::DomainError { m, n, n_max: self.n_max });
        }
        Ok(self.get(m, n).clone())
    }

    /// Unchecked lookup for hot paths; the caller guarantees the domain.
    #[inline]
    pub fn get(&self, m: usize, n: usize) -> &T {
        debug_assert!(n >= 1 && m + n <= self.n_max, "f({m},{n}) outside table");
        &self.values[m * (self.n_max + 1) + n]
    }

    fn first_non_positive(&self, n_max: usize) -> Option<Violation> {
        for m in 0..n_max {
            for n in 1..=n_max - m {
                if *self.get(m, n) <= T::zero() {
                    return Some(Violation::NonPositive { m, n });
                }
            }
        }
        None
    }

    fn sweep(&self, n_max: usize, mut holds: impl FnMut(usize, usize, usize) -> bool) -> Option<Violation> {
        let n_max = n_max.min(self.n_max);
        if let Some(v) = self.first_non_positive(n_max) {
            return Some(v);
        }
        for m in 0..n_max {
            for n1 in 1..n_max - m {
                for n2 in 1..=n_max - m - n1 {
                    if !holds(m, n1, n2) {
                        return Some(Violation::Triple { m, n1, n2 });
                    }
                }
            }
        }
        None
    }

    /// First violation of reciprocal additivity on `m + n1 + n2 <= n_max`.
    /// `n_max` is clipped to the table size.
    pub fn c1_violation(&self, n_max: usize) -> Option<Violation> {
        self.sweep(n_max, |m, n1, n2| {
            let lhs = T::one() / self.get(m, n1 + n2).clone();
            let rhs = T::one() / self.get(m, n1).clone() + T::one() / self.get(m + n1, n2).clone();
            T::nearly_eq(&lhs, &rhs, T::CHECK_TOLERANCE)
        })
    }

    /// First violation of `f(m, n1) >= f(m + n1, n2)`.
    pub fn c2_violation(&self, n_max: usize) -> Option<Violation> {
        self.sweep(n_max, |m, n1, n2| {
            let a = self.get(m, n1);
            let b = self.get(m + n1, n2);
            a >= b || T::nearly_eq(a, b, T::CHECK_TOLERANCE)
        })
    }

    /// First violation of `f(m, n1) / f(m + n1, n2) >= 1 / p_min`.
    pub fn c3_violation(&self, p_min: T, n_max: usize) -> Option<Violation> {
        let bound = T::one() / p_min;
        self.sweep(n_max, |m, n1, n2| {
            let ratio = self.get(m, n1).clone() / self.get(m + n1, n2).clone();
            ratio >= bound || T::nearly_eq(&ratio, &bound, T::CHECK_TOLERANCE)
        })
    }

    pub fn check_c1(&self, n_max: usize) -> bool {
        self.c1_violation(n_max).is_none()
    }

    pub fn check_c2(&self, n_max: usize) -> bool {
        self.c2_violation(n_max).is_none()
    }

    pub fn check_c3(&self, p_min: T, n_max: usize) -> bool {
        self.c3_violation(p_min, n_max).is_none()
    }
}

impl WeightTable<f64> {
    /// Geometric base meeting the ORCD ratio condition for `p_min`:
    /// `ceil(1 + 1/p_min)`.
    pub fn orcd_base(p_min: f64) -> f64 {
        (1.0 + 1.0 / p_min).ceil()
    }
}

/// `Σ_j 1/f(|C^{j-1}|, |C_j|)` over consecutive class sizes.
pub fn reciprocal_prefix_sum<T: Scalar>(f: &WeightTable<T>, sizes: &[usize]) -> T {
    let mut below = 0;
    let mut acc = T::zero();
    for &s in sizes {
        acc = acc + T::one() / f.get(below, s).clone();
        below += s;
    }
    acc
}
