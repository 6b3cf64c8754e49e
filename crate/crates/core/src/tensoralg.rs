//! Multiplet vectors and matrices over jets, plus Lorentz index bookkeeping.
//!
//! Column vectors ([`CVec`]) carry a lower multiplet index, row vectors
//! ([`CRow`]) are their adjoints. Lorentz components live in plain arrays
//! wrapped by [`LorentzCoVec`] and [`LorentzTensor2`]; whether an index is
//! up or down is tracked by the caller, the containers only know how to
//! raise with a [`Metric`].

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::{Jet, Order, C64};

/// Largest multiplet size handled by [`CMat::det_value`].
pub const MAX_N: usize = 8;

const HERMITIAN_TOL: f64 = 1e-12;
const SERIES_CUTOFF: f64 = 1e-18;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// diag(+1, −1, −1, −1)
    #[default]
    MostlyMinus,
    /// diag(−1, +1, +1, +1)
    MostlyPlus,
}

impl Metric {
    pub fn diag(self, mu: usize) -> f64 {
        let time = mu == 0;
        match (self, time) {
            (Metric::MostlyMinus, true) | (Metric::MostlyPlus, false) => 1.0,
            _ => -1.0,
        }
    }

    pub fn g(self, mu: usize, nu: usize) -> f64 {
        if mu == nu {
            self.diag(mu)
        } else {
            0.0
        }
    }
}

/// Default metric component g_μν.
pub fn metric(mu: usize, nu: usize) -> f64 {
    Metric::default().g(mu, nu)
}

/// Entrywise linear structure shared by everything that sits in a Lorentz slot.
pub trait Entry: Clone {
    fn neg(&self) -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn scale_real(&self, c: f64) -> Self;
    fn zeros_like(&self) -> Self;
    fn dim(&self) -> usize;
    /// Largest coefficient modulus.
    fn max_abs(&self) -> f64;
}

impl Entry for Jet {
    fn neg(&self) -> Self {
        -*self
    }
    fn plus(&self, other: &Self) -> Self {
        *self + *other
    }
    fn scale_real(&self, c: f64) -> Self {
        Jet::scale_real(self, c)
    }
    fn zeros_like(&self) -> Self {
        Jet::zero(self.order())
    }
    fn dim(&self) -> usize {
        1
    }
    fn max_abs(&self) -> f64 {
        Jet::max_abs(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CVec(pub Vec<Jet>);

#[derive(Clone, Debug, PartialEq)]
pub struct CRow(pub Vec<Jet>);

#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    n: usize,
    data: Vec<Jet>,
}

fn min_order(it: impl Iterator<Item = Order>) -> Order {
    it.min().unwrap_or(Order::Two)
}

macro_rules! vec_like {
    ($t:ident) => {
        impl $t {
            pub fn zeros(n: usize, order: Order) -> Self {
                Self(vec![Jet::zero(order); n])
            }

            pub fn from_values(values: &[C64], order: Order) -> Self {
                Self(values.iter().map(|&v| Jet::constant(v, order)).collect())
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn order(&self) -> Order {
                min_order(self.0.iter().map(Jet::order))
            }

            pub fn values(&self) -> Vec<C64> {
                self.0.iter().map(Jet::value).collect()
            }

            pub fn partial(&self, mu: usize) -> Result<Self> {
                self.0
                    .iter()
                    .map(|j| j.partial(mu))
                    .collect::<Result<_>>()
                    .map(Self)
            }

            pub fn truncate(&self, order: Order) -> Self {
                Self(self.0.iter().map(|j| j.truncate(order)).collect())
            }

            pub fn scale(&self, c: C64) -> Self {
                Self(self.0.iter().map(|j| j.scale(c)).collect())
            }

            pub fn scale_jet(&self, c: &Jet) -> Self {
                Self(self.0.iter().map(|j| *j * *c).collect())
            }
        }

        impl Index<usize> for $t {
            type Output = Jet;
            fn index(&self, i: usize) -> &Jet {
                &self.0[i]
            }
        }

        impl IndexMut<usize> for $t {
            fn index_mut(&mut self, i: usize) -> &mut Jet {
                &mut self.0[i]
            }
        }

        impl Add for &$t {
            type Output = $t;
            fn add(self, rhs: &$t) -> $t {
                assert_eq!(self.len(), rhs.len(), "multiplet size mismatch");
                $t(self.0.iter().zip(&rhs.0).map(|(a, b)| *a + *b).collect())
            }
        }

        impl Sub for &$t {
            type Output = $t;
            fn sub(self, rhs: &$t) -> $t {
                assert_eq!(self.len(), rhs.len(), "multiplet size mismatch");
                $t(self.0.iter().zip(&rhs.0).map(|(a, b)| *a - *b).collect())
            }
        }

        impl Neg for &$t {
            type Output = $t;
            fn neg(self) -> $t {
                $t(self.0.iter().map(|a| -*a).collect())
            }
        }

        impl Entry for $t {
            fn neg(&self) -> Self {
                -self
            }
            fn plus(&self, other: &Self) -> Self {
                self + other
            }
            fn scale_real(&self, c: f64) -> Self {
                Self(self.0.iter().map(|j| j.scale_real(c)).collect())
            }
            fn zeros_like(&self) -> Self {
                Self::zeros(self.len(), self.order())
            }
            fn dim(&self) -> usize {
                self.len()
            }
            fn max_abs(&self) -> f64 {
                self.0.iter().fold(0.0, |m, j| m.max(j.max_abs()))
            }
        }
    };
}

vec_like!(CVec);
vec_like!(CRow);

impl CVec {
    /// Conjugate transpose.
    pub fn adjoint(&self) -> CRow {
        CRow(self.0.iter().map(Jet::conj).collect())
    }

    /// Column times row.
    pub fn outer(&self, row: &CRow) -> CMat {
        let n = self.len();
        assert_eq!(n, row.len(), "multiplet size mismatch");
        CMat::from_fn(n, |i, j| self.0[i] * row.0[j])
    }
}

impl CRow {
    pub fn adjoint(&self) -> CVec {
        CVec(self.0.iter().map(Jet::conj).collect())
    }

    /// Row times column.
    pub fn dot(&self, col: &CVec) -> Jet {
        assert_eq!(self.len(), col.len(), "multiplet size mismatch");
        let mut acc = Jet::zero(self.order().min(col.order()));
        for (a, b) in self.0.iter().zip(&col.0) {
            acc += *a * *b;
        }
        acc
    }
}

impl CMat {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Jet) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn zeros(n: usize, order: Order) -> Self {
        Self {
            n,
            data: vec![Jet::zero(order); n * n],
        }
    }

    pub fn identity(n: usize, order: Order) -> Self {
        Self::from_fn(n, |i, j| {
            if i == j {
                Jet::one(order)
            } else {
                Jet::zero(order)
            }
        })
    }

    /// Constant matrix from real entries.
    pub fn from_real(m: &DMatrix<f64>, order: Order) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "matrix must be square");
        Self::from_fn(m.nrows(), |i, j| Jet::real(m[(i, j)], order))
    }

    pub fn from_values(n: usize, values: &[C64], order: Order) -> Self {
        assert_eq!(values.len(), n * n);
        Self::from_fn(n, |i, j| Jet::constant(values[i * n + j], order))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> Order {
        min_order(self.data.iter().map(Jet::order))
    }

    pub fn values(&self) -> Vec<C64> {
        self.data.iter().map(Jet::value).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(i, j)].conj())
    }

    pub fn trace(&self) -> Jet {
        let mut acc = Jet::zero(self.order());
        for i in 0..self.n {
            acc += self[(i, i)];
        }
        acc
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|j| j.scale(c)).collect(),
        }
    }

    pub fn scale_jet(&self, c: &Jet) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|j| *j * *c).collect(),
        }
    }

    pub fn partial(&self, mu: usize) -> Result<Self> {
        Ok(Self {
            n: self.n,
            data: self
                .data
                .iter()
                .map(|j| j.partial(mu))
                .collect::<Result<_>>()?,
        })
    }

    pub fn truncate(&self, order: Order) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|j| j.truncate(order)).collect(),
        }
    }

    /// (H + H†)/2
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.n, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()).scale_real(0.5)
        })
    }

    /// max |H − H†| over entry values.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                m = m.max((self[(i, j)].value() - self[(j, i)].value().conj()).norm());
            }
        }
        m
    }

    /// max |U U† − I| over entry values.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.n;
        let v = self.values();
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..n {
                    s += v[i * n + k] * v[j * n + k].conj();
                }
                if i == j {
                    s -= 1.0;
                }
                m = m.max(s.norm());
            }
        }
        m
    }

    pub fn try_mul(&self, rhs: &CMat) -> Result<CMat> {
        check_dim(self.n, rhs.n)?;
        Ok(self * rhs)
    }

    pub fn try_mul_vec(&self, v: &CVec) -> Result<CVec> {
        check_dim(self.n, v.len())?;
        Ok(self * v)
    }

    /// Determinant of the value part, by LU with partial pivoting.
    pub fn det_value(&self) -> Result<C64> {
        let n = self.n;
        if n > MAX_N {
            return Err(Error::DimensionMismatch {
                expected: MAX_N,
                found: n,
            });
        }
        let mut a = self.values();
        let mut det = C64::new(1.0, 0.0);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| a[r * n + col].norm().total_cmp(&a[s * n + col].norm()))
                .unwrap_or(col);
            if a[pivot * n + col].norm() == 0.0 {
                return Ok(C64::new(0.0, 0.0));
            }
            if pivot != col {
                for k in 0..n {
                    a.swap(pivot * n + k, col * n + k);
                }
                det = -det;
            }
            let d = a[col * n + col];
            det *= d;
            for r in col + 1..n {
                let f = a[r * n + col] / d;
                for k in col..n {
                    let sub = f * a[col * n + k];
                    a[r * n + k] -= sub;
                }
            }
        }
        Ok(det)
    }

    fn coefficient_norm(&self) -> f64 {
        // row-sum bound over all Taylor coefficients
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            let s: f64 = (0..self.n).map(|j| self[(i, j)].max_abs()).sum();
            m = m.max(s);
        }
        m
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = Jet;
    fn index(&self, (i, j): (usize, usize)) -> &Jet {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Jet {
        &mut self.data[i * self.n + j]
    }
}

impl Add for &CMat {
    type Output = CMat;
    fn add(self, rhs: &CMat) -> CMat {
        assert_eq!(self.n, rhs.n, "multiplet size mismatch");
        CMat {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| *a + *b)
                .collect(),
        }
    }
}

impl Sub for &CMat {
    type Output = CMat;
    fn sub(self, rhs: &CMat) -> CMat {
        assert_eq!(self.n, rhs.n, "multiplet size mismatch");
        CMat {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| *a - *b)
                .collect(),
        }
    }
}

impl Neg for &CMat {
    type Output = CMat;
    fn neg(self) -> CMat {
        CMat {
            n: self.n,
            data: self.data.iter().map(|a| -*a).collect(),
        }
    }
}

impl Mul for &CMat {
    type Output = CMat;
    fn mul(self, rhs: &CMat) -> CMat {
        assert_eq!(self.n, rhs.n, "multiplet size mismatch");
        let n = self.n;
        let order = self.order().min(rhs.order());
        CMat::from_fn(n, |i, j| {
            let mut acc = Jet::zero(order);
            for k in 0..n {
                acc += self[(i, k)] * rhs[(k, j)];
            }
            acc
        })
    }
}

impl Mul<&CVec> for &CMat {
    type Output = CVec;
    fn mul(self, v: &CVec) -> CVec {
        assert_eq!(self.n, v.len(), "multiplet size mismatch");
        let order = self.order().min(v.order());
        CVec(
            (0..self.n)
                .map(|i| {
                    let mut acc = Jet::zero(order);
                    for k in 0..self.n {
                        acc += self[(i, k)] * v[k];
                    }
                    acc
                })
                .collect(),
        )
    }
}

impl Mul<&CMat> for &CRow {
    type Output = CRow;
    fn mul(self, m: &CMat) -> CRow {
        assert_eq!(self.len(), m.n, "multiplet size mismatch");
        let order = self.order().min(m.order());
        CRow(
            (0..m.n)
                .map(|j| {
                    let mut acc = Jet::zero(order);
                    for k in 0..m.n {
                        acc += self[k] * m[(k, j)];
                    }
                    acc
                })
                .collect(),
        )
    }
}

impl Entry for CMat {
    fn neg(&self) -> Self {
        -self
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn scale_real(&self, c: f64) -> Self {
        CMat {
            n: self.n,
            data: self.data.iter().map(|j| j.scale_real(c)).collect(),
        }
    }
    fn zeros_like(&self) -> Self {
        CMat::zeros(self.n, self.order())
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, j| m.max(j.max_abs()))
    }
}

/// exp(iH) for Hermitian H, with exact derivative propagation.
pub fn mat_exp_i_hermitian(h: &CMat) -> Result<CMat> {
    let deviation = h.hermiticity_defect();
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let n = h.n;
    let order = h.order();
    let x = h.scale(C64::new(0.0, 1.0));
    let norm = x.coefficient_norm();
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = x.scale_real(scale);

    let mut sum = CMat::identity(n, order);
    let mut term = CMat::identity(n, order);
    for k in 1..=64 {
        term = (&term * &x).scale_real(1.0 / f64::from(k));
        sum = &sum + &term;
        if term.max_abs() < SERIES_CUTOFF {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    Ok(sum)
}

/// Four components carrying one Lorentz index.
#[derive(Clone, Debug, PartialEq)]
pub struct LorentzCoVec<T>(pub [T; 4]);

impl<T> Index<usize> for LorentzCoVec<T> {
    type Output = T;
    fn index(&self, mu: usize) -> &T {
        &self.0[mu]
    }
}

impl<T> IndexMut<usize> for LorentzCoVec<T> {
    fn index_mut(&mut self, mu: usize) -> &mut T {
        &mut self.0[mu]
    }
}

impl<T> LorentzCoVec<T> {
    pub fn from_fn(f: impl FnMut(usize) -> T) -> Self {
        Self(std::array::from_fn(f))
    }

    pub fn try_from_fn(mut f: impl FnMut(usize) -> Result<T>) -> Result<Self> {
        Ok(Self([f(0)?, f(1)?, f(2)?, f(3)?]))
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> LorentzCoVec<U> {
        LorentzCoVec::from_fn(|mu| f(&self.0[mu]))
    }
}

impl<T: Entry> LorentzCoVec<T> {
    /// Same components with the index moved by the metric.
    pub fn raised(&self, metric: Metric) -> Self {
        Self::from_fn(|mu| self.0[mu].scale_real(metric.diag(mu)))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, c| m.max(c.max_abs()))
    }
}

/// 4×4 components with two Lorentz indices.
#[derive(Clone, Debug, PartialEq)]
pub struct LorentzTensor2<T> {
    comps: [[T; 4]; 4],
    skew: bool,
}

impl<T> LorentzTensor2<T> {
    pub fn from_fn(mut f: impl FnMut(usize, usize) -> T) -> Self {
        Self {
            comps: std::array::from_fn(|mu| std::array::from_fn(|nu| f(mu, nu))),
            skew: false,
        }
    }

    pub fn is_skew(&self) -> bool {
        self.skew
    }

    pub fn get(&self, mu: usize, nu: usize) -> &T {
        &self.comps[mu][nu]
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> LorentzTensor2<U> {
        LorentzTensor2 {
            comps: std::array::from_fn(|mu| std::array::from_fn(|nu| f(&self.comps[mu][nu]))),
            skew: self.skew,
        }
    }
}

impl<T: Entry> LorentzTensor2<T> {
    /// Skew tensor from the components with μ < ν; the rest follow by sign.
    pub fn skew_from_fn(mut upper: impl FnMut(usize, usize) -> T) -> Self {
        let mut slots: [[Option<T>; 4]; 4] = Default::default();
        for mu in 0..4 {
            for nu in mu + 1..4 {
                let x = upper(mu, nu);
                slots[nu][mu] = Some(x.neg());
                slots[mu][nu] = Some(x);
            }
        }
        let zero = slots[0][1].as_ref().map(Entry::zeros_like);
        let comps = std::array::from_fn(|mu| {
            std::array::from_fn(|nu| {
                slots[mu][nu]
                    .take()
                    .unwrap_or_else(|| zero.clone().expect("tensor has off-diagonal slots"))
            })
        });
        Self { comps, skew: true }
    }

    pub fn try_skew_from_fn(mut upper: impl FnMut(usize, usize) -> Result<T>) -> Result<Self> {
        let mut vals: Vec<(usize, usize, T)> = Vec::with_capacity(6);
        for mu in 0..4 {
            for nu in mu + 1..4 {
                vals.push((mu, nu, upper(mu, nu)?));
            }
        }
        let mut it = vals.into_iter();
        Ok(Self::skew_from_fn(|_, _| {
            it.next().map(|(_, _, x)| x).expect("six slots")
        }))
    }

    /// Sets the skew flag when X_μν = −X_νμ holds bit for bit.
    pub fn mark_skew_if_exact(mut self) -> Self {
        self.skew = self.skew_defect() == 0.0;
        self
    }

    /// Both indices moved by the metric.
    pub fn raised(&self, metric: Metric) -> Self {
        Self {
            comps: std::array::from_fn(|mu| {
                std::array::from_fn(|nu| {
                    self.comps[mu][nu].scale_real(metric.diag(mu) * metric.diag(nu))
                })
            }),
            skew: self.skew,
        }
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.map(|x| x.scale_real(c))
    }

    pub fn plus(&self, other: &Self) -> Self {
        Self {
            comps: std::array::from_fn(|mu| {
                std::array::from_fn(|nu| self.comps[mu][nu].plus(&other.comps[mu][nu]))
            }),
            skew: self.skew && other.skew,
        }
    }

    /// max over μν of |X_μν + X_νμ|.
    pub fn skew_defect(&self) -> f64 {
        let mut m: f64 = 0.0;
        for mu in 0..4 {
            for nu in 0..4 {
                m = m.max(self.comps[mu][nu].plus(&self.comps[nu][mu]).max_abs());
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flatten()
            .fold(0.0, |m, c| m.max(c.max_abs()))
    }
}

impl<T> Index<(usize, usize)> for LorentzTensor2<T> {
    type Output = T;
    fn index(&self, (mu, nu): (usize, usize)) -> &T {
        &self.comps[mu][nu]
    }
}

/// Σ_α g^αα x_α·y_α for two lower-index covectors.
pub fn contract_vec<A: Entry, B: Entry>(
    x: &LorentzCoVec<A>,
    y: &LorentzCoVec<B>,
    metric: Metric,
    pair: impl Fn(&A, &B) -> Jet,
) -> Result<Jet> {
    check_dim(x[0].dim(), y[0].dim())?;
    let mut acc = pair(&x[0], &y[0]).scale_real(metric.diag(0));
    for a in 1..4 {
        acc += pair(&x[a], &y[a]).scale_real(metric.diag(a));
    }
    Ok(acc)
}

/// Σ_αβ g^αα g^ββ x_αβ·y_αβ for two tensors with both indices down.
pub fn contract<A: Entry, B: Entry>(
    x: &LorentzTensor2<A>,
    y: &LorentzTensor2<B>,
    metric: Metric,
    pair: impl Fn(&A, &B) -> Jet,
) -> Result<Jet> {
    check_dim(x[(0, 0)].dim(), y[(0, 0)].dim())?;
    let mut acc: Option<Jet> = None;
    for a in 0..4 {
        for b in 0..4 {
            let t = pair(&x[(a, b)], &y[(a, b)]).scale_real(metric.diag(a) * metric.diag(b));
            acc = Some(match acc {
                Some(s) => s + t,
                None => t,
            });
        }
    }
    Ok(acc.expect("sixteen terms"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn mat(n: usize, seed: u64) -> CMat {
        // cheap deterministic entries
        let mut s = seed;
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let vals: Vec<C64> = (0..n * n).map(|_| c(next(), next())).collect();
        CMat::from_values(n, &vals, Order::Two)
    }

    #[test]
    fn metric_signature() {
        assert_eq!(metric(0, 0), 1.0);
        assert_eq!(metric(1, 1), -1.0);
        assert_eq!(metric(0, 1), 0.0);
        assert_eq!(Metric::MostlyPlus.g(0, 0), -1.0);
        assert_eq!(Metric::MostlyPlus.g(3, 3), 1.0);
    }

    #[test]
    fn timelike_and_spacelike_norms() {
        let o = Order::Zero;
        let e =
            |k: usize| LorentzCoVec::from_fn(|mu| Jet::real(if mu == k { 1.0 } else { 0.0 }, o));
        let sq = |v: &LorentzCoVec<Jet>| {
            contract_vec(v, v, Metric::MostlyMinus, |a, b| *a * *b).unwrap()
        };
        assert_eq!(sq(&e(0)).value(), c(1.0, 0.0));
        assert_eq!(sq(&e(1)).value(), c(-1.0, 0.0));
    }

    #[test]
    fn raise_twice_is_identity() {
        let v = LorentzCoVec::from_fn(|mu| Jet::real(mu as f64 + 0.5, Order::One));
        for m in [Metric::MostlyMinus, Metric::MostlyPlus] {
            assert_eq!(v.raised(m).raised(m), v);
        }
    }

    #[test]
    fn adjoint_basics() {
        let i = CMat::identity(3, Order::Two);
        assert_eq!(i.adjoint(), i);
        let ii = i.scale(c(0.0, 1.0));
        assert_eq!(ii.adjoint(), i.scale(c(0.0, -1.0)));
    }

    #[test]
    fn adjoint_of_product() {
        let a = mat(3, 1);
        let b = mat(3, 2);
        let lhs = (&a * &b).adjoint();
        let rhs = &b.adjoint() * &a.adjoint();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            assert!((x - y).norm() <= 1e-14 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let u = mat_exp_i_hermitian(&CMat::zeros(2, Order::Two)).unwrap();
        assert_eq!(u, CMat::identity(2, Order::Two));
    }

    #[test]
    fn exp_n1_matches_cos_plus_i_sin() {
        let p = crate::jets::SpacetimePoint([0.7, -0.2, 0.4, 0.1]);
        let t = Jet::seed_coordinate(0, &p, Order::Two);
        let x = Jet::seed_coordinate(1, &p, Order::Two);
        let lambda = t * t.scale_real(1.3) + x.sin().scale_real(2.0);
        let h = CMat::from_fn(1, |_, _| lambda);
        let u = mat_exp_i_hermitian(&h).unwrap();
        let want = lambda.cos() + lambda.sin().scale(c(0.0, 1.0));
        let got = u[(0, 0)];
        let rel = |a: C64, b: C64| (a - b).norm() / (1.0 + b.norm());
        assert!(rel(got.value(), want.value()) < 1e-13);
        for mu in 0..4 {
            assert!(rel(got.grad(mu), want.grad(mu)) < 1e-13);
            for nu in 0..4 {
                assert!(rel(got.hess(mu, nu), want.hess(mu, nu)) < 1e-13);
            }
        }
    }

    #[test]
    fn exp_of_hermitian_is_unitary() {
        for seed in 0..8 {
            let h = mat(2, seed).hermitian_part().scale_real(3.0);
            let u = mat_exp_i_hermitian(&h).unwrap();
            assert!(u.unitarity_defect() < 1e-12);
            assert!((u.det_value().unwrap().norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn exp_rejects_non_hermitian() {
        let err = mat_exp_i_hermitian(&mat(2, 5)).unwrap_err();
        assert!(matches!(err, Error::NotHermitian { .. }));
    }

    #[test]
    fn det_of_known_matrix() {
        let m = CMat::from_values(
            2,
            &[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)],
            Order::Zero,
        );
        assert!((m.det_value().unwrap() - c(-2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn skew_constructor_is_exact() {
        let f = LorentzTensor2::skew_from_fn(|mu, nu| {
            Jet::real((mu * 4 + nu) as f64 * 0.37, Order::One)
        });
        assert!(f.is_skew());
        for mu in 0..4 {
            for nu in 0..4 {
                assert_eq!(f[(mu, nu)] + f[(nu, mu)], Jet::zero(Order::One));
            }
        }
    }

    #[test]
    fn tensor_contraction_matches_double_loop() {
        let m = mat(1, 11);
        let base = m.values()[0];
        let f = LorentzTensor2::from_fn(|a, b| {
            Jet::constant(base * c((a + 1) as f64, (b as f64) - 1.5), Order::Zero)
        });
        let got = contract(&f, &f, Metric::MostlyMinus, |x, y| *x * *y)
            .unwrap()
            .value();
        let mut want = c(0.0, 0.0);
        for a in 0..4 {
            for b in 0..4 {
                for g in 0..4 {
                    for d in 0..4 {
                        want += metric(a, g) * metric(b, d) * f[(g, d)].value() * f[(a, b)].value();
                    }
                }
            }
        }
        assert!((got - want).norm() <= 1e-14 * (1.0 + want.norm()));
    }

    #[test]
    fn contraction_dimension_mismatch() {
        let x = LorentzCoVec::from_fn(|_| CVec::zeros(2, Order::Zero));
        let y = LorentzCoVec::from_fn(|_| CVec::zeros(3, Order::Zero));
        let err =
            contract_vec(&x, &y, Metric::MostlyMinus, |a, b| a.adjoint().0[0] * b[0]).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                expected: 2,
                found: 3
            }
        );
    }
}
