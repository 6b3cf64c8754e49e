//! Scenarios, the check suite and the finite-difference oracle.
//!
//! A scenario fixes the coupling data, the field expressions and a gauge
//! map. [`run_suite`] samples points, evaluates every check at each point
//! and reduces to one row per check with the scale-free residual
//! `|lhs − rhs| / (1 + |lhs| + |rhs|)` maximised over points.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    canonical_eq_base_residual, canonical_momenta, covariant_derivatives, divergence_closed_form,
    explicit_divergence_f2, field_tensor_f_abelian, field_tensors, hamiltonian_gauge,
    hamiltonian_h2, legendre_check, momentum_p, physical_densities, proca_residual,
    proca_residual_from, split_renormalizable, FieldTensors, Variant,
};
use crate::error::{Error, Result};
use crate::fieldexpr::FieldExpr;
use crate::gaugemap::{
    eval_gauge_map, p_combination, transform_base, transform_fields, transform_gauge_a,
    transform_gauge_a_components, transform_momenta_pq, CouplingData, FieldState, GaugeMapSpec,
    Generator, MapAtPoint, MomentumState,
};
use crate::jets::{Jet, Order, SpacetimePoint, C64};
use crate::tensoralg::{CMat, CRow, CVec, LorentzCoVec, LorentzTensor2, Metric};

/// Environment variable capping the worker threads of [`run_suite`].
pub const THREADS_ENV: &str = "GAUGE_FORGE_THREADS";

/// Relative perturbation applied to M in the mass-matrix negative control.
pub const MASS_PERTURBATION: f64 = 1e-3;

/// Fixed expressions used for the derivative oracle.
pub const AD_CORPUS: [&str; 10] = [
    "t*x*y - 0.5*z^3",
    "sin(2*x) * cos(t - y)",
    "exp(0.3*t + 0.1*x^2)",
    "(0.4 - 0.7i)*t^2*z + i*y",
    "conj((1 + 2i)*x*y) + exp(i*t)",
    "1/(2 + sin(x*y))",
    "(3 + t*x)^(-2)",
    "cos(z)^3 - sin(t*y)^2",
    "exp(-(x^2 + y^2)) * sin(pi*t)",
    "x0*x1 + x2*x3 - 0.25*pi",
];

/// Scale-free residual between two numbers.
pub fn rel(lhs: C64, rhs: C64) -> f64 {
    (lhs - rhs).norm() / (1.0 + lhs.norm() + rhs.norm())
}

fn rel_slices(lhs: &[C64], rhs: &[C64]) -> f64 {
    lhs.iter()
        .zip(rhs)
        .fold(0.0, |m, (a, b)| m.max(rel(*a, *b)))
}

/// Field expressions of a scenario. `a_raw[μ]` is an N×N matrix whose
/// Hermitian part is taken.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldExprs {
    pub phi: Vec<FieldExpr>,
    pub a_raw: [Vec<Vec<FieldExpr>>; 4],
    pub b: [Vec<FieldExpr>; 4],
}

impl FieldExprs {
    pub fn n(&self) -> usize {
        self.phi.len()
    }

    pub fn eval(&self, p: &SpacetimePoint, order: Order) -> Result<FieldState> {
        let n = self.n();
        let eval_all = |v: &[FieldExpr]| -> Result<CVec> {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
            Ok(CVec(
                v.iter().map(|e| e.eval(p, order)).collect::<Result<_>>()?,
            ))
        };
        let phi = eval_all(&self.phi)?;
        let b = LorentzCoVec::try_from_fn(|mu| eval_all(&self.b[mu]))?;
        let a = LorentzCoVec::try_from_fn(|mu| {
            let rows = &self.a_raw[mu];
            if rows.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: rows.len(),
                });
            }
            let mut m = CMat::zeros(n, order);
            for (i, row) in rows.iter().enumerate() {
                let r = eval_all(row)?;
                for j in 0..n {
                    m[(i, j)] = r[j];
                }
            }
            Ok(m.hermitian_part())
        })?;
        Ok(FieldState { phi, a, b })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub points: usize,
    #[serde(rename = "box")]
    pub bounds: [[f64; 2]; 4],
    pub seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            points: 20,
            bounds: [[-1.0, 1.0]; 4],
            seed: 0,
        }
    }
}

impl Sampling {
    pub fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::config(
                "/sampling/points",
                "at least one point is required",
            ));
        }
        for (mu, [lo, hi]) in self.bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::config(
                    format!("/sampling/box/{mu}"),
                    format!("invalid interval [{lo}, {hi}]"),
                ));
            }
        }
        Ok(())
    }

    /// Uniform points in the box from the seeded generator.
    pub fn draw_points(&self) -> Vec<SpacetimePoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.points)
            .map(|_| {
                SpacetimePoint(std::array::from_fn(|mu| {
                    let [lo, hi] = self.bounds[mu];
                    if lo == hi {
                        lo
                    } else {
                        rng.random_range(lo..=hi)
                    }
                }))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub unitarity: f64,
    pub orthogonality: f64,
    pub roundtrip: f64,
    pub hermiticity: f64,
    pub dual_form: f64,
    pub covariance: f64,
    pub invariance: f64,
    pub divergence: f64,
    pub variant: f64,
    pub split: f64,
    pub zero_coupling: f64,
    pub legendre: f64,
    pub reality: f64,
    pub closed_form: f64,
    pub proca: f64,
    pub vacuum: f64,
    pub oracle: f64,
    pub oracle_step: f64,
    pub negative_commutator: f64,
    pub negative_mass: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            unitarity: 1e-10,
            orthogonality: 1e-10,
            roundtrip: 1e-12,
            hermiticity: 1e-10,
            dual_form: 1e-12,
            covariance: 1e-11,
            invariance: 1e-10,
            divergence: 1e-9,
            variant: 1e-12,
            split: 1e-12,
            zero_coupling: 1e-14,
            legendre: 1e-10,
            reality: 1e-10,
            closed_form: 1e-12,
            proca: 1e-9,
            vacuum: 1e-13,
            oracle: 1e-5,
            oracle_step: 1e-4,
            negative_commutator: 1e-3,
            negative_mass: 1e-5,
        }
    }
}

impl Tolerances {
    /// Every pass threshold set to `tol`; negative-control thresholds and
    /// the finite-difference step are left alone.
    pub fn override_all(&mut self, tol: f64) {
        let Self {
            unitarity,
            orthogonality,
            roundtrip,
            hermiticity,
            dual_form,
            covariance,
            invariance,
            divergence,
            variant,
            split,
            zero_coupling,
            legendre,
            reality,
            closed_form,
            proca,
            vacuum,
            oracle,
            oracle_step: _,
            negative_commutator: _,
            negative_mass: _,
        } = self;
        for t in [
            unitarity,
            orthogonality,
            roundtrip,
            hermiticity,
            dual_form,
            covariance,
            invariance,
            divergence,
            variant,
            split,
            zero_coupling,
            legendre,
            reality,
            closed_form,
            proca,
            vacuum,
            oracle,
        ] {
            *t = tol;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub coupling: CouplingData,
    pub fields: FieldExprs,
    pub map: GaugeMapSpec,
    pub sampling: Sampling,
    pub tolerances: Tolerances,
}

impl Scenario {
    /// Structural checks. Orthogonality of M is reported by the suite, not here.
    pub fn validate(&self) -> Result<()> {
        let n = self.coupling.n();
        if self.fields.n() != n {
            return Err(Error::config(
                "/phi",
                format!("expected {n} components, found {}", self.fields.n()),
            ));
        }
        if self.map.n() != n {
            return Err(Error::config(
                "/map/shift",
                format!("expected {n} components, found {}", self.map.n()),
            ));
        }
        for mu in 0..4 {
            if self.fields.b[mu].len() != n {
                return Err(Error::config(
                    format!("/b/{mu}"),
                    format!("expected {n} components"),
                ));
            }
            if self.fields.a_raw[mu].len() != n
                || self.fields.a_raw[mu].iter().any(|r| r.len() != n)
            {
                return Err(Error::config(
                    format!("/a_raw/{mu}"),
                    format!("expected a {n}×{n} matrix"),
                ));
            }
        }
        self.map.validate()?;
        self.sampling.validate()
    }
}

fn coefficient(rng: &mut ChaCha8Rng, complex: bool) -> String {
    let re: f64 = rng.random_range(-1.0..=1.0);
    if !complex {
        return format!("({re:.4})");
    }
    let im: f64 = rng.random_range(-1.0..=1.0);
    let sign = if im < 0.0 { '-' } else { '+' };
    format!("({re:.4} {sign} {:.4}i)", im.abs())
}

const COORDS: [&str; 4] = ["t", "x", "y", "z"];

/// Source text of a random polynomial (degree ≤ 3) plus trigonometric term.
pub fn random_expression_source(rng: &mut ChaCha8Rng, complex: bool) -> String {
    let mut terms = Vec::new();
    for _ in 0..rng.random_range(2..=3) {
        let degree = rng.random_range(0..=3);
        let mut term = coefficient(rng, complex);
        for _ in 0..degree {
            term.push('*');
            term.push_str(COORDS[rng.random_range(0..4)]);
        }
        terms.push(term);
    }
    for _ in 0..rng.random_range(1..=2) {
        let func = if rng.random_bool(0.5) { "sin" } else { "cos" };
        let freq = rng.random_range(1..=2);
        let coord = COORDS[rng.random_range(0..4)];
        let phase: f64 = rng.random_range(-1.0..=1.0);
        terms.push(format!(
            "{}*{func}({freq}*{coord} + ({phase:.4}))",
            coefficient(rng, complex)
        ));
    }
    terms.join(" + ")
}

fn random_expression(rng: &mut ChaCha8Rng, complex: bool) -> FieldExpr {
    FieldExpr::parse(&random_expression_source(rng, complex))
        .expect("generated expressions are well-formed")
}

/// Scalar times a product of Givens rotations.
fn random_mass_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let mut r = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let th: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let mut giv = DMatrix::<f64>::identity(n, n);
            giv[(i, i)] = th.cos();
            giv[(j, j)] = th.cos();
            giv[(i, j)] = -th.sin();
            giv[(j, i)] = th.sin();
            r = giv * r;
        }
    }
    let scale: f64 = rng.random_range(0.5..=2.0);
    r * scale
}

/// A seeded random scenario with N in 1..=MAX_N (sizes beyond 3 are slow).
pub fn random_scenario(n: usize, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let n = n.clamp(1, crate::tensoralg::MAX_N);
    let g = rng.random_range(0.1..=2.0);
    let m = random_mass_matrix(&mut rng, n);
    let coupling = CouplingData::new(g, m, Metric::MostlyMinus)
        .expect("scaled rotations are orthogonal up to scale");
    let phi = (0..n).map(|_| random_expression(&mut rng, true)).collect();
    let a_raw = std::array::from_fn(|_| {
        (0..n)
            .map(|_| (0..n).map(|_| random_expression(&mut rng, true)).collect())
            .collect()
    });
    let b = std::array::from_fn(|_| (0..n).map(|_| random_expression(&mut rng, true)).collect());
    let generator = Generator::Matrix(
        (0..n)
            .map(|i| {
                (i..n)
                    .map(|j| random_expression(&mut rng, i != j))
                    .collect()
            })
            .collect(),
    );
    let shift = (0..n).map(|_| random_expression(&mut rng, true)).collect();
    Scenario {
        name: format!("random-N{n}-seed{seed}"),
        coupling,
        fields: FieldExprs { phi, a_raw, b },
        map: GaugeMapSpec { generator, shift },
        sampling: Sampling {
            seed,
            ..Sampling::default()
        },
        tolerances: Tolerances::default(),
    }
}

/// Maximum scale-free error of jet gradients and Hessians against central
/// differences of the order-0 evaluation.
pub fn finite_difference_oracle(
    exprs: &[FieldExpr],
    points: &[SpacetimePoint],
    step: f64,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for e in exprs {
        for p in points {
            let jet = e.eval(p, Order::Two)?;
            let f = |q: SpacetimePoint| e.eval(&q, Order::Zero).map(|j| j.value());
            for mu in 0..4 {
                let fd = (f(p.shifted(mu, step))? - f(p.shifted(mu, -step))?) / (2.0 * step);
                worst = worst.max(rel(jet.grad(mu), fd));
                for nu in 0..4 {
                    let pp = p.shifted(mu, step).shifted(nu, step);
                    let pm = p.shifted(mu, step).shifted(nu, -step);
                    let mp = p.shifted(mu, -step).shifted(nu, step);
                    let mm = p.shifted(mu, -step).shifted(nu, -step);
                    let fd2 = (f(pp)? - f(pm)? - f(mp)? + f(mm)?) / (4.0 * step * step);
                    worst = worst.max(rel(jet.hess(mu, nu), fd2));
                }
            }
        }
    }
    Ok(worst)
}

/// Stable identifiers of the suite's checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CheckId {
    UUnitarity,
    MOrthogonality,
    BaseRoundtrip,
    GaugeFieldHermiticity,
    GaugeADualForm,
    CovariantDerivativeCovariance,
    FCovariance,
    QCovariance,
    PCombinationCovariance,
    QbarqInvariance,
    L3KgInvariance,
    F2DivergenceIdentity,
    H2TransformationRule,
    HgTransformationRule,
    HgVariantEquivalence,
    MomentumSkewness,
    SplitIdentity,
    LnrZeroCoupling,
    LegendreConsistency,
    Reality,
    N1ClosedForms,
    ProcaCovariance,
    ProcaConstantB,
    CanonicalBaseEquation,
    NegativeControlCommutator,
    NegativeControlMassMatrix,
    AdFiniteDifference,
}

const CHECK_COUNT: usize = 27;

impl CheckId {
    pub const ALL: [CheckId; CHECK_COUNT] = [
        CheckId::UUnitarity,
        CheckId::MOrthogonality,
        CheckId::BaseRoundtrip,
        CheckId::GaugeFieldHermiticity,
        CheckId::GaugeADualForm,
        CheckId::CovariantDerivativeCovariance,
        CheckId::FCovariance,
        CheckId::QCovariance,
        CheckId::PCombinationCovariance,
        CheckId::QbarqInvariance,
        CheckId::L3KgInvariance,
        CheckId::F2DivergenceIdentity,
        CheckId::H2TransformationRule,
        CheckId::HgTransformationRule,
        CheckId::HgVariantEquivalence,
        CheckId::MomentumSkewness,
        CheckId::SplitIdentity,
        CheckId::LnrZeroCoupling,
        CheckId::LegendreConsistency,
        CheckId::Reality,
        CheckId::N1ClosedForms,
        CheckId::ProcaCovariance,
        CheckId::ProcaConstantB,
        CheckId::CanonicalBaseEquation,
        CheckId::NegativeControlCommutator,
        CheckId::NegativeControlMassMatrix,
        CheckId::AdFiniteDifference,
    ];

    fn index(self) -> usize {
        Self::ALL.iter().position(|c| *c == self).expect("listed")
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CheckId::UUnitarity => "U-unitarity",
            CheckId::MOrthogonality => "M-orthogonality",
            CheckId::BaseRoundtrip => "base-roundtrip",
            CheckId::GaugeFieldHermiticity => "gauge-field-hermiticity",
            CheckId::GaugeADualForm => "gauge-a-dual-form",
            CheckId::CovariantDerivativeCovariance => "covariant-derivative-covariance",
            CheckId::FCovariance => "f-covariance",
            CheckId::QCovariance => "q-covariance",
            CheckId::PCombinationCovariance => "p-combination-covariance",
            CheckId::QbarqInvariance => "qbarq-invariance",
            CheckId::L3KgInvariance => "L3KG-invariance",
            CheckId::F2DivergenceIdentity => "F2-divergence-identity",
            CheckId::H2TransformationRule => "H2-transformation-rule",
            CheckId::HgTransformationRule => "Hg-transformation-rule",
            CheckId::HgVariantEquivalence => "Hg-variant-equivalence",
            CheckId::MomentumSkewness => "momentum-skewness",
            CheckId::SplitIdentity => "split-identity",
            CheckId::LnrZeroCoupling => "Lnr-zero-coupling",
            CheckId::LegendreConsistency => "legendre-consistency",
            CheckId::Reality => "reality",
            CheckId::N1ClosedForms => "N1-closed-forms",
            CheckId::ProcaCovariance => "proca-covariance",
            CheckId::ProcaConstantB => "proca-constant-b",
            CheckId::CanonicalBaseEquation => "canonical-base-equation",
            CheckId::NegativeControlCommutator => "negative-control-commutator",
            CheckId::NegativeControlMassMatrix => "negative-control-mass-matrix",
            CheckId::AdFiniteDifference => "ad-finite-difference",
        }
    }

    pub fn equation(self) -> &'static str {
        match self {
            CheckId::UUnitarity => "Eq. (general-pointtra-inhom)",
            CheckId::MOrthogonality | CheckId::NegativeControlMassMatrix => "Eq. (massmatrixcond)",
            CheckId::BaseRoundtrip => "Eq. (pointtra-rules-inhom)",
            CheckId::GaugeFieldHermiticity => "Eq. (gauge-tra1-inhom-matr)",
            CheckId::GaugeADualForm => "Eq. (gauge-tra1-inhom)",
            CheckId::CovariantDerivativeCovariance => "Eq. (minimum-coupling-rule-inhom)",
            CheckId::FCovariance | CheckId::NegativeControlCommutator => "Eq. (lag-field-tensor)",
            CheckId::QCovariance => "Eq. (general-pointtra-gf-deri-inhom-matr)",
            CheckId::PCombinationCovariance => "Eq. (p-rule-imhom)",
            CheckId::QbarqInvariance => "Eq. (H-kin)",
            CheckId::L3KgInvariance | CheckId::SplitIdentity | CheckId::LnrZeroCoupling => {
                "Eq. (hd-kg3)"
            }
            CheckId::F2DivergenceIdentity => "Eq. (H-deri-expl-inhom)",
            CheckId::H2TransformationRule => "Eq. (amended-Hp-inhom)",
            CheckId::HgTransformationRule | CheckId::Reality => "Eq. (H-tilde-inhom)",
            CheckId::HgVariantEquivalence => "Eq. (H-g2-inhom)",
            CheckId::MomentumSkewness => "Eq. (can-momentum-gf-inhom)",
            CheckId::LegendreConsistency => "Eq. (general-invariant-lagrangian-inhom)",
            CheckId::N1ClosedForms => "N=1 combined local gauge transformation",
            CheckId::ProcaCovariance | CheckId::ProcaConstantB => "Proca equation",
            CheckId::CanonicalBaseEquation => "Eq. (feqs-phideri-inhom)",
            CheckId::AdFiniteDifference => "jet arithmetic",
        }
    }

    /// What the check compares, for `explain`.
    pub fn formula(self) -> &'static str {
        match self {
            CheckId::UUnitarity => "U = exp(iH) with H Hermitian: max |U U† − I| and ||det U| − 1|",
            CheckId::MOrthogonality => "M Mᵀ = s² I with s² = tr(M Mᵀ)/N, relative defect",
            CheckId::BaseRoundtrip => {
                "φ = U†(Φ − φ̂), π = U†Π, and the inverse rules for p and q recover the originals"
            }
            CheckId::GaugeFieldHermiticity => "a_μ and A_μ = U a_μ U† + (1/ig) ∂_μU U† are Hermitian",
            CheckId::GaugeADualForm => "A_μ from the matrix rule equals A_IJμ summed over explicit indices",
            CheckId::CovariantDerivativeCovariance => {
                "∂_μΦ − ig A_μΦ − M B_μ = U (∂_μφ − ig a_μφ − M b_μ)"
            }
            CheckId::FCovariance => "f_μν = U† F_μν U with f_μν = ∂_μa_ν − ∂_νa_μ + ig(a_ν a_μ − a_μ a_ν)",
            CheckId::QCovariance => "M Q_μν = U M q_μν, Q built from the transformed fields",
            CheckId::PCombinationCovariance => {
                "K = p + ig M̃ᵀq⊗φ̄ − ig φ⊗q̄M̃ equals f, K' = U K U†, and P from fields equals P from the rule"
            }
            CheckId::QbarqInvariance => "Q̄^αβ Q_αβ = q̄^αβ q_αβ with Q built from the transformed fields",
            CheckId::L3KgInvariance => {
                "L = π̄^α π_α − ¼ Tr(f^αβ f_αβ) − ½ q̄^αβ q_αβ takes the same value on transformed fields"
            }
            CheckId::F2DivergenceIdentity => {
                "divergence of the explicit part of F̃₂ from U, φ̂ and derivatives equals its form in canonical variables"
            }
            CheckId::H2TransformationRule => "H₂' − H₂ equals the explicit divergence",
            CheckId::HgTransformationRule => {
                "H_g' − H_g equals the explicit divergence (H_KG and H_kin are invariant)"
            }
            CheckId::HgVariantEquivalence => "full and reduced H_g agree for skew momenta, original and transformed",
            CheckId::MomentumSkewness => "p, q, q̄ and their transforms satisfy X_μν + X_νμ = 0 bit for bit",
            CheckId::SplitIdentity => "L_r + L_nr = L3_KG with L_r built from h = q − ig M̃ f φ",
            CheckId::LnrZeroCoupling => "L_nr = 0 when g = 0",
            CheckId::LegendreConsistency => {
                "p·∂a + q̄·∂b + ∂b̄·q − H_g equals the closed gauge Lagrangian, and L3 from it equals L3_KG"
            }
            CheckId::Reality => "every Hamiltonian and Lagrangian density has |Im| ≤ tol·(1 + |Re|)",
            CheckId::N1ClosedForms => {
                "N = 1: U = e^{iΛ}, A = a + ∂Λ/g, B = b e^{iΛ} − (ig/m)(a + ∂Λ/g)φ̂ + ∂φ̂/m, Q = q e^{iΛ}"
            }
            CheckId::ProcaCovariance => {
                "r^μ = ∂_α q^μα − ig Mᵀ a_α M̃ᵀ q^μα + Mᵀ(∂^μφ − ig a^μφ) − MᵀM b^μ satisfies M̃ᵀ r' = U M̃ᵀ r"
            }
            CheckId::ProcaConstantB => "φ = 0, a = 0, constant b: r^μ = −MᵀM b^μ",
            CheckId::CanonicalBaseEquation => {
                "∂_μφ − π_μ − ig a_μφ − M b_μ vanishes for minimal coupling and transforms with U"
            }
            CheckId::NegativeControlCommutator => {
                "dropping the commutator from f must break f-covariance under a fixed non-Abelian map"
            }
            CheckId::NegativeControlMassMatrix => {
                "perturbing M off the orthogonal set by 1e-3 must break Q̄Q = q̄q"
            }
            CheckId::AdFiniteDifference => {
                "jet gradients and Hessians match central differences of plain evaluation"
            }
        }
    }

    /// Negative controls pass when the residual exceeds the threshold.
    pub fn is_negative_control(self) -> bool {
        matches!(
            self,
            CheckId::NegativeControlCommutator | CheckId::NegativeControlMassMatrix
        )
    }

    pub fn tolerance(self, t: &Tolerances) -> f64 {
        match self {
            CheckId::UUnitarity => t.unitarity,
            CheckId::MOrthogonality => t.orthogonality,
            CheckId::BaseRoundtrip => t.roundtrip,
            CheckId::GaugeFieldHermiticity => t.hermiticity,
            CheckId::GaugeADualForm => t.dual_form,
            CheckId::CovariantDerivativeCovariance
            | CheckId::FCovariance
            | CheckId::QCovariance
            | CheckId::PCombinationCovariance
            | CheckId::CanonicalBaseEquation => t.covariance,
            CheckId::QbarqInvariance | CheckId::L3KgInvariance => t.invariance,
            CheckId::F2DivergenceIdentity
            | CheckId::H2TransformationRule
            | CheckId::HgTransformationRule => t.divergence,
            CheckId::HgVariantEquivalence => t.variant,
            CheckId::MomentumSkewness => 0.0,
            CheckId::SplitIdentity => t.split,
            CheckId::LnrZeroCoupling => t.zero_coupling,
            CheckId::LegendreConsistency => t.legendre,
            CheckId::Reality => t.reality,
            CheckId::N1ClosedForms => t.closed_form,
            CheckId::ProcaCovariance => t.proca,
            CheckId::ProcaConstantB => t.vacuum,
            CheckId::NegativeControlCommutator => t.negative_commutator,
            CheckId::NegativeControlMassMatrix => t.negative_mass,
            CheckId::AdFiniteDifference => t.oracle,
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for CheckId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl FromStr for CheckId {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        CheckId::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown check id `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRow {
    pub id: CheckId,
    pub equation: &'static str,
    pub points: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    /// `"<="` for ordinary checks, `">"` for negative controls.
    pub comparison: &'static str,
    pub applicable: bool,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub scenario: String,
    pub n: usize,
    pub rows: Vec<CheckRow>,
    pub pass: bool,
    pub runtime_ms: f64,
}

impl CheckReport {
    pub fn row(&self, id: CheckId) -> &CheckRow {
        &self.rows[id.index()]
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| !r.pass)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Outcome {
    Value(f64),
    NotApplicable,
    Failed(String),
}

type Outcomes = [Outcome; CHECK_COUNT];

struct Recorder(Outcomes);

impl Recorder {
    fn new() -> Self {
        Self(std::array::from_fn(|_| {
            Outcome::Failed("not evaluated".into())
        }))
    }

    fn set(&mut self, id: CheckId, r: Result<f64>) {
        self.0[id.index()] = match r {
            Ok(v) if v.is_nan() => Outcome::Failed("residual is NaN".into()),
            Ok(v) => Outcome::Value(v),
            Err(e) => Outcome::Failed(e.to_string()),
        };
    }

    fn na(&mut self, id: CheckId) {
        self.0[id.index()] = Outcome::NotApplicable;
    }

    fn fail_all(&mut self, ids: &[CheckId], e: &Error) {
        for id in ids {
            self.0[id.index()] = Outcome::Failed(e.to_string());
        }
    }
}

fn vec_rel(a: &CVec, b: &CVec) -> f64 {
    rel_slices(&a.values(), &b.values())
}

fn mat_rel(a: &CMat, b: &CMat) -> f64 {
    rel_slices(&a.values(), &b.values())
}

fn pairs() -> impl Iterator<Item = (usize, usize)> {
    (0..4).flat_map(|a| (0..4).map(move |b| (a, b)))
}

fn tensor_rel<T>(a: &LorentzTensor2<T>, b: &LorentzTensor2<T>, f: impl Fn(&T, &T) -> f64) -> f64 {
    pairs().fold(0.0, |m, (x, y)| m.max(f(&a[(x, y)], &b[(x, y)])))
}

/// The fixed non-Abelian map used by the negative controls.
pub fn control_map(n: usize) -> GaugeMapSpec {
    let e = |s: String| FieldExpr::parse(&s).expect("control expressions are well-formed");
    let generator = Generator::Matrix(
        (0..n)
            .map(|i| {
                (i..n)
                    .map(|j| {
                        if i == j {
                            e(format!("0.7*t + 0.3*x*y - {:.1}*z", 0.2 * (i as f64 + 1.0)))
                        } else {
                            e(format!(
                                "(0.5 + 0.4i)*sin(y + t) + 0.3*z*x + {:.1}*t*y",
                                0.1 * (i + j) as f64
                            ))
                        }
                    })
                    .collect()
            })
            .collect(),
    );
    let shift = (0..n)
        .map(|i| e(format!("0.4*t*x - 0.2i*z + {:.1}*y", 0.1 * i as f64)))
        .collect();
    GaugeMapSpec { generator, shift }
}

/// M·(I + ε·e₀e₀ᵀ): leaves the orthogonal set for N ≥ 2.
pub fn perturbed_coupling(c: &CouplingData, eps: f64) -> Result<CouplingData> {
    let n = c.n();
    let mut d = DMatrix::<f64>::identity(n, n);
    d[(0, 0)] += eps;
    CouplingData::new_unchecked(c.g(), c.mass_matrix() * d, c.metric())
}

fn squared_q(q: &LorentzTensor2<CVec>, qbar: &LorentzTensor2<CRow>, metric: Metric) -> Jet {
    let mut acc: Option<Jet> = None;
    for (a, b) in pairs() {
        let t = qbar[(a, b)]
            .dot(&q[(a, b)])
            .scale_real(metric.diag(a) * metric.diag(b));
        acc = Some(acc.map_or(t, |s| s + t));
    }
    acc.expect("sixteen terms")
}

/// p from the rule back to the original variables.
fn inverse_momenta(
    big: &MomentumState,
    phi: &CVec,
    map: &MapAtPoint,
    c: &CouplingData,
) -> (LorentzTensor2<CMat>, LorentzTensor2<CVec>) {
    let u = &map.u;
    let ud = u.adjoint();
    let big_phi = &(u * phi) + &map.shift;
    let qback = &(c.m_t() * &ud) * c.mt_t();
    let q = LorentzTensor2::skew_from_fn(|mu, nu| &qback * &big.q[(mu, nu)]);
    let qbar =
        LorentzTensor2::skew_from_fn(|mu, nu| &(&(&big.qbar[(mu, nu)] * c.mt()) * u) * c.m());
    let p = LorentzTensor2::skew_from_fn(|mu, nu| {
        let k = p_combination(
            &big.p[(mu, nu)],
            &big.q[(mu, nu)],
            &big.qbar[(mu, nu)],
            &big_phi,
            c,
        );
        let back = &(&ud * &k) * u;
        let left = (c.mt_t() * &q[(mu, nu)])
            .outer(&phi.adjoint())
            .scale(c.ig());
        let right = phi.outer(&(&qbar[(mu, nu)] * c.mt())).scale(c.ig());
        &(&back - &left) + &right
    });
    (p, q)
}

struct Context<'a> {
    s: &'a Scenario,
    control: GaugeMapSpec,
    perturbed: Option<CouplingData>,
    zero_g: Result<CouplingData>,
}

impl<'a> Context<'a> {
    fn new(s: &'a Scenario) -> Self {
        let c = &s.coupling;
        Self {
            s,
            control: control_map(c.n()),
            perturbed: (c.n() >= 2)
                .then(|| perturbed_coupling(c, MASS_PERTURBATION).ok())
                .flatten(),
            zero_g: CouplingData::new_unchecked(0.0, c.mass_matrix().clone(), c.metric()),
        }
    }
}

const MAP_DEPENDENT: &[CheckId] = &[
    CheckId::UUnitarity,
    CheckId::BaseRoundtrip,
    CheckId::GaugeFieldHermiticity,
    CheckId::GaugeADualForm,
    CheckId::CovariantDerivativeCovariance,
    CheckId::FCovariance,
    CheckId::QCovariance,
    CheckId::PCombinationCovariance,
    CheckId::QbarqInvariance,
    CheckId::L3KgInvariance,
    CheckId::F2DivergenceIdentity,
    CheckId::H2TransformationRule,
    CheckId::HgTransformationRule,
    CheckId::HgVariantEquivalence,
    CheckId::MomentumSkewness,
    CheckId::N1ClosedForms,
    CheckId::ProcaCovariance,
    CheckId::CanonicalBaseEquation,
];

const FIELD_DEPENDENT: &[CheckId] = &[
    CheckId::SplitIdentity,
    CheckId::LnrZeroCoupling,
    CheckId::LegendreConsistency,
    CheckId::Reality,
    CheckId::ProcaConstantB,
    CheckId::NegativeControlCommutator,
    CheckId::NegativeControlMassMatrix,
];

struct Original {
    s: FieldState,
    t: FieldTensors,
    m: MomentumState,
}

fn original(ctx: &Context, p: &SpacetimePoint) -> Result<Original> {
    let c = &ctx.s.coupling;
    let s = ctx.s.fields.eval(p, Order::Two)?;
    let t = field_tensors(&s, c)?;
    let m = canonical_momenta(&s, &t, c)?;
    Ok(Original { s, t, m })
}

fn eval_point(ctx: &Context, p: &SpacetimePoint) -> Outcomes {
    let mut rec = Recorder::new();
    let c = &ctx.s.coupling;
    rec.set(CheckId::MOrthogonality, Ok(c.orthogonality_defect()));
    rec.na(CheckId::AdFiniteDifference);

    let orig = match original(ctx, p) {
        Ok(o) => o,
        Err(e) => {
            rec.fail_all(MAP_DEPENDENT, &e);
            rec.fail_all(FIELD_DEPENDENT, &e);
            return rec.0;
        }
    };

    field_checks(ctx, &orig, p, &mut rec);

    match eval_gauge_map(&ctx.s.map, p, Order::Two) {
        Ok(map) => map_checks(ctx, &orig, &map, p, &mut rec),
        Err(e) => rec.fail_all(MAP_DEPENDENT, &e),
    }
    rec.0
}

fn field_checks(ctx: &Context, o: &Original, p: &SpacetimePoint, rec: &mut Recorder) {
    let c = &ctx.s.coupling;
    let (s, t, m) = (&o.s, &o.t, &o.m);

    rec.set(
        CheckId::SplitIdentity,
        (|| {
            let split = split_renormalizable(s, t, c)?;
            let l3 = crate::dynamics::lagrangian_l3_kg(s, t, c)?.value();
            Ok(rel(split.l_r.value() + split.l_nr.value(), l3))
        })(),
    );

    rec.set(
        CheckId::LnrZeroCoupling,
        (|| {
            let c0 = ctx.zero_g.clone()?;
            let t0 = field_tensors(s, &c0)?;
            let split = split_renormalizable(s, &t0, &c0)?;
            Ok(split.l_nr.value().norm())
        })(),
    );

    rec.set(
        CheckId::LegendreConsistency,
        legendre_check(s, t, m, c).map(|l| l.residual()),
    );

    rec.set(
        CheckId::Reality,
        (|| {
            let d = physical_densities(s, t, m, c)?;
            Ok(d.iter()
                .fold(0.0, |acc: f64, x| acc.max(x.imaginary_defect())))
        })(),
    );

    rec.set(
        CheckId::ProcaConstantB,
        (|| {
            let n = c.n();
            let mut vac = FieldState::zeros(n, Order::Two);
            vac.b = s.b.map(|v| CVec::from_values(&v.values(), Order::Two));
            let r = proca_residual(&vac, c)?;
            let b_up = vac.b.raised(c.metric());
            let mtm = c.m_t() * c.m();
            let mut worst: f64 = 0.0;
            for mu in 0..4 {
                let want = -&(&mtm * &b_up[mu]);
                worst = worst.max(vec_rel(&r[mu], &want));
            }
            Ok(worst)
        })(),
    );

    if c.n() < 2 {
        rec.na(CheckId::NegativeControlCommutator);
        rec.na(CheckId::NegativeControlMassMatrix);
        return;
    }

    rec.set(
        CheckId::NegativeControlCommutator,
        (|| {
            let map = eval_gauge_map(&ctx.control, p, Order::Two)?;
            let big_a = transform_gauge_a(&s.a, &map.u, c.g())?;
            let f_ab = field_tensor_f_abelian(&s.a)?;
            let big_f_ab = field_tensor_f_abelian(&big_a)?;
            let ud = map.u.adjoint();
            Ok(tensor_rel(&f_ab, &big_f_ab, |f, bf| {
                mat_rel(f, &(&(&ud * bf) * &map.u))
            }))
        })(),
    );

    rec.set(
        CheckId::NegativeControlMassMatrix,
        (|| {
            let cp = ctx.perturbed.clone().ok_or_else(|| {
                Error::config("/mass_matrix", "perturbed mass matrix is singular")
            })?;
            let map = eval_gauge_map(&ctx.control, p, Order::Two)?;
            let tp = field_tensors(s, &cp)?;
            let big = transform_fields(s, &map, &cp)?;
            let bt = field_tensors(&big, &cp)?;
            let metric = cp.metric();
            Ok(rel(
                squared_q(&bt.q, &bt.qbar, metric).value(),
                squared_q(&tp.q, &tp.qbar, metric).value(),
            ))
        })(),
    );
}

fn map_checks(
    ctx: &Context,
    o: &Original,
    map: &MapAtPoint,
    p: &SpacetimePoint,
    rec: &mut Recorder,
) {
    let c = &ctx.s.coupling;
    let n = c.n();
    let (s, t, m) = (&o.s, &o.t, &o.m);

    rec.set(
        CheckId::UUnitarity,
        (|| {
            let det = map.u.det_value()?;
            Ok(map.u.unitarity_defect().max((det.norm() - 1.0).abs()))
        })(),
    );

    let big = match transform_fields(s, map, c) {
        Ok(b) => b,
        Err(e) => {
            rec.fail_all(
                &MAP_DEPENDENT
                    .iter()
                    .copied()
                    .filter(|id| *id != CheckId::UUnitarity)
                    .collect::<Vec<_>>(),
                &e,
            );
            return;
        }
    };

    rec.set(
        CheckId::GaugeFieldHermiticity,
        Ok((0..4).fold(0.0, |acc: f64, mu| {
            acc.max(s.a[mu].hermiticity_defect())
                .max(big.a[mu].hermiticity_defect())
        })),
    );

    rec.set(
        CheckId::GaugeADualForm,
        (|| {
            let comp = transform_gauge_a_components(&s.a, &map.u, c.g())?;
            Ok((0..4).fold(0.0, |acc: f64, mu| acc.max(mat_rel(&big.a[mu], &comp[mu]))))
        })(),
    );

    // transformed momenta from the rules
    let rule = transform_momenta_pq(m, &s.phi, map, c).and_then(|(p_, q_, qb_)| {
        let (_, pi) = transform_base(&s.phi, &m.pi, map)?;
        Ok(MomentumState {
            pi,
            p: p_,
            q: q_,
            qbar: qb_,
        })
    });

    rec.set(
        CheckId::BaseRoundtrip,
        (|| {
            let bm = rule.clone()?;
            let (big_phi, big_pi) = transform_base(&s.phi, &m.pi, map)?;
            let (phi_back, pi_back) = crate::gaugemap::inverse_base(&big_phi, &big_pi, map)?;
            let mut worst = vec_rel(&phi_back, &s.phi);
            for mu in 0..4 {
                worst = worst.max(vec_rel(&pi_back[mu], &m.pi[mu]));
            }
            let (p_back, q_back) = inverse_momenta(&bm, &s.phi, map, c);
            worst = worst.max(tensor_rel(&p_back, &m.p, mat_rel));
            worst = worst.max(tensor_rel(&q_back, &m.q, vec_rel));
            Ok(worst)
        })(),
    );

    rec.set(
        CheckId::CovariantDerivativeCovariance,
        (|| {
            let d = covariant_derivatives(s, c)?;
            let bd = covariant_derivatives(&big, c)?;
            Ok((0..4).fold(0.0, |acc: f64, mu| {
                acc.max(vec_rel(&bd[mu], &(&map.u * &d[mu])))
            }))
        })(),
    );

    let big_t = field_tensors(&big, c);
    let ud = map.u.adjoint();

    rec.set(
        CheckId::FCovariance,
        (|| {
            let bt = big_t.as_ref().map_err(Clone::clone)?;
            Ok(tensor_rel(&t.f, &bt.f, |f, bf| {
                mat_rel(f, &(&(&ud * bf) * &map.u))
            }))
        })(),
    );

    rec.set(
        CheckId::QCovariance,
        (|| {
            let bt = big_t.as_ref().map_err(Clone::clone)?;
            let um = &map.u * c.m();
            Ok(tensor_rel(&t.q, &bt.q, |q, bq| {
                vec_rel(&(c.m() * bq), &(&um * q))
            }))
        })(),
    );

    rec.set(
        CheckId::QbarqInvariance,
        (|| {
            let bt = big_t.as_ref().map_err(Clone::clone)?;
            let metric = c.metric();
            Ok(rel(
                squared_q(&bt.q, &bt.qbar, metric).value(),
                squared_q(&t.q, &t.qbar, metric).value(),
            ))
        })(),
    );

    rec.set(
        CheckId::PCombinationCovariance,
        (|| {
            let bt = big_t.as_ref().map_err(Clone::clone)?;
            let bm = rule.as_ref().map_err(Clone::clone)?;
            let metric = c.metric();
            let p_low = momentum_p(&t.f, &t.q, &t.qbar, &s.phi, c);
            let big_p_fields = momentum_p(&bt.f, &bt.q, &bt.qbar, &big.phi, c);
            let mut worst: f64 = 0.0;
            for (a, b) in pairs() {
                let k = p_combination(&p_low[(a, b)], &t.q[(a, b)], &t.qbar[(a, b)], &s.phi, c);
                let bk = p_combination(
                    &big_p_fields[(a, b)],
                    &bt.q[(a, b)],
                    &bt.qbar[(a, b)],
                    &big.phi,
                    c,
                );
                worst = worst
                    .max(mat_rel(&k, &t.f[(a, b)]))
                    .max(mat_rel(&bk, &(&(&map.u * &k) * &ud)));
            }
            let raised = big_p_fields.raised(metric);
            worst = worst.max(tensor_rel(&raised, &bm.p, mat_rel));
            Ok(worst)
        })(),
    );

    rec.set(
        CheckId::L3KgInvariance,
        (|| {
            let bt = big_t.as_ref().map_err(Clone::clone)?;
            let l = crate::dynamics::lagrangian_l3_kg(s, t, c)?.value();
            let bl = crate::dynamics::lagrangian_l3_kg(&big, bt, c)?.value();
            Ok(rel(bl, l))
        })(),
    );

    let direct = rule
        .as_ref()
        .map_err(Clone::clone)
        .and_then(|bm| explicit_divergence_f2(s, bm, map, c));

    rec.set(
        CheckId::F2DivergenceIdentity,
        (|| {
            let bm = rule.as_ref().map_err(Clone::clone)?;
            let d = direct.clone()?;
            let closed = divergence_closed_form(s, m, &big, bm, c)?;
            Ok(rel(d.value(), closed.value()))
        })(),
    );

    rec.set(
        CheckId::H2TransformationRule,
        (|| {
            let bm = rule.as_ref().map_err(Clone::clone)?;
            let d = direct.clone()?;
            let h2 = hamiltonian_h2(s, m, c)?.value();
            let bh2 = hamiltonian_h2(&big, bm, c)?.value();
            Ok(rel(bh2 - h2, d.value()))
        })(),
    );

    rec.set(
        CheckId::HgTransformationRule,
        (|| {
            let bm = rule.as_ref().map_err(Clone::clone)?;
            let d = direct.clone()?;
            let hg = hamiltonian_gauge(s, m, c, Variant::Full)?.value();
            let bhg = hamiltonian_gauge(&big, bm, c, Variant::Full)?.value();
            Ok(rel(bhg - hg, d.value()))
        })(),
    );

    rec.set(
        CheckId::HgVariantEquivalence,
        (|| {
            let bm = rule.as_ref().map_err(Clone::clone)?;
            let mut worst: f64 = 0.0;
            for (fs, ms) in [(s, m), (&big, bm)] {
                let full = hamiltonian_gauge(fs, ms, c, Variant::Full)?.value();
                let red = hamiltonian_gauge(fs, ms, c, Variant::Reduced)?.value();
                worst = worst.max(rel(full, red));
            }
            Ok(worst)
        })(),
    );

    rec.set(
        CheckId::MomentumSkewness,
        (|| {
            let bt = big_t.as_ref().map_err(Clone::clone)?;
            let bm = rule.as_ref().map_err(Clone::clone)?;
            let p_low = momentum_p(&t.f, &t.q, &t.qbar, &s.phi, c);
            let big_p = momentum_p(&bt.f, &bt.q, &bt.qbar, &big.phi, c);
            Ok([
                t.f.skew_defect(),
                t.q.skew_defect(),
                t.qbar.skew_defect(),
                p_low.skew_defect(),
                bt.f.skew_defect(),
                bt.q.skew_defect(),
                bt.qbar.skew_defect(),
                big_p.skew_defect(),
                bm.p.skew_defect(),
                bm.q.skew_defect(),
                bm.qbar.skew_defect(),
            ]
            .into_iter()
            .fold(0.0, f64::max))
        })(),
    );

    rec.set(
        CheckId::ProcaCovariance,
        (|| {
            let bm = rule.as_ref().map_err(Clone::clone)?;
            let r = proca_residual(s, c)?;
            let big_pi = covariant_derivatives(&big, c)?.raised(c.metric());
            let br = proca_residual_from(&bm.q, &big.a, &big_pi, c)?;
            let umt = &map.u * c.mt_t();
            Ok((0..4).fold(0.0, |acc: f64, mu| {
                acc.max(vec_rel(&(c.mt_t() * &br[mu]), &(&umt * &r[mu])))
            }))
        })(),
    );

    rec.set(
        CheckId::CanonicalBaseEquation,
        (|| {
            let exact = canonical_eq_base_residual(s, &m.pi, c)?;
            let mut worst = exact.max_abs();
            let off = LorentzCoVec::from_fn(|mu| {
                let d = CVec::from_values(
                    &vec![C64::new(0.1 * (mu as f64 + 1.0), -0.05); n],
                    Order::Two,
                );
                &m.pi[mu] + &d
            });
            let r = canonical_eq_base_residual(s, &off, c)?;
            let (_, big_off) = transform_base(&s.phi, &off, map)?;
            let br = canonical_eq_base_residual(&big, &big_off, c)?;
            for mu in 0..4 {
                worst = worst.max(vec_rel(&br[mu], &(&map.u * &r[mu])));
            }
            Ok(worst)
        })(),
    );

    if n != 1 {
        rec.na(CheckId::N1ClosedForms);
        return;
    }
    rec.set(
        CheckId::N1ClosedForms,
        (|| {
            let bt = big_t.as_ref().map_err(Clone::clone)?;
            let bm = rule.as_ref().map_err(Clone::clone)?;
            let lam = ctx.s.map.eval_generator(p, Order::Two)?[(0, 0)];
            let phase = lam.scale(C64::new(0.0, 1.0)).exp();
            let g = c.g();
            let mass = c.mass_matrix()[(0, 0)];
            let ig = c.ig();
            let shift = map.shift[0];
            let mut worst = rel(map.u[(0, 0)].value(), phase.value());
            for mu in 0..4 {
                let dl = lam.partial(mu)?;
                let a_closed = s.a[mu][(0, 0)] + dl.scale_real(1.0 / g);
                worst = worst.max(rel(big.a[mu][(0, 0)].value(), a_closed.value()));
                let b_closed = s.b[mu][0] * phase - (a_closed * shift).scale(ig / mass)
                    + shift.partial(mu)?.scale_real(1.0 / mass);
                worst = worst.max(rel(big.b[mu][0].value(), b_closed.value()));
            }
            for (a, b) in pairs() {
                let want = (m.q[(a, b)][0] * phase).value();
                worst = worst.max(rel(bm.q[(a, b)][0].value(), want));
                let want_low = (t.q[(a, b)][0] * phase).value();
                worst = worst.max(rel(bt.q[(a, b)][0].value(), want_low));
            }
            Ok(worst)
        })(),
    );
}

/// Maximum L3_KG invariance residual over the sample points, without the
/// rest of the suite.
pub fn l3kg_invariance_residual(s: &Scenario) -> Result<f64> {
    s.validate()?;
    let c = &s.coupling;
    let mut worst: f64 = 0.0;
    for p in s.sampling.draw_points() {
        let f = s.fields.eval(&p, Order::Two)?;
        let t = field_tensors(&f, c)?;
        let map = eval_gauge_map(&s.map, &p, Order::Two)?;
        let big = transform_fields(&f, &map, c)?;
        let bt = field_tensors(&big, c)?;
        let l = crate::dynamics::lagrangian_l3_kg(&f, &t, c)?.value();
        let bl = crate::dynamics::lagrangian_l3_kg(&big, &bt, c)?.value();
        worst = worst.max(rel(bl, l));
    }
    Ok(worst)
}

fn thread_pool() -> Option<rayon::ThreadPool> {
    let cap = std::env::var(THREADS_ENV)
        .ok()?
        .trim()
        .parse::<usize>()
        .ok()?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cap.max(1))
        .build()
        .ok()
}

/// Evaluates every check at the scenario's sample points.
pub fn run_suite(s: &Scenario) -> Result<CheckReport> {
    s.validate()?;
    let start = Instant::now();
    let points = s.sampling.draw_points();
    let ctx = Context::new(s);
    let per_point: Vec<Outcomes> = match thread_pool() {
        Some(pool) => pool.install(|| points.par_iter().map(|p| eval_point(&ctx, p)).collect()),
        None => points.par_iter().map(|p| eval_point(&ctx, p)).collect(),
    };

    let oracle = {
        let mut rng = ChaCha8Rng::seed_from_u64(s.sampling.seed.wrapping_add(0x5eed));
        let exprs: Vec<FieldExpr> = (0..10).map(|_| random_expression(&mut rng, true)).collect();
        let sample: Vec<SpacetimePoint> = points.iter().take(5).copied().collect();
        finite_difference_oracle(&exprs, &sample, s.tolerances.oracle_step)
    };

    let rows = CheckId::ALL
        .iter()
        .map(|&id| {
            let tolerance = id.tolerance(&s.tolerances);
            let outcomes: Vec<Outcome> = if id == CheckId::AdFiniteDifference {
                vec![match &oracle {
                    Ok(v) => Outcome::Value(*v),
                    Err(e) => Outcome::Failed(e.to_string()),
                }]
            } else {
                per_point.iter().map(|o| o[id.index()].clone()).collect()
            };
            reduce_row(id, tolerance, &outcomes)
        })
        .collect::<Vec<_>>();
    let pass = rows.iter().all(|r| r.pass);
    Ok(CheckReport {
        scenario: s.name.clone(),
        n: s.coupling.n(),
        rows,
        pass,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn reduce_row(id: CheckId, tolerance: f64, outcomes: &[Outcome]) -> CheckRow {
    let mut worst: f64 = 0.0;
    let mut error = None;
    let mut applicable = false;
    let mut points = 0;
    for o in outcomes {
        match o {
            Outcome::Value(v) => {
                applicable = true;
                points += 1;
                worst = worst.max(*v);
            }
            Outcome::Failed(e) => {
                applicable = true;
                error.get_or_insert_with(|| e.clone());
            }
            Outcome::NotApplicable => {}
        }
    }
    let within = if id.is_negative_control() {
        worst > tolerance
    } else {
        worst <= tolerance
    };
    CheckRow {
        id,
        equation: id.equation(),
        points,
        max_residual: worst,
        tolerance,
        comparison: if id.is_negative_control() { ">" } else { "<=" },
        applicable,
        pass: !applicable || (error.is_none() && within),
        error,
    }
}
