//! Field tensors, canonical momenta, Hamiltonians, Lagrangians and field
//! equation residuals.
//!
//! Field tensors come out with lower indices; [`MomentumState`] holds
//! momenta with upper indices. Contractions of an upper with a lower pair
//! need no metric; `q̄^αβ q_αβ` and `Tr(K^αβ K_αβ)` lower one factor with
//! the metric of the [`CouplingData`].

use std::fmt;

use serde::Serialize;

use crate::error::Result;
use crate::gaugemap::{
    check, covariant_derivative, p_combination, CouplingData, FieldState, MapAtPoint, MomentumState,
};
use crate::jets::{Jet, C64};
use crate::tensoralg::{CMat, CRow, CVec, LorentzCoVec, LorentzTensor2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Role {
    HKg,
    Hg,
    H2,
    HKin,
    H3,
    Lg,
    L3,
    L3Kg,
    Lr,
    Lnr,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::HKg => "H_KG",
            Role::Hg => "H_g",
            Role::H2 => "H2",
            Role::HKin => "H_kin",
            Role::H3 => "H3",
            Role::Lg => "L_g",
            Role::L3 => "L3",
            Role::L3Kg => "L3_KG",
            Role::Lr => "L_r",
            Role::Lnr => "L_nr",
        })
    }
}

/// A scalar density tagged with what it represents.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarDensity {
    pub role: Role,
    pub value: Jet,
}

impl ScalarDensity {
    pub fn new(role: Role, value: Jet) -> Self {
        Self { role, value }
    }

    pub fn value(&self) -> C64 {
        self.value.value()
    }

    /// |Im| / (1 + |Re|)
    pub fn imaginary_defect(&self) -> f64 {
        let v = self.value();
        v.im.abs() / (1.0 + v.re.abs())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldTensors {
    pub f: LorentzTensor2<CMat>,
    pub q: LorentzTensor2<CVec>,
    pub qbar: LorentzTensor2<CRow>,
    pub h: LorentzTensor2<CVec>,
    pub hbar: LorentzTensor2<CRow>,
}

/// `d[μ][ν] = ∂_μ x_ν`
fn derivs<T: Clone>(
    x: &LorentzCoVec<T>,
    partial: impl Fn(&T, usize) -> Result<T>,
) -> Result<[[T; 4]; 4]> {
    let row = |mu: usize| -> Result<[T; 4]> {
        Ok([
            partial(&x[0], mu)?,
            partial(&x[1], mu)?,
            partial(&x[2], mu)?,
            partial(&x[3], mu)?,
        ])
    };
    Ok([row(0)?, row(1)?, row(2)?, row(3)?])
}

fn da_of(a: &LorentzCoVec<CMat>) -> Result<[[CMat; 4]; 4]> {
    derivs(a, |m, mu| m.partial(mu))
}

fn db_of(b: &LorentzCoVec<CVec>) -> Result<[[CVec; 4]; 4]> {
    derivs(b, |v, mu| v.partial(mu))
}

fn sum_jets(it: impl IntoIterator<Item = Jet>) -> Jet {
    let mut it = it.into_iter();
    let first = it.next().expect("non-empty sum");
    it.fold(first, |acc, j| acc + j)
}

fn pairs() -> impl Iterator<Item = (usize, usize)> {
    (0..4).flat_map(|a| (0..4).map(move |b| (a, b)))
}

/// f_μν = ∂_μa_ν − ∂_νa_μ + ig(a_ν a_μ − a_μ a_ν).
pub fn field_tensor_f(a: &LorentzCoVec<CMat>, c: &CouplingData) -> Result<LorentzTensor2<CMat>> {
    let da = da_of(a)?;
    let ig = c.ig();
    Ok(LorentzTensor2::from_fn(|mu, nu| {
        let comm = &(&a[nu] * &a[mu]) - &(&a[mu] * &a[nu]);
        &(&da[mu][nu] - &da[nu][mu]) + &comm.scale(ig)
    })
    .mark_skew_if_exact())
}

/// The curl of a_μ alone, without the commutator.
pub fn field_tensor_f_abelian(a: &LorentzCoVec<CMat>) -> Result<LorentzTensor2<CMat>> {
    let da = da_of(a)?;
    Ok(LorentzTensor2::from_fn(|mu, nu| &da[mu][nu] - &da[nu][mu]).mark_skew_if_exact())
}

/// q_μν = ∂_μb_ν − ∂_νb_μ + ig M̃(a_ν M b_μ − a_μ M b_ν + f_μν φ), and its
/// partner q̄_μν built from the adjoint rule.
pub fn momentum_q(
    s: &FieldState,
    f: &LorentzTensor2<CMat>,
    c: &CouplingData,
) -> Result<(LorentzTensor2<CVec>, LorentzTensor2<CRow>)> {
    check(c.n(), s.n())?;
    let (h, hbar) = tensors_h(s, c)?;
    let ig = c.ig();
    let phibar = s.phi.adjoint();
    let q = LorentzTensor2::from_fn(|mu, nu| {
        &h[(mu, nu)] + &(c.mt() * &(&f[(mu, nu)] * &s.phi)).scale(ig)
    })
    .mark_skew_if_exact();
    let qbar = LorentzTensor2::from_fn(|mu, nu| {
        &hbar[(mu, nu)] - &(&(&phibar * &f[(mu, nu)]) * c.mt_t()).scale(ig)
    })
    .mark_skew_if_exact();
    Ok((q, qbar))
}

/// q without the f·φ term, and its adjoint partner.
pub fn tensors_h(
    s: &FieldState,
    c: &CouplingData,
) -> Result<(LorentzTensor2<CVec>, LorentzTensor2<CRow>)> {
    check(c.n(), s.n())?;
    let db = db_of(&s.b)?;
    let ig = c.ig();
    let bbar: [CRow; 4] = std::array::from_fn(|mu| s.bbar(mu));
    let h = LorentzTensor2::from_fn(|mu, nu| {
        let curl = &db[mu][nu] - &db[nu][mu];
        let mix = &(&s.a[nu] * &(c.m() * &s.b[mu])) - &(&s.a[mu] * &(c.m() * &s.b[nu]));
        &curl + &(c.mt() * &mix).scale(ig)
    })
    .mark_skew_if_exact();
    let hbar = LorentzTensor2::from_fn(|mu, nu| {
        let curl = &db[mu][nu].adjoint() - &db[nu][mu].adjoint();
        let mix = &(&(&bbar[mu] * c.m_t()) * &s.a[nu]) - &(&(&bbar[nu] * c.m_t()) * &s.a[mu]);
        &curl - &(&mix * c.mt_t()).scale(ig)
    })
    .mark_skew_if_exact();
    Ok((h, hbar))
}

/// p_μν = f_μν − ig((M̃ᵀq_μν)φ̄ − φ(q̄_μν M̃)).
pub fn momentum_p(
    f: &LorentzTensor2<CMat>,
    q: &LorentzTensor2<CVec>,
    qbar: &LorentzTensor2<CRow>,
    phi: &CVec,
    c: &CouplingData,
) -> LorentzTensor2<CMat> {
    let ig = c.ig();
    let phibar = phi.adjoint();
    LorentzTensor2::from_fn(|mu, nu| {
        let left = (c.mt_t() * &q[(mu, nu)]).outer(&phibar);
        let right = phi.outer(&(&qbar[(mu, nu)] * c.mt()));
        &f[(mu, nu)] - &(&left - &right).scale(ig)
    })
    .mark_skew_if_exact()
}

pub fn field_tensors(s: &FieldState, c: &CouplingData) -> Result<FieldTensors> {
    let f = field_tensor_f(&s.a, c)?;
    let (q, qbar) = momentum_q(s, &f, c)?;
    let (h, hbar) = tensors_h(s, c)?;
    Ok(FieldTensors {
        f,
        q,
        qbar,
        h,
        hbar,
    })
}

/// (Dφ)_μ for all μ.
pub fn covariant_derivatives(s: &FieldState, c: &CouplingData) -> Result<LorentzCoVec<CVec>> {
    LorentzCoVec::try_from_fn(|mu| covariant_derivative(&s.phi, &s.a, &s.b, c, mu))
}

/// π^μ from minimal coupling, p^μν and q^μν from the field derivatives.
pub fn canonical_momenta(
    s: &FieldState,
    t: &FieldTensors,
    c: &CouplingData,
) -> Result<MomentumState> {
    let metric = c.metric();
    let pi = covariant_derivatives(s, c)?.raised(metric);
    let p = momentum_p(&t.f, &t.q, &t.qbar, &s.phi, c).raised(metric);
    Ok(MomentumState {
        pi,
        p,
        q: t.q.raised(metric),
        qbar: t.qbar.raised(metric),
    })
}

/// H_KG = π̄^α π_α.
pub fn hamiltonian_kg(pi: &LorentzCoVec<CVec>, c: &CouplingData) -> ScalarDensity {
    let metric = c.metric();
    let v = sum_jets((0..4).map(|a| pi[a].adjoint().dot(&pi[a]).scale_real(metric.diag(a))));
    ScalarDensity::new(Role::HKg, v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Full,
    Reduced,
}

/// The ten terms of the full gauge Hamiltonian, in order: coupling of π to
/// a, p·[a,a], p·sym(∂a), q̄·sym(∂b), sym(∂b̄)·q, π·Mb + b̄Mᵀ·π, the two
/// b·a·q cross terms, −½q̄q and −¼Tr(KK).
pub fn gauge_terms_full(s: &FieldState, m: &MomentumState, c: &CouplingData) -> Result<[Jet; 10]> {
    check(c.n(), s.n())?;
    let ig = c.ig();
    let half = 0.5;
    let da = da_of(&s.a)?;
    let db = db_of(&s.b)?;
    let phibar = s.phi.adjoint();
    let bbar: [CRow; 4] = std::array::from_fn(|mu| s.bbar(mu));
    let pibar: [CRow; 4] = std::array::from_fn(|mu| m.pibar(mu));
    let metric = c.metric();

    let t1 = sum_jets((0..4).map(|a| {
        ((&pibar[a] * &s.a[a]).dot(&s.phi) - (&phibar * &s.a[a]).dot(&m.pi[a])).scale(ig)
    }));
    let t2 = sum_jets(pairs().map(|(a, b)| {
        let comm = &(&s.a[a] * &s.a[b]) - &(&s.a[b] * &s.a[a]);
        (&m.p[(a, b)] * &comm).trace().scale(-ig * half)
    }));
    let t3 = sum_jets(pairs().map(|(a, b)| {
        (&m.p[(a, b)] * &(&da[b][a] + &da[a][b]))
            .trace()
            .scale_real(half)
    }));
    let t4 = sum_jets(pairs().map(|(a, b)| {
        m.qbar[(a, b)]
            .dot(&(&db[b][a] + &db[a][b]))
            .scale_real(half)
    }));
    let t5 = sum_jets(pairs().map(|(a, b)| {
        (&db[b][a].adjoint() + &db[a][b].adjoint())
            .dot(&m.q[(a, b)])
            .scale_real(half)
    }));
    let t6 = sum_jets(
        (0..4).map(|a| pibar[a].dot(&(c.m() * &s.b[a])) + (&bbar[a] * c.m_t()).dot(&m.pi[a])),
    );
    let t7 = sum_jets(pairs().map(|(a, b)| {
        let row = &(&(&bbar[b] * c.m_t()) * &s.a[a]) - &(&(&bbar[a] * c.m_t()) * &s.a[b]);
        row.dot(&(c.mt_t() * &m.q[(a, b)])).scale(ig * half)
    }));
    let t8 = sum_jets(pairs().map(|(a, b)| {
        let col = &(&s.a[a] * &(c.m() * &s.b[b])) - &(&s.a[b] * &(c.m() * &s.b[a]));
        (&m.qbar[(a, b)] * c.mt()).dot(&col).scale(-ig * half)
    }));
    let t9 = sum_jets(pairs().map(|(a, b)| {
        let w = metric.diag(a) * metric.diag(b);
        m.qbar[(a, b)].dot(&m.q[(a, b)]).scale_real(-half * w)
    }));
    let t10 = kinetic_p_term(s, m, c);
    Ok([t1, t2, t3, t4, t5, t6, t7, t8, t9, t10])
}

/// −¼ Tr(K^αβ K_αβ)
fn kinetic_p_term(s: &FieldState, m: &MomentumState, c: &CouplingData) -> Jet {
    let metric = c.metric();
    sum_jets(pairs().map(|(a, b)| {
        let k = p_combination(&m.p[(a, b)], &m.q[(a, b)], &m.qbar[(a, b)], &s.phi, c);
        let w = metric.diag(a) * metric.diag(b);
        (&k * &k).trace().scale_real(-0.25 * w)
    }))
}

/// The six terms of the reduced gauge Hamiltonian, valid for skew momenta.
pub fn gauge_terms_reduced(
    s: &FieldState,
    m: &MomentumState,
    c: &CouplingData,
) -> Result<[Jet; 6]> {
    check(c.n(), s.n())?;
    let ig = c.ig();
    let metric = c.metric();
    let phibar = s.phi.adjoint();
    let r1 = sum_jets((0..4).map(|a| {
        ((&m.pibar(a) * &s.a[a]).dot(&s.phi) - (&phibar * &s.a[a]).dot(&m.pi[a])).scale(ig)
    }));
    let r2 =
        sum_jets(pairs().map(|(a, b)| (&(&m.p[(a, b)] * &s.a[a]) * &s.a[b]).trace().scale(-ig)));
    let r3 = sum_jets(pairs().map(|(a, b)| {
        let w = metric.diag(a) * metric.diag(b);
        m.qbar[(a, b)].dot(&m.q[(a, b)]).scale_real(-0.5 * w)
    }));
    let r4 = sum_jets((0..4).map(|b| {
        let mut row = m.pibar(b);
        for a in 0..4 {
            row = &row - &(&(&m.qbar[(a, b)] * c.mt()) * &s.a[a]).scale(ig);
        }
        row.dot(&(c.m() * &s.b[b]))
    }));
    let r5 = sum_jets((0..4).map(|b| {
        let mut col = m.pi[b].clone();
        for a in 0..4 {
            col = &col + &(&s.a[a] * &(c.mt_t() * &m.q[(a, b)])).scale(ig);
        }
        (&s.bbar(b) * c.m_t()).dot(&col)
    }));
    let r6 = kinetic_p_term(s, m, c);
    Ok([r1, r2, r3, r4, r5, r6])
}

pub fn hamiltonian_gauge(
    s: &FieldState,
    m: &MomentumState,
    c: &CouplingData,
    variant: Variant,
) -> Result<ScalarDensity> {
    let v = match variant {
        Variant::Full => sum_jets(gauge_terms_full(s, m, c)?),
        Variant::Reduced => sum_jets(gauge_terms_reduced(s, m, c)?),
    };
    Ok(ScalarDensity::new(Role::Hg, v))
}

/// H₂ − H: the first eight terms of the full gauge Hamiltonian.
pub fn h2_coupling(s: &FieldState, m: &MomentumState, c: &CouplingData) -> Result<Jet> {
    Ok(sum_jets(gauge_terms_full(s, m, c)?.into_iter().take(8)))
}

/// H₂ with the Klein–Gordon system Hamiltonian.
pub fn hamiltonian_h2(
    s: &FieldState,
    m: &MomentumState,
    c: &CouplingData,
) -> Result<ScalarDensity> {
    let v = hamiltonian_kg(&m.pi, c).value + h2_coupling(s, m, c)?;
    Ok(ScalarDensity::new(Role::H2, v))
}

pub fn hamiltonian_kin(
    s: &FieldState,
    m: &MomentumState,
    c: &CouplingData,
) -> Result<ScalarDensity> {
    let t = gauge_terms_full(s, m, c)?;
    Ok(ScalarDensity::new(Role::HKin, t[8] + t[9]))
}

pub fn hamiltonian_h3(
    s: &FieldState,
    m: &MomentumState,
    c: &CouplingData,
) -> Result<ScalarDensity> {
    let v = hamiltonian_kg(&m.pi, c).value + hamiltonian_gauge(s, m, c, Variant::Full)?.value;
    Ok(ScalarDensity::new(Role::H3, v))
}

/// Divergence of the explicitly x-dependent part of F̃₂, computed from U,
/// φ̂ and their derivatives. `big` holds the transformed momenta Π, P, Q, Q̄.
pub fn explicit_divergence_f2(
    s: &FieldState,
    big: &MomentumState,
    map: &MapAtPoint,
    c: &CouplingData,
) -> Result<Jet> {
    let n = c.n();
    check(n, s.n())?;
    check(n, map.u.n())?;
    let ig = c.ig();
    let inv_ig = C64::new(1.0, 0.0) / ig;
    let u = &map.u;
    let ud = u.adjoint();
    let du: [CMat; 4] = [u.partial(0)?, u.partial(1)?, u.partial(2)?, u.partial(3)?];
    let dud: [CMat; 4] = std::array::from_fn(|mu| du[mu].adjoint());
    let ddu = derivs(&LorentzCoVec(du.clone()), |m, mu| m.partial(mu))?;
    let dshift = LorentzCoVec::try_from_fn(|mu| map.shift.partial(mu))?;
    let ddshift = derivs(&dshift, |v, mu| v.partial(mu))?;
    let shift_bar = map.shift.adjoint();
    let phibar = s.phi.adjoint();

    let d1 = sum_jets((0..4).map(|a| {
        let col = &(&du[a] * &s.phi) + &dshift[a];
        let row = &(&phibar * &dud[a]) + &dshift[a].adjoint();
        big.pibar(a).dot(&col) + row.dot(&big.pi[a])
    }));

    let d2 = sum_jets(pairs().map(|(a, b)| {
        let w = &(&big.p[(a, b)] + &(c.mt_t() * &big.q[(a, b)]).outer(&shift_bar).scale(ig))
            - &map.shift.outer(&(&big.qbar[(a, b)] * c.mt())).scale(ig);
        // ∂_αU ∂_βU† and ∂_α∂_βU U† carry the 1/(ig)
        let y = &(&(&(&du[b] * &s.a[a]) * &ud) + &(&(u * &s.a[a]) * &dud[b]))
            + &(&(&du[a] * &dud[b]) + &(&ddu[b][a] * &ud)).scale(inv_ig);
        (&w * &y).trace()
    }));

    let d3 = sum_jets(pairs().map(|(a, b)| {
        let x = &(c.mt_t() * &big.q[(a, b)]).outer(&dshift[b].adjoint())
            - &dshift[b].outer(&(&big.qbar[(a, b)] * c.mt()));
        let y = &(&(u * &s.a[a]) * &ud).scale(ig) + &(&du[a] * &ud);
        (&x * &y).trace()
    }));

    let d4 = sum_jets(pairs().map(|(a, b)| {
        let col = &(&du[b] * &(c.m() * &s.b[a])) + &ddshift[b][a];
        let row = &(&(&s.bbar(a) * c.m_t()) * &dud[b]) + &ddshift[b][a].adjoint();
        (&big.qbar[(a, b)] * c.mt()).dot(&col) + row.dot(&(c.mt_t() * &big.q[(a, b)]))
    }));

    Ok(d1 + d2 + d3 + d4)
}

/// The same divergence expressed through original and transformed
/// canonical variables only.
pub fn divergence_closed_form(
    s: &FieldState,
    m: &MomentumState,
    big_s: &FieldState,
    big_m: &MomentumState,
    c: &CouplingData,
) -> Result<Jet> {
    Ok(h2_coupling(big_s, big_m, c)? - h2_coupling(s, m, c)?)
}

/// π̄^α π_α − ¼Tr(f^αβ f_αβ) − ½ q̄^αβ q_αβ from lower-index inputs.
fn l3_form(
    pi_lower: &LorentzCoVec<CVec>,
    f: &LorentzTensor2<CMat>,
    q: &LorentzTensor2<CVec>,
    qbar: &LorentzTensor2<CRow>,
    c: &CouplingData,
) -> Jet {
    let metric = c.metric();
    let kin = sum_jets((0..4).map(|a| {
        pi_lower[a]
            .adjoint()
            .dot(&pi_lower[a])
            .scale_real(metric.diag(a))
    }));
    let ff = sum_jets(pairs().map(|(a, b)| {
        let w = metric.diag(a) * metric.diag(b);
        (&f[(a, b)] * &f[(a, b)]).trace().scale_real(-0.25 * w)
    }));
    let qq = sum_jets(pairs().map(|(a, b)| {
        let w = metric.diag(a) * metric.diag(b);
        qbar[(a, b)].dot(&q[(a, b)]).scale_real(-0.5 * w)
    }));
    kin + ff + qq
}

/// The locally invariant Klein–Gordon Lagrangian, π from minimal coupling.
pub fn lagrangian_l3_kg(
    s: &FieldState,
    t: &FieldTensors,
    c: &CouplingData,
) -> Result<ScalarDensity> {
    let pi = covariant_derivatives(s, c)?;
    Ok(ScalarDensity::new(
        Role::L3Kg,
        l3_form(&pi, &t.f, &t.q, &t.qbar, c),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Split {
    pub l_r: ScalarDensity,
    pub l_nr: ScalarDensity,
    /// Terms of L_nr linear in the curl of b.
    pub line1: Jet,
    /// The a·M·b cross terms and the φ̄ f f φ term.
    pub line2: Jet,
}

/// L_r uses h in place of q; L_nr is written out term by term.
pub fn split_renormalizable(s: &FieldState, t: &FieldTensors, c: &CouplingData) -> Result<Split> {
    let pi = covariant_derivatives(s, c)?;
    let l_r = l3_form(&pi, &t.f, &t.h, &t.hbar, c);
    let metric = c.metric();
    let ig = c.ig();
    let g2 = c.g() * c.g();
    let db = db_of(&s.b)?;
    let phibar = s.phi.adjoint();
    let mut line1 = Jet::zero(l_r.order());
    let mut line2 = Jet::zero(l_r.order());
    for (a, b) in pairs() {
        let w = metric.diag(a) * metric.diag(b);
        let f = &t.f[(a, b)];
        let fphi = c.mt() * &(f * &s.phi);
        let phif = &(&phibar * f) * c.mt_t();
        let curl = &db[a][b] - &db[b][a];
        let curl_bar = curl.adjoint();
        let rest = &t.h[(a, b)] - &curl;
        let rest_bar = &t.hbar[(a, b)] - &curl_bar;
        let cross = |hb: &CRow, h: &CVec| {
            (hb.dot(&fphi).scale(-ig) + phif.dot(h).scale(ig)).scale_real(0.5 * w)
        };
        line1 += cross(&curl_bar, &curl);
        line2 += cross(&rest_bar, &rest);
        line2 += phif.dot(&fphi).scale_real(-0.5 * g2 * w);
    }
    Ok(Split {
        l_r: ScalarDensity::new(Role::Lr, l_r),
        l_nr: ScalarDensity::new(Role::Lnr, line1 + line2),
        line1,
        line2,
    })
}

/// Euler–Lagrange residual of the b-field equation, upper index μ:
/// ∂_α q^μα − ig Mᵀ a_α M̃ᵀ q^μα + Mᵀ π^μ with π^μ the raised covariant
/// derivative. `q_up` must carry first derivatives.
pub fn proca_residual_from(
    q_up: &LorentzTensor2<CVec>,
    a: &LorentzCoVec<CMat>,
    pi_up: &LorentzCoVec<CVec>,
    c: &CouplingData,
) -> Result<LorentzCoVec<CVec>> {
    let ig = c.ig();
    LorentzCoVec::try_from_fn(|mu| {
        let mut r = c.m_t() * &pi_up[mu];
        for al in 0..4 {
            r = &r + &q_up[(mu, al)].partial(al)?;
            r = &r - &(c.m_t() * &(&a[al] * &(c.mt_t() * &q_up[(mu, al)]))).scale(ig);
        }
        Ok(r)
    })
}

/// Proca residual from fields given at order 2.
pub fn proca_residual(s: &FieldState, c: &CouplingData) -> Result<LorentzCoVec<CVec>> {
    let t = field_tensors(s, c)?;
    let pi = covariant_derivatives(s, c)?.raised(c.metric());
    proca_residual_from(&t.q.raised(c.metric()), &s.a, &pi, c)
}

/// ∂_μφ − π_μ − ig a_μ φ − M b_μ, with π^μ given (upper index).
pub fn canonical_eq_base_residual(
    s: &FieldState,
    pi_up: &LorentzCoVec<CVec>,
    c: &CouplingData,
) -> Result<LorentzCoVec<CVec>> {
    let pi_lower = pi_up.raised(c.metric());
    LorentzCoVec::try_from_fn(|mu| {
        let d = covariant_derivative(&s.phi, &s.a, &s.b, c, mu)?;
        Ok(&d - &pi_lower[mu])
    })
}

/// Both gauge Lagrangians and the L3 identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegendreCheck {
    pub lg_legendre: ScalarDensity,
    pub lg_closed: ScalarDensity,
    pub l3_general: ScalarDensity,
    pub l3_kg: ScalarDensity,
}

impl LegendreCheck {
    /// Largest scale-free mismatch of the two identities.
    pub fn residual(&self) -> f64 {
        let rel = |x: C64, y: C64| (x - y).norm() / (1.0 + x.norm() + y.norm());
        rel(self.lg_legendre.value(), self.lg_closed.value())
            .max(rel(self.l3_general.value(), self.l3_kg.value()))
    }
}

/// L_g as p·∂a + q̄·∂b + ∂b̄·q − H_g against its closed form, and L3 from
/// L_g against the Klein–Gordon form. Momenta must be the canonical ones.
pub fn legendre_check(
    s: &FieldState,
    t: &FieldTensors,
    m: &MomentumState,
    c: &CouplingData,
) -> Result<LegendreCheck> {
    let ig = c.ig();
    let metric = c.metric();
    let da = da_of(&s.a)?;
    let db = db_of(&s.b)?;
    let hg = hamiltonian_gauge(s, m, c, Variant::Full)?.value;
    let velocity = sum_jets(pairs().map(|(a, b)| {
        (&m.p[(a, b)] * &da[b][a]).trace()
            + m.qbar[(a, b)].dot(&db[b][a])
            + db[b][a].adjoint().dot(&m.q[(a, b)])
    }));
    let lg_legendre = velocity - hg;

    let phibar = s.phi.adjoint();
    let ff = sum_jets(pairs().map(|(a, b)| {
        let w = metric.diag(a) * metric.diag(b);
        (&t.f[(a, b)] * &t.f[(a, b)]).trace().scale_real(-0.25 * w)
    }));
    let qq = sum_jets(pairs().map(|(a, b)| {
        let w = metric.diag(a) * metric.diag(b);
        t.qbar[(a, b)].dot(&t.q[(a, b)]).scale_real(-0.5 * w)
    }));
    let coupling = sum_jets((0..4).map(|a| {
        let col = &(&s.a[a] * &s.phi).scale(ig) + &(c.m() * &s.b[a]);
        let row = &(&phibar * &s.a[a]).scale(ig) - &(&s.bbar(a) * c.m_t());
        row.dot(&m.pi[a]) - m.pibar(a).dot(&col)
    }));
    let lg_closed = ff + qq + coupling;

    let mut terms = Vec::with_capacity(4);
    for a in 0..4 {
        let dphi = s.phi.partial(a)?;
        terms.push(m.pibar(a).dot(&dphi) + dphi.adjoint().dot(&m.pi[a]));
    }
    let base = sum_jets(terms);
    let l3_general = lg_closed + base - hamiltonian_kg(&m.pi, c).value;
    let l3_kg = lagrangian_l3_kg(s, t, c)?;
    Ok(LegendreCheck {
        lg_legendre: ScalarDensity::new(Role::Lg, lg_legendre),
        lg_closed: ScalarDensity::new(Role::Lg, lg_closed),
        l3_general: ScalarDensity::new(Role::L3, l3_general),
        l3_kg,
    })
}

/// Every density that must come out real, evaluated on canonical momenta.
pub fn physical_densities(
    s: &FieldState,
    t: &FieldTensors,
    m: &MomentumState,
    c: &CouplingData,
) -> Result<Vec<ScalarDensity>> {
    let split = split_renormalizable(s, t, c)?;
    let leg = legendre_check(s, t, m, c)?;
    Ok(vec![
        hamiltonian_kg(&m.pi, c),
        hamiltonian_gauge(s, m, c, Variant::Full)?,
        hamiltonian_h2(s, m, c)?,
        hamiltonian_kin(s, m, c)?,
        hamiltonian_h3(s, m, c)?,
        leg.lg_closed,
        leg.l3_general,
        leg.l3_kg,
        split.l_r,
        split.l_nr,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldexpr::FieldExpr;
    use crate::jets::{Order, SpacetimePoint};
    use crate::tensoralg::{Entry, Metric};
    use nalgebra::DMatrix;

    fn coupling(n: usize, g: f64, m: f64) -> CouplingData {
        CouplingData::new(g, DMatrix::identity(n, n) * m, Metric::MostlyMinus).unwrap()
    }

    fn ev(s: &str, p: &SpacetimePoint) -> Jet {
        FieldExpr::parse(s).unwrap().eval(p, Order::Two).unwrap()
    }

    fn n1_state(p: &SpacetimePoint) -> FieldState {
        FieldState {
            phi: CVec(vec![ev("0.3*t - (0.2 + 0.1i)*x*y + sin(z)", p)]),
            a: LorentzCoVec::from_fn(|mu| {
                let src = ["t*x", "0.5*y^2", "cos(t + z)", "-0.3*x*z"][mu];
                CMat::from_fn(1, |_, _| ev(src, p))
            }),
            b: LorentzCoVec::from_fn(|mu| {
                let src = ["0.2i*x", "t*y - 0.1", "(0.4 - 0.3i)*z", "exp(0.1*t)"][mu];
                CVec(vec![ev(src, p)])
            }),
        }
    }

    #[test]
    fn vacuum_gives_zero_everywhere() {
        let c = coupling(2, 0.8, 1.2);
        let s = FieldState::zeros(2, Order::Two);
        let t = field_tensors(&s, &c).unwrap();
        let m = canonical_momenta(&s, &t, &c).unwrap();
        assert_eq!(
            hamiltonian_gauge(&s, &m, &c, Variant::Full)
                .unwrap()
                .value(),
            C64::new(0.0, 0.0)
        );
        assert_eq!(
            lagrangian_l3_kg(&s, &t, &c).unwrap().value(),
            C64::new(0.0, 0.0)
        );
        assert_eq!(legendre_check(&s, &t, &m, &c).unwrap().residual(), 0.0);
        let r = proca_residual(&s, &c).unwrap();
        assert_eq!(r.max_abs(), 0.0);
    }

    #[test]
    fn n1_field_tensor_is_plain_curl() {
        let c = coupling(1, 1.3, 1.0);
        let s = n1_state(&SpacetimePoint([0.2, 0.4, -0.1, 0.5]));
        let f = field_tensor_f(&s.a, &c).unwrap();
        let fa = field_tensor_f_abelian(&s.a).unwrap();
        assert!(f.is_skew());
        for (mu, nu) in pairs() {
            assert_eq!(f[(mu, nu)].values(), fa[(mu, nu)].values());
        }
    }

    #[test]
    fn constant_a_gives_commutator_only() {
        let c = coupling(2, 1.0, 1.0);
        let o = Order::Two;
        let sx = CMat::from_values(2, &[0.0.into(), 1.0.into(), 1.0.into(), 0.0.into()], o);
        let sy = CMat::from_values(
            2,
            &[
                0.0.into(),
                C64::new(0.0, -1.0),
                C64::new(0.0, 1.0),
                0.0.into(),
            ],
            o,
        );
        let mut a = LorentzCoVec::from_fn(|_| CMat::zeros(2, o));
        a[0] = sx.clone();
        a[1] = sy.clone();
        let f = field_tensor_f(&a, &c).unwrap();
        let want = (&(&sy * &sx) - &(&sx * &sy)).scale(C64::new(0.0, 1.0));
        assert_eq!(f[(0, 1)].values(), want.values());
    }

    #[test]
    fn q_reduces_to_curl_without_a() {
        let c = coupling(1, 0.7, 2.0);
        let mut s = n1_state(&SpacetimePoint([0.1, 0.2, 0.3, 0.4]));
        s.a = LorentzCoVec::from_fn(|_| CMat::zeros(1, Order::Two));
        let t = field_tensors(&s, &c).unwrap();
        let db = db_of(&s.b).unwrap();
        assert_eq!(t.q[(1, 2)].values(), (&db[1][2] - &db[2][1]).values());
    }

    #[test]
    fn qbar_is_conjugate_of_q() {
        let c = coupling(1, 0.9, 1.4);
        let s = n1_state(&SpacetimePoint([0.3, -0.2, 0.6, 0.1]));
        let t = field_tensors(&s, &c).unwrap();
        for (mu, nu) in pairs() {
            let d = &t.qbar[(mu, nu)] - &t.q[(mu, nu)].adjoint();
            assert!(d.max_abs() < 1e-13);
        }
    }

    #[test]
    fn p_equals_f_when_q_vanishes() {
        let c = coupling(1, 0.9, 1.0);
        let s = n1_state(&SpacetimePoint([0.3, -0.2, 0.6, 0.1]));
        let f = field_tensor_f(&s.a, &c).unwrap();
        let zq = LorentzTensor2::skew_from_fn(|_, _| CVec::zeros(1, Order::One));
        let zqb = LorentzTensor2::skew_from_fn(|_, _| CRow::zeros(1, Order::One));
        let p = momentum_p(&f, &zq, &zqb, &s.phi, &c);
        assert_eq!(p, f);
    }

    #[test]
    fn kg_hamiltonian_unit_timelike() {
        let c = coupling(1, 1.0, 1.0);
        let o = Order::Zero;
        let pi = LorentzCoVec::from_fn(|mu| {
            CVec::from_values(&[C64::new(if mu == 0 { 1.0 } else { 0.0 }, 0.0)], o)
        });
        assert_eq!(hamiltonian_kg(&pi, &c).value(), C64::new(1.0, 0.0));
    }

    #[test]
    fn full_and_reduced_agree() {
        let c = coupling(1, 0.9, 1.4);
        let s = n1_state(&SpacetimePoint([0.3, -0.2, 0.6, 0.1]));
        let t = field_tensors(&s, &c).unwrap();
        let m = canonical_momenta(&s, &t, &c).unwrap();
        let full = hamiltonian_gauge(&s, &m, &c, Variant::Full)
            .unwrap()
            .value();
        let red = hamiltonian_gauge(&s, &m, &c, Variant::Reduced)
            .unwrap()
            .value();
        assert!((full - red).norm() <= 1e-12 * (1.0 + full.norm()));
    }

    #[test]
    fn constant_b_vacuum_is_mass_term() {
        let mass = 1.7;
        let c = coupling(1, 0.6, mass);
        let o = Order::Two;
        let mut s = FieldState::zeros(1, o);
        let bv = [0.3, -0.5, 0.25, 1.1];
        s.b = LorentzCoVec::from_fn(|mu| CVec::from_values(&[C64::new(bv[mu], 0.2)], o));
        let r = proca_residual(&s, &c).unwrap();
        for mu in 0..4 {
            let want = C64::new(bv[mu], 0.2) * (-mass * mass * Metric::MostlyMinus.diag(mu));
            assert!((r[mu][0].value() - want).norm() <= 1e-13);
        }
    }

    #[test]
    fn split_line1_vanishes_for_real_fields() {
        let c = coupling(1, 0.8, 1.3);
        let p = SpacetimePoint([0.2, 0.1, -0.4, 0.3]);
        let s = FieldState {
            phi: CVec(vec![ev("t*x + 0.4", &p)]),
            a: LorentzCoVec::from_fn(|mu| {
                CMat::from_fn(1, |_, _| ev(["x", "t*z", "y^2", "0.2"][mu], &p))
            }),
            b: LorentzCoVec::from_fn(|mu| CVec(vec![ev(["y*z", "sin(t)", "x", "t*t"][mu], &p)])),
        };
        let t = field_tensors(&s, &c).unwrap();
        let split = split_renormalizable(&s, &t, &c).unwrap();
        assert!(split.line1.value().norm() <= 1e-12);
        let l3 = lagrangian_l3_kg(&s, &t, &c).unwrap().value();
        let sum = split.l_r.value() + split.l_nr.value();
        assert!((sum - l3).norm() <= 1e-12 * (1.0 + l3.norm()));
    }

    #[test]
    fn base_residual_vanishes_for_minimal_coupling() {
        let c = coupling(1, 0.8, 1.3);
        let s = n1_state(&SpacetimePoint([0.2, 0.1, -0.4, 0.3]));
        let pi = covariant_derivatives(&s, &c).unwrap().raised(c.metric());
        let r = canonical_eq_base_residual(&s, &pi, &c).unwrap();
        assert_eq!(r.max_abs(), 0.0);
    }
}
