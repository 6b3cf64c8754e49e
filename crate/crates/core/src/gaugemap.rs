//! Coupling data, the gauge map, and the transformation rules for fields
//! and momenta.
//!
//! Conventions, in multiplet matrix notation: φ is a column, φ̄ = φ† a row,
//! a_μ an N×N Hermitian matrix, b_μ a column, M a real constant matrix and
//! M̃ = M⁻¹. The map is Φ = Uφ + φ̂ with U = exp(i·generator).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fieldexpr::FieldExpr;
use crate::jets::{Jet, Order, SpacetimePoint, C64};
use crate::tensoralg::{
    mat_exp_i_hermitian, CMat, CRow, CVec, LorentzCoVec, LorentzTensor2, Metric, MAX_N,
};

/// Tolerance for M·M̃ = I.
pub const INVERSE_TOL: f64 = 1e-12;
/// Relative tolerance for M Mᵀ ∝ I.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

pub(crate) const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingData {
    n: usize,
    g: f64,
    m: DMatrix<f64>,
    m_tilde: DMatrix<f64>,
    metric: Metric,
    jm: CMat,
    jm_t: CMat,
    jmt: CMat,
    jmt_t: CMat,
}

impl CouplingData {
    /// Validated coupling data: M must be invertible and orthogonal up to scale.
    pub fn new(g: f64, m: DMatrix<f64>, metric: Metric) -> Result<Self> {
        let c = Self::new_unchecked(g, m, metric)?;
        let defect = c.orthogonality_defect();
        if defect > ORTHOGONALITY_TOL {
            return Err(Error::config(
                "/mass_matrix",
                format!("M Mᵀ is not a multiple of the identity (relative defect {defect:e})"),
            ));
        }
        Ok(c)
    }

    /// Coupling data that is only required to be invertible.
    pub fn new_unchecked(g: f64, m: DMatrix<f64>, metric: Metric) -> Result<Self> {
        let n = m.nrows();
        if n == 0 || n > MAX_N {
            return Err(Error::config(
                "/N",
                format!("multiplet size {n} outside 1..={MAX_N}"),
            ));
        }
        if m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.ncols(),
            });
        }
        if !g.is_finite() || m.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("/g", "coupling data must be finite"));
        }
        let m_tilde = m
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::config("/mass_matrix", "mass matrix is singular"))?;
        let residual = (&m * &m_tilde - DMatrix::identity(n, n)).amax();
        if residual > INVERSE_TOL {
            return Err(Error::config(
                "/mass_matrix",
                format!("mass matrix is ill-conditioned (M M̃ − I = {residual:e})"),
            ));
        }
        let o = Order::Two;
        Ok(Self {
            n,
            g,
            jm: CMat::from_real(&m, o),
            jm_t: CMat::from_real(&m.transpose(), o),
            jmt: CMat::from_real(&m_tilde, o),
            jmt_t: CMat::from_real(&m_tilde.transpose(), o),
            m,
            m_tilde,
            metric,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    /// `i·g`
    pub fn ig(&self) -> C64 {
        I * self.g
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn mass_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn mass_inverse(&self) -> &DMatrix<f64> {
        &self.m_tilde
    }

    /// max |M Mᵀ − s² I| / s² with s² = tr(M Mᵀ)/N.
    pub fn orthogonality_defect(&self) -> f64 {
        let mmt = &self.m * self.m.transpose();
        let s2 = mmt.trace() / self.n as f64;
        (mmt - DMatrix::identity(self.n, self.n) * s2).amax() / s2
    }

    /// M as a constant jet matrix.
    pub fn m(&self) -> &CMat {
        &self.jm
    }

    /// Mᵀ
    pub fn m_t(&self) -> &CMat {
        &self.jm_t
    }

    /// M̃
    pub fn mt(&self) -> &CMat {
        &self.jmt
    }

    /// M̃ᵀ
    pub fn mt_t(&self) -> &CMat {
        &self.jmt_t
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    /// Ragged upper triangle: row i holds entries (i, i..N). The diagonal's
    /// real part is used; entries below follow by conjugation.
    Matrix(Vec<Vec<FieldExpr>>),
    /// N = 1 only: U = exp(iΛ).
    Lambda(FieldExpr),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaugeMapSpec {
    pub generator: Generator,
    pub shift: Vec<FieldExpr>,
}

impl GaugeMapSpec {
    /// The identity map for a multiplet of size `n`.
    pub fn identity(n: usize) -> Self {
        let zero = FieldExpr::Literal(C64::new(0.0, 0.0));
        Self {
            generator: Generator::Matrix((0..n).map(|i| vec![zero.clone(); n - i]).collect()),
            shift: vec![zero; n],
        }
    }

    pub fn n(&self) -> usize {
        self.shift.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        match &self.generator {
            Generator::Matrix(rows) => {
                if rows.len() != n {
                    return Err(Error::config(
                        "/map/generator",
                        format!("expected {n} rows, found {}", rows.len()),
                    ));
                }
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != n - i {
                        return Err(Error::config(
                            format!("/map/generator/{i}"),
                            format!(
                                "row {i} of the upper triangle needs {} entries, found {}",
                                n - i,
                                row.len()
                            ),
                        ));
                    }
                }
            }
            Generator::Lambda(_) if n != 1 => {
                return Err(Error::config(
                    "/map/lambda",
                    "a phase Λ is only allowed for N = 1",
                ));
            }
            Generator::Lambda(_) => {}
        }
        Ok(())
    }

    /// Hermitian generator H with U = exp(iH).
    pub fn eval_generator(&self, p: &SpacetimePoint, order: Order) -> Result<CMat> {
        self.validate()?;
        match &self.generator {
            Generator::Lambda(l) => {
                let v = l.eval(p, order)?.re();
                Ok(CMat::from_fn(1, |_, _| v))
            }
            Generator::Matrix(rows) => {
                let n = rows.len();
                let mut h = CMat::zeros(n, order);
                for (i, row) in rows.iter().enumerate() {
                    for (k, e) in row.iter().enumerate() {
                        let j = i + k;
                        let v = e.eval(p, order)?;
                        if i == j {
                            h[(i, i)] = v.re();
                        } else {
                            h[(i, j)] = v;
                            h[(j, i)] = v.conj();
                        }
                    }
                }
                Ok(h)
            }
        }
    }
}

/// U and φ̂ evaluated at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct MapAtPoint {
    pub u: CMat,
    pub shift: CVec,
}

impl MapAtPoint {
    pub fn identity(n: usize, order: Order) -> Self {
        Self {
            u: CMat::identity(n, order),
            shift: CVec::zeros(n, order),
        }
    }

    /// This map applied after `first`.
    pub fn compose_after(&self, first: &MapAtPoint) -> MapAtPoint {
        MapAtPoint {
            u: &self.u * &first.u,
            shift: &(&self.u * &first.shift) + &self.shift,
        }
    }
}

pub fn eval_gauge_map(spec: &GaugeMapSpec, p: &SpacetimePoint, order: Order) -> Result<MapAtPoint> {
    let h = spec.eval_generator(p, order)?;
    let u = mat_exp_i_hermitian(&h)?;
    let shift = spec
        .shift
        .iter()
        .map(|e| e.eval(p, order))
        .collect::<Result<Vec<_>>>()?;
    Ok(MapAtPoint {
        u,
        shift: CVec(shift),
    })
}

/// Base fields and gauge fields at a point. Indices on `a` and `b` are down.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub phi: CVec,
    pub a: LorentzCoVec<CMat>,
    pub b: LorentzCoVec<CVec>,
}

impl FieldState {
    pub fn n(&self) -> usize {
        self.phi.len()
    }

    pub fn zeros(n: usize, order: Order) -> Self {
        Self {
            phi: CVec::zeros(n, order),
            a: LorentzCoVec::from_fn(|_| CMat::zeros(n, order)),
            b: LorentzCoVec::from_fn(|_| CVec::zeros(n, order)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        for mu in 0..4 {
            check(n, self.a[mu].n())?;
            check(n, self.b[mu].len())?;
            let deviation = self.a[mu].hermiticity_defect();
            if deviation > INVERSE_TOL {
                return Err(Error::NotHermitian { deviation });
            }
        }
        Ok(())
    }

    pub fn bbar(&self, mu: usize) -> CRow {
        self.b[mu].adjoint()
    }
}

/// Momenta with all Lorentz indices up.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumState {
    pub pi: LorentzCoVec<CVec>,
    pub p: LorentzTensor2<CMat>,
    pub q: LorentzTensor2<CVec>,
    pub qbar: LorentzTensor2<CRow>,
}

impl MomentumState {
    pub fn pibar(&self, mu: usize) -> CRow {
        self.pi[mu].adjoint()
    }
}

pub(crate) fn check(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Φ = Uφ + φ̂ and Π^μ = Uπ^μ.
pub fn transform_base(
    phi: &CVec,
    pi: &LorentzCoVec<CVec>,
    map: &MapAtPoint,
) -> Result<(CVec, LorentzCoVec<CVec>)> {
    let n = map.u.n();
    check(n, phi.len())?;
    check(n, map.shift.len())?;
    for mu in 0..4 {
        check(n, pi[mu].len())?;
    }
    let big_phi = &(&map.u * phi) + &map.shift;
    let big_pi = pi.map(|v| &map.u * v);
    Ok((big_phi, big_pi))
}

/// φ = U†(Φ − φ̂) and π^μ = U†Π^μ.
pub fn inverse_base(
    big_phi: &CVec,
    big_pi: &LorentzCoVec<CVec>,
    map: &MapAtPoint,
) -> Result<(CVec, LorentzCoVec<CVec>)> {
    let n = map.u.n();
    check(n, big_phi.len())?;
    check(n, map.shift.len())?;
    let ud = map.u.adjoint();
    let phi = &ud * &(big_phi - &map.shift);
    let pi = big_pi.map(|v| &ud * v);
    Ok((phi, pi))
}

/// A_μ = U a_μ U† + (1/ig) ∂_μU U†.
pub fn transform_gauge_a(a: &LorentzCoVec<CMat>, u: &CMat, g: f64) -> Result<LorentzCoVec<CMat>> {
    if g == 0.0 {
        return Err(Error::ZeroCoupling);
    }
    let ud = u.adjoint();
    let inv_ig = C64::new(1.0, 0.0) / (I * g);
    LorentzCoVec::try_from_fn(|mu| {
        check(u.n(), a[mu].n())?;
        let du = u.partial(mu)?;
        Ok(&(&(u * &a[mu]) * &ud) + &(&du * &ud).scale(inv_ig))
    })
}

/// The same rule written out with explicit multiplet indices.
pub fn transform_gauge_a_components(
    a: &LorentzCoVec<CMat>,
    u: &CMat,
    g: f64,
) -> Result<LorentzCoVec<CMat>> {
    if g == 0.0 {
        return Err(Error::ZeroCoupling);
    }
    let n = u.n();
    let inv_ig = C64::new(1.0, 0.0) / (I * g);
    LorentzCoVec::try_from_fn(|mu| {
        check(n, a[mu].n())?;
        let du = u.partial(mu)?;
        let order = du.order();
        Ok(CMat::from_fn(n, |i, j| {
            let mut s = Jet::zero(order);
            for k in 0..n {
                for l in 0..n {
                    s += u[(i, k)] * a[mu][(k, l)] * u[(j, l)].conj();
                }
                s += (du[(i, k)] * u[(j, k)].conj()).scale(inv_ig);
            }
            s
        }))
    })
}

/// B_μ = M̃ (U M b_μ − ig A_μ φ̂ + ∂_μφ̂).
pub fn transform_gauge_b(
    b: &LorentzCoVec<CVec>,
    big_a: &LorentzCoVec<CMat>,
    map: &MapAtPoint,
    c: &CouplingData,
) -> Result<LorentzCoVec<CVec>> {
    check(c.n(), map.u.n())?;
    LorentzCoVec::try_from_fn(|mu| {
        check(c.n(), b[mu].len())?;
        let inner = &(&(&map.u * &(c.m() * &b[mu])) - &(&big_a[mu] * &map.shift).scale(c.ig()))
            + &map.shift.partial(mu)?;
        Ok(c.mt() * &inner)
    })
}

/// B̄_μ = (b̄_μ Mᵀ U† + ig φ̂† A_μ + ∂_μφ̂†) M̃ᵀ.
pub fn transform_gauge_bbar(
    b: &LorentzCoVec<CVec>,
    big_a: &LorentzCoVec<CMat>,
    map: &MapAtPoint,
    c: &CouplingData,
) -> Result<LorentzCoVec<CRow>> {
    check(c.n(), map.u.n())?;
    let ud = map.u.adjoint();
    let sbar = map.shift.adjoint();
    LorentzCoVec::try_from_fn(|mu| {
        check(c.n(), b[mu].len())?;
        let inner = &(&(&(&b[mu].adjoint() * c.m_t()) * &ud) + &(&sbar * &big_a[mu]).scale(c.ig()))
            + &sbar.partial(mu)?;
        Ok(&inner * c.mt_t())
    })
}

/// Φ, A, B from φ, a, b.
pub fn transform_fields(s: &FieldState, map: &MapAtPoint, c: &CouplingData) -> Result<FieldState> {
    check(c.n(), s.n())?;
    let phi = &(&map.u * &s.phi) + &map.shift;
    let a = transform_gauge_a(&s.a, &map.u, c.g())?;
    let b = transform_gauge_b(&s.b, &a, map, c)?;
    Ok(FieldState { phi, a, b })
}

/// The combination p + ig M̃ᵀq⊗φ̄ − ig φ⊗q̄M̃, which transforms by conjugation.
pub fn p_combination(p: &CMat, q: &CVec, qbar: &CRow, phi: &CVec, c: &CouplingData) -> CMat {
    let left = (c.mt_t() * q).outer(&phi.adjoint()).scale(c.ig());
    let right = phi.outer(&(qbar * c.mt())).scale(c.ig());
    &(p + &left) - &right
}

/// P, Q, Q̄ from p, q, q̄. Index positions are carried through unchanged.
pub fn transform_momenta_pq(
    m: &MomentumState,
    phi: &CVec,
    map: &MapAtPoint,
    c: &CouplingData,
) -> Result<(
    LorentzTensor2<CMat>,
    LorentzTensor2<CVec>,
    LorentzTensor2<CRow>,
)> {
    let n = c.n();
    check(n, phi.len())?;
    check(n, map.u.n())?;
    check(n, m.q[(0, 1)].len())?;
    check(n, m.p[(0, 1)].n())?;
    let u = &map.u;
    let ud = u.adjoint();
    let big_phi = &(u * phi) + &map.shift;
    let big_phibar = big_phi.adjoint();
    // Q = Mᵀ U M̃ᵀ q, Q̄ = q̄ M̃ U† M
    let qmap = &(c.m_t() * u) * c.mt_t();
    let qbar_map = &(c.mt() * &ud) * c.m();
    let big_q = LorentzTensor2::skew_from_fn(|mu, nu| &qmap * &m.q[(mu, nu)]);
    let big_qbar = LorentzTensor2::skew_from_fn(|mu, nu| &m.qbar[(mu, nu)] * &qbar_map);
    let big_p = LorentzTensor2::skew_from_fn(|mu, nu| {
        let k = p_combination(&m.p[(mu, nu)], &m.q[(mu, nu)], &m.qbar[(mu, nu)], phi, c);
        let conj = &(u * &k) * &ud;
        let left = (c.mt_t() * &big_q[(mu, nu)])
            .outer(&big_phibar)
            .scale(c.ig());
        let right = big_phi.outer(&(&big_qbar[(mu, nu)] * c.mt())).scale(c.ig());
        &(&conj - &left) + &right
    });
    Ok((big_p, big_q, big_qbar))
}

/// (Dφ)_μ = ∂_μφ − ig a_μ φ − M b_μ.
pub fn covariant_derivative(
    phi: &CVec,
    a: &LorentzCoVec<CMat>,
    b: &LorentzCoVec<CVec>,
    c: &CouplingData,
    mu: usize,
) -> Result<CVec> {
    check(c.n(), phi.len())?;
    Ok(&(&phi.partial(mu)? - &(&a[mu] * phi).scale(c.ig())) - &(c.m() * &b[mu]))
}

/// (Dφ)†_μ = ∂_μφ̄ + ig φ̄ a_μ − b̄_μ Mᵀ.
pub fn covariant_derivative_adj(
    phi: &CVec,
    a: &LorentzCoVec<CMat>,
    b: &LorentzCoVec<CVec>,
    c: &CouplingData,
    mu: usize,
) -> Result<CRow> {
    check(c.n(), phi.len())?;
    let phibar = phi.adjoint();
    Ok(&(&phibar.partial(mu)? + &(&phibar * &a[mu]).scale(c.ig())) - &(&b[mu].adjoint() * c.m_t()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> FieldExpr {
        FieldExpr::parse(s).unwrap()
    }

    fn coupling(n: usize, g: f64) -> CouplingData {
        CouplingData::new(g, DMatrix::identity(n, n) * 1.5, Metric::MostlyMinus).unwrap()
    }

    fn pt() -> SpacetimePoint {
        SpacetimePoint([0.3, -0.4, 0.2, 0.7])
    }

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + a.norm() + b.norm())
    }

    #[test]
    fn identity_map() {
        let m = eval_gauge_map(&GaugeMapSpec::identity(2), &pt(), Order::Two).unwrap();
        assert_eq!(m.u, CMat::identity(2, Order::Two));
        assert_eq!(m.shift, CVec::zeros(2, Order::Two));
    }

    #[test]
    fn phase_pi_gives_minus_one() {
        let spec = GaugeMapSpec {
            generator: Generator::Lambda(e("t")),
            shift: vec![e("0")],
        };
        let m = eval_gauge_map(
            &spec,
            &SpacetimePoint([std::f64::consts::PI, 0.0, 0.0, 0.0]),
            Order::Two,
        )
        .unwrap();
        assert!(close(m.u[(0, 0)].value(), C64::new(-1.0, 0.0), 1e-13));
    }

    #[test]
    fn lambda_rejected_for_n2() {
        let spec = GaugeMapSpec {
            generator: Generator::Lambda(e("t")),
            shift: vec![e("0"), e("0")],
        };
        assert!(matches!(spec.validate(), Err(Error::Config { .. })));
    }

    #[test]
    fn du_udag_is_skew_hermitian() {
        let spec = GaugeMapSpec {
            generator: Generator::Matrix(vec![
                vec![e("t*x + 0.3"), e("(0.2 - 0.5i)*sin(y) + z")],
                vec![e("cos(t - z)")],
            ]),
            shift: vec![e("0"), e("0")],
        };
        let m = eval_gauge_map(&spec, &pt(), Order::Two).unwrap();
        for mu in 0..4 {
            let k = &m.u.partial(mu).unwrap() * &m.u.adjoint();
            let s = &k + &k.adjoint();
            assert!(s.values().iter().all(|v| v.norm() < 1e-11));
        }
    }

    #[test]
    fn non_orthogonal_mass_matrix_cites_field() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        match CouplingData::new(1.0, m, Metric::MostlyMinus) {
            Err(Error::Config { pointer, .. }) => assert_eq!(pointer, "/mass_matrix"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn base_roundtrip_and_pure_translation() {
        let spec = GaugeMapSpec {
            generator: Generator::Matrix(vec![vec![e("t"), e("x*i")], vec![e("y")]]),
            shift: vec![e("0.5*t"), e("i*z")],
        };
        let m = eval_gauge_map(&spec, &pt(), Order::Two).unwrap();
        let phi = CVec::from_values(&[C64::new(0.1, 0.2), C64::new(-0.3, 0.4)], Order::Two);
        let pi = LorentzCoVec::from_fn(|mu| phi.scale(C64::new(mu as f64, 1.0)));
        let (big_phi, big_pi) = transform_base(&phi, &pi, &m).unwrap();
        let (back, back_pi) = inverse_base(&big_phi, &big_pi, &m).unwrap();
        for i in 0..2 {
            assert!(close(back[i].value(), phi[i].value(), 1e-13));
            assert!(close(back_pi[3][i].value(), pi[3][i].value(), 1e-13));
        }
        let zero = CVec::zeros(2, Order::Two);
        let (t, _) = transform_base(&zero, &pi, &m).unwrap();
        assert_eq!(t.values(), m.shift.values());
    }

    #[test]
    fn n1_gauge_field_shift() {
        let g = 0.7;
        let spec = GaugeMapSpec {
            generator: Generator::Lambda(e("t*x + sin(y)")),
            shift: vec![e("0")],
        };
        let p = pt();
        let m = eval_gauge_map(&spec, &p, Order::Two).unwrap();
        let a = LorentzCoVec::from_fn(|_| CMat::zeros(1, Order::Two));
        let big_a = transform_gauge_a(&a, &m.u, g).unwrap();
        let lam = e("t*x + sin(y)").eval(&p, Order::Two).unwrap();
        for mu in 0..4 {
            let want = lam.partial(mu).unwrap().scale_real(1.0 / g);
            assert!(close(big_a[mu][(0, 0)].value(), want.value(), 1e-13));
        }
        assert!(matches!(
            transform_gauge_a(&a, &m.u, 0.0),
            Err(Error::ZeroCoupling)
        ));
    }

    #[test]
    fn pure_shift_b_rule() {
        let c = coupling(2, 1.1);
        let spec = GaugeMapSpec {
            generator: Generator::Matrix(vec![vec![e("0"), e("0")], vec![e("0")]]),
            shift: vec![e("t"), e("0")],
        };
        let m = eval_gauge_map(&spec, &pt(), Order::Two).unwrap();
        let s = FieldState::zeros(2, Order::Two);
        let t = transform_fields(&s, &m, &c).unwrap();
        assert!(close(t.b[0][0].value(), C64::new(1.0 / 1.5, 0.0), 1e-15));
        assert_eq!(t.b[1][0].value(), C64::new(0.0, 0.0));
    }

    #[test]
    fn covariant_derivative_reduces() {
        let c = coupling(1, 0.9);
        let p = pt();
        let phi = CVec(vec![e("t*x").eval(&p, Order::Two).unwrap()]);
        let zero = FieldState::zeros(1, Order::Two);
        let d = covariant_derivative(&phi, &zero.a, &zero.b, &c, 1).unwrap();
        assert_eq!(d[0].value(), C64::new(p.0[0], 0.0));

        let phi = CVec::from_values(&[C64::new(2.0, 0.0)], Order::Two);
        let a = LorentzCoVec::from_fn(|mu| {
            CMat::from_values(1, &[C64::new(mu as f64, 0.0)], Order::Two)
        });
        let d = covariant_derivative(&phi, &a, &zero.b, &c, 2).unwrap();
        assert!(close(d[0].value(), C64::new(0.0, -0.9 * 2.0 * 2.0), 1e-15));
    }
}
