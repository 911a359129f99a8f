//! Heun and confluent-Heun parameter records, differential operators and
//! Frobenius local solutions.
//!
//! The Heun operator in the variable x is
//!
//!   M_x = x(x−1)(x−a) ∂² + [γ(x−1)(x−a) + δx(x−a) + εx(x−1)] ∂ + αβx,
//!
//! with ε = α+β+1−γ−δ, and the equation reads [M_x − q] H = 0.  The
//! confluent form (σ in place of q) is
//!
//!   M_x = x(x−1) ∂² + [−γ + (γ+δ)x + ρx(x−1)] ∂ + αρx.
//!
//! Operators are applied through jets: any function that can be evaluated
//! on a [`Jet2`] can be fed to them.  Residuals are scaled by the sum of
//! the magnitudes of the individual operator terms, so a pass is
//! scale-free.
//!
//! The Frobenius recurrences used here are derived by coefficient
//! matching and certified by the operator-residual tests, not copied
//! from a reference.

use crate::error::{Error, Result};
use crate::numerics::{cr, CValue, C64, Jet2, ONE, ZERO};
use crate::specialfn::is_integer;

pub const RESIDUAL_FLOOR: f64 = 1e-30;

/// Singularity parameters (a; α, β, γ, δ) and accessory parameter q of
/// the Heun equation.  ε is always derived, never stored.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct HeunParams {
    pub a: C64,
    pub q: C64,
    pub alpha: C64,
    pub beta: C64,
    pub gamma: C64,
    pub delta: C64,
}

impl HeunParams {
    pub fn new(a: C64, q: C64, alpha: C64, beta: C64, gamma: C64, delta: C64) -> Result<Self> {
        if a == ZERO || a == ONE {
            return Err(Error::DegenerateParameter(format!(
                "a = {a} collapses two singular points"
            )));
        }
        Ok(HeunParams { a, q, alpha, beta, gamma, delta })
    }

    /// ε = α + β + 1 − γ − δ.
    pub fn epsilon(&self) -> C64 {
        self.alpha + self.beta + ONE - self.gamma - self.delta
    }

    pub fn greeks(&self) -> [C64; 4] {
        [self.alpha, self.beta, self.gamma, self.delta]
    }
}

/// Parameters (σ; ρ, α, γ, δ) of the confluent Heun equation.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct CheParams {
    pub sigma: C64,
    pub rho: C64,
    pub alpha: C64,
    pub gamma: C64,
    pub delta: C64,
}

impl CheParams {
    pub fn new(sigma: C64, rho: C64, alpha: C64, gamma: C64, delta: C64) -> Result<Self> {
        if rho == ZERO {
            return Err(Error::DegenerateParameter("rho = 0".into()));
        }
        Ok(CheParams { sigma, rho, alpha, gamma, delta })
    }
}

/// Which coordinate of a bivariate jet the operator differentiates.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum CoordSlot {
    X,
    Y,
}

fn slots(j: &Jet2, slot: CoordSlot) -> (C64, C64, C64) {
    match slot {
        CoordSlot::X => (j.v, j.dx, j.dxx),
        CoordSlot::Y => (j.v, j.dy, j.dyy),
    }
}

/// The individual terms of M_x applied to a jet at the point `x`.
pub fn heun_operator_terms(p: &HeunParams, j: &Jet2, x: C64, slot: CoordSlot) -> [C64; 5] {
    let (v, d1, d2) = slots(j, slot);
    let e = p.epsilon();
    [
        x * (x - ONE) * (x - p.a) * d2,
        p.gamma * (x - ONE) * (x - p.a) * d1,
        p.delta * x * (x - p.a) * d1,
        e * x * (x - ONE) * d1,
        p.alpha * p.beta * x * v,
    ]
}

pub fn heun_operator_apply(
    p: &HeunParams,
    f: impl Fn(Jet2) -> Result<Jet2>,
    x: C64,
    slot: CoordSlot,
) -> Result<C64> {
    if x == ZERO || x == ONE || x == p.a {
        return Err(Error::EvaluationAtSingularity);
    }
    let seed = match slot {
        CoordSlot::X => Jet2::var_x(x),
        CoordSlot::Y => Jet2::var_y(x),
    };
    let j = f(seed)?;
    if !j.is_finite() {
        return Err(Error::NumericOverflow);
    }
    Ok(heun_operator_terms(p, &j, x, slot).iter().sum())
}

/// The individual terms of the confluent operator at `x`.
pub fn che_operator_terms(p: &CheParams, j: &Jet2, x: C64, slot: CoordSlot) -> [C64; 5] {
    let (v, d1, d2) = slots(j, slot);
    [
        x * (x - ONE) * d2,
        -p.gamma * d1,
        (p.gamma + p.delta) * x * d1,
        p.rho * x * (x - ONE) * d1,
        p.alpha * p.rho * x * v,
    ]
}

pub fn che_operator_apply(
    p: &CheParams,
    f: impl Fn(Jet2) -> Result<Jet2>,
    x: C64,
    slot: CoordSlot,
) -> Result<C64> {
    if x == ZERO || x == ONE {
        return Err(Error::EvaluationAtSingularity);
    }
    let seed = match slot {
        CoordSlot::X => Jet2::var_x(x),
        CoordSlot::Y => Jet2::var_y(x),
    };
    let j = f(seed)?;
    if !j.is_finite() {
        return Err(Error::NumericOverflow);
    }
    Ok(che_operator_terms(p, &j, x, slot).iter().sum())
}

/// Formal adjoint of M_y: for M = A∂² + B∂ + C this is
/// A∂² + (2A′−B)∂ + (A″−B′+C), which expands to first-order
/// coefficients (2−γ), (2−δ), (2−ε) and the zeroth-order block
/// [6−2(α+β+1)+αβ]y + a(γ+δ−2) + ε + γ − 2.
pub fn adjoint_operator_terms(p: &HeunParams, j: &Jet2, y: C64) -> [C64; 5] {
    let (v, d1, d2) = (j.v, j.dy, j.dyy);
    let e = p.epsilon();
    let two = cr(2.0);
    let zero_block = (cr(6.0) - 2.0 * (p.alpha + p.beta + ONE) + p.alpha * p.beta) * y
        + p.a * (p.gamma + p.delta - two)
        + e
        + p.gamma
        - two;
    [
        y * (y - ONE) * (y - p.a) * d2,
        (two - p.gamma) * (y - ONE) * (y - p.a) * d1,
        (two - p.delta) * y * (y - p.a) * d1,
        (two - e) * y * (y - ONE) * d1,
        zero_block * v,
    ]
}

pub fn adjoint_operator_apply(
    p: &HeunParams,
    f: impl Fn(Jet2) -> Result<Jet2>,
    y: C64,
) -> Result<C64> {
    if y == ZERO || y == ONE || y == p.a {
        return Err(Error::EvaluationAtSingularity);
    }
    let j = f(Jet2::var_y(y))?;
    if !j.is_finite() {
        return Err(Error::NumericOverflow);
    }
    Ok(adjoint_operator_terms(p, &j, y).iter().sum())
}

/// Indicial exponent choice at x = 0.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ExponentChoice {
    /// τ = 0
    Zero,
    /// τ = 1 − γ
    OneMinusGamma,
}

/// Truncated power-series local solution x^τ Σ cₙ xⁿ at x = 0.
#[derive(Clone, Debug)]
pub struct FrobeniusSolution {
    pub exponent: C64,
    pub coefficients: Vec<C64>,
    pub radius: f64,
}

impl FrobeniusSolution {
    pub fn eval<T: CValue>(&self, z: T) -> Result<T> {
        if z.value().norm() > self.radius * (1.0 + 1e-9) {
            return Err(Error::OutsideValidity);
        }
        let mut sum = T::from_c(ZERO);
        for &ck in self.coefficients.iter().rev() {
            sum = sum.mul(z).add_c(ck);
        }
        if self.exponent != ZERO {
            sum = sum.mul(z.powc(self.exponent)?);
        }
        if !sum.is_finite() {
            return Err(Error::NumericOverflow);
        }
        Ok(sum)
    }
}

const FROBENIUS_TERM_CAP: usize = 600;
const FROBENIUS_TAIL_EPS: f64 = 1e-14;

/// Grow the series until the last few terms at the validity radius fall
/// below `FROBENIUS_TAIL_EPS` relative to the accumulated magnitude.
fn truncate_series(
    mut next: impl FnMut(usize, C64, C64) -> Result<C64>,
    min_terms: usize,
    radius: f64,
) -> Result<Vec<C64>> {
    let mut coeffs = vec![ONE];
    let mut prev = ZERO;
    let mut cur = ONE;
    let mut acc = 1.0f64;
    let mut quiet = 0usize;
    for m in 0..FROBENIUS_TERM_CAP {
        let c_next = next(m, cur, prev)?;
        if !c_next.is_finite() {
            return Err(Error::NumericOverflow);
        }
        coeffs.push(c_next);
        prev = cur;
        cur = c_next;
        let t = c_next.norm() * radius.powi(coeffs.len() as i32 - 1);
        acc += t;
        if t < FROBENIUS_TAIL_EPS * acc {
            quiet += 1;
            if quiet >= 4 && coeffs.len() >= min_terms {
                return Ok(coeffs);
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::NoConvergenceEstimate)
}

/// Frobenius solution of [M_x − q]H = 0 at x = 0.
///
/// Substituting H = Σ cₘ x^{m+τ} gives the three-term recurrence
///
///   a(m+1+τ)(m+τ+γ) c_{m+1} =
///     [(1+a)(m+τ)(m+τ−1) + (γ(1+a)+δa+ε)(m+τ) + q] c_m
///     − (m+τ−1+α)(m+τ−1+β) c_{m−1},
///
/// normalised by c₀ = 1.  Validity radius 0.3·min(1,|a|).
pub fn frobenius_heun(
    p: &HeunParams,
    choice: ExponentChoice,
    n_terms: usize,
) -> Result<FrobeniusSolution> {
    if choice == ExponentChoice::OneMinusGamma && is_integer(p.gamma) {
        return Err(Error::LogarithmicCase);
    }
    let tau = match choice {
        ExponentChoice::Zero => ZERO,
        ExponentChoice::OneMinusGamma => ONE - p.gamma,
    };
    let e = p.epsilon();
    let radius = 0.3 * p.a.norm().min(1.0);
    let b1 = p.gamma * (ONE + p.a) + p.delta * p.a + e;
    let coefficients = truncate_series(
        |m, cm, cm1| {
            let mt = cr(m as f64) + tau;
            let indicial = p.a * (mt + ONE) * (mt + p.gamma);
            if indicial == ZERO {
                return Err(Error::LogarithmicCase);
            }
            let main = ((ONE + p.a) * mt * (mt - ONE) + b1 * mt + p.q) * cm;
            let lower = (mt - ONE + p.alpha) * (mt - ONE + p.beta) * cm1;
            Ok((main - lower) / indicial)
        },
        n_terms.max(8),
        radius,
    )?;
    Ok(FrobeniusSolution { exponent: tau, coefficients, radius })
}

/// Frobenius solution of [M_x − σ]H = 0 for the confluent equation,
/// from the recurrence
///
///   (m+1+τ)(m+τ+γ) c_{m+1} =
///     [(m+τ)(m+τ−1) + (γ+δ−ρ)(m+τ) − σ] c_m + ρ(m+τ−1+α) c_{m−1}.
pub fn frobenius_che(
    p: &CheParams,
    choice: ExponentChoice,
    n_terms: usize,
) -> Result<FrobeniusSolution> {
    if choice == ExponentChoice::OneMinusGamma && is_integer(p.gamma) {
        return Err(Error::LogarithmicCase);
    }
    let tau = match choice {
        ExponentChoice::Zero => ZERO,
        ExponentChoice::OneMinusGamma => ONE - p.gamma,
    };
    let radius = 0.3;
    let coefficients = truncate_series(
        |m, cm, cm1| {
            let mt = cr(m as f64) + tau;
            let indicial = (mt + ONE) * (mt + p.gamma);
            if indicial == ZERO {
                return Err(Error::LogarithmicCase);
            }
            let main = (mt * (mt - ONE) + (p.gamma + p.delta - p.rho) * mt - p.sigma) * cm;
            let lower = p.rho * (mt - ONE + p.alpha) * cm1;
            Ok((main + lower) / indicial)
        },
        n_terms.max(8),
        radius,
    )?;
    Ok(FrobeniusSolution { exponent: tau, coefficients, radius })
}

/// Weight y^{γ−1}(1−y)^{δ−1}(1−y/a)^{ε−1} of the Heun integral relation,
/// evaluated on a jet.
pub fn heun_weight(p: &HeunParams, y: Jet2) -> Result<Jet2> {
    let one = Jet2::constant(ONE);
    let w1 = y.pow(p.gamma - ONE)?;
    let w2 = (one - y).pow(p.delta - ONE)?;
    let w3 = (one - y.scale(ONE / p.a)).pow(p.epsilon() - ONE)?;
    Ok(w1 * w2 * w3)
}

/// Bilinear concomitant of the Heun integral relation:
/// P(x,y) = y^γ (1−y)^δ (1−y/a)^ε [H ∂G/∂y − G dH/dy].
pub fn bilinear_concomitant(
    p: &HeunParams,
    h: impl Fn(Jet2) -> Result<Jet2>,
    g: impl Fn(Jet2, Jet2) -> Result<Jet2>,
    x: C64,
    y: C64,
) -> Result<C64> {
    if y == ZERO || y == ONE || y == p.a {
        return Err(Error::EvaluationAtSingularity);
    }
    let yj = Jet2::var_y(y);
    let hj = h(yj)?;
    let gj = g(Jet2::var_x(x), yj)?;
    let one = Jet2::constant(ONE);
    let weight = yj.pow(p.gamma)?
        * (one - yj).pow(p.delta)?
        * (one - yj.scale(ONE / p.a)).pow(p.epsilon())?;
    let bracket = hj.v * gj.dy - gj.v * hj.dy;
    let r = weight.v * bracket;
    if !r.is_finite() {
        return Err(Error::NumericOverflow);
    }
    Ok(r)
}

/// Confluent-case concomitant with weight e^{ρy} y^γ (1−y)^δ.
pub fn bilinear_concomitant_che(
    p: &CheParams,
    h: impl Fn(Jet2) -> Result<Jet2>,
    g: impl Fn(Jet2, Jet2) -> Result<Jet2>,
    x: C64,
    y: C64,
) -> Result<C64> {
    if y == ZERO || y == ONE {
        return Err(Error::EvaluationAtSingularity);
    }
    let yj = Jet2::var_y(y);
    let hj = h(yj)?;
    let gj = g(Jet2::var_x(x), yj)?;
    let one = Jet2::constant(ONE);
    let weight = yj.scale(p.rho).exp() * yj.pow(p.gamma)? * (one - yj).pow(p.delta)?;
    let bracket = hj.v * gj.dy - gj.v * hj.dy;
    let r = weight.v * bracket;
    if !r.is_finite() {
        return Err(Error::NumericOverflow);
    }
    Ok(r)
}

/// Concomitant of the weight-free (adjoint) formulation:
/// P(x,y) = A(y)[H K_y − K H_y] + B(y) H K with A = y(y−1)(y−a) and
/// B = (1−γ)(y−1)(y−a) + (1−δ)y(y−a) + (1−ε)y(y−1).
pub fn concomitant_adjoint_form(p: &HeunParams, hj: &Jet2, kj: &Jet2, y: C64) -> C64 {
    let e = p.epsilon();
    let aa = y * (y - ONE) * (y - p.a);
    let bb = (ONE - p.gamma) * (y - ONE) * (y - p.a)
        + (ONE - p.delta) * y * (y - p.a)
        + (ONE - e) * y * (y - ONE);
    aa * (hj.v * kj.dy - kj.v * hj.dy) + bb * hj.v * kj.v
}

/// Pointwise Lagrange identity residual
/// |H·M̄_y K − K·M_y H − ∂P/∂y| / scale for the adjoint-form P above.
pub fn lagrange_identity_residual(
    p: &HeunParams,
    h: impl Fn(Jet2) -> Result<Jet2>,
    k: impl Fn(Jet2, Jet2) -> Result<Jet2>,
    x: C64,
    y: C64,
) -> Result<f64> {
    if y == ZERO || y == ONE || y == p.a {
        return Err(Error::EvaluationAtSingularity);
    }
    let hj = h(Jet2::var_y(y))?;
    let kj = k(Jet2::var_x(x), Jet2::var_y(y))?;
    if !hj.is_finite() || !kj.is_finite() {
        return Err(Error::NumericOverflow);
    }
    let e = p.epsilon();

    let adj: C64 = adjoint_operator_terms(p, &kj, y).iter().sum();
    let my_h: C64 = heun_operator_terms(p, &hj, y, CoordSlot::Y).iter().sum();
    let lhs1 = hj.v * adj;
    let lhs2 = kj.v * my_h;

    // dP/dy assembled from the second-order jets:
    // P = A (H K_y − K H_y) + B H K
    let aa = y * (y - ONE) * (y - p.a);
    let aa1 = 3.0 * y * y - 2.0 * (ONE + p.a) * y + p.a;
    let bb = (ONE - p.gamma) * (y - ONE) * (y - p.a)
        + (ONE - p.delta) * y * (y - p.a)
        + (ONE - e) * y * (y - ONE);
    let bb1 = 2.0 * (cr(3.0) - p.gamma - p.delta - e) * y
        - (2.0 * (ONE + p.a) - p.gamma * (ONE + p.a) - p.delta * p.a - e);
    let dp = aa1 * (hj.v * kj.dy - kj.v * hj.dy)
        + aa * (hj.v * kj.dyy - kj.v * hj.dyy)
        + bb1 * hj.v * kj.v
        + bb * (hj.dy * kj.v + hj.v * kj.dy);

    let scale = lhs1.norm() + lhs2.norm() + dp.norm() + RESIDUAL_FLOOR;
    Ok((lhs1 - lhs2 - dp).norm() / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{c, rel_diff};

    fn params() -> HeunParams {
        HeunParams::new(
            c(2.5, 0.0),
            c(0.31, 0.12),
            c(0.31, 0.0),
            c(0.77, 0.0),
            c(0.58, 0.0),
            c(0.44, 0.0),
        )
        .unwrap()
    }

    fn params_complex() -> HeunParams {
        HeunParams::new(
            c(3.0, 0.7),
            c(0.2, -0.3),
            c(0.35, 0.1),
            c(0.81, -0.05),
            c(0.63, 0.07),
            c(0.49, -0.11),
        )
        .unwrap()
    }

    fn che_params() -> CheParams {
        CheParams::new(c(0.4, 0.1), c(1.1, 0.2), c(0.37, 0.0), c(0.58, 0.0), c(0.44, 0.0)).unwrap()
    }

    #[test]
    fn epsilon_is_derived() {
        let p = params();
        let e = p.alpha + p.beta + ONE - p.gamma - p.delta;
        assert_eq!(p.epsilon(), e);
        assert!(HeunParams::new(ZERO, ZERO, ONE, ONE, ONE, ONE).is_err());
        assert!(HeunParams::new(ONE, ZERO, ONE, ONE, ONE, ONE).is_err());
    }

    #[test]
    fn operator_on_constant() {
        // M_x 1 = αβx
        let p = params();
        let x = c(0.2, 0.05);
        let got = heun_operator_apply(&p, |_| Ok(Jet2::constant(ONE)), x, CoordSlot::X).unwrap();
        assert!(rel_diff(got, p.alpha * p.beta * x) < 1e-14);
    }

    #[test]
    fn operator_on_identity_map() {
        // M_x x = γ(x−1)(x−a) + δx(x−a) + εx(x−1) + αβx²
        let p = params_complex();
        let x = c(0.25, 0.1);
        let got = heun_operator_apply(&p, Ok, x, CoordSlot::X).unwrap();
        let e = p.epsilon();
        let want = p.gamma * (x - ONE) * (x - p.a)
            + p.delta * x * (x - p.a)
            + e * x * (x - ONE)
            + p.alpha * p.beta * x * x;
        assert!(rel_diff(got, want) < 1e-14);
    }

    #[test]
    fn operator_rejects_singular_points() {
        let p = params();
        assert_eq!(
            heun_operator_apply(&p, Ok, ZERO, CoordSlot::X),
            Err(Error::EvaluationAtSingularity)
        );
        assert_eq!(
            heun_operator_apply(&p, Ok, p.a, CoordSlot::X),
            Err(Error::EvaluationAtSingularity)
        );
    }

    #[test]
    fn che_operator_values() {
        let p = che_params();
        let x = c(0.2, 0.03);
        let got = che_operator_apply(&p, |_| Ok(Jet2::constant(ONE)), x, CoordSlot::X).unwrap();
        assert!(rel_diff(got, p.alpha * p.rho * x) < 1e-14);
        let got = che_operator_apply(&p, Ok, x, CoordSlot::X).unwrap();
        let want = -p.gamma
            + (p.gamma + p.delta) * x
            + p.rho * x * (x - ONE)
            + p.alpha * p.rho * x * x;
        assert!(rel_diff(got, want) < 1e-13);
    }

    #[test]
    fn adjoint_on_constant() {
        let p = params_complex();
        let y = c(0.3, 0.07);
        let got = adjoint_operator_apply(&p, |_| Ok(Jet2::constant(ONE)), y).unwrap();
        let e = p.epsilon();
        let want = (cr(6.0) - 2.0 * (p.alpha + p.beta + ONE) + p.alpha * p.beta) * y
            + p.a * (p.gamma + p.delta - cr(2.0))
            + e
            + p.gamma
            - cr(2.0);
        assert!(rel_diff(got, want) < 1e-14);
    }

    #[test]
    fn adjoint_matches_operator_in_self_adjoint_case() {
        // γ = δ = ε = 1 forces α + β = 2; then M̄ and M agree up to the
        // constant block, which vanishes.
        let p = HeunParams::new(c(2.5, 0.0), ZERO, c(0.8, 0.2), c(1.2, -0.2), ONE, ONE).unwrap();
        assert!(rel_diff(p.epsilon(), ONE) < 1e-15);
        for y in [c(0.3, 0.1), c(0.7, -0.2), c(1.9, 0.4)] {
            // test polynomial y ↦ y² + 2y  (as a jet in the y slot)
            let f = |j: Jet2| Ok(j * j + j.scale(cr(2.0)));
            let adj = adjoint_operator_apply(&p, f, y).unwrap();
            let dir = heun_operator_apply(&p, f, y, CoordSlot::Y).unwrap();
            assert!(rel_diff(adj, dir) < 1e-13, "{adj} vs {dir}");
        }
    }

    #[test]
    fn frobenius_heun_first_coefficient() {
        let p = params_complex();
        let h = frobenius_heun(&p, ExponentChoice::Zero, 12).unwrap();
        assert_eq!(h.coefficients[0], ONE);
        assert!(rel_diff(h.coefficients[1], p.q / (p.a * p.gamma)) < 1e-14);
    }

    #[test]
    fn frobenius_heun_residual() {
        for p in [params(), params_complex()] {
            for choice in [ExponentChoice::Zero, ExponentChoice::OneMinusGamma] {
                let h = frobenius_heun(&p, choice, 16).unwrap();
                for t in [0.05, 0.15, 0.28] {
                    let x = c(t * p.a.norm().min(1.0), 0.01);
                    let m = heun_operator_apply(&p, |j| h.eval(j), x, CoordSlot::X).unwrap();
                    let v = h.eval(Jet2::var_x(x)).unwrap();
                    let scale = m.norm() + (p.q * v.v).norm() + RESIDUAL_FLOOR;
                    let r = (m - p.q * v.v).norm() / scale;
                    assert!(r < 1e-10, "x={x} residual={r}");
                }
            }
        }
    }

    #[test]
    fn frobenius_recurrence_consistency() {
        // the stored coefficients reproduce the recurrence they came from
        let p = params_complex();
        let h = frobenius_heun(&p, ExponentChoice::Zero, 16).unwrap();
        let e = p.epsilon();
        let b1 = p.gamma * (ONE + p.a) + p.delta * p.a + e;
        for m in 1..h.coefficients.len() - 1 {
            let mt = cr(m as f64);
            let lhs = p.a * (mt + ONE) * (mt + p.gamma) * h.coefficients[m + 1];
            let rhs = ((ONE + p.a) * mt * (mt - ONE) + b1 * mt + p.q) * h.coefficients[m]
                - (mt - ONE + p.alpha) * (mt - ONE + p.beta) * h.coefficients[m - 1];
            let scale = lhs.norm().max(rhs.norm()).max(1e-12);
            assert!((lhs - rhs).norm() / scale < 1e-13);
        }
    }

    #[test]
    fn frobenius_tail_estimate() {
        let p = params_complex();
        let h = frobenius_heun(&p, ExponentChoice::Zero, 8).unwrap();
        let n = h.coefficients.len();
        let partial: f64 = h
            .coefficients
            .iter()
            .enumerate()
            .map(|(k, c)| c.norm() * h.radius.powi(k as i32))
            .sum();
        let tail = h.coefficients[n - 1].norm() * h.radius.powi(n as i32 - 1);
        assert!(tail < 1e-14 * partial.max(1.0) * 10.0);
    }

    #[test]
    fn frobenius_che_first_coefficient() {
        let p = che_params();
        let h = frobenius_che(&p, ExponentChoice::Zero, 12).unwrap();
        assert_eq!(h.coefficients[0], ONE);
        // matching the constant coefficient of the equation gives
        // γ c₁ + σ c₀ = 0
        assert!(rel_diff(h.coefficients[1], -p.sigma / p.gamma) < 1e-14);
    }

    #[test]
    fn frobenius_che_residual() {
        let p = che_params();
        for choice in [ExponentChoice::Zero, ExponentChoice::OneMinusGamma] {
            let h = frobenius_che(&p, choice, 16).unwrap();
            for t in [0.08, 0.18, 0.29] {
                let x = c(t, 0.01);
                let m = che_operator_apply(&p, |j| h.eval(j), x, CoordSlot::X).unwrap();
                let v = h.eval(Jet2::var_x(x)).unwrap();
                let scale = m.norm() + (p.sigma * v.v).norm() + RESIDUAL_FLOOR;
                let r = (m - p.sigma * v.v).norm() / scale;
                assert!(r < 1e-10, "x={x} residual={r}");
            }
        }
    }

    #[test]
    fn frobenius_logarithmic_guard() {
        let mut p = params();
        p.gamma = ONE;
        assert!(matches!(
            frobenius_heun(&p, ExponentChoice::OneMinusGamma, 8),
            Err(Error::LogarithmicCase)
        ));
    }

    #[test]
    fn concomitant_trivial_zero() {
        // G independent of y and H constant: the bracket vanishes.
        let p = params();
        let v = bilinear_concomitant(
            &p,
            |_| Ok(Jet2::constant(ONE)),
            |xj, _| Ok(xj * xj),
            c(0.2, 0.0),
            c(0.3, 0.02),
        )
        .unwrap();
        assert!(v.norm() < 1e-14);
    }

    #[test]
    fn concomitant_against_finite_differences() {
        let p = params_complex();
        let h = frobenius_heun(&p, ExponentChoice::Zero, 16).unwrap();
        let g = |xj: Jet2, yj: Jet2| (xj * yj + Jet2::constant(cr(0.3))).pow(c(0.4, 0.2));
        let x = c(0.21, 0.01);
        let y = c(0.17, 0.02);
        let got = bilinear_concomitant(&p, |j| h.eval(j), g, x, y).unwrap();

        // finite-difference assembly of the same expression
        let fd = 1e-6;
        let gv = |yv: C64| g(Jet2::constant(x), Jet2::constant(yv)).unwrap().v;
        let hv = |yv: C64| h.eval(C64::from(yv)).unwrap();
        let g_y = (gv(y + fd) - gv(y - fd)) / (2.0 * fd);
        let h_y = (hv(y + fd) - hv(y - fd)) / (2.0 * fd);
        let weight = C64::powc(y, p.gamma)
            * C64::powc(ONE - y, p.delta)
            * C64::powc(ONE - y / p.a, p.epsilon());
        let want = weight * (hv(y) * g_y - gv(y) * h_y);
        assert!(rel_diff(got, want) < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn lagrange_identity_for_generic_kernel() {
        // K = w·G for an arbitrary smooth G; the identity is formal and
        // holds for any twice-differentiable pair.
        let p = params_complex();
        let h = frobenius_heun(&p, ExponentChoice::Zero, 16).unwrap();
        let k = |xj: Jet2, yj: Jet2| -> Result<Jet2> {
            let g = (xj * yj + Jet2::constant(cr(0.4))).pow(c(0.3, 0.1))?;
            Ok(heun_weight(&p, yj)? * g)
        };
        for (tx, ty) in [(0.15, 0.2), (0.25, 0.12), (0.1, 0.28)] {
            let x = c(tx, 0.01);
            let y = c(ty, 0.02);
            let r = lagrange_identity_residual(&p, |j| h.eval(j), k, x, y).unwrap();
            assert!(r < 1e-9, "({x},{y}) residual={r}");
        }
    }
}
