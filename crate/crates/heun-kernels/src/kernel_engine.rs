//! Kernel expression trees and the machinery that verifies them.
//!
//! A kernel G(x,y) is an expression tree evaluable on bivariate jets.
//! The kernel equation [M_x − M_y]G = 0 is checked pointwise from one
//! jet evaluation; the transformations N_i (index) and K_j (Möbius) act
//! on *families* — builders parameterized by the kernel parameters — by
//! coordinate substitution, parameter remapping and prefactor
//! multiplication, exactly mirroring the solution-side records.
//!
//! Sample points are not drawn blindly: each special-function node
//! contributes a constraint on its (always bilinear) argument, a target
//! value is drawn inside the series domain, and the constraint is solved
//! for the coordinates.  This makes every cataloged kernel reachable,
//! including the ones whose hypergeometric argument must sit near 1 or
//! beyond the unit circle.

use std::fmt;
use std::rc::Rc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::heun_ops::{che_operator_terms, heun_operator_terms, CoordSlot, RESIDUAL_FLOOR};
use crate::numerics::{c, cr, CValue, C64, Jet2, ONE, ZERO};
use crate::specialfn::{conf_local, hyp2f1, hyp_local, kummer_phi, tricomi_psi, ConfParams, HypParams};
use crate::transform_group::{che_transform, homotopic, mobius, CheTransformRecord, TransformRecord};
use crate::{CheParams, HeunParams};

/// Kernel-side Heun parameters (the kernel equation is q-free).
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct HeunKernelParams {
    pub a: C64,
    pub alpha: C64,
    pub beta: C64,
    pub gamma: C64,
    pub delta: C64,
}

impl HeunKernelParams {
    pub fn new(a: C64, alpha: C64, beta: C64, gamma: C64, delta: C64) -> Self {
        HeunKernelParams { a, alpha, beta, gamma, delta }
    }

    pub fn epsilon(&self) -> C64 {
        self.alpha + self.beta + ONE - self.gamma - self.delta
    }

    pub fn greeks(&self) -> [C64; 4] {
        [self.alpha, self.beta, self.gamma, self.delta]
    }

    pub fn to_operator(&self) -> HeunParams {
        HeunParams::new(self.a, ZERO, self.alpha, self.beta, self.gamma, self.delta)
            .expect("kernel parameters with admissible a")
    }

    pub fn singularities(&self) -> Vec<C64> {
        vec![ZERO, ONE, self.a]
    }
}

impl From<&HeunParams> for HeunKernelParams {
    fn from(p: &HeunParams) -> Self {
        HeunKernelParams::new(p.a, p.alpha, p.beta, p.gamma, p.delta)
    }
}

/// Kernel-side confluent parameters (σ-free).
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct CheKernelParams {
    pub rho: C64,
    pub alpha: C64,
    pub gamma: C64,
    pub delta: C64,
}

impl CheKernelParams {
    pub fn new(rho: C64, alpha: C64, gamma: C64, delta: C64) -> Self {
        CheKernelParams { rho, alpha, gamma, delta }
    }

    pub fn to_operator(&self) -> CheParams {
        CheParams::new(ZERO, self.rho, self.alpha, self.gamma, self.delta)
            .expect("kernel parameters with nonzero rho")
    }

    pub fn singularities(&self) -> Vec<C64> {
        vec![ZERO, ONE]
    }
}

impl From<&CheParams> for CheKernelParams {
    fn from(p: &CheParams) -> Self {
        CheKernelParams::new(p.rho, p.alpha, p.gamma, p.delta)
    }
}

/// Which operator pair the kernel equation uses.
#[derive(Copy, Clone, Debug)]
pub enum KernelOp {
    Heun(HeunKernelParams),
    Che(CheKernelParams),
}

impl KernelOp {
    pub fn singularities(&self) -> Vec<C64> {
        match self {
            KernelOp::Heun(p) => p.singularities(),
            KernelOp::Che(p) => p.singularities(),
        }
    }
}

/// Expression tree for kernels.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelExpr {
    Const(C64),
    X,
    Y,
    Add(Vec<KernelExpr>),
    Mul(Vec<KernelExpr>),
    Neg(Box<KernelExpr>),
    Div(Box<KernelExpr>, Box<KernelExpr>),
    Pow(Box<KernelExpr>, C64),
    Exp(Box<KernelExpr>),
    Hyp2F1(HypParams, Box<KernelExpr>),
    HypLocal(usize, HypParams, Box<KernelExpr>),
    Phi(ConfParams, Box<KernelExpr>),
    Psi(ConfParams, Box<KernelExpr>),
}

pub fn kc(z: C64) -> KernelExpr {
    KernelExpr::Const(z)
}

pub fn kr(v: f64) -> KernelExpr {
    KernelExpr::Const(cr(v))
}

pub fn kadd(terms: Vec<KernelExpr>) -> KernelExpr {
    KernelExpr::Add(terms)
}

pub fn kmul(factors: Vec<KernelExpr>) -> KernelExpr {
    KernelExpr::Mul(factors)
}

pub fn kpow(base: KernelExpr, e: C64) -> KernelExpr {
    KernelExpr::Pow(Box::new(base), e)
}

pub fn kdiv(n: KernelExpr, d: KernelExpr) -> KernelExpr {
    KernelExpr::Div(Box::new(n), Box::new(d))
}

pub fn kneg(e: KernelExpr) -> KernelExpr {
    KernelExpr::Neg(Box::new(e))
}

/// 1 − e
pub fn kone_minus(e: KernelExpr) -> KernelExpr {
    kadd(vec![kr(1.0), kneg(e)])
}

impl KernelExpr {
    pub fn eval<T: CValue>(&self, x: T, y: T) -> Result<T> {
        let r = match self {
            KernelExpr::Const(z) => T::from_c(*z),
            KernelExpr::X => x,
            KernelExpr::Y => y,
            KernelExpr::Add(ts) => {
                let mut s = T::from_c(ZERO);
                for t in ts {
                    s = s.add(t.eval(x, y)?);
                }
                s
            }
            KernelExpr::Mul(ts) => {
                let mut s = T::from_c(ONE);
                for t in ts {
                    s = s.mul(t.eval(x, y)?);
                }
                s
            }
            KernelExpr::Neg(t) => t.eval(x, y)?.neg(),
            KernelExpr::Div(n, d) => n.eval(x, y)?.div(d.eval(x, y)?)?,
            KernelExpr::Pow(b, e) => b.eval(x, y)?.powc(*e)?,
            KernelExpr::Exp(t) => t.eval(x, y)?.exp(),
            KernelExpr::Hyp2F1(p, u) => hyp2f1(*p, u.eval(x, y)?)?,
            KernelExpr::HypLocal(k, p, u) => hyp_local(*k, *p, u.eval(x, y)?)?,
            KernelExpr::Phi(p, u) => kummer_phi(*p, u.eval(x, y)?)?,
            KernelExpr::Psi(p, u) => tricomi_psi(*p, u.eval(x, y)?)?,
        };
        if !r.is_finite() {
            return Err(Error::NumericOverflow);
        }
        Ok(r)
    }

    pub fn eval_jet(&self, x: C64, y: C64) -> Result<Jet2> {
        self.eval(Jet2::var_x(x), Jet2::var_y(y))
    }

    /// G(y,x): the coordinate roles swapped.
    pub fn swap_coords(&self) -> KernelExpr {
        self.map_coords(&KernelExpr::Y, &KernelExpr::X)
    }

    /// Substitute expressions for the coordinates.
    pub fn map_coords(&self, fx: &KernelExpr, fy: &KernelExpr) -> KernelExpr {
        let rec = |e: &KernelExpr| e.map_coords(fx, fy);
        match self {
            KernelExpr::Const(z) => KernelExpr::Const(*z),
            KernelExpr::X => fx.clone(),
            KernelExpr::Y => fy.clone(),
            KernelExpr::Add(ts) => KernelExpr::Add(ts.iter().map(rec).collect()),
            KernelExpr::Mul(ts) => KernelExpr::Mul(ts.iter().map(rec).collect()),
            KernelExpr::Neg(t) => kneg(rec(t)),
            KernelExpr::Div(n, d) => kdiv(rec(n), rec(d)),
            KernelExpr::Pow(b, e) => kpow(rec(b), *e),
            KernelExpr::Exp(t) => KernelExpr::Exp(Box::new(rec(t))),
            KernelExpr::Hyp2F1(p, u) => KernelExpr::Hyp2F1(*p, Box::new(rec(u))),
            KernelExpr::HypLocal(k, p, u) => KernelExpr::HypLocal(*k, *p, Box::new(rec(u))),
            KernelExpr::Phi(p, u) => KernelExpr::Phi(*p, Box::new(rec(u))),
            KernelExpr::Psi(p, u) => KernelExpr::Psi(*p, Box::new(rec(u))),
        }
    }

    /// JSON rendering of the tree (complex numbers as [re, im]).
    pub fn to_json(&self) -> Value {
        let cj = |z: &C64| json!([z.re, z.im]);
        match self {
            KernelExpr::Const(z) => json!({"op": "const", "value": cj(z)}),
            KernelExpr::X => json!({"op": "x"}),
            KernelExpr::Y => json!({"op": "y"}),
            KernelExpr::Add(ts) => {
                json!({"op": "add", "args": ts.iter().map(|t| t.to_json()).collect::<Vec<_>>()})
            }
            KernelExpr::Mul(ts) => {
                json!({"op": "mul", "args": ts.iter().map(|t| t.to_json()).collect::<Vec<_>>()})
            }
            KernelExpr::Neg(t) => json!({"op": "neg", "arg": t.to_json()}),
            KernelExpr::Div(n, d) => json!({"op": "div", "num": n.to_json(), "den": d.to_json()}),
            KernelExpr::Pow(b, e) => json!({"op": "pow", "base": b.to_json(), "exponent": cj(e)}),
            KernelExpr::Exp(t) => json!({"op": "exp", "arg": t.to_json()}),
            KernelExpr::Hyp2F1(p, u) => json!({
                "op": "hyp2f1", "a": cj(&p.a), "b": cj(&p.b), "c": cj(&p.c), "arg": u.to_json()
            }),
            KernelExpr::HypLocal(k, p, u) => json!({
                "op": "hyp_local", "k": k,
                "a": cj(&p.a), "b": cj(&p.b), "c": cj(&p.c), "arg": u.to_json()
            }),
            KernelExpr::Phi(p, u) => {
                json!({"op": "phi", "a": cj(&p.a), "c": cj(&p.c), "arg": u.to_json()})
            }
            KernelExpr::Psi(p, u) => {
                json!({"op": "psi", "a": cj(&p.a), "c": cj(&p.c), "arg": u.to_json()})
            }
        }
    }
}

impl fmt::Display for KernelExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

/// The k-th formal hypergeometric solution as an explicit tree, with the
/// prefactors and argument changes written out.
pub fn local_solution_expr(k: usize, p: HypParams, arg: KernelExpr) -> KernelExpr {
    let HypParams { a, b, c: cc } = p;
    match k {
        1 => KernelExpr::Hyp2F1(p, Box::new(arg)),
        2 => kmul(vec![
            kpow(arg.clone(), ONE - cc),
            KernelExpr::Hyp2F1(
                HypParams::new(a + ONE - cc, b + ONE - cc, cr(2.0) - cc),
                Box::new(arg),
            ),
        ]),
        3 => KernelExpr::Hyp2F1(
            HypParams::new(a, b, a + b + ONE - cc),
            Box::new(kone_minus(arg)),
        ),
        4 => kmul(vec![
            kpow(kone_minus(arg.clone()), cc - a - b),
            KernelExpr::Hyp2F1(
                HypParams::new(cc - a, cc - b, ONE + cc - a - b),
                Box::new(kone_minus(arg)),
            ),
        ]),
        5 => kmul(vec![
            kpow(arg.clone(), -a),
            KernelExpr::Hyp2F1(
                HypParams::new(a, a + ONE - cc, a + ONE - b),
                Box::new(kdiv(kr(1.0), arg)),
            ),
        ]),
        6 => kmul(vec![
            kpow(arg.clone(), -b),
            KernelExpr::Hyp2F1(
                HypParams::new(b + ONE - cc, b, b + ONE - a),
                Box::new(kdiv(kr(1.0), arg)),
            ),
        ]),
        _ => panic!("local solution index {k} out of 1..=6"),
    }
}

/// The k-th confluent local solution as an explicit tree.
pub fn conf_local_expr(k: usize, p: ConfParams, arg: KernelExpr) -> KernelExpr {
    let ConfParams { a, c: cc } = p;
    match k {
        1 => KernelExpr::Phi(p, Box::new(arg)),
        2 => kmul(vec![
            KernelExpr::Exp(Box::new(arg.clone())),
            kpow(arg.clone(), ONE - cc),
            KernelExpr::Phi(ConfParams::new(ONE - a, cr(2.0) - cc), Box::new(kneg(arg))),
        ]),
        3 => KernelExpr::Psi(p, Box::new(arg)),
        4 => kmul(vec![
            KernelExpr::Exp(Box::new(arg.clone())),
            kpow(arg.clone(), ONE - cc),
            KernelExpr::Psi(ConfParams::new(ONE - a, cr(2.0) - cc), Box::new(kneg(arg))),
        ]),
        _ => panic!("confluent local index {k} out of 1..=4"),
    }
}

// ---------------------------------------------------------------------
// kernel PDE residual

/// Relative residual |M_x G − M_y G| / Σ|terms| from one jet evaluation.
pub fn kernel_pde_residual(op: &KernelOp, g: &KernelExpr, x: C64, y: C64) -> Result<f64> {
    let j = g.eval_jet(x, y)?;
    let (tx, ty) = match op {
        KernelOp::Heun(p) => {
            let hp = p.to_operator();
            (
                heun_operator_terms(&hp, &j, x, CoordSlot::X),
                heun_operator_terms(&hp, &j, y, CoordSlot::Y),
            )
        }
        KernelOp::Che(p) => {
            let cp = p.to_operator();
            (
                che_operator_terms(&cp, &j, x, CoordSlot::X),
                che_operator_terms(&cp, &j, y, CoordSlot::Y),
            )
        }
    };
    let mx: C64 = tx.iter().sum();
    let my: C64 = ty.iter().sum();
    let scale: f64 =
        tx.iter().map(|t| t.norm()).sum::<f64>() + ty.iter().map(|t| t.norm()).sum::<f64>();
    Ok((mx - my).norm() / (scale + RESIDUAL_FLOOR))
}

// ---------------------------------------------------------------------
// bilinear rational arguments and the targeted sampler

/// Bilinear polynomial e₀₀ + e₁₀x + e₀₁y + e₁₁xy.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Bilinear(pub [C64; 4]);

impl Bilinear {
    fn zero() -> Self {
        Bilinear([ZERO; 4])
    }

    fn constant(z: C64) -> Self {
        Bilinear([z, ZERO, ZERO, ZERO])
    }

    fn add(&self, o: &Bilinear) -> Bilinear {
        let mut v = [ZERO; 4];
        for i in 0..4 {
            v[i] = self.0[i] + o.0[i];
        }
        Bilinear(v)
    }

    fn scale(&self, k: C64) -> Bilinear {
        let mut v = self.0;
        for e in &mut v {
            *e *= k;
        }
        Bilinear(v)
    }

    fn mul(&self, o: &Bilinear) -> Option<Bilinear> {
        let mut out = [ZERO; 4];
        let idx = |i: usize, j: usize| i + 2 * j;
        for i1 in 0..2 {
            for j1 in 0..2 {
                for i2 in 0..2 {
                    for j2 in 0..2 {
                        let z = self.0[idx(i1, j1)] * o.0[idx(i2, j2)];
                        if z == ZERO {
                            continue;
                        }
                        let (i, j) = (i1 + i2, j1 + j2);
                        if i > 1 || j > 1 {
                            return None; // degree too high
                        }
                        out[idx(i, j)] += z;
                    }
                }
            }
        }
        Some(Bilinear(out))
    }

    pub fn eval(&self, x: C64, y: C64) -> C64 {
        self.0[0] + self.0[1] * x + self.0[2] * y + self.0[3] * x * y
    }
}

/// Bilinear rational function num/den.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct BilinearRat {
    pub num: Bilinear,
    pub den: Bilinear,
}

impl BilinearRat {
    pub fn eval(&self, x: C64, y: C64) -> C64 {
        self.num.eval(x, y) / self.den.eval(x, y)
    }
}

/// Convert an argument subtree to a bilinear rational function.
fn to_bilinear_rat(e: &KernelExpr) -> Option<BilinearRat> {
    let r = match e {
        KernelExpr::Const(z) => BilinearRat {
            num: Bilinear::constant(*z),
            den: Bilinear::constant(ONE),
        },
        KernelExpr::X => BilinearRat {
            num: Bilinear([ZERO, ONE, ZERO, ZERO]),
            den: Bilinear::constant(ONE),
        },
        KernelExpr::Y => BilinearRat {
            num: Bilinear([ZERO, ZERO, ONE, ZERO]),
            den: Bilinear::constant(ONE),
        },
        KernelExpr::Neg(t) => {
            let r = to_bilinear_rat(t)?;
            BilinearRat { num: r.num.scale(-ONE), den: r.den }
        }
        KernelExpr::Add(ts) => {
            let mut acc = BilinearRat {
                num: Bilinear::zero(),
                den: Bilinear::constant(ONE),
            };
            for t in ts {
                let r = to_bilinear_rat(t)?;
                let num = acc.num.mul(&r.den)?.add(&r.num.mul(&acc.den)?);
                let den = acc.den.mul(&r.den)?;
                acc = BilinearRat { num, den };
            }
            acc
        }
        KernelExpr::Mul(ts) => {
            let mut acc = BilinearRat {
                num: Bilinear::constant(ONE),
                den: Bilinear::constant(ONE),
            };
            for t in ts {
                let r = to_bilinear_rat(t)?;
                acc = BilinearRat { num: acc.num.mul(&r.num)?, den: acc.den.mul(&r.den)? };
            }
            acc
        }
        KernelExpr::Div(n, d) => {
            let rn = to_bilinear_rat(n)?;
            let rd = to_bilinear_rat(d)?;
            BilinearRat { num: rn.num.mul(&rd.den)?, den: rn.den.mul(&rd.num)? }
        }
        KernelExpr::Pow(b, e) => {
            if e.im != 0.0 || e.re.fract() != 0.0 || e.re.abs() > 2.5 {
                return None;
            }
            let k = e.re as i64;
            let r = to_bilinear_rat(b)?;
            let mut acc = BilinearRat {
                num: Bilinear::constant(ONE),
                den: Bilinear::constant(ONE),
            };
            for _ in 0..k.unsigned_abs() {
                acc = BilinearRat { num: acc.num.mul(&r.num)?, den: acc.den.mul(&r.den)? };
            }
            if k < 0 {
                acc = BilinearRat { num: acc.den, den: acc.num };
            }
            acc
        }
        _ => return None,
    };
    Some(r)
}

/// Domain class of one special-function node.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum SfDomain {
    /// series in w: |w| < 1 − margin
    Disk,
    /// series in 1 − w
    NearOne,
    /// series in 1/w
    Outside,
    /// entire; kept at moderate size
    Entire,
    /// Ψ: off the cut and away from 0
    CutAway,
}

#[derive(Copy, Clone, Debug)]
pub struct SfConstraint {
    pub domain: SfDomain,
    pub arg: BilinearRat,
    /// conditioning bound on the series variable: beyond it the series
    /// converges but cancellation eats the digits a residual gate needs
    pub cap: f64,
}

/// Series-variable cap for hypergeometric parameters: keeps |b·w| ≲ 7 so
/// the alternating partial sums lose at most ~e⁷ in precision.
fn series_cap(pmax: f64) -> f64 {
    (7.0 / (1.0 + pmax)).min(0.93)
}

fn hyp_series_params(k: usize, p: &HypParams) -> f64 {
    let (u, v) = match k {
        1 => (p.a, p.b),
        2 => (p.a + ONE - p.c, p.b + ONE - p.c),
        3 => (p.a, p.b),
        4 => (p.c - p.a, p.c - p.b),
        5 => (p.a, p.a + ONE - p.c),
        _ => (p.b + ONE - p.c, p.b),
    };
    u.norm().max(v.norm())
}

/// Reconstruct an argument as a bilinear rational; structural conversion
/// first, then a fit against probe evaluations (substituted trees carry
/// common factors the structural pass cannot cancel).
fn argument_bilinear(e: &KernelExpr) -> Option<BilinearRat> {
    to_bilinear_rat(e).or_else(|| fit_bilinear_rat(e))
}

/// Fit e(x,y) = N(x,y)/D(x,y) with bilinear N, D from evaluations at
/// fixed probes, then verify on held-out probes.
fn fit_bilinear_rat(e: &KernelExpr) -> Option<BilinearRat> {
    let probes: [(f64, f64, f64, f64); 14] = [
        (0.313, 0.197, 0.811, -0.256),
        (1.271, -0.432, 0.529, 0.613),
        (-0.617, 0.351, 1.113, 0.207),
        (2.137, 0.519, -0.731, 0.433),
        (0.457, 1.029, 1.723, -0.311),
        (-1.319, -0.227, 0.397, 0.951),
        (0.733, 0.341, 2.417, 0.113),
        (1.531, -0.713, -0.521, -0.617),
        (0.231, 0.537, 0.951, 1.333),
        (-0.433, 1.217, 1.311, -0.737),
        (1.911, 0.233, 0.617, 0.519),
        (0.519, -0.931, -1.117, 0.311),
        (2.713, -0.139, 1.531, 0.717),
        (-0.811, 0.613, 0.237, -1.031),
    ];
    let mut rows = vec![];
    for &(xr, xi, yr, yi) in &probes {
        let (x, y) = (c(xr, xi), c(yr, yi));
        if let Ok(w) = e.eval::<C64>(x, y) {
            // [1, x, y, xy, -w, -wx, -wy, -wxy] · [n; d] = 0
            rows.push([ONE, x, y, x * y, -w, -w * x, -w * y, -w * x * y]);
        }
    }
    if rows.len() < 11 {
        return None;
    }
    // gauge: try pinning one coefficient to 1 (denominator first)
    for gauge in [4usize, 0, 5, 6, 7, 1, 2, 3] {
        if let Some(sol) = solve_gauged(&rows[..8], gauge) {
            let cand = BilinearRat {
                num: Bilinear([sol[0], sol[1], sol[2], sol[3]]),
                den: Bilinear([sol[4], sol[5], sol[6], sol[7]]),
            };
            // verify on the held-out probes
            let ok = rows[8..].iter().all(|r| {
                // r encodes (x, y, w); reconstruct and compare
                let x = r[1];
                let y = r[2];
                let w = -r[4];
                let den = cand.den.eval(x, y);
                if den.norm() < 1e-10 {
                    return false;
                }
                let v = cand.num.eval(x, y) / den;
                (v - w).norm() < 1e-8 * (1.0 + w.norm())
            });
            if ok {
                return Some(cand);
            }
        }
    }
    None
}

/// Solve the 8-coefficient homogeneous system with coefficient `gauge`
/// pinned to 1, using 7 equations.
fn solve_gauged(rows: &[[C64; 8]], gauge: usize) -> Option<[C64; 8]> {
    let n = 7;
    let cols: Vec<usize> = (0..8).filter(|&k| k != gauge).collect();
    let mut m = [[ZERO; 8]; 7]; // 7x7 + rhs
    for (i, row) in rows.iter().take(n).enumerate() {
        for (jc, &cidx) in cols.iter().enumerate() {
            m[i][jc] = row[cidx];
        }
        m[i][7] = -row[gauge];
    }
    // Gaussian elimination with partial pivoting
    for col in 0..n {
        let (pivot, mag) = (col..n)
            .map(|r| (r, m[r][col].norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1))?;
        if mag < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        let inv = ONE / m[col][col];
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r][col] * inv;
            for k in col..8 {
                let sub = f * m[col][k];
                m[r][k] -= sub;
            }
        }
    }
    let mut out = [ZERO; 8];
    out[gauge] = ONE;
    for (jc, &cidx) in cols.iter().enumerate() {
        out[cidx] = m[jc][7] / m[jc][jc];
    }
    Some(out)
}

/// Collect the special-function argument constraints and the power bases
/// of a kernel tree.
pub fn collect_constraints(e: &KernelExpr, sf: &mut Vec<SfConstraint>, pows: &mut Vec<KernelExpr>) {
    match e {
        KernelExpr::Const(_) | KernelExpr::X | KernelExpr::Y => {}
        KernelExpr::Add(ts) | KernelExpr::Mul(ts) => {
            for t in ts {
                collect_constraints(t, sf, pows);
            }
        }
        KernelExpr::Neg(t) | KernelExpr::Exp(t) => collect_constraints(t, sf, pows),
        KernelExpr::Div(n, d) => {
            collect_constraints(n, sf, pows);
            collect_constraints(d, sf, pows);
        }
        KernelExpr::Pow(b, _) => {
            pows.push((**b).clone());
            collect_constraints(b, sf, pows);
        }
        KernelExpr::Hyp2F1(p, u) => {
            if let Some(arg) = argument_bilinear(u) {
                let cap = series_cap(p.a.norm().max(p.b.norm()));
                sf.push(SfConstraint { domain: SfDomain::Disk, arg, cap });
            }
        }
        KernelExpr::HypLocal(k, p, u) => {
            if let Some(arg) = argument_bilinear(u) {
                let domain = match k {
                    1 | 2 => SfDomain::Disk,
                    3 | 4 => SfDomain::NearOne,
                    _ => SfDomain::Outside,
                };
                let cap = series_cap(hyp_series_params(*k, p));
                sf.push(SfConstraint { domain, arg, cap });
            }
        }
        KernelExpr::Phi(p, u) => {
            if let Some(arg) = argument_bilinear(u) {
                let cap = (15.0 / (1.0 + p.a.norm())).min(15.0);
                sf.push(SfConstraint { domain: SfDomain::Entire, arg, cap });
            }
        }
        KernelExpr::Psi(p, u) => {
            if let Some(arg) = argument_bilinear(u) {
                let cap = (15.0 / (1.0 + p.a.norm())).min(15.0);
                sf.push(SfConstraint { domain: SfDomain::CutAway, arg, cap });
            }
        }
    }
}

/// Base sampling box for free coordinates: re ∈ [0.05, 0.45],
/// im ∈ [0.005, 0.03].
pub fn box_draw(rng: &mut ChaCha8Rng) -> C64 {
    c(rng.gen_range(0.05..0.45), rng.gen_range(0.005..0.03))
}

fn draw_in_domain(domain: SfDomain, cap: f64, rng: &mut ChaCha8Rng) -> C64 {
    let r = rng.gen_range(0.15..0.78) * cap.min(0.93);
    let th = rng.gen_range(0.10..1.15);
    let t = C64::from_polar(r, th);
    match domain {
        SfDomain::Disk => t,
        SfDomain::NearOne => ONE - t,
        SfDomain::Outside => ONE / t,
        SfDomain::Entire | SfDomain::CutAway => {
            C64::from_polar(rng.gen_range(0.3..2.5), rng.gen_range(0.15..1.2))
        }
    }
}

fn domain_ok(domain: SfDomain, cap: f64, w: C64) -> bool {
    match domain {
        SfDomain::Disk => w.norm() < cap,
        SfDomain::NearOne => (ONE - w).norm() < cap,
        SfDomain::Outside => w.norm() > 1.0 / cap,
        SfDomain::Entire => w.norm() < cap.max(15.0),
        SfDomain::CutAway => {
            w.norm() > 0.02
                && w.norm() < cap.max(15.0)
                && !(w.im.abs() < 1e-3 && w.re < 0.01)
        }
    }
}

/// Base safely off the cut (−∞, 0].
fn off_cut_margin(z: C64) -> bool {
    z.norm() > 1e-9 && (z.im.abs() > 1e-4 * (1.0 + z.norm()) || z.re > 1e-4)
}

/// Solve arg(x, y) = w for y at fixed x.
fn solve_for_y(arg: &BilinearRat, w: C64, x: C64) -> Option<C64> {
    // N − wD = e00 + e10 x + (e01 + e11 x) y
    let e = |k: usize| arg.num.0[k] - w * arg.den.0[k];
    let den = e(2) + e(3) * x;
    if den.norm() < 1e-12 {
        return None;
    }
    Some(-(e(0) + e(1) * x) / den)
}

/// Solve arg₁ = w₁ and arg₂ = w₂ jointly; quadratic in x after
/// eliminating y through the first (bilinear) equation.
fn solve_pair(a1: &BilinearRat, w1: C64, a2: &BilinearRat, w2: C64) -> Vec<(C64, C64)> {
    let e = |a: &BilinearRat, w: C64, k: usize| a.num.0[k] - w * a.den.0[k];
    let (a0, a1c, b0, b1) = (e(a1, w1, 0), e(a1, w1, 1), e(a1, w1, 2), e(a1, w1, 3));
    let (f0, f1, f2, f3) = (e(a2, w2, 0), e(a2, w2, 1), e(a2, w2, 2), e(a2, w2, 3));
    // substitute y = −(a0 + a1x)/(b0 + b1x) into f00 + f10x + (f01 + f11x)y
    let c2 = f1 * b1 - f3 * a1c;
    let c1 = f0 * b1 + f1 * b0 - f2 * a1c - f3 * a0;
    let c0 = f0 * b0 - f2 * a0;
    let mut roots = vec![];
    if c2.norm() < 1e-13 * (c1.norm() + c0.norm()).max(1e-30) {
        if c1.norm() > 1e-12 {
            roots.push(-c0 / c1);
        }
    } else {
        let disc = (c1 * c1 - 4.0 * c2 * c0).sqrt();
        roots.push((-c1 + disc) / (2.0 * c2));
        roots.push((-c1 - disc) / (2.0 * c2));
    }
    let mut out = vec![];
    for x in roots {
        let den = b0 + b1 * x;
        if den.norm() < 1e-12 {
            continue;
        }
        out.push((x, -(a0 + a1c * x) / den));
    }
    out
}

fn point_admissible(
    op: &KernelOp,
    g: &KernelExpr,
    sf: &[SfConstraint],
    pows: &[KernelExpr],
    x: C64,
    y: C64,
) -> bool {
    let sing = op.singularities();
    let margin = match op {
        KernelOp::Heun(p) => 0.02 * p.a.norm().min(1.0),
        KernelOp::Che(_) => 0.02,
    };
    for z in [x, y] {
        if !z.is_finite() || z.norm() > 2e4 {
            return false;
        }
        for s in &sing {
            if (z - s).norm() < margin {
                return false;
            }
        }
    }
    for cst in sf {
        if !domain_ok(cst.domain, cst.cap, cst.arg.eval(x, y)) {
            return false;
        }
    }
    for b in pows {
        match b.eval::<C64>(x, y) {
            Ok(v) if off_cut_margin(v) => {}
            _ => return false,
        }
    }
    // the final arbiter is the jet evaluation itself
    g.eval_jet(x, y).is_ok()
}

/// True when two bilinear rational maps agree up to a common scale.
fn same_argument(a: &BilinearRat, b: &BilinearRat) -> bool {
    // compare a.num⊗b.den with b.num⊗a.den entrywise up to scale
    let cross = |u: &Bilinear, v: &Bilinear| -> Vec<C64> {
        let mut out = vec![];
        for p in u.0 {
            for q in v.0 {
                out.push(p * q);
            }
        }
        out
    };
    let lhs = cross(&a.num, &b.den);
    let rhs = cross(&b.num, &a.den);
    let scale = lhs
        .iter()
        .chain(&rhs)
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(1e-30);
    lhs.iter().zip(&rhs).all(|(u, v)| (u - v).norm() < 1e-9 * scale)
}

/// Binding constraints grouped by shared argument; each group must be
/// satisfied by a single target value.
struct BindingGroup {
    arg: BilinearRat,
    domains: Vec<(SfDomain, f64)>,
}

fn group_bindings(sf: &[SfConstraint]) -> Vec<BindingGroup> {
    let mut groups: Vec<BindingGroup> = vec![];
    for c in sf {
        if !matches!(c.domain, SfDomain::Disk | SfDomain::NearOne | SfDomain::Outside) {
            continue;
        }
        match groups.iter_mut().find(|g| same_argument(&g.arg, &c.arg)) {
            Some(g) => g.domains.push((c.domain, c.cap)),
            None => groups.push(BindingGroup { arg: c.arg, domains: vec![(c.domain, c.cap)] }),
        }
    }
    groups
}

fn draw_for_group(g: &BindingGroup, rng: &mut ChaCha8Rng) -> Option<C64> {
    let (d0, c0) = g.domains[0];
    for _ in 0..40 {
        let w = draw_in_domain(d0, c0, rng);
        if g.domains.iter().all(|&(d, cap)| domain_ok(d, cap, w)) {
            return Some(w);
        }
    }
    None
}

/// Draw `n` admissible points for the kernel, solving the binding
/// special-function argument constraints.
pub fn sample_points(
    op: &KernelOp,
    g: &KernelExpr,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(C64, C64)>> {
    let mut sf = vec![];
    let mut pows = vec![];
    collect_constraints(g, &mut sf, &mut pows);
    let groups = group_bindings(&sf);

    let mut pts = vec![];
    let max_tries = 500 * n.max(1);
    for attempt in 0..max_tries {
        if pts.len() >= n {
            break;
        }
        // alternate strategies: a joint solve covers independent argument
        // pairs, single-group targeting covers arguments that are related
        // (solving both at once would then be inconsistent), and plain
        // box draws cover unconstrained kernels.
        let candidate = if groups.is_empty() {
            Some((box_draw(rng), box_draw(rng)))
        } else if groups.len() >= 2 && attempt % 2 == 0 {
            match (draw_for_group(&groups[0], rng), draw_for_group(&groups[1], rng)) {
                (Some(w1), Some(w2)) => solve_pair(&groups[0].arg, w1, &groups[1].arg, w2)
                    .into_iter()
                    .next(),
                _ => None,
            }
        } else {
            let gi = &groups[attempt % groups.len()];
            match draw_for_group(gi, rng) {
                Some(w) => {
                    let x = box_draw(rng);
                    solve_for_y(&gi.arg, w, x).map(|y| (x, y))
                }
                None => None,
            }
        };
        if let Some((x, y)) = candidate {
            if point_admissible(op, g, &sf, &pows, x, y) {
                pts.push((x, y));
            }
        }
    }
    if pts.is_empty() {
        return Err(Error::AllPointsInfeasible(format!(
            "{} binding constraint groups, {} tries",
            groups.len(),
            max_tries
        )));
    }
    Ok(pts)
}

/// Draw `n` admissible points clustered in one small cell, so every
/// branch choice of every fractional power is the same at all of them.
/// Proportionality of two kernels is a cell-local statement (and by the
/// identity theorem a local match extends over the cell).
pub fn sample_points_clustered(
    op: &KernelOp,
    g: &KernelExpr,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(C64, C64)>> {
    let mut sf = vec![];
    let mut pows = vec![];
    collect_constraints(g, &mut sf, &mut pows);
    let groups = group_bindings(&sf);

    let jitter = |z: C64, rng: &mut ChaCha8Rng| {
        z * c(
            1.0 + rng.gen_range(-0.02..0.02),
            rng.gen_range(-0.02..0.02),
        )
    };

    for _anchor_try in 0..60 {
        // anchors for this cell
        let anchors: Option<Vec<C64>> =
            groups.iter().map(|gi| draw_for_group(gi, rng)).collect();
        let (ax, ay) = (box_draw(rng), box_draw(rng));
        let anchors = match anchors {
            Some(a) => a,
            None => continue,
        };
        let mut pts = vec![];
        for _ in 0..40 * n.max(1) {
            if pts.len() >= n {
                break;
            }
            let candidate = match groups.len() {
                0 => Some((jitter(ax, rng), jitter(ay, rng))),
                1 => {
                    let w = jitter(anchors[0], rng);
                    let x = jitter(ax, rng);
                    solve_for_y(&groups[0].arg, w, x).map(|y| (x, y))
                }
                _ => {
                    let w1 = jitter(anchors[0], rng);
                    let w2 = jitter(anchors[1], rng);
                    solve_pair(&groups[0].arg, w1, &groups[1].arg, w2)
                        .into_iter()
                        .next()
                }
            };
            if let Some((x, y)) = candidate {
                if point_admissible(op, g, &sf, &pows, x, y) {
                    pts.push((x, y));
                }
            }
        }
        if pts.len() >= n.min(4) {
            return Ok(pts);
        }
    }
    Err(Error::AllPointsInfeasible(
        "no cell with enough admissible clustered points".into(),
    ))
}

/// Max kernel-equation residual over up to `n` sampled points.
pub fn max_residual(
    op: &KernelOp,
    g: &KernelExpr,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, usize)> {
    let pts = sample_points(op, g, n, rng)?;
    let mut max_r: f64 = 0.0;
    for &(x, y) in &pts {
        max_r = max_r.max(kernel_pde_residual(op, g, x, y)?);
    }
    Ok((max_r, pts.len()))
}

// ---------------------------------------------------------------------
// kernel families and their transformations

/// A Heun kernel family: an expression builder over kernel parameters.
#[derive(Clone)]
pub struct HeunKernel {
    pub build: Rc<dyn Fn(&HeunKernelParams) -> Result<KernelExpr>>,
}

impl HeunKernel {
    pub fn new(f: impl Fn(&HeunKernelParams) -> Result<KernelExpr> + 'static) -> Self {
        HeunKernel { build: Rc::new(f) }
    }
}

/// A confluent kernel family.
#[derive(Clone)]
pub struct CheKernel {
    pub build: Rc<dyn Fn(&CheKernelParams) -> Result<KernelExpr>>,
}

impl CheKernel {
    pub fn new(f: impl Fn(&CheKernelParams) -> Result<KernelExpr> + 'static) -> Self {
        CheKernel { build: Rc::new(f) }
    }
}

/// Symmetric prefactor [b(x)·b(y)]^e in product form.
fn symmetric_pow(bx: KernelExpr, by: KernelExpr, e: C64) -> KernelExpr {
    kpow(kmul(vec![bx, by]), e)
}

/// Apply a solution-side record to a kernel family:
/// G ↦ f(x)f(y)·G[ã; α̃..δ̃; ϱ(x), ϱ(y)].
pub fn apply_record_to_kernel(rec: &TransformRecord, k: &HeunKernel) -> HeunKernel {
    let rec = rec.clone();
    let inner = k.clone();
    HeunKernel::new(move |p: &HeunKernelParams| {
        let greeks2 = rec.params.apply(p.greeks());
        let a2 = rec.amap.eval(p.a);
        let p2 = HeunKernelParams::new(a2, greeks2[0], greeks2[1], greeks2[2], greeks2[3]);
        let g2 = (inner.build)(&p2)?;

        let [ma, mb, mc, md] = rec.mobius.complex_coeffs(p.a);
        let lin = |v: KernelExpr, hi: C64, lo: C64| {
            let mut terms = vec![];
            if hi != ZERO {
                terms.push(if hi == ONE { v } else { kmul(vec![kc(hi), v]) });
            }
            if lo != ZERO {
                terms.push(kc(lo));
            }
            match terms.len() {
                0 => kr(0.0),
                1 => terms.pop().unwrap(),
                _ => kadd(terms),
            }
        };
        let rho = |v: KernelExpr| {
            if mc == ZERO && md == ONE {
                lin(v, ma, mb)
            } else {
                kdiv(lin(v.clone(), ma, mb), lin(v, mc, md))
            }
        };
        let substituted = g2.map_coords(&rho(KernelExpr::X), &rho(KernelExpr::Y));

        let mut factors = vec![];
        let bases: [(KernelExpr, KernelExpr); 3] = [
            (KernelExpr::X, KernelExpr::Y),
            (kone_minus(KernelExpr::X), kone_minus(KernelExpr::Y)),
            (
                kone_minus(kmul(vec![kc(ONE / p.a), KernelExpr::X])),
                kone_minus(kmul(vec![kc(ONE / p.a), KernelExpr::Y])),
            ),
        ];
        for (form, (bx, by)) in rec.prefactor.iter().zip(bases) {
            if form.is_zero() {
                continue;
            }
            factors.push(symmetric_pow(bx, by, form.eval(p.greeks())));
        }
        factors.push(substituted);
        Ok(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            kmul(factors)
        })
    })
}

/// N_i: the index transformation of kernels.
pub fn kernel_homotopic(i: usize, k: &HeunKernel) -> HeunKernel {
    apply_record_to_kernel(&homotopic(i), k)
}

/// K_j: the Möbius transformation of kernels.
pub fn kernel_mobius(j: usize, k: &HeunKernel) -> HeunKernel {
    apply_record_to_kernel(&mobius(j), k)
}

/// Apply a confluent rule to a confluent kernel family.
pub fn apply_che_record_to_kernel(rec: &CheTransformRecord, k: &CheKernel) -> CheKernel {
    let rec = rec.clone();
    let inner = k.clone();
    CheKernel::new(move |p: &CheKernelParams| {
        let tp = rec.transformed_params(&p.to_operator())?;
        let p2 = CheKernelParams::new(tp.rho, tp.alpha, tp.gamma, tp.delta);
        let g2 = (inner.build)(&p2)?;
        let (fx, fy) = if rec.flip {
            (kone_minus(KernelExpr::X), kone_minus(KernelExpr::Y))
        } else {
            (KernelExpr::X, KernelExpr::Y)
        };
        let substituted = g2.map_coords(&fx, &fy);
        let g = [p.alpha, p.gamma, p.delta];
        let affine = |row: [i64; 4]| {
            cr(row[3] as f64)
                + cr(row[0] as f64) * g[0]
                + cr(row[1] as f64) * g[1]
                + cr(row[2] as f64) * g[2]
        };
        let mut factors = vec![];
        if rec.pref[0] != [0; 4] {
            factors.push(symmetric_pow(KernelExpr::X, KernelExpr::Y, affine(rec.pref[0])));
        }
        if rec.pref[1] != [0; 4] {
            factors.push(symmetric_pow(
                kone_minus(KernelExpr::X),
                kone_minus(KernelExpr::Y),
                affine(rec.pref[1]),
            ));
        }
        if rec.exp_coeff != 0 {
            let kf = p.rho * rec.exp_coeff as f64;
            factors.push(KernelExpr::Exp(Box::new(kmul(vec![
                kc(kf),
                kadd(vec![KernelExpr::X, KernelExpr::Y]),
            ]))));
        }
        factors.push(substituted);
        Ok(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            kmul(factors)
        })
    })
}

/// The i-th confluent kernel rule.
pub fn kernel_che_rule(i: usize, k: &CheKernel) -> CheKernel {
    apply_che_record_to_kernel(&che_transform(i), k)
}

// ---------------------------------------------------------------------
// equivalence testing

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Equivalence {
    EqualUpToConstant(C64),
    Distinct,
}

pub const EQUIVALENCE_TOL: f64 = 1e-9;
pub const EQUIVALENCE_POINTS: usize = 12;

/// Compare two kernels on clustered common points: equal up to a
/// constant when the pointwise ratio has relative spread below `tol`.
/// Points sit in one branch cell: identities between kernels hold with
/// one constant per cell, and genuinely different kernels still show a
/// ratio drift far above any tolerance of interest.
pub fn equivalence_test(
    op: &KernelOp,
    g1: &KernelExpr,
    g2: &KernelExpr,
    n_points: usize,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Equivalence> {
    // sample against the merged constraint set so both sides are valid
    let merged = kmul(vec![g1.clone(), g2.clone()]);
    let pts = sample_points_clustered(op, &merged, n_points, rng)?;
    let mut ratios = vec![];
    for &(x, y) in &pts {
        let v1: C64 = g1.eval(x, y)?;
        let v2: C64 = g2.eval(x, y)?;
        if v2.norm() < 1e-250 {
            return Ok(Equivalence::Distinct);
        }
        ratios.push(v1 / v2);
    }
    let mean = ratios.iter().sum::<C64>() / ratios.len() as f64;
    if mean.norm() < 1e-250 {
        return Ok(Equivalence::Distinct);
    }
    let spread = ratios.iter().map(|r| (r - mean).norm()).fold(0.0, f64::max) / mean.norm();
    if spread < tol {
        Ok(Equivalence::EqualUpToConstant(mean))
    } else {
        Ok(Equivalence::Distinct)
    }
}

// ---------------------------------------------------------------------
// structural normalization (equality up to a multiplicative constant)

/// Sparse polynomial in (x, y) used by the structural normalizer.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyXY {
    /// (i, j) → coefficient of x^i y^j, sorted by key
    pub terms: Vec<((u32, u32), C64)>,
}

impl PolyXY {
    fn constant(z: C64) -> Self {
        if z == ZERO {
            PolyXY { terms: vec![] }
        } else {
            PolyXY { terms: vec![((0, 0), z)] }
        }
    }

    fn var(is_y: bool) -> Self {
        PolyXY { terms: vec![(if is_y { (0, 1) } else { (1, 0) }, ONE)] }
    }

    fn add(&self, o: &PolyXY) -> PolyXY {
        let mut map: std::collections::BTreeMap<(u32, u32), C64> =
            self.terms.iter().cloned().collect();
        for (k, v) in &o.terms {
            let e = map.entry(*k).or_insert(ZERO);
            *e += v;
            if e.norm() < 1e-300 {
                map.remove(k);
            }
        }
        PolyXY { terms: map.into_iter().collect() }
    }

    fn mul(&self, o: &PolyXY) -> PolyXY {
        let mut map: std::collections::BTreeMap<(u32, u32), C64> = Default::default();
        for ((i1, j1), v1) in &self.terms {
            for ((i2, j2), v2) in &o.terms {
                let e = map.entry((i1 + i2, j1 + j2)).or_insert(ZERO);
                *e += v1 * v2;
            }
        }
        map.retain(|_, v| v.norm() > 1e-300);
        PolyXY { terms: map.into_iter().collect() }
    }

    fn scale(&self, k: C64) -> PolyXY {
        PolyXY { terms: self.terms.iter().map(|(m, v)| (*m, v * k)).collect() }
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn leading(&self) -> Option<C64> {
        self.terms.first().map(|(_, v)| *v)
    }

    /// Scaled so the first (lexicographic) coefficient is 1.
    fn canonical(&self) -> PolyXY {
        match self.leading() {
            None => self.clone(),
            Some(l) => self.scale(ONE / l),
        }
    }

    fn drop_constant_term(&self) -> PolyXY {
        PolyXY {
            terms: self.terms.iter().filter(|(m, _)| *m != (0, 0)).cloned().collect(),
        }
    }

    fn close_to(&self, o: &PolyXY, tol: f64) -> bool {
        if self.terms.len() != o.terms.len() {
            return false;
        }
        let scale = self
            .terms
            .iter()
            .chain(&o.terms)
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
            .max(1e-30);
        self.terms
            .iter()
            .zip(&o.terms)
            .all(|((m1, v1), (m2, v2))| m1 == m2 && (v1 - v2).norm() < tol * scale)
    }
}

fn expr_to_polyxy(e: &KernelExpr) -> Option<PolyXY> {
    Some(match e {
        KernelExpr::Const(z) => PolyXY::constant(*z),
        KernelExpr::X => PolyXY::var(false),
        KernelExpr::Y => PolyXY::var(true),
        KernelExpr::Neg(t) => expr_to_polyxy(t)?.scale(-ONE),
        KernelExpr::Add(ts) => {
            let mut acc = PolyXY::constant(ZERO);
            for t in ts {
                acc = acc.add(&expr_to_polyxy(t)?);
            }
            acc
        }
        KernelExpr::Mul(ts) => {
            let mut acc = PolyXY::constant(ONE);
            for t in ts {
                acc = acc.mul(&expr_to_polyxy(t)?);
            }
            acc
        }
        KernelExpr::Pow(b, e) => {
            if e.im != 0.0 || e.re.fract() != 0.0 || e.re < 0.0 || e.re > 4.5 {
                return None;
            }
            let p = expr_to_polyxy(b)?;
            let mut acc = PolyXY::constant(ONE);
            for _ in 0..e.re as usize {
                acc = acc.mul(&p);
            }
            acc
        }
        _ => return None,
    })
}

fn expr_to_ratxy(e: &KernelExpr) -> Option<(PolyXY, PolyXY)> {
    Some(match e {
        KernelExpr::Div(n, d) => {
            let (nn, nd) = expr_to_ratxy(n)?;
            let (dn, dd) = expr_to_ratxy(d)?;
            (nn.mul(&dd), nd.mul(&dn))
        }
        KernelExpr::Mul(ts) => {
            let mut num = PolyXY::constant(ONE);
            let mut den = PolyXY::constant(ONE);
            for t in ts {
                let (n, d) = expr_to_ratxy(t)?;
                num = num.mul(&n);
                den = den.mul(&d);
            }
            (num, den)
        }
        KernelExpr::Add(ts) => {
            let mut num = PolyXY::constant(ZERO);
            let mut den = PolyXY::constant(ONE);
            for t in ts {
                let (n, d) = expr_to_ratxy(t)?;
                num = num.mul(&d).add(&n.mul(&den));
                den = den.mul(&d);
            }
            (num, den)
        }
        KernelExpr::Neg(t) => {
            let (n, d) = expr_to_ratxy(t)?;
            (n.scale(-ONE), d)
        }
        KernelExpr::Pow(b, e) => {
            if e.im != 0.0 || e.re.fract() != 0.0 || e.re.abs() > 4.5 {
                return None;
            }
            let (bn, bd) = expr_to_ratxy(b)?;
            let k = e.re as i64;
            let mut num = PolyXY::constant(ONE);
            let mut den = PolyXY::constant(ONE);
            for _ in 0..k.unsigned_abs() {
                num = num.mul(&bn);
                den = den.mul(&bd);
            }
            if k < 0 {
                (den, num)
            } else {
                (num, den)
            }
        }
        _ => (expr_to_polyxy(e)?, PolyXY::constant(ONE)),
    })
}

/// Fixed generic probe points used to identify rational arguments as
/// functions (rather than by any particular coefficient representation,
/// which substitution leaves uncancelled).
const ARG_PROBES: [(f64, f64, f64, f64); 10] = [
    (0.313, 0.197, 0.811, -0.256),
    (1.271, -0.432, 0.529, 0.613),
    (-0.617, 0.351, 1.113, 0.207),
    (2.137, 0.519, -0.731, 0.433),
    (0.457, 1.029, 1.723, -0.311),
    (-1.319, -0.227, 0.397, 0.951),
    (0.733, 0.341, 2.417, 0.113),
    (1.531, -0.713, -0.521, -0.617),
    (0.231, 0.537, 0.951, 1.333),
    (1.911, 0.233, 0.617, 0.519),
];

/// Value signature of a rational argument at the fixed probes.
#[derive(Clone, Debug)]
pub struct ArgSig {
    values: Vec<Option<C64>>,
}

impl ArgSig {
    fn from_expr(e: &KernelExpr) -> ArgSig {
        let values = ARG_PROBES
            .iter()
            .map(|&(xr, xi, yr, yi)| e.eval::<C64>(c(xr, xi), c(yr, yi)).ok())
            .collect();
        ArgSig { values }
    }

    fn close_to(&self, o: &ArgSig, tol: f64) -> bool {
        let mut共 = 0;
        for (u, v) in self.values.iter().zip(&o.values) {
            if let (Some(u), Some(v)) = (u, v) {
                if (u - v).norm() > tol * (1.0 + u.norm().max(v.norm())) {
                    return false;
                }
                共 += 1;
            }
        }
        共 >= 6
    }
}

#[derive(Clone, Debug)]
enum Atom {
    /// polynomial factor (elementary; verified through the cofactor)
    Poly(PolyXY),
    /// special function with parameters and argument signature
    Sf { tag: u8, params: Vec<C64>, arg: ArgSig },
    /// exponential with polynomial argument, constant term dropped
    ExpArg(PolyXY),
}

/// Multiplicative normal form: factors with complex exponents, overall
/// constants dropped.
pub struct NormalForm {
    factors: Vec<(Atom, C64)>,
}

fn push_factor(out: &mut Vec<(Atom, C64)>, atom: Atom, e: C64, tol: f64) {
    if e.norm() < 1e-12 {
        return;
    }
    for (a, exp) in out.iter_mut() {
        if a.close_to(&atom, tol) {
            *exp += e;
            return;
        }
    }
    out.push((atom, e));
}

fn normalize_into(e: &KernelExpr, exp: C64, out: &mut Vec<(Atom, C64)>, tol: f64) -> Option<()> {
    match e {
        KernelExpr::Const(z) => {
            if *z == ZERO {
                return None;
            }
        }
        KernelExpr::Neg(t) => normalize_into(t, exp, out, tol)?,
        KernelExpr::Mul(ts) => {
            for t in ts {
                normalize_into(t, exp, out, tol)?;
            }
        }
        KernelExpr::Div(n, d) => {
            normalize_into(n, exp, out, tol)?;
            normalize_into(d, exp.neg(), out, tol)?;
        }
        KernelExpr::Pow(b, pe) => normalize_into(b, exp * pe, out, tol)?,
        KernelExpr::Exp(t) => {
            let (n, d) = expr_to_ratxy(t)?;
            // only polynomial exponents are handled structurally
            if !(d.terms.len() == 1 && d.terms[0].0 == (0, 0)) {
                return None;
            }
            let p = n.scale(exp / d.terms[0].1).drop_constant_term();
            if !p.is_zero() {
                push_factor(out, Atom::ExpArg(p), ONE, tol);
            }
        }
        KernelExpr::X | KernelExpr::Y | KernelExpr::Add(_) => {
            let (n, d) = expr_to_ratxy(e)?;
            if n.is_zero() {
                return None;
            }
            push_factor(out, Atom::Poly(n.canonical()), exp, tol);
            if !(d.terms.len() == 1 && d.terms[0].0 == (0, 0)) {
                push_factor(out, Atom::Poly(d.canonical()), exp.neg(), tol);
            }
        }
        KernelExpr::Hyp2F1(p, u) => {
            let arg = CanonArg::from_expr(u)?;
            push_factor(out, Atom::Sf { tag: 0, params: vec![p.a, p.b, p.c], arg }, exp, tol);
        }
        KernelExpr::HypLocal(k, p, u) => {
            let expanded = local_solution_expr(*k, *p, (**u).clone());
            normalize_into(&expanded, exp, out, tol)?;
        }
        KernelExpr::Phi(p, u) => {
            let arg = CanonArg::from_expr(u)?;
            push_factor(out, Atom::Sf { tag: 1, params: vec![p.a, p.c], arg }, exp, tol);
        }
        KernelExpr::Psi(p, u) => {
            let arg = CanonArg::from_expr(u)?;
            push_factor(out, Atom::Sf { tag: 2, params: vec![p.a, p.c], arg }, exp, tol);
        }
    }
    Some(())
}

/// Normalize a product-form kernel; `None` when the tree has essential
/// non-multiplicative structure.
pub fn normalize(e: &KernelExpr, tol: f64) -> Option<NormalForm> {
    let mut out = vec![];
    normalize_into(e, ONE, &mut out, tol)?;
    out.retain(|(_, e)| e.norm() > 1e-10);
    Some(NormalForm { factors: out })
}

/// Structural equality up to a multiplicative constant, honoring the
/// F(a,b;c;u) = F(b,a;c;u) parameter symmetry.
pub fn structurally_equal(e1: &KernelExpr, e2: &KernelExpr, tol: f64) -> Option<bool> {
    let n1 = normalize(e1, tol)?;
    let n2 = normalize(e2, tol)?;
    if n1.factors.len() != n2.factors.len() {
        return Some(false);
    }
    let mut used = vec![false; n2.factors.len()];
    'outer: for (a1, x1) in &n1.factors {
        for (k, (a2, x2)) in n2.factors.iter().enumerate() {
            if used[k] || (x1 - x2).norm() > tol * (1.0 + x1.norm()) {
                continue;
            }
            let matches = a1.close_to(a2, tol)
                || match (a1, a2) {
                    (
                        Atom::Sf { tag: 0, params: p1, arg: g1 },
                        Atom::Sf { tag: 0, params: p2, arg: g2 },
                    ) => {
                        (p1[0] - p2[1]).norm() < tol * (1.0 + p1[0].norm())
                            && (p1[1] - p2[0]).norm() < tol * (1.0 + p1[1].norm())
                            && (p1[2] - p2[2]).norm() < tol * (1.0 + p1[2].norm())
                            && g1.close_to(g2, tol)
                    }
                    _ => false,
                };
            if matches {
                used[k] = true;
                continue 'outer;
            }
        }
        return Some(false);
    }
    Some(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn kparams() -> HeunKernelParams {
        HeunKernelParams::new(cr(3.0), c(0.31, 0.0), c(0.77, 0.0), c(0.58, 0.0), c(0.44, 0.0))
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    /// F(α,β;γ;xy/a) — the simplest symmetric kernel.
    fn lw1(p: &HeunKernelParams) -> KernelExpr {
        KernelExpr::Hyp2F1(
            HypParams::new(p.alpha, p.beta, p.gamma),
            Box::new(kdiv(kmul(vec![KernelExpr::X, KernelExpr::Y]), kc(p.a))),
        )
    }

    #[test]
    fn symmetric_product_kernel_satisfies_the_pde() {
        // parameters and point fixed: a=3, α=0.31, β=0.77, γ=0.58, δ=0.44
        let p = kparams();
        let g = lw1(&p);
        let r = kernel_pde_residual(
            &KernelOp::Heun(p),
            &g,
            c(0.2, 0.01),
            c(0.3, 0.02),
        )
        .unwrap();
        assert!(r < 1e-9, "residual {r}");
    }

    #[test]
    fn constants_are_not_kernels() {
        // M_x G − M_y G = αβ(x−y)G for constant G
        let p = kparams();
        let g = kr(1.0);
        let (x, y) = (c(0.2, 0.01), c(0.3, 0.02));
        let j = g.eval_jet(x, y).unwrap();
        let hp = p.to_operator();
        let mx: C64 = heun_operator_terms(&hp, &j, x, CoordSlot::X).iter().sum();
        let my: C64 = heun_operator_terms(&hp, &j, y, CoordSlot::Y).iter().sum();
        let want = p.alpha * p.beta * (x - y);
        assert!((mx - my - want).norm() < 1e-14);
        let r = kernel_pde_residual(&KernelOp::Heun(p), &g, x, y).unwrap();
        assert!(r > 1e-3, "constants must fail the kernel equation, r = {r}");
    }

    #[test]
    fn sampler_reaches_hard_domains() {
        let p = kparams();
        let op = KernelOp::Heun(p);
        let mut rng = rng();
        // series around 1: argument near 1 needed
        let g3 = local_solution_expr(
            3,
            HypParams::new(p.alpha, p.beta, p.gamma),
            kdiv(kmul(vec![KernelExpr::X, KernelExpr::Y]), kc(p.a)),
        );
        let pts = sample_points(&op, &g3, 6, &mut rng).unwrap();
        assert_eq!(pts.len(), 6);
        // series at infinity: |xy| > |a| needed
        let g5 = local_solution_expr(
            5,
            HypParams::new(p.alpha, p.beta, p.gamma),
            kdiv(kmul(vec![KernelExpr::X, KernelExpr::Y]), kc(p.a)),
        );
        let pts = sample_points(&op, &g5, 6, &mut rng).unwrap();
        assert_eq!(pts.len(), 6);
        for (x, y) in pts {
            assert!((x * y).norm() > p.a.norm(), "({x},{y})");
        }
    }

    #[test]
    fn local_solution_kernels_satisfy_the_pde() {
        let p = kparams();
        let op = KernelOp::Heun(p);
        let mut rng = rng();
        for k in 1..=6 {
            let g = local_solution_expr(
                k,
                HypParams::new(p.alpha, p.beta, p.gamma),
                kdiv(kmul(vec![KernelExpr::X, KernelExpr::Y]), kc(p.a)),
            );
            let (r, n) = max_residual(&op, &g, 8, &mut rng).unwrap();
            assert!(n >= 8, "k={k}: only {n} points");
            assert!(r < 1e-9, "k={k}: residual {r}");
        }
    }

    #[test]
    fn transform_images_remain_kernels() {
        let p = kparams();
        let op = KernelOp::Heun(p);
        let mut rng = rng();
        let base = HeunKernel::new(move |p| Ok(lw1(p)));
        for i in [2usize, 5, 8] {
            let g = (kernel_homotopic(i, &base).build)(&p).unwrap();
            let (r, _) = max_residual(&op, &g, 6, &mut rng).unwrap();
            assert!(r < 1e-9, "N{i}: residual {r}");
        }
        for j in [2usize, 4, 6, 7, 13] {
            let g = (kernel_mobius(j, &base).build)(&p).unwrap();
            let (r, _) = max_residual(&op, &g, 6, &mut rng).unwrap();
            assert!(r < 1e-9, "K{j}: residual {r}");
        }
    }

    #[test]
    fn equivalence_detects_scaling_and_difference() {
        let p = kparams();
        let op = KernelOp::Heun(p);
        let mut rng = rng();
        let g = lw1(&p);
        let g2 = kmul(vec![kr(2.0), g.clone()]);
        match equivalence_test(&op, &g2, &g, EQUIVALENCE_POINTS, EQUIVALENCE_TOL, &mut rng).unwrap()
        {
            Equivalence::EqualUpToConstant(k) => assert!((k - cr(2.0)).norm() < 1e-9),
            Equivalence::Distinct => panic!("2G vs G must be proportional"),
        }
        let other = local_solution_expr(
            3,
            HypParams::new(p.alpha, p.beta, p.gamma),
            kdiv(kmul(vec![KernelExpr::X, KernelExpr::Y]), kc(p.a)),
        );
        assert_eq!(
            equivalence_test(&op, &other, &g, EQUIVALENCE_POINTS, EQUIVALENCE_TOL, &mut rng)
                .unwrap(),
            Equivalence::Distinct
        );
    }

    #[test]
    fn structural_equality_up_to_constant() {
        let p = kparams();
        let g = lw1(&p);
        let scaled = kmul(vec![kc(c(0.0, 2.0)), g.clone()]);
        assert_eq!(structurally_equal(&g, &scaled, 1e-10), Some(true));
        // (xy)^e (xy)^{-e} collapses away
        let e = c(0.4, 0.1);
        let xy = kmul(vec![KernelExpr::X, KernelExpr::Y]);
        let dressed = kmul(vec![kpow(xy.clone(), e), kpow(xy, -e), g.clone()]);
        assert_eq!(structurally_equal(&g, &dressed, 1e-10), Some(true));
        // swapped F parameters compare equal
        let swapped = KernelExpr::Hyp2F1(
            HypParams::new(p.beta, p.alpha, p.gamma),
            Box::new(kdiv(kmul(vec![KernelExpr::X, KernelExpr::Y]), kc(p.a))),
        );
        assert_eq!(structurally_equal(&g, &swapped, 1e-10), Some(true));
        // a genuinely different kernel is not equal
        let other = local_solution_expr(
            4,
            HypParams::new(p.alpha, p.beta, p.gamma),
            kdiv(kmul(vec![KernelExpr::X, KernelExpr::Y]), kc(p.a)),
        );
        assert_eq!(structurally_equal(&g, &other, 1e-10), Some(false));
    }

    #[test]
    fn hyp_local_node_matches_expanded_tree() {
        let p = kparams();
        let hp = HypParams::new(p.alpha, p.beta, p.gamma);
        let arg = kdiv(kmul(vec![KernelExpr::X, KernelExpr::Y]), kc(p.a));
        for k in [2usize, 4] {
            let node = KernelExpr::HypLocal(k, hp, Box::new(arg.clone()));
            let tree = local_solution_expr(k, hp, arg.clone());
            // xy/a ≈ 0.22 keeps both the series in u and in 1−u inside
            // their domains
            let (x, y) = (c(1.6, 0.02), c(0.41, 0.015));
            let v1: C64 = node.eval(x, y).unwrap();
            let v2: C64 = tree.eval(x, y).unwrap();
            assert!((v1 - v2).norm() < 1e-12 * v1.norm());
            assert_eq!(structurally_equal(&node, &tree, 1e-10), Some(true));
        }
    }

    #[test]
    fn conf_local_expr_matches_function() {
        let p = CheKernelParams::new(c(1.1, 0.2), c(0.37, 0.0), c(0.58, 0.0), c(0.44, 0.0));
        let cp = ConfParams::new(p.alpha, p.gamma);
        let arg = kmul(vec![kc(-p.rho), KernelExpr::X, KernelExpr::Y]);
        let (x, y) = (c(0.3, 0.02), c(0.4, 0.01));
        for k in 1..=4 {
            let tree = conf_local_expr(k, cp, arg.clone());
            let v1: C64 = tree.eval(x, y).unwrap();
            let u = -p.rho * x * y;
            let v2 = conf_local(k, cp, u).unwrap();
            assert!((v1 - v2).norm() < 1e-12 * (1.0 + v1.norm()), "k={k}");
        }
    }

    #[test]
    fn che_rule_images_stay_kernels() {
        let p = CheKernelParams::new(c(1.1, 0.2), c(0.37, 0.0), c(0.58, 0.0), c(0.44, 0.0));
        let op = KernelOp::Che(p);
        let mut rng = rng();
        let base = CheKernel::new(move |p: &CheKernelParams| {
            Ok(KernelExpr::Phi(
                ConfParams::new(p.alpha, p.gamma),
                Box::new(kmul(vec![kc(-p.rho), KernelExpr::X, KernelExpr::Y])),
            ))
        });
        let g0 = (base.build)(&p).unwrap();
        let (r, _) = max_residual(&op, &g0, 8, &mut rng).unwrap();
        assert!(r < 1e-9, "base: {r}");
        for i in 1..=4 {
            let g = (kernel_che_rule(i, &base).build)(&p).unwrap();
            let (r, _) = max_residual(&op, &g, 8, &mut rng).unwrap();
            assert!(r < 1e-9, "rule {i}: residual {r}");
        }
    }
}
