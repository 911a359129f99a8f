//! Exact algebra for transformation records.
//!
//! Group elements are canonicalized structurally, so their ingredients
//! are kept exact: Möbius maps as 2×2 matrices of polynomials in the
//! singularity parameter `a` over ℚ, parameter maps and prefactor
//! exponents as integer affine forms over (α, β, γ, δ, 1), and
//! accessory maps q ↦ c₀ + c₁·q with c₁ ∈ ℚ(a) and c₀ a polynomial of
//! total degree ≤ 2 in the Greek parameters with ℚ(a) coefficients.
//! Composition never leaves these classes, which makes exact equality
//! testing of group elements possible without floating-point tricks.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::numerics::{C64, ZERO as C_ZERO};

pub type Q = BigRational;

pub fn q_int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

fn q_to_c(q: &Q) -> C64 {
    let num = q.numer().to_string().parse::<f64>().unwrap_or(f64::NAN);
    let den = q.denom().to_string().parse::<f64>().unwrap_or(f64::NAN);
    C64::new(num / den, 0.0)
}

/// Dense polynomial in `a` over ℚ, without trailing zero coefficients.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct PolyA {
    coeffs: Vec<Q>,
}

impl PolyA {
    pub fn new(coeffs: Vec<Q>) -> Self {
        let mut p = PolyA { coeffs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        PolyA { coeffs: vec![] }
    }

    pub fn constant(q: Q) -> Self {
        PolyA::new(vec![q])
    }

    pub fn int(n: i64) -> Self {
        PolyA::constant(q_int(n))
    }

    /// The monomial `a`.
    pub fn var() -> Self {
        PolyA::new(vec![Q::zero(), Q::one()])
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(Zero::is_zero) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> Option<&Q> {
        self.coeffs.last()
    }

    pub fn add(&self, o: &PolyA) -> PolyA {
        let n = self.coeffs.len().max(o.coeffs.len());
        let mut out = vec![Q::zero(); n];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, c) in o.coeffs.iter().enumerate() {
            out[i] += c;
        }
        PolyA::new(out)
    }

    pub fn sub(&self, o: &PolyA) -> PolyA {
        self.add(&o.scale(&-Q::one()))
    }

    pub fn scale(&self, k: &Q) -> PolyA {
        if k.is_zero() {
            return PolyA::zero();
        }
        PolyA::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn mul(&self, o: &PolyA) -> PolyA {
        if self.is_zero() || o.is_zero() {
            return PolyA::zero();
        }
        let mut out = vec![Q::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        PolyA::new(out)
    }

    /// Euclidean GCD, normalized monic.
    pub fn gcd(&self, o: &PolyA) -> PolyA {
        let mut u = self.clone();
        let mut v = o.clone();
        while !v.is_zero() {
            let r = u.rem(&v);
            u = v;
            v = r;
        }
        u.monic()
    }

    fn rem(&self, d: &PolyA) -> PolyA {
        assert!(!d.is_zero());
        let mut r = self.clone();
        while !r.is_zero() && r.degree() >= d.degree() {
            let k = r.degree() - d.degree();
            let f = r.leading().unwrap() / d.leading().unwrap();
            let mut sub = vec![Q::zero(); k];
            sub.extend(d.coeffs.iter().map(|c| c * &f));
            r = r.sub(&PolyA::new(sub));
        }
        r
    }

    pub fn div_exact(&self, d: &PolyA) -> PolyA {
        assert!(!d.is_zero());
        let mut r = self.clone();
        let mut qout = vec![Q::zero(); self.coeffs.len().saturating_sub(d.coeffs.len() - 1)];
        while !r.is_zero() && r.degree() >= d.degree() {
            let k = r.degree() - d.degree();
            let f = r.leading().unwrap() / d.leading().unwrap();
            qout[k] = f.clone();
            let mut sub = vec![Q::zero(); k];
            sub.extend(d.coeffs.iter().map(|c| c * &f));
            r = r.sub(&PolyA::new(sub));
        }
        assert!(r.is_zero(), "division was not exact");
        PolyA::new(qout)
    }

    pub fn monic(&self) -> PolyA {
        match self.leading() {
            None => PolyA::zero(),
            Some(l) => self.scale(&(Q::one() / l)),
        }
    }

    pub fn eval(&self, a: C64) -> C64 {
        let mut v = C_ZERO;
        for c in self.coeffs.iter().rev() {
            v = v * a + q_to_c(c);
        }
        v
    }
}

impl fmt::Display for PolyA {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let mag = c.abs();
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
                first = false;
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let show_coeff = i == 0 || !mag.is_one();
            if show_coeff {
                write!(f, "{mag}")?;
                if i > 0 {
                    write!(f, "*")?;
                }
            }
            if i == 1 {
                write!(f, "a")?;
            } else if i > 1 {
                write!(f, "a^{i}")?;
            }
        }
        Ok(())
    }
}

/// Reduced rational function in `a` over ℚ with monic denominator.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct RatA {
    pub num: PolyA,
    pub den: PolyA,
}

impl RatA {
    pub fn new(num: PolyA, den: PolyA) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        if num.is_zero() {
            return RatA { num: PolyA::zero(), den: PolyA::int(1) };
        }
        let g = num.gcd(&den);
        let mut num = num.div_exact(&g);
        let mut den = den.div_exact(&g);
        let l = den.leading().unwrap().clone();
        num = num.scale(&(Q::one() / &l));
        den = den.scale(&(Q::one() / &l));
        RatA { num, den }
    }

    pub fn zero() -> Self {
        RatA { num: PolyA::zero(), den: PolyA::int(1) }
    }

    pub fn one() -> Self {
        RatA { num: PolyA::int(1), den: PolyA::int(1) }
    }

    pub fn int(n: i64) -> Self {
        RatA { num: PolyA::int(n), den: PolyA::int(1) }
    }

    pub fn from_poly(p: PolyA) -> Self {
        RatA { num: p, den: PolyA::int(1) }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn add(&self, o: &RatA) -> RatA {
        RatA::new(
            self.num.mul(&o.den).add(&o.num.mul(&self.den)),
            self.den.mul(&o.den),
        )
    }

    pub fn sub(&self, o: &RatA) -> RatA {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> RatA {
        RatA { num: self.num.scale(&-Q::one()), den: self.den.clone() }
    }

    pub fn mul(&self, o: &RatA) -> RatA {
        RatA::new(self.num.mul(&o.num), self.den.mul(&o.den))
    }

    pub fn div(&self, o: &RatA) -> RatA {
        assert!(!o.is_zero(), "division by zero rational function");
        RatA::new(self.num.mul(&o.den), self.den.mul(&o.num))
    }

    pub fn eval(&self, a: C64) -> C64 {
        self.num.eval(a) / self.den.eval(a)
    }

    /// Substitute a ← (p·a + q)/(r·a + s).
    pub fn subst_mobius(&self, m: &MobiusQ) -> RatA {
        let pnum = PolyA::new(vec![m.b.clone(), m.a.clone()]);
        let pden = PolyA::new(vec![m.d.clone(), m.c.clone()]);
        let n = self.num.coeffs.len().max(self.den.coeffs.len()).max(1);
        let mut down = vec![PolyA::int(1)];
        for _ in 1..n {
            let last = down.last().unwrap().clone();
            down.push(last.mul(&pden));
        }
        let subst_poly = |p: &PolyA| -> PolyA {
            let mut acc = PolyA::zero();
            let mut up = PolyA::int(1);
            for (i, c) in p.coeffs.iter().enumerate() {
                let term = up.scale(c).mul(&down[n - 1 - i]);
                acc = acc.add(&term);
                up = up.mul(&pnum);
            }
            acc
        };
        RatA::new(subst_poly(&self.num), subst_poly(&self.den))
    }
}

impl fmt::Display for RatA {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == PolyA::int(1) {
            if self.num.degree() == 0 || self.num.is_zero() {
                write!(f, "{}", self.num)
            } else {
                write!(f, "({})", self.num)
            }
        } else {
            write!(f, "({})/({})", self.num, self.den)
        }
    }
}

/// Möbius map of the parameter `a` with rational constant coefficients:
/// a ↦ (p·a + q)/(r·a + s), canonicalized.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct MobiusQ {
    pub a: Q,
    pub b: Q,
    pub c: Q,
    pub d: Q,
}

impl MobiusQ {
    pub fn new(a: Q, b: Q, c: Q, d: Q) -> Self {
        let mut m = MobiusQ { a, b, c, d };
        m.normalize();
        m
    }

    pub fn identity() -> Self {
        MobiusQ::new(Q::one(), Q::zero(), Q::zero(), Q::one())
    }

    pub fn from_ints(a: i64, b: i64, c: i64, d: i64) -> Self {
        MobiusQ::new(q_int(a), q_int(b), q_int(c), q_int(d))
    }

    fn normalize(&mut self) {
        let first = [&self.a, &self.b, &self.c, &self.d]
            .into_iter()
            .find(|q| !q.is_zero())
            .expect("degenerate Möbius map")
            .clone();
        self.a = &self.a / &first;
        self.b = &self.b / &first;
        self.c = &self.c / &first;
        self.d = &self.d / &first;
    }

    /// `self` applied after `first`: (self ∘ first)(a).
    pub fn compose(&self, first: &MobiusQ) -> MobiusQ {
        MobiusQ::new(
            &self.a * &first.a + &self.b * &first.c,
            &self.a * &first.b + &self.b * &first.d,
            &self.c * &first.a + &self.d * &first.c,
            &self.c * &first.b + &self.d * &first.d,
        )
    }

    pub fn eval(&self, a: C64) -> C64 {
        (q_to_c(&self.a) * a + q_to_c(&self.b)) / (q_to_c(&self.c) * a + q_to_c(&self.d))
    }

    pub fn render(&self) -> String {
        let num = PolyA::new(vec![self.b.clone(), self.a.clone()]);
        let den = PolyA::new(vec![self.d.clone(), self.c.clone()]);
        if den == PolyA::int(1) {
            format!("{num}")
        } else {
            format!("({num})/({den})")
        }
    }
}

/// Möbius map of the independent variable with ℚ[a] coefficients:
/// x ↦ (A·x + B)/(C·x + D), canonicalized projectively.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct MobiusA {
    pub a: PolyA,
    pub b: PolyA,
    pub c: PolyA,
    pub d: PolyA,
}

impl MobiusA {
    pub fn new(a: PolyA, b: PolyA, c: PolyA, d: PolyA) -> Self {
        let mut m = MobiusA { a, b, c, d };
        m.normalize();
        m
    }

    pub fn identity() -> Self {
        MobiusA::new(PolyA::int(1), PolyA::zero(), PolyA::zero(), PolyA::int(1))
    }

    /// Divide out the common polynomial factor and make the first
    /// nonzero entry monic.
    fn normalize(&mut self) {
        let entries = [&self.a, &self.b, &self.c, &self.d];
        let mut g = PolyA::zero();
        for e in entries {
            if !e.is_zero() {
                g = if g.is_zero() { e.clone() } else { g.gcd(e) };
            }
        }
        assert!(!g.is_zero(), "degenerate Möbius map");
        self.a = if self.a.is_zero() { PolyA::zero() } else { self.a.div_exact(&g) };
        self.b = if self.b.is_zero() { PolyA::zero() } else { self.b.div_exact(&g) };
        self.c = if self.c.is_zero() { PolyA::zero() } else { self.c.div_exact(&g) };
        self.d = if self.d.is_zero() { PolyA::zero() } else { self.d.div_exact(&g) };
        let lead = [&self.a, &self.b, &self.c, &self.d]
            .into_iter()
            .find_map(|p| p.leading().cloned())
            .unwrap();
        let k = Q::one() / lead;
        self.a = self.a.scale(&k);
        self.b = self.b.scale(&k);
        self.c = self.c.scale(&k);
        self.d = self.d.scale(&k);
    }

    /// Substitute a ← m(a) into every coefficient, clearing denominators.
    pub fn subst_param(&self, m: &MobiusQ) -> MobiusA {
        let conv = |p: &PolyA| RatA::from_poly(p.clone()).subst_mobius(m);
        let ra = conv(&self.a);
        let rb = conv(&self.b);
        let rc = conv(&self.c);
        let rd = conv(&self.d);
        let mut den = PolyA::int(1);
        for r in [&ra, &rb, &rc, &rd] {
            let g = den.gcd(&r.den);
            den = den.mul(&r.den.div_exact(&g));
        }
        let clear = |r: &RatA| r.num.mul(&den.div_exact(&r.den));
        MobiusA::new(clear(&ra), clear(&rb), clear(&rc), clear(&rd))
    }

    /// `self` applied after `first` (as maps of x), both already living
    /// at the same parameter value.
    pub fn compose(&self, first: &MobiusA) -> MobiusA {
        MobiusA::new(
            self.a.mul(&first.a).add(&self.b.mul(&first.c)),
            self.a.mul(&first.b).add(&self.b.mul(&first.d)),
            self.c.mul(&first.a).add(&self.d.mul(&first.c)),
            self.c.mul(&first.b).add(&self.d.mul(&first.d)),
        )
    }

    pub fn inverse(&self) -> MobiusA {
        MobiusA::new(
            self.d.clone(),
            self.b.scale(&-Q::one()),
            self.c.scale(&-Q::one()),
            self.a.clone(),
        )
    }

    /// 1 − ϱ(x) as a Möbius map.
    pub fn one_minus(&self) -> MobiusA {
        MobiusA::new(
            self.c.sub(&self.a),
            self.d.sub(&self.b),
            self.c.clone(),
            self.d.clone(),
        )
    }

    /// 1 − ϱ(x)/t for a rational-function constant t.
    pub fn one_minus_div(&self, t: &RatA) -> MobiusA {
        MobiusA::new(
            t.num.mul(&self.c).sub(&t.den.mul(&self.a)),
            t.num.mul(&self.d).sub(&t.den.mul(&self.b)),
            t.num.mul(&self.c),
            t.num.mul(&self.d),
        )
    }

    pub fn eval(&self, a: C64, x: C64) -> C64 {
        (self.a.eval(a) * x + self.b.eval(a)) / (self.c.eval(a) * x + self.d.eval(a))
    }

    /// Coefficients at a concrete `a`, as (A, B, C, D).
    pub fn complex_coeffs(&self, a: C64) -> [C64; 4] {
        [self.a.eval(a), self.b.eval(a), self.c.eval(a), self.d.eval(a)]
    }

    pub fn render(&self) -> String {
        let term = |p: &PolyA, with_x: bool| -> Option<String> {
            if p.is_zero() {
                return None;
            }
            let s = format!("{p}");
            let core = if with_x {
                if s == "1" {
                    "x".to_string()
                } else if s == "-1" {
                    "-x".to_string()
                } else if p.degree() == 0 {
                    format!("{s}*x")
                } else {
                    format!("({s})*x")
                }
            } else {
                s
            };
            Some(core)
        };
        let join = |hi: Option<String>, lo: Option<String>| -> String {
            match (hi, lo) {
                (None, None) => "0".into(),
                (Some(h), None) => h,
                (None, Some(l)) => l,
                (Some(h), Some(l)) => {
                    if let Some(stripped) = l.strip_prefix('-') {
                        format!("{h} - {stripped}")
                    } else {
                        format!("{h} + {l}")
                    }
                }
            }
        };
        let num = join(term(&self.a, true), term(&self.b, false));
        let den = join(term(&self.c, true), term(&self.d, false));
        if den == "1" {
            num
        } else {
            format!("({num})/({den})")
        }
    }
}

/// Integer affine form e₀α + e₁β + e₂γ + e₃δ + e₄.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct AffineForm(pub [i64; 5]);

pub const GREEK_NAMES: [&str; 4] = ["alpha", "beta", "gamma", "delta"];

impl AffineForm {
    pub fn zero() -> Self {
        AffineForm([0; 5])
    }

    pub fn constant(k: i64) -> Self {
        AffineForm([0, 0, 0, 0, k])
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 5]
    }

    pub fn add(&self, o: &AffineForm) -> AffineForm {
        let mut v = [0i64; 5];
        for i in 0..5 {
            v[i] = self.0[i] + o.0[i];
        }
        AffineForm(v)
    }

    pub fn scale(&self, k: i64) -> AffineForm {
        let mut v = self.0;
        for e in &mut v {
            *e *= k;
        }
        AffineForm(v)
    }

    /// Substitute the Greek variables by the rows of a parameter map.
    pub fn subst(&self, m: &ParamMap) -> AffineForm {
        let mut v = AffineForm::constant(self.0[4]);
        for i in 0..4 {
            v = v.add(&AffineForm(m.rows[i]).scale(self.0[i]));
        }
        v
    }

    pub fn eval(&self, greeks: [C64; 4]) -> C64 {
        let mut v = C64::new(self.0[4] as f64, 0.0);
        for i in 0..4 {
            v += C64::new(self.0[i] as f64, 0.0) * greeks[i];
        }
        v
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for i in 0..5 {
            let k = self.0[i];
            if k == 0 {
                continue;
            }
            let mag = k.abs();
            let piece = if i == 4 {
                format!("{mag}")
            } else if mag == 1 {
                GREEK_NAMES[i].to_string()
            } else {
                format!("{mag}*{}", GREEK_NAMES[i])
            };
            if out.is_empty() {
                if k < 0 {
                    out.push('-');
                }
            } else if k < 0 {
                out.push_str(" - ");
            } else {
                out.push_str(" + ");
            }
            out.push_str(&piece);
        }
        if out.is_empty() {
            out.push('0');
        }
        out
    }
}

/// Affine map of (α, β, γ, δ); each row is an [`AffineForm`].
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct ParamMap {
    pub rows: [[i64; 5]; 4],
}

impl ParamMap {
    pub fn identity() -> Self {
        ParamMap {
            rows: [
                [1, 0, 0, 0, 0],
                [0, 1, 0, 0, 0],
                [0, 0, 1, 0, 0],
                [0, 0, 0, 1, 0],
            ],
        }
    }

    pub fn from_rows(rows: [[i64; 5]; 4]) -> Self {
        ParamMap { rows }
    }

    /// self ∘ first.
    pub fn compose_after(&self, first: &ParamMap) -> ParamMap {
        let mut rows = [[0i64; 5]; 4];
        for r in 0..4 {
            rows[r] = AffineForm(self.rows[r]).subst(first).0;
        }
        ParamMap { rows }
    }

    pub fn apply(&self, greeks: [C64; 4]) -> [C64; 4] {
        [
            AffineForm(self.rows[0]).eval(greeks),
            AffineForm(self.rows[1]).eval(greeks),
            AffineForm(self.rows[2]).eval(greeks),
            AffineForm(self.rows[3]).eval(greeks),
        ]
    }

    pub fn render(&self) -> [String; 4] {
        [
            AffineForm(self.rows[0]).render(),
            AffineForm(self.rows[1]).render(),
            AffineForm(self.rows[2]).render(),
            AffineForm(self.rows[3]).render(),
        ]
    }
}

/// ε = α + β + 1 − γ − δ as an affine form.
pub fn epsilon_form() -> AffineForm {
    AffineForm([1, 1, -1, -1, 1])
}

/// Polynomial in the Greek parameters of total degree ≤ 2, with ℚ(a)
/// coefficients; the carrier of accessory-map constants.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct GreekPoly {
    /// monomial exponents (α, β, γ, δ) → coefficient
    pub terms: BTreeMap<[u8; 4], RatA>,
}

impl GreekPoly {
    pub fn zero() -> Self {
        GreekPoly { terms: BTreeMap::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn insert(&mut self, mono: [u8; 4], coeff: RatA) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry(mono).or_insert_with(RatA::zero);
        *entry = entry.add(&coeff);
        if entry.is_zero() {
            self.terms.remove(&mono);
        }
    }

    pub fn from_affine(f: &AffineForm) -> Self {
        let mut p = GreekPoly::zero();
        for i in 0..4 {
            let mut mono = [0u8; 4];
            mono[i] = 1;
            p.insert(mono, RatA::int(f.0[i]));
        }
        p.insert([0; 4], RatA::int(f.0[4]));
        p
    }

    pub fn scale(&self, k: &RatA) -> GreekPoly {
        let mut p = GreekPoly::zero();
        if k.is_zero() {
            return p;
        }
        for (mono, coeff) in &self.terms {
            p.insert(*mono, coeff.mul(k));
        }
        p
    }

    pub fn add(&self, o: &GreekPoly) -> GreekPoly {
        let mut p = self.clone();
        for (mono, coeff) in &o.terms {
            p.insert(*mono, coeff.clone());
        }
        p
    }

    /// Product of an affine form with a polynomial; the result must stay
    /// within total degree 2.
    pub fn mul_affine(f: &AffineForm, g: &GreekPoly) -> GreekPoly {
        let mut out = GreekPoly::zero();
        let fp = GreekPoly::from_affine(f);
        for (m1, c1) in &fp.terms {
            for (m2, c2) in &g.terms {
                let mut mono = [0u8; 4];
                let mut deg = 0u8;
                for i in 0..4 {
                    mono[i] = m1[i] + m2[i];
                    deg += mono[i];
                }
                assert!(deg <= 2, "accessory constants stay at degree <= 2");
                out.insert(mono, c1.mul(c2));
            }
        }
        out
    }

    /// Substitute the Greek variables with affine forms.
    pub fn subst_params(&self, m: &ParamMap) -> GreekPoly {
        let mut out = GreekPoly::zero();
        for (mono, coeff) in &self.terms {
            let mut factor_poly: Option<GreekPoly> = None;
            for i in 0..4 {
                for _ in 0..mono[i] {
                    let f = AffineForm(m.rows[i]);
                    factor_poly = Some(match factor_poly {
                        None => GreekPoly::from_affine(&f),
                        Some(p) => GreekPoly::mul_affine(&f, &p),
                    });
                }
            }
            let piece = match factor_poly {
                None => {
                    let mut p = GreekPoly::zero();
                    p.insert([0; 4], RatA::one());
                    p
                }
                Some(p) => p,
            };
            out = out.add(&piece.scale(coeff));
        }
        out
    }

    /// Substitute a ← m(a) in every coefficient.
    pub fn subst_amap(&self, m: &MobiusQ) -> GreekPoly {
        let mut out = GreekPoly::zero();
        for (mono, coeff) in &self.terms {
            out.insert(*mono, coeff.subst_mobius(m));
        }
        out
    }

    pub fn eval(&self, a: C64, greeks: [C64; 4]) -> C64 {
        let mut v = C_ZERO;
        for (mono, coeff) in &self.terms {
            let mut term = coeff.eval(a);
            for i in 0..4 {
                for _ in 0..mono[i] {
                    term *= greeks[i];
                }
            }
            v += term;
        }
        v
    }

    pub fn render(&self) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut parts = vec![];
        for (mono, coeff) in &self.terms {
            let mut s = format!("{coeff}");
            for i in 0..4 {
                for _ in 0..mono[i] {
                    s.push('*');
                    s.push_str(GREEK_NAMES[i]);
                }
            }
            parts.push(s);
        }
        parts.join(" + ")
    }
}

/// Accessory-parameter map q ↦ c₀(a; α..δ) + c₁(a)·q.
#[derive(Clone, PartialEq, Debug)]
pub struct AccessoryMap {
    pub c0: GreekPoly,
    pub c1: RatA,
}

impl AccessoryMap {
    pub fn identity() -> Self {
        AccessoryMap { c0: GreekPoly::zero(), c1: RatA::one() }
    }

    pub fn eval(&self, a: C64, greeks: [C64; 4], q: C64) -> C64 {
        self.c0.eval(a, greeks) + self.c1.eval(a) * q
    }

    pub fn render(&self) -> String {
        let c1 = format!("{}", self.c1);
        let q_part = if c1 == "1" { "q".into() } else { format!("({c1})*q") };
        if self.c0.is_zero() {
            q_part
        } else {
            format!("{} + {}", q_part, self.c0.render())
        }
    }
}
