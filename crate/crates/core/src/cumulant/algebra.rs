// SPDX-License-Identifier: Apache-2.0

//! Operator algebra for the moment equations.
//!
//! Products of single-site operators are kept as 2x2 matrices per site
//! (index 0 = up), so same-site products are reduced exactly before any
//! factorization. The Heisenberg generator of the master equation acts on
//! such monomials, and a [`MomentOracle`] turns the resulting expectation
//! values into numbers: either exactly from a density matrix or through the
//! Wick closure over the tracked moments.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use super::CumulantState;
use crate::error::{Error, Result};
use crate::sector::DensityMatrix;

pub type Mat2 = [[Complex64; 2]; 2];

const Z: Complex64 = Complex64::new(0.0, 0.0);

fn m(a: f64, b: f64, c: f64, d: f64) -> Mat2 {
    [[Complex64::new(a, 0.0), Complex64::new(b, 0.0)], [Complex64::new(c, 0.0), Complex64::new(d, 0.0)]]
}

fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut r = [[Z; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    r
}

fn identity() -> Mat2 {
    m(1.0, 0.0, 0.0, 1.0)
}

fn is_zero(a: &Mat2) -> bool {
    a.iter().flatten().all(|v| *v == Z)
}

/// Single-spin operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Identity,
    Plus,
    Minus,
    Z,
    /// `sigma^+ sigma^-`, the projector on up.
    N,
}

impl Op {
    pub fn matrix(self) -> Mat2 {
        match self {
            Op::Identity => identity(),
            Op::Plus => m(0.0, 1.0, 0.0, 0.0),
            Op::Minus => m(0.0, 0.0, 1.0, 0.0),
            Op::Z => m(0.5, 0.0, 0.0, -0.5),
            Op::N => m(1.0, 0.0, 0.0, 0.0),
        }
    }
}

/// `coef * E (x) prod_k M_k` with the electron matrix `E` and nuclear site matrices `M_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coef: Complex64,
    pub electron: Mat2,
    pub sites: BTreeMap<usize, Mat2>,
}

impl Default for Monomial {
    fn default() -> Self {
        Self { coef: Complex64::new(1.0, 0.0), electron: identity(), sites: BTreeMap::new() }
    }
}

impl Monomial {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn scaled(mut self, c: Complex64) -> Self {
        self.coef *= c;
        self
    }

    /// Right-multiplies a nuclear operator on site `i`.
    pub fn nucleus(mut self, i: usize, op: Op) -> Self {
        let cur = self.sites.remove(&i).unwrap_or_else(identity);
        self.sites.insert(i, mul(&cur, &op.matrix()));
        self
    }

    /// Right-multiplies an electron operator.
    pub fn electron(mut self, op: Op) -> Self {
        self.electron = mul(&self.electron, &op.matrix());
        self
    }

    pub fn product(&self, other: &Monomial) -> Monomial {
        let mut sites = self.sites.clone();
        for (k, b) in &other.sites {
            let a = sites.remove(k).unwrap_or_else(identity);
            sites.insert(*k, mul(&a, b));
        }
        Monomial { coef: self.coef * other.coef, electron: mul(&self.electron, &other.electron), sites }
    }

    fn vanishes(&self) -> bool {
        self.coef == Z || is_zero(&self.electron) || self.sites.values().any(is_zero)
    }

    fn same_operator(&self, other: &Monomial) -> bool {
        if self.electron != other.electron {
            return false;
        }
        let id = identity();
        let keys: std::collections::BTreeSet<_> = self.sites.keys().chain(other.sites.keys()).collect();
        keys.into_iter().all(|k| self.sites.get(k).unwrap_or(&id) == other.sites.get(k).unwrap_or(&id))
    }
}

/// Elementary operator after decomposing a 2x2 matrix as `d 1 + (a - d) n + b sigma^+ + c sigma^-`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Elem {
    N,
    Plus,
    Minus,
}

/// Product of elementary operators: at most one per slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Term {
    pub electron: Option<Elem>,
    pub sites: Vec<(usize, Elem)>,
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |e: Elem| match e {
            Elem::N => "n",
            Elem::Plus => "s+",
            Elem::Minus => "s-",
        };
        write!(f, "<")?;
        let mut first = true;
        for (k, e) in &self.sites {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            write!(f, "{}_{k}", name(*e))?;
        }
        if let Some(e) = self.electron {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{}", name(e).to_uppercase())?;
        }
        write!(f, ">")
    }
}

fn decompose(a: &Mat2) -> [(Option<Elem>, Complex64); 4] {
    [
        (None, a[1][1]),
        (Some(Elem::N), a[0][0] - a[1][1]),
        (Some(Elem::Plus), a[0][1]),
        (Some(Elem::Minus), a[1][0]),
    ]
}

/// Linear combination of elementary terms equal to a monomial.
pub fn expand(mono: &Monomial) -> Vec<(Complex64, Term)> {
    let mut out: Vec<(Complex64, Term)> = Vec::new();
    for (e, ce) in decompose(&mono.electron) {
        if ce != Z {
            out.push((mono.coef * ce, Term { electron: e, sites: Vec::new() }));
        }
    }
    for (k, mat) in &mono.sites {
        let mut next = Vec::new();
        for (c, t) in &out {
            for (e, ck) in decompose(mat) {
                if ck == Z {
                    continue;
                }
                let mut t2 = t.clone();
                if let Some(e) = e {
                    t2.sites.push((*k, e));
                }
                next.push((*c * ck, t2));
            }
        }
        out = next;
    }
    out
}

/// Parameters of the Heisenberg generator.
#[derive(Debug, Clone)]
pub struct Generator {
    pub g: f64,
    pub couplings: Vec<f64>,
    pub omega_s: f64,
    pub gamma_r: f64,
}

impl Generator {
    fn hamiltonian(&self) -> Vec<Monomial> {
        let mut h = Vec::new();
        let c = |v: f64| Complex64::new(v, 0.0);
        for (k, &gk) in self.couplings.iter().enumerate() {
            h.push(Monomial::new().nucleus(k, Op::Plus).electron(Op::Minus).scaled(c(0.5 * self.g * gk)));
            h.push(Monomial::new().nucleus(k, Op::Minus).electron(Op::Plus).scaled(c(0.5 * self.g * gk)));
            h.push(Monomial::new().nucleus(k, Op::Z).electron(Op::Z).scaled(c(self.g * gk)));
        }
        h.push(Monomial::new().electron(Op::Z).scaled(c(self.omega_s)));
        h
    }

    /// `dO/dt = i[H, O] + Gamma (S^+ O S^- - {S^+S^-, O}/2)` as monomials.
    pub fn heisenberg(&self, o: &Monomial) -> Vec<Monomial> {
        let i = Complex64::new(0.0, 1.0);
        let mut out = Vec::new();
        for h in self.hamiltonian() {
            let ho = h.product(o);
            let oh = o.product(&h);
            if ho.same_operator(&oh) && ho.coef == oh.coef {
                continue;
            }
            for (mono, sign) in [(ho, 1.0), (oh, -1.0)] {
                let mono = mono.scaled(i * sign);
                if !mono.vanishes() {
                    out.push(mono);
                }
            }
        }
        let sp = Op::Plus.matrix();
        let sm = Op::Minus.matrix();
        let ne = Op::N.matrix();
        let e = &o.electron;
        let jump = mul(&mul(&sp, e), &sm);
        let anti_l = mul(&ne, e);
        let anti_r = mul(e, &ne);
        let mut d = [[Z; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                d[a][b] = (jump[a][b] - 0.5 * (anti_l[a][b] + anti_r[a][b])) * self.gamma_r;
            }
        }
        let diss = Monomial { coef: o.coef, electron: d, sites: o.sites.clone() };
        if !diss.vanishes() {
            out.push(diss);
        }
        out
    }

    pub fn derivative(&self, o: &Monomial, oracle: &impl MomentOracle) -> Result<Complex64> {
        let mut acc = Z;
        for mono in self.heisenberg(o) {
            acc += expectation(&mono, oracle)?;
        }
        Ok(acc)
    }
}

pub fn expectation(mono: &Monomial, oracle: &impl MomentOracle) -> Result<Complex64> {
    let mut acc = Z;
    for (c, t) in expand(mono) {
        acc += c * oracle.expect(&t)?;
    }
    Ok(acc)
}

/// Supplies `<term>` for elementary terms.
pub trait MomentOracle {
    fn expect(&self, term: &Term) -> Result<Complex64>;
}

/// Exact expectations from a product-basis density matrix (bit 0 electron, bit `i + 1` nucleus `i`).
pub struct DensityOracle<'a> {
    pub rho: &'a DensityMatrix,
}

fn act(e: Elem, bit: usize, s: usize) -> Option<usize> {
    let up = s & (1 << bit) != 0;
    match (e, up) {
        (Elem::N, true) => Some(s),
        (Elem::Plus, false) => Some(s | (1 << bit)),
        (Elem::Minus, true) => Some(s & !(1 << bit)),
        _ => None,
    }
}

impl MomentOracle for DensityOracle<'_> {
    fn expect(&self, term: &Term) -> Result<Complex64> {
        let mut acc = Z;
        'basis: for s in 0..self.rho.dim {
            let mut t = s;
            if let Some(e) = term.electron {
                match act(e, 0, t) {
                    Some(v) => t = v,
                    None => continue 'basis,
                }
            }
            for &(k, e) in term.sites.iter().rev() {
                match act(e, k + 1, t) {
                    Some(v) => t = v,
                    None => continue 'basis,
                }
            }
            // tr(rho O) picks rho[s, t] for O|s> = |t>.
            acc += self.rho.get(s, t);
        }
        Ok(acc)
    }
}

/// Tracked moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tracked {
    Sz,
    Chi(usize),
    ChiConj(usize),
    GammaPlus(usize, usize),
    GammaMinus(usize, usize),
}

impl fmt::Display for Tracked {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tracked::Sz => write!(f, "s_z"),
            Tracked::Chi(i) => write!(f, "chi_{i}"),
            Tracked::ChiConj(i) => write!(f, "chi*_{i}"),
            Tracked::GammaPlus(i, j) => write!(f, "g+_{i}{j}"),
            Tracked::GammaMinus(i, j) => write!(f, "g-_{i}{j}"),
        }
    }
}

/// Sum of products of tracked moments, kept in canonical (sorted, merged) form.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Expansion {
    pub terms: Vec<(Complex64, Vec<Tracked>)>,
}

impl Expansion {
    pub fn constant(c: f64) -> Self {
        Self { terms: vec![(Complex64::new(c, 0.0), Vec::new())] }
    }

    pub fn moment(t: Tracked) -> Self {
        Self { terms: vec![(Complex64::new(1.0, 0.0), vec![t])] }
    }

    pub fn add(mut self, other: &Expansion, scale: Complex64) -> Self {
        self.terms.extend(other.terms.iter().map(|(c, p)| (*c * scale, p.clone())));
        self.canonical()
    }

    pub fn mul(&self, other: &Expansion) -> Self {
        let mut terms = Vec::new();
        for (a, pa) in &self.terms {
            for (b, pb) in &other.terms {
                let mut p = pa.clone();
                p.extend(pb.iter().copied());
                terms.push((a * b, p));
            }
        }
        Expansion { terms }.canonical()
    }

    pub fn canonical(self) -> Self {
        let mut merged: BTreeMap<Vec<Tracked>, Complex64> = BTreeMap::new();
        for (c, mut p) in self.terms {
            p.sort();
            *merged.entry(p).or_insert(Z) += c;
        }
        Expansion { terms: merged.into_iter().filter(|(_, c)| *c != Z).map(|(p, c)| (c, p)).collect() }
    }

    pub fn eval(&self, s: &CumulantState) -> Complex64 {
        self.terms
            .iter()
            .map(|(c, p)| {
                p.iter().fold(*c, |acc, t| {
                    acc * match *t {
                        Tracked::Sz => Complex64::new(s.s_z, 0.0),
                        Tracked::Chi(i) => s.chi[i],
                        Tracked::ChiConj(i) => s.chi[i].conj(),
                        Tracked::GammaPlus(i, j) => s.gp(i, j),
                        Tracked::GammaMinus(i, j) => s.gm(i, j),
                    }
                })
            })
            .sum()
    }
}

impl fmt::Display for Expansion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (c, p)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for t in p {
                write!(f, " {t}")?;
            }
        }
        Ok(())
    }
}

fn tracked_form(term: &Term) -> Option<Expansion> {
    let one = Complex64::new(1.0, 0.0);
    let half = Complex64::new(0.5, 0.0);
    let m_ij = |i, j| Expansion::moment(Tracked::GammaMinus(i, j)).add(&Expansion::moment(Tracked::GammaPlus(i, j)), half);
    let s = &term.sites;
    match (term.electron, s.as_slice()) {
        (None, []) => Some(Expansion::constant(1.0)),
        (Some(Elem::N), []) => Some(Expansion::constant(0.5).add(&Expansion::moment(Tracked::Sz), one)),
        (None, [(i, Elem::N)]) => Some(Expansion::moment(Tracked::GammaPlus(*i, *i))),
        (Some(Elem::N), [(i, Elem::N)]) => Some(m_ij(*i, *i)),
        (Some(Elem::Minus), [(i, Elem::Plus)]) => Some(Expansion::moment(Tracked::Chi(*i))),
        (Some(Elem::Plus), [(i, Elem::Minus)]) => Some(Expansion::moment(Tracked::ChiConj(*i))),
        (e, [(a, ea), (b, eb)]) if e.is_none() || e == Some(Elem::N) => {
            let (i, j) = match (ea, eb) {
                (Elem::Plus, Elem::Minus) => (*a, *b),
                (Elem::Minus, Elem::Plus) => (*b, *a),
                _ => return None,
            };
            Some(if e.is_none() { Expansion::moment(Tracked::GammaPlus(i, j)) } else { m_ij(i, j) })
        }
        _ => None,
    }
}

/// Ladder operator entering a Wick contraction.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Ladder {
    /// Nuclear operator; `split` marks halves of an expanded projector.
    Nuc { site: usize, raising: bool, split: bool },
    Electron { raising: bool },
}

fn raising(l: &Ladder) -> bool {
    match l {
        Ladder::Nuc { raising, .. } | Ladder::Electron { raising } => *raising,
    }
}

fn contraction(up: &Ladder, down: &Ladder) -> Option<Expansion> {
    match (*up, *down) {
        (Ladder::Nuc { site: a, split: sa, .. }, Ladder::Nuc { site: b, split: sb, .. }) if a == b => {
            // Only the two halves of one expanded projector share a site: <sigma^- sigma^+> = 1 - gamma+_kk.
            if sa && sb {
                Some(Expansion::constant(1.0).add(&Expansion::moment(Tracked::GammaPlus(a, a)), Complex64::new(-1.0, 0.0)))
            } else {
                None
            }
        }
        (Ladder::Nuc { site: a, .. }, Ladder::Nuc { site: b, .. }) => Some(Expansion::moment(Tracked::GammaPlus(a, b))),
        (Ladder::Nuc { site: a, .. }, Ladder::Electron { .. }) => Some(Expansion::moment(Tracked::Chi(a))),
        (Ladder::Electron { .. }, Ladder::Nuc { site: b, .. }) => Some(Expansion::moment(Tracked::ChiConj(b))),
        _ => None,
    }
}

fn wick(ops: &[Ladder]) -> Expansion {
    let ups: Vec<&Ladder> = ops.iter().filter(|l| raising(l)).collect();
    let downs: Vec<&Ladder> = ops.iter().filter(|l| !raising(l)).collect();
    fn rec(ups: &[&Ladder], downs: &mut Vec<&Ladder>) -> Expansion {
        if ups.is_empty() {
            return Expansion::constant(1.0);
        }
        let mut acc = Expansion::default();
        for k in 0..downs.len() {
            let d = downs.remove(k);
            if let Some(c) = contraction(ups[0], d) {
                let rest = rec(&ups[1..], downs);
                acc = acc.add(&c.mul(&rest), Complex64::new(1.0, 0.0));
            }
            downs.insert(k, d);
        }
        acc
    }
    let mut downs = downs;
    rec(&ups, &mut downs)
}

const MAX_LADDER: usize = 4;

/// Expresses an elementary moment through the tracked set.
///
/// Second-order moments in the tracked set are returned unchanged. Higher
/// moments are factorized with the bosonic Wick theorem between distinct
/// sites; a projector `n_k` inside a higher moment is written as
/// `1 - sigma_k^- sigma_k^+`, whose own contraction is `1 - gamma+_kk`.
pub fn factorize(term: &Term) -> Result<Expansion> {
    let charge: i32 = term
        .electron
        .iter()
        .chain(term.sites.iter().map(|(_, e)| e))
        .map(|e| match e {
            Elem::Plus => 1,
            Elem::Minus => -1,
            Elem::N => 0,
        })
        .sum();
    if charge != 0 {
        return Ok(Expansion::default());
    }
    if let Some(e) = tracked_form(term) {
        return Ok(e);
    }
    if term.electron == Some(Elem::N) {
        return Err(Error::ClosureGap(format!("{term}: electron population inside a higher-order moment")));
    }
    let projectors: Vec<usize> = term.sites.iter().filter(|(_, e)| *e == Elem::N).map(|(k, _)| *k).collect();
    let ladder_count = term.sites.len() + projectors.len() + term.electron.is_some() as usize;
    if ladder_count > MAX_LADDER {
        return Err(Error::ClosureGap(format!("{term}: more than {MAX_LADDER} ladder operators")));
    }
    let mut total = Expansion::default();
    // n_k = 1 - sigma^- sigma^+ for each projector; sum over subsets.
    for mask in 0..(1u32 << projectors.len()) {
        let mut ops = Vec::new();
        let mut sign = 1.0;
        for (k, e) in &term.sites {
            match e {
                Elem::Plus => ops.push(Ladder::Nuc { site: *k, raising: true, split: false }),
                Elem::Minus => ops.push(Ladder::Nuc { site: *k, raising: false, split: false }),
                Elem::N => {
                    let idx = projectors.iter().position(|p| p == k).unwrap();
                    if mask & (1 << idx) != 0 {
                        sign = -sign;
                        ops.push(Ladder::Nuc { site: *k, raising: false, split: true });
                        ops.push(Ladder::Nuc { site: *k, raising: true, split: true });
                    }
                }
            }
        }
        if let Some(e) = term.electron {
            ops.push(Ladder::Electron { raising: e == Elem::Plus });
        }
        total = total.add(&wick(&ops), Complex64::new(sign, 0.0));
    }
    Ok(total)
}

/// Factorizes an arbitrary product of single-spin operators.
pub fn wick_factorize_third_order(moment: &Monomial) -> Result<Expansion> {
    let mut total = Expansion::default();
    for (c, t) in expand(moment) {
        total = total.add(&factorize(&t)?, c);
    }
    Ok(total)
}

/// Closure oracle over a [`CumulantState`].
pub struct WickOracle<'a> {
    pub state: &'a CumulantState,
}

impl MomentOracle for WickOracle<'_> {
    fn expect(&self, term: &Term) -> Result<Complex64> {
        Ok(factorize(term)?.eval(self.state))
    }
}

/// Operators whose expectation values form the tracked set, in state order.
pub fn tracked_operators(n: usize) -> Vec<(Tracked, Monomial)> {
    let mut ops = vec![(Tracked::Sz, Monomial::new().electron(Op::Z))];
    for i in 0..n {
        ops.push((Tracked::Chi(i), Monomial::new().nucleus(i, Op::Plus).electron(Op::Minus)));
    }
    for i in 0..n {
        for j in 0..n {
            ops.push((Tracked::GammaPlus(i, j), Monomial::new().nucleus(i, Op::Plus).nucleus(j, Op::Minus)));
        }
    }
    for i in 0..n {
        for j in 0..n {
            let o = Monomial::new().nucleus(i, Op::Plus).nucleus(j, Op::Minus).electron(Op::Z);
            ops.push((Tracked::GammaMinus(i, j), o));
        }
    }
    ops
}

/// Slow right-hand side: Heisenberg equations of every tracked moment
/// evaluated through `oracle`. Reference for the hand-optimized solver.
pub fn reference_rhs(generator: &Generator, oracle: &impl MomentOracle) -> Result<CumulantState> {
    let n = generator.couplings.len();
    let mut d = CumulantState::zeros(n);
    for (t, o) in tracked_operators(n) {
        let v = generator.derivative(&o, oracle)?;
        match t {
            Tracked::Sz => d.s_z = v.re,
            Tracked::Chi(i) => d.chi[i] = v,
            Tracked::GammaPlus(i, j) => d.gamma_plus[i * n + j] = v,
            Tracked::GammaMinus(i, j) => d.gamma_minus[i * n + j] = v,
            Tracked::ChiConj(_) => unreachable!(),
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn worked_example() {
        // <sigma_i^+ sigma_j^z S^-> -> (gamma+_jj - 1/2) chi_i - gamma+_ij chi_j
        let (i, j) = (0, 1);
        let got = wick_factorize_third_order(&Monomial::new().nucleus(i, Op::Plus).nucleus(j, Op::Z).electron(Op::Minus)).unwrap();
        let expect = Expansion::moment(Tracked::GammaPlus(j, j))
            .mul(&Expansion::moment(Tracked::Chi(i)))
            .add(&Expansion::moment(Tracked::Chi(i)), c(-0.5))
            .add(&Expansion::moment(Tracked::GammaPlus(i, j)).mul(&Expansion::moment(Tracked::Chi(j))), c(-1.0));
        assert_eq!(got, expect, "{got}");
    }

    #[test]
    fn same_site_reduced_first() {
        // sigma^z sigma^- = -sigma^-/2 on one site.
        let got = wick_factorize_third_order(&Monomial::new().nucleus(0, Op::Plus).nucleus(1, Op::Z).nucleus(1, Op::Minus)).unwrap();
        let expect = Expansion::default().add(&Expansion::moment(Tracked::GammaPlus(0, 1)), c(-0.5));
        assert_eq!(got, expect);
    }

    #[test]
    fn second_order_unchanged() {
        let got = wick_factorize_third_order(&Monomial::new().nucleus(2, Op::Plus).nucleus(0, Op::Minus)).unwrap();
        assert_eq!(got, Expansion::moment(Tracked::GammaPlus(2, 0)));
        let got = wick_factorize_third_order(&Monomial::new().nucleus(0, Op::Plus).nucleus(0, Op::Minus)).unwrap();
        assert_eq!(got, Expansion::moment(Tracked::GammaPlus(0, 0)));
    }

    #[test]
    fn odd_charge_vanishes() {
        let got = wick_factorize_third_order(&Monomial::new().nucleus(0, Op::Plus).nucleus(1, Op::Z)).unwrap();
        assert!(got.terms.is_empty());
    }

    #[test]
    fn closure_gaps_are_reported() {
        let five = Monomial::new()
            .nucleus(0, Op::Plus)
            .nucleus(1, Op::Plus)
            .nucleus(2, Op::Minus)
            .nucleus(3, Op::Minus)
            .nucleus(4, Op::N);
        let err = wick_factorize_third_order(&five).unwrap_err();
        assert!(matches!(err, Error::ClosureGap(_)));
        assert!(err.to_string().contains("s+_0"));
        let ne = Monomial::new().nucleus(0, Op::N).nucleus(1, Op::N).electron(Op::N);
        assert!(matches!(wick_factorize_third_order(&ne), Err(Error::ClosureGap(_))));
    }

    #[test]
    fn four_point_pairs_raising_with_lowering() {
        // <s+_0 s+_1 s-_2 S-> = gamma+_02 chi_1 + gamma+_12 chi_0
        let got = wick_factorize_third_order(&Monomial::new().nucleus(0, Op::Plus).nucleus(1, Op::Plus).nucleus(2, Op::Minus).electron(Op::Minus)).unwrap();
        let expect = Expansion::moment(Tracked::GammaPlus(0, 2))
            .mul(&Expansion::moment(Tracked::Chi(1)))
            .add(&Expansion::moment(Tracked::GammaPlus(1, 2)).mul(&Expansion::moment(Tracked::Chi(0))), c(1.0));
        assert_eq!(got, expect);
    }
}
