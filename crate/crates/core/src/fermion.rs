//! Fermionic operator sums and one-/two-body integral tensors.
//!
//! Integral convention: `h1[i][j]` multiplies `a†_i a_j` and `v2[ij,kl]`
//! multiplies `½ a†_i a†_j a_l a_k`. In a spatial basis every index carries an
//! implicit spin label, expanded as `(iσ, jσ'; kσ, lσ')`. Spin-orbital `p = 2·i + σ`
//! (σ = 0 for α, 1 for β), so the two spins of a site sit on adjacent qubits.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FermionError {
    #[error("lattice needs at least 2 sites, got {0}")]
    TooFewSites(usize),
    #[error("hopping must be non-negative, got {0}")]
    NegativeHopping(f64),
    #[error("dimension mismatch: expected {expected}x{expected}, got {rows}x{cols}")]
    DimensionMismatch {
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error("tensors are not translation invariant: {0}")]
    NotTranslationInvariant(String),
}

/// A product of ladder operators, kept in exactly the order given.
#[derive(Debug, Clone, PartialEq)]
pub struct FermionTerm {
    coefficient: Complex64,
    ops: Vec<(usize, bool)>,
}

impl FermionTerm {
    /// `ops` are `(spin-orbital, is_creation)` pairs, leftmost acting last.
    pub fn new(coefficient: Complex64, ops: Vec<(usize, bool)>) -> Self {
        FermionTerm { coefficient, ops }
    }

    pub fn coefficient(&self) -> Complex64 {
        self.coefficient
    }

    pub fn ops(&self) -> &[(usize, bool)] {
        &self.ops
    }

    pub fn adjoint(&self) -> FermionTerm {
        FermionTerm {
            coefficient: self.coefficient.conj(),
            ops: self.ops.iter().rev().map(|&(p, c)| (p, !c)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FermionSum {
    terms: Vec<FermionTerm>,
}

impl FermionSum {
    pub fn zero() -> Self {
        FermionSum { terms: Vec::new() }
    }

    pub fn from_terms(terms: Vec<FermionTerm>) -> Self {
        FermionSum { terms }
    }

    pub fn terms(&self) -> &[FermionTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn push(&mut self, term: FermionTerm) {
        self.terms.push(term);
    }

    pub fn extend(&mut self, other: FermionSum) {
        self.terms.extend(other.terms);
    }

    pub fn adjoint(&self) -> FermionSum {
        FermionSum::from_terms(self.terms.iter().map(FermionTerm::adjoint).collect())
    }

    pub fn scale(&self, s: Complex64) -> FermionSum {
        FermionSum::from_terms(
            self.terms
                .iter()
                .map(|t| FermionTerm::new(t.coefficient * s, t.ops.clone()))
                .collect(),
        )
    }

    /// Largest spin-orbital index referenced, plus one.
    pub fn n_modes(&self) -> usize {
        self.terms
            .iter()
            .flat_map(|t| t.ops.iter().map(|&(p, _)| p + 1))
            .max()
            .unwrap_or(0)
    }
}

/// Which basis the integral indices refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    SiteSpatial,
    SiteSpinOrbital,
    Momentum,
    Embedded,
}

/// Lattice boundary condition for the wrap-around bond.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    AntiPeriodic,
    Open,
}

impl std::str::FromStr for Boundary {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "periodic" | "pbc" => Ok(Boundary::Periodic),
            "anti-periodic" | "antiperiodic" | "apbc" => Ok(Boundary::AntiPeriodic),
            "open" | "obc" => Ok(Boundary::Open),
            other => Err(format!("unknown boundary `{other}`")),
        }
    }
}

/// Sparse rank-4 tensor over `n` orbitals.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBody {
    n: usize,
    entries: BTreeMap<[usize; 4], f64>,
}

impl TwoBody {
    pub fn zeros(n: usize) -> Self {
        TwoBody {
            n,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, idx: [usize; 4]) -> f64 {
        self.entries.get(&idx).copied().unwrap_or(0.0)
    }

    pub fn add(&mut self, idx: [usize; 4], value: f64) {
        debug_assert!(idx.iter().all(|&i| i < self.n));
        *self.entries.entry(idx).or_insert(0.0) += value;
    }

    /// Removes entries below `tol` in magnitude.
    pub fn prune(&mut self, tol: f64) {
        self.entries.retain(|_, v| v.abs() >= tol);
    }

    pub fn iter(&self) -> impl Iterator<Item = ([usize; 4], f64)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }

    pub fn nnz(&self) -> usize {
        self.entries.values().filter(|v| **v != 0.0).count()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.values().all(|v| *v == 0.0)
    }

    /// `(C⊗C)ᵀ V (C⊗C)` for a real `n × m` transform `C`, returned over `m` orbitals.
    pub fn transform(&self, c: &DMatrix<f64>, tol: f64) -> TwoBody {
        let m = c.ncols();
        let mut dense = vec![0.0; m * m * m * m];
        for ([i, j, k, l], v) in self.iter() {
            if v == 0.0 {
                continue;
            }
            for p in 0..m {
                let vp = v * c[(i, p)];
                if vp == 0.0 {
                    continue;
                }
                for q in 0..m {
                    let vpq = vp * c[(j, q)];
                    if vpq == 0.0 {
                        continue;
                    }
                    for r in 0..m {
                        let vpqr = vpq * c[(k, r)];
                        if vpqr == 0.0 {
                            continue;
                        }
                        let base = ((p * m + q) * m + r) * m;
                        for s in 0..m {
                            dense[base + s] += vpqr * c[(l, s)];
                        }
                    }
                }
            }
        }
        let mut out = TwoBody::zeros(m);
        for (flat, v) in dense.into_iter().enumerate() {
            if v.abs() >= tol {
                let s = flat % m;
                let r = (flat / m) % m;
                let q = (flat / (m * m)) % m;
                let p = flat / (m * m * m);
                out.entries.insert([p, q, r, s], v);
            }
        }
        out
    }

    /// Largest violation of `V_{ij,kl} = V_{kl,ij}` and `V_{ij,kl} = V_{ji,lk}`.
    pub fn symmetry_error(&self) -> f64 {
        self.iter()
            .map(|([i, j, k, l], v)| {
                let a = (v - self.get([k, l, i, j])).abs();
                let b = (v - self.get([j, i, l, k])).abs();
                a.max(b)
            })
            .fold(0.0, f64::max)
    }
}

/// Spin-orbital one- and two-body terms with the ½ folded in and equivalent
/// two-body orderings merged.
#[derive(Debug, Clone, Default)]
pub struct SpinOrbitalTerms {
    pub n_modes: usize,
    /// `(p, q, h)` for `h a†_p a_q`.
    pub one_body: Vec<(usize, usize, f64)>,
    /// `([p, q, r, s], w)` for `w a†_p a†_q a_r a_s` with `p < q` and `r > s`.
    pub two_body: Vec<([usize; 4], f64)>,
}

/// One- and two-body integrals defining a fermionic Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralTensors {
    pub h1: DMatrix<f64>,
    pub v2: TwoBody,
    pub basis: BasisKind,
}

impl IntegralTensors {
    pub fn new(h1: DMatrix<f64>, v2: TwoBody, basis: BasisKind) -> Self {
        assert_eq!(h1.nrows(), h1.ncols(), "h1 must be square");
        assert_eq!(h1.nrows(), v2.dim(), "h1 and v2 dimensions differ");
        IntegralTensors { h1, v2, basis }
    }

    pub fn n_orbitals(&self) -> usize {
        self.h1.nrows()
    }

    /// Indices carry an implicit spin label.
    pub fn is_spatial(&self) -> bool {
        self.basis != BasisKind::SiteSpinOrbital
    }

    pub fn n_spin_orbitals(&self) -> usize {
        if self.is_spatial() {
            2 * self.n_orbitals()
        } else {
            self.n_orbitals()
        }
    }

    /// Largest Hermiticity violation across `h1` and `v2`.
    pub fn hermiticity_error(&self) -> f64 {
        let h = (&self.h1 - self.h1.transpose()).amax();
        h.max(self.v2.symmetry_error())
    }

    /// Expands to spin-orbital terms. Two-body terms are brought to the
    /// ordering `a†_p a†_q a_r a_s` with `p < q`, `r > s`, which merges the
    /// spin-swapped copies of each interaction.
    pub fn spin_orbital_terms(&self) -> SpinOrbitalTerms {
        let n = self.n_orbitals();
        let spins: &[usize] = if self.is_spatial() { &[0, 1] } else { &[0] };
        let so = |i: usize, s: usize| if self.is_spatial() { 2 * i + s } else { i };

        let mut one = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let h = self.h1[(i, j)];
                if h != 0.0 {
                    for &s in spins {
                        one.push((so(i, s), so(j, s), h));
                    }
                }
            }
        }

        let mut two: BTreeMap<[usize; 4], f64> = BTreeMap::new();
        for ([i, j, k, l], v) in self.v2.iter() {
            if v == 0.0 {
                continue;
            }
            for &s in spins {
                for &t in spins {
                    // ½ v a†_{is} a†_{jt} a_{lt} a_{ks}
                    let (mut p, mut q, mut r, mut w) = (so(i, s), so(j, t), so(l, t), so(k, s));
                    if p == q || r == w {
                        continue;
                    }
                    let mut sign = 0.5;
                    if p > q {
                        std::mem::swap(&mut p, &mut q);
                        sign = -sign;
                    }
                    if r < w {
                        std::mem::swap(&mut r, &mut w);
                        sign = -sign;
                    }
                    *two.entry([p, q, r, w]).or_insert(0.0) += sign * v;
                }
            }
        }
        SpinOrbitalTerms {
            n_modes: self.n_spin_orbitals(),
            one_body: one,
            two_body: two.into_iter().filter(|(_, v)| v.abs() > 1e-15).collect(),
        }
    }
}

/// Nearest-neighbour Hubbard chain in the spatial site basis.
///
/// The wrap-around bond `(L−1, 0)` carries `−t` (periodic), `+t`
/// (anti-periodic) or nothing (open). For `L = 2` the wrap bond coincides with
/// the inner bond and the contributions add.
pub fn hubbard_tensors(
    sites: usize,
    t: f64,
    u: f64,
    boundary: Boundary,
) -> Result<IntegralTensors, FermionError> {
    if sites < 2 {
        return Err(FermionError::TooFewSites(sites));
    }
    if t < 0.0 {
        return Err(FermionError::NegativeHopping(t));
    }
    let mut h1 = DMatrix::zeros(sites, sites);
    for i in 0..sites - 1 {
        h1[(i, i + 1)] -= t;
        h1[(i + 1, i)] -= t;
    }
    let wrap = match boundary {
        Boundary::Periodic => Some(-t),
        Boundary::AntiPeriodic => Some(t),
        Boundary::Open => None,
    };
    if let Some(w) = wrap {
        h1[(sites - 1, 0)] += w;
        h1[(0, sites - 1)] += w;
    }
    let mut v2 = TwoBody::zeros(sites);
    if u != 0.0 {
        for i in 0..sites {
            v2.add([i, i, i, i], u);
        }
    }
    Ok(IntegralTensors::new(h1, v2, BasisKind::SiteSpatial))
}

/// Literal second-quantized expansion of the tensors.
pub fn tensors_to_fermion_sum(ts: &IntegralTensors) -> FermionSum {
    let terms = ts.spin_orbital_terms();
    let mut out = FermionSum::zero();
    for (p, q, h) in terms.one_body {
        out.push(FermionTerm::new(h.into(), vec![(p, true), (q, false)]));
    }
    for ([p, q, r, s], w) in terms.two_body {
        out.push(FermionTerm::new(
            w.into(),
            vec![(p, true), (q, true), (r, false), (s, false)],
        ));
    }
    out
}

/// Adds a one-body potential to `h1`.
pub fn add_potential(ts: &IntegralTensors, u: &DMatrix<f64>) -> Result<IntegralTensors, FermionError> {
    let n = ts.n_orbitals();
    if u.nrows() != n || u.ncols() != n {
        return Err(FermionError::DimensionMismatch {
            expected: n,
            rows: u.nrows(),
            cols: u.ncols(),
        });
    }
    Ok(IntegralTensors {
        h1: &ts.h1 + u,
        v2: ts.v2.clone(),
        basis: ts.basis,
    })
}

/// Plane-wave orbitals of a twisted ring, ordered by band energy.
#[derive(Debug, Clone)]
pub struct MomentumOrbitals {
    /// Crystal momentum of each orbital, in `(−π, π]`.
    pub momenta: Vec<f64>,
    /// Column `a` holds `e^{i k_a μ}/√L` over sites μ.
    pub vectors: DMatrix<Complex64>,
}

fn wrap_momentum(k: f64) -> f64 {
    let mut k = k % (2.0 * PI);
    if k > PI + 1e-12 {
        k -= 2.0 * PI;
    }
    if k <= -PI + 1e-12 {
        k += 2.0 * PI;
    }
    k
}

fn plane_waves(sites: usize, twist: f64) -> (Vec<f64>, DMatrix<Complex64>) {
    let norm = 1.0 / (sites as f64).sqrt();
    let momenta: Vec<f64> = (0..sites)
        .map(|n| wrap_momentum((2.0 * PI * n as f64 + twist) / sites as f64))
        .collect();
    let vectors = DMatrix::from_fn(sites, sites, |mu, a| {
        Complex64::from_polar(norm, momenta[a] * mu as f64)
    });
    (momenta, vectors)
}

/// Fourier transform of a translation-invariant ring Hamiltonian.
///
/// Periodic and anti-periodic twists are both tried; the one that diagonalizes
/// `h1` is used. Orbitals are sorted by energy, ties broken by momentum.
pub fn momentum_transform(ts: &IntegralTensors) -> Result<(IntegralTensors, MomentumOrbitals), FermionError> {
    const TOL: f64 = 1e-10;
    if ts.basis != BasisKind::SiteSpatial {
        return Err(FermionError::NotTranslationInvariant(
            "input must be in the spatial site basis".into(),
        ));
    }
    let n = ts.n_orbitals();
    let h1c = ts.h1.map(|x| Complex64::new(x, 0.0));
    let candidate = [0.0, PI].into_iter().find_map(|twist| {
        let (momenta, vecs) = plane_waves(n, twist);
        let hk = vecs.adjoint() * &h1c * &vecs;
        let off = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .filter(|(a, b)| a != b)
            .map(|(a, b)| hk[(a, b)].norm())
            .fold(0.0, f64::max);
        let imag = (0..n).map(|a| hk[(a, a)].im.abs()).fold(0.0, f64::max);
        (off < TOL && imag < TOL).then_some((momenta, vecs, hk))
    });
    let Some((momenta, vecs, hk)) = candidate else {
        return Err(FermionError::NotTranslationInvariant(
            "h1 is not diagonal in any plane-wave basis".into(),
        ));
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (hk[(a, a)].re, hk[(b, b)].re);
        if (ea - eb).abs() > 1e-9 {
            ea.total_cmp(&eb)
        } else {
            momenta[a].total_cmp(&momenta[b])
        }
    });
    let momenta: Vec<f64> = order.iter().map(|&a| momenta[a]).collect();
    let vectors = DMatrix::from_fn(n, n, |mu, a| vecs[(mu, order[a])]);
    let h1 = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        order.iter().map(|&a| hk[(a, a)].re),
    ));

    // V'_{ab,cd} = Σ V_{ij,kl} φa(i)* φb(j)* φc(k) φd(l)
    let mut dense = vec![Complex64::new(0.0, 0.0); n * n * n * n];
    for ([i, j, k, l], v) in ts.v2.iter() {
        for a in 0..n {
            let fa = vectors[(i, a)].conj() * v;
            for b in 0..n {
                let fab = fa * vectors[(j, b)].conj();
                for c in 0..n {
                    let fabc = fab * vectors[(k, c)];
                    let base = ((a * n + b) * n + c) * n;
                    for d in 0..n {
                        dense[base + d] += fabc * vectors[(l, d)];
                    }
                }
            }
        }
    }
    let mut v2 = TwoBody::zeros(n);
    for (flat, v) in dense.into_iter().enumerate() {
        if v.norm() < TOL {
            continue;
        }
        let d = flat % n;
        let c = (flat / n) % n;
        let b = (flat / (n * n)) % n;
        let a = flat / (n * n * n);
        let dk = momenta[a] + momenta[b] - momenta[c] - momenta[d];
        if wrap_momentum(dk).abs() > 1e-8 {
            return Err(FermionError::NotTranslationInvariant(format!(
                "two-body element ({a},{b},{c},{d}) violates momentum conservation"
            )));
        }
        if v.im.abs() > TOL {
            return Err(FermionError::NotTranslationInvariant(format!(
                "two-body element ({a},{b},{c},{d}) is complex"
            )));
        }
        v2.add([a, b, c, d], v.re);
    }
    Ok((
        IntegralTensors::new(h1, v2, BasisKind::Momentum),
        MomentumOrbitals { momenta, vectors },
    ))
}
