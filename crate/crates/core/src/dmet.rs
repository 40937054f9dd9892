//! DMET self-consistency for translation-invariant Hubbard rings.
//!
//! The lattice is tiled by contiguous fragments of `fragment_size` sites; the
//! fragment starting at `fragment_offset` is solved and its results replicated.
//! A macro-iteration builds the mean field for the current correlation
//! potential `u`, embeds the fragment, tunes the chemical potential `μ` so the
//! fragment holds its share of electrons, then refits `u` to the high-level
//! fragment density.

use log::{debug, info};
use nalgebra::DMatrix;
use thiserror::Error;

use crate::ed::{self, EdError};
use crate::embedding::{
    build_basis, build_embedded_hamiltonian, core_fock, EmbeddedHamiltonian, EmbeddingError, FragmentSpec,
    DEFAULT_TOL,
};
use crate::fermion::{hubbard_tensors, Boundary, FermionError, IntegralTensors};
use crate::meanfield::{solve, sorted_eigh, MeanFieldError};
use crate::optimize::{bfgs, BfgsOptions};
use crate::rdm::RdmPair;
use crate::vqe::{mp2_guess, rotate_rdms_back, rotate_tensors, UccsdAnsatz, VqeError, VqeProblem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DmetError {
    #[error("lattice of {sites} sites cannot be tiled by fragments of {fragment} sites")]
    BadTiling { sites: usize, fragment: usize },
    #[error("no chemical potential in [{lo}, {hi}] brackets the target electron count")]
    Bracket { lo: f64, hi: f64 },
    #[error(transparent)]
    Fermion(#[from] FermionError),
    #[error(transparent)]
    MeanField(#[from] MeanFieldError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Ed(#[from] EdError),
    #[error(transparent)]
    Vqe(#[from] VqeError),
}

/// High-level solver for the embedded problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Solver {
    Ed,
    Uccsd { trotter_order: u32, trotter_steps: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmetConfig {
    pub sites: usize,
    pub hopping: f64,
    pub interaction: f64,
    pub boundary: Boundary,
    pub fragment_size: usize,
    /// First site of the solved fragment; the tiling is shifted to match.
    pub fragment_offset: usize,
    pub solver: Solver,
    pub max_macro_iter: usize,
    /// Largest change of `u` accepted as converged.
    pub u_tol: f64,
    /// Allowed deviation of the fragment electron count.
    pub count_tol: f64,
    /// Initial bracket for the chemical potential; widened on demand.
    pub mu_bracket: (f64, f64),
    pub mu_tol: f64,
    pub vqe: BfgsOptions,
    pub fit: BfgsOptions,
    pub tol_core: f64,
    pub tol_full: f64,
    /// Also solve every embedded problem exactly and record how far the VQE
    /// energy sits above it. Costly; meant for validation runs.
    pub check_variational: bool,
}

impl DmetConfig {
    /// Half-filled ring with default tolerances.
    pub fn new(sites: usize, interaction: f64, fragment_size: usize, solver: Solver) -> Self {
        DmetConfig {
            sites,
            hopping: 1.0,
            interaction,
            boundary: Boundary::AntiPeriodic,
            fragment_size,
            fragment_offset: 0,
            solver,
            max_macro_iter: 50,
            u_tol: 1e-6,
            count_tol: 1e-6,
            mu_bracket: (-1.0, 1.0),
            mu_tol: 1e-12,
            vqe: BfgsOptions::default(),
            fit: BfgsOptions {
                fd_step: 1e-6,
                f_tol: 0.0,
                ..BfgsOptions::default()
            },
            tol_core: DEFAULT_TOL,
            tol_full: DEFAULT_TOL,
            check_variational: false,
        }
    }

    pub fn n_electrons(&self) -> usize {
        self.sites
    }

    pub fn n_fragments(&self) -> usize {
        self.sites / self.fragment_size
    }

    /// Sites of tile `x`, wrapping around the ring.
    pub fn tile(&self, x: usize) -> Vec<usize> {
        let start = self.fragment_offset + x * self.fragment_size;
        (start..start + self.fragment_size).map(|s| s % self.sites).collect()
    }

    /// Electrons owed to each fragment.
    pub fn fragment_target(&self) -> f64 {
        self.n_electrons() as f64 * self.fragment_size as f64 / self.sites as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub cost: f64,
    pub fragment_electrons: f64,
    pub mu: f64,
    pub u_change: f64,
}

#[derive(Debug, Clone)]
pub struct DmetResult {
    pub energy_per_site: f64,
    /// Fragment block of the correlation potential.
    pub u: DMatrix<f64>,
    pub mu: f64,
    /// Spin-orbital RDMs of the embedded problem.
    pub rdms: RdmPair,
    pub fragment_electrons: f64,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    /// Every high-level solve met its own convergence criterion.
    pub solver_converged: bool,
    /// Energy of the last embedded problem solved at `μ*`.
    pub embedded_energy: f64,
    /// Smallest `E_VQE − E_ED` over all embedded problems, when
    /// `check_variational` is set.
    pub variational_gap: Option<f64>,
}

/// Spin-summed spatial fragment block of a spin-orbital 1-RDM.
fn fragment_block(one: &DMatrix<f64>, nf: usize) -> DMatrix<f64> {
    DMatrix::from_fn(nf, nf, |i, j| one[(2 * i, 2 * j)] + one[(2 * i + 1, 2 * j + 1)])
}

/// `Σ_x Σ_{r,s∈F} (D^x_rs − D^mf_rs)²` with `n_fragments` identical copies.
pub fn cost_function(high: &DMatrix<f64>, mf: &DMatrix<f64>, n_fragments: usize) -> f64 {
    n_fragments as f64 * (high - mf).norm_squared()
}

/// Democratic-partitioning energy of the fragment: one-body terms weighted by
/// the fraction of their two indices on the fragment, two-body terms by the
/// fraction of their four indices.
pub fn fragment_energy(emb: &EmbeddedHamiltonian, rdms: &RdmPair) -> f64 {
    let ts = &emb.tensors;
    let n = ts.n_orbitals();
    let nf = emb.n_fragment;
    let w = |p: usize| if p < nf { 1.0 } else { 0.0 };
    let mut e = 0.0;
    for p in 0..n {
        for q in 0..n {
            let g = rdms.one[(2 * p, 2 * q)] + rdms.one[(2 * p + 1, 2 * q + 1)];
            e += 0.5 * (w(p) + w(q)) * ts.h1[(p, q)] * g;
        }
    }
    for ([p, q, r, s], v) in ts.v2.iter() {
        let weight = 0.25 * (w(p) + w(q) + w(r) + w(s));
        if weight == 0.0 {
            continue;
        }
        let mut d = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                d += rdms.two(2 * p + a, 2 * q + b, 2 * r + a, 2 * s + b);
            }
        }
        e += 0.5 * weight * v * d;
    }
    e
}

/// Output of one high-level solve.
struct HighLevel {
    one: DMatrix<f64>,
    rdms: Option<RdmPair>,
    energy: f64,
    converged: bool,
}

/// Embedded problem plus what the solvers need to set it up.
struct Embedded {
    ham: EmbeddedHamiltonian,
    /// Per-spin mean-field density in the embedded basis.
    p_mf: DMatrix<f64>,
}

/// Rotates eigenvectors `v` (columns, energies `e` ascending) so that each
/// degenerate group diagonalizes `aux`. Keeps the orbitals a continuous
/// function of the Hamiltonian when symmetry forces degeneracies.
fn resolve_degenerate(e: &[f64], v: &DMatrix<f64>, aux: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = v.clone();
    let mut start = 0;
    while start < e.len() {
        let mut end = start + 1;
        while end < e.len() && (e[end] - e[start]).abs() < DEGENERACY_TOL {
            end += 1;
        }
        if end - start > 1 {
            let block = v.columns(start, end - start).into_owned();
            let (_, w) = sorted_eigh(&(block.transpose() * aux * &block));
            out.columns_mut(start, end - start).copy_from(&(&block * w));
        }
        start = end;
    }
    out
}

const DEGENERACY_TOL: f64 = 1e-8;

/// Orbitals that diagonalize the embedded Fock operator separately within the
/// occupied and virtual spaces of the projected mean-field determinant.
/// Degenerate levels are split by the weight operator `Σ_f (f + 1) |f⟩⟨f|`
/// over fragment orbitals.
fn reference_orbitals(emb: &Embedded) -> (DMatrix<f64>, Vec<f64>) {
    let ts = &emb.ham.tensors;
    let fock = &ts.h1 + core_fock(&ts.v2, &emb.p_mf);
    let (occ_w, nat) = sorted_eigh(&emb.p_mf);
    let n = nat.ncols();
    let n_occ = occ_w.iter().filter(|&&x| x > 0.5).count();
    let weight = DMatrix::from_fn(n, n, |i, j| if i == j && i < emb.ham.n_fragment { (i + 1) as f64 } else { 0.0 });
    // Natural orbitals come out ascending in occupation: virtuals first.
    let virt = nat.columns(0, n - n_occ).into_owned();
    let occ = nat.columns(n - n_occ, n_occ).into_owned();
    let mut r = DMatrix::zeros(n, n);
    let mut eps = Vec::with_capacity(n);
    let mut col = 0;
    for block in [occ, virt] {
        let f = block.transpose() * &fock * &block;
        let (e, v) = sorted_eigh(&f);
        let e: Vec<f64> = e.iter().copied().collect();
        let aux = block.transpose() * &weight * &block;
        let rot = &block * resolve_degenerate(&e, &v, &aux);
        for (k, &ek) in e.iter().enumerate() {
            r.set_column(col, &rot.column(k));
            eps.push(ek);
            col += 1;
        }
    }
    (r, eps)
}

struct SolverState {
    warm: Option<Vec<f64>>,
    min_gap: Option<f64>,
}

fn solve_high_level(
    cfg: &DmetConfig,
    emb: &Embedded,
    mu: f64,
    want_rdms: bool,
    state: &mut SolverState,
) -> Result<HighLevel, DmetError> {
    let ts = emb.ham.with_chemical_potential(mu);
    let n_el = emb.ham.n_electrons;
    match cfg.solver {
        Solver::Ed => {
            let sol = ed::ground_state(&ts, n_el, 0)?;
            let rdms = want_rdms.then(|| sol.rdms());
            let one = rdms.as_ref().map(|r| r.one.clone()).unwrap_or_else(|| sol.one_rdm());
            Ok(HighLevel {
                one,
                rdms,
                energy: sol.energy,
                converged: true,
            })
        }
        Solver::Uccsd {
            trotter_order,
            trotter_steps,
        } => {
            let (r, eps) = reference_orbitals(emb);
            let mo = rotate_tensors(&ts, &r);
            let ansatz = UccsdAnsatz::new(ts.n_orbitals(), n_el, trotter_order, trotter_steps)?;
            let problem = VqeProblem::new(&mo, 0.0, &ansatz)?;
            let guess = mp2_guess(&mo, &eps, &ansatz);
            let mut best = problem.minimize(&guess, &cfg.vqe)?;
            if let Some(w) = state.warm.as_ref().filter(|w| w.len() == guess.len()) {
                let alt = problem.minimize(w, &cfg.vqe)?;
                if alt.energy < best.energy {
                    best = alt;
                }
            }
            state.warm = Some(best.theta.clone());
            if cfg.check_variational {
                let exact = ed::ground_state(&ts, n_el, 0)?.energy;
                let gap = best.energy - exact;
                state.min_gap = Some(state.min_gap.map_or(gap, |g| g.min(gap)));
            }
            let rdms = rotate_rdms_back(&best.rdms, &r);
            Ok(HighLevel {
                one: rdms.one.clone(),
                rdms: Some(rdms),
                energy: best.energy,
                converged: best.converged,
            })
        }
    }
}

/// Brent root search for `f` on a sign-changing bracket.
fn brent<F>(mut f: F, mut a: f64, mut fa: f64, mut b: f64, mut fb: f64, ftol: f64, xtol: f64) -> Result<f64, DmetError>
where
    F: FnMut(f64) -> Result<f64, DmetError>,
{
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut bisected = true;
    for _ in 0..200 {
        if fb.abs() < ftol || (b - a).abs() < xtol {
            return Ok(b);
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc)) + b * fa * fc / ((fb - fa) * (fb - fc)) + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let q = (3.0 * a + b) / 4.0;
        let outside = !((s > q.min(b)) && (s < q.max(b)));
        if outside
            || (bisected && (s - b).abs() >= (b - c).abs() / 2.0)
            || (!bisected && (s - b).abs() >= (c - d).abs() / 2.0)
        {
            s = 0.5 * (a + b);
            bisected = true;
        } else {
            bisected = false;
        }
        let fs = f(s)?;
        d = c;
        c = b;
        fc = fb;
        if fa * fs < 0.0 {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Ok(b)
}

/// Finds `μ` such that the fragment holds its share of electrons. Returns `μ`
/// and the fragment electron count there.
fn chemical_potential_search(
    cfg: &DmetConfig,
    emb: &Embedded,
    center: f64,
    state: &mut SolverState,
) -> Result<(f64, f64), DmetError> {
    let target = cfg.fragment_target();
    let nf = cfg.fragment_size;
    let excess = |mu: f64, state: &mut SolverState| -> Result<f64, DmetError> {
        let hl = solve_high_level(cfg, emb, mu, false, state)?;
        let n = fragment_block(&hl.one, nf).trace();
        debug!("mu = {mu:.10}: fragment electrons {n:.10}");
        Ok(n - target)
    };
    let f0 = excess(center, state)?;
    if f0.abs() < cfg.count_tol {
        return Ok((center, f0 + target));
    }
    let (lo0, hi0) = cfg.mu_bracket;
    let mut width = (hi0 - lo0).abs().max(1e-3);
    // The count rises with μ; step away from the center until the sign flips.
    let dir = if f0 < 0.0 { 1.0 } else { -1.0 };
    let (mut a, mut fa) = (center, f0);
    for _ in 0..30 {
        let b = a + dir * width;
        let fb = excess(b, state)?;
        if fb.abs() < cfg.count_tol {
            return Ok((b, fb + target));
        }
        if fa * fb < 0.0 {
            let mu = brent(|m| excess(m, state), a, fa, b, fb, cfg.count_tol, cfg.mu_tol)?;
            let n = excess(mu, state)? + target;
            return Ok((mu, n));
        }
        a = b;
        fa = fb;
        width *= 2.0;
    }
    Err(DmetError::Bracket {
        lo: center.min(a),
        hi: center.max(a),
    })
}

/// Symmetric fragment block from its upper triangle.
fn unpack_u(params: &[f64], nf: usize) -> DMatrix<f64> {
    let mut u = DMatrix::zeros(nf, nf);
    let mut k = 0;
    for i in 0..nf {
        for j in i..nf {
            u[(i, j)] = params[k];
            u[(j, i)] = params[k];
            k += 1;
        }
    }
    u
}

fn pack_u(u: &DMatrix<f64>) -> Vec<f64> {
    let nf = u.nrows();
    (0..nf).flat_map(|i| (i..nf).map(move |j| (i, j))).map(|(i, j)| u[(i, j)]).collect()
}

/// Block-diagonal replication of the fragment potential over the tiling.
pub fn replicate(u: &DMatrix<f64>, cfg: &DmetConfig) -> DMatrix<f64> {
    let mut full = DMatrix::zeros(cfg.sites, cfg.sites);
    for x in 0..cfg.n_fragments() {
        let sites = cfg.tile(x);
        for (a, &i) in sites.iter().enumerate() {
            for (b, &j) in sites.iter().enumerate() {
                full[(i, j)] = u[(a, b)];
            }
        }
    }
    full
}

/// Spin-summed fragment block of the lattice mean-field density under `u`.
pub fn mf_fragment_density(h: &DMatrix<f64>, u: &DMatrix<f64>, cfg: &DmetConfig) -> Result<DMatrix<f64>, DmetError> {
    let sol = solve(&(h + replicate(u, cfg)), cfg.n_electrons())?;
    let sites = cfg.tile(0);
    Ok(sol.one_rdm.select_rows(&sites).select_columns(&sites) * 2.0)
}

/// Minimizes the fragment density mismatch over `u`, starting from `u0`.
pub fn fit_potential(
    cfg: &DmetConfig,
    h: &DMatrix<f64>,
    high: &DMatrix<f64>,
    u0: &DMatrix<f64>,
) -> (DMatrix<f64>, f64) {
    let nf = cfg.fragment_size;
    let cost = |p: &[f64]| match mf_fragment_density(h, &unpack_u(p, nf), cfg) {
        Ok(d) => cost_function(high, &d, cfg.n_fragments()),
        Err(_) => f64::INFINITY,
    };
    let r = bfgs(&cost, &pack_u(u0), &cfg.fit);
    (unpack_u(&r.x, nf), r.f)
}

fn embed(cfg: &DmetConfig, ts: &IntegralTensors, u: &DMatrix<f64>) -> Result<Embedded, DmetError> {
    let frag = FragmentSpec::new(cfg.tile(0), cfg.sites)?;
    let sol = solve(&(&ts.h1 + replicate(u, cfg)), cfg.n_electrons())?;
    let basis = build_basis(&sol, &frag, cfg.tol_core, cfg.tol_full)?;
    let ham = build_embedded_hamiltonian(ts, &basis, cfg.n_electrons());
    let p_mf = basis.c.transpose() * &sol.one_rdm * &basis.c;
    Ok(Embedded { ham, p_mf })
}

/// Runs the full self-consistency loop.
pub fn run(cfg: &DmetConfig) -> Result<DmetResult, DmetError> {
    if cfg.fragment_size == 0 || !cfg.sites.is_multiple_of(cfg.fragment_size) {
        return Err(DmetError::BadTiling {
            sites: cfg.sites,
            fragment: cfg.fragment_size,
        });
    }
    let ts = hubbard_tensors(cfg.sites, cfg.hopping, cfg.interaction, cfg.boundary)?;
    let nf = cfg.fragment_size;
    let mut u = DMatrix::zeros(nf, nf);
    let mut mu = 0.5 * (cfg.mu_bracket.0 + cfg.mu_bracket.1);
    let mut history = Vec::new();
    let mut state = SolverState {
        warm: None,
        min_gap: None,
    };
    let mut converged = false;

    for iter in 0..cfg.max_macro_iter.max(1) {
        let emb = embed(cfg, &ts, &u)?;
        let (mu_new, count) = chemical_potential_search(cfg, &emb, mu, &mut state)?;
        mu = mu_new;
        let hl = solve_high_level(cfg, &emb, mu, true, &mut state)?;
        let high = fragment_block(&hl.one, nf);
        let mf = mf_fragment_density(&ts.h1, &u, cfg)?;
        let cost = cost_function(&high, &mf, cfg.n_fragments());

        // A single-site potential is a uniform shift that leaves the
        // determinant unchanged, so only μ needs matching.
        let (u_next, u_change) = if nf == 1 {
            (u.clone(), 0.0)
        } else {
            let (u_fit, _) = fit_potential(cfg, &ts.h1, &high, &u);
            let change = (&u_fit - &u).amax();
            (u_fit, change)
        };
        history.push(IterationRecord {
            cost,
            fragment_electrons: count,
            mu,
            u_change,
        });
        info!("macro-iteration {iter}: mu = {mu:.8}, CF = {cost:.3e}, du = {u_change:.3e}");

        if u_change < cfg.u_tol {
            converged = (count - cfg.fragment_target()).abs() < cfg.count_tol;
            let rdms = hl.rdms.expect("RDMs requested");
            let e_frag = fragment_energy(&emb.ham, &rdms);
            return Ok(DmetResult {
                energy_per_site: e_frag / nf as f64,
                u,
                mu,
                rdms,
                fragment_electrons: count,
                history,
                converged,
                solver_converged: hl.converged,
                embedded_energy: hl.energy,
                variational_gap: state.min_gap,
            });
        }
        u = u_next;
    }

    // Not converged: report the last iterate.
    let emb = embed(cfg, &ts, &u)?;
    let (mu, count) = chemical_potential_search(cfg, &emb, mu, &mut state)?;
    let hl = solve_high_level(cfg, &emb, mu, true, &mut state)?;
    let rdms = hl.rdms.expect("RDMs requested");
    Ok(DmetResult {
        energy_per_site: fragment_energy(&emb.ham, &rdms) / nf as f64,
        u,
        mu,
        rdms,
        fragment_electrons: count,
        history,
        converged,
        solver_converged: hl.converged,
        embedded_energy: hl.energy,
        variational_gap: state.min_gap,
    })
}
