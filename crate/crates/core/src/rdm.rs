//! Spin-orbital reduced density matrices.
//!
//! `one[(i, j)] = ⟨a†_i a_j⟩` and `two(i, j, k, l) = ⟨a†_i a†_j a_l a_k⟩`.

use nalgebra::DMatrix;

use crate::fermion::IntegralTensors;

#[derive(Debug, Clone, PartialEq)]
pub struct RdmPair {
    pub one: DMatrix<f64>,
    two: Vec<f64>,
    n: usize,
}

impl RdmPair {
    pub fn new(one: DMatrix<f64>, two: Vec<f64>) -> Self {
        let n = one.nrows();
        assert_eq!(two.len(), n.pow(4), "2-RDM size mismatch");
        RdmPair { one, two, n }
    }

    pub fn zeros(n_spin_orbitals: usize) -> Self {
        let n = n_spin_orbitals;
        RdmPair::new(DMatrix::zeros(n, n), vec![0.0; n.pow(4)])
    }

    pub fn n_spin_orbitals(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.n + j) * self.n + k) * self.n + l
    }

    #[inline]
    pub fn two(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.two[self.idx(i, j, k, l)]
    }

    pub fn set_two(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        let x = self.idx(i, j, k, l);
        self.two[x] = v;
    }

    pub fn two_raw(&self) -> &[f64] {
        &self.two
    }

    pub fn electron_count(&self) -> f64 {
        self.one.trace()
    }

    /// `¹D_ij = 1/(n−1) Σ_a ²D_{ia,ja}` with `n` the electron count.
    pub fn contract_two(&self, n_electrons: usize) -> DMatrix<f64> {
        let n = self.n;
        let scale = if n_electrons > 1 { 1.0 / (n_electrons as f64 - 1.0) } else { 0.0 };
        DMatrix::from_fn(n, n, |i, j| scale * (0..n).map(|a| self.two(i, a, j, a)).sum::<f64>())
    }

    pub fn antisymmetry_error(&self) -> f64 {
        let n = self.n;
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = self.two(i, j, k, l);
                        err = err.max((v + self.two(j, i, k, l)).abs());
                        err = err.max((v + self.two(i, j, l, k)).abs());
                    }
                }
            }
        }
        err
    }

    /// Largest violation of `¹D = ¹Dᵀ` and `²D_{ij,kl} = ²D_{kl,ij}`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.n;
        let mut err = (&self.one - self.one.transpose()).amax();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        err = err.max((self.two(i, j, k, l) - self.two(k, l, i, j)).abs());
                    }
                }
            }
        }
        err
    }

    /// Projects onto the Hermitian, antisymmetric subspace and returns the
    /// largest asymmetry that was removed.
    pub fn symmetrize(&mut self) -> f64 {
        let before = self.hermiticity_error().max(self.antisymmetry_error());
        let n = self.n;
        self.one = (&self.one + self.one.transpose()) * 0.5;
        let mut out = vec![0.0; self.two.len()];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let s = self.two(i, j, k, l) - self.two(j, i, k, l) - self.two(i, j, l, k)
                            + self.two(j, i, l, k)
                            + self.two(k, l, i, j)
                            - self.two(l, k, i, j)
                            - self.two(k, l, j, i)
                            + self.two(l, k, j, i);
                        out[self.idx(i, j, k, l)] = s / 8.0;
                    }
                }
            }
        }
        self.two = out;
        before
    }

    /// Rotates to a new orbital basis: with `r[(p, a)]` the component of new
    /// orbital `a` on old orbital `p`, `D'_ab = Σ r_pa r_qb D_pq`.
    pub fn transform(&self, r: &DMatrix<f64>) -> RdmPair {
        let n = self.n;
        assert_eq!(r.nrows(), n);
        let m = r.ncols();
        let one = r.transpose() * &self.one * r;
        // Four successive single-index contractions.
        let mut cur = self.two.clone();
        let dims = [n, n, n, n];
        let mut shape = dims;
        for axis in 0..4 {
            let mut next_shape = shape;
            next_shape[axis] = m;
            let size: usize = next_shape.iter().product();
            let mut next = vec![0.0; size];
            let stride = |s: &[usize; 4], ax: usize| s[ax + 1..].iter().product::<usize>();
            let st_old = stride(&shape, axis);
            let st_new = stride(&next_shape, axis);
            let outer: usize = shape[..axis].iter().product();
            for o in 0..outer {
                for a in 0..m {
                    for p in 0..shape[axis] {
                        let w = r[(p, a)];
                        if w == 0.0 {
                            continue;
                        }
                        let src = (o * shape[axis] + p) * st_old;
                        let dst = (o * m + a) * st_new;
                        for x in 0..st_old {
                            next[dst + x] += w * cur[src + x];
                        }
                    }
                }
            }
            cur = next;
            shape = next_shape;
        }
        RdmPair { one, two: cur, n: m }
    }

    /// `Σ h_ij ¹D_ij + ½ Σ V_ijkl ²D_{ij,kl}` expanded over spins for spatial tensors.
    pub fn energy(&self, ts: &IntegralTensors) -> f64 {
        let terms = ts.spin_orbital_terms();
        assert_eq!(terms.n_modes, self.n, "RDM and Hamiltonian sizes differ");
        let e1: f64 = terms.one_body.iter().map(|&(p, q, h)| h * self.one[(p, q)]).sum();
        // w a†p a†q a_r a_s = w ²D_{pq,sr}
        let e2: f64 = terms.two_body.iter().map(|&([p, q, r, s], w)| w * self.two(p, q, s, r)).sum();
        e1 + e2
    }

    /// Spin-summed spatial 1-RDM for interleaved spin orbitals.
    pub fn spatial_one(&self) -> DMatrix<f64> {
        let m = self.n / 2;
        DMatrix::from_fn(m, m, |i, j| self.one[(2 * i, 2 * j)] + self.one[(2 * i + 1, 2 * j + 1)])
    }
}

/// Spin-orbital version `r ⊗ I₂` of a spatial orbital rotation (interleaved spins).
pub fn spin_block(r: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = r.shape();
    DMatrix::from_fn(2 * n, 2 * m, |p, a| if p % 2 == a % 2 { r[(p / 2, a / 2)] } else { 0.0 })
}
