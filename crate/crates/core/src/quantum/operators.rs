//! Collective spin ladder, truncated Fock space and the system Hamiltonian.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// `(Jz, J₊, J₋)` for spin `j`, in the basis `m = j, j−1, …, −j`.
pub fn spin_matrices(j: f64) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let two_j = 2.0 * j;
    if !(j >= 0.0 && two_j.fract() == 0.0 && two_j <= 4096.0) {
        return Err(Error::invalid("j", format!("must be a non-negative half-integer, got {j}")));
    }
    let d = two_j as usize + 1;
    let m = |k: usize| j - k as f64;
    let jz = DMatrix::from_fn(d, d, |r, c| if r == c { m(r) } else { 0.0 });
    // J₊|m⟩ = √(j(j+1) − m(m+1)) |m+1⟩ and |m+1⟩ sits one row above |m⟩
    let jp = DMatrix::from_fn(d, d, |r, c| {
        if r + 1 == c {
            let mc = m(c);
            (j * (j + 1.0) - mc * (mc + 1.0)).sqrt()
        } else {
            0.0
        }
    });
    let jm = jp.transpose();
    Ok((jz, jp, jm))
}

pub const MAX_ATOMS: u32 = 8;
pub const MIN_FOCK: u32 = 4;
pub const MAX_DIM: usize = 2048;

/// Maximal spin multiplet `J = N` of `N` spin-1 atoms times Fock states
/// `0..=n_max`. Basis index is spin-major: `(N − m)(n_max + 1) + n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HilbertSpec {
    pub n_atoms: u32,
    pub n_max: u32,
}

impl HilbertSpec {
    pub fn new(n_atoms: u32, n_max: u32) -> Result<Self> {
        let s = HilbertSpec { n_atoms, n_max };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_ATOMS).contains(&self.n_atoms) {
            return Err(Error::invalid("n_atoms", format!("must lie in 1..={MAX_ATOMS}, got {}", self.n_atoms)));
        }
        if self.n_max < MIN_FOCK {
            return Err(Error::invalid("n_max", format!("must be at least {MIN_FOCK}, got {}", self.n_max)));
        }
        let dim = self.spin_dim() * self.fock_dim();
        if dim > MAX_DIM {
            return Err(Error::DimensionOverflow { dim, max: MAX_DIM });
        }
        Ok(())
    }

    pub fn spin(&self) -> f64 {
        self.n_atoms as f64
    }

    pub fn spin_dim(&self) -> usize {
        2 * self.n_atoms as usize + 1
    }

    pub fn fock_dim(&self) -> usize {
        self.n_max as usize + 1
    }

    pub fn dim(&self) -> usize {
        self.spin_dim() * self.fock_dim()
    }

    pub fn index(&self, m: i32, n: u32) -> usize {
        debug_assert!(m.unsigned_abs() <= self.n_atoms && n <= self.n_max);
        (self.n_atoms as i32 - m) as usize * self.fock_dim() + n as usize
    }

    /// `(m, n)` of a basis index.
    pub fn decode(&self, idx: usize) -> (i32, u32) {
        let f = self.fock_dim();
        (self.n_atoms as i32 - (idx / f) as i32, (idx % f) as u32)
    }
}

/// Real square matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Duplicates are summed and exact zeros dropped.
    pub fn from_triplets(dim: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; dim + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last = None;
        for (r, c, v) in entries {
            assert!(r < dim && c < dim, "entry ({r}, {c}) outside {dim}×{dim}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut m = SparseMatrix { dim, row_ptr, cols, vals };
        m.drop_zeros();
        m
    }

    fn drop_zeros(&mut self) {
        let mut row_ptr = vec![0; self.dim + 1];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr[r + 1] = cols.len();
        }
        *self = SparseMatrix { dim: self.dim, row_ptr, cols, vals };
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Largest `|A_rc − A_cr|`.
    pub fn asymmetry(&self) -> f64 {
        let d = self.to_dense();
        (&d - d.transpose()).amax()
    }
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Truncated annihilation operator on the Fock factor: `a|n⟩ = √n |n−1⟩`.
pub fn annihilation(n_max: u32) -> DMatrix<f64> {
    let f = n_max as usize + 1;
    DMatrix::from_fn(f, f, |r, c| if r + 1 == c { (c as f64).sqrt() } else { 0.0 })
}

/// Operators on the full space, as dense matrices (for checks and small N).
pub struct FullOperators {
    pub a: DMatrix<f64>,
    pub n: DMatrix<f64>,
    pub jz: DMatrix<f64>,
    pub jp: DMatrix<f64>,
    pub jm: DMatrix<f64>,
}

pub fn full_operators(spec: &HilbertSpec) -> Result<FullOperators> {
    spec.validate()?;
    let (jz, jp, jm) = spin_matrices(spec.spin())?;
    let a = annihilation(spec.n_max);
    let is = DMatrix::identity(spec.spin_dim(), spec.spin_dim());
    let ib = DMatrix::identity(spec.fock_dim(), spec.fock_dim());
    let n = a.transpose() * &a;
    Ok(FullOperators {
        a: kron(&is, &a),
        n: kron(&is, &n),
        jz: kron(&jz, &ib),
        jp: kron(&jp, &ib),
        jm: kron(&jm, &ib),
    })
}

/// `H = ω a†a + ω₀ Jz + λ₋/√(2N) (a J₊ + a† J₋) + λ₊/√(2N) (a J₋ + a† J₊)`.
pub fn build_hamiltonian(m: &ModelParams, spec: &HilbertSpec) -> Result<SparseMatrix> {
    spec.validate()?;
    m.validate()?;
    let big_j = spec.spin();
    let scale = 1.0 / (2.0 * big_j).sqrt();
    let (gm, gp) = (m.lambda_minus * scale, m.lambda_plus * scale);
    let up = |mm: i32| {
        let mf = mm as f64;
        (big_j * (big_j + 1.0) - mf * (mf + 1.0)).sqrt()
    };
    let n_atoms = spec.n_atoms as i32;
    let mut entries = Vec::new();
    for idx in 0..spec.dim() {
        let (mm, n) = spec.decode(idx);
        entries.push((idx, idx, m.omega * n as f64 + m.omega0 * mm as f64));
        if n == 0 {
            continue;
        }
        let sn = (n as f64).sqrt();
        // a J₊ : |m, n⟩ → |m+1, n−1⟩, plus its adjoint a† J₋
        if mm < n_atoms {
            let to = spec.index(mm + 1, n - 1);
            let v = gm * sn * up(mm);
            entries.push((to, idx, v));
            entries.push((idx, to, v));
        }
        // a J₋ : |m, n⟩ → |m−1, n−1⟩, plus its adjoint a† J₊
        if mm > -n_atoms {
            let to = spec.index(mm - 1, n - 1);
            let v = gp * sn * up(mm - 1);
            entries.push((to, idx, v));
            entries.push((idx, to, v));
        }
    }
    Ok(SparseMatrix::from_triplets(spec.dim(), entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spin_half_is_pauli_over_two() {
        let (jz, jp, jm) = spin_matrices(0.5).unwrap();
        assert_eq!(jz, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, -0.5]));
        assert_eq!(jp, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        assert_eq!(jm, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn spin_one_ladder() {
        let (jz, jp, _) = spin_matrices(1.0).unwrap();
        let r2 = 2f64.sqrt();
        assert_eq!(jp, DMatrix::from_row_slice(3, 3, &[0.0, r2, 0.0, 0.0, 0.0, r2, 0.0, 0.0, 0.0]));
        assert_eq!(jz.diagonal().as_slice(), &[1.0, 0.0, -1.0]);
    }

    #[test]
    fn ladder_commutator() {
        for two_j in 0..=16 {
            let (jz, jp, jm) = spin_matrices(two_j as f64 / 2.0).unwrap();
            let c = &jp * &jm - &jm * &jp;
            assert!((c - 2.0 * jz).amax() < 1e-13, "2j = {two_j}");
        }
        for bad in [-0.5, 0.3, f64::NAN] {
            assert!(spin_matrices(bad).is_err());
        }
    }

    #[test]
    fn spec_limits() {
        assert!(HilbertSpec::new(0, 10).is_err());
        assert!(HilbertSpec::new(9, 10).is_err());
        assert!(HilbertSpec::new(1, 3).is_err());
        assert!(matches!(HilbertSpec::new(8, 200), Err(Error::DimensionOverflow { .. })));
        let s = HilbertSpec::new(3, 6).unwrap();
        assert_eq!(s.dim(), 49);
        assert_eq!(s.index(3, 0), 0);
        assert_eq!(s.index(-3, 6), 48);
        for i in 0..s.dim() {
            let (m, n) = s.decode(i);
            assert_eq!(s.index(m, n), i);
        }
    }

    fn params(lp: f64, lm: f64) -> ModelParams {
        ModelParams::from_khz(100.0, -77.0, lp, lm, 100.0).unwrap()
    }

    #[test]
    fn uncoupled_hamiltonian_is_diagonal() {
        let spec = HilbertSpec::new(2, 5).unwrap();
        let m = params(0.0, 0.0);
        let h = build_hamiltonian(&m, &spec).unwrap();
        assert_eq!(h.nnz(), spec.dim() - 1); // |m=0, n=0⟩ has zero energy
        for idx in 0..spec.dim() {
            let (mm, n) = spec.decode(idx);
            let d = h.to_dense()[(idx, idx)];
            assert!((d - (m.omega * n as f64 + m.omega0 * mm as f64)).abs() < 1e-9);
        }
    }

    #[test]
    fn hamiltonian_matches_operator_products() {
        let spec = HilbertSpec::new(3, 6).unwrap();
        let m = params(40.0, 90.0);
        let op = full_operators(&spec).unwrap();
        let ad = op.a.transpose();
        let s = 1.0 / (6.0f64).sqrt();
        let dense = m.omega * &op.n
            + m.omega0 * &op.jz
            + m.lambda_minus * s * (&op.a * &op.jp + &ad * &op.jm)
            + m.lambda_plus * s * (&op.a * &op.jm + &ad * &op.jp);
        let h = build_hamiltonian(&m, &spec).unwrap();
        assert!((h.to_dense() - &dense).amax() < 1e-9 * dense.amax());
        assert_eq!(h.asymmetry(), 0.0);
    }

    #[test]
    fn single_coupling_conserved_combinations() {
        let spec = HilbertSpec::new(4, 10).unwrap();
        let op = full_operators(&spec).unwrap();
        for (lp, lm, sign) in [(70.0, 0.0, -1.0), (0.0, 70.0, 1.0)] {
            let h = build_hamiltonian(&params(lp, lm), &spec).unwrap().to_dense();
            let q = &op.n + sign * &op.jz;
            let c = &h * &q - &q * &h;
            assert!(c.amax() <= 1e-12 * h.amax(), "{lp} {lm}: {}", c.amax() / h.amax());
        }
        let both = build_hamiltonian(&params(70.0, 70.0), &spec).unwrap().to_dense();
        let q = &op.n - &op.jz;
        assert!((&both * &q - &q * &both).amax() > 1e-3 * both.amax());
    }
}
