//! Tensor Pauli words and the real coefficient frame for n-qubit operators.
//!
//! Word index `w` has base-4 digits (first qubit most significant) selecting
//! I, X, Y, Z. A density matrix rho has coordinates `c_w = tr(rho P_w)` so the
//! identity coefficient is the trace and `rho = 2^-n sum_w c_w P_w`.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub fn sigma(i: usize) -> CMatrix {
    match i {
        0 => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ONE]),
        1 => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        2 => CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        3 => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => panic!("Pauli index out of range"),
    }
}

pub fn digits(n: usize, w: usize) -> Vec<usize> {
    (0..n).map(|q| (w >> (2 * (n - 1 - q))) & 3).collect()
}

/// Single-qubit product sigma_a sigma_b = phase * sigma_c.
fn single_product(a: usize, b: usize) -> (C64, usize) {
    if a == 0 {
        return (ONE, b);
    }
    if b == 0 || a == b {
        return (ONE, if a == b { 0 } else { a });
    }
    let c = 6 - a - b;
    // Cyclic (1,2,3) order gives +i.
    let cyclic = (a % 3) + 1 == b;
    (if cyclic { I } else { -I }, c)
}

/// Word product P_v P_w = phase * P_u.
pub fn word_product(n: usize, v: usize, w: usize) -> (C64, usize) {
    let mut phase = ONE;
    let mut u = 0;
    for q in 0..n {
        let shift = 2 * (n - 1 - q);
        let (p, c) = single_product((v >> shift) & 3, (w >> shift) & 3);
        phase *= p;
        u |= c << shift;
    }
    (phase, u)
}

#[derive(Debug, Clone)]
pub struct PauliBasis {
    n: usize,
    mats: Vec<CMatrix>,
}

impl PauliBasis {
    pub fn new(n: usize) -> Self {
        let count = 1usize << (2 * n);
        let mats = (0..count)
            .map(|w| {
                digits(n, w)
                    .into_iter()
                    .fold(CMatrix::from_element(1, 1, ONE), |acc, d| acc.kronecker(&sigma(d)))
            })
            .collect();
        Self { n, mats }
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn word(&self, w: usize) -> &CMatrix {
        &self.mats[w]
    }

    /// Real coordinates `tr(rho P_w)` of a Hermitian operator.
    pub fn coefficients(&self, rho: &CMatrix) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.mats.iter().map(|p| (rho * p).trace().re))
    }

    /// Coordinates of the pure state |psi><psi|.
    pub fn pure_coefficients(&self, psi: &DVector<C64>) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.mats.iter().map(|p| psi.dotc(&(p * psi)).re),
        )
    }

    /// The operator `2^-n sum_w c_w P_w`.
    pub fn density(&self, c: &DVector<f64>) -> CMatrix {
        let d = self.dim();
        let mut m = CMatrix::zeros(d, d);
        for (p, &cw) in self.mats.iter().zip(c.iter()) {
            if cw != 0.0 {
                m += p * C64::new(cw / d as f64, 0.0);
            }
        }
        m
    }

    /// The operator `M = sum_w e_w P_w`, so that `e · c = tr(M rho)`.
    pub fn effect_operator(&self, e: &DVector<f64>) -> CMatrix {
        let d = self.dim();
        let mut m = CMatrix::zeros(d, d);
        for (p, &ew) in self.mats.iter().zip(e.iter()) {
            if ew != 0.0 {
                m += p * C64::new(ew, 0.0);
            }
        }
        m
    }
}

/// Eigenvalues (ascending) of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMatrix::from_columns(
        &order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>(),
    );
    (vals, vecs)
}

/// Real matrix of `c -> coefficients(-i [P_v, rho(c)])`, the generator of the
/// adjoint action of `exp(-i t P_v)` up to a factor of 2 in time. Entries are
/// exactly 0 or ±2 since `[P_v, P_w] = (phi - phi') P_u`.
pub fn adjoint_generator(n: usize, v: usize) -> DMatrix<f64> {
    let k = 1usize << (2 * n);
    let mut a = DMatrix::zeros(k, k);
    for w in 0..k {
        let (p1, u) = word_product(n, v, w);
        let (p2, _) = word_product(n, w, v);
        let val = -I * (p1 - p2);
        a[(u, w)] = val.re;
    }
    a
}

/// Adjoint generators for all non-identity words: a basis of su(2^n) acting
/// on the Pauli coefficient frame.
pub fn adjoint_generators(n: usize) -> Vec<DMatrix<f64>> {
    (1..(1usize << (2 * n))).map(|v| adjoint_generator(n, v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbolic_products_match_matrices() {
        let b = PauliBasis::new(2);
        for v in 0..16 {
            for w in 0..16 {
                let (ph, u) = word_product(2, v, w);
                let lhs = b.word(v) * b.word(w);
                let rhs = b.word(u) * ph;
                assert!((lhs - rhs).camax() < 1e-14, "{v} {w}");
            }
        }
    }

    #[test]
    fn adjoint_generator_matches_commutator() {
        let n = 2;
        let b = PauliBasis::new(n);
        let c = DVector::from_fn(16, |i, _| if i == 0 { 1.0 } else { 0.1 * ((i * 7 % 5) as f64 - 2.0) });
        let rho = b.density(&c);
        for v in [1, 6, 11, 15] {
            let comm = b.word(v) * &rho - &rho * b.word(v);
            let want = b.coefficients(&(comm * (-I)));
            let got = adjoint_generator(n, v) * &c;
            assert!((want - got).amax() < 1e-13);
            let a = adjoint_generator(n, v);
            assert!((&a + a.transpose()).amax() == 0.0);
        }
    }

    #[test]
    fn density_round_trip() {
        let b = PauliBasis::new(1);
        let c = DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0]);
        let rho = b.density(&c);
        assert!((rho[(0, 0)].re - 1.0).abs() < 1e-15 && rho[(1, 1)].norm() < 1e-15);
        assert!((b.coefficients(&rho) - c).amax() < 1e-15);
    }
}
