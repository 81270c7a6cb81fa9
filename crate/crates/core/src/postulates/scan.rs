//! Bipartite interaction scan.
//!
//! Candidate generators `H` of two-gbit reversible dynamics act on
//! `R^{(d+1)^2}`. A one-parameter group `exp(tH)` keeps every product
//! probability `(E_A ⊗ E_B)(G (ω_A ⊗ ω_B))` inside [0, 1]; wherever such a
//! probability already sits at 0 or 1 its first derivative must vanish. Those
//! tangency conditions, sampled over pure product states, give a linear
//! system whose null space `V` contains the Lie algebra of every consistent
//! group. The first-order space is then refined: `V` splits into isotypic
//! blocks under the local algebra, and an irreducible block can only belong to
//! the algebra if it closes under commutators inside `V` and generates
//! bounded flows. Both the first-order and the refined dimension are upper
//! bounds on the consistent algebra.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::groups::{embed_generator, so_generators};
use crate::linalg::{self, svd_right};
use crate::pauli;
use crate::sampling;

/// Relative singular-value threshold for the null space.
pub const SVD_THRESHOLD: f64 = 1e-7;
/// Doublings tried before the rank is declared unstable.
pub const MAX_DOUBLINGS: usize = 6;
/// Closure / compactness threshold for excluding an irreducible block.
pub const BLOCK_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    /// Initial number of sampled pure pairs; raised to the minimum that
    /// over-determines the system.
    pub base_samples: usize,
    pub max_doublings: usize,
    pub seed: u64,
}

impl ScanOptions {
    pub fn new(base_samples: usize, seed: u64) -> Self {
        Self {
            base_samples,
            max_doublings: MAX_DOUBLINGS,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Irrep {
    Trivial,
    Vector,
    /// Antisymmetric square; for d = 4 split into self-dual (+1) and
    /// anti-self-dual (-1) halves.
    Wedge2(i8),
    SymTraceless,
}

impl Irrep {
    pub fn dim(self, d: usize) -> usize {
        match self {
            Irrep::Trivial => 1,
            Irrep::Vector => d,
            Irrep::Wedge2(0) => d * (d - 1) / 2,
            Irrep::Wedge2(_) => 3,
            Irrep::SymTraceless => d * (d + 1) / 2 - 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Irrep::Trivial => "trivial",
            Irrep::Vector => "vector",
            Irrep::Wedge2(0) => "wedge2",
            Irrep::Wedge2(1) => "wedge2+",
            Irrep::Wedge2(_) => "wedge2-",
            Irrep::SymTraceless => "sym2",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlockInfo {
    pub dim: usize,
    pub casimir_a: f64,
    pub casimir_b: f64,
    pub irrep_a: Option<Irrep>,
    pub irrep_b: Option<Irrep>,
    pub multiplicity: Option<usize>,
    pub irreducible: bool,
    pub closure_residual: f64,
    pub max_real_eigenvalue: f64,
    pub kept: bool,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct InteractionScanResult {
    pub d: usize,
    pub local_dim: usize,
    /// Dimension of the first-order tangency null space.
    pub first_order_dim: usize,
    /// Refined upper bound on the consistent algebra.
    pub solution_dim: usize,
    pub dims_by_level: Vec<usize>,
    pub samples_by_level: Vec<usize>,
    pub stable: bool,
    /// Local generators followed by the kept blocks, as `(d+1)^2` square
    /// matrices.
    pub basis: Vec<DMatrix<f64>>,
    pub blocks: Vec<BlockInfo>,
    /// max constraint residual of the local generators.
    pub local_residual: f64,
    /// d = 3 only: whether all adjoint su(4) images satisfy every constraint
    /// and lie in the refined space.
    pub contains_quantum: Option<bool>,
    pub quantum_constraint_residual: Option<f64>,
    pub quantum_span_residual: Option<f64>,
}

impl InteractionScanResult {
    pub fn has_interaction(&self) -> bool {
        self.solution_dim > self.local_dim
    }
}

/// Sampled pure product pair `(ω̂_A, ω̂_B)`.
#[derive(Debug, Clone)]
struct Sample {
    x: DVector<f64>,
    y: DVector<f64>,
}

fn bloch(v: &DVector<f64>, sign: f64) -> DVector<f64> {
    let mut w = DVector::zeros(v.len() + 1);
    w[0] = 1.0;
    w.rows_mut(1, v.len()).copy_from(&(v * sign));
    w
}

/// Effect vectors `a` (for the constraint `aᵀ H b = 0`) and the state `b`.
fn constraints(s: &Sample, d: usize) -> (Vec<DVector<f64>>, DVector<f64>) {
    let w1 = bloch(&s.x, 1.0);
    let w2 = bloch(&s.y, 1.0);
    let b = linalg::kron_vec(&w1, &w2);
    let mut span_effects = Vec::with_capacity(d + 1);
    for i in 0..d {
        let mut e = DVector::zeros(d + 1);
        e[0] = 0.5;
        e[i + 1] = 0.5;
        span_effects.push(e);
    }
    let mut e = DVector::zeros(d + 1);
    e[0] = 0.5;
    e[1] = -0.5;
    span_effects.push(e);
    let mut rows = Vec::with_capacity(2 * d + 3);
    rows.push(linalg::kron_vec(&(&w1 * 0.5), &(&w2 * 0.5)));
    let anti_a = bloch(&s.x, -1.0) * 0.5;
    let anti_b = bloch(&s.y, -1.0) * 0.5;
    for e in &span_effects {
        rows.push(linalg::kron_vec(&anti_a, e));
    }
    for e in &span_effects {
        rows.push(linalg::kron_vec(e, &anti_b));
    }
    (rows, b)
}

/// Pairs of sphere points from a 2d-dimensional shifted Halton sequence.
fn pair_points(d: usize, start: usize, count: usize, seed: u64) -> Vec<Sample> {
    let g = sampling::halton_gaussians(2 * d, start, count, seed);
    g.into_iter()
        .map(|v| {
            let x = v.rows(0, d).into_owned();
            let y = v.rows(d, d).into_owned();
            Sample {
                x: &x / x.norm(),
                y: &y / y.norm(),
            }
        })
        .collect()
}

fn local_generators(d: usize) -> Vec<DMatrix<f64>> {
    let id = DMatrix::<f64>::identity(d + 1, d + 1);
    let gens: Vec<DMatrix<f64>> = so_generators(d).iter().map(embed_generator).collect();
    let mut out: Vec<DMatrix<f64>> = gens.iter().map(|h| h.kronecker(&id)).collect();
    out.extend(gens.iter().map(|h| id.kronecker(h)));
    out
}

fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    DVector::from_fn(n * n, |i, _| m[(i / n, i % n)])
}

fn mat_of(v: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, v)
}

/// Largest |aᵀ H b| over all constraints of the given samples plus the
/// determinism rows `H[0][c] = 0`.
fn constraint_residual(h: &DMatrix<f64>, samples: &[Sample], d: usize) -> f64 {
    let mut worst = h.row(0).amax();
    for s in samples {
        let (rows, b) = constraints(s, d);
        let hb = h * &b;
        for a in rows {
            worst = worst.max(a.dot(&hb).abs());
        }
    }
    worst
}

fn full_system(samples: &[Sample], d: usize) -> DMatrix<f64> {
    let n = (d + 1) * (d + 1);
    let rows_per = 2 * d + 3;
    let mut m = DMatrix::zeros(n + samples.len() * rows_per, n * n);
    for c in 0..n {
        m[(c, c)] = 1.0;
    }
    let mut r = n;
    for s in samples {
        let (rows, b) = constraints(s, d);
        for a in rows {
            for (i, &ai) in a.iter().enumerate() {
                if ai == 0.0 {
                    continue;
                }
                for (j, &bj) in b.iter().enumerate() {
                    m[(r, i * n + j)] = ai * bj;
                }
            }
            r += 1;
        }
    }
    m
}

/// Constraint rows of `samples` restricted to the span of `basis` (columns
/// are vectorized H): `K = M · basis`, formed without building `M`.
fn restricted_system(samples: &[Sample], d: usize, basis: &DMatrix<f64>) -> DMatrix<f64> {
    let n = (d + 1) * (d + 1);
    let r = basis.ncols();
    // R[(row, k), c] = basis[row * n + c, k]
    let mut big = DMatrix::zeros(n * r, n);
    for row in 0..n {
        for k in 0..r {
            for c in 0..n {
                big[(row * r + k, c)] = basis[(row * n + c, k)];
            }
        }
    }
    let rows_per = 2 * d + 3;
    let mut out = DMatrix::zeros(samples.len() * rows_per, r);
    let mut bmat = DMatrix::zeros(n, samples.len());
    let mut effects = Vec::with_capacity(samples.len());
    for (s_idx, s) in samples.iter().enumerate() {
        let (rows, b) = constraints(s, d);
        bmat.set_column(s_idx, &b);
        effects.push(rows);
    }
    let w = &big * &bmat;
    for (s_idx, rows) in effects.iter().enumerate() {
        let ws = DMatrix::from_column_slice(r, n, w.column(s_idx).as_slice()).transpose();
        for (q, a) in rows.iter().enumerate() {
            let v = ws.transpose() * a;
            out.set_row(s_idx * rows_per + q, &v.transpose());
        }
    }
    out
}

/// Runs the scan for gbit dimension `d >= 2`.
pub fn interaction_scan(d: usize, samples: usize, seed: u64) -> Result<InteractionScanResult> {
    interaction_scan_with(d, ScanOptions::new(samples, seed))
}

pub fn interaction_scan_with(d: usize, opts: ScanOptions) -> Result<InteractionScanResult> {
    if !(2..=8).contains(&d) {
        return Err(Error::OutOfRange(format!("interaction scan needs 2 <= d <= 8, got {d}")));
    }
    let n = (d + 1) * (d + 1);
    let unknowns = n * n;
    let rows_per = 2 * d + 3;
    let minimum = (5 * unknowns).div_ceil(4 * rows_per);
    let m0 = opts.base_samples.max(minimum);

    let mut all_samples = pair_points(d, 0, m0, opts.seed);
    let m = full_system(&all_samples, d);
    let (s, v) = svd_right(&m);
    let smax = s.first().copied().unwrap_or(1.0);
    let cut = SVD_THRESHOLD * smax;
    let rank = s.iter().filter(|&&x| x > cut).count();
    let mut basis = v.columns(rank, unknowns - rank).into_owned();
    let mut dims = vec![basis.ncols()];
    let mut counts = vec![m0];
    let mut stable = false;
    for level in 1..=opts.max_doublings {
        let add = all_samples.len();
        let fresh = pair_points(d, all_samples.len(), add, opts.seed);
        let k = restricted_system(&fresh, d, &basis);
        all_samples.extend(fresh);
        if basis.ncols() > 0 {
            let (ks, kv) = svd_right(&k);
            let krank = ks.iter().filter(|&&x| x > cut).count();
            let r = basis.ncols();
            basis = &basis * kv.columns(krank, r - krank);
        }
        dims.push(basis.ncols());
        counts.push(all_samples.len());
        if level >= 2 && dims[level] == dims[level - 1] && dims[level - 1] == dims[level - 2] {
            stable = true;
            break;
        }
    }
    let first_order_dim = basis.ncols();
    let locals = local_generators(d);
    let local_dim = locals.len();
    let local_residual = locals
        .iter()
        .map(|l| constraint_residual(l, &all_samples, d))
        .fold(0.0, f64::max);

    let mut rng = sampling::substream(opts.seed, 0x5CA9);
    let (blocks, kept) = refine(d, &basis, &locals, &mut rng);
    let solution_dim = local_dim + kept.iter().map(|b| b.ncols()).sum::<usize>();
    let mut out_basis: Vec<DMatrix<f64>> = locals.clone();
    for b in &kept {
        for c in 0..b.ncols() {
            out_basis.push(mat_of(b.column(c).as_slice(), n));
        }
    }

    let (contains_quantum, qc, qs) = if d == 3 {
        let span = linalg::orthonormal_columns(
            &DMatrix::from_columns(&out_basis.iter().map(vec_of).collect::<Vec<_>>()),
            1e-10,
        );
        let mut worst_c: f64 = 0.0;
        let mut worst_s: f64 = 0.0;
        for g in pauli::adjoint_generators(2) {
            worst_c = worst_c.max(constraint_residual(&g, &all_samples, d));
            let v = vec_of(&g);
            let proj = &span * (span.transpose() * &v);
            worst_s = worst_s.max((&v - proj).norm() / v.norm());
        }
        (Some(worst_c < 1e-10 && worst_s < 1e-8), Some(worst_c), Some(worst_s))
    } else {
        (None, None, None)
    };

    Ok(InteractionScanResult {
        d,
        local_dim,
        first_order_dim,
        solution_dim,
        dims_by_level: dims,
        samples_by_level: counts,
        stable,
        basis: out_basis,
        blocks,
        local_residual,
        contains_quantum,
        quantum_constraint_residual: qc,
        quantum_span_residual: qs,
    })
}

fn identify(d: usize, cas: f64, pf: Option<f64>) -> Option<Irrep> {
    let close = |a: f64, b: f64| (a - b).abs() < 1e-3;
    let df = d as f64;
    if close(cas, 0.0) {
        return Some(Irrep::Trivial);
    }
    if close(cas, df - 1.0) {
        return Some(Irrep::Vector);
    }
    if close(cas, 2.0 * (df - 2.0)) {
        return match pf {
            Some(p) if p > 1.0 => Some(Irrep::Wedge2(1)),
            Some(p) if p < -1.0 => Some(Irrep::Wedge2(-1)),
            _ => Some(Irrep::Wedge2(0)),
        };
    }
    if close(cas, 2.0 * df) {
        return Some(Irrep::SymTraceless);
    }
    None
}

/// Splits `V ∩ local^⊥` into blocks and decides which may belong to a
/// consistent algebra. Returns block descriptions and the kept bases (as
/// columns of vectorized matrices).
fn refine<R: Rng>(
    d: usize,
    v: &DMatrix<f64>,
    locals: &[DMatrix<f64>],
    rng: &mut R,
) -> (Vec<BlockInfo>, Vec<DMatrix<f64>>) {
    let n = (d + 1) * (d + 1);
    let loc = linalg::orthonormal_columns(
        &DMatrix::from_columns(&locals.iter().map(vec_of).collect::<Vec<_>>()),
        1e-10,
    );
    let v_orth = linalg::orthonormal_columns(v, 1e-10);
    let resid = &v_orth - &loc * (loc.transpose() * &v_orth);
    let extras = {
        // Left singular vectors of `resid` span its range.
        let eig = (resid.transpose() * &resid).symmetric_eigen();
        let cols: Vec<DVector<f64>> = (0..eig.eigenvalues.len())
            .filter(|&i| eig.eigenvalues[i] > 1e-12)
            .map(|i| &resid * eig.eigenvectors.column(i) / eig.eigenvalues[i].sqrt())
            .collect();
        DMatrix::from_columns(&cols)
    };
    let e = extras.ncols();
    if e == 0 {
        return (vec![], vec![]);
    }
    let ys: Vec<DMatrix<f64>> = (0..e).map(|j| mat_of(extras.column(j).as_slice(), n)).collect();
    let ad = |l: &DMatrix<f64>, y: &DMatrix<f64>| l * y - y * l;
    let half = locals.len() / 2;
    let project = |imgs: Vec<DMatrix<f64>>| -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = imgs.iter().map(|m| extras.transpose() * vec_of(m)).collect();
        DMatrix::from_columns(&cols)
    };
    let casimir = |side: &[DMatrix<f64>]| -> DMatrix<f64> {
        project(
            ys.iter()
                .map(|y| {
                    let mut acc = DMatrix::zeros(n, n);
                    for l in side {
                        acc -= ad(l, &ad(l, y));
                    }
                    acc
                })
                .collect(),
        )
    };
    let sym = |m: DMatrix<f64>| (&m + m.transpose()) * 0.5;
    let ca = sym(casimir(&locals[..half]));
    let cb = sym(casimir(&locals[half..]));
    let pfaff = |side: &[DMatrix<f64>]| -> DMatrix<f64> {
        // Generators are ordered (0,1),(0,2),(0,3),(1,2),(1,3),(2,3).
        let g = |i: usize| &side[i];
        let terms: [(usize, usize, f64); 3] = [(0, 5, 1.0), (1, 4, -1.0), (2, 3, 1.0)];
        sym(project(
            ys.iter()
                .map(|y| {
                    let mut acc = DMatrix::zeros(n, n);
                    for &(p, q, s) in &terms {
                        acc += (ad(g(p), &ad(g(q), y)) + ad(g(q), &ad(g(p), y))) * s;
                    }
                    acc
                })
                .collect(),
        ))
    };
    let (pa, pb) = if d == 4 {
        (Some(pfaff(&locals[..half])), Some(pfaff(&locals[half..])))
    } else {
        (None, None)
    };
    let mut mix = &ca * rng.random_range(1.0..2.0) + &cb * rng.random_range(2.5..3.5);
    if let (Some(pa), Some(pb)) = (&pa, &pb) {
        mix += pa * rng.random_range(0.3..0.6) + pb * rng.random_range(0.7..0.9);
    }
    let eig = sym(mix).symmetric_eigen();
    let mut order: Vec<usize> = (0..e).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let scale = eig.eigenvalues.amax().max(1.0);
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match clusters.last_mut() {
            Some(c) if (eig.eigenvalues[i] - eig.eigenvalues[*c.last().unwrap()]).abs() < 1e-6 * scale => c.push(i),
            _ => clusters.push(vec![i]),
        }
    }
    let v_basis = v_orth;
    let mut infos = Vec::new();
    let mut kept = Vec::new();
    for cl in clusters {
        let u = DMatrix::from_columns(&cl.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
        let dim = cl.len();
        let label = |op: &DMatrix<f64>| (u.transpose() * op * &u).trace() / dim as f64;
        let cas_a = label(&ca);
        let cas_b = label(&cb);
        let ia = identify(d, cas_a, pa.as_ref().map(|p| label(p)));
        let ib = identify(d, cas_b, pb.as_ref().map(|p| label(p)));
        let block = &extras * &u;
        let mats: Vec<DMatrix<f64>> = (0..dim).map(|c| mat_of(block.column(c).as_slice(), n)).collect();
        let random_element = |rng: &mut R| {
            let mut y = DMatrix::zeros(n, n);
            for m in &mats {
                y += m * rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
            y
        };
        let mut closure: f64 = 0.0;
        for _ in 0..2 {
            let y1 = random_element(rng);
            let y2 = random_element(rng);
            let c = ad(&y1, &y2);
            let cn = c.norm();
            if cn > 1e-12 * y1.norm() * y2.norm() {
                let cv = vec_of(&c);
                let r = &cv - &v_basis * (v_basis.transpose() * &cv);
                closure = closure.max(r.norm() / cn);
            }
        }
        let y = random_element(rng);
        let max_re = linalg::eigenvalues(&y)
            .iter()
            .map(|z| z.re.abs())
            .fold(0.0, f64::max)
            / y.norm().max(1e-300);
        let multiplicity = match (ia, ib) {
            (Some(a), Some(b)) => {
                let unit = a.dim(d) * b.dim(d);
                if dim % unit == 0 {
                    Some(dim / unit)
                } else {
                    None
                }
            }
            _ => None,
        };
        let complex_pair = d == 2 && ia != Some(Irrep::Trivial) && ib != Some(Irrep::Trivial);
        let irreducible = multiplicity == Some(1) && !complex_pair;
        let (keep, reason) = if !irreducible {
            (true, "not a single irreducible block; kept".to_string())
        } else if closure > BLOCK_THRESHOLD {
            (false, format!("commutators leave the first-order space (residual {closure:.2e})"))
        } else if max_re > BLOCK_THRESHOLD {
            (false, format!("generates unbounded flow (max |Re λ| / |Y| = {max_re:.2e})"))
        } else {
            (true, "closed and compact; kept".to_string())
        };
        if keep {
            kept.push(block.clone());
        }
        infos.push(BlockInfo {
            dim,
            casimir_a: cas_a,
            casimir_b: cas_b,
            irrep_a: ia,
            irrep_b: ib,
            multiplicity,
            irreducible,
            closure_residual: closure,
            max_real_eigenvalue: max_re,
            kept: keep,
            reason,
        });
    }
    (infos, kept)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_generators_satisfy_constraints() {
        let d = 3;
        let samples = pair_points(d, 0, 20, 1);
        for l in local_generators(d) {
            assert!(constraint_residual(&l, &samples, d) < 1e-14);
        }
    }

    #[test]
    fn restricted_system_matches_full_product() {
        let d = 2;
        let n = 9;
        let samples = pair_points(d, 0, 5, 3);
        let basis = DMatrix::from_fn(n * n, 4, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let full = full_system(&samples, d);
        let want = full.rows(n, full.nrows() - n) * &basis;
        let got = restricted_system(&samples, d, &basis);
        assert!((want - got).amax() < 1e-10);
    }
}
