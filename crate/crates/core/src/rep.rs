//! Dense matrix realizations of SU(2): group elements, irrep matrices,
//! tensor-product operators, symmetrizers and angular momentum projectors.
//!
//! All matrices use the ladder basis `m = +j, j-1, ..., -j`; on tensor
//! products the first factor is the most significant index.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::coupling::{coupled_state_coefficients, Child, LabelledTree};
use crate::exactnum::{ratio, HalfInt};
use crate::wigner::{couplings, triangle};

pub type C64 = Complex64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RepError {
    #[error("label error: {0}")]
    Label(String),
    #[error("not a special unitary matrix (deviation {0:e})")]
    NotSpecialUnitary(f64),
}

/// A 2x2 special unitary matrix in the basis `(+1/2, -1/2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupElement(Matrix2<C64>);

impl GroupElement {
    pub fn identity() -> Self {
        GroupElement(Matrix2::identity())
    }

    /// Checked constructor; rejects matrices off SU(2) by more than `1e-12`.
    pub fn new(m: Matrix2<C64>) -> Result<Self, RepError> {
        let dev = (m.adjoint() * m - Matrix2::identity()).camax();
        let det = (m.determinant() - C64::one()).norm();
        let worst = dev.max(det);
        if worst > 1e-12 {
            return Err(RepError::NotSpecialUnitary(worst));
        }
        Ok(GroupElement(m))
    }

    /// `a0 + i (a1 sx + a2 sy + a3 sz)` for a unit quaternion, renormalized.
    pub fn from_quaternion(q: [f64; 4]) -> Self {
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        let [a, b, c, d] = q.map(|x| x / n);
        GroupElement(Matrix2::new(
            C64::new(a, d),
            C64::new(c, b),
            C64::new(-c, b),
            C64::new(a, -d),
        ))
    }

    /// `exp(-i a Jz) exp(-i b Jy) exp(-i g Jz)` in the spin-1/2 irrep.
    pub fn from_euler(alpha: f64, beta: f64, gamma: f64) -> Self {
        let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
        let ep = |x: f64| C64::from_polar(1.0, -x / 2.0);
        GroupElement(Matrix2::new(
            ep(alpha) * ep(gamma) * c,
            -ep(alpha) * ep(-gamma) * s,
            ep(-alpha) * ep(gamma) * s,
            ep(-alpha) * ep(-gamma) * c,
        ))
    }

    /// Haar-random element: a normalized Gaussian quaternion.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        Self::from_quaternion(q)
    }

    pub fn matrix(&self) -> &Matrix2<C64> {
        &self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn inverse(&self) -> Self {
        GroupElement(self.0.adjoint())
    }

    pub fn mul(&self, other: &GroupElement) -> Self {
        GroupElement(self.0 * other.0)
    }

    pub fn conjugate_by(&self, g: &GroupElement) -> Self {
        GroupElement(g.0 * self.0 * g.0.adjoint())
    }

    pub fn det(&self) -> C64 {
        self.0.determinant()
    }
}

/// Haar sample for [`GroupElement::sample`] under its spec name.
pub fn su2_sample<R: Rng + ?Sized>(rng: &mut R) -> GroupElement {
    GroupElement::sample(rng)
}

/// A dense complex operator on a tensor product space.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    pub matrix: DMatrix<C64>,
    pub factor_dims: Vec<usize>,
}

#[derive(Serialize)]
struct OperatorJson<'a> {
    rows: usize,
    cols: usize,
    factor_dims: &'a [usize],
    /// Row-major, interleaved real and imaginary parts.
    data: Vec<f64>,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<C64>, factor_dims: Vec<usize>) -> Self {
        debug_assert_eq!(matrix.nrows(), factor_dims.iter().product::<usize>());
        DenseOperator {
            matrix,
            factor_dims,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let m = &self.matrix;
        let mut data = Vec::with_capacity(2 * m.len());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push(m[(r, c)].re);
                data.push(m[(r, c)].im);
            }
        }
        serde_json::to_value(OperatorJson {
            rows: m.nrows(),
            cols: m.ncols(),
            factor_dims: &self.factor_dims,
            data,
        })
        .expect("operator serializes")
    }

    /// Largest entry of `|self - other|`.
    pub fn max_diff(&self, other: &DenseOperator) -> f64 {
        (&self.matrix - &other.matrix)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn rank(&self, tol: f64) -> usize {
        self.matrix
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .filter(|&&s| s > tol)
            .count()
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// The irrep matrix `D^j(u)`, realized on the symmetric part of `u^{(x)2j}`.
///
/// Symmetric tensors are identified with homogeneous polynomials in two
/// variables; `u` acts by linear substitution, and the normalized monomials
/// are the ladder basis.
pub fn dmatrix(j: HalfInt, u: &GroupElement) -> DMatrix<C64> {
    let n = j.twice() as usize;
    let m = u.matrix();
    // image of x is u11 x + u21 y, of y is u12 x + u22 y
    let (ax, ay, bx, by) = (m[(0, 0)], m[(1, 0)], m[(0, 1)], m[(1, 1)]);
    let mut out = DMatrix::zeros(n + 1, n + 1);
    for q in 0..=n {
        // (ax x + ay y)^{n-q} (bx x + by y)^q
        let mut poly = vec![C64::zero(); n + 1];
        poly[0] = C64::one();
        for (deg, factor) in std::iter::repeat_n((ax, ay), n - q)
            .chain(std::iter::repeat_n((bx, by), q))
            .enumerate()
        {
            for p in (0..=deg + 1).rev() {
                let keep = if p <= deg {
                    poly[p] * factor.0
                } else {
                    C64::zero()
                };
                let shift = if p > 0 {
                    poly[p - 1] * factor.1
                } else {
                    C64::zero()
                };
                poly[p] = keep + shift;
            }
        }
        for p in 0..=n {
            out[(p, q)] = poly[p] * (binom(n, q) / binom(n, p)).sqrt();
        }
    }
    out
}

/// Kronecker product of a list of matrices, first factor most significant.
pub fn kron_all(factors: &[DMatrix<C64>]) -> DMatrix<C64> {
    factors
        .iter()
        .fold(DMatrix::from_element(1, 1, C64::one()), |acc, f| {
            acc.kronecker(f)
        })
}

/// `(A_1 (x) ... (x) A_N) v` without forming the Kronecker product.
pub fn apply_kron(factors: &[DMatrix<C64>], v: &DVector<C64>) -> DVector<C64> {
    let dims: Vec<usize> = factors.iter().map(|f| f.ncols()).collect();
    let total: usize = dims.iter().product();
    assert_eq!(v.len(), total);
    let mut cur = v.clone();
    let mut stride = total;
    for (f, a) in factors.iter().enumerate() {
        let d = dims[f];
        stride /= d;
        let outer = total / (d * stride);
        let mut next = DVector::zeros(total);
        for o in 0..outer {
            for s in 0..stride {
                let base = o * d * stride + s;
                for r in 0..d {
                    let mut acc = C64::zero();
                    for c in 0..d {
                        acc += a[(r, c)] * cur[base + c * stride];
                    }
                    next[base + r * stride] = acc;
                }
            }
        }
        cur = next;
    }
    cur
}

/// `D_{j_1}(u_1) (x) ... (x) D_{j_N}(u_N)` as a dense operator.
pub fn tensor_dmatrix(spins: &[HalfInt], us: &[GroupElement]) -> DenseOperator {
    let factors: Vec<_> = spins.iter().zip(us).map(|(&j, u)| dmatrix(j, u)).collect();
    DenseOperator::new(kron_all(&factors), dims_of(spins))
}

pub fn dims_of(spins: &[HalfInt]) -> Vec<usize> {
    spins.iter().map(|s| s.dim() as usize).collect()
}

/// Permutation operator `K_sigma` on `(C^d)^{(x)n}`: factor `i` moves to slot `sigma[i]`.
pub fn permutation_operator(sigma: &[usize], d: usize) -> DMatrix<f64> {
    let n = sigma.len();
    let total = d.pow(n as u32);
    let mut out = DMatrix::zeros(total, total);
    let mut digits = vec![0usize; n];
    for idx in 0..total {
        let mut r = idx;
        for k in (0..n).rev() {
            digits[k] = r % d;
            r /= d;
        }
        let mut target = vec![0usize; n];
        for (i, &s) in sigma.iter().enumerate() {
            target[s] = digits[i];
        }
        let t = target.iter().fold(0, |acc, &x| acc * d + x);
        out[(t, idx)] = 1.0;
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn transposition(n: usize, a: usize, b: usize) -> Vec<usize> {
    let mut s: Vec<usize> = (0..n).collect();
    s.swap(a, b);
    s
}

fn real_op(m: DMatrix<f64>, n: usize) -> DenseOperator {
    DenseOperator::new(m.map(|x| C64::new(x, 0.0)), vec![2; n])
}

fn symmetrizer_real(n: usize) -> DMatrix<f64> {
    let perms = permutations(n);
    let count = perms.len() as f64;
    perms
        .iter()
        .map(|p| permutation_operator(p, 2))
        .fold(DMatrix::zeros(1 << n, 1 << n), |acc, k| acc + k)
        / count
}

/// `S^n = (1/n!) sum_sigma K_sigma` on `(C^2)^{(x)n}`.
pub fn symmetrizer(n: usize) -> DenseOperator {
    assert!(n >= 1, "symmetrizer needs at least one factor");
    real_op(symmetrizer_real(n), n)
}

/// `M^n = (1/n)((n-1) - sum_{i<n} K_(i n)) (S^{n-1} (x) 1)`, the complement
/// of `S^n` inside the image of `S^{n-1} (x) 1`.
pub fn mixed_symmetrizer(n: usize) -> DenseOperator {
    assert!(n >= 2, "mixed symmetrizer needs at least two factors");
    let dim = 1 << n;
    let mut m = DMatrix::<f64>::identity(dim, dim) * (n - 1) as f64;
    for i in 0..n - 1 {
        m -= permutation_operator(&transposition(n, i, n - 1), 2);
    }
    m /= n as f64;
    let lower = symmetrizer_real(n - 1).kronecker(&DMatrix::<f64>::identity(2, 2));
    real_op(m * lower, n)
}

/// Spin matrices `(Jz, J+)` for spin `j`; `J-` is the transpose of `J+`.
pub fn spin_matrices(j: HalfInt) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = j.dim() as usize;
    let jj = j.to_f64();
    let mut jz = DMatrix::zeros(d, d);
    let mut jp = DMatrix::zeros(d, d);
    for p in 0..d {
        let m = jj - p as f64;
        jz[(p, p)] = m;
        if p > 0 {
            jp[(p - 1, p)] = (jj * (jj + 1.0) - m * (m + 1.0)).sqrt();
        }
    }
    (jz, jp)
}

/// Total spin operators `(Jz, J+)` of a subset of tensor factors.
fn subset_spin(spins: &[HalfInt], subset: &[usize]) -> (DMatrix<f64>, DMatrix<f64>) {
    let dims = dims_of(spins);
    let total: usize = dims.iter().product();
    let mut jz = DMatrix::zeros(total, total);
    let mut jp = DMatrix::zeros(total, total);
    for &f in subset {
        let (z, p) = spin_matrices(spins[f]);
        jz += embed(&z, f, &dims);
        jp += embed(&p, f, &dims);
    }
    (jz, jp)
}

/// `1 (x) ... (x) op (x) ... (x) 1` with `op` in slot `factor`.
pub fn embed(op: &DMatrix<f64>, factor: usize, dims: &[usize]) -> DMatrix<f64> {
    let before: usize = dims[..factor].iter().product();
    let after: usize = dims[factor + 1..].iter().product();
    DMatrix::<f64>::identity(before, before)
        .kronecker(op)
        .kronecker(&DMatrix::<f64>::identity(after, after))
}

fn dot_spins(a: &(DMatrix<f64>, DMatrix<f64>), b: &(DMatrix<f64>, DMatrix<f64>)) -> DMatrix<f64> {
    let (az, ap) = a;
    let (bz, bp) = b;
    az * bz + (ap * bp.transpose() + ap.transpose() * bp) * 0.5
}

/// `J^j . J^k` on `H_j (x) H_k`.
pub fn pair_invariant(j: HalfInt, k: HalfInt) -> DenseOperator {
    let spins = [j, k];
    let m = dot_spins(&subset_spin(&spins, &[0]), &subset_spin(&spins, &[1]));
    DenseOperator::new(m.map(|x| C64::new(x, 0.0)), dims_of(&spins))
}

/// Eigenvalue of `J^a . J^b` on total spin `l`: `(l(l+1) - a(a+1) - b(b+1)) / 2`.
pub fn pair_eigenvalue(a: HalfInt, b: HalfInt, l: HalfInt) -> f64 {
    let cas = |s: HalfInt| {
        let s = s.to_rational();
        &s * (&s + ratio(1, 1))
    };
    ((cas(l) - cas(a) - cas(b)) / ratio(2, 1))
        .to_f64()
        .expect("small rational")
}

/// Spectral polynomial `prod_{l' != l} (X - alpha_l') / (alpha_l - alpha_l')`.
fn spectral_projector(x: &DMatrix<f64>, a: HalfInt, b: HalfInt, l: HalfInt) -> DMatrix<f64> {
    let n = x.nrows();
    let mut p = DMatrix::<f64>::identity(n, n);
    let al = pair_eigenvalue(a, b, l);
    for lp in couplings(a, b).filter(|&lp| lp != l) {
        let alp = pair_eigenvalue(a, b, lp);
        // alpha differences are exact half-integers, so the division is exact
        let factor = (x - DMatrix::<f64>::identity(n, n) * alp) / (al - alp);
        p = factor * p;
    }
    p
}

/// Orthogonal projector onto total spin `l` in `H_j (x) H_k`.
pub fn projector_pair(j: HalfInt, k: HalfInt, l: HalfInt) -> Result<DenseOperator, RepError> {
    if !triangle(j, k, l) {
        return Err(RepError::Label(format!(
            "{l} is not a coupling of {j} and {k}"
        )));
    }
    let spins = [j, k];
    let x = dot_spins(&subset_spin(&spins, &[0]), &subset_spin(&spins, &[1]));
    let p = spectral_projector(&x, j, k, l);
    Ok(DenseOperator::new(
        p.map(|v| C64::new(v, 0.0)),
        dims_of(&spins),
    ))
}

fn subtree_leaves(lt: &LabelledTree, c: Child) -> Vec<usize> {
    match c {
        Child::Leaf(i) => vec![i],
        Child::Internal(v) => {
            let (l, r) = lt.tree.vertices()[v];
            let mut out = subtree_leaves(lt, l);
            out.extend(subtree_leaves(lt, r));
            out
        }
    }
}

fn child_spin(lt: &LabelledTree, spins: &[HalfInt], c: Child) -> HalfInt {
    match c {
        Child::Leaf(i) => lt.leaf_spins[i],
        Child::Internal(v) => spins[v],
    }
}

fn projector_tree_real(lt: &LabelledTree) -> DMatrix<f64> {
    let dim = lt.leaf_dim();
    let spins = lt.vertex_spins();
    let mut p = DMatrix::<f64>::identity(dim, dim);
    for (v, &(l, r)) in lt.tree.vertices().iter().enumerate() {
        let ja = subset_spin(&lt.leaf_spins, &subtree_leaves(lt, l));
        let jb = subset_spin(&lt.leaf_spins, &subtree_leaves(lt, r));
        let x = dot_spins(&ja, &jb);
        let pv = spectral_projector(
            &x,
            child_spin(lt, &spins, l),
            child_spin(lt, &spins, r),
            spins[v],
        );
        p = pv * p;
    }
    p
}

/// `P^j_{j, k}`: composition of pair projectors along the tree, children first.
pub fn projector_tree(lt: &LabelledTree) -> Result<DenseOperator, RepError> {
    lt.validate().map_err(|e| RepError::Label(e.to_string()))?;
    let p = projector_tree_real(lt);
    Ok(DenseOperator::new(
        p.map(|v| C64::new(v, 0.0)),
        dims_of(&lt.leaf_spins),
    ))
}

/// Index of a leaf magnetic tuple in the product basis.
pub fn product_index(spins: &[HalfInt], ms: &[HalfInt]) -> usize {
    spins.iter().zip(ms).fold(0, |acc, (j, m)| {
        acc * j.dim() as usize + ((j.twice() - m.twice()) / 2) as usize
    })
}

/// Coupled basis vectors `|T(j, k) total m>` for `m = total, ..., -total`,
/// from the exact Clebsch-Gordan coefficients.
pub fn coupled_basis_cg(lt: &LabelledTree) -> Result<Vec<DVector<f64>>, RepError> {
    let dim = lt.leaf_dim();
    lt.total
        .magnetic_range()
        .map(|m| {
            let coeffs =
                coupled_state_coefficients(lt, m).map_err(|e| RepError::Label(e.to_string()))?;
            let mut v = DVector::zeros(dim);
            for (ms, c) in coeffs {
                v[product_index(&lt.leaf_spins, &ms)] = c.to_f64();
            }
            Ok(v)
        })
        .collect()
}

/// Coupled basis vectors built without Clebsch-Gordan formulas.
///
/// At each vertex the highest-weight state is the pair projection of
/// `|a, a> (x) |b, c - a>`, normalized; lower weights come from the total
/// lowering operator. This fixes the Condon-Shortley phase automatically.
pub fn coupled_basis_projector(lt: &LabelledTree) -> Result<Vec<DVector<f64>>, RepError> {
    lt.validate().map_err(|e| RepError::Label(e.to_string()))?;
    let spins = lt.vertex_spins();
    // (leaf order of subtree, multiplet of vectors over those leaves)
    fn build(lt: &LabelledTree, spins: &[HalfInt], c: Child) -> (Vec<usize>, Vec<DVector<f64>>) {
        match c {
            Child::Leaf(i) => {
                let d = lt.leaf_spins[i].dim() as usize;
                let vs = (0..d)
                    .map(|p| {
                        let mut v = DVector::zeros(d);
                        v[p] = 1.0;
                        v
                    })
                    .collect();
                (vec![i], vs)
            }
            Child::Internal(v) => {
                let (l, r) = lt.tree.vertices()[v];
                let (ll, lv) = build(lt, spins, l);
                let (rl, rv) = build(lt, spins, r);
                let a = child_spin(lt, spins, l);
                let b = child_spin(lt, spins, r);
                let c = spins[v];
                let mut leaves = ll.clone();
                leaves.extend(&rl);
                let sub: Vec<HalfInt> = leaves.iter().map(|&i| lt.leaf_spins[i]).collect();
                let left_idx: Vec<usize> = (0..ll.len()).collect();
                let right_idx: Vec<usize> = (ll.len()..leaves.len()).collect();
                let ja = subset_spin(&sub, &left_idx);
                let jb = subset_spin(&sub, &right_idx);
                let x = dot_spins(&ja, &jb);
                let p = spectral_projector(&x, a, b, c);
                let mb = c - a;
                let seed = kron_vec(&lv[0], &rv[((b.twice() - mb.twice()) / 2) as usize]);
                let mut top = p * seed;
                top /= top.norm();
                let lower = (&ja.1 + &jb.1).transpose();
                let mut out = vec![top];
                let cj = c.to_f64();
                for m in c.magnetic_range().skip(1) {
                    let mm = m.to_f64() + 1.0;
                    let norm = (cj * (cj + 1.0) - mm * (mm - 1.0)).sqrt();
                    let next = &lower * out.last().unwrap() / norm;
                    out.push(next);
                }
                (leaves, out)
            }
        }
    }
    let top = if lt.tree.leaf_count() == 1 {
        Child::Leaf(0)
    } else {
        Child::Internal(spins.len() - 1)
    };
    let (leaves, vs) = build(lt, &spins, top);
    Ok(vs
        .iter()
        .map(|v| reorder_leaves(v, &leaves, &lt.leaf_spins))
        .collect())
}

fn kron_vec(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() * b.len());
    for i in 0..a.len() {
        for k in 0..b.len() {
            out[i * b.len() + k] = a[i] * b[k];
        }
    }
    out
}

/// Convert a vector whose factors follow `order` into canonical leaf order.
fn reorder_leaves(v: &DVector<f64>, order: &[usize], spins: &[HalfInt]) -> DVector<f64> {
    let n = order.len();
    let sub_dims: Vec<usize> = order.iter().map(|&i| spins[i].dim() as usize).collect();
    let dims = dims_of(spins);
    let mut out = DVector::zeros(v.len());
    let mut digits = vec![0usize; n];
    for idx in 0..v.len() {
        let mut r = idx;
        for k in (0..n).rev() {
            digits[k] = r % sub_dims[k];
            r /= sub_dims[k];
        }
        let mut canon = vec![0usize; n];
        for (k, &leaf) in order.iter().enumerate() {
            canon[leaf] = digits[k];
        }
        let t = canon.iter().zip(&dims).fold(0, |acc, (&x, &d)| acc * d + x);
        out[t] = v[idx];
    }
    out
}
