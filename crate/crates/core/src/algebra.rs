//! Pointwise products of quasicharacters, structure constants and changes
//! of coupling tree.

use std::collections::BTreeMap;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use lru::LruCache;
use num_bigint::BigInt;
use num_rational::BigRational;
use parking_lot::Mutex;
use serde::Serialize;
use thiserror::Error;

use crate::coupling::{
    coupled_state_coefficients, enumerate_labels, CouplingTree, LabelledTree, QuasicharId,
};
use crate::exactnum::{ExactError, HalfInt, SqrtRational, SqrtSum};
use crate::quasichar::Convention;
use crate::wigner::{bracket_9j, couplings};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error("label error: {0}")]
    Label(String),
    #[error("exact arithmetic: {0}")]
    Exact(#[from] ExactError),
}

/// A finite linear combination of quasicharacters.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProductExpansion {
    pub convention: Convention,
    pub terms: Vec<(QuasicharId, SqrtRational)>,
}

type SortKey = (Vec<i32>, Vec<i32>, Vec<i32>, i32);

fn sort_key(id: &QuasicharId) -> SortKey {
    let tw = |v: &[HalfInt]| v.iter().map(|h| h.twice()).collect::<Vec<_>>();
    (
        tw(&id.leaf_spins),
        tw(&id.k),
        tw(&id.k_prime),
        id.total.twice(),
    )
}

impl ProductExpansion {
    fn from_map(
        convention: Convention,
        map: BTreeMap<SortKey, (QuasicharId, SqrtSum)>,
    ) -> Result<Self, AlgebraError> {
        let mut terms = Vec::new();
        for (_, (id, sum)) in map {
            let c = sum.to_sqrt_rational()?;
            if !c.is_zero() {
                terms.push((id, c));
            }
        }
        Ok(ProductExpansion { convention, terms })
    }

    /// Coefficient of `id`, zero if absent.
    pub fn coefficient(&self, id: &QuasicharId) -> SqrtRational {
        self.terms
            .iter()
            .find(|(t, _)| t == id)
            .map(|(_, c)| c.clone())
            .unwrap_or_else(SqrtRational::zero)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Re-express in another convention.
    pub fn to_convention(
        &self,
        to: Convention,
        multiplicands: &[&QuasicharId],
    ) -> ProductExpansion {
        let ratio = |id: &QuasicharId, c: Convention| scale_square(id, c);
        let mut factor = BigRational::from_integer(1.into());
        for m in multiplicands {
            factor *= ratio(m, to) / ratio(m, self.convention);
        }
        let terms = self
            .terms
            .iter()
            .map(|(id, c)| {
                let f = &factor * ratio(id, self.convention) / ratio(id, to);
                (id.clone(), c * &SqrtRational::sqrt_of(f))
            })
            .collect();
        ProductExpansion {
            convention: to,
            terms,
        }
    }

    /// `sum_i c_i chi_i(us)` in this expansion's convention.
    pub fn eval(
        &self,
        us: &[crate::rep::GroupElement],
    ) -> Result<num_complex::Complex64, crate::quasichar::QuasicharError> {
        let mut total = num_complex::Complex64::new(0.0, 0.0);
        for (id, c) in &self.terms {
            total += crate::quasichar::quasichar_eval(id, us, self.convention)? * c.to_f64();
        }
        Ok(total)
    }
}

/// Square of the factor converting trace values into `c`.
fn scale_square(id: &QuasicharId, c: Convention) -> BigRational {
    let leaves = BigInt::from(id.leaf_dim());
    let dj = BigInt::from(id.total.dim());
    match c {
        Convention::Trace => BigRational::from_integer(1.into()),
        Convention::Orthonormal => BigRational::new(leaves, dj),
        Convention::Table => BigRational::new(1.into(), leaves),
    }
}

fn caterpillar_spins(leaf: &[HalfInt], k: &[HalfInt], total: HalfInt) -> Vec<HalfInt> {
    // l^1 = leaf 1, l^i = spin after coupling leaf i
    let mut v = vec![leaf[0]];
    if leaf.len() > 1 {
        v.extend_from_slice(k);
        v.push(total);
    }
    v
}

/// `<(j1 j2 -> J per leaf), caterpillar K | caterpillar k1 x caterpillar k2>`
/// as a product of `N - 1` bracket 9j symbols.
#[allow(clippy::too_many_arguments)]
pub fn product_recoupling(
    leaf1: &[HalfInt],
    k1: &[HalfInt],
    j1: HalfInt,
    leaf2: &[HalfInt],
    k2: &[HalfInt],
    j2: HalfInt,
    leaf: &[HalfInt],
    k: &[HalfInt],
    j: HalfInt,
) -> SqrtRational {
    let l1 = caterpillar_spins(leaf1, k1, j1);
    let l2 = caterpillar_spins(leaf2, k2, j2);
    let l = caterpillar_spins(leaf, k, j);
    if leaf.len() == 1 {
        let ok = l[0] == j && l1[0] == j1 && l2[0] == j2;
        return if ok && crate::wigner::triangle(j1, j2, j) {
            SqrtRational::one()
        } else {
            SqrtRational::zero()
        };
    }
    let mut u = SqrtRational::one();
    for i in 1..leaf.len() {
        let b = bracket_9j([
            l1[i - 1],
            l2[i - 1],
            l[i - 1],
            leaf1[i],
            leaf2[i],
            leaf[i],
            l1[i],
            l2[i],
            l[i],
        ]);
        if b.is_zero() {
            return b;
        }
        u = &u * &b;
    }
    u
}

fn require_caterpillar(id: &QuasicharId) -> Result<(), AlgebraError> {
    if id.tree.is_caterpillar() {
        Ok(())
    } else {
        Err(AlgebraError::Label(format!(
            "{} is not on the caterpillar tree",
            id.tree
        )))
    }
}

/// Expansion of `chi_1 * chi_2` for two quasicharacters on the caterpillar
/// with the same number of leaves.
pub fn product_caterpillar(
    id1: &QuasicharId,
    id2: &QuasicharId,
    convention: Convention,
) -> Result<ProductExpansion, AlgebraError> {
    require_caterpillar(id1)?;
    require_caterpillar(id2)?;
    if id1.n() != id2.n() {
        return Err(AlgebraError::Label(format!(
            "leaf counts differ: {} and {}",
            id1.n(),
            id2.n()
        )));
    }
    let n = id1.n();
    let tree = CouplingTree::caterpillar(n);
    let per_leaf: Vec<Vec<HalfInt>> = id1
        .leaf_spins
        .iter()
        .zip(&id2.leaf_spins)
        .map(|(&a, &b)| couplings(a, b).collect())
        .collect();
    let mut map = BTreeMap::new();
    let mut leaf = vec![HalfInt::ZERO; n];
    fn each_leaf_set(
        per: &[Vec<HalfInt>],
        i: usize,
        cur: &mut Vec<HalfInt>,
        f: &mut dyn FnMut(&[HalfInt]),
    ) {
        if i == per.len() {
            f(cur);
            return;
        }
        for &s in &per[i] {
            cur[i] = s;
            each_leaf_set(per, i + 1, cur, f);
        }
    }
    let mut err = None;
    each_leaf_set(&per_leaf, 0, &mut leaf, &mut |leaf| {
        for j in couplings(id1.total, id2.total) {
            let labels = match enumerate_labels(&tree, leaf, j) {
                Ok(l) => l,
                Err(e) => {
                    err = Some(AlgebraError::Label(e.to_string()));
                    return;
                }
            };
            let u: Vec<SqrtRational> = labels
                .iter()
                .map(|k| {
                    product_recoupling(
                        &id1.leaf_spins,
                        &id1.k,
                        id1.total,
                        &id2.leaf_spins,
                        &id2.k,
                        id2.total,
                        leaf,
                        k,
                        j,
                    )
                })
                .collect();
            let up: Vec<SqrtRational> = labels
                .iter()
                .map(|k| {
                    product_recoupling(
                        &id1.leaf_spins,
                        &id1.k_prime,
                        id1.total,
                        &id2.leaf_spins,
                        &id2.k_prime,
                        id2.total,
                        leaf,
                        k,
                        j,
                    )
                })
                .collect();
            for (a, ka) in labels.iter().enumerate() {
                if u[a].is_zero() {
                    continue;
                }
                for (b, kb) in labels.iter().enumerate() {
                    if up[b].is_zero() {
                        continue;
                    }
                    let id = QuasicharId {
                        tree: tree.clone(),
                        leaf_spins: leaf.to_vec(),
                        k: ka.clone(),
                        k_prime: kb.clone(),
                        total: j,
                    };
                    let mut s = SqrtSum::new();
                    s.add_product(&u[a], &up[b]);
                    map.insert(sort_key(&id), (id, s));
                }
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let trace = ProductExpansion::from_map(Convention::Trace, map)?;
    Ok(if convention == Convention::Trace {
        trace
    } else {
        trace.to_convention(convention, &[id1, id2])
    })
}

/// Product of two diagonal `N = 2` quasicharacters:
/// coefficients `[J1][J2][k][k'] {9j}^2` in the trace convention.
pub fn product_n2(id1: &QuasicharId, id2: &QuasicharId) -> Result<ProductExpansion, AlgebraError> {
    if id1.n() != 2 || id2.n() != 2 {
        return Err(AlgebraError::Label(
            "product_n2 needs two-leaf quasicharacters".into(),
        ));
    }
    product_caterpillar(id1, id2, Convention::Trace)
}

/// Product with disjoint arguments: `chi_1(u^(1)) chi_2(u^(2))` as a sum over
/// quasicharacters on the joined tree, with unit trace-convention coefficients.
pub fn product_independent(
    id1: &QuasicharId,
    id2: &QuasicharId,
) -> Result<ProductExpansion, AlgebraError> {
    let tree = id1.tree.join(&id2.tree);
    let mut leaf = id1.leaf_spins.clone();
    leaf.extend_from_slice(&id2.leaf_spins);
    let side = |k: &[HalfInt], j: HalfInt, n: usize| {
        let mut v = k.to_vec();
        if n >= 2 {
            v.push(j);
        }
        v
    };
    let mut terms = Vec::new();
    for j in couplings(id1.total, id2.total) {
        let mut k = side(&id1.k, id1.total, id1.n());
        k.extend(side(&id2.k, id2.total, id2.n()));
        let mut kp = side(&id1.k_prime, id1.total, id1.n());
        kp.extend(side(&id2.k_prime, id2.total, id2.n()));
        let id = QuasicharId::new(tree.clone(), leaf.clone(), k, kp, j)
            .map_err(|e| AlgebraError::Label(e.to_string()))?;
        terms.push((id, SqrtRational::one()));
    }
    Ok(ProductExpansion {
        convention: Convention::Trace,
        terms,
    })
}

/// Orthogonal matrix `R[K][k] = <T_to K j m | T_from k j m>`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecouplingMatrix {
    pub from: CouplingTree,
    pub to: CouplingTree,
    pub leaf_spins: Vec<HalfInt>,
    pub total: HalfInt,
    /// Labels on `to`, indexing rows.
    pub rows: Vec<Vec<HalfInt>>,
    /// Labels on `from`, indexing columns.
    pub cols: Vec<Vec<HalfInt>>,
    pub entries: Vec<Vec<SqrtRational>>,
}

impl RecouplingMatrix {
    pub fn entry(&self, row: &[HalfInt], col: &[HalfInt]) -> Option<&SqrtRational> {
        let r = self.rows.iter().position(|x| x == row)?;
        let c = self.cols.iter().position(|x| x == col)?;
        Some(&self.entries[r][c])
    }

    /// Whether `R R^T = 1` holds exactly.
    pub fn is_orthogonal(&self) -> Result<bool, AlgebraError> {
        for a in 0..self.rows.len() {
            for b in 0..self.rows.len() {
                let mut s = SqrtSum::new();
                for c in 0..self.cols.len() {
                    s.add_product(&self.entries[a][c], &self.entries[b][c]);
                }
                let v = s.to_sqrt_rational()?;
                let expect = if a == b {
                    SqrtRational::one()
                } else {
                    SqrtRational::zero()
                };
                if v != expect {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        self.entries
            .iter()
            .map(|r| r.iter().map(SqrtRational::to_f64).collect())
            .collect()
    }
}

fn overlap(
    a: &BTreeMap<Vec<HalfInt>, SqrtRational>,
    b: &BTreeMap<Vec<HalfInt>, SqrtRational>,
) -> Result<SqrtRational, AlgebraError> {
    let mut s = SqrtSum::new();
    for (ms, ca) in a {
        if let Some(cb) = b.get(ms) {
            s.add_product(ca, cb);
        }
    }
    Ok(s.to_sqrt_rational()?)
}

/// Recoupling matrix between two trees from exact coupled-state overlaps,
/// taken at `m = j` and checked at the next admissible `m`.
pub fn recoupling_matrix(
    from: &CouplingTree,
    to: &CouplingTree,
    leaf_spins: &[HalfInt],
    total: HalfInt,
) -> Result<RecouplingMatrix, AlgebraError> {
    type Key = (CouplingTree, CouplingTree, Vec<HalfInt>, HalfInt);
    static CACHE: OnceLock<Mutex<LruCache<Key, RecouplingMatrix>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| {
        Mutex::new(LruCache::new(
            NonZeroUsize::new(4096).expect("nonzero capacity"),
        ))
    });
    let key = (from.clone(), to.clone(), leaf_spins.to_vec(), total);
    if let Some(r) = cache.lock().get(&key) {
        return Ok(r.clone());
    }
    let r = compute_recoupling_matrix(from, to, leaf_spins, total)?;
    cache.lock().put(key, r.clone());
    Ok(r)
}

fn compute_recoupling_matrix(
    from: &CouplingTree,
    to: &CouplingTree,
    leaf_spins: &[HalfInt],
    total: HalfInt,
) -> Result<RecouplingMatrix, AlgebraError> {
    if from.leaf_count() != to.leaf_count() {
        return Err(AlgebraError::Label(
            "trees have different leaf counts".into(),
        ));
    }
    let lab = |t: &CouplingTree| {
        enumerate_labels(t, leaf_spins, total).map_err(|e| AlgebraError::Label(e.to_string()))
    };
    let rows = lab(to)?;
    let cols = lab(from)?;
    let states = |t: &CouplingTree, labels: &[Vec<HalfInt>], m: HalfInt| {
        labels
            .iter()
            .map(|k| {
                let lt = LabelledTree {
                    tree: t.clone(),
                    leaf_spins: leaf_spins.to_vec(),
                    internal: k.clone(),
                    total,
                };
                coupled_state_coefficients(&lt, m).map_err(|e| AlgebraError::Label(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()
    };
    let at = |m: HalfInt| -> Result<Vec<Vec<SqrtRational>>, AlgebraError> {
        let r = states(to, &rows, m)?;
        let c = states(from, &cols, m)?;
        r.iter()
            .map(|a| c.iter().map(|b| overlap(a, b)).collect())
            .collect()
    };
    let entries = at(total)?;
    if total.twice() > 0 {
        let again = at(total - HalfInt::ONE)?;
        if again != entries {
            return Err(AlgebraError::Label(
                "recoupling overlaps depend on m".into(),
            ));
        }
    }
    Ok(RecouplingMatrix {
        from: from.clone(),
        to: to.clone(),
        leaf_spins: leaf_spins.to_vec(),
        total,
        rows,
        cols,
        entries,
    })
}

/// Rewrite a quasicharacter on another coupling tree.
pub fn change_tree(id: &QuasicharId, to: &CouplingTree) -> Result<ProductExpansion, AlgebraError> {
    let r = recoupling_matrix(&id.tree, to, &id.leaf_spins, id.total)?;
    let col = |k: &[HalfInt]| {
        r.cols
            .iter()
            .position(|c| c == k)
            .expect("label is admissible")
    };
    let (a, b) = (col(&id.k), col(&id.k_prime));
    let mut terms = Vec::new();
    for (i, ki) in r.rows.iter().enumerate() {
        for (l, kl) in r.rows.iter().enumerate() {
            let c = &r.entries[i][a] * &r.entries[l][b];
            if c.is_zero() {
                continue;
            }
            let t = QuasicharId {
                tree: to.clone(),
                leaf_spins: id.leaf_spins.clone(),
                k: ki.clone(),
                k_prime: kl.clone(),
                total: id.total,
            };
            terms.push((t, c));
        }
    }
    Ok(ProductExpansion {
        convention: Convention::Trace,
        terms,
    })
}

/// Product of quasicharacters on arbitrary trees with the same leaves,
/// reported on the caterpillar.
pub fn product(
    id1: &QuasicharId,
    id2: &QuasicharId,
    convention: Convention,
) -> Result<ProductExpansion, AlgebraError> {
    let cat = CouplingTree::caterpillar(id1.n());
    let on_cat = |id: &QuasicharId| -> Result<ProductExpansion, AlgebraError> {
        if id.tree.is_caterpillar() {
            Ok(ProductExpansion {
                convention: Convention::Trace,
                terms: vec![(id.clone(), SqrtRational::one())],
            })
        } else {
            change_tree(id, &cat)
        }
    };
    let (e1, e2) = (on_cat(id1)?, on_cat(id2)?);
    let mut map: BTreeMap<_, (QuasicharId, SqrtSum)> = BTreeMap::new();
    for (a, ca) in &e1.terms {
        for (b, cb) in &e2.terms {
            let w = ca * cb;
            for (t, c) in product_caterpillar(a, b, Convention::Trace)?.terms {
                map.entry(sort_key(&t))
                    .or_insert_with(|| (t.clone(), SqrtSum::new()))
                    .1
                    .add_product(&w, &c);
            }
        }
    }
    let trace = ProductExpansion::from_map(Convention::Trace, map)?;
    Ok(if convention == Convention::Trace {
        trace
    } else {
        trace.to_convention(convention, &[id1, id2])
    })
}

/// Coefficient of `i3` in `chi_{i1} chi_{i2}` on the caterpillar.
pub fn structure_constant(
    i1: &QuasicharId,
    i2: &QuasicharId,
    i3: &QuasicharId,
    convention: Convention,
) -> Result<SqrtRational, AlgebraError> {
    require_caterpillar(i3)?;
    if i3.n() != i1.n() {
        return Ok(SqrtRational::zero());
    }
    let admissible = i1
        .leaf_spins
        .iter()
        .zip(&i2.leaf_spins)
        .zip(&i3.leaf_spins)
        .all(|((&a, &b), &c)| crate::wigner::triangle(a, b, c))
        && crate::wigner::triangle(i1.total, i2.total, i3.total);
    if !admissible {
        return Ok(SqrtRational::zero());
    }
    require_caterpillar(i1)?;
    require_caterpillar(i2)?;
    let u = product_recoupling(
        &i1.leaf_spins,
        &i1.k,
        i1.total,
        &i2.leaf_spins,
        &i2.k,
        i2.total,
        &i3.leaf_spins,
        &i3.k,
        i3.total,
    );
    let up = product_recoupling(
        &i1.leaf_spins,
        &i1.k_prime,
        i1.total,
        &i2.leaf_spins,
        &i2.k_prime,
        i2.total,
        &i3.leaf_spins,
        &i3.k_prime,
        i3.total,
    );
    let c = &u * &up;
    let f =
        scale_square(i1, convention) * scale_square(i2, convention) / scale_square(i3, convention);
    Ok(&c * &SqrtRational::sqrt_of(f))
}
