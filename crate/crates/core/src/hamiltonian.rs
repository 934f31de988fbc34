//! Kogut-Susskind lattice Hamiltonian in the tree gauge, written in the
//! orthonormal quasicharacter basis of the off-tree link variables.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, SymmetricEigen};
use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{product_caterpillar, AlgebraError};
use crate::coupling::{all_ids, coupled_state_coefficients, CouplingTree, QuasicharId};
use crate::exactnum::{ratio, ExactError, HalfInt, SqrtRational, SqrtSum};
use crate::quasichar::Convention;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HamiltonianError {
    #[error("invalid lattice: {0}")]
    Lattice(String),
    #[error("unsupported lattice: {0}")]
    UnsupportedLattice(String),
    #[error("basis of {size} states exceeds the limit of {limit}")]
    Capacity { size: usize, limit: usize },
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Exact(#[from] ExactError),
}

/// A lattice with oriented links, oriented plaquettes and a gauge tree.
///
/// Each plaquette lists its boundary links in order with `+1` when the
/// boundary runs along the link and `-1` against it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub sites: usize,
    pub links: Vec<(usize, usize)>,
    pub plaquettes: Vec<Vec<(usize, i8)>>,
    pub tree: Vec<usize>,
}

/// One letter of a plaquette word after gauge fixing: off-tree link index
/// (leaf position) and whether it enters inverted.
pub type Letter = (usize, bool);

impl LatticeSpec {
    /// A single square plaquette with the standard tree: the off-tree link
    /// is the top edge.
    pub fn single_plaquette() -> Self {
        Self::grid(1, 1)
    }

    /// `nx` by `ny` planar grid with the standard tree: the bottom row of
    /// horizontal links plus every vertical link.
    pub fn grid(nx: usize, ny: usize) -> Self {
        let site = |x: usize, y: usize| y * (nx + 1) + x;
        let mut links = Vec::new();
        let mut h = HashMap::new();
        let mut v = HashMap::new();
        for y in 0..=ny {
            for x in 0..nx {
                h.insert((x, y), links.len());
                links.push((site(x, y), site(x + 1, y)));
            }
        }
        for x in 0..=nx {
            for y in 0..ny {
                v.insert((x, y), links.len());
                links.push((site(x, y), site(x, y + 1)));
            }
        }
        let mut plaquettes = Vec::new();
        for y in 0..ny {
            for x in 0..nx {
                plaquettes.push(vec![
                    (h[&(x, y)], 1),
                    (v[&(x + 1, y)], 1),
                    (h[&(x, y + 1)], -1),
                    (v[&(x, y)], -1),
                ]);
            }
        }
        let mut tree: Vec<usize> = (0..nx).map(|x| h[&(x, 0)]).collect();
        tree.extend(v.values().copied());
        tree.sort_unstable();
        LatticeSpec {
            sites: (nx + 1) * (ny + 1),
            links,
            plaquettes,
            tree,
        }
    }

    /// Named generators: `single-plaquette` and `2x2`.
    pub fn named(name: &str) -> Result<Self, HamiltonianError> {
        match name {
            "single-plaquette" => Ok(Self::single_plaquette()),
            "2x2" => Ok(Self::grid(2, 2)),
            _ => Err(HamiltonianError::Lattice(format!(
                "unknown lattice generator {name:?}"
            ))),
        }
    }

    pub fn with_tree(&self, tree: Vec<usize>) -> Self {
        LatticeSpec {
            tree,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), HamiltonianError> {
        let bad = |s: String| Err(HamiltonianError::Lattice(s));
        if let Some(&(a, b)) = self
            .links
            .iter()
            .find(|&&(a, b)| a >= self.sites || b >= self.sites || a == b)
        {
            return bad(format!("link ({a}, {b}) is not between two distinct sites"));
        }
        for (p, plaq) in self.plaquettes.iter().enumerate() {
            let mut at = None;
            let mut start = None;
            for &(l, s) in plaq {
                let Some(&(a, b)) = self.links.get(l) else {
                    return bad(format!("plaquette {p} uses unknown link {l}"));
                };
                let (from, to) = match s {
                    1 => (a, b),
                    -1 => (b, a),
                    _ => return bad(format!("plaquette {p}: orientation must be +1 or -1")),
                };
                if let Some(prev) = at {
                    if prev != from {
                        return bad(format!("plaquette {p} boundary is not connected"));
                    }
                } else {
                    start = Some(from);
                }
                at = Some(to);
            }
            if at != start || plaq.is_empty() {
                return bad(format!("plaquette {p} boundary is not closed"));
            }
        }
        // spanning tree: sites - 1 links, no cycle
        let mut tree = self.tree.clone();
        tree.sort_unstable();
        tree.dedup();
        if tree.len() != self.tree.len() || tree.iter().any(|&l| l >= self.links.len()) {
            return bad("tree lists an unknown or repeated link".into());
        }
        if tree.len() + 1 != self.sites {
            return bad(format!(
                "tree has {} links, a spanning tree needs {}",
                tree.len(),
                self.sites - 1
            ));
        }
        let mut parent: Vec<usize> = (0..self.sites).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for &l in &tree {
            let (a, b) = self.links[l];
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                return bad(format!("tree link {l} closes a cycle"));
            }
            parent[ra] = rb;
        }
        Ok(())
    }

    /// Off-tree links in increasing index order; position = leaf index.
    pub fn off_tree(&self) -> Vec<usize> {
        (0..self.links.len())
            .filter(|l| !self.tree.contains(l))
            .collect()
    }

    /// Plaquette words in off-tree letters after setting tree links to 1.
    pub fn words(&self) -> Result<Vec<Vec<Letter>>, HamiltonianError> {
        self.validate()?;
        let off = self.off_tree();
        let mut out = Vec::new();
        for (p, plaq) in self.plaquettes.iter().enumerate() {
            let word: Vec<Letter> = plaq
                .iter()
                .filter_map(|&(l, s)| off.iter().position(|&o| o == l).map(|i| (i, s < 0)))
                .collect();
            match word.len() {
                1 | 2 | 4 => {}
                k => {
                    return Err(HamiltonianError::UnsupportedLattice(format!(
                        "plaquette {p} has {k} off-tree links; only 1, 2 or 4 are supported"
                    )))
                }
            }
            out.push(word);
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KineticNormalization {
    /// `g^2 / (2 delta)` times the Casimir.
    #[default]
    Hamiltonian,
    /// `2 g^2 delta` times the Casimir, as in the matrix eigenvalue problem.
    EpH,
}

impl std::str::FromStr for KineticNormalization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "hamiltonian" => Ok(Self::Hamiltonian),
            "ep-h" => Ok(Self::EpH),
            _ => Err(format!("unknown kinetic normalization {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianParams {
    pub g: f64,
    pub delta: f64,
    pub jmax: HalfInt,
    /// Optional cap on the total Casimir eigenvalue of basis states.
    pub casimir_cap: Option<u64>,
    pub kinetic: KineticNormalization,
    /// Drop the Wilson term (strong-coupling limit).
    pub wilson: bool,
    pub max_dim: usize,
}

impl Default for HamiltonianParams {
    fn default() -> Self {
        HamiltonianParams {
            g: 1.0,
            delta: 1.0,
            jmax: HalfInt::ONE,
            casimir_cap: None,
            kinetic: KineticNormalization::Hamiltonian,
            wilson: true,
            max_dim: 2000,
        }
    }
}

impl HamiltonianParams {
    pub fn validate(&self) -> Result<(), HamiltonianError> {
        if !(self.g > 0.0 && self.g.is_finite()) || !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(HamiltonianError::Params(
                "g and delta must be positive".into(),
            ));
        }
        if self.jmax.twice() < 1 {
            return Err(HamiltonianError::Params("jmax must be at least 1/2".into()));
        }
        Ok(())
    }

    fn kinetic_factor(&self) -> f64 {
        match self.kinetic {
            KineticNormalization::Hamiltonian => self.g * self.g / (2.0 * self.delta),
            KineticNormalization::EpH => 2.0 * self.g * self.g * self.delta,
        }
    }
}

/// `sum_i 4 j_i (j_i + 1)`.
pub fn casimir_eigenvalue(spins: &[HalfInt]) -> BigRational {
    spins.iter().fold(ratio(0, 1), |acc, j| {
        let t = BigInt::from(j.twice());
        acc + BigRational::from_integer(&t * (&t + 2))
    })
}

/// Exact `<chi_I | Tr(a_{w_1}^{+-1} ... a_{w_k}^{+-1})>` over Haar measure,
/// with `chi_I` in the orthonormal convention.
///
/// Zero unless `I` carries spin 1/2 exactly on the word's letters.
pub fn wilson_overlap_oracle(
    word: &[Letter],
    id: &QuasicharId,
) -> Result<SqrtRational, HamiltonianError> {
    let n = id.n();
    let half = HalfInt::HALF;
    let mut on_word = vec![false; n];
    for &(l, _) in word {
        if l >= n || on_word[l] {
            return Err(HamiltonianError::UnsupportedLattice(
                "word letters must be distinct leaves".into(),
            ));
        }
        on_word[l] = true;
    }
    let matches = (0..n).all(|i| id.leaf_spins[i] == if on_word[i] { half } else { HalfInt::ZERO });
    if !matches || word.is_empty() {
        return Ok(SqrtRational::zero());
    }
    let kets: Vec<_> = id
        .total
        .magnetic_range()
        .map(|m| coupled_state_coefficients(&id.ket(), m))
        .collect::<Result<_, _>>()
        .map_err(|e| HamiltonianError::Lattice(e.to_string()))?;
    let bras: Vec<_> = id
        .total
        .magnetic_range()
        .map(|m| coupled_state_coefficients(&id.bra(), m))
        .collect::<Result<_, _>>()
        .map_err(|e| HamiltonianError::Lattice(e.to_string()))?;
    let mtotal = |v: &[HalfInt]| v.iter().fold(HalfInt::ZERO, |a, &b| a + b);
    let index_of = |m: HalfInt| ((id.total.twice() - m.twice()) / 2) as usize;
    let k = word.len();
    let mut sum = SqrtSum::new();
    // x_i is the matrix index between letters i-1 and i of the cyclic word
    for bits in 0u32..(1 << k) {
        let x: Vec<HalfInt> = (0..k)
            .map(|i| if bits >> i & 1 == 0 { half } else { -half })
            .collect();
        let mut ms = vec![HalfInt::ZERO; n];
        let mut ns = vec![HalfInt::ZERO; n];
        let mut sign = 1;
        for (i, &(leaf, inv)) in word.iter().enumerate() {
            let (a, b) = (x[i], x[(i + 1) % k]);
            if inv {
                // D(a^{-1})_{ab} = conj D(a)_{ba} = (-1)^{b-a} D(a)_{-b,-a}
                ns[leaf] = -b;
                ms[leaf] = -a;
                if ((b - a).twice() / 2) % 2 != 0 {
                    sign = -sign;
                }
            } else {
                ns[leaf] = a;
                ms[leaf] = b;
            }
        }
        let m = mtotal(&ms);
        if m != mtotal(&ns) || m.twice().abs() > id.total.twice() {
            continue;
        }
        let i = index_of(m);
        let (Some(ck), Some(cb)) = (kets[i].get(&ms), bras[i].get(&ns)) else {
            continue;
        };
        let term = ck * cb;
        sum.push(&if sign < 0 { -term } else { term });
    }
    let s = sum.to_sqrt_rational()?;
    // sqrt(d_leaves / d_j) / 2^k
    let norm = SqrtRational::sqrt_of(BigRational::new(
        BigInt::from(1),
        BigInt::from(1u64 << k) * BigInt::from(id.total.dim()),
    ));
    Ok(&s * &norm)
}

/// Expansion of one plaquette trace in the caterpillar basis on `n` links.
pub fn plaquette_expansion(
    word: &[Letter],
    n: usize,
) -> Result<Vec<(QuasicharId, SqrtRational)>, HamiltonianError> {
    let mut spins = vec![HalfInt::ZERO; n];
    for &(l, _) in word {
        spins[l] = HalfInt::HALF;
    }
    let mut out = Vec::new();
    for id in all_ids(&CouplingTree::caterpillar(n), &spins) {
        let c = wilson_overlap_oracle(word, &id)?;
        if !c.is_zero() {
            out.push((id, c));
        }
    }
    Ok(out)
}

/// `W^I` such that the Wilson term equals `sum_I W^I (chi_I + conj chi_I)`.
pub fn wilson_expansion(
    lattice: &LatticeSpec,
) -> Result<Vec<(QuasicharId, SqrtRational)>, HamiltonianError> {
    let n = lattice.off_tree().len();
    let mut acc: BTreeMap<String, (QuasicharId, SqrtSum)> = BTreeMap::new();
    for word in lattice.words()? {
        for (id, c) in plaquette_expansion(&word, n)? {
            acc.entry(id.label())
                .or_insert_with(|| (id.clone(), SqrtSum::new()))
                .1
                .push(&c);
        }
    }
    let mut out = Vec::new();
    for (_, (id, s)) in acc {
        let c = s.to_sqrt_rational()?;
        if !c.is_zero() {
            out.push((id, c));
        }
    }
    Ok(out)
}

/// Truncated basis: all caterpillar quasicharacters with link spins
/// `<= jmax` and, if set, Casimir eigenvalue `<= casimir_cap`.
pub fn basis(n: usize, params: &HamiltonianParams) -> Result<Vec<QuasicharId>, HamiltonianError> {
    let tree = CouplingTree::caterpillar(n.max(1));
    let mut out = Vec::new();
    let mut spins = vec![HalfInt::ZERO; n];
    let cap = params
        .casimir_cap
        .map(|c| BigRational::from_integer(c.into()));
    fn rec(
        i: usize,
        spins: &mut Vec<HalfInt>,
        jmax: HalfInt,
        cap: &Option<BigRational>,
        tree: &CouplingTree,
        out: &mut Vec<QuasicharId>,
        limit: usize,
    ) -> Result<(), HamiltonianError> {
        if i == spins.len() {
            if cap.as_ref().is_some_and(|c| casimir_eigenvalue(spins) > *c) {
                return Ok(());
            }
            out.extend(all_ids(tree, spins));
            if out.len() > limit {
                return Err(HamiltonianError::Capacity {
                    size: out.len(),
                    limit,
                });
            }
            return Ok(());
        }
        for t in 0..=jmax.twice() {
            spins[i] = HalfInt::from_twice(t);
            rec(i + 1, spins, jmax, cap, tree, out, limit)?;
        }
        Ok(())
    }
    if n == 0 {
        return Err(HamiltonianError::Lattice("no off-tree links".into()));
    }
    rec(
        0,
        &mut spins,
        params.jmax,
        &cap,
        &tree,
        &mut out,
        params.max_dim,
    )?;
    Ok(out)
}

/// Assembled Hamiltonian matrix with its basis.
#[derive(Clone, Debug)]
pub struct Assembled {
    pub basis: Vec<QuasicharId>,
    pub matrix: DMatrix<f64>,
    pub casimir: Vec<BigRational>,
}

/// `M_KJ = kappa eps_J delta_KJ - (1/(g^2 delta)) sum_I W^I (C^K_IJ + C^J_IK)`.
pub fn assemble(
    lattice: &LatticeSpec,
    params: &HamiltonianParams,
) -> Result<Assembled, HamiltonianError> {
    params.validate()?;
    let n = lattice.off_tree().len();
    let basis = basis(n, params)?;
    let index: HashMap<String, usize> = basis
        .iter()
        .enumerate()
        .map(|(i, id)| (id.label(), i))
        .collect();
    let dim = basis.len();
    let casimir: Vec<BigRational> = basis
        .iter()
        .map(|id| casimir_eigenvalue(&id.leaf_spins))
        .collect();
    let kappa = params.kinetic_factor();
    let mut m = DMatrix::from_fn(dim, dim, |r, c| {
        if r == c {
            kappa * crate::exactnum::rational_to_f64(&casimir[r])
        } else {
            0.0
        }
    });
    if params.wilson {
        let w = wilson_expansion(lattice)?;
        // column J of A: sum_I W^I C^K_IJ
        let cols: Vec<Vec<(usize, f64)>> = basis
            .par_iter()
            .map(|j| -> Result<Vec<(usize, f64)>, HamiltonianError> {
                let mut col = Vec::new();
                for (i, wi) in &w {
                    for (k, c) in product_caterpillar(i, j, Convention::Orthonormal)?.terms {
                        if let Some(&row) = index.get(&k.label()) {
                            col.push((row, wi.to_f64() * c.to_f64()));
                        }
                    }
                }
                Ok(col)
            })
            .collect::<Result<_, _>>()?;
        let mut a = DMatrix::<f64>::zeros(dim, dim);
        for (j, col) in cols.into_iter().enumerate() {
            for (k, v) in col {
                a[(k, j)] += v;
            }
        }
        let scale = 1.0 / (params.g * params.g * params.delta);
        m -= (&a + a.transpose()) * scale;
    }
    Ok(Assembled {
        basis,
        matrix: m,
        casimir,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// `||M v - lambda v|| / ||M||` per eigenpair.
    pub residuals: Vec<f64>,
    /// Largest `|v_a . v_b - delta_ab|` among the returned eigenvectors.
    pub orthogonality: f64,
}

/// The `k` lowest eigenvalues of a symmetric matrix.
pub fn spectrum(matrix: &DMatrix<f64>, k: usize) -> Spectrum {
    let eig = SymmetricEigen::new(matrix.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order.truncate(k);
    let norm = matrix.norm().max(f64::MIN_POSITIVE);
    let mut residuals = Vec::new();
    let mut eigenvalues = Vec::new();
    for &i in &order {
        let v = eig.eigenvectors.column(i);
        let lambda = eig.eigenvalues[i];
        residuals.push((matrix * v - v * lambda).norm() / norm);
        eigenvalues.push(lambda);
    }
    let mut orthogonality: f64 = 0.0;
    for (a, &i) in order.iter().enumerate() {
        for &j in &order[a..] {
            let d = eig.eigenvectors.column(i).dot(&eig.eigenvectors.column(j))
                - if i == j { 1.0 } else { 0.0 };
            orthogonality = orthogonality.max(d.abs());
        }
    }
    Spectrum {
        eigenvalues,
        residuals,
        orthogonality,
    }
}
