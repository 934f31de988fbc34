//! Binary coupling trees and their admissible labels.
//!
//! A tree over `N` numbered leaves is written as nested parentheses, e.g.
//! `(((1 2) 3) 4)` for the caterpillar. Internal edges other than the root
//! are numbered `k_1 .. k_{N-2}` in post-order (children before parents,
//! left subtree first).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::exactnum::{HalfInt, SqrtRational};
use crate::wigner::{cg, couplings, triangle};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CouplingError {
    #[error("cannot parse tree {0:?}: {1}")]
    Parse(String, String),
    #[error("label error: {0}")]
    Label(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    /// Leaf with zero-based index.
    Leaf(usize),
    Pair(Box<Node>, Box<Node>),
}

impl Node {
    fn leaves_into(&self, out: &mut Vec<usize>) {
        match self {
            Node::Leaf(i) => out.push(*i),
            Node::Pair(a, b) => {
                a.leaves_into(out);
                b.leaves_into(out);
            }
        }
    }

    fn shifted(&self, by: usize) -> Node {
        match self {
            Node::Leaf(i) => Node::Leaf(i + by),
            Node::Pair(a, b) => Node::Pair(Box::new(a.shifted(by)), Box::new(b.shifted(by))),
        }
    }

    fn pair(a: Node, b: Node) -> Node {
        Node::Pair(Box::new(a), Box::new(b))
    }
}

/// A child of an internal vertex: a leaf or an earlier internal vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Child {
    Leaf(usize),
    Internal(usize),
}

/// Planted binary tree with `N` numbered leaves.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CouplingTree {
    root: Node,
    n: usize,
    /// Internal vertices in post-order; the root is last.
    vertices: Vec<(Child, Child)>,
}

impl CouplingTree {
    pub fn new(root: Node) -> Result<Self, CouplingError> {
        let mut leaves = Vec::new();
        root.leaves_into(&mut leaves);
        let n = leaves.len();
        let mut sorted = leaves.clone();
        sorted.sort_unstable();
        if sorted != (0..n).collect::<Vec<_>>() {
            return Err(CouplingError::Parse(
                render(&root),
                "leaves must be exactly 1..N, each once".into(),
            ));
        }
        let mut vertices = Vec::new();
        fn walk(node: &Node, out: &mut Vec<(Child, Child)>) -> Child {
            match node {
                Node::Leaf(i) => Child::Leaf(*i),
                Node::Pair(a, b) => {
                    let l = walk(a, out);
                    let r = walk(b, out);
                    out.push((l, r));
                    Child::Internal(out.len() - 1)
                }
            }
        }
        walk(&root, &mut vertices);
        Ok(CouplingTree { root, n, vertices })
    }

    /// The standard left-to-right chain `(((1 2) 3) ... N)`.
    pub fn caterpillar(n: usize) -> Self {
        assert!(n >= 1, "a tree needs at least one leaf");
        let mut node = Node::Leaf(0);
        for i in 1..n {
            node = Node::pair(node, Node::Leaf(i));
        }
        CouplingTree::new(node).expect("caterpillar is well formed")
    }

    pub fn cherry() -> Self {
        Self::caterpillar(2)
    }

    pub fn leaf_count(&self) -> usize {
        self.n
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Internal vertices in post-order, root last. Empty for a single leaf.
    pub fn vertices(&self) -> &[(Child, Child)] {
        &self.vertices
    }

    /// Number of internal labels `k`, i.e. `N - 2` (zero for `N <= 2`).
    pub fn internal_count(&self) -> usize {
        self.n.saturating_sub(2)
    }

    pub fn is_caterpillar(&self) -> bool {
        *self == Self::caterpillar(self.n)
    }

    /// Leaf indices in left-to-right order.
    pub fn leaf_order(&self) -> Vec<usize> {
        let mut v = Vec::new();
        self.root.leaves_into(&mut v);
        v
    }

    /// Spins on every internal vertex (post-order, root last) given leaf
    /// spins, internal labels and the total.
    pub fn vertex_spins(&self, k: &[HalfInt], total: HalfInt) -> Vec<HalfInt> {
        if self.vertices.is_empty() {
            return Vec::new();
        }
        let mut v = k.to_vec();
        v.push(total);
        v
    }

    /// The join `T1 . T2`: a new root over both trees, leaves concatenated.
    pub fn join(&self, other: &CouplingTree) -> CouplingTree {
        let root = Node::pair(self.root.clone(), other.root.shifted(self.n));
        CouplingTree::new(root).expect("join of valid trees")
    }

    /// Leaf duplication: every leaf `i` becomes a cherry `(i i')`.
    ///
    /// Leaves of the result are ordered `1, 1', 2, 2', ...`.
    pub fn thread(&self) -> CouplingTree {
        fn dup(node: &Node) -> Node {
            match node {
                Node::Leaf(i) => Node::pair(Node::Leaf(2 * i), Node::Leaf(2 * i + 1)),
                Node::Pair(a, b) => Node::pair(dup(a), dup(b)),
            }
        }
        CouplingTree::new(dup(&self.root)).expect("threaded tree is valid")
    }
}

fn render(node: &Node) -> String {
    match node {
        Node::Leaf(i) => (i + 1).to_string(),
        Node::Pair(a, b) => format!("({} {})", render(a), render(b)),
    }
}

impl fmt::Display for CouplingTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(&self.root))
    }
}

impl FromStr for CouplingTree {
    type Err = CouplingError;

    /// Parses `(((1 2) 3) 4)`, `((1,2),(3,4))` or `caterpillar:N`.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let fail = |why: &str| CouplingError::Parse(text.to_string(), why.to_string());
        let t = text.trim();
        if let Some(n) = t.strip_prefix("caterpillar:") {
            let n: usize = n.trim().parse().map_err(|_| fail("bad leaf count"))?;
            if n == 0 {
                return Err(fail("leaf count must be positive"));
            }
            return Ok(CouplingTree::caterpillar(n));
        }
        let tokens = tokenize(t).ok_or_else(|| fail("unexpected character"))?;
        let mut pos = 0;
        let root = parse_node(&tokens, &mut pos).ok_or_else(|| fail("malformed nesting"))?;
        if pos != tokens.len() {
            return Err(fail("trailing input"));
        }
        CouplingTree::new(root)
    }
}

#[derive(Debug, PartialEq)]
enum Tok {
    Open,
    Close,
    Num(usize),
}

fn tokenize(s: &str) -> Option<Vec<Tok>> {
    let mut out = Vec::new();
    let mut chars = s.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' => {
                out.push(Tok::Open);
                chars.next();
            }
            ')' => {
                out.push(Tok::Close);
                chars.next();
            }
            ' ' | ',' | '\t' => {
                chars.next();
            }
            '0'..='9' => {
                let mut n = 0usize;
                while let Some(d) = chars.peek().and_then(|c| c.to_digit(10)) {
                    n = n.checked_mul(10)?.checked_add(d as usize)?;
                    chars.next();
                }
                out.push(Tok::Num(n));
            }
            _ => return None,
        }
    }
    Some(out)
}

fn parse_node(tokens: &[Tok], pos: &mut usize) -> Option<Node> {
    match tokens.get(*pos)? {
        Tok::Num(n) => {
            *pos += 1;
            n.checked_sub(1).map(Node::Leaf)
        }
        Tok::Open => {
            *pos += 1;
            let a = parse_node(tokens, pos)?;
            if tokens.get(*pos) == Some(&Tok::Close) {
                // "(3)" is just a parenthesized leaf or subtree
                *pos += 1;
                return Some(a);
            }
            let b = parse_node(tokens, pos)?;
            if tokens.get(*pos)? != &Tok::Close {
                return None;
            }
            *pos += 1;
            Some(Node::pair(a, b))
        }
        Tok::Close => None,
    }
}

impl Serialize for CouplingTree {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for CouplingTree {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// All admissible internal-label sequences `k` on `tree` with leaf spins
/// `leaf_spins` and total spin `total`, in lexicographic order.
pub fn enumerate_labels(
    tree: &CouplingTree,
    leaf_spins: &[HalfInt],
    total: HalfInt,
) -> Result<Vec<Vec<HalfInt>>, CouplingError> {
    if leaf_spins.len() != tree.leaf_count() {
        return Err(CouplingError::Label(format!(
            "{} leaf spins for a tree with {} leaves",
            leaf_spins.len(),
            tree.leaf_count()
        )));
    }
    if let Some(bad) = leaf_spins.iter().chain([&total]).find(|s| s.twice() < 0) {
        return Err(CouplingError::Label(format!("negative spin {bad}")));
    }
    let vertices = tree.vertices();
    if vertices.is_empty() {
        return Ok(if leaf_spins[0] == total {
            vec![vec![]]
        } else {
            vec![]
        });
    }
    let mut out = Vec::new();
    let mut spins = Vec::with_capacity(vertices.len());
    fn spin_of(c: Child, leaf: &[HalfInt], spins: &[HalfInt]) -> HalfInt {
        match c {
            Child::Leaf(i) => leaf[i],
            Child::Internal(k) => spins[k],
        }
    }
    fn rec(
        vertices: &[(Child, Child)],
        leaf: &[HalfInt],
        total: HalfInt,
        spins: &mut Vec<HalfInt>,
        out: &mut Vec<Vec<HalfInt>>,
    ) {
        let idx = spins.len();
        let (l, r) = vertices[idx];
        let (a, b) = (spin_of(l, leaf, spins), spin_of(r, leaf, spins));
        if idx + 1 == vertices.len() {
            if triangle(a, b, total) {
                out.push(spins.clone());
            }
            return;
        }
        for c in couplings(a, b) {
            spins.push(c);
            rec(vertices, leaf, total, spins, out);
            spins.pop();
        }
    }
    rec(vertices, leaf_spins, total, &mut spins, &mut out);
    Ok(out)
}

/// Multiplicity of spin `total` in the tensor product of `leaf_spins`.
pub fn multiplicity(leaf_spins: &[HalfInt], total: HalfInt) -> usize {
    if leaf_spins.is_empty() {
        return usize::from(total == HalfInt::ZERO);
    }
    // distribution of intermediate spins along the caterpillar
    let mut dist: BTreeMap<HalfInt, usize> = BTreeMap::from([(leaf_spins[0], 1)]);
    for &s in &leaf_spins[1..] {
        let mut next = BTreeMap::new();
        for (&a, &count) in &dist {
            for c in couplings(a, s) {
                *next.entry(c).or_insert(0) += count;
            }
        }
        dist = next;
    }
    dist.get(&total).copied().unwrap_or(0)
}

/// Every total spin reachable from `leaf_spins`, ascending.
pub fn total_spins(leaf_spins: &[HalfInt]) -> Vec<HalfInt> {
    let hi: i32 = leaf_spins.iter().map(|s| s.twice()).sum();
    (0..=hi)
        .rev()
        .filter(|t| (hi - t) % 2 == 0)
        .map(HalfInt::from_twice)
        .filter(|&j| multiplicity(leaf_spins, j) > 0)
        .rev()
        .collect()
}

/// A tree with leaf spins, internal labels and total spin.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelledTree {
    pub tree: CouplingTree,
    pub leaf_spins: Vec<HalfInt>,
    pub internal: Vec<HalfInt>,
    pub total: HalfInt,
}

impl LabelledTree {
    pub fn new(
        tree: CouplingTree,
        leaf_spins: Vec<HalfInt>,
        internal: Vec<HalfInt>,
        total: HalfInt,
    ) -> Result<Self, CouplingError> {
        let lt = LabelledTree {
            tree,
            leaf_spins,
            internal,
            total,
        };
        lt.validate()?;
        Ok(lt)
    }

    pub fn validate(&self) -> Result<(), CouplingError> {
        let n = self.tree.leaf_count();
        if self.leaf_spins.len() != n {
            return Err(CouplingError::Label(format!(
                "expected {n} leaf spins, got {}",
                self.leaf_spins.len()
            )));
        }
        if self.internal.len() != self.tree.internal_count() {
            return Err(CouplingError::Label(format!(
                "expected {} internal labels, got {}",
                self.tree.internal_count(),
                self.internal.len()
            )));
        }
        if let Some(bad) = self
            .leaf_spins
            .iter()
            .chain(&self.internal)
            .chain([&self.total])
            .find(|s| s.twice() < 0)
        {
            return Err(CouplingError::Label(format!("negative spin {bad}")));
        }
        if n == 1 {
            if self.leaf_spins[0] != self.total {
                return Err(CouplingError::Label(
                    "single leaf must carry the total spin".into(),
                ));
            }
            return Ok(());
        }
        let spins = self.vertex_spins();
        for (v, &(l, r)) in self.tree.vertices().iter().enumerate() {
            let (a, b) = (self.child_spin(l, &spins), self.child_spin(r, &spins));
            if !triangle(a, b, spins[v]) {
                return Err(CouplingError::Label(format!(
                    "vertex {} couples {a} and {b} to inadmissible {}",
                    v + 1,
                    spins[v]
                )));
            }
        }
        Ok(())
    }

    /// Spins on internal vertices, root last.
    pub fn vertex_spins(&self) -> Vec<HalfInt> {
        self.tree.vertex_spins(&self.internal, self.total)
    }

    fn child_spin(&self, c: Child, spins: &[HalfInt]) -> HalfInt {
        match c {
            Child::Leaf(i) => self.leaf_spins[i],
            Child::Internal(k) => spins[k],
        }
    }

    /// Product of leaf dimensions.
    pub fn leaf_dim(&self) -> usize {
        self.leaf_spins.iter().map(|s| s.dim() as usize).product()
    }
}

/// Coefficients `<m_1 .. m_N | T(j, k) total m>` keyed by the leaf magnetic
/// tuple (leaf index order). Only nonzero entries are stored.
pub fn coupled_state_coefficients(
    labelled: &LabelledTree,
    m: HalfInt,
) -> Result<BTreeMap<Vec<HalfInt>, SqrtRational>, CouplingError> {
    labelled.validate()?;
    let j = labelled.total;
    if m.twice().abs() > j.twice() || (j.twice() - m.twice()) % 2 != 0 {
        return Err(CouplingError::Label(format!(
            "magnetic label {m} invalid for spin {j}"
        )));
    }
    let n = labelled.tree.leaf_count();
    let spins = labelled.vertex_spins();
    // partial states: list of (assigned leaf m's, coefficient)
    type Partial = Vec<(Vec<(usize, HalfInt)>, SqrtRational)>;
    fn expand(lt: &LabelledTree, spins: &[HalfInt], c: Child, m: HalfInt) -> Partial {
        match c {
            Child::Leaf(i) => vec![(vec![(i, m)], SqrtRational::one())],
            Child::Internal(v) => {
                let (l, r) = lt.tree.vertices()[v];
                let a = lt.child_spin(l, spins);
                let b = lt.child_spin(r, spins);
                let mut out = Vec::new();
                for ma in a.magnetic_range() {
                    let mb = m - ma;
                    if mb.twice().abs() > b.twice() {
                        continue;
                    }
                    let c = cg(a, ma, b, mb, spins[v], m);
                    if c.is_zero() {
                        continue;
                    }
                    let left = expand(lt, spins, l, ma);
                    let right = expand(lt, spins, r, mb);
                    for (lm, lc) in &left {
                        for (rm, rc) in &right {
                            let mut ms = lm.clone();
                            ms.extend_from_slice(rm);
                            out.push((ms, &(&c * lc) * rc));
                        }
                    }
                }
                out
            }
        }
    }
    let top = if n == 1 {
        Child::Leaf(0)
    } else {
        Child::Internal(spins.len() - 1)
    };
    let mut out = BTreeMap::new();
    for (ms, coeff) in expand(labelled, &spins, top, m) {
        let mut tuple = vec![HalfInt::ZERO; n];
        for (i, mi) in ms {
            tuple[i] = mi;
        }
        out.insert(tuple, coeff);
    }
    Ok(out)
}

/// Full label set of one quasicharacter: a tree with leaf spins and total,
/// and two internal label lists `k` (ket side) and `k'` (bra side).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuasicharId {
    pub tree: CouplingTree,
    pub leaf_spins: Vec<HalfInt>,
    pub k: Vec<HalfInt>,
    pub k_prime: Vec<HalfInt>,
    pub total: HalfInt,
}

impl QuasicharId {
    pub fn new(
        tree: CouplingTree,
        leaf_spins: Vec<HalfInt>,
        k: Vec<HalfInt>,
        k_prime: Vec<HalfInt>,
        total: HalfInt,
    ) -> Result<Self, CouplingError> {
        let id = QuasicharId {
            tree,
            leaf_spins,
            k,
            k_prime,
            total,
        };
        id.ket().validate()?;
        id.bra().validate()?;
        Ok(id)
    }

    /// A diagonal label set on the caterpillar.
    pub fn caterpillar(
        leaf_spins: Vec<HalfInt>,
        k: Vec<HalfInt>,
        total: HalfInt,
    ) -> Result<Self, CouplingError> {
        let tree = CouplingTree::caterpillar(leaf_spins.len());
        Self::new(tree, leaf_spins, k.clone(), k, total)
    }

    pub fn n(&self) -> usize {
        self.leaf_spins.len()
    }

    pub fn is_diagonal(&self) -> bool {
        self.k == self.k_prime
    }

    pub fn ket(&self) -> LabelledTree {
        LabelledTree {
            tree: self.tree.clone(),
            leaf_spins: self.leaf_spins.clone(),
            internal: self.k.clone(),
            total: self.total,
        }
    }

    pub fn bra(&self) -> LabelledTree {
        LabelledTree {
            internal: self.k_prime.clone(),
            ..self.ket()
        }
    }

    /// Product of leaf dimensions `d_{j_1} ... d_{j_N}`.
    pub fn leaf_dim(&self) -> usize {
        self.ket().leaf_dim()
    }

    /// Compact label such as `2_(3/2,1/2)` or `2_(1/2,1/2,1/2,1/2),(1,3/2),(1,3/2)`.
    pub fn label(&self) -> String {
        let list = |v: &[HalfInt]| {
            v.iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut s = format!("{}_({})", self.total, list(&self.leaf_spins));
        if !self.k.is_empty() {
            s.push_str(&format!(",({}),({})", list(&self.k), list(&self.k_prime)));
        }
        s
    }
}

/// Every quasicharacter label set on `tree` with the given leaf spins.
pub fn all_ids(tree: &CouplingTree, leaf_spins: &[HalfInt]) -> Vec<QuasicharId> {
    let mut out = Vec::new();
    for total in total_spins(leaf_spins) {
        let labels = enumerate_labels(tree, leaf_spins, total).unwrap_or_default();
        for k in &labels {
            for kp in &labels {
                out.push(QuasicharId {
                    tree: tree.clone(),
                    leaf_spins: leaf_spins.to_vec(),
                    k: k.clone(),
                    k_prime: kp.clone(),
                    total,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::SqrtSum;
    use nalgebra::{DMatrix, SymmetricEigen};
    use proptest::prelude::*;

    fn hv(t: i32) -> HalfInt {
        HalfInt::from_twice(t)
    }

    /// Multiplicity of total spin `j` read off the spectrum of the total
    /// Casimir on the dense product space.
    fn casimir_multiplicity(leaf: &[i32], j: i32) -> usize {
        let dims: Vec<usize> = leaf.iter().map(|&t| (t + 1) as usize).collect();
        let total: usize = dims.iter().product();
        let mut j2 = DMatrix::<f64>::zeros(total, total);
        // J^2 = Jz^2 + (J+J- + J-J+)/2 with real ladder matrices
        let mut jz = DMatrix::<f64>::zeros(total, total);
        let mut jp = DMatrix::<f64>::zeros(total, total);
        let mut stride = total;
        for (f, &d) in dims.iter().enumerate() {
            stride /= d;
            let jj = f64::from(leaf[f]) / 2.0;
            for idx in 0..total {
                let pos = (idx / stride) % d;
                let m = jj - pos as f64;
                jz[(idx, idx)] += m;
                if pos > 0 {
                    let up = idx - stride;
                    jp[(up, idx)] += (jj * (jj + 1.0) - m * (m + 1.0)).sqrt();
                }
            }
        }
        let jm = jp.transpose();
        j2 += &jz * &jz + (&jp * &jm + &jm * &jp) * 0.5;
        let eig = SymmetricEigen::new(j2);
        let target = f64::from(j) / 2.0 * (f64::from(j) / 2.0 + 1.0);
        let count = eig
            .eigenvalues
            .iter()
            .filter(|&&e| (e - target).abs() < 1e-8)
            .count();
        count / (j + 1) as usize
    }

    #[test]
    fn parse_and_display() {
        let t: CouplingTree = "(((1 2) 3) 4)".parse().unwrap();
        assert_eq!(t, CouplingTree::caterpillar(4));
        assert!(t.is_caterpillar());
        let b: CouplingTree = "((1,2),(3,4))".parse().unwrap();
        assert_eq!(b.to_string(), "((1 2) (3 4))");
        assert_eq!(
            "caterpillar:3".parse::<CouplingTree>().unwrap().to_string(),
            "((1 2) 3)"
        );
        assert_eq!("1".parse::<CouplingTree>().unwrap().leaf_count(), 1);
        for bad in ["(1 2", "(1 1)", "(1 3)", "((1 2) 3))", "(0 1)", "x"] {
            assert!(bad.parse::<CouplingTree>().is_err(), "{bad}");
        }
    }

    #[test]
    fn enumerate_examples() {
        let half = hv(1);
        let cat2 = CouplingTree::caterpillar(2);
        assert_eq!(
            enumerate_labels(&cat2, &[half, half], hv(2)).unwrap(),
            vec![Vec::<HalfInt>::new()]
        );
        let cat4 = CouplingTree::caterpillar(4);
        let zero = enumerate_labels(&cat4, &[half; 4], hv(0)).unwrap();
        assert_eq!(zero, vec![vec![hv(0), hv(1)], vec![hv(2), hv(1)]]);
        assert_eq!(casimir_multiplicity(&[1, 1, 1, 1], 0), 2);
        assert_eq!(enumerate_labels(&cat4, &[half; 4], hv(2)).unwrap().len(), 3);
        assert_eq!(casimir_multiplicity(&[1, 1, 1, 1], 2), 3);
        assert!(enumerate_labels(&cat4, &[half; 4], hv(6))
            .unwrap()
            .is_empty());
        assert!(enumerate_labels(&cat4, &[half; 3], hv(1)).is_err());
    }

    #[test]
    fn multiplicity_examples() {
        assert_eq!(multiplicity(&[hv(1); 3], hv(1)), 2);
        assert_eq!(casimir_multiplicity(&[1, 1, 1], 1), 2);
        for j1 in 0..5 {
            assert_eq!(multiplicity(&[hv(j1), hv(0), hv(0)], hv(j1)), 1);
        }
        let catalan: usize = total_spins(&[hv(1); 4])
            .into_iter()
            .map(|j| multiplicity(&[hv(1); 4], j).pow(2))
            .sum();
        assert_eq!(catalan, 14);
    }

    fn leaf_sets(max_dim: usize) -> Vec<Vec<i32>> {
        let mut out = Vec::new();
        fn rec(cur: &mut Vec<i32>, prod: usize, max: usize, out: &mut Vec<Vec<i32>>) {
            if !cur.is_empty() {
                out.push(cur.clone());
            }
            if cur.len() == 4 {
                return;
            }
            for t in 0..4 {
                let p = prod * (t as usize + 1);
                if p <= max {
                    cur.push(t);
                    rec(cur, p, max, out);
                    cur.pop();
                }
            }
        }
        rec(&mut Vec::new(), 1, max_dim, &mut out);
        out
    }

    fn trees(n: usize) -> Vec<CouplingTree> {
        match n {
            1 => vec!["1".parse().unwrap()],
            2 => vec!["(1 2)".parse().unwrap()],
            3 => vec![
                "((1 2) 3)".parse().unwrap(),
                "(1 (2 3))".parse().unwrap(),
                "((1 3) 2)".parse().unwrap(),
            ],
            _ => vec![
                "(((1 2) 3) 4)".parse().unwrap(),
                "((1 2) (3 4))".parse().unwrap(),
                "(1 (2 (3 4)))".parse().unwrap(),
                "((1 (2 3)) 4)".parse().unwrap(),
                "((1 3) (2 4))".parse().unwrap(),
            ],
        }
    }

    #[test]
    fn enumeration_matches_casimir_spectrum() {
        for leaf in leaf_sets(64) {
            let spins: Vec<HalfInt> = leaf.iter().map(|&t| hv(t)).collect();
            let hi: i32 = leaf.iter().sum();
            for j in (0..=hi).rev().step_by(2) {
                let expect = casimir_multiplicity(&leaf, j);
                assert_eq!(multiplicity(&spins, hv(j)), expect, "{leaf:?} j={j}");
                for t in trees(leaf.len()) {
                    let labels = enumerate_labels(&t, &spins, hv(j)).unwrap();
                    assert_eq!(labels.len(), expect, "{leaf:?} {t} j={j}");
                    let mut sorted = labels.clone();
                    sorted.sort();
                    assert_eq!(sorted, labels);
                }
            }
        }
    }

    #[test]
    fn join_and_thread() {
        let cherry = CouplingTree::cherry();
        assert_eq!(cherry.join(&cherry).to_string(), "((1 2) (3 4))");
        assert_eq!(
            CouplingTree::caterpillar(2).join(&CouplingTree::caterpillar(1)),
            CouplingTree::caterpillar(3)
        );
        assert_eq!(cherry.thread().to_string(), "((1 2) (3 4))");
        assert_eq!(CouplingTree::caterpillar(1).thread(), cherry);
        let t: CouplingTree = "((1 3) 2)".parse().unwrap();
        assert_eq!(t.thread().to_string(), "(((1 2) (5 6)) (3 4))");
        assert_eq!(t.thread().leaf_count(), 6);
        assert_eq!(t.join(&cherry).leaf_count(), 5);
    }

    #[test]
    fn coupled_state_examples() {
        let half = hv(1);
        let one =
            LabelledTree::new(CouplingTree::caterpillar(1), vec![hv(3)], vec![], hv(3)).unwrap();
        for m in hv(3).magnetic_range() {
            let c = coupled_state_coefficients(&one, m).unwrap();
            assert_eq!(c.len(), 1);
            assert_eq!(c[&vec![m]], SqrtRational::one());
        }
        let two =
            LabelledTree::new(CouplingTree::cherry(), vec![hv(2), hv(3)], vec![], hv(5)).unwrap();
        let c = coupled_state_coefficients(&two, hv(5)).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[&vec![hv(2), hv(3)]], SqrtRational::one());

        let three = LabelledTree::new(
            CouplingTree::caterpillar(3),
            vec![half; 3],
            vec![hv(2)],
            half,
        )
        .unwrap();
        let c = coupled_state_coefficients(&three, half).unwrap();
        for (ms, v) in &c {
            let m12 = ms[0] + ms[1];
            let expect =
                cg(half, ms[0], half, ms[1], hv(2), m12) * cg(hv(2), m12, half, ms[2], half, half);
            assert_eq!(*v, expect);
        }
        assert_eq!(c.len(), 3);
        assert!(coupled_state_coefficients(&three, hv(3)).is_err());
    }

    #[test]
    fn coupled_states_are_orthonormal() {
        for leaf in [
            vec![1, 1, 1],
            vec![2, 1, 2],
            vec![1, 1, 1, 1],
            vec![2, 2, 1, 1],
        ] {
            let spins: Vec<HalfInt> = leaf.iter().map(|&t| hv(t)).collect();
            for tree in trees(leaf.len()) {
                let mut states = Vec::new();
                for j in total_spins(&spins) {
                    for k in enumerate_labels(&tree, &spins, j).unwrap() {
                        let lt = LabelledTree::new(tree.clone(), spins.clone(), k, j).unwrap();
                        for m in j.magnetic_range() {
                            states.push(coupled_state_coefficients(&lt, m).unwrap());
                        }
                    }
                }
                let dim: usize = leaf.iter().map(|&t| (t + 1) as usize).product();
                assert_eq!(states.len(), dim);
                for (a, sa) in states.iter().enumerate() {
                    for (b, sb) in states.iter().enumerate() {
                        let mut acc = SqrtSum::new();
                        for (ms, va) in sa {
                            if let Some(vb) = sb.get(ms) {
                                acc.add_product(va, vb);
                            }
                        }
                        let expect = if a == b {
                            SqrtRational::one()
                        } else {
                            SqrtRational::zero()
                        };
                        assert_eq!(acc.to_sqrt_rational().unwrap(), expect);
                    }
                }
            }
        }
    }

    #[test]
    fn quasichar_id_validation() {
        let half = hv(1);
        assert!(QuasicharId::caterpillar(vec![half; 3], vec![hv(2)], hv(3)).is_ok());
        assert!(QuasicharId::caterpillar(vec![half; 3], vec![hv(4)], hv(3)).is_err());
        assert!(QuasicharId::caterpillar(vec![half; 3], vec![], hv(3)).is_err());
        let id = QuasicharId::caterpillar(vec![half; 4], vec![hv(2), hv(3)], hv(4)).unwrap();
        assert_eq!(id.label(), "2_(1/2,1/2,1/2,1/2),(1,3/2),(1,3/2)");
        assert_eq!(all_ids(&CouplingTree::caterpillar(4), &[half; 4]).len(), 14);
    }

    proptest! {
        #[test]
        fn multiplicity_is_tree_independent(a in 0i32..4, b in 0i32..4, c in 0i32..4, d in 0i32..3) {
            let spins = [hv(a), hv(b), hv(c), hv(d)];
            for j in total_spins(&spins) {
                let m = multiplicity(&spins, j);
                for t in trees(4) {
                    prop_assert_eq!(enumerate_labels(&t, &spins, j).unwrap().len(), m);
                }
            }
        }
    }
}
