//! Quasicharacters: evaluation at group-element tuples, Haar inner products,
//! and exact expansion in trace monomials.
//!
//! `chi_{k,k'}(u) = sum_m <T(j,k') j m| D_j(u) |T(j,k) j m>` is the `Trace`
//! convention. `Orthonormal` rescales by `sqrt(d_{leaves} / d_j)` so the
//! functions are orthonormal in `L^2(SU(2)^N)`; `Table` divides the trace
//! value by `sqrt(d_{leaves})`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix2};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling::{coupled_state_coefficients, LabelledTree, QuasicharId};
use crate::exactnum::HalfInt;
use crate::rep::{
    apply_kron, coupled_basis_cg, coupled_basis_projector, dmatrix, projector_tree, su2_sample,
    tensor_dmatrix, GroupElement, C64,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuasicharError {
    #[error("label error: {0}")]
    Label(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("cannot parse polynomial {0:?}: {1}")]
    Parse(String, String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    #[default]
    Trace,
    Orthonormal,
    Table,
}

impl Convention {
    /// Factor converting a trace-convention value into this convention.
    pub fn scale(self, id: &QuasicharId) -> f64 {
        let leaves = id.leaf_dim() as f64;
        match self {
            Convention::Trace => 1.0,
            Convention::Orthonormal => (leaves / f64::from(id.total.dim())).sqrt(),
            Convention::Table => 1.0 / leaves.sqrt(),
        }
    }
}

impl FromStr for Convention {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "trace" => Ok(Convention::Trace),
            "orthonormal" => Ok(Convention::Orthonormal),
            "table" => Ok(Convention::Table),
            _ => Err(format!("unknown convention {s:?}")),
        }
    }
}

/// How coupled basis vectors are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// Highest-weight vectors cut out by pair projectors, then lowered.
    Projector,
    /// Explicit products of Clebsch-Gordan coefficients.
    CgSum,
}

/// Precomputed data for repeated evaluation of one quasicharacter.
#[derive(Clone, Debug)]
pub struct Evaluator {
    id: QuasicharId,
    ket: Vec<DVector<C64>>,
    bra: Vec<DVector<C64>>,
}

impl Evaluator {
    pub fn new(id: &QuasicharId) -> Result<Self, QuasicharError> {
        Self::with_route(id, Route::Projector)
    }

    pub fn with_route(id: &QuasicharId, route: Route) -> Result<Self, QuasicharError> {
        let build = |lt: LabelledTree| match route {
            Route::Projector => coupled_basis_projector(&lt),
            Route::CgSum => coupled_basis_cg(&lt),
        };
        let to_c = |vs: Vec<DVector<f64>>| {
            vs.into_iter()
                .map(|v| v.map(|x| C64::new(x, 0.0)))
                .collect()
        };
        let ket = build(id.ket()).map_err(|e| QuasicharError::Label(e.to_string()))?;
        let bra = build(id.bra()).map_err(|e| QuasicharError::Label(e.to_string()))?;
        Ok(Evaluator {
            id: id.clone(),
            ket: to_c(ket),
            bra: to_c(bra),
        })
    }

    pub fn id(&self) -> &QuasicharId {
        &self.id
    }

    /// Trace-convention value at `us`.
    pub fn eval(&self, us: &[GroupElement]) -> C64 {
        assert_eq!(us.len(), self.id.n(), "one group element per leaf");
        let ds: Vec<DMatrix<C64>> = self
            .id
            .leaf_spins
            .iter()
            .zip(us)
            .map(|(&j, u)| dmatrix(j, u))
            .collect();
        self.ket
            .iter()
            .zip(&self.bra)
            .map(|(k, b)| b.dotc(&apply_kron(&ds, k)))
            .sum()
    }

    pub fn eval_in(&self, us: &[GroupElement], convention: Convention) -> C64 {
        self.eval(us) * convention.scale(&self.id)
    }
}

/// Value of the quasicharacter `id` at `us` in the chosen convention.
pub fn quasichar_eval(
    id: &QuasicharId,
    us: &[GroupElement],
    convention: Convention,
) -> Result<C64, QuasicharError> {
    if us.len() != id.n() {
        return Err(QuasicharError::Label(format!(
            "{} group elements for {} leaves",
            us.len(),
            id.n()
        )));
    }
    Ok(Evaluator::new(id)?.eval_in(us, convention))
}

/// Trace-convention value from the explicit double sum over magnetic tuples
/// of Clebsch-Gordan products times matrix elements of each `D^{j_i}(u_i)`.
pub fn quasichar_eval_cg_sum(id: &QuasicharId, us: &[GroupElement]) -> Result<C64, QuasicharError> {
    let ds: Vec<DMatrix<C64>> = id
        .leaf_spins
        .iter()
        .zip(us)
        .map(|(&j, u)| dmatrix(j, u))
        .collect();
    let idx = |j: HalfInt, m: HalfInt| ((j.twice() - m.twice()) / 2) as usize;
    let mut total = C64::zero();
    for m in id.total.magnetic_range() {
        let ket = coupled_state_coefficients(&id.ket(), m)
            .map_err(|e| QuasicharError::Label(e.to_string()))?;
        let bra = coupled_state_coefficients(&id.bra(), m)
            .map_err(|e| QuasicharError::Label(e.to_string()))?;
        for (ms, ck) in &ket {
            for (ns, cb) in &bra {
                let mut term = C64::new(ck.to_f64() * cb.to_f64(), 0.0);
                for (i, &j) in id.leaf_spins.iter().enumerate() {
                    term *= ds[i][(idx(j, ns[i]), idx(j, ms[i]))];
                }
                total += term;
            }
        }
    }
    Ok(total)
}

/// Diagonal quasicharacter as `Tr(P D(u))` with the composed tree projector.
pub fn quasichar_eval_projector_trace(
    id: &QuasicharId,
    us: &[GroupElement],
) -> Result<C64, QuasicharError> {
    if !id.is_diagonal() {
        return Err(QuasicharError::Label("projector trace needs k = k'".into()));
    }
    let p = projector_tree(&id.ket()).map_err(|e| QuasicharError::Label(e.to_string()))?;
    let d = tensor_dmatrix(&id.leaf_spins, us);
    Ok((p.matrix * d.matrix).trace())
}

/// Seeded generator for stream `stream` of run `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn sample_tuple<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<GroupElement> {
    (0..n).map(|_| su2_sample(rng)).collect()
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub re: f64,
    pub im: f64,
    pub stderr: f64,
}

const CHUNK: usize = 4096;

/// Monte Carlo Gram matrix `<chi_a, chi_b>` over Haar measure for all pairs.
///
/// Samples are drawn in fixed-size chunks, each from its own stream, so the
/// result depends only on `seed` and `samples`.
pub fn haar_gram(
    ids: &[QuasicharId],
    convention: Convention,
    samples: usize,
    seed: u64,
) -> Result<Vec<Vec<Estimate>>, QuasicharError> {
    let n = ids.first().map(|i| i.n()).unwrap_or(0);
    if ids.iter().any(|i| i.n() != n) {
        return Err(QuasicharError::Label(
            "all ids must share the leaf count".into(),
        ));
    }
    if samples == 0 {
        return Err(QuasicharError::Label("samples must be positive".into()));
    }
    let evs: Vec<Evaluator> = ids.iter().map(Evaluator::new).collect::<Result<_, _>>()?;
    let scales: Vec<f64> = ids.iter().map(|i| convention.scale(i)).collect();
    let k = ids.len();
    let chunks = samples.div_ceil(CHUNK);
    // per chunk: sums of z and |z|^2 for every pair
    let partial: Vec<(Vec<C64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_for(seed, c as u64);
            let count = CHUNK.min(samples - c * CHUNK);
            let mut sum = vec![C64::zero(); k * k];
            let mut sq = vec![0.0; k * k];
            let mut vals = vec![C64::zero(); k];
            for _ in 0..count {
                let us = sample_tuple(&mut rng, n);
                for (a, ev) in evs.iter().enumerate() {
                    vals[a] = ev.eval(&us) * scales[a];
                }
                for a in 0..k {
                    for b in 0..k {
                        let z = vals[a].conj() * vals[b];
                        sum[a * k + b] += z;
                        sq[a * k + b] += z.norm_sqr();
                    }
                }
            }
            (sum, sq)
        })
        .collect();
    let mut sum = vec![C64::zero(); k * k];
    let mut sq = vec![0.0; k * k];
    for (s, q) in partial {
        for i in 0..k * k {
            sum[i] += s[i];
            sq[i] += q[i];
        }
    }
    let nf = samples as f64;
    Ok((0..k)
        .map(|a| {
            (0..k)
                .map(|b| {
                    let mean = sum[a * k + b] / nf;
                    let var =
                        (sq[a * k + b] / nf - mean.norm_sqr()).max(0.0) * nf / (nf - 1.0).max(1.0);
                    Estimate {
                        re: mean.re,
                        im: mean.im,
                        stderr: (var / nf).sqrt(),
                    }
                })
                .collect()
        })
        .collect())
}

/// Monte Carlo estimate of `<chi_a, chi_b>`.
pub fn haar_inner_product(
    a: &QuasicharId,
    b: &QuasicharId,
    convention: Convention,
    samples: usize,
    seed: u64,
) -> Result<Estimate, QuasicharError> {
    let g = haar_gram(&[a.clone(), b.clone()], convention, samples, seed)?;
    Ok(g[0][1])
}

/// A product of traces of cyclic words; letters are zero-based leaf indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TraceMonomial {
    words: Vec<Vec<u8>>,
}

fn min_rotation(w: &[u8]) -> Vec<u8> {
    (0..w.len().max(1))
        .map(|r| w[r..].iter().chain(&w[..r]).copied().collect::<Vec<u8>>())
        .min()
        .unwrap_or_default()
}

impl TraceMonomial {
    pub fn one() -> Self {
        TraceMonomial { words: vec![] }
    }

    pub fn new(words: Vec<Vec<u8>>) -> Self {
        let mut words: Vec<Vec<u8>> = words
            .into_iter()
            .filter(|w| !w.is_empty())
            .map(|w| min_rotation(&w))
            .collect();
        words.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
        TraceMonomial { words }
    }

    pub fn words(&self) -> &[Vec<u8>] {
        &self.words
    }

    pub fn mul(&self, other: &TraceMonomial) -> TraceMonomial {
        TraceMonomial::new(self.words.iter().chain(&other.words).cloned().collect())
    }

    /// Occurrences of each letter.
    pub fn letter_degrees(&self, n: usize) -> Vec<u32> {
        let mut d = vec![0; n];
        for w in &self.words {
            for &l in w {
                d[l as usize] += 1;
            }
        }
        d
    }

    pub fn degree(&self) -> usize {
        self.words.iter().map(Vec::len).sum()
    }

    pub fn eval(&self, us: &[GroupElement]) -> f64 {
        self.words
            .iter()
            .map(|w| {
                w.iter()
                    .fold(Matrix2::<C64>::identity(), |acc, &l| {
                        acc * us[l as usize].matrix()
                    })
                    .trace()
                    .re
            })
            .product()
    }

    fn sort_key(&self) -> (usize, usize, &[Vec<u8>]) {
        (self.degree(), self.words.len(), &self.words)
    }

    /// Render with the given letter names, e.g. `Tr(u)^2Tr(uv)`.
    pub fn render(&self, letters: &[String]) -> String {
        if self.words.is_empty() {
            return "1".into();
        }
        let mut out = String::new();
        let mut i = 0;
        while i < self.words.len() {
            let w = &self.words[i];
            let mut p = 1;
            while i + p < self.words.len() && self.words[i + p] == *w {
                p += 1;
            }
            let name: String = w.iter().map(|&l| letters[l as usize].as_str()).collect();
            out.push_str(&format!("Tr({name})"));
            if p > 1 {
                out.push_str(&format!("^{p}"));
            }
            i += p;
        }
        out
    }

    /// Parse `Tr(u)^2Tr(uv)` or `1` with the given letter names.
    pub fn parse(text: &str, letters: &[String]) -> Result<Self, QuasicharError> {
        let fail = |why: &str| QuasicharError::Parse(text.to_string(), why.to_string());
        let s: String = text
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '*')
            .collect();
        if s == "1" || s.is_empty() {
            return Ok(TraceMonomial::one());
        }
        let mut words = Vec::new();
        let mut rest = s.as_str();
        while !rest.is_empty() {
            let body = rest
                .strip_prefix("Tr(")
                .ok_or_else(|| fail("expected Tr("))?;
            let close = body.find(')').ok_or_else(|| fail("unclosed Tr("))?;
            let inner = &body[..close];
            let mut word = Vec::new();
            let mut cur = inner;
            while !cur.is_empty() {
                let (idx, len) = letters
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| cur.starts_with(l.as_str()))
                    .max_by_key(|(_, l)| l.len())
                    .map(|(i, l)| (i, l.len()))
                    .ok_or_else(|| fail("unknown letter"))?;
                word.push(idx as u8);
                cur = &cur[len..];
            }
            rest = &body[close + 1..];
            let mut power = 1;
            if let Some(p) = rest.strip_prefix('^') {
                let digits: String = p.chars().take_while(|c| c.is_ascii_digit()).collect();
                power = digits.parse().map_err(|_| fail("bad exponent"))?;
                rest = &p[digits.len()..];
            }
            for _ in 0..power {
                words.push(word.clone());
            }
        }
        Ok(TraceMonomial::new(words))
    }
}

impl PartialOrd for TraceMonomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TraceMonomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

/// Letter names used in printed polynomials: `u, v, w` up to three leaves,
/// `r, s, t, u` for four, `u1, u2, ...` beyond.
pub fn letters(n: usize) -> Vec<String> {
    match n {
        0..=3 => ["u", "v", "w"][..n].iter().map(|s| s.to_string()).collect(),
        4 => ["r", "s", "t", "u"].iter().map(|s| s.to_string()).collect(),
        _ => (1..=n).map(|i| format!("u{i}")).collect(),
    }
}

/// Exact rational combination of trace monomials.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TracePolynomial {
    pub n: usize,
    terms: BTreeMap<TraceMonomial, BigRational>,
}

impl TracePolynomial {
    pub fn new(n: usize) -> Self {
        TracePolynomial {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn add_term(&mut self, m: TraceMonomial, c: BigRational) {
        let entry = self
            .terms
            .entry(m.clone())
            .or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn terms(&self) -> &BTreeMap<TraceMonomial, BigRational> {
        &self.terms
    }

    pub fn coefficient(&self, m: &TraceMonomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn eval(&self, us: &[GroupElement]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| c.to_f64().unwrap_or(f64::NAN) * m.eval(us))
            .sum()
    }

    pub fn scaled(&self, by: &BigRational) -> Self {
        let mut out = TracePolynomial::new(self.n);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c * by);
        }
        out
    }

    /// `{monomial: "p/q"}` for JSON output.
    pub fn to_json(&self) -> serde_json::Value {
        let names = letters(self.n);
        let map: serde_json::Map<String, serde_json::Value> = self
            .terms
            .iter()
            .map(|(m, c)| (m.render(&names), serde_json::Value::String(c.to_string())))
            .collect();
        serde_json::Value::Object(map)
    }

    /// Parse a sum such as `-1/4 Tr(uv) + 3/4 Tr(u)^2Tr(uv) - 1`.
    pub fn parse(n: usize, text: &str) -> Result<Self, QuasicharError> {
        let names = letters(n);
        let fail = |why: &str| QuasicharError::Parse(text.to_string(), why.to_string());
        let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let mut out = TracePolynomial::new(n);
        let mut terms = Vec::new();
        let mut start = 0;
        let bytes = s.as_bytes();
        let mut depth = 0;
        for (i, &b) in bytes.iter().enumerate() {
            match b {
                b'(' => depth += 1,
                b')' => depth -= 1,
                b'+' | b'-' if depth == 0 && i > start && bytes[i - 1] != b'^' => {
                    terms.push(&s[start..i]);
                    start = i;
                }
                _ => {}
            }
        }
        terms.push(&s[start..]);
        for t in terms.into_iter().filter(|t| !t.is_empty()) {
            let (sign, body) = match t.as_bytes()[0] {
                b'-' => (-1, &t[1..]),
                b'+' => (1, &t[1..]),
                _ => (1, t),
            };
            let split = body.find("Tr(").unwrap_or(body.len());
            let (coef_txt, mono_txt) = body.split_at(split);
            let coef_txt = coef_txt.trim_end_matches('*');
            let coef = if coef_txt.is_empty() {
                BigRational::one()
            } else {
                let (p, q) = coef_txt.split_once('/').unwrap_or((coef_txt, "1"));
                let p: BigInt = p.parse().map_err(|_| fail("bad coefficient"))?;
                let q: BigInt = q.parse().map_err(|_| fail("bad coefficient"))?;
                BigRational::new(p, q)
            };
            let mono = TraceMonomial::parse(mono_txt, &names)?;
            out.add_term(mono, coef * BigInt::from(sign));
        }
        Ok(out)
    }
}

impl fmt::Display for TracePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let names = letters(self.n);
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            match (i, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let mono = m.render(&names);
            if mono == "1" {
                write!(f, "{a}")?;
            } else if a.is_one() {
                write!(f, "{mono}")?;
            } else {
                write!(f, "{a} {mono}")?;
            }
        }
        Ok(())
    }
}

/// Which words may appear in basis monomials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisMode {
    /// `Tr(a)`, `Tr(ab)`, `Tr(abc)` with strictly increasing letters; the
    /// result is reduced to a linearly independent set.
    #[default]
    Generator,
    /// Adds the reversed three-letter word and all four-letter words on
    /// distinct letters; may be linearly dependent.
    Table,
}

fn candidate_words(n: usize, mode: BasisMode) -> Vec<Vec<u8>> {
    let n8 = n as u8;
    let mut words = Vec::new();
    for a in 0..n8 {
        words.push(vec![a]);
    }
    for a in 0..n8 {
        for b in a + 1..n8 {
            words.push(vec![a, b]);
        }
    }
    for a in 0..n8 {
        for b in a + 1..n8 {
            for c in b + 1..n8 {
                words.push(vec![a, b, c]);
                if mode == BasisMode::Table {
                    words.push(vec![a, c, b]);
                }
            }
        }
    }
    if mode == BasisMode::Table {
        for a in 0..n8 {
            for b in 0..n8 {
                for c in 0..n8 {
                    for d in 0..n8 {
                        let w = [a, b, c, d];
                        let distinct = (0..4).all(|i| (i + 1..4).all(|k| w[i] != w[k]));
                        if distinct && a == *w.iter().min().unwrap() {
                            words.push(w.to_vec());
                        }
                    }
                }
            }
        }
    }
    words
}

/// All monomials over the mode's words with letter degrees `<= caps[i]` and
/// `= parities[i] (mod 2)`, before any dependency reduction.
pub fn monomial_candidates(
    n: usize,
    caps: &[u32],
    parities: &[u32],
    mode: BasisMode,
) -> Vec<TraceMonomial> {
    let words = candidate_words(n, mode);
    let mut out = Vec::new();
    fn rec(
        words: &[Vec<u8>],
        idx: usize,
        deg: &mut Vec<u32>,
        chosen: &mut Vec<Vec<u8>>,
        caps: &[u32],
        parities: &[u32],
        out: &mut Vec<TraceMonomial>,
    ) {
        if idx == words.len() {
            if deg.iter().zip(parities).all(|(d, p)| d % 2 == p % 2) {
                out.push(TraceMonomial::new(chosen.clone()));
            }
            return;
        }
        let w = &words[idx];
        let mut count = 0;
        loop {
            rec(words, idx + 1, deg, chosen, caps, parities, out);
            if w.iter().any(|&l| deg[l as usize] + 1 > caps[l as usize]) {
                break;
            }
            for &l in w {
                deg[l as usize] += 1;
            }
            chosen.push(w.clone());
            count += 1;
        }
        for _ in 0..count {
            chosen.pop();
            for &l in w {
                deg[l as usize] -= 1;
            }
        }
    }
    rec(
        &words,
        0,
        &mut vec![0; n],
        &mut Vec::new(),
        caps,
        parities,
        &mut out,
    );
    out.sort();
    out
}

/// Keep, in order, the monomials that are linearly independent as functions.
pub fn independent_subset(monomials: &[TraceMonomial], n: usize, seed: u64) -> Vec<TraceMonomial> {
    let samples = (2 * monomials.len()).max(16);
    let mut rng = rng_for(seed, u64::MAX);
    let pts: Vec<Vec<GroupElement>> = (0..samples).map(|_| sample_tuple(&mut rng, n)).collect();
    let mut kept: Vec<(TraceMonomial, DVector<f64>)> = Vec::new();
    for m in monomials {
        let v = DVector::from_iterator(samples, pts.iter().map(|p| m.eval(p)));
        let norm = v.norm();
        let mut r = v.clone();
        for (_, q) in &kept {
            let d = q.dot(&r);
            r -= q * d;
        }
        // second pass for numerical orthogonality
        for (_, q) in &kept {
            let d = q.dot(&r);
            r -= q * d;
        }
        if r.norm() > 1e-8 * norm.max(1.0) {
            let q = &r / r.norm();
            kept.push((m.clone(), q));
        }
    }
    kept.into_iter().map(|(m, _)| m).collect()
}

/// The basis of the chosen mode. `Generator` is reduced to independent
/// monomials; `Table` is returned whole.
pub fn monomial_basis(
    n: usize,
    caps: &[u32],
    parities: &[u32],
    mode: BasisMode,
) -> Vec<TraceMonomial> {
    let all = monomial_candidates(n, caps, parities, mode);
    match mode {
        BasisMode::Generator => independent_subset(&all, n, 0x5eed),
        BasisMode::Table => all,
    }
}

/// Continued-fraction approximation with denominator at most `max_den`,
/// accepted only within `tol` of `x`.
pub fn rationalize(x: f64, max_den: u64, tol: f64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut r = x;
    let mut best: Option<(i128, i128)> = None;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            break;
        }
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > i128::from(max_den) {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        best = Some((h1, k1));
        if ((h1 as f64) / (k1 as f64) - x).abs() <= tol {
            break;
        }
        let frac = r - a;
        if frac.abs() < 1e-300 {
            break;
        }
        r = 1.0 / frac;
    }
    let (h, k) = best?;
    (((h as f64) / (k as f64) - x).abs() <= tol)
        .then(|| BigRational::new(BigInt::from(h), BigInt::from(k)))
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub mode: BasisMode,
    pub seed: u64,
    /// Samples per basis monomial; at least 3.
    pub oversample: usize,
    pub heldout: usize,
    pub max_den: u64,
    /// Monomials to prefer when the basis is dependent; when given, a greedy
    /// independent subset in this order is used instead of the
    /// minimum-norm solution.
    pub preferred: Option<Vec<TraceMonomial>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            mode: BasisMode::Generator,
            seed: 1,
            oversample: 3,
            heldout: 50,
            max_den: 1_000_000,
            preferred: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub polynomial: TracePolynomial,
    pub basis_size: usize,
    pub rank: usize,
    pub samples: usize,
    /// Largest least-squares residual at the fit samples, before rounding.
    pub fit_residual: f64,
    /// Largest deviation of the rational polynomial at held-out tuples.
    pub heldout_residual: f64,
}

/// Fit a real invariant function on `SU(2)^n` by trace monomials.
pub fn fit_function<F>(
    f: F,
    n: usize,
    caps: &[u32],
    parities: &[u32],
    opts: &FitOptions,
) -> Result<FitReport, QuasicharError>
where
    F: Fn(&[GroupElement]) -> f64 + Sync,
{
    let mut basis = monomial_basis(n, caps, parities, opts.mode);
    if let Some(pref) = &opts.preferred {
        let mut ordered: Vec<TraceMonomial> =
            pref.iter().filter(|m| basis.contains(m)).cloned().collect();
        ordered.extend(basis.iter().filter(|m| !pref.contains(m)).cloned());
        basis = independent_subset(&ordered, n, opts.seed);
    }
    let cols = basis.len().max(1);
    let rows = opts.oversample.max(3) * cols;
    let mut rng = rng_for(opts.seed, 0);
    let pts: Vec<Vec<GroupElement>> = (0..rows).map(|_| sample_tuple(&mut rng, n)).collect();
    let a = DMatrix::from_fn(rows, basis.len(), |r, c| basis[c].eval(&pts[r]));
    let y: Vec<f64> = pts.par_iter().map(|p| f(p)).collect();
    let y = DVector::from_vec(y);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = 1e-9 * smax.max(1.0);
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let x = svd
        .solve(&y, cutoff)
        .map_err(|e| QuasicharError::Fit(format!("least squares failed: {e}")))?;
    let fit_residual = (&a * &x - &y).amax();
    let scale = y.amax().max(1.0);
    if fit_residual > 1e-9 * scale {
        return Err(QuasicharError::Fit(format!(
            "residual {fit_residual:e} before rounding; basis of {} monomials does not span",
            basis.len()
        )));
    }
    let mut poly = TracePolynomial::new(n);
    for (m, &c) in basis.iter().zip(x.iter()) {
        if c.abs() < 1e-10 {
            continue;
        }
        let q = rationalize(c, opts.max_den, 1e-8 * c.abs().max(1.0)).ok_or_else(|| {
            QuasicharError::Fit(format!("no rational within bounds for coefficient {c}"))
        })?;
        poly.add_term(m.clone(), q);
    }
    let mut hrng = rng_for(opts.seed, 1);
    let held: Vec<Vec<GroupElement>> = (0..opts.heldout)
        .map(|_| sample_tuple(&mut hrng, n))
        .collect();
    let heldout_residual = held
        .par_iter()
        .map(|p| (poly.eval(p) - f(p)).abs())
        .reduce(|| 0.0, f64::max);
    if heldout_residual > 1e-8 * scale {
        return Err(QuasicharError::Fit(format!(
            "held-out residual {heldout_residual:e} after rounding"
        )));
    }
    Ok(FitReport {
        polynomial: poly,
        basis_size: basis.len(),
        rank,
        samples: rows,
        fit_residual,
        heldout_residual,
    })
}

/// Degree caps and parities implied by leaf spins: degree `<= 2 j_i`, same parity.
pub fn caps_for(leaf_spins: &[HalfInt]) -> (Vec<u32>, Vec<u32>) {
    let caps: Vec<u32> = leaf_spins.iter().map(|s| s.twice() as u32).collect();
    let par = caps.iter().map(|c| c % 2).collect();
    (caps, par)
}

/// Exact trace-polynomial expansion of a quasicharacter in the given convention.
pub fn fit_trace_polynomial(
    id: &QuasicharId,
    convention: Convention,
    opts: &FitOptions,
) -> Result<FitReport, QuasicharError> {
    if convention == Convention::Orthonormal && !is_rational_scale(id) {
        return Err(QuasicharError::Fit(
            "orthonormal scale is irrational for these labels".into(),
        ));
    }
    let ev = Evaluator::new(id)?;
    let scale = convention.scale(id);
    let (caps, par) = caps_for(&id.leaf_spins);
    fit_function(|us| ev.eval(us).re * scale, id.n(), &caps, &par, opts)
}

fn is_rational_scale(id: &QuasicharId) -> bool {
    let r = BigRational::new(BigInt::from(id.leaf_dim()), BigInt::from(id.total.dim()));
    crate::exactnum::SqrtRational::sqrt_of(r)
        .to_rational()
        .is_some()
}

/// Reduce any trace polynomial to the unique generator-basis form.
pub fn normal_form(
    p: &TracePolynomial,
    caps: &[u32],
    parities: &[u32],
    seed: u64,
) -> Result<TracePolynomial, QuasicharError> {
    let opts = FitOptions {
        seed,
        ..FitOptions::default()
    };
    Ok(fit_function(|us| p.eval(us), p.n, caps, parities, &opts)?.polynomial)
}
