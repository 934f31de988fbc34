//! Acceptance suite: one PASS/FAIL line per criterion, with per-entry detail
//! underneath anything that fails. Exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;

use su2_quasichar::algebra::{change_tree, product, product_caterpillar, recoupling_matrix};
use su2_quasichar::coupling::{all_ids, total_spins, CouplingTree, Node, QuasicharId};
use su2_quasichar::exactnum::{ratio, HalfInt, SqrtRational, SqrtSum};
use su2_quasichar::hamiltonian::{
    assemble, plaquette_expansion, spectrum, HamiltonianParams, LatticeSpec,
};
use su2_quasichar::quasichar::{
    caps_for, fit_trace_polynomial, haar_gram, normal_form, rng_for, sample_tuple, Convention,
    Evaluator, FitOptions, Route, TracePolynomial,
};
use su2_quasichar::rep::GroupElement;
use su2_quasichar::wigner::wigner_9j;

struct Outcome {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, summary: impl Into<String>, details: Vec<String>) -> Self {
        Outcome {
            pass,
            summary: summary.into(),
            details,
        }
    }
}

fn hv(t: i32) -> HalfInt {
    HalfInt::from_twice(t)
}

fn spins(ts: &[i32]) -> Vec<HalfInt> {
    ts.iter().map(|&t| hv(t)).collect()
}

fn cat(leaf: &[i32], k: &[i32], kp: &[i32], j: i32) -> QuasicharId {
    QuasicharId::new(
        CouplingTree::caterpillar(leaf.len()),
        spins(leaf),
        spins(k),
        spins(kp),
        hv(j),
    )
    .expect("admissible labels")
}

fn within(limit: Duration, elapsed: Duration, details: &mut Vec<String>) -> bool {
    if elapsed > limit {
        details.push(format!("runtime {:.2?} exceeds {:.0?}", elapsed, limit));
        false
    } else {
        true
    }
}

// 9j tables -----------------------------------------------------------------

fn rational_9j(num: BigRational) -> SqrtRational {
    SqrtRational::from_rational(&num)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut checked = 0;
    let mut bad = 0;
    for t in 1..=4 {
        let j = BigRational::new(BigInt::from(t), BigInt::from(2));
        let one = ratio(1, 1);
        let two = ratio(2, 1);
        let d1 = &two * &j + &one; // 2j + 1
        let d2 = &two * &j + &two; // 2j + 2
        let inv = |x: BigRational| x.recip();
        // row of labels in twice-spin units, printed value
        let mut entries: Vec<(String, [i32; 9], SqrtRational)> = vec![
            (
                "first table, col 1".into(),
                [1, 0, 1, t, 1, t + 1, t + 1, 1, t + 2],
                rational_9j(inv(&two * &d2)),
            ),
            (
                "first table, col 2".into(),
                [1, 0, 1, t, 1, t + 1, t + 1, 1, t],
                rational_9j(inv(&two * &d1 * &d2)),
            ),
            (
                "first table, col 3".into(),
                [1, 0, 1, t, 1, t + 1, t - 1, 1, t],
                rational_9j(inv(&two * &d1)),
            ),
        ];
        if t >= 2 {
            entries.push((
                "first table, col 4".into(),
                [1, 0, 1, t, 1, t + 1, t - 1, 1, t - 2],
                SqrtRational::zero(),
            ));
        }
        // 1 / (2 sqrt(3 (j+1) (2j+1)))
        let jp1 = &j + &one;
        let c1 = SqrtRational::sqrt_of(inv(ratio(4, 1) * ratio(3, 1) * &jp1 * &d1));
        // 1/(2(2j+1)) sqrt(j / (3 (j+1)))
        let c2 = SqrtRational::sqrt_of(inv(ratio(4, 1) * &d1 * &d1) * &j / (ratio(3, 1) * &jp1));
        // 1/(2(2j+1)) sqrt(1/(2j+1))
        let c3 = SqrtRational::sqrt_of(inv(ratio(4, 1) * &d1 * &d1 * &d1));
        entries.push((
            "second table, col 1".into(),
            [0, 1, 1, t, 1, t + 1, t, 2, t + 2],
            c1,
        ));
        entries.push((
            "second table, col 2".into(),
            [0, 1, 1, t, 1, t + 1, t, 2, t],
            c2,
        ));
        entries.push((
            "second table, col 3".into(),
            [0, 1, 1, t, 1, t + 1, t, 0, t],
            c3,
        ));
        for (name, labels, printed) in entries {
            checked += 1;
            let v = wigner_9j(labels.map(hv));
            if v != printed {
                bad += 1;
                details.push(format!(
                    "j={}: {name}: computed {} printed {}",
                    hv(t),
                    v.pretty(),
                    printed.pretty()
                ));
            }
        }
    }
    let fast = within(Duration::from_secs(1), start.elapsed(), &mut details);
    Outcome::new(
        bad == 0 && fast,
        format!("{}/{checked} entries exact", checked - bad),
        details,
    )
}

// Table 1 -------------------------------------------------------------------

const N2_ROWS: &[(&[i32], i32, &str)] = &[
    (&[1, 0], 1, "Tr(u)"),
    (&[1, 1], 2, "1/2 Tr(uv) + 1/2 Tr(u)Tr(v)"),
    (&[1, 1], 0, "-1/2 Tr(uv) + 1/2 Tr(u)Tr(v)"),
    (&[2, 0], 2, "-1 + Tr(u)^2"),
    (&[1, 2], 1, "-1/3 Tr(u) - 2/3 Tr(v)Tr(uv) + 2/3 Tr(u)Tr(v)^2"),
    (&[1, 2], 3, "-2/3 Tr(u) + 2/3 Tr(v)Tr(uv) + 1/3 Tr(u)Tr(v)^2"),
    (&[3, 0], 3, "-2 Tr(u) + Tr(u)^3"),
    (&[2, 2], 0, "1/3 Tr(uv)^2 - 2/3 Tr(u)Tr(v)Tr(uv) + 1/3 Tr(u)^2Tr(v)^2 - 1/3"),
    (&[2, 2], 2, "-1/2 Tr(u)^2 - 1/2 Tr(v)^2 - 1/2 Tr(uv)^2 + 1/2 Tr(u)^2Tr(v)^2 + 1"),
    (&[2, 2], 4, "1/3 - 1/2 Tr(u)^2 - 1/2 Tr(v)^2 + 1/6 Tr(uv)^2 + 2/3 Tr(u)Tr(v)Tr(uv) + 1/6 Tr(u)^2Tr(v)^2"),
    (&[3, 1], 4, "-1/4 Tr(uv) - 1/4 Tr(u)Tr(v) + 3/4 Tr(u)^2Tr(uv) - 3/8 Tr(u)^2Tr(v) + 1/16 Tr(u)^3Tr(v)"),
    (&[3, 1], 2, "1/4 Tr(uv) + 7/4 Tr(u)Tr(v) - 3/4 Tr(u)^2Tr(uv) + 3/8 Tr(u)^2Tr(v) + 15/16 Tr(u)^3Tr(v)"),
    (&[4, 0], 4, "1 - 3 Tr(u)^2 + Tr(u)^4"),
];

/// Compare a fitted polynomial with a printed one, first term by term and
/// then through the canonical generator-basis form.
fn same_function(
    fitted: &TracePolynomial,
    printed: &TracePolynomial,
    id: &QuasicharId,
) -> Result<(), String> {
    if fitted == printed {
        return Ok(());
    }
    let (caps, parities) = caps_for(&id.leaf_spins);
    let a = normal_form(fitted, &caps, &parities, 11).map_err(|e| e.to_string())?;
    match normal_form(printed, &caps, &parities, 11) {
        Ok(b) if a == b => Ok(()),
        Ok(b) => Err(format!("normal forms differ: printed {b}")),
        Err(e) => Err(format!("printed form is not in the invariant span ({e})")),
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut good = 0;
    let opts = FitOptions {
        heldout: 50,
        ..FitOptions::default()
    };
    for &(leaf, j, text) in N2_ROWS {
        let id = cat(leaf, &[], &[], j);
        let printed = TracePolynomial::parse(2, text).expect("printed row parses");
        match fit_trace_polynomial(&id, Convention::Trace, &opts) {
            Err(e) => details.push(format!("{}: fit failed: {e}", id.label())),
            Ok(r) => {
                let clean = r.fit_residual < 1e-9 && r.heldout_residual < 1e-12;
                match (clean, same_function(&r.polynomial, &printed, &id)) {
                    (true, Ok(())) => good += 1,
                    (false, _) => details.push(format!(
                        "{}: residuals {:.1e} / {:.1e}",
                        id.label(),
                        r.fit_residual,
                        r.heldout_residual
                    )),
                    (true, Err(why)) => details.push(format!(
                        "{}: recovered {} ; {why}",
                        id.label(),
                        r.polynomial
                    )),
                }
            }
        }
    }
    let fast = within(Duration::from_secs(30), start.elapsed(), &mut details);
    Outcome::new(
        good == N2_ROWS.len() && fast,
        format!("{good}/{} rows recovered", N2_ROWS.len()),
        details,
    )
}

// Table 2 -------------------------------------------------------------------

const N4_ROW: &str = "1/36 Tr(rstu) + 1/36 Tr(rsut) + 1/36 Tr(rust) \
    + 1/27 Tr(rtsu) + 1/27 Tr(rtus) + 1/27 Tr(ruts) \
    + 1/24 Tr(s)Tr(rtu) + 1/24 Tr(s)Tr(rut) + 1/24 Tr(r)Tr(stu) + 1/24 Tr(r)Tr(sut) \
    + 1/24 Tr(t)Tr(rsu) + 1/24 Tr(t)Tr(rus) + 1/36 Tr(u)Tr(rst) + 1/36 Tr(u)Tr(rts) \
    + 1/24 Tr(rs)Tr(t)Tr(u) + 13/216 Tr(ru)Tr(s)Tr(t) + 13/216 Tr(su)Tr(r)Tr(t) + 1/54 Tr(ut)Tr(r)Tr(s) \
    + 1/12 Tr(rs)Tr(ut) + 1/12 Tr(ru)Tr(st) + 1/12 Tr(rt)Tr(su) \
    + 13/216 Tr(r)Tr(s)Tr(t)Tr(u)";

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut details = Vec::new();
    let rows: Vec<(QuasicharId, usize, String)> = vec![
        (
            cat(&[1, 1, 1], &[2], &[2], 3),
            3,
            "1/6 Tr(uwv) + 1/6 Tr(vwu) + 1/6 Tr(uv)Tr(w) + 1/6 Tr(uw)Tr(v) + 1/6 Tr(vw)Tr(u) + 1/6 Tr(u)Tr(v)Tr(w)".into(),
        ),
        (
            cat(&[1, 1, 1], &[2], &[2], 1),
            3,
            "-1/6 Tr(uwv) - 1/6 Tr(vwu) - 1/6 Tr(uw)Tr(v) + 1/3 Tr(uv)Tr(w) - 1/6 Tr(vw)Tr(u) + 1/3 Tr(u)Tr(v)Tr(w)".into(),
        ),
        (cat(&[1, 1, 1], &[0], &[0], 1), 3, "1/2 Tr(u)Tr(v)Tr(w) - 1/2 Tr(uv)Tr(w)".into()),
        (cat(&[1, 1, 1, 1], &[2, 3], &[2, 3], 4), 4, N4_ROW.into()),
    ];
    let mut good = 0;
    let opts = FitOptions::default();
    for (id, n, text) in &rows {
        let printed = TracePolynomial::parse(*n, text).expect("printed row parses");
        match fit_trace_polynomial(id, Convention::Trace, &opts) {
            Err(e) => details.push(format!("{}: fit failed: {e}", id.label())),
            Ok(r) => match same_function(&r.polynomial, &printed, id) {
                Ok(()) => good += 1,
                Err(why) => {
                    let at_identity = printed.eval(&vec![GroupElement::identity(); *n]);
                    details.push(format!(
                        "{}: printed form gives {at_identity:.4} at the identity, expected {}; {why}",
                        id.label(),
                        id.total.dim()
                    ));
                    details.push(format!("{}: recovered {}", id.label(), r.polynomial));
                }
            },
        }
    }
    let fast = within(Duration::from_secs(300), start.elapsed(), &mut details);
    Outcome::new(
        good == rows.len() && fast,
        format!("{good}/{} rows recovered", rows.len()),
        details,
    )
}

// Products with Tr(u) and Tr(v) -----------------------------------------------

fn criterion_4() -> Outcome {
    let mut details = Vec::new();
    let mut worst: f64 = 0.0;
    let mut exact_ok = true;
    let mut rng = rng_for(41, 0);
    for t in 1..=8 {
        let s = BigRational::new(BigInt::from(t), BigInt::from(2));
        let one = ratio(1, 1);
        let d = ratio(2, 1) * &s + &one; // 2j + 1
        let base = cat(&[t, 1], &[], &[], t + 1);
        let mut laws: Vec<(QuasicharId, Vec<(QuasicharId, BigRational)>)> = Vec::new();
        // Tr(u) * chi
        let mut tu = vec![
            (cat(&[t + 1, 1], &[], &[], t + 2), one.clone()),
            (cat(&[t + 1, 1], &[], &[], t), (&d * &d).recip()),
            (
                cat(&[t - 1, 1], &[], &[], t),
                ratio(2, 1) * &s * (ratio(2, 1) * &s + ratio(2, 1)) / (&d * &d),
            ),
        ];
        if t >= 2 {
            tu.push((cat(&[t - 1, 1], &[], &[], t - 2), ratio(0, 1)));
        }
        laws.push((cat(&[1, 0], &[], &[], 1), tu));
        // Tr(v) * chi
        let tv = vec![
            (cat(&[t, 2], &[], &[], t + 2), one.clone()),
            (cat(&[t, 2], &[], &[], t), &s / &d),
            (cat(&[t, 0], &[], &[], t), (&s + &one) / &d),
        ];
        laws.push((cat(&[0, 1], &[], &[], 1), tv));
        for (factor, terms) in laws {
            let exp = product(&factor, &base, Convention::Trace).expect("product expands");
            for (id, c) in &terms {
                let got = exp.coefficient(id);
                if got != SqrtRational::from_rational(c) {
                    exact_ok = false;
                    details.push(format!(
                        "j={}: {} coefficient {} printed {}",
                        hv(t),
                        id.label(),
                        got.pretty(),
                        c
                    ));
                }
            }
            for (id, c) in &exp.terms {
                if !terms.iter().any(|(t, _)| t == id) {
                    exact_ok = false;
                    details.push(format!(
                        "j={}: unexpected term {} {}",
                        hv(t),
                        c.pretty(),
                        id.label()
                    ));
                }
            }
            let fe = Evaluator::new(&factor).unwrap();
            let be = Evaluator::new(&base).unwrap();
            let te: Vec<(Evaluator, f64)> = terms
                .iter()
                .map(|(id, c)| {
                    (
                        Evaluator::new(id).unwrap(),
                        num_traits::ToPrimitive::to_f64(c).unwrap(),
                    )
                })
                .collect();
            for _ in 0..100 {
                let us = sample_tuple(&mut rng, 2);
                let lhs = fe.eval(&us) * be.eval(&us);
                let rhs: num_complex::Complex64 = te.iter().map(|(e, c)| e.eval(&us) * *c).sum();
                worst = worst.max((lhs - rhs).norm());
            }
        }
    }
    if worst >= 1e-10 {
        details.push(format!("pointwise residual {worst:.2e}"));
    }
    Outcome::new(
        exact_ok && worst < 1e-10,
        format!("j = 1/2..4, max residual {worst:.1e}, coefficients exact: {exact_ok}"),
        details,
    )
}

// General products ------------------------------------------------------------

fn random_id<R: Rng>(rng: &mut R) -> QuasicharId {
    loop {
        let ts: Vec<i32> = (0..3).map(|_| rng.random_range(0..=6)).collect();
        if ts.iter().map(|t| t + 1).product::<i32>() > 64 {
            continue;
        }
        let ids = all_ids(&CouplingTree::caterpillar(3), &spins(&ts));
        return ids[rng.random_range(0..ids.len())].clone();
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut rng = rng_for(5, 0);
    let mut worst: f64 = 0.0;
    let mut terms = 0;
    for _ in 0..20 {
        let (a, b) = (random_id(&mut rng), random_id(&mut rng));
        let exp = product_caterpillar(&a, &b, Convention::Trace).expect("admissible pair");
        terms += exp.len();
        let (ea, eb) = (Evaluator::new(&a).unwrap(), Evaluator::new(&b).unwrap());
        let te: Vec<(Evaluator, f64)> = exp
            .terms
            .iter()
            .map(|(id, c)| (Evaluator::new(id).unwrap(), c.to_f64()))
            .collect();
        let mut pair_worst: f64 = 0.0;
        for _ in 0..20 {
            let us = sample_tuple(&mut rng, 3);
            let lhs = ea.eval(&us) * eb.eval(&us);
            let rhs: num_complex::Complex64 = te.iter().map(|(e, c)| e.eval(&us) * *c).sum();
            pair_worst = pair_worst.max((lhs - rhs).norm());
        }
        if pair_worst >= 1e-10 {
            details.push(format!(
                "{} x {}: residual {pair_worst:.2e}",
                a.label(),
                b.label()
            ));
        }
        worst = worst.max(pair_worst);
    }
    let fast = within(Duration::from_secs(300), start.elapsed(), &mut details);
    Outcome::new(
        worst < 1e-10 && fast,
        format!("20 pairs, {terms} terms, max residual {worst:.1e}"),
        details,
    )
}

// Evaluation routes -----------------------------------------------------------

fn spin_tuples(n: usize, budget: i32) -> Vec<Vec<i32>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for t in 1..budget {
        if budget / (t + 1) < 2_i32.pow(n as u32 - 1) {
            break;
        }
        for mut rest in spin_tuples(n - 1, budget / (t + 1)) {
            rest.insert(0, t);
            out.push(rest);
        }
    }
    out
}

fn criterion_6() -> Outcome {
    let mut details = Vec::new();
    let mut rng = rng_for(6, 0);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for n in 1..=6 {
        let mut trees = vec![CouplingTree::caterpillar(n)];
        if n == 4 {
            trees.push("((1 2) (3 4))".parse().unwrap());
        }
        for ts in spin_tuples(n, 64) {
            for tree in &trees {
                for id in all_ids(tree, &spins(&ts)) {
                    let a = Evaluator::with_route(&id, Route::Projector).unwrap();
                    let b = Evaluator::with_route(&id, Route::CgSum).unwrap();
                    for _ in 0..2 {
                        let us = sample_tuple(&mut rng, n);
                        let d = (a.eval(&us) - b.eval(&us)).norm();
                        if d >= 1e-11 {
                            details.push(format!("{} on {tree}: {d:.2e}", id.label()));
                        }
                        worst = worst.max(d);
                    }
                    count += 1;
                }
            }
        }
    }
    Outcome::new(
        worst < 1e-11,
        format!("{count} quasicharacters, max difference {worst:.1e}"),
        details,
    )
}

// Orthonormality --------------------------------------------------------------

fn criterion_7() -> Outcome {
    let mut details = Vec::new();
    let tree = CouplingTree::caterpillar(2);
    let mut ids = Vec::new();
    for a in 0..=2 {
        for b in 0..=2 {
            ids.extend(all_ids(&tree, &spins(&[a, b])));
        }
    }
    let gram = haar_gram(&ids, Convention::Orthonormal, 100_000, 7).expect("gram estimates");
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for a in 0..ids.len() {
        for b in a..ids.len() {
            pairs += 1;
            let e = gram[a][b];
            let target = if a == b { 1.0 } else { 0.0 };
            let dev = (e.re - target).abs().max(e.im.abs());
            let z = if e.stderr > 0.0 {
                dev / e.stderr
            } else if dev < 1e-12 {
                0.0
            } else {
                f64::INFINITY
            };
            if z > 3.0 {
                details.push(format!(
                    "<{}|{}> = {:.4} +- {:.4}",
                    ids[a].label(),
                    ids[b].label(),
                    e.re,
                    e.stderr
                ));
            }
            worst = worst.max(z);
        }
    }
    Outcome::new(
        details.is_empty(),
        format!(
            "{} quasicharacters, {pairs} pairs, worst {worst:.2} standard errors",
            ids.len()
        ),
        details,
    )
}

// Wilson coefficients -----------------------------------------------------------

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut details = Vec::new();
    let s = |sign: i32, n: i64, d: i64| SqrtRational::new(sign, n, d);
    let two = vec![
        (cat(&[1, 1], &[], &[], 2), s(1, 3, 4)),
        (cat(&[1, 1], &[], &[], 0), s(-1, 1, 4)),
    ];
    let f =
        |k: [i32; 2], kp: [i32; 2], j: i32, c: SqrtRational| (cat(&[1, 1, 1, 1], &k, &kp, j), c);
    let four = vec![
        f([0, 1], [0, 1], 0, s(1, 1, 64)),
        f([0, 1], [2, 1], 0, s(-1, 3, 64)),
        f([2, 1], [0, 1], 0, s(-1, 3, 64)),
        f([2, 1], [2, 1], 0, s(-1, 1, 64)),
        f([0, 1], [0, 1], 2, s(-1, 3, 64)),
        f([0, 1], [2, 1], 2, s(1, 9, 64)),
        f([0, 1], [2, 3], 2, SqrtRational::zero()),
        f([2, 1], [0, 1], 2, s(-1, 1, 64)),
        f([2, 1], [2, 1], 2, s(-1, 1, 192)),
        f([2, 1], [2, 3], 2, s(1, 1, 6)),
        f([2, 3], [0, 1], 2, s(-1, 1, 8)),
        f([2, 3], [2, 1], 2, s(-1, 1, 24)),
        f([2, 3], [2, 3], 2, s(-1, 1, 48)),
        f([2, 3], [2, 3], 4, s(1, 5, 16)),
    ];
    let mut good = 0;
    let mut total = 0;
    for (word, printed) in [
        (vec![(0, false), (1, false)], two),
        ((0..4).map(|l| (l, false)).collect(), four),
    ] {
        let exp = plaquette_expansion(&word, word.len()).expect("plaquette word");
        for (id, c) in &printed {
            let got = exp
                .iter()
                .find(|(t, _)| t == id)
                .map(|(_, c)| c.clone())
                .unwrap_or_else(SqrtRational::zero);
            if c.is_zero() {
                continue;
            }
            total += 1;
            if &got == c {
                good += 1;
            } else {
                details.push(format!(
                    "{}: computed {} printed {}",
                    id.label(),
                    got.pretty(),
                    c.pretty()
                ));
            }
        }
        for (id, c) in &exp {
            if !printed.iter().any(|(t, _)| t == id) {
                details.push(format!("unprinted term {} {}", c.pretty(), id.label()));
            }
        }
    }
    let fast = within(Duration::from_secs(10), start.elapsed(), &mut details);
    Outcome::new(
        good == total && details.is_empty() && fast,
        format!("{good}/{total} coefficients exact"),
        details,
    )
}

// Hamiltonian -------------------------------------------------------------------

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let mut details = Vec::new();
    let lat = LatticeSpec::single_plaquette();
    let mut last = f64::INFINITY;
    for t in 1..=4 {
        let p = HamiltonianParams {
            jmax: hv(t),
            ..HamiltonianParams::default()
        };
        let a = assemble(&lat, &p).expect("assembles");
        let asym = (&a.matrix - a.matrix.transpose()).amax();
        if asym != 0.0 {
            details.push(format!("jmax={}: asymmetry {asym:.1e}", hv(t)));
        }
        let s = spectrum(&a.matrix, a.basis.len());
        if s.eigenvalues.iter().any(|e| !e.is_finite()) {
            details.push(format!("jmax={}: non-finite eigenvalue", hv(t)));
        }
        if s.residuals.iter().any(|&r| r >= 1e-9) {
            details.push(format!("jmax={}: eigen residual above 1e-9", hv(t)));
        }
        if s.eigenvalues[0] > last {
            details.push(format!(
                "jmax={}: ground state rose from {last} to {}",
                hv(t),
                s.eigenvalues[0]
            ));
        }
        last = s.eigenvalues[0];
    }
    for lattice in [LatticeSpec::single_plaquette(), LatticeSpec::grid(2, 2)] {
        let p = HamiltonianParams {
            g: 1.5,
            delta: 0.5,
            jmax: hv(2),
            wilson: false,
            ..HamiltonianParams::default()
        };
        let p = if lattice.off_tree().len() > 1 {
            HamiltonianParams { jmax: hv(1), ..p }
        } else {
            p
        };
        let a = assemble(&lattice, &p).expect("assembles");
        let kappa = p.g * p.g / (2.0 * p.delta);
        let mut expect: Vec<f64> = a
            .casimir
            .iter()
            .map(|c| kappa * num_traits::ToPrimitive::to_f64(c).unwrap())
            .collect();
        expect.sort_by(f64::total_cmp);
        let got = spectrum(&a.matrix, a.basis.len()).eigenvalues;
        let diff = got
            .iter()
            .zip(&expect)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        if diff > 1e-12 * expect.last().copied().unwrap_or(1.0).max(1.0) {
            details.push(format!("strong coupling spectrum off by {diff:.1e}"));
        }
    }
    let p = HamiltonianParams {
        jmax: hv(4),
        ..HamiltonianParams::default()
    };
    let reference = spectrum(&assemble(&lat, &p).unwrap().matrix, 5).eigenvalues;
    for drop in 0..4 {
        let tree: Vec<usize> = (0..4).filter(|&l| l != drop).collect();
        let e = spectrum(&assemble(&lat.with_tree(tree), &p).unwrap().matrix, 5).eigenvalues;
        let diff = e
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if diff >= 1e-8 {
            details.push(format!(
                "tree without link {drop}: spectrum differs by {diff:.1e}"
            ));
        }
    }
    let p = HamiltonianParams {
        g: 1.0,
        delta: 1.0,
        jmax: hv(4),
        ..HamiltonianParams::default()
    };
    let full = spectrum(&assemble(&lat, &p).unwrap().matrix, 5);
    if full.residuals.iter().any(|&r| r >= 1e-9) {
        details.push("jmax=2 run: eigen residual above 1e-9".into());
    }
    let fast = within(Duration::from_secs(120), start.elapsed(), &mut details);
    Outcome::new(
        details.is_empty() && fast,
        format!("ground state at jmax=2: {:.10}", full.eigenvalues[0]),
        details,
    )
}

// Tree changes ------------------------------------------------------------------

fn trees_on(leaves: &[usize]) -> Vec<Node> {
    if leaves.len() == 1 {
        return vec![Node::Leaf(leaves[0])];
    }
    let (first, rest) = (leaves[0], &leaves[1..]);
    let mut out = Vec::new();
    // the first leaf always sits in the left part, so child swaps are not repeated
    for mask in 0..(1u32 << rest.len()) - 1 {
        let mut left = vec![first];
        let mut right = Vec::new();
        for (i, &l) in rest.iter().enumerate() {
            if mask & (1 << i) != 0 {
                left.push(l);
            } else {
                right.push(l);
            }
        }
        for a in trees_on(&left) {
            for b in trees_on(&right) {
                out.push(Node::Pair(Box::new(a.clone()), Box::new(b)));
            }
        }
    }
    out
}

fn criterion_10() -> Outcome {
    let mut details = Vec::new();
    let mut matrices = 0;
    let mut roundtrips = 0;
    for n in 2..=4 {
        let cat = CouplingTree::caterpillar(n);
        let trees: Vec<CouplingTree> = trees_on(&(0..n).collect::<Vec<_>>())
            .into_iter()
            .map(|t| CouplingTree::new(t).unwrap())
            .collect();
        let mut tuples = vec![vec![]];
        for _ in 0..n {
            tuples = tuples
                .into_iter()
                .flat_map(|t: Vec<i32>| (0..=2).map(move |x| [t.clone(), vec![x]].concat()))
                .collect();
        }
        for ts in &tuples {
            let leaf = spins(ts);
            for tree in &trees {
                for j in total_spins(&leaf) {
                    let r = recoupling_matrix(&cat, tree, &leaf, j).expect("recoupling matrix");
                    matrices += 1;
                    if !r.is_orthogonal().unwrap_or(false) {
                        details.push(format!(
                            "{cat} -> {tree}, spins {ts:?}, j={j}: not orthogonal"
                        ));
                    }
                }
                for id in all_ids(&cat, &leaf) {
                    let there = change_tree(&id, tree).expect("tree change");
                    let mut back: std::collections::BTreeMap<String, (QuasicharId, SqrtSum)> =
                        Default::default();
                    for (t, c) in &there.terms {
                        for (u, d) in change_tree(t, &cat).expect("tree change").terms {
                            back.entry(u.label())
                                .or_insert_with(|| (u.clone(), SqrtSum::new()))
                                .1
                                .add_product(c, &d);
                        }
                    }
                    roundtrips += 1;
                    for (label, (u, sum)) in back {
                        let v = sum.to_sqrt_rational().expect("exact sum");
                        let expect = if u == id {
                            SqrtRational::one()
                        } else {
                            SqrtRational::zero()
                        };
                        if v != expect {
                            details.push(format!(
                                "{} via {tree}: {label} has {}",
                                id.label(),
                                v.pretty()
                            ));
                        }
                    }
                }
            }
        }
    }
    Outcome::new(
        details.is_empty(),
        format!("{matrices} matrices orthogonal, {roundtrips} round trips exact"),
        details,
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("9j golden values", criterion_1),
        ("N=2 quasicharacter table", criterion_2),
        ("N=3 and N=4 quasicharacter table", criterion_3),
        ("products with Tr(u) and Tr(v)", criterion_4),
        ("random N=3 products", criterion_5),
        ("projector vs Clebsch-Gordan evaluation", criterion_6),
        ("Haar orthonormality, N=2, jmax=1", criterion_7),
        ("plaquette trace coefficients", criterion_8),
        ("Hamiltonian properties", criterion_9),
        ("tree-change unitarity", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] {:>2}. {name}: {} ({:.2?})",
            i + 1,
            out.summary,
            start.elapsed()
        );
        for d in &out.details {
            println!("         {d}");
        }
        if !out.pass {
            failed += 1;
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
