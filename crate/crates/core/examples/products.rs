//! Pointwise products of quasicharacters expanded with exact coefficients.

use su2_quasichar::algebra::{product, structure_constant};
use su2_quasichar::coupling::QuasicharId;
use su2_quasichar::exactnum::halfint_parse;
use su2_quasichar::quasichar::{quasichar_eval, rng_for, sample_tuple, Convention};

fn id(leaf: &[&str], k: &[&str], kp: &[&str], j: &str) -> QuasicharId {
    let p = |v: &[&str]| {
        v.iter()
            .map(|s| halfint_parse(s).unwrap())
            .collect::<Vec<_>>()
    };
    let tree = su2_quasichar::coupling::CouplingTree::caterpillar(leaf.len());
    QuasicharId::new(tree, p(leaf), p(k), p(kp), halfint_parse(j).unwrap())
        .expect("admissible labels")
}

fn main() {
    let tr_u = id(&["1/2", "0"], &[], &[], "1/2");
    let tr_v = id(&["0", "1/2"], &[], &[], "1/2");
    for j in ["1/2", "1", "3/2"] {
        let jj = halfint_parse(j).unwrap();
        let chi = id(
            &[j, "1/2"],
            &[],
            &[],
            &(jj + su2_quasichar::exactnum::HalfInt::HALF).to_string(),
        );
        for (name, f) in [("Tr(u)", &tr_u), ("Tr(v)", &tr_v)] {
            println!("{name} * chi{}:", chi.label());
            for (t, c) in product(f, &chi, Convention::Trace).unwrap().terms {
                println!("    {:>10}  {}", c.pretty(), t.label());
            }
        }
    }

    let a = id(&["1/2", "1", "1/2"], &["1/2"], &["3/2"], "1");
    let b = id(&["1/2", "1/2", "1"], &["1"], &["0"], "1");
    let e = product(&a, &b, Convention::Orthonormal).unwrap();
    println!(
        "\n{} x {} has {} orthonormal terms",
        a.label(),
        b.label(),
        e.len()
    );
    let mut rng = rng_for(1, 0);
    let us = sample_tuple(&mut rng, 3);
    let lhs = quasichar_eval(&a, &us, Convention::Orthonormal).unwrap()
        * quasichar_eval(&b, &us, Convention::Orthonormal).unwrap();
    let rhs = e.eval(&us).unwrap();
    println!("pointwise check: |lhs - rhs| = {:.1e}", (lhs - rhs).norm());
    let (t, c) = &e.terms[0];
    let direct = structure_constant(&a, &b, t, Convention::Orthonormal).unwrap();
    println!(
        "C^{} = {} (direct: {})",
        t.label(),
        c.pretty(),
        direct.pretty()
    );
}
