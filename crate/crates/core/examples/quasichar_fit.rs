//! Evaluate quasicharacters and recover them as exact polynomials in traces.

use su2_quasichar::coupling::QuasicharId;
use su2_quasichar::exactnum::halfint_parse;
use su2_quasichar::quasichar::{
    fit_trace_polynomial, quasichar_eval, rng_for, sample_tuple, BasisMode, Convention, FitOptions,
};

fn id(leaf: &[&str], k: &[&str], j: &str) -> QuasicharId {
    let p = |v: &[&str]| {
        v.iter()
            .map(|s| halfint_parse(s).unwrap())
            .collect::<Vec<_>>()
    };
    QuasicharId::caterpillar(p(leaf), p(k), halfint_parse(j).unwrap()).expect("admissible labels")
}

fn main() {
    let mut rng = rng_for(2024, 0);
    let ids = [
        id(&["1/2", "1/2"], &[], "1"),
        id(&["1", "1"], &[], "2"),
        id(&["3/2", "1/2"], &[], "2"),
        id(&["1/2", "1/2", "1/2"], &["1"], "3/2"),
    ];
    for q in &ids {
        let us = sample_tuple(&mut rng, q.n());
        let t = quasichar_eval(q, &us, Convention::Trace).unwrap();
        let o = quasichar_eval(q, &us, Convention::Orthonormal).unwrap();
        println!("{}: trace {:.6}  orthonormal {:.6}", q.label(), t.re, o.re);
    }
    println!();
    for q in &ids {
        let r =
            fit_trace_polynomial(q, Convention::Trace, &FitOptions::default()).expect("exact fit");
        println!("{} = {}", q.label(), r.polynomial);
        println!(
            "    basis {}, residual {:.1e}, held-out {:.1e}",
            r.basis_size, r.fit_residual, r.heldout_residual
        );
    }
    let table = FitOptions {
        mode: BasisMode::Table,
        ..FitOptions::default()
    };
    let r = fit_trace_polynomial(&ids[3], Convention::Trace, &table).unwrap();
    println!("\nwith both 3-letter orientations: {}", r.polynomial);
}
