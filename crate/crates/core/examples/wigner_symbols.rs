//! Exact Clebsch-Gordan coefficients, 6j and 9j symbols.

use su2_quasichar::exactnum::{halfint_parse, HalfInt};
use su2_quasichar::wigner::{bracket_9j, clebsch_gordan, couplings, wigner_6j, wigner_9j};

fn h(s: &str) -> HalfInt {
    halfint_parse(s).expect("spin literal")
}

fn main() {
    let (j1, j2) = (h("1"), h("1/2"));
    println!("<1 m1 1/2 m2 | j m>:");
    for j in couplings(j1, j2) {
        for m in j.magnetic_range() {
            for m1 in j1.magnetic_range() {
                let m2 = m - m1;
                if m2.twice().abs() > j2.twice() {
                    continue;
                }
                let c = clebsch_gordan(j1, m1, j2, m2, j, m).expect("valid labels");
                println!("  j={j:<4} m={m:<5} m1={m1:<4} m2={m2:<5} {}", c.pretty());
            }
        }
    }

    let six = [h("1"), h("1"), h("1"), h("1"), h("1"), h("1")];
    println!("{{1 1 1; 1 1 1}} = {}", wigner_6j(six).pretty());
    let six = [h("1/2"), h("1/2"), h("1"), h("1/2"), h("3/2"), h("1")];
    println!("{{1/2 1/2 1; 1/2 3/2 1}} = {}", wigner_6j(six).pretty());

    for t in 1..=4 {
        let j = HalfInt::from_twice(t);
        let labels = [
            h("1/2"),
            h("0"),
            h("1/2"),
            j,
            h("1/2"),
            j + h("1/2"),
            j + h("1/2"),
            h("1/2"),
            j + h("1"),
        ];
        println!(
            "j={j:<4} 9j = {:<14} bracket = {}",
            wigner_9j(labels).pretty(),
            bracket_9j(labels).pretty()
        );
    }
}
