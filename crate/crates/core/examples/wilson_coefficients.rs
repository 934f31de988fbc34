//! Expansion of two- and four-link plaquette traces in the orthonormal
//! quasicharacter basis, computed from exact Haar overlaps.

use su2_quasichar::hamiltonian::plaquette_expansion;

fn main() {
    for (name, word) in [
        ("Tr(rs)", vec![(0, false), (1, false)]),
        (
            "Tr(rstu)",
            vec![(0, false), (1, false), (2, false), (3, false)],
        ),
    ] {
        println!("{name}:");
        for (id, c) in plaquette_expansion(&word, word.len()).expect("valid word") {
            let k: Vec<String> = id.k.iter().map(|h| h.to_string()).collect();
            let kp: Vec<String> = id.k_prime.iter().map(|h| h.to_string()).collect();
            println!(
                "  j={} k=({}) k'=({})  {:>14}  {:+.6}",
                id.total,
                k.join(","),
                kp.join(","),
                c.pretty(),
                c.to_f64()
            );
        }
    }
}
