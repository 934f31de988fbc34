//! Admissible internal labels of coupling trees and the resulting
//! quasicharacter counts.

use su2_quasichar::coupling::{all_ids, enumerate_labels, total_spins, CouplingTree};
use su2_quasichar::exactnum::HalfInt;

fn main() {
    let spins = vec![HalfInt::HALF; 4];
    for text in ["(((1 2) 3) 4)", "((1 2) (3 4))", "(1 (2 (3 4)))"] {
        let tree: CouplingTree = text.parse().expect("tree literal");
        println!("tree {tree}");
        for j in total_spins(&spins) {
            let labels = enumerate_labels(&tree, &spins, j).expect("admissible spins");
            let shown: Vec<String> = labels
                .iter()
                .map(|k| {
                    format!(
                        "({})",
                        k.iter()
                            .map(|x| x.to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    )
                })
                .collect();
            println!(
                "  j={j:<3} multiplicity {}  {}",
                labels.len(),
                shown.join(" ")
            );
        }
    }

    // the number of quasicharacters on n spin-1/2 leaves is a Catalan number
    for n in 1..=6 {
        let count = all_ids(&CouplingTree::caterpillar(n), &vec![HalfInt::HALF; n]).len();
        println!("n={n}: {count} quasicharacters");
    }
}
