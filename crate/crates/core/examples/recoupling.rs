//! Recoupling matrices between coupling trees and rewriting quasicharacters
//! on another tree.

use su2_quasichar::algebra::{change_tree, recoupling_matrix};
use su2_quasichar::coupling::{CouplingTree, QuasicharId};
use su2_quasichar::exactnum::HalfInt;

fn main() {
    let half = HalfInt::HALF;
    let spins = vec![half; 4];
    let from = CouplingTree::caterpillar(4);
    let to: CouplingTree = "((1 2) (3 4))".parse().unwrap();
    for j in [HalfInt::ZERO, HalfInt::ONE] {
        let r = recoupling_matrix(&from, &to, &spins, j).unwrap();
        println!(
            "<{to} | {from}> at j={j}, orthogonal: {}",
            r.is_orthogonal().unwrap()
        );
        for row in &r.entries {
            println!(
                "    {}",
                row.iter()
                    .map(|e| format!("{:>12}", e.pretty()))
                    .collect::<String>()
            );
        }
    }

    let id =
        QuasicharId::caterpillar(vec![half, HalfInt::ONE, half], vec![half], HalfInt::ONE).unwrap();
    let other: CouplingTree = "(1 (2 3))".parse().unwrap();
    println!("\n{} on {other}:", id.label());
    for (t, c) in change_tree(&id, &other).unwrap().terms {
        println!(
            "    {:>12}  k={:?} k'={:?}",
            c.pretty(),
            t.k.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
            t.k_prime.iter().map(|x| x.to_string()).collect::<Vec<_>>()
        );
    }
}
