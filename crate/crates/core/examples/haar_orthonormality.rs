//! Monte Carlo Haar inner products of orthonormal-convention quasicharacters.

use su2_quasichar::coupling::{all_ids, CouplingTree};
use su2_quasichar::exactnum::HalfInt;
use su2_quasichar::quasichar::{haar_gram, Convention};

fn main() {
    let tree = CouplingTree::caterpillar(2);
    let mut ids = Vec::new();
    for a in 0..=2 {
        for b in 0..=2 {
            ids.extend(all_ids(
                &tree,
                &[HalfInt::from_twice(a), HalfInt::from_twice(b)],
            ));
        }
    }
    let gram = haar_gram(&ids, Convention::Orthonormal, 100_000, 7).expect("estimates");
    let mut worst: f64 = 0.0;
    for (a, row) in gram.iter().enumerate() {
        let line: String = row.iter().map(|e| format!("{:6.2}", e.re)).collect();
        println!("{:>14} {line}", ids[a].label());
        for (b, e) in row.iter().enumerate() {
            let target = if a == b { 1.0 } else { 0.0 };
            if e.stderr > 0.0 {
                worst = worst.max((e.re - target).abs() / e.stderr);
            }
        }
    }
    println!("largest deviation from the identity: {worst:.2} standard errors");
}
