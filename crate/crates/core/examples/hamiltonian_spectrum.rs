//! Low-lying spectrum of the truncated lattice Hamiltonian.

use su2_quasichar::exactnum::HalfInt;
use su2_quasichar::hamiltonian::{assemble, spectrum, HamiltonianParams, LatticeSpec};

fn main() {
    let plaquette = LatticeSpec::single_plaquette();
    println!("single plaquette, g = 1, ground state against the cutoff:");
    for t in 1..=6 {
        let p = HamiltonianParams {
            jmax: HalfInt::from_twice(t),
            ..HamiltonianParams::default()
        };
        let a = assemble(&plaquette, &p).unwrap();
        let s = spectrum(&a.matrix, 3);
        println!(
            "  jmax={:<4} dim={:<3} {:?}",
            p.jmax,
            a.basis.len(),
            s.eigenvalues
        );
    }

    println!("\nsingle plaquette, jmax = 4, sweep in g:");
    for g in [0.5, 1.0, 1.5, 2.0, 3.0] {
        let p = HamiltonianParams {
            g,
            jmax: HalfInt::from_twice(8),
            ..HamiltonianParams::default()
        };
        let e = spectrum(&assemble(&plaquette, &p).unwrap().matrix, 2).eigenvalues;
        println!("  g={g:<4} E0={:>12.6} gap={:.6}", e[0], e[1] - e[0]);
    }

    let grid = LatticeSpec::grid(2, 2);
    let p = HamiltonianParams {
        jmax: HalfInt::HALF,
        ..HamiltonianParams::default()
    };
    let a = assemble(&grid, &p).unwrap();
    let s = spectrum(&a.matrix, 4);
    println!(
        "\n2x2 grid, jmax = 1/2: dim {} lowest {:?}",
        a.basis.len(),
        s.eigenvalues
    );
}
