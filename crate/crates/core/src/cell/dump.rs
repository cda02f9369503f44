use std::io::Write;

use super::{CellProblem, DirectionSolution};

/// Plain-text cell dump:
///
/// ```text
/// cell <bc> center <x1> <x2> delta <delta> n_h <n_h>
/// dofs <n>
/// <value>            (n lines, DOF 3*vertex + {0: value, 1: d/dx1, 2: d/dx2})
/// elements <m>
/// <k> <diffusion energy> <iota^2 hessian energy>   (m lines)
/// ```
pub fn write_cell_dump<W: Write>(problem: &CellProblem, sol: &DirectionSolution, mut out: W) -> std::io::Result<()> {
    let s = problem.spec();
    writeln!(
        out,
        "cell {} center {:e} {:e} delta {:e} n_h {}",
        s.bc, s.center.x1, s.center.x2, s.delta, s.n_h
    )?;
    writeln!(out, "dofs {}", sol.dofs.len())?;
    for v in &sol.dofs {
        writeln!(out, "{v:.17e}")?;
    }
    let energies = problem.element_energies(&sol.dofs);
    writeln!(out, "elements {}", energies.len())?;
    for (k, (d, h)) in energies.iter().enumerate() {
        writeln!(out, "{k} {d:.17e} {h:.17e}")?;
    }
    Ok(())
}
