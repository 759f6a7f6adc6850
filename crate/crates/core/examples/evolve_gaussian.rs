//! Evolve a Gaussian packet under a damped harmonic oscillator and watch the
//! transported position expectation stay pinned at its initial value.

use qat_core::classical::LsodeSpec;
use qat_core::operators::invariant_position;
use qat_core::propagators::evolve_qat_exact;
use qat_core::qat::QatContext;
use qat_core::wavegrid::{Grid, WaveFunction};

fn main() -> qat_core::Result<()> {
    // Caldirola-Kanai oscillator with damping rate 0.2 and frequency 1.
    let spec = LsodeSpec::damped_harmonic(0.2, 1.0);
    let ctx = QatContext::solve(&spec, -0.05, 1.5)?;

    let grid = Grid::uniform(512, -16.0, 16.0)?;
    let psi0 = WaveFunction::gaussian(grid, 0.4, 0.9, 0.5, spec.hbar);
    let x_inv = invariant_position(&ctx);

    for &t in &[0.0, 0.4, 0.8, 1.2] {
        let psi = evolve_qat_exact(&ctx, &psi0, t)?;
        println!(
            "t = {t:.1}   norm = {:.12}   <X> = {:.12}",
            psi.norm(),
            x_inv.expectation(&psi, t)?.re
        );
    }
    Ok(())
}
