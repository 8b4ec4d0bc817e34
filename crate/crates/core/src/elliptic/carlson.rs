use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_ITER: usize = 100;

fn principal_sqrt(z: Complex64) -> Complex64 {
    // −0 imaginary parts would select the lower side of the cut
    let z = if z.im == 0.0 { Complex64::new(z.re, 0.0) } else { z };
    z.sqrt()
}

/// Carlson's symmetric integral RF(x, y, z) = ½∫_0^∞ dt / √((t+x)(t+y)(t+z)),
/// with principal square roots throughout.
pub fn carlson_rf(x: Complex64, y: Complex64, z: Complex64) -> Result<Complex64> {
    let zeros = [x, y, z].iter().filter(|v| v.norm() == 0.0).count();
    if zeros > 1 || !(x.is_finite() && y.is_finite() && z.is_finite()) {
        return Err(Error::NonConvergence);
    }
    let (mut x, mut y, mut z) = (x, y, z);
    let a0 = (x + y + z) / 3.0;
    // relative error of the final expansion is below r = 1e-16 once
    // 4^-n Q < |A_n|
    let mut q = [(a0 - x).norm(), (a0 - y).norm(), (a0 - z).norm()]
        .into_iter()
        .fold(0.0, f64::max)
        * (3e-16f64).powf(-1.0 / 6.0);
    let mut a = a0;
    let mut converged = false;
    for _ in 0..MAX_ITER {
        if q < a.norm() {
            converged = true;
            break;
        }
        let (sx, sy, sz) = (principal_sqrt(x), principal_sqrt(y), principal_sqrt(z));
        let lam = sx * sy + sx * sz + sy * sz;
        x = (x + lam) * 0.25;
        y = (y + lam) * 0.25;
        z = (z + lam) * 0.25;
        a = (a + lam) * 0.25;
        q *= 0.25;
    }
    if !converged {
        return Err(Error::NonConvergence);
    }
    let dx = (a - x) / a;
    let dy = (a - y) / a;
    let dz = -(dx + dy);
    let e2 = dx * dy - dz * dz;
    let e3 = dx * dy * dz;
    let series = 1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0;
    Ok(series / principal_sqrt(a))
}
