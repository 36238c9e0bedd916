//! Closed-form integrals of products of sines and cosines.

/// `sin(z) / z`, accurate near zero.
pub(crate) fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// `int_p^q cos(w x) dx`
pub(crate) fn int_cos(w: f64, p: f64, q: f64) -> f64 {
    let h = 0.5 * (q - p);
    let m = 0.5 * (p + q);
    2.0 * h * (w * m).cos() * sinc(w * h)
}

/// `int_p^q sin(w x) dx`
pub(crate) fn int_sin(w: f64, p: f64, q: f64) -> f64 {
    let h = 0.5 * (q - p);
    let m = 0.5 * (p + q);
    2.0 * h * (w * m).sin() * sinc(w * h)
}

/// `int_0^a prod_i sin(k_i u) du` for four wavenumbers.
pub(crate) fn int_sin4(k: [f64; 4], a: f64) -> f64 {
    let mut acc = 0.0;
    for s2 in [-1.0, 1.0] {
        for s3 in [-1.0, 1.0] {
            for s4 in [-1.0, 1.0] {
                let w = k[0] + s2 * k[1] + s3 * k[2] + s4 * k[3];
                acc += s2 * s3 * s4 * int_cos(w, 0.0, a);
            }
        }
    }
    acc / 8.0
}

/// A piece `alpha sin(k x) + beta cos(k x)` of a piecewise trigonometric
/// function.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TrigPiece {
    pub k: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// `int_p^q f(x) g(x) dx` for two trigonometric pieces.
pub(crate) fn int_piece_product(f: TrigPiece, g: TrigPiece, p: f64, q: f64) -> f64 {
    let dm = f.k - g.k;
    let dp = f.k + g.k;
    // sin a sin b = (cos(a-b) - cos(a+b)) / 2, etc.
    let ss = 0.5 * (int_cos(dm, p, q) - int_cos(dp, p, q));
    let cc = 0.5 * (int_cos(dm, p, q) + int_cos(dp, p, q));
    // sin(f.k x) cos(g.k x) and cos(f.k x) sin(g.k x)
    let sc = 0.5 * (int_sin(dp, p, q) + int_sin(dm, p, q));
    let cs = 0.5 * (int_sin(dp, p, q) - int_sin(dm, p, q));
    f.alpha * g.alpha * ss + f.beta * g.beta * cc + f.alpha * g.beta * sc + f.beta * g.alpha * cs
}
