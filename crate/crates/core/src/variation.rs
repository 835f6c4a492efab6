//! Real-coded variation operators shared by the lower- and upper-level
//! searches: bounded simulated binary crossover and polynomial mutation.

use rand::Rng;

const EPS: f64 = 1e-14;

/// Bounded SBX applied variable-wise with probability 1/2 per variable.
pub(crate) fn sbx<R: Rng + ?Sized>(
    rng: &mut R,
    a: &mut [f64],
    b: &mut [f64],
    bounds: &[(f64, f64)],
    eta: f64,
) {
    for ((x1, x2), &(lo, hi)) in a.iter_mut().zip(b.iter_mut()).zip(bounds) {
        if rng.gen::<f64>() > 0.5 || (*x1 - *x2).abs() <= EPS || hi - lo <= EPS {
            continue;
        }
        let (y1, y2) = if *x1 < *x2 { (*x1, *x2) } else { (*x2, *x1) };
        let u: f64 = rng.gen();

        let spread = |beta: f64| {
            let alpha = 2.0 - beta.powf(-(eta + 1.0));
            if u <= 1.0 / alpha {
                (u * alpha).powf(1.0 / (eta + 1.0))
            } else {
                (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
            }
        };

        let beta_lo = 1.0 + 2.0 * (y1 - lo) / (y2 - y1);
        let c1 = 0.5 * ((y1 + y2) - spread(beta_lo) * (y2 - y1));
        let beta_hi = 1.0 + 2.0 * (hi - y2) / (y2 - y1);
        let c2 = 0.5 * ((y1 + y2) + spread(beta_hi) * (y2 - y1));

        let (c1, c2) = (c1.clamp(lo, hi), c2.clamp(lo, hi));
        if rng.gen::<bool>() {
            *x1 = c2;
            *x2 = c1;
        } else {
            *x1 = c1;
            *x2 = c2;
        }
    }
}

/// Polynomial mutation, each variable mutated with probability `rate`.
pub(crate) fn polynomial_mutation<R: Rng + ?Sized>(
    rng: &mut R,
    x: &mut [f64],
    bounds: &[(f64, f64)],
    rate: f64,
    eta: f64,
) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        if rng.gen::<f64>() >= rate || hi - lo <= EPS {
            continue;
        }
        let delta1 = (*v - lo) / (hi - lo);
        let delta2 = (hi - *v) / (hi - lo);
        let u: f64 = rng.gen();
        let power = 1.0 / (eta + 1.0);
        let dq = if u < 0.5 {
            let xy = 1.0 - delta1;
            let val = 2.0 * u + (1.0 - 2.0 * u) * xy.powf(eta + 1.0);
            val.powf(power) - 1.0
        } else {
            let xy = 1.0 - delta2;
            let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy.powf(eta + 1.0);
            1.0 - val.powf(power)
        };
        *v = (*v + dq * (hi - lo)).clamp(lo, hi);
    }
}
