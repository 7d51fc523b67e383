/// Inverse golden ratio, `(√5 − 1)/2`.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoldenResult {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Golden-section search for the maximum of `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol` or after `max_evals`
/// evaluations. The best point seen is returned, which for a unimodal `f`
/// is within `tol` of the maximiser.
pub fn golden_section_max<F, E>(mut f: F, lo: f64, hi: f64, tol: f64, max_evals: usize) -> Result<GoldenResult, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut evals = 2;
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };

    while (b - a) > tol && evals < max_evals {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
            if fc > best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
            if fd > best.1 {
                best = (d, fd);
            }
        }
        evals += 1;
    }
    Ok(GoldenResult {
        x: best.0,
        value: best.1,
        evaluations: evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn finds_parabola_peak() {
        let r = golden_section_max::<_, Infallible>(|x| Ok(-(x - 0.3f64).powi(2)), -2.0, 5.0, 1e-8, 1000).unwrap();
        assert!((r.x - 0.3).abs() < 1e-7);
        assert!(r.evaluations < 60);
    }

    #[test]
    fn respects_budget_and_edges() {
        let r = golden_section_max::<_, Infallible>(Ok, 0.0, 1.0, 1e-12, 10).unwrap();
        assert_eq!(r.evaluations, 10);
        assert!(r.x > 0.9);
    }

    #[test]
    fn propagates_errors() {
        let r = golden_section_max(|_| Err::<f64, _>("boom"), 0.0, 1.0, 1e-3, 10);
        assert_eq!(r.unwrap_err(), "boom");
    }
}
