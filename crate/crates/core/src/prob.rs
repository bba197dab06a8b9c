//! Binomial and hypergeometric pmfs evaluated through log-factorials.

use statrs::function::factorial::ln_binomial;

/// `P(X = x)` for `X ~ Binomial(n, p)`, `x = 0..=n`.
pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; n + 1];
    if p <= 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    if p >= 1.0 {
        pmf[n] = 1.0;
        return pmf;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    for (x, slot) in pmf.iter_mut().enumerate() {
        let ln = ln_binomial(n as u64, x as u64) + x as f64 * lp + (n - x) as f64 * lq;
        *slot = ln.exp();
    }
    pmf
}

/// Hypergeometric pmf of the number of marked items among `draws` items taken
/// without replacement from `population` items of which `marked` are marked.
/// Indexed by `r = 0..=min(draws, marked)`; impossible counts are zero.
pub fn hypergeometric_pmf(population: usize, marked: usize, draws: usize) -> Vec<f64> {
    debug_assert!(marked <= population && draws <= population);
    let top = draws.min(marked);
    let denom = ln_binomial(population as u64, draws as u64);
    (0..=top)
        .map(|r| {
            // needs draws - r <= population - marked
            if draws - r > population - marked {
                0.0
            } else {
                (ln_binomial(marked as u64, r as u64)
                    + ln_binomial((population - marked) as u64, (draws - r) as u64)
                    - denom)
                    .exp()
            }
        })
        .collect()
}
