//! Moments over the random count of units a scoring rule would treat with no
//! budget in a fresh sample, used by the budget-curve variance.
//!
//! The count is modeled as Binomial(n, p-hat) where p-hat is the observed maximal
//! treated proportion. The two required functionals of that count (an
//! expectation of a coupling bracket and the variance of a weighted
//! group-contrast sum) are evaluated either by seeded Monte Carlo draws or by
//! exact enumeration of the binomial mass function.

use rand::distributions::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;

use crate::error::{Error, Result};

/// How to evaluate the binomial-count moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZMomentMode {
    MonteCarlo { draws: u64, seed: u64 },
    /// Exact enumeration over the binomial mass function. Kept to small n:
    /// the expanded-polynomial route it matches becomes unstable when high
    /// powers of the success probability appear.
    ExactPolynomial,
}

impl Default for ZMomentMode {
    fn default() -> Self {
        ZMomentMode::MonteCarlo { draws: 10_000, seed: 0 }
    }
}

/// Maximum n for which [`ZMomentMode::ExactPolynomial`] is allowed.
pub const EXACT_POLY_MAX_N: usize = 30;

/// Precomputed per-count values of the two functionals, plus the sampling mode.
#[derive(Debug, Clone)]
pub struct ZMomentEngine {
    n: usize,
    p_hat: f64,
    mode: ZMomentMode,
    /// Coupling bracket, indexed by the count z = 0..=n.
    bracket: Vec<f64>,
    /// Weighted group-contrast sum, indexed by the count z = 0..=n.
    weighted_sum: Vec<f64>,
}

impl ZMomentEngine {
    /// Builds the engine from the group-contrast profiles (`kappa1[z-1]`,
    /// `kappa0[z-1]` for z = 1..n, extreme cells already substituted).
    pub fn new(
        n: usize,
        p_hat: f64,
        mode: ZMomentMode,
        kappa1: &[f64],
        kappa0: &[f64],
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::Input("count moments need n >= 2".into()));
        }
        if !(0.0..=1.0).contains(&p_hat) {
            return Err(Error::Input(format!("success probability {p_hat} outside [0, 1]")));
        }
        if kappa1.len() != n || kappa0.len() != n {
            return Err(Error::Input("contrast profiles must have length n".into()));
        }
        match mode {
            ZMomentMode::MonteCarlo { draws: 0, .. } => {
                return Err(Error::Input("need at least one Monte Carlo draw".into()));
            }
            ZMomentMode::ExactPolynomial if n > EXACT_POLY_MAX_N => {
                return Err(Error::Input(format!(
                    "exact count moments limited to n <= {EXACT_POLY_MAX_N} (got {n})"
                )));
            }
            _ => {}
        }

        let nf = n as f64;
        let mut bracket = vec![0.0; n + 1];
        let mut weighted_sum = vec![0.0; n + 1];
        // running prefix sums over the budget grid
        let mut p1 = 0.0; // sum of k * kappa1(k)
        let mut p2 = 0.0; // sum of k (n-k) kappa1(k) kappa0(k)
        let mut p3 = 0.0; // sum of k (n-k) kappa1(k)^2
        let mut dd = 0.0; // sum over k < k' of k (n-k') kappa1(k) kappa1(k')
        for z in 1..=n {
            let zf = z as f64;
            let k1 = kappa1[z - 1];
            let k0 = kappa0[z - 1];
            dd += (nf - zf) * k1 * p1;
            p1 += zf * k1;
            p2 += zf * (nf - zf) * k1 * k0;
            p3 += zf * (nf - zf) * k1 * k1;

            let nz = nf - zf;
            // pair-coupling bracket: covariance blocks
            // -min(k,k')(n-max(k,k'))/(n^2(n-1)) over grid and plateau
            // segments, plus baseline cross terms carrying kappa0
            bracket[z] = -(1.0 / nf)
                * ((p2 + zf * nz * nz * k1 * k0) / (nf * nf * (nf - 1.0)))
                - 2.0 * dd / (nf.powi(4) * (nf - 1.0))
                + zf * zf * nz * nz * k1 * k1 / (nf.powi(4) * (nf - 1.0))
                - 2.0 * nz * nz * k1 * p1 / (nf.powi(4) * (nf - 1.0))
                + p3 / nf.powi(4);
            weighted_sum[z] = p1 / nf + zf * nz / nf * k1;
        }

        Ok(Self { n, p_hat, mode, bracket, weighted_sum })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p_hat(&self) -> f64 {
        self.p_hat
    }

    /// `(expectation_term, variance_term)`: the mean of the coupling bracket
    /// and the variance of the weighted group-contrast sum under the binomial
    /// count. Deterministic given the mode (per-draw counter seeding, reduced
    /// in draw order).
    pub fn terms(&self) -> (f64, f64) {
        match self.mode {
            ZMomentMode::ExactPolynomial => self.exact_terms(),
            ZMomentMode::MonteCarlo { draws, seed } => self.mc_terms(draws, seed),
        }
    }

    fn exact_terms(&self) -> (f64, f64) {
        let pmf = binomial_pmf(self.n, self.p_hat);
        let mut eb = 0.0;
        let mut eg = 0.0;
        let mut eg2 = 0.0;
        for z in 0..=self.n {
            eb += pmf[z] * self.bracket[z];
            eg += pmf[z] * self.weighted_sum[z];
            eg2 += pmf[z] * self.weighted_sum[z] * self.weighted_sum[z];
        }
        (eb, (eg2 - eg * eg).max(0.0))
    }

    fn mc_terms(&self, draws: u64, seed: u64) -> (f64, f64) {
        let dist = Binomial::new(self.n as u64, self.p_hat).expect("validated p_hat");
        let mut sum_b = 0.0;
        let mut sum_g = 0.0;
        let mut sum_g2 = 0.0;
        for i in 0..draws {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, i));
            let z = dist.sample(&mut rng) as usize;
            sum_b += self.bracket[z];
            sum_g += self.weighted_sum[z];
            sum_g2 += self.weighted_sum[z] * self.weighted_sum[z];
        }
        let d = draws as f64;
        let eb = sum_b / d;
        let var = if draws > 1 {
            ((sum_g2 - sum_g * sum_g / d) / (d - 1.0)).max(0.0)
        } else {
            0.0
        };
        (eb, var)
    }

    /// Monte Carlo standard error of the expectation term (0 in exact mode).
    pub fn expectation_mc_se(&self) -> f64 {
        match self.mode {
            ZMomentMode::ExactPolynomial => 0.0,
            ZMomentMode::MonteCarlo { draws, seed } => {
                let dist = Binomial::new(self.n as u64, self.p_hat).expect("validated p_hat");
                let mut sum = 0.0;
                let mut sum2 = 0.0;
                for i in 0..draws {
                    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, i));
                    let z = dist.sample(&mut rng) as usize;
                    sum += self.bracket[z];
                    sum2 += self.bracket[z] * self.bracket[z];
                }
                let d = draws as f64;
                if draws > 1 {
                    (((sum2 - sum * sum / d) / (d - 1.0)).max(0.0) / d).sqrt()
                } else {
                    0.0
                }
            }
        }
    }
}

/// SplitMix64-style mixing so each draw gets an independent stream.
fn mix_seed(seed: u64, counter: u64) -> u64 {
    let mut z = seed ^ counter.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Binomial(n, q) mass function via the multiplicative recurrence.
pub fn binomial_pmf(n: usize, q: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; n + 1];
    if q <= 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    if q >= 1.0 {
        pmf[n] = 1.0;
        return pmf;
    }
    let ratio = q / (1.0 - q);
    pmf[0] = (1.0 - q).powi(n as i32);
    for z in 0..n {
        pmf[z + 1] = pmf[z] * (n - z) as f64 / (z + 1) as f64 * ratio;
    }
    pmf
}
