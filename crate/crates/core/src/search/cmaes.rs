//! (μ/μ_w, λ)-CMA-ES with restarts, maximizing over a box.
//!
//! The search runs in box-normalized coordinates `z ∈ [0,1]^n`. Samples that
//! leave the unit cube are evaluated at their projection, minus a quadratic
//! penalty on the repair distance, so the mean is pulled back inside.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaesConfig {
    pub restarts: usize,
    /// Population size; `None` means 4 + ⌊3 ln n⌋.
    pub population: Option<usize>,
    /// Initial step size as a fraction of the box width.
    pub sigma0: f64,
    pub max_generations: usize,
    /// Stop a restart once σ·max(√eig C) falls below this (normalized units).
    pub tol_x: f64,
    /// Weight of the quadratic out-of-box repair penalty.
    pub repair_weight: f64,
}

impl Default for CmaesConfig {
    fn default() -> Self {
        Self { restarts: 50, population: None, sigma0: 0.3, max_generations: 200, tol_x: 1e-12, repair_weight: 1e6 }
    }
}

/// Best point of one restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaesResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub restart: usize,
    pub generations: usize,
    pub evaluations: usize,
}

pub fn default_population(n: usize) -> usize {
    4 + (3.0 * (n as f64).ln()).floor() as usize
}

struct Box01<'a> {
    lo: &'a [f64],
    hi: &'a [f64],
}

impl Box01<'_> {
    fn to_x(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(self.lo.iter().zip(self.hi)).map(|(&z, (&l, &h))| l + z * (h - l)).collect()
    }

    fn to_z(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lo.iter().zip(self.hi))
            .map(|(&x, (&l, &h))| if h > l { (x - l) / (h - l) } else { 0.5 })
            .collect()
    }
}

/// Maximize `f` over the box `[lo, hi]`; one result per restart, sorted by
/// value (descending) then restart index. Deterministic for a given seed.
///
/// If `x0` is given, restart 0 starts there and `x0` itself counts as an
/// evaluated point, so no result is worse than `f(x0)` for that restart.
pub fn maximize<F>(f: F, lo: &[f64], hi: &[f64], x0: Option<&[f64]>, cfg: &CmaesConfig, seed: u64) -> Vec<CmaesResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    assert_eq!(lo.len(), hi.len(), "box bounds length mismatch");
    assert!(lo.iter().zip(hi).all(|(l, h)| l <= h), "box needs lo <= hi");
    let mut out: Vec<CmaesResult> = (0..cfg.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let start = if r == 0 { x0 } else { None };
            run_restart(&f, lo, hi, start, cfg, seed, r)
        })
        .collect();
    out.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.restart.cmp(&b.restart)));
    out
}

fn run_restart<F>(
    f: &F,
    lo: &[f64],
    hi: &[f64],
    x0: Option<&[f64]>,
    cfg: &CmaesConfig,
    seed: u64,
    restart: usize,
) -> CmaesResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = lo.len();
    let bx = Box01 { lo, hi };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);

    let lambda = cfg.population.unwrap_or_else(|| default_population(n)).max(2);
    let mu = lambda / 2;
    let raw_w: Vec<f64> = (0..mu).map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - ((i + 1) as f64).ln()).collect();
    let wsum: f64 = raw_w.iter().sum();
    let w: Vec<f64> = raw_w.iter().map(|v| v / wsum).collect();
    let mu_eff = 1.0 / w.iter().map(|v| v * v).sum::<f64>();

    let nf = n as f64;
    let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
    let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
    let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
    let c1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
    let c_mu = (1.0 - c1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    let mut mean = match x0 {
        Some(x) => DVector::from_vec(bx.to_z(x)),
        None => DVector::from_fn(n, |_, _| rand::Rng::random::<f64>(&mut rng)),
    };
    let mut sigma = cfg.sigma0;
    let mut c = DMatrix::<f64>::identity(n, n);
    let mut b = DMatrix::<f64>::identity(n, n);
    let mut d = DVector::<f64>::from_element(n, 1.0);
    let mut p_sigma = DVector::<f64>::zeros(n);
    let mut p_c = DVector::<f64>::zeros(n);

    // (penalized value for ranking, true value at the projection, projection)
    let evaluate = |z: &DVector<f64>| -> (f64, f64, Vec<f64>) {
        let zc: Vec<f64> = z.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let dist2: f64 = z.iter().zip(&zc).map(|(a, b)| (a - b) * (a - b)).sum();
        let v = f(&bx.to_x(&zc));
        let v = if v.is_nan() { f64::MIN } else { v };
        (v - cfg.repair_weight * dist2, v, zc)
    };

    let mut evaluations = 0;
    let (mut best_z, mut best_v) = match x0 {
        Some(_) => {
            evaluations += 1;
            let z: Vec<f64> = mean.iter().map(|v| v.clamp(0.0, 1.0)).collect();
            let v = f(&bx.to_x(&z));
            (z, v)
        }
        None => (mean.iter().map(|v| v.clamp(0.0, 1.0)).collect(), f64::NEG_INFINITY),
    };

    let mut generations = 0;
    while generations < cfg.max_generations {
        generations += 1;
        let mut pop: Vec<(DVector<f64>, DVector<f64>, f64)> = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            let g = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let y = &b * d.component_mul(&g);
            let z = &mean + sigma * &y;
            let (v, raw, zc) = evaluate(&z);
            evaluations += 1;
            // projections are feasible points, so they count for the best
            if raw > best_v {
                best_v = raw;
                best_z = zc;
            }
            pop.push((z, y, v));
        }
        pop.sort_by(|a, b| b.2.total_cmp(&a.2));

        let y_w = pop.iter().take(mu).zip(&w).fold(DVector::zeros(n), |acc, ((_, y, _), wi)| acc + *wi * y);
        mean += sigma * &y_w;

        let inv_sqrt_c = &b * DMatrix::from_diagonal(&d.map(|v| 1.0 / v)) * b.transpose();
        p_sigma = (1.0 - c_sigma) * &p_sigma + (c_sigma * (2.0 - c_sigma) * mu_eff).sqrt() * (&inv_sqrt_c * &y_w);
        let ps_norm = p_sigma.norm();
        let h_sigma = ps_norm / (1.0 - (1.0 - c_sigma).powi(2 * (generations as i32 + 1))).sqrt()
            < (1.4 + 2.0 / (nf + 1.0)) * chi_n;
        let hs = if h_sigma { 1.0 } else { 0.0 };
        p_c = (1.0 - c_c) * &p_c + hs * (c_c * (2.0 - c_c) * mu_eff).sqrt() * &y_w;

        let rank_mu = pop
            .iter()
            .take(mu)
            .zip(&w)
            .fold(DMatrix::zeros(n, n), |acc, ((_, y, _), wi)| acc + *wi * (y * y.transpose()));
        c = (1.0 - c1 - c_mu) * &c
            + c1 * (&p_c * p_c.transpose() + (1.0 - hs) * c_c * (2.0 - c_c) * &c)
            + c_mu * rank_mu;
        c = (&c + c.transpose()) * 0.5;
        sigma *= ((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0)).exp();

        let eig = c.clone().symmetric_eigen();
        b = eig.eigenvectors;
        d = eig.eigenvalues.map(|v| v.max(1e-300).sqrt());

        if sigma * d.max() < cfg.tol_x || !sigma.is_finite() {
            break;
        }
    }

    CmaesResult { x: bx.to_x(&best_z), value: best_v, restart, generations, evaluations }
}
