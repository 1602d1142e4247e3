use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::predict::{predict_exponent, ExponentInputs};
use super::TAU;
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::polyfunc::{phi_residual, phi_subdiff, CompositeProblem, SmoothFunction, SmoothQuadratic};
use crate::polyhedra::{min_norm_weighted, project_onto_polyhedron};
use crate::reparam::{lift_eval, lifted_residual, square, support_set, TOL_SUPPORT};
use crate::second_order::normal_vec;

#[derive(Debug, Clone, Copy)]
pub struct ScatterConfig {
    pub delta_min: f64,
    pub delta_max: f64,
    pub n_radii: usize,
    pub n_dirs: usize,
    pub bins: usize,
    pub seed: u64,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        Self {
            delta_min: 1e-6,
            delta_max: 1e-2,
            n_radii: 64,
            n_dirs: 32,
            bins: 12,
            seed: 0,
        }
    }
}

impl ScatterConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.delta_min > 0.0
            && self.delta_max.is_finite()
            && self.delta_min < self.delta_max
            && self.n_radii >= 2
            && self.n_dirs >= 1
            && self.bins >= 2;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidRange(format!(
                "need 0 < delta_min < delta_max < ∞, n_radii >= 2, n_dirs >= 1, bins >= 2; got {self:?}"
            )))
        }
    }

    fn radii(&self) -> impl Iterator<Item = f64> + '_ {
        let ratio = self.delta_max / self.delta_min;
        (0..self.n_radii).map(move |r| self.delta_min * ratio.powf(r as f64 / (self.n_radii - 1) as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterSample {
    pub gap: f64,
    pub residual: f64,
}

fn gap_floor(base: f64) -> f64 {
    10.0 * f64::EPSILON * base.abs().max(1.0)
}

/// Points `x = Π_{dom g}(x̄ + δu)` for log-spaced `δ` and random unit `u`.
fn perturbed_points(dom: &crate::polyhedra::Polyhedron, xbar: &DVector<f64>, cfg: &ScatterConfig, rng: &mut ChaCha8Rng) -> Result<Vec<DVector<f64>>> {
    let n = xbar.len();
    let mut out = Vec::with_capacity(cfg.n_radii * cfg.n_dirs);
    for delta in cfg.radii() {
        for _ in 0..cfg.n_dirs {
            let u = normal_vec(rng, n);
            let norm = u.norm();
            if norm == 0.0 {
                continue;
            }
            out.push(project_onto_polyhedron(dom, &(xbar + u * (delta / norm)))?);
        }
    }
    Ok(out)
}

/// `(Phi(y) - Phi(ȳ), dist(0, ∂Phi(y)))` at sampled `y` near a lifted
/// stationary point `ȳ`, sorted by gap. Signs of `y` follow `ȳ` on its
/// support and are random elsewhere; only `y` with `y² ∈ dom g` are kept.
pub fn sample_scatter<F: SmoothFunction>(p: &CompositeProblem<F>, ybar: &DVector<f64>, cfg: &ScatterConfig) -> Result<Vec<ScatterSample>> {
    cfg.validate()?;
    let n = p.dim();
    if ybar.len() != n {
        return Err(Error::dims("ȳ length differs from problem dimension"));
    }
    let residual = lifted_residual(p, ybar)?.value;
    if residual > TAU * (1.0 + 2.0 * ybar.amax()) {
        return Err(Error::NotAStationaryPoint { residual });
    }
    let base = lift_eval(p, ybar).to_f64();
    let support = support_set(ybar, TOL_SUPPORT);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let points = perturbed_points(p.g.domain(), &square(ybar), cfg, &mut rng)?;
    let mut out = Vec::new();
    for x in points {
        let y = DVector::from_fn(n, |i, _| {
            let s = if support.contains(i) {
                ybar[i].signum()
            } else if rng.gen_bool(0.5) {
                1.0
            } else {
                -1.0
            };
            s * x[i].max(0.0).sqrt()
        });
        let ExtReal::Finite(val) = lift_eval(p, &y) else {
            continue;
        };
        let gap = val - base;
        if gap <= gap_floor(base) {
            continue;
        }
        out.push(ScatterSample {
            gap,
            residual: lifted_residual(p, &y)?.value,
        });
    }
    if out.is_empty() {
        return Err(Error::InsufficientSamples(format!(
            "no sample rose more than {:.3e} above Phi(ȳ)",
            gap_floor(base)
        )));
    }
    out.sort_by(|a, b| a.gap.total_cmp(&b.gap).then(a.residual.total_cmp(&b.residual)));
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct KlFitReport {
    /// Slope of log(min residual) against log(gap) over the bins.
    pub alpha_hat: f64,
    pub n_samples: usize,
    pub gap_range: (f64, f64),
    /// `(log gap, log residual)` of the smallest-residual sample of each nonempty bin.
    pub bin_minima: Vec<(f64, f64)>,
    pub r_squared: f64,
    pub predicted: Option<f64>,
    /// `|alpha_hat - predicted| <= 0.05`.
    pub verdict: Option<bool>,
}

/// Least-squares line through `pts`: `(slope, intercept, r²)`.
pub(crate) fn fit_line(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}

pub const MIN_NONEMPTY_BINS: usize = 8;

/// Fits `residual ≈ c · gap^α` to the lower envelope of the scatter.
/// Samples with zero residual carry no slope information and are skipped.
pub fn estimate_exponent<F: SmoothFunction>(
    p: &CompositeProblem<F>,
    ybar: &DVector<f64>,
    cfg: &ScatterConfig,
    inputs: Option<ExponentInputs>,
) -> Result<KlFitReport> {
    let samples = sample_scatter(p, ybar, cfg)?;
    let logs: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.residual > 0.0)
        .map(|s| (s.gap.ln(), s.residual.ln()))
        .collect();
    let lo = logs.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = logs.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    if logs.is_empty() || hi <= lo {
        return Err(Error::InsufficientSamples("gaps span no range".into()));
    }
    let width = (hi - lo) / cfg.bins as f64;
    let mut minima: Vec<Option<(f64, f64)>> = vec![None; cfg.bins];
    for &(lg, lr) in &logs {
        let b = (((lg - lo) / width) as usize).min(cfg.bins - 1);
        if minima[b].is_none_or(|(_, r)| lr < r) {
            minima[b] = Some((lg, lr));
        }
    }
    let bin_minima: Vec<(f64, f64)> = minima.into_iter().flatten().collect();
    if bin_minima.len() < MIN_NONEMPTY_BINS {
        return Err(Error::InsufficientSamples(format!(
            "{} nonempty bins, need {MIN_NONEMPTY_BINS}",
            bin_minima.len()
        )));
    }
    let (alpha_hat, _, r_squared) = fit_line(&bin_minima);
    let predicted = inputs.map(predict_exponent).transpose()?;
    Ok(KlFitReport {
        alpha_hat,
        n_samples: samples.len(),
        gap_range: (samples[0].gap, samples[samples.len() - 1].gap),
        bin_minima,
        r_squared,
        predicted,
        verdict: predicted.map(|e| (alpha_hat - e).abs() <= 0.05),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct LemmaProbe {
    /// Smallest sampled `LHS / gap^{1+β}`.
    pub infimum: f64,
    pub n_samples: usize,
    /// Gap at which the infimum was attained.
    pub gap_at_infimum: f64,
}

/// Sampled infimum of
/// `(Σ_I |v_i|² + Σ_{I^c} |x_i - x̄_i| |v_i|²) / (phi(x) - phi(x̄))^{1+β}`
/// near a minimizer `x̄`, with `I` the support of `x̄` and `v ∈ ∂phi(x)`
/// chosen to minimize the numerator.
pub fn lemma61_probe(p: &CompositeProblem<SmoothQuadratic>, xbar: &DVector<f64>, beta: f64, cfg: &ScatterConfig) -> Result<LemmaProbe> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidRange(format!("beta = {beta} must lie in [0, 1]")));
    }
    let n = p.dim();
    if xbar.len() != n {
        return Err(Error::dims("x̄ length differs from problem dimension"));
    }
    let min_eigenvalue = p.f.min_eigenvalue();
    if min_eigenvalue < -1e-10 {
        return Err(Error::NotConvex { min_eigenvalue });
    }
    let residual = phi_residual(p, xbar)?;
    if residual > TAU {
        return Err(Error::NotAMinimizer { residual });
    }
    let base = p.eval(xbar).to_f64();
    let support = support_set(xbar, TOL_SUPPORT);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(f64, f64)> = None;
    let mut count = 0;
    for x in perturbed_points(p.g.domain(), xbar, cfg, &mut rng)? {
        let ExtReal::Finite(val) = p.eval(&x) else {
            continue;
        };
        let gap = val - base;
        if gap <= gap_floor(base) {
            continue;
        }
        let weights = DVector::from_fn(n, |i, _| {
            if support.contains(i) {
                1.0
            } else {
                (x[i] - xbar[i]).abs().sqrt()
            }
        });
        let lhs = min_norm_weighted(&phi_subdiff(p, &x)?, &DVector::zeros(n), &weights)?
            .value
            .powi(2);
        let ratio = lhs / gap.powf(1.0 + beta);
        count += 1;
        if best.is_none_or(|(r, _)| ratio < r) {
            best = Some((ratio, gap));
        }
    }
    let (infimum, gap_at_infimum) =
        best.ok_or_else(|| Error::InsufficientSamples("no sampled point rose above phi(x̄)".into()))?;
    Ok(LemmaProbe {
        infimum,
        n_samples: count,
        gap_at_infimum,
    })
}
