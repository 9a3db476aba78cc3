//! L2-regularized linear probes fit by accelerated gradient descent.
//!
//! Features are standardized with training statistics; the bias is not
//! regularized. Losses are averaged over samples:
//!
//! ```text
//! classifier: mean log(1 + exp(-s_i (w.x_i + b))) + lambda/2 |w|^2,  s_i in {-1, +1}
//! regressor:  mean (w.x_i + b - y_i)^2 / 2        + lambda/2 |w|^2
//! ```

use super::metrics::{macro_f1, spearman_rho};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKind {
    Classifier,
    Regressor,
}

/// Regularization strengths tried for classifiers, weakest first.
pub const CLASSIFIER_GRID: [f64; 5] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];
/// Regularization strengths tried for regressors, weakest first.
pub const REGRESSOR_GRID: [f64; 6] = [0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOptions {
    pub max_steps: usize,
    /// Stop once the gradient norm drops below this.
    pub tolerance: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            max_steps: 10_000,
            tolerance: 1e-6,
        }
    }
}

impl ProbeKind {
    pub fn default_grid(self) -> &'static [f64] {
        match self {
            ProbeKind::Classifier => &CLASSIFIER_GRID,
            ProbeKind::Regressor => &REGRESSOR_GRID,
        }
    }
}

/// Column means and inverse standard deviations. Constant columns map to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub inv_scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let n = x.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in x {
            for k in 0..d {
                var[k] += (row[k] - mean[k]).powi(2);
            }
        }
        let inv_scale = var
            .iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 {
                    1.0 / sd
                } else {
                    0.0
                }
            })
            .collect();
        Standardizer { mean, inv_scale }
    }

    pub fn apply(&self, row: &[f64], out: &mut [f64]) {
        for k in 0..row.len() {
            out[k] = (row[k] - self.mean[k]) * self.inv_scale[k];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    pub kind: ProbeKind,
    pub lambda: f64,
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub steps: usize,
    pub converged: bool,
}

/// Standardized design matrix, row major.
struct Design {
    n: usize,
    d: usize,
    z: Vec<f64>,
}

impl Design {
    fn row(&self, i: usize) -> &[f64] {
        &self.z[i * self.d..(i + 1) * self.d]
    }

    fn margins(&self, w: &[f64], b: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b;
        }
    }

    /// Largest eigenvalue of `[Z 1]^T [Z 1] / n`, by power iteration.
    fn spectral_bound(&self) -> f64 {
        let mut v = vec![1.0; self.d + 1];
        let mut lambda = 0.0;
        let mut zv = vec![0.0; self.n];
        for _ in 0..60 {
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 1.0;
            }
            v.iter_mut().for_each(|a| *a /= norm);
            self.margins(&v[..self.d], v[self.d], &mut zv);
            let mut next = vec![0.0; self.d + 1];
            for (i, &s) in zv.iter().enumerate() {
                for (nk, zk) in next.iter_mut().zip(self.row(i)) {
                    *nk += zk * s;
                }
                next[self.d] += s;
            }
            next.iter_mut().for_each(|a| *a /= self.n as f64);
            lambda = next.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
            v = next;
        }
        lambda.max(1e-12)
    }
}

struct Problem<'a> {
    design: &'a Design,
    y: &'a [f64],
    kind: ProbeKind,
    lambda: f64,
}

impl Problem<'_> {
    /// Loss and gradient at `theta = [w, b]`.
    fn eval(&self, theta: &[f64], grad: Option<&mut [f64]>, scratch: &mut [f64]) -> f64 {
        let d = self.design.d;
        let n = self.design.n as f64;
        self.design.margins(&theta[..d], theta[d], scratch);
        let mut loss = 0.0;
        for (i, m) in scratch.iter_mut().enumerate() {
            let (l, dl) = match self.kind {
                ProbeKind::Classifier => {
                    let s = if self.y[i] > 0.5 { 1.0 } else { -1.0 };
                    let t = -s * *m;
                    // log(1 + e^t) and its derivative, stable for large |t|
                    let l = if t > 0.0 { t + (-t).exp().ln_1p() } else { t.exp().ln_1p() };
                    let sig = 1.0 / (1.0 + (-t).exp());
                    (l, -s * sig)
                }
                ProbeKind::Regressor => {
                    let r = *m - self.y[i];
                    (0.5 * r * r, r)
                }
            };
            loss += l;
            *m = dl / n;
        }
        loss /= n;
        let wnorm: f64 = theta[..d].iter().map(|w| w * w).sum();
        loss += 0.5 * self.lambda * wnorm;
        if let Some(g) = grad {
            g.iter_mut().for_each(|v| *v = 0.0);
            for (i, &c) in scratch.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                for (gk, zk) in g[..d].iter_mut().zip(self.design.row(i)) {
                    *gk += c * zk;
                }
                g[d] += c;
            }
            for k in 0..d {
                g[k] += self.lambda * theta[k];
            }
        }
        loss
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

impl LinearProbe {
    /// Fits one probe. Classifier labels are 1.0 (positive) or 0.0.
    pub fn fit(x: &[Vec<f64>], y: &[f64], kind: ProbeKind, lambda: f64, opts: &ProbeOptions) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Invalid(format!(
                "probe needs matching non-empty features and labels, got {} rows and {} labels",
                x.len(),
                y.len()
            )));
        }
        if !(lambda >= 0.0) {
            return Err(Error::Invalid(format!("regularization must be non-negative, got {lambda}")));
        }
        let d = x[0].len();
        if x.iter().any(|r| r.len() != d) {
            return Err(Error::Invalid("probe feature rows differ in length".into()));
        }
        if y.iter().chain(x.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("probe inputs contain non-finite values".into()));
        }
        let standardizer = Standardizer::fit(x);
        let mut z = vec![0.0; x.len() * d];
        for (i, row) in x.iter().enumerate() {
            standardizer.apply(row, &mut z[i * d..(i + 1) * d]);
        }
        let design = Design { n: x.len(), d, z };
        let problem = Problem {
            design: &design,
            y,
            kind,
            lambda,
        };
        let curvature = match kind {
            ProbeKind::Classifier => 0.25,
            ProbeKind::Regressor => 1.0,
        };
        let mut lip = curvature * design.spectral_bound() * 1.05 + lambda;

        let mut scratch = vec![0.0; design.n];
        let mut theta = vec![0.0; d + 1];
        let mut momentum_point = theta.clone();
        let mut grad = vec![0.0; d + 1];
        let mut candidate = vec![0.0; d + 1];
        let mut t_k = 1.0f64;
        let mut current = problem.eval(&theta, None, &mut scratch);
        let mut steps = 0;
        let mut converged = false;
        while steps < opts.max_steps {
            let f_y = problem.eval(&momentum_point, Some(&mut grad), &mut scratch);
            let g2: f64 = grad.iter().map(|g| g * g).sum();
            // backtracking keeps the step valid if the bound was optimistic
            let f_new = loop {
                for k in 0..=d {
                    candidate[k] = momentum_point[k] - grad[k] / lip;
                }
                let f_c = problem.eval(&candidate, None, &mut scratch);
                if f_c <= f_y - 0.5 * g2 / lip + 1e-15 * f_y.abs() || lip > 1e12 {
                    break f_c;
                }
                lip *= 2.0;
            };
            steps += 1;
            let t_next = (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt()) / 2.0;
            if f_new > current {
                // restart momentum
                t_k = 1.0;
                momentum_point.copy_from_slice(&theta);
                continue;
            }
            let beta = (t_k - 1.0) / t_next;
            for k in 0..=d {
                momentum_point[k] = candidate[k] + beta * (candidate[k] - theta[k]);
            }
            theta.copy_from_slice(&candidate);
            current = f_new;
            t_k = t_next;
            problem.eval(&theta, Some(&mut grad), &mut scratch);
            if norm(&grad) < opts.tolerance {
                converged = true;
                break;
            }
        }
        let bias = theta[d];
        theta.truncate(d);
        Ok(LinearProbe {
            kind,
            lambda,
            standardizer,
            weights: theta,
            bias,
            steps,
            converged,
        })
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.standardizer.mean)
            .zip(&self.standardizer.inv_scale)
            .zip(&self.weights)
            .map(|(((v, m), s), w)| (v - m) * s * w)
            .sum::<f64>()
            + self.bias
    }

    /// Positive iff the decision value is positive.
    pub fn predict_label(&self, x: &[f64]) -> bool {
        self.decision(x) > 0.0
    }

    pub fn predict_value(&self, x: &[f64]) -> f64 {
        self.decision(x)
    }

    /// F1 for classifiers, Spearman for regressors.
    pub fn score(&self, x: &[Vec<f64>], y: &[f64]) -> f64 {
        match self.kind {
            ProbeKind::Classifier => {
                let pred: Vec<bool> = x.iter().map(|r| self.predict_label(r)).collect();
                let actual: Vec<bool> = y.iter().map(|&v| v > 0.5).collect();
                macro_f1(&pred, &actual).f1
            }
            ProbeKind::Regressor => {
                let pred: Vec<f64> = x.iter().map(|r| self.predict_value(r)).collect();
                spearman_rho(&pred, y)
            }
        }
    }
}

/// A probe with its regularization chosen on the tune split.
#[derive(Debug, Clone, PartialEq)]
pub struct TunedProbe {
    pub probe: LinearProbe,
    pub tune_score: f64,
    /// `(lambda, tune score)` for every grid value tried.
    pub trials: Vec<(f64, f64)>,
}

/// Fits one probe per grid value on `train` and keeps the best on `tune`.
/// Ties go to the earlier grid value.
pub fn train_probe(
    train: (&[Vec<f64>], &[f64]),
    tune: (&[Vec<f64>], &[f64]),
    kind: ProbeKind,
    grid: &[f64],
    opts: &ProbeOptions,
) -> Result<TunedProbe> {
    if grid.is_empty() {
        return Err(Error::Config("empty regularization grid".into()));
    }
    if tune.0.is_empty() {
        return Err(Error::Invalid("tune split is empty".into()));
    }
    let mut best: Option<(LinearProbe, f64)> = None;
    let mut trials = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let probe = LinearProbe::fit(train.0, train.1, kind, lambda, opts)?;
        let score = probe.score(tune.0, tune.1);
        trials.push((lambda, score));
        if best.as_ref().is_none_or(|(_, s)| score > *s) {
            best = Some((probe, score));
        }
    }
    let (probe, tune_score) = best.expect("grid is non-empty");
    Ok(TunedProbe {
        probe,
        tune_score,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn separable_training_f1_is_one() {
        let x = random_rows(80, 3, 1);
        let y: Vec<f64> = x.iter().map(|r| if r[0] + 0.5 * r[1] > 0.1 { 1.0 } else { 0.0 }).collect();
        let p = LinearProbe::fit(&x, &y, ProbeKind::Classifier, 1e-4, &ProbeOptions::default()).unwrap();
        assert_eq!(p.score(&x, &y), 1.0);
    }

    #[test]
    fn realizable_regression() {
        let x = random_rows(120, 4, 2);
        let f = |r: &[f64]| 3.0 * r[0] - 2.0 * r[1] + 0.5 * r[3] + 7.0;
        let y: Vec<f64> = x.iter().map(|r| f(r)).collect();
        let (train, test) = x.split_at(80);
        let tuned = train_probe(
            (train, &y[..80]),
            (&test[..20], &y[80..100]),
            ProbeKind::Regressor,
            &REGRESSOR_GRID,
            &ProbeOptions::default(),
        )
        .unwrap();
        let mae: f64 = test[20..]
            .iter()
            .zip(&y[100..])
            .map(|(r, t)| (tuned.probe.predict_value(r) - t).abs())
            .sum::<f64>()
            / 20.0;
        assert!(mae < 1e-3, "mae {mae}");
    }

    #[test]
    fn constant_labels() {
        let x = random_rows(30, 2, 3);
        let y = vec![4.25; 30];
        let p = LinearProbe::fit(&x, &y, ProbeKind::Regressor, 0.1, &ProbeOptions::default()).unwrap();
        for r in &x {
            assert!((p.predict_value(r) - 4.25).abs() < 1e-6);
        }
    }

    #[test]
    fn gradient_converges() {
        let x = random_rows(50, 5, 4);
        let y: Vec<f64> = x.iter().map(|r| if r[2] > 0.0 { 1.0 } else { 0.0 }).collect();
        let p = LinearProbe::fit(&x, &y, ProbeKind::Classifier, 0.1, &ProbeOptions::default()).unwrap();
        assert!(p.converged);
    }

    #[test]
    fn deterministic() {
        let x = random_rows(40, 3, 5);
        let y: Vec<f64> = x.iter().map(|r| r[0] + r[1]).collect();
        let a = LinearProbe::fit(&x, &y, ProbeKind::Regressor, 0.01, &ProbeOptions::default()).unwrap();
        let b = LinearProbe::fit(&x, &y, ProbeKind::Regressor, 0.01, &ProbeOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
