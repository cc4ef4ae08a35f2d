use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ClassWeight, ClassifierError, FitConfig, Result};
use crate::corpus::UserClass;
use crate::digest::json_digest;
use crate::sparse::{SparseMatrix, SparseVector};

pub const MODEL_FORMAT: &str = "promptbow-logistic-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// Line search could not decrease the loss any further.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub config_digest: String,
    pub seed: u64,
    pub l2: f64,
    pub final_loss: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub stop: StopReason,
    /// Loss after each accepted step, starting from the zero model.
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub format: String,
    pub version: u32,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
    pub meta: FitMeta,
}

impl LogisticModel {
    pub fn width(&self) -> usize {
        self.weights.len()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_vec(self).map_err(|e| ClassifierError::Artifact(e.to_string()))?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path)?;
        let model: LogisticModel =
            serde_json::from_slice(&bytes).map_err(|e| ClassifierError::Artifact(e.to_string()))?;
        if model.format != MODEL_FORMAT || model.version != MODEL_VERSION {
            return Err(ClassifierError::Artifact(format!(
                "expected {MODEL_FORMAT} v{MODEL_VERSION}, found {} v{}",
                model.format, model.version
            )));
        }
        Ok(model)
    }

    pub fn predict(&self, x: &SparseVector) -> Result<UserClass> {
        let p = predict_proba(self, x)?;
        Ok(if p >= self.threshold { UserClass::Diagnosed } else { UserClass::Control })
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn predict_proba(model: &LogisticModel, x: &SparseVector) -> Result<f64> {
    if x.dim != model.width() {
        return Err(ClassifierError::DimensionMismatch { expected: model.width(), found: x.dim });
    }
    Ok(sigmoid(x.dot(&model.weights) + model.bias))
}

fn sample_weights(y: &[UserClass], mode: ClassWeight) -> Vec<f64> {
    match mode {
        ClassWeight::None => vec![1.0; y.len()],
        ClassWeight::Balanced => {
            let n = y.len() as f64;
            let pos = y.iter().filter(|c| c.is_positive()).count() as f64;
            let w_pos = n / (2.0 * pos);
            let w_neg = n / (2.0 * (n - pos));
            y.iter().map(|c| if c.is_positive() { w_pos } else { w_neg }).collect()
        }
    }
}

fn check_shapes(weights: &[f64], x: &SparseMatrix, y: &[UserClass]) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(ClassifierError::LengthMismatch { predictions: x.n_rows(), truth: y.len() });
    }
    if weights.len() != x.n_cols {
        return Err(ClassifierError::DimensionMismatch { expected: x.n_cols, found: weights.len() });
    }
    Ok(())
}

fn margins(weights: &[f64], bias: f64, x: &SparseMatrix) -> Vec<f64> {
    x.rows.par_iter().map(|row| row.iter().map(|&(j, v)| v * weights[j as usize]).sum::<f64>() + bias).collect()
}

/// Mean of per-sample weights times the negative log-likelihood, plus `l2/2 * |w|^2`.
fn objective(z: &[f64], weights: &[f64], y: &[UserClass], s: &[f64], l2: f64) -> f64 {
    let n = y.len() as f64;
    let nll: f64 = z
        .iter()
        .zip(y)
        .zip(s)
        .map(|((&zi, c), &si)| si * if c.is_positive() { softplus(-zi) } else { softplus(zi) })
        .sum();
    nll / n + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

fn gradient_from_margins(
    z: &[f64],
    weights: &[f64],
    x: &SparseMatrix,
    y: &[UserClass],
    s: &[f64],
    l2: f64,
) -> (Vec<f64>, f64) {
    let n = y.len() as f64;
    let mut grad: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let mut gb = 0.0;
    for ((row, (&zi, c)), &si) in x.rows.iter().zip(z.iter().zip(y)).zip(s) {
        let target = if c.is_positive() { 1.0 } else { 0.0 };
        let r = si * (sigmoid(zi) - target) / n;
        gb += r;
        for &(j, v) in row {
            grad[j as usize] += r * v;
        }
    }
    (grad, gb)
}

/// Class-weighted mean negative log-likelihood plus `l2/2 * |w|^2` (bias
/// unregularized), with its exact gradient. Diagnosed is the positive class.
pub fn loss_and_gradient(
    weights: &[f64],
    bias: f64,
    x: &SparseMatrix,
    y: &[UserClass],
    config: &FitConfig,
) -> Result<(f64, Vec<f64>, f64)> {
    check_shapes(weights, x, y)?;
    let l2 = config.l2_for(y.len());
    let s = sample_weights(y, config.class_weight);
    let z = margins(weights, bias, x);
    let loss = objective(&z, weights, y, &s, l2);
    let (grad, gb) = gradient_from_margins(&z, weights, x, y, &s, l2);
    Ok((loss, grad, gb))
}

fn norm(g: &[f64], gb: f64) -> f64 {
    (g.iter().map(|v| v * v).sum::<f64>() + gb * gb).sqrt()
}

/// Full-batch gradient descent. Each iteration tries a Barzilai-Borwein step
/// and halves it until the Armijo condition holds, so accepted steps never
/// increase the loss.
pub fn fit(x: &SparseMatrix, y: &[UserClass], config: &FitConfig) -> Result<LogisticModel> {
    config.validate()?;
    let pos = y.iter().filter(|c| c.is_positive()).count();
    if pos == 0 || pos == y.len() {
        return Err(ClassifierError::SingleClass);
    }
    let mut w = vec![0.0; x.n_cols];
    let mut b = 0.0;
    check_shapes(&w, x, y)?;
    let l2 = config.l2_for(y.len());
    let s = sample_weights(y, config.class_weight);

    let z = margins(&w, b, x);
    let mut loss = objective(&z, &w, y, &s, l2);
    let (mut g, mut gb) = gradient_from_margins(&z, &w, x, y, &s, l2);
    let mut trace = vec![loss];
    let mut step = 1.0;
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;

    while iterations < config.max_iter {
        let gnorm = norm(&g, gb);
        if gnorm <= config.tol {
            stop = StopReason::Converged;
            break;
        }
        let mut accepted = None;
        let mut t = step;
        for _ in 0..60 {
            let w_new: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi - t * gi).collect();
            let b_new = b - t * gb;
            let z_new = margins(&w_new, b_new, x);
            let loss_new = objective(&z_new, &w_new, y, &s, l2);
            if loss_new <= loss - 1e-4 * t * gnorm * gnorm {
                accepted = Some((w_new, b_new, z_new, loss_new, t));
                break;
            }
            t *= 0.5;
        }
        let Some((w_new, b_new, z_new, loss_new, t)) = accepted else {
            stop = StopReason::Stalled;
            break;
        };
        let (g_new, gb_new) = gradient_from_margins(&z_new, &w_new, x, y, &s, l2);

        // Barzilai-Borwein: <s, s> / <s, d> with s the step and d the gradient change.
        let mut ss = (b_new - b) * (b_new - b);
        let mut sd = (b_new - b) * (gb_new - gb);
        for j in 0..w.len() {
            let sj = w_new[j] - w[j];
            ss += sj * sj;
            sd += sj * (g_new[j] - g[j]);
        }
        step = if sd > 0.0 && (ss / sd).is_finite() { ss / sd } else { 2.0 * t };

        w = w_new;
        b = b_new;
        loss = loss_new;
        g = g_new;
        gb = gb_new;
        trace.push(loss);
        iterations += 1;
    }
    let gradient_norm = norm(&g, gb);
    if stop == StopReason::MaxIterations && gradient_norm <= config.tol {
        stop = StopReason::Converged;
    }
    Ok(LogisticModel {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        weights: w,
        bias: b,
        threshold: config.threshold,
        meta: FitMeta {
            config_digest: json_digest(config),
            seed: config.seed,
            l2,
            final_loss: loss,
            gradient_norm,
            iterations,
            stop,
            loss_trace: trace,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use UserClass::{Control as C, Diagnosed as D};

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (SparseMatrix, Vec<UserClass>, Vec<f64>, f64) {
        let dense: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(-2.0..2.0) }).collect())
            .collect();
        let mut y: Vec<UserClass> = (0..n).map(|_| if rng.random_bool(0.3) { D } else { C }).collect();
        y[0] = D;
        y[1] = C;
        let w = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        (SparseMatrix::from_dense(&dense), y, w, rng.random_range(-1.0..1.0))
    }

    /// Central differences over every coordinate, the bias last.
    fn numeric_gradient(w: &[f64], b: f64, x: &SparseMatrix, y: &[UserClass], cfg: &FitConfig) -> Vec<f64> {
        let f = |w: &[f64], b: f64| loss_and_gradient(w, b, x, y, cfg).unwrap().0;
        let h = 1e-5;
        let mut out = Vec::new();
        for j in 0..w.len() {
            let (mut up, mut down) = (w.to_vec(), w.to_vec());
            up[j] += h;
            down[j] -= h;
            out.push((f(&up, b) - f(&down, b)) / (2.0 * h));
        }
        out.push((f(w, b + h) - f(w, b - h)) / (2.0 * h));
        out
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..20 {
            let (x, y, w, b) = random_problem(&mut rng, 5, 4);
            let cfg = FitConfig {
                l2: Some(0.3),
                class_weight: if i % 2 == 0 { ClassWeight::Balanced } else { ClassWeight::None },
                ..FitConfig::default()
            };
            let (_, g, gb) = loss_and_gradient(&w, b, &x, &y, &cfg).unwrap();
            let analytic: Vec<f64> = g.into_iter().chain([gb]).collect();
            for (a, n) in analytic.iter().zip(numeric_gradient(&w, b, &x, &y, &cfg)) {
                assert!((a - n).abs() <= 1e-6 * a.abs().max(n.abs()).max(1e-3), "{a} vs {n}");
            }
        }
    }

    #[test]
    fn zero_model_loss_is_ln2() {
        let x = SparseMatrix::from_dense(&[vec![1.0], vec![2.0], vec![0.5], vec![3.0]]);
        let cfg = FitConfig { l2: Some(0.0), ..FitConfig::default() };
        let (loss, _, _) = loss_and_gradient(&[0.0], 0.0, &x, &[D, C, D, C], &cfg).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        // Balanced weights keep the per-sample average at ln 2 under imbalance too.
        let (loss, _, _) = loss_and_gradient(&[0.0], 0.0, &x, &[D, C, C, C], &cfg).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn regularizer_isolated_on_zero_features() {
        let x = SparseMatrix::from_dense(&[vec![0.0, 0.0], vec![0.0, 0.0]]);
        let cfg = FitConfig { l2: Some(1e3), ..FitConfig::default() };
        let w = [0.25, -4.0];
        let (_, g, _) = loss_and_gradient(&w, 0.0, &x, &[D, C], &cfg).unwrap();
        assert_eq!(g, vec![1e3 * 0.25, 1e3 * -4.0]);
    }

    #[test]
    fn shape_errors() {
        let x = SparseMatrix::from_dense(&[vec![1.0, 0.0]]);
        let cfg = FitConfig::default();
        assert!(matches!(
            loss_and_gradient(&[0.0], 0.0, &x, &[D], &cfg),
            Err(ClassifierError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            loss_and_gradient(&[0.0, 0.0], 0.0, &x, &[D, C], &cfg),
            Err(ClassifierError::LengthMismatch { .. })
        ));
        assert!(matches!(fit(&x, &[D], &cfg), Err(ClassifierError::SingleClass)));
    }

    #[test]
    fn separable_one_dimensional() {
        let xs = [-3.0, -2.0, -1.5, -0.5, 0.5, 1.0, 2.0, 4.0];
        let x = SparseMatrix::from_dense(&xs.iter().map(|&v| vec![v]).collect::<Vec<_>>());
        let y: Vec<UserClass> = xs.iter().map(|&v| if v > 0.0 { D } else { C }).collect();
        let model = fit(&x, &y, &FitConfig { l2: Some(1e-4), ..FitConfig::default() }).unwrap();
        for (row, want) in x.rows.iter().zip(&y) {
            let v = SparseVector { dim: 1, entries: row.clone() };
            assert_eq!(model.predict(&v).unwrap(), *want);
        }
    }

    #[test]
    fn deterministic_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (x, y, _, _) = random_problem(&mut rng, 40, 12);
        let cfg = FitConfig::default();
        let a = fit(&x, &y, &cfg).unwrap();
        let b = fit(&x, &y, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.meta.loss_trace.windows(2).all(|p| p[1] <= p[0]));
        assert_eq!(a.meta.loss_trace.len(), a.meta.iterations + 1);
        assert_eq!(a.meta.stop, StopReason::Converged);
    }

    #[test]
    fn zero_and_saturated_models() {
        let mut m = fit(
            &SparseMatrix::from_dense(&[vec![1.0], vec![-1.0]]),
            &[D, C],
            &FitConfig { max_iter: 1, ..FitConfig::default() },
        )
        .unwrap();
        m.weights = vec![0.0];
        m.bias = 0.0;
        let x = SparseVector { dim: 1, entries: vec![(0, 7.0)] };
        assert_eq!(predict_proba(&m, &x).unwrap(), 0.5);
        m.bias = 30.0;
        assert!(predict_proba(&m, &x).unwrap() >= 1.0 - 1e-9);
        assert!(predict_proba(&m, &SparseVector::zeros(2)).is_err());
    }

    #[test]
    fn artifact_round_trip() {
        let m = fit(&SparseMatrix::from_dense(&[vec![1.0], vec![-1.0]]), &[D, C], &FitConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        assert_eq!(LogisticModel::load(&path).unwrap(), m);
        let mut stale = m.clone();
        stale.version = 0;
        stale.save(&path).unwrap();
        assert!(matches!(LogisticModel::load(&path), Err(ClassifierError::Artifact(_))));
    }

    proptest! {
        #[test]
        fn column_rescaling_is_neutral(seed in 0u64..500, c in 0.01f64..100.0, col in 0usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (x, _, w, b) = random_problem(&mut rng, 6, 4);
            let mut model = fit(&x, &[D, C, D, C, D, C], &FitConfig { max_iter: 1, ..FitConfig::default() }).unwrap();
            model.weights = w;
            model.bias = b;
            let mut scaled = model.clone();
            scaled.weights[col] /= c;
            for row in &x.rows {
                let v = SparseVector { dim: 4, entries: row.clone() };
                let vs = SparseVector {
                    dim: 4,
                    entries: row.iter().map(|&(j, x)| (j, if j as usize == col { x * c } else { x })).collect(),
                };
                let p = predict_proba(&model, &v).unwrap();
                let q = predict_proba(&scaled, &vs).unwrap();
                prop_assert!((p - q).abs() <= 1e-8);
            }
        }

        #[test]
        fn increasing_positive_weight_coordinate_is_monotone(seed in 0u64..500, delta in 0.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (x, _, w, b) = random_problem(&mut rng, 3, 4);
            let mut model = fit(&x, &[D, C, D], &FitConfig { max_iter: 1, ..FitConfig::default() }).unwrap();
            model.weights = w;
            model.bias = b;
            let base = SparseVector { dim: 4, entries: x.rows[0].clone() };
            for j in 0..4u32 {
                if model.weights[j as usize] > 0.0 {
                    let mut dense = base.to_dense();
                    dense[j as usize] += delta;
                    let bumped = SparseVector::from_unsorted(4, dense.iter().enumerate().map(|(i, &v)| (i as u32, v)).collect());
                    prop_assert!(predict_proba(&model, &bumped).unwrap() >= predict_proba(&model, &base).unwrap());
                }
            }
        }
    }
}
