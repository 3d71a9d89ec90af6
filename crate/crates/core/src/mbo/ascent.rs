use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, norm, sq_dist};
use crate::Scalar;

/// A differentiable function to maximize over latent vectors.
pub trait Objective<T: Scalar> {
    fn dim(&self) -> usize;

    fn value(&self, z: &[T]) -> Result<T>;

    fn value_and_gradient(&self, z: &[T]) -> Result<(T, Vec<T>)>;

    fn batch_value_and_gradient(&self, zs: &[Vec<T>]) -> Result<(Vec<T>, Vec<Vec<T>>)> {
        let mut vals = Vec::with_capacity(zs.len());
        let mut grads = Vec::with_capacity(zs.len());
        for z in zs {
            let (v, g) = self.value_and_gradient(z)?;
            vals.push(v);
            grads.push(g);
        }
        Ok((vals, grads))
    }
}

/// `f(z) = -‖z - center‖²`.
#[derive(Clone, Debug, PartialEq)]
pub struct NegSquaredDistance<T> {
    pub center: Vec<T>,
}

impl<T: Scalar> Objective<T> for NegSquaredDistance<T> {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, z: &[T]) -> Result<T> {
        Ok(-sq_dist(z, &self.center))
    }

    fn value_and_gradient(&self, z: &[T]) -> Result<(T, Vec<T>)> {
        let two = T::lit(2.0);
        let g = z.iter().zip(&self.center).map(|(&a, &c)| -two * (a - c)).collect();
        Ok((self.value(z)?, g))
    }
}

/// `f(z) = -½ Σ_i c_i (z_i - center_i)²` with positive curvatures `c_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic<T> {
    pub center: Vec<T>,
    pub curvature: Vec<T>,
}

impl<T: Scalar> Objective<T> for Quadratic<T> {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, z: &[T]) -> Result<T> {
        let half = T::lit(0.5);
        Ok(-z
            .iter()
            .zip(&self.center)
            .zip(&self.curvature)
            .map(|((&a, &m), &c)| half * c * (a - m) * (a - m))
            .sum::<T>())
    }

    fn value_and_gradient(&self, z: &[T]) -> Result<(T, Vec<T>)> {
        let g = z
            .iter()
            .zip(&self.center)
            .zip(&self.curvature)
            .map(|((&a, &m), &c)| -c * (a - m))
            .collect();
        Ok((self.value(z)?, g))
    }
}

/// Final points in start order; `flagged[i]` marks a trajectory that hit a
/// non-finite iterate (or a failed line search) and stopped early.
#[derive(Clone, Debug, PartialEq)]
pub struct Ascent<T> {
    pub points: Vec<Vec<T>>,
    pub flagged: Vec<bool>,
}

fn all_finite<T: Scalar>(v: &[T]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// `z ← z + step·∇f(z)` for `iters` rounds, all starts evaluated as one batch.
pub fn gradient_ascent<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    starts: &[Vec<T>],
    step: T,
    iters: usize,
) -> Result<Ascent<T>> {
    let mut points = starts.to_vec();
    let mut flagged = vec![false; starts.len()];
    let mut active: Vec<usize> = (0..starts.len()).collect();
    for _ in 0..iters {
        if active.is_empty() {
            break;
        }
        let batch: Vec<Vec<T>> = active.iter().map(|&i| points[i].clone()).collect();
        let (_, grads) = objective.batch_value_and_gradient(&batch)?;
        let mut still = Vec::with_capacity(active.len());
        for (&i, g) in active.iter().zip(&grads) {
            let next: Vec<T> = points[i].iter().zip(g).map(|(&z, &gi)| z + step * gi).collect();
            if all_finite(&next) {
                points[i] = next;
                still.push(i);
            } else {
                flagged[i] = true;
            }
        }
        active = still;
    }
    Ok(Ascent { points, flagged })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsConfig {
    pub max_iters: usize,
    pub memory: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    pub max_halvings: usize,
    /// Stop once the gradient norm falls below this.
    pub grad_tol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            max_iters: 6,
            memory: 10,
            armijo: 1e-4,
            max_halvings: 60,
            grad_tol: 1e-12,
        }
    }
}

/// Maximizes by running L-BFGS on `-f` from each start independently.
pub fn lbfgs_ascend<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    starts: &[Vec<T>],
    cfg: &LbfgsConfig,
) -> Result<Ascent<T>> {
    if cfg.memory == 0 {
        return Err(Error::param("L-BFGS memory must be at least 1"));
    }
    let mut points = Vec::with_capacity(starts.len());
    let mut flagged = Vec::with_capacity(starts.len());
    for s in starts {
        let (z, failed) = lbfgs_one(objective, s, cfg)?;
        points.push(z);
        flagged.push(failed);
    }
    Ok(Ascent { points, flagged })
}

fn lbfgs_one<T: Scalar, O: Objective<T> + ?Sized>(objective: &O, start: &[T], cfg: &LbfgsConfig) -> Result<(Vec<T>, bool)> {
    // minimize g = -f
    let eval = |z: &[T]| -> Result<(T, Vec<T>)> {
        let (v, g) = objective.value_and_gradient(z)?;
        Ok((-v, g.into_iter().map(|x| -x).collect()))
    };
    let mut x = start.to_vec();
    let (mut fx, mut gx) = eval(&x)?;
    if !fx.is_finite() || !all_finite(&gx) {
        return Ok((x, true));
    }
    let c1 = T::lit(cfg.armijo);
    let half = T::lit(0.5);
    let tol = T::lit(cfg.grad_tol);
    let mut hist_s: Vec<Vec<T>> = Vec::new();
    let mut hist_y: Vec<Vec<T>> = Vec::new();
    for _ in 0..cfg.max_iters {
        if norm(&gx) <= tol {
            break;
        }
        let mut p = two_loop(&gx, &hist_s, &hist_y);
        let mut slope = dot(&gx, &p);
        if !(slope < T::zero()) || !all_finite(&p) {
            p = gx.iter().map(|&g| -g).collect();
            slope = dot(&gx, &p);
            hist_s.clear();
            hist_y.clear();
        }
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let cand: Vec<T> = x.iter().zip(&p).map(|(&a, &b)| a + t * b).collect();
            if all_finite(&cand) {
                let (fc, gc) = eval(&cand)?;
                if fc.is_finite() && all_finite(&gc) && fc <= fx + c1 * t * slope && fc < fx {
                    accepted = Some((cand, fc, gc));
                    break;
                }
            }
            t = t * half;
        }
        let Some((xn, fn_, gn)) = accepted else {
            return Ok((x, true));
        };
        let s: Vec<T> = xn.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = gn.iter().zip(&gx).map(|(&a, &b)| a - b).collect();
        if dot(&s, &y) > T::lit(1e-300).max(T::min_positive_value()) {
            if hist_s.len() == cfg.memory {
                hist_s.remove(0);
                hist_y.remove(0);
            }
            hist_s.push(s);
            hist_y.push(y);
        }
        x = xn;
        fx = fn_;
        gx = gn;
    }
    Ok((x, false))
}

/// `-H·g` by the two-loop recursion with the usual `sᵀy / yᵀy` initial scale.
fn two_loop<T: Scalar>(g: &[T], hs: &[Vec<T>], hy: &[Vec<T>]) -> Vec<T> {
    let mut q = g.to_vec();
    let m = hs.len();
    let mut alphas = vec![T::zero(); m];
    let rho: Vec<T> = (0..m).map(|i| T::one() / dot(&hy[i], &hs[i])).collect();
    for i in (0..m).rev() {
        alphas[i] = rho[i] * dot(&hs[i], &q);
        for (qj, &yj) in q.iter_mut().zip(&hy[i]) {
            *qj = *qj - alphas[i] * yj;
        }
    }
    if m > 0 {
        let gamma = dot(&hs[m - 1], &hy[m - 1]) / dot(&hy[m - 1], &hy[m - 1]);
        for v in &mut q {
            *v = *v * gamma;
        }
    }
    for i in 0..m {
        let beta = rho[i] * dot(&hy[i], &q);
        for (qj, &sj) in q.iter_mut().zip(&hs[i]) {
            *qj = *qj + (alphas[i] - beta) * sj;
        }
    }
    q.into_iter().map(|v| -v).collect()
}
