//! Logistic regression and a linear SVM with sigmoid calibration.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

pub fn linear_score(weights: &[f64], bias: f64, x: &[f64]) -> f64 {
    dot(weights, x) + bias
}

/// Full-batch gradient descent on mean log-loss plus `l2/2 * |w|^2`.
/// The bias is not penalized.
pub fn fit_logistic(rows: &[Vec<f64>], y: &[bool], l2: f64, epochs: usize, lr: f64) -> (Vec<f64>, f64) {
    let p = rows.first().map_or(0, Vec::len);
    let n = rows.len() as f64;
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    for _ in 0..epochs {
        let mut gw = vec![0.0; p];
        let mut gb = 0.0;
        for (x, &t) in rows.iter().zip(y) {
            let err = sigmoid(dot(&w, x) + b) - t as u8 as f64;
            for (g, xi) in gw.iter_mut().zip(x) {
                *g += err * xi;
            }
            gb += err;
        }
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= lr * (g / n + l2 * *wi);
        }
        b -= lr * gb / n;
    }
    (w, b)
}

/// Pegasos: stochastic subgradient descent on the regularized hinge loss,
/// with the bias folded in as a constant feature.
pub fn fit_svm(rows: &[Vec<f64>], y: &[bool], l2: f64, epochs: usize, seed: u64) -> (Vec<f64>, f64) {
    let p = rows.first().map_or(0, Vec::len);
    let mut w = vec![0.0; p + 1];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let radius = 1.0 / l2.sqrt();
    let mut t = 0usize;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (l2 * t as f64);
            let target = if y[i] { 1.0 } else { -1.0 };
            let x = &rows[i];
            let margin = target * (dot(&w[..p], x) + w[p]);
            for wj in w.iter_mut() {
                *wj *= 1.0 - eta * l2;
            }
            if margin < 1.0 {
                for (wj, xj) in w[..p].iter_mut().zip(x) {
                    *wj += eta * target * xj;
                }
                w[p] += eta * target;
            }
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                for wj in w.iter_mut() {
                    *wj *= radius / norm;
                }
            }
        }
    }
    let b = w[p];
    w.truncate(p);
    (w, b)
}

/// Platt's sigmoid `P(y=1|f) = 1 / (1 + exp(a*f + b))`, fitted by Newton's
/// method with backtracking on smoothed targets.
pub fn fit_platt(scores: &[f64], y: &[bool]) -> (f64, f64) {
    let pos = y.iter().filter(|v| **v).count() as f64;
    let neg = y.len() as f64 - pos;
    let hi = (pos + 1.0) / (pos + 2.0);
    let lo = 1.0 / (neg + 2.0);
    let t: Vec<f64> = y.iter().map(|&v| if v { hi } else { lo }).collect();

    let objective = |a: f64, b: f64| -> f64 {
        scores
            .iter()
            .zip(&t)
            .map(|(f, ti)| {
                let z = f * a + b;
                if z >= 0.0 {
                    ti * z + (-z).exp().ln_1p()
                } else {
                    (ti - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };

    let mut a = 0.0;
    let mut b = ((neg + 1.0) / (pos + 1.0)).ln();
    let mut fval = objective(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (1e-12, 1e-12, 0.0, 0.0, 0.0);
        for (f, ti) in scores.iter().zip(&t) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < 1e-10 {
            break;
        }
    }
    (a, b)
}

pub fn platt_probability(a: f64, b: f64, score: f64) -> f64 {
    sigmoid(-(a * score + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) == 1.0 && sigmoid(-800.0) == 0.0);
    }

    #[test]
    fn logistic_learns_sign() {
        let rows: Vec<Vec<f64>> = (-10..10).map(|i| vec![i as f64 / 5.0]).collect();
        let y: Vec<bool> = (-10..10).map(|i| i >= 0).collect();
        let (w, _) = fit_logistic(&rows, &y, 1e-3, 200, 0.5);
        assert!(w[0] > 1.0);
    }

    #[test]
    fn svm_separates_and_platt_orders() {
        let rows: Vec<Vec<f64>> = (-10..10).map(|i| vec![i as f64 / 5.0 + 0.1]).collect();
        let y: Vec<bool> = (-10..10).map(|i| i >= 0).collect();
        let (w, b) = fit_svm(&rows, &y, 1e-3, 20, 1);
        let scores: Vec<f64> = rows.iter().map(|x| linear_score(&w, b, x)).collect();
        assert!(scores.iter().zip(&y).all(|(s, t)| (*s > 0.0) == *t));
        let (a, c) = fit_platt(&scores, &y);
        assert!(a < 0.0);
        assert!(platt_probability(a, c, 5.0) > platt_probability(a, c, -5.0));
    }
}
