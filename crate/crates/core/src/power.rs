//! Conditional-gradient maximization of a convex, positively homogeneous
//! numerator over the unit ball of a column-mixed norm.
//!
//! A witness is a `k × d` array (row `n` is the vector `x_n`, column `m` the
//! `m`-th coordinates of all vectors). Both square functions and weak norms on
//! `ℓ∞` domains only see the columns, so their unit balls are products of
//! column balls and the linear maximization step has a closed form. For a
//! convex numerator each step `x ← argmax_{ball} ⟨∇F(x), ·⟩` can only increase
//! `F`, so every restart climbs monotonically to a stationary point.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::mc::{self, tag};
use crate::space::{lp_norm, Exponent};


/// Denominator norm of a `k × d` witness.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Ball {
    /// `‖(‖column_m‖₂)_m‖_p`: the square-function norm in `ℓᵖ_d`.
    Mixed(Exponent),
    /// `max_m Σ_n |x_{n,m}|`: the weak-`ℓ¹` norm on an `ℓ∞` domain.
    WeakL1,
}

impl Ball {
    pub fn measure(&self, x: &[f64], k: usize, d: usize) -> f64 {
        match self {
            Ball::Mixed(p) => {
                let cols: Vec<f64> = (0..d).map(|m| column_norm(x, k, d, m)).collect();
                lp_norm(*p, &cols)
            }
            Ball::WeakL1 => (0..d)
                .map(|m| (0..k).map(|n| x[n * d + m].abs()).sum::<f64>())
                .fold(0.0, f64::max),
        }
    }

    /// Writes `argmax_{‖y‖ ≤ 1} ⟨g, y⟩` into `out`; false when `g = 0`.
    pub fn lmo(&self, g: &[f64], k: usize, d: usize, out: &mut [f64]) -> bool {
        out.iter_mut().for_each(|o| *o = 0.0);
        match self {
            Ball::Mixed(p) => {
                let cols: Vec<f64> = (0..d).map(|m| column_norm(g, k, d, m)).collect();
                if cols.iter().all(|&c| c == 0.0) {
                    return false;
                }
                let weights: Vec<f64> = match p {
                    Exponent::Infinity => cols.iter().map(|&c| if c > 0.0 { 1.0 } else { 0.0 }).collect(),
                    Exponent::Finite(p) if *p == 1.0 => {
                        let best = (0..d).fold(0, |b, m| if cols[m] > cols[b] { m } else { b });
                        (0..d).map(|m| if m == best { 1.0 } else { 0.0 }).collect()
                    }
                    Exponent::Finite(p) => {
                        let pd = p / (p - 1.0);
                        let raw: Vec<f64> = cols.iter().map(|c| c.powf(pd - 1.0)).collect();
                        let n = lp_norm(Exponent::Finite(*p), &raw);
                        raw.iter().map(|w| w / n).collect()
                    }
                };
                for m in 0..d {
                    if cols[m] > 0.0 {
                        for n in 0..k {
                            out[n * d + m] = weights[m] * g[n * d + m] / cols[m];
                        }
                    }
                }
                true
            }
            Ball::WeakL1 => {
                let mut any = false;
                for m in 0..d {
                    let best = (0..k).fold(0, |b, n| if g[n * d + m].abs() > g[b * d + m].abs() { n } else { b });
                    let v = g[best * d + m];
                    if v != 0.0 {
                        out[best * d + m] = v.signum();
                        any = true;
                    }
                }
                any
            }
        }
    }
}

fn column_norm(x: &[f64], k: usize, d: usize, m: usize) -> f64 {
    (0..k).map(|n| x[n * d + m] * x[n * d + m]).sum::<f64>().sqrt()
}

/// Gradient of `s ↦ ‖s‖_q` for a signed vector (a subgradient at kinks).
pub(crate) fn norm_gradient(q: Exponent, s: &[f64], norm: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    if norm == 0.0 {
        return;
    }
    match q {
        Exponent::Infinity => {
            let r = (0..s.len()).fold(0, |b, i| if s[i].abs() > s[b].abs() { i } else { b });
            out[r] = s[r].signum();
        }
        Exponent::Finite(1.0) => {
            for (o, v) in out.iter_mut().zip(s) {
                *o = if *v == 0.0 { 0.0 } else { v.signum() };
            }
        }
        Exponent::Finite(q) => {
            for (o, v) in out.iter_mut().zip(s) {
                *o = v.signum() * (v.abs() / norm).powf(q - 1.0);
            }
        }
    }
}

/// A convex, positively homogeneous function of a `k × d` witness.
pub(crate) trait Convex: Sync {
    fn shape(&self) -> (usize, usize);
    /// Value, and the gradient when `grad` is given.
    fn eval(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64;
}

pub(crate) struct PowerResult {
    pub x: Vec<f64>,
    pub ratio: f64,
}

fn ratio<F: Convex>(f: &F, ball: Ball, x: &[f64]) -> f64 {
    let (k, d) = f.shape();
    let den = ball.measure(x, k, d);
    if den < crate::rademacher::DEGENERATE_EPS {
        0.0
    } else {
        f.eval(x, None) / den
    }
}

fn climb<F: Convex>(f: &F, ball: Ball, mut x: Vec<f64>, max_iter: usize) -> Vec<f64> {
    let (k, d) = f.shape();
    let mut g = vec![0.0; k * d];
    let mut next = vec![0.0; k * d];
    let mut value = f.eval(&x, Some(&mut g));
    for _ in 0..max_iter {
        if !ball.lmo(&g, k, d, &mut next) {
            break;
        }
        let mut g_next = vec![0.0; k * d];
        let v = f.eval(&next, Some(&mut g_next));
        if v <= value * (1.0 + 1e-14) {
            break;
        }
        std::mem::swap(&mut x, &mut next);
        g = g_next;
        value = v;
    }
    x
}

/// Best ratio `F(x)/‖x‖` over the seeds, the climbs from the seeds, and
/// `restarts` climbs from random extreme points. Ties keep the earliest.
pub(crate) fn maximize<F: Convex>(
    f: &F,
    ball: Ball,
    seeds: Vec<Vec<f64>>,
    restarts: usize,
    seed: u64,
    max_iter: usize,
    stop_at: f64,
) -> PowerResult {
    let (k, d) = f.shape();
    let mut best = PowerResult { x: vec![0.0; k * d], ratio: 0.0 };
    let offer = |x: Vec<f64>, best: &mut PowerResult| {
        let r = ratio(f, ball, &x);
        if r > best.ratio {
            *best = PowerResult { x, ratio: r };
        }
    };
    let done = |best: &PowerResult| stop_at.is_finite() && best.ratio >= stop_at * (1.0 - 1e-12);
    for s in seeds {
        let den = ball.measure(&s, k, d);
        if den < crate::rademacher::DEGENERATE_EPS {
            continue;
        }
        let normalized: Vec<f64> = s.iter().map(|v| v / den).collect();
        offer(s, &mut best);
        if done(&best) {
            return best;
        }
        offer(climb(f, ball, normalized, max_iter), &mut best);
        if done(&best) {
            return best;
        }
    }
    let climbs: Vec<Vec<f64>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng: ChaCha8Rng = mc::stream_rng(seed, tag::POWER, r as u64);
            let g: Vec<f64> = (0..k * d).map(|_| mc::normal(&mut rng)).collect();
            let mut x0 = vec![0.0; k * d];
            ball.lmo(&g, k, d, &mut x0);
            climb(f, ball, x0, max_iter)
        })
        .collect();
    for x in climbs {
        offer(x, &mut best);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `F(x) = ‖x_flat‖₂` restricted to the first slot, trivially convex.
    struct FirstRow {
        k: usize,
        d: usize,
    }

    impl Convex for FirstRow {
        fn shape(&self) -> (usize, usize) {
            (self.k, self.d)
        }
        fn eval(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
            let v = x[..self.d].iter().map(|c| c * c).sum::<f64>().sqrt();
            if let Some(g) = grad {
                g.iter_mut().for_each(|o| *o = 0.0);
                if v > 0.0 {
                    for m in 0..self.d {
                        g[m] = x[m] / v;
                    }
                }
            }
            v
        }
    }

    #[test]
    fn lmo_attains_the_dual_norm() {
        let g = [3.0, 0.0, 4.0, 1.0, 0.0, 2.0];
        let (k, d) = (2, 3);
        let mut out = [0.0; 6];
        for ball in [Ball::Mixed(Exponent::Infinity), Ball::Mixed(Exponent::Finite(1.0)), Ball::Mixed(Exponent::Finite(3.0)), Ball::WeakL1] {
            assert!(ball.lmo(&g, k, d, &mut out));
            assert!((ball.measure(&out, k, d) - 1.0).abs() < 1e-12);
        }
        // ℓ∞(ℓ²): dual value is Σ_m ‖column_m‖₂ with columns (3,1), (0,0), (4,2)
        Ball::Mixed(Exponent::Infinity).lmo(&g, k, d, &mut out);
        let inner: f64 = g.iter().zip(&out).map(|(a, b)| a * b).sum();
        assert!((inner - (10f64.sqrt() + 20f64.sqrt())).abs() < 1e-12);
        // weak ℓ¹: Σ_m max_n |g_{n,m}| = 3 + 0 + 4
        Ball::WeakL1.lmo(&g, k, d, &mut out);
        let inner: f64 = g.iter().zip(&out).map(|(a, b)| a * b).sum();
        assert_eq!(inner, 7.0);
    }

    #[test]
    fn climbs_reach_the_obvious_maximum() {
        let f = FirstRow { k: 2, d: 3 };
        let r = maximize(&f, Ball::Mixed(Exponent::Infinity), vec![], 4, 1, 50, f64::INFINITY);
        assert!((r.ratio - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn norm_gradients() {
        let s = [3.0, -4.0];
        let mut g = [0.0; 2];
        norm_gradient(Exponent::Finite(2.0), &s, 5.0, &mut g);
        assert_eq!(g, [0.6, -0.8]);
        norm_gradient(Exponent::Infinity, &s, 4.0, &mut g);
        assert_eq!(g, [0.0, -1.0]);
        norm_gradient(Exponent::Finite(1.0), &s, 7.0, &mut g);
        assert_eq!(g, [1.0, -1.0]);
    }
}
