//! Limited-memory BFGS with a backtracking Armijo line search.
//!
//! Only sufficient decrease is enforced; curvature pairs with `s'y <= 0` are
//! skipped. That keeps the method usable on the piecewise-smooth Laplace
//! objective, where Wolfe curvature conditions often cannot be met.

use std::collections::VecDeque;

use crate::likelihood::Objective;

const ARMIJO_C: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsSettings {
    pub max_iterations: usize,
    /// Stop once the gradient sup-norm is at or below this.
    pub grad_tolerance: f64,
    /// Stop once the relative objective decrease of an accepted step is at or below this.
    pub step_tolerance: f64,
    pub history_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    StepTolerance,
    /// No step along steepest descent gives sufficient decrease.
    LineSearchStalled,
    MaxIterations,
}

impl Termination {
    pub fn converged(self) -> bool {
        !matches!(self, Termination::MaxIterations)
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub termination: Termination,
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Normalized steepest descent. Also used for the first step, which makes the
/// iterates invariant to positive rescaling of the objective.
fn steepest(g: &[f64], d: &mut [f64]) {
    let norm = dot(g, g).sqrt();
    for (di, gi) in d.iter_mut().zip(g) {
        *di = -gi / norm;
    }
}

/// Two-loop recursion: `d = -H g`.
fn quasi_newton_direction(g: &[f64], history: &VecDeque<Pair>, d: &mut [f64]) {
    d.copy_from_slice(g);
    let mut alpha = vec![0.0; history.len()];
    for (k, p) in history.iter().enumerate().rev() {
        alpha[k] = p.rho * dot(&p.s, d);
        for (di, yi) in d.iter_mut().zip(&p.y) {
            *di -= alpha[k] * yi;
        }
    }
    let last = history.back().expect("history is non-empty");
    let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
    d.iter_mut().for_each(|v| *v *= gamma);
    for (k, p) in history.iter().enumerate() {
        let beta = p.rho * dot(&p.y, d);
        for (di, si) in d.iter_mut().zip(&p.s) {
            *di += (alpha[k] - beta) * si;
        }
    }
    d.iter_mut().for_each(|v| *v = -*v);
}

/// Minimizes `objective` from `x0`.
///
/// Every accepted step strictly satisfies the Armijo condition, so the
/// returned value never exceeds the value at `x0`.
pub fn minimize<O: Objective + ?Sized>(objective: &O, x0: Vec<f64>, settings: &LbfgsSettings) -> Minimum {
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = objective.value_and_gradient(&x, &mut g);
    let mut d = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut history: VecDeque<Pair> = VecDeque::with_capacity(settings.history_size);

    for iteration in 0..settings.max_iterations {
        if sup_norm(&g) <= settings.grad_tolerance {
            return Minimum { x, value: f, iterations: iteration, termination: Termination::GradientTolerance };
        }

        if history.is_empty() {
            steepest(&g, &mut d);
        } else {
            quasi_newton_direction(&g, &history, &mut d);
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            steepest(&g, &mut d);
            slope = dot(&g, &d);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for ((xn, xi), di) in x_new.iter_mut().zip(&x).zip(&d) {
                *xn = xi + step * di;
            }
            let f_trial = objective.value_and_gradient(&x_new, &mut g_new);
            if f_trial.is_finite() && f_trial <= f + ARMIJO_C * step * slope {
                accepted = Some(f_trial);
                break;
            }
            step *= BACKTRACK;
        }

        let Some(f_new) = accepted else {
            if history.is_empty() {
                return Minimum { x, value: f, iterations: iteration, termination: Termination::LineSearchStalled };
            }
            // Retry from steepest descent before giving up.
            history.clear();
            continue;
        };
        debug_assert!(f_new <= f, "line search increased the objective");

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > f64::EPSILON * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if history.len() == settings.history_size {
                history.pop_front();
            }
            history.push_back(Pair { s, y, rho: 1.0 / sy });
        }

        let decrease = f - f_new;
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;

        if decrease <= settings.step_tolerance * f.abs().max(1.0) {
            return Minimum { x, value: f, iterations: iteration + 1, termination: Termination::StepTolerance };
        }
    }
    let termination = if sup_norm(&g) <= settings.grad_tolerance {
        Termination::GradientTolerance
    } else {
        Termination::MaxIterations
    };
    Minimum { x, value: f, iterations: settings.max_iterations, termination }
}
