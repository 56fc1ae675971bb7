//! Bounded Nelder-Mead simplex minimizer.
//!
//! Plain downhill simplex with the standard coefficients (reflection 1,
//! expansion 2, contraction 1/2, shrink 1/2), box constraints enforced by
//! projecting every candidate vertex, and restart rounds that rebuild a fresh
//! simplex at the incumbent until it stops improving. Everything is
//! deterministic given the start point.

/// Rectangular feasible region.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    /// # Panics
    ///
    /// Panics when the vectors differ in length or any interval is empty or
    /// non-finite.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len(), "bound vectors must match");
        assert!(!lower.is_empty(), "bounds must have at least one dimension");
        for (lo, hi) in lower.iter().zip(&upper) {
            assert!(
                lo.is_finite() && hi.is_finite() && lo < hi,
                "invalid bound interval [{lo}, {hi}]"
            );
        }
        Self { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| v >= lo && v <= hi)
    }

    /// Projects `x` onto the box, coordinate by coordinate.
    pub fn project(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

/// Termination controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimOptions {
    /// Simplex diameter (max coordinate spread) below which a round stops.
    pub diameter_tol: f64,
    /// Total objective-evaluation budget across all restart rounds.
    pub max_evals: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            diameter_tol: 1e-8,
            max_evals: 10_000,
        }
    }
}

/// Outcome of a minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// True when the final round ended on the diameter criterion rather than
    /// by exhausting the evaluation budget.
    pub converged: bool,
    /// Restart rounds performed (1 means no restart was needed).
    pub rounds: usize,
}

struct Budget<'a, F> {
    f: &'a mut F,
    used: usize,
    max: usize,
}

impl<F: FnMut(&[f64]) -> f64> Budget<'_, F> {
    /// One objective evaluation, or `None` once the budget is spent. NaN is
    /// mapped to +inf so vertex ordering stays total.
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.used >= self.max {
            return None;
        }
        self.used += 1;
        let v = (self.f)(x);
        Some(if v.is_nan() { f64::INFINITY } else { v })
    }
}

/// Initial displacement along dimension `i`, kept inside the box.
fn initial_vertex(base: &[f64], i: usize, bounds: &Bounds) -> Vec<f64> {
    let mut v = base.to_vec();
    let mut step = 0.05 * base[i].abs();
    if step == 0.0 {
        step = 0.00025;
    }
    let forward = base[i] + step;
    v[i] = if forward <= bounds.upper[i] {
        forward
    } else {
        base[i] - step
    };
    bounds.project(&mut v);
    v
}

fn diameter(vertices: &[(Vec<f64>, f64)]) -> f64 {
    let best = &vertices[0].0;
    vertices
        .iter()
        .skip(1)
        .flat_map(|(v, _)| v.iter().zip(best).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

/// One simplex descent from `start`. Returns the incumbent and whether the
/// diameter criterion was reached before the budget ran out.
fn descend<F: FnMut(&[f64]) -> f64>(
    budget: &mut Budget<'_, F>,
    start: &[f64],
    bounds: &Bounds,
    diameter_tol: f64,
) -> (Vec<f64>, f64, bool) {
    let n = bounds.dim();
    let mut vertices: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    match budget.eval(start) {
        Some(v) => vertices.push((start.to_vec(), v)),
        None => return (start.to_vec(), f64::INFINITY, false),
    }
    for i in 0..n {
        let vertex = initial_vertex(start, i, bounds);
        match budget.eval(&vertex) {
            Some(v) => vertices.push((vertex, v)),
            None => {
                vertices.sort_by(|a, b| a.1.total_cmp(&b.1));
                let (x, v) = vertices.swap_remove(0);
                return (x, v, false);
            }
        }
    }

    loop {
        vertices.sort_by(|a, b| a.1.total_cmp(&b.1));
        if diameter(&vertices) < diameter_tol {
            let (x, v) = vertices.swap_remove(0);
            return (x, v, true);
        }

        let mut centroid = vec![0.0; n];
        for (v, _) in &vertices[..n] {
            for (c, vi) in centroid.iter_mut().zip(v) {
                *c += vi / n as f64;
            }
        }
        let worst = vertices[n].clone();

        let make = |coef: f64| -> Vec<f64> {
            let mut x: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + coef * (c - w))
                .collect();
            bounds.project(&mut x);
            x
        };

        let reflected = make(1.0);
        let fr = match budget.eval(&reflected) {
            Some(v) => v,
            None => break,
        };

        if fr < vertices[0].1 {
            let expanded = make(2.0);
            let fe = match budget.eval(&expanded) {
                Some(v) => v,
                None => break,
            };
            vertices[n] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
            continue;
        }
        if fr < vertices[n - 1].1 {
            vertices[n] = (reflected, fr);
            continue;
        }

        let contracted = if fr < worst.1 { make(0.5) } else { make(-0.5) };
        let fc = match budget.eval(&contracted) {
            Some(v) => v,
            None => break,
        };
        if fc < fr.min(worst.1) {
            vertices[n] = (contracted, fc);
            continue;
        }

        // Shrink every vertex toward the best one.
        let best = vertices[0].0.clone();
        let mut exhausted = false;
        for i in 1..=n {
            let shrunk: Vec<f64> = vertices[i]
                .0
                .iter()
                .zip(&best)
                .map(|(v, b)| b + 0.5 * (v - b))
                .collect();
            match budget.eval(&shrunk) {
                Some(v) => vertices[i] = (shrunk, v),
                None => {
                    exhausted = true;
                    break;
                }
            }
        }
        if exhausted {
            break;
        }
    }

    vertices.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = vertices.swap_remove(0);
    (x, v, false)
}

const MAX_RESTART_ROUNDS: usize = 4;

/// Minimizes `f` over the box from `start`.
///
/// After a round reaches the diameter criterion, a fresh simplex is rebuilt
/// at the incumbent and descended again; rounds stop once the improvement
/// falls below the noise floor, the round cap is hit, or the evaluation
/// budget runs out.
pub fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    bounds: &Bounds,
    opts: &OptimOptions,
) -> OptimResult {
    assert_eq!(start.len(), bounds.dim(), "start must match bounds");
    let mut budget = Budget {
        f: &mut f,
        used: 0,
        max: opts.max_evals,
    };
    let mut incumbent = start.to_vec();
    bounds.project(&mut incumbent);

    let mut best_x = incumbent.clone();
    let mut best_val = f64::INFINITY;
    let mut converged = false;
    let mut rounds = 0;

    while rounds < MAX_RESTART_ROUNDS {
        let (x, value, hit_tol) = descend(&mut budget, &best_x, bounds, opts.diameter_tol);
        rounds += 1;
        let improved = value < best_val - 1e-12 * (1.0 + best_val.abs());
        if value < best_val {
            best_x = x;
            best_val = value;
        }
        converged = hit_tol;
        if !hit_tol || (rounds > 1 && !improved) {
            break;
        }
    }

    OptimResult {
        x: best_x,
        value: best_val,
        evaluations: budget.used,
        converged,
        rounds,
    }
}
