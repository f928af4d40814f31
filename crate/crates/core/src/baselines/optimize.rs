//! Nelder–Mead simplex minimisation with standard coefficients
//! (reflection 1, expansion 2, contraction ½, shrink ½).

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub max_iterations: usize,
    /// Stop when the spread of simplex values is below `f_rel·|f_best| + f_abs` ...
    pub f_rel: f64,
    pub f_abs: f64,
    /// ... and every vertex is within `x_rel` of the initial step of the best vertex.
    pub x_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            f_rel: 1e-12,
            f_abs: 1e-300,
            x_rel: 1e-7,
        }
    }
}

/// Minimise `f` from `start` with an axis-aligned initial simplex of the given
/// per-coordinate steps. Non-finite objective values are treated as +∞, which
/// keeps the simplex out of infeasible regions.
pub fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    start: &[f64],
    steps: &[f64],
    tol: Tolerances,
) -> Minimum {
    let dim = start.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(start.to_vec());
    for i in 0..dim {
        let mut v = start.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < tol.max_iterations {
        // order vertices; ties keep their previous order
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
        simplex = order.iter().map(|i| simplex[*i].clone()).collect();
        values = order.iter().map(|i| values[*i]).collect();

        let best = values[0];
        let worst = values[dim];
        let x_close = simplex[1..].iter().all(|v| {
            v.iter()
                .zip(&simplex[0])
                .zip(steps)
                .all(|((a, b), s)| (a - b).abs() <= tol.x_rel * s.abs())
        });
        if best.is_finite() && worst - best <= tol.f_rel * best.abs() + tol.f_abs && x_close {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|v| v[j]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let reflected = along(1.0);
        let f_r = eval(&reflected);
        if f_r < values[0] {
            let expanded = along(2.0);
            let f_e = eval(&expanded);
            if f_e < f_r {
                simplex[dim] = expanded;
                values[dim] = f_e;
            } else {
                simplex[dim] = reflected;
                values[dim] = f_r;
            }
            continue;
        }
        if f_r < values[dim - 1] {
            simplex[dim] = reflected;
            values[dim] = f_r;
            continue;
        }
        let (contracted, f_c) = if f_r < values[dim] {
            let c = along(0.5);
            let v = eval(&c);
            (c, v)
        } else {
            let c = along(-0.5);
            let v = eval(&c);
            (c, v)
        };
        if f_c < values[dim].min(f_r) {
            simplex[dim] = contracted;
            values[dim] = f_c;
            continue;
        }
        // shrink toward the best vertex
        let best_x = simplex[0].clone();
        for i in 1..=dim {
            for j in 0..dim {
                simplex[i][j] = best_x[j] + 0.5 * (simplex[i][j] - best_x[j]);
            }
            values[i] = eval(&simplex[i]);
        }
    }
    let best = (0..=dim)
        .min_by(|a, b| values[*a].total_cmp(&values[*b]))
        .unwrap();
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        converged,
    }
}
