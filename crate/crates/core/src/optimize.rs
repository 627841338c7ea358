//! Derivative-free minimization in the plane.

/// Outcome of one Nelder-Mead run.
#[derive(Clone, Copy, Debug)]
pub struct SimplexResult {
    pub x: [f64; 2],
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder-Mead on a 2D objective; stops when the simplex diameter drops
/// below `tol` or after `max_evals` evaluations.
pub fn nelder_mead(f: impl Fn([f64; 2]) -> f64, x0: [f64; 2], step: f64, tol: f64, max_evals: usize) -> SimplexResult {
    let mut simplex = [x0, [x0[0] + step, x0[1]], [x0[0], x0[1] + step]];
    let mut values = simplex.map(&f);
    let mut evals = 3;
    let diameter = |s: &[[f64; 2]; 3]| {
        let d = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
        d(s[0], s[1]).max(d(s[0], s[2])).max(d(s[1], s[2]))
    };
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    loop {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = idx.map(|i| simplex[i]);
        values = idx.map(|i| values[i]);
        if diameter(&simplex) < tol {
            return SimplexResult { x: simplex[0], value: values[0], evaluations: evals, converged: true };
        }
        if evals >= max_evals {
            return SimplexResult { x: simplex[0], value: values[0], evaluations: evals, converged: false };
        }
        let centroid = lerp(simplex[0], simplex[1], 0.5);
        let reflected = lerp(centroid, simplex[2], -1.0);
        let fr = f(reflected);
        evals += 1;
        if fr < values[0] {
            let expanded = lerp(centroid, simplex[2], -2.0);
            let fe = f(expanded);
            evals += 1;
            if fe < fr {
                simplex[2] = expanded;
                values[2] = fe;
            } else {
                simplex[2] = reflected;
                values[2] = fr;
            }
        } else if fr < values[1] {
            simplex[2] = reflected;
            values[2] = fr;
        } else {
            let (target, ft) = if fr < values[2] { (reflected, fr) } else { (simplex[2], values[2]) };
            let contracted = lerp(centroid, target, 0.5);
            let fc = f(contracted);
            evals += 1;
            if fc < ft {
                simplex[2] = contracted;
                values[2] = fc;
            } else {
                for k in 1..3 {
                    simplex[k] = lerp(simplex[0], simplex[k], 0.5);
                    values[k] = f(simplex[k]);
                    evals += 1;
                }
            }
        }
    }
}
