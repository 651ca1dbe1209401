//! Derivative-free compass search.

pub(crate) struct SearchResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Minimises `f` from `x0`, probing `±step` along each coordinate. A step is
/// halved when neither direction improves; the search stops when every step
/// is below `min_step` times its starting value or the budget runs out.
pub(crate) fn compass_search(
    f: impl Fn(&[f64]) -> f64,
    x0: Vec<f64>,
    steps: Vec<f64>,
    min_step: f64,
    budget: usize,
) -> SearchResult {
    let mut x = x0;
    let mut best = f(&x);
    let mut evaluations = 1;
    let floor: Vec<f64> = steps.iter().map(|s| s * min_step).collect();
    let mut steps = steps;
    while evaluations < budget {
        for i in 0..x.len() {
            if steps[i] < floor[i] {
                continue;
            }
            let mut improved = false;
            for dir in [1.0, -1.0] {
                let mut trial = x.clone();
                trial[i] += dir * steps[i];
                let v = f(&trial);
                evaluations += 1;
                if v < best {
                    best = v;
                    x = trial;
                    improved = true;
                    // keep going the same way with a longer stride
                    steps[i] *= 1.5;
                    break;
                }
            }
            if !improved {
                steps[i] *= 0.5;
            }
        }
        if steps.iter().zip(&floor).all(|(s, lo)| s < lo) {
            break;
        }
    }
    SearchResult {
        x,
        value: best,
        evaluations,
    }
}
