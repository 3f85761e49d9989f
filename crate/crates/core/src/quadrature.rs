//! Composite Simpson rules on uniform grids.

/// Composite Simpson over `[a, b]` with `panels` panels (each panel uses its midpoint),
/// i.e. `2 * panels + 1` evaluations.
pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for i in 0..panels {
        let left = a + i as f64 * h;
        acc += 4.0 * f(left + 0.5 * h);
        if i > 0 {
            acc += 2.0 * f(left);
        }
    }
    acc * h / 6.0
}

/// Number of Simpson panels needed so that the node spacing is at most `step`.
pub fn panels_for_step(a: f64, b: f64, step: f64) -> usize {
    (((b - a) / (2.0 * step)).ceil() as usize).max(1)
}

/// Simpson weights for `2 * panels + 1` equally spaced nodes on an interval of length `len`.
pub fn simpson_weights(len: f64, panels: usize) -> Vec<f64> {
    let panels = panels.max(1);
    let n = 2 * panels + 1;
    let h = len / (2 * panels) as f64;
    (0..n)
        .map(|i| {
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

/// Tensor-product Simpson rule on `[s0, s1] x [u0, u1]` with node spacing at most `step`.
pub fn simpson_2d<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    (s0, s1): (f64, f64),
    (u0, u1): (f64, f64),
    step: f64,
) -> f64 {
    let ps = panels_for_step(s0, s1, step);
    let pu = panels_for_step(u0, u1, step);
    let ws = simpson_weights(s1 - s0, ps);
    let wu = simpson_weights(u1 - u0, pu);
    let hs = (s1 - s0) / (ws.len() - 1) as f64;
    let hu = (u1 - u0) / (wu.len() - 1) as f64;
    let mut acc = 0.0;
    for (i, wsi) in ws.iter().enumerate() {
        let s = s0 + i as f64 * hs;
        let mut row = 0.0;
        for (j, wuj) in wu.iter().enumerate() {
            row += wuj * f(s, u0 + j as f64 * hu);
        }
        acc += wsi * row;
    }
    acc
}
