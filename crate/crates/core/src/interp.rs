//! Interpolation on uniform grids.

/// Four-point Lagrange interpolation of nodal values at `t ∈ [0, 1]`,
/// nodes at `j / (len - 1)`. Falls back to linear on grids with < 4 nodes.
pub fn cubic_nodal(values: &[f64], t: f64) -> f64 {
    let m = values.len() - 1;
    let s = t * m as f64;
    if m < 3 {
        let j = (s.floor() as usize).min(m - 1);
        let w = s - j as f64;
        return (1.0 - w) * values[j] + w * values[j + 1];
    }
    let j = (s.floor() as isize).clamp(0, m as isize - 1) as usize;
    // Stencil j-1..j+2, shifted inward at the ends.
    let start = j.saturating_sub(1).min(m - 3);
    let u = s - start as f64;
    let mut acc = 0.0;
    for a in 0..4 {
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                w *= (u - b as f64) / (a as f64 - b as f64);
            }
        }
        acc += w * values[start + a];
    }
    acc
}

/// Periodic linear interpolation of cell-centred values (centres at `(j + ½)/M`).
pub fn linear_periodic_centered(values: &[f64], x: f64) -> f64 {
    let m = values.len();
    let s = x * m as f64 - 0.5;
    let fl = s.floor();
    let w = s - fl;
    let j = (fl as i64).rem_euclid(m as i64) as usize;
    let k = (j + 1) % m;
    (1.0 - w) * values[j] + w * values[k]
}
