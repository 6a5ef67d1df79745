//! Oracles for the one-variable inequalities behind the norm estimates.

use super::{Params, Tally};
use crate::error::{arg, Result};
use rand::Rng;

pub const NAMES: &[&str] = &[
    "log_superadditivity",
    "f_max",
    "g_max",
    "log_sum",
    "geometric_product",
    "poly_product",
    "aux_log_ratio",
    "aux_power_weight",
    "aux_elementary",
];

pub fn defaults(name: &str) -> Result<Vec<(&'static str, f64)>> {
    Ok(match name {
        "log_superadditivity" => vec![("sigma", 2.5), ("c", 1024.0)],
        "f_max" => vec![("sigma", 2.5), ("delta", 0.5)],
        "g_max" => vec![("p", 2.0), ("delta", 0.5)],
        "log_sum" => vec![("sigma", 2.5), ("delta", 0.5)],
        "geometric_product" => vec![("d", 1.0), ("sigma", 2.5), ("delta", 0.1), ("floor", 1024.0)],
        "poly_product" => vec![("d", 1.0), ("sigma", 2.5), ("delta", 0.1), ("p", 2.0), ("floor", 1024.0)],
        "aux_log_ratio" => vec![("sigma", 2.5)],
        "aux_power_weight" => vec![("p", 2.0), ("sigma", 2.5), ("delta", 0.5)],
        "aux_elementary" => vec![],
        _ => return arg(format!("unknown scalar lemma {name:?}")),
    })
}

fn need_sigma(p: &Params) -> Result<f64> {
    let s = p.get("sigma");
    if !(s > 2.0) || !s.is_finite() {
        return arg(format!("sigma must exceed 2, got {s}"));
    }
    Ok(s)
}

fn need_delta(p: &Params) -> Result<f64> {
    let d = p.get("delta");
    if !(d > 0.0 && d < 1.0) {
        return arg(format!("delta must lie in (0,1), got {d}"));
    }
    Ok(d)
}

fn need_dim(p: &Params) -> Result<usize> {
    let d = p.get("d");
    if !(d >= 1.0) || d.fract() != 0.0 || d > 8.0 {
        return arg(format!("d must be an integer in 1..=8, got {d}"));
    }
    Ok(d as usize)
}

fn need_floor(p: &Params) -> Result<f64> {
    let f = p.get("floor");
    if !(f >= 21.0) || !f.is_finite() {
        return arg(format!("floor must be at least 21, got {f}"));
    }
    Ok(f)
}

/// Max of `f` on `[lo, hi]`: a grid of `n` points, then golden-section
/// refinement around the best one.
pub fn grid_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> (f64, f64) {
    let n = n.max(3);
    let h = (hi - lo) / (n - 1) as f64;
    let mut best = (lo, f(lo));
    for i in 1..n {
        let x = lo + h * i as f64;
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    let (mut a, mut b) = ((best.0 - h).max(lo), (best.0 + h).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln` of the integral of `exp(g)` over `[a, inf)` for `g` concave past its peak.
pub fn log_integral(g: impl Fn(f64) -> f64, a: f64) -> f64 {
    let mut step = 1.0;
    let mut b = a + step;
    let mut peak = g(a);
    loop {
        let v = g(b);
        peak = peak.max(v);
        if v < peak - 60.0 && g(b + step) < v {
            break;
        }
        step *= 1.5;
        b += step;
        if b > 1e9 {
            break;
        }
    }
    let n = 20_000;
    let h = (b - a) / n as f64;
    let mut acc = f64::NEG_INFINITY;
    for i in 0..=n {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc = log_add(acc, g(a + h * i as f64) + (w * h / 3.0f64).ln());
    }
    acc
}

fn floor_weight(x: f64, floor: f64, sigma: f64) -> f64 {
    x.max(floor).ln().powf(sigma)
}

/// Lattice points with sup norm exactly `r` in `Z^d`.
fn shell(r: u64, d: usize) -> f64 {
    if r == 0 {
        1.0
    } else {
        let r = r as f64;
        (2.0 * r + 1.0).powi(d as i32) - (2.0 * r - 1.0).powi(d as i32)
    }
}

pub fn run(name: &str, p: &Params, samples: usize, seed: u64) -> Result<Tally> {
    let mut t = Tally::default();
    match name {
        "log_superadditivity" => {
            let sigma = need_sigma(p)?;
            let c = p.get("c");
            if !(c > std::f64::consts::E.powi(3)) {
                return arg(format!("c must exceed e^3, got {c}"));
            }
            let mut rng = crate::rng::task(seed, 0);
            let lc = c.ln();
            for i in 0..samples.max(1) {
                // first sample is the corner x = y = c
                let (ly, lt): (f64, f64) =
                    if i == 0 { (lc, 0.0) } else { (lc + rng.gen_range(0.0..30.0), rng.gen_range(0.0..40.0)) };
                let l1p = if lt == 0.0 { 2f64.ln() } else { lt + (-lt).exp().ln_1p() };
                let g = (1.0 + l1p / ly).powf(sigma) - (1.0 + lt / ly).powf(sigma) - 0.5;
                t.add(g, 1e-12);
            }
        }
        "f_max" => {
            let sigma = need_sigma(p)?;
            let delta = need_delta(p)?;
            let xs = (1.0 / (delta * sigma)).powf(1.0 / (sigma - 1.0));
            let (_, m) = grid_max(|x| -delta * x.powf(sigma) + x, 0.0, 4.0 * xs + 2.0, samples);
            t.add(m - (1.0 / delta).powf(1.0 / (sigma - 1.0)), 1e-12);
        }
        "g_max" => {
            let pp = p.get("p");
            if !(pp >= 1.0) {
                return arg(format!("p must be at least 1, got {pp}"));
            }
            let delta = need_delta(p)?;
            let (_, m) = grid_max(
                |x| if x > 0.0 { pp * x.ln() - delta * x } else { f64::NEG_INFINITY },
                0.0,
                4.0 * pp / delta,
                samples,
            );
            let rhs = pp * (pp / (std::f64::consts::E * delta)).ln();
            t.add(m - rhs, 1e-12 * rhs.abs().max(1.0));
        }
        "log_sum" => {
            let sigma = need_sigma(p)?;
            let delta = need_delta(p)?;
            let cap = samples.max(10) as u64;
            let mut acc = f64::NEG_INFINITY;
            let mut j = 1u64;
            loop {
                let v = -delta * (j as f64).ln().powf(sigma);
                acc = log_add(acc, v);
                if j >= cap || v < acc - 46.0 {
                    break;
                }
                j += 1;
            }
            // the summand decreases, so the rest sits under the integral from j
            let tail = log_integral(|y| y - delta * y.powf(sigma), (j as f64).ln());
            let lhs = log_add(acc, tail);
            let stmt = (6.0 / delta).ln() + (1.0 / delta).powf(1.0 / (sigma - 1.0));
            let proof = (6.0 / delta).ln() + (2.0 / delta).powf(1.0 / (sigma - 1.0));
            t.add(lhs - stmt, 1e-12);
            t.add_alt(lhs - proof, 1e-12);
        }
        "geometric_product" => {
            let d = need_dim(p)?;
            let sigma = need_sigma(p)?;
            let delta = need_delta(p)?;
            let floor = need_floor(p)?;
            let u = |x: f64| (-delta * floor_weight(x, floor, sigma)).exp();
            let cut = (samples as u64).max(2 * floor as u64);
            let mut lhs = 0.0;
            for r in 0..=cut {
                lhs += shell(r, d) * -(-u(r as f64)).ln_1p();
            }
            // -ln(1-u) <= u/(1-u), shells bounded through the sup norm
            let cnt = |x: f64| (2.0 * x + 3.0).powi(d as i32) - (2.0 * x + 1.0).powi(d as i32);
            let tail = log_integral(
                |y| {
                    let x = y.exp();
                    let uu = u(x);
                    cnt(x).ln() + uu.ln() - (-uu).ln_1p() + y
                },
                (cut as f64).ln(),
            );
            let lhs = log_add(lhs.ln(), tail).exp();
            let df = d as f64;
            let rhs =
                (100.0 * df / (delta * delta)).powf(df) * (df * (2.0 * df / delta).powf(1.0 / (sigma - 1.0))).exp();
            t.add(lhs.ln() - rhs.ln(), 1e-12);
        }
        "poly_product" => {
            let d = need_dim(p)?;
            let sigma = need_sigma(p)?;
            let delta = need_delta(p)?;
            let floor = need_floor(p)?;
            let pp = p.get("p");
            if pp != 1.0 && pp != 2.0 {
                return arg(format!("p must be 1 or 2, got {pp}"));
            }
            let rhs =
                3.0 * d as f64 * pp * (pp / delta).powf(1.0 / (sigma - 1.0)) * (1.0 / delta).powf(1.0 / sigma).exp();
            let factor = |a: u64, w: f64| (1.0 + (a as f64).powf(pp)).ln() - 2.0 * delta * a as f64 * w;
            let best = |w: f64| (1..=64u64).map(|a| factor(a, w)).fold(0.0, f64::max);
            // the sup over all `a` factorizes over modes
            let mut sup = 0.0;
            let mut r = 0u64;
            loop {
                let b = best(floor_weight(r as f64, floor, sigma));
                if b <= 0.0 && r as f64 >= floor {
                    break;
                }
                sup += shell(r, d) * b;
                r += 1;
                if r > 10_000_000 {
                    return arg("delta too small for the product scan");
                }
            }
            t.add(sup - rhs, 1e-12 * rhs.max(1.0));
            let mut rng = crate::rng::task(seed, 0);
            for _ in 0..samples {
                let mut lhs = 0.0;
                for _ in 0..rng.gen_range(1..=6) {
                    let n: Vec<f64> = (0..d).map(|_| rng.gen_range(-60i64..=60) as f64).collect();
                    let norm = n.iter().map(|x| x * x).sum::<f64>().sqrt();
                    lhs += factor(rng.gen_range(1..=5), floor_weight(norm, floor, sigma));
                }
                t.add(lhs - rhs, 1e-12 * rhs.max(1.0));
            }
        }
        "aux_log_ratio" => {
            let sigma = need_sigma(p)?;
            let (_, m) = grid_max(
                |u| {
                    let tt = u.exp();
                    (sigma - 1.0) * tt.ln_1p().ln() + (1.0 / tt).ln_1p().ln()
                },
                0.0,
                60.0,
                samples,
            );
            let rhs = (2.0 * ((sigma - 1.0) / std::f64::consts::E).powf(sigma - 1.0)).ln();
            t.add(m - rhs, 1e-12);
        }
        "aux_power_weight" => {
            let pp = p.get("p");
            if !(pp >= 1.0) {
                return arg(format!("p must be at least 1, got {pp}"));
            }
            let sigma = need_sigma(p)?;
            let delta = need_delta(p)?;
            let ys = (pp / (delta * sigma)).powf(1.0 / (sigma - 1.0));
            let (_, m) = grid_max(|y| pp * y - delta * y.powf(sigma), 0.0, 4.0 * ys + 2.0, samples);
            t.add(m - pp * (pp / delta).powf(1.0 / (sigma - 1.0)), 1e-12);
        }
        "aux_elementary" => {
            let top = 3.0 - 2.0 * 2f64.sqrt();
            let n = samples.max(2);
            for i in 1..n {
                let x = top * i as f64 / n as f64;
                t.add(-(-(-x).exp()).ln_1p() + 2.0 * x.ln(), 1e-12);
                t.add((-(-x).ln_1p()).ln() - 0.5 * x.ln(), 1e-12);
            }
        }
        _ => return arg(format!("unknown scalar lemma {name:?}")),
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_interior_max() {
        let (x, v) = grid_max(|x| -(x - 1.234_567).powi(2), 0.0, 10.0, 100);
        assert!((x - 1.234_567).abs() < 1e-7);
        assert!(v <= 0.0 && v > -1e-13);
    }

    #[test]
    fn log_integral_of_gaussian() {
        let got = log_integral(|y| -y * y, 0.0);
        let want = (0.5 * std::f64::consts::PI.sqrt()).ln();
        assert!((got - want).abs() < 1e-9, "{got} {want}");
    }
}
