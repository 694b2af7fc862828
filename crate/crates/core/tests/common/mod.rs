//! Independent oracles shared by integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Period and action of q̈ = λq + γq³ from (A, 0): plain time stepping to
/// the second zero of q̇, located by bisection on a sub-step.
pub fn brute_force(lambda: f64, gamma: f64, a: f64) -> (f64, f64) {
    let acc = |q: f64| lambda * q + gamma * q * q * q;
    let step = |s: [f64; 2], h: f64| {
        let f = |s: [f64; 2]| [s[1], acc(s[0])];
        let k1 = f(s);
        let k2 = f([s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1]]);
        let k3 = f([s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1]]);
        let k4 = f([s[0] + h * k3[0], s[1] + h * k3[1]]);
        [
            s[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            s[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    };
    let h = 1e-4;
    let mut s = [a, 0.0];
    let mut t = 0.0;
    let mut action = 0.0;
    let mut crossings = 0;
    loop {
        let next = step(s, h);
        if s[1] != 0.0 && next[1] * s[1] <= 0.0 {
            crossings += 1;
            if crossings == 2 {
                let (mut lo, mut hi) = (0.0, h);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if step(s, mid)[1] * s[1] > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let end = step(s, lo);
                action += 0.5 * (s[1] * s[1] + end[1] * end[1]) * lo;
                return (t + lo, action);
            }
        }
        action += 0.5 * (s[1] * s[1] + next[1] * next[1]) * h;
        s = next;
        t += h;
    }
}

/// `dω/dI` of the Duffing oscillator by amplitude continuation.
pub fn oracle_slope(lambda: f64, gamma: f64, a: f64) -> f64 {
    let d = 1e-3;
    let (tp, ip) = brute_force(lambda, gamma, a + d);
    let (tm, im) = brute_force(lambda, gamma, a - d);
    (2.0 * PI / tp - 2.0 * PI / tm) / (ip - im)
}

