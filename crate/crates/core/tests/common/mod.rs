//! Test-only oracles, written independently of the library's solvers.
#![allow(dead_code)]

use pacbound_core::mdp::MdpSpec;
use pacbound_core::{Shape, Table};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Random kernel (each row supported on a random non-empty subset of
/// states) and uniform rewards in [0, 1).
pub fn random_mdp(rng: &mut impl Rng, shape: Shape) -> MdpSpec {
    let (h, s, a) = (shape.horizon, shape.states, shape.actions);
    let mut transitions = Vec::new();
    for _ in 0..(h - 1) * s * a {
        let mut row: Vec<f64> = (0..s).map(|_| if rng.random_bool(0.7) { rng.random::<f64>() } else { 0.0 }).collect();
        if row.iter().all(|&x| x == 0.0) {
            row[rng.random_range(0..s)] = 1.0;
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= total);
        transitions.extend(row);
    }
    let rewards = (0..h * s * a).map(|_| rng.random::<f64>()).collect();
    MdpSpec::new(shape, 0, transitions, rewards).unwrap()
}

/// Random shape with `S, A, H <= 3` and at most 512 deterministic policies.
pub fn random_shape(rng: &mut impl Rng) -> Shape {
    loop {
        let shape = Shape::new(rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=3)).unwrap();
        if shape.deterministic_policy_count().is_some_and(|c| (2..=512).contains(&c)) {
            return shape;
        }
    }
}

/// Forward pass for a stochastic policy given as `[h][s][a]` probabilities.
pub fn occupancy(mdp: &MdpSpec, probs: &[f64]) -> Vec<f64> {
    let shape = mdp.shape();
    let (hh, ss, aa) = (shape.horizon, shape.states, shape.actions);
    let mut out = vec![0.0; hh * ss * aa];
    let mut mass = vec![0.0; ss];
    mass[mdp.initial_state()] = 1.0;
    for h in 0..hh {
        let mut next = vec![0.0; ss];
        for s in 0..ss {
            for a in 0..aa {
                let x = (h * ss + s) * aa + a;
                out[x] = mass[s] * probs[x];
                if h + 1 < hh {
                    for (n, p) in next.iter_mut().zip(mdp.transition_row(h, s, a)) {
                        *n += out[x] * p;
                    }
                }
            }
        }
        mass = next;
    }
    out
}

/// Occupancies of all deterministic policies (the vertices of `Omega`).
pub fn vertices(mdp: &MdpSpec) -> Vec<Vec<f64>> {
    let shape = mdp.shape();
    let rows = shape.horizon * shape.states;
    let count = (shape.actions as u64).pow(rows as u32);
    (0..count)
        .map(|mut index| {
            let mut probs = vec![0.0; shape.triplets()];
            for r in 0..rows {
                let a = (index % shape.actions as u64) as usize;
                index /= shape.actions as u64;
                probs[r * shape.actions + a] = 1.0;
            }
            occupancy(mdp, &probs)
        })
        .collect()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `sum_x a_x / rho_x` with `0/0 = 0`.
pub fn inverse_value(a: &[f64], rho: &[f64]) -> f64 {
    a.iter()
        .zip(rho)
        .map(|(&a, &r)| {
            if a == 0.0 {
                0.0
            } else if r > 0.0 {
                a / r
            } else {
                f64::INFINITY
            }
        })
        .sum()
}

pub fn max_inverse(objectives: &[Vec<f64>], rho: &[f64]) -> f64 {
    objectives.iter().map(|a| inverse_value(a, rho)).fold(f64::NEG_INFINITY, f64::max)
}

/// Rows of the affine hull of `Omega` over all coordinates.
fn constraint_rows(mdp: &MdpSpec) -> Vec<Vec<f64>> {
    let shape = mdp.shape();
    let (hh, ss, aa) = (shape.horizon, shape.states, shape.actions);
    let mut rows = Vec::new();
    for s in 0..ss {
        let mut row = vec![0.0; hh * ss * aa];
        for a in 0..aa {
            row[s * aa + a] = 1.0;
        }
        rows.push(row);
    }
    for h in 1..hh {
        for s in 0..ss {
            let mut row = vec![0.0; hh * ss * aa];
            for a in 0..aa {
                row[(h * ss + s) * aa + a] = 1.0;
            }
            for p in 0..ss {
                for a in 0..aa {
                    row[((h - 1) * ss + p) * aa + a] -= mdp.transition_row(h - 1, p, a)[s];
                }
            }
            rows.push(row);
        }
    }
    rows
}

/// Orthonormal basis of the span of `rows` (modified Gram-Schmidt).
fn orthonormal(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for mut row in rows {
        for b in &basis {
            let c = dot(&row, b);
            row.iter_mut().zip(b).for_each(|(r, b)| *r -= c * b);
        }
        let norm = dot(&row, &row).sqrt();
        if norm > 1e-10 {
            row.iter_mut().for_each(|r| *r /= norm);
            basis.push(row);
        }
    }
    basis
}

fn project_out(g: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(g, b);
        g.iter_mut().zip(b).for_each(|(x, b)| *x -= c * b);
    }
}

fn project_simplex(v: &mut [f64]) {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        acc += x;
        let t = (acc - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

/// Certified lower bound on `min_{rho in Omega} max_i sum_x a_ix / rho_x`
/// built around a candidate `rho`.
///
/// For any weights `lambda` in the simplex, convexity gives
/// `OPT >= sum_i lambda_i f_i(rho) + min_{v vertex} <sum_i lambda_i grad f_i(rho), v - rho>`.
/// The weights are fitted to the KKT conditions at `rho` by minimizing the
/// tangential part of `sum_i lambda_i grad f_i(rho)` over the active
/// objectives; the bound itself holds whatever the fit.
const FIT_STEPS: usize = 200_000;

pub fn first_order_lower_bound(mdp: &MdpSpec, objectives: &[Vec<f64>], rho: &[f64], vertices: &[Vec<f64>]) -> f64 {
    let n = rho.len();
    let values: Vec<f64> = objectives.iter().map(|a| inverse_value(a, rho)).collect();
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let active: Vec<usize> = (0..objectives.len()).filter(|&i| values[i] >= top * (1.0 - 1e-5)).collect();
    let grads: Vec<Vec<f64>> = active
        .iter()
        .map(|&i| objectives[i].iter().zip(rho).map(|(&a, &r)| if a == 0.0 { 0.0 } else { -a / (r * r) }).collect())
        .collect();

    let peak = rho.iter().copied().fold(0.0, f64::max);
    let mut rows = constraint_rows(mdp);
    for (x, &r) in rho.iter().enumerate() {
        if r < 1e-7 * peak {
            let mut e = vec![0.0; n];
            e[x] = 1.0;
            rows.push(e);
        }
    }
    let basis = orthonormal(rows);
    let tangential: Vec<Vec<f64>> = grads
        .iter()
        .map(|g| {
            let mut t = g.clone();
            project_out(&mut t, &basis);
            t.iter_mut().for_each(|x| *x /= top);
            t
        })
        .collect();

    // FISTA on ||T lambda||^2 over the simplex
    let m = active.len();
    let gram: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| dot(&tangential[i], &tangential[j])).collect()).collect();
    let lipschitz = 2.0 * gram.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max).max(1e-300);
    let mut lambda = vec![1.0 / m as f64; m];
    let mut y = lambda.clone();
    let mut t = 1.0f64;
    let norm = |l: &[f64]| (0..m).map(|i| l[i] * dot(&gram[i], l)).sum::<f64>();
    for _ in 0..FIT_STEPS {
        let grad: Vec<f64> = (0..m).map(|i| 2.0 * dot(&gram[i], &y)).collect();
        let mut next: Vec<f64> = (0..m).map(|i| y[i] - grad[i] / lipschitz).collect();
        project_simplex(&mut next);
        // gradient restart keeps the momentum from undoing progress
        let uphill: f64 = (0..m).map(|i| grad[i] * (next[i] - lambda[i])).sum();
        if uphill > 0.0 {
            t = 1.0;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        y = (0..m).map(|i| next[i] + (t - 1.0) / t_next * (next[i] - lambda[i])).collect();
        lambda = next;
        t = t_next;
        if norm(&lambda) < 1e-24 {
            break;
        }
    }

    let combined: Vec<f64> = (0..n).map(|x| (0..m).map(|k| lambda[k] * grads[k][x]).sum()).collect();
    let base: f64 = (0..m).map(|k| lambda[k] * values[active[k]]).sum();
    let shift = dot(&combined, rho);
    let linear_min = vertices.iter().map(|v| dot(&combined, v)).fold(f64::INFINITY, f64::min);
    base + linear_min - shift
}

/// Dense grid over the policy simplices followed by pattern search, for
/// instances with at most six triplets.
pub fn grid_minimum(mdp: &MdpSpec, objectives: &[Vec<f64>], resolution: usize) -> (f64, Vec<f64>) {
    let shape = mdp.shape();
    let rows = shape.horizon * shape.states;
    let aa = shape.actions;
    // all compositions of `resolution` into `aa` parts
    let mut simplex = Vec::new();
    compositions(resolution, aa, &mut Vec::new(), &mut simplex);
    let eval = |probs: &[f64]| max_inverse(objectives, &occupancy(mdp, probs));

    let mut best = (f64::INFINITY, vec![0.0; shape.triplets()]);
    let total = (simplex.len() as u64).pow(rows as u32);
    assert!(total <= 2_000_000, "grid too large");
    for mut index in 0..total {
        let mut probs = Vec::with_capacity(shape.triplets());
        for _ in 0..rows {
            let c = &simplex[(index % simplex.len() as u64) as usize];
            index /= simplex.len() as u64;
            probs.extend(c.iter().map(|&k| k as f64 / resolution as f64));
        }
        let v = eval(&probs);
        if v < best.0 {
            best = (v, probs);
        }
    }

    // pattern search on a log-sum-exp smoothing of the max, cooling the
    // temperature so the search does not stall at kinks
    let (_, mut probs) = best;
    let mut temperature = 0.05;
    while temperature > 1e-9 {
        let smooth = |probs: &[f64]| soft_max(objectives, &occupancy(mdp, probs), temperature);
        let mut value = smooth(&probs);
        let mut step = 1.0 / resolution as f64;
        while step > 1e-12 {
            let mut improved = false;
            for r in 0..rows {
                for i in 0..aa {
                    for j in 0..aa {
                        if i == j {
                            continue;
                        }
                        let (xi, xj) = (r * aa + i, r * aa + j);
                        let moved = step.min(probs[xj]);
                        if moved <= 0.0 {
                            continue;
                        }
                        let mut trial = probs.clone();
                        trial[xi] += moved;
                        trial[xj] -= moved;
                        let v = smooth(&trial);
                        if v < value {
                            value = v;
                            probs = trial;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                step /= 2.0;
            }
        }
        temperature /= 4.0;
    }
    let value = eval(&probs);
    (value, occupancy(mdp, &probs))
}

/// Relative log-sum-exp of the objective values.
fn soft_max(objectives: &[Vec<f64>], rho: &[f64], temperature: f64) -> f64 {
    let values: Vec<f64> = objectives.iter().map(|a| inverse_value(a, rho)).collect();
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() || top <= 0.0 {
        return top;
    }
    let scale = temperature * top;
    top + scale * values.iter().map(|v| ((v - top) / scale).exp()).sum::<f64>().ln()
}

fn compositions(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for k in 0..=total {
        prefix.push(k);
        compositions(total - k, parts - 1, prefix, out);
        prefix.pop();
    }
}

/// Tables of a flat vector.
pub fn table(shape: Shape, values: Vec<f64>) -> Table {
    Table::from_vec(shape, values).unwrap()
}

pub fn random_instance(rng: &mut impl Rng) -> MdpSpec {
    let shape = random_shape(rng);
    random_mdp(rng, shape)
}
