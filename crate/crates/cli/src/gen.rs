//! Generators for the experiment tensor families.
//!
//! A family is selected as `name:arg1,arg2,…`, e.g. `levi_civita:3`,
//! `example7:3,10` or `matmul:2,2,2`. Random families (`random_sym`,
//! `diag_dominated`) additionally take the seed passed on the command line.

use anyhow::{anyhow, bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensor_dnn::{Shape, Tensor};

/// Build a tensor from a family spec. Deterministic families ignore the seed.
pub fn generate(spec: &str, seed: u64) -> Result<Tensor> {
    let (name, args) = match spec.split_once(':') {
        Some((n, a)) => (n, a),
        None => (spec, ""),
    };
    let nums: Vec<usize> = if args.is_empty() {
        Vec::new()
    } else {
        args.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| anyhow!("bad family argument {s:?}"))
            })
            .collect::<Result<_>>()?
    };
    let need = |k: usize| -> Result<()> {
        if nums.len() != k {
            bail!("family {name:?} takes {k} arguments, got {}", nums.len());
        }
        Ok(())
    };
    match name {
        "example1" => {
            need(0)?;
            sym_from_entries(
                3,
                2,
                &[
                    (&[0, 0, 0], 1.5578),
                    (&[1, 1, 1], 1.1226),
                    (&[0, 0, 1], -2.4443),
                    (&[0, 1, 1], -1.0982),
                ],
            )
        }
        "example2" => {
            need(0)?;
            multilinear_entries(
                &[2, 2, 2, 2],
                &[
                    (&[0, 0, 0, 0], 25.1),
                    (&[0, 1, 0, 1], 25.6),
                    (&[1, 0, 1, 0], 24.8),
                    (&[1, 1, 1, 1], 23.0),
                ],
            )
        }
        "example2b" => {
            need(0)?;
            multilinear_entries(
                &[2, 2, 2, 2],
                &[
                    (&[0, 0, 0, 0], 25.1),
                    (&[0, 1, 0, 1], 25.6),
                    (&[1, 0, 1, 0], 24.8),
                    (&[1, 1, 1, 1], 23.0),
                    (&[0, 0, 1, 0], 0.3),
                    (&[1, 0, 0, 0], 0.3),
                ],
            )
        }
        "example3" => {
            need(0)?;
            sym_from_entries(
                3,
                3,
                &[
                    (&[0, 0, 0], 0.0517),
                    (&[0, 0, 1], 0.3579),
                    (&[0, 0, 2], 0.5298),
                    (&[0, 1, 1], 0.7544),
                    (&[0, 1, 2], 0.2156),
                    (&[0, 2, 2], 0.3612),
                    (&[1, 1, 1], 0.3943),
                    (&[1, 1, 2], 0.0146),
                    (&[1, 2, 2], 0.6718),
                    (&[2, 2, 2], 0.9723),
                ],
            )
        }
        "example4" => {
            need(0)?;
            sym_from_entries(
                4,
                3,
                &[
                    (&[0, 0, 0, 0], 0.2883),
                    (&[0, 0, 0, 1], -0.0031),
                    (&[0, 0, 0, 2], 0.1973),
                    (&[0, 0, 1, 1], -0.2485),
                    (&[0, 0, 1, 2], -0.2939),
                    (&[0, 0, 2, 2], 0.3847),
                    (&[0, 1, 1, 1], 0.2972),
                    (&[0, 1, 1, 2], 0.1862),
                    (&[0, 1, 2, 2], 0.0919),
                    (&[0, 2, 2, 2], -0.3619),
                    (&[1, 1, 1, 1], 0.1241),
                    (&[1, 1, 1, 2], -0.3420),
                    (&[1, 1, 2, 2], 0.2127),
                    (&[1, 2, 2, 2], 0.2727),
                    (&[2, 2, 2, 2], -0.3054),
                ],
            )
        }
        "example5" => {
            need(0)?;
            sym_from_entries(
                3,
                3,
                &[
                    (&[0, 0, 0], -0.1281),
                    (&[0, 0, 1], 0.0516),
                    (&[0, 0, 2], -0.0954),
                    (&[0, 1, 1], -0.1958),
                    (&[0, 1, 2], -0.1790),
                    (&[0, 2, 2], -0.2676),
                    (&[1, 1, 1], 0.3251),
                    (&[1, 1, 2], 0.2513),
                    (&[1, 2, 2], 0.1773),
                    (&[2, 2, 2], 0.0338),
                ],
            )
        }
        "example6" => {
            need(0)?;
            sym_from_entries(
                6,
                3,
                &[
                    (&[0, 0, 0, 0, 0, 0], 2.0),
                    (&[0, 0, 0, 0, 1, 1], 1.0 / 3.0),
                    (&[0, 0, 0, 0, 2, 2], 2.0 / 5.0),
                    (&[0, 0, 1, 1, 1, 1], 1.0 / 3.0),
                    (&[0, 0, 1, 1, 2, 2], 1.0 / 6.0),
                    (&[0, 0, 2, 2, 2, 2], 2.0 / 5.0),
                    (&[1, 1, 1, 1, 1, 1], 2.0),
                    (&[1, 1, 1, 1, 2, 2], 2.0 / 5.0),
                    (&[1, 1, 2, 2, 2, 2], 2.0 / 5.0),
                    (&[2, 2, 2, 2, 2, 2], 1.0),
                ],
            )
        }
        "example18" => {
            need(0)?;
            sym_from_entries(
                3,
                3,
                &[(&[0, 0, 2], 2.0), (&[1, 1, 2], 2.0), (&[0, 1, 2], -1.0)],
            )
        }
        "example7" => {
            need(2)?;
            let (m, n) = (nums[0], nums[1]);
            Ok(Tensor::from_fn(Shape::symmetric(m, n)?, |idx| {
                idx.iter().map(|&i| sign_pow(i + 1) / (i + 1) as f64).sum()
            }))
        }
        "example8" => {
            need(2)?;
            let (m, n) = (nums[0], nums[1]);
            Ok(Tensor::from_fn(Shape::symmetric(m, n)?, |idx| {
                idx.iter()
                    .map(|&i| (sign_pow(i + 1) * (i + 1) as f64 / n as f64).atan())
                    .sum()
            }))
        }
        "example9" => {
            need(2)?;
            let (m, n) = (nums[0], nums[1]);
            Ok(Tensor::from_fn(Shape::symmetric(m, n)?, |idx| {
                idx.iter()
                    .map(|&i| sign_pow(i + 1) * ((i + 1) as f64).ln())
                    .sum()
            }))
        }
        "example10" => {
            need(2)?;
            let (m, n) = (nums[0], nums[1]);
            Ok(Tensor::from_fn(Shape::symmetric(m, n)?, |idx| {
                (idx.iter().map(|&i| (i + 1) as f64).sum::<f64>()).sin()
            }))
        }
        "example11" => {
            need(2)?;
            let (m, n) = (nums[0], nums[1]);
            Ok(Tensor::from_fn(Shape::multilinear(&vec![n; m])?, |idx| {
                (idx.iter()
                    .enumerate()
                    .map(|(j, &i)| ((j + 1) * (i + 1)) as f64)
                    .sum::<f64>())
                .cos()
            }))
        }
        "example12" => {
            need(2)?;
            let (m, n) = (nums[0], nums[1]);
            Ok(Tensor::from_fn(Shape::multilinear(&vec![n; m])?, |idx| {
                idx.iter()
                    .enumerate()
                    .map(|(j, &i)| sign_pow(j + 2) * (j + 1) as f64 * (-((i + 1) as f64)).exp())
                    .sum()
            }))
        }
        "example13" => {
            need(2)?;
            let (m, n) = (nums[0], nums[1]);
            Ok(Tensor::from_fn(Shape::multilinear(&vec![n; m])?, |idx| {
                (idx.iter()
                    .enumerate()
                    .map(|(j, &i)| sign_pow(j + 2) * (i + 1) as f64 / (j + 1) as f64)
                    .sum::<f64>())
                .tan()
            }))
        }
        "levi_civita" => {
            need(1)?;
            let n = nums[0];
            Ok(Tensor::from_fn(
                Shape::multilinear(&vec![n; n])?,
                permutation_sign,
            ))
        }
        "permanent" => {
            need(1)?;
            let n = nums[0];
            Ok(Tensor::from_fn(Shape::multilinear(&vec![n; n])?, |idx| {
                if is_permutation(idx) {
                    1.0
                } else {
                    0.0
                }
            }))
        }
        "matmul" => {
            need(3)?;
            let (m, n, q) = (nums[0], nums[1], nums[2]);
            // slots index (i,k), (i,j), (j,k) pairs flattened row-major
            Ok(Tensor::from_fn(
                Shape::multilinear(&[m * q, m * n, n * q])?,
                |idx| {
                    let (ik, ij, jk) = (idx[0], idx[1], idx[2]);
                    let (i1, k1) = (ik / q, ik % q);
                    let (i2, j1) = (ij / n, ij % n);
                    let (j2, k2) = (jk / q, jk % q);
                    if i1 == i2 && j1 == j2 && k1 == k2 {
                        1.0
                    } else {
                        0.0
                    }
                },
            ))
        }
        "random_sym" | "example20" => {
            need(2)?;
            let (m, n) = (nums[0], nums[1]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = Tensor::from_fn(Shape::symmetric(m, n)?, |_| rng.gen_range(-1.0..1.0));
            Ok(t.symmetrize(0.0).0)
        }
        "diag_dominated" | "example19" => {
            need(2)?;
            let (m, n) = (nums[0], nums[1]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = Tensor::from_fn(Shape::symmetric(m, n)?, |_| rng.gen_range(-1.0..1.0));
            let mut t = t.symmetrize(0.0).0;
            // a_{i..i} = 1e-6 - sum of the negative entries in slice i
            for i in 0..n {
                let mut s = 0.0;
                let diag = vec![i; m];
                let mut idx = vec![0usize; m];
                let total = n.pow(m as u32 - 1);
                for rest in 0..total {
                    let mut rem = rest;
                    idx[0] = i;
                    for slot in idx.iter_mut().skip(1) {
                        *slot = rem % n;
                        rem /= n;
                    }
                    if idx == diag {
                        continue;
                    }
                    let v = t.get(&idx);
                    if v < 0.0 {
                        s += v;
                    }
                }
                t.set_orbit(&diag, 1e-6 - s);
            }
            Ok(t)
        }
        other => bail!("unknown family {other:?}"),
    }
}

fn sign_pow(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn is_permutation(idx: &[usize]) -> bool {
    let n = idx.len();
    let mut seen = vec![false; n];
    for &i in idx {
        if seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}

fn permutation_sign(idx: &[usize]) -> f64 {
    if !is_permutation(idx) {
        return 0.0;
    }
    let mut sign = 1.0;
    for a in 0..idx.len() {
        for b in a + 1..idx.len() {
            if idx[a] > idx[b] {
                sign = -sign;
            }
        }
    }
    sign
}

fn sym_from_entries(m: usize, n: usize, entries: &[(&[usize], f64)]) -> Result<Tensor> {
    let mut t = Tensor::zeros(Shape::symmetric(m, n)?);
    for (idx, v) in entries {
        t.set_orbit(idx, *v);
    }
    Ok(t)
}

fn multilinear_entries(dims: &[usize], entries: &[(&[usize], f64)]) -> Result<Tensor> {
    let mut t = Tensor::zeros(Shape::multilinear(dims)?);
    for (idx, v) in entries {
        t.set(idx, *v);
    }
    Ok(t)
}

/// Per-instance seed for batch runs: a counter mixed into the base seed.
pub fn instance_seed(base: u64, instance: u64) -> u64 {
    // splitmix64 step on base + instance
    let mut z = base.wrapping_add(instance.wrapping_add(1).wrapping_mul(0x9E3779B97F4A7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}
