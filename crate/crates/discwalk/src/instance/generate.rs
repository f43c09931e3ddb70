//! Seeded test-family generators. Given the same family parameters and seed,
//! a generator returns a byte-identical instance.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{InstanceError, ModeHint, SparseInstance};
use crate::rng::{self, Domain};
use crate::scalar::Scalar;

/// Instance families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// The n x n identity set system (singleton rows).
    Identity { n: usize },
    /// The 7-point, 7-line projective plane of order 2.
    FanoPlane,
    /// Each element placed in exactly `t` uniformly random rows out of `m`.
    RandomTSparse { n: usize, m: usize, t: usize },
    /// `m_i` rows per class `i`, row sizes uniform in `(2^(i-1), 2^i]`, with
    /// per-element membership capped at `t`.
    SizeClassed {
        n: usize,
        t: usize,
        classes: Vec<(u32, usize)>,
    },
    /// Dense Gaussian columns normalized to unit l2-norm.
    KomlosRandom { n: usize, m: usize },
    /// t-sparse system whose per-element membership in rows of size at least
    /// `t * 2^(i-1)` decays like `c_deg * t / (2 * i^(1+eps))`; the other
    /// half of each element's budget goes to rows smaller than `t`.
    TailDecaySparse { n: usize, t: usize, eps: f64, c_deg: f64 },
}

const MAX_ATTEMPTS: u64 = 200;

/// Generate an instance of `family`, deterministically in `seed`.
pub fn generate<S: Scalar>(family: &Family, seed: u64) -> Result<SparseInstance<S>, InstanceError> {
    match family {
        Family::Identity { n } => identity(*n),
        Family::FanoPlane => fano(),
        Family::RandomTSparse { n, m, t } => random_t_sparse(*n, *m, *t, seed),
        Family::SizeClassed { n, t, classes } => size_classed(*n, *t, classes, seed),
        Family::KomlosRandom { n, m } => komlos_random(*n, *m, seed),
        Family::TailDecaySparse { n, t, eps, c_deg } => {
            tail_decay_sparse(*n, *t, *eps, *c_deg, seed)
        }
    }
}

fn identity<S: Scalar>(n: usize) -> Result<SparseInstance<S>, InstanceError> {
    if n == 0 {
        return Err(InstanceError::InfeasibleParams("identity needs n >= 1".into()));
    }
    let rows = (0..n as u32).map(|i| vec![(i, S::one())]).collect();
    SparseInstance::from_rows(n, rows, ModeHint::SetSystem)
}

fn fano<S: Scalar>() -> Result<SparseInstance<S>, InstanceError> {
    const LINES: [[u32; 3]; 7] = [
        [0, 1, 2],
        [0, 3, 4],
        [0, 5, 6],
        [1, 3, 5],
        [1, 4, 6],
        [2, 3, 6],
        [2, 4, 5],
    ];
    let rows = LINES
        .iter()
        .map(|line| line.iter().map(|&i| (i, S::one())).collect())
        .collect();
    SparseInstance::from_rows(7, rows, ModeHint::SetSystem)
}

fn random_t_sparse<S: Scalar>(
    n: usize,
    m: usize,
    t: usize,
    seed: u64,
) -> Result<SparseInstance<S>, InstanceError> {
    if n == 0 || m == 0 || t == 0 {
        return Err(InstanceError::InfeasibleParams("need n, m, t >= 1".into()));
    }
    if t > m {
        return Err(InstanceError::InfeasibleParams(format!(
            "cannot place an element in t = {t} distinct rows out of m = {m}"
        )));
    }
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = rng::stream(seed, Domain::Generate, attempt);
        let mut rows: Vec<Vec<(u32, S)>> = vec![Vec::new(); m];
        for i in 0..n as u32 {
            for j in rng::sample_distinct(&mut rng, t, m) {
                rows[j as usize].push((i, S::one()));
            }
        }
        if rows.iter().all(|r| !r.is_empty()) {
            return SparseInstance::from_rows(n, rows, ModeHint::SetSystem);
        }
    }
    Err(InstanceError::InfeasibleParams(format!(
        "random t-sparse placement kept producing empty rows (n={n}, m={m}, t={t})"
    )))
}

fn size_classed<S: Scalar>(
    n: usize,
    t: usize,
    classes: &[(u32, usize)],
    seed: u64,
) -> Result<SparseInstance<S>, InstanceError> {
    if n == 0 || t == 0 {
        return Err(InstanceError::InfeasibleParams("need n, t >= 1".into()));
    }
    if classes.is_empty() || classes.iter().all(|&(_, m_i)| m_i == 0) {
        return Err(InstanceError::InfeasibleParams("no classes requested".into()));
    }
    for &(i, _) in classes {
        if i == 0 {
            return Err(InstanceError::InfeasibleParams("class index must be >= 1".into()));
        }
        if (1usize << (i - 1)) >= n {
            return Err(InstanceError::InfeasibleParams(format!(
                "class {i} rows need more than 2^{} elements but n = {n}",
                i - 1
            )));
        }
    }

    'attempt: for attempt in 0..MAX_ATTEMPTS {
        let mut rng = rng::stream(seed, Domain::Generate, attempt);
        // Draw sizes, largest classes first so placement sees big rows while
        // the capacity pool is fresh.
        let mut spec: Vec<(u32, usize)> = Vec::new();
        for &(i, m_i) in classes {
            for _ in 0..m_i {
                let lo = (1usize << (i - 1)) + 1;
                let hi = (1usize << i).min(n);
                let size = lo + rng::below(&mut rng, (hi - lo + 1) as u64) as usize;
                spec.push((i, size));
            }
        }
        if spec.iter().map(|&(_, s)| s).sum::<usize>() > n * t {
            continue 'attempt;
        }
        let order: Vec<usize> = {
            let mut idx: Vec<usize> = (0..spec.len()).collect();
            idx.sort_by_key(|&k| std::cmp::Reverse(spec[k].1));
            idx
        };

        let mut cap = vec![t as u32; n];
        let mut rows_by_spec: Vec<Vec<(u32, S)>> = vec![Vec::new(); spec.len()];
        for &k in &order {
            let size = spec[k].1;
            match pick_capacity_weighted(&mut rng, &mut cap, size) {
                Some(elems) => {
                    rows_by_spec[k] = elems.into_iter().map(|i| (i, S::one())).collect()
                }
                None => continue 'attempt,
            }
        }
        return SparseInstance::from_rows(n, rows_by_spec, ModeHint::SetSystem);
    }
    Err(InstanceError::InfeasibleParams(format!(
        "size-classed placement failed within the membership cap t = {t}"
    )))
}

/// Sample `size` distinct elements, weighted by remaining capacity, and
/// decrement the capacities of the picks. `None` when the pool is too small.
fn pick_capacity_weighted(
    rng: &mut ChaCha8Rng,
    cap: &mut [u32],
    size: usize,
) -> Option<Vec<u32>> {
    let mut candidates: Vec<u32> = (0..cap.len() as u32).filter(|&i| cap[i as usize] > 0).collect();
    if candidates.len() < size {
        return None;
    }
    let mut picks = Vec::with_capacity(size);
    for _ in 0..size {
        let total: u64 = candidates.iter().map(|&i| cap[i as usize] as u64).sum();
        let mut target = rng::below(rng, total);
        let mut chosen = usize::MAX;
        for (pos, &i) in candidates.iter().enumerate() {
            let w = cap[i as usize] as u64;
            if target < w {
                chosen = pos;
                break;
            }
            target -= w;
        }
        let elem = candidates.swap_remove(chosen);
        picks.push(elem);
    }
    for &e in &picks {
        cap[e as usize] -= 1;
    }
    picks.sort_unstable();
    Some(picks)
}

fn komlos_random<S: Scalar>(n: usize, m: usize, seed: u64) -> Result<SparseInstance<S>, InstanceError> {
    if n == 0 || m == 0 {
        return Err(InstanceError::InfeasibleParams("need n, m >= 1".into()));
    }
    let mut rng = rng::stream(seed, Domain::Generate, 0);
    // Column-major draw, then transpose into rows.
    let mut dense = vec![0.0f64; m * n];
    for i in 0..n {
        loop {
            let mut norm_sq = 0.0;
            for j in 0..m {
                let g = rng::gaussian(&mut rng);
                dense[j * n + i] = g;
                norm_sq += g * g;
            }
            if norm_sq > 0.0 {
                let inv = 1.0 / norm_sq.sqrt();
                for j in 0..m {
                    dense[j * n + i] *= inv;
                }
                break;
            }
        }
    }
    let rows = (0..m)
        .map(|j| {
            (0..n as u32)
                .map(|i| (i, S::of(dense[j * n + i as usize])))
                .collect()
        })
        .collect();
    SparseInstance::from_rows(n, rows, ModeHint::General)
}

fn tail_decay_sparse<S: Scalar>(
    n: usize,
    t: usize,
    eps: f64,
    c_deg: f64,
    seed: u64,
) -> Result<SparseInstance<S>, InstanceError> {
    if n == 0 || t == 0 {
        return Err(InstanceError::InfeasibleParams("need n, t >= 1".into()));
    }
    if !(eps > 0.0) || !(c_deg > 0.0) {
        return Err(InstanceError::InfeasibleParams("need eps > 0 and c_deg > 0".into()));
    }
    // Per-element tail target: at most c_deg * t / (2 * i^(1+eps)) memberships
    // in rows of size class >= i. Half of the sparsity budget is reserved for
    // rows smaller than t.
    let tail = |i: u32| -> usize { (c_deg * t as f64 / (2.0 * (i as f64).powf(1.0 + eps))) as usize };
    let mut class_degree: Vec<(u32, usize)> = Vec::new();
    let mut i = 1u32;
    while tail(i) >= 1 {
        let d = tail(i) - tail(i + 1);
        if d > 0 {
            let min_size = t << (i - 1);
            if min_size > n {
                return Err(InstanceError::InfeasibleParams(format!(
                    "class {i} rows need at least {min_size} elements but n = {n}"
                )));
            }
            class_degree.push((i, d));
        }
        i += 1;
    }
    let large_degree: usize = class_degree.iter().map(|&(_, d)| d).sum();
    let small_degree = t - large_degree.min(t);

    'attempt: for attempt in 0..MAX_ATTEMPTS {
        let mut rng = rng::stream(seed, Domain::Generate, attempt);
        let mut rows: Vec<Vec<u32>> = Vec::new();
        for &(class, d) in &class_degree {
            let min_size = t << (class - 1);
            let max_size = ((t << class) - 1).min(n);
            match deal_into_rows(&mut rng, n, d, min_size, max_size) {
                Some(mut dealt) => rows.append(&mut dealt),
                None => continue 'attempt,
            }
        }
        if small_degree > 0 {
            let lo = if t >= 3 { 2 } else { 1 };
            let hi = (t - 1).max(lo).min(n);
            match deal_into_rows(&mut rng, n, small_degree, lo, hi) {
                Some(mut dealt) => rows.append(&mut dealt),
                None => continue 'attempt,
            }
        }
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().map(|i| (i, S::one())).collect())
            .collect();
        return SparseInstance::from_rows(n, rows, ModeHint::SetSystem);
    }
    Err(InstanceError::InfeasibleParams(
        "tail-decay dealing failed to produce duplicate-free rows".into(),
    ))
}

/// Deal `degree` copies of every element into rows with sizes drawn from
/// `[min_size, max_size]`, exactly consuming the `n * degree` slots. Rows
/// must not contain an element twice; duplicates are repaired by swapping
/// slots between rows.
fn deal_into_rows(
    rng: &mut ChaCha8Rng,
    n: usize,
    degree: usize,
    min_size: usize,
    max_size: usize,
) -> Option<Vec<Vec<u32>>> {
    let total = n * degree;
    if total == 0 {
        return Some(Vec::new());
    }
    if min_size > total {
        return None;
    }
    // Sizes summing exactly to the slot count.
    let mut sizes: Vec<usize> = Vec::new();
    let mut remaining = total;
    while remaining > 0 {
        if remaining < min_size {
            // Top up already-drawn rows.
            for s in sizes.iter_mut() {
                if remaining == 0 {
                    break;
                }
                let room = max_size - *s;
                let add = room.min(remaining);
                *s += add;
                remaining -= add;
            }
            if remaining > 0 {
                return None;
            }
            break;
        }
        let hi = max_size.min(remaining);
        let size = min_size + rng::below(rng, (hi - min_size + 1) as u64) as usize;
        sizes.push(size);
        remaining -= size;
    }

    let mut slots: Vec<u32> = (0..n as u32).flat_map(|i| std::iter::repeat(i).take(degree)).collect();
    rng::shuffle(rng, &mut slots);
    let mut rows: Vec<Vec<u32>> = Vec::with_capacity(sizes.len());
    let mut cursor = 0;
    for &s in &sizes {
        rows.push(slots[cursor..cursor + s].to_vec());
        cursor += s;
    }

    // Swap-repair duplicates.
    let mut budget = 20 * total as u64;
    for a in 0..rows.len() {
        loop {
            let dup_pos = first_duplicate(&rows[a]);
            let Some(pos) = dup_pos else { break };
            let mut fixed = false;
            while budget > 0 {
                budget -= 1;
                let b = rng::below(rng, rows.len() as u64) as usize;
                if b == a || rows[b].is_empty() {
                    continue;
                }
                let q = rng::below(rng, rows[b].len() as u64) as usize;
                let incoming = rows[b][q];
                let outgoing = rows[a][pos];
                if !rows[a].contains(&incoming) && !rows[b].contains(&outgoing) {
                    rows[a][pos] = incoming;
                    rows[b][q] = outgoing;
                    fixed = true;
                    break;
                }
            }
            if !fixed {
                return None;
            }
        }
    }
    for row in &mut rows {
        row.sort_unstable();
    }
    Some(rows)
}

fn first_duplicate(row: &[u32]) -> Option<usize> {
    for (p, &e) in row.iter().enumerate() {
        if row[..p].contains(&e) {
            return Some(p);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::size_class;

    #[test]
    fn identity_is_identity() {
        let inst = generate::<f64>(&Family::Identity { n: 3 }, 0).unwrap();
        assert_eq!(inst.n(), 3);
        assert_eq!(inst.m(), 3);
        for j in 0..3 {
            let (cols, vals) = inst.row(j);
            assert_eq!(cols, &[j as u32]);
            assert_eq!(vals, &[1.0]);
        }
    }

    #[test]
    fn random_t_sparse_is_deterministic() {
        let fam = Family::RandomTSparse { n: 64, m: 64, t: 4 };
        let a = generate::<f64>(&fam, 7).unwrap();
        let b = generate::<f64>(&fam, 7).unwrap();
        assert_eq!(a, b);
        let c = generate::<f64>(&fam, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_t_sparse_has_exact_column_count() {
        for seed in 0..5 {
            let inst =
                generate::<f64>(&Family::RandomTSparse { n: 40, m: 50, t: 5 }, seed).unwrap();
            let mut counts = vec![0usize; 40];
            for (cols, _) in inst.rows() {
                for &c in cols {
                    counts[c as usize] += 1;
                }
            }
            assert!(counts.iter().all(|&c| c == 5));
            assert_eq!(inst.validate().unwrap().t, 5.0);
        }
    }

    #[test]
    fn random_t_sparse_rejects_t_above_m() {
        assert!(matches!(
            generate::<f64>(&Family::RandomTSparse { n: 4, m: 3, t: 5 }, 0),
            Err(InstanceError::InfeasibleParams(_))
        ));
    }

    #[test]
    fn size_classed_row_counts_match() {
        let fam = Family::SizeClassed { n: 64, t: 6, classes: vec![(2, 5), (3, 4)] };
        let inst = generate::<f64>(&fam, 11).unwrap();
        assert_eq!(inst.m(), 9);
        let profile = inst.validate().unwrap();
        let in_class2 = profile.s.iter().filter(|&&s| s > 2.0 && s <= 4.0).count();
        let in_class3 = profile.s.iter().filter(|&&s| s > 4.0 && s <= 8.0).count();
        assert_eq!(in_class2, 5);
        assert_eq!(in_class3, 4);
        assert!(profile.t <= 6.0);
    }

    #[test]
    fn komlos_random_columns_are_unit() {
        let inst = generate::<f64>(&Family::KomlosRandom { n: 16, m: 24 }, 3).unwrap();
        assert_eq!(inst.mode(), ModeHint::General);
        let profile = inst.validate().unwrap();
        for norm in profile.column_l2 {
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tail_decay_respects_budget_and_tail() {
        let fam = Family::TailDecaySparse { n: 256, t: 16, eps: 0.5, c_deg: 1.0 };
        let inst = generate::<f64>(&fam, 5).unwrap();
        let profile = inst.validate().unwrap();
        assert!(profile.t <= 16.0);
        // Tail hypothesis: memberships in rows of class >= i stay below
        // c_deg * t / i^(1+eps).
        let mut tail_count = vec![0usize; 16 * 256];
        let mut max_class = 0u32;
        for (cols, _) in inst.rows() {
            let class = size_class(cols.len() as f64, 16.0);
            max_class = max_class.max(class);
            if class >= 1 {
                for &c in cols {
                    tail_count[(class as usize - 1) * 256 + c as usize] += 1;
                }
            }
        }
        assert!(max_class >= 2, "expected at least two populated size classes");
        for i in 1..=max_class {
            let bound = 16.0 / (i as f64).powf(1.5);
            for e in 0..256 {
                let members: usize = (i..=max_class)
                    .map(|k| tail_count[(k as usize - 1) * 256 + e])
                    .sum();
                assert!(
                    (members as f64) <= bound + 1e-9,
                    "element {e} lies in {members} rows of class >= {i}, bound {bound}"
                );
            }
        }
    }
}
