//! Exhaustive reference computations, independent of the search code.

/// `z(m, n)` by enumerating all `2^(m·n)` edge sets and checking every
/// `2 x 2` rectangle directly.
pub fn brute_force_z(m: usize, n: usize) -> usize {
    let cells = m * n;
    assert!(cells <= 24, "brute force is limited to 24 cells");
    let mut best = 0;
    for mask in 0u32..(1u32 << cells) {
        let edges = mask.count_ones() as usize;
        if edges <= best {
            continue;
        }
        let on = |i: usize, j: usize| mask >> (i * n + j) & 1 == 1;
        let mut has_rectangle = false;
        'outer: for i in 0..m {
            for k in (i + 1)..m {
                for j in 0..n {
                    for l in (j + 1)..n {
                        if on(i, j) && on(i, l) && on(k, j) && on(k, l) {
                            has_rectangle = true;
                            break 'outer;
                        }
                    }
                }
            }
        }
        if !has_rectangle {
            best = edges;
        }
    }
    best
}

/// Upper bound on `z(m, n)` from counting column pairs: each row of degree
/// `d` covers `C(d, 2)` pairs of columns and no pair is covered twice, so
/// the degrees satisfy `Σ C(d_i, 2) ≤ C(n, 2)`. Maximizes `Σ d_i` under
/// that budget by dynamic programming over rows.
pub fn pair_counting_bound(m: usize, n: usize) -> usize {
    let budget = n * n.saturating_sub(1) / 2;
    let mut best = vec![0usize; budget + 1];
    for _ in 0..m {
        let mut next = best.clone();
        for used in 0..=budget {
            for d in 1..=n {
                let cost = d * (d - 1) / 2;
                if cost > used {
                    break;
                }
                next[used] = next[used].max(best[used - cost] + d);
            }
        }
        best = next;
    }
    best[budget]
}
