//! Banded fitting alignment with a chain-guided band.

/// One alignment column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Col {
    Match,
    Sub,
    /// Consumes a query base only.
    Ins,
    /// Consumes a consensus base only.
    Del,
}

impl Col {
    pub(crate) fn consumes_query(self) -> bool {
        !matches!(self, Col::Del)
    }

    pub(crate) fn consumes_cons(self) -> bool {
        !matches!(self, Col::Ins)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Fit {
    /// Consensus boundary where the query starts.
    pub cons_start: usize,
    pub cols: Vec<Col>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub edits: u32,
}

const INF: u32 = u32::MAX / 4;

const DIR_MATCH: u8 = 0;
const DIR_SUB: u8 = 1;
const DIR_UP: u8 = 2;
const DIR_LEFT: u8 = 3;

/// Align all of `query` against some substring of `cons`, restricted per
/// query row `i` to consensus boundaries within `band` of `centers[i]`.
///
/// Tie-breaking: a matching diagonal wins, then insertion, then deletion,
/// then a mismatching diagonal. Together with the rightmost optimal end
/// column this keeps an insertion from being directly followed by a
/// substitution of the same consensus base and rules out trailing
/// insertions unless the band hits the end of the consensus.
pub(crate) fn banded_fit(query: &[u8], cons: &[u8], centers: &[i64], band: usize) -> Option<Fit> {
    let n = query.len();
    debug_assert_eq!(centers.len(), n + 1);
    if n == 0 || cons.is_empty() {
        return None;
    }
    let clen = cons.len() as i64;
    let b = band as i64;

    let mut lo = vec![0usize; n + 1];
    let mut hi = vec![0usize; n + 1];
    for i in 0..=n {
        let mut l = (centers[i] - b).clamp(0, clen) as usize;
        let mut h = (centers[i] + b).clamp(0, clen) as usize;
        if i > 0 {
            l = l.max(lo[i - 1]).min(hi[i - 1]);
            h = h.max(hi[i - 1]);
        }
        if l > h {
            l = h;
        }
        lo[i] = l;
        hi[i] = h;
    }

    let mut offsets = vec![0usize; n + 2];
    for i in 0..=n {
        offsets[i + 1] = offsets[i] + (hi[i] - lo[i] + 1);
    }
    let mut dirs = vec![0u8; offsets[n + 1]];

    let mut prev: Vec<u32> = vec![0; hi[0] - lo[0] + 1];
    let mut cur: Vec<u32> = Vec::new();
    for i in 1..=n {
        let (lp, hp) = (lo[i - 1], hi[i - 1]);
        let (lc, hc) = (lo[i], hi[i]);
        cur.clear();
        cur.resize(hc - lc + 1, INF);
        let q = query[i - 1];
        let row_dirs = &mut dirs[offsets[i]..offsets[i + 1]];
        for j in lc..=hc {
            let mut diag = INF;
            let mut is_match = false;
            if j >= 1 && j - 1 >= lp && j - 1 <= hp {
                is_match = q == cons[j - 1];
                diag = prev[j - 1 - lp] + (!is_match) as u32;
            }
            let up = if j >= lp && j <= hp { prev[j - lp] + 1 } else { INF };
            let left = if j > lc { cur[j - 1 - lc] + 1 } else { INF };

            let (score, dir) = if is_match && diag <= up && diag <= left {
                (diag, DIR_MATCH)
            } else if up <= left && up <= diag {
                (up, DIR_UP)
            } else if left <= diag {
                (left, DIR_LEFT)
            } else {
                (diag, DIR_SUB)
            };
            cur[j - lc] = score;
            row_dirs[j - lc] = dir;
        }
        std::mem::swap(&mut prev, &mut cur);
    }

    // rightmost optimal end column
    let (mut best_j, mut best) = (lo[n], INF);
    for j in lo[n]..=hi[n] {
        let s = prev[j - lo[n]];
        if s <= best {
            best = s;
            best_j = j;
        }
    }
    if best >= INF {
        return None;
    }

    let mut cols = Vec::with_capacity(n + 16);
    let (mut i, mut j) = (n, best_j);
    while i > 0 {
        if j < lo[i] || j > hi[i] {
            return None;
        }
        match dirs[offsets[i] + j - lo[i]] {
            DIR_MATCH => {
                cols.push(Col::Match);
                i -= 1;
                j -= 1;
            }
            DIR_SUB => {
                cols.push(Col::Sub);
                i -= 1;
                j -= 1;
            }
            DIR_UP => {
                cols.push(Col::Ins);
                i -= 1;
            }
            _ => {
                cols.push(Col::Del);
                j -= 1;
            }
        }
    }
    cols.reverse();
    Some(Fit {
        cons_start: j,
        cols,
        edits: best,
    })
}

/// Unbanded alignment of all of `query` against `cons`. With `free_start`
/// (`free_end`) a prefix (suffix) of `cons` may be skipped at no cost.
/// Returns the consensus offset where the alignment starts, its columns,
/// and its edit count; `None` when the matrix would exceed `max_cells`.
/// Ties break as in [`banded_fit`].
pub(crate) fn glocal(
    query: &[u8],
    cons: &[u8],
    free_start: bool,
    free_end: bool,
    max_cells: usize,
) -> Option<(usize, Vec<Col>, u32)> {
    let (n, m) = (query.len(), cons.len());
    if (n + 1).saturating_mul(m + 1) > max_cells {
        return None;
    }
    let w = m + 1;
    let mut dirs = vec![DIR_LEFT; (n + 1) * w];
    let mut prev: Vec<u32> = (0..=m as u32).map(|j| if free_start { 0 } else { j }).collect();
    let mut cur = vec![0u32; w];
    for i in 1..=n {
        let q = query[i - 1];
        let row = &mut dirs[i * w..(i + 1) * w];
        cur[0] = i as u32;
        row[0] = DIR_UP;
        let mut left = i as u32;
        let cells = cur[1..].iter_mut().zip(&mut row[1..]).zip(prev.windows(2)).zip(cons);
        // Neighbouring cells differ by at most one, so a matching diagonal
        // is always optimal.
        for (((out, dir), p), &c) in cells {
            let (score, d) = if q == c {
                (p[0], DIR_MATCH)
            } else {
                let s = p[0].min(p[1]).min(left) + 1;
                let d = if p[1] + 1 == s {
                    DIR_UP
                } else if left + 1 == s {
                    DIR_LEFT
                } else {
                    DIR_SUB
                };
                (s, d)
            };
            *out = score;
            *dir = d;
            left = score;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let mut j = m;
    if free_end {
        for c in (0..m).rev() {
            if prev[c] < prev[j] {
                j = c;
            }
        }
    }
    let edits = prev[j];
    let mut cols = Vec::with_capacity(n + 8);
    let mut i = n;
    while i > 0 || (j > 0 && !free_start) {
        if i == 0 {
            cols.push(Col::Del);
            j -= 1;
            continue;
        }
        match dirs[i * w + j] {
            DIR_MATCH => {
                cols.push(Col::Match);
                i -= 1;
                j -= 1;
            }
            DIR_SUB => {
                cols.push(Col::Sub);
                i -= 1;
                j -= 1;
            }
            DIR_UP => {
                cols.push(Col::Ins);
                i -= 1;
            }
            _ => {
                cols.push(Col::Del);
                j -= 1;
            }
        }
    }
    cols.reverse();
    Some((j, cols, edits))
}

/// Global alignment of `query` against `cons` restricted to a band of
/// `slack` cells (plus the length difference) around the straight line
/// joining the two corners. Returns the columns and their edit count.
pub(crate) fn global_banded(query: &[u8], cons: &[u8], slack: usize) -> (Vec<Col>, u32) {
    const INF: u32 = u32::MAX / 2;
    let (n, m) = (query.len(), cons.len());
    let half = n.abs_diff(m) + slack;
    let w = m + 1;
    let span = |i: usize| -> (usize, usize) {
        let c = if n == 0 { m } else { i * m / n };
        (c.saturating_sub(half), (c + half).min(m))
    };
    let mut dirs = vec![DIR_LEFT; (n + 1) * w];
    let mut prev = vec![INF; w];
    let mut cur = vec![INF; w];
    let (_, hi0) = span(0);
    for (j, p) in prev.iter_mut().enumerate().take(hi0 + 1) {
        *p = j as u32;
    }
    for i in 1..=n {
        let q = query[i - 1];
        let (lo, hi) = span(i);
        let (plo, phi) = span(i - 1);
        cur[plo..=phi].fill(INF);
        let row = &mut dirs[i * w..(i + 1) * w];
        let mut left = INF;
        let mut start = lo;
        if lo == 0 {
            cur[0] = i as u32;
            row[0] = DIR_UP;
            left = i as u32;
            start = 1;
        } else {
            cur[lo - 1] = INF;
        }
        for j in start..=hi {
            let is_match = q == cons[j - 1];
            let diag = prev[j - 1] + (!is_match) as u32;
            let up = prev[j] + 1;
            let l = left + 1;
            let (score, d) = if is_match && diag <= up && diag <= l {
                (diag, DIR_MATCH)
            } else if up <= l && up <= diag {
                (up, DIR_UP)
            } else if l <= diag {
                (l, DIR_LEFT)
            } else {
                (diag, DIR_SUB)
            };
            cur[j] = score;
            row[j] = d;
            left = score;
        }
        if hi < m {
            cur[hi + 1] = INF;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let edits = prev[m];
    let mut cols = Vec::with_capacity(n.max(m) + 4);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i == 0 {
            cols.push(Col::Del);
            j -= 1;
            continue;
        }
        match dirs[i * w + j] {
            DIR_MATCH => {
                cols.push(Col::Match);
                i -= 1;
                j -= 1;
            }
            DIR_SUB => {
                cols.push(Col::Sub);
                i -= 1;
                j -= 1;
            }
            DIR_UP => {
                cols.push(Col::Ins);
                i -= 1;
            }
            _ => {
                cols.push(Col::Del);
                j -= 1;
            }
        }
    }
    cols.reverse();
    (cols, edits)
}

/// Full (unbanded) edit distance between `a` and `b`, for tests and audits.
pub fn edit_distance(a: &[u8], b: &[u8]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            cur[j] = (prev[j - 1] + (a[i - 1] != b[j - 1]) as usize)
                .min(prev[j] + 1)
                .min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Best fitting distance of `query` anywhere inside `cons` (free consensus
/// ends), computed without a band.
pub fn fitting_distance(query: &[u8], cons: &[u8]) -> usize {
    let mut prev = vec![0usize; cons.len() + 1];
    let mut cur = vec![0usize; cons.len() + 1];
    for i in 1..=query.len() {
        cur[0] = i;
        for j in 1..=cons.len() {
            cur[j] = (prev[j - 1] + (query[i - 1] != cons[j - 1]) as usize)
                .min(prev[j] + 1)
                .min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev.into_iter().min().unwrap_or(query.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_centers(n: usize, start: i64) -> Vec<i64> {
        (0..=n as i64).map(|i| start + i).collect()
    }

    #[test]
    fn exact_fit() {
        let cons = b"TTTTACGTACGGTTTT";
        let q = b"ACGTACGG";
        let fit = banded_fit(q, cons, &diag_centers(q.len(), 4), 3).unwrap();
        assert_eq!(fit.cons_start, 4);
        assert_eq!(fit.edits, 0);
        assert!(fit.cols.iter().all(|&c| c == Col::Match));
    }

    #[test]
    fn deletion_inside_band() {
        let cons = b"GGGGACGTTCAGGCATTGGGG";
        let q = b"ACGTCAGGCATT"; // drops one T
        let fit = banded_fit(q, cons, &diag_centers(q.len(), 4), 4).unwrap();
        assert_eq!(fit.edits, 1);
        assert_eq!(fit.cols.iter().filter(|&&c| c == Col::Del).count(), 1);
        assert_eq!(fit.edits as usize, fitting_distance(q, cons));
    }

    #[test]
    fn insertion_never_followed_by_same_base_substitution() {
        // query has an extra base next to a substitution
        let cons = b"AAAACCGTAGCTAGAAAA";
        let q = b"CCGATTGCTAG";
        let fit = banded_fit(q, cons, &diag_centers(q.len(), 4), 5).unwrap();
        for w in fit.cols.windows(2) {
            assert!(!(w[0] == Col::Ins && w[1] == Col::Sub), "{:?}", fit.cols);
        }
        assert_eq!(fit.edits as usize, fitting_distance(q, cons));
    }

    fn cost(cols: &[Col]) -> usize {
        cols.iter().filter(|&&c| c != Col::Match).count()
    }

    #[test]
    fn glocal_matches_reference_distances() {
        let cons = b"GGGGACGTTCAGGCATTGGGG";
        let q = b"ACGTCAGGCATT";
        let (start, cols, e) = glocal(q, cons, true, true, 1 << 20).unwrap();
        assert_eq!(e as usize, fitting_distance(q, cons));
        assert_eq!(cost(&cols), e as usize);
        assert_eq!(start, 4);
        let (start, cols, e) = glocal(q, &cons[4..17], false, false, 1 << 20).unwrap();
        assert_eq!(start, 0);
        assert_eq!(e as usize, edit_distance(q, &cons[4..17]));
        assert_eq!(cols.iter().filter(|c| c.consumes_cons()).count(), 13);
        assert!(glocal(q, cons, false, false, 10).is_none());
    }

    #[test]
    fn banded_global_reaches_optimum_near_the_diagonal() {
        let cons = b"ACGTTGCAAGGCTTACGATCGATCGGATCCATGACTAGCTAGGACT";
        let mut q = cons.to_vec();
        q[5] = b'A';
        q.remove(20);
        q.insert(33, b'T');
        let (cols, e) = global_banded(&q, cons, 4);
        assert_eq!(e as usize, edit_distance(&q, cons));
        assert_eq!(cost(&cols), e as usize);
        assert_eq!(cols.iter().filter(|c| c.consumes_cons()).count(), cons.len());
        assert_eq!(cols.iter().filter(|c| !matches!(c, Col::Del)).count(), q.len());
        let (cols, e) = global_banded(b"", b"ACG", 2);
        assert_eq!((cols, e), (vec![Col::Del; 3], 3));
        let (cols, e) = global_banded(b"AC", b"", 2);
        assert_eq!((cols, e), (vec![Col::Ins; 2], 2));
    }

    #[test]
    fn glocal_handles_empty_sides() {
        let (_, cols, e) = glocal(b"", b"ACG", false, false, 100).unwrap();
        assert_eq!((cols, e), (vec![Col::Del; 3], 3));
        let (_, cols, e) = glocal(b"AC", b"", false, false, 100).unwrap();
        assert_eq!((cols, e), (vec![Col::Ins; 2], 2));
        let (start, cols, e) = glocal(b"", b"ACG", true, true, 100).unwrap();
        assert_eq!((start, cols.len(), e), (3, 0, 0));
    }

    #[test]
    fn reference_distances() {
        assert_eq!(edit_distance(b"kitten", b"sitting"), 3);
        assert_eq!(fitting_distance(b"CGT", b"AACGTAA"), 0);
    }
}
