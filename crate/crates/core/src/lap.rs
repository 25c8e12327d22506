//! Dense linear assignment by shortest augmenting paths (Jonker–Volgenant).
//!
//! Column prices `v` are kept so that every matched row's edge minimizes
//! `c[i][j] − v[j]` over its row. Column reduction matches part of the rows
//! cheaply; each remaining free row is then matched along a Dijkstra
//! shortest path in reduced costs, after which prices are updated to keep
//! the invariant.

const FREE: usize = usize::MAX;

/// Returns `assignment[i] = j` minimizing `Σ cost[i * n + j]`; entries must
/// be finite.
pub(crate) fn solve(n: usize, cost: &[f64]) -> Vec<usize> {
    let mut lap = Lap::new(n, cost);
    for row in lap.column_reduction() {
        lap.augment(row);
    }
    lap.row_to_col
}

struct Lap<'a> {
    n: usize,
    cost: &'a [f64],
    row_to_col: Vec<usize>,
    col_to_row: Vec<usize>,
    v: Vec<f64>,
    // Per-search scratch. Unsettled columns live in `todo[..open]` with their
    // tentative distance and predecessor row in the parallel `dist`/`from`.
    todo: Vec<usize>,
    dist: Vec<f64>,
    from: Vec<usize>,
    price: Vec<f64>,
    d: Vec<f64>,
    pred: Vec<usize>,
    settled: Vec<usize>,
}

impl<'a> Lap<'a> {
    fn new(n: usize, cost: &'a [f64]) -> Self {
        Self {
            n,
            cost,
            row_to_col: vec![FREE; n],
            col_to_row: vec![FREE; n],
            v: vec![f64::INFINITY; n],
            todo: Vec::with_capacity(n),
            dist: Vec::with_capacity(n),
            from: Vec::with_capacity(n),
            price: Vec::with_capacity(n),
            d: vec![0.0; n],
            pred: vec![0; n],
            settled: Vec::with_capacity(n),
        }
    }

    fn row(&self, i: usize) -> &'a [f64] {
        &self.cost[i * self.n..(i + 1) * self.n]
    }

    /// Prices every column at its smallest entry and matches each row that
    /// is the minimizer of some column. Returns the free rows.
    fn column_reduction(&mut self) -> Vec<usize> {
        let n = self.n;
        let mut argmin = vec![0usize; n];
        for i in 0..n {
            for (j, &c) in self.row(i).iter().enumerate() {
                if c < self.v[j] {
                    self.v[j] = c;
                    argmin[j] = i;
                }
            }
        }
        let mut unique = vec![true; n];
        for j in (0..n).rev() {
            let i = argmin[j];
            if self.row_to_col[i] == FREE {
                self.row_to_col[i] = j;
                self.col_to_row[j] = i;
            } else {
                unique[i] = false;
            }
        }
        let mut free = Vec::new();
        for i in 0..n {
            if self.row_to_col[i] == FREE {
                free.push(i);
            } else if unique[i] {
                // reduction transfer
                let j = self.row_to_col[i];
                let row = self.row(i);
                let mut min = f64::INFINITY;
                for j2 in (0..n).filter(|&j2| j2 != j) {
                    min = min.min(row[j2] - self.v[j2]);
                }
                if min.is_finite() {
                    self.v[j] -= min;
                }
            }
        }
        free
    }

    /// Matches the free row `start` along a shortest augmenting path and
    /// updates prices.
    fn augment(&mut self, start: usize) {
        let n = self.n;
        self.todo.clear();
        self.todo.extend(0..n);
        self.dist.clear();
        self.from.clear();
        self.settled.clear();
        self.price.clear();
        self.price.extend_from_slice(&self.v);
        let row = self.row(start);
        let mut best = 0;
        for j in 0..n {
            let dj = row[j] - self.v[j];
            self.dist.push(dj);
            self.from.push(start);
            if dj < self.dist[best] {
                best = j;
            }
        }
        let mut open = n;
        let (end, mind) = loop {
            let (j, dj) = (self.todo[best], self.dist[best]);
            self.pred[j] = self.from[best];
            self.d[j] = dj;
            open -= 1;
            self.todo.swap(best, open);
            self.dist.swap(best, open);
            self.from.swap(best, open);
            self.price.swap(best, open);
            if self.col_to_row[j] == FREE {
                break (j, dj);
            }
            self.settled.push(j);
            let i = self.col_to_row[j];
            let row = self.row(i);
            let h = row[j] - self.v[j] - dj;
            let lanes = self.todo[..open]
                .iter()
                .zip(&self.price[..open])
                .zip(&mut self.dist[..open])
                .zip(&mut self.from[..open]);
            best = 0;
            let mut best_d = f64::INFINITY;
            for (k, (((&c, &vc), dist), from)) in lanes.enumerate() {
                let nd = row[c] - vc - h;
                let closer = nd < *dist;
                *dist = if closer { nd } else { *dist };
                *from = if closer { i } else { *from };
                let lower = *dist < best_d;
                best_d = if lower { *dist } else { best_d };
                best = if lower { k } else { best };
            }
        };
        for &j in &self.settled {
            self.v[j] += self.d[j] - mind;
        }
        let mut j = end;
        loop {
            let i = self.pred[j];
            self.col_to_row[j] = i;
            let prev = self.row_to_col[i];
            self.row_to_col[i] = j;
            if i == start {
                break;
            }
            j = prev;
        }
    }
}

