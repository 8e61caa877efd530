//! Transportation simplex on the dense bipartite graph.
//!
//! The engine minimizes a lexicographic pair cost `(penalty, value)` where
//! `penalty` is 1 on forbidden edges and 0 elsewhere. Forbidden edges are
//! thereby handled combinatorially: the simplex first drives all mass off
//! them, then minimizes the real value, and no large float ever enters the
//! arithmetic. Penalty components stay exact small integers throughout.
//!
//! Initialization is Vogel's method (penalty-driven) up to a size cutoff and
//! a greedy row-minimum sweep beyond it; pivoting uses block search on the
//! most negative reduced cost, with Bland's rule engaged permanently once a
//! degeneracy-cycling detector trips.

/// Dense cost table; entry `(i, j)` lives at `i * n + j`.
pub(crate) struct CostTable {
    pub m: usize,
    pub n: usize,
    pub vals: Vec<f64>,
    /// Forbidden-edge markers (the +∞ sentinel of restricted costs).
    pub forbidden: Option<Vec<bool>>,
}

impl CostTable {
    pub fn val(&self, i: usize, j: usize) -> f64 {
        self.vals[i * self.n + j]
    }

    pub fn is_forbidden(&self, i: usize, j: usize) -> bool {
        self.forbidden.as_ref().is_some_and(|f| f[i * self.n + j])
    }

    fn pen(&self, i: usize, j: usize) -> f64 {
        if self.is_forbidden(i, j) {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SimplexOptions {
    pub iteration_cap: usize,
    pub collect_iterates: bool,
}

/// Primal/dual objective pair at one pivot (value components only).
#[derive(Debug, Clone, Copy)]
pub(crate) struct IterateRecord {
    pub primal_value: f64,
    pub dual_value: f64,
}

pub(crate) struct SimplexOutcome {
    /// Positive-mass entries of the optimal basic solution.
    pub entries: Vec<(usize, usize, f64)>,
    /// Value component of the objective over positive entries.
    pub value: f64,
    /// Mass crossing forbidden edges at termination (zero when feasible).
    pub forbidden_mass: f64,
    /// A source atom carrying forbidden mass, if any.
    pub violating_source: Option<usize>,
    pub pivots: usize,
    pub degenerate_pivots: usize,
    pub bland_activated: bool,
    pub iterates: Vec<IterateRecord>,
}

pub(crate) enum SimplexError {
    IterationCap { iterations: usize },
}

/// Flow threshold below which a basic entry is treated as degenerate.
const FLOW_EPS: f64 = 1e-15;
/// Line-closing threshold during initialization; absorbs the accumulated
/// rounding of repeated remainder subtractions.
const INIT_EPS: f64 = 1e-12;
/// Absolute mass threshold for pruning output entries.
const PRUNE_EPS: f64 = 1e-13;
/// Penalty components are integers; half separates zero from nonzero.
const PEN_EPS: f64 = 0.5;

const VOGEL_CUTOFF: usize = 200_000;

struct BasisCell {
    i: u32,
    j: u32,
    flow: f64,
    /// Degenerate basic entry: present in the tree at zero flow.
    epsilon: bool,
}

struct Tree {
    m: usize,
    cells: Vec<BasisCell>,
    /// node -> ids of incident basic cells; node = i for sources, m+j sinks.
    adj: Vec<Vec<u32>>,
    u_pen: Vec<f64>,
    u_val: Vec<f64>,
    v_pen: Vec<f64>,
    v_val: Vec<f64>,
    // scratch buffers for traversals
    visited: Vec<bool>,
    parent_cell: Vec<u32>,
    queue: Vec<u32>,
}

impl Tree {
    fn new(m: usize, n: usize, cells: Vec<BasisCell>) -> Self {
        let mut adj = vec![Vec::new(); m + n];
        for (id, c) in cells.iter().enumerate() {
            adj[c.i as usize].push(id as u32);
            adj[m + c.j as usize].push(id as u32);
        }
        Tree {
            m,
            cells,
            adj,
            u_pen: vec![0.0; m],
            u_val: vec![0.0; m],
            v_pen: vec![0.0; n],
            v_val: vec![0.0; n],
            visited: vec![false; m + n],
            parent_cell: vec![u32::MAX; m + n],
            queue: Vec::with_capacity(m + n),
        }
    }

    /// Propagates `u + v = c` over the tree from source 0 with `u_0 = 0`.
    fn recompute_duals(&mut self, cost: &CostTable) {
        self.visited.iter_mut().for_each(|v| *v = false);
        self.queue.clear();
        self.queue.push(0);
        self.visited[0] = true;
        self.u_pen[0] = 0.0;
        self.u_val[0] = 0.0;
        let mut head = 0;
        while head < self.queue.len() {
            let node = self.queue[head] as usize;
            head += 1;
            for &cid in &self.adj[node] {
                let cell = &self.cells[cid as usize];
                let (i, j) = (cell.i as usize, cell.j as usize);
                let other = if node == i { self.m + j } else { i };
                if self.visited[other] {
                    continue;
                }
                self.visited[other] = true;
                if other >= self.m {
                    self.v_pen[j] = cost.pen(i, j) - self.u_pen[i];
                    self.v_val[j] = cost.val(i, j) - self.u_val[i];
                } else {
                    self.u_pen[i] = cost.pen(i, j) - self.v_pen[j];
                    self.u_val[i] = cost.val(i, j) - self.v_val[j];
                }
                self.queue.push(other as u32);
            }
        }
    }

    /// Path of basic cell ids from source `i` to sink `j` through the tree.
    fn path(&mut self, i: usize, j: usize, out: &mut Vec<u32>) {
        self.visited.iter_mut().for_each(|v| *v = false);
        self.queue.clear();
        self.queue.push(i as u32);
        self.visited[i] = true;
        let target = self.m + j;
        let mut head = 0;
        'bfs: while head < self.queue.len() {
            let node = self.queue[head] as usize;
            head += 1;
            for &cid in &self.adj[node] {
                let cell = &self.cells[cid as usize];
                let (ci, cj) = (cell.i as usize, cell.j as usize);
                let other = if node == ci { self.m + cj } else { ci };
                if self.visited[other] {
                    continue;
                }
                self.visited[other] = true;
                self.parent_cell[other] = cid;
                if other == target {
                    break 'bfs;
                }
                self.queue.push(other as u32);
            }
        }
        out.clear();
        let mut node = target;
        while node != i {
            let cid = self.parent_cell[node];
            out.push(cid);
            let cell = &self.cells[cid as usize];
            let (ci, cj) = (cell.i as usize, cell.j as usize);
            node = if node == self.m + cj { ci } else { self.m + cj };
        }
        out.reverse();
    }

    fn replace(&mut self, slot: u32, i: usize, j: usize, flow: f64) {
        let old = &self.cells[slot as usize];
        let (oi, oj) = (old.i as usize, old.j as usize);
        self.adj[oi].retain(|&c| c != slot);
        self.adj[self.m + oj].retain(|&c| c != slot);
        self.cells[slot as usize] =
            BasisCell { i: i as u32, j: j as u32, flow, epsilon: flow <= FLOW_EPS };
        self.adj[i].push(slot);
        self.adj[self.m + j].push(slot);
    }
}

/// Initial basic feasible solution: exactly `m + n - 1` cells forming a
/// spanning tree, zero-flow cells flagged as epsilon entries.
fn initial_basis(supplies: &[f64], demands: &[f64], cost: &CostTable) -> Vec<BasisCell> {
    if cost.m * cost.n <= VOGEL_CUTOFF {
        vogel_basis(supplies, demands, cost)
    } else {
        greedy_basis(supplies, demands, cost)
    }
}

/// Lexicographic comparison of `(pen, val)` pairs.
fn lex_less(ap: f64, av: f64, bp: f64, bv: f64) -> bool {
    if (ap - bp).abs() > PEN_EPS {
        ap < bp
    } else {
        av < bv
    }
}

struct InitState {
    row_open: Vec<bool>,
    col_open: Vec<bool>,
    row_rem: Vec<f64>,
    col_rem: Vec<f64>,
    rows_left: usize,
    cols_left: usize,
    cells: Vec<BasisCell>,
}

impl InitState {
    fn new(supplies: &[f64], demands: &[f64]) -> Self {
        InitState {
            row_open: vec![true; supplies.len()],
            col_open: vec![true; demands.len()],
            row_rem: supplies.to_vec(),
            col_rem: demands.to_vec(),
            rows_left: supplies.len(),
            cols_left: demands.len(),
            cells: Vec::with_capacity(supplies.len() + demands.len() - 1),
        }
    }

    /// Assigns at `(i, j)` and closes exactly one line (both at the very
    /// last cell); returns which line closed (`true` = row).
    ///
    /// Supplies and demands balance only within the weight-sum tolerance, so
    /// closing decisions must not depend on residues vanishing exactly: the
    /// last open line on either side stays open until the final pairing.
    fn assign(&mut self, i: usize, j: usize) -> bool {
        let q = self.row_rem[i].min(self.col_rem[j]).max(0.0);
        self.cells.push(BasisCell { i: i as u32, j: j as u32, flow: q, epsilon: q <= INIT_EPS });
        self.row_rem[i] -= q;
        self.col_rem[j] -= q;
        if self.rows_left == 1 && self.cols_left == 1 {
            self.row_open[i] = false;
            self.col_open[j] = false;
            self.rows_left = 0;
            self.cols_left = 0;
            return true;
        }
        let row_done = self.row_rem[i] <= INIT_EPS;
        let close_row = if self.rows_left == 1 {
            false
        } else if self.cols_left == 1 {
            true
        } else if row_done && self.col_rem[j] <= INIT_EPS {
            // Keep the row open at zero so one line closes per step.
            false
        } else {
            row_done
        };
        if close_row {
            self.row_open[i] = false;
            self.rows_left -= 1;
        } else {
            self.col_open[j] = false;
            self.cols_left -= 1;
        }
        close_row
    }

    fn done(&self) -> bool {
        self.rows_left == 0 && self.cols_left == 0
    }
}

fn greedy_basis(supplies: &[f64], demands: &[f64], cost: &CostTable) -> Vec<BasisCell> {
    let (m, n) = (cost.m, cost.n);
    let mut st = InitState::new(supplies, demands);
    for i in 0..m {
        while st.row_open[i] && !st.done() {
            let mut best: Option<(usize, f64, f64)> = None;
            for j in 0..n {
                if !st.col_open[j] {
                    continue;
                }
                let (p, v) = (cost.pen(i, j), cost.val(i, j));
                match best {
                    Some((_, bp, bv)) if !lex_less(p, v, bp, bv) => {}
                    _ => best = Some((j, p, v)),
                }
            }
            let (j, _, _) = best.expect("open column must exist while mass remains");
            st.assign(i, j);
        }
    }
    st.cells
}

/// Two smallest allowed costs of a line, plus the lexicographic minimum cell.
#[derive(Clone, Copy)]
struct LineMins {
    best_idx: usize,
    best_pen: f64,
    best_val: f64,
    second_val: f64,
    allowed: usize,
}

fn vogel_basis(supplies: &[f64], demands: &[f64], cost: &CostTable) -> Vec<BasisCell> {
    let (m, n) = (cost.m, cost.n);
    let mut st = InitState::new(supplies, demands);

    let row_mins = |st: &InitState, i: usize| -> LineMins {
        let mut mins = LineMins {
            best_idx: usize::MAX,
            best_pen: f64::INFINITY,
            best_val: f64::INFINITY,
            second_val: f64::INFINITY,
            allowed: 0,
        };
        for j in 0..n {
            if !st.col_open[j] {
                continue;
            }
            let (p, v) = (cost.pen(i, j), cost.val(i, j));
            if p < PEN_EPS {
                mins.allowed += 1;
                if v < mins.best_val || mins.best_pen > PEN_EPS {
                    if mins.best_pen < PEN_EPS {
                        mins.second_val = mins.best_val;
                    }
                    mins.best_val = v;
                    mins.best_pen = 0.0;
                    mins.best_idx = j;
                } else if v < mins.second_val {
                    mins.second_val = v;
                }
            } else if lex_less(p, v, mins.best_pen, mins.best_val) {
                mins.best_pen = p;
                mins.best_val = v;
                mins.best_idx = j;
            }
        }
        mins
    };
    let col_mins = |st: &InitState, j: usize| -> LineMins {
        let mut mins = LineMins {
            best_idx: usize::MAX,
            best_pen: f64::INFINITY,
            best_val: f64::INFINITY,
            second_val: f64::INFINITY,
            allowed: 0,
        };
        for i in 0..m {
            if !st.row_open[i] {
                continue;
            }
            let (p, v) = (cost.pen(i, j), cost.val(i, j));
            if p < PEN_EPS {
                mins.allowed += 1;
                if v < mins.best_val || mins.best_pen > PEN_EPS {
                    if mins.best_pen < PEN_EPS {
                        mins.second_val = mins.best_val;
                    }
                    mins.best_val = v;
                    mins.best_pen = 0.0;
                    mins.best_idx = i;
                } else if v < mins.second_val {
                    mins.second_val = v;
                }
            } else if lex_less(p, v, mins.best_pen, mins.best_val) {
                mins.best_pen = p;
                mins.best_val = v;
                mins.best_idx = i;
            }
        }
        mins
    };
    let penalty = |mins: &LineMins| -> f64 {
        match mins.allowed {
            0 => -1.0,
            1 => f64::INFINITY,
            _ => mins.second_val - mins.best_val,
        }
    };

    let mut row_cache: Vec<LineMins> = (0..m).map(|i| row_mins(&st, i)).collect();
    let mut col_cache: Vec<LineMins> = (0..n).map(|j| col_mins(&st, j)).collect();

    while !st.done() {
        // Highest Vogel penalty across open lines breaks toward rows.
        let mut best_line: Option<(bool, usize, f64)> = None;
        for i in 0..m {
            if st.row_open[i] {
                let p = penalty(&row_cache[i]);
                if best_line.is_none_or(|(_, _, bp)| p > bp) {
                    best_line = Some((true, i, p));
                }
            }
        }
        for j in 0..n {
            if st.col_open[j] {
                let p = penalty(&col_cache[j]);
                if best_line.is_none_or(|(_, _, bp)| p > bp) {
                    best_line = Some((false, j, p));
                }
            }
        }
        let (is_row, line, _) = best_line.expect("open line must exist");
        let (i, j) = if is_row {
            (line, row_cache[line].best_idx)
        } else {
            (col_cache[line].best_idx, line)
        };
        let closed_row = st.assign(i, j);
        if st.done() {
            break;
        }
        if closed_row {
            for j2 in 0..n {
                if st.col_open[j2]
                    && (col_cache[j2].best_idx == i || col_cache[j2].allowed <= 2)
                {
                    col_cache[j2] = col_mins(&st, j2);
                }
            }
        } else {
            for i2 in 0..m {
                if st.row_open[i2]
                    && (row_cache[i2].best_idx == j || row_cache[i2].allowed <= 2)
                {
                    row_cache[i2] = row_mins(&st, i2);
                }
            }
        }
        // The closed line's counterpart cache entry may now point at a closed
        // cell only through second_val; recompute the assigned line too.
        if st.row_open[i] {
            row_cache[i] = row_mins(&st, i);
        }
        if st.col_open[j] {
            col_cache[j] = col_mins(&st, j);
        }
    }
    st.cells
}

pub(crate) fn solve(
    supplies: &[f64],
    demands: &[f64],
    cost: &CostTable,
    options: &SimplexOptions,
) -> Result<SimplexOutcome, SimplexError> {
    let (m, n) = (cost.m, cost.n);
    debug_assert_eq!(supplies.len(), m);
    debug_assert_eq!(demands.len(), n);

    let mut tree = Tree::new(m, n, initial_basis(supplies, demands, cost));
    debug_assert_eq!(tree.cells.len(), m + n - 1);
    tree.recompute_duals(cost);

    let val_scale = cost.vals.iter().fold(1.0_f64, |acc, &v| acc.max(v.abs()));
    let tol = 1e-11 * val_scale;
    let block = ((m * n) as f64).sqrt().ceil() as usize;
    let block = block.max(64).min(m * n).max(1);

    let mut pivots = 0usize;
    let mut degenerate_pivots = 0usize;
    let mut degenerate_streak = 0usize;
    let mut bland = false;
    let bland_trigger = 2 * (m + n) + 16;
    let mut cursor = 0usize;
    let mut path_buf: Vec<u32> = Vec::new();
    let mut iterates = Vec::new();

    loop {
        // Entering edge: most lex-negative reduced cost in some block, or the
        // lowest-index negative cell under Bland's rule.
        let mut entering: Option<(usize, usize)> = None;
        if bland {
            'scan: for i in 0..m {
                for j in 0..n {
                    let rp = cost.pen(i, j) - tree.u_pen[i] - tree.v_pen[j];
                    let rv = cost.val(i, j) - tree.u_val[i] - tree.v_val[j];
                    if rp < -PEN_EPS || (rp.abs() <= PEN_EPS && rv < -tol) {
                        entering = Some((i, j));
                        break 'scan;
                    }
                }
            }
        } else {
            let total = m * n;
            let mut scanned = 0usize;
            while scanned < total {
                let mut best: Option<(usize, f64, f64)> = None;
                let end = (cursor + block).min(cursor + (total - scanned));
                let mut k = cursor;
                while k < end {
                    let flat = if k >= total { k - total } else { k };
                    let (i, j) = (flat / n, flat % n);
                    let rp = cost.pen(i, j) - tree.u_pen[i] - tree.v_pen[j];
                    let rv = cost.val(i, j) - tree.u_val[i] - tree.v_val[j];
                    if rp < -PEN_EPS || (rp.abs() <= PEN_EPS && rv < -tol) {
                        let better = match best {
                            None => true,
                            Some((_, bp, bv)) => lex_less(rp, rv, bp, bv),
                        };
                        if better {
                            best = Some((flat, rp, rv));
                        }
                    }
                    k += 1;
                }
                scanned += end - cursor;
                cursor = if end >= total { end - total } else { end };
                if let Some((flat, _, _)) = best {
                    entering = Some((flat / n, flat % n));
                    break;
                }
            }
        }

        let Some((ei, ej)) = entering else { break };

        tree.path(ei, ej, &mut path_buf);

        // Cells at even positions along the path lose flow.
        let mut theta = f64::INFINITY;
        let mut leaving: Option<(usize, u32)> = None; // (path position, slot)
        for (pos, &cid) in path_buf.iter().enumerate() {
            if pos % 2 == 0 {
                let cell = &tree.cells[cid as usize];
                let candidate_flow = cell.flow;
                let replace = match leaving {
                    None => true,
                    Some((_, cur)) => {
                        if (candidate_flow - theta).abs() <= FLOW_EPS {
                            // Tie on theta: Bland takes the smallest cell
                            // coordinates for termination.
                            if bland {
                                let cur_cell = &tree.cells[cur as usize];
                                (cell.i, cell.j) < (cur_cell.i, cur_cell.j)
                            } else {
                                false
                            }
                        } else {
                            candidate_flow < theta
                        }
                    }
                };
                if replace {
                    theta = candidate_flow;
                    leaving = Some((pos, cid));
                }
            }
        }
        let (_, leave_slot) = leaving.expect("cycle must contain a decreasing cell");
        if theta < 0.0 {
            theta = 0.0;
        }

        for (pos, &cid) in path_buf.iter().enumerate() {
            let cell = &mut tree.cells[cid as usize];
            if pos % 2 == 0 {
                cell.flow -= theta;
                if cell.flow < FLOW_EPS {
                    cell.flow = cell.flow.max(0.0);
                    cell.epsilon = cell.flow <= FLOW_EPS;
                }
            } else {
                cell.flow += theta;
                cell.epsilon = cell.flow <= FLOW_EPS;
            }
        }
        tree.replace(leave_slot, ei, ej, theta);
        tree.recompute_duals(cost);

        pivots += 1;
        if theta <= FLOW_EPS {
            degenerate_pivots += 1;
            degenerate_streak += 1;
            if degenerate_streak > bland_trigger {
                bland = true;
            }
        } else {
            degenerate_streak = 0;
        }

        if options.collect_iterates {
            let primal: f64 = tree
                .cells
                .iter()
                .map(|c| c.flow * cost.val(c.i as usize, c.j as usize))
                .sum();
            let dual: f64 = supplies
                .iter()
                .enumerate()
                .map(|(i, &a)| a * tree.u_val[i])
                .sum::<f64>()
                + demands.iter().enumerate().map(|(j, &b)| b * tree.v_val[j]).sum::<f64>();
            iterates.push(IterateRecord { primal_value: primal, dual_value: dual });
        }

        if pivots >= options.iteration_cap {
            return Err(SimplexError::IterationCap { iterations: pivots });
        }
    }

    let mut entries = Vec::new();
    let mut value = 0.0;
    let mut forbidden_mass = 0.0;
    let mut violating_source = None;
    for cell in &tree.cells {
        if cell.flow > PRUNE_EPS {
            let (i, j) = (cell.i as usize, cell.j as usize);
            entries.push((i, j, cell.flow));
            value += cell.flow * cost.val(i, j);
            if cost.is_forbidden(i, j) {
                forbidden_mass += cell.flow;
                violating_source = Some(i);
            }
        }
    }
    entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

    Ok(SimplexOutcome {
        entries,
        value,
        forbidden_mass,
        violating_source,
        pivots,
        degenerate_pivots,
        bland_activated: bland,
        iterates,
    })
}
