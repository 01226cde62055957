//! Network simplex on the dense transportation tableau.
//!
//! The initial basis comes from the northwest-corner rule (advancing the row
//! index when a tie exhausts supply and demand together), and pivoting uses
//! Bland's smallest-index rule in row-major cell order: first cell with
//! negative reduced cost enters, and the smallest-index blocking cell leaves.
//! Both choices are deterministic, and Bland's rule precludes cycling.
//!
//! Masses only ever combine by addition and subtraction of input masses, so
//! the output plan carries no solver-introduced rounding beyond cancellation
//! dust (pruned by the caller).

use crate::error::Result;

/// Solution of a balanced transportation problem on support indices.
#[derive(Debug, Clone)]
pub(crate) struct TableauSolution {
    /// Strictly positive cells (row, col, mass) in row-major order.
    pub cells: Vec<(usize, usize, f64)>,
    /// Row (source) potentials with u[0] = 0; u[i] + v[j] = cost(i,j) on the
    /// final basis and u[i] + v[j] <= cost(i,j) everywhere when `optimal`.
    pub u: Vec<f64>,
    /// Column (sink) potentials.
    pub v: Vec<f64>,
    /// True when dual feasibility was certified before the pivot cap.
    pub optimal: bool,
}

/// Solves min Σ x_ij·cost_ij subject to row sums `a`, column sums `b`,
/// x ≥ 0. `cost` is row-major p×q. Assumes Σa = Σb (up to float dust; any
/// residual lands in the final corner cell) and all entries finite.
pub(crate) fn solve_transportation(
    p: usize,
    q: usize,
    cost: &[f64],
    a: &[f64],
    b: &[f64],
) -> Result<TableauSolution> {
    debug_assert_eq!(cost.len(), p * q);
    debug_assert_eq!(a.len(), p);
    debug_assert_eq!(b.len(), q);

    let c = |i: usize, j: usize| cost[i * q + j];
    let cmax = cost.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let eps = 1e-11 * (1.0 + cmax);

    // Northwest-corner initial basis: exactly p+q-1 cells, forming a
    // spanning tree of the bipartite row/column graph.
    let mut x = vec![0.0f64; p * q];
    let mut in_basis = vec![false; p * q];
    let mut rem_a = a.to_vec();
    let mut rem_b = b.to_vec();
    let (mut i, mut j) = (0usize, 0usize);
    loop {
        let m = rem_a[i].min(rem_b[j]);
        x[i * q + j] = m;
        in_basis[i * q + j] = true;
        rem_a[i] -= m;
        rem_b[j] -= m;
        if i == p - 1 && j == q - 1 {
            break;
        }
        if rem_a[i] == 0.0 && i < p - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }

    let max_pivots = 10_000 + 100 * (p + q);
    let mut pivots = 0;
    let mut optimal = false;
    let mut u = vec![0.0; p];
    let mut v = vec![0.0; q];

    loop {
        compute_potentials(p, q, &in_basis, &c, &mut u, &mut v);

        // Bland entering rule: first row-major cell with negative reduced cost.
        let mut entering = None;
        'scan: for i in 0..p {
            for j in 0..q {
                if !in_basis[i * q + j] && c(i, j) - u[i] - v[j] < -eps {
                    entering = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            optimal = true;
            break;
        };
        if pivots >= max_pivots {
            break;
        }
        pivots += 1;

        // The entering cell closes a unique cycle with the basis tree:
        // entering cell positive, then alternating signs along the tree path
        // from column ej back to row ei.
        let path = tree_path(p, q, &in_basis, ej, ei);
        let mut plus = vec![(ei, ej)];
        let mut minus = Vec::new();
        for (k, cell) in path.iter().enumerate() {
            if k % 2 == 0 {
                minus.push(*cell);
            } else {
                plus.push(*cell);
            }
        }

        // Leaving cell: smallest-index blocking cell among the minus set.
        let theta = minus.iter().map(|&(i, j)| x[i * q + j]).fold(f64::INFINITY, f64::min);
        let leaving = *minus
            .iter()
            .filter(|&&(i, j)| x[i * q + j] == theta)
            .min()
            .expect("minus set is nonempty");

        for &(i, j) in &plus {
            x[i * q + j] += theta;
        }
        for &(i, j) in &minus {
            x[i * q + j] -= theta;
        }
        x[leaving.0 * q + leaving.1] = 0.0;
        in_basis[leaving.0 * q + leaving.1] = false;
        in_basis[ei * q + ej] = true;
    }

    let mut cells = Vec::new();
    for i in 0..p {
        for j in 0..q {
            if x[i * q + j] > 0.0 {
                cells.push((i, j, x[i * q + j]));
            }
        }
    }
    Ok(TableauSolution { cells, u, v, optimal })
}

/// Solves u_i + v_j = c(i,j) over the basis tree, rooted at row 0 with
/// u[0] = 0, by breadth-first propagation. The basis of a balanced
/// transportation problem always spans all rows and columns.
fn compute_potentials(
    p: usize,
    q: usize,
    in_basis: &[bool],
    c: &impl Fn(usize, usize) -> f64,
    u: &mut [f64],
    v: &mut [f64],
) {
    let mut row_done = vec![false; p];
    let mut col_done = vec![false; q];
    u[0] = 0.0;
    row_done[0] = true;
    // Frontier of nodes whose potential is known; rows are 0..p, columns p..p+q.
    let mut frontier = std::collections::VecDeque::from([0usize]);
    while let Some(node) = frontier.pop_front() {
        if node < p {
            let i = node;
            for j in 0..q {
                if in_basis[i * q + j] && !col_done[j] {
                    v[j] = c(i, j) - u[i];
                    col_done[j] = true;
                    frontier.push_back(p + j);
                }
            }
        } else {
            let j = node - p;
            for i in 0..p {
                if in_basis[i * q + j] && !row_done[i] {
                    u[i] = c(i, j) - v[j];
                    row_done[i] = true;
                    frontier.push_back(i);
                }
            }
        }
    }
    debug_assert!(row_done.iter().all(|&d| d) && col_done.iter().all(|&d| d));
}

/// Path of basis cells from column `start_col` to row `end_row` through the
/// basis tree. Nodes alternate column/row, so the path has odd length and
/// alternating signs starting negative close the pivot cycle.
fn tree_path(p: usize, q: usize, in_basis: &[bool], start_col: usize, end_row: usize) -> Vec<(usize, usize)> {
    // Node ids: rows 0..p, columns p..p+q.
    let n = p + q;
    let mut parent = vec![usize::MAX; n];
    let start = p + start_col;
    let target = end_row;
    parent[start] = start;
    let mut queue = std::collections::VecDeque::from([start]);
    'bfs: while let Some(node) = queue.pop_front() {
        if node < p {
            let i = node;
            for j in 0..q {
                if in_basis[i * q + j] && parent[p + j] == usize::MAX {
                    parent[p + j] = node;
                    queue.push_back(p + j);
                }
            }
        } else {
            let j = node - p;
            for i in 0..p {
                if in_basis[i * q + j] && parent[i] == usize::MAX {
                    parent[i] = node;
                    if i == target {
                        break 'bfs;
                    }
                    queue.push_back(i);
                }
            }
        }
    }
    debug_assert_ne!(parent[target], usize::MAX, "basis must be connected");

    // Walk parents from the end row back to the start column, emitting the
    // cell of each tree edge; then reverse so the list starts at the column.
    let mut cells = Vec::new();
    let mut node = target;
    while node != start {
        let par = parent[node];
        let (i, j) = if node < p { (node, par - p) } else { (par, node - p) };
        cells.push((i, j));
        node = par;
    }
    cells.reverse();
    cells
}
