//! Finite discrete-time Markov chains: n-step evolution, communication
//! structure, classification and stationary laws.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_dense;

/// Maximum allowed deviation of a row sum (or distribution total) from one.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Row-stochastic square matrix with state labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    states: Vec<String>,
    rows: DMatrix<f64>,
}

impl TransitionMatrix {
    /// Builds a chain with states labelled `0..n`.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::with_labels(labels, rows)
    }

    pub fn with_labels(states: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Validation("transition matrix must have at least one state".into()));
        }
        if states.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: states.len() });
        }
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Validation(format!(
                    "row {i} has {} entries, matrix is {n}x{n}",
                    row.len()
                )));
            }
            for (j, &p) in row.iter().enumerate() {
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::Validation(format!("entry ({i},{j}) = {p} is not a probability")));
                }
                m[(i, j)] = p;
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Validation(format!("row {i} sums to {sum:.17}, expected 1")));
            }
        }
        Ok(Self { states, rows: m })
    }

    fn from_matrix_unchecked(states: Vec<String>, rows: DMatrix<f64>) -> Self {
        Self { states, rows }
    }

    pub fn identity(n: usize) -> Result<Self> {
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(rows)
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.rows[(from, to)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    /// `P^n` by repeated squaring; `n = 0` gives the identity.
    pub fn n_step(&self, n: u64) -> TransitionMatrix {
        let size = self.len();
        let mut result = DMatrix::identity(size, size);
        let mut base = self.rows.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                result = &result * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        Self::from_matrix_unchecked(self.states.clone(), result)
    }

    /// Law of `X_n` given the law of `X_0`: `pi0 P^n`.
    pub fn evolve(&self, pi0: &Distribution, n: u64) -> Result<Distribution> {
        if pi0.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: pi0.len() });
        }
        let mut v = DVector::from_column_slice(&pi0.weights).transpose();
        for _ in 0..n {
            v = &v * &self.rows;
        }
        Ok(Distribution { weights: v.iter().copied().collect() })
    }

    /// Successors of `x` with positive probability.
    fn successors(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&y| self.rows[(x, y)] > 0.0)
    }

    /// Communication classes, closedness, per-class period and per-state kind.
    pub fn classify(&self) -> StateClassification {
        let comps = strongly_connected_components(self.len(), |x| self.successors(x).collect());
        let mut class_of = vec![0usize; self.len()];
        for (c, members) in comps.iter().enumerate() {
            for &x in members {
                class_of[x] = c;
            }
        }
        let mut classes = Vec::with_capacity(comps.len());
        for (c, members) in comps.into_iter().enumerate() {
            let closed = members
                .iter()
                .all(|&x| self.successors(x).all(|y| class_of[y] == c));
            let period = self.class_period(&members, &class_of, c);
            classes.push(CommunicationClass { states: members, closed, period });
        }
        let kinds = (0..self.len())
            .map(|x| {
                let class = &classes[class_of[x]];
                if (self.rows[(x, x)] - 1.0).abs() <= ROW_SUM_TOL {
                    StateKind::Absorbing
                } else if class.closed {
                    StateKind::Recurrent
                } else {
                    StateKind::Transient
                }
            })
            .collect();
        StateClassification { classes, kinds }
    }

    /// Period of a class via BFS levels: gcd of `level(u) + 1 - level(v)` over
    /// every arc `u -> v` inside the class. Zero when the class has no internal arc.
    fn class_period(&self, members: &[usize], class_of: &[usize], c: usize) -> usize {
        let root = members[0];
        let mut level = vec![usize::MAX; self.len()];
        level[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        let mut g: usize = 0;
        while let Some(u) = queue.pop_front() {
            for v in self.successors(u).filter(|&v| class_of[v] == c) {
                if level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                } else {
                    let diff = (level[u] as i64 + 1 - level[v] as i64).unsigned_abs() as usize;
                    g = gcd(g, diff);
                }
            }
        }
        g
    }

    /// Unique stationary law of an irreducible chain.
    ///
    /// Solves `(P^T - I) pi = 0` with the last equation replaced by `sum pi = 1`.
    pub fn stationary(&self) -> Result<Distribution> {
        let cls = self.classify();
        if cls.classes.len() != 1 {
            return Err(Error::Reducible {
                classes: cls.classes.iter().map(|c| c.states.clone()).collect(),
            });
        }
        let n = self.len();
        let mut a = self.rows.transpose() - DMatrix::identity(n, n);
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut b = DVector::zeros(n);
        b[n - 1] = 1.0;
        let sol = solve_dense(&a, &b)?;
        Ok(Distribution { weights: sol.x.iter().map(|&p| p.max(0.0)).collect() })
    }

    pub fn ergodicity(&self) -> Ergodicity {
        let cls = self.classify();
        if cls.classes.len() != 1 {
            return Ergodicity::Reducible;
        }
        match cls.classes[0].period {
            1 => Ergodicity::Ergodic,
            d => Ergodicity::Periodic(d),
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Iterative Tarjan. Components come out in reverse topological order.
pub(crate) fn strongly_connected_components<F>(n: usize, succ: F) -> Vec<Vec<usize>>
where
    F: Fn(usize) -> Vec<usize>,
{
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut counter = 0;
    let adj: Vec<Vec<usize>> = (0..n).map(&succ).collect();

    for start in 0..n {
        if index[start] != UNSEEN {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(start, 0)];
        index[start] = counter;
        low[start] = counter;
        counter += 1;
        stack.push(start);
        on_stack[start] = true;
        while let Some(&mut (v, ref mut next)) = call.last_mut() {
            if *next < adj[v].len() {
                let w = adj[v][*next];
                *next += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps.sort_by_key(|c| c[0]);
    comps
}

/// Probability vector over the states of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Validation("distribution weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::Validation(format!("distribution sums to {total:.17}, expected 1")));
        }
        Ok(Self { weights })
    }

    /// Point mass at state `x` of an `n`-state chain.
    pub fn point_mass(n: usize, x: usize) -> Result<Self> {
        let mut w = vec![0.0; n];
        *w.get_mut(x).ok_or(Error::DimensionMismatch { expected: n, got: x + 1 })? = 1.0;
        Ok(Self { weights: w })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Recurrent,
    Transient,
    Absorbing,
}

impl StateKind {
    pub fn is_recurrent(self) -> bool {
        !matches!(self, StateKind::Transient)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunicationClass {
    pub states: Vec<usize>,
    pub closed: bool,
    /// gcd of return lengths; 0 for a transient singleton with no self-loop.
    pub period: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateClassification {
    pub classes: Vec<CommunicationClass>,
    pub kinds: Vec<StateKind>,
}

impl StateClassification {
    pub fn is_irreducible(&self) -> bool {
        self.classes.len() == 1
    }

    pub fn class_of(&self, state: usize) -> Option<&CommunicationClass> {
        self.classes.iter().find(|c| c.states.contains(&state))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict", content = "period")]
pub enum Ergodicity {
    Ergodic,
    Periodic(usize),
    Reducible,
}
