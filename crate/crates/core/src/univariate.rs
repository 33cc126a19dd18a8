//! Nested univariate building blocks: Chebyshev extrema on `[0, 1]`,
//! the doubling cardinality rule and barycentric polynomial interpolation.
//!
//! Level `i` has `m_i` nodes, `m_1 = 1` and `m_i = 2^(i-1) + 1` otherwise.
//! Node `j` (zero based, ascending) of a level with `m > 1` nodes sits at
//! `-cos(j * pi / (m - 1)) / 2 + 1/2`; the single level-1 node is `1/2`.
//! Because the levels are nested, every node is identified exactly by the
//! reduced dyadic fraction `j / (m - 1)`, see [`NodeKey`].

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::num::NonZeroU32;

/// Univariate resolution level, always at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Level(NonZeroU32);

impl Level {
    pub fn new(i: u32) -> Option<Self> {
        NonZeroU32::new(i).map(Level)
    }

    pub fn get(self) -> u32 {
        self.0.get()
    }
}

/// Number of nodes `m_i` on level `i`.
pub fn cardinality(level: Level) -> usize {
    cardinality_of(level.get())
}

/// `m_i` for a raw level, with the convention `m_0 = 0`.
pub(crate) fn cardinality_of(i: u32) -> usize {
    match i {
        0 => 0,
        1 => 1,
        _ => (1usize << (i - 1)) + 1,
    }
}

/// Exact identity of a node: the reduced fraction `t = (j-1)/(m_i-1)`.
///
/// The physical coordinate is `sin^2(pi t / 2)`, so two keys are equal
/// exactly when the nodes coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeKey {
    numerator: u64,
    denominator: u64,
}

impl NodeKey {
    /// Builds a key from an arbitrary fraction in `[0, 1]`, reducing it.
    pub fn new(numerator: u64, denominator: u64) -> Self {
        assert!(
            denominator > 0 && numerator <= denominator,
            "node fraction must lie in [0, 1]"
        );
        let g = gcd(numerator, denominator);
        NodeKey {
            numerator: numerator / g,
            denominator: denominator / g,
        }
    }

    pub fn numerator(self) -> u64 {
        self.numerator
    }

    pub fn denominator(self) -> u64 {
        self.denominator
    }

    /// Coordinate in `[0, 1]`.
    ///
    /// Computed from the reduced fraction only, so a node shared by several
    /// levels gets bit-identical coordinates on all of them. The lower half
    /// uses `sin^2`, the upper half is mirrored, which keeps the node set
    /// symmetric under `x -> 1 - x`.
    pub fn coordinate(self) -> f64 {
        let (a, b) = (self.numerator, self.denominator);
        if a == 0 {
            0.0
        } else if a == b {
            1.0
        } else if 2 * a == b {
            0.5
        } else if 2 * a < b {
            let s = (PI * a as f64 / (2 * b) as f64).sin();
            s * s
        } else {
            let s = (PI * (b - a) as f64 / (2 * b) as f64).sin();
            1.0 - s * s
        }
    }

    /// Level on which this node first appears.
    pub fn level(self) -> u32 {
        match self.denominator {
            1 => 2,
            2 => 1,
            den => den.trailing_zeros() + 1,
        }
    }

    /// Hierarchical code: nodes of level `i` are exactly the codes `0..m_i`.
    ///
    /// `1/2 -> 0`, `0 -> 1`, `1 -> 2`, then the new odd fractions of each
    /// level in ascending order.
    pub fn code(self) -> u32 {
        match self.denominator {
            1 => 1 + self.numerator as u32,
            2 => 0,
            _ => {
                let level = self.level();
                (cardinality_of(level - 1) + ((self.numerator - 1) / 2) as usize) as u32
            }
        }
    }

    /// Inverse of [`NodeKey::code`].
    pub fn from_code(code: u32) -> Self {
        match code {
            0 => NodeKey {
                numerator: 1,
                denominator: 2,
            },
            1 => NodeKey {
                numerator: 0,
                denominator: 1,
            },
            2 => NodeKey {
                numerator: 1,
                denominator: 1,
            },
            c => {
                // smallest level whose cardinality exceeds c
                let mut level = 3;
                while cardinality_of(level) <= c as usize {
                    level += 1;
                }
                let offset = c as u64 - cardinality_of(level - 1) as u64;
                NodeKey {
                    numerator: 2 * offset + 1,
                    denominator: 1 << (level - 1),
                }
            }
        }
    }
}

impl fmt::Display for NodeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Key of node `position` (zero based, ascending) on `level`.
pub fn node_key(level: Level, position: usize) -> NodeKey {
    let m = cardinality(level);
    assert!(
        position < m,
        "position {position} out of range for {m} nodes"
    );
    if m == 1 {
        NodeKey::new(1, 2)
    } else {
        NodeKey::new(position as u64, (m - 1) as u64)
    }
}

/// Nodes of one level together with their barycentric weights.
#[derive(Debug, Clone)]
pub struct UnivariateRule {
    level: Level,
    nodes: Vec<f64>,
    bary_weights: Vec<f64>,
    codes: Vec<u32>,
}

impl UnivariateRule {
    pub fn level(&self) -> Level {
        self.level
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn bary_weights(&self) -> &[f64] {
        &self.bary_weights
    }

    /// Hierarchical codes of the nodes, in node order.
    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    /// Values at `x` of all Lagrange basis polynomials of this rule.
    ///
    /// At an exact node hit the unit vector is returned, which keeps the
    /// interpolation property bit exact.
    pub fn lagrange_basis(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.nodes.len());
        if let Some(hit) = self.nodes.iter().position(|&node| node == x) {
            out.fill(0.0);
            out[hit] = 1.0;
            return;
        }
        let mut total = 0.0;
        for ((o, &node), &w) in out.iter_mut().zip(&self.nodes).zip(&self.bary_weights) {
            *o = w / (x - node);
            total += *o;
        }
        for o in out.iter_mut() {
            *o /= total;
        }
    }

    /// Row-major `m x m` matrix mapping nodal values to the coefficients of
    /// the interpolating polynomial in the orthonormal Chebyshev basis
    /// `b_0 = 1`, `b_k = sqrt(2) T_k(2x - 1)`.
    pub fn chebyshev_transform(&self) -> Vec<f64> {
        let m = self.nodes.len();
        if m == 1 {
            return vec![1.0];
        }
        let n = m - 1;
        let mut out = vec![0.0; m * m];
        for k in 0..m {
            // endpoint coefficients of the Clenshaw-Curtis sum carry a 1/2
            let edge_k = if k == 0 || k == n { 0.5 } else { 1.0 };
            let ortho = if k == 0 { 1.0 } else { FRAC_1_SQRT_2 };
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            for j in 0..m {
                let edge_j = if j == 0 || j == n { 0.5 } else { 1.0 };
                let r = (k * j) % (2 * n);
                let c = (PI * r as f64 / n as f64).cos();
                out[k * m + j] = 2.0 / n as f64 * sign * edge_k * ortho * edge_j * c;
            }
        }
        out
    }
}

/// The rule of `level`: ascending nodes and closed-form barycentric weights
/// `(-1)^j`, halved at the two endpoints.
pub fn nodes(level: Level) -> UnivariateRule {
    let m = cardinality(level);
    let keys: Vec<NodeKey> = (0..m).map(|j| node_key(level, j)).collect();
    let nodes = keys.iter().map(|k| k.coordinate()).collect();
    let codes = keys.iter().map(|k| k.code()).collect();
    let bary_weights = (0..m)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            if m > 1 && (j == 0 || j == m - 1) {
                0.5 * sign
            } else {
                sign
            }
        })
        .collect();
    UnivariateRule {
        level,
        nodes,
        bary_weights,
        codes,
    }
}

/// Rules for levels `1..=max_level`, indexed by `level - 1`.
pub(crate) fn rules_up_to(max_level: u32) -> Vec<UnivariateRule> {
    (1..=max_level)
        .map(|i| nodes(Level::new(i).unwrap()))
        .collect()
}

/// Evaluates at `x` the polynomial of degree `< m` through `(nodes, values)`.
pub fn interp_eval_1d(values: &[f64], rule: &UnivariateRule, x: f64) -> f64 {
    assert_eq!(values.len(), rule.len(), "one value per node required");
    if values.len() == 1 {
        return values[0];
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&node, &w), &v) in rule.nodes.iter().zip(&rule.bary_weights).zip(values) {
        if node == x {
            return v;
        }
        let t = w / (x - node);
        num += t * v;
        den += t;
    }
    num / den
}
