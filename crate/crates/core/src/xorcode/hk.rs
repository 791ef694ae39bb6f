//! Level-k bits of the XOR grid as GF(2) forms in the root and the edge noise.
//!
//! Column 0 is the root. Edge columns follow the canonical order used by the
//! grid simulator: level ascending, node ascending, left edge before right.
//! Level l contributes 2l edges, so its edges start at column 1 + l(l−1).

use crate::error::{Error, Result};
use crate::grid::edges_through;

use super::bitmatrix::{BitMatrix, BitVector};

/// Largest level for which H_k is built.
pub const MAX_HK_LEVEL: usize = 64;

/// Parity of the binomial coefficient C(k, j): odd iff the binary digits of
/// j are dominated by those of k. Zero for j > k.
#[inline]
pub fn binom_parity(k: usize, j: usize) -> bool {
    j & k == j
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeSlot {
    /// From parent (l−1, j−1).
    Left,
    /// From parent (l−1, j).
    Right,
}

/// An edge into node (level, node).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub level: usize,
    pub node: usize,
    pub slot: EdgeSlot,
}

impl Edge {
    /// Parent node the edge leaves from.
    pub fn parent(&self) -> (usize, usize) {
        match self.slot {
            EdgeSlot::Left => (self.level - 1, self.node - 1),
            EdgeSlot::Right => (self.level - 1, self.node),
        }
    }
}

/// Bijection between the edges into levels 1..=depth and columns 1..=depth(depth+1).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeIndex {
    depth: usize,
}

impl EdgeIndex {
    pub fn new(depth: usize) -> Self {
        Self { depth }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn edge_count(&self) -> usize {
        edges_through(self.depth)
    }

    /// Root column plus one column per edge.
    pub fn columns(&self) -> usize {
        1 + self.edge_count()
    }

    /// `None` for edges that do not exist (left edge of node 0, right edge of
    /// node l) or lie below `depth`.
    pub fn column(&self, edge: Edge) -> Option<usize> {
        let Edge {
            level: l,
            node: j,
            slot,
        } = edge;
        if l == 0 || l > self.depth || j > l {
            return None;
        }
        let local = match slot {
            EdgeSlot::Left if j >= 1 => 2 * j - 1,
            EdgeSlot::Right if j < l => 2 * j,
            _ => return None,
        };
        Some(1 + l * (l - 1) + local)
    }

    pub fn edge(&self, column: usize) -> Option<Edge> {
        if column == 0 || column > self.edge_count() {
            return None;
        }
        let i = column - 1;
        // Largest l with l(l−1) ≤ i.
        let mut l = ((1.0 + (1.0 + 4.0 * i as f64).sqrt()) / 2.0) as usize;
        while l * (l - 1) > i {
            l -= 1;
        }
        while (l + 1) * l <= i {
            l += 1;
        }
        let local = i - l * (l - 1);
        let (node, slot) = if local.is_multiple_of(2) {
            (local / 2, EdgeSlot::Right)
        } else {
            (local.div_ceil(2), EdgeSlot::Left)
        };
        Some(Edge {
            level: l,
            node,
            slot,
        })
    }

    /// Column of the single edge into the left boundary node (depth, 0).
    pub fn left_boundary(&self) -> usize {
        self.column(Edge {
            level: self.depth,
            node: 0,
            slot: EdgeSlot::Right,
        })
        .expect("depth ≥ 1")
    }

    /// Column of the single edge into the right boundary node (depth, depth).
    pub fn right_boundary(&self) -> usize {
        self.column(Edge {
            level: self.depth,
            node: self.depth,
            slot: EdgeSlot::Left,
        })
        .expect("depth ≥ 1")
    }
}

/// H_k together with its column labelling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParityCheck {
    pub k: usize,
    /// (k+1) × (1 + k(k+1)); row j gives X_{k,j}.
    pub matrix: BitMatrix,
    pub edges: EdgeIndex,
}

impl ParityCheck {
    /// Level-k word from a root bit and one noise bit per edge in canonical order.
    pub fn evaluate(&self, root: bool, noise: &[bool]) -> Result<Vec<bool>> {
        let mut x = Vec::with_capacity(1 + noise.len());
        x.push(root);
        x.extend_from_slice(noise);
        Ok(self.matrix.mul_vec(&BitVector::from_bits(&x))?.to_bits())
    }
}

fn check_level(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("H_k needs k ≥ 1"));
    }
    if k > MAX_HK_LEVEL {
        return Err(Error::BudgetExceeded {
            what: "H_k level",
            requested: k,
            limit: MAX_HK_LEVEL,
        });
    }
    Ok(())
}

/// Builds H_k by pushing coefficient vectors down the grid: a boundary node
/// copies its parent's form plus its edge, an interior node sums both.
pub fn build_hk(k: usize) -> Result<ParityCheck> {
    check_level(k)?;
    let edges = EdgeIndex::new(k);
    let n = edges.columns();
    let mut level = vec![BitVector::unit(n, 0)];
    for l in 1..=k {
        let mut next = Vec::with_capacity(l + 1);
        for j in 0..=l {
            let mut form = BitVector::zeros(n);
            for slot in [EdgeSlot::Left, EdgeSlot::Right] {
                let e = Edge {
                    level: l,
                    node: j,
                    slot,
                };
                if let Some(c) = edges.column(e) {
                    form.xor_assign(&level[e.parent().1]);
                    form.flip(c);
                }
            }
            next.push(form);
        }
        level = next;
    }
    Ok(ParityCheck {
        k,
        matrix: BitMatrix::from_rows(&level)?,
        edges,
    })
}

/// Weight-3 vector on the root and the two boundary edges of level k.
pub fn omega(k: usize) -> Result<BitVector> {
    check_level(k)?;
    let e = EdgeIndex::new(k);
    Ok(BitVector::from_support(
        e.columns(),
        &[0, e.left_boundary(), e.right_boundary()],
    ))
}

/// Whether ω^k is a codeword of H_k. Only powers of two are accepted.
pub fn check_omega(k: usize) -> Result<bool> {
    if !k.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(k));
    }
    let h = build_hk(k)?;
    Ok(h.matrix.mul_vec(&omega(k)?)?.is_zero())
}
