//! Hierarchical Tucker format over a binary dimension tree.
//!
//! Every node `Q` carries a basis `U_Q` of the column space of the
//! `Q`-unfolding. Only leaf bases are stored explicitly; an internal node
//! stores its transfer matrix `G_Q` with
//!
//! ```text
//! U_Q = (U_{Q_r} ⊗ U_{Q_l}) G_Q,   rows of G_Q indexed a_l + r_l · a_r
//! ```
//!
//! which is the ordering under which ψ-order vectorisation is consistent when
//! all modes of the left child precede those of the right child. The root
//! basis is `vec(𝒜)` itself, so the root rank is 1.

use crate::error::{Error, Result};
use crate::linalg::{compact_svd, Matrix, RankTolerance, Vector};
use crate::tensor::{unfold, DenseTensor};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeNode {
    /// Sorted 1-based modes.
    pub modes: Vec<usize>,
    /// Arena indices of the (left, right) children; `None` for leaves.
    pub children: Option<(usize, usize)>,
}

/// Binary dimension tree stored as an arena with the root at index 0.
/// Children always have larger indices than their parent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DimensionTree {
    nodes: Vec<TreeNode>,
    leaf_of_mode: Vec<usize>,
}

impl DimensionTree {
    /// Validate and index an arbitrary tree.
    pub fn from_nodes(nodes: Vec<TreeNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Argument("dimension tree has no nodes".into()));
        }
        let k = nodes[0].modes.len();
        if nodes[0].modes != (1..=k).collect::<Vec<_>>() {
            return Err(Error::Argument(format!("root modes must be 1..={k}, got {:?}", nodes[0].modes)));
        }
        if k < 2 {
            return Err(Error::Argument("dimension tree needs k >= 2".into()));
        }
        let mut seen = vec![false; nodes.len()];
        seen[0] = true;
        let mut leaf_of_mode = vec![usize::MAX; k];
        for (i, node) in nodes.iter().enumerate() {
            if !seen[i] {
                return Err(Error::Argument(format!("node {i} is not reachable from the root")));
            }
            match node.children {
                None => {
                    if node.modes.len() != 1 {
                        return Err(Error::Argument(format!("leaf {i} has modes {:?}", node.modes)));
                    }
                    leaf_of_mode[node.modes[0] - 1] = i;
                }
                Some((l, r)) => {
                    if l <= i || r <= i || l >= nodes.len() || r >= nodes.len() || l == r || seen[l] || seen[r] {
                        return Err(Error::Argument(format!("node {i} has invalid children ({l}, {r})")));
                    }
                    seen[l] = true;
                    seen[r] = true;
                    let (lm, rm) = (&nodes[l].modes, &nodes[r].modes);
                    if lm.is_empty() || rm.is_empty() || lm.last() >= rm.first() {
                        return Err(Error::Argument(format!(
                            "node {i}: left modes {lm:?} must all precede right modes {rm:?}"
                        )));
                    }
                    let union: Vec<usize> = lm.iter().chain(rm).copied().collect();
                    if union != node.modes || union.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(Error::Argument(format!(
                            "node {i}: children {lm:?} and {rm:?} do not partition {:?}",
                            node.modes
                        )));
                    }
                }
            }
        }
        Ok(DimensionTree { nodes, leaf_of_mode })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &TreeNode {
        &self.nodes[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn order(&self) -> usize {
        self.nodes[0].modes.len()
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        self.nodes[i].children.is_none()
    }

    /// Arena index of the leaf holding 1-based mode `p`.
    pub fn leaf_of_mode(&self, p: usize) -> usize {
        self.leaf_of_mode[p - 1]
    }

    /// Length of the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(t: &DimensionTree, i: usize) -> usize {
            match t.nodes[i].children {
                None => 0,
                Some((l, r)) => 1 + walk(t, l).max(walk(t, r)),
            }
        }
        walk(self, 0)
    }
}

/// Canonical balanced tree: a node with `s` modes gives its first `⌈s/2⌉`
/// modes to the left child.
pub fn build_tree(k: usize) -> Result<DimensionTree> {
    if k < 2 {
        return Err(Error::Argument(format!("dimension tree needs k >= 2, got {k}")));
    }
    fn grow(nodes: &mut Vec<TreeNode>, modes: Vec<usize>) -> usize {
        let idx = nodes.len();
        nodes.push(TreeNode { modes: modes.clone(), children: None });
        if modes.len() > 1 {
            let split = modes.len().div_ceil(2);
            let l = grow(nodes, modes[..split].to_vec());
            let r = grow(nodes, modes[split..].to_vec());
            nodes[idx].children = Some((l, r));
        }
        idx
    }
    let mut nodes = Vec::with_capacity(2 * k - 1);
    grow(&mut nodes, (1..=k).collect());
    DimensionTree::from_nodes(nodes)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HTucker {
    tree: DimensionTree,
    dims: Vec<usize>,
    /// Leaf factor `U_p` (n_p × r_p) at leaves, transfer `G_Q` elsewhere.
    blocks: Vec<Matrix>,
}

/// `vec(L · reshape(g, [r_l, r_r]) · Rᵀ)` for every column of `g`, i.e.
/// `(R ⊗ L) g` without forming the Kronecker product.
fn nest(left: &Matrix, right: &Matrix, g: &Matrix) -> Matrix {
    let (rl, rr) = (left.ncols(), right.ncols());
    let rows = left.nrows() * right.nrows();
    let mut out = Matrix::zeros(rows, g.ncols());
    for c in 0..g.ncols() {
        let gc = Matrix::from_column_slice(rl, rr, g.column(c).as_slice());
        let block = left * gc * right.transpose();
        out.column_mut(c).copy_from_slice(block.as_slice());
    }
    out
}

impl HTucker {
    /// Assemble from explicit blocks (leaf factors and transfer matrices),
    /// checking all shapes against the tree.
    pub fn new(tree: DimensionTree, dims: Vec<usize>, blocks: Vec<Matrix>) -> Result<Self> {
        if dims.len() != tree.order() {
            return Err(Error::Shape(format!("{} dims for a tree of order {}", dims.len(), tree.order())));
        }
        if blocks.len() != tree.len() {
            return Err(Error::Shape(format!("{} blocks for a tree with {} nodes", blocks.len(), tree.len())));
        }
        let h = HTucker { tree, dims, blocks };
        for i in 0..h.tree.len() {
            let b = &h.blocks[i];
            match h.tree.nodes[i].children {
                None => {
                    let n = h.dims[h.tree.nodes[i].modes[0] - 1];
                    if b.nrows() != n || b.ncols() == 0 {
                        return Err(Error::Shape(format!("leaf {i} factor is {}x{}, expected {n}xr", b.nrows(), b.ncols())));
                    }
                }
                Some((l, r)) => {
                    let need = h.rank(l) * h.rank(r);
                    if b.nrows() != need || b.ncols() == 0 {
                        return Err(Error::Shape(format!(
                            "transfer at node {i} is {}x{}, expected {need} rows",
                            b.nrows(),
                            b.ncols()
                        )));
                    }
                }
            }
        }
        if h.rank(0) != 1 {
            return Err(Error::Shape("root rank must be 1".into()));
        }
        Ok(h)
    }

    pub fn tree(&self) -> &DimensionTree {
        &self.tree
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    pub fn cubical_dim(&self) -> Option<usize> {
        let n = self.dims[0];
        self.dims.iter().all(|&d| d == n).then_some(n)
    }

    /// Hierarchical rank `r_Q` of node `i`.
    pub fn rank(&self, i: usize) -> usize {
        self.blocks[i].ncols()
    }

    pub fn ranks(&self) -> Vec<usize> {
        (0..self.tree.len()).map(|i| self.rank(i)).collect()
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    /// Leaf factor `U_p` for 1-based mode `p`.
    pub fn leaf_factor(&self, p: usize) -> &Matrix {
        &self.blocks[self.tree.leaf_of_mode(p)]
    }

    /// Explicit basis `U_Q` of node `i`, expanded through the subtree.
    pub fn node_basis(&self, i: usize) -> Matrix {
        match self.tree.nodes[i].children {
            None => self.blocks[i].clone(),
            Some((l, r)) => nest(&self.node_basis(l), &self.node_basis(r), &self.blocks[i]),
        }
    }

    /// Propagate leaf substitutes `w[p]` (one per mode) up the tree.
    fn propagate(&self, i: usize, leaves: &[Matrix]) -> Matrix {
        match self.tree.nodes[i].children {
            None => leaves[self.tree.nodes[i].modes[0] - 1].clone(),
            Some((l, r)) => nest(&self.propagate(l, leaves), &self.propagate(r, leaves), &self.blocks[i]),
        }
    }
}

/// Build the representation from explicit node bases (`bases[i]` is `U_Q`
/// for every non-root node `i`, ignored at the root). Transfers are obtained
/// by projection onto the children, the root by projecting `vec(𝒜)`.
pub(crate) fn assemble(t: &DenseTensor, tree: &DimensionTree, bases: Vec<Matrix>) -> Result<HTucker> {
    let mut blocks = Vec::with_capacity(tree.len());
    for (i, node) in tree.nodes.iter().enumerate() {
        let block = match node.children {
            None => bases[i].clone(),
            Some((l, r)) => {
                let target = if i == 0 { Matrix::from_column_slice(t.len(), 1, t.values()) } else { bases[i].clone() };
                // G = (U_r ⊗ U_l)ᵀ U_Q, computed slice-wise.
                let (ul, ur) = (&bases[l], &bases[r]);
                let (nl, nr) = (ul.nrows(), ur.nrows());
                let mut g = Matrix::zeros(ul.ncols() * ur.ncols(), target.ncols());
                for c in 0..target.ncols() {
                    let slab = Matrix::from_column_slice(nl, nr, target.column(c).as_slice());
                    let proj = ul.transpose() * slab * ur;
                    g.column_mut(c).copy_from_slice(proj.as_slice());
                }
                g
            }
        };
        blocks.push(block);
    }
    HTucker::new(tree.clone(), t.dims().to_vec(), blocks)
}

/// Left singular vectors of the `Q`-unfolding, with a zero column standing in
/// for an empty basis.
pub(crate) fn unfolding_basis(t: &DenseTensor, modes: &[usize], tol: RankTolerance) -> Result<Matrix> {
    let m = unfold(t, modes)?;
    let svd = compact_svd(&m, tol)?;
    Ok(if svd.rank() == 0 { Matrix::zeros(m.nrows(), 1) } else { svd.u })
}

/// General HT decomposition: one SVD per non-root node.
pub fn htd_decompose(t: &DenseTensor, tree: &DimensionTree, tol: RankTolerance) -> Result<HTucker> {
    if t.order() != tree.order() {
        return Err(Error::Shape(format!("tensor order {} does not match tree order {}", t.order(), tree.order())));
    }
    let mut bases = Vec::with_capacity(tree.len());
    for (i, node) in tree.nodes.iter().enumerate() {
        bases.push(if i == 0 { Matrix::zeros(0, 0) } else { unfolding_basis(t, &node.modes, tol)? });
    }
    assemble(t, tree, bases)
}

pub fn htd_reconstruct(h: &HTucker) -> DenseTensor {
    let v = h.node_basis(0);
    DenseTensor::new(h.dims.clone(), v.as_slice().to_vec()).expect("HT dims are consistent")
}

/// `(U_k ⊗ xᵀU_{k−1} ⊗ ⋯ ⊗ xᵀU_1)` pushed through the transfer matrices.
pub fn htd_eval_hpds(h: &HTucker, x: &Vector) -> Result<Vector> {
    let n = h
        .cubical_dim()
        .ok_or_else(|| Error::Shape(format!("HT with dims {:?} is not cubical", h.dims)))?;
    if x.len() != n {
        return Err(Error::Shape(format!("state has length {} but HT dimension is {n}", x.len())));
    }
    let xm = Matrix::from_column_slice(n, 1, x.as_slice());
    let out = htd_contract(h, &vec![xm; h.order() - 1])?;
    Ok(out.column(0).into_owned())
}

/// Substitute leaf `p < k` by `args[p]ᵀ U_p`, keep `U_k`, propagate to the
/// root and reshape the resulting `n_k · C` vector to `n_k × C`.
pub fn htd_contract(h: &HTucker, args: &[Matrix]) -> Result<Matrix> {
    let k = h.order();
    if args.len() != k - 1 {
        return Err(Error::Argument(format!("expected {} arguments, got {}", k - 1, args.len())));
    }
    if args.iter().filter(|a| a.ncols() > 1).count() > 1 {
        return Err(Error::Unsupported("at most one matrix argument is supported".into()));
    }
    let mut leaves = Vec::with_capacity(k);
    for (p, a) in args.iter().enumerate() {
        if a.nrows() != h.dims[p] {
            return Err(Error::Shape(format!(
                "argument {} has {} rows but mode size is {}",
                p + 1,
                a.nrows(),
                h.dims[p]
            )));
        }
        leaves.push(a.transpose() * h.leaf_factor(p + 1));
    }
    leaves.push(h.leaf_factor(k).clone());
    let v = h.propagate(0, &leaves);
    let c: usize = args.iter().map(|a| a.ncols()).product();
    let nk = h.dims[k - 1];
    if v.len() != nk * c {
        return Err(Error::Numeric(format!("contracted vector has length {}, expected {}", v.len(), nk * c)));
    }
    // Mode k is slowest in the propagated vector.
    Ok(Matrix::from_column_slice(c, nk, v.as_slice()).transpose())
}

/// `Σ_leaf n_p r_p + Σ_internal r_l r_r r_Q` (root included).
pub fn htd_param_count(h: &HTucker) -> usize {
    (0..h.tree.len()).map(|i| h.blocks[i].len()).sum()
}
