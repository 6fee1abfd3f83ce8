//! Control-flow graph utilities: dominators, post-dominators and control
//! dependence over block indices.

use std::collections::{BTreeSet, HashMap};

use super::ir::{BlockId, MethodDecl};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfg {
    pub succs: Vec<Vec<usize>>,
    pub preds: Vec<Vec<usize>>,
}

impl Cfg {
    /// Builds the CFG of `method` indexed by position in `method.blocks`.
    /// Block 0 is the entry.
    pub fn of_method(method: &MethodDecl) -> Result<Cfg, String> {
        let index: HashMap<BlockId, usize> = method
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id, i))
            .collect();
        if index.len() != method.blocks.len() {
            return Err("duplicate block id".into());
        }
        let mut succs = Vec::with_capacity(method.blocks.len());
        for block in &method.blocks {
            let mut out = Vec::new();
            for target in block.successors() {
                let Some(&t) = index.get(&target) else {
                    return Err(format!("block {} targets unknown block {}", block.id, target));
                };
                if !out.contains(&t) {
                    out.push(t);
                }
            }
            succs.push(out);
        }
        Ok(Cfg::from_succs(succs))
    }

    pub fn from_succs(succs: Vec<Vec<usize>>) -> Cfg {
        let mut preds = vec![Vec::new(); succs.len()];
        for (a, out) in succs.iter().enumerate() {
            for &b in out {
                preds[b].push(a);
            }
        }
        Cfg { succs, preds }
    }

    pub fn len(&self) -> usize {
        self.succs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succs.is_empty()
    }

    pub fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        if start >= self.len() {
            return seen;
        }
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(n) = stack.pop() {
            for &s in &self.succs[n] {
                if !seen[s] {
                    seen[s] = true;
                    stack.push(s);
                }
            }
        }
        seen
    }
}

fn reverse_postorder(succs: &[Vec<usize>], entry: usize) -> Vec<usize> {
    let mut order = Vec::new();
    let mut seen = vec![false; succs.len()];
    let mut stack = vec![(entry, 0usize)];
    seen[entry] = true;
    while let Some((node, next)) = stack.pop() {
        if next < succs[node].len() {
            stack.push((node, next + 1));
            let s = succs[node][next];
            if !seen[s] {
                seen[s] = true;
                stack.push((s, 0));
            }
        } else {
            order.push(node);
        }
    }
    order.reverse();
    order
}

/// Immediate dominators (Cooper, Harvey, Kennedy). `idom[entry] = Some(entry)`;
/// unreachable nodes map to `None`.
pub fn dominators(succs: &[Vec<usize>], entry: usize) -> Vec<Option<usize>> {
    let n = succs.len();
    let mut idom = vec![None; n];
    if entry >= n {
        return idom;
    }
    let rpo = reverse_postorder(succs, entry);
    let mut rank = vec![usize::MAX; n];
    for (i, &b) in rpo.iter().enumerate() {
        rank[b] = i;
    }
    let mut preds = vec![Vec::new(); n];
    for (a, out) in succs.iter().enumerate() {
        for &b in out {
            preds[b].push(a);
        }
    }
    idom[entry] = Some(entry);
    let mut changed = true;
    while changed {
        changed = false;
        for &b in rpo.iter().skip(1) {
            let mut new_idom: Option<usize> = None;
            for &p in &preds[b] {
                if idom[p].is_none() {
                    continue;
                }
                new_idom = Some(match new_idom {
                    None => p,
                    Some(cur) => intersect(&idom, &rank, p, cur),
                });
            }
            if new_idom.is_some() && idom[b] != new_idom {
                idom[b] = new_idom;
                changed = true;
            }
        }
    }
    idom
}

fn intersect(idom: &[Option<usize>], rank: &[usize], mut a: usize, mut b: usize) -> usize {
    while a != b {
        while rank[a] > rank[b] {
            a = idom[a].expect("processed node has idom");
        }
        while rank[b] > rank[a] {
            b = idom[b].expect("processed node has idom");
        }
    }
    a
}

/// Whether `a` dominates `b` under the tree `idom` (reflexive).
pub fn dominates(idom: &[Option<usize>], a: usize, b: usize) -> bool {
    let mut cur = b;
    loop {
        if cur == a {
            return true;
        }
        match idom[cur] {
            Some(p) if p != cur => cur = p,
            _ => return false,
        }
    }
}

/// Post-dominator tree with a virtual exit node at index `cfg.len()`.
///
/// Blocks without successors flow to the exit. Blocks that cannot reach any
/// exit (possible only in hand-written IR with loops) are also linked to it so
/// that every node has a post-dominator.
#[derive(Debug, Clone)]
pub struct PostDominators {
    pub ipdom: Vec<Option<usize>>,
    pub exit: usize,
    /// Successor lists including edges into the virtual exit.
    pub succs: Vec<Vec<usize>>,
}

impl PostDominators {
    pub fn compute(cfg: &Cfg) -> PostDominators {
        let n = cfg.len();
        let exit = n;
        let mut succs: Vec<Vec<usize>> = cfg.succs.clone();
        succs.push(Vec::new());
        for out in succs.iter_mut().take(n) {
            if out.is_empty() {
                out.push(exit);
            }
        }
        loop {
            let mut rev = vec![Vec::new(); n + 1];
            for (a, out) in succs.iter().enumerate() {
                for &b in out {
                    rev[b].push(a);
                }
            }
            let reaches = Cfg::from_succs(rev.clone()).reachable_from(exit);
            // link the last stuck node and retry until every node reaches the exit
            match (0..n).rev().find(|&i| !reaches[i]) {
                Some(stuck) => succs[stuck].push(exit),
                None => {
                    let ipdom = dominators(&rev, exit);
                    return PostDominators { ipdom, exit, succs };
                }
            }
        }
    }

    pub fn post_dominates(&self, a: usize, b: usize) -> bool {
        dominates(&self.ipdom, a, b)
    }

    /// Immediate post-dominator of `b` (the exit maps to itself).
    pub fn ipdom(&self, b: usize) -> usize {
        self.ipdom[b].unwrap_or(self.exit)
    }

    /// Pairs `(branch_block, dependent_block)`: the dependent block executes
    /// only for some outcomes of the branch ending `branch_block`.
    pub fn control_dependence(&self) -> BTreeSet<(usize, usize)> {
        let mut deps = BTreeSet::new();
        for (a, out) in self.succs.iter().enumerate() {
            if out.len() < 2 {
                continue;
            }
            let stop = self.ipdom(a);
            for &b in out {
                let mut runner = b;
                while runner != stop && runner != self.exit {
                    deps.insert((a, runner));
                    runner = self.ipdom(runner);
                }
            }
        }
        deps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond() -> Cfg {
        // 0 -> 1, 0 -> 2, 1 -> 3, 2 -> 3
        Cfg::from_succs(vec![vec![1, 2], vec![3], vec![3], vec![]])
    }

    #[test]
    fn diamond_dominators() {
        let cfg = diamond();
        let idom = dominators(&cfg.succs, 0);
        assert_eq!(idom, vec![Some(0), Some(0), Some(0), Some(0)]);
        assert!(dominates(&idom, 0, 3));
        assert!(!dominates(&idom, 1, 3));
    }

    #[test]
    fn diamond_control_dependence() {
        let pd = PostDominators::compute(&diamond());
        assert_eq!(pd.ipdom(0), 3);
        let deps: Vec<_> = pd.control_dependence().into_iter().collect();
        assert_eq!(deps, vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn if_without_else() {
        // 0 -> 1 (then), 0 -> 2 (join), 1 -> 2
        let pd = PostDominators::compute(&Cfg::from_succs(vec![vec![1, 2], vec![2], vec![]]));
        let deps: Vec<_> = pd.control_dependence().into_iter().collect();
        assert_eq!(deps, vec![(0, 1)]);
    }

    #[test]
    fn early_return_makes_rest_dependent() {
        // 0 -> 1 (return), 0 -> 2 -> 3
        let pd =
            PostDominators::compute(&Cfg::from_succs(vec![vec![1, 2], vec![], vec![3], vec![]]));
        assert_eq!(pd.ipdom(0), pd.exit);
        let deps: Vec<_> = pd.control_dependence().into_iter().collect();
        assert_eq!(deps, vec![(0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn stuck_loop_gets_exit() {
        // 0 -> 1, 1 -> 1 (self loop with no exit)
        let pd = PostDominators::compute(&Cfg::from_succs(vec![vec![1], vec![1]]));
        assert!(pd.ipdom.iter().all(Option::is_some));
    }
}
