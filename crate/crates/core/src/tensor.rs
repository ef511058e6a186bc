//! Dense fully symmetric tensors of small order.

use alloc::vec;
use alloc::vec::Vec;

/// A fully symmetric tensor of a given order over `dim` coordinates.
///
/// Entries are stored densely; construction evaluates each canonical
/// (sorted) multi-index once and copies it to every permutation, so the
/// stored tensor is exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor {
    dim: usize,
    order: usize,
    data: Vec<f64>,
}

impl SymTensor {
    pub fn zeros(dim: usize, order: usize) -> Self {
        Self {
            dim,
            order,
            data: vec![0.0; dim.pow(order as u32)],
        }
    }

    /// Builds the tensor from `f` evaluated on sorted multi-indices.
    pub fn from_canonical<F: FnMut(&[usize]) -> f64>(dim: usize, order: usize, mut f: F) -> Self {
        let mut t = Self::zeros(dim, order);
        let mut idx = vec![0usize; order];
        let mut sorted = vec![0usize; order];
        for flat in 0..t.data.len() {
            t.unflatten(flat, &mut idx);
            sorted.copy_from_slice(&idx);
            sorted.sort_unstable();
            if sorted == idx {
                t.data[flat] = f(&sorted);
            } else {
                t.data[flat] = t.data[t.flatten(&sorted)];
            }
        }
        t
    }

    /// Builds from arbitrary entries and averages over index permutations.
    pub fn symmetrized<F: FnMut(&[usize]) -> f64>(dim: usize, order: usize, mut f: F) -> Self {
        let mut raw = Self::zeros(dim, order);
        let mut idx = vec![0usize; order];
        for flat in 0..raw.data.len() {
            raw.unflatten(flat, &mut idx);
            raw.data[flat] = f(&idx);
        }
        Self::from_canonical(dim, order, |canon| {
            let perms = permutations(canon);
            let total: f64 = perms.iter().map(|p| raw.data[raw.flatten(p)]).sum();
            total / perms.len() as f64
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        debug_assert_eq!(idx.len(), self.order);
        self.data[self.flatten(idx)]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            order: self.order,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |a, &x| a.max(x.abs()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    fn unflatten(&self, mut flat: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = flat % self.dim;
            flat /= self.dim;
        }
    }
}

/// All orderings of `items` (with repeats when items repeat).
pub fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_construction_is_symmetric() {
        let t = SymTensor::from_canonical(3, 3, |i| (i[0] + 10 * i[1] + 100 * i[2]) as f64);
        assert_eq!(t.get(&[2, 0, 1]), t.get(&[0, 1, 2]));
        assert_eq!(t.get(&[1, 2, 0]), 210.0);
    }

    #[test]
    fn symmetrized_averages() {
        let t = SymTensor::symmetrized(2, 2, |i| if i == [0, 1] { 2.0 } else { 0.0 });
        assert_eq!(t.get(&[0, 1]), 1.0);
        assert_eq!(t.get(&[1, 0]), 1.0);
    }

    #[test]
    fn permutation_count() {
        assert_eq!(permutations(&[0, 1, 2, 3]).len(), 24);
        assert_eq!(permutations(&[0, 1, 2, 3, 4, 5]).len(), 720);
    }
}
