use super::{equivalence_witness, ExactRoot, IntegerValuedPolynomial, PolyError};
use crate::rational::to_i64;
use num_traits::Signed;
use std::ops::Range;

/// Structural data of an eventually increasing family `q_0 < q_1 < … < q_{l-1}`.
///
/// Indices are zero-based. `r_indices` and `degree_blocks` are boundary lists:
/// group `s` is `r_indices[s]..r_indices[s + 1]`, block `k` is
/// `degree_blocks[k]..degree_blocks[k + 1]`.
#[derive(Clone, Debug)]
pub struct FamilyStructure {
    polys: Vec<IntegerValuedPolynomial>,
    r_indices: Vec<usize>,
    d_hat: Vec<i64>,
    offsets: Vec<i64>,
    group_of: Vec<usize>,
    degree_blocks: Vec<usize>,
    block_degrees: Vec<usize>,
    ratios: Vec<Vec<Option<ExactRoot>>>,
    classes: Vec<Vec<usize>>,
    class_of: Vec<usize>,
}

pub fn analyze_family(polys: &[IntegerValuedPolynomial]) -> Result<FamilyStructure, PolyError> {
    if polys.is_empty() {
        return Err(PolyError::EmptyFamily);
    }
    let ell = polys.len();
    let mut r_indices = vec![0];
    for i in 0..ell - 1 {
        let d = polys[i + 1].poly() - polys[i].poly();
        if d.is_zero() {
            return Err(PolyError::DuplicatePolynomial { index: i });
        }
        if !d.leading().is_positive() {
            return Err(PolyError::NotEventuallyOrdered { index: i });
        }
        if !d.is_constant() {
            r_indices.push(i + 1);
        }
    }
    r_indices.push(ell);

    let mut offsets = vec![0i64; ell];
    let mut group_of = vec![0usize; ell];
    for s in 0..r_indices.len() - 1 {
        let head = &polys[r_indices[s]];
        for i in r_indices[s]..r_indices[s + 1] {
            let diff = polys[i]
                .constant_difference(head)
                .expect("constant within a group");
            offsets[i] = to_i64(&diff).expect("integer-valued polynomials differ by integers");
            group_of[i] = s;
        }
    }
    let mut d_hat: Vec<i64> = offsets.clone();
    d_hat.sort_unstable();
    d_hat.dedup();

    let mut degree_blocks = vec![0];
    let mut block_degrees = vec![polys[0].degree()];
    for i in 1..ell {
        if polys[i].degree() != polys[i - 1].degree() {
            degree_blocks.push(i);
            block_degrees.push(polys[i].degree());
        }
    }
    degree_blocks.push(ell);

    let mut ratios = vec![vec![None; ell]; ell];
    for k in 0..block_degrees.len() {
        let range = degree_blocks[k]..degree_blocks[k + 1];
        for i in range.clone() {
            for j in range.clone() {
                ratios[i][j] = Some(ExactRoot::new(
                    polys[j].leading() / polys[i].leading(),
                    block_degrees[k] as u32,
                ));
            }
        }
    }

    let mut parent: Vec<usize> = (0..ell).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = i;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }
    for k in 0..block_degrees.len() {
        for i in degree_blocks[k]..degree_blocks[k + 1] {
            for j in i + 1..degree_blocks[k + 1] {
                if find(&mut parent, i) != find(&mut parent, j)
                    && equivalence_witness(&polys[i], &polys[j]).is_some()
                {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut class_of = vec![0usize; ell];
    let mut root_class = vec![usize::MAX; ell];
    for i in 0..ell {
        let r = find(&mut parent, i);
        if root_class[r] == usize::MAX {
            root_class[r] = classes.len();
            classes.push(Vec::new());
        }
        class_of[i] = root_class[r];
        classes[root_class[r]].push(i);
    }

    Ok(FamilyStructure {
        polys: polys.to_vec(),
        r_indices,
        d_hat,
        offsets,
        group_of,
        degree_blocks,
        block_degrees,
        ratios,
        classes,
        class_of,
    })
}

/// `c_{i,j} = (a_j / a_i)^(1/m)` for indices in one degree block.
pub fn leading_ratio(family: &FamilyStructure, i: usize, j: usize) -> Result<ExactRoot, PolyError> {
    family.ratio(i, j).cloned()
}

impl FamilyStructure {
    pub fn polys(&self) -> &[IntegerValuedPolynomial] {
        &self.polys
    }

    pub fn ell(&self) -> usize {
        self.polys.len()
    }

    pub fn ell_hat(&self) -> usize {
        self.r_indices.len() - 1
    }

    pub fn r_indices(&self) -> &[usize] {
        &self.r_indices
    }

    /// Sorted constant differences; always contains 0.
    pub fn d_hat(&self) -> &[i64] {
        &self.d_hat
    }

    /// `q_i - q_{head of its group}`.
    pub fn offset_of(&self, i: usize) -> i64 {
        self.offsets[i]
    }

    pub fn group_of(&self, i: usize) -> usize {
        self.group_of[i]
    }

    pub fn group_range(&self, s: usize) -> Range<usize> {
        self.r_indices[s]..self.r_indices[s + 1]
    }

    pub fn degree_blocks(&self) -> &[usize] {
        &self.degree_blocks
    }

    pub fn block_degrees(&self) -> &[usize] {
        &self.block_degrees
    }

    pub fn block_count(&self) -> usize {
        self.block_degrees.len()
    }

    pub fn block_range(&self, k: usize) -> Range<usize> {
        self.degree_blocks[k]..self.degree_blocks[k + 1]
    }

    pub fn block_of(&self, i: usize) -> usize {
        self.degree_blocks.partition_point(|&b| b <= i) - 1
    }

    /// First index of the degree block containing `i`.
    pub fn block_head(&self, i: usize) -> usize {
        self.degree_blocks[self.block_of(i)]
    }

    pub fn ratio(&self, i: usize, j: usize) -> Result<&ExactRoot, PolyError> {
        let max = i.max(j);
        if max >= self.ell() {
            return Err(PolyError::IndexOutOfRange(max));
        }
        self.ratios[i][j]
            .as_ref()
            .ok_or(PolyError::DegreeMismatch { i, j })
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn class_of(&self, i: usize) -> usize {
        self.class_of[i]
    }

    /// One representative per constant-difference group: `p_s = q_{r_s}`.
    pub fn reduced_family(&self) -> Vec<IntegerValuedPolynomial> {
        self.r_indices[..self.ell_hat()]
            .iter()
            .map(|&r| self.polys[r].clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::validate_polynomial;
    use crate::rational::int;

    fn fam(polys: &[&[i64]]) -> Result<FamilyStructure, PolyError> {
        let ps: Vec<_> = polys
            .iter()
            .map(|c| validate_polynomial(&c.iter().map(|&v| int(v)).collect::<Vec<_>>()).unwrap())
            .collect();
        analyze_family(&ps)
    }

    #[test]
    fn constant_difference_groups() {
        let f = fam(&[&[0, 1], &[2, 1], &[0, 0, 1]]).unwrap();
        assert_eq!(f.ell_hat(), 2);
        assert_eq!(f.r_indices(), &[0, 2, 3]);
        assert_eq!(f.d_hat(), &[0, 2]);
        assert_eq!(f.degree_blocks(), &[0, 2, 3]);
        assert_eq!(f.reduced_family().len(), 2);
    }

    #[test]
    fn introduction_family() {
        let f = fam(&[
            &[0, 1],
            &[0, 2],
            &[0, 3, 0, 0, 1],
            &[0, 0, 2, 0, 1],
            &[0, 0, 0, 1, 1],
        ])
        .unwrap();
        assert_eq!(f.ell_hat(), 5);
        assert_eq!(f.d_hat(), &[0]);
        assert_eq!(f.block_degrees(), &[1, 4]);
        assert_eq!(f.degree_blocks(), &[0, 2, 5]);
        // Linear members are always equivalent; the quartics are not.
        assert_eq!(f.classes(), &[vec![0, 1], vec![2], vec![3], vec![4]]);
    }

    #[test]
    fn single_polynomial() {
        let f = fam(&[&[0, 1]]).unwrap();
        assert_eq!((f.ell_hat(), f.d_hat().to_vec(), f.block_count()), (1, vec![0], 1));
    }

    #[test]
    fn ordering_errors() {
        assert_eq!(
            fam(&[&[0, 0, 1], &[0, 1]]).unwrap_err(),
            PolyError::NotEventuallyOrdered { index: 0 }
        );
        assert_eq!(
            fam(&[&[0, 1], &[0, 1]]).unwrap_err(),
            PolyError::DuplicatePolynomial { index: 0 }
        );
        assert_eq!(
            fam(&[&[3, 1], &[1, 1]]).unwrap_err(),
            PolyError::NotEventuallyOrdered { index: 0 }
        );
    }

    #[test]
    fn ratios_within_blocks() {
        let f = fam(&[&[0, 0, 1], &[1, -4, 4], &[0, 0, 0, 1]]).unwrap();
        assert_eq!(f.ratio(0, 1).unwrap().rational(), Some(&int(2)));
        assert!(matches!(f.ratio(0, 2), Err(PolyError::DegreeMismatch { .. })));
        let g = fam(&[&[0, 0, 1], &[0, 0, 2]]).unwrap();
        assert!(!leading_ratio(&g, 0, 1).unwrap().is_rational());
        let h = fam(&[&[1, 3], &[0, 6]]).unwrap();
        assert_eq!(leading_ratio(&h, 0, 1).unwrap().rational(), Some(&int(2)));
    }
}
