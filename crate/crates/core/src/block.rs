//! Per-block approximation state: residual, orthonormal set with
//! re-orthogonalization, biorthogonal set and coefficient extraction.
//!
//! A [`BlockState`] is owned by exactly one worker at a time; distinct
//! blocks carry no shared mutable state and can be processed in parallel.

use crate::dictionary::Dictionary;
use crate::error::{PursuitError, Result};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Numeric knobs of the pursuit recursions.
#[derive(Debug, Clone, Copy)]
pub struct PursuitParams {
    /// Gram-Schmidt re-orthogonalization passes after the initial sweep.
    pub reorth_passes: usize,
    /// An atom whose orthogonalized remainder has norm below
    /// `eps_span * ||d||` counts as lying in the selected span.
    pub eps_span: f64,
    /// A block is exhausted once every candidate correlation magnitude
    /// falls to `eps_select * ||f||` or below.
    pub eps_select: f64,
    /// Guard on the optimized-selection denominator `1 - s_n`.
    pub eps_den: f64,
}

impl Default for PursuitParams {
    fn default() -> Self {
        Self {
            reorth_passes: 1,
            eps_span: 1e-10,
            eps_select: 1e-12,
            eps_den: 1e-10,
        }
    }
}

/// Orthogonalizes `d` against an orthonormal basis, applying
/// `reorth_passes` extra sweeps, and returns the normalized remainder
/// together with its pre-normalization norm.
pub(crate) fn orthogonalize(
    d: &[f64],
    basis: &[Vec<f64>],
    reorth_passes: usize,
) -> (Vec<f64>, f64) {
    let mut w = d.to_vec();
    for _ in 0..=reorth_passes {
        for wt in basis {
            let proj = dot(wt, &w);
            for (wi, &ti) in w.iter_mut().zip(wt.iter()) {
                *wi -= proj * ti;
            }
        }
    }
    let norm = norm2(&w).sqrt();
    if norm > 0.0 {
        for wi in w.iter_mut() {
            *wi /= norm;
        }
    }
    (w, norm)
}

/// Candidate atom of a block, selected but not yet committed. Its
/// orthogonalized direction is kept so that committing it costs nothing
/// extra.
#[derive(Debug, Clone)]
pub struct PendingAtom {
    /// 1-based dictionary index.
    pub atom: usize,
    /// Ranking score of the block if this atom were committed.
    pub chi: f64,
    pub(crate) wt: Vec<f64>,
    pub(crate) w_norm: f64,
}

/// Atom indices and coefficients of one block's approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicDecomposition {
    /// 0-based block index within the partition.
    pub block: usize,
    /// `(atom index (1-based), coefficient)` pairs in selection order.
    pub entries: Vec<(usize, f64)>,
}

impl AtomicDecomposition {
    pub fn atom_count(&self) -> usize {
        self.entries.len()
    }

    /// Sums `coefficient * atom` over the entries.
    pub fn reconstruct(&self, dict: &Dictionary) -> Result<Vec<f64>> {
        let mut out = vec![0.0; dict.block_size()];
        for &(n, c) in &self.entries {
            let a = dict.atom(n)?;
            for (o, &ai) in out.iter_mut().zip(a.iter()) {
                *o += c * ai;
            }
        }
        Ok(out)
    }
}

/// Pursuit state of a single block.
#[derive(Debug, Clone)]
pub struct BlockState {
    pub(crate) q: usize,
    pub(crate) f: Vec<f64>,
    pub(crate) f_norm: f64,
    pub(crate) r: Vec<f64>,
    /// Selected atom indices (1-based), in selection order.
    pub(crate) gamma: Vec<usize>,
    /// Orthonormal set spanning the selected atoms.
    pub(crate) wt: Vec<Vec<f64>>,
    /// Norms of the raw orthogonalized vectors, one per selected atom.
    pub(crate) w_norms: Vec<f64>,
    /// Biorthogonal set dual to the selected atoms.
    pub(crate) b: Vec<Vec<f64>>,
    /// Accumulated squared projections of every atom onto the selected
    /// span; drives the optimized selection criterion.
    pub(crate) s: Vec<f64>,
    pub(crate) pending: Option<PendingAtom>,
    pub(crate) exhausted: bool,
}

impl BlockState {
    pub fn new(q: usize, f: Vec<f64>, atom_count: usize) -> Self {
        let f_norm = norm2(&f).sqrt();
        let r = f.clone();
        Self {
            q,
            f,
            f_norm,
            r,
            gamma: Vec::new(),
            wt: Vec::new(),
            w_norms: Vec::new(),
            b: Vec::new(),
            s: vec![0.0; atom_count],
            pending: None,
            exhausted: false,
        }
    }

    pub fn index(&self) -> usize {
        self.q
    }

    pub fn signal(&self) -> &[f64] {
        &self.f
    }

    pub fn signal_norm(&self) -> f64 {
        self.f_norm
    }

    pub fn residual(&self) -> &[f64] {
        &self.r
    }

    /// Selected atom indices (1-based) in selection order.
    pub fn selected(&self) -> &[usize] {
        &self.gamma
    }

    pub fn selected_count(&self) -> usize {
        self.gamma.len()
    }

    pub fn orthonormal_set(&self) -> &[Vec<f64>] {
        &self.wt
    }

    pub fn biorthogonal_set(&self) -> &[Vec<f64>] {
        &self.b
    }

    pub fn accumulator(&self) -> &[f64] {
        &self.s
    }

    pub fn pending(&self) -> Option<&PendingAtom> {
        self.pending.as_ref()
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    /// Appends the orthogonalized, re-orthogonalized and normalized
    /// remainder of `d` to the orthonormal set.
    ///
    /// Fails with [`PursuitError::DegenerateAtom`] when the remainder's
    /// norm falls below `eps_span * ||d||`; callers must not select such
    /// atoms.
    pub fn extend_orthonormal(&mut self, d: &[f64], params: &PursuitParams) -> Result<()> {
        let (wt, norm) = orthogonalize(d, &self.wt, params.reorth_passes);
        if norm < params.eps_span * norm2(d).sqrt() {
            return Err(PursuitError::DegenerateAtom);
        }
        self.push_orthonormal(wt, norm);
        Ok(())
    }

    pub(crate) fn push_orthonormal(&mut self, wt: Vec<f64>, norm: f64) {
        self.wt.push(wt);
        self.w_norms.push(norm);
    }

    /// Upgrades the biorthogonal set to include the atom `d` whose
    /// orthogonalization was appended last: the new dual vector is
    /// `w / ||w||^2` and every prior dual loses its component along it.
    pub fn extend_biorthogonal(&mut self, d: &[f64]) -> Result<()> {
        let wt = self.wt.last().ok_or(PursuitError::DegenerateAtom)?;
        let norm = *self.w_norms.last().expect("norm stored with wt");
        let b_new: Vec<f64> = wt.iter().map(|&x| x / norm).collect();
        for b_n in self.b.iter_mut() {
            let coef = dot(d, b_n);
            for (bi, &ni) in b_n.iter_mut().zip(b_new.iter()) {
                *bi -= coef * ni;
            }
        }
        self.b.push(b_new);
        Ok(())
    }

    /// Removes the newest orthonormal direction's contribution from the
    /// residual: `r <- r - wt <wt, f>`.
    pub fn update_residual(&mut self) {
        let wt = self.wt.last().expect("orthonormal set non-empty");
        let coef = dot(wt, &self.f);
        for (ri, &ti) in self.r.iter_mut().zip(wt.iter()) {
            *ri -= coef * ti;
        }
    }

    /// Expansion coefficients of the current approximation: inner
    /// products of the signal with the biorthogonal set.
    pub fn coefficients(&self) -> AtomicDecomposition {
        let entries = self
            .gamma
            .iter()
            .zip(self.b.iter())
            .map(|(&n, b_n)| (n, dot(b_n, &self.f)))
            .collect();
        AtomicDecomposition {
            block: self.q,
            entries,
        }
    }

    /// Current approximation of the block, `f - r`.
    pub fn approximation(&self) -> Vec<f64> {
        self.f.iter().zip(self.r.iter()).map(|(x, y)| x - y).collect()
    }

    pub fn residual_sq(&self) -> f64 {
        norm2(&self.r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{atom, DictKind, Dictionary, DictionarySpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dict(nb: usize, m: usize) -> Dictionary {
        Dictionary::new(DictionarySpec::new(DictKind::Cosine, nb, m).unwrap())
    }

    fn commit(block: &mut BlockState, d: &[f64], n: usize, params: &PursuitParams) {
        block.extend_orthonormal(d, params).unwrap();
        block.extend_biorthogonal(d).unwrap();
        block.update_residual();
        block.gamma.push(n);
    }

    #[test]
    fn first_orthonormal_vector_is_the_atom() {
        let dict = dict(8, 16);
        let d = dict.atom(3).unwrap();
        let mut block = BlockState::new(0, vec![1.0; 8], 16);
        block
            .extend_orthonormal(&d, &PursuitParams::default())
            .unwrap();
        for (x, y) in block.wt[0].iter().zip(&d) {
            assert!((x - y).abs() <= 1e-15);
        }
        assert!((block.w_norms[0] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn two_extensions_are_orthogonal() {
        let dict = dict(8, 16);
        let mut block = BlockState::new(0, vec![0.5; 8], 16);
        let params = PursuitParams::default();
        block
            .extend_orthonormal(&dict.atom(2).unwrap(), &params)
            .unwrap();
        block
            .extend_orthonormal(&dict.atom(5).unwrap(), &params)
            .unwrap();
        assert!(dot(&block.wt[0], &block.wt[1]).abs() <= 1e-10);
    }

    #[test]
    fn reselecting_an_atom_is_degenerate() {
        let dict = dict(8, 16);
        let d = dict.atom(4).unwrap();
        let mut block = BlockState::new(0, vec![0.5; 8], 16);
        let params = PursuitParams::default();
        block.extend_orthonormal(&d, &params).unwrap();
        assert!(matches!(
            block.extend_orthonormal(&d, &params),
            Err(PursuitError::DegenerateAtom)
        ));
    }

    #[test]
    fn single_unit_atom_is_its_own_dual() {
        let dict = dict(8, 16);
        let d = dict.atom(6).unwrap();
        let mut block = BlockState::new(0, d.clone(), 16);
        let params = PursuitParams::default();
        commit(&mut block, &d, 6, &params);
        for (x, y) in block.b[0].iter().zip(&d) {
            assert!((x - y).abs() <= 1e-12);
        }
        // exact one-term representation leaves no residual
        assert!(block.residual_sq().sqrt() <= 1e-10);
    }

    #[test]
    fn biorthogonality_matrix_is_identity() {
        let dict = dict(16, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut block = BlockState::new(0, f, 32);
        let params = PursuitParams::default();
        for n in [3usize, 11, 27] {
            commit(&mut block, &dict.atom(n).unwrap(), n, &params);
        }
        for (i, &n) in block.gamma.iter().enumerate() {
            let d = dict.atom(n).unwrap();
            for (j, b) in block.b.iter().enumerate() {
                let g = dot(&d, b);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - expect).abs() <= 1e-8, "pair ({i},{j}): {g}");
            }
        }
    }

    #[test]
    fn projector_representations_agree() {
        // the orthonormal and the biorthogonal expansions give the same
        // orthogonal projection
        let dict = dict(16, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut block = BlockState::new(0, f.clone(), 32);
        let params = PursuitParams::default();
        for n in [1usize, 8, 20, 31] {
            commit(&mut block, &dict.atom(n).unwrap(), n, &params);
        }
        let mut via_wt = vec![0.0; 16];
        for wt in &block.wt {
            let c = dot(wt, &f);
            for (o, &x) in via_wt.iter_mut().zip(wt.iter()) {
                *o += c * x;
            }
        }
        let via_b = block.coefficients().reconstruct(&dict).unwrap();
        for (x, y) in via_wt.iter().zip(&via_b) {
            assert!((x - y).abs() <= 1e-8);
        }
        // and both match f - r
        for (x, y) in via_wt.iter().zip(&block.approximation()) {
            assert!((x - y).abs() <= 1e-8);
        }
    }

    #[test]
    fn residual_energy_identity() {
        let dict = dict(16, 64);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut block = BlockState::new(0, f.clone(), 64);
        let params = PursuitParams::default();
        for n in [2usize, 40, 17] {
            let before = block.residual_sq();
            let d = dict.atom(n).unwrap();
            block.extend_orthonormal(&d, &params).unwrap();
            block.extend_biorthogonal(&d).unwrap();
            let coef = dot(block.wt.last().unwrap(), &f);
            block.update_residual();
            block.gamma.push(n);
            let after = block.residual_sq();
            assert!((after - (before - coef * coef)).abs() <= 1e-8);
        }
        // residual orthogonal to every selected atom
        for &n in &block.gamma {
            assert!(dot(&block.r, &dict.atom(n).unwrap()).abs() <= 1e-8);
        }
    }

    #[test]
    fn full_basis_annihilates_the_residual() {
        let nb = 8;
        let dict = dict(nb, nb);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let f: Vec<f64> = (0..nb).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut block = BlockState::new(0, f, nb);
        let params = PursuitParams::default();
        for n in 1..=nb {
            commit(&mut block, &dict.atom(n).unwrap(), n, &params);
        }
        assert!(block.residual_sq().sqrt() <= 1e-8);
    }

    #[test]
    fn scaled_atom_coefficient() {
        let dict = dict(8, 16);
        let d = dict.atom(9).unwrap();
        let f: Vec<f64> = d.iter().map(|&x| 3.0 * x).collect();
        let mut block = BlockState::new(0, f, 16);
        let params = PursuitParams::default();
        commit(&mut block, &d, 9, &params);
        let dec = block.coefficients();
        assert_eq!(dec.entries.len(), 1);
        assert_eq!(dec.entries[0].0, 9);
        assert!((dec.entries[0].1 - 3.0).abs() <= 1e-10);
    }

    #[test]
    fn empty_decomposition_reconstructs_zero() {
        let dict = dict(8, 16);
        let block = BlockState::new(0, vec![1.0; 8], 16);
        let dec = block.coefficients();
        assert!(dec.entries.is_empty());
        assert!(dec.reconstruct(&dict).unwrap().iter().all(|&x| x == 0.0));
    }
}
