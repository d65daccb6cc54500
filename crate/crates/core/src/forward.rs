//! Global forward pursuit: per-block atom selection, stepwise-optimal
//! block ranking and the main loop placing a fixed global budget of
//! atoms across a partition.
//!
//! Two atom-selection criteria are supported. The plain criterion picks
//! the atom with the largest residual correlation `|<d_n, r>|`; the
//! optimized one divides that correlation by `sqrt(1 - s_n)`, where
//! `s_n` accumulates the squared projections of atom `n` onto the
//! block's selected span, which makes each selection stepwise optimal
//! for the block. Ranking across blocks uses `chi = |<wt, f>|`, the
//! exact reduction in residual norm a block would gain from committing
//! its candidate; a legacy ranking by raw correlation `|<d, r>|` is kept
//! as an option.
//!
//! All tie-breaks resolve to the lowest atom index and the lowest block
//! index, which keeps runs reproducible.

use crate::block::{dot, norm2, orthogonalize, AtomicDecomposition, BlockState, PendingAtom, PursuitParams};
use crate::dictionary::Dictionary;
use crate::error::{PursuitError, Result};
use crate::par;

/// Atom-selection criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Largest residual correlation.
    Omp,
    /// Correlation normalized against the selected span; stepwise
    /// optimal per block.
    Oomp,
}

/// Block-ranking rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ranking {
    /// `chi = |<wt, f>|`, the exact residual-norm reduction.
    Optimized,
    /// `chi = |<d, r>|`, the raw correlation used by the earlier
    /// block-wise strategies.
    Legacy,
}

#[derive(Debug, Clone, Copy)]
pub struct HbwConfig {
    pub criterion: Criterion,
    pub ranking: Ranking,
    pub params: PursuitParams,
}

impl Default for HbwConfig {
    fn default() -> Self {
        Self {
            criterion: Criterion::Oomp,
            ranking: Ranking::Optimized,
            params: PursuitParams::default(),
        }
    }
}

impl HbwConfig {
    pub fn with_criterion(criterion: Criterion) -> Self {
        Self {
            criterion,
            ..Self::default()
        }
    }
}

/// One committed upgrade of the global approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// 0-based block index that received the atom.
    pub block: usize,
    /// 1-based atom index committed to that block.
    pub atom: usize,
    /// Ranking score the block held when it was chosen.
    pub chi: f64,
}

/// Stop rule for approximating blocks in isolation.
#[derive(Debug, Clone, Copy)]
pub enum StopRule {
    /// Grow each block until its own signal-to-noise ratio (dB) reaches
    /// the target.
    TargetSnr(f64),
    /// Place exactly this many atoms per block (fewer if a block
    /// exhausts first).
    PerBlockAtoms(usize),
}

/// Decompositions and concatenated approximation of a whole partition.
#[derive(Debug, Clone)]
pub struct ApproxResult {
    pub decompositions: Vec<AtomicDecomposition>,
    pub approximation: Vec<f64>,
    pub atoms_placed: usize,
}

fn selection_scores(
    block: &BlockState,
    dict: &Dictionary,
    criterion: Criterion,
    params: &PursuitParams,
    extra_excluded: &[usize],
) -> Result<Option<usize>> {
    let p = dict.inner_products(&block.r)?;
    let m = p.len();
    let mut excluded = vec![false; m];
    for &g in &block.gamma {
        excluded[g - 1] = true;
    }
    for &g in extra_excluded {
        excluded[g - 1] = true;
    }
    let threshold = params.eps_select * block.f_norm;
    let mut best: Option<(usize, f64)> = None;
    let mut max_corr = 0.0f64;
    for (n, &pn) in p.iter().enumerate() {
        if excluded[n] {
            continue;
        }
        let corr = pn.abs();
        let score = match criterion {
            Criterion::Omp => corr,
            Criterion::Oomp => {
                let den = 1.0 - block.s[n];
                if den <= params.eps_den {
                    // numerically inside the selected span already
                    continue;
                }
                corr / den.sqrt()
            }
        };
        if corr > max_corr {
            max_corr = corr;
        }
        match best {
            Some((_, s)) if score <= s => {}
            _ => best = Some((n, score)),
        }
    }
    if max_corr <= threshold {
        return Ok(None);
    }
    Ok(best.map(|(n, _)| n + 1))
}

/// Index of the unselected atom with the largest residual correlation.
pub fn select_atom_omp(
    block: &BlockState,
    dict: &Dictionary,
    params: &PursuitParams,
) -> Result<usize> {
    selection_scores(block, dict, Criterion::Omp, params, &[])?
        .ok_or(PursuitError::BlockExhausted)
}

/// Index of the unselected atom with the largest span-normalized
/// correlation `|<d_n, r>| / sqrt(1 - s_n)`.
pub fn select_atom_oomp(
    block: &BlockState,
    dict: &Dictionary,
    params: &PursuitParams,
) -> Result<usize> {
    selection_scores(block, dict, Criterion::Oomp, params, &[])?
        .ok_or(PursuitError::BlockExhausted)
}

/// Folds the squared inner products of `wt` with every atom into the
/// block's accumulator.
pub fn update_accumulator(block: &mut BlockState, wt: &[f64], dict: &Dictionary) -> Result<()> {
    let p = dict.inner_products(wt)?;
    for (s, pn) in block.s.iter_mut().zip(p) {
        *s += pn * pn;
    }
    Ok(())
}

/// Ranking score of a block's pending atom under the given rule. The two
/// algebraic forms of the optimized score, `|<wt, f>|` and
/// `|<d, r>| / ||w||`, agree up to floating-point noise.
pub fn rank_block(block: &BlockState, dict: &Dictionary, ranking: Ranking) -> Result<f64> {
    let pending = block
        .pending
        .as_ref()
        .ok_or(PursuitError::BlockExhausted)?;
    Ok(match ranking {
        Ranking::Optimized => dot(&pending.wt, &block.f).abs(),
        Ranking::Legacy => {
            let d = dict.atom(pending.atom)?;
            dot(&d, &block.r).abs()
        }
    })
}

/// Selects and orthogonalizes the block's next candidate atom, leaving it
/// in `block.pending`; marks the block exhausted when no candidate can
/// still reduce its residual. Atoms whose orthogonalized remainder is
/// numerically zero are skipped and never selected.
pub(crate) fn prepare_pending(
    block: &mut BlockState,
    dict: &Dictionary,
    cfg: &HbwConfig,
) -> Result<()> {
    block.pending = None;
    let mut skipped: Vec<usize> = Vec::new();
    loop {
        let n = match selection_scores(block, dict, cfg.criterion, &cfg.params, &skipped)? {
            Some(n) => n,
            None => {
                block.exhausted = true;
                return Ok(());
            }
        };
        let d = dict.atom(n)?;
        let (wt, w_norm) = orthogonalize(&d, &block.wt, cfg.params.reorth_passes);
        if w_norm < cfg.params.eps_span * norm2(&d).sqrt() {
            skipped.push(n);
            continue;
        }
        let chi = match cfg.ranking {
            Ranking::Optimized => dot(&wt, &block.f).abs(),
            Ranking::Legacy => dot(&d, &block.r).abs(),
        };
        block.pending = Some(PendingAtom {
            atom: n,
            chi,
            wt,
            w_norm,
        });
        return Ok(());
    }
}

/// Commits the block's pending atom: extends the orthonormal and
/// biorthogonal sets, updates the residual and, under the optimized
/// criterion, the accumulator.
pub(crate) fn commit_pending(
    block: &mut BlockState,
    dict: &Dictionary,
    cfg: &HbwConfig,
) -> Result<StepInfo> {
    let pending = block.pending.take().ok_or(PursuitError::BlockExhausted)?;
    let d = dict.atom(pending.atom)?;
    block.push_orthonormal(pending.wt, pending.w_norm);
    block.extend_biorthogonal(&d)?;
    block.update_residual();
    block.gamma.push(pending.atom);
    if cfg.criterion == Criterion::Oomp {
        let wt = block.wt.last().expect("just pushed").clone();
        update_accumulator(block, &wt, dict)?;
    }
    Ok(StepInfo {
        block: block.q,
        atom: pending.atom,
        chi: pending.chi,
    })
}

/// Global pursuit state over a partition: one [`BlockState`] per block
/// plus the shared dictionary and configuration.
#[derive(Debug, Clone)]
pub struct HbwState<'d> {
    dict: &'d Dictionary,
    cfg: HbwConfig,
    blocks: Vec<BlockState>,
    placed: usize,
}

impl<'d> HbwState<'d> {
    /// Builds the state and runs the initialization pass that selects
    /// every block's first candidate atom. The pass is independent per
    /// block and runs in parallel when the `parallel` feature is on.
    pub fn new(partition: Vec<Vec<f64>>, dict: &'d Dictionary, cfg: HbwConfig) -> Result<Self> {
        let nb = dict.block_size();
        for (q, f) in partition.iter().enumerate() {
            if f.len() != nb {
                return Err(PursuitError::LengthMismatch {
                    expected: nb,
                    got: partition[q].len(),
                });
            }
        }
        let mut blocks: Vec<BlockState> = partition
            .into_iter()
            .enumerate()
            .map(|(q, f)| BlockState::new(q, f, dict.atom_count()))
            .collect();
        par::try_for_each_mut(&mut blocks, |b| prepare_pending(b, dict, &cfg))?;
        Ok(Self {
            dict,
            cfg,
            blocks,
            placed: 0,
        })
    }

    pub(crate) fn from_parts(
        dict: &'d Dictionary,
        cfg: HbwConfig,
        blocks: Vec<BlockState>,
        placed: usize,
    ) -> Self {
        Self {
            dict,
            cfg,
            blocks,
            placed,
        }
    }

    pub fn dictionary(&self) -> &Dictionary {
        self.dict
    }

    pub fn config(&self) -> &HbwConfig {
        &self.cfg
    }

    pub fn blocks(&self) -> &[BlockState] {
        &self.blocks
    }

    pub(crate) fn blocks_mut(&mut self) -> &mut [BlockState] {
        &mut self.blocks
    }

    pub fn atoms_placed(&self) -> usize {
        self.placed
    }

    pub fn total_residual_sq(&self) -> f64 {
        self.blocks.iter().map(|b| b.residual_sq()).sum()
    }

    /// Commits one atom to the best-ranked block and refreshes that
    /// block's candidate. Returns `None` once every block is exhausted.
    pub fn step(&mut self) -> Result<Option<StepInfo>> {
        let mut best: Option<(usize, f64)> = None;
        for (q, block) in self.blocks.iter().enumerate() {
            let Some(pending) = block.pending.as_ref() else {
                continue;
            };
            match best {
                Some((_, chi)) if pending.chi <= chi => {}
                _ => best = Some((q, pending.chi)),
            }
        }
        let Some((q, _)) = best else {
            return Ok(None);
        };
        let info = commit_pending(&mut self.blocks[q], self.dict, &self.cfg)?;
        prepare_pending(&mut self.blocks[q], self.dict, &self.cfg)?;
        self.placed += 1;
        Ok(Some(info))
    }

    /// Runs `budget` steps, returning the full step trace.
    pub fn run(&mut self, budget: usize) -> Result<Vec<StepInfo>> {
        let mut trace = Vec::with_capacity(budget);
        for _ in 0..budget {
            match self.step()? {
                Some(info) => trace.push(info),
                None => {
                    return Err(PursuitError::BudgetInfeasible {
                        placed: self.placed,
                        budget: self.placed + budget - trace.len(),
                    })
                }
            }
        }
        Ok(trace)
    }

    /// Extracts coefficients and the concatenated approximation.
    pub fn finish(&self) -> ApproxResult {
        let decompositions: Vec<AtomicDecomposition> =
            self.blocks.iter().map(|b| b.coefficients()).collect();
        let mut approximation = Vec::with_capacity(self.blocks.len() * self.dict.block_size());
        for b in &self.blocks {
            approximation.extend(b.approximation());
        }
        ApproxResult {
            decompositions,
            approximation,
            atoms_placed: self.placed,
        }
    }
}

/// Approximates a partition under a global budget of `budget` atoms,
/// committing one atom per iteration to the block whose candidate yields
/// the largest residual reduction.
pub fn hbw_approximate(
    partition: Vec<Vec<f64>>,
    dict: &Dictionary,
    budget: usize,
    cfg: HbwConfig,
) -> Result<ApproxResult> {
    let mut state = HbwState::new(partition, dict, cfg)?;
    state.run(budget)?;
    Ok(state.finish())
}

/// Approximates every block in isolation until `stop` holds for it,
/// returning the full per-block state. Blocks are independent and run in
/// parallel when the `parallel` feature is on.
pub fn block_independent<'d>(
    partition: Vec<Vec<f64>>,
    dict: &'d Dictionary,
    cfg: HbwConfig,
    stop: StopRule,
) -> Result<HbwState<'d>> {
    let nb = dict.block_size();
    for f in &partition {
        if f.len() != nb {
            return Err(PursuitError::LengthMismatch {
                expected: nb,
                got: f.len(),
            });
        }
    }
    let mut blocks: Vec<BlockState> = partition
        .into_iter()
        .enumerate()
        .map(|(q, f)| BlockState::new(q, f, dict.atom_count()))
        .collect();
    par::try_for_each_mut(&mut blocks, |block| {
        prepare_pending(block, dict, &cfg)?;
        match stop {
            StopRule::PerBlockAtoms(k) => {
                for _ in 0..k {
                    if block.pending.is_none() {
                        break;
                    }
                    commit_pending(block, dict, &cfg)?;
                    prepare_pending(block, dict, &cfg)?;
                }
            }
            StopRule::TargetSnr(db) => {
                let target = norm2(&block.f) * 10f64.powf(-db / 10.0);
                while block.residual_sq() > target && block.pending.is_some() {
                    commit_pending(block, dict, &cfg)?;
                    prepare_pending(block, dict, &cfg)?;
                }
            }
        }
        Ok(())
    })?;
    let placed = blocks.iter().map(|b| b.selected_count()).sum();
    Ok(HbwState::from_parts(dict, cfg, blocks, placed))
}

/// Convenience wrapper around [`block_independent`] returning only the
/// decompositions and approximation; the reported atom total is the
/// natural budget for a subsequent global run.
pub fn block_independent_approximate(
    partition: Vec<Vec<f64>>,
    dict: &Dictionary,
    criterion: Criterion,
    stop: StopRule,
) -> Result<ApproxResult> {
    let cfg = HbwConfig::with_criterion(criterion);
    Ok(block_independent(partition, dict, cfg, stop)?.finish())
}
