//! Token sampling for masked language modeling, with and without temporal
//! priority.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{ceil_count, dtp_label, rng_from_seed, LabelSpace, ObjectiveError, IGNORE};
use crate::corpus::{Document, TokenizedDoc, Vocab, CLS, MASK, NUM_SPECIALS, SEP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskAction {
    Mask,
    Random,
    Keep,
}

/// Which document tokens are corrupted, and how. Positions index the
/// document tokens, not the final sequence.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MaskPlan {
    pub sampled_expressions: Vec<usize>,
    pub masked_positions: Vec<usize>,
    pub actions: Vec<MaskAction>,
}

impl MaskPlan {
    pub fn len(&self) -> usize {
        self.masked_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masked_positions.is_empty()
    }
}

fn draw_action<R: Rng>(rng: &mut R) -> MaskAction {
    let u: f64 = rng.random();
    if u < 0.8 {
        MaskAction::Mask
    } else if u < 0.9 {
        MaskAction::Random
    } else {
        MaskAction::Keep
    }
}

fn finish_plan<R: Rng>(
    mut positions: Vec<usize>,
    sampled_expressions: Vec<usize>,
    rng: &mut R,
) -> MaskPlan {
    positions.sort_unstable();
    let actions = positions.iter().map(|_| draw_action(rng)).collect();
    MaskPlan {
        sampled_expressions,
        masked_positions: positions,
        actions,
    }
}

/// Time-aware plan.
///
/// 1. Sample `⌈α·m⌉` of the `m` temporal groups; every token of a sampled
///    group is masked.
/// 2. Top up with uniformly drawn tokens outside all temporal groups until
///    `⌈β·n⌉` positions are masked, or the eligible tokens run out. Tokens of
///    unsampled groups are never drawn.
/// 3. Assign MASK/RANDOM/KEEP with probabilities 0.8/0.1/0.1.
pub fn plan_tamlm<R: Rng>(tokdoc: &TokenizedDoc, alpha: f64, beta: f64, rng: &mut R) -> MaskPlan {
    let n = tokdoc.len();
    let m = tokdoc.temporal_groups.len();
    let take = ceil_count(alpha, m).min(m);
    let mut sampled: Vec<usize> = sample(rng, m, take).into_vec();
    sampled.sort_unstable();

    let mut positions: Vec<usize> = sampled
        .iter()
        .flat_map(|&g| tokdoc.temporal_groups[g].start..tokdoc.temporal_groups[g].end)
        .collect();

    let budget = ceil_count(beta, n);
    if positions.len() < budget {
        let owner = tokdoc.group_of();
        let eligible: Vec<usize> = (0..n).filter(|&i| owner[i].is_none()).collect();
        let need = (budget - positions.len()).min(eligible.len());
        positions.extend(
            sample(rng, eligible.len(), need)
                .into_iter()
                .map(|j| eligible[j]),
        );
    }
    finish_plan(positions, sampled, rng)
}

/// Plain masked-language-model plan: `⌈β·k⌉` positions drawn uniformly from
/// the `k` positions for which `eligible` holds.
pub fn plan_mlm<R, F>(n_tokens: usize, eligible: F, beta: f64, rng: &mut R) -> MaskPlan
where
    R: Rng,
    F: Fn(usize) -> bool,
{
    let pool: Vec<usize> = (0..n_tokens).filter(|&i| eligible(i)).collect();
    let need = ceil_count(beta, pool.len()).min(pool.len());
    let positions = sample(rng, pool.len(), need)
        .into_iter()
        .map(|j| pool[j])
        .collect();
    finish_plan(positions, Vec::new(), rng)
}

/// A model-ready masked example: `[CLS] tokens [SEP]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PretrainExample {
    pub input_ids: Vec<u32>,
    /// Original id at corrupted positions, [`IGNORE`] elsewhere.
    pub mlm_labels: Vec<i64>,
    pub dtp_label: Option<usize>,
}

/// Applies `plan` to a token sequence in place, writing labels.
/// `offset` maps plan positions to sequence positions.
pub(crate) fn corrupt<R: Rng>(
    input_ids: &mut [u32],
    labels: &mut [i64],
    plan: &MaskPlan,
    offset: usize,
    vocab_size: usize,
    rng: &mut R,
) {
    for (&p, &action) in plan.masked_positions.iter().zip(&plan.actions) {
        let pos = p + offset;
        labels[pos] = i64::from(input_ids[pos]);
        match action {
            MaskAction::Mask => input_ids[pos] = MASK,
            MaskAction::Random => {
                if vocab_size > NUM_SPECIALS as usize {
                    input_ids[pos] = rng.random_range(NUM_SPECIALS..vocab_size as u32);
                }
            }
            MaskAction::Keep => {}
        }
    }
}

/// Builds `[CLS] tokens [SEP]` with the plan applied. RANDOM draws uniformly
/// from the non-special ids.
pub fn apply_plan<R: Rng>(
    tokdoc: &TokenizedDoc,
    plan: &MaskPlan,
    vocab: &Vocab,
    rng: &mut R,
) -> PretrainExample {
    let mut input_ids = Vec::with_capacity(tokdoc.len() + 2);
    input_ids.push(CLS);
    input_ids.extend_from_slice(&tokdoc.token_ids);
    input_ids.push(SEP);
    let mut mlm_labels = vec![IGNORE; input_ids.len()];
    corrupt(&mut input_ids, &mut mlm_labels, plan, 1, vocab.len(), rng);
    PretrainExample {
        input_ids,
        mlm_labels,
        dtp_label: None,
    }
}

/// TAMLM masking plus the DTP label of the document timestamp.
#[allow(clippy::too_many_arguments)]
pub fn build_tamlm_dtp(
    doc: &Document,
    tokdoc: &TokenizedDoc,
    space: &LabelSpace,
    vocab: &Vocab,
    alpha: f64,
    beta: f64,
    seed: u64,
) -> Result<PretrainExample, ObjectiveError> {
    let label = dtp_label(&doc.timestamp, space)?;
    let mut rng: ChaCha8Rng = rng_from_seed(seed);
    let plan = plan_tamlm(tokdoc, alpha, beta, &mut rng);
    let mut ex = apply_plan(tokdoc, &plan, vocab, &mut rng);
    ex.dtp_label = Some(label);
    Ok(ex)
}
