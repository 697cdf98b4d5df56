//! Interpolated additive-smoothing n-gram model.
//!
//! With `A = alpha * |V|`:
//!
//! ```text
//! P0(t)          = (c(t) + alpha) / (C + A)
//! Pk(t | ctx_k)  = (c(ctx_k t) + A * P(k-1)(t | ctx_(k-1))) / (c(ctx_k) + A)
//! ```
//!
//! using the longest trailing context (at most `order - 1` tokens) whose
//! prefix chain was observed in training. Unseen contexts back off.
//!
//! # Exact ranks without a full sort
//!
//! GLTR featurization asks for one rank per document token, so materializing
//! and sorting a |V|-sized distribution per query would dominate scoring.
//! Instead, every context entry pre-sorts its continuation tokens by their
//! probability at that level. For a query with observed context chain
//! `e1 .. em` the vocabulary splits into classes "seen up to level j", and
//! within a class the final probability is a monotone function (a chain of
//! `x -> A*x / (T + A)` maps) of the level-j value. Rank counting then
//! reduces to a few binary searches per class, and rank-ordered iteration to
//! a k-way merge of the classes. Both routes evaluate probabilities with the
//! same floating-point operations as [`NgramModel::next_distribution`], so
//! their results are bit-identical to sorting the dense vector.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};
use std::io::{Read, Write};

use rustc_hash::FxHashMap;

use super::{LanguageModel, NextTokenDistribution, RankedTokens, TokenId, Vocabulary, UNK_TOKEN};
use crate::error::{Error, Result};

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_ALPHA: f64 = 0.1;

const MAGIC: &[u8; 12] = b"QSCAN-NGRAM\n";
const FORMAT_VERSION: u32 = 1;

/// Tokens sorted by a per-token key, descending, ties by id ascending.
#[derive(Debug, Clone, Default)]
struct RankList {
    keys: Vec<f64>,
    ids: Vec<TokenId>,
}

impl RankList {
    fn build(mut pairs: Vec<(f64, TokenId)>) -> Self {
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let (keys, ids) = pairs.into_iter().unzip();
        RankList { keys, ids }
    }

    /// Number of entries `i` with `f(key_i) > target`, or `f(key_i) == target`
    /// and `id_i < token`. `f` must be monotone non-decreasing.
    fn count_before(&self, f: impl Fn(f64) -> f64, target: f64, token: TokenId) -> usize {
        let strictly = self.keys.partition_point(|&k| f(k) > target);
        let tie_end = strictly + self.keys[strictly..].partition_point(|&k| f(k) >= target);
        let mut n = strictly;
        let mut i = strictly;
        while i < tie_end {
            let key = self.keys[i];
            let run_end = i + self.keys[i..tie_end].partition_point(|&k| k == key);
            n += self.ids[i..run_end].partition_point(|&id| id < token);
            i = run_end;
        }
        n
    }
}

/// Continuation counts of one context.
#[derive(Debug, Clone)]
struct ContextEntry {
    total: u64,
    /// Sorted ascending.
    tokens: Vec<TokenId>,
    counts: Vec<u64>,
    /// Tokens by their probability at this entry's level.
    by_own: RankList,
    /// Tokens by their probability one level below.
    by_parent: RankList,
}

impl ContextEntry {
    fn count(&self, token: TokenId) -> u64 {
        match self.tokens.binary_search(&token) {
            Ok(i) => self.counts[i],
            Err(_) => 0,
        }
    }

    fn contains(&self, token: TokenId) -> bool {
        self.tokens.binary_search(&token).is_ok()
    }
}

type Level = FxHashMap<Box<[TokenId]>, ContextEntry>;

/// Smoothed n-gram language model. Immutable once trained.
#[derive(Debug, Clone)]
pub struct NgramModel {
    vocab: Vocabulary,
    order: usize,
    alpha: f64,
    unigram: Vec<u64>,
    total: u64,
    /// `levels[k - 1]` holds contexts of length `k`.
    levels: Vec<Level>,
    global: RankList,
}

/// Continuation counts per context, for one context length.
type ContextCounts = FxHashMap<Box<[TokenId]>, FxHashMap<TokenId, u64>>;

/// Trains an order-`order` model on a token stream.
///
/// The vocabulary is `<unk>` (id 0) followed by the distinct tokens in order
/// of first appearance.
pub fn train_ngram<I, S>(tokens: I, order: usize, alpha: f64) -> Result<NgramModel>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if order < 1 {
        return Err(Error::InvalidArgument("order must be >= 1".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }
    let mut vocab_tokens: Vec<String> = vec![UNK_TOKEN.to_owned()];
    let mut index: FxHashMap<String, TokenId> = FxHashMap::default();
    index.insert(UNK_TOKEN.to_owned(), 0);
    let mut unigram: Vec<u64> = vec![0];
    let mut total = 0u64;
    let mut raw: Vec<ContextCounts> = (1..order).map(|_| FxHashMap::default()).collect();
    let mut window: VecDeque<TokenId> = VecDeque::with_capacity(order);

    for tok in tokens {
        let tok = tok.as_ref();
        let id = match index.get(tok) {
            Some(&id) => id,
            None => {
                let id = vocab_tokens.len() as TokenId;
                vocab_tokens.push(tok.to_owned());
                index.insert(tok.to_owned(), id);
                unigram.push(0);
                id
            }
        };
        unigram[id as usize] += 1;
        total += 1;
        let (front, back) = window.as_slices();
        let ctx: Vec<TokenId> = front.iter().chain(back).copied().collect();
        for k in 1..=ctx.len() {
            let key = &ctx[ctx.len() - k..];
            let level = &mut raw[k - 1];
            if !level.contains_key(key) {
                level.insert(key.into(), FxHashMap::default());
            }
            let entry = level.get_mut(key).expect("just inserted");
            *entry.entry(id).or_insert(0) += 1;
        }
        if order > 1 {
            if window.len() == order - 1 {
                window.pop_front();
            }
            window.push_back(id);
        }
    }
    if total == 0 {
        return Err(Error::EmptyInput("no tokens to train on".into()));
    }

    let levels = raw
        .into_iter()
        .map(|level| {
            level
                .into_iter()
                .map(|(ctx, conts)| {
                    let mut pairs: Vec<(TokenId, u64)> = conts.into_iter().collect();
                    pairs.sort_unstable();
                    (ctx, entry_from_pairs(pairs))
                })
                .collect()
        })
        .collect();
    let vocab = Vocabulary::new(vocab_tokens, 0)?;
    Ok(NgramModel::assemble(vocab, order, alpha, unigram, total, levels))
}

fn entry_from_pairs(pairs: Vec<(TokenId, u64)>) -> ContextEntry {
    let total = pairs.iter().map(|p| p.1).sum();
    let (tokens, counts) = pairs.into_iter().unzip();
    ContextEntry {
        total,
        tokens,
        counts,
        by_own: RankList::default(),
        by_parent: RankList::default(),
    }
}

impl NgramModel {
    fn assemble(
        vocab: Vocabulary,
        order: usize,
        alpha: f64,
        unigram: Vec<u64>,
        total: u64,
        levels: Vec<Level>,
    ) -> Self {
        let mut model = NgramModel {
            vocab,
            order,
            alpha,
            unigram,
            total,
            levels,
            global: RankList::default(),
        };
        model.build_rank_index();
        model
    }

    fn build_rank_index(&mut self) {
        let v = self.vocab.len() as TokenId;
        self.global = RankList::build((0..v).map(|t| (self.p0(t), t)).collect());
        for k in 1..self.order {
            let lists: Vec<(Box<[TokenId]>, RankList, RankList)> = self.levels[k - 1]
                .iter()
                .map(|(ctx, entry)| {
                    let chain = self.chain_for(ctx);
                    debug_assert_eq!(chain.len(), k, "every context suffix is observed");
                    let parent = &chain[..k - 1];
                    let own: Vec<(f64, TokenId)> = entry
                        .tokens
                        .iter()
                        .map(|&t| (self.prob_with_chain(t, &chain), t))
                        .collect();
                    let below: Vec<(f64, TokenId)> = entry
                        .tokens
                        .iter()
                        .map(|&t| (self.prob_with_chain(t, parent), t))
                        .collect();
                    (ctx.clone(), RankList::build(own), RankList::build(below))
                })
                .collect();
            let level = &mut self.levels[k - 1];
            for (ctx, own, below) in lists {
                let e = level.get_mut(&ctx).expect("context present");
                e.by_own = own;
                e.by_parent = below;
            }
        }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Total number of training tokens.
    pub fn total_tokens(&self) -> u64 {
        self.total
    }

    pub fn unigram_count(&self, token: TokenId) -> u64 {
        self.unigram[token as usize]
    }

    /// `c(context . token)` for a context of length 1..order-1; `None` when
    /// the context was never observed.
    pub fn ngram_count(&self, context: &[TokenId], token: TokenId) -> Option<u64> {
        let level = self.levels.get(context.len().checked_sub(1)?)?;
        level.get(context).map(|e| e.count(token))
    }

    /// Continuation count `c(context)`: sum of counts of every token observed
    /// after `context`.
    pub fn context_count(&self, context: &[TokenId]) -> Option<u64> {
        let level = self.levels.get(context.len().checked_sub(1)?)?;
        level.get(context).map(|e| e.total)
    }

    /// Number of stored contexts per context length.
    pub fn context_counts_per_level(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.len()).collect()
    }

    fn smoothing_mass(&self) -> f64 {
        self.alpha * self.vocab.len() as f64
    }

    fn p0(&self, token: TokenId) -> f64 {
        (self.unigram[token as usize] as f64 + self.alpha) / (self.total as f64 + self.smoothing_mass())
    }

    /// Observed context entries for the trailing tokens of `context`,
    /// shortest first.
    fn chain_for<'a>(&'a self, context: &[TokenId]) -> Vec<&'a ContextEntry> {
        let max = context.len().min(self.order - 1);
        let mut chain = Vec::with_capacity(max);
        for k in 1..=max {
            match self.levels[k - 1].get(&context[context.len() - k..]) {
                Some(e) => chain.push(e),
                None => break,
            }
        }
        chain
    }

    fn prob_with_chain(&self, token: TokenId, chain: &[&ContextEntry]) -> f64 {
        let a = self.smoothing_mass();
        let mut p = self.p0(token);
        for e in chain {
            p = (e.count(token) as f64 + a * p) / (e.total as f64 + a);
        }
        p
    }

    /// Probability of `token` after `context`.
    pub fn prob(&self, context: &[TokenId], token: TokenId) -> f64 {
        let chain = self.chain_for(context);
        self.prob_with_chain(token, &chain)
    }

    fn check_token(&self, token: TokenId) {
        assert!(
            (token as usize) < self.vocab.len(),
            "token id {token} out of range for vocabulary of {}",
            self.vocab.len()
        );
    }

    /// Serializes the model (vocabulary, order, alpha and count tables) in a
    /// versioned binary format. Output is deterministic.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let io = |e| Error::io("<ngram model>", e);
        w.write_all(MAGIC).map_err(io)?;
        put_u32(&mut w, FORMAT_VERSION)?;
        put_u32(&mut w, self.order as u32)?;
        put_u64(&mut w, self.alpha.to_bits())?;
        put_u32(&mut w, self.vocab.len() as u32)?;
        put_u32(&mut w, self.vocab.unk_id())?;
        for t in self.vocab.tokens() {
            put_u32(&mut w, t.len() as u32)?;
            w.write_all(t.as_bytes()).map_err(io)?;
        }
        for &c in &self.unigram {
            put_u64(&mut w, c)?;
        }
        for level in &self.levels {
            let mut keys: Vec<&Box<[TokenId]>> = level.keys().collect();
            keys.sort_unstable();
            put_u64(&mut w, keys.len() as u64)?;
            for key in keys {
                let e = &level[key];
                for &t in key.iter() {
                    put_u32(&mut w, t)?;
                }
                put_u32(&mut w, e.tokens.len() as u32)?;
                for (&t, &c) in e.tokens.iter().zip(&e.counts) {
                    put_u32(&mut w, t)?;
                    put_u64(&mut w, c)?;
                }
            }
        }
        Ok(())
    }

    /// Reads a model written by [`NgramModel::write_to`], validating its
    /// count invariants.
    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut r = std::io::BufReader::new(r);
        let mut magic = [0u8; 12];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::ModelFormat("not a qscan n-gram model file".into()));
        }
        let version = get_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!("unsupported model version {version}")));
        }
        let order = get_u32(&mut r)? as usize;
        let alpha = f64::from_bits(get_u64(&mut r)?);
        if order < 1 || !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::ModelFormat(format!("bad order {order} or alpha {alpha}")));
        }
        let v = get_u32(&mut r)? as usize;
        let unk = get_u32(&mut r)?;
        let mut tokens = Vec::with_capacity(v.min(1 << 24));
        for _ in 0..v {
            let n = get_u32(&mut r)? as usize;
            let mut buf = vec![0u8; n];
            read_exact(&mut r, &mut buf)?;
            tokens.push(String::from_utf8(buf).map_err(|_| Error::ModelFormat("token is not UTF-8".into()))?);
        }
        let vocab = Vocabulary::new(tokens, unk).map_err(|e| Error::ModelFormat(e.to_string()))?;
        let mut unigram = Vec::with_capacity(v);
        for _ in 0..v {
            unigram.push(get_u64(&mut r)?);
        }
        let total: u64 = unigram.iter().sum();
        if total == 0 {
            return Err(Error::ModelFormat("model has no training tokens".into()));
        }
        let mut levels = Vec::with_capacity(order.saturating_sub(1));
        for k in 1..order {
            let n = get_u64(&mut r)?;
            let mut level = Level::default();
            for _ in 0..n {
                let mut ctx = Vec::with_capacity(k);
                for _ in 0..k {
                    ctx.push(check_id(get_u32(&mut r)?, v)?);
                }
                let m = get_u32(&mut r)? as usize;
                let mut pairs = Vec::with_capacity(m);
                for _ in 0..m {
                    let t = check_id(get_u32(&mut r)?, v)?;
                    let c = get_u64(&mut r)?;
                    if c == 0 {
                        return Err(Error::ModelFormat("zero count stored".into()));
                    }
                    pairs.push((t, c));
                }
                if !pairs.windows(2).all(|w| w[0].0 < w[1].0) {
                    return Err(Error::ModelFormat("continuations not sorted".into()));
                }
                level.insert(ctx.into_boxed_slice(), entry_from_pairs(pairs));
            }
            levels.push(level);
        }
        // Every context's suffix must be present for the chain lookup.
        for k in 2..order {
            let (lower, upper) = levels.split_at(k - 1);
            for ctx in upper[0].keys() {
                if !lower[k - 2].contains_key(&ctx[1..]) {
                    return Err(Error::ModelFormat("context suffix missing".into()));
                }
            }
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing).map_err(|e| Error::io("<ngram model>", e))? != 0 {
            return Err(Error::ModelFormat("trailing bytes after model".into()));
        }
        Ok(NgramModel::assemble(vocab, order, alpha, unigram, total, levels))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(f)
    }
}

fn check_id(id: u32, v: usize) -> Result<TokenId> {
    if (id as usize) < v {
        Ok(id)
    } else {
        Err(Error::ModelFormat(format!("token id {id} out of range")))
    }
}

fn put_u32(w: &mut impl Write, x: u32) -> Result<()> {
    w.write_all(&x.to_le_bytes()).map_err(|e| Error::io("<ngram model>", e))
}

fn put_u64(w: &mut impl Write, x: u64) -> Result<()> {
    w.write_all(&x.to_le_bytes()).map_err(|e| Error::io("<ngram model>", e))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::ModelFormat("truncated model file".into())
        } else {
            Error::io("<ngram model>", e)
        }
    })
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// One probability class of a query: tokens seen up to level `j` of the
/// context chain.
struct Class<'a> {
    list: &'a RankList,
    /// Entry of level `j + 1`; its tokens belong to deeper classes.
    exclude: Option<&'a ContextEntry>,
    /// Totals of levels `j + 1 ..= m`, applied as `x -> A*x / (T + A)`.
    lift: Vec<f64>,
}

impl Class<'_> {
    fn lift(&self, a: f64, mut x: f64) -> f64 {
        for &t in &self.lift {
            x = (a * x) / (t + a);
        }
        x
    }
}

impl NgramModel {
    fn classes<'a>(&'a self, chain: &[&'a ContextEntry]) -> Vec<Class<'a>> {
        let m = chain.len();
        (0..=m)
            .map(|j| Class {
                list: if j == 0 { &self.global } else { &chain[j - 1].by_own },
                exclude: chain.get(j).copied(),
                lift: chain[j..].iter().map(|e| e.total as f64).collect(),
            })
            .collect()
    }

    fn fast_rank(&self, context: &[TokenId], token: TokenId) -> usize {
        self.check_token(token);
        let chain = self.chain_for(context);
        let target = self.prob_with_chain(token, &chain);
        let a = self.smoothing_mass();
        let mut before = 0usize;
        for class in self.classes(&chain) {
            let f = |x: f64| class.lift(a, x);
            before += class.list.count_before(f, target, token);
            if let Some(deeper) = class.exclude {
                before -= deeper.by_parent.count_before(f, target, token);
            }
        }
        before + 1
    }
}

/// Lazily walks one class in rank order, grouping equal-probability runs so
/// that ties come out by id even when the lift maps distinct keys to the
/// same probability.
struct ClassCursor<'a> {
    class: Class<'a>,
    a: f64,
    pos: usize,
    pending: VecDeque<TokenId>,
    pending_prob: f64,
}

impl ClassCursor<'_> {
    fn peek(&mut self) -> Option<(f64, TokenId)> {
        while self.pending.is_empty() {
            let keys = &self.class.list.keys;
            if self.pos >= keys.len() {
                return None;
            }
            let prob = self.class.lift(self.a, keys[self.pos]);
            let end = self.pos + keys[self.pos..].partition_point(|&k| self.class.lift(self.a, k) >= prob);
            let ids = &self.class.list.ids[self.pos..end];
            let exclude = self.class.exclude;
            self.pending
                .extend(ids.iter().copied().filter(|&t| !exclude.is_some_and(|e| e.contains(t))));
            if keys[self.pos] != keys[end - 1] {
                self.pending.make_contiguous().sort_unstable();
            }
            self.pending_prob = prob;
            self.pos = end;
        }
        Some((self.pending_prob, self.pending[0]))
    }
}

#[derive(PartialEq)]
struct HeapItem {
    prob: f64,
    token: TokenId,
    class: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.prob
            .total_cmp(&other.prob)
            .then_with(|| Reverse(self.token).cmp(&Reverse(other.token)))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct RankedIter<'a> {
    cursors: Vec<ClassCursor<'a>>,
    heap: BinaryHeap<HeapItem>,
}

impl Iterator for RankedIter<'_> {
    type Item = (TokenId, f64);

    fn next(&mut self) -> Option<(TokenId, f64)> {
        let top = self.heap.pop()?;
        let cursor = &mut self.cursors[top.class];
        cursor.pending.pop_front();
        if let Some((prob, token)) = cursor.peek() {
            self.heap.push(HeapItem {
                prob,
                token,
                class: top.class,
            });
        }
        Some((top.token, top.prob))
    }
}

impl LanguageModel for NgramModel {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn max_context(&self) -> usize {
        self.order - 1
    }

    fn next_distribution(&self, context: &[TokenId]) -> NextTokenDistribution {
        let chain = self.chain_for(context);
        let a = self.smoothing_mass();
        let mut p: Vec<f64> = (0..self.vocab.len() as TokenId).map(|t| self.p0(t)).collect();
        let mut seen = Vec::new();
        for e in &chain {
            let denom = e.total as f64 + a;
            seen.clear();
            seen.extend(
                e.tokens
                    .iter()
                    .zip(&e.counts)
                    .map(|(&t, &c)| (t, (c as f64 + a * p[t as usize]) / denom)),
            );
            for x in p.iter_mut() {
                *x = (a * *x) / denom;
            }
            for &(t, x) in &seen {
                p[t as usize] = x;
            }
        }
        NextTokenDistribution::new(p)
    }

    fn token_rank(&self, context: &[TokenId], token: TokenId) -> usize {
        self.fast_rank(context, token)
    }

    fn ranked_tokens<'a>(&'a self, context: &[TokenId]) -> RankedTokens<'a> {
        let chain = self.chain_for(context);
        let a = self.smoothing_mass();
        let mut cursors: Vec<ClassCursor<'a>> = self
            .classes(&chain)
            .into_iter()
            .map(|class| ClassCursor {
                class,
                a,
                pos: 0,
                pending: VecDeque::new(),
                pending_prob: 0.0,
            })
            .collect();
        let mut heap = BinaryHeap::with_capacity(cursors.len());
        for (i, c) in cursors.iter_mut().enumerate() {
            if let Some((prob, token)) = c.peek() {
                heap.push(HeapItem { prob, token, class: i });
            }
        }
        Box::new(RankedIter { cursors, heap })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::lm_tokens;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn words(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    /// Sort-the-whole-vector oracle.
    fn oracle_rank(dist: &NextTokenDistribution, token: TokenId) -> usize {
        dist.sorted_ids().iter().position(|&t| t == token).unwrap() + 1
    }

    fn random_model(seed: u64, vocab: usize, len: usize, order: usize, alpha: f64) -> NgramModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Skewed draws so counts and contexts vary.
        let toks: Vec<String> = (0..len)
            .map(|_| {
                let r: f64 = rng.random();
                format!("w{}", ((r * r) * vocab as f64) as usize)
            })
            .collect();
        train_ngram(&toks, order, alpha).unwrap()
    }

    #[test]
    fn bigram_counts_by_hand() {
        let m = train_ngram(words("a b a b"), 2, 0.1).unwrap();
        let v = m.vocabulary();
        assert_eq!(v.tokens(), &["<unk>", "a", "b"]);
        let (a, b) = (v.id("a"), v.id("b"));
        assert_eq!(m.ngram_count(&[a], b), Some(2));
        assert_eq!(m.ngram_count(&[b], a), Some(1));
        assert_eq!(m.context_count(&[a]), Some(2));
        assert_eq!(m.context_count(&[b]), Some(1));
    }

    #[test]
    fn empty_stream_and_bad_params_error() {
        assert!(matches!(
            train_ngram(Vec::<String>::new(), 3, 0.1),
            Err(Error::EmptyInput(_))
        ));
        assert!(train_ngram(words("a"), 0, 0.1).is_err());
        assert!(train_ngram(words("a"), 2, 0.0).is_err());
        assert!(train_ngram(words("a"), 2, f64::NAN).is_err());
    }

    #[test]
    fn repeated_token_dominates() {
        let m = train_ngram(words("x x x"), 1, 0.1).unwrap();
        let x = m.vocabulary().id("x");
        let d = m.next_distribution(&[]);
        assert!(d
            .probabilities
            .iter()
            .enumerate()
            .all(|(t, &p)| t as TokenId == x || p < d.prob(x)));

        let m2 = train_ngram(words("x x x"), 2, 0.1).unwrap();
        let d = m2.next_distribution(&[x]);
        assert!(d
            .probabilities
            .iter()
            .enumerate()
            .all(|(t, &p)| t as TokenId == x || p < d.prob(x)));
    }

    #[test]
    fn huge_alpha_is_uniform() {
        let m = train_ngram(words("the cat sat on the mat"), 3, 1e9).unwrap();
        let v = m.vocab_size() as f64;
        let the = m.vocabulary().id("the");
        for ctx in [vec![], vec![the], vec![the, m.vocabulary().id("cat")]] {
            let d = m.next_distribution(&ctx);
            assert!(d.probabilities.iter().all(|&p| (p - 1.0 / v).abs() < 1e-6));
        }
    }

    #[test]
    fn interpolation_matches_direct_formula() {
        let m = train_ngram(words("a b a c"), 2, 0.1).unwrap();
        let voc = m.vocabulary();
        let (a, b) = (voc.id("a"), voc.id("b"));
        // Direct evaluation: |V| = 4 (<unk>, a, b, c), C = 4, c(b) = 1,
        // c(a) as context = 2, c(a b) = 1.
        let alpha = 0.1;
        let vsize = 4.0;
        let p0_b = (1.0 + alpha) / (4.0 + alpha * vsize);
        let p1_b = (1.0 + alpha * vsize * p0_b) / (2.0 + alpha * vsize);
        assert!((m.prob(&[a], b) - p1_b).abs() < 1e-12);
        assert!((m.next_distribution(&[a]).prob(b) - p1_b).abs() < 1e-12);
        // Unseen context backs off to the unigram level.
        let c = voc.id("c");
        assert!((m.prob(&[c], b) - p0_b).abs() < 1e-12);
    }

    #[test]
    fn distributions_sum_to_one_and_positive() {
        let m = random_model(7, 60, 3000, 3, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let ctx: Vec<TokenId> = (0..rng.random_range(0..4))
                .map(|_| rng.random_range(0..m.vocab_size() as u32))
                .collect();
            let d = m.next_distribution(&ctx);
            assert!((d.sum() - 1.0).abs() < 1e-9);
            assert!(d.probabilities.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn dense_distribution_matches_pointwise_prob_bitwise() {
        let m = random_model(3, 40, 2000, 4, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let ctx: Vec<TokenId> = (0..3).map(|_| rng.random_range(0..m.vocab_size() as u32)).collect();
            let d = m.next_distribution(&ctx);
            for t in 0..m.vocab_size() as TokenId {
                assert_eq!(d.prob(t).to_bits(), m.prob(&ctx, t).to_bits());
            }
        }
    }

    #[test]
    fn fast_rank_matches_sort_oracle() {
        for (seed, order, alpha) in [(1, 2, 0.1), (2, 3, 0.1), (3, 4, 0.01), (4, 1, 0.5), (5, 3, 2.0)] {
            let m = random_model(seed, 80, 4000, order, alpha);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let v = m.vocab_size() as u32;
            for _ in 0..100 {
                let ctx: Vec<TokenId> = (0..rng.random_range(0..5)).map(|_| rng.random_range(0..v)).collect();
                let tok = rng.random_range(0..v);
                let d = m.next_distribution(&ctx);
                assert_eq!(
                    m.token_rank(&ctx, tok),
                    oracle_rank(&d, tok),
                    "order {order} ctx {ctx:?} tok {tok}"
                );
            }
        }
    }

    #[test]
    fn ranks_form_a_bijection() {
        let m = random_model(11, 30, 800, 3, 0.1);
        let ctx = m.vocabulary().encode(&["w0", "w1"]);
        let mut ranks: Vec<usize> = (0..m.vocab_size() as TokenId).map(|t| m.token_rank(&ctx, t)).collect();
        ranks.sort_unstable();
        assert_eq!(ranks, (1..=m.vocab_size()).collect::<Vec<_>>());
    }

    #[test]
    fn ranked_tokens_match_dense_sort_exactly() {
        for (seed, order) in [(21, 2), (22, 3), (23, 4)] {
            let m = random_model(seed, 70, 3000, order, 0.1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..20 {
                let ctx: Vec<TokenId> = (0..3).map(|_| rng.random_range(0..m.vocab_size() as u32)).collect();
                let d = m.next_distribution(&ctx);
                let lazy: Vec<(TokenId, f64)> = m.ranked_tokens(&ctx).collect();
                let dense: Vec<(TokenId, f64)> = d.sorted_ids().into_iter().map(|t| (t, d.prob(t))).collect();
                assert_eq!(lazy.len(), dense.len());
                for (x, y) in lazy.iter().zip(&dense) {
                    assert_eq!(x.0, y.0);
                    assert_eq!(x.1.to_bits(), y.1.to_bits());
                }
            }
        }
    }

    #[test]
    fn ties_collapse_across_keys_still_ordered_by_id() {
        // Tiny alpha relative to counts forces many equal lifted values.
        let text = "a b c a b d a b e a c b a d b";
        let m = train_ngram(lm_tokens(text), 3, 1e-3).unwrap();
        for ctx in [vec![], vec![1], vec![1, 2], vec![2, 1], vec![4, 4]] {
            let d = m.next_distribution(&ctx);
            let lazy: Vec<TokenId> = m.ranked_tokens(&ctx).map(|x| x.0).collect();
            assert_eq!(lazy, d.sorted_ids());
        }
    }

    #[test]
    fn serialization_round_trip_is_deterministic() {
        let toks = lm_tokens("the cat sat on the mat . the dog sat on the log . a cat and a dog .");
        let m1 = train_ngram(&toks, 3, 0.1).unwrap();
        let m2 = train_ngram(&toks, 3, 0.1).unwrap();
        let (mut b1, mut b2) = (Vec::new(), Vec::new());
        m1.write_to(&mut b1).unwrap();
        m2.write_to(&mut b2).unwrap();
        assert_eq!(b1, b2);
        let back = NgramModel::read_from(b1.as_slice()).unwrap();
        let mut b3 = Vec::new();
        back.write_to(&mut b3).unwrap();
        assert_eq!(b1, b3);
        for ctx in [vec![], vec![1], vec![1, 2], vec![5, 5]] {
            assert_eq!(m1.next_distribution(&ctx), back.next_distribution(&ctx));
        }
    }

    #[test]
    fn corrupt_model_files_are_rejected() {
        let m = train_ngram(words("a b a b c"), 2, 0.1).unwrap();
        let mut bytes = Vec::new();
        m.write_to(&mut bytes).unwrap();
        assert!(matches!(
            NgramModel::read_from(&bytes[..bytes.len() - 3]),
            Err(Error::ModelFormat(_))
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            NgramModel::read_from(bad.as_slice()),
            Err(Error::ModelFormat(_))
        ));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(
            NgramModel::read_from(extra.as_slice()),
            Err(Error::ModelFormat(_))
        ));
    }
}
