//! GRU encoder-decoder trained on premise → conclusion pairs.
//!
//! The encoder's final hidden state is the commonsense vector for a phrase.
//! The decoder starts from that state and greedily emits conclusion words.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::kb::KnowledgeBase;
use crate::nn::{init, prefixed, softmax_xent, xavier, Dense, Embedding, GruCell, InitScheme, Optimizer, Params, Tensor2};
use crate::text::{Vocab, WordVectors};
use crate::{Error, Result};

pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";
const BOS_ID: usize = 0;
const EOS_ID: usize = 1;
const UNK_ID: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ReasonerConfig {
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ReasonerConfig {
    fn default() -> Self {
        ReasonerConfig {
            embedding_dim: 50,
            hidden_dim: 768,
            epochs: 100,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqModel {
    pub vocab: Vocab,
    pub embedding: Embedding,
    pub encoder: GruCell,
    pub decoder: GruCell,
    pub output: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PremiseEmbedding {
    pub phrase: String,
    pub vector: Vec<f64>,
}

impl Params for Seq2SeqModel {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut out = prefixed("embedding", self.embedding.tensors());
        out.extend(prefixed("encoder", self.encoder.tensors()));
        out.extend(prefixed("decoder", self.decoder.tensors()));
        out.extend(prefixed("output", self.output.tensors()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        let mut out = self.embedding.tensors_mut();
        out.extend(self.encoder.tensors_mut());
        out.extend(self.decoder.tensors_mut());
        out.extend(self.output.tensors_mut());
        out
    }
}

/// Vocabulary over every premise and conclusion word of `kb`.
pub fn kb_vocab(kb: &KnowledgeBase) -> Vocab {
    let words = kb
        .facts
        .iter()
        .flat_map(|f| [f.premise.key(), f.conclusion.key()])
        .flat_map(|k| k.split_whitespace().map(String::from).collect::<Vec<_>>());
    Vocab::new(&[BOS, EOS, UNK], words)
}

impl Seq2SeqModel {
    /// Fresh model over `vocab`. Embedding rows come from `word_vectors`
    /// when given (missing words zero), otherwise xavier.
    pub fn new(
        vocab: Vocab,
        embedding_dim: usize,
        hidden_dim: usize,
        word_vectors: Option<&WordVectors>,
        seed: u64,
    ) -> Result<Self> {
        if embedding_dim == 0 || hidden_dim == 0 {
            return Err(Error::invalid("reasoner dimensions must be positive"));
        }
        if vocab.id(BOS) != Some(BOS_ID) || vocab.id(EOS) != Some(EOS_ID) || vocab.id(UNK) != Some(UNK_ID) {
            return Err(Error::invalid("reasoner vocabulary must start with BOS, EOS, UNK"));
        }
        let mut rng = crate::rng(seed);
        let table = match word_vectors {
            Some(wv) => init(
                vocab.len(),
                embedding_dim,
                InitScheme::FromWordVectors {
                    vectors: wv,
                    vocab: vocab.words(),
                },
                seed,
            )?,
            None => xavier(vocab.len(), embedding_dim, &mut rng),
        };
        let encoder = GruCell::new(embedding_dim, hidden_dim, &mut rng);
        let decoder = GruCell::new(embedding_dim, hidden_dim, &mut rng);
        let output = Dense::new(hidden_dim, vocab.len(), &mut rng);
        Ok(Seq2SeqModel {
            vocab,
            embedding: Embedding::new(table),
            encoder,
            decoder,
            output,
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.encoder.hidden_dim()
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding.dim()
    }

    /// Word ids of `phrase`, lowercased; OOV words map to UNK.
    pub fn encode_ids(&self, phrase: &str) -> Vec<usize> {
        phrase
            .to_lowercase()
            .split_whitespace()
            .map(|w| self.vocab.id(w).unwrap_or(UNK_ID))
            .collect()
    }

    fn encoder_state(&self, ids: &[usize]) -> Result<Vec<f64>> {
        let mut h = vec![0.0; self.hidden_dim()];
        for &id in ids {
            h = self.encoder.step(self.embedding.lookup(id), &h)?;
        }
        Ok(h)
    }

    /// Teacher-forced loss summed over conclusion tokens plus EOS. Returns
    /// (loss, number of predicted tokens). Gradients accumulate into `grad`.
    pub fn pair_loss(&self, premise: &[usize], conclusion: &[usize], grad: Option<&mut Seq2SeqModel>) -> Result<(f64, usize)> {
        let h0 = vec![0.0; self.hidden_dim()];
        let enc = self
            .encoder
            .run(premise.iter().map(|&id| self.embedding.lookup(id)), &h0)?;
        let h_enc = enc.last().map_or(h0.clone(), |s| s.h.clone());

        let inputs: Vec<usize> = core::iter::once(BOS_ID).chain(conclusion.iter().copied()).collect();
        let targets: Vec<usize> = conclusion.iter().copied().chain(core::iter::once(EOS_ID)).collect();
        let dec = self
            .decoder
            .run(inputs.iter().map(|&id| self.embedding.lookup(id)), &h_enc)?;

        let mut loss = 0.0;
        let mut dlogits = Vec::with_capacity(dec.len());
        for (step, &target) in dec.iter().zip(&targets) {
            let logits = self.output.forward(&step.h)?;
            let (l, d) = softmax_xent(&logits, target)?;
            loss += l;
            dlogits.push(d);
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite("reasoner loss"));
        }
        let Some(grad) = grad else {
            return Ok((loss, targets.len()));
        };

        let hd = self.hidden_dim();
        let ed = self.embedding_dim();
        let mut dh_next = vec![0.0; hd];
        for t in (0..dec.len()).rev() {
            let mut dh = dh_next;
            self.output.backward(&dec[t].h, &dlogits[t], &mut grad.output, Some(&mut dh));
            let mut dx = vec![0.0; ed];
            dh_next = self.decoder.backward(&dec[t], &dh, &mut grad.decoder, &mut dx);
            self.embedding.backward(inputs[t], &dx, &mut grad.embedding);
        }
        for t in (0..enc.len()).rev() {
            let mut dx = vec![0.0; ed];
            dh_next = self.encoder.backward(&enc[t], &dh_next, &mut grad.encoder, &mut dx);
            self.embedding.backward(premise[t], &dx, &mut grad.embedding);
        }
        Ok((loss, targets.len()))
    }

    fn fact_ids(&self, kb: &KnowledgeBase) -> Vec<(Vec<usize>, Vec<usize>)> {
        kb.facts
            .iter()
            .map(|f| (self.encode_ids(&f.premise.key()), self.encode_ids(&f.conclusion.key())))
            .collect()
    }

    /// Mean per-token cross-entropy over every fact of `kb`.
    pub fn mean_token_loss(&self, kb: &KnowledgeBase) -> Result<f64> {
        if kb.facts.is_empty() {
            return Err(Error::Empty("knowledge base facts"));
        }
        let (mut total, mut n) = (0.0, 0usize);
        for (p, c) in self.fact_ids(kb) {
            let (l, k) = self.pair_loss(&p, &c, None)?;
            total += l;
            n += k;
        }
        Ok(total / n as f64)
    }

    /// Summed loss and gradient over all facts; used for gradient checks.
    pub fn loss_and_grad(&self, kb: &KnowledgeBase) -> Result<(f64, Seq2SeqModel)> {
        let mut grad = self.zeros_like();
        let mut total = 0.0;
        for (p, c) in self.fact_ids(kb) {
            total += self.pair_loss(&p, &c, Some(&mut grad))?.0;
        }
        Ok((total, grad))
    }
}

/// Trains on one pair per fact, shuffled each epoch, one Adam step per pair.
pub fn train_reasoner(kb: &KnowledgeBase, word_vectors: Option<&WordVectors>, config: &ReasonerConfig) -> Result<Seq2SeqModel> {
    if kb.facts.is_empty() {
        return Err(Error::Empty("knowledge base facts"));
    }
    let mut model = Seq2SeqModel::new(
        kb_vocab(kb),
        config.embedding_dim,
        config.hidden_dim,
        word_vectors,
        config.seed,
    )?;
    let pairs = model.fact_ids(kb);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut rng = crate::rng(config.seed.wrapping_add(1));
    let mut opt = Optimizer::adam(config.learning_rate)?.with_clip_norm(5.0);
    let mut grad = model.zeros_like();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            grad.zero();
            let (p, c) = &pairs[i];
            model.pair_loss(p, c, Some(&mut grad))?;
            opt.step(&mut model, &grad)?;
        }
    }
    if !model.is_finite() {
        return Err(Error::NonFinite("reasoner parameters"));
    }
    Ok(model)
}

/// Encoder final hidden state after reading `phrase`. An empty phrase gives
/// the zero initial state.
pub fn embed_premise(model: &Seq2SeqModel, phrase: &str) -> PremiseEmbedding {
    let ids = model.encode_ids(phrase);
    let vector = model
        .encoder_state(&ids)
        .expect("embedding width matches encoder input");
    PremiseEmbedding {
        phrase: String::from(phrase),
        vector,
    }
}

/// Greedy decoding from BOS until EOS or `max_len` words. BOS and UNK are
/// never emitted; argmax ties go to the lower id.
pub fn decode(model: &Seq2SeqModel, phrase: &str, max_len: usize) -> String {
    let mut h = embed_premise(model, phrase).vector;
    let mut token = BOS_ID;
    let mut words: Vec<&str> = Vec::new();
    for _ in 0..max_len {
        h = model
            .decoder
            .step(model.embedding.lookup(token), &h)
            .expect("embedding width matches decoder input");
        let logits = model.output.forward(&h).expect("hidden width matches output layer");
        let mut best = EOS_ID;
        for (id, &v) in logits.iter().enumerate() {
            if id != BOS_ID && id != UNK_ID && v > logits[best] {
                best = id;
            }
        }
        if best == EOS_ID {
            break;
        }
        words.push(model.vocab.word(best));
        token = best;
    }
    words.join(" ")
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = libm::sqrt(a.iter().map(|x| x * x).sum());
    let nb = libm::sqrt(b.iter().map(|x| x * x).sum());
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
