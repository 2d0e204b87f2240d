#pragma once

// Sentiment fine-tuning: task file adapters (incl. the FiQA score-to-binary
// conversion), the repeated 90/10 split protocol, full-model fine-tuning
// with a linear classification head on the pooled CLS state, and accuracy
// evaluation.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "finlm/checkpoint.hpp"
#include "finlm/pretrain.hpp"
#include "finlm/wordpiece.hpp"

namespace finlm::ft {

class EmptyTestSet : public Error {
public:
    EmptyTestSet() : Error("accuracy is undefined on an empty test set") {}
};

// ----------------------------------------------------------------- tasks ---

enum class TaskName { PhraseBank, AnalystTone, FiQA };

inline std::string task_name_str(TaskName t) {
    switch (t) {
        case TaskName::PhraseBank: return "phrasebank";
        case TaskName::AnalystTone: return "analysttone";
        case TaskName::FiQA: return "fiqa";
    }
    return "?";
}

inline TaskName task_from_name(const std::string& s) {
    if (s == "phrasebank") return TaskName::PhraseBank;
    if (s == "analysttone") return TaskName::AnalystTone;
    if (s == "fiqa") return TaskName::FiQA;
    throw Error("unknown task '" + s + "' (expected phrasebank|analysttone|fiqa)");
}

struct LabeledExample {
    std::string text;
    int label = 0;  // index into TaskSpec::label_names
};

struct TaskSpec {
    TaskName name = TaskName::PhraseBank;
    std::vector<std::string> label_names;
    std::vector<LabeledExample> examples;
    std::size_t dropped_zero_scores = 0;  // FiQA records with score exactly 0

    int num_classes() const { return static_cast<int>(label_names.size()); }
    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(label_names.size(), 0);
        for (const LabeledExample& e : examples) ++counts[static_cast<std::size_t>(e.label)];
        return counts;
    }
};

inline constexpr std::string_view kTaskFormatVersion = "finlm-task/1";

// Labeled-record file: header `finlm-task/1 <taskname>`, then per line
// `text<TAB>label` (3-class tasks) or `text<TAB>score` (FiQA, score in
// [-1,1]; >0 Positive, <0 Negative, =0 dropped and counted).
inline TaskSpec load_task(const std::string& path) {
    std::string data = read_file(path);
    std::size_t pos = 0, lineno = 0;
    auto next_line = [&](std::string& out) {
        if (pos >= data.size()) return false;
        std::size_t eol = data.find('\n', pos);
        if (eol == std::string::npos) eol = data.size();
        out = data.substr(pos, eol - pos);
        if (!out.empty() && out.back() == '\r') out.pop_back();
        pos = eol + 1;
        ++lineno;
        return true;
    };

    std::string line;
    if (!next_line(line)) throw FormatError(path + ": empty task file", 1);
    if (line.rfind(kTaskFormatVersion, 0) != 0)
        throw FormatError(path + ": missing '" + std::string(kTaskFormatVersion) + "' header", 1);
    std::string declared = trim(line.substr(kTaskFormatVersion.size()));
    TaskSpec task;
    task.name = task_from_name(declared);
    bool fiqa = task.name == TaskName::FiQA;
    task.label_names = fiqa ? std::vector<std::string>{"positive", "negative"}
                            : std::vector<std::string>{"positive", "neutral", "negative"};

    while (next_line(line)) {
        if (trim(line).empty()) continue;
        std::size_t tab = line.rfind('\t');
        if (tab == std::string::npos)
            throw FormatError(path + ": record needs 'text<TAB>" +
                                  std::string(fiqa ? "score" : "label") + "'",
                              lineno);
        std::string text = line.substr(0, tab);
        std::string tail = trim(line.substr(tab + 1));
        if (trim(text).empty()) throw FormatError(path + ": empty text", lineno);
        int label;
        if (fiqa) {
            double score;
            try {
                std::size_t used = 0;
                score = std::stod(tail, &used);
                if (used != tail.size()) throw std::invalid_argument(tail);
            } catch (const std::exception&) {
                throw FormatError(path + ": bad score '" + tail + "'", lineno);
            }
            if (score < -1.0 || score > 1.0)
                throw FormatError(path + ": score " + tail + " outside [-1,1]", lineno);
            if (score == 0.0) {
                ++task.dropped_zero_scores;
                continue;
            }
            label = score > 0.0 ? 0 : 1;
        } else {
            label = -1;
            for (std::size_t k = 0; k < task.label_names.size(); ++k)
                if (tail == task.label_names[k]) label = static_cast<int>(k);
            if (label < 0) throw FormatError(path + ": unknown label '" + tail + "'", lineno);
        }
        task.examples.push_back({std::move(text), label});
    }
    if (task.examples.empty()) throw FormatError(path + ": task has no examples", lineno);
    return task;
}

inline void save_task(const TaskSpec& task, const std::string& path) {
    std::string out(kTaskFormatVersion);
    out += ' ';
    out += task_name_str(task.name);
    out += '\n';
    for (const LabeledExample& e : task.examples) {
        out += e.text;
        out += '\t';
        if (task.name == TaskName::FiQA)
            out += e.label == 0 ? "0.5" : "-0.5";
        else
            out += task.label_names[static_cast<std::size_t>(e.label)];
        out += '\n';
    }
    write_file(path, out);
}

// ---------------------------------------------------------------- splits ---

struct SplitPlan {
    double train_fraction = 0.9;
    int repetitions = 10;
    std::uint64_t base_seed = 0;

    void validate() const {
        if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw ConfigError("train_fraction must be in (0,1)");
    }
};

struct Split {
    std::vector<std::size_t> train_ids;
    std::vector<std::size_t> test_ids;
};

// Repetition r shuffles under seed base_seed + r; |test| = round((1-f)*N);
// train and test are disjoint and exhaustive.
inline std::vector<Split> make_splits(std::size_t n, const SplitPlan& plan) {
    plan.validate();
    if (n < 10) throw ConfigError("split protocol needs at least 10 examples");
    std::vector<Split> splits;
    for (int r = 0; r < plan.repetitions; ++r) {
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        Rng rng(plan.base_seed + static_cast<std::uint64_t>(r));
        rng.shuffle(perm);
        std::size_t test_n = static_cast<std::size_t>(
            std::llround((1.0 - plan.train_fraction) * static_cast<double>(n)));
        test_n = std::max<std::size_t>(1, std::min(test_n, n - 1));
        Split s;
        s.test_ids.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(test_n));
        s.train_ids.assign(perm.begin() + static_cast<std::ptrdiff_t>(test_n), perm.end());
        splits.push_back(std::move(s));
    }
    return splits;
}

// ------------------------------------------------------------- classifier ---

struct FineTuneConfig {
    int epochs = 4;
    double learning_rate = 2e-5;
    int batch_size = 16;
    std::size_t max_len = 128;
    double head_init_std = 0.02;
    double warmup_fraction = 0.1;
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs < 0 || learning_rate <= 0.0 || batch_size < 1 || max_len < 3 ||
            head_init_std <= 0.0)
            throw ConfigError("fine-tune config values must be positive");
    }
};

struct Classifier {
    model::ModelConfig config;
    model::Params<float> params;
    model::MatF head_w;  // H x K
    model::VecF head_b;  // K
    int num_classes = 0;
    std::uint64_t vocab_fingerprint = 0;
};

namespace detail {

// [CLS] text [SEP], tail-truncated to max_len.
inline void encode_example(const std::string& text, const vocab::SubwordVocab& voc,
                           std::size_t max_len, std::vector<std::int32_t>& ids) {
    ids.clear();
    ids.push_back(vocab::kClsId);
    std::vector<std::int32_t> body = tok::encode(text, voc).ids;
    if (body.size() > max_len - 2) body.resize(max_len - 2);
    ids.insert(ids.end(), body.begin(), body.end());
    ids.push_back(vocab::kSepId);
}

inline model::Batch make_cls_batch(const std::vector<const LabeledExample*>& examples,
                                   const vocab::SubwordVocab& voc, std::size_t max_len) {
    std::vector<std::vector<std::int32_t>> encoded;
    std::size_t longest = 0;
    for (const LabeledExample* e : examples) {
        std::vector<std::int32_t> ids;
        encode_example(e->text, voc, max_len, ids);
        longest = std::max(longest, ids.size());
        encoded.push_back(std::move(ids));
    }
    model::Batch b;
    b.size = static_cast<int>(examples.size());
    b.seq_len = static_cast<int>(longest);
    b.token_ids.assign(static_cast<std::size_t>(b.size) * longest, vocab::kPadId);
    b.segment_ids.assign(static_cast<std::size_t>(b.size) * longest, 0);
    b.attn_mask.assign(static_cast<std::size_t>(b.size) * longest, 0);
    for (int i = 0; i < b.size; ++i) {
        std::size_t base = static_cast<std::size_t>(i) * longest;
        for (std::size_t k = 0; k < encoded[static_cast<std::size_t>(i)].size(); ++k) {
            b.token_ids[base + k] = encoded[static_cast<std::size_t>(i)][k];
            b.attn_mask[base + k] = 1;
        }
    }
    return b;
}

}  // namespace detail

// Argmax with ties broken toward the lowest class index.
inline int argmax_lowest(const float* logits, int k) {
    int best = 0;
    for (int i = 1; i < k; ++i)
        if (logits[i] > logits[best]) best = i;
    return best;
}

// Attaches a K-way linear head on the pooled CLS representation and trains
// ALL parameters (encoder included) with Adam under the usual linear
// warmup/decay schedule. Deterministic given cfg.seed.
inline Classifier finetune(const model::Checkpoint& ckpt,
                           const std::vector<LabeledExample>& train, int num_classes,
                           const vocab::SubwordVocab& voc, const FineTuneConfig& cfg,
                           std::uint64_t vocab_fingerprint = 0) {
    cfg.validate();
    if (num_classes < 2) throw ConfigError("classification needs at least 2 classes");
    if (vocab_fingerprint != 0 && ckpt.vocab_fingerprint != 0 &&
        vocab_fingerprint != ckpt.vocab_fingerprint)
        throw model::VocabMismatch();
    if (voc.size() != ckpt.config.vocab_size)
        throw ConfigError("vocabulary size does not match the checkpoint");
    if (cfg.max_len > static_cast<std::size_t>(ckpt.config.max_positions))
        throw ConfigError("max_len exceeds model max_positions");
    if (train.empty()) throw ConfigError("fine-tuning needs training examples");

    Classifier clf;
    clf.config = ckpt.config;
    clf.params = ckpt.params;
    clf.num_classes = num_classes;
    clf.vocab_fingerprint = ckpt.vocab_fingerprint;
    const int H = clf.config.hidden, K = num_classes;
    clf.head_w.resize(H, K);
    clf.head_b.setZero(K);
    {
        Rng rng = Rng::derive(cfg.seed, "head-init");
        for (Eigen::Index i = 0; i < clf.head_w.size(); ++i)
            clf.head_w.data()[i] = static_cast<float>(rng.next_truncated_normal(cfg.head_init_std));
    }
    if (cfg.epochs == 0) return clf;

    const std::size_t n = train.size();
    const std::int64_t steps_per_epoch =
        static_cast<std::int64_t>((n + static_cast<std::size_t>(cfg.batch_size) - 1) /
                                  static_cast<std::size_t>(cfg.batch_size));
    model::AdamConfig adam =
        model::make_adam(cfg.learning_rate, cfg.epochs * steps_per_epoch, cfg.warmup_fraction);

    auto pviews = model::collect_tensors(clf.params);
    pviews.push_back(model::view_of<float>("classifier_w", clf.head_w, true));
    pviews.push_back(model::view_of<float>("classifier_b", clf.head_b, false));
    model::OptimizerState opt;
    opt.reset(pviews, adam);

    model::Params<float> grads = model::Params<float>::shaped(clf.config);
    model::MatF head_w_grad = model::MatF::Zero(H, K);
    model::VecF head_b_grad = model::VecF::Zero(K);
    auto gviews = model::collect_tensors(grads);
    gviews.push_back(model::view_of<float>("classifier_w", head_w_grad, true));
    gviews.push_back(model::view_of<float>("classifier_b", head_b_grad, false));

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    std::int64_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng = Rng::derive(cfg.seed, "order", static_cast<std::uint64_t>(epoch));
        rng.shuffle(order);
        for (std::size_t at = 0; at < n; at += static_cast<std::size_t>(cfg.batch_size)) {
            ++step;
            std::vector<const LabeledExample*> chunk;
            std::vector<std::int32_t> labels;
            for (std::size_t j = at; j < std::min(n, at + static_cast<std::size_t>(cfg.batch_size));
                 ++j) {
                chunk.push_back(&train[order[j]]);
                labels.push_back(train[order[j]].label);
            }
            model::Batch batch = detail::make_cls_batch(chunk, voc, cfg.max_len);
            model::RunMode mode{true, cfg.seed, step};
            model::ForwardCache<float> cache;
            model::encoder_forward(clf.config, clf.params, batch, mode, cache);
            model::pooler_forward(clf.config, clf.params, batch, cache);
            model::MatF logits =
                (cache.pooled * clf.head_w).rowwise() + clf.head_b.transpose();
            model::MatF probs;
            double loss = model::softmax_cross_entropy(logits, labels, probs);
            if (!std::isfinite(loss))
                throw model::NumericError("non-finite fine-tune loss at step " +
                                          std::to_string(step));

            model::detail::zero_tensors(gviews);
            model::MatF d_logits = probs;
            for (int b = 0; b < batch.size; ++b)
                d_logits(b, labels[static_cast<std::size_t>(b)]) -= 1.0f;
            d_logits /= static_cast<float>(batch.size);
            head_w_grad += cache.pooled.transpose() * d_logits;
            head_b_grad += d_logits.colwise().sum().transpose();
            model::MatF d_pooled = d_logits * clf.head_w.transpose();
            model::MatF dx =
                model::MatF::Zero(cache.encoder_out.rows(), cache.encoder_out.cols());
            model::pooler_backward(clf.config, clf.params, batch, cache, d_pooled, grads, dx);
            model::encoder_backward(clf.config, clf.params, batch, cache, std::move(dx), grads);
            model::adam_step(opt, pviews, gviews);
        }
    }
    return clf;
}

// -------------------------------------------------------------- inference ---

inline std::vector<int> predict(const Classifier& clf, const std::vector<LabeledExample>& examples,
                                const vocab::SubwordVocab& voc, std::size_t max_len = 128,
                                int batch_size = 32) {
    std::vector<int> out;
    std::vector<const LabeledExample*> chunk;
    auto flush = [&] {
        if (chunk.empty()) return;
        model::Batch batch = detail::make_cls_batch(chunk, voc, max_len);
        model::RunMode mode{false, 0, 0};
        model::ForwardCache<float> cache;
        model::encoder_forward(clf.config, clf.params, batch, mode, cache);
        model::pooler_forward(clf.config, clf.params, batch, cache);
        model::MatF logits = (cache.pooled * clf.head_w).rowwise() + clf.head_b.transpose();
        for (int b = 0; b < batch.size; ++b)
            out.push_back(argmax_lowest(logits.row(b).data(), clf.num_classes));
        chunk.clear();
    };
    for (const LabeledExample& e : examples) {
        chunk.push_back(&e);
        if (static_cast<int>(chunk.size()) == batch_size) flush();
    }
    flush();
    return out;
}

// accuracy = correct / total over argmax predictions.
inline double evaluate(const Classifier& clf, const std::vector<LabeledExample>& test,
                       const vocab::SubwordVocab& voc, std::size_t max_len = 128) {
    if (test.empty()) throw EmptyTestSet();
    std::vector<int> preds = predict(clf, test, voc, max_len);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i)
        if (preds[i] == test[i].label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace finlm::ft
