#pragma once

// Pretraining loops: two-phase length schedule, Adam with linear
// warmup/decay, per-step loss log, deterministic resume. All stochasticity
// (batch sampling, dropout, masking) is derived from seeds and the step
// counter, so a resumed run reproduces the uninterrupted loss log.

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "finlm/adam.hpp"
#include "finlm/checkpoint.hpp"
#include "finlm/instances.hpp"
#include "finlm/model.hpp"

namespace finlm::model {

enum class Variant { FromScratch, ContinueFromCheckpoint };

struct PhaseSpec {
    std::size_t max_len = 128;
    std::int64_t steps = 0;
};

struct TrainSchedule {
    PhaseSpec phase1{128, 0};
    PhaseSpec phase2{512, 0};
    int batch_size = 8;
    Variant variant = Variant::FromScratch;

    std::int64_t total_steps() const { return phase1.steps + phase2.steps; }
};

struct LossRow {
    std::int64_t step = 0;
    double mlm_loss = 0.0;
    double nsp_loss = 0.0;
    double lr = 0.0;
};

inline std::string loss_row_tsv(const LossRow& r) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%lld\t%.6f\t%.6f\t%.8f", static_cast<long long>(r.step),
                  r.mlm_loss, r.nsp_loss, r.lr);
    return buf;
}

inline std::string loss_log_tsv(const std::vector<LossRow>& rows) {
    std::string out;
    for (const LossRow& r : rows) {
        out += loss_row_tsv(r);
        out += '\n';
    }
    return out;
}

// 10% warmup by default.
inline AdamConfig make_adam(double peak_lr, std::int64_t total_steps, double warmup_fraction = 0.1) {
    AdamConfig a;
    a.peak_lr = peak_lr;
    a.total_steps = total_steps;
    a.warmup_steps = static_cast<std::int64_t>(warmup_fraction * static_cast<double>(total_steps));
    return a;
}

struct PretrainInputs {
    std::vector<tok::SegmentedDoc> docs;
    const vocab::SubwordVocab* vocab = nullptr;
    std::uint64_t vocab_fingerprint = 0;
    tok::MaskPolicy policy;
    std::uint64_t nsp_seed = 0;
};

struct AutosavePolicy {
    std::string path;
    std::int64_t every = 0;  // steps; 0 disables
};

namespace detail {

inline void zero_tensors(const std::vector<TensorView<float>>& views) {
    for (const TensorView<float>& v : views)
        std::fill(v.data, v.data + v.size, 0.0f);
}

}  // namespace detail

// Runs Phase128 for phase1.steps then Phase512 for phase2.steps. FromScratch
// initializes from truncated normal(0, init_std); pass `resume` to continue
// an interrupted run from its checkpoint.
inline Checkpoint pretrain(const PretrainInputs& in, const ModelConfig& config,
                           const TrainSchedule& schedule, const AdamConfig& adam,
                           std::vector<LossRow>* log = nullptr,
                           const Checkpoint* resume = nullptr,
                           const AutosavePolicy& autosave = {}) {
    ModelConfig cfg = config;
    cfg.validate();
    if (!in.vocab) throw ConfigError("pretrain needs a vocabulary");
    if (cfg.vocab_size != in.vocab->size())
        throw ConfigError("model vocab_size does not match the vocabulary");
    for (const PhaseSpec& ph : {schedule.phase1, schedule.phase2})
        if (ph.steps > 0 && ph.max_len > static_cast<std::size_t>(cfg.max_positions))
            throw ConfigError("phase max_len exceeds model max_positions");
    if (schedule.batch_size < 1) throw ConfigError("batch_size must be positive");

    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.vocab_fingerprint = in.vocab_fingerprint;
    if (resume) {
        if (resume->vocab_fingerprint != in.vocab_fingerprint) throw VocabMismatch();
        ckpt.params = resume->params;
        ckpt.opt = resume->opt;
    } else {
        ckpt.params = init_params<float>(cfg);
        ckpt.opt.reset(collect_tensors(ckpt.params), adam);
    }

    const std::int64_t total = schedule.total_steps();
    std::vector<tok::PretrainInstance> phase_instances[2];
    auto instances_for = [&](int phase) -> const std::vector<tok::PretrainInstance>& {
        std::vector<tok::PretrainInstance>& insts = phase_instances[phase];
        if (insts.empty()) {
            std::size_t max_len = phase == 0 ? schedule.phase1.max_len : schedule.phase2.max_len;
            insts = tok::build_instances(in.docs, *in.vocab, max_len, in.policy, in.nsp_seed);
            if (insts.empty())
                throw ConfigError("corpus yields no pretraining instances (need a document with "
                                  ">= 2 sentences)");
        }
        return insts;
    };

    Params<float> grads = Params<float>::shaped(cfg);
    auto pviews = collect_tensors(ckpt.params);
    auto gviews = collect_tensors(grads);

    for (std::int64_t t = ckpt.opt.step + 1; t <= total; ++t) {
        int phase = t <= schedule.phase1.steps ? 0 : 1;
        const auto& insts = instances_for(phase);

        Rng batch_rng = Rng::derive(cfg.seed, "batch", static_cast<std::uint64_t>(t));
        std::vector<tok::PretrainInstance> picked;
        picked.reserve(static_cast<std::size_t>(schedule.batch_size));
        for (int j = 0; j < schedule.batch_size; ++j)
            picked.push_back(insts[batch_rng.next_below(insts.size())]);
        Batch batch = make_batch(picked, cfg);

        RunMode mode{true, cfg.seed, t};
        ForwardCache<float> cache;
        ForwardResult res;
        try {
            res = forward(cfg, ckpt.params, batch, mode, cache);
        } catch (const NumericError& e) {
            if (!autosave.path.empty())
                throw NumericError(std::string(e.what()) + "; last checkpoint retained at " +
                                   autosave.path);
            throw;
        }
        detail::zero_tensors(gviews);
        backward(cfg, ckpt.params, batch, cache, grads);
        adam_step(ckpt.opt, pviews, gviews);

        if (log) log->push_back({t, res.mlm_loss, res.nsp_loss, lr_at(ckpt.opt.cfg, t)});
        ckpt.global_step = ckpt.opt.step;
        ckpt.phase = phase == 0 ? Phase::Phase128 : Phase::Phase512;
        if (autosave.every > 0 && t % autosave.every == 0 && !autosave.path.empty())
            save_checkpoint(ckpt, autosave.path);
    }

    ckpt.global_step = ckpt.opt.step;
    if (total > 0) ckpt.phase = schedule.phase2.steps > 0 ? Phase::Phase512 : Phase::Phase128;
    return ckpt;
}

// Same loop with parameters taken from `source`, fresh optimizer moments,
// and (by convention) a small peak learning rate; models continued
// domain-adaptive pretraining of an existing model.
inline Checkpoint continue_pretrain(const Checkpoint& source, const PretrainInputs& in,
                                    const TrainSchedule& schedule, double peak_lr = 2e-5,
                                    std::vector<LossRow>* log = nullptr,
                                    const AutosavePolicy& autosave = {}) {
    if (source.vocab_fingerprint != in.vocab_fingerprint) throw VocabMismatch();
    TrainSchedule sched = schedule;
    sched.variant = Variant::ContinueFromCheckpoint;
    AdamConfig adam = make_adam(peak_lr, sched.total_steps());

    // Fresh moments: seed a zero-step checkpoint and resume from it.
    Checkpoint warm;
    warm.config = source.config;
    warm.params = source.params;
    warm.opt.reset(collect_tensors(warm.params), adam);
    warm.global_step = 0;
    warm.vocab_fingerprint = source.vocab_fingerprint;
    return pretrain(in, source.config, sched, adam, log, &warm, autosave);
}

}  // namespace finlm::model
