#pragma once

// Gradient verification: analytic backward vs central finite differences,
// everything in float64. Failures are reported, not thrown.

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "finlm/model.hpp"

namespace finlm::model {

struct GradCheckEntry {
    std::string tensor;
    std::ptrdiff_t index = 0;
    double analytic = 0.0;
    double finite_diff = 0.0;
    double rel_error = 0.0;
};

struct GradCheckReport {
    int samples = 0;
    double tolerance = 0.0;
    double max_rel_error = 0.0;
    double median_rel_error = 0.0;
    bool pass = false;
    std::vector<GradCheckEntry> worst;  // descending by rel_error

    std::string summary() const {
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "grad check: %s  samples=%d  max_rel=%.3e  median_rel=%.3e  tol=%.3e\n",
                      pass ? "PASS" : "FAIL", samples, max_rel_error, median_rel_error, tolerance);
        std::string out = buf;
        for (std::size_t i = 0; i < worst.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "  %-28s[%td]  analytic=%+.6e  fd=%+.6e  rel=%.3e\n",
                          worst[i].tensor.c_str(), worst[i].index, worst[i].analytic,
                          worst[i].finite_diff, worst[i].rel_error);
            out += buf;
        }
        return out;
    }
};

// One deterministic pretraining instance over ids in [5, vocab_size).
inline tok::PretrainInstance synthetic_instance(const ModelConfig& cfg, std::uint64_t seed,
                                                int a_len = 6, int b_len = 4) {
    Rng rng = Rng::derive(seed, "gradcheck-instance");
    auto draw = [&] {
        return vocab::kNumSpecials +
               static_cast<std::int32_t>(
                   rng.next_below(static_cast<std::uint64_t>(cfg.vocab_size - vocab::kNumSpecials)));
    };
    tok::PretrainInstance inst;
    inst.token_ids.push_back(vocab::kClsId);
    inst.segment_ids.push_back(0);
    for (int i = 0; i < a_len; ++i) {
        inst.token_ids.push_back(draw());
        inst.segment_ids.push_back(0);
    }
    inst.token_ids.push_back(vocab::kSepId);
    inst.segment_ids.push_back(0);
    for (int i = 0; i < b_len; ++i) {
        inst.token_ids.push_back(draw());
        inst.segment_ids.push_back(1);
    }
    inst.token_ids.push_back(vocab::kSepId);
    inst.segment_ids.push_back(1);
    // round rule: max(1, round(0.15 * (a_len + b_len)))
    std::size_t n_mask = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(0.15 * (a_len + b_len))));
    for (std::size_t k = 0; k < n_mask; ++k) {
        std::int32_t pos = static_cast<std::int32_t>(1 + k);  // inside segment A
        inst.mlm_positions.push_back(pos);
        inst.mlm_labels.push_back(inst.token_ids[static_cast<std::size_t>(pos)]);
        if (k == 0) inst.token_ids[static_cast<std::size_t>(pos)] = vocab::kMaskId;
    }
    inst.nsp_label = tok::NspLabel::IsNext;
    return inst;
}

// Samples scalar parameters uniformly and compares the analytic gradient to
// (L(p+h) - L(p-h)) / 2h at h = 1e-3. Relative error uses max(|a|,|fd|) as
// the denominator; pairs that are both below 1e-8 count as exact.
inline GradCheckReport grad_check(const ModelConfig& config, double tolerance, int samples = 256,
                                  std::uint64_t seed = 7) {
    ModelConfig cfg = config;
    cfg.validate();
    const double h = 1e-3;

    Params<double> params = init_params<double>(cfg);
    Batch batch = make_batch({synthetic_instance(cfg, seed)}, cfg);
    RunMode mode{true, cfg.seed, 1};

    ForwardCache<double> cache;
    forward(cfg, params, batch, mode, cache);
    Params<double> grads = Params<double>::shaped(cfg);
    backward(cfg, params, batch, cache, grads);

    auto pviews = collect_tensors(params);
    auto gviews = collect_tensors(grads);
    std::ptrdiff_t total = 0;
    for (const auto& v : pviews) total += v.size;

    Rng rng = Rng::derive(seed, "gradcheck-sample");
    GradCheckReport report;
    report.tolerance = tolerance;
    report.samples = samples;
    std::vector<GradCheckEntry> entries;
    for (int s = 0; s < samples; ++s) {
        std::ptrdiff_t flat = static_cast<std::ptrdiff_t>(
            rng.next_below(static_cast<std::uint64_t>(total)));
        std::size_t t = 0;
        while (flat >= pviews[t].size) {
            flat -= pviews[t].size;
            ++t;
        }
        double* slot = pviews[t].data + flat;
        double saved = *slot;
        ForwardCache<double> scratch;
        *slot = saved + h;
        double lp = forward(cfg, params, batch, mode, scratch).total();
        *slot = saved - h;
        double lm = forward(cfg, params, batch, mode, scratch).total();
        *slot = saved;

        GradCheckEntry e;
        e.tensor = pviews[t].name;
        e.index = flat;
        e.analytic = gviews[t].data[flat];
        e.finite_diff = (lp - lm) / (2.0 * h);
        double denom = std::max(std::abs(e.analytic), std::abs(e.finite_diff));
        e.rel_error = denom < 1e-8 ? 0.0 : std::abs(e.analytic - e.finite_diff) / denom;
        entries.push_back(std::move(e));
    }

    std::vector<double> errs;
    for (const GradCheckEntry& e : entries) errs.push_back(e.rel_error);
    std::sort(errs.begin(), errs.end());
    report.max_rel_error = errs.back();
    report.median_rel_error = errs[errs.size() / 2];
    report.pass = report.max_rel_error <= tolerance;
    std::sort(entries.begin(), entries.end(),
              [](const GradCheckEntry& a, const GradCheckEntry& b) {
                  return a.rel_error > b.rel_error;
              });
    entries.resize(std::min<std::size_t>(entries.size(), 10));
    report.worst = std::move(entries);
    return report;
}

// Central finite difference along one parameter; used to confirm that
// parameters with exactly zero analytic gradient are flat directions.
inline double finite_difference_at(const ModelConfig& cfg, Params<double>& params,
                                   const Batch& batch, const std::string& tensor,
                                   std::ptrdiff_t index, std::uint64_t dropout_seed,
                                   double h = 1e-3) {
    RunMode mode{true, dropout_seed, 1};
    for (TensorView<double>& tv : collect_tensors(params)) {
        if (tv.name != tensor) continue;
        double saved = tv.data[index];
        ForwardCache<double> scratch;
        tv.data[index] = saved + h;
        double lp = forward(cfg, params, batch, mode, scratch).total();
        tv.data[index] = saved - h;
        double lm = forward(cfg, params, batch, mode, scratch).total();
        tv.data[index] = saved;
        return (lp - lm) / (2.0 * h);
    }
    throw Error("unknown tensor " + tensor);
}

}  // namespace finlm::model
