#pragma once

// Benchmark harness: full cross product of model variants and sentiment
// tasks under the repeated-split protocol, with per-split accuracies
// retained. Emits a TSV matrix and rendered text tables shaped like the
// model-comparison and corpus-ablation tables.

#include <algorithm>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "finlm/finetune.hpp"

namespace finlm::ft {

struct EvalRow {
    std::string variant;
    std::string corpus;  // pretraining-corpus tag; empty unless ablating
    std::string task;
    std::vector<double> split_accuracies;
    double mean = 0.0;
};

struct EvalReport {
    std::vector<EvalRow> rows;

    bool has_corpus_tags() const {
        for (const EvalRow& r : rows)
            if (!r.corpus.empty()) return true;
        return false;
    }

    std::string to_tsv() const {
        std::string out = "variant\tcorpus\ttask\tmean";
        std::size_t reps = 0;
        for (const EvalRow& r : rows) reps = std::max(reps, r.split_accuracies.size());
        for (std::size_t i = 0; i < reps; ++i) out += "\tsplit" + std::to_string(i);
        out += '\n';
        char buf[32];
        for (const EvalRow& r : rows) {
            out += r.variant + '\t' + r.corpus + '\t' + r.task;
            std::snprintf(buf, sizeof(buf), "\t%.4f", r.mean);
            out += buf;
            for (double a : r.split_accuracies) {
                std::snprintf(buf, sizeof(buf), "\t%.4f", a);
                out += buf;
            }
            out += '\n';
        }
        return out;
    }
};

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

namespace detail {

inline std::vector<std::string> ordered_unique(const std::vector<std::string>& values) {
    std::vector<std::string> out;
    for (const std::string& v : values)
        if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    return out;
}

inline std::string pad_to(const std::string& s, std::size_t width) {
    return s + std::string(s.size() < width ? width - s.size() : 0, ' ');
}

}  // namespace detail

// Rows = tasks, columns = model variants (plan order), cells = mean accuracy.
inline std::string render_variant_table(const EvalReport& report) {
    std::vector<std::string> variants, tasks;
    for (const EvalRow& r : report.rows) {
        if (!r.corpus.empty()) continue;
        variants.push_back(r.variant);
        tasks.push_back(r.task);
    }
    variants = detail::ordered_unique(variants);
    tasks = detail::ordered_unique(tasks);

    std::size_t label_w = 0;
    for (const std::string& t : tasks) label_w = std::max(label_w, t.size());
    label_w = std::max<std::size_t>(label_w + 2, 8);

    std::string out = std::string(label_w, ' ');
    std::vector<std::size_t> col_w;
    for (const std::string& v : variants) {
        std::size_t w = std::max<std::size_t>(v.size(), 5) + 2;
        col_w.push_back(w);
        out += detail::pad_to(v, w);
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';

    char buf[16];
    for (const std::string& t : tasks) {
        std::string line = detail::pad_to(t, label_w);
        for (std::size_t c = 0; c < variants.size(); ++c) {
            std::string cell = "-";
            for (const EvalRow& r : report.rows)
                if (r.corpus.empty() && r.variant == variants[c] && r.task == t) {
                    std::snprintf(buf, sizeof(buf), "%.3f", r.mean);
                    cell = buf;
                }
            line += detail::pad_to(cell, col_w[c]);
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out += line;
        out += '\n';
    }
    return out;
}

// Row groups = variant (vocab family) x task, columns = pretraining corpus.
inline std::string render_corpus_table(const EvalReport& report) {
    std::vector<std::string> variants, tasks, corpora;
    for (const EvalRow& r : report.rows) {
        if (r.corpus.empty()) continue;
        variants.push_back(r.variant);
        tasks.push_back(r.task);
        corpora.push_back(r.corpus);
    }
    variants = detail::ordered_unique(variants);
    tasks = detail::ordered_unique(tasks);
    corpora = detail::ordered_unique(corpora);

    std::size_t var_w = 0, task_w = 0;
    for (const std::string& v : variants) var_w = std::max(var_w, v.size());
    for (const std::string& t : tasks) task_w = std::max(task_w, t.size());
    var_w += 2;
    task_w = std::max<std::size_t>(task_w + 2, 8);

    std::string out = std::string(var_w + task_w, ' ');
    std::vector<std::size_t> col_w;
    for (const std::string& c : corpora) {
        std::size_t w = std::max<std::size_t>(c.size(), 5) + 2;
        col_w.push_back(w);
        out += detail::pad_to(c, w);
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';

    char buf[16];
    for (const std::string& v : variants) {
        for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
            std::string line = detail::pad_to(ti == 0 ? v : "", var_w);
            line += detail::pad_to(tasks[ti], task_w);
            for (std::size_t c = 0; c < corpora.size(); ++c) {
                std::string cell = "-";
                for (const EvalRow& r : report.rows)
                    if (r.variant == v && r.task == tasks[ti] && r.corpus == corpora[c]) {
                        std::snprintf(buf, sizeof(buf), "%.3f", r.mean);
                        cell = buf;
                    }
                line += detail::pad_to(cell, col_w[c]);
            }
            while (!line.empty() && line.back() == ' ') line.pop_back();
            out += line;
            out += '\n';
        }
    }
    return out;
}

// ------------------------------------------------------------- benchmark ---

struct BenchmarkEntry {
    std::string variant;
    std::string corpus;  // optional pretraining-corpus tag (ablation runs)
    const model::Checkpoint* checkpoint = nullptr;
    const vocab::SubwordVocab* vocab = nullptr;
    std::uint64_t vocab_fingerprint = 0;
};

// Full cross product of entries and tasks; each repetition of the split
// protocol fine-tunes a fresh copy from the entry's checkpoint.
inline EvalReport run_benchmark(const std::vector<BenchmarkEntry>& entries,
                                const std::vector<TaskSpec>& tasks, const SplitPlan& plan,
                                const FineTuneConfig& cfg) {
    EvalReport report;
    for (const BenchmarkEntry& entry : entries) {
        if (!entry.checkpoint || !entry.vocab) throw ConfigError("benchmark entry incomplete");
        for (const TaskSpec& task : tasks) {
            std::vector<Split> splits = make_splits(task.examples.size(), plan);
            EvalRow row;
            row.variant = entry.variant;
            row.corpus = entry.corpus;
            row.task = task_name_str(task.name);
            for (std::size_t r = 0; r < splits.size(); ++r) {
                std::vector<LabeledExample> train, test;
                for (std::size_t i : splits[r].train_ids) train.push_back(task.examples[i]);
                for (std::size_t i : splits[r].test_ids) test.push_back(task.examples[i]);
                FineTuneConfig rep_cfg = cfg;
                rep_cfg.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(r));
                Classifier clf = finetune(*entry.checkpoint, train, task.num_classes(),
                                          *entry.vocab, rep_cfg, entry.vocab_fingerprint);
                row.split_accuracies.push_back(
                    evaluate(clf, test, *entry.vocab, rep_cfg.max_len));
            }
            row.mean = mean_of(row.split_accuracies);
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

}  // namespace finlm::ft
