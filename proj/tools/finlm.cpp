// finlm command-line entry point: corpus building, vocabulary training,
// pretraining, fine-tuning, benchmarking, and diagnostics.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "finlm/benchmark.hpp"
#include "finlm/config.hpp"
#include "finlm/document.hpp"
#include "finlm/edgar.hpp"
#include "finlm/finetune.hpp"
#include "finlm/gradcheck.hpp"
#include "finlm/http_transport.hpp"
#include "finlm/pretrain.hpp"
#include "finlm/sections.hpp"
#include "finlm/vocab.hpp"

namespace {

using namespace finlm;

struct GlobalOpts {
    std::uint64_t seed = 42;
    unsigned jobs = 1;
    bool print_config = false;
};

std::set<corpus::FormType> parse_forms(const std::string& spec) {
    std::set<corpus::FormType> forms;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        std::size_t comma = spec.find(',', pos);
        if (comma == std::string::npos) comma = spec.size();
        std::string item = trim(spec.substr(pos, comma - pos));
        if (!item.empty()) forms.insert(corpus::form_type_from_name(item));
        pos = comma + 1;
    }
    return forms;
}

void print_manifest(const corpus::CorpusManifest& m) {
    std::printf("%-20s %10s %14s\n", "source", "documents", "token_est");
    for (const corpus::ManifestEntry& e : m.entries)
        std::printf("%-20s %10zu %14zu\n", corpus::source_name(e.source).c_str(),
                    e.document_count, e.token_estimate);
    std::printf("%-20s %10s %14zu\n", "total", "", m.total_tokens);
}

// ----------------------------------------------------------- build-corpus ---

struct BuildCorpusOpts {
    std::string store;
    std::vector<std::string> calls_files;
    std::vector<std::string> reports_files;
    bool fetch = false;
    std::string ciks;
    std::string forms = "10-K,10-Q";
    std::string from_date, to_date;
    std::string agent;
    unsigned rps = 10;
    bool fulltext_fallback = false;
    bool lenient = false;
};

void cmd_build_corpus(const BuildCorpusOpts& o, const GlobalOpts& g) {
    corpus::DocumentStore store(o.store);

    if (o.fetch) {
        if (o.agent.empty())
            throw ConfigError("missing required field 'agent' (EDGAR requires a "
                              "caller-identifying User-Agent)");
        if (o.ciks.empty()) throw ConfigError("missing required field 'cik'");
        corpus::EdgarConfig ec;
        ec.agent = o.agent;
        ec.requests_per_second = o.rps;
        corpus::HttplibTransport transport;
        corpus::SystemClock clock;
        corpus::EdgarClient client(ec, transport, clock);
        std::vector<std::string> ciks;
        std::size_t pos = 0;
        while (pos <= o.ciks.size()) {
            std::size_t comma = o.ciks.find(',', pos);
            if (comma == std::string::npos) comma = o.ciks.size();
            std::string item = trim(o.ciks.substr(pos, comma - pos));
            if (!item.empty()) ciks.push_back(item);
            pos = comma + 1;
        }
        std::size_t fetched = client.fetch(ciks, parse_forms(o.forms),
                                           {o.from_date, o.to_date}, store,
                                           [](const corpus::RawFiling& f) {
                                               std::fprintf(stderr, "fetched %s (%s)\n",
                                                            f.accession_id.c_str(),
                                                            corpus::form_type_name(f.form_type)
                                                                .c_str());
                                           });
        std::fprintf(stderr, "fetched %zu filings\n", fetched);
    }

    // Section every raw filing currently in the store. Filings are
    // independent, so sectioning shards across --jobs workers; documents are
    // appended in accession order regardless.
    std::vector<std::string> raw_ids = store.list_raw();
    if (!raw_ids.empty()) {
        store.reset_docs("corporate_reports");
        std::vector<std::optional<corpus::Document>> sectioned(raw_ids.size());
        unsigned jobs = std::max(1u, std::min<unsigned>(g.jobs, raw_ids.size()));
        std::vector<std::thread> workers;
        for (unsigned w = 0; w < jobs; ++w)
            workers.emplace_back([&, w] {
                for (std::size_t i = w; i < raw_ids.size(); i += jobs)
                    sectioned[i] = corpus::extract_or_fallback(store.load_raw(raw_ids[i]),
                                                               o.fulltext_fallback);
            });
        for (std::thread& t : workers) t.join();
        std::size_t kept = 0, dropped = 0;
        for (std::size_t i = 0; i < raw_ids.size(); ++i) {
            if (sectioned[i]) {
                store.append("corporate_reports", *sectioned[i]);
                ++kept;
            } else {
                std::fprintf(stderr, "no sections found in %s; dropped\n", raw_ids[i].c_str());
                ++dropped;
            }
        }
        std::fprintf(stderr, "sectioned %zu filings (%zu dropped)\n", kept, dropped);
    }

    auto ingest = [&](const std::vector<std::string>& files, corpus::Source source) {
        if (files.empty()) return;
        std::string stem = corpus::source_name(source);
        store.reset_docs(stem);
        for (const std::string& f : files) {
            std::size_t skipped = 0;
            for (const corpus::Document& d :
                 corpus::ingest_plaintext(f, source, !o.lenient, &skipped))
                store.append(stem, d);
            if (skipped)
                std::fprintf(stderr, "%s: skipped %zu malformed records\n", f.c_str(), skipped);
        }
    };
    ingest(o.calls_files, corpus::Source::EarningsCalls);
    ingest(o.reports_files, corpus::Source::AnalystReports);

    corpus::CorpusManifest manifest = corpus::build_manifest(store);
    store.write_manifest(manifest);
    print_manifest(manifest);
}

// ------------------------------------------------------------------ stats ---

void cmd_stats(const std::string& store_dir) {
    corpus::DocumentStore store(store_dir);
    corpus::CorpusManifest fresh = corpus::build_manifest(store);
    print_manifest(fresh);
    if (auto saved = store.read_manifest()) {
        if (saved->to_tsv() != fresh.to_tsv())
            std::fprintf(stderr, "note: manifest.tsv is stale; rerun build-corpus\n");
    }
}

// ------------------------------------------------------------ train-vocab ---

struct TrainVocabOpts {
    std::string store;
    std::int64_t size = 1000;
    std::string casing = "uncased";
    std::string out;
    std::int64_t min_pair_freq = 2;
    std::int64_t max_word_length = 100;
};

void cmd_train_vocab(const TrainVocabOpts& o, const GlobalOpts& g) {
    corpus::DocumentStore store(o.store);
    vocab::VocabTrainConfig cfg;
    cfg.target_size = static_cast<std::int32_t>(o.size);
    cfg.casing = casing_from_name(o.casing);
    cfg.min_pair_frequency = static_cast<std::uint64_t>(o.min_pair_freq);
    cfg.max_word_length = static_cast<std::size_t>(o.max_word_length);
    vocab::SubwordVocab v = vocab::train_vocab(store, cfg, g.jobs);
    vocab::save_vocab(v, o.out);
    std::printf("trained %s vocabulary: %d pieces -> %s\n", o.casing.c_str(), v.size(),
                o.out.c_str());
}

// ----------------------------------------------------------- vocab-overlap ---

void cmd_vocab_overlap(const std::string& a_path, const std::string& b_path) {
    vocab::SubwordVocab a = vocab::import_vocab(a_path);
    vocab::SubwordVocab b = vocab::import_vocab(b_path);
    // Metric named explicitly: Jaccard over non-special pieces.
    std::printf("jaccard_overlap\t%.4f\n", vocab::vocab_overlap(a, b));
}

// --------------------------------------------------------------- pretrain ---

struct PretrainOpts {
    std::string store;
    std::string vocab_path;
    std::string casing = "uncased";
    std::string out;
    std::string loss_log;
    std::string variant = "scratch";
    std::string init_ckpt;
    std::string resume_ckpt;
    int layers = 2, hidden = 64, heads = 2, ffn = 256, max_positions = 512;
    double dropout = 0.1;
    double init_std = 0.02;
    std::int64_t steps1 = 0, steps2 = 0;
    std::int64_t len1 = 128, len2 = 512;
    int batch_size = 8;
    double lr = 1e-4;
    double warmup_fraction = 0.1;
    std::int64_t autosave_every = 0;
    std::string dump_instances;
};

void cmd_pretrain(const PretrainOpts& o, const GlobalOpts& g) {
    corpus::DocumentStore store(o.store);
    vocab::SubwordVocab voc = vocab::import_vocab(o.vocab_path, casing_from_name(o.casing));

    model::PretrainInputs in;
    in.docs = tok::segment_store(store);
    in.vocab = &voc;
    in.vocab_fingerprint = file_fingerprint(o.vocab_path);
    in.policy.seed = mix_seed(g.seed, fnv1a64("mask"));
    in.nsp_seed = mix_seed(g.seed, fnv1a64("nsp"));

    model::TrainSchedule sched;
    sched.phase1 = {static_cast<std::size_t>(o.len1), o.steps1};
    sched.phase2 = {static_cast<std::size_t>(o.len2), o.steps2};
    sched.batch_size = o.batch_size;

    model::AutosavePolicy autosave;
    if (o.autosave_every > 0) autosave = {o.out, o.autosave_every};

    if (!o.dump_instances.empty()) {
        for (int phase = 0; phase < 2; ++phase) {
            const auto& ph = phase == 0 ? sched.phase1 : sched.phase2;
            if (ph.steps <= 0) continue;
            auto insts = tok::build_instances(in.docs, voc, ph.max_len, in.policy, in.nsp_seed);
            tok::write_instances(insts, o.dump_instances + ".phase" + std::to_string(phase + 1) +
                                            ".flmi");
        }
    }

    std::vector<model::LossRow> log;
    model::Checkpoint ckpt;
    if (o.variant == "continue") {
        if (o.init_ckpt.empty())
            throw ConfigError("missing required field 'init' (continue needs a source checkpoint)");
        model::Checkpoint source = model::load_checkpoint(o.init_ckpt);
        ckpt = model::continue_pretrain(source, in, sched, o.lr, &log, autosave);
    } else if (o.variant == "scratch") {
        model::ModelConfig cfg;
        cfg.layers = o.layers;
        cfg.hidden = o.hidden;
        cfg.heads = o.heads;
        cfg.ffn = o.ffn;
        cfg.vocab_size = voc.size();
        cfg.max_positions = o.max_positions;
        cfg.dropout = o.dropout;
        cfg.init_std = o.init_std;
        cfg.seed = g.seed;
        model::AdamConfig adam = model::make_adam(o.lr, sched.total_steps(), o.warmup_fraction);
        if (!o.resume_ckpt.empty()) {
            model::Checkpoint from = model::load_checkpoint(o.resume_ckpt);
            ckpt = model::pretrain(in, from.config, sched, adam, &log, &from, autosave);
        } else {
            ckpt = model::pretrain(in, cfg, sched, adam, &log, nullptr, autosave);
        }
    } else {
        throw ConfigError("variant must be scratch or continue");
    }

    model::save_checkpoint(ckpt, o.out);
    if (!o.loss_log.empty()) write_file(o.loss_log, model::loss_log_tsv(log));
    double last_mlm = log.empty() ? 0.0 : log.back().mlm_loss;
    std::printf("pretrained %lld steps (%s), final mlm_loss %.4f -> %s\n",
                static_cast<long long>(ckpt.global_step),
                model::phase_name(ckpt.phase).c_str(), last_mlm, o.out.c_str());
}

// --------------------------------------------------------------- finetune ---

struct FinetuneOpts {
    std::string ckpt;
    std::string vocab_path;
    std::string casing = "uncased";
    std::string task_path;
    std::string out_report;
    std::string save_ckpt;
    std::string name = "model";
    int epochs = 4;
    double lr = 2e-5;
    int batch_size = 16;
    std::int64_t max_len = 128;
    double head_init_std = 0.02;
    double train_fraction = 0.9;
    int repetitions = 10;
};

void cmd_finetune(const FinetuneOpts& o, const GlobalOpts& g) {
    model::Checkpoint ckpt = model::load_checkpoint(o.ckpt);
    vocab::SubwordVocab voc = vocab::import_vocab(o.vocab_path, casing_from_name(o.casing));
    std::uint64_t fp = file_fingerprint(o.vocab_path);
    ft::TaskSpec task = ft::load_task(o.task_path);
    if (task.dropped_zero_scores)
        std::fprintf(stderr, "dropped %zu zero-score records\n", task.dropped_zero_scores);

    ft::FineTuneConfig cfg;
    cfg.epochs = o.epochs;
    cfg.learning_rate = o.lr;
    cfg.batch_size = o.batch_size;
    cfg.max_len = static_cast<std::size_t>(o.max_len);
    cfg.head_init_std = o.head_init_std;
    cfg.seed = g.seed;

    ft::SplitPlan plan{o.train_fraction, o.repetitions, g.seed};
    ft::BenchmarkEntry entry{o.name, "", &ckpt, &voc, fp};
    ft::EvalReport report = ft::run_benchmark({entry}, {task}, plan, cfg);
    std::string tsv = report.to_tsv();
    std::fputs(tsv.c_str(), stdout);
    if (!o.out_report.empty()) write_file(o.out_report, tsv);

    if (!o.save_ckpt.empty()) {
        // Final model trained on the full dataset, stored as a FineTuned
        // checkpoint with the head under extra tensors.
        ft::Classifier clf = ft::finetune(ckpt, task.examples, task.num_classes(), voc, cfg, fp);
        model::Checkpoint out;
        out.config = clf.config;
        out.params = clf.params;
        out.phase = model::Phase::FineTuned;
        out.vocab_fingerprint = fp;
        out.extra.emplace("classifier_w", clf.head_w);
        model::MatF head_b(clf.head_b.size(), 1);
        head_b.col(0) = clf.head_b;
        out.extra.emplace("classifier_b", head_b);
        model::save_checkpoint(out, o.save_ckpt);
    }
}

// -------------------------------------------------------------- benchmark ---

void cmd_benchmark(const std::string& plan_path, const std::string& out_prefix,
                   const GlobalOpts& g) {
    KeyValueConfig plan = KeyValueConfig::from_file(plan_path);

    std::vector<std::unique_ptr<model::Checkpoint>> ckpts;
    std::vector<std::unique_ptr<vocab::SubwordVocab>> vocabs;
    std::vector<ft::BenchmarkEntry> entries;
    for (const std::string& variant : plan.names_under("checkpoint")) {
        std::string base = "checkpoint." + variant;
        std::string ckpt_path = plan.require(base);
        std::string vocab_path = plan.require(base + ".vocab");
        Casing casing = casing_from_name(plan.get_or(base + ".casing", "uncased"));
        ckpts.push_back(std::make_unique<model::Checkpoint>(model::load_checkpoint(ckpt_path)));
        vocabs.push_back(
            std::make_unique<vocab::SubwordVocab>(vocab::import_vocab(vocab_path, casing)));
        entries.push_back({variant, plan.get_or(base + ".corpus", ""), ckpts.back().get(),
                           vocabs.back().get(), file_fingerprint(vocab_path)});
    }
    if (entries.empty()) throw ConfigError("missing required field 'checkpoint.<name>'");

    std::vector<ft::TaskSpec> tasks;
    for (const std::string& name : plan.names_under("task"))
        tasks.push_back(ft::load_task(plan.require("task." + name)));
    if (tasks.empty()) throw ConfigError("missing required field 'task.<name>'");

    ft::SplitPlan split_plan;
    split_plan.train_fraction = plan.get_double("train_fraction", 0.9);
    split_plan.repetitions = static_cast<int>(plan.get_int("repetitions", 10));
    split_plan.base_seed = static_cast<std::uint64_t>(plan.get_int("base_seed",
                                                                   static_cast<std::int64_t>(g.seed)));

    ft::FineTuneConfig cfg;
    cfg.epochs = static_cast<int>(plan.get_int("epochs", 4));
    cfg.learning_rate = plan.get_double("lr", 2e-5);
    cfg.batch_size = static_cast<int>(plan.get_int("batch_size", 16));
    cfg.max_len = static_cast<std::size_t>(plan.get_int("max_len", 128));
    cfg.head_init_std = plan.get_double("head_init_std", 0.02);
    cfg.seed = static_cast<std::uint64_t>(plan.get_int("seed", static_cast<std::int64_t>(g.seed)));

    ft::EvalReport report = ft::run_benchmark(entries, tasks, split_plan, cfg);
    std::string variant_table = ft::render_variant_table(report);
    std::fputs(variant_table.c_str(), stdout);
    if (!out_prefix.empty()) {
        write_file(out_prefix + ".tsv", report.to_tsv());
        write_file(out_prefix + ".table_variants.txt", variant_table);
        if (report.has_corpus_tags())
            write_file(out_prefix + ".table_corpus.txt", ft::render_corpus_table(report));
    }
}

// --------------------------------------------------------------- gradcheck ---

struct GradcheckOpts {
    double tol = 1e-2;
    int samples = 256;
    int layers = 1, hidden = 8, heads = 2, ffn = 32, vocab_size = 20;
    double dropout = 0.0;
};

int cmd_gradcheck(const GradcheckOpts& o, const GlobalOpts& g) {
    model::ModelConfig cfg;
    cfg.layers = o.layers;
    cfg.hidden = o.hidden;
    cfg.heads = o.heads;
    cfg.ffn = o.ffn;
    cfg.vocab_size = o.vocab_size;
    cfg.max_positions = 16;
    cfg.dropout = o.dropout;
    cfg.seed = g.seed;
    model::GradCheckReport report = model::grad_check(cfg, o.tol, o.samples, g.seed);
    std::fputs(report.summary().c_str(), stdout);
    return report.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"finlm: domain-adaptive BERT pretraining for finance, desk scale"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value config file; command-line flags win");
    app.fallthrough();

    GlobalOpts g;
    app.add_option("--seed", g.seed, "master seed; all randomness derives from it")
        ->capture_default_str();
    app.add_option("--jobs", g.jobs, "worker threads for parallel stages")->capture_default_str();
    app.add_flag("--print-config", g.print_config, "print resolved configuration, do nothing");

    BuildCorpusOpts bc;
    CLI::App* build = app.add_subcommand("build-corpus", "fetch/ingest text into a document store");
    build->add_option("--store", bc.store, "document store directory")->required();
    build->add_option("--calls", bc.calls_files, "earnings-call record files (finlm-docs/1)");
    build->add_option("--reports", bc.reports_files, "analyst-report record files (finlm-docs/1)");
    build->add_flag("--fetch", bc.fetch, "fetch filings from EDGAR");
    build->add_option("--cik", bc.ciks, "comma-separated CIK list");
    build->add_option("--forms", bc.forms, "comma-separated form types")->capture_default_str();
    build->add_option("--from", bc.from_date, "period start, ISO-8601");
    build->add_option("--to", bc.to_date, "period end, ISO-8601");
    build->add_option("--agent", bc.agent, "EDGAR User-Agent, e.g. 'name email'");
    build->add_option("--rps", bc.rps, "request-rate ceiling per second")->capture_default_str();
    build->add_flag("--fulltext-fallback", bc.fulltext_fallback,
                    "keep filings without locatable items as full text");
    build->add_flag("--lenient", bc.lenient, "skip malformed records instead of aborting");

    std::string stats_store;
    CLI::App* stats = app.add_subcommand("stats", "print corpus statistics for a store");
    stats->add_option("--store", stats_store, "document store directory")->required();

    TrainVocabOpts tv;
    CLI::App* train_vocab = app.add_subcommand("train-vocab", "train a WordPiece vocabulary");
    train_vocab->add_option("--store", tv.store, "document store directory")->required();
    train_vocab->add_option("--size", tv.size, "target vocabulary size")->capture_default_str();
    train_vocab->add_option("--casing", tv.casing, "cased|uncased")->capture_default_str();
    train_vocab->add_option("--out", tv.out, "output .vocab file")->required();
    train_vocab->add_option("--min-pair-freq", tv.min_pair_freq, "minimum merge frequency")
        ->capture_default_str();
    train_vocab->add_option("--max-word-length", tv.max_word_length,
                            "words longer than this are skipped")
        ->capture_default_str();

    std::string ov_a, ov_b;
    CLI::App* overlap = app.add_subcommand("vocab-overlap", "Jaccard overlap of two vocabularies");
    overlap->add_option("--a", ov_a, "first .vocab file")->required();
    overlap->add_option("--b", ov_b, "second .vocab file")->required();

    PretrainOpts pt;
    CLI::App* pretrain = app.add_subcommand("pretrain", "MLM+NSP pretraining");
    pretrain->add_option("--store", pt.store, "document store directory")->required();
    pretrain->add_option("--vocab", pt.vocab_path, "vocabulary file")->required();
    pretrain->add_option("--casing", pt.casing, "cased|uncased")->capture_default_str();
    pretrain->add_option("--out", pt.out, "output checkpoint")->required();
    pretrain->add_option("--loss-log", pt.loss_log, "loss log TSV path");
    pretrain->add_option("--variant", pt.variant, "scratch|continue")->capture_default_str();
    pretrain->add_option("--init", pt.init_ckpt, "source checkpoint for --variant continue");
    pretrain->add_option("--resume", pt.resume_ckpt, "resume an interrupted scratch run");
    pretrain->add_option("--layers", pt.layers)->capture_default_str();
    pretrain->add_option("--hidden", pt.hidden)->capture_default_str();
    pretrain->add_option("--heads", pt.heads)->capture_default_str();
    pretrain->add_option("--ffn", pt.ffn)->capture_default_str();
    pretrain->add_option("--max-positions", pt.max_positions)->capture_default_str();
    pretrain->add_option("--dropout", pt.dropout)->capture_default_str();
    pretrain->add_option("--init-std", pt.init_std)->capture_default_str();
    pretrain->add_option("--steps1", pt.steps1, "phase-1 steps (max_len --len1)")
        ->capture_default_str();
    pretrain->add_option("--steps2", pt.steps2, "phase-2 steps (max_len --len2)")
        ->capture_default_str();
    pretrain->add_option("--len1", pt.len1)->capture_default_str();
    pretrain->add_option("--len2", pt.len2)->capture_default_str();
    pretrain->add_option("--batch-size", pt.batch_size)->capture_default_str();
    pretrain->add_option("--lr", pt.lr, "peak learning rate")->capture_default_str();
    pretrain->add_option("--warmup-frac", pt.warmup_fraction)->capture_default_str();
    pretrain->add_option("--autosave-every", pt.autosave_every, "checkpoint every N steps");
    pretrain->add_option("--dump-instances", pt.dump_instances,
                         "also write per-phase instance files (FLMI1) under this prefix");

    FinetuneOpts ftn;
    CLI::App* finetune = app.add_subcommand("finetune", "fine-tune + repeated-split evaluation");
    finetune->add_option("--ckpt", ftn.ckpt, "pretrained checkpoint")->required();
    finetune->add_option("--vocab", ftn.vocab_path, "vocabulary file")->required();
    finetune->add_option("--casing", ftn.casing, "cased|uncased")->capture_default_str();
    finetune->add_option("--task", ftn.task_path, "labeled task file (finlm-task/1)")->required();
    finetune->add_option("--out", ftn.out_report, "report TSV path");
    finetune->add_option("--save-ckpt", ftn.save_ckpt, "save a FineTuned checkpoint");
    finetune->add_option("--name", ftn.name, "variant name in the report")->capture_default_str();
    finetune->add_option("--epochs", ftn.epochs)->capture_default_str();
    finetune->add_option("--lr", ftn.lr)->capture_default_str();
    finetune->add_option("--batch-size", ftn.batch_size)->capture_default_str();
    finetune->add_option("--max-len", ftn.max_len)->capture_default_str();
    finetune->add_option("--head-init-std", ftn.head_init_std)->capture_default_str();
    finetune->add_option("--train-fraction", ftn.train_fraction)->capture_default_str();
    finetune->add_option("--repetitions", ftn.repetitions)->capture_default_str();

    std::string plan_path, bench_out;
    CLI::App* benchmark = app.add_subcommand("benchmark", "model x task evaluation matrix");
    benchmark->add_option("--plan", plan_path, "benchmark plan file (key=value)")->required();
    benchmark->add_option("--out", bench_out, "output path prefix");

    GradcheckOpts gc;
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "verify gradients vs finite differences");
    gradcheck->add_option("--tol", gc.tol, "max relative error tolerance")->capture_default_str();
    gradcheck->add_option("--samples", gc.samples)->capture_default_str();
    gradcheck->add_option("--layers", gc.layers)->capture_default_str();
    gradcheck->add_option("--hidden", gc.hidden)->capture_default_str();
    gradcheck->add_option("--heads", gc.heads)->capture_default_str();
    gradcheck->add_option("--ffn", gc.ffn)->capture_default_str();
    gradcheck->add_option("--vocab-size", gc.vocab_size)->capture_default_str();
    gradcheck->add_option("--dropout", gc.dropout)->capture_default_str();

    try {
        app.parse(argc, argv);
        if (g.print_config) {
            std::cout << app.config_to_str(true, false);
            return 0;
        }
        if (*build) cmd_build_corpus(bc, g);
        else if (*stats) cmd_stats(stats_store);
        else if (*train_vocab) cmd_train_vocab(tv, g);
        else if (*overlap) cmd_vocab_overlap(ov_a, ov_b);
        else if (*pretrain) cmd_pretrain(pt, g);
        else if (*finetune) cmd_finetune(ftn, g);
        else if (*benchmark) cmd_benchmark(plan_path, bench_out, g);
        else if (*gradcheck) return cmd_gradcheck(gc, g);
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
