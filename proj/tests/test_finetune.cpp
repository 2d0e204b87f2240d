#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <set>

#include "finlm/benchmark.hpp"
#include "finlm/finetune.hpp"

using namespace finlm;
using namespace finlm::ft;
namespace fs = std::filesystem;

namespace {

std::string fixtures_dir() {
    const char* env = std::getenv("FINLM_FIXTURES");
    REQUIRE(env != nullptr);
    return env;
}

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / name;
}

vocab::SubwordVocab letters_vocab(const std::string& chars) {
    vocab::SubwordVocab v = vocab::SubwordVocab::with_specials(Casing::Uncased);
    for (char c : chars) {
        v.add(std::string(1, c));
        v.add("##" + std::string(1, c));
    }
    return v;
}

model::Checkpoint init_checkpoint(const vocab::SubwordVocab& v, std::uint64_t fp,
                                  std::uint64_t seed = 21) {
    model::ModelConfig cfg;
    cfg.layers = 1;
    cfg.hidden = 16;
    cfg.heads = 2;
    cfg.ffn = 32;
    cfg.vocab_size = v.size();
    cfg.max_positions = 32;
    cfg.dropout = 0.1;
    cfg.seed = seed;
    model::Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.params = model::init_params<float>(cfg);
    ckpt.vocab_fingerprint = fp;
    return ckpt;
}

// Keyword-separable synthetic task: the class-k keyword letter appears three
// times in every class-k sentence, fillers are shared.
std::vector<LabeledExample> separable_examples(int n, int num_classes, std::uint64_t seed,
                                               bool shuffle_labels = false) {
    const std::string fillers = "abcdefgh";
    const std::string keywords = "uvw";
    Rng rng(seed);
    std::vector<LabeledExample> out;
    for (int i = 0; i < n; ++i) {
        int label = i % num_classes;
        std::string text;
        std::size_t words = 4 + rng.next_below(4);
        for (std::size_t w = 0; w < words; ++w) {
            text += fillers[rng.next_below(fillers.size())];
            text += ' ';
        }
        for (int k = 0; k < 3; ++k) {
            text += keywords[static_cast<std::size_t>(label)];
            text += ' ';
        }
        out.push_back({text, label});
    }
    if (shuffle_labels) {
        for (LabeledExample& e : out) e.label = static_cast<int>(rng.next_below(
            static_cast<std::uint64_t>(num_classes)));
    }
    return out;
}

}  // namespace

// ------------------------------------------------------------------ tasks ---

TEST_CASE("fiqa scores convert by sign and zeros are dropped") {
    auto path = temp_file("finlm_fiqa.tsv");
    write_file(path.string(),
               "finlm-task/1 fiqa\n"
               "market rallied hard\t0.37\n"
               "neutral mention of earnings\t0.0\n"
               "guidance cut sharply\t-0.8\n"
               "mild optimism\t0.05\n");
    TaskSpec task = load_task(path.string());
    REQUIRE(task.name == TaskName::FiQA);
    REQUIRE(task.num_classes() == 2);
    REQUIRE(task.examples.size() == 3);
    REQUIRE(task.dropped_zero_scores == 1);
    REQUIRE(task.examples[0].label == 0);  // positive
    REQUIRE(task.examples[1].label == 1);  // negative
    REQUIRE(task.examples[2].label == 0);
}

TEST_CASE("fiqa scores outside [-1,1] are format errors with line numbers") {
    auto path = temp_file("finlm_fiqa_bad.tsv");
    write_file(path.string(),
               "finlm-task/1 fiqa\n"
               "ok sentence\t0.4\n"
               "broken sentence\t1.7\n");
    try {
        load_task(path.string());
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        REQUIRE(e.line() == 3);
    }
}

TEST_CASE("unknown labels are format errors with line numbers") {
    auto path = temp_file("finlm_pb_bad.tsv");
    write_file(path.string(),
               "finlm-task/1 phrasebank\n"
               "margins rose\tpositive\n"
               "margins fell\tbearish\n");
    try {
        load_task(path.string());
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        REQUIRE(e.line() == 3);
    }
}

TEST_CASE("analysttone reference file loads with the documented class counts") {
    // synthetic stand-in with the reference composition: 3,580 positive,
    // 1,830 negative, 4,590 neutral = 10,000 sentences
    auto path = temp_file("finlm_analysttone.tsv");
    std::string data = "finlm-task/1 analysttone\n";
    auto emit = [&](int n, const std::string& label) {
        for (int i = 0; i < n; ++i)
            data += "analyst sentence " + std::to_string(i) + " " + label + "\t" + label + "\n";
    };
    emit(3580, "positive");
    emit(1830, "negative");
    emit(4590, "neutral");
    write_file(path.string(), data);

    TaskSpec task = load_task(path.string());
    REQUIRE(task.examples.size() == 10000);
    auto counts = task.class_counts();
    REQUIRE(counts[0] == 3580);  // positive
    REQUIRE(counts[1] == 4590);  // neutral
    REQUIRE(counts[2] == 1830);  // negative
}

TEST_CASE("task files round-trip through save_task") {
    TaskSpec task;
    task.name = TaskName::PhraseBank;
    task.label_names = {"positive", "neutral", "negative"};
    for (int i = 0; i < 12; ++i)
        task.examples.push_back({"sentence number " + std::to_string(i), i % 3});
    auto path = temp_file("finlm_roundtrip.tsv");
    save_task(task, path.string());
    TaskSpec back = load_task(path.string());
    REQUIRE(back.examples.size() == task.examples.size());
    for (std::size_t i = 0; i < task.examples.size(); ++i) {
        REQUIRE(back.examples[i].text == task.examples[i].text);
        REQUIRE(back.examples[i].label == task.examples[i].label);
    }
}

// ----------------------------------------------------------------- splits ---

TEST_CASE("splits have the documented sizes and are disjoint/exhaustive") {
    SplitPlan plan{0.9, 10, 77};
    auto splits = make_splits(100, plan);
    REQUIRE(splits.size() == 10);
    for (const Split& s : splits) {
        REQUIRE(s.test_ids.size() == 10);
        REQUIRE(s.train_ids.size() == 90);
        std::set<std::size_t> all(s.train_ids.begin(), s.train_ids.end());
        for (std::size_t id : s.test_ids) REQUIRE(all.insert(id).second);
        REQUIRE(all.size() == 100);
    }
}

TEST_CASE("splits are deterministic in the base seed") {
    SplitPlan plan{0.9, 4, 123};
    auto a = make_splits(57, plan);
    auto b = make_splits(57, plan);
    for (std::size_t r = 0; r < a.size(); ++r) {
        REQUIRE(a[r].train_ids == b[r].train_ids);
        REQUIRE(a[r].test_ids == b[r].test_ids);
    }
}

TEST_CASE("different repetitions produce different permutations") {
    SplitPlan plan{0.9, 2, 9};
    auto splits = make_splits(100, plan);
    REQUIRE(splits[0].test_ids != splits[1].test_ids);
}

TEST_CASE("the protocol needs at least 10 examples") {
    SplitPlan plan;
    REQUIRE_THROWS_AS(make_splits(9, plan), ConfigError);
}

// -------------------------------------------------------------- fine-tune ---

TEST_CASE("a separable two-keyword task trains to >= 0.99 accuracy") {
    vocab::SubwordVocab v = letters_vocab("abcdefghuvw");
    model::Checkpoint ckpt = init_checkpoint(v, 404);
    auto train = separable_examples(200, 2, 31);
    FineTuneConfig cfg;
    cfg.epochs = 10;
    cfg.learning_rate = 8e-4;
    cfg.batch_size = 16;
    cfg.max_len = 24;
    cfg.seed = 5;
    Classifier clf = finetune(ckpt, train, 2, v, cfg, 404);
    double acc = evaluate(clf, train, v, cfg.max_len);
    INFO("training accuracy " << acc);
    REQUIRE(acc >= 0.99);
}

TEST_CASE("one-class label sets are rejected") {
    vocab::SubwordVocab v = letters_vocab("ab");
    model::Checkpoint ckpt = init_checkpoint(v, 1);
    std::vector<LabeledExample> train = {{"a b", 0}, {"b a", 0}};
    FineTuneConfig cfg;
    REQUIRE_THROWS_AS(finetune(ckpt, train, 1, v, cfg), ConfigError);
}

TEST_CASE("an untrained head scores chance on label-shuffled data") {
    vocab::SubwordVocab v = letters_vocab("abcdefghuvw");
    model::Checkpoint ckpt = init_checkpoint(v, 2);
    auto data = separable_examples(1500, 3, 47, /*shuffle_labels=*/true);
    FineTuneConfig cfg;
    cfg.epochs = 0;
    cfg.max_len = 24;
    cfg.seed = 13;
    Classifier clf = finetune(ckpt, data, 3, v, cfg, 2);
    double acc = evaluate(clf, data, v, cfg.max_len);
    double sd = std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / 1500.0);
    INFO("chance-level accuracy " << acc << " (3sd = " << 3 * sd << ")");
    REQUIRE(std::abs(acc - 1.0 / 3.0) <= 3.0 * sd);
}

TEST_CASE("fine-tuning is deterministic given the seed") {
    vocab::SubwordVocab v = letters_vocab("abcdefghuvw");
    model::Checkpoint ckpt = init_checkpoint(v, 3);
    auto train = separable_examples(60, 2, 8);
    auto test = separable_examples(40, 2, 9);
    FineTuneConfig cfg;
    cfg.epochs = 2;
    cfg.learning_rate = 5e-4;
    cfg.max_len = 24;
    cfg.seed = 99;
    double a = evaluate(finetune(ckpt, train, 2, v, cfg, 3), test, v, cfg.max_len);
    double b = evaluate(finetune(ckpt, train, 2, v, cfg, 3), test, v, cfg.max_len);
    REQUIRE(a == b);
}

TEST_CASE("vocab fingerprint mismatches are rejected") {
    vocab::SubwordVocab v = letters_vocab("ab");
    model::Checkpoint ckpt = init_checkpoint(v, 1000);
    std::vector<LabeledExample> train = {{"a b", 0}, {"b a", 1}};
    FineTuneConfig cfg;
    REQUIRE_THROWS_AS(finetune(ckpt, train, 2, v, cfg, 1001), model::VocabMismatch);
}

// --------------------------------------------------------------- evaluate ---

TEST_CASE("argmax breaks ties toward the lowest class index") {
    float tied[3] = {0.5f, 0.5f, 0.2f};
    REQUIRE(argmax_lowest(tied, 3) == 0);
    float rising[3] = {0.1f, 0.2f, 0.9f};
    REQUIRE(argmax_lowest(rising, 3) == 2);
}

TEST_CASE("accuracy matches a hand count on a 10-example fixture") {
    // hand-built logits: predictions 0 1 2 0 1 2 0 0 1 2 against labels
    // 0 1 2 1 1 0 0 2 1 2 -> rows 0,1,2,4,6,8,9 correct = 7 of 10
    std::vector<std::array<float, 3>> logits = {
        {3, 1, 1}, {0, 2, 1}, {0, 1, 4}, {2, 1, 0}, {1, 5, 3},
        {1, 2, 3}, {9, 0, 0}, {4, 2, 2}, {0, 3, 0}, {1, 1, 2}};
    std::vector<int> labels = {0, 1, 2, 1, 1, 0, 0, 2, 1, 2};
    int correct = 0;
    for (std::size_t i = 0; i < logits.size(); ++i)
        if (argmax_lowest(logits[i].data(), 3) == labels[i]) ++correct;
    REQUIRE(correct == 7);
    REQUIRE(static_cast<double>(correct) / 10.0 == Catch::Approx(0.7));
}

TEST_CASE("an empty test set is an error") {
    vocab::SubwordVocab v = letters_vocab("ab");
    model::Checkpoint ckpt = init_checkpoint(v, 4);
    std::vector<LabeledExample> train = {{"a b", 0}, {"b a", 1}};
    FineTuneConfig cfg;
    cfg.epochs = 0;
    cfg.max_len = 24;
    Classifier clf = finetune(ckpt, train, 2, v, cfg, 4);
    REQUIRE_THROWS_AS(evaluate(clf, {}, v, cfg.max_len), EmptyTestSet);
}

// -------------------------------------------------------------- benchmark ---

TEST_CASE("a one-checkpoint one-task plan yields a single-row report") {
    vocab::SubwordVocab v = letters_vocab("abcdefghuvw");
    model::Checkpoint ckpt = init_checkpoint(v, 5);
    TaskSpec task;
    task.name = TaskName::PhraseBank;
    task.label_names = {"positive", "neutral", "negative"};
    task.examples = separable_examples(60, 3, 10);

    SplitPlan plan{0.9, 1, 42};
    FineTuneConfig cfg;
    cfg.epochs = 1;
    cfg.learning_rate = 5e-4;
    cfg.max_len = 24;
    cfg.seed = 7;
    BenchmarkEntry entry{"toy-model", "", &ckpt, &v, 5};
    EvalReport report = run_benchmark({entry}, {task}, plan, cfg);
    REQUIRE(report.rows.size() == 1);
    REQUIRE(report.rows[0].split_accuracies.size() == 1);
    REQUIRE(report.rows[0].mean == report.rows[0].split_accuracies[0]);
}

TEST_CASE("identical checkpoints produce identical rows") {
    vocab::SubwordVocab v = letters_vocab("abcdefghuvw");
    model::Checkpoint ckpt = init_checkpoint(v, 6);
    TaskSpec task;
    task.name = TaskName::FiQA;
    task.label_names = {"positive", "negative"};
    task.examples = separable_examples(40, 2, 11);

    SplitPlan plan{0.9, 2, 50};
    FineTuneConfig cfg;
    cfg.epochs = 1;
    cfg.learning_rate = 5e-4;
    cfg.max_len = 24;
    cfg.seed = 3;
    BenchmarkEntry e1{"copy-one", "", &ckpt, &v, 6};
    BenchmarkEntry e2{"copy-two", "", &ckpt, &v, 6};
    EvalReport report = run_benchmark({e1, e2}, {task}, plan, cfg);
    REQUIRE(report.rows.size() == 2);
    REQUIRE(report.rows[0].split_accuracies == report.rows[1].split_accuracies);
}

TEST_CASE("report means equal recomputed per-split means") {
    EvalReport report;
    report.rows.push_back({"m", "", "phrasebank", {0.5, 0.7, 0.6}, mean_of({0.5, 0.7, 0.6})});
    for (const EvalRow& r : report.rows) {
        double m = 0;
        for (double a : r.split_accuracies) m += a;
        m /= static_cast<double>(r.split_accuracies.size());
        REQUIRE(r.mean == Catch::Approx(m));
    }
    std::string tsv = report.to_tsv();
    REQUIRE(tsv.find("phrasebank") != std::string::npos);
    REQUIRE(tsv.find("0.6000") != std::string::npos);
}

TEST_CASE("the rendered variant table matches the reference layout golden") {
    // reference accuracy values used purely as layout fixtures
    struct Cell {
        const char* variant;
        const char* task;
        double mean;
    };
    std::vector<Cell> cells = {
        {"bert-cased", "phrasebank", 0.755},  {"bert-uncased", "phrasebank", 0.835},
        {"finlm-basevocab-cased", "phrasebank", 0.856},
        {"finlm-basevocab-uncased", "phrasebank", 0.870},
        {"finlm-finvocab-cased", "phrasebank", 0.864},
        {"finlm-finvocab-uncased", "phrasebank", 0.872},
        {"bert-cased", "fiqa", 0.653},        {"bert-uncased", "fiqa", 0.730},
        {"finlm-basevocab-cased", "fiqa", 0.767},
        {"finlm-basevocab-uncased", "fiqa", 0.796},
        {"finlm-finvocab-cased", "fiqa", 0.814},
        {"finlm-finvocab-uncased", "fiqa", 0.844},
        {"bert-cased", "analysttone", 0.840}, {"bert-uncased", "analysttone", 0.850},
        {"finlm-basevocab-cased", "analysttone", 0.872},
        {"finlm-basevocab-uncased", "analysttone", 0.880},
        {"finlm-finvocab-cased", "analysttone", 0.876},
        {"finlm-finvocab-uncased", "analysttone", 0.887},
    };
    EvalReport report;
    for (const Cell& c : cells) report.rows.push_back({c.variant, "", c.task, {c.mean}, c.mean});
    std::string rendered = render_variant_table(report);
    std::string golden = read_file(fixtures_dir() + "/table2_golden.txt");
    REQUIRE(rendered == golden);
}

TEST_CASE("corpus-tagged rows render in the ablation layout") {
    EvalReport report;
    for (const char* corpus : {"10ks_10qs", "earnings_calls", "analyst_reports", "all"})
        for (const char* task : {"phrasebank", "fiqa"})
            report.rows.push_back({"basevocab", corpus, task, {0.5}, 0.5});
    REQUIRE(report.has_corpus_tags());
    std::string rendered = render_corpus_table(report);
    REQUIRE(rendered.find("basevocab") != std::string::npos);
    REQUIRE(rendered.find("earnings_calls") != std::string::npos);
    // one row per (variant, task)
    std::size_t lines = std::count(rendered.begin(), rendered.end(), '\n');
    REQUIRE(lines == 3);  // header + 2 task rows
}
