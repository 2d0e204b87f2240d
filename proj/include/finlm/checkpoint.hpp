#pragma once

// Checkpoint file: magic FLMC1, version, config block, named-tensor table
// (payloads widened to little-endian float64, which round-trips float32
// parameters bit-exactly), optimizer block, FNV-1a trailer checksum.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "finlm/adam.hpp"
#include "finlm/model.hpp"

namespace finlm::model {

class VocabMismatch : public Error {
public:
    VocabMismatch()
        : Error("checkpoint vocabulary fingerprint does not match the supplied vocabulary") {}
};

enum class Phase : std::uint32_t { Phase128 = 0, Phase512 = 1, FineTuned = 2 };

inline std::string phase_name(Phase p) {
    switch (p) {
        case Phase::Phase128: return "phase128";
        case Phase::Phase512: return "phase512";
        case Phase::FineTuned: return "finetuned";
    }
    return "?";
}

struct Checkpoint {
    ModelConfig config;
    Params<float> params;
    OptimizerState opt;
    std::int64_t global_step = 0;
    Phase phase = Phase::Phase128;
    std::uint64_t vocab_fingerprint = 0;
    std::map<std::string, MatF> extra;  // e.g. classifier head tensors
};

inline constexpr std::string_view kCheckpointMagic = "FLMC1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_tensor(std::string& out, const std::string& name, const float* data,
                       std::uint64_t rows, std::uint64_t cols) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, 1);  // dtype: f64 payload
    put_u64(out, rows);
    put_u64(out, cols);
    for (std::uint64_t k = 0; k < rows * cols; ++k) put_f64(out, static_cast<double>(data[k]));
}

struct ParsedTensor {
    std::uint64_t rows = 0, cols = 0;
    std::vector<double> values;
};

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    if (ckpt.global_step != ckpt.opt.step)
        throw Error("checkpoint global_step must match optimizer step");
    std::string out(kCheckpointMagic);
    put_u32(out, kCheckpointVersion);

    const ModelConfig& c = ckpt.config;
    put_u32(out, static_cast<std::uint32_t>(c.layers));
    put_u32(out, static_cast<std::uint32_t>(c.hidden));
    put_u32(out, static_cast<std::uint32_t>(c.heads));
    put_u32(out, static_cast<std::uint32_t>(c.ffn));
    put_u32(out, static_cast<std::uint32_t>(c.vocab_size));
    put_u32(out, static_cast<std::uint32_t>(c.max_positions));
    put_u32(out, static_cast<std::uint32_t>(c.type_vocab));
    put_f64(out, c.dropout);
    put_f64(out, c.init_std);
    put_u64(out, c.seed);

    put_u64(out, static_cast<std::uint64_t>(ckpt.global_step));
    put_u32(out, static_cast<std::uint32_t>(ckpt.phase));
    put_u64(out, ckpt.vocab_fingerprint);

    const AdamConfig& a = ckpt.opt.cfg;
    put_f64(out, a.beta1);
    put_f64(out, a.beta2);
    put_f64(out, a.eps);
    put_f64(out, a.weight_decay);
    put_f64(out, a.peak_lr);
    put_u64(out, static_cast<std::uint64_t>(a.warmup_steps));
    put_u64(out, static_cast<std::uint64_t>(a.total_steps));
    put_u64(out, static_cast<std::uint64_t>(ckpt.opt.step));

    auto tensors = collect_tensors(const_cast<Params<float>&>(ckpt.params));
    bool with_moments = !ckpt.opt.m.empty();
    std::uint32_t count = static_cast<std::uint32_t>(
        tensors.size() * (with_moments ? 3 : 1) + ckpt.extra.size());
    put_u32(out, count);
    for (std::size_t t = 0; t < tensors.size(); ++t) {
        const TensorView<float>& tv = tensors[t];
        detail::put_tensor(out, tv.name, tv.data, static_cast<std::uint64_t>(tv.rows),
                           static_cast<std::uint64_t>(tv.cols));
        if (with_moments) {
            detail::put_tensor(out, "adam_m." + tv.name, ckpt.opt.m[t].data(),
                               static_cast<std::uint64_t>(tv.rows),
                               static_cast<std::uint64_t>(tv.cols));
            detail::put_tensor(out, "adam_v." + tv.name, ckpt.opt.v[t].data(),
                               static_cast<std::uint64_t>(tv.rows),
                               static_cast<std::uint64_t>(tv.cols));
        }
    }
    for (const auto& [name, m] : ckpt.extra)
        detail::put_tensor(out, "extra." + name, m.data(), static_cast<std::uint64_t>(m.rows()),
                           static_cast<std::uint64_t>(m.cols()));

    put_u64(out, fnv1a64(out));
    write_file(path, out);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::string data = read_file(path);
    if (data.size() < kCheckpointMagic.size() + 12 ||
        std::string_view(data).substr(0, kCheckpointMagic.size()) != kCheckpointMagic)
        throw IoError(path + ": not a checkpoint file (bad magic)");
    {
        ByteReader tail(std::string_view(data).substr(data.size() - 8), "checkpoint trailer");
        if (tail.u64() != fnv1a64(std::string_view(data).substr(0, data.size() - 8)))
            throw IoError(path + ": checkpoint checksum mismatch");
    }
    ByteReader r(std::string_view(data).substr(kCheckpointMagic.size(), data.size() - 8 -
                                                                            kCheckpointMagic.size()),
                 "checkpoint");
    if (r.u32() != kCheckpointVersion) throw IoError(path + ": unsupported checkpoint version");

    Checkpoint ckpt;
    ModelConfig& c = ckpt.config;
    c.layers = static_cast<int>(r.u32());
    c.hidden = static_cast<int>(r.u32());
    c.heads = static_cast<int>(r.u32());
    c.ffn = static_cast<int>(r.u32());
    c.vocab_size = static_cast<int>(r.u32());
    c.max_positions = static_cast<int>(r.u32());
    c.type_vocab = static_cast<int>(r.u32());
    c.dropout = r.f64();
    c.init_std = r.f64();
    c.seed = r.u64();

    ckpt.global_step = static_cast<std::int64_t>(r.u64());
    ckpt.phase = static_cast<Phase>(r.u32());
    ckpt.vocab_fingerprint = r.u64();

    AdamConfig a;
    a.beta1 = r.f64();
    a.beta2 = r.f64();
    a.eps = r.f64();
    a.weight_decay = r.f64();
    a.peak_lr = r.f64();
    a.warmup_steps = static_cast<std::int64_t>(r.u64());
    a.total_steps = static_cast<std::int64_t>(r.u64());
    std::int64_t opt_step = static_cast<std::int64_t>(r.u64());

    std::uint32_t count = r.u32();
    std::map<std::string, detail::ParsedTensor> table;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t name_len = r.u32();
        std::string name(r.bytes(name_len));
        if (r.u32() != 1) throw IoError(path + ": unsupported tensor dtype");
        detail::ParsedTensor pt;
        pt.rows = r.u64();
        pt.cols = r.u64();
        pt.values.resize(pt.rows * pt.cols);
        for (double& v : pt.values) v = r.f64();
        table.emplace(std::move(name), std::move(pt));
    }

    ckpt.params = Params<float>::shaped(c);
    auto tensors = collect_tensors(ckpt.params);
    bool with_moments = table.count("adam_m." + tensors[0].name) > 0;
    ckpt.opt.cfg = a;
    ckpt.opt.step = opt_step;
    if (with_moments) ckpt.opt.reset(tensors, a);
    ckpt.opt.step = opt_step;

    auto fill = [&](const std::string& name, float* dst, const TensorView<float>& shape) {
        auto it = table.find(name);
        if (it == table.end()) throw IoError(path + ": missing tensor " + name);
        const detail::ParsedTensor& pt = it->second;
        if (pt.rows != static_cast<std::uint64_t>(shape.rows) ||
            pt.cols != static_cast<std::uint64_t>(shape.cols))
            throw IoError(path + ": shape mismatch for tensor " + name);
        for (std::size_t k = 0; k < pt.values.size(); ++k) {
            dst[k] = static_cast<float>(pt.values[k]);
            if (!std::isfinite(dst[k])) throw IoError(path + ": non-finite value in " + name);
        }
        table.erase(it);
    };

    for (std::size_t t = 0; t < tensors.size(); ++t) {
        fill(tensors[t].name, tensors[t].data, tensors[t]);
        if (with_moments) {
            fill("adam_m." + tensors[t].name, ckpt.opt.m[t].data(), tensors[t]);
            fill("adam_v." + tensors[t].name, ckpt.opt.v[t].data(), tensors[t]);
        }
    }
    for (auto& [name, pt] : table) {
        if (name.rfind("extra.", 0) != 0) throw IoError(path + ": unexpected tensor " + name);
        MatF m(static_cast<Eigen::Index>(pt.rows), static_cast<Eigen::Index>(pt.cols));
        for (std::size_t k = 0; k < pt.values.size(); ++k) m.data()[k] = static_cast<float>(pt.values[k]);
        ckpt.extra.emplace(name.substr(6), std::move(m));
    }
    if (ckpt.global_step != ckpt.opt.step)
        throw IoError(path + ": global_step inconsistent with optimizer step");
    return ckpt;
}

}  // namespace finlm::model
