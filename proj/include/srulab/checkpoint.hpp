#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "srulab/binary_io.hpp"
#include "srulab/cells.hpp"

namespace srulab {

/// Checkpoint container:
///   "SRUF" | version u32 | record count u64 | records...
/// record = name length u32 | name bytes | rank u32 | dims u64 × rank | f64 payload
/// All integers and floats are little-endian. Architecture fields are stored as
/// "meta/..." records next to the parameters ("sru/W_r", "head/W_p", ...).
struct Checkpoint {
    static constexpr char kMagic[4] = {'S', 'R', 'U', 'F'};
    static constexpr std::uint32_t kVersion = 1;
    /// Identifies the initialization scheme of the stored parameters'
    /// starting point: 1 = scaled uniform matrices, zero biases, LSTM forget bias 1.
    static constexpr double kInitScheme = 1.0;

    std::vector<std::string> names;
    std::vector<Tensor> tensors;

    void add(std::string name, Tensor t) {
        names.push_back(std::move(name));
        tensors.push_back(std::move(t));
    }
    const Tensor* find(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return &tensors[i];
        return nullptr;
    }
    const Tensor& at(const std::string& name) const {
        if (auto* t = find(name)) return *t;
        throw FormatError("checkpoint: missing record " + name);
    }
};

inline std::string encode_checkpoint(const Checkpoint& ck) {
    std::string out(Checkpoint::kMagic, 4);
    binio::put_u32(out, Checkpoint::kVersion);
    binio::put_u64(out, ck.names.size());
    for (std::size_t i = 0; i < ck.names.size(); ++i) {
        binio::put_u32(out, static_cast<std::uint32_t>(ck.names[i].size()));
        out += ck.names[i];
        const Tensor& t = ck.tensors[i];
        binio::put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) binio::put_u64(out, d);
        for (double v : t.data()) binio::put_f64(out, v);
    }
    return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
    binio::Reader in(bytes, "checkpoint");
    if (in.bytes(4, "magic") != std::string(Checkpoint::kMagic, 4)) throw FormatError("checkpoint: bad magic at offset 0");
    const auto version = in.u32("version");
    if (version != Checkpoint::kVersion) in.fail("unsupported version " + std::to_string(version));
    const auto count = in.u64("record count");
    Checkpoint ck;
    for (std::uint64_t r = 0; r < count; ++r) {
        const auto len = in.u32("name length");
        std::string name = in.bytes(len, "name");
        const auto rank = in.u32("rank");
        if (rank == 0 || rank > 8) in.fail("invalid rank " + std::to_string(rank));
        Shape shape;
        std::uint64_t total = 1;
        for (std::uint32_t k = 0; k < rank; ++k) {
            const auto d = in.u64("dimension");
            if (d == 0) in.fail("zero dimension");
            shape.push_back(d);
            total *= d;
        }
        in.need(total * 8, "payload");
        std::vector<double> data(total);
        for (auto& v : data) v = in.f64("payload");
        ck.add(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    if (in.remaining() != 0) in.fail("trailing bytes");
    return ck;
}

inline Checkpoint to_checkpoint(const Model& model) {
    const auto& a = model.arch;
    Checkpoint ck;
    auto scalar = [&](const char* name, double v) { ck.add(name, Tensor::scalar(v)); };
    scalar("meta/cell", static_cast<double>(a.cell));
    scalar("meta/head", static_cast<double>(a.head));
    scalar("meta/activation", static_cast<double>(a.activation));
    scalar("meta/input_dim", static_cast<double>(a.input_dim));
    scalar("meta/num_units", static_cast<double>(a.num_units));
    scalar("meta/num_stats", static_cast<double>(a.num_stats));
    scalar("meta/summary_dims", static_cast<double>(a.summary_dims));
    scalar("meta/target_dim", static_cast<double>(a.target_dim));
    scalar("meta/init_scheme", Checkpoint::kInitScheme);
    ck.add("sru/alphas", Tensor::vector(a.alphas));
    for (std::size_t i = 0; i < model.params.size(); ++i) ck.add(model.params.name(i), model.params[i]);
    return ck;
}

inline Model from_checkpoint(const Checkpoint& ck) {
    auto count = [&](const char* name) {
        const double v = ck.at(name).item();
        if (!(v >= 0.0) || v != std::floor(v)) throw FormatError(std::string("checkpoint: invalid ") + name);
        return static_cast<std::size_t>(v);
    };
    Model m;
    const auto cell = count("meta/cell");
    const auto head = count("meta/head");
    const auto act = count("meta/activation");
    if (cell > 2 || head > 2 || act > 1) throw FormatError("checkpoint: invalid architecture code");
    m.arch.cell = static_cast<CellKind>(cell);
    m.arch.head = static_cast<HeadKind>(head);
    m.arch.activation = static_cast<Activation>(act);
    m.arch.input_dim = count("meta/input_dim");
    m.arch.num_units = count("meta/num_units");
    m.arch.num_stats = count("meta/num_stats");
    m.arch.summary_dims = count("meta/summary_dims");
    m.arch.target_dim = count("meta/target_dim");
    m.arch.alphas = ck.at("sru/alphas").values();
    m.arch.validate();
    for (const auto& spec : model_specs(m.arch)) {
        const Tensor& t = ck.at(spec.name);
        if (t.shape() != spec.shape)
            throw FormatError("checkpoint: " + spec.name + " has shape " + shape_string(t.shape()) + ", expected " +
                              shape_string(spec.shape));
        m.params.add(spec.name, t);
    }
    return m;
}

inline void save_checkpoint(const Model& model, const std::string& path) {
    binio::write_file(path, encode_checkpoint(to_checkpoint(model)));
}

inline Model load_checkpoint(const std::string& path) { return from_checkpoint(decode_checkpoint(binio::read_file(path))); }

}  // namespace srulab
