#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "srulab/binary_io.hpp"
#include "srulab/csv.hpp"
#include "srulab/tensor.hpp"

namespace srulab {

enum class TargetKind : std::uint32_t { next_step = 0, class_label = 1, binary_next_step = 2 };
enum class Split { train, validation, test };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
    }
    return "?";
}

inline Split parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "validation" || s == "val") return Split::validation;
    if (s == "test") return Split::test;
    throw ConfigError("unknown split '" + std::string(s) + "'");
}

inline const char* target_kind_name(TargetKind k) {
    switch (k) {
        case TargetKind::next_step: return "next_step";
        case TargetKind::class_label: return "class_label";
        case TargetKind::binary_next_step: return "binary_next_step";
    }
    return "?";
}

/// One input sequence (T×d) with its class label when the task is classification.
/// Next-step targets are the inputs shifted by one step.
struct Sequence {
    Tensor xs;
    int label = -1;

    std::size_t length() const { return xs.dim(0); }
    friend bool operator==(const Sequence&, const Sequence&) = default;
};

struct SequenceDataset {
    TargetKind kind = TargetKind::next_step;
    std::size_t dim = 1;
    std::size_t num_classes = 0;
    std::vector<Sequence> train, validation, test;
    std::string provenance;

    const std::vector<Sequence>& split(Split s) const {
        switch (s) {
            case Split::train: return train;
            case Split::validation: return validation;
            case Split::test: return test;
        }
        return train;
    }
    std::vector<Sequence>& split(Split s) {
        return const_cast<std::vector<Sequence>&>(static_cast<const SequenceDataset&>(*this).split(s));
    }

    /// Checks targets against the task kind.
    void validate() const {
        for (Split s : {Split::train, Split::validation, Split::test}) {
            for (const auto& seq : split(s)) {
                if (seq.xs.rank() != 2 || seq.xs.dim(1) != dim)
                    throw FormatError(std::string("dataset: sequence in ") + split_name(s) + " has shape " +
                                      shape_string(seq.xs.shape()) + ", expected T×" + std::to_string(dim));
                if (kind == TargetKind::class_label && (seq.label < 0 || static_cast<std::size_t>(seq.label) >= num_classes))
                    throw FormatError("dataset: class label " + std::to_string(seq.label) + " out of range");
                if (kind != TargetKind::class_label && seq.length() < 2)
                    throw FormatError("dataset: next-step sequences need at least 2 steps");
                if (kind == TargetKind::binary_next_step)
                    for (double v : seq.xs.data())
                        if (v != 0.0 && v != 1.0) throw FormatError("dataset: non-binary value in binary payload");
            }
        }
    }
};

/// Per-split container:
///   "SEQD" | version u32 | n_sequences u64 | T u64 | d u64 | target kind u32 | flags u32
///   | n·T·d f64 inputs | (class-label datasets) n f64 labels | (class-label) num_classes u64
/// flags bit 0 marks a binary (0/1) payload. Little-endian throughout; all
/// sequences in one file share the same length T.
struct Seqd {
    static constexpr char kMagic[4] = {'S', 'E', 'Q', 'D'};
    static constexpr std::uint32_t kVersion = 1;
    static constexpr std::uint32_t kBinaryFlag = 1;
};

inline std::string encode_seqd(const std::vector<Sequence>& seqs, TargetKind kind, std::size_t dim,
                               std::size_t num_classes = 0) {
    const std::uint64_t T = seqs.empty() ? 0 : seqs.front().length();
    std::string out(Seqd::kMagic, 4);
    binio::put_u32(out, Seqd::kVersion);
    binio::put_u64(out, seqs.size());
    binio::put_u64(out, T);
    binio::put_u64(out, dim);
    binio::put_u32(out, static_cast<std::uint32_t>(kind));
    binio::put_u32(out, kind == TargetKind::binary_next_step ? Seqd::kBinaryFlag : 0u);
    for (const auto& s : seqs) {
        if (s.length() != T || s.xs.dim(1) != dim)
            throw FormatError("SEQD: all sequences in a file must be " + std::to_string(T) + "×" + std::to_string(dim));
        for (double v : s.xs.data()) binio::put_f64(out, v);
    }
    if (kind == TargetKind::class_label) {
        for (const auto& s : seqs) binio::put_f64(out, static_cast<double>(s.label));
        binio::put_u64(out, num_classes);
    }
    return out;
}

struct SeqdContents {
    TargetKind kind;
    std::size_t dim;
    std::size_t num_classes = 0;
    std::vector<Sequence> sequences;
};

inline SeqdContents decode_seqd(const std::string& bytes, const std::string& what = "SEQD") {
    binio::Reader in(bytes, what);
    if (in.bytes(4, "magic") != std::string(Seqd::kMagic, 4)) throw FormatError(what + ": bad magic at offset 0");
    const auto version = in.u32("version");
    if (version != Seqd::kVersion) in.fail("unsupported version " + std::to_string(version));
    const auto n = in.u64("sequence count");
    const auto T = in.u64("length");
    const auto d = in.u64("dimension");
    const auto kind_code = in.u32("target kind");
    const auto flags = in.u32("flags");
    if (kind_code > 2) in.fail("unknown target kind " + std::to_string(kind_code));
    if (d == 0 || (n > 0 && T == 0)) in.fail("zero-sized sequences");
    SeqdContents c{static_cast<TargetKind>(kind_code), static_cast<std::size_t>(d), 0, {}};
    const bool binary = (flags & Seqd::kBinaryFlag) != 0;
    if (binary != (c.kind == TargetKind::binary_next_step)) in.fail("binary flag inconsistent with target kind");
    const std::uint64_t payload = n * T * d * 8 + (c.kind == TargetKind::class_label ? n * 8 + 8 : 0);
    if (in.remaining() != payload)
        in.fail("header declares " + std::to_string(payload) + " payload bytes but " + std::to_string(in.remaining()) +
                " remain");
    c.sequences.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        std::vector<double> xs(T * d);
        for (auto& v : xs) {
            v = in.f64("payload");
            if (binary && v != 0.0 && v != 1.0) in.fail("non-binary value in binary payload");
        }
        c.sequences.push_back({Tensor({T, d}, std::move(xs)), -1});
    }
    if (c.kind == TargetKind::class_label) {
        for (auto& s : c.sequences) {
            const double label = in.f64("label");
            if (!(label >= 0.0) || label != std::floor(label)) in.fail("invalid class label");
            s.label = static_cast<int>(label);
        }
        c.num_classes = in.u64("class count");
        for (const auto& s : c.sequences)
            if (static_cast<std::size_t>(s.label) >= c.num_classes) in.fail("class label out of range");
    }
    return c;
}

inline std::string seqd_path(const std::string& dir, Split s) { return dir + "/" + split_name(s) + ".seqd"; }

inline void save_dataset(const SequenceDataset& ds, const std::string& dir) {
    for (Split s : {Split::train, Split::validation, Split::test})
        binio::write_file(seqd_path(dir, s), encode_seqd(ds.split(s), ds.kind, ds.dim, ds.num_classes));
}

inline SequenceDataset load_dataset(const std::string& dir) {
    SequenceDataset ds;
    bool first = true;
    for (Split s : {Split::train, Split::validation, Split::test}) {
        const auto path = seqd_path(dir, s);
        auto c = decode_seqd(binio::read_file(path), path);
        if (first) {
            ds.kind = c.kind;
            ds.dim = c.dim;
            ds.num_classes = c.num_classes;
            first = false;
        } else if (c.kind != ds.kind || c.dim != ds.dim || c.num_classes != ds.num_classes) {
            throw FormatError(path + ": header disagrees with " + seqd_path(dir, Split::train));
        }
        ds.split(s) = std::move(c.sequences);
    }
    ds.provenance = "seqd:" + dir;
    ds.validate();
    return ds;
}

/// Binary next-step data (e.g. piano rolls) from a single SEQD file.
inline std::vector<Sequence> load_binary_sequences(const std::string& path) {
    auto c = decode_seqd(binio::read_file(path), path);
    if (c.kind != TargetKind::binary_next_step) throw FormatError(path + ": not a binary next-step container");
    return std::move(c.sequences);
}

/// Long-format CSV for inspection: split,sequence,step,dim,value[,label].
inline void export_dataset_csv(const SequenceDataset& ds, const std::string& path) {
    std::ostringstream os;
    os << "split,sequence,step,dim,value";
    if (ds.kind == TargetKind::class_label) os << ",label";
    os << '\n';
    for (Split s : {Split::train, Split::validation, Split::test}) {
        const auto& seqs = ds.split(s);
        for (std::size_t i = 0; i < seqs.size(); ++i)
            for (std::size_t t = 0; t < seqs[i].length(); ++t)
                for (std::size_t k = 0; k < ds.dim; ++k) {
                    os << split_name(s) << ',' << i << ',' << t << ',' << k << ',' << format_double(seqs[i].xs(t, k));
                    if (ds.kind == TargetKind::class_label) os << ',' << seqs[i].label;
                    os << '\n';
                }
    }
    write_text_file(path, os.str());
}

}  // namespace srulab
