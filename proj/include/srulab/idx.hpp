#pragma once

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "srulab/dataset.hpp"
#include "srulab/errors.hpp"
#include "srulab/rng.hpp"
#include "srulab/tensor.hpp"

namespace srulab {

/// Images scaled to [0, 1] (byte / 255) with their digit labels.
struct LabeledImages {
    std::size_t rows = 0, cols = 0;
    std::vector<Tensor> images;  ///< each rows×cols
    std::vector<int> labels;
};

namespace idx {

inline constexpr std::uint32_t kImageMagic = 0x00000803;
inline constexpr std::uint32_t kLabelMagic = 0x00000801;

inline std::uint32_t get_be32(const std::string& b, std::size_t off, const std::string& what, const char* field) {
    if (off + 4 > b.size())
        throw FormatError(what + ": truncated " + field + " at offset " + std::to_string(off));
    return (std::uint32_t(std::uint8_t(b[off])) << 24) | (std::uint32_t(std::uint8_t(b[off + 1])) << 16) |
           (std::uint32_t(std::uint8_t(b[off + 2])) << 8) | std::uint32_t(std::uint8_t(b[off + 3]));
}

inline void put_be32(std::string& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xff));
}

/// Reads a plain or gzip-compressed file (zlib passes plain files through).
inline std::string read_maybe_gz(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open " + path);
    std::string out;
    char buf[1 << 16];
    int n;
    while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
    const bool failed = n < 0;
    gzclose(f);
    if (failed) throw FormatError(path + ": corrupt gzip stream after " + std::to_string(out.size()) + " bytes");
    return out;
}

inline void write_maybe_gz(const std::string& path, const std::string& bytes) {
    const bool gz = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
    if (!gz) {
        binio::write_file(path, bytes);
        return;
    }
    gzFile f = gzopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot write " + path);
    const int n = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    gzclose(f);
    if (n != static_cast<int>(bytes.size())) throw IoError("short write to " + path);
}

}  // namespace idx

inline LabeledImages decode_idx_images(const std::string& b, const std::string& what = "idx images") {
    const auto magic = idx::get_be32(b, 0, what, "magic");
    if (magic != idx::kImageMagic) throw FormatError(what + ": bad magic at offset 0 (expected 0x00000803)");
    const std::size_t n = idx::get_be32(b, 4, what, "image count");
    const std::size_t rows = idx::get_be32(b, 8, what, "row count");
    const std::size_t cols = idx::get_be32(b, 12, what, "column count");
    if (rows == 0 || cols == 0) throw FormatError(what + ": zero image size at offset 8");
    const std::size_t need = 16 + n * rows * cols;
    if (b.size() < need)
        throw FormatError(what + ": truncated pixel data at offset " + std::to_string(b.size()) + " (expected " +
                          std::to_string(need) + " bytes)");
    if (b.size() > need) throw FormatError(what + ": trailing bytes at offset " + std::to_string(need));
    LabeledImages out;
    out.rows = rows;
    out.cols = cols;
    out.images.reserve(n);
    std::size_t off = 16;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor img({rows, cols});
        for (auto& v : img.values()) v = static_cast<double>(static_cast<std::uint8_t>(b[off++])) / 255.0;
        out.images.push_back(std::move(img));
    }
    return out;
}

inline std::vector<int> decode_idx_labels(const std::string& b, const std::string& what = "idx labels") {
    const auto magic = idx::get_be32(b, 0, what, "magic");
    if (magic != idx::kLabelMagic) throw FormatError(what + ": bad magic at offset 0 (expected 0x00000801)");
    const std::size_t n = idx::get_be32(b, 4, what, "label count");
    if (b.size() < 8 + n)
        throw FormatError(what + ": truncated label data at offset " + std::to_string(b.size()) + " (expected " +
                          std::to_string(8 + n) + " bytes)");
    if (b.size() > 8 + n) throw FormatError(what + ": trailing bytes at offset " + std::to_string(8 + n));
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = static_cast<std::uint8_t>(b[8 + i]);
        if (labels[i] > 9)
            throw FormatError(what + ": label " + std::to_string(labels[i]) + " outside 0..9 at offset " +
                              std::to_string(8 + i));
    }
    return labels;
}

inline std::string encode_idx_images(const LabeledImages& set) {
    std::string out;
    idx::put_be32(out, idx::kImageMagic);
    idx::put_be32(out, static_cast<std::uint32_t>(set.images.size()));
    idx::put_be32(out, static_cast<std::uint32_t>(set.rows));
    idx::put_be32(out, static_cast<std::uint32_t>(set.cols));
    for (const auto& img : set.images) {
        if (img.rank() != 2 || img.dim(0) != set.rows || img.dim(1) != set.cols)
            throw DimensionError("encode_idx_images: image shape " + shape_string(img.shape()));
        for (double v : img.values()) {
            if (!(v >= 0.0 && v <= 1.0)) throw DomainError("encode_idx_images: pixel outside [0, 1]");
            out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0))));
        }
    }
    return out;
}

inline std::string encode_idx_labels(const std::vector<int>& labels) {
    std::string out;
    idx::put_be32(out, idx::kLabelMagic);
    idx::put_be32(out, static_cast<std::uint32_t>(labels.size()));
    for (int l : labels) {
        if (l < 0 || l > 9) throw DomainError("encode_idx_labels: label " + std::to_string(l) + " outside 0..9");
        out.push_back(static_cast<char>(l));
    }
    return out;
}

/// Loads an IDX image file and its label file; either may be gzip-compressed.
inline LabeledImages load_idx_images(const std::string& images_path, const std::string& labels_path) {
    LabeledImages set = decode_idx_images(idx::read_maybe_gz(images_path), images_path);
    set.labels = decode_idx_labels(idx::read_maybe_gz(labels_path), labels_path);
    if (set.labels.size() != set.images.size())
        throw FormatError(labels_path + ": " + std::to_string(set.labels.size()) + " labels for " +
                          std::to_string(set.images.size()) + " images (count at offset 4)");
    return set;
}

/// Writes both files; a ".gz" suffix selects gzip compression.
inline void save_idx_images(const LabeledImages& set, const std::string& images_path, const std::string& labels_path) {
    idx::write_maybe_gz(images_path, encode_idx_images(set));
    idx::write_maybe_gz(labels_path, encode_idx_labels(set.labels));
}

struct PixelOrder {
    std::size_t pool = 1;    ///< mean-pool pool×pool blocks first
    std::size_t stride = 1;  ///< keep every stride-th element of the flattened sequence
    bool column_major = false;
};

/// Flattens an image into a scalar sequence: optional mean pooling, then
/// row-major (or column-major) order, then subsampling by `stride`.
inline std::vector<double> pixels_to_sequence(const Tensor& image, const PixelOrder& order = {}) {
    if (image.rank() != 2) throw DimensionError("pixels_to_sequence: expected a 2-d image");
    if (order.pool == 0 || order.stride == 0) throw ContractError("pixels_to_sequence: pool and stride must be positive");
    const std::size_t R = image.dim(0), C = image.dim(1), p = order.pool;
    if (R % p != 0 || C % p != 0)
        throw ContractError("pixels_to_sequence: pool " + std::to_string(p) + " does not divide " +
                            shape_string(image.shape()));
    const std::size_t pr = R / p, pc = C / p;
    Tensor pooled({pr, pc});
    for (std::size_t i = 0; i < pr; ++i)
        for (std::size_t j = 0; j < pc; ++j) {
            double s = 0.0;
            for (std::size_t a = 0; a < p; ++a)
                for (std::size_t b = 0; b < p; ++b) s += image(i * p + a, j * p + b);
            pooled(i, j) = s / static_cast<double>(p * p);
        }
    std::vector<double> flat;
    flat.reserve(pr * pc);
    if (order.column_major) {
        for (std::size_t j = 0; j < pc; ++j)
            for (std::size_t i = 0; i < pr; ++i) flat.push_back(pooled(i, j));
    } else {
        flat = pooled.values();
    }
    if (order.stride == 1) return flat;
    std::vector<double> out;
    for (std::size_t k = 0; k < flat.size(); k += order.stride) out.push_back(flat[k]);
    return out;
}

struct SplitSizes {
    std::size_t train = 4000;
    std::size_t validation = 500;
    std::size_t test = 500;
};

/// Seeded random partition of a labeled image set into pixel-sequence
/// classification splits.
inline SequenceDataset make_pixel_dataset(const LabeledImages& set, const SplitSizes& sizes, std::uint64_t seed,
                                          const PixelOrder& order = {}) {
    const std::size_t need = sizes.train + sizes.validation + sizes.test;
    if (sizes.train == 0 || sizes.validation == 0 || sizes.test == 0)
        throw ContractError("pixel dataset: every split needs at least one image");
    if (need > set.images.size())
        throw ContractError("pixel dataset: " + std::to_string(need) + " images requested, " +
                            std::to_string(set.images.size()) + " available");
    if (set.labels.size() != set.images.size()) throw ContractError("pixel dataset: labels missing");
    std::vector<std::size_t> perm(set.images.size());
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng = Rng(seed).stream("data").stream("split");
    for (std::size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

    SequenceDataset ds;
    ds.kind = TargetKind::class_label;
    ds.dim = 1;
    ds.num_classes = 10;
    std::size_t next = 0;
    auto take = [&](std::vector<Sequence>& out, std::size_t n) {
        for (std::size_t k = 0; k < n; ++k, ++next) {
            auto xs = pixels_to_sequence(set.images[perm[next]], order);
            const std::size_t T = xs.size();
            out.push_back({Tensor({T, 1}, std::move(xs)), set.labels[perm[next]]});
        }
    };
    take(ds.train, sizes.train);
    take(ds.validation, sizes.validation);
    take(ds.test, sizes.test);
    ds.provenance = "idx:" + std::to_string(set.rows) + "x" + std::to_string(set.cols) + ",pool=" +
                    std::to_string(order.pool) + ",stride=" + std::to_string(order.stride) +
                    (order.column_major ? ",column_major" : ",row_major") + ",split_seed=" + std::to_string(seed) +
                    ",split=" + std::to_string(sizes.train) + "/" + std::to_string(sizes.validation) + "/" +
                    std::to_string(sizes.test);
    return ds;
}

}  // namespace srulab
