#include "ste/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ste {

namespace {

constexpr double kStdFloor = 1e-8;

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

double parse_real(const std::string& field, std::size_t line_no,
                  std::size_t col) {
    const std::string t = trim(field);
    double v = 0.0;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || t.empty())
        throw DataError("non-numeric cell '" + field + "' at line " +
                        std::to_string(line_no) + ", column " +
                        std::to_string(col + 1));
    if (!std::isfinite(v))
        throw DataError("non-finite value at line " + std::to_string(line_no) +
                        ", column " + std::to_string(col + 1));
    return v;
}

std::uint32_t parse_label(const std::string& field, std::size_t line_no) {
    const std::string t = trim(field);
    long long v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty())
        throw DataError("label '" + field + "' at line " +
                        std::to_string(line_no) + " is not an integer");
    if (v < 0)
        throw DataError("negative label at line " + std::to_string(line_no));
    return static_cast<std::uint32_t>(v);
}

std::uint32_t read_be_u32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw DataError("unexpected end of file while reading " + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<char*>(b), 4);
}

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

} // namespace

std::uint32_t Dataset::max_label() const {
    std::uint32_t m = 0;
    for (std::uint32_t l : labels) m = std::max(m, l);
    return m;
}

Vector Dataset::example(std::size_t i) const {
    const double* row = features.row(i);
    return Vector(row, row + features.cols);
}

Dataset load_csv(const std::filesystem::path& path,
                 const std::string& label_column, bool header) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file " + path.string());

    std::string line;
    std::size_t line_no = 0;
    std::size_t n_cols = 0;
    std::size_t label_idx = 0;
    bool label_resolved = false;

    // Numeric label_column is a 0-based index; otherwise it names a header
    // column and requires header=true.
    {
        long long idx = 0;
        auto [ptr, ec] = std::from_chars(
            label_column.data(), label_column.data() + label_column.size(),
            idx);
        if (ec == std::errc{} && ptr == label_column.data() + label_column.size()) {
            if (idx < 0) throw ConfigError("label column index must be >= 0");
            label_idx = static_cast<std::size_t>(idx);
            label_resolved = true;
        } else if (!header) {
            throw ConfigError("label column '" + label_column +
                              "' is a name but the file has no header");
        }
    }

    std::vector<double> values;
    std::vector<std::uint32_t> labels;
    std::size_t n_rows = 0;

    if (header) {
        if (!std::getline(in, line))
            throw DataError("CSV file " + path.string() + " is empty");
        ++line_no;
        auto names = split_fields(line);
        n_cols = names.size();
        if (!label_resolved) {
            bool found = false;
            for (std::size_t i = 0; i < names.size(); ++i) {
                if (trim(names[i]) == label_column) {
                    label_idx = i;
                    found = true;
                    break;
                }
            }
            if (!found)
                throw DataError("label column '" + label_column +
                                "' not found in header of " + path.string());
            label_resolved = true;
        }
    }

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() && in.peek() == EOF) break; // trailing newline
        auto fields = split_fields(line);
        if (n_cols == 0) n_cols = fields.size();
        if (fields.size() != n_cols)
            throw DataError("ragged row at line " + std::to_string(line_no) +
                            ": got " + std::to_string(fields.size()) +
                            " fields, expected " + std::to_string(n_cols));
        if (label_idx >= n_cols)
            throw DataError("label column " + std::to_string(label_idx) +
                            " out of range: file has " +
                            std::to_string(n_cols) + " columns");
        for (std::size_t c = 0; c < n_cols; ++c) {
            if (c == label_idx)
                labels.push_back(parse_label(fields[c], line_no));
            else
                values.push_back(parse_real(fields[c], line_no, c));
        }
        ++n_rows;
    }
    if (n_rows == 0) throw DataError("CSV file " + path.string() + " has no data rows");

    Dataset ds;
    ds.features.rows = n_rows;
    ds.features.cols = n_cols - 1;
    ds.features.data = std::move(values);
    ds.labels = std::move(labels);
    return ds;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path,
              bool header) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write CSV file " + path.string());
    const std::size_t m = ds.dim();
    if (header) {
        for (std::size_t c = 0; c < m; ++c) out << "f" << c << ",";
        out << "label\n";
    }
    char buf[48];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double* row = ds.features.row(i);
        for (std::size_t c = 0; c < m; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", row[c]);
            out << buf << ",";
        }
        out << ds.labels[i] << "\n";
    }
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw DataError("cannot open IDX image file " + images_path.string());
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw DataError("cannot open IDX label file " + labels_path.string());

    char hex[32];
    const std::uint32_t img_magic = read_be_u32(img, "image magic");
    if (img_magic != kIdxImagesMagic) {
        std::snprintf(hex, sizeof(hex), "0x%08x (expected 0x%08x)", img_magic,
                      kIdxImagesMagic);
        throw DataError("bad IDX image magic " + std::string(hex) + " in " +
                        images_path.string());
    }
    const std::uint32_t n_images = read_be_u32(img, "image count");
    const std::uint32_t rows = read_be_u32(img, "image rows");
    const std::uint32_t cols = read_be_u32(img, "image cols");

    const std::uint32_t lab_magic = read_be_u32(lab, "label magic");
    if (lab_magic != kIdxLabelsMagic) {
        std::snprintf(hex, sizeof(hex), "0x%08x (expected 0x%08x)", lab_magic,
                      kIdxLabelsMagic);
        throw DataError("bad IDX label magic " + std::string(hex) + " in " +
                        labels_path.string());
    }
    const std::uint32_t n_labels = read_be_u32(lab, "label count");
    if (n_images != n_labels)
        throw DataError("IDX count mismatch: " + std::to_string(n_images) +
                        " images vs " + std::to_string(n_labels) + " labels");

    const std::size_t pixels = std::size_t(rows) * cols;
    Dataset ds;
    ds.features = Matrix(n_images, pixels);
    ds.labels.resize(n_labels);

    std::vector<unsigned char> buf(pixels);
    for (std::size_t i = 0; i < n_images; ++i) {
        if (!img.read(reinterpret_cast<char*>(buf.data()),
                      static_cast<std::streamsize>(pixels)))
            throw DataError("unexpected end of IDX image data at example " +
                            std::to_string(i));
        double* row = ds.features.row(i);
        for (std::size_t j = 0; j < pixels; ++j)
            row[j] = static_cast<double>(buf[j]);
    }
    std::vector<unsigned char> lbuf(n_labels);
    if (!lab.read(reinterpret_cast<char*>(lbuf.data()), n_labels))
        throw DataError("unexpected end of IDX label data");
    for (std::size_t i = 0; i < n_labels; ++i)
        ds.labels[i] = lbuf[i];
    return ds;
}

void save_idx(const Dataset& ds, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path) {
    // Written as u8: values are clamped and rounded, which is exact for
    // datasets generated on the 0..255 grid.
    std::size_t side = static_cast<std::size_t>(
        std::llround(std::sqrt(static_cast<double>(ds.dim()))));
    std::size_t rows, cols;
    if (side * side == ds.dim()) {
        rows = cols = side;
    } else {
        rows = 1;
        cols = ds.dim();
    }
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw DataError("cannot write IDX image file " + images_path.string());
    write_be_u32(img, kIdxImagesMagic);
    write_be_u32(img, static_cast<std::uint32_t>(ds.size()));
    write_be_u32(img, static_cast<std::uint32_t>(rows));
    write_be_u32(img, static_cast<std::uint32_t>(cols));
    std::vector<unsigned char> buf(ds.dim());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double* row = ds.features.row(i);
        for (std::size_t j = 0; j < ds.dim(); ++j) {
            double v = std::clamp(row[j], 0.0, 255.0);
            buf[j] = static_cast<unsigned char>(std::llround(v));
        }
        img.write(reinterpret_cast<char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size()));
    }

    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw DataError("cannot write IDX label file " + labels_path.string());
    write_be_u32(lab, kIdxLabelsMagic);
    write_be_u32(lab, static_cast<std::uint32_t>(ds.size()));
    for (std::uint32_t l : ds.labels) {
        unsigned char b = static_cast<unsigned char>(l);
        lab.write(reinterpret_cast<char*>(&b), 1);
    }
}

NormStats normalize(Dataset& train, std::vector<Dataset*> others) {
    if (train.size() == 0) throw DataError("normalize: empty training set");
    const std::size_t m = train.dim();
    const double n = static_cast<double>(train.size());

    NormStats stats;
    stats.mean.assign(m, 0.0);
    stats.std.assign(m, 0.0);
    for (std::size_t i = 0; i < train.size(); ++i) {
        const double* row = train.features.row(i);
        for (std::size_t c = 0; c < m; ++c) stats.mean[c] += row[c];
    }
    for (double& v : stats.mean) v /= n;
    for (std::size_t i = 0; i < train.size(); ++i) {
        const double* row = train.features.row(i);
        for (std::size_t c = 0; c < m; ++c) {
            const double d = row[c] - stats.mean[c];
            stats.std[c] += d * d;
        }
    }
    for (double& v : stats.std) v = std::sqrt(v / n);
    for (double& v : stats.std)
        if (v < kStdFloor) v = kStdFloor;

    apply_normalization(train, stats);
    for (Dataset* ds : others)
        if (ds) apply_normalization(*ds, stats);
    return stats;
}

void apply_normalization(Dataset& ds, const NormStats& stats) {
    require_shape(stats.mean.size() == ds.dim() &&
                      stats.std.size() == ds.dim(),
                  "normalization stats have " + shape_str(stats.mean) +
                      " features, dataset has " + std::to_string(ds.dim()));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        double* row = ds.features.row(i);
        for (std::size_t c = 0; c < ds.dim(); ++c)
            row[c] = (row[c] - stats.mean[c]) / stats.std[c];
    }
    ds.stats = stats;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double val_fraction,
                                  std::uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw ConfigError("val_fraction must be in (0,1)");
    const std::size_t n = ds.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed, stream_id(StreamPurpose::Split));
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.next_below(i);
        std::swap(perm[i - 1], perm[j]);
    }
    const std::size_t n_val = static_cast<std::size_t>(
        std::floor(static_cast<double>(n) * val_fraction));

    auto take = [&](std::size_t begin, std::size_t end) {
        Dataset out;
        out.features = Matrix(end - begin, ds.dim());
        out.labels.resize(end - begin);
        out.stats = ds.stats;
        for (std::size_t k = begin; k < end; ++k) {
            const double* src = ds.features.row(perm[k]);
            std::copy(src, src + ds.dim(), out.features.row(k - begin));
            out.labels[k - begin] = ds.labels[perm[k]];
        }
        return out;
    };
    Dataset val = take(0, n_val);
    Dataset train = take(n_val, n);
    return {std::move(train), std::move(val)};
}

} // namespace ste
