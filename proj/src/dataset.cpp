#include "ldp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include "ldp/rng.hpp"

namespace ldp {

namespace {
constexpr uint32_t kImageMagic = 0x00000803;
constexpr uint32_t kLabelMagic = 0x00000801;

uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("idx: truncated file " + path);
    return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
           (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

void write_be32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<char*>(b), 4);
}
}  // namespace

Tensor Dataset::batch(const std::vector<int64_t>& indices) const {
    const int64_t n = static_cast<int64_t>(indices.size());
    std::vector<int64_t> shape = image() ? std::vector<int64_t>{n, channels, height, width}
                                         : std::vector<int64_t>{n, features};
    Tensor out = Tensor::zeros(shape);
    for (int64_t i = 0; i < n; ++i)
        std::memcpy(out.data.data() + i * features, x.data() + indices[static_cast<size_t>(i)] * features,
                    static_cast<size_t>(features) * sizeof(float));
    return out;
}

std::vector<int> Dataset::labels(const std::vector<int64_t>& indices) const {
    std::vector<int> out(indices.size());
    for (size_t i = 0; i < indices.size(); ++i) out[i] = y[static_cast<size_t>(indices[i])];
    return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("idx: cannot open " + images_path);
    const uint32_t img_magic = read_be32(img, images_path);
    if (img_magic != kImageMagic)
        throw std::runtime_error("idx: bad image magic in " + images_path + " (got " + std::to_string(img_magic) +
                                 ")");
    const uint32_t n = read_be32(img, images_path);
    const uint32_t rows = read_be32(img, images_path);
    const uint32_t cols = read_be32(img, images_path);

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("idx: cannot open " + labels_path);
    const uint32_t lab_magic = read_be32(lab, labels_path);
    if (lab_magic != kLabelMagic)
        throw std::runtime_error("idx: bad label magic in " + labels_path + " (got " + std::to_string(lab_magic) +
                                 ")");
    const uint32_t n_labels = read_be32(lab, labels_path);
    if (n != n_labels)
        throw std::runtime_error("idx: image count " + std::to_string(n) + " does not match label count " +
                                 std::to_string(n_labels));

    Dataset d;
    d.count = n;
    d.channels = 1;
    d.height = rows;
    d.width = cols;
    d.features = static_cast<int64_t>(rows) * cols;
    std::vector<unsigned char> buf(static_cast<size_t>(d.count) * d.features);
    if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
        throw std::runtime_error("idx: truncated image payload in " + images_path);
    d.x.resize(buf.size());
    for (size_t i = 0; i < buf.size(); ++i) d.x[i] = static_cast<float>(buf[i]) / 255.0f;

    std::vector<unsigned char> lbuf(n);
    if (!lab.read(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(lbuf.size())))
        throw std::runtime_error("idx: truncated label payload in " + labels_path);
    d.y.assign(lbuf.begin(), lbuf.end());
    int max_label = 0;
    for (int v : d.y) max_label = std::max(max_label, v);
    d.num_classes = max_label + 1;
    return d;
}

void save_idx(const Dataset& d, const std::string& images_path, const std::string& labels_path) {
    if (!d.image()) throw std::invalid_argument("save_idx: dataset has no image geometry");
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("idx: cannot open " + images_path + " for writing");
    write_be32(img, kImageMagic);
    write_be32(img, static_cast<uint32_t>(d.count));
    write_be32(img, static_cast<uint32_t>(d.height));
    write_be32(img, static_cast<uint32_t>(d.width));
    std::vector<unsigned char> buf(d.x.size());
    for (size_t i = 0; i < d.x.size(); ++i) {
        const float v = std::clamp(d.x[i], 0.0f, 1.0f);
        buf[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    img.write(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));

    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("idx: cannot open " + labels_path + " for writing");
    write_be32(lab, kLabelMagic);
    write_be32(lab, static_cast<uint32_t>(d.count));
    std::vector<unsigned char> lbuf(d.y.begin(), d.y.end());
    lab.write(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(lbuf.size()));
}

TrainTestSplit synth_blobs(int classes, int dims, int per_class, double radius, uint64_t seed) {
    if (classes < 2) throw std::invalid_argument("synth_blobs: need at least 2 classes");
    if (dims < 1 || per_class < 1) throw std::invalid_argument("synth_blobs: dims and per_class must be positive");
    std::mt19937_64 rng(derive_seed(seed, "synth-data"));
    std::normal_distribution<double> gauss(0.0, 1.0);

    // class means: isotropic gaussian direction scaled onto the radius sphere
    std::vector<std::vector<double>> means(static_cast<size_t>(classes), std::vector<double>(static_cast<size_t>(dims)));
    for (auto& m : means) {
        double norm2 = 0.0;
        for (double& v : m) {
            v = gauss(rng);
            norm2 += v * v;
        }
        const double scale = radius / std::max(std::sqrt(norm2), 1e-12);
        for (double& v : m) v *= scale;
    }

    Dataset all;
    all.count = static_cast<int64_t>(classes) * per_class;
    all.features = dims;
    all.num_classes = classes;
    all.x.resize(static_cast<size_t>(all.count * all.features));
    all.y.resize(static_cast<size_t>(all.count));
    // interleave classes so the index-based split is stratified
    for (int64_t i = 0; i < all.count; ++i) {
        const int cls = static_cast<int>(i % classes);
        all.y[static_cast<size_t>(i)] = cls;
        for (int64_t j = 0; j < dims; ++j)
            all.x[static_cast<size_t>(i * dims + j)] =
                static_cast<float>(means[static_cast<size_t>(cls)][static_cast<size_t>(j)] + gauss(rng));
    }

    const int64_t train_count = all.count * 8 / 10;
    TrainTestSplit split;
    auto take = [&](int64_t from, int64_t to) {
        Dataset d;
        d.count = to - from;
        d.features = dims;
        d.num_classes = classes;
        d.x.assign(all.x.begin() + from * dims, all.x.begin() + to * dims);
        d.y.assign(all.y.begin() + from, all.y.begin() + to);
        return d;
    };
    split.train = take(0, train_count);
    split.test = take(train_count, all.count);
    return split;
}

namespace {
// One 8×8 stamp per class, placed with a random shift on the canvas.
const char* kGlyphs[10] = {
    // 0: horizontal bar
    "........"
    "........"
    "........"
    "########"
    "########"
    "........"
    "........"
    "........",
    // 1: vertical bar
    "...##..."
    "...##..."
    "...##..."
    "...##..."
    "...##..."
    "...##..."
    "...##..."
    "...##...",
    // 2: main diagonal
    "##......"
    ".##....."
    "..##...."
    "...##..."
    "....##.."
    ".....##."
    "......##"
    ".......#",
    // 3: anti-diagonal
    ".......#"
    "......##"
    ".....##."
    "....##.."
    "...##..."
    "..##...."
    ".##....."
    "##......",
    // 4: plus
    "...##..."
    "...##..."
    "...##..."
    "########"
    "########"
    "...##..."
    "...##..."
    "...##...",
    // 5: X
    "#......#"
    "##....##"
    ".##..##."
    "..####.."
    "..####.."
    ".##..##."
    "##....##"
    "#......#",
    // 6: square outline
    "########"
    "########"
    "##....##"
    "##....##"
    "##....##"
    "##....##"
    "########"
    "########",
    // 7: filled center block
    "........"
    "........"
    "..####.."
    "..####.."
    "..####.."
    "..####.."
    "........"
    "........",
    // 8: two horizontal bars
    "########"
    "########"
    "........"
    "........"
    "........"
    "........"
    "########"
    "########",
    // 9: two vertical bars
    "##....##"
    "##....##"
    "##....##"
    "##....##"
    "##....##"
    "##....##"
    "##....##"
    "##....##",
};
constexpr int kStamp = 8;
}  // namespace

Dataset synth_glyphs(int classes, int image_size, int count, uint64_t seed, double noise_sigma) {
    if (classes < 2 || classes > 10) throw std::invalid_argument("synth_glyphs: classes must be in [2,10]");
    if (image_size < kStamp + 2) throw std::invalid_argument("synth_glyphs: image_size must be >= 10");
    std::mt19937_64 rng(derive_seed(seed, "glyph-data"));
    std::uniform_int_distribution<int> shift(0, image_size - kStamp);
    std::uniform_real_distribution<double> intensity(0.5, 1.0);
    std::normal_distribution<double> noise(0.0, noise_sigma);

    Dataset d;
    d.count = count;
    d.channels = 1;
    d.height = image_size;
    d.width = image_size;
    d.features = static_cast<int64_t>(image_size) * image_size;
    d.num_classes = classes;
    d.x.resize(static_cast<size_t>(d.count * d.features));
    d.y.resize(static_cast<size_t>(count));

    for (int64_t i = 0; i < count; ++i) {
        const int cls = static_cast<int>(i % classes);
        d.y[static_cast<size_t>(i)] = cls;
        const int dy = shift(rng), dx = shift(rng);
        const double a = intensity(rng);
        float* img = d.x.data() + i * d.features;
        for (int r = 0; r < image_size; ++r)
            for (int c = 0; c < image_size; ++c) {
                double v = std::abs(noise(rng));  // background clutter
                const int sr = r - dy, sc = c - dx;
                if (sr >= 0 && sr < kStamp && sc >= 0 && sc < kStamp &&
                    kGlyphs[cls][sr * kStamp + sc] == '#')
                    v = a + noise(rng);
                // u8 quantization, same expression as load_idx, so an IDX
                // round trip reproduces these floats bit-exactly
                const double clamped = std::clamp(v, 0.0, 1.0);
                img[r * image_size + c] = static_cast<float>(std::lround(clamped * 255.0)) / 255.0f;
            }
    }
    return d;
}

NormStats compute_norm_stats(const Dataset& d) {
    double s = 0.0, s2 = 0.0;
    for (float v : d.x) {
        s += v;
        s2 += static_cast<double>(v) * v;
    }
    const double n = static_cast<double>(d.x.size());
    const double mean = s / n;
    const double var = std::max(s2 / n - mean * mean, 1e-12);
    return NormStats{static_cast<float>(mean), static_cast<float>(std::sqrt(var))};
}

void normalize(Dataset& d, const NormStats& stats) {
    for (float& v : d.x) v = (v - stats.mean) / stats.stddev;
}

}  // namespace ldp
