#include "feddwa/synthdata.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "feddwa/rng.hpp"

namespace feddwa {

namespace {

// Field tags for the counter RNG so every random quantity of a sample has its
// own stream, independent of evaluation order.
enum Field : std::uint64_t {
    kShapeClass = 1,
    kShapeKind = 2,
    kShapeGeom = 3,
    kNoise = 4,
};

constexpr int kShapeSlots = 3;

struct Shape {
    int cls = 0;          // 0 = background, renders nothing
    bool disc = false;
    double cx = 0, cy = 0;
    double a = 0, b = 0;  // radius or half-extents
    double rot = 0;       // rectangle orientation
};

int draw_class(double u, const Eigen::VectorXd& prior) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < prior.size(); ++k) {
        acc += prior(k);
        if (u < acc) return static_cast<int>(k);
    }
    return static_cast<int>(prior.size()) - 1;
}

Shape draw_shape(const ClientProfile& profile, int sample_index, int slot) {
    Shape s;
    const std::uint64_t base = profile.seed;
    s.cls = draw_class(
        keyed_uniform(rng_key(base, kShapeClass, sample_index), slot),
        profile.class_prior);
    if (s.cls == 0) return s;
    s.disc = keyed_uniform(rng_key(base, kShapeKind, sample_index), slot) < 0.5;
    const std::uint64_t gk = rng_key(base, kShapeGeom, sample_index);
    const auto u = [&](int j) {
        return keyed_uniform(gk, static_cast<std::uint64_t>(slot) * 8 + j);
    };
    s.cx = -0.6 + 1.2 * u(0);
    s.cy = -0.6 + 1.2 * u(1);
    s.a = 0.15 + 0.3 * u(2);
    s.b = s.disc ? s.a : 0.15 + 0.3 * u(3);
    s.rot = 2.0 * std::numbers::pi * u(4);
    return s;
}

bool contains(const Shape& s, double x, double y) {
    const double dx = x - s.cx;
    const double dy = y - s.cy;
    if (s.disc) return dx * dx + dy * dy <= s.a * s.a;
    const double c = std::cos(s.rot), sn = std::sin(s.rot);
    const double u = c * dx + sn * dy;
    const double v = -sn * dx + c * dy;
    return std::abs(u) <= s.a && std::abs(v) <= s.b;
}

Sample render_sample(const ClientProfile& profile, const Geometry& geom,
                     int sample_index) {
    const int h = geom.height, w = geom.width;
    const int pixels = h * w;
    Sample sample;
    sample.height = h;
    sample.width = w;
    sample.mask = Eigen::VectorXi::Zero(pixels);

    Shape shapes[kShapeSlots];
    for (int slot = 0; slot < kShapeSlots; ++slot) {
        shapes[slot] = draw_shape(profile, sample_index, slot);
    }

    // Rasterize: map each pixel through the inverse pose into latent scene
    // coordinates; later slots draw over earlier ones.
    const double ca = std::cos(-profile.pose_angle);
    const double sa = std::sin(-profile.pose_angle);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double x = (c + 0.5) / w * 2.0 - 1.0 - profile.pose_tx;
            const double y = (r + 0.5) / h * 2.0 - 1.0 - profile.pose_ty;
            const double lx = ca * x - sa * y;
            const double ly = sa * x + ca * y;
            for (int slot = 0; slot < kShapeSlots; ++slot) {
                const Shape& s = shapes[slot];
                if (s.cls != 0 && contains(s, lx, ly)) {
                    sample.mask(r * w + c) = s.cls;
                }
            }
        }
    }

    // Features: the first min(F, K) channels are a 3x3 box-smoothed one-hot of
    // the mask; remaining channels carry noise only. Gaussian noise of scale
    // noise_sigma is added everywhere so the task stays imperfect.
    sample.features = Eigen::MatrixXd::Zero(pixels, geom.features);
    const int onehot_channels = std::min(geom.features, geom.classes);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            for (int f = 0; f < onehot_channels; ++f) {
                double acc = 0.0;
                int count = 0;
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int rr = r + dr, cc = c + dc;
                        if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                        acc += sample.mask(rr * w + cc) == f ? 1.0 : 0.0;
                        ++count;
                    }
                }
                sample.features(r * w + c, f) = acc / count;
            }
        }
    }
    if (profile.noise_sigma > 0.0) {
        const std::uint64_t nk = rng_key(profile.seed, kNoise, sample_index);
        for (int p = 0; p < pixels; ++p) {
            for (int f = 0; f < geom.features; ++f) {
                sample.features(p, f) += profile.noise_sigma *
                    keyed_normal(nk, static_cast<std::uint64_t>(p) * geom.features + f);
            }
        }
    }
    return sample;
}

void validate_inputs(const ClientProfile& profile, const Geometry& geom) {
    if (geom.height < 1 || geom.width < 1 || geom.features < 1 || geom.classes < 1) {
        throw std::invalid_argument("generate_client_dataset: degenerate geometry");
    }
    if (profile.n_samples < 1) {
        throw std::invalid_argument("generate_client_dataset: n_samples must be >= 1");
    }
    if (profile.class_prior.size() != geom.classes) {
        throw std::invalid_argument(
            "generate_client_dataset: class_prior length does not match class count");
    }
    if ((profile.class_prior.array() < 0.0).any() ||
        std::abs(profile.class_prior.sum() - 1.0) > 1e-9) {
        throw std::invalid_argument(
            "generate_client_dataset: class_prior is not a probability vector");
    }
    if (profile.noise_sigma < 0.0) {
        throw std::invalid_argument("generate_client_dataset: negative noise_sigma");
    }
}

double gamma_draw(RngStream& rng, double alpha) {
    // Marsaglia-Tsang; the alpha < 1 case goes through Gamma(alpha + 1).
    if (alpha < 1.0) {
        const double u = rng.uniform();
        return gamma_draw(rng, alpha + 1.0) *
               std::pow(u > 0.0 ? u : 0x1.0p-60, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
            return d * v;
        }
    }
}

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

constexpr std::uint32_t kDatasetMagic = 0x46445331;  // "FDS1"
constexpr std::uint32_t kDatasetVersion = 1;

}  // namespace

ClientDataset generate_client_dataset(const ClientProfile& profile,
                                      const Geometry& geom) {
    validate_inputs(profile, geom);
    ClientDataset out;
    const int n = profile.n_samples;
    const int n_test = n / 5;  // 80/20 by generation order
    out.train.reserve(n - n_test);
    out.test.reserve(n_test);
    for (int i = 0; i < n; ++i) {
        Sample s = render_sample(profile, geom, i);
        if (i < n - n_test) {
            out.train.push_back(std::move(s));
        } else {
            out.test.push_back(std::move(s));
        }
    }
    return out;
}

std::vector<Eigen::VectorXd> dirichlet_priors(double alpha, int k, int m,
                                              std::uint64_t seed) {
    if (alpha <= 0.0) {
        throw std::invalid_argument("dirichlet_priors: alpha must be positive");
    }
    if (k < 1 || m < 1) {
        throw std::invalid_argument("dirichlet_priors: need k >= 1 and m >= 1");
    }
    std::vector<Eigen::VectorXd> priors;
    priors.reserve(m);
    for (int j = 0; j < m; ++j) {
        RngStream rng(rng_key(seed, 0x64697269 /* "diri" */, j));
        Eigen::VectorXd g(k);
        for (int i = 0; i < k; ++i) g(i) = gamma_draw(rng, alpha);
        const double total = g.sum();
        priors.push_back(total > 0.0 ? Eigen::VectorXd(g / total)
                                     : Eigen::VectorXd::Constant(k, 1.0 / k));
    }
    return priors;
}

void save_samples(const std::string& path, const std::vector<Sample>& samples,
                  const Geometry& geom) {
    static_assert(std::endian::native == std::endian::little,
                  "dataset files are little-endian");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_samples: cannot open " + path);
    write_raw(out, kDatasetMagic);
    write_raw(out, kDatasetVersion);
    for (std::uint32_t v : {geom.height, geom.width, geom.features, geom.classes,
                            static_cast<int>(samples.size())}) {
        write_raw(out, v);
    }
    const std::streamsize feat_bytes =
        static_cast<std::streamsize>(geom.height) * geom.width * geom.features *
        sizeof(double);
    const std::streamsize mask_bytes =
        static_cast<std::streamsize>(geom.height) * geom.width * sizeof(std::int32_t);
    for (const Sample& s : samples) {
        out.write(reinterpret_cast<const char*>(s.features.data()), feat_bytes);
        out.write(reinterpret_cast<const char*>(s.mask.data()), mask_bytes);
    }
    if (!out) throw std::runtime_error("save_samples: write failed for " + path);
}

std::vector<Sample> load_samples(const std::string& path, Geometry* geom_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_samples: cannot open " + path);
    if (read_raw<std::uint32_t>(in) != kDatasetMagic) {
        throw std::runtime_error("load_samples: bad magic in " + path);
    }
    if (read_raw<std::uint32_t>(in) != kDatasetVersion) {
        throw std::runtime_error("load_samples: unsupported version in " + path);
    }
    Geometry geom;
    geom.height = static_cast<int>(read_raw<std::uint32_t>(in));
    geom.width = static_cast<int>(read_raw<std::uint32_t>(in));
    geom.features = static_cast<int>(read_raw<std::uint32_t>(in));
    geom.classes = static_cast<int>(read_raw<std::uint32_t>(in));
    const auto n = read_raw<std::uint32_t>(in);
    const int pixels = geom.height * geom.width;
    std::vector<Sample> samples(n);
    for (auto& s : samples) {
        s.height = geom.height;
        s.width = geom.width;
        s.features.resize(pixels, geom.features);
        s.mask.resize(pixels);
        in.read(reinterpret_cast<char*>(s.features.data()),
                static_cast<std::streamsize>(pixels) * geom.features * sizeof(double));
        in.read(reinterpret_cast<char*>(s.mask.data()),
                static_cast<std::streamsize>(pixels) * sizeof(std::int32_t));
    }
    if (!in) throw std::runtime_error("load_samples: truncated file " + path);
    if (geom_out != nullptr) *geom_out = geom;
    return samples;
}

}  // namespace feddwa
