#include "vibfault/encoders.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "vibfault/errors.hpp"

namespace vibfault::encoders {

const char* to_string(Method m) {
    switch (m) {
        case Method::PixelStrength: return "pixel";
        case Method::Gasf: return "gasf";
        case Method::Mtf: return "mtf";
        case Method::Recurrence: return "rp";
        case Method::GafMtf: return "gafmtf";
    }
    return "?";
}

std::optional<Method> method_from_string(const std::string& s) {
    if (s == "pixel") return Method::PixelStrength;
    if (s == "gasf") return Method::Gasf;
    if (s == "mtf") return Method::Mtf;
    if (s == "rp") return Method::Recurrence;
    if (s == "gafmtf") return Method::GafMtf;
    return std::nullopt;
}

std::vector<Method> all_methods() {
    return {Method::PixelStrength, Method::Gasf, Method::Mtf, Method::Recurrence, Method::GafMtf};
}

int default_side(Method m) { return m == Method::PixelStrength ? 31 : 256; }

int channels_for(Method m) { return m == Method::GafMtf ? 2 : 1; }

namespace {

// Picks the window an encoder works on: the first n samples, or every k-th
// sample when decimating a longer segment.
std::vector<double> select_window(const signal::Segment& segment, std::size_t n, bool decimate) {
    const auto& s = segment.samples;
    if (s.size() < n)
        throw ValidationError("segment too short: encoder needs " + std::to_string(n) +
                              " samples, segment has " + std::to_string(s.size()));
    std::vector<double> w(n);
    if (decimate && s.size() > n) {
        const std::size_t stride = s.size() / n;
        for (std::size_t i = 0; i < n; ++i) w[i] = s[i * stride];
    } else {
        std::copy(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n), w.begin());
    }
    return w;
}

// Rescale to [-1,1] for the polar mapping. A constant window maps to 0, the
// midpoint angle, so the transform stays defined.
std::vector<double> rescale_unit_sym(std::span<const double> x) {
    const auto [mn_it, mx_it] = std::minmax_element(x.begin(), x.end());
    const double mn = *mn_it, mx = *mx_it;
    std::vector<double> out(x.size());
    if (mn == mx) return out;
    const double scale = 2.0 / (mx - mn);
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = std::clamp(-1.0 + (x[i] - mn) * scale, -1.0, 1.0);
    return out;
}

std::vector<float> to_f32(const std::vector<double>& v) {
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
    return out;
}

void check_side(int side) {
    if (side < 2) throw ValidationError("image side must be >= 2");
}

using Clock = std::chrono::steady_clock;

} // namespace

std::vector<double> pixel_strength_matrix(std::span<const double> x, int side) {
    const std::size_t n = static_cast<std::size_t>(side) * static_cast<std::size_t>(side);
    return signal::minmax_normalize(x.first(n), 0.0, 1.0);
}

std::vector<double> gasf_matrix(std::span<const double> x, int side) {
    const std::size_t m = static_cast<std::size_t>(side);
    const auto scaled = rescale_unit_sym(x.first(m));
    // cos(phi_i + phi_j) expanded: x_i x_j - sqrt(1-x_i^2) sqrt(1-x_j^2)
    std::vector<double> root(m);
    for (std::size_t i = 0; i < m; ++i) root[i] = std::sqrt(1.0 - scaled[i] * scaled[i]);
    std::vector<double> img(m * m);
    for (std::size_t i = 0; i < m; ++i) {
        const double xi = scaled[i], ri = root[i];
        double* row = img.data() + i * m;
        for (std::size_t j = 0; j < m; ++j) row[j] = xi * scaled[j] - ri * root[j];
    }
    return img;
}

std::vector<int> quantile_bins(std::span<const double> x, int bins) {
    if (bins < 2) throw ValidationError("bin count must be >= 2");
    const std::size_t m = x.size();
    if (m == 0) throw ValidationError("cannot bin an empty window");
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> edges(static_cast<std::size_t>(bins));
    for (int k = 0; k < bins; ++k) {
        // Last element of the k-th equal-count block. With more bins than
        // samples the leading blocks are empty and repeat the first edge.
        std::size_t idx =
            static_cast<std::size_t>((static_cast<unsigned long long>(k + 1) * m) / bins);
        if (idx == 0) idx = 1;
        edges[static_cast<std::size_t>(k)] = sorted[idx - 1];
    }
    std::vector<int> states(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto it = std::lower_bound(edges.begin(), edges.end(), x[i]);
        states[i] = it == edges.end() ? bins - 1 : static_cast<int>(it - edges.begin());
    }
    return states;
}

std::vector<double> transition_matrix(std::span<const int> states, int bins) {
    const std::size_t q = static_cast<std::size_t>(bins);
    std::vector<double> w(q * q, 0.0);
    for (std::size_t t = 0; t + 1 < states.size(); ++t)
        w[static_cast<std::size_t>(states[t]) * q + static_cast<std::size_t>(states[t + 1])] += 1.0;
    for (std::size_t a = 0; a < q; ++a) {
        double total = 0.0;
        for (std::size_t b = 0; b < q; ++b) total += w[a * q + b];
        if (total > 0.0) {
            for (std::size_t b = 0; b < q; ++b) w[a * q + b] /= total;
        } else {
            for (std::size_t b = 0; b < q; ++b) w[a * q + b] = 1.0 / static_cast<double>(bins);
        }
    }
    return w;
}

std::vector<double> mtf_matrix(std::span<const double> x, int side, int bins) {
    const std::size_t m = static_cast<std::size_t>(side);
    const auto window = x.first(m);
    const auto states = quantile_bins(window, bins);
    const auto w = transition_matrix(states, bins);
    std::vector<double> img(m * m);
    const std::size_t q = static_cast<std::size_t>(bins);
    for (std::size_t i = 0; i < m; ++i) {
        const double* wrow = w.data() + static_cast<std::size_t>(states[i]) * q;
        double* row = img.data() + i * m;
        for (std::size_t j = 0; j < m; ++j) row[j] = wrow[static_cast<std::size_t>(states[j])];
    }
    return img;
}

std::vector<double> recurrence_matrix(std::span<const double> x, int side) {
    const std::size_t m = static_cast<std::size_t>(side);
    std::vector<double> img(m * m);
    double mx = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double xi = x[i];
        double* row = img.data() + i * m;
        for (std::size_t j = 0; j < m; ++j) {
            const double d = std::fabs(xi - x[j]);
            row[j] = d;
            if (d > mx) mx = d;
        }
    }
    if (mx > 0.0) {
        const double inv = 1.0 / mx;
        for (auto& v : img) v *= inv;
    }
    return img;
}

namespace {

std::vector<double> mean_pool(const std::vector<double>& img, int side, int w) {
    if (w <= 1) return img;
    if (side % w != 0)
        throw ValidationError("pool width must divide the image side");
    const int out_side = side / w;
    std::vector<double> out(static_cast<std::size_t>(out_side) * out_side, 0.0);
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j)
            out[static_cast<std::size_t>(i / w) * out_side + (j / w)] +=
                img[static_cast<std::size_t>(i) * side + j];
    const double inv = 1.0 / (static_cast<double>(w) * w);
    for (auto& v : out) v *= inv;
    return out;
}

} // namespace

EncodedImage encode_pixel_strength(const signal::Segment& segment, int side,
                                   const EncodeOptions& opts) {
    check_side(side);
    const auto t0 = Clock::now();
    const auto window =
        select_window(segment, static_cast<std::size_t>(side) * static_cast<std::size_t>(side),
                      opts.decimate);
    auto img = pixel_strength_matrix(window, side);
    EncodedImage out;
    out.channels = 1;
    out.side = side;
    out.data = to_f32(img);
    out.method = Method::PixelStrength;
    out.encode_time = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0);
    return out;
}

EncodedImage encode_gasf(const signal::Segment& segment, int side, const EncodeOptions& opts) {
    check_side(side);
    const auto t0 = Clock::now();
    const auto window = select_window(segment, static_cast<std::size_t>(side), opts.decimate);
    auto img = gasf_matrix(window, side);
    EncodedImage out;
    out.channels = 1;
    out.side = side;
    out.data = to_f32(img);
    out.method = Method::Gasf;
    out.encode_time = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0);
    return out;
}

EncodedImage encode_mtf(const signal::Segment& segment, int side, const EncodeOptions& opts) {
    check_side(side);
    const auto t0 = Clock::now();
    const auto window = select_window(segment, static_cast<std::size_t>(side), opts.decimate);
    auto img = mean_pool(mtf_matrix(window, side, opts.bins), side, opts.mtf_pool);
    EncodedImage out;
    out.channels = 1;
    out.side = opts.mtf_pool > 1 ? side / opts.mtf_pool : side;
    out.data = to_f32(img);
    out.method = Method::Mtf;
    out.encode_time = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0);
    return out;
}

EncodedImage encode_recurrence(const signal::Segment& segment, int side,
                               const EncodeOptions& opts) {
    check_side(side);
    const auto t0 = Clock::now();
    const auto window = select_window(segment, static_cast<std::size_t>(side), opts.decimate);
    auto img = recurrence_matrix(window, side);
    EncodedImage out;
    out.channels = 1;
    out.side = side;
    out.data = to_f32(img);
    out.method = Method::Recurrence;
    out.encode_time = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0);
    return out;
}

EncodedImage encode_gaf_mtf(const signal::Segment& segment, int side, const EncodeOptions& opts) {
    check_side(side);
    if (opts.mtf_pool > 1)
        throw ValidationError("gafmtf channels must share one side; pooling is not supported here");
    const auto t0 = Clock::now();
    const auto window = select_window(segment, static_cast<std::size_t>(side), opts.decimate);
    auto g = gasf_matrix(window, side);
    auto m = mtf_matrix(window, side, opts.bins);
    EncodedImage out;
    out.channels = 2;
    out.side = side;
    out.data.reserve(g.size() + m.size());
    for (double v : g) out.data.push_back(static_cast<float>(v));
    for (double v : m) out.data.push_back(static_cast<float>(v));
    out.method = Method::GafMtf;
    out.encode_time = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0);
    return out;
}

EncodedImage encode(const signal::Segment& segment, Method method, int side,
                    const EncodeOptions& opts) {
    switch (method) {
        case Method::PixelStrength: return encode_pixel_strength(segment, side, opts);
        case Method::Gasf: return encode_gasf(segment, side, opts);
        case Method::Mtf: return encode_mtf(segment, side, opts);
        case Method::Recurrence: return encode_recurrence(segment, side, opts);
        case Method::GafMtf: return encode_gaf_mtf(segment, side, opts);
    }
    throw ValidationError("unknown encoding method");
}

RqaSummary rqa_summary(const EncodedImage& recurrence, double epsilon, int l_min) {
    if (recurrence.method != Method::Recurrence)
        throw ValidationError("rqa_summary expects a recurrence image");
    if (epsilon < 0.0 || epsilon > 1.0) throw ValidationError("epsilon must be in [0,1]");
    if (l_min < 2) throw ValidationError("l_min must be >= 2");

    const int m = recurrence.side;
    std::vector<char> b(static_cast<std::size_t>(m) * m);
    for (std::size_t i = 0; i < b.size(); ++i)
        b[i] = recurrence.data[i] <= static_cast<float>(epsilon) ? 1 : 0;

    RqaSummary out;
    long long recurrent = 0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (i != j && b[static_cast<std::size_t>(i) * m + j]) ++recurrent;
    out.recurrence_rate =
        static_cast<double>(recurrent) / (static_cast<double>(m) * m - static_cast<double>(m));
    if (recurrent == 0) return out;

    // Diagonal structures on every offset except the main diagonal.
    std::vector<long long> hist(static_cast<std::size_t>(m) + 1, 0);
    long long det_points = 0;
    for (int d = -(m - 1); d <= m - 1; ++d) {
        if (d == 0) continue;
        const int i_begin = std::max(0, -d);
        const int i_end = std::min(m, m - d); // exclusive
        int run = 0;
        for (int i = i_begin; i <= i_end; ++i) {
            const bool on = i < i_end && b[static_cast<std::size_t>(i) * m + (i + d)];
            if (on) {
                ++run;
            } else if (run > 0) {
                hist[static_cast<std::size_t>(run)]++;
                if (run > out.l_max) out.l_max = run;
                if (run >= l_min) det_points += run;
                run = 0;
            }
        }
    }
    out.determinism = static_cast<double>(det_points) / static_cast<double>(recurrent);

    // Vertical runs span whole columns; only off-diagonal points count.
    long long lam_points = 0;
    for (int j = 0; j < m; ++j) {
        int run = 0, off_diag = 0;
        for (int i = 0; i <= m; ++i) {
            const bool on = i < m && b[static_cast<std::size_t>(i) * m + j];
            if (on) {
                ++run;
                if (i != j) ++off_diag;
            } else {
                if (run >= l_min) lam_points += off_diag;
                run = 0;
                off_diag = 0;
            }
        }
    }
    out.laminarity = static_cast<double>(lam_points) / static_cast<double>(recurrent);

    long long lines = 0;
    for (int l = l_min; l <= m; ++l) lines += hist[static_cast<std::size_t>(l)];
    for (int l = l_min; l <= m && lines > 0; ++l) {
        if (hist[static_cast<std::size_t>(l)] == 0) continue;
        const double p =
            static_cast<double>(hist[static_cast<std::size_t>(l)]) / static_cast<double>(lines);
        out.entropy -= p * std::log(p);
    }
    return out;
}

std::uint8_t quantize_unit(double v) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(clamped * 255.0));
}

std::vector<std::uint8_t> quantize_image(const EncodedImage& img) {
    if (img.channels != 1) throw ValidationError("quantize expects a single-channel image");
    std::vector<std::uint8_t> out(img.data.size());
    const bool symmetric = img.method == Method::Gasf;
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        double v = img.data[i];
        if (symmetric) v = (v + 1.0) / 2.0;
        out[i] = quantize_unit(v);
    }
    return out;
}

void write_pgm(const EncodedImage& img, const std::string& path) {
    if (img.channels != 1)
        throw ValidationError("PGM export needs a single-channel image; use VIMG instead");
    const auto bytes = quantize_image(img);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "P5\n" << img.side << " " << img.side << "\n255\n";
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

namespace {

void put_u32le(std::ostream& os, std::uint32_t v) {
    const char buf[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(buf, 4);
}

std::uint32_t get_u32le(std::istream& is) {
    unsigned char buf[4];
    is.read(reinterpret_cast<char*>(buf), 4);
    return static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
           (static_cast<std::uint32_t>(buf[2]) << 16) | (static_cast<std::uint32_t>(buf[3]) << 24);
}

constexpr std::uint32_t kVimgVersion = 1;

} // namespace

void write_vimg(const EncodedImage& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write("VIMG", 4);
    put_u32le(f, kVimgVersion);
    put_u32le(f, static_cast<std::uint32_t>(img.channels));
    put_u32le(f, static_cast<std::uint32_t>(img.side));
    for (float v : img.data) put_u32le(f, std::bit_cast<std::uint32_t>(v));
    if (!f) throw IoError("write failed: " + path);
}

EncodedImage read_vimg(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "VIMG", 4) != 0)
        throw ValidationError("not a VIMG file: " + path);
    const std::uint32_t version = get_u32le(f);
    if (version != kVimgVersion) throw ValidationError("unsupported VIMG version");
    EncodedImage img;
    img.channels = static_cast<int>(get_u32le(f));
    img.side = static_cast<int>(get_u32le(f));
    if (!f || img.channels < 1 || img.channels > 2 || img.side < 1)
        throw ValidationError("corrupt VIMG header: " + path);
    const std::size_t n = static_cast<std::size_t>(img.channels) * img.side * img.side;
    img.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) img.data[i] = std::bit_cast<float>(get_u32le(f));
    if (!f) throw ValidationError("corrupt VIMG payload: " + path);
    // The container does not record the method; two channels can only come
    // from the dual-channel encoder.
    if (img.channels == 2) img.method = Method::GafMtf;
    return img;
}

} // namespace vibfault::encoders
