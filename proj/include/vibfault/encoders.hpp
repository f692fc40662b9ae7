#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vibfault/signal.hpp"

namespace vibfault::encoders {

enum class Method { PixelStrength, Gasf, Mtf, Recurrence, GafMtf };

const char* to_string(Method m); // "pixel", "gasf", "mtf", "rp", "gafmtf"
std::optional<Method> method_from_string(const std::string& s);
std::vector<Method> all_methods();

// Paper-shaped defaults: 31 for pixel strength (961 samples of a 1000-sample
// segment), 256 for everything else.
int default_side(Method m);
int channels_for(Method m);

struct EncodeOptions {
    int bins = 8;        // MTF quantile states
    int mtf_pool = 1;    // optional w x w mean pooling of the MTF image
    bool decimate = false; // take every k-th sample instead of the prefix
};

// Square image of one or two float32 channels plus encoding metadata.
// Arithmetic happens in double precision; storage is float for the network.
struct EncodedImage {
    int channels = 1;
    int side = 0;
    std::vector<float> data; // channels * side * side, row-major
    Method method = Method::PixelStrength;
    std::chrono::nanoseconds encode_time{0};

    float at(int c, int i, int j) const {
        return data[static_cast<std::size_t>((c * side + i)) * side + j];
    }
    std::size_t pixel_count() const { return data.size(); }
};

// ---- double-precision cores (side*side row-major, except as noted) ----
// These are the arithmetic contracts; the encode_* wrappers add sample
// selection, timing, and float32 storage.

// First M*M samples min-max normalized to [0,1], filled row-major.
std::vector<double> pixel_strength_matrix(std::span<const double> x, int side);

// Rescale to [-1,1] (constant input maps to 0), angles phi = acos(x),
// G(i,j) = cos(phi_i + phi_j) on the first M samples.
std::vector<double> gasf_matrix(std::span<const double> x, int side);

// Quantile-bin states of x: value v belongs to the smallest bin k whose upper
// edge (the last element of the k-th quantile block of the sorted data) is
// >= v. Ties share a bin by construction.
std::vector<int> quantile_bins(std::span<const double> x, int bins);

// Row-stochastic Q x Q first-order transition matrix of a state sequence.
// Rows with no outgoing transitions become uniform 1/Q.
std::vector<double> transition_matrix(std::span<const int> states, int bins);

// M(i,j) = W[q(i)][q(j)] on the first M samples.
std::vector<double> mtf_matrix(std::span<const double> x, int side, int bins);

// Unthresholded |x_i - x_j| rescaled to [0,1] by its max (zero matrix stays zero).
std::vector<double> recurrence_matrix(std::span<const double> x, int side);

// ---- segment encoders ----

EncodedImage encode_pixel_strength(const signal::Segment& segment, int side,
                                   const EncodeOptions& opts = {});
EncodedImage encode_gasf(const signal::Segment& segment, int side,
                         const EncodeOptions& opts = {});
EncodedImage encode_mtf(const signal::Segment& segment, int side,
                        const EncodeOptions& opts = {});
EncodedImage encode_recurrence(const signal::Segment& segment, int side,
                               const EncodeOptions& opts = {});
// Channel 0 = GASF, channel 1 = MTF, same side.
EncodedImage encode_gaf_mtf(const signal::Segment& segment, int side,
                            const EncodeOptions& opts = {});

EncodedImage encode(const signal::Segment& segment, Method method, int side,
                    const EncodeOptions& opts = {});

// ---- recurrence quantification ----

struct RqaSummary {
    double recurrence_rate = 0.0; // off-diagonal density of the binarized plot
    double determinism = 0.0;     // fraction of recurrent points on diagonals >= l_min
    double laminarity = 0.0;      // same for vertical runs
    int l_max = 0;                // longest off-main-diagonal line
    double entropy = 0.0;         // Shannon entropy (nats) of diagonal line lengths >= l_min
};

// Binarizes R(i,j) <= epsilon and scans line structures. The input must be a
// Recurrence image; epsilon in [0,1]; l_min >= 2.
RqaSummary rqa_summary(const EncodedImage& recurrence, double epsilon, int l_min);

// ---- image export ----

std::uint8_t quantize_unit(double v);               // [0,1] -> 0..255, round to nearest
std::vector<std::uint8_t> quantize_image(const EncodedImage& img); // one channel

// Binary PGM (P5, maxval 255) of a single-channel image. GASF values are
// mapped from [-1,1] to [0,1] before quantization; other methods are already
// in [0,1].
void write_pgm(const EncodedImage& img, const std::string& path);

// Raw tensor container: magic "VIMG", u32 version, u32 channels, u32 side,
// then channels*side*side little-endian float32 values.
void write_vimg(const EncodedImage& img, const std::string& path);
EncodedImage read_vimg(const std::string& path);

} // namespace vibfault::encoders
