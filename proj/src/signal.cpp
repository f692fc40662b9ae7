#include "vibfault/signal.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "vibfault/errors.hpp"
#include "vibfault/rng.hpp"

namespace vibfault::signal {

const char* to_string(Condition c) {
    switch (c) {
        case Condition::Healthy: return "healthy";
        case Condition::Ball: return "ball";
        case Condition::InnerRace: return "ir";
        case Condition::OuterRace: return "or";
    }
    return "?";
}

std::optional<Condition> condition_from_string(const std::string& s) {
    std::string t;
    t.reserve(s.size());
    for (char c : s) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (t == "healthy") return Condition::Healthy;
    if (t == "ball") return Condition::Ball;
    if (t == "ir" || t == "innerrace" || t == "inner") return Condition::InnerRace;
    if (t == "or" || t == "outerrace" || t == "outer") return Condition::OuterRace;
    return std::nullopt;
}

void validate(const SignalRecord& record) {
    if (record.samples.empty()) throw ValidationError("signal record has no samples");
    if (!(record.sample_rate_hz > 0.0)) throw ValidationError("sample rate must be positive");
    if (record.rpm <= 0) throw ValidationError("rpm must be positive");
    const bool has_diameter = record.fault_diameter_in.has_value();
    if (record.condition == Condition::Healthy && has_diameter)
        throw ValidationError("healthy record must not carry a fault diameter");
    if (record.condition != Condition::Healthy && !has_diameter)
        throw ValidationError("faulty record must carry a fault diameter");
    if (has_diameter && *record.fault_diameter_in < 0.0)
        throw ValidationError("fault diameter must be >= 0");
}

std::vector<Segment> segment_record(const SignalRecord& record, std::size_t length) {
    if (length < 2) throw ValidationError("segment length must be >= 2");
    if (record.samples.size() < length)
        throw ValidationError("insufficient samples: record has " +
                              std::to_string(record.samples.size()) + ", segment needs " +
                              std::to_string(length));
    const std::size_t count = record.samples.size() / length;
    std::vector<Segment> segments;
    segments.reserve(count);
    SegmentMeta meta{record.rpm, record.condition, record.fault_diameter_in};
    for (std::size_t i = 0; i < count; ++i) {
        Segment seg;
        seg.samples.assign(record.samples.begin() + static_cast<std::ptrdiff_t>(i * length),
                           record.samples.begin() + static_cast<std::ptrdiff_t>((i + 1) * length));
        seg.source = meta;
        seg.index = i;
        segments.push_back(std::move(seg));
    }
    return segments;
}

std::vector<double> minmax_normalize(std::span<const double> samples, double lo, double hi) {
    if (samples.empty()) throw ValidationError("cannot normalize an empty sequence");
    if (!(lo < hi)) throw ValidationError("normalize bounds must satisfy lo < hi");
    const auto [mn_it, mx_it] = std::minmax_element(samples.begin(), samples.end());
    const double mn = *mn_it, mx = *mx_it;
    std::vector<double> out(samples.size());
    if (mn == mx) {
        std::fill(out.begin(), out.end(), lo); // degenerate constant signal
        return out;
    }
    const double scale = (hi - lo) / (mx - mn);
    for (std::size_t i = 0; i < samples.size(); ++i)
        out[i] = lo + (samples[i] - mn) * scale;
    return out;
}

namespace {

double impulse_rate_hz(const SynthConfig& cfg, Condition c, double shaft_hz) {
    switch (c) {
        case Condition::Ball: return cfg.ball_rate_factor * shaft_hz;
        case Condition::InnerRace: return cfg.inner_rate_factor * shaft_hz;
        case Condition::OuterRace: return cfg.outer_rate_factor * shaft_hz;
        case Condition::Healthy: break;
    }
    return 0.0;
}

} // namespace

SignalRecord synth_signal(const SynthConfig& config, Condition condition,
                          double duration_s, double fault_diameter_in) {
    if (!(duration_s > 0.0)) throw ValidationError("duration must be positive");
    if (!(config.sample_rate_hz > 0.0) || !(config.rpm > 0.0) || !(config.ring_freq_hz > 0.0))
        throw ValidationError("synth rates must be positive");
    if (!(config.ring_decay > 0.0)) throw ValidationError("ring decay must be positive");
    if (config.noise_sigma < 0.0) throw ValidationError("noise sigma must be >= 0");

    const std::size_t n = static_cast<std::size_t>(duration_s * config.sample_rate_hz);
    const double dt = 1.0 / config.sample_rate_hz;
    const double shaft_hz = config.rpm / 60.0;
    const double two_pi = 6.283185307179586476925286766559;

    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = config.shaft_amp * std::sin(two_pi * shaft_hz * static_cast<double>(i) * dt);

    // Noise is drawn before the impulse train so that zeroing impulse_amp
    // leaves the stream untouched and reproduces the healthy signal exactly.
    if (config.noise_sigma > 0.0) {
        Rng rng(config.seed);
        for (std::size_t i = 0; i < n; ++i) x[i] += config.noise_sigma * rng.gaussian();
    }

    if (condition != Condition::Healthy) {
        const double rate = impulse_rate_hz(config, condition, shaft_hz);
        const double amp = config.impulse_amp * (fault_diameter_in / 0.007);
        if (rate > 0.0 && amp != 0.0) {
            const double period = 1.0 / rate;
            // Each impulse decays to ~1e-6 of its height after this horizon.
            const double horizon = 14.0 / config.ring_decay;
            for (double t0 = 0.0; t0 < duration_s; t0 += period) {
                const std::size_t first = static_cast<std::size_t>(std::ceil(t0 / dt));
                const std::size_t last = std::min(n, static_cast<std::size_t>((t0 + horizon) / dt) + 1);
                for (std::size_t i = first; i < last; ++i) {
                    const double tau = static_cast<double>(i) * dt - t0;
                    x[i] += amp * std::exp(-config.ring_decay * tau) *
                            std::sin(two_pi * config.ring_freq_hz * tau);
                }
            }
        }
    }

    SignalRecord record;
    record.samples = std::move(x);
    record.sample_rate_hz = config.sample_rate_hz;
    record.rpm = static_cast<int>(std::lround(config.rpm));
    record.condition = condition;
    if (condition != Condition::Healthy) record.fault_diameter_in = fault_diameter_in;
    return record;
}

} // namespace vibfault::signal
