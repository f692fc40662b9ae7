#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vibfault::signal {

enum class Condition { Healthy, Ball, InnerRace, OuterRace };

const char* to_string(Condition c);
// Accepts "healthy", "ball", "ir"/"innerrace", "or"/"outerrace" (case-insensitive).
std::optional<Condition> condition_from_string(const std::string& s);

// One vibration recording plus its rig metadata.
struct SignalRecord {
    std::vector<double> samples;          // acceleration, g
    double sample_rate_hz = 12000.0;
    int rpm = 1797;
    Condition condition = Condition::Healthy;
    std::optional<double> fault_diameter_in; // present iff condition != Healthy
};

// Throws ValidationError if the record breaks its invariants.
void validate(const SignalRecord& record);

struct SegmentMeta {
    int rpm = 0;
    Condition condition = Condition::Healthy;
    std::optional<double> fault_diameter_in;
};

// Fixed-length non-overlapping window of a record; the unit of classification.
struct Segment {
    std::vector<double> samples;
    SegmentMeta source;
    std::size_t index = 0; // ordinal within the parent record
};

// Splits a record into floor(N/length) consecutive windows; the trailing
// remainder is discarded. Throws if the record is shorter than one window.
std::vector<Segment> segment_record(const SignalRecord& record, std::size_t length = 1000);

// Affine map of [min(x), max(x)] onto [lo, hi]. A constant input maps every
// element to lo. Throws on empty input or lo >= hi.
std::vector<double> minmax_normalize(std::span<const double> samples, double lo, double hi);

// Desk-scale synthetic bearing signal: shaft sinusoid, per-class periodic
// impulse trains of decaying rings, gaussian noise. Everything is a pure
// function of the config and arguments.
struct SynthConfig {
    double sample_rate_hz = 12000.0;
    double rpm = 1797.0;
    double shaft_amp = 1.0;
    // Impulse rates as multiples of the shaft frequency, one per fault class.
    // Defaults approximate the characteristic factors of a small drive-end
    // bearing; they are configuration, not contract.
    double ball_rate_factor = 4.7135;
    double inner_rate_factor = 5.4152;
    double outer_rate_factor = 3.5848;
    double ring_freq_hz = 3000.0;
    double ring_decay = 600.0;   // 1/s, exponential envelope
    double impulse_amp = 2.0;    // scaled by diameter / 0.007
    double noise_sigma = 0.05;
    std::uint64_t seed = 1;
};

SignalRecord synth_signal(const SynthConfig& config, Condition condition,
                          double duration_s, double fault_diameter_in = 0.007);

} // namespace vibfault::signal
