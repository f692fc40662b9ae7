#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vibfault/signal.hpp"

namespace vibfault::ingest {

enum class LabelScheme { FourClass, TenClass };

const char* to_string(LabelScheme s); // "four" / "ten"
std::optional<LabelScheme> scheme_from_string(const std::string& s);
int class_count(LabelScheme s);

// Class id under a scheme. Values are 1-based: four-class 1..4, ten-class 1..10.
struct FaultLabel {
    LabelScheme scheme = LabelScheme::FourClass;
    int value = 1;
};

// Condition x diameter -> class id. Healthy ignores the diameter; faults
// require one of the three seeded diameters (0.007", 0.014", 0.021").
FaultLabel label_for(signal::Condition condition, std::optional<double> fault_diameter_in,
                     LabelScheme scheme);

// ---- MAT v5 container (read-only subset) ----

struct MatVariable {
    std::string name;
    std::vector<std::size_t> dims;
    std::vector<double> data; // column-major element order as stored
};

// Parses every top-level double-class numeric matrix, inflating compressed
// elements. Unsupported matrix classes are skipped with a warning. Throws
// "unsupported container" on a bad header and "corrupt file" on truncation.
std::vector<MatVariable> read_mat(std::span<const std::uint8_t> bytes,
                                  std::vector<std::string>* warnings = nullptr);
std::vector<MatVariable> read_mat_file(const std::string& path,
                                       std::vector<std::string>* warnings = nullptr);

// Variables whose name ends in "_DE_time" (the drive-end accelerometer channel).
std::vector<MatVariable> select_drive_end(const std::vector<MatVariable>& vars);

// ---- plain-text and raw fallbacks ----

struct RecordMeta {
    double sample_rate_hz = 12000.0;
    int rpm = 1797;
    signal::Condition condition = signal::Condition::Healthy;
    std::optional<double> fault_diameter_in;
};

// One ASCII real per line, LF or CRLF, optional single header line.
signal::SignalRecord read_csv(std::span<const std::uint8_t> bytes, const RecordMeta& meta);

// Little-endian IEEE-754 f64 stream.
signal::SignalRecord read_raw_f64le(std::span<const std::uint8_t> bytes, const RecordMeta& meta);

// Dispatch on extension: .mat (first _DE_time variable), .csv, anything else raw f64.
signal::SignalRecord load_record(const std::string& path, const RecordMeta& meta);

// ---- dataset manifest: "path,condition,diameter,rpm" per line ----

struct ManifestEntry {
    std::string path; // resolved against the manifest's directory
    signal::Condition condition = signal::Condition::Healthy;
    std::optional<double> fault_diameter_in;
    int rpm = 0;
};

std::vector<ManifestEntry> read_manifest(const std::string& path);
std::string manifest_line(const std::string& relative_path, signal::Condition condition,
                          std::optional<double> fault_diameter_in, int rpm);
std::vector<signal::SignalRecord> load_manifest_records(const std::string& manifest_path,
                                                        double sample_rate_hz = 12000.0);

// ---- balanced, shuffled, stratified split ----

struct DatasetSplit {
    std::vector<std::pair<signal::Segment, FaultLabel>> train;
    std::vector<std::pair<signal::Segment, FaultLabel>> test;
    std::uint64_t seed = 0;
};

struct AssembleOptions {
    std::size_t segment_length = 1000;
};

// Takes exactly segments_per_class_per_rpm segments for every (class, rpm)
// pair, drawing evenly across the records that pool into one class, shuffles
// with the seeded generator, and splits 80/20 stratified by class with
// rounding toward train. Deterministic given the seed.
DatasetSplit assemble_dataset(const std::vector<signal::SignalRecord>& records, LabelScheme scheme,
                              std::size_t segments_per_class_per_rpm, std::uint64_t seed,
                              const AssembleOptions& opts = {});

} // namespace vibfault::ingest
