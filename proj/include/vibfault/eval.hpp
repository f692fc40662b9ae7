#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vibfault/encoders.hpp"
#include "vibfault/ingest.hpp"
#include "vibfault/nn.hpp"

namespace vibfault::eval {

// Rows are true classes, columns predictions; 0-based internally.
struct ConfusionMatrix {
    int n_classes = 0;
    std::vector<std::uint64_t> counts;

    std::uint64_t& at(int truth, int pred) {
        return counts[static_cast<std::size_t>(truth) * n_classes + pred];
    }
    std::uint64_t at(int truth, int pred) const {
        return counts[static_cast<std::size_t>(truth) * n_classes + pred];
    }
    std::uint64_t total() const;
    std::uint64_t trace() const;
};

ConfusionMatrix confusion_from(std::span<const int> preds, std::span<const int> labels,
                               int n_classes);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool degenerate = false; // a zero denominator was replaced by 0
};

struct Metrics {
    double accuracy = 0.0;
    std::vector<ClassMetrics> per_class;
    double macro_f1 = 0.0;
};

Metrics metrics_from(const ConfusionMatrix& cm);

// ---- timing ----

struct TimingStats {
    double mean_ns = 0.0;
    double median_ns = 0.0;
    double p95_ns = 0.0;
    std::size_t count = 0;
};

TimingStats stats_of(std::vector<double> samples_ns);

struct TimingReport {
    TimingStats encode;
    TimingStats inference;
    TimingStats total; // per-sample encode + inference on the same clock
    std::size_t samples = 0;
};

TimingReport timing_report(const std::vector<double>& encode_ns,
                           const std::vector<double>& infer_ns);

// ---- experiment harness ----

struct ExperimentConfig {
    encoders::Method method = encoders::Method::PixelStrength;
    int side = 31;
    int bins = 8;
    ingest::LabelScheme scheme = ingest::LabelScheme::FourClass;
    std::vector<int> rpms;  // empty = use every rpm present
    std::uint64_t seed = 42;
    int epochs = 150;
    int batch_size = 64;
    std::size_t segments_per_class_per_rpm = 120;
    std::size_t segment_length = 1000;
};

struct EvalReport {
    ExperimentConfig config;
    ConfusionMatrix confusion;
    Metrics metrics;
    TimingReport timing;
    double train_seconds = 0.0;
    std::vector<nn::EpochLog> train_log;
};

// Assemble -> encode -> train -> evaluate on the held-out test split, timing
// every encode and predict separately. Errors carry the failing stage name.
// When out_model is given the trained network is copied there.
EvalReport run_experiment(const ExperimentConfig& config,
                          const std::vector<signal::SignalRecord>& records,
                          nn::CnnModel* out_model = nullptr);

// Evaluate an already-trained model on a freshly assembled test split.
EvalReport evaluate_model(const nn::CnnModel& model, const ExperimentConfig& config,
                          const std::vector<signal::SignalRecord>& records);

// One segment, encode + predict, repeated with warmup discarded.
TimingReport bench_single(const nn::CnnModel& model, const signal::Segment& segment,
                          encoders::Method method, int side, int bins = 8, int repetitions = 100,
                          int warmup = 10);

// ---- report serialization ----

std::string report_text(const EvalReport& report);
// Header row/column hold 1-based class ids, top-left cell "true\pred".
std::string confusion_csv(const ConfusionMatrix& cm);
std::string timing_csv_header();
std::string timing_csv_row(encoders::Method method, const TimingReport& timing);

// Writes report.txt, confusion.csv and timing.csv under out_dir.
void write_report_files(const EvalReport& report, const std::string& out_dir);

} // namespace vibfault::eval
