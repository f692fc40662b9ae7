#include "vibfault/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vibfault/errors.hpp"

namespace vibfault::eval {

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
}

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t t = 0;
    for (int i = 0; i < n_classes; ++i) t += at(i, i);
    return t;
}

ConfusionMatrix confusion_from(std::span<const int> preds, std::span<const int> labels,
                               int n_classes) {
    if (preds.size() != labels.size())
        throw ValidationError("prediction/label count mismatch");
    if (preds.empty()) throw ValidationError("cannot build a confusion matrix from no samples");
    if (n_classes < 1) throw ValidationError("need at least one class");
    ConfusionMatrix cm;
    cm.n_classes = n_classes;
    cm.counts.assign(static_cast<std::size_t>(n_classes) * n_classes, 0);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= n_classes || preds[i] < 0 || preds[i] >= n_classes)
            throw ValidationError("class id out of range at sample " + std::to_string(i));
        cm.at(labels[i], preds[i])++;
    }
    return cm;
}

Metrics metrics_from(const ConfusionMatrix& cm) {
    const std::uint64_t total = cm.total();
    if (total == 0) throw ValidationError("empty confusion matrix");
    Metrics m;
    m.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
    m.per_class.resize(static_cast<std::size_t>(cm.n_classes));
    double f1_sum = 0.0;
    for (int c = 0; c < cm.n_classes; ++c) {
        std::uint64_t col = 0, row = 0;
        for (int i = 0; i < cm.n_classes; ++i) {
            col += cm.at(i, c);
            row += cm.at(c, i);
        }
        auto& pc = m.per_class[static_cast<std::size_t>(c)];
        const double tp = static_cast<double>(cm.at(c, c));
        if (col == 0) {
            pc.precision = 0.0;
            pc.degenerate = true;
        } else {
            pc.precision = tp / static_cast<double>(col);
        }
        if (row == 0) {
            pc.recall = 0.0;
            pc.degenerate = true;
        } else {
            pc.recall = tp / static_cast<double>(row);
        }
        if (pc.precision + pc.recall > 0.0)
            pc.f1 = 2.0 * pc.precision * pc.recall / (pc.precision + pc.recall);
        f1_sum += pc.f1;
    }
    m.macro_f1 = f1_sum / static_cast<double>(cm.n_classes);
    return m;
}

TimingStats stats_of(std::vector<double> samples_ns) {
    TimingStats s;
    s.count = samples_ns.size();
    if (samples_ns.empty()) return s;
    double sum = 0.0;
    for (double v : samples_ns) sum += v;
    s.mean_ns = sum / static_cast<double>(samples_ns.size());
    std::sort(samples_ns.begin(), samples_ns.end());
    const std::size_t n = samples_ns.size();
    s.median_ns = (n % 2 == 1) ? samples_ns[n / 2]
                               : 0.5 * (samples_ns[n / 2 - 1] + samples_ns[n / 2]);
    const std::size_t p95 = std::min(n - 1, static_cast<std::size_t>(std::ceil(0.95 * n)) - 1);
    s.p95_ns = samples_ns[p95];
    return s;
}

TimingReport timing_report(const std::vector<double>& encode_ns,
                           const std::vector<double>& infer_ns) {
    if (encode_ns.size() != infer_ns.size())
        throw ValidationError("encode/inference sample count mismatch");
    TimingReport r;
    r.samples = encode_ns.size();
    r.encode = stats_of(encode_ns);
    r.inference = stats_of(infer_ns);
    std::vector<double> total(encode_ns.size());
    for (std::size_t i = 0; i < encode_ns.size(); ++i) total[i] = encode_ns[i] + infer_ns[i];
    r.total = stats_of(total);
    return r;
}

namespace {

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const IoError&) {
        throw;
    } catch (const std::exception& e) {
        throw ValidationError(std::string(name) + ": " + e.what());
    }
}

std::vector<signal::SignalRecord> filter_rpms(const std::vector<signal::SignalRecord>& records,
                                              const std::vector<int>& rpms) {
    if (rpms.empty()) return records;
    std::vector<signal::SignalRecord> out;
    for (const auto& r : records)
        if (std::find(rpms.begin(), rpms.end(), r.rpm) != rpms.end()) out.push_back(r);
    if (out.empty()) throw ValidationError("no records match the requested rpm subset");
    return out;
}

struct EncodedSet {
    nn::LabeledImages data;
    std::vector<double> encode_ns;
};

EncodedSet encode_set(const std::vector<std::pair<signal::Segment, ingest::FaultLabel>>& items,
                      const ExperimentConfig& cfg) {
    EncodedSet out;
    encoders::EncodeOptions opts;
    opts.bins = cfg.bins;
    for (const auto& [seg, label] : items) {
        auto img = encoders::encode(seg, cfg.method, cfg.side, opts);
        out.encode_ns.push_back(static_cast<double>(img.encode_time.count()));
        out.data.images.push_back(nn::to_tensor(img));
        out.data.labels.push_back(label.value - 1); // class ids are 1-based
    }
    return out;
}

} // namespace

EvalReport run_experiment(const ExperimentConfig& config,
                          const std::vector<signal::SignalRecord>& records,
                          nn::CnnModel* out_model) {
    const auto filtered = stage("filter", [&] { return filter_rpms(records, config.rpms); });
    const auto split = stage("assemble", [&] {
        ingest::AssembleOptions opts;
        opts.segment_length = config.segment_length;
        return ingest::assemble_dataset(filtered, config.scheme,
                                        config.segments_per_class_per_rpm, config.seed, opts);
    });

    auto train_set = stage("encode", [&] { return encode_set(split.train, config); });
    auto test_set = stage("encode", [&] { return encode_set(split.test, config); });

    const int n_classes = ingest::class_count(config.scheme);
    nn::CnnModel model = stage("build", [&] {
        return nn::build_default_model(
            {encoders::channels_for(config.method), config.side, config.side}, n_classes,
            config.seed);
    });

    nn::TrainOptions topts;
    topts.epochs = config.epochs;
    topts.batch_size = config.batch_size;
    topts.seed = config.seed;
    const auto trained = stage("train", [&] { return nn::train(model, train_set.data, topts); });

    EvalReport report;
    report.config = config;
    report.train_seconds = trained.wall_seconds;
    report.train_log = trained.epochs;

    std::vector<int> preds;
    std::vector<double> infer_ns;
    stage("evaluate", [&] {
        for (const auto& img : test_set.data.images) {
            const auto p = nn::predict(model, img);
            preds.push_back(p.class_index);
            infer_ns.push_back(static_cast<double>(p.inference_time.count()));
        }
        return 0;
    });

    report.confusion = confusion_from(preds, test_set.data.labels, n_classes);
    report.metrics = metrics_from(report.confusion);
    report.timing = timing_report(test_set.encode_ns, infer_ns);
    if (out_model) *out_model = std::move(model);
    return report;
}

EvalReport evaluate_model(const nn::CnnModel& model, const ExperimentConfig& config,
                          const std::vector<signal::SignalRecord>& records) {
    const auto filtered = stage("filter", [&] { return filter_rpms(records, config.rpms); });
    const auto split = stage("assemble", [&] {
        ingest::AssembleOptions opts;
        opts.segment_length = config.segment_length;
        return ingest::assemble_dataset(filtered, config.scheme,
                                        config.segments_per_class_per_rpm, config.seed, opts);
    });
    auto test_set = stage("encode", [&] { return encode_set(split.test, config); });

    const int n_classes = ingest::class_count(config.scheme);
    if (model.num_classes != n_classes)
        throw ValidationError("model classifies " + std::to_string(model.num_classes) +
                              " classes but the scheme has " + std::to_string(n_classes));

    EvalReport report;
    report.config = config;
    std::vector<int> preds;
    std::vector<double> infer_ns;
    stage("evaluate", [&] {
        for (const auto& img : test_set.data.images) {
            const auto p = nn::predict(model, img);
            preds.push_back(p.class_index);
            infer_ns.push_back(static_cast<double>(p.inference_time.count()));
        }
        return 0;
    });
    report.confusion = confusion_from(preds, test_set.data.labels, n_classes);
    report.metrics = metrics_from(report.confusion);
    report.timing = timing_report(test_set.encode_ns, infer_ns);
    return report;
}

TimingReport bench_single(const nn::CnnModel& model, const signal::Segment& segment,
                          encoders::Method method, int side, int bins, int repetitions,
                          int warmup) {
    if (repetitions < 1) throw ValidationError("need at least one repetition");
    if (warmup < 0) throw ValidationError("warmup must be >= 0");
    encoders::EncodeOptions opts;
    opts.bins = bins;

    // Shape check before timing anything.
    {
        const auto probe = encoders::encode(segment, method, side, opts);
        (void)nn::predict(model, probe);
    }

    std::vector<double> encode_ns, infer_ns;
    encode_ns.reserve(static_cast<std::size_t>(repetitions));
    infer_ns.reserve(static_cast<std::size_t>(repetitions));
    for (int rep = 0; rep < warmup + repetitions; ++rep) {
        const auto img = encoders::encode(segment, method, side, opts);
        const auto pred = nn::predict(model, img);
        if (rep < warmup) continue;
        encode_ns.push_back(static_cast<double>(img.encode_time.count()));
        infer_ns.push_back(static_cast<double>(pred.inference_time.count()));
    }
    return timing_report(encode_ns, infer_ns);
}

// ---- serialization ----

namespace {

double to_ms(double ns) { return ns / 1e6; }

std::string fmt_ms(double ns) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", to_ms(ns));
    return buf;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace

std::string report_text(const EvalReport& r) {
    std::ostringstream os;
    os << "method=" << encoders::to_string(r.config.method) << "\n";
    os << "side=" << r.config.side << "\n";
    os << "scheme=" << ingest::to_string(r.config.scheme) << "\n";
    os << "rpm=";
    if (r.config.rpms.empty()) {
        os << "all";
    } else {
        for (std::size_t i = 0; i < r.config.rpms.size(); ++i)
            os << (i ? "," : "") << r.config.rpms[i];
    }
    os << "\n";
    os << "seed=" << r.config.seed << "\n";
    os << "epochs=" << r.config.epochs << "\n";
    os << "batch=" << r.config.batch_size << "\n";
    os << "test_samples=" << r.confusion.total() << "\n";
    os << "accuracy=" << fmt(r.metrics.accuracy) << "\n";
    os << "macro_f1=" << fmt(r.metrics.macro_f1) << "\n";
    for (std::size_t c = 0; c < r.metrics.per_class.size(); ++c) {
        const auto& pc = r.metrics.per_class[c];
        os << "class_" << (c + 1) << "_precision=" << fmt(pc.precision) << "\n";
        os << "class_" << (c + 1) << "_recall=" << fmt(pc.recall) << "\n";
        os << "class_" << (c + 1) << "_f1=" << fmt(pc.f1) << "\n";
    }
    os << "train_seconds=" << fmt(r.train_seconds) << "\n";
    if (r.timing.samples > 0) {
        os << "encode_ms_mean=" << fmt_ms(r.timing.encode.mean_ns) << "\n";
        os << "encode_ms_median=" << fmt_ms(r.timing.encode.median_ns) << "\n";
        os << "infer_ms_mean=" << fmt_ms(r.timing.inference.mean_ns) << "\n";
        os << "infer_ms_median=" << fmt_ms(r.timing.inference.median_ns) << "\n";
        os << "total_ms_mean=" << fmt_ms(r.timing.total.mean_ns) << "\n";
        os << "total_ms_median=" << fmt_ms(r.timing.total.median_ns) << "\n";
    }
    return os.str();
}

std::string confusion_csv(const ConfusionMatrix& cm) {
    std::ostringstream os;
    os << "true\\pred";
    for (int c = 0; c < cm.n_classes; ++c) os << "," << (c + 1);
    os << "\n";
    for (int t = 0; t < cm.n_classes; ++t) {
        os << (t + 1);
        for (int p = 0; p < cm.n_classes; ++p) os << "," << cm.at(t, p);
        os << "\n";
    }
    return os.str();
}

std::string timing_csv_header() { return "method,encode_ms,infer_ms,total_ms\n"; }

std::string timing_csv_row(encoders::Method method, const TimingReport& timing) {
    std::ostringstream os;
    os << encoders::to_string(method) << "," << fmt_ms(timing.encode.median_ns) << ","
       << fmt_ms(timing.inference.median_ns) << "," << fmt_ms(timing.total.median_ns) << "\n";
    return os.str();
}

void write_report_files(const EvalReport& report, const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    const auto write = [&](const std::string& name, const std::string& content) {
        const auto path = (std::filesystem::path(out_dir) / name).string();
        std::ofstream f(path);
        if (!f) throw IoError("cannot open for writing: " + path);
        f << content;
        if (!f) throw IoError("write failed: " + path);
    };
    write("report.txt", report_text(report));
    write("confusion.csv", confusion_csv(report.confusion));
    write("timing.csv", timing_csv_header() + timing_csv_row(report.config.method, report.timing));
}

} // namespace vibfault::eval
