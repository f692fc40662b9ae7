#include "vibfault/cli.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "vibfault/errors.hpp"
#include "vibfault/eval.hpp"
#include "vibfault/rng.hpp"

namespace vibfault::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "vibfault 0.1.0";
const std::vector<std::string> kMethodNames = {"pixel", "gasf", "mtf", "rp", "gafmtf"};
const std::vector<int> kDefaultRpms = {1730, 1750, 1772, 1797};

encoders::Method parse_method(const std::string& name) {
    const auto m = encoders::method_from_string(name);
    if (!m)
        throw ValidationError("unknown method '" + name +
                              "'; valid methods: pixel, gasf, mtf, rp, gafmtf");
    return *m;
}

ingest::LabelScheme parse_scheme(const std::string& name) {
    const auto s = ingest::scheme_from_string(name);
    if (!s) throw ValidationError("unknown scheme '" + name + "'; valid schemes: four, ten");
    return *s;
}

std::vector<int> parse_rpms(const std::string& text) {
    if (text == "all") return {};
    std::vector<int> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            const int rpm = std::stoi(part);
            if (rpm <= 0) throw std::invalid_argument(part);
            out.push_back(rpm);
        } catch (const std::exception&) {
            throw ValidationError("bad rpm value '" + part + "'; expected a speed or 'all'");
        }
    }
    if (out.empty()) throw ValidationError("empty rpm list");
    return out;
}

void check_clobber(const std::string& path, bool no_clobber) {
    if (no_clobber && fs::exists(path))
        throw ValidationError("refusing to overwrite existing " + path + " (--no-clobber)");
}

void write_raw_f64(const std::string& path, const std::vector<double>& samples) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    for (double v : samples) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        char buf[8];
        for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
        f.write(buf, 8);
    }
    if (!f) throw IoError("write failed: " + path);
}

struct SynthRow {
    signal::Condition condition;
    std::optional<double> diameter;
};

std::vector<SynthRow> synth_rows(ingest::LabelScheme scheme) {
    using signal::Condition;
    std::vector<SynthRow> rows;
    rows.push_back({Condition::Healthy, std::nullopt});
    const std::vector<Condition> faults = {Condition::Ball, Condition::InnerRace,
                                           Condition::OuterRace};
    if (scheme == ingest::LabelScheme::FourClass) {
        for (auto c : faults) rows.push_back({c, 0.007});
    } else {
        for (auto c : faults)
            for (double d : {0.007, 0.014, 0.021}) rows.push_back({c, d});
    }
    return rows;
}

std::string synth_file_name(const SynthRow& row, int rpm) {
    std::string name = signal::to_string(row.condition);
    if (row.diameter) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "%03d", static_cast<int>(std::lround(*row.diameter * 1000)));
        name += buf;
    }
    name += "_" + std::to_string(rpm) + ".f64";
    return name;
}

// ---- option bundles ----

struct SynthArgs {
    std::string out_dir;
    std::string classes = "four";
    std::string rpm = "all";
    double duration = 10.0;
    std::uint64_t seed = 1;
    double noise_sigma = 0.05;
    double sample_rate = 12000.0;
    bool no_clobber = false;
};

struct IngestArgs {
    std::string manifest;
    std::string scheme = "four";
    std::string rpm = "all";
    std::size_t segments = 120;
    std::size_t segment_length = 1000;
    std::uint64_t seed = 42;
    double sample_rate = 12000.0;
};

struct EncodeArgs {
    std::string input;
    std::string method;
    std::string out_dir = ".";
    int side = 0; // 0 = method default
    int bins = 8;
    std::size_t segment_length = 1000;
    std::size_t max_segments = 0; // 0 = all
    bool decimate = false;
    bool no_clobber = false;
    double sample_rate = 12000.0;
};

struct TrainArgs {
    std::string manifest;
    std::string scheme = "four";
    std::string method = "pixel";
    std::string rpm = "all";
    std::string model_out = "model.vcnn";
    std::string report_dir;
    int side = 0;
    int bins = 8;
    int epochs = 150;
    int batch = 64;
    std::size_t segments = 120;
    std::size_t segment_length = 1000;
    std::uint64_t seed = 42;
    double lr = 1e-3;
    double sample_rate = 12000.0;
    bool no_clobber = false;
};

struct EvalArgs {
    std::string model;
    std::string manifest;
    std::string scheme = "four";
    std::string method = "pixel";
    std::string rpm = "all";
    std::string out_dir = "eval_out";
    int side = 0;
    int bins = 8;
    std::size_t segments = 120;
    std::size_t segment_length = 1000;
    std::uint64_t seed = 42;
    double sample_rate = 12000.0;
    bool no_clobber = false;
};

struct BenchArgs {
    std::string models_dir;
    std::string input;
    std::string methods = "pixel,gasf,mtf,rp,gafmtf";
    std::string out_csv = "timing.csv";
    int pixel_side = 31;
    int side = 256;
    int bins = 8;
    int reps = 100;
    int warmup = 10;
    std::size_t segment_index = 0;
    std::size_t segment_length = 1000;
    double sample_rate = 12000.0;
    bool no_clobber = false;
};

int side_or_default(int side, encoders::Method m) {
    return side > 0 ? side : encoders::default_side(m);
}

// ---- command bodies ----

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    const auto scheme = parse_scheme(a.classes);
    auto rpms = parse_rpms(a.rpm);
    if (rpms.empty()) rpms = kDefaultRpms;
    const auto rows = synth_rows(scheme);

    std::error_code ec;
    fs::create_directories(a.out_dir, ec);
    if (!fs::is_directory(a.out_dir)) throw IoError("cannot create directory: " + a.out_dir);
    const auto manifest_path = (fs::path(a.out_dir) / "manifest.txt").string();
    check_clobber(manifest_path, a.no_clobber);

    std::ostringstream manifest;
    std::size_t files = 0;
    for (int rpm : rpms) {
        for (std::size_t row_idx = 0; row_idx < rows.size(); ++row_idx) {
            const auto& row = rows[row_idx];
            signal::SynthConfig cfg;
            cfg.sample_rate_hz = a.sample_rate;
            cfg.rpm = rpm;
            cfg.noise_sigma = a.noise_sigma;
            cfg.seed = Rng::mix(a.seed, (static_cast<std::uint64_t>(row_idx) << 32) ^
                                            static_cast<std::uint64_t>(rpm));
            const auto record = signal::synth_signal(cfg, row.condition, a.duration,
                                                     row.diameter.value_or(0.007));
            const auto name = synth_file_name(row, rpm);
            const auto path = (fs::path(a.out_dir) / name).string();
            check_clobber(path, a.no_clobber);
            write_raw_f64(path, record.samples);
            manifest << ingest::manifest_line(name, row.condition, row.diameter, rpm) << "\n";
            ++files;
        }
    }
    std::ofstream mf(manifest_path);
    if (!mf) throw IoError("cannot open for writing: " + manifest_path);
    mf << manifest.str();
    if (!mf) throw IoError("write failed: " + manifest_path);
    out << "wrote " << files << " signal files and " << manifest_path << "\n";
    return 0;
}

int cmd_ingest(const IngestArgs& a, std::ostream& out) {
    const auto scheme = parse_scheme(a.scheme);
    const auto rpms = parse_rpms(a.rpm);
    auto records = ingest::load_manifest_records(a.manifest, a.sample_rate);
    if (!rpms.empty()) {
        std::vector<signal::SignalRecord> kept;
        for (auto& r : records)
            if (std::find(rpms.begin(), rpms.end(), r.rpm) != rpms.end())
                kept.push_back(std::move(r));
        records = std::move(kept);
    }
    out << "records=" << records.size() << "\n";
    ingest::AssembleOptions opts;
    opts.segment_length = a.segment_length;
    const auto split = ingest::assemble_dataset(records, scheme, a.segments, a.seed, opts);
    out << "train=" << split.train.size() << " test=" << split.test.size() << "\n";
    std::vector<std::size_t> train_hist(static_cast<std::size_t>(ingest::class_count(scheme)) + 1);
    std::vector<std::size_t> test_hist(train_hist.size());
    for (const auto& [seg, label] : split.train)
        train_hist[static_cast<std::size_t>(label.value)]++;
    for (const auto& [seg, label] : split.test)
        test_hist[static_cast<std::size_t>(label.value)]++;
    for (int c = 1; c <= ingest::class_count(scheme); ++c)
        out << "class_" << c << ": train=" << train_hist[static_cast<std::size_t>(c)]
            << " test=" << test_hist[static_cast<std::size_t>(c)] << "\n";
    out << "dataset ok\n";
    return 0;
}

int cmd_encode(const EncodeArgs& a, std::ostream& out) {
    const auto method = parse_method(a.method);
    const int side = side_or_default(a.side, method);

    ingest::RecordMeta meta;
    meta.sample_rate_hz = a.sample_rate;
    const auto record = ingest::load_record(a.input, meta);
    const auto segments = signal::segment_record(record, a.segment_length);

    std::error_code ec;
    fs::create_directories(a.out_dir, ec);
    if (!fs::is_directory(a.out_dir)) throw IoError("cannot create directory: " + a.out_dir);

    encoders::EncodeOptions opts;
    opts.bins = a.bins;
    opts.decimate = a.decimate;
    const std::size_t limit =
        a.max_segments == 0 ? segments.size() : std::min(a.max_segments, segments.size());
    const bool dual = encoders::channels_for(method) == 2;
    for (std::size_t i = 0; i < limit; ++i) {
        const auto img = encoders::encode(segments[i], method, side, opts);
        char name[64];
        std::snprintf(name, sizeof name, "seg_%04zu.%s", i, dual ? "vimg" : "pgm");
        const auto path = (fs::path(a.out_dir) / name).string();
        check_clobber(path, a.no_clobber);
        if (dual)
            encoders::write_vimg(img, path);
        else
            encoders::write_pgm(img, path);
    }
    out << "wrote " << limit << " " << (dual ? "VIMG" : "PGM") << " images to " << a.out_dir
        << "\n";
    return 0;
}

eval::ExperimentConfig experiment_config(encoders::Method method, int side, int bins,
                                         ingest::LabelScheme scheme, const std::string& rpm,
                                         std::uint64_t seed, int epochs, int batch,
                                         std::size_t segments, std::size_t segment_length) {
    eval::ExperimentConfig cfg;
    cfg.method = method;
    cfg.side = side;
    cfg.bins = bins;
    cfg.scheme = scheme;
    cfg.rpms = parse_rpms(rpm);
    cfg.seed = seed;
    cfg.epochs = epochs;
    cfg.batch_size = batch;
    cfg.segments_per_class_per_rpm = segments;
    cfg.segment_length = segment_length;
    return cfg;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
    const auto method = parse_method(a.method);
    const auto scheme = parse_scheme(a.scheme);
    const int side = side_or_default(a.side, method);
    check_clobber(a.model_out, a.no_clobber);

    const auto records = ingest::load_manifest_records(a.manifest, a.sample_rate);
    auto cfg = experiment_config(method, side, a.bins, scheme, a.rpm, a.seed, a.epochs, a.batch,
                                 a.segments, a.segment_length);

    nn::CnnModel model;
    const auto report = eval::run_experiment(cfg, records, &model);
    out << "params=" << model.param_count() << "\n";
    for (std::size_t e = 0; e < report.train_log.size(); ++e) {
        char line[96];
        std::snprintf(line, sizeof line, "epoch=%zu loss=%.6f acc=%.4f", e + 1,
                      report.train_log[e].loss, report.train_log[e].accuracy);
        out << line << "\n";
    }
    nn::save_model(model, a.model_out);
    char acc[64];
    std::snprintf(acc, sizeof acc, "test_accuracy=%.6f", report.metrics.accuracy);
    out << acc << "\n";
    out << "model=" << a.model_out << "\n";
    if (!a.report_dir.empty()) {
        eval::write_report_files(report, a.report_dir);
        out << "report=" << a.report_dir << "\n";
    }
    return 0;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    const auto method = parse_method(a.method);
    const auto scheme = parse_scheme(a.scheme);
    const int side = side_or_default(a.side, method);

    const auto model = nn::load_model(a.model);
    const auto records = ingest::load_manifest_records(a.manifest, a.sample_rate);
    const auto cfg = experiment_config(method, side, a.bins, scheme, a.rpm, a.seed, 0, 1,
                                       a.segments, a.segment_length);
    const auto report = eval::evaluate_model(model, cfg, records);
    check_clobber((fs::path(a.out_dir) / "report.txt").string(), a.no_clobber);
    eval::write_report_files(report, a.out_dir);
    char acc[64];
    std::snprintf(acc, sizeof acc, "test_accuracy=%.6f", report.metrics.accuracy);
    out << acc << "\n";
    out << "report=" << a.out_dir << "\n";
    return 0;
}

int cmd_bench(const BenchArgs& a, std::ostream& out) {
    std::vector<encoders::Method> methods;
    {
        std::stringstream ss(a.methods);
        std::string part;
        while (std::getline(ss, part, ',')) methods.push_back(parse_method(part));
        if (methods.empty()) throw ValidationError("empty method list");
    }

    ingest::RecordMeta meta;
    meta.sample_rate_hz = a.sample_rate;
    const auto record = ingest::load_record(a.input, meta);
    const auto segments = signal::segment_record(record, a.segment_length);
    if (a.segment_index >= segments.size())
        throw ValidationError("segment index " + std::to_string(a.segment_index) +
                              " out of range (" + std::to_string(segments.size()) + " segments)");
    const auto& segment = segments[a.segment_index];

    check_clobber(a.out_csv, a.no_clobber);
    std::ostringstream csv;
    csv << eval::timing_csv_header();
    out << "method  encode_ms  infer_ms  total_ms\n";
    for (const auto method : methods) {
        const auto model_path =
            (fs::path(a.models_dir) / (std::string(encoders::to_string(method)) + ".vcnn"))
                .string();
        if (!fs::exists(model_path))
            throw ValidationError("missing model file " + model_path +
                                  "; train one with 'vibfault train --method " +
                                  encoders::to_string(method) + "'");
        const auto model = nn::load_model(model_path);
        const int side = method == encoders::Method::PixelStrength ? a.pixel_side : a.side;
        const auto timing =
            eval::bench_single(model, segment, method, side, a.bins, a.reps, a.warmup);
        csv << eval::timing_csv_row(method, timing);
        char line[128];
        std::snprintf(line, sizeof line, "%-7s %9.2f %9.2f %9.2f", encoders::to_string(method),
                      timing.encode.median_ns / 1e6, timing.inference.median_ns / 1e6,
                      timing.total.median_ns / 1e6);
        out << line << "\n";
    }
    std::ofstream f(a.out_csv);
    if (!f) throw IoError("cannot open for writing: " + a.out_csv);
    f << csv.str();
    if (!f) throw IoError("write failed: " + a.out_csv);
    out << "csv=" << a.out_csv << "\n";
    return 0;
}

void add_common(CLI::App* cmd) {
    cmd->add_option("--config", "flat key=value config file; flags take precedence")
        ->expected(1);
}

// Expands "--config file" into option tokens inserted right after the
// subcommand name. Later (user-given) occurrences win via TakeLast, which is
// the documented flag-over-file precedence.
std::vector<std::string> apply_config_file(
    const std::vector<std::pair<std::string, CLI::App*>>& commands,
    const std::vector<std::string>& args) {
    std::size_t sub_idx = args.size();
    CLI::App* cmd = nullptr;
    for (std::size_t i = 0; i < args.size() && !cmd; ++i)
        for (const auto& [name, app] : commands)
            if (args[i] == name) {
                sub_idx = i;
                cmd = app;
                break;
            }
    if (!cmd) return args;

    std::string config_path;
    for (std::size_t i = sub_idx + 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size())
            config_path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0)
            config_path = args[i].substr(9);
    }
    if (config_path.empty()) return args;

    std::ifstream f(config_path);
    if (!f) throw IoError("cannot open config file: " + config_path);
    std::vector<std::string> injected;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        if (line[first] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(line_no) +
                                  ": expected key=value");
        std::string key = line.substr(first, eq - first);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        std::string value = line.substr(eq + 1);
        const auto vstart = value.find_first_not_of(" \t");
        value = vstart == std::string::npos ? "" : value.substr(vstart);
        if (key == "config")
            throw ValidationError("config files cannot nest");
        if (!cmd->get_option_no_throw("--" + key))
            throw ValidationError("unknown config key '" + key + "'");
        injected.push_back("--" + key + "=" + value);
    }

    std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub_idx) + 1);
    out.insert(out.end(), injected.begin(), injected.end());
    out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub_idx) + 1, args.end());
    return out;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"vibration-to-image bearing fault classification"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic labelled dataset");
    synth_cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    synth_cmd->add_option("--out", synth.out_dir, "output directory")->required();
    synth_cmd->add_option("--classes", synth.classes, "four|ten: which class rows to generate");
    synth_cmd->add_option("--rpm", synth.rpm, "shaft speeds, comma separated, or 'all'");
    synth_cmd->add_option("--duration", synth.duration, "seconds per record");
    synth_cmd->add_option("--seed", synth.seed, "generator seed");
    synth_cmd->add_option("--noise-sigma", synth.noise_sigma, "gaussian noise level");
    synth_cmd->add_option("--sample-rate", synth.sample_rate, "samples per second");
    synth_cmd->add_flag("--no-clobber", synth.no_clobber, "fail instead of overwriting");
    add_common(synth_cmd);

    IngestArgs ing;
    auto* ingest_cmd = app.add_subcommand("ingest", "load a manifest and report the dataset split");
    ingest_cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    ingest_cmd->add_option("--manifest", ing.manifest, "dataset manifest")->required();
    ingest_cmd->add_option("--scheme", ing.scheme, "four|ten label scheme");
    ingest_cmd->add_option("--rpm", ing.rpm, "rpm subset or 'all'");
    ingest_cmd->add_option("--segments", ing.segments, "segments per class per rpm");
    ingest_cmd->add_option("--segment-length", ing.segment_length, "samples per segment");
    ingest_cmd->add_option("--seed", ing.seed, "shuffle seed");
    ingest_cmd->add_option("--sample-rate", ing.sample_rate, "samples per second");
    add_common(ingest_cmd);

    EncodeArgs enc;
    auto* encode_cmd = app.add_subcommand("encode", "encode a signal file into images");
    encode_cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    encode_cmd->add_option("--input", enc.input, "signal file (.mat/.csv/raw f64)")->required();
    encode_cmd->add_option("--method", enc.method, "pixel|gasf|mtf|rp|gafmtf")->required();
    encode_cmd->add_option("--side", enc.side, "image side (default 31 pixel, 256 others)");
    encode_cmd->add_option("--bins", enc.bins, "MTF quantile bins");
    encode_cmd->add_option("--out", enc.out_dir, "output directory");
    encode_cmd->add_option("--segment-length", enc.segment_length, "samples per segment");
    encode_cmd->add_option("--max-segments", enc.max_segments, "stop after N segments (0 = all)");
    encode_cmd->add_flag("--decimate", enc.decimate, "sample the window by stride, not prefix");
    encode_cmd->add_flag("--no-clobber", enc.no_clobber, "fail instead of overwriting");
    encode_cmd->add_option("--sample-rate", enc.sample_rate, "samples per second");
    add_common(encode_cmd);

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "train a CNN on encoded segments");
    train_cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    train_cmd->add_option("--manifest", tr.manifest, "dataset manifest")->required();
    train_cmd->add_option("--scheme", tr.scheme, "four|ten label scheme");
    train_cmd->add_option("--method", tr.method, "pixel|gasf|mtf|rp|gafmtf");
    train_cmd->add_option("--rpm", tr.rpm, "rpm subset or 'all'");
    train_cmd->add_option("--side", tr.side, "image side (default per method)");
    train_cmd->add_option("--bins", tr.bins, "MTF quantile bins");
    train_cmd->add_option("--epochs", tr.epochs, "training epochs");
    train_cmd->add_option("--batch", tr.batch, "batch size");
    train_cmd->add_option("--segments", tr.segments, "segments per class per rpm");
    train_cmd->add_option("--segment-length", tr.segment_length, "samples per segment");
    train_cmd->add_option("--seed", tr.seed, "seed for split, init and shuffles");
    train_cmd->add_option("--lr", tr.lr, "Adam learning rate");
    train_cmd->add_option("--out", tr.model_out, "model output path");
    train_cmd->add_option("--report-dir", tr.report_dir, "also write report files here");
    train_cmd->add_flag("--no-clobber", tr.no_clobber, "fail instead of overwriting");
    train_cmd->add_option("--sample-rate", tr.sample_rate, "samples per second");
    add_common(train_cmd);

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved model on a fresh test split");
    eval_cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    eval_cmd->add_option("--model", ev.model, "model file")->required();
    eval_cmd->add_option("--manifest", ev.manifest, "dataset manifest")->required();
    eval_cmd->add_option("--scheme", ev.scheme, "four|ten label scheme");
    eval_cmd->add_option("--method", ev.method, "pixel|gasf|mtf|rp|gafmtf");
    eval_cmd->add_option("--rpm", ev.rpm, "rpm subset or 'all'");
    eval_cmd->add_option("--side", ev.side, "image side (default per method)");
    eval_cmd->add_option("--bins", ev.bins, "MTF quantile bins");
    eval_cmd->add_option("--segments", ev.segments, "segments per class per rpm");
    eval_cmd->add_option("--segment-length", ev.segment_length, "samples per segment");
    eval_cmd->add_option("--seed", ev.seed, "split seed");
    eval_cmd->add_option("--out", ev.out_dir, "report directory");
    eval_cmd->add_flag("--no-clobber", ev.no_clobber, "fail instead of overwriting");
    eval_cmd->add_option("--sample-rate", ev.sample_rate, "samples per second");
    add_common(eval_cmd);

    BenchArgs be;
    auto* bench_cmd = app.add_subcommand("bench", "single-image latency per encoding");
    bench_cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    bench_cmd->add_option("--models", be.models_dir, "directory of <method>.vcnn files")
        ->required();
    bench_cmd->add_option("--input", be.input, "signal file")->required();
    bench_cmd->add_option("--methods", be.methods, "comma separated encodings to bench");
    bench_cmd->add_option("--pixel-side", be.pixel_side, "pixel-strength image side");
    bench_cmd->add_option("--side", be.side, "image side for the other encodings");
    bench_cmd->add_option("--bins", be.bins, "MTF quantile bins");
    bench_cmd->add_option("--reps", be.reps, "timed repetitions");
    bench_cmd->add_option("--warmup", be.warmup, "discarded warmup repetitions");
    bench_cmd->add_option("--segment-index", be.segment_index, "which segment to bench");
    bench_cmd->add_option("--segment-length", be.segment_length, "samples per segment");
    bench_cmd->add_option("--out", be.out_csv, "timing CSV path");
    bench_cmd->add_flag("--no-clobber", be.no_clobber, "fail instead of overwriting");
    bench_cmd->add_option("--sample-rate", be.sample_rate, "samples per second");
    add_common(bench_cmd);

    const std::vector<std::pair<std::string, CLI::App*>> commands = {
        {"synth", synth_cmd}, {"ingest", ingest_cmd}, {"encode", encode_cmd},
        {"train", train_cmd}, {"eval", eval_cmd},     {"bench", bench_cmd},
    };

    std::vector<std::string> effective;
    try {
        effective = apply_config_file(commands, args);
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    std::vector<const char*> argv;
    argv.reserve(effective.size() + 1);
    argv.push_back("vibfault");
    for (const auto& a : effective) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth, out);
        if (ingest_cmd->parsed()) return cmd_ingest(ing, out);
        if (encode_cmd->parsed()) return cmd_encode(enc, out);
        if (train_cmd->parsed()) return cmd_train(tr, out);
        if (eval_cmd->parsed()) return cmd_eval(ev, out);
        if (bench_cmd->parsed()) return cmd_bench(be, out);
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    err << "error: no command given\n";
    return 1;
}

int run(const std::vector<std::string>& args) { return run(args, std::cout, std::cerr); }

int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

} // namespace vibfault::cli
