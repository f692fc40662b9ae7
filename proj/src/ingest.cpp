#include "vibfault/ingest.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "vibfault/errors.hpp"
#include "vibfault/rng.hpp"

namespace vibfault::ingest {

const char* to_string(LabelScheme s) { return s == LabelScheme::FourClass ? "four" : "ten"; }

std::optional<LabelScheme> scheme_from_string(const std::string& s) {
    if (s == "four" || s == "4") return LabelScheme::FourClass;
    if (s == "ten" || s == "10") return LabelScheme::TenClass;
    return std::nullopt;
}

int class_count(LabelScheme s) { return s == LabelScheme::FourClass ? 4 : 10; }

namespace {

// Index of the seeded diameter: 0.007" -> 0, 0.014" -> 1, 0.021" -> 2.
int diameter_index(double d) {
    for (int i = 0; i < 3; ++i) {
        const double expected = 0.007 * (i + 1);
        if (std::fabs(d - expected) < 1e-9) return i;
    }
    throw ValidationError("unknown fault diameter " + std::to_string(d) +
                          " (expected 0.007, 0.014 or 0.021)");
}

} // namespace

FaultLabel label_for(signal::Condition condition, std::optional<double> fault_diameter_in,
                     LabelScheme scheme) {
    using signal::Condition;
    if (condition == Condition::Healthy) return {scheme, 1};
    if (!fault_diameter_in)
        throw ValidationError("faulty condition needs a fault diameter");
    const int di = diameter_index(*fault_diameter_in);
    int group = 0;
    switch (condition) {
        case Condition::Ball: group = 0; break;
        case Condition::InnerRace: group = 1; break;
        case Condition::OuterRace: group = 2; break;
        case Condition::Healthy: break;
    }
    if (scheme == LabelScheme::FourClass) return {scheme, 2 + group};
    return {scheme, 2 + group * 3 + di};
}

signal::SignalRecord read_csv(std::span<const std::uint8_t> bytes, const RecordMeta& meta) {
    signal::SignalRecord record;
    record.sample_rate_hz = meta.sample_rate_hz;
    record.rpm = meta.rpm;
    record.condition = meta.condition;
    record.fault_diameter_in = meta.fault_diameter_in;

    const char* p = reinterpret_cast<const char*>(bytes.data());
    const char* end = p + bytes.size();
    std::size_t line_no = 0;
    while (p < end) {
        ++line_no;
        const char* eol = static_cast<const char*>(std::memchr(p, '\n', static_cast<std::size_t>(end - p)));
        const char* line_end = eol ? eol : end;
        if (line_end > p && line_end[-1] == '\r') --line_end;
        if (line_end > p) {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(p, line_end, v);
            if (ec != std::errc{} || ptr != line_end) {
                // A single leading header line is tolerated.
                if (line_no == 1 && record.samples.empty()) {
                    p = eol ? eol + 1 : end;
                    continue;
                }
                throw ValidationError("csv: unparsable value at line " + std::to_string(line_no));
            }
            record.samples.push_back(v);
        }
        p = eol ? eol + 1 : end;
    }
    if (record.samples.empty()) throw ValidationError("csv: no samples");
    return record;
}

signal::SignalRecord read_raw_f64le(std::span<const std::uint8_t> bytes, const RecordMeta& meta) {
    if (bytes.size() % 8 != 0)
        throw ValidationError("raw stream length " + std::to_string(bytes.size()) +
                              " is not a multiple of 8");
    signal::SignalRecord record;
    record.sample_rate_hz = meta.sample_rate_hz;
    record.rpm = meta.rpm;
    record.condition = meta.condition;
    record.fault_diameter_in = meta.fault_diameter_in;
    const std::size_t n = bytes.size() / 8;
    record.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t v = 0;
        for (int b = 7; b >= 0; --b) v = (v << 8) | bytes[i * 8 + static_cast<std::size_t>(b)];
        record.samples[i] = std::bit_cast<double>(v);
    }
    if (record.samples.empty()) throw ValidationError("raw stream is empty");
    return record;
}

namespace {

std::vector<std::uint8_t> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::string lower_ext(const std::string& path) {
    auto ext = std::filesystem::path(path).extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

} // namespace

signal::SignalRecord load_record(const std::string& path, const RecordMeta& meta) {
    const auto ext = lower_ext(path);
    if (ext == ".mat") {
        const auto vars = read_mat_file(path);
        const auto de = select_drive_end(vars);
        if (de.empty())
            throw ValidationError("no *_DE_time variable in " + path);
        signal::SignalRecord record;
        record.sample_rate_hz = meta.sample_rate_hz;
        record.rpm = meta.rpm;
        record.condition = meta.condition;
        record.fault_diameter_in = meta.fault_diameter_in;
        record.samples = de.front().data;
        return record;
    }
    const auto bytes = slurp(path);
    const std::span<const std::uint8_t> view(bytes.data(), bytes.size());
    if (ext == ".csv") return read_csv(view, meta);
    return read_raw_f64le(view, meta);
}

std::string manifest_line(const std::string& relative_path, signal::Condition condition,
                          std::optional<double> fault_diameter_in, int rpm) {
    std::ostringstream os;
    os << relative_path << "," << signal::to_string(condition) << ",";
    if (fault_diameter_in)
        os << *fault_diameter_in;
    else
        os << "-";
    os << "," << rpm;
    return os.str();
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    const auto base = std::filesystem::path(path).parent_path();

    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;

        std::array<std::string, 4> fields;
        std::size_t field = 0, start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                if (field >= 4)
                    throw ValidationError("manifest line " + std::to_string(line_no) +
                                          ": too many fields");
                fields[field++] = line.substr(start, i - start);
                start = i + 1;
            }
        }
        if (field != 4)
            throw ValidationError("manifest line " + std::to_string(line_no) +
                                  ": expected path,condition,diameter,rpm");

        ManifestEntry e;
        const std::filesystem::path rel(fields[0]);
        e.path = rel.is_absolute() ? rel.string() : (base / rel).string();
        const auto cond = signal::condition_from_string(fields[1]);
        if (!cond)
            throw ValidationError("manifest line " + std::to_string(line_no) +
                                  ": unknown condition '" + fields[1] + "'");
        e.condition = *cond;
        if (fields[2] != "-" && fields[2] != "nan" && fields[2] != "NaN") {
            double d = 0.0;
            const auto [ptr, ec] = std::from_chars(fields[2].data(),
                                                   fields[2].data() + fields[2].size(), d);
            if (ec != std::errc{} || ptr != fields[2].data() + fields[2].size())
                throw ValidationError("manifest line " + std::to_string(line_no) +
                                      ": bad diameter '" + fields[2] + "'");
            e.fault_diameter_in = d;
        }
        int rpm = 0;
        const auto [ptr, ec] = std::from_chars(fields[3].data(),
                                               fields[3].data() + fields[3].size(), rpm);
        if (ec != std::errc{} || ptr != fields[3].data() + fields[3].size() || rpm <= 0)
            throw ValidationError("manifest line " + std::to_string(line_no) + ": bad rpm '" +
                                  fields[3] + "'");
        e.rpm = rpm;
        entries.push_back(std::move(e));
    }
    if (entries.empty()) throw ValidationError("manifest has no entries: " + path);
    return entries;
}

std::vector<signal::SignalRecord> load_manifest_records(const std::string& manifest_path,
                                                        double sample_rate_hz) {
    const auto entries = read_manifest(manifest_path);
    std::vector<signal::SignalRecord> records;
    records.reserve(entries.size());
    for (const auto& e : entries) {
        RecordMeta meta;
        meta.sample_rate_hz = sample_rate_hz;
        meta.rpm = e.rpm;
        meta.condition = e.condition;
        meta.fault_diameter_in = e.fault_diameter_in;
        records.push_back(load_record(e.path, meta));
    }
    return records;
}

DatasetSplit assemble_dataset(const std::vector<signal::SignalRecord>& records, LabelScheme scheme,
                              std::size_t segments_per_class_per_rpm, std::uint64_t seed,
                              const AssembleOptions& opts) {
    if (records.empty()) throw ValidationError("no records to assemble");
    if (segments_per_class_per_rpm == 0)
        throw ValidationError("segments per class per rpm must be positive");

    // Pool segments by (class value, rpm); one class may pool several records
    // (e.g. three diameters under the four-class scheme).
    std::map<std::pair<int, int>, std::vector<std::vector<signal::Segment>>> pools;
    std::vector<int> rpms;
    for (const auto& record : records) {
        signal::validate(record);
        const FaultLabel label = label_for(record.condition, record.fault_diameter_in, scheme);
        pools[{label.value, record.rpm}].push_back(segment_record(record, opts.segment_length));
        if (std::find(rpms.begin(), rpms.end(), record.rpm) == rpms.end())
            rpms.push_back(record.rpm);
    }

    const int n_classes = class_count(scheme);
    std::vector<std::pair<signal::Segment, FaultLabel>> all;
    for (int cls = 1; cls <= n_classes; ++cls) {
        for (int rpm : rpms) {
            const auto it = pools.find({cls, rpm});
            std::size_t available = 0;
            if (it != pools.end())
                for (const auto& group : it->second) available += group.size();
            if (it == pools.end() || available < segments_per_class_per_rpm)
                throw ValidationError(
                    "insufficient segments for class " + std::to_string(cls) + " at " +
                    std::to_string(rpm) + " rpm: need " +
                    std::to_string(segments_per_class_per_rpm) + ", have " +
                    std::to_string(available));
            // Draw round-robin across the pooled records so each contributes
            // evenly (healthy subsampling and pooled diameters alike).
            auto& groups = it->second;
            std::size_t taken = 0;
            for (std::size_t i = 0; taken < segments_per_class_per_rpm; ++i) {
                for (auto& group : groups) {
                    if (taken == segments_per_class_per_rpm) break;
                    if (i < group.size()) {
                        all.emplace_back(std::move(group[i]), FaultLabel{scheme, cls});
                        ++taken;
                    }
                }
            }
        }
    }

    Rng rng(seed);
    rng.shuffle(all);

    // Stratified 80/20: per class the last floor(n/5) occurrences in shuffle
    // order become the test set; rounding favors train.
    std::vector<std::size_t> class_total(static_cast<std::size_t>(n_classes) + 1, 0);
    for (const auto& [seg, label] : all) class_total[static_cast<std::size_t>(label.value)]++;
    std::vector<std::size_t> train_quota(static_cast<std::size_t>(n_classes) + 1, 0);
    for (int cls = 1; cls <= n_classes; ++cls) {
        const std::size_t n = class_total[static_cast<std::size_t>(cls)];
        train_quota[static_cast<std::size_t>(cls)] = n - n / 5;
    }

    DatasetSplit split;
    split.seed = seed;
    std::vector<std::size_t> seen(static_cast<std::size_t>(n_classes) + 1, 0);
    for (auto& item : all) {
        auto& count = seen[static_cast<std::size_t>(item.second.value)];
        if (count < train_quota[static_cast<std::size_t>(item.second.value)])
            split.train.push_back(std::move(item));
        else
            split.test.push_back(std::move(item));
        ++count;
    }
    return split;
}

} // namespace vibfault::ingest
