#include "doctest.h"

#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "temp_dir.hpp"
#include "vibfault/errors.hpp"
#include "vibfault/ingest.hpp"

using namespace vibfault;
using namespace vibfault::ingest;
using signal::Condition;

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::string data_path(const std::string& name) {
    return std::string(VIBFAULT_TEST_DATA_DIR) + "/" + name;
}

std::vector<std::uint8_t> bytes_of(const std::string& text) {
    return {text.begin(), text.end()};
}

signal::SignalRecord flat_record(std::size_t n, Condition c, std::optional<double> dia, int rpm) {
    signal::SignalRecord r;
    r.samples.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) r.samples[i] = static_cast<double>(i % 97);
    r.condition = c;
    r.fault_diameter_in = dia;
    r.rpm = rpm;
    return r;
}

} // namespace

TEST_CASE("read_mat parses the uncompressed reference fixture") {
    const auto bytes = read_file(data_path("simple_uncompressed.mat"));
    const auto vars = read_mat(bytes);
    REQUIRE(vars.size() == 1);
    CHECK(vars[0].name == "X097_DE_time");
    CHECK(vars[0].dims == std::vector<std::size_t>{2, 1});
    REQUIRE(vars[0].data.size() == 2);
    CHECK(vars[0].data[0] == 1.5);
    CHECK(vars[0].data[1] == -2.0);
}

TEST_CASE("read_mat inflates compressed elements to the same variable") {
    const auto plain = read_mat(read_file(data_path("simple_uncompressed.mat")));
    const auto packed = read_mat(read_file(data_path("simple_compressed.mat")));
    REQUIRE(plain.size() == 1);
    REQUIRE(packed.size() == 1);
    CHECK(plain[0].name == packed[0].name);
    CHECK(plain[0].dims == packed[0].dims);
    CHECK(plain[0].data == packed[0].data);
}

TEST_CASE("read_mat keeps doubles, skips other classes with a warning") {
    std::vector<std::string> warnings;
    const auto vars = read_mat(read_file(data_path("multi_channel.mat")), &warnings);
    REQUIRE(vars.size() == 2); // the int16 rpm matrix is skipped
    CHECK(vars[0].name == "X098_DE_time");
    CHECK(vars[1].name == "X098_FE_time");
    CHECK(!warnings.empty());
    // Values frozen from the writer.
    CHECK(vars[0].data[0] == doctest::Approx(0.0012301533574825742).epsilon(1e-15));
    CHECK(vars[0].data[1] == doctest::Approx(0.29874553750846988).epsilon(1e-15));
    CHECK(vars[0].data[23] == doctest::Approx(0.27126435882170152).epsilon(1e-15));
    CHECK(vars[1].data[0] == doctest::Approx(0.15675108662422516).epsilon(1e-15));
    for (const auto& v : vars) {
        std::size_t n = 1;
        for (auto d : v.dims) n *= d;
        CHECK(n == v.data.size());
    }
}

TEST_CASE("read_mat handles big-endian containers") {
    const auto vars = read_mat(read_file(data_path("big_endian.mat")));
    REQUIRE(vars.size() == 1);
    CHECK(vars[0].name == "X042_DE_time");
    CHECK(vars[0].dims == std::vector<std::size_t>{2, 1});
    CHECK(vars[0].data == std::vector<double>{2.5, -7.25});
}

TEST_CASE("read_mat rejects a broken endian indicator") {
    auto bytes = read_file(data_path("simple_uncompressed.mat"));
    bytes[126] = 'X';
    CHECK_THROWS_WITH_AS(read_mat(bytes), doctest::Contains("unsupported container"),
                         ValidationError);
}

TEST_CASE("read_mat rejects truncated files") {
    auto bytes = read_file(data_path("simple_uncompressed.mat"));
    bytes.resize(bytes.size() - 6);
    CHECK_THROWS_WITH_AS(read_mat(bytes), doctest::Contains("corrupt file"), ValidationError);

    auto packed = read_file(data_path("simple_compressed.mat"));
    packed.resize(packed.size() - 8);
    CHECK_THROWS_AS(read_mat(packed), ValidationError);
}

TEST_CASE("read_mat requires the 128-byte header") {
    const std::vector<std::uint8_t> tiny(16, 0);
    CHECK_THROWS_WITH_AS(read_mat(tiny), doctest::Contains("unsupported container"),
                         ValidationError);
}

TEST_CASE("select_drive_end filters by suffix") {
    const auto vars = read_mat(read_file(data_path("multi_channel.mat")));
    const auto de = select_drive_end(vars);
    REQUIRE(de.size() == 1);
    CHECK(de[0].name == "X098_DE_time");
}

TEST_CASE("read_csv parses plain values") {
    RecordMeta meta;
    const auto r = read_csv(bytes_of("1.0\n2.0\n"), meta);
    CHECK(r.samples == std::vector<double>{1.0, 2.0});

    const auto crlf = read_csv(bytes_of("1.5\r\n-2.5\r\n"), meta);
    CHECK(crlf.samples == std::vector<double>{1.5, -2.5});

    const auto header = read_csv(bytes_of("amplitude\n0.25\n"), meta);
    CHECK(header.samples == std::vector<double>{0.25});
}

TEST_CASE("read_csv reports the failing line") {
    RecordMeta meta;
    CHECK_THROWS_WITH_AS(read_csv(bytes_of("1.0\nabc\n"), meta), doctest::Contains("line 2"),
                         ValidationError);
}

TEST_CASE("read_raw_f64le decodes little-endian doubles") {
    std::vector<std::uint8_t> bytes(16, 0);
    const double one = 1.0;
    std::memcpy(bytes.data() + 8, &one, 8); // host is little-endian
    RecordMeta meta;
    meta.condition = Condition::Ball;
    meta.fault_diameter_in = 0.014;
    const auto r = read_raw_f64le(bytes, meta);
    CHECK(r.samples == std::vector<double>{0.0, 1.0});
    CHECK(r.condition == Condition::Ball);

    CHECK_THROWS_AS(read_raw_f64le(std::vector<std::uint8_t>(15, 0), meta), ValidationError);
}

TEST_CASE("label_for reproduces the class table") {
    CHECK(label_for(Condition::Healthy, std::nullopt, LabelScheme::FourClass).value == 1);
    CHECK(label_for(Condition::Healthy, std::nullopt, LabelScheme::TenClass).value == 1);
    CHECK(label_for(Condition::InnerRace, 0.014, LabelScheme::TenClass).value == 6);
    CHECK(label_for(Condition::OuterRace, 0.021, LabelScheme::FourClass).value == 4);
    CHECK(label_for(Condition::Ball, 0.007, LabelScheme::TenClass).value == 2);
    CHECK(label_for(Condition::Ball, 0.021, LabelScheme::TenClass).value == 4);
    CHECK(label_for(Condition::OuterRace, 0.007, LabelScheme::TenClass).value == 8);
    CHECK_THROWS_AS(label_for(Condition::Ball, 0.033, LabelScheme::TenClass), ValidationError);
}

TEST_CASE("label_for is a bijection onto 1..10 and groups into 1..4") {
    const std::vector<std::pair<Condition, std::optional<double>>> rows = {
        {Condition::Healthy, std::nullopt}, {Condition::Ball, 0.007},
        {Condition::Ball, 0.014},           {Condition::Ball, 0.021},
        {Condition::InnerRace, 0.007},      {Condition::InnerRace, 0.014},
        {Condition::InnerRace, 0.021},      {Condition::OuterRace, 0.007},
        {Condition::OuterRace, 0.014},      {Condition::OuterRace, 0.021},
    };
    std::set<int> ten;
    std::map<int, int> four_fibers;
    for (const auto& [cond, dia] : rows) {
        ten.insert(label_for(cond, dia, LabelScheme::TenClass).value);
        four_fibers[label_for(cond, dia, LabelScheme::FourClass).value]++;
    }
    CHECK(ten.size() == 10);
    CHECK(*ten.begin() == 1);
    CHECK(*ten.rbegin() == 10);
    REQUIRE(four_fibers.size() == 4);
    CHECK(four_fibers[1] == 1);
    CHECK(four_fibers[2] == 3);
    CHECK(four_fibers[3] == 3);
    CHECK(four_fibers[4] == 3);
}

namespace {

std::vector<signal::SignalRecord> ten_class_records(const std::vector<int>& rpms,
                                                    std::size_t samples_per_record) {
    std::vector<signal::SignalRecord> records;
    for (int rpm : rpms) {
        records.push_back(flat_record(samples_per_record, Condition::Healthy, std::nullopt, rpm));
        for (auto c : {Condition::Ball, Condition::InnerRace, Condition::OuterRace})
            for (double d : {0.007, 0.014, 0.021})
                records.push_back(flat_record(samples_per_record, c, d, rpm));
    }
    return records;
}

} // namespace

TEST_CASE("assemble_dataset splits 10x120 into 960/240 with uniform classes") {
    AssembleOptions opts;
    opts.segment_length = 50;
    const auto records = ten_class_records({1730}, 120 * 50);
    const auto split = assemble_dataset(records, LabelScheme::TenClass, 120, 7, opts);
    CHECK(split.train.size() == 960);
    CHECK(split.test.size() == 240);
    std::map<int, int> train_hist, test_hist;
    for (const auto& [seg, label] : split.train) train_hist[label.value]++;
    for (const auto& [seg, label] : split.test) test_hist[label.value]++;
    for (int c = 1; c <= 10; ++c) {
        CHECK(train_hist[c] == 96);
        CHECK(test_hist[c] == 24);
    }
}

TEST_CASE("assemble_dataset four-class over four rpms") {
    AssembleOptions opts;
    opts.segment_length = 50;
    const auto records = ten_class_records({1730, 1750, 1772, 1797}, 120 * 50);
    const auto split = assemble_dataset(records, LabelScheme::FourClass, 120, 7, opts);
    // 4 classes x 4 rpm x 120 segments, 80/20 stratified.
    CHECK(split.train.size() == 1536);
    CHECK(split.test.size() == 384);
    std::map<int, int> test_hist;
    for (const auto& [seg, label] : split.test) test_hist[label.value]++;
    for (int c = 1; c <= 4; ++c) CHECK(test_hist[c] == 96);

    // Pooled fault classes draw evenly across the three diameters.
    std::map<double, int> ball_diameters;
    for (const auto& [seg, label] : split.train)
        if (label.value == 2) ball_diameters[seg.source.fault_diameter_in.value()]++;
    for (const auto& [seg, label] : split.test)
        if (label.value == 2) ball_diameters[seg.source.fault_diameter_in.value()]++;
    REQUIRE(ball_diameters.size() == 3);
    for (const auto& [dia, count] : ball_diameters) CHECK(count == 160); // 40 per rpm x 4
}

TEST_CASE("assemble_dataset is deterministic and partitions the selection") {
    AssembleOptions opts;
    opts.segment_length = 50;
    const auto records = ten_class_records({1730}, 120 * 50);
    const auto a = assemble_dataset(records, LabelScheme::TenClass, 100, 123, opts);
    const auto b = assemble_dataset(records, LabelScheme::TenClass, 100, 123, opts);
    REQUIRE(a.train.size() == b.train.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].second.value == b.train[i].second.value);
        CHECK(a.train[i].first.samples == b.train[i].first.samples);
    }

    // Train and test are disjoint and cover exactly the selected segments.
    using Key = std::tuple<int, int, std::size_t, double>;
    std::set<Key> seen;
    const auto key = [](const std::pair<signal::Segment, FaultLabel>& item) {
        return Key{item.second.value, item.first.source.rpm, item.first.index,
                   item.first.source.fault_diameter_in.value_or(-1.0)};
    };
    for (const auto& item : a.train) CHECK(seen.insert(key(item)).second);
    for (const auto& item : a.test) CHECK(seen.insert(key(item)).second);
    CHECK(seen.size() == 1000);
}

TEST_CASE("assemble_dataset names the deficient class") {
    AssembleOptions opts;
    opts.segment_length = 50;
    auto records = ten_class_records({1730}, 120 * 50);
    records[3].samples.resize(60 * 50); // ball 0.021 -> only 60 segments
    CHECK_THROWS_WITH_AS(assemble_dataset(records, LabelScheme::TenClass, 120, 7, opts),
                         doctest::Contains("insufficient segments"), ValidationError);
    // The four-class scheme pools the three ball records: 120+120+60 >= 120.
    const auto split = assemble_dataset(records, LabelScheme::FourClass, 120, 7, opts);
    CHECK(split.train.size() + split.test.size() == 480);
}

TEST_CASE("manifest round-trip") {
    testutil::TempDir tmp;
    {
        std::ofstream f(tmp.file("manifest.txt"));
        f << "# comment line\n";
        f << manifest_line("a.f64", Condition::Healthy, std::nullopt, 1730) << "\n";
        f << manifest_line("b.f64", Condition::InnerRace, 0.014, 1797) << "\n";
    }
    const auto entries = read_manifest(tmp.file("manifest.txt"));
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].condition == Condition::Healthy);
    CHECK(!entries[0].fault_diameter_in.has_value());
    CHECK(entries[0].rpm == 1730);
    CHECK(entries[0].path == tmp.file("a.f64"));
    CHECK(entries[1].condition == Condition::InnerRace);
    CHECK(entries[1].fault_diameter_in == 0.014);

    std::ofstream bad(tmp.file("bad.txt"));
    bad << "a.f64,ball,0.007\n";
    bad.close();
    CHECK_THROWS_AS(read_manifest(tmp.file("bad.txt")), ValidationError);
    CHECK_THROWS_AS(read_manifest(tmp.file("missing.txt")), IoError);
}
