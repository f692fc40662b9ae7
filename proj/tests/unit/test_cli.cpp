#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "temp_dir.hpp"
#include "vibfault/cli.hpp"
#include "vibfault/encoders.hpp"

namespace fs = std::filesystem;
using vibfault::cli::run;

namespace {

struct RunResult {
    int code = 0;
    std::string out;
    std::string err;
};

RunResult cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    RunResult r;
    r.code = run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::size_t line_count(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

// A small synthetic dataset shared by the pipeline tests.
void make_dataset(const std::string& dir, const std::string& extra = "") {
    std::vector<std::string> args = {"synth", "--out",  dir,   "--classes", "four",
                                     "--duration", "2.0", "--seed", "11"};
    if (!extra.empty()) args.push_back(extra);
    const auto r = cli(args);
    REQUIRE(r.code == 0);
}

} // namespace

TEST_CASE("synth writes one file per class and rpm plus the manifest") {
    testutil::TempDir tmp;
    const auto r = cli({"synth", "--out", tmp.file("data"), "--classes", "four", "--duration",
                        "1.0", "--seed", "3"});
    CHECK(r.code == 0);
    std::size_t f64_files = 0;
    for (const auto& e : fs::directory_iterator(tmp.file("data")))
        if (e.path().extension() == ".f64") ++f64_files;
    CHECK(f64_files == 16); // 4 classes x 4 rpm
    CHECK(line_count(slurp(tmp.file("data") + "/manifest.txt")) == 16);
}

TEST_CASE("synth is byte-identical under the same seed") {
    testutil::TempDir tmp;
    const auto args = [&](const char* dir) {
        return std::vector<std::string>{"synth",      "--out", tmp.file(dir), "--classes", "four",
                                        "--duration", "1.0",   "--seed",      "21",        "--rpm",
                                        "1730"};
    };
    REQUIRE(cli(args("a")).code == 0);
    REQUIRE(cli(args("b")).code == 0);
    for (const auto& e : fs::directory_iterator(tmp.file("a"))) {
        const auto name = e.path().filename().string();
        CHECK(slurp(tmp.file("a") + "/" + name) == slurp(tmp.file("b") + "/" + name));
    }
}

TEST_CASE("synth reports an unwritable output path") {
    const auto r = cli({"synth", "--out", "/proc/sys/vibfault_denied", "--duration", "0.5"});
    CHECK(r.code != 0);
    CHECK(r.err.find("/proc/sys/vibfault_denied") != std::string::npos);
}

TEST_CASE("encode writes pgm for single-channel methods") {
    testutil::TempDir tmp;
    make_dataset(tmp.file("data"));
    const auto r = cli({"encode", "--input", tmp.file("data") + "/ball007_1730.f64", "--method",
                        "pixel", "--out", tmp.file("img"), "--max-segments", "3"});
    CHECK(r.code == 0);
    const auto pgm = slurp(tmp.file("img") + "/seg_0000.pgm");
    CHECK(pgm.rfind("P5\n31 31\n255\n", 0) == 0);
    CHECK(pgm.size() == std::string("P5\n31 31\n255\n").size() + 961);
}

TEST_CASE("encode writes a two-channel vimg for gafmtf") {
    testutil::TempDir tmp;
    make_dataset(tmp.file("data"));
    const auto r = cli({"encode", "--input", tmp.file("data") + "/ir007_1730.f64", "--method",
                        "gafmtf", "--out", tmp.file("img"), "--max-segments", "1"});
    CHECK(r.code == 0);
    const auto img = vibfault::encoders::read_vimg(tmp.file("img") + "/seg_0000.vimg");
    CHECK(img.channels == 2);
    CHECK(img.side == 256);
}

TEST_CASE("encode rejects an unknown method with the valid list") {
    testutil::TempDir tmp;
    make_dataset(tmp.file("data"));
    const auto r = cli({"encode", "--input", tmp.file("data") + "/ball007_1730.f64", "--method",
                        "bogus"});
    CHECK(r.code == 1);
    for (const char* m : {"pixel", "gasf", "mtf", "rp", "gafmtf"})
        CHECK(r.err.find(m) != std::string::npos);
}

TEST_CASE("train then eval then bench round-trip") {
    testutil::TempDir tmp;
    make_dataset(tmp.file("data"));
    const auto manifest = tmp.file("data") + "/manifest.txt";

    const auto train = cli({"train", "--manifest", manifest, "--scheme", "four", "--method",
                            "pixel", "--segments", "20", "--epochs", "2", "--batch", "16",
                            "--seed", "5", "--out", tmp.file("pixel.vcnn")});
    REQUIRE(train.code == 0);
    CHECK(train.out.find("test_accuracy=") != std::string::npos);
    CHECK(fs::exists(tmp.file("pixel.vcnn")));

    const auto ev = cli({"eval", "--model", tmp.file("pixel.vcnn"), "--manifest", manifest,
                         "--scheme", "four", "--method", "pixel", "--segments", "20", "--seed",
                         "77", "--out", tmp.file("report")});
    REQUIRE(ev.code == 0);
    CHECK(fs::exists(tmp.file("report") + "/report.txt"));
    const auto confusion = slurp(tmp.file("report") + "/confusion.csv");
    CHECK(confusion.rfind("true\\pred,1,2,3,4", 0) == 0);

    const auto bench = cli({"bench", "--models", tmp.str(), "--input",
                            tmp.file("data") + "/or007_1730.f64", "--methods", "pixel", "--reps",
                            "10", "--warmup", "2", "--out", tmp.file("timing.csv")});
    REQUIRE(bench.code == 0);
    const auto csv = slurp(tmp.file("timing.csv"));
    CHECK(csv.rfind("method,encode_ms,infer_ms,total_ms\n", 0) == 0);
    CHECK(csv.find("pixel,") != std::string::npos);
    CHECK(line_count(csv) == 2);
}

TEST_CASE("train is deterministic: identical model bytes and accuracy") {
    testutil::TempDir tmp;
    make_dataset(tmp.file("data"));
    const auto manifest = tmp.file("data") + "/manifest.txt";
    const auto args = [&](const char* name) {
        return std::vector<std::string>{
            "train",      "--manifest", manifest, "--scheme", "four",   "--method", "pixel",
            "--segments", "20",         "--epochs", "2",      "--batch", "16",      "--seed",
            "9",          "--out",      tmp.file(name)};
    };
    const auto a = cli(args("a.vcnn"));
    const auto b = cli(args("b.vcnn"));
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(slurp(tmp.file("a.vcnn")) == slurp(tmp.file("b.vcnn")));
    const auto accuracy_line = [](const std::string& s) {
        const auto pos = s.find("test_accuracy=");
        REQUIRE(pos != std::string::npos);
        return s.substr(pos, s.find('\n', pos) - pos);
    };
    CHECK(accuracy_line(a.out) == accuracy_line(b.out));
}

TEST_CASE("bench names a missing model file") {
    testutil::TempDir tmp;
    make_dataset(tmp.file("data"));
    const auto r = cli({"bench", "--models", tmp.file("nothing"), "--input",
                        tmp.file("data") + "/healthy_1730.f64", "--methods", "gasf"});
    CHECK(r.code == 1);
    CHECK(r.err.find("gasf.vcnn") != std::string::npos);
}

TEST_CASE("config file values are applied and flags win") {
    testutil::TempDir tmp;
    make_dataset(tmp.file("data"));
    const auto manifest = tmp.file("data") + "/manifest.txt";
    {
        std::ofstream f(tmp.file("train.conf"));
        f << "manifest=" << manifest << "\n";
        f << "segments=20\n";
        f << "epochs=1\n";
        f << "batch=16\n";
        f << "out=" << tmp.file("conf.vcnn") << "\n";
    }
    const auto r = cli({"train", "--config", tmp.file("train.conf"), "--epochs", "2"});
    REQUIRE(r.code == 0);
    // Flag overrides the config's epochs=1.
    CHECK(r.out.find("epoch=2 ") != std::string::npos);
    CHECK(fs::exists(tmp.file("conf.vcnn")));
}

TEST_CASE("unknown config keys are rejected") {
    testutil::TempDir tmp;
    {
        std::ofstream f(tmp.file("bad.conf"));
        f << "frobnicate=1\n";
    }
    const auto r = cli({"ingest", "--manifest", "whatever", "--config", tmp.file("bad.conf")});
    CHECK(r.code == 1);
}

TEST_CASE("no-clobber refuses to overwrite") {
    testutil::TempDir tmp;
    make_dataset(tmp.file("data"));
    const auto r = cli({"synth", "--out", tmp.file("data"), "--classes", "four", "--duration",
                        "1.0", "--no-clobber"});
    CHECK(r.code == 1);
    CHECK(r.err.find("manifest.txt") != std::string::npos);
}

TEST_CASE("missing manifest is an io error with exit code 2") {
    const auto r = cli({"ingest", "--manifest", "/nonexistent/manifest.txt"});
    CHECK(r.code == 2);
    CHECK(r.err.find("/nonexistent/manifest.txt") != std::string::npos);
}

TEST_CASE("help exits zero and commands are idempotent") {
    const auto help = cli({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("synth") != std::string::npos);

    testutil::TempDir tmp;
    make_dataset(tmp.file("data"));
    const auto first = slurp(tmp.file("data") + "/manifest.txt");
    make_dataset(tmp.file("data")); // overwrite with identical content
    CHECK(slurp(tmp.file("data") + "/manifest.txt") == first);
}
