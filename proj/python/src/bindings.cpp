#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "vibfault/eval.hpp"

namespace py = pybind11;
using namespace vibfault;

namespace {

signal::Condition parse_condition(const std::string& s) {
    const auto c = signal::condition_from_string(s);
    if (!c) throw py::value_error("unknown condition '" + s + "' (healthy|ball|ir|or)");
    return *c;
}

encoders::Method parse_method(const std::string& s) {
    const auto m = encoders::method_from_string(s);
    if (!m) throw py::value_error("unknown method '" + s + "' (pixel|gasf|mtf|rp|gafmtf)");
    return *m;
}

ingest::LabelScheme parse_scheme(const std::string& s) {
    const auto sc = ingest::scheme_from_string(s);
    if (!sc) throw py::value_error("unknown scheme '" + s + "' (four|ten)");
    return *sc;
}

std::vector<double> samples_from(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 1) throw py::value_error("expected a 1-d sample array");
    return {a.data(), a.data() + a.shape(0)};
}

signal::Segment segment_from(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    signal::Segment seg;
    seg.samples = samples_from(a);
    seg.source = {0, signal::Condition::Healthy, std::nullopt};
    return seg;
}

py::array_t<float> image_array(const encoders::EncodedImage& img) {
    py::array_t<float> out({static_cast<py::ssize_t>(img.channels),
                            static_cast<py::ssize_t>(img.side),
                            static_cast<py::ssize_t>(img.side)});
    std::copy(img.data.begin(), img.data.end(), out.mutable_data());
    return out;
}

nn::Tensor tensor_from_image(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 3) throw py::value_error("expected an image shaped (channels, side, side)");
    nn::Tensor t;
    t.dims = {static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
              static_cast<std::size_t>(a.shape(2))};
    t.data.assign(a.data(), a.data() + a.size());
    return t;
}

struct PyModel {
    nn::CnnModel model;
};

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "vibration-to-image encodings and a compact CNN for bearing fault classification";
#ifdef VIBFAULT_VERSION
    m.attr("__version__") = VIBFAULT_VERSION;
#else
    m.attr("__version__") = "dev";
#endif

    py::class_<signal::SynthConfig>(m, "SynthConfig")
        .def(py::init<>())
        .def_readwrite("sample_rate_hz", &signal::SynthConfig::sample_rate_hz)
        .def_readwrite("rpm", &signal::SynthConfig::rpm)
        .def_readwrite("shaft_amp", &signal::SynthConfig::shaft_amp)
        .def_readwrite("ball_rate_factor", &signal::SynthConfig::ball_rate_factor)
        .def_readwrite("inner_rate_factor", &signal::SynthConfig::inner_rate_factor)
        .def_readwrite("outer_rate_factor", &signal::SynthConfig::outer_rate_factor)
        .def_readwrite("ring_freq_hz", &signal::SynthConfig::ring_freq_hz)
        .def_readwrite("ring_decay", &signal::SynthConfig::ring_decay)
        .def_readwrite("impulse_amp", &signal::SynthConfig::impulse_amp)
        .def_readwrite("noise_sigma", &signal::SynthConfig::noise_sigma)
        .def_readwrite("seed", &signal::SynthConfig::seed);

    m.def(
        "synth_signal",
        [](const signal::SynthConfig& cfg, const std::string& condition, double duration_s,
           double fault_diameter_in) {
            const auto rec =
                signal::synth_signal(cfg, parse_condition(condition), duration_s,
                                     fault_diameter_in);
            py::array_t<double> out(static_cast<py::ssize_t>(rec.samples.size()));
            std::copy(rec.samples.begin(), rec.samples.end(), out.mutable_data());
            return out;
        },
        py::arg("config"), py::arg("condition"), py::arg("duration_s"),
        py::arg("fault_diameter_in") = 0.007,
        "Generate a synthetic bearing signal; returns the sample array.");

    m.def(
        "minmax_normalize",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a, double lo,
           double hi) {
            const auto out = signal::minmax_normalize(samples_from(a), lo, hi);
            py::array_t<double> r(static_cast<py::ssize_t>(out.size()));
            std::copy(out.begin(), out.end(), r.mutable_data());
            return r;
        },
        py::arg("samples"), py::arg("lo"), py::arg("hi"));

    m.def(
        "encode",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
           const std::string& method, int side, int bins, bool decimate) {
            encoders::EncodeOptions opts;
            opts.bins = bins;
            opts.decimate = decimate;
            const auto img = encoders::encode(segment_from(a), parse_method(method), side, opts);
            return py::make_tuple(image_array(img),
                                  static_cast<long long>(img.encode_time.count()));
        },
        py::arg("samples"), py::arg("method"), py::arg("side"), py::arg("bins") = 8,
        py::arg("decimate") = false,
        "Encode a window into a (channels, side, side) float32 image; returns "
        "(image, encode_time_ns).");

    m.def("default_side", [](const std::string& method) {
        return encoders::default_side(parse_method(method));
    });

    m.def(
        "rqa_summary",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a, int side,
           double epsilon, int l_min) {
            const auto img = encoders::encode_recurrence(segment_from(a), side);
            const auto s = encoders::rqa_summary(img, epsilon, l_min);
            py::dict d;
            d["rr"] = s.recurrence_rate;
            d["det"] = s.determinism;
            d["lam"] = s.laminarity;
            d["l_max"] = s.l_max;
            d["ent"] = s.entropy;
            return d;
        },
        py::arg("samples"), py::arg("side"), py::arg("epsilon") = 0.1, py::arg("l_min") = 2,
        "Recurrence quantification summary of a window.");

    m.def(
        "label_for",
        [](const std::string& condition, py::object diameter, const std::string& scheme) {
            std::optional<double> d;
            if (!diameter.is_none()) d = diameter.cast<double>();
            return ingest::label_for(parse_condition(condition), d, parse_scheme(scheme)).value;
        },
        py::arg("condition"), py::arg("fault_diameter_in"), py::arg("scheme"));

    py::class_<PyModel>(m, "Model")
        .def_static(
            "default",
            [](int channels, int side, int num_classes, std::uint64_t seed) {
                PyModel p;
                p.model = nn::build_default_model({channels, side, side}, num_classes, seed);
                return p;
            },
            py::arg("channels"), py::arg("side"), py::arg("num_classes"), py::arg("seed") = 0)
        .def_static("load",
                    [](const std::string& path) {
                        PyModel p;
                        p.model = nn::load_model(path);
                        return p;
                    })
        .def("save", [](const PyModel& p, const std::string& path) {
            nn::save_model(p.model, path);
        })
        .def_property_readonly("param_count",
                               [](const PyModel& p) { return p.model.param_count(); })
        .def_property_readonly("num_classes",
                               [](const PyModel& p) { return p.model.num_classes; })
        .def(
            "train",
            [](PyModel& p,
               const py::array_t<float, py::array::c_style | py::array::forcecast>& images,
               const py::array_t<long long, py::array::c_style | py::array::forcecast>& labels,
               int epochs, int batch_size, std::uint64_t seed, double learning_rate) {
                if (images.ndim() != 4)
                    throw py::value_error("expected images shaped (n, channels, side, side)");
                if (labels.ndim() != 1 || labels.shape(0) != images.shape(0))
                    throw py::value_error("labels must be 1-d and match the image count");
                nn::LabeledImages data;
                const std::size_t n = static_cast<std::size_t>(images.shape(0));
                const std::size_t per = static_cast<std::size_t>(images.size()) / std::max<std::size_t>(n, 1);
                for (std::size_t i = 0; i < n; ++i) {
                    nn::Tensor t;
                    t.dims = {static_cast<std::size_t>(images.shape(1)),
                              static_cast<std::size_t>(images.shape(2)),
                              static_cast<std::size_t>(images.shape(3))};
                    t.data.assign(images.data() + i * per, images.data() + (i + 1) * per);
                    data.images.push_back(std::move(t));
                    data.labels.push_back(static_cast<int>(labels.at(static_cast<py::ssize_t>(i))));
                }
                nn::TrainOptions opts;
                opts.epochs = epochs;
                opts.batch_size = batch_size;
                opts.seed = seed;
                opts.learning_rate = learning_rate;
                const auto result = nn::train(p.model, data, opts);
                py::list log;
                for (const auto& e : result.epochs)
                    log.append(py::make_tuple(e.loss, e.accuracy));
                return log;
            },
            py::arg("images"), py::arg("labels"), py::arg("epochs"), py::arg("batch_size") = 64,
            py::arg("seed") = 0, py::arg("learning_rate") = 1e-3)
        .def(
            "predict",
            [](const PyModel& p,
               const py::array_t<float, py::array::c_style | py::array::forcecast>& image) {
                const auto pred = nn::predict(p.model, tensor_from_image(image));
                py::array_t<double> probs(static_cast<py::ssize_t>(pred.probabilities.size()));
                std::copy(pred.probabilities.begin(), pred.probabilities.end(),
                          probs.mutable_data());
                return py::make_tuple(pred.class_index, probs,
                                      static_cast<long long>(pred.inference_time.count()));
            },
            py::arg("image"),
            "Classify one image; returns (class_index, probabilities, inference_time_ns).");

    m.def(
        "bench_single",
        [](const PyModel& model,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& samples,
           const std::string& method, int side, int bins, int repetitions, int warmup) {
            const auto t = eval::bench_single(model.model, segment_from(samples),
                                              parse_method(method), side, bins, repetitions,
                                              warmup);
            py::dict d;
            d["encode_ms"] = t.encode.median_ns / 1e6;
            d["infer_ms"] = t.inference.median_ns / 1e6;
            d["total_ms"] = t.total.median_ns / 1e6;
            d["samples"] = t.samples;
            return d;
        },
        py::arg("model"), py::arg("samples"), py::arg("method"), py::arg("side"),
        py::arg("bins") = 8, py::arg("repetitions") = 100, py::arg("warmup") = 10,
        "Median per-stage latency of encode + predict for one segment.");

    m.def(
        "metrics",
        [](const py::array_t<long long, py::array::c_style | py::array::forcecast>& preds,
           const py::array_t<long long, py::array::c_style | py::array::forcecast>& labels,
           int n_classes) {
            if (preds.ndim() != 1 || labels.ndim() != 1)
                throw py::value_error("predictions and labels must be 1-d");
            std::vector<int> p(preds.shape(0)), l(labels.shape(0));
            for (py::ssize_t i = 0; i < preds.shape(0); ++i)
                p[static_cast<std::size_t>(i)] = static_cast<int>(preds.at(i));
            for (py::ssize_t i = 0; i < labels.shape(0); ++i)
                l[static_cast<std::size_t>(i)] = static_cast<int>(labels.at(i));
            const auto cm = eval::confusion_from(p, l, n_classes);
            const auto met = eval::metrics_from(cm);
            py::array_t<std::uint64_t> counts({static_cast<py::ssize_t>(n_classes),
                                               static_cast<py::ssize_t>(n_classes)});
            std::copy(cm.counts.begin(), cm.counts.end(), counts.mutable_data());
            py::dict d;
            d["accuracy"] = met.accuracy;
            d["macro_f1"] = met.macro_f1;
            py::list precision, recall, f1;
            for (const auto& pc : met.per_class) {
                precision.append(pc.precision);
                recall.append(pc.recall);
                f1.append(pc.f1);
            }
            d["precision"] = precision;
            d["recall"] = recall;
            d["f1"] = f1;
            d["confusion"] = counts;
            return d;
        },
        py::arg("predictions"), py::arg("labels"), py::arg("n_classes"),
        "Confusion matrix and derived metrics for 0-based class ids.");
}
