// Python bindings for the encoding pipeline, the CNN, and the evaluation
// metrics. Arrays cross the boundary as numpy float32/int32 buffers.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "gafcnn/errors.hpp"
#include "gafcnn/eval.hpp"
#include "gafcnn/gaf.hpp"
#include "gafcnn/model.hpp"
#include "gafcnn/parallel.hpp"
#include "gafcnn/signal_io.hpp"
#include "gafcnn/synth.hpp"

namespace py = pybind11;
using namespace gafcnn;

namespace {

EncoderConfig make_encoder_config(const std::string& kind, const std::string& reduction, int size,
                                  int channels) {
    EncoderConfig cfg;
    if (kind == "gasf") {
        cfg.kind = GafKind::Gasf;
    } else if (kind == "gadf") {
        cfg.kind = GafKind::Gadf;
    } else {
        throw ArgError("kind must be 'gasf' or 'gadf', got '" + kind + "'");
    }
    if (reduction == "bilinear") {
        cfg.reduction = Reduction::ImageBilinear;
    } else if (reduction == "paa") {
        cfg.reduction = Reduction::SeriesPaa;
    } else {
        throw ArgError("reduction must be 'bilinear' or 'paa', got '" + reduction + "'");
    }
    cfg.target_size = size;
    cfg.channels = channels;
    return cfg;
}

std::vector<double> to_series(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 1) {
        throw ArgError("expected a 1-d series");
    }
    return {a.data(), a.data() + a.shape(0)};
}

Dataset dataset_from_arrays(
    const py::array_t<float, py::array::c_style | py::array::forcecast>& samples,
    const py::array_t<int, py::array::c_style | py::array::forcecast>& labels, int num_classes) {
    if (samples.ndim() != 2 || samples.shape(1) != kSegmentLength) {
        throw ArgError("samples must be (n, " + std::to_string(kSegmentLength) + ")");
    }
    if (labels.ndim() != 1 || labels.shape(0) != samples.shape(0)) {
        throw ArgError("labels must be (n,) matching samples");
    }
    Dataset ds;
    ds.num_classes = num_classes;
    ds.name = "arrays";
    const auto n = static_cast<std::size_t>(samples.shape(0));
    ds.records.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const float* row = samples.data() + i * kSegmentLength;
        ds.records[i].samples.assign(row, row + kSegmentLength);
        ds.records[i].label = labels.data()[i];
        if (ds.records[i].label < 0 || ds.records[i].label >= num_classes) {
            throw ArgError("label outside [0, num_classes) at row " + std::to_string(i));
        }
    }
    return ds;
}

py::tuple dataset_to_arrays(const Dataset& ds) {
    py::array_t<float> samples({static_cast<py::ssize_t>(ds.size()),
                                static_cast<py::ssize_t>(kSegmentLength)});
    py::array_t<int> labels(static_cast<py::ssize_t>(ds.size()));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::memcpy(samples.mutable_data() + i * kSegmentLength, ds.records[i].samples.data(),
                    sizeof(float) * kSegmentLength);
        labels.mutable_data()[i] = ds.records[i].label;
    }
    return py::make_tuple(samples, labels);
}

nn::Tensor batch_from_array(
    const py::array_t<float, py::array::c_style | py::array::forcecast>& images) {
    if (images.ndim() != 4) {
        throw ArgError("images must be (n, h, w, c)");
    }
    nn::Tensor t({static_cast<int>(images.shape(0)), static_cast<int>(images.shape(1)),
                  static_cast<int>(images.shape(2)), static_cast<int>(images.shape(3))});
    std::memcpy(t.values().data(), images.data(), sizeof(float) * t.numel());
    return t;
}

py::array_t<float> tensor_to_array(const nn::Tensor& t) {
    std::vector<py::ssize_t> shape;
    for (const int d : t.dims()) shape.push_back(d);
    py::array_t<float> out(shape);
    std::memcpy(out.mutable_data(), t.values().data(), sizeof(float) * t.numel());
    return out;
}

py::dict report_to_dict(const EvalReport& report) {
    py::dict d;
    d["accuracy"] = report.accuracy;
    d["f1_macro"] = report.f1_macro;
    d["f1_weighted"] = report.f1_weighted;
    const int k = report.confusion.num_classes;
    py::array_t<std::int64_t> confusion({k, k});
    std::memcpy(confusion.mutable_data(), report.confusion.counts.data(),
                sizeof(std::int64_t) * report.confusion.counts.size());
    d["confusion"] = confusion;
    d["precision"] = report.precision;
    d["recall"] = report.recall;
    d["f1"] = report.f1;
    d["support"] = report.support;
    std::vector<double> auc;
    py::list roc_points;
    for (const auto& roc : report.roc) {
        auc.push_back(roc.auc);
        py::array_t<double> pts({static_cast<py::ssize_t>(roc.points.size()),
                                 static_cast<py::ssize_t>(3)});
        for (std::size_t i = 0; i < roc.points.size(); ++i) {
            pts.mutable_data()[i * 3 + 0] = roc.points[i].fpr;
            pts.mutable_data()[i * 3 + 1] = roc.points[i].tpr;
            pts.mutable_data()[i * 3 + 2] = roc.points[i].threshold;
        }
        roc_points.append(pts);
    }
    d["auc"] = auc;
    d["roc"] = roc_points;
    d["warnings"] = report.warnings;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "GAF encoding and CNN classification for fixed-length heartbeat segments";

    py::register_exception<Error>(m, "GafcnnError", PyExc_RuntimeError);

    m.def(
        "rescale",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& series) {
            const NormalizedSeries ns = rescale(to_series(series));
            py::dict d;
            d["values"] = py::array_t<double>(ns.values.size(), ns.values.data());
            d["angles"] = py::array_t<double>(ns.angles.size(), ns.angles.data());
            d["radii"] = py::array_t<double>(ns.radii.size(), ns.radii.data());
            return d;
        },
        py::arg("series"),
        "Min-max rescale to [-1, 1] with the polar mapping (values, angles, radii).");

    auto field = [](const std::vector<double>& series, GafKind kind) {
        const NormalizedSeries ns = rescale(series);
        const GafMatrix g = kind == GafKind::Gasf ? gasf(ns) : gadf(ns);
        py::array_t<float> out({static_cast<py::ssize_t>(g.n), static_cast<py::ssize_t>(g.n)});
        std::memcpy(out.mutable_data(), g.entries.data(), sizeof(float) * g.entries.size());
        return out;
    };
    m.def(
        "gasf",
        [field](const py::array_t<double, py::array::c_style | py::array::forcecast>& series) {
            return field(to_series(series), GafKind::Gasf);
        },
        py::arg("series"), "Gramian angular summation field of a raw series.");
    m.def(
        "gadf",
        [field](const py::array_t<double, py::array::c_style | py::array::forcecast>& series) {
            return field(to_series(series), GafKind::Gadf);
        },
        py::arg("series"), "Gramian angular difference field of a raw series.");

    m.def(
        "paa",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& series, int m_out) {
            const std::vector<double> out = paa(to_series(series), m_out);
            return py::array_t<double>(out.size(), out.data());
        },
        py::arg("series"), py::arg("m"),
        "Piecewise aggregate approximation with fractional overlap weighting.");

    m.def(
        "resize_bilinear",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& image, int out_h,
           int out_w) {
            if (image.ndim() != 2) {
                throw ArgError("resize_bilinear expects a 2-d matrix");
            }
            const std::vector<float> in(image.data(), image.data() + image.size());
            const std::vector<float> out = resize_bilinear(
                in, static_cast<int>(image.shape(0)), static_cast<int>(image.shape(1)), out_h, out_w);
            py::array_t<float> res({static_cast<py::ssize_t>(out_h), static_cast<py::ssize_t>(out_w)});
            std::memcpy(res.mutable_data(), out.data(), sizeof(float) * out.size());
            return res;
        },
        py::arg("image"), py::arg("out_h"), py::arg("out_w"),
        "Bilinear resize with half-pixel-centered coordinates.");

    m.def(
        "encode",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& samples,
           const std::string& kind, const std::string& reduction, int size, int channels) {
            if (samples.ndim() != 1 || samples.shape(0) != kSegmentLength) {
                throw ArgError("encode expects a single record of length " +
                               std::to_string(kSegmentLength));
            }
            HeartbeatRecord rec;
            rec.samples.assign(samples.data(), samples.data() + kSegmentLength);
            const GafImage img =
                encode(rec, make_encoder_config(kind, reduction, size, channels));
            py::array_t<float> out({static_cast<py::ssize_t>(img.height),
                                    static_cast<py::ssize_t>(img.width),
                                    static_cast<py::ssize_t>(img.channels)});
            std::memcpy(out.mutable_data(), img.pixels.data(), sizeof(float) * img.pixels.size());
            return out;
        },
        py::arg("samples"), py::arg("kind") = "gasf", py::arg("reduction") = "bilinear",
        py::arg("size") = 32, py::arg("channels") = 3,
        "Encode one 187-sample record into an (H, W, C) image in [-1, 1].");

    m.def(
        "encode_batch",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& samples,
           const std::string& kind, const std::string& reduction, int size, int channels,
           int threads) {
            py::array_t<int> labels(samples.shape(0));
            std::memset(labels.mutable_data(), 0, sizeof(int) * samples.shape(0));
            const Dataset ds = dataset_from_arrays(samples, labels, 2);
            const auto images =
                encode_dataset(ds, make_encoder_config(kind, reduction, size, channels), threads);
            const int h = images[0].height, w = images[0].width, c = images[0].channels;
            py::array_t<float> out({static_cast<py::ssize_t>(images.size()),
                                    static_cast<py::ssize_t>(h), static_cast<py::ssize_t>(w),
                                    static_cast<py::ssize_t>(c)});
            const std::size_t stride = images[0].pixels.size();
            for (std::size_t i = 0; i < images.size(); ++i) {
                std::memcpy(out.mutable_data() + i * stride, images[i].pixels.data(),
                            sizeof(float) * stride);
            }
            return out;
        },
        py::arg("samples"), py::arg("kind") = "gasf", py::arg("reduction") = "bilinear",
        py::arg("size") = 32, py::arg("channels") = 3, py::arg("threads") = 1,
        "Encode an (n, 187) array of records into an (n, H, W, C) image stack.");

    m.def(
        "load_csv",
        [](const std::string& path, int num_classes) {
            return dataset_to_arrays(load_csv(path, num_classes));
        },
        py::arg("path"), py::arg("num_classes"),
        "Load a 188-field heartbeat CSV as (samples, labels) arrays.");

    m.def(
        "stratified_subsample",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& samples,
           const py::array_t<int, py::array::c_style | py::array::forcecast>& labels,
           int num_classes, double fraction, std::uint32_t seed) {
            return dataset_to_arrays(
                stratified_subsample(dataset_from_arrays(samples, labels, num_classes), fraction,
                                     seed));
        },
        py::arg("samples"), py::arg("labels"), py::arg("num_classes"), py::arg("fraction"),
        py::arg("seed"), "Seeded stratified subsample preserving class proportions.");

    m.def(
        "make_synthetic",
        [](const std::string& kind, std::size_t n, std::uint32_t seed) {
            if (kind == "arrhythmia") return dataset_to_arrays(synth::make_arrhythmia_like(n, seed));
            if (kind == "binary") return dataset_to_arrays(synth::make_binary_like(n, seed));
            throw ArgError("kind must be 'arrhythmia' or 'binary'");
        },
        py::arg("kind"), py::arg("n"), py::arg("seed"),
        "Deterministic synthetic heartbeat corpus as (samples, labels) arrays.");

    m.def("set_threads", &set_default_threads, py::arg("threads"),
          "Worker threads for batch operations.");

    py::class_<Model>(m, "Model")
        .def_static(
            "build",
            [](int num_classes, int input_size, int input_channels, int dense_units,
               int head_units, std::uint32_t seed) {
                ModelConfig cfg;
                cfg.num_classes = num_classes;
                cfg.input_size = input_size;
                cfg.input_channels = input_channels;
                cfg.dense_units = dense_units;
                cfg.head_units = head_units;
                return Model::build(cfg, seed);
            },
            py::arg("num_classes"), py::arg("input_size") = 32, py::arg("input_channels") = 3,
            py::arg("dense_units") = 64, py::arg("head_units") = 0, py::arg("seed") = 0)
        .def_static("load", &Model::load, py::arg("path"))
        .def("save", &Model::save, py::arg("path"))
        .def("set_input_size", &Model::set_input_size, py::arg("size"))
        .def("parameter_count", &Model::parameter_count)
        .def("shape_chain",
             [](const Model& model) {
                 py::list chain;
                 for (const auto& dims : model.shape_chain()) chain.append(py::tuple(py::cast(dims)));
                 return chain;
             })
        .def("config",
             [](const Model& model) {
                 py::dict d;
                 d["input_size"] = model.config().input_size;
                 d["input_channels"] = model.config().input_channels;
                 d["num_classes"] = model.config().num_classes;
                 d["dense_units"] = model.config().dense_units;
                 d["head_units"] = model.config().head();
                 return d;
             })
        .def(
            "forward",
            [](Model& model,
               const py::array_t<float, py::array::c_style | py::array::forcecast>& images) {
                return tensor_to_array(model.forward(batch_from_array(images)));
            },
            py::arg("images"), "Raw logits for an (n, h, w, c) batch.")
        .def(
            "predict",
            [](Model& model,
               const py::array_t<float, py::array::c_style | py::array::forcecast>& images) {
                const Prediction pred = model.predict(batch_from_array(images));
                py::array_t<int> classes(pred.classes.size());
                std::memcpy(classes.mutable_data(), pred.classes.data(),
                            sizeof(int) * pred.classes.size());
                return py::make_tuple(classes, tensor_to_array(pred.probabilities));
            },
            py::arg("images"), "(classes, probabilities) for an (n, h, w, c) batch.");

    m.def(
        "train",
        [](Model& model, const py::array_t<float, py::array::c_style | py::array::forcecast>& images,
           const std::vector<int>& labels, int epochs, int batch_size, float learning_rate,
           const std::string& optimizer, std::uint32_t seed, bool shuffle) {
            TrainConfig cfg;
            cfg.epochs = epochs;
            cfg.batch_size = batch_size;
            cfg.learning_rate = learning_rate;
            cfg.optimizer = nn::optimizer_kind_from_string(optimizer);
            cfg.seed = seed;
            cfg.shuffle = shuffle;
            const TrainTrace trace = train(model, batch_from_array(images), labels, cfg);
            py::list out;
            for (const auto& e : trace.epochs) {
                py::dict d;
                d["epoch"] = e.epoch;
                d["loss"] = e.loss;
                d["accuracy"] = e.accuracy;
                d["wall_ms"] = e.wall_ms;
                out.append(d);
            }
            return out;
        },
        py::arg("model"), py::arg("images"), py::arg("labels"), py::arg("epochs") = 10,
        py::arg("batch_size") = 32, py::arg("learning_rate") = 1e-3f, py::arg("optimizer") = "adam",
        py::arg("seed") = 0, py::arg("shuffle") = true,
        "Train in place; returns one dict per epoch.");

    m.def(
        "evaluate",
        [](Model& model, const py::array_t<float, py::array::c_style | py::array::forcecast>& images,
           const std::vector<int>& labels, int batch_size) {
            return report_to_dict(evaluate(model, batch_from_array(images), labels, batch_size));
        },
        py::arg("model"), py::arg("images"), py::arg("labels"), py::arg("batch_size") = 64,
        "Confusion matrix, accuracy, F1 variants, and one-vs-rest ROC/AUC.");

    m.def(
        "evaluate_predictions",
        [](const std::vector<int>& truth, const std::vector<int>& predicted,
           const py::array_t<float, py::array::c_style | py::array::forcecast>& probabilities,
           int num_classes) {
            nn::Tensor probs;
            if (probabilities.size() > 0) {
                if (probabilities.ndim() != 2) {
                    throw ArgError("probabilities must be (n, k)");
                }
                probs = nn::Tensor({static_cast<int>(probabilities.shape(0)),
                                    static_cast<int>(probabilities.shape(1))});
                std::memcpy(probs.values().data(), probabilities.data(),
                            sizeof(float) * probs.numel());
            }
            return report_to_dict(evaluate_predictions(truth, predicted, probs, num_classes));
        },
        py::arg("truth"), py::arg("predicted"), py::arg("probabilities"), py::arg("num_classes"),
        "Metrics from raw predictions; pass an empty array to skip ROC.");

#ifdef GAFCNN_VERSION
    m.attr("__version__") = GAFCNN_VERSION;
#else
    m.attr("__version__") = "dev";
#endif
}
