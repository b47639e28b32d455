// Command line pipeline: encode heartbeat CSVs to GAF images, train the
// CNN, evaluate checkpoints, and print report summaries.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gafcnn/errors.hpp"
#include "gafcnn/eval.hpp"
#include "gafcnn/gaf.hpp"
#include "gafcnn/model.hpp"
#include "gafcnn/parallel.hpp"
#include "gafcnn/signal_io.hpp"
#include "gafcnn/tensor_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace gafcnn;

namespace {

struct CommonArgs {
    std::uint32_t seed = 0;
    std::string out_dir = "out";
    int threads = static_cast<int>(std::thread::hardware_concurrency());
};

struct EncoderArgs {
    std::string gaf_kind = "gasf";
    std::string reduction = "bilinear";
    int size = 32;
    int channels = 3;

    EncoderConfig config() const {
        EncoderConfig cfg;
        if (gaf_kind == "gasf") {
            cfg.kind = GafKind::Gasf;
        } else if (gaf_kind == "gadf") {
            cfg.kind = GafKind::Gadf;
        } else {
            throw ArgError("unknown --gaf-kind '" + gaf_kind + "'");
        }
        if (reduction == "bilinear") {
            cfg.reduction = Reduction::ImageBilinear;
        } else if (reduction == "paa") {
            cfg.reduction = Reduction::SeriesPaa;
        } else {
            throw ArgError("unknown --reduction '" + reduction + "'");
        }
        cfg.target_size = size;
        cfg.channels = channels;
        return cfg;
    }
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--seed", args.seed, "Random seed for every stochastic step");
    cmd->add_option("--out-dir", args.out_dir, "Output directory");
    cmd->add_option("--threads", args.threads, "Worker threads for encoding and batch ops");
}

void add_encoder(CLI::App* cmd, EncoderArgs& args) {
    cmd->add_option("--gaf-kind", args.gaf_kind, "Field kind: gasf or gadf")
        ->check(CLI::IsMember({"gasf", "gadf"}));
    cmd->add_option("--reduction", args.reduction, "Size reduction: bilinear or paa")
        ->check(CLI::IsMember({"bilinear", "paa"}));
    cmd->add_option("--size", args.size, "Output image side length");
    cmd->add_option("--channels", args.channels, "Replicated channel count");
}

class Manifest {
public:
    Manifest(std::string command, const CommonArgs& common) {
        doc_["command"] = std::move(command);
        doc_["seed"] = common.seed;
        doc_["threads"] = common.threads;
        doc_["out_dir"] = common.out_dir;
        doc_["config"] = json::object();
        doc_["dataset_checksums"] = json::object();
        doc_["artifacts"] = json::array();
        doc_["timings_ms"] = json::object();
        start_ = std::chrono::steady_clock::now();
    }

    template <typename T>
    void config(const std::string& key, const T& value) {
        doc_["config"][key] = value;
    }
    void checksum(const std::string& path) {
        doc_["dataset_checksums"][path] = file_checksum(path);
    }
    void artifact(const fs::path& path) { doc_["artifacts"].push_back(path.string()); }
    void timing(const std::string& key, double ms) { doc_["timings_ms"][key] = ms; }

    void write(const fs::path& dir) {
        doc_["timings_ms"]["total"] =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
                .count();
        std::ofstream f(dir / "manifest.json", std::ios::trunc);
        if (!f) throw IoError("cannot write manifest.json in " + dir.string());
        f << doc_.dump(2) << '\n';
    }

private:
    json doc_;
    std::chrono::steady_clock::time_point start_;
};

double ms_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

nn::Tensor images_to_tensor(const std::vector<GafImage>& images) {
    if (images.empty()) {
        throw ArgError("no images to pack");
    }
    const int h = images[0].height, w = images[0].width, c = images[0].channels;
    nn::Tensor out({static_cast<int>(images.size()), h, w, c});
    const std::int64_t stride = static_cast<std::int64_t>(h) * w * c;
    for (std::size_t i = 0; i < images.size(); ++i) {
        std::copy(images[i].pixels.begin(), images[i].pixels.end(),
                  out.values().begin() + static_cast<std::int64_t>(i) * stride);
    }
    return out;
}

void write_labels(const fs::path& path, const std::vector<int>& labels) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write labels file: " + path.string());
    f << "label\n";
    for (const int l : labels) f << l << '\n';
}

std::vector<int> read_labels(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read labels file: " + path.string());
    std::string line;
    if (!std::getline(f, line) || line != "label") {
        throw FormatError("labels file missing header: " + path.string());
    }
    std::vector<int> labels;
    while (std::getline(f, line)) {
        if (!line.empty()) labels.push_back(std::stoi(line));
    }
    return labels;
}

std::uint64_t fnv64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

struct EncodedSet {
    nn::Tensor images;
    std::vector<int> labels;
};

/// Loads a CSV, optionally subsamples, encodes to a packed tensor. Encoded
/// tensors are cached under cache_dir keyed by the dataset checksum and the
/// resolved encoding configuration.
EncodedSet load_and_encode(const std::string& csv_path, int num_classes, double fraction,
                           const EncoderConfig& cfg, const CommonArgs& common,
                           const std::string& cache_dir, Manifest& manifest,
                           const char* timing_key) {
    const auto t0 = std::chrono::steady_clock::now();

    std::string key;
    fs::path tensor_path, labels_path;
    if (!cache_dir.empty()) {
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(fnv64(
                          file_checksum(csv_path) + "|" + std::to_string(num_classes) + "|" +
                          std::to_string(fraction) + "|" + std::to_string(common.seed) + "|" +
                          to_string(cfg.kind) + "|" + to_string(cfg.reduction) + "|" +
                          std::to_string(cfg.target_size) + "|" + std::to_string(cfg.channels))));
        key = buf;
        tensor_path = fs::path(cache_dir) / (key + ".gaf");
        labels_path = fs::path(cache_dir) / (key + ".labels.csv");
        if (fs::exists(tensor_path) && fs::exists(labels_path)) {
            const TensorFile t = read_tensor_file(tensor_path.string());
            if (t.dims.size() == 4) {
                EncodedSet set;
                set.images = nn::Tensor({static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]),
                                         static_cast<int>(t.dims[2]), static_cast<int>(t.dims[3])});
                std::copy(t.data.begin(), t.data.end(), set.images.values().begin());
                set.labels = read_labels(labels_path);
                if (set.labels.size() == t.dims[0]) {
                    manifest.config("encode_cache_hit", true);
                    manifest.timing(timing_key, ms_since(t0));
                    return set;
                }
            }
        }
    }

    Dataset ds = load_csv(csv_path, num_classes);
    if (fraction < 1.0) {
        ds = stratified_subsample(ds, fraction, common.seed);
    }
    const std::vector<GafImage> images = encode_dataset(ds, cfg, common.threads);

    EncodedSet set;
    set.images = images_to_tensor(images);
    set.labels.reserve(ds.size());
    for (const auto& r : ds.records) set.labels.push_back(r.label);

    if (!cache_dir.empty()) {
        fs::create_directories(cache_dir);
        std::vector<std::uint32_t> dims;
        for (const int d : set.images.dims()) dims.push_back(static_cast<std::uint32_t>(d));
        write_tensor_file(tensor_path.string(), dims,
                          {set.images.values().begin(), set.images.values().end()});
        write_labels(labels_path, set.labels);
        manifest.config("encode_cache_key", key);
    }
    manifest.config("encode_cache_hit", false);
    manifest.timing(timing_key, ms_since(t0));
    return set;
}

// ---------------------------------------------------------------------------

int cmd_encode(const CommonArgs& common, const EncoderArgs& enc, const std::string& input_csv,
               int num_classes, double fraction, bool packed, int export_png) {
    Manifest manifest("encode", common);
    manifest.config("input_csv", input_csv);
    manifest.config("num_classes", num_classes);
    manifest.config("subsample_fraction", fraction);
    manifest.config("gaf_kind", enc.gaf_kind);
    manifest.config("reduction", enc.reduction);
    manifest.config("size", enc.size);
    manifest.config("channels", enc.channels);
    manifest.config("packed", packed);
    manifest.config("export_png", export_png);
    manifest.checksum(input_csv);

    const EncoderConfig cfg = enc.config();
    Dataset ds = load_csv(input_csv, num_classes);
    if (fraction < 1.0) {
        ds = stratified_subsample(ds, fraction, common.seed);
    }

    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<GafImage> images = encode_dataset(ds, cfg, common.threads);
    manifest.timing("encode", ms_since(t0));

    const fs::path out(common.out_dir);
    fs::create_directories(out);

    std::vector<int> labels;
    labels.reserve(ds.size());
    for (const auto& r : ds.records) labels.push_back(r.label);

    if (packed) {
        const nn::Tensor all = images_to_tensor(images);
        std::vector<std::uint32_t> dims;
        for (const int d : all.dims()) dims.push_back(static_cast<std::uint32_t>(d));
        const fs::path tensor_path = out / "encoded.gaf";
        write_tensor_file(tensor_path.string(), dims,
                          {all.values().begin(), all.values().end()});
        manifest.artifact(tensor_path);
    } else {
        char name[32];
        for (std::size_t i = 0; i < images.size(); ++i) {
            std::snprintf(name, sizeof(name), "rec_%05zu.gaf", i);
            const fs::path p = out / name;
            write_tensor_file(p.string(),
                              {static_cast<std::uint32_t>(images[i].height),
                               static_cast<std::uint32_t>(images[i].width),
                               static_cast<std::uint32_t>(images[i].channels)},
                              images[i].pixels);
            if (i < 3) manifest.artifact(p);
        }
        manifest.config("record_count", images.size());
    }

    const fs::path labels_path = out / "labels.csv";
    write_labels(labels_path, labels);
    manifest.artifact(labels_path);

    for (int i = 0; i < export_png && i < static_cast<int>(images.size()); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%d.png", i);
        const fs::path p = out / name;
        export_image(images[static_cast<std::size_t>(i)], p.string());
        manifest.artifact(p);
    }

    manifest.write(out);
    std::cout << "encoded " << images.size() << " records to " << common.out_dir << "\n";
    return 0;
}

int cmd_train(const CommonArgs& common, const EncoderArgs& enc, const std::string& train_csv,
              int num_classes, double fraction, const TrainConfig& tcfg_in, int dense_units,
              int head_units, const std::string& cache_dir) {
    Manifest manifest("train", common);
    manifest.config("train_csv", train_csv);
    manifest.config("num_classes", num_classes);
    manifest.config("subsample_fraction", fraction);
    manifest.config("gaf_kind", enc.gaf_kind);
    manifest.config("reduction", enc.reduction);
    manifest.config("size", enc.size);
    manifest.config("channels", enc.channels);
    manifest.config("epochs", tcfg_in.epochs);
    manifest.config("batch_size", tcfg_in.batch_size);
    manifest.config("learning_rate", tcfg_in.learning_rate);
    manifest.config("optimizer", nn::to_string(tcfg_in.optimizer));
    manifest.config("shuffle", tcfg_in.shuffle);
    manifest.config("dense_units", dense_units);
    manifest.config("head_units", head_units);
    manifest.config("cache_dir", cache_dir);
    manifest.checksum(train_csv);

    const EncodedSet set = load_and_encode(train_csv, num_classes, fraction, enc.config(), common,
                                           cache_dir, manifest, "encode");

    ModelConfig mcfg;
    mcfg.input_size = enc.size;
    mcfg.input_channels = enc.channels;
    mcfg.num_classes = num_classes;
    mcfg.dense_units = dense_units;
    mcfg.head_units = head_units;
    Model model = Model::build(mcfg, common.seed);
    manifest.config("parameter_count", model.parameter_count());
    manifest.config("shape_chain", model.shape_chain_str());

    TrainConfig tcfg = tcfg_in;
    tcfg.seed = common.seed;

    const auto t0 = std::chrono::steady_clock::now();
    const TrainTrace trace =
        train(model, set.images, set.labels, tcfg, [](const EpochStats& e) {
            std::printf("epoch %3d  loss %.4f  acc %.4f  (%.0f ms)\n", e.epoch, e.loss,
                        e.accuracy, e.wall_ms);
            std::fflush(stdout);
        });
    manifest.timing("train", ms_since(t0));

    const fs::path out(common.out_dir);
    fs::create_directories(out);
    const fs::path ckpt = out / "model.ckpt";
    model.save(ckpt.string());
    manifest.artifact(ckpt);
    const fs::path trace_path = out / "loss_trace.csv";
    export_trace(trace, trace_path.string());
    manifest.artifact(trace_path);
    manifest.write(out);
    std::cout << "checkpoint written to " << ckpt.string() << "\n";
    return 0;
}

int cmd_evaluate(const CommonArgs& common, const EncoderArgs& enc, const std::string& checkpoint,
                 const std::string& test_csv, int num_classes, double fraction, int batch_size,
                 const std::string& cache_dir) {
    Manifest manifest("evaluate", common);
    manifest.config("checkpoint", checkpoint);
    manifest.config("test_csv", test_csv);
    manifest.config("num_classes", num_classes);
    manifest.config("subsample_fraction", fraction);
    manifest.config("gaf_kind", enc.gaf_kind);
    manifest.config("reduction", enc.reduction);
    manifest.config("size", enc.size);
    manifest.config("channels", enc.channels);
    manifest.config("batch_size", batch_size);
    manifest.checksum(test_csv);

    Model model = Model::load(checkpoint);
    model.set_input_size(enc.size);
    if (model.config().input_channels != enc.channels) {
        throw ConfigError("checkpoint expects " + std::to_string(model.config().input_channels) +
                          " input channels but the encoder is configured for " +
                          std::to_string(enc.channels));
    }
    if (model.config().head() < num_classes) {
        throw ConfigError("checkpoint head width " + std::to_string(model.config().head()) +
                          " cannot score " + std::to_string(num_classes) + " classes");
    }

    const EncodedSet set = load_and_encode(test_csv, num_classes, fraction, enc.config(), common,
                                           cache_dir, manifest, "encode");

    const auto t0 = std::chrono::steady_clock::now();
    const EvalReport report = evaluate(model, set.images, set.labels, batch_size);
    manifest.timing("evaluate", ms_since(t0));

    const fs::path out(common.out_dir);
    export_report(report, out.string());
    manifest.artifact(out / "metrics.txt");
    manifest.artifact(out / "confusion.csv");
    for (std::size_t c = 0; c < report.roc.size(); ++c) {
        manifest.artifact(out / ("roc_class_" + std::to_string(c) + ".csv"));
    }
    manifest.write(out);

    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    std::printf("accuracy    %.6f\n", report.accuracy);
    std::printf("f1_macro    %.6f\n", report.f1_macro);
    std::printf("f1_weighted %.6f\n", report.f1_weighted);
    return 0;
}

int cmd_report(const std::string& report_dir) {
    const fs::path dir(report_dir);
    std::ifstream metrics(dir / "metrics.txt");
    if (!metrics) {
        throw IoError("no metrics.txt under " + report_dir);
    }
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(metrics, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    std::cout << "evaluation summary (" << report_dir << ")\n";
    for (const char* key : {"accuracy", "f1_macro", "f1_weighted", "total_samples", "num_classes"}) {
        if (kv.count(key)) std::cout << "  " << key << " = " << kv[key] << "\n";
    }
    const int k = kv.count("num_classes") ? std::stoi(kv["num_classes"]) : 0;
    for (int c = 0; c < k; ++c) {
        const std::string f1key = "f1_class_" + std::to_string(c);
        const std::string auckey = "auc_class_" + std::to_string(c);
        std::cout << "  class " << c << ": f1 = " << (kv.count(f1key) ? kv[f1key] : "?")
                  << ", auc = " << (kv.count(auckey) ? kv[auckey] : "?") << "\n";
    }

    std::ifstream confusion(dir / "confusion.csv");
    if (confusion) {
        std::cout << "confusion matrix (rows = true class):\n";
        bool header = true;
        while (std::getline(confusion, line)) {
            if (header) {
                header = false;
                continue;
            }
            std::cout << "  ";
            for (const char ch : line) std::cout << (ch == ',' ? '\t' : ch);
            std::cout << "\n";
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gramian angular field encoding and CNN classification for heartbeat segments"};
    app.require_subcommand(1);

    // encode
    auto* encode_cmd = app.add_subcommand("encode", "Encode a heartbeat CSV into GAF tensors");
    CommonArgs enc_common;
    EncoderArgs enc_enc;
    std::string enc_input;
    int enc_classes = 5;
    double enc_fraction = 1.0;
    bool enc_packed = false;
    int enc_png = 0;
    encode_cmd->add_option("--input-csv", enc_input, "Input CSV path")->required();
    encode_cmd->add_option("--num-classes", enc_classes, "Number of label classes");
    encode_cmd->add_option("--subsample-fraction", enc_fraction, "Stratified subsample fraction");
    encode_cmd->add_flag("--packed", enc_packed, "Write one rank-4 tensor file");
    encode_cmd->add_option("--export-png", enc_png, "Also export the first N records as PNGs");
    add_encoder(encode_cmd, enc_enc);
    add_common(encode_cmd, enc_common);

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the CNN on an encoded dataset");
    CommonArgs tr_common;
    EncoderArgs tr_enc;
    std::string tr_csv, tr_cache;
    int tr_classes = 5, tr_dense = 64, tr_head = 0;
    double tr_fraction = 1.0;
    TrainConfig tr_cfg;
    bool tr_no_shuffle = false;
    bool tr_no_cache = false;
    std::string tr_optimizer = "adam";
    train_cmd->add_option("--train-csv", tr_csv, "Training CSV path")->required();
    train_cmd->add_option("--num-classes", tr_classes, "Number of label classes");
    train_cmd->add_option("--subsample-fraction", tr_fraction, "Stratified subsample fraction");
    train_cmd->add_option("--epochs", tr_cfg.epochs, "Training epochs");
    train_cmd->add_option("--batch-size", tr_cfg.batch_size, "Mini-batch size");
    train_cmd->add_option("--learning-rate", tr_cfg.learning_rate, "Step size");
    train_cmd->add_option("--optimizer", tr_optimizer, "sgd or adam")
        ->check(CLI::IsMember({"sgd", "adam"}));
    train_cmd->add_option("--dense-units", tr_dense, "Width of the hidden dense layer");
    train_cmd->add_option("--head-units", tr_head,
                          "Output layer width (0 = num-classes; wider heads allowed)");
    train_cmd->add_flag("--no-shuffle", tr_no_shuffle, "Keep the sample order each epoch");
    train_cmd->add_option("--cache-dir", tr_cache, "Encoded tensor cache (default out-dir/cache)");
    train_cmd->add_flag("--no-cache", tr_no_cache, "Disable the encoded tensor cache");
    add_encoder(train_cmd, tr_enc);
    add_common(train_cmd, tr_common);

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on a test CSV");
    CommonArgs ev_common;
    EncoderArgs ev_enc;
    std::string ev_ckpt, ev_csv, ev_cache;
    int ev_classes = 5, ev_batch = 64;
    double ev_fraction = 1.0;
    bool ev_no_cache = false;
    eval_cmd->add_option("--checkpoint", ev_ckpt, "Model checkpoint path")->required();
    eval_cmd->add_option("--test-csv", ev_csv, "Test CSV path")->required();
    eval_cmd->add_option("--num-classes", ev_classes, "Number of label classes");
    eval_cmd->add_option("--subsample-fraction", ev_fraction, "Stratified subsample fraction");
    eval_cmd->add_option("--batch-size", ev_batch, "Evaluation batch size");
    eval_cmd->add_option("--cache-dir", ev_cache, "Encoded tensor cache (default out-dir/cache)");
    eval_cmd->add_flag("--no-cache", ev_no_cache, "Disable the encoded tensor cache");
    add_encoder(eval_cmd, ev_enc);
    add_common(eval_cmd, ev_common);

    // report
    auto* report_cmd = app.add_subcommand("report", "Print a saved evaluation report");
    std::string rp_dir;
    report_cmd->add_option("--report-dir", rp_dir, "Directory with metrics.txt")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (encode_cmd->parsed()) {
            set_default_threads(enc_common.threads);
            return cmd_encode(enc_common, enc_enc, enc_input, enc_classes, enc_fraction,
                              enc_packed, enc_png);
        }
        if (train_cmd->parsed()) {
            set_default_threads(tr_common.threads);
            tr_cfg.optimizer = nn::optimizer_kind_from_string(tr_optimizer);
            tr_cfg.shuffle = !tr_no_shuffle;
            std::string cache = tr_no_cache ? std::string{}
                                            : (tr_cache.empty()
                                                   ? (fs::path(tr_common.out_dir) / "cache").string()
                                                   : tr_cache);
            return cmd_train(tr_common, tr_enc, tr_csv, tr_classes, tr_fraction, tr_cfg, tr_dense,
                             tr_head, cache);
        }
        if (eval_cmd->parsed()) {
            set_default_threads(ev_common.threads);
            std::string cache = ev_no_cache ? std::string{}
                                            : (ev_cache.empty()
                                                   ? (fs::path(ev_common.out_dir) / "cache").string()
                                                   : ev_cache);
            return cmd_evaluate(ev_common, ev_enc, ev_ckpt, ev_csv, ev_classes, ev_fraction,
                                ev_batch, cache);
        }
        if (report_cmd->parsed()) {
            return cmd_report(rp_dir);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
