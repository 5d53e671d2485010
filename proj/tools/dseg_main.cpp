// Command-line front end: train, infer, eval, decouple-labels, make-synthetic, report-model.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "dseg/dataset.hpp"
#include "dseg/infer.hpp"
#include "dseg/kernels.hpp"
#include "dseg/labels.hpp"
#include "dseg/metrics.hpp"
#include "dseg/synthetic.hpp"
#include "dseg/train.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace dseg;

namespace {

/// `--config` file plus one `--<key>` flag per configuration key; flags win.
class ConfigFlags {
public:
    ConfigFlags(CLI::App* app, bool with_train) {
        app->add_option("--config", file_, "key = value configuration file");
        app->add_option("--preset", preset_, "ablation preset applied to the model config");
        for (const auto& [k, v] : ModelConfig{}.to_map()) add(app, k, v);
        if (with_train) {
            for (const auto& [k, v] : TrainConfig{}.to_map()) add(app, k, v);
        }
    }

    [[nodiscard]] kv::Map merged() const {
        kv::Map kv = file_.empty() ? kv::Map{} : kv::load(file_);
        for (const auto& [k, v] : values_) {
            if (!v.empty()) kv[k] = v;
        }
        kv::require_known(kv, known_);
        return kv;
    }

    [[nodiscard]] ModelConfig model() const {
        ModelConfig m = ModelConfig::from_map(merged());
        if (!preset_.empty()) m = apply_preset(m, preset_);
        return m;
    }

    [[nodiscard]] TrainConfig train() const { return TrainConfig::from_map(merged()); }

private:
    void add(CLI::App* app, const std::string& key, const std::string& def) {
        if (!known_.insert(key).second) return;
        app->add_option("--" + key, values_[key], "default: " + (def.empty() ? std::string("(none)") : def));
    }

    std::string file_;
    std::string preset_;
    std::set<std::string> known_;
    std::map<std::string, std::string> values_;
};

nlohmann::json report_json(const metrics::Report& r) {
    return {{"id", r.image_id}, {"max_f", r.max_f}, {"weighted_f", r.weighted_f}, {"mae", r.mae},
            {"s_measure", r.s_measure}, {"e_measure", r.e_measure}, {"hce", r.hce}};
}

int cmd_train(const std::string& data, const std::string& out, const std::string& resume, const ConfigFlags& cfg) {
    const ModelConfig mc = cfg.model();
    const TrainConfig tc = cfg.train();
    Dataset ds = load_dataset(data);
    if (const auto bad = verify_dataset_labels(ds); !bad.empty()) {
        throw std::runtime_error("stored trunk/structure labels are inconsistent with the mask for '" + bad.front() +
                                 "' (" + std::to_string(bad.size()) + " samples)");
    }
    Trainer trainer(std::move(ds), mc, tc);
    if (!resume.empty()) trainer.resume(resume);
    fs::create_directories(out);
    kv::Map all = mc.to_map();
    for (const auto& [k, v] : tc.to_map()) all[k] = v;
    kv::save((fs::path(out) / "config.txt").string(), all);

    const auto t0 = std::chrono::steady_clock::now();
    const std::int64_t total = trainer.total_steps();
    TrainOptions opts;
    opts.out_dir = out;
    opts.on_step = [&](const StepLog& s) {
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::fprintf(stderr, "step %lld/%lld epoch %d loss %.5f lr %.5g/%.5g (%.1fs)\n",
                     static_cast<long long>(s.step + 1), static_cast<long long>(total), s.epoch, s.loss.total,
                     s.lr.backbone, s.lr.head, sec);
    };
    const TrainResult r = trainer.run(opts);
    std::cout << nlohmann::json{{"steps", r.steps}, {"epochs", r.epochs_completed}, {"checkpoint", r.last_checkpoint}}.dump()
              << '\n';
    return 0;
}

int cmd_eval(const std::string& preds, const std::string& gts, int gamma, const std::string& out,
             const std::string& csv, int jobs) {
    metrics::Params p;
    p.hce_gamma = gamma;
    const auto reports = metrics::evaluate_directory(preds, gts, p, jobs);
    const metrics::Aggregate a = metrics::aggregate(reports);
    const nlohmann::json agg = {{"aggregate",
                                 {{"count", a.count}, {"gamma", gamma}, {"max_f", a.max_f},
                                  {"weighted_f", a.weighted_f}, {"mae", a.mae}, {"s_measure", a.s_measure},
                                  {"e_measure", a.e_measure}, {"hce", a.hce}}}};
    std::ofstream f;
    std::ostream* os = &std::cout;
    if (!out.empty()) {
        f.open(out);
        if (!f) throw std::runtime_error("cannot write " + out);
        os = &f;
    }
    for (const auto& r : reports) *os << report_json(r).dump() << '\n';
    *os << agg.dump() << '\n';
    if (!csv.empty()) {
        std::ofstream c(csv);
        if (!c) throw std::runtime_error("cannot write " + csv);
        c << "id,max_f,weighted_f,mae,s_measure,e_measure,hce\n";
        c.precision(10);
        for (const auto& r : reports) {
            c << r.image_id << ',' << r.max_f << ',' << r.weighted_f << ',' << r.mae << ',' << r.s_measure << ','
              << r.e_measure << ',' << r.hce << '\n';
        }
    }
    if (!out.empty()) std::cout << agg.dump() << '\n';
    return 0;
}

int cmd_decouple(const std::string& masks, const std::string& out, int band_width) {
    std::vector<fs::path> files;
    if (fs::is_directory(masks)) {
        for (const auto& e : fs::directory_iterator(masks)) {
            const auto ext = e.path().extension().string();
            if (e.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg")) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
    } else if (fs::is_regular_file(masks)) {
        files.emplace_back(masks);
    } else {
        throw std::runtime_error("mask path not found: " + masks);
    }
    fs::create_directories(out);
    for (const auto& f : files) {
        const Mask m = threshold(read_gray(f.string()), 0.5f);
        const int d = band_width >= 0 ? band_width : default_band_width(std::max(m.height, m.width));
        const LabelTriplet t = decouple(m, d);
        const std::string stem = f.stem().string();
        write_mask_png((fs::path(out) / (stem + "_trunk.png")).string(), t.trunk);
        write_mask_png((fs::path(out) / (stem + "_struct.png")).string(), t.structure);
        std::cout << nlohmann::json{{"id", stem}, {"band_width", d}, {"mask", t.mask.count()},
                                    {"trunk", t.trunk.count()}, {"structure", t.structure.count()}}
                         .dump()
                  << '\n';
    }
    return 0;
}

int cmd_report(const ConfigFlags& cfg) {
    const ModelConfig mc = cfg.model();
    mc.validate_buildable();
    const Model<float> meta(mc, 0, true);
    const std::uint64_t macs = count_macs(mc);
    nlohmann::json j = {{"config", mc.to_map()},
                        {"params", meta.store().count()},
                        {"backbone_params", meta.store().count(true)},
                        {"macs", macs},
                        {"gmacs", static_cast<double>(macs) / 1e9},
                        {"gflops_2x", 2.0 * static_cast<double>(macs) / 1e9},
                        {"isa", std::string(kernels::isa_name(kernels::active_isa()))}};
    std::cout << j.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dichotomous image segmentation: training, inference and evaluation"};
    app.require_subcommand(1);

    auto* train = app.add_subcommand("train", "train a model");
    std::string data, train_out, resume;
    train->add_option("--data", data, "dataset directory or manifest (relative paths also tried under $DSEG_DATA_ROOT)")
        ->required();
    train->add_option("--out", train_out, "output directory for checkpoints and logs")->required();
    train->add_option("--resume", resume, "checkpoint to continue from");
    ConfigFlags train_cfg(train, true);

    auto* infer_cmd = app.add_subcommand("infer", "predict masks for an image or a directory");
    std::string input, checkpoint, infer_out;
    InferOptions iopts;
    infer_cmd->add_option("--input", input, "image file or directory")->required();
    infer_cmd->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    infer_cmd->add_option("--out", infer_out, "output directory")->required();
    infer_cmd->add_flag("--dump-aux", iopts.dump_aux, "also write trunk and structure maps");
    infer_cmd->add_flag("--dump-features", iopts.dump_features, "also write feature heat maps");

    auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
    std::string preds, gts, eval_out, csv;
    int gamma = 5;
    int jobs = 1;
    eval->add_option("--preds", preds, "prediction directory")->required();
    eval->add_option("--gts", gts, "ground-truth directory")->required();
    eval->add_option("--gamma", gamma, "HCE tolerance radius")->check(CLI::NonNegativeNumber);
    eval->add_option("--out", eval_out, "JSON-lines report (stdout when omitted)");
    eval->add_option("--csv", csv, "optional per-image CSV");
    eval->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

    auto* dec = app.add_subcommand("decouple-labels", "write trunk and structure labels for masks");
    std::string masks, dec_out;
    int band_width = -1;
    dec->add_option("--masks", masks, "mask file or directory")->required();
    dec->add_option("--out", dec_out, "output directory")->required();
    dec->add_option("--band-width", band_width, "band width in pixels (default scales with image size)");

    auto* syn = app.add_subcommand("make-synthetic", "generate a synthetic dataset");
    SyntheticOptions sopts;
    std::string syn_out;
    syn->add_option("--count", sopts.count, "number of samples")->required()->check(CLI::NonNegativeNumber);
    syn->add_option("--size", sopts.size, "image side in pixels");
    syn->add_option("--seed", sopts.seed, "generator seed");
    syn->add_option("--band-width", sopts.band_width, "band width for the stored labels");
    syn->add_option("--out", syn_out, "output directory")->required();

    auto* report = app.add_subcommand("report-model", "print parameter and multiply-accumulate counts");
    ConfigFlags report_cfg(report, false);

    CLI11_PARSE(app, argc, argv);
    try {
        if (train->parsed()) return cmd_train(data, train_out, resume, train_cfg);
        if (infer_cmd->parsed()) {
            for (const auto& p : infer(input, checkpoint, infer_out, iopts)) std::cout << p << '\n';
            return 0;
        }
        if (eval->parsed()) return cmd_eval(preds, gts, gamma, eval_out, csv, jobs);
        if (dec->parsed()) return cmd_decouple(masks, dec_out, band_width);
        if (syn->parsed()) {
            const Dataset ds = make_synthetic(sopts, syn_out);
            std::cout << nlohmann::json{{"count", ds.size()}, {"manifest", (fs::path(syn_out) / "manifest.json").string()}}.dump()
                      << '\n';
            return 0;
        }
        if (report->parsed()) return cmd_report(report_cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
