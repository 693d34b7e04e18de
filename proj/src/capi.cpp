#include "mo3tr.h"

#include <cstring>
#include <filesystem>
#include <sstream>
#include <vector>

#include "mo3tr/checkpoint.hpp"
#include "mo3tr/config.hpp"
#include "mo3tr/errors.hpp"
#include "mo3tr/model.hpp"
#include "mo3tr/motmetrics.hpp"
#include "mo3tr/synthworld.hpp"
#include "mo3tr/training.hpp"

namespace fs = std::filesystem;

struct mo3tr_config {
    mo3tr::RunConfig cfg;
};

namespace {

thread_local std::string g_last_error;

mo3tr_status status_from(const mo3tr::Error& e) {
    using mo3tr::ErrorKind;
    switch (e.kind()) {
        case ErrorKind::Io:
            return MO3TR_ERR_IO;
        case ErrorKind::Config:
            return MO3TR_ERR_CONFIG;
        case ErrorKind::Parse:
            return MO3TR_ERR_PARSE;
        case ErrorKind::Data:
        case ErrorKind::Eval:
            return MO3TR_ERR_DATA;
        case ErrorKind::Numeric:
            return MO3TR_ERR_NUMERIC;
        case ErrorKind::Usage:
        case ErrorKind::Dimension:
        case ErrorKind::Ordering:
        case ErrorKind::Lookup:
        case ErrorKind::Geometry:
            return MO3TR_ERR_ARGUMENT;
    }
    return MO3TR_ERR_INTERNAL;
}

template <typename Fn>
mo3tr_status guarded(Fn&& fn) {
    try {
        fn();
        return MO3TR_OK;
    } catch (const mo3tr::Error& e) {
        g_last_error = std::string(mo3tr::error_kind_name(e.kind())) + ": " + e.what();
        return status_from(e);
    } catch (const std::exception& e) {
        g_last_error = std::string("internal: ") + e.what();
        return MO3TR_ERR_INTERNAL;
    }
}

mo3tr_status require_args(bool ok) {
    if (!ok) {
        g_last_error = "argument: null pointer";
        return MO3TR_ERR_ARGUMENT;
    }
    return MO3TR_OK;
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

// All sequence base paths (path without the .scene.json suffix) in a
// directory, sorted by name.
std::vector<std::string> sequence_bases(const std::string& dir) {
    if (!fs::is_directory(dir)) {
        throw mo3tr::Error(mo3tr::ErrorKind::Io, "not a directory: " + dir);
    }
    std::vector<std::string> bases;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::string name = entry.path().filename().string();
        const std::string suffix = ".scene.json";
        if (name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            bases.push_back((entry.path().parent_path() /
                             name.substr(0, name.size() - suffix.size()))
                                .string());
        }
    }
    std::sort(bases.begin(), bases.end());
    if (bases.empty()) {
        throw mo3tr::Error(mo3tr::ErrorKind::Io, "no .scene.json sequences in " + dir);
    }
    return bases;
}

std::vector<int> parse_caps(const char* caps_csv) {
    std::vector<int> caps;
    std::stringstream ss(caps_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            int cap = std::stoi(item, &used);
            if (used != item.size() || cap < 1) throw std::invalid_argument("cap");
            caps.push_back(cap);
        } catch (const std::exception&) {
            throw mo3tr::Error(mo3tr::ErrorKind::Config, "bad history cap '" + item + "'");
        }
    }
    if (caps.empty()) {
        throw mo3tr::Error(mo3tr::ErrorKind::Config, "no history caps given");
    }
    return caps;
}

} // namespace

extern "C" {

const char* mo3tr_version(void) { return "0.1.0"; }

const char* mo3tr_last_error(void) { return g_last_error.c_str(); }

void mo3tr_text_free(char* text) { std::free(text); }

mo3tr_config* mo3tr_config_new(void) { return new mo3tr_config(); }

void mo3tr_config_free(mo3tr_config* cfg) { delete cfg; }

mo3tr_status mo3tr_config_load_file(mo3tr_config* cfg, const char* path) {
    if (auto s = require_args(cfg && path); s != MO3TR_OK) return s;
    return guarded([&]() { cfg->cfg.load_file(path); });
}

mo3tr_status mo3tr_config_set(mo3tr_config* cfg, const char* key, const char* value) {
    if (auto s = require_args(cfg && key && value); s != MO3TR_OK) return s;
    return guarded([&]() { cfg->cfg.set(key, value); });
}

mo3tr_status mo3tr_config_dump(const mo3tr_config* cfg, char** out_text) {
    if (auto s = require_args(cfg && out_text); s != MO3TR_OK) return s;
    return guarded([&]() { *out_text = dup_string(cfg->cfg.dump()); });
}

mo3tr_status mo3tr_gen(const mo3tr_config* cfg, const char* suite, const char* out_dir) {
    if (auto s = require_args(cfg && suite && out_dir); s != MO3TR_OK) return s;
    return guarded([&]() {
        fs::create_directories(out_dir);
        for (const mo3tr::ScenarioSpec& spec : mo3tr::standard_suite(suite)) {
            mo3tr::SyntheticSequence seq = mo3tr::generate(spec);
            std::string base = (fs::path(out_dir) / spec.name).string();
            mo3tr::save_sequence(seq, base);
            mo3tr::write_mot_file(mo3tr::trackfile_from_gt(seq), base + ".gt.txt");
        }
        cfg->cfg.write_file((fs::path(out_dir) / "effective.cfg").string());
    });
}

mo3tr_status mo3tr_train(const mo3tr_config* cfg, const char* data_dir,
                         const char* out_checkpoint) {
    if (auto s = require_args(cfg && data_dir && out_checkpoint); s != MO3TR_OK) return s;
    return guarded([&]() {
        std::vector<mo3tr::SyntheticSequence> data;
        for (const std::string& base : sequence_bases(data_dir)) {
            data.push_back(mo3tr::load_sequence(base));
        }
        mo3tr::ModelConfig model_cfg = cfg->cfg.model_config();
        mo3tr::TrainingConfig train_cfg = cfg->cfg.training_config();
        mo3tr::Mo3trModel model(model_cfg, cfg->cfg.get_u64("seed"));
        std::string out = out_checkpoint;
        mo3tr::train(model, data, train_cfg, out + ".loss.csv", out);
        mo3tr::save_checkpoint(model, out);
        cfg->cfg.write_file(out + ".effective.cfg");
    });
}

mo3tr_status mo3tr_track(const mo3tr_config* cfg, const char* checkpoint,
                         const char* sequence_base, const char* out_track_file,
                         const mo3tr_track_options* opts) {
    if (auto s = require_args(checkpoint && sequence_base && out_track_file); s != MO3TR_OK)
        return s;
    return guarded([&]() {
        mo3tr::Mo3trModel model = mo3tr::load_checkpoint(checkpoint);
        if (cfg != nullptr) {
            model.set_filter_thresholds(cfg->cfg.get_double("filter.cd_threshold"),
                                        cfg->cfg.get_double("filter.iou_threshold"));
        }
        mo3tr::SyntheticSequence seq = mo3tr::load_sequence(sequence_base);

        mo3tr::TrackingOptions topts;
        mo3tr::PublicDetections dets;
        if (opts != nullptr) {
            topts.history_cap = opts->history_cap;
            if (opts->attention_dump != nullptr) topts.attention_dump_path = opts->attention_dump;
            if (opts->embeddings_dump != nullptr)
                topts.embeddings_dump_path = opts->embeddings_dump;
            if (opts->public_detections != nullptr) {
                if (opts->filter_mode == nullptr) {
                    throw mo3tr::Error(mo3tr::ErrorKind::Config,
                                       "--filter is required with public detections");
                }
                dets = mo3tr::load_public_detections(opts->public_detections);
                topts.detections = &dets;
                topts.filter_mode = opts->filter_mode;
            } else if (opts->filter_mode != nullptr && std::strlen(opts->filter_mode) > 0) {
                throw mo3tr::Error(mo3tr::ErrorKind::Config,
                                   "--filter given without public detections");
            }
        }
        mo3tr::TrackFile out = mo3tr::track_sequence(model, seq, topts);
        mo3tr::write_mot_file(out, out_track_file);
    });
}

mo3tr_status mo3tr_eval(const char* hyp_path, const char* gt_path, double iou_threshold,
                        char** out_table, char** out_json) {
    if (auto s = require_args(hyp_path && gt_path); s != MO3TR_OK) return s;
    return guarded([&]() {
        mo3tr::TrackFile hyp = mo3tr::parse_mot_file(hyp_path);
        mo3tr::TrackFile gt = mo3tr::parse_mot_file(gt_path);
        mo3tr::MetricReport rep = mo3tr::evaluate(hyp, gt, iou_threshold);
        rep.name = fs::path(hyp_path).filename().string();
        std::vector<mo3tr::MetricReport> reports = {rep};
        if (out_table != nullptr) *out_table = dup_string(mo3tr::render_report_table(reports));
        if (out_json != nullptr) *out_json = dup_string(mo3tr::report_to_json(reports));
    });
}

mo3tr_status mo3tr_ablate(const mo3tr_config* cfg, const char* checkpoint,
                          const char* suite_dir, const char* caps_csv, char** out_table) {
    (void)cfg;
    if (auto s = require_args(checkpoint && suite_dir && caps_csv && out_table); s != MO3TR_OK)
        return s;
    return guarded([&]() {
        mo3tr::Mo3trModel model = mo3tr::load_checkpoint(checkpoint);
        std::vector<std::string> bases = sequence_bases(suite_dir);
        double eval_iou = 0.5;

        std::ostringstream table;
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%6s %8s %8s %8s %8s %6s\n", "cap", "MOTA", "IDF1",
                      "FP", "FN", "IDs");
        table << buf;
        for (int cap : parse_caps(caps_csv)) {
            std::vector<mo3tr::MetricReport> reports;
            for (const std::string& base : bases) {
                mo3tr::SyntheticSequence seq = mo3tr::load_sequence(base);
                mo3tr::TrackingOptions topts;
                topts.history_cap = cap;
                mo3tr::TrackFile hyp = mo3tr::track_sequence(model, seq, topts);
                reports.push_back(mo3tr::evaluate(hyp, mo3tr::trackfile_from_gt(seq), eval_iou));
            }
            mo3tr::MetricReport total = mo3tr::aggregate(reports);
            std::snprintf(buf, sizeof(buf), "%6d %8.3f %8.3f %8lld %8lld %6lld\n", cap,
                          total.mota, total.idf1, static_cast<long long>(total.fp),
                          static_cast<long long>(total.fn),
                          static_cast<long long>(total.id_switches));
            table << buf;
        }
        *out_table = dup_string(table.str());
    });
}

} // extern "C"
