#include "mo3tr/config.hpp"

#include <fstream>
#include <sstream>

namespace mo3tr {

namespace {

struct SchemaItem {
    const char* key;
    const char* def;
    char kind; // i, d, b, u, s
};

// hyperparameter defaults follow the reference configuration; desk-scale runs
// override epochs, dimensions and grid through config files
const SchemaItem kSchema[] = {
    {"model.d_z", "256", 'i'},
    {"model.num_heads", "8", 'i'},
    {"model.temporal_layers", "3", 'i'},
    {"model.encoder_layers", "6", 'i'},
    {"model.decoder_layers", "6", 'i'},
    {"model.ffn_mult", "4", 'i'},
    {"model.num_queries", "100", 'i'},
    {"model.grid_h", "16", 'i'},
    {"model.grid_w", "16", 'i'},
    {"model.channels", "8", 'i'},
    {"model.query_mode", "learned", 's'},
    {"track.alignment_width", "30", 'i'},
    {"track.patience", "5", 'i'},
    {"filter.cd_threshold", "1", 'd'},
    {"filter.iou_threshold", "0.5", 'd'},
    {"train.history_min", "1", 'i'},
    {"train.history_max", "30", 'i'},
    {"train.future_horizon", "10", 'i'},
    {"train.learning_rate", "0.0001", 'd'},
    {"train.lr_decay_epochs", "100", 'i'},
    {"train.stage1_epochs", "20", 'i'},
    {"train.stage2_epochs", "20", 'i'},
    {"train.batch_size", "4", 'i'},
    {"train.stage1_frames_per_epoch", "0", 'i'},
    {"train.stage2_steps_per_epoch", "0", 'i'},
    {"train.aug_fn", "true", 'b'},
    {"train.aug_fp", "true", 'b'},
    {"train.aug_random_len", "true", 'b'},
    {"train.aug_right_align", "true", 'b'},
    {"train.p_fn", "0.15", 'd'},
    {"train.p_fp", "0.1", 'd'},
    {"train.bg_weight", "0.1", 'd'},
    {"train.future_loss_weight", "1", 'd'},
    {"train.piq_aux_weight", "0.1", 'd'},
    {"train.checkpoint_every", "0", 'i'},
    {"cost.alpha_l1", "5", 'd'},
    {"cost.alpha_giou", "2", 'd'},
    {"eval.iou_threshold", "0.5", 'd'},
    {"seed", "0", 'u'},
};

void check_value(const std::string& key, char kind, const std::string& value) {
    try {
        std::size_t used = 0;
        switch (kind) {
            case 'i':
                std::stoi(value, &used);
                break;
            case 'd':
                std::stod(value, &used);
                break;
            case 'u':
                std::stoull(value, &used);
                break;
            case 'b':
                if (value != "true" && value != "false" && value != "0" && value != "1") {
                    throw std::invalid_argument("bool");
                }
                used = value.size();
                break;
            case 's':
                used = value.size();
                break;
        }
        if (used != value.size()) {
            throw std::invalid_argument("trailing");
        }
    } catch (const std::exception&) {
        throw Error(ErrorKind::Config, "bad value '" + value + "' for key '" + key + "'");
    }
}

} // namespace

RunConfig::RunConfig() {
    for (const SchemaItem& item : kSchema) {
        Kind k = item.kind == 'i'   ? Kind::Int
                 : item.kind == 'd' ? Kind::Double
                 : item.kind == 'b' ? Kind::Bool
                 : item.kind == 'u' ? Kind::U64
                                    : Kind::String;
        values_[item.key] = Entry{k, item.def};
    }
}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw Error(ErrorKind::Config, "unknown config key '" + key + "'");
    }
    char kind = it->second.kind == Kind::Int      ? 'i'
                : it->second.kind == Kind::Double ? 'd'
                : it->second.kind == Kind::Bool   ? 'b'
                : it->second.kind == Kind::U64    ? 'u'
                                                  : 's';
    check_value(key, kind, value);
    it->second.value = value;
}

void RunConfig::set_pair(const std::string& pair) {
    auto eq = pair.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw Error(ErrorKind::Config, "expected key=value, got '" + pair + "'");
    }
    set(pair.substr(0, eq), pair.substr(eq + 1));
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Io, "missing config file " + path);
    }
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        try {
            set_pair(line.substr(first));
        } catch (const Error& e) {
            throw Error(ErrorKind::Config,
                        path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) > 0; }

const RunConfig::Entry& RunConfig::entry(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw Error(ErrorKind::Config, "unknown config key '" + key + "'");
    }
    return it->second;
}

int RunConfig::get_int(const std::string& key) const { return std::stoi(entry(key).value); }
double RunConfig::get_double(const std::string& key) const { return std::stod(entry(key).value); }
uint64_t RunConfig::get_u64(const std::string& key) const { return std::stoull(entry(key).value); }
const std::string& RunConfig::get_string(const std::string& key) const { return entry(key).value; }

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& v = entry(key).value;
    return v == "true" || v == "1";
}

std::string RunConfig::dump() const {
    std::ostringstream out;
    for (const auto& [key, e] : values_) out << key << "=" << e.value << "\n";
    return out.str();
}

void RunConfig::write_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot write " + path);
    }
    out << dump();
}

ModelConfig RunConfig::model_config() const {
    ModelConfig cfg;
    cfg.d_z = get_int("model.d_z");
    cfg.num_heads = get_int("model.num_heads");
    cfg.temporal_layers = get_int("model.temporal_layers");
    cfg.encoder_layers = get_int("model.encoder_layers");
    cfg.decoder_layers = get_int("model.decoder_layers");
    cfg.ffn_mult = get_int("model.ffn_mult");
    cfg.num_queries = get_int("model.num_queries");
    cfg.grid_h = get_int("model.grid_h");
    cfg.grid_w = get_int("model.grid_w");
    cfg.channels = get_int("model.channels");
    cfg.query_mode = get_string("model.query_mode");
    cfg.alignment_width = get_int("track.alignment_width");
    cfg.patience = get_int("track.patience");
    cfg.cd_threshold = get_double("filter.cd_threshold");
    cfg.iou_threshold = get_double("filter.iou_threshold");
    cfg.validate();
    return cfg;
}

TrainingConfig RunConfig::training_config() const {
    TrainingConfig tc;
    tc.history_min = get_int("train.history_min");
    tc.history_max = get_int("train.history_max");
    tc.future_horizon = get_int("train.future_horizon");
    tc.learning_rate = get_double("train.learning_rate");
    tc.lr_decay_epochs = get_int("train.lr_decay_epochs");
    tc.stage1_epochs = get_int("train.stage1_epochs");
    tc.stage2_epochs = get_int("train.stage2_epochs");
    tc.batch_size = get_int("train.batch_size");
    tc.stage1_frames_per_epoch = get_int("train.stage1_frames_per_epoch");
    tc.stage2_steps_per_epoch = get_int("train.stage2_steps_per_epoch");
    tc.aug_fn = get_bool("train.aug_fn");
    tc.aug_fp = get_bool("train.aug_fp");
    tc.aug_random_len = get_bool("train.aug_random_len");
    tc.aug_right_align = get_bool("train.aug_right_align");
    tc.p_fn = get_double("train.p_fn");
    tc.p_fp = get_double("train.p_fp");
    tc.bg_weight = get_double("train.bg_weight");
    tc.future_loss_weight = get_double("train.future_loss_weight");
    tc.piq_aux_weight = get_double("train.piq_aux_weight");
    tc.checkpoint_every = get_int("train.checkpoint_every");
    tc.cost.alpha_l1 = get_double("cost.alpha_l1");
    tc.cost.alpha_giou = get_double("cost.alpha_giou");
    tc.seed = get_u64("seed");
    return tc;
}

} // namespace mo3tr
