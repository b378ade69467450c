#include "dfv2/model_config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace dfv2 {

std::size_t ModelConfig::ffn_hidden(std::size_t stage) const {
    return static_cast<std::size_t>(std::llround(static_cast<double>(stage_dims[stage]) * ffn_ratio));
}

void ModelConfig::validate() const {
    for (std::size_t s = 0; s < kNumStages; ++s) {
        if (stage_dims[s] == 0 || stage_heads[s] == 0 || stage_depths[s] == 0) {
            throw ParameterError("stage " + std::to_string(s) + ": dims, depths and heads must be positive");
        }
        if (stage_dims[s] % stage_heads[s] != 0) {
            throw ParameterError("stage " + std::to_string(s) + ": " + std::to_string(stage_dims[s]) +
                                 " channels not divisible by " + std::to_string(stage_heads[s]) + " heads");
        }
        if (ffn_hidden(s) == 0) throw ParameterError("ffn_ratio yields an empty hidden layer");
    }
    if (stage_dims[0] % 2 != 0) throw ParameterError("stage 0 width must be even (stem mid-width is half of it)");
    if (num_classes == 0) throw ParameterError("num_classes must be >= 1");
    if (decoder_dim == 0) throw ParameterError("decoder_dim must be >= 1");
    if (!(ffn_ratio > 0.0)) throw ParameterError("ffn_ratio must be positive");
    if (fusion != FusionMode::Memory && !(priors.depth && priors.spatial)) {
        throw ParameterError("fusion mode '" + std::string(fusion_mode_name(fusion)) + "' needs both priors enabled");
    }
    sample_decay_rates(decay, 1);
}

ModelConfig ModelConfig::nano() {
    return ModelConfig{};
}

ModelConfig ModelConfig::tiny() {
    ModelConfig c;
    c.stage_dims = {8, 16, 24, 32};
    c.stage_depths = {1, 1, 1, 1};
    c.stage_heads = {1, 2, 3, 4};
    c.decoder_dim = 8;
    return c;
}

AblationArm parse_arm(std::string_view name) {
    if (name == "vanilla") return AblationArm::Vanilla;
    if (name == "depth-only") return AblationArm::DepthOnly;
    if (name == "spatial-only") return AblationArm::SpatialOnly;
    if (name == "both") return AblationArm::Both;
    if (name == "both-axial") return AblationArm::BothAxial;
    throw ParameterError("unknown arm '" + std::string(name) +
                         "' (expected vanilla, depth-only, spatial-only, both or both-axial)");
}

std::string_view arm_name(AblationArm arm) {
    switch (arm) {
    case AblationArm::Vanilla: return "vanilla";
    case AblationArm::DepthOnly: return "depth-only";
    case AblationArm::SpatialOnly: return "spatial-only";
    case AblationArm::Both: return "both";
    case AblationArm::BothAxial: return "both-axial";
    }
    return "both-axial";
}

void apply_arm(ModelConfig& config, AblationArm arm) {
    config.decompose = arm == AblationArm::BothAxial;
    switch (arm) {
    case AblationArm::Vanilla: config.priors = {false, false}; break;
    case AblationArm::DepthOnly: config.priors = {true, false}; break;
    case AblationArm::SpatialOnly: config.priors = {false, true}; break;
    case AblationArm::Both:
    case AblationArm::BothAxial: config.priors = {true, true}; break;
    }
    if (!(config.priors.depth && config.priors.spatial)) config.fusion = FusionMode::Memory;
}

void TrainConfig::validate() const {
    if (batch == 0) throw ParameterError("batch must be >= 1");
    if (!(lr >= 0.0)) throw ParameterError("lr must be non-negative");
    if (!(weight_decay >= 0.0)) throw ParameterError("weight_decay must be non-negative");
    if (!(poly_power > 0.0)) throw ParameterError("poly_power must be positive");
    if (!(grad_clip >= 0.0)) throw ParameterError("grad_clip must be non-negative");
    if (train_samples == 0 || val_samples == 0) throw ParameterError("sample counts must be >= 1");
    if (image_size == 0 || image_size % kInputDivisor != 0) {
        throw ParameterError("image_size must be a positive multiple of " + std::to_string(kInputDivisor));
    }
    if (log_every == 0) throw ParameterError("log_every must be >= 1");
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

struct FieldError {
    std::string message;
};

std::size_t to_size(const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
        throw FieldError{"expected a non-negative integer, got '" + v + "'"};
    }
    return static_cast<std::size_t>(std::stoull(v));
}

double to_double(const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw FieldError{"expected a number, got '" + v + "'"};
    }
}

bool to_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw FieldError{"expected true/false, got '" + v + "'"};
}

std::array<std::size_t, kNumStages> to_quad(const std::string& v) {
    std::array<std::size_t, kNumStages> out{};
    std::stringstream ss(v);
    std::string item;
    std::size_t i = 0;
    while (std::getline(ss, item, ',')) {
        if (i == kNumStages) throw FieldError{"expected exactly 4 comma-separated values, got '" + v + "'"};
        out[i++] = to_size(trim(item));
    }
    if (i != kNumStages) throw FieldError{"expected exactly 4 comma-separated values, got '" + v + "'"};
    return out;
}

std::string quad_text(const std::array<std::size_t, kNumStages>& q) {
    std::string s;
    for (std::size_t i = 0; i < kNumStages; ++i) s += (i ? "," : "") + std::to_string(q[i]);
    return s;
}

std::string priors_text(PriorTerms t) {
    if (t.depth && t.spatial) return "both";
    if (t.depth) return "depth";
    if (t.spatial) return "spatial";
    return "none";
}

PriorTerms to_priors(const std::string& v) {
    if (v == "both") return {true, true};
    if (v == "depth") return {true, false};
    if (v == "spatial") return {false, true};
    if (v == "none") return {false, false};
    throw FieldError{"expected both, depth, spatial or none, got '" + v + "'"};
}

std::string num_text(double d) {
    std::ostringstream os;
    os.precision(17);
    os << d;
    return os.str();
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"stage_dims", [](RunConfig& c, const std::string& v) { c.model.stage_dims = to_quad(v); }},
        {"stage_depths", [](RunConfig& c, const std::string& v) { c.model.stage_depths = to_quad(v); }},
        {"stage_heads", [](RunConfig& c, const std::string& v) { c.model.stage_heads = to_quad(v); }},
        {"num_classes", [](RunConfig& c, const std::string& v) { c.model.num_classes = to_size(v); }},
        {"ffn_ratio", [](RunConfig& c, const std::string& v) { c.model.ffn_ratio = to_double(v); }},
        {"decoder_dim", [](RunConfig& c, const std::string& v) { c.model.decoder_dim = to_size(v); }},
        {"decay",
         [](RunConfig& c, const std::string& v) {
             try {
                 c.model.decay = DecayStrategy::parse(v);
             } catch (const ParameterError& e) {
                 throw FieldError{e.what()};
             }
         }},
        {"fusion",
         [](RunConfig& c, const std::string& v) {
             try {
                 c.model.fusion = parse_fusion_mode(v);
             } catch (const ParameterError& e) {
                 throw FieldError{e.what()};
             }
         }},
        {"priors", [](RunConfig& c, const std::string& v) { c.model.priors = to_priors(v); }},
        {"decompose", [](RunConfig& c, const std::string& v) { c.model.decompose = to_bool(v); }},
        {"batch", [](RunConfig& c, const std::string& v) { c.train.batch = to_size(v); }},
        {"steps", [](RunConfig& c, const std::string& v) { c.train.steps = to_size(v); }},
        {"lr", [](RunConfig& c, const std::string& v) { c.train.lr = to_double(v); }},
        {"weight_decay", [](RunConfig& c, const std::string& v) { c.train.weight_decay = to_double(v); }},
        {"poly_power", [](RunConfig& c, const std::string& v) { c.train.poly_power = to_double(v); }},
        {"warmup_steps", [](RunConfig& c, const std::string& v) { c.train.warmup_steps = to_size(v); }},
        {"grad_clip", [](RunConfig& c, const std::string& v) { c.train.grad_clip = to_double(v); }},
        {"train_samples", [](RunConfig& c, const std::string& v) { c.train.train_samples = to_size(v); }},
        {"val_samples", [](RunConfig& c, const std::string& v) { c.train.val_samples = to_size(v); }},
        {"image_size", [](RunConfig& c, const std::string& v) { c.train.image_size = to_size(v); }},
        {"log_every", [](RunConfig& c, const std::string& v) { c.train.log_every = to_size(v); }},
        {"augment", [](RunConfig& c, const std::string& v) { c.train.augment = to_bool(v); }},
        {"precision",
         [](RunConfig& c, const std::string& v) {
             if (v == "wide") {
                 c.train.precision = Precision::Wide;
             } else if (v == "narrow") {
                 c.train.precision = Precision::Narrow;
             } else {
                 throw FieldError{"expected wide or narrow, got '" + v + "'"};
             }
         }},
    };
    return table;
}

} // namespace

RunConfig parse_run_config(std::string_view text, std::string_view source) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    const auto fail = [&](const std::string& msg) {
        throw ParseError(std::string(source) + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) fail("expected 'key = value', got '" + body + "'");
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) fail("unknown key '" + key + "'");
        if (!seen.insert(key).second) fail("duplicate key '" + key + "'");
        try {
            it->second(cfg, value);
        } catch (const FieldError& e) {
            fail(key + ": " + e.message);
        }
    }
    try {
        cfg.model.validate();
        cfg.train.validate();
    } catch (const ParameterError& e) {
        throw ParseError(std::string(source) + ": " + e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_run_config(ss.str(), path.string());
}

std::string format_run_config(const RunConfig& c) {
    std::ostringstream os;
    os << "stage_dims = " << quad_text(c.model.stage_dims) << "\n"
       << "stage_depths = " << quad_text(c.model.stage_depths) << "\n"
       << "stage_heads = " << quad_text(c.model.stage_heads) << "\n"
       << "num_classes = " << c.model.num_classes << "\n"
       << "ffn_ratio = " << num_text(c.model.ffn_ratio) << "\n"
       << "decoder_dim = " << c.model.decoder_dim << "\n"
       << "decay = " << c.model.decay.to_string() << "\n"
       << "fusion = " << fusion_mode_name(c.model.fusion) << "\n"
       << "priors = " << priors_text(c.model.priors) << "\n"
       << "decompose = " << (c.model.decompose ? "true" : "false") << "\n"
       << "batch = " << c.train.batch << "\n"
       << "steps = " << c.train.steps << "\n"
       << "lr = " << num_text(c.train.lr) << "\n"
       << "weight_decay = " << num_text(c.train.weight_decay) << "\n"
       << "poly_power = " << num_text(c.train.poly_power) << "\n"
       << "warmup_steps = " << c.train.warmup_steps << "\n"
       << "grad_clip = " << num_text(c.train.grad_clip) << "\n"
       << "train_samples = " << c.train.train_samples << "\n"
       << "val_samples = " << c.train.val_samples << "\n"
       << "image_size = " << c.train.image_size << "\n"
       << "log_every = " << c.train.log_every << "\n"
       << "augment = " << (c.train.augment ? "true" : "false") << "\n"
       << "precision = " << precision_name(c.train.precision) << "\n";
    return os.str();
}

} // namespace dfv2
