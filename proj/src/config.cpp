#include "vcmr/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace vcmr {

namespace {

int to_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const int x = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("key \"" + key + "\": not an integer: " + v);
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("key \"" + key + "\": not a number: " + v);
    }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const std::uint64_t x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("key \"" + key + "\": not an unsigned integer: " + v);
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw ConfigError("key \"" + key + "\": expected on/off, got " + v);
}

std::string scoring_name(Scoring s) {
    switch (s) {
        case Scoring::general: return "general";
        case Scoring::exclusive: return "exclusive";
        case Scoring::disjoint: return "disjoint";
    }
    return "?";
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
    using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
    static const std::map<std::string, Setter> setters = {
        {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); }},
        {"precision",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v == "f32") c.precision = Precision::f32;
             else if (v == "f64") c.precision = Precision::f64;
             else throw ConfigError("key \"" + k + "\": expected f32/f64, got " + v);
         }},
        {"clip_len", [](RunConfig& c, const std::string& k, const std::string& v) { c.clip_len = to_double(k, v); }},
        {"stage1",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v != "file" && v != "simplified")
                 throw ConfigError("key \"" + k + "\": expected file/simplified, got " + v);
             c.stage1 = v;
         }},
        // model
        {"hidden", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.hidden = to_int(k, v); }},
        {"heads", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.heads = to_int(k, v); }},
        {"layers", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.layers = to_int(k, v); }},
        {"max_clips", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.max_clips = to_int(k, v); }},
        {"max_tokens", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.max_tokens = to_int(k, v); }},
        {"dim_visual", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.dim_visual = to_int(k, v); }},
        {"dim_textual", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.dim_textual = to_int(k, v); }},
        {"clusters", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.clusters = to_int(k, v); }},
        {"conv_kernel", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.conv_kernel = to_int(k, v); }},
        {"qdf",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v == "learned") c.model.qdf = QdfMode::learned;
             else if (v == "average") c.model.qdf = QdfMode::average;
             else throw ConfigError("key \"" + k + "\": expected learned/average, got " + v);
         }},
        {"qal", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.qal = to_bool(k, v); }},
        {"vs_head", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.vs_head = to_bool(k, v); }},
        {"identity_transformers",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.model.identity_transformers = to_bool(k, v); }},
        // training (spec key names)
        {"lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.lr = to_double(k, v); }},
        {"weight_decay", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.weight_decay = to_double(k, v); }},
        {"n_neg", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.n_neg = to_int(k, v); }},
        {"depth_extension_x", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.depth_extension_x = to_int(k, v); }},
        {"loss_w_moment", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.loss_w_moment = to_double(k, v); }},
        {"loss_w_video", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.loss_w_video = to_double(k, v); }},
        {"scoring",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v == "general") c.train.scoring = Scoring::general;
             else if (v == "exclusive") c.train.scoring = Scoring::exclusive;
             else if (v == "disjoint") c.train.scoring = Scoring::disjoint;
             else throw ConfigError("key \"" + k + "\": expected general/exclusive/disjoint, got " + v);
         }},
        {"patience", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.patience = to_int(k, v); }},
        {"exclusion_depth", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.exclusion_depth = to_int(k, v); }},
        {"epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.epochs = to_int(k, v); }},
        // retrieval
        {"top_k", [](RunConfig& c, const std::string& k, const std::string& v) { c.retrieval.top_k = to_int(k, v); }},
        {"nms_iou", [](RunConfig& c, const std::string& k, const std::string& v) { c.retrieval.nms_iou = to_double(k, v); }},
        {"keep_n", [](RunConfig& c, const std::string& k, const std::string& v) { c.retrieval.keep_n = to_int(k, v); }},
        {"l_min", [](RunConfig& c, const std::string& k, const std::string& v) { c.retrieval.bounds.l_min = to_int(k, v); }},
        {"l_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.retrieval.bounds.l_max = to_int(k, v); }},
        // synthetic generator
        {"synth_videos", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.videos = to_int(k, v); }},
        {"synth_clips_min", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.clips_min = to_int(k, v); }},
        {"synth_clips_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.clips_max = to_int(k, v); }},
        {"synth_queries_per_video", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.queries_per_video = to_int(k, v); }},
        {"synth_snr", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.snr = to_double(k, v); }},
        {"synth_beta", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.beta = to_double(k, v); }},
        {"synth_beta_alt", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.beta_alt = to_double(k, v); }},
        {"synth_beta_alt_fraction", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.beta_alt_fraction = to_double(k, v); }},
        {"synth_dim_latent", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.dim_latent = to_int(k, v); }},
        {"synth_tokens_min", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.tokens_min = to_int(k, v); }},
        {"synth_tokens_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.tokens_max = to_int(k, v); }},
        {"synth_token_noise", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.token_noise = to_double(k, v); }},
        {"synth_span_min", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.span_min = to_int(k, v); }},
        {"synth_span_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.span_max = to_int(k, v); }},
        {"synth_val_fraction", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.val_fraction = to_double(k, v); }},
        {"synth_rank_top", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.rank_top = to_int(k, v); }},
        {"synth_rank_noise", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.rank_noise = to_double(k, v); }},
    };

    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown key \"" + key + "\"");
    it->second(*this, key, value);
}

void RunConfig::apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value, got \"" + kv + "\"");
    apply(kv.substr(0, eq), kv.substr(eq + 1));
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    RunConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        // strip comments and whitespace
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
        auto strip = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        cfg.apply(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
    }
    return cfg;
}

void RunConfig::finalize() {
    synth.clip_len = clip_len;
    synth.dim_visual = model.dim_visual;
    synth.dim_textual = model.dim_textual;
    synth.seed = seed;
    train.seed = seed;
    train.precision = precision;
    retrieval.scoring = train.scoring;  // one `scoring` key drives both
    train.retrieval = retrieval;
    model.validate();
    retrieval.bounds.validate();
    if (retrieval.nms_iou <= 0.0 || retrieval.nms_iou > 1.0)
        throw ConfigError("nms_iou must be in (0,1]");
    if (retrieval.top_k < 1) throw ConfigError("top_k must be >= 1");
    if (retrieval.keep_n < 1) throw ConfigError("keep_n must be >= 1");
    if (clip_len <= 0.0) throw ConfigError("clip_len must be positive");
    if (train.lr <= 0.0) throw ConfigError("lr must be positive");
    if (train.n_neg < 0) throw ConfigError("n_neg must be >= 0");
    if (train.patience < 1) throw ConfigError("patience must be >= 1");
    if (train.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (train.exclusion_depth < 1) throw ConfigError("exclusion_depth must be >= 1");
}

std::string RunConfig::resolved_text() const {
    std::ostringstream os;
    os.precision(12);
    os << "clip_len=" << clip_len << "\n";
    os << "clusters=" << model.clusters << "\n";
    os << "conv_kernel=" << model.conv_kernel << "\n";
    os << "depth_extension_x=" << train.depth_extension_x << "\n";
    os << "dim_textual=" << model.dim_textual << "\n";
    os << "dim_visual=" << model.dim_visual << "\n";
    os << "epochs=" << train.epochs << "\n";
    os << "exclusion_depth=" << train.exclusion_depth << "\n";
    os << "heads=" << model.heads << "\n";
    os << "hidden=" << model.hidden << "\n";
    os << "identity_transformers=" << (model.identity_transformers ? "on" : "off") << "\n";
    os << "keep_n=" << retrieval.keep_n << "\n";
    os << "l_max=" << retrieval.bounds.l_max << "\n";
    os << "l_min=" << retrieval.bounds.l_min << "\n";
    os << "layers=" << model.layers << "\n";
    os << "loss_w_moment=" << train.loss_w_moment << "\n";
    os << "loss_w_video=" << train.loss_w_video << "\n";
    os << "lr=" << train.lr << "\n";
    os << "max_clips=" << model.max_clips << "\n";
    os << "max_tokens=" << model.max_tokens << "\n";
    os << "n_neg=" << train.n_neg << "\n";
    os << "nms_iou=" << retrieval.nms_iou << "\n";
    os << "patience=" << train.patience << "\n";
    os << "precision=" << (precision == Precision::f32 ? "f32" : "f64") << "\n";
    os << "qal=" << (model.qal ? "on" : "off") << "\n";
    os << "qdf=" << (model.qdf == QdfMode::learned ? "learned" : "average") << "\n";
    os << "scoring=" << scoring_name(train.scoring) << "\n";
    os << "seed=" << seed << "\n";
    os << "stage1=" << stage1 << "\n";
    os << "synth_beta=" << synth.beta << "\n";
    os << "synth_beta_alt=" << synth.beta_alt << "\n";
    os << "synth_beta_alt_fraction=" << synth.beta_alt_fraction << "\n";
    os << "synth_clips_max=" << synth.clips_max << "\n";
    os << "synth_clips_min=" << synth.clips_min << "\n";
    os << "synth_dim_latent=" << synth.dim_latent << "\n";
    os << "synth_queries_per_video=" << synth.queries_per_video << "\n";
    os << "synth_rank_noise=" << synth.rank_noise << "\n";
    os << "synth_rank_top=" << synth.rank_top << "\n";
    os << "synth_snr=" << synth.snr << "\n";
    os << "synth_span_max=" << synth.span_max << "\n";
    os << "synth_span_min=" << synth.span_min << "\n";
    os << "synth_token_noise=" << synth.token_noise << "\n";
    os << "synth_tokens_max=" << synth.tokens_max << "\n";
    os << "synth_tokens_min=" << synth.tokens_min << "\n";
    os << "synth_val_fraction=" << synth.val_fraction << "\n";
    os << "synth_videos=" << synth.videos << "\n";
    os << "top_k=" << retrieval.top_k << "\n";
    os << "vs_head=" << (model.vs_head ? "on" : "off") << "\n";
    os << "weight_decay=" << train.weight_decay << "\n";
    return os.str();
}

}  // namespace vcmr
