#include "vcmr/model.hpp"

#include <cmath>

#include "vcmr/container.hpp"

namespace vcmr {

namespace {

ModelConfig validated(ModelConfig cfg) {
    cfg.validate();
    return cfg;
}

}  // namespace

Model::Model(ModelConfig cfg, std::uint64_t seed)
    : cfg_(validated(cfg)),
      params_(seed),
      enc_(EncoderWeights::create(params_, cfg_)),
      vlad_(NetVladWeights::create(params_, cfg_)),
      fusion_(FusionHeadWeights::create(params_, cfg_)),
      qal_(TrilinearWeights::create(params_, cfg_)),
      ml_(MlHeadWeights::create(params_, cfg_, cfg_.qal ? 4 * cfg_.hidden : cfg_.hidden)),
      vs_(VsHeadWeights::create(params_, cfg_, cfg_.qal ? 4 * cfg_.hidden : cfg_.hidden)),
      stage1_pool_visual_(params_.vector("stage1.query_pool_visual", cfg_.hidden)),
      stage1_pool_textual_(params_.vector("stage1.query_pool_textual", cfg_.hidden)),
      baseline_pool_(params_.vector("baseline.query_pool", cfg_.hidden)) {}

QueryContext Model::make_query_context(const Matrix& tokens) const {
    QueryContext q;
    q.query = encode_query(tokens, cfg_, enc_);
    if (cfg_.qdf == QdfMode::learned) {
        q.descriptor = netvlad_aggregate(q.query, vlad_);
        q.fusion = fusion_weights(q.descriptor, fusion_);
    } else {
        q.fusion = FusionWeights::average();
    }
    return q;
}

Tensor Model::clip_features(const ContextualizedVideo& video, const QueryContext& q) const {
    Tensor gamma = fuse(video, q.fusion);
    if (!cfg_.qal)
        return baseline_couple(gamma, q.query.tokens, baseline_pool_, q.query.token_mask,
                               video.clip_mask);
    Tensor a = similarity_matrix(gamma, q.query.tokens, qal_, video.clip_mask,
                                 q.query.token_mask);
    Tensor eta = v2q_attend(a, q.query.tokens, q.query.token_mask);
    Tensor q_v = q2v_attend(a, gamma, video.clip_mask);
    return assemble_qal(gamma, eta, q_v, video.clip_mask);
}

Model::VideoOutput Model::forward_video(const ContextualizedVideo& video,
                                        const QueryContext& q) const {
    Tensor feats = clip_features(video, q);
    VideoOutput out;
    out.scores = ml_head(feats, video.clip_mask, ml_);
    if (cfg_.vs_head) out.video_score = vs_head(feats, video.clip_mask, vs_);
    return out;
}

double Model::stage1_similarity(const ContextualizedVideo& video, const QueryContext& q) const {
    NoGradGuard ng;
    auto mean_pool = [&](const Tensor& x) {
        std::vector<double> acc(static_cast<size_t>(x.dim(1)), 0.0);
        int n = 0;
        for (int i = 0; i < x.dim(0); ++i) {
            if (!video.clip_mask[static_cast<size_t>(i)]) continue;
            ++n;
            for (int j = 0; j < x.dim(1); ++j)
                acc[static_cast<size_t>(j)] += x.at(static_cast<int64_t>(i) * x.dim(1) + j);
        }
        if (n == 0) throw InvalidArgument("stage1: fully masked video");
        for (double& v : acc) v /= n;
        return acc;
    };
    auto cosine = [](const std::vector<double>& a, const std::vector<double>& b) {
        double dot = 0, na = 0, nb = 0;
        for (size_t i = 0; i < a.size(); ++i) {
            dot += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        const double d = std::sqrt(na) * std::sqrt(nb);
        return d > 0 ? dot / d : 0.0;
    };

    Tensor qv = attention_pool(q.query.tokens, stage1_pool_visual_, q.query.token_mask);
    Tensor qt = attention_pool(q.query.tokens, stage1_pool_textual_, q.query.token_mask);
    const double sim_v = cosine(qv.values(), mean_pool(video.visual));
    const double sim_t = cosine(qt.values(), mean_pool(video.textual));
    return q.fusion.mu_v.item() * sim_v + q.fusion.mu_t.item() * sim_t;
}

void Model::save(const std::string& path) const {
    std::vector<NamedTensor> ts;
    for (const Parameter& p : params_.all())
        ts.push_back({p.name, p.tensor.shape(), p.tensor.values()});
    write_container(path, ts);
}

void Model::load(const std::string& path) {
    auto ts = read_container(path);
    for (Parameter& p : params_.all()) {
        const NamedTensor& t = find_tensor(ts, p.name, path);
        if (t.shape != p.tensor.shape())
            throw IoError(path + ": shape mismatch for parameter \"" + p.name + "\"");
        p.tensor.mutable_values() = t.data;
    }
    if (ts.size() != params_.count())
        throw IoError(path + ": checkpoint has " + std::to_string(ts.size()) +
                      " records, model expects " + std::to_string(params_.count()));
}

}  // namespace vcmr
